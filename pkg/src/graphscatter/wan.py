"""Word adjacency networks over a list of function words."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import EmptyCorpus, EmptyExcerpt, NoCooccurrences
from .graph_core import Graph, largest_component

DEFAULT_WINDOW = 10
DEFAULT_DECAY = 0.8
DEFAULT_EXCERPT_LENGTH = 1000

_TOKEN = re.compile(r"[^\W\d_]+(?:'[^\W\d_]+)*")


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens; apostrophes inside a word are kept."""
    text = text.lower().replace("’", "'")
    return _TOKEN.findall(text)


class FunctionalWordList:
    def __init__(self, words):
        words = [w.strip().lower() for w in words if w.strip()]
        if not words:
            raise ValueError("word list is empty")
        if len(set(words)) != len(words):
            raise ValueError("word list has duplicates")
        self.words = tuple(words)
        self.index = {w: i for i, w in enumerate(self.words)}

    def __len__(self):
        return len(self.words)

    def __iter__(self):
        return iter(self.words)

    def ids(self, tokens) -> np.ndarray:
        """Word index per token, -1 for tokens outside the list."""
        return np.array([self.index.get(t, -1) for t in tokens], dtype=np.int64)


def load_function_words(path=None) -> FunctionalWordList:
    """Newline-separated list; the bundled 211-word English list by default."""
    if path is None:
        text = resources.files("graphscatter").joinpath("data/function_words.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return FunctionalWordList(line for line in text.splitlines() if not line.startswith("#"))


@dataclass
class Corpus:
    documents: list
    excerpt_length: int = DEFAULT_EXCERPT_LENGTH

    @classmethod
    def from_dir(cls, directory, excerpt_length: int = DEFAULT_EXCERPT_LENGTH) -> Corpus:
        files = sorted(p for p in Path(directory).iterdir() if p.is_file())
        docs = [(p.name, p.read_text(encoding="utf-8")) for p in files]
        return cls(docs, excerpt_length)

    def excerpts(self) -> list[list[str]]:
        """Consecutive chunks of ``excerpt_length`` tokens, document by document."""
        out = []
        for _, text in self.documents:
            tokens = tokenize(text)
            for start in range(0, len(tokens), self.excerpt_length):
                out.append(tokens[start : start + self.excerpt_length])
        return out


def directed_counts(excerpts, words: FunctionalWordList, window: int = DEFAULT_WINDOW, decay: float = DEFAULT_DECAY):
    """``D[u, v]`` = sum of ``decay^(k-1)`` over u followed by v at distance k <= window."""
    if window < 1:
        raise ValueError("window must be at least 1")
    if not 0 < decay <= 1:
        raise ValueError("decay must lie in (0, 1]")
    n = len(words)
    D = np.zeros((n, n))
    for tokens in excerpts:
        ids = words.ids(tokens)
        for k in range(1, window + 1):
            if k >= ids.size:
                break
            a, b = ids[:-k], ids[k:]
            ok = (a >= 0) & (b >= 0)
            np.add.at(D, (a[ok], b[ok]), decay ** (k - 1))
    return D


@dataclass
class WAN:
    graph: Graph
    words: FunctionalWordList
    kept: np.ndarray
    dropped: list

    def signal(self, tokens) -> np.ndarray:
        return frequency_signal(tokens, self.words)[self.kept]


def build_wan(excerpts, words: FunctionalWordList, window: int = DEFAULT_WINDOW, decay: float = DEFAULT_DECAY) -> WAN:
    """Symmetrized, max-normalized WAN restricted to its largest component."""
    if isinstance(excerpts, Corpus):
        excerpts = excerpts.excerpts()
    excerpts = [e for e in excerpts if len(e)]
    if not excerpts:
        raise EmptyCorpus("no tokens to build a network from")
    D = directed_counts(excerpts, words, window, decay)
    W = 0.5 * (D + D.T)
    np.fill_diagonal(W, 0.0)
    top = W.max()
    if top <= 0:
        raise NoCooccurrences("no two function words co-occur within the window")
    W = W / top
    full = Graph(W, list(words))
    sub, kept = largest_component(full)
    dropped = [w for i, w in enumerate(words) if i not in set(kept.tolist())]
    return WAN(sub, words, kept, dropped)


def frequency_signal(tokens, words: FunctionalWordList) -> np.ndarray:
    """Count of each word divided by the excerpt length."""
    if len(tokens) == 0:
        raise EmptyExcerpt("excerpt has no tokens")
    ids = words.ids(tokens)
    counts = np.bincount(ids[ids >= 0], minlength=len(words)).astype(float)
    return counts / len(tokens)
