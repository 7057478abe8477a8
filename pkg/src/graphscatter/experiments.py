"""Experiment orchestration: sweeps over graphs, perturbations and signals.

Every experiment is split into independent cells keyed by integer
coordinates. Each cell draws its randomness from a seed derived from the
master seed and its coordinates, so results do not depend on how cells are
scheduled across worker threads. Rows are written in cell order.
"""

from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import classify, perturbation as pt, scattering as sc, wan as wan_mod
from .config import Experiment, ExperimentConfig
from .errors import DataError, GraphScatterError, InsufficientCorpus
from .graph_core import (
    Graph,
    ShiftVariant,
    build_shift,
    derive_seed,
    generate_small_world,
    generate_two_community,
    read_edgelist,
    write_edgelist,
)
from .wavelets import WaveletBank, WaveletFamily, build_bank, dump_kernels

log = logging.getLogger(__name__)

# stream tags mixed into derived seeds
GRAPH, ERROR, SIGNALS, TRAIN, TEST, DROP, SPLIT = range(1, 8)


@dataclass(frozen=True)
class Record:
    experiment: str
    family: str
    sweep_value: float
    graph_seed: int
    trial: int
    metric_name: str
    metric_value: float


@dataclass
class ExperimentResult:
    records: list
    summary: list
    skipped: int = 0
    violations: list | None = None


# --- shared helpers --------------------------------------------------------


def gft_indices(n: int, count: int, band: str) -> np.ndarray:
    """Eigenvector indices kept by the truncated GFT (ascending eigenvalues)."""
    count = min(count, n)
    start = 0 if band == "low_pass" else (n - count) // 2
    return np.arange(start, start + count)


def gft_features(shift, X, indices=None) -> np.ndarray:
    V = shift.spectrum.eigenvectors
    return X @ (V if indices is None else V[:, indices])


def make_aggregator(kind: str, graph: Graph) -> sc.Aggregator:
    if kind == "degree_weighted":
        return sc.Aggregator.degree_weighted(graph)
    return sc.Aggregator.mean(graph.n)


def build_banks(cfg: ExperimentConfig, graph: Graph) -> dict:
    return {f: build_bank(WaveletFamily(f), graph, cfg.J) for f in cfg.gst_families}


def sweep_values(rng_cfg, include_sanity: bool) -> list[float]:
    vals = [float(v) for v in rng_cfg.values()]
    if include_sanity and 0.0 not in vals:
        vals = [0.0] + vals
    return vals


def run_cells(fn, cells, threads: int = 1):
    """Apply ``fn`` to every cell; failures become ``None`` and are counted."""

    def guarded(cell):
        try:
            return fn(cell)
        except (GraphScatterError, np.linalg.LinAlgError) as exc:
            log.warning("cell %s skipped: %s", cell, exc)
            return None

    if threads <= 1:
        results = [guarded(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(guarded, cells))
    skipped = sum(r is None for r in results)
    return [r for r in results if r is not None], skipped


def summarize(records, nested: bool) -> list[tuple]:
    """Mean and std per (family, sweep value, metric).

    With ``nested`` the trials of each graph are averaged first and the
    statistics are taken across graphs; otherwise across all trials.
    """
    groups = defaultdict(lambda: defaultdict(list))
    for r in records:
        key = (r.family, r.sweep_value, r.metric_name)
        groups[key][r.graph_seed if nested else (r.graph_seed, r.trial)].append(r.metric_value)
    rows = []
    for key in sorted(groups, key=lambda k: (k[2], k[0], k[1])):
        per_unit = np.array([np.mean(v) for v in groups[key].values()])
        rows.append((*key, float(np.mean(per_unit)), float(np.std(per_unit)), len(per_unit)))
    return rows


def write_outputs(result: ExperimentResult, out_dir, experiment: str, plot_metrics=()) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "records.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["experiment", "family", "sweep_value", "graph_seed", "trial", "metric_name", "metric_value"])
        for r in result.records:
            w.writerow([r.experiment, r.family, repr(r.sweep_value), r.graph_seed, r.trial, r.metric_name, repr(r.metric_value)])
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["experiment", "family", "sweep_value", "metric_name", "mean", "std", "count", "skipped_cells"])
        for fam, x, metric, mean, std, count in result.summary:
            w.writerow([experiment, fam, repr(x), metric, repr(mean), repr(std), count, result.skipped])
    for metric in plot_metrics:
        rows = [s for s in result.summary if s[2] == metric]
        fams = sorted({s[0] for s in rows})
        xs = sorted({s[1] for s in rows})
        table = {(s[0], s[1]): s for s in rows}
        with open(out / f"plotdata_{metric}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x"] + [f"{f}_{c}" for f in fams for c in ("mean", "std")])
            for x in xs:
                row = [repr(x)]
                for f in fams:
                    s = table.get((f, x))
                    row += ["", ""] if s is None else [repr(s[3]), repr(s[4])]
                w.writerow(row)


# --- stability sweep -------------------------------------------------------


def _sweep_graphs(cfg: ExperimentConfig, threads: int):
    def make(g):
        gseed = derive_seed(cfg.seed, GRAPH, g)
        graph = generate_small_world(cfg.n_nodes, cfg.p_edge, cfg.q_rewire, gseed)
        return gseed, graph, build_banks(cfg, graph), build_shift(graph, ShiftVariant.NORMALIZED_LAPLACIAN)

    graphs, skipped = run_cells(make, list(range(cfg.n_graphs)), threads)
    if not graphs:
        raise DataError("no graph realization could be built")
    return graphs, skipped


def _perturbed(graph: Graph, eps: float, seed: int):
    if eps == 0.0:
        return graph, None
    err = pt.dilation_error(graph.n, eps, seed)
    g_hat, _ = pt.perturb_adjacency(graph, err)
    return g_hat, err


def _bank_pair(bank: WaveletBank, g_hat: Graph, same: bool) -> WaveletBank:
    if same:
        return bank
    return bank.on_shift(build_shift(g_hat, bank.shift.variant))


def run_stability_sweep(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Relative representation error of each GST family and the full GFT."""
    name = Experiment.STABILITY_SWEEP.value
    graphs, skipped = _sweep_graphs(cfg, threads)
    eps_values = sweep_values(cfg.eps_range, cfg.include_sanity)
    cells = [(gi, k, r) for gi in range(len(graphs)) for k in range(len(eps_values)) for r in range(cfg.n_perturbations)]

    def cell(c):
        gi, k, r = c
        gseed, graph, banks, S = graphs[gi]
        eps = eps_values[k]
        g_hat, _ = _perturbed(graph, eps, derive_seed(cfg.seed, ERROR, gi, k, r))
        same = g_hat is graph
        X = np.random.default_rng(derive_seed(cfg.seed, SIGNALS, gi, k, r)).standard_normal((cfg.n_signals, graph.n))
        out = []
        agg, agg_hat = make_aggregator(cfg.aggregator, graph), make_aggregator(cfg.aggregator, g_hat)
        for fam in cfg.families:
            if fam == "gft":
                S_hat = S if same else build_shift(g_hat, S.variant)
                F, F_hat = gft_features(S, X), gft_features(S_hat, X)
            else:
                bank = banks[fam]
                F = sc.scatter_batch(bank, agg, X, cfg.L)
                F_hat = sc.scatter_batch(_bank_pair(bank, g_hat, same), agg_hat, X, cfg.L)
            rel = np.linalg.norm(F - F_hat, axis=1) / np.linalg.norm(F, axis=1)
            out.append(Record(name, fam, eps, gseed, r, "rel_error", float(np.mean(rel))))
        if r == 0:
            for fam in cfg.gst_families:
                bank = banks[fam]
                bound = pt.stability_bound(eps, bank.lipschitz_C, bank.frame_bounds[1], cfg.J, cfg.L)
                out.append(Record(name, fam, eps, gseed, r, "theorem_bound", bound))
        return out

    results, more = run_cells(cell, cells, threads)
    records = [rec for rs in results for rec in rs]
    return ExperimentResult(records, summarize(records, nested=True), skipped + more)


# --- bound check -----------------------------------------------------------


def run_bound_check(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Compare empirical differences with the wavelet, coefficient and full bounds.

    Violations are collected in ``result.violations``; the CLI turns them into
    a nonzero exit status.
    """
    name = Experiment.BOUND_CHECK.value
    graphs, skipped = _sweep_graphs(cfg, threads)
    eps_values = sweep_values(cfg.eps_range, cfg.include_sanity)
    paths = sc.enumerate_paths(cfg.J, cfg.L)
    layers = np.array([len(p) for p in paths])
    cells = [(gi, k, r) for gi in range(len(graphs)) for k in range(len(eps_values)) for r in range(cfg.n_perturbations)]

    def cell(c):
        gi, k, r = c
        gseed, graph, banks, _ = graphs[gi]
        eps = eps_values[k]
        g_hat, _ = _perturbed(graph, eps, derive_seed(cfg.seed, ERROR, gi, k, r))
        same = g_hat is graph
        X = np.random.default_rng(derive_seed(cfg.seed, SIGNALS, gi, k, r)).standard_normal((cfg.n_signals, graph.n))
        x_norm = np.linalg.norm(X, axis=1)
        agg, agg_hat = make_aggregator(cfg.aggregator, graph), make_aggregator(cfg.aggregator, g_hat)
        B_U = max(agg.B_U, agg_hat.B_U)
        eps_U = float(np.linalg.norm(agg.weights - agg_hat.weights))
        out, bad = [], []
        for fam in cfg.gst_families:
            bank = banks[fam]
            bank_hat = _bank_pair(bank, g_hat, same)
            B, C = bank.frame_bounds[1], bank.lipschitz_C
            wdiff = max(
                pt.wavelet_output_difference(bank, bank_hat, j, cfg.mc_trials, derive_seed(cfg.seed, TEST, gi, k, r, j))
                for j in range(1, bank.J + 1)
            )
            wbound = eps * C + cfg.bound_slack * (eps * C) ** 2
            F = sc.scatter_batch(bank, agg, X, cfg.L)
            F_hat = sc.scatter_batch(bank_hat, agg_hat, X, cfg.L)
            coeff_b = np.array([pt.coefficient_bound(eps, C, B, int(l), B_U, eps_U) for l in layers])
            diff = np.abs(F - F_hat)
            limit = coeff_b[None, :] * x_norm[:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(limit > 0, diff / limit, np.where(diff > 0, np.inf, 0.0))
            coeff_ratio = float(ratio.max())
            rep_diff = float(np.max(np.linalg.norm(F - F_hat, axis=1) / x_norm))
            rep_bound = pt.stability_bound(eps, C, B, cfg.J, cfg.L, B_U, eps_U)
            for metric, value in (
                ("wavelet_diff", wdiff),
                ("wavelet_bound", wbound),
                ("coeff_ratio", coeff_ratio),
                ("rep_diff", rep_diff),
                ("rep_bound", rep_bound),
            ):
                out.append(Record(name, fam, eps, gseed, r, metric, value))
            if wdiff > wbound * (1 + 1e-9) + 1e-12:
                bad.append((fam, eps, gseed, r, "wavelet"))
            if coeff_ratio > 1 + 1e-6:
                bad.append((fam, eps, gseed, r, "coefficient"))
            if rep_diff > rep_bound * (1 + 1e-6) + 1e-12:
                bad.append((fam, eps, gseed, r, "representation"))
        return out, bad

    results, more = run_cells(cell, cells, threads)
    records = [rec for rs, _ in results for rec in rs]
    violations = [v for _, bad in results for v in bad]
    return ExperimentResult(records, summarize(records, nested=True), skipped + more, violations)


# --- source localization ---------------------------------------------------


def diffusion_signals(W: np.ndarray, source: int, t_max: int) -> np.ndarray:
    """Rows ``W^t delta_source / ||W^t delta_source||`` for ``t < t_max``."""
    x = np.zeros(W.shape[0])
    x[source] = 1.0
    rows = []
    for _ in range(t_max):
        rows.append(x)
        y = W @ x
        nrm = np.linalg.norm(y)
        x = y / nrm if nrm > 0 else y
    return np.array(rows)


def _sample(table_by_label, n: int, t_max: int, rng) -> tuple[np.ndarray, np.ndarray]:
    labels = np.repeat([-1, 1], [n - n // 2, n // 2])
    t = rng.integers(0, t_max, size=n)
    X = np.array([table_by_label[y][ti] for y, ti in zip(labels, t)])
    return X, labels


def _features(fam: str, cfg, banks, agg, S, X) -> np.ndarray:
    if fam == "gft":
        return gft_features(S, X, gft_indices(S.n, cfg.gft_coeff_count, cfg.gft_band))
    return sc.scatter_batch(banks[fam], agg, X, cfg.L)


def _reg(cfg):
    return None if cfg.reg_lambda <= 0 else cfg.reg_lambda


def run_source_localization(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Classify which community started a diffusion, under random edge drops.

    Classifiers are trained on signals diffused over the original graph; test
    signals diffuse over an edge-dropped copy while features are still
    computed with the original graph.
    """
    name = Experiment.SOURCE_LOCALIZATION.value

    def prepare(g):
        gseed = derive_seed(cfg.seed, GRAPH, g)
        graph, labels = generate_two_community(cfg.n_nodes, cfg.p_in, cfg.p_out, gseed)
        sources = (int(np.flatnonzero(labels == 0)[0]), int(np.flatnonzero(labels == 1)[0]))
        banks = build_banks(cfg, graph)
        S = build_shift(graph, ShiftVariant.NORMALIZED_LAPLACIAN)
        agg = make_aggregator(cfg.aggregator, graph)
        W = graph.weights
        table = {-1: diffusion_signals(W, sources[0], cfg.t_max), 1: diffusion_signals(W, sources[1], cfg.t_max)}
        X, y = _sample(table, cfg.n_train, cfg.t_max, np.random.default_rng(derive_seed(cfg.seed, TRAIN, g)))
        models, train_acc = {}, {}
        for fam in cfg.families:
            data = classify.Dataset(_features(fam, cfg, banks, agg, S, X), y)
            model = classify.train_svm(data, _reg(cfg), cfg.epochs, derive_seed(cfg.seed, TRAIN, g, 1))
            models[fam] = model
            train_acc[fam] = classify.accuracy(classify.predict(model, data.features), y)
        return gseed, graph, sources, banks, S, agg, models, train_acc

    graphs, skipped = run_cells(prepare, list(range(cfg.n_graphs)), threads)
    if not graphs:
        raise DataError("no two-community graph could be built")
    p_values = sweep_values(cfg.p_range, cfg.include_sanity)
    cells = [(gi, k, r) for gi in range(len(graphs)) for k in range(len(p_values)) for r in range(cfg.n_trials)]

    def cell(c):
        gi, k, r = c
        gseed, graph, sources, banks, S, agg, models, _ = graphs[gi]
        p = p_values[k]
        W_hat = graph.weights if p == 0.0 else pt.edge_drop(graph, p, derive_seed(cfg.seed, DROP, gi, k, r)).perturbed_graph.weights
        table = {-1: diffusion_signals(W_hat, sources[0], cfg.t_max), 1: diffusion_signals(W_hat, sources[1], cfg.t_max)}
        X, y = _sample(table, cfg.n_test, cfg.t_max, np.random.default_rng(derive_seed(cfg.seed, TEST, gi, k, r)))
        out = []
        for fam in cfg.families:
            acc = classify.accuracy(classify.predict(models[fam], _features(fam, cfg, banks, agg, S, X)), y)
            out.append(Record(name, fam, p, gseed, r, "accuracy", acc))
        return out

    results, more = run_cells(cell, cells, threads)
    records = [rec for rs in results for rec in rs]
    for gseed, *_, train_acc in graphs:
        for fam in cfg.families:
            records.append(Record(name, fam, 0.0, gseed, 0, "train_accuracy", train_acc[fam]))
    return ExperimentResult(records, summarize(records, nested=False), skipped + more)


# --- authorship ------------------------------------------------------------


def load_authorship_corpus(corpus_dir, excerpt_length: int):
    """Full-length-ish excerpts from ``positive/`` and ``negative/`` subfolders."""
    root = Path(corpus_dir)
    out = []
    for sub in ("positive", "negative"):
        if not (root / sub).is_dir():
            raise DataError(f"missing corpus subdirectory {root / sub}")
        excerpts = wan_mod.Corpus.from_dir(root / sub, excerpt_length).excerpts()
        # a short trailing excerpt gives a noisy frequency signal
        out.append([e for e in excerpts if len(e) >= max(1, excerpt_length // 2)])
    return out


def run_authorship(cfg: ExperimentConfig, corpus_dir=None, word_list_path=None, threads: int = 1) -> ExperimentResult:
    """Positive-vs-negative excerpt classification on a WAN of the positive author.

    Positive excerpts are labeled +1 and negative ones -1.
    """
    name = Experiment.AUTHORSHIP.value
    positive, negative = load_authorship_corpus(corpus_dir or cfg.corpus_dir, cfg.excerpt_length)
    words = wan_mod.load_function_words(word_list_path or cfg.word_list or None)
    if len(positive) < 2:
        raise InsufficientCorpus("need at least two positive excerpts")
    if len(negative) < len(positive):
        raise InsufficientCorpus(f"{len(negative)} negative excerpts, need {len(positive)}")
    ratios = [float(v) for v in cfg.split_range.values()]
    cells = [(k, s) for k in range(len(ratios)) for s in range(cfg.n_trials)]
    P = len(positive)

    def cell(c):
        k, s = c
        rng = np.random.default_rng(derive_seed(cfg.seed, SPLIT, k, s))
        n_train = min(max(1, int(round(ratios[k] * P))), P - 1)
        perm = rng.permutation(P)
        neg = rng.permutation(len(negative))[:P]
        train_pos, test_pos = perm[:n_train], perm[n_train:]
        net = wan_mod.build_wan([positive[i] for i in train_pos], words, cfg.window, cfg.decay)
        graph = net.graph
        banks = build_banks(cfg, graph)
        S = build_shift(graph, ShiftVariant.NORMALIZED_LAPLACIAN)
        agg = make_aggregator(cfg.aggregator, graph)

        def signals(excerpts):
            return np.array([net.signal(e) for e in excerpts])

        X_tr = np.vstack([signals([positive[i] for i in train_pos]), signals([negative[i] for i in neg[:n_train]])])
        X_te = np.vstack([signals([positive[i] for i in test_pos]), signals([negative[i] for i in neg[n_train:]])])
        y_tr = np.repeat([1, -1], [n_train, n_train])
        y_te = np.repeat([1, -1], [P - n_train, P - n_train])
        out = []
        for fam in cfg.families:
            model = classify.train_svm(
                classify.Dataset(_features(fam, cfg, banks, agg, S, X_tr), y_tr),
                _reg(cfg),
                cfg.epochs,
                derive_seed(cfg.seed, TRAIN, k, s),
            )
            acc = classify.accuracy(classify.predict(model, _features(fam, cfg, banks, agg, S, X_te)), y_te)
            out.append(Record(name, fam, ratios[k], 0, s, "accuracy", acc))
        return out

    results, skipped = run_cells(cell, cells, threads)
    records = [rec for rs in results for rec in rs]
    return ExperimentResult(records, summarize(records, nested=False), skipped)


# --- utilities -------------------------------------------------------------


def config_graph(cfg: ExperimentConfig) -> Graph:
    if cfg.graph_file:
        return read_edgelist(cfg.graph_file)
    return generate_small_world(cfg.n_nodes, cfg.p_edge, cfg.q_rewire, derive_seed(cfg.seed, GRAPH, 0))


def run_dump_kernels(cfg: ExperimentConfig, out_dir) -> list[Path]:
    graph = config_graph(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for fam, bank in build_banks(cfg, graph).items():
        path = out / f"kernels_{fam}.csv"
        dump_kernels(bank, path, cfg.kernel_grid)
        paths.append(path)
    return paths


def run_wan_build(cfg: ExperimentConfig, out_dir) -> Path:
    if not cfg.corpus_dir:
        raise DataError("wan-build needs corpus_dir")
    corpus = wan_mod.Corpus.from_dir(cfg.corpus_dir, cfg.excerpt_length)
    words = wan_mod.load_function_words(cfg.word_list or None)
    net = wan_mod.build_wan(corpus, words, cfg.window, cfg.decay)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_edgelist(net.graph, out / "wan.edgelist")
    (out / "dropped_words.txt").write_text("".join(w + "\n" for w in net.dropped), encoding="utf-8")
    return out / "wan.edgelist"


def check_finite(records) -> None:
    bad = [r for r in records if not math.isfinite(r.metric_value)]
    if bad:
        raise DataError(f"{len(bad)} non-finite metric values, first: {bad[0]}")
