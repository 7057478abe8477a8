import csv
import math

import numpy as np
import pytest

from graphscatter import experiments as ex
from graphscatter.cli import main
from graphscatter.config import Experiment, ExperimentConfig, SweepRange, load_config, parse_config
from graphscatter.errors import ConfigError, DataError, InsufficientCorpus
from graphscatter.graph_core import generate_two_community, read_edgelist
from graphscatter.wan import load_function_words

TINY_SWEEP = dict(
    families=("monic_cubic", "tight_hann", "diffusion", "gft"),
    n_nodes=40, n_graphs=2, n_perturbations=2, n_signals=10, eps_range=SweepRange(0.05, 0.1, 2),
)


def write_config(path, **entries):
    path.write_text("".join(f"{k} = {v}\n" for k, v in entries.items()), encoding="utf-8")
    return path


def rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert (cfg.J, cfg.L, cfg.gft_coeff_count) == (6, 3, 43)
        assert np.allclose(cfg.eps_range.values(), np.arange(1, 11) / 10)
        p = cfg.p_range.values()
        assert len(p) == 10 and p[0] == pytest.approx(0.01) and p[-1] == pytest.approx(0.3)
        assert np.allclose(np.diff(np.log(p)), np.log(30) / 9)

    def test_parse(self):
        cfg = parse_config(
            "# comment\nexperiment = bound-check\nfamilies = tight_hann, gft  # trailing\n"
            "eps_range = 0.01, 0.1, 4, log\ninclude_sanity = yes\nseed = 5\nbound_slack = 0.25\n",
            seed=9,
        )
        assert cfg.experiment is Experiment.BOUND_CHECK
        assert cfg.families == ("tight_hann", "gft") and cfg.gst_families == ["tight_hann"]
        assert cfg.eps_range == SweepRange(0.01, 0.1, 4, "log")
        assert cfg.include_sanity and cfg.seed == 9 and cfg.bound_slack == 0.25

    @pytest.mark.parametrize(
        "text",
        [
            "bogus = 1",
            "J = six",
            "J = 0",
            "families = fourier",
            "gft_band = high_pass",
            "eps_range = 0, 1, 5, log",
            "eps_range = 1, 0.5, 5",
            "eps_range = 0.1, 1",
            "include_sanity = maybe",
            "no equals sign",
        ],
    )
    def test_errors(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.cfg")


class TestHelpers:
    def test_gft_band_pass_indices(self):
        idx = ex.gft_indices(234, 43, "band_pass")
        assert (idx[0], idx[-1], len(idx)) == (95, 137, 43)

    def test_gft_low_pass_indices(self):
        assert ex.gft_indices(100, 43, "low_pass").tolist() == list(range(43))
        assert len(ex.gft_indices(20, 43, "band_pass")) == 20

    def test_sweep_values(self):
        r = SweepRange(0.1, 0.3, 3)
        assert ex.sweep_values(r, True) == pytest.approx([0.0, 0.1, 0.2, 0.3])
        assert ex.sweep_values(r, False) == pytest.approx([0.1, 0.2, 0.3])

    def test_summarize_nesting(self):
        R = ex.Record
        recs = [R("e", "f", 0.1, 1, 0, "m", 1.0), R("e", "f", 0.1, 1, 1, "m", 3.0), R("e", "f", 0.1, 2, 0, "m", 6.0)]
        assert ex.summarize(recs, nested=True) == [("f", 0.1, "m", 4.0, 2.0, 2)]
        _, _, _, mean, std, count = ex.summarize(recs, nested=False)[0]
        assert (mean, count) == (pytest.approx(10 / 3), 3) and std == pytest.approx(np.std([1, 3, 6]))

    def test_diffusion_signals(self):
        g, _ = generate_two_community(30, 0.4, 0.05, 0)
        X = ex.diffusion_signals(g.weights, 3, 5)
        assert np.allclose(np.linalg.norm(X, axis=1), 1.0)
        v = np.linalg.matrix_power(g.weights, 4)[:, 3]
        assert np.allclose(X[4], v / np.linalg.norm(v))

    def test_check_finite(self):
        with pytest.raises(DataError):
            ex.check_finite([ex.Record("e", "f", 0.0, 0, 0, "m", math.nan)])

    def test_run_cells_counts_failures(self):
        def fn(c):
            if c == 2:
                raise DataError("boom")
            return c * 10

        assert ex.run_cells(fn, [1, 2, 3], threads=2) == ([10, 30], 1)


class TestStabilitySweep:
    def test_sanity_cell(self):
        cfg = ExperimentConfig(include_sanity=True, **TINY_SWEEP)
        res = ex.run_stability_sweep(cfg)
        zero = [r for r in res.records if r.sweep_value == 0.0]
        assert zero and all(r.metric_value <= 1e-9 for r in zero)
        assert res.skipped == 0

    def test_record_counts(self):
        cfg = ExperimentConfig(**TINY_SWEEP)
        res = ex.run_stability_sweep(cfg)
        err = [r for r in res.records if r.metric_name == "rel_error"]
        assert len(err) == 2 * 2 * 2 * 4
        assert {r.sweep_value for r in err} == {0.05, 0.1}
        bound = [r for r in res.records if r.metric_name == "theorem_bound"]
        assert len(bound) == 2 * 2 * 3

    def test_thread_independence(self):
        cfg = ExperimentConfig(**TINY_SWEEP)
        assert ex.run_stability_sweep(cfg, threads=1).records == ex.run_stability_sweep(cfg, threads=3).records


class TestBoundCheck:
    cfg = dict(TINY_SWEEP, families=("monic_cubic", "tight_hann", "diffusion"), include_sanity=True)

    def test_passes_and_zero_cell(self):
        res = ex.run_bound_check(ExperimentConfig(**self.cfg))
        assert res.violations == []
        assert all(r.metric_value == 0.0 for r in res.records if r.sweep_value == 0.0)

    def test_bound_doubles_with_eps(self):
        res = ex.run_bound_check(ExperimentConfig(**self.cfg))
        values = {(r.family, r.sweep_value): r.metric_value for r in res.records if r.metric_name == "rep_bound"}
        for fam in ("monic_cubic", "tight_hann", "diffusion"):
            assert values[(fam, 0.1)] == pytest.approx(2 * values[(fam, 0.05)], rel=1e-12)

    def test_exit_code_on_violation(self, tmp_path, monkeypatch):
        monkeypatch.setattr(ex.pt, "stability_bound", lambda *a, **k: 1e-12)
        cfg = write_config(tmp_path / "b.cfg", families="tight_hann", n_nodes=40, n_graphs=1, n_perturbations=1, n_signals=4, eps_range="0.1, 0.1, 1")
        assert main(["bound-check", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3

    def test_cli_success(self, tmp_path):
        cfg = write_config(tmp_path / "b.cfg", families="monic_cubic", n_nodes=40, n_graphs=1, n_perturbations=1, n_signals=4, eps_range="0.05, 0.1, 2")
        assert main(["bound-check", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        assert {p.name for p in (tmp_path / "o").iterdir()} == {
            "records.csv", "summary.csv", "plotdata_rep_diff.csv", "plotdata_rep_bound.csv"
        }


class TestSourceLocalization:
    def test_sanity_cell(self):
        cfg = ExperimentConfig(
            families=("tight_hann", "gft"), n_nodes=60, n_graphs=1, n_trials=2, n_train=100, n_test=200,
            p_range=SweepRange(0.1, 0.1, 1), include_sanity=True,
        )
        res = ex.run_source_localization(cfg)
        train = {r.family: r.metric_value for r in res.records if r.metric_name == "train_accuracy"}
        for r in res.records:
            if r.metric_name == "accuracy" and r.sweep_value == 0.0:
                assert abs(r.metric_value - train[r.family]) <= 0.02


def _write_author(directory, weights, n_docs, seed, words):
    rng = np.random.default_rng(seed)
    directory.mkdir(parents=True)
    fillers = ["river", "stone", "light", "window", "garden", "letter"]
    for d in range(n_docs):
        fw = rng.choice(words, size=200, p=weights)
        content = rng.choice(fillers, size=200)
        tokens = np.where(rng.random(200) < 0.6, fw, content)
        (directory / f"doc{d:02d}.txt").write_text(" ".join(tokens), encoding="utf-8")


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    words = list(load_function_words().words[:30])
    rng = np.random.default_rng(0)
    a, b = rng.dirichlet(np.ones(30)), rng.dirichlet(np.ones(30))
    _write_author(root / "positive", a, 10, 1, words)
    _write_author(root / "negative", b, 12, 2, words)
    return root


AUTHOR_CFG = dict(
    families=("tight_hann", "gft"), excerpt_length=50, n_trials=2, split_range=SweepRange(0.5, 0.9, 2), epochs=30,
)


class TestAuthorship:
    def test_ratio_arithmetic(self, corpus, monkeypatch):
        sizes = []
        real = ex.wan_mod.build_wan

        def spy(excerpts, *a, **k):
            sizes.append(len(excerpts))
            return real(excerpts, *a, **k)

        monkeypatch.setattr(ex.wan_mod, "build_wan", spy)
        ex.run_authorship(ExperimentConfig(**AUTHOR_CFG), corpus_dir=corpus)
        assert sorted(sizes) == [20, 20, 36, 36]

    def test_deterministic_and_accurate(self, corpus):
        cfg = ExperimentConfig(**AUTHOR_CFG)
        a, b = ex.run_authorship(cfg, corpus_dir=corpus), ex.run_authorship(cfg, corpus_dir=corpus, threads=2)
        assert a.records == b.records and len(a.records) == 8
        assert min(r.metric_value for r in a.records if r.family == "tight_hann") >= 0.75

    def test_insufficient_negatives(self, tmp_path):
        words = list(load_function_words().words[:30])
        _write_author(tmp_path / "positive", np.full(30, 1 / 30), 4, 1, words)
        _write_author(tmp_path / "negative", np.full(30, 1 / 30), 1, 2, words)
        with pytest.raises(InsufficientCorpus):
            ex.run_authorship(ExperimentConfig(**AUTHOR_CFG), corpus_dir=tmp_path)

    def test_missing_subdirectory(self, tmp_path):
        cfg = write_config(tmp_path / "a.cfg", corpus_dir=tmp_path / "none")
        assert main(["authorship", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4


class TestCli:
    def test_unknown_key_exit_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "x.cfg", bogus=1)
        assert main(["stability-sweep", "--config", str(cfg)]) == 2
        assert "bogus" in capsys.readouterr().err

    def test_stability_sweep_outputs_and_threads(self, tmp_path):
        cfg = write_config(
            tmp_path / "s.cfg", families="tight_hann, gft", n_nodes=40, n_graphs=2, n_perturbations=2,
            n_signals=5, eps_range="0.1, 0.5, 3",
        )
        for threads in (1, 4):
            assert main(["stability-sweep", "--config", str(cfg), "--out", str(tmp_path / f"t{threads}"), "--threads", str(threads)]) == 0
        for name in ("records.csv", "summary.csv", "plotdata_rel_error.csv"):
            assert (tmp_path / "t1" / name).read_bytes() == (tmp_path / "t4" / name).read_bytes()
        plot = rows(tmp_path / "t1" / "plotdata_rel_error.csv")
        assert len(plot) == 3 and set(plot[0]) == {"x", "gft_mean", "gft_std", "tight_hann_mean", "tight_hann_std"}
        assert all(math.isfinite(float(r["metric_value"])) for r in rows(tmp_path / "t1" / "records.csv"))

    def test_seed_override(self, tmp_path):
        cfg = write_config(tmp_path / "s.cfg", families="gft", n_nodes=30, n_graphs=1, n_perturbations=1, n_signals=3, eps_range="0.1, 0.1, 1")
        main(["stability-sweep", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "1"])
        main(["stability-sweep", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "2"])
        assert (tmp_path / "a" / "records.csv").read_bytes() != (tmp_path / "b" / "records.csv").read_bytes()

    def test_dump_kernels(self, tmp_path):
        cfg = write_config(tmp_path / "k.cfg", families="monic_cubic, tight_hann, diffusion", kernel_grid=50)
        assert main(["dump-kernels", "--config", str(cfg), "--out", str(tmp_path / "k")]) == 0
        data = rows(tmp_path / "k" / "kernels_tight_hann.csv")
        assert len(data) == 50

    def test_wan_build(self, tmp_path, corpus):
        cfg = write_config(tmp_path / "w.cfg", corpus_dir=corpus / "positive")
        assert main(["wan-build", "--config", str(cfg), "--out", str(tmp_path / "w")]) == 0
        g = read_edgelist(tmp_path / "w" / "wan.edgelist")
        dropped = (tmp_path / "w" / "dropped_words.txt").read_text().split()
        assert g.n + len(dropped) == 211 and g.weights.max() == pytest.approx(1.0)

    def test_wan_build_without_corpus(self, tmp_path):
        cfg = write_config(tmp_path / "w.cfg", seed=0)
        assert main(["wan-build", "--config", str(cfg), "--out", str(tmp_path / "w")]) == 4
