import csv
import os

import numpy as np
import pytest

from proxi_score_vi.errors import MetricMissing, ParseError, UnknownPreset, ValidationError
from proxi_score_vi.harness import (PRESET_NAMES, dump_config, expand_variants, parse_config,
                                    preset, read_csv, render_convergence_svg, run_matrix,
                                    write_csv, write_outputs)
from proxi_score_vi.harness.cli import EXIT_ABORTED, EXIT_FAILURE, EXIT_OK, main
from proxi_score_vi.metrics import MetricTrace

MINIMAL = """
[run]
name = "mini"
[target]
kind = "gaussian"
dim = 3
[family]
family = "gauss_full"
"""

SMALL = """
[run]
name = "small"
seeds = [0, 1]
[target]
kind = "gaussian"
dim = 2
[noise]
beta = [0.0, 1.0]
[family]
family = "gauss_full"
[algo]
T = 6
N = 3
learning_rate = 0.01
[metrics]
which = ["fkl", "nelbo"]
every_k_outer = 2
fkl_samples = 50
nelbo_samples = 50
"""

EXPLODING = """
[run]
name = "boom"
seeds = [0]
[target]
kind = "gaussian"
dim = 2
[family]
family = "gauss_full"
init = "small_eig"
[algo]
algo = ["proximal_sm", "advi"]
T = 20
N = 20
optimizer = "sgd"
learning_rate = 1e6
advi_learning_rate = 1e-3
[metrics]
which = ["fkl"]
fkl_samples = 20
"""


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------- parsing

def test_minimal_config_fills_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.algo.S == (1,)
    assert cfg.algo.N == 20
    assert cfg.metrics.fkl_samples == 500
    assert cfg.algo.algo == ("proximal_sm",)
    assert cfg.run.seeds == (0, 1, 2, 3, 4)
    assert cfg.dim == 3


def test_family_dim_mismatch_names_the_key():
    with pytest.raises(ValidationError) as info:
        parse_config(MINIMAL + "dim = 4\n")
    assert "family.dim" in info.value.keys


def test_typo_gets_a_suggestion():
    with pytest.raises(ValidationError) as info:
        parse_config(MINIMAL + "[algo]\nlearning_rte = 0.1\n")
    key, msg = info.value.errors[0]
    assert key == "algo.learning_rte"
    assert "learning_rate" in msg


def test_all_errors_reported_together():
    text = MINIMAL.replace('family = "gauss_full"', 'family = "gauss_fulll"') + "[algo]\nT = 0\nbogus = 1\n"
    with pytest.raises(ValidationError) as info:
        parse_config(text)
    keys = info.value.keys
    assert {"family.family", "algo.T", "algo.bogus"} <= set(keys)


def test_syntax_error_carries_line_number():
    with pytest.raises(ParseError) as info:
        parse_config('[run]\nname = "x"\n\nseeds = [1, 2\n[target]\n')
    assert info.value.line is not None and info.value.line >= 4
    assert str(info.value).startswith(f"line {info.value.line}:")


def test_type_and_cross_block_checks():
    with pytest.raises(ValidationError) as info:
        parse_config(MINIMAL + '[metrics]\nwhich = ["ece"]\n')
    assert "metrics.which" in info.value.keys
    with pytest.raises(ValidationError) as info:
        parse_config(MINIMAL.replace("dim = 3", 'dim = "three"'))
    assert "target.dim" in info.value.keys
    with pytest.raises(ValidationError):
        parse_config(MINIMAL.replace('kind = "gaussian"\ndim = 3', 'kind = "gaussian"\ndim = 3\nbatch_size = 4'))


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_presets_parse_and_roundtrip(name):
    cfg = preset(name)
    assert len(cfg.run.seeds) == 5
    assert cfg.run.description
    assert parse_config(dump_config(cfg)) == cfg


def test_preset_examples():
    mog5 = preset("mog5")
    assert (mog5.target.order, mog5.target.dim, mog5.family.family, mog5.family.K) == (5, 3, "gauss_mixture", 5)
    assert mog5.algo.schedule == ("linear",)
    small = preset("gauss_small_eig")
    assert (small.family.init, small.family.small_eig_value) == ("small_eig", 1e-4)
    assert preset("ablation_S").algo.S == (1, 5, 10, 20)
    assert preset("mog3_mismatch").family.K == 3
    assert preset("mismatch_gauss_q").family.family == "gauss_full"
    assert preset("noise_sweep").noise.beta == (0.0, 0.5, 1.0, 2.0, 4.0)
    assert preset("blr_minibatch").target.batch_size == 20
    with pytest.raises(UnknownPreset):
        preset("mog7")


# ---------------------------------------------------------------- matrix

def test_matrix_counts_and_aggregate_rows(tmp_path):
    cfg = parse_config(SMALL)
    results = run_matrix(cfg, 1)
    assert len(results) == 4
    assert all(r.status == "completed" for r in results)
    assert len({r.run_id for r in results}) == 4
    write_outputs(results, tmp_path)
    agg = read_rows(tmp_path / "aggregate.csv")
    fkl_rows = [r for r in agg[1:] if r[4] == "fkl"]
    assert len(fkl_rows) == 2
    assert sorted(float(r[3]) for r in fkl_rows) == [0.0, 1.0]


def test_variant_axes_collapse():
    cfg = parse_config(SMALL.replace("T = 6", 'algo = ["proximal_sm", "advi", "perfect_min"]\nT = 6\nschedule = ["linear", "zero"]'))
    vs = expand_variants(cfg)
    per_seed = [v for v in vs if v.seed == 0]
    assert sum(v.algo == "advi" for v in per_seed) == 2        # one per beta
    assert sum(v.algo == "proximal_sm" for v in per_seed) == 4  # beta x schedule
    assert sum(v.algo == "perfect_min" for v in per_seed) == 2  # one per schedule


def test_parallel_outputs_are_byte_identical(tmp_path):
    cfg = parse_config(SMALL)
    write_outputs(run_matrix(cfg, 1), tmp_path / "a")
    write_outputs(run_matrix(cfg, 2), tmp_path / "b")
    for rel in ["traces.csv", "aggregate.csv", "index.csv"] + [
            os.path.join("runs", f) for f in os.listdir(tmp_path / "a" / "runs")]:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_run_is_isolated(tmp_path):
    cfg = parse_config(EXPLODING)
    results = run_matrix(cfg, 1)
    status = {r.variant.algo: r.status for r in results}
    assert status == {"proximal_sm": "aborted_nonfinite", "advi": "completed"}
    broken = next(r for r in results if r.variant.algo == "proximal_sm")
    assert broken.trace.rows and broken.trace.rows[0][0] == 0
    alone = run_matrix(cfg.with_seeds([0]), 1, variants=[r.variant for r in results if r.variant.algo == "advi"])
    assert alone[0].trace.rows == next(r for r in results if r.variant.algo == "advi").trace.rows
    write_outputs(results, tmp_path)
    index = read_rows(tmp_path / "index.csv")
    assert {row[6] for row in index[1:]} == {"aborted_nonfinite", "completed"}


def test_aggregate_matches_per_run_csvs(tmp_path):
    cfg = parse_config(SMALL)
    write_outputs(run_matrix(cfg, 1), tmp_path)
    index = {row[0]: row for row in read_rows(tmp_path / "index.csv")[1:]}
    groups = {}
    for fname in os.listdir(tmp_path / "runs"):
        (tr,) = read_csv(tmp_path / "runs" / fname)
        _, algo, sched, S, beta, _, status, _ = index[tr.run_id]
        for metric, value in tr.final_metrics().items():
            groups.setdefault((algo, sched, S, float(beta), metric), []).append(value)
    agg = read_rows(tmp_path / "aggregate.csv")
    assert len(agg) - 1 == len(groups)
    for algo, sched, S, beta, metric, n, mean, std in agg[1:]:
        vals = np.array(groups[(algo, sched, S, float(beta), metric)])
        assert int(n) == vals.size
        assert abs(float(mean) - vals.mean()) <= 1e-12
        assert abs(float(std) - vals.std()) <= 1e-12


# ---------------------------------------------------------------- csv

def test_csv_header_only_and_exact_floats(tmp_path):
    empty = MetricTrace(run_id="e")
    write_csv([empty], tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_bytes() == b"run_id,algo,target,family,seed,outer_t,score_calls,metric,value\n"
    tr = MetricTrace(run_id="r", algo="advi", target="gaussian", family="gauss_full", seed=3)
    tr.record(0, 0, "fkl", 0.1)
    tr.record(1, 2, "fkl", 1 / 3)
    write_csv([tr], tmp_path / "t.csv")
    (back,) = read_csv(tmp_path / "t.csv")
    assert back.rows == tr.rows
    assert b"\r" not in (tmp_path / "t.csv").read_bytes()


def test_csv_rows_sorted(tmp_path):
    a = MetricTrace(run_id="b", seed=1)
    a.record(0, 0, "nelbo", 1.0)
    a.record(0, 0, "fkl", 2.0)
    b = MetricTrace(run_id="a", seed=0)
    b.record(0, 0, "fkl", 3.0)
    write_csv([a, b], tmp_path / "s.csv")
    rows = read_rows(tmp_path / "s.csv")[1:]
    assert [(r[0], r[7]) for r in rows] == [("a", "fkl"), ("b", "fkl"), ("b", "nelbo")]


# ---------------------------------------------------------------- svg

def _fake_traces(values_by_algo, seeds=5):
    out = []
    for algo, base in values_by_algo.items():
        for s in range(seeds):
            tr = MetricTrace(run_id=f"{algo}{s}", algo=algo, seed=s)
            for t in range(4):
                tr.record(t, 10 * t, "fkl", base / (t + 1) + s * 1e-3)
            out.append(tr)
    return out


def test_svg_counts_series_and_legend(tmp_path):
    path = tmp_path / "c.svg"
    render_convergence_svg(_fake_traces({"proximal_sm": 1.0, "advi": 2.0}), "fkl", path)
    text = path.read_text()
    assert text.count('<polyline class="series"') == 10
    assert text.count('class="legend-entry"') == 2
    assert "number of score calls" in text and "log scale" in text


def test_svg_single_run_and_linear_fallback(tmp_path):
    tr = MetricTrace(run_id="x", algo="advi")
    for t, v in enumerate([1.0, -0.5, 0.2]):
        tr.record(t, t, "nelbo", v)
    render_convergence_svg([tr], "nelbo", tmp_path / "n.svg")
    text = (tmp_path / "n.svg").read_text()
    assert text.count("<polyline") == 1
    assert "log scale" not in text
    with pytest.raises(MetricMissing):
        render_convergence_svg([tr], "fkl", tmp_path / "m.svg")


# ---------------------------------------------------------------- cli

def test_cli_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.toml"
    good.write_text(SMALL)
    assert main(["validate", "--config", str(good)]) == EXIT_OK
    assert main(["run", "--config", str(good), "--out", str(tmp_path / "out"), "--seed-override", "1"]) == EXIT_OK
    assert len(os.listdir(tmp_path / "out" / "runs")) == 2
    assert main(["plot", "--metric", "fkl", "--in", str(tmp_path / "out"),
                 "--out", str(tmp_path / "fkl.svg")]) == EXIT_OK
    assert (tmp_path / "fkl.svg").exists()

    bad = tmp_path / "bad.toml"
    bad.write_text(MINIMAL + "[algo]\nlearning_rte = 1\n")
    assert main(["validate", "--config", str(bad)]) == EXIT_FAILURE
    assert "learning_rate" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.toml")]) == EXIT_FAILURE
    assert main(["run", "--preset", "nope"]) == EXIT_FAILURE
    assert main(["plot", "--metric", "ece", "--in", str(tmp_path / "out"),
                 "--out", str(tmp_path / "x.svg")]) == EXIT_FAILURE

    boom = tmp_path / "boom.toml"
    boom.write_text(EXPLODING)
    with pytest.warns(RuntimeWarning):
        assert main(["run", "--config", str(boom), "--out", str(tmp_path / "boom")]) == EXIT_ABORTED


def test_cli_lists_presets(capsys):
    assert main(["list-presets"]) == EXIT_OK
    out = capsys.readouterr().out
    assert all(name in out for name in PRESET_NAMES)
