import json
import shutil

import numpy as np
import pytest

from cpsloss.cli import EXIT_DEPENDENCY, EXIT_PARSE, EXIT_PRECONDITION, main
from cpsloss.trace_fit import ResonanceFit, synthesize_trace


def read(path):
    return json.loads(path.read_text())


def trace_csv(path, seed):
    p = ResonanceFit(5.0e9, 1e6, 2e6, 0.9, 0.2, 1e-9)
    lw = p.f0 / p.q_loaded
    t = synthesize_trace(p, np.linspace(p.f0 - 5 * lw, p.f0 + 5 * lw, 121), 1e-3, seed)
    rows = "\n".join(f"{float(f)!r},{float(s.real)!r},{float(s.imag)!r}" for f, s in zip(t.frequencies, t.s11))
    path.write_text("frequency_hz,s11_real,s11_imag\n" + rows + "\n")
    return path


def test_fit_batch_with_malformed_file(tmp_path):
    good = [trace_csv(tmp_path / f"t{i}.csv", i) for i in range(2)]
    bad = tmp_path / "broken.csv"
    bad.write_text("frequency_hz,s11_real,s11_imag\n1,2,3\n2,x,4\n")
    out = tmp_path / "out"
    code = main(["fit", *map(str, good), str(bad), "--out", str(out), "--jobs", "2"])
    assert code == EXIT_PARSE
    rep = read(out / "fit.json")["results"]
    assert rep["n_ok"] == 2 and rep["n_failed"] == 1
    err = [e for e in rep["traces"] if "error" in e][0]
    assert err["error"] == "ParseError" and ":3:" in err["message"]
    assert (out / "fit" / "t0.json").exists() and (out / "fit_summary.csv").exists()


def test_fit_all_valid(tmp_path):
    good = [trace_csv(tmp_path / f"t{i}.csv", i) for i in range(3)]
    assert main(["fit", *map(str, good), "--out", str(tmp_path / "o")]) == 0


def test_flat_sweep_reports_degenerate(tmp_path, data_dir):
    out = tmp_path / "o"
    code = main(["sweep", str(data_dir / "flat_power.csv"), "--kind", "power",
                 "--f0-hz", "5e9", "--out", str(out)])
    rep = read(out / "sweep_power.json")
    assert code == 0 and rep["results"]["degenerate"] is True
    assert any("uniform weights" in w for w in rep["warnings"])
    assert (out / "sweep_power_curve.csv").exists()


def test_temperature_sweep_echo(tmp_path, data_dir):
    out = tmp_path / "o"
    main(["sweep", str(data_dir / "cps3_temperature.csv"), "--kind", "temperature",
          "--f0-hz", "5.47e9", "--out", str(out)])
    rep = read(out / "sweep_temperature.json")["results"]
    assert rep["inverse_saturated_tls_loss"] == pytest.approx(3.4e6, rel=0.01)


def test_report_on_empty_dir_is_dependency_error(tmp_path, capsys):
    code = main(["report", "--out", str(tmp_path / "empty")])
    assert code == EXIT_DEPENDENCY
    assert "sweep_temperature" in capsys.readouterr().err


def test_unknown_config_key_rejected(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"materails": {}}')
    assert main(["budget", "x.csv", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_PRECONDITION


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["sweep"])
    assert exc.value.code == 2


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory, data_dir):
    out = tmp_path_factory.mktemp("pipeline")
    cfg = str(data_dir / "project.json")
    common = ["--config", cfg, "--out", str(out), "--seed", "1", "--jobs", "4"]
    steps = [["sweep", str(data_dir / "cps3_temperature.csv"), "--kind", "temperature",
              "--device", "CPS3"],
             ["simulate", "--what", "inductance"],
             ["simulate", "--what", "regrowth-curve"],
             ["regrowth", str(data_dir / "observations.csv")],
             ["budget", str(data_dir / "budget.csv")],
             ["report"]]
    codes = [main(s + common) for s in steps]
    return out, codes, common


def test_pipeline_runs(pipeline):
    out, codes, _ = pipeline
    assert codes == [0] * len(codes)


def test_pipeline_bounds_row(pipeline):
    out, _, _ = pipeline
    text = (out / "report.txt").read_text()
    assert "MA <= (10 ± 2)x10^-3 nm" in text
    rows = read(out / "report.json")["results"]["bounds"]["rows"]
    ma = rows[0]
    assert ma["bound"] == pytest.approx(10e-3, rel=0.1)
    assert ma["uncertainty"] == pytest.approx(2e-3, rel=0.25)


def test_pipeline_regrowth_and_budget(pipeline):
    out, _, _ = pipeline
    reg = read(out / "regrowth.json")["results"]
    assert reg["thickness"]["delta_t_ma_nm"] == pytest.approx(2.5, rel=0.02)
    assert 2.2e-3 <= reg["loss_tangent"]["mean"] <= 3.6e-3
    assert reg["benchmark"]["delta_t_ma_nm"] == 1.8
    bud = read(out / "budget.json")
    assert bud["results"]["solution"]["condition_number"] > 1e3
    assert any("collinear" in w for w in bud["warnings"])


def test_regrowth_curve_monotone(pipeline):
    out, _, _ = pipeline
    rep = read(out / "simulate_regrowth-curve.json")["results"]["devices"]
    for dev in rep.values():
        shifts = [row["df_over_f"] for row in dev["curve"]]
        assert shifts[0] == 0.0
        assert all(b < a for a, b in zip(shifts, shifts[1:]))


def test_inductance_alpha_for_bound_device(pipeline):
    out, _, _ = pipeline
    dev = read(out / "simulate_inductance.json")["results"]["devices"]["CPS3"]
    assert 0 < dev["alpha"] < 0.1


def test_reports_are_byte_identical_on_rerun(pipeline, tmp_path):
    out, _, common = pipeline
    before = {p.name: p.read_bytes() for p in (out / "report.json", out / "report.txt",
                                               out / "budget.json")}
    assert main(["report"] + common) == 0
    assert main(["budget", common[1].replace("project.json", "budget.csv")] + common) == 0
    after = {p.name: p.read_bytes() for p in (out / "report.json", out / "report.txt",
                                              out / "budget.json")}
    assert before == after
