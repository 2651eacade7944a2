import json

import numpy as np
import pytest

from kvnsim.cli import RunConfig, main
from kvnsim.errors import ConfigError
from kvnsim.simulate import read_csv


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_ho_period(tmp_path, capsys):
    path = tmp_path / "ho.csv"
    code, _, err = run(["simulate", "--problem", "ho", "--m", "1", "--omega", "1", "--backend", "gaussian",
                        "--trotter", "exact", "--t-end", "6.283185307179586", "-o", str(path)], capsys)
    assert code == 0 and "max |<Q> - u_classical|" in err
    t, mu, _, _ = read_csv(path)
    assert mu[-1, 0] == pytest.approx(1.0, abs=1e-12)


def test_simulate_to_stdout(capsys, monkeypatch):
    monkeypatch.delenv("KVN_OUTPUT_DIR", raising=False)
    code, out, _ = run(["simulate", "--samples", "2"], capsys)
    assert code == 0 and out.startswith("t,mode,mean_q,var_q,classical_u\n")


def test_output_env_dir(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("KVN_OUTPUT_DIR", str(tmp_path))
    assert run(["simulate", "--samples", "2"], capsys)[0] == 0
    assert (tmp_path / "ho_gaussian.csv").exists()
    assert run(["simulate", "--backend", "both", "--samples", "2", "--cutoff", "20", "-o", "b.csv"], capsys)[0] == 0
    assert (tmp_path / "b.gaussian.csv").exists() and (tmp_path / "b.fock.csv").exists()


def test_trotter_p_scaling(tmp_path, capsys):
    devs = []
    for p in ("1", "64"):
        code, _, err = run(["simulate", "--omega", "2", "--trotter", "tms_bs", "--p", p,
                            "-o", str(tmp_path / f"{p}.csv")], capsys)
        devs.append(float(err.split("=")[1].split(",")[0]))
    assert 30 < devs[0] / devs[1] < 130


def test_kdv_smoke_needs_relaxed_threshold(tmp_path, capsys):
    args = ["simulate", "--problem", "kdv", "--backend", "fock", "--cutoff", "8", "--n", "4",
            "--t-end", "0.2", "--squeeze", "1.0", "--samples", "3", "-o", str(tmp_path / "k.csv")]
    assert run(args, capsys)[0] == 3
    assert run(args + ["--leakage-threshold", "0.2"], capsys)[0] == 0
    _, mu, _, u = read_csv(tmp_path / "k.csv")
    assert np.all(np.isfinite(mu - u))


def test_config_errors(capsys):
    assert run(["simulate", "--problem", "kdv", "--backend", "gaussian"], capsys)[0] == 2
    assert run(["simulate", "--p", "0"], capsys)[0] == 2
    assert run(["simulate", "--problem", "coupled"], capsys)[0] == 2
    assert run(["compile", "--problem", "kdv", "--trotter", "cx"], capsys)[0] == 2


def test_blow_up_exit_code(tmp_path, capsys):
    # kappa_12 = 1, kappa_j = 0 gives a negative stiffness eigenvalue; cosh overflows by t = 1000
    cfg = tmp_path / "c.yaml"
    cfg.write_text("problem: coupled\nmasses: [1.0, 1.0]\nsprings: [0.0, 0.0]\n"
                   "couplings: [[0.0, 1.0], [1.0, 0.0]]\nt_end: 1000.0\nsamples: 3\n")
    code, _, err = run(["simulate", "--config", str(cfg), "-o", str(tmp_path / "x.csv")], capsys)
    assert code == 4 and "non-finite" in err


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"problem": "ho", "omega": 2.0, "t_end": 1.0, "samples": 3}))
    saved = tmp_path / "saved.json"
    out1 = tmp_path / "a.csv"
    assert run(["simulate", "--config", str(cfg), "--samples", "5", "--save-config", str(saved),
                "-o", str(out1)], capsys)[0] == 0
    data = json.loads(saved.read_text())
    assert data["samples"] == 5 and data["omega"] == 2.0
    out2 = tmp_path / "b.csv"
    assert run(["simulate", "--config", str(saved), "-o", str(out2)], capsys)[0] == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"colour": "red"})


def test_compile_ho(capsys):
    code, out, _ = run(["compile", "--problem", "ho", "--trotter", "tms_bs", "--p", "1"], capsys)
    d = json.loads(out)
    assert code == 0 and [g["kind"] for g in d["gates"]] == ["TMS", "BS"]


def test_compile_opo_inverse(capsys):
    code, out, _ = run(["compile", "--opo", "--tau", "1e-9", "--theta", "0.1", "--r", "0.05", "--p", "1"], capsys)
    d = json.loads(out)["opo"]
    assert code == 0
    assert d["m"] == pytest.approx(1e-9 / 0.15)
    assert d["omega"] == pytest.approx(np.sqrt(0.0075) * 1e9)


def test_compile_opo_forward_and_imaginary(capsys):
    code, out, _ = run(["compile", "--problem", "ho", "--m", "1e-8", "--omega", "1e8", "--tau", "1e-9", "--opo"],
                       capsys)
    d = json.loads(out)
    assert code == 0 and d["decomposition"] == "tms_bs" and d["opo"]["omega"] == pytest.approx(1e8)
    assert run(["compile", "--opo", "--tau", "1e-9", "--theta", "0.1", "--r", "0.3"], capsys)[0] == 2


def test_compile_kdv_expanded(tmp_path, capsys):
    path = tmp_path / "k.json"
    code, _, _ = run(["compile", "--problem", "kdv", "--n", "5", "--expand-cubic", "--tau", "0.1", "-o", str(path)],
                     capsys)
    d = json.loads(path.read_text())
    assert code == 0 and d["decomposition"] == "kdv_expanded"
    kinds = [g["kind"] for g in d["gates"]]
    assert kinds.count("CUBIC") == 0 and kinds.count("CUBIC_P") == 4 * 10


def test_verify_subset(tmp_path, capsys):
    path = tmp_path / "r.json"
    code, _, err = run(["verify", "heisenberg", "trotter", "-o", str(path)], capsys)
    report = json.loads(path.read_text())
    assert code == 0 and report["all_passed"]
    assert [s["suite"] for s in report["suites"]] == ["heisenberg", "trotter"]
    assert "[PASS] trotter.cx_order" in err


def test_verify_unknown_suite(capsys):
    assert run(["verify", "bogus"], capsys)[0] == 2
