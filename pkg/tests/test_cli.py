import json
import os

import pytest

from piac import bundled_case_path
from piac.cli import main

TWO_NODE = """
[nodes]
1 machine M=1.0 D=1.0 P=0.0 alpha=1.0
2 machine M=1.0 D=1.0 P=0.0 alpha=1.0
[edges]
1 2 K=1.0
[comm]
1 2 l=1.0
[gains]
k1=1.0
k2=4.0
k3=1.0
[scenario]
kind=step
t_end=50.0
h=0.01
onset=2.0
step=1:-0.2
"""

HET = """
[nodes]
1 machine M=1.0 D=1.0 P=0.0 alpha=1.0
2 machine M=2.0 D=0.5 P=0.0 alpha=2.0
[edges]
1 2 K=1.0
[comm]
1 2 l=1.0
[gains]
k1=1.0
k2=4.0
k3=1.0
"""


@pytest.fixture
def two_node_case(tmp_path):
    p = tmp_path / "two.case"
    p.write_text(TWO_NODE)
    return str(p)


@pytest.fixture
def het_case(tmp_path):
    p = tmp_path / "het.case"
    p.write_text(HET)
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate_ok(capsys):
    code, out, _ = run(capsys, "validate", "--case",
                       bundled_case_path("homogeneous10"))
    assert code == 0
    assert "homogeneity: pass" in out


def test_validate_heterogeneous(capsys, het_case):
    code, out, _ = run(capsys, "validate", "--case", het_case)
    assert code == 0
    assert "homogeneity: fail" in out


def test_validate_format_error(capsys, tmp_path):
    p = tmp_path / "bad.case"
    p.write_text("[nodes]\n1 machine M=1 D=1 alpha=1\n[edges]\n1 1 K\n")
    code, _, err = run(capsys, "validate", "--case", str(p))
    assert code == 2
    assert "case format error" in err


def test_validate_disconnected(capsys, tmp_path):
    p = tmp_path / "disc.case"
    p.write_text("""
[nodes]
1 machine M=1 D=1 alpha=1
2 machine M=1 D=1 alpha=1
3 machine M=1 D=1 alpha=1
[edges]
1 2 K=1.0
""".strip())
    code, _, err = run(capsys, "validate", "--case", str(p))
    assert code == 3


def test_validate_bad_gains(capsys, tmp_path):
    p = tmp_path / "gains.case"
    p.write_text(TWO_NODE.replace("k2=4.0", "k2=1.0"))
    code, _, err = run(capsys, "validate", "--case", str(p))
    assert code == 4
    assert "gain constraint" in err


def test_analyze_worked_point(capsys, two_node_case):
    code, out, _ = run(capsys, "analyze", "--case", two_node_case,
                       "--law", "dpiac", "--selector", "omega")
    assert code == 0
    header, row = out.strip().splitlines()
    vals = dict(zip(header.split(","), row.split(",")))
    assert float(vals["numeric"]) == pytest.approx(19.0 / 30.0, abs=1e-8)
    assert float(vals["rel_gap"]) <= 1e-8


def test_analyze_json_format(capsys, two_node_case):
    code, out, _ = run(capsys, "analyze", "--case", two_node_case,
                       "--law", "dpiac", "--selector", "u",
                       "--format", "json", "--limits")
    assert code == 0
    payload = json.loads(out)
    assert payload["numeric"] == pytest.approx(0.7, abs=1e-8)
    assert payload["limit_k3_inf"] == pytest.approx(0.5, abs=1e-12)


def test_analyze_gbpiac_u_topology_free(capsys, two_node_case):
    code, out, _ = run(capsys, "analyze", "--case", two_node_case,
                       "--law", "gbpiac", "--selector", "u", "--k1", "0.5",
                       "--k2", "2.0")
    assert code == 0
    header, row = out.strip().splitlines()
    vals = dict(zip(header.split(","), row.split(",")))
    assert float(vals["numeric"]) == pytest.approx(0.25, abs=1e-8)


def test_analyze_mixed_network_rejected(capsys):
    # buses without rotational states have no linearized closed loop; the
    # simulation path is the supported route for such cases
    code, _, err = run(capsys, "analyze", "--case",
                       bundled_case_path("ieee39-like"), "--law", "dpiac")
    assert code == 5
    assert "machine-only" in err


def test_analyze_refuses_analytic_on_heterogeneous(capsys, het_case):
    code, _, err = run(capsys, "analyze", "--case", het_case,
                       "--law", "dpiac", "--analytic")
    assert code == 6
    assert "refused" in err


def test_analyze_bounds_with_b_diag(capsys, two_node_case):
    code, out, _ = run(capsys, "analyze", "--case", two_node_case,
                       "--law", "gbpiac", "--b-diag", "0.5,2.0")
    assert code == 0
    header, row = out.strip().splitlines()
    vals = dict(zip(header.split(","), row.split(",")))
    lo, hi = float(vals["bound_lo"]), float(vals["bound_hi"])
    num = float(vals["numeric"])
    assert lo - 1e-12 <= num <= hi + 1e-12
    assert vals["analytic"] == ""  # closed form needs B = I


def test_sweep_k3_spread_decreasing(capsys, two_node_case, tmp_path):
    out_file = tmp_path / "sweep.csv"
    code, _, _ = run(capsys, "sweep", "--case", two_node_case, "--law", "dpiac",
                     "--param", "k3", "--grid", "1,10,100",
                     "--out", str(out_file))
    assert code == 0
    lines = out_file.read_text().strip().splitlines()
    assert lines[0] == "k3,omega_norm,u_norm,spread_norm"
    spread = [float(r.split(",")[3]) for r in lines[1:]]
    assert spread[0] > spread[1] > spread[2]


def test_sweep_k1_u_increasing(capsys, two_node_case):
    code, out, _ = run(capsys, "sweep", "--case", two_node_case, "--law", "dpiac",
                       "--param", "k1", "--grid", "0.25,0.5,1.0")
    assert code == 0
    lines = out.strip().splitlines()
    u = [float(r.split(",")[2]) for r in lines[1:]]
    assert u[0] < u[1] < u[2]


def test_sweep_empty_grid(capsys, two_node_case):
    code, _, err = run(capsys, "sweep", "--case", two_node_case, "--law",
                       "dpiac", "--param", "k3", "--grid", "")
    assert code == 2
    assert "usage error" in err


def test_sweep_with_step_metrics(capsys, two_node_case, tmp_path):
    out_file = tmp_path / "s.csv"
    code, _, _ = run(capsys, "sweep", "--case", two_node_case, "--law", "dpiac",
                     "--param", "k1", "--grid", "0.5,1.0", "--sim", "step",
                     "--out", str(out_file))
    assert code == 0
    lines = out_file.read_text().strip().splitlines()
    assert lines[0] == "k1,omega_norm,u_norm,spread_norm,S,C"
    rows = [list(map(float, r.split(","))) for r in lines[1:]]
    assert rows[0][4] > rows[1][4]    # S falls as k1 grows
    assert rows[0][5] < rows[1][5]    # C rises


def test_sweep_with_noise_metrics(capsys, tmp_path):
    case = tmp_path / "noise.case"
    case.write_text(TWO_NODE.replace(
        "kind=step\nt_end=50.0\nh=0.01\nonset=2.0\nstep=1:-0.2",
        "kind=noise\nt_end=5.0\nh=0.001\nsigma=1:0.01\npaths=2\nburn_in=1.0"))
    code, out, _ = run(capsys, "sweep", "--case", str(case), "--law", "dpiac",
                       "--param", "k1", "--grid", "0.5,1.0", "--sim", "noise",
                       "--seed", "11", "--model", "linear")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "k1,omega_norm,u_norm,spread_norm,E_S,E_C"
    assert all(len(r.split(",")) == 6 for r in lines[1:])


def test_sweep_noise_needs_seed(capsys, tmp_path):
    case = tmp_path / "noise.case"
    case.write_text(TWO_NODE.replace(
        "kind=step\nt_end=50.0\nh=0.01\nonset=2.0\nstep=1:-0.2",
        "kind=noise\nt_end=5.0\nh=0.001\nsigma=1:0.01\npaths=2\nburn_in=1.0"))
    code, _, err = run(capsys, "sweep", "--case", str(case), "--law", "dpiac",
                       "--param", "k1", "--grid", "0.5,1.0", "--sim", "noise")
    assert code == 2
    assert "seed" in err


def test_sweep_svg(capsys, two_node_case, tmp_path):
    svg = tmp_path / "chart.svg"
    code, _, _ = run(capsys, "sweep", "--case", two_node_case, "--law", "dpiac",
                     "--param", "k3", "--grid", "1,4,16", "--svg", str(svg))
    assert code == 0
    text = svg.read_text()
    assert text.startswith("<svg") and "polyline" in text


def test_simulate_zero_disturbance(capsys, tmp_path):
    case = tmp_path / "quiet.case"
    case.write_text(TWO_NODE.replace("step=1:-0.2", "step=1:0.0"))
    code, out, _ = run(capsys, "simulate", "--case", str(case), "--law", "dpiac",
                       "--t-end", "41")
    assert code == 0
    s_val = float(out.split("S=")[1].split()[0])
    assert s_val <= 1e-15


def test_simulate_step_balance(capsys, two_node_case, tmp_path):
    out_file = tmp_path / "trace.csv"
    code, out, _ = run(capsys, "simulate", "--case", two_node_case,
                       "--law", "dpiac", "--out", str(out_file))
    assert code == 0
    rows = out_file.read_text().strip().splitlines()
    last_t_rows = rows[-2:]
    u_sum = sum(float(r.split(",")[6]) for r in last_t_rows)
    assert abs(u_sum - 0.2) <= 1e-4
    assert "S=" in out and "C=" in out


def test_simulate_noise_requires_seed(capsys, two_node_case):
    code, _, err = run(capsys, "simulate", "--case", two_node_case,
                       "--law", "dpiac", "--kind", "noise",
                       "--sigma", "1:0.01", "--t-end", "2", "--h", "0.001",
                       "--paths", "2", "--burn-in", "0.5")
    assert code == 2
    assert "seed" in err


def test_simulate_noise_byte_identical(capsys, two_node_case, tmp_path):
    args = ["simulate", "--case", two_node_case, "--law", "dpiac",
            "--kind", "noise", "--sigma", "1:0.01", "--t-end", "2",
            "--h", "0.001", "--paths", "2", "--burn-in", "0.5",
            "--seed", "42", "--model", "linear"]
    f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
    code1, _, _ = run(capsys, *args, "--out", str(f1))
    code2, _, _ = run(capsys, *args, "--out", str(f2))
    assert code1 == 0 and code2 == 0
    assert f1.read_bytes() == f2.read_bytes()


def test_output_failure_leaves_no_partial_file(capsys, two_node_case, tmp_path):
    target = tmp_path / "nodir" / "out.csv"
    code, _, err = run(capsys, "analyze", "--case", two_node_case,
                       "--law", "dpiac", "--out", str(target))
    assert code == 2
    assert not target.exists()
    assert not target.with_name(target.name + ".tmp").exists()


def test_workers_env_keeps_grid_order(capsys, two_node_case, monkeypatch):
    monkeypatch.setenv("PIAC_WORKERS", "3")
    code, out, _ = run(capsys, "sweep", "--case", two_node_case, "--law",
                       "dpiac", "--param", "k3", "--grid", "1,2,4")
    assert code == 0
    rows = out.strip().splitlines()[1:]
    assert [float(r.split(",")[0]) for r in rows] == [1.0, 2.0, 4.0]


def test_simulate_decpiac_without_comm(capsys, tmp_path):
    text = TWO_NODE.replace("[comm]\n1 2 l=1.0\n", "")
    case = tmp_path / "nocomm.case"
    case.write_text(text)
    code, out, _ = run(capsys, "simulate", "--case", str(case),
                       "--law", "decpiac", "--t-end", "45")
    assert code == 0
    assert "S=" in out
