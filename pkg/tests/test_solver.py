import io

import numpy as np
import pytest

from cntsram.analysis import Operation, build_protocol, run_testbench
from cntsram.analysis import testbench_circuit as bench_circuit
from cntsram.cells import CellKind, build_cell
from cntsram.netlist import Dc, parse_netlist
from cntsram.solver import (ConvergedVia, Integrator, NonConvergence, SingularMatrix,
                            SolverOptions, dc_operating_point, dc_sweep, stamp, sweep_to_csv,
                            time_grid, transient)

INVERTER = """VDD vdd 0 dc 0.9
VIN in 0 dc 0
MP1 out in vdd pch tubes=2
MN1 out in 0 nch tubes=1
C1 out 0 1f
.end"""

SWITCHING = INVERTER.replace("VIN in 0 dc 0", "VIN in 0 pwl (0 0 10p 0 11p 0.9)")


def hold_6t():
    c = build_cell(CellKind.SRAM6T)
    for port, v in (("WL", 0.0), ("BL", 0.9), ("BLB", 0.9), ("VDD", 0.9)):
        c = c.add_source(f"V{port}", port, "0", Dc(v))
    return c


def test_single_resistor_stamp():
    c = parse_netlist("R1 a 0 2k\n.end")
    J, rhs = stamp(c, [0.0])
    assert J == pytest.approx(np.array([[1 / 2000]]))
    assert rhs == pytest.approx([0.0])


def test_single_source_forces_node():
    c = parse_netlist("V1 a 0 dc 0.9\n.end")
    J, rhs = stamp(c, [0.0, 0.0])
    x = np.linalg.solve(J, rhs)
    assert x[0] == pytest.approx(0.9)


def test_stamp_dimension_mismatch():
    with pytest.raises(ValueError):
        stamp(parse_netlist("R1 a 0 1k\n.end"), [0.0, 1.0])


def test_6t_jacobian_matches_finite_differences():
    c = hold_6t()
    rng = np.random.default_rng(3)
    n = len(stamp(c, np.zeros(c.node_count - 1 + 4))[1])
    h = 1e-6
    for _ in range(5):
        x = np.concatenate([rng.uniform(0, 0.9, c.node_count - 1), rng.uniform(-1e-5, 1e-5, 4)])
        J, _ = stamp(c, x)
        fd = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            fd[:, j] = (-stamp(c, x + e)[1] + stamp(c, x - e)[1]) / (2 * h)
        scale = np.max(np.abs(J))
        assert np.max(np.abs(fd - J)) <= 1e-5 * scale


def test_resistor_divider():
    c = parse_netlist("V1 in 0 dc 0.9\nR1 in mid 1k\nR2 mid 0 1k\n.end")
    sol = dc_operating_point(c)
    assert abs(sol.v("mid") - 0.45) <= 1e-6
    assert sol.converged_via is ConvergedVia.DIRECT
    assert sol.source_currents["V1"] == pytest.approx(0.45e-3, rel=1e-9)


def test_6t_hold_is_bistable():
    c = hold_6t()
    hi = dc_operating_point(c, initial_guess={"Q": 0.9, "QB": 0.0})
    lo = dc_operating_point(c, initial_guess={"Q": 0.0, "QB": 0.9})
    assert hi.v("Q") >= 0.8 and hi.v("QB") <= 0.1
    assert lo.v("Q") <= 0.1 and lo.v("QB") >= 0.8
    # the cell is symmetric at this bias, so the two states mirror each other
    assert hi.v("Q") == pytest.approx(lo.v("QB"), abs=1e-9)
    assert max(hi.residual, lo.residual) <= 1e-12


def test_floating_gate_node_resolved_by_gmin():
    floating = parse_netlist("V1 a 0 dc 0.9\nMN1 a b 0 nch tubes=1\n.end")
    tied = parse_netlist("V1 a 0 dc 0.9\nMN1 a b 0 nch tubes=1\nR1 b 0 1e12\n.end")
    sol = dc_operating_point(floating)
    assert sol.converged_via is ConvergedVia.GMIN_STEPPING
    assert sol.v("b") == pytest.approx(dc_operating_point(tied).v("b"), abs=1e-6)


def test_inconsistent_sources_are_singular():
    with pytest.raises(SingularMatrix):
        dc_operating_point(parse_netlist("V1 a 0 dc 1\nV2 a 0 dc 2\n.end"))


def test_nonconvergence_carries_residual():
    opts = SolverOptions(max_newton_iters=1, gmin_steps=1, source_steps=1)
    with pytest.raises(NonConvergence) as info:
        dc_operating_point(parse_netlist(INVERTER), opts)
    assert 0 < info.value.residual < np.inf


def test_solver_options_validated():
    with pytest.raises(ValueError):
        SolverOptions(dt=0)
    with pytest.raises(ValueError):
        SolverOptions(max_newton_iters=0)


def test_sweep_resistor_is_identity():
    c = parse_netlist("V1 a 0 dc 0\nR1 a 0 1k\n.end")
    sweep = dc_sweep(c, "V1", 0.0, 0.9, 0.1)
    assert len(sweep) == 10
    for v, sol in sweep:
        assert sol.v("a") == pytest.approx(v, abs=1e-12)


def test_inverter_sweep_monotone_and_direction_independent():
    c = parse_netlist(INVERTER)
    fwd = dc_sweep(c, "VIN", 0.0, 0.9, 0.005)
    back = dc_sweep(c, "VIN", 0.9, 0.0, 0.005)
    out_f = np.array([s.v("out") for _, s in fwd])
    out_b = np.array([s.v("out") for _, s in back])[::-1]
    assert np.all(np.diff(out_f) <= 1e-12)
    assert out_f[0] > 0.89 and out_f[-1] < 0.01
    assert np.max(np.abs(out_f - out_b)) <= 2 * SolverOptions().v_abstol


def test_sweep_errors():
    c = parse_netlist(INVERTER)
    with pytest.raises(KeyError):
        dc_sweep(c, "VX", 0, 1, 0.1)
    with pytest.raises(ValueError):
        dc_sweep(c, "VIN", 0, 1, 0.0)
    opts = SolverOptions(max_newton_iters=1, gmin_steps=1, source_steps=1)
    with pytest.raises(NonConvergence) as info:
        dc_sweep(c, "VIN", 0.3, 0.9, 0.1, opts)
    assert info.value.sweep_value == pytest.approx(0.3)


def test_sweep_csv():
    c = parse_netlist("V1 a 0 dc 0\nR1 a b 1k\nR2 b 0 1k\n.end")
    buf = io.StringIO()
    sweep_to_csv(dc_sweep(c, "V1", 0, 0.2, 0.1), buf, "v1")
    rows = buf.getvalue().splitlines()
    assert rows[0] == "v1,a,b"
    assert rows[-1] == "0.2,0.2,0.1"


RC = 1e3 * 1e-15


@pytest.mark.parametrize("integrator,tol", [(Integrator.TRAPEZOIDAL, 1e-3),
                                            (Integrator.BACKWARD_EULER, 5e-3)])
def test_rc_step_response(integrator, tol):
    # backward Euler is first order: about 0.3% at t = RC with 100 steps per RC
    c = parse_netlist("V1 in 0 pwl (0 0 1e-18 0.9)\nR1 in out 1k\nC1 out 0 1f\n.end")
    tr = transient(c, 5 * RC, SolverOptions(dt=RC / 100, integrator=integrator))
    for t in (RC, 5 * RC):
        exact = 0.9 * (1 - np.exp(-t / RC))
        assert tr.at("out", t) == pytest.approx(exact, rel=tol)


def test_trapezoidal_error_is_second_order():
    c = parse_netlist("V1 in 0 pwl (0 0 1e-18 0.9)\nR1 in out 1k\nC1 out 0 1f\n.end")
    exact = 0.9 * (1 - np.exp(-1.0))
    errs = [abs(transient(c, RC, SolverOptions(dt=RC / n)).v("out")[-1] - exact)
            for n in (20, 40)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_constant_sources_hold_equilibrium():
    c = hold_6t()
    init = dc_operating_point(c, initial_guess={"Q": 0.9})
    tr = transient(c, 50e-12, SolverOptions(), initial=init)
    assert np.max(np.abs(tr.node_voltages - init.node_voltages)) <= SolverOptions().v_abstol


def test_breakpoints_are_on_the_grid():
    c = parse_netlist("V1 a 0 pwl (0 0 1.00001e-12 1 3.3e-12 0)\nR1 a 0 1\n.end")
    grid = time_grid(c, 5e-12, 1e-12)
    assert 1.00001e-12 in grid and 3.3e-12 in grid
    assert grid[0] == 0.0 and grid[-1] == 5e-12
    assert np.min(np.diff(grid)) > 1e-15


def test_transient_nonconvergence_reports_time():
    c = parse_netlist(SWITCHING)
    init = dc_operating_point(c)
    with pytest.raises(NonConvergence) as info:
        transient(c, 30e-12, SolverOptions(max_newton_iters=1), initial=init)
    assert 10e-12 <= info.value.time <= 30e-12


def test_transient_rejects_nonpositive_end():
    with pytest.raises(ValueError):
        transient(parse_netlist(INVERTER), 0.0)


def test_transient_is_deterministic():
    c = parse_netlist(SWITCHING)
    a, b = io.StringIO(), io.StringIO()
    transient(c, 30e-12).write_csv(a)
    transient(c, 30e-12).write_csv(b)
    assert a.getvalue() == b.getvalue()


def test_6t_write0_time_step_convergence():
    seq = build_protocol(CellKind.SRAM6T, Operation.WRITE0)
    c = bench_circuit(CellKind.SRAM6T, seq)
    init = dc_operating_point(c, initial_guess={"Q": 0.9, "QB": 0.0})
    coarse = transient(c, seq.t_end, SolverOptions(dt=2e-12), initial=init)
    fine = transient(c, seq.t_end, SolverOptions(dt=1e-12), initial=init)
    t = np.linspace(0, seq.t_end, 400)
    for node in ("Q", "QB", "BL"):
        diff = np.interp(t, coarse.times, coarse.v(node)) - np.interp(t, fine.times, fine.v(node))
        assert np.max(np.abs(diff)) <= 0.02
    assert abs(coarse.v("Q")[-1] - fine.v("Q")[-1]) <= 1e-3


def test_6t_write0_ends_at_the_dc_state():
    trace, verdict = run_testbench(CellKind.SRAM6T, Operation.WRITE0)
    assert verdict.passed
    seq = build_protocol(CellKind.SRAM6T, Operation.WRITE0)
    c = bench_circuit(CellKind.SRAM6T, seq)
    post = dc_operating_point(c, initial_guess={"Q": 0.0, "QB": 0.9})
    assert abs(trace.v("Q")[-1] - post.v("Q")) <= 1e-3
    assert trace.v("Q")[-1] <= 0.09
    # once the word line is fully up, Q only falls
    t_on = seq.phases["access"][0] + 2 * 50e-12
    q = trace.v("Q")[(trace.times >= t_on) & (trace.times <= seq.phases["access"][1])]
    assert np.all(np.diff(q) <= 1e-6)
