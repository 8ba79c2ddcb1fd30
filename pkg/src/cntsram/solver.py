"""Modified nodal analysis: DC operating point, DC sweep and transient.

Unknowns are the non-ground node voltages followed by one branch current per
voltage source.  Each CNTFET is linearised through its analytic conductances
(Norton companion) and always shunted by ``GMIN`` from drain to source.
Capacitors use backward-Euler or trapezoidal companion models.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .device import DEFAULT_CONSTANTS, Polarity, _model_scales, nmos_core
from .netlist import Circuit, Dc, Kind

log = logging.getLogger(__name__)

GMIN = 1e-12
MAX_STEP_V = 0.3


class Integrator(enum.Enum):
    BACKWARD_EULER = "BackwardEuler"
    TRAPEZOIDAL = "Trapezoidal"


class ConvergedVia(enum.Enum):
    DIRECT = "Direct"
    GMIN_STEPPING = "GminStepping"
    SOURCE_STEPPING = "SourceStepping"


class SolverError(RuntimeError):
    pass


class NonConvergence(SolverError):
    def __init__(self, message, residual=float("inf"), time=None, sweep_value=None):
        self.residual = residual
        self.time = time
        self.sweep_value = sweep_value
        super().__init__(message)


class SingularMatrix(SolverError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    v_abstol: float = 1e-9
    i_abstol: float = 1e-12
    max_newton_iters: int = 200
    gmin_start: float = 1e-3
    gmin_steps: int = 10
    source_steps: int = 10
    dt: float = 1e-12
    integrator: Integrator = Integrator.TRAPEZOIDAL

    def __post_init__(self):
        for name in ("v_abstol", "i_abstol", "gmin_start", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("max_newton_iters", "gmin_steps", "source_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass
class DcSolution:
    node_voltages: np.ndarray          # indexed by node, ground included
    source_currents: dict[str, float]  # current out of each source's + terminal
    converged_via: ConvergedVia
    node_names: tuple[str, ...]
    ports: dict[str, int]
    residual: float = 0.0

    def v(self, name: str) -> float:
        idx = self.ports.get(name)
        if idx is None:
            idx = self.node_names.index(name)
        return float(self.node_voltages[idx])

    def as_guess(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.node_names[1:], self.node_voltages[1:])}


@dataclass
class TransientTrace:
    times: np.ndarray
    node_voltages: np.ndarray          # (time, node), ground column included
    source_currents: np.ndarray        # (time, source)
    node_names: tuple[str, ...]
    source_labels: tuple[str, ...]
    ports: dict[str, int] = field(default_factory=dict)
    source_voltages: np.ndarray | None = None   # (time, source)

    def v(self, name: str) -> np.ndarray:
        idx = self.ports.get(name)
        if idx is None:
            idx = self.node_names.index(name)
        return self.node_voltages[:, idx]

    def i(self, label: str) -> np.ndarray:
        return self.source_currents[:, self.source_labels.index(label)]

    def source_voltage(self, label: str) -> np.ndarray:
        return self.source_voltages[:, self.source_labels.index(label)]

    def at(self, name: str, t: float) -> float:
        return float(np.interp(t, self.times, self.v(name)))

    def write_csv(self, target) -> None:
        header = ["time"] + list(self.node_names[1:]) + [f"I({s})" for s in self.source_labels]
        rows = np.column_stack([self.times, self.node_voltages[:, 1:], self.source_currents])
        _write_rows(target, header, rows)


def _write_rows(target, header, rows):
    own = isinstance(target, (str, Path))
    fh = open(target, "w", newline="") if own else target
    try:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) for x in row])
    finally:
        if own:
            fh.close()


def sweep_to_csv(sweep, target, source_label: str = "vin") -> None:
    """Write a dc_sweep result: swept value then every node voltage."""
    names = sweep[0][1].node_names[1:] if sweep else ()
    rows = [[v] + list(sol.node_voltages[1:]) for v, sol in sweep]
    _write_rows(target, [source_label] + list(names), rows)


# ---------------------------------------------------------------------------


@dataclass
class Companion:
    """Capacitor history for one implicit step: i = geq*v + hist."""

    geq: np.ndarray
    hist: np.ndarray


class MnaSystem:
    """Compiled form of a circuit; owns the Newton workspace."""

    def __init__(self, circuit: Circuit):
        self.circuit = circuit
        self.n_nodes = circuit.node_count
        srcs = circuit.sources
        self.source_labels = tuple(e.label for e in srcs)
        self.waveforms = [e.value for e in srcs]
        self.m = len(srcs)
        self.size = self.n_nodes + self.m
        self.overrides: dict[int, float] = {}

        devs = circuit.devices
        self.dev_labels = [e.label for e in devs]
        self.d = np.array([e.terminals[0] for e in devs], dtype=int)
        self.g = np.array([e.terminals[1] for e in devs], dtype=int)
        self.s = np.array([e.terminals[2] for e in devs], dtype=int)
        self.sign = np.array([1.0 if e.value.polarity is Polarity.N else -1.0 for e in devs])
        self.tubes = np.array([float(e.value.tubes) for e in devs])
        vth, nvt, isc, gfl = [], [], [], []
        for e in devs:
            dev = e.value
            n = dev.params.subthreshold_slope_factor * DEFAULT_CONSTANTS.vt
            a, b = _model_scales(dev.params, dev.vth, n)
            vth.append(dev.vth)
            nvt.append(n)
            isc.append(a)
            gfl.append(b)
        self.vth, self.nvt = np.array(vth), np.array(nvt)
        self.i_scale, self.g_floor = np.array(isc), np.array(gfl)

        res = [e for e in circuit.elements if e.kind is Kind.RESISTOR]
        caps = [e for e in circuit.elements if e.kind is Kind.CAPACITOR]
        self.cap_labels = [e.label for e in caps]
        self.ca = np.array([e.terminals[0] for e in caps], dtype=int)
        self.cb = np.array([e.terminals[1] for e in caps], dtype=int)
        self.cval = np.array([float(e.value) for e in caps])
        self.sa = np.array([e.terminals[0] for e in srcs], dtype=int)
        self.sb = np.array([e.terminals[1] for e in srcs], dtype=int)
        self.sp = self.n_nodes + np.arange(self.m)

        # constant linear part: resistors, device gmin, source incidence
        size = self.size
        G = np.zeros((size, size))
        for e in res:
            a, b = e.terminals
            _stamp_g(G, a, b, 1.0 / e.value)
        for a, b in zip(self.d, self.s):
            _stamp_g(G, a, b, GMIN)
        for k in range(self.m):
            a, b, p = self.sa[k], self.sb[k], self.sp[k]
            G[a, p] += 1
            G[b, p] -= 1
            G[p, a] += 1
            G[p, b] -= 1
        self.G = G

        # flat scatter indices for the device Jacobian
        d, g, s = self.d, self.g, self.s
        rows = np.concatenate([d, d, d, s, s, s])
        cols = np.concatenate([d, g, s, d, g, s])
        self._dev_idx = rows * size + cols
        ca, cb = self.ca, self.cb
        self._cap_idx = np.concatenate([ca * size + ca, ca * size + cb,
                                        cb * size + ca, cb * size + cb])

    # -- evaluation ----------------------------------------------------------

    def source_values(self, t: float, scale: float = 1.0) -> np.ndarray:
        vals = np.array([self.overrides.get(k, w(t)) for k, w in enumerate(self.waveforms)])
        return vals * scale

    def device_currents(self, v: np.ndarray):
        vgs = v[self.g] - v[self.s]
        vds = v[self.d] - v[self.s]
        sg = self.sign
        i, gm, gds = nmos_core(sg * vgs, sg * vds, self.vth, self.nvt, self.i_scale, self.g_floor)
        return sg * i * self.tubes, gm * self.tubes, gds * self.tubes

    def assemble(self, x: np.ndarray, t: float = 0.0, scale: float = 1.0,
                 companion: Companion | None = None, shunt: float = 0.0):
        """Full-size Jacobian and residual (ground row/column still present)."""
        size = self.size
        v = x[:self.n_nodes]
        f = self.G @ x
        f[self.sp] -= self.source_values(t, scale)
        J = self.G.copy()

        if len(self.d):
            i, gm, gds = self.device_currents(v)
            np.add.at(f, self.d, i)
            np.add.at(f, self.s, -i)
            gs = -gm - gds
            w = np.concatenate([gds, gm, gs, -gds, -gm, -gs])
            J += np.bincount(self._dev_idx, weights=w, minlength=size * size).reshape(size, size)

        if companion is not None and len(self.cval):
            vc = v[self.ca] - v[self.cb]
            ic = companion.geq * vc + companion.hist
            np.add.at(f, self.ca, ic)
            np.add.at(f, self.cb, -ic)
            geq = companion.geq
            w = np.concatenate([geq, -geq, -geq, geq])
            J += np.bincount(self._cap_idx, weights=w, minlength=size * size).reshape(size, size)

        if shunt:
            idx = np.arange(1, self.n_nodes)
            J[idx, idx] += shunt
            f[idx] += shunt * v[idx]
        return J, f

    def kcl_residual(self, f: np.ndarray) -> float:
        nodes = f[1:self.n_nodes]
        return float(np.max(np.abs(nodes))) if nodes.size else 0.0

    def branch_residual(self, f: np.ndarray) -> float:
        return float(np.max(np.abs(f[self.sp]))) if self.m else 0.0

    # -- Newton ---------------------------------------------------------------

    def newton(self, x0: np.ndarray, options: SolverOptions, t: float = 0.0, scale: float = 1.0,
               companion: Companion | None = None, shunt: float = 0.0):
        """Damped Newton.  Returns (x, converged, residual)."""
        x = x0.copy()
        x[0] = 0.0
        small_step = False
        residual = float("inf")
        nn = self.n_nodes
        for _ in range(options.max_newton_iters + 1):
            J, f = self.assemble(x, t, scale, companion, shunt)
            residual = self.kcl_residual(f)
            if small_step and residual <= options.i_abstol \
                    and self.branch_residual(f) <= options.v_abstol:
                return x, True, residual
            try:
                dx = np.linalg.solve(J[1:, 1:], -f[1:])
            except np.linalg.LinAlgError as exc:
                raise SingularMatrix(f"singular MNA matrix at t={t:g}") from exc
            if not np.all(np.isfinite(dx)):
                return x, False, residual
            dv = dx[:nn - 1]
            np.clip(dv, -MAX_STEP_V, MAX_STEP_V, out=dv)
            x[1:] += dx
            small_step = float(np.max(np.abs(dv), initial=0.0)) <= options.v_abstol
        return x, False, residual

    def initial_vector(self, guess) -> np.ndarray:
        x = np.zeros(self.size)
        if guess is None:
            return x
        if isinstance(guess, dict):
            names = self.circuit.node_names
            ports = self.circuit.ports
            for key, val in guess.items():
                idx = ports.get(key)
                if idx is None and key in names:
                    idx = names.index(key)
                if idx:
                    x[idx] = val
            return x
        g = np.asarray(guess, dtype=float)
        if g.shape[0] == self.n_nodes:
            x[:self.n_nodes] = g
        elif g.shape[0] == self.n_nodes - 1:
            x[1:self.n_nodes] = g
        elif g.shape[0] == self.size:
            x[:] = g
        else:
            raise ValueError(f"initial guess has {g.shape[0]} entries, circuit has "
                             f"{self.n_nodes} nodes")
        return x

    def _try_newton(self, x, options, t, **kw):
        """Newton that reports a singular matrix as a failure; returns (x, ok, res, singular)."""
        try:
            return (*self.newton(x, options, t, **kw), False)
        except SingularMatrix:
            return x, False, float("inf"), True

    def solve_dc(self, options: SolverOptions, initial_guess=None, t: float = 0.0) -> DcSolution:
        """Direct Newton, then gmin stepping, then source stepping.

        Gmin stepping ends with a plain Newton polish.  When that polish fails
        (a node with no DC path is singular without the shunt) the solution at
        the last rung, every node tied to ground by GMIN, is returned instead.
        """
        x0 = self.initial_vector(initial_guess)
        x, ok, res, singular = self._try_newton(x0, options, t)
        best = res
        if ok:
            return self._dc_solution(x, ConvergedVia.DIRECT, t)
        all_singular = singular
        log.debug("direct Newton failed (residual %.3g), trying gmin stepping", res)

        x = x0.copy()
        for g in np.geomspace(options.gmin_start, GMIN, options.gmin_steps):
            x, ok, res, singular = self._try_newton(x, options, t, shunt=g)
            all_singular &= singular
            if not ok:
                break
        if ok:
            xp, ok_p, _, _ = self._try_newton(x, options, t)
            if ok_p:
                return self._dc_solution(xp, ConvergedVia.GMIN_STEPPING, t)
            log.info("operating point keeps the %.0e S shunt on every node", GMIN)
            return self._dc_solution(x, ConvergedVia.GMIN_STEPPING, t, shunt=GMIN)
        best = min(best, res)
        log.debug("gmin stepping failed (residual %.3g), trying source stepping", res)

        x = x0.copy()
        for alpha in np.linspace(1.0 / options.source_steps, 1.0, options.source_steps):
            x, ok, res, singular = self._try_newton(x, options, t, scale=alpha)
            all_singular &= singular
            if not ok:
                break
        if ok:
            return self._dc_solution(x, ConvergedVia.SOURCE_STEPPING, t)
        best = min(best, res)
        if all_singular:
            raise SingularMatrix(f"singular MNA matrix at t={t:g} (inconsistent sources or "
                                 "a loop of voltage sources)")
        raise NonConvergence(f"DC operating point did not converge (best residual {best:.3g} A)",
                             residual=best, time=t)

    def _dc_solution(self, x, via, t, shunt: float = 0.0) -> DcSolution:
        _, f = self.assemble(x, t, shunt=shunt)
        v = x[:self.n_nodes].copy()
        currents = {lbl: float(-x[self.n_nodes + k]) for k, lbl in enumerate(self.source_labels)}
        return DcSolution(v, currents, via, self.circuit.node_names, dict(self.circuit.ports),
                          self.kcl_residual(f))


def _stamp_g(G, a, b, g):
    G[a, a] += g
    G[b, b] += g
    G[a, b] -= g
    G[b, a] -= g


# ---------------------------------------------------------------------------
# public operations


def stamp(circuit: Circuit, state, companion: Companion | None = None, t: float = 0.0):
    """Linearised MNA system ``(J, rhs)`` at ``state`` with ``J @ dx = rhs``.

    ``state`` holds the non-ground node voltages followed by the source branch
    currents.
    """
    sys_ = MnaSystem(circuit)
    state = np.asarray(state, dtype=float)
    if state.shape != (sys_.size - 1,):
        raise ValueError(f"state must have {sys_.size - 1} entries, got {state.shape}")
    x = np.concatenate([[0.0], state])
    J, f = sys_.assemble(x, t, companion=companion)
    return J[1:, 1:], -f[1:]


def dc_operating_point(circuit: Circuit, options: SolverOptions = SolverOptions(),
                       initial_guess=None) -> DcSolution:
    floating = circuit.floating_nodes()
    if floating:
        log.info("nodes without a path to ground: %s", floating)
    return MnaSystem(circuit).solve_dc(options, initial_guess)


def dc_sweep(circuit: Circuit, source_label: str, start: float, stop: float, step: float,
             options: SolverOptions = SolverOptions(), initial_guess=None):
    """Sweep one source, warm-starting each point from the previous one."""
    if not step > 0:
        raise ValueError("sweep step must be positive")
    sys_ = MnaSystem(circuit)
    if source_label not in sys_.source_labels:
        raise KeyError(f"no source labelled {source_label!r}")
    k = sys_.source_labels.index(source_label)
    count = int(round(abs(stop - start) / step))
    direction = 1.0 if stop >= start else -1.0
    values = start + direction * step * np.arange(count + 1)
    out = []
    guess = initial_guess
    for value in values:
        sys_.overrides[k] = float(value)
        try:
            sol = sys_.solve_dc(options, guess)
        except NonConvergence as exc:
            raise NonConvergence(f"sweep of {source_label} failed at {value:g} V",
                                 residual=exc.residual, sweep_value=float(value)) from exc
        out.append((float(value), sol))
        guess = sol.node_voltages
    return out


def time_grid(circuit: Circuit, t_end: float, dt: float) -> np.ndarray:
    """Uniform grid with every source breakpoint inserted.

    Grid points that fall within ``1e-3 * dt`` of a breakpoint are dropped so
    no sliver step is created; the breakpoints themselves are always kept.
    """
    n = int(np.ceil(t_end / dt - 1e-9))
    uniform = np.linspace(0.0, n * dt, n + 1)
    uniform = uniform[uniform < t_end - 1e-3 * dt]
    breaks = np.unique([b for e in circuit.sources for b in e.value.breakpoints()
                        if 0 < b < t_end])
    if breaks.size:
        pos = np.searchsorted(breaks, uniform)
        gap_hi = np.abs(breaks[np.minimum(pos, breaks.size - 1)] - uniform)
        gap_lo = np.abs(breaks[np.maximum(pos - 1, 0)] - uniform)
        near = np.minimum(gap_hi, gap_lo) <= 1e-3 * dt
        near[0] = False
        uniform = uniform[~near]
    return np.unique(np.concatenate([uniform, breaks, [t_end]]))


def transient(circuit: Circuit, t_end: float, options: SolverOptions = SolverOptions(),
              initial: DcSolution | None = None, initial_guess=None) -> TransientTrace:
    """Fixed-step implicit integration from a DC operating point."""
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    sys_ = MnaSystem(circuit)
    if initial is None:
        initial = sys_.solve_dc(options, initial_guess, t=0.0)
    times = time_grid(circuit, t_end, options.dt)
    x = np.zeros(sys_.size)
    x[:sys_.n_nodes] = initial.node_voltages
    for k, lbl in enumerate(sys_.source_labels):
        x[sys_.n_nodes + k] = -initial.source_currents.get(lbl, 0.0)
    n = len(times)
    V = np.empty((n, sys_.n_nodes))
    I = np.empty((n, sys_.m))
    SV = np.empty((n, sys_.m))
    V[0] = x[:sys_.n_nodes]
    I[0] = -x[sys_.n_nodes:]
    SV[0] = sys_.source_values(0.0)
    v_cap = x[sys_.ca] - x[sys_.cb]
    i_cap = np.zeros_like(v_cap)
    trap = options.integrator is Integrator.TRAPEZOIDAL

    for step in range(1, n):
        t0, t1 = times[step - 1], times[step]
        x, v_cap, i_cap = _advance(sys_, x, v_cap, i_cap, t0, t1, options, trap)
        V[step] = x[:sys_.n_nodes]
        I[step] = -x[sys_.n_nodes:]
        SV[step] = sys_.source_values(t1)

    return TransientTrace(times, V, I, circuit.node_names, sys_.source_labels,
                          dict(circuit.ports), SV)


def _advance(sys_, x, v_cap, i_cap, t0, t1, options, trap, depth=0):
    h = t1 - t0
    if trap:
        geq = 2.0 * sys_.cval / h
        hist = -geq * v_cap - i_cap
    else:
        geq = sys_.cval / h
        hist = -geq * v_cap
    comp = Companion(geq, hist)
    x_new, ok, res = sys_.newton(x, options, t1, companion=comp)
    if ok:
        v_new = x_new[sys_.ca] - x_new[sys_.cb]
        return x_new, v_new, geq * v_new + hist
    if depth >= 3:
        raise NonConvergence(f"transient Newton failed at t={t1:.6g} s (residual {res:.3g} A)",
                             residual=res, time=t1)
    # retry the interval in smaller pieces
    for a, b in zip(np.linspace(t0, t1, 5)[:-1], np.linspace(t0, t1, 5)[1:]):
        x, v_cap, i_cap = _advance(sys_, x, v_cap, i_cap, a, b, options, trap, depth + 1)
    return x, v_cap, i_cap


def with_options(options: SolverOptions, **changes) -> SolverOptions:
    return replace(options, **changes)
