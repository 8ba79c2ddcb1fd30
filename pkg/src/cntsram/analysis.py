"""Read/write/idle protocols, testbenches, noise margins and energy.

Every cell is described by a bias plan: the idle level of each driven port, the
levels its word lines take during the access pulse, and the levels other lines
(bit-line data, virtual ground, supply, feedback gate) hold from the start of
the access phase until the cell returns to idle.  The same plan feeds both the
timed stimulus of a testbench and the static biases of the butterfly sweeps.

Testbench bit lines are not driven directly.  Each one hangs off a precharge
transmission gate (from ``VPRE_<line>``) and a write-driver transmission gate
(from ``VDIN_<line>``), so lines can float during reads and the energy drawn
from the bit-line sources is measurable.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field, fields, replace
from importlib import resources

import numpy as np

from .cells import BITLINES, LOOP_CUTS, READ_SENSE, CellKind, CellOptions, build_cell
from .device import DEFAULT_PARAMS, CntfetParams, DeviceInstance, Polarity, read_key_values
from .netlist import Circuit, Dc, Element, Kind, Pwl
from .snm import ButterflyCurve, Mode, SnmReport, snm_max_square, write_square
from .solver import (MnaSystem, SolverOptions, TransientTrace, dc_operating_point, dc_sweep,
                     transient, with_options)


class AnalysisError(ValueError):
    pass


class Operation(enum.Enum):
    WRITE0 = "write0"
    WRITE1 = "write1"
    READ0 = "read0"
    READ1 = "read1"
    HOLD = "hold"

    @property
    def is_write(self) -> bool:
        return self in (Operation.WRITE0, Operation.WRITE1)

    @property
    def is_read(self) -> bool:
        return self in (Operation.READ0, Operation.READ1)

    @property
    def bit(self) -> int | None:
        """Written or read value; None for hold."""
        return None if self is Operation.HOLD else int(self.value[-1])


def _calibrated_defaults() -> dict[str, float]:
    text = resources.files("cntsram").joinpath("data/default.cfg")
    with resources.as_file(text) as path:
        values = read_key_values(path)
    return {k: float(values[k]) for k in ("v_idle1", "v_idle2", "v_pc", "v_float")}


_CAL = _calibrated_defaults()


@dataclass(frozen=True)
class ProtocolConfig:
    """Bias levels and timing shared by protocols and static analyses.

    ``v_idle1``, ``v_idle2`` (4T word lines at idle), ``v_pc`` (5T precharge)
    and ``v_float`` (level the 10T cell supply sags to while it floats during
    a write) default to the values in ``data/default.cfg``, which the
    calibration sweep produced.
    """

    vdd: float = 0.9
    v_idle1: float = _CAL["v_idle1"]
    v_idle2: float = _CAL["v_idle2"]
    v_pc: float = _CAL["v_pc"]
    v_float: float = _CAL["v_float"]
    write_assist_boost: float = 0.30
    pulse_width: float = 2e-9
    slew: float = 50e-12
    precharge_time: float = 0.5e-9
    settle_time: float = 0.5e-9
    idle_time: float = 0.5e-9
    hold_time: float = 1e-6
    sweep_step: float = 1e-3

    def __post_init__(self):
        if not self.vdd > 0:
            raise AnalysisError("vdd must be positive")
        if self.write_assist_boost < 0:
            raise AnalysisError("write_assist_boost must be >= 0")
        top = self.vdd * (1 + self.write_assist_boost)
        for name in ("v_idle1", "v_idle2", "v_pc", "v_float"):
            v = getattr(self, name)
            if not 0 <= v <= top:
                raise AnalysisError(f"{name}={v} outside [0, {top:g}] V")
        for name in ("pulse_width", "slew", "precharge_time", "settle_time", "idle_time",
                     "hold_time", "sweep_step"):
            if not getattr(self, name) > 0:
                raise AnalysisError(f"{name} must be positive")
        if self.pulse_width <= 3 * self.slew:
            raise AnalysisError("pulse_width must exceed three slew times")
        for name in ("precharge_time", "settle_time", "idle_time"):
            if getattr(self, name) <= self.slew:
                raise AnalysisError(f"{name} must exceed the slew time")

    @property
    def v_write_wl(self) -> float:
        """Write word-line level of the 10T cell (boosted)."""
        return self.vdd * (1 + self.write_assist_boost)

    def updated(self, **changes) -> "ProtocolConfig":
        return replace(self, **changes)


PROTOCOL_KEYS = tuple(f.name for f in fields(ProtocolConfig))


def protocol_from_mapping(values: dict[str, str], base: ProtocolConfig | None = None) -> ProtocolConfig:
    """Apply config-file keys that name ProtocolConfig fields; others are ignored."""
    base = base or ProtocolConfig()
    updates = {k: float(v) for k, v in values.items() if k in PROTOCOL_KEYS}
    return replace(base, **updates)


# ---------------------------------------------------------------------------
# bias plans


@dataclass
class BiasPlan:
    idle: dict[str, float]                              # every driven port
    word: dict[str, float] = field(default_factory=dict)   # during the access pulse
    lines: dict[str, float] = field(default_factory=dict)  # access start until idle

    def static(self, active: bool) -> dict[str, float]:
        levels = dict(self.idle)
        if active:
            levels.update(self.lines)
            levels.update(self.word)
        return levels


def bias_plan(kind: CellKind, op: Operation, cfg: ProtocolConfig) -> BiasPlan:
    vdd = cfg.vdd
    bit = op.bit
    hi = lambda b: vdd if b else 0.0     # noqa: E731

    if kind is CellKind.SRAM4T:
        idle = dict(BL=vdd, BLB=0.0, WL1=cfg.v_idle1, WL2=cfg.v_idle2, VDD=vdd)
        if op.is_write:
            # complement of the data on BLB, then WL1 to VDD
            return BiasPlan(idle, word=dict(WL1=vdd), lines=dict(BLB=hi(1 - bit)))
        if op.is_read:
            return BiasPlan(idle, word=dict(WL2=0.0))
        return BiasPlan(idle)

    if kind is CellKind.SRAM5T:
        idle = dict(BL=cfg.v_pc, WL=0.0, VDD=vdd)
        if op.is_write:
            return BiasPlan(idle, word=dict(WL=vdd), lines=dict(BL=hi(bit)))
        if op.is_read:
            return BiasPlan(idle, word=dict(WL=vdd))
        return BiasPlan(idle)

    if kind is CellKind.SRAM6T:
        idle = dict(BL=vdd, BLB=vdd, WL=0.0, VDD=vdd)
        if op.is_write:
            return BiasPlan(idle, word=dict(WL=vdd), lines=dict(BL=hi(bit), BLB=hi(1 - bit)))
        if op.is_read:
            return BiasPlan(idle, word=dict(WL=vdd))
        return BiasPlan(idle)

    if kind is CellKind.SRAM7T:
        # WriteBit is not precharged; it is parked low between writes
        idle = dict(WriteBit=0.0, ReadBit=vdd, WriteSelect=0.0, ReadSelect=0.0,
                    WriteBar=vdd, VDD=vdd)
        if op.is_write:
            # M7 off for the whole write, M5 pulses, M7 back on at idle
            return BiasPlan(idle, word=dict(WriteSelect=vdd),
                            lines=dict(WriteBar=0.0, WriteBit=hi(bit)))
        if op.is_read:
            return BiasPlan(idle, word=dict(ReadSelect=vdd))
        return BiasPlan(idle)

    if kind is CellKind.SRAM8T:
        idle = dict(WBL=vdd, WBLB=vdd, RBL=vdd, WWL=0.0, RWL=0.0, VDD=vdd)
        if op.is_write:
            return BiasPlan(idle, word=dict(WWL=vdd), lines=dict(WBL=hi(bit), WBLB=hi(1 - bit)))
        if op.is_read:
            return BiasPlan(idle, word=dict(RWL=vdd))
        return BiasPlan(idle)

    if kind is CellKind.SRAM9T:
        idle = dict(WBL=vdd, RBL=vdd, WWL=0.0, RWL=0.0, VDD=vdd)
        if op.is_write:
            return BiasPlan(idle, word=dict(WWL=vdd), lines=dict(WBL=hi(bit)))
        if op.is_read:
            return BiasPlan(idle, word=dict(RWL=vdd))
        return BiasPlan(idle)

    if kind is CellKind.SRAM10T:
        idle = dict(BL=vdd, BLB=vdd, WL=0.0, WWL=0.0, Vgnd=vdd, VDD=vdd)
        if op.is_write:
            # the cell supply floats (sags to v_float) and both word lines are boosted
            wl = cfg.v_write_wl
            return BiasPlan(idle, word=dict(WL=wl, WWL=wl),
                            lines=dict(BL=hi(bit), BLB=hi(1 - bit), VDD=cfg.v_float))
        if op.is_read:
            return BiasPlan(idle, word=dict(WL=vdd), lines=dict(Vgnd=0.0))
        return BiasPlan(idle)

    raise AnalysisError(f"unsupported cell {kind!r}")


# ---------------------------------------------------------------------------
# stimulus


PHASES = ("precharge", "access", "settle", "idle")


@dataclass
class StimulusSequence:
    kind: CellKind
    op: Operation
    waveforms: dict[str, Pwl]                    # source name -> waveform
    phases: dict[str, tuple[float, float]]
    t_end: float

    @property
    def sense_time(self) -> float:
        return self.phases["access"][1]

    def level(self, name: str, t: float) -> float:
        return self.waveforms[name](t)


def _edges(base: float, changes, slew: float) -> Pwl:
    """Waveform at ``base`` with (start, level) ramps of length ``slew``."""
    pts = [(0.0, base)]
    level = base
    for start, new in changes:
        if new == level:
            continue
        pts.append((start, level))
        pts.append((start + slew, new))
        level = new
    return Pwl(tuple(pts))


def build_protocol(kind: CellKind, op: Operation, cfg: ProtocolConfig = ProtocolConfig()
                   ) -> StimulusSequence:
    """Timed waveforms for one operation, starting and ending in the idle state.

    Besides the cell ports the sequence drives the testbench controls ``PC``
    and ``WE`` (precharge and write-driver enables, with complements ``PCB``,
    ``WEB``) and the ``PRE_<line>`` / ``DIN_<line>`` levels behind them.
    """
    if not isinstance(kind, CellKind) or not isinstance(op, Operation):
        raise AnalysisError(f"unsupported (cell, operation) pair ({kind!r}, {op!r})")
    plan = bias_plan(kind, op, cfg)
    vdd, slew = cfg.vdd, cfg.slew
    bitlines = BITLINES[kind]
    waves = {}

    if op is Operation.HOLD:
        t_end = cfg.hold_time
        phases = {"idle": (0.0, t_end)}
        for port, v in plan.idle.items():
            if port in bitlines:
                waves[f"PRE_{port}"] = _edges(v, (), slew)
                waves[f"DIN_{port}"] = _edges(v, (), slew)
            else:
                waves[port] = _edges(v, (), slew)
        waves.update(PC=_edges(vdd, (), slew), PCB=_edges(0.0, (), slew),
                     WE=_edges(0.0, (), slew), WEB=_edges(vdd, (), slew))
        return StimulusSequence(kind, op, waves, phases, t_end)

    t1 = cfg.precharge_time
    t2 = t1 + cfg.pulse_width
    t3 = t2 + cfg.settle_time
    t_end = t3 + cfg.idle_time
    phases = {"precharge": (0.0, t1), "access": (t1, t2), "settle": (t2, t3),
              "idle": (t3, t_end)}

    for port, v in plan.idle.items():
        if port in bitlines:
            waves[f"PRE_{port}"] = _edges(v, (), slew)
            data = plan.lines.get(port, v)
            waves[f"DIN_{port}"] = _edges(v, ((t1, data), (t3, v)), slew)
        elif port in plan.word:
            waves[port] = _edges(v, ((t1 + slew, plan.word[port]), (t2 - slew, v)), slew)
        elif port in plan.lines:
            waves[port] = _edges(v, ((t1, plan.lines[port]), (t3, v)), slew)
        else:
            waves[port] = _edges(v, (), slew)

    # precharge devices off from access start until idle; write drivers on for writes
    waves["PC"] = _edges(vdd, ((t1, 0.0), (t3, vdd)), slew)
    waves["PCB"] = _edges(0.0, ((t1, vdd), (t3, 0.0)), slew)
    we = vdd if op.is_write else 0.0
    waves["WE"] = _edges(0.0, ((t1, we), (t3, 0.0)), slew)
    waves["WEB"] = _edges(vdd, ((t1, vdd - we), (t3, vdd)), slew)
    return StimulusSequence(kind, op, waves, phases, t_end)


# ---------------------------------------------------------------------------
# testbench

DRIVER_TUBES = 100


def _attach_periphery(cell: Circuit, kind: CellKind, seq: StimulusSequence,
                      params: CntfetParams) -> Circuit:
    c = cell
    n = DeviceInstance(Polarity.N, DRIVER_TUBES, params)
    p = DeviceInstance(Polarity.P, DRIVER_TUBES, params)
    for line in BITLINES[kind]:
        for tag, en, enb in (("PRE", "PC", "PCB"), ("DIN", "WE", "WEB")):
            src = f"{tag}_{line}"
            c = c.add(Kind.CNTFET_N, f"M{tag}N_{line}", (src, en, line), n)
            c = c.add(Kind.CNTFET_P, f"M{tag}P_{line}", (src, enb, line), p)
    for name, wave in seq.waveforms.items():
        c = c.add_source(f"V{name}", name, "0", wave)
    return c


def testbench_circuit(kind: CellKind, seq: StimulusSequence, sizing=None,
                      params: CntfetParams = DEFAULT_PARAMS,
                      options: CellOptions = CellOptions()) -> Circuit:
    return _attach_periphery(build_cell(kind, sizing, params, options), kind, seq, params)


@dataclass
class Verdict:
    passed: bool
    clause: str = ""
    details: dict = field(default_factory=dict)

    def __str__(self):
        return "PASS" if self.passed else f"FAIL ({self.clause})"


def _state_guess(kind: CellKind, q: float, vdd: float) -> dict[str, float]:
    guess = {"Q": q, "QB": vdd - q}
    if kind is CellKind.SRAM7T:
        guess["Q1"] = q
    return guess


def _clamped_state(circuit: Circuit, kind: CellKind, bit: int, vdd: float,
                   options: SolverOptions):
    """Operating point with Q/QB held at ideal rails, then released.

    Returned as a DcSolution of the unclamped circuit whose storage nodes sit
    exactly at the rails; other nodes are at their clamped equilibrium.
    """
    q = vdd if bit else 0.0
    c = circuit.add_source("VHOLDQ", "Q", "0", Dc(q)).add_source("VHOLDQB", "QB", "0", Dc(vdd - q))
    sol = dc_operating_point(c, options, _state_guess(kind, q, vdd))
    sol.source_currents.pop("VHOLDQ")
    sol.source_currents.pop("VHOLDQB")
    return sol


def run_testbench(kind: CellKind, op: Operation, cfg: ProtocolConfig = ProtocolConfig(),
                  options: SolverOptions = SolverOptions(), stored: int | None = None,
                  sizing=None, params: CntfetParams = DEFAULT_PARAMS,
                  cell_options: CellOptions = CellOptions()):
    """Simulate one operation and judge it.  Returns (trace, verdict).

    ``stored`` is the initial bit; it defaults to the complement of the written
    value, the read value, or 1 for hold.
    """
    seq = build_protocol(kind, op, cfg)
    circuit = testbench_circuit(kind, seq, sizing, params, cell_options)
    vdd = cfg.vdd
    tol = 0.1 * vdd
    if stored is None:
        stored = 1 - op.bit if op.is_write else (op.bit if op.is_read else 1)

    if op is Operation.HOLD:
        initial = _clamped_state(circuit, kind, stored, vdd, options)
        dt = max(options.dt, seq.t_end / 2000)
        trace = transient(circuit, seq.t_end, with_options(options, dt=dt), initial=initial)
        target = vdd if stored else 0.0
        dev = float(np.max(np.abs(trace.v("Q") - target)))
        devb = float(np.max(np.abs(trace.v("QB") - (vdd - target))))
        details = {"max_dev_q": dev, "max_dev_qb": devb}
        if dev > tol or devb > tol:
            return trace, Verdict(False, "stored state drifted more than 10% of vdd", details)
        return trace, Verdict(True, "", details)

    initial = dc_operating_point(circuit, options, _state_guess(kind, vdd if stored else 0.0, vdd))
    trace = transient(circuit, seq.t_end, options, initial=initial)
    q_end = float(trace.v("Q")[-1])

    if op.is_write:
        target = vdd if op.bit else 0.0
        final = {n: float(v) for n, v in zip(trace.node_names[1:], trace.node_voltages[-1, 1:])}
        post = MnaSystem(circuit).solve_dc(options, final, t=seq.t_end)
        details = {"q_end": q_end, "q_post_idle": post.v("Q")}
        if abs(q_end - target) > tol:
            return trace, Verdict(False, "Q not within 10% of the written rail", details)
        if abs(post.v("Q") - target) > tol:
            return trace, Verdict(False, "post-idle operating point lost the written value",
                                  details)
        return trace, Verdict(True, "", details)

    # read
    t_sense = seq.sense_time
    mode, *lines = READ_SENSE[kind]
    details = {"q_end": q_end}
    if mode == "diff":
        low0, low1 = lines
        low, high = (low0, low1) if stored == 0 else (low1, low0)
        sep = trace.at(high, t_sense) - trace.at(low, t_sense)
        details["separation"] = sep
        ok = sep >= 0.05
        why = "differential bit lines separated by less than 50 mV"
    elif mode == "single":
        line, discharging = lines
        drop = float(trace.v(line)[0]) - trace.at(line, t_sense)
        details["drop"] = drop
        if stored == discharging:
            ok, why = drop >= 0.05, "read line dropped by less than 50 mV"
        else:
            ok, why = drop < 0.05, "read line dropped although the stored value should hold it"
    else:
        (line,) = lines
        swing = trace.at(line, t_sense) - float(trace.v(line)[0])
        details["swing"] = swing
        ok = swing >= 0.05 if stored else swing <= -0.05
        why = "read line moved by less than 50 mV in the expected direction"
    if not ok:
        return trace, Verdict(False, why, details)
    for node in ("Q", "QB"):
        before = float(trace.v(node)[0])
        after = float(trace.v(node)[-1])
        if abs(after - before) > tol:
            return trace, Verdict(False, f"destructive read: {node} moved "
                                  f"{after - before:+.3f} V", details)
    return trace, Verdict(True, "", details)


# ---------------------------------------------------------------------------
# butterflies and margins


def static_circuit(kind: CellKind, levels: dict[str, float], sizing=None,
                   params: CntfetParams = DEFAULT_PARAMS,
                   options: CellOptions = CellOptions()) -> Circuit:
    """The bare cell with every listed port held by an ideal source."""
    c = build_cell(kind, sizing, params, options)
    for port, v in levels.items():
        c = c.add_source(f"V{port}", port, "0", Dc(v))
    return c


def cut_loop(circuit: Circuit, kind: CellKind, node: str, source: str = "VIN") -> Circuit:
    """Move the inputs fed by ``node`` onto a new swept node ``source``."""
    c, vin = circuit.with_node(source)
    n = c.node(node)
    moves = LOOP_CUTS.get(kind, {}).get(node)
    elements = []
    for e in c.elements:
        if e.is_device:
            t = list(e.terminals)
            if moves is None:
                if t[1] == n:
                    t[1] = vin
            else:
                for label, idx in moves:
                    if e.label == label:
                        t[idx] = vin
            e = Element(e.kind, tuple(t), e.value, e.label)
        elements.append(e)
    c = Circuit(tuple(elements), c.node_names, dict(c.ports))
    return c.add_source(f"V{source}", source, "0", Dc(0.0))


def transfer_curve(kind: CellKind, levels: dict[str, float], node_in: str, node_out: str,
                   vdd: float, step: float, options: SolverOptions = SolverOptions(),
                   sizing=None, params: CntfetParams = DEFAULT_PARAMS):
    c = cut_loop(static_circuit(kind, levels, sizing, params), kind, node_in)
    sweep = dc_sweep(c, "VVIN", 0.0, vdd, step, options,
                     initial_guess={node_out: vdd, node_in: 0.0})
    x = np.array([v for v, _ in sweep])
    y = np.array([s.v(node_out) for _, s in sweep])
    return x, y


_MODE_OP = {Mode.HOLD: Operation.HOLD, Mode.READ: Operation.READ0}


def mode_levels(kind: CellKind, mode: Mode, cfg: ProtocolConfig, written: int = 0):
    """Static port levels for a butterfly in ``mode``."""
    if mode is Mode.WRITE:
        op = Operation.WRITE1 if written else Operation.WRITE0
        return bias_plan(kind, op, cfg).static(active=True)
    return bias_plan(kind, _MODE_OP[mode], cfg).static(active=mode is Mode.READ)


def butterfly(kind: CellKind, mode: Mode, cfg: ProtocolConfig = ProtocolConfig(),
              options: SolverOptions = SolverOptions(), written: int = 0,
              sizing=None, params: CntfetParams = DEFAULT_PARAMS) -> ButterflyCurve:
    """Both voltage-transfer curves of the cell under the biases of ``mode``.

    Read biases assert the read word line with the read bit lines held at
    their precharge level; write biases drive the bit lines to ``written``.
    """
    levels = mode_levels(kind, mode, cfg, written)
    step = cfg.sweep_step
    x1, y1 = transfer_curve(kind, levels, "Q", "QB", cfg.vdd, step, options, sizing, params)
    x2, y2 = transfer_curve(kind, levels, "QB", "Q", cfg.vdd, step, options, sizing, params)
    return ButterflyCurve(x1, y1, x2, y2, mode, cfg.vdd)


def noise_margin(kind: CellKind, mode: Mode, cfg: ProtocolConfig = ProtocolConfig(),
                 options: SolverOptions = SolverOptions(), **kw) -> SnmReport:
    if mode is Mode.WRITE:
        return write_margin(kind, cfg, options, **kw)
    return snm_max_square(butterfly(kind, mode, cfg, options, **kw), kind.value)


def write_margin(kind: CellKind, cfg: ProtocolConfig = ProtocolConfig(),
                 options: SolverOptions = SolverOptions(), written: int | None = None,
                 **kw) -> SnmReport:
    """Write-mode margin; with ``written=None`` the weaker of the two writes."""
    if written is None:
        reports = [write_margin(kind, cfg, options, w, **kw) for w in (0, 1)]
        return min(reports, key=lambda r: r.snm)
    curve = butterfly(kind, Mode.WRITE, cfg, options, written, **kw)
    return write_square(curve, written, kind.value)


# ---------------------------------------------------------------------------
# energy


@dataclass
class EnergyReport:
    per_source: dict[str, float]
    total: float
    bitline_fraction: float
    window: tuple[float, float] = (0.0, 0.0)

    @property
    def bitline_energy(self) -> float:
        return sum(v for k, v in self.per_source.items() if is_bitline_source(k))


def is_bitline_source(label: str) -> bool:
    return label.startswith(("VPRE_", "VDIN_"))


def measure_energy(trace: TransientTrace, window: tuple[float, float] | None = None,
                   bitline=is_bitline_source) -> EnergyReport:
    """Energy delivered by each source, trapezoidal integral of v*i over the window."""
    t = trace.times
    t0, t1 = (t[0], t[-1]) if window is None else window
    if not t1 > t0:
        raise AnalysisError("empty energy window")
    if t0 < t[0] - 1e-18 or t1 > t[-1] + 1e-18:
        raise AnalysisError("energy window outside the trace")
    inside = (t > t0) & (t < t1)
    tt = np.concatenate([[t0], t[inside], [t1]])
    per = {}
    for k, label in enumerate(trace.source_labels):
        p = trace.source_voltages[:, k] * trace.source_currents[:, k]
        per[label] = float(np.trapezoid(np.interp(tt, t, p), tt))
    total = sum(per.values())
    bl = sum(v for k, v in per.items() if bitline(k))
    frac = bl / total if total > 0 else 0.0
    return EnergyReport(per, total, frac, (float(t0), float(t1)))


# ---------------------------------------------------------------------------
# reports

TABLE_TITLES = {Mode.HOLD: "Hold SNM (mV)", Mode.READ: "Read SNM (mV)",
                Mode.WRITE: "Write SNM (mV)"}

CELL_NAMES = {k: f"{k.value[:-1]}T SRAM" for k in CellKind}


def comparison_table(reports: list[SnmReport], mode: Mode) -> str:
    """Two-column text table: cell name, margin in mV."""
    rows = [r for r in reports if r.mode is mode]
    head = f"{'SRAM Cell':<12}{TABLE_TITLES[mode]:>18}"
    lines = [head, "-" * len(head)]
    for r in rows:
        name = CELL_NAMES.get(CellKind.parse(r.cell), r.cell) if r.cell else "-"
        lines.append(f"{name:<12}{r.snm * 1e3:>18.2f}")
    return "\n".join(lines) + "\n"


def reports_to_csv(reports: list[SnmReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(SnmReport(0, 0, 0, Mode.HOLD).as_row()),
                       lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.as_row().items()})
    return buf.getvalue()


def energy_to_csv(report: EnergyReport) -> str:
    lines = ["source,energy_j"]
    lines += [f"{k},{v!r}" for k, v in report.per_source.items()]
    lines.append(f"total,{report.total!r}")
    lines.append(f"bitline_fraction,{report.bitline_fraction!r}")
    return "\n".join(lines) + "\n"


def butterfly_to_csv(curve: ButterflyCurve) -> str:
    lines = ["q_in,qb_out,qb_in,q_out"]
    for row in zip(curve.forward_in, curve.forward_out, curve.mirrored_in, curve.mirrored_out):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"

