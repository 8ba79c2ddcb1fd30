"""Sweeps that pick the protocol levels the published description leaves open.

4T: the idle word-line levels V_Idle1/V_Idle2 set the leakage balance that
retains both stored values.  5T: the precharge level V_PC must let a read
leave either value intact.  Each level is set to the midpoint of the window in
which the static checks below pass, one coordinate at a time.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import Mode, Operation, ProtocolConfig, bias_plan, mode_levels, static_circuit
from .cells import CellKind
from .solver import MnaSystem, SolverError, SolverOptions


@dataclass
class Window:
    name: str
    values: np.ndarray
    passed: np.ndarray

    @property
    def interval(self) -> tuple[float, float] | None:
        """Longest run of passing grid points, as (low, high)."""
        best, start = None, None
        for i, ok in enumerate(list(self.passed) + [False]):
            if ok and start is None:
                start = i
            elif not ok and start is not None:
                if best is None or i - start > best[1] - best[0]:
                    best = (start, i)
                start = None
        if best is None:
            return None
        return float(self.values[best[0]]), float(self.values[best[1] - 1])

    @property
    def midpoint(self) -> float:
        iv = self.interval
        if iv is None:
            raise SolverError(f"no passing window for {self.name}")
        return round((iv[0] + iv[1]) / 2, 6)


def _settles_to(kind, levels, start_bit, vdd, options, target_bit=None):
    """Operating point reached from an ideal stored state; True if it holds ``target_bit``."""
    target_bit = start_bit if target_bit is None else target_bit
    q = vdd if start_bit else 0.0
    guess = {"Q": q, "QB": vdd - q, "Q1": q}
    try:
        sol = MnaSystem(static_circuit(kind, levels)).solve_dc(options, guess)
    except SolverError:
        return False, None
    want = vdd if target_bit else 0.0
    ok = abs(sol.v("Q") - want) <= 0.1 * vdd and abs(sol.v("QB") - (vdd - want)) <= 0.1 * vdd
    return ok, sol


def static_checks_4t(cfg: ProtocolConfig, options: SolverOptions = SolverOptions()) -> bool:
    """Both values retained at idle, and each write flips the cell."""
    k, vdd = CellKind.SRAM4T, cfg.vdd
    hold = mode_levels(k, Mode.HOLD, cfg)
    for bit in (0, 1):
        if not _settles_to(k, hold, bit, vdd, options)[0]:
            return False
        if not _settles_to(k, mode_levels(k, Mode.WRITE, cfg, bit), 1 - bit, vdd, options, bit)[0]:
            return False
    return True


def static_checks_5t(cfg: ProtocolConfig, options: SolverOptions = SolverOptions()) -> bool:
    """A read at V_PC keeps either value, and each write flips the cell."""
    k, vdd = CellKind.SRAM5T, cfg.vdd
    hold = mode_levels(k, Mode.HOLD, cfg)
    read = bias_plan(k, Operation.READ0, cfg).static(active=True)
    for bit in (0, 1):
        if not _settles_to(k, hold, bit, vdd, options)[0]:
            return False
        ok, sol = _settles_to(k, read, bit, vdd, options, bit)
        # during the read the node may sag; it must come back once the word line drops
        if sol is None or (bit and sol.v("Q") < vdd / 2) or (not bit and sol.v("Q") > vdd / 2):
            return False
        back = MnaSystem(static_circuit(k, hold)).solve_dc(options, sol.as_guess())
        if abs(back.v("Q") - (vdd if bit else 0.0)) > 0.1 * vdd:
            return False
        if not _settles_to(k, mode_levels(k, Mode.WRITE, cfg, bit), 1 - bit, vdd, options, bit)[0]:
            return False
    return True


def sweep_window(name: str, cfg: ProtocolConfig, check, step: float = 0.01,
                 options: SolverOptions = SolverOptions()) -> Window:
    values = np.round(np.arange(0.0, cfg.vdd + step / 2, step), 9)
    passed = np.array([check(cfg.updated(**{name: float(v)}), options) for v in values])
    return Window(name, values, passed)


@dataclass
class Calibration:
    config: ProtocolConfig
    windows: list[Window]

    def summary(self) -> str:
        lines = []
        for w in self.windows:
            iv = w.interval
            span = "none" if iv is None else f"[{iv[0]:.3f}, {iv[1]:.3f}] V"
            lines.append(f"{w.name}: window {span}, chosen {getattr(self.config, w.name):.3f} V")
        return "\n".join(lines)


def calibrate(cfg: ProtocolConfig = ProtocolConfig(), step: float = 0.01,
              coarse: float = 0.05, options: SolverOptions = SolverOptions()) -> Calibration:
    """Pick V_Idle1, V_Idle2 and V_PC.

    V_Idle1 is the midpoint of the range over which some V_Idle2 on a coarse
    grid passes the 4T checks; V_Idle2 is then the midpoint of its passing
    window at that V_Idle1.  V_PC is the midpoint of the 5T window.
    """
    grid = np.round(np.arange(0.0, cfg.vdd + coarse / 2, coarse), 9)
    any_v2 = np.array([any(static_checks_4t(cfg.updated(v_idle1=float(a), v_idle2=float(b)), options)
                           for b in grid) for a in grid])
    w1 = Window("v_idle1", grid, any_v2)
    cfg = cfg.updated(v_idle1=w1.midpoint)
    w2 = sweep_window("v_idle2", cfg, static_checks_4t, step, options)
    cfg = cfg.updated(v_idle2=w2.midpoint)
    wpc = sweep_window("v_pc", cfg, static_checks_5t, step, options)
    cfg = cfg.updated(v_pc=wpc.midpoint)
    return Calibration(cfg, [w1, w2, wpc])


CONFIG_HEADER = """\
# Protocol levels not given by the published cell descriptions.
# v_idle1, v_idle2 and v_pc were produced by the calibration sweep
# (`cntsram calibrate`); v_float is the level the 10T cell supply is taken to
# sag to while it floats during a write.
"""


def write_config(cal: Calibration, path: str | Path) -> None:
    c = cal.config
    body = "".join(f"{k}={getattr(c, k)!r}\n" for k in ("v_idle1", "v_idle2", "v_pc", "v_float"))
    notes = "".join(f"# {line}\n" for line in cal.summary().splitlines())
    Path(path).write_text(CONFIG_HEADER + notes + body)
