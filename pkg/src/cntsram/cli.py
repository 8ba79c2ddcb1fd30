"""Command-line entry point.

Exit status: 0 pass, 1 fail (verdict failed or a margin collapsed to zero),
2 solver error, 64 invalid usage or configuration.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .analysis import (AnalysisError, Mode, Operation, ProtocolConfig, PROTOCOL_KEYS,
                       butterfly, butterfly_to_csv, comparison_table, energy_to_csv,
                       measure_energy, protocol_from_mapping, reports_to_csv, run_testbench,
                       snm_max_square, write_margin)
from .calibration import calibrate, write_config
from .cells import CellKind
from .device import (DEFAULT_PARAMS, PARAM_KEYS, Chirality, DeviceError, DeviceInstance,
                     Polarity, cnt_diameter, drain_current, params_from_mapping,
                     read_key_values, threshold_voltage)
from .netlist import NetlistError, parse_netlist, parse_value
from .solver import SolverError, SolverOptions, dc_operating_point, transient

EXIT_PASS, EXIT_FAIL, EXIT_SOLVER, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _duration(text: str) -> float:
    try:
        value = parse_value(text.rstrip("sS") if text[-1:] in "sS" and len(text) > 1 else text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad duration {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("duration must be positive")
    return value


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad fraction {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("assist fraction must be >= 0")
    return value


def _chirality(text: str) -> Chirality:
    try:
        return Chirality.parse(text)
    except DeviceError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cntsram", description="CNTFET SRAM cell simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", type=Path, help="key=value parameter file")
        sp.add_argument("--vdd", type=float, help="supply voltage (V)")
        sp.add_argument("--assist", type=_fraction, help="10T write word-line boost fraction")
        sp.add_argument("--out", type=Path, default=Path("."), help="output directory")

    cells = [k.value for k in CellKind]
    sim = sub.add_parser("simulate", help="run a read/write/hold testbench")
    sim.add_argument("--cell", choices=cells)
    sim.add_argument("--op", choices=[o.value for o in Operation])
    sim.add_argument("--duration", type=_duration,
                     help="hold window, or transient length with --netlist (e.g. 1u)")
    sim.add_argument("--netlist", type=Path, help="simulate a netlist file instead of a cell")
    sim.add_argument("--dt", type=_duration, help="transient time step (e.g. 1p)")
    common(sim)

    snm = sub.add_parser("snm", help="butterfly curves and noise margins")
    snm.add_argument("--cell", choices=cells)
    snm.add_argument("--mode", choices=[m.value for m in Mode])
    snm.add_argument("--all", action="store_true", help="every cell in every mode")
    snm.add_argument("--jobs", type=int, default=1, help="worker processes for --all")
    common(snm)

    dev = sub.add_parser("device", help="print a device card")
    dev.add_argument("--chirality", type=_chirality, default=None)
    dev.add_argument("--tubes", type=int, default=1)
    dev.add_argument("--polarity", choices=["nch", "pch"], default="nch")
    common(dev)

    cal = sub.add_parser("calibrate", help="sweep the 4T idle and 5T precharge levels")
    cal.add_argument("--step", type=float, default=0.01)
    common(cal)
    return p


def load_config(args):
    """Defaults < config file < command-line flags."""
    values = {}
    if args.config is not None:
        try:
            values = read_key_values(args.config)
        except (OSError, ValueError) as exc:
            raise UsageError(str(exc)) from None
        unknown = sorted(set(values) - set(PARAM_KEYS) - set(PROTOCOL_KEYS))
        if unknown:
            raise UsageError(f"{args.config}: unknown keys {unknown}")
    try:
        params = params_from_mapping(values, DEFAULT_PARAMS)
        cfg = protocol_from_mapping(values)
        if args.vdd is not None:
            cfg = cfg.updated(vdd=args.vdd)
        if args.assist is not None:
            cfg = cfg.updated(write_assist_boost=args.assist)
        if getattr(args, "chirality", None) is not None:
            params = params_from_mapping({"chirality": str(args.chirality)}, params)
    except (DeviceError, AnalysisError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    return params, cfg


def _out_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {path}: {exc}") from None
    return path


# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    params, cfg = load_config(args)
    out = _out_dir(args.out)
    options = SolverOptions() if args.dt is None else SolverOptions(dt=args.dt)
    if args.netlist is not None:
        if args.cell or args.op:
            raise UsageError("--netlist replaces --cell/--op")
        try:
            circuit = parse_netlist(args.netlist.read_text(), params)
        except OSError as exc:
            raise UsageError(str(exc)) from None
        except NetlistError as exc:
            raise UsageError(f"{args.netlist}: {exc}") from None
        stem = args.netlist.stem
        if args.duration is None:
            sol = dc_operating_point(circuit, options)
            for name, v in zip(sol.node_names[1:], sol.node_voltages[1:]):
                print(f"{name} = {v:.6g} V")
            print(f"{stem}: operating point converged ({sol.converged_via.value})")
            return EXIT_PASS
        trace = transient(circuit, args.duration, options)
        path = out / f"{stem}_trace.csv"
        trace.write_csv(path)
        print(f"{stem}: transient done, {len(trace.times)} points -> {path}")
        return EXIT_PASS

    if args.cell is None or args.op is None:
        raise UsageError("simulate needs --cell and --op (or --netlist)")
    kind, op = CellKind(args.cell), Operation(args.op)
    if args.duration is not None:
        if op is not Operation.HOLD:
            raise UsageError("--duration applies to the hold operation")
        cfg = cfg.updated(hold_time=args.duration)
    trace, verdict = run_testbench(kind, op, cfg, options, params=params)
    trace.write_csv(out / f"{kind.value}_{op.value}_trace.csv")
    energy = measure_energy(trace)
    (out / f"{kind.value}_{op.value}_energy.csv").write_text(energy_to_csv(energy))
    detail = " ".join(f"{k}={v:.4g}" for k, v in verdict.details.items())
    print(f"{kind.value} {op.value}: {verdict} {detail}".rstrip())
    return EXIT_PASS if verdict.passed else EXIT_FAIL


def _margin(job):
    kind, mode, cfg, params = job
    if mode is Mode.WRITE:
        return write_margin(kind, cfg, params=params), None
    curve = butterfly(kind, mode, cfg, params=params)
    return snm_max_square(curve, kind.value), curve


def cmd_snm(args) -> int:
    params, cfg = load_config(args)
    out = _out_dir(args.out)
    if args.all:
        if args.cell or args.mode:
            raise UsageError("--all replaces --cell/--mode")
        jobs = [(k, m, cfg, params) for m in Mode for k in CellKind]
    else:
        if args.cell is None or args.mode is None:
            raise UsageError("snm needs --cell and --mode, or --all")
        jobs = [(CellKind(args.cell), Mode(args.mode), cfg, params)]

    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_margin, jobs))
    else:
        results = [_margin(j) for j in jobs]

    reports = [r for r, _ in results]
    for (kind, mode, _, _), (report, curve) in zip(jobs, results):
        if curve is not None and not args.all:
            (out / f"{kind.value}_{mode.value}_butterfly.csv").write_text(butterfly_to_csv(curve))
    if args.all:
        tables = "\n".join(comparison_table(reports, m) for m in Mode)
        (out / "snm_table.txt").write_text(tables)
        (out / "snm_report.csv").write_text(reports_to_csv(reports))
        print(tables, end="")
    else:
        r = reports[0]
        (out / f"{r.cell}_{r.mode.value}_report.csv").write_text(reports_to_csv(reports))
        extra = "" if r.monostable is None else f" monostable={r.monostable}"
        print(f"{r.cell} {r.mode.value}: snm={r.snm * 1e3:.3f} mV "
              f"(high lobe {r.lobe_high * 1e3:.3f} mV, low lobe {r.lobe_low * 1e3:.3f} mV, "
              f"{r.intersections} intersections){extra}")
    return EXIT_FAIL if any(r.snm <= 0 for r in reports) else EXIT_PASS


def cmd_device(args) -> int:
    params, cfg = load_config(args)
    if args.tubes < 1:
        raise UsageError("--tubes must be >= 1")
    pol = Polarity(args.polarity)
    dev = DeviceInstance(pol, args.tubes, params)
    d = cnt_diameter(params.chirality)
    vdd = cfg.vdd if pol is Polarity.N else -cfg.vdd
    print(f"chirality   {params.chirality}")
    print(f"diameter    {d * 1e9:.6f} nm")
    print(f"vth         {threshold_voltage(d):.6f} V")
    print(f"polarity    {pol.value}")
    print(f"tubes       {args.tubes}")
    print(f"i_on        {drain_current(dev, vdd, vdd):.6e} A   (|vgs| = |vds| = {cfg.vdd:g} V)")
    print(f"i_off       {drain_current(dev, 0.0, vdd):.6e} A   (vgs = 0, |vds| = {cfg.vdd:g} V)")
    return EXIT_PASS


def cmd_calibrate(args) -> int:
    _, cfg = load_config(args)
    out = _out_dir(args.out)
    cal = calibrate(cfg, step=args.step)
    path = out / "default.cfg"
    write_config(cal, path)
    print(cal.summary())
    print(f"written to {path}")
    return EXIT_PASS


COMMANDS = {"simulate": cmd_simulate, "snm": cmd_snm, "device": cmd_device,
            "calibrate": cmd_calibrate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cntsram: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"cntsram: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
