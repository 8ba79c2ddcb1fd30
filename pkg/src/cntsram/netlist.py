"""Circuit representation and a SPICE-like text netlist format.

Grammar, one element per line::

    M<label> <d> <g> <s> nch|pch tubes=<int> [chirality=<m>,<n>]
    R<label> <a> <b> <ohms>
    C<label> <a> <b> <farads>
    V<label> <a> <b> dc <volts>
    V<label> <a> <b> pwl (t1 v1 t2 v2 ...)
    .port <name> <node>
    .end

``*`` starts a comment line.  Numbers accept the suffixes k, m, u, n, p, f.
Nodes ``0``, ``gnd`` and ``GND`` are ground.  Element labels are the full
first token (``MN1``, ``R1``) and must be unique.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from .device import Chirality, CntfetParams, DEFAULT_PARAMS, DeviceError, DeviceInstance, Polarity

GROUND_NAMES = ("0", "gnd", "GND")


class NetlistError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


class Kind(enum.Enum):
    CNTFET_N = "CntfetN"
    CNTFET_P = "CntfetP"
    VSOURCE = "VSource"
    RESISTOR = "Resistor"
    CAPACITOR = "Capacitor"


# ---------------------------------------------------------------------------
# source waveforms


@dataclass(frozen=True)
class Dc:
    value: float

    def __call__(self, t: float) -> float:
        return self.value

    def breakpoints(self) -> tuple[float, ...]:
        return ()


@dataclass(frozen=True)
class Pwl:
    """Piecewise-linear waveform, held constant outside its time span."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.points:
            raise ValueError("pwl needs at least one point")
        times = [t for t, _ in self.points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("pwl times must be strictly increasing")

    def __call__(self, t: float) -> float:
        ts, vs = zip(*self.points)
        return float(np.interp(t, ts, vs))

    def breakpoints(self) -> tuple[float, ...]:
        return tuple(t for t, _ in self.points)

    @property
    def peak(self) -> float:
        return max(v for _, v in self.points)


Waveform = Union[Dc, Pwl]


# ---------------------------------------------------------------------------
# elements and circuits

_TERMINALS = {Kind.CNTFET_N: 3, Kind.CNTFET_P: 3, Kind.VSOURCE: 2,
              Kind.RESISTOR: 2, Kind.CAPACITOR: 2}
_LETTER = {Kind.CNTFET_N: "M", Kind.CNTFET_P: "M", Kind.VSOURCE: "V",
           Kind.RESISTOR: "R", Kind.CAPACITOR: "C"}


@dataclass(frozen=True)
class Element:
    kind: Kind
    terminals: tuple[int, ...]     # CNTFET: (drain, gate, source); others (a, b)
    value: object
    label: str

    def __post_init__(self):
        if not self.label or self.label[0].upper() != _LETTER[self.kind] or len(self.label) < 2:
            raise NetlistError(f"label {self.label!r} must start with {_LETTER[self.kind]!r} "
                               "followed by a name")
        if len(self.terminals) != _TERMINALS[self.kind]:
            raise NetlistError(f"{self.label}: {self.kind.value} needs "
                               f"{_TERMINALS[self.kind]} terminals")
        if self.kind is Kind.RESISTOR and not self.value > 0:
            raise NetlistError(f"{self.label}: resistance must be positive")
        if self.kind is Kind.CAPACITOR and not self.value >= 0:
            raise NetlistError(f"{self.label}: capacitance must be nonnegative")
        if self.kind in (Kind.CNTFET_N, Kind.CNTFET_P):
            want = Polarity.N if self.kind is Kind.CNTFET_N else Polarity.P
            if not isinstance(self.value, DeviceInstance) or self.value.polarity is not want:
                raise NetlistError(f"{self.label}: device polarity does not match kind")

    @property
    def is_device(self) -> bool:
        return self.kind in (Kind.CNTFET_N, Kind.CNTFET_P)


@dataclass(frozen=True)
class Circuit:
    """Node-indexed element list.  Node 0 is ground."""

    elements: tuple[Element, ...] = ()
    node_names: tuple[str, ...] = ("0",)
    ports: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.node_names or self.node_names[0] != "0":
            raise NetlistError("node 0 must be ground")
        if len(set(self.node_names)) != len(self.node_names):
            raise NetlistError("node names must be unique")
        labels = [e.label for e in self.elements]
        dup = {x for x in labels if labels.count(x) > 1}
        if dup:
            raise NetlistError(f"duplicate element labels: {sorted(dup)}")
        n = len(self.node_names)
        for e in self.elements:
            if any(not 0 <= t < n for t in e.terminals):
                raise NetlistError(f"{e.label}: terminal out of range")
        for name, node in self.ports.items():
            if not 0 <= node < n:
                raise NetlistError(f"port {name}: node out of range")

    @property
    def node_count(self) -> int:
        return len(self.node_names)

    def node(self, name: str) -> int:
        """Index of a port or node name."""
        if name in self.ports:
            return self.ports[name]
        if name in GROUND_NAMES:
            return 0
        try:
            return self.node_names.index(name)
        except ValueError:
            raise KeyError(f"no node or port named {name!r}") from None

    def element(self, label: str) -> Element:
        for e in self.elements:
            if e.label == label:
                return e
        raise KeyError(label)

    @property
    def devices(self) -> list[Element]:
        return [e for e in self.elements if e.is_device]

    @property
    def sources(self) -> list[Element]:
        return [e for e in self.elements if e.kind is Kind.VSOURCE]

    def floating_nodes(self) -> list[str]:
        """Names of nodes with no element path (any terminal) to ground."""
        parent = list(range(self.node_count))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in self.elements:
            first = find(e.terminals[0])
            for t in e.terminals[1:]:
                parent[find(t)] = first
        ground = find(0)
        return [self.node_names[i] for i in range(1, self.node_count) if find(i) != ground]

    # -- building -------------------------------------------------------

    def with_node(self, name: str) -> tuple["Circuit", int]:
        if name in GROUND_NAMES:
            return self, 0
        if name in self.node_names:
            return self, self.node_names.index(name)
        c = Circuit(self.elements, self.node_names + (name,), dict(self.ports))
        return c, len(self.node_names)

    def add(self, kind: Kind, label: str, nodes: Iterable[str], value) -> "Circuit":
        c = self
        idx = []
        for name in nodes:
            c, i = c.with_node(c._resolve(name))
            idx.append(i)
        return Circuit(c.elements + (Element(kind, tuple(idx), value, label),),
                       c.node_names, dict(c.ports))

    def _resolve(self, name: str) -> str:
        # ports may alias node names
        if name in self.ports:
            return self.node_names[self.ports[name]]
        return name

    def add_port(self, name: str, node: str) -> "Circuit":
        c, i = self.with_node(self._resolve(node))
        ports = dict(c.ports)
        ports[name] = i
        return Circuit(c.elements, c.node_names, ports)

    def add_source(self, label: str, plus: str, minus: str, waveform: Waveform) -> "Circuit":
        return self.add(Kind.VSOURCE, label, (plus, minus), waveform)

    def without(self, labels: Iterable[str]) -> "Circuit":
        drop = set(labels)
        return Circuit(tuple(e for e in self.elements if e.label not in drop),
                       self.node_names, dict(self.ports))

    def replace_element(self, label: str, new: Element) -> "Circuit":
        return Circuit(tuple(new if e.label == label else e for e in self.elements),
                       self.node_names, dict(self.ports))

    def structure(self):
        """Canonical, node-numbering-independent description for equality tests."""
        name = self.node_names
        elems = []
        for e in self.elements:
            value = e.value
            if isinstance(value, DeviceInstance):
                value = (value.polarity.value, value.tubes, str(value.tube_chirality))
            elems.append((e.label, e.kind.value, tuple(name[t] for t in e.terminals), value))
        ports = sorted((k, name[v]) for k, v in self.ports.items())
        return sorted(elems, key=lambda x: x[0]), ports


# ---------------------------------------------------------------------------
# text format

_SUFFIX = {"k": 1e3, "m": 1e-3, "u": 1e-6, "n": 1e-9, "p": 1e-12, "f": 1e-15}
_NUMBER = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)([kmunpfKMUNPF]?)$")


def parse_value(text: str) -> float:
    m = _NUMBER.match(text)
    if not m:
        raise ValueError(f"bad number {text!r}")
    return float(m.group(1)) * _SUFFIX.get(m.group(2).lower(), 1.0)


def _tokens(line: str):
    """Split on whitespace, yielding (token, 1-based column); parens are separate tokens."""
    for m in re.finditer(r"[()]|[^\s()]+", line):
        yield m.group(0), m.start() + 1


def parse_netlist(text: str, params: CntfetParams = DEFAULT_PARAMS) -> Circuit:
    circuit = Circuit()
    pending_ports = []
    used_nodes = {"0"}
    seen_end = False
    last_line = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        last_line = lineno
        toks = list(_tokens(raw))
        if not toks or toks[0][0].startswith("*"):
            continue
        head, col = toks[0]
        low = head.lower()
        if low == ".end":
            if len(toks) > 1:
                raise NetlistError("unexpected text after .end", lineno, toks[1][1])
            seen_end = True
            break
        if low == ".port":
            if len(toks) != 3:
                raise NetlistError(".port takes <name> <node>", lineno, col)
            pending_ports.append((toks[1][0], toks[2][0], lineno, toks[2][1]))
            continue
        if head.startswith("."):
            raise NetlistError(f"unknown directive {head!r}", lineno, col)
        if any(e.label == head for e in circuit.elements):
            raise NetlistError(f"duplicate label {head!r}", lineno, col)
        kind = head[0].upper()
        if len(head) < 2:
            raise NetlistError(f"element label {head!r} needs a name after the kind letter", lineno, col)
        try:
            if kind == "M":
                kind_e, nodes, value = _parse_device(toks, params)
            elif kind in "RC":
                if len(toks) != 4:
                    raise NetlistError(f"{head}: expected <a> <b> <value>", lineno, col)
                kind_e = Kind.RESISTOR if kind == "R" else Kind.CAPACITOR
                nodes = [t for t, _ in toks[1:3]]
                try:
                    value = parse_value(toks[3][0])
                except ValueError as exc:
                    raise NetlistError(str(exc), lineno, toks[3][1]) from None
            elif kind == "V":
                kind_e, nodes, value = Kind.VSOURCE, [t for t, _ in toks[1:3]], _parse_source(toks)
            else:
                raise NetlistError(f"unknown element kind {head[0]!r}", lineno, col)
        except _FieldError as exc:
            raise NetlistError(str(exc), lineno, exc.column) from None
        for name in nodes:
            if name.startswith("."):
                raise NetlistError(f"bad node name {name!r}", lineno, col)
        used_nodes.update("0" if n in GROUND_NAMES else n for n in nodes)
        try:
            circuit = circuit.add(kind_e, head, nodes, value)
        except (NetlistError, DeviceError) as exc:
            raise NetlistError(str(exc), lineno, col) from None
    if not seen_end:
        raise NetlistError("missing .end", last_line + 1, 1)
    for name, node, lineno, col in pending_ports:
        node_name = "0" if node in GROUND_NAMES else node
        if node_name not in used_nodes:
            raise NetlistError(f"port {name!r} refers to undefined node {node!r}", lineno, col)
        if name in circuit.ports:
            raise NetlistError(f"duplicate port {name!r}", lineno, col)
        circuit = circuit.add_port(name, node_name)
    return circuit


class _FieldError(Exception):
    def __init__(self, message, column):
        super().__init__(message)
        self.column = column


def _parse_device(toks, params):
    head, col = toks[0]
    if len(toks) < 6:
        raise _FieldError(f"{head}: expected <d> <g> <s> nch|pch tubes=<n>", col)
    nodes = [t for t, _ in toks[1:4]]
    pol_tok, pol_col = toks[4]
    try:
        polarity = Polarity(pol_tok.lower())
    except ValueError:
        raise _FieldError(f"{head}: polarity must be nch or pch, got {pol_tok!r}", pol_col) from None
    tubes = None
    chirality = None
    for tok, c in toks[5:]:
        key, _, value = tok.partition("=")
        key = key.lower()
        if key == "tubes":
            if not re.fullmatch(r"\d+", value) or int(value) < 1:
                raise _FieldError(f"{head}: tubes must be a positive integer", c)
            tubes = int(value)
        elif key == "chirality":
            try:
                chirality = Chirality.parse(value)
            except DeviceError as exc:
                raise _FieldError(f"{head}: {exc}", c) from None
        else:
            raise _FieldError(f"{head}: unknown device option {tok!r}", c)
    if tubes is None:
        raise _FieldError(f"{head}: missing tubes=<n>", col)
    kind = Kind.CNTFET_N if polarity is Polarity.N else Kind.CNTFET_P
    if chirality == params.chirality:
        chirality = None
    return kind, nodes, DeviceInstance(polarity, tubes, params, chirality)


def _parse_source(toks):
    head, col = toks[0]
    if len(toks) < 5:
        raise _FieldError(f"{head}: expected <a> <b> dc <v> | pwl (...)", col)
    form, fcol = toks[3]
    form = form.lower()
    if form == "dc":
        if len(toks) != 5:
            raise _FieldError(f"{head}: dc takes one value", fcol)
        try:
            return Dc(parse_value(toks[4][0]))
        except ValueError as exc:
            raise _FieldError(str(exc), toks[4][1]) from None
    if form == "pwl":
        rest = toks[4:]
        if len(rest) < 2 or rest[0][0] != "(" or rest[-1][0] != ")":
            raise _FieldError(f"{head}: pwl values must be in parentheses", fcol)
        body = rest[1:-1]
        if not body or len(body) % 2:
            raise _FieldError(f"{head}: pwl needs time/value pairs", fcol)
        try:
            vals = [parse_value(t) for t, _ in body]
        except ValueError as exc:
            raise _FieldError(str(exc), fcol) from None
        try:
            return Pwl(tuple(zip(vals[0::2], vals[1::2])))
        except ValueError as exc:
            raise _FieldError(f"{head}: {exc}", fcol) from None
    raise _FieldError(f"{head}: source form must be dc or pwl", fcol)


def _num(x: float) -> str:
    return repr(float(x))


def serialize_netlist(c: Circuit) -> str:
    name = c.node_names
    lines = []
    for e in c.elements:
        nodes = " ".join(name[t] for t in e.terminals)
        if e.is_device:
            dev: DeviceInstance = e.value
            line = f"{e.label} {nodes} {dev.polarity.value} tubes={dev.tubes}"
            if dev.chirality is not None and dev.chirality != dev.params.chirality:
                line += f" chirality={dev.chirality}"
        elif e.kind is Kind.VSOURCE:
            if isinstance(e.value, Dc):
                line = f"{e.label} {nodes} dc {_num(e.value.value)}"
            else:
                pts = " ".join(f"{_num(t)} {_num(v)}" for t, v in e.value.points)
                line = f"{e.label} {nodes} pwl ({pts})"
        else:
            line = f"{e.label} {nodes} {_num(e.value)}"
        lines.append(line)
    for port, node in sorted(c.ports.items()):
        lines.append(f".port {port} {name[node]}")
    lines.append(".end")
    return "\n".join(lines) + "\n"
