"""The seven CNTFET SRAM cells, 4T through 10T, as port-named circuits.

Tube counts follow the published sizing table.  Connectivity is rebuilt from
the textual description of each cell; choices the prose leaves open are noted
on the individual builders.  Every cell gets a small shunt capacitance on each
internal node and a bit-line capacitance on each bit-line port.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .device import CntfetParams, DEFAULT_PARAMS, DeviceInstance, Polarity
from .netlist import Circuit, Kind

N, P = Polarity.N, Polarity.P


class CellKind(enum.Enum):
    SRAM4T = "4t"
    SRAM5T = "5t"
    SRAM6T = "6t"
    SRAM7T = "7t"
    SRAM8T = "8t"
    SRAM9T = "9t"
    SRAM10T = "10t"

    @property
    def transistors(self) -> int:
        return int(self.value[:-1])

    @classmethod
    def parse(cls, text: str) -> "CellKind":
        t = text.lower().replace("sram", "").strip()
        if not t.endswith("t"):
            t += "t"
        return cls(t)


_SIZING = {
    CellKind.SRAM4T: {"M1": 3, "M2": 3, "M3": 5, "M4": 5},
    CellKind.SRAM5T: {"M1": 4, "M4": 4, "M2": 2, "M3": 2, "M5": 5},
    CellKind.SRAM6T: {"M1": 3, "M2": 3, "M3": 3, "M4": 3, "M5": 5, "M6": 5},
    CellKind.SRAM7T: {"M1": 3, "M2": 3, "M5": 3, "M4": 1, "M7": 1, "M3": 8, "M6": 6},
    CellKind.SRAM8T: {"L1": 1, "L2": 1, "E1": 1, "D1": 4, "D2": 4, "A1": 6, "A2": 6, "E3": 6},
    CellKind.SRAM9T: {"E1": 4, "E3": 4, "E4": 4, "A2": 4, "D1": 1, "D2": 1, "L1": 1, "L2": 1,
                      "E2": 7},
    CellKind.SRAM10T: {"AL1": 2, "AL2": 2, "AR1": 2, "AR2": 2, "L1": 3, "L2": 3, "D1": 5,
                       "D2": 5, "NR": 8, "NL": 8},
}


def default_sizing(kind: CellKind) -> dict[str, int]:
    """Published tube count per transistor label."""
    return dict(_SIZING[kind])


# (label, polarity, drain, gate, source) per cell
_TOPOLOGY = {
    # M1/M2 are the p-type pair (3 tubes), M3/M4 the n-type pair (5 tubes).
    # Q is held high only by M1's subthreshold conduction from BL.
    CellKind.SRAM4T: [
        ("M1", P, "Q", "WL2", "BL"),      # p access
        ("M2", P, "QB", "Q", "VDD"),      # load
        ("M3", N, "Q", "QB", "0"),        # driver
        ("M4", N, "BLB", "WL1", "QB"),    # n access
    ],
    # Asymmetric inverters so a single bit line can write both values.
    CellKind.SRAM5T: [
        ("M1", N, "QB", "Q", "0"),
        ("M2", P, "QB", "Q", "VDD"),
        ("M3", N, "Q", "QB", "0"),
        ("M4", P, "Q", "QB", "VDD"),
        ("M5", N, "BL", "WL", "Q"),
    ],
    # INV1 = M1/M2 drives QB, INV2 = M3/M4 drives Q; M5 on BL, M6 on BLB.
    CellKind.SRAM6T: [
        ("M1", N, "QB", "Q", "0"),
        ("M2", P, "QB", "Q", "VDD"),
        ("M3", N, "Q", "QB", "0"),
        ("M4", P, "Q", "QB", "VDD"),
        ("M5", N, "BL", "WL", "Q"),
        ("M6", N, "BLB", "WL", "QB"),
    ],
    # M7 closes the loop from Q back to INV1's input node Q1.
    CellKind.SRAM7T: [
        ("M1", N, "QB", "Q1", "0"),
        ("M2", P, "QB", "Q1", "VDD"),
        ("M3", N, "Q", "QB", "0"),
        ("M4", P, "Q", "QB", "VDD"),
        ("M5", N, "WriteBit", "WriteSelect", "Q1"),
        ("M6", N, "ReadBit", "ReadSelect", "Q"),
        ("M7", N, "Q", "WriteBar", "Q1"),
    ],
    # A1/A2 write access, E3 (RWL) over E1 (gate Q) read buffer.
    CellKind.SRAM8T: [
        ("L1", P, "Q", "QB", "VDD"),
        ("D1", N, "Q", "QB", "0"),
        ("L2", P, "QB", "Q", "VDD"),
        ("D2", N, "QB", "Q", "0"),
        ("A1", N, "WBL", "WWL", "Q"),
        ("A2", N, "WBLB", "WWL", "QB"),
        ("E3", N, "RBL", "RWL", "RX"),
        ("E1", N, "RX", "Q", "0"),
    ],
    # Single-ended write through A2 with E1 in parallel; read stack
    # E3 (RWL) / E2 (gate QB) / E4 (RWL) from RBL to ground.
    CellKind.SRAM9T: [
        ("L1", P, "Q", "QB", "VDD"),
        ("D1", N, "Q", "QB", "0"),
        ("L2", P, "QB", "Q", "VDD"),
        ("D2", N, "QB", "Q", "0"),
        ("A2", N, "WBL", "WWL", "Q"),
        ("E1", N, "WBL", "WWL", "Q"),
        ("E3", N, "RBL", "RWL", "RX"),
        ("E2", N, "RX", "QB", "RY"),
        ("E4", N, "RY", "RWL", "0"),
    ],
    # Stacked access: outer device on WL, inner on WWL.  NL/NR discharge the
    # mid-stack node to Vgnd under control of the storage node on their side.
    CellKind.SRAM10T: [
        ("L1", P, "Q", "QB", "VDD"),
        ("D1", N, "Q", "QB", "0"),
        ("L2", P, "QB", "Q", "VDD"),
        ("D2", N, "QB", "Q", "0"),
        ("AL1", N, "BL", "WL", "XL"),
        ("AL2", N, "XL", "WWL", "Q"),
        ("AR1", N, "BLB", "WL", "XR"),
        ("AR2", N, "XR", "WWL", "QB"),
        ("NL", N, "XL", "Q", "Vgnd"),
        ("NR", N, "XR", "QB", "Vgnd"),
    ],
}

PORTS = {
    CellKind.SRAM4T: ("BL", "BLB", "WL1", "WL2", "Q", "QB", "VDD"),
    CellKind.SRAM5T: ("BL", "WL", "Q", "QB", "VDD"),
    CellKind.SRAM6T: ("BL", "BLB", "WL", "Q", "QB", "VDD"),
    CellKind.SRAM7T: ("WriteBit", "ReadBit", "WriteSelect", "ReadSelect", "WriteBar", "Q", "QB",
                      "VDD"),
    CellKind.SRAM8T: ("WBL", "WBLB", "WWL", "RBL", "RWL", "Q", "QB", "VDD"),
    CellKind.SRAM9T: ("WBL", "RBL", "WWL", "RWL", "Q", "QB", "VDD"),
    CellKind.SRAM10T: ("BL", "BLB", "WL", "WWL", "Vgnd", "Q", "QB", "VDD"),
}

BITLINES = {
    CellKind.SRAM4T: ("BL", "BLB"),
    CellKind.SRAM5T: ("BL",),
    CellKind.SRAM6T: ("BL", "BLB"),
    CellKind.SRAM7T: ("WriteBit", "ReadBit"),
    CellKind.SRAM8T: ("WBL", "WBLB", "RBL"),
    CellKind.SRAM9T: ("WBL", "RBL"),
    CellKind.SRAM10T: ("BL", "BLB"),
}

# devices whose removal leaves the write core (buffered-read cells)
READ_STACK = {
    CellKind.SRAM8T: ("E3", "E1"),
    CellKind.SRAM9T: ("E3", "E2", "E4"),
}

# Where the feedback loop is cut for a voltage-transfer sweep.  By default the
# gates driven by a storage node are moved onto the sweep source; in the 7T
# cell Q reaches INV1 through M7's channel, so that terminal is moved instead.
LOOP_CUTS = {
    CellKind.SRAM7T: {"Q": (("M7", 0),)},
}

# read lines and how they respond to the stored bit:
#   ("single", line, stored value that discharges it)
#   ("diff", line low when Q=0, line low when Q=1)
#   ("level", line) - rises for a stored 1, falls for a stored 0
READ_SENSE = {
    CellKind.SRAM4T: ("single", "BL", 0),
    CellKind.SRAM5T: ("level", "BL"),
    CellKind.SRAM6T: ("diff", "BL", "BLB"),
    CellKind.SRAM7T: ("single", "ReadBit", 0),
    CellKind.SRAM8T: ("single", "RBL", 1),
    CellKind.SRAM9T: ("single", "RBL", 0),
    CellKind.SRAM10T: ("diff", "BLB", "BL"),
}


def device_label(name: str) -> str:
    """Netlist label for a sizing label (``L1`` -> ``ML1``, ``M3`` stays)."""
    return name if name.startswith("M") else "M" + name


@dataclass(frozen=True)
class CellOptions:
    c_storage: float = 0.1e-15
    c_bitline: float = 10e-15


class CellError(ValueError):
    pass


def build_cell(kind: CellKind, sizing: dict[str, int] | None = None,
               params: CntfetParams = DEFAULT_PARAMS,
               options: CellOptions = CellOptions()) -> Circuit:
    if not isinstance(kind, CellKind):
        raise CellError(f"unknown cell kind {kind!r}")
    sizing = default_sizing(kind) if sizing is None else sizing
    topology = _TOPOLOGY[kind]
    missing = [lbl for lbl, *_ in topology if lbl not in sizing]
    if missing:
        raise CellError(f"{kind.value}: sizing lacks {missing}")
    for lbl, tubes in sizing.items():
        if tubes < 1:
            raise CellError(f"{kind.value}: {lbl} needs at least one tube")

    c = Circuit()
    for port in PORTS[kind]:
        c = c.add_port(port, port)
    for lbl, pol, d, g, s in topology:
        dev = DeviceInstance(pol, int(sizing[lbl]), params)
        c = c.add(Kind.CNTFET_N if pol is N else Kind.CNTFET_P, device_label(lbl), (d, g, s), dev)
    ports = set(PORTS[kind])
    for name in c.node_names[1:]:
        if name not in ports:
            c = c.add(Kind.CAPACITOR, f"C{name}", (name, "0"), options.c_storage)
    for name in ("Q", "QB"):
        c = c.add(Kind.CAPACITOR, f"C{name}", (name, "0"), options.c_storage)
    for bl in BITLINES[kind]:
        c = c.add(Kind.CAPACITOR, f"C{bl}", (bl, "0"), options.c_bitline)
    return c
