"""Transistor-level simulation of carbon-nanotube FET SRAM cells."""

from .analysis import (EnergyReport, Operation, ProtocolConfig, StimulusSequence, build_protocol,
                       butterfly, measure_energy, run_testbench, write_margin)
from .cells import CellKind, build_cell, default_sizing
from .device import (Chirality, CntfetParams, DeviceInstance, PhysicalConstants, Polarity,
                     cnt_diameter, conductances, drain_current, threshold_voltage)
from .netlist import Circuit, parse_netlist, serialize_netlist
from .snm import ButterflyCurve, Mode, SnmReport, snm_max_square
from .solver import SolverOptions, dc_operating_point, dc_sweep, stamp, transient

__version__ = "0.1.0"
