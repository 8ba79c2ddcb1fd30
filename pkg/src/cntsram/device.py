"""CNTFET geometry, threshold voltage and a unified compact I-V model.

The drain current of one tube is a forward-minus-reverse charge-sheet form::

    F(v) = n*vT * log(1 + exp((v - V_TH) / (n*vT)))
    I    = I_scale * (F(v_gs) - F(v_gs - v_ds)) * (1 + lambda*|v_ds|~) + g_floor * v_ds

Below threshold this reduces to ``exp((v_gs - V_TH)/(n*vT)) * (1 - exp(-v_ds/(n*vT)))``;
above threshold it is linear in overdrive and saturates once ``v_gs - v_ds``
drops below V_TH.  ``|v_ds|~`` is a smoothed absolute value, so channel-length
modulation acts the same way whichever terminal is the electrical source.
``I_scale`` is chosen so a single tube carries exactly
``i_on_per_tube`` at ``v_gs = v_ds = vdd_ref``; ``g_floor = i_off_floor_per_tube
/ vdd_ref`` is the cutoff conductance floor.  P-type devices are the point
mirror of N-type devices with the same threshold.

Only channel length, chirality, flatband voltages and the three current knobs
enter the I-V.  The remaining process fields (E_fo, T_ox, pitch, mean free
paths, work functions) are carried for reporting and config round-trips.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

ELECTRON_CHARGE = 1.602176634e-19

# drain-source channel-length-modulation coefficient (1/V)
LAMBDA = 0.05
# rounding of |v_ds| in the channel-length-modulation factor (V)
CLM_SMOOTHING = 0.01


class DeviceError(ValueError):
    pass


@dataclass(frozen=True)
class PhysicalConstants:
    a: float = 0.249e-9          # CNT atomic distance (m)
    v_pi: float = 3.033          # pi-pi bond energy (eV)
    q: float = ELECTRON_CHARGE   # C
    vt: float = 0.02585          # thermal voltage at 300 K (V)

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise DeviceError(f"{f.name} must be positive")


DEFAULT_CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class Chirality:
    m: int
    n: int

    def __post_init__(self):
        if self.m < 0 or self.n < 0:
            raise DeviceError(f"chirality indices must be nonnegative, got ({self.m},{self.n})")
        if self.m == 0 and self.n == 0:
            raise DeviceError("chirality (0,0) is not a tube")

    @classmethod
    def parse(cls, text: str) -> "Chirality":
        try:
            m, n = (int(p) for p in text.replace("(", "").replace(")", "").split(","))
        except ValueError:
            raise DeviceError(f"bad chirality {text!r}, expected m,n") from None
        return cls(m, n)

    def __str__(self):
        return f"{self.m},{self.n}"


@dataclass(frozen=True)
class CntfetParams:
    """Process and model parameters, SI units throughout."""

    l_channel: float = 32e-9
    l_sd: float = 32e-9
    e_fo: float = 0.6            # eV
    t_ox: float = 4e-9
    pitch: float = 10e-9
    v_fbn: float = 0.0
    v_fbp: float = 0.0
    l_ceff: float = 200e-9
    mfp_doped: float = 15e-9
    phi_contact: float = 4.6     # eV
    phi_cnt: float = 4.5         # eV
    chirality: Chirality = field(default_factory=lambda: Chirality(19, 0))
    subthreshold_slope_factor: float = 1.2
    i_on_per_tube: float = 20e-6
    i_off_floor_per_tube: float = 1e-12
    vdd_ref: float = 0.9         # bias at which i_on_per_tube is defined

    def __post_init__(self):
        for name in ("l_channel", "l_sd", "e_fo", "t_ox", "pitch", "l_ceff",
                     "mfp_doped", "phi_contact", "phi_cnt", "vdd_ref"):
            if not getattr(self, name) > 0:
                raise DeviceError(f"{name} must be positive")
        if self.subthreshold_slope_factor < 1:
            raise DeviceError("subthreshold_slope_factor must be >= 1")
        if not self.i_on_per_tube > self.i_off_floor_per_tube > 0:
            raise DeviceError("need i_on_per_tube > i_off_floor_per_tube > 0")


DEFAULT_PARAMS = CntfetParams()


class Polarity(enum.Enum):
    N = "nch"
    P = "pch"


@dataclass(frozen=True)
class DeviceInstance:
    polarity: Polarity
    tubes: int
    params: CntfetParams = DEFAULT_PARAMS
    chirality: Chirality | None = None

    def __post_init__(self):
        if not isinstance(self.tubes, (int, np.integer)) or self.tubes < 1:
            raise DeviceError(f"tube count must be an integer >= 1, got {self.tubes!r}")

    @property
    def tube_chirality(self) -> Chirality:
        return self.chirality or self.params.chirality

    @property
    def vth(self) -> float:
        vth = threshold_voltage(cnt_diameter(self.tube_chirality))
        fb = self.params.v_fbn if self.polarity is Polarity.N else self.params.v_fbp
        return vth + fb

    def with_tubes(self, tubes: int) -> "DeviceInstance":
        return replace(self, tubes=tubes)


def cnt_diameter(c: Chirality, k: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Tube diameter in metres for chirality (m, n)."""
    if c.m == 0 and c.n == 0:
        raise DeviceError("chirality (0,0) is not a tube")
    return k.a / math.pi * math.sqrt(c.m ** 2 + c.n ** 2 + c.m * c.n)


def threshold_voltage(d: float, k: PhysicalConstants = DEFAULT_CONSTANTS) -> float:
    """Threshold voltage (V) of a tube of diameter ``d`` metres."""
    if not d > 0:
        raise DeviceError(f"diameter must be positive, got {d}")
    v_pi_joule = k.v_pi * k.q
    return k.a * v_pi_joule / (math.sqrt(3) * k.q * d)


# ---------------------------------------------------------------------------
# I-V core, vectorised over devices.  All arrays are per-tube N-type quantities.


def _softplus(v, vth, nvt):
    return nvt * np.logaddexp(0.0, (v - vth) / nvt)


def _smooth_abs(v):
    """sqrt(v^2 + d^2) - d and its derivative."""
    r = np.sqrt(v * v + CLM_SMOOTHING ** 2)
    return r - CLM_SMOOTHING, v / r


def _model_scales(params: CntfetParams, vth, nvt):
    vdd = params.vdd_ref
    drive = _softplus(vdd, vth, nvt) - _softplus(0.0, vth, nvt)
    clm = 1 + LAMBDA * _smooth_abs(vdd)[0]
    i_scale = (params.i_on_per_tube - params.i_off_floor_per_tube) / (drive * clm)
    g_floor = params.i_off_floor_per_tube / vdd
    return i_scale, g_floor


def nmos_core(vgs, vds, vth, nvt, i_scale, g_floor):
    """Per-tube N-type current and its partials (I, dI/dvgs, dI/dvds)."""
    vgd = vgs - vds
    xg = (vgs - vth) / nvt
    xd = (vgd - vth) / nvt
    sd = expit(xd)
    # F(vgs) - F(vgd) written without cancellation; the plain difference only
    # takes over where expm1 would overflow
    u = vds / nvt
    big = np.abs(u) > 500
    ua = np.where(big, 0.0, np.abs(u))
    s_low = np.where(u >= 0, sd, expit(xg))
    exact = np.sign(u) * nvt * np.log1p(s_low * np.expm1(ua))
    core = np.where(big, _softplus(vgs, vth, nvt) - _softplus(vgd, vth, nvt), exact)
    # expit(xg) - expit(xd), via the complements when both are near 1
    dsig = np.where(xg + xd > 0, expit(-xd) - expit(-xg), expit(xg) - sd)
    mag, dmag = _smooth_abs(vds)
    clm = 1 + LAMBDA * mag
    i = i_scale * core * clm + g_floor * vds
    gm = i_scale * dsig * clm
    gds = i_scale * (sd * clm + LAMBDA * core * dmag) + g_floor
    return i, gm, gds


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise DeviceError("device bias must be finite")


def _evaluate(dev: DeviceInstance, v_gs, v_ds):
    _check_finite(v_gs, v_ds)
    p = dev.params
    nvt = p.subthreshold_slope_factor * DEFAULT_CONSTANTS.vt
    vth = dev.vth
    i_scale, g_floor = _model_scales(p, vth, nvt)
    sign = 1.0 if dev.polarity is Polarity.N else -1.0
    i, gm, gds = nmos_core(sign * np.asarray(v_gs, float), sign * np.asarray(v_ds, float),
                           vth, nvt, i_scale, g_floor)
    return sign * i * dev.tubes, gm * dev.tubes, gds * dev.tubes


def drain_current(dev: DeviceInstance, v_gs, v_ds):
    """Signed current entering the drain terminal (A)."""
    i, _, _ = _evaluate(dev, v_gs, v_ds)
    return float(i) if np.ndim(i) == 0 else i


def conductances(dev: DeviceInstance, v_gs, v_ds):
    """Analytic (dI/dv_gs, dI/dv_ds) of :func:`drain_current`."""
    _, gm, gds = _evaluate(dev, v_gs, v_ds)
    if np.ndim(gm) == 0:
        return float(gm), float(gds)
    return gm, gds


def conductance_floor(dev: DeviceInstance) -> float:
    """Drain-source conductance the model bottoms out at in deep cutoff."""
    return dev.tubes * dev.params.i_off_floor_per_tube / dev.params.vdd_ref


# ---------------------------------------------------------------------------
# key=value parameter files

# config key -> (field name, SI divisor)
PARAM_KEYS = {
    "l_channel_nm": ("l_channel", 1e9),
    "l_sd_nm": ("l_sd", 1e9),
    "e_fo_ev": ("e_fo", 1.0),
    "t_ox_nm": ("t_ox", 1e9),
    "pitch_nm": ("pitch", 1e9),
    "v_fbn": ("v_fbn", 1.0),
    "v_fbp": ("v_fbp", 1.0),
    "l_ceff_nm": ("l_ceff", 1e9),
    "mfp_doped_nm": ("mfp_doped", 1e9),
    "phi_contact_ev": ("phi_contact", 1.0),
    "phi_cnt_ev": ("phi_cnt", 1.0),
    "chirality": ("chirality", None),
    "n_slope": ("subthreshold_slope_factor", 1.0),
    "i_on_per_tube_ua": ("i_on_per_tube", 1e6),
    "i_off_floor_per_tube_pa": ("i_off_floor_per_tube", 1e12),
    "vdd_ref": ("vdd_ref", 1.0),
}


def read_key_values(path: str | Path) -> dict[str, str]:
    """Parse a ``key=value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lower()] = value
    return out


def params_from_mapping(values: dict[str, str], base: CntfetParams = DEFAULT_PARAMS) -> CntfetParams:
    """Build parameters from config keys; keys not in PARAM_KEYS are ignored."""
    updates = {}
    for key, value in values.items():
        if key not in PARAM_KEYS:
            continue
        name, scale = PARAM_KEYS[key]
        if scale is None:
            updates[name] = Chirality.parse(value)
        else:
            updates[name] = float(value) / scale
    return replace(base, **updates)


def load_params(path: str | Path) -> CntfetParams:
    return params_from_mapping(read_key_values(path))


def format_params(p: CntfetParams) -> str:
    lines = []
    for key, (name, scale) in PARAM_KEYS.items():
        value = getattr(p, name)
        lines.append(f"{key}={value if scale is None else repr(round(value * scale, 12))}")
    return "\n".join(lines) + "\n"
