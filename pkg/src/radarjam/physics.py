"""Probability-of-detection utility for the radar/jammer game.

Every subpulse is a detection cell with its own carrier.  The radar equation
gives the per-cell SNR, the one-way equation gives the jammer-to-noise ratio
inside the subpulse band, and the cells are summed into one effective SNR
that is pushed through the non-fluctuating (Marcum Q1) detection curve.
"""

from __future__ import annotations

import dataclasses
import enum
import math

import numpy as np

BOLTZMANN = 1.380649e-23

# Absolute truncation tolerance for the Poisson-mixture series in marcum_q1.
_Q1_TAIL_TOL = 1e-15


class JamTag(enum.IntEnum):
    """Jamming power density seen by one subpulse."""

    NONE = 0
    SPOT = 1
    BARRAGE = 2


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclasses.dataclass(frozen=True)
class PhysicsParams:
    """System parameters of the radar and the self-protection jammer.

    Gains are in dB, everything else in SI units.  ``noise_bandwidth`` is the
    barrage spread; ``spot_bandwidth`` is the narrowband noise width.
    """

    rcs_per_freq: tuple[float, ...] = (15.0, 3.0, 1.0)
    pfa: float = 1e-4
    subpulse_bandwidth: float = 2e6
    noise_bandwidth: float = 5e8
    subpulse_power: float = 3e4
    radar_gain: float = 30.0
    range: float = 1e5
    jammer_power: float = 10.0
    jammer_gain: float = 6.0
    wavelength: float = 0.03
    system_temperature: float = 290.0
    spot_bandwidth: float = 2e7

    def __post_init__(self):
        object.__setattr__(self, "rcs_per_freq", tuple(float(x) for x in self.rcs_per_freq))
        if not self.rcs_per_freq or any(not x > 0 for x in self.rcs_per_freq):
            raise ValueError("rcs_per_freq: every entry must be positive")
        if not 0.0 < self.pfa < 1.0:
            raise ValueError("pfa: must lie in (0, 1)")
        for name in (
            "subpulse_bandwidth",
            "noise_bandwidth",
            "subpulse_power",
            "range",
            "jammer_power",
            "wavelength",
            "system_temperature",
            "spot_bandwidth",
        ):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name}: must be positive, got {value!r}")
        for name in ("radar_gain", "jammer_gain"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name}: must be finite")
        if not self.noise_bandwidth >= self.spot_bandwidth >= self.subpulse_bandwidth:
            raise ValueError(
                "spot_bandwidth: need noise_bandwidth >= spot_bandwidth >= subpulse_bandwidth"
            )

    @property
    def num_frequencies(self) -> int:
        return len(self.rcs_per_freq)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["rcs_per_freq"] = list(self.rcs_per_freq)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PhysicsParams":
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown physics field(s): {sorted(unknown)}")
        return cls(**data)


def _thermal_noise_density(params: PhysicsParams) -> float:
    return BOLTZMANN * params.system_temperature


def snr_per_unit_rcs(params: PhysicsParams) -> float:
    """Radar-equation SNR of a 1 m^2 target in one subpulse."""
    gain = db_to_linear(params.radar_gain)
    num = params.subpulse_power * gain**2 * params.wavelength**2
    den = (4 * math.pi) ** 3 * params.range**4 * _thermal_noise_density(params) * params.subpulse_bandwidth
    return num / den


def subpulse_snr(freq: int, params: PhysicsParams) -> float:
    """Linear SNR of one unjammed subpulse transmitted on carrier ``freq``."""
    return snr_per_unit_rcs(params) * params.rcs_per_freq[freq]


def snr_table(params: PhysicsParams) -> np.ndarray:
    return snr_per_unit_rcs(params) * np.asarray(params.rcs_per_freq, dtype=float)


def barrage_to_spot_density(params: PhysicsParams) -> float:
    return params.spot_bandwidth / params.noise_bandwidth


def jam_noise_ratio(tag: JamTag | int, params: PhysicsParams) -> float:
    """Jammer-to-noise power ratio inside the subpulse band.

    The jammer sits on the target, so the radar receives it through its main
    lobe with the one-way equation.  Power is spread evenly over the spot or
    barrage bandwidth; the ratio to thermal noise does not depend on the
    subpulse bandwidth because both scale with it.
    """
    tag = JamTag(tag)
    if tag is JamTag.NONE:
        return 0.0
    received = (
        params.jammer_power
        * db_to_linear(params.jammer_gain)
        * db_to_linear(params.radar_gain)
        * params.wavelength**2
        / ((4 * math.pi) ** 2 * params.range**2)
    )
    spot = received / params.spot_bandwidth / _thermal_noise_density(params)
    if tag is JamTag.SPOT:
        return spot
    return spot * barrage_to_spot_density(params)


def jam_table(params: PhysicsParams) -> np.ndarray:
    """J/N indexed by JamTag."""
    return np.array([jam_noise_ratio(t, params) for t in JamTag])


def marcum_q1(a, b):
    """First-order Marcum Q function, elementwise over broadcast ``a`` and ``b``.

    Uses the identity Q1(a, b) = P(M <= N) for independent Poisson variables
    N ~ Pois(a^2/2) and M ~ Pois(b^2/2), i.e.

        Q1(a, b) = sum_n  Pois(n; a^2/2) * PoisCDF(n; b^2/2).

    All terms are nonnegative and at most one, so stopping at index n0 > a^2/2
    leaves an error below Pois(n0; a^2/2) * r / (1 - r) with r = (a^2/2)/(n0+1)
    (the pmf decays at least geometrically past its mode).  Summation stops
    once that bound is under 1e-15 for every element.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("marcum_q1: arguments must be nonnegative")
    a, b = np.broadcast_arrays(a, b)
    lam_n = 0.5 * a * a
    lam_m = 0.5 * b * b
    log_lam_n = np.log(np.where(lam_n > 0, lam_n, 1.0))
    log_lam_m = np.log(np.where(lam_m > 0, lam_m, 1.0))

    total = np.zeros(a.shape)
    cdf_m = np.zeros(a.shape)
    log_pn = -lam_n  # log Pois(0; lam_n)
    log_pm = -lam_m
    n = 0
    while True:
        cdf_m = cdf_m + np.exp(log_pm)
        pn = np.exp(log_pn)
        total = total + pn * cdf_m
        if n + 1 > lam_n.max():
            r = lam_n / (n + 1)
            bound = pn * r / (1 - r)
            if bound.max() < _Q1_TAIL_TOL:
                break
        n += 1
        # zero-rate variables put all their mass on 0
        log_pn = np.where(lam_n > 0, log_pn + log_lam_n - math.log(n), -np.inf)
        log_pm = np.where(lam_m > 0, log_pm + log_lam_m - math.log(n), -np.inf)
    # Q1(a, 0) = 1 exactly; the series only gets there up to round-off
    out = np.where(b == 0, 1.0, np.clip(total, 0.0, 1.0))
    return float(out) if out.ndim == 0 else out


def detection_threshold(pfa: float) -> float:
    """Marcum-Q threshold b with Q1(0, b) = pfa."""
    return math.sqrt(-2.0 * math.log(pfa))


def detection_probability(snr_eff, pfa: float):
    """PD of a non-fluctuating target at effective (integrated) SNR."""
    snr_eff = np.asarray(snr_eff, dtype=float)
    b = detection_threshold(pfa)
    if snr_eff.size > 256:
        # terminal histories share few distinct SNR values
        uniq, inverse = np.unique(snr_eff, return_inverse=True)
        return marcum_q1(np.sqrt(2.0 * uniq), b)[inverse].reshape(snr_eff.shape)
    return marcum_q1(np.sqrt(2.0 * snr_eff), b)


def cell_sinr_table(params: PhysicsParams) -> np.ndarray:
    """SINR of one subpulse, shape (num_frequencies, len(JamTag))."""
    return snr_table(params)[:, None] / (1.0 + jam_table(params)[None, :])


def effective_snr(carriers, tags, params: PhysicsParams):
    """Sum of per-cell SINR over the trailing (pulse, subpulse) axes.

    ``carriers`` and ``tags`` are integer arrays of shape (..., M, K).  The sum
    is taken as counts of each (carrier, tag) cell type times that cell's SINR,
    so histories holding the same cells in a different order give bit-identical
    results.
    """
    carriers = np.asarray(carriers)
    tags = np.asarray(tags)
    table = cell_sinr_table(params)
    n_types = table.size
    cell = (carriers * len(JamTag) + tags).reshape(carriers.shape[:-2] + (-1,))
    lead = cell.shape[:-1]
    flat = cell.reshape(-1, cell.shape[-1])
    rows = np.arange(flat.shape[0])[:, None] * n_types
    counts = np.bincount((rows + flat).ravel(), minlength=flat.shape[0] * n_types)
    snr = snr_from_cell_counts(counts.reshape(-1, n_types), params)
    return snr.reshape(lead) if lead else float(snr[0])


def snr_from_cell_counts(counts, params: PhysicsParams) -> np.ndarray:
    """Effective SNR from per-history counts of each (carrier, tag) cell type.

    ``counts`` has shape (n, num_frequencies * len(JamTag)), flattened
    carrier-major like :func:`cell_sinr_table`.
    """
    return np.asarray(counts).astype(float) @ cell_sinr_table(params).ravel()


def terminal_pd(carriers, tags, params: PhysicsParams):
    """PD of fully resolved terminal histories (see effective_snr for shapes)."""
    return detection_probability(effective_snr(carriers, tags, params), params.pfa)
