"""Channel abstraction: log-distance pathloss, log-normal shadowing and the
BLER-based PHY model.

The received power at distance d is P_t - PL(d) - SH with SH ~ N(0, sigma^2)
in dB.  Everything in this module is a pure function of its inputs, so the
probabilities below (sensing loss, propagation loss, interference failure)
are all deterministic and safe to evaluate concurrently.

Default channel constants are synthetic: the slope (40 dB/decade) follows the
WINNER+ B1 highway LOS model beyond its breakpoint, while the 1 m intercept is
an effective fit giving a median sensing range of ~473 m at 20 dBm with the
-90.4 dBm sensing threshold.  They are not a physical short-range model; use
your own ``PathlossModel`` when calibrated constants are available.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erf

from .errors import ConfigurationError

LOG10_DIV_10 = math.log(10.0) / 10.0


@dataclass(frozen=True)
class PathlossModel:
    """Log-distance pathloss PL(d) = reference_loss_db + exponent_coeff*log10(d).

    Distances below ``min_distance_m`` are clamped so PL stays finite and
    monotone non-decreasing for d >= min_distance_m.
    """

    reference_loss_db: float = 3.4
    exponent_coeff: float = 40.0
    min_distance_m: float = 1.0

    def __post_init__(self):
        if self.min_distance_m <= 0:
            raise ConfigurationError("min_distance_m must be positive")
        if self.exponent_coeff < 0:
            raise ConfigurationError("exponent_coeff must be non-negative")

    def __call__(self, distance_m):
        return pathloss_db(distance_m, self)


@dataclass(frozen=True)
class ShadowingModel:
    """Zero-mean log-normal shadowing with standard deviation sigma_db (dB)."""

    sigma_db: float = 3.0

    def __post_init__(self):
        if self.sigma_db <= 0:
            raise ConfigurationError("sigma_db must be > 0")


@dataclass(frozen=True)
class RadioConfig:
    """Transmit power, receiver sensing threshold and noise power (all dBm)."""

    tx_power_dbm: float = 20.0
    sensing_threshold_dbm: float = -90.4
    noise_power_dbm: float = -95.0

    def __post_init__(self):
        # 23 dBm is the standard's maximum sidelink transmit power.
        if self.tx_power_dbm > 23.0:
            raise ConfigurationError("tx_power_dbm exceeds the 23 dBm maximum")


@dataclass(frozen=True)
class IntegrationGrid:
    """Fixed-step dB grid used by the numerical loss integrals.

    The grid spans ``span_sigmas`` standard deviations around the mean of the
    Gaussian being integrated; cell masses are exact Gaussian probabilities so
    only the BLER variation within a 0.1 dB cell contributes error.
    """

    step_db: float = 0.1
    span_sigmas: float = 8.0

    def __post_init__(self):
        if self.step_db <= 0 or self.span_sigmas <= 0:
            raise ConfigurationError("grid step and span must be positive")


DEFAULT_GRID = IntegrationGrid()


class BlerTable:
    """SNR(dB) -> BLER lookup for one MCS.

    Queries below the first knot return 1.0 (undecodable), queries above the
    last knot return the last value, and queries between knots interpolate
    linearly.  Knots must have strictly increasing SNR and non-increasing BLER.
    """

    def __init__(self, mcs_id, points):
        points = [(float(s), float(b)) for s, b in points]
        if not points:
            raise ConfigurationError("BLER table needs at least one point")
        snr = np.array([p[0] for p in points])
        bler = np.array([p[1] for p in points])
        if np.any(np.diff(snr) <= 0):
            raise ConfigurationError("BLER table SNR values must be strictly increasing")
        if np.any(bler < 0) or np.any(bler > 1):
            raise ConfigurationError("BLER values must lie in [0, 1]")
        if np.any(np.diff(bler) > 0):
            raise ConfigurationError("BLER must be non-increasing in SNR")
        self.mcs_id = str(mcs_id)
        self.snr_db = snr
        self.bler = bler

    def __call__(self, snr_db):
        return np.interp(snr_db, self.snr_db, self.bler, left=1.0, right=self.bler[-1])

    @property
    def points(self):
        return list(zip(self.snr_db.tolist(), self.bler.tolist()))

    @classmethod
    def from_csv(cls, path, mcs_id=None):
        """Load one table from a CSV file with header ``snr_db,bler``.

        The MCS id defaults to the file stem.
        """
        path = Path(path)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["snr_db", "bler"]:
                raise ConfigurationError(
                    f"{path}: expected header 'snr_db,bler', got {header!r}")
            points = []
            for lineno, row in enumerate(reader, start=2):
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) != 2:
                    raise ConfigurationError(f"{path}:{lineno}: expected two columns")
                try:
                    points.append((float(row[0]), float(row[1])))
                except ValueError as exc:
                    raise ConfigurationError(f"{path}:{lineno}: {exc}") from exc
        return cls(mcs_id if mcs_id is not None else path.stem, points)

    @classmethod
    def logistic(cls, mcs_id, snr50_db, steepness_per_db, span_db=10.0, step_db=0.1):
        """Two-parameter logistic curve 1/(1+exp(k*(s-s50))) sampled as knots."""
        n = int(round(2 * span_db / step_db))
        snr = snr50_db - span_db + step_db * np.arange(n + 1)
        bler = 1.0 / (1.0 + np.exp(np.clip(steepness_per_db * (snr - snr50_db), -60, 60)))
        return cls(mcs_id, list(zip(snr.tolist(), bler.tolist())))


# Synthetic stand-ins for measured link-level tables: logistic cliffs whose
# 50% points roughly reproduce the expected interference-free PDR shape for
# QPSK at coding rates 0.7 (4 sub-channels) and 0.5 (2 sub-channels).
DEFAULT_BLER_PARAMS = {
    "qpsk-r07": (3.0, 2.0),
    "qpsk-r05": (0.5, 2.0),
}


def default_bler_table(mcs_id="qpsk-r07"):
    try:
        snr50, k = DEFAULT_BLER_PARAMS[mcs_id]
    except KeyError:
        raise ConfigurationError(
            f"unknown MCS id {mcs_id!r}; known: {sorted(DEFAULT_BLER_PARAMS)}") from None
    return BlerTable.logistic(mcs_id, snr50, k)


def pathloss_db(distance_m, model=PathlossModel()):
    """Pathloss in dB at the given distance; distances below the floor clamp."""
    d = np.maximum(np.asarray(distance_m, dtype=float), model.min_distance_m)
    out = model.reference_loss_db + model.exponent_coeff * np.log10(d)
    return out if out.ndim else float(out)


def psr(distance_m, radio=RadioConfig(), path=PathlossModel(), shadow=ShadowingModel()):
    """Packet Sensing Ratio: probability the received power exceeds the
    sensing threshold at this distance."""
    margin = radio.tx_power_dbm - pathloss_db(distance_m, path) - radio.sensing_threshold_dbm
    out = 0.5 * (1.0 + erf(margin / (shadow.sigma_db * math.sqrt(2.0))))
    return out if np.ndim(out) else float(out)


def sensing_loss(distance_m, radio=RadioConfig(), path=PathlossModel(),
                 shadow=ShadowingModel()):
    """Probability a packet arrives below the sensing threshold (1 - PSR)."""
    out = 1.0 - psr(distance_m, radio, path, shadow)
    return out if np.ndim(out) else float(out)


def _gaussian_cells(mean, sigma, lo, hi, step):
    """Cell centers and exact Gaussian masses on [lo, hi] with the given step.

    Returns empty arrays when the interval is degenerate.
    """
    if hi <= lo:
        return np.empty(0), np.empty(0)
    n = max(int(math.ceil((hi - lo) / step)), 1)
    edges = lo + step * np.arange(n + 1)
    z = (edges - mean) / (sigma * math.sqrt(2.0))
    weights = np.diff(0.5 * (1.0 + erf(z)))
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, weights


def _receivable_power_cells(distance_m, radio, path, shadow, grid):
    """Centers and normalized masses of P_r conditioned on P_r > P_SEN.

    Returns (None, None) when essentially no receivable probability mass
    remains (the sensing-dominated regime).
    """
    mean_r = radio.tx_power_dbm - pathloss_db(distance_m, path)
    sigma = shadow.sigma_db
    lo = max(radio.sensing_threshold_dbm, mean_r - grid.span_sigmas * sigma)
    hi = mean_r + grid.span_sigmas * sigma
    centers, weights = _gaussian_cells(mean_r, sigma, lo, hi, grid.step_db)
    total = weights.sum() if weights.size else 0.0
    if total <= 1e-12:
        return None, None
    return centers, weights / total


def propagation_loss(distance_m, radio=RadioConfig(), path=PathlossModel(),
                     shadow=ShadowingModel(), bler=None, grid=DEFAULT_GRID):
    """Probability of a decode failure from noise alone, conditioned on the
    packet being above the sensing threshold.

    The SNR density is Gaussian (mean P_t - PL(d) - N_0, std sigma), truncated
    below the sensing-equivalent SNR and renormalized.  When the sensing loss
    is ~1 there is no receivable mass and the result is 0 by convention: such
    packets are fully accounted for in the sensing loss.
    """
    if bler is None:
        bler = default_bler_table()
    centers, weights = _receivable_power_cells(distance_m, radio, path, shadow, grid)
    if centers is None:
        return 0.0
    return float(np.dot(weights, bler(centers - radio.noise_power_dbm)))


def combine_noise_dbm(power_dbm, noise_dbm):
    """Total of a signal and the noise floor, in dBm (linear-domain sum)."""
    p = np.asarray(power_dbm, dtype=float)
    out = noise_dbm + np.log1p(np.exp((p - noise_dbm) * LOG10_DIV_10)) / LOG10_DIV_10
    return out if out.ndim else float(out)


class _InterferencePrecomp:
    """Per-(d_tr, config) tables for evaluating many interferer distances.

    ``bler_given_inplus_noise[g]`` holds E[BL(P_r - w_g) | P_r > P_SEN] on a
    fixed grid of interference-plus-noise levels w, so each interferer only
    costs one Gaussian reweighting and one interpolation.  The entry at
    w = N_0 is exactly the propagation-only loss, which makes the far
    interferer limit of the collision normalization vanish identically.
    """

    def __init__(self, d_tr, radio, path, shadow, bler, grid):
        self.radio = radio
        self.path = path
        self.shadow = shadow
        self.grid = grid
        self.centers, self.weights = _receivable_power_cells(
            d_tr, radio, path, shadow, grid)
        # Offsets/masses of the interferer power around its mean are
        # shift-invariant, so they are shared across all interferer distances.
        sigma = shadow.sigma_db
        span = grid.span_sigmas * sigma
        off, w = _gaussian_cells(0.0, sigma, -span, span, grid.step_db)
        self.i_offsets = off
        self.i_weights = w / w.sum()
        if self.centers is None:
            self.w_grid = None
            return
        n0 = radio.noise_power_dbm
        # The grid must reach the strongest admissible interferer: one at the
        # pathloss clamp distance, plus the shadowing span.
        i_peak = radio.tx_power_dbm - pathloss_db(path.min_distance_m, path) + span
        w_max = combine_noise_dbm(i_peak, n0) + 1.0
        n = max(int(math.ceil((w_max - n0) / grid.step_db)), 1)
        self.w_grid = n0 + grid.step_db * np.arange(n + 1)
        diff = self.centers[:, None] - self.w_grid[None, :]
        self.bler_given_inplus_noise = self.weights @ bler(diff)
        self.noise_only_loss = float(self.bler_given_inplus_noise[0])

    @property
    def sensing_dominated(self):
        return self.centers is None

    def sinr_loss(self, d_ir):
        """P(decode failure | P_r > P_SEN) with one interferer at d_ir."""
        mean_i = self.radio.tx_power_dbm - pathloss_db(d_ir, self.path)
        w = combine_noise_dbm(mean_i + self.i_offsets, self.radio.noise_power_dbm)
        vals = np.interp(w, self.w_grid, self.bler_given_inplus_noise)
        return float(np.dot(self.i_weights, vals))


def interference_failure(d_tr, d_ir, radio=RadioConfig(), path=PathlossModel(),
                         shadow=ShadowingModel(), bler=None, grid=DEFAULT_GRID,
                         method="convolution"):
    """Probability that a co-resource interferer at d_ir breaks a packet that
    would otherwise have survived propagation, for a link of length d_tr.

    The SINR treats interference as additional noise (powers summed in the
    linear domain).  Its distribution under the two independent shadowing
    draws is evaluated by discrete cross-correlation of the truncated P_r
    density and the noise-combined P_i density (``method="convolution"``, the
    default and the reference for the Monte-Carlo oracles).  ``"gaussian"``
    uses the variance-2*sigma^2 Gaussian of the dB power difference with the
    noise floor applied at the mean interference level only; it is a cheaper
    approximation kept for comparison.

    Losses already attributable to propagation alone are divided out; the
    result is clamped to [0, 1].  If propagation alone already loses
    everything the collision contribution is 0 by convention.
    """
    if bler is None:
        bler = default_bler_table()
    if method == "convolution":
        pre = _InterferencePrecomp(d_tr, radio, path, shadow, bler, grid)
        if pre.sensing_dominated:
            return 0.0
        d_pro = pre.noise_only_loss
        if d_pro >= 1.0 - 1e-12:
            return 0.0
        p_sinr = pre.sinr_loss(d_ir)
        return float(min(max((p_sinr - d_pro) / (1.0 - d_pro), 0.0), 1.0))
    if method == "gaussian":
        return _interference_failure_gaussian(d_tr, d_ir, radio, path, shadow, bler, grid)
    raise ConfigurationError(f"unknown method {method!r}")


def _interference_failure_gaussian(d_tr, d_ir, radio, path, shadow, bler, grid):
    # SIR difference of two independent shadowing draws is Gaussian with
    # variance 2*sigma^2; the noise floor enters only through the mean
    # interference level.  Approximate, for cross-checking the default path.
    d_pro = propagation_loss(d_tr, radio, path, shadow, bler, grid)
    if d_pro >= 1.0 - 1e-12:
        return 0.0
    sen = sensing_loss(d_tr, radio, path, shadow)
    if sen >= 1.0 - 1e-12:
        return 0.0
    n0 = radio.noise_power_dbm
    inplus = combine_noise_dbm(radio.tx_power_dbm - pathloss_db(d_ir, path), n0)
    mean_z = radio.tx_power_dbm - pathloss_db(d_tr, path) - inplus
    sigma_z = shadow.sigma_db * math.sqrt(2.0)
    # Conditioning P_r > P_SEN maps onto the SINR axis at the mean
    # interference level.
    z_floor = radio.sensing_threshold_dbm - inplus
    lo = max(z_floor, mean_z - grid.span_sigmas * sigma_z)
    hi = mean_z + grid.span_sigmas * sigma_z
    centers, weights = _gaussian_cells(mean_z, sigma_z, lo, hi, grid.step_db)
    total = weights.sum() if weights.size else 0.0
    if total <= 1e-12:
        return 0.0
    p_sinr = float(np.dot(weights / total, bler(centers)))
    return float(min(max((p_sinr - d_pro) / (1.0 - d_pro), 0.0), 1.0))
