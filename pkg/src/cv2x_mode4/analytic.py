"""Closed-form / semi-analytical model of the Mode 4 PDR-vs-distance curve
and its four-way loss decomposition (half-duplex, sensing, propagation,
collision).

The collision branch follows the sensing-based SPS structure: it estimates
how many window resources a vehicle excludes from what it can sense, how many
of those exclusions two vehicles share as a function of their separation, and
from that the probability that they pick the same resource.  Near/far channel
load regimes (Step 2 vs Step 3 dominated selection) are blended with a
piecewise-linear weight driven by the channel busy ratio.

``AnalyticModel`` caches the per-scenario tables (PSR profile, its
autocorrelation, exclusion counts); evaluations of different scenarios are
independent and safe to run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import erfinv

from .errors import ConfigurationError, ModelError
from .propagation import (
    DEFAULT_GRID,
    BlerTable,
    IntegrationGrid,
    PathlossModel,
    RadioConfig,
    ShadowingModel,
    _InterferencePrecomp,
    combine_noise_dbm,
    default_bler_table,
    pathloss_db,
    propagation_loss,
    psr,
    sensing_loss,
)

# Reselection counter bounds mandated by the standard per packet rate.
RESELECTION_BOUNDS = {10: (5, 15), 20: (10, 30), 50: (25, 75)}

PSR_CUTOFF = 1e-6          # sensing sums ignore distances with PSR below this
TERM_CUTOFF = 1e-9         # per-interferer collision terms below this truncate
SENSING_DOMINATED_EPS = 1e-12


@dataclass(frozen=True)
class ScenarioConfig:
    """All scenario inputs: traffic density, packet rate, channelization,
    radio parameters, channel model and SPS knobs."""

    beta: float
    lambda_hz: int = 10
    subchannels: int = 4
    packet_size_bytes: int = 190
    radio: RadioConfig = field(default_factory=RadioConfig)
    pathloss: PathlossModel = field(default_factory=PathlossModel)
    shadowing: ShadowingModel = field(default_factory=ShadowingModel)
    bler: Optional[BlerTable] = None
    step3_delta_db: float = 0.5
    resel_min: Optional[int] = None
    resel_max: Optional[int] = None
    grid: IntegrationGrid = DEFAULT_GRID
    alpha_knots: tuple = ((0.2, 0.0), (0.7, 1.0))

    def __post_init__(self):
        if self.beta <= 0:
            raise ConfigurationError("beta must be positive (vehicles per meter)")
        if self.lambda_hz not in RESELECTION_BOUNDS:
            raise ConfigurationError(
                "lambda_hz must be one of 10, 20 or 50 Hz (standard selection windows)")
        if self.subchannels < 1 or int(self.subchannels) != self.subchannels:
            raise ConfigurationError("subchannels must be a positive integer")
        lo, hi = RESELECTION_BOUNDS[self.lambda_hz]
        if self.resel_min is None:
            object.__setattr__(self, "resel_min", lo)
        if self.resel_max is None:
            object.__setattr__(self, "resel_max", hi)
        if (self.resel_min, self.resel_max) != (lo, hi):
            raise ConfigurationError(
                f"reselection counter bounds for {self.lambda_hz} Hz must be {(lo, hi)}")
        if self.step3_delta_db <= 0:
            raise ConfigurationError("step3_delta_db must be positive")
        if self.bler is None:
            mcs = "qpsk-r05" if self.subchannels == 2 else "qpsk-r07"
            object.__setattr__(self, "bler", default_bler_table(mcs))
        n = 1000.0 * self.subchannels / self.lambda_hz
        if abs(n - round(n)) > 1e-9:
            raise ConfigurationError("selection window must hold a whole number of resources")

    @property
    def window_subframes(self):
        """Selection window / reservation period length in sub-frames."""
        return 1000 // self.lambda_hz

    @property
    def n_total(self):
        """Total resources in the selection window."""
        return self.window_subframes * int(self.subchannels)

    @property
    def tau(self):
        """Mean reselection counter."""
        return 0.5 * (self.resel_min + self.resel_max)


@dataclass(frozen=True)
class ResourceCounts:
    """Window resource bookkeeping: total, excluded, assignable, candidate."""

    n_total: int
    n_candidate: int
    tau: float
    n_excluded: float = 0.0

    @property
    def n_assignable(self):
        return self.n_total - self.n_excluded

    def with_excluded(self, n_excluded):
        return replace(self, n_excluded=float(n_excluded))


@dataclass(frozen=True)
class CommonResources:
    """Expected numbers of resources two vehicles exclude/keep in common."""

    c_excluded: float
    c_assignable: float
    c_candidate: float


@dataclass(frozen=True)
class PdrBreakdown:
    """Per-distance PDR with raw and normalized loss probabilities.

    The normalized shares and the PDR sum to 1; the raw values are the
    conditional probabilities of each loss class.
    """

    distance_m: float
    pdr: float
    hd: float
    sen: float
    pro: float
    col: float
    hd_raw: float
    sen_raw: float
    pro_raw: float
    col_raw: float
    sensing_dominated: bool = False


def half_duplex_loss(lambda_hz):
    """Probability that the receiver is itself transmitting in the packet's
    sub-frame: lambda / 1000 for 1 ms sub-frames."""
    if not 1 <= lambda_hz <= 1000:
        raise ConfigurationError("lambda_hz must be in [1, 1000]")
    return lambda_hz / 1000.0


DEFAULT_ALPHA_KNOTS = ((0.2, 0.0), (0.7, 1.0))


def alpha_weight(cbr, knots=DEFAULT_ALPHA_KNOTS):
    """Step-2 vs Step-3 blending weight as a piecewise-linear map of CBR.

    The default knots evaluate through the canonical form 2*CBR - 0.4 so the
    fitted curve is reproduced bit-for-bit; custom knots interpolate.
    """
    if knots == DEFAULT_ALPHA_KNOTS:
        if cbr < 0.2:
            return 0.0
        if cbr >= 0.7:
            return 1.0
        return 2.0 * cbr - 0.4
    xs = [float(k[0]) for k in knots]
    ys = [float(k[1]) for k in knots]
    return float(np.interp(cbr, xs, ys))


def resource_counts(cfg):
    """Window totals: N from the sub-frame budget, candidate list size of
    20% of N, mean reselection counter.  The excluded count is step-specific
    and filled by the caller."""
    n = cfg.n_total
    return ResourceCounts(n_total=n, n_candidate=int(round(0.2 * n)), tau=cfg.tau)


def _psr_cutoff_distance(radio, path, shadow, threshold_bump_db=0.0, cutoff=PSR_CUTOFF):
    """Distance beyond which PSR drops below the cutoff."""
    # PSR(d) < cutoff  <=>  margin(d) < sigma * Phi^-1(cutoff), z below is negative.
    z = math.sqrt(2.0) * erfinv(2.0 * cutoff - 1.0)
    margin = (radio.tx_power_dbm - path.reference_loss_db
              - (radio.sensing_threshold_dbm + threshold_bump_db))
    if path.exponent_coeff <= 0:
        raise ConfigurationError("pathloss exponent must be positive for sensing sums")
    d = 10.0 ** ((margin - z * shadow.sigma_db) / path.exponent_coeff)
    return max(d, path.min_distance_m)


def _psr_profile(radio, path, shadow, threshold_bump_db=0.0):
    """PSR sampled at 0, 1, 2, ... meters until it falls below the cutoff."""
    d_cut = _psr_cutoff_distance(radio, path, shadow, threshold_bump_db)
    if d_cut > 5e6:
        raise ConfigurationError(
            "sensing range exceeds 5000 km; check channel parameters")
    dists = np.arange(0.0, math.ceil(d_cut) + 1.0)
    bumped = RadioConfig(
        tx_power_dbm=radio.tx_power_dbm,
        sensing_threshold_dbm=radio.sensing_threshold_dbm + threshold_bump_db,
        noise_power_dbm=radio.noise_power_dbm,
    )
    vals = np.asarray(psr(dists, bumped, path, shadow))
    keep = np.nonzero(vals >= PSR_CUTOFF)[0]
    last = keep[-1] + 1 if keep.size else 1
    return vals[:last]


def sensed_vehicle_count(beta, psr_fn, max_range_m=5e6):
    """Expected number of vehicles whose packets a vehicle can sense: the
    two-sided 1 m Riemann sum of the PSR profile scaled by the density."""
    if beta <= 0:
        raise ConfigurationError("beta must be positive")
    total = float(psr_fn(0.0))
    d = 1.0
    while d <= max_range_m:
        v = float(psr_fn(d))
        if v < PSR_CUTOFF:
            break
        total += 2.0 * v
        d += 1.0
    return beta * total


def _sensed_from_profile(beta, profile):
    return beta * (profile[0] + 2.0 * profile[1:].sum())


def excluded_resources_step2(sensed_count, n_total):
    """Expected resources excluded by decoded reservations: one per sensed
    vehicle-per-window transmission, corrected for reservations that land on
    already-excluded resources.  Clamped to [0, N]."""
    half = sensed_count / 2.0
    denom = n_total - half
    if denom <= 0:
        return float(n_total)
    m = int(round(half))
    s = 0.0
    if m > 0:
        k = np.arange(1.0, m + 1.0)
        s = float(np.maximum(1.0 - k / denom, 0.0).sum())
    return float(min(max(half + s, 0.0), n_total))


def excluded_resources_step3(cfg, n_total=None):
    """Excluded count when the lowest-RSSI ranking does the filtering.

    The ranking over the last 1000 sub-frames sees roughly twice the
    per-window occupancy (one reselection per second on average), so the
    density is doubled.  If that would exclude more than 80% of the window,
    the effective sensing threshold rises in ``step3_delta_db`` increments
    until at most 80% remains; returns (excluded, increments_used).
    """
    n = cfg.n_total if n_total is None else n_total
    target = 0.8 * n
    bump = 0.0
    steps = 0
    while True:
        if bump > 60.0:
            raise ModelError("step-3 threshold search diverged")
        profile = _psr_profile(cfg.radio, cfg.pathloss, cfg.shadowing, bump)
        sensed = 2.0 * _sensed_from_profile(cfg.beta, profile)
        ne = excluded_resources_step2(sensed, n)
        if ne <= target:
            return ne, steps
        bump += cfg.step3_delta_db
        steps += 1


def _autocorrelation_1m(profile):
    """R(d) = sum over the 1 m grid of PSR(|x+d|) PSR(|x|), for integer lags
    d >= 0.  Computed by FFT convolution of the symmetric two-sided profile."""
    two_sided = np.concatenate([profile[::-1], profile[1:]])
    full = fftconvolve(two_sided, two_sided)
    mid = two_sided.size - 1
    r = np.maximum(full[mid:], 0.0)
    return r


class AnalyticModel:
    """Per-scenario evaluation context with cached sensing tables."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.counts = resource_counts(cfg)
        self.profile = _psr_profile(cfg.radio, cfg.pathloss, cfg.shadowing)
        self.s_psr = _sensed_from_profile(cfg.beta, self.profile)
        n = self.counts.n_total
        self.ne_step2 = excluded_resources_step2(self.s_psr, n)
        self.ne_step3, self.step3_increments = excluded_resources_step3(cfg, n)
        self.cbr = self.ne_step2 / n
        self.alpha = alpha_weight(self.cbr, cfg.alpha_knots)
        self.r_psr = _autocorrelation_1m(self.profile)
        self.r0 = float(self.r_psr[0])
        cc2 = self._common_candidate_profile(self.ne_step2)
        cc3 = self._common_candidate_profile(self.ne_step3)
        self.cc_blend = self.alpha * cc2 + (1.0 - self.alpha) * cc3
        self.cc_blend_far = float(
            self.alpha * self._common_candidates_at(self.ne_step2, 0.0)
            + (1.0 - self.alpha) * self._common_candidates_at(self.ne_step3, 0.0))
        self.hd_raw = half_duplex_loss(cfg.lambda_hz)

    # -- sensing / propagation -------------------------------------------

    def psr(self, d):
        return psr(d, self.cfg.radio, self.cfg.pathloss, self.cfg.shadowing)

    def sensing_loss(self, d):
        return sensing_loss(d, self.cfg.radio, self.cfg.pathloss, self.cfg.shadowing)

    def propagation_loss(self, d):
        return propagation_loss(d, self.cfg.radio, self.cfg.pathloss,
                                self.cfg.shadowing, self.cfg.bler, self.cfg.grid)

    # -- common resources and simultaneous selection -----------------------

    def _common_excluded_arr(self, ne, r_vals):
        n = self.counts.n_total
        ce_far = ne * ne / n
        if self.s_psr > 0 and self.r0 > 0:
            bracket = self.cfg.beta * ne * self.r0 / self.s_psr - ce_far
            ce = (r_vals / self.r0) * bracket + ce_far
        else:
            ce = np.full_like(np.asarray(r_vals, dtype=float), ce_far)
        return np.clip(ce, 0.0, min(ne, n))

    def _common_candidates_from_ce(self, ne, ce):
        n = self.counts.n_total
        nc = self.counts.n_candidate
        # The 20%-availability guarantee of Step 2 applies to each vehicle's
        # own assignable list, so the conversion ratio uses N_A floored at
        # N_C; the overlap C_A itself may legitimately fall below N_C.
        na = max(n - ne, float(nc))
        ca = np.clip(n - 2.0 * ne + ce, 0.0, na)
        return np.clip(ca * (nc / na) ** 2, 0.0, float(nc)), ca

    def _common_candidate_profile(self, ne):
        cc, _ = self._common_candidates_from_ce(ne, self._common_excluded_arr(ne, self.r_psr))
        return cc

    def _common_candidates_at(self, ne, r_val):
        cc, _ = self._common_candidates_from_ce(
            ne, self._common_excluded_arr(ne, np.asarray([r_val])))
        return float(cc[0])

    def autocorrelation(self, d):
        lags = np.arange(self.r_psr.size, dtype=float)
        return np.interp(d, lags, self.r_psr, right=0.0)

    def common_resources(self, d, counts=None):
        """Expected common excluded/assignable/candidate resources between two
        vehicles separated by d, for the given (step-specific) exclusion count."""
        counts = counts if counts is not None else self.counts.with_excluded(self.ne_step2)
        r_val = self.autocorrelation(d)
        ce = self._common_excluded_arr(counts.n_excluded, np.asarray([r_val]))
        cc, ca = self._common_candidates_from_ce(counts.n_excluded, ce)
        return CommonResources(c_excluded=float(ce[0]), c_assignable=float(ca[0]),
                               c_candidate=float(cc[0]))

    def p_uncoordinated(self, d):
        """Probability the two vehicles do not account for each other's
        reservations (out of range, or a selection too fresh to observe)."""
        return 1.0 - (1.0 - 1.0 / self.counts.tau) * self.psr(d)

    def p_same_resource(self, d):
        """Probability that two vehicles separated by d transmit on the same
        resource, blending the Step-2 and Step-3 exclusion regimes."""
        d_arr = np.asarray(d, dtype=float)
        lags = np.arange(self.cc_blend.size, dtype=float)
        cc = np.interp(d_arr, lags, self.cc_blend, right=self.cc_blend_far)
        p_s = 1.0 - (1.0 - 1.0 / self.counts.tau) * np.asarray(self.psr(d_arr))
        out = p_s * cc / self.counts.n_candidate ** 2
        return out if out.ndim else float(out)

    # -- collisions --------------------------------------------------------

    def collision_loss(self, d_tr, ring_length_m=None):
        """Probability of a loss caused by a co-resource transmission.

        Interferers sit on the 1/beta lattice around the transmitter with the
        receiver down-range at d_tr; each contributes p_same_resource(d_ti) *
        p_interference(d_tr, d_ir) and the contributions combine as independent
        survival factors.  With ``ring_length_m`` the lattice wraps around a
        ring of that length (matching the simulator's world) instead of
        extending to infinity.
        """
        cfg = self.cfg
        pre = _InterferencePrecomp(d_tr, cfg.radio, cfg.pathloss, cfg.shadowing,
                                   cfg.bler, cfg.grid)
        if pre.sensing_dominated:
            return 0.0
        d_pro = pre.noise_only_loss
        if d_pro >= 1.0 - SENSING_DOMINATED_EPS:
            return 0.0

        def terms_for(offsets):
            d_ti = np.abs(offsets)
            d_ir = np.abs(offsets - d_tr)
            if ring_length_m is not None:
                d_ti = np.minimum(d_ti, ring_length_m - d_ti)
                d_ir_mod = np.abs(offsets - d_tr) % ring_length_m
                d_ir = np.minimum(d_ir_mod, ring_length_m - d_ir_mod)
            p_sim = np.asarray(self.p_same_resource(d_ti))
            p_int = self._interference_many(pre, d_pro, d_ir)
            return p_sim * p_int

        spacing = 1.0 / cfg.beta
        log_survival = 0.0
        if ring_length_m is not None:
            n_veh = int(round(ring_length_m * cfg.beta))
            offsets = spacing * np.arange(1, n_veh)
            t = terms_for(offsets)
            log_survival = float(np.log1p(-np.minimum(t, 1.0 - 1e-15)).sum())
        else:
            for direction in (+1.0, -1.0):
                i0 = 1
                while True:
                    idx = np.arange(i0, i0 + 512)
                    offsets = direction * spacing * idx
                    t = terms_for(offsets)
                    log_survival += float(np.log1p(-np.minimum(t, 1.0 - 1e-15)).sum())
                    past_receiver = direction < 0 or offsets[-1] > d_tr
                    if past_receiver and t.max() < TERM_CUTOFF:
                        break
                    i0 += 512
        return float(min(max(-math.expm1(log_survival), 0.0), 1.0))

    def _interference_many(self, pre, d_pro, d_ir):
        """Vectorized conditional interference-failure over many distances."""
        cfg = self.cfg
        mean_i = cfg.radio.tx_power_dbm - pathloss_db(np.asarray(d_ir, dtype=float),
                                                      cfg.pathloss)
        w = combine_noise_dbm(mean_i[:, None] + pre.i_offsets[None, :],
                              cfg.radio.noise_power_dbm)
        vals = np.interp(w, pre.w_grid, pre.bler_given_inplus_noise)
        p_sinr = vals @ pre.i_weights
        return np.clip((p_sinr - d_pro) / (1.0 - d_pro), 0.0, 1.0)

    # -- composition --------------------------------------------------------

    def breakdown(self, d, ring_length_m=None):
        """PDR and the four loss probabilities at one distance."""
        hd = self.hd_raw
        sen = float(self.sensing_loss(d))
        sensing_dominated = sen >= 1.0 - SENSING_DOMINATED_EPS
        pro = float(self.propagation_loss(d))
        col = float(self.collision_loss(d, ring_length_m))
        pdr = (1.0 - hd) * (1.0 - sen) * (1.0 - pro) * (1.0 - col)
        return PdrBreakdown(
            distance_m=float(d),
            pdr=pdr,
            hd=hd,
            sen=(1.0 - hd) * sen,
            pro=(1.0 - hd) * (1.0 - sen) * pro,
            col=(1.0 - hd) * (1.0 - sen) * (1.0 - pro) * col,
            hd_raw=hd,
            sen_raw=sen,
            pro_raw=pro,
            col_raw=col,
            sensing_dominated=sensing_dominated,
        )

    def curve(self, distances, ring_length_m=None):
        return [self.breakdown(d, ring_length_m) for d in distances]


# -- module-level convenience wrappers (build a fresh model per call) --------

def common_resources(d_ti, counts, cfg):
    return AnalyticModel(cfg).common_resources(d_ti, counts)


def p_uncoordinated(d_ti, tau, psr_fn):
    """1 - (1 - 1/tau) * PSR(d_ti): the coordination-failure probability
    (out of sensing range, or a reselection too fresh to have been heard)."""
    if tau < 1:
        raise ConfigurationError("tau must be >= 1")
    return 1.0 - (1.0 - 1.0 / tau) * psr_fn(d_ti)


def selection_collision_probability(c_a, n_a, n_c):
    """Probability two vehicles independently pick the same resource given
    c_a common assignable resources: C_C / N_C^2 with C_C = C_A (N_C/N_A)^2."""
    if n_a <= 0 or n_c <= 0:
        raise ConfigurationError("resource counts must be positive")
    c_c = c_a * (n_c / n_a) ** 2
    return c_c / n_c ** 2


def p_same_resource(d_ti, cfg):
    return float(AnalyticModel(cfg).p_same_resource(d_ti))


def collision_loss(d_tr, cfg, ring_length_m=None):
    return AnalyticModel(cfg).collision_loss(d_tr, ring_length_m)


def channel_busy_ratio(cfg):
    """Analytic CBR: expected fraction of window resources excluded by the
    reservation-based filter."""
    profile = _psr_profile(cfg.radio, cfg.pathloss, cfg.shadowing)
    sensed = _sensed_from_profile(cfg.beta, profile)
    return excluded_resources_step2(sensed, cfg.n_total) / cfg.n_total


def pdr_curve(cfg, distances, ring_length_m=None):
    """Per-distance PDR breakdowns over a sorted, non-negative grid."""
    distances = list(distances)
    if any(d < 0 for d in distances):
        raise ConfigurationError("distances must be non-negative")
    if any(b < a for a, b in zip(distances, distances[1:])):
        raise ConfigurationError("distances must be sorted ascending")
    return AnalyticModel(cfg).curve(distances, ring_length_m)


def default_distance_grid(max_distance_m=1000.0, step_m=10.0):
    return np.arange(0.0, max_distance_m + step_m / 2, step_m)
