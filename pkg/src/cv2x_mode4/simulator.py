"""Sub-frame-resolution simulator of Mode 4 sensing-based SPS on a ring road.

Vehicles sit every 1/beta meters on a wrap-around ring (mobility adds nothing
when density is constant and relative-speed effects live in the BLER table);
each transmits lambda packets per second on a semi-persistently reserved
(sub-frame, sub-channel) resource, re-selecting through the standard 3-step
procedure when its reselection counter expires.  Receptions are classified
into the four mutually exclusive loss classes in fixed precedence order:
half-duplex, below-sensing-power, propagation, collision.

Randomness: one deterministic stream per vehicle (selection draws) plus one
channel stream (per-transmission shadowing and decoder draws), all spawned
from the master seed, so a run is reproducible bit-for-bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np

from .analytic import ScenarioConfig
from .errors import ConfigurationError, NotReadyError
from .propagation import pathloss_db

SUBFRAMES_PER_SECOND = 1000
SENSING_MEMORY = 1000  # sub-frames of history any decision may consult
FAR_PAST = -(10 ** 9)


class Outcome(IntEnum):
    OK = 0
    HD = 1
    SEN = 2
    PRO = 3
    COL = 4


@dataclass(frozen=True)
class RxEvent:
    subframe: int
    tx_id: int
    rx_id: int
    distance_m: float
    outcome: Outcome


@dataclass(frozen=True)
class VehicleState:
    """Read-only snapshot of one vehicle's scheduler state."""

    position_m: float
    reselection_counter: int
    reserved_resource: Optional[tuple]  # (sub-frame phase, sub-channel)


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of one resource (re)selection, for inspection in tests."""

    resource: tuple                  # (phase, subchannel)
    candidates: np.ndarray           # flat indices of L_C
    available: np.ndarray            # boolean mask of L_A over (phase, subchannel)
    rsrp_iterations: int             # +3 dB threshold raises performed
    reselection_counter: int


class ResourceGrid:
    """Occupancy view of the periodic resource grid: who is reserved where."""

    def __init__(self, period_subframes, subchannels):
        self.period_subframes = period_subframes
        self.subchannels = subchannels
        self.reserved_phase = None
        self.reserved_subchannel = None

    def bind(self, phases, subchannels):
        self.reserved_phase = phases
        self.reserved_subchannel = subchannels

    def transmitters(self, subframe):
        """Vehicle ids transmitting in the given absolute sub-frame."""
        return np.nonzero(self.reserved_phase == subframe % self.period_subframes)[0]

    def occupancy(self, subframe):
        """Mapping sub-channel -> vehicle ids for one sub-frame."""
        ids = self.transmitters(subframe)
        return {c: ids[self.reserved_subchannel[ids] == c]
                for c in range(self.subchannels)}


def classify_many(rx_transmitting, p_r_dbm, interference_mw, u, bler, radio):
    """Vectorized reception classification; single uniform draw per packet.

    The one-draw chain (PRO if u < BL(SNR), else COL if u < BL(SINR)) makes
    collision losses a subset of packets that would have survived propagation
    alone, matching the conditional definitions of the loss classes.
    """
    p_r_dbm = np.asarray(p_r_dbm, dtype=float)
    snr = p_r_dbm - radio.noise_power_dbm
    noise_mw = 10.0 ** (radio.noise_power_dbm / 10.0)
    sinr = p_r_dbm - 10.0 * np.log10(np.asarray(interference_mw) + noise_mw)
    out = np.zeros(p_r_dbm.shape, dtype=np.int8)
    u = np.asarray(u)
    out[u < bler(sinr)] = Outcome.COL
    out[u < bler(snr)] = Outcome.PRO
    out[p_r_dbm <= radio.sensing_threshold_dbm] = Outcome.SEN
    out[np.asarray(rx_transmitting)] = Outcome.HD
    return out


def classify_rx(rx_transmitting, p_r_dbm, interference_mw, u, bler, radio):
    """Scalar wrapper around :func:`classify_many`."""
    code = classify_many(np.array([rx_transmitting]), np.array([p_r_dbm]),
                         np.array([interference_mw]), np.array([u]), bler, radio)
    return Outcome(int(code[0]))


class Simulator:
    """World state and per-sub-frame update loop.

    Constructed directly for small test worlds; use :func:`build_scenario`
    for statistically meaningful ones (it enforces a vehicle-count floor).
    """

    def __init__(self, cfg: ScenarioConfig, length_m, seed,
                 rsrp_threshold_dbm=-110.0, busy_threshold_dbm=None):
        self.cfg = cfg
        n = int(round(length_m * cfg.beta))
        if n < 2:
            raise ConfigurationError("need at least two vehicles")
        self.n = n
        self.ring_length_m = n / cfg.beta
        self.period = cfg.window_subframes
        self.subchannels = int(cfg.subchannels)
        self.n_window = self.period * self.subchannels
        self.n_candidate = int(round(0.2 * self.n_window))
        self.rsrp_threshold_dbm = float(rsrp_threshold_dbm)
        self.busy_threshold_dbm = (cfg.radio.sensing_threshold_dbm
                                   if busy_threshold_dbm is None else busy_threshold_dbm)

        self.positions = np.arange(n) / cfg.beta
        gap = np.abs(self.positions[:, None] - self.positions[None, :])
        self.distance = np.minimum(gap, self.ring_length_m - gap)
        self.pl_db = pathloss_db(self.distance, cfg.pathloss)

        ss = np.random.SeedSequence(seed)
        children = ss.spawn(n + 1)
        self.vehicle_rng = [np.random.default_rng(c) for c in children[:n]]
        self.channel_rng = np.random.default_rng(children[n])

        self.phase = np.empty(n, dtype=np.int64)
        self.subch = np.empty(n, dtype=np.int64)
        self.counter = np.empty(n, dtype=np.int64)
        for v in range(n):
            rng = self.vehicle_rng[v]
            self.phase[v] = rng.integers(0, self.period)
            self.subch[v] = rng.integers(0, self.subchannels)
            self.counter[v] = rng.integers(cfg.resel_min, cfg.resel_max + 1)

        self.grid = ResourceGrid(self.period, self.subchannels)
        self.grid.bind(self.phase, self.subch)

        self.hist_rssi = np.zeros((n, SENSING_MEMORY, self.subchannels), dtype=np.float64)
        self.hist_valid = np.zeros((n, SENSING_MEMORY), dtype=bool)
        shape = (n, self.period, self.subchannels)
        self.sci_time = np.full(shape, FAR_PAST, dtype=np.int64)
        self.sci_remaining = np.zeros(shape, dtype=np.int64)
        self.sci_source = np.full(shape, -1, dtype=np.int64)
        self.sci_rsrp_sum = np.zeros(shape, dtype=np.float64)
        self.sci_rsrp_count = np.zeros(shape, dtype=np.int64)
        self.tx_phase_time = np.full((n, self.period), FAR_PAST, dtype=np.int64)

        self.now = 0
        self.reselections = 0
        self._noise_mw = 10.0 ** (cfg.radio.noise_power_dbm / 10.0)

    # -- state access -------------------------------------------------------

    def vehicle(self, v):
        return VehicleState(
            position_m=float(self.positions[v]),
            reselection_counter=int(self.counter[v]),
            reserved_resource=(int(self.phase[v]), int(self.subch[v])),
        )

    # -- per-sub-frame update ------------------------------------------------

    def step(self, on_rx=None):
        """Advance one sub-frame.  ``on_rx(tx_ids, rx_outcomes)`` receives the
        transmitter ids and the (n_tx, n) outcome-code matrix when given."""
        t = self.now
        phase_now = t % self.period
        tx_ids = np.nonzero(self.phase == phase_now)[0]
        slot = t % SENSING_MEMORY
        if tx_ids.size:
            self._transmit(tx_ids, slot, on_rx)
            self.tx_phase_time[tx_ids, phase_now] = t
            self.counter[tx_ids] -= 1
            for v in tx_ids:
                if self.counter[v] == 0:
                    self.sps_select(int(v))
        else:
            self.hist_rssi[:, slot, :] = 0.0
            self.hist_valid[:, slot] = True
        self.now += 1

    def _transmit(self, tx_ids, slot, on_rx):
        cfg = self.cfg
        k = tx_ids.size
        n = self.n
        shadow = self.channel_rng.normal(0.0, cfg.shadowing.sigma_db, (k, n))
        u = self.channel_rng.random((k, n))
        p_r = cfg.radio.tx_power_dbm - self.pl_db[tx_ids, :] - shadow
        p_r_mw = 10.0 ** (p_r / 10.0)
        p_r_mw[np.arange(k), tx_ids] = 0.0  # no self-reception or self-interference

        chan_mw = np.zeros((self.subchannels, n))
        tx_chan = self.subch[tx_ids]
        for c in np.unique(tx_chan):
            chan_mw[c] = p_r_mw[tx_chan == c].sum(axis=0)

        interference_mw = chan_mw[tx_chan, :] - p_r_mw
        rx_transmitting = np.broadcast_to(self.phase == self.now % self.period, (k, n))
        outcomes = classify_many(rx_transmitting, p_r, interference_mw, u,
                                 cfg.bler, cfg.radio)
        if on_rx is not None:
            on_rx(tx_ids, outcomes)

        # SCI decoding: above the sensing threshold and surviving the
        # propagation draw (interference ignored per the simplified rule).
        decoded = (~rx_transmitting) & (p_r > cfg.radio.sensing_threshold_dbm) \
            & (u >= cfg.bler(p_r - cfg.radio.noise_power_dbm))
        phase_now = self.now % self.period
        for j, v_tx in enumerate(tx_ids):
            rxs = np.nonzero(decoded[j])[0]
            if rxs.size == 0:
                continue
            c = self.subch[v_tx]
            fresh = self.sci_source[rxs, phase_now, c] != v_tx
            reset = rxs[fresh]
            self.sci_rsrp_sum[reset, phase_now, c] = 0.0
            self.sci_rsrp_count[reset, phase_now, c] = 0
            self.sci_source[rxs, phase_now, c] = v_tx
            self.sci_time[rxs, phase_now, c] = self.now
            self.sci_remaining[rxs, phase_now, c] = self.counter[v_tx] - 1
            self.sci_rsrp_sum[rxs, phase_now, c] += p_r_mw[j, rxs]
            self.sci_rsrp_count[rxs, phase_now, c] += 1

        self.hist_rssi[:, slot, :] = chan_mw.T
        self.hist_valid[:, slot] = ~rx_transmitting[0]

    # -- sensing-based SPS selection ------------------------------------------

    def sps_select(self, v):
        """Run Steps 1-3 for vehicle v and install the new reservation."""
        t = self.now
        period = self.period
        rng = self.vehicle_rng[v]
        phases = np.arange(period)
        # Step 1: the selection window holds the next `period` sub-frames
        # (maximum latency equals the packet interval), one per phase.
        window_sf = t + 1 + ((phases - (t + 1)) % period)

        # Step 2 inputs.
        sci_t = self.sci_time[v]
        heard_recently = sci_t > t - SENSING_MEMORY
        periods_ahead = (window_sf[:, None] - sci_t) // period
        reserved_ahead = heard_recently & (periods_ahead <= self.sci_remaining[v])
        cnt = self.sci_rsrp_count[v]
        with np.errstate(divide="ignore", invalid="ignore"):
            rsrp_dbm = np.where(
                cnt > 0,
                10.0 * np.log10(np.maximum(self.sci_rsrp_sum[v] / np.maximum(cnt, 1), 1e-300)),
                -np.inf)
        own_blocked = self.tx_phase_time[v] >= window_sf - SENSING_MEMORY

        threshold = self.rsrp_threshold_dbm
        iterations = 0
        while True:
            excluded = (reserved_ahead & (rsrp_dbm > threshold)) | own_blocked[:, None]
            if self.n_window - int(excluded.sum()) >= self.n_candidate:
                break
            threshold += 3.0
            iterations += 1

        # Step 3: rank available resources by average RSSI over the same
        # phase in the previous periods of the sensing memory.
        js = np.arange(1, SENSING_MEMORY // period + 1)
        hist_idx = (window_sf[:, None] - js[None, :] * period) % SENSING_MEMORY
        vals = self.hist_rssi[v][hist_idx, :]             # (period, J, S)
        valid = self.hist_valid[v][hist_idx]              # (period, J)
        counts = valid.sum(axis=1)
        sums = (vals * valid[:, :, None]).sum(axis=1)
        avg_rssi = np.where(counts[:, None] > 0, sums / np.maximum(counts, 1)[:, None], 0.0)

        available = ~excluded
        flat_avail = available.ravel()
        tie = rng.random(self.n_window)
        order = np.lexsort((tie, avg_rssi.ravel()))
        order = order[flat_avail[order]]
        candidates = order[: self.n_candidate]
        choice = int(candidates[rng.integers(0, candidates.size)])
        new_phase, new_subch = divmod(choice, self.subchannels)
        new_counter = int(rng.integers(self.cfg.resel_min, self.cfg.resel_max + 1))
        self.phase[v] = new_phase
        self.subch[v] = new_subch
        self.counter[v] = new_counter
        self.reselections += 1
        return SelectionResult(
            resource=(int(new_phase), int(new_subch)),
            candidates=np.sort(candidates),
            available=available,
            rsrp_iterations=iterations,
            reselection_counter=new_counter,
        )

    # -- measurements ----------------------------------------------------------

    def measure_cbr(self, window_subframes=100):
        """Fraction of resources whose RSSI exceeded the busy threshold over
        the trailing window, averaged over all sensing (non-transmitting)
        vehicle-sub-frame samples."""
        if self.now < window_subframes:
            raise NotReadyError(
                f"need {window_subframes} sub-frames of history, have {self.now}")
        idx = (self.now - 1 - np.arange(window_subframes)) % SENSING_MEMORY
        busy = self.hist_rssi[:, idx, :] > 10.0 ** (self.busy_threshold_dbm / 10.0)
        valid = self.hist_valid[:, idx]
        total = int(valid.sum()) * self.subchannels
        if total == 0:
            return 0.0
        return float(busy[valid].sum() / total)


@dataclass
class SimStats:
    """Per-distance-bin outcome counts and derived rates."""

    bin_width_m: float
    bin_centers: np.ndarray
    counts: np.ndarray            # (5 outcomes, bins)
    cbr_series: np.ndarray
    duration_s: float
    warmup_s: float
    config: ScenarioConfig = field(repr=False, default=None)
    seed: int = 0

    @property
    def attempts(self):
        return self.counts.sum(axis=0)

    @property
    def pdr(self):
        return self._rate(Outcome.OK)

    def share(self, outcome):
        return self._rate(outcome)

    def _rate(self, outcome):
        attempts = self.attempts
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(attempts > 0, self.counts[outcome] / attempts, np.nan)

    @property
    def cbr(self):
        return float(np.mean(self.cbr_series)) if self.cbr_series.size else float("nan")

    def pooled_share(self, outcome):
        total = self.counts.sum()
        return float(self.counts[outcome].sum() / total) if total else float("nan")


def merge_stats(stats_list):
    """Pool outcome counts (and CBR samples) across runs of one scenario."""
    if not stats_list:
        raise ConfigurationError("nothing to merge")
    first = stats_list[0]
    counts = sum(s.counts for s in stats_list)
    series = np.concatenate([s.cbr_series for s in stats_list])
    return SimStats(bin_width_m=first.bin_width_m, bin_centers=first.bin_centers,
                    counts=counts, cbr_series=series, duration_s=first.duration_s,
                    warmup_s=first.warmup_s, config=first.config, seed=first.seed)


def build_scenario(cfg, length_m, seed, **kwargs):
    """World with vehicles every 1/beta meters on a ring of ~length_m."""
    if length_m * cfg.beta < 50:
        raise ConfigurationError(
            "scenario too small: need length_m * beta >= 50 vehicles")
    return Simulator(cfg, length_m, seed, **kwargs)


def run(cfg, duration_s, length_m, seed, warmup_s=3.0, bin_width_m=25.0,
        max_distance_m=1000.0, trace_path=None, **kwargs):
    """Simulate and bin reception outcomes by transmitter-receiver distance.

    ``duration_s`` covers warmup plus measurement; statistics start after
    ``warmup_s``.  CBR is sampled every 100 sub-frames during measurement.
    """
    if duration_s <= warmup_s:
        raise ConfigurationError("duration_s must exceed warmup_s")
    sim = build_scenario(cfg, length_m, seed, **kwargs)
    n_bins = int(math.ceil(max_distance_m / bin_width_m))
    bin_of = np.minimum((sim.distance / bin_width_m).astype(np.int64), n_bins - 1)
    in_range = sim.distance <= max_distance_m
    np.fill_diagonal(in_range, False)

    counts = np.zeros((len(Outcome), n_bins), dtype=np.int64)
    warm_subframes = int(round(warmup_s * SUBFRAMES_PER_SECOND))
    total_subframes = int(round(duration_s * SUBFRAMES_PER_SECOND))
    cbr_samples = []
    trace_file = trace_writer = None
    if trace_path is not None:
        trace_file = open(trace_path, "w", newline="")
        trace_writer = csv.writer(trace_file)
        trace_writer.writerow(["subframe", "tx_id", "rx_id", "distance_m", "outcome"])

    def on_rx(tx_ids, outcomes):
        if sim.now < warm_subframes:
            return
        mask = in_range[tx_ids, :]
        np.add.at(counts, (outcomes[mask], bin_of[tx_ids, :][mask]), 1)
        if trace_writer is not None:
            for j, v_tx in enumerate(tx_ids):
                for rx in np.nonzero(mask[j])[0]:
                    ev = RxEvent(subframe=sim.now, tx_id=int(v_tx), rx_id=int(rx),
                                 distance_m=float(sim.distance[v_tx, rx]),
                                 outcome=Outcome(int(outcomes[j, rx])))
                    trace_writer.writerow([ev.subframe, ev.tx_id, ev.rx_id,
                                           f"{ev.distance_m:.3f}", ev.outcome.name])

    try:
        for t in range(total_subframes):
            sim.step(on_rx=on_rx)
            if t >= warm_subframes and (t + 1) % 100 == 0:
                cbr_samples.append(sim.measure_cbr())
    finally:
        if trace_file is not None:
            trace_file.close()

    centers = (np.arange(n_bins) + 0.5) * bin_width_m
    return SimStats(bin_width_m=bin_width_m, bin_centers=centers, counts=counts,
                    cbr_series=np.asarray(cbr_samples), duration_s=duration_s,
                    warmup_s=warmup_s, config=cfg, seed=seed)
