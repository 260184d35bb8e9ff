"""Independent sampling/enumeration oracles used by the test suite.

These deliberately re-derive each quantity from its probabilistic definition
(by drawing shadowing samples, candidate subsets, etc.) instead of calling
the closed/numerical forms under test.
"""

import numpy as np

from cv2x_mode4.propagation import (
    BlerTable,
    PathlossModel,
    RadioConfig,
    ShadowingModel,
    combine_noise_dbm,
    pathloss_db,
)


def random_channel(rng):
    """A randomized but non-degenerate channel configuration."""
    path = PathlossModel(
        reference_loss_db=rng.uniform(0.0, 50.0),
        exponent_coeff=rng.uniform(20.0, 45.0),
        min_distance_m=1.0,
    )
    shadow = ShadowingModel(sigma_db=rng.uniform(2.0, 6.0))
    radio = RadioConfig(
        tx_power_dbm=rng.uniform(15.0, 23.0),
        sensing_threshold_dbm=-90.4,
        noise_power_dbm=rng.uniform(-98.0, -92.0),
    )
    bler = BlerTable.logistic(
        "mcs", snr50_db=rng.uniform(1.0, 6.0), steepness_per_db=rng.uniform(0.8, 2.5))
    return radio, path, shadow, bler


def sensing_midpoint_distance(radio, path):
    """Distance where the mean received power hits the sensing threshold."""
    margin = radio.tx_power_dbm - path.reference_loss_db - radio.sensing_threshold_dbm
    return 10.0 ** (margin / path.exponent_coeff)


def smoothed_se(successes, n):
    """Binomial standard error with add-half smoothing (robust near 0/1)."""
    p = (successes + 0.5) / (n + 1.0)
    return np.sqrt(p * (1.0 - p) / n)


def mc_sensing_loss(d, radio, path, shadow, n=10**6, seed=0):
    """Fraction of shadowing draws received below the sensing threshold."""
    rng = np.random.default_rng(seed)
    p_r = radio.tx_power_dbm - pathloss_db(d, path) - rng.normal(0.0, shadow.sigma_db, n)
    k = int(np.count_nonzero(p_r <= radio.sensing_threshold_dbm))
    return k / n, smoothed_se(k, n)


def mc_propagation_loss(d, radio, path, shadow, bler, n=10**6, seed=0):
    """Draw shadowing, keep packets above the sensing threshold, then flip a
    BLER(SNR) coin for each survivor."""
    rng = np.random.default_rng(seed)
    p_r = radio.tx_power_dbm - pathloss_db(d, path) - rng.normal(0.0, shadow.sigma_db, n)
    keep = p_r > radio.sensing_threshold_dbm
    n_keep = int(np.count_nonzero(keep))
    if n_keep == 0:
        return 0.0, 0.0
    snr = p_r[keep] - radio.noise_power_dbm
    lost = rng.random(n_keep) < bler(snr)
    k = int(np.count_nonzero(lost))
    return k / n_keep, smoothed_se(k, n_keep)


def mc_interference_failure(d_tr, d_ir, radio, path, shadow, bler, n=10**6, seed=0):
    """Joint shadowing draws for signal and interferer, conditioned on the
    signal being sensed; losses that would have happened without the
    interferer (same uniform draw) are subtracted out."""
    rng = np.random.default_rng(seed)
    p_r = radio.tx_power_dbm - pathloss_db(d_tr, path) - rng.normal(0.0, shadow.sigma_db, n)
    p_i = radio.tx_power_dbm - pathloss_db(d_ir, path) - rng.normal(0.0, shadow.sigma_db, n)
    keep = p_r > radio.sensing_threshold_dbm
    n_keep = int(np.count_nonzero(keep))
    if n_keep == 0:
        return 0.0, 0.0
    p_r = p_r[keep]
    p_i = p_i[keep]
    snr = p_r - radio.noise_power_dbm
    sinr = p_r - combine_noise_dbm(p_i, radio.noise_power_dbm)
    u = rng.random(n_keep)
    lost_noise_only = u < bler(snr)
    lost_with_interferer = u < bler(sinr)
    extra = int(np.count_nonzero(lost_with_interferer & ~lost_noise_only))
    survivors = n_keep - int(np.count_nonzero(lost_noise_only))
    if survivors == 0:
        return 0.0, 0.0
    # Paired-draw decomposition of (p_sinr - d_pro) / (1 - d_pro): with a
    # shared uniform the numerator is a plain indicator mean.
    est = extra / survivors
    se = smoothed_se(extra, n_keep) / (survivors / n_keep)
    return est, se


def mc_same_resource_choice(c_a, n_a, n_c, n_total, trials=10**6, seed=0):
    """Two vehicles each draw n_c candidates from their own n_a-sized
    assignable set (sharing c_a resources), then pick one uniformly.
    Returns the fraction of trials where both picked the same resource."""
    rng = np.random.default_rng(seed)
    hits = 0
    batch = 200_000
    done = 0
    while done < trials:
        m = min(batch, trials - done)
        # Sets are fixed: A = [0, n_a), B = [n_a - c_a, 2*n_a - c_a); overlap c_a.
        pick_a = _uniform_subset_pick(rng, n_a, n_c, m)
        pick_b = _uniform_subset_pick(rng, n_a, n_c, m) + (n_a - c_a)
        hits += int(np.count_nonzero(pick_a == pick_b))
        done += m
    return hits / trials, smoothed_se(hits, trials)


def _uniform_subset_pick(rng, n_set, n_sub, m):
    """For each of m trials, draw an n_sub-subset of range(n_set) uniformly
    and return one uniformly chosen member."""
    # Choosing a uniform subset then a uniform member is the same as a
    # uniform member first, but keep the two-stage draw to mirror the SPS
    # candidate-list process being modelled.
    scores = rng.random((m, n_set))
    subset_idx = np.argpartition(scores, n_sub - 1, axis=1)[:, :n_sub]
    pick_col = rng.integers(0, n_sub, m)
    return subset_idx[np.arange(m), pick_col]


def mc_common_exclusions(psr_by_vehicle, n_total, trials=4000, seed=0):
    """Sample sensed-vehicle sets for two observers with the given per-vehicle
    sensing probabilities and count resources excluded by both observers.

    Reservations are a random permutation tiled along the road (spatial reuse
    every n_total vehicles): within a sensing neighbourhood the scheduling
    process keeps reservations essentially distinct, which is the regime the
    exclusion-overlap model describes."""
    rng = np.random.default_rng(seed)
    probs = np.asarray(psr_by_vehicle, dtype=float)
    n_veh = probs.size
    idx = np.arange(n_veh)
    total = 0.0
    for _ in range(trials):
        perm = rng.permutation(n_total)
        resources = perm[idx % n_total]
        sensed_1 = rng.random(n_veh) < probs
        sensed_2 = rng.random(n_veh) < probs
        common = np.intersect1d(resources[sensed_1], resources[sensed_2])
        total += common.size
    return total / trials
