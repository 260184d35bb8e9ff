"""Acceptance suite: one test per exit criterion, each printing a PASS line.

Criterion 5 runs the full desk-scale validation campaign (12 scenarios,
2 km ring, 20 s measured, 3 seeds) through a session fixture shared with
criterion 8; expect the suite to take on the order of 20 minutes.

Run with ``pytest tests/test_acceptance.py -v -s`` for live progress.
"""

import numpy as np
import pytest

from cv2x_mode4.analytic import (
    AnalyticModel,
    ScenarioConfig,
    alpha_weight,
    channel_busy_ratio,
    half_duplex_loss,
    pdr_curve,
    selection_collision_probability,
)
from cv2x_mode4.harness import RunManifest, ScenarioSpec, default_manifest, run_compare
from cv2x_mode4.propagation import (
    RadioConfig,
    interference_failure,
    propagation_loss,
    sensing_loss,
)
from cv2x_mode4.simulator import Outcome, run
from oracles import (
    mc_interference_failure,
    mc_propagation_loss,
    mc_same_resource_choice,
    mc_sensing_loss,
    random_channel,
    sensing_midpoint_distance,
)

CANONICAL = "pt20_beta0.1_lam10_s4"


def note(msg):
    print(f"\n[acceptance] {msg}")


@pytest.fixture(scope="session")
def desk_scale_report(tmp_path_factory):
    """Full published matrix at desk scale: 2 km ring, 20 s measured, 3 seeds."""
    out = tmp_path_factory.mktemp("compare")
    manifest = default_manifest(seeds=[1, 2, 3], duration_s=23.0, warmup_s=3.0,
                                ring_length_m=2000.0, bin_width_m=25.0,
                                max_distance_m=1000.0)
    report = run_compare(manifest, out)
    for r in report.rows:
        print(f"[compare] {r.spec.name}: cbr_ana={r.cbr_analytic:.3f} "
              f"cbr_sim={r.cbr_sim:.3f} mad_pdr={r.mad_pdr:.2f} "
              f"mad_col={r.mad_col:.2f} {r.flag}")
    return report, out


def test_c01_half_duplex_exactness():
    assert half_duplex_loss(10) == 0.010
    assert half_duplex_loss(20) == 0.020
    # Desk-scale ring: on short rings the sub-frame load balancing of the
    # RSSI ranking depresses the half-duplex rate further than the published
    # residuals; at 2 km it sits within the published deviation levels.
    for lam, expect in [(10, 0.010), (20, 0.020)]:
        stats = run(ScenarioConfig(beta=0.1, lambda_hz=lam), duration_s=8.0,
                    length_m=2000.0, seed=101 + lam, warmup_s=3.0)
        attempts = int(stats.counts.sum())
        assert attempts >= 10 ** 5
        pooled = stats.pooled_share(Outcome.HD)
        assert pooled == pytest.approx(expect, abs=0.002)
    note("criterion 1 PASS: half-duplex loss exact analytically, "
         "simulator pooled estimate within ±0.002")


def test_c02_survival_identity():
    rng = np.random.default_rng(2024)
    hd, sen, pro, col = rng.random((4, 10_000))
    product = (1 - hd) * (1 - sen) * (1 - pro) * (1 - col)
    sum_form = 1.0 - (hd
                      + (1 - hd) * sen
                      + (1 - hd) * (1 - sen) * pro
                      + (1 - hd) * (1 - sen) * (1 - pro) * col)
    worst = float(np.max(np.abs(product - sum_form)))
    assert worst < 1e-12
    note(f"criterion 2 PASS: product/sum identity within 1e-12 "
         f"(worst {worst:.2e} over 10^4 tuples)")


def test_c03_normalization_suite(desk_scale_report):
    report, out = desk_scale_report
    checked = 0
    for cfg in [ScenarioConfig(beta=0.1), ScenarioConfig(beta=0.3, subchannels=2)]:
        for b in pdr_curve(cfg, np.arange(0.0, 1001.0, 100.0), ring_length_m=2000.0):
            total = b.pdr + b.hd + b.sen + b.pro + b.col
            assert abs(total - 1.0) < 1e-9
            for v in (b.pdr, b.hd, b.sen, b.pro, b.col,
                      b.hd_raw, b.sen_raw, b.pro_raw, b.col_raw):
                assert -1e-12 <= v <= 1.0 + 1e-12
            checked += 1
    for f in sorted(out.glob("*_compare.csv")):
        rows = f.read_text().splitlines()[1:]
        for line in rows:
            vals = [float(x) for x in line.split(",")]
            sim_total = vals[1] + vals[3] + vals[5] + vals[7] + vals[9]
            ana_total = vals[2] + vals[4] + vals[6] + vals[8] + vals[10]
            assert abs(ana_total - 1.0) < 1e-9
            assert abs(sim_total - 1.0) < 1e-9
            checked += 1
    note(f"criterion 3 PASS: {checked} emitted breakdowns normalized within 1e-9")


def test_c04_cbr_reproduction():
    targets = {
        20.0: [(0.1, 0.23), (0.2, 0.44), (0.3, 0.62)],
        23.0: [(0.1, 0.27), (0.2, 0.51), (0.3, 0.69)],
    }
    worst = 0.0
    for p_t, rows in targets.items():
        for beta, expect in rows:
            cfg = ScenarioConfig(beta=beta, radio=RadioConfig(tx_power_dbm=p_t))
            got = channel_busy_ratio(cfg)
            worst = max(worst, abs(got - expect))
            assert got == pytest.approx(expect, abs=0.08)
    for p_t in (20.0, 23.0):
        vals = [channel_busy_ratio(ScenarioConfig(
            beta=b, radio=RadioConfig(tx_power_dbm=p_t)))
            for b in np.linspace(0.05, 0.5, 10)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    for beta in (0.1, 0.2, 0.3):
        vals = [channel_busy_ratio(ScenarioConfig(
            beta=beta, radio=RadioConfig(tx_power_dbm=p)))
            for p in np.linspace(12.0, 23.0, 12)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    note(f"criterion 4 PASS: six published CBR levels within ±0.08 "
         f"(worst |err| {worst:.3f}); monotone in density and power")


def test_c05_model_vs_simulator_mad(desk_scale_report):
    report, _ = desk_scale_report
    assert report.ok, [r.error for r in report.rows if r.error]
    assert len(report.rows) == 12
    bounded = [r for r in report.rows if r.cbr_analytic < 0.8]
    unbounded = [r for r in report.rows if r.cbr_analytic >= 0.8]
    assert len(bounded) == 10
    for r in bounded:
        assert r.mad_pdr <= 5.0, f"{r.spec.name}: MAD(PDR) {r.mad_pdr:.2f} > 5"
    for r in unbounded:
        assert r.flag == "above recommended CBR"
        assert np.isfinite(r.mad_pdr)  # reported, not bounded
    worst = max(r.mad_pdr for r in bounded)
    note(f"criterion 5 PASS: MAD(PDR) <= 5% for all {len(bounded)} scenarios "
         f"with CBR < 0.8 (worst {worst:.2f}%); {len(unbounded)} high-load "
         f"scenarios flagged and reported")


def test_c06_monte_carlo_oracle_equivalence():
    rng = np.random.default_rng(777)
    for trial in range(5):
        radio, path, shadow, bler = random_channel(rng)
        d50 = sensing_midpoint_distance(radio, path)

        d = d50 * 10 ** rng.uniform(-0.05, 0.05)
        est, se = mc_sensing_loss(d, radio, path, shadow, n=10**6, seed=9000 + trial)
        assert abs(sensing_loss(d, radio, path, shadow) - est) < 3 * max(se, 1e-6)

        d = d50 * 10 ** rng.uniform(-0.15, 0.02)
        est, se = mc_propagation_loss(d, radio, path, shadow, bler,
                                      n=10**6, seed=9100 + trial)
        assert abs(propagation_loss(d, radio, path, shadow, bler) - est) \
            < 3 * max(se, 1e-5)

        d_tr = d50 * 10 ** rng.uniform(-0.3, 0.0)
        d_ir = d_tr * rng.uniform(0.4, 1.6)
        est, se = mc_interference_failure(d_tr, d_ir, radio, path, shadow, bler,
                                          n=10**6, seed=9200 + trial)
        assert abs(interference_failure(d_tr, d_ir, radio, path, shadow, bler)
                   - est) < 3 * max(se, 1e-5)
    note("criterion 6 PASS: sensing/propagation/interference probabilities "
         "match their 10^6-draw sampling oracles within 3 SE on 5 random configs")


def test_c07_selection_brute_force():
    n_total, n_a, n_c = 20, 10, 4
    for c_a, seed in [(2, 71), (5, 72), (8, 73), (10, 74)]:
        model = selection_collision_probability(c_a, n_a, n_c)
        est, se = mc_same_resource_choice(c_a, n_a, n_c, n_total,
                                          trials=10**6, seed=seed)
        assert abs(model - est) < 3 * se
    note("criterion 7 PASS: same-resource probability matches 10^6-trial "
         "candidate-subset enumeration within 3 SE on the toy instance")


def test_c08_collision_peak_interior(desk_scale_report):
    report, out = desk_scale_report
    rows = (out / f"{CANONICAL}_compare.csv").read_text().splitlines()[1:]
    sim_col = np.array([float(r.split(",")[9]) for r in rows])
    peak_sim = int(np.argmax(sim_col))
    assert 0 < peak_sim < sim_col.size - 1

    curve = pdr_curve(ScenarioConfig(beta=0.1), np.arange(0.0, 1001.0, 10.0))
    ana_col = np.array([b.col for b in curve])
    peak_ana = int(np.argmax(ana_col))
    assert 0 < peak_ana < ana_col.size - 1
    note(f"criterion 8 PASS: collision share peaks at interior distance "
         f"(sim bin {peak_sim} of {sim_col.size}, analytic point {peak_ana} "
         f"of {ana_col.size}, ~{peak_ana * 10} m)")


def test_c09_monotonicity_suite():
    cfg = ScenarioConfig(beta=0.1)
    curve = pdr_curve(cfg, np.arange(0.0, 1001.0, 10.0), ring_length_m=2000.0)
    sen = [b.sen for b in curve]
    pdr = [b.pdr for b in curve]
    assert all(b >= a - 1e-12 for a, b in zip(sen, sen[1:]))
    assert all(b <= a + 1e-12 for a, b in zip(pdr, pdr[1:]))

    model = AnalyticModel(cfg)
    assert np.all(model.r_psr[0] >= model.r_psr - 1e-9)

    for cbr, expect in [(0.0, 0.0), (0.2, 0.0), (0.45, 0.5), (0.7, 1.0), (1.0, 1.0)]:
        assert alpha_weight(cbr) == expect
    note("criterion 9 PASS: sensing share non-decreasing, PDR non-increasing, "
         "autocorrelation peaks at zero lag, blending weight exact at probes")


def test_c10_compare_determinism(tmp_path):
    spec = ScenarioSpec(tx_power_dbm=20.0, beta=0.1, lambda_hz=10, subchannels=4)
    manifest = RunManifest(scenarios=[spec], seeds=[11, 12], duration_s=5.0,
                           warmup_s=3.0, ring_length_m=600.0, bin_width_m=50.0,
                           max_distance_m=300.0)
    a_dir, b_dir = tmp_path / "a", tmp_path / "b"
    run_compare(manifest, a_dir)
    run_compare(manifest, b_dir)
    names_a = sorted(p.name for p in a_dir.iterdir())
    names_b = sorted(p.name for p in b_dir.iterdir())
    assert names_a == names_b and names_a
    for name in names_a:
        assert (a_dir / name).read_bytes() == (b_dir / name).read_bytes()
    note(f"criterion 10 PASS: {len(names_a)} CSVs byte-identical across reruns")
