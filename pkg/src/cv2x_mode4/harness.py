"""Scenario sweeps, analytic-vs-simulated comparison and CSV emission.

A run manifest is a YAML file with flat keys; list-valued scenario keys are
sweep axes expanded as a cartesian product (optionally several groups under
``scenarios:``).  Without a file, the built-in manifest reproduces the three
published evaluation groups (two power levels at 10 Hz / 4 sub-channels,
20 Hz / 4 sub-channels, 10 Hz / 2 sub-channels, three densities each).

All CSV output is byte-deterministic for a fixed manifest and seeds: floats
are formatted with a fixed precision, files are written atomically, and
scenario order follows the manifest.
"""

from __future__ import annotations

import itertools
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .analytic import AnalyticModel, ScenarioConfig, default_distance_grid
from .errors import ConfigurationError, ModelError
from .propagation import BlerTable, PathlossModel, RadioConfig, ShadowingModel, default_bler_table
from .simulator import Outcome, merge_stats, run

OUT_DIR_ENV = "CV2X_MODE4_OUT_DIR"
CBR_FLAG_LEVEL = 0.8
CBR_FLAG = "above recommended CBR"

DEFAULT_SCENARIO_GROUPS = (
    {"tx_power_dbm": [20.0, 23.0], "beta": [0.1, 0.2, 0.3],
     "lambda_hz": 10, "subchannels": 4},
    {"tx_power_dbm": [20.0], "beta": [0.1, 0.2, 0.3],
     "lambda_hz": 20, "subchannels": 4},
    {"tx_power_dbm": [20.0], "beta": [0.1, 0.2, 0.3],
     "lambda_hz": 10, "subchannels": 2},
)

SCENARIO_AXES = ("tx_power_dbm", "beta", "lambda_hz", "subchannels", "mcs")


@dataclass(frozen=True)
class ScenarioSpec:
    """One expanded scenario: the swept symbols plus the shared channel."""

    tx_power_dbm: float
    beta: float
    lambda_hz: int
    subchannels: int
    mcs: Optional[str] = None

    @property
    def name(self):
        return (f"pt{self.tx_power_dbm:g}_beta{self.beta:g}"
                f"_lam{self.lambda_hz}_s{self.subchannels}")


@dataclass
class RunManifest:
    scenarios: list
    seeds: list = field(default_factory=lambda: [1, 2, 3])
    duration_s: float = 23.0
    warmup_s: float = 3.0
    ring_length_m: float = 2000.0
    bin_width_m: float = 25.0
    max_distance_m: float = 1000.0
    distance_step_m: float = 10.0
    out_dir: str = "out"
    # shared channel/radio parameters
    sensing_threshold_dbm: float = -90.4
    noise_power_dbm: float = -95.0
    shadowing_sigma_db: float = 3.0
    pathloss_ref_db: float = 3.4
    pathloss_per_decade: float = 40.0
    pathloss_min_distance_m: float = 1.0
    packet_size_bytes: int = 190
    step3_delta_db: float = 0.5
    bler_csv: dict = field(default_factory=dict)

    def config_for(self, spec: ScenarioSpec) -> ScenarioConfig:
        bler = None
        if spec.mcs is not None:
            if spec.mcs in self.bler_csv:
                bler = BlerTable.from_csv(self.bler_csv[spec.mcs], mcs_id=spec.mcs)
            else:
                bler = default_bler_table(spec.mcs)
        return ScenarioConfig(
            beta=spec.beta,
            lambda_hz=spec.lambda_hz,
            subchannels=spec.subchannels,
            packet_size_bytes=self.packet_size_bytes,
            radio=RadioConfig(tx_power_dbm=spec.tx_power_dbm,
                              sensing_threshold_dbm=self.sensing_threshold_dbm,
                              noise_power_dbm=self.noise_power_dbm),
            pathloss=PathlossModel(reference_loss_db=self.pathloss_ref_db,
                                   exponent_coeff=self.pathloss_per_decade,
                                   min_distance_m=self.pathloss_min_distance_m),
            shadowing=ShadowingModel(sigma_db=self.shadowing_sigma_db),
            bler=bler,
            step3_delta_db=self.step3_delta_db,
        )


def _expand_group(group):
    axes = []
    for key in SCENARIO_AXES:
        if key in group:
            val = group[key]
            axes.append([(key, v) for v in (val if isinstance(val, list) else [val])])
    unknown = set(group) - set(SCENARIO_AXES)
    if unknown:
        raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
    specs = []
    for combo in itertools.product(*axes):
        kv = dict(combo)
        specs.append(ScenarioSpec(
            tx_power_dbm=float(kv.get("tx_power_dbm", 20.0)),
            beta=float(kv["beta"]),
            lambda_hz=int(kv.get("lambda_hz", 10)),
            subchannels=int(kv.get("subchannels", 4)),
            mcs=kv.get("mcs"),
        ))
    return specs


def default_manifest(**overrides):
    specs = [s for g in DEFAULT_SCENARIO_GROUPS for s in _expand_group(dict(g))]
    return RunManifest(scenarios=specs, **overrides)


def load_manifest(path=None):
    """Build a manifest from a YAML file (or the built-in default)."""
    if path is None:
        return default_manifest()
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: manifest must be a mapping")
    groups = raw.pop("scenarios", None)
    flat_axes = {k: raw.pop(k) for k in SCENARIO_AXES if k in raw}
    if groups is None:
        groups = [flat_axes] if flat_axes else []
    elif flat_axes:
        raise ConfigurationError(
            f"{path}: give either top-level scenario axes or a scenarios list, not both")
    specs = []
    for g in groups:
        if not isinstance(g, dict):
            raise ConfigurationError(f"{path}: each scenarios entry must be a mapping")
        specs.extend(_expand_group(g))
    known = {f for f in RunManifest.__dataclass_fields__ if f != "scenarios"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(f"{path}: unknown manifest keys: {sorted(unknown)}")
    return RunManifest(scenarios=specs, **raw)


# -- metrics -----------------------------------------------------------------

def mad(m_s, m_a):
    """Mean absolute deviation between two probability vectors, in percent."""
    m_s = np.asarray(m_s, dtype=float)
    m_a = np.asarray(m_a, dtype=float)
    if m_s.shape != m_a.shape or m_s.ndim != 1 or m_s.size == 0:
        raise ConfigurationError("MAD needs two equal-length non-empty vectors")
    return float(100.0 / m_s.size * np.abs(m_s - m_a).sum())


# -- CSV helpers --------------------------------------------------------------

def _fmt(x):
    if x is None:
        return "nan"
    x = float(x)
    return "nan" if np.isnan(x) else f"{x:.9g}"


def _write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(c) if isinstance(c, str) else _fmt(c) for c in row) + "\n")
    os.replace(tmp, path)
    return path


def resolve_out_dir(cli_value=None, manifest=None):
    """Precedence: explicit flag, then environment override, then manifest."""
    if cli_value:
        return Path(cli_value)
    env = os.environ.get(OUT_DIR_ENV)
    if env:
        return Path(env)
    return Path(manifest.out_dir if manifest else "out")


# -- pipelines ----------------------------------------------------------------

@dataclass
class ScenarioOutcome:
    spec: ScenarioSpec
    cbr_analytic: float = float("nan")
    cbr_sim: float = float("nan")
    mad_pdr: float = float("nan")
    mad_hd: float = float("nan")
    mad_sen: float = float("nan")
    mad_pro: float = float("nan")
    mad_col: float = float("nan")
    flag: str = ""
    error: Optional[str] = None


@dataclass
class ComparisonReport:
    rows: list
    files: list

    @property
    def ok(self):
        return all(r.error is None for r in self.rows)


CURVE_HEADER = ["distance_m", "pdr", "hd", "sen", "pro", "col", "cbr"]
REPORT_HEADER = ["p_t", "beta", "mad_pdr", "mad_hd", "mad_sen", "mad_pro",
                 "mad_col", "cbr_analytic", "cbr_sim"]


def _analytic_rows(model, distances, ring_length_m=None):
    cbr = model.cbr
    for b in model.curve(distances, ring_length_m):
        yield [b.distance_m, b.pdr, b.hd, b.sen, b.pro, b.col, cbr]


def run_analytic(manifest, out_dir=None):
    """One analytic curve CSV per scenario on the manifest's distance grid.

    Configuration errors are reported per scenario; the remaining scenarios
    still run.  Returns (paths, failures).
    """
    out = resolve_out_dir(out_dir, manifest)
    if not manifest.scenarios:
        print("warning: empty scenario matrix, nothing to do", file=sys.stderr)
        return [], []
    grid = default_distance_grid(manifest.max_distance_m, manifest.distance_step_m)
    paths, failures = [], []
    for spec in manifest.scenarios:
        try:
            model = AnalyticModel(manifest.config_for(spec))
            rows = _analytic_rows(model, grid)
            paths.append(_write_csv(out / f"{spec.name}_analytic.csv", CURVE_HEADER, rows))
        except (ConfigurationError, ModelError) as exc:
            failures.append((spec, str(exc)))
            print(f"error: scenario {spec.name}: {exc}", file=sys.stderr)
    return paths, failures


def _simulate_scenario(manifest, spec, cfg, out, trace=False):
    stats = []
    for seed in manifest.seeds:
        trace_path = (out / f"{spec.name}_seed{seed}_trace.csv") if trace else None
        stats.append(run(cfg, duration_s=manifest.duration_s,
                         length_m=manifest.ring_length_m, seed=seed,
                         warmup_s=manifest.warmup_s,
                         bin_width_m=manifest.bin_width_m,
                         max_distance_m=manifest.max_distance_m,
                         trace_path=trace_path))
    return merge_stats(stats)


def _sim_rows(stats):
    cbr = stats.cbr
    shares = {o: stats.share(o) for o in
              (Outcome.HD, Outcome.SEN, Outcome.PRO, Outcome.COL)}
    for i, center in enumerate(stats.bin_centers):
        yield [center, stats.pdr[i], shares[Outcome.HD][i], shares[Outcome.SEN][i],
               shares[Outcome.PRO][i], shares[Outcome.COL][i], cbr,
               int(stats.attempts[i])]


def run_simulate(manifest, out_dir=None, trace=False):
    """Simulate each scenario (all seeds pooled) and emit per-bin curves."""
    out = resolve_out_dir(out_dir, manifest)
    if not manifest.scenarios:
        print("warning: empty scenario matrix, nothing to do", file=sys.stderr)
        return [], []
    if not manifest.seeds:
        raise ConfigurationError("simulation requires at least one seed")
    paths, failures = [], []
    for spec in manifest.scenarios:
        try:
            cfg = manifest.config_for(spec)
            merged = _simulate_scenario(manifest, spec, cfg, out, trace)
            paths.append(_write_csv(out / f"{spec.name}_sim.csv",
                                    CURVE_HEADER + ["attempts"], _sim_rows(merged)))
        except (ConfigurationError, ModelError) as exc:
            failures.append((spec, str(exc)))
            print(f"error: scenario {spec.name}: {exc}", file=sys.stderr)
    return paths, failures


def run_compare(manifest, out_dir=None):
    """Per scenario: simulate (seeds pooled), evaluate the analytic model on
    the simulator's bin centers (ring geometry matched), emit both curves and
    a MAD report per (lambda, subchannels) group with the published columns."""
    out = resolve_out_dir(out_dir, manifest)
    rows, files = [], []
    if not manifest.scenarios:
        print("warning: empty scenario matrix, nothing to do", file=sys.stderr)
        return ComparisonReport(rows=[], files=[])
    if not manifest.seeds:
        raise ConfigurationError("compare requires at least one seed")
    for spec in manifest.scenarios:
        outcome = ScenarioOutcome(spec=spec)
        rows.append(outcome)
        try:
            cfg = manifest.config_for(spec)
            model = AnalyticModel(cfg)
            outcome.cbr_analytic = model.cbr
            if outcome.cbr_analytic >= CBR_FLAG_LEVEL:
                outcome.flag = CBR_FLAG
            merged = _simulate_scenario(manifest, spec, cfg, out)
            outcome.cbr_sim = merged.cbr
            n_veh = int(round(manifest.ring_length_m * cfg.beta))
            ring = n_veh / cfg.beta
            curve = model.curve(merged.bin_centers, ring_length_m=ring)
            mask = merged.attempts > 0
            centers = merged.bin_centers[mask]
            ana = {q: np.array([getattr(b, q) for b in curve])[mask]
                   for q in ("pdr", "hd", "sen", "pro", "col")}
            sim = {"pdr": merged.pdr[mask],
                   "hd": merged.share(Outcome.HD)[mask],
                   "sen": merged.share(Outcome.SEN)[mask],
                   "pro": merged.share(Outcome.PRO)[mask],
                   "col": merged.share(Outcome.COL)[mask]}
            outcome.mad_pdr = mad(sim["pdr"], ana["pdr"])
            outcome.mad_hd = mad(sim["hd"], ana["hd"])
            outcome.mad_sen = mad(sim["sen"], ana["sen"])
            outcome.mad_pro = mad(sim["pro"], ana["pro"])
            outcome.mad_col = mad(sim["col"], ana["col"])
            pair_rows = [[centers[i],
                          sim["pdr"][i], ana["pdr"][i], sim["hd"][i], ana["hd"][i],
                          sim["sen"][i], ana["sen"][i], sim["pro"][i], ana["pro"][i],
                          sim["col"][i], ana["col"][i]]
                         for i in range(centers.size)]
            files.append(_write_csv(
                out / f"{spec.name}_compare.csv",
                ["distance_m", "pdr_sim", "pdr_analytic", "hd_sim", "hd_analytic",
                 "sen_sim", "sen_analytic", "pro_sim", "pro_analytic",
                 "col_sim", "col_analytic"],
                pair_rows))
            if outcome.flag:
                print(f"note: scenario {spec.name} flagged: {outcome.flag}",
                      file=sys.stderr)
        except (ConfigurationError, ModelError) as exc:
            outcome.error = str(exc)
            print(f"error: scenario {spec.name}: {exc}", file=sys.stderr)

    # Report files mirror the published tables: one per (lambda, subchannels).
    def group_key(r):
        return (r.spec.lambda_hz, r.spec.subchannels)

    for key in sorted({group_key(r) for r in rows}):
        lam, s = key
        table = [[_fmt(r.spec.tx_power_dbm), _fmt(r.spec.beta), r.mad_pdr, r.mad_hd,
                  r.mad_sen, r.mad_pro, r.mad_col, r.cbr_analytic, r.cbr_sim]
                 for r in rows if group_key(r) == key]
        files.append(_write_csv(out / f"report_lam{lam}_s{s}.csv",
                                REPORT_HEADER, table))
    return ComparisonReport(rows=rows, files=files)


def run_sweep(manifest, out_dir=None):
    """Analytic-only sweep over the manifest matrix: per-scenario curves plus
    one summary CSV with the channel load and PDR probes per scenario."""
    out = resolve_out_dir(out_dir, manifest)
    if not manifest.scenarios:
        print("warning: empty scenario matrix, nothing to do", file=sys.stderr)
        return [], []
    paths, failures = run_analytic(manifest, out)
    probe = [100.0, 300.0, 500.0]
    summary = []
    failed_names = {spec.name for spec, _ in failures}
    for spec in manifest.scenarios:
        if spec.name in failed_names:
            summary.append([_fmt(spec.tx_power_dbm), _fmt(spec.beta),
                            spec.lambda_hz, spec.subchannels,
                            float("nan"), float("nan"), float("nan"), float("nan")])
            continue
        model = AnalyticModel(manifest.config_for(spec))
        pdrs = [model.breakdown(d).pdr for d in probe]
        summary.append([_fmt(spec.tx_power_dbm), _fmt(spec.beta),
                        spec.lambda_hz, spec.subchannels, model.cbr] + pdrs)
    paths.append(_write_csv(
        out / "sweep_summary.csv",
        ["p_t", "beta", "lambda_hz", "subchannels", "cbr",
         "pdr_100m", "pdr_300m", "pdr_500m"],
        summary))
    return paths, failures
