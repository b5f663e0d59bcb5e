//! Simulation and Monte Carlo runs.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::filters::{FilterRegistry, FilterSettings, Label};
use crate::harness::scenario::{to_absolute, to_relative, ScenarioConfig};
use crate::metrics::{mc_aggregate, ospa, rms_errors, squared_errors, OspaParams};
use crate::models::{BearingsModel, TargetState};
use crate::particles::MoveStats;
use crate::rng::{run_seed, stream, SimRng, Stage};

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    /// Absolute states of the living targets per step, with target indices.
    pub truth: Vec<Vec<(usize, TargetState)>>,
    pub scans: Vec<Vec<f64>>,
}

pub fn simulate(cfg: &ScenarioConfig, model: &BearingsModel, rng: &mut SimRng) -> Simulation {
    let n = cfg.n_steps();
    let mut truth = Vec::with_capacity(n);
    let mut scans = Vec::with_capacity(n);
    for k in 0..n {
        let alive = cfg.truth(k);
        let o = model.observer_state(k);
        let rel: Vec<TargetState> = alive.iter().map(|(_, x)| to_relative(x, &o)).collect();
        scans.push(model.sensor.generate_scan(&rel, rng));
        truth.push(alive);
    }
    Simulation { truth, scans }
}

/// Sensor with certain detection and no clutter.
pub fn ideal(model: &BearingsModel) -> BearingsModel {
    let mut m = model.clone();
    m.sensor.p_d = 1.0;
    m.sensor.lambda_c = 0.0;
    m
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub label: Option<Label>,
    /// Absolute state.
    pub state: TargetState,
    pub existence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub existence: Option<f64>,
    pub cardinality: f64,
    pub hypotheses: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub run: usize,
    pub step: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub simulation: Simulation,
    /// One entry per processed step; shorter than the scenario after a failure.
    pub estimates: Vec<Vec<EstimateRecord>>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub failure: Option<RunFailure>,
    pub moves: MoveStats,
}

#[derive(Debug, Clone)]
pub struct McOptions {
    pub filter: String,
    pub settings: FilterSettings,
    pub runs: usize,
    pub base_seed: u64,
    pub jobs: usize,
    pub ospa: OspaParams,
}

impl McOptions {
    pub fn new(filter: impl Into<String>, settings: FilterSettings) -> Self {
        Self { filter: filter.into(), settings, runs: 1, base_seed: 0, jobs: 1, ospa: OspaParams::default() }
    }
}

/// One seeded run. Divergence is recorded in the record; configuration
/// errors are returned.
pub fn run_once(cfg: &ScenarioConfig, registry: &FilterRegistry<BearingsModel>, opts: &McOptions, run: usize) -> Result<RunRecord> {
    let seed = run_seed(opts.base_seed, run);
    let mut filter = registry.create(&opts.filter, &opts.settings)?;
    let mut model = cfg.model()?;
    if filter.requires_ideal_sensor() {
        model = ideal(&model);
    }
    let simulation = simulate(cfg, &model, &mut stream(seed, Stage::Simulation));
    let mut rng = stream(seed, Stage::Filter);
    let mut estimates = Vec::new();
    let mut diagnostics = Vec::new();
    let mut failure = None;
    let mut moves = MoveStats::default();
    for (k, scan) in simulation.scans.iter().enumerate() {
        match filter.step(&model, k, scan, &mut rng) {
            Ok(out) => {
                let o = model.observer_state(k);
                estimates.push(
                    out.estimates
                        .iter()
                        .map(|e| EstimateRecord { label: e.label, state: to_absolute(&e.state, &o), existence: e.existence })
                        .collect(),
                );
                diagnostics.push(StepDiagnostics { existence: out.existence, cardinality: out.cardinality, hypotheses: out.hypotheses });
                moves.merge(out.moves);
            }
            Err(e @ (Error::InvalidInput(_) | Error::Io(_))) => return Err(e),
            Err(e) => {
                failure = Some(RunFailure { run, step: k, message: e.to_string() });
                break;
            }
        }
    }
    Ok(RunRecord { run, seed, simulation, estimates, diagnostics, failure, moves })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub step: usize,
    pub time_s: f64,
    pub metric: String,
    pub value: f64,
    pub runs: usize,
}

#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

impl MonteCarloResult {
    pub fn failures(&self) -> Vec<&RunFailure> {
        self.runs.iter().filter_map(|r| r.failure.as_ref()).collect()
    }

    /// The summary series of one metric, indexed by step; NaN where absent.
    pub fn series(&self, metric: &str) -> Vec<f64> {
        let n = self.runs.first().map_or(0, |r| r.simulation.scans.len());
        let mut v = vec![f64::NAN; n];
        for row in self.summary.iter().filter(|r| r.metric == metric) {
            v[row.step] = row.value;
        }
        v
    }
}

/// Independent runs on a pool of `jobs` threads. Results do not depend on
/// the number of threads.
pub fn run_monte_carlo(cfg: &ScenarioConfig, registry: &FilterRegistry<BearingsModel>, opts: &McOptions) -> Result<MonteCarloResult> {
    if opts.runs == 0 {
        return Err(Error::invalid("need at least one run"));
    }
    if !registry.contains(&opts.filter) {
        return Err(Error::invalid(format!("unknown filter '{}'; known: {}", opts.filter, registry.names().join(", "))));
    }
    opts.ospa.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let runs: Vec<RunRecord> =
        pool.install(|| (0..opts.runs).into_par_iter().map(|r| run_once(cfg, registry, opts, r)).collect::<Result<Vec<_>>>())?;
    if let Some(first) = runs.iter().all(|r| r.failure.is_some()).then(|| runs[0].failure.as_ref()).flatten() {
        return Err(Error::AllRunsFailed { runs: runs.len(), first: first.message.clone() });
    }
    let summary = summarize(cfg, &runs, opts.ospa)?;
    Ok(MonteCarloResult { runs, summary })
}

fn padded<T: Copy>(values: impl Iterator<Item = T>, n: usize, fill: T) -> Vec<T> {
    let mut v: Vec<T> = values.collect();
    v.resize(n, fill);
    v
}

/// Per-step OSPA components of one run; NaN after a failure.
pub fn ospa_series(record: &RunRecord, params: OspaParams) -> Vec<[f64; 3]> {
    let n = record.simulation.scans.len();
    let vals = record.estimates.iter().zip(&record.simulation.truth).map(|(est, truth)| {
        let x: Vec<[f64; 2]> = truth.iter().map(|(_, s)| [s.x(), s.y()]).collect();
        let y: Vec<[f64; 2]> = est.iter().map(|e| [e.state.x(), e.state.y()]).collect();
        let o = ospa(&x, &y, params);
        [o.total, o.localization, o.cardinality]
    });
    padded(vals, n, [f64::NAN; 3])
}

/// Squared errors per step for a single living target, using the estimate
/// closest to it. `None` when there is no target, several targets or no
/// estimate.
pub fn single_target_errors(record: &RunRecord) -> Vec<Option<[f64; 2]>> {
    let n = record.simulation.scans.len();
    let vals = record.estimates.iter().zip(&record.simulation.truth).map(|(est, truth)| match truth.as_slice() {
        [(_, t)] => est
            .iter()
            .map(|e| squared_errors(&t.0, &e.state.0))
            .min_by(|a, b| a[0].total_cmp(&b[0])),
        _ => None,
    });
    padded(vals, n, None)
}

pub fn summarize(cfg: &ScenarioConfig, runs: &[RunRecord], params: OspaParams) -> Result<Vec<SummaryRow>> {
    let n = cfg.n_steps();
    let ospa_runs: Vec<Vec<[f64; 3]>> = runs.iter().map(|r| ospa_series(r, params)).collect();
    let component = |c: usize| -> Vec<Vec<f64>> { ospa_runs.iter().map(|r| r.iter().map(|v| v[c]).collect()).collect() };
    let diag = |f: &dyn Fn(&StepDiagnostics) -> Option<f64>| -> Vec<Vec<f64>> {
        runs.iter().map(|r| padded(r.diagnostics.iter().map(|d| f(d).unwrap_or(f64::NAN)), n, f64::NAN)).collect()
    };
    let total = mc_aggregate(&component(0))?;
    let mut series: Vec<(&str, Vec<(f64, usize)>)> = vec![
        ("ospa", total.iter().map(|s| (s.mean, s.count)).collect()),
        ("ospa_se", total.iter().map(|s| (s.se, s.count)).collect()),
        ("ospa_loc", mc_aggregate(&component(1))?.iter().map(|s| (s.mean, s.count)).collect()),
        ("ospa_card", mc_aggregate(&component(2))?.iter().map(|s| (s.mean, s.count)).collect()),
        ("cardinality", mc_aggregate(&diag(&|d| Some(d.cardinality)))?.iter().map(|s| (s.mean, s.count)).collect()),
        ("existence", mc_aggregate(&diag(&|d| d.existence))?.iter().map(|s| (s.mean, s.count)).collect()),
        ("hypotheses", mc_aggregate(&diag(&|d| d.hypotheses.map(|h| h as f64)))?.iter().map(|s| (s.mean, s.count)).collect()),
    ];
    let rms = rms_errors(&runs.iter().map(single_target_errors).collect::<Vec<_>>())?;
    series.push(("rms_pos", rms.iter().map(|p| p.map_or((f64::NAN, 0), |p| (p.position, p.count))).collect()));
    series.push(("rms_vel", rms.iter().map(|p| p.map_or((f64::NAN, 0), |p| (p.velocity, p.count))).collect()));

    let mut rows = Vec::new();
    for k in 0..n {
        for (name, s) in &series {
            let (value, count) = s[k];
            if value.is_finite() {
                rows.push(SummaryRow { step: k, time_s: cfg.time(k), metric: (*name).into(), value, runs: count });
            }
        }
    }
    Ok(rows)
}
