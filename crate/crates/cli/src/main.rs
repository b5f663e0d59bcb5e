use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use rfs_core::filters::{FilterRegistry, FilterSettings};
use rfs_core::harness::calibrate::{calibrate_sigma_w, Backend, SigmaWCalibration};
use rfs_core::harness::output::{
    apply_override, config_hash, merge_summaries, read_scans, read_summary, write_run, write_sidecar, write_summary, Sidecar,
};
use rfs_core::harness::run::ideal;
use rfs_core::harness::{paper_scenario, run_monte_carlo, simulate, McOptions, ScenarioConfig, Variant};
use rfs_core::models::BearingsModel;
use rfs_core::rng::{stream, Stage};
use rfs_core::Error;

#[derive(Parser)]
#[command(name = "rfs-track", version, about = "Random finite set particle filters for bearings-only tracking")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate truth and scans for a scenario.
    Simulate(SimulateArgs),
    /// Run a filter over Monte Carlo replicas of a scenario.
    Run(RunArgs),
    /// Estimate the bearing noise by particle MCMC.
    Calibrate(CalibrateArgs),
    /// Join summary CSVs into one table and optionally plot them.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file, or `single` / `four_target` for the built-in geometry.
    #[arg(long)]
    scenario: String,
    /// Base seed; run r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "RFS_TRACK_OUT", default_value = "out")]
    out: PathBuf,
    /// Dotted-key override, e.g. `sensor.lambda_c=2` or `filter.particles=1000`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Filter name.
    #[arg(long)]
    filter: String,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Filter settings JSON file.
    #[arg(long)]
    filter_config: Option<PathBuf>,
    /// Particles per filter (per track for GLMB, per cluster for PHD).
    #[arg(long)]
    particles: Option<usize>,
    /// Hypotheses kept by the GLMB filter.
    #[arg(long)]
    hyp: Option<usize>,
    /// Write one CSV per run next to the summary.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    per_run: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Pf,
    Phd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    SigmaW,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "sigma-w")]
    param: Param,
    #[arg(long, value_enum, default_value = "pf")]
    backend: BackendArg,
    #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u64).range(1..))]
    iters: u64,
    #[arg(long, default_value_t = 500)]
    particles: usize,
    /// Per-run CSV to take the scans from instead of simulating them.
    #[arg(long)]
    scans: Option<PathBuf>,
    #[arg(long)]
    filter_config: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Summary CSV files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, env = "RFS_TRACK_OUT", default_value = "out")]
    out: PathBuf,
    /// Also render figures with the external `plots` program.
    #[arg(long)]
    plots: bool,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::Io(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Calibrate(a) => cmd_calibrate(a),
        Cmd::Report(a) => cmd_report(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

fn split_override(o: &str) -> CliResult<(&str, &str)> {
    o.split_once('=').ok_or_else(|| Failure::Config(format!("override '{o}' is not KEY=VALUE")))
}

/// Scenario document with overrides applied, and the filter overrides left over.
fn load_scenario(common: &Common) -> CliResult<(ScenarioConfig, Vec<(String, String)>)> {
    let base = match common.scenario.as_str() {
        "single" => paper_scenario(Variant::Single),
        "four_target" => paper_scenario(Variant::FourTarget),
        path => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{path}: {e}")))?;
            ScenarioConfig::from_json(&text)?
        }
    };
    let mut doc = serde_json::to_value(&base).map_err(|e| Failure::Config(e.to_string()))?;
    let mut filter_overrides = Vec::new();
    for o in &common.overrides {
        let (k, v) = split_override(o)?;
        match k.strip_prefix("filter.") {
            Some(rest) => filter_overrides.push((rest.to_string(), v.to_string())),
            None => apply_override(&mut doc, k, v)?,
        }
    }
    if let Some(seed) = common.seed {
        doc["seed"] = json!(seed);
    }
    let cfg: ScenarioConfig = serde_json::from_value(doc).map_err(|e| Failure::Config(format!("scenario: {e}")))?;
    cfg.validate()?;
    Ok((cfg, filter_overrides))
}

fn load_settings(path: Option<&Path>, overrides: &[(String, String)]) -> CliResult<FilterSettings> {
    let base = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
        }
        None => FilterSettings::default(),
    };
    let mut doc = serde_json::to_value(&base).map_err(|e| Failure::Config(e.to_string()))?;
    for (k, v) in overrides {
        apply_override(&mut doc, k, v)?;
    }
    let s: FilterSettings = serde_json::from_value(doc).map_err(|e| Failure::Config(format!("filter settings: {e}")))?;
    s.validate()?;
    Ok(s)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?))
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<()> {
    let (cfg, rest) = load_scenario(&a.common)?;
    if !rest.is_empty() {
        return Err(Failure::Config("filter overrides do not apply to simulate".into()));
    }
    let model = cfg.model()?;
    let sim = simulate(&cfg, &model, &mut stream(cfg.seed, Stage::Simulation));
    let record = rfs_core::harness::RunRecord {
        run: 0,
        seed: cfg.seed,
        simulation: sim,
        estimates: Vec::new(),
        diagnostics: Vec::new(),
        failure: None,
        moves: Default::default(),
    };
    let path = a.common.out.join("simulation.csv");
    write_run(create(&path)?, &cfg, &model, &record)?;
    let nz: usize = record.simulation.scans.iter().map(Vec::len).sum();
    let peak = record.simulation.truth.iter().map(Vec::len).max().unwrap_or(0);
    println!(
        "simulated {} steps, up to {peak} targets, {nz} measurements ({:.3} per scan) -> {}",
        cfg.n_steps(),
        nz as f64 / cfg.n_steps() as f64,
        path.display()
    );
    Ok(())
}

fn cmd_run(a: RunArgs) -> CliResult<()> {
    let (cfg, filter_overrides) = load_scenario(&a.common)?;
    let mut settings = load_settings(a.filter_config.as_deref(), &filter_overrides)?;
    if let Some(n) = a.particles {
        settings.particles = n;
        settings.track_particles = n;
        settings.cluster_particles = n;
    }
    if let Some(h) = a.hyp {
        settings.hyp_max = h;
    }
    settings.validate()?;
    let registry = FilterRegistry::<BearingsModel>::with_builtin();
    if !registry.contains(&a.filter) {
        return Err(Failure::Config(format!("unknown filter '{}'; known: {}", a.filter, registry.names().join(", "))));
    }
    let jobs = a.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let opts = McOptions { runs: a.runs as usize, base_seed: cfg.seed, jobs, ..McOptions::new(&a.filter, settings.clone()) };
    let result = run_monte_carlo(&cfg, &registry, &opts)?;

    let out = &a.common.out;
    write_summary(create(&out.join(format!("{}_summary.csv", a.filter)))?, &result.summary)?;
    if a.per_run {
        let model = cfg.model()?;
        let probe = registry.create(&a.filter, &settings)?;
        let model = if probe.requires_ideal_sensor() { ideal(&model) } else { model };
        for r in &result.runs {
            write_run(create(&out.join(format!("{}_run{:03}.csv", a.filter, r.run)))?, &cfg, &model, r)?;
        }
    }
    let config = json!({
        "scenario": serde_json::to_value(&cfg).map_err(|e| Failure::Config(e.to_string()))?,
        "filter": a.filter,
        "settings": serde_json::to_value(&settings).map_err(|e| Failure::Config(e.to_string()))?,
        "runs": a.runs,
        "ospa": {"c": opts.ospa.c, "p": opts.ospa.p},
    });
    let failures: Vec<_> = result.failures().into_iter().cloned().collect();
    let sidecar = Sidecar {
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config_hash(&config),
        filter: a.filter.clone(),
        runs: a.runs as usize,
        base_seed: cfg.seed,
        failures: failures.clone(),
        config,
    };
    write_sidecar(create(&out.join(format!("{}_summary.json", a.filter)))?, &sidecar)?;

    let ospa: Vec<f64> = result.series("ospa").into_iter().filter(|v| v.is_finite()).collect();
    let mean = ospa.iter().sum::<f64>() / ospa.len().max(1) as f64;
    println!("{}: {} runs, mean OSPA {mean:.1} m, {} failed -> {}", a.filter, a.runs, failures.len(), out.display());
    for f in &failures {
        eprintln!("warning: run {} stopped at step {}: {}", f.run, f.step, f.message);
    }
    Ok(())
}

fn cmd_calibrate(a: CalibrateArgs) -> CliResult<()> {
    let (cfg, filter_overrides) = load_scenario(&a.common)?;
    let mut settings = load_settings(a.filter_config.as_deref(), &filter_overrides)?;
    settings.particles = a.particles;
    let Param::SigmaW = a.param;
    let backend = match a.backend {
        BackendArg::Pf => Backend::Pf,
        BackendArg::Phd => Backend::Phd,
    };
    let mut model = cfg.model()?;
    if backend == Backend::Pf {
        model = ideal(&model);
    }
    let scans = match &a.scans {
        Some(p) => read_scans(BufReader::new(File::open(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?))?,
        None => simulate(&cfg, &model, &mut stream(cfg.seed, Stage::Simulation)).scans,
    };
    let cal = SigmaWCalibration { iterations: a.iters as usize, ..Default::default() };
    let res = calibrate_sigma_w(&model, &scans, backend, &settings, &cal, &mut stream(cfg.seed, Stage::Calibration))?;

    let path = a.common.out.join("calibration_sigma_w.csv");
    let mut w = create(&path)?;
    use std::io::Write;
    writeln!(w, "iter,sigma_w_deg,loglik")?;
    for (i, (s, ll)) in res.chain.samples.iter().zip(&res.chain.logliks).enumerate() {
        writeln!(w, "{i},{},{ll}", s[0])?;
    }
    w.flush()?;
    println!(
        "sigma_w: mean {:.4} deg, 90% interval [{:.4}, {:.4}] deg, acceptance {:.2} (truth in scenario {:.4} deg) -> {}",
        res.mean_deg,
        res.interval_deg.0,
        res.interval_deg.1,
        res.chain.acceptance_rate(),
        cfg.sensor.sigma_w_deg,
        path.display()
    );
    Ok(())
}

const PLOT_KINDS: [(&str, &str); 3] = [("ospa", "ospa"), ("existence", "existence"), ("rms", "rms_pos")];

fn cmd_report(a: ReportArgs) -> CliResult<()> {
    let mut inputs = Vec::new();
    for p in &a.inputs {
        let f = File::open(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
        let rows = read_summary(BufReader::new(f)).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
        let stem = p.file_stem().map_or_else(|| "input".into(), |s| s.to_string_lossy().to_string());
        inputs.push((stem.trim_end_matches("_summary").to_string(), rows));
    }
    let (header, rows) = merge_summaries(&inputs);
    let path = a.out.join("report.csv");
    {
        use std::io::Write;
        let mut w = create(&path)?;
        writeln!(w, "{}", header.join(","))?;
        for r in &rows {
            writeln!(w, "{}", r.join(","))?;
        }
        w.flush()?;
    }
    println!("merged {} summaries: {} steps, {} columns -> {}", inputs.len(), rows.len(), header.len(), path.display());

    if a.plots {
        for (kind, metric) in PLOT_KINDS {
            if !inputs.iter().any(|(_, rows)| rows.iter().any(|r| r.metric == metric)) {
                continue;
            }
            let target = a.out.join(format!("{kind}.png"));
            let status = Command::new("plots").arg(kind).args(&a.inputs).arg("-o").arg(&target).status();
            match status {
                Ok(s) if s.success() => println!("plotted {}", target.display()),
                Ok(s) => eprintln!("warning: plots {kind} exited with {s}"),
                Err(e) => {
                    eprintln!("warning: could not run the plots program ({e}); skipping figures");
                    break;
                }
            }
        }
    }
    Ok(())
}
