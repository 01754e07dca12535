//! `erw`: run excited random walk experiments from a config file.
//!
//! Exit codes: 0 success, 1 a diagnostic failed or was inconclusive,
//! 2 configuration error, 3 any other runtime error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use erw_core::config::PiValue;
use erw_core::diagnostics::{self, sample_rescaled, ConeConstants};
use erw_core::io::{self, Manifest, RunDir, TraceStream};
use erw_core::montecarlo::{estimate_pi, run_experiment};
use erw_core::observables::{RescaledPath, SeriesRecorder};
use erw_core::{
    parse_config, run_coupled, DiagnosticTest, Error, ResolvedConfig, RunSettings, TestReport, Walker,
};

/// Traces above this many steps are only written when the config asks for them.
const TRACE_LIMIT: u64 = 1_000_000;
/// Times at which replica 0's observables are written by `simulate`.
const SERIES_POINTS: u64 = 1_000;

#[derive(Parser)]
#[command(name = "erw", version, about = "Excited random walk experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides experiment.seed.
    #[arg(long, env = "ERW_SEED")]
    seed: Option<u64>,
    /// Overrides experiment.parallelism.
    #[arg(long, env = "ERW_PARALLELISM")]
    parallelism: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment plan and write traces, observables and replica summaries.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// New run directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the escape probability of the plain or lazy walk.
    EstimatePi {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = PiLaw::Xi)]
        law: PiLaw,
    },
    /// Run the excited walk together with its lazy shadow.
    Couple {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Allow subsets outside the cone regime.
        #[arg(long)]
        explore: bool,
    },
    /// Run statistical diagnostics; exits 1 if any fails.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Test to run (repeatable); defaults to diagnostics.tests.
        #[arg(long = "test")]
        tests: Vec<String>,
        /// Also write reports and a manifest to this new directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print JSON instead of text tables.
        #[arg(long)]
        json: bool,
    },
    /// Print the ladder of mean |R_n|/n (exploratory, no verdict).
    ProbeConjecture {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and print it with defaults filled in.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PiLaw {
    /// The centered law ξ.
    Xi,
    /// ξ with the subset axes projected away.
    Lazy,
}

enum Failure {
    Config(String),
    Verdict,
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Domain(_) | Error::Regime { .. } | Error::DimensionMismatch { .. } => {
                Failure::Config(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verdict) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn load(common: &Common) -> Result<(ResolvedConfig, PathBuf), Failure> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", common.config.display())))?;
    let mut resolved = parse_config(&text).map_err(|e| Failure::Config(e.to_string()))?;
    resolved.override_run(common.seed, common.parallelism);
    let base = common
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    Ok((resolved, base))
}

fn manifest(command: &str, cfg: &ResolvedConfig) -> Manifest {
    Manifest::new(
        command,
        cfg.walk.seed,
        cfg.file.experiment.parallelism,
        &cfg.file.to_toml(),
    )
}

fn finish(dir: RunDir, mut m: Manifest, started: Instant) -> Result<(), Failure> {
    m.wall_time_seconds = started.elapsed().as_secs_f64();
    let path = dir.path().to_path_buf();
    dir.finish(m)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn run(command: Command) -> Result<(), Failure> {
    let started = Instant::now();
    match command {
        Command::ValidateConfig { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", config.display())))?;
            let resolved = parse_config(&text).map_err(|e| Failure::Config(e.to_string()))?;
            print!("{}", resolved.file.to_toml());
            Ok(())
        }
        Command::Simulate { common, out } => {
            let (cfg, _) = load(&common)?;
            simulate(&cfg, &out, started)
        }
        Command::EstimatePi { common, out, law } => {
            let (cfg, _) = load(&common)?;
            let e = &cfg.file.experiment;
            let law = match law {
                PiLaw::Xi => cfg.walk.xi.clone(),
                PiLaw::Lazy => cfg.walk.xi.project_complement(&cfg.subset)?,
            };
            let mut dir = RunDir::create(&out)?;
            let est = estimate_pi(&law, &e.pi_horizons, e.replicas, cfg.walk.seed, e.parallelism)?;
            print!("{}", io::pi_table(&est));
            dir.write_json("pi.json", &est)?;
            io::write_pi_ladder(dir.create_file("pi_ladder.csv")?, &est)?;
            dir.write_bytes("config.toml", cfg.file.to_toml().as_bytes())?;
            finish(dir, manifest("estimate-pi", &cfg), started)
        }
        Command::Couple { common, out, explore } => {
            let (cfg, _) = load(&common)?;
            erw_core::coupling::check_coupling(&cfg.walk, &cfg.subset, !explore)?;
            let mut dir = RunDir::create(&out)?;
            let coupled = run_coupled(&cfg.walk, &cfg.subset, !explore)?;
            io::write_coupled(dir.create_file("coupled.csv")?, &coupled)?;
            dir.write_bytes("config.toml", cfg.file.to_toml().as_bytes())?;
            finish(dir, manifest("couple", &cfg), started)
        }
        Command::Diagnose {
            common,
            tests,
            out,
            json,
        } => {
            let (cfg, base) = load(&common)?;
            let tests: Vec<DiagnosticTest> = if tests.is_empty() {
                cfg.tests.clone()
            } else {
                tests
                    .iter()
                    .map(|t| t.parse())
                    .collect::<Result<_, Error>>()?
            };
            if tests.is_empty() {
                return Err(Failure::Config(
                    "no tests: pass --test or set diagnostics.tests".into(),
                ));
            }
            for t in &tests {
                t.check_regime(&cfg.walk, &cfg.subset)?;
            }
            let dir = out.as_deref().map(RunDir::create).transpose()?;
            let mut inputs = Vec::new();
            let mut reports = Vec::new();
            for &t in &tests {
                reports.push(diagnose(&cfg, &base, t, &mut inputs)?);
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&reports).map_err(Error::from)?);
            } else {
                for r in &reports {
                    println!("{}", io::report_table(r));
                }
            }
            if let Some(mut dir) = dir {
                dir.write_json("reports.json", &reports)?;
                let text: String = reports.iter().map(io::report_table).collect::<Vec<_>>().join("\n");
                dir.write_bytes("reports.txt", text.as_bytes())?;
                dir.write_bytes("config.toml", cfg.file.to_toml().as_bytes())?;
                let mut m = manifest("diagnose", &cfg);
                m.inputs = inputs;
                finish(dir, m, started)?;
            }
            if reports.iter().all(|r| r.pass) {
                Ok(())
            } else {
                Err(Failure::Verdict)
            }
        }
        Command::ProbeConjecture { common, out } => {
            let (cfg, base) = load(&common)?;
            let dir = out.as_deref().map(RunDir::create).transpose()?;
            let mut inputs = Vec::new();
            let pi = match &cfg.file.diagnostics.pi_d {
                Some(src) => {
                    let v = src.resolve(&base)?;
                    inputs.extend(v.manifest_hash.clone());
                    Some((v.value, v.halfwidth.unwrap_or(0.0)))
                }
                None => None,
            };
            let probe = diagnostics::probe_conjecture_range(
                &cfg.walk,
                &cfg.file.diagnostics.n_ladder,
                pi,
                cfg.settings(),
            )?;
            print!("{}", io::probe_table(&probe));
            if let Some(mut dir) = dir {
                dir.write_json("probe.json", &probe)?;
                io::write_probe(dir.create_file("probe.csv")?, &probe)?;
                dir.write_bytes("config.toml", cfg.file.to_toml().as_bytes())?;
                let mut m = manifest("probe-conjecture", &cfg);
                m.inputs = inputs;
                finish(dir, m, started)?;
            }
            Ok(())
        }
    }
}

fn simulate(cfg: &ResolvedConfig, out: &Path, started: Instant) -> Result<(), Failure> {
    let mut dir = RunDir::create(out)?;
    let result = run_experiment(&cfg.plan())?;
    let dim = cfg.walk.dim;
    dir.write_bytes("config.toml", cfg.file.to_toml().as_bytes())?;
    io::write_summaries(dir.create_file("summaries.csv")?, dim, &result.summaries)?;
    io::write_checkpoints(dir.create_file("checkpoints.csv")?, dim, &result.summaries)?;

    // replica 0 in detail
    let horizon = cfg.walk.horizon;
    let stride = horizon.div_ceil(SERIES_POINTS).max(1);
    let mut times: Vec<u64> = (0..=horizon).step_by(stride as usize).collect();
    if times.last() != Some(&horizon) {
        times.push(horizon);
    }
    let mut series = SeriesRecorder::new(dim, horizon, times)?;
    let write_trace = cfg.file.experiment.full_trace.unwrap_or(horizon <= TRACE_LIMIT);
    let mut walker = Walker::for_replica(&cfg.walk, 0);
    if write_trace {
        let mut trace = TraceStream::create(&dir.file("trace.csv"), dim)?;
        walker.run(horizon, &mut (&mut series, &mut trace));
        trace.finish()?;
    } else {
        walker.run(horizon, &mut series);
    }
    io::write_observables(dir.create_file("observables.csv")?, &series.finish())?;

    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let one = RunSettings {
        replicas: 1,
        parallelism: 1,
    };
    let rescaled = sample_rescaled(&cfg.walk, horizon, &grid, one)?;
    let path = RescaledPath {
        n: horizon,
        samples: grid
            .iter()
            .enumerate()
            .map(|(i, &t)| (t, rescaled.positions[i][0].clone()))
            .collect(),
    };
    io::write_rescaled(dir.create_file("rescaled_path.csv")?, &path)?;
    if !result.complete {
        dir.write_json("failures.json", &result.failures)?;
    }
    finish(dir, manifest("simulate", cfg), started)?;
    if result.complete {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("{} replica(s) failed", result.failures.len())))
    }
}

fn pi_input(cfg: &ResolvedConfig, base: &Path, key: &str, inputs: &mut Vec<String>) -> Result<f64, Failure> {
    let d = &cfg.file.diagnostics;
    let src = match key {
        "pi_d" => &d.pi_d,
        _ => &d.pi_dk,
    };
    let src = src
        .as_ref()
        .ok_or_else(|| Failure::Config(format!("this test needs diagnostics.{key}")))?;
    let PiValue {
        value,
        manifest_hash,
        ..
    } = src.resolve(base)?;
    inputs.extend(manifest_hash);
    Ok(value)
}

fn diagnose(cfg: &ResolvedConfig, base: &Path, test: DiagnosticTest, inputs: &mut Vec<String>) -> Result<TestReport, Failure> {
    let d = &cfg.file.diagnostics;
    let settings = cfg.settings();
    let walk = &cfg.walk;
    let report = match test {
        DiagnosticTest::GaussianMarginal => {
            diagnostics::test_gaussian_marginal(walk, d.n, &d.t_points, settings, cfg.gaussian_thresholds())
        }
        DiagnosticTest::RangeUpper => {
            let pi = pi_input(cfg, base, "pi_d", inputs)?;
            let delta = d.range_delta.unwrap_or(pi + d.range_margin + 0.03);
            diagnostics::test_range_upper(walk, delta, d.n, pi, d.range_margin, settings)
        }
        DiagnosticTest::KnBand => {
            let pi_d = pi_input(cfg, base, "pi_d", inputs)?;
            let pi_dk = pi_input(cfg, base, "pi_dk", inputs)?;
            diagnostics::test_kn_band(walk, &cfg.subset, d.n, &d.t_points, pi_d, pi_dk, settings, cfg.band_thresholds())
        }
        DiagnosticTest::ConeDrift => {
            let pi_d = pi_input(cfg, base, "pi_d", inputs)?;
            let pi_dk = pi_input(cfg, base, "pi_dk", inputs)?;
            let cone = ConeConstants::for_config(walk, pi_d, pi_dk)?;
            diagnostics::test_cone_drift(walk, &cfg.subset, d.n, &d.t_points, &cone, settings, d.slack_floor)
        }
        DiagnosticTest::JvAsymptotics => diagnostics::test_jv_asymptotics(
            d.jv_delta,
            d.jv_delta_prime,
            &d.n_ladder,
            walk.seed,
            settings,
            cfg.jv_thresholds(),
        ),
        DiagnosticTest::DProcessVanishes => {
            diagnostics::test_d_process_vanishes(walk, &d.n_ladder, d.t_max, settings, d.d_threshold)
        }
        DiagnosticTest::StoppedIncrementsIid => {
            diagnostics::test_stopped_increments_iid(walk, d.n, settings, d.gof_level, d.gof_min_samples)
        }
        DiagnosticTest::RangeLlnIid => {
            let pi = match d.range_at_most {
                Some(_) => None,
                None => Some(pi_input(cfg, base, "pi_d", inputs)?),
            };
            let target = cfg.range_target(pi)?;
            diagnostics::test_range_lln_iid(&walk.xi, d.n, target, walk.seed, settings)
        }
    };
    match report {
        Ok(r) => Ok(r),
        // an inconclusive test is reported as a failure with the reason
        Err(Error::Inconclusive(why)) => Ok(TestReport::from_checks(
            test.name(),
            settings.replicas,
            walk.seed,
            Vec::new(),
            vec![format!("inconclusive: {why}")],
        )),
        Err(e) => Err(e.into()),
    }
}
