//! Batch experiment driver: generate, corrupt, learn, diagnose, benchmark.
//!
//! Every command is driven by one JSON config (see `config::RunConfig`),
//! is idempotent given identical config and seeds, and with `--workers 1`
//! reproduces its outputs byte for byte.

mod config;
mod log;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use config::RunConfig;
use ptf_core::adversary::{corrupt, figure1_demo, gen_clean, random_ptf, Dataset};
use ptf_core::learner::{learn_ptf, DecisionListHypothesis};
use ptf_core::poly::PolyVec;
use ptf_core::probes::{mc_probe_anticoncentration, mc_probe_concentration};
use ptf_core::snpt::jacobian_singularity_probe;

#[derive(Debug)]
pub enum CliError {
    ConfigInvalid { path: String, detail: String },
    FileMissing { path: String },
    Io { path: String, detail: String },
    Run(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::ConfigInvalid { path, detail } => {
                write!(f, "config invalid at {path}: {detail}")
            }
            CliError::FileMissing { path } => write!(f, "file missing: {path}"),
            CliError::Io { path, detail } => write!(f, "io error at {path}: {detail}"),
            CliError::Run(detail) => write!(f, "{detail}"),
        }
    }
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::ConfigInvalid { .. } => "ConfigInvalid",
            CliError::FileMissing { .. } => "FileMissing",
            CliError::Io { .. } => "Io",
            CliError::Run(_) => "Run",
        }
    }
}

#[derive(Parser)]
#[command(name = "ptf", about = "Robust PTF learning experiments", version)]
struct Cli {
    /// Path to the JSON run configuration.
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,
    /// Overrides every seed in the config (offset per role).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker count for Monte-Carlo probes; 1 keeps outputs byte-identical.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the clean train/test datasets and apply the corruption.
    Generate,
    /// Learn a decision-list hypothesis from the generated training data.
    Learn,
    /// Evaluate a hypothesis file against a labeled CSV.
    Eval {
        /// Hypothesis JSON (defaults to <out>/hypothesis.json).
        #[arg(long)]
        hypothesis: Option<PathBuf>,
        /// Labeled CSV (defaults to <out>/test.csv).
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Run the diagnostic probes from the config.
    Diagnose,
    /// Sweep corruption rates and record error-vs-opt.
    Bench,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    log::init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let payload = serde_json::json!({
                "error": e.kind(),
                "detail": e.to_string(),
            });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut config = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.truth.seed = seed;
        config.data.seed = seed.wrapping_add(1);
        config.corruption.seed = seed.wrapping_add(2);
        config.learner.seed = seed.wrapping_add(3);
    }
    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output_dir));
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Io {
        path: out_dir.display().to_string(),
        detail: e.to_string(),
    })?;
    match &cli.command {
        Command::Generate => cmd_generate(&config, &out_dir),
        Command::Learn => cmd_learn(&config, &out_dir),
        Command::Eval { hypothesis, test } => cmd_eval(
            &hypothesis
                .clone()
                .unwrap_or_else(|| out_dir.join("hypothesis.json")),
            &test.clone().unwrap_or_else(|| out_dir.join("test.csv")),
            &out_dir,
        ),
        Command::Diagnose => cmd_diagnose(&config, &out_dir, cli.workers),
        Command::Bench => cmd_bench(&config, &out_dir),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|_| CliError::FileMissing {
        path: path.display().to_string(),
    })
}

#[derive(Serialize)]
struct GenerateManifest<'a> {
    truth: &'a config::TruthConfig,
    data: &'a config::DataConfig,
    corruption: &'a ptf_core::adversary::CorruptionSpec,
    corrupted_count: usize,
    train_file: String,
    test_file: String,
}

fn cmd_generate(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    log::info(&format!(
        "generating n={} d={} m_train={} m_test={}",
        config.truth.n, config.truth.d, config.data.m_train, config.data.m_test
    ));
    let truth = random_ptf(config.truth.n, config.truth.d, config.truth.seed);
    let clean = gen_clean(&truth, config.data.m_train, config.data.seed);
    let corrupted = corrupt(&clean, &truth, &config.corruption);
    let test = gen_clean(
        &truth,
        config.data.m_test,
        config.data.seed.wrapping_add(0x7e57),
    );
    write(&out.join("train.csv"), &corrupted.to_csv())?;
    write(
        &out.join("train.provenance.csv"),
        &corrupted.provenance_csv(),
    )?;
    write(&out.join("test.csv"), &test.to_csv())?;
    write(
        &out.join("truth.json"),
        &serde_json::to_string_pretty(&truth.p_star).expect("truth serializes"),
    )?;
    let manifest = GenerateManifest {
        truth: &config.truth,
        data: &config.data,
        corruption: &config.corruption,
        corrupted_count: corrupted.corrupted_count(),
        train_file: "train.csv".into(),
        test_file: "test.csv".into(),
    };
    write(
        &out.join("generate_manifest.json"),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(())
}

fn cmd_learn(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let train_text = read(&out.join("train.csv"))?;
    let train = Dataset::from_csv(&train_text).map_err(CliError::Run)?;
    let learner_config = config.learner.build();
    log::info(&format!(
        "learning from {} samples (eps={}, depth={})",
        train.len(),
        learner_config.eps,
        learner_config.depth_budget
    ));
    let (hypothesis, report) = learn_ptf(
        &train.labeled(),
        config.truth.n,
        config.truth.d,
        &learner_config,
    )
    .map_err(|e| CliError::Run(e.to_string()))?;
    write(&out.join("hypothesis.json"), &hypothesis.to_json())?;
    if let Some(csv) = report
        .regions
        .iter()
        .find_map(|r| r.perceptron_csv.as_ref())
    {
        write(&out.join("perceptron_root.csv"), csv)?;
    }
    let manifest = serde_json::json!({
        "learner": {
            "eps": learner_config.eps,
            "k_exponent": learner_config.k_exponent,
            "eta": learner_config.eta,
            "depth_budget": learner_config.depth_budget,
            "seed": learner_config.seed,
        },
        "list_length": report.list_length,
        "length_bound": report.length_bound,
        "budget_exhausted": report.budget_exhausted,
        "classified_mass": report.classified_mass,
        "constant_mass": report.constant_mass,
        "residual_mass": report.residual_mass,
        "regions": report.regions,
    });
    write(
        &out.join("learn_manifest.json"),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    log::info(&format!(
        "decision list of {} entries written",
        report.list_length
    ));
    Ok(())
}

fn cmd_eval(hypothesis_path: &Path, test_path: &Path, out: &Path) -> Result<(), CliError> {
    let hypothesis =
        DecisionListHypothesis::from_json(&read(hypothesis_path)?).map_err(CliError::Run)?;
    let test = Dataset::from_csv(&read(test_path)?).map_err(CliError::Run)?;
    let samples = test.labeled();
    let error = hypothesis.evaluate(&samples);
    let wrong = (error * samples.len() as f64).round() as usize;
    let mut csv = String::from("m,errors,error_rate\n");
    csv.push_str(&format!("{},{},{}\n", samples.len(), wrong, error));
    write(&out.join("eval.csv"), &csv)?;
    log::info(&format!("error {error:.5} on {} points", samples.len()));
    println!("{error}");
    Ok(())
}

fn cmd_diagnose(config: &RunConfig, out: &Path, workers: usize) -> Result<(), CliError> {
    let diag = &config.diagnostics;
    if !diag.anticoncentration.is_empty() {
        let mut csv = String::from("name,side,t,probability\n");
        for probe in &diag.anticoncentration {
            let probs = if probe.small_ball {
                mc_probe_anticoncentration(&probe.poly, &probe.ts, probe.n_mc, probe.seed, workers)
            } else {
                mc_probe_concentration(&probe.poly, &probe.ts, probe.n_mc, probe.seed, workers)
            };
            let side = if probe.small_ball {
                "small_ball"
            } else {
                "tail"
            };
            for (t, p) in probe.ts.iter().zip(probs) {
                csv.push_str(&format!("{},{},{},{}\n", probe.name, side, t, p));
            }
        }
        write(&out.join("anticoncentration.csv"), &csv)?;
    }
    if let Some(jc) = &diag.jacobian {
        let qv = PolyVec::new(jc.polys.clone()).map_err(|e| CliError::Run(e.to_string()))?;
        let p = jacobian_singularity_probe(&qv, jc.delta, jc.n_mc, jc.seed, workers)
            .map_err(|e| CliError::Run(e.to_string()))?;
        let mut csv = String::from("delta,n_mc,probability\n");
        csv.push_str(&format!("{},{},{}\n", jc.delta, jc.n_mc, p));
        write(&out.join("jacobian.csv"), &csv)?;
    }
    if let Some(fc) = &diag.figure1 {
        let report =
            figure1_demo(fc.eps, fc.n_mc, fc.seed).map_err(|e| CliError::Run(e.to_string()))?;
        write(&out.join("figure1.csv"), &report.to_csv())?;
        log::info(&format!(
            "figure1: band mass {:.4}, conditional small-ball {:.4}, max per-cell {:.4}",
            report.band_mass, report.conditional_small_ball, report.max_cell_small_ball
        ));
    }
    Ok(())
}

fn cmd_bench(config: &RunConfig, out: &Path) -> Result<(), CliError> {
    let opts = if config.bench.opts.is_empty() {
        vec![0.0, 0.02, 0.05]
    } else {
        config.bench.opts.clone()
    };
    let truth = random_ptf(config.truth.n, config.truth.d, config.truth.seed);
    let clean = gen_clean(&truth, config.data.m_train, config.data.seed);
    let test = gen_clean(
        &truth,
        config.data.m_test,
        config.data.seed.wrapping_add(0x7e57),
    );
    let test_samples = test.labeled();
    let learner_config = config.learner.build();
    let mut csv = String::from("opt,error,list_length\n");
    for &opt in &opts {
        let spec = ptf_core::adversary::CorruptionSpec {
            opt,
            strategy: config.corruption.strategy.clone(),
            seed: config.corruption.seed,
        };
        let bad = corrupt(&clean, &truth, &spec);
        let (hypothesis, report) = learn_ptf(
            &bad.labeled(),
            config.truth.n,
            config.truth.d,
            &learner_config,
        )
        .map_err(|e| CliError::Run(e.to_string()))?;
        let error = hypothesis.evaluate(&test_samples);
        log::info(&format!("opt={opt}: error {error:.5}"));
        csv.push_str(&format!("{},{},{}\n", opt, error, report.list_length));
    }
    write(&out.join("bench.csv"), &csv)?;
    Ok(())
}
