//! `nephrofp`: stage-wise and end-to-end runs of the AKI experiment.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nephrofp_core::experiment::{
    self as exp, Arm, ExperimentConfig, ExperimentError, ExperimentReport, Split, COHORT_FILE, SPLIT_FILE,
};
use nephrofp_core::synth::{generate_synthetic, SynthSpec};

#[derive(Parser)]
#[command(name = "nephrofp", version, about = "Drug-fingerprint AKI prediction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write a planted-signal CSV bundle to `<out>/data`.
    Synth,
    /// Resolve first-day drugs to structures and fingerprints.
    Resolve,
    /// Build the cohort and its first-day feature matrix.
    Featurize,
    /// Drop sparse columns and impute the rest.
    Impute,
    /// Split and fit one or both arms.
    Train {
        #[arg(long, value_enum, default_value_t = ArmArg::Both)]
        arm: ArmArg,
    },
    /// Score saved models on the saved test rows and write the report.
    Evaluate,
    /// Every stage in order.
    Run,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArmArg {
    Baseline,
    Multimodal,
    Both,
}

impl ArmArg {
    fn arms(self) -> &'static [Arm] {
        match self {
            ArmArg::Baseline => &[Arm::Baseline],
            ArmArg::Multimodal => &[Arm::Multimodal],
            ArmArg::Both => &[Arm::Baseline, Arm::Multimodal],
        }
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_DATA })
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => {
            let mut cfg = ExperimentConfig::synthetic(SynthSpec::default());
            cfg.apply_env(|k| std::env::var(k).ok())?;
            cfg
        }
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), ExperimentError> {
    let cfg = load_config(cli)?;
    let out = cli.out.as_path();
    std::fs::create_dir_all(out).map_err(|source| ExperimentError::Io { path: out.to_path_buf(), source })?;
    match &cli.command {
        Command::Synth => {
            let spec = cfg.input.synthetic.clone().ok_or_else(|| {
                exp::ConfigError::Invalid("synth needs an [input.synthetic] table".into())
            })?;
            let truth = generate_synthetic(&spec, &out.join(exp::DATA_DIR))?;
            println!(
                "wrote {} stays; prevalence {:.3}; oracle AUROC {:.3} (cohort only {:.3})",
                spec.n_stays, truth.realized_prevalence, truth.oracle_auroc_full, truth.oracle_auroc_cohort_only
            );
        }
        Command::Featurize => {
            let input = exp::prepare_input(&cfg, out)?;
            let cohort = exp::build_cohort(&cfg, &input)?;
            let fm = exp::featurize::<f64>(&cfg, &cohort, out)?;
            for f in &cohort.manifest.funnel {
                println!("{:<32}{:>8}{:>10}", f.stage, f.stays, f.patients);
            }
            println!("{} rows x {} columns", fm.n_rows(), fm.columns().len());
        }
        Command::Resolve => {
            let input = exp::prepare_input(&cfg, out)?;
            let cohort = exp::build_cohort(&cfg, &input)?;
            let (_, summary) = exp::resolve_drugs(&cohort, &input.resolver, &cfg.fingerprint, out)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
            println!("upstream calls: {}", summary.upstream_calls);
        }
        Command::Impute => {
            let (fm, _) = exp::read_features::<f64>(out)?;
            let imputed = exp::impute(&cfg, &fm, out)?;
            println!(
                "{} rows x {} columns; dropped {}",
                imputed.n_rows(),
                imputed.n_cols(),
                imputed.dropped_columns.len()
            );
        }
        Command::Train { arm } => {
            let imputed = exp::read_imputed::<f64>(out)?;
            let split = exp::stratified_split(&imputed.row_ids, &imputed.labels, &cfg.split)?;
            split.write_csv(&imputed.row_ids, &out.join(SPLIT_FILE))?;
            for &a in arm.arms() {
                let drugs = drugs_for(a, out)?;
                let data = exp::arm_dataset(a, &imputed, &drugs)?;
                exp::train_arm(&cfg, a, &data, &split, out)?;
                println!("trained {} on {} rows", a.as_str(), split.train.len());
            }
        }
        Command::Evaluate => {
            let report = evaluate(&cfg, out)?;
            print!("{}", report.to_text());
        }
        Command::Run => {
            let report = exp::run_experiment::<f64>(&cfg, out)?;
            print!("{}", report.to_text());
        }
    }
    Ok(())
}

/// The baseline arm needs no drug file.
fn drugs_for(arm: Arm, out: &Path) -> Result<exp::DrugFeatures, ExperimentError> {
    match arm {
        Arm::Multimodal => Ok(exp::read_drugs(out)?.0),
        Arm::Baseline => Ok(exp::DrugFeatures {
            width: 0,
            stay_ids: Vec::new(),
            n_drugs: Vec::new(),
            n_resolved: Vec::new(),
            rows: Vec::new(),
        }),
    }
}

fn evaluate(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport, ExperimentError> {
    let imputed = exp::read_imputed::<f64>(out)?;
    let split = Split::read_csv(&imputed.row_ids, &out.join(SPLIT_FILE))?;
    let manifest = nephrofp_core::cohort::CohortManifest::read(&out.join(COHORT_FILE))
        .map_err(|source| ExperimentError::Io { path: out.join(COHORT_FILE), source })?;
    let (drugs, summary) = exp::read_drugs(out)?;
    let mut arms = Vec::new();
    for arm in [Arm::Baseline, Arm::Multimodal] {
        let data = exp::arm_dataset(arm, &imputed, &drugs)?;
        let model = exp::load_model::<f64>(arm, out)?;
        arms.push((arm, data, model));
    }
    let report = ExperimentReport::assemble(cfg, &manifest, &summary, &imputed, &split, &arms)?;
    report.write(out)?;
    Ok(report)
}
