//! Thin command-line front end over the library.
//!
//! Subcommands: `ingest`, `validate`, `describe`, `synth`, `run`. Results go
//! to files; logs go to stderr. Exit codes: 0 success, 2 usage/validation
//! failure, 1 experiment error.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use edmine::experiments::{
    apply_overrides, run_experiment, DatasetConfig, ExperimentConfig, ExperimentKind,
    OverrideFlags,
};
use edmine::features::names;
use edmine::ingest::{
    load_canvas, load_d1, load_oulad, validate_bundle, write_canonical_csvs, BandMaps,
    DatasetBundle,
};
use edmine::resample::BalanceTechnique;
use edmine::synthgen::{generate_to_dir, CourseShape, PlantSpec};
use edmine::EdmError;

const DEFAULT_CONFIG: &str = include_str!("../../configs/default.json");

#[derive(Parser)]
#[command(
    name = "edmine",
    version,
    about = "Learner-outcome prediction from multi-source course data",
    after_help = "Dataset paths may also come from $EDM_DATA_DIR (d1/, oulad/, canvas.csv)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetKind {
    /// Canonical five-CSV course directory.
    D1,
    /// Learning-analytics table directory.
    Oulad,
    /// De-identified person-course CSV.
    Canvas,
}

#[derive(Args)]
struct DatasetArgs {
    /// Which loader to use.
    #[arg(long, value_enum)]
    dataset: DatasetKind,
    /// Directory (d1, oulad) or file (canvas) to load.
    #[arg(long)]
    path: PathBuf,
    /// Band-map sidecar overriding the built-in table.
    #[arg(long)]
    bands: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset, validate it, and print a summary.
    Ingest {
        #[command(flatten)]
        dataset: DatasetArgs,
        /// Re-emit the canonical CSV set (D1-shaped bundles only).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every bundle invariant; exit 2 when violations exist.
    Validate {
        #[command(flatten)]
        dataset: DatasetArgs,
    },
    /// Emit per-feature summary and histogram CSVs.
    Describe {
        #[command(flatten)]
        dataset: DatasetArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic course dataset with a planted label rule.
    Synth {
        /// Learner count.
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Label flip probability in [0, 0.5).
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        /// Target share of passing learners.
        #[arg(long, default_value_t = 0.6)]
        ratio: f64,
        /// Informative features as name=weight pairs, comma separated.
        #[arg(long, default_value = "verbal=1.0,time=0.7")]
        informative: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment and write its tables.
    Run {
        /// Which experiment to run.
        #[arg(long)]
        experiment: String,
        /// JSON config; the built-in default runs on synthetic data.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override the config's root seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's fold count.
        #[arg(long)]
        folds: Option<usize>,
        /// Override the balancing technique
        /// (none|upsample|downsample|up_and_down|smote).
        #[arg(long)]
        balance: Option<String>,
        /// Worker threads (default: available cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn load_bundle(args: &DatasetArgs) -> Result<DatasetBundle, EdmError> {
    let bands = match &args.bands {
        Some(path) => BandMaps::from_path(path)?,
        None => BandMaps::builtin(),
    };
    match args.dataset {
        DatasetKind::D1 => load_d1(&args.path),
        DatasetKind::Oulad => load_oulad(&args.path, &bands, &Default::default()),
        DatasetKind::Canvas => load_canvas(&args.path, &bands, &Default::default()),
    }
}

fn parse_informative(s: &str) -> Result<Vec<(String, f64)>, EdmError> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (name, weight) = part
            .split_once('=')
            .ok_or_else(|| EdmError::Config(format!("expected name=weight, got `{part}`")))?;
        let weight: f64 = weight
            .trim()
            .parse()
            .map_err(|_| EdmError::Config(format!("non-numeric weight in `{part}`")))?;
        out.push((name.trim().to_string(), weight));
    }
    Ok(out)
}

fn dataset_summary(bundle: &DatasetBundle) {
    eprintln!(
        "{}: {} profiles, {} events, {} quiz attempts, {} question results, {} aggregates",
        bundle.dataset_id,
        bundle.profiles.len(),
        bundle.events.len(),
        bundle.quiz_attempts.len(),
        bundle.question_results.len(),
        bundle.aggregates.len()
    );
}

fn real_main() -> Result<ExitCode, EdmError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Ingest { dataset, out } => {
            let bundle = load_bundle(&dataset)?;
            dataset_summary(&bundle);
            let report = validate_bundle(&bundle);
            eprintln!("validation: {report}");
            if let Some(dir) = out {
                if !bundle.has_raw_course_data() {
                    return Err(EdmError::Config(
                        "canonical CSV export is defined for D1-shaped bundles only".into(),
                    ));
                }
                write_canonical_csvs(&bundle, &dir)?;
                eprintln!("canonical CSVs written to {}", dir.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { dataset } => {
            let bundle = load_bundle(&dataset)?;
            let report = validate_bundle(&bundle);
            println!("{report}");
            if report.is_clean() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(2))
            }
        }
        Command::Describe { dataset, out } => {
            let mut config = ExperimentConfig::default();
            let id = match dataset.dataset {
                DatasetKind::D1 => "d1",
                DatasetKind::Oulad => "d2",
                DatasetKind::Canvas => "d3",
            };
            let entry = match dataset.dataset {
                DatasetKind::D1 => DatasetConfig::D1Dir {
                    path: dataset.path.clone(),
                },
                DatasetKind::Oulad => DatasetConfig::OuladDir {
                    path: dataset.path.clone(),
                },
                DatasetKind::Canvas => DatasetConfig::CanvasCsv {
                    path: dataset.path.clone(),
                },
            };
            config.datasets = BTreeMap::from([(id.to_string(), entry)]);
            config.describe_dataset = id.to_string();
            config.band_maps = dataset.bands.clone();
            let outcome = run_experiment(ExperimentKind::Describe, &config, &out)?;
            eprintln!("{} files written to {}", outcome.written.len(), outcome.out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth {
            n,
            seed,
            noise,
            ratio,
            informative,
            out,
        } => {
            let spec = PlantSpec {
                n_learners: n,
                seed,
                informative: if informative.trim().is_empty() {
                    vec![(names::VERBAL.into(), 1.0)]
                } else {
                    parse_informative(&informative)?
                },
                noise_rate: noise,
                class_ratio: ratio,
                shape: CourseShape::default(),
            };
            let truth = generate_to_dir(&spec, &out)?;
            eprintln!(
                "synthetic dataset with {} learners written to {} (class-1 share {:.3})",
                n,
                out.display(),
                truth.class_one_share()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            experiment,
            config,
            out,
            seed,
            folds,
            balance,
            jobs,
        } => {
            let kind = ExperimentKind::parse(&experiment).ok_or_else(|| {
                EdmError::Config(format!(
                    "unknown experiment `{experiment}` (expected balancing|models|sources|transfer|selection|describe)"
                ))
            })?;
            let loaded = match &config {
                Some(path) => ExperimentConfig::from_path(path)?,
                None => ExperimentConfig::from_json(DEFAULT_CONFIG)?,
            };
            let balance = match balance {
                Some(s) => Some(BalanceTechnique::parse(&s).ok_or_else(|| {
                    EdmError::Config(format!("unknown balancing technique `{s}`"))
                })?),
                None => None,
            };
            let flags = OverrideFlags {
                seed,
                folds,
                balance,
                jobs,
            };
            let config = apply_overrides(loaded, &flags);
            config.validate()?;
            if let Some(jobs) = config.jobs {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(jobs)
                    .build_global()
                    .map_err(|e| EdmError::Config(format!("thread pool: {e}")))?;
            }
            let outcome = run_experiment(kind, &config, &out)?;
            eprintln!(
                "experiment `{}` complete: {} files under {}",
                kind.as_str(),
                outcome.written.len(),
                outcome.out_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match &err {
                EdmError::Config(_) => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
