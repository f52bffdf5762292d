//! `mammoscope` command-line front end.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mammoscope_core::bayes;
use mammoscope_core::config::PipelineConfig;
use mammoscope_core::eval;
use mammoscope_core::features::FeatureTable;
use mammoscope_core::phantom;
use mammoscope_core::pipeline::{self, PipelineError};

#[derive(Debug, Parser)]
#[command(name = "mammoscope", version, about = "Wavelet/Fourier feature extraction and Naive Bayes screening for mammograms")]
struct Cli {
    /// Pipeline config file (`section.key = value`); defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads for extraction and cross-validation.
    #[arg(long, global = true, value_name = "N", default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labelled synthetic phantom set plus manifest.csv.
    Phantom {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Preprocess images listed in a manifest and write the feature table.
    Extract {
        #[arg(long, value_name = "CSV")]
        manifest: PathBuf,
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
    },
    /// Train a Gaussian Naive Bayes model from a feature table.
    Train {
        #[arg(long, value_name = "CSV")]
        features: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Score a feature table with a saved model.
    Predict {
        #[arg(long, value_name = "CSV")]
        features: PathBuf,
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        #[arg(long, value_name = "CSV")]
        out: PathBuf,
    },
    /// Stratified k-fold cross-validation; writes roc.csv and roc.svg.
    Evaluate {
        #[arg(long, value_name = "CSV")]
        features: PathBuf,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Debug)]
enum Failure {
    /// Some inputs could not be processed; output was still written.
    Partial(String),
    /// Usage, config or precondition error.
    Fatal(String),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Fatal(e.to_string())
    }
}

fn fatal(context: impl std::fmt::Display) -> impl FnOnce(std::io::Error) -> Failure {
    move |e| Failure::Fatal(format!("{context}: {e}"))
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, Failure> {
    let cfg = match path {
        Some(p) => PipelineConfig::load(p).map_err(PipelineError::from)?,
        None => PipelineConfig::default(),
    };
    cfg.validate().map_err(PipelineError::from)?;
    Ok(cfg)
}

fn read_table(path: &Path) -> Result<FeatureTable, Failure> {
    let file = File::open(path).map_err(fatal(path.display()))?;
    FeatureTable::read_csv(file).map_err(|e| Failure::Fatal(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(fatal(path.display()))
}

fn check_output_dir(path: &Path) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Failure::Fatal(format!("output directory {} does not exist", dir.display())))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(cli.config.as_deref())?;
    let jobs = usize::from(cli.jobs);
    match cli.command {
        Command::Phantom { out } => {
            let entries = phantom::write_phantom_set(&cfg.phantom, &out).map_err(PipelineError::from)?;
            eprintln!("wrote {} images and manifest.csv to {}", entries.len(), out.display());
        }
        Command::Extract { manifest, out } => {
            check_output_dir(&out)?;
            let entries = pipeline::read_manifest(&manifest)?;
            let base = manifest.parent().unwrap_or(Path::new("."));
            let extraction = pipeline::extract_manifest(&entries, base, &cfg, jobs)?;
            write_file(&out, &extraction.table.to_csv_bytes())?;
            for f in &extraction.failures {
                eprintln!("error: {}: {}", f.id, f.message);
            }
            eprintln!("extracted {} of {} images", extraction.table.len(), entries.len());
            if !extraction.failures.is_empty() {
                return Err(Failure::Partial(format!("{} image(s) failed", extraction.failures.len())));
            }
        }
        Command::Train { features, out } => {
            check_output_dir(&out)?;
            let table = read_table(&features)?;
            let model = pipeline::train_model(&table, &cfg)?;
            write_file(&out, &bayes::save_model(&model))?;
            eprintln!("trained on {} rows using {}", table.len(), model.feature_names().join(", "));
        }
        Command::Predict { features, model, out } => {
            check_output_dir(&out)?;
            let table = read_table(&features)?;
            let bytes = std::fs::read(&model).map_err(fatal(model.display()))?;
            let model = bayes::load_model(&bytes).map_err(PipelineError::from)?;
            let predictions = pipeline::predict(&table, &model, cfg.classifier_threshold)?;
            write_file(&out, &pipeline::predictions_csv(&predictions))?;
        }
        Command::Evaluate { features, out_dir } => {
            if !out_dir.is_dir() {
                return Err(Failure::Fatal(format!("output directory {} does not exist", out_dir.display())));
            }
            let table = read_table(&features)?;
            let report = pipeline::cross_validate(&table, &cfg, jobs)?;
            write_file(&out_dir.join("roc.csv"), eval::roc_csv(&report.roc).as_bytes())?;
            write_file(&out_dir.join("roc.svg"), eval::roc_svg(&report.roc).as_bytes())?;
            print!("{}", report.summary());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Partial(msg)) => {
            eprintln!("mammoscope: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Fatal(msg)) => {
            eprintln!("mammoscope: error: {msg}");
            ExitCode::from(2)
        }
    }
}
