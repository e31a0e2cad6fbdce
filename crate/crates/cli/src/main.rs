use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sevt::experiment::{self, run_classification, run_grid, GridSpec};
use sevt::{
    baseline_full, count_transitions, learn_bhc, learn_hclust, read_csv, score_bic, ComparisonReport, Dataset, Error,
    FittedStagedTree, GenConfig, GenMethod, KSpec, LearnConfig, Linkage, Metric, SchemaFile, Smoothing,
};

#[derive(Parser)]
#[command(name = "sevt", version, about = "Learn and evaluate staged event tree models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitMethod {
    Hclust,
    Bhc,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Gen {
    Join,
    Split,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a staged tree to a CSV file.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// JSON sidecar fixing variable levels: {"variables":[{"name","levels"}]}.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: FitMethod,
        #[arg(long, default_value = "totalvariation")]
        metric: Metric,
        #[arg(long, default_value = "ward.D2")]
        linkage: Linkage,
        /// `auto`, one integer for every depth, or a comma list for depths 1..p-1.
        #[arg(long, default_value = "auto")]
        k: KSpec,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a random staged tree and a sample from it.
    Simulate {
        #[arg(long)]
        p: usize,
        #[arg(long, value_enum)]
        gen: Gen,
        /// Join probability.
        #[arg(long, default_value_t = 0.9)]
        q: f64,
        /// Number of stages per depth for the split generator.
        #[arg(long, default_value_t = 2)]
        k0: usize,
        #[arg(long, default_value_t = 2)]
        levels: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_model: PathBuf,
        #[arg(long)]
        out_data: PathBuf,
    },
    /// Compare two fitted models on a dataset; the second model is the baseline.
    Compare {
        #[arg(long = "model", num_args = 1, required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run a simulation grid.
    Bench {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        summary: PathBuf,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Repeated train/test evaluation of the naive staged tree classifier.
    Classify {
        /// May be repeated; each file is one dataset named by its file stem.
        #[arg(long, required = true)]
        data: Vec<PathBuf>,
        #[arg(long = "class")]
        class: String,
        #[arg(long, default_value_t = 10)]
        splits: usize,
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long, default_value = "totalvariation")]
        metric: Metric,
        #[arg(long, default_value = "ward.D2")]
        linkage: Linkage,
        #[arg(long, default_value = "2")]
        k: KSpec,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_dataset(path: &Path, schema: Option<&[sevt::VariableSpec]>) -> sevt::Result<Dataset> {
    read_csv(BufReader::new(File::open(path)?), schema)
}

fn read_model(path: &Path) -> sevt::Result<FittedStagedTree> {
    FittedStagedTree::from_json(&fs::read_to_string(path)?)
}

fn run(command: Command) -> sevt::Result<()> {
    match command {
        Command::Fit {
            data,
            schema,
            method,
            metric,
            linkage,
            k,
            alpha,
            out,
        } => {
            let schema = match schema {
                Some(path) => Some(SchemaFile::from_json(&fs::read_to_string(path)?)?.variables),
                None => None,
            };
            let data = read_dataset(&data, schema.as_deref())?;
            let tree = sevt::EventTree::new(data.schema().to_vec())?;
            let counts = count_transitions(&data, &tree)?;
            let alpha = Smoothing::new(alpha)?;
            let model = match method {
                FitMethod::Hclust => learn_hclust(
                    &counts,
                    &tree,
                    &LearnConfig {
                        metric,
                        linkage,
                        kspec: k,
                        alpha,
                    },
                )?,
                FitMethod::Bhc => learn_bhc(&counts, &tree, alpha)?,
                FitMethod::Full => baseline_full(&counts, &tree, alpha)?,
            };
            let mut doc = model.to_document();
            doc.score = Some(score_bic(&model, &counts)?.block());
            fs::write(out, serde_json::to_string_pretty(&doc)? + "\n")?;
        }
        Command::Simulate {
            p,
            gen,
            q,
            k0,
            levels,
            n,
            seed,
            out_model,
            out_data,
        } => {
            let method = match gen {
                Gen::Join if q > 0.0 && q <= 1.0 => GenMethod::Join { q },
                Gen::Join => return Err(Error::Invalid(format!("--q must lie in (0, 1], got {q}"))),
                Gen::Split => GenMethod::Split { k0 },
            };
            let config = GenConfig {
                p,
                levels,
                method,
                seed,
            };
            let (model, data) = experiment::simulate(&config, n)?;
            fs::write(out_model, model.to_json()? + "\n")?;
            data.write_csv(BufWriter::new(File::create(out_data)?))?;
        }
        Command::Compare { models, truth, data } => {
            if models.len() != 2 {
                return Err(Error::Invalid(format!(
                    "expected two --model files, got {}",
                    models.len()
                )));
            }
            let a = read_model(&models[0])?;
            let b = read_model(&models[1])?;
            if a.tree() != b.tree() {
                return Err(Error::Schema("the two models are defined on different trees".into()));
            }
            let truth = truth.map(|t| read_model(&t)).transpose()?;
            if truth.as_ref().is_some_and(|t| t.tree() != a.tree()) {
                return Err(Error::Schema("the truth model is defined on a different tree".into()));
            }
            let data = read_dataset(&data, Some(a.tree().variables()))?;
            let counts = count_transitions(&data, a.tree())?;
            let report = ComparisonReport::new(
                (a.staging(), &score_bic(&a, &counts)?),
                (b.staging(), &score_bic(&b, &counts)?),
                truth.as_ref().map(|t| t.staging()),
            )?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Bench {
            grid,
            out,
            summary,
            jobs,
        } => {
            let spec = GridSpec::from_json(&fs::read_to_string(grid)?)?;
            let output = match jobs {
                Some(j) => rayon::ThreadPoolBuilder::new()
                    .num_threads(j)
                    .build()
                    .map_err(|e| Error::Invalid(e.to_string()))?
                    .install(|| run_grid(&spec))?,
                None => run_grid(&spec)?,
            };
            experiment::write_rows(BufWriter::new(File::create(out)?), &output.rows)?;
            experiment::write_rows(BufWriter::new(File::create(summary)?), &output.summary)?;
            let failed = output.rows.iter().filter(|r| !r.error.is_empty()).count();
            if failed > 0 {
                eprintln!(
                    "warning: {failed} of {} fits failed; see the error column",
                    output.rows.len()
                );
            }
        }
        Command::Classify {
            data,
            class,
            splits,
            ratio,
            metric,
            linkage,
            k,
            alpha,
            seed,
            out,
        } => {
            let datasets = data
                .iter()
                .map(|path| {
                    let name = path
                        .file_stem()
                        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
                    Ok((name, read_dataset(path, None)?))
                })
                .collect::<sevt::Result<Vec<_>>>()?;
            let cfg = LearnConfig {
                metric,
                linkage,
                kspec: k,
                alpha: Smoothing::new(alpha)?,
            };
            let rows = run_classification(&datasets, &class, splits, ratio, &[cfg], seed)?;
            experiment::write_rows(BufWriter::new(File::create(out)?), &rows)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
