use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use snm::evaluation::{auc, pearson, repeated_kfold_cv, spearman, CvConfig, Scorer};
use snm::io;
use snm::metrics::{batch_score, whiten, Metric};
use snm::model::{fit_ppca_with, select_dim, DimSpec, FitOptions};
use snm::raters::{fit_latent_trait, panel_auc_summary};
use snm::synthetic::generate_population;
use snm::{Error, Result};

/// Shape normality scoring from particle correspondences.
#[derive(Parser)]
#[command(name = "snm", version)]
struct Cli {
    /// Suppress progress lines.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a directory of normal shapes.
    Train {
        #[arg(long)]
        particles: PathBuf,
        #[command(flatten)]
        dim: DimArgs,
        /// Remove each shape's particle centroid before fitting and scoring.
        #[arg(long)]
        center: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score shapes against a trained model.
    Score {
        #[arg(long)]
        model: PathBuf,
        /// A particle file or a directory of them.
        #[arg(long)]
        particles: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write one `<id>.csv` per shape with raw and whitened deviations.
        #[arg(long)]
        whiten_out: Option<PathBuf>,
    },
    /// AUC and correlations of a scores file against labels. Every scored
    /// id needs a label; extra labels are ignored.
    Evaluate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, value_enum, default_value_t = Column::Full)]
        column: Column,
    },
    /// Repeated k-fold cross-validated AUC.
    Cv {
        #[arg(long)]
        normals: PathBuf,
        #[arg(long)]
        pathological: PathBuf,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 3)]
        folds: usize,
        #[arg(long, env = "SNM_SEED", default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        dim: DimArgs,
        #[arg(long, value_enum, default_value_t = CvScorer::Full)]
        scorer: CvScorer,
        #[arg(long)]
        center: bool,
    },
    /// Generate a synthetic population from a TOML config.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a latent-trait model to ordinal ratings.
    Raters {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long, default_value_t = 5)]
        categories: usize,
        /// `id,diagnosis` per subject; enables the AUC summary.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Args)]
#[group(multiple = false)]
struct DimArgs {
    /// Keep the fewest components explaining this fraction of variance
    /// (default 0.95).
    #[arg(long)]
    explained_variance: Option<f64>,
    /// Keep exactly this many components.
    #[arg(long)]
    dim: Option<usize>,
}

impl DimArgs {
    fn spec(&self) -> DimSpec {
        match (self.dim, self.explained_variance) {
            (Some(d), _) => DimSpec::Fixed(d),
            (None, a) => DimSpec::ExplainedVariance(a.unwrap_or(0.95)),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Column {
    Full,
    LatentPaper,
    LatentExact,
    Null,
}

impl Column {
    fn pick(self, r: &io::ScoreRow) -> f64 {
        match self {
            Column::Full => r.full,
            Column::LatentPaper => r.latent_paper,
            Column::LatentExact => r.latent_exact,
            Column::Null => r.null,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CvScorer {
    Full,
    LatentPaper,
    LatentExact,
    Null,
    /// Drop every latent component: scaled Euclidean distance.
    Isotropic,
}

impl From<CvScorer> for Scorer {
    fn from(s: CvScorer) -> Self {
        match s {
            CvScorer::Full => Scorer::Metric(Metric::Full),
            CvScorer::LatentPaper => Scorer::Metric(Metric::LatentPaper),
            CvScorer::LatentExact => Scorer::Metric(Metric::LatentExact),
            CvScorer::Null => Scorer::Metric(Metric::Null),
            CvScorer::Isotropic => Scorer::Isotropic,
        }
    }
}

struct Progress(bool);

impl Progress {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.0 {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn run(cli: Cli) -> Result<()> {
    let progress = Progress(cli.quiet);
    match cli.command {
        Command::Train {
            particles,
            dim,
            center,
            out,
        } => {
            let set = io::read_particles(&particles)?;
            progress.say(format!("read {} shapes of {} particles", set.n(), set.m()));
            let options = FitOptions {
                center_shapes: center,
            };
            let model = fit_ppca_with(&set, dim.spec(), options)?;
            if let DimSpec::ExplainedVariance(_) = dim.spec() {
                let sel = select_dim(model.spectrum(), dim.spec())?;
                if sel.clamped || sel.d != model.d() {
                    eprintln!(
                        "warning: explained-variance rule wanted more components; kept d={}",
                        model.d()
                    );
                }
            }
            io::write_model(&out, &model)?;
            println!("n={}", set.n());
            println!("p={}", set.p());
            println!("d={}", model.d());
            println!("explained_ratio={:?}", model.explained_ratio());
            println!("sigma2={:?}", model.sigma2());
        }
        Command::Score {
            model,
            particles,
            out,
            whiten_out,
        } => {
            let model = io::read_model(&model)?;
            let set = io::read_particles(&particles)?;
            progress.say(format!("scoring {} shapes", set.n()));
            let scores = batch_score(&model, &set)?;
            io::write_scores(&out, set.ids(), &scores)?;
            if let Some(dir) = whiten_out {
                create_dir(&dir)?;
                for (i, id) in set.ids().iter().enumerate() {
                    let map = whiten(&model, set.shape(i).as_slice())?;
                    io::write_deviation_map(&dir.join(format!("{id}.csv")), &map)?;
                }
            }
        }
        Command::Evaluate {
            scores,
            labels,
            column,
        } => {
            let scores = io::read_scores(&scores)?;
            let labels = io::read_labels(&labels)?;
            let by_id: HashMap<&str, &io::LabelRow> =
                labels.iter().map(|l| (l.id.as_str(), l)).collect();
            if by_id.len() != labels.len() {
                return Err(Error::IdMismatch("duplicate id in labels".into()));
            }
            let mut matched = Vec::with_capacity(scores.len());
            for s in &scores {
                let l = by_id
                    .get(s.id.as_str())
                    .ok_or_else(|| Error::IdMismatch(format!("`{}` has no label", s.id)))?;
                matched.push((column.pick(s), *l));
            }
            let x: Vec<f64> = matched.iter().map(|m| m.0).collect();
            let y: Vec<bool> = matched.iter().map(|m| m.1.diagnosis).collect();
            println!("auc={:?}", auc(&x, &y)?);
            if matched.iter().all(|m| m.1.severity.is_some()) {
                let sev: Vec<f64> = matched.iter().map(|m| m.1.severity.unwrap()).collect();
                println!("pearson={:?}", pearson(&x, &sev)?);
                println!("spearman={:?}", spearman(&x, &sev)?);
            }
        }
        Command::Cv {
            normals,
            pathological,
            repeats,
            folds,
            seed,
            dim,
            scorer,
            center,
        } => {
            let normals = io::read_particles(&normals)?;
            let pathological = io::read_particles(&pathological)?;
            progress.say(format!(
                "{} normal and {} pathological shapes, {repeats}x{folds} folds",
                normals.n(),
                pathological.n()
            ));
            let config = CvConfig {
                repeats,
                folds,
                seed,
                dim: dim.spec(),
                scorer: scorer.into(),
                fit: FitOptions {
                    center_shapes: center,
                },
            };
            let report = repeated_kfold_cv(&normals, &pathological, &config)?;
            for e in &report.entries {
                println!(
                    "repeat={} fold={} n_train={} auc={:?}",
                    e.repeat, e.fold, e.n_train, e.auc
                );
            }
            println!("mean_auc={:?}", report.mean_auc);
        }
        Command::Synth { spec, out } => {
            let fallback = match std::env::var("SNM_SEED") {
                Ok(s) => s
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("SNM_SEED is not a u64: `{s}`")))?,
                Err(_) => 0,
            };
            let spec = io::read_generator_config(&spec, fallback)?;
            let pop = generate_population(&spec)?;
            io::write_particle_dir(&out.join("normal"), &pop.normals)?;
            io::write_particle_dir(&out.join("pathological"), &pop.pathologicals)?;
            let labels: Vec<io::LabelRow> = pop
                .normals
                .ids()
                .iter()
                .map(|id| (id, false))
                .chain(pop.pathologicals.ids().iter().map(|id| (id, true)))
                .map(|(id, diagnosis)| io::LabelRow {
                    id: id.clone(),
                    diagnosis,
                    severity: None,
                })
                .collect();
            io::write_labels(&out.join("labels.csv"), &labels)?;
            io::write_model(&out.join("truth.model"), &pop.truth.model()?)?;
            progress.say(format!(
                "wrote {} normal and {} pathological shapes (seed {})",
                pop.normals.n(),
                pop.pathologicals.n(),
                spec.seed
            ));
        }
        Command::Raters {
            ratings,
            categories,
            labels,
            out,
            max_iter,
            tol,
        } => {
            let table = io::read_ratings(&ratings, categories)?;
            progress.say(format!(
                "{} ratings of {} subjects by {} raters",
                table.entries().len(),
                table.subjects().len(),
                table.raters().len()
            ));
            let fit = fit_latent_trait(&table, max_iter, tol)?;
            io::write_severities(&out, table.subjects(), &fit.severity)?;
            if !fit.converged {
                eprintln!("warning: no convergence after {} sweeps", fit.iterations);
            }
            println!("iterations={}", fit.iterations);
            println!("converged={}", fit.converged);
            println!("log_likelihood={:?}", fit.log_likelihood);
            for &r in &fit.degenerate_raters {
                eprintln!(
                    "warning: rater `{}` used one category only",
                    table.raters()[r]
                );
            }
            if let Some(path) = labels {
                let rows = io::read_labels(&path)?;
                let by_id: HashMap<&str, bool> =
                    rows.iter().map(|l| (l.id.as_str(), l.diagnosis)).collect();
                let diagnosis = table
                    .subjects()
                    .iter()
                    .map(|s| {
                        by_id
                            .get(s.as_str())
                            .copied()
                            .ok_or_else(|| Error::IdMismatch(format!("subject `{s}` has no label")))
                    })
                    .collect::<Result<Vec<bool>>>()?;
                let summary = panel_auc_summary(&fit, &table, &diagnosis)?;
                for (name, a) in table.raters().iter().zip(&summary.rater_auc) {
                    match a {
                        Some(a) => println!("rater={name} auc={a:?}"),
                        None => println!("rater={name} auc=NA"),
                    }
                }
                println!("individual_mean={:?}", summary.individual_mean);
                println!("individual_sd={:?}", summary.individual_sd);
                println!("individual_max={:?}", summary.individual_max);
                println!("aggregated_auc={:?}", summary.aggregated_auc);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or("bad arguments")
                .trim_start_matches("error: ");
            eprintln!("E_USAGE: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: {}", e.code(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
