use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use efmix::clustering::{EmptyClusterPolicy, Heuristic, KMeansConfig};
use efmix::learners::{self, Algorithm, LearnerConfig};
use efmix::seeding::{SeedMethod, SeedSpec};
use efmix::{ExpFamily, Family, SampleSet};

use crate::csv;
use crate::error::CliError;
use crate::model::{support_dim, FitMeta, ModelFile};
use crate::ppm;
use crate::trace;

#[derive(Debug, Parser)]
#[command(name = "efmix", version, about = "Learn finite mixtures of exponential families")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a mixture to a CSV of observations.
    Fit(FitArgs),
    /// Draw observations from a saved model.
    Sample(SampleArgs),
    /// Evaluate a saved model on a CSV of observations.
    Eval(EvalArgs),
    /// Convert a PPM image into an xyRGB point set.
    PpmToPoints(PpmArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Rayleigh,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Kmle,
    Hardem,
    Softem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Kmlepp,
    Global,
    Split,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeuristicArg {
    Lloyd,
    Hartigan,
    LloydHartigan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmptyArg {
    Drop,
    Reseed,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "kmle")]
    pub algo: AlgoArg,
    #[arg(long, value_enum, default_value = "kmlepp")]
    pub init: InitArg,
    /// Start from the components of this model file instead of `--init`.
    #[arg(long)]
    pub init_model: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Inner clustering heuristic for k-MLE.
    #[arg(long, value_enum, default_value = "lloyd")]
    pub heuristic: HeuristicArg,
    #[arg(long = "empty-clusters", value_enum, default_value = "drop")]
    pub empty_clusters: EmptyArg,
    /// Relative ridge for degenerate estimates (off by default).
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub with_labels: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct PpmArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Emit one point per s×s patch (dimension 2 + 3s²).
    #[arg(long)]
    pub patch: Option<usize>,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Reads observations and checks them against the family, naming the
/// offending row on failure.
fn load_data(path: &Path, fam: &Family) -> Result<SampleSet, CliError> {
    let table = csv::read(path)?;
    let dim = support_dim(fam);
    if table.columns() != dim {
        return Err(CliError::Data(format!(
            "{}: {} expects {dim} column(s), found {}",
            path.display(),
            fam.name(),
            table.columns()
        )));
    }
    for (i, x) in table.rows.iter().enumerate() {
        if let Err(why) = fam.check_support(x) {
            return Err(CliError::Data(format!(
                "{}: {} outside the {} support: {why}",
                path.display(),
                table.locate(i),
                fam.name()
            )));
        }
    }
    Ok(SampleSet::new(table.rows))
}

fn family_for(arg: FamilyArg, path: &Path) -> Result<Family, CliError> {
    let name = match arg {
        FamilyArg::Gaussian => "gaussian",
        FamilyArg::Rayleigh => "rayleigh",
        FamilyArg::Poisson => "poisson",
    };
    let dim = if arg == FamilyArg::Gaussian {
        // The dimension comes from the data.
        csv::read(path)?.columns()
    } else {
        1
    };
    Ok(Family::from_name(name, dim)?)
}

fn fit(args: &FitArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.k == 0 {
        return Err(CliError::Usage("--k must be at least 1".into()));
    }
    if !(args.tol >= 0.0) {
        return Err(CliError::Usage("--tol must be non-negative".into()));
    }
    if args.max_iters == 0 || args.restarts == 0 {
        return Err(CliError::Usage("--max-iters and --restarts must be at least 1".into()));
    }
    if let Some(r) = args.ridge {
        if !(r > 0.0 && r.is_finite()) {
            return Err(CliError::Usage("--ridge must be positive".into()));
        }
    }
    let fam = family_for(args.family, &args.input)?;
    let data = load_data(&args.input, &fam)?;
    if args.k > data.len() {
        return Err(CliError::Usage("k exceeds sample size".into()));
    }
    let method = match (&args.init_model, args.init) {
        (Some(path), _) => {
            let (mfam, model) = ModelFile::load(path)?.to_model()?;
            if mfam != fam {
                return Err(CliError::Usage("--init-model family or dimension differs from --family".into()));
            }
            SeedMethod::Explicit(model)
        }
        (None, InitArg::Kmlepp) => SeedMethod::KMeansPP,
        (None, InitArg::Global) => SeedMethod::GlobalMleRestricted,
        (None, InitArg::Split) => SeedMethod::GroupSplit,
        (None, InitArg::Random) => SeedMethod::ForgyRandom,
    };
    let spec = SeedSpec {
        method,
        seed: args.seed,
        restarts: args.restarts,
    };
    let cfg = LearnerConfig {
        clustering: KMeansConfig {
            heuristic: match args.heuristic {
                HeuristicArg::Lloyd => Heuristic::Lloyd,
                HeuristicArg::Hartigan => Heuristic::Hartigan,
                HeuristicArg::LloydHartigan => Heuristic::LloydThenHartigan,
            },
            empty_cluster_policy: match args.empty_clusters {
                EmptyArg::Drop => EmptyClusterPolicy::Drop,
                EmptyArg::Reseed => EmptyClusterPolicy::ReseedFarthest,
            },
            ..KMeansConfig::default()
        },
        max_iters: args.max_iters,
        tol: args.tol,
        ridge: args.ridge,
    };
    let algo = match args.algo {
        AlgoArg::Kmle => Algorithm::KMle,
        AlgoArg::Hardem => Algorithm::HardEm,
        AlgoArg::Softem => Algorithm::SoftEm,
    };
    let (model, report) = learners::fit(&fam, &data, args.k, algo, &spec, &cfg)?;

    let meta = FitMeta {
        algorithm: format!("{:?}", args.algo).to_lowercase(),
        init: if args.init_model.is_some() {
            "explicit".into()
        } else {
            format!("{:?}", args.init).to_lowercase()
        },
        seed: args.seed,
        restarts: args.restarts,
        max_iters: args.max_iters,
        tol: args.tol,
        heuristic: args.heuristic.to_possible_value().expect("named").get_name().into(),
        empty_clusters: args.empty_clusters.to_possible_value().expect("named").get_name().into(),
        ridge: args.ridge,
        outer_iterations: report.outer_iterations,
        termination: report.termination.as_str().into(),
        avg_loglik: report.incomplete_ll,
        avg_complete_loglik: report.complete_ll,
    };
    ModelFile::new(&fam, &model, Some(meta))?.save(&args.output)?;
    if let Some(path) = &args.trace {
        write_file(path, trace::render(&report.trace).as_bytes())?;
    }
    writeln!(
        out,
        "fit {} k={} active={} iterations={} termination={} avg_loglik={} avg_complete_loglik={} elapsed_ms={}",
        fam.name(),
        model.k(),
        model.active_count(),
        report.outer_iterations,
        report.termination.as_str(),
        csv::fmt_f64(report.incomplete_ll),
        csv::fmt_f64(report.complete_ll),
        report.elapsed.as_millis()
    )
    .map_err(|e| CliError::Data(e.to_string()))
}

fn sample(args: &SampleArgs) -> Result<(), CliError> {
    let (fam, model) = ModelFile::load(&args.model)?.to_model()?;
    let (points, labels) = learners::sample_mixture(&fam, &model, args.count, args.seed)?;
    let mut header = csv::point_header(support_dim(&fam));
    if args.with_labels {
        header.push("label".into());
    }
    let mut text = header.join(",");
    text.push('\n');
    for (x, z) in points.points().iter().zip(&labels) {
        let mut cells: Vec<String> = x.iter().map(|v| csv::fmt_f64(*v)).collect();
        if args.with_labels {
            cells.push(z.to_string());
        }
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    write_file(&args.output, text.as_bytes())
}

fn eval(args: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (fam, model) = ModelFile::load(&args.model)?.to_model()?;
    let data = load_data(&args.input, &fam)?;
    let ll = learners::incomplete_loglik(&fam, &data, &model)?;
    let labels = learners::hard_labels(&fam, &data, &model)?;
    let cll = learners::complete_loglik(&fam, &data, &labels, &model)?;
    let loss = learners::model_kmeans_loss(&fam, &data, &model)?;
    writeln!(
        out,
        "avg_loglik={} avg_complete_loglik={} likelihood={} kmeans_loss={}",
        csv::fmt_f64(ll),
        csv::fmt_f64(cll),
        csv::fmt_f64(ll.exp()),
        csv::fmt_f64(loss)
    )
    .map_err(|e| CliError::Data(e.to_string()))
}

fn ppm_to_points(args: &PpmArgs) -> Result<(), CliError> {
    let bytes = std::fs::read(&args.input).map_err(|e| CliError::io(&args.input, e))?;
    let img = ppm::parse(&bytes)?;
    let points = ppm::to_points(&img, args.patch)?;
    let text = csv::write_rows(&ppm::header(args.patch), points.iter().map(Vec::as_slice));
    write_file(&args.output, text.as_bytes())
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Fit(a) => fit(a, out),
        Command::Sample(a) => sample(a),
        Command::Eval(a) => eval(a, out),
        Command::PpmToPoints(a) => ppm_to_points(a),
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("EFMIX_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("EFMIX_THREADS must be a positive integer, got {raw:?}")))?;
    // A pool that is already initialized (tests calling `run` twice) is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let sink: &mut dyn Write = if code == 0 { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match configure_threads().and_then(|()| execute(&cli, out)) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
