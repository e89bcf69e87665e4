//! Command-line interface: `segment`, `decompose`, `eval` and `basis-dump`.
//!
//! Exit codes: 0 on success, 1 on runtime failures (I/O, solver, unmatched
//! evaluation inputs), 2 on bad flags. Progress and diagnostics go to
//! standard error; results go to standard output or the requested files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::basis::{BasisMatrix, ScaledBasis};
use crate::error::{Error, Result};
use crate::eval::evaluate_dataset;
use crate::io::{load_image, save_gray, save_mask};
use crate::segment::{decompose_image, segment_image, LambdaRule, SegmenterConfig};

#[derive(Debug, Parser)]
#[command(
    name = "scseg",
    about = "Screen-content image segmentation by sparse-smooth decomposition",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Segment an image into a binary foreground mask (PGM, foreground=255).
    Segment(SegmentArgs),
    /// Write the smooth and sparse layers of an image as grayscale images.
    Decompose(DecomposeArgs),
    /// Score predicted masks against ground truth, pairing files by name.
    Eval(EvalArgs),
    /// Dump the DCT basis matrix as plain text, one row per pixel index.
    BasisDump(BasisDumpArgs),
}

#[derive(Debug, Args)]
struct ModelFlags {
    /// Block side length in pixels.
    #[arg(long, default_value_t = 64)]
    block_size: usize,
    /// Number of retained DCT bases.
    #[arg(long, default_value_t = 10)]
    bases: usize,
    /// Trade-off weight between the sparse and smooth layers.
    #[arg(long, default_value_t = 0.01)]
    q: f64,
    /// Per-pixel background threshold (luminance units).
    #[arg(long, default_value_t = 10.0)]
    eps1: f64,
    /// Flat-block neighbor color tolerance.
    #[arg(long, default_value_t = 10.0)]
    eps2: f64,
    /// Least-squares max-error threshold.
    #[arg(long, default_value_t = 3.0)]
    eps3: f64,
    /// Absolute regularization weight; when omitted, each block uses
    /// 0.1 x its maximum luminance.
    #[arg(long)]
    lambda: Option<f64>,
    /// ADMM penalty parameter.
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// ADMM iteration count.
    #[arg(long, default_value_t = 100)]
    iters: usize,
}

impl ModelFlags {
    fn to_config(&self) -> SegmenterConfig {
        SegmenterConfig {
            n: self.block_size,
            k: self.bases,
            q: self.q,
            eps1: self.eps1,
            eps2: self.eps2,
            eps3: self.eps3,
            lambda_rule: match self.lambda {
                Some(v) => LambdaRule::Absolute(v),
                None => LambdaRule::Relative(0.1),
            },
            rho: self.rho,
            iterations: self.iters,
        }
    }
}

#[derive(Debug, Args)]
struct SegmentArgs {
    /// Input image (PGM P2/P5, or 8-bit grayscale/RGB PNG).
    #[arg(long)]
    input: PathBuf,
    /// Output mask path (binary PGM).
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Output path for the smooth layer (clamped to [0, 255]).
    #[arg(long)]
    smooth_out: PathBuf,
    /// Output path for the magnitude of the sparse layer.
    #[arg(long)]
    sparse_out: PathBuf,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Directory of predicted masks.
    #[arg(long)]
    pred_dir: PathBuf,
    /// Directory of ground-truth masks with identical file names.
    #[arg(long)]
    truth_dir: PathBuf,
    /// Emit the report as JSON instead of CSV lines.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct BasisDumpArgs {
    #[arg(long, default_value_t = 64)]
    block_size: usize,
    #[arg(long, default_value_t = 10)]
    bases: usize,
    /// Dump the q-scaled matrix instead of the orthonormal one.
    #[arg(long)]
    q: Option<f64>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders --help/--version on stdout with status 0 and
            // usage errors on stderr with status 2.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("Run with --help for usage.");
            2
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

enum CliError {
    /// Invalid flag combination: exit 2.
    Usage(String),
    /// Failure while doing the work: exit 1.
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

fn dispatch(cli: Cli) -> std::result::Result<(), CliError> {
    match cli.command {
        Command::Segment(args) => {
            let config = args.model.to_config();
            config.validate().map_err(usage)?;
            let image = load_image(&args.input)?;
            let seg = segment_image(&image, &config)?;
            save_mask(&args.output, &seg.mask)?;
            println!(
                "flat: {}, ls: {}, sparse: {}",
                seg.counts.flat, seg.counts.least_squares, seg.counts.sparse
            );
            Ok(())
        }
        Command::Decompose(args) => {
            let config = args.model.to_config();
            config.validate().map_err(usage)?;
            let image = load_image(&args.input)?;
            let layers = decompose_image(&image, &config)?;
            save_gray(&args.smooth_out, &layers.smooth)?;
            save_gray(&args.sparse_out, &layers.sparse)?;
            Ok(())
        }
        Command::Eval(args) => {
            let pairs = pair_by_name(&args.pred_dir, &args.truth_dir)?;
            let eval = evaluate_dataset(&pairs)?;
            if args.json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&eval).expect("report serializes")
                );
            } else {
                print!("{}", eval.to_csv());
            }
            Ok(())
        }
        Command::BasisDump(args) => {
            if args.bases == 0 || args.bases > args.block_size * args.block_size {
                return Err(usage(Error::invalid(format!(
                    "basis count must satisfy 1 <= k <= n^2, got k={} for n={}",
                    args.bases, args.block_size
                ))));
            }
            if args.q.is_some_and(|q| q <= 0.0 || !q.is_finite()) {
                return Err(usage(Error::invalid("q must be positive")));
            }
            let basis =
                BasisMatrix::build(args.block_size, args.bases).map_err(CliError::Runtime)?;
            let write = |w: &mut dyn std::io::Write| -> std::io::Result<()> {
                match args.q {
                    Some(q) => ScaledBasis::new(&basis, q)
                        .map_err(|e| std::io::Error::other(e.to_string()))?
                        .write_dump(w),
                    None => basis.write_dump(w),
                }
            };
            match &args.output {
                Some(path) => {
                    let mut file = std::fs::File::create(path)
                        .map_err(|e| CliError::Runtime(Error::io(path, e)))?;
                    write(&mut file).map_err(|e| CliError::Runtime(Error::io(path, e)))?;
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    write(&mut lock).map_err(|e| CliError::Runtime(Error::io("<stdout>", e)))?;
                }
            }
            Ok(())
        }
    }
}

fn usage(e: Error) -> CliError {
    CliError::Usage(e.to_string())
}

/// Collects image files from both directories and pairs them by file name.
/// Any name present on only one side is an error listing the strays.
fn pair_by_name(pred_dir: &Path, truth_dir: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let pred_names = list_images(pred_dir)?;
    let truth_names = list_images(truth_dir)?;
    let only_pred: Vec<&String> = pred_names.difference(&truth_names).collect();
    let only_truth: Vec<&String> = truth_names.difference(&pred_names).collect();
    if !only_pred.is_empty() || !only_truth.is_empty() {
        let mut msg = String::from("unmatched file names:");
        for name in only_pred {
            msg.push_str(&format!(" {name} (prediction only)"));
        }
        for name in only_truth {
            msg.push_str(&format!(" {name} (truth only)"));
        }
        return Err(Error::invalid(msg));
    }
    if pred_names.is_empty() {
        return Err(Error::invalid(format!(
            "no mask files found in {} and {}",
            pred_dir.display(),
            truth_dir.display()
        )));
    }
    Ok(pred_names
        .into_iter()
        .map(|name| (pred_dir.join(&name), truth_dir.join(&name)))
        .collect())
}

fn list_images(dir: &Path) -> Result<BTreeSet<String>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = BTreeSet::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        let supported = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "png"));
        if supported {
            names.insert(entry.file_name().to_string_lossy().into_owned());
        }
    }
    Ok(names)
}
