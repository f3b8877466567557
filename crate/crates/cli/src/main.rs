mod commands;
mod exit;
mod report_io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use exit::Outcome;

#[derive(Parser, Debug)]
#[command(name = "segkit", version, about = "Segmentation volume toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print geometry, element type and label histogram of a .mha file.
    Info { path: PathBuf },
    /// Score predictions against references.
    Evaluate(EvaluateArgs),
    /// Fuse several label volumes into one.
    Fuse(FuseArgs),
    /// Crop a volume and record the crop in a sidecar.
    Crop(CropArgs),
    /// Map a cropped volume back onto its original grid.
    Uncrop(UncropArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Prediction file or directory.
    #[arg(required_unless_present = "manifest")]
    pub pred: Option<PathBuf>,
    /// Reference file or directory.
    #[arg(required_unless_present = "manifest")]
    pub reference: Option<PathBuf>,
    /// CSV with columns case_id,pred,ref; relative paths resolve against the manifest's directory.
    #[arg(long, conflicts_with_all = ["pred", "reference"])]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub labels: Vec<u8>,
    #[arg(long, default_value_t = segkit::metrics::DEFAULT_TOLERANCE_MM)]
    pub tolerance_mm: f64,
    /// Report path; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FuseMethod {
    Staple,
    Majority,
}

#[derive(Args, Debug)]
pub struct FuseArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = FuseMethod::Staple)]
    pub method: FuseMethod,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub labels: Vec<u8>,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Foreground prior: `auto` or a value in (0, 1).
    #[arg(long, default_value = "auto")]
    pub prior: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write per-label STAPLE diagnostics as JSON.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    #[arg(long)]
    pub compress: bool,
}

#[derive(Args, Debug)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["preset", "percent", "from_labels"])))]
pub struct CropArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Sidecar path; defaults to the output path with a `.crop.json` suffix.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// Window preset: task1 or task2.
    #[arg(long)]
    pub preset: Option<String>,
    /// Index-space fractions x0,x1,y0,y1,z0,z1.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub percent: Option<Vec<f64>>,
    /// Label volume whose bounding box defines the crop.
    #[arg(long)]
    pub from_labels: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "2", requires = "from_labels")]
    pub labels: Vec<u8>,
    #[arg(long, default_value_t = 30.0, requires = "from_labels")]
    pub margin_mm: f64,
    /// Sidecar of an earlier crop that produced `input`; the new box is appended to its chain.
    #[arg(long)]
    pub chain: Option<PathBuf>,
    #[arg(long)]
    pub compress: bool,
}

#[derive(Args, Debug)]
pub struct UncropArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub sidecar: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub compress: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { Outcome::Usage.into() } else { Outcome::Success.into() };
        }
    };
    let result = match cli.command {
        Command::Info { path } => commands::info(&path),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Fuse(args) => commands::fuse(&args),
        Command::Crop(args) => commands::crop(&args),
        Command::Uncrop(args) => commands::uncrop(&args),
    };
    match result {
        Ok(outcome) => outcome.into(),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            failure.outcome.into()
        }
    }
}
