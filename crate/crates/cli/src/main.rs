mod commands;
mod config;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::FileConfig;

#[derive(Debug, Parser)]
#[command(name = "hgs", version, about = "UV-structured 3D human Gaussians: templates, rigs, rendering, fitting and sampling")]
struct Cli {
    /// TOML config; flags given on the command line override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for rendering (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for every stochastic step
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print a machine-readable JSON summary on stdout
    #[arg(long, global = true)]
    json: bool,
    /// Repeat for more log output on stderr
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the procedural humanoid template
    Template(TemplateArgs),
    /// Write the camera rig as one JSON file per view
    Rig(RigArgs),
    /// Render an asset from a camera directory with checksums
    Render(RenderArgs),
    /// Remove a root rotation and translation from an asset
    Canonicalize(CanonicalizeArgs),
    /// Initialize a UV map by back-projecting view colors
    InitUv(InitUvArgs),
    /// Write the self-consistency fitting fixture
    Fixture(FixtureArgs),
    /// Fit a UV attribute map to posed target views
    Fit(FitArgs),
    /// Drive a fitted map with a pose sequence and render each frame
    Pose(PoseArgs),
    /// Run the DDIM sampler against an analytic fixture denoiser
    Sample(SampleArgs),
    /// PSNR and SSIM between two images
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
pub struct TemplateArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Vertices around each limb ring
    #[arg(long)]
    pub segments: Option<usize>,
    /// Rings from pole to pole of each limb
    #[arg(long)]
    pub rings: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RigArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Square image size; focal lengths scale with it
    #[arg(long)]
    pub size: Option<u32>,
    /// Camera distance from the target for every ring
    #[arg(long)]
    pub radius: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub asset: PathBuf,
    /// Directory of camera JSON files (or one with a `cameras/` subdirectory)
    #[arg(long)]
    pub cameras: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Render this many evenly spaced cameras instead of all
    #[arg(long)]
    pub views: Option<usize>,
    /// Background color as r,g,b in [0, 1]
    #[arg(long, value_parser = parse_vec3)]
    pub background: Option<[f64; 3]>,
    #[arg(long, default_value = "asset")]
    pub asset_id: String,
}

#[derive(Debug, Args)]
pub struct CanonicalizeArgs {
    #[arg(long)]
    pub asset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Root rotation as an axis-angle vector in radians
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true, default_value = "0,0,0")]
    pub rotation: [f64; 3],
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true, default_value = "0,0,0")]
    pub translation: [f64; 3],
    /// Apply the root transform instead of removing it
    #[arg(long)]
    pub inverse: bool,
}

#[derive(Debug, Args)]
pub struct InitUvArgs {
    #[arg(long)]
    pub template: PathBuf,
    /// View directory with `cameras/` and `renders/`
    #[arg(long)]
    pub targets: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub uv_size: Option<usize>,
    /// Number of evenly spaced views to sample colors from
    #[arg(long)]
    pub views: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub uv_size: usize,
    #[arg(long, default_value_t = 256)]
    pub image_size: u32,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub template: PathBuf,
    /// View directory with `cameras/` and `renders/`
    #[arg(long)]
    pub targets: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub uv_size: Option<usize>,
    /// Input view indices (default: the directory's split, else all non-eval views)
    #[arg(long, value_delimiter = ',')]
    pub views: Option<Vec<usize>>,
    /// Held-out view indices reported after fitting
    #[arg(long, value_delimiter = ',')]
    pub eval_views: Option<Vec<usize>>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub lambda_ssim: Option<f64>,
    /// Start from this UV map instead of zeros
    #[arg(long, conflicts_with = "init_uv")]
    pub init: Option<PathBuf>,
    /// Start from colors back-projected from the input views
    #[arg(long)]
    pub init_uv: bool,
    /// Print a progress line every this many iterations
    #[arg(long, default_value_t = 10)]
    pub log_every: usize,
}

#[derive(Debug, Args)]
pub struct PoseArgs {
    #[arg(long)]
    pub template: PathBuf,
    #[arg(long)]
    pub map: PathBuf,
    /// JSON file holding one pose or an array of poses
    #[arg(long)]
    pub poses: PathBuf,
    #[arg(long)]
    pub cameras: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixtureDenoiser {
    /// Data is a single latent; the sampler should land on it
    PointMass,
    /// Data is i.i.d. normal with `--mean` and `--std`
    Gaussian,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub cfg_scale: Option<f64>,
    #[arg(long, default_value = "linear")]
    pub schedule: String,
    /// Length of the training noise schedule
    #[arg(long, default_value_t = 1000)]
    pub train_steps: usize,
    /// Latent height,width,channels
    #[arg(long, value_parser = parse_shape, default_value = "64,64,16")]
    pub shape: (usize, usize, usize),
    #[arg(long, value_enum, default_value_t = FixtureDenoiser::PointMass)]
    pub fixture: FixtureDenoiser,
    /// Point-mass target latent (default: seeded noise, written next to the output)
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub mean: f64,
    #[arg(long, default_value_t = 1.0)]
    pub std: f64,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
}

fn parse_triple<T: std::str::FromStr>(s: &str) -> Result<[T; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b, c] = parts[..] else {
        return Err(format!("expected three comma-separated values, got {s:?}"));
    };
    let parse = |v: &str| v.parse::<T>().map_err(|_| format!("invalid number {v:?}"));
    Ok([parse(a)?, parse(b)?, parse(c)?])
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    parse_triple(s)
}

fn parse_shape(s: &str) -> Result<(usize, usize, usize), String> {
    let [h, w, c] = parse_triple(s)?;
    Ok((h, w, c))
}

/// The error and its causes, skipping causes already quoted by the message before them.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

/// Settings every subcommand sees.
pub struct Global {
    pub seed: Option<u64>,
    pub json: bool,
    pub file: FileConfig,
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let file = FileConfig::load(cli.config.as_deref())?;
    if let Some(threads) = cli.threads.or(file.threads) {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let global = Global {
        seed: cli.seed.or(file.seed),
        json: cli.json,
        file,
    };
    match cli.command {
        Command::Template(a) => commands::template(&global, a),
        Command::Rig(a) => commands::rig(&global, a),
        Command::Render(a) => commands::render(&global, a),
        Command::Canonicalize(a) => commands::canonicalize(&global, a),
        Command::InitUv(a) => commands::init_uv(&global, a),
        Command::Fixture(a) => commands::fixture(&global, a),
        Command::Fit(a) => commands::fit(&global, a),
        Command::Pose(a) => commands::pose(&global, a),
        Command::Sample(a) => commands::sample(&global, a),
        Command::Metrics(a) => commands::metrics(&global, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triples_parse_with_signs() {
        assert_eq!(parse_vec3("0.5,-1,2").unwrap(), [0.5, -1.0, 2.0]);
        assert_eq!(parse_shape("8, 8, 4").unwrap(), (8, 8, 4));
        assert!(parse_vec3("1,2").is_err());
        assert!(parse_shape("1,2,x").is_err());
    }

    #[test]
    fn flags_are_checked_by_clap() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        assert!(Cli::try_parse_from(["hgs", "canonicalize", "--asset", "a", "--out", "b", "--rotation", "-0.5,0,1"]).is_ok());
        assert!(Cli::try_parse_from(["hgs", "rig", "--out", "x", "--unknown"]).is_err());
    }
}
