//! Command line for the color pipeline: spectral/XYZ/sRGB conversion, image
//! ingestion, pairwise Hotelling T² matrices, and the group-model axiom
//! checks.
//!
//! Exit codes: 0 on success, 1 on domain or data errors, 2 on usage errors.

use std::env;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use chromastat::colorimetry::{
    integrate_tristimulus_normalized, srgb_to_xyz, xyz_to_srgb_clamped, ColorMatchingFunctions,
    Normalization, SpectralDistribution, Tristimulus, UnitRgb, DEFAULT_CLAMP_EPS,
};
use chromastat::ingest::{
    ingest_directory, read_summaries_eps, write_summaries_path, IngestOptions,
};
use chromastat::mvstat::{covariance, mean_vector, pairwise_t2, SingularPolicy, Transform};
use chromastat::perceptual::{check_axioms, PositiveTriple};

/// Environment variable naming a CMF CSV used when `--cmf` is absent.
const CMF_ENV_VAR: &str = "CHROMASTAT_CMF";

const DEFAULT_AXIOM_SEED: u64 = 7;

#[derive(Parser)]
#[command(
    name = "chromastat",
    version,
    about = "Colorimetric conversion and group-based color difference testing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert between spectra, XYZ, and scaled sRGB
    Convert(ConvertArgs),
    /// Reduce a directory tree of images to per-group color summaries
    Ingest(IngestArgs),
    /// Pairwise Hotelling T² matrices from a summaries CSV
    Pairwise(PairwiseArgs),
    /// Check the executable axioms of the group model on random samples
    Axioms(AxiomsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    /// SPD file + CMF → tristimulus
    Spectral2xyz,
    /// XYZ triple → scaled sRGB
    Xyz2srgb,
    /// scaled sRGB triple → XYZ
    Srgb2xyz,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long, value_enum)]
    direction: Direction,
    /// Input triple for xyz2srgb / srgb2xyz
    #[arg(value_name = "VALUE", num_args = 0..=3)]
    values: Vec<f64>,
    /// Spectrum CSV (`wavelength_nm,value`) for spectral2xyz
    #[arg(long)]
    spd: Option<PathBuf>,
    /// CMF CSV (`wavelength_nm,xbar,ybar,zbar`); defaults to the built-in
    /// CIE 1931 2° observer, or the file named by CHROMASTAT_CMF
    #[arg(long)]
    cmf: Option<PathBuf>,
    /// Scale factor for spectral integration
    #[arg(long, default_value_t = 1.0, conflicts_with = "y100")]
    k: f64,
    /// Normalize the spectral integration so Y = 100
    #[arg(long)]
    y100: bool,
    /// Open-interval clamp width for unit RGB
    #[arg(long, default_value_t = DEFAULT_CLAMP_EPS)]
    eps: f64,
}

#[derive(Args)]
struct IngestArgs {
    /// Directory with one subdirectory per group
    root: PathBuf,
    /// Output summaries CSV
    #[arg(long, default_value = "summaries.csv")]
    out: PathBuf,
    /// Central crop fraction in (0, 1]
    #[arg(long, default_value_t = 1.0)]
    roi: f64,
    /// Average in linear light instead of display values
    #[arg(long)]
    linear: bool,
    /// Open-interval clamp width for unit RGB
    #[arg(long, default_value_t = DEFAULT_CLAMP_EPS)]
    eps: f64,
}

#[derive(Args)]
struct PairwiseArgs {
    /// Summaries CSV produced by `ingest`
    #[arg(long)]
    summaries: PathBuf,
    /// Componentwise transform applied before testing
    #[arg(long, default_value = "loglog")]
    transform: Transform,
    /// Output CSV for the T² matrix
    #[arg(long, default_value = "t2.csv")]
    t2_out: PathBuf,
    /// Output CSV for the p-value matrix
    #[arg(long, default_value = "p_values.csv")]
    p_out: PathBuf,
    /// Retry singular pooled covariances with a small ridge
    #[arg(long)]
    ridge: bool,
    /// Open-interval clamp width for unit RGB
    #[arg(long, default_value_t = DEFAULT_CLAMP_EPS)]
    eps: f64,
}

#[derive(Args)]
struct AxiomsArgs {
    /// RNG seed; a fixed seed reproduces the report byte for byte
    #[arg(long, default_value_t = DEFAULT_AXIOM_SEED)]
    seed: u64,
    /// Sample size of random positive triples
    #[arg(long, default_value_t = 64)]
    samples: usize,
    /// Number of random scalars in (0, 10]
    #[arg(long, default_value_t = 16)]
    scalars: usize,
}

enum AppError {
    /// Domain or data problem: exit code 1.
    Data(String),
    /// Bad invocation not caught by the parser: exit code 2.
    Usage(String),
}

impl AppError {
    fn data(e: impl std::fmt::Display) -> Self {
        AppError::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Convert(args) => cmd_convert(args),
        Command::Ingest(args) => cmd_ingest(args),
        Command::Pairwise(args) => cmd_pairwise(args),
        Command::Axioms(args) => cmd_axioms(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Data(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
        Err(AppError::Usage(message)) => {
            eprintln!("usage error: {message}");
            ExitCode::from(2)
        }
    }
}

fn load_cmf(explicit: Option<&Path>) -> Result<ColorMatchingFunctions, AppError> {
    if let Some(path) = explicit {
        return ColorMatchingFunctions::from_csv_path(path).map_err(AppError::data);
    }
    if let Ok(path) = env::var(CMF_ENV_VAR) {
        return ColorMatchingFunctions::from_csv_path(&path).map_err(AppError::data);
    }
    Ok(ColorMatchingFunctions::cie_1931_2deg())
}

fn take_triple(values: &[f64]) -> Result<[f64; 3], AppError> {
    <[f64; 3]>::try_from(values)
        .map_err(|_| AppError::Usage(format!("expected exactly 3 values, got {}", values.len())))
}

fn print_triple(t: [f64; 3]) {
    println!("{:.9} {:.9} {:.9}", t[0], t[1], t[2]);
}

fn cmd_convert(args: ConvertArgs) -> Result<(), AppError> {
    match args.direction {
        Direction::Spectral2xyz => {
            if !args.values.is_empty() {
                return Err(AppError::Usage(
                    "spectral2xyz takes --spd, not positional values".into(),
                ));
            }
            let spd_path = args
                .spd
                .as_deref()
                .ok_or_else(|| AppError::Usage("spectral2xyz requires --spd FILE".into()))?;
            let spd = SpectralDistribution::from_csv_path(spd_path).map_err(AppError::data)?;
            let cmf = load_cmf(args.cmf.as_deref())?;
            let normalization = if args.y100 {
                Normalization::LuminanceY100
            } else {
                Normalization::Scale(args.k)
            };
            let t = integrate_tristimulus_normalized(&spd, &cmf, normalization)
                .map_err(AppError::data)?;
            print_triple(t.components());
        }
        Direction::Xyz2srgb => {
            let [x, y, z] = take_triple(&args.values)?;
            let t = Tristimulus::new(x, y, z).map_err(AppError::data)?;
            let (rgb, clamped) = xyz_to_srgb_clamped(&t, args.eps);
            if clamped {
                eprintln!("warning: result clamped into the open unit cube");
            }
            print_triple(rgb.components());
        }
        Direction::Srgb2xyz => {
            let [u, v, w] = take_triple(&args.values)?;
            let (rgb, clamped) = UnitRgb::clamped(u, v, w, args.eps);
            if clamped {
                eprintln!("warning: input clamped into the open unit cube");
            }
            let t = srgb_to_xyz(&rgb).map_err(AppError::data)?;
            print_triple(t.components());
        }
    }
    Ok(())
}

fn cmd_ingest(args: IngestArgs) -> Result<(), AppError> {
    let options = IngestOptions {
        roi_fraction: args.roi,
        linear_light: args.linear,
        clamp_eps: args.eps,
    };
    if !(options.roi_fraction > 0.0 && options.roi_fraction <= 1.0) {
        return Err(AppError::Usage(format!(
            "--roi {} outside (0, 1]",
            options.roi_fraction
        )));
    }
    let report = ingest_directory(&args.root, &options).map_err(AppError::data)?;
    for (path, reason) in &report.skipped_files {
        eprintln!("skipped {}: {reason}", path.display());
    }
    for (label, reason) in &report.rejected_groups {
        eprintln!("rejected group {label}: {reason}");
    }
    if report.groups.is_empty() {
        return Err(AppError::Data("no group survived ingestion".into()));
    }
    for group in &report.groups {
        let g = group.to_sample_group_255().map_err(AppError::data)?;
        let mean = mean_vector(&g);
        let cov = covariance(&g);
        println!(
            "group {}: n={} mean=({:.4}, {:.4}, {:.4}) var=({:.4}, {:.4}, {:.4})",
            group.label,
            g.n(),
            mean[0],
            mean[1],
            mean[2],
            cov[0][0],
            cov[1][1],
            cov[2][2]
        );
    }
    write_summaries_path(&report.groups, &args.out).map_err(AppError::data)?;
    let images: usize = report.groups.iter().map(|g| g.images.len()).sum();
    println!(
        "wrote {} ({} groups, {} images)",
        args.out.display(),
        report.groups.len(),
        images
    );
    Ok(())
}

fn cmd_pairwise(args: PairwiseArgs) -> Result<(), AppError> {
    let file = File::open(&args.summaries)
        .map_err(|e| AppError::Data(format!("{}: {e}", args.summaries.display())))?;
    let groups = read_summaries_eps(file, args.eps).map_err(AppError::data)?;
    let samples: Vec<_> = groups
        .iter()
        .map(|g| g.to_sample_group_unit())
        .collect::<Result<_, _>>()
        .map_err(AppError::data)?;
    let policy = if args.ridge {
        SingularPolicy::Ridge
    } else {
        SingularPolicy::Error
    };
    let matrix = pairwise_t2(&samples, args.transform, policy).map_err(AppError::data)?;
    for (i, j, error) in matrix.failures() {
        eprintln!(
            "warning: cell ({}, {}): {error}",
            matrix.labels()[*i],
            matrix.labels()[*j]
        );
    }
    matrix
        .write_t2_csv(File::create(&args.t2_out).map_err(AppError::data)?)
        .map_err(AppError::data)?;
    matrix
        .write_p_values_csv(File::create(&args.p_out).map_err(AppError::data)?)
        .map_err(AppError::data)?;
    println!(
        "pairwise: {} groups, transform={}, warnings={}",
        matrix.labels().len(),
        args.transform.name(),
        matrix.failures().len()
    );
    println!("wrote {}", args.t2_out.display());
    println!("wrote {}", args.p_out.display());
    Ok(())
}

fn cmd_axioms(args: AxiomsArgs) -> Result<(), AppError> {
    if args.samples == 0 || args.scalars == 0 {
        return Err(AppError::Usage(
            "--samples and --scalars must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    // uniform draws in (0, 10]
    let mut positive = || 10.0 * (1.0 - rng.random::<f64>());
    let sample: Vec<PositiveTriple> = (0..args.samples)
        .map(|_| {
            PositiveTriple::new(positive(), positive(), positive())
                .expect("draws are strictly positive")
        })
        .collect();
    let scalars: Vec<f64> = (0..args.scalars).map(|_| positive()).collect();

    println!(
        "seed={} samples={} scalars={}",
        args.seed, args.samples, args.scalars
    );
    let report = check_axioms(&sample, &scalars).map_err(AppError::data)?;
    print!("{report}");
    if report.all_passed() {
        println!("all checked axioms hold");
        Ok(())
    } else {
        Err(AppError::Data("axiom check failed".into()))
    }
}
