//! Command-line front end: dataset generation, inversion, evaluation, and
//! rendering.
//!
//! Exit codes: 0 success, 1 invalid usage or arguments, 2 malformed data on
//! disk, 3 numerical failure.

use clap::{Args, Parser, Subcommand, ValueEnum};
use elastinv::fem::{
    add_noise, build_phantom, solve_plane_strain, traction_for_axial_strain_limit, MaterialSpec,
    PhantomSpec,
};
use elastinv::grid::{
    compute_scales, engineering_from_lame, BoundarySpec, EdgeSpec, GridGeom, MaterialField,
    ScalarField,
};
use elastinv::io::{
    read_field_csv, render_ppm, write_aggregate, write_run, BundleMeta, FieldBundle, NoiseMeta,
    FORMAT_VERSION,
};
use elastinv::loss::Variant;
use elastinv::train::{aggregate_runs, mean_abs_rel_error, median, train, TrainConfig, TrainInputs};
use elastinv::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "elastinv", version, about = "Physics-informed recovery of elastic material maps")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset with the built-in forward solver.
    Generate(GenerateArgs),
    /// Train an inversion model on a dataset.
    Invert(InvertArgs),
    /// Compare recovered maps in a results directory against ground truth.
    Evaluate(EvaluateArgs),
    /// Render a field CSV as a grayscale PPM image.
    Render(RenderArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Output bundle directory.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 64)]
    nx: usize,
    #[arg(long, default_value_t = 64)]
    ny: usize,
    #[arg(long, default_value_t = 1.0)]
    length_x: f64,
    #[arg(long, default_value_t = 1.0)]
    length_y: f64,
    /// Phantom description (JSON). Defaults to a stiff circular inclusion
    /// in a soft background.
    #[arg(long)]
    phantom: Option<PathBuf>,
    /// Two-sided vertical tension in Pa (normal traction on top and bottom,
    /// traction-free sides). Defaults to the largest value keeping the
    /// nominal axial strain at or below 5%.
    #[arg(long)]
    tension: Option<f64>,
    /// Full boundary description (JSON), overrides --tension.
    #[arg(long)]
    boundary: Option<PathBuf>,
    /// Gaussian strain noise level, as a fraction of each channel's max.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    P,
    Ps,
    PsW1,
    PsW2,
    DensePinn,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::P => Variant::P,
            VariantArg::Ps => Variant::Ps,
            VariantArg::PsW1 => Variant::PsW1,
            VariantArg::PsW2 => Variant::PsW2,
            VariantArg::DensePinn => Variant::DensePinn,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Args)]
struct InvertArgs {
    /// Input bundle directory (from `generate`).
    #[arg(long)]
    data: PathBuf,
    /// Results directory.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    variant: VariantArg,
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    /// Comma-separated seeds, one run each.
    #[arg(long, default_value = "1", value_delimiter = ',')]
    seeds: Vec<u64>,
    /// UNet channel widths per level.
    #[arg(long, default_value = "64,128,256,512,1024", value_delimiter = ',')]
    features: Vec<usize>,
    /// Hidden widths of the dense baseline.
    #[arg(long, default_value = "64,64,64,64", value_delimiter = ',')]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    precision: Precision,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Bundle directory holding the ground truth.
    #[arg(long)]
    data: PathBuf,
    /// Results directory (from `invert`).
    #[arg(long)]
    results: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Field CSV (its dimensions define the image size).
    input: PathBuf,
    /// Output PPM path.
    output: PathBuf,
    /// Lower end of the grayscale ramp (default: field minimum).
    #[arg(long)]
    min: Option<f64>,
    /// Upper end of the grayscale ramp (default: field maximum).
    #[arg(long)]
    max: Option<f64>,
}

fn default_phantom() -> PhantomSpec {
    PhantomSpec::Inclusion {
        background: MaterialSpec { e: 1000.0, nu: 0.45 },
        inclusion: MaterialSpec { e: 2000.0, nu: 0.35 },
        center: [0.5, 0.5],
        radius: 0.2,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Error::format(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&raw)?)
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let geom = GridGeom::new(args.nx, args.ny, args.length_x, args.length_y)?;
    let phantom = match &args.phantom {
        Some(p) => read_json(p)?,
        None => default_phantom(),
    };
    let material: MaterialField<f64> = build_phantom(&phantom, geom)?;
    let bc = match &args.boundary {
        Some(p) => read_json::<BoundarySpec>(p)?,
        None => {
            let t = match args.tension {
                Some(t) => t,
                None => traction_for_axial_strain_limit(&material, 0.05),
            };
            if t <= 0.0 {
                return Err(Error::invalid("tension must be positive"));
            }
            BoundarySpec {
                bottom: EdgeSpec::traction(t, 0.0),
                top: EdgeSpec::traction(t, 0.0),
                left: EdgeSpec::traction(0.0, 0.0),
                right: EdgeSpec::traction(0.0, 0.0),
            }
        }
    };
    let scales = compute_scales(&geom, &bc)?;
    let sol = solve_plane_strain(&material, &bc)?;
    eprintln!(
        "solved: {} CG iterations, relative residual {:.2e}, force balance {:.2e}",
        sol.stats.cg_iterations, sol.stats.cg_residual, sol.stats.force_balance_rel
    );
    let strain = add_noise(&sol.strain, args.noise, args.noise_seed)?;

    let n = geom.len();
    let mut e = Vec::with_capacity(n);
    let mut nu = Vec::with_capacity(n);
    for k in 0..n {
        let (ek, nk) =
            engineering_from_lame(material.lambda.values()[k], material.mu.values()[k])?;
        e.push(ek);
        nu.push(nk);
    }
    let bundle = FieldBundle {
        meta: BundleMeta {
            format_version: FORMAT_VERSION,
            nx: args.nx,
            ny: args.ny,
            length_x: args.length_x,
            length_y: args.length_y,
            scales,
            boundary: bc,
            noise: (args.noise > 0.0).then_some(NoiseMeta { level: args.noise, seed: args.noise_seed }),
            phantom: Some(phantom),
        },
        strain,
        truth_e: Some(ScalarField::new(geom, e)?),
        truth_nu: Some(ScalarField::new(geom, nu)?),
        truth_stress: Some(sol.stress),
    };
    bundle.write(&args.output)?;
    println!("wrote bundle to {}", args.output.display());
    Ok(())
}

fn invert(args: &InvertArgs) -> Result<()> {
    if args.seeds.is_empty() {
        return Err(Error::invalid("at least one seed is required"));
    }
    let bundle = FieldBundle::read(&args.data)?;
    let variant: Variant = args.variant.into();
    let mut config = TrainConfig::new(variant, args.epochs, 0);
    config.features = args.features.clone();
    config.hidden = args.hidden.clone();
    config.adam.lr = args.lr;

    let mut runs = Vec::with_capacity(args.seeds.len());
    for &seed in &args.seeds {
        config.seed = seed;
        let run = match args.precision {
            Precision::F64 => {
                let inputs = TrainInputs {
                    strain: &bundle.strain,
                    bc: &bundle.meta.boundary,
                    scales: bundle.meta.scales,
                    truth_e: bundle.truth_e.as_ref(),
                    truth_nu: bundle.truth_nu.as_ref(),
                };
                train(&config, &inputs)?
            }
            Precision::F32 => {
                let strain32 = bundle.strain.cast::<f32>();
                let inputs = TrainInputs {
                    strain: &strain32,
                    bc: &bundle.meta.boundary,
                    scales: bundle.meta.scales,
                    truth_e: bundle.truth_e.as_ref(),
                    truth_nu: bundle.truth_nu.as_ref(),
                };
                train(&config, &inputs)?
            }
        };
        let last = run.log.last().expect("nonempty log");
        eprintln!(
            "seed {seed}: total loss {:.6e}, err_E {:?}, err_nu {:?}",
            last.loss.total, last.err_e, last.err_nu
        );
        write_run(&args.output, &run)?;
        runs.push(run);
    }
    let agg = aggregate_runs(&runs)?;
    write_aggregate(&args.output, &agg)?;
    println!("wrote {} runs to {}", runs.len(), args.output.display());
    Ok(())
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let bundle = FieldBundle::read(&args.data)?;
    let geom = bundle.geom();
    let truth_e = bundle
        .truth_e
        .as_ref()
        .ok_or_else(|| Error::format("bundle has no ground truth E map"))?;
    let truth_nu = bundle
        .truth_nu
        .as_ref()
        .ok_or_else(|| Error::format("bundle has no ground truth nu map"))?;

    let mut entries: Vec<(u64, PathBuf)> = Vec::new();
    for de in std::fs::read_dir(&args.results)? {
        let de = de?;
        let name = de.file_name().to_string_lossy().into_owned();
        if let Some(seed) = name.strip_prefix("run-").and_then(|s| s.parse().ok()) {
            entries.push((seed, de.path()));
        }
    }
    if entries.is_empty() {
        return Err(Error::format(format!("no run-* directories in {}", args.results.display())));
    }
    entries.sort();

    let mut err_e_all = Vec::new();
    let mut err_nu_all = Vec::new();
    let mut per_run = Vec::new();
    for (seed, dir) in &entries {
        let est_e = read_field_csv(&dir.join("est_E.csv"), geom)?;
        let est_nu = read_field_csv(&dir.join("est_nu.csv"), geom)?;
        let mask_f = read_field_csv(&dir.join("mask.csv"), geom)?;
        let mask: Vec<bool> = mask_f.values().iter().map(|&v| v != 0.0).collect();
        let ee = mean_abs_rel_error(est_e.values(), truth_e.values(), &mask);
        let en = mean_abs_rel_error(est_nu.values(), truth_nu.values(), &mask);
        if let (Some(a), Some(b)) = (ee, en) {
            err_e_all.push(a);
            err_nu_all.push(b);
        }
        per_run.push(serde_json::json!({ "seed": seed, "err_E": ee, "err_nu": en }));
    }
    let med = |v: &[f64]| (v.len() == entries.len()).then(|| median(v));
    let report = serde_json::json!({
        "runs": per_run,
        "median_err_E": med(&err_e_all),
        "median_err_nu": med(&err_nu_all),
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn render(args: &RenderArgs) -> Result<()> {
    // The CSV is self-describing: columns x rows give the image size.
    let raw = std::fs::read_to_string(&args.input)
        .map_err(|e| Error::format(format!("cannot read {}: {e}", args.input.display())))?;
    let rows: Vec<&str> = raw.lines().filter(|l| !l.is_empty()).collect();
    if rows.is_empty() {
        return Err(Error::format("empty CSV"));
    }
    let nx = rows[0].split(',').count();
    let ny = rows.len();
    if nx < 2 || ny < 2 {
        return Err(Error::format("field CSV must be at least 2x2"));
    }
    let geom = GridGeom::new(nx, ny, 1.0, 1.0)?;
    let field = read_field_csv(&args.input, geom)?;
    let range = match (args.min, args.max) {
        (None, None) => None,
        (lo, hi) => {
            let vals = field.values();
            let lo = lo.unwrap_or_else(|| vals.iter().cloned().fold(f64::INFINITY, f64::min));
            let hi = hi.unwrap_or_else(|| vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            Some((lo, hi))
        }
    };
    render_ppm(&args.output, &field, range)?;
    println!("wrote {}", args.output.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Generate(a) => generate(a),
        Cmd::Invert(a) => invert(a),
        Cmd::Evaluate(a) => evaluate(a),
        Cmd::Render(a) => render(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version as "errors" that should exit 0.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::InvalidArgument(_) => 1,
                Error::Format(_) | Error::Io(_) | Error::Json(_) => 2,
                Error::Numerical(_) => 3,
            };
            ExitCode::from(code)
        }
    }
}
