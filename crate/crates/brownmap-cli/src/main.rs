//! Command-line front end: traces domain and image boundaries, evaluates
//! the density on a grid, runs finite matrix comparisons, checks against
//! the closed-form two-point model, and answers single-point queries.
//!
//! Exit codes: 0 success, 2 configuration error, 3 empty result,
//! 4 unsupported combination, 5 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use brownmap::export::{
    self, boundary_csv, density_csv, eigen_csv, overlay_svg, DensityMetadata, DomainReport,
    McReport,
};
use brownmap::rmt::{compare_to_density, sample_model};
use brownmap::{
    oracle, Error, FreeSum, MatrixModel, SpectralMeasure, Tolerances, Window,
};

#[derive(Parser)]
#[command(
    name = "brownmap",
    version,
    about = "Brown measure of x + iy with free Poisson y: domains, densities, matrix checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace the parameter domain and its image boundary; write CSV + SVG.
    Domain(DomainArgs),
    /// Evaluate the density on a grid; write CSV + JSON metadata.
    Density(DensityArgs),
    /// Sample a random matrix and compare its spectrum to the density.
    Mc(McArgs),
    /// Compare the numeric pipeline against the closed-form two-point model.
    OracleCheck(OracleArgs),
    /// Query one point: membership, delta0, and the mapped value.
    Delta0(Delta0Args),
}

#[derive(Args)]
struct CommonArgs {
    /// Measure description (JSON); defaults to the symmetric two-point
    /// measure at +-1.
    #[arg(long)]
    measure: Option<PathBuf>,

    /// Rate of the free Poisson part.
    #[arg(long, default_value_t = 1.0)]
    p: f64,

    /// Window as "x0,x1,y0,y1"; defaults depend on the subcommand.
    #[arg(long, allow_hyphen_values = true)]
    window: Option<Window>,

    /// Cells per window side.
    #[arg(long, default_value_t = 200)]
    resolution: usize,

    /// RNG seed for sampling commands.
    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Worker threads (0 = library default).
    #[arg(long)]
    threads: Option<usize>,

    /// Force single-threaded execution for byte-stable artifacts.
    #[arg(long)]
    deterministic: bool,

    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Matrix model realizing the free Poisson part.
    #[arg(long, default_value = "ginibre")]
    model: MatrixModel,
}

#[derive(Args)]
struct DomainArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct DensityArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Matrix size.
    #[arg(long, default_value_t = 512)]
    n: usize,

    /// Histogram bins along the real axis.
    #[arg(long, default_value_t = 24)]
    bins: usize,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Self-test hook: perturb computed densities by 1% to force a FAIL.
    #[arg(long, hide = true)]
    perturb_density: bool,
}

#[derive(Args)]
struct Delta0Args {
    #[command(flatten)]
    common: CommonArgs,

    /// Query point as "re,im".
    #[arg(allow_hyphen_values = true)]
    point: String,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::InvalidConfig(_) | Error::InvalidMeasure(_) | Error::Json(_) | Error::Io(_) => {
                2
            }
            Error::EmptyBoundary => 3,
            _ => 5,
        };
        Failure::new(code, err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = match &cli.command {
        Command::Domain(a) => &a.common,
        Command::Density(a) => &a.common,
        Command::Mc(a) => &a.common,
        Command::OracleCheck(a) => &a.common,
        Command::Delta0(a) => &a.common,
    };
    validate_common(common)?;
    init_thread_pool(common)?;
    let measure = load_measure(common)?;

    match cli.command {
        Command::Domain(args) => cmd_domain(&args, &measure),
        Command::Density(args) => cmd_density(&args, &measure),
        Command::Mc(args) => cmd_mc(&args, &measure),
        Command::OracleCheck(args) => cmd_oracle_check(&args, &measure),
        Command::Delta0(args) => cmd_delta0(&args, &measure),
    }
}

fn validate_common(common: &CommonArgs) -> Result<(), Failure> {
    if !(common.p.is_finite() && common.p > 0.0) {
        return Err(Failure::new(2, format!("p must be a positive real, got {}", common.p)));
    }
    if common.resolution < 16 {
        return Err(Failure::new(
            2,
            format!("resolution must be at least 16, got {}", common.resolution),
        ));
    }
    Ok(())
}

fn init_thread_pool(common: &CommonArgs) -> Result<(), Failure> {
    let threads = if common.deterministic { Some(1) } else { common.threads };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new(2, format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn load_measure(common: &CommonArgs) -> Result<SpectralMeasure, Failure> {
    match &common.measure {
        Some(path) => Ok(SpectralMeasure::from_json_file(path)?),
        None => Ok(SpectralMeasure::symmetric_two_point(1.0).expect("builtin measure")),
    }
}

fn write(path: &Path, content: &str) -> Result<(), Failure> {
    export::write_artifact(path, content)?;
    Ok(())
}

/// Default tracing window: generous enough to contain the domain for any
/// measure of support radius R, since the domain sits inside a strip of
/// height controlled by the rate and width controlled by the support.
fn default_domain_window(radius: f64, p: f64) -> Window {
    let x = radius + p + 1.0;
    Window::new(-x, x, -(p + 1.0), radius + p + 1.0).expect("nonempty default window")
}

/// Default density window: the image hugs the support horizontally and
/// extends vertically to roughly twice the rate above the support radius.
fn default_density_window(radius: f64, p: f64) -> Window {
    let x = radius + 0.6;
    Window::new(-x, x, 0.01, 2.0 * p + radius + 0.6).expect("nonempty default window")
}

/// Support points whose limit ratio is positive lie outside the closed
/// domain; the downstream theory assumes there are none, so report them.
fn assumption_warnings(fs: &FreeSum, boundary_tol: f64) -> Result<Vec<String>, Failure> {
    let mut warnings = Vec::new();
    let mut check = |t: f64| -> Result<(), Failure> {
        let r = fs.limit_ratio(t, 0.0)?;
        if r > boundary_tol {
            warnings.push(format!(
                "support point t = {t}: limit ratio {r:.3e} > 0, the point lies outside \
                 the closed domain and the density may miss mass near it"
            ));
        }
        Ok(())
    };
    for atom in fs.measure().atoms() {
        check(atom.t)?;
    }
    if let Some((lo, hi)) = fs.measure().ac_support() {
        for k in 0..=8 {
            check(lo + (hi - lo) * k as f64 / 8.0)?;
        }
    }
    Ok(warnings)
}

fn cmd_domain(args: &DomainArgs, measure: &SpectralMeasure) -> Result<(), Failure> {
    let common = &args.common;
    let fs = FreeSum::new(measure, common.p)?;
    let tol = Tolerances::default();
    let window =
        common.window.unwrap_or_else(|| default_domain_window(measure.support_radius(), common.p));

    let trace = fs.trace_domain_boundary(window, common.resolution, tol.boundary)?;
    let mapped = fs.map_boundary(&trace)?;
    let warnings = assumption_warnings(&fs, tol.boundary)?;

    let report = DomainReport {
        schema: export::SCHEMA,
        measure_hash: export::measure_hash(measure),
        p: common.p,
        window,
        resolution: common.resolution,
        boundary_tol: tol.boundary,
        domain_polylines: trace.polylines.len(),
        image_polylines: mapped.polylines.len(),
        limit_path_evals: trace.limit_path_evals,
        warnings: warnings.clone(),
    };

    write(&common.out.join("boundary_D.csv"), &boundary_csv("D", &trace))?;
    write(&common.out.join("boundary_M.csv"), &boundary_csv("M", &mapped))?;
    let svg_window = bounding_window(&[&trace, &mapped])?;
    write(&common.out.join("overlay.svg"), &overlay_svg(svg_window, &[("D", &trace), ("M", &mapped)], &[]))?;
    write(&common.out.join("domain_report.json"), &export::to_json(&report)?)?;

    for w in &warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "domain: {} polyline(s), image: {} polyline(s), {} vertices total",
        trace.polylines.len(),
        mapped.polylines.len(),
        trace.vertex_count() + mapped.vertex_count()
    );
    Ok(())
}

/// Tight window around a set of traces, padded by 5% per side.
fn bounding_window(traces: &[&brownmap::BoundaryTrace]) -> Result<Window, Failure> {
    let mut x0 = f64::INFINITY;
    let mut x1 = f64::NEG_INFINITY;
    let mut y0 = f64::INFINITY;
    let mut y1 = f64::NEG_INFINITY;
    for trace in traces {
        for polyline in &trace.polylines {
            for &(re, im) in polyline {
                x0 = x0.min(re);
                x1 = x1.max(re);
                y0 = y0.min(im);
                y1 = y1.max(im);
            }
        }
    }
    let pad_x = 0.05 * (x1 - x0) + 1e-3;
    let pad_y = 0.05 * (y1 - y0) + 1e-3;
    Window::new(x0 - pad_x, x1 + pad_x, y0 - pad_y, y1 + pad_y).map_err(Into::into)
}

fn cmd_density(args: &DensityArgs, measure: &SpectralMeasure) -> Result<(), Failure> {
    let common = &args.common;
    let fs = FreeSum::new(measure, common.p)?;
    let tol = Tolerances::default();
    let window = common
        .window
        .unwrap_or_else(|| default_density_window(measure.support_radius(), common.p));

    let grid = fs.density_grid(window, common.resolution, tol)?;
    let metadata = DensityMetadata::new(measure, common.p, tol, &grid);

    write(&common.out.join("density.csv"), &density_csv(&grid))?;
    write(&common.out.join("metadata.json"), &export::to_json(&metadata)?)?;

    println!(
        "density: total mass {:.6} over {} cells ({} inversion failures)",
        grid.total_mass,
        grid.points.len(),
        grid.failures
    );
    Ok(())
}

fn cmd_mc(args: &McArgs, measure: &SpectralMeasure) -> Result<(), Failure> {
    let common = &args.common;
    if args.n == 0 {
        return Err(Failure::new(2, "matrix size must be positive"));
    }
    if common.model == MatrixModel::GueSquared && (common.p - 1.0).abs() > 1e-12 {
        return Err(Failure::new(4, "the squared Hermitian model supports p = 1 only"));
    }
    let fs = FreeSum::new(measure, common.p)?;
    let tol = Tolerances::default();

    let cloud = sample_model(measure, common.p, common.model, args.n, common.seed)?;
    let window = match common.window {
        Some(w) => w,
        None => cloud_window(&cloud)?,
    };
    let grid = fs.density_grid(window, common.resolution, tol)?;
    let report = compare_to_density(&cloud, &grid, args.bins)?;
    let sidecar = McReport::new(measure, common.p, &cloud, &grid, &report);

    write(&common.out.join("eigen.csv"), &eigen_csv(&cloud))?;
    write(&common.out.join("mc_report.json"), &export::to_json(&sidecar)?)?;

    println!(
        "mc: n = {}, L1 = {:.4}, containment = {:.4} over {} bins",
        cloud.n, report.l1, report.containment, report.bins
    );
    Ok(())
}

/// Window containing every eigenvalue with 2% relative plus small absolute
/// padding, so the comparison precondition (full coverage) always holds.
fn cloud_window(cloud: &brownmap::EigenCloud) -> Result<Window, Failure> {
    let mut x0 = f64::INFINITY;
    let mut x1 = f64::NEG_INFINITY;
    let mut y0 = f64::INFINITY;
    let mut y1 = f64::NEG_INFINITY;
    for z in &cloud.eigenvalues {
        x0 = x0.min(z.re);
        x1 = x1.max(z.re);
        y0 = y0.min(z.im);
        y1 = y1.max(z.im);
    }
    let pad_x = 0.02 * (x1 - x0) + 0.02;
    let pad_y = 0.02 * (y1 - y0) + 0.02;
    Window::new(x0 - pad_x, x1 + pad_x, y0 - pad_y, y1 + pad_y).map_err(Into::into)
}

fn cmd_delta0(args: &Delta0Args, measure: &SpectralMeasure) -> Result<(), Failure> {
    let common = &args.common;
    let fs = FreeSum::new(measure, common.p)?;
    let (re, im) = parse_point(&args.point)?;
    let lambda = Complex64::new(re, im);

    let inside = fs.is_in_domain(re, im)?;
    let delta0 = fs.delta0(re, im)?;
    let h = fs.h_map(lambda)?;

    println!("lambda = {re:.16e} + {im:.16e} i");
    println!("inside = {inside}");
    println!("delta0 = {delta0:.16e}");
    println!("h      = {:.16e} + {:.16e} i", h.re, h.im);
    Ok(())
}

fn parse_point(text: &str) -> Result<(f64, f64), Failure> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Failure::new(2, format!("point must be 're,im', got '{text}'")));
    }
    let mut vals = [0.0f64; 2];
    for (v, part) in vals.iter_mut().zip(&parts) {
        *v = part
            .parse()
            .map_err(|_| Failure::new(2, format!("point component '{part}' is not a number")))?;
    }
    Ok((vals[0], vals[1]))
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn cmd_oracle_check(args: &OracleArgs, measure: &SpectralMeasure) -> Result<(), Failure> {
    let common = &args.common;
    if !is_oracle_measure(measure) || (common.p - 1.0).abs() > 1e-12 {
        return Err(Failure::new(4, "no oracle for this measure"));
    }
    let fs = FreeSum::new(measure, 1.0)?;
    let perturb = if args.perturb_density { 1.01 } else { 1.0 };

    let checks = run_oracle_battery(&fs, perturb)?;
    let mut all_pass = true;
    for c in &checks {
        println!("CHECK {}: {} ({})", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
        all_pass &= c.pass;
    }
    if all_pass {
        println!("ORACLE CHECK: PASS");
        Ok(())
    } else {
        println!("ORACLE CHECK: FAIL");
        Err(Failure::new(5, "oracle comparison exceeded tolerance"))
    }
}

fn is_oracle_measure(measure: &SpectralMeasure) -> bool {
    let atoms = measure.atoms();
    measure.is_atomic()
        && atoms.len() == 2
        && (atoms[0].t + 1.0).abs() < 1e-12
        && (atoms[1].t - 1.0).abs() < 1e-12
        && (atoms[0].w - 0.5).abs() < 1e-12
        && (atoms[1].w - 0.5).abs() < 1e-12
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| a + (b - a) * k as f64 / (n - 1) as f64)
}

fn run_oracle_battery(fs: &FreeSum, perturb: f64) -> Result<Vec<Check>, Failure> {
    let mut checks = Vec::new();

    // Domain membership against the sign of the closed-form polynomial,
    // skipping a thin collar where roundoff could flip either side.
    let mut mismatches = 0usize;
    let mut tested = 0usize;
    let mut inside_points = Vec::new();
    for alpha in linspace(-2.0, 2.0, 41) {
        for beta in linspace(-1.0, 2.0, 31) {
            if oracle::domain_poly(alpha, beta).abs() < 1e-3 {
                continue;
            }
            if fs.measure().atom_at(alpha).is_some() && beta == 0.0 {
                // Atom membership is covered below through delta0.
            }
            tested += 1;
            let expect = oracle::in_domain(alpha, beta);
            if fs.is_in_domain(alpha, beta)? != expect {
                mismatches += 1;
            }
            if expect {
                inside_points.push((alpha, beta));
            }
        }
    }
    checks.push(Check {
        name: "domain-membership",
        pass: mismatches == 0,
        detail: format!("{mismatches} mismatches over {tested} points"),
    });

    // delta0 on every interior sample.
    let mut max_dev = 0.0f64;
    for &(alpha, beta) in &inside_points {
        let got = fs.delta0(alpha, beta)?;
        let want = oracle::delta0(alpha, beta)?;
        max_dev = max_dev.max((got - want).abs());
    }
    let tol = 1e-9;
    checks.push(Check {
        name: "delta0",
        pass: max_dev < tol,
        detail: format!("max deviation {max_dev:.3e}, tolerance {tol:.1e}"),
    });

    // The mapped value inside and outside.
    let h_points = [
        (0.0, 0.5),
        (0.5, 0.3),
        (-0.7, 0.1),
        (1.0, 0.0),
        (0.3, -0.2),
        (2.0, 0.5),
        (0.0, 2.0),
        (-1.8, -0.4),
        (1.5, 1.5),
    ];
    let mut max_dev = 0.0f64;
    for (alpha, beta) in h_points {
        let lambda = Complex64::new(alpha, beta);
        let dev = (fs.h_map(lambda)? - oracle::h(lambda)).norm();
        max_dev = max_dev.max(dev);
    }
    let tol = 1e-8;
    checks.push(Check {
        name: "h-map",
        pass: max_dev < tol,
        detail: format!("max deviation {max_dev:.3e}, tolerance {tol:.1e}"),
    });

    // Interior image samples: Newton inversion against the closed-form
    // inverse, then the density value (which carries the Jacobian).
    let mut max_inv = 0.0f64;
    let mut max_f = 0.0f64;
    let mut samples = 0usize;
    for s in [-0.8, -0.4, 0.0, 0.4, 0.8] {
        for t in linspace(0.2, 3.2, 16) {
            if oracle::image_poly(s, t) >= -1e-3 {
                continue;
            }
            samples += 1;
            let z = Complex64::new(s, t);
            let point = fs.density_at(z)?;
            let want_pre = oracle::h_inverse(s, t)?;
            let inv_dev = ((point.alpha - want_pre.re).powi(2)
                + (point.beta - want_pre.im).powi(2))
            .sqrt();
            max_inv = max_inv.max(inv_dev);
            max_f = max_f.max((point.f * perturb - oracle::density(s, t)).abs());
        }
    }
    let tol_inv = 1e-8;
    checks.push(Check {
        name: "inverse",
        pass: max_inv < tol_inv && samples > 30,
        detail: format!("max deviation {max_inv:.3e} over {samples} points, tolerance {tol_inv:.1e}"),
    });
    let tol_f = 1e-7;
    checks.push(Check {
        name: "density",
        pass: max_f < tol_f,
        detail: format!("max deviation {max_f:.3e}, tolerance {tol_f:.1e}"),
    });

    Ok(checks)
}
