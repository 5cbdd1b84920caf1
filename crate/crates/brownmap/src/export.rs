//! File artifacts: CSV tables, JSON sidecars, and a quick-look SVG overlay.
//!
//! Every float in a CSV prints as `{:.16e}` (17 significant digits) so a
//! rerun with the same configuration is byte-identical. JSON sidecars all
//! carry `"schema": "brownmap/1"` plus a content hash of the input measure
//! so artifacts can be traced back to their inputs.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::boundary::BoundaryTrace;
use crate::config::{Tolerances, Window};
use crate::density::DensityGrid;
use crate::error::Result;
use crate::measure::SpectralMeasure;
use crate::rmt::{DensityReport, EigenCloud, MatrixModel};

/// Version tag stamped on every JSON sidecar.
pub const SCHEMA: &str = "brownmap/1";

/// SHA-256 hex digest of the measure's canonical JSON form.
pub fn measure_hash(measure: &SpectralMeasure) -> String {
    let canonical = measure.to_json_string();
    let digest = Sha256::digest(canonical.as_bytes());
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// Boundary polylines as CSV. `which` tags every row, so the domain and
/// image files share one header and can be concatenated for plotting.
pub fn boundary_csv(which: &str, trace: &BoundaryTrace) -> String {
    let mut out = String::from("which,polyline_id,vertex_id,re,im\n");
    for (pid, polyline) in trace.polylines.iter().enumerate() {
        for (vid, &(re, im)) in polyline.iter().enumerate() {
            let _ = writeln!(out, "{which},{pid},{vid},{re:.16e},{im:.16e}");
        }
    }
    out
}

/// Density grid as CSV, row-major with rows by increasing t.
pub fn density_csv(grid: &DensityGrid) -> String {
    let mut out = String::from("s,t,inside,alpha,beta,delta0,f\n");
    for p in &grid.points {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            p.s,
            p.t,
            p.inside as u8,
            p.alpha,
            p.beta,
            p.delta0,
            p.f
        );
    }
    out
}

/// Eigenvalue cloud as CSV, one row per eigenvalue in sorted order.
pub fn eigen_csv(cloud: &EigenCloud) -> String {
    let mut out = String::from("re,im\n");
    for z in &cloud.eigenvalues {
        let _ = writeln!(out, "{:.16e},{:.16e}", z.re, z.im);
    }
    out
}

/// Sidecar for a density run.
#[derive(Debug, Serialize)]
pub struct DensityMetadata {
    pub schema: &'static str,
    pub measure_hash: String,
    pub p: f64,
    pub window: Window,
    pub resolution: usize,
    pub tolerances: Tolerances,
    pub total_mass: f64,
    pub failure_count: usize,
}

impl DensityMetadata {
    pub fn new(
        measure: &SpectralMeasure,
        p: f64,
        tolerances: Tolerances,
        grid: &DensityGrid,
    ) -> Self {
        Self {
            schema: SCHEMA,
            measure_hash: measure_hash(measure),
            p,
            window: grid.window,
            resolution: grid.resolution,
            tolerances,
            total_mass: grid.total_mass,
            failure_count: grid.failures,
        }
    }
}

/// Sidecar for a boundary-tracing run. `warnings` carries the diagnostic
/// for support points whose limit ratio is positive (the standing
/// assumption that the support sits inside the closed domain would fail),
/// and `limit_path_evals` counts boundary nodes where the map fell back to
/// a one-sided limit on the real axis.
#[derive(Debug, Serialize)]
pub struct DomainReport {
    pub schema: &'static str,
    pub measure_hash: String,
    pub p: f64,
    pub window: Window,
    pub resolution: usize,
    pub boundary_tol: f64,
    pub domain_polylines: usize,
    pub image_polylines: usize,
    pub limit_path_evals: usize,
    pub warnings: Vec<String>,
}

/// Sidecar for a Monte Carlo run.
#[derive(Debug, Serialize)]
pub struct McReport {
    pub schema: &'static str,
    pub measure_hash: String,
    pub p: f64,
    pub model: MatrixModel,
    pub n: usize,
    pub seed: u64,
    pub grid_window: Window,
    pub grid_resolution: usize,
    pub bins: usize,
    pub l1: f64,
    pub containment: f64,
    pub dilation: f64,
    pub bin_counts: Vec<usize>,
    pub bin_model: Vec<f64>,
    pub bin_residuals: Vec<f64>,
}

impl McReport {
    pub fn new(
        measure: &SpectralMeasure,
        p: f64,
        cloud: &EigenCloud,
        grid: &DensityGrid,
        report: &DensityReport,
    ) -> Self {
        Self {
            schema: SCHEMA,
            measure_hash: measure_hash(measure),
            p,
            model: cloud.model,
            n: cloud.n,
            seed: cloud.seed,
            grid_window: grid.window,
            grid_resolution: grid.resolution,
            bins: report.bins,
            l1: report.l1,
            containment: report.containment,
            dilation: report.dilation,
            bin_counts: report.bin_counts.clone(),
            bin_model: report.bin_model.clone(),
            bin_residuals: report.bin_residuals.clone(),
        }
    }
}

/// Serialize any sidecar to pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Write a string artifact, creating parent directories as needed.
pub fn write_artifact(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, content)?;
    Ok(())
}

/// Quick-look SVG: boundary polylines (one stroke color per trace, cycling
/// a fixed palette) over an optional eigenvalue scatter. Pure convenience
/// output; the CSV files are the contract.
pub fn overlay_svg(
    window: Window,
    traces: &[(&str, &BoundaryTrace)],
    scatter: &[(f64, f64)],
) -> String {
    const W: f64 = 720.0;
    const MARGIN: f64 = 24.0;
    const PALETTE: [&str; 4] = ["#1f6feb", "#d26911", "#8250df", "#1a7f37"];

    let aspect = window.height() / window.width();
    let h = (W * aspect).clamp(180.0, 1440.0);
    let sx = |x: f64| MARGIN + (x - window.x0) / window.width() * W;
    let sy = |y: f64| MARGIN + (window.y1 - y) / window.height() * h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {:.0} {:.0}\">",
        W + 2.0 * MARGIN,
        h + 2.0 * MARGIN
    );
    let _ = writeln!(
        out,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{W:.0}\" height=\"{h:.0}\" \
         fill=\"white\" stroke=\"#999\"/>"
    );
    // Axes, when they cross the window.
    if window.x0 < 0.0 && window.x1 > 0.0 {
        let x = sx(0.0);
        let _ = writeln!(
            out,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" \
             stroke=\"#ddd\"/>",
            sy(window.y0),
            sy(window.y1)
        );
    }
    if window.y0 < 0.0 && window.y1 > 0.0 {
        let y = sy(0.0);
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" \
             stroke=\"#ddd\"/>",
            sx(window.x0),
            sx(window.x1)
        );
    }
    for (re, im) in scatter {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.6\" fill=\"#57606a\" \
             fill-opacity=\"0.45\"/>",
            sx(*re),
            sy(*im)
        );
    }
    for (k, (label, trace)) in traces.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        for polyline in &trace.polylines {
            let mut points = String::new();
            for &(re, im) in polyline {
                let _ = write!(points, "{:.2},{:.2} ", sx(re), sy(im));
            }
            let _ = writeln!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" \
                 stroke-width=\"1.5\"><title>{label}</title></polyline>",
                points.trim_end()
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
