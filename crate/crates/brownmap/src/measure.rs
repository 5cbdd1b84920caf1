//! The input distribution mu_x: atoms plus an optional absolutely continuous
//! part held as quadrature nodes, with every integral the pipeline needs.
//!
//! All downstream quantities reduce to weighted sums against this measure:
//! the scalar Cauchy transform, the three standard integrals
//!
//! ```text
//! S = int (alpha - t) / ((alpha - t)^2 + beta^2 + delta^2) dmu(t)
//! T = int        1    / ((alpha - t)^2 + beta^2 + delta^2) dmu(t)
//! D = delta^2 T^2 + S^2 + (1 - beta T)^2
//! ```
//!
//! and the squared-denominator integrals behind their first partials.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Default Gauss-Legendre node count for absolutely continuous parts.
pub const DEFAULT_AC_NODES: usize = 2001;

/// The evaluation point is near-singular when beta^2 + delta^2 falls below
/// this and alpha sits inside the a.c. support; plain nodes then miss the
/// O(1/(beta^2 + delta^2)) peak and a graded composite rule takes over.
pub const NEAR_SINGULAR_THRESHOLD: f64 = 1e-6;

/// Total mass may be off by at most this much before loading fails.
pub const MASS_NORMALIZATION_SLACK: f64 = 1e-9;

/// One atom of the measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    /// Location on the real line.
    pub t: f64,
    /// Mass, in (0, 1].
    pub w: f64,
}

/// How the a.c. density between quadrature nodes is reconstructed when the
/// graded near-singular rule needs pointwise values.
#[derive(Debug, Clone)]
enum DensityModel {
    /// Constant density carrying `mass` over the support interval.
    Uniform { mass: f64 },
    /// Piecewise-linear interpolant of weight-per-cell estimates at the nodes.
    Tabulated { ts: Vec<f64>, rhos: Vec<f64> },
}

/// Absolutely continuous part: support interval, quadrature nodes, and a
/// density reconstruction for near-singular refinement.
#[derive(Debug, Clone)]
struct AcPart {
    lo: f64,
    hi: f64,
    /// (node, weight); weights are nonnegative and include the density.
    nodes: Vec<(f64, f64)>,
    density: DensityModel,
}

impl AcPart {
    /// Pointwise density estimate used by the graded rule.
    fn density_at(&self, t: f64) -> f64 {
        match &self.density {
            DensityModel::Uniform { mass } => {
                if t >= self.lo && t <= self.hi {
                    mass / (self.hi - self.lo)
                } else {
                    0.0
                }
            }
            DensityModel::Tabulated { ts, rhos } => {
                if t < self.lo || t > self.hi || ts.is_empty() {
                    return 0.0;
                }
                match ts.binary_search_by(|probe| probe.total_cmp(&t)) {
                    Ok(i) => rhos[i],
                    Err(0) => rhos[0],
                    Err(i) if i == ts.len() => rhos[ts.len() - 1],
                    Err(i) => {
                        let (t0, t1) = (ts[i - 1], ts[i]);
                        let frac = (t - t0) / (t1 - t0);
                        rhos[i - 1] + frac * (rhos[i] - rhos[i - 1])
                    }
                }
            }
        }
    }
}

/// A compactly supported probability measure on the real line, given as
/// atoms and/or quadrature nodes. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SpectralMeasure {
    atoms: Vec<Atom>,
    ac: Option<AcPart>,
    support_radius: f64,
}

/// On-disk measure description (output side).
#[derive(Debug, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum MeasureFile {
    Atomic {
        atoms: Vec<Atom>,
    },
    Quadrature {
        support: [f64; 2],
        density: String,
        #[serde(default)]
        nodes: Vec<f64>,
        #[serde(default)]
        weights: Vec<f64>,
    },
}

// Input side: the tag is dispatched by hand and each variant parses on its
// own, so type errors can carry the full field path.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomicInput {
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadratureInput {
    support: [f64; 2],
    density: String,
    #[serde(default)]
    nodes: Vec<f64>,
    #[serde(default)]
    weights: Vec<f64>,
}

/// Deserialize a JSON value, prefixing errors with the offending field.
fn deserialize_named<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            Error::InvalidMeasure(inner.to_string())
        } else {
            Error::InvalidMeasure(format!("field '{path}': {inner}"))
        }
    })
}

/// Near-singular handling chosen for one evaluation point.
enum AcPlan {
    /// Sum over the stored nodes.
    Standard,
    /// Graded composite panels around alpha with the given peak scale.
    Graded { scale: f64 },
    /// The integral cannot stabilize (peak of positive density, zero width).
    Divergent,
}

impl SpectralMeasure {
    /// Purely atomic measure. Requires at least two distinct atoms with
    /// positive weights summing to 1 within the normalization slack.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        let atoms: Vec<Atom> = atoms.iter().map(|&(t, w)| Atom { t, w }).collect();
        Self::build(atoms, None)
    }

    /// The symmetric two-point measure (delta_{-a} + delta_{a}) / 2.
    pub fn symmetric_two_point(a: f64) -> Result<Self> {
        Self::from_atoms(&[(-a, 0.5), (a, 0.5)])
    }

    /// Uniform density on [lo, hi] with the default node count.
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::uniform_with_nodes(lo, hi, DEFAULT_AC_NODES)
    }

    /// Uniform density on [lo, hi] carried by an n-point Gauss-Legendre rule.
    pub fn uniform_with_nodes(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidMeasure(format!(
                "uniform support [{lo}, {hi}] is not a proper interval"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidMeasure("need at least 2 quadrature nodes".into()));
        }
        let height = 1.0 / (hi - lo);
        let nodes: Vec<(f64, f64)> = quad::gauss_legendre(n, lo, hi)
            .into_iter()
            .map(|(t, w)| (t, w * height))
            .collect();
        let ac = AcPart { lo, hi, nodes, density: DensityModel::Uniform { mass: 1.0 } };
        Self::build(Vec::new(), Some(ac))
    }

    /// Parse a measure description from its JSON text.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let mut value: serde_json::Value = serde_json::from_str(text)?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| Error::InvalidMeasure("top level must be a JSON object".into()))?;
        let kind = match obj.remove("type") {
            Some(serde_json::Value::String(s)) => s,
            _ => {
                return Err(Error::InvalidMeasure(
                    "field 'type': missing or not a string".into(),
                ))
            }
        };
        match kind.as_str() {
            "atomic" => {
                let input: AtomicInput = deserialize_named(value)?;
                Self::build(input.atoms, None)
            }
            "quadrature" => {
                let QuadratureInput { support, density, nodes, weights } =
                    deserialize_named(value)?;
                let [lo, hi] = support;
                if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                    return Err(Error::InvalidMeasure(format!(
                        "field 'support': [{lo}, {hi}] is not a proper interval"
                    )));
                }
                match density.as_str() {
                    "uniform" if nodes.is_empty() => {
                        Self::uniform_with_nodes(lo, hi, DEFAULT_AC_NODES)
                    }
                    "uniform" | "tabulated" => {
                        if nodes.len() != weights.len() {
                            return Err(Error::InvalidMeasure(format!(
                                "field 'nodes': {} nodes but {} weights",
                                nodes.len(),
                                weights.len()
                            )));
                        }
                        if nodes.len() < 2 {
                            return Err(Error::InvalidMeasure(
                                "field 'nodes': need at least 2 quadrature nodes".into(),
                            ));
                        }
                        let mut pairs: Vec<(f64, f64)> =
                            nodes.into_iter().zip(weights).collect();
                        pairs.sort_by(|l, r| l.0.total_cmp(&r.0));
                        for pair in pairs.windows(2) {
                            if pair[0].0 == pair[1].0 {
                                return Err(Error::InvalidMeasure(format!(
                                    "field 'nodes': duplicate node {}",
                                    pair[0].0
                                )));
                            }
                        }
                        if pairs.iter().any(|&(t, _)| t < lo || t > hi) {
                            return Err(Error::InvalidMeasure(
                                "field 'nodes': node outside the support interval".into(),
                            ));
                        }
                        if pairs.iter().any(|&(_, w)| !(w >= 0.0)) {
                            return Err(Error::InvalidMeasure(
                                "field 'weights': negative or NaN weight".into(),
                            ));
                        }
                        let density = if density == "uniform" {
                            let mass: f64 = pairs.iter().map(|&(_, w)| w).sum();
                            DensityModel::Uniform { mass }
                        } else {
                            tabulated_density(&pairs, lo, hi)
                        };
                        let ac = AcPart { lo, hi, nodes: pairs, density };
                        Self::build(Vec::new(), Some(ac))
                    }
                    other => Err(Error::InvalidMeasure(format!(
                        "field 'density': unknown kind '{other}' (expected 'tabulated' or 'uniform')"
                    ))),
                }
            }
            other => Err(Error::InvalidMeasure(format!(
                "field 'type': unknown kind '{other}' (expected 'atomic' or 'quadrature')"
            ))),
        }
    }

    /// Load a measure description from a JSON file.
    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Serialize in the same schema accepted by the loader.
    pub fn to_json_string(&self) -> String {
        let file = match &self.ac {
            None => MeasureFile::Atomic { atoms: self.atoms.clone() },
            Some(ac) => MeasureFile::Quadrature {
                support: [ac.lo, ac.hi],
                density: match ac.density {
                    DensityModel::Uniform { .. } => "uniform".into(),
                    DensityModel::Tabulated { .. } => "tabulated".into(),
                },
                nodes: ac.nodes.iter().map(|&(t, _)| t).collect(),
                weights: ac.nodes.iter().map(|&(_, w)| w).collect(),
            },
        };
        serde_json::to_string(&file).expect("measure serialization cannot fail")
    }

    fn build(mut atoms: Vec<Atom>, mut ac: Option<AcPart>) -> Result<Self> {
        for atom in &atoms {
            if !atom.t.is_finite() {
                return Err(Error::InvalidMeasure(format!("atom location {} not finite", atom.t)));
            }
            if !(atom.w > 0.0 && atom.w <= 1.0 + MASS_NORMALIZATION_SLACK) {
                return Err(Error::InvalidMeasure(format!(
                    "atom weight {} outside (0, 1]",
                    atom.w
                )));
            }
        }
        atoms.sort_by(|l, r| l.t.total_cmp(&r.t));
        for pair in atoms.windows(2) {
            if pair[0].t == pair[1].t {
                return Err(Error::InvalidMeasure(format!(
                    "duplicate atom location {}",
                    pair[0].t
                )));
            }
        }
        let has_ac = ac.as_ref().map(|p| !p.nodes.is_empty()).unwrap_or(false);
        if !has_ac && atoms.len() < 2 {
            return Err(Error::InvalidMeasure(
                "need at least two atoms or a quadrature part".into(),
            ));
        }

        let atom_mass: f64 = atoms.iter().map(|a| a.w).sum();
        let ac_mass: f64 = ac
            .as_ref()
            .map(|p| p.nodes.iter().map(|&(_, w)| w).sum())
            .unwrap_or(0.0);
        let total = atom_mass + ac_mass;
        if (total - 1.0).abs() > MASS_NORMALIZATION_SLACK {
            return Err(Error::InvalidMeasure(format!(
                "total mass {total} differs from 1 by more than {MASS_NORMALIZATION_SLACK:e}"
            )));
        }
        // Normalize exactly so the mass invariant holds to 1e-12 downstream.
        if total != 1.0 {
            for atom in &mut atoms {
                atom.w /= total;
            }
            if let Some(part) = &mut ac {
                for node in &mut part.nodes {
                    node.1 /= total;
                }
                if let DensityModel::Uniform { mass } = &mut part.density {
                    *mass /= total;
                }
                if let DensityModel::Tabulated { rhos, .. } = &mut part.density {
                    for rho in rhos {
                        *rho /= total;
                    }
                }
            }
        }

        let mut radius: f64 = atoms.iter().map(|a| a.t.abs()).fold(0.0, f64::max);
        if let Some(part) = &ac {
            radius = radius.max(part.lo.abs()).max(part.hi.abs());
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidMeasure("support radius must be positive".into()));
        }

        Ok(Self { atoms, ac, support_radius: radius })
    }

    /// Atoms sorted by location.
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Quadrature nodes of the a.c. part, empty for purely atomic measures.
    pub fn quad_nodes(&self) -> &[(f64, f64)] {
        self.ac.as_ref().map(|p| p.nodes.as_slice()).unwrap_or(&[])
    }

    /// Support interval of the a.c. part, if any.
    pub fn ac_support(&self) -> Option<(f64, f64)> {
        self.ac.as_ref().map(|p| (p.lo, p.hi))
    }

    /// Bound on |t| over the support.
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// True when the measure is purely atomic.
    pub fn is_atomic(&self) -> bool {
        self.ac.is_none()
    }

    /// The atom at location `t`, if one sits there exactly.
    pub fn atom_at(&self, t: f64) -> Option<Atom> {
        self.atoms.iter().copied().find(|a| a.t == t)
    }

    /// Scalar Cauchy transform G(lambda) = int 1/(lambda - u) dmu(u).
    ///
    /// Real lambda at an atom is a pole; real lambda inside the a.c. support
    /// has no finite Cauchy integral either and is reported as divergent.
    pub fn cauchy_transform(&self, lambda: Complex64) -> Result<Complex64> {
        if lambda.im == 0.0 {
            if self.atom_at(lambda.re).is_some() {
                return Err(Error::PoleAtAtom(lambda.re));
            }
            if let Some(ac) = &self.ac {
                if lambda.re >= ac.lo && lambda.re <= ac.hi {
                    return Err(Error::DivergentIntegral {
                        alpha: lambda.re,
                        beta: 0.0,
                        delta: 0.0,
                    });
                }
            }
        }
        let mut g = Complex64::new(0.0, 0.0);
        for atom in &self.atoms {
            g += atom.w / (lambda - atom.t);
        }
        if let Some(ac) = &self.ac {
            for &(t, w) in &ac.nodes {
                g += w / (lambda - t);
            }
        }
        Ok(g)
    }

    /// Decide how the a.c. part is integrated at (alpha, beta, delta).
    fn ac_plan(&self, alpha: f64, beta: f64, delta: f64) -> AcPlan {
        let Some(ac) = &self.ac else { return AcPlan::Standard };
        let width2 = beta * beta + delta * delta;
        let margin = NEAR_SINGULAR_THRESHOLD.sqrt();
        let inside = alpha >= ac.lo - margin && alpha <= ac.hi + margin;
        if !inside || width2 >= NEAR_SINGULAR_THRESHOLD {
            return AcPlan::Standard;
        }
        if width2 == 0.0 {
            // Zero-width peak: divergent wherever the density does not vanish.
            if ac.density_at(alpha) > 1e-12 {
                return AcPlan::Divergent;
            }
            return AcPlan::Graded { scale: 1e-14 };
        }
        AcPlan::Graded { scale: width2.sqrt() }
    }

    /// Run `visit(t, w)` over every mass point, with the a.c. part swapped
    /// for graded panels when the evaluation point is near-singular.
    fn for_each_mass_point(
        &self,
        alpha: f64,
        beta: f64,
        delta: f64,
        mut visit: impl FnMut(f64, f64),
    ) -> Result<()> {
        for atom in &self.atoms {
            visit(atom.t, atom.w);
        }
        let Some(ac) = &self.ac else { return Ok(()) };
        match self.ac_plan(alpha, beta, delta) {
            AcPlan::Standard => {
                for &(t, w) in &ac.nodes {
                    visit(t, w);
                }
            }
            AcPlan::Graded { scale } => {
                for (t, w) in quad::graded_panels(ac.lo, ac.hi, alpha, scale) {
                    visit(t, w * ac.density_at(t));
                }
            }
            AcPlan::Divergent => {
                return Err(Error::DivergentIntegral { alpha, beta, delta });
            }
        }
        Ok(())
    }

    /// The standard integrals S, T and the derived denominator D.
    pub fn std_integrals(&self, alpha: f64, beta: f64, delta: f64) -> Result<StdIntegrals> {
        if delta == 0.0 && beta == 0.0 && self.atom_at(alpha).is_some() {
            return Err(Error::DivergentIntegral { alpha, beta, delta });
        }
        let mut s = 0.0;
        let mut t_int = 0.0;
        self.for_each_mass_point(alpha, beta, delta, |t, w| {
            let q = (alpha - t) * (alpha - t) + beta * beta + delta * delta;
            s += w * (alpha - t) / q;
            t_int += w / q;
        })?;
        let d = delta * delta * t_int * t_int + s * s + (1.0 - beta * t_int) * (1.0 - beta * t_int);
        Ok(StdIntegrals { s, t: t_int, d })
    }

    /// S, T, D together with their six first partials and the
    /// squared-denominator integrals I0, I1, I2.
    pub fn std_partials(&self, alpha: f64, beta: f64, delta: f64) -> Result<StdPartials> {
        if delta == 0.0 && beta == 0.0 && self.atom_at(alpha).is_some() {
            return Err(Error::DivergentIntegral { alpha, beta, delta });
        }
        let mut s = 0.0;
        let mut t_int = 0.0;
        let mut i0 = 0.0;
        let mut i1 = 0.0;
        let mut i2 = 0.0;
        self.for_each_mass_point(alpha, beta, delta, |t, w| {
            let a_t = alpha - t;
            let q = a_t * a_t + beta * beta + delta * delta;
            let qq = q * q;
            s += w * a_t / q;
            t_int += w / q;
            i0 += w / qq;
            i1 += w * a_t / qq;
            i2 += w * a_t * a_t / qq;
        })?;
        let d = delta * delta * t_int * t_int + s * s + (1.0 - beta * t_int) * (1.0 - beta * t_int);
        Ok(StdPartials {
            vals: StdIntegrals { s, t: t_int, d },
            ds_dalpha: t_int - 2.0 * i2,
            ds_dbeta: -2.0 * beta * i1,
            ds_ddelta: -2.0 * delta * i1,
            dt_dalpha: -2.0 * i1,
            dt_dbeta: -2.0 * beta * i0,
            dt_ddelta: -2.0 * delta * i0,
            i0,
            i1,
            i2,
        })
    }
}

/// Piecewise-linear density reconstruction: weight per local cell length.
fn tabulated_density(pairs: &[(f64, f64)], lo: f64, hi: f64) -> DensityModel {
    let n = pairs.len();
    let mut ts = Vec::with_capacity(n);
    let mut rhos = Vec::with_capacity(n);
    for i in 0..n {
        let left = if i == 0 { lo } else { 0.5 * (pairs[i - 1].0 + pairs[i].0) };
        let right = if i == n - 1 { hi } else { 0.5 * (pairs[i].0 + pairs[i + 1].0) };
        let cell = (right - left).max(f64::MIN_POSITIVE);
        ts.push(pairs[i].0);
        rhos.push(pairs[i].1 / cell);
    }
    DensityModel::Tabulated { ts, rhos }
}

/// The standard integrals at one point.
#[derive(Debug, Clone, Copy)]
pub struct StdIntegrals {
    /// S = int (alpha - t) / ((alpha - t)^2 + beta^2 + delta^2) dmu.
    pub s: f64,
    /// T = int 1 / ((alpha - t)^2 + beta^2 + delta^2) dmu.
    pub t: f64,
    /// D = delta^2 T^2 + S^2 + (1 - beta T)^2.
    pub d: f64,
}

/// S, T, D with all first partials and the auxiliary integrals.
#[derive(Debug, Clone, Copy)]
pub struct StdPartials {
    pub vals: StdIntegrals,
    /// dS/dalpha = T - 2 I2.
    pub ds_dalpha: f64,
    /// dS/dbeta = -2 beta I1.
    pub ds_dbeta: f64,
    /// dS/ddelta = -2 delta I1.
    pub ds_ddelta: f64,
    /// dT/dalpha = -2 I1.
    pub dt_dalpha: f64,
    /// dT/dbeta = -2 beta I0.
    pub dt_dbeta: f64,
    /// dT/ddelta = -2 delta I0.
    pub dt_ddelta: f64,
    /// I0 = int 1 / q^2 dmu with q = (alpha - t)^2 + beta^2 + delta^2.
    pub i0: f64,
    /// I1 = int (alpha - t) / q^2 dmu.
    pub i1: f64,
    /// I2 = int (alpha - t)^2 / q^2 dmu.
    pub i2: f64,
}

impl StdPartials {
    /// Partials of D assembled from the stored values at (beta, delta).
    ///
    /// dD/dx = 2 delta^2 T T_x + 2 S S_x - 2 (1 - beta T) (beta T)_x,
    /// plus the explicit 2 delta T^2 term in the delta direction and the
    /// explicit -2 (1 - beta T) T term in the beta direction.
    pub fn d_partials(&self, beta: f64, delta: f64) -> (f64, f64, f64) {
        let StdIntegrals { s, t, .. } = self.vals;
        let one_bt = 1.0 - beta * t;
        let dd_dalpha = 2.0 * delta * delta * t * self.dt_dalpha + 2.0 * s * self.ds_dalpha
            - 2.0 * one_bt * beta * self.dt_dalpha;
        let dd_dbeta = 2.0 * delta * delta * t * self.dt_dbeta + 2.0 * s * self.ds_dbeta
            - 2.0 * one_bt * (t + beta * self.dt_dbeta);
        let dd_ddelta = 2.0 * delta * t * t + 2.0 * delta * delta * t * self.dt_ddelta
            + 2.0 * s * self.ds_ddelta
            - 2.0 * one_bt * beta * self.dt_ddelta;
        (dd_dalpha, dd_dbeta, dd_ddelta)
    }
}
