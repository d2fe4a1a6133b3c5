//! Weighted Lebesgue points: densities `ρ₁, ρ₂`, their integrals `μ₁, μ₂`
//! and the quadrant quotient
//!
//! ```text
//! 1/(μ₁(h) μ₂(k)) ∫₀ʰ ∫₀ᵏ |f(t + x₀, s + y₀) − f(x₀, y₀)| ds dt
//! ```

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::class_a::Verdict;
use crate::error::{Error, Result};
use crate::operator::{DomainSpec, SampleFunction};
use crate::quadrature::{self, QuadOptions, Rect};
use crate::trend;

type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Number of interior probes used to check positivity and consistency of μ.
pub const MU_PROBES: usize = 32;

const MU_QUAD_TOL: f64 = 1e-13;

#[derive(Clone)]
pub struct MuPair {
    pub rho1: Fn1,
    pub rho2: Fn1,
    pub mu1: Fn1,
    pub mu2: Fn1,
    pub delta0: f64,
}

impl fmt::Debug for MuPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MuPair").field("delta0", &self.delta0).finish_non_exhaustive()
    }
}

fn probes(delta0: f64) -> impl Iterator<Item = f64> {
    (1..=MU_PROBES).map(move |i| delta0 * i as f64 / (MU_PROBES + 1) as f64)
}

fn check_delta0(delta0: f64) -> Result<()> {
    if !(delta0 > 0.0) || !delta0.is_finite() {
        return Err(Error::InvalidDensity(format!("delta0 must be positive and finite, got {delta0}")));
    }
    Ok(())
}

/// Rejects densities that go negative or give `μ(h) ≤ 0` at a probe.
fn check_density(name: &str, rho: &Fn1, mu: &Fn1, delta0: f64) -> Result<()> {
    for h in probes(delta0) {
        let r = rho(h);
        if !(r >= 0.0) {
            return Err(Error::InvalidDensity(format!("{name}: rho({h}) = {r} is not non-negative")));
        }
        let m = mu(h);
        if !(m > 0.0) {
            return Err(Error::InvalidDensity(format!("{name}: mu({h}) = {m} is not positive")));
        }
    }
    Ok(())
}

fn integrate_density(rho: &Fn1, h: f64) -> f64 {
    if h <= 0.0 {
        return 0.0;
    }
    let f = |t: f64| Ok(rho(t));
    quadrature::integrate_1d(f, 0.0, h, MU_QUAD_TOL).map(|q| q.value).unwrap_or(f64::NAN)
}

impl MuPair {
    /// `ρ ≡ 1`, `μ(h) = h`.
    pub fn identity(delta0: f64) -> Result<MuPair> {
        check_delta0(delta0)?;
        let one: Fn1 = Arc::new(|_| 1.0);
        let id: Fn1 = Arc::new(|h| h);
        Ok(MuPair {
            rho1: one.clone(),
            rho2: one,
            mu1: id.clone(),
            mu2: id,
            delta0,
        })
    }

    /// μ by quadrature of the densities.
    pub fn from_density<R1, R2>(rho1: R1, rho2: R2, delta0: f64) -> Result<MuPair>
    where
        R1: Fn(f64) -> f64 + Send + Sync + 'static,
        R2: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        check_delta0(delta0)?;
        let (rho1, rho2): (Fn1, Fn1) = (Arc::new(rho1), Arc::new(rho2));
        let (r1, r2) = (rho1.clone(), rho2.clone());
        let mu1: Fn1 = Arc::new(move |h| integrate_density(&r1, h));
        let mu2: Fn1 = Arc::new(move |h| integrate_density(&r2, h));
        check_density("rho1", &rho1, &mu1, delta0)?;
        check_density("rho2", &rho2, &mu2, delta0)?;
        Ok(MuPair {
            rho1,
            rho2,
            mu1,
            mu2,
            delta0,
        })
    }

    /// Densities with closed-form μ, checked against quadrature to `1e-10`
    /// at the probes.
    pub fn with_closed_form(rho1: Fn1, rho2: Fn1, mu1: Fn1, mu2: Fn1, delta0: f64) -> Result<MuPair> {
        check_delta0(delta0)?;
        check_density("rho1", &rho1, &mu1, delta0)?;
        check_density("rho2", &rho2, &mu2, delta0)?;
        for (name, rho, mu) in [("mu1", &rho1, &mu1), ("mu2", &rho2, &mu2)] {
            if mu(0.0) != 0.0 {
                return Err(Error::InvalidDensity(format!("{name}(0) must be 0")));
            }
            for h in probes(delta0) {
                let q = integrate_density(rho, h);
                if !((mu(h) - q).abs() <= 1e-10 * q.abs().max(1.0)) {
                    return Err(Error::InvalidDensity(format!(
                        "{name}({h}) = {} disagrees with the integral of its density {q}",
                        mu(h)
                    )));
                }
            }
        }
        Ok(MuPair {
            rho1,
            rho2,
            mu1,
            mu2,
            delta0,
        })
    }

    /// `δ₀ < min(b − a, d − c)` for a bounded domain and `δ₀ ≤ min(δ₁, δ₂)`
    /// when the kernel declares radii.
    pub fn check_compatibility(&self, domain: &DomainSpec, radii: Option<(f64, f64)>) -> Result<()> {
        if let DomainSpec::Bounded(d) = domain {
            if !(self.delta0 < d.width().min(d.height())) {
                return Err(Error::InvalidInput(format!(
                    "delta0 = {} must be below the smaller side of the domain",
                    self.delta0
                )));
            }
        }
        if let Some((d1, d2)) = radii {
            if !(self.delta0 <= d1.min(d2)) {
                return Err(Error::InvalidInput(format!(
                    "delta0 = {} exceeds the kernel monotonicity radii ({d1}, {d2})",
                    self.delta0
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LebesgueOptions {
    /// Average over all four quadrants around the point instead of the
    /// upper-right one. Exploratory only.
    pub symmetric_quadrants: bool,
    pub tol_leb: f64,
    pub quad_tol: f64,
}

impl Default for LebesgueOptions {
    fn default() -> Self {
        LebesgueOptions {
            symmetric_quadrants: false,
            tol_leb: 1e-3,
            quad_tol: 1e-11,
        }
    }
}

/// Quotient over the upper-right quadrant with default options.
pub fn lebesgue_quotient(f: &SampleFunction, mp: &MuPair, x0: f64, y0: f64, h: f64, k: f64) -> Result<f64> {
    lebesgue_quotient_with(f, mp, x0, y0, h, k, &LebesgueOptions::default())
}

/// The integral is computed on the unit square, `∫₀ʰ∫₀ᵏ g = hk ∬ g(hu, kv)`,
/// so tiny quadrants lose no relative accuracy.
pub fn lebesgue_quotient_with(
    f: &SampleFunction,
    mp: &MuPair,
    x0: f64,
    y0: f64,
    h: f64,
    k: f64,
    opts: &LebesgueOptions,
) -> Result<f64> {
    if !(h > 0.0 && h < mp.delta0 && k > 0.0 && k < mp.delta0) {
        return Err(Error::InvalidInput(format!(
            "need 0 < h, k < delta0 = {}, got h = {h}, k = {k}",
            mp.delta0
        )));
    }
    let quadrants: &[(f64, f64)] = if opts.symmetric_quadrants {
        &[(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
    } else {
        &[(1.0, 1.0)]
    };
    if let DomainSpec::Bounded(d) = f.domain {
        for &(sx, sy) in quadrants {
            let (ta, tb) = (x0.min(x0 + sx * h), x0.max(x0 + sx * h));
            let (sa, sb) = (y0.min(y0 + sy * k), y0.max(y0 + sy * k));
            if !(d.a <= ta && tb <= d.b && d.c <= sa && sb <= d.d) {
                return Err(Error::QuadrantOutsideDomain { x: x0, y: y0, h, k });
            }
        }
    }
    let c = f.representative(x0, y0)?;
    let unit = Rect::new(0.0, 1.0, 0.0, 1.0)?;
    let mut parts = Vec::with_capacity(quadrants.len());
    for &(sx, sy) in quadrants {
        let scaled = |breaks: &[f64], o: f64, w: f64| -> Vec<f64> {
            breaks.iter().map(|b| (b - o) / w).filter(|u| *u > 0.0 && *u < 1.0).collect()
        };
        let q = QuadOptions::default().with_breaks(
            &scaled(&f.t_breaks, x0, sx * h),
            &scaled(&f.s_breaks, y0, sy * k),
        );
        let g = |u: f64, v: f64| Ok((f.evaluate(x0 + sx * h * u, y0 + sy * k * v)? - c).abs());
        parts.push(quadrature::try_integrate_rect(g, &unit, opts.quad_tol, &q)?.value);
    }
    let mean = quadrature::pairwise_sum(&parts) / quadrants.len() as f64;
    let (m1, m2) = ((mp.mu1)(h), (mp.mu2)(k));
    if !(m1 > 0.0 && m2 > 0.0) {
        return Err(Error::InvalidDensity(format!("mu1({h}) = {m1}, mu2({k}) = {m2} must be positive")));
    }
    Ok(mean * (h / m1) * (k / m2))
}

/// `δ₀/2 · 2^{-i}` for `i = 0..24`.
pub fn default_h_grid(delta0: f64) -> Vec<f64> {
    (0..24).map(|i| 0.5 * delta0 / 2f64.powi(i)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadrantPath {
    /// `(h, h)`
    Diagonal,
    /// `(h, h²)`
    FlatT,
    /// `(h², h)`
    FlatS,
}

impl QuadrantPath {
    pub const ALL: [QuadrantPath; 3] = [QuadrantPath::Diagonal, QuadrantPath::FlatT, QuadrantPath::FlatS];

    pub fn point(self, h: f64) -> (f64, f64) {
        match self {
            QuadrantPath::Diagonal => (h, h),
            QuadrantPath::FlatT => (h, h * h),
            QuadrantPath::FlatS => (h * h, h),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub h: f64,
    pub k: f64,
    pub quotient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LebesgueTrace {
    pub path: QuadrantPath,
    pub points: Vec<TracePoint>,
    pub decays: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LebesgueReport {
    pub x0: f64,
    pub y0: f64,
    /// `Pass` for a Lebesgue point, `Inconclusive` when a quadrant leaves
    /// the domain.
    pub verdict: Verdict,
    pub traces: Vec<LebesgueTrace>,
    pub notes: String,
}

impl LebesgueReport {
    pub fn is_point(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Evaluates the quotient along `(h, h)`, `(h, h²)` and `(h², h)`; the point
/// qualifies when every trace ends below `tol_leb` with a non-increasing tail.
pub fn verify_lebesgue_point(
    f: &SampleFunction,
    mp: &MuPair,
    x0: f64,
    y0: f64,
    h_grid: &[f64],
    opts: &LebesgueOptions,
) -> Result<LebesgueReport> {
    if h_grid.is_empty() || h_grid.iter().any(|&h| !(h > 0.0 && h < mp.delta0)) {
        return Err(Error::InvalidInput(format!("h grid must be non-empty and inside (0, {})", mp.delta0)));
    }
    let mut traces = Vec::with_capacity(3);
    for path in QuadrantPath::ALL {
        let pts = h_grid
            .par_iter()
            .map(|&h| {
                let (h, k) = path.point(h);
                match lebesgue_quotient_with(f, mp, x0, y0, h, k, opts) {
                    Ok(quotient) => Ok(Some(TracePoint { h, k, quotient })),
                    Err(Error::QuadrantOutsideDomain { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if pts.iter().any(Option::is_none) {
            return Ok(LebesgueReport {
                x0,
                y0,
                verdict: Verdict::Inconclusive,
                traces,
                notes: format!("a {path:?} quadrant does not fit inside the domain"),
            });
        }
        let points: Vec<TracePoint> = pts.into_iter().flatten().collect();
        let values: Vec<f64> = points.iter().map(|p| p.quotient).collect();
        let decays = trend::tends_to_zero(&values, opts.tol_leb);
        traces.push(LebesgueTrace { path, points, decays });
    }
    let all = traces.iter().all(|t| t.decays);
    let notes = traces
        .iter()
        .map(|t| format!("{:?}: last quotient {:.6e}", t.path, t.points.last().map_or(f64::NAN, |p| p.quotient)))
        .collect::<Vec<_>>()
        .join("; ");
    Ok(LebesgueReport {
        x0,
        y0,
        verdict: if all { Verdict::Pass } else { Verdict::Fail },
        traces,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::catalog_function;

    #[test]
    fn identity_values() {
        let m = MuPair::identity(0.5).unwrap();
        assert_eq!((m.mu1)(0.3), 0.3);
        assert_eq!((m.rho1)(0.7), 1.0);
        assert_eq!((m.mu2)(0.0), 0.0);
    }

    #[test]
    fn density_integrals() {
        let m = MuPair::from_density(|t| 2.0 * t, |_| 1.0, 0.6).unwrap();
        assert!(((m.mu1)(0.5) - 0.25).abs() < 1e-14);
        let c = MuPair::from_density(f64::cos, f64::cos, 1.0).unwrap();
        assert!(((c.mu1)(1.0) - 0.8414709848078965).abs() < 1e-10);
        assert!(matches!(MuPair::from_density(|_| 0.0, |_| 1.0, 0.5), Err(Error::InvalidDensity(_))));
        assert!(MuPair::from_density(|t| t - 0.1, |_| 1.0, 0.5).is_err());
    }

    #[test]
    fn closed_form_must_match_density() {
        let rho: Fn1 = Arc::new(|t| 2.0 * t);
        let good: Fn1 = Arc::new(|h| h * h);
        let bad: Fn1 = Arc::new(|h| h * h * 1.01);
        assert!(MuPair::with_closed_form(rho.clone(), rho.clone(), good.clone(), good, 0.5).is_ok());
        assert!(MuPair::with_closed_form(rho.clone(), rho.clone(), bad.clone(), bad, 0.5).is_err());
    }

    #[test]
    fn quotient_of_linear_function() {
        let f = catalog_function("t").unwrap();
        let m = MuPair::identity(0.5).unwrap();
        let q = lebesgue_quotient(&f, &m, 0.2, 0.2, 0.1, 0.1).unwrap();
        assert!((q - 0.05).abs() < 1e-12, "{q}");
    }

    #[test]
    fn quotient_of_constant_is_zero() {
        let f = SampleFunction::constant(3.0, DomainSpec::unit_square());
        let m = MuPair::identity(0.5).unwrap();
        assert_eq!(lebesgue_quotient(&f, &m, 0.4, 0.3, 0.2, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn corner_of_quadrant_jump() {
        let f = catalog_function("quadrant_jump").unwrap();
        let m = MuPair::identity(0.5).unwrap();
        for (h, k) in [(0.1, 0.1), (1e-3, 0.3), (1e-6, 1e-9)] {
            assert_eq!(lebesgue_quotient(&f, &m, 0.0, 0.0, h, k).unwrap(), 1.0);
        }
        let r = verify_lebesgue_point(&f, &m, 0.0, 0.0, &default_h_grid(0.5), &LebesgueOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn quadrant_must_fit() {
        let f = catalog_function("t").unwrap();
        let m = MuPair::identity(0.5).unwrap();
        assert!(matches!(
            lebesgue_quotient(&f, &m, 0.9, 0.5, 0.2, 0.2),
            Err(Error::QuadrantOutsideDomain { .. })
        ));
        let r = verify_lebesgue_point(&f, &m, 0.9, 0.5, &default_h_grid(0.5), &LebesgueOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(lebesgue_quotient(&f, &m, 0.2, 0.2, 0.5, 0.1).is_err());
    }

    #[test]
    fn sqrt_abs_at_its_cusp() {
        let f = catalog_function("sqrt_abs").unwrap();
        let m = MuPair::identity(0.5).unwrap();
        let h = 0.01;
        let q = lebesgue_quotient(&f, &m, 0.0, 0.0, h, h).unwrap();
        assert!((q - 2.0 / 3.0 * h.sqrt()).abs() < 1e-10, "{q}");
        let r = verify_lebesgue_point(&f, &m, 0.0, 0.0, &default_h_grid(0.5), &LebesgueOptions::default()).unwrap();
        assert!(r.is_point());
    }

    #[test]
    fn symmetric_quadrants_average() {
        let f = catalog_function("t").unwrap();
        let m = MuPair::identity(0.5).unwrap();
        let opts = LebesgueOptions {
            symmetric_quadrants: true,
            ..LebesgueOptions::default()
        };
        let q = lebesgue_quotient_with(&f, &m, 0.5, 0.5, 0.1, 0.1, &opts).unwrap();
        assert!((q - 0.05).abs() < 1e-12);
    }
}
