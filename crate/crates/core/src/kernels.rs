//! Kernel families `K_λ(t, s)` indexed by a non-negative parameter λ that
//! accumulates at λ₀, and the built-in catalog.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::quadrature::{self, QuadOptions, Rect};

/// Tail mass allowed outside the effective support of an unbounded kernel.
pub const DEFAULT_TAIL_EPS: f64 = 1e-10;

/// Names accepted by [`catalog_kernel`].
pub const CATALOG_KERNELS: [&str; 3] = ["box", "gauss", "signed_asym"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accumulation {
    Finite(f64),
    Infinity,
}

/// The index set Λ ⊆ [lambda_min, lambda_max] with accumulation point λ₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexSet {
    pub lambda_min: f64,
    /// `f64::INFINITY` for an unbounded set.
    pub lambda_max: f64,
    pub accumulation: Accumulation,
}

impl IndexSet {
    pub fn new(lambda_min: f64, lambda_max: f64, accumulation: Accumulation) -> Result<IndexSet> {
        let set = IndexSet {
            lambda_min,
            lambda_max,
            accumulation,
        };
        set.validate()?;
        Ok(set)
    }

    /// `[lambda_min, ∞)` accumulating at infinity.
    pub fn to_infinity(lambda_min: f64) -> IndexSet {
        IndexSet {
            lambda_min,
            lambda_max: f64::INFINITY,
            accumulation: Accumulation::Infinity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_min >= 0.0) || !(self.lambda_min <= self.lambda_max) {
            return Err(Error::InvalidInput(format!(
                "index set needs 0 <= lambda_min <= lambda_max, got [{}, {}]",
                self.lambda_min, self.lambda_max
            )));
        }
        match self.accumulation {
            Accumulation::Infinity if self.lambda_max.is_finite() => Err(Error::InvalidInput(
                "accumulation at infinity needs an unbounded index set".into(),
            )),
            Accumulation::Finite(l0) if !(l0 >= self.lambda_min && l0 <= self.lambda_max) => {
                Err(Error::InvalidInput(format!(
                    "accumulation point {l0} is outside [{}, {}]",
                    self.lambda_min, self.lambda_max
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.lambda_min && lambda <= self.lambda_max
    }
}

/// Where a kernel is non-zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    Rect(Rect),
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Symmetry {
    pub even_t: bool,
    pub even_s: bool,
    pub nonnegative: bool,
}

/// A λ-indexed kernel family.
///
/// Symmetry flags and the L1 bound are claims for the validators to test,
/// never assumptions the numerics rely on. Implementations must be pure.
pub trait Kernel: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn evaluate(&self, lambda: f64, t: f64, s: f64) -> Result<f64>;

    fn index_set(&self) -> IndexSet;

    /// Exact support; `evaluate` is zero outside a `Support::Rect`.
    fn support(&self, lambda: f64) -> Support;

    /// A rectangle outside which `|K_λ|` carries less than `tail_eps` mass.
    fn effective_support(&self, lambda: f64, tail_eps: f64) -> Result<Rect>;

    fn l1_bound_claim(&self) -> Option<f64>;

    /// Claimed (δ₁, δ₂) for the near-origin monotonicity condition.
    fn monotonicity_radii(&self) -> Option<(f64, f64)>;

    fn symmetry(&self) -> Symmetry;

    /// The family written in the expression language over `lambda, t, s`.
    fn expression(&self) -> Option<String> {
        None
    }
}

pub type KernelFamily = Arc<dyn Kernel>;

/// Looks up a catalog kernel by name.
pub fn catalog_kernel(name: &str) -> Option<KernelFamily> {
    Some(match name {
        "box" => Arc::new(BoxKernel),
        "gauss" => Arc::new(GaussWeierstrass),
        "signed_asym" => Arc::new(SignedAsymmetric),
        _ => return None,
    })
}

/// `λ²` on the closed square `[0, 1/λ]²`, zero elsewhere; Λ = [1, ∞).
#[derive(Debug, Clone, Copy, Default)]
pub struct BoxKernel;

pub fn box_kernel() -> KernelFamily {
    Arc::new(BoxKernel)
}

impl Kernel for BoxKernel {
    fn name(&self) -> &str {
        "box"
    }

    fn evaluate(&self, lambda: f64, t: f64, s: f64) -> Result<f64> {
        let w = 1.0 / lambda;
        let inside = 0.0 <= t && t <= w && 0.0 <= s && s <= w;
        Ok(if inside { lambda * lambda } else { 0.0 })
    }

    fn index_set(&self) -> IndexSet {
        IndexSet::to_infinity(1.0)
    }

    fn support(&self, lambda: f64) -> Support {
        let w = 1.0 / lambda;
        Support::Rect(Rect::new(0.0, w, 0.0, w).expect("positive lambda"))
    }

    fn effective_support(&self, lambda: f64, _tail_eps: f64) -> Result<Rect> {
        match self.support(lambda) {
            Support::Rect(r) => Ok(r),
            Support::Unbounded => unreachable!(),
        }
    }

    fn l1_bound_claim(&self) -> Option<f64> {
        Some(1.0)
    }

    fn monotonicity_radii(&self) -> Option<(f64, f64)> {
        Some((1.0, 1.0))
    }

    fn symmetry(&self) -> Symmetry {
        Symmetry {
            even_t: false,
            even_s: false,
            nonnegative: true,
        }
    }

    fn expression(&self) -> Option<String> {
        Some("lambda^2*ind(0<=t<=1/lambda)*ind(0<=s<=1/lambda)".into())
    }
}

fn gauss(lambda: f64, t: f64, s: f64) -> f64 {
    (lambda / PI) * (-lambda * (t * t + s * s)).exp()
}

/// Smallest `x` with `1 - erf(x)^2 <= eps`, i.e. the tail of the unit
/// Gauss–Weierstrass kernel outside `[-x, x]^2`.
fn gauss_tail_radius(eps: f64) -> f64 {
    let tail = |x: f64| gauss_tail_mass(1.0, x);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while tail(hi) > eps {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) > eps {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    hi
}

/// Mass of the Gauss–Weierstrass kernel outside `[-γ, γ]^2`.
pub fn gauss_tail_mass(lambda: f64, gamma: f64) -> f64 {
    // 1 - erf² written through erfc to keep precision in the far tail
    let c = libm::erfc(lambda.sqrt() * gamma);
    c * (2.0 - c)
}

/// `W_λ(t,s) = (λ/π) exp(-λ(t² + s²))`; Λ = [1, ∞), unit mass for every λ.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussWeierstrass;

pub fn gauss_weierstrass_kernel() -> KernelFamily {
    Arc::new(GaussWeierstrass)
}

impl Kernel for GaussWeierstrass {
    fn name(&self) -> &str {
        "gauss"
    }

    fn evaluate(&self, lambda: f64, t: f64, s: f64) -> Result<f64> {
        Ok(gauss(lambda, t, s))
    }

    fn index_set(&self) -> IndexSet {
        IndexSet::to_infinity(1.0)
    }

    fn support(&self, _lambda: f64) -> Support {
        Support::Unbounded
    }

    fn effective_support(&self, lambda: f64, tail_eps: f64) -> Result<Rect> {
        Rect::centered(gauss_tail_radius(tail_eps) / lambda.sqrt())
    }

    fn l1_bound_claim(&self) -> Option<f64> {
        Some(1.0)
    }

    fn monotonicity_radii(&self) -> Option<(f64, f64)> {
        Some((1.0, 1.0))
    }

    fn symmetry(&self) -> Symmetry {
        Symmetry {
            even_t: true,
            even_s: true,
            nonnegative: true,
        }
    }

    fn expression(&self) -> Option<String> {
        Some("(lambda/pi)*exp(-lambda*(t^2+s^2))".into())
    }
}

/// `S_λ(t,s) = 2 W_λ(t,s) − W_{λ/2}(t − 1/λ, s)`: unit total integral, neither
/// even in `t` nor non-negative, `‖S_λ‖₁ ≤ 3`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SignedAsymmetric;

pub fn signed_asymmetric_kernel() -> KernelFamily {
    Arc::new(SignedAsymmetric)
}

impl Kernel for SignedAsymmetric {
    fn name(&self) -> &str {
        "signed_asym"
    }

    fn evaluate(&self, lambda: f64, t: f64, s: f64) -> Result<f64> {
        Ok(2.0 * gauss(lambda, t, s) - gauss(lambda / 2.0, t - 1.0 / lambda, s))
    }

    fn index_set(&self) -> IndexSet {
        IndexSet::to_infinity(1.0)
    }

    fn support(&self, _lambda: f64) -> Support {
        Support::Unbounded
    }

    fn effective_support(&self, lambda: f64, tail_eps: f64) -> Result<Rect> {
        // |S| <= 2 W_λ + W_{λ/2}(shifted): give each piece a third of the budget
        let x = gauss_tail_radius(tail_eps / 3.0);
        let narrow = x / lambda.sqrt();
        let wide = x / (lambda / 2.0).sqrt();
        let shift = 1.0 / lambda;
        Rect::new(
            (-narrow).min(shift - wide),
            narrow.max(shift + wide),
            -narrow.max(wide),
            narrow.max(wide),
        )
    }

    fn l1_bound_claim(&self) -> Option<f64> {
        Some(3.0)
    }

    fn monotonicity_radii(&self) -> Option<(f64, f64)> {
        Some((1.0, 1.0))
    }

    fn symmetry(&self) -> Symmetry {
        Symmetry {
            even_t: false,
            even_s: true,
            nonnegative: false,
        }
    }

    fn expression(&self) -> Option<String> {
        Some(
            "2*(lambda/pi)*exp(-lambda*(t^2+s^2)) \
             - ((lambda/2)/pi)*exp(-(lambda/2)*((t-1/lambda)^2+s^2))"
                .into(),
        )
    }
}

/// Support rectangle given as four expressions in `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSpec {
    t_lo: Expr,
    t_hi: Expr,
    s_lo: Expr,
    s_hi: Expr,
}

impl SupportSpec {
    pub fn parse(t_lo: &str, t_hi: &str, s_lo: &str, s_hi: &str) -> Result<SupportSpec> {
        let p = |src: &str| Expr::parse(src, &["lambda"]);
        Ok(SupportSpec {
            t_lo: p(t_lo)?,
            t_hi: p(t_hi)?,
            s_lo: p(s_lo)?,
            s_hi: p(s_hi)?,
        })
    }

    pub fn at(&self, lambda: f64) -> Result<Rect> {
        let v = |e: &Expr| e.eval(&[lambda]);
        Rect::new(v(&self.t_lo)?, v(&self.t_hi)?, v(&self.s_lo)?, v(&self.s_hi)?)
    }
}

/// A kernel family defined by an expression over `lambda`, `t` and `s`.
pub struct ExprKernel {
    name: String,
    expr: Expr,
    index_set: IndexSet,
    support: Option<SupportSpec>,
    l1_bound: Option<f64>,
    radii: Option<(f64, f64)>,
    // (lambda bits, eps bits) -> estimated effective support
    support_cache: Mutex<HashMap<(u64, u64), Rect>>,
}

impl fmt::Debug for ExprKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExprKernel")
            .field("name", &self.name)
            .field("expr", &self.expr.source())
            .field("index_set", &self.index_set)
            .field("l1_bound", &self.l1_bound)
            .field("radii", &self.radii)
            .finish()
    }
}

/// Builds a kernel family from an expression over `lambda, t, s`.
pub fn kernel_from_expression(
    expr: &str,
    index_set: IndexSet,
    support: Option<SupportSpec>,
) -> Result<ExprKernel> {
    index_set.validate()?;
    Ok(ExprKernel {
        name: "expr".into(),
        expr: Expr::parse(expr, &["lambda", "t", "s"])?,
        index_set,
        support,
        l1_bound: None,
        radii: None,
        support_cache: Mutex::new(HashMap::new()),
    })
}

impl ExprKernel {
    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_l1_bound(mut self, bound: Option<f64>) -> Self {
        self.l1_bound = bound;
        self
    }

    pub fn with_monotonicity_radii(mut self, radii: Option<(f64, f64)>) -> Self {
        self.radii = radii;
        self
    }

    /// Doubles a centred square until the mass of `|K_λ|` in the next annulus
    /// drops below `tail_eps`. A heuristic: mass beyond a long empty annulus
    /// is not seen.
    fn estimate_effective_support(&self, lambda: f64, tail_eps: f64) -> Result<Rect> {
        const MAX_RADIUS: f64 = 65536.0;
        let abs_k = |t: f64, s: f64| self.evaluate(lambda, t, s).map(f64::abs);
        let opts = QuadOptions::default();
        let mut radius = 1.0;
        while radius <= MAX_RADIUS {
            let inner = Rect::centered(radius)?;
            let outer = Rect::centered(2.0 * radius)?;
            let inside = quadrature::try_integrate_rect(abs_k, &inner, 1e-8, &opts)?.value;
            let annulus = quadrature::try_integrate_complement(abs_k, &inner, &outer, 1e-8, &opts)?.value;
            if inside > 0.0 && annulus <= tail_eps {
                return Ok(outer);
            }
            radius *= 2.0;
        }
        Err(Error::EffectiveSupport(format!(
            "kernel '{}' at lambda={lambda} still carries mass beyond radius {MAX_RADIUS}",
            self.name
        )))
    }
}

impl Kernel for ExprKernel {
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&self, lambda: f64, t: f64, s: f64) -> Result<f64> {
        // a declared support masks the expression outside it
        if let Some(spec) = &self.support {
            if !spec.at(lambda)?.contains(t, s) {
                return Ok(0.0);
            }
        }
        self.expr.eval(&[lambda, t, s]).map_err(|e| match e {
            Error::DivisionByZero(_) => Error::KernelDivisionByZero { lambda, t, s },
            other => other,
        })
    }

    fn index_set(&self) -> IndexSet {
        self.index_set
    }

    fn support(&self, lambda: f64) -> Support {
        match self.support.as_ref().map(|s| s.at(lambda)) {
            Some(Ok(r)) => Support::Rect(r),
            _ => Support::Unbounded,
        }
    }

    fn effective_support(&self, lambda: f64, tail_eps: f64) -> Result<Rect> {
        if let Support::Rect(r) = self.support(lambda) {
            return Ok(r);
        }
        let key = (lambda.to_bits(), tail_eps.to_bits());
        if let Some(r) = self.support_cache.lock().unwrap().get(&key) {
            return Ok(*r);
        }
        let r = self.estimate_effective_support(lambda, tail_eps)?;
        self.support_cache.lock().unwrap().insert(key, r);
        Ok(r)
    }

    fn l1_bound_claim(&self) -> Option<f64> {
        self.l1_bound
    }

    fn monotonicity_radii(&self) -> Option<(f64, f64)> {
        self.radii
    }

    fn symmetry(&self) -> Symmetry {
        Symmetry {
            even_t: false,
            even_s: false,
            nonnegative: false,
        }
    }

    fn expression(&self) -> Option<String> {
        Some(self.expr.source().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_rect;

    #[test]
    fn box_values() {
        let k = box_kernel();
        assert_eq!(k.evaluate(2.0, 0.25, 0.25).unwrap(), 4.0);
        assert_eq!(k.evaluate(2.0, 0.6, 0.25).unwrap(), 0.0);
        // closed support: boundary carries the full height
        assert_eq!(k.evaluate(2.0, 0.5, 0.0).unwrap(), 4.0);
        assert_eq!(k.evaluate(2.0, -1e-300, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn box_mass_is_one() {
        let k = box_kernel();
        for lambda in [1.0, 3.0, 10.0, 1000.0] {
            let r = k.effective_support(lambda, DEFAULT_TAIL_EPS).unwrap();
            let q = integrate_rect(|t, s| k.evaluate(lambda, t, s).unwrap(), &r, 1e-12).unwrap();
            assert!((q.value - 1.0).abs() < 1e-12, "lambda={lambda}: {}", q.value);
        }
    }

    #[test]
    fn gauss_peak_and_mass() {
        let k = gauss_weierstrass_kernel();
        assert!((k.evaluate(7.0, 0.0, 0.0).unwrap() - 7.0 / PI).abs() < 1e-15);
        for lambda in [1.0, 50.0, 2048.0] {
            let r = k.effective_support(lambda, DEFAULT_TAIL_EPS).unwrap();
            let q = integrate_rect(|t, s| gauss(lambda, t, s), &r, 1e-12).unwrap();
            assert!((q.value - 1.0).abs() < 2e-10, "lambda={lambda}: {}", q.value);
            // the square really leaves at most eps outside
            assert!(gauss_tail_mass(lambda, r.b) <= DEFAULT_TAIL_EPS * (1.0 + 1e-6));
        }
    }

    #[test]
    fn signed_kernel_goes_negative_in_the_tail() {
        let k = signed_asymmetric_kernel();
        assert!(k.evaluate(4.0, 10.0, 0.0).unwrap() < 0.0);
        assert!(k.evaluate(4.0, 0.0, 0.0).unwrap() > 0.0);
    }

    #[test]
    fn index_set_validation() {
        assert!(IndexSet::new(1.0, f64::INFINITY, Accumulation::Infinity).is_ok());
        assert!(IndexSet::new(0.0, 1.0, Accumulation::Finite(0.0)).is_ok());
        assert!(IndexSet::new(-1.0, 1.0, Accumulation::Finite(0.0)).is_err());
        assert!(IndexSet::new(2.0, 1.0, Accumulation::Finite(1.5)).is_err());
        assert!(IndexSet::new(0.0, 1.0, Accumulation::Finite(2.0)).is_err());
        assert!(IndexSet::new(0.0, 1.0, Accumulation::Infinity).is_err());
    }

    #[test]
    fn expression_kernel_reproduces_box() {
        let k = kernel_from_expression(
            "lambda^2 * ind(0<=t<=1/lambda) * ind(0<=s<=1/lambda)",
            IndexSet::to_infinity(1.0),
            None,
        )
        .unwrap();
        assert_eq!(k.evaluate(2.0, 0.25, 0.25).unwrap(), 4.0);
    }

    #[test]
    fn expression_kernel_gauss_value() {
        let k = kernel_from_expression(
            "(lambda/pi)*exp(-lambda*(t^2+s^2))",
            IndexSet::to_infinity(1.0),
            None,
        )
        .unwrap();
        assert!((k.evaluate(1.0, 0.0, 0.0).unwrap() - std::f64::consts::FRAC_1_PI).abs() < 1e-10);
    }

    #[test]
    fn expression_kernel_division_error_carries_point() {
        let k = kernel_from_expression("1/(t-t)", IndexSet::to_infinity(1.0), None).unwrap();
        assert_eq!(
            k.evaluate(2.0, 0.1, 0.2).unwrap_err(),
            Error::KernelDivisionByZero {
                lambda: 2.0,
                t: 0.1,
                s: 0.2
            }
        );
    }

    #[test]
    fn expression_parse_error_is_rejected() {
        let err = kernel_from_expression("lambda * (t +", IndexSet::to_infinity(1.0), None).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn estimated_effective_support_captures_mass() {
        let k = kernel_from_expression("exp(-abs(t)-abs(s))/4", IndexSet::to_infinity(1.0), None).unwrap();
        let r = k.effective_support(1.0, 1e-10).unwrap();
        let q = integrate_rect(|t, s| k.evaluate(1.0, t, s).unwrap(), &r, 1e-10).unwrap();
        assert!((q.value - 1.0).abs() < 1e-8, "{} on {r:?}", q.value);
    }

    #[test]
    fn supplied_support_is_used() {
        let spec = SupportSpec::parse("0", "1/lambda", "0", "1/lambda").unwrap();
        let k = kernel_from_expression("lambda^2", IndexSet::to_infinity(1.0), Some(spec)).unwrap();
        let r = k.effective_support(4.0, DEFAULT_TAIL_EPS).unwrap();
        assert_eq!((r.a, r.b, r.c, r.d), (0.0, 0.25, 0.0, 0.25));
    }
}
