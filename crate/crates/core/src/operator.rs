//! The operator `L_λ(f; x, y) = ∬_D f(t,s) K_λ(t − x, s − y) ds dt` over a
//! bounded rectangle or the whole plane, and its L1 behaviour.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::kernels::{Kernel, DEFAULT_TAIL_EPS};
use crate::quadrature::{self, pairwise_sum, GaussLegendre, QuadOptions, Rect};

/// Names accepted by [`catalog_function`].
pub const CATALOG_FUNCTIONS: [&str; 8] = [
    "t",
    "ts",
    "sum_sq",
    "cos_prod",
    "indicator",
    "quadrant_jump",
    "sqrt_abs",
    "gauss_bump",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainSpec {
    Bounded(Rect),
    FullPlane,
}

impl DomainSpec {
    pub fn bounded(r: Rect) -> Result<DomainSpec> {
        r.validate()?;
        if r.is_degenerate() {
            return Err(Error::InvalidInput("domain rectangle must have positive side lengths".into()));
        }
        Ok(DomainSpec::Bounded(r))
    }

    pub fn unit_square() -> DomainSpec {
        DomainSpec::Bounded(Rect::new(0.0, 1.0, 0.0, 1.0).unwrap())
    }

    pub fn rect(&self) -> Option<&Rect> {
        match self {
            DomainSpec::Bounded(r) => Some(r),
            DomainSpec::FullPlane => None,
        }
    }
}

/// A point with a known value and Lebesgue-point status. The value overrides
/// `evaluate` as the representative of `f` at that point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnownPoint {
    pub x0: f64,
    pub y0: f64,
    pub value: f64,
    pub is_mu_lebesgue: bool,
}

type Eval2 = Arc<dyn Fn(f64, f64) -> Result<f64> + Send + Sync>;
type ClosedForm = Arc<dyn Fn(&str, f64, f64, f64) -> Option<f64> + Send + Sync>;

/// An integrable test function on a domain.
#[derive(Clone)]
pub struct SampleFunction {
    pub name: String,
    eval: Eval2,
    pub domain: DomainSpec,
    pub known_points: Vec<KnownPoint>,
    closed_form: Option<ClosedForm>,
    /// Lines `t = const` / `s = const` where `f` jumps or kinks.
    pub t_breaks: Vec<f64>,
    pub s_breaks: Vec<f64>,
    /// For full-plane functions: the rectangle outside which `|f|` carries
    /// negligible mass.
    pub effective_support: Option<Rect>,
}

impl fmt::Debug for SampleFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampleFunction")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("known_points", &self.known_points)
            .finish_non_exhaustive()
    }
}

impl SampleFunction {
    pub fn new<F>(name: impl Into<String>, domain: DomainSpec, f: F) -> SampleFunction
    where
        F: Fn(f64, f64) -> Result<f64> + Send + Sync + 'static,
    {
        SampleFunction {
            name: name.into(),
            eval: Arc::new(f),
            domain,
            known_points: Vec::new(),
            closed_form: None,
            t_breaks: Vec::new(),
            s_breaks: Vec::new(),
            effective_support: None,
        }
    }

    /// `f(t, s)` from an expression over `t` and `s`.
    pub fn from_expression(name: impl Into<String>, source: &str, domain: DomainSpec) -> Result<SampleFunction> {
        let expr = Expr::parse(source, &["t", "s"])?;
        Ok(SampleFunction::new(name, domain, move |t, s| expr.eval(&[t, s])))
    }

    pub fn constant(c: f64, domain: DomainSpec) -> SampleFunction {
        let mut f = SampleFunction::new(format!("const({c})"), domain, move |_, _| Ok(c));
        f.closed_form = Some(Arc::new(move |kernel, _, _, _| (kernel == "box").then_some(c)));
        f
    }

    pub fn with_breaks(mut self, t_breaks: &[f64], s_breaks: &[f64]) -> Self {
        self.t_breaks.extend_from_slice(t_breaks);
        self.s_breaks.extend_from_slice(s_breaks);
        self
    }

    pub fn with_known_point(mut self, p: KnownPoint) -> Self {
        self.known_points.push(p);
        self
    }

    pub fn with_effective_support(mut self, r: Rect) -> Self {
        self.effective_support = Some(r);
        self
    }

    pub fn with_closed_form<F>(mut self, f: F) -> Self
    where
        F: Fn(&str, f64, f64, f64) -> Option<f64> + Send + Sync + 'static,
    {
        self.closed_form = Some(Arc::new(f));
        self
    }

    pub fn evaluate(&self, t: f64, s: f64) -> Result<f64> {
        (self.eval)(t, s)
    }

    /// The value used for `f(x₀, y₀)`: a matching known point wins over
    /// `evaluate`.
    pub fn representative(&self, x0: f64, y0: f64) -> Result<f64> {
        match self.known_points.iter().find(|p| p.x0 == x0 && p.y0 == y0) {
            Some(p) => Ok(p.value),
            None => self.evaluate(x0, y0),
        }
    }

    /// Closed form of `L_λ(f; x, y)` for the named kernel, where one exists.
    pub fn closed_form_convolution(&self, kernel: &str, lambda: f64, x: f64, y: f64) -> Option<f64> {
        self.closed_form.as_ref().and_then(|cf| cf(kernel, lambda, x, y))
    }

    /// Region that carries the mass of `f`: the domain rectangle, or the
    /// effective support of a full-plane function.
    pub fn integration_region(&self) -> Result<Rect> {
        match (&self.domain, &self.effective_support) {
            (DomainSpec::Bounded(r), Some(e)) => r.intersect(e).ok_or_else(|| {
                Error::InvalidInput(format!("effective support of '{}' misses its domain", self.name))
            }),
            (DomainSpec::Bounded(r), None) => Ok(*r),
            (DomainSpec::FullPlane, Some(e)) => Ok(*e),
            (DomainSpec::FullPlane, None) => Err(Error::InvalidInput(format!(
                "full-plane function '{}' needs an effective support rectangle",
                self.name
            ))),
        }
    }

    /// `alpha f + beta h` on the common domain.
    pub fn linear_combination(alpha: f64, f: &SampleFunction, beta: f64, h: &SampleFunction) -> Result<SampleFunction> {
        if f.domain != h.domain {
            return Err(Error::InvalidInput("linear combination needs a common domain".into()));
        }
        let (fe, he) = (f.eval.clone(), h.eval.clone());
        let mut out = SampleFunction::new(
            format!("{alpha}*{} + {beta}*{}", f.name, h.name),
            f.domain,
            move |t, s| Ok(alpha * fe(t, s)? + beta * he(t, s)?),
        );
        out.t_breaks = [f.t_breaks.as_slice(), h.t_breaks.as_slice()].concat();
        out.s_breaks = [f.s_breaks.as_slice(), h.s_breaks.as_slice()].concat();
        out.effective_support = match (f.effective_support, h.effective_support) {
            (Some(a), Some(b)) => Some(Rect::new(a.a.min(b.a), a.b.max(b.b), a.c.min(b.c), a.d.max(b.d))?),
            (a, b) => a.or(b),
        };
        Ok(out)
    }
}

/// Mean of `t ↦ g(t)` over `[x, x + w]` for the box kernel closed forms.
fn box_window(x: f64, w: f64, antiderivative: impl Fn(f64) -> f64) -> f64 {
    (antiderivative(x + w) - antiderivative(x)) / w
}

fn box_window_inside(x: f64, y: f64, lambda: f64, d: &Rect) -> bool {
    let w = 1.0 / lambda;
    d.a <= x && x + w <= d.b && d.c <= y && y + w <= d.d
}

fn overlap(lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    (hi.min(b) - lo.max(a)).max(0.0)
}

/// Looks up a catalog sample function.
pub fn catalog_function(name: &str) -> Option<SampleFunction> {
    let unit = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
    let sym = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
    let f = match name {
        "t" => SampleFunction::new("t", DomainSpec::Bounded(unit), |t, _| Ok(t)).with_closed_form(
            move |k, lambda, x, y| {
                (k == "box" && box_window_inside(x, y, lambda, &unit)).then(|| x + 0.5 / lambda)
            },
        ),
        "ts" => SampleFunction::new("ts", DomainSpec::Bounded(unit), |t, s| Ok(t * s)).with_closed_form(
            move |k, lambda, x, y| {
                (k == "box" && box_window_inside(x, y, lambda, &unit))
                    .then(|| (x + 0.5 / lambda) * (y + 0.5 / lambda))
            },
        ),
        "sum_sq" => SampleFunction::new("sum_sq", DomainSpec::Bounded(unit), |t, s| Ok(t * t + s * s))
            .with_closed_form(move |k, lambda, x, y| {
                (k == "box" && box_window_inside(x, y, lambda, &unit)).then(|| {
                    let w = 1.0 / lambda;
                    let cube = |u: f64| u * u * u / 3.0;
                    box_window(x, w, cube) + box_window(y, w, cube)
                })
            }),
        "cos_prod" => SampleFunction::new("cos_prod", DomainSpec::Bounded(unit), |t, s| Ok(t.cos() * s.cos()))
            .with_closed_form(move |k, lambda, x, y| {
                (k == "box" && box_window_inside(x, y, lambda, &unit)).then(|| {
                    let w = 1.0 / lambda;
                    box_window(x, w, f64::sin) * box_window(y, w, f64::sin)
                })
            }),
        "indicator" => SampleFunction::new("indicator", DomainSpec::Bounded(unit), |t, s| {
            Ok(if (0.0..=0.5).contains(&t) && (0.0..=0.5).contains(&s) { 1.0 } else { 0.0 })
        })
        .with_breaks(&[0.5], &[0.5])
        .with_closed_form(|k, lambda, x, y| {
            (k == "box").then(|| {
                let w = 1.0 / lambda;
                lambda * lambda * overlap(x, x + w, 0.0, 0.5) * overlap(y, y + w, 0.0, 0.5)
            })
        }),
        "quadrant_jump" => SampleFunction::new("quadrant_jump", DomainSpec::Bounded(sym), |t, s| {
            Ok(if t >= 0.0 && s >= 0.0 { 1.0 } else { 0.0 })
        })
        .with_breaks(&[0.0], &[0.0])
        .with_known_point(KnownPoint {
            x0: 0.0,
            y0: 0.0,
            value: 0.0,
            is_mu_lebesgue: false,
        }),
        "sqrt_abs" => {
            SampleFunction::new("sqrt_abs", DomainSpec::Bounded(sym), |t, _| Ok(t.abs().sqrt())).with_breaks(&[0.0], &[])
        }
        "gauss_bump" => SampleFunction::new("gauss_bump", DomainSpec::FullPlane, |t, s| Ok((-(t * t + s * s)).exp()))
            .with_effective_support(Rect::centered(6.5).unwrap()),
        _ => return None,
    };
    Some(f)
}

/// `g = f` on `D` (edge flags decide boundary points) and `0` elsewhere.
pub fn zero_extend(f: &SampleFunction) -> Result<impl Fn(f64, f64) -> Result<f64> + '_> {
    let DomainSpec::Bounded(d) = f.domain else {
        return Err(Error::InvalidInput("zero extension needs a bounded domain".into()));
    };
    Ok(move |t: f64, s: f64| if d.contains(t, s) { f.evaluate(t, s) } else { Ok(0.0) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApplyOptions {
    /// Restrict integration to the shifted kernel support. Turning it off
    /// integrates over the whole domain and is only useful as a cross-check.
    pub clip_to_support: bool,
    pub tail_eps: f64,
    pub quad: QuadOptions,
}

impl Default for ApplyOptions {
    fn default() -> Self {
        ApplyOptions {
            clip_to_support: true,
            tail_eps: DEFAULT_TAIL_EPS,
            quad: QuadOptions::default(),
        }
    }
}

/// `L_λ(f; x, y)` with default options.
pub fn apply(k: &dyn Kernel, f: &SampleFunction, lambda: f64, x: f64, y: f64, tol: f64) -> Result<f64> {
    apply_with(k, f, lambda, x, y, tol, &ApplyOptions::default())
}

pub fn apply_with(
    k: &dyn Kernel,
    f: &SampleFunction,
    lambda: f64,
    x: f64,
    y: f64,
    tol: f64,
    opts: &ApplyOptions,
) -> Result<f64> {
    if !k.index_set().contains(lambda) {
        return Err(Error::OutsideIndexSet(lambda));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let base = f.integration_region()?;
    let region = if opts.clip_to_support {
        let kernel_region = k.effective_support(lambda, opts.tail_eps)?.translate(x, y);
        match base.intersect(&kernel_region) {
            Some(r) => r,
            None => return Ok(0.0),
        }
    } else {
        base
    };
    let quad = opts.clone().quad.with_breaks(&f.t_breaks, &f.s_breaks);
    let integrand = |t: f64, s: f64| Ok(f.evaluate(t, s)? * k.evaluate(lambda, t - x, s - y)?);
    Ok(quadrature::try_integrate_rect(integrand, &region, tol, &quad)?.value)
}

/// `‖f‖₁` over the integration region of `f`.
pub fn l1_norm(f: &SampleFunction, tol: f64) -> Result<f64> {
    let region = f.integration_region()?;
    let quad = QuadOptions::default().with_breaks(&f.t_breaks, &f.s_breaks);
    Ok(quadrature::try_integrate_rect(|t, s| Ok(f.evaluate(t, s)?.abs()), &region, tol, &quad)?.value)
}

/// Minimum cells per axis of the outer composite grid in [`l1_norm_of_image`].
const OUTER_CELLS: usize = 8;
/// Gauss–Legendre order inside each outer cell; 8 x 8 cells of 8 x 8 nodes
/// give the base 64 x 64 outer grid.
const OUTER_ORDER: usize = 8;

/// Outer cell edges on `[lo, hi]`: a uniform split plus every position where
/// the shifted kernel window `[x + k_lo, x + k_hi]` crosses a domain edge or a
/// break of `f`. Between these lines the image is smooth.
fn outer_edges(lo: f64, hi: f64, k_lo: f64, k_hi: f64, f_breaks: &[f64]) -> Vec<f64> {
    let h = (hi - lo) / OUTER_CELLS as f64;
    let mut edges: Vec<f64> = (0..=OUTER_CELLS).map(|c| lo + c as f64 * h).collect();
    edges[OUTER_CELLS] = hi;
    for e in [lo, hi].iter().chain(f_breaks) {
        for kink in [e - k_lo, e - k_hi] {
            if kink > lo && kink < hi {
                edges.push(kink);
            }
        }
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * (hi - lo));
    edges
}

/// `∬_D |L_λ(f; x, y)| dy dx` on a fixed composite Gauss grid (at least
/// 64 x 64 nodes, with cell edges on the image's kink lines), each node an
/// adaptive [`apply`] at `inner_tol`. Nodes are evaluated in parallel and
/// summed in grid order.
pub fn l1_norm_of_image(k: &dyn Kernel, f: &SampleFunction, lambda: f64, inner_tol: f64) -> Result<f64> {
    let DomainSpec::Bounded(d) = f.domain else {
        return Err(Error::InvalidInput("L1 norm of the image needs a bounded domain".into()));
    };
    if !k.index_set().contains(lambda) {
        return Err(Error::OutsideIndexSet(lambda));
    }
    let ks = k.effective_support(lambda, DEFAULT_TAIL_EPS)?;
    let rule = GaussLegendre::new(OUTER_ORDER);
    let axis = |edges: Vec<f64>| -> Vec<(f64, f64)> {
        edges
            .windows(2)
            .flat_map(|w| {
                let (a, h) = (w[0], w[1] - w[0]);
                rule.nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(move |(xi, wi)| (a + 0.5 * h * (1.0 + xi), 0.5 * h * wi))
            })
            .collect()
    };
    let xs = axis(outer_edges(d.a, d.b, ks.a, ks.b, &f.t_breaks));
    let ys = axis(outer_edges(d.c, d.d, ks.c, ks.d, &f.s_breaks));
    let nodes: Vec<(f64, f64, f64)> = xs
        .iter()
        .flat_map(|&(x, wx)| ys.iter().map(move |&(y, wy)| (x, y, wx * wy)))
        .collect();
    let terms = nodes
        .par_iter()
        .map(|&(x, y, w)| Ok(w * apply(k, f, lambda, x, y, inner_tol)?.abs()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{box_kernel, gauss_weierstrass_kernel};

    #[test]
    fn zero_extension_respects_domain_and_edges() {
        let f = SampleFunction::constant(1.0, DomainSpec::unit_square());
        let g = zero_extend(&f).unwrap();
        assert_eq!(g(0.5, 0.5).unwrap(), 1.0);
        assert_eq!(g(2.0, 0.5).unwrap(), 0.0);
        assert_eq!(g(1.0, 1.0).unwrap(), 1.0);

        let mut edges = crate::quadrature::EdgeFlags::CLOSED;
        edges.right = false;
        let half_open = Rect::with_edges(0.0, 1.0, 0.0, 1.0, edges).unwrap();
        let f = SampleFunction::constant(1.0, DomainSpec::Bounded(half_open));
        let g = zero_extend(&f).unwrap();
        assert_eq!(g(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(g(0.0, 1.0).unwrap(), 1.0);

        let plane = catalog_function("gauss_bump").unwrap();
        assert!(zero_extend(&plane).is_err());
    }

    #[test]
    fn box_constant_reproduction() {
        let f = SampleFunction::constant(5.0, DomainSpec::unit_square());
        let v = apply(box_kernel().as_ref(), &f, 10.0, 0.2, 0.3, 1e-10).unwrap();
        assert!((v - 5.0).abs() < 1e-12);
    }

    #[test]
    fn box_linear_and_product() {
        let k = box_kernel();
        let t = catalog_function("t").unwrap();
        let v = apply(k.as_ref(), &t, 10.0, 0.2, 0.3, 1e-10).unwrap();
        assert!((v - 0.25).abs() < 1e-12, "{v}");
        let ts = catalog_function("ts").unwrap();
        let v = apply(k.as_ref(), &ts, 10.0, 0.2, 0.3, 1e-10).unwrap();
        assert!((v - 0.0875).abs() < 1e-12, "{v}");
    }

    #[test]
    fn partial_overlap_at_corner() {
        let f = SampleFunction::constant(5.0, DomainSpec::unit_square());
        let v = apply(box_kernel().as_ref(), &f, 10.0, 0.95, 0.95, 1e-10).unwrap();
        assert!((v - 1.25).abs() < 1e-12, "{v}");
    }

    #[test]
    fn empty_intersection_is_exact_zero() {
        let f = SampleFunction::constant(5.0, DomainSpec::unit_square());
        assert_eq!(apply(box_kernel().as_ref(), &f, 10.0, 3.0, 3.0, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn outside_index_set_is_rejected() {
        let f = SampleFunction::constant(1.0, DomainSpec::unit_square());
        assert_eq!(
            apply(box_kernel().as_ref(), &f, 0.5, 0.2, 0.2, 1e-8).unwrap_err(),
            Error::OutsideIndexSet(0.5)
        );
    }

    #[test]
    fn zero_function_has_zero_image() {
        let f = SampleFunction::constant(0.0, DomainSpec::unit_square());
        assert_eq!(l1_norm_of_image(box_kernel().as_ref(), &f, 8.0, 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn full_plane_needs_support() {
        let f = SampleFunction::new("bare", DomainSpec::FullPlane, |_, _| Ok(1.0));
        assert!(apply(gauss_weierstrass_kernel().as_ref(), &f, 4.0, 0.0, 0.0, 1e-8).is_err());
        let bump = catalog_function("gauss_bump").unwrap();
        // (W_λ * e^{-|.|²})(0) = λ/(λ+1)
        let v = apply(gauss_weierstrass_kernel().as_ref(), &bump, 4.0, 0.0, 0.0, 1e-10).unwrap();
        assert!((v - 0.8).abs() < 1e-9, "{v}");
    }

    #[test]
    fn representative_value_prefers_known_point() {
        let f = catalog_function("quadrant_jump").unwrap();
        assert_eq!(f.evaluate(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(f.representative(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(f.representative(0.5, 0.5).unwrap(), 1.0);
    }
}
