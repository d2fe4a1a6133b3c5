//! Deterministic adaptive cubature over axis-aligned rectangles.
//!
//! Each cell is integrated with a tensor-product Gauss–Legendre rule of order
//! `n` (default 8); the same cell under order `n - 1` supplies the error
//! estimate. Cells are refined globally, always splitting the cell with the
//! largest estimate into four quadrants, until the summed estimate drops below
//! `max(tol * |value|, tol_abs_floor)`. All bookkeeping is ordered, so equal
//! inputs produce bit-identical results and evaluation counts.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusion flags for the four edges of a rectangle. They model open,
/// half-open and closed rectangles for point membership only; integrals never
/// depend on them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeFlags {
    pub left: bool,
    pub right: bool,
    pub bottom: bool,
    pub top: bool,
}

impl EdgeFlags {
    pub const CLOSED: EdgeFlags = EdgeFlags {
        left: true,
        right: true,
        bottom: true,
        top: true,
    };
    pub const OPEN: EdgeFlags = EdgeFlags {
        left: false,
        right: false,
        bottom: false,
        top: false,
    };
}

impl Default for EdgeFlags {
    fn default() -> Self {
        EdgeFlags::CLOSED
    }
}

/// The rectangle `<a,b> x <c,d>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    #[serde(default)]
    pub edges: EdgeFlags,
}

impl Rect {
    /// Closed rectangle `[a,b] x [c,d]`.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Rect> {
        Rect::with_edges(a, b, c, d, EdgeFlags::CLOSED)
    }

    pub fn with_edges(a: f64, b: f64, c: f64, d: f64, edges: EdgeFlags) -> Result<Rect> {
        let r = Rect { a, b, c, d, edges };
        r.validate()?;
        Ok(r)
    }

    /// Square `[-r, r]^2`.
    pub fn centered(r: f64) -> Result<Rect> {
        Rect::new(-r, r, -r, r)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.b, self.c, self.d].iter().all(|v| v.is_finite());
        if !finite || self.a > self.b || self.c > self.d {
            return Err(Error::InvalidInput(format!(
                "rectangle [{}, {}] x [{}, {}] needs finite a <= b and c <= d",
                self.a, self.b, self.c, self.d
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn height(&self) -> f64 {
        self.d - self.c
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.a < self.b && self.c < self.d)
    }

    /// Point membership honouring the edge flags.
    pub fn contains(&self, t: f64, s: f64) -> bool {
        let in_t = (self.a < t || (self.edges.left && t == self.a))
            && (t < self.b || (self.edges.right && t == self.b));
        let in_s = (self.c < s || (self.edges.bottom && s == self.c))
            && (s < self.d || (self.edges.top && s == self.d));
        in_t && in_s
    }

    /// Closed containment of another rectangle (edge flags ignored).
    pub fn covers(&self, other: &Rect) -> bool {
        self.a <= other.a && other.b <= self.b && self.c <= other.c && other.d <= self.d
    }

    /// Intersection, or `None` when it has no interior.
    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let r = Rect {
            a: self.a.max(other.a),
            b: self.b.min(other.b),
            c: self.c.max(other.c),
            d: self.d.min(other.d),
            edges: EdgeFlags::CLOSED,
        };
        (r.a < r.b && r.c < r.d).then_some(r)
    }

    pub fn translate(&self, dt: f64, ds: f64) -> Rect {
        Rect {
            a: self.a + dt,
            b: self.b + dt,
            c: self.c + ds,
            d: self.d + ds,
            edges: self.edges,
        }
    }
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadResult {
    pub value: f64,
    /// A-posteriori estimate from the embedded lower-order rule; not a bound.
    pub error_estimate: f64,
    pub evaluations: usize,
    /// Set when refinement stopped at `max_depth` or `max_evaluations` before
    /// the tolerance was met.
    pub limited: bool,
}

impl QuadResult {
    fn zero() -> QuadResult {
        QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
            limited: false,
        }
    }

    /// Sums results of disjoint pieces in the given order.
    pub fn combine(parts: &[QuadResult]) -> QuadResult {
        let values: Vec<f64> = parts.iter().map(|p| p.value).collect();
        let errors: Vec<f64> = parts.iter().map(|p| p.error_estimate).collect();
        QuadResult {
            value: pairwise_sum(&values),
            error_estimate: pairwise_sum(&errors),
            evaluations: parts.iter().map(|p| p.evaluations).sum(),
            limited: parts.iter().any(|p| p.limited),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadOptions {
    /// Gauss–Legendre order per axis; the error rule uses `order - 1`.
    pub order: usize,
    pub tol_abs_floor: f64,
    pub max_depth: u32,
    pub max_evaluations: usize,
    /// Lines `t = const` along which the region is pre-split. Useful when the
    /// integrand is known to jump there.
    pub t_breaks: Vec<f64>,
    pub s_breaks: Vec<f64>,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            order: 8,
            tol_abs_floor: 1e-13,
            max_depth: 24,
            max_evaluations: 4_000_000,
            t_breaks: Vec::new(),
            s_breaks: Vec::new(),
        }
    }
}

impl QuadOptions {
    pub fn with_breaks(mut self, t_breaks: &[f64], s_breaks: &[f64]) -> Self {
        self.t_breaks.extend_from_slice(t_breaks);
        self.s_breaks.extend_from_slice(s_breaks);
        self
    }
}

/// Nodes and weights of an n-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> GaussLegendre {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Newton iteration on P_n from the Chebyshev-like initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }
}

/// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn rule_pair(order: usize) -> (GaussLegendre, GaussLegendre) {
    (GaussLegendre::new(order), GaussLegendre::new(order - 1))
}

fn cached_rules(order: usize) -> std::borrow::Cow<'static, (GaussLegendre, GaussLegendre)> {
    static DEFAULT: OnceLock<(GaussLegendre, GaussLegendre)> = OnceLock::new();
    if order == 8 {
        std::borrow::Cow::Borrowed(DEFAULT.get_or_init(|| rule_pair(8)))
    } else {
        std::borrow::Cow::Owned(rule_pair(order))
    }
}

/// Pairwise (tree) summation in index order; reproducible and with
/// O(log n) error growth.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    value: f64,
    err: f64,
    depth: u32,
    leaf: bool,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    err: f64,
    id: usize,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    // largest error first, then oldest cell
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct Engine<'r, F> {
    f: F,
    hi: &'r GaussLegendre,
    lo: &'r GaussLegendre,
    evaluations: usize,
}

impl<F> Engine<'_, F>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    fn rule(&mut self, g: &GaussLegendre, a: f64, b: f64, c: f64, d: f64) -> Result<f64> {
        let (ht, mt) = (0.5 * (b - a), 0.5 * (a + b));
        let (hs, ms) = (0.5 * (d - c), 0.5 * (c + d));
        let mut total = 0.0;
        for (xi, wi) in g.nodes.iter().zip(&g.weights) {
            let t = mt + ht * xi;
            let mut row = 0.0;
            for (yj, wj) in g.nodes.iter().zip(&g.weights) {
                let s = ms + hs * yj;
                let v = (self.f)(t, s)?;
                if !v.is_finite() {
                    return Err(Error::NonFinite { t, s, value: v });
                }
                row += wj * v;
            }
            total += wi * row;
        }
        self.evaluations += g.nodes.len() * g.nodes.len();
        Ok(total * ht * hs)
    }

    fn cell(&mut self, a: f64, b: f64, c: f64, d: f64, depth: u32) -> Result<Cell> {
        let value = self.rule(self.hi, a, b, c, d)?;
        let coarse = self.rule(self.lo, a, b, c, d)?;
        Ok(Cell {
            a,
            b,
            c,
            d,
            value,
            err: (value - coarse).abs(),
            depth,
            leaf: true,
        })
    }
}

fn cut_points(lo: f64, hi: f64, breaks: &[f64]) -> Vec<f64> {
    let mut pts = vec![lo];
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > lo && *b < hi)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    pts.push(hi);
    pts
}

/// Integrates an infallible integrand over `r` with default options.
pub fn integrate_rect<F>(f: F, r: &Rect, tol: f64) -> Result<QuadResult>
where
    F: Fn(f64, f64) -> f64,
{
    try_integrate_rect(|t, s| Ok(f(t, s)), r, tol, &QuadOptions::default())
}

/// Adaptive integration of a fallible integrand. Errors from the integrand and
/// non-finite values abort the integration; exhausting `max_depth` or
/// `max_evaluations` does not, it sets [`QuadResult::limited`].
pub fn try_integrate_rect<F>(f: F, r: &Rect, tol: f64, opts: &QuadOptions) -> Result<QuadResult>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    if opts.order < 2 {
        return Err(Error::InvalidInput("quadrature order must be at least 2".into()));
    }
    r.validate()?;
    if r.is_degenerate() {
        return Ok(QuadResult::zero());
    }
    let rules = cached_rules(opts.order);
    let mut engine = Engine {
        f,
        hi: &rules.0,
        lo: &rules.1,
        evaluations: 0,
    };

    let ts = cut_points(r.a, r.b, &opts.t_breaks);
    let ss = cut_points(r.c, r.d, &opts.s_breaks);
    let mut cells: Vec<Cell> = Vec::new();
    for tw in ts.windows(2) {
        for sw in ss.windows(2) {
            cells.push(engine.cell(tw[0], tw[1], sw[0], sw[1], 0)?);
        }
    }

    let mut heap: BinaryHeap<Pending> = cells
        .iter()
        .enumerate()
        .map(|(id, c)| Pending { err: c.err, id })
        .collect();
    let mut total = pairwise_sum(&cells.iter().map(|c| c.value).collect::<Vec<_>>());
    let mut total_err = pairwise_sum(&cells.iter().map(|c| c.err).collect::<Vec<_>>());
    let mut limited = false;

    let leaf_totals = |cells: &[Cell]| {
        let leaves: Vec<&Cell> = cells.iter().filter(|c| c.leaf).collect();
        let v: Vec<f64> = leaves.iter().map(|c| c.value).collect();
        let e: Vec<f64> = leaves.iter().map(|c| c.err).collect();
        (pairwise_sum(&v), pairwise_sum(&e))
    };

    loop {
        let target = (tol * total.abs()).max(opts.tol_abs_floor);
        if total_err <= target {
            // incremental sums drift; confirm against a fresh summation
            let (v, e) = leaf_totals(&cells);
            total = v;
            total_err = e;
            if total_err <= (tol * total.abs()).max(opts.tol_abs_floor) {
                break;
            }
        }
        let Some(worst) = heap.pop() else {
            limited = true;
            break;
        };
        let cell = cells[worst.id];
        if cell.depth >= opts.max_depth {
            limited = true;
            continue;
        }
        if engine.evaluations >= opts.max_evaluations {
            limited = true;
            break;
        }
        let tm = 0.5 * (cell.a + cell.b);
        let sm = 0.5 * (cell.c + cell.d);
        let depth = cell.depth + 1;
        let children = [
            engine.cell(cell.a, tm, cell.c, sm, depth)?,
            engine.cell(tm, cell.b, cell.c, sm, depth)?,
            engine.cell(cell.a, tm, sm, cell.d, depth)?,
            engine.cell(tm, cell.b, sm, cell.d, depth)?,
        ];
        cells[worst.id].leaf = false;
        let child_value: f64 = children.iter().map(|c| c.value).sum();
        let child_err: f64 = children.iter().map(|c| c.err).sum();
        total += child_value - cell.value;
        total_err += child_err - cell.err;
        for child in children {
            heap.push(Pending {
                err: child.err,
                id: cells.len(),
            });
            cells.push(child);
        }
    }

    let (value, error_estimate) = leaf_totals(&cells);
    Ok(QuadResult {
        value,
        error_estimate,
        evaluations: engine.evaluations,
        limited,
    })
}

/// The at most four frame rectangles whose union is `outer` minus the interior
/// of `inner`: bottom, top, left, right.
pub fn complement_frames(inner: &Rect, outer: &Rect) -> Result<Vec<Rect>> {
    inner.validate()?;
    outer.validate()?;
    if !outer.covers(inner) {
        return Err(Error::InvalidInput(
            "inner rectangle must lie inside the outer rectangle".into(),
        ));
    }
    let frames = [
        Rect::new(outer.a, outer.b, outer.c, inner.c)?,
        Rect::new(outer.a, outer.b, inner.d, outer.d)?,
        Rect::new(outer.a, inner.a, inner.c, inner.d)?,
        Rect::new(inner.b, outer.b, inner.c, inner.d)?,
    ];
    Ok(frames.into_iter().filter(|r| !r.is_degenerate()).collect())
}

/// Integral over `effective_outer \ inner`, frame by frame.
pub fn integrate_complement<F>(f: F, inner: &Rect, effective_outer: &Rect, tol: f64) -> Result<QuadResult>
where
    F: Fn(f64, f64) -> f64,
{
    try_integrate_complement(|t, s| Ok(f(t, s)), inner, effective_outer, tol, &QuadOptions::default())
}

pub fn try_integrate_complement<F>(
    f: F,
    inner: &Rect,
    effective_outer: &Rect,
    tol: f64,
    opts: &QuadOptions,
) -> Result<QuadResult>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let parts = complement_frames(inner, effective_outer)?
        .iter()
        .map(|frame| try_integrate_rect(&f, frame, tol, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuadResult::combine(&parts))
}

/// One-dimensional integral over `[a, b]`, computed on the unit-height strip
/// `[a, b] x [0, 1]`.
pub fn integrate_1d<F>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult>
where
    F: Fn(f64) -> Result<f64>,
{
    let r = Rect::new(a, b, 0.0, 1.0)?;
    try_integrate_rect(|t, _| f(t), &r, tol, &QuadOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=12 {
            let g = GaussLegendre::new(n);
            let wsum: f64 = g.weights.iter().sum();
            assert!((wsum - 2.0).abs() < 1e-14, "n={n}");
            for p in 0..(2 * n) {
                let q: f64 = g.nodes.iter().zip(&g.weights).map(|(x, w)| w * x.powi(p as i32)).sum();
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} p={p}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn constant_and_separable_polynomial() {
        let unit = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let r = integrate_rect(|_, _| 1.0, &unit, 1e-10).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
        assert!(!r.limited);
        let r = integrate_rect(|t, s| t * s, &unit, 1e-10).unwrap();
        assert!((r.value - 0.25).abs() < 1e-10);
    }

    #[test]
    fn degenerate_rectangle_is_zero() {
        let r = Rect::new(0.5, 0.5, 0.0, 1.0).unwrap();
        let q = integrate_rect(|_, _| 1.0, &r, 1e-10).unwrap();
        assert_eq!(q.value, 0.0);
        assert_eq!(q.evaluations, 0);
    }

    #[test]
    fn nan_is_a_hard_error_with_point() {
        let unit = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let err = integrate_rect(|t, _| if t > 0.5 { f64::NAN } else { 1.0 }, &unit, 1e-8).unwrap_err();
        match err {
            Error::NonFinite { t, value, .. } => {
                assert!(t > 0.5);
                assert!(value.is_nan());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_tolerance_and_rect() {
        let unit = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
        assert!(integrate_rect(|_, _| 1.0, &unit, 0.0).is_err());
        assert!(Rect::new(1.0, 0.0, 0.0, 1.0).is_err());
        assert!(Rect::new(0.0, f64::NAN, 0.0, 1.0).is_err());
    }

    #[test]
    fn depth_limit_flags_instead_of_failing() {
        let unit = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let opts = QuadOptions {
            max_depth: 3,
            ..QuadOptions::default()
        };
        let step = |t: f64, _s: f64| Ok(if t < 1.0 / 3.0 { 1.0 } else { 0.0 });
        let r = try_integrate_rect(step, &unit, 1e-12, &opts).unwrap();
        assert!(r.limited);
        assert!((r.value - 1.0 / 3.0).abs() < 0.05);
    }

    #[test]
    fn deterministic_including_evaluation_count() {
        let r = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let f = |t: f64, s: f64| (-(t * t + 3.0 * s * s) * 40.0).exp() + (t > 0.1) as u8 as f64;
        let a = integrate_rect(f, &r, 1e-9).unwrap();
        let b = integrate_rect(f, &r, 1e-9).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.evaluations, b.evaluations);
    }

    #[test]
    fn breaks_align_cells_with_jumps() {
        let r = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let f = |t: f64, s: f64| {
            Ok(if (0.0..=0.1).contains(&t) && (0.0..=0.1).contains(&s) { 100.0 } else { 0.0 })
        };
        let opts = QuadOptions::default().with_breaks(&[0.0, 0.1], &[0.0, 0.1]);
        let q = try_integrate_rect(f, &r, 1e-10, &opts).unwrap();
        assert!((q.value - 1.0).abs() < 1e-12, "{}", q.value);
        assert!(!q.limited);
    }

    #[test]
    fn frames_cover_the_complement() {
        let inner = Rect::new(-0.5, 0.5, -0.25, 0.25).unwrap();
        let outer = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let frames = complement_frames(&inner, &outer).unwrap();
        assert_eq!(frames.len(), 4);
        let area: f64 = frames.iter().map(Rect::area).sum();
        assert!((area - (4.0 - 0.5)).abs() < 1e-15);
        // inner touching the outer boundary drops that frame
        let inner = Rect::new(-1.0, 0.5, -0.25, 0.25).unwrap();
        assert_eq!(complement_frames(&inner, &outer).unwrap().len(), 3);
        assert!(complement_frames(&outer, &inner).is_err());
    }

    #[test]
    fn one_dimensional_sine() {
        let q = integrate_1d(|t| Ok(t.cos()), 0.0, 1.0, 1e-12).unwrap();
        assert!((q.value - 1f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn edge_flags_only_affect_membership() {
        let closed = Rect::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let open = Rect::with_edges(0.0, 1.0, 0.0, 1.0, EdgeFlags::OPEN).unwrap();
        assert!(closed.contains(1.0, 1.0));
        assert!(!open.contains(1.0, 1.0));
        assert!(open.contains(0.5, 0.5));
        let f = |t: f64, s: f64| t * t + s;
        let a = integrate_rect(f, &closed, 1e-10).unwrap();
        let b = integrate_rect(f, &open, 1e-10).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }
}
