//! Numerical certification of the six Class A conditions on finite λ grids.
//!
//! Every limit statement is reduced to a finite-grid proxy (see [`crate::trend`]):
//! a final value below a tolerance plus a non-increasing tail. Verdicts are
//! therefore falsifiable evidence, never proofs.

use rayon::prelude::*;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::kernels::{Accumulation, IndexSet, Kernel, Support, DEFAULT_TAIL_EPS};
use crate::quadrature::{self, QuadOptions, Rect};
use crate::trend::{self, TAIL_WINDOW};

/// Grid of λ values approaching the accumulation point λ₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaApproach {
    pub grid: Vec<f64>,
    pub description: String,
    pub accumulation: Accumulation,
}

impl LambdaApproach {
    /// Checks that `grid` lies in `set` and moves strictly toward its λ₀.
    pub fn new(grid: Vec<f64>, description: impl Into<String>, set: &IndexSet) -> Result<LambdaApproach> {
        set.validate()?;
        if grid.is_empty() {
            return Err(Error::InvalidInput("lambda grid is empty".into()));
        }
        if let Some(&bad) = grid.iter().find(|&&l| !l.is_finite() || !set.contains(l)) {
            return Err(Error::OutsideIndexSet(bad));
        }
        let ok = match set.accumulation {
            Accumulation::Infinity => grid.windows(2).all(|w| w[1] > w[0]),
            Accumulation::Finite(l0) => {
                let side = (grid[0] - l0).signum();
                side != 0.0
                    && grid.iter().all(|&l| (l - l0).signum() == side)
                    && grid.windows(2).all(|w| (w[1] - l0).abs() < (w[0] - l0).abs())
            }
        };
        if !ok {
            return Err(Error::InvalidInput(
                "lambda grid must move strictly toward the accumulation point".into(),
            ));
        }
        Ok(LambdaApproach {
            grid,
            description: description.into(),
            accumulation: set.accumulation,
        })
    }

    /// `count` points starting at `start`; the distance to λ₀ shrinks by
    /// `ratio` per step (or λ grows by `ratio` when λ₀ = ∞).
    pub fn geometric(start: f64, ratio: f64, count: usize, set: &IndexSet) -> Result<LambdaApproach> {
        if !(ratio > 1.0) || !ratio.is_finite() {
            return Err(Error::InvalidInput(format!("geometric ratio must exceed 1, got {ratio}")));
        }
        let grid: Vec<f64> = (0..count)
            .map(|i| {
                let q = ratio.powi(i as i32);
                match set.accumulation {
                    Accumulation::Infinity => start * q,
                    Accumulation::Finite(l0) => l0 + (start - l0) / q,
                }
            })
            .collect();
        let description = match set.accumulation {
            Accumulation::Infinity => format!("{count} points from {start}, ratio {ratio}, toward infinity"),
            Accumulation::Finite(l0) => format!("{count} points from {start} toward {l0}, distance ratio 1/{ratio}"),
        };
        LambdaApproach::new(grid, description, set)
    }

    /// Twelve points, doubling from `max(lambda_min, 1)` (or halving the
    /// distance to a finite λ₀).
    pub fn default_for(k: &dyn Kernel) -> Result<LambdaApproach> {
        let set = k.index_set();
        match set.accumulation {
            Accumulation::Infinity => LambdaApproach::geometric(set.lambda_min.max(1.0), 2.0, 12, &set),
            Accumulation::Finite(l0) => {
                let far = if l0 > set.lambda_min { set.lambda_min } else { set.lambda_max };
                let start = if far.is_finite() { l0 + 0.5 * (far - l0) } else { l0 + 1.0 };
                LambdaApproach::geometric(start, 2.0, 12, &set)
            }
        }
    }

    /// Monotone coordinate along the approach used for log-log fits:
    /// `ln λ` toward infinity, `-ln|λ - λ₀|` toward a finite point.
    pub fn progress(&self, lambda: f64) -> f64 {
        match self.accumulation {
            Accumulation::Infinity => lambda.ln(),
            Accumulation::Finite(l0) => -(lambda - l0).abs().ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    A,
    B,
    C,
    D,
    E,
    F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// One sample: parameters (λ, or a point and λ) and the measured value.
/// Serialises as the flat array `[params…, value]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub params: Vec<f64>,
    pub value: f64,
}

impl Measurement {
    pub fn new(params: &[f64], value: f64) -> Measurement {
        Measurement {
            params: params.to_vec(),
            value,
        }
    }
}

impl Serialize for Measurement {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = ser.serialize_seq(Some(self.params.len() + 1))?;
        for p in &self.params {
            seq.serialize_element(p)?;
        }
        seq.serialize_element(&self.value)?;
        seq.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub verdict: Verdict,
    /// Signed distance to the decision threshold; non-negative when passing.
    pub margin: f64,
    pub measurements: Vec<Measurement>,
    pub notes: String,
    /// A measurement that violates the condition, present on every `Fail`.
    pub witness: Option<Measurement>,
}

impl ConditionReport {
    fn inconclusive(condition: Condition, notes: String) -> ConditionReport {
        ConditionReport {
            condition,
            verdict: Verdict::Inconclusive,
            margin: f64::NAN,
            measurements: Vec::new(),
            notes,
            witness: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassAOptions {
    /// Relative slack on the claimed L1 bound.
    pub tol_rel: f64,
    /// Final-value threshold for the limit conditions.
    pub tol_cond: f64,
    /// Required last/first ratio for the blow-up condition.
    pub divergence_ratio: f64,
    /// Tie slack for the monotonicity comparisons, relative to the largest
    /// sampled `|K_λ|`.
    pub slack: f64,
    pub quad_tol: f64,
    /// Without an L1 claim, a log-log mass slope above this over the last
    /// grid points counts as unbounded growth.
    pub growth_slope: f64,
    pub tail_eps: f64,
}

impl Default for ClassAOptions {
    fn default() -> Self {
        ClassAOptions {
            tol_rel: 1e-6,
            tol_cond: 1e-6,
            divergence_ratio: 1e3,
            slack: 1e-12,
            quad_tol: 1e-10,
            growth_slope: 0.1,
            tail_eps: DEFAULT_TAIL_EPS,
        }
    }
}

fn check_grid(k: &dyn Kernel, approach: &LambdaApproach) -> Result<()> {
    LambdaApproach::new(approach.grid.clone(), approach.description.clone(), &k.index_set()).map(|_| ())
}

/// Integration region for `K_λ` shifted by `(x, y)`, with the edges of an
/// exact support as breaks.
fn kernel_region(k: &dyn Kernel, lambda: f64, x: f64, y: f64, tail_eps: f64) -> Result<(Rect, QuadOptions)> {
    let region = k.effective_support(lambda, tail_eps)?.translate(x, y);
    let opts = match k.support(lambda) {
        Support::Rect(r) => {
            let r = r.translate(x, y);
            QuadOptions::default().with_breaks(&[r.a, r.b], &[r.c, r.d])
        }
        Support::Unbounded => QuadOptions::default(),
    };
    Ok((region, opts))
}

fn abs_mass(k: &dyn Kernel, lambda: f64, opts: &ClassAOptions) -> Result<f64> {
    let (region, q) = kernel_region(k, lambda, 0.0, 0.0, opts.tail_eps)?;
    let f = |t: f64, s: f64| Ok(k.evaluate(lambda, t, s)?.abs());
    Ok(quadrature::try_integrate_rect(f, &region, opts.quad_tol, &q)?.value)
}

/// (a): `∬|K_λ| ≤ M` along the grid.
pub fn check_a(k: &dyn Kernel, approach: &LambdaApproach, opts: &ClassAOptions) -> Result<ConditionReport> {
    check_grid(k, approach)?;
    let masses: Vec<Result<f64>> = approach.grid.par_iter().map(|&l| abs_mass(k, l, opts)).collect();
    let mut measurements = Vec::with_capacity(masses.len());
    for (&l, m) in approach.grid.iter().zip(masses) {
        match m {
            Ok(v) => measurements.push(Measurement::new(&[l], v)),
            Err(e) => {
                return Ok(ConditionReport::inconclusive(
                    Condition::A,
                    format!("quadrature of |K| failed at lambda = {l}: {e}"),
                ))
            }
        }
    }
    let (imax, max) = measurements
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, m)| if m.value > acc.1 { (i, m.value) } else { acc });
    let report = |verdict, margin, notes: String, witness| ConditionReport {
        condition: Condition::A,
        verdict,
        margin,
        measurements: measurements.clone(),
        notes,
        witness,
    };
    if let Some(m) = k.l1_bound_claim() {
        let limit = m * (1.0 + opts.tol_rel);
        let margin = limit - max;
        return Ok(if margin >= 0.0 {
            report(Verdict::Pass, margin, format!("max mass {max:.17e} within claimed M = {m}"), None)
        } else {
            report(
                Verdict::Fail,
                margin,
                format!("mass {max:.17e} exceeds claimed M = {m}"),
                Some(measurements[imax].clone()),
            )
        });
    }
    let tail = measurements.len().saturating_sub(TAIL_WINDOW);
    let xs: Vec<f64> = measurements[tail..].iter().map(|m| approach.progress(m.params[0])).collect();
    let ys: Vec<f64> = measurements[tail..].iter().map(|m| m.value.max(f64::MIN_POSITIVE).ln()).collect();
    Ok(match trend::least_squares_slope(&xs, &ys) {
        Some((slope, _)) if slope > opts.growth_slope => report(
            Verdict::Fail,
            opts.growth_slope - slope,
            format!("no L1 claim; mass grows with log-log slope {slope:.4} over the last grid points"),
            measurements.last().cloned(),
        ),
        Some((slope, _)) => report(
            Verdict::Pass,
            opts.growth_slope - slope,
            format!("no L1 claim; inferred M = {max:.17e} (tail log-log slope {slope:.4})"),
            None,
        ),
        None => report(
            Verdict::Inconclusive,
            f64::NAN,
            "no L1 claim and too few grid points to judge growth".into(),
            None,
        ),
    })
}

/// (b): `|K_λ(t₀, s₀)|` eventually non-decreasing and grown by at least
/// `divergence_ratio` over the grid.
pub fn check_b(k: &dyn Kernel, probe: (f64, f64), approach: &LambdaApproach, opts: &ClassAOptions) -> Result<ConditionReport> {
    check_grid(k, approach)?;
    let (t0, s0) = probe;
    let measurements = approach
        .grid
        .iter()
        .map(|&l| Ok(Measurement::new(&[t0, s0, l], k.evaluate(l, t0, s0)?.abs())))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = measurements.iter().map(|m| m.value).collect();
    let (first, last) = (values[0], values[values.len() - 1]);
    let slack = opts.slack * values.iter().fold(0.0f64, |a, &v| a.max(v));
    let drop = trend::tail_decrease(&values, TAIL_WINDOW, slack);
    let margin = last - opts.divergence_ratio * first;
    let (verdict, notes, witness) = match drop {
        Some(i) => (
            Verdict::Fail,
            format!("|K| decreases in the tail at lambda = {}", approach.grid[i + 1]),
            Some(measurements[i + 1].clone()),
        ),
        None if margin <= 0.0 => (
            Verdict::Fail,
            format!("last/first = {:.6e} does not reach {}", last / first, opts.divergence_ratio),
            measurements.last().cloned(),
        ),
        None => (
            Verdict::Pass,
            format!("|K| grows by {:.6e} over the grid", last / first),
            None,
        ),
    };
    Ok(ConditionReport {
        condition: Condition::B,
        verdict,
        margin,
        measurements,
        notes: format!("probe ({t0}, {s0}): {notes}"),
        witness,
    })
}

/// `|∬ K_λ(t − x, s − y) ds dt − 1|` over the shifted effective support.
pub fn mass_deviation(k: &dyn Kernel, lambda: f64, x: f64, y: f64, opts: &ClassAOptions) -> Result<f64> {
    let (region, q) = kernel_region(k, lambda, x, y, opts.tail_eps)?;
    let f = |t: f64, s: f64| k.evaluate(lambda, t - x, s - y);
    let mass = quadrature::try_integrate_rect(f, &region, opts.quad_tol, &q)?.value;
    Ok((mass - 1.0).abs())
}

/// (c): `d_j = |∬ K_λⱼ(t − x_j, s − y_j) − 1| → 0` along `path` of `(x, y, λ)`.
pub fn check_c(
    k: &dyn Kernel,
    center: (f64, f64),
    path: &[(f64, f64, f64)],
    opts: &ClassAOptions,
) -> Result<ConditionReport> {
    let set = k.index_set();
    LambdaApproach::new(path.iter().map(|p| p.2).collect(), "path", &set)?;
    if path.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::InvalidInput("path points must be finite".into()));
    }
    let measurements = path
        .par_iter()
        .map(|&(x, y, l)| Ok(Measurement::new(&[x, y, l], mass_deviation(k, l, x, y, opts)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(limit_report(
        Condition::C,
        measurements,
        opts.tol_cond,
        format!("mass deviation along a path toward ({}, {})", center.0, center.1),
    ))
}

/// Verdict for "values → 0": final below `tol` and a non-increasing tail.
fn limit_report(condition: Condition, measurements: Vec<Measurement>, tol: f64, what: String) -> ConditionReport {
    let values: Vec<f64> = measurements.iter().map(|m| m.value).collect();
    let last = *values.last().unwrap_or(&f64::NAN);
    let margin = tol - last;
    let (verdict, notes, witness) = if trend::tends_to_zero(&values, tol) {
        (Verdict::Pass, format!("{what}: final value {last:.6e} < {tol:e}"), None)
    } else if let Some(i) = trend::tail_increase(&values, TAIL_WINDOW, tol * trend::SLACK_FRACTION) {
        (
            Verdict::Fail,
            format!("{what}: tail increases at index {}", i + 1),
            Some(measurements[i + 1].clone()),
        )
    } else {
        (
            Verdict::Fail,
            format!("{what}: final value {last:.6e} is not below {tol:e}"),
            measurements.last().cloned(),
        )
    };
    ConditionReport {
        condition,
        verdict,
        margin,
        measurements,
        notes,
        witness,
    }
}

/// Combines per-γ limit reports: the first failing one decides.
fn merge(condition: Condition, parts: Vec<ConditionReport>) -> ConditionReport {
    let margin = parts.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min);
    let failed = parts.iter().find(|p| p.verdict == Verdict::Fail);
    ConditionReport {
        condition,
        verdict: if failed.is_some() { Verdict::Fail } else { Verdict::Pass },
        margin,
        witness: failed.and_then(|p| p.witness.clone()),
        notes: parts.iter().map(|p| p.notes.as_str()).collect::<Vec<_>>().join("; "),
        measurements: parts.into_iter().flat_map(|p| p.measurements).collect(),
    }
}

fn check_gammas(gammas: &[f64]) -> Result<()> {
    if gammas.is_empty() || gammas.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
        return Err(Error::InvalidInput("gammas must be a non-empty list of positive numbers".into()));
    }
    Ok(())
}

/// (d): `max(|K_λ(γ, 0)|, |K_λ(0, γ)|) → 0` for each γ.
pub fn check_d(k: &dyn Kernel, gammas: &[f64], approach: &LambdaApproach, opts: &ClassAOptions) -> Result<ConditionReport> {
    check_grid(k, approach)?;
    check_gammas(gammas)?;
    let parts = gammas
        .iter()
        .map(|&g| {
            let ms = approach
                .grid
                .iter()
                .map(|&l| {
                    let v = k.evaluate(l, g, 0.0)?.abs().max(k.evaluate(l, 0.0, g)?.abs());
                    Ok(Measurement::new(&[g, l], v))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(limit_report(Condition::D, ms, opts.tol_cond, format!("axis values at gamma = {g}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(merge(Condition::D, parts))
}

/// Mass of `|K_λ|` on the effective support outside `[-γ, γ]²`.
pub fn tail_mass(k: &dyn Kernel, lambda: f64, gamma: f64, opts: &ClassAOptions) -> Result<f64> {
    let (outer, q) = kernel_region(k, lambda, 0.0, 0.0, opts.tail_eps)?;
    let q = q.with_breaks(&[-gamma, gamma], &[-gamma, gamma]);
    let f = |t: f64, s: f64| Ok(k.evaluate(lambda, t, s)?.abs());
    let inner = Rect::centered(gamma)?;
    let r = match outer.intersect(&inner) {
        Some(inner) => quadrature::try_integrate_complement(f, &inner, &outer, opts.quad_tol, &q)?,
        None => quadrature::try_integrate_rect(f, &outer, opts.quad_tol, &q)?,
    };
    Ok(r.value)
}

/// (e): the mass of `|K_λ|` outside `[-γ, γ]²` tends to zero for each γ.
pub fn check_e(k: &dyn Kernel, gammas: &[f64], approach: &LambdaApproach, opts: &ClassAOptions) -> Result<ConditionReport> {
    check_grid(k, approach)?;
    check_gammas(gammas)?;
    let parts = gammas
        .iter()
        .map(|&g| {
            let ms = approach
                .grid
                .par_iter()
                .map(|&l| Ok(Measurement::new(&[g, l], tail_mass(k, l, g, opts)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(limit_report(Condition::E, ms, opts.tol_cond, format!("tail mass outside gamma = {g}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(merge(Condition::E, parts))
}

/// `|g(a,c) − g(a,d) − g(b,c) + g(b,d)|`, the total variation of `g` on `r`
/// when `g` is bimonotone there.
pub fn four_point_variation<G: Fn(f64, f64) -> f64>(g: G, r: &Rect) -> f64 {
    (g(r.a, r.c) - g(r.a, r.d) - g(r.b, r.c) + g(r.b, r.d)).abs()
}

/// (f): near-origin monotonicity of `|K_λ|` on a lattice with spacing
/// `δ/grid_n` in `(-δ₁, δ₁) x (-δ₂, δ₂)`.
///
/// Each comparison is recorded as `[λ, t, s, t', s']` with `(t', s')` farther
/// from the origin. Along an axis (`t = t'` or `s = s'`) the value is
/// `|K(t,s)| − |K(t',s')|`; on a cell it is the cross-difference
/// `|K(t',s')| − |K(t,s')| − |K(t',s)| + |K(t,s)|`. Measured away from the
/// origin, both must be non-negative in every quadrant, which is the
/// increasing/decreasing sign pattern written in signed coordinates.
pub fn check_f(k: &dyn Kernel, lambda_samples: &[f64], grid_n: usize, opts: &ClassAOptions) -> Result<ConditionReport> {
    let Some((d1, d2)) = k.monotonicity_radii() else {
        return Ok(ConditionReport::inconclusive(
            Condition::F,
            "kernel has no monotonicity radii".into(),
        ));
    };
    if grid_n < 8 {
        return Err(Error::InvalidInput(format!("lattice needs at least 8 points per side, got {grid_n}")));
    }
    if lambda_samples.is_empty() {
        return Err(Error::InvalidInput("no lambda samples".into()));
    }
    let set = k.index_set();
    if let Some(&bad) = lambda_samples.iter().find(|&&l| !set.contains(l)) {
        return Err(Error::OutsideIndexSet(bad));
    }
    let per_lambda = lambda_samples
        .par_iter()
        .map(|&l| f_worst(k, l, d1, d2, grid_n, opts.slack))
        .collect::<Result<Vec<_>>>()?;
    let measurements: Vec<Measurement> = lambda_samples
        .iter()
        .zip(&per_lambda)
        .map(|(&l, (worst, _))| Measurement::new(&[l], worst.value))
        .collect();
    let (worst, slack) = per_lambda
        .iter()
        .min_by(|a, b| (a.0.value + a.1).total_cmp(&(b.0.value + b.1)))
        .expect("non-empty");
    let margin = worst.value + slack;
    let (verdict, notes, witness) = if margin >= 0.0 {
        (Verdict::Pass, format!("all comparisons hold on a {grid_n}-per-side lattice"), None)
    } else {
        let p = &worst.params;
        let kind = if p[1] == p[3] || p[2] == p[4] { "axis monotonicity" } else { "cross-difference" };
        (
            Verdict::Fail,
            format!(
                "{kind} violated at lambda = {} between ({}, {}) and ({}, {}) by {:.6e}",
                p[0], p[1], p[2], p[3], p[4], -worst.value
            ),
            Some(worst.clone()),
        )
    };
    Ok(ConditionReport {
        condition: Condition::F,
        verdict,
        margin,
        measurements,
        notes,
        witness,
    })
}

/// Worst comparison for one λ and the absolute slack used.
fn f_worst(k: &dyn Kernel, l: f64, d1: f64, d2: f64, n: usize, slack: f64) -> Result<(Measurement, f64)> {
    let ts: Vec<f64> = (0..n).map(|i| d1 * i as f64 / n as f64).collect();
    let ss: Vec<f64> = (0..n).map(|j| d2 * j as f64 / n as f64).collect();
    let mut worst = Measurement::new(&[l, 0.0, 0.0, 0.0, 0.0], f64::INFINITY);
    let mut peak = 0.0f64;
    for (st, ss_sign) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
        let mut g = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                g[i][j] = k.evaluate(l, st * ts[i], ss_sign * ss[j])?.abs();
                peak = peak.max(g[i][j]);
            }
        }
        let pt = |i: usize, j: usize| (st * ts[i], ss_sign * ss[j]);
        let mut consider = |v: f64, a: (f64, f64), b: (f64, f64)| {
            if v < worst.value {
                worst = Measurement::new(&[l, a.0, a.1, b.0, b.1], v);
            }
        };
        for i in 0..n {
            for j in 0..n {
                if i + 1 < n {
                    consider(g[i][j] - g[i + 1][j], pt(i, j), pt(i + 1, j));
                }
                if j + 1 < n {
                    consider(g[i][j] - g[i][j + 1], pt(i, j), pt(i, j + 1));
                }
                if i + 1 < n && j + 1 < n {
                    let cross = g[i + 1][j + 1] - g[i][j + 1] - g[i + 1][j] + g[i][j];
                    consider(cross, pt(i, j), pt(i + 1, j + 1));
                }
            }
        }
    }
    Ok((worst, slack * peak))
}

/// Inputs for [`validate_all`] beyond the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidateSettings {
    pub approach: LambdaApproach,
    pub probes: Vec<(f64, f64)>,
    /// Path for (c); defaults to the fixed point `center` along the grid.
    pub path: Option<Vec<(f64, f64, f64)>>,
    pub center: (f64, f64),
    pub gammas: Vec<f64>,
    /// Defaults to the approach grid.
    pub f_lambdas: Option<Vec<f64>>,
    pub grid_n: usize,
    pub options: ClassAOptions,
}

impl ValidateSettings {
    pub fn new(approach: LambdaApproach) -> ValidateSettings {
        ValidateSettings {
            approach,
            probes: vec![(0.0, 0.0)],
            path: None,
            center: (0.0, 0.0),
            gammas: vec![0.25, 0.5],
            f_lambdas: None,
            grid_n: 32,
            options: ClassAOptions::default(),
        }
    }
}

/// Runs (a)–(f) and returns the reports in that order. Condition (b) passes
/// only if it passes at every probe.
pub fn validate_all(k: &dyn Kernel, set: &ValidateSettings) -> Result<Vec<ConditionReport>> {
    if set.probes.is_empty() {
        return Err(Error::InvalidInput("condition (b) needs at least one probe".into()));
    }
    let opts = &set.options;
    let grid = &set.approach.grid;
    let a = check_a(k, &set.approach, opts)?;
    let b_parts = set
        .probes
        .iter()
        .map(|&p| check_b(k, p, &set.approach, opts))
        .collect::<Result<Vec<_>>>()?;
    let b = if b_parts.len() == 1 {
        b_parts.into_iter().next().expect("one probe")
    } else {
        merge(Condition::B, b_parts)
    };
    let default_path: Vec<(f64, f64, f64)> = grid.iter().map(|&l| (set.center.0, set.center.1, l)).collect();
    let c = check_c(k, set.center, set.path.as_deref().unwrap_or(&default_path), opts)?;
    let d = check_d(k, &set.gammas, &set.approach, opts)?;
    let e = check_e(k, &set.gammas, &set.approach, opts)?;
    let f = check_f(k, set.f_lambdas.as_deref().unwrap_or(grid), set.grid_n, opts)?;
    Ok(vec![a, b, c, d, e, f])
}
