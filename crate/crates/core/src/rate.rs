//! Rates of pointwise convergence: the weighted kernel mass `Δ(λ, δ, x, y)`
//! around `(x₀, y₀)`, the hypotheses it is compared with, and empirical
//! exponent fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::class_a::{self, ClassAOptions, LambdaApproach, Verdict};
use crate::error::{Error, Result};
use crate::kernels::{Accumulation, Kernel, Support, DEFAULT_TAIL_EPS};
use crate::lebesgue::MuPair;
use crate::operator::{self, SampleFunction};
use crate::quadrature::{self, QuadOptions, Rect};
use crate::trend::{self, SLACK_FRACTION, TAIL_WINDOW};

/// The limit point `(x₀, y₀, λ₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub x0: f64,
    pub y0: f64,
    pub accumulation: Accumulation,
}

/// Points `(x, y, λ)` moving toward a [`Target`], with a description of how
/// they were generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachPath {
    pub points: Vec<(f64, f64, f64)>,
    pub target: Target,
    pub coupling: String,
}

impl ApproachPath {
    /// Checks that λ moves strictly toward λ₀ inside the kernel's index set
    /// and that the distance to `(x₀, y₀)` never grows.
    pub fn new(points: Vec<(f64, f64, f64)>, target: Target, coupling: impl Into<String>, k: &dyn Kernel) -> Result<ApproachPath> {
        let set = k.index_set();
        if set.accumulation != target.accumulation {
            return Err(Error::InvalidInput("target accumulation point differs from the kernel's".into()));
        }
        LambdaApproach::new(points.iter().map(|p| p.2).collect(), "", &set)?;
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::InvalidInput("path points must be finite".into()));
        }
        let dist = |p: &(f64, f64, f64)| (p.0 - target.x0).abs().max((p.1 - target.y0).abs());
        if let Some(j) = points.windows(2).position(|w| dist(&w[1]) > dist(&w[0])) {
            return Err(Error::InvalidInput(format!(
                "path moves away from ({}, {}) at index {}",
                target.x0,
                target.y0,
                j + 1
            )));
        }
        Ok(ApproachPath {
            points,
            target,
            coupling: coupling.into(),
        })
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.2).collect()
    }
}

/// `∬ |K_λ(t − x, s − y)| ρ₁(|t − x₀|) ρ₂(|s − y₀|)` over the square of
/// half-width `δ` around `(x₀, y₀)`.
#[allow(clippy::too_many_arguments)]
pub fn delta_functional(
    k: &dyn Kernel,
    mp: &MuPair,
    x0: f64,
    y0: f64,
    delta: f64,
    x: f64,
    y: f64,
    lambda: f64,
    tol: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta < mp.delta0) {
        return Err(Error::InvalidInput(format!("need 0 < delta < delta0 = {}, got {delta}", mp.delta0)));
    }
    if !k.index_set().contains(lambda) {
        return Err(Error::OutsideIndexSet(lambda));
    }
    let square = Rect::new(x0 - delta, x0 + delta, y0 - delta, y0 + delta)?;
    let kernel_region = k.effective_support(lambda, DEFAULT_TAIL_EPS)?.translate(x, y);
    let Some(region) = square.intersect(&kernel_region) else {
        return Ok(0.0);
    };
    let mut q = QuadOptions::default().with_breaks(&[x0], &[y0]);
    if let Support::Rect(r) = k.support(lambda) {
        let r = r.translate(x, y);
        q = q.with_breaks(&[r.a, r.b], &[r.c, r.d]);
    }
    let g = |t: f64, s: f64| {
        Ok(k.evaluate(lambda, t - x, s - y)?.abs() * (mp.rho1)((t - x0).abs()) * (mp.rho2)((s - y0).abs()))
    };
    Ok(quadrature::try_integrate_rect(g, &region, tol, &q)?.value)
}

/// `(|K_λ(0,0)| μ₁(|x − x₀|), |K_λ(0,0)| μ₂(|y − y₀|))`.
pub fn peak_weights(k: &dyn Kernel, mp: &MuPair, x0: f64, y0: f64, x: f64, y: f64, lambda: f64) -> Result<(f64, f64)> {
    let (dx, dy) = ((x - x0).abs(), (y - y0).abs());
    if !(dx < mp.delta0 && dy < mp.delta0) {
        return Err(Error::InvalidInput(format!(
            "|x - x0| = {dx} and |y - y0| = {dy} must be below delta0 = {}",
            mp.delta0
        )));
    }
    let peak = k.evaluate(lambda, 0.0, 0.0)?.abs();
    Ok((peak * (mp.mu1)(dx), peak * (mp.mu2)(dy)))
}

/// Default ratio threshold for [`little_o`].
pub const RATIO_TOL: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LittleO {
    pub holds: bool,
    pub ratios: Vec<f64>,
    /// Slope of `ln r_j` against `ln j` (1-based) over the positive ratios;
    /// diagnostic only.
    pub tail_slope: Option<f64>,
}

/// `a_j = o(b_j)` on a finite grid: the last four ratios are non-increasing
/// (ties within `ratio_tol / 100`) and the final ratio is below `ratio_tol`.
pub fn little_o(numerator: &[f64], denominator: &[f64], ratio_tol: f64) -> Result<LittleO> {
    if numerator.len() != denominator.len() || numerator.len() < 6 {
        return Err(Error::InvalidInput(format!(
            "little-o needs two sequences of equal length >= 6, got {} and {}",
            numerator.len(),
            denominator.len()
        )));
    }
    if let Some(j) = numerator.iter().position(|a| !(*a >= 0.0) || !a.is_finite()) {
        return Err(Error::InvalidInput(format!("numerator at index {j} is not a finite non-negative number")));
    }
    if let Some(j) = denominator.iter().position(|b| !(*b > 0.0) || !b.is_finite()) {
        return Err(Error::InvalidInput(format!("denominator at index {j} is not positive")));
    }
    let ratios: Vec<f64> = numerator.iter().zip(denominator).map(|(a, b)| a / b).collect();
    let last = ratios[ratios.len() - 1];
    let holds = last < ratio_tol && trend::tail_increase(&ratios, TAIL_WINDOW, ratio_tol * SLACK_FRACTION).is_none();
    let (xs, ys): (Vec<f64>, Vec<f64>) = ratios
        .iter()
        .enumerate()
        .filter(|(_, r)| **r > 0.0)
        .map(|(j, r)| (((j + 1) as f64).ln(), r.ln()))
        .unzip();
    let tail_slope = trend::least_squares_slope(&xs, &ys).map(|(m, _)| m);
    Ok(LittleO {
        holds,
        ratios,
        tail_slope,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub stderr: f64,
}

/// Fits `values ≈ C λ^{-exponent}` by least squares in log-log coordinates.
pub fn fit_exponent(lambdas: &[f64], values: &[f64]) -> Result<ExponentFit> {
    if lambdas.len() != values.len() || lambdas.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "exponent fit needs equal lengths >= 4, got {} and {}",
            lambdas.len(),
            values.len()
        )));
    }
    if let Some(j) = values.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(format!("value at index {j} is not positive")));
    }
    if let Some(j) = lambdas.iter().position(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda at index {j} is not positive")));
    }
    let xs: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let (slope, stderr) = trend::least_squares_slope(&xs, &ys)
        .ok_or_else(|| Error::InvalidInput("lambda values must not all coincide".into()))?;
    Ok(ExponentFit {
        exponent: -slope,
        stderr,
    })
}

/// An exponent claimed for `Δ = O(λ^{-claimed})`, with its symbolic form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimedExponent {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentComparison {
    pub claimed: ClaimedExponent,
    pub measured: f64,
    pub stderr: f64,
    /// `|measured − claimed| ≤ exponent_tol`.
    pub coincide: bool,
    /// `measured ≥ claimed − exponent_tol`, i.e. the measured decay is at
    /// least as fast as the claimed bound.
    pub bound_consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateOptions {
    /// γ values for conditions (ii) and (iii); default `δ₀/2`.
    pub gammas: Option<Vec<f64>>,
    pub ratio_tol: f64,
    pub tol_cond: f64,
    pub quad_tol: f64,
    pub apply_tol: f64,
    pub exponent_tol: f64,
    /// Log-log slope above which a hypothesis sequence counts as unbounded.
    pub growth_slope: f64,
    pub claimed_exponent: Option<ClaimedExponent>,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions {
            gammas: None,
            ratio_tol: RATIO_TOL,
            tol_cond: 1e-6,
            quad_tol: 1e-10,
            apply_tol: 1e-10,
            exponent_tol: 0.05,
            growth_slope: 0.1,
            claimed_exponent: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCondition {
    pub name: String,
    pub verdict: Verdict,
    pub values: Vec<f64>,
    pub ratios: Option<Vec<f64>>,
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub path: ApproachPath,
    pub deltas: Vec<f64>,
    pub delta_values: Vec<f64>,
    /// Same functional as `delta_values`.
    pub mass_bound: Vec<f64>,
    pub peak_weights: (Vec<f64>, Vec<f64>),
    /// Whether each hypothesis sequence stays bounded along the path.
    pub hypotheses_bounded: [bool; 3],
    pub gammas: Vec<f64>,
    /// (i)–(iv) in order.
    pub conditions: Vec<RateCondition>,
    pub operator_error: Vec<f64>,
    /// `|L_λ f − f(x₀, y₀)| = o(Δ)` on the path.
    pub conclusion: RateCondition,
    pub little_o_verdict: bool,
    pub delta_fit: Option<ExponentFit>,
    pub error_fit: Option<ExponentFit>,
    pub exponent_comparison: Option<ExponentComparison>,
}

struct PointData {
    delta_value: Result<f64>,
    pw: Result<(f64, f64)>,
    axis: Result<f64>,
    tail: Result<f64>,
    mass_dev: Result<f64>,
    op_error: Result<f64>,
}

fn collect<T: Copy>(rows: &[PointData], pick: impl Fn(&PointData) -> &Result<T>) -> std::result::Result<Vec<T>, String> {
    rows.iter()
        .enumerate()
        .map(|(j, r)| pick(r).as_ref().copied().map_err(|e| format!("index {j}: {e}")))
        .collect()
}

fn bounded(lambdas: &[f64], values: &[f64], growth: f64) -> bool {
    if values.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let tail = values.len().saturating_sub(TAIL_WINDOW);
    let (xs, ys): (Vec<f64>, Vec<f64>) = lambdas[tail..]
        .iter()
        .zip(&values[tail..])
        .filter(|(_, v)| **v > 0.0)
        .map(|(l, v)| (l.ln(), v.ln()))
        .unzip();
    trend::least_squares_slope(&xs, &ys).is_none_or(|(m, _)| m <= growth)
}

fn little_o_condition(
    name: &str,
    values: std::result::Result<Vec<f64>, String>,
    delta: &std::result::Result<Vec<f64>, String>,
    ratio_tol: f64,
    what: &str,
) -> RateCondition {
    let inconclusive = |values: Vec<f64>, notes: String| RateCondition {
        name: name.into(),
        verdict: Verdict::Inconclusive,
        values,
        ratios: None,
        notes,
    };
    let values = match values {
        Ok(v) => v,
        Err(e) => return inconclusive(Vec::new(), e),
    };
    let delta = match delta {
        Ok(d) => d,
        Err(e) => return inconclusive(values, format!("delta functional failed at {e}")),
    };
    match little_o(&values, delta, ratio_tol) {
        Ok(lo) => RateCondition {
            name: name.into(),
            verdict: if lo.holds { Verdict::Pass } else { Verdict::Fail },
            notes: format!(
                "{what} = o(delta): final ratio {:.6e}, {}",
                lo.ratios.last().copied().unwrap_or(f64::NAN),
                if lo.holds { "holds" } else { "does not hold on this path" }
            ),
            values,
            ratios: Some(lo.ratios),
        },
        Err(e) => inconclusive(values, e.to_string()),
    }
}

/// Evaluates Δ, the hypotheses and conditions (i)–(iv) along `path` with
/// `δ_j = delta_rule(λ_j)`, and the operator error with its rate.
pub fn check_rate_conditions(
    k: &dyn Kernel,
    mp: &MuPair,
    f: &SampleFunction,
    path: &ApproachPath,
    delta_rule: &(dyn Fn(f64) -> f64 + Sync),
    opts: &RateOptions,
) -> Result<RateReport> {
    let (x0, y0) = (path.target.x0, path.target.y0);
    let lambdas = path.lambdas();
    let deltas: Vec<f64> = lambdas.iter().map(|&l| delta_rule(l)).collect();
    if let Some(j) = deltas.iter().position(|d| !(*d > 0.0 && *d < mp.delta0)) {
        return Err(Error::InvalidInput(format!(
            "delta rule gives {} at index {j}, outside (0, {})",
            deltas[j], mp.delta0
        )));
    }
    let gammas = opts.gammas.clone().unwrap_or_else(|| vec![0.5 * mp.delta0]);
    if gammas.is_empty() || gammas.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::InvalidInput("gammas must be positive".into()));
    }
    let fx0 = f.representative(x0, y0)?;
    let copts = ClassAOptions {
        quad_tol: opts.quad_tol,
        ..ClassAOptions::default()
    };
    let rows: Vec<PointData> = path
        .points
        .par_iter()
        .zip(&deltas)
        .map(|(&(x, y, l), &d)| {
            let max_over = |g: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
                gammas.iter().try_fold(0.0f64, |m, &gm| Ok(m.max(g(gm)?)))
            };
            PointData {
                delta_value: delta_functional(k, mp, x0, y0, d, x, y, l, opts.quad_tol),
                pw: peak_weights(k, mp, x0, y0, x, y, l),
                axis: max_over(&|g| Ok(k.evaluate(l, g, 0.0)?.abs().max(k.evaluate(l, 0.0, g)?.abs()))),
                tail: max_over(&|g| class_a::tail_mass(k, l, g, &copts)),
                mass_dev: class_a::mass_deviation(k, l, x, y, &copts),
                op_error: operator::apply(k, f, l, x, y, opts.apply_tol).map(|v| (v - fx0).abs()),
            }
        })
        .collect();
    let delta = collect(&rows, |r| &r.delta_value);
    let pw = collect(&rows, |r| &r.pw);

    let cond_i = match &delta {
        Ok(d) => {
            let ok = trend::decays_relative(d, opts.ratio_tol, opts.tol_cond);
            RateCondition {
                name: "i".into(),
                verdict: if ok { Verdict::Pass } else { Verdict::Fail },
                values: d.clone(),
                ratios: None,
                notes: format!(
                    "delta from {:.6e} to {:.6e}: {}",
                    d[0],
                    d[d.len() - 1],
                    if ok { "tends to zero" } else { "does not tend to zero" }
                ),
            }
        }
        Err(e) => RateCondition {
            name: "i".into(),
            verdict: Verdict::Inconclusive,
            values: Vec::new(),
            ratios: None,
            notes: e.clone(),
        },
    };
    let gnote = format!("{gammas:?}");
    let conditions = vec![
        cond_i,
        little_o_condition("ii", collect(&rows, |r| &r.axis), &delta, opts.ratio_tol, &format!("axis values at gamma {gnote}")),
        little_o_condition("iii", collect(&rows, |r| &r.tail), &delta, opts.ratio_tol, &format!("tail mass outside gamma {gnote}")),
        little_o_condition("iv", collect(&rows, |r| &r.mass_dev), &delta, opts.ratio_tol, "mass deviation"),
    ];
    let op_error = collect(&rows, |r| &r.op_error);
    let conclusion = little_o_condition("conclusion", op_error.clone(), &delta, opts.ratio_tol, "operator error");

    let delta_values = delta.clone().unwrap_or_default();
    let (pw_t, pw_s): (Vec<f64>, Vec<f64>) = pw.clone().unwrap_or_default().into_iter().unzip();
    let hypotheses_bounded = [
        delta.is_ok() && bounded(&lambdas, &delta_values, opts.growth_slope),
        pw.is_ok() && bounded(&lambdas, &pw_t, opts.growth_slope),
        pw.is_ok() && bounded(&lambdas, &pw_s, opts.growth_slope),
    ];
    let delta_fit = fit_exponent(&lambdas, &delta_values).ok();
    let operator_error = op_error.unwrap_or_default();
    let error_fit = fit_exponent(&lambdas, &operator_error).ok();
    let exponent_comparison = match (&opts.claimed_exponent, delta_fit) {
        (Some(c), Some(fit)) => Some(ExponentComparison {
            claimed: c.clone(),
            measured: fit.exponent,
            stderr: fit.stderr,
            coincide: (fit.exponent - c.value).abs() <= opts.exponent_tol,
            bound_consistent: fit.exponent >= c.value - opts.exponent_tol,
        }),
        _ => None,
    };
    Ok(RateReport {
        path: path.clone(),
        deltas,
        mass_bound: delta_values.clone(),
        delta_values,
        peak_weights: (pw_t, pw_s),
        hypotheses_bounded,
        gammas,
        little_o_verdict: conclusion.verdict == Verdict::Pass,
        conditions,
        operator_error,
        conclusion,
        delta_fit,
        error_fit,
        exponent_comparison,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub path: ApproachPath,
    pub values: Vec<f64>,
    pub target_value: f64,
    pub errors: Vec<f64>,
    /// Errors from the function's closed-form image, where one exists.
    pub closed_form_errors: Option<Vec<f64>>,
    pub converged: bool,
    pub error_fit: Option<ExponentFit>,
}

/// `|L_λⱼ(f; x_j, y_j) − f(x₀, y₀)|` along `path`. Convergence is the
/// relative decay test: a non-increasing tail and a tenfold drop (or a final
/// error below `tol_cond`).
pub fn operator_error_trace(
    k: &dyn Kernel,
    f: &SampleFunction,
    path: &ApproachPath,
    apply_tol: f64,
    tol_cond: f64,
) -> Result<ConvergenceReport> {
    let target_value = f.representative(path.target.x0, path.target.y0)?;
    let values = path
        .points
        .par_iter()
        .map(|&(x, y, l)| operator::apply(k, f, l, x, y, apply_tol))
        .collect::<Result<Vec<f64>>>()?;
    let errors: Vec<f64> = values.iter().map(|v| (v - target_value).abs()).collect();
    let closed_form_errors = path
        .points
        .iter()
        .map(|&(x, y, l)| f.closed_form_convolution(k.name(), l, x, y).map(|v| (v - target_value).abs()))
        .collect::<Option<Vec<f64>>>();
    let converged = trend::decays_relative(&errors, RATIO_TOL, tol_cond);
    let error_fit = fit_exponent(&path.lambdas(), &errors).ok();
    Ok(ConvergenceReport {
        path: path.clone(),
        values,
        target_value,
        errors,
        closed_form_errors,
        converged,
        error_fit,
    })
}

/// `λ² · area(square ∩ shifted support)` for the box kernel with identity μ,
/// the exact value of [`delta_functional`] in that case.
pub fn box_delta_closed_form(x0: f64, y0: f64, delta: f64, x: f64, y: f64, lambda: f64) -> f64 {
    let w = 1.0 / lambda;
    let ov = |lo: f64, hi: f64, a: f64, b: f64| (hi.min(b) - lo.max(a)).max(0.0);
    lambda * lambda * ov(x0 - delta, x0 + delta, x, x + w) * ov(y0 - delta, y0 + delta, y, y + w)
}
