use serde::Serialize;

use singconv_core::class_a::{self, ConditionReport, Verdict};
use singconv_core::lebesgue::{default_h_grid, verify_lebesgue_point, LebesgueReport};
use singconv_core::operator;
use singconv_core::rate::{self, ConvergenceReport, RateReport};

use crate::config::{Experiment, ExperimentConfig, Format};
use crate::report::{gnuplot_script, num, OutDir};
use crate::CliError;

/// What a command produced, before mapping to an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Fail,
    Inconclusive,
}

pub struct RunOptions {
    pub gnuplot: bool,
}

fn numeric(e: singconv_core::Error) -> CliError {
    CliError::Numeric(e.to_string())
}

#[derive(Serialize)]
struct ValidateOutput<'a> {
    command: &'static str,
    config: &'a ExperimentConfig,
    kernel: &'a str,
    verdict: Verdict,
    reports: &'a [ConditionReport],
}

pub fn validate(exp: &Experiment, out: &OutDir, _run: &RunOptions) -> Result<Outcome, CliError> {
    let settings = exp.validate_settings()?;
    let reports = class_a::validate_all(exp.kernel.as_ref(), &settings).map_err(numeric)?;
    let verdict = if reports.iter().any(|r| r.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if reports.iter().any(|r| r.verdict == Verdict::Inconclusive) {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    for r in &reports {
        println!("({}) {:?}: {}", format!("{:?}", r.condition).to_lowercase(), r.verdict, r.notes);
    }
    let body = ValidateOutput {
        command: "validate",
        config: &exp.config,
        kernel: exp.kernel.name(),
        verdict,
        reports: &reports,
    };
    let written = out.json("validate.json", &body)?;
    if exp.config.outputs.format == Format::Csv {
        {
            let mut rows = Vec::new();
            for r in &reports {
                for (i, m) in r.measurements.iter().enumerate() {
                    let params: Vec<String> = m.params.iter().map(|p| num(*p)).collect();
                    rows.push(vec![
                        format!("{:?}", r.condition),
                        format!("{:?}", r.verdict),
                        num(r.margin),
                        i.to_string(),
                        params.join(" "),
                        num(m.value),
                    ]);
                }
            }
            out.csv(
                "validate.csv",
                &exp.config,
                &["condition", "verdict", "margin", "index", "params", "value"],
                &rows,
            )?;
        }
    }
    println!("verdict {verdict:?}; report {}", written.display());
    Ok(match verdict {
        Verdict::Pass => Outcome::Ok,
        Verdict::Fail => Outcome::Fail,
        Verdict::Inconclusive => Outcome::Inconclusive,
    })
}

pub fn eval(exp: &Experiment, x: f64, y: f64, lambda: f64) -> Result<Outcome, CliError> {
    let tol = exp.config.tolerances.tol;
    let v = operator::apply(exp.kernel.as_ref(), &exp.function, lambda, x, y, tol).map_err(numeric)?;
    println!("{v} (tol {tol:e})");
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct ConvergeOutput<'a> {
    command: &'static str,
    config: &'a ExperimentConfig,
    lebesgue: Option<&'a LebesgueReport>,
    warning: Option<String>,
    converged: bool,
    final_error: f64,
    trace: &'a ConvergenceReport,
}

pub fn converge(exp: &Experiment, out: &OutDir, run: &RunOptions) -> Result<Outcome, CliError> {
    let path = exp.require_path()?;
    let (x0, y0) = (exp.target.x0, exp.target.y0);
    let h_grid = default_h_grid(exp.mu.delta0);
    let (lebesgue, warning) = match verify_lebesgue_point(&exp.function, &exp.mu, x0, y0, &h_grid, &exp.lebesgue_options()) {
        Ok(r) if r.is_point() => (Some(r), None),
        Ok(r) => {
            let w = format!("target is not verified as a Lebesgue point ({:?}: {})", r.verdict, r.notes);
            (Some(r), Some(w))
        }
        Err(e) => (None, Some(format!("Lebesgue-point check failed: {e}"))),
    };
    if let Some(w) = &warning {
        eprintln!("warning: {w}");
    }
    let t = &exp.config.tolerances;
    let trace = rate::operator_error_trace(exp.kernel.as_ref(), &exp.function, path, t.tol, t.tol_cond).map_err(numeric)?;
    let final_error = *trace.errors.last().expect("non-empty path");
    let body = ConvergeOutput {
        command: "converge",
        config: &exp.config,
        lebesgue: lebesgue.as_ref(),
        warning,
        converged: trace.converged,
        final_error,
        trace: &trace,
    };
    out.json("converge.json", &body)?;
    if exp.config.outputs.format == Format::Csv {
        let rows: Vec<Vec<String>> = path
            .points
            .iter()
            .enumerate()
            .map(|(j, &(x, y, l))| {
                vec![
                    j.to_string(),
                    num(x),
                    num(y),
                    num(l),
                    num(trace.values[j]),
                    num(trace.errors[j]),
                    trace.closed_form_errors.as_ref().map_or(String::new(), |c| num(c[j])),
                ]
            })
            .collect();
        out.csv(
            "converge.csv",
            &exp.config,
            &["j", "x", "y", "lambda", "value", "error", "closed_form_error"],
            &rows,
        )?;
        if let Some(r) = &lebesgue {
            let rows: Vec<Vec<String>> = r
                .traces
                .iter()
                .flat_map(|t| t.points.iter().map(|p| vec![num(p.h), num(p.k), num(p.quotient)]))
                .collect();
            out.csv("lebesgue.csv", &exp.config, &["h", "k", "quotient"], &rows)?;
        }
        if run.gnuplot {
            out.write("converge.gp", &gnuplot_script("converge.csv", "operator error", 4, &[(6, "error")]))?;
        }
    }
    println!("converged {}; final error {}", trace.converged, num(final_error));
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct RateOutput<'a> {
    command: &'static str,
    config: &'a ExperimentConfig,
    report: &'a RateReport,
}

pub fn rate(exp: &Experiment, out: &OutDir, run: &RunOptions) -> Result<Outcome, CliError> {
    let path = exp.require_path()?;
    let deltas = exp
        .deltas
        .clone()
        .ok_or_else(|| CliError::Config("rate needs path.delta".into()))?;
    let lambdas = path.lambdas();
    let rule = |l: f64| {
        lambdas
            .iter()
            .position(|&m| m == l)
            .map_or(f64::NAN, |j| deltas[j])
    };
    let report = rate::check_rate_conditions(
        exp.kernel.as_ref(),
        &exp.mu,
        &exp.function,
        path,
        &rule,
        &exp.rate_options(),
    )
    .map_err(|e| match e {
        singconv_core::Error::InvalidInput(m) => CliError::Config(m),
        e => numeric(e),
    })?;
    out.json(
        "rate.json",
        &RateOutput {
            command: "rate",
            config: &exp.config,
            report: &report,
        },
    )?;
    let ratio = |c: &rate::RateCondition, j: usize| c.ratios.as_ref().map_or(String::new(), |r| num(r[j]));
    let rows: Vec<Vec<String>> = path
        .points
        .iter()
        .enumerate()
        .map(|(j, &(x, y, l))| {
            let pick = |v: &[f64]| v.get(j).map_or(String::new(), |v| num(*v));
            vec![
                j.to_string(),
                num(x),
                num(y),
                num(l),
                num(report.deltas[j]),
                pick(&report.delta_values),
                pick(&report.mass_bound),
                pick(&report.peak_weights.0),
                pick(&report.peak_weights.1),
                pick(&report.operator_error),
                ratio(&report.conditions[1], j),
                ratio(&report.conditions[2], j),
                ratio(&report.conditions[3], j),
                ratio(&report.conclusion, j),
            ]
        })
        .collect();
    out.csv(
        "rate.csv",
        &exp.config,
        &[
            "j", "x", "y", "lambda", "delta", "Delta", "mass_bound", "peak_weight_t", "peak_weight_s", "op_error", "ratio_ii", "ratio_iii",
            "ratio_iv", "ratio_error",
        ],
        &rows,
    )?;
    if run.gnuplot {
        out.write(
            "rate.gp",
            &gnuplot_script("rate.csv", "weighted kernel mass and operator error", 4, &[(6, "Delta"), (10, "error")]),
        )?;
    }
    for c in report.conditions.iter().chain([&report.conclusion]) {
        println!("({}) {:?}: {}", c.name, c.verdict, c.notes);
    }
    if let Some(fit) = report.delta_fit {
        println!("Delta exponent {:.4} +- {:.2e}", fit.exponent, fit.stderr);
    }
    if let Some(c) = &report.exponent_comparison {
        println!(
            "claimed exponent {} = {}: coincide {}, bound consistent {}",
            c.claimed.label, c.claimed.value, c.coincide, c.bound_consistent
        );
    }
    Ok(Outcome::Ok)
}
