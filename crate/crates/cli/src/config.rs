//! Experiment configuration: the JSON file format and its resolution into
//! core objects.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use singconv_core::class_a::{ClassAOptions, LambdaApproach, ValidateSettings};
use singconv_core::expr::Expr;
use singconv_core::kernels::{catalog_kernel, kernel_from_expression, Accumulation, IndexSet, KernelFamily, SupportSpec};
use singconv_core::lebesgue::{LebesgueOptions, MuPair};
use singconv_core::operator::{catalog_function, DomainSpec, KnownPoint, SampleFunction};
use singconv_core::quadrature::{EdgeFlags, Rect};
use singconv_core::rate::{ApproachPath, ClaimedExponent, RateOptions, Target};

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub kernel: KernelConfig,
    pub domain: Option<DomainConfig>,
    pub function: FunctionConfig,
    pub mu: MuConfig,
    pub target: TargetConfig,
    pub path: PathConfig,
    pub validate: ValidateConfig,
    pub tolerances: Tolerances,
    pub outputs: Outputs,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub catalog: Option<String>,
    /// Expression over `lambda, t, s`.
    pub expression: Option<String>,
    pub name: Option<String>,
    pub index_set: Option<IndexSetConfig>,
    /// `[t_lo, t_hi, s_lo, s_hi]` as expressions in `lambda`.
    pub support: Option<[String; 4]>,
    pub l1_bound: Option<f64>,
    pub monotonicity_radii: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSetConfig {
    pub lambda_min: f64,
    /// Omitted or null for an unbounded set.
    #[serde(default)]
    pub lambda_max: Option<f64>,
    pub accumulation: Accumulation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Rect {
        bounds: [f64; 4],
        /// `[left, right, bottom, top]` inclusion; closed by default.
        #[serde(default)]
        edges: Option<[bool; 4]>,
    },
    FullPlane {
        effective_support: [f64; 4],
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FunctionConfig {
    pub catalog: Option<String>,
    /// Expression over `t, s`.
    pub expression: Option<String>,
    pub t_breaks: Vec<f64>,
    pub s_breaks: Vec<f64>,
    pub known_points: Vec<KnownPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MuConfig {
    /// `rho1` over `t`, `rho2` over `s`; both absent means the identity pair.
    pub rho1: Option<String>,
    pub rho2: Option<String>,
    /// Optional closed forms, `mu1` over `h` and `mu2` over `k`.
    pub mu1: Option<String>,
    pub mu2: Option<String>,
    pub delta0: f64,
}

impl Default for MuConfig {
    fn default() -> Self {
        MuConfig {
            rho1: None,
            rho2: None,
            mu1: None,
            mu2: None,
            delta0: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetConfig {
    pub x0: f64,
    pub y0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LambdaGrid {
    Geometric { start: f64, ratio: f64, count: usize },
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathConfig {
    pub lambda: Option<LambdaGrid>,
    /// Expressions in `lambda`, `x0`, `y0` and `params`.
    pub x: Option<String>,
    pub y: Option<String>,
    pub delta: Option<String>,
    pub params: BTreeMap<String, f64>,
    /// Exponent claimed for the decay of the weighted kernel mass, as an
    /// expression in `params`.
    pub claimed_exponent: Option<String>,
    pub gammas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub probes: Vec<[f64; 2]>,
    pub center: [f64; 2],
    pub gammas: Vec<f64>,
    pub f_lambdas: Option<Vec<f64>>,
    pub grid_n: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            probes: vec![[0.0, 0.0]],
            center: [0.0, 0.0],
            gammas: vec![0.25, 0.5],
            f_lambdas: None,
            grid_n: 32,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Quadrature tolerance for operator evaluations and integrals.
    pub tol: f64,
    pub tol_cond: f64,
    pub tol_leb: f64,
    pub ratio_tol: f64,
    pub tol_rel: f64,
    pub exponent_tol: f64,
    pub slack: f64,
    pub divergence_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol: 1e-10,
            tol_cond: 1e-6,
            tol_leb: 1e-3,
            ratio_tol: 0.1,
            tol_rel: 1e-6,
            exponent_tol: 0.05,
            slack: 1e-12,
            divergence_ratio: 1e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub format: Format,
    pub dir: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            format: Format::Json,
            dir: "out".into(),
        }
    }
}

fn config_err(msg: impl std::fmt::Display) -> CliError {
    CliError::Config(msg.to_string())
}

/// Parses `text`, then applies `k=v` tolerance overrides. Overrides go
/// through the same typed decoding, so unknown names are rejected.
pub fn parse_config(text: &str, seed_tolerances: Option<&str>) -> Result<ExperimentConfig, CliError> {
    let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| config_err(format!("config: {e}")))?;
    if let Some(seeds) = seed_tolerances {
        let mut tol = serde_json::to_value(&cfg.tolerances).map_err(config_err)?;
        let obj = tol.as_object_mut().expect("tolerances serialize to an object");
        for pair in seeds.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| config_err(format!("--seed-tolerances entry '{pair}' is not key=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| config_err(format!("--seed-tolerances value for '{}' is not a number", k.trim())))?;
            let num = serde_json::Number::from_f64(v)
                .ok_or_else(|| config_err(format!("--seed-tolerances value for '{}' is not finite", k.trim())))?;
            obj.insert(k.trim().to_string(), Value::Number(num));
        }
        cfg.tolerances = serde_json::from_value(tol).map_err(|e| config_err(format!("--seed-tolerances: {e}")))?;
    }
    Ok(cfg)
}

/// Config resolved into core objects.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub kernel: KernelFamily,
    pub function: SampleFunction,
    pub mu: MuPair,
    pub target: Target,
    pub lambdas: Option<Vec<f64>>,
    pub path: Option<ApproachPath>,
    pub deltas: Option<Vec<f64>>,
    pub claimed_exponent: Option<ClaimedExponent>,
}

fn resolve_kernel(c: &KernelConfig) -> Result<KernelFamily, CliError> {
    match (&c.catalog, &c.expression) {
        (Some(name), None) => {
            let k = catalog_kernel(name).ok_or_else(|| config_err(format!("unknown catalog kernel '{name}'")))?;
            if c.index_set.is_some() || c.support.is_some() || c.l1_bound.is_some() || c.monotonicity_radii.is_some() {
                return Err(config_err("catalog kernels take no index_set, support, l1_bound or radii"));
            }
            Ok(k)
        }
        (None, Some(src)) => {
            let set = match &c.index_set {
                Some(s) => IndexSet::new(s.lambda_min, s.lambda_max.unwrap_or(f64::INFINITY), s.accumulation)
                    .map_err(config_err)?,
                None => IndexSet::to_infinity(1.0),
            };
            let support = match &c.support {
                Some([a, b, cc, d]) => Some(SupportSpec::parse(a, b, cc, d).map_err(|e| config_err(format!("kernel support: {e}")))?),
                None => None,
            };
            let mut k = kernel_from_expression(src, set, support)
                .map_err(|e| config_err(format!("kernel expression: {e}")))?
                .with_l1_bound(c.l1_bound)
                .with_monotonicity_radii(c.monotonicity_radii.map(|[a, b]| (a, b)));
            if let Some(n) = &c.name {
                k = k.with_name(n.clone());
            }
            Ok(Arc::new(k))
        }
        (Some(_), Some(_)) => Err(config_err("kernel needs either 'catalog' or 'expression', not both")),
        (None, None) => Err(config_err("kernel needs 'catalog' or 'expression'")),
    }
}

fn resolve_domain(c: &DomainConfig) -> Result<(DomainSpec, Option<Rect>), CliError> {
    match c {
        DomainConfig::Rect { bounds: [a, b, cc, d], edges } => {
            let flags = edges.map_or(EdgeFlags::CLOSED, |[left, right, bottom, top]| EdgeFlags {
                left,
                right,
                bottom,
                top,
            });
            let r = Rect::with_edges(*a, *b, *cc, *d, flags).map_err(config_err)?;
            Ok((DomainSpec::bounded(r).map_err(config_err)?, None))
        }
        DomainConfig::FullPlane {
            effective_support: [a, b, cc, d],
        } => Ok((DomainSpec::FullPlane, Some(Rect::new(*a, *b, *cc, *d).map_err(config_err)?))),
    }
}

fn resolve_function(c: &FunctionConfig, domain: Option<&DomainConfig>) -> Result<SampleFunction, CliError> {
    let mut f = match (&c.catalog, &c.expression) {
        (Some(name), None) => {
            let mut f = catalog_function(name).ok_or_else(|| config_err(format!("unknown catalog function '{name}'")))?;
            if let Some(d) = domain {
                let (spec, support) = resolve_domain(d)?;
                f.domain = spec;
                if support.is_some() {
                    f.effective_support = support;
                }
            }
            f
        }
        (None, Some(src)) => {
            let d = domain.ok_or_else(|| config_err("an expression function needs a 'domain'"))?;
            let (spec, support) = resolve_domain(d)?;
            let mut f = SampleFunction::from_expression(src.clone(), src, spec)
                .map_err(|e| config_err(format!("function expression: {e}")))?;
            f.effective_support = support;
            f
        }
        (Some(_), Some(_)) => return Err(config_err("function needs either 'catalog' or 'expression', not both")),
        (None, None) => return Err(config_err("function needs 'catalog' or 'expression'")),
    };
    f = f.with_breaks(&c.t_breaks, &c.s_breaks);
    for p in &c.known_points {
        f = f.with_known_point(*p);
    }
    Ok(f)
}

fn one_var(src: &str, var: &'static str, what: &str) -> Result<Arc<dyn Fn(f64) -> f64 + Send + Sync>, CliError> {
    let e = Expr::parse(src, &[var]).map_err(|e| config_err(format!("{what}: {e}")))?;
    Ok(Arc::new(move |u| e.eval(&[u]).unwrap_or(f64::NAN)))
}

fn resolve_mu(c: &MuConfig) -> Result<MuPair, CliError> {
    match (&c.rho1, &c.rho2) {
        (None, None) => {
            if c.mu1.is_some() || c.mu2.is_some() {
                return Err(config_err("mu1/mu2 need rho1/rho2"));
            }
            MuPair::identity(c.delta0).map_err(config_err)
        }
        (Some(r1), Some(r2)) => {
            let (r1, r2) = (one_var(r1, "t", "rho1")?, one_var(r2, "s", "rho2")?);
            match (&c.mu1, &c.mu2) {
                (Some(m1), Some(m2)) => {
                    let (m1, m2) = (one_var(m1, "h", "mu1")?, one_var(m2, "k", "mu2")?);
                    MuPair::with_closed_form(r1, r2, m1, m2, c.delta0).map_err(config_err)
                }
                (None, None) => {
                    let (a, b) = (r1.clone(), r2.clone());
                    MuPair::from_density(move |t| a(t), move |s| b(s), c.delta0).map_err(config_err)
                }
                _ => Err(config_err("give both mu1 and mu2 or neither")),
            }
        }
        _ => Err(config_err("give both rho1 and rho2 or neither")),
    }
}

fn lambda_grid(g: &LambdaGrid, set: &IndexSet) -> Result<Vec<f64>, CliError> {
    let approach = match g {
        LambdaGrid::Geometric { start, ratio, count } => LambdaApproach::geometric(*start, *ratio, *count, set),
        LambdaGrid::Explicit(v) => LambdaApproach::new(v.clone(), "explicit", set),
    };
    approach.map(|a| a.grid).map_err(|e| config_err(format!("lambda grid: {e}")))
}

impl ExperimentConfig {
    pub fn resolve(&self) -> Result<Experiment, CliError> {
        let kernel = resolve_kernel(&self.kernel)?;
        let function = resolve_function(&self.function, self.domain.as_ref())?;
        let mu = resolve_mu(&self.mu)?;
        let set = kernel.index_set();
        let target = Target {
            x0: self.target.x0,
            y0: self.target.y0,
            accumulation: set.accumulation,
        };
        let lambdas = match &self.path.lambda {
            Some(g) => Some(lambda_grid(g, &set)?),
            None => None,
        };
        let p = &self.path;
        let mut names: Vec<&str> = vec!["lambda", "x0", "y0"];
        names.extend(p.params.keys().map(String::as_str));
        let mut fixed: Vec<f64> = vec![0.0, target.x0, target.y0];
        fixed.extend(p.params.values());
        let compile = |src: &str, what: &str| -> Result<Expr, CliError> {
            Expr::parse(src, &names).map_err(|e| config_err(format!("path {what}: {e}")))
        };
        let eval = |e: &Expr, l: f64, what: &str| -> Result<f64, CliError> {
            let mut vals = fixed.clone();
            vals[0] = l;
            e.eval(&vals).map_err(|err| config_err(format!("path {what} at lambda = {l}: {err}")))
        };
        let (path, deltas) = match &lambdas {
            Some(ls) => {
                let xe = compile(p.x.as_deref().unwrap_or("x0"), "x")?;
                let ye = compile(p.y.as_deref().unwrap_or("y0"), "y")?;
                let points = ls
                    .iter()
                    .map(|&l| Ok((eval(&xe, l, "x")?, eval(&ye, l, "y")?, l)))
                    .collect::<Result<Vec<_>, CliError>>()?;
                let coupling = format!(
                    "x = {}, y = {}, delta = {}",
                    xe.source(),
                    ye.source(),
                    p.delta.as_deref().unwrap_or("-")
                );
                let path = ApproachPath::new(points, target, coupling, kernel.as_ref()).map_err(config_err)?;
                let deltas = match &p.delta {
                    Some(src) => {
                        let de = compile(src, "delta")?;
                        Some(ls.iter().map(|&l| eval(&de, l, "delta")).collect::<Result<Vec<_>, _>>()?)
                    }
                    None => None,
                };
                (Some(path), deltas)
            }
            None => (None, None),
        };
        let claimed_exponent = match &p.claimed_exponent {
            Some(src) => {
                let e = compile(src, "claimed_exponent")?;
                Some(ClaimedExponent {
                    label: src.clone(),
                    value: eval(&e, f64::NAN, "claimed_exponent")?,
                })
            }
            None => None,
        };
        Ok(Experiment {
            config: self.clone(),
            kernel,
            function,
            mu,
            target,
            lambdas,
            path,
            deltas,
            claimed_exponent,
        })
    }
}

impl Experiment {
    pub fn class_a_options(&self) -> ClassAOptions {
        let t = &self.config.tolerances;
        ClassAOptions {
            tol_rel: t.tol_rel,
            tol_cond: t.tol_cond,
            divergence_ratio: t.divergence_ratio,
            slack: t.slack,
            quad_tol: t.tol,
            ..ClassAOptions::default()
        }
    }

    pub fn validate_settings(&self) -> Result<ValidateSettings, CliError> {
        let grid = self
            .lambdas
            .clone()
            .ok_or_else(|| config_err("validate needs path.lambda"))?;
        let approach = LambdaApproach::new(grid, "path.lambda", &self.kernel.index_set()).map_err(config_err)?;
        let v = &self.config.validate;
        let mut s = ValidateSettings::new(approach);
        s.probes = v.probes.iter().map(|p| (p[0], p[1])).collect();
        s.center = (v.center[0], v.center[1]);
        s.gammas = v.gammas.clone();
        s.f_lambdas = v.f_lambdas.clone();
        s.grid_n = v.grid_n;
        s.options = self.class_a_options();
        Ok(s)
    }

    pub fn lebesgue_options(&self) -> LebesgueOptions {
        LebesgueOptions {
            tol_leb: self.config.tolerances.tol_leb,
            ..LebesgueOptions::default()
        }
    }

    pub fn rate_options(&self) -> RateOptions {
        let t = &self.config.tolerances;
        RateOptions {
            gammas: self.config.path.gammas.clone(),
            ratio_tol: t.ratio_tol,
            tol_cond: t.tol_cond,
            quad_tol: t.tol,
            apply_tol: t.tol,
            exponent_tol: t.exponent_tol,
            claimed_exponent: self.claimed_exponent.clone(),
            ..RateOptions::default()
        }
    }

    pub fn require_path(&self) -> Result<&ApproachPath, CliError> {
        self.path.as_ref().ok_or_else(|| config_err("this command needs path.lambda"))
    }
}
