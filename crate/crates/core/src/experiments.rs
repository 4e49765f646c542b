//! Monte Carlo experiments on the rescaled gap between a cumulative
//! estimator and its least concave majorant: the local limit process, the
//! central limit theorem for the `L_p` distance (empirical and Brownian
//! versions), localization of the majorant, and tails of the inverse process.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{scaling_constants, zeta_zero_samples, ReferenceConfig, TheoremConstants, Weight};
use crate::error::{Error, Result};
use crate::models::{generate, naive_estimator, v_from, CurveSpec, ModelKind, MonotoneCurve};
use crate::processes::{make_lambda_nw, RngStream};
use crate::quadrature::GaussLegendre;
use crate::stats::{
    ks_one_sample, ks_two_sample, mean, mean_estimate, proportion_se, standard_normal_cdf,
    variance, wilson_interval, Estimate,
};
use crate::stepfn::{GridFunction, Interval, Majorizable, PiecewiseLinear, StepFunction};

/// Stream purposes under the master seed.
pub const PURPOSE_DATA: u64 = 10;
pub const PURPOSE_BROWNIAN: u64 = 11;
pub const PURPOSE_REFERENCE: u64 = 12;

/// Absolute tolerance for equality of two majorants.
pub const MAJORANT_EQUALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
struct Segment {
    x0: f64,
    x1: f64,
    /// Gap at `x0` and its left limit at `x1`.
    g0: f64,
    g1: f64,
}

/// The scaled gap `scale · (CM_{[0,1]} F - F)` of a cumulative function `F`,
/// stored as affine pieces.
#[derive(Debug, Clone)]
pub struct GapProcess {
    segments: Vec<Segment>,
    end: (f64, f64),
    scale: f64,
    hull: PiecewiseLinear,
}

/// Hull values at sorted abscissae lying in the hull's domain.
fn hull_values_at(hull: &PiecewiseLinear, xs: &[f64]) -> Vec<f64> {
    let v = hull.vertices();
    let mut j = 0;
    xs.iter()
        .map(|&x| {
            while j + 1 < v.len() && v[j + 1].0 <= x {
                j += 1;
            }
            if v[j].0 == x || j + 1 == v.len() {
                v[j].1
            } else {
                let (x0, y0) = v[j];
                let (x1, y1) = v[j + 1];
                y0 + (y1 - y0) * ((x - x0) / (x1 - x0))
            }
        })
        .collect()
}

impl GapProcess {
    /// Gap of a cadlag step function on its domain: affine between knots
    /// because the function is constant there and the majorant is linear.
    pub fn of_step(f: &StepFunction, scale: f64) -> Result<Self> {
        let domain = f.domain();
        let hull = f.majorant(domain)?;
        let mut xs: Vec<f64> = f.knots().to_vec();
        let b = domain.hi();
        let has_end_knot = xs[xs.len() - 1] == b;
        if !has_end_knot {
            xs.push(b);
        }
        let h = hull_values_at(&hull, &xs);
        let vals = f.values();
        let segments = (0..xs.len() - 1)
            .map(|i| Segment {
                x0: xs[i],
                x1: xs[i + 1],
                g0: (h[i] - vals[i]).max(0.0),
                g1: (h[i + 1] - vals[i]).max(0.0),
            })
            .collect();
        let end = (b, (h[h.len() - 1] - f.eval(b)).max(0.0));
        Ok(Self {
            segments,
            end,
            scale,
            hull,
        })
    }

    /// Gap of a continuous piecewise-linear function.
    pub fn of_grid(f: &GridFunction, scale: f64) -> Result<Self> {
        let hull = f.majorant(f.domain())?;
        let pts = f.points();
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let h = hull_values_at(&hull, &xs);
        let g: Vec<f64> = h.iter().zip(pts).map(|(h, p)| (h - p.1).max(0.0)).collect();
        let segments = (0..xs.len() - 1)
            .map(|i| Segment {
                x0: xs[i],
                x1: xs[i + 1],
                g0: g[i],
                g1: g[i + 1],
            })
            .collect();
        Ok(Self {
            segments,
            end: (xs[xs.len() - 1], g[g.len() - 1]),
            scale,
            hull,
        })
    }

    pub fn hull(&self) -> &PiecewiseLinear {
        &self.hull
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Scaled gap at `t`, right-continuous.
    pub fn at(&self, t: f64) -> f64 {
        if t >= self.end.0 {
            return self.scale * self.end.1;
        }
        let i = self
            .segments
            .partition_point(|s| s.x0 <= t)
            .saturating_sub(1);
        let s = &self.segments[i];
        let frac = (t - s.x0) / (s.x1 - s.x0);
        self.scale * (s.g0 + (s.g1 - s.g0) * frac)
    }

    /// Scaled gap at every breakpoint and at the right endpoint.
    pub fn at_breakpoints(&self) -> Vec<(f64, f64)> {
        self.segments
            .iter()
            .map(|s| (s.x0, self.scale * s.g0))
            .chain(std::iter::once((self.end.0, self.scale * self.end.1)))
            .collect()
    }

    /// `∫ A(t)^p w(t) dt` over the domain, with a 5-point Gauss-Legendre rule
    /// on every affine piece.
    pub fn lp_integral(&self, p: f64, w: &Weight) -> f64 {
        let rule = GaussLegendre::five();
        let total: f64 = self
            .segments
            .iter()
            .map(|s| {
                if s.g0 == 0.0 && s.g1 == 0.0 {
                    return 0.0;
                }
                rule.integrate(
                    |t| {
                        let frac = (t - s.x0) / (s.x1 - s.x0);
                        let g = (s.g0 + (s.g1 - s.g0) * frac).max(0.0);
                        g.powf(p) * w.eval(t)
                    },
                    s.x0,
                    s.x1,
                )
            })
            .sum();
        self.scale.powf(p) * total
    }
}

/// `A_n = n^{2/3} (Λ̂_n - Λ_n)` at every knot of `Λ_n` and at 1.
pub fn compute_an(lambda_n: &StepFunction, n: usize) -> Result<Vec<(f64, f64)>> {
    Ok(GapProcess::of_step(lambda_n, (n as f64).powf(2.0 / 3.0))?.at_breakpoints())
}

/// `∫_0^1 A_n(t)^p dμ(t)`.
pub fn lp_distance(gap: &GapProcess, p: f64, w: &Weight) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidInput(format!("p must be >= 1, got {p}")));
    }
    Ok(gap.lp_integral(p, w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTag {
    Density,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelTag,
    #[serde(flatten)]
    pub curve: MonotoneCurve,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl ModelConfig {
    pub fn spec(&self) -> Result<CurveSpec> {
        match self.kind {
            ModelTag::Density => crate::models::density_model(self.curve),
            ModelTag::Regression => {
                let sigma = self.sigma.ok_or_else(|| {
                    Error::InvalidModel("regression model needs a noise level sigma".into())
                })?;
                crate::models::regression_model(self.curve, sigma)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSettings {
    pub n: usize,
    pub replications: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Exponent of the strong approximation rate assumed for the model.
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default = "default_s_grid")]
    pub s_grid: Vec<f64>,
    #[serde(default = "default_d_grid")]
    pub d_grid: Vec<f64>,
    /// Level `a` for the inverse process.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(default = "default_x_grid")]
    pub x_grid: Vec<f64>,
}

fn default_p() -> f64 {
    1.0
}
fn default_q() -> f64 {
    12.0
}
fn default_t() -> f64 {
    0.5
}
fn default_s_grid() -> Vec<f64> {
    vec![-1.0, 0.0, 1.0]
}
fn default_d_grid() -> Vec<f64> {
    vec![1.0, 2.0, 3.0, 4.0]
}
fn default_x_grid() -> Vec<f64> {
    vec![0.0, 0.5, 1.0, 1.5, 2.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSettings {
    pub truncation: f64,
    pub step: f64,
    pub replications: usize,
    pub cov_truncation: f64,
    pub cov_replications: usize,
    pub s_max: f64,
    pub s_step: f64,
    #[serde(default = "default_refine_levels")]
    pub refine_levels: u32,
}

fn default_refine_levels() -> u32 {
    crate::processes::DEFAULT_REFINE_LEVELS
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        ReferenceSettings::from(ReferenceConfig::default())
    }
}

impl From<ReferenceConfig> for ReferenceSettings {
    fn from(r: ReferenceConfig) -> Self {
        Self {
            truncation: r.zeta.truncation,
            step: r.zeta.step,
            replications: r.replications,
            cov_truncation: r.cov_truncation,
            cov_replications: r.cov_replications,
            s_max: r.s_max,
            s_step: r.s_step,
            refine_levels: r.zeta.refine_levels,
        }
    }
}

impl From<ReferenceSettings> for ReferenceConfig {
    fn from(r: ReferenceSettings) -> Self {
        Self {
            zeta: crate::processes::ZetaConfig {
                truncation: r.truncation,
                step: r.step,
                refine_levels: r.refine_levels,
            },
            replications: r.replications,
            cov_truncation: r.cov_truncation,
            cov_replications: r.cov_replications,
            s_max: r.s_max,
            s_step: r.s_step,
        }
    }
}

/// Complete experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    pub experiment: ExperimentSettings,
    #[serde(default)]
    pub weight: Weight,
    #[serde(default)]
    pub reference: ReferenceSettings,
}

pub const MIN_EXPERIMENT_N: usize = 50;
pub const MIN_EXPERIMENT_REPLICATIONS: usize = 50;

impl ExperimentConfig {
    /// Checks every model assumption and range constraint; returns the model.
    pub fn validate(&self) -> Result<CurveSpec> {
        if let (ModelTag::Regression, Some(sigma)) = (self.model.kind, self.model.sigma) {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::Assumption {
                    assumption: "A2",
                    detail: format!("L' = sigma^2 must be bounded away from 0, got sigma = {sigma}"),
                });
            }
        }
        let spec = self.model.spec().map_err(|e| match e {
            Error::InvalidModel(detail) => Error::Assumption {
                assumption: "A1",
                detail: format!(
                    "λ must be strictly decreasing and twice continuously differentiable \
                     on [0, 1] with inf |λ'(t)| > 0 ({detail})"
                ),
            },
            other => other,
        })?;
        spec.check_variance_function()?;
        self.weight.check()?;
        let e = &self.experiment;
        let bound = e.q.min(2.0 * e.q - 7.0);
        if !(e.p >= 1.0 && e.p < bound) {
            return Err(Error::Assumption {
                assumption: "1 <= p < min(q, 2q - 7)",
                detail: format!("p = {} and q = {} give the bound {bound}", e.p, e.q),
            });
        }
        if !(e.q > 6.0) {
            return Err(Error::Assumption {
                assumption: "A2",
                detail: format!("the approximation exponent must satisfy q > 6, got q = {}", e.q),
            });
        }
        if e.n < MIN_EXPERIMENT_N {
            return Err(Error::InvalidInput(format!(
                "n = {} is below the minimum {MIN_EXPERIMENT_N}",
                e.n
            )));
        }
        if e.replications < MIN_EXPERIMENT_REPLICATIONS {
            return Err(Error::InvalidInput(format!(
                "replications = {} is below the minimum {MIN_EXPERIMENT_REPLICATIONS}",
                e.replications
            )));
        }
        if !(e.t > 0.0 && e.t < 1.0) {
            return Err(Error::Domain {
                value: e.t,
                domain: "(0, 1)".into(),
            });
        }
        if e.d_grid.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::InvalidInput("d-grid values must be positive".into()));
        }
        if let Some(a) = e.level {
            spec.inverse_lambda(a)?;
        }
        let r = &self.reference;
        if !(r.step > 0.0 && r.step <= 0.01) {
            return Err(Error::InvalidInput(format!(
                "reference step must lie in (0, 0.01], got {}",
                r.step
            )));
        }
        if r.s_max > r.cov_truncation / 2.0 {
            return Err(Error::TruncationMargin {
                point: r.s_max,
                margin: r.cov_truncation / 2.0,
            });
        }
        ReferenceConfig::from(*r).zeta.grid()?;
        ReferenceConfig::from(*r).cov_zeta().grid()?;
        Ok(spec)
    }

    pub fn reference_config(&self) -> ReferenceConfig {
        ReferenceConfig::from(self.reference)
    }

    fn data_stream(&self, i: usize) -> RngStream {
        RngStream::new(RngStream::fork(self.seed, PURPOSE_DATA), i as u64)
    }

    fn brownian_stream(&self, i: usize) -> RngStream {
        RngStream::new(RngStream::fork(self.seed, PURPOSE_BROWNIAN), i as u64)
    }

    pub fn reference_seed(&self) -> u64 {
        RngStream::fork(self.seed, PURPOSE_REFERENCE)
    }
}

/// A named pass/fail criterion evaluated on a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: String,
    pub passed: bool,
}

/// Rounds a threshold to four decimals for display.
fn short(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

impl Check {
    fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: format!("< {}", short(limit)),
            passed: value < limit,
        }
    }

    fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: format!("in [{lo}, {hi}]"),
            passed: lo <= value && value <= hi,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport<R, S> {
    pub experiment: String,
    pub replications: usize,
    pub rows: Vec<R>,
    pub summary: S,
    pub checks: Vec<Check>,
    pub wall_time_secs: f64,
}

impl<R, S> ExperimentReport<R, S> {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn replicate<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

fn empirical_gap(cfg: &ExperimentConfig, spec: &CurveSpec, i: usize) -> Result<GapProcess> {
    let n = cfg.experiment.n;
    let data = generate(spec, n, cfg.data_stream(i))?;
    let lambda_n = naive_estimator(&data)?;
    GapProcess::of_step(&lambda_n, (n as f64).powf(2.0 / 3.0))
}

fn brownian_gap(cfg: &ExperimentConfig, spec: &CurveSpec, i: usize) -> Result<GapProcess> {
    let n = cfg.experiment.n;
    let f = make_lambda_nw(spec, n, cfg.brownian_stream(i))?;
    GapProcess::of_grid(&f, (n as f64).powf(2.0 / 3.0))
}

/// Points `t + c2(t) s n^{-1/3}` for the s-grid; all must lie in `(0, 1)`.
pub fn rescaled_points(cfg: &ExperimentConfig, spec: &CurveSpec) -> Result<Vec<f64>> {
    let e = &cfg.experiment;
    let k = scaling_constants(e.t, spec)?;
    let h = (e.n as f64).powf(-1.0 / 3.0);
    e.s_grid
        .iter()
        .map(|&s| {
            let point = e.t + k.c2 * s * h;
            if point > 0.0 && point < 1.0 {
                Ok(point)
            } else {
                Err(Error::Window { point })
            }
        })
        .collect()
}

/// `ζ_nt(s) = c1(t) A_n(t + c2(t) s n^{-1/3})` for every replication (rows)
/// and every `s` in the s-grid (columns).
pub fn zeta_nt_samples(cfg: &ExperimentConfig, spec: &CurveSpec) -> Result<Vec<Vec<f64>>> {
    let points = rescaled_points(cfg, spec)?;
    let c1 = scaling_constants(cfg.experiment.t, spec)?.c1;
    replicate(cfg.experiment.replications, |i| {
        let gap = empirical_gap(cfg, spec, i)?;
        Ok(points.iter().map(|&x| c1 * gap.at(x)).collect())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaRow {
    pub rep: usize,
    pub zeta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub s: f64,
    pub mean: f64,
    pub ks: f64,
    pub ks_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitProcessSummary {
    pub c1: f64,
    pub c2: f64,
    pub reference_mean: Estimate,
    pub reference_replications: usize,
    pub columns: Vec<ColumnSummary>,
    pub note: String,
}

/// KS limit for the `s = 0` column and for the others.
pub const KS_LIMIT_CENTRE: f64 = 0.05;
pub const KS_LIMIT_OFF_CENTRE: f64 = 0.06;

/// Compares every column of `ζ_nt` with the distribution of `ζ(0)`, which
/// by stationarity is also that of `ζ(s)`.
pub fn limit_process_experiment(
    cfg: &ExperimentConfig,
    spec: &CurveSpec,
) -> Result<ExperimentReport<ZetaRow, LimitProcessSummary>> {
    let start = Instant::now();
    let samples = zeta_nt_samples(cfg, spec)?;
    let r = cfg.reference_config();
    let reference = zeta_zero_samples(r.replications, &r.zeta, cfg.reference_seed())?;
    let k = scaling_constants(cfg.experiment.t, spec)?;
    let mut columns = Vec::new();
    let mut checks = Vec::new();
    for (j, &s) in cfg.experiment.s_grid.iter().enumerate() {
        let col: Vec<f64> = samples.iter().map(|row| row[j]).collect();
        let ks = ks_two_sample(&col, &reference);
        let limit = if s == 0.0 { KS_LIMIT_CENTRE } else { KS_LIMIT_OFF_CENTRE };
        checks.push(Check::below(format!("ks(s={s})"), ks, limit));
        columns.push(ColumnSummary {
            s,
            mean: mean(&col),
            ks,
            ks_limit: limit,
        });
    }
    let rows = samples
        .into_iter()
        .enumerate()
        .map(|(rep, zeta)| ZetaRow { rep, zeta })
        .collect();
    Ok(ExperimentReport {
        experiment: "limit-process".into(),
        replications: cfg.experiment.replications,
        rows,
        summary: LimitProcessSummary {
            c1: k.c1,
            c2: k.c2,
            reference_mean: mean_estimate(&reference),
            reference_replications: r.replications,
            columns,
            note: "finite-dimensional marginals only; tightness is not tested".into(),
        },
        checks,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltRow {
    pub rep: usize,
    pub lp: f64,
    pub t_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltSummary {
    pub m: Estimate,
    pub sigma2: Estimate,
    pub mean: f64,
    pub variance: f64,
    pub variance_ratio: f64,
    pub mean_limit: f64,
    pub ks_normal: f64,
    pub q_assumed: f64,
}

pub const CLT_MEAN_BIAS_ALLOWANCE: f64 = 0.1;
pub const CLT_VARIANCE_RATIO: (f64, f64) = (0.7, 1.3);
pub const CLT_KS_LIMIT: f64 = 0.08;

/// Replicates `T_n = n^{1/6} (∫ A_n^p dμ - m)`.
pub fn clt_experiment(
    cfg: &ExperimentConfig,
    spec: &CurveSpec,
    constants: &TheoremConstants,
) -> Result<ExperimentReport<CltRow, CltSummary>> {
    let start = Instant::now();
    let e = &cfg.experiment;
    if constants.p != e.p {
        return Err(Error::InvalidInput(format!(
            "constants are for p = {}, experiment uses p = {}",
            constants.p, e.p
        )));
    }
    let root = (e.n as f64).powf(1.0 / 6.0);
    let m = constants.m.value;
    let rows = replicate(e.replications, |i| {
        let gap = empirical_gap(cfg, spec, i)?;
        let lp = lp_distance(&gap, e.p, &cfg.weight)?;
        Ok(CltRow {
            rep: i,
            lp,
            t_n: root * (lp - m),
        })
    })?;
    let t: Vec<f64> = rows.iter().map(|r| r.t_n).collect();
    let sigma2 = constants.sigma2.value;
    let sigma = sigma2.sqrt();
    let mu = mean(&t);
    let var = variance(&t);
    let mean_limit = 3.0 * (sigma2 / e.replications as f64).sqrt() + CLT_MEAN_BIAS_ALLOWANCE * sigma;
    let standardized: Vec<f64> = t.iter().map(|x| x / sigma).collect();
    let ks = ks_one_sample(&standardized, standard_normal_cdf);
    let ratio = var / sigma2;
    let checks = vec![
        Check::below("|mean(T_n)|", mu.abs(), mean_limit),
        Check::within("var(T_n)/sigma2", ratio, CLT_VARIANCE_RATIO.0, CLT_VARIANCE_RATIO.1),
        Check::below("ks(T_n/sigma, N(0,1))", ks, CLT_KS_LIMIT),
    ];
    Ok(ExperimentReport {
        experiment: "clt".into(),
        replications: e.replications,
        rows,
        summary: CltSummary {
            m: constants.m,
            sigma2: constants.sigma2,
            mean: mu,
            variance: var,
            variance_ratio: ratio,
            mean_limit,
            ks_normal: ks,
            q_assumed: e.q,
        },
        checks,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrownianSummary {
    pub sigma2: Estimate,
    pub mean_lp: f64,
    pub variance: f64,
    pub variance_ratio: f64,
    /// Two-sample KS between the Brownian and empirical statistics, each
    /// centred at its own sample mean. Diagnostic only.
    pub ks_vs_empirical: Option<f64>,
}

pub const BROWNIAN_VARIANCE_RATIO: (f64, f64) = (0.75, 1.25);

/// Replicates `n^{1/6} ∫ A_n^W(t)^p dμ(t)` for the Brownian version and
/// centres it at the sample mean.
///
/// `empirical_lp`, when given, holds `∫ A_n^p dμ` from the empirical version
/// for a distributional comparison.
pub fn brownian_clt_experiment(
    cfg: &ExperimentConfig,
    spec: &CurveSpec,
    constants: &TheoremConstants,
    empirical_lp: Option<&[f64]>,
) -> Result<ExperimentReport<CltRow, BrownianSummary>> {
    let start = Instant::now();
    let e = &cfg.experiment;
    let root = (e.n as f64).powf(1.0 / 6.0);
    let lps = replicate(e.replications, |i| {
        let gap = brownian_gap(cfg, spec, i)?;
        lp_distance(&gap, e.p, &cfg.weight)
    })?;
    let centre = mean(&lps);
    let rows: Vec<CltRow> = lps
        .iter()
        .enumerate()
        .map(|(rep, &lp)| CltRow {
            rep,
            lp,
            t_n: root * (lp - centre),
        })
        .collect();
    let t: Vec<f64> = rows.iter().map(|r| r.t_n).collect();
    let var = variance(&t);
    let sigma2 = constants.sigma2.value;
    let ratio = var / sigma2;
    let ks_vs_empirical = empirical_lp.map(|emp| {
        let c = mean(emp);
        let te: Vec<f64> = emp.iter().map(|x| root * (x - c)).collect();
        ks_two_sample(&t, &te)
    });
    let checks = vec![Check::within(
        "var(T_n^W)/sigma2",
        ratio,
        BROWNIAN_VARIANCE_RATIO.0,
        BROWNIAN_VARIANCE_RATIO.1,
    )];
    Ok(ExperimentReport {
        experiment: "clt-brownian".into(),
        replications: e.replications,
        rows,
        summary: BrownianSummary {
            sigma2: constants.sigma2,
            mean_lp: centre,
            variance: var,
            variance_ratio: ratio,
            ks_vs_empirical,
        },
        checks,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// `I_nt(d) = [0, 1] ∩ [t - d n^{-1/3}, t + d n^{-1/3}]`.
pub fn local_interval(t: f64, d: f64, n: usize) -> Result<Interval> {
    let h = d * (n as f64).powf(-1.0 / 3.0);
    Interval::unit()
        .intersect(&Interval::new(t - h, t + h)?)
        .ok_or_else(|| Error::InvalidInput(format!("empty local interval around {t}")))
}

/// Whether the majorants over `[0, 1]` and over `I_nt(d)` coincide on
/// `I_nt(d/2)`. Both are piecewise linear with breakpoints among the
/// function's breakpoints, so comparing there and at the ends suffices.
pub fn majorants_agree<F: Majorizable>(f: &F, whole: &PiecewiseLinear, t: f64, d: f64, n: usize) -> Result<bool> {
    let outer = local_interval(t, d, n)?;
    let inner = local_interval(t, d / 2.0, n)?;
    let local = f.majorant(outer)?;
    let pts = f.hull_points(inner);
    Ok(pts
        .iter()
        .all(|&(x, _)| (whole.eval(x) - local.eval(x)).abs() <= MAJORANT_EQUALITY_TOL))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRow {
    pub rep: usize,
    /// Per d: whether the event fails for the empirical version.
    pub complement_e: Vec<bool>,
    /// Per d: whether the event fails for the Brownian version.
    pub complement_w: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationLevel {
    pub d: f64,
    pub frequency_e: Estimate,
    pub frequency_w: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSummary {
    pub t: f64,
    pub levels: Vec<LocalizationLevel>,
}

pub const LOCALIZATION_LARGE_D_LIMIT: f64 = 0.05;

fn frequency(flags: impl Iterator<Item = bool>, total: usize) -> Estimate {
    let p = flags.filter(|&b| b).count() as f64 / total as f64;
    Estimate {
        value: p,
        se: proportion_se(p, total),
    }
}

fn localization_checks(label: &str, levels: &[(f64, Estimate)]) -> Vec<Check> {
    let mut checks = Vec::new();
    for w in levels.windows(2) {
        let (d0, a) = w[0];
        let (d1, b) = w[1];
        let slack = 2.0 * a.se.hypot(b.se);
        checks.push(Check {
            name: format!("{label}: freq(d={d1}) <= freq(d={d0}) + 2 se"),
            value: b.value - a.value,
            threshold: format!("<= {}", short(slack)),
            passed: b.value - a.value <= slack,
        });
    }
    if let (Some(&(d_first, first)), Some(&(d_last, last))) = (levels.first(), levels.last()) {
        checks.push(Check::below(
            format!("{label}: freq(d={d_last})"),
            last.value,
            LOCALIZATION_LARGE_D_LIMIT,
        ));
        let combined = first.se.hypot(last.se);
        let diff = first.value - last.value;
        checks.push(Check {
            name: format!("{label}: freq(d={d_first}) - freq(d={d_last}) in combined se"),
            value: diff / combined,
            threshold: "> 3".into(),
            passed: diff > 3.0 * combined,
        });
    }
    checks
}

/// Frequencies of the complement of the localization event for the
/// empirical and the Brownian version.
pub fn localization_probe(
    cfg: &ExperimentConfig,
    spec: &CurveSpec,
) -> Result<ExperimentReport<LocalizationRow, LocalizationSummary>> {
    let start = Instant::now();
    let e = &cfg.experiment;
    let rows = replicate(e.replications, |i| {
        let data = generate(spec, e.n, cfg.data_stream(i))?;
        let lambda_n = naive_estimator(&data)?;
        let whole_e = lambda_n.majorant(Interval::unit())?;
        let lambda_w = make_lambda_nw(spec, e.n, cfg.brownian_stream(i))?;
        let whole_w = lambda_w.majorant(Interval::unit())?;
        let mut complement_e = Vec::with_capacity(e.d_grid.len());
        let mut complement_w = Vec::with_capacity(e.d_grid.len());
        for &d in &e.d_grid {
            complement_e.push(!majorants_agree(&lambda_n, &whole_e, e.t, d, e.n)?);
            complement_w.push(!majorants_agree(&lambda_w, &whole_w, e.t, d, e.n)?);
        }
        Ok(LocalizationRow {
            rep: i,
            complement_e,
            complement_w,
        })
    })?;
    let levels: Vec<LocalizationLevel> = e
        .d_grid
        .iter()
        .enumerate()
        .map(|(k, &d)| LocalizationLevel {
            d,
            frequency_e: frequency(rows.iter().map(|r| r.complement_e[k]), rows.len()),
            frequency_w: frequency(rows.iter().map(|r| r.complement_w[k]), rows.len()),
        })
        .collect();
    let mut checks = localization_checks(
        "E",
        &levels.iter().map(|l| (l.d, l.frequency_e)).collect::<Vec<_>>(),
    );
    checks.extend(localization_checks(
        "W",
        &levels.iter().map(|l| (l.d, l.frequency_w)).collect::<Vec<_>>(),
    ));
    Ok(ExperimentReport {
        experiment: "localization".into(),
        replications: e.replications,
        rows,
        summary: LocalizationSummary { t: e.t, levels },
        checks,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub rep: usize,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailLevel {
    pub x: f64,
    pub exceedances: usize,
    pub probability: f64,
    pub wilson_95: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSummary {
    pub level: f64,
    pub g: f64,
    pub tails: Vec<TailLevel>,
}

/// Tail probabilities `P(V_n(a) > x)` over the x-grid with 95% Wilson
/// intervals.
pub fn tail_probe(
    cfg: &ExperimentConfig,
    spec: &CurveSpec,
) -> Result<ExperimentReport<TailRow, TailSummary>> {
    let start = Instant::now();
    let e = &cfg.experiment;
    let a = e.level.unwrap_or_else(|| spec.lambda(e.t));
    let g = spec.inverse_lambda(a)?;
    let rows = replicate(e.replications, |i| {
        let data = generate(spec, e.n, cfg.data_stream(i))?;
        let lambda_n = naive_estimator(&data)?;
        Ok(TailRow {
            rep: i,
            v: v_from(&lambda_n, e.n, g, a),
        })
    })?;
    let mut xs = e.x_grid.clone();
    xs.sort_by(f64::total_cmp);
    let r = rows.len();
    let tails: Vec<TailLevel> = xs
        .iter()
        .map(|&x| {
            let count = rows.iter().filter(|row| row.v > x).count();
            TailLevel {
                x,
                exceedances: count,
                probability: count as f64 / r as f64,
                wilson_95: wilson_interval(count, r, 1.96),
            }
        })
        .collect();
    let checks = tail_checks(&tails, r);
    Ok(ExperimentReport {
        experiment: "tails".into(),
        replications: e.replications,
        rows,
        summary: TailSummary { level: a, g, tails },
        checks,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Log-tail decrement check at `x = 1, 1.5, 2` when those points are on the
/// grid, plus monotonicity of the tail.
pub fn tail_checks(tails: &[TailLevel], replications: usize) -> Vec<Check> {
    let monotone = tails
        .windows(2)
        .all(|w| w[1].exceedances <= w[0].exceedances);
    let mut checks = vec![Check {
        name: "tail nonincreasing in x".into(),
        value: if monotone { 1.0 } else { 0.0 },
        threshold: "exact".into(),
        passed: monotone,
    }];
    let find = |x: f64| tails.iter().find(|t| t.x == x).map(|t| t.probability);
    if let (Some(p1), Some(p15), Some(p2)) = (find(1.0), find(1.5), find(2.0)) {
        let log_se = |p: f64| ((1.0 - p) / (replications as f64 * p)).sqrt();
        let (passed, value, slack) = if p2 == 0.0 || p15 == 0.0 {
            (true, f64::INFINITY, 0.0)
        } else {
            let first = p1.ln() - p15.ln();
            let second = p15.ln() - p2.ln();
            let se = (log_se(p1).powi(2) + 4.0 * log_se(p15).powi(2) + log_se(p2).powi(2)).sqrt();
            (second - first >= -2.0 * se, second - first, 2.0 * se)
        };
        checks.push(Check {
            name: "log-tail decrements increase over x = 1, 1.5, 2".into(),
            value,
            threshold: format!(">= -{}", short(slack)),
            passed,
        });
    }
    checks
}

/// Model kind label for reports.
pub fn model_label(spec: &CurveSpec) -> &'static str {
    match spec.model {
        ModelKind::Density => "density",
        ModelKind::Regression { .. } => "regression",
    }
}
