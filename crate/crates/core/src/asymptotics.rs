//! Scaling constants, Monte Carlo moments of the gap process `ζ`, and the
//! asymptotic mean and variance of the `L_p` distance between the cumulative
//! estimator and its majorant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::CurveSpec;
use crate::processes::{drifted_gaps, zeta_gaps, PathGrid, RngStream, ZetaConfig};
use crate::quadrature::{self, Quadrature};
use crate::stats::{covariance_estimate, mean_estimate, variance, Estimate};

/// Target relative error of the spatial integrals.
pub const QUADRATURE_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConstants {
    pub c1: f64,
    pub c2: f64,
}

impl ScalingConstants {
    /// `c1 = (|λ'| / (2 L'^2))^{1/3}`, `c2 = (4 L' / |λ'|^2)^{1/3}`.
    pub fn from_derivatives(abs_dlambda: f64, dl: f64) -> Self {
        Self {
            c1: (abs_dlambda / (2.0 * dl * dl)).cbrt(),
            c2: (4.0 * dl / (abs_dlambda * abs_dlambda)).cbrt(),
        }
    }
}

pub fn scaling_constants(t: f64, spec: &CurveSpec) -> Result<ScalingConstants> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain {
            value: t,
            domain: "(0, 1)".into(),
        });
    }
    Ok(ScalingConstants::from_derivatives(
        spec.dlambda(t).abs(),
        spec.dl(t),
    ))
}

/// Weight `w` of the measure `dμ = w dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weight {
    Constant { value: f64 },
    Linear { intercept: f64, slope: f64 },
}

impl Default for Weight {
    fn default() -> Self {
        Weight::Constant { value: 1.0 }
    }
}

impl Weight {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Weight::Constant { value } => value,
            Weight::Linear { intercept, slope } => intercept + slope * t,
        }
    }

    pub fn scaled(&self, factor: f64) -> Weight {
        match *self {
            Weight::Constant { value } => Weight::Constant {
                value: factor * value,
            },
            Weight::Linear { intercept, slope } => Weight::Linear {
                intercept: factor * intercept,
                slope: factor * slope,
            },
        }
    }

    /// Nonnegative on `[0, 1]` with a bounded derivative.
    pub fn check(&self) -> Result<()> {
        let finite = match *self {
            Weight::Constant { value } => value.is_finite(),
            Weight::Linear { intercept, slope } => intercept.is_finite() && slope.is_finite(),
        };
        if !finite {
            return Err(Error::Assumption {
                assumption: "A3",
                detail: "w must be differentiable with bounded derivative on [0, 1]".into(),
            });
        }
        if self.eval(0.0) < 0.0 || self.eval(1.0) < 0.0 {
            return Err(Error::Assumption {
                assumption: "A3",
                detail: "w(t) >= 0 is required on [0, 1]".into(),
            });
        }
        Ok(())
    }
}

/// `ζ(0)` from `count` independent paths, stream `i` for path `i`.
pub fn zeta_zero_samples(count: usize, cfg: &ZetaConfig, seed: u64) -> Result<Vec<f64>> {
    let grid = cfg.grid()?;
    let origin = grid.origin().expect("symmetric grid contains 0");
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i).rng();
            Ok(zeta_gaps(&grid, cfg.refine_levels, (0.0, 0.0), &mut rng)?[origin])
        })
        .collect()
}

/// `c1 · [D Z_t](0)` with `Z_t(s) = W(L' s) - |λ'| s^2 / 2`.
///
/// The grid of `Z_t` is the image of the `ζ` grid under `s -> c2 s`, so both
/// routes share one discretization in the `ζ` time scale.
pub fn zeta_zero_via_local_process(
    abs_dlambda: f64,
    dl: f64,
    count: usize,
    cfg: &ZetaConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let k = ScalingConstants::from_derivatives(abs_dlambda, dl);
    let base = cfg.grid()?;
    let grid = PathGrid::symmetric(k.c2 * cfg.truncation, k.c2 * cfg.step)?;
    debug_assert_eq!(grid.count(), base.count());
    let origin = grid.origin().expect("symmetric grid contains 0");
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i).rng();
            let gaps = drifted_gaps(&grid, dl, 0.5 * abs_dlambda, cfg.refine_levels, (0.0, 0.0), &mut rng)?;
            Ok(k.c1 * gaps[origin])
        })
        .collect()
}

pub const MIN_MOMENT_REPLICATIONS: usize = 100;

fn check_moment_args(p: f64, replications: usize) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidInput(format!("moment order must be >= 1, got {p}")));
    }
    if replications < MIN_MOMENT_REPLICATIONS {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_MOMENT_REPLICATIONS} replications, got {replications}"
        )));
    }
    Ok(())
}

/// Monte Carlo estimate of `E[ζ(0)^p]`.
pub fn mc_zeta_moment(p: f64, replications: usize, cfg: &ZetaConfig, seed: u64) -> Result<Estimate> {
    check_moment_args(p, replications)?;
    let z = zeta_zero_samples(replications, cfg, seed)?;
    Ok(moment_of(&z, p))
}

pub fn moment_of(samples: &[f64], p: f64) -> Estimate {
    let powered: Vec<f64> = samples.iter().map(|z| z.powf(p)).collect();
    mean_estimate(&powered)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovPoint {
    pub s: f64,
    pub cov: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovCurve {
    pub points: Vec<CovPoint>,
    /// Trapezoid integral of the curve over the s-grid.
    pub integral: Estimate,
    /// Sample variance of `ζ(0)^p`.
    pub variance_at_zero: f64,
}

/// Covariance curve `s -> cov(ζ(0)^p, ζ(s)^p)` on `s_grid` from joint
/// samples along each path, and its trapezoid integral.
///
/// The integral is itself the covariance of `ζ(0)^p` with the trapezoid
/// combination of the `ζ(s)^p`, which gives its standard error.
pub fn mc_zeta_cov(
    p: f64,
    s_grid: &[f64],
    replications: usize,
    cfg: &ZetaConfig,
    seed: u64,
) -> Result<CovCurve> {
    check_moment_args(p, replications)?;
    if s_grid.len() < 2 || s_grid[0] != 0.0 || s_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput(
            "s-grid must start at 0 and increase strictly".into(),
        ));
    }
    cfg.check_margin(s_grid)?;
    let grid = cfg.grid()?;
    let idx: Vec<usize> = s_grid.iter().map(|&s| grid.nearest(s)).collect();
    let trap: Vec<f64> = (0..s_grid.len())
        .map(|k| {
            let left = if k > 0 { s_grid[k] - s_grid[k - 1] } else { 0.0 };
            let right = if k + 1 < s_grid.len() { s_grid[k + 1] - s_grid[k] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..replications as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i).rng();
            let gaps = zeta_gaps(&grid, cfg.refine_levels, (0.0, s_grid[s_grid.len() - 1]), &mut rng)?;
            Ok(idx.iter().map(|&j| gaps[j].powf(p)).collect())
        })
        .collect::<Result<_>>()?;
    let column = |k: usize| -> Vec<f64> { rows.iter().map(|r| r[k]).collect() };
    let x0 = column(0);
    let points = s_grid
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let e = covariance_estimate(&x0, &column(k));
            CovPoint {
                s,
                cov: e.value,
                se: e.se,
            }
        })
        .collect();
    let combined: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().zip(&trap).map(|(y, w)| y * w).sum())
        .collect();
    Ok(CovCurve {
        points,
        integral: covariance_estimate(&x0, &combined),
        variance_at_zero: variance(&x0),
    })
}

/// Reference Monte Carlo settings for the `ζ` functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    pub zeta: ZetaConfig,
    /// Paths for `E[ζ(0)^p]` and the reference distribution of `ζ(0)`.
    pub replications: usize,
    /// Window half-width for the covariance curve; must be at least
    /// `2 * s_max`.
    pub cov_truncation: f64,
    pub cov_replications: usize,
    pub s_max: f64,
    pub s_step: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            zeta: ZetaConfig::default(),
            replications: 100_000,
            cov_truncation: 10.0,
            cov_replications: 100_000,
            s_max: 5.0,
            s_step: 0.1,
        }
    }
}

impl ReferenceConfig {
    pub fn cov_zeta(&self) -> ZetaConfig {
        ZetaConfig {
            truncation: self.cov_truncation,
            ..self.zeta
        }
    }

    pub fn s_grid(&self) -> Vec<f64> {
        let k = (self.s_max / self.s_step).round() as usize;
        (0..=k).map(|i| i as f64 * self.s_step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimates {
    pub p: f64,
    pub mean_zeta0_p: Estimate,
    pub cov_curve: Vec<CovPoint>,
    pub cov_integral: Estimate,
    pub variance_zeta0_p: f64,
    /// Whether the last covariance point is within 3 standard errors of 0.
    pub tail_negligible: bool,
    pub reference: ReferenceConfig,
    pub seed: u64,
}

pub const PURPOSE_MOMENT: u64 = 1;
pub const PURPOSE_COV: u64 = 2;

pub fn moment_estimates(p: f64, reference: &ReferenceConfig, seed: u64) -> Result<MomentEstimates> {
    let mean = mc_zeta_moment(
        p,
        reference.replications,
        &reference.zeta,
        RngStream::fork(seed, PURPOSE_MOMENT),
    )?;
    let curve = mc_zeta_cov(
        p,
        &reference.s_grid(),
        reference.cov_replications,
        &reference.cov_zeta(),
        RngStream::fork(seed, PURPOSE_COV),
    )?;
    let last = curve.points[curve.points.len() - 1];
    Ok(MomentEstimates {
        p,
        mean_zeta0_p: mean,
        tail_negligible: last.cov.abs() <= 3.0 * last.se,
        cov_curve: curve.points,
        cov_integral: curve.integral,
        variance_zeta0_p: curve.variance_at_zero,
        reference: *reference,
        seed,
    })
}

/// `∫_0^1 2^{p/3} L'^{2p/3} / |λ'|^{p/3} w dt`.
pub fn mean_spatial_integral(p: f64, spec: &CurveSpec, w: &Weight) -> Result<Quadrature> {
    quadrature::integrate(
        |t| {
            let dl = spec.dl(t);
            let d = spec.dlambda(t).abs();
            2f64.powf(p / 3.0) * dl.powf(2.0 * p / 3.0) / d.powf(p / 3.0) * w.eval(t)
        },
        0.0,
        1.0,
        QUADRATURE_REL_TOL,
    )
}

/// `∫_0^1 2^{(2p+5)/3} L'^{(4p+1)/3} / |λ'|^{(2p+2)/3} w^2 dt`.
pub fn variance_spatial_integral(p: f64, spec: &CurveSpec, w: &Weight) -> Result<Quadrature> {
    quadrature::integrate(
        |t| {
            let dl = spec.dl(t);
            let d = spec.dlambda(t).abs();
            let wt = w.eval(t);
            2f64.powf((2.0 * p + 5.0) / 3.0) * dl.powf((4.0 * p + 1.0) / 3.0)
                / d.powf((2.0 * p + 2.0) / 3.0)
                * wt
                * wt
        },
        0.0,
        1.0,
        QUADRATURE_REL_TOL,
    )
}

fn check_order(p: f64, moments: &MomentEstimates) -> Result<()> {
    if p != moments.p {
        return Err(Error::InvalidInput(format!(
            "moment estimates are for p = {}, requested p = {p}",
            moments.p
        )));
    }
    Ok(())
}

/// Asymptotic mean `m = E[ζ(0)^p] ∫ ...`, with the Monte Carlo standard error
/// propagated.
pub fn compute_m(p: f64, spec: &CurveSpec, w: &Weight, moments: &MomentEstimates) -> Result<Estimate> {
    check_order(p, moments)?;
    let q = mean_spatial_integral(p, spec, w)?;
    Ok(Estimate {
        value: q.value * moments.mean_zeta0_p.value,
        se: q.value.abs() * moments.mean_zeta0_p.se,
    })
}

/// Asymptotic variance `σ² = ∫ ... w² dt · ∫_0^∞ cov(ζ(0)^p, ζ(s)^p) ds`.
pub fn compute_sigma2(
    p: f64,
    spec: &CurveSpec,
    w: &Weight,
    moments: &MomentEstimates,
) -> Result<Estimate> {
    check_order(p, moments)?;
    let q = variance_spatial_integral(p, spec, w)?;
    Ok(Estimate {
        value: q.value * moments.cov_integral.value,
        se: q.value.abs() * moments.cov_integral.se,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub p: f64,
    pub m: Estimate,
    pub sigma2: Estimate,
    pub mean_integral: f64,
    pub mean_integral_error: f64,
    pub variance_integral: f64,
    pub variance_integral_error: f64,
}

pub fn theorem_constants(
    p: f64,
    spec: &CurveSpec,
    w: &Weight,
    moments: &MomentEstimates,
) -> Result<TheoremConstants> {
    let qm = mean_spatial_integral(p, spec, w)?;
    let qs = variance_spatial_integral(p, spec, w)?;
    Ok(TheoremConstants {
        p,
        m: compute_m(p, spec, w, moments)?,
        sigma2: compute_sigma2(p, spec, w, moments)?,
        mean_integral: qm.value,
        mean_integral_error: qm.error_estimate,
        variance_integral: qs.value,
        variance_integral_error: qs.error_estimate,
    })
}
