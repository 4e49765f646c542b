//! Statistical models with a nonincreasing curve `λ` on `[0, 1]`, their data,
//! naive cumulative estimators and Grenander-type estimators.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::processes::RngStream;
use crate::quadrature;
use crate::stepfn::{left_derivative, Interval, Majorizable, StepFunction};

/// Tolerance for numeric inversion of `Λ` and `λ`.
pub const INVERSION_TOL: f64 = 1e-10;

/// Points in the grid on which curve assumptions are checked.
pub const VALIDATION_POINTS: usize = 1000;

/// Parametric strictly decreasing curves on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MonotoneCurve {
    /// `λ(t) = intercept - slope * t`.
    Linear { intercept: f64, slope: f64 },
    /// `λ(t) = scale * exp(-rate * t)`.
    Exponential { scale: f64, rate: f64 },
}

impl MonotoneCurve {
    /// Exponential density on `[0, 1]` with the given rate.
    pub fn truncated_exponential_density(rate: f64) -> Self {
        MonotoneCurve::Exponential {
            scale: rate / (1.0 - (-rate).exp()),
            rate,
        }
    }

    pub fn lambda(&self, t: f64) -> f64 {
        match *self {
            MonotoneCurve::Linear { intercept, slope } => intercept - slope * t,
            MonotoneCurve::Exponential { scale, rate } => scale * (-rate * t).exp(),
        }
    }

    pub fn dlambda(&self, t: f64) -> f64 {
        match *self {
            MonotoneCurve::Linear { slope, .. } => -slope,
            MonotoneCurve::Exponential { scale, rate } => -scale * rate * (-rate * t).exp(),
        }
    }

    /// `Λ(t) = ∫_0^t λ`.
    pub fn big_lambda(&self, t: f64) -> f64 {
        match *self {
            MonotoneCurve::Linear { intercept, slope } => intercept * t - 0.5 * slope * t * t,
            MonotoneCurve::Exponential { scale, rate } => scale * (-(-rate * t).exp_m1()) / rate,
        }
    }

    /// `(inf |λ'|, sup |λ'|)` over `[0, 1]`.
    fn dlambda_range(&self) -> (f64, f64) {
        let a = self.dlambda(0.0).abs();
        let b = self.dlambda(1.0).abs();
        // |λ'| is monotone for both families.
        (a.min(b), a.max(b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// i.i.d. draws from the density `λ` on `[0, 1]`.
    Density,
    /// `y_i = λ(i/n) + σ ε_i` with standard Gaussian errors.
    Regression { sigma: f64 },
}

/// A model: the curve, its primitive, the variance function `L` and
/// certified bounds on the quantities the limit theory depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub curve: MonotoneCurve,
    pub model: ModelKind,
    pub inf_abs_dlambda: f64,
    pub sup_abs_dlambda: f64,
    pub inf_dl: f64,
    pub sup_abs_ddl: f64,
}

impl CurveSpec {
    pub fn lambda(&self, t: f64) -> f64 {
        self.curve.lambda(t)
    }

    pub fn dlambda(&self, t: f64) -> f64 {
        self.curve.dlambda(t)
    }

    pub fn big_lambda(&self, t: f64) -> f64 {
        self.curve.big_lambda(t)
    }

    /// Variance function of the Gaussian approximation.
    pub fn l(&self, t: f64) -> f64 {
        match self.model {
            ModelKind::Density => self.big_lambda(t),
            ModelKind::Regression { sigma } => sigma * sigma * t,
        }
    }

    pub fn dl(&self, t: f64) -> f64 {
        match self.model {
            ModelKind::Density => self.lambda(t),
            ModelKind::Regression { sigma } => sigma * sigma,
        }
    }

    pub fn ddl(&self, t: f64) -> f64 {
        match self.model {
            ModelKind::Density => self.dlambda(t),
            ModelKind::Regression { .. } => 0.0,
        }
    }

    /// Whether the Gaussian approximation is a Brownian bridge (empirical
    /// process) rather than a Brownian motion.
    pub fn bridge(&self) -> bool {
        matches!(self.model, ModelKind::Density)
    }

    pub fn is_density(&self) -> bool {
        matches!(self.model, ModelKind::Density)
    }

    /// Checks the requirements on `L`: increasing with a derivative bounded
    /// away from zero.
    pub fn check_variance_function(&self) -> Result<()> {
        if !(self.inf_dl > 0.0) {
            return Err(Error::Assumption {
                assumption: "A2",
                detail: format!(
                    "L must satisfy inf L'(t) > 0 on [0, 1], got inf L' = {}",
                    self.inf_dl
                ),
            });
        }
        Ok(())
    }

    /// `g = λ^{-1}` on `(λ(1), λ(0))`.
    pub fn inverse_lambda(&self, a: f64) -> Result<f64> {
        let (lo, hi) = (self.lambda(1.0), self.lambda(0.0));
        if !(lo < a && a < hi) {
            return Err(Error::LevelRange { level: a, lo, hi });
        }
        Ok(bisect(|t| self.lambda(t) - a, 0.0, 1.0, INVERSION_TOL, false))
    }

    /// Quantile function `Λ^{-1}(u)` of a density model.
    pub fn quantile(&self, u: f64) -> f64 {
        bisect(|t| self.big_lambda(t) - u, 0.0, 1.0, INVERSION_TOL * 1e-2, true)
    }
}

/// Root of a monotone function on `[lo, hi]` by bisection. `increasing` gives
/// the direction; the result is within `tol` of the root.
fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64, increasing: bool) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let below = if increasing { f(mid) < 0.0 } else { f(mid) > 0.0 };
        if below {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn check_strictly_decreasing(curve: &MonotoneCurve) -> Result<()> {
    let n = VALIDATION_POINTS;
    let mut prev = curve.lambda(0.0);
    for i in 1..=n {
        let v = curve.lambda(i as f64 / n as f64);
        if !(v < prev) {
            return Err(Error::InvalidModel(format!(
                "λ is not strictly decreasing near t = {}",
                i as f64 / n as f64
            )));
        }
        prev = v;
    }
    let (inf_d, _) = curve.dlambda_range();
    if !(inf_d > 0.0) || !inf_d.is_finite() {
        return Err(Error::InvalidModel(
            "A1 requires inf |λ'(t)| > 0 on [0, 1]".into(),
        ));
    }
    Ok(())
}

fn check_params(curve: &MonotoneCurve) -> Result<()> {
    let ok = match *curve {
        MonotoneCurve::Linear { intercept, slope } => intercept.is_finite() && slope.is_finite(),
        MonotoneCurve::Exponential { scale, rate } => {
            scale.is_finite() && rate.is_finite() && scale > 0.0 && rate > 0.0
        }
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("bad curve parameters {curve:?}")))
    }
}

/// Monotone density model on `[0, 1]`: `L = Λ`, bridge approximation.
pub fn density_model(curve: MonotoneCurve) -> Result<CurveSpec> {
    check_params(&curve)?;
    check_strictly_decreasing(&curve)?;
    let n = VALIDATION_POINTS;
    if (0..=n).any(|i| curve.lambda(i as f64 / n as f64) < 0.0) {
        return Err(Error::InvalidModel("a density must be nonnegative".into()));
    }
    let mass = quadrature::integrate(|t| curve.lambda(t), 0.0, 1.0, 1e-12)?.value;
    if (mass - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidModel(format!(
            "density integrates to {mass}, not 1"
        )));
    }
    if (curve.big_lambda(1.0) - mass).abs() > 1e-8 {
        return Err(Error::InvalidModel(
            "closed-form primitive disagrees with quadrature".into(),
        ));
    }
    let (inf_d, sup_d) = curve.dlambda_range();
    Ok(CurveSpec {
        curve,
        model: ModelKind::Density,
        inf_abs_dlambda: inf_d,
        sup_abs_dlambda: sup_d,
        inf_dl: curve.lambda(1.0),
        sup_abs_ddl: sup_d,
    })
}

/// Homoscedastic Gaussian regression on the design `i/n`: `L(t) = σ² t`,
/// Brownian-motion approximation.
pub fn regression_model(curve: MonotoneCurve, sigma: f64) -> Result<CurveSpec> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidModel(format!(
            "noise standard deviation must be positive, got {sigma}"
        )));
    }
    check_params(&curve)?;
    check_strictly_decreasing(&curve)?;
    let (inf_d, sup_d) = curve.dlambda_range();
    Ok(CurveSpec {
        curve,
        model: ModelKind::Regression { sigma },
        inf_abs_dlambda: inf_d,
        sup_abs_dlambda: sup_d,
        inf_dl: sigma * sigma,
        sup_abs_ddl: 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observations {
    /// Draws in `[0, 1]`.
    Density(Vec<f64>),
    /// `(t_i, y_i)` with design points in `(0, 1]`, increasing.
    Regression(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSet {
    pub n: usize,
    pub observations: Observations,
}

impl DataSet {
    pub fn density(draws: Vec<f64>) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::DegenerateInput("no observations".into()));
        }
        if let Some(x) = draws.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidInput(format!("draw {x} outside [0, 1]")));
        }
        Ok(Self {
            n: draws.len(),
            observations: Observations::Density(draws),
        })
    }

    pub fn regression(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::DegenerateInput("no observations".into()));
        }
        if pairs.iter().any(|p| !(p.0 > 0.0 && p.0 <= 1.0) || !p.1.is_finite()) {
            return Err(Error::InvalidInput(
                "design points must lie in (0, 1] with finite responses".into(),
            ));
        }
        if pairs.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(Error::InvalidInput(
                "design points must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            n: pairs.len(),
            observations: Observations::Regression(pairs),
        })
    }

    /// Regression data without noise, `y_i = λ(i/n)`.
    pub fn noiseless_regression(spec: &CurveSpec, n: usize) -> Result<Self> {
        let pairs = (1..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                (t, spec.lambda(t))
            })
            .collect();
        Self::regression(pairs)
    }
}

pub const MIN_SAMPLE_SIZE: usize = 10;

/// Draws a data set of size `n` from the model.
pub fn generate(spec: &CurveSpec, n: usize, stream: RngStream) -> Result<DataSet> {
    if n < MIN_SAMPLE_SIZE {
        return Err(Error::InvalidInput(format!(
            "sample size {n} below the minimum {MIN_SAMPLE_SIZE}"
        )));
    }
    let mut rng = stream.rng();
    match spec.model {
        ModelKind::Density => {
            let draws = (0..n)
                .map(|_| {
                    let u: f64 = rand::Rng::random(&mut rng);
                    spec.quantile(u)
                })
                .collect();
            DataSet::density(draws)
        }
        ModelKind::Regression { sigma } => {
            let pairs = (1..=n)
                .map(|i| {
                    let t = i as f64 / n as f64;
                    let e: f64 = StandardNormal.sample(&mut rng);
                    (t, spec.lambda(t) + sigma * e)
                })
                .collect();
            DataSet::regression(pairs)
        }
    }
}

/// Cadlag cumulative estimator `Λ_n` on `[0, 1]`: the empirical distribution
/// function for density data, `n^{-1} Σ_{t_i <= t} y_i` for regression data.
pub fn naive_estimator(data: &DataSet) -> Result<StepFunction> {
    let n = data.n as f64;
    let mut knots = vec![0.0];
    let mut values = vec![0.0];
    match &data.observations {
        Observations::Density(draws) => {
            let mut xs = draws.clone();
            xs.sort_by(f64::total_cmp);
            let mut count = 0usize;
            for x in xs {
                count += 1;
                let v = count as f64 / n;
                if x == knots[knots.len() - 1] {
                    let last = values.len() - 1;
                    values[last] = v;
                } else {
                    knots.push(x);
                    values.push(v);
                }
            }
        }
        Observations::Regression(pairs) => {
            let mut acc = 0.0;
            for &(t, y) in pairs {
                acc += y;
                knots.push(t);
                values.push(acc / n);
            }
        }
    }
    StepFunction::new(knots, values, Interval::unit())
}

/// Left derivative of the least concave majorant of `Λ_n`.
pub fn grenander(data: &DataSet) -> Result<StepFunction> {
    let lambda_n = naive_estimator(data)?;
    grenander_from(&lambda_n)
}

pub fn grenander_from(lambda_n: &StepFunction) -> Result<StepFunction> {
    let hull = lambda_n.majorant(lambda_n.domain())?;
    left_derivative(&hull)
}

/// Leftmost maximizer of `Λ_n(t) - a t` over `[0, 1]`.
///
/// The supremum of a step function minus a line is attained (or approached
/// from the left) at a knot or at 1, so the search runs over the hull points.
pub fn inverse_process(lambda_n: &StepFunction, a: f64) -> f64 {
    let pts = lambda_n.hull_points(lambda_n.domain());
    let mut best = pts[0];
    let mut best_val = best.1 - a * best.0;
    for &(t, v) in &pts[1..] {
        let val = v - a * t;
        if val > best_val {
            best_val = val;
            best = (t, v);
        }
    }
    best.0
}

/// `V_n(a) = n^{1/3} (U_n(a) - g(a))`.
pub fn v_process(data: &DataSet, spec: &CurveSpec, a: f64) -> Result<f64> {
    let g = spec.inverse_lambda(a)?;
    let lambda_n = naive_estimator(data)?;
    Ok(v_from(&lambda_n, data.n, g, a))
}

pub(crate) fn v_from(lambda_n: &StepFunction, n: usize, g: f64, a: f64) -> f64 {
    (n as f64).cbrt() * (inverse_process(lambda_n, a) - g)
}
