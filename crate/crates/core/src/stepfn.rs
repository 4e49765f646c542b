//! Step functions, piecewise-linear concave functions and least concave
//! majorants.
//!
//! The majorant of a finite point set is its upper convex hull. For a cadlag
//! step function on an interval the majorant is determined by the values at
//! the knots, the left limits at the knots and the value at the right
//! endpoint, so every hull here is built from a finite point set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidInput(format!(
                "interval requires finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Intersection, or `None` if it is empty or a single point.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(Interval { lo, hi })
    }
}

/// Which side a step function is continuous from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Continuity {
    /// `values[i]` holds on `[knots[i], knots[i+1])` (cadlag).
    Right,
    /// `values[i]` holds on `(knots[i], knots[i+1]]`; `values[0]` also at the
    /// left endpoint.
    Left,
}

/// Piecewise-constant function on a closed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
    domain: Interval,
    continuity: Continuity,
}

impl StepFunction {
    /// Cadlag step function. `knots[0]` must equal `domain.lo()`.
    pub fn new(knots: Vec<f64>, values: Vec<f64>, domain: Interval) -> Result<Self> {
        Self::with_continuity(knots, values, domain, Continuity::Right)
    }

    pub fn with_continuity(
        knots: Vec<f64>,
        values: Vec<f64>,
        domain: Interval,
        continuity: Continuity,
    ) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::DegenerateInput("step function without knots".into()));
        }
        if knots.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots[0] != domain.lo() {
            return Err(Error::InvalidInput(format!(
                "first knot {} differs from the domain start {}",
                knots[0],
                domain.lo()
            )));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput("knots must be strictly increasing".into()));
        }
        if knots[knots.len() - 1] > domain.hi() {
            return Err(Error::InvalidInput("knot beyond the domain end".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite step value".into()));
        }
        Ok(Self {
            knots,
            values,
            domain,
            continuity,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    /// Index of the piece containing `t`. Points left of the domain map to
    /// the first piece.
    fn piece(&self, t: f64) -> usize {
        match self.continuity {
            // last knot <= t
            Continuity::Right => self.knots.partition_point(|&k| k <= t).saturating_sub(1),
            // last knot < t
            Continuity::Left => self.knots.partition_point(|&k| k < t).saturating_sub(1),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.values[self.piece(t)]
    }

    /// Limit from the left at `t`; at the domain start this is the value there.
    pub fn left_limit(&self, t: f64) -> f64 {
        let i = self.knots.partition_point(|&k| k < t).saturating_sub(1);
        self.values[i]
    }

    /// Limit from the right at `t`.
    pub fn right_limit(&self, t: f64) -> f64 {
        let i = self.knots.partition_point(|&k| k <= t).saturating_sub(1);
        self.values[i]
    }

    /// Nonincreasing on the whole domain.
    pub fn is_nonincreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }

    /// Adds `slope * t + intercept`. The result is no longer piecewise
    /// constant, so it is returned as hull input points over `interval`.
    pub fn hull_points_with_linear(
        &self,
        interval: Interval,
        slope: f64,
        intercept: f64,
    ) -> Vec<(f64, f64)> {
        let lin = |t: f64| slope * t + intercept;
        // Sup of a step plus an increasing (decreasing) line on a piece is
        // approached at its right (left) end.
        let mut pts: Vec<(f64, f64)> = Vec::new();
        let lo = interval.lo();
        let hi = interval.hi();
        pts.push((lo, self.eval(lo).max(self.right_limit(lo)) + lin(lo)));
        for &k in self.knots.iter().filter(|&&k| lo < k && k < hi) {
            let left = self.left_limit(k) + lin(k);
            let right = self.right_limit(k) + lin(k);
            pts.push((k, left.max(right)));
        }
        let end = self.left_limit(hi).max(self.eval_at_end(hi)) + lin(hi);
        pts.push((hi, end));
        pts
    }

    fn eval_at_end(&self, t: f64) -> f64 {
        match self.continuity {
            Continuity::Right => self.right_limit(t),
            Continuity::Left => self.left_limit(t),
        }
    }
}

/// Concave piecewise-linear function given by its vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    vertices: Vec<(f64, f64)>,
    domain: Interval,
}

impl PiecewiseLinear {
    /// Validates strictly increasing abscissae, endpoint coverage and
    /// nonincreasing slopes.
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self> {
        let pl = Self::from_vertices_unchecked(vertices)?;
        let slopes = pl.slopes();
        if slopes.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidInput("slopes are not nonincreasing".into()));
        }
        Ok(pl)
    }

    /// Checks only the abscissae, not concavity.
    pub(crate) fn from_vertices_unchecked(vertices: Vec<(f64, f64)>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::DegenerateInput(format!(
                "need at least 2 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.windows(2).any(|w| !(w[0].0 < w[1].0)) {
            return Err(Error::InvalidInput(
                "vertex abscissae must be strictly increasing".into(),
            ));
        }
        let domain = Interval::new(vertices[0].0, vertices[vertices.len() - 1].0)?;
        Ok(Self { vertices, domain })
    }

    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.vertices
            .windows(2)
            .map(|w| segment_slope(w[0], w[1]))
            .collect()
    }

    /// Linear interpolation; exact at vertices, constant extension outside
    /// the domain.
    pub fn eval(&self, t: f64) -> f64 {
        let v = &self.vertices;
        let j = v.partition_point(|p| p.0 < t);
        if j < v.len() && v[j].0 == t {
            return v[j].1;
        }
        if j == 0 {
            return v[0].1;
        }
        if j == v.len() {
            return v[v.len() - 1].1;
        }
        let (x0, y0) = v[j - 1];
        let (x1, y1) = v[j];
        y0 + (y1 - y0) * ((t - x0) / (x1 - x0))
    }
}

fn segment_slope(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.1 - a.1) / (b.0 - a.0)
}

fn check_points(points: &[(f64, f64)]) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !(p.0.is_finite() && p.1.is_finite())) {
        return Err(Error::InvalidInput("non-finite point".into()));
    }
    if points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return Err(Error::InvalidInput(
            "abscissae must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Least concave majorant of a sorted point set on `interval`.
///
/// The first and last abscissae must be the interval endpoints. Uses one
/// pass of a monotone stack; collinear and reflex points are dropped, so the
/// computed slopes of the result are strictly decreasing.
pub fn lcm(points: &[(f64, f64)], interval: Interval) -> Result<PiecewiseLinear> {
    check_points(points)?;
    let first = points[0].0;
    let last = points[points.len() - 1].0;
    if first != interval.lo() || last != interval.hi() {
        return Err(Error::InvalidInput(format!(
            "points span [{first}, {last}] but the interval is [{}, {}]",
            interval.lo(),
            interval.hi()
        )));
    }
    Ok(PiecewiseLinear {
        vertices: upper_hull(points),
        domain: interval,
    })
}

pub(crate) fn upper_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len().min(64));
    for &p in points {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            if segment_slope(a, b) <= segment_slope(b, p) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// `CM_I h - h` at every input abscissa. Vertices give exactly zero; other
/// entries are clamped at zero against rounding in the interpolation.
pub fn gap(points: &[(f64, f64)], interval: Interval) -> Result<Vec<f64>> {
    let hull = lcm(points, interval)?;
    Ok(gap_against(&hull, points))
}

pub(crate) fn gap_against(hull: &PiecewiseLinear, points: &[(f64, f64)]) -> Vec<f64> {
    // Both sequences are sorted, so walk them together.
    let v = hull.vertices();
    let mut j = 0;
    points
        .iter()
        .map(|&(x, y)| {
            while j + 1 < v.len() && v[j + 1].0 <= x {
                j += 1;
            }
            let h = if v[j].0 == x {
                v[j].1
            } else {
                let (x0, y0) = v[j];
                let (x1, y1) = v[(j + 1).min(v.len() - 1)];
                y0 + (y1 - y0) * ((x - x0) / (x1 - x0))
            };
            (h - y).max(0.0)
        })
        .collect()
}

/// Left derivative of a piecewise-linear function: the slope of segment `i`
/// on `(v_i, v_{i+1}]`, and the first slope at the left endpoint.
pub fn left_derivative(pl: &PiecewiseLinear) -> Result<StepFunction> {
    let v = pl.vertices();
    if v.len() < 2 {
        return Err(Error::DegenerateInput("single vertex".into()));
    }
    let knots: Vec<f64> = v[..v.len() - 1].iter().map(|p| p.0).collect();
    StepFunction::with_continuity(knots, pl.slopes(), pl.domain(), Continuity::Left)
}

/// Largest point set the exhaustive oracle accepts.
pub const ORACLE_MAX_POINTS: usize = 16;

/// Least concave majorant by exhaustive search: every line through two input
/// points that lies above all points is a supporting line, and the majorant
/// is their pointwise minimum. Cubic time; test use only.
///
/// The result carries one vertex per input abscissa.
pub fn lcm_bruteforce_oracle(points: &[(f64, f64)]) -> Result<PiecewiseLinear> {
    if points.len() > ORACLE_MAX_POINTS {
        return Err(Error::SizeLimit {
            limit: ORACLE_MAX_POINTS,
            got: points.len(),
        });
    }
    check_points(points)?;
    let scale = points.iter().fold(1.0_f64, |m, p| m.max(p.1.abs()));
    let slack = 1e-13 * scale;
    let mut lines: Vec<((f64, f64), (f64, f64))> = Vec::new();
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let (a, b) = (points[i], points[j]);
            let on_line = |x: f64| a.1 + (b.1 - a.1) * ((x - a.0) / (b.0 - a.0));
            if points.iter().all(|p| on_line(p.0) >= p.1 - slack) {
                lines.push((a, b));
            }
        }
    }
    let vertices = points
        .iter()
        .map(|&(x, y)| {
            let h = lines
                .iter()
                .map(|&(a, b)| {
                    if x == a.0 {
                        a.1
                    } else if x == b.0 {
                        b.1
                    } else {
                        a.1 + (b.1 - a.1) * ((x - a.0) / (b.0 - a.0))
                    }
                })
                .fold(f64::INFINITY, f64::min);
            (x, h.max(y))
        })
        .collect();
    PiecewiseLinear::from_vertices_unchecked(vertices)
}

/// Something whose least concave majorant can be taken over a subinterval.
pub trait Majorizable {
    fn domain(&self) -> Interval;

    /// Value at `t` in the function's own continuity convention.
    fn value(&self, t: f64) -> f64;

    /// Finite point set whose upper hull equals the majorant of the function
    /// restricted to `interval`.
    fn hull_points(&self, interval: Interval) -> Vec<(f64, f64)>;

    fn majorant(&self, interval: Interval) -> Result<PiecewiseLinear> {
        let pts = self.hull_points(interval);
        lcm(&pts, interval)
    }
}

impl Majorizable for StepFunction {
    fn domain(&self) -> Interval {
        self.domain
    }

    fn value(&self, t: f64) -> f64 {
        self.eval(t)
    }

    fn hull_points(&self, interval: Interval) -> Vec<(f64, f64)> {
        self.hull_points_with_linear(interval, 0.0, 0.0)
    }
}

/// Continuous function given by values on sorted abscissae and linear
/// interpolation in between.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    points: Vec<(f64, f64)>,
    domain: Interval,
}

impl GridFunction {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        check_points(&points)?;
        let domain = Interval::new(points[0].0, points[points.len() - 1].0)?;
        Ok(Self { points, domain })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, t: f64) -> f64 {
        let p = &self.points;
        let j = p.partition_point(|q| q.0 < t);
        if j < p.len() && p[j].0 == t {
            return p[j].1;
        }
        if j == 0 {
            return p[0].1;
        }
        if j == p.len() {
            return p[p.len() - 1].1;
        }
        let (x0, y0) = p[j - 1];
        let (x1, y1) = p[j];
        y0 + (y1 - y0) * ((t - x0) / (x1 - x0))
    }
}

impl Majorizable for GridFunction {
    fn domain(&self) -> Interval {
        self.domain
    }

    fn value(&self, t: f64) -> f64 {
        self.eval(t)
    }

    fn hull_points(&self, interval: Interval) -> Vec<(f64, f64)> {
        let lo = interval.lo();
        let hi = interval.hi();
        let mut pts = vec![(lo, self.eval(lo))];
        pts.extend(self.points.iter().copied().filter(|p| lo < p.0 && p.0 < hi));
        pts.push((hi, self.eval(hi)));
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOUR: [(f64, f64); 4] = [(0.0, 0.0), (1.0, 1.0), (2.0, 1.0), (3.0, 3.0)];

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn four_point_hull() {
        let h = lcm(&FOUR, iv(0.0, 3.0)).unwrap();
        assert_eq!(h.vertices(), &[(0.0, 0.0), (3.0, 3.0)]);
        assert_eq!(h.eval(2.0), 2.0);
        assert_eq!(gap(&FOUR, iv(0.0, 3.0)).unwrap(), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn concave_input_is_its_own_hull() {
        let pts = [(0.0, 0.0), (1.0, 1.0), (2.0, 1.5)];
        let h = lcm(&pts, iv(0.0, 2.0)).unwrap();
        assert_eq!(h.vertices(), &pts);
        assert!(gap(&pts, iv(0.0, 2.0)).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn two_points() {
        let pts = [(0.0, 0.0), (1.0, 2.0)];
        assert_eq!(lcm(&pts, iv(0.0, 1.0)).unwrap().vertices(), &pts);
        assert_eq!(lcm_bruteforce_oracle(&pts).unwrap().vertices(), &pts);
    }

    #[test]
    fn collinear_points_are_dropped() {
        let pts = [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 2.5)];
        let h = lcm(&pts, iv(0.0, 3.0)).unwrap();
        assert_eq!(h.vertices(), &[(0.0, 0.0), (2.0, 2.0), (3.0, 2.5)]);
    }

    #[test]
    fn gap_invariant_under_linear_addition() {
        let tilted: Vec<_> = FOUR.iter().map(|&(x, y)| (x, y - 0.7 * x + 4.0)).collect();
        let a = gap(&tilted, iv(0.0, 3.0)).unwrap();
        let b = gap(&FOUR, iv(0.0, 3.0)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn lcm_errors() {
        assert!(matches!(
            lcm(&[(0.0, 1.0)], iv(0.0, 1.0)),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            lcm(&[(0.0, 0.0), (2.0, 1.0), (1.0, 0.0)], iv(0.0, 1.0)),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            lcm(&[(0.0, 0.0), (0.5, 1.0)], iv(0.0, 1.0)),
            Err(Error::InvalidInput(_))
        ));
        let many: Vec<_> = (0..17).map(|i| (i as f64, 0.0)).collect();
        assert!(matches!(
            lcm_bruteforce_oracle(&many),
            Err(Error::SizeLimit { limit: 16, got: 17 })
        ));
    }

    #[test]
    fn left_derivative_slopes() {
        let pl = PiecewiseLinear::new(vec![(0.0, 0.0), (0.5, 0.8), (1.0, 1.0)]).unwrap();
        let d = left_derivative(&pl).unwrap();
        assert_eq!(d.continuity(), Continuity::Left);
        assert!((d.eval(0.25) - 1.6).abs() < 1e-12);
        assert!((d.eval(0.5) - 1.6).abs() < 1e-12);
        assert!((d.eval(0.5000001) - 0.4).abs() < 1e-12);
        assert!((d.eval(1.0) - 0.4).abs() < 1e-12);
        assert!(d.is_nonincreasing());

        let single = PiecewiseLinear::new(vec![(0.0, 0.0), (1.0, 2.0)]).unwrap();
        let d = left_derivative(&single).unwrap();
        assert_eq!(d.values(), &[2.0]);
    }

    #[test]
    fn cadlag_evaluation() {
        let f = StepFunction::new(vec![0.0, 0.5], vec![0.0, 0.5], Interval::unit()).unwrap();
        assert_eq!(f.eval(0.49), 0.0);
        assert_eq!(f.eval(0.5), 0.5);
        assert_eq!(f.left_limit(0.5), 0.0);
        assert_eq!(f.eval(1.0), 0.5);
    }

    #[test]
    fn step_function_rejects_bad_knots() {
        let d = Interval::unit();
        assert!(StepFunction::new(vec![0.1], vec![0.0], d).is_err());
        assert!(StepFunction::new(vec![0.0, 0.5, 0.5], vec![0.0; 3], d).is_err());
        assert!(StepFunction::new(vec![0.0, 0.5], vec![0.0], d).is_err());
    }

    #[test]
    fn downward_jump_keeps_left_limit_in_hull() {
        // 1 on [0, 0.5), 0 on [0.5, 1]: the majorant must stay at 1 up to 0.5.
        let f = StepFunction::new(vec![0.0, 0.5], vec![1.0, 0.0], Interval::unit()).unwrap();
        let h = f.majorant(Interval::unit()).unwrap();
        assert_eq!(h.eval(0.4), 1.0);
        assert_eq!(h.eval(0.5), 1.0);
        assert_eq!(h.eval(1.0), 0.0);
    }

    #[test]
    fn restriction_lies_below() {
        let f = StepFunction::new(
            vec![0.0, 0.2, 0.4, 0.6, 0.8],
            vec![0.0, 0.5, 0.6, 0.9, 1.0],
            Interval::unit(),
        )
        .unwrap();
        let whole = f.majorant(Interval::unit()).unwrap();
        let sub = iv(0.3, 0.7);
        let part = f.majorant(sub).unwrap();
        for i in 0..=40 {
            let t = 0.3 + 0.01 * i as f64;
            assert!(whole.eval(t) >= part.eval(t) - 1e-15);
        }
    }

    #[test]
    fn grid_function_hull_points() {
        let g = GridFunction::new(vec![(0.0, 0.0), (0.5, 1.0), (1.0, 0.0)]).unwrap();
        let pts = g.hull_points(iv(0.25, 0.75));
        assert_eq!(pts, vec![(0.25, 0.5), (0.5, 1.0), (0.75, 0.5)]);
    }
}
