//! Gaussian path simulation on uniform grids: Brownian motion, Brownian
//! bridge, two-sided Brownian motion, the drifted process `W(t) - t^2`, its
//! majorant gap, and the Brownian version of a cumulative estimator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::CurveSpec;
use crate::stepfn::{upper_hull, GridFunction};

/// Deterministic random stream keyed by a master seed and a stream index.
///
/// Streams with distinct indices are the independent ChaCha streams of the
/// same key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub index: u64,
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.index);
        rng
    }

    /// A stream under an unrelated key, for a separate purpose (e.g. a
    /// reference sample next to the replications).
    pub fn fork(seed: u64, purpose: u64) -> u64 {
        splitmix64(seed ^ splitmix64(purpose.wrapping_add(0x5851_f42d_4c95_7f2d)))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform grid `lo, lo + step, ..., hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    lo: f64,
    hi: f64,
    step: f64,
    count: usize,
    /// Index of the grid point at 0, if 0 lies in `[lo, hi]`.
    origin: Option<usize>,
}

impl PathGrid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo < hi) || !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "need lo < hi and step > 0, got [{lo}, {hi}] step {step}"
            )));
        }
        let cells = (hi - lo) / step;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * rounded.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "step {step} does not divide [{lo}, {hi}]"
            )));
        }
        let origin = if lo <= 0.0 && 0.0 <= hi {
            let k = -lo / step;
            if (k - k.round()).abs() > 1e-9 * k.round().max(1.0) {
                return Err(Error::InvalidGrid(format!(
                    "0 lies in [{lo}, {hi}] but is not a grid point for step {step}"
                )));
            }
            Some(k.round() as usize)
        } else {
            None
        };
        Ok(Self {
            lo,
            hi,
            step,
            count: rounded as usize + 1,
            origin,
        })
    }

    /// `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, step: f64) -> Result<Self> {
        Self::new(-half_width, half_width, step)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn origin(&self) -> Option<usize> {
        self.origin
    }

    /// Abscissa of grid point `i`; exactly 0 at the origin.
    pub fn point(&self, i: usize) -> f64 {
        match self.origin {
            Some(o) => (i as f64 - o as f64) * self.step,
            None => self.lo + i as f64 * self.step,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.point(i)).collect()
    }

    /// Grid index closest to `t`, clamped to the grid.
    pub fn nearest(&self, t: f64) -> usize {
        let k = ((t - self.point(0)) / self.step).round();
        k.clamp(0.0, (self.count - 1) as f64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    BrownianMotion,
    BrownianBridge,
    TwoSidedBm,
    Derived,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPath {
    pub grid: PathGrid,
    pub values: Vec<f64>,
    pub kind: PathKind,
}

impl GaussianPath {
    pub fn points(&self) -> Vec<(f64, f64)> {
        (0..self.grid.count())
            .map(|i| (self.grid.point(i), self.values[i]))
            .collect()
    }

    pub fn at(&self, t: f64) -> f64 {
        self.values[self.grid.nearest(t)]
    }
}

fn require_origin_start(grid: &PathGrid) -> Result<()> {
    if grid.lo() != 0.0 {
        return Err(Error::InvalidGrid(format!(
            "one-sided paths start at 0, grid starts at {}",
            grid.lo()
        )));
    }
    Ok(())
}

fn walk<R: rand::Rng>(rng: &mut R, steps: usize, sd: f64, out: &mut Vec<f64>) {
    let mut w = 0.0;
    for _ in 0..steps {
        let z: f64 = StandardNormal.sample(rng);
        w += sd * z;
        out.push(w);
    }
}

/// Standard Brownian motion on a grid starting at 0.
pub fn sample_bm(grid: &PathGrid, stream: RngStream) -> Result<GaussianPath> {
    require_origin_start(grid)?;
    let mut rng = stream.rng();
    Ok(GaussianPath {
        grid: *grid,
        values: bm_values(grid, &mut rng),
        kind: PathKind::BrownianMotion,
    })
}

fn bm_values<R: rand::Rng>(grid: &PathGrid, rng: &mut R) -> Vec<f64> {
    let mut values = Vec::with_capacity(grid.count());
    values.push(0.0);
    walk(rng, grid.count() - 1, grid.step().sqrt(), &mut values);
    values
}

/// Brownian bridge on `[0, L]` pinned at both ends, built as
/// `W(t) - (t / L) W(L)`.
pub fn sample_bridge(grid: &PathGrid, stream: RngStream) -> Result<GaussianPath> {
    require_origin_start(grid)?;
    let mut rng = stream.rng();
    let mut values = bm_values(grid, &mut rng);
    pin_bridge(grid, &mut values);
    Ok(GaussianPath {
        grid: *grid,
        values,
        kind: PathKind::BrownianBridge,
    })
}

fn pin_bridge(grid: &PathGrid, values: &mut [f64]) {
    let last = values.len() - 1;
    let end = values[last];
    let total = grid.hi() - grid.lo();
    for (i, v) in values.iter_mut().enumerate() {
        *v -= (grid.point(i) / total) * end;
    }
    values[0] = 0.0;
    values[last] = 0.0;
}

/// Two independent Brownian halves glued at the origin.
pub fn sample_two_sided_bm(grid: &PathGrid, stream: RngStream) -> Result<GaussianPath> {
    let mut rng = stream.rng();
    let values = two_sided_values(grid, 1.0, &mut rng)?;
    Ok(GaussianPath {
        grid: *grid,
        values,
        kind: PathKind::TwoSidedBm,
    })
}

/// Two-sided Brownian motion with variance `variance_rate * |t|`.
fn two_sided_values<R: rand::Rng>(
    grid: &PathGrid,
    variance_rate: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let o = grid
        .origin()
        .ok_or_else(|| Error::InvalidGrid("0 is not a grid point".into()))?;
    let sd = (variance_rate * grid.step()).sqrt();
    let mut right = Vec::with_capacity(grid.count() - o);
    right.push(0.0);
    walk(rng, grid.count() - 1 - o, sd, &mut right);
    let mut left = Vec::with_capacity(o);
    walk(rng, o, sd, &mut left);
    let mut values: Vec<f64> = left.into_iter().rev().collect();
    values.extend(right);
    Ok(values)
}

/// `Z(t) = W(t) - t^2` on the grid of a two-sided Brownian path.
pub fn make_z(path: &GaussianPath) -> Result<GaussianPath> {
    if path.kind != PathKind::TwoSidedBm {
        return Err(Error::InvalidInput(format!(
            "drifted process needs a two-sided Brownian path, got {:?}",
            path.kind
        )));
    }
    let values = path
        .values
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let t = path.grid.point(i);
            w - t * t
        })
        .collect();
    Ok(GaussianPath {
        grid: path.grid,
        values,
        kind: PathKind::Derived,
    })
}

/// Majorant gap of a path at every grid point.
pub fn gap_of_path(grid: &PathGrid, values: &[f64]) -> Vec<f64> {
    let pts: Vec<(f64, f64)> = (0..grid.count()).map(|i| (grid.point(i), values[i])).collect();
    gaps_against(&upper_hull(&pts), &pts)
}

/// Default number of bridge refinement levels near the majorant.
pub const DEFAULT_REFINE_LEVELS: u32 = 12;

/// Refined cells are those whose smaller endpoint gap is below this many
/// bridge scales `sqrt(v · width)`.
const REFINE_BAND: f64 = 2.5;

fn default_refine_levels() -> u32 {
    DEFAULT_REFINE_LEVELS
}

/// Discretization of the gap process `ζ = CM_R Z - Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZetaConfig {
    /// Half-width of the simulation window `[-T, T]`.
    pub truncation: f64,
    pub step: f64,
    /// Levels of midpoint refinement of grid cells close to the majorant.
    /// Zero uses the grid values only.
    #[serde(default = "default_refine_levels")]
    pub refine_levels: u32,
}

impl Default for ZetaConfig {
    fn default() -> Self {
        Self {
            truncation: 8.0,
            step: 0.005,
            refine_levels: DEFAULT_REFINE_LEVELS,
        }
    }
}

impl ZetaConfig {
    pub fn new(truncation: f64, step: f64) -> Self {
        Self {
            truncation,
            step,
            refine_levels: DEFAULT_REFINE_LEVELS,
        }
    }

    pub fn grid(&self) -> Result<PathGrid> {
        PathGrid::symmetric(self.truncation, self.step)
    }

    /// Evaluation points must stay within half the window.
    pub fn check_margin(&self, points: &[f64]) -> Result<()> {
        let margin = self.truncation / 2.0;
        match points.iter().find(|s| !(s.abs() <= margin)) {
            Some(&point) => Err(Error::TruncationMargin { point, margin }),
            None => Ok(()),
        }
    }
}

/// Samples `ζ` at `eval_points` from one path of `Z` on `[-T, T]`, using the
/// nearest grid point for each evaluation point.
pub fn sample_zeta(eval_points: &[f64], cfg: &ZetaConfig, stream: RngStream) -> Result<Vec<f64>> {
    cfg.check_margin(eval_points)?;
    let grid = cfg.grid()?;
    let mut rng = stream.rng();
    let lo = eval_points.iter().copied().fold(0.0, f64::min);
    let hi = eval_points.iter().copied().fold(0.0, f64::max);
    let gaps = zeta_gaps(&grid, cfg.refine_levels, (lo, hi), &mut rng)?;
    Ok(eval_points.iter().map(|&s| gaps[grid.nearest(s)]).collect())
}

/// Gap of `Z` at every point of `grid`, refined for evaluation in `focus`.
pub fn zeta_gaps<R: rand::Rng>(
    grid: &PathGrid,
    refine_levels: u32,
    focus: (f64, f64),
    rng: &mut R,
) -> Result<Vec<f64>> {
    drifted_gaps(grid, 1.0, 1.0, refine_levels, focus, rng)
}

/// Gap of `Y(s) = W(v s) - c s^2` at every grid point, where `W` is
/// two-sided Brownian motion (`v = 1, c = 1` gives `Z`).
///
/// The majorant of the grid values falls short of the majorant of the
/// continuous path by about `0.58 sqrt(v · step)` near its vertices. Cells
/// whose gap is within a few bridge scales of zero are therefore split by
/// exact Brownian-bridge midpoints, level by level up to `refine_levels`
/// times, with the majorant recomputed after each level.
///
/// Only cells between the coarse vertices that bracket `focus`, widened by
/// one vertex on each side, are refined; gaps outside that span keep the
/// grid accuracy.
pub fn drifted_gaps<R: rand::Rng>(
    grid: &PathGrid,
    variance_rate: f64,
    half_curvature: f64,
    refine_levels: u32,
    focus: (f64, f64),
    rng: &mut R,
) -> Result<Vec<f64>> {
    let w = two_sided_values(grid, variance_rate, rng)?;
    let xs = grid.points();
    let ys: Vec<f64> = xs.iter().zip(&w).map(|(s, w)| w - half_curvature * s * s).collect();
    let coarse: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    let hull0 = upper_hull(&coarse);
    if refine_levels == 0 {
        return Ok(gaps_against(&hull0, &coarse));
    }
    let g0 = gaps_against(&hull0, &coarse);
    let band = REFINE_BAND * (variance_rate * grid.step()).sqrt();
    let mut keep = vec![false; xs.len()];
    for &(x, _) in &hull0 {
        keep[grid.nearest(x)] = true;
    }
    let first = hull0.partition_point(|v| v.0 <= focus.0).saturating_sub(2);
    let last = (hull0.partition_point(|v| v.0 < focus.1) + 1).min(hull0.len() - 1);
    let span = (grid.nearest(hull0[first].0), grid.nearest(hull0[last].0));
    let mut cells = Vec::new();
    for i in span.0.saturating_sub(1)..(span.1 + 1).min(xs.len() - 1) {
        if g0[i].min(g0[i + 1]) < band {
            keep[i] = true;
            keep[i + 1] = true;
            cells.push(BridgeCell {
                x0: xs[i],
                w0: w[i],
                x1: xs[i + 1],
                w1: w[i + 1],
            });
        }
    }
    // Points strictly below the coarse majorant and away from the refined
    // cells can never become vertices, so only the kept ones are tracked.
    let mut points: Vec<(f64, f64)> = coarse
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(p, _)| *p)
        .collect();
    let mut hull = hull0;
    let y = |x: f64, w: f64| w - half_curvature * x * x;
    for _ in 0..refine_levels {
        if cells.is_empty() {
            break;
        }
        let line = HullLine::new(&hull);
        let mut next = Vec::with_capacity(2 * cells.len());
        let mut added = Vec::with_capacity(cells.len());
        for cell in cells {
            let width = cell.x1 - cell.x0;
            let gap0 = line.at(cell.x0) - y(cell.x0, cell.w0);
            let gap1 = line.at(cell.x1) - y(cell.x1, cell.w1);
            if gap0.min(gap1) >= REFINE_BAND * (variance_rate * width).sqrt() {
                continue;
            }
            let xm = 0.5 * (cell.x0 + cell.x1);
            let z: f64 = StandardNormal.sample(rng);
            let wm = 0.5 * (cell.w0 + cell.w1) + (0.25 * variance_rate * width).sqrt() * z;
            added.push((xm, y(xm, wm)));
            next.push(BridgeCell { x1: xm, w1: wm, ..cell });
            next.push(BridgeCell { x0: xm, w0: wm, ..cell });
        }
        points = merge_sorted(&points, &added);
        hull = upper_hull(&points);
        cells = next;
    }
    Ok(gaps_against(&hull, &coarse))
}

#[derive(Clone, Copy)]
struct BridgeCell {
    x0: f64,
    w0: f64,
    x1: f64,
    w1: f64,
}

/// Evaluates a fixed upper hull at points inside its span.
struct HullLine<'a> {
    hull: &'a [(f64, f64)],
}

impl<'a> HullLine<'a> {
    fn new(hull: &'a [(f64, f64)]) -> Self {
        Self { hull }
    }

    fn at(&self, x: f64) -> f64 {
        let h = self.hull;
        let j = h.partition_point(|p| p.0 <= x).clamp(1, h.len() - 1);
        let (x0, y0) = h[j - 1];
        let (x1, y1) = h[j];
        y0 + (y1 - y0) * ((x - x0) / (x1 - x0))
    }
}

fn merge_sorted(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i].0 <= b[j].0 {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Gaps of sorted points below an upper hull spanning them.
fn gaps_against(hull: &[(f64, f64)], pts: &[(f64, f64)]) -> Vec<f64> {
    let mut out = Vec::with_capacity(pts.len());
    let mut j = 0;
    for &(x, y) in pts {
        while j + 1 < hull.len() && hull[j + 1].0 <= x {
            j += 1;
        }
        let h = if hull[j].0 == x {
            hull[j].1
        } else {
            let (x0, y0) = hull[j];
            let (x1, y1) = hull[j + 1];
            y0 + (y1 - y0) * ((x - x0) / (x1 - x0))
        };
        out.push((h - y).max(0.0));
    }
    out
}

/// Standard Brownian motion evaluated at increasing times starting at 0.
pub fn bm_at_times<R: rand::Rng>(times: &[f64], rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut w = 0.0;
    let mut prev = 0.0;
    for &u in times {
        let z: f64 = StandardNormal.sample(rng);
        w += (u - prev).max(0.0).sqrt() * z;
        prev = u;
        out.push(w);
    }
    out
}

/// Brownian version `Λ(t) + n^{-1/2} W_n(L(t))` of the cumulative estimator
/// on the grid `i / n`.
///
/// `W_n` is indexed by `L(t) - L(0)` so it vanishes at `t = 0`. When the
/// model's Gaussian limit is a bridge, `W_n = B_n + ξ u` with `B_n` a bridge
/// on `[0, L(1) - L(0)]` and `ξ ~ N(0, 1 / (L(1) - L(0)))` independent.
pub fn make_lambda_nw(spec: &CurveSpec, n: usize, stream: RngStream) -> Result<GridFunction> {
    let times = l_times(spec, n);
    let mut rng = stream.rng();
    let mut w = bm_at_times(&times, &mut rng);
    if spec.bridge() {
        let total = times[times.len() - 1];
        let end = w[w.len() - 1];
        let xi: f64 = StandardNormal.sample(&mut rng);
        let xi = xi / total.sqrt();
        for (v, &u) in w.iter_mut().zip(&times) {
            *v += (xi - end / total) * u;
        }
    }
    brownian_version(spec, n, &w)
}

fn l_times(spec: &CurveSpec, n: usize) -> Vec<f64> {
    let l0 = spec.l(0.0);
    (0..=n).map(|i| spec.l(i as f64 / n as f64) - l0).collect()
}

/// Brownian version built from given values of `W_n` at the grid `i / n`.
pub fn brownian_version(spec: &CurveSpec, n: usize, noise: &[f64]) -> Result<GridFunction> {
    if noise.len() != n + 1 {
        return Err(Error::InvalidInput(format!(
            "need {} noise values, got {}",
            n + 1,
            noise.len()
        )));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let pts = noise
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let t = i as f64 / n as f64;
            (t, spec.big_lambda(t) + scale * w)
        })
        .collect();
    GridFunction::new(pts)
}
