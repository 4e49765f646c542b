use lcmgap::asymptotics::{mc_zeta_moment, zeta_zero_samples};
use lcmgap::models::{density_model, regression_model, MonotoneCurve};
use lcmgap::processes::{
    brownian_version, make_lambda_nw, make_z, sample_bm, sample_bridge, sample_two_sided_bm,
    sample_zeta, PathGrid, RngStream, ZetaConfig,
};
use lcmgap::stats::{mean_estimate, pearson, variance_estimate};

const R: u64 = 20_000;

fn marginal<F: Fn(u64) -> f64>(f: F) -> Vec<f64> {
    (0..R).map(f).collect()
}

fn assert_within_3se(label: &str, est: lcmgap::stats::Estimate, target: f64) {
    assert!(
        (est.value - target).abs() < 3.0 * est.se,
        "{label}: {} vs {target} (se {})",
        est.value,
        est.se
    );
}

#[test]
fn brownian_motion_marginals() {
    let grid = PathGrid::new(0.0, 2.0, 0.01).unwrap();
    let one: Vec<f64>;
    let two: Vec<f64>;
    let paths: Vec<_> = (0..R).map(|i| sample_bm(&grid, RngStream::new(1, i)).unwrap()).collect();
    one = paths.iter().map(|p| p.at(1.0)).collect();
    two = paths.iter().map(|p| p.at(2.0)).collect();
    assert_within_3se("E W(1)", mean_estimate(&one), 0.0);
    assert_within_3se("Var W(1)", variance_estimate(&one), 1.0);
    assert_within_3se("Var W(2)", variance_estimate(&two), 2.0);
    // corr(W(1), W(2)) = 1/sqrt(2).
    let r = pearson(&one, &two);
    assert!((r - 0.5f64.sqrt()).abs() < 0.02, "{r}");
}

#[test]
fn bridge_marginals() {
    let grid = PathGrid::new(0.0, 1.0, 0.01).unwrap();
    let mid = marginal(|i| sample_bridge(&grid, RngStream::new(2, i)).unwrap().at(0.5));
    assert_within_3se("Var B(1/2)", variance_estimate(&mid), 0.25);
    let quarter = marginal(|i| sample_bridge(&grid, RngStream::new(2, i)).unwrap().at(0.25));
    assert_within_3se("Var B(1/4)", variance_estimate(&quarter), 0.1875);
}

#[test]
fn two_sided_motion_and_drift() {
    let grid = PathGrid::symmetric(2.0, 0.01).unwrap();
    let left = marginal(|i| sample_two_sided_bm(&grid, RngStream::new(4, i)).unwrap().at(-1.5));
    assert_within_3se("Var W(-1.5)", variance_estimate(&left), 1.5);
    let z1 = marginal(|i| {
        let w = sample_two_sided_bm(&grid, RngStream::new(4, i)).unwrap();
        make_z(&w).unwrap().at(1.0)
    });
    assert_within_3se("E Z(1)", mean_estimate(&z1), -1.0);
}

#[test]
fn zeta_truncation_is_stable() {
    let base = ZetaConfig::new(4.0, 0.01);
    let wide = ZetaConfig::new(8.0, 0.01);
    let a = mc_zeta_moment(1.0, 20_000, &base, 1).unwrap();
    let b = mc_zeta_moment(1.0, 20_000, &wide, 2).unwrap();
    assert!(a.z_distance(&b) < 3.0, "{a:?} vs {b:?}");
}

#[test]
fn zeta_is_stationary() {
    let cfg = ZetaConfig::new(6.0, 0.01);
    let reps = 20_000;
    let rows: Vec<Vec<f64>> = (0..reps)
        .map(|i| sample_zeta(&[-1.0, 0.0, 1.5], &cfg, RngStream::new(8, i)).unwrap())
        .collect();
    let col = |k: usize| -> Vec<f64> { rows.iter().map(|r| r[k]).collect() };
    let (m0, m1, m2) = (mean_estimate(&col(0)), mean_estimate(&col(1)), mean_estimate(&col(2)));
    assert!(m0.z_distance(&m1) < 3.5 && m2.z_distance(&m1) < 3.5, "{m0:?} {m1:?} {m2:?}");
    let direct = zeta_zero_samples(reps as usize, &cfg, 99).unwrap();
    assert!(direct.iter().all(|&z| z >= 0.0));
    assert!(mean_estimate(&direct).z_distance(&m1) < 3.5);
}

#[test]
fn brownian_version_scaling() {
    // Density: the bridge plus an independent slope ξ u is a Brownian
    // motion in L = Λ, so the variance at t is Λ(t).
    let spec = density_model(MonotoneCurve::Linear {
        intercept: 1.5,
        slope: 1.0,
    })
    .unwrap();
    let n = 400;
    let t = 0.5;
    let i = (t * n as f64) as usize;
    let dev = marginal(|k| {
        let f = make_lambda_nw(&spec, n, RngStream::new(6, k)).unwrap();
        (n as f64).sqrt() * (f.points()[i].1 - spec.big_lambda(t))
    });
    assert_within_3se("density", variance_estimate(&dev), spec.big_lambda(t));

    // Regression: Brownian motion in L(t) = σ² t.
    let spec = regression_model(
        MonotoneCurve::Linear {
            intercept: 2.0,
            slope: 1.0,
        },
        1.5,
    )
    .unwrap();
    let dev = marginal(|k| {
        let f = make_lambda_nw(&spec, n, RngStream::new(7, k)).unwrap();
        (n as f64).sqrt() * (f.points()[i].1 - spec.big_lambda(t))
    });
    assert_within_3se("regression", variance_estimate(&dev), 2.25 * t);
}

#[test]
fn brownian_version_without_noise_is_the_curve() {
    let spec = regression_model(
        MonotoneCurve::Linear {
            intercept: 2.0,
            slope: 1.0,
        },
        1.0,
    )
    .unwrap();
    let f = brownian_version(&spec, 10, &[0.0; 11]).unwrap();
    for &(t, v) in f.points() {
        assert!((v - spec.big_lambda(t)).abs() < 1e-15);
    }
}

#[test]
fn samplers_are_deterministic() {
    let grid = PathGrid::symmetric(3.0, 0.01).unwrap();
    let a = sample_two_sided_bm(&grid, RngStream::new(42, 17)).unwrap();
    let b = sample_two_sided_bm(&grid, RngStream::new(42, 17)).unwrap();
    let c = sample_two_sided_bm(&grid, RngStream::new(42, 18)).unwrap();
    assert_eq!(a.values, b.values);
    assert_ne!(a.values, c.values);
}
