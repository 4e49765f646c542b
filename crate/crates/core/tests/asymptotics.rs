use lcmgap::asymptotics::{
    compute_m, compute_sigma2, mc_zeta_cov, mean_spatial_integral, moment_estimates,
    scaling_constants, variance_spatial_integral, zeta_zero_samples, zeta_zero_via_local_process,
    ReferenceConfig, Weight,
};
use lcmgap::models::{density_model, regression_model, CurveSpec, MonotoneCurve};
use lcmgap::processes::ZetaConfig;
use lcmgap::stats::ks_two_sample;

fn density() -> CurveSpec {
    density_model(MonotoneCurve::Linear {
        intercept: 1.5,
        slope: 1.0,
    })
    .unwrap()
}

fn exponential() -> CurveSpec {
    density_model(MonotoneCurve::truncated_exponential_density(1.5)).unwrap()
}

fn regression() -> CurveSpec {
    regression_model(
        MonotoneCurve::Linear {
            intercept: 2.0,
            slope: 1.0,
        },
        1.0,
    )
    .unwrap()
}

#[test]
fn scaling_identities_hold_on_a_fine_grid() {
    for spec in [density(), regression(), exponential()] {
        for i in 0..1000 {
            let t = (i as f64 + 0.5) / 1000.0;
            let k = scaling_constants(t, &spec).unwrap();
            assert!((k.c1 * k.c1 * spec.dl(t) * k.c2 - 1.0).abs() < 1e-12);
            assert!((spec.dlambda(t).abs() * k.c1 * k.c2 * k.c2 - 2.0).abs() < 1e-12);
        }
    }
}

#[test]
fn spatial_integrals_match_closed_forms() {
    let w = Weight::default();
    let c = 2f64.powf(1.0 / 3.0);
    // λ(t) = 3/2 - t: ∫ (3/2 - t)^{2/3} dt = (3/5)((3/2)^{5/3} - (1/2)^{5/3}).
    let m = mean_spatial_integral(1.0, &density(), &w).unwrap().value;
    let closed = c * 0.6 * (1.5f64.powf(5.0 / 3.0) - 0.5f64.powf(5.0 / 3.0));
    assert!(((m - closed) / closed).abs() < 1e-8, "{m} vs {closed}");
    let s = variance_spatial_integral(1.0, &density(), &w).unwrap().value;
    let closed = 2f64.powf(7.0 / 3.0) * 0.375 * (1.5f64.powf(8.0 / 3.0) - 0.5f64.powf(8.0 / 3.0));
    assert!(((s - closed) / closed).abs() < 1e-8, "{s} vs {closed}");
    // p = 2 for the regression model: constant integrands.
    let m = mean_spatial_integral(2.0, &regression(), &w).unwrap().value;
    assert!((m - 2f64.powf(2.0 / 3.0)).abs() < 1e-12);
    let s = variance_spatial_integral(2.0, &regression(), &w).unwrap().value;
    assert!((s - 2f64.powf(3.0)).abs() < 1e-12);
}

#[test]
fn constants_scale_with_the_weight() {
    let reference = ReferenceConfig {
        zeta: ZetaConfig::new(4.0, 0.01),
        replications: 200,
        cov_truncation: 4.0,
        cov_replications: 200,
        s_max: 2.0,
        s_step: 0.25,
    };
    let moments = moment_estimates(1.0, &reference, 3).unwrap();
    let spec = exponential();
    let w = Weight::Linear {
        intercept: 1.0,
        slope: 2.0,
    };
    let m1 = compute_m(1.0, &spec, &w, &moments).unwrap().value;
    let m3 = compute_m(1.0, &spec, &w.scaled(3.0), &moments).unwrap().value;
    assert!((m3 - 3.0 * m1).abs() < 1e-12 * m3.abs());
    let s1 = compute_sigma2(1.0, &spec, &w, &moments).unwrap().value;
    let s3 = compute_sigma2(1.0, &spec, &w.scaled(3.0), &moments).unwrap().value;
    assert!((s3 - 9.0 * s1).abs() < 1e-12 * s3.abs());
}

#[test]
fn brownian_scaling_law_small() {
    let cfg = ZetaConfig::new(6.0, 0.01);
    let direct = zeta_zero_samples(3000, &cfg, 10).unwrap();
    for (d, l) in [(1.0, 1.0), (2.0, 0.5), (0.7, 1.8)] {
        let local = zeta_zero_via_local_process(d, l, 3000, &cfg, 11).unwrap();
        let ks = ks_two_sample(&direct, &local);
        assert!(ks < 0.045, "({d}, {l}): {ks}");
    }
}

#[test]
fn covariance_curve_decays() {
    let cfg = ZetaConfig::new(8.0, 0.01);
    let s: Vec<f64> = (0..=8).map(|i| i as f64 * 0.5).collect();
    let curve = mc_zeta_cov(1.0, &s, 4000, &cfg, 21).unwrap();
    let first = curve.points[0];
    let last = curve.points[curve.points.len() - 1];
    assert!((first.cov - curve.variance_at_zero).abs() < 1e-12);
    assert!(first.cov > 0.0);
    assert!(last.cov.abs() < 3.0 * last.se + 0.02 * first.cov, "{last:?}");
    assert!(curve.integral.value > 0.0);
}

#[test]
fn refinement_removes_grid_shortfall() {
    // The majorant of grid values sits below that of the path; bridge
    // refinement near the majorant should make E ζ(0) insensitive to the step.
    let coarse = ZetaConfig::new(6.0, 0.04);
    let fine = ZetaConfig::new(6.0, 0.005);
    let a = lcmgap::asymptotics::mc_zeta_moment(1.0, 8000, &coarse, 31).unwrap();
    let b = lcmgap::asymptotics::mc_zeta_moment(1.0, 8000, &fine, 32).unwrap();
    assert!(a.z_distance(&b) < 3.0, "{a:?} vs {b:?}");
    let raw = ZetaConfig {
        refine_levels: 0,
        ..coarse
    };
    let c = lcmgap::asymptotics::mc_zeta_moment(1.0, 8000, &raw, 31).unwrap();
    // Without refinement the shortfall is about 0.58 sqrt(0.04) ≈ 0.12.
    assert!(b.value - c.value > 0.08, "{b:?} vs {c:?}");
}
