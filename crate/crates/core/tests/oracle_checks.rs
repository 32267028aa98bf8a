use stopdet_core::oracle::*;
use stopdet_core::*;

#[test]
fn posterior_variance_shrinks_with_more_conditioning_points() {
    let spec = KernelSpec::ou(1.0, 1.0).unwrap();
    let pts = sample_points(PointDistribution::StandardNormal, 40, 2, 3);
    let query = vec![0.1, -0.2];
    let mut prev = f64::INFINITY;
    for n in 0..=40 {
        let v = gp_posterior_variance(&pts[..n], &query, &spec, 1e-3).unwrap();
        assert!(v <= prev + 1e-10, "variance grew at n = {n}");
        prev = v;
    }
}

#[test]
fn reference_log_det_invariant_under_permutation() {
    let spec = KernelSpec::rbf(1.0, 2.0).unwrap();
    let pts = sample_points(PointDistribution::StandardNormal, 60, 3, 9);
    let base = logdet_reference(&assemble_matrix(&pts, &spec, 1e-3).unwrap()).unwrap();
    let mut rev = pts.clone();
    rev.reverse();
    let v = logdet_reference(&assemble_matrix(&rev, &spec, 1e-3).unwrap()).unwrap();
    assert!((v - base).abs() <= 1e-8 * base.abs());
}

#[test]
fn reference_agrees_with_cholesky() {
    let spec = KernelSpec::rbf(1.0, 1.0).unwrap();
    let pts = sample_points(PointDistribution::StandardNormal, 150, 5, 1);
    let a = assemble_matrix(&pts, &spec, 1e-3).unwrap();
    let mut c = a.clone();
    cholesky_full(&mut c).unwrap();
    let chol = log_det_from_factor(&c).unwrap();
    assert!((chol - logdet_reference(&a).unwrap()).abs() <= 1e-8 * chol.abs());
}

#[test]
fn duplicate_points_give_strictly_decreasing_addends() {
    let spec = KernelSpec::rbf(1.0, 1.0).unwrap();
    let sigma2 = 1e-3;
    let rep = check_decreasing_expectation(&spec, sigma2, 8, 2, 3, 0, PointDistribution::Duplicate).unwrap();
    assert!(rep.passed());
    assert!((rep.means[0] - (1.0 + sigma2).ln()).abs() < 1e-12);
    // closed form for n identical points: C_nn^2 = sigma2 + sigma2 / (n - 1 + sigma2)
    for (j, m) in rep.means.iter().enumerate() {
        let v = sigma2 + sigma2 / (j as f64 + sigma2);
        let expected = if j == 0 { (1.0 + sigma2).ln() } else { v.ln() };
        assert!((m - expected).abs() < 1e-9, "index {j}: {m} vs {expected}");
    }
    for w in rep.means.windows(2) {
        assert!(w[1] < w[0]);
    }
}

#[test]
fn guarantee_check_in_exact_regimes() {
    let spec = KernelSpec::rbf(1.0, 1.0).unwrap();
    let mut setup = GuaranteeSetup {
        spec,
        sigma2: 1e-3,
        delta: 0.1,
        r: 1e-12,
        n: 60,
        dim: 2,
        dist: PointDistribution::StandardNormal,
    };
    let rep = check_guarantee(&setup, 20, 5).unwrap();
    assert_eq!(rep.failures, 0);
    assert!(rep.trials.iter().all(|t| !t.stopped && t.relative_error == 0.0));

    setup.r = 10.0;
    setup.dist = PointDistribution::Duplicate;
    let rep = check_guarantee(&setup, 20, 5).unwrap();
    assert_eq!(rep.failures, 0);
    assert!(rep.failure_rate_upper95 < 0.2);
}
