use freedeconv::models::{spn_moments, CwModel, SpnModel};
use freedeconv::randmat::*;

#[test]
fn spn_trace_mean_matches_first_moment() {
    let m = SpnModel::new(12, 8, vec![0.5, 1.0, 1.0, 1.5, 2.0, 0.0, 0.3, 0.9], 0.6).unwrap();
    let spec = GinibreSpec::new(12, 8, Field::Real, 11);
    let sampler = Sampler { ensemble: Ensemble::Spn(m.clone()), spec };
    let trials = 4000;
    let traces: Vec<f64> = (0..trials).map(|t| sampler.realize(t).unwrap().trace() / 8.0).collect();
    let mean = traces.iter().sum::<f64>() / trials as f64;
    let var = traces.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
    let want = m.singular_values.iter().map(|a| a * a).sum::<f64>() / 8.0 + 0.36 * 12.0 / 8.0;
    assert!((mean - want).abs() < 4.0 * (var / trials as f64).sqrt(), "{mean} vs {want}");
}

#[test]
fn moment_error_shrinks_with_dimension() {
    let base = SpnModel::new(2, 1, vec![1.0], 0.9).unwrap();
    let want = spn_moments::<f64>(&base, 4).unwrap();
    let error = |k: usize| {
        let m = base.scaled(k).unwrap();
        let s = empirical_spectrum(&Sampler::new(Ensemble::Spn(m), Field::Real, 3), 8, 4).unwrap();
        (0..4).map(|i| ((s.moments[i] - want.coeffs()[i]) / want.coeffs()[i]).abs()).fold(0.0, f64::max)
    };
    let (small, large) = (error(100), error(400));
    assert!(large < small, "{small} -> {large}");
}

#[test]
fn wishart_first_moment() {
    let m = CwModel::new(150, 100, vec![1.0; 150]).unwrap();
    let s = empirical_spectrum(&Sampler::new(Ensemble::Cw(m), Field::Complex, 5), 5, 1).unwrap();
    assert!((s.moments[0] - 1.5).abs() < 0.02);
    assert_eq!(s.trials, 5);
    assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
}
