mod common;

use npvi_core::baselines::*;
use npvi_core::math::stream_rng;
use npvi_core::models::*;
use npvi_core::{fit, LogJointModel, NpvConfig, ParameterVector};

#[test]
fn leapfrog_is_reversible() {
    let models: Vec<Box<dyn LogJointModel>> = vec![
        Box::new(GaussianTarget::standard(10)),
        Box::new(t_mixture_target(TMixtureSpec::canonical()).unwrap()),
        Box::new(common::logistic_small(1)),
    ];
    let mut rng = stream_rng(5, 0);
    for m in &models {
        let q0 = common::normal_vec(&mut rng, m.dim(), 0.5);
        let p0 = common::normal_vec(&mut rng, m.dim(), 1.0);
        let (mut q, mut p) = (q0.clone(), p0.clone());
        assert!(leapfrog(m, &mut q, &mut p, 0.05, 20));
        p.iter_mut().for_each(|v| *v = -*v);
        assert!(leapfrog(m, &mut q, &mut p, 0.05, 20));
        let err = q.iter().zip(&q0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err:e}");
        assert!(p.iter().zip(&p0).all(|(a, b)| (a + b).abs() < 1e-8));
    }
}

#[test]
fn small_steps_conserve_energy() {
    let m = GaussianTarget::standard(3);
    let mut rng = stream_rng(6, 0);
    for _ in 0..20 {
        let mut q = common::normal_vec(&mut rng, 3, 1.0);
        let mut p = common::normal_vec(&mut rng, 3, 1.0);
        let h0 = hamiltonian(&m, &q, &p);
        leapfrog(&m, &mut q, &mut p, 1e-3, 20);
        assert!((hamiltonian(&m, &q, &p) - h0).abs() < 1e-4);
    }
}

#[test]
fn acceptance_rate_matches_accept_log() {
    let m = GaussianTarget::standard(2);
    let s = hmc_sample(&m, &HmcConfig { num_samples: 500, keep_last: 100, ..HmcConfig::default() }).unwrap();
    assert_eq!(s.proposals, 500);
    assert_eq!(s.acceptance_rate, s.accepted as f64 / 500.0);
    assert!((0.0..=1.0).contains(&s.acceptance_rate));
}

#[test]
fn map_laplace_and_point_npv_agree_on_concave_targets() {
    let targets: Vec<Box<dyn LogJointModel>> = vec![
        Box::new(GaussianTarget::new(vec![1.0, -2.0, 0.5], vec![0.5, 2.0, 1.0]).unwrap()),
        Box::new(common::logistic_small(3)),
    ];
    for m in &targets {
        let map = map_estimate(m, 10, 0).unwrap();
        let lap = laplace_diagonal(m, &map).unwrap();
        let r = fit(m, &NpvConfig::with_components(1)).unwrap();
        let npv = r.mixture.mean(0);
        for i in 0..m.dim() {
            assert!((npv[i] - map[i]).abs() < 1e-3, "{npv:?} vs {map:?}");
            assert_eq!(lap.mean[i], map[i]);
        }
    }
}

#[test]
fn laplace_variances_on_a_gaussian() {
    let m = GaussianTarget::new(vec![0.0, 3.0], vec![0.25, 9.0]).unwrap();
    let lap = laplace_diagonal(&m, &ParameterVector::new(vec![0.0, 3.0]).unwrap()).unwrap();
    assert!((lap.variances[0] - 0.25).abs() < 1e-10 && (lap.variances[1] - 9.0).abs() < 1e-10);
    let draws = lap.sample(20_000, 1);
    let v0 = draws.iter().map(|d| d[0] * d[0]).sum::<f64>() / 20_000.0;
    assert!((v0 - 0.25).abs() < 0.02);
}

#[test]
fn samples_csv_has_one_column_per_coordinate() {
    let m = GaussianTarget::standard(3);
    let s = hmc_sample(&m, &HmcConfig { num_samples: 50, keep_last: 10, ..HmcConfig::default() }).unwrap();
    let mut buf = Vec::new();
    write_samples_csv(&s.samples, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 3));
    assert_eq!(read_samples_csv(&buf[..]).unwrap(), s.samples);
}
