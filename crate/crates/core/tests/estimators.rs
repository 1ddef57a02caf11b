use rand::Rng;
use stochinv::estimators::{grad_e_reinforce, grad_loo, grad_relax, grad_t_reinforce, QuadraticCv, Space};
use stochinv::oracle::{bootstrap_variance_le, enumerate, exact_gradient, ks_exponential, DEFAULT_MAX_TRACES};
use stochinv::recursion::cond_sample;
use stochinv::structures::{hamming, kruskal_def, top_k_def, Graph, SubsetValue};
use stochinv::{run_struct, sample_utilities, EstimatorOptions, Report, SeedStream, Structure, Theta};

fn within(report: &Report, exact: &[f64], z: f64) {
    for (k, ((g, s), e)) in report.gradient.iter().zip(report.stderr()).zip(exact).enumerate() {
        assert!((g - e).abs() <= z * s + 1e-12, "coordinate {k}: {g} vs {e} (stderr {s})");
    }
}

fn hamming_to<'a, D: Structure>(def: &'a D, target: &'a [usize]) -> impl Fn(&D::Value) -> f64 + Sync + 'a {
    move |x| hamming(&def.features(x), target) as f64
}

#[test]
fn all_estimators_are_unbiased_on_top_k() {
    let def = top_k_def(3, 1).unwrap();
    let theta = Theta::new(vec![0.4, -0.3, 0.1]).unwrap();
    let target = [0usize];
    let loss = hamming_to(&def, &target);
    let dist = enumerate(&def, &theta, DEFAULT_MAX_TRACES).unwrap();
    let exact = exact_gradient(&dist, &def, &theta, &loss).unwrap();
    let n = 50_000;
    within(&grad_e_reinforce(&def, &theta, &loss, n, EstimatorOptions::new(1)).unwrap(), &exact, 4.0);
    within(&grad_t_reinforce(&def, &theta, &loss, n, EstimatorOptions::new(2)).unwrap(), &exact, 4.0);
    within(&grad_loo(&def, &theta, &loss, 4, Space::Trace, n / 4, EstimatorOptions::new(3)).unwrap(), &exact, 4.0);
    within(&grad_loo(&def, &theta, &loss, 4, Space::Utility, n / 4, EstimatorOptions::new(4)).unwrap(), &exact, 4.0);
    let cv = QuadraticCv { a: vec![0.3, -0.2, 0.5] };
    within(&grad_relax(&def, &theta, &loss, &cv, n, EstimatorOptions::new(5)).unwrap(), &exact, 4.0);
}

#[test]
fn relax_is_unbiased_on_kruskal_triangle() {
    let def = kruskal_def(Graph::complete_undirected(3)).unwrap();
    let theta = Theta::new(vec![0.2, -0.5, 0.7]).unwrap();
    let target = [0usize, 1];
    let loss = hamming_to(&def, &target);
    let dist = enumerate(&def, &theta, DEFAULT_MAX_TRACES).unwrap();
    let exact = exact_gradient(&dist, &def, &theta, &loss).unwrap();
    let cv = QuadraticCv { a: vec![1.0, 0.5, -0.25] };
    within(&grad_relax(&def, &theta, &loss, &cv, 50_000, EstimatorOptions::new(6)).unwrap(), &exact, 4.0);
}

#[test]
fn relax_with_loss_as_control_variate_cancels_leading_term() {
    // c(e) = 2 for every e makes L - c vanish when L ≡ 2; the remaining terms are zero gradients.
    struct Two;
    impl stochinv::ControlVariate<f64> for Two {
        fn eval(&self, e: &[f64]) -> (f64, Vec<f64>) {
            (2.0, vec![0.0; e.len()])
        }
    }
    let def = top_k_def(3, 2).unwrap();
    let theta = Theta::new(vec![0.1, 0.2, 0.3]).unwrap();
    let r = grad_relax(&def, &theta, |_: &SubsetValue| 2.0, &Two, 200, EstimatorOptions::new(0).retain()).unwrap();
    for g in r.per_sample.unwrap() {
        assert!(g.iter().all(|&x| x == 0.0));
    }
}

#[test]
fn trace_estimator_variance_does_not_exceed_utility_estimator() {
    let def = top_k_def(5, 2).unwrap();
    let target = [0usize, 1];
    let loss = hamming_to(&def, &target);
    let mut rng = SeedStream::new(99).rng(0);
    for draw in 0..3u64 {
        let theta = Theta::new((0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let t = grad_t_reinforce(&def, &theta, &loss, 10_000, EstimatorOptions::new(10 + draw).retain()).unwrap();
        let e = grad_e_reinforce(&def, &theta, &loss, 10_000, EstimatorOptions::new(20 + draw).retain()).unwrap();
        let out =
            bootstrap_variance_le(&t.per_sample.unwrap(), &e.per_sample.unwrap(), 300, 0.99, &mut rng).unwrap();
        assert!(out.confirmed, "draw {draw}: {out:?}");
    }
}

#[test]
fn conditional_utilities_are_exponential_marginally() {
    let def = top_k_def(4, 2).unwrap();
    let theta = Theta::new(vec![0.3, -0.6, 0.0, 1.0]).unwrap();
    let seeds = SeedStream::new(8);
    let n = 20_000;
    let mut cols = vec![Vec::with_capacity(n); 4];
    for i in 0..n {
        let mut rng = seeds.rng(i as u64);
        let (_, t) = run_struct(&def, &sample_utilities(&theta, &mut rng)).unwrap();
        let (e, _) = cond_sample(&def, &t, &theta, &mut rng).unwrap();
        for (c, &v) in cols.iter_mut().zip(e.values()) {
            c.push(v);
        }
    }
    for (k, c) in cols.iter().enumerate() {
        let (_, p) = ks_exponential(c, (-theta.get(k)).exp()).unwrap();
        assert!(p > 1e-3, "key {k}: p = {p}");
    }
}
