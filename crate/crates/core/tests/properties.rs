use proptest::prelude::*;
use rand::Rng;
use stochinv::perturb::utilities_from_noise;
use stochinv::recursion::{cond_jacobian_vjp, cond_sample};
use stochinv::structures::{Graph, StructureKind, StructureVisitor};
use stochinv::{run_struct, trace_log_prob, trace_score, SeedStream, Structure, Theta, Utilities};

fn kinds() -> Vec<StructureKind> {
    vec![
        StructureKind::TopK { d: 5, k: 2 },
        StructureKind::TopK { d: 4, k: 4 },
        StructureKind::Argsort { d: 5 },
        StructureKind::Matching { n: 4 },
        StructureKind::BinaryTree { n: 7 },
        StructureKind::Kruskal { graph: Graph::complete_undirected(5) },
        StructureKind::Kruskal { graph: Graph::new(5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)], false).unwrap() },
        StructureKind::Cle { graph: Graph::complete_directed(4), root: 0 },
        StructureKind::Cle { graph: Graph::complete_directed(5), root: 2 },
    ]
}

fn kind_strategy() -> impl Strategy<Value = StructureKind> {
    proptest::sample::select(kinds())
}

fn theta_for(n: usize, seed: u64, spread: f64) -> Theta {
    let mut rng = SeedStream::new(seed).rng(1);
    Theta::new((0..n).map(|_| rng.random_range(-spread..spread)).collect()).unwrap()
}

fn sample<D: Structure>(def: &D, theta: &Theta, seed: u64) -> (Utilities<f64>, D::Value, stochinv::Trace) {
    let e = stochinv::sample_utilities(theta, &mut SeedStream::new(seed).rng(0));
    let (x, t) = run_struct(def, &e).unwrap();
    (e, x, t)
}

struct Check<F> {
    seed: u64,
    f: F,
}

trait Property {
    fn check<D: Structure>(&self, def: &D, seed: u64) -> Result<(), TestCaseError>;
}

impl<F: Property> StructureVisitor for Check<F> {
    type Output = Result<(), TestCaseError>;
    fn visit<D: Structure>(&mut self, def: &D) -> Self::Output {
        self.f.check(def, self.seed)
    }
}

fn run(kind: &StructureKind, seed: u64, f: impl Property) -> Result<(), TestCaseError> {
    kind.visit(&mut Check { seed, f }).unwrap()
}

struct ValidOutput;
impl Property for ValidOutput {
    fn check<D: Structure>(&self, def: &D, seed: u64) -> Result<(), TestCaseError> {
        let theta = theta_for(def.num_keys(), seed, 3.0);
        let (_, x, t) = sample(def, &theta, seed);
        prop_assert!(def.validate(&x).is_ok(), "{:?}", def.validate(&x));
        let lp: f64 = trace_log_prob(def, &t, &theta).unwrap();
        prop_assert!(lp.is_finite() && lp <= 1e-12);
        Ok(())
    }
}

struct ShiftInvariant(f64);
impl Property for ShiftInvariant {
    fn check<D: Structure>(&self, def: &D, seed: u64) -> Result<(), TestCaseError> {
        let theta = theta_for(def.num_keys(), seed, 2.0);
        let (_, _, t) = sample(def, &theta, seed);
        let a: f64 = trace_log_prob(def, &t, &theta).unwrap();
        let b: f64 = trace_log_prob(def, &t, &theta.shifted(self.0)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        Ok(())
    }
}

struct MonotoneTransform;
impl Property for MonotoneTransform {
    fn check<D: Structure>(&self, def: &D, seed: u64) -> Result<(), TestCaseError> {
        let theta = theta_for(def.num_keys(), seed, 2.0);
        let (e, x, t) = sample(def, &theta, seed);
        let f = Utilities::new(e.values().iter().map(|v| 3.0 * v + v * v * v).collect()).unwrap();
        let (x2, t2) = run_struct(def, &f).unwrap();
        prop_assert_eq!(x, x2);
        prop_assert_eq!(t, t2);
        Ok(())
    }
}

struct ScoreMatchesFd;
impl Property for ScoreMatchesFd {
    fn check<D: Structure>(&self, def: &D, seed: u64) -> Result<(), TestCaseError> {
        let theta = theta_for(def.num_keys(), seed, 1.5);
        let (_, _, t) = sample(def, &theta, seed);
        let g: Vec<f64> = trace_score(def, &t, &theta).unwrap();
        let h = 1e-6;
        for k in 0..theta.len() {
            let up: f64 = trace_log_prob(def, &t, &theta.with_value(k, theta.get(k) + h)).unwrap();
            let dn: f64 = trace_log_prob(def, &t, &theta.with_value(k, theta.get(k) - h)).unwrap();
            let fd = (up - dn) / (2.0 * h);
            prop_assert!((fd - g[k]).abs() <= 1e-6, "key {}: {} vs {}", k, fd, g[k]);
        }
        let sum: f64 = g.iter().sum();
        prop_assert!(sum.abs() < 1e-9, "score sums to {}", sum);
        Ok(())
    }
}

struct ConditionalRoundTrip;
impl Property for ConditionalRoundTrip {
    fn check<D: Structure>(&self, def: &D, seed: u64) -> Result<(), TestCaseError> {
        let theta = theta_for(def.num_keys(), seed, 2.0);
        let (_, _, t) = sample(def, &theta, seed);
        let (et, rec) = cond_sample(def, &t, &theta, &mut SeedStream::new(seed).rng(7)).unwrap();
        prop_assert_eq!(&rec.replay(&theta).unwrap(), &et);
        let (_, t2) = run_struct(def, &et).unwrap();
        prop_assert_eq!(t, t2);
        Ok(())
    }
}

struct JacobianMatchesFd;
impl Property for JacobianMatchesFd {
    fn check<D: Structure>(&self, def: &D, seed: u64) -> Result<(), TestCaseError> {
        let theta = theta_for(def.num_keys(), seed, 1.0);
        let (_, _, t) = sample(def, &theta, seed);
        let (_, rec) = cond_sample(def, &t, &theta, &mut SeedStream::new(seed).rng(3)).unwrap();
        let mut rng = SeedStream::new(seed).rng(4);
        let v: Vec<f64> = (0..theta.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = cond_jacobian_vjp(&rec, &theta, &v).unwrap();
        let h = 1e-6;
        for k in 0..theta.len() {
            let dot = |th: &Theta| -> f64 {
                rec.replay(th).unwrap().values().iter().zip(&v).map(|(a, b)| a * b).sum()
            };
            let fd = (dot(&theta.with_value(k, theta.get(k) + h)) - dot(&theta.with_value(k, theta.get(k) - h))) / (2.0 * h);
            prop_assert!((fd - g[k]).abs() <= 1e-5 * fd.abs().max(1.0), "key {}: {} vs {}", k, fd, g[k]);
        }
        Ok(())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn sampled_structures_are_valid(kind in kind_strategy(), seed in any::<u64>()) {
        run(&kind, seed, ValidOutput)?;
    }

    #[test]
    fn log_prob_is_shift_invariant(kind in kind_strategy(), seed in any::<u64>(), c in -20.0f64..20.0) {
        run(&kind, seed, ShiftInvariant(c))?;
    }

    #[test]
    fn score_is_gradient_of_log_prob(kind in kind_strategy(), seed in any::<u64>()) {
        run(&kind, seed, ScoreMatchesFd)?;
    }

    #[test]
    fn conditional_sample_reproduces_trace(kind in kind_strategy(), seed in any::<u64>()) {
        run(&kind, seed, ConditionalRoundTrip)?;
    }

    #[test]
    fn conditional_jacobian_matches_finite_differences(kind in kind_strategy(), seed in any::<u64>()) {
        run(&kind, seed, JacobianMatchesFd)?;
    }

    #[test]
    fn increasing_transform_preserves_outcome(
        kind in kind_strategy().prop_filter("contraction compares residuals", |k| !matches!(k, StructureKind::Cle { .. })),
        seed in any::<u64>(),
    ) {
        run(&kind, seed, MonotoneTransform)?;
    }

    #[test]
    fn argsort_trace_is_the_order(seed in any::<u64>(), d in 1usize..8) {
        let def = stochinv::structures::argsort_def(d);
        let theta = theta_for(d, seed, 2.0);
        let (_, x, t) = sample(&def, &theta, seed);
        prop_assert_eq!(t.winners().collect::<Vec<_>>(), x.order);
    }

    #[test]
    fn noise_scales_with_theta(seed in any::<u64>(), c in -5.0f64..5.0) {
        let theta = theta_for(4, seed, 1.0);
        let noise = [0.3, 1.0, 2.5, 0.01];
        let a = utilities_from_noise(&theta, &noise);
        let b = utilities_from_noise(&theta.shifted(c), &noise);
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((y - x * c.exp()).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }
}

#[test]
fn chu_liu_edmonds_depends_on_magnitudes() {
    // keys: 0>1, 0>2, 1>0, 1>2, 2>0, 2>1. The 1<->2 cycle forms, then the
    // entering edge is chosen on residuals 10-2 vs 9.5-1; cubing flips it.
    let def = stochinv::structures::cle_def(Graph::complete_directed(3), 0).unwrap();
    let e = [10.0, 9.5, 50.0, 1.0, 50.0, 2.0];
    let cubed: Vec<f64> = e.iter().map(|v| v * v * v).collect();
    let (x, _) = run_struct(&def, &Utilities::new(e.to_vec()).unwrap()).unwrap();
    let (y, _) = run_struct(&def, &Utilities::new(cubed).unwrap()).unwrap();
    assert_eq!(x.edges, vec![0, 3]);
    assert_eq!(y.edges, vec![1, 5]);
}
