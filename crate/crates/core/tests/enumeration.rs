use std::collections::HashMap;

use rand::Rng;
use stochinv::oracle::{chi_square_fit, enumerate, exact_gradient, expected_loss, DEFAULT_MAX_TRACES};
use stochinv::structures::{
    argsort_def, binary_tree_def, hamming, kruskal_def, matching_def, small_instances, top_k_def, Graph,
    StructureVisitor,
};
use stochinv::{run_struct, sample_utilities, trace_log_prob, SeedStream, Structure, Theta, Trace};

fn random_theta(n: usize, seed: u64) -> Theta {
    let mut rng = SeedStream::new(seed).rng(0);
    Theta::new((0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// Probability that the first `order.len()` draws without replacement are `order`.
fn plackett_luce(rates: &[f64], order: &[usize]) -> f64 {
    let mut left: f64 = rates.iter().sum();
    let mut p = 1.0;
    for &i in order {
        p *= rates[i] / left;
        left -= rates[i];
    }
    p
}

fn subsets(d: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << d)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..d).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}

#[test]
fn top_k_marginals_match_chain_rule() {
    for (d, k) in [(4, 2), (5, 2), (5, 3), (6, 1)] {
        let theta = random_theta(d, (d * 10 + k) as u64);
        let rates: Vec<f64> = theta.theta().iter().map(|t| (-t).exp()).collect();
        let dist = enumerate(&top_k_def(d, k).unwrap(), &theta, DEFAULT_MAX_TRACES).unwrap();
        for s in subsets(d, k) {
            let want: f64 = permutations(&s).iter().map(|o| plackett_luce(&rates, o)).sum();
            let key = format!("{{{}}}", s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","));
            let got = dist.structure_marginals[&key];
            assert!((got - want).abs() < 1e-9, "d={d} k={k} {key}: {got} vs {want}");
        }
    }
}

#[test]
fn argsort_traces_are_plackett_luce_orders() {
    let theta = random_theta(4, 3);
    let rates: Vec<f64> = theta.theta().iter().map(|t| (-t).exp()).collect();
    let def = argsort_def(4);
    let dist = enumerate(&def, &theta, DEFAULT_MAX_TRACES).unwrap();
    assert_eq!(dist.len(), 24);
    for e in &dist.entries {
        let winners: Vec<usize> = e.trace.winners().collect();
        assert_eq!(winners, e.value.order);
        assert!((e.prob - plackett_luce(&rates, &winners)).abs() < 1e-12);
    }
}

#[test]
fn uniform_matchings_are_uniform() {
    let def = matching_def(3);
    let dist = enumerate(&def, &Theta::constant(9, 0.0).unwrap(), DEFAULT_MAX_TRACES).unwrap();
    assert_eq!(dist.structure_marginals.len(), 6);
    for p in dist.structure_marginals.values() {
        assert!((p - 1.0 / 6.0).abs() < 1e-12);
    }
}

#[test]
fn three_node_binary_trees() {
    let def = binary_tree_def(3);
    let dist = enumerate(&def, &Theta::constant(3, 0.0).unwrap(), DEFAULT_MAX_TRACES).unwrap();
    let mut root = [0.0; 3];
    for e in &dist.entries {
        root[e.value.root().unwrap()] += e.prob;
    }
    for r in root {
        assert!((r - 1.0 / 3.0).abs() < 1e-12);
    }
    assert_eq!(dist.structure_marginals.len(), 5);
    let balanced = dist.entries.iter().find(|e| e.value.root() == Some(1)).unwrap();
    assert!((dist.structure_marginals[&balanced.canonical] - 1.0 / 3.0).abs() < 1e-12);
    for (c, p) in &dist.structure_marginals {
        if c != &balanced.canonical {
            assert!((p - 1.0 / 6.0).abs() < 1e-12, "{c}: {p}");
        }
    }
}

#[test]
fn kruskal_triangle_trees() {
    let def = kruskal_def(Graph::new(3, vec![(0, 1), (1, 2), (0, 2)], false).unwrap()).unwrap();
    let dist = enumerate(&def, &Theta::constant(3, 0.0).unwrap(), DEFAULT_MAX_TRACES).unwrap();
    assert_eq!(dist.len(), 6);
    assert!(dist.entries.iter().all(|e| (e.prob - 1.0 / 6.0).abs() < 1e-15));
    assert!(dist.structure_marginals.values().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
}

struct Agreement {
    seed: u64,
}

impl StructureVisitor for Agreement {
    type Output = ();
    fn visit<D: Structure>(&mut self, def: &D) {
        self.seed += 1;
        let theta = random_theta(def.num_keys(), self.seed);
        let dist = enumerate(def, &theta, DEFAULT_MAX_TRACES).unwrap();
        assert!((dist.total_prob() - 1.0).abs() < 1e-9);
        let marg: f64 = dist.structure_marginals.values().sum();
        assert!((marg - 1.0).abs() < 1e-9);
        for e in &dist.entries {
            assert!(e.prob > 0.0);
            let lp: f64 = trace_log_prob(def, &e.trace, &theta).unwrap();
            assert!((lp.exp() - e.prob).abs() < 1e-9);
            assert!(def.validate(&e.value).is_ok());
        }
    }
}

#[test]
fn every_small_instance_normalizes_and_agrees_with_log_prob() {
    let mut v = Agreement { seed: 0 };
    for kind in small_instances() {
        kind.visit(&mut v).unwrap();
    }
}

struct GradientFd;

impl StructureVisitor for GradientFd {
    type Output = ();
    fn visit<D: Structure>(&mut self, def: &D) {
        let theta = random_theta(def.num_keys(), 77);
        let base = enumerate(def, &theta, DEFAULT_MAX_TRACES).unwrap();
        let target = def.features(&base.entries[0].value);
        let loss = |x: &D::Value| hamming(&def.features(x), &target) as f64;
        let g = exact_gradient(&base, def, &theta, loss).unwrap();
        let h = 1e-6;
        for k in 0..theta.len() {
            let at = |t: f64| {
                let th = theta.with_value(k, t);
                expected_loss(&enumerate(def, &th, DEFAULT_MAX_TRACES).unwrap(), loss)
            };
            let fd = (at(theta.get(k) + h) - at(theta.get(k) - h)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6, "key {k}: {fd} vs {}", g[k]);
        }
        let zero = exact_gradient(&base, def, &theta, |_| 2.5).unwrap();
        assert!(zero.iter().all(|z| z.abs() < 1e-8));
    }
}

#[test]
fn exact_gradient_matches_finite_differences() {
    use stochinv::structures::StructureKind::*;
    for kind in [
        TopK { d: 4, k: 2 },
        Argsort { d: 3 },
        Matching { n: 3 },
        BinaryTree { n: 4 },
        Kruskal { graph: Graph::complete_undirected(4) },
        Cle { graph: Graph::complete_directed(3), root: 0 },
    ] {
        kind.visit(&mut GradientFd).unwrap();
    }
}

#[test]
fn exact_gradient_two_item_softmax() {
    let def = top_k_def(2, 1).unwrap();
    let theta = Theta::constant(2, 0.0).unwrap();
    let dist = enumerate(&def, &theta, 10).unwrap();
    let g = exact_gradient(&dist, &def, &theta, |x| if x.items == [0] { 1.0 } else { 0.0 }).unwrap();
    assert!((g[0] + 0.25).abs() < 1e-10 && (g[1] - 0.25).abs() < 1e-10);
}

#[test]
fn sampled_counts_fit_enumeration() {
    let def = top_k_def(3, 2).unwrap();
    let theta = random_theta(3, 5);
    let dist = enumerate(&def, &theta, DEFAULT_MAX_TRACES).unwrap();
    let seeds = SeedStream::new(2024);
    let mut rng = seeds.rng(0);
    let mut counts: HashMap<Trace, u64> = HashMap::new();
    for _ in 0..100_000 {
        let (_, t) = run_struct(&def, &sample_utilities(&theta, &mut rng)).unwrap();
        *counts.entry(t).or_default() += 1;
    }
    let (_, p) = chi_square_fit(&counts, &dist).unwrap();
    assert!(p > 1e-3, "p = {p}");

    let first = dist.entries[0].trace.clone();
    *counts.get_mut(&first).unwrap() *= 2;
    let (_, p) = chi_square_fit(&counts, &dist).unwrap();
    assert!(p < 1e-3, "p = {p}");
}
