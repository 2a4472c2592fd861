#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rnmrf_core::potentials::{FeatureMap, Helper, NeuralPotential, Potential, DEFAULT_CLAMP};
use rnmrf_core::relational::{AtomRef, Domain, GroundGraph, Parfactor, Predicate, RelationalModel, Universe};
use rnmrf_core::ground;

pub fn pred(name: &str, pops: &[&str], domain: &str) -> Predicate {
    Predicate {
        name: name.into(),
        arg_populations: pops.iter().map(|s| s.to_string()).collect(),
        arg_names: pops.iter().map(|s| s.to_uppercase()).collect(),
        domain: domain.into(),
    }
}

pub fn nn(features: FeatureMap, hidden: &[usize]) -> Potential {
    Potential::Neural(NeuralPotential::new(features, hidden.to_vec(), DEFAULT_CLAMP).unwrap())
}

/// Variables `x0..x{n-1}` over one shared discrete domain of size `card`, each with a
/// unary neural factor, plus a neural factor per listed edge. All helpers uniform.
pub fn discrete_model(n: usize, card: usize, edges: &[(usize, usize)], hidden: &[usize]) -> RelationalModel {
    let mut m = RelationalModel::new();
    let labels: Vec<String> = (0..card).map(|k| format!("v{k}")).collect();
    m.add_domain("d", Domain::discrete(labels).unwrap()).unwrap();
    for i in 0..n {
        m.add_predicate(pred(&format!("x{i}"), &["u"], "d")).unwrap();
        m.add_parfactor(Parfactor::new(
            format!("u{i}"),
            Helper::Uniform,
            vec![nn(FeatureMap::Identity, hidden)],
            vec![AtomRef::new(format!("x{i}"), ["U"])],
            vec![],
        ))
        .unwrap();
    }
    for &(a, b) in edges {
        m.add_parfactor(Parfactor::new(
            format!("e{a}{b}"),
            Helper::Uniform,
            vec![nn(FeatureMap::Identity, hidden)],
            vec![AtomRef::new(format!("x{a}"), ["U"]), AtomRef::new(format!("x{b}"), ["U"])],
            vec![],
        ))
        .unwrap();
    }
    m
}

pub fn unit_universe() -> Universe {
    Universe::new().with_population("u", ["o"])
}

pub fn ground_plain(m: &RelationalModel, u: &Universe) -> GroundGraph {
    ground(m, u, &BTreeMap::new()).unwrap()
}

/// Glorot init then scale every parameter, to get sharper distributions.
pub fn randomize(m: &mut RelationalModel, seed: u64, scale: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    m.init_params(&mut rng);
    let p: Vec<f64> = m.params().iter().map(|v| v * scale + 0.05 * rng.random::<f64>()).collect();
    m.set_params(&p).unwrap();
}

/// Plain-loop network forward: ReLU hidden layers, affine output.
pub fn manual_mlp(pot: &NeuralPotential, input: &[f64]) -> f64 {
    let layers = pot.mlp().layers();
    let mut h = input.to_vec();
    for (l, d) in layers.iter().enumerate() {
        let mut out = vec![0.0; d.output_dim()];
        for (o, v) in out.iter_mut().enumerate() {
            let mut s = d.bias[o];
            for (k, x) in h.iter().enumerate() {
                s += d.weights[[o, k]] * x;
            }
            *v = if l + 1 < layers.len() { s.max(0.0) } else { s };
        }
        h = out;
    }
    h[0]
}

/// One-hot / min-max encoding of a clique for the identity feature map.
pub fn manual_identity_features(values: &[f64], domains: &[Domain]) -> Vec<f64> {
    let mut out = Vec::new();
    for (v, d) in values.iter().zip(domains) {
        match d {
            Domain::Discrete(l) => {
                for k in 0..l.len() {
                    out.push(if k == *v as usize { 1.0 } else { 0.0 });
                }
            }
            Domain::Continuous { lo, hi } if lo.is_finite() && hi.is_finite() => out.push((v - lo) / (hi - lo)),
            _ => out.push(*v),
        }
    }
    out
}

/// Independent log-value of a uniform-helper, identity-feature neural factor.
pub fn manual_factor(pf: &Parfactor, values: &[f64]) -> f64 {
    let mut s = 0.0;
    for p in &pf.potentials {
        let Potential::Neural(n) = p else { panic!("oracle handles neural potentials only") };
        let (a, b) = n.clamp;
        s += manual_mlp(n, &manual_identity_features(values, &pf.domains)).clamp(a, b);
    }
    s
}

/// All assignments of a fully discrete graph with their normalized probabilities.
pub fn enumerate_joint(m: &RelationalModel, g: &GroundGraph) -> Vec<(Vec<f64>, f64)> {
    let cards: Vec<usize> = g.vars().iter().map(|v| v.domain.cardinality().unwrap()).collect();
    let total: usize = cards.iter().product();
    let mut out = Vec::with_capacity(total);
    for mut code in 0..total {
        let mut x = vec![0.0; cards.len()];
        for i in (0..cards.len()).rev() {
            x[i] = (code % cards[i]) as f64;
            code /= cards[i];
        }
        let lw: f64 = g
            .factors()
            .iter()
            .map(|f| manual_factor(&m.parfactors[f.parfactor], &f.values(&x)))
            .sum();
        out.push((x, lw));
    }
    let mx = out.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = out.iter().map(|o| (o.1 - mx).exp()).sum();
    out.into_iter().map(|(x, l)| (x, (l - mx).exp() / z)).collect()
}

/// Exact `p(x_i | rest)` from the enumerated joint.
pub fn exact_conditional(joint: &[(Vec<f64>, f64)], i: usize, rest: &[f64]) -> Vec<f64> {
    let mut p: Vec<f64> = Vec::new();
    for (x, pr) in joint {
        if x.iter().enumerate().all(|(k, v)| k == i || *v == rest[k]) {
            let v = x[i] as usize;
            if p.len() <= v {
                p.resize(v + 1, 0.0);
            }
            p[v] += pr;
        }
    }
    let z: f64 = p.iter().sum();
    p.iter().map(|v| v / z).collect()
}

pub fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
