mod common;

use common::{manual_mlp, pred, unit_universe};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rnmrf_core::conditional::helper_conditional;
use rnmrf_core::potentials::{
    factor_log_value, FeatureMap, GaussianParams, Gate, Helper, MlnPotential, Mlp, NeuralPotential, Potential,
    Proposal1D,
};
use rnmrf_core::relational::{AtomRef, Domain, Parfactor, RelationalModel};

fn random_mlp(sizes: &[usize], seed: u64, scale: f64) -> Mlp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Mlp::zeros(sizes).unwrap();
    let p: Vec<f64> = (0..m.num_params()).map(|_| scale * (rng.random::<f64>() * 2.0 - 1.0)).collect();
    m.load_flat(&p).unwrap();
    m
}

/// Smallest |pre-activation| over the hidden units, via plain loops.
fn min_kink_distance(m: &Mlp, x: &[f64]) -> f64 {
    let mut h = x.to_vec();
    let mut best = f64::INFINITY;
    let n = m.layers().len();
    for (l, d) in m.layers().iter().enumerate() {
        let mut out = vec![0.0; d.output_dim()];
        for (o, v) in out.iter_mut().enumerate() {
            let s = d.bias[o] + (0..h.len()).map(|k| d.weights[[o, k]] * h[k]).sum::<f64>();
            if l + 1 < n {
                best = best.min(s.abs());
            }
            *v = if l + 1 < n { s.max(0.0) } else { s };
        }
        h = out;
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mlp_backward_matches_finite_differences(
        d_in in 1usize..5, h1 in 1usize..6, h2 in 0usize..4, seed in 0u64..1000,
        x in proptest::collection::vec(-2.0f64..2.0, 5),
    ) {
        let mut sizes = vec![d_in, h1];
        if h2 > 0 { sizes.push(h2); }
        sizes.push(1);
        let mut m = random_mlp(&sizes, seed, 1.0);
        let x = &x[..d_in];
        prop_assume!(min_kink_distance(&m, x) > 1e-3);
        let (_, cache) = m.forward(x).unwrap();
        let g = m.backward(&cache, ndarray::ArrayView1::from(&[1.0][..])).unwrap();
        let mut analytic = Vec::new();
        g.flatten_into(&mut analytic);
        let mut p = Vec::new();
        m.flatten_into(&mut p);
        let eps = 1e-5;
        for k in 0..p.len() {
            let mut q = p.clone();
            q[k] += eps;
            m.load_flat(&q).unwrap();
            let up = m.forward(x).unwrap().0;
            q[k] -= 2.0 * eps;
            m.load_flat(&q).unwrap();
            let dn = m.forward(x).unwrap().0;
            let fd = (up - dn) / (2.0 * eps);
            let rel = (fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-6);
            prop_assert!(rel <= 1e-4, "param {} fd {} analytic {}", k, fd, analytic[k]);
        }
        m.load_flat(&p).unwrap();
    }

    #[test]
    fn clamp_range_and_gated_gradients(seed in 0u64..500, x0 in 0.0f64..1.0, x1 in 0.0f64..1.0, a in -3.0f64..0.0, w in 0.1f64..3.0) {
        let doms = vec![Domain::continuous(0.0, 1.0).unwrap(); 2];
        let mlp = random_mlp(&[2, 6, 1], seed, 4.0);
        let pot = NeuralPotential::with_mlp(FeatureMap::Identity, mlp.clone(), (a, a + w)).unwrap();
        let (v, gate) = pot.log_potential(&[x0, x1], &doms).unwrap();
        prop_assert!(v >= a && v <= a + w);
        let raw = manual_mlp(&pot, &[x0, x1]);
        let expect_gate = if raw > a + w { Gate::ClampedHigh } else if raw < a { Gate::ClampedLow } else { Gate::Open };
        prop_assert_eq!(gate, expect_gate);
        if gate != Gate::Open {
            let mut g = Vec::new();
            pot.gradient(&[x0, x1], &doms).unwrap().flatten_into(&mut g);
            prop_assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn absdiff_is_symmetric(seed in 0u64..500, x0 in 0.0f64..1.0, x1 in 0.0f64..1.0) {
        let doms = vec![Domain::continuous(0.0, 1.0).unwrap(); 2];
        let pot = NeuralPotential::with_mlp(FeatureMap::AbsDiff, random_mlp(&[1, 5, 1], seed, 2.0), (-10.0, 10.0)).unwrap();
        prop_assert_eq!(
            pot.log_potential(&[x0, x1], &doms).unwrap(),
            pot.log_potential(&[x1, x0], &doms).unwrap()
        );
    }

    #[test]
    fn mln_weight_gradient_is_exact(w in -5.0f64..5.0, a in 0u8..2, b in 0u8..2) {
        let doms = vec![Domain::discrete(["f", "t"]).unwrap(); 2];
        let names = vec![vec!["p".to_string()], vec!["q".to_string()]];
        let mut rule = MlnPotential::new(w, "p = 't' => q = 't'").unwrap();
        rule.bind(&names, &doms).unwrap();
        let x = [a as f64, b as f64];
        let eps = 1e-3;
        let mut up = rule.clone();
        up.weight += eps;
        let mut dn = rule.clone();
        dn.weight -= eps;
        let fd = (up.log_potential(&x).unwrap() - dn.log_potential(&x).unwrap()) / (2.0 * eps);
        prop_assert!((fd - rule.weight_gradient(&x).unwrap()).abs() <= 1e-8);
        prop_assert_eq!(rule.weight_gradient(&x).unwrap(), if a == 1 && b == 0 { 0.0 } else { 1.0 });
    }
}

fn gaussian_nn_parfactor(seed: u64) -> (Parfactor, f64, f64, f64) {
    let (mu, var) = (0.3, 0.04);
    let mut m = RelationalModel::new();
    m.add_domain("r", Domain::unbounded()).unwrap();
    m.add_predicate(pred("x", &["u"], "r")).unwrap();
    let pot = NeuralPotential::with_mlp(FeatureMap::Identity, random_mlp(&[1, 8, 1], seed, 2.0), (-4.0, 4.0)).unwrap();
    m.add_parfactor(Parfactor::new(
        "f",
        Helper::Gaussian(GaussianParams::new(vec![mu], vec![var]).unwrap()),
        vec![Potential::Neural(pot)],
        vec![AtomRef::new("x", ["U"])],
        vec![],
    ))
    .unwrap();
    (m.parfactors.remove(0), mu, var.sqrt(), 4.0)
}

fn trapezoid(pf: &Parfactor, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|k| {
            let x = lo + k as f64 * h;
            let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            w * factor_log_value(pf, &[x]).unwrap().exp()
        })
        .sum::<f64>()
        * h
}

#[test]
fn gaussian_times_relu_is_normalizable() {
    for seed in 0..5 {
        let (pf, mu, sd, b) = gaussian_nn_parfactor(seed);
        let coarse = trapezoid(&pf, mu - 10.0 * sd, mu + 10.0 * sd, 1_000);
        let fine = trapezoid(&pf, mu - 10.0 * sd, mu + 10.0 * sd, 10_000);
        assert!(((coarse - fine) / fine).abs() <= 1e-3, "seed {seed}: {coarse} vs {fine}");
        // both tails together, against the Gaussian tail mass times e^b
        let tail = trapezoid(&pf, mu + 10.0 * sd, mu + 40.0 * sd, 10_000)
            + trapezoid(&pf, mu - 40.0 * sd, mu - 10.0 * sd, 10_000);
        let gauss_tail = statrs::function::erf::erfc(10.0 / std::f64::consts::SQRT_2);
        assert!(tail <= gauss_tail * b.exp() * 1.01, "seed {seed}: tail {tail}");
    }
}

#[test]
fn discrete_helper_conditional_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut simplex = |n: usize| {
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect::<Vec<f64>>()
    };
    let mut m = RelationalModel::new();
    m.add_domain("d3", Domain::discrete(["a", "b", "c"]).unwrap()).unwrap();
    m.add_domain("d2", Domain::discrete(["y", "n"]).unwrap()).unwrap();
    m.add_predicate(pred("p", &["u"], "d3")).unwrap();
    m.add_predicate(pred("q", &["u"], "d2")).unwrap();
    m.add_parfactor(Parfactor::new(
        "pq",
        Helper::Categorical { probs: simplex(6) },
        vec![],
        vec![AtomRef::new("p", ["U"]), AtomRef::new("q", ["U"])],
        vec![],
    ))
    .unwrap();
    m.add_parfactor(Parfactor::new(
        "p",
        Helper::Categorical { probs: simplex(3) },
        vec![],
        vec![AtomRef::new("p", ["U"])],
        vec![],
    ))
    .unwrap();
    let g = common::ground_plain(&m, &unit_universe());
    let p = g.var_index("p(o)").unwrap();
    let q = g.var_index("q(o)").unwrap();
    for qv in 0..2 {
        let mut frame = vec![0.0; 2];
        frame[q] = qv as f64;
        let Proposal1D::Table(t) = helper_conditional(&m, &g, p, &frame).unwrap() else { panic!() };
        let raw: Vec<f64> = (0..3)
            .map(|pv| {
                let (h0, h1) = (&m.parfactors[0].helper, &m.parfactors[1].helper);
                let Helper::Categorical { probs: a } = h0 else { panic!() };
                let Helper::Categorical { probs: b } = h1 else { panic!() };
                a[pv * 2 + qv] * b[pv]
            })
            .collect();
        let z: f64 = raw.iter().sum();
        for k in 0..3 {
            assert!((t[k] - raw[k] / z).abs() < 1e-14);
        }
    }
}

#[test]
fn helper_only_factor_equals_helper_density() {
    let mut m = RelationalModel::new();
    m.add_domain("r", Domain::unbounded()).unwrap();
    m.add_predicate(pred("x", &["u"], "r")).unwrap();
    m.add_predicate(pred("y", &["u"], "r")).unwrap();
    let h = Helper::LinearGaussian {
        slope: 1.0,
        intercept: 0.0,
        variance: 1.0,
    };
    m.add_parfactor(Parfactor::new("f", h, vec![], vec![AtomRef::new("x", ["U"]), AtomRef::new("y", ["U"])], vec![]))
        .unwrap();
    let v = factor_log_value(&m.parfactors[0], &[0.3, 0.3]).unwrap();
    assert!((v + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
}

#[test]
fn batched_and_single_evaluation_agree() {
    let doms = vec![Domain::continuous(0.0, 1.0).unwrap(), Domain::discrete(["a", "b", "c"]).unwrap()];
    let mut pot = NeuralPotential::new(FeatureMap::Identity, vec![7, 3], (-10.0, 10.0)).unwrap();
    pot.bind(&doms).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    pot.mlp_mut().init(&mut rng);
    let rows: Vec<f64> = (0..20).flat_map(|k| [k as f64 / 19.0, (k % 3) as f64]).collect();
    let ev = pot.eval_batch(&rows, 2, &doms).unwrap();
    let x: Array2<f64> = pot.encode(&rows, 2, &doms).unwrap();
    assert_eq!(x.dim(), (20, 4));
    for (k, r) in rows.chunks(2).enumerate() {
        let (v, _) = pot.log_potential(r, &doms).unwrap();
        assert!((v - ev.values[k]).abs() < 1e-14);
        assert!((manual_mlp(&pot, &common::manual_identity_features(r, &doms)) - v).abs() < 1e-13);
    }
}
