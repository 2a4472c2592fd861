//! Desk-scale experiment drivers shared by the binary and the acceptance tests.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rnmrf_core::estimator::estimators;
use rnmrf_core::inference::{map_estimate, MapConfig, MapInit};
use rnmrf_core::optim::OptimizerParams;
use rnmrf_core::relational::atom_instance_id;
use rnmrf_core::trainer::{build_batch, evaluate_batch, train, TrainConfig};
use rnmrf_core::{ground, Error, Frame, GroundGraph, RelationalModel, Result, Universe};

use crate::data::{get_image, image_evidence, image_universe, put_image, Gray};
use crate::dsl::parse_model;
use crate::metrics::{accuracy, f1_per_class, mean_image_errors, mse, stratified_folds};
use crate::synth::{
    denoise_images, denoise_model_text, segment_frame, segment_map, segment_model_text, segment_universe, SegmentMap,
};

fn no_evidence() -> BTreeMap<String, f64> {
    BTreeMap::new()
}

/// Fit helpers to `frames`, Glorot-initialize the networks and train.
pub fn fit(model: &mut RelationalModel, graph: &GroundGraph, frames: &[Frame], cfg: &TrainConfig) -> Result<()> {
    model.fit_helpers_from(graph, frames)?;
    model.init_params(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed));
    train(model, graph, frames, cfg)?;
    Ok(())
}

fn train_config(iterations: usize, samples: usize, vars: usize, batch: usize, lr: f64, seed: u64) -> TrainConfig {
    TrainConfig {
        iterations,
        vars_per_iter: vars,
        samples,
        batch_size: batch,
        optimizer_params: OptimizerParams {
            lr,
            ..OptimizerParams::default()
        },
        seed,
        ..TrainConfig::default()
    }
}

#[derive(Clone, Debug)]
pub struct DenoiseConfig {
    pub size: usize,
    pub train_images: usize,
    pub test_images: usize,
    pub noise_var: f64,
    pub hidden: Vec<usize>,
    pub iterations: usize,
    pub samples: usize,
    pub vars_per_iter: usize,
    pub lr: f64,
    pub map: MapConfig,
    pub seed: u64,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            size: 16,
            train_images: 3,
            test_images: 3,
            noise_var: 0.3,
            hidden: vec![16, 8],
            iterations: 1500,
            samples: 20,
            vars_per_iter: 64,
            lr: 0.01,
            map: MapConfig {
                sweeps: 10,
                candidates: 60,
                init: MapInit::Data,
                anneal: None,
            },
            seed: 0,
        }
    }
}

/// Mean per-image `(ℓ1, ℓ2)` of each method on the test images.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoiseReport {
    pub rn_mrf: (f64, f64),
    pub gaussian_mrf: (f64, f64),
    pub noisy: (f64, f64),
}

/// MAP restoration of each noisy image, starting from the noisy pixels.
pub fn restore(model: &RelationalModel, noisy: &Gray, map: &MapConfig, seed: u64) -> Result<Gray> {
    let u = image_universe(noisy.height, noisy.width);
    let g = ground(model, &u, &image_evidence(noisy))?;
    let mut start = vec![0.0; g.num_vars()];
    put_image(&g, &mut start, "obs", noisy)?;
    put_image(&g, &mut start, "val", noisy)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = map_estimate(model, &g, &start, map, &mut rng)?;
    get_image(&g, &r.frame, "val", noisy.height, noisy.width)
}

/// Train the network model and the helper-only Gaussian model on the first
/// `train_images`, then compare MAP restorations on the rest.
pub fn denoise_experiment(cfg: &DenoiseConfig) -> Result<DenoiseReport> {
    let imgs = denoise_images(cfg.size, cfg.train_images + cfg.test_images, cfg.noise_var, cfg.seed)?;
    let (train_set, test_set) = imgs.split_at(cfg.train_images);
    let mut rn = parse_model(&denoise_model_text("LG", &cfg.hidden, true))?;
    let mut gm = parse_model(&denoise_model_text("LG", &[], false))?;
    let u = image_universe(cfg.size, cfg.size);
    let g = ground(&rn, &u, &no_evidence())?;
    let mut frames = Vec::new();
    for im in train_set {
        let mut f = vec![0.0; g.num_vars()];
        put_image(&g, &mut f, "obs", &im.noisy)?;
        put_image(&g, &mut f, "val", &im.clean)?;
        frames.push(f);
    }
    let mut tc = train_config(cfg.iterations, cfg.samples, cfg.vars_per_iter, cfg.train_images, cfg.lr, cfg.seed);
    tc.evidence_predicates = BTreeSet::from(["obs".to_string()]);
    fit(&mut rn, &g, &frames, &tc)?;
    let gg = ground(&gm, &u, &no_evidence())?;
    gm.fit_helpers_from(&gg, &frames)?;

    let mut rn_out = Vec::new();
    let mut gm_out = Vec::new();
    for (k, im) in test_set.iter().enumerate() {
        let s = cfg.seed.wrapping_mul(1000).wrapping_add(k as u64);
        rn_out.push(restore(&rn, &im.noisy, &cfg.map, s)?);
        gm_out.push(restore(&gm, &im.noisy, &cfg.map, s)?);
    }
    let errs = |out: &[Gray]| {
        mean_image_errors(
            out.iter()
                .zip(test_set)
                .map(|(o, t)| (o.pixels.as_slice(), t.clean.pixels.as_slice())),
        )
    };
    Ok(DenoiseReport {
        rn_mrf: errs(&rn_out),
        gaussian_mrf: errs(&gm_out),
        noisy: mean_image_errors(
            test_set
                .iter()
                .map(|t| (t.noisy.pixels.as_slice(), t.clean.pixels.as_slice())),
        ),
    })
}

pub const IRIS_CSV: &str = include_str!("../data/iris.csv");
pub const IRIS_CLASSES: [&str; 3] = ["setosa", "versicolor", "virginica"];
const IRIS_ATTRS: [&str; 4] = ["sl", "sw", "pl", "pw"];

/// Rows of `(four measurements, class index)`.
pub fn parse_iris(text: &str) -> Result<Vec<([f64; 4], usize)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::data(format!("iris record {}: {e}", i + 1)))?;
        if rec.len() != 5 {
            return Err(Error::data(format!("iris record {} has {} fields", i + 1, rec.len())));
        }
        let mut x = [0.0; 4];
        for (k, v) in x.iter_mut().enumerate() {
            *v = rec[k]
                .parse()
                .map_err(|_| Error::data(format!("iris record {}: `{}` is not a number", i + 1, &rec[k])))?;
        }
        let class = IRIS_CLASSES
            .iter()
            .position(|c| *c == &rec[4])
            .ok_or_else(|| Error::data(format!("iris record {}: unknown class `{}`", i + 1, &rec[4])))?;
        rows.push((x, class));
    }
    Ok(rows)
}

pub fn iris_model_text(hidden: &[usize]) -> String {
    let layers: Vec<String> = hidden.iter().map(ToString::to_string).collect();
    format!(
        "domain cm continuous [0,8]\n\
         domain species discrete {{setosa,versicolor,virginica}}\n\
         predicate sl(F:flower) -> cm\n\
         predicate sw(F:flower) -> cm\n\
         predicate pl(F:flower) -> cm\n\
         predicate pw(F:flower) -> cm\n\
         predicate class(F:flower) -> species\n\
         parfactor joint: helper=CG potential=NN(layers=[{}],clamp=[-10,10],fm=identity) atoms=[sl(F),sw(F),pl(F),pw(F),class(F)] constraint=none\n",
        layers.join(",")
    )
}

#[derive(Clone, Debug)]
pub struct IrisConfig {
    pub hidden: Vec<usize>,
    pub iterations: usize,
    pub samples: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub folds: usize,
    /// Candidates per ICM step when predicting petal width.
    pub candidates: usize,
    pub seed: u64,
}

impl Default for IrisConfig {
    fn default() -> Self {
        IrisConfig {
            hidden: vec![16, 8],
            iterations: 1000,
            samples: 30,
            batch_size: 16,
            lr: 0.005,
            folds: 5,
            candidates: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrisReport {
    pub accuracy: f64,
    pub f1: Vec<f64>,
    pub petal_width_mse: f64,
}

fn iris_frame(g: &GroundGraph, x: &[f64; 4], class: usize) -> Frame {
    let mut f = vec![0.0; g.num_vars()];
    let arg = ["f".to_string()];
    for (k, a) in IRIS_ATTRS.iter().enumerate() {
        f[g.var_index(&atom_instance_id(a, &arg)).unwrap()] = x[k];
    }
    f[g.var_index(&atom_instance_id("class", &arg)).unwrap()] = class as f64;
    f
}

/// MAP value of `target` given every other attribute of one flower.
fn predict_one(
    model: &RelationalModel,
    u: &Universe,
    x: &[f64; 4],
    class: usize,
    target: &str,
    map: &MapConfig,
    seed: u64,
) -> Result<f64> {
    let arg = ["f".to_string()];
    let mut ev = BTreeMap::new();
    for (k, a) in IRIS_ATTRS.iter().enumerate() {
        ev.insert(atom_instance_id(a, &arg), x[k]);
    }
    ev.insert(atom_instance_id("class", &arg), class as f64);
    let tid = atom_instance_id(target, &arg);
    ev.remove(&tid);
    let g = ground(model, u, &ev)?;
    let mut start = iris_frame(&g, x, class);
    let t = g.var_index(&tid).unwrap();
    start[t] = rnmrf_core::inference::default_frame(&g)[t];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(map_estimate(model, &g, &start, map, &mut rng)?.frame[t])
}

/// Stratified k-fold cross-validation of class and petal-width prediction.
pub fn iris_experiment(rows: &[([f64; 4], usize)], cfg: &IrisConfig) -> Result<IrisReport> {
    let labels: Vec<usize> = rows.iter().map(|r| r.1).collect();
    let folds = stratified_folds(&labels, cfg.folds, cfg.seed);
    let u = Universe::new().with_population("flower", ["f"]);
    let (mut pred, mut truth) = (Vec::new(), Vec::new());
    let (mut pw_pred, mut pw_truth) = (Vec::new(), Vec::new());
    let map = MapConfig {
        sweeps: 3,
        candidates: cfg.candidates,
        init: MapInit::Data,
        anneal: None,
    };
    for k in 0..cfg.folds {
        let mut model = parse_model(&iris_model_text(&cfg.hidden))?;
        let g = ground(&model, &u, &no_evidence())?;
        let frames: Vec<Frame> = rows
            .iter()
            .zip(&folds)
            .filter(|(_, &f)| f != k)
            .map(|(r, _)| iris_frame(&g, &r.0, r.1))
            .collect();
        let tc = train_config(cfg.iterations, cfg.samples, 5, cfg.batch_size, cfg.lr, cfg.seed + k as u64);
        fit(&mut model, &g, &frames, &tc).map_err(|e| e.context(format!("fold {k}")))?;
        for (i, (r, _)) in rows.iter().zip(&folds).enumerate().filter(|(_, (_, &f))| f == k) {
            let s = cfg.seed.wrapping_mul(7919).wrapping_add(i as u64);
            pred.push(predict_one(&model, &u, &r.0, r.1, "class", &map, s)? as usize);
            truth.push(r.1);
            pw_pred.push(predict_one(&model, &u, &r.0, r.1, "pw", &map, s)?);
            pw_truth.push(r.0[3]);
        }
    }
    Ok(IrisReport {
        accuracy: accuracy(&pred, &truth),
        f1: f1_per_class(&pred, &truth, 3),
        petal_width_mse: mse(&pw_pred, &pw_truth),
    })
}

#[derive(Clone, Debug)]
pub struct SegmentConfig {
    pub train_segments: usize,
    pub test_segments: usize,
    pub edge_rate: f64,
    pub hidden: Vec<usize>,
    pub iterations: usize,
    pub vars_per_iter: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            train_segments: 80,
            test_segments: 200,
            edge_rate: 0.05,
            hidden: vec![16, 8],
            iterations: 800,
            vars_per_iter: 20,
            lr: 0.02,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentReport {
    pub accuracy_rules: f64,
    pub accuracy_plain: f64,
    pub f1_rules: Vec<f64>,
    pub f1_plain: Vec<f64>,
}

/// Train conditionally on `train` (types given lengths, depths and angles) and
/// return the MAP types of `test`.
pub fn segment_predict(model: &mut RelationalModel, train_map: &SegmentMap, test_map: &SegmentMap, cfg: &SegmentConfig) -> Result<Vec<usize>> {
    let g = ground(model, &segment_universe(train_map.len()), &no_evidence())?;
    let frames = vec![segment_frame(&g, train_map)?];
    let mut tc = train_config(cfg.iterations, 2, cfg.vars_per_iter, 1, cfg.lr, cfg.seed);
    tc.evidence_predicates = ["len", "dep", "ang"].iter().map(|s| s.to_string()).collect();
    fit(model, &g, &frames, &tc)?;

    let mut ev = BTreeMap::new();
    for i in 0..test_map.len() {
        let s = [crate::synth::segment_id(i)];
        ev.insert(atom_instance_id("len", &s), test_map.length[i]);
        ev.insert(atom_instance_id("dep", &s), test_map.depth[i]);
        ev.insert(atom_instance_id("ang", &s), test_map.angle[i]);
    }
    let tg = ground(model, &segment_universe(test_map.len()), &ev)?;
    let start = rnmrf_core::inference::default_frame(&tg);
    let map = MapConfig {
        sweeps: 10,
        ..MapConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let r = map_estimate(model, &tg, &start, &map, &mut rng)?;
    (0..test_map.len())
        .map(|i| {
            let id = atom_instance_id("type", &[crate::synth::segment_id(i)]);
            tg.var_index(&id)
                .map(|v| r.frame[v] as usize)
                .ok_or_else(|| Error::data(format!("no variable `{id}`")))
        })
        .collect()
}

/// Accuracy and F1 with and without the logic-rule parfactors on one seed.
pub fn segment_experiment(cfg: &SegmentConfig) -> Result<SegmentReport> {
    let train_map = segment_map(cfg.train_segments, cfg.edge_rate, cfg.seed.wrapping_mul(2).wrapping_add(1));
    let test_map = segment_map(cfg.test_segments, cfg.edge_rate, cfg.seed.wrapping_mul(2).wrapping_add(2));
    let mut with = parse_model(&segment_model_text(&cfg.hidden, true))?;
    let mut without = parse_model(&segment_model_text(&cfg.hidden, false))?;
    let p_rules = segment_predict(&mut with, &train_map, &test_map, cfg)?;
    let p_plain = segment_predict(&mut without, &train_map, &test_map, cfg)?;
    Ok(SegmentReport {
        accuracy_rules: accuracy(&p_rules, &test_map.kind),
        accuracy_plain: accuracy(&p_plain, &test_map.kind),
        f1_rules: f1_per_class(&p_rules, &test_map.kind, 3),
        f1_plain: f1_per_class(&p_plain, &test_map.kind, 3),
    })
}

pub const GRADCHECK_MODEL: &str = "\
domain ka discrete {a0,a1,a2}
domain kb discrete {b0,b1}
domain unit continuous [0,1]
predicate a(X:obj) -> ka
predicate b(X:obj) -> kb
predicate c(X:obj) -> unit
parfactor ac: helper=CG potential=NN(layers=[6,4],clamp=[-10,10],fm=identity) atoms=[a(X),c(X)] constraint=none
parfactor bc: helper=CG potential=NN(layers=[6,4],clamp=[-10,10],fm=identity) atoms=[b(X),c(X)] constraint=none
parfactor ab: helper=Categorical potential=NN(layers=[4,4],clamp=[-10,10],fm=identity) atoms=[a(X),b(X)] constraint=none
";

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub params: usize,
    pub max_rel_error: f64,
    /// Batches discarded for lying within `1e-4` of a rectifier or clamp kink.
    pub redraws: usize,
}

/// Compare the analytic pseudo-likelihood gradient of the three-variable hybrid
/// model with central differences (`eps = 1e-5`) on a fixed batch of points.
pub fn gradcheck(estimator: &str, seed: u64) -> Result<GradcheckReport> {
    let mut m = parse_model(GRADCHECK_MODEL)?;
    let u = Universe::new().with_population("obj", ["o"]);
    let g = ground(&m, &u, &no_evidence())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames: Vec<Frame> = (0..24)
        .map(|i| {
            let mut f = vec![0.0; g.num_vars()];
            let a = (i % 3) as f64;
            f[g.var_index("a(o)").unwrap()] = a;
            f[g.var_index("b(o)").unwrap()] = ((i / 3) % 2) as f64;
            f[g.var_index("c(o)").unwrap()] = (0.2 + 0.25 * a + 0.2 * rng.random::<f64>()).min(1.0);
            f
        })
        .collect();
    m.fit_helpers_from(&g, &frames)?;
    m.init_params(&mut rng);
    // nonzero biases keep dead hidden units off their kinks
    let jitter: Vec<f64> = m
        .params()
        .iter()
        .map(|p| p + 0.3 * rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    m.set_params(&jitter)?;
    let est = estimators().create(estimator, &())?;
    let pairs: Vec<(usize, usize)> = (0..8).flat_map(|f| (0..g.num_vars()).map(move |v| (f, v))).collect();
    let mut redraws = 0;
    let (batch, e) = loop {
        let batch = build_batch(&m, &g, &frames, &pairs, est.as_ref(), 30, &mut rng)?;
        let e = evaluate_batch(&m, &g, &frames, &batch, true)?;
        if e.kink_margin > 1e-4 {
            break (batch, e);
        }
        redraws += 1;
        if redraws > 100 {
            return Err(Error::estimator("could not draw a batch away from network kinks"));
        }
    };
    let analytic = e.gradients.expect("gradient requested").flatten();
    let theta = m.params();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..theta.len() {
        let mut t = theta.clone();
        t[k] += eps;
        m.set_params(&t)?;
        let up = evaluate_batch(&m, &g, &frames, &batch, false)?;
        t[k] -= 2.0 * eps;
        m.set_params(&t)?;
        let dn = evaluate_batch(&m, &g, &frames, &batch, false)?;
        let fd = (up.log_pl - dn.log_pl) / (2.0 * eps) / up.pairs as f64;
        let rel = (fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(GradcheckReport {
        params: theta.len(),
        max_rel_error: worst,
        redraws,
    })
}
