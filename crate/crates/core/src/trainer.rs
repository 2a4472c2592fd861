//! Maximum pseudo-likelihood training.
//!
//! For each selected (frame `m`, variable `i`) the gradient contribution is
//! `Σ_{c ∋ i} [∇f_c(x_c^m) - Σ_n w_n ∇f_c(x_i^n, x_{c∖i}^m)]`. Clique rows for
//! every (m, i, c) are pooled into one matrix per parfactor so that each network
//! runs a single forward and backward pass per iteration.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::index;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conditional::{helper_conditional, normalize_log_weights, substituted_rows};
use crate::error::{Error, Result};
use crate::estimator::{estimators, ExpectationEstimator, PointSet};
use crate::optim::{optimizers, OptimizerParams};
use crate::potentials::{Gradients, NeuralEval, Potential, PotentialGrad};
use crate::relational::{sample_groundings_from, Frame, GroundGraph, RelationalModel};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Variables drawn per iteration.
    pub vars_per_iter: usize,
    /// Samples (or grid points) per expectation.
    pub samples: usize,
    /// Frames drawn per iteration.
    pub batch_size: usize,
    pub optimizer: String,
    pub optimizer_params: OptimizerParams,
    pub estimator: String,
    pub seed: u64,
    /// Predicates held as evidence; their variables are never conditioned on.
    pub evidence_predicates: BTreeSet<String>,
    /// A trace row averages this many iterations.
    pub trace_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 5000,
            vars_per_iter: 100,
            samples: 20,
            batch_size: 1,
            optimizer: "adam".into(),
            optimizer_params: OptimizerParams::default(),
            estimator: "importance".into(),
            seed: 0,
            evidence_predicates: BTreeSet::new(),
            trace_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::usage("samples per expectation must be at least 2"));
        }
        if self.vars_per_iter == 0 || self.batch_size == 0 {
            return Err(Error::usage("variables per iteration and batch size must be positive"));
        }
        if self.trace_every == 0 {
            return Err(Error::usage("trace interval must be positive"));
        }
        estimators().create(&self.estimator, &())?;
        optimizers().create(&self.optimizer, &self.optimizer_params)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    /// Mean estimated log conditional per (frame, variable) pair over the window.
    pub estimated_log_pl: f64,
    pub seconds: f64,
}

/// One (frame, variable) pair with its expectation points.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub frame: usize,
    pub var: usize,
    pub points: PointSet,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlBatch {
    pub entries: Vec<Entry>,
}

impl PlBatch {
    /// Rows each parfactor's matrix will hold: `Σ_{(m,i,c)} (1 + |points|)`.
    pub fn row_counts(&self, model: &RelationalModel, graph: &GroundGraph) -> Vec<usize> {
        let mut counts = vec![0; model.parfactors.len()];
        for e in &self.entries {
            for &f in graph.factors_of(e.var) {
                counts[graph.factor(f).parfactor] += 1 + e.points.len();
            }
        }
        counts
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlEstimate {
    /// `Σ_(m,i) [Σ_{c∋i} f_c(x^m) - log Ẑ_i]`.
    pub log_pl: f64,
    pub pairs: usize,
    /// Gradient of `log_pl / pairs`.
    pub gradients: Option<Gradients>,
    /// Smallest distance of any evaluated network row from a rectifier or clamp kink.
    pub kink_margin: f64,
}

/// Variables that may be conditioned on: not evidence in the graph and not of an evidence predicate.
pub fn free_pool(graph: &GroundGraph, evidence_predicates: &BTreeSet<String>) -> Vec<usize> {
    graph
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.evidence.is_none() && !evidence_predicates.contains(&v.predicate))
        .map(|(i, _)| i)
        .collect()
}

pub fn build_batch(
    model: &RelationalModel,
    graph: &GroundGraph,
    frames: &[Frame],
    pairs: &[(usize, usize)],
    estimator: &dyn ExpectationEstimator,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<PlBatch> {
    let mut entries = Vec::with_capacity(pairs.len());
    for &(m, i) in pairs {
        let q = helper_conditional(model, graph, i, &frames[m])?;
        let points = estimator
            .points(&graph.var(i).domain, &q, n, rng)
            .map_err(|e| e.context(format!("variable `{}`", graph.var(i).id)))?;
        entries.push(Entry {
            frame: m,
            var: i,
            points,
        });
    }
    Ok(PlBatch { entries })
}

struct Block {
    pf: usize,
    start: usize,
}

enum Forward {
    Neural(NeuralEval),
    Mln(Vec<f64>),
}

/// Evaluate the estimated log-pseudo-likelihood of a batch and optionally its gradient.
/// Deterministic in the batch, so two parameter settings can share samples.
pub fn evaluate_batch(
    model: &RelationalModel,
    graph: &GroundGraph,
    frames: &[Frame],
    batch: &PlBatch,
    with_grad: bool,
) -> Result<PlEstimate> {
    let npf = model.parfactors.len();
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); npf];
    let mut counts = vec![0usize; npf];
    let mut blocks: Vec<Vec<Block>> = Vec::with_capacity(batch.entries.len());
    for e in &batch.entries {
        let frame = &frames[e.frame];
        let mut bl = Vec::new();
        for &f in graph.factors_of(e.var) {
            let pf = graph.factor(f).parfactor;
            bl.push(Block { pf, start: counts[pf] });
            rows[pf].extend(graph.factor(f).values(frame));
            rows[pf].extend(substituted_rows(graph, f, e.var, frame, &e.points.xs));
            counts[pf] += 1 + e.points.len();
        }
        blocks.push(bl);
    }

    // one forward pass per potential
    let mut helper_vals: Vec<Vec<f64>> = Vec::with_capacity(npf);
    let mut forwards: Vec<Vec<Forward>> = Vec::with_capacity(npf);
    let mut pot_sum: Vec<Vec<f64>> = Vec::with_capacity(npf);
    let mut kink_margin = f64::INFINITY;
    for (p, pf) in model.parfactors.iter().enumerate() {
        let arity = pf.arity();
        let r = &rows[p];
        if counts[p] == 0 {
            helper_vals.push(Vec::new());
            forwards.push(Vec::new());
            pot_sum.push(Vec::new());
            continue;
        }
        let mut h = Vec::with_capacity(counts[p]);
        for row in r.chunks_exact(arity) {
            h.push(pf.helper.log_density(&pf.domains, row)?);
        }
        let mut sum = vec![0.0; counts[p]];
        let mut fw = Vec::with_capacity(pf.potentials.len());
        for pot in &pf.potentials {
            match pot {
                Potential::Neural(nn) => {
                    let ev = nn.eval_batch(r, arity, &pf.domains)?;
                    kink_margin = kink_margin.min(nn.kink_margin(&ev));
                    for (s, v) in sum.iter_mut().zip(&ev.values) {
                        *s += v;
                    }
                    fw.push(Forward::Neural(ev));
                }
                Potential::Mln(m) => {
                    let mut logic = Vec::with_capacity(counts[p]);
                    for (s, row) in sum.iter_mut().zip(r.chunks_exact(arity)) {
                        let l = m.weight_gradient(row)?;
                        *s += m.weight * l;
                        logic.push(l);
                    }
                    fw.push(Forward::Mln(logic));
                }
            }
        }
        helper_vals.push(h);
        forwards.push(fw);
        pot_sum.push(sum);
    }

    let mut upstream: Vec<Vec<f64>> = counts.iter().map(|&c| vec![0.0; c]).collect();
    let mut log_pl = 0.0;
    for (e, bl) in batch.entries.iter().zip(&blocks) {
        let np = e.points.len();
        let mut data = 0.0;
        let mut log_b = vec![0.0; np];
        let mut log_pot = vec![0.0; np];
        for b in bl {
            let (h, s) = (&helper_vals[b.pf], &pot_sum[b.pf]);
            data += h[b.start] + s[b.start];
            for n in 0..np {
                let r = b.start + 1 + n;
                log_b[n] += h[r] + s[r];
                log_pot[n] += s[r];
            }
        }
        let what = || format!("conditional of `{}` in frame {}", graph.var(e.var).id, e.frame);
        if data.is_nan() || log_b.iter().any(|v| v.is_nan()) {
            return Err(Error::numeric(format!("NaN log-potential in {}", what())));
        }
        let log_z = e.points.log_normalizer(&log_b);
        if log_z == f64::NEG_INFINITY {
            return Err(Error::numeric(format!("zero normalizer estimate for {}", what())));
        }
        log_pl += data - log_z;
        if with_grad {
            let w = normalize_log_weights(&e.points.log_weights(&log_b, &log_pot), &what())?;
            for b in bl {
                let u = &mut upstream[b.pf];
                u[b.start] += 1.0;
                for (n, wn) in w.iter().enumerate() {
                    u[b.start + 1 + n] -= wn;
                }
            }
        }
    }

    let pairs = batch.entries.len();
    let gradients = if with_grad {
        let mut g = Gradients::zeros_like(model);
        for (p, pf) in model.parfactors.iter().enumerate() {
            if counts[p] == 0 {
                continue;
            }
            for (k, (pot, fw)) in pf.potentials.iter().zip(&forwards[p]).enumerate() {
                g.parfactors[p][k] = match (pot, fw) {
                    (Potential::Neural(nn), Forward::Neural(ev)) => PotentialGrad::Neural(nn.backward(ev, &upstream[p])?),
                    (Potential::Mln(_), Forward::Mln(logic)) => {
                        PotentialGrad::Mln(upstream[p].iter().zip(logic).map(|(u, l)| u * l).sum())
                    }
                    _ => unreachable!("forward results out of step with potentials"),
                };
            }
        }
        if pairs > 0 {
            g.scale(1.0 / pairs as f64);
        }
        if let Some((p, k)) = g.first_non_finite() {
            return Err(Error::numeric(format!(
                "non-finite gradient for potential {k} of parfactor `{}`",
                model.parfactors[p].id
            )));
        }
        Some(g)
    } else {
        None
    };
    Ok(PlEstimate {
        log_pl,
        pairs,
        gradients,
        kink_margin,
    })
}

/// Build a batch for `pairs` and evaluate it with gradients.
#[allow(clippy::too_many_arguments)]
pub fn pmle_gradient(
    model: &RelationalModel,
    graph: &GroundGraph,
    frames: &[Frame],
    pairs: &[(usize, usize)],
    estimator: &dyn ExpectationEstimator,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<PlEstimate> {
    let batch = build_batch(model, graph, frames, pairs, estimator, n, rng)?;
    evaluate_batch(model, graph, frames, &batch, true)
}

/// Estimated log-pseudo-likelihood of one frame over every non-evidence variable.
/// Discrete variables are enumerated; continuous ones use `n` proposal draws from a
/// generator seeded with `seed`.
pub fn log_pseudolikelihood(
    model: &RelationalModel,
    graph: &GroundGraph,
    frame: &[f64],
    n: usize,
    seed: u64,
) -> Result<f64> {
    let frames = [frame.to_vec()];
    let pairs: Vec<(usize, usize)> = free_pool(graph, &BTreeSet::new()).into_iter().map(|i| (0, i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch = build_batch(model, graph, &frames, &pairs, &crate::estimator::Importance, n, &mut rng)?;
    Ok(evaluate_batch(model, graph, &frames, &batch, false)?.log_pl)
}

/// Run the training loop, updating `model`'s potential parameters in place.
/// Helpers must already be fitted; they stay fixed.
pub fn train(
    model: &mut RelationalModel,
    graph: &GroundGraph,
    frames: &[Frame],
    config: &TrainConfig,
) -> Result<Vec<TraceRow>> {
    config.validate()?;
    if frames.is_empty() {
        return Err(Error::data("no training frames"));
    }
    for (m, f) in frames.iter().enumerate() {
        graph.check_frame(f).map_err(|e| e.context(format!("frame {m}")))?;
    }
    if let Some(pf) = model.parfactors.iter().find(|pf| !pf.helper.is_fitted()) {
        return Err(Error::model(format!("helper of `{}` is not fitted", pf.id)));
    }
    let pool = free_pool(graph, &config.evidence_predicates);
    if pool.is_empty() && config.iterations > 0 {
        return Err(Error::usage("no free variables to train on"));
    }
    let estimator = estimators().create(&config.estimator, &())?;
    let mut optimizer = optimizers().create(&config.optimizer, &config.optimizer_params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = model.params();
    let started = Instant::now();
    let mut trace = Vec::new();
    let (mut window_sum, mut window_n) = (0.0, 0usize);

    for it in 0..config.iterations {
        let frame_ids: Vec<usize> = if config.batch_size >= frames.len() {
            (0..frames.len()).collect()
        } else {
            let mut v = index::sample(&mut rng, frames.len(), config.batch_size).into_vec();
            v.sort_unstable();
            v
        };
        let (vars, _) = sample_groundings_from(graph, &pool, config.vars_per_iter, &mut rng);
        let pairs: Vec<(usize, usize)> = frame_ids
            .iter()
            .flat_map(|&m| vars.iter().map(move |&i| (m, i)))
            .collect();
        let est = pmle_gradient(model, graph, frames, &pairs, estimator.as_ref(), config.samples, &mut rng)
            .map_err(|e| e.context(format!("iteration {it}")))?;
        let grad = est.gradients.as_ref().expect("gradient requested").flatten();
        optimizer.step(&mut params, &grad);
        model.set_params(&params)?;

        window_sum += est.log_pl / est.pairs.max(1) as f64;
        window_n += 1;
        if (it + 1) % config.trace_every == 0 || it + 1 == config.iterations {
            trace.push(TraceRow {
                iteration: it + 1,
                estimated_log_pl: window_sum / window_n as f64,
                seconds: started.elapsed().as_secs_f64(),
            });
            window_sum = 0.0;
            window_n = 0;
        }
    }
    Ok(trace)
}

/// Trace as CSV text with header `iteration,estimated_log_pl,seconds`.
pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut s = String::from("iteration,estimated_log_pl,seconds\n");
    for r in trace {
        s.push_str(&format!("{},{},{:.3}\n", r.iteration, r.estimated_log_pl, r.seconds));
    }
    s
}
