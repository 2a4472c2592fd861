//! Gibbs sampling and candidate-set ICM over a ground graph.

use rand::{Rng, RngCore};

use crate::conditional::{helper_conditional, log_b, log_potentials, normalize_log_weights};
use crate::error::{Error, Result};
use crate::potentials::factor_log_value;
use crate::registry::Registry;
use crate::relational::{Domain, Frame, GroundGraph, RelationalModel};

/// Compensated (Neumaier) sum.
pub fn stable_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

/// `Σ_f log φ_f(x_f)` over every ground factor.
pub fn joint_log_score(model: &RelationalModel, graph: &GroundGraph, frame: &[f64]) -> Result<f64> {
    let mut vals = Vec::with_capacity(graph.num_factors());
    for f in graph.factors() {
        vals.push(factor_log_value(&model.parfactors[f.parfactor], &f.values(frame))?);
    }
    Ok(stable_sum(vals))
}

/// Non-evidence variables in index order.
pub fn free_vars(graph: &GroundGraph) -> Vec<usize> {
    (0..graph.num_vars()).filter(|&i| graph.var(i).evidence.is_none()).collect()
}

/// Evidence where given, otherwise the first label, the interval midpoint, or 0.
pub fn default_frame(graph: &GroundGraph) -> Frame {
    graph
        .vars()
        .iter()
        .map(|v| match (v.evidence, &v.domain) {
            (Some(e), _) => e,
            (None, Domain::Discrete(_)) => 0.0,
            (None, &Domain::Continuous { lo, hi }) => match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo,
                (false, true) => hi,
                _ => 0.0,
            },
        })
        .collect()
}

fn clamp_evidence(graph: &GroundGraph, frame: &mut [f64]) {
    for (i, v) in graph.vars().iter().enumerate() {
        if let Some(e) = v.evidence {
            frame[i] = e;
        }
    }
}

fn draw_categorical(p: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &pk) in p.iter().enumerate() {
        acc += pk;
        if u < acc {
            return k;
        }
    }
    p.iter().rposition(|&pk| pk > 0.0).unwrap_or(0)
}

/// Draw `x_i` from `b_i^(1/T)`: exactly for discrete variables, by
/// sampling-importance-resampling over `n` proposal draws otherwise.
pub fn sample_conditional(
    model: &RelationalModel,
    graph: &GroundGraph,
    var: usize,
    frame: &[f64],
    n: usize,
    temperature: f64,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let what = || format!("conditional of `{}`", graph.var(var).id);
    match &graph.var(var).domain {
        Domain::Discrete(labels) => {
            let xs: Vec<f64> = (0..labels.len()).map(|v| v as f64).collect();
            let lb = log_b(model, graph, var, frame, &xs)?;
            let lw: Vec<f64> = lb.iter().map(|l| l / temperature).collect();
            let p = normalize_log_weights(&lw, &what())?;
            Ok(xs[draw_categorical(&p, rng)])
        }
        Domain::Continuous { .. } => {
            if n == 0 {
                return Err(Error::usage("resampling needs at least one proposal draw"));
            }
            let q = helper_conditional(model, graph, var, frame)?;
            let xs: Vec<f64> = (0..n).map(|_| q.sample(rng)).collect();
            let lw = if temperature == 1.0 {
                log_potentials(model, graph, var, frame, &xs)?
            } else {
                log_b(model, graph, var, frame, &xs)?
                    .iter()
                    .zip(&xs)
                    .map(|(l, &x)| l / temperature - q.log_density(x))
                    .collect()
            };
            let p = normalize_log_weights(&lw, &what())?;
            Ok(xs[draw_categorical(&p, rng)])
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GibbsConfig {
    pub sweeps: usize,
    pub burn_in: usize,
    /// Keep every `thin`-th sweep after burn-in.
    pub thin: usize,
    /// Proposal draws per continuous update.
    pub samples: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            sweeps: 1000,
            burn_in: 100,
            thin: 1,
            samples: 20,
        }
    }
}

/// One systematic-scan sweep over `vars` at temperature `temperature`.
pub fn gibbs_sweep(
    model: &RelationalModel,
    graph: &GroundGraph,
    frame: &mut [f64],
    vars: &[usize],
    samples: usize,
    temperature: f64,
    rng: &mut dyn RngCore,
) -> Result<()> {
    for &i in vars {
        frame[i] = sample_conditional(model, graph, i, frame, samples, temperature, rng)?;
    }
    Ok(())
}

/// Systematic-scan Gibbs chain. Evidence stays clamped; returns the kept states.
pub fn gibbs_chain(
    model: &RelationalModel,
    graph: &GroundGraph,
    init: &[f64],
    config: &GibbsConfig,
    rng: &mut dyn RngCore,
) -> Result<Vec<Frame>> {
    if config.thin == 0 {
        return Err(Error::usage("thinning interval must be positive"));
    }
    let mut frame = init.to_vec();
    clamp_evidence(graph, &mut frame);
    graph.check_frame(&frame)?;
    let vars = free_vars(graph);
    let mut out = Vec::new();
    for s in 0..config.sweeps {
        gibbs_sweep(model, graph, &mut frame, &vars, config.samples, 1.0, rng)?;
        if s >= config.burn_in && (s - config.burn_in) % config.thin == 0 {
            out.push(frame.clone());
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapInit {
    /// Draw each free variable from its helper conditional, in index order.
    HelperSample,
    /// Start from the frame handed to the solver.
    Data,
    Provided(Frame),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Anneal {
    pub t0: f64,
    pub sweeps: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapConfig {
    pub sweeps: usize,
    /// Proposal draws per variable per sweep.
    pub candidates: usize,
    pub init: MapInit,
    /// Annealed Gibbs warm start, geometric from `t0` down to 1.
    pub anneal: Option<Anneal>,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            sweeps: 10,
            candidates: 20,
            init: MapInit::Data,
            anneal: None,
        }
    }
}

impl MapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps < 1 || self.candidates < 2 {
            return Err(Error::usage("MAP needs sweeps >= 1 and candidates >= 2"));
        }
        if let Some(a) = self.anneal {
            if !(a.t0 >= 1.0 && a.t0.is_finite()) {
                return Err(Error::usage(format!("anneal start temperature must be >= 1, got {}", a.t0)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapResult {
    pub frame: Frame,
    pub score: f64,
    /// Joint score before the first ICM sweep and after each one.
    pub sweep_scores: Vec<f64>,
}

pub fn initial_frame(
    model: &RelationalModel,
    graph: &GroundGraph,
    start: &[f64],
    init: &MapInit,
    rng: &mut dyn RngCore,
) -> Result<Frame> {
    let mut frame = match init {
        MapInit::Provided(f) => f.clone(),
        _ => start.to_vec(),
    };
    if frame.len() != graph.num_vars() {
        return Err(Error::data(format!(
            "initial frame has {} values, graph has {} variables",
            frame.len(),
            graph.num_vars()
        )));
    }
    clamp_evidence(graph, &mut frame);
    if *init == MapInit::HelperSample {
        for i in free_vars(graph) {
            frame[i] = helper_conditional(model, graph, i, &frame)?.sample(rng);
        }
    }
    graph.check_frame(&frame)?;
    Ok(frame)
}

/// One ICM sweep: each free variable moves to the best of its candidates if that
/// beats the incumbent by more than a relative 1e-10. Returns the number of moves.
pub fn icm_sweep(
    model: &RelationalModel,
    graph: &GroundGraph,
    frame: &mut [f64],
    candidates: usize,
    rng: &mut dyn RngCore,
) -> Result<usize> {
    let mut moves = 0;
    for i in free_vars(graph) {
        let mut xs = vec![frame[i]];
        match &graph.var(i).domain {
            Domain::Discrete(labels) => xs.extend((0..labels.len()).map(|v| v as f64)),
            Domain::Continuous { .. } => {
                let q = helper_conditional(model, graph, i, frame)?;
                xs.push(q.mode());
                xs.extend((0..candidates).map(|_| q.sample(rng)));
            }
        }
        let lb = log_b(model, graph, i, frame, &xs)?;
        let mut best = 0;
        for k in 1..xs.len() {
            if lb[k] > lb[best] {
                best = k;
            }
        }
        let threshold = 1e-10 * (1.0 + lb[0].abs());
        if best != 0 && (lb[0] == f64::NEG_INFINITY || lb[best] - lb[0] > threshold) {
            frame[i] = xs[best];
            moves += 1;
        }
    }
    Ok(moves)
}

pub trait MapSolver {
    fn name(&self) -> &'static str;

    fn solve(
        &self,
        model: &RelationalModel,
        graph: &GroundGraph,
        start: &[f64],
        config: &MapConfig,
        rng: &mut dyn RngCore,
    ) -> Result<MapResult>;
}

fn run_icm(
    model: &RelationalModel,
    graph: &GroundGraph,
    mut frame: Frame,
    config: &MapConfig,
    rng: &mut dyn RngCore,
) -> Result<MapResult> {
    let mut scores = vec![joint_log_score(model, graph, &frame)?];
    for _ in 0..config.sweeps {
        let moves = icm_sweep(model, graph, &mut frame, config.candidates, rng)?;
        scores.push(joint_log_score(model, graph, &frame)?);
        if moves == 0 && graph.vars().iter().all(|v| v.domain.is_discrete()) {
            break;
        }
    }
    Ok(MapResult {
        score: *scores.last().unwrap(),
        frame,
        sweep_scores: scores,
    })
}

/// Plain candidate-set ICM.
pub struct Icm;

impl MapSolver for Icm {
    fn name(&self) -> &'static str {
        "icm"
    }

    fn solve(
        &self,
        model: &RelationalModel,
        graph: &GroundGraph,
        start: &[f64],
        config: &MapConfig,
        rng: &mut dyn RngCore,
    ) -> Result<MapResult> {
        config.validate()?;
        let frame = initial_frame(model, graph, start, &config.init, rng)?;
        run_icm(model, graph, frame, config, rng)
    }
}

/// Annealed Gibbs warm start followed by ICM.
pub struct AnnealIcm;

impl MapSolver for AnnealIcm {
    fn name(&self) -> &'static str {
        "anneal-icm"
    }

    fn solve(
        &self,
        model: &RelationalModel,
        graph: &GroundGraph,
        start: &[f64],
        config: &MapConfig,
        rng: &mut dyn RngCore,
    ) -> Result<MapResult> {
        config.validate()?;
        let anneal = config.anneal.unwrap_or(Anneal { t0: 4.0, sweeps: 10 });
        let mut frame = initial_frame(model, graph, start, &config.init, rng)?;
        let vars = free_vars(graph);
        for s in 0..anneal.sweeps {
            let frac = if anneal.sweeps > 1 {
                s as f64 / (anneal.sweeps - 1) as f64
            } else {
                1.0
            };
            let t = anneal.t0.powf(1.0 - frac);
            gibbs_sweep(model, graph, &mut frame, &vars, config.candidates, t, rng)?;
        }
        run_icm(model, graph, frame, config, rng)
    }
}

pub fn map_solvers() -> Registry<dyn MapSolver, ()> {
    let mut r: Registry<dyn MapSolver, ()> = Registry::new("MAP solver");
    r.register("icm", |_| Ok(Box::new(Icm)));
    r.register("anneal-icm", |_| Ok(Box::new(AnnealIcm)));
    r
}

/// MAP by ICM, with the annealed warm start when `config.anneal` is set.
pub fn map_estimate(
    model: &RelationalModel,
    graph: &GroundGraph,
    start: &[f64],
    config: &MapConfig,
    rng: &mut dyn RngCore,
) -> Result<MapResult> {
    let name = if config.anneal.is_some() { "anneal-icm" } else { "icm" };
    map_solvers().create(name, &())?.solve(model, graph, start, config, rng)
}
