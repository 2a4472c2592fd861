//! Potential families and helper distributions.
//!
//! A factor's log-value is the helper log-density plus the log-values of its
//! potentials. Neural log-potentials are clamped network outputs; MLN
//! log-potentials are `w · logic(x)`.

mod features;
mod helper;
mod mlp;
mod mln;
mod proposal;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

pub use features::{FeatureMap, FeatureTerm};
pub use helper::{
    fit_gaussian, normal_log_pdf, GaussianParams, Helper, HelperFamily, SlotFactor, MAX_FULL_COV_DIM,
    VARIANCE_FLOOR,
};
pub use mlp::{Dense, Mlp, MlpCache, MlpGrad};
pub use mln::{CmpOp, Formula, MlnPotential, Operand};
pub use proposal::{log_sum_exp, Proposal1D};

use crate::error::{Error, Result};
use crate::relational::{Domain, Frame, GroundGraph, Parfactor, RelationalModel};

/// Clamp bounds used when a model does not give any.
pub const DEFAULT_CLAMP: (f64, f64) = (-10.0, 10.0);

/// Which branch of the clamp produced a neural log-potential.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    Open,
    ClampedHigh,
    ClampedLow,
}

/// `clamp(nn(featuremap(x)), a, b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralPotential {
    pub features: FeatureMap,
    pub hidden: Vec<usize>,
    pub clamp: (f64, f64),
    mlp: Mlp,
    sized: bool,
}

/// Forward results for a batch of clique assignments.
#[derive(Clone, Debug)]
pub struct NeuralEval {
    pub values: Vec<f64>,
    /// Unclamped network outputs.
    pub raw: Vec<f64>,
    pub gates: Vec<Gate>,
    cache: MlpCache,
}

fn check_clamp(clamp: (f64, f64)) -> Result<()> {
    if !(clamp.0 < clamp.1) {
        return Err(Error::model(format!(
            "clamp bounds must satisfy a < b, got [{}, {}]",
            clamp.0, clamp.1
        )));
    }
    Ok(())
}

impl NeuralPotential {
    /// Network of the given hidden sizes; its input width is fixed when bound to a clique.
    pub fn new(features: FeatureMap, hidden: Vec<usize>, clamp: (f64, f64)) -> Result<Self> {
        check_clamp(clamp)?;
        let mut sizes = vec![1];
        sizes.extend(&hidden);
        sizes.push(1);
        Ok(NeuralPotential {
            features,
            hidden,
            clamp,
            mlp: Mlp::zeros(&sizes)?,
            sized: false,
        })
    }

    pub fn with_mlp(features: FeatureMap, mlp: Mlp, clamp: (f64, f64)) -> Result<Self> {
        check_clamp(clamp)?;
        let sizes = mlp.sizes();
        Ok(NeuralPotential {
            features,
            hidden: sizes[1..sizes.len() - 1].to_vec(),
            clamp,
            mlp,
            sized: true,
        })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn bind(&mut self, domains: &[Domain]) -> Result<()> {
        let dim = self.features.dim(domains)?;
        if self.mlp.input_dim() != dim {
            if self.sized {
                return Err(Error::model(format!(
                    "network takes {} inputs but the feature map `{}` yields {dim}",
                    self.mlp.input_dim(),
                    self.features
                )));
            }
            let mut sizes = vec![dim];
            sizes.extend(&self.hidden);
            sizes.push(1);
            self.mlp = Mlp::zeros(&sizes)?;
        }
        self.sized = true;
        Ok(())
    }

    fn gate(&self, raw: f64) -> (f64, Gate) {
        let (a, b) = self.clamp;
        if raw > b {
            (b, Gate::ClampedHigh)
        } else if raw < a {
            (a, Gate::ClampedLow)
        } else {
            (raw, Gate::Open)
        }
    }

    pub fn encode(&self, rows: &[f64], arity: usize, domains: &[Domain]) -> Result<Array2<f64>> {
        let n = if arity == 0 { 0 } else { rows.len() / arity };
        let dim = self.mlp.input_dim();
        let mut buf = Vec::with_capacity(n * dim);
        for r in rows.chunks_exact(arity) {
            self.features.encode_into(r, domains, &mut buf);
        }
        Array2::from_shape_vec((n, dim), buf).map_err(|e| Error::usage(e.to_string()))
    }

    /// Clamped log-potential of one clique assignment.
    pub fn log_potential(&self, values: &[f64], domains: &[Domain]) -> Result<(f64, Gate)> {
        let mut buf = Vec::with_capacity(self.mlp.input_dim());
        self.features.encode_into(values, domains, &mut buf);
        let (raw, _) = self.mlp.forward(&buf)?;
        Ok(self.gate(raw))
    }

    /// One forward pass over a flat `rows × arity` matrix of clique assignments.
    pub fn eval_batch(&self, rows: &[f64], arity: usize, domains: &[Domain]) -> Result<NeuralEval> {
        let x = self.encode(rows, arity, domains)?;
        let (raw, cache) = self.mlp.forward_batch(x.view())?;
        let (values, gates) = raw.iter().map(|&r| self.gate(r)).unzip();
        Ok(NeuralEval {
            values,
            raw: raw.to_vec(),
            gates,
            cache,
        })
    }

    /// Distance of the evaluated rows from the nearest non-differentiable point:
    /// a hidden rectifier at zero or the raw output at a clamp bound.
    pub fn kink_margin(&self, eval: &NeuralEval) -> f64 {
        let (a, b) = self.clamp;
        eval.raw
            .iter()
            .fold(eval.cache.min_abs_preactivation(), |m, r| m.min((r - a).abs()).min((r - b).abs()))
    }

    /// Parameter gradient of `Σ_r upstream[r] · value[r]`; gated rows contribute nothing.
    pub fn backward(&self, eval: &NeuralEval, upstream: &[f64]) -> Result<MlpGrad> {
        if upstream.len() != eval.gates.len() {
            return Err(Error::usage("upstream length does not match evaluated rows"));
        }
        let u: Array1<f64> = upstream
            .iter()
            .zip(&eval.gates)
            .map(|(&u, &g)| if g == Gate::Open { u } else { 0.0 })
            .collect();
        self.mlp.backward(&eval.cache, u.view())
    }

    /// Parameter gradient of the clamped log-potential at one assignment.
    pub fn gradient(&self, values: &[f64], domains: &[Domain]) -> Result<MlpGrad> {
        let eval = self.eval_batch(values, values.len(), domains)?;
        self.backward(&eval, &[1.0])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    Neural(NeuralPotential),
    Mln(MlnPotential),
}

impl Potential {
    pub fn bind(&mut self, names: &[Vec<String>], domains: &[Domain]) -> Result<()> {
        match self {
            Potential::Neural(n) => n.bind(domains),
            Potential::Mln(m) => m.bind(names, domains),
        }
    }

    pub fn log_value(&self, values: &[f64], domains: &[Domain]) -> Result<f64> {
        match self {
            Potential::Neural(n) => n.log_potential(values, domains).map(|(v, _)| v),
            Potential::Mln(m) => m.log_potential(values),
        }
    }

    /// Log-values over a flat `rows × arity` matrix of clique assignments.
    pub fn log_values_batch(&self, rows: &[f64], arity: usize, domains: &[Domain]) -> Result<Vec<f64>> {
        match self {
            Potential::Neural(n) => n.eval_batch(rows, arity, domains).map(|e| e.values),
            Potential::Mln(m) => rows.chunks_exact(arity).map(|r| m.log_potential(r)).collect(),
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            Potential::Neural(n) => n.mlp.num_params(),
            Potential::Mln(_) => 1,
        }
    }

    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        match self {
            Potential::Neural(n) => n.mlp.flatten_into(out),
            Potential::Mln(m) => out.push(m.weight),
        }
    }

    pub fn load_flat(&mut self, params: &[f64]) -> Result<usize> {
        match self {
            Potential::Neural(n) => n.mlp.load_flat(params),
            Potential::Mln(m) => {
                m.weight = *params
                    .first()
                    .ok_or_else(|| Error::usage("missing MLN weight"))?;
                Ok(1)
            }
        }
    }

    pub fn zero_grad(&self) -> PotentialGrad {
        match self {
            Potential::Neural(n) => PotentialGrad::Neural(MlpGrad::zeros_like(&n.mlp)),
            Potential::Mln(_) => PotentialGrad::Mln(0.0),
        }
    }
}

/// Helper log-density plus every potential's log-value.
pub fn factor_log_value(pf: &Parfactor, values: &[f64]) -> Result<f64> {
    let mut v = pf.helper.log_density(&pf.domains, values)?;
    for p in &pf.potentials {
        v += p.log_value(values, &pf.domains)?;
    }
    Ok(v)
}

/// Sum of the potentials' log-values, without the helper.
pub fn potential_log_value(pf: &Parfactor, values: &[f64]) -> Result<f64> {
    let mut v = 0.0;
    for p in &pf.potentials {
        v += p.log_value(values, &pf.domains)?;
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq)]
pub enum PotentialGrad {
    Neural(MlpGrad),
    Mln(f64),
}

/// Gradient buffers for every potential of a model, indexed `[parfactor][potential]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub parfactors: Vec<Vec<PotentialGrad>>,
}

impl Gradients {
    pub fn zeros_like(model: &RelationalModel) -> Self {
        Gradients {
            parfactors: model
                .parfactors
                .iter()
                .map(|pf| pf.potentials.iter().map(Potential::zero_grad).collect())
                .collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.parfactors.iter_mut().flatten() {
            match g {
                PotentialGrad::Neural(m) => m.scale(s),
                PotentialGrad::Mln(w) => *w *= s,
            }
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.parfactors.iter_mut().flatten().zip(other.parfactors.iter().flatten()) {
            match (a, b) {
                (PotentialGrad::Neural(x), PotentialGrad::Neural(y)) => x.add_assign(y),
                (PotentialGrad::Mln(x), PotentialGrad::Mln(y)) => *x += y,
                _ => panic!("gradient layouts differ"),
            }
        }
    }

    /// Same order as [`RelationalModel::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in self.parfactors.iter().flatten() {
            match g {
                PotentialGrad::Neural(m) => m.flatten_into(&mut out),
                PotentialGrad::Mln(w) => out.push(*w),
            }
        }
        out
    }

    /// Locate the first non-finite entry, as `(parfactor, potential)`.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        for (i, pf) in self.parfactors.iter().enumerate() {
            for (j, g) in pf.iter().enumerate() {
                let bad = match g {
                    PotentialGrad::Neural(m) => {
                        let mut v = Vec::new();
                        m.flatten_into(&mut v);
                        v.iter().any(|x| !x.is_finite())
                    }
                    PotentialGrad::Mln(w) => !w.is_finite(),
                };
                if bad {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

impl RelationalModel {
    /// Number of learnable potential parameters (helpers are not included).
    pub fn num_params(&self) -> usize {
        self.parfactors
            .iter()
            .flat_map(|pf| pf.potentials.iter())
            .map(Potential::num_params)
            .sum()
    }

    /// All learnable parameters: parfactors in order, potentials in order,
    /// each network's layers as row-major weights followed by biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for p in self.parfactors.iter().flat_map(|pf| pf.potentials.iter()) {
            p.flatten_into(&mut out);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::usage(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        let mut k = 0;
        for p in self.parfactors.iter_mut().flat_map(|pf| pf.potentials.iter_mut()) {
            k += p.load_flat(&params[k..])?;
        }
        Ok(())
    }

    /// Glorot-initialize every network. MLN weights keep their declared initial values.
    pub fn init_params<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for p in self.parfactors.iter_mut().flat_map(|pf| pf.potentials.iter_mut()) {
            if let Potential::Neural(n) = p {
                n.mlp.init(rng);
            }
        }
    }

    /// Replace unfitted helpers by moment-matched fits to the clique rows of each parfactor.
    pub fn fit_helpers(&mut self, rows_per_parfactor: &[Vec<Vec<f64>>]) -> Result<()> {
        for (pf, rows) in self.parfactors.iter_mut().zip(rows_per_parfactor) {
            if let Helper::Unfitted(fam) = pf.helper {
                pf.helper = Helper::fit(fam, &pf.domains, rows)
                    .map_err(|e| e.context(format!("fitting helper of `{}`", pf.id)))?;
            }
        }
        Ok(())
    }
}

impl RelationalModel {
    /// Fit every unfitted helper to the clique rows its ground factors take in `frames`.
    pub fn fit_helpers_from(&mut self, graph: &GroundGraph, frames: &[Frame]) -> Result<()> {
        let mut rows: Vec<Vec<Vec<f64>>> = vec![Vec::new(); self.parfactors.len()];
        for frame in frames {
            for f in graph.factors() {
                rows[f.parfactor].push(f.values(frame));
            }
        }
        self.fit_helpers(&rows)
    }
}

/// View a flat gradient slice as an ndarray vector.
pub fn as_view(v: &[f64]) -> ArrayView1<'_, f64> {
    ArrayView1::from(v)
}
