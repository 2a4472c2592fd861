//! The unnormalized local conditional `b_i(x) = Π_{h ∋ i} φ_h(x, x_{h∖i})` and
//! the helper-product proposal `Q(x_i)`.

use crate::error::{Error, Result};
use crate::potentials::{Proposal1D, SlotFactor};
use crate::relational::{GroundGraph, RelationalModel};

/// Clique rows of factor `f` with `var`'s slot replaced by each of `xs`, flattened.
pub fn substituted_rows(graph: &GroundGraph, f: usize, var: usize, frame: &[f64], xs: &[f64]) -> Vec<f64> {
    let factor = graph.factor(f);
    let slot = factor.slot_of(var).expect("variable not in factor");
    let base = factor.values(frame);
    let mut out = Vec::with_capacity(base.len() * xs.len());
    for &x in xs {
        let start = out.len();
        out.extend_from_slice(&base);
        out[start + slot] = x;
    }
    out
}

/// `Q(x_i) ∝ Π_{h ∋ i} φ_0h(x_i, x_{h∖i})`, in closed form.
pub fn helper_conditional(
    model: &RelationalModel,
    graph: &GroundGraph,
    var: usize,
    frame: &[f64],
) -> Result<Proposal1D> {
    let mut factors = Vec::new();
    for &f in graph.factors_of(var) {
        let gf = graph.factor(f);
        let pf = &model.parfactors[gf.parfactor];
        let slot = gf.slot_of(var).expect("blanket index out of sync");
        factors.push(pf.helper.slot_factor(&pf.domains, slot, &gf.values(frame))?);
    }
    Proposal1D::from_factors(&graph.var(var).domain, &factors).map_err(|e| {
        let ids: Vec<String> = graph
            .factors_of(var)
            .iter()
            .map(|&f| {
                let gf = graph.factor(f);
                format!("{}{}", model.parfactors[gf.parfactor].id, gf.substitution)
            })
            .collect();
        e.context(format!("proposal for `{}` from [{}]", graph.var(var).id, ids.join(", ")))
    })
}

/// Which parts of each incident factor to include in a local log-value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parts {
    All,
    HelpersOnly,
    PotentialsOnly,
}

/// Σ over factors incident to `var` of the selected log-parts, at each candidate value.
pub fn local_log_values(
    model: &RelationalModel,
    graph: &GroundGraph,
    var: usize,
    frame: &[f64],
    xs: &[f64],
    parts: Parts,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; xs.len()];
    for &f in graph.factors_of(var) {
        let pf = &model.parfactors[graph.factor(f).parfactor];
        let arity = pf.arity();
        let rows = substituted_rows(graph, f, var, frame, xs);
        if parts != Parts::PotentialsOnly {
            for (o, r) in out.iter_mut().zip(rows.chunks_exact(arity)) {
                *o += pf.helper.log_density(&pf.domains, r)?;
            }
        }
        if parts != Parts::HelpersOnly {
            for p in &pf.potentials {
                for (o, v) in out.iter_mut().zip(p.log_values_batch(&rows, arity, &pf.domains)?) {
                    *o += v;
                }
            }
        }
    }
    if let Some(k) = out.iter().position(|v| v.is_nan()) {
        return Err(Error::numeric(format!(
            "NaN local log-value for `{}` at {}",
            graph.var(var).id,
            xs[k]
        )));
    }
    Ok(out)
}

/// `log b_i` at each candidate value.
pub fn log_b(model: &RelationalModel, graph: &GroundGraph, var: usize, frame: &[f64], xs: &[f64]) -> Result<Vec<f64>> {
    local_log_values(model, graph, var, frame, xs, Parts::All)
}

/// Log of `Π φ_nn` over incident factors: `b_i / Π φ_0`.
pub fn log_potentials(
    model: &RelationalModel,
    graph: &GroundGraph,
    var: usize,
    frame: &[f64],
    xs: &[f64],
) -> Result<Vec<f64>> {
    local_log_values(model, graph, var, frame, xs, Parts::PotentialsOnly)
}

/// Normalize log-weights in place to probabilities; errors if none is positive.
pub fn normalize_log_weights(logw: &[f64], what: &str) -> Result<Vec<f64>> {
    if logw.iter().any(|v| v.is_nan()) {
        return Err(Error::numeric(format!("NaN weight in {what}")));
    }
    let z = crate::potentials::log_sum_exp(logw);
    if z == f64::NEG_INFINITY {
        return Err(Error::estimator(format!(
            "all {} weights are zero in {what}",
            logw.len()
        )));
    }
    if !z.is_finite() {
        return Err(Error::numeric(format!("weight normalizer {z} in {what}")));
    }
    Ok(logw.iter().map(|l| (l - z).exp()).collect())
}

/// Slot factors of the helpers incident to `var`, mostly for diagnostics.
pub fn slot_factors(model: &RelationalModel, graph: &GroundGraph, var: usize, frame: &[f64]) -> Result<Vec<SlotFactor>> {
    graph
        .factors_of(var)
        .iter()
        .map(|&f| {
            let gf = graph.factor(f);
            let pf = &model.parfactors[gf.parfactor];
            pf.helper
                .slot_factor(&pf.domains, gf.slot_of(var).unwrap(), &gf.values(frame))
        })
        .collect()
}
