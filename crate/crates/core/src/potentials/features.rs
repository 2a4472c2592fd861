//! Feature maps from clique values to network inputs.
//!
//! A slot is encoded as a one-hot vector when discrete, as `(x - lo)/(hi - lo)`
//! when continuous and bounded, and as the raw value when unbounded.

use std::fmt;

use crate::error::{Error, Result};
use crate::relational::Domain;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureTerm {
    Slot(usize),
    AbsDiff(usize, usize),
    Diff(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FeatureMap {
    /// Every slot encoded in clique order.
    Identity,
    /// `|x0 - x1|` over a two-slot continuous clique.
    AbsDiff,
    /// `x0 - x1` over a two-slot continuous clique.
    Diff,
    /// Explicit concatenation of terms.
    Terms(Vec<FeatureTerm>),
}

pub(crate) fn scale(domain: &Domain, v: f64) -> f64 {
    match *domain {
        Domain::Continuous { lo, hi } if lo.is_finite() && hi.is_finite() => (v - lo) / (hi - lo),
        _ => v,
    }
}

impl FeatureMap {
    pub fn terms(&self, arity: usize) -> Vec<FeatureTerm> {
        match self {
            FeatureMap::Identity => (0..arity).map(FeatureTerm::Slot).collect(),
            FeatureMap::AbsDiff => vec![FeatureTerm::AbsDiff(0, 1)],
            FeatureMap::Diff => vec![FeatureTerm::Diff(0, 1)],
            FeatureMap::Terms(t) => t.clone(),
        }
    }

    /// Check the map against the clique domains and return its output dimension.
    pub fn dim(&self, domains: &[Domain]) -> Result<usize> {
        let mut d = 0;
        for t in self.terms(domains.len()) {
            match t {
                FeatureTerm::Slot(i) => {
                    let dom = domains.get(i).ok_or_else(|| {
                        Error::model(format!("feature map references slot {i} of a {}-slot clique", domains.len()))
                    })?;
                    d += dom.cardinality().unwrap_or(1);
                }
                FeatureTerm::AbsDiff(i, j) | FeatureTerm::Diff(i, j) => {
                    for k in [i, j] {
                        match domains.get(k) {
                            None => {
                                return Err(Error::model(format!(
                                    "feature map references slot {k} of a {}-slot clique",
                                    domains.len()
                                )))
                            }
                            Some(Domain::Discrete(_)) => {
                                return Err(Error::model(format!(
                                    "difference features need continuous slots; slot {k} is discrete"
                                )))
                            }
                            Some(_) => {}
                        }
                    }
                    d += 1;
                }
            }
        }
        if d == 0 {
            return Err(Error::model("feature map produces no inputs"));
        }
        Ok(d)
    }

    /// Append the encoded features of one clique assignment to `out`.
    pub fn encode_into(&self, values: &[f64], domains: &[Domain], out: &mut Vec<f64>) {
        let push_term = |t: FeatureTerm, out: &mut Vec<f64>| match t {
            FeatureTerm::Slot(i) => match &domains[i] {
                Domain::Discrete(labels) => {
                    let k = values[i] as usize;
                    out.extend((0..labels.len()).map(|j| if j == k { 1.0 } else { 0.0 }));
                }
                d => out.push(scale(d, values[i])),
            },
            FeatureTerm::AbsDiff(i, j) => {
                out.push((scale(&domains[i], values[i]) - scale(&domains[j], values[j])).abs())
            }
            FeatureTerm::Diff(i, j) => {
                out.push(scale(&domains[i], values[i]) - scale(&domains[j], values[j]))
            }
        };
        match self {
            FeatureMap::Identity => {
                for i in 0..values.len() {
                    push_term(FeatureTerm::Slot(i), out);
                }
            }
            FeatureMap::AbsDiff => push_term(FeatureTerm::AbsDiff(0, 1), out),
            FeatureMap::Diff => push_term(FeatureTerm::Diff(0, 1), out),
            FeatureMap::Terms(ts) => {
                for &t in ts {
                    push_term(t, out);
                }
            }
        }
    }
}

impl fmt::Display for FeatureTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureTerm::Slot(i) => write!(f, "slot({i})"),
            FeatureTerm::AbsDiff(i, j) => write!(f, "absdiff({i},{j})"),
            FeatureTerm::Diff(i, j) => write!(f, "diff({i},{j})"),
        }
    }
}

impl fmt::Display for FeatureMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureMap::Identity => write!(f, "identity"),
            FeatureMap::AbsDiff => write!(f, "absdiff"),
            FeatureMap::Diff => write!(f, "diff"),
            FeatureMap::Terms(ts) => {
                let parts: Vec<String> = ts.iter().map(ToString::to_string).collect();
                write!(f, "[{}]", parts.join(","))
            }
        }
    }
}
