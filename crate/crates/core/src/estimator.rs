//! Expectation estimators for the conditional of one variable.
//!
//! Each estimator turns a proposal into a [`PointSet`]; the point set knows how
//! to weight its points once `log b_i` has been evaluated at them.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::potentials::{log_sum_exp, Proposal1D};
use crate::registry::Registry;
use crate::relational::Domain;

/// Discrete domains up to this size are enumerated instead of sampled.
pub const ENUMERATION_LIMIT: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub enum PointKind {
    /// Draws from the proposal, with its log-density at each draw.
    Sampled { log_q: Vec<f64> },
    /// Every label of a discrete domain.
    Enumerated,
    /// Shifted midpoint grid with log cell widths.
    Grid { log_delta: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    pub xs: Vec<f64>,
    pub kind: PointKind,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Unnormalized log-weights. Sampled points use only `log Π φ_nn`, the helper
    /// part of `b_i / Q` being constant in `x`.
    pub fn log_weights(&self, log_b: &[f64], log_pot: &[f64]) -> Vec<f64> {
        match &self.kind {
            PointKind::Sampled { .. } => log_pot.to_vec(),
            PointKind::Enumerated => log_b.to_vec(),
            PointKind::Grid { log_delta } => log_delta.iter().zip(log_b).map(|(d, b)| d + b).collect(),
        }
    }

    /// Log-weights in the explicit `b_i / Q` form (sampled) or `Δ · b_i` form (grid).
    pub fn log_weights_explicit(&self, log_b: &[f64]) -> Vec<f64> {
        match &self.kind {
            PointKind::Sampled { log_q } => log_b.iter().zip(log_q).map(|(b, q)| b - q).collect(),
            _ => self.log_weights(log_b, log_b),
        }
    }

    /// `log Ẑ_i`, the estimated log normalizer of `b_i`.
    pub fn log_normalizer(&self, log_b: &[f64]) -> f64 {
        let w = self.log_weights_explicit(log_b);
        match self.kind {
            PointKind::Sampled { .. } => log_sum_exp(&w) - (w.len() as f64).ln(),
            _ => log_sum_exp(&w),
        }
    }
}

pub fn enumerate_points(domain: &Domain) -> Result<PointSet> {
    let n = domain
        .cardinality()
        .ok_or_else(|| Error::usage("cannot enumerate a continuous domain"))?;
    Ok(PointSet {
        xs: (0..n).map(|v| v as f64).collect(),
        kind: PointKind::Enumerated,
    })
}

pub fn importance_points(proposal: &Proposal1D, n: usize, rng: &mut dyn RngCore) -> PointSet {
    let xs: Vec<f64> = (0..n).map(|_| proposal.sample(rng)).collect();
    let log_q = xs.iter().map(|&x| proposal.log_density(x)).collect();
    PointSet {
        xs,
        kind: PointKind::Sampled { log_q },
    }
}

/// `n` midpoints of cells covering `[lo, hi]`; the end cells have widths `ε·h`
/// and `(1-ε)·h`, interior cells `h = (hi-lo)/(n-1)`.
pub fn riemann_grid(lo: f64, hi: f64, n: usize, eps: f64) -> (Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / (n as f64 - 1.0);
    let mut delta = vec![h; n];
    delta[0] = eps * h;
    delta[n - 1] = (1.0 - eps) * h;
    let mut xs = Vec::with_capacity(n);
    let mut x = lo + delta[0] / 2.0;
    xs.push(x);
    for k in 1..n {
        x += (delta[k - 1] + delta[k]) / 2.0;
        xs.push(x);
    }
    (xs, delta)
}

pub trait ExpectationEstimator {
    fn name(&self) -> &'static str;

    fn points(&self, domain: &Domain, proposal: &Proposal1D, n: usize, rng: &mut dyn RngCore) -> Result<PointSet>;
}

/// Self-normalized importance sampling from the helper proposal.
pub struct Importance;

impl ExpectationEstimator for Importance {
    fn name(&self) -> &'static str {
        "importance"
    }

    fn points(&self, domain: &Domain, proposal: &Proposal1D, n: usize, rng: &mut dyn RngCore) -> Result<PointSet> {
        match domain.cardinality() {
            Some(c) if c <= ENUMERATION_LIMIT => enumerate_points(domain),
            _ => {
                if n < 1 {
                    return Err(Error::usage("importance estimator needs at least one sample"));
                }
                Ok(importance_points(proposal, n, rng))
            }
        }
    }
}

/// Randomly shifted Riemann sum over a bounded domain.
pub struct Riemann;

impl ExpectationEstimator for Riemann {
    fn name(&self) -> &'static str {
        "riemann"
    }

    fn points(&self, domain: &Domain, _proposal: &Proposal1D, n: usize, rng: &mut dyn RngCore) -> Result<PointSet> {
        match *domain {
            Domain::Discrete(_) => enumerate_points(domain),
            Domain::Continuous { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(Error::usage(format!(
                        "riemann estimator needs a bounded domain, got {domain}; use the importance estimator"
                    )));
                }
                if n < 2 {
                    return Err(Error::usage("riemann estimator needs at least two grid points"));
                }
                let eps: f64 = rand::Rng::random(rng);
                let (xs, delta) = riemann_grid(lo, hi, n, eps);
                Ok(PointSet {
                    xs,
                    kind: PointKind::Grid {
                        log_delta: delta.iter().map(|d| d.ln()).collect(),
                    },
                })
            }
        }
    }
}

pub fn estimators() -> Registry<dyn ExpectationEstimator, ()> {
    let mut r: Registry<dyn ExpectationEstimator, ()> = Registry::new("estimator");
    r.register("importance", |_| Ok(Box::new(Importance)));
    r.register("riemann", |_| Ok(Box::new(Riemann)));
    r
}
