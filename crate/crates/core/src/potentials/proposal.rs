//! One-dimensional proposals built from the helper factors around a variable.
//!
//! The product of helper slot-factors in a single variable is formed in
//! closed form: Gaussian factors combine by adding precisions, flat factors
//! leave the domain bounds in place, and discrete factors multiply pointwise.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::{erfc, erfc_inv};

use super::helper::SlotFactor;
use crate::error::{Error, Result};
use crate::relational::Domain;

#[derive(Clone, Debug, PartialEq)]
pub enum Proposal1D {
    /// Normalized probabilities over the labels of a discrete domain.
    Table(Vec<f64>),
    Gaussian {
        mean: f64,
        var: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    TruncatedGaussian {
        mean: f64,
        var: f64,
        lo: f64,
        hi: f64,
        /// log of the untruncated mass inside `[lo, hi]`
        log_mass: f64,
    },
}

/// Φ(z)
fn std_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Φ⁻¹(p)
fn std_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Stable `log(Φ(b) - Φ(a))` for `a < b`.
fn log_interval_mass(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        // upper tail: use the mirrored interval, where the cdf values are small
        (std_cdf(-a) - std_cdf(-b)).ln()
    } else {
        (std_cdf(b) - std_cdf(a)).ln()
    }
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl Proposal1D {
    /// Combine a variable's helper slot-factors into a normalized proposal.
    pub fn from_factors(domain: &Domain, factors: &[SlotFactor]) -> Result<Self> {
        match domain {
            Domain::Discrete(labels) => {
                let mut logp = vec![0.0; labels.len()];
                for f in factors {
                    match f {
                        SlotFactor::Flat => {}
                        SlotFactor::Table(t) => {
                            for (a, b) in logp.iter_mut().zip(t) {
                                *a += b;
                            }
                        }
                        SlotFactor::Gaussian { .. } => {
                            return Err(Error::estimator("Gaussian helper factor on a discrete variable"))
                        }
                    }
                }
                let z = log_sum_exp(&logp);
                if !z.is_finite() {
                    return Err(Error::estimator(format!(
                        "helper product has no support over {} ({} factors)",
                        domain,
                        factors.len()
                    )));
                }
                Ok(Proposal1D::Table(logp.iter().map(|l| (l - z).exp()).collect()))
            }
            &Domain::Continuous { lo, hi } => {
                let mut prec = 0.0;
                let mut prec_mean = 0.0;
                for f in factors {
                    match f {
                        SlotFactor::Flat => {}
                        SlotFactor::Gaussian { mean, var } => {
                            if !(var.is_finite() && *var > 0.0 && mean.is_finite()) {
                                return Err(Error::numeric(format!(
                                    "degenerate Gaussian helper factor N({mean}, {var})"
                                )));
                            }
                            prec += 1.0 / var;
                            prec_mean += mean / var;
                        }
                        SlotFactor::Table(_) => {
                            return Err(Error::estimator("table helper factor on a continuous variable"))
                        }
                    }
                }
                if prec == 0.0 {
                    if lo.is_finite() && hi.is_finite() {
                        return Ok(Proposal1D::Uniform { lo, hi });
                    }
                    return Err(Error::estimator(format!(
                        "no Gaussian helper bounds the unbounded domain {domain} ({} factors)",
                        factors.len()
                    )));
                }
                let var = 1.0 / prec;
                let mean = prec_mean * var;
                if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                    return Ok(Proposal1D::Gaussian { mean, var });
                }
                let sd = var.sqrt();
                let log_mass = log_interval_mass((lo - mean) / sd, (hi - mean) / sd);
                if !log_mass.is_finite() {
                    return Err(Error::estimator(format!(
                        "helper product N({mean}, {var}) has no mass on {domain}"
                    )));
                }
                Ok(Proposal1D::TruncatedGaussian {
                    mean,
                    var,
                    lo,
                    hi,
                    log_mass,
                })
            }
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Proposal1D::Table(ref p) => {
                if x >= 0.0 && x.fract() == 0.0 && (x as usize) < p.len() {
                    p[x as usize].ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Proposal1D::Gaussian { mean, var } => -0.5 * ((2.0 * PI * var).ln() + (x - mean).powi(2) / var),
            Proposal1D::Uniform { lo, hi } => {
                if x >= lo && x <= hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Proposal1D::TruncatedGaussian {
                mean,
                var,
                lo,
                hi,
                log_mass,
            } => {
                if x >= lo && x <= hi {
                    -0.5 * ((2.0 * PI * var).ln() + (x - mean).powi(2) / var) - log_mass
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Proposal1D::Table(ref p) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, &pi) in p.iter().enumerate() {
                    acc += pi;
                    if u < acc {
                        return i as f64;
                    }
                }
                // rounding left u above the total: take the last label with mass
                p.iter().rposition(|&pi| pi > 0.0).unwrap_or(0) as f64
            }
            Proposal1D::Gaussian { mean, var } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + var.sqrt() * z
            }
            Proposal1D::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Proposal1D::TruncatedGaussian {
                mean, var, lo, hi, ..
            } => {
                let sd = var.sqrt();
                let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
                let u: f64 = rng.random();
                let z = if a > 0.0 {
                    // sample the mirrored interval [-b, -a] to stay away from cdf ≈ 1
                    let (pa, pb) = (std_cdf(-b), std_cdf(-a));
                    -std_quantile(pa + u * (pb - pa))
                } else {
                    let (pa, pb) = (std_cdf(a), std_cdf(b));
                    std_quantile(pa + u * (pb - pa))
                };
                (mean + sd * z).clamp(lo, hi)
            }
        }
    }

    /// Most probable point.
    pub fn mode(&self) -> f64 {
        match *self {
            Proposal1D::Table(ref p) => {
                let mut best = 0;
                for (i, &v) in p.iter().enumerate() {
                    if v > p[best] {
                        best = i;
                    }
                }
                best as f64
            }
            Proposal1D::Gaussian { mean, .. } => mean,
            Proposal1D::Uniform { lo, hi } => 0.5 * (lo + hi),
            Proposal1D::TruncatedGaussian { mean, lo, hi, .. } => mean.clamp(lo, hi),
        }
    }
}
