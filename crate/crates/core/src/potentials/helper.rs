//! Helper distributions: normalizable base densities multiplied into each
//! factor. Besides the joint log-density, every family exposes its
//! conditional shape in a single slot, which is what the proposal for
//! that variable is assembled from.
//!
//! Slot conventions: Gaussian dimensions follow the clique's continuous
//! slots in order; categorical tables are row-major over the discrete slots
//! in order (first slot slowest).

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::relational::Domain;

/// Smallest variance any fitted or conditional Gaussian may have.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Full covariance is only kept up to this many dimensions.
pub const MAX_FULL_COV_DIM: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams {
    mean: Vec<f64>,
    cov: Vec<f64>,
    precision: Vec<f64>,
    log_norm: f64,
}

impl GaussianParams {
    /// `cov` is `d × d` row-major and must be symmetric positive definite.
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || cov.len() != d * d {
            return Err(Error::model(format!(
                "Gaussian of dimension {d} needs a {d}x{d} covariance, got {} entries",
                cov.len()
            )));
        }
        if mean.iter().chain(&cov).any(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite Gaussian parameter"));
        }
        for i in 0..d {
            for j in 0..i {
                if (cov[i * d + j] - cov[j * d + i]).abs() > 1e-12 * (1.0 + cov[i * d + j].abs()) {
                    return Err(Error::model("covariance is not symmetric"));
                }
                if d > MAX_FULL_COV_DIM && cov[i * d + j] != 0.0 {
                    return Err(Error::model(format!(
                        "covariance must be diagonal above {MAX_FULL_COV_DIM} dimensions"
                    )));
                }
            }
        }
        let m = DMatrix::from_row_slice(d, d, &cov);
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::model("covariance is not positive definite"))?;
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let inv = chol.inverse();
        let mut precision = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                precision.push(inv[(i, j)]);
            }
        }
        Ok(GaussianParams {
            mean,
            cov,
            precision,
            log_norm: -0.5 * (d as f64 * (2.0 * PI).ln() + log_det),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &[f64] {
        &self.cov
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut q = 0.0;
        for i in 0..d {
            let di = x[i] - self.mean[i];
            for j in 0..d {
                q += di * self.precision[i * d + j] * (x[j] - self.mean[j]);
            }
        }
        self.log_norm - 0.5 * q
    }

    /// Mean and variance of coordinate `k` given the other coordinates of `x`.
    pub fn conditional(&self, k: usize, x: &[f64]) -> (f64, f64) {
        let d = self.dim();
        let lkk = self.precision[k * d + k];
        let mut shift = 0.0;
        for j in 0..d {
            if j != k {
                shift += self.precision[k * d + j] * (x[j] - self.mean[j]);
            }
        }
        (self.mean[k] - shift / lkk, 1.0 / lkk)
    }
}

pub fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * PI * var).ln() + (x - mean) * (x - mean) / var)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HelperFamily {
    Uniform,
    Gaussian,
    LinearGaussian,
    Categorical,
    CategoricalGaussian,
}

impl HelperFamily {
    pub fn name(self) -> &'static str {
        match self {
            HelperFamily::Uniform => "Uniform",
            HelperFamily::Gaussian => "Gaussian",
            HelperFamily::LinearGaussian => "LG",
            HelperFamily::Categorical => "Categorical",
            HelperFamily::CategoricalGaussian => "CG",
        }
    }
}

impl std::str::FromStr for HelperFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "Uniform" | "U" | "uniform" => HelperFamily::Uniform,
            "Gaussian" | "gaussian" => HelperFamily::Gaussian,
            "LG" | "lg" | "LinearGaussian" => HelperFamily::LinearGaussian,
            "Categorical" | "categorical" => HelperFamily::Categorical,
            "CG" | "cg" | "CategoricalGaussian" => HelperFamily::CategoricalGaussian,
            _ => return Err(Error::model(format!("unknown helper family `{s}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Helper {
    Uniform,
    Gaussian(GaussianParams),
    LinearGaussian {
        slope: f64,
        intercept: f64,
        variance: f64,
    },
    Categorical {
        probs: Vec<f64>,
    },
    CategoricalGaussian {
        weights: Vec<f64>,
        components: Vec<GaussianParams>,
    },
    /// Family chosen, parameters still to be fitted from data.
    Unfitted(HelperFamily),
}

/// Shape of a helper as a function of one slot, others held fixed.
/// Only defined up to a constant factor.
#[derive(Clone, Debug, PartialEq)]
pub enum SlotFactor {
    Flat,
    Gaussian { mean: f64, var: f64 },
    /// Log-weights over the slot's labels.
    Table(Vec<f64>),
}

fn discrete_slots(domains: &[Domain]) -> Vec<usize> {
    (0..domains.len()).filter(|&i| domains[i].is_discrete()).collect()
}

fn continuous_slots(domains: &[Domain]) -> Vec<usize> {
    (0..domains.len()).filter(|&i| !domains[i].is_discrete()).collect()
}

/// Row-major index of the discrete slots' values.
fn joint_index(domains: &[Domain], slots: &[usize], x: &[f64]) -> usize {
    slots.iter().fold(0, |acc, &s| {
        acc * domains[s].cardinality().unwrap() + x[s] as usize
    })
}

fn table_size(domains: &[Domain], slots: &[usize]) -> usize {
    slots.iter().map(|&s| domains[s].cardinality().unwrap()).product()
}

fn gather(x: &[f64], slots: &[usize]) -> Vec<f64> {
    slots.iter().map(|&s| x[s]).collect()
}

fn check_simplex(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::model(format!("{what} must be non-negative")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::model(format!("{what} must sum to 1, got {s}")));
    }
    Ok(())
}

impl Helper {
    pub fn family(&self) -> HelperFamily {
        match self {
            Helper::Uniform => HelperFamily::Uniform,
            Helper::Gaussian(_) => HelperFamily::Gaussian,
            Helper::LinearGaussian { .. } => HelperFamily::LinearGaussian,
            Helper::Categorical { .. } => HelperFamily::Categorical,
            Helper::CategoricalGaussian { .. } => HelperFamily::CategoricalGaussian,
            Helper::Unfitted(f) => *f,
        }
    }

    pub fn is_fitted(&self) -> bool {
        !matches!(self, Helper::Unfitted(_))
    }

    /// Check that the helper is a normalizable density over the clique's domains.
    pub fn validate(&self, domains: &[Domain]) -> Result<()> {
        let disc = discrete_slots(domains);
        let cont = continuous_slots(domains);
        match self.family() {
            HelperFamily::Uniform => {
                if let Some(d) = domains.iter().find(|d| d.requires_helper()) {
                    return Err(Error::model(format!(
                        "uniform helper over unbounded domain {d} (requires_helper)"
                    )));
                }
            }
            HelperFamily::Gaussian => {
                if !disc.is_empty() {
                    return Err(Error::model("Gaussian helper needs all slots continuous"));
                }
            }
            HelperFamily::LinearGaussian => {
                if domains.len() != 2 || !disc.is_empty() {
                    return Err(Error::model("linear Gaussian helper needs exactly two continuous slots"));
                }
            }
            HelperFamily::Categorical => {
                if !cont.is_empty() {
                    return Err(Error::model("categorical helper needs all slots discrete"));
                }
            }
            HelperFamily::CategoricalGaussian => {
                if disc.is_empty() {
                    return Err(Error::model("categorical-Gaussian helper needs a discrete slot"));
                }
            }
        }
        match self {
            Helper::Gaussian(g) if g.dim() != domains.len() => Err(Error::model(format!(
                "Gaussian helper has dimension {}, clique has {} slots",
                g.dim(),
                domains.len()
            ))),
            Helper::LinearGaussian {
                slope,
                intercept,
                variance,
            } => {
                if !(slope.is_finite() && intercept.is_finite()) {
                    return Err(Error::numeric("non-finite linear Gaussian parameter"));
                }
                if !(*variance > 0.0 && variance.is_finite()) {
                    return Err(Error::model(format!(
                        "linear Gaussian variance must be positive, got {variance}"
                    )));
                }
                Ok(())
            }
            Helper::Categorical { probs } => {
                let n = table_size(domains, &disc);
                if probs.len() != n {
                    return Err(Error::model(format!(
                        "categorical helper needs {n} probabilities, got {}",
                        probs.len()
                    )));
                }
                check_simplex(probs, "categorical probabilities")
            }
            Helper::CategoricalGaussian {
                weights,
                components,
            } => {
                let n = table_size(domains, &disc);
                if weights.len() != n || components.len() != n {
                    return Err(Error::model(format!(
                        "categorical-Gaussian helper needs {n} weights and components"
                    )));
                }
                if components.iter().any(|c| c.dim() != cont.len()) && !cont.is_empty() {
                    return Err(Error::model(format!(
                        "categorical-Gaussian components must have dimension {}",
                        cont.len()
                    )));
                }
                check_simplex(weights, "categorical-Gaussian weights")
            }
            _ => Ok(()),
        }
    }

    fn unfitted_error(&self) -> Error {
        Error::model(format!("{} helper has not been fitted", self.family().name()))
    }

    /// Exact log-density of the clique values; `-inf` outside the support.
    pub fn log_density(&self, domains: &[Domain], x: &[f64]) -> Result<f64> {
        if domains.iter().zip(x).any(|(d, &v)| !d.contains(v)) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(match self {
            Helper::Uniform => domains
                .iter()
                .map(|d| match *d {
                    Domain::Discrete(ref l) => -(l.len() as f64).ln(),
                    Domain::Continuous { lo, hi } => -(hi - lo).ln(),
                })
                .sum(),
            Helper::Gaussian(g) => g.log_density(x),
            Helper::LinearGaussian {
                slope,
                intercept,
                variance,
            } => normal_log_pdf(x[1], slope * x[0] + intercept, *variance),
            Helper::Categorical { probs } => {
                let disc = discrete_slots(domains);
                probs[joint_index(domains, &disc, x)].ln()
            }
            Helper::CategoricalGaussian {
                weights,
                components,
            } => {
                let disc = discrete_slots(domains);
                let cont = continuous_slots(domains);
                let d = joint_index(domains, &disc, x);
                let lg = if cont.is_empty() {
                    0.0
                } else {
                    components[d].log_density(&gather(x, &cont))
                };
                weights[d].ln() + lg
            }
            Helper::Unfitted(_) => return Err(self.unfitted_error()),
        })
    }

    /// The helper as a function of slot `k`, the other slots fixed at `x`.
    pub fn slot_factor(&self, domains: &[Domain], k: usize, x: &[f64]) -> Result<SlotFactor> {
        let table = |f: &dyn Fn(&mut Vec<f64>) -> f64| -> SlotFactor {
            let n = domains[k].cardinality().unwrap();
            let mut y = x.to_vec();
            SlotFactor::Table(
                (0..n)
                    .map(|v| {
                        y[k] = v as f64;
                        f(&mut y)
                    })
                    .collect(),
            )
        };
        Ok(match self {
            Helper::Uniform => SlotFactor::Flat,
            Helper::Gaussian(g) => {
                let (mean, var) = g.conditional(k, x);
                SlotFactor::Gaussian { mean, var }
            }
            Helper::LinearGaussian {
                slope,
                intercept,
                variance,
            } => {
                if k == 1 {
                    SlotFactor::Gaussian {
                        mean: slope * x[0] + intercept,
                        var: *variance,
                    }
                } else if *slope == 0.0 {
                    SlotFactor::Flat
                } else {
                    SlotFactor::Gaussian {
                        mean: (x[1] - intercept) / slope,
                        var: variance / (slope * slope),
                    }
                }
            }
            Helper::Categorical { probs } => {
                let disc = discrete_slots(domains);
                table(&|y| probs[joint_index(domains, &disc, y)].ln())
            }
            Helper::CategoricalGaussian {
                weights,
                components,
            } => {
                let disc = discrete_slots(domains);
                let cont = continuous_slots(domains);
                if domains[k].is_discrete() {
                    table(&|y| {
                        let d = joint_index(domains, &disc, y);
                        let lg = if cont.is_empty() {
                            0.0
                        } else {
                            components[d].log_density(&gather(y, &cont))
                        };
                        weights[d].ln() + lg
                    })
                } else {
                    let d = joint_index(domains, &disc, x);
                    let ck = cont.iter().position(|&s| s == k).unwrap();
                    let (mean, var) = components[d].conditional(ck, &gather(x, &cont));
                    SlotFactor::Gaussian { mean, var }
                }
            }
            Helper::Unfitted(_) => return Err(self.unfitted_error()),
        })
    }

    /// Closed-form moment matching of `family` to data rows (one clique assignment per row).
    pub fn fit(family: HelperFamily, domains: &[Domain], rows: &[Vec<f64>]) -> Result<Helper> {
        Helper::Unfitted(family).validate(domains)?;
        let disc = discrete_slots(domains);
        let cont = continuous_slots(domains);
        let helper = match family {
            HelperFamily::Uniform => Helper::Uniform,
            HelperFamily::Gaussian => {
                let cols: Vec<Vec<f64>> = rows.iter().map(|r| gather(r, &cont)).collect();
                Helper::Gaussian(fit_gaussian(&cols)?)
            }
            HelperFamily::LinearGaussian => {
                if rows.len() < 2 {
                    return Err(Error::data("fitting a linear Gaussian needs at least 2 rows"));
                }
                let n = rows.len() as f64;
                let mx = rows.iter().map(|r| r[0]).sum::<f64>() / n;
                let my = rows.iter().map(|r| r[1]).sum::<f64>() / n;
                let sxx: f64 = rows.iter().map(|r| (r[0] - mx).powi(2)).sum();
                let sxy: f64 = rows.iter().map(|r| (r[0] - mx) * (r[1] - my)).sum();
                let slope = if sxx > 1e-12 { sxy / sxx } else { 0.0 };
                let intercept = my - slope * mx;
                let rss: f64 = rows
                    .iter()
                    .map(|r| (r[1] - slope * r[0] - intercept).powi(2))
                    .sum();
                Helper::LinearGaussian {
                    slope,
                    intercept,
                    variance: (rss / n).max(VARIANCE_FLOOR),
                }
            }
            HelperFamily::Categorical => {
                let n = table_size(domains, &disc);
                let mut counts = vec![1.0; n];
                for r in rows {
                    counts[joint_index(domains, &disc, r)] += 1.0;
                }
                let total: f64 = counts.iter().sum();
                Helper::Categorical {
                    probs: counts.iter().map(|c| c / total).collect(),
                }
            }
            HelperFamily::CategoricalGaussian => {
                let n = table_size(domains, &disc);
                let mut groups: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n];
                for r in rows {
                    groups[joint_index(domains, &disc, r)].push(gather(r, &cont));
                }
                let total = rows.len() as f64 + n as f64;
                let weights: Vec<f64> = groups.iter().map(|g| (g.len() as f64 + 1.0) / total).collect();
                let components = if cont.is_empty() {
                    Vec::new()
                } else {
                    let all: Vec<Vec<f64>> = rows.iter().map(|r| gather(r, &cont)).collect();
                    let pooled = fit_gaussian(&all)?;
                    groups
                        .iter()
                        .map(|g| match g.len() {
                            0 => Ok(pooled.clone()),
                            1 => GaussianParams::new(g[0].clone(), pooled.cov().to_vec()),
                            _ => fit_gaussian(g),
                        })
                        .collect::<Result<Vec<_>>>()?
                };
                Helper::CategoricalGaussian {
                    weights,
                    components,
                }
            }
        };
        helper.validate(domains)?;
        Ok(helper)
    }
}

/// Sample mean and covariance (n − 1 denominator); variances floored at
/// [`VARIANCE_FLOOR`], diagonal above [`MAX_FULL_COV_DIM`] dimensions.
pub fn fit_gaussian(rows: &[Vec<f64>]) -> Result<GaussianParams> {
    if rows.len() < 2 {
        return Err(Error::data("fitting a Gaussian needs at least 2 rows"));
    }
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let mut cov = vec![0.0; d * d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    for (k, c) in cov.iter_mut().enumerate() {
        *c /= n - 1.0;
        let (i, j) = (k / d, k % d);
        if i == j {
            *c = c.max(VARIANCE_FLOOR);
        } else if d > MAX_FULL_COV_DIM {
            *c = 0.0;
        }
    }
    // nearly collinear columns: inflate the diagonal until positive definite
    let mut jitter = VARIANCE_FLOOR;
    loop {
        match GaussianParams::new(mean.clone(), cov.clone()) {
            Ok(g) => return Ok(g),
            Err(Error::Model(_)) if jitter < 1e3 => {
                for i in 0..d {
                    cov[i * d + i] += jitter;
                }
                jitter *= 10.0;
            }
            Err(e) => return Err(e),
        }
    }
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", parts.join(","))
}

impl fmt::Display for Helper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Helper::Uniform => write!(f, "Uniform"),
            Helper::Gaussian(g) => write!(f, "Gaussian(mean={},cov={})", fmt_list(g.mean()), fmt_list(g.cov())),
            Helper::LinearGaussian {
                slope,
                intercept,
                variance,
            } => write!(f, "LG({slope},{intercept},{variance})"),
            Helper::Categorical { probs } => write!(f, "Categorical({})", fmt_list(probs)),
            Helper::CategoricalGaussian {
                weights,
                components,
            } => {
                let means: Vec<String> = components.iter().map(|c| fmt_list(c.mean())).collect();
                let covs: Vec<String> = components.iter().map(|c| fmt_list(c.cov())).collect();
                write!(
                    f,
                    "CG(weights={},means=[{}],covs=[{}])",
                    fmt_list(weights),
                    means.join(","),
                    covs.join(",")
                )
            }
            Helper::Unfitted(fam) => write!(f, "{}", fam.name()),
        }
    }
}
