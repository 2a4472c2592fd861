//! Versioned text format for learned parameters and fitted helpers.
//!
//! ```text
//! rnmrf-params v1
//! helper pair LG(1,0,1)
//! potential pair/0 nn
//! dims 1 2 1
//! clamp -1.0000000000000000e1 1.0000000000000000e1
//! layer 0 weights ...
//! layer 0 bias ...
//! potential pair/1 mln
//! weight 5.0000000000000000e-1
//! end
//! ```
//!
//! Floats carry 17 significant digits, so a load/save cycle reproduces the file.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rnmrf_core::potentials::{Dense, Mlp, Potential};
use rnmrf_core::{Error, RelationalModel, Result};

use crate::dsl::parse_helper;

pub const HEADER: &str = "rnmrf-params v1";

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

fn join(xs: impl IntoIterator<Item = f64>) -> String {
    xs.into_iter().map(f).collect::<Vec<_>>().join(" ")
}

pub fn params_to_string(model: &RelationalModel) -> String {
    let mut s = format!("{HEADER}\n");
    for pf in &model.parfactors {
        s.push_str(&format!("helper {} {}\n", pf.id, pf.helper));
        for (k, pot) in pf.potentials.iter().enumerate() {
            match pot {
                Potential::Neural(n) => {
                    s.push_str(&format!("potential {}/{k} nn\n", pf.id));
                    let dims: Vec<String> = n.mlp().sizes().iter().map(ToString::to_string).collect();
                    s.push_str(&format!("dims {}\n", dims.join(" ")));
                    s.push_str(&format!("clamp {} {}\n", f(n.clamp.0), f(n.clamp.1)));
                    for (l, layer) in n.mlp().layers().iter().enumerate() {
                        s.push_str(&format!("layer {l} weights {}\n", join(layer.weights.iter().copied())));
                        s.push_str(&format!("layer {l} bias {}\n", join(layer.bias.iter().copied())));
                    }
                }
                Potential::Mln(m) => {
                    s.push_str(&format!("potential {}/{k} mln\n", pf.id));
                    s.push_str(&format!("weight {}\n", f(m.weight)));
                }
            }
        }
    }
    s.push_str("end\n");
    s
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
    origin: String,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<Vec<&'a str>> {
        let (i, l) = self
            .it
            .next()
            .ok_or_else(|| Error::data(format!("{}: unexpected end of file", self.origin)))?;
        self.last = i + 1;
        Ok(l.split_whitespace().collect())
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::data(format!("{}:{}: {msg}", self.origin, self.last))
    }

    fn floats(&self, toks: &[&str]) -> Result<Vec<f64>> {
        toks.iter()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(format!("`{t}` is not a finite number")))
            })
            .collect()
    }

    fn expect(&mut self, head: &[&str], what: &str) -> Result<Vec<&'a str>> {
        let toks = self.next()?;
        if toks.len() < head.len() || toks[..head.len()] != *head {
            return Err(self.err(format!("expected {what}")));
        }
        Ok(toks[head.len()..].to_vec())
    }
}

/// Load parameters into `model`, whose structure must match the file.
/// `origin` names the source in error messages.
pub fn params_from_str(model: &mut RelationalModel, text: &str, origin: &str) -> Result<()> {
    let mut ls = Lines {
        it: text.lines().enumerate(),
        last: 0,
        origin: origin.to_string(),
    };
    let head = ls.next()?;
    if head.join(" ") != HEADER {
        return Err(ls.err(format!("missing `{HEADER}` header")));
    }
    for pf in &mut model.parfactors {
        let rest = ls.expect(&["helper", pf.id.as_str()], &format!("`helper {}`", pf.id))?;
        let helper = parse_helper(&rest.join(" ")).map_err(|e| ls.err(e))?;
        helper.validate(&pf.domains).map_err(|e| ls.err(e))?;
        pf.helper = helper;
        for (k, pot) in pf.potentials.iter_mut().enumerate() {
            let id = format!("{}/{k}", pf.id);
            match pot {
                Potential::Neural(n) => {
                    ls.expect(&["potential", id.as_str(), "nn"], &format!("`potential {id} nn`"))?;
                    let dims = ls.expect(&["dims"], "`dims`")?;
                    let dims: Vec<usize> = dims
                        .iter()
                        .map(|d| d.parse::<usize>().map_err(|_| ls.err(format!("bad dimension `{d}`"))))
                        .collect::<Result<_>>()?;
                    if dims != n.mlp().sizes() {
                        return Err(ls.err(format!(
                            "potential {id} has layer sizes {:?} in the model but {dims:?} in the file",
                            n.mlp().sizes()
                        )));
                    }
                    let c = ls.expect(&["clamp"], "`clamp`")?;
                    let c = ls.floats(&c)?;
                    if c.len() != 2 || c[0] >= c[1] {
                        return Err(ls.err("clamp needs two increasing bounds"));
                    }
                    let mut layers = Vec::new();
                    for (l, w) in dims.windows(2).enumerate() {
                        let ws = ls.expect(&["layer", l.to_string().as_str(), "weights"], "layer weights")?;
                        let ws = ls.floats(&ws)?;
                        let weights = Array2::from_shape_vec((w[1], w[0]), ws)
                            .map_err(|_| ls.err(format!("layer {l} needs {} weights", w[0] * w[1])))?;
                        let bs = ls.expect(&["layer", l.to_string().as_str(), "bias"], "layer bias")?;
                        let bs = ls.floats(&bs)?;
                        if bs.len() != w[1] {
                            return Err(ls.err(format!("layer {l} needs {} biases", w[1])));
                        }
                        layers.push(Dense {
                            weights,
                            bias: Array1::from_vec(bs),
                        });
                    }
                    *n.mlp_mut() = Mlp::from_layers(layers).map_err(|e| ls.err(e))?;
                    n.clamp = (c[0], c[1]);
                }
                Potential::Mln(m) => {
                    ls.expect(&["potential", id.as_str(), "mln"], &format!("`potential {id} mln`"))?;
                    let w = ls.expect(&["weight"], "`weight`")?;
                    match ls.floats(&w)?.as_slice() {
                        [w] => m.weight = *w,
                        _ => return Err(ls.err("weight takes one number")),
                    }
                }
            }
        }
    }
    ls.expect(&["end"], "`end`")?;
    Ok(())
}

pub fn save_params(model: &RelationalModel, path: &Path) -> Result<()> {
    fs::write(path, params_to_string(model))
        .map_err(|e| Error::data(format!("cannot write {}: {e}", path.display())))
}

pub fn load_params(model: &mut RelationalModel, path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    params_from_str(model, &text, &path.display().to_string())
}
