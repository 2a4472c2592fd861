//! Line-oriented model files.
//!
//! ```text
//! domain intensity continuous [0,1]
//! predicate val(P:pixel) -> intensity
//! relation nb from nb.tsv
//! parfactor pair: helper=LG(1,0,1) potential=NN(layers=[16,8],clamp=[-10,10],fm=absdiff) atoms=[val(P1),val(P2)] constraint=nb(P1,P2)
//! ```
//!
//! `#` starts a comment. [`print_model`] writes a file that parses back to an
//! equal model.

use rnmrf_core::potentials::{
    FeatureMap, FeatureTerm, GaussianParams, Helper, HelperFamily, MlnPotential, NeuralPotential, Potential,
    DEFAULT_CLAMP,
};
use rnmrf_core::relational::{AtomRef, ConstraintTerm, RelationImport};
use rnmrf_core::{Domain, Error, Parfactor, Predicate, RelationalModel, Result};

#[derive(Clone, Debug, PartialEq)]
enum Value {
    Num(f64),
    Str(String),
    List(Vec<Spanned>),
    /// `name` or `name(args)`.
    Term { name: String, args: Option<Vec<Arg>> },
}

#[derive(Clone, Debug, PartialEq)]
struct Spanned {
    col: usize,
    value: Value,
}

#[derive(Clone, Debug, PartialEq)]
struct Arg {
    key: Option<String>,
    value: Spanned,
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-' || c == '.' || c == '/'
}

impl Cursor {
    fn new(src: &str, line: usize) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            line,
        }
    }

    fn col(&self) -> usize {
        self.pos + 1
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.line,
            col: self.col(),
            msg: msg.into(),
        }
    }

    fn err_at(&self, col: usize, msg: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.line,
            col,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.chars.len()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!(
                "expected `{c}`, found {}",
                self.peek().map_or("end of line".to_string(), |p| format!("`{p}`"))
            )))
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a name"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        let col = {
            self.skip_ws();
            self.col()
        };
        let got = self.ident()?;
        if got != kw {
            return Err(self.err_at(col, format!("expected `{kw}`, found `{got}`")));
        }
        Ok(())
    }

    fn rest(&mut self) -> String {
        self.skip_ws();
        let s: String = self.chars[self.pos..].iter().collect();
        self.pos = self.chars.len();
        s.trim_end().to_string()
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || "+-.".contains(c)) {
            self.pos += 1;
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        s.parse::<f64>()
            .map_err(|_| self.err_at(start + 1, format!("`{s}` is not a number")))
    }

    fn string(&mut self) -> Result<String> {
        self.expect('"')?;
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == '"' {
                let s = self.chars[start..self.pos].iter().collect();
                self.pos += 1;
                return Ok(s);
            }
            self.pos += 1;
        }
        Err(self.err_at(start, "unterminated string"))
    }

    fn value(&mut self) -> Result<Spanned> {
        self.skip_ws();
        let col = self.col();
        let value = match self.peek() {
            None => return Err(self.err("expected a value, found end of line")),
            Some('"') => Value::Str(self.string()?),
            Some('[') => {
                self.pos += 1;
                let mut items = Vec::new();
                if !self.eat(']') {
                    loop {
                        items.push(self.value()?);
                        if self.eat(']') {
                            break;
                        }
                        self.expect(',')?;
                    }
                }
                Value::List(items)
            }
            Some(c) if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => Value::Num(self.number()?),
            Some(c) if c.is_alphabetic() || c == '_' => {
                let name = self.ident()?;
                let args = if self.peek() == Some('(') {
                    self.pos += 1;
                    let mut args = Vec::new();
                    if !self.eat(')') {
                        loop {
                            args.push(self.arg()?);
                            if self.eat(')') {
                                break;
                            }
                            self.expect(',')?;
                        }
                    }
                    Some(args)
                } else {
                    None
                };
                Value::Term { name, args }
            }
            Some(c) => return Err(self.err(format!("unexpected `{c}`"))),
        };
        Ok(Spanned { col, value })
    }

    fn arg(&mut self) -> Result<Arg> {
        self.skip_ws();
        let save = self.pos;
        if matches!(self.peek(), Some(c) if c.is_alphabetic()) {
            let name = self.ident()?;
            self.skip_ws();
            if self.peek() == Some('=') {
                self.pos += 1;
                return Ok(Arg {
                    key: Some(name),
                    value: self.value()?,
                });
            }
            self.pos = save;
        }
        Ok(Arg {
            key: None,
            value: self.value()?,
        })
    }
}

fn num(c: &Cursor, v: &Spanned) -> Result<f64> {
    match v.value {
        Value::Num(x) => Ok(x),
        _ => Err(c.err_at(v.col, "expected a number")),
    }
}

fn num_list(c: &Cursor, v: &Spanned) -> Result<Vec<f64>> {
    match &v.value {
        Value::List(items) => items.iter().map(|i| num(c, i)).collect(),
        _ => Err(c.err_at(v.col, "expected a list of numbers")),
    }
}

fn nested_list(c: &Cursor, v: &Spanned) -> Result<Vec<Vec<f64>>> {
    match &v.value {
        Value::List(items) => items.iter().map(|i| num_list(c, i)).collect(),
        _ => Err(c.err_at(v.col, "expected a list of lists")),
    }
}

fn usize_of(c: &Cursor, v: &Spanned) -> Result<usize> {
    let x = num(c, v)?;
    if x < 0.0 || x.fract() != 0.0 {
        return Err(c.err_at(v.col, format!("expected a non-negative integer, got {x}")));
    }
    Ok(x as usize)
}

/// Split `args` into keyword arguments, rejecting duplicates and unknown keys.
fn keyed<'v>(c: &Cursor, args: &'v [Arg], allowed: &[&str]) -> Result<Vec<(&'v str, &'v Spanned)>> {
    let mut out: Vec<(&str, &Spanned)> = Vec::new();
    for a in args {
        let k = a
            .key
            .as_deref()
            .ok_or_else(|| c.err_at(a.value.col, format!("expected one of {}=...", allowed.join("=, "))))?;
        if !allowed.contains(&k) {
            return Err(c.err_at(a.value.col, format!("unknown argument `{k}`")));
        }
        if out.iter().any(|(o, _)| *o == k) {
            return Err(c.err_at(a.value.col, format!("argument `{k}` given twice")));
        }
        out.push((k, &a.value));
    }
    Ok(out)
}

fn lookup<'v>(kv: &[(&str, &'v Spanned)], key: &str) -> Option<&'v Spanned> {
    kv.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

fn gaussian(c: &Cursor, col: usize, mean: Vec<f64>, cov: Vec<f64>) -> Result<GaussianParams> {
    GaussianParams::new(mean, cov).map_err(|e| c.err_at(col, e.to_string()))
}

fn helper(c: &Cursor, v: &Spanned) -> Result<Helper> {
    let Value::Term { name, args } = &v.value else {
        return Err(c.err_at(v.col, "expected a helper"));
    };
    let family: HelperFamily = name.parse().map_err(|e: Error| c.err_at(v.col, e.to_string()))?;
    let Some(args) = args else {
        return Ok(match family {
            HelperFamily::Uniform => Helper::Uniform,
            f => Helper::Unfitted(f),
        });
    };
    match family {
        HelperFamily::Uniform => {
            if !args.is_empty() {
                return Err(c.err_at(v.col, "Uniform takes no arguments"));
            }
            Ok(Helper::Uniform)
        }
        HelperFamily::LinearGaussian => {
            if args.len() != 3 || args.iter().any(|a| a.key.is_some()) {
                return Err(c.err_at(v.col, "LG takes three numbers: slope, intercept, variance"));
            }
            let slope = num(c, &args[0].value)?;
            let intercept = num(c, &args[1].value)?;
            let variance = num(c, &args[2].value)?;
            if !(variance > 0.0) {
                return Err(c.err_at(args[2].value.col, "LG variance must be positive"));
            }
            Ok(Helper::LinearGaussian {
                slope,
                intercept,
                variance,
            })
        }
        HelperFamily::Categorical => {
            if args.len() != 1 || args[0].key.is_some() {
                return Err(c.err_at(v.col, "Categorical takes one list of probabilities"));
            }
            Ok(Helper::Categorical {
                probs: num_list(c, &args[0].value)?,
            })
        }
        HelperFamily::Gaussian => {
            let kv = keyed(c, args, &["mean", "cov"])?;
            let (Some(m), Some(s)) = (lookup(&kv, "mean"), lookup(&kv, "cov")) else {
                return Err(c.err_at(v.col, "Gaussian needs mean=[...] and cov=[...]"));
            };
            Ok(Helper::Gaussian(gaussian(c, v.col, num_list(c, m)?, num_list(c, s)?)?))
        }
        HelperFamily::CategoricalGaussian => {
            let kv = keyed(c, args, &["weights", "means", "covs"])?;
            let (Some(w), Some(m), Some(s)) = (lookup(&kv, "weights"), lookup(&kv, "means"), lookup(&kv, "covs")) else {
                return Err(c.err_at(v.col, "CG needs weights=, means= and covs="));
            };
            let weights = num_list(c, w)?;
            let means = nested_list(c, m)?;
            let covs = nested_list(c, s)?;
            if means.len() != covs.len() {
                return Err(c.err_at(v.col, "CG needs one covariance per mean"));
            }
            let components = means
                .into_iter()
                .zip(covs)
                .map(|(m, s)| gaussian(c, v.col, m, s))
                .collect::<Result<Vec<_>>>()?;
            Ok(Helper::CategoricalGaussian { weights, components })
        }
    }
}

fn feature_term(c: &Cursor, v: &Spanned) -> Result<FeatureTerm> {
    let Value::Term { name, args: Some(args) } = &v.value else {
        return Err(c.err_at(v.col, "expected slot(i), absdiff(i,j) or diff(i,j)"));
    };
    let ix: Vec<usize> = args.iter().map(|a| usize_of(c, &a.value)).collect::<Result<_>>()?;
    match (name.as_str(), ix.as_slice()) {
        ("slot", [i]) => Ok(FeatureTerm::Slot(*i)),
        ("absdiff", [i, j]) => Ok(FeatureTerm::AbsDiff(*i, *j)),
        ("diff", [i, j]) => Ok(FeatureTerm::Diff(*i, *j)),
        _ => Err(c.err_at(v.col, format!("bad feature term `{name}`"))),
    }
}

fn feature_map(c: &Cursor, v: &Spanned) -> Result<FeatureMap> {
    match &v.value {
        Value::Term { name, args: None } => match name.as_str() {
            "identity" => Ok(FeatureMap::Identity),
            "absdiff" => Ok(FeatureMap::AbsDiff),
            "diff" => Ok(FeatureMap::Diff),
            _ => Err(c.err_at(v.col, format!("unknown feature map `{name}`"))),
        },
        Value::List(items) => Ok(FeatureMap::Terms(
            items.iter().map(|i| feature_term(c, i)).collect::<Result<_>>()?,
        )),
        _ => Err(c.err_at(v.col, "expected a feature map")),
    }
}

fn potential(c: &Cursor, v: &Spanned) -> Result<Potential> {
    let Value::Term { name, args: Some(args) } = &v.value else {
        return Err(c.err_at(v.col, "expected NN(...) or MLN(...)"));
    };
    match name.as_str() {
        "NN" => {
            let kv = keyed(c, args, &["layers", "clamp", "fm", "act"])?;
            let hidden = match lookup(&kv, "layers") {
                Some(l) => num_list(c, l)?
                    .into_iter()
                    .map(|x| {
                        if x >= 1.0 && x.fract() == 0.0 {
                            Ok(x as usize)
                        } else {
                            Err(c.err_at(l.col, format!("layer width must be a positive integer, got {x}")))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?,
                None => Vec::new(),
            };
            let clamp = match lookup(&kv, "clamp") {
                Some(s) => match num_list(c, s)?.as_slice() {
                    [a, b] => (*a, *b),
                    _ => return Err(c.err_at(s.col, "clamp takes two bounds")),
                },
                None => DEFAULT_CLAMP,
            };
            let features = match lookup(&kv, "fm") {
                Some(f) => feature_map(c, f)?,
                None => FeatureMap::Identity,
            };
            if let Some(a) = lookup(&kv, "act") {
                if !matches!(&a.value, Value::Term { name, args: None } if name == "relu") {
                    return Err(c.err_at(a.col, "only act=relu is supported"));
                }
            }
            NeuralPotential::new(features, hidden, clamp)
                .map(Potential::Neural)
                .map_err(|e| c.err_at(v.col, e.to_string()))
        }
        "MLN" => {
            let mut w = None;
            let mut rule = None;
            for a in args {
                match (a.key.as_deref(), &a.value.value) {
                    (Some("w0"), _) if w.is_none() => w = Some(num(c, &a.value)?),
                    (None, Value::Str(s)) if rule.is_none() => rule = Some(s.clone()),
                    _ => return Err(c.err_at(a.value.col, "MLN takes w0=<weight> and one quoted rule")),
                }
            }
            let rule = rule.ok_or_else(|| c.err_at(v.col, "MLN needs a quoted rule"))?;
            MlnPotential::new(w.unwrap_or(0.0), rule)
                .map(Potential::Mln)
                .map_err(|e| c.err_at(v.col, e.to_string()))
        }
        _ => Err(c.err_at(v.col, format!("unknown potential `{name}`"))),
    }
}

fn atom(c: &Cursor, v: &Spanned) -> Result<AtomRef> {
    match &v.value {
        Value::Term { name, args: Some(args) } => {
            let names = args
                .iter()
                .map(|a| match (&a.key, &a.value.value) {
                    (None, Value::Term { name, args: None }) => Ok(name.clone()),
                    _ => Err(c.err_at(a.value.col, "atom arguments must be logical variables")),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(AtomRef::new(name.clone(), names))
        }
        _ => Err(c.err_at(v.col, "expected an atom like pred(X,Y)")),
    }
}

fn constraint(c: &mut Cursor) -> Result<Vec<ConstraintTerm>> {
    c.skip_ws();
    let col = c.col();
    let first = c.ident()?;
    if first == "none" {
        return Ok(Vec::new());
    }
    c.pos = col - 1;
    let mut terms = Vec::new();
    loop {
        let name = c.ident()?;
        c.skip_ws();
        let term = if c.eat('(') {
            let mut args = vec![c.ident()?];
            while c.eat(',') {
                args.push(c.ident()?);
            }
            c.expect(')')?;
            ConstraintTerm::Relation { name, args }
        } else if c.eat('!') {
            c.expect('=')?;
            ConstraintTerm::Neq(name, c.ident()?)
        } else if c.eat('=') {
            ConstraintTerm::Eq(name, c.ident()?)
        } else {
            return Err(c.err("expected `(`, `=` or `!=` in constraint"));
        };
        terms.push(term);
        if !c.eat('&') {
            break;
        }
    }
    Ok(terms)
}

fn parse_domain(c: &mut Cursor) -> Result<Domain> {
    let kind_col = {
        c.skip_ws();
        c.col()
    };
    let kind = c.ident()?;
    let dom = match kind.as_str() {
        "discrete" => {
            c.expect('{')?;
            let start = c.pos;
            let close = c.chars[start..]
                .iter()
                .position(|&ch| ch == '}')
                .ok_or_else(|| c.err("missing `}`"))?;
            let body: String = c.chars[start..start + close].iter().collect();
            c.pos = start + close + 1;
            let labels: Vec<String> = body.split(',').map(|s| s.trim().to_string()).collect();
            if labels.iter().any(|l| l.is_empty() || !l.chars().all(is_ident_char)) {
                return Err(c.err_at(start + 1, "labels must be non-empty names separated by commas"));
            }
            Domain::discrete(labels)
        }
        "continuous" => {
            c.skip_ws();
            if c.peek() == Some('[') {
                let v = c.value()?;
                match num_list(c, &v)?.as_slice() {
                    [lo, hi] => Domain::continuous(*lo, *hi),
                    _ => return Err(c.err_at(v.col, "continuous bounds take [lo,hi]")),
                }
            } else {
                c.keyword("unbounded")?;
                Ok(Domain::unbounded())
            }
        }
        _ => return Err(c.err_at(kind_col, format!("unknown domain kind `{kind}`"))),
    };
    dom.map_err(|e| c.err_at(kind_col, e.to_string()))
}

fn parse_predicate(c: &mut Cursor) -> Result<Predicate> {
    let name = c.ident()?;
    c.expect('(')?;
    let (mut arg_names, mut arg_populations) = (Vec::new(), Vec::new());
    if !c.eat(')') {
        loop {
            arg_names.push(c.ident()?);
            c.expect(':')?;
            arg_populations.push(c.ident()?);
            if c.eat(')') {
                break;
            }
            c.expect(',')?;
        }
    }
    c.expect('-')?;
    c.expect('>')?;
    let domain = c.ident()?;
    Ok(Predicate {
        name,
        arg_populations,
        arg_names,
        domain,
    })
}

fn parse_parfactor(c: &mut Cursor) -> Result<Parfactor> {
    let id = c.ident()?;
    c.expect(':')?;
    let mut helper_v = None;
    let mut pots = None;
    let mut atoms = None;
    let mut cons = None;
    while !c.at_end() {
        let kcol = c.col();
        let key = c.ident()?;
        c.expect('=')?;
        let dup = || c.err_at(kcol, format!("`{key}` given twice"));
        match key.as_str() {
            "helper" => {
                if helper_v.is_some() {
                    return Err(dup());
                }
                let v = c.value()?;
                helper_v = Some(helper(c, &v)?);
            }
            "potential" => {
                if pots.is_some() {
                    return Err(dup());
                }
                let mut list = Vec::new();
                loop {
                    let v = c.value()?;
                    list.push(potential(c, &v)?);
                    if !c.eat(',') {
                        break;
                    }
                }
                pots = Some(list);
            }
            "atoms" => {
                if atoms.is_some() {
                    return Err(dup());
                }
                let v = c.value()?;
                let Value::List(items) = &v.value else {
                    return Err(c.err_at(v.col, "atoms take a list like [p(X),q(X)]"));
                };
                atoms = Some(items.iter().map(|i| atom(c, i)).collect::<Result<Vec<_>>>()?);
            }
            "constraint" => {
                if cons.is_some() {
                    return Err(dup());
                }
                cons = Some(constraint(c)?);
            }
            _ => return Err(c.err_at(kcol, format!("unknown parfactor field `{key}`"))),
        }
    }
    let atoms = atoms.ok_or_else(|| c.err("parfactor needs atoms=[...]"))?;
    Ok(Parfactor::new(
        id,
        helper_v.unwrap_or(Helper::Uniform),
        pots.unwrap_or_default(),
        atoms,
        cons.unwrap_or_default(),
    ))
}

fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => in_str = !in_str,
            '#' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

pub fn parse_model(text: &str) -> Result<RelationalModel> {
    let mut model = RelationalModel::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = strip_comment(raw);
        let mut c = Cursor::new(line, line_no);
        if c.at_end() {
            continue;
        }
        let kw_col = c.col();
        let kw = c.ident()?;
        let semantic = |e: Error| match e {
            Error::Syntax { .. } => e,
            other => Error::Syntax {
                line: line_no,
                col: kw_col,
                msg: other.to_string(),
            },
        };
        match kw.as_str() {
            "domain" => {
                let name = c.ident()?;
                let d = parse_domain(&mut c)?;
                if !c.at_end() {
                    return Err(c.err("unexpected text after domain"));
                }
                model.add_domain(name, d).map_err(semantic)?;
            }
            "predicate" => {
                let p = parse_predicate(&mut c)?;
                if !c.at_end() {
                    return Err(c.err("unexpected text after predicate"));
                }
                model.add_predicate(p).map_err(semantic)?;
            }
            "relation" => {
                let name = c.ident()?;
                c.keyword("from")?;
                let path = c.rest();
                if path.is_empty() {
                    return Err(c.err("relation needs a file path"));
                }
                if model.relations.iter().any(|r| r.name == name) {
                    return Err(semantic(Error::model(format!("relation `{name}` declared twice"))));
                }
                model.relations.push(RelationImport { name, path });
            }
            "parfactor" => {
                let pf = parse_parfactor(&mut c)?;
                model.add_parfactor(pf).map_err(semantic)?;
            }
            _ => return Err(c.err_at(kw_col, format!("unknown declaration `{kw}`"))),
        }
    }
    Ok(model)
}

fn fmt_potential(p: &Potential) -> String {
    match p {
        Potential::Neural(n) => {
            let hidden: Vec<String> = n.hidden.iter().map(ToString::to_string).collect();
            format!(
                "NN(layers=[{}],clamp=[{},{}],fm={})",
                hidden.join(","),
                n.clamp.0,
                n.clamp.1,
                n.features
            )
        }
        Potential::Mln(m) => m.to_string(),
    }
}

pub fn print_parfactor(pf: &Parfactor) -> String {
    let mut s = format!("parfactor {}: helper={}", pf.id, pf.helper);
    if !pf.potentials.is_empty() {
        let pots: Vec<String> = pf.potentials.iter().map(fmt_potential).collect();
        s.push_str(&format!(" potential={}", pots.join(", ")));
    }
    let atoms: Vec<String> = pf.atoms.iter().map(ToString::to_string).collect();
    s.push_str(&format!(" atoms=[{}]", atoms.join(",")));
    if pf.constraint.is_empty() {
        s.push_str(" constraint=none");
    } else {
        let terms: Vec<String> = pf.constraint.iter().map(ToString::to_string).collect();
        s.push_str(&format!(" constraint={}", terms.join(" & ")));
    }
    s
}

pub fn print_model(model: &RelationalModel) -> String {
    let mut out = String::new();
    for (name, d) in &model.domains {
        out.push_str(&format!("domain {name} {d}\n"));
    }
    for p in model.predicates.values() {
        let args: Vec<String> = p
            .arg_names
            .iter()
            .zip(&p.arg_populations)
            .map(|(n, pop)| format!("{n}:{pop}"))
            .collect();
        out.push_str(&format!("predicate {}({}) -> {}\n", p.name, args.join(","), p.domain));
    }
    for r in &model.relations {
        out.push_str(&format!("relation {} from {}\n", r.name, r.path));
    }
    for pf in &model.parfactors {
        out.push_str(&print_parfactor(pf));
        out.push('\n');
    }
    out
}

/// Parse a single helper expression, as written after `helper=`.
pub fn parse_helper(text: &str) -> Result<Helper> {
    let mut c = Cursor::new(text, 1);
    let v = c.value()?;
    let h = helper(&c, &v)?;
    if !c.at_end() {
        return Err(c.err("unexpected text after helper"));
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DENOISE: &str = "\
domain intensity continuous [0,1]
predicate obs(P:pixel) -> intensity
predicate val(P:pixel) -> intensity
relation nb from nb.tsv
parfactor pair: helper=LG(1,0,1) potential=NN(layers=[64,32],clamp=[-10,10],fm=absdiff) atoms=[val(P1),val(P2)] constraint=nb(P1,P2)
parfactor obs: helper=LG(1,0,1) potential=NN(layers=[64,32],clamp=[-10,10],fm=absdiff) atoms=[obs(P),val(P)] constraint=none
";

    #[test]
    fn denoise_model() {
        let m = parse_model(DENOISE).unwrap();
        assert_eq!(m.parfactors.len(), 2);
        for pf in &m.parfactors {
            assert_eq!(
                pf.helper,
                Helper::LinearGaussian {
                    slope: 1.0,
                    intercept: 0.0,
                    variance: 1.0
                }
            );
        }
        assert_eq!(m.relations[0].path, "nb.tsv");
        let again = parse_model(&print_model(&m)).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn empty_and_comments() {
        let m = parse_model("# nothing here\n\n   \n").unwrap();
        assert!(m.parfactors.is_empty() && m.domains.is_empty());
    }

    #[test]
    fn errors_carry_position() {
        let e = parse_model("domain d continuous [0,1]\npredicate p(X:x) -> d\nparfactor a: helper=Uniform atoms=[q(X)]\n")
            .unwrap_err();
        assert!(matches!(e, Error::Syntax { line: 3, .. }), "{e}");
        assert!(e.to_string().contains("unknown predicate"), "{e}");

        let e = parse_model("domain d continuous [0,1\n").unwrap_err();
        assert!(matches!(e, Error::Syntax { line: 1, col: 25, .. }), "{e}");

        let e = parse_model("domian d discrete {a}\n").unwrap_err();
        assert!(matches!(e, Error::Syntax { line: 1, col: 1, .. }), "{e}");

        let e = parse_model(
            "domain r continuous unbounded\npredicate p(X:x) -> r\nparfactor a: helper=Uniform atoms=[p(X)]\n",
        )
        .unwrap_err();
        assert!(e.to_string().contains("requires_helper"), "{e}");

        let e = parse_model(
            "domain d continuous [0,1]\npredicate p(X:x) -> d\nparfactor a: potential=NN(act=tanh) atoms=[p(X)]\n",
        )
        .unwrap_err();
        assert!(e.to_string().contains("relu"), "{e}");
    }

    #[test]
    fn helpers_round_trip() {
        for s in [
            "Uniform",
            "CG",
            "Gaussian(mean=[0.5,1],cov=[1,0.25,0.25,2])",
            "LG(0.9,0.05,0.01)",
            "Categorical([0.25,0.75])",
            "CG(weights=[0.5,0.5],means=[[0],[1]],covs=[[1],[2]])",
        ] {
            let h = parse_helper(s).unwrap();
            assert_eq!(h.to_string(), s);
        }
        assert!(parse_helper("LG(1,0,-1)").is_err());
        assert!(parse_helper("Poisson").is_err());
    }
}
