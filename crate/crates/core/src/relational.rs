//! Relational model description and grounding.
//!
//! A [`RelationalModel`] is a set of [`Parfactor`]s over typed atoms. Grounding
//! against a [`Universe`] (entity populations plus extensional relations)
//! instantiates every admitted substitution into a [`GroundFactor`] of a
//! [`GroundGraph`]. Ground variables are identified by their atom instance,
//! written `pred(inst1,inst2)`, so two parfactors that mention the same atom
//! instance share one variable.
//!
//! Values of every variable are stored as `f64`. Discrete values are the
//! index of the label in the domain's label list.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::potentials::{Helper, Potential};

/// A value assignment to every ground variable of a graph, indexed by variable.
pub type Frame = Vec<f64>;

/// Evidence keyed by ground-variable index.
pub type Evidence = BTreeMap<usize, f64>;

#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Discrete(Vec<String>),
    Continuous { lo: f64, hi: f64 },
}

impl Domain {
    pub fn discrete<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::model("discrete domain needs at least one label"));
        }
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::model(format!("duplicate label `{l}` in discrete domain")));
            }
        }
        Ok(Domain::Discrete(labels))
    }

    pub fn continuous(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::model(format!("continuous domain needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Domain::Continuous { lo, hi })
    }

    pub fn unbounded() -> Self {
        Domain::Continuous {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Domain::Discrete(_))
    }

    pub fn cardinality(&self) -> Option<usize> {
        match self {
            Domain::Discrete(l) => Some(l.len()),
            Domain::Continuous { .. } => None,
        }
    }

    pub fn labels(&self) -> &[String] {
        match self {
            Domain::Discrete(l) => l,
            Domain::Continuous { .. } => &[],
        }
    }

    /// Bounds of a continuous domain; `None` for discrete ones.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            Domain::Continuous { lo, hi } => Some((lo, hi)),
            Domain::Discrete(_) => None,
        }
    }

    pub fn is_bounded(&self) -> bool {
        match *self {
            Domain::Discrete(_) => true,
            Domain::Continuous { lo, hi } => lo.is_finite() && hi.is_finite(),
        }
    }

    /// Unbounded continuous domains cannot carry a uniform helper.
    pub fn requires_helper(&self) -> bool {
        !self.is_bounded()
    }

    pub fn contains(&self, v: f64) -> bool {
        match self {
            Domain::Discrete(l) => v >= 0.0 && v.fract() == 0.0 && (v as usize) < l.len(),
            Domain::Continuous { lo, hi } => v.is_finite() && v >= *lo && v <= *hi,
        }
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels().iter().position(|l| l == label)
    }

    /// Render a value: the label for discrete domains, shortest round-trip decimal otherwise.
    pub fn format_value(&self, v: f64) -> String {
        match self {
            Domain::Discrete(l) if self.contains(v) => l[v as usize].clone(),
            _ => format!("{v}"),
        }
    }

    /// Parse a value written either as a label or (for discrete domains) a label index.
    pub fn parse_value(&self, s: &str) -> Result<f64> {
        let s = s.trim();
        let v = match self {
            Domain::Discrete(_) => match self.label_index(s) {
                Some(i) => i as f64,
                None => s
                    .parse::<usize>()
                    .map(|i| i as f64)
                    .map_err(|_| Error::data(format!("`{s}` is not a label of {self}")))?,
            },
            Domain::Continuous { .. } => s
                .parse::<f64>()
                .map_err(|_| Error::data(format!("`{s}` is not a number")))?,
        };
        if !self.contains(v) {
            return Err(Error::data(format!("value `{s}` outside domain {self}")));
        }
        Ok(v)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Discrete(l) => write!(f, "discrete {{{}}}", l.join(",")),
            Domain::Continuous { lo, hi } if lo.is_infinite() && hi.is_infinite() => {
                write!(f, "continuous unbounded")
            }
            Domain::Continuous { lo, hi } => write!(f, "continuous [{lo},{hi}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Predicate {
    pub name: String,
    /// Population of each argument position.
    pub arg_populations: Vec<String>,
    /// Logical-variable names used in the declaration; only for printing.
    pub arg_names: Vec<String>,
    /// Name of the value domain.
    pub domain: String,
}

/// An atom inside a parfactor: a predicate applied to logical variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomRef {
    pub predicate: String,
    pub args: Vec<String>,
}

impl AtomRef {
    pub fn new<S: Into<String>>(predicate: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        AtomRef {
            predicate: predicate.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for AtomRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.predicate, self.args.join(","))
    }
}

/// One conjunct of a parfactor constraint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConstraintTerm {
    /// Two logical variables bound to different instances.
    Neq(String, String),
    /// Two logical variables bound to the same instance.
    Eq(String, String),
    /// Membership of the bound tuple in an extensional relation.
    Relation { name: String, args: Vec<String> },
}

impl ConstraintTerm {
    fn variables(&self) -> Vec<&str> {
        match self {
            ConstraintTerm::Neq(a, b) | ConstraintTerm::Eq(a, b) => vec![a, b],
            ConstraintTerm::Relation { args, .. } => args.iter().map(String::as_str).collect(),
        }
    }

    fn admits(&self, sub: &Substitution, universe: &Universe) -> Result<bool> {
        let bound = |v: &str| {
            sub.get(v)
                .ok_or_else(|| Error::model(format!("constraint variable `{v}` is not bound")))
        };
        Ok(match self {
            ConstraintTerm::Neq(a, b) => bound(a)? != bound(b)?,
            ConstraintTerm::Eq(a, b) => bound(a)? == bound(b)?,
            ConstraintTerm::Relation { name, args } => {
                let rel = universe.relations.get(name).ok_or_else(|| {
                    Error::model(format!("constraint references undeclared relation `{name}`"))
                })?;
                let tuple = args
                    .iter()
                    .map(|a| bound(a).map(str::to_string))
                    .collect::<Result<Vec<_>>>()?;
                rel.contains(&tuple)
            }
        })
    }
}

impl fmt::Display for ConstraintTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintTerm::Neq(a, b) => write!(f, "{a}!={b}"),
            ConstraintTerm::Eq(a, b) => write!(f, "{a}={b}"),
            ConstraintTerm::Relation { name, args } => write!(f, "{name}({})", args.join(",")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogicalVar {
    pub name: String,
    pub population: String,
}

/// Assignment of instances to a parfactor's logical variables, in the parfactor's variable order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Substitution(pub Vec<(String, String)>);

impl Substitution {
    pub fn get(&self, var: &str) -> Option<&str> {
        self.0.iter().find(|(v, _)| v == var).map(|(_, i)| i.as_str())
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(v, i)| format!("{v}->{i}")).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// A parametric factor: helper distribution, potentials, atoms and a constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct Parfactor {
    pub id: String,
    pub helper: Helper,
    pub potentials: Vec<Potential>,
    pub atoms: Vec<AtomRef>,
    /// Conjunction; empty means no constraint.
    pub constraint: Vec<ConstraintTerm>,
    /// Resolved when the parfactor is added to a model.
    pub logvars: Vec<LogicalVar>,
    /// Value domain of each clique slot, resolved when added to a model.
    pub domains: Vec<Domain>,
}

impl Parfactor {
    pub fn new(
        id: impl Into<String>,
        helper: Helper,
        potentials: Vec<Potential>,
        atoms: Vec<AtomRef>,
        constraint: Vec<ConstraintTerm>,
    ) -> Self {
        Parfactor {
            id: id.into(),
            helper,
            potentials,
            atoms,
            constraint,
            logvars: Vec::new(),
            domains: Vec::new(),
        }
    }

    pub fn arity(&self) -> usize {
        self.atoms.len()
    }

    /// Names by which a formula may refer to clique slots: the atom text, and the
    /// bare predicate name when it occurs once in the clique.
    pub fn slot_names(&self) -> Vec<Vec<String>> {
        self.atoms
            .iter()
            .map(|a| {
                let mut names = vec![a.to_string()];
                if self.atoms.iter().filter(|b| b.predicate == a.predicate).count() == 1 {
                    names.push(a.predicate.clone());
                }
                names
            })
            .collect()
    }
}

/// A relation imported from a fact file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationImport {
    pub name: String,
    pub path: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RelationalModel {
    pub domains: BTreeMap<String, Domain>,
    pub predicates: BTreeMap<String, Predicate>,
    pub relations: Vec<RelationImport>,
    pub parfactors: Vec<Parfactor>,
}

impl RelationalModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_domain(&mut self, name: impl Into<String>, domain: Domain) -> Result<()> {
        let name = name.into();
        if self.domains.contains_key(&name) {
            return Err(Error::model(format!("domain `{name}` declared twice")));
        }
        self.domains.insert(name, domain);
        Ok(())
    }

    pub fn add_predicate(&mut self, pred: Predicate) -> Result<()> {
        if !self.domains.contains_key(&pred.domain) {
            return Err(Error::model(format!(
                "predicate `{}` uses unknown domain `{}`",
                pred.name, pred.domain
            )));
        }
        if self.predicates.contains_key(&pred.name) {
            return Err(Error::model(format!("predicate `{}` declared twice", pred.name)));
        }
        self.predicates.insert(pred.name.clone(), pred);
        Ok(())
    }

    pub fn predicate_domain(&self, pred: &str) -> Option<&Domain> {
        self.predicates.get(pred).and_then(|p| self.domains.get(&p.domain))
    }

    /// Validate a parfactor against the declarations, resolve its logical
    /// variables and slot domains, bind its potentials, and append it.
    pub fn add_parfactor(&mut self, mut pf: Parfactor) -> Result<()> {
        let ctx = format!("parfactor `{}`", pf.id);
        if self.parfactors.iter().any(|p| p.id == pf.id) {
            return Err(Error::model(format!("{ctx} declared twice")));
        }
        let mut logvars: Vec<LogicalVar> = Vec::new();
        let mut domains = Vec::with_capacity(pf.atoms.len());
        for atom in &pf.atoms {
            let pred = self.predicates.get(&atom.predicate).ok_or_else(|| {
                Error::model(format!("{ctx}: unknown predicate `{}`", atom.predicate))
            })?;
            if pred.arg_populations.len() != atom.args.len() {
                return Err(Error::model(format!(
                    "{ctx}: `{}` takes {} arguments, got {}",
                    atom.predicate,
                    pred.arg_populations.len(),
                    atom.args.len()
                )));
            }
            for (arg, pop) in atom.args.iter().zip(&pred.arg_populations) {
                match logvars.iter().find(|lv| &lv.name == arg) {
                    Some(lv) if &lv.population != pop => {
                        return Err(Error::model(format!(
                            "{ctx}: logical variable `{arg}` used with populations `{}` and `{pop}`",
                            lv.population
                        )))
                    }
                    Some(_) => {}
                    None => logvars.push(LogicalVar {
                        name: arg.clone(),
                        population: pop.clone(),
                    }),
                }
            }
            domains.push(self.domains[&pred.domain].clone());
        }
        for term in &pf.constraint {
            for v in term.variables() {
                if !logvars.iter().any(|lv| lv.name == v) {
                    return Err(Error::model(format!(
                        "{ctx}: constraint variable `{v}` does not occur in any atom"
                    )));
                }
            }
        }
        pf.logvars = logvars;
        pf.domains = domains;
        pf.helper
            .validate(&pf.domains)
            .map_err(|e| e.context(&ctx))?;
        let names = pf.slot_names();
        for pot in &mut pf.potentials {
            pot.bind(&names, &pf.domains).map_err(|e| e.context(&ctx))?;
        }
        self.parfactors.push(pf);
        Ok(())
    }

    pub fn parfactor_index(&self, id: &str) -> Option<usize> {
        self.parfactors.iter().position(|p| p.id == id)
    }

    /// All population names referenced by predicate declarations.
    pub fn populations(&self) -> BTreeSet<String> {
        self.predicates
            .values()
            .flat_map(|p| p.arg_populations.iter().cloned())
            .collect()
    }
}

/// Finite entity populations and extensional relations used for grounding.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Universe {
    pub populations: BTreeMap<String, Vec<String>>,
    pub relations: BTreeMap<String, BTreeSet<Vec<String>>>,
}

impl Universe {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_population<S: Into<String>>(
        mut self,
        name: impl Into<String>,
        instances: impl IntoIterator<Item = S>,
    ) -> Self {
        self.populations
            .insert(name.into(), instances.into_iter().map(Into::into).collect());
        self
    }

    pub fn add_fact<S: Into<String>>(&mut self, relation: impl Into<String>, tuple: impl IntoIterator<Item = S>) {
        self.relations
            .entry(relation.into())
            .or_default()
            .insert(tuple.into_iter().map(Into::into).collect());
    }
}

/// Every substitution of `pf`'s logical variables admitted by its constraint,
/// in lexicographic order of population positions (first variable slowest).
pub fn enumerate_substitutions(pf: &Parfactor, universe: &Universe) -> Result<Vec<Substitution>> {
    let pops = pf
        .logvars
        .iter()
        .map(|lv| {
            universe.populations.get(&lv.population).ok_or_else(|| {
                Error::model(format!(
                    "parfactor `{}`: unknown population `{}`",
                    pf.id, lv.population
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for term in &pf.constraint {
        if let ConstraintTerm::Relation { name, .. } = term {
            if !universe.relations.contains_key(name) {
                return Err(Error::model(format!(
                    "parfactor `{}`: constraint references undeclared relation `{name}`",
                    pf.id
                )));
            }
        }
    }
    let mut out = Vec::new();
    if pops.iter().any(|p| p.is_empty()) {
        return Ok(out);
    }
    let mut idx = vec![0usize; pops.len()];
    loop {
        let sub = Substitution(
            pf.logvars
                .iter()
                .zip(&idx)
                .zip(&pops)
                .map(|((lv, &k), pop)| (lv.name.clone(), pop[k].clone()))
                .collect(),
        );
        let mut ok = true;
        for term in &pf.constraint {
            if !term.admits(&sub, universe)? {
                ok = false;
                break;
            }
        }
        if ok {
            out.push(sub);
        }
        // odometer, last variable fastest
        let mut pos = idx.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < pops[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundVariable {
    /// Atom instance, e.g. `val(p0_1)`.
    pub id: String,
    pub predicate: String,
    pub args: Vec<String>,
    pub domain: Domain,
    pub evidence: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundFactor {
    pub parfactor: usize,
    pub substitution: Substitution,
    /// Variable indices in clique-slot order.
    pub vars: Vec<usize>,
}

impl GroundFactor {
    /// Position of `var` in this factor's clique.
    pub fn slot_of(&self, var: usize) -> Option<usize> {
        self.vars.iter().position(|&v| v == var)
    }

    /// Clique values read from a frame.
    pub fn values(&self, frame: &[f64]) -> Vec<f64> {
        self.vars.iter().map(|&v| frame[v]).collect()
    }
}

/// A grounded factor graph. Immutable once built.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundGraph {
    vars: Vec<GroundVariable>,
    factors: Vec<GroundFactor>,
    blanket: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
}

pub fn atom_instance_id(predicate: &str, args: &[String]) -> String {
    format!("{predicate}({})", args.join(","))
}

/// Ground `model` over `universe`. Evidence is keyed by atom-instance id.
pub fn ground(
    model: &RelationalModel,
    universe: &Universe,
    evidence: &BTreeMap<String, f64>,
) -> Result<GroundGraph> {
    let mut g = GroundGraph::default();
    for (pf_idx, pf) in model.parfactors.iter().enumerate() {
        for sub in enumerate_substitutions(pf, universe)? {
            let mut vars = Vec::with_capacity(pf.atoms.len());
            for (atom, domain) in pf.atoms.iter().zip(&pf.domains) {
                let args: Vec<String> = atom
                    .args
                    .iter()
                    .map(|a| sub.get(a).expect("substitution is total").to_string())
                    .collect();
                let id = atom_instance_id(&atom.predicate, &args);
                let vi = match g.index.get(&id) {
                    Some(&vi) => vi,
                    None => {
                        let vi = g.vars.len();
                        g.index.insert(id.clone(), vi);
                        g.vars.push(GroundVariable {
                            id,
                            predicate: atom.predicate.clone(),
                            args,
                            domain: domain.clone(),
                            evidence: None,
                        });
                        g.blanket.push(Vec::new());
                        vi
                    }
                };
                if vars.contains(&vi) {
                    return Err(Error::model(format!(
                        "parfactor `{}` with substitution {sub} repeats variable `{}`",
                        pf.id, g.vars[vi].id
                    )));
                }
                vars.push(vi);
            }
            let fi = g.factors.len();
            for &v in &vars {
                g.blanket[v].push(fi);
            }
            g.factors.push(GroundFactor {
                parfactor: pf_idx,
                substitution: sub,
                vars,
            });
        }
    }
    for (id, &value) in evidence {
        let vi = *g
            .index
            .get(id)
            .ok_or_else(|| Error::data(format!("evidence for unknown atom instance `{id}`")))?;
        let var = &mut g.vars[vi];
        if !var.domain.contains(value) {
            return Err(Error::data(format!(
                "evidence value {value} for `{id}` outside domain {}",
                var.domain
            )));
        }
        var.evidence = Some(value);
    }
    Ok(g)
}

impl GroundGraph {
    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty() && self.factors.is_empty()
    }

    pub fn vars(&self) -> &[GroundVariable] {
        &self.vars
    }

    pub fn var(&self, i: usize) -> &GroundVariable {
        &self.vars[i]
    }

    pub fn factors(&self) -> &[GroundFactor] {
        &self.factors
    }

    pub fn factor(&self, f: usize) -> &GroundFactor {
        &self.factors[f]
    }

    /// Indices of the factors incident to variable `i`.
    pub fn factors_of(&self, i: usize) -> &[usize] {
        &self.blanket[i]
    }

    pub fn var_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Evidence recorded at grounding time.
    pub fn evidence(&self) -> Evidence {
        self.vars
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.evidence.map(|e| (i, e)))
            .collect()
    }

    /// Incident factors and neighbouring variables of `var`.
    pub fn markov_blanket(&self, var: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        if var >= self.vars.len() {
            return Err(Error::usage(format!(
                "variable index {var} out of range (graph has {} variables)",
                self.vars.len()
            )));
        }
        let factors = self.blanket[var].clone();
        let neighbors: BTreeSet<usize> = factors
            .iter()
            .flat_map(|&f| self.factors[f].vars.iter().copied())
            .filter(|&v| v != var)
            .collect();
        Ok((factors, neighbors.into_iter().collect()))
    }

    /// Check that a frame covers every variable with an in-domain value.
    pub fn check_frame(&self, frame: &[f64]) -> Result<()> {
        if frame.len() != self.vars.len() {
            return Err(Error::data(format!(
                "frame has {} values, graph has {} variables",
                frame.len(),
                self.vars.len()
            )));
        }
        for (v, &x) in self.vars.iter().zip(frame) {
            if !v.domain.contains(x) {
                return Err(Error::data(format!(
                    "value {x} for `{}` outside domain {}",
                    v.id, v.domain
                )));
            }
        }
        Ok(())
    }
}

/// Draw `min(k, |vars|)` ground variables uniformly without replacement and
/// return them with every factor incident to them.
pub fn sample_groundings<R: Rng + ?Sized>(graph: &GroundGraph, k: usize, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let pool: Vec<usize> = (0..graph.num_vars()).collect();
    sample_groundings_from(graph, &pool, k, rng)
}

/// As [`sample_groundings`], drawing only from `pool`.
pub fn sample_groundings_from<R: Rng + ?Sized>(
    graph: &GroundGraph,
    pool: &[usize],
    k: usize,
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>) {
    let take = k.min(pool.len());
    let mut vars: Vec<usize> = if take == pool.len() {
        pool.to_vec()
    } else {
        rand::seq::index::sample(rng, pool.len(), take)
            .into_iter()
            .map(|j| pool[j])
            .collect()
    };
    vars.sort_unstable();
    let factors: BTreeSet<usize> = vars
        .iter()
        .flat_map(|&v| graph.factors_of(v).iter().copied())
        .collect();
    (vars, factors.into_iter().collect())
}
