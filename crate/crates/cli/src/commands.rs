//! Command-line surface of `rnmrf`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rnmrf_core::inference::{default_frame, map_solvers, Anneal, MapConfig, MapInit};
use rnmrf_core::optim::OptimizerParams;
use rnmrf_core::trainer::{trace_csv, train, TrainConfig};
use rnmrf_core::{ground, Error, Frame, GroundGraph, RelationalModel, Result, Universe};

use crate::data::{
    assignment_to_csv, facts_to_string, frames_to_csv, get_image, image_evidence, image_pairs, image_universe,
    load_universe, put_image, read_evidence, read_frames, read_pgm, write_pgm, Gray,
};
use crate::dsl::parse_model;
use crate::experiments::{
    denoise_experiment, gradcheck, iris_experiment, parse_iris, segment_experiment, DenoiseConfig, IrisConfig,
    SegmentConfig, IRIS_CSV,
};
use crate::metrics::{accuracy, f1_per_class, image_errors, mse};
use crate::params::{load_params, save_params};
use crate::synth::{denoise_images, denoise_model_text, segment_frame, segment_map, segment_model_text, segment_universe};

#[derive(Parser, Debug)]
#[command(name = "rnmrf", version, about = "Relational neural Markov random fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit helpers and train potentials by pseudo-likelihood.
    Train(TrainArgs),
    /// MAP assignment of the non-evidence variables.
    Map(MapArgs),
    /// Score predictions against ground truth; prints CSV.
    Eval(EvalArgs),
    /// Finite-difference check of the analytic gradient; exits 1 on failure.
    Gradcheck(GradcheckArgs),
    /// Generate synthetic data sets.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Run a desk-scale experiment end to end; prints CSV.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of frames, or a directory of `<stem>.noisy.pgm`/`<stem>.clean.pgm` pairs.
    #[arg(long)]
    pub data: PathBuf,
    /// Populations and relation facts for CSV data.
    #[arg(long)]
    pub facts: Option<PathBuf>,
    #[arg(long, default_value_t = 5000)]
    pub iters: usize,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 100)]
    pub vars_per_iter: usize,
    #[arg(long, default_value_t = 1)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "importance")]
    pub estimator: String,
    #[arg(long, default_value = "adam")]
    pub optimizer: String,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Predicates treated as always observed (conditional training).
    #[arg(long, value_delimiter = ',')]
    pub condition: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the loss trace CSV here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MapArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub params: PathBuf,
    /// `variable_id,value` CSV of observed atoms.
    #[arg(long, conflicts_with = "image")]
    pub evidence: Option<PathBuf>,
    #[arg(long)]
    pub facts: Option<PathBuf>,
    /// Noisy PGM; its pixels become `obs` evidence of an image graph.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// `variable_id,value` CSV output.
    #[arg(long)]
    pub out: PathBuf,
    /// Restored PGM output for image graphs.
    #[arg(long)]
    pub image_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "icm")]
    pub solver: String,
    #[arg(long, default_value_t = 10)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 20)]
    pub candidates: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    Denoise,
    Tabular,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub task: Task,
    /// Predicted images (denoise) or one `variable_id,value` CSV (tabular).
    #[arg(long, num_args = 1.., required = true)]
    pub pred: Vec<PathBuf>,
    #[arg(long, num_args = 1.., required = true)]
    pub truth: Vec<PathBuf>,
    /// Only score variables of this predicate (tabular).
    #[arg(long)]
    pub predicate: Option<String>,
    /// Score numeric values by mean squared error instead of accuracy/F1 (tabular).
    #[arg(long)]
    pub continuous: bool,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// `importance`, `riemann`, or `all`.
    #[arg(long, default_value = "all")]
    pub estimator: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
}

#[derive(Subcommand, Debug)]
pub enum SynthCommand {
    /// Piecewise-constant images with Gaussian noise, clipped to [0,1].
    Denoise {
        #[arg(long, default_value_t = 16)]
        size: usize,
        #[arg(long, default_value_t = 6)]
        images: usize,
        #[arg(long, default_value_t = 0.3)]
        noise_var: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Relational segment maps with per-type features and rule-consistent edge cases.
    Segments {
        #[arg(long, default_value_t = 80)]
        train: usize,
        #[arg(long, default_value_t = 200)]
        test: usize,
        #[arg(long, default_value_t = 0.05)]
        edge_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum ExperimentCommand {
    Denoise {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        train_images: Option<usize>,
        #[arg(long)]
        candidates: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        anneal: bool,
    },
    Iris {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        iters: Option<usize>,
        /// Iris CSV; defaults to the bundled copy.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    Segments {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        iters: Option<usize>,
    },
}

/// Exit status for an error: 2 for usage errors, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) => 2,
        _ => 1,
    }
}

fn read_model(path: &Path) -> Result<RelationalModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| e.context(path.display()))
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::data(format!("cannot write {}: {e}", path.display())))
}

fn image_frames(graph: &GroundGraph, pairs: &[(Gray, Gray)]) -> Result<Vec<Frame>> {
    pairs
        .iter()
        .map(|(noisy, clean)| {
            let mut f = vec![0.0; graph.num_vars()];
            put_image(graph, &mut f, "obs", noisy)?;
            put_image(graph, &mut f, "val", clean)?;
            Ok(f)
        })
        .collect()
}

fn load_image_pairs(dir: &Path) -> Result<Vec<(Gray, Gray)>> {
    let pairs = image_pairs(dir)?
        .into_iter()
        .map(|(_, n, c)| Ok((read_pgm(&n)?, read_pgm(&c)?)))
        .collect::<Result<Vec<_>>>()?;
    let (h, w) = (pairs[0].0.height, pairs[0].0.width);
    if pairs.iter().any(|(n, c)| (n.height, n.width) != (h, w) || (c.height, c.width) != (h, w)) {
        return Err(Error::data(format!("images in {} differ in size", dir.display())));
    }
    Ok(pairs)
}

pub fn cmd_train(a: &TrainArgs) -> Result<String> {
    let mut model = read_model(&a.model)?;
    let (graph, frames) = if a.data.is_dir() {
        let pairs = load_image_pairs(&a.data)?;
        let u = image_universe(pairs[0].0.height, pairs[0].0.width);
        let g = ground(&model, &u, &BTreeMap::new())?;
        let frames = image_frames(&g, &pairs)?;
        (g, frames)
    } else {
        let u = load_universe(&model, base_dir(&a.model), a.facts.as_deref())?;
        let g = ground(&model, &u, &BTreeMap::new())?;
        let frames = read_frames(&g, &a.data)?;
        (g, frames)
    };
    let cfg = TrainConfig {
        iterations: a.iters,
        vars_per_iter: a.vars_per_iter,
        samples: a.samples,
        batch_size: a.batch_size,
        optimizer: a.optimizer.clone(),
        optimizer_params: OptimizerParams {
            lr: a.lr,
            ..OptimizerParams::default()
        },
        estimator: a.estimator.clone(),
        seed: a.seed,
        evidence_predicates: a.condition.iter().cloned().collect::<BTreeSet<_>>(),
        trace_every: 100.min(a.iters.max(1)),
    };
    cfg.validate()?;
    for p in &cfg.evidence_predicates {
        if !model.predicates.contains_key(p) {
            return Err(Error::usage(format!("--condition names unknown predicate `{p}`")));
        }
    }
    model.fit_helpers_from(&graph, &frames)?;
    model.init_params(&mut ChaCha8Rng::seed_from_u64(a.seed));
    let trace = train(&mut model, &graph, &frames, &cfg)?;
    save_params(&model, &a.out)?;
    if let Some(t) = &a.trace {
        write_file(t, &trace_csv(&trace))?;
    }
    Ok(format!(
        "trained {} parameters on {} frames ({} ground variables)\n",
        model.num_params(),
        frames.len(),
        graph.num_vars()
    ))
}

pub fn cmd_map(a: &MapArgs) -> Result<String> {
    let mut model = read_model(&a.model)?;
    load_params(&mut model, &a.params)?;
    let (graph, start, image) = match (&a.image, &a.evidence) {
        (Some(img), _) => {
            let noisy = read_pgm(img)?;
            let u = image_universe(noisy.height, noisy.width);
            let g = ground(&model, &u, &image_evidence(&noisy))?;
            let mut start = default_frame(&g);
            put_image(&g, &mut start, "val", &noisy)?;
            (g, start, Some((noisy.height, noisy.width)))
        }
        (None, ev) => {
            let u: Universe = load_universe(&model, base_dir(&a.model), a.facts.as_deref())?;
            let ev = match ev {
                Some(p) => read_evidence(&model, p)?,
                None => BTreeMap::new(),
            };
            let g = ground(&model, &u, &ev)?;
            let start = default_frame(&g);
            (g, start, None)
        }
    };
    let cfg = MapConfig {
        sweeps: a.sweeps,
        candidates: a.candidates,
        init: MapInit::Data,
        anneal: (a.solver == "anneal-icm").then_some(Anneal { t0: 4.0, sweeps: 10 }),
    };
    let solver = map_solvers().create(&a.solver, &())?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let r = solver.solve(&model, &graph, &start, &cfg, &mut rng)?;
    write_file(&a.out, &assignment_to_csv(&graph, &r.frame))?;
    match (image, &a.image_out) {
        (Some((h, w)), Some(p)) => write_pgm(&get_image(&graph, &r.frame, "val", h, w)?, p)?,
        (None, Some(_)) => return Err(Error::usage("--image-out needs --image")),
        _ => {}
    }
    Ok(format!("map score {}\n", r.score))
}

fn read_assignment(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        if rec.len() != 2 {
            return Err(Error::data(format!("{}: record {} needs 2 fields", path.display(), i + 1)));
        }
        out.insert(rec[0].to_string(), rec[1].to_string());
    }
    Ok(out)
}

pub fn cmd_eval(a: &EvalArgs) -> Result<String> {
    match a.task {
        Task::Denoise => {
            if a.pred.len() != a.truth.len() {
                return Err(Error::usage("--pred and --truth need the same number of images"));
            }
            let mut s = String::from("image,l1,l2\n");
            let (mut t1, mut t2) = (0.0, 0.0);
            for (p, t) in a.pred.iter().zip(&a.truth) {
                let (pi, ti) = (read_pgm(p)?, read_pgm(t)?);
                if (pi.width, pi.height) != (ti.width, ti.height) {
                    return Err(Error::data(format!("{} and {} differ in size", p.display(), t.display())));
                }
                let (l1, l2) = image_errors(&pi.pixels, &ti.pixels);
                t1 += l1;
                t2 += l2;
                s.push_str(&format!("{},{l1},{l2}\n", p.display()));
            }
            let n = a.pred.len() as f64;
            s.push_str(&format!("mean,{},{}\n", t1 / n, t2 / n));
            Ok(s)
        }
        Task::Tabular => {
            let [pred_path] = a.pred.as_slice() else {
                return Err(Error::usage("tabular eval takes one --pred CSV"));
            };
            let [truth_path] = a.truth.as_slice() else {
                return Err(Error::usage("tabular eval takes one --truth CSV"));
            };
            let pred = read_assignment(pred_path)?;
            let truth = read_assignment(truth_path)?;
            let keep = |id: &str| match &a.predicate {
                Some(p) => id.starts_with(&format!("{p}(")),
                None => true,
            };
            let mut pairs = Vec::new();
            for (id, t) in truth.iter().filter(|(id, _)| keep(id)) {
                let p = pred
                    .get(id)
                    .ok_or_else(|| Error::data(format!("{}: no prediction for `{id}`", pred_path.display())))?;
                pairs.push((p.clone(), t.clone()));
            }
            if pairs.is_empty() {
                return Err(Error::data("nothing to score"));
            }
            if a.continuous {
                let num = |s: &str| {
                    s.parse::<f64>()
                        .map_err(|_| Error::data(format!("`{s}` is not a number")))
                };
                let p: Vec<f64> = pairs.iter().map(|(p, _)| num(p)).collect::<Result<_>>()?;
                let t: Vec<f64> = pairs.iter().map(|(_, t)| num(t)).collect::<Result<_>>()?;
                return Ok(format!("metric,value\nmse,{}\n", mse(&p, &t)));
            }
            let labels: Vec<String> = pairs
                .iter()
                .flat_map(|(p, t)| [p.clone(), t.clone()])
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let ix = |s: &str| labels.iter().position(|l| l == s).unwrap();
            let p: Vec<usize> = pairs.iter().map(|(p, _)| ix(p)).collect();
            let t: Vec<usize> = pairs.iter().map(|(_, t)| ix(t)).collect();
            let mut s = format!("metric,value\naccuracy,{}\n", accuracy(&p, &t));
            for (l, f) in labels.iter().zip(f1_per_class(&p, &t, labels.len())) {
                s.push_str(&format!("f1_{l},{f}\n"));
            }
            Ok(s)
        }
    }
}

/// Report and whether every estimator passed.
pub fn cmd_gradcheck(a: &GradcheckArgs) -> Result<(String, bool)> {
    let names: Vec<&str> = if a.estimator == "all" {
        vec!["importance", "riemann"]
    } else {
        vec![a.estimator.as_str()]
    };
    let mut s = String::from("estimator,params,max_rel_error,redraws,pass\n");
    let mut ok = true;
    for n in names {
        let r = gradcheck(n, a.seed)?;
        let pass = r.max_rel_error <= a.tol;
        ok &= pass;
        s.push_str(&format!("{n},{},{:e},{},{pass}\n", r.params, r.max_rel_error, r.redraws));
    }
    Ok((s, ok))
}

pub fn cmd_synth(c: &SynthCommand) -> Result<String> {
    match c {
        SynthCommand::Denoise {
            size,
            images,
            noise_var,
            seed,
            out,
        } => {
            fs::create_dir_all(out)?;
            let imgs = denoise_images(*size, *images, *noise_var, *seed)?;
            for (k, im) in imgs.iter().enumerate() {
                write_pgm(&im.clean, &out.join(format!("img{k}.clean.pgm")))?;
                write_pgm(&im.noisy, &out.join(format!("img{k}.noisy.pgm")))?;
            }
            write_file(&out.join("model.rnmrf"), &denoise_model_text("LG", &[16, 8], true))?;
            write_file(&out.join("gaussian.rnmrf"), &denoise_model_text("LG", &[], false))?;
            Ok(format!("wrote {} image pairs to {}\n", imgs.len(), out.display()))
        }
        SynthCommand::Segments {
            train,
            test,
            edge_rate,
            seed,
            out,
        } => {
            if !(0.0..=1.0).contains(edge_rate) {
                return Err(Error::usage("--edge-rate must lie in [0,1]"));
            }
            fs::create_dir_all(out)?;
            let rules = segment_model_text(&[16, 8], true);
            write_file(&out.join("model_rules.rnmrf"), &rules)?;
            write_file(&out.join("model_plain.rnmrf"), &segment_model_text(&[16, 8], false))?;
            let model = parse_model(&rules)?;
            for (name, n, s) in [("train", *train, seed.wrapping_mul(2).wrapping_add(1)), ("test", *test, seed.wrapping_mul(2).wrapping_add(2))] {
                let map = segment_map(n, *edge_rate, s);
                let u = segment_universe(n);
                let g = ground(&model, &u, &BTreeMap::new())?;
                let f = segment_frame(&g, &map)?;
                write_file(&out.join(format!("{name}.facts")), &facts_to_string(&u))?;
                write_file(&out.join(format!("{name}.csv")), &frames_to_csv(&g, &[f.clone()])?)?;
                if name == "test" {
                    let mut ev = String::from("variable_id,value\n");
                    let mut truth = String::from("variable_id,value\n");
                    for (v, &x) in g.vars().iter().zip(&f) {
                        let line = format!("{},{}\n", v.id, v.domain.format_value(x));
                        if v.predicate == "type" {
                            truth.push_str(&line);
                        } else {
                            ev.push_str(&line);
                        }
                    }
                    write_file(&out.join("test_evidence.csv"), &ev)?;
                    write_file(&out.join("test_truth.csv"), &truth)?;
                }
            }
            Ok(format!("wrote segment maps to {}\n", out.display()))
        }
    }
}

pub fn cmd_experiment(c: &ExperimentCommand) -> Result<String> {
    match c {
        ExperimentCommand::Denoise {
            seed,
            seeds,
            iters,
            train_images,
            candidates,
            lr,
            anneal,
        } => {
            let mut s = String::from("seed,rn_l1,rn_l2,gmrf_l1,gmrf_l2,noisy_l1,noisy_l2\n");
            for k in *seed..seed + seeds {
                let mut cfg = DenoiseConfig {
                    seed: k,
                    ..DenoiseConfig::default()
                };
                if let Some(i) = iters {
                    cfg.iterations = *i;
                }
                if let Some(n) = train_images {
                    cfg.train_images = *n;
                }
                if let Some(c) = candidates {
                    cfg.map.candidates = *c;
                }
                if let Some(l) = lr {
                    cfg.lr = *l;
                }
                if *anneal {
                    cfg.map.anneal = Some(Anneal { t0: 4.0, sweeps: 10 });
                }
                let r = denoise_experiment(&cfg)?;
                s.push_str(&format!(
                    "{k},{},{},{},{},{},{}\n",
                    r.rn_mrf.0, r.rn_mrf.1, r.gaussian_mrf.0, r.gaussian_mrf.1, r.noisy.0, r.noisy.1
                ));
            }
            Ok(s)
        }
        ExperimentCommand::Iris { seed, iters, data } => {
            let text = match data {
                Some(p) => fs::read_to_string(p).map_err(|e| Error::data(format!("cannot read {}: {e}", p.display())))?,
                None => IRIS_CSV.to_string(),
            };
            let rows = parse_iris(&text)?;
            let mut cfg = IrisConfig {
                seed: *seed,
                ..IrisConfig::default()
            };
            if let Some(i) = iters {
                cfg.iterations = *i;
            }
            let r = iris_experiment(&rows, &cfg)?;
            Ok(format!(
                "metric,value\naccuracy,{}\nf1_setosa,{}\nf1_versicolor,{}\nf1_virginica,{}\npetal_width_mse,{}\n",
                r.accuracy, r.f1[0], r.f1[1], r.f1[2], r.petal_width_mse
            ))
        }
        ExperimentCommand::Segments { seed, seeds, iters } => {
            let mut s = String::from("seed,accuracy_rules,accuracy_plain\n");
            for k in *seed..seed + seeds {
                let mut cfg = SegmentConfig {
                    seed: k,
                    ..SegmentConfig::default()
                };
                if let Some(i) = iters {
                    cfg.iterations = *i;
                }
                let r = segment_experiment(&cfg)?;
                s.push_str(&format!("{k},{},{}\n", r.accuracy_rules, r.accuracy_plain));
            }
            Ok(s)
        }
    }
}

/// Run a parsed command, writing its report to `out`. Returns the exit code.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let (text, code) = match &cli.command {
        Command::Train(a) => (cmd_train(a)?, 0),
        Command::Map(a) => (cmd_map(a)?, 0),
        Command::Eval(a) => (cmd_eval(a)?, 0),
        Command::Gradcheck(a) => {
            let (s, ok) = cmd_gradcheck(a)?;
            (s, if ok { 0 } else { 1 })
        }
        Command::Synth(c) => (cmd_synth(c)?, 0),
        Command::Experiment(c) => (cmd_experiment(c)?, 0),
    };
    out.write_all(text.as_bytes())?;
    Ok(code)
}

