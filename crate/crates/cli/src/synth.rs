//! Synthetic data: noisy piecewise-constant images and a relational segment map.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rnmrf_core::relational::atom_instance_id;
use rnmrf_core::{Error, Frame, GroundGraph, Result, Universe};

use crate::data::Gray;

/// A clean image, its noisy copy, and the noise added before clipping.
#[derive(Clone, Debug)]
pub struct NoisyImage {
    pub clean: Gray,
    pub noisy: Gray,
    pub noise: Vec<f64>,
}

fn level<R: Rng>(rng: &mut R) -> f64 {
    // a few well-separated gray levels
    [0.1, 0.3, 0.5, 0.7, 0.9][rng.random_range(0..5)]
}

/// Background plus 2 to 4 axis-aligned rectangles, each a constant gray level.
pub fn piecewise_constant<R: Rng>(size: usize, rng: &mut R) -> Gray {
    let mut pixels = vec![level(rng); size * size];
    for _ in 0..rng.random_range(2..=4) {
        let h = rng.random_range(size / 4..=size * 3 / 4).max(1);
        let w = rng.random_range(size / 4..=size * 3 / 4).max(1);
        let r0 = rng.random_range(0..=size - h);
        let c0 = rng.random_range(0..=size - w);
        let v = level(rng);
        for r in r0..r0 + h {
            for c in c0..c0 + w {
                pixels[r * size + c] = v;
            }
        }
    }
    Gray {
        width: size,
        height: size,
        pixels,
    }
}

pub fn denoise_images(size: usize, count: usize, noise_var: f64, seed: u64) -> Result<Vec<NoisyImage>> {
    if size < 2 || count == 0 || !(noise_var >= 0.0) {
        return Err(Error::usage("synth denoise needs size >= 2, images >= 1 and noise variance >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_var.sqrt()).map_err(|e| Error::usage(e.to_string()))?;
    Ok((0..count)
        .map(|_| {
            let clean = piecewise_constant(size, &mut rng);
            let noise: Vec<f64> = (0..size * size).map(|_| normal.sample(&mut rng)).collect();
            let noisy = Gray {
                pixels: clean
                    .pixels
                    .iter()
                    .zip(&noise)
                    .map(|(c, n)| (c + n).clamp(0.0, 1.0))
                    .collect(),
                ..clean.clone()
            };
            NoisyImage { clean, noisy, noise }
        })
        .collect())
}

/// Pairwise and observation parfactors over `val`/`obs` pixel atoms; an empty
/// `hidden` list with `neural = false` gives the helper-only Gaussian model.
pub fn denoise_model_text(helper: &str, hidden: &[usize], neural: bool) -> String {
    let layers: Vec<String> = hidden.iter().map(ToString::to_string).collect();
    let pot = if neural {
        format!(" potential=NN(layers=[{}],clamp=[-10,10],fm=absdiff)", layers.join(","))
    } else {
        String::new()
    };
    format!(
        "domain intensity continuous [0,1]\n\
         predicate obs(P:pixel) -> intensity\n\
         predicate val(P:pixel) -> intensity\n\
         parfactor pair: helper={helper}{pot} atoms=[val(P1),val(P2)] constraint=nb(P1,P2)\n\
         parfactor obs: helper={helper}{pot} atoms=[obs(P),val(P)] constraint=none\n"
    )
}

pub const SEGMENT_TYPES: [&str; 3] = ["W", "D", "O"];

/// One map: segments in scan order, neighbours adjacent in that order.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentMap {
    pub length: Vec<f64>,
    pub depth: Vec<f64>,
    /// Degrees in `[0, 90]`.
    pub angle: Vec<f64>,
    /// Index into [`SEGMENT_TYPES`].
    pub kind: Vec<usize>,
    /// Wall-looking segments whose angle exceeds 89 degrees and whose type is `O`.
    pub edge_case: Vec<bool>,
}

impl SegmentMap {
    pub fn len(&self) -> usize {
        self.kind.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kind.is_empty()
    }
}

fn clipped<R: Rng>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    (mean + sd * rng.sample::<f64, _>(rand_distr::StandardNormal)).clamp(lo, hi)
}

fn wall_like<R: Rng>(rng: &mut R) -> (f64, f64) {
    (clipped(rng, 2.5, 0.7, 0.05, 5.0), clipped(rng, 0.05, 0.03, 0.0, 1.0))
}

/// Types follow a Markov chain in which a door is never followed by a door.
/// With probability `edge_rate` a segment becomes an edge case: wall-like
/// length and depth, angle in (89, 90], type `O`.
pub fn segment_map(n: usize, edge_rate: f64, seed: u64) -> SegmentMap {
    const NEXT: [[f64; 3]; 3] = [[0.6, 0.25, 0.15], [0.8, 0.0, 0.2], [0.6, 0.2, 0.2]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = SegmentMap {
        length: Vec::with_capacity(n),
        depth: Vec::with_capacity(n),
        angle: Vec::with_capacity(n),
        kind: Vec::with_capacity(n),
        edge_case: Vec::with_capacity(n),
    };
    let mut prev = 0usize;
    for i in 0..n {
        let mut k = if i == 0 {
            0
        } else {
            let u: f64 = rng.random();
            let row = NEXT[prev];
            if u < row[0] {
                0
            } else if u < row[0] + row[1] {
                1
            } else {
                2
            }
        };
        let edge = rng.random::<f64>() < edge_rate;
        let (len, dep, ang) = if edge {
            k = 2;
            let (l, d) = wall_like(&mut rng);
            (l, d, rng.random_range(89.0..=90.0_f64).max(89.0 + 1e-9))
        } else {
            match k {
                0 => {
                    let (l, d) = wall_like(&mut rng);
                    (l, d, rng.random_range(0.0..=89.0))
                }
                1 => (
                    clipped(&mut rng, 0.9, 0.1, 0.05, 5.0),
                    clipped(&mut rng, 0.3, 0.06, 0.0, 1.0),
                    rng.random_range(0.0..=89.0),
                ),
                _ => (
                    clipped(&mut rng, 0.6, 0.3, 0.05, 5.0),
                    clipped(&mut rng, 0.5, 0.2, 0.0, 1.0),
                    rng.random_range(0.0..=90.0),
                ),
            }
        };
        m.length.push(len);
        m.depth.push(dep);
        m.angle.push(ang);
        m.kind.push(k);
        m.edge_case.push(edge);
        prev = k;
    }
    m
}

pub fn segment_id(i: usize) -> String {
    format!("s{i}")
}

/// Population `seg` and `nb(s_i, s_{i+1})`.
pub fn segment_universe(n: usize) -> Universe {
    let mut u = Universe::new().with_population("seg", (0..n).map(segment_id));
    u.relations.entry("nb".to_string()).or_default();
    for i in 1..n {
        u.add_fact("nb", [segment_id(i - 1), segment_id(i)]);
    }
    u
}

/// Value of every `len/dep/ang/type` variable of `graph`.
pub fn segment_frame(graph: &GroundGraph, map: &SegmentMap) -> Result<Frame> {
    let mut f = vec![0.0; graph.num_vars()];
    for i in 0..map.len() {
        let s = [segment_id(i)];
        for (pred, v) in [
            ("len", map.length[i]),
            ("dep", map.depth[i]),
            ("ang", map.angle[i]),
            ("type", map.kind[i] as f64),
        ] {
            let id = atom_instance_id(pred, &s);
            if let Some(ix) = graph.var_index(&id) {
                f[ix] = v;
            }
        }
    }
    Ok(f)
}

/// Segment model with the local network and, when `rules` is set, the angle
/// rule and the door-neighbour rule.
pub fn segment_model_text(hidden: &[usize], rules: bool) -> String {
    let layers: Vec<String> = hidden.iter().map(ToString::to_string).collect();
    let mut s = format!(
        "domain length continuous [0,5]\n\
         domain depth continuous [0,1]\n\
         domain angle continuous [0,90]\n\
         domain kind discrete {{W,D,O}}\n\
         predicate len(S:seg) -> length\n\
         predicate dep(S:seg) -> depth\n\
         predicate ang(S:seg) -> angle\n\
         predicate type(S:seg) -> kind\n\
         parfactor local: helper=CG potential=NN(layers=[{}],clamp=[-10,10],fm=identity) atoms=[len(S),dep(S),ang(S),type(S)] constraint=none\n",
        layers.join(",")
    );
    if rules {
        s.push_str(
            "parfactor angle_rule: helper=Uniform potential=MLN(w0=0, \"ang(S) > 89 => type(S) = 'O'\") atoms=[ang(S),type(S)] constraint=none\n\
             parfactor door_rule: helper=Uniform potential=MLN(w0=0, \"type(S1) = 'D' => type(S2) != 'D'\") atoms=[type(S1),type(S2)] constraint=nb(S1,S2)\n",
        );
    }
    s
}
