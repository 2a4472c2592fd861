//! Data frames, evidence, fact files and grayscale images.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rnmrf_core::relational::atom_instance_id;
use rnmrf_core::{Error, Frame, GroundGraph, RelationalModel, Result, Universe};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::data(format!("cannot write {}: {e}", path.display())))
}

/// Populations and relations. Each non-empty line is `name inst1 inst2 ...`
/// (tab or space separated). A line whose name is a population of `model`
/// adds its instances to that population; any other line is a relation fact.
pub fn parse_facts(model: &RelationalModel, text: &str, origin: &str, universe: &mut Universe) -> Result<()> {
    let pops = model.populations();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let toks: Vec<&str> = line.split_whitespace().collect();
        let Some((&name, rest)) = toks.split_first() else { continue };
        if rest.is_empty() {
            return Err(Error::data(format!("{origin}:{}: `{name}` has no arguments", i + 1)));
        }
        if pops.contains(name) {
            let members = universe.populations.entry(name.to_string()).or_default();
            for r in rest {
                if !members.iter().any(|m| m == r) {
                    members.push(r.to_string());
                }
            }
        } else {
            universe.add_fact(name, rest.iter().copied());
        }
    }
    Ok(())
}

/// Tuples of one relation, one per line, instances separated by whitespace.
pub fn parse_relation(name: &str, text: &str, universe: &mut Universe) {
    universe.relations.entry(name.to_string()).or_default();
    for line in text.lines() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if !toks.is_empty() {
            universe.add_fact(name, toks);
        }
    }
}

/// Universe from a fact file plus the model's `relation ... from` imports,
/// whose paths are taken relative to `base`.
pub fn load_universe(model: &RelationalModel, base: &Path, facts: Option<&Path>) -> Result<Universe> {
    let mut u = Universe::new();
    for r in &model.relations {
        let p = base.join(&r.path);
        parse_relation(&r.name, &read_text(&p)?, &mut u);
    }
    if let Some(f) = facts {
        parse_facts(model, &read_text(f)?, &f.display().to_string(), &mut u)?;
    }
    Ok(u)
}

pub fn facts_to_string(universe: &Universe) -> String {
    let mut s = String::new();
    for (pop, members) in &universe.populations {
        s.push_str(pop);
        for m in members {
            s.push('\t');
            s.push_str(m);
        }
        s.push('\n');
    }
    for (rel, tuples) in &universe.relations {
        for t in tuples {
            s.push_str(rel);
            for m in t {
                s.push('\t');
                s.push_str(m);
            }
            s.push('\n');
        }
    }
    s
}

fn csv_err(path: &str, e: csv::Error) -> Error {
    Error::data(format!("{path}: {e}"))
}

/// Frames from CSV text: a header of atom-instance ids covering every ground
/// variable, then one frame per row.
pub fn frames_from_csv(graph: &GroundGraph, text: &str, origin: &str) -> Result<Vec<Frame>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| csv_err(origin, e))?.clone();
    let mut cols = Vec::with_capacity(header.len());
    let mut seen = vec![false; graph.num_vars()];
    for h in &header {
        let v = graph
            .var_index(h)
            .ok_or_else(|| Error::data(format!("{origin}: column `{h}` is not a ground variable")))?;
        if seen[v] {
            return Err(Error::data(format!("{origin}: column `{h}` repeated")));
        }
        seen[v] = true;
        cols.push(v);
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::data(format!(
            "{origin}: no column for ground variable `{}`",
            graph.var(missing).id
        )));
    }
    let mut frames = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(origin, e))?;
        let mut frame = vec![0.0; graph.num_vars()];
        for (&v, field) in cols.iter().zip(rec.iter()) {
            frame[v] = graph
                .var(v)
                .domain
                .parse_value(field)
                .map_err(|e| e.context(format!("{origin}: record {}", r + 1)))?;
        }
        frames.push(frame);
    }
    Ok(frames)
}

pub fn read_frames(graph: &GroundGraph, path: &Path) -> Result<Vec<Frame>> {
    frames_from_csv(graph, &read_text(path)?, &path.display().to_string())
}

pub fn frames_to_csv(graph: &GroundGraph, frames: &[Frame]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let map = |e: csv::Error| Error::data(e.to_string());
    w.write_record(graph.vars().iter().map(|v| v.id.as_str())).map_err(map)?;
    for f in frames {
        w.write_record(graph.vars().iter().zip(f).map(|(v, &x)| v.domain.format_value(x)))
            .map_err(map)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Parse an atom-instance id `pred(a,b)` into predicate and arguments.
pub fn split_atom_id(id: &str) -> Option<(&str, Vec<&str>)> {
    let open = id.find('(')?;
    let inner = id[open + 1..].strip_suffix(')')?;
    let args = if inner.is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(str::trim).collect()
    };
    Some((&id[..open], args))
}

/// Evidence from `variable_id,value` CSV text, values parsed by predicate domain.
pub fn evidence_from_csv(model: &RelationalModel, text: &str, origin: &str) -> Result<BTreeMap<String, f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| csv_err(origin, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["variable_id", "value"] {
        return Err(Error::data(format!("{origin}: header must be `variable_id,value`")));
    }
    let mut ev = BTreeMap::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(origin, e))?;
        let ctx = || format!("{origin}: record {}", r + 1);
        let id = &rec[0];
        let (pred, args) = split_atom_id(id)
            .ok_or_else(|| Error::data(format!("{}: `{id}` is not an atom instance", ctx())))?;
        let dom = model
            .predicate_domain(pred)
            .ok_or_else(|| Error::data(format!("{}: unknown predicate `{pred}`", ctx())))?;
        let v = dom.parse_value(&rec[1]).map_err(|e| e.context(ctx()))?;
        let args: Vec<String> = args.into_iter().map(String::from).collect();
        ev.insert(atom_instance_id(pred, &args), v);
    }
    Ok(ev)
}

pub fn read_evidence(model: &RelationalModel, path: &Path) -> Result<BTreeMap<String, f64>> {
    evidence_from_csv(model, &read_text(path)?, &path.display().to_string())
}

/// `variable_id,value` rows for every ground variable.
pub fn assignment_to_csv(graph: &GroundGraph, frame: &[f64]) -> String {
    let mut s = String::from("variable_id,value\n");
    for (v, &x) in graph.vars().iter().zip(frame) {
        let id = if v.id.contains(',') {
            format!("\"{}\"", v.id)
        } else {
            v.id.clone()
        };
        s.push_str(&format!("{id},{}\n", v.domain.format_value(x)));
    }
    s
}

pub fn write_assignment(graph: &GroundGraph, frame: &[f64], path: &Path) -> Result<()> {
    write_text(path, &assignment_to_csv(graph, frame))
}

/// A grayscale image with intensities in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl Gray {
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.width + c]
    }
}

/// Read a P2 or P5 PGM; pixels are scaled by the file's maxval.
pub fn read_pgm(path: &Path) -> Result<Gray> {
    let bytes = fs::read(path).map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
    let maxval = pgm_maxval(&bytes).ok_or_else(|| Error::data(format!("{}: not a PGM file", path.display())))?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Pnm)
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    // The decoder rescales to the full 8- or 16-bit range.
    let pixels = if maxval > 255 {
        img.to_luma16().into_raw().into_iter().map(|p| p as f64 / 65535.0).collect()
    } else {
        img.to_luma8().into_raw().into_iter().map(|p| p as f64 / 255.0).collect()
    };
    Ok(Gray { width, height, pixels })
}

fn pgm_maxval(bytes: &[u8]) -> Option<u32> {
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < 4 && i < bytes.len() {
        match bytes[i] {
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                fields.push(&bytes[start..i]);
            }
        }
    }
    if fields.len() < 4 || !(fields[0] == b"P2" || fields[0] == b"P5") {
        return None;
    }
    std::str::from_utf8(fields[3]).ok()?.parse().ok()
}

/// Write an 8-bit binary PGM, clipping to `[0, 1]`.
pub fn write_pgm(img: &Gray, path: &Path) -> Result<()> {
    let raw: Vec<u8> = img
        .pixels
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
    use image::ImageEncoder;
    if raw.len() != img.width * img.height {
        return Err(Error::data("pixel count does not match image size"));
    }
    let mut out = Vec::new();
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&raw, img.width as u32, img.height as u32, image::ExtendedColorType::L8)
        .map_err(|e| Error::data(format!("cannot encode {}: {e}", path.display())))?;
    fs::write(path, out).map_err(|e| Error::data(format!("cannot write {}: {e}", path.display())))
}

pub const PIXEL_POP: &str = "pixel";

pub fn pixel_id(r: usize, c: usize) -> String {
    format!("p{r}_{c}")
}

/// Pixels `p{r}_{c}` and the `nb` relation linking each pixel to its right and lower neighbour.
pub fn image_universe(height: usize, width: usize) -> Universe {
    let mut u = Universe::new().with_population(
        PIXEL_POP,
        (0..height).flat_map(|r| (0..width).map(move |c| pixel_id(r, c))),
    );
    u.relations.entry("nb".to_string()).or_default();
    for r in 0..height {
        for c in 0..width {
            if c + 1 < width {
                u.add_fact("nb", [pixel_id(r, c), pixel_id(r, c + 1)]);
            }
            if r + 1 < height {
                u.add_fact("nb", [pixel_id(r, c), pixel_id(r + 1, c)]);
            }
        }
    }
    u
}

fn pixel_var(graph: &GroundGraph, pred: &str, r: usize, c: usize) -> Result<usize> {
    let id = atom_instance_id(pred, &[pixel_id(r, c)]);
    graph
        .var_index(&id)
        .ok_or_else(|| Error::data(format!("image graph has no variable `{id}`")))
}

/// Write `img` into the `pred(p)` variables of `frame`.
pub fn put_image(graph: &GroundGraph, frame: &mut [f64], pred: &str, img: &Gray) -> Result<()> {
    for r in 0..img.height {
        for c in 0..img.width {
            frame[pixel_var(graph, pred, r, c)?] = img.at(r, c);
        }
    }
    Ok(())
}

pub fn get_image(graph: &GroundGraph, frame: &[f64], pred: &str, height: usize, width: usize) -> Result<Gray> {
    let mut pixels = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            pixels.push(frame[pixel_var(graph, pred, r, c)?]);
        }
    }
    Ok(Gray { width, height, pixels })
}

/// Evidence `obs(p) = pixel` for every pixel.
pub fn image_evidence(img: &Gray) -> BTreeMap<String, f64> {
    let mut ev = BTreeMap::new();
    for r in 0..img.height {
        for c in 0..img.width {
            ev.insert(atom_instance_id("obs", &[pixel_id(r, c)]), img.at(r, c));
        }
    }
    ev
}

/// `(stem, noisy, clean)` for every `<stem>.noisy.pgm` in `dir` with a matching
/// `<stem>.clean.pgm`, sorted by stem.
pub fn image_pairs(dir: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::data(format!("cannot list {}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for e in entries {
        let p = e?.path();
        let Some(name) = p.file_name().and_then(|n| n.to_str()) else { continue };
        if let Some(stem) = name.strip_suffix(".noisy.pgm") {
            let clean = dir.join(format!("{stem}.clean.pgm"));
            if !clean.exists() {
                return Err(Error::data(format!("{} has no matching {}", p.display(), clean.display())));
            }
            out.push((stem.to_string(), p.clone(), clean));
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::data(format!("no <stem>.noisy.pgm files in {}", dir.display())));
    }
    Ok(out)
}
