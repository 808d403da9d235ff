//! Text, JSON and WAV artifacts shared by the command-line tool and the service.
//!
//! Text tables are whitespace separated; lines starting with `#` are comments
//! and every writer puts the run's manifest hash in one. Floats are written in
//! Rust's shortest round-trip form, so reading an artifact back is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{DelaySet, DirectGain, FeedbackMatrix, GainEntry, GainSet, PatchFactors, SparseGain};
use crate::eai::Restrict;
use crate::error::{Error, Result};
use crate::modal::{Backend, DelayMode, ModalModel, ModePair, Pole};
use crate::paths::PathSet;
use crate::render::energy_decay_curve;
use crate::session::ResidueGrid;
use crate::sparse::CsrMatrix;
use crate::scene::Scene;
use crate::system::{ArtSystem, BuildConfig, SceneSystem};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FEEDBACK_FILE: &str = "feedback.txt";
pub const FACTORS_FILE: &str = "factors.txt";
pub const DELAYS_FILE: &str = "delays.txt";
pub const PATHS_FILE: &str = "paths.txt";
pub const SOURCE_GAINS_FILE: &str = "gains_sources.txt";
pub const LISTENER_GAINS_FILE: &str = "gains_listeners.txt";
pub const DIRECT_FILE: &str = "direct.txt";
pub const MODEL_FILE: &str = "model.json";
pub const MODES_FILE: &str = "modes.txt";

/// Everything that determines a command's outputs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_hash: Option<String>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_seed: Option<u64>,
    pub fs_e: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_tr_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restrict: Option<Restrict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fractional: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub build: Option<BuildConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_id: Option<String>,
    /// Hashes of the manifests this run consumed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<String>,
    pub output_dir: String,
}

impl RunManifest {
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serialises");
        hex::encode(&Sha256::digest(bytes)[..16])
    }

    /// First line of every text artifact of this run.
    pub fn stamp(&self) -> String {
        format!("# manifest {}\n", self.hash())
    }
}

/// A manifest as stored on disk, with its hash and the files it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredManifest {
    pub hash: String,
    #[serde(flatten)]
    pub manifest: RunManifest,
    /// `(file name, sha256)` of every output, sorted by name.
    pub outputs: Vec<(String, String)>,
}

pub fn read_text(path: impl AsRef<Path>) -> Result<String> {
    fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    fs::write(path.as_ref(), text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = read_text(path.as_ref())?;
    serde_json::from_str(&text).map_err(|e| parse_error(path.as_ref(), e.to_string()))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serialises");
    write_text(path, &(text + "\n"))
}

pub fn create_dir(dir: impl AsRef<Path>) -> Result<()> {
    fs::create_dir_all(dir.as_ref()).map_err(|e| Error::io(dir, e))
}

/// Hashes every regular file of `dir` except the manifest and writes the manifest.
pub fn finish_run(dir: impl AsRef<Path>, manifest: &RunManifest) -> Result<StoredManifest> {
    let dir = dir.as_ref();
    let mut outputs = Vec::new();
    for entry in walk(dir)? {
        let name = entry
            .strip_prefix(dir)
            .expect("walked below dir")
            .to_string_lossy()
            .replace('\\', "/");
        if name == MANIFEST_FILE {
            continue;
        }
        let bytes = fs::read(&entry).map_err(|e| Error::io(&entry, e))?;
        outputs.push((name, hex::encode(Sha256::digest(bytes))));
    }
    outputs.sort();
    let stored = StoredManifest {
        hash: manifest.hash(),
        manifest: manifest.clone(),
        outputs,
    };
    write_json(dir.join(MANIFEST_FILE), &stored)?;
    Ok(stored)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<StoredManifest> {
    read_json(dir.as_ref().join(MANIFEST_FILE))
}

fn walk(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            out.extend(walk(&path)?);
        } else {
            out.push(path);
        }
    }
    Ok(out)
}

fn parse_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: path.display().to_string(),
        message: message.into(),
    }
}

/// Data rows of a text table: comments and blank lines dropped, fields split.
fn rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l.split_whitespace().collect()))
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, fields: &[&str], i: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let f = fields
        .get(i)
        .ok_or_else(|| parse_error(path, format!("line {line}: expected at least {} fields", i + 1)))?;
    f.parse()
        .map_err(|e| parse_error(path, format!("line {line}, field {}: {e}", i + 1)))
}

/// Loads a table whose first row is a header of counts, checking the row width.
fn load_table(path: &Path, width: usize) -> Result<(Vec<usize>, Vec<(usize, Vec<String>)>)> {
    let text = read_text(path)?;
    let mut it = rows(&text);
    let (line, header) = it.next().ok_or_else(|| parse_error(path, "empty file"))?;
    let header = (0..header.len())
        .map(|i| field::<usize>(path, line, &header, i))
        .collect::<Result<Vec<_>>>()?;
    let body = it
        .map(|(line, f)| {
            if f.len() != width {
                Err(parse_error(path, format!("line {line}: expected {width} fields, found {}", f.len())))
            } else {
                Ok((line, f.into_iter().map(String::from).collect()))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, body))
}

fn parse_row<T: std::str::FromStr>(path: &Path, line: usize, f: &[String], i: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let refs: Vec<&str> = f.iter().map(String::as_str).collect();
    field(path, line, &refs, i)
}

/// Writes the system's matrices, delays, paths and gains into `dir`.
pub fn write_system(dir: &Path, system: &ArtSystem, paths: Option<&PathSet>, stamp: &str) -> Result<()> {
    write_text(dir.join(FEEDBACK_FILE), &(stamp.to_string() + &system.feedback.matrix.to_triplet_text()))?;
    if let Some(f) = &system.feedback.factors {
        let mut s = format!("{stamp}# from to departure_gain\n{} {}\n", f.n_patches, f.n_paths());
        for k in 0..f.n_paths() {
            writeln!(s, "{} {} {:e}", f.from[k], f.to[k], f.departure_gain[k]).unwrap();
        }
        write_text(dir.join(FACTORS_FILE), &s)?;
    }
    let mut s = format!("{stamp}# real_samples integer_samples\n{}\n", system.delays.len());
    for (r, i) in system.delays.real.iter().zip(&system.delays.integer) {
        writeln!(s, "{r:e} {i}").unwrap();
    }
    write_text(dir.join(DELAYS_FILE), &s)?;
    if let Some(p) = paths {
        write_text(dir.join(PATHS_FILE), &(format!("{stamp}# from to length_m\n") + &p.to_text()))?;
    }
    write_text(dir.join(SOURCE_GAINS_FILE), &gain_table(&system.gains.sources, system.n_paths(), stamp))?;
    write_text(dir.join(LISTENER_GAINS_FILE), &gain_table(&system.gains.listeners, system.n_paths(), stamp))?;
    let mut s = format!(
        "{stamp}# listener source gain delay_samples\n{} {}\n",
        system.n_listeners(),
        system.n_sources()
    );
    for (l, row) in system.gains.direct.iter().enumerate() {
        for (src, d) in row.iter().enumerate() {
            if let Some(d) = d {
                writeln!(s, "{l} {src} {:e} {:e}", d.gain, d.delay).unwrap();
            }
        }
    }
    write_text(dir.join(DIRECT_FILE), &s)
}

fn gain_table(gains: &[SparseGain], n_paths: usize, stamp: &str) -> String {
    let nnz: usize = gains.iter().map(SparseGain::nnz).sum();
    let mut s = format!("{stamp}# endpoint path gain delay_samples\n{} {n_paths} {nnz}\n", gains.len());
    for (i, g) in gains.iter().enumerate() {
        for e in &g.entries {
            writeln!(s, "{i} {} {:e} {:e}", e.path, e.gain, e.delay).unwrap();
        }
    }
    s
}

fn read_gain_table(path: &Path) -> Result<(Vec<SparseGain>, usize)> {
    let (header, body) = load_table(path, 4)?;
    let [n, n_paths, nnz] = header[..] else {
        return Err(parse_error(path, "header must be `endpoints paths nnz`"));
    };
    if body.len() != nnz {
        return Err(parse_error(path, format!("header says {nnz} entries, found {}", body.len())));
    }
    let mut gains = vec![SparseGain::default(); n];
    for (line, f) in &body {
        let i: usize = parse_row(path, *line, f, 0)?;
        let g = gains
            .get_mut(i)
            .ok_or_else(|| parse_error(path, format!("line {line}: endpoint {i} out of range")))?;
        g.entries.push(GainEntry {
            path: parse_row(path, *line, f, 1)?,
            gain: parse_row(path, *line, f, 2)?,
            delay: parse_row(path, *line, f, 3)?,
        });
    }
    Ok((gains, n_paths))
}

/// Reads a system written by [`write_system`]. The patch factorisation is
/// restored when present so the pole search keeps its reduced form.
pub fn read_system(dir: &Path, fs_e: f64, system_id: &str) -> Result<ArtSystem> {
    let factors_path = dir.join(FACTORS_FILE);
    let feedback = if factors_path.exists() {
        let (header, body) = load_table(&factors_path, 3)?;
        let [n_patches, n_paths] = header[..] else {
            return Err(parse_error(&factors_path, "header must be `patches paths`"));
        };
        if body.len() != n_paths {
            return Err(parse_error(&factors_path, format!("expected {n_paths} paths, found {}", body.len())));
        }
        let mut f = PatchFactors {
            n_patches,
            from: Vec::with_capacity(n_paths),
            to: Vec::with_capacity(n_paths),
            departure_gain: Vec::with_capacity(n_paths),
        };
        for (line, r) in &body {
            let (a, b): (usize, usize) = (parse_row(&factors_path, *line, r, 0)?, parse_row(&factors_path, *line, r, 1)?);
            if a >= n_patches || b >= n_patches {
                return Err(parse_error(&factors_path, format!("line {line}: patch out of range")));
            }
            f.from.push(a);
            f.to.push(b);
            f.departure_gain.push(parse_row(&factors_path, *line, r, 2)?);
        }
        FeedbackMatrix::from_factors(f)
    } else {
        let p = dir.join(FEEDBACK_FILE);
        FeedbackMatrix::from_matrix(CsrMatrix::from_triplet_text(&read_text(&p)?, &p.display().to_string())?)?
    };

    let dp = dir.join(DELAYS_FILE);
    let (header, body) = load_table(&dp, 2)?;
    if header.len() != 1 || body.len() != header[0] {
        return Err(parse_error(&dp, "header must be the path count, followed by one row per path"));
    }
    let mut real = Vec::with_capacity(body.len());
    let mut integer = Vec::with_capacity(body.len());
    for (line, f) in &body {
        real.push(parse_row(&dp, *line, f, 0)?);
        integer.push(parse_row(&dp, *line, f, 1)?);
    }
    let delays = DelaySet { real, integer };

    let (sources, _) = read_gain_table(&dir.join(SOURCE_GAINS_FILE))?;
    let (listeners, _) = read_gain_table(&dir.join(LISTENER_GAINS_FILE))?;
    let dp = dir.join(DIRECT_FILE);
    let (header, body) = load_table(&dp, 4)?;
    let [nl, ns] = header[..] else {
        return Err(parse_error(&dp, "header must be `listeners sources`"));
    };
    let mut direct = vec![vec![None; ns]; nl];
    for (line, f) in &body {
        let (l, s): (usize, usize) = (parse_row(&dp, *line, f, 0)?, parse_row(&dp, *line, f, 1)?);
        if l >= nl || s >= ns {
            return Err(parse_error(&dp, format!("line {line}: pair out of range")));
        }
        direct[l][s] = Some(DirectGain {
            gain: parse_row(&dp, *line, f, 2)?,
            delay: parse_row(&dp, *line, f, 3)?,
        });
    }
    ArtSystem::new(
        feedback,
        delays,
        fs_e,
        GainSet {
            sources,
            listeners,
            direct,
            system_id: system_id.to_string(),
        },
    )
}

/// Rebuilds the scene system recorded in a build directory's manifest,
/// which re-tracing endpoints needs, and checks it against the stored id.
pub fn rebuild_scene_system(build_dir: &Path) -> Result<SceneSystem> {
    let stored = read_manifest(build_dir)?;
    let m = &stored.manifest;
    let (Some(scene_path), Some(config), Some(id)) = (&m.scene_path, m.build, &m.system_id) else {
        return Err(Error::Validation(format!("{} is not a build directory", build_dir.display())));
    };
    let scene = Scene::load(scene_path)?;
    if Some(scene.hash()) != m.scene_hash.as_deref() {
        return Err(Error::Validation(format!("{scene_path} changed since the build")));
    }
    let ss = SceneSystem::build(scene, config)?;
    if &ss.system.gains.system_id != id {
        return Err(Error::StaleModel {
            gains: ss.system.gains.system_id.clone(),
            model: id.clone(),
        });
    }
    Ok(ss)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelHeader {
    fs_e: f64,
    transition_time_s: f64,
    delay_mode: DelayMode,
    system_id: String,
    complete: bool,
    #[serde(default)]
    settle_samples: usize,
    n_modes: usize,
    n_paths: usize,
}

fn vector_name(kind: &str, m: usize) -> String {
    format!("vectors/{kind}_{m:04}.txt")
}

/// Writes the mode table plus one left and one right vector file per mode.
pub fn write_model(dir: &Path, model: &ModalModel, stamp: &str) -> Result<()> {
    let n_paths = model.modes.first().map_or(0, |m| m.right.len());
    write_json(
        dir.join(MODEL_FILE),
        &ModelHeader {
            fs_e: model.fs_e,
            transition_time_s: model.transition_time_s,
            delay_mode: model.delay_mode,
            system_id: model.system_id.clone(),
            complete: model.complete,
            settle_samples: model.settle_samples,
            n_modes: model.len(),
            n_paths,
        },
    )?;
    let mut s = format!("{stamp}# mode re_p im_p t60_s freq_hz re_undriven im_undriven backend\n");
    for (m, mode) in model.modes.iter().enumerate() {
        let p = &mode.pole;
        writeln!(
            s,
            "{m} {:e} {:e} {:e} {:e} {:e} {:e} {}",
            p.value.re,
            p.value.im,
            p.t60_s,
            p.freq_hz,
            mode.undriven_residue.re,
            mode.undriven_residue.im,
            backend_name(p.backend)
        )
        .unwrap();
    }
    write_text(dir.join(MODES_FILE), &s)?;
    create_dir(dir.join("vectors"))?;
    for (m, mode) in model.modes.iter().enumerate() {
        write_text(dir.join(vector_name("u", m)), &vector_text(&mode.left, stamp))?;
        write_text(dir.join(vector_name("v", m)), &vector_text(&mode.right, stamp))?;
    }
    Ok(())
}

fn backend_name(b: Backend) -> &'static str {
    match b {
        Backend::Eai => "eai",
        Backend::Arnoldi => "arnoldi",
    }
}

/// Coordinate format: header `length nnz`, then `index re im` per nonzero entry.
fn vector_text(x: &[Complex64], stamp: &str) -> String {
    let nnz = x.iter().filter(|c| **c != Complex64::new(0.0, 0.0)).count();
    let mut s = format!("{stamp}{} {nnz}\n", x.len());
    for (i, c) in x.iter().enumerate().filter(|(_, c)| **c != Complex64::new(0.0, 0.0)) {
        writeln!(s, "{i} {:e} {:e}", c.re, c.im).unwrap();
    }
    s
}

fn read_vector(path: &Path) -> Result<Vec<Complex64>> {
    let (header, body) = load_table(path, 3)?;
    let [n, nnz] = header[..] else {
        return Err(parse_error(path, "header must be `length nnz`"));
    };
    if body.len() != nnz {
        return Err(parse_error(path, format!("header says {nnz} entries, found {}", body.len())));
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for (line, f) in &body {
        let i: usize = parse_row(path, *line, f, 0)?;
        if i >= n {
            return Err(parse_error(path, format!("line {line}: index {i} out of range")));
        }
        x[i] = Complex64::new(parse_row(path, *line, f, 1)?, parse_row(path, *line, f, 2)?);
    }
    Ok(x)
}

pub fn read_model(dir: &Path) -> Result<ModalModel> {
    let header: ModelHeader = read_json(dir.join(MODEL_FILE))?;
    let mp = dir.join(MODES_FILE);
    let text = read_text(&mp)?;
    let mut modes = Vec::with_capacity(header.n_modes);
    for (line, f) in rows(&text) {
        if f.len() != 8 {
            return Err(parse_error(&mp, format!("line {line}: expected 8 fields")));
        }
        let m: usize = field(&mp, line, &f, 0)?;
        if m != modes.len() {
            return Err(parse_error(&mp, format!("line {line}: modes out of order")));
        }
        let value = Complex64::new(field(&mp, line, &f, 1)?, field(&mp, line, &f, 2)?);
        let backend = match f[7] {
            "eai" => Backend::Eai,
            "arnoldi" => Backend::Arnoldi,
            other => return Err(parse_error(&mp, format!("line {line}: unknown backend {other}"))),
        };
        let left = read_vector(&dir.join(vector_name("u", m)))?;
        let right = read_vector(&dir.join(vector_name("v", m)))?;
        if left.len() != header.n_paths || right.len() != header.n_paths {
            return Err(parse_error(&mp, format!("mode {m}: vector length differs from {}", header.n_paths)));
        }
        modes.push(ModePair {
            pole: Pole::new(value, header.fs_e, backend)?,
            left,
            right,
            undriven_residue: Complex64::new(field(&mp, line, &f, 5)?, field(&mp, line, &f, 6)?),
        });
    }
    if modes.len() != header.n_modes {
        return Err(parse_error(&mp, format!("expected {} modes, found {}", header.n_modes, modes.len())));
    }
    Ok(ModalModel {
        modes,
        fs_e: header.fs_e,
        transition_time_s: header.transition_time_s,
        delay_mode: header.delay_mode,
        system_id: header.system_id,
        complete: header.complete,
        settle_samples: header.settle_samples,
    })
}

pub fn eir_file_name(listener: usize, source: usize) -> String {
    format!("eir_l{listener}_s{source}.txt")
}

/// Two columns: time in seconds and energy.
pub fn eir_text(h: &[f64], fs_e: f64, stamp: &str) -> String {
    let mut s = format!("{stamp}# time_s energy\n");
    for (n, v) in h.iter().enumerate() {
        writeln!(s, "{:e} {v:e}", n as f64 / fs_e).unwrap();
    }
    s
}

/// Reads a two-column response; the rate comes from the time column.
pub fn read_eir(path: &Path) -> Result<(Vec<f64>, f64)> {
    let text = read_text(path)?;
    let mut times = Vec::new();
    let mut h = Vec::new();
    for (line, f) in rows(&text) {
        if f.len() != 2 {
            return Err(parse_error(path, format!("line {line}: expected 2 fields")));
        }
        times.push(field::<f64>(path, line, &f, 0)?);
        h.push(field::<f64>(path, line, &f, 1)?);
    }
    if h.len() < 2 {
        return Err(parse_error(path, "need at least two samples"));
    }
    let span = times[times.len() - 1] - times[0];
    if !(span > 0.0) {
        return Err(parse_error(path, "time column must increase"));
    }
    let fs_e = (times.len() - 1) as f64 / span;
    // Times are written as n/fs_e, so the rate is recovered to rounding.
    let rounded = (fs_e * 1e6).round() / 1e6;
    Ok((h, rounded))
}

/// `time_s edc_db` columns, normalized to the first sample.
pub fn edc_text(h: &[f64], fs_e: f64, stamp: &str) -> String {
    let edc = energy_decay_curve(h);
    let e0 = edc.first().copied().unwrap_or(0.0);
    let mut s = format!("{stamp}# time_s edc_db\n");
    for (n, e) in edc.iter().enumerate() {
        let db = if e0 > 0.0 && *e > 0.0 { 10.0 * (e / e0).log10() } else { f64::NEG_INFINITY };
        writeln!(s, "{:e} {db:e}", n as f64 / fs_e).unwrap();
    }
    s
}

/// Mono 32-bit float WAV.
pub fn write_wav(path: &Path, samples: &[f64], fs_audio: f64) -> Result<()> {
    if !(fs_audio >= 1.0 && fs_audio.fract() == 0.0 && fs_audio <= u32::MAX as f64) {
        return Err(Error::Validation(format!("fs_audio must be a whole number of hertz, got {fs_audio}")));
    }
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: fs_audio as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let to_io = |e: hound::Error| match e {
        hound::Error::IoError(e) => Error::io(path, e),
        other => Error::io(path, std::io::Error::other(other.to_string())),
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(to_io)?;
    for &v in samples {
        w.write_sample(v as f32).map_err(to_io)?;
    }
    w.finalize().map_err(to_io)
}

pub fn read_wav(path: &Path) -> Result<(Vec<f32>, u32)> {
    let mut r = hound::WavReader::open(path).map_err(|e| parse_error(path, e.to_string()))?;
    let rate = r.spec().sample_rate;
    let samples = r
        .samples::<f32>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| parse_error(path, e.to_string()))?;
    Ok((samples, rate))
}

/// `x y value...` with one value column per mode.
pub fn residue_grid_text(grid: &ResidueGrid, stamp: &str) -> String {
    let mut s = format!(
        "{stamp}# revision {} source {} z {} grid {}\n# x y",
        grid.revision, grid.source, grid.z, grid.grid
    );
    for m in &grid.modes {
        write!(s, " mode_{m}").unwrap();
    }
    s.push('\n');
    for p in &grid.points {
        write!(s, "{:e} {:e}", p.x, p.y).unwrap();
        for v in &p.values {
            write!(s, " {v:e}").unwrap();
        }
        s.push('\n');
    }
    s
}
