//! Synthetic scene datasets on disk: generation, JSONL manifests, loading.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use echodiff_core::rng::derive_seed;
use echodiff_core::scene::sources::{synth_noise, synth_speech, NoiseKind};
use echodiff_core::scene::{mix_scene, plan_dataset, SamplingRanges, SceneBundle, SceneConfig, ScenePlan};
use echodiff_core::signal::resample;
use echodiff_core::Waveform;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wav::{read_wav, write_wav, WavEncoding};

pub const MANIFEST_NAME: &str = "manifest.jsonl";

/// Dataset recipe. Sources come from WAV directories when given, otherwise
/// from the built-in synthetic generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub scenes: usize,
    pub seed: u64,
    pub sample_rate_hz: u32,
    pub ranges: SamplingRanges,
    pub speech_dir: Option<PathBuf>,
    pub noise_dir: Option<PathBuf>,
    pub synthetic_speech_sources: usize,
    pub synthetic_noise_sources: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            scenes: 8,
            seed: 0,
            sample_rate_hz: 16_000,
            ranges: SamplingRanges::default(),
            speech_dir: None,
            noise_dir: None,
            synthetic_speech_sources: 12,
            synthetic_noise_sources: 6,
        }
    }
}

/// Paths of a scene's signals, relative to the manifest directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneFiles {
    pub mic: PathBuf,
    pub farend: PathBuf,
    pub target: PathBuf,
    pub echo: PathBuf,
    pub noise: PathBuf,
    pub near_reverb: PathBuf,
    pub near_dry: PathBuf,
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub id: String,
    pub index: usize,
    pub sample_rate_hz: u32,
    pub n_samples: usize,
    pub files: SceneFiles,
    pub nearend_source: String,
    pub farend_source: String,
    pub noise_source: String,
    /// `None` when the scene has no echo.
    pub achieved_ser_db: Option<f64>,
    pub achieved_snr_db: f64,
    pub echo_gain: f64,
    pub noise_gain: f64,
    pub config: SceneConfig,
}

enum Pool {
    Synthetic { speech: bool, count: usize, seed: u64 },
    Files(Vec<PathBuf>),
}

impl Pool {
    fn from_dir(dir: &Path) -> Result<Self> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Data(format!("{}: no WAV files", dir.display())));
        }
        Ok(Pool::Files(files))
    }

    fn len(&self) -> usize {
        match self {
            Pool::Synthetic { count, .. } => *count,
            Pool::Files(f) => f.len(),
        }
    }

    fn name(&self, i: usize) -> String {
        match self {
            Pool::Synthetic { speech: true, .. } => format!("synthetic_speech_{i}"),
            Pool::Synthetic { speech: false, .. } => format!("synthetic_noise_{i}"),
            Pool::Files(f) => f[i].display().to_string(),
        }
    }

    /// Source `i` at `fs`, looped to at least `min_len` samples.
    fn load(&self, i: usize, min_len: usize, fs: u32) -> Result<Waveform> {
        let dur = min_len as f64 / fs as f64 + 1.0;
        let w = match self {
            Pool::Synthetic { speech: true, seed, .. } => synth_speech(derive_seed(*seed, i as u64), dur, fs),
            Pool::Synthetic { speech: false, seed, .. } => {
                let kind = [NoiseKind::White, NoiseKind::Pink, NoiseKind::Brown][i % 3];
                synth_noise(derive_seed(*seed, i as u64), dur, fs, kind)
            }
            Pool::Files(f) => resample(&read_wav(&f[i])?, fs)?,
        };
        if w.is_empty() || w.samples().iter().all(|v| *v == 0.0) {
            return Err(Error::Data(format!("source {} is silent", self.name(i))));
        }
        if w.len() >= min_len {
            return Ok(w);
        }
        let looped: Vec<f64> = w.samples().iter().copied().cycle().take(min_len).collect();
        Ok(Waveform::new(looped, fs)?)
    }
}

fn write_scene(out: &Path, plan: &ScenePlan, bundle: &SceneBundle) -> Result<SceneFiles> {
    let rel = |c: &str| PathBuf::from("scenes").join(format!("{}_{c}.wav", plan.id));
    let files = SceneFiles {
        mic: rel("mic"),
        farend: rel("farend"),
        target: rel("target"),
        echo: rel("echo"),
        noise: rel("noise"),
        near_reverb: rel("near_reverb"),
        near_dry: rel("near_dry"),
    };
    for (p, w) in [
        (&files.mic, &bundle.mic),
        (&files.farend, &bundle.farend),
        (&files.target, &bundle.target),
        (&files.echo, &bundle.echo),
        (&files.noise, &bundle.noise),
        (&files.near_reverb, &bundle.near_reverb),
        (&files.near_dry, &bundle.near_dry),
    ] {
        write_wav(out.join(p), w, WavEncoding::Float32)?;
    }
    Ok(files)
}

/// Source names of one scene: near end, far end, noise.
pub type SourceNames = [String; 3];

/// Plan and mix every scene of `cfg`, handing each to `f` in parallel.
/// Results come back in scene order.
pub fn synthesize_with<T, F>(cfg: &SynthConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&ScenePlan, SceneBundle, SourceNames) -> Result<T> + Sync,
{
    let speech = match &cfg.speech_dir {
        Some(d) => Pool::from_dir(d)?,
        None => Pool::Synthetic { speech: true, count: cfg.synthetic_speech_sources, seed: derive_seed(cfg.seed, 1) },
    };
    let noise = match &cfg.noise_dir {
        Some(d) => Pool::from_dir(d)?,
        None => Pool::Synthetic { speech: false, count: cfg.synthetic_noise_sources, seed: derive_seed(cfg.seed, 2) },
    };
    let plans = plan_dataset(cfg.scenes, &cfg.ranges, speech.len(), noise.len(), cfg.seed)?;
    let fs = cfg.sample_rate_hz;
    plans
        .par_iter()
        .map(|plan| {
            let len = (plan.config.duration_s * fs as f64).round() as usize;
            let s = speech.load(plan.nearend_source, len, fs)?;
            let x = speech.load(plan.farend_source, len, fs)?;
            let v = noise.load(plan.noise_source, len, fs)?;
            let bundle = mix_scene(&s, &x, &v, &plan.config)?;
            let names = [
                speech.name(plan.nearend_source),
                speech.name(plan.farend_source),
                noise.name(plan.noise_source),
            ];
            f(plan, bundle, names)
        })
        .collect()
}

/// Plan, mix and write `cfg.scenes` scenes under `out`, returning the
/// records in scene order. Also writes `manifest.jsonl` and `synth_config.json`.
pub fn generate_dataset(cfg: &SynthConfig, out: &Path) -> Result<Vec<SceneRecord>> {
    std::fs::create_dir_all(out.join("scenes")).map_err(|e| Error::io(out, e))?;
    let fs = cfg.sample_rate_hz;
    let records = synthesize_with(cfg, |plan, bundle, [near, far, noise]| {
        let files = write_scene(out, plan, &bundle)?;
        Ok(SceneRecord {
            id: plan.id.clone(),
            index: plan.index,
            sample_rate_hz: fs,
            n_samples: bundle.mic.len(),
            files,
            nearend_source: near,
            farend_source: far,
            noise_source: noise,
            achieved_ser_db: bundle.achieved_ser_db.is_finite().then_some(bundle.achieved_ser_db),
            achieved_snr_db: bundle.achieved_snr_db,
            echo_gain: bundle.echo_gain,
            noise_gain: bundle.noise_gain,
            config: plan.config.clone(),
        })
    })?;
    write_manifest(&out.join(MANIFEST_NAME), &records)?;
    write_json(&out.join("synth_config.json"), cfg)?;
    Ok(records)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::json(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::json(path, e))
}

pub fn write_manifest(path: &Path, records: &[SceneRecord]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::json(path, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<SceneRecord>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SceneRecord = serde_json::from_str(&line).map_err(|e| {
            Error::Data(format!("{} line {}: {e}", path.display(), i + 1))
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Directory that manifest paths are relative to.
pub fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Reload a scene's signals from disk.
pub fn load_bundle(rec: &SceneRecord, base: &Path) -> Result<SceneBundle> {
    let load = |p: &Path| -> Result<Waveform> {
        let w = read_wav(base.join(p))?;
        if w.len() != rec.n_samples {
            return Err(Error::Data(format!(
                "{}: {} samples, manifest says {}",
                base.join(p).display(),
                w.len(),
                rec.n_samples
            )));
        }
        Ok(w)
    };
    let f = &rec.files;
    Ok(SceneBundle {
        mic: load(&f.mic)?,
        farend: load(&f.farend)?,
        echo: load(&f.echo)?,
        near_reverb: load(&f.near_reverb)?,
        near_dry: load(&f.near_dry)?,
        noise: load(&f.noise)?,
        target: load(&f.target)?,
        achieved_ser_db: rec.achieved_ser_db.unwrap_or(f64::INFINITY),
        achieved_snr_db: rec.achieved_snr_db,
        echo_gain: rec.echo_gain,
        noise_gain: rec.noise_gain,
        config: rec.config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SynthConfig {
        let mut cfg = SynthConfig { scenes: 3, seed: 4, ..Default::default() };
        cfg.ranges.duration_s = 1.0;
        cfg.ranges.rt60_s = [0.2, 0.3];
        cfg
    }

    #[test]
    fn generate_roundtrip_and_determinism() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = generate_dataset(&small_cfg(), a.path()).unwrap();
        let rb = generate_dataset(&small_cfg(), b.path()).unwrap();
        assert_eq!(ra, rb);
        let ma = std::fs::read(a.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(ma, std::fs::read(b.path().join(MANIFEST_NAME)).unwrap());
        assert_eq!(
            std::fs::read(a.path().join(&ra[1].files.mic)).unwrap(),
            std::fs::read(b.path().join(&rb[1].files.mic)).unwrap()
        );
        let back = read_manifest(&a.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(back, ra);
        let bundle = load_bundle(&back[0], a.path()).unwrap();
        assert_eq!(bundle.mic.len(), 16000);
        let sum: f64 = (0..bundle.mic.len())
            .map(|i| (bundle.mic.samples()[i] - bundle.target.samples()[i] - bundle.echo.samples()[i] - bundle.noise.samples()[i]).abs())
            .fold(0.0, f64::max);
        assert!(sum < 1e-6, "additivity after float32 storage: {sum}");
    }

    #[test]
    fn file_sources_are_resampled_and_looped() {
        let src = tempfile::tempdir().unwrap();
        let w = synth_speech(1, 0.6, 8000);
        write_wav(src.path().join("a.wav"), &w, WavEncoding::Pcm16).unwrap();
        write_wav(src.path().join("b.wav"), &synth_speech(2, 0.7, 8000), WavEncoding::Pcm16).unwrap();
        let cfg = SynthConfig { speech_dir: Some(src.path().into()), ..small_cfg() };
        let out = tempfile::tempdir().unwrap();
        let recs = generate_dataset(&cfg, out.path()).unwrap();
        assert!(recs[0].nearend_source.ends_with(".wav"));
        let empty = tempfile::tempdir().unwrap();
        let bad = SynthConfig { noise_dir: Some(empty.path().into()), ..small_cfg() };
        assert!(matches!(generate_dataset(&bad, out.path()), Err(Error::Data(_))));
    }
}
