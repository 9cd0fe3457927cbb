//! Batch runs over a scene manifest: model enhancement, classical
//! baselines and evaluation.

use std::path::{Path, PathBuf};

use echodiff_core::classical::{compensate_delay, fdkf_cancel, gcc_phat_delay, nlms_cancel, FdkfConfig, NlmsConfig};
use echodiff_core::diffusion::{reverse_sample, single_step_enhance, NoiseSchedule, SamplerConfig, SamplerInit};
use echodiff_core::metrics::{evaluate_scene, merge_external, rank_methods, summarize, Direction, ExternalMetric, MethodRank, MethodScores, MetricRow};
use echodiff_core::model::HybridModel;
use echodiff_core::rng::substream;
use echodiff_core::signal::{istft, stft};
use echodiff_core::{StftConfig, Waveform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_bundle, manifest_dir, read_manifest, write_json, SceneRecord};
use crate::error::{Error, Result};
use crate::wav::{read_wav, write_wav, WavEncoding};

pub const RUN_MANIFEST_NAME: &str = "run.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One score evaluation around the conditioner estimate.
    Single,
    /// Langevin reverse process from the perturbed conditioner estimate.
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnhanceOptions {
    pub mode: Mode,
    pub sampler: SamplerConfig,
    pub schedule: NoiseSchedule,
    pub stft: StftConfig,
}

impl EnhanceOptions {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.sampler.validate()?;
        self.stft.validate()?;
        if self.mode == Mode::Single && self.sampler.n_steps != 1 {
            return Err(Error::Config(format!(
                "single mode takes exactly one step, got {}",
                self.sampler.n_steps
            )));
        }
        Ok(())
    }
}

/// One output file of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub id: String,
    /// Relative to the run directory.
    pub file: PathBuf,
    pub n_samples: usize,
    /// Far-end delay removed before cancellation, in samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lag: Option<i64>,
}

/// Written as `run.json` next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub method: String,
    pub scene_manifest: PathBuf,
    pub settings: serde_json::Value,
    pub outputs: Vec<RunOutput>,
}

fn scene_inputs(rec: &SceneRecord, base: &Path) -> Result<(Waveform, Waveform)> {
    let mic = read_wav(base.join(&rec.files.mic))?;
    let far = read_wav(base.join(&rec.files.farend))?;
    if mic.len() != far.len() || mic.sample_rate_hz() != far.sample_rate_hz() {
        return Err(Error::Data(format!("scene {}: mic and far-end signals differ in length or rate", rec.id)));
    }
    Ok((mic, far))
}

/// Enhance one scene. The RNG is the scene's own substream of the run seed.
pub fn enhance_signal(
    model: &HybridModel,
    mic: &Waveform,
    farend: &Waveform,
    opts: &EnhanceOptions,
    scene_index: u64,
) -> Result<Waveform> {
    let y = stft(mic, &opts.stft)?;
    let x = stft(farend, &opts.stft)?;
    let mut rng = substream(opts.sampler.seed, scene_index);
    let c = model.condition(&y, &x)?;
    let score = model.score_model()?;
    let s = match opts.mode {
        Mode::Single => single_step_enhance(&c.estimate, &score, &c.features, &opts.schedule, &mut rng)?,
        Mode::Multi => reverse_sample(
            &score,
            &c.features,
            SamplerInit::Conditional(&c.estimate),
            &opts.sampler,
            &opts.schedule,
            &mut rng,
        )?,
    };
    Ok(istft(&s)?)
}

fn finish_run(out: &Path, manifest: &RunManifest) -> Result<()> {
    write_json(&out.join(RUN_MANIFEST_NAME), manifest)
}

/// Enhance every scene of a manifest into `{out}/{id}.wav`.
pub fn enhance_manifest(model: &HybridModel, manifest: &Path, out: &Path, opts: &EnhanceOptions) -> Result<RunManifest> {
    opts.validate()?;
    let records = read_manifest(manifest)?;
    let base = manifest_dir(manifest);
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let outputs = records
        .par_iter()
        .map(|rec| {
            let (mic, far) = scene_inputs(rec, &base)?;
            let enhanced = enhance_signal(model, &mic, &far, opts, rec.index as u64)?;
            let file = PathBuf::from(format!("{}.wav", rec.id));
            write_wav(out.join(&file), &enhanced, WavEncoding::Float32)?;
            Ok(RunOutput { id: rec.id.clone(), file, n_samples: enhanced.len(), lag: None })
        })
        .collect::<Result<Vec<_>>>()?;
    let run = RunManifest {
        command: "enhance".into(),
        method: match opts.mode {
            Mode::Single => "hybrid_single".into(),
            Mode::Multi => format!("hybrid_multi_{}", opts.sampler.n_steps),
        },
        scene_manifest: manifest.to_path_buf(),
        settings: serde_json::to_value(opts).map_err(|e| Error::json(manifest, e))?,
        outputs,
    };
    finish_run(out, &run)?;
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Nlms,
    Fdkf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineOptions {
    pub method: BaselineMethod,
    /// Estimate and remove the far-end delay with GCC-PHAT first.
    pub align: bool,
    pub max_lag: usize,
    pub nlms: NlmsConfig,
    pub fdkf: FdkfConfig,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions {
            method: BaselineMethod::Nlms,
            align: false,
            max_lag: 4000,
            nlms: NlmsConfig::default(),
            fdkf: FdkfConfig::default(),
        }
    }
}

/// Cancel the echo of one scene; returns the residual and the removed lag.
pub fn baseline_signal(mic: &Waveform, farend: &Waveform, opts: &BaselineOptions) -> Result<(Waveform, Option<i64>)> {
    let (reference, lag) = if opts.align {
        let lag = gcc_phat_delay(mic, farend, opts.max_lag)?;
        (compensate_delay(mic, farend, lag, opts.max_lag)?.1, Some(lag))
    } else {
        (farend.clone(), None)
    };
    let out = match opts.method {
        BaselineMethod::Nlms => nlms_cancel(mic, &reference, &opts.nlms)?,
        BaselineMethod::Fdkf => fdkf_cancel(mic, &reference, &opts.fdkf)?,
    };
    Ok((out.residual, lag))
}

/// Run a classical canceller on every scene into `{out}/{id}.wav`.
pub fn baseline_manifest(manifest: &Path, out: &Path, opts: &BaselineOptions) -> Result<RunManifest> {
    match opts.method {
        BaselineMethod::Nlms => opts.nlms.validate()?,
        BaselineMethod::Fdkf => opts.fdkf.validate()?,
    }
    let records = read_manifest(manifest)?;
    let base = manifest_dir(manifest);
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let outputs = records
        .par_iter()
        .map(|rec| {
            let (mic, far) = scene_inputs(rec, &base)?;
            let (residual, lag) = baseline_signal(&mic, &far, opts)?;
            let file = PathBuf::from(format!("{}.wav", rec.id));
            write_wav(out.join(&file), &residual, WavEncoding::Float32)?;
            Ok(RunOutput { id: rec.id.clone(), file, n_samples: residual.len(), lag })
        })
        .collect::<Result<Vec<_>>>()?;
    let method = match opts.method {
        BaselineMethod::Nlms => "nlms",
        BaselineMethod::Fdkf => "fdkf",
    };
    let run = RunManifest {
        command: "baseline".into(),
        method: if opts.align { format!("{method}_aligned") } else { method.into() },
        scene_manifest: manifest.to_path_buf(),
        settings: serde_json::to_value(opts).map_err(|e| Error::json(manifest, e))?,
        outputs,
    };
    finish_run(out, &run)?;
    Ok(run)
}

/// A method to score: a directory of `{id}.wav` files, or the unprocessed mic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSource {
    pub name: String,
    pub dir: Option<PathBuf>,
}

impl MethodSource {
    pub fn unprocessed() -> Self {
        MethodSource { name: "unprocessed".into(), dir: None }
    }

    /// Parse `name=dir`, or a bare `dir` named after its last component.
    pub fn parse(arg: &str) -> Result<Self> {
        let (name, dir) = match arg.split_once('=') {
            Some((n, d)) => (n.to_string(), PathBuf::from(d)),
            None => {
                let dir = PathBuf::from(arg);
                let name = dir
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .ok_or_else(|| Error::Config(format!("cannot name method from `{arg}`, use name=dir")))?;
                (name, dir)
            }
        };
        if name.is_empty() {
            return Err(Error::Config(format!("empty method name in `{arg}`")));
        }
        Ok(MethodSource { name, dir: Some(dir) })
    }
}

/// External values for one method, or for every method when `method` is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalSet {
    pub method: Option<String>,
    pub values: Vec<ExternalMetric>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Ordered by method (as given), then scene.
    pub rows: Vec<MetricRow>,
    pub summary: Vec<MethodScores>,
    /// Present when at least two methods were scored.
    pub ranks: Option<Vec<MethodRank>>,
}

/// Score every method on every scene of the manifest.
pub fn evaluate_manifest(manifest: &Path, methods: &[MethodSource], external: &[ExternalSet]) -> Result<EvalReport> {
    if methods.is_empty() {
        return Err(Error::Config("nothing to evaluate: give --enhanced or --unprocessed".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    if let Some(m) = methods.iter().find(|m| !seen.insert(m.name.as_str())) {
        return Err(Error::Config(format!("method `{}` given twice", m.name)));
    }
    let records = read_manifest(manifest)?;
    let base = manifest_dir(manifest);
    let per_scene = records
        .par_iter()
        .map(|rec| {
            let bundle = load_bundle(rec, &base)?;
            methods
                .iter()
                .map(|m| {
                    let enhanced = match &m.dir {
                        None => bundle.mic.clone(),
                        Some(d) => read_wav(d.join(format!("{}.wav", rec.id)))?,
                    };
                    Ok(evaluate_scene(&bundle, &enhanced, &rec.id, &m.name)?)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(records.len() * methods.len());
    for (k, m) in methods.iter().enumerate() {
        let start = rows.len();
        rows.extend(per_scene.iter().map(|r| r[k].clone()));
        for set in external.iter().filter(|s| s.method.as_deref().is_none_or(|n| n == m.name)) {
            merge_external(&mut rows[start..], &set.values)?;
        }
    }
    if let Some(set) = external.iter().find(|s| s.method.as_ref().is_some_and(|n| !seen.contains(n.as_str()))) {
        return Err(Error::Config(format!(
            "external metrics given for unknown method `{}`",
            set.method.as_deref().unwrap_or_default()
        )));
    }
    let summary = summarize(&rows)?;
    let ranks = if methods.len() >= 2 {
        Some(rank_methods(&summary, Direction::for_metric)?)
    } else {
        None
    };
    Ok(EvalReport { rows, summary, ranks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_dataset, SynthConfig, MANIFEST_NAME};

    fn dataset(dir: &Path, scenes: usize) -> PathBuf {
        let mut cfg = SynthConfig { scenes, seed: 11, ..Default::default() };
        cfg.ranges.duration_s = 4.0;
        generate_dataset(&cfg, dir).unwrap();
        dir.join(MANIFEST_NAME)
    }

    #[test]
    fn method_source_parsing() {
        assert_eq!(MethodSource::parse("a=x/y").unwrap(), MethodSource { name: "a".into(), dir: Some("x/y".into()) });
        assert_eq!(MethodSource::parse("x/nlms").unwrap().name, "nlms");
        assert!(MethodSource::parse("=x").is_err());
    }

    #[test]
    fn baseline_then_eval_ranks_against_unprocessed() {
        let data = tempfile::tempdir().unwrap();
        let manifest = dataset(data.path(), 2);
        let out = tempfile::tempdir().unwrap();
        let opts = BaselineOptions { align: true, ..Default::default() };
        let run = baseline_manifest(&manifest, out.path(), &opts).unwrap();
        assert_eq!(run.outputs.len(), 2);
        assert!(run.outputs.iter().all(|o| o.lag.is_some() && o.n_samples == 64000));
        let methods = [MethodSource::unprocessed(), MethodSource { name: "nlms".into(), dir: Some(out.path().into()) }];
        let report = evaluate_manifest(&manifest, &methods, &[]).unwrap();
        assert_eq!(report.rows.len(), 4);
        assert_eq!(report.rows[0].method, "unprocessed");
        let ranks = report.ranks.unwrap();
        assert_eq!(ranks.len(), 2);
        for r in &ranks {
            assert!((1.0..=2.0).contains(&r.average));
        }
    }

    #[test]
    fn eval_rejects_unknown_external_method_and_duplicates() {
        let data = tempfile::tempdir().unwrap();
        let manifest = dataset(data.path(), 1);
        let dup = [MethodSource::unprocessed(), MethodSource::unprocessed()];
        assert!(matches!(evaluate_manifest(&manifest, &dup, &[]), Err(Error::Config(_))));
        let ext = ExternalSet { method: Some("ghost".into()), values: vec![] };
        let r = evaluate_manifest(&manifest, &[MethodSource::unprocessed()], &[ext]);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn single_mode_rejects_several_steps() {
        let opts = EnhanceOptions {
            mode: Mode::Single,
            sampler: SamplerConfig { n_steps: 3, ..Default::default() },
            schedule: NoiseSchedule::default(),
            stft: StftConfig::default(),
        };
        assert!(matches!(opts.validate(), Err(Error::Config(_))));
    }
}
