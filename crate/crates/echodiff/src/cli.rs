//! Command-line front end.
//!
//! Settings resolve as: command-line flag, then the `--config` file, then
//! the built-in default.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use echodiff_core::diffusion::{NoiseSchedule, SamplerConfig};
use echodiff_core::model::{toy_train, HybridModel, ModelSpec, ToyScorer, ToyTrainConfig};
use echodiff_core::rng::{derive_seed, stream};
use echodiff_core::scene::sources::synth_speech;
use echodiff_core::train::{toy_pipeline_train, ToyPipelineConfig, ToyRunReport, TrainExample};
use echodiff_core::StftConfig;
use serde::{Deserialize, Serialize};

use crate::dataset::{generate_dataset, read_json, synthesize_with, write_json, SynthConfig, MANIFEST_NAME};
use crate::error::{Error, Result};
use crate::runs::{
    baseline_manifest, enhance_manifest, enhance_signal, evaluate_manifest, BaselineMethod, BaselineOptions,
    EnhanceOptions, ExternalSet, MethodSource, Mode,
};
use crate::tables::{format_summary, write_report};
use crate::weights_io::{load_weights, save_weights};

#[derive(Debug, Parser)]
#[command(name = "echodiff", version, about = "Hybrid diffusion echo cancellation and denoising toolkit")]
pub struct Cli {
    /// Print results as JSON on stdout and errors as JSON on stderr.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads over scenes [default: host parallelism].
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a scene dataset and its manifest.
    Synth(SynthArgs),
    /// Enhance every scene of a manifest with the hybrid model.
    Enhance(EnhanceArgs),
    /// Run a classical echo canceller on every scene of a manifest.
    Baseline(BaselineArgs),
    /// Score enhanced outputs and rank methods.
    Eval(EvalArgs),
    /// Print the noise level grid and sampler coefficients.
    Schedule(ScheduleArgs),
    /// Run a toy training job from a JSON config.
    TrainToy(TrainToyArgs),
    /// Measure processing speed and real-time factor on this machine.
    Bench(BenchArgs),
    /// Write randomly initialized model weights.
    InitWeights(InitWeightsArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Dataset recipe (JSON); absent fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `seed` of the config [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `scenes` of the config [default: 8].
    #[arg(long)]
    pub scenes: Option<usize>,
}

/// Enhancement settings file; every field is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EnhanceConfigFile {
    pub mode: Option<Mode>,
    pub steps: Option<usize>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub schedule: Option<NoiseSchedule>,
    pub stft: Option<StftConfig>,
}

#[derive(Debug, Args)]
pub struct SamplerArgs {
    /// Overrides `mode` [default: single].
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Overrides `steps` [default: 1].
    #[arg(long)]
    pub steps: Option<usize>,
    /// Overrides `epsilon` [default: 1].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Overrides `seed` [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Settings file (JSON) with mode, steps, epsilon, seed, schedule, stft.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl SamplerArgs {
    pub fn resolve(&self) -> Result<EnhanceOptions> {
        let file: EnhanceConfigFile = match &self.config {
            Some(p) => read_json(p)?,
            None => EnhanceConfigFile::default(),
        };
        let opts = EnhanceOptions {
            mode: self.mode.or(file.mode).unwrap_or(Mode::Single),
            sampler: SamplerConfig {
                n_steps: self.steps.or(file.steps).unwrap_or(1),
                epsilon: self.epsilon.or(file.epsilon).unwrap_or(1.0),
                seed: self.seed.or(file.seed).unwrap_or(0),
            },
            schedule: file.schedule.unwrap_or_default(),
            stft: file.stft.unwrap_or_default(),
        };
        opts.validate()?;
        Ok(opts)
    }
}

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub weights: PathBuf,
    /// Output directory [default: `enhanced` next to the manifest].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Overrides `method` [default: nlms].
    #[arg(long, value_enum)]
    pub method: Option<BaselineMethod>,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory [default: the method name next to the manifest].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Remove the far-end delay with GCC-PHAT before cancelling.
    #[arg(long)]
    pub align: bool,
    /// Overrides `max_lag`, the GCC-PHAT search range in samples [default: 4000].
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Baseline settings (JSON): method, align, max_lag, nlms, fdkf.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory of a method, as `name=dir` or `dir`; repeatable.
    #[arg(long)]
    pub enhanced: Vec<String>,
    /// Also score the unprocessed microphone signal.
    #[arg(long)]
    pub unprocessed: bool,
    /// External metric JSON (`[{scene_id, metric_name, value}]`), as
    /// `method=path` or a bare path applied to every method; repeatable.
    #[arg(long)]
    pub merge_external: Vec<String>,
    /// Directory for rows.csv, summary.csv and eval.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long, default_value_t = 0.01)]
    pub sigma_min: f64,
    #[arg(long, default_value_t = 5.0)]
    pub sigma_max: f64,
    #[arg(long, default_value_t = 0.3)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
}

#[derive(Debug, Args)]
pub struct TrainToyArgs {
    /// Job description (JSON) with `kind` = `gaussian` or `pipeline`.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the job seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the full report here as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelSize {
    Base,
    Small,
}

impl ModelSize {
    fn spec(self) -> ModelSpec {
        match self {
            ModelSize::Base => ModelSpec::base(),
            ModelSize::Small => ModelSpec::small(),
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Weight file; random weights of `--size` when absent.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModelSize::Base)]
    pub size: ModelSize,
    /// Length of the benchmark signal in seconds.
    #[arg(long, default_value_t = 4.0)]
    pub seconds: f64,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct InitWeightsArgs {
    #[arg(long, value_enum, default_value_t = ModelSize::Base)]
    pub size: ModelSize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// `train-toy` job file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainToyJob {
    /// Scorer on a white Gaussian prior at the matched noise level.
    Gaussian(GaussianJob),
    /// Toy conditioner plus scorer on synthesized scenes.
    Pipeline(Box<PipelineJob>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianJob {
    pub train: ToyTrainConfig,
    pub n_bins: usize,
    pub with_bias: bool,
    pub seed: u64,
    pub schedule: NoiseSchedule,
}

impl Default for GaussianJob {
    fn default() -> Self {
        GaussianJob {
            train: ToyTrainConfig::default(),
            n_bins: 32,
            with_bias: false,
            seed: 0,
            schedule: NoiseSchedule::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineJob {
    pub pipeline: ToyPipelineConfig,
    /// Scenes for training and holdout; the last `holdout_scenes` are held out.
    pub data: SynthConfig,
    pub holdout_scenes: usize,
    pub stft: StftConfig,
}

impl Default for PipelineJob {
    fn default() -> Self {
        let mut data = SynthConfig { scenes: 6, ..Default::default() };
        data.ranges.duration_s = 2.0;
        PipelineJob { pipeline: ToyPipelineConfig::default(), data, holdout_scenes: 2, stft: StftConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianReport {
    pub sigma: f64,
    pub steps: usize,
    /// Gain of the exact score, `-1 / (sigma_s^2 + sigma^2)`.
    pub optimal_gain: f64,
    pub mean_gain: f64,
    pub max_relative_error: f64,
    pub loss_first: f64,
    pub loss_last: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainToyReport {
    Gaussian(GaussianReport),
    Pipeline(ToyRunReport),
}

pub fn run_gaussian_job(job: &GaussianJob) -> Result<GaussianReport> {
    if job.n_bins == 0 {
        return Err(Error::Config("n_bins must be positive".into()));
    }
    let r = toy_train(ToyScorer::new(job.n_bins, job.with_bias), &job.train, &job.schedule, &mut stream(job.seed))?;
    let optimal = -1.0 / (job.train.prior_sigma_s.powi(2) + r.sigma * r.sigma);
    let gains = r.scorer.gain();
    let mean = gains.iter().map(|g| g.re).sum::<f64>() / gains.len() as f64;
    let max_err = gains.iter().map(|g| (g - optimal).norm() / optimal.abs()).fold(0.0, f64::max);
    let window = (r.loss_trace.len() / 10).max(1);
    let avg = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Ok(GaussianReport {
        sigma: r.sigma,
        steps: job.train.steps,
        optimal_gain: optimal,
        mean_gain: mean,
        max_relative_error: max_err,
        loss_first: avg(&r.loss_trace[..window]),
        loss_last: avg(&r.loss_trace[r.loss_trace.len() - window..]),
    })
}

pub fn run_pipeline_job(job: &PipelineJob) -> Result<ToyRunReport> {
    if job.holdout_scenes >= job.data.scenes {
        return Err(Error::Config(format!(
            "holdout_scenes {} leaves no training scenes out of {}",
            job.holdout_scenes, job.data.scenes
        )));
    }
    let examples = synthesize_with(&job.data, |_, bundle, _| Ok(TrainExample::from_bundle(&bundle, &job.stft)?))?;
    let (train, holdout) = examples.split_at(examples.len() - job.holdout_scenes);
    Ok(toy_pipeline_train(train, holdout, &job.pipeline)?.report)
}

fn emit<T: Serialize>(out: &mut dyn Write, json: bool, value: &T, text: impl FnOnce() -> String) -> Result<()> {
    let s = if json {
        serde_json::to_string_pretty(value).map_err(|e| Error::json("<stdout>", e))? + "\n"
    } else {
        text()
    };
    out.write_all(s.as_bytes()).map_err(|e| Error::io("<stdout>", e))
}

fn sibling(manifest: &Path, name: &str) -> PathBuf {
    manifest.parent().unwrap_or(Path::new(".")).join(name)
}

fn parse_external(arg: &str) -> Result<ExternalSet> {
    let (method, path) = match arg.split_once('=') {
        Some((m, p)) => (Some(m.to_string()), PathBuf::from(p)),
        None => (None, PathBuf::from(arg)),
    };
    Ok(ExternalSet { method, values: read_json(&path)? })
}

/// Execute one parsed command, writing its report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let json = cli.json;
    match &cli.command {
        Command::Synth(a) => {
            let mut cfg: SynthConfig = match &a.config {
                Some(p) => read_json(p)?,
                None => SynthConfig::default(),
            };
            cfg.seed = a.seed.unwrap_or(cfg.seed);
            cfg.scenes = a.scenes.unwrap_or(cfg.scenes);
            let records = generate_dataset(&cfg, &a.out)?;
            let manifest = a.out.join(MANIFEST_NAME);
            let summary = serde_json::json!({ "manifest": manifest, "scenes": records.len() });
            emit(out, json, &summary, || format!("wrote {} scenes, manifest {}\n", records.len(), manifest.display()))
        }
        Command::Enhance(a) => {
            let opts = a.sampler.resolve()?;
            let model = HybridModel::new(load_weights(&a.weights)?)?;
            let dir = a.out.clone().unwrap_or_else(|| sibling(&a.manifest, "enhanced"));
            let run = enhance_manifest(&model, &a.manifest, &dir, &opts)?;
            emit(out, json, &run, || format!("enhanced {} scenes into {}\n", run.outputs.len(), dir.display()))
        }
        Command::Baseline(a) => {
            let mut opts: BaselineOptions = match &a.config {
                Some(p) => read_json(p)?,
                None => BaselineOptions::default(),
            };
            opts.method = a.method.unwrap_or(opts.method);
            opts.align |= a.align;
            opts.max_lag = a.max_lag.unwrap_or(opts.max_lag);
            let name = match opts.method {
                BaselineMethod::Nlms => "nlms",
                BaselineMethod::Fdkf => "fdkf",
            };
            let dir = a.out.clone().unwrap_or_else(|| sibling(&a.manifest, name));
            let run = baseline_manifest(&a.manifest, &dir, &opts)?;
            emit(out, json, &run, || format!("{}: {} residuals in {}\n", run.method, run.outputs.len(), dir.display()))
        }
        Command::Eval(a) => {
            let mut methods = Vec::new();
            if a.unprocessed {
                methods.push(MethodSource::unprocessed());
            }
            for e in &a.enhanced {
                methods.push(MethodSource::parse(e)?);
            }
            let external = a.merge_external.iter().map(|s| parse_external(s)).collect::<Result<Vec<_>>>()?;
            let report = evaluate_manifest(&a.manifest, &methods, &external)?;
            if let Some(dir) = &a.out {
                write_report(dir, &report)?;
            }
            emit(out, json, &report, || format_summary(&report.summary, report.ranks.as_deref()))
        }
        Command::Schedule(a) => {
            let sched = NoiseSchedule::new(a.sigma_min, a.sigma_max, a.t_max)?;
            let sampler = SamplerConfig { n_steps: a.steps, epsilon: a.epsilon, seed: 0 };
            sampler.validate()?;
            let coeffs = sampler.coefficients(&sched)?;
            let grid: Vec<(f64, f64)> = sampler
                .time_grid(&sched)
                .into_iter()
                .map(|t| Ok((t, sched.sigma_at(t)?)))
                .collect::<Result<_>>()?;
            let sigma_t = sched.sigma_at(sched.t_max)?;
            let value = serde_json::json!({
                "sigma_t": sigma_t,
                "grid": grid.iter().map(|(t, s)| serde_json::json!({"t": t, "sigma": s})).collect::<Vec<_>>(),
                "coefficients": coeffs,
            });
            emit(out, json, &value, || {
                let mut s = format!("sigma_T = {sigma_t:.10}\n   k          t          sigma\n");
                for (k, (t, sg)) in grid.iter().enumerate() {
                    s.push_str(&format!("{k:>4} {t:>10.6} {sg:>14.10}\n"));
                }
                s.push_str(&format!(
                    "dt = {:.6}  gamma = {:.10}  eta = {:.10}  beta = {:.10}\n",
                    coeffs.dt, coeffs.gamma, coeffs.eta, coeffs.beta
                ));
                s
            })
        }
        Command::TrainToy(a) => {
            let mut job: TrainToyJob = read_json(&a.config)?;
            let report = match &mut job {
                TrainToyJob::Gaussian(g) => {
                    g.seed = a.seed.unwrap_or(g.seed);
                    TrainToyReport::Gaussian(run_gaussian_job(g)?)
                }
                TrainToyJob::Pipeline(p) => {
                    p.pipeline.seed = a.seed.unwrap_or(p.pipeline.seed);
                    TrainToyReport::Pipeline(run_pipeline_job(p)?)
                }
            };
            if let Some(p) = &a.out {
                write_json(p, &report)?;
            }
            emit(out, json, &report, || match &report {
                TrainToyReport::Gaussian(g) => format!(
                    "sigma {:.6}: mean gain {:.4}, optimum {:.4}, max relative error {:.4}, loss {:.4} -> {:.4}\n",
                    g.sigma, g.mean_gain, g.optimal_gain, g.max_relative_error, g.loss_first, g.loss_last
                ),
                TrainToyReport::Pipeline(r) => format!(
                    "{} steps on {} scenes: holdout loss {:.6} -> {:.6}\n",
                    r.train_loss.len(),
                    r.n_train,
                    r.holdout_initial.total,
                    r.holdout_final.total
                ),
            })
        }
        Command::Bench(a) => {
            let opts = a.sampler.resolve()?;
            let weights = match &a.weights {
                Some(p) => load_weights(p)?,
                None => a.size.spec().random_weights(opts.sampler.seed)?,
            };
            let model = HybridModel::new(weights)?;
            if a.seconds.is_nan() || a.seconds <= 0.0 || a.repeats == 0 {
                return Err(Error::Config("bench needs a positive duration and at least one repeat".into()));
            }
            let fs = 16_000;
            let mic = synth_speech(derive_seed(opts.sampler.seed, 1), a.seconds, fs);
            let far = synth_speech(derive_seed(opts.sampler.seed, 2), a.seconds, fs);
            let start = Instant::now();
            for r in 0..a.repeats {
                enhance_signal(&model, &mic, &far, &opts, r as u64)?;
            }
            let wall = start.elapsed().as_secs_f64() / a.repeats as f64;
            let audio = mic.len() as f64 / fs as f64;
            let value = serde_json::json!({
                "audio_s": audio,
                "wall_s_per_run": wall,
                "real_time_factor": wall / audio,
                "parameters": model.spec().n_params(),
                "mode": opts.mode,
                "steps": opts.sampler.n_steps,
                "threads": rayon::current_num_threads(),
            });
            emit(out, json, &value, || {
                format!(
                    "{:.2} s of audio in {:.3} s per run: real-time factor {:.3} ({} parameters, {} steps)\n",
                    audio,
                    wall,
                    wall / audio,
                    model.spec().n_params(),
                    opts.sampler.n_steps
                )
            })
        }
        Command::InitWeights(a) => {
            let weights = a.size.spec().random_weights(a.seed)?;
            save_weights(&weights, &a.out)?;
            let value = serde_json::json!({ "out": a.out, "parameters": weights.n_params(), "tensors": weights.len() });
            emit(out, json, &value, || {
                format!("wrote {} tensors ({} parameters) to {}\n", weights.len(), weights.n_params(), a.out.display())
            })
        }
    }
}

/// Error report written to stderr under `--json`.
pub fn error_json(e: &Error) -> String {
    let kind = e.kind();
    serde_json::json!({
        "error": kind.label(),
        "exit_code": kind.exit_code(),
        "message": e.to_string(),
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> Result<String> {
        let cli = Cli::try_parse_from(std::iter::once("echodiff").chain(args.iter().copied())).unwrap();
        let mut buf = Vec::new();
        run(&cli, &mut buf)?;
        Ok(String::from_utf8(buf).unwrap())
    }

    #[test]
    fn schedule_prints_sigma_t() {
        let s = run_args(&["schedule"]).unwrap();
        assert!(s.starts_with("sigma_T = 0.0645195"), "{s}");
        let j: serde_json::Value = serde_json::from_str(&run_args(&["--json", "schedule", "--steps", "3"]).unwrap()).unwrap();
        assert_eq!(j["grid"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn synth_enhance_baseline_eval_pipeline() {
        let dir = tempfile::tempdir().unwrap();
        let p = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
        std::fs::write(p("synth.json"), r#"{"scenes": 2, "ranges": {"duration_s": 1.0, "rt60_s": [0.2, 0.3]}}"#).unwrap();
        run_args(&["synth", "--config", &p("synth.json"), "--out", &p("data"), "--seed", "1"]).unwrap();
        run_args(&["init-weights", "--size", "small", "--out", &p("w.bin")]).unwrap();
        let manifest = p("data/manifest.jsonl");
        run_args(&["enhance", "--manifest", &manifest, "--weights", &p("w.bin"), "--mode", "single", "--out", &p("hybrid")]).unwrap();
        let wavs = |d: &str| -> Vec<u32> {
            let mut v: Vec<u32> = std::fs::read_dir(d)
                .unwrap()
                .map(|e| e.unwrap().path())
                .filter(|f| f.to_str().unwrap().ends_with(".wav"))
                .map(|f| hound::WavReader::open(f).unwrap().duration())
                .collect();
            v.sort();
            v
        };
        assert_eq!(wavs(&p("hybrid")), [16000, 16000]);
        run_args(&["baseline", "--method", "nlms", "--manifest", &manifest, "--out", &p("nlms")]).unwrap();
        let text = run_args(&[
            "eval", "--manifest", &manifest, "--unprocessed",
            "--enhanced", &format!("hybrid={}", p("hybrid")),
            "--enhanced", &format!("nlms={}", p("nlms")),
            "--out", &p("tables"),
        ])
        .unwrap();
        assert!(text.contains("hybrid") && text.contains("nlms"), "{text}");
        let rows = std::fs::read_to_string(dir.path().join("tables/rows.csv")).unwrap();
        assert_eq!(rows.lines().count(), 1 + 3 * 2);
        assert!(dir.path().join("tables/summary.csv").is_file() && dir.path().join("tables/eval.json").is_file());
    }

    #[test]
    fn config_precedence_flag_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.json");
        std::fs::write(&p, r#"{"mode": "multi", "steps": 4, "epsilon": 1.5, "seed": 9}"#).unwrap();
        let a = SamplerArgs { mode: None, steps: Some(2), epsilon: None, seed: None, config: Some(p) };
        let o = a.resolve().unwrap();
        assert_eq!((o.mode, o.sampler.n_steps, o.sampler.epsilon, o.sampler.seed), (Mode::Multi, 2, 1.5, 9));
        let d = SamplerArgs { mode: None, steps: None, epsilon: None, seed: None, config: None }.resolve().unwrap();
        assert_eq!((d.mode, d.sampler.n_steps), (Mode::Single, 1));
    }

    #[test]
    fn error_kinds_map_to_exit_codes() {
        let e = run_args(&["schedule", "--sigma-min=-1"]).unwrap_err();
        assert_eq!(e.kind().exit_code(), 2);
        let j: serde_json::Value = serde_json::from_str(&error_json(&e)).unwrap();
        assert_eq!(j["exit_code"], 2);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("missing.jsonl");
        let e = run_args(&["eval", "--manifest", p.to_str().unwrap(), "--unprocessed"]).unwrap_err();
        assert_eq!(e.kind().exit_code(), 3);
        let job = dir.path().join("job.json");
        std::fs::write(&job, r#"{"kind": "gaussian", "train": {"steps": 3000, "lr": 1e6}, "n_bins": 4}"#).unwrap();
        let e = run_args(&["train-toy", "--config", job.to_str().unwrap()]).unwrap_err();
        assert_eq!(e.kind().exit_code(), 4, "{e}");
    }

    #[test]
    fn gaussian_job_report() {
        let job = GaussianJob { train: ToyTrainConfig { steps: 1500, ..Default::default() }, n_bins: 8, ..Default::default() };
        let r = run_gaussian_job(&job).unwrap();
        assert!(r.max_relative_error < 0.2, "{r:?}");
        assert!(r.loss_last < r.loss_first);
    }
}
