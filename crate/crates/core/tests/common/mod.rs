// Shared by the fixture target and the acceptance runner.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use echodiff_core::classical::gcc_phat_delay;
use echodiff_core::metrics::{estoi, stoi};
use echodiff_core::signal::{stft, StftConfig};
use echodiff_core::Waveform;
use serde_json::Value;

// Resolves from either workspace crate.
pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

/// 16-bit mono fixture scaled to `[-1, 1)`.
pub fn read_wav(path: PathBuf) -> Option<Waveform> {
    let mut r = hound::WavReader::open(path).ok()?;
    let rate = r.spec().sample_rate;
    let x = r.samples::<i16>().map(|s| s.map(|v| v as f64 / 32768.0)).collect::<Result<Vec<_>, _>>().ok()?;
    Waveform::new(x, rate).ok()
}

pub fn fixtures() -> Value {
    let text = std::fs::read_to_string(fixture_dir().join("fixtures.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["schema_version"], 1);
    v
}

/// Largest deviation of the STFT from the oracle frames, relative to the
/// oracle's peak magnitude, and the relative energy error.
pub fn stft_deviation(fx: &Value) -> (f64, f64) {
    let f = &fx["stft"];
    let w = read_wav(fixture_dir().join(f["wav"].as_str().unwrap())).unwrap();
    let spec = stft(&w, &StftConfig::default()).unwrap();
    assert_eq!(spec.n_frames() as u64, f["n_frames"].as_u64().unwrap());
    let n = spec.n_frames();
    let frames = [0, 1, 2, n - 3, n - 2, n - 1];
    let oracle: Vec<&Value> = f["first"].as_array().unwrap().iter().chain(f["last"].as_array().unwrap()).collect();
    let mut peak = 0.0f64;
    let mut dev = 0.0f64;
    for (l, o) in frames.iter().zip(oracle) {
        let bins = o.as_array().unwrap();
        assert_eq!(bins.len(), 257);
        for (k, b) in bins.iter().enumerate() {
            let (re, im) = (b[0].as_f64().unwrap(), b[1].as_f64().unwrap());
            let got = spec.frame(*l)[k];
            peak = peak.max(re.hypot(im));
            dev = dev.max((got.re - re).hypot(got.im - im));
        }
    }
    let energy = f["energy"].as_f64().unwrap();
    (dev / peak, (spec.norm_sqr() / energy - 1.0).abs())
}

/// `(name, ours, oracle)` for ESTOI and classic STOI of every pair.
pub fn intelligibility_pairs(fx: &Value) -> Vec<(String, f64, f64)> {
    let dir = fixture_dir();
    let mut out = Vec::new();
    for e in fx["estoi"].as_array().unwrap() {
        let clean = read_wav(dir.join(e["clean"].as_str().unwrap())).unwrap();
        let name = e["degraded"].as_str().unwrap();
        let deg = read_wav(dir.join(name)).unwrap();
        out.push((format!("estoi {name}"), estoi(&clean, &deg).unwrap(), e["estoi"].as_f64().unwrap()));
        out.push((format!("stoi {name}"), stoi(&clean, &deg, false).unwrap(), e["stoi"].as_f64().unwrap()));
    }
    out
}

/// `(ours, expected)` lag per GCC fixture.
pub fn gcc_lags(fx: &Value) -> Vec<(i64, i64)> {
    let dir = fixture_dir();
    fx["gcc"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| {
            let mic = read_wav(dir.join(g["mic"].as_str().unwrap())).unwrap();
            let r = read_wav(dir.join(g["ref"].as_str().unwrap())).unwrap();
            let lag = gcc_phat_delay(&mic, &r, g["max_lag"].as_u64().unwrap() as usize).unwrap();
            (lag, g["lag"].as_i64().unwrap())
        })
        .collect()
}
