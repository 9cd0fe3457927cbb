use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 math shadows it whenever std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::estoi::estoi;
use crate::scene::{Augmentation, SceneBundle};
use crate::signal::Waveform;
use crate::{Error, Result};

/// Metrics computed elsewhere that a [`MetricRow`] can carry.
pub const EXTERNAL_METRIC_SLOTS: [&str; 7] =
    ["pesq", "lps", "aecmos_echo", "aecmos_other", "dnsmos_sig", "dnsmos_bak", "dnsmos_ovrl"];

/// Talker activity of a scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Double talk.
    Dt,
    /// Single-talk far end.
    Stfe,
    /// Single-talk near end.
    Stne,
    Silent,
}

impl Condition {
    pub fn label(&self) -> &'static str {
        match self {
            Condition::Dt => "dt",
            Condition::Stfe => "stfe",
            Condition::Stne => "stne",
            Condition::Silent => "silent",
        }
    }
}

mod nonfinite {
    use alloc::string::String;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(x) if x.is_finite() => s.serialize_some(x),
            Some(x) if x.is_nan() => s.serialize_some("nan"),
            Some(x) if *x > 0.0 => s.serialize_some("inf"),
            Some(_) => s.serialize_some("-inf"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(match Option::<Repr>::deserialize(d)? {
            None => None,
            Some(Repr::Num(x)) => Some(x),
            Some(Repr::Text(t)) => Some(match t.as_str() {
                "inf" => f64::INFINITY,
                "-inf" => f64::NEG_INFINITY,
                "nan" => f64::NAN,
                other => return Err(serde::de::Error::custom(alloc::format!("bad metric value `{other}`"))),
            }),
        })
    }
}

/// Metrics of one method on one scene. Absent values are `None`; infinite
/// values serialize as the strings `"inf"` and `"-inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub scene_id: String,
    pub method: String,
    pub condition: Condition,
    /// ESTOI against the near-end target; needs near-end activity.
    #[serde(with = "nonfinite")]
    pub estoi: Option<f64>,
    /// Target power over residual `enhanced - target` power.
    #[serde(with = "nonfinite")]
    pub snr_db: Option<f64>,
    /// Interference power `mic - target` over residual power, on echo-active frames.
    #[serde(with = "nonfinite")]
    pub erle_db: Option<f64>,
    /// Mean residual power on echo-active frames.
    #[serde(with = "nonfinite")]
    pub residual_echo_db: Option<f64>,
    #[serde(default)]
    pub external: BTreeMap<String, f64>,
}

impl MetricRow {
    /// Built-in metric values by name.
    pub fn values(&self) -> [(&'static str, Option<f64>); 4] {
        [
            ("estoi", self.estoi),
            ("snr_db", self.snr_db),
            ("erle_db", self.erle_db),
            ("residual_echo_db", self.residual_echo_db),
        ]
    }
}

/// One externally computed value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalMetric {
    pub scene_id: String,
    pub metric_name: String,
    pub value: f64,
}

fn db(num: f64, den: f64) -> f64 {
    10.0 * (num / den).log10()
}

/// Indices of 20 ms frames where `echo` is within 40 dB of its loudest frame.
fn echo_active_frames(echo: &[f64], frame: usize) -> Vec<usize> {
    let energies: Vec<f64> = echo.chunks(frame).map(|c| c.iter().map(|v| v * v).sum()).collect();
    let max = energies.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let floor = max * 1e-4;
    energies.iter().enumerate().filter(|(_, e)| **e > floor).map(|(i, _)| i).collect()
}

/// Evaluate `enhanced` against the ground truth stored in `bundle`.
pub fn evaluate_scene(bundle: &SceneBundle, enhanced: &Waveform, scene_id: &str, method: &str) -> Result<MetricRow> {
    let n = bundle.mic.len();
    if enhanced.len() != n || enhanced.sample_rate_hz() != bundle.mic.sample_rate_hz() {
        return Err(Error::shape(alloc::format!(
            "enhanced signal has {} samples at {} Hz, scene has {n} at {} Hz",
            enhanced.len(),
            enhanced.sample_rate_hz(),
            bundle.mic.sample_rate_hz()
        )));
    }
    if bundle.target.len() != n || bundle.echo.len() != n {
        return Err(Error::input("scene ground truth (target, echo) is missing or has the wrong length"));
    }
    let target = bundle.target.samples();
    let (mic, out) = (bundle.mic.samples(), enhanced.samples());
    let near_active = bundle.target.mean_square() > 0.0 && bundle.config.augmentation != Augmentation::DropNearend;
    let echo_active = bundle.echo.mean_square() > 0.0 && bundle.config.augmentation != Augmentation::DropFarend;
    let condition = match (near_active, echo_active) {
        (true, true) => Condition::Dt,
        (false, true) => Condition::Stfe,
        (true, false) => Condition::Stne,
        (false, false) => Condition::Silent,
    };
    let residual = |i: usize| out[i] - target[i];
    let (estoi_v, snr) = if near_active {
        let res: f64 = (0..n).map(|i| residual(i).powi(2)).sum();
        let sig: f64 = target.iter().map(|v| v * v).sum();
        (Some(estoi(&bundle.target, enhanced)?), Some(db(sig, res)))
    } else {
        (None, None)
    };
    let (erle, residual_echo) = if echo_active {
        let frame = (bundle.mic.sample_rate_hz() / 50).max(1) as usize;
        let frames = echo_active_frames(bundle.echo.samples(), frame);
        let idx = || frames.iter().flat_map(|f| (f * frame)..((f + 1) * frame).min(n));
        let res: f64 = idx().map(|i| residual(i).powi(2)).sum();
        let interference: f64 = idx().map(|i| (mic[i] - target[i]).powi(2)).sum();
        let count = idx().count().max(1) as f64;
        (Some(db(interference, res)), Some(db(res / count, 1.0)))
    } else {
        (None, None)
    };
    Ok(MetricRow {
        scene_id: scene_id.to_string(),
        method: method.to_string(),
        condition,
        estoi: estoi_v,
        snr_db: snr,
        erle_db: erle,
        residual_echo_db: residual_echo,
        external: BTreeMap::new(),
    })
}

/// Attach external values to every row of the matching scene.
pub fn merge_external(rows: &mut [MetricRow], external: &[ExternalMetric]) -> Result<()> {
    for e in external {
        let mut hit = false;
        for r in rows.iter_mut().filter(|r| r.scene_id == e.scene_id) {
            r.external.insert(e.metric_name.clone(), e.value);
            hit = true;
        }
        if !hit {
            return Err(Error::input(alloc::format!("external metric for unknown scene `{}`", e.scene_id)));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{nlms_cancel, NlmsConfig};
    use crate::scene::sources::{synth_noise, synth_speech, NoiseKind};
    use crate::scene::{mix_scene, Nonlinearity, RoomSpec, SceneConfig};

    fn bundle(aug: Augmentation, nonlinear: bool) -> SceneBundle {
        let s = synth_speech(1, 4.0, 16000);
        let x = synth_speech(2, 4.0, 16000);
        let v = synth_noise(3, 4.0, 16000, NoiseKind::White);
        let room = RoomSpec {
            dimensions: [4.0, 5.0, 3.0],
            rt60: 0.25,
            max_reflection_order: Some(2),
            source_pos: [1.0, 1.0, 1.2],
            mic_pos: [1.2, 1.1, 1.2],
            nearend_pos: [2.5, 3.0, 1.5],
            seed: 0,
            absorption_model: Default::default(),
        };
        let cfg = SceneConfig {
            ser_db: 0.0,
            snr_db: 40.0,
            room,
            nonlinearity: if nonlinear { Nonlinearity::default() } else { Nonlinearity::Identity },
            duration_s: 4.0,
            augmentation: aug,
            seed: 5,
        };
        mix_scene(&s, &x, &v, &cfg).unwrap()
    }

    #[test]
    fn perfect_and_passthrough() {
        let b = bundle(Augmentation::None, false);
        let r = evaluate_scene(&b, &b.target, "s0", "oracle").unwrap();
        assert_eq!(r.condition, Condition::Dt);
        assert!((r.estoi.unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(r.residual_echo_db, Some(f64::NEG_INFINITY));
        assert_eq!(r.erle_db, Some(f64::INFINITY));
        let u = evaluate_scene(&b, &b.mic, "s0", "unprocessed").unwrap();
        assert_eq!(u.erle_db, Some(0.0));
        assert_eq!(u.estoi.unwrap(), estoi(&b.target, &b.mic).unwrap());
    }

    #[test]
    fn conditions_follow_augmentation() {
        let stfe = evaluate_scene(&bundle(Augmentation::DropNearend, false), &bundle(Augmentation::DropNearend, false).mic, "a", "m").unwrap();
        assert_eq!(stfe.condition, Condition::Stfe);
        assert!(stfe.estoi.is_none() && stfe.erle_db.is_some());
        let b = bundle(Augmentation::DropFarend, false);
        let stne = evaluate_scene(&b, &b.mic, "b", "m").unwrap();
        assert_eq!(stne.condition, Condition::Stne);
        assert!(stne.erle_db.is_none() && stne.estoi.is_some());
    }

    #[test]
    fn nlms_beats_unprocessed_on_linear_echo() {
        let b = bundle(Augmentation::DropNearend, false);
        let out = nlms_cancel(&b.mic, &b.farend, &NlmsConfig::default()).unwrap();
        let m = evaluate_scene(&b, &out.residual, "c", "nlms").unwrap();
        let u = evaluate_scene(&b, &b.mic, "c", "unprocessed").unwrap();
        assert!(m.erle_db.unwrap() > u.erle_db.unwrap() + 6.0, "{m:?}");
    }

    #[test]
    fn rows_serialize_with_sentinels_and_merge() {
        let b = bundle(Augmentation::None, false);
        let mut rows = alloc::vec![evaluate_scene(&b, &b.target, "s0", "oracle").unwrap()];
        let json = serde_json::to_string(&rows[0]).unwrap();
        assert!(json.contains("\"-inf\"") && json.contains("\"inf\""), "{json}");
        let back: MetricRow = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rows[0]);
        let ext = [ExternalMetric { scene_id: "s0".into(), metric_name: "pesq".into(), value: 3.5 }];
        merge_external(&mut rows, &ext).unwrap();
        assert_eq!(rows[0].external["pesq"], 3.5);
        let bad = [ExternalMetric { scene_id: "zz".into(), metric_name: "pesq".into(), value: 1.0 }];
        assert!(merge_external(&mut rows, &bad).is_err());
        let short = Waveform::zeros(10, 16000);
        assert!(evaluate_scene(&b, &short, "s0", "x").is_err());
    }
}
