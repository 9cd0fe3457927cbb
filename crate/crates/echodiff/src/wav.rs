//! Mono WAV reading and writing.

use std::path::Path;

use echodiff_core::Waveform;
use hound::{SampleFormat, WavSpec, WavWriter};

use crate::error::{Error, Result};

/// Sample encoding for written files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavEncoding {
    #[default]
    Float32,
    Pcm16,
}

/// Read a mono file. Integer PCM is scaled to `[-1, 1)`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav { path: path.into(), source };
    let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Data(format!("{}: expected mono, found {} channels", path.display(), spec.channels)));
    }
    let samples: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err)?
        }
    };
    Ok(Waveform::new(samples, spec.sample_rate)?)
}

pub fn write_wav(path: impl AsRef<Path>, wave: &Waveform, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    let wav_err = |source| Error::Wav { path: path.into(), source };
    let (bits, format) = match encoding {
        WavEncoding::Float32 => (32, SampleFormat::Float),
        WavEncoding::Pcm16 => (16, SampleFormat::Int),
    };
    let spec = WavSpec { channels: 1, sample_rate: wave.sample_rate_hz(), bits_per_sample: bits, sample_format: format };
    let mut w = WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in wave.samples() {
        match encoding {
            WavEncoding::Float32 => w.write_sample(s as f32),
            WavEncoding::Pcm16 => w.write_sample((s * 32768.0).round().clamp(-32768.0, 32767.0) as i16),
        }
        .map_err(wav_err)?;
    }
    w.finalize().map_err(wav_err)
}
