use std::path::Path;

use super::AudioBuffer;
use crate::error::{Error, Result};

/// Reads a mono WAV file. 16-bit PCM is the expected format; 32-bit float is
/// also accepted.
pub fn read_wav(path: &Path) -> Result<AudioBuffer> {
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::InvalidInput(format!(
            "{}: expected mono audio, found {} channels",
            path.display(),
            spec.channels
        )));
    }
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(wav_err)?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(wav_err)?,
        (fmt, bits) => {
            return Err(Error::InvalidInput(format!(
                "{}: unsupported sample format {fmt:?}/{bits}-bit",
                path.display()
            )))
        }
    };
    AudioBuffer::new(samples, spec.sample_rate)
}

/// Writes 16-bit PCM mono.
pub fn write_wav(path: &Path, audio: &AudioBuffer) -> Result<()> {
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in &audio.samples {
        let v = (s as f64 * 32767.0).round().clamp(-32768.0, 32767.0) as i16;
        w.write_sample(v).map_err(wav_err)?;
    }
    w.finalize().map_err(wav_err)
}
