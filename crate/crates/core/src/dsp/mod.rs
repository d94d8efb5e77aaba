//! Frame energies, energy-based voice activity detection and the de-noising
//! step that swaps loud non-speech events for low-level Gaussian noise.

mod wav;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use wav::{read_wav, write_wav};

/// Log-energy floor in dB (RMS clamped to 1e-6).
pub const ENERGY_FLOOR_DB: f64 = -120.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        let buf = AudioBuffer {
            samples,
            sample_rate,
        };
        buf.validate()?;
        Ok(buf)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if let Some(i) = self.samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("audio sample {i}")));
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    fn ms_to_samples(&self, ms: f64) -> usize {
        (ms * self.sample_rate as f64 / 1000.0).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameEnergySeries {
    pub frame_ms: f64,
    pub hop_ms: f64,
    pub frame_len: usize,
    pub hop_len: usize,
    /// 20·log10(max(RMS, 1e-6)) per frame.
    pub energies: Vec<f64>,
}

impl FrameEnergySeries {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Sample span `[start, end)` of frame `i`.
    pub fn span(&self, i: usize) -> (usize, usize) {
        let start = i * self.hop_len;
        (start, start + self.frame_len)
    }
}

fn rms(x: &[f32]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let ss: f64 = x.iter().map(|&v| (v as f64) * (v as f64)).sum();
    (ss / x.len() as f64).sqrt()
}

fn to_db(rms: f64) -> f64 {
    20.0 * rms.max(1e-6).log10()
}

pub fn frame_energy(audio: &AudioBuffer, frame_ms: f64, hop_ms: f64) -> Result<FrameEnergySeries> {
    audio.validate()?;
    if !(hop_ms > 0.0 && frame_ms >= hop_ms) {
        return Err(Error::InvalidInput(format!(
            "need frame_ms >= hop_ms > 0, got frame {frame_ms} hop {hop_ms}"
        )));
    }
    let frame_len = audio.ms_to_samples(frame_ms).max(1);
    let hop_len = audio.ms_to_samples(hop_ms).max(1);
    let n = audio.samples.len();
    if n < frame_len {
        return Err(Error::InvalidInput(format!(
            "audio of {n} samples is shorter than one frame ({frame_len})"
        )));
    }
    let count = 1 + (n - frame_len) / hop_len;
    let energies = (0..count)
        .map(|i| {
            let s = i * hop_len;
            to_db(rms(&audio.samples[s..s + frame_len]))
        })
        .collect();
    Ok(FrameEnergySeries {
        frame_ms,
        hop_ms,
        frame_len,
        hop_len,
        energies,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VadConfig {
    pub frame_ms: f64,
    pub hop_ms: f64,
    /// Speech threshold above the noise-floor percentile, in dB.
    pub onset_db: f64,
    /// Percentile of frame energies used as the noise-floor estimate.
    pub noise_percentile: f64,
    pub hangover_ms: f64,
    pub min_speech_ms: f64,
    pub min_pause_ms: f64,
}

impl Default for VadConfig {
    fn default() -> Self {
        VadConfig {
            frame_ms: 25.0,
            hop_ms: 10.0,
            onset_db: 6.0,
            noise_percentile: 20.0,
            hangover_ms: 90.0,
            min_speech_ms: 100.0,
            min_pause_ms: 150.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VadSegmentation {
    /// Sorted, non-overlapping `(start_s, end_s)` pairs.
    pub speech_intervals: Vec<(f64, f64)>,
    pub total_duration_s: f64,
}

/// Nearest-rank percentile of an unsorted slice, `p` in [0, 100].
fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((p / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64).floor() as usize;
    v[idx]
}

/// Speech intervals as sample ranges `[start, end)`.
fn vad_ranges(
    audio: &AudioBuffer,
    series: &FrameEnergySeries,
    cfg: &VadConfig,
) -> Vec<(usize, usize)> {
    let n = audio.samples.len();
    let threshold = percentile(&series.energies, cfg.noise_percentile) + cfg.onset_db;

    // Each frame owns the hop-long region centred on the frame centre.
    let lead = (series.frame_len - series.hop_len.min(series.frame_len)) / 2;
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < series.len() {
        if series.energies[i] > threshold {
            let first = i;
            while i + 1 < series.len() && series.energies[i + 1] > threshold {
                i += 1;
            }
            let start = first * series.hop_len + lead;
            let end = (i * series.hop_len + lead + series.hop_len).min(n);
            runs.push((start.min(n), end));
        }
        i += 1;
    }

    let merge_gap = |runs: Vec<(usize, usize)>, max_gap: usize, inclusive: bool| {
        let mut out: Vec<(usize, usize)> = Vec::with_capacity(runs.len());
        for r in runs {
            match out.last_mut() {
                Some(last)
                    if (inclusive && r.0 - last.1 <= max_gap)
                        || (!inclusive && r.0 - last.1 < max_gap) =>
                {
                    last.1 = r.1
                }
                _ => out.push(r),
            }
        }
        out
    };

    let runs = merge_gap(runs, audio.ms_to_samples(cfg.hangover_ms), true);
    let min_speech = audio.ms_to_samples(cfg.min_speech_ms);
    let runs: Vec<_> = runs
        .into_iter()
        .filter(|(s, e)| e - s >= min_speech)
        .collect();
    merge_gap(runs, audio.ms_to_samples(cfg.min_pause_ms), false)
}

pub fn vad(audio: &AudioBuffer, cfg: &VadConfig) -> Result<VadSegmentation> {
    audio.validate()?;
    let total_duration_s = audio.duration_s();
    let frame_len = audio.ms_to_samples(cfg.frame_ms).max(1);
    if audio.samples.len() < frame_len {
        return Ok(VadSegmentation {
            speech_intervals: Vec::new(),
            total_duration_s,
        });
    }
    let series = frame_energy(audio, cfg.frame_ms, cfg.hop_ms)?;
    let sr = audio.sample_rate as f64;
    let speech_intervals = vad_ranges(audio, &series, cfg)
        .into_iter()
        .map(|(s, e)| (s as f64 / sr, e as f64 / sr))
        .collect();
    Ok(VadSegmentation {
        speech_intervals,
        total_duration_s,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiseConfig {
    /// Loud-event threshold above the median unvoiced frame energy, in dB.
    pub margin_db: f64,
    /// Quantile of unvoiced frame RMS used as the replacement noise level.
    pub floor_quantile: f64,
    pub seed: u64,
    pub vad: VadConfig,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            margin_db: 15.0,
            floor_quantile: 0.10,
            seed: 0,
            vad: VadConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseOutcome {
    pub audio: AudioBuffer,
    pub replaced_frames: usize,
    pub replaced_samples: usize,
}

/// Replaces loud frames lying entirely outside speech with Gaussian noise at
/// the unvoiced noise-floor level. Samples inside speech are never touched.
pub fn denoise(audio: &AudioBuffer, cfg: &DenoiseConfig) -> Result<DenoiseOutcome> {
    audio.validate()?;
    let identity = DenoiseOutcome {
        audio: audio.clone(),
        replaced_frames: 0,
        replaced_samples: 0,
    };
    let frame_len = audio.ms_to_samples(cfg.vad.frame_ms).max(1);
    if audio.samples.len() < frame_len {
        return Ok(identity);
    }
    let series = frame_energy(audio, cfg.vad.frame_ms, cfg.vad.hop_ms)?;
    let speech = vad_ranges(audio, &series, &cfg.vad);

    let unvoiced: Vec<usize> = (0..series.len())
        .filter(|&i| {
            let (s, e) = series.span(i);
            speech.iter().all(|&(a, b)| e <= a || s >= b)
        })
        .collect();
    if unvoiced.is_empty() {
        return Ok(identity);
    }

    let energies: Vec<f64> = unvoiced.iter().map(|&i| series.energies[i]).collect();
    let loud_threshold = percentile(&energies, 50.0) + cfg.margin_db;
    let rms_values: Vec<f64> = unvoiced
        .iter()
        .map(|&i| {
            let (s, e) = series.span(i);
            rms(&audio.samples[s..e])
        })
        .collect();
    let noise_rms = percentile(&rms_values, cfg.floor_quantile * 100.0);

    let mut mask = vec![false; audio.samples.len()];
    let mut replaced_frames = 0;
    for &i in &unvoiced {
        if series.energies[i] > loud_threshold {
            let (s, e) = series.span(i);
            mask[s..e].iter_mut().for_each(|m| *m = true);
            replaced_frames += 1;
        }
    }
    if replaced_frames == 0 {
        return Ok(identity);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, noise_rms.max(0.0))
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut samples = audio.samples.clone();
    let mut replaced_samples = 0;
    for (x, _) in samples.iter_mut().zip(&mask).filter(|(_, &m)| m) {
        *x = (normal.sample(&mut rng) as f32).clamp(-1.0, 1.0);
        replaced_samples += 1;
    }
    Ok(DenoiseOutcome {
        audio: AudioBuffer {
            samples,
            sample_rate: audio.sample_rate,
        },
        replaced_frames,
        replaced_samples,
    })
}
