//! Synthetic test signals: tones, chirps, triangle-FM trills and seeded
//! noise. Used by the test suites and for constructing evaluation corpora.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::AudioClip;

/// Standard normal variate via the Box-Muller transform.
pub(crate) fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Pure sine tone.
pub fn tone(
    freq_hz: f64,
    dur_s: f64,
    sample_rate: u32,
    amp: f64,
    phase: f64,
    id: &str,
) -> AudioClip {
    let n = (dur_s * sample_rate as f64).round() as usize;
    let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate as f64;
    let samples = (0..n)
        .map(|i| (amp * (w * i as f64 + phase).sin()) as f32)
        .collect();
    AudioClip::new(samples, sample_rate, id)
}

/// Linear chirp starting at `start_hz` and sweeping at `rate_hz_s`.
pub fn linear_chirp(
    start_hz: f64,
    rate_hz_s: f64,
    dur_s: f64,
    sample_rate: u32,
    amp: f64,
    id: &str,
) -> AudioClip {
    let n = (dur_s * sample_rate as f64).round() as usize;
    let dt = 1.0 / sample_rate as f64;
    let mut phase = 0.0f64;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let f = start_hz + rate_hz_s * i as f64 * dt;
        phase += 2.0 * std::f64::consts::PI * f * dt;
        samples.push((amp * phase.sin()) as f32);
    }
    AudioClip::new(samples, sample_rate, id)
}

/// Triangle-FM sweep: the instantaneous frequency ramps between
/// `centre_hz - span_hz/2` and `centre_hz + span_hz/2` with constant slope
/// magnitude `fm_rate_hz_s`, alternating direction. `sweep_phase` in
/// `[0, 2)` sets the starting point within the up/down cycle.
pub fn triangle_fm(
    centre_hz: f64,
    span_hz: f64,
    fm_rate_hz_s: f64,
    sweep_phase: f64,
    dur_s: f64,
    sample_rate: u32,
    amp: f64,
    id: &str,
) -> AudioClip {
    assert!(fm_rate_hz_s > 0.0 && span_hz > 0.0);
    let n = (dur_s * sample_rate as f64).round() as usize;
    let dt = 1.0 / sample_rate as f64;
    let leg_s = span_hz / fm_rate_hz_s;
    let mut phase = 0.0f64;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let cyc = (i as f64 * dt / leg_s + sweep_phase).rem_euclid(2.0);
        let tri = if cyc < 1.0 { cyc } else { 2.0 - cyc };
        let f = centre_hz - span_hz / 2.0 + span_hz * tri;
        phase += 2.0 * std::f64::consts::PI * f * dt;
        samples.push((amp * phase.sin()) as f32);
    }
    AudioClip::new(samples, sample_rate, id)
}

/// Impose a syllable envelope in place: bursts of `burst_s` seconds every
/// `period_s` seconds with raised-cosine on/off ramps of `ramp_s`.
pub fn apply_syllable_envelope(
    samples: &mut [f32],
    sample_rate: u32,
    period_s: f64,
    burst_s: f64,
    ramp_s: f64,
) {
    let dt = 1.0 / sample_rate as f64;
    for (i, s) in samples.iter_mut().enumerate() {
        let t = (i as f64 * dt).rem_euclid(period_s);
        let env = if t >= burst_s {
            0.0
        } else if t < ramp_s {
            0.5 - 0.5 * (std::f64::consts::PI * t / ramp_s).cos()
        } else if t >= burst_s - ramp_s {
            0.5 + 0.5 * (std::f64::consts::PI * (t - (burst_s - ramp_s)) / ramp_s).cos()
        } else {
            1.0
        };
        *s = (*s as f64 * env) as f32;
    }
}

/// Seeded white Gaussian noise with the given RMS.
pub fn white_noise(len: usize, rms: f64, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| (rms * gaussian(&mut rng)) as f32).collect()
}

/// Add seeded white Gaussian noise sized for the given signal-to-noise
/// ratio, measured against the mean power of the samples as they are.
pub fn add_noise_snr(samples: &mut [f32], snr_db: f64, seed: u64) {
    if samples.is_empty() {
        return;
    }
    let power: f64 =
        samples.iter().map(|&s| (s as f64) * (s as f64)).sum::<f64>() / samples.len() as f64;
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in samples.iter_mut() {
        *s = (*s as f64 + sigma * gaussian(&mut rng)) as f32;
    }
}
