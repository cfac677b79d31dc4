//! Heterodyne (ring modulation) chirplet analysis: de-chirp each selected
//! frame with every candidate rate and keep the (frequency, rate) pair with
//! the strongest in-band response.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{Atom, ChirpGrid, ExtractError, Method};
use crate::ingest::AudioClip;
use crate::spectral::{hann, peak_in_magnitudes, select_top_indices, stft, AnalysisConfig};

/// Per-rate de-chirp carriers, windowed. The carrier's instantaneous
/// frequency falls at `rate` Hz/s, zero at mid-frame, so a matching chirp is
/// flattened to a stationary tone before the transform.
fn carriers(grid: &ChirpGrid, frame_size: usize, sample_rate: u32) -> Vec<Vec<Complex<f64>>> {
    let window = hann(frame_size);
    let fs = sample_rate as f64;
    let centre = frame_size as f64 / 2.0;
    grid.rates()
        .iter()
        .map(|&rate| {
            (0..frame_size)
                .map(|i| {
                    let tau = (i as f64 - centre) / fs;
                    let phase = -std::f64::consts::PI * rate * tau * tau;
                    Complex::from_polar(window[i], phase)
                })
                .collect()
        })
        .collect()
}

pub fn extract_rm(
    clip: &AudioClip,
    cfg: &AnalysisConfig,
    grid: &ChirpGrid,
) -> Result<Vec<Atom>, ExtractError> {
    let frames = stft(clip, cfg)?;
    let selected = select_top_indices(&frames, cfg);
    let n = cfg.frame_size;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let carrier_table = carriers(grid, n, clip.sample_rate);
    let (band_lo, band_hi) = cfg.band_bins(n, clip.sample_rate);
    let half_frame = n as f64 / 2.0 / clip.sample_rate as f64;

    let mut atoms = Vec::new();
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut mags = vec![0.0f64; n / 2 + 1];
    let mut best_mags = vec![0.0f64; n / 2 + 1];
    for &idx in &selected {
        let start = idx * cfg.hop_size;
        let mut best_rate = f64::NAN;
        let mut best_mag = 0.0f64;
        for (carrier, &rate) in carrier_table.iter().zip(grid.rates()) {
            for i in 0..n {
                buf[i] = carrier[i] * clip.samples[start + i] as f64;
            }
            fft.process(&mut buf);
            for (m, b) in mags.iter_mut().zip(buf.iter()).take(n / 2 + 1) {
                *m = b.norm();
            }
            let frame_best = mags[band_lo..=band_hi]
                .iter()
                .fold(0.0f64, |acc, &m| acc.max(m));
            // Strict improvement: the zero-rate candidate, scanned first,
            // wins ties on stationary content.
            if frame_best > best_mag {
                best_mag = frame_best;
                best_rate = rate;
                best_mags.copy_from_slice(&mags);
            }
        }
        if best_mag <= 0.0 {
            continue;
        }
        let peak = peak_in_magnitudes(&best_mags, band_lo, band_hi, n, clip.sample_rate, cfg)
            .expect("nonzero in-band magnitude");
        atoms.push(Atom {
            time_s: frames[idx].start_time + half_frame,
            frequency_hz: peak.frequency_hz,
            fm_rate_hz_s: best_rate,
            magnitude: peak.magnitude,
            method: Method::Rm,
        });
    }
    if atoms.is_empty() {
        return Err(ExtractError::NoVoicedFrames);
    }
    Ok(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn stationary_tone_wins_zero_rate() {
        let clip = synth::tone(4_000.0, 1.0, 48_000, 0.8, 0.0, "tone");
        let cfg = AnalysisConfig::default();
        let atoms = extract_rm(&clip, &cfg, &ChirpGrid::default()).unwrap();
        assert!(!atoms.is_empty());
        for atom in &atoms {
            assert_eq!(atom.fm_rate_hz_s, 0.0);
            assert!((atom.frequency_hz - 4_000.0).abs() < 5.0);
        }
    }

    /// One frame-aligned Hann chirplet: instantaneous frequency `f0` at
    /// mid-frame, sweeping at `rate`.
    fn chirplet_clip(f0: f64, rate: f64, frame_at: usize) -> crate::ingest::AudioClip {
        let n = 512;
        let mut samples = vec![0.0f32; n * 12];
        let window = crate::spectral::hann(n);
        let fs = 48_000.0;
        let centre = n as f64 / 2.0;
        for i in 0..n {
            let tau = (i as f64 - centre) / fs;
            let theta = 2.0 * std::f64::consts::PI * f0 * tau
                + std::f64::consts::PI * rate * tau * tau;
            samples[frame_at * n + i] = (0.8 * window[i] * theta.cos()) as f32;
        }
        crate::ingest::AudioClip::new(samples, 48_000, "chirplet")
    }

    #[test]
    fn dictionary_chirplet_recovers_exact_rate() {
        // Built with a grid rate: the winning rate is that member exactly.
        let grid = ChirpGrid::from_positive(&[7.5e4, 1.5e5, 3.0e5]);
        let rate = 1.5e5;
        let clip = chirplet_clip(5_000.0, rate, 4);
        let cfg = AnalysisConfig::default();
        let atoms = extract_rm(&clip, &cfg, &grid).unwrap();
        assert_eq!(atoms.len(), 1);
        assert_eq!(atoms[0].fm_rate_hz_s, rate);
        assert!(
            (atoms[0].frequency_hz - 5_000.0).abs() < 5.0,
            "freq {}",
            atoms[0].frequency_hz
        );
    }

    #[test]
    fn rate_between_grid_values_picks_bracketing_member() {
        let grid = ChirpGrid::from_positive(&[5e4, 1e5]);
        let rate = 7.5e4; // midway between the two grid magnitudes
        let clip = chirplet_clip(5_000.0, rate, 3);
        let atoms = extract_rm(&clip, &AnalysisConfig::default(), &grid).unwrap();
        assert_eq!(atoms.len(), 1);
        assert!(
            atoms[0].fm_rate_hz_s == 5e4 || atoms[0].fm_rate_hz_s == 1e5,
            "winning rate {}",
            atoms[0].fm_rate_hz_s
        );
    }

    #[test]
    fn silence_errors() {
        let clip = crate::ingest::AudioClip::new(vec![0.0; 48_000], 48_000, "quiet");
        assert!(matches!(
            extract_rm(&clip, &AnalysisConfig::default(), &ChirpGrid::default()),
            Err(ExtractError::NoVoicedFrames)
        ));
    }
}
