//! Framing, windowing, short-time Fourier analysis, in-band peak detection
//! and top-energy frame segmentation shared by all extractors.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::ingest::AudioClip;

/// Which bins count toward a frame's segmentation energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyBand {
    /// Only bins inside `[band_low, band_high]` (default; keeps segmentation
    /// away from low-frequency rumble).
    InBand,
    /// Every bin of the half spectrum.
    FullBand,
}

/// Analysis configuration shared by the whole pipeline.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    /// Frame length in samples (10.7 ms at 48 kHz with the default 512).
    pub frame_size: usize,
    /// Hop between frame starts, in samples. Defaults to `frame_size`.
    pub hop_size: usize,
    /// Lower edge of the frequency region of interest, Hz.
    pub band_low: f64,
    /// Upper edge of the frequency region of interest, Hz.
    pub band_high: f64,
    /// Fraction of highest-energy frames kept by segmentation.
    pub energy_fraction: f64,
    /// Refine peak frequencies by log-magnitude parabolic interpolation.
    pub peak_interpolation: bool,
    /// Frames whose energies differ by less than this relative amount are
    /// treated as tied during segmentation and kept in temporal order.
    pub energy_tie_rel: f64,
    /// Peak jumps below this many Hz between successive frames are treated
    /// as estimator noise and contribute an FM rate of exactly zero.
    pub peak_jump_floor_hz: f64,
    /// Energy definition used for segmentation ranking.
    pub energy_band: EnergyBand,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            frame_size: 512,
            hop_size: 512,
            band_low: 2_000.0,
            band_high: 10_000.0,
            energy_fraction: 0.10,
            peak_interpolation: true,
            energy_tie_rel: 1e-6,
            peak_jump_floor_hz: 0.01,
            energy_band: EnergyBand::InBand,
        }
    }
}

impl AnalysisConfig {
    /// Check invariants against a clip's sample rate.
    pub fn validate(&self, sample_rate: u32) -> Result<(), SpectralError> {
        let nyquist = sample_rate as f64 / 2.0;
        if self.frame_size == 0 || self.hop_size == 0 || self.hop_size > self.frame_size {
            return Err(SpectralError::InvalidConfig(
                "need 0 < hop_size <= frame_size".into(),
            ));
        }
        if !(0.0 <= self.band_low && self.band_low < self.band_high && self.band_high <= nyquist) {
            return Err(SpectralError::InvalidConfig(format!(
                "need 0 <= band_low < band_high <= {nyquist}"
            )));
        }
        if !(self.energy_fraction > 0.0 && self.energy_fraction <= 1.0) {
            return Err(SpectralError::InvalidConfig(
                "need 0 < energy_fraction <= 1".into(),
            ));
        }
        Ok(())
    }

    /// Inclusive bin range whose centre frequencies fall inside the band,
    /// for an `fft_len`-point transform at `sample_rate`.
    pub fn band_bins(&self, fft_len: usize, sample_rate: u32) -> (usize, usize) {
        let hz_per_bin = sample_rate as f64 / fft_len as f64;
        let lo = (self.band_low / hz_per_bin).ceil() as usize;
        let hi = (self.band_high / hz_per_bin).floor() as usize;
        (lo.max(1), hi.min(fft_len / 2))
    }

    pub fn hop_duration_s(&self, sample_rate: u32) -> f64 {
        self.hop_size as f64 / sample_rate as f64
    }
}

/// One analysed frame: the half spectrum plus its segmentation energy.
#[derive(Debug, Clone)]
pub struct FrameSpectrum {
    pub frame_index: usize,
    /// Time of the first sample of the frame, seconds.
    pub start_time: f64,
    /// Complex coefficients for bins `0..=frame_size/2`.
    pub bins: Vec<Complex<f64>>,
    /// Sum of squared magnitudes over the configured energy band.
    pub energy: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum SpectralError {
    #[error("clip shorter than one frame")]
    ClipTooShort,
    #[error("frame has no in-band energy")]
    NoInBandEnergy,
    #[error("invalid analysis config: {0}")]
    InvalidConfig(String),
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Windowed short-time Fourier transform.
///
/// Produces `floor((len - frame_size)/hop) + 1` frames; any trailing partial
/// frame is dropped.
pub fn stft(clip: &AudioClip, cfg: &AnalysisConfig) -> Result<Vec<FrameSpectrum>, SpectralError> {
    cfg.validate(clip.sample_rate)?;
    let n = cfg.frame_size;
    if clip.samples.len() < n {
        return Err(SpectralError::ClipTooShort);
    }
    let window = hann(n);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let (band_lo, band_hi) = cfg.band_bins(n, clip.sample_rate);
    let frame_count = (clip.samples.len() - n) / cfg.hop_size + 1;
    let mut frames = Vec::with_capacity(frame_count);
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for index in 0..frame_count {
        let start = index * cfg.hop_size;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(clip.samples[start + i] as f64 * window[i], 0.0);
        }
        fft.process(&mut buf);
        let bins: Vec<Complex<f64>> = buf[..=n / 2].to_vec();
        let energy = match cfg.energy_band {
            EnergyBand::InBand => bins[band_lo..=band_hi]
                .iter()
                .map(|c| c.norm_sqr())
                .sum(),
            EnergyBand::FullBand => bins.iter().map(|c| c.norm_sqr()).sum(),
        };
        frames.push(FrameSpectrum {
            frame_index: index,
            start_time: start as f64 / clip.sample_rate as f64,
            bins,
            energy,
        });
    }
    Ok(frames)
}

/// Indices of the `ceil(energy_fraction * n)` highest-energy frames, in
/// temporal order.
///
/// Frames whose energies agree within `energy_tie_rel` are tied; ties are
/// broken toward the earlier frame, so a uniform signal keeps its leading
/// frames as one consecutive run.
pub fn select_top_indices(frames: &[FrameSpectrum], cfg: &AnalysisConfig) -> Vec<usize> {
    if frames.is_empty() {
        return Vec::new();
    }
    let keep = (cfg.energy_fraction * frames.len() as f64).ceil() as usize;
    let keep = keep.clamp(1, frames.len());
    let mut order: Vec<usize> = (0..frames.len()).collect();
    order.sort_by(|&a, &b| {
        frames[b]
            .energy
            .partial_cmp(&frames[a].energy)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    // Regroup near-equal energies so the tie rule sees float fuzz as equal.
    let mut ranked = Vec::with_capacity(frames.len());
    let mut i = 0;
    while i < order.len() {
        let lead = frames[order[i]].energy;
        let floor = lead - lead.abs() * cfg.energy_tie_rel;
        let mut j = i;
        while j < order.len() && frames[order[j]].energy >= floor {
            j += 1;
        }
        let mut group = order[i..j].to_vec();
        group.sort_unstable();
        ranked.extend(group);
        i = j;
    }
    ranked.truncate(keep);
    ranked.sort_unstable();
    ranked
}

/// Owned variant of [`select_top_indices`] returning the frames themselves.
pub fn select_top_frames(frames: &[FrameSpectrum], cfg: &AnalysisConfig) -> Vec<FrameSpectrum> {
    select_top_indices(frames, cfg)
        .into_iter()
        .map(|i| frames[i].clone())
        .collect()
}

/// An in-band spectral peak.
#[derive(Debug, Clone, Copy)]
pub struct Peak {
    pub frequency_hz: f64,
    pub magnitude: f64,
    pub bin: usize,
}

/// Frequency of the maximum-magnitude in-band bin, refined by parabolic
/// interpolation of the log magnitudes when enabled. The result is clamped
/// to the analysis band.
pub fn peak_frequency(
    frame: &FrameSpectrum,
    cfg: &AnalysisConfig,
    sample_rate: u32,
) -> Result<Peak, SpectralError> {
    let fft_len = (frame.bins.len() - 1) * 2;
    let (lo, hi) = cfg.band_bins(fft_len, sample_rate);
    peak_in_magnitudes(
        &frame.bins.iter().map(|c| c.norm()).collect::<Vec<_>>(),
        lo,
        hi,
        fft_len,
        sample_rate,
        cfg,
    )
}

/// Shared peak picker over precomputed magnitudes (also used by the
/// heterodyne and matching-pursuit extractors on their own spectra).
pub(crate) fn peak_in_magnitudes(
    mags: &[f64],
    band_lo: usize,
    band_hi: usize,
    fft_len: usize,
    sample_rate: u32,
    cfg: &AnalysisConfig,
) -> Result<Peak, SpectralError> {
    let hi = band_hi.min(mags.len() - 1);
    let mut best = band_lo;
    let mut best_mag = 0.0;
    for (k, &m) in mags.iter().enumerate().take(hi + 1).skip(band_lo) {
        if m > best_mag {
            best_mag = m;
            best = k;
        }
    }
    if best_mag <= 0.0 {
        return Err(SpectralError::NoInBandEnergy);
    }
    let hz_per_bin = sample_rate as f64 / fft_len as f64;
    let mut freq = best as f64 * hz_per_bin;
    if cfg.peak_interpolation && best > 0 && best + 1 < mags.len() {
        let (m_lo, m_hi) = (mags[best - 1], mags[best + 1]);
        if m_lo > 0.0 && m_hi > 0.0 {
            let (l0, l1, l2) = (m_lo.ln(), best_mag.ln(), m_hi.ln());
            let denom = l0 - 2.0 * l1 + l2;
            if denom.abs() > 1e-300 {
                let delta = (0.5 * (l0 - l2) / denom).clamp(-0.5, 0.5);
                freq = (best as f64 + delta) * hz_per_bin;
            }
        }
    }
    Ok(Peak {
        frequency_hz: freq.clamp(cfg.band_low, cfg.band_high),
        magnitude: best_mag,
        bin: best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn clip_of(samples: Vec<f32>) -> AudioClip {
        AudioClip::new(samples, 48_000, "test")
    }

    #[test]
    fn frame_count_formula() {
        let clip = clip_of(vec![0.0; 48_000]);
        let frames = stft(&clip, &AnalysisConfig::default()).unwrap();
        assert_eq!(frames.len(), 93);
    }

    #[test]
    fn short_clip_errors() {
        let clip = clip_of(vec![0.0; 100]);
        assert!(matches!(
            stft(&clip, &AnalysisConfig::default()),
            Err(SpectralError::ClipTooShort)
        ));
    }

    #[test]
    fn zero_clip_zero_energy() {
        let clip = clip_of(vec![0.0; 4096]);
        let frames = stft(&clip, &AnalysisConfig::default()).unwrap();
        assert!(frames.iter().all(|f| f.energy == 0.0));
    }

    #[test]
    fn four_khz_sine_peaks_at_bin_43() {
        // Oracle: direct DFT of the windowed sine at the candidate bins.
        let clip = synth::tone(4_000.0, 1.0, 48_000, 1.0, 0.0, "t");
        let cfg = AnalysisConfig::default();
        let frames = stft(&clip, &cfg).unwrap();
        let window = hann(512);
        for frame in frames.iter().step_by(7) {
            let start = frame.frame_index * 512;
            let mags: Vec<f64> = frame.bins.iter().map(|c| c.norm()).collect();
            let best = (22..=106).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).unwrap();
            assert_eq!(best, 43);
            // Direct DFT at bin 43 must match the FFT output.
            let mut acc = Complex::new(0.0, 0.0);
            for i in 0..512 {
                let x = clip.samples[start + i] as f64 * window[i];
                let ang = -2.0 * std::f64::consts::PI * 43.0 * i as f64 / 512.0;
                acc += Complex::new(x * ang.cos(), x * ang.sin());
            }
            assert!((acc.norm() - mags[43]).abs() / acc.norm() < 1e-9);
        }
    }

    #[test]
    fn parseval_identity() {
        let clip = synth::tone(3_333.0, 0.1, 48_000, 0.7, 0.4, "p");
        let cfg = AnalysisConfig::default();
        let frames = stft(&clip, &cfg).unwrap();
        let window = hann(512);
        let frame = &frames[1];
        let start = frame.frame_index * 512;
        let time_energy: f64 = (0..512)
            .map(|i| (clip.samples[start + i] as f64 * window[i]).powi(2))
            .sum();
        // Real input: bins 1..N/2-1 appear twice in the full spectrum.
        let mut spec_energy = frame.bins[0].norm_sqr() + frame.bins[256].norm_sqr();
        for b in &frame.bins[1..256] {
            spec_energy += 2.0 * b.norm_sqr();
        }
        spec_energy /= 512.0;
        assert!((time_energy - spec_energy).abs() / time_energy < 1e-6);
    }

    #[test]
    fn select_top_picks_distinct_energies() {
        let clip = clip_of(vec![0.0; 512 * 100]);
        let cfg = AnalysisConfig::default();
        let mut frames = stft(&clip, &cfg).unwrap();
        for (i, f) in frames.iter_mut().enumerate() {
            f.energy = ((i * 37) % 100) as f64 + 1.0;
        }
        let selected = select_top_indices(&frames, &cfg);
        assert_eq!(selected.len(), 10);
        // Oracle: brute sort by energy.
        let mut by_energy: Vec<usize> = (0..100).collect();
        by_energy.sort_by(|&a, &b| frames[b].energy.total_cmp(&frames[a].energy));
        let mut expect: Vec<usize> = by_energy[..10].to_vec();
        expect.sort_unstable();
        assert_eq!(selected, expect);
        // No equal-size subset can beat the selected energy sum.
        let sum: f64 = selected.iter().map(|&i| frames[i].energy).sum();
        let other: f64 = (0..10).map(|i| frames[i].energy).sum();
        assert!(sum >= other);
    }

    #[test]
    fn select_top_ceil_keeps_at_least_one() {
        let clip = clip_of(vec![0.1; 512 * 5]);
        let cfg = AnalysisConfig::default();
        let frames = stft(&clip, &cfg).unwrap();
        assert_eq!(select_top_indices(&frames, &cfg).len(), 1);
    }

    #[test]
    fn select_top_tie_prefers_earlier() {
        let clip = clip_of(vec![0.0; 512 * 10]);
        let cfg = AnalysisConfig::default();
        let mut frames = stft(&clip, &cfg).unwrap();
        // Frames 3 and 7 tie exactly at the cut boundary.
        let energies = [9.0, 8.0, 7.0, 5.0, 1.0, 1.0, 1.0, 5.0, 1.0, 1.0];
        for (f, &e) in frames.iter_mut().zip(energies.iter()) {
            f.energy = e;
        }
        let mut cfg = cfg;
        cfg.energy_fraction = 0.4; // keep 4 of 10
        let selected = select_top_indices(&frames, &cfg);
        assert_eq!(selected, vec![0, 1, 2, 3]);
    }

    #[test]
    fn select_top_near_ties_keep_temporal_run() {
        let clip = clip_of(vec![0.0; 512 * 30]);
        let cfg = AnalysisConfig::default();
        let mut frames = stft(&clip, &cfg).unwrap();
        for (i, f) in frames.iter_mut().enumerate() {
            // Energies equal up to float fuzz well inside the tie threshold.
            f.energy = 1.0 + 1e-9 * ((i * 13 % 7) as f64);
        }
        let selected = select_top_indices(&frames, &cfg);
        assert_eq!(selected, vec![0, 1, 2]);
    }

    #[test]
    fn peak_on_grid_is_exact() {
        let clip = synth::tone(3_000.0, 0.1, 48_000, 1.0, 0.0, "g");
        let cfg = AnalysisConfig::default();
        let frames = stft(&clip, &cfg).unwrap();
        let p = peak_frequency(&frames[0], &cfg, 48_000).unwrap();
        assert_eq!(p.bin, 32);
        assert!((p.frequency_hz - 3_000.0).abs() < 1e-6);
    }

    #[test]
    fn peak_half_bin_offset_within_5_hz() {
        let clip = synth::tone(3_046.9, 0.2, 48_000, 1.0, 0.1, "h");
        let cfg = AnalysisConfig::default();
        let frames = stft(&clip, &cfg).unwrap();
        for frame in &frames {
            let p = peak_frequency(frame, &cfg, 48_000).unwrap();
            assert!(
                (p.frequency_hz - 3_046.9).abs() < 5.0,
                "estimate {}",
                p.frequency_hz
            );
        }
    }

    #[test]
    fn peak_accuracy_across_band() {
        let cfg = AnalysisConfig::default();
        for &f in &[2_200.0, 3_700.0, 5_431.0, 8_000.0, 9_800.0] {
            let clip = synth::tone(f, 0.1, 48_000, 0.8, 0.9, "b");
            let frames = stft(&clip, &cfg).unwrap();
            let p = peak_frequency(&frames[2], &cfg, 48_000).unwrap();
            assert!((p.frequency_hz - f).abs() < 5.0, "{f} -> {}", p.frequency_hz);
            // Raw bin is within half a bin width.
            let raw = p.bin as f64 * 93.75;
            assert!((raw - f).abs() <= 46.875 + 1e-9);
        }
    }

    #[test]
    fn silent_frame_has_no_peak() {
        let clip = clip_of(vec![0.0; 1024]);
        let cfg = AnalysisConfig::default();
        let frames = stft(&clip, &cfg).unwrap();
        assert!(matches!(
            peak_frequency(&frames[0], &cfg, 48_000),
            Err(SpectralError::NoInBandEnergy)
        ));
    }

    #[test]
    fn out_of_band_tone_ignored_by_inband_energy() {
        // 500 Hz rumble has zero in-band energy ranking weight.
        let clip = synth::tone(500.0, 0.1, 48_000, 1.0, 0.0, "r");
        let cfg = AnalysisConfig::default();
        let frames = stft(&clip, &cfg).unwrap();
        let max_energy = frames.iter().map(|f| f.energy).fold(0.0, f64::max);
        let full = AnalysisConfig {
            energy_band: EnergyBand::FullBand,
            ..AnalysisConfig::default()
        };
        let full_frames = stft(&clip, &full).unwrap();
        let full_max = full_frames.iter().map(|f| f.energy).fold(0.0, f64::max);
        assert!(max_energy < 1e-3 * full_max);
    }
}
