//! Matching pursuit over a dictionary of Hann-windowed chirp atoms.
//!
//! Dictionary: atom length = `frame_size`, time positions every half frame,
//! centre frequencies on the analysis bin grid restricted to the band,
//! chirp rates from the grid. Each iteration projects the residual onto the
//! best-correlating atom's two-dimensional phase space (cosine and sine
//! quadratures), subtracts it exactly, and emits it. Only the dictionary
//! entries whose support overlaps the subtracted atom are re-evaluated, so
//! iterations after the initial sweep are cheap.
//!
//! Stopping follows the segmentation budget: pursuit ends once the removed
//! energy reaches roughly the raw energy held by the top-energy frames, or
//! at ten times the selected-frame count, whichever comes first.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::sync::Arc;

use super::{Atom, ChirpGrid, ExtractError, Method};
use crate::ingest::AudioClip;
use crate::spectral::{hann, select_top_indices, stft, AnalysisConfig};

/// Iteration cap as a multiple of the selected-frame count.
const CAP_FACTOR: usize = 10;

/// Best in-band candidate for one (position, rate) dictionary slice.
#[derive(Debug, Clone, Copy)]
struct Entry {
    energy: f64,
    bin: usize,
    /// Projection energies one bin below/above, for frequency refinement.
    e_lo: f64,
    e_hi: f64,
}

struct Dictionary {
    frame_size: usize,
    hop: usize,
    band_lo: usize,
    band_hi: usize,
    /// Per rate: `w[i] * conj(q_r[i])` where `q_r` is the unit chirp.
    dechirp: Vec<Vec<Complex<f64>>>,
    /// Per rate: FFT of `w^2 * conj(q_r)^2` over all bins (Gram terms).
    gram: Vec<Vec<Complex<f64>>>,
    /// Sum of squared window samples.
    s0: f64,
    fft: Arc<dyn rustfft::Fft<f64>>,
}

impl Dictionary {
    fn new(cfg: &AnalysisConfig, grid: &ChirpGrid, sample_rate: u32) -> Dictionary {
        let n = cfg.frame_size;
        let fs = sample_rate as f64;
        let centre = n as f64 / 2.0;
        let window = hann(n);
        let s0: f64 = window.iter().map(|w| w * w).sum();
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(n);
        let mut dechirp = Vec::with_capacity(grid.rates().len());
        let mut gram = Vec::with_capacity(grid.rates().len());
        for &rate in grid.rates() {
            let mut wq = Vec::with_capacity(n);
            let mut wq2 = vec![Complex::new(0.0, 0.0); n];
            for i in 0..n {
                let tau = (i as f64 - centre) / fs;
                let phase = std::f64::consts::PI * rate * tau * tau;
                // conj(q_r) = e^{-j phase}
                let c = Complex::from_polar(1.0, -phase);
                wq.push(window[i] * c);
                wq2[i] = window[i] * window[i] * c * c;
            }
            fft.process(&mut wq2);
            dechirp.push(wq);
            gram.push(wq2);
        }
        let (band_lo, band_hi) = cfg.band_bins(n, sample_rate);
        Dictionary {
            frame_size: n,
            hop: n / 2,
            band_lo,
            band_hi,
            dechirp,
            gram,
            s0,
            fft,
        }
    }

    /// Quadrature Gram entries for (rate, bin).
    #[inline]
    fn gram_at(&self, rate_idx: usize, bin: usize) -> (f64, f64, f64) {
        let n = self.frame_size;
        let c = self.gram[rate_idx][(2 * bin) % n];
        let suu = (self.s0 + c.re) / 2.0;
        let svv = (self.s0 - c.re) / 2.0;
        let suv = -c.im / 2.0;
        (suu, svv, suv)
    }

    /// Projection energy of the residual segment onto the (rate, bin) atom
    /// with free phase, given the complex correlation `f`.
    #[inline]
    fn projection_energy(&self, rate_idx: usize, bin: usize, f: Complex<f64>) -> f64 {
        let (suu, svv, suv) = self.gram_at(rate_idx, bin);
        let det = suu * svv - suv * suv;
        if det <= 0.0 {
            return 0.0;
        }
        let (a, b) = (f.re, -f.im);
        ((svv * a * a - 2.0 * suv * a * b + suu * b * b) / det).max(0.0)
    }

    /// Evaluate the best in-band candidate of one (position, rate) slice
    /// against the residual. `scratch` must hold `frame_size` values.
    fn eval(
        &self,
        residual: &[f64],
        pos: usize,
        rate_idx: usize,
        scratch: &mut [Complex<f64>],
    ) -> Entry {
        let n = self.frame_size;
        let wq = &self.dechirp[rate_idx];
        for i in 0..n {
            scratch[i] = wq[i] * residual[pos + i];
        }
        self.fft.process(scratch);
        let lo = self.band_lo.saturating_sub(1).max(1);
        let hi = (self.band_hi + 1).min(n / 2);
        let mut energies = vec![0.0f64; hi - lo + 1];
        for (slot, k) in (lo..=hi).enumerate() {
            energies[slot] = self.projection_energy(rate_idx, k, scratch[k]);
        }
        let mut best_k = self.band_lo;
        let mut best_e = 0.0;
        for k in self.band_lo..=self.band_hi.min(hi) {
            let e = energies[k - lo];
            if e > best_e {
                best_e = e;
                best_k = k;
            }
        }
        let e_lo = if best_k > lo { energies[best_k - 1 - lo] } else { 0.0 };
        let e_hi = if best_k < hi { energies[best_k + 1 - lo] } else { 0.0 };
        Entry {
            energy: best_e,
            bin: best_k,
            e_lo,
            e_hi,
        }
    }

    /// Correlation of the residual segment with the (rate, bin) complex atom.
    fn correlate(
        &self,
        residual: &[f64],
        pos: usize,
        rate_idx: usize,
        bin: usize,
        scratch: &mut [Complex<f64>],
    ) -> Complex<f64> {
        let n = self.frame_size;
        let wq = &self.dechirp[rate_idx];
        for i in 0..n {
            scratch[i] = wq[i] * residual[pos + i];
        }
        self.fft.process(scratch);
        scratch[bin]
    }

    /// Subtract the phase-optimal atom at (pos, rate, bin) from the
    /// residual; returns the energy removed.
    fn subtract(
        &self,
        residual: &mut [f64],
        pos: usize,
        rate_idx: usize,
        bin: usize,
        f: Complex<f64>,
    ) -> f64 {
        let (suu, svv, suv) = self.gram_at(rate_idx, bin);
        let det = suu * svv - suv * suv;
        if det <= 0.0 {
            return 0.0;
        }
        let (a, b) = (f.re, -f.im);
        let alpha = (svv * a - suv * b) / det;
        let beta = (suu * b - suv * a) / det;
        let n = self.frame_size;
        let wq = &self.dechirp[rate_idx];
        for i in 0..n {
            // u + jv = w e^{j theta} = conj(wq)·e^{j 2 pi k i / n}
            let ang = 2.0 * std::f64::consts::PI * bin as f64 * i as f64 / n as f64;
            let carrier = wq[i].conj() * Complex::from_polar(1.0, ang);
            residual[pos + i] -= alpha * carrier.re + beta * carrier.im;
        }
        alpha * a + beta * b
    }
}

pub fn extract_mp(
    clip: &AudioClip,
    cfg: &AnalysisConfig,
    grid: &ChirpGrid,
) -> Result<Vec<Atom>, ExtractError> {
    let frames = stft(clip, cfg)?;
    let selected = select_top_indices(&frames, cfg);
    let n = cfg.frame_size;
    let window = hann(n);
    let mean_w2: f64 = window.iter().map(|w| w * w).sum::<f64>() / n as f64;
    // Raw-signal energy held by the selected frames. Frame energies are
    // windowed in-band sums over the half spectrum, so scale back by the
    // transform length and the window power.
    let target: f64 = selected
        .iter()
        .map(|&i| frames[i].energy * 2.0 / (n as f64 * mean_w2))
        .sum();
    if target <= 0.0 {
        return Err(ExtractError::NoVoicedFrames);
    }
    let cap = CAP_FACTOR * selected.len();

    let dict = Dictionary::new(cfg, grid, clip.sample_rate);
    let mut residual: Vec<f64> = clip.samples.iter().map(|&s| s as f64).collect();
    let positions: Vec<usize> = (0..)
        .map(|i| i * dict.hop)
        .take_while(|p| p + n <= residual.len())
        .collect();
    let rate_count = grid.rates().len();
    let mut scratch = vec![Complex::new(0.0, 0.0); n];
    let mut cache: Vec<Vec<Entry>> = positions
        .iter()
        .map(|&p| {
            (0..rate_count)
                .map(|r| dict.eval(&residual, p, r, &mut scratch))
                .collect()
        })
        .collect();

    let hz_per_bin = clip.sample_rate as f64 / n as f64;
    let mut atoms = Vec::new();
    let mut extracted = 0.0f64;
    while atoms.len() < cap && extracted < target {
        // Global argmax over the cache; strict improvement keeps the scan
        // order (position, then rate order with zero first) as tie-break.
        let mut best = (0usize, 0usize);
        let mut best_e = 0.0f64;
        for (pi, rates) in cache.iter().enumerate() {
            for (ri, entry) in rates.iter().enumerate() {
                if entry.energy > best_e {
                    best_e = entry.energy;
                    best = (pi, ri);
                }
            }
        }
        if best_e <= 0.0 {
            break;
        }
        let (pi, ri) = best;
        let pos = positions[pi];
        let entry = cache[pi][ri];
        let f = dict.correlate(&residual, pos, ri, entry.bin, &mut scratch);
        let removed = dict.subtract(&mut residual, pos, ri, entry.bin, f);
        extracted += removed;

        let mut freq = entry.bin as f64 * hz_per_bin;
        if cfg.peak_interpolation && entry.e_lo > 0.0 && entry.e_hi > 0.0 && entry.energy > 0.0 {
            let (l0, l1, l2) = (entry.e_lo.ln(), entry.energy.ln(), entry.e_hi.ln());
            let denom = l0 - 2.0 * l1 + l2;
            if denom.abs() > 1e-300 {
                let delta = (0.5 * (l0 - l2) / denom).clamp(-0.5, 0.5);
                freq = (entry.bin as f64 + delta) * hz_per_bin;
            }
        }
        atoms.push(Atom {
            time_s: (pos + n / 2) as f64 / clip.sample_rate as f64,
            frequency_hz: freq.clamp(cfg.band_low, cfg.band_high),
            fm_rate_hz_s: grid.rates()[ri],
            magnitude: removed.max(0.0).sqrt(),
            method: Method::Mp,
        });

        // Refresh every dictionary slice whose support overlaps the atom.
        for (qi, &q) in positions.iter().enumerate() {
            if q + n > pos && q < pos + n {
                for r in 0..rate_count {
                    cache[qi][r] = dict.eval(&residual, q, r, &mut scratch);
                }
            }
        }
    }
    Ok(atoms)
}
