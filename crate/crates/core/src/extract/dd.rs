//! Distribution derivative method: models each frame's dominant component
//! as `exp(a0 + a1 t + a2 t^2)` with complex coefficients and recovers
//! `a1`, `a2` from inner products with test atoms and their derivatives.
//!
//! Three transforms are taken per frame — with the analysis window, with its
//! time derivative and with the time-weighted window — at twice-oversampled
//! resolution, mirroring the batch spectrogram structure of reference DDM
//! implementations. The estimate uses the test atoms at the peak bin and the
//! stronger of its two one-bin neighbours.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{Atom, ExtractError, Method};
use crate::ingest::AudioClip;
use crate::spectral::{hann, select_top_indices, stft, AnalysisConfig};

/// Oversampling factor of the estimation transforms.
const PAD: usize = 2;

/// Condition-number gate above which a frame's solve is discarded.
const MAX_CONDITION: f64 = 1e8;

/// 2-norm condition number of a complex 2x2 matrix.
fn condition_2x2(a: [[Complex<f64>; 2]; 2]) -> f64 {
    // Gram matrix of A; its eigenvalues are the squared singular values.
    let g11 = a[0][0].norm_sqr() + a[1][0].norm_sqr();
    let g22 = a[0][1].norm_sqr() + a[1][1].norm_sqr();
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let trace = g11 + g22;
    let disc = (trace * trace - 4.0 * det.norm_sqr()).max(0.0).sqrt();
    let smax = ((trace + disc) / 2.0).sqrt();
    let smin = ((trace - disc) / 2.0).max(0.0).sqrt();
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

pub fn extract_dd(clip: &AudioClip, cfg: &AnalysisConfig) -> Result<Vec<Atom>, ExtractError> {
    let frames = stft(clip, cfg)?;
    let selected: std::collections::BTreeSet<usize> =
        select_top_indices(&frames, cfg).into_iter().collect();
    let n = cfg.frame_size;
    let m = n * PAD;
    let fs = clip.sample_rate as f64;
    let centre = n as f64 / 2.0;

    let window = hann(n);
    // Analytic time derivative of the periodic Hann window, in 1/s.
    let dwindow: Vec<f64> = (0..n)
        .map(|i| {
            (std::f64::consts::PI * fs / n as f64)
                * (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin()
        })
        .collect();
    // Frame-centred time-weighted window, in seconds.
    let twindow: Vec<f64> = (0..n)
        .map(|i| (i as f64 - centre) / fs * window[i])
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    let (band_lo, band_hi) = cfg.band_bins(m, clip.sample_rate);
    let half_frame = n as f64 / 2.0 / fs;

    let mut xw = vec![Complex::new(0.0, 0.0); m];
    let mut xdw = vec![Complex::new(0.0, 0.0); m];
    let mut xtw = vec![Complex::new(0.0, 0.0); m];
    let mut atoms = Vec::new();
    let mut any_voiced = false;
    for frame in &frames {
        let start = frame.frame_index * cfg.hop_size;
        xw.fill(Complex::new(0.0, 0.0));
        xdw.fill(Complex::new(0.0, 0.0));
        xtw.fill(Complex::new(0.0, 0.0));
        for i in 0..n {
            let x = clip.samples[start + i] as f64;
            xw[i].re = x * window[i];
            xdw[i].re = x * dwindow[i];
            xtw[i].re = x * twindow[i];
        }
        fft.process(&mut xw);
        fft.process(&mut xdw);
        fft.process(&mut xtw);

        let mut best = band_lo;
        let mut best_mag = 0.0;
        for k in band_lo..=band_hi {
            let mag = xw[k].norm();
            if mag > best_mag {
                best_mag = mag;
                best = k;
            }
        }
        if best_mag <= 0.0 {
            continue;
        }
        if selected.contains(&frame.frame_index) {
            any_voiced = true;
        }
        // Neighbour test atom one original bin away, on the stronger side.
        let up = (best + PAD).min(m / 2);
        let down = best.saturating_sub(PAD).max(1);
        let neighbour = if xw[up].norm() >= xw[down].norm() { up } else { down };
        if neighbour == best {
            continue;
        }
        let mut a = [[Complex::new(0.0, 0.0); 2]; 2];
        let mut b = [Complex::new(0.0, 0.0); 2];
        for (row, &k) in [best, neighbour].iter().enumerate() {
            let omega = 2.0 * std::f64::consts::PI * k as f64 * fs / m as f64;
            a[row][0] = xw[k];
            a[row][1] = 2.0 * xtw[k];
            b[row] = Complex::new(0.0, omega) * xw[k] - xdw[k];
        }
        if condition_2x2(a) > MAX_CONDITION {
            continue;
        }
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let a1 = (b[0] * a[1][1] - b[1] * a[0][1]) / det;
        let a2 = (a[0][0] * b[1] - a[1][0] * b[0]) / det;
        let freq = a1.im / (2.0 * std::f64::consts::PI);
        let rate = a2.im / std::f64::consts::PI;
        if !freq.is_finite() || !rate.is_finite() {
            continue;
        }
        if selected.contains(&frame.frame_index) {
            atoms.push(Atom {
                time_s: frame.start_time + half_frame,
                frequency_hz: freq.clamp(cfg.band_low, cfg.band_high),
                fm_rate_hz_s: rate,
                magnitude: best_mag,
                method: Method::Dd,
            });
        }
    }
    if !any_voiced {
        return Err(ExtractError::NoVoicedFrames);
    }
    Ok(atoms)
}
