//! Simple spectrographic method: the FM rate is the frequency jump of the
//! in-band spectrogram peak between successive frames.

use super::{Atom, ExtractError, Method};
use crate::ingest::AudioClip;
use crate::spectral::{peak_frequency, select_top_indices, stft, AnalysisConfig, Peak};

/// Extract atoms from adjacent pairs of selected top-energy frames.
///
/// Only pairs adjacent in the original frame sequence where both members
/// survive segmentation contribute; a pair spanning an unselected frame
/// would manufacture a jump across silence and is dropped. Jumps smaller
/// than `cfg.peak_jump_floor_hz` are below the peak estimator's resolution
/// and count as zero FM.
pub fn extract_ss(clip: &AudioClip, cfg: &AnalysisConfig) -> Result<Vec<Atom>, ExtractError> {
    let frames = stft(clip, cfg)?;
    let selected = select_top_indices(&frames, cfg);
    let mut peaks: Vec<Option<Peak>> = vec![None; frames.len()];
    let mut any_voiced = false;
    for &i in &selected {
        if let Ok(p) = peak_frequency(&frames[i], cfg, clip.sample_rate) {
            peaks[i] = Some(p);
            any_voiced = true;
        }
    }
    if !any_voiced {
        return Err(ExtractError::NoVoicedFrames);
    }
    let hop_dt = cfg.hop_duration_s(clip.sample_rate);
    let half_frame = cfg.frame_size as f64 / 2.0 / clip.sample_rate as f64;
    let mut atoms = Vec::new();
    for w in selected.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b != a + 1 {
            continue;
        }
        let (Some(pa), Some(pb)) = (&peaks[a], &peaks[b]) else {
            continue;
        };
        let jump = pb.frequency_hz - pa.frequency_hz;
        let fm = if jump.abs() < cfg.peak_jump_floor_hz {
            0.0
        } else {
            jump / hop_dt
        };
        atoms.push(Atom {
            time_s: frames[b].start_time + half_frame,
            frequency_hz: pb.frequency_hz,
            fm_rate_hz_s: fm,
            magnitude: pb.magnitude,
            method: Method::Ss,
        });
    }
    Ok(atoms)
}
