//! The four FM extractors. Each maps a canonicalized clip to a list of
//! atoms carrying a frequency and an FM rate.

mod dd;
mod mp;
mod rm;
mod ss;

pub use dd::extract_dd;
pub use mp::extract_mp;
pub use rm::extract_rm;
pub use ss::extract_ss;

use crate::ingest::AudioClip;
use crate::spectral::{AnalysisConfig, SpectralError};

/// Analysis method identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// Simple spectrographic: first difference of per-frame peak frequency.
    Ss,
    /// Heterodyne (ring modulation) chirplet analysis.
    Rm,
    /// Matching pursuit over a chirp-atom dictionary.
    Mp,
    /// Distribution derivative method.
    Dd,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ss, Method::Rm, Method::Mp, Method::Dd];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Ss => "ss",
            Method::Rm => "rm",
            Method::Mp => "mp",
            Method::Dd => "dd",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s.trim() {
            "ss" => Some(Method::Ss),
            "rm" => Some(Method::Rm),
            "mp" => Some(Method::Mp),
            "dd" => Some(Method::Dd),
            _ => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One analysis result: a short signal component with frequency and FM rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    /// Centre time, seconds.
    pub time_s: f64,
    /// Centre frequency, Hz; always inside the analysis band.
    pub frequency_hz: f64,
    /// Signed FM rate, Hz/s. Summaries take the magnitude.
    pub fm_rate_hz_s: f64,
    /// Linear amplitude measure, >= 0.
    pub magnitude: f64,
    pub method: Method,
}

/// Candidate chirp rates for the `rm` and `mp` methods.
///
/// Rates are stored in scan order: zero first, then increasing magnitude
/// with the positive member of each pair before the negative. Correlation
/// argmax loops use strict improvement, so a stationary tone resolves to the
/// zero-rate candidate deterministically.
#[derive(Debug, Clone, PartialEq)]
pub struct ChirpGrid {
    rates: Vec<f64>,
}

impl ChirpGrid {
    /// Build from the positive half of the grid; zero and the mirrored
    /// negative rates are added automatically.
    pub fn from_positive(positive: &[f64]) -> ChirpGrid {
        let mut pos: Vec<f64> = positive.to_vec();
        pos.sort_by(|a, b| a.total_cmp(b));
        assert!(
            pos.iter().all(|&r| r > 0.0),
            "positive rates must be > 0"
        );
        let mut rates = Vec::with_capacity(pos.len() * 2 + 1);
        rates.push(0.0);
        for r in pos {
            rates.push(r);
            rates.push(-r);
        }
        ChirpGrid { rates }
    }

    /// Rates in scan order (zero first).
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Rates sorted ascending, for reporting.
    pub fn sorted_rates(&self) -> Vec<f64> {
        let mut r = self.rates.clone();
        r.sort_by(|a, b| a.total_cmp(b));
        r
    }

    /// Grid spacing around `rate`: the distance between the two grid points
    /// bracketing it (used by consistency tests).
    pub fn step_around(&self, rate: f64) -> f64 {
        let sorted = self.sorted_rates();
        for w in sorted.windows(2) {
            if rate >= w[0] && rate <= w[1] {
                return w[1] - w[0];
            }
        }
        f64::INFINITY
    }
}

impl Default for ChirpGrid {
    /// 33 rates spanning +-3.0e6 Hz/s: zero plus 16 geometrically spaced
    /// magnitudes per sign, from 1e3 to 3e6.
    fn default() -> Self {
        let lo: f64 = 1e3;
        let hi: f64 = 3e6;
        let n = 16;
        let positive: Vec<f64> = (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect();
        ChirpGrid::from_positive(&positive)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("no selected frame has in-band energy")]
    NoVoicedFrames,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Run one method over a canonicalized clip.
pub fn extract(
    clip: &AudioClip,
    cfg: &AnalysisConfig,
    grid: &ChirpGrid,
    method: Method,
) -> Result<Vec<Atom>, ExtractError> {
    match method {
        Method::Ss => extract_ss(clip, cfg),
        Method::Rm => extract_rm(clip, cfg, grid),
        Method::Mp => extract_mp(clip, cfg, grid),
        Method::Dd => extract_dd(clip, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_shape() {
        let grid = ChirpGrid::default();
        assert_eq!(grid.rates().len(), 33);
        assert_eq!(grid.rates()[0], 0.0);
        // Symmetric: every rate's negation is present.
        for &r in grid.rates() {
            assert!(grid.rates().iter().any(|&q| q == -r));
        }
        let sorted = grid.sorted_rates();
        assert_eq!(sorted[0], -3e6);
        assert_eq!(sorted[32], 3e6);
        // Geometric spacing: ratio of consecutive positive magnitudes
        // constant.
        let pos: Vec<f64> = sorted.iter().copied().filter(|&r| r > 0.0).collect();
        let ratio = pos[1] / pos[0];
        for w in pos.windows(2) {
            assert!((w[1] / w[0] - ratio).abs() < 1e-9);
        }
    }

    #[test]
    fn method_parse_roundtrip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.as_str()), Some(m));
        }
        assert_eq!(Method::parse("xx"), None);
    }

    #[test]
    fn grid_step_around() {
        let grid = ChirpGrid::from_positive(&[1e3, 2e3, 4e3]);
        assert_eq!(grid.step_around(1.5e3), 1e3);
        assert_eq!(grid.step_around(3e3), 2e3);
    }
}
