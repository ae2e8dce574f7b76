//! Finite-ladder stand-ins for limits.
//!
//! A finite ladder can only certify a trend, never a limit. The rules look
//! at the last `window` values: a sequence *diverges* when that window is
//! strictly monotone and its magnitude grows by `growth`; it *vanishes* when
//! a positive window is strictly decreasing and shrinks by `growth`; it
//! *stabilizes* when the window's relative spread is below `spread`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendConfig {
    pub window: usize,
    pub growth: f64,
    pub spread: f64,
}

impl Default for TrendConfig {
    fn default() -> Self {
        TrendConfig { window: 4, growth: 10.0, spread: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "trend", content = "value", rename_all = "snake_case")]
pub enum Trend {
    DivergesUp,
    DivergesDown,
    Vanishes,
    Stabilizes(f64),
    /// Strictly increasing without meeting the divergence factor.
    Increasing,
    /// Strictly decreasing without meeting the vanishing/divergence factor.
    Decreasing,
    Inconclusive,
}

fn strictly_increasing(w: &[f64]) -> bool {
    w.windows(2).all(|p| p[1] > p[0])
}

fn strictly_decreasing(w: &[f64]) -> bool {
    w.windows(2).all(|p| p[1] < p[0])
}

pub fn classify(values: &[f64], cfg: &TrendConfig) -> Trend {
    if values.len() < cfg.window || cfg.window < 2 {
        return Trend::Inconclusive;
    }
    let w = &values[values.len() - cfg.window..];
    if w.iter().any(|v| !v.is_finite()) {
        return Trend::Inconclusive;
    }
    let (first, last) = (w[0], w[w.len() - 1]);
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    if max == min || (mean != 0.0 && (max - min) / mean.abs() < cfg.spread) {
        return Trend::Stabilizes(last);
    }
    if strictly_increasing(w) {
        if first > 0.0 && last > cfg.growth * first {
            return Trend::DivergesUp;
        }
        return Trend::Increasing;
    }
    if strictly_decreasing(w) {
        if first > 0.0 && last < first / cfg.growth {
            return Trend::Vanishes;
        }
        if first < 0.0 && -last > cfg.growth * -first {
            return Trend::DivergesDown;
        }
        return Trend::Decreasing;
    }
    Trend::Inconclusive
}

/// `|x_k - target|` is non-increasing along the sequence.
pub fn approaches(values: &[f64], target: f64) -> bool {
    values.windows(2).all(|p| (p[1] - target).abs() <= (p[0] - target).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules() {
        let cfg = TrendConfig::default();
        assert_eq!(classify(&[1.0, 5.0, 20.0, 200.0], &cfg), Trend::DivergesUp);
        assert_eq!(classify(&[1.0, 2.0, 3.0, 4.0], &cfg), Trend::Increasing);
        assert_eq!(classify(&[-1.0, -5.0, -20.0, -200.0], &cfg), Trend::DivergesDown);
        assert_eq!(classify(&[1.0, 0.5, 0.2, 0.01], &cfg), Trend::Vanishes);
        assert_eq!(classify(&[2.0, 2.01, 2.02, 2.0], &cfg), Trend::Stabilizes(2.0));
        assert_eq!(classify(&[1.0, 3.0, 2.0, 4.0], &cfg), Trend::Inconclusive);
        assert_eq!(classify(&[1.0, 2.0], &cfg), Trend::Inconclusive);
        // only the last window counts
        assert_eq!(classify(&[100.0, 1.0, 5.0, 20.0, 200.0], &cfg), Trend::DivergesUp);
    }

    #[test]
    fn approach() {
        assert!(approaches(&[0.5, 0.8, 0.9, 0.95], 1.0));
        assert!(!approaches(&[0.5, 0.8, 1.3], 1.0));
    }
}
