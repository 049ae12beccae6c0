//! Power-law fits of decay series.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub window: (f64, f64),
    /// Fitted exponent `p` in `value ≈ c·t^p` (times `log(2+t)` if corrected).
    pub exponent: f64,
    pub amplitude: f64,
    pub log_correction: bool,
    pub residual_rms: f64,
    pub points: usize,
}

/// Least squares of `log(value)` (or `log(value / log(2+t))`) against
/// `log t` over the samples with `t` in `window`.
pub fn fit_decay(series: &[(f64, f64)], window: (f64, f64), log_correction: bool) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo > 0.0) || !(hi > lo) {
        return Err(Error::param("window", format!("need 0 < t_min < t_max, got [{lo}, {hi}]")));
    }
    let inside: Vec<(f64, f64)> = series.iter().copied().filter(|&(t, _)| t >= lo && t <= hi).collect();
    if inside.len() < 5 {
        return Err(Error::param(
            "series",
            format!("need at least 5 points in the window, got {}", inside.len()),
        ));
    }
    if let Some(&(t, v)) = inside.iter().find(|&&(_, v)| !(v > 0.0)) {
        return Err(Error::Domain(format!("non-positive value {v} at t = {t}")));
    }
    let pts: Vec<(f64, f64)> = inside
        .iter()
        .map(|&(t, v)| {
            let y = if log_correction { v / (2.0 + t).ln() } else { v };
            (t.ln(), y.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::param("series", "all times in the window coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(DecayFit {
        window,
        exponent: slope,
        amplitude: intercept.exp(),
        log_correction,
        residual_rms: (rss / n).sqrt(),
        points: pts.len(),
    })
}

/// Default window `[max(2, T/10), 0.9·T]`.
pub fn default_window(horizon: f64) -> (f64, f64) {
    ((horizon / 10.0).max(2.0), 0.9 * horizon)
}

/// `count` log-spaced times in `[lo, hi]`.
pub fn log_times(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        log_times(1.0, 100.0, 30).into_iter().map(|t| (t, f(t))).collect()
    }

    #[test]
    fn exact_power_law() {
        let fit = fit_decay(&series(|t| t.powi(-3)), (2.0, 90.0), false).unwrap();
        assert!((fit.exponent + 3.0).abs() < 1e-10);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn log_corrected_series() {
        let s = series(|t| t.powi(-3) * (2.0 + t).ln());
        let on = fit_decay(&s, (2.0, 90.0), true).unwrap();
        let off = fit_decay(&s, (2.0, 90.0), false).unwrap();
        assert!((on.exponent + 3.0).abs() < 0.02);
        assert!(off.exponent > -3.0 || off.exponent < -3.0);
        assert!(off.residual_rms > on.residual_rms);
        assert!((off.exponent + 3.0).abs() > 0.1);
    }

    #[test]
    fn rejects_non_positive_values_and_short_windows() {
        let mut s = series(|t| 1.0 / t);
        s[10].1 = 0.0;
        assert!(matches!(fit_decay(&s, (1.0, 100.0), false), Err(Error::Domain(_))));
        assert!(matches!(fit_decay(&s, (50.0, 51.0), false), Err(Error::Parameter { .. })));
    }

    #[test]
    fn default_window_rule() {
        assert_eq!(default_window(60.0), (6.0, 54.0));
        assert_eq!(default_window(10.0), (2.0, 9.0));
    }

    proptest! {
        #[test]
        fn recovers_exponent_to_three_decimals(p in -6.0f64..0.0, c in 0.1f64..10.0, start in 1.0f64..5.0) {
            let s: Vec<(f64, f64)> = log_times(start, 10.0 * start, 10).into_iter().map(|t| (t, c * t.powf(p))).collect();
            let fit = fit_decay(&s, (start, 10.0 * start), false).unwrap();
            prop_assert!((fit.exponent - p).abs() < 5e-4);
        }
    }
}
