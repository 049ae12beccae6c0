//! Time series of weighted norms with fitted decay exponents.

use crate::cli::fit::{fit_decay, DecayFit};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L1,
    LInf,
}

impl NormKind {
    pub fn label(&self) -> &'static str {
        match self {
            NormKind::L1 => "L1",
            NormKind::LInf => "Linf",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormSeries {
    pub quantity: String,
    pub k: usize,
    pub kind: NormKind,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecayReport {
    pub series: Vec<NormSeries>,
    pub warnings: Vec<String>,
}

impl DecayReport {
    pub fn push(&mut self, quantity: &str, k: usize, kind: NormKind, t: f64, value: f64) {
        match self
            .series
            .iter_mut()
            .find(|s| s.quantity == quantity && s.k == k && s.kind == kind)
        {
            Some(s) => s.points.push((t, value)),
            None => self.series.push(NormSeries {
                quantity: quantity.to_string(),
                k,
                kind,
                points: vec![(t, value)],
            }),
        }
    }

    pub fn get(&self, quantity: &str, k: usize, kind: NormKind) -> Option<&NormSeries> {
        self.series
            .iter()
            .find(|s| s.quantity == quantity && s.k == k && s.kind == kind)
    }

    pub fn fit(&self, quantity: &str, k: usize, kind: NormKind, window: (f64, f64), log_correction: bool) -> Option<Result<DecayFit>> {
        self.get(quantity, k, kind)
            .map(|s| fit_decay(&s.points, window, log_correction))
    }
}
