//! Physical-space Green kernel `G(t, x)` and the norms of its derivatives.

use super::ResolventTable;
use crate::error::{Error, Result};
use crate::numerics::fft::CubeFft;
use crate::numerics::multi_indices;
use crate::numerics::radial::RadialGrid;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Relative spectral amplitude on the cube faces that triggers a warning.
const ALIASING_LEVEL: f64 = 1e-6;

/// Side of the periodic box as a function of time. `G(t, ·)` spreads
/// ballistically, so a fixed box eventually wraps it around.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoxRule {
    Fixed(f64),
    /// `max(min_side, per_time · t)`
    Adaptive { min_side: f64, per_time: f64 },
}

impl BoxRule {
    pub fn side(&self, t: f64) -> f64 {
        match *self {
            BoxRule::Fixed(side) => side,
            BoxRule::Adaptive { min_side, per_time } => min_side.max(per_time * t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenOptions {
    pub points: usize,
    pub box_rule: BoxRule,
    pub k_max: usize,
}

impl Default for GreenOptions {
    fn default() -> Self {
        Self {
            points: 64,
            box_rule: BoxRule::Adaptive {
                min_side: 40.0,
                per_time: 12.0,
            },
            k_max: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenNorm {
    pub t: f64,
    pub k: usize,
    pub l1: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GreenAssembly {
    pub norms: Vec<GreenNorm>,
    pub warnings: Vec<String>,
}

impl GreenAssembly {
    /// `(t, value)` series of one norm kind for derivative order `k`.
    pub fn series(&self, k: usize, linf: bool) -> Vec<(f64, f64)> {
        self.norms
            .iter()
            .filter(|n| n.k == k)
            .map(|n| (n.t, if linf { n.linf } else { n.l1 }))
            .collect()
    }
}

fn signed_index(j: usize, n: usize) -> f64 {
    if j <= n / 2 {
        j as f64
    } else {
        j as f64 - n as f64
    }
}

/// Inverse transform of `(iξ)^α Ĝ(t, ξ)` on a Cartesian grid for each
/// requested time; norms are grid sums.
pub fn assemble_physical_green(res: &ResolventTable, times: &[f64], opts: &GreenOptions) -> Result<GreenAssembly> {
    let d = res.equilibrium().dim();
    if d > 3 {
        return Err(Error::Dimension(d));
    }
    if opts.points < 8 || opts.points % 2 != 0 {
        return Err(Error::param("points", "grid size must be even and at least 8"));
    }
    let indices = times
        .iter()
        .map(|&t| {
            res.time()
                .index_of(t)
                .ok_or_else(|| Error::param("times", format!("t = {t} is not on the resolvent time grid")))
        })
        .collect::<Result<Vec<_>>>()?;
    let fft = CubeFft::new(d, opts.points);
    let per_time = indices
        .par_iter()
        .map(|&idx| slice_norms(res, idx, opts, &fft))
        .collect::<Result<Vec<_>>>()?;
    let mut out = GreenAssembly::default();
    for (norms, warnings) in per_time {
        out.norms.extend(norms);
        out.warnings.extend(warnings);
    }
    Ok(out)
}

fn slice_norms(res: &ResolventTable, idx: usize, opts: &GreenOptions, fft: &CubeFft) -> Result<(Vec<GreenNorm>, Vec<String>)> {
    let d = res.equilibrium().dim();
    let n = opts.points;
    let t = res.time().time(idx);
    let side = opts.box_rule.side(t);
    let dx = side / n as f64;
    let dk = 2.0 * PI / side;
    let total = fft.len();
    let profile = res.radial_profile(idx)?;

    let coords = |p: usize| -> [usize; 3] {
        let mut c = [0; 3];
        let mut rest = p;
        for axis in (0..d).rev() {
            c[axis] = rest % n;
            rest /= n;
        }
        c
    };
    let mut spectrum = vec![0.0; total];
    let mut peak = 0.0f64;
    let mut face = 0.0f64;
    let mut beyond_table = false;
    for (p, slot) in spectrum.iter_mut().enumerate() {
        let c = coords(p);
        let r = (0..d).map(|a| (signed_index(c[a], n) * dk).powi(2)).sum::<f64>().sqrt();
        let v = profile.eval(r);
        *slot = v;
        peak = peak.max(v.abs());
        if (0..d).any(|a| c[a] == n / 2) {
            face = face.max(v.abs());
        }
        if r > profile.r_max() {
            beyond_table = true;
        }
    }
    let mut warnings = Vec::new();
    if peak > 0.0 && face > ALIASING_LEVEL * peak {
        warnings.push(format!(
            "t = {t}: spectral amplitude at the grid boundary is {:.2e} of the peak; refine the grid",
            face / peak
        ));
    }
    if beyond_table {
        let edge = profile.eval(profile.r_max()).abs();
        if peak > 0.0 && edge > ALIASING_LEVEL * peak {
            warnings.push(format!(
                "t = {t}: grid frequencies exceed the mode table where G is {:.2e} of its peak",
                edge / peak
            ));
        }
    }

    let cell = dx.powi(d as i32);
    let norm = 1.0 / side.powi(d as i32);
    let mut rows = Vec::new();
    let mut buf = vec![Complex64::new(0.0, 0.0); total];
    for k in 0..=opts.k_max {
        let mut acc = vec![0.0; total];
        for (alpha, mult) in multi_indices(d, k) {
            for (p, slot) in buf.iter_mut().enumerate() {
                let c = coords(p);
                let mut factor = Complex64::new(spectrum[p], 0.0);
                for a in 0..d {
                    if alpha[a] == 0 {
                        continue;
                    }
                    // odd derivatives drop the unpaired Nyquist bin
                    let xi = if c[a] == n / 2 { 0.0 } else { signed_index(c[a], n) * dk };
                    factor *= Complex64::new(0.0, xi).powu(alpha[a] as u32);
                }
                *slot = factor;
            }
            fft.inverse(&mut buf);
            for (a, v) in acc.iter_mut().zip(&buf) {
                let value = v.re * norm;
                *a += mult * value * value;
            }
        }
        let mut l1 = 0.0;
        let mut linf = 0.0f64;
        for a in acc {
            let v = a.sqrt();
            l1 += v * cell;
            linf = linf.max(v);
        }
        rows.push(GreenNorm { t, k, l1, linf });
    }
    Ok((rows, warnings))
}

/// The same norms from the radial transform pair, for `d = 3`.
pub fn radial_green_norms(res: &ResolventTable, times: &[f64], k_max: usize, box_rule: BoxRule, dr: f64) -> Result<Vec<GreenNorm>> {
    let d = res.equilibrium().dim();
    if d != 3 {
        return Err(Error::Dimension(d));
    }
    let rows = times
        .par_iter()
        .map(|&t| -> Result<Vec<GreenNorm>> {
            let idx = res
                .time()
                .index_of(t)
                .ok_or_else(|| Error::param("times", format!("t = {t} is not on the resolvent time grid")))?;
            let profile = res.radial_profile(idx)?;
            let grid = RadialGrid::covering(box_rule.side(t), dr);
            let spec: Vec<f64> = grid.wavenumbers().iter().map(|&k| profile.eval(k)).collect();
            Ok(grid
                .norms(&spec, k_max)
                .into_iter()
                .enumerate()
                .map(|(k, (l1, linf))| GreenNorm { t, k, l1, linf })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}
