//! Pointwise resultant invariant and candidate roots.

use nalgebra::Complex;
use rayon::prelude::*;
use serde::Serialize;

use super::specialize::{CompiledSystem, Specialized};
use super::univariate::resultant;
use crate::geometry::{GeometryError, Grid, MetricSpec};

/// `|k_x|` below this fraction of `|∇k|` flags the point.
pub const KX_FLOOR: f64 = 1e-6;
/// `|k_x|` below this fraction of the grid median of `|∇k|` flags the point in grid statistics.
pub const KX_GRID_FLOOR: f64 = 0.1;
/// Leading coefficient below this fraction of the largest one counts as degenerate.
pub const LEAD_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct PhiPoint {
    pub x: f64,
    pub y: f64,
    /// For each of Eq0', Eq0'', Eq0''': the smallest relative residual over the roots of Eq0.
    pub components: [f64; 3],
    /// Smallest, over roots of Eq0, of the largest residual among the three members.
    pub value: f64,
    /// Sylvester determinants `Res(Eq0, M)` of the specialized polynomials.
    pub resultant_raw: [f64; 3],
    /// The same after scaling both polynomials to unit leading coefficient.
    pub resultant_monic: [f64; 3],
    pub k_x: f64,
    pub grad_k: f64,
    pub flag: Option<String>,
}

fn degenerate(s: &Specialized) -> Option<String> {
    let grad = s.k_x.hypot(s.k_y);
    if grad == 0.0 || s.k_x.abs() <= KX_FLOOR * grad {
        return Some(format!("k_x = {:.3e} makes the EQ1 denominator degenerate", s.k_x));
    }
    for (name, p) in ["Eq0", "Eq0'", "Eq0''", "Eq0'''"].iter().zip(std::iter::once(&s.eq0).chain(s.members.iter())) {
        if p.leading().abs() <= LEAD_FLOOR * p.max_abs() {
            return Some(format!("{name} loses its leading coefficient"));
        }
    }
    None
}

pub fn phi_at(s: &Specialized) -> PhiPoint {
    let roots = s.eq0_deflated.roots();
    let mut components = [f64::INFINITY; 3];
    let mut value = f64::INFINITY;
    for r in &roots {
        let res: Vec<f64> = s.members.iter().map(|m| m.relative_residual(*r)).collect();
        for j in 0..3 {
            components[j] = components[j].min(res[j]);
        }
        value = value.min(res.iter().copied().fold(0.0, f64::max));
    }
    if roots.is_empty() {
        components = [1.0; 3];
        value = 1.0;
    }
    let raw = [0, 1, 2].map(|j| resultant(&s.eq0, &s.members[j]));
    let monic = [0, 1, 2].map(|j| resultant(&s.eq0.monic(), &s.members[j].monic()));
    PhiPoint {
        x: s.x,
        y: s.y,
        components,
        value,
        resultant_raw: raw,
        resultant_monic: monic,
        k_x: s.k_x,
        grad_k: s.k_x.hypot(s.k_y),
        flag: degenerate(s),
    }
}

pub fn phi_evaluate(sys: &CompiledSystem, m: &MetricSpec, x: f64, y: f64) -> Result<PhiPoint, GeometryError> {
    Ok(phi_at(&sys.specialize(m, x, y)?))
}

/// Φ on every grid point, index-ordered, in parallel, with degenerate points flagged.
pub fn phi_grid(sys: &CompiledSystem, m: &MetricSpec, grid: &Grid) -> Result<Vec<PhiPoint>, GeometryError> {
    let mut pts = grid.points().into_par_iter().map(|(x, y)| phi_evaluate(sys, m, x, y)).collect::<Result<Vec<_>, _>>()?;
    flag_degenerate(&mut pts);
    Ok(pts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiVerdict {
    Zero,
    Nonzero,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct PhiStats {
    pub points: usize,
    pub flagged: usize,
    pub min: f64,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
    /// Per component: (median, max).
    pub components: [(f64, f64); 3],
    pub verdict: PhiVerdict,
    pub bands: PhiBands,
    pub normalization: &'static str,
}

pub const ZERO_MEDIAN: f64 = 1e-6;
pub const ZERO_P95: f64 = 1e-4;
pub const NONZERO_MIN: f64 = 1e-3;

/// Classification thresholds for the Φ statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhiBands {
    /// Zero when the median is below this and the 95th percentile below `accept_p95`.
    pub accept_median: f64,
    pub accept_p95: f64,
    /// Nonzero when the minimum is above this.
    pub reject_min: f64,
}

impl Default for PhiBands {
    fn default() -> Self {
        PhiBands { accept_median: ZERO_MEDIAN, accept_p95: ZERO_P95, reject_min: NONZERO_MIN }
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Flags points whose `|k_x|` is small against the typical `|∇k|` of the grid: near the
/// curve `k_x = 0` the EQ1 denominator loses its `w²` term.
pub fn flag_degenerate(points: &mut [PhiPoint]) {
    let mut g: Vec<f64> = points.iter().map(|p| p.grad_k).collect();
    g.sort_by(f64::total_cmp);
    let median = quantile(&g, 0.5);
    for p in points.iter_mut().filter(|p| p.flag.is_none()) {
        if p.k_x.abs() <= KX_GRID_FLOOR * median {
            p.flag = Some(format!("|k_x| = {:.3e} is below {KX_GRID_FLOOR} of the median |∇k| = {median:.3e}", p.k_x.abs()));
        }
    }
}

pub fn phi_stats(points: &[PhiPoint]) -> PhiStats {
    phi_stats_with(points, &PhiBands::default())
}

pub fn phi_stats_with(points: &[PhiPoint], bands: &PhiBands) -> PhiStats {
    let used: Vec<&PhiPoint> = points.iter().filter(|p| p.flag.is_none()).collect();
    let mut vals: Vec<f64> = used.iter().map(|p| p.value).collect();
    vals.sort_by(f64::total_cmp);
    let comp = |j: usize| {
        let mut v: Vec<f64> = used.iter().map(|p| p.components[j]).collect();
        v.sort_by(f64::total_cmp);
        (quantile(&v, 0.5), v.last().copied().unwrap_or(f64::NAN))
    };
    let (min, median, p95, max) = (quantile(&vals, 0.0), quantile(&vals, 0.5), quantile(&vals, 0.95), quantile(&vals, 1.0));
    let verdict = if vals.is_empty() {
        PhiVerdict::Inconclusive
    } else if median < bands.accept_median && p95 < bands.accept_p95 {
        PhiVerdict::Zero
    } else if min > bands.reject_min {
        PhiVerdict::Nonzero
    } else {
        PhiVerdict::Inconclusive
    };
    PhiStats {
        points: points.len(),
        flagged: points.len() - used.len(),
        min,
        median,
        p95,
        max,
        components: [comp(0), comp(1), comp(2)],
        verdict,
        bands: *bands,
        normalization: "relative residual |M(r)| / sum |m_k||r|^k at roots r of Eq0",
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WCandidate {
    pub w: f64,
    pub point: (f64, f64),
    /// Relative residuals of Eq0, Eq0', Eq0'', Eq0'''.
    pub residuals: [f64; 4],
    /// Largest member residual; 0 is perfect.
    pub score: f64,
}

/// Real roots of Eq0 that the other three members also annihilate to `tol`.
pub fn candidates_at(s: &Specialized, tol: f64) -> Vec<WCandidate> {
    let scale = s.eq0_deflated.max_abs();
    let mut out: Vec<WCandidate> = s
        .eq0_deflated
        .real_roots(1e-7)
        .into_iter()
        .filter(|w| w.abs() > 1e-10)
        .filter(|w| s.den.eval(*w).abs() > 1e-12 * s.den.magnitude(w.abs()))
        .map(|w| {
            let residuals = s.residuals(w);
            let score = residuals[1..].iter().copied().fold(0.0, f64::max);
            WCandidate { w, point: (s.x, s.y), residuals, score }
        })
        .filter(|c| c.score <= tol && scale > 0.0)
        .collect();
    out.truncate(6);
    out
}

pub fn find_w_candidates(sys: &CompiledSystem, m: &MetricSpec, x: f64, y: f64, tol: f64) -> Result<Vec<WCandidate>, GeometryError> {
    Ok(candidates_at(&sys.specialize(m, x, y)?, tol))
}

/// Complex roots of the specialized sextic; exposed for diagnostics.
pub fn eq0_roots(s: &Specialized) -> Vec<Complex<f64>> {
    s.eq0_deflated.roots()
}
