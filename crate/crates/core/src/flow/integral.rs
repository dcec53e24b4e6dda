//! Fractional-linear integrals `F = P/Q` and their conservation along trajectories.

use std::io::Write;

use nalgebra::Matrix2x4;
use serde::Serialize;

use super::{FlowError, PhaseState, Trajectory};
use crate::geometry::MetricSpec;
use crate::killing::CovectorField;

/// `F = P/Q` with `P = u p + v q` and `Q = w p + r q`.
#[derive(Clone)]
pub struct FractionalLinearIntegral {
    pub p: CovectorField,
    pub q: CovectorField,
}

impl FractionalLinearIntegral {
    pub fn new(p: CovectorField, q: CovectorField) -> FractionalLinearIntegral {
        FractionalLinearIntegral { p, q }
    }

    /// `(P, Q)` at a state.
    pub fn pair(&self, s: &PhaseState) -> Result<(f64, f64), FlowError> {
        Ok((self.p.eval(s)?, self.q.eval(s)?))
    }

    /// `F`, or `None` where `|Q| < q_min`.
    pub fn value(&self, s: &PhaseState, q_min: f64) -> Result<Option<f64>, FlowError> {
        let (p, q) = self.pair(s)?;
        Ok((q.abs() >= q_min).then(|| p / q))
    }

    /// `u r − v w`, which must not vanish identically.
    pub fn determinant(&self, x: f64, y: f64) -> Result<f64, FlowError> {
        let (u, v) = (self.p.u.value(x, y)?, self.p.v.value(x, y)?);
        let (w, r) = (self.q.u.value(x, y)?, self.q.v.value(x, y)?);
        Ok(u * r - v * w)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConservationReport {
    /// Largest drift over all segments.
    pub max_drift: f64,
    /// Drift per maximal segment on which `|Q| ≥ q_min`.
    pub segment_drifts: Vec<f64>,
    /// Samples dropped because `|Q| < q_min`.
    pub skipped: usize,
    pub samples: usize,
}

/// Drift of `F` along a trajectory, measured on maximal segments with `|Q| ≥ q_min`.
/// Within a segment the reference chart is `P/Q` when `|F(start)| ≤ 1` and `Q/P`
/// otherwise; the drift is `|G(t) − G(start)| / (1 + |G(start)|)` in that chart.
pub fn conservation_report(f: &FractionalLinearIntegral, traj: &Trajectory, q_min: f64) -> Result<ConservationReport, FlowError> {
    let pairs = traj.samples.iter().map(|s| f.pair(&s.state)).collect::<Result<Vec<_>, _>>()?;
    let mut segments: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut current = Vec::new();
    let mut skipped = 0;
    for &(p, q) in &pairs {
        if q.abs() >= q_min {
            current.push((p, q));
        } else {
            skipped += 1;
            if !current.is_empty() {
                segments.push(std::mem::take(&mut current));
            }
        }
    }
    if !current.is_empty() {
        segments.push(current);
    }
    let segment_drifts: Vec<f64> = segments
        .iter()
        .filter(|s| s.len() >= 2)
        .map(|seg| {
            let (p0, q0) = seg[0];
            let swap = (p0 / q0).abs() > 1.0;
            let chart = |&(p, q): &(f64, f64)| if swap { q / p } else { p / q };
            let g0 = chart(&seg[0]);
            seg.iter().map(|s| (chart(s) - g0).abs() / (1.0 + g0.abs())).fold(0.0, f64::max)
        })
        .collect();
    if segment_drifts.is_empty() {
        return Err(FlowError::QVanishes);
    }
    let max_drift = segment_drifts.iter().copied().fold(0.0, f64::max);
    Ok(ConservationReport { max_drift, segment_drifts, skipped, samples: pairs.len() })
}

#[derive(Clone, Debug, Serialize)]
pub struct IndependenceReport {
    /// Singular values of the matrix with rows `dF/|dF|` and `dH/|dH|`.
    pub singular_values: [f64; 2],
    pub independent: bool,
}

fn gradient(c: &CovectorField, s: &PhaseState) -> Result<[f64; 4], FlowError> {
    let u = c.u.jet(s.x, s.y, 1)?;
    let v = c.v.jet(s.x, s.y, 1)?;
    Ok([u.d(1, 0) * s.p + v.d(1, 0) * s.q, u.d(0, 1) * s.p + v.d(0, 1) * s.q, u.value(), v.value()])
}

/// Whether `dF` and `dH` are linearly independent at a state.
pub fn independence_check(f: &FractionalLinearIntegral, m: &MetricSpec, s: &PhaseState, tol: f64) -> Result<IndependenceReport, FlowError> {
    let (pv, qv) = f.pair(s)?;
    if qv == 0.0 {
        return Err(FlowError::QZeroAtPoint);
    }
    let dp = gradient(&f.p, s)?;
    let dq = gradient(&f.q, s)?;
    let df: Vec<f64> = (0..4).map(|i| (dp[i] * qv - pv * dq[i]) / (qv * qv)).collect();
    let j = m.jets(s.x, s.y, 1, None)?;
    let einv = 1.0 / j.e2l;
    let h = 0.5 * einv * (s.p * s.p + s.q * s.q);
    let dh = [-2.0 * j.lambda.d(1, 0) * h, -2.0 * j.lambda.d(0, 1) * h, einv * s.p, einv * s.q];
    let unit = |g: &[f64]| {
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        g.iter().map(|v| if n > 0.0 { v / n } else { 0.0 }).collect::<Vec<_>>()
    };
    let (a, b) = (unit(&df), unit(&dh));
    let mat = Matrix2x4::from_fn(|r, c| if r == 0 { a[c] } else { b[c] });
    let sv = mat.singular_values();
    let (s0, s1) = (sv[0].max(sv[1]), sv[0].min(sv[1]));
    Ok(IndependenceReport { singular_values: [s0, s1], independent: s1 >= tol })
}

/// Writes `t, x, y, p, q, H, F`, leaving `F` empty where `|Q| < q_min`.
pub fn write_csv<W: Write>(out: W, traj: &Trajectory, f: Option<&FractionalLinearIntegral>, q_min: f64) -> Result<(), FlowError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "y", "p", "q", "H", "F"])?;
    for s in &traj.samples {
        let fv = match f {
            Some(f) => f.value(&s.state, q_min)?.map(|v| format!("{v:.17e}")).unwrap_or_default(),
            None => String::new(),
        };
        let st = s.state;
        w.write_record([
            format!("{:.17e}", s.t),
            format!("{:.17e}", st.x),
            format!("{:.17e}", st.y),
            format!("{:.17e}", st.p),
            format!("{:.17e}", st.q),
            format!("{:.17e}", s.h),
            fv,
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
