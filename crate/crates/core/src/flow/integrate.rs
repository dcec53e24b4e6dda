//! Hamilton's equations: adaptive extrapolation (order 8) and implicit midpoint.

use serde::{Deserialize, Serialize};

use super::{FlowError, PhaseState};
use crate::geometry::MetricSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Gragg–Bulirsch–Stoer with step sequence 2, 4, 6, 8: order 8.
    Gbs8,
    /// Implicit midpoint rule, symplectic, order 2, fixed step.
    ImplicitMidpoint,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    /// Allowed relative drift of H; exceeded drift triggers a tighter rerun.
    pub energy_tol: f64,
    /// Initial step for the adaptive method, the step for fixed-step runs.
    pub h0: f64,
    pub h_min: f64,
    /// Disables adaptivity when set.
    pub fixed_step: Option<f64>,
    /// Spacing of recorded samples; `None` records every step.
    pub sample_dt: Option<f64>,
    pub max_steps: usize,
    pub max_refinements: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Gbs8,
            rtol: 1e-12,
            atol: 1e-13,
            energy_tol: 1e-9,
            h0: 1e-2,
            h_min: 1e-12,
            fixed_step: None,
            sample_dt: Some(0.05),
            max_steps: 2_000_000,
            max_refinements: 4,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Sample {
    pub t: f64,
    pub state: PhaseState,
    pub h: f64,
    /// `|H(t) − H(0)| / |H(0)|`.
    pub drift: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    pub energy_drift: f64,
    pub refinements: usize,
    pub energy_ok: bool,
    /// The trajectory left the metric domain before `t_end`.
    pub exited: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has its initial sample")
    }

    pub fn t_end(&self) -> f64 {
        self.last().t
    }
}

fn vector_field(m: &MetricSpec, s: &[f64; 4]) -> Result<[f64; 4], FlowError> {
    let j = m.jets(s[0], s[1], 1, None)?;
    let einv = 1.0 / j.e2l;
    let kin = einv * (s[2] * s[2] + s[3] * s[3]);
    Ok([einv * s[2], einv * s[3], j.lambda.d(1, 0) * kin, j.lambda.d(0, 1) * kin])
}

fn energy(m: &MetricSpec, s: &[f64; 4]) -> Result<f64, FlowError> {
    let j = m.jets(s[0], s[1], 0, None)?;
    Ok(0.5 * (s[2] * s[2] + s[3] * s[3]) / j.e2l)
}

fn axpy(a: &[f64; 4], c: f64, b: &[f64; 4]) -> [f64; 4] {
    [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2], a[3] + c * b[3]]
}

const SEQUENCE: [usize; 4] = [2, 4, 6, 8];

fn modified_midpoint(m: &MetricSpec, y0: &[f64; 4], f0: &[f64; 4], big_h: f64, n: usize) -> Result<[f64; 4], FlowError> {
    let h = big_h / n as f64;
    let mut prev = *y0;
    let mut cur = axpy(y0, h, f0);
    for _ in 1..n {
        let next = axpy(&prev, 2.0 * h, &vector_field(m, &cur)?);
        prev = cur;
        cur = next;
    }
    let fl = vector_field(m, &cur)?;
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = 0.5 * (cur[i] + prev[i] + h * fl[i]);
    }
    Ok(out)
}

/// One extrapolated step: the order-8 value and the order-6 value used for error control.
fn gbs_step(m: &MetricSpec, y: &[f64; 4], h: f64) -> Result<([f64; 4], [f64; 4]), FlowError> {
    let f0 = vector_field(m, y)?;
    let mut table: Vec<Vec<[f64; 4]>> = Vec::new();
    for (j, &n) in SEQUENCE.iter().enumerate() {
        let mut row = vec![modified_midpoint(m, y, &f0, h, n)?];
        for k in 1..=j {
            let ratio = (n as f64 / SEQUENCE[j - k] as f64).powi(2) - 1.0;
            let (a, b) = (row[k - 1], table[j - 1][k - 1]);
            let mut t = [0.0; 4];
            for i in 0..4 {
                t[i] = a[i] + (a[i] - b[i]) / ratio;
            }
            row.push(t);
        }
        table.push(row);
    }
    Ok((table[3][3], table[3][2]))
}

fn implicit_midpoint_step(m: &MetricSpec, y: &[f64; 4], h: f64, t: f64) -> Result<[f64; 4], FlowError> {
    let mut next = axpy(y, h, &vector_field(m, y)?);
    for _ in 0..100 {
        let mid = [0.5 * (y[0] + next[0]), 0.5 * (y[1] + next[1]), 0.5 * (y[2] + next[2]), 0.5 * (y[3] + next[3])];
        let cand = axpy(y, h, &vector_field(m, &mid)?);
        let change = (0..4).map(|i| (cand[i] - next[i]).abs() / (1.0 + cand[i].abs())).fold(0.0, f64::max);
        next = cand;
        if change < 1e-15 {
            return Ok(next);
        }
    }
    Err(FlowError::NoConvergence { t })
}

fn run_once(m: &MetricSpec, s0: PhaseState, t_end: f64, cfg: &IntegratorConfig) -> Result<Trajectory, FlowError> {
    let mut y = s0.to_array();
    let h_start = energy(m, &y)?;
    let mut t = 0.0;
    let mut stats = IntegratorStats::default();
    let mut samples = vec![Sample { t, state: s0, h: h_start, drift: 0.0 }];
    let mut next_sample = cfg.sample_dt.map(|d| d.min(t_end)).unwrap_or(t_end);
    let adaptive = cfg.fixed_step.is_none() && cfg.method == Method::Gbs8;
    let mut h = cfg.fixed_step.unwrap_or(cfg.h0);
    let tiny = 1e-12 * t_end;
    while t < t_end - tiny {
        if stats.steps + stats.rejected >= cfg.max_steps {
            return Err(FlowError::StepUnderflow { t });
        }
        let target = if cfg.sample_dt.is_some() { next_sample } else { t_end };
        let step = h.min(target - t);
        let new = match cfg.method {
            Method::Gbs8 => {
                let (hi, lo) = gbs_step(m, &y, step)?;
                if adaptive {
                    let err = (0..4)
                        .map(|i| (hi[i] - lo[i]).abs() / (cfg.atol + cfg.rtol * y[i].abs().max(hi[i].abs())))
                        .fold(0.0, f64::max);
                    let factor = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-1.0 / 7.0)).clamp(0.2, 4.0) };
                    if !err.is_finite() || err > 1.0 {
                        stats.rejected += 1;
                        h = step * if err.is_finite() { factor } else { 0.2 };
                        if h < cfg.h_min {
                            return Err(FlowError::StepUnderflow { t });
                        }
                        continue;
                    }
                    if step == h {
                        h = step * factor;
                    } else {
                        h = h.max(step * factor);
                    }
                }
                hi
            }
            Method::ImplicitMidpoint => implicit_midpoint_step(m, &y, step, t)?,
        };
        stats.steps += 1;
        if !m.domain.contains(new[0], new[1]) || new.iter().any(|v| !v.is_finite()) {
            stats.exited = true;
            break;
        }
        y = new;
        t += step;
        let reached = (t - target).abs() <= tiny;
        if cfg.sample_dt.is_none() || reached {
            let e = energy(m, &y)?;
            samples.push(Sample { t, state: PhaseState::from_array(y), h: e, drift: (e - h_start).abs() / h_start.abs() });
            if reached {
                if let Some(d) = cfg.sample_dt {
                    next_sample = (next_sample + d).min(t_end);
                }
            }
        }
    }
    stats.energy_drift = samples.iter().map(|s| s.drift).fold(0.0, f64::max);
    stats.energy_ok = stats.energy_drift <= cfg.energy_tol;
    Ok(Trajectory { samples, stats })
}

/// Integrates from `s0` for time `t_end`; reruns with tighter tolerances (or halved
/// fixed step) while the energy drift exceeds `energy_tol`.
pub fn integrate(m: &MetricSpec, s0: PhaseState, t_end: f64, cfg: &IntegratorConfig) -> Result<Trajectory, FlowError> {
    if !(t_end > 0.0) {
        return Err(FlowError::BadHorizon(t_end));
    }
    if !m.domain.contains(s0.x, s0.y) {
        return Err(FlowError::StartOutside { x: s0.x, y: s0.y });
    }
    let mut c = *cfg;
    let mut refinements = 0;
    loop {
        let mut tr = run_once(m, s0, t_end, &c)?;
        tr.stats.refinements = refinements;
        if tr.stats.energy_ok || refinements >= cfg.max_refinements {
            return Ok(tr);
        }
        refinements += 1;
        match (c.method, c.fixed_step) {
            (Method::Gbs8, None) => {
                c.rtol *= 0.01;
                c.atol *= 0.01;
            }
            (_, step) => c.fixed_step = Some(0.5 * step.unwrap_or(c.h0)),
        }
    }
}
