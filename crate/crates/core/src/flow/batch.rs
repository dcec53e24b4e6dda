//! Parallel batches of trajectories with deterministic seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{conservation_report, integrate, FlowError, FractionalLinearIntegral, IntegratorConfig, IntegratorStats, PhaseState};
use crate::geometry::{Domain, MetricSpec};

#[derive(Clone, Copy, Debug)]
pub struct BatchConfig {
    pub count: usize,
    pub t_end: f64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub integrator: IntegratorConfig,
    pub q_min: f64,
    /// Where initial positions are drawn; defaults to the metric domain.
    pub region: Option<Domain>,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig { count: 100, t_end: 10.0, seed: 1, threads: None, integrator: IntegratorConfig::default(), q_min: 1e-6, region: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BatchResult {
    pub index: usize,
    pub start: PhaseState,
    pub stats: Option<IntegratorStats>,
    pub t_reached: f64,
    pub drift: Option<f64>,
    pub error: Option<String>,
}

/// Uniform position in `region` and unit-speed momentum (`H = ½`) in a uniform direction.
pub fn random_state<R: Rng>(m: &MetricSpec, region: &Domain, rng: &mut R) -> Result<PhaseState, FlowError> {
    let x = rng.random_range(region.x_min..region.x_max);
    let y = rng.random_range(region.y_min..region.y_max);
    let theta = rng.random_range(0.0..std::f64::consts::TAU);
    let lam = m.jets(x, y, 0, None)?.lambda.value();
    let speed = lam.exp();
    Ok(PhaseState::new(x, y, speed * theta.cos(), speed * theta.sin()))
}

fn one(m: &MetricSpec, f: Option<&FractionalLinearIntegral>, cfg: &BatchConfig, index: usize) -> BatchResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let region = cfg.region.unwrap_or(m.domain);
    let start = match random_state(m, &region, &mut rng) {
        Ok(s) => s,
        Err(e) => {
            let start = PhaseState::new(f64::NAN, f64::NAN, f64::NAN, f64::NAN);
            return BatchResult { index, start, stats: None, t_reached: 0.0, drift: None, error: Some(e.to_string()) };
        }
    };
    let run = || -> Result<(IntegratorStats, f64, Option<f64>), FlowError> {
        let tr = integrate(m, start, cfg.t_end, &cfg.integrator)?;
        let drift = match f {
            Some(f) => Some(conservation_report(f, &tr, cfg.q_min)?.max_drift),
            None => None,
        };
        Ok((tr.stats.clone(), tr.t_end(), drift))
    };
    match run() {
        Ok((stats, t_reached, drift)) => BatchResult { index, start, stats: Some(stats), t_reached, drift, error: None },
        Err(e) => BatchResult { index, start, stats: None, t_reached: 0.0, drift: None, error: Some(e.to_string()) },
    }
}

/// Runs `cfg.count` trajectories in parallel; results come back in index order and
/// do not depend on the thread count.
pub fn run_batch(m: &MetricSpec, f: Option<&FractionalLinearIntegral>, cfg: &BatchConfig) -> Vec<BatchResult> {
    let work = || (0..cfg.count).into_par_iter().map(|i| one(m, f, cfg, i)).collect::<Vec<_>>();
    match cfg.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(work),
            Err(_) => work(),
        },
        None => work(),
    }
}
