//! Run configuration: a TOML file or a built-in example, plus command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use geodrat_core::criterion::{DecideConfig, PhiBands};
use geodrat_core::expr::{parse_expression, EvalContext};
use geodrat_core::flow::{BatchConfig, IntegratorConfig};
use geodrat_core::geometry::{Domain, Grid, MetricSpec};
use geodrat_core::registry::{lookup, ExampleEntry};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Prefix marking an inline conformal factor `e^{2λ}` in place of an example name.
pub const INLINE_PREFIX: char = '=';

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Φ counts as zero when its median is below this and its 95th percentile below
    /// `phi_accept_p95`.
    pub phi_accept: f64,
    pub phi_accept_p95: f64,
    /// Φ counts as nonzero when its minimum is above this.
    pub phi_reject: f64,
    /// Singular-value threshold of the relative Killing dimension test.
    pub residual_tol: f64,
    pub energy_tol: f64,
    /// Samples with `|Q|` below this are skipped when measuring drift.
    pub q_min: f64,
    /// Floor on `|u|` in the Cauchy–Kovalevskaya march.
    pub u_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let d = DecideConfig::default();
        Tolerances {
            phi_accept: d.phi.accept_median,
            phi_accept_p95: d.phi.accept_p95,
            phi_reject: d.phi.reject_min,
            residual_tol: d.rkv_tol,
            energy_tol: IntegratorConfig::default().energy_tol,
            q_min: 1e-6,
            u_min: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchSettings {
    pub count: usize,
    pub t_end: f64,
    pub seed: u64,
}

impl Default for BatchSettings {
    fn default() -> Self {
        BatchSettings { count: 100, t_end: 10.0, seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Example name, or `=` followed by the conformal factor `e^{2λ}`.
    pub metric: String,
    pub params: BTreeMap<String, f64>,
    /// Where the metric lives and geodesics run; defaults to the example's.
    pub domain: Option<[f64; 4]>,
    /// Rectangle of the criterion grid and of trajectory start points.
    pub analysis: Option<[f64; 4]>,
    pub grid: [usize; 2],
    /// Use the obstruction for metrics of revolution before evaluating Φ.
    pub fast_path: bool,
    pub tolerances: Tolerances,
    pub batch: BatchSettings,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            metric: String::new(),
            params: BTreeMap::new(),
            domain: None,
            analysis: None,
            grid: [21, 21],
            fast_path: true,
            tolerances: Tolerances::default(),
            batch: BatchSettings::default(),
            out: None,
        }
    }
}

/// A configuration resolved to a concrete metric.
pub struct Resolved {
    pub metric: MetricSpec,
    pub analysis: Domain,
    pub example: Option<&'static ExampleEntry>,
}

fn rect(r: [f64; 4]) -> Result<Domain, CliError> {
    Ok(Domain::new(r[0], r[1], r[2], r[3])?)
}

/// Parses `k=v`.
pub fn parse_param(text: &str) -> Result<(String, f64), CliError> {
    let (k, v) = text.split_once('=').ok_or_else(|| CliError::Config(format!("expected k=v, got {text:?}")))?;
    let v: f64 = v.trim().parse().map_err(|_| CliError::Config(format!("parameter {k:?}: {v:?} is not a number")))?;
    Ok((k.trim().to_string(), v))
}

/// Parses `NX,NY`.
pub fn parse_grid(text: &str) -> Result<[usize; 2], CliError> {
    let bad = || CliError::Config(format!("expected NX,NY, got {text:?}"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    Ok([a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?])
}

impl RunConfig {
    pub fn for_example(name: &str) -> RunConfig {
        RunConfig { metric: name.to_string(), ..RunConfig::default() }
    }

    pub fn from_toml(text: &str) -> Result<RunConfig, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        RunConfig::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let t = &self.tolerances;
        if !(t.phi_accept > 0.0 && t.phi_accept < t.phi_reject) {
            return Err(CliError::Config(format!("need 0 < phi_accept < phi_reject, got {} and {}", t.phi_accept, t.phi_reject)));
        }
        if t.phi_accept_p95 < t.phi_accept {
            return Err(CliError::Config("phi_accept_p95 must not be below phi_accept".into()));
        }
        if self.grid[0] < 5 || self.grid[1] < 5 {
            return Err(CliError::Config(format!("grid must be at least 5 × 5, got {} × {}", self.grid[0], self.grid[1])));
        }
        if self.metric.is_empty() {
            return Err(CliError::Config("no metric given".into()));
        }
        Ok(())
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        self.validate()?;
        let overrides: Vec<(String, f64)> = self.params.iter().map(|(k, v)| (k.clone(), *v)).collect();
        if let Some(text) = self.metric.strip_prefix(INLINE_PREFIX) {
            let domain = self.domain.ok_or_else(|| CliError::Config("an inline metric needs a domain".into()))?;
            let domain = rect(domain)?;
            let ctx = overrides.iter().fold(EvalContext::new(), |c, (k, v)| c.with(k, *v));
            let metric = MetricSpec::from_conformal("inline", &parse_expression(text.trim())?, domain, ctx)?;
            let analysis = match self.analysis {
                Some(r) => rect(r)?,
                None => domain,
            };
            return Ok(Resolved { metric, analysis, example: None });
        }
        let entry = lookup(&self.metric).ok_or_else(|| CliError::UnknownExample(self.metric.clone()))?;
        let mut metric = entry.metric(&overrides)?;
        if let Some(d) = self.domain {
            metric = metric.with_domain(rect(d)?)?;
        }
        let analysis = match self.analysis {
            Some(r) => rect(r)?,
            None => entry.analysis_domain(),
        };
        if !metric.domain.contains_domain(&analysis) {
            return Err(CliError::Config("the analysis rectangle must lie inside the metric domain".into()));
        }
        Ok(Resolved { metric, analysis, example: Some(entry) })
    }

    pub fn grid_on(&self, domain: Domain) -> Grid {
        Grid::new(domain, self.grid[0], self.grid[1])
    }

    pub fn decide_config(&self) -> DecideConfig {
        let t = &self.tolerances;
        let mut cfg = DecideConfig {
            phi: PhiBands { accept_median: t.phi_accept, accept_p95: t.phi_accept_p95, reject_min: t.phi_reject },
            rkv_tol: t.residual_tol,
            fast_path: self.fast_path,
            ..DecideConfig::default()
        };
        cfg.integrator.energy_tol = t.energy_tol;
        cfg
    }

    pub fn batch_config(&self, region: Domain, threads: Option<usize>) -> BatchConfig {
        let integrator = IntegratorConfig { energy_tol: self.tolerances.energy_tol, ..IntegratorConfig::default() };
        BatchConfig {
            count: self.batch.count,
            t_end: self.batch.t_end,
            seed: self.batch.seed,
            threads,
            integrator,
            q_min: self.tolerances.q_min,
            region: Some(region),
        }
    }
}
