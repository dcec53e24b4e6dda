//! Built-in example metrics.

use serde::Serialize;

use crate::expr::{parse_expression, EvalContext};
use crate::geometry::{Domain, GeometryError, MetricSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expected {
    ConstantCurvature,
    Exists,
    None,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExampleEntry {
    pub name: &'static str,
    /// `e^{2λ}` as expression text.
    pub conformal: &'static str,
    pub params: &'static [(&'static str, f64)],
    /// Where the metric is used, including for geodesics.
    pub domain: [f64; 4],
    /// Default rectangle for the criterion grid.
    pub analysis: [f64; 4],
    pub expected: Expected,
    pub note: &'static str,
}

const NEAR: [f64; 4] = [0.3, 1.3, 0.2, 1.2];
const NEAR_WIDE: [f64; 4] = [0.1, 2.0, 0.05, 2.0];
/// Patch kept away from the conical point of the `eps` families at the origin.
const AWAY: [f64; 4] = [0.5, 1.5, 1.0, 2.0];
const AWAY_WIDE: [f64; 4] = [0.1, 2.5, 0.5, 2.5];

pub static REGISTRY: &[ExampleEntry] = &[
    ExampleEntry {
        name: "flat",
        conformal: "1",
        params: &[],
        domain: [-2.0, 2.0, -2.0, 2.0],
        analysis: [-1.0, 1.0, -1.0, 1.0],
        expected: Expected::ConstantCurvature,
        note: "Euclidean plane",
    },
    ExampleEntry {
        name: "sphere",
        conformal: "(1+(x^2+y^2)/4)^(-2)",
        params: &[],
        domain: [-2.0, 2.0, -2.0, 2.0],
        analysis: [-1.0, 1.0, -1.0, 1.0],
        expected: Expected::ConstantCurvature,
        note: "unit sphere in stereographic coordinates, k = 1",
    },
    ExampleEntry {
        name: "bessel",
        conformal: "exp(2*x)*(besselj0(y)^2 + besselj1(y)^2)",
        params: &[],
        domain: [-4.0, 6.0, -10.0, 10.0],
        analysis: [0.1, 1.0, 0.5, 2.0],
        expected: Expected::Exists,
        note: "unique fractional-linear integral built from J0, J1",
    },
    ExampleEntry {
        name: "h1",
        conformal: "x^2 + y^2 + b",
        params: &[("b", 1.0)],
        domain: NEAR_WIDE,
        analysis: NEAR,
        expected: Expected::None,
        note: "radially symmetric; flat when b = 0",
    },
    ExampleEntry {
        name: "h1-rev",
        conformal: "(exp(2*x) + b)*exp(2*x)",
        params: &[("b", 1.0)],
        domain: [-2.0, 2.0, -2.0, 2.0],
        analysis: [-1.0, 1.0, -1.0, 1.0],
        expected: Expected::None,
        note: "h1 in log-polar coordinates, a metric of revolution",
    },
    ExampleEntry {
        name: "h2",
        conformal: "x^4 + y^4 + b",
        params: &[("b", 1.0)],
        domain: NEAR_WIDE,
        analysis: NEAR,
        expected: Expected::None,
        note: "Liouville metric without Killing vectors",
    },
    ExampleEntry {
        name: "h1eps",
        conformal: "x^2 + eps*y^2",
        params: &[("eps", 4.0)],
        domain: AWAY_WIDE,
        analysis: AWAY,
        expected: Expected::Exists,
        note: "deformation of h1; an integral is known at eps = 4",
    },
    ExampleEntry {
        name: "h2eps",
        conformal: "x^4 + eps*y^4",
        params: &[("eps", 4.0)],
        domain: AWAY_WIDE,
        analysis: AWAY,
        expected: Expected::Exists,
        note: "deformation of h2; an integral is known at eps = 4",
    },
    ExampleEntry {
        name: "rev-x2",
        conformal: "exp(2*x^2)",
        params: &[],
        domain: [-2.0, 2.0, -2.0, 2.0],
        analysis: [0.2, 1.2, -0.5, 0.5],
        expected: Expected::None,
        note: "metric of revolution with λ = x²",
    },
];

pub fn lookup(name: &str) -> Option<&'static ExampleEntry> {
    REGISTRY.iter().find(|e| e.name == name)
}

fn rect(r: [f64; 4]) -> Result<Domain, GeometryError> {
    Domain::new(r[0], r[1], r[2], r[3])
}

impl ExampleEntry {
    pub fn context(&self, overrides: &[(String, f64)]) -> EvalContext {
        let mut ctx = EvalContext::new();
        for (k, v) in self.params {
            ctx = ctx.with(k, *v);
        }
        for (k, v) in overrides {
            ctx = ctx.with(k, *v);
        }
        ctx
    }

    pub fn metric(&self, overrides: &[(String, f64)]) -> Result<MetricSpec, GeometryError> {
        let conf = parse_expression(self.conformal)?;
        MetricSpec::from_conformal(self.name, &conf, rect(self.domain)?, self.context(overrides))
    }

    pub fn analysis_domain(&self) -> Domain {
        rect(self.analysis).expect("registry rectangles are valid")
    }
}
