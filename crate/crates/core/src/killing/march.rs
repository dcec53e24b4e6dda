//! Marching solvers for relative Killing vectors with unknown cofactor.

use std::sync::Arc;

use super::fields::{lagrange_weights, window, STENCIL};
use super::{Cofactor, CovectorField, ExprField, Field, GridField, KillingError, PartialField};
use crate::geometry::{Domain, Grid, MetricSpec};

/// Fixed-step settings shared by both marchers.
#[derive(Clone, Copy, Debug)]
pub struct MarchOptions {
    /// RK4 steps across the strip height.
    pub steps: usize,
    /// Rows in the output grid, including the initial one.
    pub rows: usize,
    /// Floor on `|u|` for the Cauchy–Kovalevskaya march.
    pub u_min: f64,
    /// Columns in the output grid of the characteristics solver.
    pub cols: usize,
    /// Number of characteristics launched from the initial segment.
    pub characteristics: usize,
}

impl Default for MarchOptions {
    fn default() -> Self {
        MarchOptions { steps: 400, rows: 41, u_min: 1e-3, cols: 41, characteristics: 161 }
    }
}

impl MarchOptions {
    /// Steps rounded up so that both halves of the Richardson pair land on output rows.
    fn aligned_steps(&self) -> usize {
        let unit = 2 * (self.rows - 1);
        self.steps.div_ceil(unit) * unit
    }
}

fn rk4<F>(f: &F, y: f64, s: &[f64], h: f64) -> Result<Vec<f64>, KillingError>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>, KillingError>,
{
    let shift = |k: &[f64], c: f64| s.iter().zip(k).map(|(a, b)| a + c * b).collect::<Vec<_>>();
    let k1 = f(y, s)?;
    let k2 = f(y + 0.5 * h, &shift(&k1, 0.5 * h))?;
    let k3 = f(y + 0.5 * h, &shift(&k2, 0.5 * h))?;
    let k4 = f(y + h, &shift(&k3, h))?;
    Ok((0..s.len()).map(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}

/// Runs `steps` RK4 steps from `y0`, recording the state on `rows` equally spaced rows.
fn march_rows<F>(f: &F, y0: f64, height: f64, init: &[f64], steps: usize, rows: usize) -> Result<Vec<Vec<f64>>, KillingError>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>, KillingError>,
{
    let h = height / steps as f64;
    let every = steps / (rows - 1);
    let mut out = vec![init.to_vec()];
    let mut s = init.to_vec();
    for k in 0..steps {
        s = rk4(f, y0 + k as f64 * h, &s, h)?;
        if (k + 1) % every == 0 {
            out.push(s.clone());
        }
    }
    Ok(out)
}

/// First `x`-derivative on uniform nodes with five-point stencils.
fn diff_x(vals: &[f64], h: f64) -> Vec<f64> {
    let n = vals.len();
    (0..n)
        .map(|i| {
            let w0 = window(i as f64, n);
            let w = lagrange_weights((i - w0) as f64, 1);
            (0..STENCIL).map(|k| w[1][k] * vals[w0 + k]).sum::<f64>() / h
        })
        .collect()
}

/// Values of `(u, v, f)` on a horizontal segment at height `y0`, on uniform nodes.
#[derive(Clone, Debug)]
pub struct CkInit {
    pub x_min: f64,
    pub x_max: f64,
    pub y0: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub f: Vec<f64>,
}

impl CkInit {
    pub fn from_fn(x_min: f64, x_max: f64, y0: f64, nx: usize, g: impl Fn(f64) -> (f64, f64, f64)) -> CkInit {
        let (mut u, mut v, mut f) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..nx {
            let (a, b, c) = g(x_min + (x_max - x_min) * i as f64 / (nx - 1) as f64);
            u.push(a);
            v.push(b);
            f.push(c);
        }
        CkInit { x_min, x_max, y0, u, v, f }
    }
}

/// `(u, v, f)` on a strip; the cofactor is `a = f_y`, `b = −f_x`.
#[derive(Clone, Debug)]
pub struct CkSolution {
    pub u: GridField,
    pub v: GridField,
    pub f: GridField,
    /// Richardson estimate of the marching error.
    pub error_estimate: f64,
}

impl CkSolution {
    pub fn covector(&self) -> CovectorField {
        CovectorField::new(Arc::new(self.u.clone()), Arc::new(self.v.clone()))
    }

    pub fn cofactor(&self) -> Cofactor {
        let f: Field = Arc::new(self.f.clone());
        Cofactor::new(
            Arc::new(PartialField { base: f.clone(), along_x: false, sign: 1.0 }),
            Arc::new(PartialField { base: f, along_x: true, sign: -1.0 }),
        )
    }

    pub fn grid(&self) -> Grid {
        self.u.grid
    }
}

/// Marches `(u, v, f)` upward by `height` with the system in which `y`-derivatives are
/// given by `x`-derivatives:
///
/// ```text
/// u_y = −v_x + (v/u) u_x + u f_x + v λ_x + (v²/u) λ_y
/// v_y = v f_x − u λ_x − v λ_y
/// f_y = −u_x/u − λ_x − (v/u) λ_y
/// ```
///
/// The march is of Cauchy–Kovalevskaya type, so it is only stable on thin strips.
pub fn ck_march(m: &MetricSpec, init: &CkInit, height: f64, opts: &MarchOptions) -> Result<CkSolution, KillingError> {
    let nx = init.u.len();
    if nx < STENCIL || init.v.len() != nx || init.f.len() != nx || opts.rows < STENCIL {
        return Err(KillingError::Breakdown { x: init.x_min, y: init.y0, msg: "need at least 5 nodes and 5 rows".into() });
    }
    let hx = (init.x_max - init.x_min) / (nx - 1) as f64;
    let xs: Vec<f64> = (0..nx).map(|i| init.x_min + hx * i as f64).collect();
    let rhs = |y: f64, s: &[f64]| -> Result<Vec<f64>, KillingError> {
        let (u, rest) = s.split_at(nx);
        let (v, f) = rest.split_at(nx);
        if u.iter().any(|u| u.abs() < opts.u_min || !u.is_finite()) {
            return Err(KillingError::UFloor { y });
        }
        let (ux, vx, fx) = (diff_x(u, hx), diff_x(v, hx), diff_x(f, hx));
        let mut out = vec![0.0; 3 * nx];
        for i in 0..nx {
            let l = m.jets(xs[i], y, 1, None)?.lambda;
            let (lx, ly) = (l.d(1, 0), l.d(0, 1));
            let r = v[i] / u[i];
            out[i] = -vx[i] + r * ux[i] + u[i] * fx[i] + v[i] * lx + r * v[i] * ly;
            out[nx + i] = v[i] * fx[i] - u[i] * lx - v[i] * ly;
            out[2 * nx + i] = -ux[i] / u[i] - lx - r * ly;
        }
        Ok(out)
    };
    let start: Vec<f64> = init.u.iter().chain(&init.v).chain(&init.f).copied().collect();
    let steps = opts.aligned_steps();
    let fine = march_rows(&rhs, init.y0, height, &start, steps, opts.rows)?;
    let coarse = march_rows(&rhs, init.y0, height, &start, steps / 2, opts.rows)?;
    let error_estimate = fine.iter().flatten().zip(coarse.iter().flatten()).fold(0.0f64, |e, (a, b)| e.max((a - b).abs())) / 15.0;
    let grid = Grid::new(Domain::new(init.x_min, init.x_max, init.y0, init.y0 + height)?, nx, opts.rows);
    let pick = |off: usize| {
        let mut vals = vec![0.0; grid.len()];
        for (j, row) in fine.iter().enumerate() {
            for i in 0..nx {
                vals[grid.index(i, j)] = row[off + i];
            }
        }
        GridField::new(grid, vals)
    };
    Ok(CkSolution { u: pick(0), v: pick(nx), f: pick(2 * nx), error_estimate })
}

/// `w = v/u` and the cofactor it determines, on a rectangle swept by characteristics.
#[derive(Clone, Debug)]
pub struct CharacteristicSolution {
    pub w: GridField,
    pub a: GridField,
    pub b: GridField,
    pub error_estimate: f64,
}

impl CharacteristicSolution {
    /// The pair `R = p + w q`.
    pub fn covector(&self) -> CovectorField {
        CovectorField::new(ExprField::constant(1.0), Arc::new(self.w.clone()))
    }

    pub fn cofactor(&self) -> Cofactor {
        Cofactor::new(Arc::new(self.a.clone()), Arc::new(self.b.clone()))
    }

    pub fn grid(&self) -> Grid {
        self.w.grid
    }
}

/// Lagrange interpolation through up to six of the sorted nodes nearest `x`.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let width = 6.min(n);
    let pos = xs.partition_point(|&v| v < x);
    let lo = pos.saturating_sub(width / 2).min(n - width);
    let mut acc = 0.0;
    for k in lo..lo + width {
        let mut l = 1.0;
        for m in lo..lo + width {
            if m != k {
                l *= (x - xs[m]) / (xs[k] - xs[m]);
            }
        }
        acc += l * ys[k];
    }
    acc
}

/// Solves `w_y − w w_x + (w² + 1)(λ_x + w λ_y) = 0` upward from `w(x, y0) = w0(x)`
/// along the characteristics `dx/dy = −w`, `dw/dy = −(w² + 1)(λ_x + w λ_y)`, then sets
/// `a = −λ_x − w λ_y` and `b = w(λ_x + w λ_y) − w_x`, so that `p + w q` is a relative
/// Killing vector for `(a, b)`.
pub fn characteristic_w(
    m: &MetricSpec,
    x_range: (f64, f64),
    y0: f64,
    height: f64,
    w0: &dyn Fn(f64) -> f64,
    opts: &MarchOptions,
) -> Result<CharacteristicSolution, KillingError> {
    let n = opts.characteristics.max(STENCIL + 1);
    if opts.rows < STENCIL || opts.cols < STENCIL {
        return Err(KillingError::Breakdown { x: x_range.0, y: y0, msg: "need at least 5 rows and 5 columns".into() });
    }
    let start: Vec<f64> = (0..n)
        .flat_map(|k| {
            let x = x_range.0 + (x_range.1 - x_range.0) * k as f64 / (n - 1) as f64;
            [x, w0(x)]
        })
        .collect();
    let rhs = |y: f64, s: &[f64]| -> Result<Vec<f64>, KillingError> {
        let mut out = vec![0.0; s.len()];
        for k in 0..n {
            let (x, w) = (s[2 * k], s[2 * k + 1]);
            if k > 0 && x <= s[2 * k - 2] {
                return Err(KillingError::Collision { x, y });
            }
            let l = m.jets(x, y, 1, None)?.lambda;
            out[2 * k] = -w;
            out[2 * k + 1] = -(w * w + 1.0) * (l.d(1, 0) + w * l.d(0, 1));
        }
        Ok(out)
    };
    let steps = opts.aligned_steps();
    let fine = march_rows(&rhs, y0, height, &start, steps, opts.rows)?;
    let coarse = march_rows(&rhs, y0, height, &start, steps / 2, opts.rows)?;
    for (j, row) in fine.iter().enumerate() {
        if let Some(k) = (1..n).find(|&k| row[2 * k] <= row[2 * k - 2]) {
            return Err(KillingError::Collision { x: row[2 * k], y: y0 + height * j as f64 / (opts.rows - 1) as f64 });
        }
    }
    let lo = fine.iter().map(|r| r[0]).fold(f64::NEG_INFINITY, f64::max);
    let hi = fine.iter().map(|r| r[2 * n - 2]).fold(f64::INFINITY, f64::min);
    if !(lo < hi) {
        return Err(KillingError::Breakdown { x: x_range.0, y: y0 + height, msg: "characteristics leave no common x-interval".into() });
    }
    let grid = Grid::new(Domain::new(lo, hi, y0, y0 + height)?, opts.cols, opts.rows);
    let resample = |rows: &[Vec<f64>]| {
        let mut vals = vec![0.0; grid.len()];
        for (j, row) in rows.iter().enumerate() {
            let xs: Vec<f64> = (0..n).map(|k| row[2 * k]).collect();
            let ws: Vec<f64> = (0..n).map(|k| row[2 * k + 1]).collect();
            for i in 0..grid.nx {
                vals[grid.index(i, j)] = interpolate(&xs, &ws, grid.x(i));
            }
        }
        vals
    };
    let wf = resample(&fine);
    let error_estimate = wf.iter().zip(resample(&coarse)).fold(0.0f64, |e, (a, b)| e.max((a - b).abs())) / 15.0;
    let w = GridField::new(grid, wf);
    let (mut av, mut bv) = (vec![0.0; grid.len()], vec![0.0; grid.len()]);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let (x, y) = (grid.x(i), grid.y(j));
            let l = m.jets(x, y, 1, None)?.lambda;
            let wj = super::ScalarField::jet(&w, x, y, 1)?;
            let (wv, wx) = (wj.value(), wj.d(1, 0));
            let s = l.d(1, 0) + wv * l.d(0, 1);
            av[grid.index(i, j)] = -s;
            bv[grid.index(i, j)] = wv * s - wx;
        }
    }
    Ok(CharacteristicSolution { w, a: GridField::new(grid, av), b: GridField::new(grid, bv), error_estimate })
}
