//! Relative Killing vectors for a known cofactor, and the dimension of their space.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{rkv_residuals, CofactorField, CovectorField, GridField, KillingError, ScalarField};
use crate::geometry::{Grid, MetricSpec};

type Rhs<'a> = dyn Fn(f64, f64, &[f64]) -> Result<Vec<f64>, KillingError> + 'a;

fn rk4_step(f: &Rhs, x: f64, y: f64, s: &[f64], h: f64, along_x: bool) -> Result<Vec<f64>, KillingError> {
    let at = |t: f64| if along_x { (x + t, y) } else { (x, y + t) };
    let shift = |s: &[f64], k: &[f64], c: f64| s.iter().zip(k).map(|(a, b)| a + c * b).collect::<Vec<_>>();
    let (x1, y1) = at(0.0);
    let k1 = f(x1, y1, s)?;
    let (x2, y2) = at(0.5 * h);
    let k2 = f(x2, y2, &shift(s, &k1, 0.5 * h))?;
    let k3 = f(x2, y2, &shift(s, &k2, 0.5 * h))?;
    let (x4, y4) = at(h);
    let k4 = f(x4, y4, &shift(s, &k3, h))?;
    Ok((0..s.len()).map(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}

/// Integrates along the base row, then along every column; returns the state at each node.
fn march_grid(fx: &Rhs, fy: &Rhs, grid: &Grid, base: (usize, usize), init: &[f64], substeps: usize) -> Result<Vec<Vec<f64>>, KillingError> {
    let mut out = vec![Vec::new(); grid.len()];
    let (i0, j0) = base;
    let mut row = vec![Vec::new(); grid.nx];
    row[i0] = init.to_vec();
    let y0 = grid.y(j0);
    for dir in [1isize, -1] {
        let mut i = i0 as isize;
        let mut s = init.to_vec();
        while (0..grid.nx as isize).contains(&(i + dir)) {
            let x = grid.x(i as usize);
            let h = (grid.x((i + dir) as usize) - x) / substeps as f64;
            for k in 0..substeps {
                s = rk4_step(fx, x + k as f64 * h, y0, &s, h, true)?;
            }
            i += dir;
            row[i as usize] = s.clone();
        }
    }
    for (i, start) in row.into_iter().enumerate() {
        let x = grid.x(i);
        out[grid.index(i, j0)] = start.clone();
        for dir in [1isize, -1] {
            let mut j = j0 as isize;
            let mut s = start.clone();
            while (0..grid.ny as isize).contains(&(j + dir)) {
                let y = grid.y(j as usize);
                let h = (grid.y((j + dir) as usize) - y) / substeps as f64;
                for k in 0..substeps {
                    s = rk4_step(fy, x, y + k as f64 * h, &s, h, false)?;
                }
                j += dir;
                out[grid.index(i, j as usize)] = s.clone();
            }
        }
    }
    Ok(out)
}

/// Smallest `|ρ|` accepted by the prolonged system.
pub const RHO_MIN: f64 = 1e-10;

/// Right-hand side of the closed first-order system for `(u, v)` when `ρ ≠ 0`:
/// `(u_x, v_x, u_y, v_y)`.
fn prolonged(m: &MetricSpec, cof: &dyn CofactorField, x: f64, y: f64, u: f64, v: f64) -> Result<[f64; 4], KillingError> {
    let j = m.jets(x, y, 1, Some(1))?;
    let (lx, ly) = (j.lambda.d(1, 0), j.lambda.d(0, 1));
    let k = j.k();
    let c = cof.sample(x, y)?;
    if c.rho.abs() < RHO_MIN {
        return Err(KillingError::RhoVanishes { x, y });
    }
    let t = j.e2l / (3.0 * c.rho) * (k.d(1, 0) * u + k.d(0, 1) * v);
    let py = (ly + c.rho_y / c.rho) / 3.0;
    let px = (lx + c.rho_x / c.rho) / 3.0;
    Ok([
        -(c.a + lx) * u - ly * v,
        t + py * u - (c.a + px) * v,
        -t - (c.b + py) * u + px * v,
        -lx * u - (c.b + ly) * v,
    ])
}

#[derive(Clone, Debug)]
pub struct RkvSolution {
    pub u: GridField,
    pub v: GridField,
}

impl RkvSolution {
    pub fn covector(&self) -> CovectorField {
        CovectorField::new(std::sync::Arc::new(self.u.clone()), std::sync::Arc::new(self.v.clone()))
    }
}

/// Marches the prolonged system from `base` with Cauchy data `(u₀, v₀)`.
pub fn solve_rkv_given_cofactor(
    m: &MetricSpec,
    cof: &dyn CofactorField,
    grid: &Grid,
    base: (usize, usize),
    cauchy: (f64, f64),
    substeps: usize,
) -> Result<RkvSolution, KillingError> {
    let fx = |x: f64, y: f64, s: &[f64]| -> Result<Vec<f64>, KillingError> {
        let d = prolonged(m, cof, x, y, s[0], s[1])?;
        Ok(vec![d[0], d[1]])
    };
    let fy = |x: f64, y: f64, s: &[f64]| -> Result<Vec<f64>, KillingError> {
        let d = prolonged(m, cof, x, y, s[0], s[1])?;
        Ok(vec![d[2], d[3]])
    };
    let states = march_grid(&fx, &fy, grid, base, &[cauchy.0, cauchy.1], substeps)?;
    Ok(RkvSolution {
        u: GridField::new(*grid, states.iter().map(|s| s[0]).collect()),
        v: GridField::new(*grid, states.iter().map(|s| s[1]).collect()),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DimensionReport {
    pub dim: usize,
    /// Singular values of the residual matrix, scaled by the solution size.
    pub residual_singular_values: Vec<f64>,
    /// Singular values of the matrix of sampled solutions.
    pub solution_singular_values: Vec<f64>,
    /// Smallest solution singular value over the largest residual one.
    pub gap: f64,
    pub tol: f64,
}

fn singular_values(rows: usize, cols: &[Vec<f64>]) -> Vec<f64> {
    let m = DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]);
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Residual and solution columns for a family of marched basis solutions.
fn dimension_from(m: &MetricSpec, cof: &dyn CofactorField, grid: &Grid, basis: &[RkvSolution], tol: f64) -> Result<DimensionReport, KillingError> {
    let margin = 2;
    let mut res_cols = Vec::new();
    let mut sol_cols = Vec::new();
    let mut nodes = Vec::new();
    for j in margin..grid.ny - margin {
        for i in margin..grid.nx - margin {
            nodes.push((grid.x(i), grid.y(j)));
        }
    }
    for sol in basis {
        let r = sol.covector();
        let scale = sol.u.max_abs().max(sol.v.max_abs()).max(1e-300);
        let mut col = Vec::with_capacity(3 * nodes.len());
        let mut scol = Vec::with_capacity(2 * nodes.len());
        for &(x, y) in &nodes {
            col.extend(rkv_residuals(m, &r, cof, x, y)?.iter().map(|v| v / scale));
            scol.push(sol.u.value(x, y)?);
            scol.push(sol.v.value(x, y)?);
        }
        res_cols.push(col);
        sol_cols.push(scol);
    }
    let rn = (3 * nodes.len()) as f64;
    let sn = (2 * nodes.len()) as f64;
    let rs: Vec<f64> = singular_values(3 * nodes.len(), &res_cols).into_iter().map(|s| s / rn.sqrt()).collect();
    let ss: Vec<f64> = singular_values(2 * nodes.len(), &sol_cols).into_iter().map(|s| s / sn.sqrt()).collect();
    let rank = rs.iter().filter(|&&s| s > tol).count();
    let smin = ss.last().copied().unwrap_or(0.0);
    let scale = sol_cols.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let gap = (smin / scale) / rs.first().copied().unwrap_or(0.0).max(1e-300);
    Ok(DimensionReport { dim: basis.len() - rank, residual_singular_values: rs, solution_singular_values: ss, gap, tol })
}

/// Dimension of the space of relative Killing vectors for a cofactor with `ρ ≠ 0`
/// on a patch: basis columns minus the rank of the residual matrix.
pub fn rkv_dimension(m: &MetricSpec, cof: &dyn CofactorField, grid: &Grid, tol: f64) -> Result<DimensionReport, KillingError> {
    let base = (grid.nx / 2, grid.ny / 2);
    let basis = [(1.0, 0.0), (0.0, 1.0)]
        .into_iter()
        .map(|c| solve_rkv_given_cofactor(m, cof, grid, base, c, 4))
        .collect::<Result<Vec<_>, _>>()?;
    dimension_from(m, cof, grid, &basis, tol)
}

/// Dimension of the space of Killing vectors (`L = 0`): three Cauchy scalars `(u, v, ω)`
/// with `ω = u_y − v_x`, marched and tested the same way.
pub fn killing_dimension(m: &MetricSpec, grid: &Grid, tol: f64) -> Result<DimensionReport, KillingError> {
    let sig = |x: f64, y: f64, s: &[f64]| -> Result<(f64, f64, f64, [f64; 5]), KillingError> {
        let l = m.jets(x, y, 2, None)?.lambda;
        let d = [l.d(1, 0), l.d(0, 1), l.d(2, 0), l.d(1, 1), l.d(0, 2)];
        let sigma = d[0] * s[0] + d[1] * s[1];
        let sx = d[2] * s[0] - d[0] * sigma + d[3] * s[1] - d[1] * s[2] / 2.0;
        let sy = d[3] * s[0] + d[0] * s[2] / 2.0 + d[4] * s[1] - d[1] * sigma;
        Ok((sigma, sx, sy, d))
    };
    let fx = |x: f64, y: f64, s: &[f64]| -> Result<Vec<f64>, KillingError> {
        let (sigma, _, sy, _) = sig(x, y, s)?;
        Ok(vec![-sigma, -s[2] / 2.0, -2.0 * sy])
    };
    let fy = |x: f64, y: f64, s: &[f64]| -> Result<Vec<f64>, KillingError> {
        let (sigma, sx, _, _) = sig(x, y, s)?;
        Ok(vec![s[2] / 2.0, -sigma, 2.0 * sx])
    };
    let base = (grid.nx / 2, grid.ny / 2);
    let mut basis = Vec::new();
    for init in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
        let st = march_grid(&fx, &fy, grid, base, &init, 4)?;
        basis.push(RkvSolution {
            u: GridField::new(*grid, st.iter().map(|s| s[0]).collect()),
            v: GridField::new(*grid, st.iter().map(|s| s[1]).collect()),
        });
    }
    dimension_from(m, &super::Cofactor::zero(), grid, &basis, tol)
}
