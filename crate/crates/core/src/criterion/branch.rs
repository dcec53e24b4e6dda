//! Global `w`-branches: EQ1 continuation between grid nodes with snapping to roots of Eq0,
//! and the cofactor `(a, 0)` with `a_y = w` rebuilt from a branch.

use serde::Serialize;

use super::specialize::CompiledSystem;
use super::CriterionError;
use crate::geometry::{Grid, MetricSpec};
use crate::killing::{CofactorField, CofactorSample, GridField, KillingError, ScalarField};

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BranchOptions {
    /// A predicted value must land within `snap_tol·(1 + |w|)` of a real root.
    pub snap_tol: f64,
    /// RK4 substeps between neighbouring nodes.
    pub substeps: usize,
    /// Imaginary-part tolerance when collecting real roots.
    pub real_tol: f64,
}

impl Default for BranchOptions {
    fn default() -> Self {
        BranchOptions { snap_tol: 1e-3, substeps: 4, real_tol: 1e-7 }
    }
}

/// A branch of `w` on the grid, with its EQ1 gradient.
#[derive(Clone, Debug)]
pub struct Branch {
    pub w: GridField,
    pub w_x: GridField,
    pub w_y: GridField,
    pub seed: f64,
    pub base: (usize, usize),
    /// Largest `|root − prediction| / (1 + |root|)` over all nodes.
    pub max_snap: f64,
    /// Largest residual of Eq0', Eq0'', Eq0''' along the branch.
    pub max_member_residual: f64,
}

fn eq1_gradient(sys: &CompiledSystem, m: &MetricSpec, x: f64, y: f64, w: f64) -> Result<(f64, f64), CriterionError> {
    let [nx, ny, den] = sys.eq1_at(m, x, y)?;
    let d = den.eval(w);
    if d.abs() <= 1e-14 * den.magnitude(w.abs()) {
        return Err(CriterionError::Singular { x, y, w });
    }
    Ok((nx.eval(w) / d, ny.eval(w) / d))
}

fn rk4_leg(sys: &CompiledSystem, m: &MetricSpec, from: (f64, f64), to: (f64, f64), w: f64, substeps: usize) -> Result<f64, CriterionError> {
    let n = substeps.max(1);
    let (dx, dy) = ((to.0 - from.0) / n as f64, (to.1 - from.1) / n as f64);
    // derivative of w along the leg direction
    let f = |t: f64, w: f64| -> Result<f64, CriterionError> {
        let (wx, wy) = eq1_gradient(sys, m, from.0 + t * (to.0 - from.0), from.1 + t * (to.1 - from.1), w)?;
        Ok(wx * dx + wy * dy)
    };
    let h = 1.0 / n as f64;
    let mut w = w;
    for s in 0..n {
        let t = s as f64 * h;
        let k1 = f(t, w)?;
        let k2 = f(t + 0.5 * h, w + 0.5 * k1)?;
        let k3 = f(t + 0.5 * h, w + 0.5 * k2)?;
        let k4 = f(t + h, w + k3)?;
        w += (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
    }
    Ok(w)
}

struct NodeState {
    w: f64,
    wx: f64,
    wy: f64,
    snap: f64,
    member: f64,
}

/// Nearest real root of the deflated Eq0 to `predicted`.
fn snap(sys: &CompiledSystem, m: &MetricSpec, x: f64, y: f64, predicted: f64, opts: &BranchOptions) -> Result<NodeState, CriterionError> {
    let s = sys.specialize(m, x, y)?;
    let root = s
        .eq0_deflated
        .real_roots(opts.real_tol)
        .into_iter()
        .min_by(|a, b| (a - predicted).abs().total_cmp(&(b - predicted).abs()))
        .ok_or(CriterionError::NoRealRoot { x, y })?;
    let snap = (root - predicted).abs() / (1.0 + root.abs());
    if snap > opts.snap_tol {
        return Err(CriterionError::BranchLost { x, y, predicted, nearest: root });
    }
    let (wx, wy) = s.gradient(root);
    if !(wx.is_finite() && wy.is_finite()) {
        return Err(CriterionError::Singular { x, y, w: root });
    }
    let member = s.residuals(root)[1..].iter().copied().fold(0.0, f64::max);
    Ok(NodeState { w: root, wx, wy, snap, member })
}

/// Continues the root `w0` of Eq0 at node `base` over the whole grid: first along the base
/// row, then up and down every column, predicting each node with EQ1 and snapping to the
/// nearest real root of Eq0 there.
pub fn propagate_branch(sys: &CompiledSystem, m: &MetricSpec, grid: &Grid, base: (usize, usize), w0: f64, opts: &BranchOptions) -> Result<Branch, CriterionError> {
    let n = grid.len();
    let mut nodes: Vec<Option<NodeState>> = (0..n).map(|_| None).collect();
    let (bi, bj) = base;
    let first = snap(sys, m, grid.x(bi), grid.y(bj), w0, opts)?;
    nodes[grid.index(bi, bj)] = Some(first);
    let step = |nodes: &mut Vec<Option<NodeState>>, from: (usize, usize), to: (usize, usize)| -> Result<(), CriterionError> {
        let w = nodes[grid.index(from.0, from.1)].as_ref().expect("marched in order").w;
        let p0 = (grid.x(from.0), grid.y(from.1));
        let p1 = (grid.x(to.0), grid.y(to.1));
        let predicted = rk4_leg(sys, m, p0, p1, w, opts.substeps)?;
        nodes[grid.index(to.0, to.1)] = Some(snap(sys, m, p1.0, p1.1, predicted, opts)?);
        Ok(())
    };
    for i in (bi + 1)..grid.nx {
        step(&mut nodes, (i - 1, bj), (i, bj))?;
    }
    for i in (0..bi).rev() {
        step(&mut nodes, (i + 1, bj), (i, bj))?;
    }
    for i in 0..grid.nx {
        for j in (bj + 1)..grid.ny {
            step(&mut nodes, (i, j - 1), (i, j))?;
        }
        for j in (0..bj).rev() {
            step(&mut nodes, (i, j + 1), (i, j))?;
        }
    }
    let nodes: Vec<NodeState> = nodes.into_iter().map(|s| s.expect("every node visited")).collect();
    let field = |f: fn(&NodeState) -> f64| GridField::new(*grid, nodes.iter().map(f).collect());
    Ok(Branch {
        w: field(|s| s.w),
        w_x: field(|s| s.wx),
        w_y: field(|s| s.wy),
        seed: w0,
        base,
        max_snap: nodes.iter().map(|s| s.snap).fold(0.0, f64::max),
        max_member_residual: nodes.iter().map(|s| s.member).fold(0.0, f64::max),
    })
}

/// `max |w|` below which a branch counts as the closed-cofactor case.
pub const W_FLOOR: f64 = 1e-8;
/// Allowed `max |a_y − w| / max |w|` for a reconstructed cofactor.
pub const CONSISTENCY_TOL: f64 = 1e-4;

/// Cofactor `L = e^{−2λ} a p` rebuilt from a branch, so `b = 0` and `ρ = −w`.
#[derive(Clone, Debug)]
pub struct BranchCofactor {
    pub a: GridField,
    pub w: GridField,
    pub w_x: GridField,
    pub w_y: GridField,
    /// `max |a_y − w| / max |w|` with `a_y` from 5-point stencils.
    pub consistency: f64,
}

/// Integrates `a_y = w` up and down each column from `base_row`, where `a = 0`.
/// The cubic Hermite rule uses the EQ1 values of `w_y` at both ends of every cell.
pub fn reconstruct_cofactor(branch: &Branch, base_row: usize) -> Result<BranchCofactor, CriterionError> {
    let grid = branch.w.grid;
    let wmax = branch.w.max_abs();
    if wmax < W_FLOOR {
        return Err(CriterionError::WNearZero(wmax));
    }
    let h = grid.hy();
    let mut a = vec![0.0; grid.len()];
    let cell = |i: usize, j0: usize, j1: usize| {
        let (w0, w1) = (branch.w.at(i, j0), branch.w.at(i, j1));
        let (d0, d1) = (branch.w_y.at(i, j0), branch.w_y.at(i, j1));
        0.5 * h * (w0 + w1) + h * h / 12.0 * (d0 - d1)
    };
    for i in 0..grid.nx {
        for j in (base_row + 1)..grid.ny {
            a[grid.index(i, j)] = a[grid.index(i, j - 1)] + cell(i, j - 1, j);
        }
        for j in (0..base_row).rev() {
            a[grid.index(i, j)] = a[grid.index(i, j + 1)] - cell(i, j, j + 1);
        }
    }
    let a = GridField::new(grid, a);
    let mut worst = 0.0f64;
    for (x, y) in grid.points() {
        let ay = a.jet(x, y, 1)?.d(0, 1);
        worst = worst.max((ay - branch.w.value(x, y)?).abs());
    }
    let consistency = worst / wmax;
    if consistency > CONSISTENCY_TOL {
        return Err(CriterionError::Inconsistent(consistency));
    }
    Ok(BranchCofactor { a, w: branch.w.clone(), w_x: branch.w_x.clone(), w_y: branch.w_y.clone(), consistency })
}

impl CofactorField for BranchCofactor {
    fn sample(&self, x: f64, y: f64) -> Result<CofactorSample, KillingError> {
        Ok(CofactorSample {
            a: self.a.value(x, y)?,
            b: 0.0,
            rho: -self.w.value(x, y)?,
            rho_x: -self.w_x.value(x, y)?,
            rho_y: -self.w_y.value(x, y)?,
        })
    }

    fn ab(&self, x: f64, y: f64) -> Result<(f64, f64), KillingError> {
        Ok((self.a.value(x, y)?, 0.0))
    }
}
