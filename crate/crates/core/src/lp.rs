//! Dense linear programming and non-negative least squares.
//!
//! [`solve`] runs a two-phase revised simplex on `min c·x, Ax = b, x >= 0`
//! with an explicit basis inverse. Columns are rescaled to unit Euclidean
//! norm first. Pricing is Dantzig's rule, switching to Bland's rule after a
//! run of degenerate pivots until progress resumes.
//!
//! [`nnls`] is a Lawson–Hanson active-set solver with an optional ridge term.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Primal feasibility tolerance on the scaled problem.
pub const FEAS_TOL: f64 = 1e-9;
/// Reduced-cost tolerance on the scaled problem, relative to `max |c|`.
pub const OPT_TOL: f64 = 1e-9;
/// Smallest admissible ratio-test pivot.
const PIVOT_TOL: f64 = 1e-9;
/// Singularity threshold for refactorization.
const SINGULAR_TOL: f64 = 1e-12;
const REFACTOR_EVERY: usize = 50;
const DEGENERATE_RUN: usize = 100;
/// Relative size of an `R` diagonal entry treated as rank loss.
const RANK_TOL: f64 = 1e-11;

/// `min c·x` subject to `A x = b`, `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardLp {
    pub c: Vec<f64>,
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
}

impl StandardLp {
    pub fn new(c: Vec<f64>, a: DMatrix<f64>, b: Vec<f64>) -> Result<Self> {
        if a.ncols() != c.len() || a.nrows() != b.len() {
            return Err(Error::InvalidInput(format!(
                "LP shape mismatch: A is {}x{}, c has {}, b has {}",
                a.nrows(),
                a.ncols(),
                c.len(),
                b.len()
            )));
        }
        if c.iter().chain(a.iter()).chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("LP data must be finite".into()));
        }
        Ok(StandardLp { c, a, b })
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal solution; zero unless optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Basic structural columns, ascending.
    pub basis: Vec<usize>,
    /// Equality-row multipliers `y` with `c - A^T y >= 0` at optimality.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    fn terminal(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        LpSolution {
            status,
            x: vec![0.0; n],
            objective: match status {
                LpStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            basis: Vec::new(),
            duals: vec![0.0; m],
            iterations,
        }
    }
}

struct Simplex {
    m: usize,
    n: usize,
    /// Scaled structural columns, column-major `m x n`.
    cols: Vec<f64>,
    scale: Vec<f64>,
    cost: Vec<f64>,
    b: Vec<f64>,
    /// Basis inverse, row-major `m x m`.
    binv: Vec<f64>,
    /// Basic variable per row; indices `>= n` are artificials.
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    xb: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
}

enum Phase {
    One,
    Two,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Simplex {
    fn new(lp: &StandardLp) -> Self {
        let (m, n) = (lp.rows(), lp.cols());
        let mut cols = vec![0.0; m * n];
        let mut scale = vec![1.0; n];
        let flip: Vec<f64> = lp.b.iter().map(|v| if *v < 0.0 { -1.0 } else { 1.0 }).collect();
        for j in 0..n {
            let col = lp.a.column(j);
            let norm = col.norm();
            let s = if norm > 0.0 { norm } else { 1.0 };
            scale[j] = s;
            for i in 0..m {
                cols[j * m + i] = flip[i] * col[i] / s;
            }
        }
        let cost = (0..n).map(|j| lp.c[j] / scale[j]).collect();
        let b: Vec<f64> = lp.b.iter().map(|v| v.abs()).collect();
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let mut in_basis = vec![false; n + m];
        for flag in in_basis.iter_mut().skip(n) {
            *flag = true;
        }
        Simplex {
            m,
            n,
            cols,
            scale,
            cost,
            xb: b.clone(),
            b,
            binv,
            basis: (n..n + m).collect(),
            in_basis,
            iterations: 0,
            max_iterations: 50 * (m + n) + 1000,
        }
    }

    fn column(&self, j: usize) -> Vec<f64> {
        if j < self.n {
            self.cols[j * self.m..(j + 1) * self.m].to_vec()
        } else {
            let mut e = vec![0.0; self.m];
            e[j - self.n] = 1.0;
            e
        }
    }

    fn phase_cost(&self, j: usize, phase: &Phase) -> f64 {
        match phase {
            Phase::One => {
                if j >= self.n {
                    1.0
                } else {
                    0.0
                }
            }
            Phase::Two => {
                if j >= self.n {
                    0.0
                } else {
                    self.cost[j]
                }
            }
        }
    }

    /// `y^T = c_B^T B^{-1}`.
    fn duals(&self, phase: &Phase) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &bj) in self.basis.iter().enumerate() {
            let cb = self.phase_cost(bj, phase);
            if cb != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for i in 0..m {
                    y[i] += cb * row[i];
                }
            }
        }
        y
    }

    /// Reduced cost of column `j` and the magnitude of the terms behind it.
    fn reduced_cost(&self, j: usize, y: &[f64], phase: &Phase) -> (f64, f64) {
        let c = self.phase_cost(j, phase);
        if j < self.n {
            let col = &self.cols[j * self.m..(j + 1) * self.m];
            let (dot, mag) = col
                .iter()
                .zip(y)
                .fold((0.0, 0.0), |(s, g), (a, b)| (s + a * b, g + (a * b).abs()));
            (c - dot, c.abs().max(mag))
        } else {
            let v = y[j - self.n];
            (c - v, c.abs().max(v.abs()))
        }
    }

    /// `B^{-1} a`.
    fn ftran(&self, a: &[f64]) -> Vec<f64> {
        let m = self.m;
        (0..m)
            .map(|r| {
                self.binv[r * m..(r + 1) * m]
                    .iter()
                    .zip(a)
                    .map(|(p, q)| p * q)
                    .sum()
            })
            .collect()
    }

    fn pivot(&mut self, r: usize, entering: usize, alpha: &[f64]) {
        let m = self.m;
        let p = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= p;
        }
        let theta = self.xb[r] / p;
        for i in 0..m {
            if i != r && alpha[i] != 0.0 {
                let f = alpha[i];
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[r * m + k];
                }
                self.xb[i] -= theta * f;
                if self.xb[i] < 0.0 && self.xb[i] > -FEAS_TOL {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[r] = theta;
        self.in_basis[self.basis[r]] = false;
        self.basis[r] = entering;
        self.in_basis[entering] = true;
        self.iterations += 1;
        if self.iterations % REFACTOR_EVERY == 0 {
            // a failed refactorization keeps the updated inverse
            let _ = self.refactor();
        }
    }

    /// Rebuilds `B^{-1}` by Gauss–Jordan elimination with partial pivoting.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut bmat = vec![0.0; m * m];
        for (r, &j) in self.basis.iter().enumerate() {
            let col = self.column(j);
            for i in 0..m {
                bmat[i * m + r] = col[i];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let (pr, pv) = (c..m)
                .map(|r| (r, bmat[r * m + c].abs()))
                .fold((c, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pv < SINGULAR_TOL {
                return Err(Error::NumericalFailure(format!(
                    "basis matrix is singular (pivot {pv:.2e})"
                )));
            }
            if pr != c {
                for k in 0..m {
                    bmat.swap(pr * m + k, c * m + k);
                    inv.swap(pr * m + k, c * m + k);
                }
            }
            let p = bmat[c * m + c];
            for k in 0..m {
                bmat[c * m + k] /= p;
                inv[c * m + k] /= p;
            }
            for r in 0..m {
                if r != c {
                    let f = bmat[r * m + c];
                    if f != 0.0 {
                        for k in 0..m {
                            bmat[r * m + k] -= f * bmat[c * m + k];
                            inv[r * m + k] -= f * inv[c * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.xb = self.ftran(&self.b.clone());
        for v in self.xb.iter_mut() {
            if *v < 0.0 && *v > -FEAS_TOL {
                *v = 0.0;
            }
        }
        Ok(())
    }

    fn run(&mut self, phase: Phase) -> Result<Outcome> {
        let allow_artificial = matches!(phase, Phase::One);
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(Error::NonConvergence(self.iterations));
            }
            let bland = degenerate_run >= DEGENERATE_RUN;
            let y = self.duals(&phase);
            let limit = if allow_artificial { self.n + self.m } else { self.n };
            let mut entering = None;
            let mut best = 0.0;
            for j in 0..limit {
                if self.in_basis[j] {
                    continue;
                }
                // relative per column: costs can span many orders of magnitude
                let (dj, mag) = self.reduced_cost(j, &y, &phase);
                if dj < -OPT_TOL * mag.max(1.0) && dj < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = dj;
                }
            }
            let Some(q) = entering else {
                return Ok(Outcome::Optimal);
            };
            let alpha = self.ftran(&self.column(q));
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.m {
                if alpha[i] > PIVOT_TOL {
                    let ratio = self.xb[i].max(0.0) / alpha[i];
                    let tie = (ratio - best_ratio).abs() <= 1e-12 * (1.0 + best_ratio.abs());
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            if tie {
                                if bland {
                                    self.basis[i] < self.basis[l]
                                } else {
                                    // prefer artificials, then larger pivots
                                    let ai = self.basis[i] >= self.n;
                                    let al = self.basis[l] >= self.n;
                                    (ai && !al) || (ai == al && alpha[i] > alpha[l])
                                }
                            } else {
                                ratio < best_ratio
                            }
                        }
                    };
                    if better {
                        leave = Some(i);
                        best_ratio = if tie { best_ratio.min(ratio) } else { ratio };
                    }
                }
            }
            let Some(r) = leave else {
                return Ok(Outcome::Unbounded);
            };
            if alpha[r].abs() < SINGULAR_TOL {
                return Err(Error::NumericalFailure(format!(
                    "pivot magnitude {:.2e} too small",
                    alpha[r]
                )));
            }
            if best_ratio <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, q, &alpha);
        }
    }

    /// Pivots basic artificials out where a structural column can replace them.
    fn expel_artificials(&mut self) {
        for r in 0..self.m {
            if self.basis[r] < self.n {
                continue;
            }
            let m = self.m;
            let row = self.binv[r * m..(r + 1) * m].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.in_basis[j] {
                    continue;
                }
                let col = &self.cols[j * m..(j + 1) * m];
                let v: f64 = row.iter().zip(col).map(|(a, b)| a * b).sum();
                if v.abs() > PIVOT_TOL && best.map_or(true, |(_, bv)| v.abs() > bv) {
                    best = Some((j, v.abs()));
                }
            }
            if let Some((j, _)) = best {
                let alpha = self.ftran(&self.column(j));
                self.pivot(r, j, &alpha);
            }
            // otherwise the row is redundant and its artificial stays at zero
        }
    }
}

/// Solves a standard-form LP. Infeasible and unbounded problems are reported
/// through [`LpSolution::status`].
pub fn solve(lp: &StandardLp) -> Result<LpSolution> {
    let (m, n) = (lp.rows(), lp.cols());
    if m == 0 {
        // min c·x over x >= 0
        if lp.c.iter().any(|c| *c < 0.0) {
            return Ok(LpSolution::terminal(LpStatus::Unbounded, n, m, 0));
        }
        return Ok(LpSolution {
            status: LpStatus::Optimal,
            x: vec![0.0; n],
            objective: 0.0,
            basis: Vec::new(),
            duals: Vec::new(),
            iterations: 0,
        });
    }
    let mut s = Simplex::new(lp);
    let bscale = s.b.iter().fold(1.0f64, |a, v| a.max(*v));

    s.run(Phase::One)?;
    s.refactor()?;
    let infeas: f64 = s
        .basis
        .iter()
        .zip(&s.xb)
        .filter(|(j, _)| **j >= n)
        .map(|(_, v)| *v)
        .sum();
    if infeas > FEAS_TOL * bscale * m as f64 {
        return Ok(LpSolution::terminal(LpStatus::Infeasible, n, m, s.iterations));
    }
    s.expel_artificials();
    s.refactor()?;

    if let Outcome::Unbounded = s.run(Phase::Two)? {
        return Ok(LpSolution::terminal(LpStatus::Unbounded, n, m, s.iterations));
    }
    s.refactor()?;

    let mut x = vec![0.0; n];
    for (r, &j) in s.basis.iter().enumerate() {
        if j < n {
            x[j] = s.xb[r].max(0.0) / s.scale[j];
        }
    }
    let flip: Vec<f64> = lp.b.iter().map(|v| if *v < 0.0 { -1.0 } else { 1.0 }).collect();
    let y = s.duals(&Phase::Two);
    let duals: Vec<f64> = y.iter().zip(&flip).map(|(a, f)| a * f).collect();
    let objective = lp.c.iter().zip(&x).map(|(c, v)| c * v).sum();
    let mut basis: Vec<usize> = s.basis.iter().copied().filter(|j| *j < n).collect();
    basis.sort_unstable();

    let residual = primal_residual(lp, &x);
    if residual > 1e-7 * bscale {
        return Err(Error::NumericalFailure(format!(
            "simplex solution violates the equalities by {residual:.2e}"
        )));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        basis,
        duals,
        iterations: s.iterations,
    })
}

/// `max_i |(A x - b)_i|`.
pub fn primal_residual(lp: &StandardLp, x: &[f64]) -> f64 {
    let ax = &lp.a * DVector::from_column_slice(x);
    ax.iter()
        .zip(&lp.b)
        .map(|(l, r)| (l - r).abs())
        .fold(0.0, f64::max)
}

/// Reduced costs `c - A^T y`.
pub fn reduced_costs(lp: &StandardLp, y: &[f64]) -> Vec<f64> {
    let aty = lp.a.transpose() * DVector::from_column_slice(y);
    lp.c.iter().zip(aty.iter()).map(|(c, v)| c - v).collect()
}

/// Result of a non-negative least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub beta: Vec<f64>,
    /// Largest violation of the optimality conditions in gradient units.
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Minimizes `|target - design β|^2 + ridge |β|^2` over `β >= 0`.
pub fn nnls(design: &DMatrix<f64>, target: &[f64], ridge: f64) -> Result<NnlsSolution> {
    let (m, n) = design.shape();
    if target.len() != m {
        return Err(Error::InvalidInput(format!(
            "design has {m} rows but target has {}",
            target.len()
        )));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidInput(format!("ridge must be >= 0, got {ridge}")));
    }
    if design.iter().chain(target).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("NNLS data must be finite".into()));
    }
    let t = DVector::from_column_slice(target);
    let at_t = design.transpose() * &t;
    let scale = design.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300)
        * t.amax().max(1.0)
        * (m.max(1) as f64);
    let tol = 1e-12 * scale.max(1.0);

    let gradient = |beta: &DVector<f64>| -> DVector<f64> {
        // negative half-gradient: A^T (t - A β) - λ β
        &at_t - design.transpose() * (design * beta) - beta * ridge
    };

    let mut beta = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let mut w = gradient(&beta);
    let cap = 50 * n.max(1);
    let mut iterations = 0usize;
    let mut blocked: Option<usize> = None;

    loop {
        let candidate = (0..n)
            .filter(|j| !passive[*j] && Some(*j) != blocked)
            .filter(|j| w[*j] > tol)
            .max_by(|a, b| w[*a].total_cmp(&w[*b]));
        let Some(t_idx) = candidate else { break };
        passive[t_idx] = true;
        let mut first = true;
        loop {
            iterations += 1;
            if iterations > cap {
                return Err(Error::NonConvergence(cap));
            }
            let idx: Vec<usize> = (0..n).filter(|j| passive[*j]).collect();
            let z = passive_least_squares(design, &t, ridge, &idx)?;
            if z.iter().all(|v| *v > 0.0) {
                for (k, &j) in idx.iter().enumerate() {
                    beta[j] = z[k];
                }
                blocked = None;
                break;
            }
            if first && z[idx.iter().position(|j| *j == t_idx).unwrap()] <= 0.0 {
                // the new variable cannot enter; numerical ties in w
                passive[t_idx] = false;
                blocked = Some(t_idx);
                break;
            }
            first = false;
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if z[k] <= 0.0 {
                    let denom = beta[j] - z[k];
                    if denom > 0.0 {
                        alpha = alpha.min(beta[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &j) in idx.iter().enumerate() {
                beta[j] += alpha * (z[k] - beta[j]);
            }
            for &j in &idx {
                if beta[j] <= 1e-15 * scale.max(1.0) {
                    beta[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
        w = gradient(&beta);
    }

    let kkt_residual = (0..n)
        .map(|j| if beta[j] > 0.0 { w[j].abs() } else { w[j].max(0.0) })
        .fold(0.0, f64::max);
    Ok(NnlsSolution {
        beta: beta.iter().copied().collect(),
        kkt_residual,
        iterations,
    })
}

/// Ridge least squares restricted to the columns `idx`.
///
/// Householder QR handles both shapes: `[A_P; √λ I]` when the block is tall,
/// and `A_P^T = QR` when it is wide, giving `z = Q (R^T R + λ I)^{-1} R^T t`
/// (the minimum-norm solution at `λ = 0`). Numerically rank-deficient blocks
/// at `λ = 0` fall back to a truncated SVD.
fn passive_least_squares(
    design: &DMatrix<f64>,
    t: &DVector<f64>,
    ridge: f64,
    idx: &[usize],
) -> Result<Vec<f64>> {
    let m = design.nrows();
    let p = idx.len();
    let mut a = DMatrix::<f64>::zeros(m, p);
    for (k, &j) in idx.iter().enumerate() {
        a.set_column(k, &design.column(j));
    }
    let z = if p <= m {
        tall_least_squares(&a, t, ridge)
    } else {
        wide_least_squares(&a, t, ridge)
    };
    let z = match z {
        Some(z) => z,
        None => svd_least_squares(&a, t, ridge)?,
    };
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("least-squares solve produced non-finite values".into()));
    }
    Ok(z.iter().copied().collect())
}

/// False when `R` has a negligible diagonal entry.
fn well_conditioned(r: &DMatrix<f64>) -> bool {
    let diag = r.diagonal();
    let top = diag.amax();
    top > 0.0 && diag.iter().all(|v| v.abs() > RANK_TOL * top)
}

fn tall_least_squares(a: &DMatrix<f64>, t: &DVector<f64>, ridge: f64) -> Option<DVector<f64>> {
    let (m, p) = a.shape();
    let (a, t) = if ridge > 0.0 {
        let mut aug = DMatrix::<f64>::zeros(m + p, p);
        aug.view_mut((0, 0), (m, p)).copy_from(a);
        aug.view_mut((m, 0), (p, p)).fill_diagonal(ridge.sqrt());
        let mut taug = DVector::<f64>::zeros(m + p);
        taug.rows_mut(0, m).copy_from(t);
        (aug, taug)
    } else {
        (a.clone(), t.clone())
    };
    let qr = a.qr();
    let r = qr.r();
    if !well_conditioned(&r) {
        return None;
    }
    r.solve_upper_triangular(&(qr.q().transpose() * t))
}

fn wide_least_squares(a: &DMatrix<f64>, t: &DVector<f64>, ridge: f64) -> Option<DVector<f64>> {
    let qr = a.transpose().qr();
    let (q, r) = (qr.q(), qr.r());
    if ridge > 0.0 {
        // A A^T + λ I = R^T R + λ I
        let gram = r.transpose() * &r + DMatrix::<f64>::identity(r.nrows(), r.nrows()) * ridge;
        let y = gram.cholesky()?.solve(t);
        return Some(a.transpose() * y);
    }
    if !well_conditioned(&r) {
        return None;
    }
    let w = r.tr_solve_upper_triangular(t)?;
    Some(q * w)
}

/// Truncated-SVD minimum-norm solution with two refinement passes, which
/// recover digits the SVD loses on clustered singular values.
fn svd_least_squares(a: &DMatrix<f64>, t: &DVector<f64>, ridge: f64) -> Result<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u.as_ref(), svd.v_t.as_ref()) else {
        return Err(Error::NumericalFailure("least-squares SVD failed".into()));
    };
    let s = &svd.singular_values;
    let cutoff = 1e-13 * s.amax().max(1.0);
    let kept = |sv: f64| ridge > 0.0 || sv > cutoff;
    let ut_t = u.transpose() * t;
    let mut z = v_t.transpose()
        * DVector::from_iterator(
            s.len(),
            s.iter()
                .zip(ut_t.iter())
                .map(|(&sv, &c)| if kept(sv) { sv / (sv * sv + ridge) * c } else { 0.0 }),
        );
    for _ in 0..2 {
        let g = v_t * (a.transpose() * (t - a * &z) - &z * ridge);
        z += v_t.transpose()
            * DVector::from_iterator(
                s.len(),
                s.iter()
                    .zip(g.iter())
                    .map(|(&sv, &c)| if kept(sv) { c / (sv * sv + ridge) } else { 0.0 }),
            );
    }
    Ok(z)
}
