//! Lawson–Hanson active-set NNLS on sparse route columns.
//!
//! Minimizes `|b - A c|^2` over `c >= 0` where column `j` holds the edge
//! multiplicities of route `j` and `b` is the observed flow. The passive-set
//! least-squares systems are solved through an incrementally updated
//! Cholesky factor of the normal equations, so columns can be appended and
//! the problem re-solved from the previous optimum.

use super::Route;
use crate::error::{Error, Result};
use crate::network::{FlowField, ResidualField};

#[derive(Debug, Clone)]
pub struct CoefficientSolution {
    pub coefficients: Vec<f64>,
    pub residual: ResidualField,
    pub iterations: usize,
}

pub(crate) type Column = Vec<(usize, f64)>;

pub(crate) fn column(edges: &[usize]) -> Column {
    let mut sorted = edges.to_vec();
    sorted.sort_unstable();
    let mut out: Column = Vec::new();
    for e in sorted {
        match out.last_mut() {
            Some((last, m)) if *last == e => *m += 1.0,
            _ => out.push((e, 1.0)),
        }
    }
    out
}

fn dot(a: &Column, b: &Column) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                s += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    s
}

fn dot_dense(a: &Column, v: &[f64]) -> f64 {
    a.iter().map(|&(e, m)| m * v[e]).sum()
}

/// Lower-triangular factor of the passive-set Gram matrix, row `i` holding
/// `i + 1` entries.
#[derive(Default)]
struct Cholesky {
    rows: Vec<Vec<f64>>,
}

impl Cholesky {
    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; b.len()];
        for i in 0..b.len() {
            let row = &self.rows[i];
            let s: f64 = row[..i].iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
            y[i] = (b[i] - s) / row[i];
        }
        y
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut x = self.forward(b);
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.rows[k][i] * x[k];
            }
            x[i] = s / self.rows[i][i];
        }
        x
    }

    /// Appends a column with Gram entries `g` against the current set and
    /// diagonal `d`; `false` when it is numerically dependent.
    fn push(&mut self, g: &[f64], d: f64) -> bool {
        let y = self.forward(g);
        let pivot = d - y.iter().map(|v| v * v).sum::<f64>();
        if pivot <= 1e-10 * d {
            return false;
        }
        let mut row = y;
        row.push(pivot.sqrt());
        self.rows.push(row);
        true
    }

    fn remove(&mut self, q: usize) {
        self.rows.remove(q);
        let n = self.rows.len();
        for r in q..n {
            let (a, b) = (self.rows[r][r], self.rows[r][r + 1]);
            let h = a.hypot(b);
            let (c, s) = (a / h, b / h);
            for t in r..n {
                let row = &mut self.rows[t];
                let (x, y) = (row[r], row[r + 1]);
                row[r] = c * x + s * y;
                row[r + 1] = -s * x + c * y;
            }
            self.rows[r].truncate(r + 1);
        }
    }
}

/// Incremental NNLS state.
pub(crate) struct Nnls {
    cols: Vec<Column>,
    b: Vec<f64>,
    atb: Vec<f64>,
    x: Vec<f64>,
    passive: Vec<usize>,
    in_passive: Vec<bool>,
    chol: Cholesky,
    threshold: f64,
    pub(crate) iterations: usize,
}

impl Nnls {
    /// `tol` is relative to `max(1, |b|^2)`.
    pub(crate) fn new(b: Vec<f64>, tol: f64) -> Self {
        let scale = b.iter().map(|v| v * v).sum::<f64>().max(1.0);
        Self {
            cols: Vec::new(),
            b,
            atb: Vec::new(),
            x: Vec::new(),
            passive: Vec::new(),
            in_passive: Vec::new(),
            chol: Cholesky::default(),
            threshold: tol * scale / 2.0,
            iterations: 0,
        }
    }

    pub(crate) fn push_column(&mut self, col: Column) -> usize {
        self.atb.push(dot_dense(&col, &self.b));
        self.cols.push(col);
        self.x.push(0.0);
        self.in_passive.push(false);
        self.cols.len() - 1
    }

    pub(crate) fn len(&self) -> usize {
        self.cols.len()
    }

    pub(crate) fn solution(&self) -> &[f64] {
        &self.x
    }

    /// Seeds the passive set with a nonnegative starting point.
    pub(crate) fn warm_start(&mut self, warm: &[f64]) {
        for (j, &c) in warm.iter().enumerate().take(self.len()) {
            if c > 0.0 && c.is_finite() && !self.in_passive[j] && self.try_enter(j) {
                self.x[j] = c;
            }
        }
    }

    pub(crate) fn residual(&self) -> Vec<f64> {
        let mut r = self.b.clone();
        for (col, &c) in self.cols.iter().zip(&self.x) {
            if c != 0.0 {
                for &(e, m) in col {
                    r[e] -= m * c;
                }
            }
        }
        r
    }

    fn gradient(&self) -> Vec<f64> {
        let r = self.residual();
        self.cols.iter().map(|c| dot_dense(c, &r)).collect()
    }

    fn try_enter(&mut self, j: usize) -> bool {
        let g: Vec<f64> = self.passive.iter().map(|&i| dot(&self.cols[i], &self.cols[j])).collect();
        let d = dot(&self.cols[j], &self.cols[j]);
        if self.chol.push(&g, d) {
            self.passive.push(j);
            self.in_passive[j] = true;
            true
        } else {
            false
        }
    }

    /// Moves to the least-squares optimum of the passive set while staying
    /// feasible, dropping columns that hit zero. Returns the columns that
    /// left with a zero step.
    fn settle(&mut self, entering: Option<usize>) -> Option<usize> {
        let mut stalled = None;
        loop {
            self.iterations += 1;
            if self.passive.is_empty() {
                return stalled;
            }
            let rhs: Vec<f64> = self.passive.iter().map(|&j| self.atb[j]).collect();
            let z = self.chol.solve(&rhs);
            if z.iter().all(|&v| v > 0.0) {
                for (&j, &zj) in self.passive.iter().zip(&z) {
                    self.x[j] = zj;
                }
                return stalled;
            }
            let mut alpha = 1.0f64;
            for (&j, &zj) in self.passive.iter().zip(&z) {
                if zj <= 0.0 {
                    let denom = self.x[j] - zj;
                    alpha = if denom > 0.0 { alpha.min(self.x[j] / denom) } else { 0.0 };
                }
            }
            for (&j, &zj) in self.passive.iter().zip(&z) {
                self.x[j] += alpha * (zj - self.x[j]);
            }
            let floor = 1e-14 * self.passive.iter().map(|&j| self.x[j]).fold(1.0, f64::max);
            let mut q = self.passive.len();
            while q > 0 {
                q -= 1;
                let j = self.passive[q];
                if self.x[j] <= floor {
                    self.x[j] = 0.0;
                    self.passive.remove(q);
                    self.in_passive[j] = false;
                    self.chol.remove(q);
                    if Some(j) == entering && alpha == 0.0 {
                        stalled = Some(j);
                    }
                }
            }
        }
    }

    pub(crate) fn solve(&mut self, max_iterations: usize) -> Result<()> {
        let n = self.len();
        let mut rejected = vec![false; n];
        let mut entering = None;
        let start = self.iterations;
        loop {
            if let Some(j) = self.settle(entering) {
                rejected.iter_mut().for_each(|r| *r = false);
                rejected[j] = true;
            }
            let w = self.gradient();
            let candidate = (0..n)
                .filter(|&j| !self.in_passive[j] && !rejected[j] && w[j] > self.threshold)
                .max_by(|&a, &b| w[a].total_cmp(&w[b]).then(b.cmp(&a)));
            let Some(j) = candidate else {
                return Ok(());
            };
            if self.iterations - start > max_iterations {
                return Err(Error::NonConvergence {
                    solver: "nnls",
                    iterations: self.iterations - start,
                    residual: kkt_violation(&w, &self.x, 0.0),
                    best: self.x.clone(),
                });
            }
            if self.try_enter(j) {
                entering = Some(j);
            } else {
                rejected[j] = true;
                entering = None;
            }
        }
    }
}

fn kkt_violation(w: &[f64], x: &[f64], tol: f64) -> f64 {
    w.iter()
        .zip(x)
        .map(|(&w, &c)| if c > tol { (2.0 * w).abs() } else { (2.0 * w).max(0.0) })
        .fold(0.0, f64::max)
}

/// Largest KKT violation of `x` in units of the objective gradient
/// `d|b - Ac|^2 / dc_j = -2 w_j`: positive coefficients need `w_j ~ 0`,
/// zero coefficients need `w_j <= 0`.
pub fn kkt_residual(routes: &[Route], phi: &FlowField, x: &[f64], tol: f64) -> f64 {
    let mut p = Nnls::new(phi.to_f64(), tol);
    for r in routes {
        p.push_column(column(r.edges()));
    }
    p.x = x.to_vec();
    kkt_violation(&p.gradient(), x, tol)
}

pub fn solve_coefficients(routes: &[Route], phi: &FlowField, tol: f64) -> Result<CoefficientSolution> {
    solve_coefficients_warm(routes, phi, tol, &[])
}

/// NNLS with a warm start; `warm` may be shorter than `routes`, missing
/// entries start at zero.
pub fn solve_coefficients_warm(
    routes: &[Route],
    phi: &FlowField,
    tol: f64,
    warm: &[f64],
) -> Result<CoefficientSolution> {
    let mut p = Nnls::new(phi.to_f64(), tol);
    for r in routes {
        p.push_column(column(r.edges()));
    }
    p.warm_start(warm);
    p.solve(20 * routes.len() + 200)?;
    Ok(CoefficientSolution {
        residual: ResidualField::new(p.residual()),
        coefficients: p.x,
        iterations: p.iterations,
    })
}
