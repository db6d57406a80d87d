//! Dense two-phase simplex method.
//!
//! Variables carry box bounds `lo ≤ x ≤ hi` with finite `lo`; equality and
//! `≤` rows are dense. Pricing is Dantzig's rule, falling back to Bland's
//! rule after a run of degenerate pivots.

use crate::{Error, Result};
use serde::Serialize;

/// Feasibility tolerance of the solver.
pub const LP_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-10;
const HARRIS_TOL: f64 = 1e-11;
const MAX_ITERS: usize = 200_000;

/// `min c·x` subject to `A_eq x = b_eq`, `A_le x ≤ b_le`, box bounds.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub n: usize,
    pub objective: Option<Vec<f64>>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub le: Vec<(Vec<f64>, f64)>,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// Program over `n` variables with bounds `[0, ∞)`.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            objective: None,
            eq: Vec::new(),
            le: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn add_eq(&mut self, row: Vec<f64>, b: f64) {
        debug_assert_eq!(row.len(), self.n);
        self.eq.push((row, b));
    }

    pub fn add_le(&mut self, row: Vec<f64>, b: f64) {
        debug_assert_eq!(row.len(), self.n);
        self.le.push((row, b));
    }

    pub fn add_ge(&mut self, row: Vec<f64>, b: f64) {
        self.add_le(row.into_iter().map(|v| -v).collect(), -b);
    }

    /// Largest constraint violation of `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let dot = |r: &[f64]| r.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let mut v: f64 = 0.0;
        for (r, b) in &self.eq {
            v = v.max((dot(r) - b).abs());
        }
        for (r, b) in &self.le {
            v = v.max(dot(r) - b);
        }
        for (xi, (lo, hi)) in x.iter().zip(&self.bounds) {
            v = v.max(lo - xi).max(xi - hi);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LpOutcome {
    /// No objective was given; `x` is a feasible point.
    Feasible { x: Vec<f64> },
    Optimal { x: Vec<f64>, value: f64 },
    /// Phase-one optimum: the least total artificial mass, a positive
    /// residual certifying infeasibility.
    Infeasible { residual: f64 },
}

impl LpOutcome {
    pub fn point(&self) -> Option<&[f64]> {
        match self {
            LpOutcome::Feasible { x } | LpOutcome::Optimal { x, .. } => Some(x),
            LpOutcome::Infeasible { .. } => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.point().is_some()
    }
}

struct Tableau {
    m: usize,
    cols: usize,
    a: Vec<f64>, // m × (cols + 1), last column is the right-hand side
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.cols + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.a[i * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize, z: &mut [f64]) {
        let w = self.cols + 1;
        let p = self.a[r * w + c];
        for j in 0..w {
            self.a[r * w + j] /= p;
        }
        let prow: Vec<f64> = self.a[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i != r {
                let f = self.a[i * w + c];
                if f != 0.0 {
                    for j in 0..w {
                        self.a[i * w + j] -= f * prow[j];
                    }
                }
            }
        }
        let f = z[c];
        if f != 0.0 {
            for j in 0..w {
                z[j] -= f * prow[j];
            }
        }
        self.basis[r] = c;
    }

    /// Textbook ratio test, ties broken by the smallest basic index.
    fn ratio_bland(&self, c: usize) -> Option<(usize, f64)> {
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..self.m {
            let a = self.at(i, c);
            if a > PIVOT_TOL {
                let ratio = self.rhs(i).max(0.0) / a;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li]) {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        leave
    }

    /// Harris two-pass ratio test: the largest pivot among rows whose ratio
    /// is within the relaxed minimum.
    fn ratio_harris(&self, c: usize) -> Option<(usize, f64)> {
        let mut bound = f64::INFINITY;
        for i in 0..self.m {
            let a = self.at(i, c);
            if a > PIVOT_TOL {
                bound = bound.min((self.rhs(i).max(0.0) + HARRIS_TOL) / a);
            }
        }
        let mut leave: Option<(usize, f64)> = None;
        let mut best = 0.0;
        for i in 0..self.m {
            let a = self.at(i, c);
            if a > PIVOT_TOL {
                let ratio = self.rhs(i).max(0.0) / a;
                if ratio <= bound && a > best {
                    best = a;
                    leave = Some((i, ratio));
                }
            }
        }
        leave
    }

    /// Minimizes the objective row `z` (reduced costs; `z[cols]` holds minus
    /// the objective value) over columns allowed by `allowed`.
    fn optimize(&mut self, z: &mut [f64], allowed: &dyn Fn(usize) -> bool) -> Result<()> {
        let mut degenerate = 0usize;
        for _ in 0..MAX_ITERS {
            let bland = degenerate > 50;
            let mut enter = None;
            let mut best = -1e-9;
            for j in 0..self.cols {
                if !allowed(j) {
                    continue;
                }
                if z[j] < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = z[j];
                }
            }
            let Some(c) = enter else { return Ok(()) };
            let leave = if bland { self.ratio_bland(c) } else { self.ratio_harris(c) };
            let Some((r, ratio)) = leave else {
                return Err(Error::Unbounded);
            };
            if ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, c, z);
        }
        Err(Error::Numerical("simplex iteration cap reached".into()))
    }
}

/// Solves a linear program by the two-phase simplex method.
pub fn lp_solve(lp: &LinearProgram) -> Result<LpOutcome> {
    let n = lp.n;
    if lp.bounds.len() != n {
        return Err(Error::Dimension("one bound pair per variable".into()));
    }
    if lp.bounds.iter().any(|(lo, hi)| !lo.is_finite() || hi < lo) {
        return Err(Error::Dimension("lower bounds must be finite and ≤ upper bounds".into()));
    }
    let lo: Vec<f64> = lp.bounds.iter().map(|b| b.0).collect();
    let shift = |r: &[f64], b: f64| b - r.iter().zip(&lo).map(|(a, l)| a * l).sum::<f64>();

    // rows: (coefficients over structural variables, rhs, has_slack)
    let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    for (r, b) in &lp.eq {
        rows.push((r.clone(), shift(r, *b), false));
    }
    for (r, b) in &lp.le {
        rows.push((r.clone(), shift(r, *b), true));
    }
    for (j, &(l, h)) in lp.bounds.iter().enumerate() {
        if h.is_finite() {
            let mut r = vec![0.0; n];
            r[j] = 1.0;
            rows.push((r, h - l, true));
        }
    }
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.2).count();
    // an artificial for every row whose slack cannot start in the basis
    let needs_art: Vec<bool> = rows.iter().map(|r| !r.2 || r.1 < 0.0).collect();
    let n_art = needs_art.iter().filter(|&&b| b).count();
    let cols = n + n_slack + n_art;
    let w = cols + 1;
    let mut t = Tableau {
        m,
        cols,
        a: vec![0.0; m * w],
        basis: vec![0; m],
    };
    let mut s_idx = n;
    let mut a_idx = n + n_slack;
    for (i, (r, b, has_slack)) in rows.iter().enumerate() {
        let sign = if *b < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t.a[i * w + j] = sign * r[j];
        }
        t.a[i * w + cols] = sign * b;
        if *has_slack {
            t.a[i * w + s_idx] = sign;
            if !needs_art[i] {
                t.basis[i] = s_idx;
            }
            s_idx += 1;
        }
        if needs_art[i] {
            t.a[i * w + a_idx] = 1.0;
            t.basis[i] = a_idx;
            a_idx += 1;
        }
    }
    let first_art = n + n_slack;
    let original = t.a.clone();
    let mut row_ids: Vec<usize> = (0..m).collect();

    // phase one
    let mut z = vec![0.0; w];
    for j in first_art..cols {
        z[j] = 1.0;
    }
    for i in 0..m {
        if t.basis[i] >= first_art {
            for j in 0..w {
                z[j] -= t.a[i * w + j];
            }
        }
    }
    t.optimize(&mut z, &|_| true)?;
    let residual = -z[cols];
    let scale = 1.0 + rows.iter().fold(0.0f64, |a, r| a.max(r.1.abs()));
    if residual > 1e-9 * scale {
        return Ok(LpOutcome::Infeasible { residual });
    }
    // drive artificials out of the basis
    let mut keep = vec![true; m];
    for i in 0..m {
        if t.basis[i] >= first_art {
            let col = (0..first_art)
                .filter(|&j| t.at(i, j).abs() > 1e-9)
                .max_by(|&a, &b| t.at(i, a).abs().partial_cmp(&t.at(i, b).abs()).unwrap());
            match col {
                Some(c) => {
                    let mut dummy = vec![0.0; w];
                    t.pivot(i, c, &mut dummy);
                }
                None => keep[i] = false,
            }
        }
    }
    if keep.iter().any(|k| !k) {
        let mut a = Vec::with_capacity(m * w);
        let mut basis = Vec::new();
        for i in 0..m {
            if keep[i] {
                a.extend_from_slice(&t.a[i * w..(i + 1) * w]);
                basis.push(t.basis[i]);
            }
        }
        row_ids = (0..m).filter(|&i| keep[i]).collect();
        t.m = basis.len();
        t.a = a;
        t.basis = basis;
    }

    // phase two
    let mut z = vec![0.0; w];
    if let Some(c) = &lp.objective {
        z[..n].copy_from_slice(c);
        for i in 0..t.m {
            let cb = if t.basis[i] < n { c[t.basis[i]] } else { 0.0 };
            if cb != 0.0 {
                for j in 0..w {
                    z[j] -= cb * t.a[i * w + j];
                }
            }
        }
        t.optimize(&mut z, &|j| j < first_art)?;
    }
    let assemble = |vals: &[f64]| {
        let mut x = lo.clone();
        for (i, &v) in vals.iter().enumerate() {
            if t.basis[i] < n {
                x[t.basis[i]] += v.max(0.0);
            }
        }
        for (xi, (l, h)) in x.iter_mut().zip(&lp.bounds) {
            *xi = xi.clamp(*l, *h);
        }
        x
    };
    let mut x = assemble(&(0..t.m).map(|i| t.rhs(i)).collect::<Vec<_>>());
    let mut viol = lp.violation(&x);
    if viol > 1e-10 {
        // recompute the basic solution from the original rows
        if let Some(vals) = basic_solution(&original, w, &row_ids, &t.basis) {
            let y = assemble(&vals);
            let v = lp.violation(&y);
            if v < viol {
                x = y;
                viol = v;
            }
        }
    }
    if viol > LP_TOL * scale {
        return Err(Error::Numerical(format!("solution violates constraints by {viol:e}")));
    }
    Ok(match &lp.objective {
        Some(c) => {
            let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
            LpOutcome::Optimal { x, value }
        }
        None => LpOutcome::Feasible { x },
    })
}

/// Solves `B x_B = b` for the basis columns of the original tableau rows
/// by Gaussian elimination with partial pivoting.
fn basic_solution(original: &[f64], w: usize, rows: &[usize], basis: &[usize]) -> Option<Vec<f64>> {
    let k = rows.len();
    let mut a: Vec<Vec<f64>> = rows
        .iter()
        .map(|&i| {
            let mut r: Vec<f64> = basis.iter().map(|&c| original[i * w + c]).collect();
            r.push(original[i * w + w - 1]);
            r
        })
        .collect();
    for c in 0..k {
        let p = (c..k).max_by(|&x, &y| a[x][c].abs().partial_cmp(&a[y][c].abs()).unwrap())?;
        if a[p][c].abs() < 1e-13 {
            return None;
        }
        a.swap(c, p);
        for i in c + 1..k {
            let f = a[i][c] / a[c][c];
            if f != 0.0 {
                for j in c..=k {
                    a[i][j] -= f * a[c][j];
                }
            }
        }
    }
    let mut x = vec![0.0; k];
    for c in (0..k).rev() {
        let s: f64 = (c + 1..k).map(|j| a[c][j] * x[j]).sum();
        x[c] = (a[c][k] - s) / a[c][c];
    }
    Some(x)
}
