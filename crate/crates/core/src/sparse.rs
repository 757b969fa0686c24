//! Compressed sparse rows, ILU(0) and preconditioned BiCGSTAB.
//!
//! The Newton systems of the finite-difference solver are nonsymmetric
//! M-matrices with at most a few dozen entries per row.

use crate::error::{DivergenceReport, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    /// Builds from per-row `(column, value)` lists; duplicates are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in r {
                if last == Some(c) {
                    *val.last_mut().unwrap() += v;
                } else {
                    col.push(c);
                    val.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col.len());
        }
        Csr { n, row_ptr, col, val }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            y[i] = s;
        }
    }

    fn diag_positions(&self) -> Result<Vec<usize>> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&k| self.col[k] == i)
                    .ok_or_else(|| Error::invalid(format!("row {i} has no diagonal entry")))
            })
            .collect()
    }
}

/// Incomplete LU factorization with the sparsity pattern of the matrix.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: Csr,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &Csr) -> Result<Self> {
        let mut lu = a.clone();
        let diag = lu.diag_positions()?;
        let n = lu.n;
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (s, e) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in s..e {
                pos[lu.col[k]] = k;
            }
            for k in s..e {
                let j = lu.col[k];
                if j >= i {
                    break;
                }
                let piv = lu.val[diag[j]];
                if piv == 0.0 {
                    return Err(Error::invalid("zero pivot in ILU(0)"));
                }
                let f = lu.val[k] / piv;
                lu.val[k] = f;
                for kk in diag[j] + 1..lu.row_ptr[j + 1] {
                    let c = lu.col[kk];
                    let p = pos[c];
                    if p != usize::MAX {
                        lu.val[p] -= f * lu.val[kk];
                    }
                }
            }
            for k in s..e {
                pos[lu.col[k]] = usize::MAX;
            }
            if lu.val[diag[i]] == 0.0 {
                return Err(Error::invalid("zero pivot in ILU(0)"));
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    /// Solves `LU x = b` in place.
    pub fn apply(&self, x: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut s = x[i];
            for k in lu.row_ptr[i]..self.diag[i] {
                s -= lu.val[k] * x[lu.col[k]];
            }
            x[i] = s;
        }
        for i in (0..lu.n).rev() {
            let mut s = x[i];
            for k in self.diag[i] + 1..lu.row_ptr[i + 1] {
                s -= lu.val[k] * x[lu.col[k]];
            }
            x[i] = s / lu.val[self.diag[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned BiCGSTAB. Stops when `‖b − Ax‖ ≤ tol ‖b‖`.
pub fn bicgstab(a: &Csr, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<usize> {
    let n = a.n;
    let pre = Ilu0::new(a)?;
    let bn = norm(b);
    if bn == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ph = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut sh = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut history = Vec::new();
    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        ph.copy_from_slice(&p);
        pre.apply(&mut ph);
        a.matvec(&ph, &mut v);
        let r0v = dot(&r0, &v);
        if r0v == 0.0 {
            break;
        }
        alpha = rho / r0v;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= tol * bn {
            for i in 0..n {
                x[i] += alpha * ph[i];
            }
            return Ok(it);
        }
        sh.copy_from_slice(&s);
        pre.apply(&mut sh);
        a.matvec(&sh, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * t[i];
        }
        let rel = norm(&r) / bn;
        history.push(rel);
        if rel <= tol {
            return Ok(it);
        }
    }
    // final check with the true residual
    a.matvec(x, &mut r);
    let rel = (0..n).map(|i| (b[i] - r[i]).powi(2)).sum::<f64>().sqrt() / bn;
    if rel <= tol.max(1e-8) {
        return Ok(max_iter);
    }
    Err(Error::Divergence(DivergenceReport {
        solver: "BiCGSTAB".into(),
        reason: format!("relative residual {rel:e} above {tol:e}"),
        iterations: max_iter,
        history,
    }))
}
