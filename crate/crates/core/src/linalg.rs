//! Small dense matrices (row-major `n × n` slices) and Gauss–Legendre rules.

use serde::{Deserialize, Serialize};

/// Square matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat { n, a: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        Mat {
            n,
            a: rows.iter().flat_map(|r| r.iter().cloned()).collect(),
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn add_scaled(&self, s: f64, other: &Mat) -> Mat {
        Mat {
            n: self.n,
            a: self.a.iter().zip(&other.a).map(|(x, y)| x + s * y).collect(),
        }
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        let n = self.n;
        let mut c = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                for j in 0..n {
                    c.a[i * n + j] += aik * other.get(k, j);
                }
            }
        }
        c
    }

    /// Frobenius inner product `tr(Aᵀ B)`.
    pub fn frobenius(&self, other: &Mat) -> f64 {
        self.a.iter().zip(&other.a).map(|(x, y)| x * y).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> f64 {
        let n = self.n;
        match n {
            0 => return 1.0,
            1 => return self.a[0],
            2 => return self.a[0] * self.a[3] - self.a[1] * self.a[2],
            3 => {
                let a = &self.a;
                return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                    + a[2] * (a[3] * a[7] - a[4] * a[6]);
            }
            _ => {}
        }
        let mut m = self.a.clone();
        let mut det = 1.0;
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| m[x * n + c].abs().total_cmp(&m[y * n + c].abs()))
                .unwrap_or(c);
            if m[p * n + c] == 0.0 {
                return 0.0;
            }
            if p != c {
                for j in 0..n {
                    m.swap(p * n + j, c * n + j);
                }
                det = -det;
            }
            let piv = m[c * n + c];
            det *= piv;
            for r in c + 1..n {
                let f = m[r * n + c] / piv;
                for j in c..n {
                    m[r * n + j] -= f * m[c * n + j];
                }
            }
        }
        det
    }

    fn minor(&self, skip_r: usize, skip_c: usize) -> Mat {
        let n = self.n;
        let mut a = Vec::with_capacity((n - 1) * (n - 1));
        for i in (0..n).filter(|i| *i != skip_r) {
            for j in (0..n).filter(|j| *j != skip_c) {
                a.push(self.get(i, j));
            }
        }
        Mat { n: n - 1, a }
    }

    /// Adjugate `adj(M)`, the transposed cofactor matrix, so `M adj(M) = det(M) I`.
    pub fn adjugate(&self) -> Mat {
        let n = self.n;
        match n {
            1 => return Mat { n: 1, a: vec![1.0] },
            2 => {
                let a = &self.a;
                return Mat {
                    n: 2,
                    a: vec![a[3], -a[1], -a[2], a[0]],
                };
            }
            _ => {}
        }
        let mut adj = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                adj.set(j, i, sign * self.minor(i, j).det());
            }
        }
        adj
    }

    /// Sylvester's criterion on the leading principal minors.
    pub fn is_positive_definite(&self) -> bool {
        (1..=self.n).all(|k| {
            let mut sub = Mat::zeros(k);
            for i in 0..k {
                for j in 0..k {
                    sub.set(i, j, self.get(i, j));
                }
            }
            sub.det() > 0.0
        })
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let s = self.max_abs().max(1e-300);
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol * s))
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre01(order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    (
        x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        w.iter().map(|v| 0.5 * v).collect(),
    )
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, by Newton iteration on
/// `P_order` from Chebyshev-like starting points.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be positive");
    let n = order;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, t);
            dp = d;
            let dt = p / d;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, t);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - t * t) * dp * dp);
        x[i] = -t;
        x[n - 1 - i] = t;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `(P_n(t), P_n'(t))` by the three-term recurrence.
fn legendre(n: usize, t: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, t);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_integrates_polynomials_exactly() {
        for order in 1..10 {
            let (x, w) = gauss_legendre01(order);
            for deg in 0..(2 * order) {
                let q: f64 = x.iter().zip(&w).map(|(t, v)| v * t.powi(deg as i32)).sum();
                assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "order {order} deg {deg}");
            }
        }
    }

    #[test]
    fn adjugate_identity() {
        let m = Mat::from_rows(&[
            vec![2.0, 1.0, 0.5, 0.1],
            vec![1.0, 3.0, 0.2, 0.0],
            vec![0.5, 0.2, 4.0, 1.0],
            vec![0.1, 0.0, 1.0, 5.0],
        ]);
        let p = m.mul(&m.adjugate());
        let d = m.det();
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { d } else { 0.0 };
                assert!((p.get(i, j) - e).abs() < 1e-10 * d.abs());
            }
        }
        let m3 = Mat::from_rows(&[vec![2.0, 1.0, 0.0], vec![1.0, 2.0, 1.0], vec![0.0, 1.0, 2.0]]);
        assert!((m3.det() - 4.0).abs() < 1e-14);
        assert!(m3.is_positive_definite());
        assert!(!Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_positive_definite());
    }
}
