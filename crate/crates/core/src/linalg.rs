//! Minimal dense linear algebra: row-major matrices and LU solves with
//! partial pivoting, in real and complex arithmetic. Network sizes here are
//! at most a few hundred buses, so dense O(n^3) is adequate and keeps the
//! numerics fully deterministic.

use crate::error::{Error, Result};

/// Complex number stored as (re, im). Only the operations the admittance
/// algebra needs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn add(self, o: Complex) -> Complex {
        Complex::new(self.re + o.re, self.im + o.im)
    }

    pub fn sub(self, o: Complex) -> Complex {
        Complex::new(self.re - o.re, self.im - o.im)
    }

    pub fn mul(self, o: Complex) -> Complex {
        Complex::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }

    pub fn div(self, o: Complex) -> Complex {
        let d = o.re * o.re + o.im * o.im;
        Complex::new(
            (self.re * o.re + self.im * o.im) / d,
            (self.im * o.re - self.re * o.im) / d,
        )
    }

    pub fn neg(self) -> Complex {
        Complex::new(-self.re, -self.im)
    }
}

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut m = Matrix::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].to_vec())
            .collect()
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Averages (i,j) and (j,i) so symmetry holds bit-exactly.
    pub fn symmetrize(&mut self) {
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                self.set(i, j, v);
                self.set(j, i, v);
            }
        }
    }
}

/// Solves A x = b in place with partial pivoting. A is consumed.
pub fn solve_real(mut a: Matrix, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = a.rows;
    if a.cols != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            context: "solve_real",
            expected: n,
            got: b.len(),
        });
    }
    let scale: f64 = (0..n)
        .map(|i| (0..n).map(|j| a.get(i, j).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
        .max(1.0);
    for col in 0..n {
        let mut pivot = col;
        let mut best = a.get(col, col).abs();
        for r in (col + 1)..n {
            let v = a.get(r, col).abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best <= 1e-14 * scale {
            return Err(Error::SingularInterior {
                condition_estimate: f64::INFINITY,
            });
        }
        if pivot != col {
            for j in 0..n {
                let tmp = a.get(col, j);
                a.set(col, j, a.get(pivot, j));
                a.set(pivot, j, tmp);
            }
            b.swap(col, pivot);
        }
        let d = a.get(col, col);
        for r in (col + 1)..n {
            let f = a.get(r, col) / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                let v = a.get(r, j) - f * a.get(col, j);
                a.set(r, j, v);
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut acc = b[i];
        for j in (i + 1)..n {
            acc -= a.get(i, j) * x[j];
        }
        x[i] = acc / a.get(i, i);
    }
    Ok(x)
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Complex>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::ZERO; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: Complex) {
        let cur = self.get(i, j);
        self.set(i, j, cur.add(v));
    }

    /// Induced 1-norm (max absolute column sum).
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn matmul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.add_at(i, j, a.mul(other.get(k, j)));
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[Complex]) -> Vec<Complex> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = Complex::ZERO;
                for j in 0..self.cols {
                    acc = acc.add(self.get(i, j).mul(v[j]));
                }
                acc
            })
            .collect()
    }
}

/// LU factorization (partial pivoting) of a complex matrix. Used both to
/// eliminate interior buses and to estimate conditioning.
pub struct CLu {
    lu: CMatrix,
    perm: Vec<usize>,
    n: usize,
}

impl CLu {
    pub fn factor(mut a: CMatrix) -> Result<CLu> {
        let n = a.rows;
        assert_eq!(a.cols, n, "LU needs a square matrix");
        let scale: f64 = (0..n)
            .map(|i| (0..n).map(|j| a.get(i, j).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
            .max(1.0);
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut pivot = col;
            let mut best = a.get(col, col).abs();
            for r in (col + 1)..n {
                let v = a.get(r, col).abs();
                if v > best {
                    best = v;
                    pivot = r;
                }
            }
            if best <= 1e-14 * scale {
                return Err(Error::SingularInterior {
                    condition_estimate: f64::INFINITY,
                });
            }
            if pivot != col {
                for j in 0..n {
                    let tmp = a.get(col, j);
                    a.set(col, j, a.get(pivot, j));
                    a.set(pivot, j, tmp);
                }
                perm.swap(col, pivot);
            }
            let d = a.get(col, col);
            for r in (col + 1)..n {
                let f = a.get(r, col).div(d);
                a.set(r, col, f);
                if f.re == 0.0 && f.im == 0.0 {
                    continue;
                }
                for j in (col + 1)..n {
                    let v = a.get(r, j).sub(f.mul(a.get(col, j)));
                    a.set(r, j, v);
                }
            }
        }
        Ok(CLu { lu: a, perm, n })
    }

    pub fn solve_vec(&self, b: &[Complex]) -> Vec<Complex> {
        assert_eq!(b.len(), self.n);
        let mut y: Vec<Complex> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..self.n {
            let mut acc = y[i];
            for j in 0..i {
                acc = acc.sub(self.lu.get(i, j).mul(y[j]));
            }
            y[i] = acc;
        }
        for i in (0..self.n).rev() {
            let mut acc = y[i];
            for j in (i + 1)..self.n {
                acc = acc.sub(self.lu.get(i, j).mul(y[j]));
            }
            y[i] = acc.div(self.lu.get(i, i));
        }
        y
    }

    /// Solves A X = B column by column.
    pub fn solve_mat(&self, b: &CMatrix) -> CMatrix {
        assert_eq!(b.rows, self.n);
        let mut out = CMatrix::zeros(self.n, b.cols);
        for j in 0..b.cols {
            let col: Vec<Complex> = (0..self.n).map(|i| b.get(i, j)).collect();
            let x = self.solve_vec(&col);
            for i in 0..self.n {
                out.set(i, j, x[i]);
            }
        }
        out
    }

    pub fn inverse(&self) -> CMatrix {
        let mut eye = CMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            eye.set(i, i, Complex::new(1.0, 0.0));
        }
        self.solve_mat(&eye)
    }
}

/// 1-norm condition estimate ||A||_1 ||A^-1||_1.
pub fn condition_estimate(a: &CMatrix) -> Result<f64> {
    let norm_a = a.norm_one();
    let lu = CLu::factor(a.clone())?;
    Ok(norm_a * lu.inverse().norm_one())
}
