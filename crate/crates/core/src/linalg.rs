//! Small dense linear algebra generic over [`Real`], plus the `f64`-only
//! spectral routines (symmetric pencils, polynomial roots) backed by nalgebra.

use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{GeomError, Result};
use crate::jet::{Jet, Real};

/// Square matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SqMat<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> SqMat<T> {
    pub fn zeros(n: usize) -> Self {
        SqMat { n, data: vec![T::from_f64(0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, T::from_f64(1.0))
    }

    pub fn scalar(n: usize, s: T) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        SqMat { n, data }
    }

    pub fn diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn map<U: Real>(&self, f: impl Fn(&T) -> U) -> SqMat<U> {
        SqMat { n: self.n, data: self.data.iter().map(f).collect() }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    /// `(A + Aᵀ)/2`.
    pub fn symmetrize(&self) -> Self {
        let half = T::from_f64(0.5);
        Self::from_fn(self.n, |i, j| (self[(i, j)] + self[(j, i)]) * half)
    }

    pub fn trace(&self) -> T {
        let mut t = T::from_f64(0.0);
        for i in 0..self.n {
            t += self[(i, i)];
        }
        t
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| {
                let mut s = T::from_f64(0.0);
                for j in 0..self.n {
                    s += self[(i, j)] * v[j];
                }
                s
            })
            .collect()
    }

    pub fn add(&self, rhs: &Self) -> Self {
        Self::from_fn(self.n, |i, j| self[(i, j)] + rhs[(i, j)])
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Self::from_fn(self.n, |i, j| self[(i, j)] - rhs[(i, j)])
    }

    pub fn scale(&self, s: T) -> Self {
        SqMat { n: self.n, data: self.data.iter().map(|&a| a * s).collect() }
    }

    /// Quadratic form `uᵀ A v`.
    pub fn bilinear(&self, u: &[T], v: &[T]) -> T {
        let mut s = T::from_f64(0.0);
        for i in 0..self.n {
            for j in 0..self.n {
                s += u[i] * self[(i, j)] * v[j];
            }
        }
        s
    }

    /// Determinant by Gaussian elimination with partial pivoting on values.
    pub fn det(&self) -> T {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = T::from_f64(1.0);
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&r1, &r2| a[r1 * n + col].val().abs().total_cmp(&a[r2 * n + col].val().abs()))
                .unwrap();
            if a[piv * n + col].val() == 0.0 {
                return T::from_f64(0.0);
            }
            if piv != col {
                for j in 0..n {
                    a.swap(piv * n + j, col * n + j);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det = det * p;
            for r in col + 1..n {
                let f = a[r * n + col] / p;
                for j in col..n {
                    let t = a[col * n + j];
                    a[r * n + j] -= f * t;
                }
            }
        }
        det
    }

    /// Inverse by Gauss–Jordan elimination with partial pivoting on values.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut inv = Self::identity(n).data;
        let scale = self.data.iter().map(|x| x.val().abs()).fold(0.0, f64::max);
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&r1, &r2| a[r1 * n + col].val().abs().total_cmp(&a[r2 * n + col].val().abs()))
                .unwrap();
            if a[piv * n + col].val().abs() <= 1e-300_f64.max(scale * 1e-300) {
                return Err(GeomError::SingularMatrix);
            }
            if piv != col {
                for j in 0..n {
                    a.swap(piv * n + j, col * n + j);
                    inv.swap(piv * n + j, col * n + j);
                }
            }
            let p = a[col * n + col];
            for j in 0..n {
                a[col * n + j] = a[col * n + j] / p;
                inv[col * n + j] = inv[col * n + j] / p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[r * n + col];
                for j in 0..n {
                    let (ta, ti) = (a[col * n + j], inv[col * n + j]);
                    a[r * n + j] -= f * ta;
                    inv[r * n + j] -= f * ti;
                }
            }
        }
        Ok(SqMat { n, data: inv })
    }

    /// Coefficients `C_0..C_{n-1}` with `adj(A − t·Id) = Σ_k t^k C_k`, via the
    /// Faddeev–LeVerrier recursion. Stable at eigenvalues of `A` since no
    /// inverse is formed.
    pub fn adjugate_polynomial(&self) -> Vec<Self> {
        let n = self.n;
        let id = Self::identity(n);
        // M_1 = Id, M_k = A M_{k-1} + c_{n-k+1} Id; adj(λ − A) = Σ_k M_k λ^{n-k}
        let mut ms: Vec<Self> = Vec::with_capacity(n);
        let mut m = id.clone();
        ms.push(m.clone());
        for k in 1..n {
            let am = self.matmul(&m);
            let c = -am.trace() * T::from_f64(1.0 / k as f64);
            m = am.add(&id.scale(c));
            ms.push(m.clone());
        }
        // adj(A − t) = (−1)^{n−1} adj(t − A) = (−1)^{n−1} Σ_{k=1}^{n} M_k t^{n−k}
        let sign = if (n - 1) % 2 == 0 { 1.0 } else { -1.0 };
        let mut coeffs = vec![Self::zeros(n); n];
        for (k, mk) in ms.into_iter().enumerate() {
            // ms[k] is M_{k+1}, multiplying t^{n-1-k}
            coeffs[n - 1 - k] = mk.scale(T::from_f64(sign));
        }
        coeffs
    }

    /// Characteristic-type polynomial `det(A − t·Id) = Σ_k t^k c_k`.
    pub fn det_polynomial(&self) -> Vec<T> {
        let n = self.n;
        // c_k of det(tI − A) via Faddeev–LeVerrier, then flip sign for odd degree terms
        let id = Self::identity(n);
        let mut cs = vec![T::from_f64(0.0); n + 1];
        cs[n] = T::from_f64(1.0);
        let mut m = id.clone();
        for k in 1..=n {
            let am = self.matmul(&m);
            let c = -am.trace() * T::from_f64(1.0 / k as f64);
            cs[n - k] = c;
            m = am.add(&id.scale(c));
        }
        // det(A − t) = (−1)^n det(t − A)
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        cs.into_iter().map(|c| c * T::from_f64(sign)).collect()
    }
}

impl<T> Index<(usize, usize)> for SqMat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for SqMat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

impl SqMat<f64> {
    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        SqMat::from_fn(m.nrows(), |i, j| m[(i, j)])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn as_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self[(i, j)]).collect()).collect()
    }
}

impl SqMat<Jet> {
    pub fn values(&self) -> SqMat<f64> {
        self.map(|j| j.v)
    }

    /// Entrywise partial derivative `∂_k`, one order lower.
    pub fn partial(&self, k: usize) -> SqMat<Jet> {
        self.map(|j| j.partial(k))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|j| j.is_finite())
    }
}

/// Eigen-decomposition of the symmetric-definite pencil `(B, G)`:
/// `B w = λ G w`, eigenvalues ascending, eigenvectors `G`-orthonormal (columns).
pub fn symmetric_pencil(b: &SqMat<f64>, g: &SqMat<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = b.dim();
    let gm = g.symmetrize().to_nalgebra();
    let chol = gm.cholesky().ok_or(GeomError::SingularMatrix)?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or(GeomError::SingularMatrix)?;
    let bm = b.symmetrize().to_nalgebra();
    let mut m = &linv * bm * linv.transpose();
    m = (&m + m.transpose()) * 0.5;
    let eig = m.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &c| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[c]));
    let vals: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    let back = linv.transpose();
    for (col, &i) in idx.iter().enumerate() {
        let u = eig.eigenvectors.column(i).clone_owned();
        let w: DVector<f64> = &back * u;
        vecs.set_column(col, &w);
    }
    Ok((vals, vecs))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &SqMat<f64>) -> Vec<f64> {
    let m = a.symmetrize().to_nalgebra();
    let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// 2-norm condition number of a symmetric positive matrix (ratio of extreme eigenvalues).
pub fn spd_condition(a: &SqMat<f64>) -> f64 {
    let ev = symmetric_eigenvalues(a);
    let lo = ev.first().copied().unwrap_or(0.0);
    let hi = ev.last().copied().unwrap_or(0.0);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Complex roots of `Σ_k c_k t^k` (ascending coefficients) as companion-matrix eigenvalues.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c.last().map_or(false, |x| *x == 0.0) {
        c.pop();
    }
    let deg = c.len() - 1;
    if deg == 0 {
        return vec![];
    }
    let lead = c[deg];
    if deg == 1 {
        return vec![Complex64::new(-c[0] / lead, 0.0)];
    }
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -c[i] / lead;
    }
    comp.complex_eigenvalues().iter().copied().collect()
}

/// Horner evaluation of `Σ_k c_k t^k` and its derivative.
pub fn poly_eval(coeffs: &[f64], t: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in coeffs.iter().rev() {
        dp = dp * t + p;
        p = p * t + c;
    }
    (p, dp)
}

/// Divides `Σ_k c_k t^k` by `(t − r)`, discarding the remainder.
pub fn deflate(coeffs: &[f64], r: f64) -> Vec<f64> {
    let deg = coeffs.len() - 1;
    let mut out = vec![0.0; deg];
    let mut carry = 0.0;
    for k in (1..=deg).rev() {
        carry = coeffs[k] + carry * r;
        out[k - 1] = carry;
    }
    out
}
