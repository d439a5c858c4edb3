//! Small dense linear algebra: complex matrices and a real symmetric
//! eigensolver (Householder tridiagonalisation followed by implicit QL).

use std::ops::{Index, IndexMut};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::scalar::{abs, czero, Cplx, Real};

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CMat<T> {
    rows: usize,
    cols: usize,
    data: Vec<Cplx<T>>,
}

impl<T: Real> CMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![czero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Cplx<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real(m: &RMat<T>) -> Self {
        Self::from_fn(m.rows(), m.cols(), |i, j| Complex::new(m[(i, j)], T::zero()))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Cplx<T>] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(row) {
                    *o += a * *b;
                }
            }
        }
        out
    }

    pub fn scale(&self, s: Cplx<T>) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| *x * s).collect() }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a + *b).collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.scale(Complex::new(-T::one(), T::zero())))
    }

    pub fn trace(&self) -> Cplx<T> {
        (0..self.rows.min(self.cols)).fold(czero(), |acc, i| acc + self[(i, i)])
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.norm()))
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> T {
        self.data.iter().map(|x| x.norm_sqr()).sum::<T>().sqrt()
    }

    /// max |A - A*| entrywise.
    pub fn hermitian_defect(&self) -> T {
        assert!(self.is_square());
        let n = self.rows;
        let mut d = T::zero();
        for i in 0..n {
            for j in i..n {
                d = d.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        d
    }

    /// max |Im A_ij|.
    pub fn max_imag(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(abs(x.im)))
    }

    pub fn real_part(&self) -> RMat<T> {
        RMat::from_fn(self.rows, self.cols, |i, j| self[(i, j)].re)
    }
}

impl<T> Index<(usize, usize)> for CMat<T> {
    type Output = Cplx<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Cplx<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Cplx<T> {
        &mut self.data[i * self.cols + j]
    }
}

/// Dense real matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RMat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> RMat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(row) {
                    *o += a * *b;
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(abs(*x)))
    }

    pub fn symmetric_defect(&self) -> T {
        let n = self.rows;
        let mut d = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                d = d.max(abs(self[(i, j)] - self[(j, i)]));
            }
        }
        d
    }
}

impl<T> Index<(usize, usize)> for RMat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for RMat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenpairs of a real symmetric matrix: `a = V diag(values) Vᵀ`,
/// eigenvalues ascending, eigenvectors in the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: RMat<T>,
}

impl<T: Real> SymEigen<T> {
    /// max |A - V Λ Vᵀ| entrywise.
    pub fn reconstruction_error(&self, a: &RMat<T>) -> T {
        let n = self.values.len();
        let mut err = T::zero();
        for i in 0..n {
            for j in 0..n {
                let mut s = T::zero();
                for k in 0..n {
                    s += self.vectors[(i, k)] * self.values[k] * self.vectors[(j, k)];
                }
                err = err.max(abs(s - a[(i, j)]));
            }
        }
        err
    }
}

/// Symmetric eigendecomposition. Only the lower triangle of `a` is read.
pub fn sym_eigen<T: Real>(a: &RMat<T>) -> SymEigen<T> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "sym_eigen needs a square matrix");
    if n == 0 {
        return SymEigen { values: vec![], vectors: RMat::zeros(0, 0) };
    }
    let mut z = a.clone();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut z, &mut d, &mut e);
    tql2(&mut z, &mut d, &mut e);
    SymEigen { values: d, vectors: z }
}

// Householder reduction to tridiagonal form (EISPACK tred2 layout: the
// orthogonal transform accumulates in `v`, diagonal in `d`, subdiagonal in `e`).
fn tred2<T: Real>(v: &mut RMat<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for k in 0..i {
            scale += abs(d[k]);
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
                v[(j, i)] = T::zero();
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for j in 0..i {
                e[j] = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let t = v[(k, j)] - (f * e[k] + g * d[k]);
                    v[(k, j)] = t;
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    let t = v[(k, j)] - g * d[k];
                    v[(k, j)] = t;
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = T::zero();
    }
    v[(n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

// Implicit QL on the tridiagonal form, then ascending sort.
fn tql2<T: Real>(v: &mut RMat<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    let eps = T::eps();
    for l in 0..n {
        tst1 = tst1.max(abs(d[l]) + abs(e[l]));
        let mut m = l;
        while m < n {
            if abs(e[m]) <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                assert!(iter < 200, "tql2 failed to converge");
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (T::lit(2.0) * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * h;
                        v[(k, i)] = c * v[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if abs(e[l]) <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    // selection sort keeps columns paired with values
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, dj) in d.iter().enumerate().skip(i + 1) {
            if *dj < p {
                k = j;
                p = *dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for r in 0..n {
                let t = v[(r, i)];
                v[(r, i)] = v[(r, k)];
                v[(r, k)] = t;
            }
        }
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
///
/// Uses the real symmetric embedding `[[Re, -Im], [Im, Re]]`, whose spectrum
/// is that of the Hermitian matrix with every eigenvalue doubled.
pub fn hermitian_eigenvalues<T: Real>(a: &CMat<T>) -> Vec<T> {
    assert!(a.is_square());
    let n = a.rows();
    if a.max_imag() == T::zero() {
        return sym_eigen(&a.real_part()).values;
    }
    let emb = RMat::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ii) = (i / n, i % n);
        let (bj, jj) = (j / n, j % n);
        let z = a[(ii, jj)];
        match (bi, bj) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    });
    let all = sym_eigen(&emb).values;
    all.into_iter().step_by(2).collect()
}

/// Trace norm of a Hermitian matrix (sum of |eigenvalues|).
pub fn trace_norm_hermitian<T: Real>(a: &CMat<T>) -> T {
    hermitian_eigenvalues(a).into_iter().map(abs).sum()
}

/// Trace norm (sum of singular values) of a square matrix, from the
/// Hermitian dilation `[[0, A], [A*, 0]]` whose eigenvalues are `±σᵢ`.
pub fn trace_norm<T: Real>(a: &CMat<T>) -> T {
    assert!(a.is_square());
    let n = a.rows();
    let dil = CMat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, false) => a[(i, j - n)],
        (false, true) => a[(j, i - n)].conj(),
        _ => Complex::new(T::zero(), T::zero()),
    });
    hermitian_eigenvalues(&dil).into_iter().map(abs).sum::<T>() / T::lit(2.0)
}

/// Operator norm `sqrt(max eig(a* a))`.
pub fn operator_norm<T: Real>(a: &CMat<T>) -> T {
    let g = a.adjoint().matmul(a);
    hermitian_eigenvalues(&g).into_iter().fold(T::zero(), |m, v| m.max(v)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    }

    #[test]
    fn trace_norm_of_non_hermitian() {
        // [[0, 2], [0, 0]] has singular values 2, 0; diag(1, -3i) has 1, 3
        let mut a = CMat::<f64>::zeros(2, 2);
        a[(0, 1)] = Complex::new(2.0, 0.0);
        assert!((trace_norm(&a) - 2.0).abs() < 1e-12);
        let mut b = CMat::<f64>::zeros(2, 2);
        b[(0, 0)] = Complex::new(1.0, 0.0);
        b[(1, 1)] = Complex::new(0.0, -3.0);
        assert!((trace_norm(&b) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sym_eigen_reconstructs_random_matrices() {
        let mut s = 7u64;
        for n in [1usize, 2, 3, 7, 20, 41] {
            let mut a = RMat::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let x = lcg(&mut s);
                    a[(i, j)] = x;
                    a[(j, i)] = x;
                }
            }
            let eig = sym_eigen(&a);
            assert!(eig.reconstruction_error(&a) < 1e-12, "n={n}");
            let vtv = eig.vectors.transpose().matmul(&eig.vectors);
            for i in 0..n {
                for j in 0..n {
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((vtv[(i, j)] - target).abs() < 1e-12);
                }
            }
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn diagonal_and_degenerate_inputs() {
        let a = RMat::from_fn(4, 4, |i, j| if i == j { [3.0, 1.0, 1.0, -2.0][i] } else { 0.0 });
        let eig = sym_eigen(&a);
        assert_eq!(eig.values, vec![-2.0, 1.0, 1.0, 3.0]);
        assert!(eig.reconstruction_error(&a) < 1e-14);
    }

    #[test]
    fn hermitian_eigenvalues_of_pauli_y() {
        let mut y = CMat::<f64>::zeros(2, 2);
        y[(0, 1)] = Complex::new(0.0, -1.0);
        y[(1, 0)] = Complex::new(0.0, 1.0);
        let ev = hermitian_eigenvalues(&y);
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
        assert!((trace_norm_hermitian(&y) - 2.0).abs() < 1e-14);
    }
}
