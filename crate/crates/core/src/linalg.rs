//! Small dense linear algebra.
//!
//! The matrices in this crate are at most a few rows on a side (the closed-loop
//! transition matrix of a 2x2 game is 4x4), so everything is row-major `Vec<f64>`
//! with straightforward loops.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Dense row-major matrix. Serializes as a list of rows.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[cfg(feature = "serde")]
impl serde::Serialize for Matrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(self.rows))?;
        for r in 0..self.rows {
            seq.serialize_element(self.row(r))?;
        }
        seq.end()
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Matrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(Self::from_rows(&rows))
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                what: "matrix data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows. Panics on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest absolute entry, 0 for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(libm::fabs(*x)))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn mul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::Shape {
                what: "matrix product inner dimension",
                expected: self.cols,
                found: rhs.rows,
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len("matrix-vector operand", v, self.cols)?;
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `selfᵀ v` without forming the transpose.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_len("transposed matrix-vector operand", v, self.rows)?;
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a * vr;
            }
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    fn zip_with(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Shape {
                what: "elementwise operand",
                expected: self.rows * self.cols,
                found: rhs.rows * rhs.cols,
            });
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    /// `selfᵀ self`.
    pub fn gram(&self) -> Matrix {
        let mut g = Self::zeros(self.cols, self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..self.cols {
                for j in 0..self.cols {
                    g[(i, j)] += row[i] * row[j];
                }
            }
        }
        g
    }

    /// Copies `block` into `self` with its top-left corner at `(row, col)`.
    pub fn set_block(&mut self, row: usize, col: usize, block: &Matrix) {
        for r in 0..block.rows {
            for c in 0..block.cols {
                self[(row + r, col + c)] = block[(r, c)];
            }
        }
    }

    pub fn block(&self, row: usize, col: usize, rows: usize, cols: usize) -> Matrix {
        let mut out = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                out[(r, c)] = self[(row + r, col + c)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for r in 0..self.rows {
            if r > 0 {
                f.write_str("; ")?;
            }
            for (c, x) in self.row(r).iter().enumerate() {
                if c > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{x}")?;
            }
        }
        f.write_str("]")
    }
}

/// Solves `a x = b` for symmetric positive definite `a` by Cholesky factorization.
pub fn cholesky_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::Shape {
            what: "cholesky matrix columns",
            expected: a.rows(),
            found: a.cols(),
        });
    }
    let n = a.rows();
    crate::error::check_len("cholesky right-hand side", b, n)?;

    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let d = libm::sqrt(d);
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }

    // forward then backward substitution
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(x)
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::Shape {
            what: "inverse matrix columns",
            expected: a.rows(),
            found: a.cols(),
        });
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut inv = Matrix::identity(n);
    let scale = a.max_abs();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| libm::fabs(m[(i, col)]).total_cmp(&libm::fabs(m[(j, col)])))
            .unwrap_or(col);
        let p = m[(pivot, col)];
        if p == 0.0 || libm::fabs(p) <= f64::EPSILON * scale * n as f64 {
            return Err(Error::Singular);
        }
        if pivot != col {
            for c in 0..n {
                m.data.swap(pivot * n + c, col * n + c);
                inv.data.swap(pivot * n + c, col * n + c);
            }
        }
        for c in 0..n {
            m[(col, c)] /= p;
            inv[(col, c)] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[(r, col)];
            if f == 0.0 {
                continue;
            }
            for c in 0..n {
                m[(r, c)] -= f * m[(col, c)];
                inv[(r, c)] -= f * inv[(col, c)];
            }
        }
    }
    Ok(inv)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub fn modulus(&self) -> f64 {
        libm::hypot(self.re, self.im)
    }
}

impl fmt::Display for Complex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im == 0.0 {
            write!(f, "{}", self.re)
        } else if self.im > 0.0 {
            write!(f, "{}+{}i", self.re, self.im)
        } else {
            write!(f, "{}-{}i", self.re, -self.im)
        }
    }
}

const MAX_QR_ITERATIONS: usize = 60;

/// Eigenvalues of a general real square matrix.
///
/// Reduces to upper Hessenberg form by stabilized elementary similarity
/// transforms, then runs the Francis double-shift QR iteration. No balancing
/// is applied. Conjugate pairs are returned adjacent, positive imaginary part
/// first.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<Complex>> {
    if !a.is_square() {
        return Err(Error::Shape {
            what: "eigenvalue matrix columns",
            expected: a.rows(),
            found: a.cols(),
        });
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("eigenvalue matrix"));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = OneBased::from(a);
    reduce_to_hessenberg(&mut h);
    hessenberg_qr(&mut h)
}

/// 1-based square working storage, which keeps the QR sweep close to its
/// textbook index arithmetic.
struct OneBased {
    n: usize,
    data: Vec<f64>,
}

impl OneBased {
    fn from(a: &Matrix) -> Self {
        let n = a.rows();
        let mut data = vec![0.0; (n + 1) * (n + 1)];
        for r in 0..n {
            for c in 0..n {
                data[(r + 1) * (n + 1) + c + 1] = a[(r, c)];
            }
        }
        Self { n, data }
    }
}

impl Index<(usize, usize)> for OneBased {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * (self.n + 1) + c]
    }
}

impl IndexMut<(usize, usize)> for OneBased {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * (self.n + 1) + c]
    }
}

fn reduce_to_hessenberg(a: &mut OneBased) {
    let n = a.n;
    for m in 2..n {
        let mut x = 0.0;
        let mut piv = m;
        for j in m..=n {
            if libm::fabs(a[(j, m - 1)]) > libm::fabs(x) {
                x = a[(j, m - 1)];
                piv = j;
            }
        }
        if piv != m {
            for j in m - 1..=n {
                let t = a[(piv, j)];
                a[(piv, j)] = a[(m, j)];
                a[(m, j)] = t;
            }
            for j in 1..=n {
                let t = a[(j, piv)];
                a[(j, piv)] = a[(j, m)];
                a[(j, m)] = t;
            }
        }
        if x != 0.0 {
            for i in m + 1..=n {
                let mut y = a[(i, m - 1)];
                if y != 0.0 {
                    y /= x;
                    a[(i, m - 1)] = y;
                    for j in m..=n {
                        a[(i, j)] -= y * a[(m, j)];
                    }
                    for j in 1..=n {
                        a[(j, m)] += y * a[(j, i)];
                    }
                }
            }
        }
    }
    // drop the stored multipliers below the subdiagonal
    for i in 3..=n {
        for j in 1..i - 1 {
            a[(i, j)] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        libm::fabs(a)
    } else {
        -libm::fabs(a)
    }
}

fn hessenberg_qr(a: &mut OneBased) -> Result<Vec<Complex>> {
    let n = a.n as isize;
    let mut wr = vec![0.0; a.n + 1];
    let mut wi = vec![0.0; a.n + 1];
    let at = |i: isize, j: isize| (i as usize, j as usize);

    let mut anorm = 0.0;
    for i in 1..=n {
        for j in (i - 1).max(1)..=n {
            anorm += libm::fabs(a[at(i, j)]);
        }
    }

    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    let (mut x, mut y, mut z, mut w);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = libm::fabs(a[at(l - 1, l - 1)]) + libm::fabs(a[at(l, l)]);
                if s == 0.0 {
                    s = anorm;
                }
                if libm::fabs(a[at(l, l - 1)]) + s == s {
                    a[at(l, l - 1)] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[at(nn, nn)];
            if l == nn {
                wr[nn as usize] = x + t;
                wi[nn as usize] = 0.0;
                nn -= 1;
            } else {
                y = a[at(nn - 1, nn - 1)];
                w = a[at(nn, nn - 1)] * a[at(nn - 1, nn)];
                if l == nn - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = libm::sqrt(libm::fabs(q));
                    x += t;
                    let (lo, hi) = ((nn - 1) as usize, nn as usize);
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        wr[lo] = x + z;
                        wr[hi] = x + z;
                        if z != 0.0 {
                            wr[hi] = x - w / z;
                        }
                        wi[lo] = 0.0;
                        wi[hi] = 0.0;
                    } else {
                        wr[lo] = x + p;
                        wr[hi] = x + p;
                        wi[lo] = z;
                        wi[hi] = -z;
                    }
                    nn -= 2;
                } else {
                    if its == MAX_QR_ITERATIONS {
                        return Err(Error::EigenNoConvergence);
                    }
                    if its == 10 || its == 20 {
                        // exceptional shift
                        t += x;
                        for i in 1..=nn {
                            a[at(i, i)] -= x;
                        }
                        let s = libm::fabs(a[at(nn, nn - 1)]) + libm::fabs(a[at(nn - 1, nn - 2)]);
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;

                    let mut m = nn - 2;
                    loop {
                        z = a[at(m, m)];
                        let rr = x - z;
                        let ss = y - z;
                        p = (rr * ss - w) / a[at(m + 1, m)] + a[at(m, m + 1)];
                        q = a[at(m + 1, m + 1)] - z - rr - ss;
                        r = a[at(m + 2, m + 1)];
                        let s = libm::fabs(p) + libm::fabs(q) + libm::fabs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = libm::fabs(a[at(m, m - 1)]) * (libm::fabs(q) + libm::fabs(r));
                        let v = libm::fabs(p)
                            * (libm::fabs(a[at(m - 1, m - 1)])
                                + libm::fabs(z)
                                + libm::fabs(a[at(m + 1, m + 1)]));
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m + 2..=nn {
                        a[at(i, i - 2)] = 0.0;
                        if i != m + 2 {
                            a[at(i, i - 3)] = 0.0;
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = a[at(k, k - 1)];
                            q = a[at(k + 1, k - 1)];
                            r = 0.0;
                            if k != nn - 1 {
                                r = a[at(k + 2, k - 1)];
                            }
                            x = libm::fabs(p) + libm::fabs(q) + libm::fabs(r);
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = sign(libm::sqrt(p * p + q * q + r * r), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a[at(k, k - 1)] = -a[at(k, k - 1)];
                                }
                            } else {
                                a[at(k, k - 1)] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                p = a[at(k, j)] + q * a[at(k + 1, j)];
                                if k != nn - 1 {
                                    p += r * a[at(k + 2, j)];
                                    a[at(k + 2, j)] -= p * z;
                                }
                                a[at(k + 1, j)] -= p * y;
                                a[at(k, j)] -= p * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                p = x * a[at(i, k)] + y * a[at(i, k + 1)];
                                if k != nn - 1 {
                                    p += z * a[at(i, k + 2)];
                                    a[at(i, k + 2)] -= p * r;
                                }
                                a[at(i, k + 1)] -= p * q;
                                a[at(i, k)] -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if l >= nn - 1 {
                break;
            }
        }
    }

    Ok((1..=a.n)
        .map(|i| Complex {
            re: wr[i],
            im: wi[i],
        })
        .collect())
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(eigs: &[Complex]) -> f64 {
    eigs.iter().map(Complex::modulus).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        libm::fabs(a - b) <= tol
    }

    #[test]
    fn cholesky_matches_hand_solution() {
        let a = Matrix::from_rows(&[[4.0, 2.0], [2.0, 3.0]]);
        let x = cholesky_solve(&a, &[2.0, 1.0]).unwrap();
        // det 8: x = (3*2 - 2*1, 4*1 - 2*2) / 8
        assert!(close(x[0], 0.5, 1e-15));
        assert!(close(x[1], 0.0, 1e-15));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]);
        assert_eq!(cholesky_solve(&a, &[1.0, 1.0]), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn inverse_round_trips() {
        let a = Matrix::from_rows(&[[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]]);
        let inv = inverse(&a).unwrap();
        let id = a.mul(&inv).unwrap();
        assert!(id.sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn inverse_rejects_singular() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert_eq!(inverse(&a), Err(Error::Singular));
    }

    #[test]
    fn eigenvalues_of_triangular_block() {
        let a = Matrix::from_rows(&[[0.0, 0.0], [-0.5, 0.5]]);
        let mut e: Vec<f64> = eigenvalues(&a).unwrap().iter().map(|c| c.re).collect();
        e.sort_by(f64::total_cmp);
        assert!(close(e[0], 0.0, 1e-15) && close(e[1], 0.5, 1e-15));
    }

    #[test]
    fn eigenvalues_of_rotation_are_complex_pair() {
        let a = Matrix::from_rows(&[[0.0, -1.0], [1.0, 0.0]]);
        let e = eigenvalues(&a).unwrap();
        assert!(e.iter().all(|c| close(c.re, 0.0, 1e-15) && close(libm::fabs(c.im), 1.0, 1e-15)));
        assert!(close(spectral_radius(&e), 1.0, 1e-15));
    }

    #[test]
    fn eigenvalues_of_companion_matrix() {
        // roots 1, 2, 3, 4 of x^4 - 10x^3 + 35x^2 - 50x + 24
        let a = Matrix::from_rows(&[
            [10.0, -35.0, 50.0, -24.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ]);
        let mut e: Vec<f64> = eigenvalues(&a).unwrap().iter().map(|c| c.re).collect();
        e.sort_by(f64::total_cmp);
        for (got, want) in e.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!(close(*got, want, 1e-9), "{got} vs {want}");
        }
    }

    #[test]
    fn empty_and_non_square() {
        assert!(eigenvalues(&Matrix::zeros(0, 0)).unwrap().is_empty());
        assert!(eigenvalues(&Matrix::zeros(2, 3)).is_err());
    }
}
