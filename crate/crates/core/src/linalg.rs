//! Small dense linear algebra.
//!
//! Row-major [`Matrix`], a [`Vector`] newtype over `Vec<f64>`, and LU
//! factorization with partial pivoting. Everything here targets systems of a
//! few dozen unknowns at most (the largest is the 4n x 4n block matrix used for
//! the phi-functions), so there is no blocking or BLAS-style tuning.
//!
//! Dimension mismatches are programming errors and panic. Singularity is data:
//! [`lu_factor`] always succeeds and sets a flag that callers branch on.

use std::ops::{Add, AddAssign, Deref, DerefMut, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

/// Relative pivot threshold below which a factorization is flagged singular.
pub const SINGULAR_PIVOT_RTOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision")]
    Singular,
}

/// Dense real vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    pub fn from_slice(values: &[f64]) -> Self {
        Vector(values.to_vec())
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Vector(vec![value; n])
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Max-abs norm.
    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn norm2(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &Vector) {
        assert_eq!(self.len(), x.len(), "axpy length mismatch");
        for (s, v) in self.0.iter_mut().zip(&x.0) {
            *s += alpha * v;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Vector {
        Vector(self.0.iter().map(|v| alpha * v).collect())
    }

    /// Componentwise `|self - other|`.
    pub fn abs_diff(&self, other: &Vector) -> Vector {
        assert_eq!(self.len(), other.len(), "abs_diff length mismatch");
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).collect())
    }

    /// Linear combination `sum_i c_i * v_i` of equally sized vectors.
    pub fn combine(terms: &[(f64, &Vector)]) -> Vector {
        let n = terms.first().expect("combine needs at least one term").1.len();
        let mut out = Vector::zeros(n);
        for (c, v) in terms {
            out.axpy(*c, v);
        }
        out
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl Add<&Vector> for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        assert_eq!(self.len(), rhs.len(), "vector add length mismatch");
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub<&Vector> for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        assert_eq!(self.len(), rhs.len(), "vector sub length mismatch");
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Add<Vector> for Vector {
    type Output = Vector;
    fn add(mut self, rhs: Vector) -> Vector {
        self += &rhs;
        self
    }
}

impl Sub<Vector> for Vector {
    type Output = Vector;
    fn sub(mut self, rhs: Vector) -> Vector {
        self -= &rhs;
        self
    }
}

impl Mul<&Vector> for f64 {
    type Output = Vector;
    fn mul(self, rhs: &Vector) -> Vector {
        rhs.scaled(self)
    }
}

impl Mul<Vector> for f64 {
    type Output = Vector;
    fn mul(self, mut rhs: Vector) -> Vector {
        rhs.0.iter_mut().for_each(|v| *v *= self);
        rhs
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self.scaled(-1.0)
    }
}

impl AddAssign<&Vector> for Vector {
    fn add_assign(&mut self, rhs: &Vector) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&Vector> for Vector {
    fn sub_assign(&mut self, rhs: &Vector) {
        self.axpy(-1.0, rhs);
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        assert!(!rows.is_empty(), "from_rows needs at least one row");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "row {i} has the wrong length");
            data.extend_from_slice(row);
        }
        Matrix::new(rows.len(), cols, data)
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vector {
        (0..self.rows).map(|i| self[(i, j)]).collect::<Vec<_>>().into()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scaled(&self, alpha: f64) -> Matrix {
        Matrix::new(self.rows, self.cols, self.data.iter().map(|v| alpha * v).collect())
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Max absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &Vector) -> Vector {
        assert_eq!(self.cols, x.len(), "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x.iter()).map(|(a, b)| a * b).sum())
            .collect::<Vec<f64>>()
            .into()
    }

    /// Copies the `nr x nc` block whose top-left corner is `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Matrix {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols, "block out of range");
        let mut b = Matrix::zeros(nr, nc);
        for i in 0..nr {
            let src = &self.data[(r0 + i) * self.cols + c0..(r0 + i) * self.cols + c0 + nc];
            b.data[i * nc..(i + 1) * nc].copy_from_slice(src);
        }
        b
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        assert!(
            r0 + block.rows <= self.rows && c0 + block.cols <= self.cols,
            "block out of range"
        );
        for i in 0..block.rows {
            let dst = (r0 + i) * self.cols + c0;
            self.data[dst..dst + block.cols].copy_from_slice(block.row(i));
        }
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add_scaled shape mismatch");
        for (s, o) in self.data.iter_mut().zip(&other.data) {
            *s += alpha * o;
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul<&Matrix> for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

impl Mul<&Vector> for &Matrix {
    type Output = Vector;
    fn mul(self, rhs: &Vector) -> Vector {
        self.mul_vec(rhs)
    }
}

impl Add<&Matrix> for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        let mut out = self.clone();
        out.add_scaled(1.0, rhs);
        out
    }
}

impl Sub<&Matrix> for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        let mut out = self.clone();
        out.add_scaled(-1.0, rhs);
        out
    }
}

/// `a * b`; see [`Matrix::matmul`].
pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    a.matmul(b)
}

/// `a * x`; see [`Matrix::mul_vec`].
pub fn mat_vec(a: &Matrix, x: &Vector) -> Vector {
    a.mul_vec(x)
}

/// Packed LU factors of a square matrix, `P A = L U`.
///
/// `L` has a unit diagonal and is stored below the diagonal of `lu`; `U` is
/// the upper triangle. `perm[i]` is the row of `A` that ended up in row `i`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: Matrix,
    perm: Vec<usize>,
    singular: bool,
}

/// Factorizes `a` with partial (row) pivoting.
///
/// The factorization never fails. A pivot whose magnitude is below
/// `1e-14 * ||a||_inf` marks the factors singular; [`LuFactors::solve`] then
/// refuses to solve.
pub fn lu_factor(a: &Matrix) -> LuFactors {
    assert!(a.is_square(), "lu_factor needs a square matrix");
    let n = a.rows();
    let threshold = SINGULAR_PIVOT_RTOL * a.norm_inf();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut singular = false;

    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if p != k {
            for j in 0..n {
                lu.data.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
        }
        if !(pmax > threshold) {
            singular = true;
            if pmax == 0.0 {
                continue;
            }
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let factor = lu[(i, k)] / pivot;
            lu[(i, k)] = factor;
            if factor == 0.0 {
                continue;
            }
            for j in k + 1..n {
                lu.data[i * n + j] -= factor * lu.data[k * n + j];
            }
        }
    }
    LuFactors { lu, perm, singular }
}

impl LuFactors {
    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Unit lower-triangular factor.
    pub fn lower(&self) -> Matrix {
        let n = self.dim();
        let mut l = Matrix::identity(n);
        for i in 0..n {
            for j in 0..i {
                l[(i, j)] = self.lu[(i, j)];
            }
        }
        l
    }

    pub fn upper(&self) -> Matrix {
        let n = self.dim();
        let mut u = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                u[(i, j)] = self.lu[(i, j)];
            }
        }
        u
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &Vector) -> Result<Vector, LinalgError> {
        if self.singular {
            return Err(LinalgError::Singular);
        }
        let n = self.dim();
        assert_eq!(b.len(), n, "lu solve dimension mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: f64 = row[..i].iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x.into())
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix) -> Result<Matrix, LinalgError> {
        assert_eq!(b.rows(), self.dim(), "lu solve dimension mismatch");
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let x = self.solve(&b.column(j))?;
            for (i, v) in x.iter().enumerate() {
                out[(i, j)] = *v;
            }
        }
        Ok(out)
    }
}

/// Solves `A x = b` with previously computed factors.
pub fn lu_solve(factors: &LuFactors, b: &Vector) -> Result<Vector, LinalgError> {
    factors.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn permuted(a: &Matrix, perm: &[usize]) -> Matrix {
        let mut p = Matrix::zeros(a.rows(), a.cols());
        for (i, &src) in perm.iter().enumerate() {
            for j in 0..a.cols() {
                p[(i, j)] = a[(src, j)];
            }
        }
        p
    }

    #[test]
    fn identity_factors_trivially() {
        let a = Matrix::identity(3);
        let f = lu_factor(&a);
        assert!(!f.is_singular());
        assert_eq!(f.lower(), Matrix::identity(3));
        assert_eq!(f.upper(), Matrix::identity(3));
        assert_eq!(f.permutation(), &[0, 1, 2]);
    }

    #[test]
    fn permutation_matrix_is_pivoted() {
        let a = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let f = lu_factor(&a);
        assert!(!f.is_singular());
        assert_eq!(f.permutation(), &[1, 0]);
        let rebuilt = f.lower().matmul(&f.upper());
        assert_eq!(rebuilt, permuted(&a, f.permutation()));
    }

    #[test]
    fn rank_one_is_flagged_singular() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let f = lu_factor(&a);
        assert!(f.is_singular());
        assert_eq!(f.solve(&Vector::from_slice(&[1.0, 1.0])), Err(LinalgError::Singular));
    }

    #[test]
    fn zero_matrix_is_singular() {
        assert!(lu_factor(&Matrix::zeros(3, 3)).is_singular());
    }

    #[test]
    fn robertson_like_jacobian_is_singular() {
        // Columns sum to zero.
        let a = Matrix::from_rows(&[&[-0.04, 1e4, 0.0], &[0.04, -1e4, 0.0], &[0.0, 0.0, 0.0]]);
        assert!(lu_factor(&a).is_singular());
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let b = Vector::from_slice(&[1.5, -2.0, 3.25]);
        let x = lu_solve(&lu_factor(&Matrix::identity(3)), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_solve() {
        let a = Matrix::from_diag(&[2.0, 4.0]);
        let x = lu_solve(&lu_factor(&a), &Vector::from_slice(&[2.0, 8.0])).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn norms() {
        assert_eq!(Vector::from_slice(&[3.0, -4.0]).norm2(), 5.0);
        assert_eq!(Vector::from_slice(&[3.0, -4.0]).norm_inf(), 4.0);
        let a = Matrix::from_rows(&[&[1.0, -2.0], &[3.0, 4.0]]);
        assert_eq!(a.norm_inf(), 7.0);
        assert_eq!(a.norm_one(), 6.0);
    }

    #[test]
    fn multiply_by_identity() {
        let a = Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        assert_eq!(a.matmul(&Matrix::identity(3)), a);
        assert_eq!(Matrix::identity(2).matmul(&a), a);
        assert_eq!(
            a.mul_vec(&Vector::from_slice(&[1.0, 0.0, -1.0])).as_slice(),
            &[-2.0, -2.0]
        );
    }

    #[test]
    fn blocks_round_trip() {
        let mut m = Matrix::zeros(4, 4);
        let b = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        m.set_block(1, 2, &b);
        assert_eq!(m.block(1, 2, 2, 2), b);
        assert_eq!(m[(2, 3)], 4.0);
        assert_eq!(m[(0, 0)], 0.0);
    }

    #[test]
    #[should_panic(expected = "matmul dimension mismatch")]
    fn mismatched_product_panics() {
        let _ = Matrix::zeros(2, 3).matmul(&Matrix::zeros(2, 3));
    }
}
