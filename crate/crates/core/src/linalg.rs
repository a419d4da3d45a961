//! Dense complex matrices and the handful of decompositions the rest of the
//! crate needs. Sizes are small (n <= 8), so everything is a plain row-major
//! `Vec` and every operation returns a fresh value.

use std::fmt;
use std::ops::Index;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Complex = Complex64;

/// Relative pivot tolerance used by [`ComplexMatrix::lu_unpivoted`].
pub const DEFAULT_PIVOT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex;

    fn index(&self, (i, j): (usize, usize)) -> &Complex {
        assert!(
            i < self.rows && j < self.cols,
            "index ({i}, {j}) out of range"
        );
        &self.data[i * self.cols + j]
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape {
                op: "new",
                left: (rows, cols),
                right: (rows, cols),
            });
        }
        if data.len() != rows * cols {
            return Err(Error::EntryCount {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<Complex>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_cols) {
            return Err(Error::LengthMismatch {
                what: "matrix row",
                expected: n_cols,
                found: bad.len(),
            });
        }
        Self::new(n_rows, n_cols, rows.concat())
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<Complex>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    /// Internal constructor for results of operations on valid matrices.
    pub(crate) fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| Complex::new(0.0, 0.0))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| {
            if i == j {
                Complex::new(1.0, 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        })
    }

    pub fn diagonal(entries: &[Complex]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| {
            if i == j {
                entries[i]
            } else {
                Complex::new(0.0, 0.0)
            }
        })
    }

    pub fn real_diagonal(entries: &[f64]) -> Self {
        let entries: Vec<Complex> = entries.iter().map(|&x| Complex::new(x, 0.0)).collect();
        Self::diagonal(&entries)
    }

    /// Matrix whose columns are the given vectors.
    pub(crate) fn from_columns(columns: &[Vec<Complex>]) -> Self {
        let cols = columns.len();
        let rows = columns[0].len();
        Self::from_fn(rows, cols, |i, j| columns[j][i])
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[Complex] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<Complex>> {
        self.data
            .chunks(self.cols)
            .map(<[Complex]>::to_vec)
            .collect()
    }

    pub fn column(&self, j: usize) -> Vec<Complex> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(Complex::norm_sqr).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn trace(&self) -> Complex {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: Complex) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other, "add")?;
        Ok(Self::from_fn(self.rows, self.cols, |i, j| {
            self[(i, j)] + other[(i, j)]
        }))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_shape(other, "sub")?;
        Ok(Self::from_fn(self.rows, self.cols, |i, j| {
            self[(i, j)] - other[(i, j)]
        }))
    }

    fn same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::Shape {
                op,
                left: (self.rows, self.cols),
                right: (other.rows, other.cols),
            });
        }
        Ok(())
    }

    fn require_square(&self, op: &'static str) -> Result<usize> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                op,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(self.rows)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape {
                op: "matmul",
                left: (self.rows, self.cols),
                right: (other.rows, other.cols),
            });
        }
        Ok(Self::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).map(|k| self[(i, k)] * other[(k, j)]).sum()
        }))
    }

    /// `self * other - other * self`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.require_square("commutator")?;
        other.require_square("commutator")?;
        self.same_shape(other, "commutator")?;
        let ab = self.matmul(other)?;
        let ba = other.matmul(self)?;
        ab.sub(&ba)
    }

    /// Determinant by LU factorization with partial pivoting.
    pub fn determinant(&self) -> Result<Complex> {
        let n = self.require_square("determinant")?;
        let mut a = self.data.clone();
        let mut det = Complex::new(1.0, 0.0);
        for k in 0..n {
            let pivot_row = (k..n)
                .max_by(|&p, &q| a[p * n + k].norm().total_cmp(&a[q * n + k].norm()))
                .expect("non-empty range");
            if a[pivot_row * n + k].norm() == 0.0 {
                return Ok(Complex::new(0.0, 0.0));
            }
            if pivot_row != k {
                for j in 0..n {
                    a.swap(k * n + j, pivot_row * n + j);
                }
                det = -det;
            }
            let pivot = a[k * n + k];
            det *= pivot;
            for i in k + 1..n {
                let factor = a[i * n + k] / pivot;
                for j in k + 1..n {
                    let t = a[k * n + j];
                    a[i * n + j] -= factor * t;
                }
            }
        }
        Ok(det)
    }

    /// Doolittle factorization `self = L * R` without row exchanges, using
    /// the default pivot tolerance.
    pub fn lu_unpivoted(&self) -> Result<(Self, Self)> {
        self.lu_unpivoted_with_tolerance(DEFAULT_PIVOT_TOLERANCE)
    }

    /// As [`lu_unpivoted`](Self::lu_unpivoted); a pivot is degenerate when
    /// its modulus is at most `relative_tolerance` times the Frobenius norm
    /// of the input. The error names the 1-based leading minor that fails.
    pub fn lu_unpivoted_with_tolerance(&self, relative_tolerance: f64) -> Result<(Self, Self)> {
        let n = self.require_square("lu_unpivoted")?;
        let tolerance = relative_tolerance * self.frobenius_norm();
        let mut l = Self::identity(n);
        let mut r = Self::zeros(n, n);
        for k in 0..n {
            for j in k..n {
                let s: Complex = (0..k).map(|p| l.data[k * n + p] * r.data[p * n + j]).sum();
                r.data[k * n + j] = self[(k, j)] - s;
            }
            let pivot = r.data[k * n + k];
            if pivot.norm() <= tolerance {
                return Err(Error::SingularPivot {
                    minor: k + 1,
                    modulus: pivot.norm(),
                    tolerance,
                });
            }
            for i in k + 1..n {
                let s: Complex = (0..k).map(|p| l.data[i * n + p] * r.data[p * n + k]).sum();
                l.data[i * n + k] = (self[(i, k)] - s) / pivot;
            }
        }
        Ok((l, r))
    }

    /// `|self^H self - I|_F`.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.adjoint().matmul(self).expect("adjoint shape");
        gram.sub(&Self::identity(self.cols))
            .expect("gram is square")
            .frobenius_norm()
    }

    /// `|self - self^H|_F`.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.sub(&self.adjoint()).expect("square").frobenius_norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn cofactor_det(a: &ComplexMatrix) -> Complex {
        let n = a.n_rows();
        if n == 1 {
            return a[(0, 0)];
        }
        (0..n)
            .map(|j| {
                let minor = ComplexMatrix::from_fn(n - 1, n - 1, |r, s| {
                    a[(r + 1, if s < j { s } else { s + 1 })]
                });
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                a[(0, j)] * cofactor_det(&minor) * sign
            })
            .sum()
    }

    #[test]
    fn adjoint_examples() {
        assert_eq!(
            ComplexMatrix::identity(3).adjoint(),
            ComplexMatrix::identity(3)
        );
        let a = ComplexMatrix::from_rows(&[vec![c(0.0, 1.0)]]).unwrap();
        assert_eq!(a.adjoint()[(0, 0)], c(0.0, -1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = sampling::random_matrix(&mut rng, 3, 4);
        assert_eq!(r.adjoint().adjoint(), r);
        assert_eq!(r.adjoint().n_rows(), 4);
    }

    #[test]
    fn matmul_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = sampling::random_matrix(&mut rng, 3, 3);
        assert_eq!(a.matmul(&ComplexMatrix::identity(3)).unwrap(), a);
        let swap = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let m = ComplexMatrix::from_rows(&[
            vec![c(1.0, 1.0), c(2.0, 0.0)],
            vec![c(3.0, 0.0), c(0.0, 4.0)],
        ])
        .unwrap();
        let p = swap.matmul(&m).unwrap();
        assert_eq!(
            p.rows(),
            vec![
                vec![c(3.0, 0.0), c(0.0, 4.0)],
                vec![c(1.0, 1.0), c(2.0, 0.0)]
            ]
        );
        let b = sampling::random_matrix(&mut rng, 3, 3);
        let d = sampling::random_matrix(&mut rng, 3, 3);
        let left = a.matmul(&b).unwrap().matmul(&d).unwrap();
        let right = a.matmul(&b.matmul(&d).unwrap()).unwrap();
        assert!(left.sub(&right).unwrap().frobenius_norm() < 1e-13);
        assert!(matches!(
            a.matmul(&ComplexMatrix::zeros(2, 2)),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn commutator_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = sampling::random_matrix(&mut rng, 3, 3);
        assert!(a.commutator(&a).unwrap().frobenius_norm() == 0.0);
        assert!(
            a.commutator(&ComplexMatrix::identity(3))
                .unwrap()
                .frobenius_norm()
                == 0.0
        );
        let d = ComplexMatrix::real_diagonal(&[1.0, 2.0]);
        let e = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let k = d.commutator(&e).unwrap();
        let expected = ComplexMatrix::from_real_rows(&[vec![0.0, -1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(k, expected);
        assert!(matches!(
            a.commutator(&ComplexMatrix::zeros(3, 2)),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn determinant_examples() {
        assert_eq!(
            ComplexMatrix::identity(4).determinant().unwrap(),
            c(1.0, 0.0)
        );
        let d = ComplexMatrix::diagonal(&[c(2.0, 0.0), c(0.0, 3.0)]);
        assert_eq!(d.determinant().unwrap(), c(0.0, 6.0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=4 {
            for _ in 0..20 {
                let a = sampling::random_matrix(&mut rng, n, n);
                let lu = a.determinant().unwrap();
                let cof = cofactor_det(&a);
                assert!(
                    (lu - cof).norm() <= 1e-12 * (1.0 + cof.norm()),
                    "{lu} vs {cof}"
                );
            }
        }
        assert!(matches!(
            ComplexMatrix::zeros(2, 3).determinant(),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn lu_examples() {
        let (l, r) = ComplexMatrix::identity(3).lu_unpivoted().unwrap();
        assert_eq!(l, ComplexMatrix::identity(3));
        assert_eq!(r, ComplexMatrix::identity(3));

        let x = c(0.3, -0.7);
        let m = ComplexMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 0.0)], vec![x, c(1.0, 0.0)]])
            .unwrap();
        let (l, r) = m.lu_unpivoted().unwrap();
        assert_eq!(l, m);
        assert_eq!(r, ComplexMatrix::identity(2));

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = sampling::random_matrix(&mut rng, 4, 4)
            .add(&ComplexMatrix::identity(4).scale(c(3.0, 0.0)))
            .unwrap();
        let (l, r) = a.lu_unpivoted().unwrap();
        for i in 0..4 {
            assert_eq!(l[(i, i)], c(1.0, 0.0));
            for j in i + 1..4 {
                assert_eq!(l[(i, j)], c(0.0, 0.0));
                assert_eq!(r[(j, i)], c(0.0, 0.0));
            }
        }
        assert!(l.matmul(&r).unwrap().sub(&a).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn lu_reports_failing_minor() {
        let a = ComplexMatrix::from_real_rows(&[
            vec![1.0, 2.0, 0.0],
            vec![2.0, 4.0, 1.0],
            vec![0.0, 1.0, 1.0],
        ])
        .unwrap();
        match a.lu_unpivoted() {
            Err(Error::SingularPivot { minor, .. }) => assert_eq!(minor, 2),
            other => panic!("unexpected {other:?}"),
        }
        let b = ComplexMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            b.lu_unpivoted(),
            Err(Error::SingularPivot { minor: 1, .. })
        ));
        // the same matrix passes once the tolerance is disabled and the pivot is merely small
        let c_ = ComplexMatrix::from_real_rows(&[vec![1e-12, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(c_.lu_unpivoted().is_err());
        assert!(c_.lu_unpivoted_with_tolerance(0.0).is_ok());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            ComplexMatrix::new(1, 1, vec![c(f64::NAN, 0.0)]),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            ComplexMatrix::new(2, 2, vec![c(0.0, 0.0)]),
            Err(Error::EntryCount { .. })
        ));
    }
}
