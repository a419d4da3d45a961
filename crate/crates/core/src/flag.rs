//! Local complex coordinates on the flag manifold `U(n)/U(1)^n`.
//!
//! A point is represented by a unit lower-triangular frame `F` whose
//! strictly-lower entries are the coordinates. Orthonormalizing the columns
//! of `F` (Gram-Schmidt, first column first) gives a unitary representative
//! of the coset; right multiplication by a diagonal unitary does not move
//! the point, and [`coords_from_unitary`] undoes the construction modulo
//! exactly those phases.
//!
//! Coordinates are stored column by column: `(2,1), (3,1), ..., (n,1),
//! (3,2), ...`. For n = 3 that is `(x, y, z)`; for n = 4 it is
//! `(x1, x2, x3, y1, y2, z1)`.

use crate::error::{Error, Result};
use crate::linalg::{Complex, ComplexMatrix};

/// Unitarity tolerance accepted by [`coords_from_unitary`].
pub const UNITARITY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FlagCoordinates {
    n: usize,
    values: Vec<Complex>,
}

impl FlagCoordinates {
    pub fn new(n: usize, values: Vec<Complex>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidCoordinates(format!(
                "n must be at least 2, got {n}"
            )));
        }
        let expected = n * (n - 1) / 2;
        if values.len() != expected {
            return Err(Error::LengthMismatch {
                what: "flag coordinates",
                expected,
                found: values.len(),
            });
        }
        if !values.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite("flag coordinates"));
        }
        Ok(Self { n, values })
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(n, vec![Complex::new(0.0, 0.0); n * (n - 1) / 2]).expect("n >= 2")
    }

    /// `(x, y, z)` sitting at `(2,1), (3,1), (3,2)`.
    pub fn n3(x: Complex, y: Complex, z: Complex) -> Self {
        Self {
            n: 3,
            values: vec![x, y, z],
        }
    }

    /// `(x1, x2, x3, y1, y2, z1)`.
    pub fn n4(values: [Complex; 6]) -> Self {
        Self {
            n: 4,
            values: values.to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[Complex] {
        &self.values
    }

    /// Strictly-lower index pairs (0-based, row > col) in storage order.
    pub fn index_pairs(n: usize) -> Vec<(usize, usize)> {
        (0..n)
            .flat_map(|col| (col + 1..n).map(move |row| (row, col)))
            .collect()
    }

    fn offset(&self, row: usize, col: usize) -> usize {
        assert!(
            row > col && row < self.n,
            "({row}, {col}) is not strictly lower"
        );
        (0..col).map(|c| self.n - 1 - c).sum::<usize>() + (row - col - 1)
    }

    /// Coordinate at 0-based position `(row, col)`, `row > col`.
    pub fn get(&self, row: usize, col: usize) -> Complex {
        self.values[self.offset(row, col)]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.n, other.n);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn require(&self, op: &'static str, n: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::Unsupported { op, n: self.n });
        }
        Ok(())
    }
}

/// Gram-Schmidt normalization denominators `Delta_1 .. Delta_{n-1}`.
///
/// `Delta_k` is the leading k x k Gram determinant of the frame columns,
/// i.e. one plus the squared moduli of all k x k minors of the first k
/// columns of `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationFactors {
    deltas: Vec<f64>,
}

impl NormalizationFactors {
    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    /// `Delta_k`, 1-based; `Delta_0 = Delta_n = 1`.
    pub fn delta(&self, k: usize) -> f64 {
        if k == 0 || k > self.deltas.len() {
            1.0
        } else {
            self.deltas[k - 1]
        }
    }

    /// Generic values from the Gram-Schmidt column norms,
    /// `Delta_k = |V~_1|^2 ... |V~_k|^2`. Works for every n.
    pub fn from_gram_schmidt(c: &FlagCoordinates) -> Self {
        let (_, norms_sq) = orthonormalize(&unipotent_frame(c));
        let mut acc = 1.0;
        let deltas = norms_sq[..c.n - 1]
            .iter()
            .map(|s| {
                acc *= s;
                acc
            })
            .collect();
        Self { deltas }
    }

    /// Diagonal factors that turn the closed-form (polynomial) frame columns
    /// into orthonormal ones. For n = 4 the third column carries the extra
    /// `1/Delta_1` of the displayed `a_i`; every other column `k` is scaled
    /// by `1/sqrt(Delta_{k-1} Delta_k)`.
    pub fn column_scales(&self) -> Vec<f64> {
        let n = self.deltas.len() + 1;
        (1..=n)
            .map(|k| {
                if n == 4 && k == 3 {
                    1.0 / (self.delta(1) * (self.delta(2) * self.delta(3)).sqrt())
                } else {
                    1.0 / (self.delta(k - 1) * self.delta(k)).sqrt()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KahlerData {
    /// `K = log(Delta_1 Delta_2)`.
    pub potential: f64,
    /// Coefficient `2 / (Delta_1 Delta_2)^2` of the coordinate volume element.
    pub volume_density: f64,
}

/// Unit lower-triangular frame with the coordinates below the diagonal.
pub fn unipotent_frame(c: &FlagCoordinates) -> ComplexMatrix {
    let n = c.n;
    ComplexMatrix::from_fn(n, n, |i, j| {
        if i == j {
            Complex::new(1.0, 0.0)
        } else if i > j {
            c.get(i, j)
        } else {
            Complex::new(0.0, 0.0)
        }
    })
}

/// Orthonormalizes the columns in order, returning the unitary and the
/// squared norms of the projected columns `|V~_k|^2`.
fn orthonormalize(frame: &ComplexMatrix) -> (ComplexMatrix, Vec<f64>) {
    let n = frame.n_cols();
    let mut basis: Vec<Vec<Complex>> = Vec::with_capacity(n);
    let mut norms_sq = Vec::with_capacity(n);
    for k in 0..n {
        let mut v = frame.column(k);
        // two modified passes keep orthogonality at rounding level for
        // badly scaled frames
        for _ in 0..2 {
            for q in &basis {
                let proj: Complex = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= qi * proj;
                }
            }
        }
        let norm_sq: f64 = v.iter().map(Complex::norm_sqr).sum();
        let inv = 1.0 / norm_sq.sqrt();
        basis.push(v.into_iter().map(|z| z * inv).collect());
        norms_sq.push(norm_sq);
    }
    (ComplexMatrix::from_columns(&basis), norms_sq)
}

/// Generic-n unitary representative: Gram-Schmidt on the frame columns.
pub fn gram_schmidt_unitary(c: &FlagCoordinates) -> ComplexMatrix {
    orthonormalize(&unipotent_frame(c)).0
}

/// Polynomial frame columns before normalization, together with the
/// normalization data (closed forms, n = 3 and n = 4 only).
#[derive(Debug, Clone)]
pub struct ClosedFormFrame {
    pub columns: ComplexMatrix,
    pub factors: NormalizationFactors,
}

impl ClosedFormFrame {
    pub fn unitary(&self) -> ComplexMatrix {
        let scales = self.factors.column_scales();
        ComplexMatrix::from_fn(self.columns.n_rows(), self.columns.n_cols(), |i, j| {
            self.columns[(i, j)] * scales[j]
        })
    }
}

pub fn closed_form_frame(c: &FlagCoordinates) -> Result<ClosedFormFrame> {
    match c.n {
        3 => Ok(closed_form_frame_n3(c)),
        4 => Ok(closed_form_frame_n4(c)),
        n => Err(Error::Unsupported {
            op: "closed_form_frame",
            n,
        }),
    }
}

fn deltas_n3(x: Complex, y: Complex, z: Complex) -> [f64; 2] {
    let d1 = 1.0 + x.norm_sqr() + y.norm_sqr();
    let d2 = 1.0 + z.norm_sqr() + (x * z - y).norm_sqr();
    [d1, d2]
}

fn closed_form_frame_n3(c: &FlagCoordinates) -> ClosedFormFrame {
    let (x, y, z) = (c.values[0], c.values[1], c.values[2]);
    let one = Complex::new(1.0, 0.0);
    let w = x * z - y;
    let columns = ComplexMatrix::from_columns(&[
        vec![one, x, y],
        vec![
            -(x.conj() + y.conj() * z),
            one - w * y.conj(),
            z + x.conj() * w,
        ],
        vec![x.conj() * z.conj() - y.conj(), -z.conj(), one],
    ]);
    ClosedFormFrame {
        columns,
        factors: NormalizationFactors {
            deltas: deltas_n3(x, y, z).to_vec(),
        },
    }
}

fn deltas_n4(v: &[Complex]) -> [f64; 3] {
    let [x1, x2, x3, y1, y2, z1] = [v[0], v[1], v[2], v[3], v[4], v[5]];
    let d1 = 1.0 + x1.norm_sqr() + x2.norm_sqr() + x3.norm_sqr();
    let d2 = 1.0
        + y1.norm_sqr()
        + y2.norm_sqr()
        + (x2 - x1 * y1).norm_sqr()
        + (x3 - x1 * y2).norm_sqr()
        + (x2 * y2 - x3 * y1).norm_sqr();
    let d3 = 1.0
        + z1.norm_sqr()
        + (y2 - y1 * z1).norm_sqr()
        + (x1 * (y2 - y1 * z1) - (x3 - x2 * z1)).norm_sqr();
    [d1, d2, d3]
}

fn closed_form_frame_n4(c: &FlagCoordinates) -> ClosedFormFrame {
    let v = &c.values;
    let [x1, x2, x3, y1, y2, z1] = [v[0], v[1], v[2], v[3], v[4], v[5]];
    let [d1, d2, d3] = deltas_n4(v);
    let one = Complex::new(1.0, 0.0);
    let (d1c, d2c) = (Complex::new(d1, 0.0), Complex::new(d2, 0.0));

    let t = x1.conj() + x2.conj() * y1 + x3.conj() * y2;
    let second = vec![-t, d1c - x1 * t, y1 * d1c - x2 * t, y2 * d1c - x3 * t];

    // shared pieces of a_1 .. a_4
    let p = x2.conj() + z1 * x3.conj();
    let q =
        (y1.conj() * d1c - x2.conj() * t.conj()) + z1 * (y2.conj() * d1c - x3.conj() * t.conj());
    let third = vec![
        -p * d2c + q * t,
        -p * x1 * d2c - q * second[1],
        d1c * d2c - p * x2 * d2c - q * second[2],
        z1 * d1c * d2c - p * x3 * d2c - q * second[3],
    ];

    let (x1b, x2b, x3b, y1b, y2b, z1b) = (
        x1.conj(),
        x2.conj(),
        x3.conj(),
        y1.conj(),
        y2.conj(),
        z1.conj(),
    );
    let fourth = vec![
        -x3b + x1b * y2b + x2b * z1b - x1b * y1b * z1b,
        -y2b + y1b * z1b,
        -z1b,
        one,
    ];

    ClosedFormFrame {
        columns: ComplexMatrix::from_columns(&[vec![one, x1, x2, x3], second, third, fourth]),
        factors: NormalizationFactors {
            deltas: vec![d1, d2, d3],
        },
    }
}

/// Explicit three-generation unitary in `(x, y, z)`.
pub fn closed_form_unitary_n3(c: &FlagCoordinates) -> Result<ComplexMatrix> {
    c.require("closed_form_unitary_n3", 3)?;
    Ok(closed_form_frame_n3(c).unitary())
}

/// Explicit four-generation unitary in `(x1, x2, x3, y1, y2, z1)`.
pub fn closed_form_unitary_n4(c: &FlagCoordinates) -> Result<ComplexMatrix> {
    c.require("closed_form_unitary_n4", 4)?;
    Ok(closed_form_frame_n4(c).unitary())
}

/// Closed-form `Delta` list for n = 3 or n = 4.
pub fn normalization_factors(c: &FlagCoordinates) -> Result<NormalizationFactors> {
    let deltas = match c.n {
        3 => deltas_n3(c.values[0], c.values[1], c.values[2]).to_vec(),
        4 => deltas_n4(&c.values).to_vec(),
        n => {
            return Err(Error::Unsupported {
                op: "normalization_factors",
                n,
            })
        }
    };
    Ok(NormalizationFactors { deltas })
}

/// Kahler potential and volume density at a point of `U(3)/U(1)^3`.
pub fn kahler_data(c: &FlagCoordinates) -> Result<KahlerData> {
    c.require("kahler_data", 3)?;
    let [d1, d2] = deltas_n3(c.values[0], c.values[1], c.values[2]);
    let product = d1 * d2;
    Ok(KahlerData {
        potential: product.ln(),
        volume_density: 2.0 / (product * product),
    })
}

/// Coordinates of the coset `w U(1)^n`: the strictly-lower part of `L` in
/// the unpivoted factorization `w = L R`.
pub fn coords_from_unitary(w: &ComplexMatrix) -> Result<FlagCoordinates> {
    if !w.is_square() {
        return Err(Error::NotSquare {
            op: "coords_from_unitary",
            rows: w.n_rows(),
            cols: w.n_cols(),
        });
    }
    let n = w.n_rows();
    if n < 2 {
        return Err(Error::InvalidCoordinates(format!(
            "n must be at least 2, got {n}"
        )));
    }
    let deviation = w.unitarity_defect();
    if deviation.is_nan() || deviation >= UNITARITY_TOLERANCE {
        return Err(Error::NotUnitary { deviation });
    }
    let (l, _) = w.lu_unpivoted().map_err(|e| match e {
        Error::SingularPivot { minor, .. } => Error::GaugeSingular { minor },
        other => other,
    })?;
    let values = FlagCoordinates::index_pairs(n)
        .into_iter()
        .map(|(i, j)| l[(i, j)])
        .collect();
    FlagCoordinates::new(n, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn zero() -> Complex {
        c(0.0, 0.0)
    }

    /// Gram-Schmidt written with explicit projectors `(E - P_1)...(E - P_{k-1})`.
    fn projector_chain_unitary(coords: &FlagCoordinates) -> ComplexMatrix {
        let f = unipotent_frame(coords);
        let n = coords.n();
        let e = ComplexMatrix::identity(n);
        let mut projectors: Vec<ComplexMatrix> = Vec::new();
        let mut columns = Vec::new();
        for k in 0..n {
            let mut v = ComplexMatrix::new(n, 1, f.column(k)).unwrap();
            for p in projectors.iter().rev() {
                v = e.sub(p).unwrap().matmul(&v).unwrap();
            }
            let norm = v.frobenius_norm();
            let hat = v.scale(c(1.0 / norm, 0.0));
            projectors.push(hat.matmul(&hat.adjoint()).unwrap());
            columns.push(hat.column(0));
        }
        ComplexMatrix::from_columns(&columns)
    }

    #[test]
    fn storage_order_matches_named_coordinates() {
        assert_eq!(
            FlagCoordinates::index_pairs(3),
            vec![(1, 0), (2, 0), (2, 1)]
        );
        assert_eq!(
            FlagCoordinates::index_pairs(4),
            vec![(1, 0), (2, 0), (3, 0), (2, 1), (3, 1), (3, 2)]
        );
        let v: Vec<Complex> = (1..=6).map(|k| c(k as f64, 0.0)).collect();
        let coords = FlagCoordinates::new(4, v).unwrap();
        assert_eq!(coords.get(3, 0), c(3.0, 0.0));
        assert_eq!(coords.get(2, 1), c(4.0, 0.0));
        assert_eq!(coords.get(3, 2), c(6.0, 0.0));
    }

    #[test]
    fn rejects_bad_coordinates() {
        assert!(FlagCoordinates::new(1, vec![]).is_err());
        assert!(matches!(
            FlagCoordinates::new(3, vec![zero(); 2]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            FlagCoordinates::new(2, vec![c(f64::INFINITY, 0.0)]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn frame_examples() {
        assert_eq!(
            unipotent_frame(&FlagCoordinates::zeros(3)),
            ComplexMatrix::identity(3)
        );
        let (x, y, z) = (c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0));
        let f = unipotent_frame(&FlagCoordinates::n3(x, y, z));
        let one = c(1.0, 0.0);
        assert_eq!(
            f.rows(),
            vec![
                vec![one, zero(), zero()],
                vec![x, one, zero()],
                vec![y, z, one]
            ]
        );
        let v: [Complex; 6] = std::array::from_fn(|k| c(k as f64 + 1.0, -(k as f64)));
        let f4 = unipotent_frame(&FlagCoordinates::n4(v));
        assert_eq!(f4[(1, 0)], v[0]);
        assert_eq!(f4[(2, 0)], v[1]);
        assert_eq!(f4[(3, 0)], v[2]);
        assert_eq!(f4[(2, 1)], v[3]);
        assert_eq!(f4[(3, 1)], v[4]);
        assert_eq!(f4[(3, 2)], v[5]);
        assert_eq!(f4[(0, 3)], zero());
    }

    #[test]
    fn gram_schmidt_examples() {
        for n in [2, 3, 4, 6] {
            let u = gram_schmidt_unitary(&FlagCoordinates::zeros(n));
            assert!(u.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-15);
        }
        let u = gram_schmidt_unitary(&FlagCoordinates::n3(c(1.0, 0.0), zero(), zero()));
        let h = FRAC_1_SQRT_2;
        let expected = ComplexMatrix::from_real_rows(&[
            vec![h, -h, 0.0],
            vec![h, h, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(u.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn gram_schmidt_matches_projector_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 3, 4, 5, 6] {
            for _ in 0..50 {
                let coords = sampling::random_coordinates(&mut rng, n, 3.0);
                let a = gram_schmidt_unitary(&coords);
                let b = projector_chain_unitary(&coords);
                assert!(a.max_abs_diff(&b) < 1e-10, "n={n}: {}", a.max_abs_diff(&b));
            }
        }
    }

    #[test]
    fn closed_form_n3_examples() {
        let u = closed_form_unitary_n3(&FlagCoordinates::zeros(3)).unwrap();
        assert_eq!(u, ComplexMatrix::identity(3));
        let u = closed_form_unitary_n3(&FlagCoordinates::n3(zero(), zero(), c(0.0, 1.0))).unwrap();
        let h = FRAC_1_SQRT_2;
        let expected = ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.0), zero(), zero()],
            vec![zero(), c(h, 0.0), c(0.0, h)],
            vec![zero(), c(0.0, h), c(h, 0.0)],
        ])
        .unwrap();
        assert!(u.max_abs_diff(&expected) < 1e-15);
        assert!(matches!(
            closed_form_unitary_n3(&FlagCoordinates::zeros(4)),
            Err(Error::Unsupported { .. })
        ));
    }

    #[test]
    fn closed_form_n4_examples() {
        let u = closed_form_unitary_n4(&FlagCoordinates::zeros(4)).unwrap();
        assert_eq!(u, ComplexMatrix::identity(4));
        let mut v = [zero(); 6];
        v[0] = c(1.0, 0.0);
        let u = closed_form_unitary_n4(&FlagCoordinates::n4(v)).unwrap();
        let h = FRAC_1_SQRT_2;
        let expected = ComplexMatrix::from_real_rows(&[
            vec![h, -h, 0.0, 0.0],
            vec![h, h, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(u.max_abs_diff(&expected) < 1e-15);
        assert!(closed_form_unitary_n4(&FlagCoordinates::zeros(3)).is_err());
    }

    #[test]
    fn normalization_factor_examples() {
        let f = normalization_factors(&FlagCoordinates::zeros(3)).unwrap();
        assert_eq!(f.deltas(), &[1.0, 1.0]);
        let f = normalization_factors(&FlagCoordinates::n3(c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 0.0)))
            .unwrap();
        assert!((f.deltas()[0] - 6.0).abs() < 1e-14);
        assert!((f.deltas()[1] - 7.0).abs() < 1e-14);
        assert!(matches!(
            normalization_factors(&FlagCoordinates::zeros(6)),
            Err(Error::Unsupported { n: 6, .. })
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [3, 4] {
            for _ in 0..100 {
                let coords = sampling::random_coordinates(&mut rng, n, 3.0);
                let closed = normalization_factors(&coords).unwrap();
                let generic = NormalizationFactors::from_gram_schmidt(&coords);
                for (a, b) in closed.deltas().iter().zip(generic.deltas()) {
                    assert!((a - b).abs() <= 1e-11 * a, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn generic_deltas_are_gram_minors() {
        // Delta_k equals det of the leading k x k block of F^H F.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let coords = sampling::random_coordinates(&mut rng, 6, 2.0);
        let f = unipotent_frame(&coords);
        let gram = f.adjoint().matmul(&f).unwrap();
        let deltas = NormalizationFactors::from_gram_schmidt(&coords);
        for k in 1..6 {
            let block = ComplexMatrix::from_fn(k, k, |i, j| gram[(i, j)]);
            let minor = block.determinant().unwrap();
            assert!((minor.re - deltas.delta(k)).abs() <= 1e-9 * minor.re);
            assert!(minor.im.abs() <= 1e-9 * minor.re);
        }
    }

    #[test]
    fn kahler_examples() {
        let k = kahler_data(&FlagCoordinates::zeros(3)).unwrap();
        assert_eq!(k.potential, 0.0);
        assert_eq!(k.volume_density, 2.0);
        let k = kahler_data(&FlagCoordinates::n3(c(1.0, 0.0), zero(), zero())).unwrap();
        assert!((k.potential - 2f64.ln()).abs() < 1e-15);
        assert!((k.volume_density - 0.5).abs() < 1e-15);
        assert!(kahler_data(&FlagCoordinates::zeros(4)).is_err());
    }

    #[test]
    fn extraction_examples() {
        let coords = coords_from_unitary(&ComplexMatrix::identity(3)).unwrap();
        assert_eq!(coords, FlagCoordinates::zeros(3));

        let not_unitary = ComplexMatrix::real_diagonal(&[1.0, 2.0, 1.0]);
        assert!(matches!(
            coords_from_unitary(&not_unitary),
            Err(Error::NotUnitary { .. })
        ));

        // permutation: W_11 = 0 sits outside the chart
        let perm = ComplexMatrix::from_real_rows(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(matches!(
            coords_from_unitary(&perm),
            Err(Error::GaugeSingular { minor: 1 })
        ));
        let perm23 = ComplexMatrix::from_real_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        assert!(matches!(
            coords_from_unitary(&perm23),
            Err(Error::GaugeSingular { minor: 2 })
        ));
    }

    #[test]
    fn n3_extraction_ratios() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..100 {
            let coords = sampling::random_coordinates(&mut rng, 3, 3.0);
            let phases = sampling::random_phases(&mut rng, 3);
            let d: Vec<Complex> = phases
                .iter()
                .map(|&t| Complex::from_polar(1.0, t))
                .collect();
            let w = gram_schmidt_unitary(&coords)
                .matmul(&ComplexMatrix::diagonal(&d))
                .unwrap();
            let x = w[(1, 0)] / w[(0, 0)];
            let y = w[(2, 0)] / w[(0, 0)];
            let z = -(w[(1, 2)] / w[(2, 2)]).conj();
            let extracted = coords_from_unitary(&w).unwrap();
            let ratios = FlagCoordinates::n3(x, y, z);
            assert!(
                extracted.max_abs_diff(&ratios)
                    < 1e-10 * (1.0 + ratios.values().iter().map(|v| v.norm()).fold(0.0, f64::max))
            );
        }
    }

    #[test]
    fn r_diagonal_has_unit_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for n in [3, 4, 6] {
            let coords = sampling::random_coordinates(&mut rng, n, 3.0);
            let (_, r) = gram_schmidt_unitary(&coords).lu_unpivoted().unwrap();
            let product: f64 = (0..n).map(|k| r[(k, k)].norm()).product();
            assert!((product - 1.0).abs() < 1e-10);
        }
    }

    fn coords_strategy(n: usize) -> impl Strategy<Value = FlagCoordinates> {
        prop::collection::vec((0.0..3.0f64, -3.2..3.2f64), n * (n - 1) / 2).prop_map(move |v| {
            FlagCoordinates::new(
                n,
                v.into_iter()
                    .map(|(r, t)| Complex::from_polar(r, t))
                    .collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn first_column_is_normalized_frame_column(coords in coords_strategy(5)) {
            let u = gram_schmidt_unitary(&coords);
            let f = unipotent_frame(&coords);
            let d1 = NormalizationFactors::from_gram_schmidt(&coords).delta(1);
            for i in 0..5 {
                prop_assert!((u[(i, 0)] - f[(i, 0)] / d1.sqrt()).norm() < 1e-15);
            }
        }

        #[test]
        fn unitary_for_every_chart_point(coords in coords_strategy(4)) {
            prop_assert!(gram_schmidt_unitary(&coords).unitarity_defect() < 1e-12);
            prop_assert!(closed_form_unitary_n4(&coords).unwrap().unitarity_defect() < 1e-12);
        }

        #[test]
        fn closed_form_n3_matches_gram_schmidt(coords in coords_strategy(3)) {
            let a = closed_form_unitary_n3(&coords).unwrap();
            prop_assert!(a.max_abs_diff(&gram_schmidt_unitary(&coords)) < 1e-13);
        }

        #[test]
        fn extraction_inverts_construction(coords in coords_strategy(4)) {
            let back = coords_from_unitary(&gram_schmidt_unitary(&coords)).unwrap();
            prop_assert!(back.max_abs_diff(&coords) < 1e-10);
        }

        #[test]
        fn density_bounded(coords in coords_strategy(3)) {
            let k = kahler_data(&coords).unwrap();
            prop_assert!(k.potential >= 0.0);
            prop_assert!(k.volume_density > 0.0 && k.volume_density <= 2.0);
        }
    }
}
