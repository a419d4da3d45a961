//! CKM matrix `V = U^H U'` from two coordinate sets, the closed-form entry
//! polynomials `f_ij`, and plaquette Jarlskog invariants.

use crate::error::{Error, Result};
use crate::flag::{self, FlagCoordinates, NormalizationFactors};
use crate::linalg::{Complex, ComplexMatrix};

#[derive(Debug, Clone)]
pub struct CkmResult {
    /// The unitary mixing matrix.
    pub v: ComplexMatrix,
    /// Entry matrix before normalization: `v = diag(left) f diag(right)`.
    pub f: ComplexMatrix,
    pub left_deltas: NormalizationFactors,
    pub right_deltas: NormalizationFactors,
}

impl CkmResult {
    pub fn n(&self) -> usize {
        self.v.n_rows()
    }

    /// `diag(left_scales) * f * diag(right_scales)`.
    pub fn rescaled_f(&self) -> ComplexMatrix {
        let l = self.left_deltas.column_scales();
        let r = self.right_deltas.column_scales();
        ComplexMatrix::from_fn(self.n(), self.n(), |i, j| self.f[(i, j)] * l[i] * r[j])
    }
}

fn require_pair(
    op: &'static str,
    left: &FlagCoordinates,
    right: &FlagCoordinates,
) -> Result<usize> {
    if left.n() != right.n() {
        return Err(Error::Shape {
            op,
            left: (left.n(), left.n()),
            right: (right.n(), right.n()),
        });
    }
    Ok(left.n())
}

/// `V = U(left)^H U(right)` alone, via Gram-Schmidt.
pub fn mixing_matrix(left: &FlagCoordinates, right: &FlagCoordinates) -> Result<ComplexMatrix> {
    require_pair("mixing_matrix", left, right)?;
    flag::gram_schmidt_unitary(left)
        .adjoint()
        .matmul(&flag::gram_schmidt_unitary(right))
}

/// `V = U(left)^H U(right)` with its `f` decomposition. Closed forms are used
/// for `f` when n is 3 or 4; otherwise `f` is recovered from `V` with the
/// Gram-Schmidt normalization factors.
pub fn build_ckm(left: &FlagCoordinates, right: &FlagCoordinates) -> Result<CkmResult> {
    let n = require_pair("build_ckm", left, right)?;
    let v = mixing_matrix(left, right)?;
    let (f, left_deltas, right_deltas) = match n {
        3 => (
            closed_form_f_n3(left, right)?,
            flag::normalization_factors(left)?,
            flag::normalization_factors(right)?,
        ),
        4 => (
            closed_form_f_n4(left, right)?,
            flag::normalization_factors(left)?,
            flag::normalization_factors(right)?,
        ),
        _ => {
            let ld = NormalizationFactors::from_gram_schmidt(left);
            let rd = NormalizationFactors::from_gram_schmidt(right);
            let (ls, rs) = (ld.column_scales(), rd.column_scales());
            let f = ComplexMatrix::from_fn(n, n, |i, j| v[(i, j)] / (ls[i] * rs[j]));
            (f, ld, rd)
        }
    };
    Ok(CkmResult {
        v,
        f,
        left_deltas,
        right_deltas,
    })
}

/// The nine entry polynomials for three generations, left `(x, y, z)`
/// against right `(u, v, w)`.
pub fn closed_form_f_n3(left: &FlagCoordinates, right: &FlagCoordinates) -> Result<ComplexMatrix> {
    for c in [left, right] {
        if c.n() != 3 {
            return Err(Error::Unsupported {
                op: "closed_form_f_n3",
                n: c.n(),
            });
        }
    }
    let [x, y, z]: [Complex; 3] = left.values().try_into().expect("n = 3");
    let [u, v, w]: [Complex; 3] = right.values().try_into().expect("n = 3");
    let one = Complex::new(1.0, 0.0);
    let (xb, yb, zb) = (x.conj(), y.conj(), z.conj());
    let (ub, vb, wb) = (u.conj(), v.conj(), w.conj());

    // recurring sub-expressions of U and U'
    let s = x * z - y;
    let sp = u * w - v;
    let a = x + y * zb;
    let b = one - (xb * zb - yb) * y;
    let c = zb + x * (xb * zb - yb);
    let ap = ub + vb * w;
    let bp = one - sp * vb;
    let cp = w + ub * sp;
    let dp = ub * wb - vb;

    let f = [
        [
            one + xb * u + yb * v,
            -ap + xb * bp + yb * cp,
            dp - xb * wb + yb,
        ],
        [
            -a + b * u + c * v,
            a * ap + b * bp + c * cp,
            -a * dp - b * wb + c,
        ],
        [s - z * u + v, -s * ap - z * bp + cp, s * dp + z * wb + one],
    ];
    Ok(ComplexMatrix::from_fn(3, 3, |i, j| f[i][j]))
}

/// Four-generation `f`: the adjoint of the left polynomial frame times the
/// right one.
pub fn closed_form_f_n4(left: &FlagCoordinates, right: &FlagCoordinates) -> Result<ComplexMatrix> {
    for c in [left, right] {
        if c.n() != 4 {
            return Err(Error::Unsupported {
                op: "closed_form_f_n4",
                n: c.n(),
            });
        }
    }
    let l = flag::closed_form_frame(left)?;
    let r = flag::closed_form_frame(right)?;
    l.columns.adjoint().matmul(&r.columns)
}

/// Two rows `(i, k)` and two columns `(j, l)`, 0-based, `i < k`, `j < l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Plaquette {
    rows: (usize, usize),
    cols: (usize, usize),
}

impl Default for Plaquette {
    /// Rows (1,3) x columns (1,3) in 1-based labels.
    fn default() -> Self {
        Self {
            rows: (0, 2),
            cols: (0, 2),
        }
    }
}

impl Plaquette {
    pub fn new(rows: (usize, usize), cols: (usize, usize)) -> Result<Self> {
        if rows.0 >= rows.1 || cols.0 >= cols.1 {
            return Err(Error::InvalidPlaquette(format!(
                "indices must be strictly increasing, got rows {rows:?} cols {cols:?}"
            )));
        }
        Ok(Self { rows, cols })
    }

    /// Rows (1,2) x columns (1,2) in 1-based labels, the usual convention.
    pub fn standard() -> Self {
        Self {
            rows: (0, 1),
            cols: (0, 1),
        }
    }

    pub fn rows(&self) -> (usize, usize) {
        self.rows
    }

    pub fn cols(&self) -> (usize, usize) {
        self.cols
    }

    /// Every plaquette of an n x n matrix, rows-major.
    pub fn all(n: usize) -> Vec<Self> {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect();
        pairs
            .iter()
            .flat_map(|&rows| pairs.iter().map(move |&cols| Self { rows, cols }))
            .collect()
    }

    /// For n = 3: sign relating this plaquette to the standard one. With the
    /// omitted row `m` and omitted column `p`, the plaquette equals
    /// `(-1)^(m+p) J`.
    pub fn checkerboard_sign(&self) -> f64 {
        let m = 3 - self.rows.0 - self.rows.1;
        let p = 3 - self.cols.0 - self.cols.1;
        if (m + p).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jarlskog {
    pub value: f64,
    /// False for n > 3, where the plaquettes no longer share one value.
    pub single_invariant: bool,
}

/// `Im(V_ij V_kl conj(V_il) conj(V_kj))`.
pub fn jarlskog_invariant(v: &ComplexMatrix, p: Plaquette) -> Result<Jarlskog> {
    if !v.is_square() {
        return Err(Error::NotSquare {
            op: "jarlskog_invariant",
            rows: v.n_rows(),
            cols: v.n_cols(),
        });
    }
    let n = v.n_rows();
    let ((i, k), (j, l)) = (p.rows, p.cols);
    if k >= n || l >= n {
        return Err(Error::InvalidPlaquette(format!(
            "plaquette rows {:?} cols {:?} out of range for n = {n}",
            p.rows, p.cols
        )));
    }
    let q = v[(i, j)] * v[(k, l)] * v[(i, l)].conj() * v[(k, j)].conj();
    Ok(Jarlskog {
        value: q.im,
        single_invariant: n <= 3,
    })
}

/// All `C(n,2)^2` plaquette values (36 for n = 4).
pub fn plaquette_values(v: &ComplexMatrix) -> Result<Vec<(Plaquette, f64)>> {
    Plaquette::all(v.n_rows())
        .into_iter()
        .map(|p| jarlskog_invariant(v, p).map(|j| (p, j.value)))
        .collect()
}

/// Three-generation `J = Im(V_11 V_33 conj(V_13) conj(V_31))` evaluated from
/// the coordinate expression, without forming `V`.
pub fn jarlskog_from_coords(left: &FlagCoordinates, right: &FlagCoordinates) -> Result<f64> {
    for c in [left, right] {
        if c.n() != 3 {
            return Err(Error::Unsupported {
                op: "jarlskog_from_coords",
                n: c.n(),
            });
        }
    }
    let [x, y, z]: [Complex; 3] = left.values().try_into().expect("n = 3");
    let [u, v, w]: [Complex; 3] = right.values().try_into().expect("n = 3");
    let one = Complex::new(1.0, 0.0);
    let (xb, yb, zb) = (x.conj(), y.conj(), z.conj());
    let (ub, vb, wb) = (u.conj(), v.conj(), w.conj());
    let numerator = (one + xb * u + yb * v)
        * (one + z * wb + (x * z - y) * (ub * wb - vb))
        * (xb * zb - yb - zb * ub + vb)
        * (u * w - v - x * w + y);
    let [d1, d2] = deltas(left)?;
    let [e1, e2] = deltas(right)?;
    Ok(numerator.im / (d1 * d2 * e1 * e2))
}

fn deltas(c: &FlagCoordinates) -> Result<[f64; 2]> {
    let f = flag::normalization_factors(c)?;
    Ok([f.delta(1), f.delta(2)])
}

/// `diag(e^{i left}) v diag(e^{i right})`.
pub fn rephase(
    v: &ComplexMatrix,
    left_phases: &[f64],
    right_phases: &[f64],
) -> Result<ComplexMatrix> {
    if left_phases.len() != v.n_rows() {
        return Err(Error::LengthMismatch {
            what: "left phases",
            expected: v.n_rows(),
            found: left_phases.len(),
        });
    }
    if right_phases.len() != v.n_cols() {
        return Err(Error::LengthMismatch {
            what: "right phases",
            expected: v.n_cols(),
            found: right_phases.len(),
        });
    }
    if !left_phases
        .iter()
        .chain(right_phases)
        .all(|t| t.is_finite())
    {
        return Err(Error::NonFinite("phases"));
    }
    let l: Vec<Complex> = left_phases
        .iter()
        .map(|&t| Complex::from_polar(1.0, t))
        .collect();
    let r: Vec<Complex> = right_phases
        .iter()
        .map(|&t| Complex::from_polar(1.0, t))
        .collect();
    Ok(ComplexMatrix::from_fn(v.n_rows(), v.n_cols(), |i, j| {
        l[i] * v[(i, j)] * r[j]
    }))
}
