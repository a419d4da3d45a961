//! Mass matrices, the commutator determinant `det[M, M']` and its closed
//! forms for two and three generations.
//!
//! With `M = U D U^H`, `M' = U' D' U'^H` and `V = U^H U'`,
//! `det[M, M'] = det(D V D' V^H - V D' V^H D)`. The matrix inside is
//! anti-hermitian, so the determinant is real for even n and purely
//! imaginary for odd n.

use crate::ckm::{self, Plaquette};
use crate::error::{Error, Result};
use crate::flag::{FlagCoordinates, UNITARITY_TOLERANCE};
use crate::linalg::{Complex, ComplexMatrix};

/// Relative hermiticity tolerance for inputs to [`commutator_det`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;
/// Relative bound on the non-dominant component of a parity-classified determinant.
pub const PARITY_RATIO: f64 = 1e-9;
/// Absolute bound used instead when the determinant itself is near zero.
pub const PARITY_FLOOR: f64 = 1e-12;
/// Relative bound on the imaginary residue of `-i det / (2 T B)`.
pub const IDENTITY_RESIDUE: f64 = 1e-9;

/// Strictly increasing positive masses of one quark sector.
#[derive(Debug, Clone, PartialEq)]
pub struct MassSpectrum {
    masses: Vec<f64>,
}

impl MassSpectrum {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidSpectrum("no masses given".into()));
        }
        if let Some(m) = masses.iter().find(|m| !m.is_finite() || **m <= 0.0) {
            return Err(Error::InvalidSpectrum(format!(
                "mass {m} is not a positive finite number"
            )));
        }
        if let Some(w) = masses.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpectrum(format!(
                "masses must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self { masses })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Product of all pairwise differences `m_j - m_i`, `i < j`
    /// (`T` for the up sector, `B` for the down sector).
    pub fn difference_product(&self) -> f64 {
        let m = &self.masses;
        (0..m.len())
            .flat_map(|i| (i + 1..m.len()).map(move |j| (i, j)))
            .map(|(i, j)| m[j] - m[i])
            .product()
    }
}

/// Hermitian mass matrices of the up and down sectors.
#[derive(Debug, Clone)]
pub struct MassMatrixPair {
    pub m: ComplexMatrix,
    pub m_prime: ComplexMatrix,
}

impl MassMatrixPair {
    pub fn new(
        u: &ComplexMatrix,
        s: &MassSpectrum,
        u_prime: &ComplexMatrix,
        s_prime: &MassSpectrum,
    ) -> Result<Self> {
        Ok(Self {
            m: build_mass_matrix(u, s)?,
            m_prime: build_mass_matrix(u_prime, s_prime)?,
        })
    }

    /// The pair in the eigenbasis of `M`: `(D, V D' V^H)`.
    pub fn in_mass_basis(
        v: &ComplexMatrix,
        s: &MassSpectrum,
        s_prime: &MassSpectrum,
    ) -> Result<Self> {
        Self::new(&ComplexMatrix::identity(s.len()), s, v, s_prime)
    }

    pub fn commutator_det(&self) -> Result<Complex> {
        commutator_det(&self.m, &self.m_prime)
    }
}

/// `U diag(s) U^H`, symmetrized to remove rounding asymmetry.
pub fn build_mass_matrix(u: &ComplexMatrix, s: &MassSpectrum) -> Result<ComplexMatrix> {
    if !u.is_square() || u.n_rows() != s.len() {
        return Err(Error::Shape {
            op: "build_mass_matrix",
            left: (u.n_rows(), u.n_cols()),
            right: (s.len(), s.len()),
        });
    }
    let deviation = u.unitarity_defect();
    if deviation.is_nan() || deviation >= UNITARITY_TOLERANCE {
        return Err(Error::NotUnitary { deviation });
    }
    let m = u
        .matmul(&ComplexMatrix::real_diagonal(s.masses()))?
        .matmul(&u.adjoint())?;
    Ok(m.add(&m.adjoint())?.scale(Complex::new(0.5, 0.0)))
}

fn require_hermitian(a: &ComplexMatrix) -> Result<()> {
    let deviation = a.hermiticity_defect();
    if deviation.is_nan() || deviation > HERMITIAN_TOLERANCE * a.frobenius_norm().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// `det(m m' - m' m)` for a hermitian pair.
pub fn commutator_det(m: &ComplexMatrix, m_prime: &ComplexMatrix) -> Result<Complex> {
    let k = m.commutator(m_prime)?;
    require_hermitian(m)?;
    require_hermitian(m_prime)?;
    k.determinant()
}

fn require_dims(
    op: &'static str,
    n: usize,
    s: &MassSpectrum,
    s_prime: &MassSpectrum,
    v: &ComplexMatrix,
) -> Result<()> {
    if s.len() != n || s_prime.len() != n || v.n_rows() != n || v.n_cols() != n {
        return Err(Error::Unsupported { op, n: v.n_rows() });
    }
    Ok(())
}

/// Two generations: `(m2-m1)^2 (m2'-m1')^2 |V11|^2 |V21|^2`.
pub fn closed_form_det_n2(
    s: &MassSpectrum,
    s_prime: &MassSpectrum,
    v: &ComplexMatrix,
) -> Result<f64> {
    require_dims("closed_form_det_n2", 2, s, s_prime, v)?;
    let d = s.masses()[1] - s.masses()[0];
    let dp = s_prime.masses()[1] - s_prime.masses()[0];
    Ok(d * d * dp * dp * v[(0, 0)].norm_sqr() * v[(1, 0)].norm_sqr())
}

/// Three generations: `T B * 2i Im(V11 V22 conj(V12) conj(V21))`.
pub fn closed_form_det_n3(
    s: &MassSpectrum,
    s_prime: &MassSpectrum,
    v: &ComplexMatrix,
) -> Result<Complex> {
    require_dims("closed_form_det_n3", 3, s, s_prime, v)?;
    let j = ckm::jarlskog_invariant(v, Plaquette::standard())?.value;
    let tb = s.difference_product() * s_prime.difference_product();
    Ok(Complex::new(0.0, 2.0 * tb * j))
}

/// Evaluates `J = -i det[M, M'] / (2 T B)` and the standard plaquette
/// invariant for the same mixing; returns `(from_det, from_plaquette)`.
///
/// The determinant is taken in the eigenbasis of `M`, i.e. of
/// `[D, V D' V^H]`, which equals `det[M, M']` exactly and avoids the
/// cancellation of the flavor-basis product.
pub fn jarlskog_identity_check(
    left: &FlagCoordinates,
    right: &FlagCoordinates,
    s: &MassSpectrum,
    s_prime: &MassSpectrum,
) -> Result<(f64, f64)> {
    if left.n() != 3 {
        return Err(Error::Unsupported {
            op: "jarlskog_identity_check",
            n: left.n(),
        });
    }
    let v = ckm::build_ckm(left, right)?.v;
    require_dims("jarlskog_identity_check", 3, s, s_prime, &v)?;
    let tb = s.difference_product() * s_prime.difference_product();
    if tb == 0.0 || !tb.is_finite() {
        return Err(Error::DegenerateMasses);
    }
    let det = MassMatrixPair::in_mass_basis(&v, s, s_prime)?.commutator_det()?;
    let j = -Complex::i() * det / (2.0 * tb);
    if j.im.abs() > IDENTITY_RESIDUE * j.re.abs() + PARITY_FLOOR {
        return Err(Error::ImaginaryResidue {
            residue: j.im,
            real: j.re,
        });
    }
    let plaquette = ckm::jarlskog_invariant(&v, Plaquette::standard())?.value;
    Ok((j.re, plaquette))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Real,
    PureImaginary,
}

/// Classifies `det[m, m']` as real or purely imaginary, failing when the
/// smaller component exceeds `PARITY_RATIO * |det|` (or `PARITY_FLOOR` for
/// a vanishing determinant).
pub fn det_parity_check(m: &ComplexMatrix, m_prime: &ComplexMatrix) -> Result<Parity> {
    let d = commutator_det(m, m_prime)?;
    let (parity, minor) = if d.re.abs() >= d.im.abs() {
        (Parity::Real, d.im.abs())
    } else {
        (Parity::PureImaginary, d.re.abs())
    };
    if minor >= (PARITY_RATIO * d.norm()).max(PARITY_FLOOR) {
        return Err(Error::AmbiguousParity { re: d.re, im: d.im });
    }
    Ok(parity)
}

/// Parity predicted from the size alone.
pub fn expected_parity(n: usize) -> Parity {
    if n.is_multiple_of(2) {
        Parity::Real
    } else {
        Parity::PureImaginary
    }
}
