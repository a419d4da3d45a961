//! Standard three-angle, one-phase parametrization and its correspondence
//! with flag coordinates.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::flag::FlagCoordinates;
use crate::linalg::{Complex, ComplexMatrix};

/// Smallest admissible `cos(theta)`.
pub const ANGLE_DEGENERACY: f64 = 1e-9;
/// Tolerance on imaginary parts that the inverse correspondence requires to vanish.
pub const REPRESENTABLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdgAngles {
    pub theta12: f64,
    pub theta13: f64,
    pub theta23: f64,
    pub delta: f64,
    /// Left diagonal phases `diag(e^{i(a+b)}, e^{i(a-b)}, e^{-2ia})`.
    pub alpha: f64,
    pub beta: f64,
}

impl PdgAngles {
    pub fn new(theta12: f64, theta13: f64, theta23: f64, delta: f64) -> Result<Self> {
        Self::with_phases(theta12, theta13, theta23, delta, 0.0, 0.0)
    }

    pub fn with_phases(
        theta12: f64,
        theta13: f64,
        theta23: f64,
        delta: f64,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let a = Self {
            theta12,
            theta13,
            theta23,
            delta,
            alpha,
            beta,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.theta12,
            self.theta13,
            self.theta23,
            self.delta,
            self.alpha,
            self.beta,
        ];
        if !all.iter().all(|t| t.is_finite()) {
            return Err(Error::NonFinite("angles"));
        }
        for (name, t) in [
            ("theta12", self.theta12),
            ("theta13", self.theta13),
            ("theta23", self.theta23),
        ] {
            if t.abs() >= FRAC_PI_2 || t.cos() <= ANGLE_DEGENERACY {
                return Err(Error::InvalidAngles(format!(
                    "{name} = {t} is outside (-pi/2, pi/2)"
                )));
            }
        }
        Ok(())
    }

    /// Same unitary up to phases on the `theta13 >= 0`, `delta in (-pi, pi]`
    /// branch: a negative `theta13` is flipped and `delta` shifted by pi.
    pub fn canonical(&self) -> Self {
        let mut a = *self;
        if a.theta13 < 0.0 {
            a.theta13 = -a.theta13;
            a.delta += PI;
        }
        a.delta = wrap_phase(a.delta);
        a
    }
}

/// Maps onto `(-pi, pi]`.
fn wrap_phase(t: f64) -> f64 {
    let w = t.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Left phase diagonal times the Kobayashi-Maskawa matrix.
pub fn pdg_unitary(a: &PdgAngles) -> ComplexMatrix {
    let (s12, c12) = a.theta12.sin_cos();
    let (s13, c13) = a.theta13.sin_cos();
    let (s23, c23) = a.theta23.sin_cos();
    let e = Complex::from_polar(1.0, a.delta);
    let r = |x: f64| Complex::new(x, 0.0);
    let km = [
        [r(c12 * c13), r(s12 * c13), e.conj() * s13],
        [
            -s12 * c23 - e * (c12 * s23 * s13),
            c12 * c23 - e * (s12 * s23 * s13),
            r(s23 * c13),
        ],
        [
            s12 * s23 - e * (c12 * c23 * s13),
            -c12 * s23 - e * (s12 * c23 * s13),
            r(c23 * c13),
        ],
    ];
    let phases = [
        Complex::from_polar(1.0, a.alpha + a.beta),
        Complex::from_polar(1.0, a.alpha - a.beta),
        Complex::from_polar(1.0, -2.0 * a.alpha),
    ];
    ComplexMatrix::from_fn(3, 3, |i, j| phases[i] * km[i][j])
}

/// Flag coordinates of the same coset (left phases ignored).
pub fn pdg_to_coords(a: &PdgAngles) -> FlagCoordinates {
    let (s23, c23) = a.theta23.sin_cos();
    let c13 = a.theta13.cos();
    let (t12, t13, t23) = (a.theta12.tan(), a.theta13.tan(), a.theta23.tan());
    let e = Complex::from_polar(1.0, a.delta);
    let x = -(Complex::new(t12 * c23 / c13, 0.0) + e * (s23 * t13));
    let y = Complex::new(t12 * s23 / c13, 0.0) - e * (c23 * t13);
    let z = Complex::new(-t23, 0.0);
    FlagCoordinates::n3(x, y, z)
}

/// Inverse of [`pdg_to_coords`] on the canonical branch. Requires `z` real
/// and `sin(theta23) y - cos(theta23) x` real; other points need a left
/// rephasing first, which is not performed here.
pub fn coords_to_pdg(c: &FlagCoordinates) -> Result<PdgAngles> {
    if c.n() != 3 {
        return Err(Error::Unsupported {
            op: "coords_to_pdg",
            n: c.n(),
        });
    }
    let (x, y, z) = (c.get(1, 0), c.get(2, 0), c.get(2, 1));
    if z.im.abs() > REPRESENTABLE_TOLERANCE * z.norm().max(1.0) {
        return Err(Error::NotRepresentable(format!("z = {z} is not real")));
    }
    let theta23 = -z.re.atan();
    let (s23, c23) = theta23.sin_cos();
    // x = -(A c23 + s23 B), y = A s23 - c23 B with A = t12/c13, B = t13 e^{i delta}
    let a = y * s23 - x * c23;
    let b = -(x * s23 + y * c23);
    if a.im.abs() > REPRESENTABLE_TOLERANCE * a.norm().max(1.0) {
        return Err(Error::NotRepresentable(format!(
            "tan(theta12)/cos(theta13) would be complex ({a})"
        )));
    }
    let t13 = b.norm();
    let delta = if t13 == 0.0 { 0.0 } else { b.arg() };
    let theta13 = t13.atan();
    let theta12 = (a.re * theta13.cos()).atan();
    PdgAngles::new(theta12, theta13, theta23, wrap_phase(delta))
}
