//! Random draws used by the self-check suite, the fit multi-start and the
//! tests. All samplers take the generator explicitly so runs are
//! reproducible from a seed.

use std::f64::consts::PI;

use rand::Rng;

use crate::flag::FlagCoordinates;
use crate::linalg::{Complex, ComplexMatrix};
use crate::mass::MassSpectrum;
use crate::pdg::PdgAngles;

/// Uniform point in the closed complex disc of the given radius.
pub fn complex_in_disc<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Complex {
    let r = radius * rng.gen::<f64>().sqrt();
    Complex::from_polar(r, 2.0 * PI * rng.gen::<f64>())
}

/// n x m matrix with entries uniform in the unit disc.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    let data = (0..rows * cols)
        .map(|_| complex_in_disc(rng, 1.0))
        .collect();
    ComplexMatrix::new(rows, cols, data).expect("finite entries")
}

pub fn random_coordinates<R: Rng + ?Sized>(rng: &mut R, n: usize, radius: f64) -> FlagCoordinates {
    let values = (0..n * (n - 1) / 2)
        .map(|_| complex_in_disc(rng, radius))
        .collect();
    FlagCoordinates::new(n, values).expect("valid coordinates")
}

/// Real coordinates (no CP phase) uniform in `[-radius, radius]`.
pub fn random_real_coordinates<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    radius: f64,
) -> FlagCoordinates {
    let values = (0..n * (n - 1) / 2)
        .map(|_| Complex::new(rng.gen_range(-radius..=radius), 0.0))
        .collect();
    FlagCoordinates::new(n, values).expect("valid coordinates")
}

pub fn random_phases<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-PI..PI)).collect()
}

/// Strictly increasing spectrum with masses log-uniform on `[lo, hi]`.
pub fn log_uniform_spectrum<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    lo: f64,
    hi: f64,
) -> MassSpectrum {
    loop {
        let mut masses: Vec<f64> = (0..n)
            .map(|_| (rng.gen_range(lo.ln()..hi.ln())).exp())
            .collect();
        masses.sort_by(f64::total_cmp);
        if let Ok(s) = MassSpectrum::new(masses) {
            return s;
        }
    }
}

/// Angles drawn uniformly from `(-limit, limit)` with delta uniform on `(-pi, pi)`.
pub fn random_angles<R: Rng + ?Sized>(rng: &mut R, limit: f64) -> PdgAngles {
    PdgAngles::new(
        rng.gen_range(-limit..limit),
        rng.gen_range(-limit..limit),
        rng.gen_range(-limit..limit),
        rng.gen_range(-PI..PI),
    )
    .expect("angles inside the principal domain")
}
