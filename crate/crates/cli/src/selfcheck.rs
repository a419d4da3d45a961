//! Randomized cross-module identity suite behind the `self-check` command.

use std::collections::BTreeMap;

use ckm_flag::ckm::{self, Plaquette};
use ckm_flag::mass::{self, MassMatrixPair};
use ckm_flag::{flag, pdg, sampling, Complex, ComplexMatrix, FlagCoordinates, PdgAngles};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::io::real;
use crate::CliError;

const COORD_RADIUS: f64 = 3.0;

/// Thresholds of the suite, overridable by name.
#[derive(Debug, Clone)]
pub struct Tolerances(BTreeMap<&'static str, f64>);

impl Default for Tolerances {
    fn default() -> Self {
        Self(BTreeMap::from([
            ("closed_form", 1e-12),
            ("unitarity", 1e-12),
            ("ckm_n3", 1e-12),
            ("ckm_n4", 1e-11),
            ("identity", 1e-9),
            ("identity_floor", 1e-12),
            ("det_n2", 1e-10),
            ("det_n3", 1e-9),
            ("parity", 1e-9),
            ("plaquette", 1e-12),
            ("rephasing", 1e-13),
            ("round_trip", 1e-10),
            ("pdg", 1e-11),
        ]))
    }
}

impl Tolerances {
    pub fn with_overrides(overrides: &BTreeMap<String, f64>) -> Result<Self, CliError> {
        let mut t = Self::default();
        for (k, v) in overrides {
            let Some(slot) = t.0.get_mut(k.as_str()) else {
                let known: Vec<&str> = Self::default().0.keys().copied().collect();
                return Err(CliError::validation(format!(
                    "tolerance.{k}: unknown key (known: {})",
                    known.join(", ")
                )));
            };
            if !(v.is_finite() && *v > 0.0) {
                return Err(CliError::validation(format!(
                    "tolerance.{k}: must be positive"
                )));
            }
            *slot = *v;
        }
        Ok(t)
    }

    pub fn get(&self, key: &str) -> f64 {
        self.0[key]
    }
}

struct Check {
    name: &'static str,
    tolerance: f64,
    total: usize,
    passed: usize,
    max_error: f64,
}

impl Check {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            total: 0,
            passed: 0,
            max_error: 0.0,
        }
    }

    /// Records an error measured against `bound` (defaults to the tolerance).
    fn record_against(&mut self, error: f64, bound: f64) {
        self.total += 1;
        if error <= bound {
            self.passed += 1;
        }
        if error.is_nan() {
            self.max_error = f64::INFINITY;
        } else {
            self.max_error = self.max_error.max(error);
        }
    }

    fn record(&mut self, error: f64) {
        self.record_against(error, self.tolerance);
    }

    fn fail(&mut self) {
        self.total += 1;
        self.max_error = f64::INFINITY;
    }

    fn ok(&self) -> bool {
        self.passed == self.total
    }

    fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "passed": self.passed,
            "total": self.total,
            "max_error": if self.max_error.is_finite() { real(self.max_error) } else { Value::String("inf".into()) },
            "tolerance": real(self.tolerance),
            "ok": self.ok(),
        })
    }
}

pub struct Report {
    checks: Vec<Check>,
    seed: u64,
    samples: usize,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(Check::ok)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "seed": self.seed,
            "samples": self.samples,
            "checks": self.checks.iter().map(Check::to_json).collect::<Vec<_>>(),
            "all_passed": self.all_passed(),
        })
    }
}

fn phase_diag(phases: &[f64]) -> ComplexMatrix {
    let d: Vec<Complex> = phases
        .iter()
        .map(|&t| Complex::from_polar(1.0, t))
        .collect();
    ComplexMatrix::diagonal(&d)
}

fn max_leading_minor_ok(u: &ComplexMatrix, floor: f64) -> bool {
    let n = u.n_rows();
    (1..=n).all(|k| {
        let block = ComplexMatrix::new(k, k, (0..k * k).map(|p| u[(p / k, p % k)]).collect())
            .expect("finite");
        block.determinant().is_ok_and(|d| d.norm() > floor)
    })
}

pub fn run(seed: u64, samples: usize, tol: &Tolerances) -> Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    // closed forms against generic Gram-Schmidt
    for (name, n) in [("closed_form_n3", 3), ("closed_form_n4", 4)] {
        let mut c = Check::new(name, tol.get("closed_form"));
        let mut u = Check::new(
            if n == 3 {
                "unitarity_n3"
            } else {
                "unitarity_n4"
            },
            tol.get("unitarity"),
        );
        for _ in 0..samples {
            let coords = sampling::random_coordinates(&mut rng, n, COORD_RADIUS);
            let generic = flag::gram_schmidt_unitary(&coords);
            let closed = if n == 3 {
                flag::closed_form_unitary_n3(&coords)
            } else {
                flag::closed_form_unitary_n4(&coords)
            }
            .expect("matching n");
            c.record(closed.max_abs_diff(&generic));
            u.record(closed.unitarity_defect().max(generic.unitarity_defect()));
        }
        checks.push(c);
        checks.push(u);
    }

    // closed-form CKM entries against the matrix product
    for (name, n, key) in [
        ("ckm_entries_n3", 3, "ckm_n3"),
        ("ckm_entries_n4", 4, "ckm_n4"),
    ] {
        let mut c = Check::new(name, tol.get(key));
        for _ in 0..samples {
            let l = sampling::random_coordinates(&mut rng, n, COORD_RADIUS);
            let r = sampling::random_coordinates(&mut rng, n, COORD_RADIUS);
            match ckm::build_ckm(&l, &r) {
                Ok(res) => c.record(res.rescaled_f().max_abs_diff(&res.v)),
                Err(_) => c.fail(),
            }
        }
        checks.push(c);
    }

    // -i det[M, M'] / 2TB against the standard plaquette
    let mut identity = Check::new("jarlskog_identity", tol.get("identity"));
    for _ in 0..samples {
        let l = sampling::random_coordinates(&mut rng, 3, COORD_RADIUS);
        let r = sampling::random_coordinates(&mut rng, 3, COORD_RADIUS);
        let s = sampling::log_uniform_spectrum(&mut rng, 3, 1e-2, 1e2);
        let sp = sampling::log_uniform_spectrum(&mut rng, 3, 1e-2, 1e2);
        match mass::jarlskog_identity_check(&l, &r, &s, &sp) {
            Ok((a, b)) => {
                let bound = (tol.get("identity") * b.abs()).max(tol.get("identity_floor"));
                identity.record_against((a - b).abs(), bound);
            }
            Err(_) => identity.fail(),
        }
    }
    checks.push(identity);

    // determinant closed forms and parity
    let mut det2 = Check::new("det_closed_form_n2", tol.get("det_n2"));
    let mut det3 = Check::new("det_closed_form_n3", tol.get("det_n3"));
    let mut parity = Check::new("det_parity", tol.get("parity"));
    for _ in 0..samples {
        for n in [2, 3, 4] {
            let l = sampling::random_coordinates(&mut rng, n, COORD_RADIUS);
            let r = sampling::random_coordinates(&mut rng, n, COORD_RADIUS);
            let v = ckm::mixing_matrix(&l, &r).expect("same n");
            let s = sampling::log_uniform_spectrum(&mut rng, n, 1e-2, 1e2);
            let sp = sampling::log_uniform_spectrum(&mut rng, n, 1e-2, 1e2);
            let Ok(pair) = MassMatrixPair::in_mass_basis(&v, &s, &sp) else {
                parity.fail();
                continue;
            };
            let det = pair.commutator_det().expect("hermitian pair");
            let (re, im) = (det.re.abs(), det.im.abs());
            let (major, minor) = if n % 2 == 0 { (re, im) } else { (im, re) };
            parity.record(if major > 0.0 {
                minor / det.norm()
            } else {
                minor
            });
            match n {
                2 => {
                    let closed = mass::closed_form_det_n2(&s, &sp, &v).expect("n = 2");
                    det2.record((det.re - closed).abs() / closed.abs().max(f64::MIN_POSITIVE));
                }
                3 => {
                    let closed = mass::closed_form_det_n3(&s, &sp, &v).expect("n = 3");
                    det3.record((det - closed).norm() / closed.norm().max(f64::MIN_POSITIVE));
                }
                _ => {}
            }
        }
    }
    checks.extend([det2, det3, parity]);

    // plaquette moduli and rephasing invariance
    let mut plaq = Check::new("plaquette_moduli", tol.get("plaquette"));
    let mut rephase = Check::new("rephasing_invariance", tol.get("rephasing"));
    for _ in 0..samples {
        let l = sampling::random_coordinates(&mut rng, 3, COORD_RADIUS);
        let r = sampling::random_coordinates(&mut rng, 3, COORD_RADIUS);
        let v = ckm::mixing_matrix(&l, &r).expect("same n");
        let values = ckm::plaquette_values(&v).expect("3x3");
        let hi = values.iter().map(|(_, x)| x.abs()).fold(0.0, f64::max);
        let lo = values
            .iter()
            .map(|(_, x)| x.abs())
            .fold(f64::INFINITY, f64::min);
        plaq.record(hi - lo);
        let w = ckm::rephase(
            &v,
            &sampling::random_phases(&mut rng, 3),
            &sampling::random_phases(&mut rng, 3),
        )
        .expect("3 phases");
        let j0 = ckm::jarlskog_invariant(&v, Plaquette::default())
            .expect("3x3")
            .value;
        let j1 = ckm::jarlskog_invariant(&w, Plaquette::default())
            .expect("3x3")
            .value;
        rephase.record((j0 - j1).abs());
    }
    checks.extend([plaq, rephase]);

    // coordinate extraction
    let mut round_trip = Check::new("coordinate_round_trip", tol.get("round_trip"));
    let mut right_phase = Check::new("right_phase_invariance", tol.get("round_trip"));
    for _ in 0..samples {
        for n in [3, 4, 6] {
            let coords = sampling::random_coordinates(&mut rng, n, COORD_RADIUS);
            let u = flag::gram_schmidt_unitary(&coords);
            if !max_leading_minor_ok(&u, 1e-6) {
                continue;
            }
            let w = u
                .matmul(&phase_diag(&sampling::random_phases(&mut rng, n)))
                .expect("n x n");
            match (flag::coords_from_unitary(&u), flag::coords_from_unitary(&w)) {
                (Ok(a), Ok(b)) => {
                    round_trip.record(a.max_abs_diff(&coords));
                    right_phase.record(a.max_abs_diff(&b));
                }
                _ => {
                    round_trip.fail();
                    right_phase.fail();
                }
            }
        }
    }
    checks.extend([round_trip, right_phase]);

    // standard-angle correspondence
    let mut pdg_check = Check::new("pdg_correspondence", tol.get("pdg"));
    let anchor = PdgAngles::new(0.0, 0.0, std::f64::consts::FRAC_PI_4, 0.0).expect("valid");
    let anchor_z = pdg::pdg_to_coords(&anchor).get(2, 1);
    pdg_check.record((anchor_z - Complex::new(-1.0, 0.0)).norm());
    for _ in 0..samples {
        let a = sampling::random_angles(&mut rng, 1.2);
        match flag::coords_from_unitary(&pdg::pdg_unitary(&a)) {
            Ok(c) => pdg_check.record(c.max_abs_diff(&pdg::pdg_to_coords(&a))),
            Err(_) => pdg_check.fail(),
        }
    }
    checks.push(pdg_check);

    // zero coordinates map to the identity in every size the suite uses
    let mut zero = Check::new("zero_coordinates", tol.get("unitarity"));
    for n in [2, 3, 4, 6] {
        zero.record(
            flag::gram_schmidt_unitary(&FlagCoordinates::zeros(n))
                .max_abs_diff(&ComplexMatrix::identity(n)),
        );
    }
    checks.push(zero);

    Report {
        checks,
        seed,
        samples,
    }
}
