//! Recovering flag coordinates of both sectors from rephasing-invariant
//! observables (`|V_ij|^2` and, for three generations, `J`) by damped
//! Gauss-Newton with a forward-difference Jacobian.
//!
//! The map from `(left, right)` to the observables has a large gauge
//! kernel, so the fitted coordinates are not unique; only the observables
//! they reproduce are meaningful.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ckm::{self, Plaquette};
use crate::error::{Error, Result};
use crate::flag::FlagCoordinates;
use crate::linalg::Complex;
use crate::sampling;

/// Largest row/column deviation of `sum |V_ij|^2` from one that still
/// counts as a unitary target.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_MODULUS: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub n: usize,
    /// `|V_ij|` targets, row-major n x n.
    pub target_magnitudes: Vec<Vec<f64>>,
    pub target_j: Option<f64>,
    pub j_weight: f64,
    /// Per-entry weights, n x n.
    pub weights: Vec<Vec<f64>>,
    /// Coordinates are kept inside the disc of this radius.
    pub max_modulus: f64,
}

impl FitProblem {
    pub fn new(target_magnitudes: Vec<Vec<f64>>) -> Result<Self> {
        let n = target_magnitudes.len();
        let p = Self {
            n,
            target_magnitudes,
            target_j: None,
            j_weight: 1.0,
            weights: vec![vec![1.0; n]; n],
            max_modulus: DEFAULT_MAX_MODULUS,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_j(mut self, target_j: f64, weight: f64) -> Result<Self> {
        self.target_j = Some(target_j);
        self.j_weight = weight;
        self.validate()?;
        Ok(self)
    }

    /// Targets generated by a known pair of coordinate sets.
    pub fn from_coordinates(
        left: &FlagCoordinates,
        right: &FlagCoordinates,
        include_j: bool,
    ) -> Result<Self> {
        let v = ckm::mixing_matrix(left, right)?;
        let mags = v
            .rows()
            .iter()
            .map(|r| r.iter().map(|z| z.norm()).collect())
            .collect();
        let p = Self::new(mags)?;
        if include_j && left.n() == 3 {
            let j = ckm::jarlskog_invariant(&v, Plaquette::default())?.value;
            return p.with_j(j, 1.0);
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if !(n == 3 || n == 4) {
            return Err(Error::InvalidProblem(format!("n must be 3 or 4, got {n}")));
        }
        for (what, m) in [
            ("target_magnitudes", &self.target_magnitudes),
            ("weights", &self.weights),
        ] {
            if m.len() != n || m.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidProblem(format!("{what} must be {n}x{n}")));
            }
        }
        if let Some(t) = self
            .target_magnitudes
            .iter()
            .flatten()
            .find(|t| !(0.0..=1.0).contains(*t))
        {
            return Err(Error::InvalidProblem(format!(
                "target magnitude {t} outside [0, 1]"
            )));
        }
        if let Some(w) = self
            .weights
            .iter()
            .flatten()
            .find(|w| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::InvalidProblem(format!("weight {w} is not positive")));
        }
        if let Some(j) = self.target_j {
            if n != 3 {
                return Err(Error::InvalidProblem(
                    "a Jarlskog target is only defined for n = 3".into(),
                ));
            }
            if !j.is_finite() || !(self.j_weight.is_finite() && self.j_weight > 0.0) {
                return Err(Error::InvalidProblem(
                    "target_j and its weight must be finite, weight positive".into(),
                ));
            }
        }
        if !(self.max_modulus.is_finite() && self.max_modulus > 0.0) {
            return Err(Error::InvalidProblem("max_modulus must be positive".into()));
        }
        Ok(())
    }

    /// Largest `|sum_j t_ij^2 - 1|` over rows and columns.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.n;
        let t = &self.target_magnitudes;
        (0..n)
            .flat_map(|i| {
                let row: f64 = (0..n).map(|j| t[i][j] * t[i][j]).sum();
                let col: f64 = (0..n).map(|j| t[j][i] * t[j][i]).sum();
                [(row - 1.0).abs(), (col - 1.0).abs()]
            })
            .fold(0.0, f64::max)
    }

    pub fn is_consistent(&self) -> bool {
        self.unitarity_defect() <= CONSISTENCY_TOLERANCE
    }

    pub fn residual_count(&self) -> usize {
        self.n * self.n + usize::from(self.target_j.is_some())
    }

    pub fn parameter_count(&self) -> usize {
        2 * self.n * (self.n - 1)
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub starts: usize,
    pub max_iterations: usize,
    /// `converged` requires the residual norm below this.
    pub residual_threshold: f64,
    pub initial_damping: f64,
    /// Radius of the disc the starting coordinates are drawn from.
    pub start_radius: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            max_iterations: 500,
            residual_threshold: 1e-11,
            initial_damping: 1e-3,
            start_radius: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub left: FlagCoordinates,
    pub right: FlagCoordinates,
    pub residual_norm: f64,
    /// Jacobian evaluations of the winning start.
    pub iterations: usize,
    pub converged: bool,
    pub per_residual: Vec<f64>,
    /// False when the targets violate unitarity beyond `CONSISTENCY_TOLERANCE`.
    pub consistent: bool,
    pub best_start: usize,
}

/// Weighted residuals `w_ij (|V_ij|^2 - t_ij^2)`, then `w_J (J - t_J)`.
pub fn residuals(
    problem: &FitProblem,
    left: &FlagCoordinates,
    right: &FlagCoordinates,
) -> Vec<f64> {
    let v = ckm::mixing_matrix(left, right).expect("coordinate sets of equal size");
    let n = problem.n;
    let mut out = Vec::with_capacity(problem.residual_count());
    for i in 0..n {
        for j in 0..n {
            let t = problem.target_magnitudes[i][j];
            out.push(problem.weights[i][j] * (v[(i, j)].norm_sqr() - t * t));
        }
    }
    if let Some(tj) = problem.target_j {
        let j = ckm::jarlskog_invariant(&v, Plaquette::default())
            .expect("n = 3")
            .value;
        out.push(problem.j_weight * (j - tj));
    }
    out
}

fn split(problem: &FitProblem, params: &[f64]) -> (FlagCoordinates, FlagCoordinates) {
    let m = problem.n * (problem.n - 1) / 2;
    let to_coords = |chunk: &[f64]| {
        let values = chunk.chunks(2).map(|p| Complex::new(p[0], p[1])).collect();
        FlagCoordinates::new(problem.n, values).expect("finite parameters")
    };
    (to_coords(&params[..2 * m]), to_coords(&params[2 * m..]))
}

fn join(left: &FlagCoordinates, right: &FlagCoordinates) -> Vec<f64> {
    left.values()
        .iter()
        .chain(right.values())
        .flat_map(|z| [z.re, z.im])
        .collect()
}

fn residuals_at(problem: &FitProblem, params: &[f64]) -> Vec<f64> {
    let (l, r) = split(problem, params);
    residuals(problem, &l, &r)
}

/// Step for parameter `k`: `1e-7 * max(1, |coordinate|)`.
fn step(params: &[f64], k: usize) -> f64 {
    let base = k - k % 2;
    let modulus = params[base].hypot(params[base + 1]);
    1e-7 * modulus.max(1.0)
}

/// Forward-difference Jacobian of [`residuals`] with respect to the real
/// and imaginary parts of `(left, right)`.
pub fn forward_jacobian(problem: &FitProblem, params: &[f64]) -> DMatrix<f64> {
    let r0 = residuals_at(problem, params);
    let mut jac = DMatrix::zeros(r0.len(), params.len());
    let mut p = params.to_vec();
    for k in 0..params.len() {
        let h = step(params, k);
        p[k] = params[k] + h;
        let r = residuals_at(problem, &p);
        p[k] = params[k];
        for (i, (a, b)) in r.iter().zip(&r0).enumerate() {
            jac[(i, k)] = (a - b) / h;
        }
    }
    jac
}

/// Central-difference Jacobian with an explicit step, for checking the
/// forward stencil.
pub fn central_jacobian(problem: &FitProblem, params: &[f64], h: f64) -> DMatrix<f64> {
    let m = problem.residual_count();
    let mut jac = DMatrix::zeros(m, params.len());
    let mut p = params.to_vec();
    for k in 0..params.len() {
        p[k] = params[k] + h;
        let plus = residuals_at(problem, &p);
        p[k] = params[k] - h;
        let minus = residuals_at(problem, &p);
        p[k] = params[k];
        for i in 0..m {
            jac[(i, k)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

/// Pulls every complex coordinate back into the disc of radius `max_modulus`.
fn project(params: &mut [f64], max_modulus: f64) {
    for pair in params.chunks_mut(2) {
        let r = pair[0].hypot(pair[1]);
        if r > max_modulus {
            pair[0] *= max_modulus / r;
            pair[1] *= max_modulus / r;
        }
    }
}

fn norm_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

struct StartOutcome {
    params: Vec<f64>,
    residuals: Vec<f64>,
    iterations: usize,
}

const MIN_DAMPING: f64 = 1e-12;
const MAX_DAMPING: f64 = 1e16;

fn levenberg(problem: &FitProblem, start: Vec<f64>, options: &FitOptions) -> StartOutcome {
    let mut params = start;
    project(&mut params, problem.max_modulus);
    let mut r = residuals_at(problem, &params);
    let mut cost = norm_sq(&r);
    let mut damping = options.initial_damping;
    let mut iterations = 0;
    let floor = (options.residual_threshold * 1e-3).powi(2);

    while iterations < options.max_iterations && cost > floor {
        iterations += 1;
        let jac = forward_jacobian(problem, &params);
        let jtj = jac.transpose() * &jac;
        let gradient = jac.transpose() * DVector::from_column_slice(&r);
        let mut accepted = false;
        while damping <= MAX_DAMPING {
            let mut system = jtj.clone();
            for d in 0..system.nrows() {
                system[(d, d)] += damping;
            }
            let Some(chol) = system.cholesky() else {
                damping *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&gradient));
            let mut trial: Vec<f64> = params
                .iter()
                .zip(delta.iter())
                .map(|(p, d)| p + d)
                .collect();
            project(&mut trial, problem.max_modulus);
            let r_trial = residuals_at(problem, &trial);
            let cost_trial = norm_sq(&r_trial);
            if cost_trial < cost {
                params = trial;
                r = r_trial;
                cost = cost_trial;
                damping = (damping / 10.0).max(MIN_DAMPING);
                accepted = true;
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    StartOutcome {
        params,
        residuals: r,
        iterations,
    }
}

pub fn fit(problem: &FitProblem, seed: u64) -> Result<FitResult> {
    fit_with_options(problem, seed, &FitOptions::default())
}

/// Multi-start fit. Starting points are drawn sequentially from `seed`;
/// starts run in parallel and the lowest residual wins, ties going to the
/// lower start index.
pub fn fit_with_options(
    problem: &FitProblem,
    seed: u64,
    options: &FitOptions,
) -> Result<FitResult> {
    problem.validate()?;
    if options.starts == 0 {
        return Err(Error::InvalidProblem(
            "at least one start is required".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<f64>> = (0..options.starts)
        .map(|_| {
            let l = sampling::random_coordinates(&mut rng, problem.n, options.start_radius);
            let r = sampling::random_coordinates(&mut rng, problem.n, options.start_radius);
            join(&l, &r)
        })
        .collect();

    let outcomes: Vec<StartOutcome> = starts
        .into_par_iter()
        .map(|s| levenberg(problem, s, options))
        .collect();

    let (best_start, best) = outcomes
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| {
            norm_sq(&a.residuals)
                .total_cmp(&norm_sq(&b.residuals))
                .then(i.cmp(j))
        })
        .expect("at least one start");

    let residual_norm = norm_sq(&best.residuals).sqrt();
    let (left, right) = split(problem, &best.params);
    Ok(FitResult {
        left,
        right,
        residual_norm,
        iterations: best.iterations,
        converged: residual_norm < options.residual_threshold,
        per_residual: best.residuals,
        consistent: problem.is_consistent(),
        best_start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> (FlagCoordinates, FlagCoordinates) {
        (
            sampling::random_coordinates(rng, n, 1.0),
            sampling::random_coordinates(rng, n, 1.0),
        )
    }

    #[test]
    fn self_consistent_targets_have_zero_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for n in [3, 4] {
            let (l, r) = random_pair(&mut rng, n);
            let p = FitProblem::from_coordinates(&l, &r, true).unwrap();
            assert!(residuals(&p, &l, &r).iter().all(|x| x.abs() < 1e-12));
            assert!(p.is_consistent());
        }
        let id = FitProblem::new(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let c = sampling::random_coordinates(&mut rng, 3, 2.0);
        assert!(residuals(&id, &c, &c).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn residual_grows_with_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let (l, r) = random_pair(&mut rng, 3);
        let p = FitProblem::from_coordinates(&l, &r, true).unwrap();
        let base = join(&l, &r);
        let dir: Vec<f64> = (0..base.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut last = 0.0;
        for eps in [1e-8, 1e-7, 1e-6, 1e-5, 1e-4] {
            let q: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b + eps * d).collect();
            let norm = norm_sq(&residuals_at(&p, &q)).sqrt();
            assert!(norm > last);
            last = norm;
        }
    }

    #[test]
    fn residuals_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let (l, r) = random_pair(&mut rng, 3);
        let (a, b) = random_pair(&mut rng, 3);
        let p = FitProblem::from_coordinates(&l, &r, true).unwrap();
        let first = residuals(&p, &a, &b);
        let second = residuals(&p, &a, &b);
        assert_eq!(
            first.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            second.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn forward_jacobian_matches_central() {
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        for n in [3, 4] {
            for _ in 0..5 {
                let (l, r) = random_pair(&mut rng, n);
                let (a, b) = random_pair(&mut rng, n);
                let p = FitProblem::from_coordinates(&l, &r, true).unwrap();
                let params = join(&a, &b);
                let fwd = forward_jacobian(&p, &params);
                let cen = central_jacobian(&p, &params, 1e-6);
                let scale = cen.abs().max().max(1e-300);
                assert!((fwd - &cen).abs().max() <= 1e-4 * scale);
            }
        }
    }

    #[test]
    fn validation_errors() {
        assert!(FitProblem::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).is_err());
        assert!(FitProblem::new(vec![
            vec![1.5, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0]
        ])
        .is_err());
        let ok = FitProblem::new(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        let mut bad = ok.clone();
        bad.weights[0][0] = 0.0;
        assert!(bad.validate().is_err());
        let four = FitProblem::new(vec![vec![0.5; 4]; 4]).unwrap();
        assert!(four.with_j(0.01, 1.0).is_err());
    }

    #[test]
    fn recovers_invariants_of_known_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let (l, r) = random_pair(&mut rng, 3);
        let p = FitProblem::from_coordinates(&l, &r, true).unwrap();
        let result = fit(&p, 7).unwrap();
        assert!(result.converged, "residual {}", result.residual_norm);
        let truth = ckm::mixing_matrix(&l, &r).unwrap();
        let got = ckm::mixing_matrix(&result.left, &result.right).unwrap();
        for (a, b) in truth.entries().iter().zip(got.entries()) {
            assert!((a.norm() - b.norm()).abs() < 1e-8);
        }
        let jt = ckm::jarlskog_invariant(&truth, Plaquette::default())
            .unwrap()
            .value;
        let jg = ckm::jarlskog_invariant(&got, Plaquette::default())
            .unwrap()
            .value;
        assert!((jt - jg).abs() < 1e-8);
    }

    #[test]
    fn identity_targets() {
        let p = FitProblem::new(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap()
        .with_j(0.0, 1.0)
        .unwrap();
        let result = fit(&p, 3).unwrap();
        assert!(result.residual_norm < 1e-10);
        let v = ckm::mixing_matrix(&result.left, &result.right).unwrap();
        for i in 0..3 {
            assert!((v[(i, i)].norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn inconsistent_targets_are_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        let (l, r) = random_pair(&mut rng, 3);
        let mut p = FitProblem::from_coordinates(&l, &r, false).unwrap();
        // row 0 squared sum becomes 1.1
        let t = p.target_magnitudes[0][0];
        p.target_magnitudes[0][0] = (t * t + 0.1).sqrt().min(1.0);
        let defect = p.unitarity_defect();
        assert!(defect > 0.05);
        let result = fit(&p, 1).unwrap();
        assert!(!result.consistent);
        assert!(!result.converged);
        assert!(result.residual_norm >= defect / 3f64.sqrt() - 1e-12);
    }

    #[test]
    fn seed_fixes_the_result() {
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        let (l, r) = random_pair(&mut rng, 3);
        let p = FitProblem::from_coordinates(&l, &r, true).unwrap();
        let a = fit(&p, 99).unwrap();
        let b = fit(&p, 99).unwrap();
        assert_eq!(a.left, b.left);
        assert_eq!(a.right, b.right);
        assert_eq!(a.residual_norm.to_bits(), b.residual_norm.to_bits());
        assert_eq!(a.best_start, b.best_start);
    }
}
