//! Command-line front end for `ckm-flag`: reads JSON documents, runs one
//! subcommand and writes JSON (or CSV for matrices).
//!
//! Exit codes: 0 success, 1 invalid input, 2 numeric failure
//! (gauge singularity, non-convergence, failed self-check).

pub mod io;
pub mod selfcheck;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::PathBuf;

use ckm_flag::ckm::{self, Plaquette};
use ckm_flag::fit::{FitOptions, FitProblem};
use ckm_flag::mass::{self, MassMatrixPair, MassSpectrum, Parity};
use ckm_flag::{flag, pdg, ComplexMatrix, FlagCoordinates, PdgAngles};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numeric,
}

#[derive(Debug, Clone)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Validation,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Numeric,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => 1,
            ErrorKind::Numeric => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<ckm_flag::Error> for CliError {
    fn from(e: ckm_flag::Error) -> Self {
        if e.is_numeric() {
            Self::numeric(e.to_string())
        } else {
            Self::validation(e.to_string())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    BuildUnitary,
    ExtractCoords,
    Ckm,
    Jarlskog,
    DetCommutator,
    PdgConvert,
    Fit,
    SelfCheck,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

fn default_samples() -> usize {
    200
}

/// Everything one invocation needs. Config files use the same field names
/// and reject unknown keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub input_path: Option<PathBuf>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub tolerance: BTreeMap<String, f64>,
    #[serde(default)]
    pub format: Format,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            input_path: None,
            output_path: None,
            seed: 0,
            n: None,
            tolerance: BTreeMap::new(),
            format: Format::Json,
            samples: default_samples(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::validation(format!("malformed config: {e}")))
    }
}

/// Output of a successful command: the document plus whether the numerics
/// reported a soft failure (non-convergence, failed checks).
pub struct Outcome {
    pub text: String,
    pub numeric_failure: bool,
}

fn read_input(config: &RunConfig) -> Result<Option<String>, CliError> {
    match &config.input_path {
        None => Ok(None),
        Some(p) => fs::read_to_string(p)
            .map(Some)
            .map_err(|e| CliError::validation(format!("cannot read {}: {e}", p.display()))),
    }
}

fn require_input(config: &RunConfig) -> Result<String, CliError> {
    read_input(config)?.ok_or_else(|| CliError::validation("--input is required for this command"))
}

fn emit(
    config: &RunConfig,
    doc: Value,
    matrices: &[(&str, &ComplexMatrix)],
) -> Result<String, CliError> {
    match config.format {
        Format::Json => Ok(io::to_json_string(&doc)),
        Format::Csv if !matrices.is_empty() => io::matrices_csv(matrices),
        Format::Csv => Err(CliError::validation(
            "format: this command has no matrix output for csv",
        )),
    }
}

fn plaquettes_json(v: &ComplexMatrix) -> Result<Value, CliError> {
    Ok(Value::Array(
        ckm::plaquette_values(v)?
            .into_iter()
            .map(|(p, x)| {
                json!({
                    "rows": [p.rows().0 + 1, p.rows().1 + 1],
                    "cols": [p.cols().0 + 1, p.cols().1 + 1],
                    "value": io::real(x),
                })
            })
            .collect(),
    ))
}

fn parity_name(p: Parity) -> &'static str {
    match p {
        Parity::Real => "real",
        Parity::PureImaginary => "pure_imaginary",
    }
}

fn build_unitary(config: &RunConfig) -> Result<Outcome, CliError> {
    let coords = match read_input(config)? {
        Some(text) => io::parse_doc::<io::CoordinatesDoc>(&text, "coordinates")?
            .to_coordinates("coordinates")?,
        None => {
            let n = config
                .n
                .ok_or_else(|| CliError::validation("either --input or --n is required"))?;
            if n < 2 {
                return Err(CliError::validation(format!(
                    "n: must be at least 2, got {n}"
                )));
            }
            FlagCoordinates::zeros(n)
        }
    };
    if let Some(n) = config.n {
        if n != coords.n() {
            return Err(CliError::validation(format!(
                "n: --n {n} disagrees with input n = {}",
                coords.n()
            )));
        }
    }
    let u = flag::gram_schmidt_unitary(&coords);
    let mut doc = json!({
        "n": coords.n(),
        "coordinates": io::coordinates(&coords),
        "unitary": io::matrix(&u),
        "deltas": io::reals(flag::NormalizationFactors::from_gram_schmidt(&coords).deltas()),
    });
    let closed = match coords.n() {
        3 => Some(flag::closed_form_unitary_n3(&coords)?),
        4 => Some(flag::closed_form_unitary_n4(&coords)?),
        _ => None,
    };
    if let Some(c) = &closed {
        doc["closed_form_unitary"] = io::matrix(c);
    }
    if coords.n() == 3 {
        let k = flag::kahler_data(&coords)?;
        doc["kahler"] = json!({"potential": io::real(k.potential), "volume_density": io::real(k.volume_density)});
    }
    let mut mats = vec![("unitary", &u)];
    if let Some(c) = &closed {
        mats.push(("closed_form_unitary", c));
    }
    Ok(Outcome {
        text: emit(config, doc, &mats)?,
        numeric_failure: false,
    })
}

fn extract_coords(config: &RunConfig) -> Result<Outcome, CliError> {
    let doc: io::MatrixDoc = io::parse_doc(&require_input(config)?, "matrix")?;
    let w = io::parse_matrix(&doc.matrix, "matrix")?;
    let c = flag::coords_from_unitary(&w)?;
    if config.format == Format::Csv {
        return Err(CliError::validation(
            "format: extract-coords only writes json",
        ));
    }
    Ok(Outcome {
        text: io::to_json_string(&io::coordinates(&c)),
        numeric_failure: false,
    })
}

fn ckm_command(config: &RunConfig) -> Result<Outcome, CliError> {
    let (l, r) = io::parse_doc::<io::PairDoc>(&require_input(config)?, "pair")?.to_pair()?;
    let res = ckm::build_ckm(&l, &r)?;
    let j = ckm::jarlskog_invariant(&res.v, Plaquette::default())?;
    let doc = json!({
        "n": res.n(),
        "v": io::matrix(&res.v),
        "f": io::matrix(&res.f),
        "left_deltas": io::reals(res.left_deltas.deltas()),
        "right_deltas": io::reals(res.right_deltas.deltas()),
        "jarlskog": {
            "value": io::real(j.value),
            "rows": [1, 3],
            "cols": [1, 3],
            "single_invariant": j.single_invariant,
        },
    });
    Ok(Outcome {
        text: emit(config, doc, &[("v", &res.v), ("f", &res.f)])?,
        numeric_failure: false,
    })
}

fn jarlskog_command(config: &RunConfig) -> Result<Outcome, CliError> {
    let (l, r) = io::parse_doc::<io::PairDoc>(&require_input(config)?, "pair")?.to_pair()?;
    let v = ckm::mixing_matrix(&l, &r)?;
    let j = ckm::jarlskog_invariant(&v, Plaquette::default())?;
    let mut doc = json!({
        "n": l.n(),
        "j": io::real(j.value),
        "j_standard": io::real(ckm::jarlskog_invariant(&v, Plaquette::standard())?.value),
        "single_invariant": j.single_invariant,
        "plaquettes": plaquettes_json(&v)?,
    });
    if l.n() == 3 {
        doc["j_closed_form"] = io::real(ckm::jarlskog_from_coords(&l, &r)?);
    }
    if config.format == Format::Csv {
        return Err(CliError::validation("format: jarlskog only writes json"));
    }
    Ok(Outcome {
        text: io::to_json_string(&doc),
        numeric_failure: false,
    })
}

fn det_commutator(config: &RunConfig) -> Result<Outcome, CliError> {
    let doc: io::MassesDoc = io::parse_doc(&require_input(config)?, "masses")?;
    let s = MassSpectrum::new(doc.masses.clone())
        .map_err(|e| CliError::validation(format!("masses: {e}")))?;
    let sp = MassSpectrum::new(doc.masses_prime.clone())
        .map_err(|e| CliError::validation(format!("masses_prime: {e}")))?;
    if s.len() != sp.len() {
        return Err(CliError::validation(format!(
            "masses_prime: {} masses, expected {}",
            sp.len(),
            s.len()
        )));
    }
    let n = s.len();
    if n < 2 {
        return Err(CliError::validation(
            "masses: at least two generations are required",
        ));
    }
    let coords =
        |d: &Option<io::CoordinatesDoc>, field: &str| -> Result<FlagCoordinates, CliError> {
            match d {
                Some(d) => {
                    let c = d.to_coordinates(field)?;
                    if c.n() != n {
                        return Err(CliError::validation(format!(
                            "{field}.n: expected {n}, got {}",
                            c.n()
                        )));
                    }
                    Ok(c)
                }
                None => Ok(FlagCoordinates::zeros(n)),
            }
        };
    let (l, r) = (coords(&doc.left, "left")?, coords(&doc.right, "right")?);
    let (u, up) = (
        flag::gram_schmidt_unitary(&l),
        flag::gram_schmidt_unitary(&r),
    );
    let flavor = MassMatrixPair::new(&u, &s, &up, &sp)?;
    let v = ckm::mixing_matrix(&l, &r)?;
    let basis = MassMatrixPair::in_mass_basis(&v, &s, &sp)?;
    let det = basis.commutator_det()?;
    let mut out = json!({
        "n": n,
        "det": io::complex(det),
        "parity": parity_name(mass::det_parity_check(&basis.m, &basis.m_prime)?),
        "m": io::matrix(&flavor.m),
        "m_prime": io::matrix(&flavor.m_prime),
    });
    match n {
        2 => out["closed_form"] = io::real(mass::closed_form_det_n2(&s, &sp, &v)?),
        3 => {
            out["closed_form"] = io::complex(mass::closed_form_det_n3(&s, &sp, &v)?);
            let (a, b) = mass::jarlskog_identity_check(&l, &r, &s, &sp)?;
            out["j_from_det"] = io::real(a);
            out["j_from_plaquette"] = io::real(b);
        }
        _ => {}
    }
    Ok(Outcome {
        text: emit(
            config,
            out,
            &[("m", &flavor.m), ("m_prime", &flavor.m_prime)],
        )?,
        numeric_failure: false,
    })
}

fn pdg_convert(config: &RunConfig) -> Result<Outcome, CliError> {
    let doc: io::PdgDoc = io::parse_doc(&require_input(config)?, "pdg")?;
    let out = match (doc.angles, doc.coordinates) {
        (Some(a), None) => {
            let angles =
                PdgAngles::with_phases(a.theta12, a.theta13, a.theta23, a.delta, a.alpha, a.beta)
                    .map_err(|e| CliError::validation(format!("angles: {e}")))?;
            let u = pdg::pdg_unitary(&angles);
            json!({
                "angles": io::angles(&angles),
                "coordinates": io::coordinates(&pdg::pdg_to_coords(&angles)),
                "unitary": io::matrix(&u),
            })
        }
        (None, Some(c)) => {
            let coords = c.to_coordinates("coordinates")?;
            json!({
                "coordinates": io::coordinates(&coords),
                "angles": io::angles(&pdg::coords_to_pdg(&coords)?),
            })
        }
        _ => {
            return Err(CliError::validation(
                "pdg: give exactly one of \"angles\" or \"coordinates\"",
            ))
        }
    };
    if config.format == Format::Csv {
        return Err(CliError::validation("format: pdg-convert only writes json"));
    }
    Ok(Outcome {
        text: io::to_json_string(&out),
        numeric_failure: false,
    })
}

fn fit_command(config: &RunConfig) -> Result<Outcome, CliError> {
    let doc: io::FitDoc = io::parse_doc(&require_input(config)?, "fit")?;
    if doc.target_magnitudes.len() != doc.n {
        return Err(CliError::validation(format!(
            "target_magnitudes: {} rows, expected n = {}",
            doc.target_magnitudes.len(),
            doc.n
        )));
    }
    let mut problem =
        FitProblem::new(doc.target_magnitudes).map_err(|e| CliError::validation(e.to_string()))?;
    if let Some(w) = doc.weights {
        problem.weights = w;
    }
    if let Some(m) = doc.max_modulus {
        problem.max_modulus = m;
    }
    if let Some(j) = doc.target_j {
        problem = problem
            .with_j(j, doc.j_weight.unwrap_or(1.0))
            .map_err(|e| CliError::validation(e.to_string()))?;
    }
    problem
        .validate()
        .map_err(|e| CliError::validation(e.to_string()))?;

    let mut options = FitOptions::default();
    for (k, v) in &config.tolerance {
        match k.as_str() {
            "residual_threshold" => options.residual_threshold = *v,
            other => {
                return Err(CliError::validation(format!(
                    "tolerance.{other}: unknown key for fit (known: residual_threshold)"
                )))
            }
        }
    }
    let result = ckm_flag::fit::fit_with_options(&problem, config.seed, &options)?;
    let v = ckm::mixing_matrix(&result.left, &result.right)?;
    let mags: Vec<Value> = v
        .rows()
        .iter()
        .map(|r| io::reals(&r.iter().map(|z| z.norm()).collect::<Vec<_>>()))
        .collect();
    let mut out = json!({
        "left": io::coordinates(&result.left),
        "right": io::coordinates(&result.right),
        "residual_norm": io::real(result.residual_norm),
        "iterations": result.iterations,
        "converged": result.converged,
        "consistent": result.consistent,
        "best_start": result.best_start,
        "per_residual": io::reals(&result.per_residual),
        "fitted_magnitudes": mags,
        "v": io::matrix(&v),
    });
    if problem.n == 3 {
        out["fitted_j"] = io::real(ckm::jarlskog_invariant(&v, Plaquette::default())?.value);
    }
    if config.format == Format::Csv {
        return Err(CliError::validation("format: fit only writes json"));
    }
    Ok(Outcome {
        text: io::to_json_string(&out),
        numeric_failure: !result.converged,
    })
}

fn self_check(config: &RunConfig) -> Result<Outcome, CliError> {
    if config.samples == 0 {
        return Err(CliError::validation("samples: must be positive"));
    }
    let tol = selfcheck::Tolerances::with_overrides(&config.tolerance)?;
    let report = selfcheck::run(config.seed, config.samples, &tol);
    if config.format == Format::Csv {
        return Err(CliError::validation("format: self-check only writes json"));
    }
    Ok(Outcome {
        text: io::to_json_string(&report.to_json()),
        numeric_failure: !report.all_passed(),
    })
}

/// Runs the configured command and returns the document it produced.
pub fn execute(config: &RunConfig) -> Result<Outcome, CliError> {
    match config.command {
        Command::BuildUnitary => build_unitary(config),
        Command::ExtractCoords => extract_coords(config),
        Command::Ckm => ckm_command(config),
        Command::Jarlskog => jarlskog_command(config),
        Command::DetCommutator => det_commutator(config),
        Command::PdgConvert => pdg_convert(config),
        Command::Fit => fit_command(config),
        Command::SelfCheck => self_check(config),
    }
}

/// Executes and writes the output; returns the process exit status.
pub fn run(config: &RunConfig) -> i32 {
    let outcome = match execute(config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let written = match &config.output_path {
        Some(p) => {
            fs::write(p, &outcome.text).map_err(|e| format!("cannot write {}: {e}", p.display()))
        }
        None => {
            print!("{}", outcome.text);
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return 1;
    }
    if outcome.numeric_failure {
        2
    } else {
        0
    }
}
