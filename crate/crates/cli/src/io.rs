//! Input documents and output encoding.
//!
//! Complex numbers are `[re, im]`, matrices are arrays of rows, and reals
//! are written with 17 significant digits so every document re-parses to
//! the same bits.

use std::collections::BTreeMap;
use std::io;

use ckm_flag::{Complex, ComplexMatrix, FlagCoordinates, PdgAngles};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Value};

use crate::CliError;

/// Pretty JSON with every float printed as `{:.16e}`.
struct ExactFloats<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident),* $(,)?) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
                self.0.$name(w)
            }
        )*
    };
}

impl Formatter for ExactFloats<'_> {
    delegate!(
        begin_array,
        end_array,
        begin_object,
        end_object,
        end_array_value,
        end_object_value,
        begin_object_value
    );

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }
}

pub fn to_json_string(value: &Value) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut out,
        ExactFloats(PrettyFormatter::with_indent(b"  ")),
    );
    value.serialize(&mut ser).expect("writing to memory");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

/// `Value` for a finite float; non-finite values have no JSON form and
/// become `null`.
pub fn real(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn complex(z: Complex) -> Value {
    json!([real(z.re), real(z.im)])
}

pub fn matrix(m: &ComplexMatrix) -> Value {
    Value::Array(
        m.rows()
            .into_iter()
            .map(|r| Value::Array(r.into_iter().map(complex).collect()))
            .collect(),
    )
}

pub fn reals(xs: &[f64]) -> Value {
    Value::Array(xs.iter().copied().map(real).collect())
}

/// Field names of the coordinates: `x, y, z` for n = 3,
/// `x1, x2, x3, y1, y2, z1` for n = 4, `"i,j"` (1-based) otherwise.
pub fn coordinate_names(n: usize) -> Vec<String> {
    match n {
        3 => ["x", "y", "z"].map(String::from).to_vec(),
        4 => ["x1", "x2", "x3", "y1", "y2", "z1"]
            .map(String::from)
            .to_vec(),
        _ => FlagCoordinates::index_pairs(n)
            .into_iter()
            .map(|(i, j)| format!("{},{}", i + 1, j + 1))
            .collect(),
    }
}

pub fn coordinates(c: &FlagCoordinates) -> Value {
    let coords: serde_json::Map<String, Value> = coordinate_names(c.n())
        .into_iter()
        .zip(c.values())
        .map(|(k, &z)| (k, complex(z)))
        .collect();
    json!({ "n": c.n(), "coords": coords })
}

pub fn angles(a: &PdgAngles) -> Value {
    json!({
        "theta12": real(a.theta12),
        "theta13": real(a.theta13),
        "theta23": real(a.theta23),
        "delta": real(a.delta),
        "alpha": real(a.alpha),
        "beta": real(a.beta),
    })
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CoordinatesDoc {
    pub n: usize,
    pub coords: BTreeMap<String, [f64; 2]>,
}

impl CoordinatesDoc {
    pub fn to_coordinates(&self, field: &str) -> Result<FlagCoordinates, CliError> {
        if self.n < 2 {
            return Err(CliError::validation(format!(
                "{field}.n: must be at least 2, got {}",
                self.n
            )));
        }
        let names = coordinate_names(self.n);
        if let Some(extra) = self.coords.keys().find(|k| !names.contains(k)) {
            return Err(CliError::validation(format!(
                "{field}.coords.{extra}: unknown coordinate for n = {} (expected {})",
                self.n,
                names.join(", ")
            )));
        }
        let mut values = Vec::with_capacity(names.len());
        for name in &names {
            let [re, im] = *self
                .coords
                .get(name)
                .ok_or_else(|| CliError::validation(format!("{field}.coords.{name}: missing")))?;
            if !(re.is_finite() && im.is_finite()) {
                return Err(CliError::validation(format!(
                    "{field}.coords.{name}: not finite"
                )));
            }
            values.push(Complex::new(re, im));
        }
        FlagCoordinates::new(self.n, values)
            .map_err(|e| CliError::validation(format!("{field}: {e}")))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairDoc {
    pub left: CoordinatesDoc,
    pub right: CoordinatesDoc,
}

impl PairDoc {
    pub fn to_pair(&self) -> Result<(FlagCoordinates, FlagCoordinates), CliError> {
        let l = self.left.to_coordinates("left")?;
        let r = self.right.to_coordinates("right")?;
        if l.n() != r.n() {
            return Err(CliError::validation(format!(
                "right.n: {} does not match left.n = {}",
                r.n(),
                l.n()
            )));
        }
        Ok((l, r))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDoc {
    pub matrix: Vec<Vec<[f64; 2]>>,
}

pub fn parse_matrix(rows: &[Vec<[f64; 2]>], field: &str) -> Result<ComplexMatrix, CliError> {
    let rows: Vec<Vec<Complex>> = rows
        .iter()
        .map(|r| r.iter().map(|&[re, im]| Complex::new(re, im)).collect())
        .collect();
    ComplexMatrix::from_rows(&rows).map_err(|e| CliError::validation(format!("{field}: {e}")))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassesDoc {
    pub masses: Vec<f64>,
    pub masses_prime: Vec<f64>,
    #[serde(default)]
    pub left: Option<CoordinatesDoc>,
    #[serde(default)]
    pub right: Option<CoordinatesDoc>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnglesDoc {
    pub theta12: f64,
    pub theta13: f64,
    pub theta23: f64,
    pub delta: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdgDoc {
    #[serde(default)]
    pub angles: Option<AnglesDoc>,
    #[serde(default)]
    pub coordinates: Option<CoordinatesDoc>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitDoc {
    pub n: usize,
    pub target_magnitudes: Vec<Vec<f64>>,
    #[serde(default)]
    pub target_j: Option<f64>,
    #[serde(default)]
    pub weights: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub j_weight: Option<f64>,
    #[serde(default)]
    pub max_modulus: Option<f64>,
}

pub fn parse_doc<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(text)
        .map_err(|e| CliError::validation(format!("malformed {what} document: {e}")))
}

/// `matrix,i,j,re,im` rows (1-based indices) for every named matrix.
pub fn matrices_csv(named: &[(&str, &ComplexMatrix)]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| CliError::validation(format!("csv: {e}"));
    w.write_record(["matrix", "i", "j", "re", "im"])
        .map_err(io_err)?;
    for (name, m) in named {
        for i in 0..m.n_rows() {
            for j in 0..m.n_cols() {
                let z = m[(i, j)];
                w.write_record([
                    name.to_string(),
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    format!("{:.16e}", z.re),
                    format!("{:.16e}", z.im),
                ])
                .map_err(io_err)?;
            }
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::validation(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("ascii"))
}
