//! JSON and CSV file formats. Every number is written in scientific
//! notation with 17 significant digits, which round-trips `f64` exactly.

use std::fs;
use std::path::{Path, PathBuf};

use delay_horizon::delay_model::{Channel, DelaySystem};
use delay_horizon::Matrix;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{Map, Number, Value};

use crate::error::CliError;

pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// A JSON number carrying exactly the text of [`fmt17`]; `null` when not
/// finite.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        Value::Number(fmt17(v).parse::<Number>().expect("formatted float is valid JSON"))
    } else {
        Value::Null
    }
}

pub fn opt_num(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}

pub fn matrix_value(m: &Matrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| num(m[(i, j)])).collect()))
            .collect(),
    )
}

pub fn vector_value(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

pub fn object(pairs: Vec<(&str, Value)>) -> Value {
    let mut map = Map::new();
    for (k, v) in pairs {
        map.insert(k.to_string(), v);
    }
    Value::Object(map)
}

/// Row-major `[[…], …]`, or a flat list read as a column.
#[derive(Debug, Clone)]
pub enum MatrixSpec {
    Rows(Vec<Vec<f64>>),
    Column(Vec<f64>),
}

// Untagged enums buffer numbers in a way that loses arbitrary-precision
// floats, so the shape is decided on a parsed `Value`.
impl<'de> Deserialize<'de> for MatrixSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let v = Value::deserialize(d)?;
        let Value::Array(items) = v else {
            return Err(D::Error::custom("matrix must be an array"));
        };
        let number = |x: &Value| x.as_f64().ok_or_else(|| D::Error::custom(format!("{x} is not a number")));
        if items.iter().all(Value::is_array) && !items.is_empty() {
            let rows = items
                .iter()
                .map(|r| r.as_array().expect("checked").iter().map(number).collect())
                .collect::<Result<_, _>>()?;
            Ok(MatrixSpec::Rows(rows))
        } else {
            Ok(MatrixSpec::Column(items.iter().map(number).collect::<Result<_, _>>()?))
        }
    }
}

impl MatrixSpec {
    pub fn to_matrix(&self) -> Result<Matrix, String> {
        match self {
            MatrixSpec::Column(v) => Ok(Matrix::from_column_slice(v.len(), 1, v)),
            MatrixSpec::Rows(rows) => {
                let r = rows.len();
                let c = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|row| row.len() != c) {
                    return Err("matrix rows have different lengths".into());
                }
                Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ChannelFile {
    #[serde(rename = "B")]
    pub b: MatrixSpec,
    pub tau: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SystemFile {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(rename = "A")]
    pub a: MatrixSpec,
    pub channels: Vec<ChannelFile>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct NetworkFile {
    pub alpha: MatrixSpec,
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| CliError::Malformed {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Malformed {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn malformed(path: &Path, reason: impl ToString) -> CliError {
    CliError::Malformed {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// Loads a system file; channels may be listed in any delay order. The
/// second value maps sorted channel positions to their index in the file.
pub fn load_system(path: &Path) -> Result<(DelaySystem, Vec<usize>), CliError> {
    let file: SystemFile = read_json(path)?;
    let a = file.a.to_matrix().map_err(|e| malformed(path, e))?;
    let mut channels = Vec::new();
    for c in &file.channels {
        channels.push(Channel {
            b: c.b.to_matrix().map_err(|e| malformed(path, e))?,
            tau: c.tau,
        });
    }
    DelaySystem::from_unsorted(a, channels).map_err(|e| malformed(path, e))
}

pub fn system_value(sys: &DelaySystem, name: Option<&str>) -> Value {
    let channels = sys
        .channels()
        .iter()
        .map(|c| object(vec![("B", matrix_value(&c.b)), ("tau", num(c.tau))]))
        .collect();
    let mut pairs = Vec::new();
    if let Some(n) = name {
        pairs.push(("name", Value::String(n.to_string())));
    }
    pairs.push(("A", matrix_value(sys.a())));
    pairs.push(("channels", Value::Array(channels)));
    object(pairs)
}

pub fn load_network(path: &Path) -> Result<Matrix, CliError> {
    let file: NetworkFile = read_json(path)?;
    file.alpha.to_matrix().map_err(|e| malformed(path, e))
}

pub fn network_value(alpha: &Matrix) -> Value {
    object(vec![("alpha", matrix_value(alpha))])
}

/// Contents of `gain.json`.
#[derive(Debug, Clone, Deserialize)]
pub struct GainFile {
    pub gamma: f64,
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    #[serde(rename = "K_TPF")]
    pub k_tpf: Vec<Vec<f64>>,
    #[serde(rename = "K_TPPF")]
    pub k_tppf: Vec<Vec<f64>>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    pub residuals: Residuals,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct Residuals {
    pub riccati: f64,
    pub lyapunov: f64,
    pub inverse: f64,
    pub trace_identity_gap: f64,
    pub psd_margin: f64,
    pub commutation_at_tau: f64,
}

/// Summary written next to a sweep CSV.
#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct SweepSummary {
    pub kind: String,
    pub gamma_sup: Option<f64>,
    pub gamma_opt: Option<f64>,
    pub lambda_max_min: Option<f64>,
    #[serde(rename = "N_used")]
    pub n_used: usize,
    pub empty_interval: bool,
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("values serialize");
    text.push('\n');
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a header and numeric rows with 17 significant digits.
pub fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let io_err = |e: csv::Error| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(row.iter().map(|&v| fmt17(v))).map_err(io_err)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_csv(path: &Path) -> Result<Table, CliError> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| malformed(path, e))?;
    let header = r
        .headers()
        .map_err(|e| malformed(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| malformed(path, e))?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| malformed(path, format!("{f:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    Ok(dir.to_path_buf())
}

pub fn rows_of(v: &[Vec<f64>]) -> Result<Matrix, String> {
    MatrixSpec::Rows(v.to_vec()).to_matrix()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for &v in &[0.1, -1.0 / 3.0, std::f64::consts::FRAC_PI_2, 1e-300, 6.02e23, 0.0] {
            let s = fmt17(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let digits = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            assert_eq!(digits, 17, "{s}");
        }
        let text = serde_json::to_string(&num(0.1)).unwrap();
        assert_eq!(text, "1.0000000000000001e-1");
        assert_eq!(serde_json::from_str::<f64>(&text).unwrap(), 0.1);
    }

    #[test]
    fn column_and_row_specs() {
        let c: MatrixSpec = serde_json::from_str("[1, 2, 3]").unwrap();
        assert_eq!(c.to_matrix().unwrap().shape(), (3, 1));
        let r: MatrixSpec = serde_json::from_str("[[1, 2], [3, 4]]").unwrap();
        assert_eq!(r.to_matrix().unwrap()[(1, 0)], 3.0);
        let bad: MatrixSpec = serde_json::from_str("[[1, 2], [3]]").unwrap();
        assert!(bad.to_matrix().is_err());
        let f: MatrixSpec = serde_json::from_str("[[0.5, -1.25e-3], [1.5707963267948966e0, 2]]").unwrap();
        assert_eq!(f.to_matrix().unwrap()[(0, 1)], -1.25e-3);
        assert_eq!(f.to_matrix().unwrap()[(1, 0)], std::f64::consts::FRAC_PI_2);
        assert!(serde_json::from_str::<MatrixSpec>("[[1, \"x\"]]").is_err());
    }
}
