use std::path::Path;

use kmfg_core::{Complex64, Error};
use serde::Serialize;
use serde_json::{json, Value};

use crate::SCHEMA_VERSION;

/// A CSV file held in memory until the whole run has succeeded.
#[derive(Debug, Clone)]
pub struct Csv {
    pub suffix: &'static str,
    pub bytes: Vec<u8>,
}

impl Csv {
    pub fn new<R: Serialize>(suffix: &'static str, header: &[&str], rows: impl IntoIterator<Item = R>) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        for row in rows {
            w.serialize(row).expect("in-memory write");
        }
        Self { suffix, bytes: w.into_inner().expect("in-memory flush") }
    }

    /// `k,re,im` rows.
    pub fn spectrum<'a>(rows: impl IntoIterator<Item = (i32, &'a [Complex64])>) -> Self {
        let flat: Vec<(i32, f64, f64)> =
            rows.into_iter().flat_map(|(k, vals)| vals.iter().map(move |z| (k, z.re, z.im))).collect();
        Self::new("spectrum", &["k", "re", "im"], flat)
    }

    /// `t,norm1,norm2` rows.
    pub fn trajectory(rows: impl IntoIterator<Item = (f64, f64, f64)>) -> Self {
        Self::new("trajectory", &["t", "norm1", "norm2"], rows)
    }

    /// `t,x,value` rows.
    pub fn marginals(rows: impl IntoIterator<Item = (f64, f64, f64)>) -> Self {
        Self::new("marginals", &["t", "x", "value"], rows)
    }
}

#[derive(Debug, Clone)]
pub struct Artifacts {
    pub result: Value,
    pub csv: Vec<Csv>,
}

#[derive(Debug)]
pub enum Failure {
    /// Rejected input; nothing is written.
    Invalid(String),
    /// The computation failed; the report records the diagnostic and any
    /// partial result.
    Numerical { error: Error, partial: Option<Box<Artifacts>> },
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        match error {
            Error::InvalidConfig(msg) => Failure::Invalid(msg),
            error => Failure::Numerical { error, partial: None },
        }
    }
}

pub fn error_json(e: &Error) -> Value {
    let kind = match e {
        Error::InvalidConfig(_) => "invalid_config",
        Error::Overflow { .. } => "overflow",
        Error::QuadratureDivergence { .. } => "quadrature_divergence",
        Error::DomainTooSmall(_) => "domain_too_small",
        Error::Pole { .. } => "pole",
        Error::Eigensolver(_) => "eigensolver",
        Error::InvalidBracket { .. } => "invalid_bracket",
        Error::BasisScaling { .. } => "basis_scaling",
        Error::OnAxisEigenvalue { .. } => "on_axis_eigenvalue",
        Error::StableDimension { .. } => "stable_dimension",
        Error::NearSingular { .. } => "near_singular",
        Error::Cfl(_) => "cfl",
        Error::BlowUp { .. } => "blow_up",
        Error::NoConvergence { .. } => "no_convergence",
        Error::NoWave(_) => "no_wave",
    };
    let mut v = json!({ "kind": kind, "message": e.to_string() });
    if let Error::NoConvergence { history, .. } = e {
        v["residual_history"] = json!(history);
    }
    v
}

fn write_report(dir: &Path, name: &str, report: &Value, csv: &[Csv]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for c in csv {
        std::fs::write(dir.join(format!("{name}-{}.csv", c.suffix)), &c.bytes)?;
    }
    let mut text = serde_json::to_vec_pretty(report).expect("report serializes");
    text.push(b'\n');
    std::fs::write(dir.join(format!("{name}.json")), text)
}

fn files(name: &str, csv: &[Csv]) -> Vec<String> {
    csv.iter().map(|c| format!("{name}-{}.csv", c.suffix)).collect()
}

pub fn write_success(dir: &Path, name: &str, config: Value, a: Artifacts) -> std::io::Result<()> {
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "subcommand": name,
        "status": "ok",
        "config": config,
        "result": a.result,
        "files": files(name, &a.csv),
    });
    write_report(dir, name, &report, &a.csv)
}

pub fn write_failure(
    dir: &Path,
    name: &str,
    config: Value,
    e: &Error,
    partial: Option<Box<Artifacts>>,
) -> std::io::Result<()> {
    let (result, csv) = match partial {
        Some(a) => {
            let a = *a;
            (a.result, a.csv)
        }
        None => (Value::Null, Vec::new()),
    };
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "subcommand": name,
        "status": "numerical_failure",
        "config": config,
        "error": error_json(e),
        "result": result,
        "files": files(name, &csv),
    });
    write_report(dir, name, &report, &csv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_floats() {
        let x = 0.1 + 0.2;
        let c = Csv::trajectory([(x, 1e-300, -2.5e17)]);
        let text = String::from_utf8(c.bytes).unwrap();
        let row = text.lines().nth(1).unwrap();
        let vals: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(vals, vec![x, 1e-300, -2.5e17]);
        assert!(text.starts_with("t,norm1,norm2\n"));
    }

    #[test]
    fn spectrum_rows() {
        let v = [Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.0)];
        let c = Csv::spectrum([(3, &v[..])]);
        assert_eq!(String::from_utf8(c.bytes).unwrap(), "k,re,im\n3,1.0,-2.0\n3,0.5,0.0\n");
    }

    #[test]
    fn invalid_config_is_not_numerical() {
        assert!(matches!(Failure::from(Error::InvalidConfig("x".into())), Failure::Invalid(_)));
        assert!(matches!(Failure::from(Error::Cfl(2.0)), Failure::Numerical { .. }));
    }
}
