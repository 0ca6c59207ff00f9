//! Model files: a JSON record `{format, kind, dimension, kernel, centres,
//! coefficients}` with every float written to 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{Dim, Point};
use crate::kernels::Kernel;

use super::potential::{ScalarPotentialModel, VectorPotentialModel};

pub const MODEL_FORMAT: &str = "rbf-hhd-model/1";

#[derive(Debug, Clone, PartialEq)]
pub enum ModelFile {
    Scalar(ScalarPotentialModel),
    Vector(VectorPotentialModel),
}

impl ModelFile {
    pub fn dim(&self) -> Dim {
        match self {
            ModelFile::Scalar(m) => m.dim,
            ModelFile::Vector(m) => m.dim,
        }
    }

    pub fn kernel(&self) -> &Kernel {
        match self {
            ModelFile::Scalar(m) => &m.kernel,
            ModelFile::Vector(m) => &m.kernel,
        }
    }

    pub fn centre_count(&self) -> usize {
        match self {
            ModelFile::Scalar(m) => m.len(),
            ModelFile::Vector(m) => m.len(),
        }
    }

    /// Count of stored numbers (centre coordinates plus coefficients).
    pub fn stored_numbers(&self) -> usize {
        let d = self.dim().n();
        match self {
            ModelFile::Scalar(m) => m.len() * (d + 1),
            ModelFile::Vector(m) => m.len() * (d + m.coefficients.len()),
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            ModelFile::Scalar(m) => render(m.dim, &m.kernel, &m.centres, Coeffs::Scalar(&m.coefficients)),
            ModelFile::Vector(m) => render(m.dim, &m.kernel, &m.centres, Coeffs::Vector(&m.coefficients)),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawModel = serde_json::from_str(text)?;
        if raw.format != MODEL_FORMAT {
            return Err(Error::Input(format!("unsupported model format `{}`", raw.format)));
        }
        raw.kernel.validate()?;
        let d = raw.dimension.n();
        let centres = raw
            .centres
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if c.len() != d {
                    return Err(Error::Input(format!(
                        "centre {i} has {} coordinates, expected {d}",
                        c.len()
                    )));
                }
                Ok(Point::new(c[0], c[1], if d == 3 { c[2] } else { 0.0 }))
            })
            .collect::<Result<Vec<_>>>()?;
        match (raw.kind.as_str(), raw.coefficients) {
            ("scalar", RawCoeffs::Scalar(c)) => Ok(ModelFile::Scalar(ScalarPotentialModel::new(
                raw.dimension,
                raw.kernel,
                centres,
                c,
            )?)),
            ("vector", RawCoeffs::Vector(c)) => Ok(ModelFile::Vector(VectorPotentialModel::new(
                raw.dimension,
                raw.kernel,
                centres,
                c,
            )?)),
            (kind, _) => Err(Error::Input(format!("coefficients do not match model kind `{kind}`"))),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Deserialize)]
struct RawModel {
    format: String,
    kind: String,
    dimension: Dim,
    kernel: Kernel,
    centres: Vec<Vec<f64>>,
    coefficients: RawCoeffs,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawCoeffs {
    Scalar(Vec<f64>),
    Vector(Vec<Vec<f64>>),
}

enum Coeffs<'a> {
    Scalar(&'a [f64]),
    Vector(&'a [Vec<f64>]),
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|&x| num(x)).collect();
    format!("[{}]", parts.join(", "))
}

fn render(dim: Dim, kernel: &Kernel, centres: &[Point], coeffs: Coeffs<'_>) -> String {
    let d = dim.n();
    let mut s = String::new();
    let kind = match coeffs {
        Coeffs::Scalar(_) => "scalar",
        Coeffs::Vector(_) => "vector",
    };
    let _ = writeln!(s, "{{");
    let _ = writeln!(s, "  \"format\": \"{MODEL_FORMAT}\",");
    let _ = writeln!(s, "  \"kind\": \"{kind}\",");
    let _ = writeln!(s, "  \"dimension\": {d},");
    let _ = write!(
        s,
        "  \"kernel\": {{\"family\": \"{}\", \"sigma\": {}",
        kernel.family,
        num(kernel.sigma)
    );
    if let Some(rho) = kernel.support_radius {
        let _ = write!(s, ", \"support_radius\": {}", num(rho));
    }
    let _ = writeln!(s, "}},");
    let rows: Vec<String> = centres
        .iter()
        .map(|c| format!("    {}", list(&c.as_slice()[..d])))
        .collect();
    let _ = writeln!(s, "  \"centres\": [\n{}\n  ],", rows.join(",\n"));
    match coeffs {
        Coeffs::Scalar(c) => {
            let _ = writeln!(s, "  \"coefficients\": {}", list(c));
        }
        Coeffs::Vector(blocks) => {
            let rows: Vec<String> = blocks.iter().map(|b| format!("    {}", list(b))).collect();
            let _ = writeln!(s, "  \"coefficients\": [\n{}\n  ]", rows.join(",\n"));
        }
    }
    let _ = writeln!(s, "}}");
    s
}
