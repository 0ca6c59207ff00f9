//! File helpers and small argument parsers shared by the subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;
use rbf_hhd::AnalyticField;
use rbf_hhd::{BoundingBox, Dim, Error, ModelFile, Point};

pub fn create(path: &Path) -> rbf_hhd::Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Runs `body` against a buffered file and maps I/O failures to the path.
pub fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> rbf_hhd::Result<()> {
    let mut w = create(path)?;
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn parse_numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("invalid number `{}`", t.trim()))
        })
        .collect()
}

/// `xmin,ymin[,zmin],xmax,ymax[,zmax]`.
pub fn parse_bbox(text: &str) -> Result<BoundingBox, String> {
    let v = parse_numbers(text)?;
    let d = match v.len() {
        4 => 2,
        6 => 3,
        n => return Err(format!("bounding box needs 4 or 6 numbers, got {n}")),
    };
    let mut min = Point::zeros();
    let mut max = Point::zeros();
    for a in 0..d {
        min[a] = v[a];
        max[a] = v[d + a];
        if !(max[a] > min[a]) {
            return Err(format!("bounding box axis {a} is empty: [{}, {}]", min[a], max[a]));
        }
    }
    Ok(BoundingBox::new(min, max))
}

pub fn bbox_dim(bbox: &BoundingBox) -> Dim {
    if bbox.max.z > bbox.min.z {
        Dim::Three
    } else {
        Dim::Two
    }
}

/// `x,y[,z];x,y[,z];...`.
pub fn parse_points(text: &str) -> Result<Vec<Point>, String> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let v = parse_numbers(s)?;
            match v.len() {
                2 => Ok(Point::new(v[0], v[1], 0.0)),
                3 => Ok(Point::new(v[0], v[1], v[2])),
                n => Err(format!("a point needs 2 or 3 coordinates, got {n}")),
            }
        })
        .collect()
}

/// Resolution for `dim` axes: one number repeated, or one per axis.
pub fn resolution(values: &[usize], dim: Dim) -> rbf_hhd::Result<Vec<usize>> {
    match values.len() {
        1 => Ok(vec![values[0]; dim.n()]),
        n if n == dim.n() => Ok(values.to_vec()),
        n => Err(Error::Config(format!("{n} resolutions given for a {}D grid", dim.n()))),
    }
}

pub fn write_points<W: Write>(w: &mut W, points: &[Point], dim: Dim) -> std::io::Result<()> {
    writeln!(w, "{}", ["x", "y", "z"][..dim.n()].join(","))?;
    for p in points {
        let row: Vec<String> = (0..dim.n()).map(|a| format!("{:.17e}", p[a])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a centre file written by [`write_points`]; `#` lines are comments.
pub fn read_points(path: &Path) -> rbf_hhd::Result<(Dim, Vec<Point>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty centre file".into()))?;
    let cols: Vec<String> = header.split(',').map(|c| c.trim().to_ascii_lowercase()).collect();
    let dim = match cols.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["x", "y"] => Dim::Two,
        ["x", "y", "z"] => Dim::Three,
        _ => return Err(parse_err(hline, format!("expected header x,y[,z], got `{header}`"))),
    };
    let mut points = Vec::new();
    for (line, row) in lines {
        let v = parse_numbers(row).map_err(|m| parse_err(line, m))?;
        if v.len() != dim.n() {
            return Err(parse_err(
                line,
                format!("expected {} columns, got {}", dim.n(), v.len()),
            ));
        }
        points.push(Point::new(v[0], v[1], if dim == Dim::Three { v[2] } else { 0.0 }));
    }
    if points.is_empty() {
        return Err(parse_err(hline, "no centres".into()));
    }
    Ok((dim, points))
}

/// Which part of an analytic field to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Component {
    #[default]
    Full,
    Conservative,
    Solenoidal,
}

/// A vector field to evaluate: the sum of model fields (gradients of
/// scalar models, curls of vector models) or a built-in analytic field.
pub enum FieldSource {
    Models(Vec<ModelFile>),
    Analytic(AnalyticField, Component),
}

impl FieldSource {
    pub fn dim(&self) -> rbf_hhd::Result<Dim> {
        match self {
            FieldSource::Analytic(f, _) => Ok(f.dim),
            FieldSource::Models(models) => models_dim(models),
        }
    }

    pub fn eval(&self, p: &Point) -> rbf_hhd::Result<Vector3<f64>> {
        match self {
            FieldSource::Analytic(f, c) => Ok(analytic_component(f, *c, p)),
            FieldSource::Models(models) => {
                let mut v = Vector3::zeros();
                for m in models {
                    v += model_field(m, p)?;
                }
                Ok(v)
            }
        }
    }

    /// Domain of an analytic field, or the box of the model centres.
    pub fn default_bbox(&self) -> rbf_hhd::Result<BoundingBox> {
        match self {
            FieldSource::Analytic(f, _) => Ok(f.domain),
            FieldSource::Models(models) => centres_bbox(models),
        }
    }
}

pub fn analytic_component(f: &AnalyticField, c: Component, p: &Point) -> Vector3<f64> {
    match c {
        Component::Full => f.field(p),
        Component::Conservative => f.conservative(p),
        Component::Solenoidal => f.solenoidal(p),
    }
}

pub fn model_field(m: &ModelFile, p: &Point) -> rbf_hhd::Result<Vector3<f64>> {
    match m {
        ModelFile::Scalar(s) => s.gradient(p),
        ModelFile::Vector(v) => v.curl(p),
    }
}

pub fn read_models(paths: &[std::path::PathBuf]) -> rbf_hhd::Result<Vec<ModelFile>> {
    let models: Vec<ModelFile> = paths
        .iter()
        .map(|p| ModelFile::read(p))
        .collect::<rbf_hhd::Result<_>>()?;
    models_dim(&models)?;
    Ok(models)
}

fn models_dim(models: &[ModelFile]) -> rbf_hhd::Result<Dim> {
    let first = models
        .first()
        .ok_or_else(|| Error::Input("no model given".into()))?
        .dim();
    if models.iter().any(|m| m.dim() != first) {
        return Err(Error::Input("models have different dimensions".into()));
    }
    Ok(first)
}

pub fn centres_bbox(models: &[ModelFile]) -> rbf_hhd::Result<BoundingBox> {
    let pts: Vec<Point> = models
        .iter()
        .flat_map(|m| match m {
            ModelFile::Scalar(s) => s.centres.clone(),
            ModelFile::Vector(v) => v.centres.clone(),
        })
        .collect();
    BoundingBox::of_points(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bbox_parsing() {
        let b = parse_bbox("-1,-2,1,2").unwrap();
        assert_eq!(b.min, Point::new(-1.0, -2.0, 0.0));
        assert_eq!(b.max, Point::new(1.0, 2.0, 0.0));
        assert_eq!(bbox_dim(&b), Dim::Two);
        assert_eq!(bbox_dim(&parse_bbox("0,0,0,1,1,1").unwrap()), Dim::Three);
        assert!(parse_bbox("0,0,1").is_err());
        assert!(parse_bbox("1,0,0,1").is_err());
        assert!(parse_bbox("a,0,1,1").is_err());
    }

    #[test]
    fn point_lists() {
        let p = parse_points("0,1; 2,3,4").unwrap();
        assert_eq!(p, vec![Point::new(0.0, 1.0, 0.0), Point::new(2.0, 3.0, 4.0)]);
        assert!(parse_points("1").is_err());
    }

    #[test]
    fn resolutions() {
        assert_eq!(resolution(&[4], Dim::Three).unwrap(), vec![4, 4, 4]);
        assert_eq!(resolution(&[4, 5], Dim::Two).unwrap(), vec![4, 5]);
        assert!(resolution(&[4, 5], Dim::Three).is_err());
    }

    #[test]
    fn centre_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let pts = vec![Point::new(0.1, 1.0 / 3.0, 0.0), Point::new(-2.0, 5e-9, 0.0)];
        write_file(&path, |w| {
            writeln!(w, "# seed=1")?;
            write_points(w, &pts, Dim::Two)
        })
        .unwrap();
        let (dim, back) = read_points(&path).unwrap();
        assert_eq!(dim, Dim::Two);
        assert_eq!(back, pts);
    }

    #[test]
    fn bad_centre_row_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, "x,y\n0,0\n1\n").unwrap();
        assert!(matches!(read_points(&path), Err(Error::Parse { line: 3, .. })));
    }
}
