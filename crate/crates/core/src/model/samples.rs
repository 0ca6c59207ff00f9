use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{coincident_pairs, BoundingBox, Dim, Point};

/// Points closer than this are considered coincident.
pub const COINCIDENCE_TOL: f64 = 1e-12;

/// Scattered samples carrying scalar constraints (`f(pᵢ) = fᵢ`, `i ∈ 𝓘`)
/// and/or vector constraints (`v(pⱼ) = vⱼ`, `j ∈ 𝓙`). A point may carry
/// both.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: Dim,
    points: Vec<Point>,
    scalar_values: Vec<(usize, f64)>,
    vector_values: Vec<(usize, Vector3<f64>)>,
}

impl SampleSet {
    pub fn new(
        dim: Dim,
        points: Vec<Point>,
        scalar_values: Vec<(usize, f64)>,
        vector_values: Vec<(usize, Vector3<f64>)>,
    ) -> Result<Self> {
        let set = SampleSet {
            dim,
            points,
            scalar_values,
            vector_values,
        };
        set.validate()?;
        Ok(set)
    }

    /// Same as [`SampleSet::new`], but coincident points are merged keeping
    /// the first occurrence (and its constraints).
    pub fn new_dedup(
        dim: Dim,
        points: Vec<Point>,
        scalar_values: Vec<(usize, f64)>,
        vector_values: Vec<(usize, Vector3<f64>)>,
    ) -> Result<Self> {
        let pairs = coincident_pairs(&points, COINCIDENCE_TOL);
        if pairs.is_empty() {
            return Self::new(dim, points, scalar_values, vector_values);
        }
        let mut dropped = vec![false; points.len()];
        for &(_, j) in &pairs {
            dropped[j] = true;
        }
        log::warn!(
            "dropping {} coincident point(s)",
            dropped.iter().filter(|&&d| d).count()
        );
        let mut remap = vec![usize::MAX; points.len()];
        let mut kept = Vec::new();
        for (i, p) in points.into_iter().enumerate() {
            if !dropped[i] {
                remap[i] = kept.len();
                kept.push(p);
            }
        }
        let scalars = scalar_values
            .into_iter()
            .filter(|&(i, _)| i < remap.len() && remap[i] != usize::MAX)
            .map(|(i, f)| (remap[i], f))
            .collect();
        let vectors = vector_values
            .into_iter()
            .filter(|&(i, _)| i < remap.len() && remap[i] != usize::MAX)
            .map(|(i, v)| (remap[i], v))
            .collect();
        Self::new(dim, kept, scalars, vectors)
    }

    /// Every point carries a vector constraint.
    pub fn from_vectors(dim: Dim, points: Vec<Point>, vectors: Vec<Vector3<f64>>) -> Result<Self> {
        if points.len() != vectors.len() {
            return Err(Error::Input(format!(
                "{} points but {} vectors",
                points.len(),
                vectors.len()
            )));
        }
        let vv = vectors.into_iter().enumerate().collect();
        Self::new(dim, points, Vec::new(), vv)
    }

    /// Every point carries a scalar constraint.
    pub fn from_scalars(dim: Dim, points: Vec<Point>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Input(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        let sv = values.into_iter().enumerate().collect();
        Self::new(dim, points, sv, Vec::new())
    }

    fn validate(&self) -> Result<()> {
        let n = self.points.len();
        for (i, p) in self.points.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::Input(format!("point {i} has non-finite coordinates")));
            }
            if self.dim == Dim::Two && p.z != 0.0 {
                return Err(Error::Input(format!("planar point {i} has z = {}", p.z)));
            }
        }
        for &(i, f) in &self.scalar_values {
            if i >= n {
                return Err(Error::Input(format!("scalar constraint references point {i} of {n}")));
            }
            if !f.is_finite() {
                return Err(Error::Input(format!("scalar value at point {i} is not finite")));
            }
        }
        for (i, v) in &self.vector_values {
            if *i >= n {
                return Err(Error::Input(format!("vector constraint references point {i} of {n}")));
            }
            if !v.iter().all(|c| c.is_finite()) {
                return Err(Error::Input(format!("vector value at point {i} is not finite")));
            }
            if self.dim == Dim::Two && v.z != 0.0 {
                return Err(Error::Input(format!("planar vector at point {i} has a z component")));
            }
        }
        let pairs = coincident_pairs(&self.points, COINCIDENCE_TOL);
        if !pairs.is_empty() {
            return Err(Error::CoincidentPoints { pairs });
        }
        Ok(())
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn scalar_values(&self) -> &[(usize, f64)] {
        &self.scalar_values
    }

    pub fn vector_values(&self) -> &[(usize, Vector3<f64>)] {
        &self.vector_values
    }

    pub fn bounding_box(&self) -> Result<BoundingBox> {
        BoundingBox::of_points(&self.points)
    }

    /// Indices of `𝓘 ∪ 𝓙`, each once, in increasing order.
    pub fn constrained_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .scalar_values
            .iter()
            .map(|&(i, _)| i)
            .chain(self.vector_values.iter().map(|&(i, _)| i))
            .collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }

    /// Points carrying a vector constraint, with their vectors.
    pub fn vector_points(&self) -> (Vec<Point>, Vec<Vector3<f64>>) {
        self.vector_values.iter().map(|&(i, v)| (self.points[i], v)).unzip()
    }

    /// Replaces the vector constraints (same indices, new values).
    pub fn with_vector_values(&self, values: Vec<Vector3<f64>>) -> Result<Self> {
        if values.len() != self.vector_values.len() {
            return Err(Error::Input("vector value count mismatch".into()));
        }
        let vv = self
            .vector_values
            .iter()
            .zip(values)
            .map(|(&(i, _), v)| (i, v))
            .collect();
        Self::new(self.dim, self.points.clone(), self.scalar_values.clone(), vv)
    }

    /// Reads the sample CSV format: header `x,y[,z]` followed by any of
    /// `f`, `vx`, `vy`, `vz`. Blank cells mean "no constraint"; lines
    /// starting with `#` are comments.
    pub fn read_csv(path: &Path, dedup: bool) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv_from(file, path, dedup)
    }

    pub fn read_csv_from<R: std::io::Read>(reader: R, path: &Path, dedup: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(false)
            .comment(Some(b'#'))
            .from_reader(reader);
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        let col: BTreeMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.to_ascii_lowercase(), i))
            .collect();
        for known in col.keys() {
            if !["x", "y", "z", "f", "fx", "vx", "vy", "vz"].contains(&known.as_str()) {
                return Err(parse_err(1, format!("unknown column `{known}`")));
            }
        }
        let (Some(&cx), Some(&cy)) = (col.get("x"), col.get("y")) else {
            return Err(parse_err(1, "header must contain x and y".into()));
        };
        let cz = col.get("z").copied();
        let dim = if cz.is_some() { Dim::Three } else { Dim::Two };
        let cf = col.get("f").or_else(|| col.get("fx")).copied();
        let cv: Vec<usize> = ["vx", "vy", "vz"][..dim.n()]
            .iter()
            .filter_map(|k| col.get(*k).copied())
            .collect();
        if !cv.is_empty() && cv.len() != dim.n() {
            return Err(parse_err(1, format!("vector columns must cover all {} axes", dim.n())));
        }
        if cf.is_none() && cv.is_empty() {
            return Err(parse_err(1, "no constraint columns (f, vx, vy[, vz])".into()));
        }

        let mut points = Vec::new();
        let mut scalars = Vec::new();
        let mut vectors = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                parse_err(line, e.to_string())
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            let cell = |c: usize| -> Result<Option<f64>> {
                let s = rec.get(c).unwrap_or("");
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|_| parse_err(line, format!("invalid number `{s}`")))
            };
            let req = |c: usize, name: &str| -> Result<f64> {
                cell(c)?.ok_or_else(|| parse_err(line, format!("missing coordinate {name}")))
            };
            let x = req(cx, "x")?;
            let y = req(cy, "y")?;
            let z = match cz {
                Some(c) => req(c, "z")?,
                None => 0.0,
            };
            let idx = points.len();
            points.push(Point::new(x, y, z));
            if let Some(c) = cf {
                if let Some(f) = cell(c)? {
                    scalars.push((idx, f));
                }
            }
            if !cv.is_empty() {
                let comps: Vec<Option<f64>> = cv.iter().map(|&c| cell(c)).collect::<Result<_>>()?;
                let present = comps.iter().filter(|c| c.is_some()).count();
                if present == comps.len() {
                    let mut v = Vector3::zeros();
                    for (k, c) in comps.iter().enumerate() {
                        v[k] = c.unwrap();
                    }
                    vectors.push((idx, v));
                } else if present > 0 {
                    return Err(parse_err(line, "partially specified vector".into()));
                }
            }
        }
        if points.is_empty() {
            return Err(parse_err(1, "no data rows".into()));
        }
        if dedup {
            Self::new_dedup(dim, points, scalars, vectors)
        } else {
            Self::new(dim, points, scalars, vectors)
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv_to(&mut w).map_err(|e| Error::io(path, e))
    }

    pub fn write_csv_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let n = self.dim.n();
        let has_f = !self.scalar_values.is_empty();
        let has_v = !self.vector_values.is_empty();
        let mut header: Vec<&str> = ["x", "y", "z"][..n].to_vec();
        if has_f {
            header.push("f");
        }
        if has_v {
            header.extend_from_slice(&["vx", "vy", "vz"][..n]);
        }
        writeln!(w, "{}", header.join(","))?;
        let mut f = vec![None; self.points.len()];
        for &(i, val) in &self.scalar_values {
            f[i] = Some(val);
        }
        let mut v = vec![None; self.points.len()];
        for &(i, val) in &self.vector_values {
            v[i] = Some(val);
        }
        for (i, p) in self.points.iter().enumerate() {
            let mut cells: Vec<String> = (0..n).map(|k| format!("{:.17e}", p[k])).collect();
            if has_f {
                cells.push(f[i].map(|x| format!("{x:.17e}")).unwrap_or_default());
            }
            if has_v {
                for k in 0..n {
                    cells.push(v[i].map(|x: Vector3<f64>| format!("{:.17e}", x[k])).unwrap_or_default());
                }
            }
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point2;
    use std::path::PathBuf;

    fn parse(text: &str) -> Result<SampleSet> {
        SampleSet::read_csv_from(text.as_bytes(), &PathBuf::from("t.csv"), false)
    }

    #[test]
    fn mixed_rows() {
        let s = parse("x,y,f,vx,vy\n0,0,1,,\n1,0,,2,3\n0,1,4,5,6\n").unwrap();
        assert_eq!(s.dim(), Dim::Two);
        assert_eq!(s.scalar_values(), &[(0, 1.0), (2, 4.0)]);
        assert_eq!(s.vector_values().len(), 2);
        assert_eq!(s.constrained_indices(), vec![0, 1, 2]);
    }

    #[test]
    fn three_dimensional_vectors() {
        let s = parse("x,y,z,vx,vy,vz\n0,0,0,1,2,3\n").unwrap();
        assert_eq!(s.dim(), Dim::Three);
        assert_eq!(s.vector_values()[0].1, Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn malformed_row_names_line() {
        let err = parse("x,y,f\n0,0,1\n1,zz,2\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(
            parse("x,y,f\n0,0,1\n1,2\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse("x,y,vx,vy\n0,0,1,\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse("x,y\n0,0\n").is_err());
    }

    #[test]
    fn comment_lines_are_skipped() {
        let s = parse("# seed=7\nx,y,f\n0,0,1\n# note\n1,0,2\n").unwrap();
        assert_eq!(s.scalar_values(), &[(0, 1.0), (1, 2.0)]);
        assert!(matches!(
            parse("# c\nx,y,f\n0,0,1\n1,q,2\n"),
            Err(Error::Parse { line: 4, .. })
        ));
    }

    #[test]
    fn coincident_points_rejected_or_merged() {
        let text = "x,y,f\n0,0,1\n1,1,2\n0,0,3\n";
        match parse(text).unwrap_err() {
            Error::CoincidentPoints { pairs } => assert_eq!(pairs, vec![(0, 2)]),
            e => panic!("unexpected {e}"),
        }
        let s = SampleSet::read_csv_from(text.as_bytes(), &PathBuf::from("t"), true).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.scalar_values(), &[(0, 1.0), (1, 2.0)]);
    }

    #[test]
    fn bad_indices() {
        assert!(SampleSet::new(Dim::Two, vec![point2(0.0, 0.0)], vec![(1, 0.0)], vec![]).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let pts = vec![point2(0.1, 1.0 / 3.0), point2(-2.5e-7, 4.0)];
        let s = SampleSet::new(
            Dim::Two,
            pts,
            vec![(0, std::f64::consts::PI)],
            vec![(1, Vector3::new(1.0 / 7.0, -0.0, 0.0))],
        )
        .unwrap();
        let mut buf = Vec::new();
        s.write_csv_to(&mut buf).unwrap();
        let back = SampleSet::read_csv_from(buf.as_slice(), &PathBuf::from("b"), false).unwrap();
        assert_eq!(back, s);
    }
}
