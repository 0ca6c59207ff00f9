//! Grid evaluation, streamline tracing and legacy VTK output.

use std::io::Write;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{grid_nodes, BoundingBox, Dim, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bbox: BoundingBox,
    /// Nodes per axis, one entry per dimension.
    pub resolution: Vec<usize>,
}

impl GridSpec {
    pub fn new(bbox: BoundingBox, resolution: Vec<usize>) -> Result<Self> {
        let g = GridSpec { bbox, resolution };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution.len() < 2 || self.resolution.len() > 3 {
            return Err(Error::Config(format!(
                "grid needs 2 or 3 resolutions, got {}",
                self.resolution.len()
            )));
        }
        if let Some(r) = self.resolution.iter().find(|&&r| r < 2) {
            return Err(Error::Config(format!("grid resolution must be >= 2 per axis, got {r}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> Dim {
        if self.resolution.len() == 3 {
            Dim::Three
        } else {
            Dim::Two
        }
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes in x-fastest order.
    pub fn nodes(&self) -> Vec<Point> {
        grid_nodes(&self.bbox, self.dim(), &self.resolution)
    }

    pub fn spacing(&self) -> Vector3<f64> {
        let e = self.bbox.extent();
        let mut s = Vector3::zeros();
        for (a, &r) in self.resolution.iter().enumerate() {
            s[a] = e[a] / (r - 1) as f64;
        }
        s
    }
}

/// Storage comparison of a model against a sampled grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Footprint {
    pub centres: usize,
    pub grid_nodes: usize,
    /// `k·(d + c)`: centre coordinates plus `c` coefficient blocks.
    pub model_numbers: usize,
    /// `N·d`: one vector per grid node.
    pub grid_numbers: usize,
    /// `model_numbers / grid_numbers`.
    pub ratio: f64,
    /// `p = k / N`.
    pub p: f64,
}

pub fn footprint(centres: usize, coefficient_blocks: usize, dim: Dim, grid_nodes: usize) -> Footprint {
    let d = dim.n();
    let model_numbers = centres * (d + coefficient_blocks);
    let grid_numbers = grid_nodes * d;
    Footprint {
        centres,
        grid_nodes,
        model_numbers,
        grid_numbers,
        ratio: model_numbers as f64 / grid_numbers.max(1) as f64,
        p: centres as f64 / grid_nodes.max(1) as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Forward,
    Backward,
    Both,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            "both" => Ok(Direction::Both),
            other => Err(Error::Config(format!("unknown direction `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamlineSpec {
    pub seed_points: Vec<Point>,
    pub step_size: f64,
    pub max_steps: usize,
    #[serde(default)]
    pub direction: Direction,
}

/// Below this speed the integration stops.
pub const STAGNATION_SPEED: f64 = 1e-12;

impl StreamlineSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!("step size must be > 0, got {}", self.step_size)));
        }
        Ok(())
    }
}

fn integrate<F>(field: &F, seed: &Point, h: f64, max_steps: usize, bbox: &BoundingBox) -> Result<Vec<Point>>
where
    F: Fn(&Point) -> Result<Vector3<f64>>,
{
    let mut line = vec![*seed];
    let mut p = *seed;
    for _ in 0..max_steps {
        let k1 = field(&p)?;
        if k1.norm() < STAGNATION_SPEED {
            break;
        }
        let k2 = field(&(p + k1 * (0.5 * h)))?;
        let k3 = field(&(p + k2 * (0.5 * h)))?;
        let k4 = field(&(p + k3 * h))?;
        let next = p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !bbox.contains(&next) {
            break;
        }
        line.push(next);
        p = next;
    }
    Ok(line)
}

/// Fixed-step RK4 polyline through `seed`. Empty when the seed lies outside
/// `bbox`.
pub fn trace_streamline<F>(field: &F, seed: &Point, spec: &StreamlineSpec, bbox: &BoundingBox) -> Result<Vec<Point>>
where
    F: Fn(&Point) -> Result<Vector3<f64>>,
{
    spec.validate()?;
    if !bbox.contains(seed) {
        log::warn!("seed {:?} lies outside the domain; skipped", seed.as_slice());
        return Ok(Vec::new());
    }
    let h = spec.step_size;
    Ok(match spec.direction {
        Direction::Forward => integrate(field, seed, h, spec.max_steps, bbox)?,
        Direction::Backward => integrate(field, seed, -h, spec.max_steps, bbox)?,
        Direction::Both => {
            let mut back = integrate(field, seed, -h, spec.max_steps, bbox)?;
            back.reverse();
            let fwd = integrate(field, seed, h, spec.max_steps, bbox)?;
            back.extend_from_slice(&fwd[1..]);
            back
        }
    })
}

pub fn trace_streamlines<F>(field: &F, spec: &StreamlineSpec, bbox: &BoundingBox) -> Result<Vec<Vec<Point>>>
where
    F: Fn(&Point) -> Result<Vector3<f64>> + Sync,
{
    spec.seed_points
        .par_iter()
        .map(|s| trace_streamline(field, s, spec, bbox))
        .collect()
}

/// CSV `line,step,x,y[,z]`.
pub fn write_streamlines_csv<W: Write>(w: &mut W, lines: &[Vec<Point>], dim: Dim) -> std::io::Result<()> {
    let axes = ["x", "y", "z"];
    writeln!(w, "line,step,{}", axes[..dim.n()].join(","))?;
    for (l, line) in lines.iter().enumerate() {
        for (s, p) in line.iter().enumerate() {
            let coords: Vec<String> = (0..dim.n()).map(|a| format!("{:.17e}", p[a])).collect();
            writeln!(w, "{l},{s},{}", coords.join(","))?;
        }
    }
    Ok(())
}

/// Legacy ASCII `STRUCTURED_POINTS` file with point data at 9 significant
/// digits.
pub fn write_vtk<W: Write>(
    w: &mut W,
    grid: &GridSpec,
    title: &str,
    scalars: &[(&str, &[f64])],
    vectors: &[(&str, &[Vector3<f64>])],
) -> Result<()> {
    grid.validate()?;
    let n = grid.len();
    for (name, data) in scalars {
        if data.len() != n {
            return Err(Error::Input(format!(
                "scalar field `{name}` has {} values for {n} nodes",
                data.len()
            )));
        }
    }
    for (name, data) in vectors {
        if data.len() != n {
            return Err(Error::Input(format!(
                "vector field `{name}` has {} values for {n} nodes",
                data.len()
            )));
        }
    }
    let io = |e: std::io::Error| Error::io("<vtk>", e);
    let mut res = [1usize; 3];
    res[..grid.resolution.len()].copy_from_slice(&grid.resolution);
    let sp = grid.spacing();
    let spacing = [sp.x, sp.y, if grid.dim() == Dim::Three { sp.z } else { 1.0 }];
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    (|| -> std::io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "{title}")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET STRUCTURED_POINTS")?;
        writeln!(w, "DIMENSIONS {} {} {}", res[0], res[1], res[2])?;
        writeln!(
            w,
            "ORIGIN {:.8e} {:.8e} {:.8e}",
            grid.bbox.min.x, grid.bbox.min.y, grid.bbox.min.z
        )?;
        writeln!(w, "SPACING {:.8e} {:.8e} {:.8e}", spacing[0], spacing[1], spacing[2])?;
        writeln!(w, "POINT_DATA {n}")?;
        for (name, data) in scalars {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in data.iter() {
                writeln!(w, "{v:.8e}")?;
            }
        }
        for (name, data) in vectors {
            writeln!(w, "VECTORS {name} double")?;
            for v in data.iter() {
                writeln!(w, "{:.8e} {:.8e} {:.8e}", v.x, v.y, v.z)?;
            }
        }
        Ok(())
    })()
    .map_err(io)
}
