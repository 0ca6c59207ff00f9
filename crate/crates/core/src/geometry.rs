//! Points, dimensions and axis-aligned boxes.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of ℝ² or ℝ³. Planar points keep `z = 0`.
pub type Point = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn n(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }
}

impl TryFrom<u8> for Dim {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            2 => Ok(Dim::Two),
            3 => Ok(Dim::Three),
            _ => Err(format!("dimension must be 2 or 3, got {v}")),
        }
    }
}

impl From<Dim> for u8 {
    fn from(d: Dim) -> u8 {
        d.n() as u8
    }
}

pub fn point2(x: f64, y: f64) -> Point {
    Point::new(x, y, 0.0)
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub fn new(min: Point, max: Point) -> Self {
        BoundingBox { min, max }
    }

    pub fn cube(dim: Dim, lo: f64, hi: f64) -> Self {
        let mut min = Point::repeat(lo);
        let mut max = Point::repeat(hi);
        if dim == Dim::Two {
            min.z = 0.0;
            max.z = 0.0;
        }
        BoundingBox { min, max }
    }

    pub fn of_points(points: &[Point]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::Input("empty point set has no bounding box".into()))?;
        let (min, max) = points
            .iter()
            .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        Ok(BoundingBox { min, max })
    }

    pub fn padded(&self, fraction: f64) -> Self {
        let pad = (self.max - self.min) * fraction;
        BoundingBox {
            min: self.min - pad,
            max: self.max + pad,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn diameter(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    /// Volume (area in 2D) of the box over the first `dim` axes.
    pub fn measure(&self, dim: Dim) -> f64 {
        let e = self.extent();
        (0..dim.n()).map(|k| e[k]).product()
    }
}

/// Nodes of a regular grid with `resolution` nodes per axis, including the
/// box corners, in x-fastest order.
pub fn grid_nodes(bbox: &BoundingBox, dim: Dim, resolution: &[usize]) -> Vec<Point> {
    let n = dim.n();
    let axis = |k: usize, i: usize| {
        let m = resolution[k];
        if m <= 1 {
            0.5 * (bbox.min[k] + bbox.max[k])
        } else {
            bbox.min[k] + (bbox.max[k] - bbox.min[k]) * i as f64 / (m - 1) as f64
        }
    };
    let nz = if n == 3 { resolution[2] } else { 1 };
    let mut out = Vec::with_capacity(resolution[..n].iter().product());
    for iz in 0..nz {
        for iy in 0..resolution[1] {
            for ix in 0..resolution[0] {
                let z = if n == 3 { axis(2, iz) } else { 0.0 };
                out.push(Point::new(axis(0, ix), axis(1, iy), z));
            }
        }
    }
    out
}

/// Midpoints of a regular `cells`-per-axis partition of the box, with the
/// common cell measure.
pub fn cell_midpoints(bbox: &BoundingBox, dim: Dim, cells: usize) -> (Vec<Point>, f64) {
    let n = dim.n();
    let h = bbox.extent() / cells as f64;
    let nz = if n == 3 { cells } else { 1 };
    let mut out = Vec::with_capacity(cells.pow(n as u32));
    for iz in 0..nz {
        for iy in 0..cells {
            for ix in 0..cells {
                let z = if n == 3 {
                    bbox.min.z + (iz as f64 + 0.5) * h.z
                } else {
                    0.0
                };
                out.push(Point::new(
                    bbox.min.x + (ix as f64 + 0.5) * h.x,
                    bbox.min.y + (iy as f64 + 0.5) * h.y,
                    z,
                ));
            }
        }
    }
    let cell = (0..n).map(|k| h[k]).product();
    (out, cell)
}

/// Mean distance from each point to its nearest neighbour (brute force).
pub fn mean_nearest_neighbour_distance(points: &[Point]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let total: f64 = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| (p - q).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / points.len() as f64
}

/// Pairs `(i, j)`, `i < j`, of points closer than `tol`.
pub fn coincident_pairs(points: &[Point], tol: f64) -> Vec<(usize, usize)> {
    // Sort along x so only a thin window has to be compared.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].x.total_cmp(&points[b].x));
    let mut pairs = Vec::new();
    for (oi, &i) in order.iter().enumerate() {
        for &j in &order[oi + 1..] {
            if points[j].x - points[i].x > tol {
                break;
            }
            if (points[i] - points[j]).norm() <= tol {
                pairs.push((i.min(j), i.max(j)));
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_includes_corners() {
        let b = BoundingBox::cube(Dim::Two, -1.0, 1.0);
        let g = grid_nodes(&b, Dim::Two, &[3, 2]);
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], point2(-1.0, -1.0));
        assert_eq!(g[5], point2(1.0, 1.0));
    }

    #[test]
    fn midpoints_cover_box() {
        let b = BoundingBox::cube(Dim::Three, 0.0, 2.0);
        let (m, w) = cell_midpoints(&b, Dim::Three, 4);
        assert_eq!(m.len(), 64);
        assert!((w * 64.0 - 8.0).abs() < 1e-12);
        assert_eq!(m[0], Point::new(0.25, 0.25, 0.25));
    }

    #[test]
    fn finds_coincident_points() {
        let pts = vec![point2(0.0, 0.0), point2(1.0, 0.0), point2(0.0, 1e-13), point2(1.0, 0.0)];
        assert_eq!(coincident_pairs(&pts, 1e-12), vec![(0, 2), (1, 3)]);
    }

    #[test]
    fn dim_serde() {
        assert_eq!(serde_json::to_string(&Dim::Three).unwrap(), "3");
        assert!(serde_json::from_str::<Dim>("4").is_err());
    }
}
