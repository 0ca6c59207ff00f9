//! Collocation matrices of the RBF expansions.
//!
//! Rows are point-major: the `d` rows of point `j` are consecutive
//! (`j·d + k` holds the `k`-th partial). Columns are centre-major within each
//! coefficient block.

use nalgebra::{DMatrix, DVector, Vector3};
use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{Dim, Point};
use crate::kernels::Kernel;

/// Fills a row-major buffer in parallel, `rows_per_point` rows per point.
fn assemble<F>(points: &[Point], rows_per_point: usize, cols: usize, fill: F) -> Result<DMatrix<f64>>
where
    F: Fn(&Point, &mut [f64]) -> Result<()> + Sync,
{
    let mut data = vec![0.0; points.len() * rows_per_point * cols];
    if cols > 0 {
        data.par_chunks_mut(rows_per_point * cols)
            .zip(points.par_iter())
            .try_for_each(|(chunk, p)| fill(p, chunk))?;
    }
    Ok(DMatrix::from_row_slice(points.len() * rows_per_point, cols, &data))
}

/// `Φ̃(j, i) = φᵢ(pⱼ)`.
pub fn value_matrix(kernel: &Kernel, centres: &[Point], points: &[Point]) -> Result<DMatrix<f64>> {
    let k = centres.len();
    assemble(points, 1, k, |p, row| {
        for (i, c) in centres.iter().enumerate() {
            row[i] = kernel.eval((p - c).norm())?;
        }
        Ok(())
    })
}

/// Gradient system `Φ`: row `j·d + a` holds `∂ₐφᵢ(pⱼ)`.
pub fn gradient_matrix(kernel: &Kernel, centres: &[Point], points: &[Point], dim: Dim) -> Result<DMatrix<f64>> {
    let k = centres.len();
    let n = dim.n();
    assemble(points, n, k, |p, rows| {
        for (i, c) in centres.iter().enumerate() {
            let g = kernel.rbf_gradient(c, p)?;
            for a in 0..n {
                rows[a * k + i] = g[a];
            }
        }
        Ok(())
    })
}

/// Rotor system `A` with `A α = (∇∧w)(pⱼ)` stacked per point.
///
/// In 3D the coefficient blocks are `(α⁽¹⁾, α⁽²⁾, α⁽³⁾)` and each point
/// contributes the antisymmetric block
/// `[[0, −∂z, ∂y], [∂z, 0, −∂x], [−∂y, ∂x, 0]]`. In 2D the single block
/// gives `(∂y φᵢ, −∂x φᵢ)`.
pub fn rotor_matrix(kernel: &Kernel, centres: &[Point], points: &[Point], dim: Dim) -> Result<DMatrix<f64>> {
    let k = centres.len();
    match dim {
        Dim::Three => assemble(points, 3, 3 * k, |p, rows| {
            let w = 3 * k;
            for (i, c) in centres.iter().enumerate() {
                let g = kernel.rbf_gradient(c, p)?;
                rows[k + i] = -g.z;
                rows[2 * k + i] = g.y;
                rows[w + i] = g.z;
                rows[w + 2 * k + i] = -g.x;
                rows[2 * w + i] = -g.y;
                rows[2 * w + k + i] = g.x;
            }
            Ok(())
        }),
        Dim::Two => assemble(points, 2, k, |p, rows| {
            for (i, c) in centres.iter().enumerate() {
                let g = kernel.rbf_gradient(c, p)?;
                rows[i] = g.y;
                rows[k + i] = -g.x;
            }
            Ok(())
        }),
    }
}

/// `L(j, i) = Δφᵢ(pⱼ)`.
pub fn laplacian_matrix(kernel: &Kernel, centres: &[Point], points: &[Point], dim: Dim) -> Result<DMatrix<f64>> {
    let k = centres.len();
    assemble(points, 1, k, |p, row| {
        for (i, c) in centres.iter().enumerate() {
            row[i] = kernel.rbf_laplacian(c, p, dim)?;
        }
        Ok(())
    })
}

/// Stacks vectors point-major into a `t·d` column.
pub fn stack_vectors(vs: &[Vector3<f64>], dim: Dim) -> DVector<f64> {
    let n = dim.n();
    DVector::from_iterator(vs.len() * n, vs.iter().flat_map(|v| (0..n).map(move |a| v[a])))
}

/// Inverse of [`stack_vectors`].
pub fn unstack_vectors(x: &DVector<f64>, dim: Dim) -> Vec<Vector3<f64>> {
    let n = dim.n();
    x.as_slice()
        .chunks(n)
        .map(|c| {
            let mut v = Vector3::zeros();
            v.as_mut_slice()[..n].copy_from_slice(c);
            v
        })
        .collect()
}

/// Splits a rotor solution into its coefficient blocks.
pub fn split_blocks(x: &DVector<f64>, k: usize) -> Vec<Vec<f64>> {
    x.as_slice().chunks(k.max(1)).map(<[f64]>::to_vec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ScalarPotentialModel, VectorPotentialModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, dim: Dim, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z = if dim == Dim::Three {
                    rng.random_range(-1.0..1.0)
                } else {
                    0.0
                };
                Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), z)
            })
            .collect()
    }

    #[test]
    fn gradient_matrix_matches_model_gradient() {
        let kernel = Kernel::gaussian(1.3).unwrap();
        for dim in [Dim::Two, Dim::Three] {
            let centres = random_points(7, dim, 1);
            let points = random_points(5, dim, 2);
            let alpha: Vec<f64> = (0..7).map(|i| (i as f64 * 0.7).sin()).collect();
            let m = gradient_matrix(&kernel, &centres, &points, dim).unwrap();
            let stacked = m * DVector::from_vec(alpha.clone());
            let model = ScalarPotentialModel::new(dim, kernel, centres, alpha).unwrap();
            let expect: Vec<_> = points.iter().map(|p| model.gradient(p).unwrap()).collect();
            assert!((stacked - stack_vectors(&expect, dim)).norm() < 1e-13);
        }
    }

    #[test]
    fn rotor_matrix_matches_model_curl() {
        let kernel = Kernel::new(crate::kernels::Family::InverseMultiquadric, 0.8).unwrap();
        for dim in [Dim::Two, Dim::Three] {
            let k = 6;
            let centres = random_points(k, dim, 3);
            let points = random_points(4, dim, 4);
            let nb = VectorPotentialModel::components_for(dim);
            let x = DVector::from_fn(nb * k, |i, _| ((i * i) as f64 * 0.37).cos());
            let m = rotor_matrix(&kernel, &centres, &points, dim).unwrap();
            let stacked = m * &x;
            let model = VectorPotentialModel::new(dim, kernel, centres, split_blocks(&x, k)).unwrap();
            let expect: Vec<_> = points.iter().map(|p| model.curl(p).unwrap()).collect();
            assert!((stacked - stack_vectors(&expect, dim)).norm() < 1e-13);
        }
    }

    #[test]
    fn stacking_round_trip() {
        let vs = vec![Vector3::new(1.0, 2.0, 0.0), Vector3::new(3.0, 4.0, 0.0)];
        let s = stack_vectors(&vs, Dim::Two);
        assert_eq!(s.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(unstack_vectors(&s, Dim::Two), vs);
    }
}
