use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Dim, Point};
use crate::kernels::Kernel;

/// `u(p) = Σ αᵢ φ(‖p − cᵢ‖)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarPotentialModel {
    pub dim: Dim,
    pub kernel: Kernel,
    pub centres: Vec<Point>,
    pub coefficients: Vec<f64>,
}

impl ScalarPotentialModel {
    pub fn new(dim: Dim, kernel: Kernel, centres: Vec<Point>, coefficients: Vec<f64>) -> Result<Self> {
        if centres.len() != coefficients.len() {
            return Err(Error::Input(format!(
                "{} centres but {} coefficients",
                centres.len(),
                coefficients.len()
            )));
        }
        Ok(ScalarPotentialModel {
            dim,
            kernel,
            centres,
            coefficients,
        })
    }

    pub fn zero(dim: Dim, kernel: Kernel, centres: Vec<Point>) -> Self {
        let k = centres.len();
        ScalarPotentialModel {
            dim,
            kernel,
            centres,
            coefficients: vec![0.0; k],
        }
    }

    pub fn len(&self) -> usize {
        self.centres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centres.is_empty()
    }

    pub fn eval(&self, p: &Point) -> Result<f64> {
        let mut acc = 0.0;
        for (c, &a) in self.centres.iter().zip(&self.coefficients) {
            acc += a * self.kernel.eval((p - c).norm())?;
        }
        Ok(acc)
    }

    pub fn gradient(&self, p: &Point) -> Result<Vector3<f64>> {
        let mut acc = Vector3::zeros();
        for (c, &a) in self.centres.iter().zip(&self.coefficients) {
            acc += self.kernel.rbf_gradient(c, p)? * a;
        }
        Ok(acc)
    }

    /// Symmetric to the last bit: both triangles see identical operations.
    pub fn hessian(&self, p: &Point) -> Result<Matrix3<f64>> {
        let mut acc = Matrix3::zeros();
        for (c, &a) in self.centres.iter().zip(&self.coefficients) {
            acc += self.kernel.rbf_hessian(c, p, self.dim)? * a;
        }
        Ok(acc)
    }

    pub fn laplacian(&self, p: &Point) -> Result<f64> {
        let mut acc = 0.0;
        for (c, &a) in self.centres.iter().zip(&self.coefficients) {
            acc += a * self.kernel.rbf_laplacian(c, p, self.dim)?;
        }
        Ok(acc)
    }

    /// `∇∧∇u` from the analytic Hessian. In 2D the scalar curl is returned
    /// in the `z` slot.
    pub fn curl_of_gradient(&self, p: &Point) -> Result<Vector3<f64>> {
        let h = self.hessian(p)?;
        Ok(antisymmetric_part(&h, self.dim))
    }

    pub fn eval_many(&self, points: &[Point]) -> Result<Vec<f64>> {
        points.par_iter().map(|p| self.eval(p)).collect()
    }

    pub fn gradient_many(&self, points: &[Point]) -> Result<Vec<Vector3<f64>>> {
        points.par_iter().map(|p| self.gradient(p)).collect()
    }
}

/// Curl of a field whose Jacobian is `j` (`j[(a, b)] = ∂_b v_a`).
fn antisymmetric_part(h: &Matrix3<f64>, dim: Dim) -> Vector3<f64> {
    match dim {
        Dim::Three => Vector3::new(h[(2, 1)] - h[(1, 2)], h[(0, 2)] - h[(2, 0)], h[(1, 0)] - h[(0, 1)]),
        Dim::Two => Vector3::new(0.0, 0.0, h[(1, 0)] - h[(0, 1)]),
    }
}

/// Vector potential `w`. Three scalar components in 3D; in 2D a single
/// stream potential whose rotor is `(∂_y w, −∂_x w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorPotentialModel {
    pub dim: Dim,
    pub kernel: Kernel,
    pub centres: Vec<Point>,
    pub coefficients: Vec<Vec<f64>>,
}

impl VectorPotentialModel {
    pub fn components_for(dim: Dim) -> usize {
        match dim {
            Dim::Two => 1,
            Dim::Three => 3,
        }
    }

    pub fn new(dim: Dim, kernel: Kernel, centres: Vec<Point>, coefficients: Vec<Vec<f64>>) -> Result<Self> {
        if coefficients.len() != Self::components_for(dim) {
            return Err(Error::Input(format!(
                "a {}D vector potential needs {} coefficient blocks, got {}",
                dim.n(),
                Self::components_for(dim),
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| c.len() != centres.len()) {
            return Err(Error::Input(
                "coefficient block length differs from centre count".into(),
            ));
        }
        Ok(VectorPotentialModel {
            dim,
            kernel,
            centres,
            coefficients,
        })
    }

    pub fn zero(dim: Dim, kernel: Kernel, centres: Vec<Point>) -> Self {
        let k = centres.len();
        VectorPotentialModel {
            dim,
            kernel,
            centres,
            coefficients: vec![vec![0.0; k]; Self::components_for(dim)],
        }
    }

    pub fn len(&self) -> usize {
        self.centres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centres.is_empty()
    }

    /// Component `j` as a scalar model.
    pub fn component(&self, j: usize) -> ScalarPotentialModel {
        ScalarPotentialModel {
            dim: self.dim,
            kernel: self.kernel,
            centres: self.centres.clone(),
            coefficients: self.coefficients[j].clone(),
        }
    }

    /// `w(p)`; in 2D the stream potential sits in the `z` slot.
    pub fn potential(&self, p: &Point) -> Result<Vector3<f64>> {
        let mut w = Vector3::zeros();
        for (i, c) in self.centres.iter().enumerate() {
            let phi = self.kernel.eval((p - c).norm())?;
            match self.dim {
                Dim::Three => {
                    for j in 0..3 {
                        w[j] += self.coefficients[j][i] * phi;
                    }
                }
                Dim::Two => w.z += self.coefficients[0][i] * phi,
            }
        }
        Ok(w)
    }

    /// `∇∧w(p)`.
    pub fn curl(&self, p: &Point) -> Result<Vector3<f64>> {
        let mut acc = Vector3::zeros();
        for (i, c) in self.centres.iter().enumerate() {
            let g = self.kernel.rbf_gradient(c, p)?;
            match self.dim {
                Dim::Three => {
                    let a = Vector3::new(
                        self.coefficients[0][i],
                        self.coefficients[1][i],
                        self.coefficients[2][i],
                    );
                    acc += g.cross(&a);
                }
                Dim::Two => {
                    let a = self.coefficients[0][i];
                    acc += Vector3::new(g.y, -g.x, 0.0) * a;
                }
            }
        }
        Ok(acc)
    }

    pub fn curl_many(&self, points: &[Point]) -> Result<Vec<Vector3<f64>>> {
        points.par_iter().map(|p| self.curl(p)).collect()
    }

    /// Hessians of the potential components (one per component).
    fn component_hessians(&self, p: &Point) -> Result<Vec<Matrix3<f64>>> {
        let nc = self.coefficients.len();
        let mut hs = vec![Matrix3::zeros(); nc];
        for (i, c) in self.centres.iter().enumerate() {
            let h = self.kernel.rbf_hessian(c, p, self.dim)?;
            for (j, acc) in hs.iter_mut().enumerate() {
                *acc += h * self.coefficients[j][i];
            }
        }
        Ok(hs)
    }

    /// Jacobian of `∇∧w` (`J[(a, b)] = ∂_b (∇∧w)_a`) from analytic second
    /// derivatives.
    pub fn curl_jacobian(&self, p: &Point) -> Result<Matrix3<f64>> {
        let hs = self.component_hessians(p)?;
        let mut j = Matrix3::zeros();
        match self.dim {
            Dim::Three => {
                for b in 0..3 {
                    j[(0, b)] = hs[2][(1, b)] - hs[1][(2, b)];
                    j[(1, b)] = hs[0][(2, b)] - hs[2][(0, b)];
                    j[(2, b)] = hs[1][(0, b)] - hs[0][(1, b)];
                }
            }
            Dim::Two => {
                for b in 0..2 {
                    j[(0, b)] = hs[0][(1, b)];
                    j[(1, b)] = -hs[0][(0, b)];
                }
            }
        }
        Ok(j)
    }

    /// `∇·(∇∧w)`, grouping the mixed partials that cancel analytically.
    pub fn divergence_of_curl(&self, p: &Point) -> Result<f64> {
        let hs = self.component_hessians(p)?;
        Ok(match self.dim {
            Dim::Three => {
                (hs[2][(1, 0)] - hs[2][(0, 1)]) + (hs[0][(2, 1)] - hs[0][(1, 2)]) + (hs[1][(0, 2)] - hs[1][(2, 0)])
            }
            Dim::Two => hs[0][(1, 0)] - hs[0][(0, 1)],
        })
    }
}

/// A vector field interpolated component by component, `ṽ = (ṽ₁, …, ṽ_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentwiseField {
    pub components: Vec<ScalarPotentialModel>,
}

impl ComponentwiseField {
    pub fn new(components: Vec<ScalarPotentialModel>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::Input("componentwise field needs components".into()));
        };
        if components.len() != first.dim.n() {
            return Err(Error::Input(format!(
                "{}D field needs {} components, got {}",
                first.dim.n(),
                first.dim.n(),
                components.len()
            )));
        }
        Ok(ComponentwiseField { components })
    }

    pub fn dim(&self) -> Dim {
        self.components[0].dim
    }

    pub fn eval(&self, p: &Point) -> Result<Vector3<f64>> {
        let mut v = Vector3::zeros();
        for (k, m) in self.components.iter().enumerate() {
            v[k] = m.eval(p)?;
        }
        Ok(v)
    }

    /// `J[(a, b)] = ∂_b ṽ_a`.
    pub fn jacobian(&self, p: &Point) -> Result<Matrix3<f64>> {
        let mut j = Matrix3::zeros();
        for (a, m) in self.components.iter().enumerate() {
            let g = m.gradient(p)?;
            j.set_row(a, &g.transpose());
        }
        Ok(j)
    }

    /// `(∇·ṽ, ∇∧ṽ)` from analytic first derivatives. The 2D curl is the
    /// `z` slot.
    pub fn divergence_curl(&self, p: &Point) -> Result<(f64, Vector3<f64>)> {
        let dim = self.dim();
        let j = self.jacobian(p)?;
        let div = (0..dim.n()).map(|k| j[(k, k)]).sum();
        Ok((div, antisymmetric_part(&j, dim)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point2;
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

    fn random_scalar(dim: Dim, seed: u64) -> ScalarPotentialModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let centres = random_points(12, dim, seed);
        let coeffs = (0..12).map(|_| rng.random_range(-3.0..3.0)).collect();
        ScalarPotentialModel::new(dim, Kernel::gaussian(1.5).unwrap(), centres, coeffs).unwrap()
    }

    fn random_vector(dim: Dim, seed: u64) -> VectorPotentialModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 200);
        let centres = random_points(10, dim, seed);
        let blocks = (0..VectorPotentialModel::components_for(dim))
            .map(|_| (0..10).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        VectorPotentialModel::new(dim, Kernel::gaussian(2.0).unwrap(), centres, blocks).unwrap()
    }

    #[test]
    fn zero_models_vanish() {
        let k = Kernel::gaussian(1.0).unwrap();
        let centres = random_points(5, Dim::Three, 1);
        let u = ScalarPotentialModel::zero(Dim::Three, k, centres.clone());
        let w = VectorPotentialModel::zero(Dim::Three, k, centres);
        let p = Point::new(0.3, 0.2, 0.1);
        assert_eq!(u.eval(&p).unwrap(), 0.0);
        assert_eq!(u.gradient(&p).unwrap(), Vector3::zeros());
        assert_eq!(w.curl(&p).unwrap(), Vector3::zeros());
    }

    #[test]
    fn single_gaussian_term() {
        let c = point2(0.5, -0.5);
        let m = ScalarPotentialModel::new(Dim::Two, Kernel::gaussian(2.0).unwrap(), vec![c], vec![3.0]).unwrap();
        let p = point2(0.0, 0.25);
        let r2 = (p - c).norm_squared();
        assert!((m.eval(&p).unwrap() - 3.0 * (-2.0 * r2).exp()).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for dim in [Dim::Two, Dim::Three] {
            let m = random_scalar(dim, 3);
            for p in random_points(500, dim, 4) {
                let g = m.gradient(&p).unwrap();
                let h = 1e-6;
                for k in 0..dim.n() {
                    let mut e = Vector3::zeros();
                    e[k] = h;
                    let fd = (m.eval(&(p + e)).unwrap() - m.eval(&(p - e)).unwrap()) / (2.0 * h);
                    assert!((g[k] - fd).abs() <= 1e-5 * (1.0 + fd.abs()), "{g} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn curl_matches_finite_differences_of_potential() {
        let w = random_vector(Dim::Three, 5);
        let h = 1e-6;
        for p in random_points(50, Dim::Three, 6) {
            let curl = w.curl(&p).unwrap();
            let d = |k: usize| {
                let mut e = Vector3::zeros();
                e[k] = h;
                (w.potential(&(p + e)).unwrap() - w.potential(&(p - e)).unwrap()) / (2.0 * h)
            };
            let (dx, dy, dz) = (d(0), d(1), d(2));
            let fd = Vector3::new(dy.z - dz.y, dz.x - dx.z, dx.y - dy.x);
            assert!((curl - fd).norm() <= 1e-5 * (1.0 + fd.norm()));
        }
        let w2 = random_vector(Dim::Two, 7);
        for p in random_points(50, Dim::Two, 8) {
            let curl = w2.curl(&p).unwrap();
            let s = |q: Point| w2.potential(&q).unwrap().z;
            let ex = Vector3::new(h, 0.0, 0.0);
            let ey = Vector3::new(0.0, h, 0.0);
            let fd = Vector3::new(
                (s(p + ey) - s(p - ey)) / (2.0 * h),
                -(s(p + ex) - s(p - ex)) / (2.0 * h),
                0.0,
            );
            assert!((curl - fd).norm() <= 1e-5 * (1.0 + fd.norm()));
        }
    }

    #[test]
    fn exactness_identities() {
        for dim in [Dim::Two, Dim::Three] {
            let u = random_scalar(dim, 9);
            let w = random_vector(dim, 10);
            for p in random_points(200, dim, 11) {
                assert!(u.curl_of_gradient(&p).unwrap().norm() <= 1e-10);
                assert!(w.divergence_of_curl(&p).unwrap().abs() <= 1e-10);
                // The Jacobian trace agrees with the grouped divergence up to
                // rounding of its terms.
                let j = w.curl_jacobian(&p).unwrap();
                assert!(j.trace().abs() <= 1e-12 * (1.0 + j.abs().max()));
            }
        }
    }

    #[test]
    fn curl_jacobian_matches_finite_differences() {
        let w = random_vector(Dim::Three, 12);
        let h = 1e-6;
        for p in random_points(20, Dim::Three, 13) {
            let j = w.curl_jacobian(&p).unwrap();
            for b in 0..3 {
                let mut e = Vector3::zeros();
                e[b] = h;
                let col = (w.curl(&(p + e)).unwrap() - w.curl(&(p - e)).unwrap()) / (2.0 * h);
                for a in 0..3 {
                    assert!((j[(a, b)] - col[a]).abs() <= 1e-5 * (1.0 + col[a].abs()));
                }
            }
        }
    }

    #[test]
    fn componentwise_constant_field() {
        let k = Kernel::gaussian(1.0).unwrap();
        let c = vec![point2(0.0, 0.0)];
        let comps = vec![
            ScalarPotentialModel::zero(Dim::Two, k, c.clone()),
            ScalarPotentialModel::zero(Dim::Two, k, c),
        ];
        let f = ComponentwiseField::new(comps).unwrap();
        let (div, curl) = f.divergence_curl(&point2(0.3, 0.1)).unwrap();
        assert_eq!(div, 0.0);
        assert_eq!(curl, Vector3::zeros());
    }

    #[test]
    fn length_checks() {
        let k = Kernel::gaussian(1.0).unwrap();
        assert!(ScalarPotentialModel::new(Dim::Two, k, vec![point2(0.0, 0.0)], vec![]).is_err());
        assert!(VectorPotentialModel::new(Dim::Three, k, vec![], vec![vec![]]).is_err());
    }
}
