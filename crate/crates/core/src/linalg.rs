//! Dense regularized least squares.
//!
//! Every solve returns the minimizer of `‖Mα − b‖² + ε‖α‖²`, i.e. the solution
//! of the normal equation `(MᵀM + εI)α = Mᵀb`. Three routes are available:
//!
//! * `Qr`: Householder QR of the stacked matrix `[M; √ε I]`. Same solution as
//!   the normal equation without squaring the condition number.
//! * `Cholesky`: forms `MᵀM + εI` explicitly and factors it.
//! * `ConjugateGradient`: CG on the normal equation, matrix-free.
//!
//! `Auto` picks QR for moderate systems, Cholesky for tall large ones and CG
//! beyond 6000 unknowns.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Above this many unknowns `Auto` switches to conjugate gradients.
pub const CG_THRESHOLD: usize = 6000;
/// Above this `rows · cols²` work estimate `Auto` forms the normal equation.
const QR_WORK_LIMIT: f64 = 4.0e9;
/// Condition estimates beyond this are treated as singular.
const SINGULAR_CONDITION: f64 = 1.0e16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Auto,
    Qr,
    Cholesky,
    ConjugateGradient,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub method: String,
    pub rows: usize,
    pub unknowns: usize,
    pub epsilon: f64,
    /// Rough 2-norm condition estimate of the regularized least-squares
    /// operator (ratio of extreme triangular pivots).
    pub condition_estimate: f64,
    pub iterations: usize,
    /// `‖Mα − b‖₂` per right-hand side, unregularized.
    pub residual_norms: Vec<f64>,
}

/// Solves `(MᵀM + εI) X = Mᵀ B` column by column.
pub fn solve_least_squares(
    m: &DMatrix<f64>,
    b: &DMatrix<f64>,
    epsilon: f64,
    kind: SolverKind,
) -> Result<(DMatrix<f64>, SolveStats)> {
    if epsilon < 0.0 || !epsilon.is_finite() {
        return Err(Error::Config(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if m.nrows() != b.nrows() {
        return Err(Error::Input(format!(
            "system has {} rows but right-hand side has {}",
            m.nrows(),
            b.nrows()
        )));
    }
    let (rows, cols) = m.shape();
    if cols == 0 {
        return Ok((DMatrix::zeros(0, b.ncols()), SolveStats::default()));
    }
    let kind = match kind {
        SolverKind::Auto if cols > CG_THRESHOLD => SolverKind::ConjugateGradient,
        SolverKind::Auto if rows as f64 * (cols as f64).powi(2) > QR_WORK_LIMIT => SolverKind::Cholesky,
        SolverKind::Auto => SolverKind::Qr,
        k => k,
    };
    let (x, method, condition, iterations) = match kind {
        SolverKind::Qr => {
            let (x, cond) = solve_qr(m, b, epsilon)?;
            (x, "qr", cond, 0)
        }
        SolverKind::Cholesky => {
            let (x, cond) = solve_cholesky(m, b, epsilon)?;
            (x, "cholesky", cond, 0)
        }
        SolverKind::ConjugateGradient => {
            let (x, iters) = solve_cg(m, b, epsilon)?;
            (x, "conjugate-gradient", f64::NAN, iters)
        }
        SolverKind::Auto => unreachable!(),
    };
    let resid = m * &x - b;
    let residual_norms = resid.column_iter().map(|c| c.norm()).collect();
    Ok((
        x,
        SolveStats {
            method: method.to_string(),
            rows,
            unknowns: cols,
            epsilon,
            condition_estimate: condition,
            iterations,
            residual_norms,
        },
    ))
}

/// Single right-hand side convenience wrapper.
pub fn solve_least_squares_vec(
    m: &DMatrix<f64>,
    b: &DVector<f64>,
    epsilon: f64,
    kind: SolverKind,
) -> Result<(DVector<f64>, SolveStats)> {
    let bm = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let (x, stats) = solve_least_squares(m, &bm, epsilon, kind)?;
    Ok((x.column(0).into_owned(), stats))
}

fn solve_qr(m: &DMatrix<f64>, b: &DMatrix<f64>, epsilon: f64) -> Result<(DMatrix<f64>, f64)> {
    let (rows, cols) = m.shape();
    let (a, mut rhs) = if epsilon > 0.0 {
        let mut a = DMatrix::zeros(rows + cols, cols);
        a.rows_mut(0, rows).copy_from(m);
        let s = epsilon.sqrt();
        for j in 0..cols {
            a[(rows + j, j)] = s;
        }
        let mut rhs = DMatrix::zeros(rows + cols, b.ncols());
        rhs.rows_mut(0, rows).copy_from(b);
        (a, rhs)
    } else {
        if rows < cols {
            return Err(Error::IllConditioned {
                condition: f64::INFINITY,
            });
        }
        (m.clone(), b.clone())
    };
    let qr = a.qr();
    qr.q_tr_mul(&mut rhs);
    let r = qr.r();
    let condition = triangular_condition(&r);
    // Without regularization a pivot at rounding level means a rank deficit.
    let rank_limit = 1.0 / (rows.max(cols) as f64 * f64::EPSILON);
    let limit = if epsilon > 0.0 {
        SINGULAR_CONDITION
    } else {
        rank_limit.min(SINGULAR_CONDITION)
    };
    if !(condition < limit) {
        return Err(Error::IllConditioned { condition });
    }
    let top = rhs.rows(0, cols).into_owned();
    let x = r
        .solve_upper_triangular(&top)
        .ok_or(Error::IllConditioned { condition })?;
    Ok((x, condition))
}

fn triangular_condition(r: &DMatrix<f64>) -> f64 {
    let diag = r.diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), d| {
        (lo.min(d.abs()), hi.max(d.abs()))
    });
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `MᵀM`, accumulated over row blocks in parallel.
pub fn gram(m: &DMatrix<f64>) -> DMatrix<f64> {
    const BLOCK: usize = 512;
    let (rows, cols) = m.shape();
    if rows <= BLOCK {
        return m.transpose() * m;
    }
    (0..rows.div_ceil(BLOCK))
        .into_par_iter()
        .map(|bi| {
            let start = bi * BLOCK;
            let len = BLOCK.min(rows - start);
            let block = m.rows(start, len);
            block.transpose() * block
        })
        .reduce(|| DMatrix::zeros(cols, cols), |a, b| a + b)
}

fn solve_cholesky(m: &DMatrix<f64>, b: &DMatrix<f64>, epsilon: f64) -> Result<(DMatrix<f64>, f64)> {
    let mut a = gram(m);
    for j in 0..a.ncols() {
        a[(j, j)] += epsilon;
    }
    let rhs = m.transpose() * b;
    let diag_ratio = {
        let d = a.diagonal();
        let hi = d.iter().fold(0.0f64, |x, &v| x.max(v.abs()));
        let lo = d.iter().fold(f64::INFINITY, |x, &v| x.min(v.abs()));
        hi / lo
    };
    let chol = a.cholesky().ok_or(Error::IllConditioned {
        condition: if diag_ratio.is_finite() {
            diag_ratio.max(SINGULAR_CONDITION)
        } else {
            f64::INFINITY
        },
    })?;
    let condition = triangular_condition(&chol.l()).powi(2);
    if epsilon == 0.0 && !(condition < SINGULAR_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    Ok((chol.solve(&rhs), condition))
}

fn solve_cg(m: &DMatrix<f64>, b: &DMatrix<f64>, epsilon: f64) -> Result<(DMatrix<f64>, usize)> {
    let cols = m.ncols();
    let max_iter = 10 * cols;
    let mut out = DMatrix::zeros(cols, b.ncols());
    let mut total_iters = 0;
    for (j, bj) in b.column_iter().enumerate() {
        let rhs = m.tr_mul(&bj);
        let apply = |x: &DVector<f64>| m.tr_mul(&(m * x)) + x * epsilon;
        let (x, iters) = conjugate_gradient(apply, &rhs, 1e-12, max_iter);
        total_iters = total_iters.max(iters);
        out.set_column(j, &x);
    }
    Ok((out, total_iters))
}

/// Solves `(A + εI) X = B` for a symmetric positive semi-definite `A`
/// (an already assembled normal matrix). Cholesky is tried first; when it
/// breaks down the spectral decomposition is used with eigenvalues clamped
/// at zero.
pub fn solve_normal_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>, epsilon: f64) -> Result<(DMatrix<f64>, SolveStats)> {
    if epsilon < 0.0 || !epsilon.is_finite() {
        return Err(Error::Config(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let n = a.ncols();
    let mut reg = a.clone();
    for j in 0..n {
        reg[(j, j)] += epsilon;
    }
    let mut stats = SolveStats {
        rows: n,
        unknowns: n,
        epsilon,
        ..SolveStats::default()
    };
    if let Some(chol) = reg.clone().cholesky() {
        let condition = triangular_condition(&chol.l()).powi(2);
        if condition < SINGULAR_CONDITION {
            stats.method = "cholesky".into();
            stats.condition_estimate = condition;
            let x = chol.solve(b);
            stats.residual_norms = (&reg * &x - b).column_iter().map(|c| c.norm()).collect();
            return Ok((x, stats));
        }
    }
    let eig = a.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    let floor = top * f64::EPSILON * n as f64;
    let mut inv = DVector::zeros(n);
    let mut lo = f64::INFINITY;
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        let l = if l > floor { l } else { 0.0 };
        let d = l + epsilon;
        if d > 0.0 {
            inv[i] = 1.0 / d;
            lo = lo.min(d);
        }
    }
    if lo == f64::INFINITY {
        return Err(Error::IllConditioned {
            condition: f64::INFINITY,
        });
    }
    let v = &eig.eigenvectors;
    let mut y = v.tr_mul(b);
    for (i, mut row) in y.row_iter_mut().enumerate() {
        row *= inv[i];
    }
    let x = v * y;
    stats.method = "symmetric-eigen".into();
    stats.condition_estimate = (top + epsilon) / lo;
    stats.residual_norms = (&reg * &x - b).column_iter().map(|c| c.norm()).collect();
    Ok((x, stats))
}

/// Conjugate gradients for a symmetric positive (semi-)definite operator.
/// Stops when `‖r‖ ≤ tol·‖b‖` or after `max_iter` steps.
pub fn conjugate_gradient<F>(apply: F, b: &DVector<f64>, tol: f64, max_iter: usize) -> (DVector<f64>, usize)
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut x = DVector::zeros(b.len());
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return (x, 0);
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    for it in 0..max_iter {
        if rr.sqrt() <= tol * bnorm {
            return (x, it);
        }
        let ap = apply(&p);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            return (x, it);
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let rr_new = r.dot(&r);
        p = &r + &p * (rr_new / rr);
        rr = rr_new;
    }
    (x, max_iter)
}

/// Singular values of `M`, from the eigenvalues of `MᵀM`.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let eig = gram(m).symmetric_eigenvalues();
    let mut s: Vec<f64> = eig.iter().map(|&l| l.max(0.0).sqrt()).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `‖(MᵀM + εI)⁻¹Mᵀ‖₂ = maxᵢ sᵢ / (sᵢ² + ε)` over the singular values `sᵢ`.
pub fn regularized_pseudoinverse_norm(m: &DMatrix<f64>, epsilon: f64) -> Result<f64> {
    let s = singular_values(m);
    let mut best = 0.0f64;
    for si in s {
        let denom = si * si + epsilon;
        if denom == 0.0 {
            return Err(Error::IllConditioned {
                condition: f64::INFINITY,
            });
        }
        best = best.max(si / denom);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn normal_equation_residual(m: &DMatrix<f64>, b: &DMatrix<f64>, x: &DMatrix<f64>, eps: f64) -> f64 {
        let lhs = m.transpose() * m * x + x * eps;
        let rhs = m.transpose() * b;
        (lhs - &rhs).norm() / rhs.norm().max(1e-300)
    }

    #[test]
    fn all_routes_solve_the_same_normal_equation() {
        let m = random_matrix(60, 12, 1);
        let b = random_matrix(60, 2, 2);
        for eps in [0.0, 1e-3] {
            let mut sols = Vec::new();
            for kind in [SolverKind::Qr, SolverKind::Cholesky, SolverKind::ConjugateGradient] {
                let (x, stats) = solve_least_squares(&m, &b, eps, kind).unwrap();
                assert!(normal_equation_residual(&m, &b, &x, eps) < 1e-10, "{kind:?}");
                assert_eq!(stats.residual_norms.len(), 2);
                sols.push(x);
            }
            assert!((&sols[0] - &sols[1]).norm() < 1e-9);
            assert!((&sols[0] - &sols[2]).norm() < 1e-8);
        }
    }

    #[test]
    fn singular_without_regularization() {
        let mut m = random_matrix(10, 3, 3);
        let c0 = m.column(0).into_owned();
        m.set_column(2, &c0);
        let b = random_matrix(10, 1, 4);
        assert!(matches!(
            solve_least_squares(&m, &b, 0.0, SolverKind::Qr),
            Err(Error::IllConditioned { .. })
        ));
        assert!(solve_least_squares(&m, &b, 1e-8, SolverKind::Qr).is_ok());
    }

    #[test]
    fn pseudoinverse_norm_matches_inverse_smallest_singular_value() {
        let m = random_matrix(30, 5, 9);
        let svd = m.clone().svd(false, false);
        let smin = svd.singular_values.min();
        let norm = regularized_pseudoinverse_norm(&m, 0.0).unwrap();
        assert!((norm - 1.0 / smin).abs() < 1e-8 * norm);
    }

    #[test]
    fn gram_blocks_agree() {
        let m = random_matrix(1300, 7, 5);
        let g = gram(&m);
        assert!((g - m.transpose() * &m).norm() < 1e-9);
    }
}
