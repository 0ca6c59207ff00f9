//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with its measured values and runtime; the test fails if any criterion
//! fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use rbf_hhd::analysis::critical::{default_guesses, trust_region_runs};
use rbf_hhd::analysis::linf_relative;
use rbf_hhd::analysis::stability::SystemSpec;
use rbf_hhd::centres::model_metrics;
use rbf_hhd::geometry::point2;
use rbf_hhd::linalg::solve_least_squares_vec;
use rbf_hhd::systems::{split_blocks, unstack_vectors};
use rbf_hhd::viz::{footprint, GridSpec};
use rbf_hhd::*;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Name, check and time budget in seconds.
type Criterion = (&'static str, fn(f64) -> Outcome, f64);

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn linf_vectors(reference: &[Vector3<f64>], candidate: &[Vector3<f64>]) -> f64 {
    let num = reference
        .iter()
        .zip(candidate)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let den = reference.iter().map(|a| a.norm()).fold(0.0, f64::max);
    num / den
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Fourth-order central difference of `f` at `r`.
fn derivative(f: impl Fn(f64) -> f64, r: f64, h: f64) -> f64 {
    let d = |h: f64| (f(r + h) - f(r - h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

fn kernel_derivatives(limit_s: f64) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut tested = 0;
    let mut centre_ok = true;
    for family in Family::ALL {
        for sigma in [0.5, 1.0, 2.0] {
            let kernel = Kernel::new(family, sigma).unwrap();
            let flags = kernel.existence_flags();
            // The gradient column says "Yes" exactly when φ′(0) = 0.
            let d0 = kernel.eval_d1(0.0);
            centre_ok &= match (flags.gradient_exists, d0) {
                (true, Ok(v)) => v == 0.0,
                (true, Err(_)) => false,
                (false, Ok(v)) => v != 0.0,
                (false, Err(_)) => true,
            };
            if !(flags.gradient_exists && flags.hessian_exists) {
                continue;
            }
            tested += 1;
            let top = kernel.support().map_or(3.0, |rho| 0.95 * rho);
            let rs: Vec<f64> = (0..1000).map(|_| rng.random_range(1e-3..top)).collect();
            let d1: Vec<f64> = rs.iter().map(|&r| kernel.eval_d1(r).unwrap()).collect();
            let d2: Vec<f64> = rs.iter().map(|&r| kernel.eval_d2(r).unwrap()).collect();
            // Relative error, floored at 1e-6 of the largest magnitude so
            // sign changes of φ″ do not divide by zero.
            let floor1 = 1e-6 * d1.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let floor2 = 1e-6 * d2.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            for (i, &r) in rs.iter().enumerate() {
                let h = (1e-3f64).min(r / 4.0);
                let fd1 = derivative(|x| kernel.eval(x).unwrap(), r, h);
                let fd2 = derivative(|x| kernel.eval_d1(x).unwrap(), r, h);
                worst = worst.max((fd1 - d1[i]).abs() / d1[i].abs().max(floor1));
                worst = worst.max((fd2 - d2[i]).abs() / d2[i].abs().max(floor2));
            }
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: worst <= 1e-5 && centre_ok && within(elapsed, limit_s),
        detail: format!(
            "{tested} kernel configurations, max relative error {worst:.2e} (<= 1e-5), phi'(0) column consistent: {centre_ok}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    }
}

fn exactness_identities(limit_s: f64) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (name, n, c, mode) in [
        ("fig8", 8, 5, FitMode::Independent),
        ("fig8", 8, 5, FitMode::SequentialResidual),
        ("u3", 15, 8, FitMode::Independent),
        ("rotation", 15, 8, FitMode::Independent),
    ] {
        let f = make_analytic_field(name).unwrap();
        let s = f.sample_vectors(f.grid(n)).unwrap();
        let cfg = HHDConfig::new(Strategy::Direct, Kernel::gaussian(1.0).unwrap())
            .with_centres(f.grid(c))
            .with_fit_mode(mode);
        let r = decompose_direct(&s, &cfg).unwrap();
        let d = residual_diagnostics(&r, &s).unwrap();
        worst = worst.max(d.max_curl_of_gradient).max(d.max_divergence_of_curl);
        checked += d.points_checked;
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: worst <= 1e-10 && within(elapsed, limit_s),
        detail: format!(
            "max |curl grad u|, |div curl w| = {worst:.2e} over {checked} probes (<= 1e-10), {:.2}s",
            elapsed.as_secs_f64()
        ),
    }
}

fn analytic_hhd(limit_s: f64) -> Outcome {
    let start = Instant::now();
    let f = make_analytic_field("fig8").unwrap();
    let s = f.sample_vectors(f.grid(12)).unwrap();
    let centres = f.grid(8);
    let k = centres.len();
    let cfg = HHDConfig::new(Strategy::Direct, Kernel::gaussian(1.0).unwrap())
        .with_centres(centres)
        .with_fit_mode(FitMode::SequentialResidual);
    let r = decompose_direct(&s, &cfg).unwrap();
    let pts = s.points();
    let cons: Vec<_> = pts.iter().map(|p| r.conservative.gradient(p).unwrap()).collect();
    let sol: Vec<_> = pts.iter().map(|p| r.solenoidal.curl(p).unwrap()).collect();
    let cons_ref: Vec<_> = pts.iter().map(|p| f.conservative(p)).collect();
    let sol_ref: Vec<_> = pts.iter().map(|p| f.solenoidal(p)).collect();
    let v: Vec<_> = pts.iter().map(|p| f.field(p)).collect();
    let sum: Vec<_> = cons.iter().zip(&sol).map(|(a, b)| a + b).collect();
    let e_cons = linf_vectors(&cons_ref, &cons);
    let e_sol = linf_vectors(&sol_ref, &sol);
    let e_rec = linf_vectors(&v, &sum);
    let elapsed = start.elapsed();
    Outcome {
        pass: e_cons <= 0.05 && e_sol <= 0.05 && within(elapsed, limit_s),
        detail: format!(
            "12^3 samples, {k} Gaussian centres: conservative {:.1}%, solenoidal {:.1}% (<= 5%); reconstruction of v {:.2}%, {:.2}s",
            100.0 * e_cons,
            100.0 * e_sol,
            100.0 * e_rec,
            elapsed.as_secs_f64()
        ),
    }
}

fn mixed_fit(limit_s: f64) -> Outcome {
    let start = Instant::now();
    let f = make_analytic_field("u1").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 500;
    let pts: Vec<Point> = (0..n)
        .map(|_| point2(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let scalar_idx = rand::seq::index::sample(&mut rng, n, 450).into_vec();
    let vector_idx = rand::seq::index::sample(&mut rng, n, 100).into_vec();
    let overlapped = vector_idx.iter().filter(|j| scalar_idx.contains(j)).count();
    let scalars = scalar_idx.iter().map(|&i| (i, f.potential(&pts[i]).unwrap())).collect();
    let vectors = vector_idx.iter().map(|&j| (j, f.field(&pts[j]))).collect();
    let s = SampleSet::new(Dim::Two, pts.clone(), scalars, vectors).unwrap();
    // The stacked system is numerically rank deficient; a shift of 1e-24
    // (1e-12 on the QR diagonal) only filters directions below rounding.
    let cfg = FitConfig::new(Kernel::gaussian(0.5).unwrap()).with_epsilon(1e-24);
    let m = fit_mixed(&s, &cfg).unwrap();
    let truth: Vec<f64> = pts.iter().map(|p| f.potential(p).unwrap()).collect();
    let got = m.eval_many(&pts).unwrap();
    let linf = truth.iter().zip(&got).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let angles: Vec<f64> = pts
        .iter()
        .map(|p| {
            let a = f.field(p);
            let b = m.gradient(p).unwrap();
            (a.dot(&b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos().to_degrees()
        })
        .collect();
    let mean_angle = angles.iter().sum::<f64>() / angles.len() as f64;
    let elapsed = start.elapsed();
    Outcome {
        pass: linf <= 1e-5 && mean_angle <= 3.0 && within(elapsed, limit_s),
        detail: format!(
            "500 points, 450 scalar + 100 vector ({overlapped} overlapped): linf potential error {linf:.2e} (<= 1e-5), mean angle {mean_angle:.3} deg (<= 3), {:.2}s",
            elapsed.as_secs_f64()
        ),
    }
}

fn noise_robustness(limit_s: f64) -> Outcome {
    let start = Instant::now();
    let f = make_analytic_field("fig8-conservative").unwrap();
    let clean = f.sample_vectors(f.grid(15)).unwrap();
    let noisy = add_noise(&clean, 0.25, 1).unwrap();
    let pts = clean.points();
    let centre = |xs: Vec<f64>| {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.into_iter().map(|x| x - mean).collect::<Vec<_>>()
    };
    // Vector constraints fix u up to a constant; compare zero-mean versions.
    let truth = centre(pts.iter().map(|p| f.potential(p).unwrap()).collect());
    let mut errors = Vec::new();
    for family in [Family::Gaussian, Family::Multiquadric, Family::InverseMultiquadric] {
        let cfg = FitConfig::new(Kernel::new(family, 1.0).unwrap()).with_centres(f.grid(8));
        let m = fit_mixed(&noisy, &cfg).unwrap();
        let got = centre(m.eval_many(pts).unwrap());
        errors.push((family, linf_relative(&truth, &got)));
    }
    let elapsed = start.elapsed();
    let listed: Vec<String> = errors.iter().map(|(k, e)| format!("{k} {:.2}%", 100.0 * e)).collect();
    Outcome {
        pass: errors.iter().all(|(_, e)| *e <= 0.03) && within(elapsed, limit_s),
        detail: format!(
            "15^3 samples, 25% noise, 512 centres: {} (<= 3%), {:.2}s",
            listed.join(", "),
            elapsed.as_secs_f64()
        ),
    }
}

fn centre_ordering(limit_s: f64) -> Outcome {
    let start = Instant::now();
    let f = make_analytic_field("bump").unwrap();
    let s = f.sample_vectors(f.grid(64)).unwrap();
    let cfg = FitConfig::new(Kernel::gaussian(2.0).unwrap());
    let score = |strategy: CentreStrategy, k: usize, seed: u64| {
        let c = select_centres(&s, &CentreSelection::new(strategy, k).with_seed(seed)).unwrap();
        let m = fit_mixed(&s, &cfg.clone().with_centres(c)).unwrap();
        model_metrics(&m, &s).unwrap()
    };
    let k = 32;
    let nc = |strategy| median((0..10).map(|seed| score(strategy, k, seed).nc).collect());
    let (imp, uni, rnd) = (
        nc(CentreStrategy::KernelImportance),
        nc(CentreStrategy::Uniform),
        nc(CentreStrategy::Random),
    );
    let levels = [32, 64, 128];
    let nrmse: Vec<f64> = levels
        .iter()
        .map(|&k| score(CentreStrategy::KernelImportance, k, 0).nrmse)
        .collect();
    let decreasing = nrmse.windows(2).all(|w| w[1] < w[0]);
    let elapsed = start.elapsed();
    Outcome {
        pass: imp >= uni && uni >= rnd && decreasing && within(elapsed, limit_s),
        detail: format!(
            "64^2 samples, k = {k}, median NC importance {imp:.6} >= uniform {uni:.6} >= random {rnd:.6}; NRMSE at k = 32/64/128: {:.2e} > {:.2e} > {:.2e}, {:.2}s",
            nrmse[0],
            nrmse[1],
            nrmse[2],
            elapsed.as_secs_f64()
        ),
    }
}

/// Classifies a critical point of `u` by sampling a ring of radius `h`
/// around it: no sign change means an extremum, four means a saddle.
fn ring_classification(u: impl Fn(&Point) -> f64, p: &Point, h: f64) -> CriticalKind {
    let n = 720;
    let centre = u(p);
    let diffs: Vec<f64> = (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            u(&point2(p.x + h * t.cos(), p.y + h * t.sin())) - centre
        })
        .collect();
    let changes = (0..n)
        .filter(|&i| diffs[i].signum() != diffs[(i + 1) % n].signum())
        .count();
    match changes {
        0 if diffs[0] > 0.0 => CriticalKind::Minimum,
        0 => CriticalKind::Maximum,
        4 => CriticalKind::Saddle,
        _ => CriticalKind::Degenerate,
    }
}

/// Brute-force oracle: the analytic critical point nearest to `p`, located
/// as the minimizer of `‖∇u‖` on a dense grid around `p`, classified by
/// [`ring_classification`].
fn oracle_classification(f: &AnalyticField, p: &Point) -> CriticalKind {
    let u = |q: &Point| f.potential(q).unwrap();
    let n = 401;
    let half = 0.2;
    let mut best = (f64::INFINITY, *p);
    for i in 0..n {
        for j in 0..n {
            let q = point2(
                p.x - half + 2.0 * half * i as f64 / (n - 1) as f64,
                p.y - half + 2.0 * half * j as f64 / (n - 1) as f64,
            );
            let g = f.field(&q).norm();
            if g < best.0 {
                best = (g, q);
            }
        }
    }
    ring_classification(u, &best.1, 0.05)
}

fn critical_points(limit_s: f64) -> Outcome {
    let start = Instant::now();
    let f = make_analytic_field("sincos").unwrap();
    let s = f.sample_scalars(f.grid(40)).unwrap();
    let cfg = FitConfig::new(Kernel::gaussian(1.0).unwrap()).with_centres(f.grid(20));
    let m = fit_mixed(&s, &cfg).unwrap();
    let guesses = default_guesses(&f.domain, Dim::Two, 5);
    let runs = trust_region_runs(&m, &guesses, &TrustRegionConfig::default()).unwrap();
    let converged: Vec<_> = runs
        .iter()
        .filter(|r| r.converged && r.gradient_norm <= 1e-12 && r.iterations <= 100)
        .collect();
    let mismatches = converged
        .iter()
        .filter(|r| oracle_classification(&f, &r.location) != r.classification)
        .count();
    let fraction = converged.len() as f64 / runs.len() as f64;
    let elapsed = start.elapsed();
    Outcome {
        pass: fraction >= 0.9 && mismatches == 0 && within(elapsed, limit_s),
        detail: format!(
            "{}/{} runs reached |grad u| <= 1e-12 within 100 iterations (>= 90%), {mismatches} classification mismatches vs dense-grid oracle, {:.2}s",
            converged.len(),
            runs.len(),
            elapsed.as_secs_f64()
        ),
    }
}

fn random_noise(len: usize, norm: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let e: DVector<f64> = DVector::from_fn(len, |_, _| StandardNormal.sample(rng));
    &e * (norm / e.norm())
}

fn stability_bounds(limit_s: f64) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    let mut ratios: Vec<f64> = Vec::new();
    let eps = 1e-8;
    for (name, n, c) in [("u3", 12, 6), ("fig8", 6, 4)] {
        let f = make_analytic_field(name).unwrap();
        let s = f.sample_vectors(f.grid(n)).unwrap();
        let dim = f.dim;
        let cfg = HHDConfig::new(Strategy::Direct, Kernel::gaussian(1.0).unwrap())
            .with_centres(f.grid(c))
            .with_epsilon(eps);
        let r = decompose_direct(&s, &cfg).unwrap();
        let gs = SystemSpec::gradient(&r.conservative, s.points(), eps).unwrap();
        let rs = SystemSpec::rotor(&r.solenoidal, s.points(), eps).unwrap();
        let vnorm = s
            .vector_values()
            .iter()
            .map(|(_, v)| v.norm_squared())
            .sum::<f64>()
            .sqrt();
        let noise = 0.1 * vnorm;
        let gb = gradient_stability_bound(&r.conservative, &gs, noise).unwrap();
        let rb = rotor_stability_bound(&r.solenoidal, &rs, noise).unwrap();
        let k = r.conservative.len();
        for _ in 0..50 {
            let e = random_noise(gs.matrix.nrows(), noise, &mut rng);
            let (da, _) = solve_least_squares_vec(&gs.matrix, &e, eps, SolverKind::Qr).unwrap();
            let dg = unstack_vectors(&(&gs.matrix * &da), dim)
                .iter()
                .map(|d| d.norm())
                .fold(0.0, f64::max);
            let (db, _) = solve_least_squares_vec(&rs.matrix, &e, eps, SolverKind::Qr).unwrap();
            let dm = VectorPotentialModel::new(
                dim,
                r.solenoidal.kernel,
                r.solenoidal.centres.clone(),
                split_blocks(&db, k),
            )
            .unwrap();
            let dr = s
                .points()
                .iter()
                .map(|p| dm.curl(p).unwrap().norm())
                .fold(0.0, f64::max);
            violations += usize::from(dg > gb) + usize::from(dr > rb);
            ratios.push(dg / gb);
            ratios.push(dr / rb);
        }
    }
    let tightest = ratios.iter().cloned().fold(0.0, f64::max);
    let elapsed = start.elapsed();
    Outcome {
        pass: violations == 0 && within(elapsed, limit_s),
        detail: format!(
            "2 models x 50 draws x (gradient, rotor): {violations} violations, largest observed/bound ratio {tightest:.2e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    }
}

fn footprint_accounting(limit_s: f64) -> Outcome {
    let start = Instant::now();
    let f = make_analytic_field("u3").unwrap();
    let grid = GridSpec::new(f.domain, vec![64, 64]).unwrap();
    let nodes = grid.nodes();
    let s = f.sample_vectors(nodes.clone()).unwrap();
    let cfg = FitConfig::new(Kernel::new(Family::Multiquadric, 1.25).unwrap())
        .with_centres(f.grid(16))
        .with_epsilon(0.0);
    let m = fit_mixed(&s, &cfg).unwrap();
    let reference: Vec<_> = nodes.iter().map(|p| f.field(p)).collect();
    let got = m.gradient_many(&nodes).unwrap();
    let eps_inf = linf_vectors(&reference, &got);
    let fp = footprint(m.len(), 1, Dim::Two, grid.len());
    let elapsed = start.elapsed();
    Outcome {
        pass: eps_inf <= 1e-4 && fp.ratio > 0.0 && within(elapsed, limit_s),
        detail: format!(
            "64^2 grid, k = {}: p = {:.4}, compression ratio {:.4}, eps_inf {eps_inf:.2e} (<= 1e-4), {:.2}s",
            fp.centres,
            fp.p,
            fp.ratio,
            elapsed.as_secs_f64()
        ),
    }
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 9] = [
        ("kernel derivatives", kernel_derivatives, 1.0),
        ("exactness identities", exactness_identities, 5.0),
        ("analytic decomposition", analytic_hhd, 60.0),
        ("mixed fit accuracy", mixed_fit, 10.0),
        ("noise robustness", noise_robustness, 60.0),
        ("centre selection ordering", centre_ordering, 120.0),
        ("critical points", critical_points, 30.0),
        ("stability bounds", stability_bounds, 60.0),
        ("footprint accounting", footprint_accounting, 30.0),
    ];
    let mut failed = Vec::new();
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let outcome = run(*limit);
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {}: {verdict} {name}: {}", i + 1, outcome.detail);
        if !outcome.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
