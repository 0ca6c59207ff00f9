//! Subcommand arguments and implementations.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use log::warn;
use nalgebra::Vector3;
use rbf_hhd::analysis::critical::default_guesses;
use rbf_hhd::analysis::metrics::{linf_relative, vector_rows, DEFAULT_THRESHOLDS};
use rbf_hhd::analysis::stability::SystemSpec;
use rbf_hhd::centres::select_centres_with;
use rbf_hhd::fit::fit_mixed_with_stats;
use rbf_hhd::geometry::grid_nodes;
use rbf_hhd::viz::{
    footprint, trace_streamlines, write_streamlines_csv, write_vtk, Direction, GridSpec, StreamlineSpec,
};
use rbf_hhd::{
    add_noise, compute_metrics, decompose, find_critical_points, gradient_stability_bound, make_analytic_field,
    residual_diagnostics, residual_report, rotor_stability_bound, select_centres, BoundingBox, CentreSelection,
    CentreStrategy, Dim, Error, FitConfig, FitMode, HHDConfig, ImportanceSource, ModelFile, Point, SampleSet,
    ScalarPotentialModel, Strategy, TrustRegionConfig,
};

use crate::io::{
    analytic_component, bbox_dim, parse_bbox, parse_points, read_models, read_points, resolution, write_file,
    write_points, Component, FieldSource,
};
use crate::settings::Settings;

/// Explicit centres from a file, or a selection of `count` centres.
#[derive(Debug, Clone, Args)]
pub struct CentreArgs {
    /// Number of centres to select (default: one centre per sample point).
    #[arg(long)]
    pub centres: Option<usize>,
    /// Centre selection strategy: importance, uniform, random, adaptive, kmeans.
    #[arg(long, default_value = "importance")]
    pub centre_strategy: CentreStrategy,
    /// CSV file of centres (header x,y[,z]); overrides --centres.
    #[arg(long, value_name = "FILE", conflicts_with = "centres")]
    pub centres_file: Option<PathBuf>,
}

impl CentreArgs {
    fn resolve(
        &self,
        settings: &Settings,
        samples: &SampleSet,
        fit: Option<&FitConfig>,
    ) -> anyhow::Result<Option<Vec<Point>>> {
        if let Some(path) = &self.centres_file {
            let (dim, pts) = read_points(path)?;
            if dim != samples.dim() {
                return Err(Error::Input(format!(
                    "centre file is {}D but the samples are {}D",
                    dim.n(),
                    samples.dim().n()
                ))
                .into());
            }
            return Ok(Some(pts));
        }
        let Some(count) = self.centres else {
            return Ok(None);
        };
        let mut sel = CentreSelection::new(self.centre_strategy, count).with_seed(settings.seed);
        if samples.vector_values().is_empty() {
            sel.importance_source = ImportanceSource::PotentialValue;
        }
        Ok(Some(select_centres_with(samples, &sel, fit)?))
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Sample CSV: x,y[,z] plus f and/or vx,vy[,vz].
    #[arg(long, short)]
    pub input: PathBuf,
    /// Model file to write.
    #[arg(long, short)]
    pub output: PathBuf,
    #[command(flatten)]
    pub centres: CentreArgs,
    /// CSV of per-sample residuals.
    #[arg(long, value_name = "FILE")]
    pub residuals: Option<PathBuf>,
    /// Scale all sample values to a unit maximum before solving (the model is scaled back).
    #[arg(long)]
    pub normalize: bool,
}

pub fn fit(settings: &Settings, a: FitArgs) -> anyhow::Result<()> {
    let samples = SampleSet::read_csv(&a.input, settings.dedup)?;
    let mut cfg = FitConfig::new(settings.kernel)
        .with_delta(settings.delta)
        .with_epsilon(settings.epsilon);
    if let Some(c) = a.centres.resolve(settings, &samples, Some(&cfg))? {
        cfg = cfg.with_centres(c);
    }
    let scale = if a.normalize { value_scale(&samples) } else { 1.0 };
    let (model, stats) = if scale != 1.0 {
        let scaled = scale_samples(&samples, 1.0 / scale)?;
        let (mut m, stats) = fit_mixed_with_stats(&scaled, &cfg).context("fitting the potential")?;
        m.coefficients.iter_mut().for_each(|c| *c *= scale);
        (m, stats)
    } else {
        fit_mixed_with_stats(&samples, &cfg).context("fitting the potential")?
    };
    let report = residual_report(&model, &samples, settings.delta)?;
    let file = ModelFile::Scalar(model);
    file.write(&a.output)?;
    if let Some(path) = &a.residuals {
        write_file(path, |w| {
            writeln!(w, "{}", settings.header("fit"))?;
            report.write_csv_to(w)
        })?;
    }
    println!("{}", settings.header("fit"));
    println!("samples\t{}", samples.len());
    println!("centres\t{}", file.centre_count());
    println!("value_scale\t{scale:e}");
    println!("solver\t{}", stats.method);
    println!("condition_estimate\t{:.3e}", stats.condition_estimate);
    println!("energy\t{:.6e}", report.energy);
    println!("relative_residual\t{:.6e}", report.relative(&samples));
    println!("model\t{}", a.output.display());
    Ok(())
}

/// Largest absolute scalar value or vector norm.
fn value_scale(samples: &SampleSet) -> f64 {
    let m = samples
        .scalar_values()
        .iter()
        .map(|(_, f)| f.abs())
        .chain(samples.vector_values().iter().map(|(_, v)| v.norm()))
        .fold(0.0, f64::max);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

fn scale_samples(samples: &SampleSet, s: f64) -> rbf_hhd::Result<SampleSet> {
    SampleSet::new(
        samples.dim(),
        samples.points().to_vec(),
        samples.scalar_values().iter().map(|&(i, f)| (i, f * s)).collect(),
        samples.vector_values().iter().map(|&(i, v)| (i, v * s)).collect(),
    )
}

#[derive(Debug, Args)]
pub struct HhdArgs {
    /// Vector sample CSV: x,y[,z],vx,vy[,vz].
    #[arg(long, short)]
    pub input: PathBuf,
    /// direct, weighted or laplace.
    #[arg(long, default_value = "direct")]
    pub strategy: Strategy,
    /// independent or sequential.
    #[arg(long, default_value = "independent")]
    pub fit_mode: FitMode,
    /// Midpoint cells per axis for the weighted strategy.
    #[arg(long, default_value_t = 32)]
    pub quadrature: usize,
    #[command(flatten)]
    pub centres: CentreArgs,
    /// Directory for u-model.json, w-model.json, harmonic.csv and diagnostics.json.
    #[arg(long, short)]
    pub output_dir: PathBuf,
}

pub fn hhd(settings: &Settings, a: HhdArgs) -> anyhow::Result<()> {
    let samples = SampleSet::read_csv(&a.input, settings.dedup)?;
    let mut cfg = HHDConfig::new(a.strategy, settings.kernel)
        .with_epsilon(settings.epsilon)
        .with_fit_mode(a.fit_mode)
        .with_quadrature(a.quadrature);
    if let Some(c) = a.centres.resolve(settings, &samples, None)? {
        cfg = cfg.with_centres(c);
    }
    let result = decompose(&samples, &cfg).context("decomposing the field")?;
    let checks = residual_diagnostics(&result, &samples)?;

    let dir = &a.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    ModelFile::Scalar(result.conservative.clone()).write(&dir.join("u-model.json"))?;
    ModelFile::Vector(result.solenoidal.clone()).write(&dir.join("w-model.json"))?;
    let dim = samples.dim();
    let n = dim.n();
    write_file(&dir.join("harmonic.csv"), |w| {
        writeln!(w, "{}", settings.header("hhd"))?;
        let axes = ["x", "y", "z"];
        let hs = ["hx", "hy", "hz"];
        writeln!(w, "{},{}", axes[..n].join(","), hs[..n].join(","))?;
        for (p, h) in samples.points().iter().zip(&result.harmonic_samples) {
            let row: Vec<String> = (0..n)
                .map(|k| format!("{:.17e}", p[k]))
                .chain((0..n).map(|k| format!("{:.17e}", h[k])))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })?;
    let diagnostics = serde_json::json!({
        "seed": settings.seed,
        "kernel": settings.kernel,
        "epsilon": settings.epsilon,
        "solve": result.diagnostics,
        "checks": checks,
    });
    write_file(&dir.join("diagnostics.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &diagnostics)?;
        writeln!(w)
    })?;

    println!("{}", settings.header("hhd"));
    println!("strategy\t{}", a.strategy);
    println!("samples\t{}", samples.len());
    println!("centres\t{}", result.diagnostics.centres);
    println!("max_divergence_of_curl\t{:.3e}", checks.max_divergence_of_curl);
    println!("max_curl_of_gradient\t{:.3e}", checks.max_curl_of_gradient);
    println!("harmonic_max\t{:.6e}", checks.harmonic_max);
    println!("harmonic_rms\t{:.6e}", checks.harmonic_rms);
    let [fu, fw, fh] = checks.energy_fractions;
    println!("energy_fractions\t{fu:.6}\t{fw:.6}\t{fh:.6}");
    println!("output\t{}", dir.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImportanceArg {
    /// Norm of the vector samples.
    Field,
    /// Magnitude of the scalar samples.
    Potential,
}

#[derive(Debug, Args)]
pub struct CentresArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    /// importance, uniform, random, adaptive or kmeans.
    #[arg(long, default_value = "importance")]
    pub strategy: CentreStrategy,
    #[arg(long, short = 'k')]
    pub count: usize,
    /// Importance source (default: field when vectors are present).
    #[arg(long, value_enum)]
    pub importance: Option<ImportanceArg>,
    /// Upper bound on the adaptive centre count.
    #[arg(long)]
    pub max_count: Option<usize>,
    /// Relative residual at which the adaptive strategy stops.
    #[arg(long)]
    pub residual_threshold: Option<f64>,
    #[arg(long, short)]
    pub output: PathBuf,
}

pub fn centres(settings: &Settings, a: CentresArgs) -> anyhow::Result<()> {
    let samples = SampleSet::read_csv(&a.input, settings.dedup)?;
    let mut sel = CentreSelection::new(a.strategy, a.count).with_seed(settings.seed);
    sel.importance_source = match a.importance {
        Some(ImportanceArg::Field) => ImportanceSource::FieldMagnitude,
        Some(ImportanceArg::Potential) => ImportanceSource::PotentialValue,
        None if samples.vector_values().is_empty() => ImportanceSource::PotentialValue,
        None => ImportanceSource::FieldMagnitude,
    };
    if let Some(m) = a.max_count {
        sel.max_count = m;
    }
    if let Some(t) = a.residual_threshold {
        sel.residual_threshold = t;
    }
    let fit = FitConfig::new(settings.kernel)
        .with_delta(settings.delta)
        .with_epsilon(settings.epsilon);
    let chosen = if a.strategy == CentreStrategy::AdaptiveResidual && settings_kernel_is_default(settings) {
        select_centres(&samples, &sel)?
    } else {
        select_centres_with(&samples, &sel, Some(&fit))?
    };
    write_file(&a.output, |w| {
        writeln!(w, "{}", settings.header("centres"))?;
        write_points(w, &chosen, samples.dim())
    })?;
    println!("{}", settings.header("centres"));
    println!("strategy\t{}", a.strategy);
    println!("centres\t{}", chosen.len());
    println!("output\t{}", a.output.display());
    Ok(())
}

/// The adaptive strategy picks its own multiquadric kernel unless a kernel
/// was configured explicitly.
fn settings_kernel_is_default(settings: &Settings) -> bool {
    settings.kernel == rbf_hhd::Kernel::gaussian(1.0).expect("valid kernel")
}

#[derive(Debug, Args)]
pub struct EvalGridArgs {
    /// Model file(s); fields of several models are summed.
    #[arg(long = "model", short, required = true)]
    pub models: Vec<PathBuf>,
    /// Nodes per axis: one value, or one per axis separated by commas.
    #[arg(long, value_delimiter = ',', default_value = "32")]
    pub resolution: Vec<usize>,
    /// xmin,ymin[,zmin],xmax,ymax[,zmax] (default: the analytic domain or the centre box).
    #[arg(long, allow_hyphen_values = true, value_parser = parse_bbox)]
    pub bbox: Option<BoundingBox>,
    /// CSV of node values.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Legacy ASCII VTK file.
    #[arg(long, value_name = "FILE")]
    pub vtk: Option<PathBuf>,
    /// Built-in analytic field to compare against.
    #[arg(long)]
    pub field: Option<String>,
    /// Part of the analytic field the model sum approximates.
    #[arg(long, value_enum, default_value = "full")]
    pub component: Component,
}

struct GridColumns {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

pub fn eval_grid(settings: &Settings, a: EvalGridArgs) -> anyhow::Result<()> {
    let models = read_models(&a.models)?;
    let analytic = a.field.as_deref().map(make_analytic_field).transpose()?;
    let dim = models[0].dim();
    if let Some(f) = &analytic {
        if f.dim != dim {
            return Err(Error::Input(format!(
                "field `{}` is {}D, the models are {}D",
                f.name,
                f.dim.n(),
                dim.n()
            ))
            .into());
        }
    }
    let bbox = match (&a.bbox, &analytic) {
        (Some(b), _) => *b,
        (None, Some(f)) => f.domain,
        (None, None) => crate::io::centres_bbox(&models)?,
    };
    if a.bbox.is_some() && bbox_dim(&bbox) != dim {
        return Err(Error::Input(format!("bounding box is not {}D", dim.n())).into());
    }
    let grid = GridSpec::new(bbox, resolution(&a.resolution, dim)?)?;
    let nodes = grid.nodes();
    let n = dim.n();
    let axes = ["x", "y", "z"];

    let mut cols = GridColumns {
        names: Vec::new(),
        columns: Vec::new(),
    };
    let mut total = vec![Vector3::zeros(); nodes.len()];
    let mut vtk_scalars: Vec<(String, Vec<f64>)> = Vec::new();
    let mut vtk_vectors: Vec<(String, Vec<Vector3<f64>>)> = Vec::new();
    let mut potentials: Vec<Vec<f64>> = Vec::new();
    for (i, m) in models.iter().enumerate() {
        let tag = if models.len() == 1 {
            String::new()
        } else {
            format!("{i}_")
        };
        match m {
            ModelFile::Scalar(s) => {
                let u = s.eval_many(&nodes)?;
                let g = s.gradient_many(&nodes)?;
                cols.push(format!("{tag}u"), u.clone());
                for k in 0..n {
                    cols.push(format!("{tag}grad_{}", axes[k]), g.iter().map(|v| v[k]).collect());
                }
                total.iter_mut().zip(&g).for_each(|(t, v)| *t += v);
                vtk_scalars.push((format!("{tag}u"), u.clone()));
                vtk_vectors.push((format!("{tag}grad"), g));
                potentials.push(u);
            }
            ModelFile::Vector(vm) => {
                let c = vm.curl_many(&nodes)?;
                let w: Vec<Vector3<f64>> = nodes.iter().map(|p| vm.potential(p)).collect::<rbf_hhd::Result<_>>()?;
                if dim == Dim::Two {
                    cols.push(format!("{tag}psi"), w.iter().map(|v| v.z).collect());
                } else {
                    for k in 0..3 {
                        cols.push(format!("{tag}w_{}", axes[k]), w.iter().map(|v| v[k]).collect());
                    }
                }
                for k in 0..n {
                    cols.push(format!("{tag}curl_{}", axes[k]), c.iter().map(|v| v[k]).collect());
                }
                total.iter_mut().zip(&c).for_each(|(t, v)| *t += v);
                vtk_vectors.push((format!("{tag}curl"), c));
            }
        }
    }
    if models.len() > 1 {
        for k in 0..n {
            cols.push(format!("sum_{}", axes[k]), total.iter().map(|v| v[k]).collect());
        }
        vtk_vectors.push(("sum".into(), total.clone()));
    }

    println!("{}", settings.header("eval-grid"));
    println!("grid_nodes\t{}", grid.len());
    for (i, m) in models.iter().enumerate() {
        let blocks = match m {
            ModelFile::Scalar(_) => 1,
            ModelFile::Vector(v) => v.coefficients.len(),
        };
        let fp = footprint(m.centre_count(), blocks, dim, grid.len());
        println!(
            "footprint[{i}]\tcentres={}\tmodel_numbers={}\tgrid_numbers={}\tratio={:.6}\tp={:.6}",
            fp.centres, fp.model_numbers, fp.grid_numbers, fp.ratio, fp.p
        );
    }

    if let Some(f) = &analytic {
        let reference: Vec<Vector3<f64>> = nodes.iter().map(|p| analytic_component(f, a.component, p)).collect();
        let report = compute_metrics(
            &vector_rows(&reference, dim),
            &vector_rows(&total, dim),
            &DEFAULT_THRESHOLDS,
        )?;
        println!("linf_field\t{:.6e}", report.linf);
        println!("nrmse_field\t{:.6e}", report.nrmse);
        if let ([u], Some(pot), Component::Full | Component::Conservative) =
            (potentials.as_slice(), f.potential_u, a.component)
        {
            let exact: Vec<f64> = nodes.iter().map(pot).collect();
            println!("linf_potential\t{:.6e}", linf_relative(&exact, u));
            // Gradient-only fits fix u up to a constant.
            let offset = exact.iter().zip(u).map(|(e, v)| e - v).sum::<f64>() / exact.len() as f64;
            let shifted: Vec<f64> = u.iter().map(|v| v + offset).collect();
            println!("linf_potential_offset_removed\t{:.6e}", linf_relative(&exact, &shifted));
        }
    }

    if let Some(path) = &a.output {
        write_file(path, |w| {
            writeln!(w, "{}", settings.header("eval-grid"))?;
            let mut header: Vec<String> = axes[..n].iter().map(|s| s.to_string()).collect();
            header.extend(cols.names.iter().cloned());
            writeln!(w, "{}", header.join(","))?;
            for (j, p) in nodes.iter().enumerate() {
                let row: Vec<String> = (0..n)
                    .map(|k| format!("{:.17e}", p[k]))
                    .chain(cols.columns.iter().map(|c| format!("{:.17e}", c[j])))
                    .collect();
                writeln!(w, "{}", row.join(","))?;
            }
            Ok(())
        })?;
        println!("output\t{}", path.display());
    }
    if let Some(path) = &a.vtk {
        let scalars: Vec<(&str, &[f64])> = vtk_scalars.iter().map(|(n, d)| (n.as_str(), d.as_slice())).collect();
        let vectors: Vec<(&str, &[Vector3<f64>])> =
            vtk_vectors.iter().map(|(n, d)| (n.as_str(), d.as_slice())).collect();
        let mut w = crate::io::create(path)?;
        write_vtk(
            &mut w,
            &grid,
            &format!("rbf-hhd eval-grid seed={}", settings.seed),
            &scalars,
            &vectors,
        )?;
        w.flush().map_err(|e| Error::io(path, e))?;
        println!("vtk\t{}", path.display());
    }
    Ok(())
}

impl GridColumns {
    fn push(&mut self, name: String, values: Vec<f64>) {
        self.names.push(name);
        self.columns.push(values);
    }
}

#[derive(Debug, Args)]
pub struct StreamlinesArgs {
    /// Model file(s) whose summed field is traced.
    #[arg(long = "model", short, conflicts_with = "field")]
    pub models: Vec<PathBuf>,
    /// Built-in analytic field to trace instead of a model.
    #[arg(long)]
    pub field: Option<String>,
    #[arg(long, value_enum, default_value = "full")]
    pub component: Component,
    /// Seed points `x,y[,z];x,y[,z];...`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_seeds)]
    pub seeds: Option<SeedList>,
    /// Seeds on a regular grid with this many nodes per axis (used without --seeds).
    #[arg(long, default_value_t = 4)]
    pub seed_grid: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub step: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_steps: usize,
    /// forward, backward or both.
    #[arg(long, default_value = "forward")]
    pub direction: Direction,
    /// Integration box (default: the analytic domain or the centre box).
    #[arg(long, allow_hyphen_values = true, value_parser = parse_bbox)]
    pub bbox: Option<BoundingBox>,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Clone)]
pub struct SeedList(Vec<Point>);

fn parse_seeds(text: &str) -> Result<SeedList, String> {
    parse_points(text).map(SeedList)
}

pub fn streamlines(settings: &Settings, a: StreamlinesArgs) -> anyhow::Result<()> {
    let source = match (&a.field, a.models.is_empty()) {
        (Some(name), _) => FieldSource::Analytic(make_analytic_field(name)?, a.component),
        (None, false) => FieldSource::Models(read_models(&a.models)?),
        (None, true) => return Err(Error::Input("give --model or --field".into()).into()),
    };
    let dim = source.dim()?;
    let bbox = match a.bbox {
        Some(b) => b,
        None => source.default_bbox()?,
    };
    let seeds = match a.seeds {
        Some(SeedList(s)) => s,
        None => interior_grid(&bbox, dim, a.seed_grid),
    };
    let spec = StreamlineSpec {
        seed_points: seeds,
        step_size: a.step,
        max_steps: a.max_steps,
        direction: a.direction,
    };
    let lines = trace_streamlines(&|p: &Point| source.eval(p), &spec, &bbox)?;
    let skipped = lines.iter().filter(|l| l.is_empty()).count();
    if skipped > 0 {
        warn!("{skipped} seed(s) outside the integration box produced empty streamlines");
    }
    write_file(&a.output, |w| {
        writeln!(w, "{}", settings.header("streamlines"))?;
        write_streamlines_csv(w, &lines, dim)
    })?;
    println!("{}", settings.header("streamlines"));
    println!("streamlines\t{}", lines.len());
    println!("empty\t{skipped}");
    println!("points\t{}", lines.iter().map(Vec::len).sum::<usize>());
    println!("output\t{}", a.output.display());
    Ok(())
}

/// `per_axis` nodes per axis, placed at cell centres so none lies on the
/// boundary.
fn interior_grid(bbox: &BoundingBox, dim: Dim, per_axis: usize) -> Vec<Point> {
    let per_axis = per_axis.max(1);
    let half = bbox.extent() / (2.0 * per_axis as f64);
    let inner = BoundingBox::new(bbox.min + half, bbox.max - half);
    if per_axis == 1 {
        return vec![(bbox.min + bbox.max) / 2.0];
    }
    grid_nodes(&inner, dim, &[per_axis; 3])
}

#[derive(Debug, Args)]
pub struct CriticalArgs {
    /// Scalar model file.
    #[arg(long, short)]
    pub model: PathBuf,
    /// Initial guesses per axis on a regular grid.
    #[arg(long, default_value_t = 5)]
    pub guesses: usize,
    /// Box of the initial guesses (default: the centre box).
    #[arg(long, allow_hyphen_values = true, value_parser = parse_bbox)]
    pub bbox: Option<BoundingBox>,
    /// Convergence tolerance on the gradient norm.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Also list the runs that did not converge.
    #[arg(long)]
    pub all: bool,
    /// CSV of the critical points.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

pub fn critical_points(settings: &Settings, a: CriticalArgs) -> anyhow::Result<()> {
    let model = scalar_model(&a.model)?;
    let bbox = match a.bbox {
        Some(b) => b,
        None => BoundingBox::of_points(&model.centres)?,
    };
    let cfg = TrustRegionConfig {
        tol: a.tol,
        max_iter: a.max_iter,
        ..TrustRegionConfig::default()
    };
    let guesses = default_guesses(&bbox, model.dim, a.guesses);
    let mut found = find_critical_points(&model, &guesses, &cfg)?;
    let unconverged = found.iter().filter(|c| !c.converged).count();
    if !a.all {
        found.retain(|c| c.converged);
    }
    let n = model.dim.n();
    let axes = ["x", "y", "z"];
    let lam = ["lambda1", "lambda2", "lambda3"];
    let mut text = Vec::new();
    writeln!(text, "{}", settings.header("critical-points"))?;
    writeln!(
        text,
        "{},kind,gradient_norm,{},iterations,converged",
        axes[..n].join(","),
        lam[..n].join(",")
    )?;
    for c in &found {
        let row: Vec<String> = (0..n)
            .map(|k| format!("{:.17e}", c.location[k]))
            .chain(std::iter::once(format!("{:?}", c.classification).to_lowercase()))
            .chain(std::iter::once(format!("{:.3e}", c.gradient_norm)))
            .chain((0..n).map(|k| c.eigenvalues.get(k).map_or("nan".into(), |v| format!("{v:.17e}"))))
            .chain([c.iterations.to_string(), c.converged.to_string()])
            .collect();
        writeln!(text, "{}", row.join(","))?;
    }
    let text = String::from_utf8(text).expect("utf-8 report");
    match &a.output {
        Some(path) => {
            write_file(path, |w| w.write_all(text.as_bytes()))?;
            println!("{}", settings.header("critical-points"));
            println!("critical_points\t{}", found.len());
            println!("unconverged_runs\t{unconverged}");
            println!("output\t{}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn scalar_model(path: &Path) -> anyhow::Result<ScalarPotentialModel> {
    match ModelFile::read(path)? {
        ModelFile::Scalar(m) => Ok(m),
        ModelFile::Vector(_) => Err(Error::Input(format!(
            "{} holds a vector potential; a scalar model is needed",
            path.display()
        ))
        .into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    /// Vectors where both files have them at every point, else scalars.
    Auto,
    Vector,
    Scalar,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long, short)]
    pub reference: PathBuf,
    #[arg(long, short)]
    pub candidate: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    pub quantity: Quantity,
    /// Error thresholds for the P_k fractions.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_THRESHOLDS)]
    pub thresholds: Vec<f64>,
    /// Also write the report as JSON.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

pub fn metrics(settings: &Settings, a: MetricsArgs) -> anyhow::Result<()> {
    let reference = SampleSet::read_csv(&a.reference, settings.dedup)?;
    let candidate = SampleSet::read_csv(&a.candidate, settings.dedup)?;
    if reference.len() != candidate.len() || reference.dim() != candidate.dim() {
        return Err(Error::Input(format!(
            "reference has {} {}D points, candidate {} {}D points",
            reference.len(),
            reference.dim().n(),
            candidate.len(),
            candidate.dim().n()
        ))
        .into());
    }
    let moved = reference
        .points()
        .iter()
        .zip(candidate.points())
        .filter(|(p, q)| (*p - *q).norm() > 1e-9 * (1.0 + p.norm()))
        .count();
    if moved > 0 {
        warn!("{moved} point(s) differ between the files; rows are compared by position");
    }
    let full_vectors = |s: &SampleSet| s.vector_values().len() == s.len();
    let use_vectors = match a.quantity {
        Quantity::Vector => true,
        Quantity::Scalar => false,
        Quantity::Auto => full_vectors(&reference) && full_vectors(&candidate),
    };
    let dim = reference.dim();
    let (r, c) = if use_vectors {
        let rows = |s: &SampleSet| -> anyhow::Result<Vec<Vec<f64>>> {
            if !full_vectors(s) {
                return Err(Error::Input("vector comparison needs a vector at every point".into()).into());
            }
            let v: Vec<Vector3<f64>> = s.vector_values().iter().map(|(_, v)| *v).collect();
            Ok(vector_rows(&v, dim))
        };
        (rows(&reference)?, rows(&candidate)?)
    } else {
        let rs = reference.scalar_values();
        let cs = candidate.scalar_values();
        if rs.len() != cs.len() || rs.iter().zip(cs).any(|(x, y)| x.0 != y.0) {
            return Err(Error::Input("scalar values are not given at the same rows".into()).into());
        }
        (
            rs.iter().map(|(_, f)| vec![*f]).collect(),
            cs.iter().map(|(_, f)| vec![*f]).collect(),
        )
    };
    let report = compute_metrics(&r, &c, &a.thresholds)?;
    println!("{}", settings.header("metrics"));
    println!("{}", report.header());
    println!("{report}");
    if let Some(path) = &a.json {
        write_file(path, |w| {
            serde_json::to_writer_pretty(&mut *w, &report)?;
            writeln!(w)
        })?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    /// Standard deviation relative to the RMS of each component.
    #[arg(long)]
    pub level: f64,
    #[arg(long, short)]
    pub output: PathBuf,
}

pub fn noise(settings: &Settings, a: NoiseArgs) -> anyhow::Result<()> {
    let samples = SampleSet::read_csv(&a.input, settings.dedup)?;
    let noisy = add_noise(&samples, a.level, settings.seed)?;
    write_file(&a.output, |w| {
        writeln!(w, "{} level={}", settings.header("noise"), a.level)?;
        noisy.write_csv_to(w)
    })?;
    println!("{}", settings.header("noise"));
    println!("level\t{}", a.level);
    println!("output\t{}", a.output.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Model file (scalar: gradient bound; vector: rotor bound).
    #[arg(long, short)]
    pub model: PathBuf,
    /// Samples the model was fitted to; their vector points define the system.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Euclidean norm of the stacked noise vector.
    #[arg(long, conflicts_with = "noise_level")]
    pub noise_norm: Option<f64>,
    /// Noise norm as a fraction of the stacked input vector norm.
    #[arg(long)]
    pub noise_level: Option<f64>,
}

pub fn bound(settings: &Settings, a: BoundArgs) -> anyhow::Result<()> {
    let samples = SampleSet::read_csv(&a.input, settings.dedup)?;
    let (points, vectors) = samples.vector_points();
    if points.is_empty() {
        return Err(Error::Input("the bound needs vector samples".into()).into());
    }
    let noise_norm = match (a.noise_norm, a.noise_level) {
        (Some(n), _) => n,
        (None, Some(l)) => l * vectors.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt(),
        (None, None) => return Err(Error::Input("give --noise-norm or --noise-level".into()).into()),
    };
    let (kind, value) = match ModelFile::read(&a.model)? {
        ModelFile::Scalar(m) => {
            let sys = SystemSpec::gradient(&m, &points, settings.epsilon)?;
            ("gradient", gradient_stability_bound(&m, &sys, noise_norm)?)
        }
        ModelFile::Vector(m) => {
            let sys = SystemSpec::rotor(&m, &points, settings.epsilon)?;
            ("rotor", rotor_stability_bound(&m, &sys, noise_norm)?)
        }
    };
    println!("{}", settings.header("bound"));
    println!("system\t{kind}");
    println!("noise_norm\t{noise_norm:.6e}");
    println!("bound\t{value:.6e}");
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleKind {
    /// Field vectors only.
    Vector,
    /// Potential values only.
    Scalar,
    /// Potential values and field vectors.
    Mixed,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// u1, u2, u3, paraboloid, fig8, fig8-conservative, sincos, bump, rotation, zero.
    #[arg(long)]
    pub field: String,
    /// Grid nodes per axis over the field domain.
    #[arg(long, default_value_t = 16)]
    pub grid: usize,
    #[arg(long, value_enum, default_value = "vector")]
    pub kind: SampleKind,
    #[arg(long, value_enum, default_value = "full")]
    pub component: Component,
    #[arg(long, short)]
    pub output: PathBuf,
}

pub fn sample(settings: &Settings, a: SampleArgs) -> anyhow::Result<()> {
    let f = make_analytic_field(&a.field)?;
    if a.grid < 2 {
        return Err(Error::Config(format!("grid needs at least 2 nodes per axis, got {}", a.grid)).into());
    }
    let points = f.grid(a.grid);
    let scalars = match a.kind {
        SampleKind::Vector => Vec::new(),
        SampleKind::Scalar | SampleKind::Mixed => {
            let u = f
                .potential_u
                .ok_or_else(|| Error::Input(format!("field `{}` has no scalar potential", f.name)))?;
            points.iter().enumerate().map(|(i, p)| (i, u(p))).collect()
        }
    };
    let vectors = match a.kind {
        SampleKind::Scalar => Vec::new(),
        SampleKind::Vector | SampleKind::Mixed => points
            .iter()
            .enumerate()
            .map(|(i, p)| (i, analytic_component(&f, a.component, p)))
            .collect(),
    };
    let samples = SampleSet::new(f.dim, points, scalars, vectors)?;
    write_file(&a.output, |w| {
        writeln!(w, "{} field={}", settings.header("sample"), f.name)?;
        samples.write_csv_to(w)
    })?;
    println!("{}", settings.header("sample"));
    println!("field\t{}", f.name);
    println!("samples\t{}", samples.len());
    println!("output\t{}", a.output.display());
    Ok(())
}
