//! The `eigen`, `kernel`, `fit`, `sample` and `predict` commands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rmgp_core::gp::{optimize_with_evaluator, rng_for, sample_posterior_paths, FixedParameters};
use rmgp_core::mesh::{
    assemble_cotangent_stiffness, cache_read, cache_write, compute_mesh_eigensystem, load_mesh_with_options,
    mesh_eigen_to_eigensystem, write_ply_scalars, MeshOptions, MeshSpectrum, DEFAULT_TOLERANCE,
};
use rmgp_core::spectral::{circle_eigensystem, sphere_eigensystem, torus_eigensystem};
use rmgp_core::{
    fit as fit_gp, Dataset, EigenSystem, KernelEvaluator, KernelMode, ManifoldKind, ManifoldPoint, MeshEigenSystem,
    PriorSampler, Smoothness, TriangleMesh,
};

use crate::config::{ManifoldSpec, RunConfig};
use crate::io::{emit, fmt_g17, read_data, read_points, render_csv};
use crate::{CliError, Common, ModeArg};

struct MeshContext {
    mesh: TriangleMesh,
    spectrum: Arc<MeshSpectrum>,
    cache_hit: bool,
}

/// A loaded configuration with its eigensystem.
struct Session {
    cfg: RunConfig,
    es: Arc<dyn EigenSystem>,
    mesh: Option<MeshContext>,
}

impl Session {
    fn open(common: &Common) -> Result<Self, CliError> {
        let path = common
            .config
            .as_deref()
            .ok_or_else(|| CliError::input("missing --config"))?;
        let cfg = RunConfig::load(path)?;
        let (es, mesh): (Arc<dyn EigenSystem>, _) = match &cfg.manifold {
            ManifoldSpec::Circle { levels } => (Arc::new(circle_eigensystem(*levels)?), None),
            ManifoldSpec::Torus { d, max_freq } => (Arc::new(torus_eigensystem(*d, *max_freq)?), None),
            ManifoldSpec::Sphere { d, levels } => (Arc::new(sphere_eigensystem(*d, *levels)?), None),
            ManifoldSpec::Mesh { .. } => {
                let ctx = load_mesh_context(&cfg, common.force)?;
                (ctx.spectrum.clone() as Arc<dyn EigenSystem>, Some(ctx))
            }
        };
        Ok(Session { cfg, es, mesh })
    }

    fn kind(&self) -> ManifoldKind {
        self.es.kind()
    }

    fn vertex(&self) -> impl Fn(usize) -> Result<ManifoldPoint, CliError> + '_ {
        move |i| match &self.mesh {
            Some(ctx) => ctx.spectrum.vertex_point(i).map_err(CliError::from),
            None => Err(CliError::input("vertex:i points are only valid on meshes")),
        }
    }

    fn mode(&self, common: &Common) -> Result<KernelMode, CliError> {
        let arg = match (common.mode, &self.cfg.mode) {
            (Some(m), _) => m,
            (None, Some(s)) => s.parse()?,
            (None, None) => ModeArg::Spectral,
        };
        Ok(match arg {
            ModeArg::Spectral => KernelMode::SpectralSeries,
            ModeArg::Closed => match self.kind() {
                ManifoldKind::Sphere { .. } => KernelMode::SphereGegenbauer,
                _ => KernelMode::CircleClosedForm,
            },
            ModeArg::Periodic => KernelMode::TorusPeriodicSum {
                radius: self.cfg.periodic_radius,
            },
            ModeArg::Naive => KernelMode::NaiveGeodesic,
        })
    }

    fn kernel(&self, common: &Common) -> Result<KernelEvaluator, CliError> {
        Ok(KernelEvaluator::new(self.cfg.hypers()?, self.es.clone(), self.mode(common)?)?)
    }

    fn dataset(&self) -> Result<(Vec<String>, Dataset), CliError> {
        let path = self
            .cfg
            .data
            .as_deref()
            .ok_or_else(|| CliError::input("config has no \"data\" file"))?;
        let (labels, points, y) = read_data(path, &self.kind(), &self.vertex())?;
        Ok((labels, Dataset::new(points, y, self.cfg.noise_variance)?))
    }

    /// Evaluation points: `--grid`, then `eval_points`, then every mesh vertex.
    fn eval_points(&self, common: &Common) -> Result<(Vec<String>, Vec<ManifoldPoint>, bool), CliError> {
        if let Some(p) = common.grid.as_deref().or(self.cfg.eval_points.as_deref()) {
            let (l, x) = read_points(p, &self.kind(), &self.vertex())?;
            return Ok((l, x, false));
        }
        match &self.mesh {
            Some(ctx) => {
                let n = ctx.spectrum.num_vertices();
                let points = (0..n).map(|i| ctx.spectrum.vertex_point(i)).collect::<Result<Vec<_>, _>>()?;
                Ok(((0..n).map(|i| format!("vertex:{i}")).collect(), points, true))
            }
            None => Err(CliError::input("no evaluation points: pass --grid or set \"eval_points\"")),
        }
    }

    fn seed(&self, common: &Common) -> u64 {
        common.seed.unwrap_or(self.cfg.seed)
    }

    fn count(&self, common: &Common) -> usize {
        common.count.unwrap_or(self.cfg.count)
    }

    fn out<'a>(&'a self, common: &'a Common) -> Option<&'a Path> {
        common.out.as_deref().or(self.cfg.out.as_deref())
    }
}

fn default_cache_path(mesh_path: &Path) -> PathBuf {
    let mut s = mesh_path.as_os_str().to_owned();
    s.push(".eig");
    PathBuf::from(s)
}

fn load_mesh_context(cfg: &RunConfig, force: bool) -> Result<MeshContext, CliError> {
    let ManifoldSpec::Mesh {
        path,
        eigenpairs,
        cache_path,
        keep_largest_component,
        tolerance,
        ..
    } = &cfg.manifold
    else {
        unreachable!("called for mesh manifolds only");
    };
    let format = cfg.mesh_format()?.expect("mesh manifold has a format");
    let opts = MeshOptions {
        keep_largest_component: *keep_largest_component,
    };
    let mesh = load_mesh_with_options(path, format, &opts)?;
    let cache = cache_path.clone().unwrap_or_else(|| default_cache_path(path));
    let cached = if force || !cache.exists() {
        None
    } else {
        cached_system(&cache, &mesh, *eigenpairs)
    };
    let cache_hit = cached.is_some();
    let mes = match cached {
        Some(m) => m,
        None => {
            let tol = tolerance.unwrap_or(DEFAULT_TOLERANCE);
            let (mes, report) = compute_mesh_eigensystem(&mesh, *eigenpairs, tol)?;
            log::info!(
                "{} eigenpairs in {} operator applications",
                mes.num_eigenpairs(),
                report.operator_applications
            );
            cache_write(&mes, &cache)?;
            mes
        }
    };
    let spectrum = Arc::new(mesh_eigen_to_eigensystem(mes, &mesh)?);
    Ok(MeshContext {
        mesh,
        spectrum,
        cache_hit,
    })
}

/// A usable cache entry, or `None` (with a warning) when it must be rebuilt.
fn cached_system(cache: &Path, mesh: &TriangleMesh, eigenpairs: usize) -> Option<MeshEigenSystem> {
    let mes = match cache_read(cache) {
        Ok(m) => m,
        Err(e) => {
            log::warn!("ignoring unreadable cache: {e}");
            return None;
        }
    };
    if mes.num_vertices() != mesh.num_vertices() || mes.num_eigenpairs() < eigenpairs {
        log::warn!(
            "cache {} holds {} pairs on {} vertices; recomputing",
            cache.display(),
            mes.num_eigenpairs(),
            mes.num_vertices()
        );
        return None;
    }
    if mes.num_eigenpairs() == eigenpairs {
        Some(mes)
    } else {
        mes.truncated(eigenpairs).ok()
    }
}

pub fn eigen(common: &Common) -> Result<(), CliError> {
    let session = Session::open(common)?;
    let ctx = session
        .mesh
        .as_ref()
        .ok_or_else(|| CliError::input("eigen needs a mesh manifold"))?;
    let mes = ctx.spectrum.system();
    let residuals = mes.residuals(&assemble_cotangent_stiffness(&ctx.mesh)?)?;
    let mut text = String::new();
    if ctx.cache_hit {
        text.push_str("cache hit\n");
    }
    text.push_str("index,lambda,residual\n");
    for (i, (l, r)) in mes.eigenvalues().iter().zip(&residuals).enumerate() {
        let _ = writeln!(text, "{i},{},{}", fmt_g17(*l), fmt_g17(*r));
    }
    emit(&text, session.out(common))
}

pub fn kernel(common: &Common, x: Option<&str>, x2: Option<&str>) -> Result<(), CliError> {
    let session = Session::open(common)?;
    let ke = session.kernel(common)?;
    let kind = session.kind();
    let vertex = session.vertex();
    if let Some(grid) = common.grid.as_deref() {
        let (labels, points) = read_points(grid, &kind, &vertex)?;
        let gram = ke.gram_sym(&points)?;
        let columns: Vec<Vec<f64>> = (0..points.len()).map(|j| gram.column(j).iter().copied().collect()).collect();
        return emit(&render_csv(&labels, &labels, &columns), session.out(common));
    }
    let (Some(x), Some(x2)) = (x, x2) else {
        return Err(CliError::input("kernel needs two points, or --grid"));
    };
    let p = crate::io::parse_point(x, &kind, &vertex)?;
    let q = crate::io::parse_point(x2, &kind, &vertex)?;
    emit(&format!("{}\n", fmt_g17(ke.eval(&p, &q)?)), session.out(common))
}

fn fixed_parameters(names: impl IntoIterator<Item = String>) -> Result<FixedParameters, CliError> {
    let mut fixed = FixedParameters::default();
    for n in names {
        match n.as_str() {
            "sigma2" => fixed.sigma2 = true,
            "kappa" => fixed.kappa = true,
            "noise" | "noise_variance" => fixed.noise = true,
            other => {
                return Err(CliError::input(format!(
                    "cannot fix {other:?}; expected sigma2, kappa or noise_variance"
                )))
            }
        }
    }
    Ok(fixed)
}

pub fn fit(common: &Common) -> Result<(), CliError> {
    let session = Session::open(common)?;
    let fixed = fixed_parameters(session.cfg.fix.iter().chain(&common.fix).cloned())?;
    let (_, data) = session.dataset()?;
    let template = session.kernel(common)?;
    let r = optimize_with_evaluator(&template, &data, fixed, session.cfg.steps)?;
    let nu = match r.hypers.nu {
        Smoothness::Finite(v) => serde_json::json!(v),
        Smoothness::Infinite => serde_json::json!("inf"),
    };
    let doc = serde_json::json!({
        "sigma2": r.hypers.sigma2,
        "kappa": r.hypers.kappa,
        "nu": nu,
        "noise_variance": r.noise_variance,
        "log_evidence": r.log_evidence,
        "initial_log_evidence": r.initial_log_evidence,
        "iterations": r.iterations,
        "converged": r.converged,
    });
    let text = serde_json::to_string_pretty(&doc).expect("plain JSON values") + "\n";
    emit(&text, session.out(common))
}

fn sampler(cfg: &RunConfig) -> PriorSampler {
    match cfg.num_features {
        Some(num_features) => PriorSampler::RandomFeatures { num_features },
        None => PriorSampler::Deterministic,
    }
}

pub fn sample(common: &Common) -> Result<(), CliError> {
    let session = Session::open(common)?;
    let ke = session.kernel(common)?;
    if ke.mode() != KernelMode::SpectralSeries {
        return Err(CliError::input("unsupported: sampling needs --mode spectral"));
    }
    let (labels, xs, all_vertices) = session.eval_points(common)?;
    let seed = session.seed(common);
    let count = session.count(common);
    let sampler = sampler(&session.cfg);
    let columns = if common.posterior {
        let (_, data) = session.dataset()?;
        let post = fit_gp(&ke, &data)?;
        sample_posterior_paths(&post, sampler, seed, count, &xs)?
    } else {
        (0..count as u64)
            .map(|i| sampler.draw(&ke, &mut rng_for(seed, i))?.values(&xs))
            .collect::<Result<Vec<_>, _>>()?
    };
    let names: Vec<String> = (0..count).map(|i| format!("sample_{i}")).collect();
    if let Some(ply) = session.cfg.ply_out.as_deref() {
        let ctx = session
            .mesh
            .as_ref()
            .ok_or_else(|| CliError::input("\"ply_out\" needs a mesh manifold"))?;
        if !all_vertices {
            return Err(CliError::input("\"ply_out\" needs samples at every vertex (no --grid)"));
        }
        let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let col_refs: Vec<&[f64]> = columns.iter().map(Vec::as_slice).collect();
        write_ply_scalars(&ctx.mesh, ply, &name_refs, &col_refs)?;
    }
    emit(&render_csv(&labels, &names, &columns), session.out(common))
}

pub fn predict(common: &Common) -> Result<(), CliError> {
    let session = Session::open(common)?;
    let ke = session.kernel(common)?;
    let (labels, xs, _) = session.eval_points(common)?;
    let (_, data) = session.dataset()?;
    let post = fit_gp(&ke, &data)?;
    let pred = post.predict(&xs, false)?;
    if pred.clipped > 0.0 {
        log::warn!("clipped negative posterior variance of magnitude {:e}", pred.clipped);
    }
    let names = ["mean".to_string(), "variance".to_string()];
    emit(&render_csv(&labels, &names, &[pred.mean, pred.variance]), session.out(common))
}
