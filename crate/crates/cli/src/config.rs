use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer};
use serde::Deserialize;

use rmgp_core::mesh::MeshFormat;
use rmgp_core::{Hyperparameters, Smoothness};

use crate::CliError;

/// A run configuration: one JSON document, unknown keys rejected.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifold: ManifoldSpec,
    #[serde(default)]
    pub hyperparameters: Option<HyperSpec>,
    #[serde(default)]
    pub noise_variance: f64,
    /// Training CSV (`point,y`).
    #[serde(default)]
    pub data: Option<PathBuf>,
    /// Evaluation points, one per line under a `point` header.
    #[serde(default)]
    pub eval_points: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default = "default_radius")]
    pub periodic_radius: usize,
    /// Random-feature count for prior paths; deterministic features when absent.
    #[serde(default)]
    pub num_features: Option<usize>,
    #[serde(default)]
    pub fix: Vec<String>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// ASCII PLY export of sample fields (mesh only).
    #[serde(default)]
    pub ply_out: Option<PathBuf>,
}

fn default_steps() -> usize {
    1000
}

fn default_count() -> usize {
    1
}

fn default_radius() -> usize {
    10
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ManifoldSpec {
    Circle {
        levels: usize,
    },
    Torus {
        d: usize,
        max_freq: usize,
    },
    Sphere {
        d: usize,
        levels: usize,
    },
    Mesh {
        path: PathBuf,
        #[serde(default)]
        format: Option<String>,
        eigenpairs: usize,
        #[serde(default)]
        cache_path: Option<PathBuf>,
        #[serde(default)]
        keep_largest_component: bool,
        #[serde(default)]
        tolerance: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSpec {
    pub sigma2: f64,
    pub kappa: f64,
    #[serde(deserialize_with = "nu_value")]
    pub nu: Smoothness,
}

fn nu_value<'de, D: Deserializer<'de>>(d: D) -> Result<Smoothness, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(Smoothness::Finite(v)),
        Raw::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "Inf") => Ok(Smoothness::Infinite),
        Raw::Text(s) => Err(de::Error::custom(format!("nu must be a number or \"inf\", got {s:?}"))),
    }
}

impl HyperSpec {
    pub fn build(&self) -> Result<Hyperparameters, CliError> {
        Hyperparameters::new(self.sigma2, self.kappa, self.nu).map_err(CliError::from)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.data, &mut self.eval_points, &mut self.out, &mut self.ply_out]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        if let ManifoldSpec::Mesh { path, cache_path, .. } = &mut self.manifold {
            fix(path);
            if let Some(c) = cache_path {
                fix(c);
            }
        }
    }

    pub fn hypers(&self) -> Result<Hyperparameters, CliError> {
        self.hyperparameters
            .as_ref()
            .ok_or_else(|| CliError::input("config has no hyperparameters"))?
            .build()
    }

    pub fn mesh_format(&self) -> Result<Option<MeshFormat>, CliError> {
        match &self.manifold {
            ManifoldSpec::Mesh { path, format, .. } => match format {
                Some(f) => f.parse().map(Some).map_err(CliError::from),
                None => MeshFormat::from_path(path).map(Some).ok_or_else(|| {
                    CliError::input(format!("cannot infer mesh format of {}; set \"format\"", path.display()))
                }),
            },
            _ => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_manifolds_and_nu_forms() {
        let c: RunConfig = serde_json::from_str(
            r#"{"manifold": {"circle": {"levels": 64}}, "hyperparameters": {"sigma2": 1, "kappa": 0.5, "nu": "inf"}}"#,
        )
        .unwrap();
        assert_eq!(c.hypers().unwrap().nu, Smoothness::Infinite);
        assert_eq!(c.steps, 1000);
        let c: RunConfig = serde_json::from_str(
            r#"{"manifold": {"mesh": {"path": "a.off", "eigenpairs": 10}}, "hyperparameters": {"sigma2": 1, "kappa": 0.5, "nu": 1.5}}"#,
        )
        .unwrap();
        assert_eq!(c.mesh_format().unwrap(), Some(MeshFormat::Off));
        for bad in [
            r#"{"manifold": {"circle": {"levels": 64}}, "hyperparams": {}}"#,
            r#"{"manifold": {"circle": {"levels": 64, "extra": 1}}}"#,
            r#"{"manifold": {"circle": {"levels": 64}}, "hyperparameters": {"sigma2": 1, "kappa": 0.5, "nu": "big"}}"#,
            r#"{"manifold": {"circle": {"levels": 4}, "sphere": {"d": 2, "levels": 3}}}"#,
        ] {
            assert!(serde_json::from_str::<RunConfig>(bad).is_err(), "{bad}");
        }
    }
}
