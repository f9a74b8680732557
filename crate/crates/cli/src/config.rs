//! Run configuration: a TOML file plus flag overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use moyal_harmonic::action::{FieldConfig, ModelParams};
use moyal_harmonic::feynman::FeynmanGraph;
use moyal_harmonic::propagator::CutoffSpec;
use moyal_harmonic::sampling::{halton_points, random_adapted_sigma, random_metric};
use moyal_harmonic::symplectic::{standard_structures, Metric, SymplecticStructure};
use moyal_harmonic::Error;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Problems that make a configuration unusable.
#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    Parse(String),
    Invalid(String),
    Model(Error),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            Self::Parse(m) => write!(f, "malformed config: {m}"),
            Self::Invalid(m) => write!(f, "invalid config: {m}"),
            Self::Model(e) => write!(f, "invalid model: {e}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        Self::Model(e)
    }
}

/// A matrix given inline, or a generator token.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Rows(Vec<Vec<f64>>),
    Token(String),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub c: Option<f64>,
    pub a: Option<Vec<Vec<f64>>>,
    pub b: Option<Vec<f64>>,
}

/// The file format, every key optional except `dimension`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub dimension: usize,
    pub theta: Option<f64>,
    pub omega: Option<f64>,
    pub mass2: Option<f64>,
    pub lambda: Option<f64>,
    pub metric: Option<MatrixSpec>,
    pub sigma: Option<MatrixSpec>,
    pub epsilon: Option<f64>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub draws: Option<usize>,
    pub graph: Option<PathBuf>,
    pub externals: Option<Vec<Vec<f64>>>,
    pub field: Option<FieldSpec>,
}

/// Values given on the command line; each one wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub theta: Option<f64>,
    pub omega: Option<f64>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ModelParams,
    pub epsilon: f64,
    pub tol: f64,
    pub seed: u64,
    pub draws: usize,
    pub graph: Option<(FeynmanGraph, Option<Vec<DVector<f64>>>)>,
    pub externals: Option<Vec<DVector<f64>>>,
    pub field: FieldConfig,
    digest: String,
}

#[derive(Serialize)]
struct DigestInput<'a> {
    dimension: usize,
    theta: f64,
    omega: f64,
    mass2: f64,
    lambda: f64,
    metric: Vec<f64>,
    sigma: Vec<f64>,
    epsilon: f64,
    tol: f64,
    seed: u64,
    draws: usize,
    graph: Option<String>,
    externals: Option<Vec<Vec<f64>>>,
    field: (&'a str, Vec<f64>),
}

fn matrix(rows: &[Vec<f64>], d: usize, what: &str) -> Result<DMatrix<f64>, ConfigError> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(ConfigError::Invalid(format!("{what} must be {d}×{d}")));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn vector(v: &[f64], d: usize, what: &str) -> Result<DVector<f64>, ConfigError> {
    if v.len() != d {
        return Err(ConfigError::Invalid(format!("{what} must have {d} entries")));
    }
    Ok(DVector::from_column_slice(v))
}

fn token_seed(token: &str, prefix: &str) -> Option<u64> {
    token.strip_prefix(prefix)?.parse().ok()
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect()
}

impl RunConfig {
    /// Reads and validates `path`; relative graph paths resolve against the
    /// directory of the config file.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_owned(), e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base, overrides)
    }

    pub fn from_toml(text: &str, base: &Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_raw(raw, base, overrides)
    }

    pub fn from_raw(raw: RawConfig, base: &Path, o: &Overrides) -> Result<Self, ConfigError> {
        let d = raw.dimension;
        if d == 0 || d % 2 != 0 {
            return Err(ConfigError::Invalid(format!("dimension must be even and positive, got {d}")));
        }
        let theta = o.theta.or(raw.theta).unwrap_or(1.0);
        let omega = o.omega.or(raw.omega).unwrap_or(0.5);
        let mass2 = raw.mass2.unwrap_or(1.0);
        let lambda = raw.lambda.unwrap_or(1.0);
        let epsilon = o.epsilon.or(raw.epsilon).unwrap_or(0.2);
        let tol = o.tol.or(raw.tol).unwrap_or(1e-9);
        let seed = o.seed.or(raw.seed).unwrap_or(0);
        let draws = raw.draws.unwrap_or(10);
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(ConfigError::Invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(tol > 0.0 && tol < 1.0) {
            return Err(ConfigError::Invalid(format!("tol must lie in (0, 1), got {tol}")));
        }

        let (g_st, s_st) = standard_structures(d)?;
        let metric = match &raw.metric {
            None => g_st,
            Some(MatrixSpec::Rows(rows)) => Metric::new(matrix(rows, d, "metric")?)?,
            Some(MatrixSpec::Token(t)) if t == "standard" => g_st,
            Some(MatrixSpec::Token(t)) => match token_seed(t, "random:") {
                Some(s) => random_metric(d, s)?,
                None => return Err(ConfigError::Invalid(format!("unknown metric token {t:?}"))),
            },
        };
        let sigma = match &raw.sigma {
            None => s_st,
            Some(MatrixSpec::Rows(rows)) => SymplecticStructure::new(matrix(rows, d, "sigma")?)?,
            Some(MatrixSpec::Token(t)) if t == "standard" => s_st,
            Some(MatrixSpec::Token(t)) => match token_seed(t, "adapted-random:") {
                Some(s) => random_adapted_sigma(&metric, s)?,
                None => return Err(ConfigError::Invalid(format!("unknown sigma token {t:?}"))),
            },
        };
        let params = ModelParams::new(&metric, &sigma, theta, omega, mass2, lambda)?;

        let graph = match &raw.graph {
            None => None,
            Some(p) => {
                let full = base.join(p);
                let text = std::fs::read_to_string(&full).map_err(|e| ConfigError::Io(full.clone(), e))?;
                Some(FeynmanGraph::from_json(&text)?)
            }
        };
        let externals = match &raw.externals {
            None => None,
            Some(v) => Some(v.iter().map(|x| vector(x, d, "external point")).collect::<Result<Vec<_>, _>>()?),
        };

        let spec = raw.field.clone().unwrap_or_default();
        let fc = spec.c.unwrap_or(1.0);
        let fa = match &spec.a {
            None => DMatrix::identity(d, d),
            Some(rows) => matrix(rows, d, "field.a")?,
        };
        let fb = match &spec.b {
            None => DVector::zeros(d),
            Some(b) => vector(b, d, "field.b")?,
        };
        let field = FieldConfig::new(fc, &fa, &fb)?;

        let mut field_numbers = vec![fc];
        field_numbers.extend(row_major(&fa));
        field_numbers.extend(fb.iter());
        let digest_input = DigestInput {
            dimension: d,
            theta,
            omega,
            mass2,
            lambda,
            metric: row_major(metric.matrix()),
            sigma: row_major(sigma.matrix()),
            epsilon,
            tol,
            seed,
            draws,
            graph: graph.as_ref().map(|(g, pos)| g.to_json(pos.as_deref())),
            externals: raw.externals.clone(),
            field: ("c,a,b", field_numbers),
        };
        let json = serde_json::to_string(&digest_input).expect("digest input serializes");
        let digest = hex::encode(&Sha256::digest(json.as_bytes())[..8]);

        Ok(Self {
            params,
            epsilon,
            tol,
            seed,
            draws,
            graph,
            externals,
            field,
            digest,
        })
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// First 16 hex digits of the SHA-256 of the resolved parameters.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn cutoff(&self) -> Result<CutoffSpec, Error> {
        CutoffSpec::with_options(self.epsilon, f64::INFINITY, self.tol)
    }

    /// The configured graph, or the planar tadpole when none is given.
    pub fn graph_or_default(&self) -> FeynmanGraph {
        match &self.graph {
            Some((g, _)) => g.clone(),
            None => FeynmanGraph::planar_tadpole(),
        }
    }

    /// External points: the `externals` key, then the graph file's
    /// positions, then Halton points in `[-0.5, 0.5]^D`.
    pub fn externals_for(&self, graph: &FeynmanGraph) -> Result<Vec<DVector<f64>>, ConfigError> {
        let chosen = self
            .externals
            .clone()
            .or_else(|| self.graph.as_ref().and_then(|(_, p)| p.clone()))
            .unwrap_or_else(|| halton_points(graph.num_external(), self.dim(), -0.5, 0.5));
        if chosen.len() != graph.num_external() {
            return Err(ConfigError::Invalid(format!(
                "{} external points for {} external corners",
                chosen.len(),
                graph.num_external()
            )));
        }
        if chosen.iter().any(|x| x.len() != self.dim()) {
            return Err(ConfigError::Invalid(format!("external points must have {} entries", self.dim())));
        }
        Ok(chosen)
    }
}
