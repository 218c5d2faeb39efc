use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quadrature::{QuadratureSpec, TruncationPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Table1,
    Table2,
    Counterexample,
    InteriorBaseline,
    CurvatureProfile,
    McConvergence,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Table1,
        Experiment::Table2,
        Experiment::Counterexample,
        Experiment::InteriorBaseline,
        Experiment::CurvatureProfile,
        Experiment::McConvergence,
    ];

    pub fn cli_name(self) -> &'static str {
        match self {
            Experiment::Table1 => "table1",
            Experiment::Table2 => "table2",
            Experiment::Counterexample => "counterexample",
            Experiment::InteriorBaseline => "interior",
            Experiment::CurvatureProfile => "curvature",
            Experiment::McConvergence => "mc",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.cli_name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.cli_name()).collect();
                Error::Config(format!(
                    "unknown experiment `{s}`; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// Bandwidths of the disk table, largest first.
pub const TABLE1_T: [f64; 8] = [1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3, 5e-4];
/// Bandwidths of the cone table, largest first.
pub const TABLE2_T: [f64; 10] = [1e-1, 5e-2, 2e-2, 1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4];
pub const COUNTEREXAMPLE_T: [f64; 5] = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];
pub const INTERIOR_T: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
pub const MC_SAMPLE_SIZES: [usize; 3] = [1_000, 10_000, 100_000];

/// Everything needed to run one experiment.
///
/// For `curvature`, `t_values` are the radii `s` at which `κ(s)` is sampled.
/// For `mc`, only the first bandwidth is used.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub t_values: Vec<f64>,
    pub quad: QuadratureSpec,
    pub truncation: TruncationPolicy,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    /// Built-in metric for the curvature experiment.
    pub metric: String,
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let (t_values, truncation): (Vec<f64>, _) = match experiment {
            Experiment::Table1 => (TABLE1_T.to_vec(), TruncationPolicy::FixedRadius(1.0)),
            Experiment::Table2 => (TABLE2_T.to_vec(), TruncationPolicy::BandwidthMultiple(10.0)),
            Experiment::Counterexample => (
                COUNTEREXAMPLE_T.to_vec(),
                TruncationPolicy::BandwidthMultiple(10.0),
            ),
            Experiment::InteriorBaseline => (
                INTERIOR_T.to_vec(),
                TruncationPolicy::BandwidthMultiple(10.0),
            ),
            Experiment::CurvatureProfile => (
                (0..25).map(|i| 10f64.powf(-2.0 - i as f64 / 6.0)).collect(),
                TruncationPolicy::FixedRadius(1.0),
            ),
            Experiment::McConvergence => (vec![0.05], TruncationPolicy::FixedRadius(1.0)),
        };
        ExperimentConfig {
            experiment,
            t_values,
            quad: QuadratureSpec::default(),
            truncation,
            seed: 42,
            output_path: None,
            metric: "angular-cos".into(),
            sample_sizes: MC_SAMPLE_SIZES.to_vec(),
            replicates: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_values.is_empty() {
            return Err(Error::Config("no bandwidths given".into()));
        }
        if let Some(t) = self.t_values.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::Config(format!("bandwidth {t} is outside (0, 1)")));
        }
        if self.t_values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(
                "bandwidths must be strictly decreasing".into(),
            ));
        }
        self.quad.validate()?;
        self.truncation.validate()?;
        if self.experiment == Experiment::McConvergence {
            if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
                return Err(Error::Config("sample sizes must be positive".into()));
            }
            if self.replicates == 0 {
                return Err(Error::Config("at least one replicate is needed".into()));
            }
        }
        Ok(())
    }
}

/// Settings read from a config file or the command line; unset fields keep
/// the experiment defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub experiment: Option<Experiment>,
    pub t_values: Option<Vec<f64>>,
    pub n_theta: Option<usize>,
    pub n_r: Option<usize>,
    pub rel_tol: Option<f64>,
    pub truncation: Option<TruncationPolicy>,
    pub seed: Option<u64>,
    pub output_path: Option<PathBuf>,
    pub metric: Option<String>,
    pub sample_sizes: Option<Vec<usize>>,
    pub replicates: Option<usize>,
}

impl Overrides {
    /// Fields set in `other` win.
    pub fn merged(self, other: Overrides) -> Overrides {
        Overrides {
            experiment: other.experiment.or(self.experiment),
            t_values: other.t_values.or(self.t_values),
            n_theta: other.n_theta.or(self.n_theta),
            n_r: other.n_r.or(self.n_r),
            rel_tol: other.rel_tol.or(self.rel_tol),
            truncation: other.truncation.or(self.truncation),
            seed: other.seed.or(self.seed),
            output_path: other.output_path.or(self.output_path),
            metric: other.metric.or(self.metric),
            sample_sizes: other.sample_sizes.or(self.sample_sizes),
            replicates: other.replicates.or(self.replicates),
        }
    }

    pub fn resolve(self) -> Result<ExperimentConfig> {
        let experiment = self
            .experiment
            .ok_or_else(|| Error::Config("no experiment selected".into()))?;
        let mut cfg = ExperimentConfig::defaults(experiment);
        if let Some(t) = self.t_values {
            cfg.t_values = t;
        }
        cfg.quad = QuadratureSpec {
            n_theta: self.n_theta.unwrap_or(cfg.quad.n_theta),
            n_r: self.n_r.unwrap_or(cfg.quad.n_r),
            target_rel_tol: self.rel_tol.unwrap_or(cfg.quad.target_rel_tol),
        };
        if let Some(t) = self.truncation {
            cfg.truncation = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.output_path = self.output_path.or(cfg.output_path);
        if let Some(m) = self.metric {
            cfg.metric = m;
        }
        if let Some(n) = self.sample_sizes {
            cfg.sample_sizes = n;
        }
        if let Some(r) = self.replicates {
            cfg.replicates = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are ignored;
    /// keys match the long flag names, with `_` accepted for `-`.
    pub fn parse(text: &str) -> Result<Overrides> {
        let mut o = Overrides::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let (key, value) = (key.trim().replace('_', "-"), value.trim());
            let bad = |what: &str| Error::Config(format!("line {}: bad {what} `{value}`", i + 1));
            match key.as_str() {
                "experiment" => o.experiment = Some(value.parse()?),
                "t-values" => {
                    o.t_values = Some(parse_list(value).map_err(|_| bad("bandwidth list"))?)
                }
                "n-theta" => o.n_theta = Some(value.parse().map_err(|_| bad("node count"))?),
                "n-r" => o.n_r = Some(value.parse().map_err(|_| bad("node count"))?),
                "rel-tol" => o.rel_tol = Some(value.parse().map_err(|_| bad("tolerance"))?),
                "trunc" => o.truncation = Some(value.parse().map_err(|_| bad("truncation"))?),
                "seed" => o.seed = Some(value.parse().map_err(|_| bad("seed"))?),
                "out" => o.output_path = Some(PathBuf::from(value)),
                "metric" => o.metric = Some(value.to_string()),
                "n-values" => {
                    o.sample_sizes = Some(parse_list(value).map_err(|_| bad("sample sizes"))?)
                }
                "replicates" => {
                    o.replicates = Some(value.parse().map_err(|_| bad("replicate count"))?)
                }
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key `{other}`",
                        i + 1
                    )))
                }
            }
        }
        Ok(o)
    }

    pub fn from_file(path: &Path) -> Result<Overrides> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Overrides::parse(&text)
    }
}

/// Comma-separated list.
pub fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, T::Err> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse())
        .collect()
}
