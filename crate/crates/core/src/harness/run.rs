use std::f64::consts::{PI, SQRT_2};

use log::{info, warn};
use rayon::prelude::*;

use super::check::check_outcome;
use super::config::{Experiment, ExperimentConfig};
use super::{Check, ResultRow};
use crate::asymptotics::{
    extrinsic_prediction, interior_limit, intrinsic_prediction, rate_fit, RateFit,
};
use crate::error::{Error, Result};
use crate::geometry::{
    builtin_metric, curvature_growth_exponent, curvature_moment_classifier, extendability_check,
    least_squares, AngularProfile, ConformalMetric2D, CurvatureGrid, CurvatureProfile,
    Extendability, GrowthFit, MomentClass, ScalarField,
};
use crate::operators::{
    continuous_extrinsic_laplacian, continuous_intrinsic_laplacian, discrete_graph_laplacian,
    sample_density, total_volume, IntrinsicDistanceModel, KernelSpec, LaplacianValue,
    SampleDistance,
};
use crate::quadrature::{QuadratureSpec, TruncationPolicy};

/// `L_t f(0)` at the cone apex for `f = x² + y²`, `p ≡ 1`: `−π√2/4`.
pub const CONE_VALUE: f64 = -PI * SQRT_2 / 4.0;

/// Radius bounding the annuli in the curvature experiment.
const CURVATURE_EPS: f64 = 0.5;

fn ensure(cfg: &ExperimentConfig, want: Experiment) -> Result<()> {
    if cfg.experiment != want {
        return Err(Error::Config(format!(
            "configuration is for `{}`, not `{want}`",
            cfg.experiment
        )));
    }
    cfg.validate()
}

fn sweep<F>(t_values: &[f64], eval: F) -> Result<Vec<LaplacianValue>>
where
    F: Fn(f64) -> Result<LaplacianValue> + Sync,
{
    let values = t_values
        .par_iter()
        .map(|&t| eval(t))
        .collect::<Result<Vec<_>>>()?;
    for v in values.iter().filter(|v| !v.converged) {
        warn!(
            "t = {:e}: quadrature error {:e} exceeds the target",
            v.t, v.quad_err
        );
    }
    Ok(values)
}

/// The disk test function `1.2x + 0.7y + 0.05(x² − ½y²)`.
pub(crate) fn table1_field() -> ScalarField {
    ScalarField::quadratic(0.0, [1.2, 0.7], [[0.1, 0.0], [0.0, -0.05]])
}

/// Conformal factor `a(θ)² = (1 + 0.4 cos θ)²` with distance `a(θ) r`.
pub(crate) fn table1_geometry() -> (ConformalMetric2D, AngularProfile, IntrinsicDistanceModel) {
    let psi = AngularProfile::log_cosine_scale(0.4);
    let metric = builtin_metric("disk-a04").expect("built-in metric");
    let model = IntrinsicDistanceModel::radial_geodesic(AngularProfile::cosine_scale(0.4));
    (metric, psi, model)
}

/// Scaled intrinsic operator on the disk with `a(θ) = 1 + 0.4 cos θ`,
/// compared with its predicted limit.
pub fn run_table1(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    ensure(cfg, Experiment::Table1)?;
    let (metric, psi, model) = table1_geometry();
    let f = table1_field();
    let p = ScalarField::constant(1.0);
    let pred = intrinsic_prediction(&f, &p, &psi, model.distortion(), 2, &cfg.quad)?;
    let values = sweep(&cfg.t_values, |t| {
        continuous_intrinsic_laplacian(&f, &p, &metric, &model, t, &cfg.truncation, &cfg.quad)
    })?;
    Ok(values
        .iter()
        .map(|v| ResultRow::against_scaled(v, pred.scaled_limit()))
        .collect())
}

/// Extrinsic operator at the apex of the 45° cone, `f = x² + y²`, `p ≡ 1`.
pub fn run_table2(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    ensure(cfg, Experiment::Table2)?;
    let f = ScalarField::radial_square();
    let p = ScalarField::constant(1.0);
    let kernel = KernelSpec::extrinsic_cone(cfg.truncation);
    let values = sweep(&cfg.t_values, |t| {
        continuous_extrinsic_laplacian(&f, &p, &kernel, t, &cfg.quad)
    })?;
    Ok(values
        .iter()
        .map(|v| ResultRow::against_value(v, CONE_VALUE))
        .collect())
}

/// Extrinsic operator for `e^{2cos θ}δ` on the punctured unit disk with
/// `f = x` and `p = 1/vol_g`; returns rows and the fitted rate.
pub fn run_counterexample(cfg: &ExperimentConfig) -> Result<(Vec<ResultRow>, RateFit)> {
    let (rows, fit, _) = counterexample(cfg)?;
    Ok((rows, fit))
}

fn counterexample(cfg: &ExperimentConfig) -> Result<(Vec<ResultRow>, RateFit, f64)> {
    ensure(cfg, Experiment::Counterexample)?;
    let metric = builtin_metric("angular-cos")?;
    let psi = metric.angular_only().cloned().expect("angular metric");
    let vol = total_volume(&metric, &cfg.quad)?.value;
    let f = ScalarField::quadratic(0.0, [1.0, 0.0], [[0.0; 2]; 2]);
    let p = ScalarField::constant(1.0 / vol);
    let pred = extrinsic_prediction(&f, &p, &psi, 2, &cfg.quad)?;
    let kernel = KernelSpec::extrinsic_plane(metric, cfg.truncation);
    let values = sweep(&cfg.t_values, |t| {
        continuous_extrinsic_laplacian(&f, &p, &kernel, t, &cfg.quad)
    })?;
    let fit = rate_fit(&values)?;
    info!(
        "vol_g = {vol:.10}, slope = {:.6}, r² = {:.8}",
        fit.slope, fit.r_squared
    );
    let rows = values
        .iter()
        .map(|v| ResultRow::against_scaled(v, pred.leading_coeff))
        .collect();
    Ok((rows, fit, vol))
}

/// The empirical side of the interior baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorDiscrete {
    pub t: f64,
    pub n: usize,
    pub value: LaplacianValue,
    /// Continuous operator on the unit disk with the normalized density.
    pub oracle: f64,
}

impl InteriorDiscrete {
    pub fn z_score(&self) -> f64 {
        let se = self.value.std_error.unwrap_or(f64::NAN);
        (self.value.value - self.oracle).abs() / se
    }
}

const INTERIOR_MC_T: f64 = 0.05;
const INTERIOR_MC_N: usize = 200_000;

/// Flat plane, `f = x² + y²`, `p ≡ 1`: `L_t f(0)` against the interior limit,
/// plus one empirical estimate on the unit disk.
pub fn run_interior_baseline(cfg: &ExperimentConfig) -> Result<(Vec<ResultRow>, InteriorDiscrete)> {
    ensure(cfg, Experiment::InteriorBaseline)?;
    let f = ScalarField::radial_square();
    let p = ScalarField::constant(1.0);
    let plane = ConformalMetric2D::flat(f64::INFINITY);
    let model = IntrinsicDistanceModel::radial_geodesic(AngularProfile::constant(1.0));
    let limit = interior_limit(&f, &p, 2);
    let values = sweep(&cfg.t_values, |t| {
        continuous_intrinsic_laplacian(&f, &p, &plane, &model, t, &cfg.truncation, &cfg.quad)
    })?;
    let rows = values
        .iter()
        .map(|v| ResultRow::against_value(v, limit))
        .collect();

    let disk = ConformalMetric2D::flat(1.0);
    let samples = sample_density(&disk, &p, INTERIOR_MC_N, cfg.seed)?;
    let value = discrete_graph_laplacian(&f, &samples, INTERIOR_MC_T, 2, &SampleDistance::Ambient)?;
    let oracle = disk_oracle(&f, &disk, INTERIOR_MC_T, &cfg.quad)?;
    Ok((
        rows,
        InteriorDiscrete {
            t: INTERIOR_MC_T,
            n: INTERIOR_MC_N,
            value,
            oracle,
        },
    ))
}

/// Continuous operator on the flat unit disk with `p = 1/π`, the density of
/// uniform samples.
fn disk_oracle(
    f: &ScalarField,
    disk: &ConformalMetric2D,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let p = ScalarField::constant(1.0 / PI);
    let model = IntrinsicDistanceModel::radial_geodesic(AngularProfile::constant(1.0));
    let v = continuous_intrinsic_laplacian(
        f,
        &p,
        disk,
        &model,
        t,
        &TruncationPolicy::FixedRadius(1.0),
        quad,
    )?;
    Ok(v.value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureSummary {
    pub metric: String,
    pub profile: CurvatureProfile,
    pub growth: GrowthFit,
    pub moment: MomentClass,
    pub extendability: Option<Extendability>,
}

const EXTENDABILITY_TOL: f64 = 1e-10;

/// Samples `κ(s)` at the configured radii and classifies its growth.
///
/// Rows hold `s` in the `t` column, `κ(s)` as `computed`, `s²κ(s)` as
/// `scaled`, and the fitted power law as `predicted`.
pub fn run_curvature_profile(cfg: &ExperimentConfig) -> Result<(Vec<ResultRow>, CurvatureSummary)> {
    ensure(cfg, Experiment::CurvatureProfile)?;
    let metric = builtin_metric(&cfg.metric)?;
    if cfg.t_values[0] >= CURVATURE_EPS {
        return Err(Error::Config(format!(
            "radii must lie below ε = {CURVATURE_EPS}"
        )));
    }
    let grid = CurvatureGrid::default();
    let profile = CurvatureProfile::at_radii(&metric, cfg.t_values.clone(), CURVATURE_EPS, grid)?;
    let growth = curvature_growth_exponent(&profile)?;
    let moment = curvature_moment_classifier(&profile)?;
    let extendability = metric
        .angular_only()
        .map(|psi| extendability_check(psi, EXTENDABILITY_TOL))
        .transpose()?;
    let rows = profile
        .s_values
        .iter()
        .zip(&profile.kappa_values)
        .map(|(&s, &k)| {
            let fitted = growth.prefactor * s.powf(-growth.alpha);
            ResultRow::new(s, k, s * s * k, fitted, k, true)
        })
        .collect();
    Ok((
        rows,
        CurvatureSummary {
            metric: cfg.metric.clone(),
            profile,
            growth,
            moment,
            extendability,
        },
    ))
}

/// Error of the empirical operator as a function of the sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub t: f64,
    pub oracle: f64,
    /// `(n, mean over replicates of |L_{n,t} − L_t|)`.
    pub mean_abs_errors: Vec<(usize, f64)>,
    /// Slope of `log mean error` against `log n`.
    pub slope: f64,
    pub r_squared: f64,
    /// Largest `|L_{n,t} − L_t| / σ̂` over all runs.
    pub max_z: f64,
}

/// Flat unit disk, uniform samples, `f = x² + y²`. Replicate `k` uses seed
/// `seed + k` for every sample size.
///
/// One row per sample size: `computed` is the mean over replicates and
/// `predicted` the continuous oracle.
pub fn run_mc_convergence(cfg: &ExperimentConfig) -> Result<(Vec<ResultRow>, McSummary)> {
    ensure(cfg, Experiment::McConvergence)?;
    let t = cfg.t_values[0];
    let f = ScalarField::radial_square();
    let disk = ConformalMetric2D::flat(1.0);
    let p = ScalarField::constant(1.0);
    let oracle = disk_oracle(&f, &disk, t, &cfg.quad)?;

    let mut rows = Vec::with_capacity(cfg.sample_sizes.len());
    let mut errors = Vec::with_capacity(cfg.sample_sizes.len());
    let mut max_z: f64 = 0.0;
    for &n in &cfg.sample_sizes {
        let runs = (0..cfg.replicates as u64)
            .map(|k| {
                let s = sample_density(&disk, &p, n, cfg.seed.wrapping_add(k))?;
                discrete_graph_laplacian(&f, &s, t, 2, &SampleDistance::Ambient)
            })
            .collect::<Result<Vec<_>>>()?;
        let m = runs.len() as f64;
        let mean = runs.iter().map(|v| v.value).sum::<f64>() / m;
        let mae = runs.iter().map(|v| (v.value - oracle).abs()).sum::<f64>() / m;
        for v in &runs {
            let z = (v.value - oracle).abs() / v.std_error.unwrap_or(f64::NAN);
            max_z = max_z.max(if z.is_nan() { f64::INFINITY } else { z });
        }
        errors.push((n, mae));
        let summary = LaplacianValue {
            t,
            value: mean,
            scaled: t.sqrt() * mean,
            quad_err: 0.0,
            std_error: None,
            converged: true,
        };
        rows.push(ResultRow::against_value(&summary, oracle));
    }
    let (slope, r_squared) = if errors.len() >= 2 {
        let xs: Vec<f64> = errors.iter().map(|(n, _)| (*n as f64).ln()).collect();
        let ys: Vec<f64> = errors.iter().map(|(_, e)| e.ln()).collect();
        let (slope, _, r2) = least_squares(&xs, &ys);
        (slope, r2)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok((
        rows,
        McSummary {
            t,
            oracle,
            mean_abs_errors: errors,
            slope,
            r_squared,
            max_z,
        },
    ))
}

/// Experiment-specific results beyond the table rows.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostics {
    None,
    Table2 { fit: Option<RateFit> },
    Counterexample { fit: RateFit, volume: f64 },
    Interior(InteriorDiscrete),
    Curvature(CurvatureSummary),
    Mc(McSummary),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
    pub diagnostics: Diagnostics,
}

impl ExperimentOutcome {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    pub fn checks(&self) -> Vec<Check> {
        check_outcome(self)
    }

    /// Human-readable lines describing the diagnostics.
    pub fn summary_lines(&self) -> Vec<String> {
        match &self.diagnostics {
            Diagnostics::None => vec![],
            Diagnostics::Table2 { fit } => fit
                .iter()
                .map(|f| format!("rate fit: slope {:.6}, r² {:.6}", f.slope, f.r_squared))
                .collect(),
            Diagnostics::Counterexample { fit, volume } => vec![
                format!("vol_g = {volume:.10}"),
                format!(
                    "rate fit over t in [{:e}, {:e}]: slope {:.6}, r² {:.8}",
                    fit.t_window.0, fit.t_window.1, fit.slope, fit.r_squared
                ),
            ],
            Diagnostics::Interior(d) => vec![format!(
                "discrete n = {}, t = {}: {:.6} ± {:.6} (oracle {:.6}, z = {:.2})",
                d.n,
                d.t,
                d.value.value,
                d.value.std_error.unwrap_or(f64::NAN),
                d.oracle,
                d.z_score()
            )],
            Diagnostics::Curvature(c) => {
                let moment = match c.moment {
                    MomentClass::Finite(v) => format!("finite ({v:.6})"),
                    MomentClass::Infinite {
                        divergence_exponent,
                    } => {
                        format!("infinite (κ ~ s^-{divergence_exponent:.4})")
                    }
                };
                let mut lines = vec![
                    format!(
                        "metric {}: growth exponent {:.4} (r² {:.6})",
                        c.metric, c.growth.alpha, c.growth.r_squared
                    ),
                    format!("curvature moment: {moment}"),
                ];
                if let Some(e) = c.extendability {
                    lines.push(match e {
                        Extendability::Extends => "angular factor constant: metric extends".into(),
                        Extendability::DoesNotExtend { oscillation } => {
                            format!("angular factor oscillation {oscillation:.6}: metric does not extend")
                        }
                    });
                }
                lines
            }
            Diagnostics::Mc(m) => {
                let mut lines: Vec<String> = m
                    .mean_abs_errors
                    .iter()
                    .map(|(n, e)| format!("n = {n}: mean |L_n,t − L_t| = {e:.6e}"))
                    .collect();
                lines.push(format!(
                    "slope in log n: {:.4} (r² {:.4}); largest z = {:.2}",
                    m.slope, m.r_squared, m.max_z
                ));
                lines
            }
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let (rows, diagnostics) = match cfg.experiment {
        Experiment::Table1 => (run_table1(cfg)?, Diagnostics::None),
        Experiment::Table2 => {
            let rows = run_table2(cfg)?;
            let values: Vec<LaplacianValue> = rows
                .iter()
                .map(|r| LaplacianValue {
                    t: r.t,
                    value: r.computed,
                    scaled: r.scaled,
                    quad_err: 0.0,
                    std_error: None,
                    converged: r.converged,
                })
                .collect();
            (
                rows,
                Diagnostics::Table2 {
                    fit: rate_fit(&values).ok(),
                },
            )
        }
        Experiment::Counterexample => {
            let (rows, fit, volume) = counterexample(cfg)?;
            (rows, Diagnostics::Counterexample { fit, volume })
        }
        Experiment::InteriorBaseline => {
            let (rows, d) = run_interior_baseline(cfg)?;
            (rows, Diagnostics::Interior(d))
        }
        Experiment::CurvatureProfile => {
            let (rows, c) = run_curvature_profile(cfg)?;
            (rows, Diagnostics::Curvature(c))
        }
        Experiment::McConvergence => {
            let (rows, m) = run_mc_convergence(cfg)?;
            (rows, Diagnostics::Mc(m))
        }
    };
    Ok(ExperimentOutcome {
        config: cfg.clone(),
        rows,
        diagnostics,
    })
}
