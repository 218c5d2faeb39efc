//! Gaussian curvature of conformal metrics and the quantities built on it:
//! the curvature function `κ(s)`, its moment `∫ s κ(s) ds`, growth rates,
//! extendability of angular factors, and the Gauss–Bonnet balance.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::metric::ConformalMetric2D;
use super::profile::{AngularProfile, PROFILE_GRID};
use crate::error::{Error, Result};
use crate::quadrature::{pairwise_sum, GaussLegendre, QuadratureSpec};

/// `K = −½ e^{−w} Δw` for `g = e^{w} δ`.
pub fn conformal_gaussian_curvature(metric: &ConformalMetric2D, r: f64, theta: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!(
            "curvature requested at r = {r}, inside the puncture"
        )));
    }
    let w = metric.exponent(r, theta);
    if !w.is_finite() {
        return Err(Error::Evaluation {
            what: format!("exponent of `{}` at (r = {r}, θ = {theta})", metric.name()),
        });
    }
    let lap = metric.exponent_laplacian(r, theta)?;
    Ok(-0.5 * (-w).exp() * lap)
}

/// Tensor grid used to approximate the supremum in `κ(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurvatureGrid {
    pub n_theta: usize,
    pub n_r: usize,
}

impl Default for CurvatureGrid {
    fn default() -> Self {
        CurvatureGrid {
            n_theta: 512,
            n_r: 512,
        }
    }
}

/// `κ(s) = sup |K|` over the annulus `s < r < ε`.
///
/// The sup is taken over `n_theta` uniform angles and `n_r` log-spaced radii
/// running from `s` to `ε` inclusive (the sup of a continuous function over
/// the open annulus equals its max over the closure).
pub fn curvature_function(
    metric: &ConformalMetric2D,
    s: f64,
    eps: f64,
    grid: CurvatureGrid,
) -> Result<f64> {
    if !(s > 0.0) || s >= eps {
        return Err(Error::Argument(format!(
            "need 0 < s < ε, got s = {s}, ε = {eps}"
        )));
    }
    if eps > metric.puncture_radius() {
        return Err(Error::Argument(format!(
            "ε = {eps} exceeds the metric's radius {}",
            metric.puncture_radius()
        )));
    }
    if grid.n_theta < 64 || grid.n_r < 64 {
        return Err(Error::Argument(
            "curvature grids need at least 64 nodes per axis".into(),
        ));
    }
    let ratio = (eps / s).ln();
    let h = 2.0 * PI / grid.n_theta as f64;
    let row_max: Vec<Result<f64>> = (0..grid.n_r)
        .into_par_iter()
        .map(|i| {
            let r = if i == grid.n_r - 1 {
                eps
            } else {
                s * (ratio * i as f64 / (grid.n_r - 1) as f64).exp()
            };
            let mut m: f64 = 0.0;
            for j in 0..grid.n_theta {
                m = m.max(conformal_gaussian_curvature(metric, r, j as f64 * h)?.abs());
            }
            Ok(m)
        })
        .collect();
    row_max
        .into_iter()
        .try_fold(0.0f64, |acc, m| Ok(acc.max(m?)))
}

/// Samples of `κ(s)` on a decreasing sequence of radii.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureProfile {
    pub s_values: Vec<f64>,
    pub kappa_values: Vec<f64>,
    pub eps: f64,
    pub grid: CurvatureGrid,
}

impl CurvatureProfile {
    /// Evaluates `κ` at `count` log-spaced radii from `s_max` down to `s_min`.
    ///
    /// Since `κ(s)` is a sup over an annulus that grows as `s` decreases, the
    /// stored sequence is made nondecreasing in that direction by a running
    /// max, which removes grid-placement noise without changing the sup.
    pub fn sample(
        metric: &ConformalMetric2D,
        s_min: f64,
        s_max: f64,
        count: usize,
        eps: f64,
        grid: CurvatureGrid,
    ) -> Result<Self> {
        if count < 2 || !(s_min > 0.0) || s_min >= s_max || s_max >= eps {
            return Err(Error::Argument(format!(
                "need count >= 2 and 0 < s_min < s_max < ε, got {count}, {s_min}, {s_max}, {eps}"
            )));
        }
        let span = (s_max / s_min).ln();
        let s_values: Vec<f64> = (0..count)
            .map(|i| s_max * (-span * i as f64 / (count - 1) as f64).exp())
            .collect();
        CurvatureProfile::at_radii(metric, s_values, eps, grid)
    }

    /// Evaluates `κ` at the given strictly decreasing radii, all below `ε`,
    /// with the same running max as [`CurvatureProfile::sample`].
    pub fn at_radii(
        metric: &ConformalMetric2D,
        s_values: Vec<f64>,
        eps: f64,
        grid: CurvatureGrid,
    ) -> Result<Self> {
        if s_values.is_empty() || s_values.windows(2).any(|w| w[1] >= w[0]) || !(s_values[0] < eps)
        {
            return Err(Error::Argument(
                "radii must be strictly decreasing and below ε".into(),
            ));
        }
        let raw = s_values
            .iter()
            .map(|&s| curvature_function(metric, s, eps, grid))
            .collect::<Result<Vec<f64>>>()?;
        let mut running: f64 = 0.0;
        let kappa_values = raw
            .into_iter()
            .map(|k| {
                running = running.max(k);
                running
            })
            .collect();
        Ok(CurvatureProfile {
            s_values,
            kappa_values,
            eps,
            grid,
        })
    }

    /// A profile from precomputed values; `s_values` must be strictly decreasing.
    pub fn from_values(s_values: Vec<f64>, kappa_values: Vec<f64>, eps: f64) -> Result<Self> {
        if s_values.len() != kappa_values.len() {
            return Err(Error::Argument("s and κ sequences differ in length".into()));
        }
        if s_values.windows(2).any(|w| w[1] >= w[0]) || s_values.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Argument(
                "s values must be positive and strictly decreasing".into(),
            ));
        }
        Ok(CurvatureProfile {
            s_values,
            kappa_values,
            eps,
            grid: CurvatureGrid { n_theta: 0, n_r: 0 },
        })
    }

    fn check_conditioning(&self) -> Result<()> {
        if let Some(k) = self
            .kappa_values
            .iter()
            .find(|k| !k.is_finite() || **k < 0.0)
        {
            return Err(Error::Conditioning(format!(
                "κ entry {k} is negative or non-finite"
            )));
        }
        let has_zero = self.kappa_values.contains(&0.0);
        let has_huge = self.kappa_values.iter().any(|&k| k > 1e15);
        if has_zero && has_huge {
            return Err(Error::Conditioning(
                "κ mixes zero entries with values above 1e15".into(),
            ));
        }
        Ok(())
    }

    fn decades(&self) -> f64 {
        let s_max = self.s_values.iter().cloned().fold(f64::MIN, f64::max);
        let s_min = self.s_values.iter().cloned().fold(f64::MAX, f64::min);
        (s_max / s_min).log10()
    }
}

/// Outcome of the curvature moment test `∫₀^ε s κ(s) ds < ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentClass {
    Finite(f64),
    Infinite { divergence_exponent: f64 },
}

/// Power law `κ(s) ≈ A s^{−α}` fitted by least squares in log–log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit {
    pub alpha: f64,
    pub prefactor: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ a + b x`; returns `(b, a, r²)`.
pub(crate) fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    // A constant response is fitted exactly by a flat line.
    let r2 = if syy <= 1e-300 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    (slope, intercept, r2)
}

fn fit_power_law(s: &[f64], kappa: &[f64]) -> Option<GrowthFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = s
        .iter()
        .zip(kappa)
        .filter(|(_, &k)| k > 0.0)
        .map(|(&s, &k)| (s.ln(), k.ln()))
        .unzip();
    if xs.len() < 2 {
        return None;
    }
    let (slope, intercept, r_squared) = least_squares(&xs, &ys);
    Some(GrowthFit {
        alpha: -slope,
        prefactor: intercept.exp(),
        r_squared,
    })
}

/// Growth exponent `α` of `κ(s) ~ s^{−α}` over the whole profile.
///
/// A profile that is identically zero (flat curvature) reports `α = 0` with a
/// perfect fit.
pub fn curvature_growth_exponent(profile: &CurvatureProfile) -> Result<GrowthFit> {
    if profile.s_values.len() < 5 {
        return Err(Error::Argument(format!(
            "growth fit needs at least 5 points, got {}",
            profile.s_values.len()
        )));
    }
    profile.check_conditioning()?;
    let positive = profile.kappa_values.iter().filter(|&&k| k > 0.0).count();
    if positive == 0 {
        return Ok(GrowthFit {
            alpha: 0.0,
            prefactor: 0.0,
            r_squared: 1.0,
        });
    }
    if positive < 5 {
        return Err(Error::Argument(format!(
            "growth fit needs at least 5 positive κ values, got {positive}"
        )));
    }
    Ok(
        fit_power_law(&profile.s_values, &profile.kappa_values)
            .expect("at least 5 positive points"),
    )
}

/// Threshold below `2` at which the moment integral is declared divergent.
pub const DIVERGENCE_TOL: f64 = 0.05;

/// Decides whether `∫₀^ε s κ(s) ds` is finite.
///
/// Divergence is judged from the power-law exponent fitted on the smallest
/// decade of `s` (`α ≥ 2 − 0.05`), never from the truncated integral itself.
/// For a finite moment the value is the trapezoid integral over the sampled
/// range, plus `κ(s_max)(ε² − s_max²)/2` above it, plus the fitted power-law
/// tail below `s_min`.
pub fn curvature_moment_classifier(profile: &CurvatureProfile) -> Result<MomentClass> {
    if profile.s_values.len() < 20 {
        return Err(Error::Argument(format!(
            "moment classification needs at least 20 radii, got {}",
            profile.s_values.len()
        )));
    }
    if profile.decades() < 3.0 - 1e-9 {
        return Err(Error::Argument(format!(
            "radii span {:.2} decades; at least 3 are required",
            profile.decades()
        )));
    }
    profile.check_conditioning()?;

    let s_min = *profile.s_values.last().unwrap();
    let s_max = profile.s_values[0];
    let (window_s, window_k): (Vec<f64>, Vec<f64>) = profile
        .s_values
        .iter()
        .zip(&profile.kappa_values)
        .filter(|(&s, _)| s <= 10.0 * s_min * (1.0 + 1e-12))
        .map(|(&s, &k)| (s, k))
        .unzip();
    let fit = fit_power_law(&window_s, &window_k);
    if let Some(fit) = fit {
        if fit.alpha >= 2.0 - DIVERGENCE_TOL {
            return Ok(MomentClass::Infinite {
                divergence_exponent: fit.alpha,
            });
        }
    }

    // ∫ s κ ds = ∫ s² κ d(log s), trapezoid on the (log-spaced) samples.
    let terms: Vec<f64> = profile
        .s_values
        .windows(2)
        .zip(profile.kappa_values.windows(2))
        .map(|(s, k)| {
            let dlog = (s[0] / s[1]).ln();
            0.5 * dlog * (s[0] * s[0] * k[0] + s[1] * s[1] * k[1])
        })
        .collect();
    let body = pairwise_sum(&terms);
    let above =
        0.5 * profile.kappa_values[0] * (profile.eps * profile.eps - s_max * s_max).max(0.0);
    let below = match fit {
        Some(f) => f.prefactor * s_min.powf(2.0 - f.alpha) / (2.0 - f.alpha),
        None => 0.0,
    };
    Ok(MomentClass::Finite(body + above + below))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extendability {
    Extends,
    DoesNotExtend { oscillation: f64 },
}

/// A locally angularly conformal metric extends across the singularity iff
/// its angular factor is constant; here "constant" means the max − min over
/// 4096 uniform angles is at most `tol`.
pub fn extendability_check(psi1: &AngularProfile, tol: f64) -> Result<Extendability> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let grid = psi1.grid(PROFILE_GRID);
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            what: format!("angular profile `{}`", psi1.name()),
        });
    }
    let (lo, hi) = grid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let oscillation = hi - lo;
    Ok(if oscillation <= tol {
        Extendability::Extends
    } else {
        Extendability::DoesNotExtend { oscillation }
    })
}

/// Terms of the Gauss–Bonnet balance on the disk `r < r0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussBonnet {
    /// `∫_D K dA_g`.
    pub area_term: f64,
    /// `∮ k_g ds_g`.
    pub boundary_term: f64,
    /// `|area + boundary − 2π|`.
    pub residual: f64,
    /// Quadrature error estimate, including the bound on the omitted core `r < r_cut`.
    pub err_est: f64,
    pub r_cut: f64,
}

const MAX_ANNULI: usize = 200;
const MIN_ANNULI: usize = 8;

/// Evaluates `|∫_D K dA_g + ∮_{∂D} k_g ds_g − 2π|` for the disk of radius `r0`.
///
/// Uses `K dA_g = −½ Δw dA₀` and `k_g ds_g = (1/r0 + ½ ∂_r w) r0 dθ`. The area
/// integral runs over dyadic annuli `[r0/2^{j+1}, r0/2^j]` until the last
/// annulus carries less than `tol·10⁻²` absolute mass; that last mass bounds
/// the omitted core for any integrand growing slower than `r^{−1}`.
pub fn gauss_bonnet_residual(
    metric: &ConformalMetric2D,
    r0: f64,
    quad: &QuadratureSpec,
) -> Result<GaussBonnet> {
    quad.validate()?;
    if !(r0 > 0.0 && r0 < metric.puncture_radius()) {
        return Err(Error::Argument(format!(
            "disk radius must satisfy 0 < r0 < {}, got {r0}",
            metric.puncture_radius()
        )));
    }
    let tol = quad.target_rel_tol * 2.0 * PI;

    let area_pass = |n_theta: usize, n_r: usize| -> Result<(f64, f64, f64)> {
        let gl = GaussLegendre::get(n_r);
        let h = 2.0 * PI / n_theta as f64;
        let mut annuli = Vec::new();
        let mut outer = r0;
        let mut last_abs = f64::INFINITY;
        for j in 0..MAX_ANNULI {
            let inner = 0.5 * outer;
            let (rs, ws) = gl.on_interval(inner, outer);
            let mut rows = Vec::with_capacity(n_theta);
            let mut abs_rows = Vec::with_capacity(n_theta);
            for k in 0..n_theta {
                let theta = k as f64 * h;
                let (mut s, mut a) = (0.0, 0.0);
                for (&r, &w) in rs.iter().zip(&ws) {
                    let v = -0.5 * metric.exponent_laplacian(r, theta)? * r;
                    s += w * v;
                    a += w * v.abs();
                }
                rows.push(s);
                abs_rows.push(a);
            }
            annuli.push(h * pairwise_sum(&rows));
            last_abs = h * pairwise_sum(&abs_rows);
            outer = inner;
            if j + 1 >= MIN_ANNULI && last_abs < 1e-2 * tol {
                break;
            }
        }
        Ok((pairwise_sum(&annuli), last_abs, outer))
    };

    let boundary_pass = |n_theta: usize| -> Result<f64> {
        let h = 2.0 * PI / n_theta as f64;
        let vals = (0..n_theta)
            .map(|k| {
                let theta = k as f64 * h;
                Ok(1.0 + 0.5 * r0 * metric.exponent_radial_derivative(r0, theta)?)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(h * pairwise_sum(&vals))
    };

    let n_r = quad.n_r.clamp(8, 64);
    let (area_coarse, _, _) = area_pass(quad.n_theta, n_r)?;
    let (area, tail, r_cut) = area_pass(2 * quad.n_theta, 2 * n_r)?;
    let boundary_coarse = boundary_pass(quad.n_theta)?;
    let boundary = boundary_pass(2 * quad.n_theta)?;

    let err_est = (area - area_coarse).abs() + (boundary - boundary_coarse).abs() + tail;
    Ok(GaussBonnet {
        area_term: area,
        boundary_term: boundary,
        residual: (area + boundary - 2.0 * PI).abs(),
        err_est,
        r_cut,
    })
}
