//! Graph Laplace operators evaluated at the singular point (the origin).
//!
//! All continuous operators share one shape,
//!
//! ```text
//! L_t f(0) = t^{−2} ∫₀^{2π} ∫₀^{R_t} e^{−D(r,θ)/t} (f(0) − f(y)) p(y) m(r,θ) dr dθ,
//! ```
//!
//! where `D` is a squared distance from the origin and `m` the polar volume
//! density. The flavors differ only in `D` and `m`:
//!
//! | flavor          | `D(r, θ)`              | `m(r, θ)`     |
//! |-----------------|------------------------|---------------|
//! | intrinsic       | `L(θ)² r² + E(r, θ)`   | `e^{w} r`     |
//! | extrinsic plane | `r²`                   | `e^{w} r`     |
//! | extrinsic cone  | `2u²`                  | `√2 u`        |
//!
//! The origin itself carries no mass, so the radial integral needs no special
//! treatment at `r = 0`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{AngularProfile, ConformalMetric2D, ScalarField};
use crate::quadrature::{
    integrate_polar, pairwise_sum, truncation_radius, Integral, QuadratureSpec, TruncationPolicy,
};

/// Below this bandwidth radial integrals switch to `ζ = r/√t`.
pub const SCALED_VARIABLE_THRESHOLD: f64 = 1e-6;

/// `|E(r, θ)| ≤ C r^{2+δ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemainderBound {
    pub c: f64,
    pub delta: f64,
}

type PolarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Squared intrinsic distance from the singular point,
/// `d_g² = L(θ)² r² + E(r, θ)`.
#[derive(Clone)]
pub struct IntrinsicDistanceModel {
    distortion: AngularProfile,
    bound: RemainderBound,
    remainder: Option<PolarFn>,
}

impl fmt::Debug for IntrinsicDistanceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntrinsicDistanceModel")
            .field("distortion", &self.distortion)
            .field("bound", &self.bound)
            .field("has_remainder", &self.remainder.is_some())
            .finish()
    }
}

impl IntrinsicDistanceModel {
    /// Distance measured along radial geodesics, `d_g = L(θ) r`, `E ≡ 0`.
    pub fn radial_geodesic(distortion: AngularProfile) -> Self {
        IntrinsicDistanceModel {
            distortion,
            bound: RemainderBound {
                c: 0.0,
                delta: f64::INFINITY,
            },
            remainder: None,
        }
    }

    pub fn with_remainder<F>(mut self, bound: RemainderBound, remainder: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.bound = bound;
        self.remainder = Some(Arc::new(remainder));
        self
    }

    pub fn distortion(&self) -> &AngularProfile {
        &self.distortion
    }

    pub fn bound(&self) -> RemainderBound {
        self.bound
    }

    #[inline]
    pub fn squared_distance(&self, r: f64, theta: f64) -> f64 {
        let l = self.distortion.eval(theta);
        let e = self.remainder.as_ref().map_or(0.0, |e| e(r, theta));
        l * l * r * r + e
    }

    /// Checks `min L > 0` on the profile grid and the remainder bound on a
    /// sample of radii in `(0, radius]`.
    pub fn validate(&self, radius: f64) -> Result<()> {
        let (lo, _) = self.distortion.range();
        if !(lo > 0.0) {
            return Err(Error::Model(format!(
                "distortion `{}` has minimum {lo} <= 0",
                self.distortion.name()
            )));
        }
        if let Some(e) = &self.remainder {
            let radius = if radius.is_finite() { radius } else { 1.0 };
            for i in 0..32 {
                let r = radius * 10f64.powf(-6.0 * i as f64 / 31.0);
                for j in 0..64 {
                    let th = 2.0 * PI * j as f64 / 64.0;
                    let allowed = self.bound.c * r.powf(2.0 + self.bound.delta);
                    if e(r, th).abs() > allowed * (1.0 + 1e-12) {
                        return Err(Error::Model(format!(
                            "remainder exceeds C r^(2+δ) at (r = {r}, θ = {th})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum KernelFlavor {
    /// Kernel built from the metric's own (modelled) distance.
    Intrinsic {
        metric: ConformalMetric2D,
        model: IntrinsicDistanceModel,
    },
    /// The punctured disk sitting in the plane; ambient distance is `r`.
    ExtrinsicPlane { metric: ConformalMetric2D },
    /// The 45° cone `x² + y² = z²` in `ℝ³`, charted by `(u, θ)`; ambient
    /// distance from the apex is `√2 u` and `dvol_g = √2 u du dθ`.
    ExtrinsicCone { max_radius: f64 },
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub flavor: KernelFlavor,
    pub dimension: usize,
    pub truncation: TruncationPolicy,
}

impl KernelSpec {
    pub fn intrinsic(
        metric: ConformalMetric2D,
        model: IntrinsicDistanceModel,
        truncation: TruncationPolicy,
    ) -> Self {
        KernelSpec {
            flavor: KernelFlavor::Intrinsic { metric, model },
            dimension: 2,
            truncation,
        }
    }

    pub fn extrinsic_plane(metric: ConformalMetric2D, truncation: TruncationPolicy) -> Self {
        KernelSpec {
            flavor: KernelFlavor::ExtrinsicPlane { metric },
            dimension: 2,
            truncation,
        }
    }

    pub fn extrinsic_cone(truncation: TruncationPolicy) -> Self {
        KernelSpec {
            flavor: KernelFlavor::ExtrinsicCone {
                max_radius: f64::INFINITY,
            },
            dimension: 2,
            truncation,
        }
    }

    fn domain_radius(&self) -> f64 {
        match &self.flavor {
            KernelFlavor::Intrinsic { metric, .. } | KernelFlavor::ExtrinsicPlane { metric } => {
                metric.puncture_radius()
            }
            KernelFlavor::ExtrinsicCone { max_radius } => *max_radius,
        }
    }
}

/// One evaluation of an operator at bandwidth `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplacianValue {
    pub t: f64,
    pub value: f64,
    /// `√t · value`.
    pub scaled: f64,
    /// Quadrature error estimate on `value` (zero for empirical sums).
    pub quad_err: f64,
    /// Plug-in standard error of an empirical sum.
    pub std_error: Option<f64>,
    /// Whether the quadrature met its relative tolerance.
    pub converged: bool,
}

impl LaplacianValue {
    fn new(t: f64, value: f64, quad_err: f64, std_error: Option<f64>, converged: bool) -> Self {
        LaplacianValue {
            t,
            value,
            scaled: t.sqrt() * value,
            quad_err,
            std_error,
            converged,
        }
    }
}

/// Evaluates the continuous operator for any kernel flavor.
pub fn continuous_laplacian(
    f: &ScalarField,
    p: &ScalarField,
    kernel: &KernelSpec,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<LaplacianValue> {
    if kernel.dimension != 2 {
        return Err(Error::UnsupportedDimension(kernel.dimension));
    }
    let radius = truncation_radius(t, &kernel.truncation)?.min(kernel.domain_radius());
    if !radius.is_finite() {
        return Err(Error::Argument(
            "infinite domain needs a bandwidth-dependent truncation".into(),
        ));
    }
    let f0 = f.value([0.0, 0.0]);

    let integral = match &kernel.flavor {
        KernelFlavor::Intrinsic { metric, model } => {
            model.validate(radius)?;
            radial_integral(t, radius, spec, |r, th| {
                let (c, s) = (th.cos(), th.sin());
                let y = [r * c, r * s];
                (-model.squared_distance(r, th) / t).exp()
                    * (f0 - f.value(y))
                    * p.value(y)
                    * metric.volume_weight(r, th)
                    * r
            })?
        }
        KernelFlavor::ExtrinsicPlane { metric } => radial_integral(t, radius, spec, |r, th| {
            let y = [r * th.cos(), r * th.sin()];
            (-r * r / t).exp() * (f0 - f.value(y)) * p.value(y) * metric.volume_weight(r, th) * r
        })?,
        KernelFlavor::ExtrinsicCone { .. } => radial_integral(t, radius, spec, |u, th| {
            let y = [u * th.cos(), u * th.sin()];
            (-2.0 * u * u / t).exp() * (f0 - f.value(y)) * p.value(y) * SQRT_2 * u
        })?,
    };
    let norm = t * t;
    Ok(LaplacianValue::new(
        t,
        integral.value / norm,
        integral.err_est / norm,
        None,
        integral.converged(spec.target_rel_tol),
    ))
}

/// `∫∫ integrand(r, θ) dr dθ` over `(0, radius)`, in the scaled variable
/// `ζ = r/√t` for very small bandwidths.
fn radial_integral<F>(t: f64, radius: f64, spec: &QuadratureSpec, integrand: F) -> Result<Integral>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    if t < SCALED_VARIABLE_THRESHOLD {
        let s = t.sqrt();
        integrate_polar(|z, th| s * integrand(s * z, th), 0.0, radius / s, spec)
    } else {
        integrate_polar(integrand, 0.0, radius, spec)
    }
}

/// Continuous intrinsic operator `L_t^{g,int} f(0)`.
#[allow(clippy::too_many_arguments)]
pub fn continuous_intrinsic_laplacian(
    f: &ScalarField,
    p: &ScalarField,
    metric: &ConformalMetric2D,
    model: &IntrinsicDistanceModel,
    t: f64,
    truncation: &TruncationPolicy,
    spec: &QuadratureSpec,
) -> Result<LaplacianValue> {
    let kernel = KernelSpec::intrinsic(metric.clone(), model.clone(), *truncation);
    continuous_laplacian(f, p, &kernel, t, spec)
}

/// Continuous extrinsic-kernel operator `L_t^{g,ext} f(0)`.
pub fn continuous_extrinsic_laplacian(
    f: &ScalarField,
    p: &ScalarField,
    kernel: &KernelSpec,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<LaplacianValue> {
    if matches!(kernel.flavor, KernelFlavor::Intrinsic { .. }) {
        return Err(Error::Argument(
            "extrinsic operator given an intrinsic kernel".into(),
        ));
    }
    continuous_laplacian(f, p, kernel, t, spec)
}

/// `vol_g` of the punctured disk, `∫∫ e^{w} r dr dθ`.
pub fn total_volume(metric: &ConformalMetric2D, spec: &QuadratureSpec) -> Result<Integral> {
    let radius = metric.puncture_radius();
    if !radius.is_finite() {
        return Err(Error::Argument("volume of an unbounded domain".into()));
    }
    integrate_polar(|r, th| metric.volume_weight(r, th) * r, 0.0, radius, spec)
}

/// I.i.d. draws in polar coordinates `(r, θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Vec<[f64; 2]>,
    pub n: usize,
    pub seed: u64,
    pub acceptance_rate: f64,
    pub radius: f64,
}

impl SampleSet {
    pub fn cartesian(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        self.points
            .iter()
            .map(|&[r, th]| [r * th.cos(), r * th.sin()])
    }
}

const SAMPLER_CHUNK: usize = 4096;
const MIN_ACCEPTANCE: f64 = 1e-4;
const BOUND_GRID: usize = 256;
const BOUND_MARGIN: f64 = 1.25;

/// Rejection sampling of the density `∝ p · e^{w} · r` on `(0, R) × [0, 2π)`
/// from a uniform box.
///
/// The sample stream is split into fixed chunks of 4096 draws, chunk `c`
/// using ChaCha8 stream `c` of `seed`, so the output does not depend on the
/// number of worker threads.
pub fn sample_density(
    metric: &ConformalMetric2D,
    p: &ScalarField,
    n: usize,
    seed: u64,
) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::Argument("sample size must be at least 1".into()));
    }
    let radius = metric.puncture_radius();
    if !radius.is_finite() {
        return Err(Error::Argument("sampling needs a bounded domain".into()));
    }
    let target =
        |r: f64, th: f64| p.value([r * th.cos(), r * th.sin()]) * metric.volume_weight(r, th) * r;

    let mut peak: f64 = 0.0;
    for i in 1..=BOUND_GRID {
        let r = radius * i as f64 / BOUND_GRID as f64;
        for j in 0..BOUND_GRID {
            let v = target(r, 2.0 * PI * j as f64 / BOUND_GRID as f64);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Evaluation {
                    what: format!("sampling density at (r = {r}, grid angle {j}): {v}"),
                });
            }
            peak = peak.max(v);
        }
    }
    if !(peak > 0.0) {
        return Err(Error::Argument(
            "sampling density vanishes on the domain".into(),
        ));
    }
    let bound = BOUND_MARGIN * peak;

    let chunks = n.div_ceil(SAMPLER_CHUNK);
    let drawn: Vec<Result<(Vec<[f64; 2]>, u64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let want = SAMPLER_CHUNK.min(n - c * SAMPLER_CHUNK);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let mut pts = Vec::with_capacity(want);
            let mut proposals: u64 = 0;
            while pts.len() < want {
                let r = radius * rng.gen::<f64>();
                let th = 2.0 * PI * rng.gen::<f64>();
                let y = bound * rng.gen::<f64>();
                proposals += 1;
                let v = target(r, th);
                if v > bound {
                    return Err(Error::Conditioning(format!(
                        "density {v} at (r = {r}, θ = {th}) exceeds the proposal bound {bound}"
                    )));
                }
                if y < v {
                    pts.push([r, th]);
                }
                if proposals >= 10_000 && (pts.len() as f64) < MIN_ACCEPTANCE * proposals as f64 {
                    return Err(Error::ProposalMismatch {
                        rate: pts.len() as f64 / proposals as f64,
                        min: MIN_ACCEPTANCE,
                    });
                }
            }
            Ok((pts, proposals))
        })
        .collect();

    let mut points = Vec::with_capacity(n);
    let mut proposals = 0u64;
    for chunk in drawn {
        let (pts, k) = chunk?;
        points.extend(pts);
        proposals += k;
    }
    Ok(SampleSet {
        acceptance_rate: n as f64 / proposals as f64,
        points,
        n,
        seed,
        radius,
    })
}

/// Distance used by the empirical operator.
#[derive(Debug, Clone)]
pub enum SampleDistance {
    /// Euclidean distance in the plane chart.
    Ambient,
    Model(IntrinsicDistanceModel),
}

/// Empirical operator `L_{n,t} f(0) = (n t^{d/2+1})^{−1} Σ e^{−d(0,X_j)²/t}(f(0) − f(X_j))`.
///
/// The result estimates the continuous operator with `p` equal to the
/// normalized sampling density. `std_error` is the plug-in standard error
/// of the mean of the summands.
pub fn discrete_graph_laplacian(
    f: &ScalarField,
    samples: &SampleSet,
    t: f64,
    d: usize,
    distance: &SampleDistance,
) -> Result<LaplacianValue> {
    if samples.points.is_empty() {
        return Err(Error::Argument("empty sample set".into()));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "bandwidth must be positive, got {t}"
        )));
    }
    if d == 0 {
        return Err(Error::Argument("dimension must be at least 1".into()));
    }
    let f0 = f.value([0.0, 0.0]);
    let norm = t.powf(d as f64 / 2.0 + 1.0);
    let terms: Vec<f64> = samples
        .points
        .par_iter()
        .map(|&[r, th]| {
            let d2 = match distance {
                SampleDistance::Ambient => r * r,
                SampleDistance::Model(m) => m.squared_distance(r, th),
            };
            (-d2 / t).exp() * (f0 - f.value([r * th.cos(), r * th.sin()])) / norm
        })
        .collect();
    let n = terms.len() as f64;
    let mean = pairwise_sum(&terms) / n;
    let std_error = if terms.len() >= 2 {
        let dev: Vec<f64> = terms.iter().map(|z| (z - mean) * (z - mean)).collect();
        Some((pairwise_sum(&dev) / (n - 1.0) / n).sqrt())
    } else {
        None
    };
    Ok(LaplacianValue::new(t, mean, 0.0, std_error, true))
}

/// `(|f(x)|‖p‖₁ + ‖fp‖₁) · t^{−d/2−1} · e^{−t^{2η−1}}`, a bound on the part
/// of the operator coming from outside the radius `t^η`.
pub fn truncation_tail_bound(
    f_at_x: f64,
    p_l1: f64,
    fp_l1: f64,
    t: f64,
    eta: f64,
    d: usize,
) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(format!(
            "tail bound needs t in (0, 1), got {t}"
        )));
    }
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::Domain(format!(
            "tail bound needs η in (0, 1/2), got {eta}"
        )));
    }
    let mass = f_at_x.abs() * p_l1 + fp_l1;
    Ok(mass * t.powf(-(d as f64) / 2.0 - 1.0) * (-t.powf(2.0 * eta - 1.0)).exp())
}
