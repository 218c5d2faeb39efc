use std::fmt;
use std::sync::Arc;

use super::profile::AngularProfile;
use crate::error::{Error, Result};

/// How the user-supplied potential `u` maps to the exponent `w` of
/// `g = e^{w}·(dx² + dy²)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExponentConvention {
    /// `w = u`, so `K = −½ e^{−u} Δu`.
    SingleU,
    /// `w = 2u`, so `K = −e^{−2u} Δu`.
    DoubleU,
}

impl ExponentConvention {
    pub fn factor(self) -> f64 {
        match self {
            ExponentConvention::SingleU => 1.0,
            ExponentConvention::DoubleU => 2.0,
        }
    }
}

type PolarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A metric `e^{w(r,θ)}·(dx² + dy²)` on the punctured disk `0 < r < R`.
///
/// `R` may be infinite for the flat plane.
#[derive(Clone)]
pub struct ConformalMetric2D {
    name: String,
    convention: ExponentConvention,
    potential: PolarFn,
    laplacian: Option<PolarFn>,
    radial_derivative: Option<PolarFn>,
    angular_only: Option<AngularProfile>,
    puncture_radius: f64,
}

impl fmt::Debug for ConformalMetric2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConformalMetric2D")
            .field("name", &self.name)
            .field("convention", &self.convention)
            .field("angular_only", &self.angular_only)
            .field("puncture_radius", &self.puncture_radius)
            .finish()
    }
}

impl ConformalMetric2D {
    /// A metric from a potential `u(r, θ)`; the exponent is `w = factor·u`.
    pub fn new<U>(
        name: impl Into<String>,
        convention: ExponentConvention,
        potential: U,
        radius: f64,
    ) -> Self
    where
        U: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        ConformalMetric2D {
            name: name.into(),
            convention,
            potential: Arc::new(potential),
            laplacian: None,
            radial_derivative: None,
            angular_only: None,
            puncture_radius: radius,
        }
    }

    /// Closed-form Euclidean Laplacian `Δu` of the potential.
    pub fn with_laplacian<F>(mut self, lap: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.laplacian = Some(Arc::new(lap));
        self
    }

    /// Closed-form `∂u/∂r` of the potential.
    pub fn with_radial_derivative<F>(mut self, dr: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.radial_derivative = Some(Arc::new(dr));
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.puncture_radius = radius;
        self
    }

    /// `e^{Ψ₁(θ)}·(dx² + dy²)`, a locally angularly conformal metric.
    pub fn angular(profile: AngularProfile, radius: f64) -> Self {
        let p = profile.clone();
        let mut m = ConformalMetric2D::new(
            format!("angular[{}]", profile.name()),
            ExponentConvention::SingleU,
            move |_, th| p.eval(th),
            radius,
        )
        .with_radial_derivative(|_, _| 0.0);
        m.angular_only = Some(profile);
        m
    }

    pub fn flat(radius: f64) -> Self {
        let mut m = ConformalMetric2D::angular(AngularProfile::constant(0.0), radius);
        m.name = "flat".into();
        m
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn convention(&self) -> ExponentConvention {
        self.convention
    }

    pub fn angular_only(&self) -> Option<&AngularProfile> {
        self.angular_only.as_ref()
    }

    pub fn puncture_radius(&self) -> f64 {
        self.puncture_radius
    }

    #[inline]
    pub fn potential(&self, r: f64, theta: f64) -> f64 {
        (self.potential)(r, theta)
    }

    /// The exponent `w` of `g = e^{w} δ`.
    #[inline]
    pub fn exponent(&self, r: f64, theta: f64) -> f64 {
        self.convention.factor() * self.potential(r, theta)
    }

    /// Density of `dvol_g` against Euclidean area, `e^{w}`.
    #[inline]
    pub fn volume_weight(&self, r: f64, theta: f64) -> f64 {
        self.exponent(r, theta).exp()
    }

    /// Euclidean Laplacian of the exponent, `Δw`, at a point off the puncture.
    ///
    /// Angular-only metrics use `Ψ₁''(θ)/r²`. Otherwise the registered closed
    /// form is used, falling back to a fourth-order Cartesian stencil with
    /// step `r/100`.
    pub fn exponent_laplacian(&self, r: f64, theta: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!(
                "r = {r} is at or inside the puncture"
            )));
        }
        let k = self.convention.factor();
        let lap = if let Some(profile) = &self.angular_only {
            profile.second_derivative(theta) / (r * r)
        } else if let Some(l) = &self.laplacian {
            k * l(r, theta)
        } else {
            k * self.fd_laplacian(r, theta)
        };
        if !lap.is_finite() {
            return Err(Error::Evaluation {
                what: format!("Laplacian of `{}` at (r = {r}, θ = {theta})", self.name),
            });
        }
        Ok(lap)
    }

    fn fd_laplacian(&self, r: f64, theta: f64) -> f64 {
        let h = r / 100.0;
        let (x, y) = (r * theta.cos(), r * theta.sin());
        let u = |x: f64, y: f64| self.potential(x.hypot(y), y.atan2(x));
        let c = u(x, y);
        let d2 = |fp2: f64, fp1: f64, fm1: f64, fm2: f64| {
            (-fp2 + 16.0 * fp1 - 30.0 * c + 16.0 * fm1 - fm2) / (12.0 * h * h)
        };
        d2(
            u(x + 2.0 * h, y),
            u(x + h, y),
            u(x - h, y),
            u(x - 2.0 * h, y),
        ) + d2(
            u(x, y + 2.0 * h),
            u(x, y + h),
            u(x, y - h),
            u(x, y - 2.0 * h),
        )
    }

    /// `∂w/∂r`, closed form when registered, otherwise a fourth-order central
    /// difference with step `r/100`.
    pub fn exponent_radial_derivative(&self, r: f64, theta: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!(
                "r = {r} is at or inside the puncture"
            )));
        }
        let k = self.convention.factor();
        let d = if let Some(dr) = &self.radial_derivative {
            k * dr(r, theta)
        } else {
            let h = r / 100.0;
            let u = |s: f64| self.potential(s, theta);
            k * (-u(r + 2.0 * h) + 8.0 * u(r + h) - 8.0 * u(r - h) + u(r - 2.0 * h)) / (12.0 * h)
        };
        if !d.is_finite() {
            return Err(Error::Evaluation {
                what: format!("∂w/∂r of `{}` at (r = {r}, θ = {theta})", self.name),
            });
        }
        Ok(d)
    }
}

/// Names accepted by [`builtin_metric`].
pub const BUILTIN_METRICS: [&str; 4] = ["flat", "sy-log", "angular-cos", "disk-a04"];

/// Built-in metrics, all on the punctured unit disk.
///
/// * `flat`: the Euclidean metric.
/// * `sy-log`: `e^{2u}δ` with `u = 2r² log r`, whose curvature blows up only
///   logarithmically and whose metric extends across the origin.
/// * `angular-cos`: `e^{u}δ` with `u = 2 cos θ`, a non-extendable angular
///   conformal change.
/// * `disk-a04`: `a(θ)²δ` with `a = 1 + 0.4 cos θ`, i.e. `Ψ₁ = 2 log a`.
pub fn builtin_metric(name: &str) -> Result<ConformalMetric2D> {
    Ok(match name {
        "flat" => ConformalMetric2D::flat(1.0),
        "sy-log" => ConformalMetric2D::new(
            "sy-log",
            ExponentConvention::DoubleU,
            |r: f64, _| if r > 0.0 { 2.0 * r * r * r.ln() } else { 0.0 },
            1.0,
        )
        .with_laplacian(|r: f64, _| 8.0 * r.ln() + 8.0)
        .with_radial_derivative(|r: f64, _| 4.0 * r * r.ln() + 2.0 * r),
        "angular-cos" => {
            let mut m = ConformalMetric2D::angular(AngularProfile::harmonic(2.0, 1, 0.0), 1.0);
            m.name = "angular-cos".into();
            m
        }
        "disk-a04" => {
            let mut m = ConformalMetric2D::angular(AngularProfile::log_cosine_scale(0.4), 1.0);
            m.name = "disk-a04".into();
            m
        }
        other => return Err(Error::UnknownMetric(other.to_string())),
    })
}
