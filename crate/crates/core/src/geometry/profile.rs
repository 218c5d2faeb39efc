use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Number of uniform nodes used when checking properties of a profile.
pub const PROFILE_GRID: usize = 4096;

/// Step for the fourth-order central difference of `Ψ₁''`.
pub const ANGULAR_FD_STEP: f64 = 2.0 * PI / 8192.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    C0,
    C2,
}

type AngularFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A `2π`-periodic function of the direction angle, such as an angular
/// conformal factor `Ψ₁(θ)` or a distance distortion `L(θ)`.
#[derive(Clone)]
pub struct AngularProfile {
    name: String,
    eval: AngularFn,
    second: Option<AngularFn>,
    smoothness: Smoothness,
}

impl fmt::Debug for AngularProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AngularProfile")
            .field("name", &self.name)
            .field("smoothness", &self.smoothness)
            .field("closed_form_second_derivative", &self.second.is_some())
            .finish()
    }
}

impl AngularProfile {
    pub fn new<F>(name: impl Into<String>, smoothness: Smoothness, eval: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        AngularProfile {
            name: name.into(),
            eval: Arc::new(eval),
            second: None,
            smoothness,
        }
    }

    /// Registers a closed-form second derivative, used in place of finite
    /// differences.
    pub fn with_second_derivative<F>(mut self, second: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.second = Some(Arc::new(second));
        self
    }

    pub fn constant(c: f64) -> Self {
        AngularProfile::new(format!("{c}"), Smoothness::C2, move |_| c)
            .with_second_derivative(|_| 0.0)
    }

    /// `amplitude · cos(k θ − phase)`.
    pub fn harmonic(amplitude: f64, k: u32, phase: f64) -> Self {
        let kf = k as f64;
        AngularProfile::new(
            format!("{amplitude}*cos({k}θ-{phase})"),
            Smoothness::C2,
            move |th| amplitude * (kf * th - phase).cos(),
        )
        .with_second_derivative(move |th| -kf * kf * amplitude * (kf * th - phase).cos())
    }

    /// `1 + ε cos θ`, the radial-geodesic stretch of the metric `(1 + ε cos θ)²·δ`.
    pub fn cosine_scale(eps: f64) -> Self {
        AngularProfile::new(format!("1+{eps}cosθ"), Smoothness::C2, move |th| {
            1.0 + eps * th.cos()
        })
        .with_second_derivative(move |th| -eps * th.cos())
    }

    /// `2 log(1 + ε cos θ)`, the angular conformal factor of `(1 + ε cos θ)²·δ`.
    pub fn log_cosine_scale(eps: f64) -> Self {
        AngularProfile::new(format!("2log(1+{eps}cosθ)"), Smoothness::C2, move |th| {
            2.0 * (1.0 + eps * th.cos()).ln()
        })
        .with_second_derivative(move |th| {
            let a = 1.0 + eps * th.cos();
            let s = th.sin();
            -2.0 * eps * th.cos() / a - 2.0 * eps * eps * s * s / (a * a)
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn has_closed_form_second_derivative(&self) -> bool {
        self.second.is_some()
    }

    #[inline]
    pub fn eval(&self, theta: f64) -> f64 {
        (self.eval)(theta)
    }

    /// `Ψ₁''(θ)`: closed form when registered, otherwise the fourth-order
    /// central difference with step `2π/8192`.
    pub fn second_derivative(&self, theta: f64) -> f64 {
        if let Some(d2) = &self.second {
            return d2(theta);
        }
        let h = ANGULAR_FD_STEP;
        let f = |x: f64| self.eval(x);
        (-f(theta + 2.0 * h) + 16.0 * f(theta + h) - 30.0 * f(theta) + 16.0 * f(theta - h)
            - f(theta - 2.0 * h))
            / (12.0 * h * h)
    }

    /// Values on the uniform grid `θ_j = 2πj/n`.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        let h = 2.0 * PI / n as f64;
        (0..n).map(|j| self.eval(j as f64 * h)).collect()
    }

    /// Checks periodicity and finiteness on the 4096-point grid.
    pub fn validate(&self) -> Result<()> {
        let (a, b) = (self.eval(0.0), self.eval(2.0 * PI));
        if (a - b).abs() > 1e-12 {
            return Err(Error::Argument(format!(
                "profile `{}` is not 2π-periodic: f(0) = {a}, f(2π) = {b}",
                self.name
            )));
        }
        if let Some((j, v)) = self
            .grid(PROFILE_GRID)
            .into_iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite())
        {
            return Err(Error::Evaluation {
                what: format!("profile `{}` at grid node {j} (value {v})", self.name),
            });
        }
        Ok(())
    }

    /// `(min, max)` over the 4096-point grid.
    pub fn range(&self) -> (f64, f64) {
        self.grid(PROFILE_GRID)
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }
}
