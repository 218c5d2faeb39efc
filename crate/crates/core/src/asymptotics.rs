//! Predicted small-bandwidth behaviour at the singular point, and empirical
//! rate fits.
//!
//! In two dimensions every sphere integral is a periodic integral over `θ`,
//! with `Θ = (cos θ, sin θ)`.

use std::f64::consts::PI;
use std::fmt;

use log::warn;

use crate::error::{Error, Result};
use crate::geometry::{least_squares, AngularProfile, ScalarField};
use crate::operators::LaplacianValue;
use crate::quadrature::{gaussian_moment_ck, integrate_periodic, QuadratureSpec};

const ORIGIN: [f64; 2] = [0.0, 0.0];
const ZERO_LEADING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionKind {
    /// The classical expansion at an interior point.
    Interior,
    /// Intrinsic-kernel blow-up at a locally angularly conformal singularity.
    IntrinsicBlowUp,
    /// Extrinsic-kernel expansion at a locally angularly conformal singularity.
    Extrinsic,
}

impl fmt::Display for PredictionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredictionKind::Interior => "interior",
            PredictionKind::IntrinsicBlowUp => "intrinsic-blow-up",
            PredictionKind::Extrinsic => "extrinsic",
        })
    }
}

/// `L_t f(0) ≈ leading_coeff · t^{−1/2} + constant_term`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticPrediction {
    pub leading_coeff: f64,
    pub constant_term: f64,
    /// `−1/2` when the leading coefficient is nonzero, else `0`.
    pub rate_exponent: f64,
    pub provenance: PredictionKind,
    /// `p(0) ≠ 0` and the leading moment does not vanish.
    pub nondegenerate: bool,
}

impl AsymptoticPrediction {
    /// The value `√t · L_t f(0)` tends to.
    pub fn scaled_limit(&self) -> f64 {
        self.leading_coeff
    }

    /// `leading_coeff / √t + constant_term`.
    pub fn evaluate(&self, t: f64) -> f64 {
        self.leading_coeff / t.sqrt() + self.constant_term
    }

    fn from_parts(
        leading: f64,
        constant: f64,
        zero_scale: f64,
        p0: f64,
        provenance: PredictionKind,
    ) -> Self {
        let nonzero = leading.abs() > ZERO_LEADING_TOL * zero_scale;
        AsymptoticPrediction {
            leading_coeff: leading,
            constant_term: constant,
            rate_exponent: if nonzero { -0.5 } else { 0.0 },
            provenance,
            nondegenerate: p0 != 0.0 && nonzero,
        }
    }
}

/// `−(π^{d/2}/2)(½ p Δf + ⟨∇p, ∇f⟩)` at the origin.
pub fn interior_limit(f: &ScalarField, p: &ScalarField, d: usize) -> f64 {
    let h = f.hessian(ORIGIN);
    let lap = h[0][0] + h[1][1];
    let gf = f.gradient(ORIGIN);
    let gp = p.gradient(ORIGIN);
    let c = PI.powf(d as f64 / 2.0) / 2.0;
    -c * (0.5 * p.value(ORIGIN) * lap + gp[0] * gf[0] + gp[1] * gf[1])
}

struct Jet {
    p0: f64,
    gf: [f64; 2],
    gp: [f64; 2],
    hf: [[f64; 2]; 2],
}

impl Jet {
    fn at_origin(f: &ScalarField, p: &ScalarField) -> Result<Self> {
        let jet = Jet {
            p0: p.value(ORIGIN),
            gf: f.gradient(ORIGIN),
            gp: p.gradient(ORIGIN),
            hf: f.hessian(ORIGIN),
        };
        let all = [jet.p0, jet.gf[0], jet.gf[1], jet.gp[0], jet.gp[1]];
        if all
            .iter()
            .chain(jet.hf.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Evaluation {
                what: "derivatives of f or p at the origin".into(),
            });
        }
        Ok(jet)
    }

    fn grad_f(&self, th: f64) -> f64 {
        self.gf[0] * th.cos() + self.gf[1] * th.sin()
    }

    fn grad_p(&self, th: f64) -> f64 {
        self.gp[0] * th.cos() + self.gp[1] * th.sin()
    }

    /// `∇²f(Θ, Θ)`.
    fn hess_f(&self, th: f64) -> f64 {
        let (c, s) = (th.cos(), th.sin());
        self.hf[0][0] * c * c + (self.hf[0][1] + self.hf[1][0]) * c * s + self.hf[1][1] * s * s
    }

    /// `½ p ∇²f(Θ, Θ) + ⟨∇p, Θ⟩⟨∇f, Θ⟩`.
    fn phi(&self, th: f64) -> f64 {
        0.5 * self.p0 * self.hess_f(th) + self.grad_p(th) * self.grad_f(th)
    }

    fn grad_norm(&self) -> f64 {
        self.gf[0].hypot(self.gf[1])
    }
}

fn sphere_integral<F: Fn(f64) -> f64>(f: F, quad: &QuadratureSpec) -> Result<f64> {
    Ok(integrate_periodic(f, quad.n_theta)?.value)
}

fn require_plane(d: usize) -> Result<()> {
    if d != 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    Ok(())
}

/// The blow-up moment `b = ∫ Θ e^{Ψ₁} L^{−3} dθ`.
pub fn blow_up_moment(
    psi1: &AngularProfile,
    distortion: &AngularProfile,
    quad: &QuadratureSpec,
) -> Result<[f64; 2]> {
    check_distortion(distortion)?;
    let w = |th: f64| psi1.eval(th).exp() * distortion.eval(th).powi(-3);
    Ok([
        sphere_integral(|th| th.cos() * w(th), quad)?,
        sphere_integral(|th| th.sin() * w(th), quad)?,
    ])
}

fn check_distortion(distortion: &AngularProfile) -> Result<()> {
    let (lo, _) = distortion.range();
    if !(lo > 0.0) {
        return Err(Error::Model(format!(
            "distortion `{}` has minimum {lo} <= 0",
            distortion.name()
        )));
    }
    Ok(())
}

/// Two-term prediction for the intrinsic operator with squared distance
/// `L(θ)² r² + o(r²)` and volume `e^{Ψ₁(θ)} r dr dθ`:
///
/// * leading `−c_d p ⟨∇f, b⟩` with `b = ∫ Θ e^{Ψ₁} L^{−3} dθ`,
/// * constant `−c_{d+1} ∫ Φ e^{Ψ₁} L^{−4} dθ`.
pub fn intrinsic_prediction(
    f: &ScalarField,
    p: &ScalarField,
    psi1: &AngularProfile,
    distortion: &AngularProfile,
    d: usize,
    quad: &QuadratureSpec,
) -> Result<AsymptoticPrediction> {
    require_plane(d)?;
    let jet = Jet::at_origin(f, p)?;
    let b = blow_up_moment(psi1, distortion, quad)?;
    let b0 = sphere_integral(
        |th| jet.phi(th) * psi1.eval(th).exp() * distortion.eval(th).powi(-4),
        quad,
    )?;
    let weight_mass = sphere_integral(
        |th| psi1.eval(th).exp() * distortion.eval(th).powi(-3),
        quad,
    )?;
    let cd = gaussian_moment_ck(d as u32);
    let leading = -cd * jet.p0 * (jet.gf[0] * b[0] + jet.gf[1] * b[1]);
    let constant = -gaussian_moment_ck(d as u32 + 1) * b0;
    let scale = cd * jet.p0.abs() * jet.grad_norm() * weight_mass;
    Ok(AsymptoticPrediction::from_parts(
        leading,
        constant,
        scale,
        jet.p0,
        PredictionKind::IntrinsicBlowUp,
    ))
}

/// Moments of the extrinsic expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtrinsicMoments {
    /// `B_M f = ∫ e^{Ψ₁} ⟨∇f, Θ⟩ dθ`.
    pub b_m: f64,
    /// `A_M f = ½ ∫ e^{Ψ₁} ∇²f(Θ, Θ) dθ`.
    pub a_m: f64,
    /// `r(p, f)_M = ∫ e^{Ψ₁} ⟨∇f, Θ⟩⟨∇p, Θ⟩ dθ`.
    pub r_m: f64,
}

pub fn extrinsic_moments(
    f: &ScalarField,
    p: &ScalarField,
    psi1: &AngularProfile,
    quad: &QuadratureSpec,
) -> Result<ExtrinsicMoments> {
    let jet = Jet::at_origin(f, p)?;
    let e = |th: f64| psi1.eval(th).exp();
    Ok(ExtrinsicMoments {
        b_m: sphere_integral(|th| e(th) * jet.grad_f(th), quad)?,
        a_m: 0.5 * sphere_integral(|th| e(th) * jet.hess_f(th), quad)?,
        r_m: sphere_integral(|th| e(th) * jet.grad_f(th) * jet.grad_p(th), quad)?,
    })
}

/// Prediction for the extrinsic operator: leading `−c_d p B_M f`, constant
/// `−c_{d+1}(p A_M f + r(p, f)_M)`.
pub fn extrinsic_prediction(
    f: &ScalarField,
    p: &ScalarField,
    psi1: &AngularProfile,
    d: usize,
    quad: &QuadratureSpec,
) -> Result<AsymptoticPrediction> {
    require_plane(d)?;
    let jet = Jet::at_origin(f, p)?;
    let m = extrinsic_moments(f, p, psi1, quad)?;
    let weight_mass = sphere_integral(|th| psi1.eval(th).exp(), quad)?;
    let cd = gaussian_moment_ck(d as u32);
    let leading = -cd * jet.p0 * m.b_m;
    let constant = -gaussian_moment_ck(d as u32 + 1) * (jet.p0 * m.a_m + m.r_m);
    let scale = cd * jet.p0.abs() * jet.grad_norm() * weight_mass;
    Ok(AsymptoticPrediction::from_parts(
        leading,
        constant,
        scale,
        jet.p0,
        PredictionKind::Extrinsic,
    ))
}

/// Least-squares line through `(log t, log |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub t_window: (f64, f64),
    pub used: usize,
}

/// Fits `log |L_t| ≈ slope · log t + intercept`.
///
/// Values that are zero or within ten quadrature error estimates of zero are
/// dropped. At least five remaining values with distinct `t` spanning two
/// decades are required.
pub fn rate_fit(values: &[LaplacianValue]) -> Result<RateFit> {
    let mut usable: Vec<&LaplacianValue> = Vec::with_capacity(values.len());
    for v in values {
        if !(v.t > 0.0) || !v.value.is_finite() {
            return Err(Error::Argument(format!(
                "bad sample (t = {}, value = {})",
                v.t, v.value
            )));
        }
        if v.value == 0.0 || v.value.abs() <= 10.0 * v.quad_err {
            warn!(
                "rate fit drops t = {:e}: value {:e} is within noise {:e}",
                v.t, v.value, v.quad_err
            );
            continue;
        }
        usable.push(v);
    }
    usable.sort_by(|a, b| a.t.total_cmp(&b.t));
    if usable.windows(2).any(|w| w[0].t == w[1].t) {
        return Err(Error::Argument("rate fit needs distinct bandwidths".into()));
    }
    if usable.len() < 5 {
        return Err(Error::Argument(format!(
            "rate fit needs at least 5 usable values, got {}",
            usable.len()
        )));
    }
    let (t_min, t_max) = (usable[0].t, usable[usable.len() - 1].t);
    if (t_max / t_min).log10() < 2.0 - 1e-9 {
        return Err(Error::Argument(format!(
            "bandwidths [{t_min:e}, {t_max:e}] span less than two decades"
        )));
    }
    let xs: Vec<f64> = usable.iter().map(|v| v.t.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|v| v.value.abs().ln()).collect();
    let (slope, intercept, r_squared) = least_squares(&xs, &ys);
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        t_window: (t_min, t_max),
        used: usable.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quad() -> QuadratureSpec {
        QuadratureSpec::new(512, 64, 1e-10).unwrap()
    }

    fn value(t: f64, v: f64) -> LaplacianValue {
        LaplacianValue {
            t,
            value: v,
            scaled: t.sqrt() * v,
            quad_err: 0.0,
            std_error: None,
            converged: true,
        }
    }

    /// Independent midpoint rule with many nodes.
    fn midpoint<F: Fn(f64) -> f64>(f: F) -> f64 {
        let n = 200_000;
        let h = 2.0 * PI / n as f64;
        (0..n).map(|j| f((j as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn interior_limit_examples() {
        let one = ScalarField::constant(1.0);
        assert!((interior_limit(&ScalarField::radial_square(), &one, 2) + PI).abs() < 1e-15);
        let lin = ScalarField::quadratic(0.0, [1.0, 0.0], [[0.0; 2]; 2]);
        assert_eq!(interior_limit(&lin, &ScalarField::constant(3.0), 2), 0.0);
        let p = ScalarField::quadratic(5.0, [1.0, 0.0], [[0.0; 2]; 2]);
        assert!((interior_limit(&lin, &p, 2) + PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn disk_moment_matches_table_value() {
        let psi = AngularProfile::log_cosine_scale(0.4);
        let l = AngularProfile::cosine_scale(0.4);
        let b = blow_up_moment(&psi, &l, &quad()).unwrap();
        let oracle = midpoint(|th| th.cos() / (1.0 + 0.4 * th.cos()));
        assert!((b[0] - oracle).abs() < 1e-10);
        assert!((b[0] + 1.4308).abs() < 5e-5, "{b:?}");
        assert!(b[1].abs() < 1e-12);

        let f = ScalarField::quadratic(0.0, [1.2, 0.7], [[0.1, 0.0], [0.0, -0.05]]);
        let pred =
            intrinsic_prediction(&f, &ScalarField::constant(1.0), &psi, &l, 2, &quad()).unwrap();
        assert!(
            (pred.scaled_limit() - 0.760824).abs() < 5e-7,
            "{}",
            pred.scaled_limit()
        );
        assert_eq!(pred.rate_exponent, -0.5);
        assert!(pred.nondegenerate);
        assert_eq!(pred.provenance, PredictionKind::IntrinsicBlowUp);
    }

    #[test]
    fn constant_factor_has_no_blow_up() {
        let f = ScalarField::quadratic(0.0, [1.2, 0.7], [[0.0; 2]; 2]);
        let pred = intrinsic_prediction(
            &f,
            &ScalarField::constant(1.0),
            &AngularProfile::constant(0.3),
            &AngularProfile::constant(1.0),
            2,
            &quad(),
        )
        .unwrap();
        assert!(pred.leading_coeff.abs() < 1e-14);
        assert_eq!(pred.rate_exponent, 0.0);
        assert!(!pred.nondegenerate);
    }

    #[test]
    fn counterexample_leading_coefficient() {
        let psi = AngularProfile::harmonic(2.0, 1, 0.0);
        let vol = 0.5 * midpoint(|th| (2.0 * th.cos()).exp());
        let f = ScalarField::quadratic(0.0, [1.0, 0.0], [[0.0; 2]; 2]);
        let p = ScalarField::constant(1.0 / vol);
        let m = extrinsic_moments(&f, &p, &psi, &quad()).unwrap();
        let oracle = midpoint(|th| th.cos() * (2.0 * th.cos()).exp());
        assert!((m.b_m - oracle).abs() < 1e-9);
        assert!((m.b_m - 9.994266).abs() < 1e-6);
        let pred = extrinsic_prediction(&f, &p, &psi, 2, &quad()).unwrap();
        assert!(
            (pred.leading_coeff + 0.618387).abs() < 1e-6,
            "{}",
            pred.leading_coeff
        );
    }

    #[test]
    fn extrinsic_flat_reduces_to_interior() {
        let fields = [
            (ScalarField::radial_square(), ScalarField::constant(1.0)),
            (
                ScalarField::quadratic(0.3, [1.0, -0.5], [[1.0, 0.4], [0.4, -2.0]]),
                ScalarField::quadratic(2.0, [0.7, 0.2], [[0.0; 2]; 2]),
            ),
        ];
        for (f, p) in fields {
            let pred =
                extrinsic_prediction(&f, &p, &AngularProfile::constant(0.0), 2, &quad()).unwrap();
            let lim = interior_limit(&f, &p, 2);
            assert!(
                (pred.constant_term - lim).abs() <= 1e-10 * lim.abs(),
                "{} vs {lim}",
                pred.constant_term
            );
            assert!(pred.leading_coeff.abs() < 1e-14);
        }
    }

    #[test]
    fn odd_test_function_has_vanishing_extrinsic_moment() {
        let f = ScalarField::quadratic(0.0, [0.0, 1.0], [[0.0; 2]; 2]);
        let m = extrinsic_moments(
            &f,
            &ScalarField::constant(1.0),
            &AngularProfile::harmonic(2.0, 1, 0.0),
            &quad(),
        )
        .unwrap();
        assert!(m.b_m.abs() <= 1e-12);
    }

    #[test]
    fn constant_f_predicts_nothing() {
        let f = ScalarField::constant(4.0);
        let p = ScalarField::quadratic(1.0, [0.5, 0.5], [[0.0; 2]; 2]);
        let pred = extrinsic_prediction(&f, &p, &AngularProfile::harmonic(2.0, 1, 0.0), 2, &quad())
            .unwrap();
        assert_eq!((pred.leading_coeff, pred.constant_term), (0.0, 0.0));
    }

    #[test]
    fn finite_difference_fields_agree() {
        let exact = ScalarField::quadratic(0.0, [1.2, 0.7], [[0.1, 0.0], [0.0, -0.05]]);
        let fd = {
            let e = exact.clone();
            ScalarField::from_value(move |x| e.value(x))
        };
        let p = ScalarField::constant(1.0);
        let psi = AngularProfile::log_cosine_scale(0.4);
        let l = AngularProfile::cosine_scale(0.4);
        let a = intrinsic_prediction(&exact, &p, &psi, &l, 2, &quad()).unwrap();
        let b = intrinsic_prediction(&fd, &p, &psi, &l, 2, &quad()).unwrap();
        assert!((a.leading_coeff - b.leading_coeff).abs() <= 1e-5 * a.leading_coeff.abs());
        assert!((a.constant_term - b.constant_term).abs() <= 1e-5 * a.constant_term.abs());
    }

    #[test]
    fn prediction_errors() {
        let f = ScalarField::radial_square();
        let p = ScalarField::constant(1.0);
        let zero = AngularProfile::constant(0.0);
        assert!(matches!(
            intrinsic_prediction(
                &f,
                &p,
                &zero,
                &AngularProfile::harmonic(1.0, 1, 0.0),
                2,
                &quad()
            ),
            Err(Error::Model(_))
        ));
        assert!(matches!(
            extrinsic_prediction(&f, &p, &zero, 3, &quad()),
            Err(Error::UnsupportedDimension(3))
        ));
    }

    #[test]
    fn ck_recurrence() {
        for d in 1..=8u32 {
            let lhs = gaussian_moment_ck(d + 1);
            let rhs = d as f64 / 2.0 * gaussian_moment_ck(d - 1);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs, "d={d}");
        }
    }

    #[test]
    fn rate_fit_exact_power_law() {
        let vals: Vec<_> = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4]
            .iter()
            .map(|&t| value(t, 7.0 / f64::sqrt(t)))
            .collect();
        let fit = rate_fit(&vals).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 7f64.ln()).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.t_window, (1e-4, 1e-2));
    }

    #[test]
    fn rate_fit_preconditions() {
        let four: Vec<_> = [1e-1, 1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&t| value(t, 1.0))
            .collect();
        assert!(rate_fit(&four).is_err());
        let narrow: Vec<_> = (0..6)
            .map(|i| value(1e-2 * (1.0 + i as f64), 1.0))
            .collect();
        assert!(rate_fit(&narrow).is_err());
        let mut with_zero: Vec<_> = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&t| value(t, 2.0))
            .collect();
        with_zero[2].value = 0.0;
        assert!(rate_fit(&with_zero).is_err());
        let mut noisy: Vec<_> = [1e-1, 3e-2, 1e-2, 1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&t| value(t, 2.0))
            .collect();
        noisy[0].quad_err = 1.0;
        let fit = rate_fit(&noisy).unwrap();
        assert_eq!(fit.used, 5);
        assert!(fit.slope.abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn rate_fit_recovers_power(c in 0.1..10.0f64, a in -1.0..1.0f64) {
            let vals: Vec<_> = (0..8).map(|i| {
                let t = 10f64.powf(-0.5 * i as f64);
                value(t, -c * t.powf(a))
            }).collect();
            let fit = rate_fit(&vals).unwrap();
            prop_assert!((fit.slope - a).abs() < 1e-10);
            prop_assert!((0.0..=1.0).contains(&fit.r_squared));
        }

        #[test]
        fn zero_leading_implies_nonnegative_rate(gy in -2.0..2.0f64, amp in 0.0..3.0f64) {
            // f depends on y only and Ψ₁ is even in θ, so B_M f vanishes.
            let f = ScalarField::quadratic(0.0, [0.0, gy], [[0.0; 2]; 2]);
            let pred = extrinsic_prediction(&f, &ScalarField::constant(1.0),
                &AngularProfile::harmonic(amp, 1, 0.0), 2, &quad()).unwrap();
            prop_assert!(pred.leading_coeff != 0.0 || pred.rate_exponent >= 0.0);
            prop_assert_eq!(pred.rate_exponent, 0.0);
        }
    }
}
