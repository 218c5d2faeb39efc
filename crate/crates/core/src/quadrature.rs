//! Deterministic integration primitives.
//!
//! Angular integrals use the periodic trapezoid rule, which converges
//! geometrically for smooth periodic integrands. Radial integrals use
//! Gauss–Legendre nodes on a finite interval. Every reported integral carries
//! an error estimate obtained by repeating the computation with twice as many
//! nodes in each direction.
//!
//! Summation is done in a fixed order (row sums, then a pairwise tree over
//! rows) so results are bit-identical regardless of how many worker threads
//! rayon uses.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Node counts for a tensor-product polar rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Uniform nodes on `[0, 2π)`. Even and at least 16.
    pub n_theta: usize,
    /// Gauss–Legendre nodes on the radial interval. At least 8.
    pub n_r: usize,
    /// Relative tolerance used to flag non-convergence.
    pub target_rel_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            n_theta: 512,
            n_r: 2000,
            target_rel_tol: 1e-8,
        }
    }
}

impl QuadratureSpec {
    pub fn new(n_theta: usize, n_r: usize, target_rel_tol: f64) -> Result<Self> {
        let spec = QuadratureSpec {
            n_theta,
            n_r,
            target_rel_tol,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_theta < 16 || !self.n_theta.is_multiple_of(2) {
            return Err(Error::Argument(format!(
                "n_theta must be even and >= 16, got {}",
                self.n_theta
            )));
        }
        if self.n_r < 8 {
            return Err(Error::Argument(format!(
                "n_r must be >= 8, got {}",
                self.n_r
            )));
        }
        if !(self.target_rel_tol > 0.0) {
            return Err(Error::Argument("target_rel_tol must be positive".into()));
        }
        Ok(())
    }

    /// The same rule with both node counts doubled.
    pub fn refined(&self) -> Self {
        QuadratureSpec {
            n_theta: 2 * self.n_theta,
            n_r: 2 * self.n_r,
            target_rel_tol: self.target_rel_tol,
        }
    }
}

/// How far out the radial integral of a Gaussian-kernel operator is carried.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationPolicy {
    FixedRadius(f64),
    /// Radius `t^η`, with `η ∈ (1/4, 1/2)`.
    BandwidthPower(f64),
    /// Radius `c·√t`.
    BandwidthMultiple(f64),
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TruncationPolicy::FixedRadius(r) if !(r > 0.0) => Err(Error::Argument(format!(
                "fixed truncation radius must be positive, got {r}"
            ))),
            TruncationPolicy::BandwidthPower(eta) if !(eta > 0.25 && eta < 0.5) => {
                Err(Error::TruncationExponent {
                    eta,
                    range: "(1/4, 1/2)",
                })
            }
            TruncationPolicy::BandwidthMultiple(c) if !(c > 0.0) => Err(Error::Argument(format!(
                "bandwidth multiple must be positive, got {c}"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for TruncationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TruncationPolicy::FixedRadius(r) => write!(f, "fixed:{r}"),
            TruncationPolicy::BandwidthPower(eta) => write!(f, "power:{eta}"),
            TruncationPolicy::BandwidthMultiple(c) => write!(f, "mult:{c}"),
        }
    }
}

impl FromStr for TruncationPolicy {
    type Err = Error;

    /// Parses `fixed:R`, `power:η` or `mult:c`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, num) = s.split_once(':').ok_or_else(|| {
            Error::Argument(format!("truncation `{s}` is not of the form kind:value"))
        })?;
        let x: f64 = num
            .trim()
            .parse()
            .map_err(|_| Error::Argument(format!("truncation value `{num}` is not a number")))?;
        let policy = match kind.trim() {
            "fixed" => TruncationPolicy::FixedRadius(x),
            "power" => TruncationPolicy::BandwidthPower(x),
            "mult" => TruncationPolicy::BandwidthMultiple(x),
            other => {
                return Err(Error::Argument(format!(
                    "unknown truncation kind `{other}` (expected fixed, power or mult)"
                )))
            }
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// Radius at which the Gaussian kernel of bandwidth `t` is cut off.
pub fn truncation_radius(t: f64, policy: &TruncationPolicy) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "bandwidth must be positive, got {t}"
        )));
    }
    policy.validate()?;
    Ok(match *policy {
        TruncationPolicy::FixedRadius(r) => r,
        TruncationPolicy::BandwidthPower(eta) => t.powf(eta),
        TruncationPolicy::BandwidthMultiple(c) => c * t.sqrt(),
    })
}

/// Sum in a balanced binary tree. The association order depends only on the
/// slice length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes for an `n`-point rule, cached per `n`.
    pub fn get(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(rule) = cache.lock().unwrap().get(&n) {
            return Arc::clone(rule);
        }
        let rule = Arc::new(GaussLegendre::compute(n));
        cache.lock().unwrap().insert(n, Arc::clone(&rule));
        rule
    }

    fn compute(n: usize) -> GaussLegendre {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[m - 1] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let xs = self.nodes.iter().map(|&x| mid + half * x).collect();
        let ws = self.weights.iter().map(|&w| half * w).collect();
        (xs, ws)
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Result of a refined quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    /// Value from the refined rule.
    pub value: f64,
    /// `|refined − base|`.
    pub err_est: f64,
    /// Refined-rule integral of `|integrand|`; the scale used to judge
    /// convergence when the value itself cancels to zero.
    pub abs_mass: f64,
}

impl Integral {
    pub fn converged(&self, rel_tol: f64) -> bool {
        self.err_est <= rel_tol * self.abs_mass + f64::MIN_POSITIVE
    }
}

fn polar_once<F>(
    integrand: &F,
    r_lo: f64,
    r_hi: f64,
    n_theta: usize,
    n_r: usize,
) -> Result<(f64, f64)>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let gl = GaussLegendre::get(n_r);
    let (rs, wr) = gl.on_interval(r_lo, r_hi);
    let h = 2.0 * PI / n_theta as f64;
    let rows: Vec<Result<(f64, f64)>> = (0..n_theta)
        .into_par_iter()
        .map(|j| {
            let theta = j as f64 * h;
            let mut s = 0.0;
            let mut a = 0.0;
            for (&r, &w) in rs.iter().zip(&wr) {
                let v = integrand(r, theta);
                if !v.is_finite() {
                    return Err(Error::NonFiniteIntegrand { r, theta });
                }
                s += w * v;
                a += w * v.abs();
            }
            Ok((s, a))
        })
        .collect();
    let mut sums = Vec::with_capacity(n_theta);
    let mut abs = Vec::with_capacity(n_theta);
    for row in rows {
        let (s, a) = row?;
        sums.push(s);
        abs.push(a);
    }
    Ok((h * pairwise_sum(&sums), h * pairwise_sum(&abs)))
}

/// `∫₀^{2π} ∫_{r_lo}^{r_hi} integrand(r, θ) dr dθ`.
///
/// The integrand must already contain any Jacobian factor (e.g. `r`).
pub fn integrate_polar<F>(
    integrand: F,
    r_lo: f64,
    r_hi: f64,
    spec: &QuadratureSpec,
) -> Result<Integral>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    spec.validate()?;
    if !(r_lo >= 0.0 && r_hi > r_lo && r_hi.is_finite()) {
        return Err(Error::Argument(format!(
            "radial interval must satisfy 0 <= r_lo < r_hi < inf, got ({r_lo}, {r_hi})"
        )));
    }
    let (base, _) = polar_once(&integrand, r_lo, r_hi, spec.n_theta, spec.n_r)?;
    let fine = spec.refined();
    let (value, abs_mass) = polar_once(&integrand, r_lo, r_hi, fine.n_theta, fine.n_r)?;
    Ok(Integral {
        value,
        err_est: (value - base).abs(),
        abs_mass,
    })
}

fn periodic_once<F: Fn(f64) -> f64>(f: &F, n: usize) -> Result<(f64, f64)> {
    let h = 2.0 * PI / n as f64;
    let mut vals = Vec::with_capacity(n);
    let mut abs = Vec::with_capacity(n);
    for j in 0..n {
        let theta = j as f64 * h;
        let v = f(theta);
        if !v.is_finite() {
            return Err(Error::NonFiniteIntegrand { r: f64::NAN, theta });
        }
        vals.push(v);
        abs.push(v.abs());
    }
    Ok((h * pairwise_sum(&vals), h * pairwise_sum(&abs)))
}

/// `∫₀^{2π} f(θ) dθ` by the periodic trapezoid rule with `n` and `2n` nodes.
pub fn integrate_periodic<F: Fn(f64) -> f64>(f: F, n: usize) -> Result<Integral> {
    if n < 2 {
        return Err(Error::Argument(
            "periodic rule needs at least 2 nodes".into(),
        ));
    }
    let (base, _) = periodic_once(&f, n)?;
    let (value, abs_mass) = periodic_once(&f, 2 * n)?;
    Ok(Integral {
        value,
        err_est: (value - base).abs(),
        abs_mass,
    })
}

/// `∫_a^b f(x) dx` by Gauss–Legendre with `n` and `2n` nodes.
pub fn integrate_interval<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> Result<Integral> {
    let once = |m: usize| -> Result<(f64, f64)> {
        let (xs, ws) = GaussLegendre::get(m).on_interval(a, b);
        let mut vals = Vec::with_capacity(m);
        let mut abs = Vec::with_capacity(m);
        for (&x, &w) in xs.iter().zip(&ws) {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFiniteIntegrand {
                    r: x,
                    theta: f64::NAN,
                });
            }
            vals.push(w * v);
            abs.push(w * v.abs());
        }
        Ok((pairwise_sum(&vals), pairwise_sum(&abs)))
    };
    let (base, _) = once(n)?;
    let (value, abs_mass) = once(2 * n)?;
    Ok(Integral {
        value,
        err_est: (value - base).abs(),
        abs_mass,
    })
}

/// Lower incomplete gamma function `γ(a, x) = ∫₀^x u^{a−1} e^{−u} du`.
///
/// Uses the power series for `x < a + 1` and the Lentz continued fraction
/// for the upper function otherwise.
pub fn lower_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!(
            "incomplete gamma needs a > 0, got {a}"
        )));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!(
            "incomplete gamma needs x >= 0, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let gamma_a = statrs::function::gamma::gamma(a);
    if x.is_infinite() {
        return Ok(gamma_a);
    }
    let log_prefactor = a * x.ln() - x;
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        Ok(sum * log_prefactor.exp())
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-17 {
                break;
            }
        }
        let upper = log_prefactor.exp() * h;
        Ok(gamma_a - upper)
    }
}

/// Gaussian radial moment `c_k = ∫₀^∞ e^{−r²} r^k dr = ½Γ((k+1)/2)`.
pub fn gaussian_moment_ck(k: u32) -> f64 {
    0.5 * statrs::function::gamma::gamma((k as f64 + 1.0) / 2.0)
}
