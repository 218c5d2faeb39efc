use std::fmt;
use std::sync::Arc;

/// A point of the plane chart, `[x, y]`.
pub type Point = [f64; 2];
/// A symmetric 2×2 matrix, row major.
pub type Hessian = [[f64; 2]; 2];

const GRAD_STEP: f64 = 1e-5;
const HESS_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldProvenance {
    ClosedForm,
    FiniteDifference,
}

type ValueFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
type HessFn = Arc<dyn Fn(Point) -> Hessian + Send + Sync>;

/// A scalar function on the plane with first and second derivatives.
///
/// Used for both the test function `f` and the sampling density `p`.
#[derive(Clone)]
pub struct ScalarField {
    value: ValueFn,
    gradient: GradFn,
    hessian: HessFn,
    provenance: FieldProvenance,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("provenance", &self.provenance)
            .finish()
    }
}

impl ScalarField {
    pub fn closed_form<V, G, H>(value: V, gradient: G, hessian: H) -> Self
    where
        V: Fn(Point) -> f64 + Send + Sync + 'static,
        G: Fn(Point) -> [f64; 2] + Send + Sync + 'static,
        H: Fn(Point) -> Hessian + Send + Sync + 'static,
    {
        ScalarField {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
            provenance: FieldProvenance::ClosedForm,
        }
    }

    /// Derivatives by central differences (step `1e-5` for the gradient,
    /// `1e-4` for the Hessian).
    pub fn from_value<V>(value: V) -> Self
    where
        V: Fn(Point) -> f64 + Send + Sync + 'static,
    {
        let value: ValueFn = Arc::new(value);
        let g = Arc::clone(&value);
        let h = Arc::clone(&value);
        ScalarField {
            gradient: Arc::new(move |p| central_gradient(&*g, p, GRAD_STEP)),
            hessian: Arc::new(move |p| central_hessian(&*h, p, HESS_STEP)),
            value,
            provenance: FieldProvenance::FiniteDifference,
        }
    }

    pub fn constant(c: f64) -> Self {
        ScalarField::quadratic(c, [0.0, 0.0], [[0.0, 0.0], [0.0, 0.0]])
    }

    /// `c + ⟨g, x⟩ + ½ xᵀ H x`.
    pub fn quadratic(c: f64, g: [f64; 2], hess: Hessian) -> Self {
        let hs = [
            [hess[0][0], 0.5 * (hess[0][1] + hess[1][0])],
            [0.5 * (hess[0][1] + hess[1][0]), hess[1][1]],
        ];
        ScalarField::closed_form(
            move |[x, y]| {
                c + g[0] * x
                    + g[1] * y
                    + 0.5 * (hs[0][0] * x * x + 2.0 * hs[0][1] * x * y + hs[1][1] * y * y)
            },
            move |[x, y]| {
                [
                    g[0] + hs[0][0] * x + hs[0][1] * y,
                    g[1] + hs[0][1] * x + hs[1][1] * y,
                ]
            },
            move |_| hs,
        )
    }

    /// `x² + y²`.
    pub fn radial_square() -> Self {
        ScalarField::quadratic(0.0, [0.0, 0.0], [[2.0, 0.0], [0.0, 2.0]])
    }

    pub fn provenance(&self) -> FieldProvenance {
        self.provenance
    }

    #[inline]
    pub fn value(&self, p: Point) -> f64 {
        (self.value)(p)
    }

    #[inline]
    pub fn gradient(&self, p: Point) -> [f64; 2] {
        (self.gradient)(p)
    }

    #[inline]
    pub fn hessian(&self, p: Point) -> Hessian {
        (self.hessian)(p)
    }

    /// Largest gradient mismatch against central differences of `value` over
    /// `probes`, measured relative to `max(|∇f|, 1)`.
    pub fn gradient_mismatch(&self, probes: &[Point]) -> f64 {
        probes
            .iter()
            .map(|&p| {
                let g = self.gradient(p);
                let fd = central_gradient(&*self.value, p, GRAD_STEP);
                let diff = (g[0] - fd[0]).hypot(g[1] - fd[1]);
                diff / g[0].hypot(g[1]).max(1.0)
            })
            .fold(0.0, f64::max)
    }
}

fn central_gradient(f: &(dyn Fn(Point) -> f64 + Send + Sync), [x, y]: Point, h: f64) -> [f64; 2] {
    [
        (f([x + h, y]) - f([x - h, y])) / (2.0 * h),
        (f([x, y + h]) - f([x, y - h])) / (2.0 * h),
    ]
}

fn central_hessian(f: &(dyn Fn(Point) -> f64 + Send + Sync), [x, y]: Point, h: f64) -> Hessian {
    let f0 = f([x, y]);
    let fxx = (f([x + h, y]) - 2.0 * f0 + f([x - h, y])) / (h * h);
    let fyy = (f([x, y + h]) - 2.0 * f0 + f([x, y - h])) / (h * h);
    let fxy = (f([x + h, y + h]) - f([x + h, y - h]) - f([x - h, y + h]) + f([x - h, y - h]))
        / (4.0 * h * h);
    [[fxx, fxy], [fxy, fyy]]
}
