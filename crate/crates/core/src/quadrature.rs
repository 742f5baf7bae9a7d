//! Double-exponential (tanh-sinh) quadrature.
//!
//! The rule maps `[a, b]` onto the real line through
//! `x = (a+b)/2 + (b−a)/2 · tanh(π/2 · sinh t)` and applies the trapezoidal
//! rule in `t`, halving the step each level. Nodes crowd doubly
//! exponentially towards both endpoints, which makes the rule tolerant of
//! integrable endpoint singularities such as `|x − a|^{-1/2}`.
//!
//! Node distances to the endpoints are generated directly (not as `b − x`),
//! so integrands that need them, like `1/√(cosh α − cosh y)` near `y = α`,
//! can be evaluated without cancellation through [`integrate_nodes`].
//!
//! The branch-cut helpers at the bottom evaluate the image-sum integrals
//! `∫₀^∞ e^{−a y²} e^{∓iβy} (cosh α − cosh y)^{−1/2} dy` by splitting at
//! `y = α`; on the far side the principal root of the negative argument
//! contributes a factor `∓i`.

use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the truncated `t` range.
const T_MAX: f64 = 4.0;
/// Hard ceiling on refinement levels; node tables are built up to here.
const LEVEL_CEILING: u32 = 16;
const MIN_LEVELS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_levels: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_levels: 12,
        }
    }
}

impl QuadratureSpec {
    pub fn new(rel_tol: f64, abs_tol: f64, max_levels: u32) -> Result<Self> {
        let spec = Self {
            rel_tol,
            abs_tol,
            max_levels,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::domain("quadrature tolerances must be positive"));
        }
        if !(MIN_LEVELS..=LEVEL_CEILING).contains(&self.max_levels) {
            return Err(Error::domain(format!(
                "max_levels must lie in [{MIN_LEVELS}, {LEVEL_CEILING}], got {}",
                self.max_levels
            )));
        }
        Ok(())
    }

    /// Distance beyond a Gaussian centre after which `e^{−rate·y²}` drops
    /// below `abs_tol`, doubled as a guard.
    pub fn tail_cutoff(&self, rate: f64) -> f64 {
        2.0 * ((1.0 / self.abs_tol).ln() / rate).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadResult<T = f64> {
    pub value: T,
    /// Absolute difference between the last two refinement levels.
    pub err_estimate: f64,
    pub evaluations: usize,
}

impl QuadResult<f64> {
    fn zero() -> Self {
        Self {
            value: 0.0,
            err_estimate: 0.0,
            evaluations: 0,
        }
    }
}

/// Values the engine can accumulate.
pub trait QuadValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(self) -> f64;
    fn real_part(self) -> f64;
}

impl QuadValue for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn real_part(self) -> f64 {
        self
    }
}

impl QuadValue for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn real_part(self) -> f64 {
        self.re
    }
}

/// A quadrature abscissa with its distances to both interval ends.
#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub x: f64,
    pub from_a: f64,
    pub from_b: f64,
}

/// Positive-`t` half of the rule on `[−1, 1]`: weight and `1 − |x|`.
#[derive(Debug, Clone, Copy)]
struct RefNode {
    weight: f64,
    complement: f64,
}

struct Level {
    /// Weight of the `t = 0` node; only present on level 0.
    centre: Option<f64>,
    nodes: Vec<RefNode>,
}

fn ref_node(t: f64) -> RefNode {
    let s = std::f64::consts::FRAC_PI_2 * t.sinh();
    let e = (-2.0 * s).exp();
    let denom = 1.0 + e;
    RefNode {
        weight: std::f64::consts::FRAC_PI_2 * t.cosh() * 4.0 * e / (denom * denom),
        complement: 2.0 * e / denom,
    }
}

fn levels() -> &'static [Level] {
    static TABLE: OnceLock<Vec<Level>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..=LEVEL_CEILING)
            .map(|level| {
                let h = 0.5f64.powi(level as i32);
                let (first, step) = if level == 0 { (1usize, 1usize) } else { (1, 2) };
                let count = (T_MAX / h).floor() as usize;
                let nodes = (first..=count)
                    .step_by(step)
                    .map(|k| ref_node(k as f64 * h))
                    .filter(|n| n.complement > 0.0 && n.weight > 0.0)
                    .collect();
                Level {
                    centre: (level == 0).then(|| ref_node(0.0).weight),
                    nodes,
                }
            })
            .collect()
    })
}

/// Integrates `f` over `[a, b]`, passing each abscissa with its endpoint
/// distances. The core routine behind every other entry point.
pub fn integrate_nodes<T, F>(
    mut f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<QuadResult<T>>
where
    T: QuadValue,
    F: FnMut(Node) -> T,
{
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain(format!(
            "integration bounds must be finite, got [{a}, {b}]"
        )));
    }
    if !(a < b) {
        if a == b {
            return Ok(QuadResult {
                value: T::default(),
                err_estimate: 0.0,
                evaluations: 0,
            });
        }
        return Err(Error::domain(format!(
            "integration bounds out of order: [{a}, {b}]"
        )));
    }

    let half = 0.5 * (b - a);
    let width = b - a;
    let mut sum = T::default();
    let mut evaluations = 0usize;
    let mut previous: Option<T> = None;
    let mut last_diff = f64::INFINITY;

    for (level, table) in levels()
        .iter()
        .enumerate()
        .take(spec.max_levels as usize + 1)
    {
        if let Some(w) = table.centre {
            sum = sum
                + f(Node {
                    x: a + half,
                    from_a: half,
                    from_b: half,
                }) * w;
            evaluations += 1;
        }
        for node in &table.nodes {
            let d = half * node.complement;
            if d == 0.0 || d >= width {
                continue;
            }
            let left = f(Node {
                x: a + d,
                from_a: d,
                from_b: width - d,
            });
            let right = f(Node {
                x: b - d,
                from_a: width - d,
                from_b: d,
            });
            sum = sum + (left + right) * node.weight;
            evaluations += 2;
        }

        let h = 0.5f64.powi(level as i32);
        let estimate = sum * (h * half);
        if let Some(prev) = previous {
            last_diff = (estimate - prev).magnitude();
            let tol = spec.abs_tol.max(spec.rel_tol * estimate.magnitude());
            if level as u32 >= MIN_LEVELS && last_diff <= tol {
                return Ok(QuadResult {
                    value: estimate,
                    err_estimate: last_diff,
                    evaluations,
                });
            }
            if !last_diff.is_finite() {
                break;
            }
        }
        previous = Some(estimate);
    }

    let best = previous.unwrap_or_default();
    Err(Error::Quadrature {
        value: best.real_part(),
        err_estimate: last_diff,
        levels: spec.max_levels,
    })
}

/// `∫_a^b f(x) dx`. Tolerates integrable endpoint singularities; nodes that
/// round onto an endpoint are skipped.
pub fn integrate_finite<F>(mut f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    integrate_nodes(
        |node: Node| {
            if node.x <= a || node.x >= b {
                0.0
            } else {
                f(node.x)
            }
        },
        a,
        b,
        spec,
    )
}

/// Gaussian envelope `|f(y)| ≤ C e^{−rate (y − centre)²}` used to place the
/// truncation point of a half-line integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTail {
    pub rate: f64,
    pub centre: f64,
}

impl GaussianTail {
    pub fn new(rate: f64, centre: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::domain(format!(
                "Gaussian decay rate must be positive, got {rate}"
            )));
        }
        Ok(Self { rate, centre })
    }

    /// Upper limit beyond which the envelope is below `spec.abs_tol`.
    pub fn cutoff(&self, start: f64, spec: &QuadratureSpec) -> f64 {
        start.max(self.centre) + spec.tail_cutoff(self.rate)
    }
}

/// `∫_a^∞ f(x) dx` for integrands with Gaussian damping, truncated where the
/// envelope falls below `abs_tol`.
pub fn integrate_semi_infinite<F>(
    f: F,
    a: f64,
    tail: GaussianTail,
    spec: &QuadratureSpec,
) -> Result<QuadResult>
where
    F: FnMut(f64) -> f64,
{
    integrate_finite(f, a, tail.cutoff(a, spec), spec)
}

/// Node-aware variant of [`integrate_semi_infinite`].
pub fn integrate_semi_infinite_nodes<T, F>(
    f: F,
    a: f64,
    tail: GaussianTail,
    spec: &QuadratureSpec,
) -> Result<QuadResult<T>>
where
    T: QuadValue,
    F: FnMut(Node) -> T,
{
    integrate_nodes(f, a, tail.cutoff(a, spec), spec)
}

/// `ln(2 sinh u)` for `u > 0`, finite for arguments where `sinh` overflows.
fn ln_two_sinh(u: f64) -> f64 {
    if u > 20.0 {
        u + (-(-2.0 * u).exp()).ln_1p()
    } else {
        (2.0 * u.sinh()).ln()
    }
}

/// `e^{−damp} / √|cosh α − cosh y|` for `y ≥ 0`, `α ≥ 0`, using the product
/// form `|cosh α − cosh y| = 2 sinh((α+y)/2) sinh(|α−y|/2)` with the
/// separation `|α − y|` supplied exactly.
pub fn damped_inverse_root(alpha: f64, y: f64, separation: f64, damp: f64) -> f64 {
    let sum_half = 0.5 * (alpha + y);
    let diff_half = 0.5 * separation;
    // 2 sinh(u) sinh(v) = (2 sinh u)(2 sinh v) / 2
    let ln_prod = ln_two_sinh(sum_half) + ln_two_sinh(diff_half) - std::f64::consts::LN_2;
    (-damp - 0.5 * ln_prod).exp()
}

/// Trigonometric weight in a branch-cut integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Cos,
    Sin,
}

impl Trig {
    fn eval(self, x: f64) -> f64 {
        match self {
            Trig::Cos => x.cos(),
            Trig::Sin => x.sin(),
        }
    }
}

/// `∫₀^α e^{−a y²} trig(β y) / √(cosh α − cosh y) dy`.
pub fn branchcut_inner(
    alpha: f64,
    damping: f64,
    freq: f64,
    trig: Trig,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    check_branchcut_args(alpha, damping)?;
    integrate_nodes(
        |node: Node| {
            // The singular end is y = α, i.e. the b end of [0, α].
            let y = node.x;
            trig.eval(freq * y) * damped_inverse_root(alpha, y, node.from_b, damping * y * y)
        },
        0.0,
        alpha,
        spec,
    )
}

/// `∫_α^∞ e^{−a y²} trig(β y) / √(cosh y − cosh α) dy`.
pub fn branchcut_outer(
    alpha: f64,
    damping: f64,
    freq: f64,
    trig: Trig,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    check_branchcut_args(alpha, damping)?;
    let tail = GaussianTail::new(damping, 0.0)?;
    if damping * alpha * alpha > 800.0 {
        // The whole integrand sits below the smallest positive double.
        return Ok(QuadResult::zero());
    }
    // Beyond the branch point the kernel also decays like e^{−y/2}, which
    // bounds the range when the Gaussian is weak.
    let upper = tail
        .cutoff(alpha, spec)
        .min(alpha + exponential_cutoff(spec));
    integrate_nodes(
        |node: Node| {
            let y = node.x;
            trig.eval(freq * y) * damped_inverse_root(alpha, y, node.from_a, damping * y * y)
        },
        alpha,
        upper,
        spec,
    )
}

/// Length after which `e^{−y/2}` has fallen below `abs_tol`, with one unit of
/// margin for the `1/√(1 − e^{α−y})` factor near the branch point.
pub fn exponential_cutoff(spec: &QuadratureSpec) -> f64 {
    2.0 * (std::f64::consts::SQRT_2 / spec.abs_tol).ln() + 1.0
}

fn check_branchcut_args(alpha: f64, damping: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!(
            "branch-cut integral needs a positive branch point, got α = {alpha}"
        )));
    }
    if !(damping > 0.0 && damping.is_finite()) {
        return Err(Error::domain(format!(
            "branch-cut integral needs positive Gaussian damping, got {damping}"
        )));
    }
    Ok(())
}

fn combine(parts: &[QuadResult], signs: &[f64]) -> QuadResult {
    let mut out = QuadResult::zero();
    for (p, s) in parts.iter().zip(signs) {
        out.value += s * p.value;
        out.err_estimate += p.err_estimate;
        out.evaluations += p.evaluations;
    }
    out
}

/// `Re ∫₀^∞ e^{−a y²} e^{−iβy} (cosh α − cosh y + i0)^{−1/2} dy`.
///
/// Below the branch point the root is real; above it the principal root of
/// the negative argument is `i√(cosh y − cosh α)`, so the real part picks up
/// `−sin(βy)` there.
pub fn integrate_branchcut(
    alpha: f64,
    damping: f64,
    freq: f64,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    let inner = branchcut_inner(alpha, damping, freq, Trig::Cos, spec)?;
    let outer = branchcut_outer(alpha, damping, freq, Trig::Sin, spec)?;
    Ok(combine(&[inner, outer], &[1.0, -1.0]))
}

/// Time-ordered variant: `∫₀^∞ e^{−a y²} cos(βy) (cosh α − cosh y − i0)^{−1/2} dy`.
///
/// The `−i0` prescription makes the root `−i√(cosh y − cosh α)` beyond the
/// branch point, so the result is `inner + i·outer`.
pub fn integrate_branchcut_ordered(
    alpha: f64,
    damping: f64,
    freq: f64,
    spec: &QuadratureSpec,
) -> Result<QuadResult<Complex64>> {
    let inner = branchcut_inner(alpha, damping, freq, Trig::Cos, spec)?;
    let outer = branchcut_outer(alpha, damping, freq, Trig::Cos, spec)?;
    Ok(QuadResult {
        value: Complex64::new(inner.value, outer.value),
        err_estimate: inner.err_estimate + outer.err_estimate,
        evaluations: inner.evaluations + outer.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn polynomials_are_exact() {
        for degree in 0..=6 {
            let r = integrate_finite(|x| x.powi(degree), 0.0, 1.0, &spec()).unwrap();
            let exact = 1.0 / (degree as f64 + 1.0);
            assert!(
                (r.value - exact).abs() < 1e-12,
                "degree {degree}: {}",
                r.value
            );
        }
    }

    #[test]
    fn sine_over_half_period() {
        let r = integrate_finite(f64::sin, 0.0, PI, &spec()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn inverse_root_endpoint() {
        let r = integrate_nodes(|n: Node| 1.0 / n.from_b.sqrt(), 0.0, 1.0, &spec()).unwrap();
        assert!((r.value - 2.0).abs() < 2e-10, "{}", r.value);
        // Plain abscissae lose the nodes that round onto the endpoint.
        let plain = integrate_finite(|y| 1.0 / (1.0 - y).sqrt(), 0.0, 1.0, &spec());
        let value = match plain {
            Ok(r) => r.value,
            Err(Error::Quadrature { value, .. }) => value,
            Err(e) => panic!("{e}"),
        };
        assert!((value - 2.0).abs() < 1e-7, "{value}");
    }

    #[test]
    fn half_gaussian() {
        let tail = GaussianTail::new(1.0, 0.0).unwrap();
        let r = integrate_semi_infinite(|y| (-y * y).exp(), 0.0, tail, &spec()).unwrap();
        assert!((r.value - PI.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_cosine() {
        let tail = GaussianTail::new(1.0, 0.0).unwrap();
        let r = integrate_semi_infinite(|y| (-y * y).exp() * (2.0 * y).cos(), 0.0, tail, &spec())
            .unwrap();
        let exact = PI.sqrt() / 2.0 * (-1f64).exp();
        assert!((r.value - exact).abs() < 1e-12);
    }

    #[test]
    fn refinement_differences_shrink() {
        // Smooth integrand: per-level estimates converge faster than 1/4 per level.
        let f = |x: f64| (x * 3.0).cos() * (-x).exp();
        let exact = {
            // ∫₀² e^{−x} cos 3x dx
            let e = (-2.0f64).exp();
            (1.0 - e * ((6.0f64).cos() - 3.0 * (6.0f64).sin())) / 10.0
        };
        let mut diffs = Vec::new();
        let mut prev = None;
        for levels in MIN_LEVELS..=8 {
            let s = QuadratureSpec::new(1e-300, 1e-300, levels).unwrap();
            let value = match integrate_finite(f, 0.0, 2.0, &s) {
                Ok(r) => r.value,
                Err(Error::Quadrature { value, .. }) => value,
                Err(e) => panic!("{e}"),
            };
            if let Some(p) = prev {
                diffs.push(((value - p) as f64).abs());
            }
            prev = Some(value);
        }
        assert!((prev.unwrap() - exact).abs() < 1e-13);
        // Level 4 onwards: once the differences are above roundoff they drop fast.
        for w in diffs.windows(2) {
            if w[0] > 1e-14 {
                assert!(w[1] < 0.25 * w[0], "{diffs:?}");
            }
        }
    }

    #[test]
    fn reversed_bounds_are_rejected() {
        assert!(integrate_finite(|x| x, 1.0, 0.0, &spec()).is_err());
        assert_eq!(
            integrate_finite(|x| x, 1.0, 1.0, &spec()).unwrap().value,
            0.0
        );
    }

    #[test]
    fn non_convergence_reports_best_estimate() {
        let s = QuadratureSpec::new(1e-15, 1e-300, 3).unwrap();
        let err = integrate_finite(|x| (40.0 * x).sin() / x.sqrt(), 0.0, 10.0, &s).unwrap_err();
        assert!(matches!(err, Error::Quadrature { levels: 3, .. }));
    }

    #[test]
    fn branchcut_rejects_nonpositive_alpha() {
        assert!(integrate_branchcut(0.0, 1.0, 1.0, &spec()).is_err());
        assert!(integrate_branchcut(-1.0, 1.0, 1.0, &spec()).is_err());
        assert!(integrate_branchcut(1.0, 0.0, 1.0, &spec()).is_err());
    }

    #[test]
    fn branchcut_inner_matches_plain_rule() {
        let alpha = 1.0;
        let inner = branchcut_inner(alpha, 0.3, 0.0, Trig::Cos, &spec()).unwrap();
        let plain = integrate_nodes(
            |n: Node| {
                let d = alpha.cosh() - n.x.cosh();
                if d > 0.0 {
                    (-0.3 * n.x * n.x).exp() / d.sqrt()
                } else {
                    0.0
                }
            },
            0.0,
            alpha,
            &QuadratureSpec::new(1e-9, 1e-14, 12).unwrap(),
        );
        let value = match plain {
            Ok(r) => r.value,
            Err(Error::Quadrature { value, .. }) => value,
            Err(e) => panic!("{e}"),
        };
        assert!(
            (inner.value - value).abs() < 1e-7,
            "{} vs {value}",
            inner.value
        );
    }

    #[test]
    fn branchcut_decreases_with_damping() {
        let mut last = f64::INFINITY;
        for a in [1.0, 10.0, 100.0] {
            let v = integrate_branchcut(1.0, a, 0.0, &spec()).unwrap().value;
            assert!(v < last, "a = {a}: {v} !< {last}");
            last = v;
        }
    }

    #[test]
    fn damped_inverse_root_survives_large_arguments() {
        let v = damped_inverse_root(5.0, 1300.0, 1295.0, 0.0);
        assert!(v.is_finite() && v > 0.0);
        assert_eq!(damped_inverse_root(5.0, 3000.0, 2995.0, 0.0), 0.0);
        let near = damped_inverse_root(2.0, 2.0 - 1e-30, 1e-30, 0.0);
        assert!(near.is_finite());
    }
}
