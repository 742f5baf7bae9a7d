//! Closed-form detector observables as single-integral image series.
//!
//! With Gaussian switching of unit width the double proper-time integrals
//! reduce to one-dimensional integrals per image. Per λ̃², and writing
//! `B(α) = ∫₀^α e^{−a y²}cos(βy)/√(cosh α − cosh y) − ∫_α^∞ e^{−a y²}sin(βy)/√(cosh y − cosh α)`:
//!
//! ```text
//! P_BTZ = (1/√2π) { √(π/2) ∫ e^{−(Ω−y)²}/(e^{y/T}+1) dy − (ζ/2) B(α⁺₀)
//!                   + Σ_{n≥1} [B(α⁻ₙ) − ζ B(α⁺ₙ)] }
//! Δ_P   = e^{−Ω²}/(4√2π) Σ_{n∈ℤ} ∫_ℝ e^{−a y²} [(Z⁻ₙ + cosh y)^{−1/2} − ζ (Z⁺ₙ + cosh y)^{−1/2}] dy
//! ```
//!
//! and analogous sums for the correlation term `X`, whose BTZ part is
//! complex because the time-ordered kernel continues across the branch
//! point with a cosine weight on both sides.
//!
//! The `n ≥ 1` sum in `P_BTZ` already counts `±n` together; `Z` and `α`
//! depend only on `|n|`.

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};
use crate::geometry::{DetectorConfig, DetectorPair, Family, SpacetimeParams};
use crate::quadrature::{
    self, exponential_cutoff, integrate_finite, integrate_nodes, GaussianTail, Node, QuadResult,
    QuadValue, QuadratureSpec,
};

const INV_SQRT_TWO_PI: f64 = 0.398_942_280_401_432_7;
const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Numerical controls for the closed-form evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    pub quad: QuadratureSpec,
    /// Image series stop once the geometric tail bound falls below this
    /// fraction of the running sum.
    pub series_rel_tol: f64,
    pub series_abs_tol: f64,
    /// Hard cap on `|n|`.
    pub max_images: usize,
}

impl Default for EvalSpec {
    fn default() -> Self {
        Self {
            quad: QuadratureSpec::default(),
            series_rel_tol: 1e-10,
            series_abs_tol: 1e-16,
            max_images: 5000,
        }
    }
}

impl EvalSpec {
    pub fn validate(&self) -> Result<()> {
        self.quad.validate()?;
        if !(self.series_rel_tol > 0.0 && self.series_abs_tol > 0.0) {
            return Err(Error::Config("series tolerances must be positive".into()));
        }
        if self.max_images == 0 {
            return Err(Error::Config("max_images must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which kernel of the image bracket a term comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    /// The `n = 0` Fermi-factor integral of `P_BTZ`.
    Thermal,
    /// `(cosh α⁻ − cosh y)^{−1/2}`-type kernel.
    Minus,
    /// `ζ`-weighted `(cosh α⁺ − cosh y)^{−1/2}`-type kernel.
    Plus,
    /// Both geon kernels integrated together, `ζ ≠ 0` only.
    Bracket,
}

impl TermKind {
    /// Whether the term exists only because `ζ ≠ 0`.
    pub fn is_zeta_term(self) -> bool {
        matches!(self, TermKind::Plus | TermKind::Bracket)
    }
}

/// One evaluated image contribution, already weighted by `ζ`, the image
/// multiplicity and the series prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImageTerm<T> {
    pub n: i64,
    pub kind: TermKind,
    pub value: T,
    pub err_estimate: f64,
}

/// A truncated image series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesResult<T> {
    pub value: T,
    /// Quadrature errors plus the geometric tail bound.
    pub err_estimate: f64,
    /// Largest `|n|` (or `n + 1` for half-integer images) included.
    pub n_max: usize,
    pub terms: Vec<ImageTerm<T>>,
}

impl<T: QuadValue> SeriesResult<T> {
    /// Sum of all terms of one `n`, in evaluation order.
    pub fn image_magnitudes(&self) -> Vec<(i64, f64)> {
        let mut out: Vec<(i64, T)> = Vec::new();
        for t in &self.terms {
            match out.last_mut() {
                Some((n, v)) if *n == t.n => *v = *v + t.value,
                _ => out.push((t.n, t.value)),
            }
        }
        out.into_iter().map(|(n, v)| (n, v.magnitude())).collect()
    }

    pub fn count(&self, kind: TermKind) -> usize {
        self.terms.iter().filter(|t| t.kind == kind).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Minus,
    Plus,
}

/// `arccosh(1 + x)` without cancellation for small `x`.
fn acosh_1p(x: f64) -> f64 {
    if x > 1e8 {
        (2.0 * (1.0 + x)).ln()
    } else {
        (x + (x * (x + 2.0)).sqrt()).ln_1p()
    }
}

/// `2 sinh²(u)` = `cosh(2u) − 1`.
fn two_sinh_sq(u: f64) -> f64 {
    let s = u.sinh();
    2.0 * s * s
}

/// Parameters of the single-detector integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PTermParams {
    /// Local KMS temperature parameter `T`.
    pub temperature: f64,
    /// Gaussian damping `a_P`.
    pub damping: f64,
    /// Oscillation frequency `β_P`.
    pub freq: f64,
    gap: f64,
    radius_sq: f64,
    excess_sq: f64,
    rh_sq: f64,
    sqrt_mass: f64,
}

impl PTermParams {
    pub fn new(d: &DetectorConfig, p: &SpacetimeParams) -> Result<Self> {
        let rh = p.horizon_radius();
        let ell = p.ads_length();
        let s = d.radial_excess(p);
        if !(s > 0.0) {
            return Err(Error::domain("detector sits on the horizon"));
        }
        Ok(Self {
            temperature: rh / (2.0 * std::f64::consts::PI * ell * s),
            damping: s * s * ell * ell / (4.0 * rh * rh),
            freq: d.gap() * s * ell / rh,
            gap: d.gap(),
            radius_sq: d.radius() * d.radius(),
            excess_sq: s * s,
            rh_sq: rh * rh,
            sqrt_mass: p.sqrt_mass(),
        })
    }

    /// `cosh α^∓ₙ − 1`.
    fn alpha_excess(&self, n: u64, sign: Sign) -> f64 {
        let x = self.radius_sq * two_sinh_sq(std::f64::consts::PI * n as f64 * self.sqrt_mass)
            / self.excess_sq;
        match sign {
            Sign::Minus => x,
            Sign::Plus => x + 2.0 * self.rh_sq / self.excess_sq,
        }
    }

    /// Branch point `α^∓_{P,n}`; `α⁻₀ = 0`.
    pub fn alpha(&self, n: u64, sign: Sign) -> f64 {
        acosh_1p(self.alpha_excess(n, sign))
    }

    /// Geon kernel offset `Z^∓_{P,n}` for the image `n + ½`.
    pub fn z(&self, n: u64, sign: Sign) -> f64 {
        let c = (2.0 * std::f64::consts::PI * (n as f64 + 0.5) * self.sqrt_mass).cosh();
        let s = match sign {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        };
        (self.radius_sq * c + s * self.rh_sq) / self.excess_sq
    }

    /// `Z⁺ − Z⁻`.
    fn z_split(&self) -> f64 {
        2.0 * self.rh_sq / self.excess_sq
    }
}

/// Parameters of the two-detector integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XTermParams {
    /// Gaussian damping `a_X`.
    pub damping: f64,
    /// `β_X⁻`, entering the BTZ part.
    pub freq_minus: f64,
    /// `β_X⁺`, entering the geon correction.
    pub freq_plus: f64,
    /// `γ_Aγ_B/(γ_A² + γ_B²)`, at most ½.
    pub redshift_ratio: f64,
    gap: f64,
    radius_prod: f64,
    excess_prod: f64,
    rh_sq: f64,
    /// `2 sinh²((ρ_A − ρ_B)/2)`.
    rapidity_split: f64,
    sqrt_mass: f64,
}

impl XTermParams {
    pub fn new(pair: &DetectorPair, p: &SpacetimeParams) -> Result<Self> {
        let rh = p.horizon_radius();
        let ell = p.ads_length();
        let (a, b) = (pair.a(), pair.b());
        let (ga, gb) = (a.redshift(p), b.redshift(p));
        let g = ga * ga + gb * gb;
        let ratio = ga * gb / g;
        if !(ratio <= 0.5) {
            return Err(Error::domain(format!(
                "redshift ratio {ratio} exceeds the bound 1/2"
            )));
        }
        let k = rh / (ell * ell);
        let gap = pair.gap();
        let split = two_sinh_sq(0.5 * (a.rapidity() - b.rapidity()));
        if !(split > 0.0) {
            return Err(Error::domain(
                "closed-form correlation term needs distinct detector radii",
            ));
        }
        Ok(Self {
            damping: ga * ga * gb * gb / (2.0 * g * k * k),
            freq_minus: gap * ga * gb * (ga - gb) / (g * k),
            freq_plus: gap * ga * gb * (ga + gb) / (g * k),
            redshift_ratio: ratio,
            gap,
            radius_prod: a.radius() * b.radius(),
            excess_prod: a.radial_excess(p) * b.radial_excess(p),
            rh_sq: rh * rh,
            rapidity_split: split,
            sqrt_mass: p.sqrt_mass(),
        })
    }

    fn alpha_excess(&self, n: u64, sign: Sign) -> f64 {
        let x = (self.radius_prod * two_sinh_sq(std::f64::consts::PI * n as f64 * self.sqrt_mass)
            + self.rh_sq * self.rapidity_split)
            / self.excess_prod;
        match sign {
            Sign::Minus => x,
            Sign::Plus => x + 2.0 * self.rh_sq / self.excess_prod,
        }
    }

    /// Branch point `α^∓_{X,n}`.
    pub fn alpha(&self, n: u64, sign: Sign) -> f64 {
        acosh_1p(self.alpha_excess(n, sign))
    }

    /// Geon kernel offset `Z^∓_{X,n}` for the image `n + ½`.
    pub fn z(&self, n: u64, sign: Sign) -> f64 {
        let c = (2.0 * std::f64::consts::PI * (n as f64 + 0.5) * self.sqrt_mass).cosh();
        let s = match sign {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        };
        (self.radius_prod * c + s * self.rh_sq) / self.excess_prod
    }

    fn z_split(&self) -> f64 {
        2.0 * self.rh_sq / self.excess_prod
    }

    /// `√ρ_r/(2√π)`, the common magnitude of both correlation prefactors.
    fn base_prefactor(&self) -> f64 {
        0.5 * INV_SQRT_PI * self.redshift_ratio.sqrt()
    }
}

/// Image-series accumulator with the geometric stopping rule.
struct Series<T> {
    terms: Vec<ImageTerm<T>>,
    value: T,
    quad_err: f64,
    /// Decay ratio of successive image contributions.
    ratio: f64,
    quiet_steps: u32,
    last_tail: f64,
}

impl<T: QuadValue> Series<T> {
    fn new(sqrt_mass: f64) -> Self {
        Self {
            terms: Vec::new(),
            value: T::default(),
            quad_err: 0.0,
            ratio: (-std::f64::consts::PI * sqrt_mass).exp(),
            quiet_steps: 0,
            last_tail: f64::INFINITY,
        }
    }

    fn push(&mut self, n: i64, kind: TermKind, scale: f64, r: QuadResult<T>) -> T {
        let value = r.value * scale;
        let err = r.err_estimate * scale.abs();
        self.terms.push(ImageTerm {
            n,
            kind,
            value,
            err_estimate: err,
        });
        self.value = self.value + value;
        self.quad_err += err;
        value
    }

    /// Records the total contribution of one image and reports whether the
    /// series may stop.
    fn settle(&mut self, contribution: f64, spec: &EvalSpec) -> bool {
        let tail = contribution * self.ratio / (1.0 - self.ratio);
        self.last_tail = tail;
        let target = spec
            .series_abs_tol
            .max(spec.series_rel_tol * self.value.magnitude());
        if tail <= target {
            self.quiet_steps += 1;
        } else {
            self.quiet_steps = 0;
        }
        self.quiet_steps >= 2
    }

    fn finish(self, n_max: usize) -> SeriesResult<T> {
        SeriesResult {
            value: self.value,
            err_estimate: self.quad_err + self.last_tail,
            n_max,
            terms: self.terms,
        }
    }
}

fn image_cap_error(what: &str, spec: &EvalSpec) -> Error {
    Error::ImageSum(format!(
        "{what} image series not converged after {} images",
        spec.max_images
    ))
}

/// `√(π/2) ∫ e^{−(Ω−y)²}/(e^{y/T}+1) dy`, split at the Fermi step.
fn thermal_term(gap: f64, temperature: f64, quad: &QuadratureSpec) -> Result<QuadResult> {
    let fermi = |y: f64| {
        if y > 0.0 {
            let e = (-y / temperature).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + (y / temperature).exp())
        }
    };
    let f = |y: f64| (-(gap - y) * (gap - y)).exp() * fermi(y);
    let reach = quad.tail_cutoff(1.0);
    let lo = integrate_finite(f, gap.min(0.0) - reach, 0.0, quad)?;
    let hi = integrate_finite(f, 0.0, gap.max(0.0) + reach, quad)?;
    let scale = (0.5 * std::f64::consts::PI).sqrt();
    Ok(QuadResult {
        value: scale * (lo.value + hi.value),
        err_estimate: scale * (lo.err_estimate + hi.err_estimate),
        evaluations: lo.evaluations + hi.evaluations,
    })
}

/// Upper limit for `∫₀^∞ e^{−a y²} (Z + cosh y)^{−1/2}`-type integrands.
fn smooth_cutoff(damping: f64, quad: &QuadratureSpec) -> Result<f64> {
    let tail = GaussianTail::new(damping, 0.0)?;
    Ok(tail.cutoff(0.0, quad).min(exponential_cutoff(quad)))
}

/// `(Z⁻ + cosh y)^{−1/2} − ζ (Z⁺ + cosh y)^{−1/2}` with the `ζ = 1`
/// difference formed without cancellation.
fn geon_bracket(z_minus: f64, split: f64, zeta: f64, y: f64) -> f64 {
    let a = z_minus + y.cosh();
    let b = a + split;
    let (ra, rb) = (a.sqrt(), b.sqrt());
    if zeta == 1.0 {
        split / (ra * rb * (ra + rb))
    } else {
        1.0 / ra - zeta / rb
    }
}

/// `∫₀^∞ e^{−a y²} cos(βy) [bracket] dy` for one geon image.
fn geon_image_integral(
    z_minus: f64,
    split: f64,
    zeta: f64,
    damping: f64,
    freq: f64,
    quad: &QuadratureSpec,
) -> Result<QuadResult> {
    if !(z_minus + 1.0 > 0.0) {
        return Err(Error::domain(format!(
            "geon kernel offset Z = {z_minus} makes the integrand singular"
        )));
    }
    let upper = smooth_cutoff(damping, quad)?;
    integrate_nodes(
        |node: Node| {
            let y = node.x;
            (-damping * y * y).exp() * (freq * y).cos() * geon_bracket(z_minus, split, zeta, y)
        },
        0.0,
        upper,
        quad,
    )
}

/// `P_BTZ` for one detector.
pub fn p_btz_series(
    d: &DetectorConfig,
    p: &SpacetimeParams,
    spec: &EvalSpec,
) -> Result<SeriesResult<f64>> {
    let tp = PTermParams::new(d, p)?;
    let zeta = p.zeta();
    let quad = &spec.quad;
    let scale = INV_SQRT_TWO_PI;
    let mut series = Series::new(tp.sqrt_mass);

    let thermal = thermal_term(tp.gap, tp.temperature, quad).context_with(|| "thermal term")?;
    series.push(0, TermKind::Thermal, scale, thermal);
    if zeta != 0.0 {
        let r = quadrature::integrate_branchcut(tp.alpha(0, Sign::Plus), tp.damping, tp.freq, quad)
            .context_with(|| "image n = 0 (plus kernel)")?;
        series.push(0, TermKind::Plus, -0.5 * zeta * scale, r);
    }

    for n in 1..=spec.max_images as u64 {
        let minus =
            quadrature::integrate_branchcut(tp.alpha(n, Sign::Minus), tp.damping, tp.freq, quad)
                .context_with(|| format!("image n = {n} (minus kernel)"))?;
        let mut contribution = series.push(n as i64, TermKind::Minus, scale, minus);
        if zeta != 0.0 {
            let plus =
                quadrature::integrate_branchcut(tp.alpha(n, Sign::Plus), tp.damping, tp.freq, quad)
                    .context_with(|| format!("image n = {n} (plus kernel)"))?;
            contribution += series.push(n as i64, TermKind::Plus, -zeta * scale, plus);
        }
        if series.settle(contribution.abs(), spec) {
            return Ok(series.finish(n as usize));
        }
    }
    Err(image_cap_error("P_BTZ", spec))
}

/// Geon correction `Δ_P` for one detector.
pub fn delta_p_series(
    d: &DetectorConfig,
    p: &SpacetimeParams,
    spec: &EvalSpec,
) -> Result<SeriesResult<f64>> {
    let tp = PTermParams::new(d, p)?;
    let zeta = p.zeta();
    // Σ_{n∈ℤ} ∫_ℝ folds to 4 Σ_{n≥0} ∫₀^∞.
    let scale = (-tp.gap * tp.gap).exp() * INV_SQRT_TWO_PI;
    let kind = if zeta == 0.0 {
        TermKind::Minus
    } else {
        TermKind::Bracket
    };
    let mut series = Series::new(tp.sqrt_mass);
    for n in 0..spec.max_images as u64 {
        let r = geon_image_integral(
            tp.z(n, Sign::Minus),
            tp.z_split(),
            zeta,
            tp.damping,
            0.0,
            &spec.quad,
        )
        .context_with(|| format!("geon image n = {n}"))?;
        let v = series.push(n as i64, kind, scale, r);
        if series.settle(v.abs(), spec) {
            return Ok(series.finish(n as usize + 1));
        }
    }
    Err(image_cap_error("Δ_P", spec))
}

/// `X_BTZ` for a detector pair; complex, see the module docs.
pub fn x_btz_series(
    pair: &DetectorPair,
    p: &SpacetimeParams,
    spec: &EvalSpec,
) -> Result<SeriesResult<Complex64>> {
    let tp = XTermParams::new(pair, p)?;
    let zeta = p.zeta();
    let quad = &spec.quad;
    let base = tp.base_prefactor() * (-tp.gap * tp.gap * (0.5 + tp.redshift_ratio)).exp();
    let mut series = Series::new(tp.sqrt_mass);
    for n in 0..=spec.max_images as u64 {
        // ±n share the same integral.
        let scale = if n == 0 { base } else { 2.0 * base };
        let minus = quadrature::integrate_branchcut_ordered(
            tp.alpha(n, Sign::Minus),
            tp.damping,
            tp.freq_minus,
            quad,
        )
        .context_with(|| format!("image n = {n} (minus kernel)"))?;
        let mut contribution = series.push(n as i64, TermKind::Minus, scale, minus);
        if zeta != 0.0 {
            let plus = quadrature::integrate_branchcut_ordered(
                tp.alpha(n, Sign::Plus),
                tp.damping,
                tp.freq_minus,
                quad,
            )
            .context_with(|| format!("image n = {n} (plus kernel)"))?;
            contribution += series.push(n as i64, TermKind::Plus, -zeta * scale, plus);
        }
        if n > 0 && series.settle(contribution.norm(), spec) {
            return Ok(series.finish(n as usize));
        }
    }
    Err(image_cap_error("X_BTZ", spec))
}

/// Geon correction `Δ_X`; real.
pub fn delta_x_series(
    pair: &DetectorPair,
    p: &SpacetimeParams,
    spec: &EvalSpec,
) -> Result<SeriesResult<f64>> {
    let tp = XTermParams::new(pair, p)?;
    let zeta = p.zeta();
    // Σ_{n∈ℤ} ∫_ℝ folds to 4 Σ_{n≥0} ∫₀^∞ against the X prefactor with the
    // opposite-sign exponent.
    let scale = 2.0 * tp.base_prefactor() * (-tp.gap * tp.gap * (0.5 - tp.redshift_ratio)).exp();
    let kind = if zeta == 0.0 {
        TermKind::Minus
    } else {
        TermKind::Bracket
    };
    let mut series = Series::new(tp.sqrt_mass);
    for n in 0..spec.max_images as u64 {
        let r = geon_image_integral(
            tp.z(n, Sign::Minus),
            tp.z_split(),
            zeta,
            tp.damping,
            tp.freq_plus,
            &spec.quad,
        )
        .context_with(|| format!("geon image n = {n}"))?;
        let v = series.push(n as i64, kind, scale, r);
        if series.settle(v.abs(), spec) {
            return Ok(series.finish(n as usize + 1));
        }
    }
    Err(image_cap_error("Δ_X", spec))
}

/// A value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate<T = f64> {
    pub value: T,
    pub err_estimate: f64,
}

impl<T> From<SeriesResult<T>> for Estimate<T> {
    fn from(s: SeriesResult<T>) -> Self {
        Self {
            value: s.value,
            err_estimate: s.err_estimate,
        }
    }
}

pub fn p_btz(d: &DetectorConfig, p: &SpacetimeParams, spec: &EvalSpec) -> Result<Estimate> {
    p_btz_series(d, p, spec).map(Into::into)
}

pub fn delta_p(d: &DetectorConfig, p: &SpacetimeParams, spec: &EvalSpec) -> Result<Estimate> {
    delta_p_series(d, p, spec).map(Into::into)
}

/// Transition probability of the background family.
pub fn p_total(d: &DetectorConfig, p: &SpacetimeParams, spec: &EvalSpec) -> Result<Estimate> {
    let btz = p_btz(d, p, spec)?;
    match p.family() {
        Family::Btz => Ok(btz),
        Family::Geon => {
            let corr = delta_p(d, p, spec)?;
            Ok(Estimate {
                value: btz.value + corr.value,
                err_estimate: btz.err_estimate + corr.err_estimate,
            })
        }
    }
}

pub fn x_btz(
    pair: &DetectorPair,
    p: &SpacetimeParams,
    spec: &EvalSpec,
) -> Result<Estimate<Complex64>> {
    x_btz_series(pair, p, spec).map(Into::into)
}

pub fn delta_x(pair: &DetectorPair, p: &SpacetimeParams, spec: &EvalSpec) -> Result<Estimate> {
    delta_x_series(pair, p, spec).map(Into::into)
}

/// Correlation term `X` of the background family.
pub fn x_total(
    pair: &DetectorPair,
    p: &SpacetimeParams,
    spec: &EvalSpec,
) -> Result<Estimate<Complex64>> {
    let btz = x_btz(pair, p, spec)?;
    match p.family() {
        Family::Btz => Ok(btz),
        Family::Geon => {
            let corr = delta_x(pair, p, spec)?;
            Ok(Estimate {
                value: btz.value + corr.value,
                err_estimate: btz.err_estimate + corr.err_estimate,
            })
        }
    }
}

/// Slack below zero tolerated on transition probabilities before they are
/// treated as an upstream failure.
pub const PROBABILITY_SLACK: f64 = 1e-9;

/// `2 max(0, |X| − √(P_A P_B))`.
pub fn concurrence(p_a: f64, p_b: f64, x_abs: f64) -> Result<f64> {
    for (name, v) in [("P_A", p_a), ("P_B", p_b)] {
        if !(v >= -PROBABILITY_SLACK) {
            return Err(Error::domain(format!(
                "{name} = {v:e} is negative beyond tolerance"
            )));
        }
    }
    if !(x_abs >= 0.0) {
        return Err(Error::domain(format!("|X| = {x_abs} must be non-negative")));
    }
    let noise = (p_a.max(0.0) * p_b.max(0.0)).sqrt();
    Ok(2.0 * (x_abs - noise).max(0.0))
}

const HERMITIAN_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

/// Wootters concurrence `max(0, w₁ − w₂ − w₃ − w₄)` of a two-qubit state,
/// with `wᵢ` the square roots of the eigenvalues of `ρ ρ̃`,
/// `ρ̃ = (σ_y⊗σ_y) ρ* (σ_y⊗σ_y)`.
///
/// The `wᵢ` are obtained as the singular values of `Wᵀ(σ_y⊗σ_y)W` with
/// `ρ = WW†`, which avoids square roots of near-zero eigenvalues.
pub fn concurrence_general(rho: &Matrix4<Complex64>) -> Result<f64> {
    let herm = (rho - rho.adjoint()).norm();
    if herm > HERMITIAN_TOL * rho.norm().max(1.0) {
        return Err(Error::domain(format!(
            "density matrix is not Hermitian (‖ρ − ρ†‖ = {herm:e})"
        )));
    }
    let rho = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    let trace = rho.trace().re;
    if (trace - 1.0).abs() > 1e-8 {
        return Err(Error::domain(format!("density matrix has trace {trace}")));
    }
    let eig = rho.symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min < -PSD_TOL {
        return Err(Error::domain(format!(
            "density matrix is not positive semidefinite (eigenvalue {min:e})"
        )));
    }
    let roots = eig
        .eigenvalues
        .map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0));
    let w = eig.eigenvectors * Matrix4::from_diagonal(&roots);

    // σ_y ⊗ σ_y in the computational basis.
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let flip = Matrix4::new(
        zero, zero, zero, -one, //
        zero, zero, one, zero, //
        zero, one, zero, zero, //
        -one, zero, zero, zero,
    );
    let tau = w.transpose() * flip * w;
    let mut sv: Vec<f64> = tau.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok((sv[0] - sv[1] - sv[2] - sv[3]).max(0.0))
}

/// Two-detector state in the basis `|g_A g_B⟩, |g_A e_B⟩, |e_A g_B⟩, |e_A e_B⟩`
/// at coupling `λ̃² = coupling_sq`, built from per-λ̃² values.
///
/// The leading-order state leaves `⟨ee|ρ|ee⟩` at zero, which is not positive
/// semidefinite once `X ≠ 0`. That entry is filled with the smallest
/// higher-order value that keeps the outer block PSD with room to spare
/// (`√(ρ₁₁ρ₄₄) = 2λ̃² max(|X|, |C|)`), which leaves the Wootters concurrence
/// equal to the reduced formula whenever `|C| ≤ √(P_A P_B)`.
pub fn assemble_density_matrix(
    p_a: f64,
    p_b: f64,
    x: Complex64,
    c: Complex64,
    coupling_sq: f64,
) -> Result<Matrix4<Complex64>> {
    if !(coupling_sq > 0.0) {
        return Err(Error::domain("coupling must be positive"));
    }
    let s = coupling_sq;
    let corner = 2.0 * s * x.norm().max(c.norm());
    let rest = 1.0 - s * (p_a + p_b);
    // ρ₁₁ρ₄₄ = corner² with ρ₁₁ + ρ₄₄ = rest.
    let disc = rest * rest - 4.0 * corner * corner;
    if !(disc >= 0.0 && rest > 0.0) {
        return Err(Error::domain("coupling too large for a valid state"));
    }
    let rho44 = 0.5 * (rest - disc.sqrt());
    let rho11 = rest - rho44;
    let z = Complex64::new(0.0, 0.0);
    let re = |v: f64| Complex64::new(v, 0.0);
    Ok(Matrix4::new(
        re(rho11),
        z,
        z,
        s * x.conj(), //
        z,
        re(s * p_b),
        s * c.conj(),
        z, //
        z,
        s * c,
        re(s * p_a),
        z, //
        s * x,
        z,
        z,
        re(rho44),
    ))
}

/// Errors attached to each reported quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HarvestErrors {
    pub p_a: f64,
    pub p_b: f64,
    pub x_abs: f64,
    pub concurrence: f64,
}

/// All observables of one detector-pair configuration, per λ̃².
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarvestResult {
    pub family: Family,
    pub p_a: f64,
    pub p_b: f64,
    pub x_re: f64,
    pub x_im: f64,
    pub x_abs: f64,
    pub concurrence: f64,
    pub err: HarvestErrors,
    /// Largest image index used by any series.
    pub n_max: usize,
}

impl HarvestResult {
    pub fn x(&self) -> Complex64 {
        Complex64::new(self.x_re, self.x_im)
    }
}

/// Evaluates `P_A`, `P_B`, `X` and the concurrence.
pub fn harvest(pair: &DetectorPair, p: &SpacetimeParams, spec: &EvalSpec) -> Result<HarvestResult> {
    spec.validate()?;
    let family = p.family();
    let geon = family == Family::Geon;
    let mut n_max = 0;

    let mut eval_p = |d: &DetectorConfig, label: &str| -> Result<Estimate> {
        let btz = p_btz_series(d, p, spec).context_with(|| format!("P_{label} (BTZ part)"))?;
        n_max = n_max.max(btz.n_max);
        let mut est = Estimate::from(btz);
        if geon {
            let corr =
                delta_p_series(d, p, spec).context_with(|| format!("P_{label} (geon part)"))?;
            n_max = n_max.max(corr.n_max);
            est.value += corr.value;
            est.err_estimate += corr.err_estimate;
        }
        Ok(est)
    };
    let pa = eval_p(pair.a(), "A")?;
    let pb = eval_p(pair.b(), "B")?;

    let xb = x_btz_series(pair, p, spec).context_with(|| "X (BTZ part)")?;
    n_max = n_max.max(xb.n_max);
    let mut x = Estimate::from(xb);
    if geon {
        let corr = delta_x_series(pair, p, spec).context_with(|| "X (geon part)")?;
        n_max = n_max.max(corr.n_max);
        x.value += corr.value;
        x.err_estimate += corr.err_estimate;
    }

    let x_abs = x.value.norm();
    let conc = concurrence(pa.value, pb.value, x_abs)?;
    let noise = (pa.value.max(0.0) * pb.value.max(0.0)).sqrt();
    let noise_err = if noise > 0.0 {
        0.5 * noise * (pa.err_estimate / pa.value.abs() + pb.err_estimate / pb.value.abs())
    } else {
        0.0
    };
    Ok(HarvestResult {
        family,
        p_a: pa.value,
        p_b: pb.value,
        x_re: x.value.re,
        x_im: x.value.im,
        x_abs,
        concurrence: conc,
        err: HarvestErrors {
            p_a: pa.err_estimate,
            p_b: pb.err_estimate,
            x_abs: x.err_estimate,
            concurrence: 2.0 * (x.err_estimate + noise_err),
        },
        n_max,
    })
}
