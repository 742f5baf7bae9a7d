//! Ground truth from the defining double integrals.
//!
//! For static detectors with Gaussian switching `χ(τ) = e^{−τ²/2}`,
//!
//! ```text
//! P_D = ∫∫ dτ dτ′ χ(τ)χ(τ′) e^{−iΩ(τ−τ′)} W(x_D(τ), x_D(τ′))
//! C   = ∫∫ dτ_A dτ_B χχ e^{−iΩ(τ_A−τ_B)} W(x_A, x_B)
//! X   = ∫∫ dτ_A dτ_B χχ e^{−iΩ(τ_A+τ_B)} [θ(t_B−t_A) W(x_A, x_B) + θ(t_A−t_B) W(x_B, x_A)]
//! ```
//!
//! evaluated in coordinate times `Δ = t_A − t_B`, `Σ = t_A + t_B`. The BTZ
//! image sum depends on `Δ` only and the geon images on `Σ` only, so each
//! piece is an iterated one-dimensional integral whose inner factor is a
//! pure Gaussian. The `−iε` regulator is applied as a proper-time shift and
//! removed by linear Richardson extrapolation.
//!
//! The overall sign of `X` and `C` is dropped; only moduli are compared.

use std::cell::RefCell;
use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};
use crate::geometry::{DetectorConfig, DetectorPair, Family, SpacetimeParams};
use crate::quadrature::{integrate_nodes, Node, QuadResult, QuadratureSpec};
use crate::wightman::{btz_sum, geon_correction, sigma_n, truncation_bound, SpacetimeEvent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpec {
    /// Regulators as proper-time shifts in units of σ, strictly decreasing.
    pub epsilons: Vec<f64>,
    /// Half-width of the proper-time window of each detector.
    pub tau_max: f64,
    pub quad: QuadratureSpec,
    /// Tail tolerance used to size the image sums.
    pub image_tol: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            epsilons: vec![1e-2, 1e-3, 1e-4],
            tau_max: 6.0,
            quad: QuadratureSpec {
                rel_tol: 1e-9,
                abs_tol: 1e-13,
                max_levels: 14,
            },
            image_tol: 1e-10,
        }
    }
}

impl OracleSpec {
    pub fn validate(&self) -> Result<()> {
        self.quad.validate()?;
        if self.epsilons.len() < 2 {
            return Err(Error::Config("oracle needs at least two regulators".into()));
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0))
            || self.epsilons.windows(2).any(|w| !(w[1] < w[0]))
        {
            return Err(Error::Config(
                "oracle regulators must be positive and strictly decreasing".into(),
            ));
        }
        if !(self.tau_max >= 5.0) {
            return Err(Error::Config(format!(
                "tau_max = {} is below 5σ",
                self.tau_max
            )));
        }
        if !(self.image_tol > 0.0) {
            return Err(Error::Config("image tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// An extrapolated oracle value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub value: Complex64,
    pub err_estimate: f64,
    /// Regularised values, one per regulator, before extrapolation.
    pub regularised: Vec<Complex64>,
    pub n_images: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Probability,
    Total,
    Correlation,
}

struct Setup<'a> {
    p: &'a SpacetimeParams,
    a: DetectorConfig,
    b: DetectorConfig,
    kind: Kind,
    gap: f64,
    ga: f64,
    gb: f64,
    /// Coordinate-time half-widths `τ_max/γ`.
    ta: f64,
    tb: f64,
    /// `r_h/ℓ²`, converting coordinate time to the cosh argument.
    k: f64,
    n_images: usize,
    quad: QuadratureSpec,
    /// Σ-integrals of the window, reused across regulators.
    window_cache: RefCell<HashMap<u64, Complex64>>,
}

impl<'a> Setup<'a> {
    fn new(
        a: DetectorConfig,
        b: DetectorConfig,
        kind: Kind,
        p: &'a SpacetimeParams,
        spec: &OracleSpec,
    ) -> Result<Self> {
        spec.validate()?;
        let (ga, gb) = (a.redshift(p), b.redshift(p));
        let ta = spec.tau_max / ga;
        let tb = spec.tau_max / gb;
        let k = p.horizon_radius() / (p.ads_length() * p.ads_length());
        let mut setup = Self {
            p,
            a,
            b,
            kind,
            gap: a.gap(),
            ga,
            gb,
            ta,
            tb,
            k,
            n_images: 0,
            quad: spec.quad,
            window_cache: RefCell::new(HashMap::new()),
        };
        // Images whose light cone enters the window must all be kept; the
        // coincidence bound then covers the spacelike tail.
        let base = truncation_bound(p.mass(), p.ads_length(), spec.image_tol)?;
        let reach = setup.half_width();
        let mut inside = 0;
        while inside < 10_000 && setup.sigma_real(inside as i64, reach) <= 0.0 {
            inside += 1;
        }
        setup.n_images = base + inside;
        Ok(setup)
    }

    fn half_width(&self) -> f64 {
        self.ta + self.tb
    }

    fn events(&self, t_a: f64, t_b: f64) -> (SpacetimeEvent, SpacetimeEvent) {
        let xa = SpacetimeEvent::new(t_a, self.a.radius(), self.a.phi(), self.p)
            .expect("validated detector radius");
        let xb = SpacetimeEvent::new(t_b, self.b.radius(), self.b.phi(), self.p)
            .expect("validated detector radius");
        (xa, xb)
    }

    /// `Re σ_n(x_A, x_B)` at `t_A − t_B = delta`, unregularised.
    fn sigma_real(&self, n: i64, delta: f64) -> f64 {
        let (xa, xb) = self.events(delta, 0.0);
        sigma_n(&xa, &xb, n, self.p, 0.0).re
    }

    /// Switching window times phase at `(Δ, Σ)`.
    fn window(&self, delta: f64, sum: f64) -> Complex64 {
        let tau_a = 0.5 * self.ga * (sum + delta);
        let tau_b = 0.5 * self.gb * (sum - delta);
        let envelope = -0.5 * (tau_a * tau_a + tau_b * tau_b);
        let phase = match self.kind {
            Kind::Probability | Kind::Total => -self.gap * (tau_a - tau_b),
            Kind::Correlation => -self.gap * (tau_a + tau_b),
        };
        Complex64::from_polar(envelope.exp(), phase)
    }

    /// Allowed `Σ` at fixed `Δ`, from `|t_A| ≤ T_A` and `|t_B| ≤ T_B`.
    fn sum_range(&self, delta: f64) -> Option<(f64, f64)> {
        let lo = (-2.0 * self.ta - delta).max(-2.0 * self.tb + delta);
        let hi = (2.0 * self.ta - delta).min(2.0 * self.tb + delta);
        (hi > lo).then_some((lo, hi))
    }

    fn delta_range(&self, sum: f64) -> Option<(f64, f64)> {
        let lo = (-2.0 * self.ta - sum).max(sum - 2.0 * self.tb);
        let hi = (2.0 * self.ta - sum).min(sum + 2.0 * self.tb);
        (hi > lo).then_some((lo, hi))
    }

    fn window_over_sum(&self, delta: f64) -> Result<Complex64> {
        if let Some(v) = self.window_cache.borrow().get(&delta.to_bits()) {
            return Ok(*v);
        }
        let v = match self.sum_range(delta) {
            None => Complex64::new(0.0, 0.0),
            Some((lo, hi)) => {
                integrate_nodes(|n: Node| self.window(delta, n.x), lo, hi, &self.quad)?.value
            }
        };
        self.window_cache.borrow_mut().insert(delta.to_bits(), v);
        Ok(v)
    }

    /// BTZ kernel at `t_A − t_B = delta` with the regulator `eps` already in
    /// cosh-argument units.
    fn btz_kernel(&self, delta: f64, eps: f64) -> Complex64 {
        let (xa, xb) = self.events(delta, 0.0);
        match self.kind {
            Kind::Correlation if delta > 0.0 => btz_sum(&xb, &xa, self.p, eps, self.n_images),
            _ => btz_sum(&xa, &xb, self.p, eps, self.n_images),
        }
    }

    /// Breakpoints of the `Δ` integral: the origin, the window edges and
    /// every light-cone crossing of an image inside the window. `σ_n` is
    /// even in `Δ` at equal angles, so roots come in `±` pairs.
    fn breakpoints(&self) -> Vec<f64> {
        let reach = self.half_width();
        let mut pts = vec![-reach, 0.0, reach];
        let shifts: &[f64] = if self.p.zeta() == 0.0 {
            &[0.0]
        } else {
            &[0.0, 2.0]
        };
        for n in 0..=self.n_images as i64 {
            let mut any = false;
            for &shift in shifts {
                let f = |d: f64| self.sigma_real(n, d) + shift;
                if f(0.0) > 0.0 && f(reach) < 0.0 {
                    let root = bisect(f, 0.0, reach);
                    pts.push(root);
                    pts.push(-root);
                    any = true;
                }
            }
            if !any && n > 0 {
                break;
            }
        }
        pts.sort_by(|x, y| x.total_cmp(y));
        pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * reach);
        pts
    }

    /// `∫dΔ W_ε(Δ) ∫dΣ window` for one regulator.
    fn btz_part(&self, eps: f64, breaks: &[f64]) -> Result<QuadResult<Complex64>> {
        let mut total = QuadResult {
            value: Complex64::new(0.0, 0.0),
            err_estimate: 0.0,
            evaluations: 0,
        };
        let mut failure = None;
        for w in breaks.windows(2) {
            let r = integrate_nodes(
                |n: Node| match self.window_over_sum(n.x) {
                    Ok(g) => self.btz_kernel(n.x, eps) * g,
                    Err(e) => {
                        failure.get_or_insert(e);
                        Complex64::new(0.0, 0.0)
                    }
                },
                w[0],
                w[1],
                &self.quad,
            )?;
            total.value += r.value;
            total.err_estimate += r.err_estimate;
            total.evaluations += r.evaluations;
        }
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(total)
    }

    /// `∫dΣ W_geon−BTZ(Σ) ∫dΔ window`; regulator-free.
    fn geon_part(&self) -> Result<QuadResult<Complex64>> {
        let mut failure = None;
        let reach = 2.0 * self.ta.max(self.tb);
        let r = integrate_nodes(
            |n: Node| {
                let sum = n.x;
                let Some((lo, hi)) = self.delta_range(sum) else {
                    return Complex64::new(0.0, 0.0);
                };
                let (xa, xb) = self.events(0.5 * sum, 0.5 * sum);
                let w = match geon_correction(&xa, &xb, self.p, self.n_images) {
                    Ok(w) => w,
                    Err(e) => {
                        failure.get_or_insert(e);
                        return Complex64::new(0.0, 0.0);
                    }
                };
                match integrate_nodes(|m: Node| self.window(m.x, sum), lo, hi, &self.quad) {
                    Ok(g) => g.value * w,
                    Err(e) => {
                        failure.get_or_insert(e);
                        Complex64::new(0.0, 0.0)
                    }
                }
            },
            -reach,
            reach,
            &self.quad,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(r)
    }

    fn evaluate(&self, spec: &OracleSpec) -> Result<OracleResult> {
        let jacobian = 0.5 * self.ga * self.gb;
        let breaks = self.breakpoints();
        // Proper-time shift ε of the mean redshift, in cosh-argument units.
        let to_arg = self.k / (self.ga * self.gb).sqrt();
        let mut values = Vec::with_capacity(spec.epsilons.len());
        let mut quad_err: f64 = 0.0;
        for &eps in &spec.epsilons {
            let r = self
                .btz_part(eps * to_arg, &breaks)
                .context_with(|| format!("BTZ part at ε = {eps:e}"))?;
            quad_err = quad_err.max(r.err_estimate);
            values.push(r.value * jacobian);
        }

        let steps: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        for s in steps.windows(2) {
            if s[1] > 0.5 * s[0] && s[0] > 1e-12 {
                return Err(Error::Oracle(format!(
                    "regulator sequence is not Cauchy: successive changes {:e}, {:e}",
                    s[0], s[1]
                )));
            }
        }
        let extrapolate = |i: usize| {
            let (e0, e1) = (spec.epsilons[i - 1], spec.epsilons[i]);
            (values[i] * e0 - values[i - 1] * e1) / (e0 - e1)
        };
        let last = values.len() - 1;
        let best = extrapolate(last);
        let mut err = quad_err * jacobian;
        if last >= 2 {
            err += (best - extrapolate(last - 1)).norm();
        } else {
            err += (values[last] - values[last - 1]).norm();
        }

        let mut value = best;
        if self.p.family() == Family::Geon {
            let g = self.geon_part().context_with(|| "geon part")?;
            value += g.value * jacobian;
            err += g.err_estimate * jacobian;
        }
        Ok(OracleResult {
            value,
            err_estimate: err,
            regularised: values,
            n_images: self.n_images,
        })
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Tolerated imaginary part of an extrapolated transition probability.
pub const PROBABILITY_IMAG_TOL: f64 = 1e-6;

/// Transition probability of one detector, per λ̃².
pub fn p_direct(
    d: &DetectorConfig,
    p: &SpacetimeParams,
    spec: &OracleSpec,
) -> Result<OracleResult> {
    let setup = Setup::new(*d, *d, Kind::Probability, p, spec)?;
    let r = setup.evaluate(spec)?;
    if r.value.im.abs() > PROBABILITY_IMAG_TOL.max(10.0 * r.err_estimate) {
        return Err(Error::Oracle(format!(
            "transition probability has imaginary part {:e}",
            r.value.im
        )));
    }
    Ok(r)
}

/// Non-local correlation term `X`, per λ̃².
pub fn x_direct(
    pair: &DetectorPair,
    p: &SpacetimeParams,
    spec: &OracleSpec,
) -> Result<OracleResult> {
    Setup::new(*pair.a(), *pair.b(), Kind::Correlation, p, spec)?.evaluate(spec)
}

/// Total-correlation term `C`, per λ̃².
pub fn c_direct(
    pair: &DetectorPair,
    p: &SpacetimeParams,
    spec: &OracleSpec,
) -> Result<OracleResult> {
    Setup::new(*pair.a(), *pair.b(), Kind::Total, p, spec)?.evaluate(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(OracleSpec::default().validate().is_ok());
        for epsilons in [vec![1e-3, 1e-2], vec![1e-2]] {
            let s = OracleSpec {
                epsilons,
                ..OracleSpec::default()
            };
            assert!(s.validate().is_err());
        }
        let s = OracleSpec {
            tau_max: 4.0,
            ..OracleSpec::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn sum_and_delta_ranges_agree() {
        let p = SpacetimeParams::dirichlet(0.01, 10.0, Family::Btz).unwrap();
        let pair = DetectorPair::from_distances(1.0, 0.5, 0.1, &p).unwrap();
        let s = Setup::new(
            *pair.a(),
            *pair.b(),
            Kind::Correlation,
            &p,
            &OracleSpec::default(),
        )
        .unwrap();
        for delta in [-900.0, -10.0, 0.0, 35.0, 700.0] {
            let (lo, hi) = s.sum_range(delta).unwrap();
            for sum in [lo + 1e-9, 0.5 * (lo + hi), hi - 1e-9] {
                let (dl, dh) = s.delta_range(sum).unwrap();
                assert!(dl <= delta + 1e-6 && delta - 1e-6 <= dh);
            }
        }
        assert!(s.sum_range(2.0 * s.half_width()).is_none());
    }

    #[test]
    fn breakpoints_are_light_cone_crossings() {
        let p = SpacetimeParams::dirichlet(0.01, 10.0, Family::Btz).unwrap();
        let d = DetectorConfig::at_distance(1.0, 0.0, 0.1, &p).unwrap();
        let s = Setup::new(d, d, Kind::Probability, &p, &OracleSpec::default()).unwrap();
        let pts = s.breakpoints();
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        assert!(pts.len() > 3);
        for &x in &pts {
            if x.abs() < s.half_width() && x != 0.0 {
                let near_zero = (0..=s.n_images as i64).any(|n| {
                    let v = s.sigma_real(n, x);
                    v.abs() < 1e-6 || (v + 2.0).abs() < 1e-6
                });
                assert!(near_zero, "breakpoint {x} is not a root");
            }
        }
    }
}
