//! BTZ and geon Wightman functions as image sums over AdS₃ correlators.
//!
//! For the conformally coupled scalar in the Hartle-Hawking vacuum
//!
//! ```text
//! W_BTZ(x, x′) = 1/(4π√2 ℓ) Σ_n [ σ_n^{−1/2} − ζ (σ_n + 2)^{−1/2} ]
//! W_geon       = W_BTZ + 1/(4π√2 ℓ) Σ_n [ σ̃_n^{−1/2} − ζ (σ̃_n + 2)^{−1/2} ]
//! ```
//!
//! with principal square roots (cut on the negative real axis). The BTZ
//! images are regularised by `−iε` in the Killing-time argument; the geon
//! images carry no regulator and must stay strictly positive.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Family, SpacetimeParams};

/// Hard cap on the number of images per side.
pub const MAX_IMAGES: usize = 500;

/// A point of the static exterior in Schwarzschild-like coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacetimeEvent {
    t: f64,
    r: f64,
    phi: f64,
    /// `√(r² − r_h²)`.
    excess: f64,
}

impl SpacetimeEvent {
    pub fn new(t: f64, r: f64, phi: f64, p: &SpacetimeParams) -> Result<Self> {
        let rh = p.horizon_radius();
        if !(r > rh) {
            return Err(Error::domain(format!(
                "event at r = {r} is not outside the horizon r_h = {rh}"
            )));
        }
        Ok(Self {
            t,
            r,
            phi,
            excess: ((r - rh) * (r + rh)).sqrt(),
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

/// How many images to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ImageSumControl {
    /// Keep `n = −N..=N` (BTZ) and `n = −N..N` (geon).
    Fixed(usize),
    /// Choose `N` from [`truncation_bound`] at the given tolerance.
    Auto { tol: f64 },
}

impl ImageSumControl {
    pub fn resolve(&self, p: &SpacetimeParams) -> Result<usize> {
        match *self {
            ImageSumControl::Fixed(n) => Ok(n),
            ImageSumControl::Auto { tol } => truncation_bound(p.mass(), p.ads_length(), tol),
        }
    }
}

/// `rr′ − r_h² − √(r²−r_h²)√(r′²−r_h²)`, rewritten as
/// `r_h² (r − r′)² / (rr′ − r_h² + √…√…)` so it vanishes exactly at `r = r′`.
fn radial_mismatch(x: &SpacetimeEvent, y: &SpacetimeEvent, rh: f64) -> f64 {
    let dr = x.r - y.r;
    if dr == 0.0 {
        return 0.0;
    }
    rh * rh * dr * dr / (x.r * y.r - rh * rh + x.excess * y.excess)
}

/// BTZ image separation `σ_n` with the `−iε` prescription.
///
/// Evaluated in the cancellation-free form
/// `(rr′/r_h²) 2sinh²(r_h(Δφ−2πn)/2ℓ) + mismatch/r_h² − (2√√/r_h²) sinh²((r_h/ℓ²)Δt/2 − iε/2)`.
pub fn sigma_n(
    x: &SpacetimeEvent,
    y: &SpacetimeEvent,
    n: i64,
    p: &SpacetimeParams,
    epsilon: f64,
) -> Complex64 {
    let rh = p.horizon_radius();
    let ell = p.ads_length();
    let rh2 = rh * rh;
    let angular = (rh / ell) * (x.phi - y.phi - std::f64::consts::TAU * n as f64);
    let s = (0.5 * angular).sinh();
    let spatial = x.r * y.r / rh2 * 2.0 * s * s + radial_mismatch(x, y, rh) / rh2;
    let half_time = Complex64::new(0.5 * rh / (ell * ell) * (x.t - y.t), -0.5 * epsilon);
    let sh = half_time.sinh();
    Complex64::new(spatial, 0.0) - sh * sh * (2.0 * x.excess * y.excess / rh2)
}

/// Geon image separation `σ̃_n`; real, with the half-integer angular offset
/// and the Killing-time sum `t + t′`.
pub fn sigma_tilde_n(x: &SpacetimeEvent, y: &SpacetimeEvent, n: i64, p: &SpacetimeParams) -> f64 {
    let rh = p.horizon_radius();
    let ell = p.ads_length();
    let rh2 = rh * rh;
    let angular = (rh / ell) * (x.phi - y.phi - std::f64::consts::TAU * (n as f64 + 0.5));
    let s = (0.5 * angular).sinh();
    x.r * y.r / rh2 * 2.0 * s * s
        + (x.r * y.r - rh2) / rh2
        + x.excess * y.excess / rh2 * (rh / (ell * ell) * (x.t + y.t)).cosh()
}

fn prefactor(p: &SpacetimeParams) -> f64 {
    1.0 / (4.0 * std::f64::consts::PI * std::f64::consts::SQRT_2 * p.ads_length())
}

/// The BTZ image sum alone, `n = −N..=N`.
pub fn btz_sum(
    x: &SpacetimeEvent,
    y: &SpacetimeEvent,
    p: &SpacetimeParams,
    epsilon: f64,
    n_max: usize,
) -> Complex64 {
    let zeta = p.zeta();
    let n_max = n_max as i64;
    let mut total = Complex64::new(0.0, 0.0);
    // Largest |n| first so the small tail terms accumulate before the
    // dominant ones.
    for k in (0..=n_max).rev() {
        for n in if k == 0 { vec![0] } else { vec![k, -k] } {
            let s = sigma_n(x, y, n, p, epsilon);
            let mut term = s.sqrt().inv();
            if zeta != 0.0 {
                term -= (s + 2.0).sqrt().inv() * zeta;
            }
            total += term;
        }
    }
    total * prefactor(p)
}

/// The geon image correction `W_geon − W_BTZ`, `n = −N..N−1`.
pub fn geon_correction(
    x: &SpacetimeEvent,
    y: &SpacetimeEvent,
    p: &SpacetimeParams,
    n_max: usize,
) -> Result<f64> {
    let zeta = p.zeta();
    let n_max = n_max.max(1) as i64;
    let mut total = 0.0;
    for k in (0..n_max).rev() {
        // n and −1−n share |n + 1/2|.
        for n in [k, -1 - k] {
            let s = sigma_tilde_n(x, y, n, p);
            if !(s > 0.0) {
                return Err(Error::domain(format!(
                    "geon image n = {n} is not spacelike separated (σ̃ = {s}); \
                     configuration outside the validated regime"
                )));
            }
            total += 1.0 / s.sqrt() - zeta / (s + 2.0).sqrt();
        }
    }
    Ok(total * prefactor(p))
}

/// Wightman function of the background family.
pub fn wightman(
    x: &SpacetimeEvent,
    y: &SpacetimeEvent,
    p: &SpacetimeParams,
    epsilon: f64,
    ctl: ImageSumControl,
) -> Result<Complex64> {
    if epsilon < 0.0 {
        return Err(Error::domain(format!(
            "ε must be non-negative, got {epsilon}"
        )));
    }
    let n_max = ctl.resolve(p)?;
    if n_max > MAX_IMAGES {
        return Err(Error::ImageSum(format!(
            "requested {n_max} images, above the hard cap of {MAX_IMAGES}"
        )));
    }
    let mut w = btz_sum(x, y, p, epsilon, n_max);
    if p.family() == Family::Geon {
        w += geon_correction(x, y, p, n_max)?;
    }
    Ok(w)
}

/// Number of images per side after which the neglected tail of the
/// coincidence-point kernel sum drops below `target_tol`.
///
/// At coincidence `σ_n^{−1/2} ≤ 1/(√2 sinh(π√M |n|))`, which is at most
/// `C e^{−π√M n}` with `C = √2/(1 − e^{−2π√M})` (the `n = 1` term fixes
/// `C`). Summing the geometric tail from `N + 1` gives the bound used here.
pub fn truncation_bound(mass: f64, ads_length: f64, target_tol: f64) -> Result<usize> {
    crate::geometry::horizon_radius(mass, ads_length)?;
    if !(target_tol > 0.0) {
        return Err(Error::domain(format!(
            "truncation tolerance must be positive, got {target_tol}"
        )));
    }
    let rate = std::f64::consts::PI * mass.sqrt();
    let c = std::f64::consts::SQRT_2 / -(-2.0 * rate).exp_m1();
    let geometric = 1.0 / -(-rate).exp_m1();
    // c·geometric·e^{−rate (N+1)} < tol
    let needed = ((c * geometric / target_tol).ln() / rate - 1.0).ceil();
    let n = needed.max(1.0);
    if n > MAX_IMAGES as f64 {
        return Err(Error::ImageSum(format!(
            "mass {mass} needs about {n:.0} images for tolerance {target_tol:e}, \
             above the cap of {MAX_IMAGES}; loosen the tolerance"
        )));
    }
    Ok(n as usize)
}
