//! Static exterior geometry of the non-rotating BTZ black hole.
//!
//! The geon is isometric to one BTZ exterior, so everything here applies to
//! both families. Radial positions are parametrised internally by the
//! hyperbolic coordinate `ρ = acosh(R / r_h)`, which equals the proper
//! distance from the horizon divided by ℓ. Working with `ρ` keeps quantities
//! such as `R² − r_h² = r_h² sinh² ρ` free of cancellation near the horizon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which spacetime the field lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Btz,
    Geon,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Btz => "btz",
            Family::Geon => "geon",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "btz" => Ok(Family::Btz),
            "geon" => Ok(Family::Geon),
            other => Err(Error::Config(format!(
                "unknown spacetime family {other:?} (expected btz or geon)"
            ))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Field boundary condition at spatial infinity, `ζ ∈ {−1, 0, +1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub enum BoundaryCondition {
    Neumann,
    Transparent,
    Dirichlet,
}

impl BoundaryCondition {
    pub fn zeta(self) -> f64 {
        match self {
            BoundaryCondition::Neumann => -1.0,
            BoundaryCondition::Transparent => 0.0,
            BoundaryCondition::Dirichlet => 1.0,
        }
    }
}

impl TryFrom<i32> for BoundaryCondition {
    type Error = Error;

    fn try_from(zeta: i32) -> Result<Self> {
        match zeta {
            -1 => Ok(BoundaryCondition::Neumann),
            0 => Ok(BoundaryCondition::Transparent),
            1 => Ok(BoundaryCondition::Dirichlet),
            other => Err(Error::domain(format!(
                "boundary condition zeta must be -1, 0 or 1, got {other}"
            ))),
        }
    }
}

impl From<BoundaryCondition> for i32 {
    fn from(bc: BoundaryCondition) -> i32 {
        bc.zeta() as i32
    }
}

/// Mass, AdS length, boundary condition and family of the background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeParams {
    mass: f64,
    ads_length: f64,
    boundary: BoundaryCondition,
    family: Family,
}

impl SpacetimeParams {
    pub fn new(
        mass: f64,
        ads_length: f64,
        boundary: BoundaryCondition,
        family: Family,
    ) -> Result<Self> {
        // Validates M and ℓ.
        horizon_radius(mass, ads_length)?;
        Ok(Self {
            mass,
            ads_length,
            boundary,
            family,
        })
    }

    /// Dirichlet (ζ = 1) background of the given family.
    pub fn dirichlet(mass: f64, ads_length: f64, family: Family) -> Result<Self> {
        Self::new(mass, ads_length, BoundaryCondition::Dirichlet, family)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn ads_length(&self) -> f64 {
        self.ads_length
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.boundary
    }

    pub fn zeta(&self) -> f64 {
        self.boundary.zeta()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn with_family(self, family: Family) -> Self {
        Self { family, ..self }
    }

    pub fn with_boundary(self, boundary: BoundaryCondition) -> Self {
        Self { boundary, ..self }
    }

    pub fn horizon_radius(&self) -> f64 {
        self.ads_length * self.mass.sqrt()
    }

    /// `r_h / ℓ = √M`, the rate at which angular images separate.
    pub fn sqrt_mass(&self) -> f64 {
        self.mass.sqrt()
    }
}

/// Horizon radius `r_h = ℓ √M`.
pub fn horizon_radius(mass: f64, ads_length: f64) -> Result<f64> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::domain(format!("mass must be positive, got {mass}")));
    }
    if !(ads_length > 0.0 && ads_length.is_finite()) {
        return Err(Error::domain(format!(
            "AdS length must be positive, got {ads_length}"
        )));
    }
    Ok(ads_length * mass.sqrt())
}

/// Redshift factor `γ = √(R² − r_h²) / ℓ` of a static observer at `R`.
pub fn redshift(radius: f64, p: &SpacetimeParams) -> Result<f64> {
    let rh = p.horizon_radius();
    if !(radius > rh) {
        return Err(Error::domain(format!(
            "radius {radius} is not outside the horizon r_h = {rh}"
        )));
    }
    // (R − r_h)(R + r_h) avoids squaring cancellation close to the horizon.
    Ok(((radius - rh) * (radius + rh)).sqrt() / p.ads_length())
}

/// `acosh(R / r_h)`, the horizon distance in units of ℓ. Requires `R ≥ r_h`.
fn rapidity(radius: f64, rh: f64) -> f64 {
    let excess = (radius - rh) / rh;
    // acosh(1 + x) = ln(1 + x + √(x(x + 2))) without cancellation for small x.
    (excess + (excess * (excess + 2.0)).sqrt()).ln_1p()
}

/// Radial proper distance between two static points at equal `t` and `φ`.
///
/// Integrates `√g_rr` of the exterior metric:
/// `d = ℓ [acosh(R_b / r_h) − acosh(R_a / r_h)]`.
pub fn proper_distance(r_a: f64, r_b: f64, p: &SpacetimeParams) -> Result<f64> {
    let rh = p.horizon_radius();
    if !(r_a >= rh) {
        return Err(Error::domain(format!(
            "inner radius {r_a} lies inside the horizon r_h = {rh}"
        )));
    }
    if !(r_b >= r_a) {
        return Err(Error::domain(format!(
            "radii out of order: expected R_a <= R_b, got {r_a} > {r_b}"
        )));
    }
    Ok(p.ads_length() * (rapidity(r_b, rh) - rapidity(r_a, rh)))
}

/// Inverse of [`proper_distance`] measured from the horizon: `R = r_h cosh(d/ℓ)`.
pub fn radius_from_distance(distance: f64, p: &SpacetimeParams) -> Result<f64> {
    if !(distance >= 0.0 && distance.is_finite()) {
        return Err(Error::domain(format!(
            "proper distance must be non-negative, got {distance}"
        )));
    }
    Ok(p.horizon_radius() * (distance / p.ads_length()).cosh())
}

/// A static two-level detector with Gaussian switching of unit width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorConfig {
    radius: f64,
    rapidity: f64,
    phi: f64,
    gap: f64,
}

impl DetectorConfig {
    /// Detector at radial coordinate `radius`.
    pub fn at_radius(radius: f64, phi: f64, gap: f64, p: &SpacetimeParams) -> Result<Self> {
        redshift(radius, p)?;
        Self::checked(radius, rapidity(radius, p.horizon_radius()), phi, gap)
    }

    /// Detector at proper distance `distance` from the horizon.
    pub fn at_distance(distance: f64, phi: f64, gap: f64, p: &SpacetimeParams) -> Result<Self> {
        if !(distance > 0.0) {
            return Err(Error::domain(format!(
                "detector must sit strictly outside the horizon, got proper distance {distance}"
            )));
        }
        let radius = radius_from_distance(distance, p)?;
        Self::checked(radius, distance / p.ads_length(), phi, gap)
    }

    fn checked(radius: f64, rapidity: f64, phi: f64, gap: f64) -> Result<Self> {
        if !gap.is_finite() {
            return Err(Error::domain(format!(
                "energy gap must be finite, got {gap}"
            )));
        }
        if !(0.0..std::f64::consts::TAU).contains(&phi) {
            return Err(Error::domain(format!(
                "angle must lie in [0, 2π), got {phi}"
            )));
        }
        Ok(Self {
            radius,
            rapidity,
            phi,
            gap,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// `acosh(R / r_h)`.
    pub fn rapidity(&self) -> f64 {
        self.rapidity
    }

    /// Proper distance from the horizon.
    pub fn horizon_distance(&self, p: &SpacetimeParams) -> f64 {
        self.rapidity * p.ads_length()
    }

    /// `√(R² − r_h²) = r_h sinh ρ`.
    pub fn radial_excess(&self, p: &SpacetimeParams) -> f64 {
        p.horizon_radius() * self.rapidity.sinh()
    }

    /// Redshift factor `γ_D`.
    pub fn redshift(&self, p: &SpacetimeParams) -> f64 {
        self.radial_excess(p) / p.ads_length()
    }
}

/// Two identical detectors at the same angle and distinct radii. Either may
/// be the inner one; pairs built with [`DetectorPair::from_distances`] put A
/// inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorPair {
    a: DetectorConfig,
    b: DetectorConfig,
}

impl DetectorPair {
    pub fn new(a: DetectorConfig, b: DetectorConfig) -> Result<Self> {
        if !(b.radius != a.radius && a.radius.is_finite() && b.radius.is_finite()) {
            return Err(Error::domain(format!(
                "detectors must sit at distinct radii (R_A = {}, R_B = {})",
                a.radius, b.radius
            )));
        }
        if a.phi != b.phi {
            return Err(Error::domain(
                "detectors must share the same angle (Φ_A = Φ_B)",
            ));
        }
        if a.gap != b.gap {
            return Err(Error::domain("detectors must share the same energy gap"));
        }
        Ok(Self { a, b })
    }

    /// Detector A at proper distance `dist_a` from the horizon, B a further
    /// proper distance `separation` outward.
    pub fn from_distances(
        dist_a: f64,
        separation: f64,
        gap: f64,
        p: &SpacetimeParams,
    ) -> Result<Self> {
        if !(separation > 0.0) {
            return Err(Error::domain(format!(
                "detector separation must be positive, got {separation}"
            )));
        }
        let a = DetectorConfig::at_distance(dist_a, 0.0, gap, p)?;
        let b = DetectorConfig::at_distance(dist_a + separation, 0.0, gap, p)?;
        Self::new(a, b)
    }

    pub fn a(&self) -> &DetectorConfig {
        &self.a
    }

    pub fn b(&self) -> &DetectorConfig {
        &self.b
    }

    pub fn gap(&self) -> f64 {
        self.a.gap
    }

    /// Proper separation between the detectors.
    pub fn separation(&self, p: &SpacetimeParams) -> f64 {
        (self.b.rapidity - self.a.rapidity).abs() * p.ads_length()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(mass: f64, ell: f64) -> SpacetimeParams {
        SpacetimeParams::dirichlet(mass, ell, Family::Btz).unwrap()
    }

    #[test]
    fn horizon_radius_values() {
        assert_eq!(horizon_radius(1.0, 10.0).unwrap(), 10.0);
        assert!((horizon_radius(0.01, 10.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(horizon_radius(1.0, 1.0).unwrap(), 1.0);
        assert!(horizon_radius(0.0, 1.0).is_err());
        assert!(horizon_radius(1.0, -2.0).is_err());
        assert!(horizon_radius(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn horizon_scaling_is_exact() {
        for &(m, l) in &[(0.01, 10.0), (1.0, 1.0), (0.25, 3.0)] {
            let r = horizon_radius(m, l).unwrap();
            assert_eq!(horizon_radius(4.0 * m, l).unwrap(), 2.0 * r);
        }
    }

    #[test]
    fn redshift_direct_formula() {
        let p = params(0.01, 10.0);
        let g = redshift(2.0, &p).unwrap();
        assert!((g - 3f64.sqrt() / 10.0).abs() < 1e-15);
        assert!(redshift(1.0, &p).is_err());
        assert!(redshift(0.5, &p).is_err());
        let near = redshift(1.0 + 1e-12, &p).unwrap();
        assert!(near > 0.0 && near < 1e-6);
    }

    #[test]
    fn redshift_approaches_flat_limit() {
        let p = params(0.01, 10.0);
        let r = 1e4 * p.horizon_radius() * 1.5;
        let g = redshift(r, &p).unwrap();
        assert!(((g - r / 10.0) / (r / 10.0)).abs() < 1e-6);
    }

    #[test]
    fn redshift_round_trip_through_distance() {
        let p = params(0.01, 10.0);
        let r = radius_from_distance(1.0, &p).unwrap();
        let det = DetectorConfig::at_distance(1.0, 0.0, 0.1, &p).unwrap();
        assert!((redshift(r, &p).unwrap() - det.redshift(&p)).abs() < 1e-12);
    }

    #[test]
    fn proper_distance_examples() {
        let p = params(0.01, 10.0);
        assert_eq!(proper_distance(2.0, 2.0, &p).unwrap(), 0.0);

        let unit = params(1.0, 1.0);
        let r = 1f64.cosh();
        assert!((proper_distance(1.0, r, &unit).unwrap() - 1.0).abs() < 1e-14);

        let d12 = proper_distance(1.5, 2.0, &p).unwrap();
        let d23 = proper_distance(2.0, 3.0, &p).unwrap();
        let d13 = proper_distance(1.5, 3.0, &p).unwrap();
        assert!((d12 + d23 - d13).abs() < 1e-12);

        assert!(proper_distance(3.0, 2.0, &p).is_err());
        assert!(proper_distance(0.5, 2.0, &p).is_err());
    }

    #[test]
    fn proper_distance_matches_log_form() {
        let p = params(0.01, 10.0);
        let rh = p.horizon_radius();
        let (ra, rb) = (1.3, 2.7);
        let log_form =
            10.0 * ((rb + (rb * rb - rh * rh).sqrt()) / (ra + (ra * ra - rh * rh).sqrt())).ln();
        assert!((proper_distance(ra, rb, &p).unwrap() - log_form).abs() < 1e-12);
    }

    #[test]
    fn radius_from_distance_examples() {
        let p = params(0.01, 10.0);
        assert_eq!(radius_from_distance(0.0, &p).unwrap(), p.horizon_radius());
        let r = radius_from_distance(1.0, &p).unwrap();
        assert!((r - 0.1f64.cosh()).abs() < 1e-15);
        assert!((r - 1.0050).abs() < 1e-4);
        assert!(radius_from_distance(-1.0, &p).is_err());
    }

    #[test]
    fn distance_round_trip() {
        let p = params(0.01, 10.0);
        let rh = p.horizon_radius();
        for i in 0..=200 {
            let d = 0.01 * (2000f64).powf(i as f64 / 200.0);
            let r = radius_from_distance(d, &p).unwrap();
            let back = proper_distance(rh, r, &p).unwrap();
            assert!(((back - d) / d).abs() < 1e-10, "d = {d}, back = {back}");
        }
    }

    #[test]
    fn pair_validation() {
        let p = params(0.01, 10.0);
        let a = DetectorConfig::at_distance(1.0, 0.0, 0.1, &p).unwrap();
        let b = DetectorConfig::at_distance(1.5, 0.0, 0.1, &p).unwrap();
        assert!(DetectorPair::new(a, b).is_ok());
        let swapped = DetectorPair::new(b, a).unwrap();
        assert!((swapped.separation(&p) - 0.5).abs() < 1e-14);
        assert!(DetectorPair::new(a, a).is_err());
        let other_gap = DetectorConfig::at_distance(1.5, 0.0, 0.2, &p).unwrap();
        assert!(DetectorPair::new(a, other_gap).is_err());
        let other_angle = DetectorConfig::at_distance(1.5, 1.0, 0.1, &p).unwrap();
        assert!(DetectorPair::new(a, other_angle).is_err());
        let pair = DetectorPair::from_distances(1.0, 0.5, 0.1, &p).unwrap();
        assert!((pair.separation(&p) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn zeta_parsing() {
        assert_eq!(BoundaryCondition::try_from(1).unwrap().zeta(), 1.0);
        assert_eq!(BoundaryCondition::try_from(0).unwrap().zeta(), 0.0);
        assert_eq!(BoundaryCondition::try_from(-1).unwrap().zeta(), -1.0);
        assert!(BoundaryCondition::try_from(2).is_err());
    }
}
