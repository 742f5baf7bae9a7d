//! Entanglement-shadow boundary and BTZ/geon crossover gap.
//!
//! Both searches scan a grid for a sign change of a signed margin and refine
//! the innermost (lowest) bracket by bisection. Scan points are evaluated in
//! parallel; bisection is sequential.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};
use crate::geometry::{DetectorPair, Family, SpacetimeParams};
use crate::observables::{harvest, EvalSpec};

/// Default noise floor below which concurrence differences count as zero.
pub const NOISE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowQuery {
    pub spacetime: SpacetimeParams,
    /// Proper separation `d(R_A, R_B)`.
    pub separation: f64,
    pub gap: f64,
    /// Scan range for `d(r_h, R_A)`.
    pub scan_min: f64,
    pub scan_max: f64,
    pub scan_points: usize,
    /// Bisection stops once the bracket is narrower than this.
    pub tol: f64,
}

impl ShadowQuery {
    pub fn new(spacetime: SpacetimeParams, separation: f64, gap: f64) -> Self {
        Self {
            spacetime,
            separation,
            gap,
            scan_min: 0.01,
            scan_max: 10.0,
            scan_points: 40,
            tol: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.separation > 0.0) {
            return Err(Error::domain("detector separation must be positive"));
        }
        if !(self.scan_min > 0.0 && self.scan_min < self.scan_max && self.scan_max <= 20.0) {
            return Err(Error::domain(format!(
                "scan range [{}, {}] must lie in (0, 20]",
                self.scan_min, self.scan_max
            )));
        }
        if self.scan_points < 2 {
            return Err(Error::domain("shadow scan needs at least two points"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::domain("bisection tolerance must be positive"));
        }
        Ok(())
    }

    fn scan_grid(&self) -> Vec<f64> {
        log_grid(self.scan_min, self.scan_max, self.scan_points)
    }
}

pub(crate) fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == count {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowStatus {
    /// A boundary was bracketed and refined.
    Boundary,
    /// Concurrence is positive throughout the range.
    NoShadow,
    /// Concurrence vanishes throughout the range.
    FullyShadowed,
}

impl ShadowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ShadowStatus::Boundary => "boundary",
            ShadowStatus::NoShadow => "no_shadow",
            ShadowStatus::FullyShadowed => "fully_shadowed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShadowOutcome {
    pub status: ShadowStatus,
    /// Boundary location; the range minimum when no shadow was found.
    pub d_death: Option<f64>,
    /// Final bracket width.
    pub bracket: f64,
    pub evaluations: usize,
}

/// `|X| − √(P_A P_B)`; positive exactly where concurrence is.
fn harvest_margin(
    dist_a: f64,
    q: &ShadowQuery,
    spec: &EvalSpec,
) -> Result<f64> {
    let pair = DetectorPair::from_distances(dist_a, q.separation, q.gap, &q.spacetime)?;
    let r = harvest(&pair, &q.spacetime, spec)
        .context_with(|| format!("harvest at d(r_h, R_A) = {dist_a}"))?;
    Ok(r.x_abs - (r.p_a.max(0.0) * r.p_b.max(0.0)).sqrt())
}

/// Innermost distance from the horizon at which the detectors start to
/// harvest entanglement.
pub fn d_death(q: &ShadowQuery, spec: &EvalSpec) -> Result<ShadowOutcome> {
    q.validate()?;
    let grid = q.scan_grid();
    let margins = grid
        .par_iter()
        .map(|&d| harvest_margin(d, q, spec))
        .collect::<Result<Vec<f64>>>()?;
    let mut evaluations = grid.len();

    let crossing = margins.windows(2).position(|w| w[0] <= 0.0 && w[1] > 0.0);
    let Some(i) = crossing else {
        let (status, d) = if margins.iter().all(|&m| m <= 0.0) {
            (ShadowStatus::FullyShadowed, None)
        } else {
            (ShadowStatus::NoShadow, Some(q.scan_min))
        };
        return Ok(ShadowOutcome {
            status,
            d_death: d,
            bracket: 0.0,
            evaluations,
        });
    };

    let (mut lo, mut hi) = (grid[i], grid[i + 1]);
    while hi - lo > q.tol {
        let mid = 0.5 * (lo + hi);
        evaluations += 1;
        if harvest_margin(mid, q, spec)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // Report the upper end, which is known to harvest.
    Ok(ShadowOutcome {
        status: ShadowStatus::Boundary,
        d_death: Some(hi),
        bracket: hi - lo,
        evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverQuery {
    pub mass: f64,
    pub ads_length: f64,
    pub boundary: crate::geometry::BoundaryCondition,
    pub separation: f64,
    pub dist_a: f64,
    pub gap_min: f64,
    pub gap_max: f64,
    pub scan_points: usize,
    pub tol: f64,
    pub noise_floor: f64,
}

impl CrossoverQuery {
    pub fn new(mass: f64, ads_length: f64, dist_a: f64, separation: f64) -> Self {
        Self {
            mass,
            ads_length,
            boundary: crate::geometry::BoundaryCondition::Dirichlet,
            separation,
            dist_a,
            gap_min: 0.01,
            gap_max: 2.0,
            scan_points: 100,
            tol: 1e-3,
            noise_floor: NOISE_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gap_min > 0.0 && self.gap_min < self.gap_max) {
            return Err(Error::domain("gap scan range must be positive and ordered"));
        }
        if self.scan_points < 2 || !(self.tol > 0.0) || !(self.noise_floor >= 0.0) {
            return Err(Error::domain("invalid crossover scan controls"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossoverOutcome {
    /// Lowest gap where `C_geon − C_BTZ` turns from negative to positive.
    pub gap: Option<f64>,
    pub bracket: f64,
    /// Number of negative-to-positive crossings seen on the scan grid.
    pub crossings: usize,
}

/// `C_geon − C_BTZ` at one gap.
pub fn concurrence_difference(q: &CrossoverQuery, gap: f64, spec: &EvalSpec) -> Result<f64> {
    let geon = SpacetimeParams::new(q.mass, q.ads_length, q.boundary, Family::Geon)?;
    let btz = geon.with_family(Family::Btz);
    let pair = DetectorPair::from_distances(q.dist_a, q.separation, gap, &geon)?;
    let cg = harvest(&pair, &geon, spec)?.concurrence;
    let cb = harvest(&pair, &btz, spec)?.concurrence;
    Ok(cg - cb)
}

fn classify(v: f64, floor: f64) -> i8 {
    if v > floor {
        1
    } else if v < -floor {
        -1
    } else {
        0
    }
}

/// Gap above which the geon harvests more entanglement than BTZ.
pub fn crossover_gap(q: &CrossoverQuery, spec: &EvalSpec) -> Result<CrossoverOutcome> {
    q.validate()?;
    let step = (q.gap_max - q.gap_min) / (q.scan_points - 1) as f64;
    let grid: Vec<f64> = (0..q.scan_points)
        .map(|i| q.gap_min + step * i as f64)
        .collect();
    let diffs = grid
        .par_iter()
        .map(|&g| concurrence_difference(q, g, spec))
        .collect::<Result<Vec<f64>>>()?;

    // Crossings between the last clearly negative and the next clearly
    // positive point, skipping values inside the noise floor.
    let mut brackets = Vec::new();
    let mut last_negative = None;
    for (i, &d) in diffs.iter().enumerate() {
        match classify(d, q.noise_floor) {
            -1 => last_negative = Some(i),
            1 => {
                if let Some(j) = last_negative.take() {
                    brackets.push((j, i));
                }
            }
            _ => {}
        }
    }
    let Some(&(j, i)) = brackets.first() else {
        return Ok(CrossoverOutcome {
            gap: None,
            bracket: 0.0,
            crossings: 0,
        });
    };
    let (mut lo, mut hi) = (grid[j], grid[i]);
    while hi - lo > q.tol {
        let mid = 0.5 * (lo + hi);
        if concurrence_difference(q, mid, spec)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CrossoverOutcome {
        gap: Some(0.5 * (lo + hi)),
        bracket: hi - lo,
        crossings: brackets.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(0.01, 10.0, 40);
        assert_eq!(g.len(), 40);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[39], 10.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let r0 = g[1] / g[0];
        assert!(g.windows(2).all(|w| (w[1] / w[0] - r0).abs() < 1e-9));
    }

    #[test]
    fn query_validation() {
        let p = SpacetimeParams::dirichlet(0.01, 10.0, Family::Btz).unwrap();
        let mut q = ShadowQuery::new(p, 0.5, 0.01);
        assert!(q.validate().is_ok());
        q.scan_max = 25.0;
        assert!(q.validate().is_err());
        let mut q = ShadowQuery::new(p, 0.0, 0.01);
        assert!(q.validate().is_err());
        q.separation = 0.5;
        q.scan_points = 1;
        assert!(q.validate().is_err());
    }

    #[test]
    fn classify_respects_floor() {
        assert_eq!(classify(1e-7, 1e-6), 0);
        assert_eq!(classify(-2e-6, 1e-6), -1);
        assert_eq!(classify(2e-6, 1e-6), 1);
    }
}
