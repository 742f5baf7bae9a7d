//! Oracle-equivalence grid and invariant checks behind `harvest validate`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::{
    proper_distance, radius_from_distance, BoundaryCondition, DetectorConfig, DetectorPair,
    Family, SpacetimeParams,
};
use crate::observables::{
    assemble_density_matrix, concurrence, concurrence_general, delta_p, harvest, p_btz_series,
    x_btz_series, x_total, EvalSpec, TermKind, XTermParams,
};
use crate::oracle::{p_direct, x_direct, OracleSpec};

pub const P_REL_TOL: f64 = 1e-2;
pub const X_REL_TOL: f64 = 2e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Quick,
    Full,
}

impl std::str::FromStr for Tier {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Tier::Quick),
            "full" => Ok(Tier::Full),
            other => Err(crate::Error::Config(format!(
                "unknown validation tier {other:?} (expected quick or full)"
            ))),
        }
    }
}

/// One configuration compared against the oracle: detector A at proper
/// distance 1 from the horizon, B a further 0.5 out, ℓ = 10, ζ = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OraclePoint {
    pub mass: f64,
    pub family: Family,
    pub gap: f64,
}

pub const ORACLE_DIST_A: f64 = 1.0;
pub const ORACLE_SEPARATION: f64 = 0.5;
pub const ORACLE_ADS_LENGTH: f64 = 10.0;

/// Quick: BTZ at M ∈ {1, 0.01}, Ω ∈ {0.1, 1}. Full: both families and
/// Ω ∈ {0.01, 0.1, 1}.
pub fn oracle_grid(tier: Tier) -> Vec<OraclePoint> {
    let (families, gaps): (&[Family], &[f64]) = match tier {
        Tier::Quick => (&[Family::Btz], &[0.1, 1.0]),
        Tier::Full => (&[Family::Btz, Family::Geon], &[0.01, 0.1, 1.0]),
    };
    let mut out = Vec::new();
    for &mass in &[1.0, 0.01] {
        for &family in families {
            for &gap in gaps {
                out.push(OraclePoint { mass, family, gap });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// Measured deviation, in the units of `tolerance`.
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, measured: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: measured <= tolerance,
            measured,
            tolerance,
            detail,
        }
    }

    fn failed(name: impl Into<String>, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: false,
            measured: f64::NAN,
            tolerance,
            detail,
        }
    }
}

fn rel_dev(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Compares closed-form `P_A` and `|X|` with the direct double integrals.
pub fn oracle_check(pt: OraclePoint, eval: &EvalSpec, oracle: &OracleSpec) -> Vec<CheckOutcome> {
    let label = format!("oracle M={} {} gap={}", pt.mass, pt.family, pt.gap);
    let run = || -> Result<(f64, f64, f64, f64)> {
        let p = SpacetimeParams::dirichlet(pt.mass, ORACLE_ADS_LENGTH, pt.family)?;
        let pair = DetectorPair::from_distances(ORACLE_DIST_A, ORACLE_SEPARATION, pt.gap, &p)?;
        let closed = harvest(&pair, &p, eval)?;
        let pd = p_direct(pair.a(), &p, oracle)?;
        let xd = x_direct(&pair, &p, oracle)?;
        Ok((closed.p_a, pd.value.re, closed.x_abs, xd.value.norm()))
    };
    match run() {
        Ok((pc, po, xc, xo)) => vec![
            CheckOutcome::new(
                format!("{label} P"),
                rel_dev(pc, po),
                P_REL_TOL,
                format!("closed {pc:.10} oracle {po:.10}"),
            ),
            CheckOutcome::new(
                format!("{label} |X|"),
                rel_dev(xc, xo),
                X_REL_TOL,
                format!("closed {xc:.10} oracle {xo:.10}"),
            ),
        ],
        Err(e) => vec![CheckOutcome::failed(label, P_REL_TOL, e.to_string())],
    }
}

pub fn oracle_checks(tier: Tier, eval: &EvalSpec, oracle: &OracleSpec) -> Vec<CheckOutcome> {
    oracle_grid(tier)
        .par_iter()
        .flat_map_iter(|&pt| oracle_check(pt, eval, oracle))
        .collect()
}

fn check(name: &str, tolerance: f64, f: impl FnOnce() -> Result<(f64, String)>) -> CheckOutcome {
    match f() {
        Ok((measured, detail)) => CheckOutcome::new(name, measured, tolerance, detail),
        Err(e) => CheckOutcome::failed(name, tolerance, e.to_string()),
    }
}

fn dirichlet(mass: f64, family: Family) -> Result<SpacetimeParams> {
    SpacetimeParams::dirichlet(mass, ORACLE_ADS_LENGTH, family)
}

/// Structural properties of the closed forms. Measured values are maximal
/// violations, so each check passes when `measured ≤ tolerance`.
pub fn invariant_checks(eval: &EvalSpec) -> Vec<CheckOutcome> {
    let gaps = [0.01, 0.1, 1.0];
    let mut out = Vec::new();

    out.push(check("reduced vs eigenvalue concurrence", 1e-12, || {
        let mut worst = 0.0f64;
        for family in [Family::Btz, Family::Geon] {
            let p = dirichlet(0.01, family)?;
            for gap in gaps {
                let pair = DetectorPair::from_distances(1.0, 0.5, gap, &p)?;
                let r = harvest(&pair, &p, eval)?;
                let s = 1e-3;
                let rho = assemble_density_matrix(r.p_a, r.p_b, r.x(), Complex64::new(0.0, 0.0), s)?;
                let general = concurrence_general(&rho)? / s;
                let reduced = concurrence(r.p_a, r.p_b, r.x_abs)?;
                worst = worst.max((general - reduced).abs());
            }
        }
        Ok((worst, format!("max |difference| {worst:.3e}")))
    }));

    out.push(check("|X| swap symmetry", 1e-12, || {
        let mut worst = 0.0f64;
        for mass in [1.0, 0.01] {
            for family in [Family::Btz, Family::Geon] {
                let p = dirichlet(mass, family)?;
                for gap in gaps {
                    let pair = DetectorPair::from_distances(1.0, 0.5, gap, &p)?;
                    let swapped = DetectorPair::new(*pair.b(), *pair.a())?;
                    let x = x_total(&pair, &p, eval)?.value.norm();
                    let y = x_total(&swapped, &p, eval)?.value.norm();
                    worst = worst.max(rel_dev(y, x));
                }
            }
        }
        Ok((worst, format!("max relative difference {worst:.3e}")))
    }));

    out.push(check("Delta_P > 0 for zeta = 1", 0.0, || {
        let mut violations = 0usize;
        let mut smallest = f64::INFINITY;
        for mass in [1.0, 0.1, 0.01, 0.001] {
            let p = dirichlet(mass, Family::Geon)?;
            for gap in gaps {
                for dist in [0.05, 1.0, 5.0] {
                    let d = DetectorConfig::at_distance(dist, 0.0, gap, &p)?;
                    let v = delta_p(&d, &p, eval)?.value;
                    smallest = smallest.min(v);
                    if !(v > 0.0) {
                        violations += 1;
                    }
                }
            }
        }
        Ok((violations as f64, format!("smallest Delta_P {smallest:.3e}")))
    }));

    out.push(check("zeta = 0 removes all zeta terms", 0.0, || {
        let mut stray = 0usize;
        let mut present = 0usize;
        for bc in [BoundaryCondition::Transparent, BoundaryCondition::Dirichlet] {
            let p = SpacetimeParams::new(0.01, ORACLE_ADS_LENGTH, bc, Family::Btz)?;
            let pair = DetectorPair::from_distances(1.0, 0.5, 0.1, &p)?;
            let ps = p_btz_series(pair.a(), &p, eval)?;
            let xs = x_btz_series(&pair, &p, eval)?;
            let zeta_terms = ps.terms.iter().filter(|t| t.kind.is_zeta_term()).count()
                + xs.terms.iter().filter(|t| t.kind.is_zeta_term()).count();
            if bc == BoundaryCondition::Transparent {
                stray += zeta_terms;
                // Thermal once, then one minus kernel per image n ≥ 1.
                if ps.count(TermKind::Thermal) != 1 || ps.count(TermKind::Minus) != ps.n_max {
                    stray += 1;
                }
            } else {
                present += zeta_terms;
            }
        }
        if present == 0 {
            return Ok((1.0, "Dirichlet series carries no zeta terms".into()));
        }
        Ok((stray as f64, format!("{stray} unexpected terms at zeta = 0")))
    }));

    out.push(check("redshift-factor bound", 1e-15, || {
        let p = dirichlet(0.01, Family::Btz)?;
        let mut excess = 0.0f64;
        for da in [0.01, 0.1, 1.0, 5.0] {
            for sep in [1e-3, 0.1, 0.5, 3.0] {
                let pair = DetectorPair::from_distances(da, sep, 0.1, &p)?;
                let tp = XTermParams::new(&pair, &p)?;
                excess = excess.max(tp.redshift_ratio - 0.5);
            }
            let d = DetectorConfig::at_distance(da, 0.0, 0.1, &p)?;
            let g = d.redshift(&p);
            let saturated = g * g / (g * g + g * g);
            excess = excess.max((saturated - 0.5).abs());
        }
        Ok((excess.max(0.0), format!("max excess over 1/2 {excess:.3e}")))
    }));

    out.push(check("image-term decay ratio", 0.0, || {
        let mut violations = 0usize;
        let mut worst = 0.0f64;
        for mass in [1.0f64, 0.1, 0.01] {
            let bound = (-std::f64::consts::PI * mass.sqrt() / 2.0).exp();
            let p = dirichlet(mass, Family::Btz)?;
            let d = DetectorConfig::at_distance(1.0, 0.0, 0.1, &p)?;
            let mags = p_btz_series(&d, &p, eval)?.image_magnitudes();
            for w in mags.windows(2).filter(|w| w[0].0 >= 2) {
                // Stop at the quadrature noise floor.
                if w[1].1 < 1e-13 {
                    break;
                }
                let ratio = w[1].1 / w[0].1;
                worst = worst.max(ratio / bound);
                if ratio > bound {
                    violations += 1;
                }
            }
        }
        Ok((violations as f64, format!("largest ratio / bound {worst:.4}")))
    }));

    out.push(check("geometry round trip", 1e-10, || {
        let mut worst = 0.0f64;
        for mass in [1.0, 0.01, 1e-4] {
            let p = dirichlet(mass, Family::Btz)?;
            let rh = p.horizon_radius();
            for i in 0..=40 {
                let d = 0.01 * (2000.0f64).powf(i as f64 / 40.0);
                let r = radius_from_distance(d, &p)?;
                worst = worst.max((proper_distance(rh, r, &p)? - d).abs());
            }
        }
        Ok((worst, format!("max |d - d(R(d))| {worst:.3e}")))
    }));

    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub tier: Tier,
    pub checks: Vec<CheckOutcome>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Plain-text pass/fail table.
    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!(
                "{:<4}  {:<width$}  {:>10.3e}  (tol {:.1e})  {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.tolerance,
                c.detail,
            ));
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        s.push_str(&format!(
            "{} checks, {} failed\n",
            self.checks.len(),
            failed
        ));
        s
    }
}

pub fn validate(tier: Tier, eval: &EvalSpec, oracle: &OracleSpec) -> ValidationReport {
    let mut checks = invariant_checks(eval);
    checks.extend(oracle_checks(tier, eval, oracle));
    ValidationReport { tier, checks }
}
