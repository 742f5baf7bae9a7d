//! Parameter sweeps, plot presets and CSV emission.
//!
//! A sweep walks one axis (mass, gap or detector distance) over a linear or
//! logarithmic grid, crossed with lists of fixed masses and gaps and the
//! selected families. Rows come out grid-major, family-minor regardless of
//! how the worker pool schedules them, and every real is printed with 12
//! significant digits, so identical specs give identical files.

use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryCondition, DetectorPair, Family, SpacetimeParams};
use crate::observables::{harvest, EvalSpec, HarvestResult};
use crate::shadow::{d_death, ShadowOutcome, ShadowQuery};

pub const MAX_GRID_POINTS: usize = 10_000;

macro_rules! str_enum {
    ($name:ident { $($variant:ident => $s:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $s),+ }
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($s => Ok($name::$variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($name), " {:?} (expected one of: {})"),
                        other,
                        [$($s),+].join(", ")
                    ))),
                }
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

str_enum!(Preset {
    Fig2 => "fig2",
    Fig3 => "fig3",
    Fig4 => "fig4",
    Fig5 => "fig5",
    Fig6 => "fig6",
    Fig7 => "fig7",
    Custom => "custom",
});

str_enum!(Axis {
    Mass => "mass",
    Gap => "gap",
    Distance => "distance",
});

str_enum!(Scale {
    Linear => "linear",
    Log => "log",
});

str_enum!(Quantity {
    Harvest => "harvest",
    Shadow => "shadow",
});

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub axis: Axis,
    pub scale: Scale,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_GRID_POINTS).contains(&self.points) {
            return Err(Error::Config(format!(
                "grid point count must be in [2, {MAX_GRID_POINTS}], got {}",
                self.points
            )));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::Config(format!(
                "grid bounds must be finite with min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.scale == Scale::Log && !(self.min > 0.0) {
            return Err(Error::Config("log grids require positive bounds".into()));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        match self.scale {
            Scale::Log => crate::shadow::log_grid(self.min, self.max, self.points),
            Scale::Linear => {
                let step = (self.max - self.min) / (self.points - 1) as f64;
                (0..self.points)
                    .map(|i| {
                        if i + 1 == self.points {
                            self.max
                        } else {
                            self.min + step * i as f64
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Scan controls for shadow sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowSettings {
    pub scan_min: f64,
    pub scan_max: f64,
    pub scan_points: usize,
    pub tol: f64,
}

impl Default for ShadowSettings {
    fn default() -> Self {
        Self {
            scan_min: 0.01,
            scan_max: 10.0,
            scan_points: 40,
            tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub preset: Preset,
    pub quantity: Quantity,
    pub grid: Grid,
    /// Fixed masses; ignored on a mass axis.
    pub masses: Vec<f64>,
    /// Fixed gaps; ignored on a gap axis.
    pub gaps: Vec<f64>,
    pub ads_length: f64,
    pub zeta: BoundaryCondition,
    /// Proper distance of detector A from the horizon; ignored on a distance
    /// axis and in shadow sweeps.
    pub dist_a: f64,
    pub separation: f64,
    pub families: Vec<Family>,
    pub shadow: ShadowSettings,
    /// Adds a wall-time column. Off by default since it breaks byte-stability.
    pub timing: bool,
}

const BOTH: [Family; 2] = [Family::Btz, Family::Geon];

impl SweepSpec {
    /// Grid and fixed parameters for a plot preset.
    ///
    /// | preset | axis | grid | fixed |
    /// |---|---|---|---|
    /// | fig2 | distance | log [0.05, 10], 60 | M ∈ {1, 0.01}, Ω ∈ {0.01, 0.1, 1} |
    /// | fig3 | mass | log [1e-4, 10], 60 | Ω = 0.1, d_A = 1 |
    /// | fig4 | mass | log [1e-4, 10], 60 | Ω ∈ {0.01, 0.1, 1}, d_A = 1 |
    /// | fig5 | gap | linear [0.01, 2], 100 | M ∈ {1, 0.05, 0.01, 0.005, 0.001}, d_A = 1 |
    /// | fig6 | distance | log [0.01, 10], 80 | M = 0.01, Ω ∈ {0.01, 0.1, 1} |
    /// | fig7 | mass (shadow) | log [1e-3, 10], 30 | Ω ∈ {0.01, 1} |
    ///
    /// All presets use ℓ = 10, S = 0.5, ζ = 1 and both families. `custom`
    /// starts from the fig4 grid.
    pub fn preset(preset: Preset) -> Self {
        let grid = |axis, scale, min, max, points| Grid {
            axis,
            scale,
            min,
            max,
            points,
        };
        let mut spec = SweepSpec {
            preset,
            quantity: Quantity::Harvest,
            grid: grid(Axis::Mass, Scale::Log, 1e-4, 10.0, 60),
            masses: vec![0.01],
            gaps: vec![0.01, 0.1, 1.0],
            ads_length: 10.0,
            zeta: BoundaryCondition::Dirichlet,
            dist_a: 1.0,
            separation: 0.5,
            families: BOTH.to_vec(),
            shadow: ShadowSettings::default(),
            timing: false,
        };
        match preset {
            Preset::Fig2 => {
                spec.grid = grid(Axis::Distance, Scale::Log, 0.05, 10.0, 60);
                spec.masses = vec![1.0, 0.01];
            }
            Preset::Fig3 => spec.gaps = vec![0.1],
            Preset::Fig4 | Preset::Custom => {}
            Preset::Fig5 => {
                spec.grid = grid(Axis::Gap, Scale::Linear, 0.01, 2.0, 100);
                spec.masses = vec![1.0, 0.05, 0.01, 0.005, 0.001];
            }
            Preset::Fig6 => spec.grid = grid(Axis::Distance, Scale::Log, 0.01, 10.0, 80),
            Preset::Fig7 => {
                spec.quantity = Quantity::Shadow;
                spec.grid = grid(Axis::Mass, Scale::Log, 1e-3, 10.0, 30);
                spec.gaps = vec![0.01, 1.0];
            }
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        if self.grid.axis != Axis::Mass {
            if self.masses.is_empty() {
                return Err(Error::Config("at least one mass is required".into()));
            }
            self.masses.iter().try_for_each(|&m| positive("mass", m))?;
        }
        if self.grid.axis != Axis::Gap {
            if self.gaps.is_empty() {
                return Err(Error::Config("at least one gap is required".into()));
            }
            self.gaps.iter().try_for_each(|&g| {
                if g.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!("gap must be finite, got {g}")))
                }
            })?;
        }
        if self.families.is_empty() {
            return Err(Error::Config("at least one family is required".into()));
        }
        positive("ads-length", self.ads_length)?;
        positive("sep", self.separation)?;
        if self.grid.axis != Axis::Distance && self.quantity == Quantity::Harvest {
            positive("dist-a", self.dist_a)?;
        }
        match self.quantity {
            Quantity::Harvest => {
                if self.grid.axis == Axis::Distance && !(self.grid.min > 0.0) {
                    return Err(Error::Config("distance grid must be positive".into()));
                }
                if self.grid.axis == Axis::Mass && !(self.grid.min > 0.0) {
                    return Err(Error::Config("mass grid must be positive".into()));
                }
            }
            Quantity::Shadow => {
                if self.grid.axis == Axis::Distance {
                    return Err(Error::Config(
                        "shadow sweeps scan the distance themselves; use a mass or gap axis"
                            .into(),
                    ));
                }
                if self.grid.axis == Axis::Mass && !(self.grid.min > 0.0) {
                    return Err(Error::Config("mass grid must be positive".into()));
                }
                self.shadow_query(SweepPoint {
                    mass: 1.0,
                    gap: 0.0,
                    dist_a: 0.0,
                    family: Family::Btz,
                })?
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Evaluation points in output order.
    pub fn points(&self) -> Vec<SweepPoint> {
        let masses = match self.grid.axis {
            Axis::Mass => vec![f64::NAN],
            _ => self.masses.clone(),
        };
        let gaps = match self.grid.axis {
            Axis::Gap => vec![f64::NAN],
            _ => self.gaps.clone(),
        };
        let mut out = Vec::new();
        for v in self.grid.values() {
            for &m in &masses {
                for &g in &gaps {
                    for &family in &self.families {
                        let mut pt = SweepPoint {
                            mass: m,
                            gap: g,
                            dist_a: self.dist_a,
                            family,
                        };
                        match self.grid.axis {
                            Axis::Mass => pt.mass = v,
                            Axis::Gap => pt.gap = v,
                            Axis::Distance => pt.dist_a = v,
                        }
                        out.push(pt);
                    }
                }
            }
        }
        out
    }

    fn spacetime(&self, pt: SweepPoint) -> Result<SpacetimeParams> {
        SpacetimeParams::new(pt.mass, self.ads_length, self.zeta, pt.family)
    }

    fn shadow_query(&self, pt: SweepPoint) -> Result<ShadowQuery> {
        let s = self.shadow;
        Ok(ShadowQuery {
            spacetime: self.spacetime(pt)?,
            separation: self.separation,
            gap: pt.gap,
            scan_min: s.scan_min,
            scan_max: s.scan_max,
            scan_points: s.scan_points,
            tol: s.tol,
        })
    }

    /// Canonical JSON echo written into the CSV header.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("sweep spec serialises")
    }

    pub fn sha256(&self) -> String {
        format!("{:x}", Sha256::digest(self.echo().as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub mass: f64,
    pub gap: f64,
    pub dist_a: f64,
    pub family: Family,
}

#[derive(Debug, Clone)]
pub struct SweepRow<T> {
    pub point: SweepPoint,
    pub outcome: std::result::Result<T, String>,
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub enum SweepOutput {
    Harvest(Vec<SweepRow<HarvestResult>>),
    Shadow(Vec<SweepRow<ShadowOutcome>>),
}

impl SweepOutput {
    pub fn len(&self) -> usize {
        match self {
            SweepOutput::Harvest(r) => r.len(),
            SweepOutput::Shadow(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rows whose evaluation failed.
    pub fn failures(&self) -> usize {
        match self {
            SweepOutput::Harvest(r) => r.iter().filter(|r| r.outcome.is_err()).count(),
            SweepOutput::Shadow(r) => r.iter().filter(|r| r.outcome.is_err()).count(),
        }
    }
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> (std::result::Result<T, String>, f64) {
    let start = Instant::now();
    let out = f().map_err(|e| e.to_string());
    (out, start.elapsed().as_secs_f64())
}

/// Evaluates every point. Failures are kept per row; only an invalid spec
/// is an error.
pub fn run(spec: &SweepSpec, eval: &EvalSpec) -> Result<SweepOutput> {
    spec.validate()?;
    eval.validate()?;
    let points = spec.points();
    Ok(match spec.quantity {
        Quantity::Harvest => SweepOutput::Harvest(
            points
                .par_iter()
                .map(|&point| {
                    let (outcome, wall_time) = timed(|| {
                        let p = spec.spacetime(point)?;
                        let pair =
                            DetectorPair::from_distances(point.dist_a, spec.separation, point.gap, &p)?;
                        harvest(&pair, &p, eval)
                    });
                    SweepRow {
                        point,
                        outcome,
                        wall_time,
                    }
                })
                .collect(),
        ),
        Quantity::Shadow => SweepOutput::Shadow(
            points
                .par_iter()
                .map(|&point| {
                    let (outcome, wall_time) =
                        timed(|| d_death(&spec.shadow_query(point)?, eval));
                    SweepRow {
                        point,
                        outcome,
                        wall_time,
                    }
                })
                .collect(),
        ),
    })
}

/// Scientific notation with 12 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.11e}")
}

const HARVEST_COLUMNS: [&str; 19] = [
    "mass",
    "ads_length",
    "zeta",
    "gap",
    "dist_a",
    "separation",
    "family",
    "p_a",
    "p_b",
    "x_re",
    "x_im",
    "x_abs",
    "concurrence",
    "err_p_a",
    "err_p_b",
    "err_x_abs",
    "err_concurrence",
    "n_max",
    "error",
];

const SHADOW_COLUMNS: [&str; 15] = [
    "mass",
    "ads_length",
    "zeta",
    "gap",
    "separation",
    "family",
    "status",
    "d_death",
    "bracket",
    "evaluations",
    "scan_min",
    "scan_max",
    "scan_points",
    "tol",
    "error",
];

pub fn columns(quantity: Quantity, timing: bool) -> Vec<&'static str> {
    let mut cols = match quantity {
        Quantity::Harvest => HARVEST_COLUMNS.to_vec(),
        Quantity::Shadow => SHADOW_COLUMNS.to_vec(),
    };
    if timing {
        cols.push("wall_time_s");
    }
    cols
}

fn write_metadata<W: Write>(w: &mut W, spec: &SweepSpec, eval: &EvalSpec) -> Result<()> {
    let eval_json = serde_json::to_string(eval).expect("eval spec serialises");
    writeln!(w, "# harvest {}", crate::VERSION)?;
    writeln!(w, "# preset: {}", spec.preset)?;
    writeln!(w, "# quantity: {}", spec.quantity)?;
    writeln!(w, "# spec: {}", spec.echo())?;
    writeln!(w, "# spec_sha256: {}", spec.sha256())?;
    writeln!(w, "# eval: {eval_json}")?;
    writeln!(w, "# eval_sha256: {:x}", Sha256::digest(eval_json.as_bytes()))?;
    writeln!(w, "# units: sigma = 1; observables per lambda~^2")?;
    Ok(())
}

/// Writes the metadata header, the column header and one line per row.
pub fn write_csv<W: Write>(
    mut w: W,
    spec: &SweepSpec,
    eval: &EvalSpec,
    output: &SweepOutput,
) -> Result<()> {
    write_metadata(&mut w, spec, eval)?;
    let mut csv = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let quantity = match output {
        SweepOutput::Harvest(_) => Quantity::Harvest,
        SweepOutput::Shadow(_) => Quantity::Shadow,
    };
    csv.write_record(columns(quantity, spec.timing))
        .map_err(csv_err)?;

    let zeta = i32::from(spec.zeta).to_string();
    let ell = fmt_real(spec.ads_length);
    let sep = fmt_real(spec.separation);
    let mut record: Vec<String> = Vec::new();
    let finish = |record: &mut Vec<String>, wall: f64| {
        if spec.timing {
            record.push(fmt_real(wall));
        }
    };
    match output {
        SweepOutput::Harvest(rows) => {
            for row in rows {
                let pt = row.point;
                record.clear();
                record.extend([
                    fmt_real(pt.mass),
                    ell.clone(),
                    zeta.clone(),
                    fmt_real(pt.gap),
                    fmt_real(pt.dist_a),
                    sep.clone(),
                    pt.family.to_string(),
                ]);
                match &row.outcome {
                    Ok(r) => {
                        record.extend(
                            [
                                r.p_a,
                                r.p_b,
                                r.x_re,
                                r.x_im,
                                r.x_abs,
                                r.concurrence,
                                r.err.p_a,
                                r.err.p_b,
                                r.err.x_abs,
                                r.err.concurrence,
                            ]
                            .map(fmt_real),
                        );
                        record.push(r.n_max.to_string());
                        record.push(String::new());
                    }
                    Err(msg) => {
                        record.extend(std::iter::repeat_n(String::new(), 11));
                        record.push(msg.clone());
                    }
                }
                finish(&mut record, row.wall_time);
                csv.write_record(&record).map_err(csv_err)?;
            }
        }
        SweepOutput::Shadow(rows) => {
            let s = spec.shadow;
            for row in rows {
                let pt = row.point;
                record.clear();
                record.extend([
                    fmt_real(pt.mass),
                    ell.clone(),
                    zeta.clone(),
                    fmt_real(pt.gap),
                    sep.clone(),
                    pt.family.to_string(),
                ]);
                match &row.outcome {
                    Ok(o) => {
                        record.push(o.status.as_str().to_string());
                        record.push(o.d_death.map(fmt_real).unwrap_or_default());
                        record.push(fmt_real(o.bracket));
                        record.push(o.evaluations.to_string());
                    }
                    Err(_) => record.extend(std::iter::repeat_n(String::new(), 4)),
                }
                record.extend([
                    fmt_real(s.scan_min),
                    fmt_real(s.scan_max),
                    s.scan_points.to_string(),
                    fmt_real(s.tol),
                ]);
                record.push(row.outcome.as_ref().err().cloned().unwrap_or_default());
                finish(&mut record, row.wall_time);
                csv.write_record(&record).map_err(csv_err)?;
            }
        }
    }
    csv.flush()?;
    Ok(())
}

/// A value that may be written as a scalar or a list in config files.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    pub fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Optional sweep settings from a flat config file or command-line flags.
/// Keys mirror the flag names.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SweepOverrides {
    pub preset: Option<String>,
    pub quantity: Option<String>,
    pub axis: Option<String>,
    pub scale: Option<String>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub points: Option<usize>,
    pub mass: Option<OneOrMany<f64>>,
    pub gap: Option<OneOrMany<f64>>,
    pub family: Option<OneOrMany<String>>,
    pub ads_length: Option<f64>,
    pub zeta: Option<i32>,
    pub dist_a: Option<f64>,
    pub sep: Option<f64>,
    pub scan_min: Option<f64>,
    pub scan_max: Option<f64>,
    pub scan_points: Option<usize>,
    pub tol: Option<f64>,
    pub timing: Option<bool>,
}

impl SweepOverrides {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fields set in `self` win over those in `lower`.
    pub fn over(self, lower: SweepOverrides) -> SweepOverrides {
        macro_rules! pick {
            ($($f:ident),+) => { SweepOverrides { $($f: self.$f.or(lower.$f)),+ } };
        }
        pick!(
            preset, quantity, axis, scale, min, max, points, mass, gap, family, ads_length, zeta,
            dist_a, sep, scan_min, scan_max, scan_points, tol, timing
        )
    }

    /// Starts from the named preset (default `custom`) and applies every set
    /// field.
    pub fn resolve(self) -> Result<SweepSpec> {
        let preset = self
            .preset
            .as_deref()
            .map(Preset::from_str)
            .transpose()?
            .unwrap_or(Preset::Custom);
        let mut spec = SweepSpec::preset(preset);
        if let Some(q) = self.quantity {
            spec.quantity = q.parse()?;
        }
        if let Some(a) = self.axis {
            spec.grid.axis = a.parse()?;
        }
        if let Some(s) = self.scale {
            spec.grid.scale = s.parse()?;
        }
        if let Some(v) = self.min {
            spec.grid.min = v;
        }
        if let Some(v) = self.max {
            spec.grid.max = v;
        }
        if let Some(v) = self.points {
            spec.grid.points = v;
        }
        if let Some(v) = self.mass {
            spec.masses = v.into_vec();
        }
        if let Some(v) = self.gap {
            spec.gaps = v.into_vec();
        }
        if let Some(v) = self.family {
            spec.families = v
                .into_vec()
                .iter()
                .map(|s| s.parse())
                .collect::<Result<_>>()?;
        }
        if let Some(v) = self.ads_length {
            spec.ads_length = v;
        }
        if let Some(z) = self.zeta {
            spec.zeta =
                BoundaryCondition::try_from(z).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(v) = self.dist_a {
            spec.dist_a = v;
        }
        if let Some(v) = self.sep {
            spec.separation = v;
        }
        if let Some(v) = self.scan_min {
            spec.shadow.scan_min = v;
        }
        if let Some(v) = self.scan_max {
            spec.shadow.scan_max = v;
        }
        if let Some(v) = self.scan_points {
            spec.shadow.scan_points = v;
        }
        if let Some(v) = self.tol {
            spec.shadow.tol = v;
        }
        if let Some(v) = self.timing {
            spec.timing = v;
        }
        spec.validate()?;
        Ok(spec)
    }
}
