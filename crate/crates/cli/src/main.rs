//! `harvest`: single-point evaluation, sweeps, shadow searches and oracle
//! validation from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use harvest_core::observables::harvest;
use harvest_core::oracle::OracleSpec;
use harvest_core::shadow::{crossover_gap, d_death, CrossoverQuery, ShadowQuery};
use harvest_core::sweep::{self, Preset, SweepOverrides};
use harvest_core::validation::{validate, Tier};
use harvest_core::{
    BoundaryCondition, DetectorPair, Error, EvalSpec, Family, QuadratureSpec, SpacetimeParams,
    VERSION,
};

#[derive(Parser)]
#[command(name = "harvest", version, about = "Entanglement harvesting near BTZ black holes and RP2 geons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Evaluate P_A, P_B, X and the concurrence at one configuration.
    Eval(EvalCmd),
    /// Run a parameter sweep and write a CSV.
    Sweep(SweepCmd),
    /// Locate the entanglement-shadow boundary (and optionally the crossover gap).
    Shadow(ShadowCmd),
    /// Compare closed forms with the direct integrals and run invariant checks.
    Validate(ValidateCmd),
}

#[derive(Args, Clone)]
struct Numerics {
    /// Relative tolerance of each quadrature.
    #[arg(long, default_value_t = 1e-10)]
    quad_rel_tol: f64,
    /// Absolute tolerance of each quadrature.
    #[arg(long, default_value_t = 1e-14)]
    quad_abs_tol: f64,
    /// Image series stop once the tail bound is below this fraction of the sum.
    #[arg(long, default_value_t = 1e-10)]
    series_rel_tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_images: usize,
}

impl Numerics {
    fn spec(&self) -> Result<EvalSpec, Error> {
        let spec = EvalSpec {
            quad: QuadratureSpec::new(self.quad_rel_tol, self.quad_abs_tol, QuadratureSpec::default().max_levels)
                .map_err(|e| Error::Config(e.to_string()))?,
            series_rel_tol: self.series_rel_tol,
            max_images: self.max_images,
            ..EvalSpec::default()
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum FamilyArg {
    Btz,
    Geon,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Btz => Family::Btz,
            FamilyArg::Geon => Family::Geon,
        }
    }
}

fn parse_zeta(s: &str) -> Result<i32, String> {
    match s.parse::<i32>() {
        Ok(z @ -1..=1) => Ok(z),
        _ => Err(format!("zeta must be -1, 0 or 1, got {s}")),
    }
}

#[derive(Args)]
struct EvalCmd {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long, allow_negative_numbers = true)]
    mass: f64,
    #[arg(long, allow_negative_numbers = true)]
    gap: f64,
    /// Proper distance of detector A from the horizon.
    #[arg(long, allow_negative_numbers = true)]
    dist_a: f64,
    /// Proper distance from detector A to detector B (outward).
    #[arg(long, allow_negative_numbers = true)]
    sep: f64,
    #[arg(long, default_value_t = 10.0)]
    ads_length: f64,
    #[arg(long, default_value_t = 1, value_parser = parse_zeta, allow_negative_numbers = true)]
    zeta: i32,
    #[command(flatten)]
    numerics: Numerics,
}

#[derive(Args)]
struct SweepCmd {
    /// Flat TOML file whose keys mirror these flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<Preset>,
    /// `harvest` or `shadow`.
    #[arg(long)]
    quantity: Option<String>,
    /// `mass`, `gap` or `distance`.
    #[arg(long)]
    axis: Option<String>,
    /// `linear` or `log`.
    #[arg(long)]
    scale: Option<String>,
    #[arg(long)]
    min: Option<f64>,
    #[arg(long)]
    max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Fixed masses, comma separated.
    #[arg(long, value_delimiter = ',')]
    mass: Option<Vec<f64>>,
    /// Fixed gaps, comma separated.
    #[arg(long, value_delimiter = ',')]
    gap: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    family: Option<Vec<String>>,
    #[arg(long)]
    ads_length: Option<f64>,
    #[arg(long, value_parser = parse_zeta, allow_negative_numbers = true)]
    zeta: Option<i32>,
    #[arg(long)]
    dist_a: Option<f64>,
    #[arg(long)]
    sep: Option<f64>,
    #[arg(long)]
    scan_min: Option<f64>,
    #[arg(long)]
    scan_max: Option<f64>,
    #[arg(long)]
    scan_points: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Add a wall-time column (output is then no longer byte-stable).
    #[arg(long)]
    timing: bool,
    /// Output CSV path, `-` for stdout.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    numerics: Numerics,
}

impl SweepCmd {
    fn overrides(&self) -> SweepOverrides {
        use harvest_core::sweep::OneOrMany::Many;
        SweepOverrides {
            preset: self.preset.map(|p| p.to_string()),
            quantity: self.quantity.clone(),
            axis: self.axis.clone(),
            scale: self.scale.clone(),
            min: self.min,
            max: self.max,
            points: self.points,
            mass: self.mass.clone().map(Many),
            gap: self.gap.clone().map(Many),
            family: self.family.clone().map(Many),
            ads_length: self.ads_length,
            zeta: self.zeta,
            dist_a: self.dist_a,
            sep: self.sep,
            scan_min: self.scan_min,
            scan_max: self.scan_max,
            scan_points: self.scan_points,
            tol: self.tol,
            timing: self.timing.then_some(true),
        }
    }
}

#[derive(Args)]
struct ShadowCmd {
    /// Single mass; omit together with --mass-min/--mass-max for a mass sweep.
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gap: f64,
    #[arg(long, default_value_t = 0.5)]
    sep: f64,
    #[arg(long, default_value_t = 10.0)]
    ads_length: f64,
    #[arg(long, default_value_t = 1, value_parser = parse_zeta, allow_negative_numbers = true)]
    zeta: i32,
    /// Restrict to one family; both by default.
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long, default_value_t = 0.01)]
    scan_min: f64,
    #[arg(long, default_value_t = 10.0)]
    scan_max: f64,
    #[arg(long, default_value_t = 40)]
    scan_points: usize,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    /// Also search for the gap where the geon overtakes BTZ, with A at this
    /// distance from the horizon.
    #[arg(long)]
    crossover_dist_a: Option<f64>,
    /// Mass-sweep mode: log grid lower bound.
    #[arg(long, requires_all = ["mass_max", "out"], conflicts_with = "mass")]
    mass_min: Option<f64>,
    #[arg(long, requires = "mass_min")]
    mass_max: Option<f64>,
    #[arg(long, default_value_t = 30)]
    points: usize,
    /// CSV output for mass-sweep mode, `-` for stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    numerics: Numerics,
}

#[derive(Args)]
struct ValidateCmd {
    #[arg(long, value_enum, default_value_t = TierArg::Quick)]
    tier: TierArg,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
    #[command(flatten)]
    numerics: Numerics,
}

#[derive(Copy, Clone, ValueEnum)]
enum TierArg {
    Quick,
    Full,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn sha256_hex(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

fn provenance(input: &Value, eval: &EvalSpec) -> Value {
    let eval_json = serde_json::to_value(eval).expect("eval spec serialises");
    json!({
        "version": VERSION,
        "input_sha256": sha256_hex(&input.to_string()),
        "eval": eval_json,
        "eval_sha256": sha256_hex(&eval_json.to_string()),
    })
}

fn print_json(v: &Value) -> CmdResult {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v).map_err(|e| Failure::Usage(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn spacetime(mass: f64, ads_length: f64, zeta: i32, family: Family) -> Result<SpacetimeParams, Error> {
    SpacetimeParams::new(mass, ads_length, BoundaryCondition::try_from(zeta)?, family)
}

fn cmd_eval(c: EvalCmd) -> CmdResult {
    let eval = c.numerics.spec()?;
    let p = spacetime(c.mass, c.ads_length, c.zeta, c.family.into())?;
    let pair = DetectorPair::from_distances(c.dist_a, c.sep, c.gap, &p)?;
    let r = harvest(&pair, &p, &eval)?;
    let input = json!({
        "family": p.family(),
        "mass": c.mass,
        "ads_length": c.ads_length,
        "zeta": c.zeta,
        "gap": c.gap,
        "dist_a": c.dist_a,
        "sep": c.sep,
    });
    let mut out = serde_json::to_value(&r).expect("result serialises");
    let obj = out.as_object_mut().expect("result is an object");
    obj.insert("provenance".into(), provenance(&input, &eval));
    obj.insert("input".into(), input);
    print_json(&out)
}

fn open_output(path: &PathBuf) -> io::Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(io::stdout().lock()))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path).map_err(|e| {
            io::Error::new(e.kind(), format!("cannot write {}: {e}", path.display()))
        })?)))
    }
}

fn run_sweep(spec: &sweep::SweepSpec, eval: &EvalSpec, out: &PathBuf) -> CmdResult {
    // Open first so an unwritable path fails before any work.
    let w = open_output(out)?;
    let rows = sweep::run(spec, eval)?;
    sweep::write_csv(w, spec, eval, &rows)?;
    let failed = rows.failures();
    if failed > 0 {
        eprintln!(
            "warning: {failed} of {} points failed; see the error column",
            rows.len()
        );
    }
    Ok(())
}

fn cmd_sweep(c: SweepCmd) -> CmdResult {
    let eval = c.numerics.spec()?;
    let mut overrides = c.overrides();
    if let Some(path) = &c.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        overrides = overrides.over(SweepOverrides::from_toml(&text)?);
    }
    let spec = overrides.resolve()?;
    run_sweep(&spec, &eval, &c.out)
}

fn cmd_shadow(c: ShadowCmd) -> CmdResult {
    let eval = c.numerics.spec()?;
    let families: Vec<Family> = match c.family {
        Some(f) => vec![f.into()],
        None => vec![Family::Btz, Family::Geon],
    };

    if let (Some(lo), Some(hi)) = (c.mass_min, c.mass_max) {
        let out = c.out.as_ref().expect("clap enforces --out");
        let overrides = SweepOverrides {
            preset: Some(Preset::Custom.to_string()),
            quantity: Some("shadow".into()),
            axis: Some("mass".into()),
            scale: Some("log".into()),
            min: Some(lo),
            max: Some(hi),
            points: Some(c.points),
            gap: Some(sweep::OneOrMany::One(c.gap)),
            family: Some(sweep::OneOrMany::Many(
                families.iter().map(|f| f.to_string()).collect(),
            )),
            ads_length: Some(c.ads_length),
            zeta: Some(c.zeta),
            sep: Some(c.sep),
            scan_min: Some(c.scan_min),
            scan_max: Some(c.scan_max),
            scan_points: Some(c.scan_points),
            tol: Some(c.tol),
            ..Default::default()
        };
        return run_sweep(&overrides.resolve()?, &eval, out);
    }

    let mass = c
        .mass
        .ok_or_else(|| Failure::Usage("either --mass or --mass-min/--mass-max is required".into()))?;
    let mut results = Vec::new();
    for &family in &families {
        let q = ShadowQuery {
            spacetime: spacetime(mass, c.ads_length, c.zeta, family)?,
            separation: c.sep,
            gap: c.gap,
            scan_min: c.scan_min,
            scan_max: c.scan_max,
            scan_points: c.scan_points,
            tol: c.tol,
        };
        let o = d_death(&q, &eval)?;
        results.push(json!({
            "family": family,
            "status": o.status,
            "d_death": o.d_death,
            "bracket": o.bracket,
            "evaluations": o.evaluations,
        }));
    }
    let input = json!({
        "mass": mass,
        "gap": c.gap,
        "sep": c.sep,
        "ads_length": c.ads_length,
        "zeta": c.zeta,
        "scan_min": c.scan_min,
        "scan_max": c.scan_max,
        "scan_points": c.scan_points,
        "tol": c.tol,
        "crossover_dist_a": c.crossover_dist_a,
    });
    let crossover = match c.crossover_dist_a {
        Some(dist_a) => {
            let mut q = CrossoverQuery::new(mass, c.ads_length, dist_a, c.sep);
            q.boundary = BoundaryCondition::try_from(c.zeta)?;
            let o = crossover_gap(&q, &eval)?;
            json!({ "gap": o.gap, "bracket": o.bracket, "crossings": o.crossings })
        }
        None => Value::Null,
    };
    print_json(&json!({
        "input": input,
        "results": results,
        "crossover": crossover,
        "provenance": provenance(&input, &eval),
    }))
}

fn cmd_validate(c: ValidateCmd) -> CmdResult {
    let eval = c.numerics.spec()?;
    let tier = match c.tier {
        TierArg::Quick => Tier::Quick,
        TierArg::Full => Tier::Full,
    };
    let report = validate(tier, &eval, &OracleSpec::default());
    if c.json {
        print_json(&serde_json::to_value(&report).expect("report serialises"))?;
    } else {
        print!("{}", report.table());
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Numerical("validation failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Eval(c) => cmd_eval(c),
        Command::Sweep(c) => cmd_sweep(c),
        Command::Shadow(c) => cmd_shadow(c),
        Command::Validate(c) => cmd_validate(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
