use harvest_core::observables::EvalSpec;
use harvest_core::sweep::{self, Preset, Quantity, SweepOverrides, SweepSpec};

fn render(spec: &SweepSpec) -> String {
    let eval = EvalSpec::default();
    let out = sweep::run(spec, &eval).unwrap();
    let mut buf = Vec::new();
    sweep::write_csv(&mut buf, spec, &eval, &out).unwrap();
    String::from_utf8(buf).unwrap()
}

fn body(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn fig2_preset_rows() {
    let spec = SweepSpec::preset(Preset::Fig2);
    let csv = render(&spec);
    let rows = body(&csv);
    assert_eq!(rows.len() - 1, 2 * 3 * 2 * spec.grid.points);
    let header: Vec<&str> = rows[0].split(',').collect();
    let err_col = header.iter().position(|&c| c == "error").unwrap();
    assert!(rows[1..]
        .iter()
        .all(|r| r.split(',').nth(err_col) == Some("")));
}

#[test]
fn metadata_header() {
    let spec = SweepSpec::preset(Preset::Fig3);
    let csv = render(&spec);
    let meta: Vec<&str> = csv.lines().take_while(|l| l.starts_with('#')).collect();
    assert!(meta[0].starts_with(&format!("# harvest {}", harvest_core::VERSION)));
    assert!(meta.iter().any(|l| *l == format!("# spec: {}", spec.echo())));
    assert!(meta.iter().any(|l| *l == format!("# spec_sha256: {}", spec.sha256())));
    assert!(meta.iter().any(|l| l.starts_with("# eval: ") && l.contains("series_rel_tol")));
}

#[test]
fn reals_have_twelve_significant_digits() {
    let mut spec = SweepSpec::preset(Preset::Fig4);
    spec.grid.points = 2;
    let csv = render(&spec);
    let rows = body(&csv);
    let re = |s: &str| {
        let (mant, exp) = s.split_once('e').unwrap();
        let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
        digits.len() == 12 && exp.parse::<i32>().is_ok()
    };
    for row in &rows[1..] {
        let f: Vec<&str> = row.split(',').collect();
        assert!(re(f[0]) && re(f[7]) && re(f[12]), "{row}");
    }
}

#[test]
fn byte_identical_reruns() {
    for preset in [Preset::Fig5, Preset::Fig6] {
        let spec = SweepSpec::preset(preset);
        assert_eq!(render(&spec), render(&spec), "{preset}");
    }
}

#[test]
fn failures_recorded_per_row() {
    let mut spec = SweepSpec::preset(Preset::Custom);
    spec.grid.points = 2;
    spec.masses = vec![0.01];
    spec.gaps = vec![0.1];
    // Coincident detectors make every correlation term fail.
    spec.separation = 1e-300;
    let eval = EvalSpec::default();
    let out = sweep::run(&spec, &eval).unwrap();
    assert_eq!(out.failures(), out.len());
    let mut buf = Vec::new();
    sweep::write_csv(&mut buf, &spec, &eval, &out).unwrap();
    let csv = String::from_utf8(buf).unwrap();
    let rows = body(&csv);
    assert!(rows[1..].iter().all(|r| r.contains("distinct")), "{csv}");
}

#[test]
fn fig7_shadow_sweep() {
    let mut spec = SweepSpec::preset(Preset::Fig7);
    spec.grid.points = 4;
    spec.gaps = vec![0.01];
    assert_eq!(spec.quantity, Quantity::Shadow);
    let csv = render(&spec);
    let rows = body(&csv);
    assert_eq!(rows.len(), 1 + 4 * 2);
    let header: Vec<&str> = rows[0].split(',').collect();
    let col = |name: &str| header.iter().position(|&c| c == name).unwrap();
    for pair in rows[1..].chunks(2) {
        let d = |r: &str| r.split(',').nth(col("d_death")).unwrap().parse::<f64>().unwrap();
        assert!(pair[0].contains(",btz,") && pair[1].contains(",geon,"));
        assert!(d(pair[1]) >= d(pair[0]), "{pair:?}");
    }
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.toml");
    std::fs::write(
        &path,
        "preset = \"custom\"\naxis = \"gap\"\nscale = \"linear\"\nmin = 0.1\nmax = 1.0\npoints = 4\nmass = 0.05\nfamily = [\"geon\"]\nsep = 0.25\n",
    )
    .unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let spec = SweepOverrides::from_toml(&text).unwrap().resolve().unwrap();
    assert_eq!(spec.points().len(), 4);
    assert_eq!(spec.separation, 0.25);
    let flags = SweepOverrides {
        points: Some(3),
        ..Default::default()
    };
    let spec = flags
        .over(SweepOverrides::from_toml(&text).unwrap())
        .resolve()
        .unwrap();
    assert_eq!(spec.points().len(), 3);
}

#[test]
fn empty_grid_rejected() {
    let o = SweepOverrides {
        points: Some(1),
        ..Default::default()
    };
    assert!(o.resolve().is_err());
}
