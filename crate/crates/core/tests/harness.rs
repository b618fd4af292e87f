use irskey::harness::{
    run_allocation_sweep, run_ppp_sweep, run_scheme_comparison, run_validation, summary_path, write_csv,
    ExperimentConfig, Scheme,
};
use irskey::stats::Summary;

fn small() -> ExperimentConfig {
    ExperimentConfig {
        trials: 12,
        sweep_values: vec![10.0, 20.0],
        alloc_l_values: vec![500, 1000],
        alloc_p_values: vec![20.0, 0.0],
        ppp_n_values: vec![20, 40],
        ppp_rounds: 100,
        ..Default::default()
    }
}

#[test]
fn aggregates_recompute_from_csv_rows() {
    let cfg = small();
    let report = run_scheme_comparison(&cfg).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, "compare", &cfg, &report.rows).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), cfg.trials * cfg.sweep_values.len() * cfg.schemes.len());
    for point in &report.points {
        let values: Vec<f64> = records
            .iter()
            .filter(|r| {
                r[col("value")].parse::<f64>().unwrap() == point.value && r[col("scheme")] == *point.scheme.as_str()
            })
            .map(|r| r[col("c_edt")].parse().unwrap())
            .collect();
        assert_eq!(Summary::of(&values), point.c_edt);
    }
}

#[test]
fn runs_are_reproducible_and_seed_dependent() {
    let cfg = small();
    let a = run_scheme_comparison(&cfg).unwrap();
    let b = run_scheme_comparison(&cfg).unwrap();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(run_scheme_comparison(&other).unwrap().rows, a.rows);
}

#[test]
fn override_of_default_value_changes_nothing() {
    let cfg = small();
    let mut same = cfg.clone();
    same.set_override("P_dbm=20").unwrap();
    assert_eq!(
        run_allocation_sweep(&cfg).unwrap(),
        run_allocation_sweep(&same).unwrap()
    );
}

#[test]
fn allocation_curves_cover_the_admissible_range() {
    let cfg = small();
    let report = run_allocation_sweep(&cfg).unwrap();
    for curve in &report.curves {
        assert_eq!(curve.q.first(), Some(&cfg.q_th));
        assert_eq!(curve.q.last(), Some(&(curve.l.div_ceil(2) - 1)));
        assert!(curve.is_unimodal());
    }
    assert_eq!(report.rows.len(), cfg.trials * 4);
}

#[test]
fn ppp_sweep_shapes_and_empty_realizations() {
    let cfg = small();
    let report = run_ppp_sweep(&cfg).unwrap();
    assert_eq!(report.rows.len(), cfg.trials * 2 * 2 * 2);
    assert_eq!(report.points.len(), 8);
    assert_eq!(report.fits.len(), 4);
    // no sampled eavesdropper means no eavesdropper correlation
    for row in report.rows.iter().filter(|r| r.eves == 0) {
        assert_eq!(row.rho_e_max_sim, 0.0);
    }
    assert!(report.rows.iter().all(|r| r.r_skg_sim >= 0.0 && r.r_skg_theory > 0.0));
}

#[test]
fn empirical_moment_mode_runs() {
    let mut cfg = small();
    cfg.set_override("ppp_moments=empirical").unwrap();
    let report = run_ppp_sweep(&cfg).unwrap();
    assert!(report.rows.iter().all(|r| (0.0..=1.0).contains(&r.rho_e_max_theory)));
}

#[test]
fn benchmark_key_budget_is_configurable() {
    let mut cfg = small();
    cfg.schemes = vec![Scheme::NoIrs];
    cfg.sweep_values = vec![20.0];
    let one = run_scheme_comparison(&cfg).unwrap();
    cfg.benchmark_key_samples = 2;
    let two = run_scheme_comparison(&cfg).unwrap();
    for (a, b) in one.rows.iter().zip(&two.rows) {
        assert!(b.c_edt >= a.c_edt);
        assert_eq!(b.q_star, 2);
    }
}

#[test]
fn validation_suite_passes_at_defaults() {
    let report = run_validation(&ExperimentConfig::default());
    for c in &report.checks {
        assert!(c.passed, "{}: {}", c.name, c.detail);
    }
}

#[test]
fn config_files_load() {
    let dir = tempfile_dir();
    let path = dir.join("run.toml");
    std::fs::write(
        &path,
        "# sweep over elements\nsweep_axis = \"N\"\nsweep_values = [20, 40]\nP_dbm = 10\nseed = 9\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.sweep_axis, "N");
    assert_eq!(cfg.sweep_values, vec![20.0, 40.0]);
    assert_eq!((cfg.p_dbm, cfg.seed), (10.0, 9));
    assert_eq!(summary_path(&path).file_name().unwrap(), "run.toml.summary.json");
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("irskey-harness-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
