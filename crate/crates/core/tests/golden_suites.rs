use std::fs;
use std::path::Path;

use edp_core::golden::{self, CHAIN_FILE, GRID_FILE, MINPLUS_FILE, SCENES_FILE};
use edp_core::oracle::{self, TinyInstance};
use edp_core::verify::{self, Suite};
use edp_core::Error;

fn copy_golden(to: &Path) {
    for file in [MINPLUS_FILE, CHAIN_FILE, GRID_FILE, SCENES_FILE] {
        fs::copy(golden::default_dir().join(file), to.join(file)).unwrap();
    }
}

#[test]
fn committed_suites_pass() {
    for suite in Suite::ALL {
        let report = verify::run_suite(suite, &golden::default_dir()).unwrap_or_else(|e| panic!("{suite}: {e}"));
        assert!(report.cases > 0);
    }
}

#[test]
fn golden_files_reparse_to_identical_text() {
    let dir = golden::default_dir();
    let read = |f: &str| fs::read_to_string(dir.join(f)).unwrap();
    assert_eq!(golden::format_minplus(&golden::parse_minplus(&read(MINPLUS_FILE)).unwrap()), read(MINPLUS_FILE));
    assert_eq!(golden::format_chain(&golden::parse_chain(&read(CHAIN_FILE)).unwrap()), read(CHAIN_FILE));
    assert_eq!(golden::format_grid(&golden::parse_grid(&read(GRID_FILE)).unwrap()), read(GRID_FILE));
    assert_eq!(golden::format_scenes(&golden::parse_scenes(&read(SCENES_FILE)).unwrap()), read(SCENES_FILE));
}

#[test]
fn grid_suite_shape() {
    let cases = golden::load_grid(&golden::default_dir()).unwrap();
    assert_eq!(cases.len(), 20);
    for case in &cases {
        let v = &case.instance.volume;
        assert_eq!((v.width(), v.height(), v.labels()), (4, 4, 3));
        assert_eq!(case.edp_iterations, 8);
        assert!(case.ratio_bound() >= 1.0);
    }
}

/// Spot-check that the committed minima are what the enumeration produces.
#[test]
fn committed_grid_minima_match_a_fresh_enumeration() {
    let cases = golden::load_grid(&golden::default_dir()).unwrap();
    for case in cases.iter().take(2) {
        let fresh = TinyInstance::generate(case.instance.seed, 4, 4, 3).unwrap();
        assert_eq!(fresh, case.instance);
        let (min, field) = oracle::oracle_grid(&fresh).unwrap();
        assert_eq!((min, &field), (case.min, &case.field));
    }
}

#[test]
fn corrupted_value_names_the_suite() {
    let dir = tempfile::tempdir().unwrap();
    copy_golden(dir.path());
    let path = dir.path().join(MINPLUS_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let out_line = text.lines().position(|l| l.starts_with("out ")).unwrap();
    let corrupted: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(i, l)| if i == out_line { l.replacen("out ", "out 1", 1) } else { l.to_string() })
        .collect();
    fs::write(&path, corrupted.join("\n")).unwrap();
    match verify::run_suite(Suite::Minplus, dir.path()) {
        Err(Error::Golden { suite, message }) => {
            assert_eq!(suite, "minplus");
            assert!(message.contains("case 0"), "{message}");
        }
        other => panic!("expected a golden failure, got {other:?}"),
    }
    // other suites are unaffected
    verify::run_suite(Suite::Chain, dir.path()).unwrap();
}

#[test]
fn tightened_bound_is_a_regression() {
    let dir = tempfile::tempdir().unwrap();
    copy_golden(dir.path());
    let mut cases = golden::load_grid(dir.path()).unwrap();
    let target = cases.iter_mut().find(|c| c.edp_energy > c.min).expect("some instance above optimum");
    target.edp_energy -= 1;
    fs::write(dir.path().join(GRID_FILE), golden::format_grid(&cases)).unwrap();
    let err = verify::run_suite(Suite::Grid, dir.path()).unwrap_err();
    assert!(err.to_string().contains("exceeds committed"), "{err}");
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(verify::run_suite(Suite::Chain, dir.path()), Err(Error::Io { .. })));
}
