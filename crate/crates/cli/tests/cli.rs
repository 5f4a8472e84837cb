use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use xvar::estimation::{
    bivariate_plus_full_sets, common_xi_fit, estimate_extremal_coeffs, scale_balanced_weights,
    LossPanel, ThresholdRule,
};
use xvar::report::{to_json_string, EstimatesReport};
use xvar::simulate::sample_rv_portfolio;
use xvar::tm_lp::{dvariate_lower_certificate, tm_bounds};
use xvar::{dvariate_bounds, DiscreteSpectralMeasure, SubsetFamily, SubsetId, TmLpConfig};

const SCHEMA_BASE: &str = "https://xvar.invalid/schemas/";

fn xvar(args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_xvar"));
    for (k, _) in std::env::vars() {
        if k.starts_with("XVAR_") {
            cmd.env_remove(k);
        }
    }
    cmd.args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_str(&stdout(out)).unwrap()
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

fn validate(schema: &str, value: &Value) {
    let mut opts = jsonschema::options();
    for entry in std::fs::read_dir(schema_dir()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        let contents: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let resource = jsonschema::Resource::from_contents(contents).unwrap();
        opts = opts.with_resource(format!("{SCHEMA_BASE}{name}"), resource);
    }
    let root: Value =
        serde_json::from_str(&std::fs::read_to_string(schema_dir().join(schema)).unwrap()).unwrap();
    let validator = opts.build(&root).unwrap();
    let errors: Vec<String> = validator.iter_errors(value).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{schema}: {errors:#?}");
}

/// Compares with `tests/golden/<name>`; set `XVAR_UPDATE_GOLDEN=1` to rewrite.
fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var("XVAR_UPDATE_GOLDEN").is_ok() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|_| panic!("missing {}; run with XVAR_UPDATE_GOLDEN=1", path.display()));
    assert_eq!(actual, expected, "{name} drifted from the golden file");
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn panel_csv(panel: &LossPanel) -> String {
    let mut buf = Vec::new();
    panel.write_csv(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

/// 10 assets drawn from the extremal measure of `theta(D) = 3.15`.
fn sim_panel() -> LossPanel {
    let m = dvariate_lower_certificate(10, 1.0, 3.15).unwrap().measure;
    sample_rv_portfolio(&m, 0.25, 5000, 11).unwrap()
}

fn family_json(family: &SubsetFamily) -> String {
    serde_json::to_string(family).unwrap()
}

#[test]
fn estimate_comonotone_columns_give_unit_theta() {
    let dir = TempDir::new().unwrap();
    let m = DiscreteSpectralMeasure::comonotone(2).unwrap();
    let panel = sample_rv_portfolio(&m, 0.3, 3000, 5).unwrap();
    let csv = write(&dir, "co.csv", &panel_csv(&panel));
    let v = json(&xvar(&["estimate", &csv]));
    assert_eq!(v["theta"]["[1,2]"], 1.0);
    validate("estimates.schema.json", &v);
}

#[test]
fn estimate_matches_library_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let panel = sim_panel();
    let csv = write(&dir, "sim.csv", &panel_csv(&panel));
    let cli = stdout(&xvar(&["estimate", &csv]));

    // re-read so both sides see the same parsed values
    let (panel, dropped) = LossPanel::from_csv_path(&csv).unwrap();
    let model = common_xi_fit(&panel, 0.98).unwrap();
    let w = scale_balanced_weights(&model.sigma).unwrap();
    let sets = bivariate_plus_full_sets(10).unwrap();
    let est = estimate_extremal_coeffs(&panel.scaled(&w).unwrap(), 0.98, &sets, ThresholdRule::Reference).unwrap();
    let lib = EstimatesReport::new(
        panel.labels().to_vec(),
        panel.rows(),
        dropped,
        0.98,
        &model,
        w,
        ThresholdRule::Reference,
        &est,
    );
    assert_eq!(cli, to_json_string(&lib).unwrap());
    golden("estimate_sim.json", &cli);
    validate("estimates.schema.json", &serde_json::from_str(&cli).unwrap());
}

#[test]
fn estimate_csv_format_lists_sets() {
    let dir = TempDir::new().unwrap();
    let csv = write(&dir, "sim.csv", &panel_csv(&sim_panel()));
    let out = stdout(&xvar(&["estimate", &csv, "--sets", "dvariate", "--format", "csv"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "set,theta");
    assert_eq!(lines.len(), 1 + 10 + 1);
    assert!(lines[11].starts_with("\"[1,2,3,4,5,6,7,8,9,10]\","));
}

#[test]
fn missing_file_exits_2() {
    let out = xvar(&["estimate", "/definitely/not/here.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not/here.csv"));
}

#[test]
fn parse_error_reports_line_and_exits_2() {
    let dir = TempDir::new().unwrap();
    let csv = write(&dir, "bad.csv", "A,B\n1,2\n3,oops\n");
    let out = xvar(&["estimate", &csv]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn short_panel_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let panel = sample_rv_portfolio(&DiscreteSpectralMeasure::independent(2).unwrap(), 0.3, 200, 1).unwrap();
    let csv = write(&dir, "short.csv", &panel_csv(&panel));
    assert_eq!(xvar(&["estimate", &csv]).status.code(), Some(3));
}

#[test]
fn bounds_single_constraint_matches_closed_form() {
    let out = stdout(&xvar(&["bounds", "--d", "10", "--theta", "3.15", "--xi", "0.1981"]));
    let lib = dvariate_bounds(10, 0.1981, 3.15).unwrap();
    assert_eq!(out, to_json_string(&lib).unwrap());
    golden("bounds_d10.json", &out);
    let v: Value = serde_json::from_str(&out).unwrap();
    validate("bounds.schema.json", &v);
    assert!((v["chi_upper"].as_f64().unwrap() - 9.7818).abs() < 5e-4);
    // the closed form at 3.15 is 4.11833; the tabulated 4.1219 corresponds to theta = 3.1476
    assert_eq!(v["chi_lower"].as_f64().unwrap(), 4.11833);
    let t = json(&xvar(&["bounds", "--d", "10", "--theta", "3.1476", "--xi", "0.1981"]));
    assert!((t["chi_lower"].as_f64().unwrap() - 4.1219).abs() < 5e-4);
}

#[test]
fn xi_one_curve_is_flat_at_d() {
    let out = stdout(&xvar(&["bounds", "--d", "6", "--xi", "1", "--curve", "theta", "--points", "9", "--format", "csv"]));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("theta,chi_lower,chi_upper"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 9);
    for r in rows {
        assert_eq!((r[1], r[2]), (6.0, 6.0));
    }
}

#[test]
fn curve_output_file_keeps_main_result() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("curve.csv");
    let v = json(&xvar(&[
        "bounds", "--d", "10", "--theta", "3", "--xi", "0.5", "--curve", "theta",
        "--curve-output", path.to_str().unwrap(), "--points", "5",
    ]));
    assert_eq!(v["method"], "closed_form_dvariate");
    let curve = std::fs::read_to_string(path).unwrap();
    assert_eq!(curve.lines().count(), 6);
    assert!(curve.lines().nth(1).unwrap().starts_with("1.0,"));
}

#[test]
fn bivariate_family_matches_library() {
    let dir = TempDir::new().unwrap();
    let fam = SubsetFamily::bivariate(2, |_, _| 1.4).unwrap();
    let path = write(&dir, "f.json", &family_json(&fam));
    let auto = stdout(&xvar(&["bounds", &path, "--xi", "0.4"]));
    assert_eq!(auto, to_json_string(&dvariate_bounds(2, 0.4, 1.4).unwrap()).unwrap());
    golden("bounds_d2.json", &auto);

    let lp = stdout(&xvar(&["bounds", &path, "--xi", "0.4", "--method", "tm-lp"]));
    let mut lib = tm_bounds(&fam, 0.4, &TmLpConfig::default()).unwrap();
    lib.certificate = None;
    assert_eq!(lp, to_json_string(&lib).unwrap());
    // for d = 2 the LP and the closed form coincide
    let (a, b): (Value, Value) = (serde_json::from_str(&auto).unwrap(), serde_json::from_str(&lp).unwrap());
    assert_eq!(a["chi_lower"], b["chi_lower"]);
}

#[test]
fn inconsistent_constraints_are_refused_until_calibrated() {
    let dir = TempDir::new().unwrap();
    let s = |m| SubsetId::new(m, 3).unwrap();
    // pairwise fine, but theta(D) = 1 with theta({1,2}) = 2 is impossible
    let fam = SubsetFamily::raw(
        3,
        vec![(s(1), 1.0), (s(2), 1.0), (s(4), 1.0), (s(3), 2.0), (s(5), 1.5), (s(6), 1.5), (s(7), 1.0)],
    )
    .unwrap();
    let path = write(&dir, "bad.json", &family_json(&fam));
    let out = xvar(&["bounds", &path, "--xi", "0.5"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("xvar calibrate"));

    let cal = stdout(&xvar(&["calibrate", &path]));
    let v: Value = serde_json::from_str(&cal).unwrap();
    validate("calibration.schema.json", &v);
    assert!(v["input_violations"].as_u64().unwrap() > 0);
    let cal_path = write(&dir, "cal.json", &cal);
    let b = json(&xvar(&["bounds", &cal_path, "--xi", "0.5"]));
    validate("bounds.schema.json", &b);
    assert_eq!(b["method"], "tm_lp");
}

#[test]
fn tm_lp_reports_a_verified_certificate() {
    let dir = TempDir::new().unwrap();
    let fam = SubsetFamily::bivariate(4, |i, j| 1.2 + 0.1 * (i + j) as f64).unwrap();
    let path = write(&dir, "f.json", &family_json(&fam));
    let v = json(&xvar(&["tm-lp", &path, "--xi", "0.3", "--kkt-samples", "2000"]));
    validate("tm_lp.schema.json", &v);
    assert_eq!(v["kkt"]["certified"], true);
}

#[test]
fn sectors_accepts_both_input_forms() {
    let dir = TempDir::new().unwrap();
    let direct = write(&dir, "a.json", r#"{"blocks": [[1, 2], [3, 4, 5]], "beta": 0.3, "sector_thetas": [1.5, 2.0]}"#);
    let a = json(&xvar(&["sectors", &direct, "--xi", "0.5"]));
    validate("sectors.schema.json", &a);
    // the same model through its portfolio coefficients
    let c0 = a["overall_coefficient"].as_f64().unwrap();
    let ci = a["block_coefficients"].clone();
    let coeffs = write(&dir, "b.json", &format!(r#"{{"blocks": [[1, 2], [3, 4, 5]], "c0": {c0}, "ci": {ci}}}"#));
    let b = json(&xvar(&["sectors", &coeffs, "--xi", "0.5"]));
    assert!((a["chi_lower"].as_f64().unwrap() - b["chi_lower"].as_f64().unwrap()).abs() < 1e-5);
    let bad = write(&dir, "c.json", r#"{"blocks": [[1, 2]], "beta": 0.3}"#);
    assert_eq!(xvar(&["sectors", &bad, "--xi", "0.5"]).status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let run = |seed: &str| stdout(&xvar(&["simulate", "--d", "4", "--theta", "2.5", "--xi", "0.3", "-n", "20000", "--seed", seed]));
    let (a, b, c) = (run("9"), run("9"), run("10"));
    assert_eq!(a, b);
    assert_ne!(a, c);
    let csv = write(&dir, "sim.csv", &a);
    // per-asset thresholds avoid amplifying noise in the fitted scales
    let v = json(&xvar(&["estimate", &csv, "--sets", "dvariate", "--threshold-rule", "per-asset"]));
    let theta = v["theta"]["[1,2,3,4]"].as_f64().unwrap();
    assert!((theta - 2.5).abs() < 0.25, "{theta}");
}

#[test]
fn config_file_env_and_flags_layer() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", r#"{"xi": 0.5, "format": "csv"}"#);
    let from_file = stdout(&xvar(&["--config", &cfg, "bounds", "--d", "3", "--theta", "2"]));
    assert!(from_file.starts_with("rho_lower,"));
    let lib = dvariate_bounds(3, 0.5, 2.0).unwrap();
    assert!(from_file.contains(&xvar::report::format_float(lib.rho_lower)));

    let flag = stdout(&xvar(&["--config", &cfg, "bounds", "--d", "3", "--theta", "2", "--xi", "1", "--format", "json"]));
    let v: Value = serde_json::from_str(&flag).unwrap();
    assert_eq!(v["chi_lower"], 3.0);

    let out = Command::new(env!("CARGO_BIN_EXE_xvar"))
        .env("XVAR_XI", "1")
        .args(["--config", &cfg, "bounds", "--d", "3", "--theta", "2"])
        .output()
        .unwrap();
    assert!(String::from_utf8(out.stdout).unwrap().contains(",3.0,3.0,"));

    let bad = write(&dir, "bad.json", r#"{"xii": 1}"#);
    assert_eq!(xvar(&["--config", &bad, "bounds", "--d", "3"]).status.code(), Some(2));
}

#[test]
fn output_flag_writes_file() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("b.json");
    let out = xvar(&["bounds", "--d", "4", "--xi", "0.5", "-o", path.to_str().unwrap()]);
    assert!(out.status.success() && out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["method"], "frechet");
}

#[test]
fn pipeline_report_has_every_section() {
    let dir = TempDir::new().unwrap();
    let csv = write(&dir, "sim.csv", &panel_csv(&sim_panel()));
    let out = stdout(&xvar(&["pipeline", &csv, "--points", "7"]));
    let v: Value = serde_json::from_str(&out).unwrap();
    validate("pipeline.schema.json", &v);
    for key in ["weights", "xi", "sigma", "theta", "calibration", "bounds", "var_curves", "return_levels"] {
        assert!(!v[key].is_null(), "missing {key}");
    }
    assert!(!v["bounds"]["bivariate"].is_null());
    assert_eq!(v["var_curves"].as_array().unwrap().len(), 7);
    let years: Vec<f64> = v["return_levels"]["rows"].as_array().unwrap().iter().map(|r| r["years"].as_f64().unwrap()).collect();
    assert_eq!(years, vec![10.0, 100.0, 1000.0]);
    // bounds are ordered on every row
    let b = &v["bounds"];
    let lower = b["bivariate_full"]["chi_lower"].as_f64().unwrap();
    assert!(b["frechet"]["chi_lower"].as_f64().unwrap() <= lower);
    assert!(lower <= b["dvariate"]["chi_upper"].as_f64().unwrap());
    // deterministic
    assert_eq!(out, stdout(&xvar(&["pipeline", &csv, "--points", "7"])));
}

#[test]
fn pipeline_single_asset_degenerates_to_one() {
    let dir = TempDir::new().unwrap();
    let panel = sample_rv_portfolio(&DiscreteSpectralMeasure::independent(1).unwrap(), 0.3, 20_000, 2).unwrap();
    let csv = write(&dir, "one.csv", &panel_csv(&panel));
    let v = json(&xvar(&["pipeline", &csv, "--points", "3"]));
    validate("pipeline.schema.json", &v);
    for key in ["frechet", "dvariate"] {
        assert_eq!(v["bounds"][key]["chi_lower"], 1.0);
        assert_eq!(v["bounds"][key]["chi_upper"], 1.0);
    }
    assert!(v["bounds"]["bivariate"].is_null());
}

#[test]
fn pipeline_csv_emits_curves() {
    let dir = TempDir::new().unwrap();
    let csv = write(&dir, "sim.csv", &panel_csv(&sim_panel()));
    let out = stdout(&xvar(&["pipeline", &csv, "--points", "4", "--format", "csv"]));
    let header = out.lines().next().unwrap();
    assert!(header.starts_with("alpha,q,empirical_portfolio,baseline_gp,baseline_empirical,gp_frechet_lower"));
    assert_eq!(out.lines().count(), 5);
}

#[test]
fn help_lists_subcommands() {
    let out = stdout(&xvar(&["--help"]));
    for cmd in ["estimate", "calibrate", "bounds", "tm-lp", "sectors", "simulate", "pipeline"] {
        assert!(out.contains(cmd), "{cmd}");
    }
}
