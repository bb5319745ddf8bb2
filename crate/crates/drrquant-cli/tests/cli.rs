//! Black-box tests of the drrquant binary: subcommand flows and the
//! documented exit codes (0 success, 2 validation error, 3 runtime error).

use std::path::Path;
use std::process::{Command, Output};

fn drrquant(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drrquant"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_spec(dir: &Path) -> std::path::PathBuf {
    let spec = serde_json::json!({
        "dims": [60, 60, 60],
        "spacing": [2.0, 2.0, 2.0],
        "lungs": [
            {"shape": "box", "center_mm": [60.0, 60.0, 60.0], "half_extents_mm": [50.0, 50.0, 50.0]}
        ],
        "lesions": [
            {"shape": "box", "center_mm": [60.0, 60.0, 60.0], "half_extents_mm": [25.0, 50.0, 25.0]}
        ]
    });
    let path = dir.join("spec.json");
    std::fs::write(&path, serde_json::to_string_pretty(&spec).unwrap()).unwrap();
    path
}

#[test]
fn full_cli_flow() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_spec(root);

    let out = drrquant(&["phantom", "gen", "--spec", "spec.json", "--out", "case"], root);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(root.join("case/volume.mha").exists());
    assert!(root.join("case/truth.json").exists());

    let out = drrquant(
        &["drr", "generate", "--ct", "case/volume.mha", "--out", "drr.png"],
        root,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(root.join("drr.png").exists());
    assert!(root.join("drr.json").exists());
    assert!(root.join("drr.config.json").exists());

    let out = drrquant(
        &[
            "mask", "project", "--mode", "thickness", "--mask", "case/lung.mha",
            "--cutoff", "38", "--out", "lung2d.png",
        ],
        root,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = drrquant(
        &[
            "mask", "project", "--mode", "thickness", "--mask", "case/lesion.mha",
            "--cutoff", "38", "--out", "lesion2d.png",
        ],
        root,
    );
    assert!(out.status.success());

    let out = drrquant(
        &["quant", "pov", "--lung", "case/lung.mha", "--lesion", "case/lesion.mha"],
        root,
    );
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let pov = value["pov_percent"].as_f64().unwrap();

    let out = drrquant(
        &["quant", "poa", "--lung", "lung2d.png", "--lesion", "lesion2d.png"],
        root,
    );
    assert!(out.status.success());
    let value: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let poa = value["poa_percent"].as_f64().unwrap();
    // the lesion spans the full anteroposterior depth, so POa == POv
    assert_eq!(pov, poa);

    // evaluate with an explicit seed; repeat and compare bytes
    let manifest = serde_json::json!({
        "cases": [{
            "case_id": "c1",
            "ct_path": "case/volume.mha",
            "lung3d_path": "case/lung.mha",
            "lesion3d_path": "case/lesion.mha"
        }],
        "config": {"n_resamples": 50}
    });
    std::fs::write(root.join("manifest.json"), serde_json::to_string(&manifest).unwrap())
        .unwrap();
    let out = drrquant(
        &[
            "evaluate", "--manifest", "manifest.json", "--seed", "17",
            "--out", "rep1", "--format", "json,csv,md",
        ],
        root,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = drrquant(
        &[
            "evaluate", "--manifest", "manifest.json", "--seed", "17",
            "--out", "rep2", "--format", "json,csv,md",
        ],
        root,
    );
    assert!(out.status.success());
    for name in ["report.json", "report.md", "agreement.csv", "ttests.csv"] {
        let a = std::fs::read(root.join("rep1").join(name)).unwrap();
        let b = std::fs::read(root.join("rep2").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }

    let calib = drrquant(
        &[
            "calibrate", "--manifest", "manifest.json", "--mode", "thickness",
            "--grid", "10:90:10", "--out", "calib.json",
        ],
        root,
    );
    assert!(calib.status.success(), "{}", String::from_utf8_lossy(&calib.stderr));
    let value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.join("calib.json")).unwrap()).unwrap();
    // full-depth lesion: every cutoff reproduces POv, tie-break picks 10
    assert_eq!(value["best_cutoff"].as_f64().unwrap(), 10.0);
    assert_eq!(value["best_mae"].as_f64().unwrap(), 0.0);
}

#[test]
fn validation_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    // malformed phantom spec
    std::fs::write(root.join("bad.json"), "{\"dims\": \"nope\"}").unwrap();
    let out = drrquant(&["phantom", "gen", "--spec", "bad.json", "--out", "x"], root);
    assert_eq!(out.status.code(), Some(2));

    // manifest referencing a missing file
    let manifest = serde_json::json!({
        "cases": [{
            "case_id": "c1",
            "ct_path": "missing.mha",
            "lung3d_path": "missing.mha",
            "lesion3d_path": "missing.mha"
        }]
    });
    std::fs::write(root.join("manifest.json"), manifest.to_string()).unwrap();
    let out = drrquant(&["evaluate", "--manifest", "manifest.json", "--out", "rep"], root);
    assert_eq!(out.status.code(), Some(2));

    // bad grid syntax
    write_spec(root);
    let out = drrquant(&["phantom", "gen", "--spec", "spec.json", "--out", "case"], root);
    assert!(out.status.success());
    let manifest = serde_json::json!({
        "cases": [{
            "case_id": "c1",
            "ct_path": "case/volume.mha",
            "lung3d_path": "case/lung.mha",
            "lesion3d_path": "case/lesion.mha"
        }]
    });
    std::fs::write(root.join("manifest.json"), manifest.to_string()).unwrap();
    let out = drrquant(
        &["calibrate", "--manifest", "manifest.json", "--mode", "thickness",
          "--grid", "banana", "--out", "c.json"],
        root,
    );
    assert_eq!(out.status.code(), Some(2));

    // unknown report format
    let out = drrquant(
        &["evaluate", "--manifest", "manifest.json", "--out", "rep", "--format", "pdf"],
        root,
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_spec(root);
    let out = drrquant(&["phantom", "gen", "--spec", "spec.json", "--out", "case"], root);
    assert!(out.status.success());

    // corrupt the lesion payload after validation would pass
    let lesion = root.join("case/lesion.mha");
    let bytes = std::fs::read(&lesion).unwrap();
    std::fs::write(&lesion, &bytes[..bytes.len() - 64]).unwrap();

    let manifest = serde_json::json!({
        "cases": [{
            "case_id": "c1",
            "ct_path": "case/volume.mha",
            "lung3d_path": "case/lung.mha",
            "lesion3d_path": "case/lesion.mha"
        }]
    });
    std::fs::write(root.join("manifest.json"), manifest.to_string()).unwrap();
    let out = drrquant(&["evaluate", "--manifest", "manifest.json", "--out", "rep"], root);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("c1"), "error names the case: {stderr}");

    // --skip-bad-cases turns the failure into a skip listing
    let out = drrquant(
        &["evaluate", "--manifest", "manifest.json", "--out", "rep", "--skip-bad-cases"],
        root,
    );
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(root.join("rep/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["skipped_cases"][0]["case_id"], "c1");
}

#[test]
fn axis_permutation_flag() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_spec(root);
    assert!(drrquant(&["phantom", "gen", "--spec", "spec.json", "--out", "case"], root)
        .status
        .success());

    // identity permutation must not change the measurement
    let base = drrquant(
        &["quant", "pov", "--lung", "case/lung.mha", "--lesion", "case/lesion.mha"],
        root,
    );
    let permuted = drrquant(
        &["quant", "pov", "--lung", "case/lung.mha", "--lesion", "case/lesion.mha",
          "--axes", "zyx"],
        root,
    );
    assert!(base.status.success() && permuted.status.success());
    // POv is a count ratio, invariant under any axis permutation
    assert_eq!(base.stdout, permuted.stdout);

    let bad = drrquant(
        &["quant", "pov", "--lung", "case/lung.mha", "--lesion", "case/lesion.mha",
          "--axes", "xxy"],
        root,
    );
    assert_eq!(bad.status.code(), Some(2));
}
