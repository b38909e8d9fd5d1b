//! CLI behavior: exit codes, identity reductions, output atomicity, the
//! alternate box-column ordering, and thread-count independence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use detkit_core::boxes::nms;
use detkit_pipeline::formats::csv_io;

fn toy_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy")
}

fn detkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detkit"))
        .args(args)
        .output()
        .unwrap()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn unknown_subcommand_exits_2() {
    let output = detkit(&["transmogrify"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn missing_hierarchy_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.csv");
    let toy = toy_dir();
    let output = detkit(&[
        "expand",
        "--detections",
        toy.join("detections.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("--hierarchy"));
    assert!(!out.exists());
}

#[test]
fn expand_requires_exactly_one_input() {
    let dir = tempfile::tempdir().unwrap();
    let toy = toy_dir();
    let output = detkit(&[
        "--hierarchy",
        toy.join("hierarchy.json").to_str().unwrap(),
        "expand",
        "--detections",
        toy.join("detections.csv").to_str().unwrap(),
        "--ground-truth",
        toy.join("ground-truth.csv").to_str().unwrap(),
        "--out",
        dir.path().join("out.csv").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn out_of_range_score_is_a_data_error_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(
        &bad,
        "ImageID,LabelName,Score,XMin,YMin,XMax,YMax\n\
         im,/lbl/cat,0.5,0.1,0.1,0.4,0.4\n\
         im,/lbl/cat,1.5,0.1,0.1,0.4,0.4\n",
    )
    .unwrap();
    let toy = toy_dir();
    let ap_out = dir.path().join("ap.csv");
    let output = detkit(&[
        "--hierarchy",
        toy.join("hierarchy.json").to_str().unwrap(),
        "evaluate",
        "--detections",
        bad.to_str().unwrap(),
        "--ground-truth",
        toy.join("ground-truth.csv").to_str().unwrap(),
        "--ap-out",
        ap_out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3));
    assert!(
        stderr_of(&output).contains("line 3"),
        "{}",
        stderr_of(&output)
    );
    // malformed input never produces partial output
    assert!(!ap_out.exists());
}

#[test]
fn empty_scale_grid_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("grid.json");
    std::fs::write(&spec, r#"{"depth":[],"width":[1.0],"resolution":[1.0]}"#).unwrap();
    let output = detkit(&[
        "scale-search",
        "--grid-spec",
        spec.to_str().unwrap(),
        "--oracle",
        "builtin:rosenbrock",
    ]);
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn unreachable_constraint_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("grid.json");
    std::fs::write(
        &spec,
        r#"{"depth":[1.0],"width":[1.0],"resolution":[1.0],"target":2.0,"tol":0.0}"#,
    )
    .unwrap();
    let output = detkit(&[
        "scale-search",
        "--grid-spec",
        spec.to_str().unwrap(),
        "--oracle",
        "builtin:rosenbrock",
    ]);
    assert_eq!(output.status.code(), Some(4));
    assert!(stderr_of(&output).contains("no grid triple"));
}

#[test]
fn single_model_ensemble_reduces_to_per_class_nms() {
    let dir = tempfile::tempdir().unwrap();
    let toy = toy_dir();
    let manifest = dir.path().join("manifest.json");
    std::fs::write(
        &manifest,
        format!(
            r#"{{"models":[{{"id":"solo","detections_csv":"{}","ap_csv":"{}"}}],"alpha":1.0}}"#,
            toy.join("detections.csv").display(),
            toy.join("ap-a.csv").display(),
        ),
    )
    .unwrap();
    let fused_path = dir.path().join("fused.csv");
    let output = detkit(&[
        "ensemble",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        fused_path.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));

    // expected: plain per-(image, label) NMS at the default threshold
    let dets = csv_io::read_detections(&toy.join("detections.csv"), false).unwrap();
    let mut groups: BTreeMap<(String, String), Vec<_>> = BTreeMap::new();
    for det in dets {
        groups
            .entry((det.image_id.clone(), det.label.as_str().to_string()))
            .or_default()
            .push(det);
    }
    let mut expected = Vec::new();
    for group in groups.into_values() {
        expected.extend(nms(&group, 0.5).unwrap());
    }
    let expected_path = dir.path().join("expected.csv");
    csv_io::write_detections(&expected, &expected_path).unwrap();
    assert_eq!(
        std::fs::read(&fused_path).unwrap(),
        std::fs::read(&expected_path).unwrap()
    );
}

#[test]
fn oi_order_flag_reads_native_column_layout() {
    let dir = tempfile::tempdir().unwrap();
    let toy = toy_dir();
    // rewrite the toy detections in XMin,XMax,YMin,YMax order
    let canonical = std::fs::read_to_string(toy.join("detections.csv")).unwrap();
    let mut native = String::from("ImageID,LabelName,Score,XMin,XMax,YMin,YMax\n");
    for line in canonical.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        native.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            f[0], f[1], f[2], f[3], f[5], f[4], f[6]
        ));
    }
    let native_path = dir.path().join("native.csv");
    std::fs::write(&native_path, native).unwrap();
    let native_gt = {
        let canonical = std::fs::read_to_string(toy.join("ground-truth.csv")).unwrap();
        let mut out = String::from("ImageID,LabelName,XMin,XMax,YMin,YMax\n");
        for line in canonical.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                f[0], f[1], f[2], f[4], f[3], f[5]
            ));
        }
        let path = dir.path().join("native-gt.csv");
        std::fs::write(&path, out).unwrap();
        path
    };

    let run = |det: &Path, gt: &Path, oi: bool, ap: &Path| {
        let mut args = vec![
            "--hierarchy".to_string(),
            toy.join("hierarchy.json").display().to_string(),
            "evaluate".to_string(),
            "--detections".to_string(),
            det.display().to_string(),
            "--ground-truth".to_string(),
            gt.display().to_string(),
            "--ap-out".to_string(),
            ap.display().to_string(),
        ];
        if oi {
            args.push("--oi-order".to_string());
        }
        let arg_refs: Vec<&str> = args.iter().map(String::as_str).collect();
        detkit(&arg_refs)
    };
    let ap_a = dir.path().join("ap-a.csv");
    let ap_b = dir.path().join("ap-b.csv");
    let out_canonical = run(
        &toy.join("detections.csv"),
        &toy.join("ground-truth.csv"),
        false,
        &ap_a,
    );
    let out_native = run(&native_path, &native_gt, true, &ap_b);
    assert!(out_canonical.status.success());
    assert!(out_native.status.success(), "{}", stderr_of(&out_native));
    assert_eq!(out_canonical.stdout, out_native.stdout);
    assert_eq!(std::fs::read(ap_a).unwrap(), std::fs::read(ap_b).unwrap());
}

#[test]
fn nms_search_jobs_do_not_change_the_result() {
    let toy = toy_dir();
    let dir = tempfile::tempdir().unwrap();
    let run = |jobs: &str, out: &Path| {
        let output = detkit(&[
            "--jobs",
            jobs,
            "--hierarchy",
            toy.join("hierarchy.json").to_str().unwrap(),
            "nms-search",
            "--detections",
            toy.join("detections.csv").to_str().unwrap(),
            "--ground-truth",
            toy.join("ground-truth.csv").to_str().unwrap(),
            "--grid",
            "0.3,0.4,0.6,0.7",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success(), "{}", stderr_of(&output));
    };
    let sequential = dir.path().join("seq.csv");
    let parallel = dir.path().join("par.csv");
    run("1", &sequential);
    run("3", &parallel);
    assert_eq!(
        std::fs::read(sequential).unwrap(),
        std::fs::read(parallel).unwrap()
    );
}

#[test]
fn expansion_is_idempotent_through_the_cli() {
    let toy = toy_dir();
    let dir = tempfile::tempdir().unwrap();
    let once = dir.path().join("once.csv");
    let twice = dir.path().join("twice.csv");
    let expand = |input: &Path, out: &Path| {
        let output = detkit(&[
            "--hierarchy",
            toy.join("hierarchy.json").to_str().unwrap(),
            "expand",
            "--detections",
            input.to_str().unwrap(),
            "--mode",
            "ancestors+ambiguity",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success(), "{}", stderr_of(&output));
    };
    expand(&toy.join("detections.csv"), &once);
    expand(&once, &twice);
    assert_eq!(std::fs::read(once).unwrap(), std::fs::read(twice).unwrap());
}

#[test]
fn loss_check_row_count_mismatch_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let logits = dir.path().join("logits.csv");
    let targets = dir.path().join("targets.csv");
    std::fs::write(&logits, "0.0,1.0\n2.0,3.0\n").unwrap();
    std::fs::write(&targets, "1.0,0.0\n").unwrap();
    let output = detkit(&[
        "loss-check",
        "--logits",
        logits.to_str().unwrap(),
        "--targets",
        targets.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn paper_mode_rejects_default_on_grid() {
    let toy = toy_dir();
    let dir = tempfile::tempdir().unwrap();
    let output = detkit(&[
        "--hierarchy",
        toy.join("hierarchy.json").to_str().unwrap(),
        "nms-search",
        "--detections",
        toy.join("detections.csv").to_str().unwrap(),
        "--ground-truth",
        toy.join("ground-truth.csv").to_str().unwrap(),
        "--grid",
        "0.4,0.5,0.6",
        "--default",
        "0.5",
        "--mode",
        "paper",
        "--out",
        dir.path().join("thr.csv").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3));
    assert!(stderr_of(&output).contains("exclude"));
}

#[test]
fn augment_without_policy_uses_the_bundled_table() {
    let toy = toy_dir();
    let dir = tempfile::tempdir().unwrap();
    let image_out = dir.path().join("out.ppm");
    let boxes_out = dir.path().join("out-boxes.csv");
    let output = detkit(&[
        "--seed",
        "9",
        "augment",
        "--image",
        toy.join("image.ppm").to_str().unwrap(),
        "--boxes",
        toy.join("boxes.csv").to_str().unwrap(),
        "--image-out",
        image_out.to_str().unwrap(),
        "--boxes-out",
        boxes_out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", stderr_of(&output));
    // output is a readable PPM of the same dimensions
    let img = detkit_pipeline::formats::ppm::read_ppm(&image_out).unwrap();
    assert_eq!((img.width(), img.height()), (16, 12));
    // and the box file parses back into valid boxes
    let boxes = detkit_pipeline::formats::csv_io::read_boxes(&boxes_out).unwrap();
    for b in boxes {
        assert!(b.area() > 0.0);
    }
}
