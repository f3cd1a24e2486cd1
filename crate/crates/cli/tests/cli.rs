use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use posefuse_core::image::{decode_png, save_png, Image};
use posefuse_core::pose::{read_jsonl_path, write_jsonl, HandPose};
use posefuse_core::synth::{random_bank, SynthParams};
use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_posefuse"));
    c.env("POSEFUSE_THREADS", "2");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_bank(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let path = dir.join(format!("bank{seed}.jsonl"));
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &random_bank(n, seed, &SynthParams::default(), "b")).unwrap();
    std::fs::write(&path, buf).unwrap();
    path
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn index_build_counts_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let bank = write_bank(dir.path(), 1000, 1);
    let (a, b) = (dir.path().join("a.tapq"), dir.path().join("b.tapq"));
    let summary = json(&ok(&["index", "build", "--poses", p(&bank), "--out", p(&a), "--m", "4", "--k", "16", "--seed", "7"]));
    assert_eq!(summary["n"], 1000);
    ok(&["index", "build", "--poses", p(&bank), "--out", p(&b), "--m", "4", "--k", "16", "--seed", "7"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(posefuse_core::pq::load_index(&a).unwrap().len(), 1000);
}

#[test]
fn short_pose_line_is_a_parse_error_naming_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let bank = write_bank(dir.path(), 3, 2);
    let mut text = std::fs::read_to_string(&bank).unwrap();
    let pts: Vec<[f64; 2]> = (0..20).map(|i| [i as f64, 1.0]).collect();
    text.push_str(&serde_json::json!({ "id": "bad", "keypoints": pts }).to_string());
    text.push('\n');
    std::fs::write(&bank, text).unwrap();
    let out = run(&["index", "build", "--poses", p(&bank), "--out", p(&dir.path().join("x")), "--k", "2", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn missing_input_is_an_io_error() {
    let out = run(&["index", "build", "--poses", "/nonexistent/bank.jsonl", "--out", "/tmp/x", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(run(&["index", "build", "--poses"]).status.code(), Some(2));
}

#[test]
fn query_self_retrieval_and_exact_degeneration() {
    let dir = tempfile::tempdir().unwrap();
    let bank = write_bank(dir.path(), 100, 3);
    let index = dir.path().join("i.tapq");
    ok(&["index", "build", "--poses", p(&bank), "--out", p(&index), "--k", "16", "--seed", "1"]);
    let poses = read_jsonl_path(&bank).unwrap();
    let targets = dir.path().join("t.jsonl");
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &[poses[17].clone(), poses[60].clone()]).unwrap();
    std::fs::write(&targets, buf).unwrap();

    let base = ["index", "query", "--index", p(&index), "--poses", p(&bank), "--target", p(&targets), "--k", "3"];
    let pq = ok(&[&base[..], &["--shortlist", "100"]].concat());
    let exact = ok(&[&base[..], &["--exact"]].concat());
    assert_eq!(pq.stdout, exact.stdout);
    let v = json(&ok(&[&base[..], &["--shortlist", "5"]].concat()));
    assert_eq!(v[0]["matches"][0]["id"], "b000017");
    assert!((v[0]["matches"][0]["score"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(v[0]["matches"][0]["transform"].as_array().unwrap().len(), 6);
}

#[test]
fn query_rejects_mismatched_bank() {
    let dir = tempfile::tempdir().unwrap();
    let bank = write_bank(dir.path(), 50, 4);
    let index = dir.path().join("i.tapq");
    ok(&["index", "build", "--poses", p(&bank), "--out", p(&index), "--k", "8", "--seed", "1"]);
    let other_ids = write_bank(dir.path(), 51, 4);
    let out = run(&["index", "query", "--index", p(&index), "--poses", p(&other_ids), "--target", p(&other_ids)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_file_supplies_flags_and_cli_wins() {
    let dir = tempfile::tempdir().unwrap();
    let bank = write_bank(dir.path(), 200, 6);
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "m = 4\nk = 300\nseed = 7\niters = 5\n").unwrap();
    let out = dir.path().join("i.tapq");
    let bad = run(&["--config", p(&conf), "index", "build", "--poses", p(&bank), "--out", p(&out)]);
    assert_eq!(bad.status.code(), Some(3));
    let good = json(&ok(&["--config", p(&conf), "index", "build", "--poses", p(&bank), "--out", p(&out), "--k", "8"]));
    assert_eq!(good["k"], 8);
}

fn save(dir: &Path, name: &str, img: &Image) -> PathBuf {
    let path = dir.join(name);
    save_png(img, &path).unwrap();
    path
}

#[test]
fn maps_command_examples() {
    let dir = tempfile::tempdir().unwrap();
    let flat = save(dir.path(), "flat.png", &Image::filled(8, 8, 3, 0.4));
    let (s, c) = (dir.path().join("s.png"), dir.path().join("c.png"));
    ok(&["maps", "--image", p(&flat), "--out-shape", p(&s), "--out-color", p(&c)]);
    assert!(decode_png(&std::fs::read(&s).unwrap()).unwrap().data().iter().all(|v| *v == 0.0));

    let textured = save(dir.path(), "t.png", &Image::from_fn(7, 5, 3, |x, y, c| ((x * 37 + y * 11 + c * 90) % 256) as f64 / 255.0));
    ok(&["maps", "--image", p(&textured), "--out-shape", p(&s), "--out-color", p(&c), "--blur-radius", "0"]);
    assert_eq!(decode_png(&std::fs::read(&c).unwrap()).unwrap(), decode_png(&std::fs::read(&textured).unwrap()).unwrap());

    let impulse = save(dir.path(), "i.png", &Image::from_fn(9, 9, 1, |x, y, _| if x == 4 && y == 4 { 1.0 } else { 0.0 }));
    ok(&["maps", "--image", p(&impulse), "--out-shape", p(&s), "--out-color", p(&c), "--blur-radius", "1"]);
    let blurred = decode_png(&std::fs::read(&c).unwrap()).unwrap();
    let ninth = (255.0f64 / 9.0).round() / 255.0;
    for y in 0..9 {
        for x in 0..9 {
            let inside = (3..=5).contains(&x) && (3..=5).contains(&y);
            assert_eq!(blurred.get(x, y, 0), if inside { ninth } else { 0.0 });
        }
    }
}

fn kp_points() -> Vec<[f64; 2]> {
    (0..21).map(|i| [1.0 + (i % 5) as f64, 1.0 + (i / 5) as f64]).collect()
}

fn write_manifest(dir: &Path, jobs: Vec<Value>) -> PathBuf {
    let path = dir.join("manifest.json");
    let m = serde_json::json!({ "output_dir": "out", "seed": 11, "loss": true, "jobs": jobs });
    std::fs::write(&path, serde_json::to_vec_pretty(&m).unwrap()).unwrap();
    path
}

#[test]
fn identity_composite_reproduces_foreground() {
    let dir = tempfile::tempdir().unwrap();
    let fg_img = Image::from_fn(8, 8, 3, |x, y, c| ((x * 29 + y * 13 + c * 70) % 256) as f64 / 255.0);
    save(dir.path(), "fg.png", &fg_img);
    save(dir.path(), "mask.png", &Image::filled(8, 8, 1, 1.0));
    save(dir.path(), "bg.png", &Image::filled(8, 8, 3, 0.0));
    let manifest = write_manifest(
        dir.path(),
        vec![serde_json::json!({ "foreground": "fg.png", "mask": "mask.png", "background": "bg.png",
            "keypoints": kp_points(), "transform": [1, 0, 0, 1, 0, 0] })],
    );
    ok(&["composite", "--manifest", p(&manifest)]);
    let out = dir.path().join("out");
    let img = decode_png(&std::fs::read(out.join("job0000.png")).unwrap()).unwrap();
    assert_eq!(img, fg_img);
    let ann: Value = serde_json::from_str(std::fs::read_to_string(out.join("annotations.jsonl")).unwrap().trim()).unwrap();
    let kp: Vec<[f64; 2]> = serde_json::from_value(ann["keypoints"].clone()).unwrap();
    assert_eq!(kp, kp_points());
    assert_eq!(ann["seed"], 11);
    let report: Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["succeeded"], 1);
    assert!(report["jobs"][0]["loss"]["ta"].is_number());
}

#[test]
fn out_of_frame_job_fails_without_aborting() {
    let dir = tempfile::tempdir().unwrap();
    save(dir.path(), "fg.png", &Image::filled(4, 4, 3, 1.0));
    save(dir.path(), "mask.png", &Image::filled(4, 4, 1, 1.0));
    save(dir.path(), "bg.png", &Image::filled(16, 16, 3, 0.0));
    let job = |t: [f64; 6]| {
        serde_json::json!({ "foreground": "fg.png", "mask": "mask.png", "background": "bg.png",
            "keypoints": kp_points(), "transform": t })
    };
    let manifest = write_manifest(dir.path(), vec![job([1.0, 0.0, 0.0, 1.0, 500.0, 0.0]), job([1.0, 0.0, 0.0, 1.0, 3.0, 3.0])]);
    let out = run(&["composite", "--manifest", p(&manifest)]);
    assert_eq!(out.status.code(), Some(5));
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["jobs"][0]["status"], "OutOfFrame");
    assert_eq!(report["jobs"][1]["status"], "ok");
    let anns = std::fs::read_to_string(dir.path().join("out/annotations.jsonl")).unwrap();
    assert_eq!(anns.lines().count(), 1);
}

#[test]
fn manifest_validation() {
    let dir = tempfile::tempdir().unwrap();
    let both = write_manifest(
        dir.path(),
        vec![serde_json::json!({ "foreground": "f", "mask": "m", "background": "b", "keypoints": kp_points(),
            "transform": [1, 0, 0, 1, 0, 0], "target_pose": "t.jsonl" })],
    );
    assert_eq!(run(&["composite", "--manifest", p(&both)]).status.code(), Some(3));
    std::fs::write(dir.path().join("broken.json"), "{ not json").unwrap();
    assert_eq!(run(&["composite", "--manifest", p(&dir.path().join("broken.json"))]).status.code(), Some(2));
}

#[test]
fn retrieval_driven_placement() {
    let dir = tempfile::tempdir().unwrap();
    let bank_poses = random_bank(20, 8, &SynthParams::default(), "h");
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &bank_poses).unwrap();
    std::fs::write(dir.path().join("bank.jsonl"), buf).unwrap();
    std::fs::create_dir(dir.path().join("hands")).unwrap();
    for pose in &bank_poses {
        save(&dir.path().join("hands"), &format!("{}.png", pose.id()), &Image::filled(256, 256, 3, 0.8));
    }
    save(dir.path(), "mask.png", &Image::filled(256, 256, 1, 1.0));
    save(dir.path(), "bg.png", &Image::filled(256, 256, 3, 0.1));
    let target = posefuse_core::Affine2D::similarity(0.9, 0.2, 5.0, -3.0).apply_pose(&bank_poses[6]);
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &[target.clone().with_id("target")]).unwrap();
    std::fs::write(dir.path().join("target.jsonl"), buf).unwrap();
    let m = serde_json::json!({ "output_dir": "out", "bank": { "poses": "bank.jsonl" },
        "jobs": [{ "foreground": "hands/{id}.png", "mask": "mask.png", "background": "bg.png", "target_pose": "target.jsonl" }] });
    std::fs::write(dir.path().join("m.json"), m.to_string()).unwrap();
    ok(&["composite", "--manifest", p(&dir.path().join("m.json"))]);
    let ann: Value = serde_json::from_str(std::fs::read_to_string(dir.path().join("out/annotations.jsonl")).unwrap().trim()).unwrap();
    assert_eq!(ann["source_id"], "h000006");
    let kp: Vec<[f64; 2]> = serde_json::from_value(ann["keypoints"].clone()).unwrap();
    for (a, b) in kp.iter().zip(target.keypoints()) {
        assert!((a[0] - b[0]).abs() < 1e-6 && (a[1] - b[1]).abs() < 1e-6);
    }
}

fn write_poses(dir: &Path, name: &str, poses: &[HandPose]) -> PathBuf {
    let path = dir.join(name);
    let mut buf = Vec::new();
    write_jsonl(&mut buf, poses).unwrap();
    std::fs::write(&path, buf).unwrap();
    path
}

#[test]
fn eval_examples() {
    let dir = tempfile::tempdir().unwrap();
    let gt: Vec<HandPose> = random_bank(10, 9, &SynthParams::default(), "e")
        .iter()
        .map(|g| {
            let pts: Vec<[f64; 2]> = g.keypoints().iter().map(|k| [k[0].round(), k[1].round()]).collect();
            HandPose::new(g.id(), &pts).unwrap()
        })
        .collect();
    let gt_path = write_poses(dir.path(), "gt.jsonl", &gt);
    let perfect = json(&ok(&["eval", "--pred", p(&gt_path), "--gt", p(&gt_path)]));
    assert_eq!((perfect["epe_mean"].as_f64(), perfect["pck"].as_f64(), perfect["auc"].as_f64()), (Some(0.0), Some(1.0), Some(1.0)));

    let shifted: Vec<HandPose> = gt.iter().map(|g| g.translated(3.0, 4.0).unwrap()).collect();
    let shifted_path = write_poses(dir.path(), "shifted.jsonl", &shifted);
    let r = json(&ok(&["eval", "--pred", p(&shifted_path), "--gt", p(&gt_path), "--pck-threshold", "5"]));
    assert!((r["epe_mean"].as_f64().unwrap() - 5.0).abs() < 1e-12);
    assert_eq!(r["pck"], 1.0);

    let mut reversed = shifted.clone();
    reversed.reverse();
    let reversed_path = write_poses(dir.path(), "rev.jsonl", &reversed);
    let curve = dir.path().join("curve.csv");
    let a = ok(&["eval", "--pred", p(&shifted_path), "--gt", p(&gt_path)]);
    let b = ok(&["eval", "--pred", p(&reversed_path), "--gt", p(&gt_path), "--curve", p(&curve)]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(std::fs::read_to_string(&curve).unwrap().lines().count(), 101);

    let missing = write_poses(dir.path(), "missing.jsonl", &shifted[..9]);
    let out = run(&["eval", "--pred", p(&missing), "--gt", p(&gt_path)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("e000009"));
}

#[test]
fn eval_3d_with_stb_root() {
    let dir = tempfile::tempdir().unwrap();
    let gt = random_bank(5, 10, &SynthParams::default(), "s");
    let gt_path = write_poses(dir.path(), "gt.jsonl", &gt);
    let converted: Vec<HandPose> = gt
        .iter()
        .map(|g| posefuse_core::metrics::stb_root_convert(g, Default::default()).unwrap())
        .collect();
    let pred_path = write_poses(dir.path(), "pred.jsonl", &converted);
    let r = json(&ok(&["eval", "--pred", p(&pred_path), "--gt", p(&gt_path), "--space", "3d", "--stb-root"]));
    assert_eq!(r["epe_mean"], 0.0);
    assert_eq!(r["auc_range"], serde_json::json!([20.0, 50.0]));
    assert_eq!(run(&["eval", "--pred", p(&pred_path), "--gt", p(&gt_path), "--stb-root"]).status.code(), Some(3));
}

#[test]
fn train_toy_examples() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("toy.conf");
    std::fs::write(&conf, "steps = 3\ng_hidden = 8\nd_hidden = 8\nbatch = 2\ntrain_pool = 4\nheldout = 2\ndump_every = 1\n").unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let dumps = dir.path().join("dumps");
    ok(&["train-toy", "--toy-config", p(&conf), "--seed", "5", "--out", p(&a), "--dump-dir", p(&dumps)]);
    ok(&["train-toy", "--toy-config", p(&conf), "--seed", "5", "--out", p(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(std::fs::read_dir(&dumps).unwrap().count(), 3);

    let zero = json(&ok(&["train-toy", "--toy-config", p(&conf), "--seed", "5", "--steps", "0"]));
    assert_eq!(zero["records"].as_array().unwrap().len(), 0);
    assert_eq!(zero["initial_heldout_ta"], zero["final_heldout_ta"]);

    assert_eq!(run(&["train-toy", "--toy-config", p(&conf)]).status.code(), Some(3));
    std::fs::write(&conf, "unknown_key = 1\n").unwrap();
    assert_eq!(run(&["train-toy", "--toy-config", p(&conf), "--seed", "1"]).status.code(), Some(2));
}

#[test]
fn loss_command_reports_weighted_sum() {
    let dir = tempfile::tempdir().unwrap();
    let y = save(dir.path(), "y.png", &Image::from_fn(8, 8, 3, |x, _, _| if x < 4 { 0.2 } else { 0.8 }));
    let g = save(dir.path(), "g.png", &Image::filled(8, 8, 3, 0.5));
    let r = json(&ok(&["loss", "--target", p(&y), "--generated", p(&g), "--d-real", "0.9", "--d-fake", "0.2"]));
    let (shape, color, ta) = (r["shape"].as_f64().unwrap(), r["color"].as_f64().unwrap(), r["ta"].as_f64().unwrap());
    assert!((shape - 0.3).abs() < 1e-2);
    assert!((ta - (10.0 * color + 100.0 * shape)).abs() < 1e-9);
    assert!((r["gan"].as_f64().unwrap() - (0.9f64.ln() + 0.8f64.ln())).abs() < 1e-12);
}
