mod common;

use common::{config, json, ok, rjcma, tree};

fn out_arg(tmp: &tempfile::TempDir) -> String {
    tmp.path().display().to_string()
}

#[test]
fn gen_writes_every_sequence_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(&tmp);
    let smoke = config("smoke.json");
    let a = ok(&["--config", &smoke, "--out", &out, "gen"]).run_dir();
    let b = ok(&["--config", &smoke, "--out", &out, "gen"]).run_dir();
    assert_ne!(a, b);

    let manifest = json(&a.join("manifest.json"));
    let entries = manifest.as_array().unwrap();
    assert_eq!(entries.len(), 8);
    for e in entries {
        assert!(a.join(e["path"].as_str().unwrap()).is_file());
    }
    assert_eq!(std::fs::read_dir(a.join("data")).unwrap().count(), 8);
    assert_eq!(tree(&a), tree(&b));

    let c = ok(&["--config", &smoke, "--out", &out, "--seed", "5", "gen"]).run_dir();
    assert_ne!(tree(&a.join("data")), tree(&c.join("data")));
}

#[test]
fn default_gen_matches_the_default_sequence_count() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = ok(&["--out", &out_arg(&tmp), "gen"]).run_dir();
    assert_eq!(json(&dir.join("manifest.json")).as_array().unwrap().len(), 12);
    assert_eq!(json(&dir.join("config.json"))["synthetic"]["n_sequences"], 12);
}

#[test]
fn invalid_out_dir_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("plain-file");
    std::fs::write(&file, "").unwrap();
    let out = rjcma(&["--out", &file.join("sub").display().to_string(), "gen"]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("plain-file"), "{}", out.stderr);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(rjcma(&["--set", "train.not_a_key=1", "gen"]).code, 1);
    assert_eq!(rjcma(&["--set", "no_equals_sign", "gen"]).code, 1);
    assert_eq!(rjcma(&["--set", "window.length=7", "gen"]).code, 1);
    assert_eq!(rjcma(&["frobnicate"]).code, 1);
    assert_eq!(rjcma(&["--target", "dominance", "gen"]).code, 1);
    assert_eq!(rjcma(&["--help"]).code, 0);

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, r#"{"train": {"lr": 1}}"#).unwrap();
    let out = rjcma(&["--config", &cfg.display().to_string(), "gen"]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("lr"), "{}", out.stderr);
}

#[test]
fn train_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(&tmp);
    let smoke = config("smoke.json");
    let data = ok(&["--config", &smoke, "--out", &out, "gen"]).run_dir();
    let manifest = data.join("manifest.json").display().to_string();

    let run =
        ok(&["--config", &smoke, "--out", &out, "--target", "arousal", "train", "--manifest", &manifest]).run_dir();
    for f in ["config.json", "checkpoint.bin", "history.csv", "report.json"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let report = json(&run.join("report.json"));
    assert_eq!(report["target"], "arousal");
    assert!(report["ccc_arousal"].is_f64());
    assert!(report.get("ccc_valence").is_none());
    let best = report["best_val_ccc"].as_f64().unwrap();
    assert_eq!(report["ccc_arousal"].as_f64().unwrap(), best);

    // a second identical run reproduces every artifact
    let again =
        ok(&["--config", &smoke, "--out", &out, "--target", "arousal", "train", "--manifest", &manifest]).run_dir();
    assert_eq!(tree(&run), tree(&again));

    let ckpt = run.join("checkpoint.bin").display().to_string();
    let val =
        ok(&["--config", &smoke, "--out", &out, "eval", "--checkpoint", &ckpt, "--manifest", &manifest]).run_dir();
    let val = json(&val.join("report.json"));
    assert_eq!(val["split"], "val");
    assert_eq!(val["ccc_arousal"].as_f64().unwrap(), best);
    assert_eq!(val["n_frames"], report["n_frames"]);

    let train =
        ok(&["--out", &out, "eval", "--checkpoint", &ckpt, "--manifest", &manifest, "--split", "train"]).run_dir();
    let train = json(&train.join("report.json"));
    assert_ne!(train["n_frames"], val["n_frames"]);
}

#[test]
fn train_without_manifest_uses_generated_data() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(&tmp);
    let smoke = config("smoke.json");
    let data = ok(&["--config", &smoke, "--out", &out, "gen"]).run_dir();
    let manifest = data.join("manifest.json").display().to_string();
    let a = ok(&["--config", &smoke, "--out", &out, "train"]).run_dir();
    let b = ok(&["--config", &smoke, "--out", &out, "train", "--manifest", &manifest]).run_dir();
    assert_eq!(std::fs::read(a.join("report.json")).unwrap(), std::fs::read(b.join("report.json")).unwrap());
    assert_eq!(std::fs::read(a.join("checkpoint.bin")).unwrap(), std::fs::read(b.join("checkpoint.bin")).unwrap());
}

#[test]
fn eval_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(&tmp);
    let smoke = config("smoke.json");
    let data = ok(&["--config", &smoke, "--out", &out, "gen"]).run_dir();
    let manifest = data.join("manifest.json").display().to_string();
    let run = ok(&["--config", &smoke, "--out", &out, "train", "--manifest", &manifest]).run_dir();
    let ckpt = run.join("checkpoint.bin").display().to_string();

    let missing = rjcma(&["--out", &out, "eval", "--checkpoint", "no-such.bin", "--manifest", &manifest]);
    assert_eq!(missing.code, 2);
    assert!(missing.stderr.contains("no-such.bin"));
    assert_ne!(rjcma(&["--out", &out, "eval", "--checkpoint", &ckpt, "--manifest", "none.json"]).code, 0);

    // default-sized data against a checkpoint trained on 4-dim features
    let wide = ok(&["--out", &out, "gen"]).run_dir().join("manifest.json").display().to_string();
    let mismatch = rjcma(&["--out", &out, "eval", "--checkpoint", &ckpt, "--manifest", &wide]);
    assert_eq!(mismatch.code, 2);
    assert!(mismatch.stderr.contains("checkpoint expects"), "{}", mismatch.stderr);

    let garbage = tmp.path().join("garbage.bin");
    std::fs::write(&garbage, b"not a checkpoint").unwrap();
    let bad = rjcma(&["--out", &out, "eval", "--checkpoint", &garbage.display().to_string(), "--manifest", &manifest]);
    assert_eq!(bad.code, 2);
}

#[test]
fn divergence_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rjcma(&[
        "--config",
        &config("smoke.json"),
        "--out",
        &out_arg(&tmp),
        "--set",
        "train.lr_init=1e300",
        "--set",
        "train.lr_min=1e299",
        "train",
    ]);
    assert_eq!(out.code, 3, "{}", out.stderr);
}

#[test]
fn gradcheck_passes_and_catches_a_broken_rule() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(&tmp);
    let good = ok(&["--out", &out, "gradcheck"]);
    assert!(good.stdout.contains("PASS"));
    let report = json(&good.run_dir().join("report.json"));
    assert_eq!(report["passed"], true);
    let names: Vec<&str> = report["params"].as_array().unwrap().iter().map(|p| p["name"].as_str().unwrap()).collect();
    for group in
        ["tcn.a.", "tcn.v.", "tcn.t.", "fusion.fc.", "fusion.step0.", "fusion.step2.", "fusion.head0.", "fusion.head1."]
    {
        assert!(names.iter().any(|n| n.starts_with(group)), "{group} missing from {names:?}");
    }
    for p in report["params"].as_array().unwrap() {
        assert!(p["max_rel_err"].as_f64().unwrap() < 1e-4);
    }

    for fault in ["tanh", "relu", "matmul"] {
        let bad = rjcma(&["--out", &out, "gradcheck", "--inject-fault", fault]);
        assert_eq!(bad.code, 3, "{fault}: {}", bad.stdout);
        assert!(bad.stdout.contains("FAIL"));
        assert_eq!(json(&bad.run_dir().join("report.json"))["passed"], false);
    }
}

#[test]
fn ablate_and_cv_respect_the_target_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(&tmp);
    let smoke = config("smoke.json");
    let ab = ok(&["--config", &smoke, "--out", &out, "--target", "valence", "ablate", "--l-values", "1,3"]);
    let table = json(&ab.run_dir().join("report.json"));
    let rows = table["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["label"], "l = 3");
    assert!(rows.iter().all(|r| r["arousal"].is_null() && r["valence"].is_f64()));
    assert!(ab.stdout.contains("| l = 1 "));

    assert_eq!(rjcma(&["--config", &smoke, "--out", &out, "ablate", "--l-values", "0"]).code, 1);
    assert_eq!(rjcma(&["--config", &smoke, "--out", &out, "ablate", "--fold", "9"]).code, 1);

    let cv = ok(&["--config", &smoke, "--out", &out, "--target", "arousal", "cv"]).run_dir();
    let rows = json(&cv.join("report.json"))["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 4);
    assert!(std::fs::read_to_string(cv.join("table.md")).unwrap().contains("| Fold 3 "));
}

#[test]
fn every_run_echoes_its_effective_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = out_arg(&tmp);
    let dir = ok(&[
        "--config",
        &config("smoke.json"),
        "--out",
        &out,
        "--seed",
        "4",
        "--iterations",
        "1",
        "--target",
        "arousal",
        "--set",
        "train.max_epochs=2",
        "train",
    ])
    .run_dir();
    let cfg = json(&dir.join("config.json"));
    assert_eq!(cfg["seed"], 4);
    assert_eq!(cfg["train"]["seed"], 4);
    assert_eq!(cfg["train"]["target"], "arousal");
    assert_eq!(cfg["train"]["max_epochs"], 2);
    assert_eq!(cfg["model"]["fusion"]["iterations"], 1);
    assert_eq!(cfg["paths"]["out_dir"], out.as_str());
    assert_eq!(std::fs::read_to_string(dir.join("history.csv")).unwrap().lines().count(), 3);

    // the echo is itself a loadable config that reproduces the run
    let echo = dir.join("config.json").display().to_string();
    let again = ok(&["--config", &echo, "train"]).run_dir();
    assert_eq!(std::fs::read(dir.join("report.json")).unwrap(), std::fs::read(again.join("report.json")).unwrap());
}
