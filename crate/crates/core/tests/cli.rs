use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sample_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sample")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perfpred"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

/// Copies the sample config into `dir` with absolute data paths.
fn write_config(dir: &Path) -> PathBuf {
    let text = std::fs::read_to_string(sample_dir().join("config.toml")).unwrap();
    let sample = sample_dir();
    let mut out = String::new();
    for line in text.lines() {
        let line = if line.starts_with("output_dir") {
            format!("output_dir = {:?}", dir.join("out").display().to_string())
        } else if let Some((key, value)) = line.split_once(" = \"") {
            let file = value.trim_end_matches('"');
            if file.ends_with(".csv") {
                format!("{key} = {:?}", sample.join(file).display().to_string())
            } else {
                line.to_string()
            }
        } else if line.starts_with("auxiliary") {
            format!(
                "auxiliary = [{:?}]",
                sample.join("performance_qa.csv").display().to_string()
            )
        } else {
            line.to_string()
        };
        out.push_str(&line);
        out.push('\n');
    }
    let path = dir.join("config.toml");
    std::fs::write(&path, out).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_sample_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let o = run(&["validate", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("59 records"), "{stdout}");
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("out/validation.json")).unwrap())
            .unwrap();
    assert_eq!(summary["profiles"], 11);
    assert!(tmp.path().join("out/resolved_config.toml").exists());
    assert!(tmp.path().join("out/metadata.json").exists());
}

#[test]
fn missing_profiles_exit_1_naming_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let text = std::fs::read_to_string(&cfg).unwrap();
    let missing = tmp.path().join("nope.csv");
    let text = text
        .lines()
        .map(|l| {
            if l.starts_with("profiles") {
                format!("profiles = {:?}", missing.display().to_string())
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&cfg, text).unwrap();
    let o = run(&["validate", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains(&missing.display().to_string()),
        "{}",
        stderr(&o)
    );
}

#[test]
fn duplicate_key_exit_1_with_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let perf = tmp.path().join("perf.csv");
    std::fs::write(
        &perf,
        "model,task,pivots,target,metric,score\n\
         m,T,en,de,acc,0.5\n\
         m,T,en,fr,acc,0.6\n\
         m,T,en,de,acc,0.7\n",
    )
    .unwrap();
    let cfg = tmp.path().join("config.toml");
    std::fs::write(
        &cfg,
        format!("[data]\nperformance = {:?}\n", perf.display().to_string()),
    )
    .unwrap();
    let o = run(&[
        "validate",
        "-c",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("rows 1 and 3"), "{err}");
}

#[test]
fn lolo_writes_reports_and_four_row_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let o = run(&["lolo", "-c", cfg.to_str().unwrap(), "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = tmp.path().join("out");
    for f in [
        "report.json",
        "comparison.txt",
        "per_language.csv",
        "resolved_config.toml",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let reports: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 3);
    assert!(reports[0]["mae_x100"].is_number());
    let table = std::fs::read_to_string(out.join("comparison.txt")).unwrap();
    let methods: Vec<&str> = table
        .lines()
        .skip(2)
        .map(|l| l.split("  ").next().unwrap().trim())
        .collect();
    assert_eq!(
        methods,
        ["Baseline", "Translate", "Boosted Trees", "Group Lasso"]
    );
    let resolved = std::fs::read_to_string(out.join("resolved_config.toml")).unwrap();
    assert!(resolved.contains("jobs = 2"));
}

#[test]
fn pivot_grid_shape_and_single_candidate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let o = run(&["pivot", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let grid = std::fs::read_to_string(tmp.path().join("out/pivot_grid.csv")).unwrap();
    // 9 candidates x 11 targets plus the header
    assert_eq!(grid.lines().count(), 9 * 11 + 1);

    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let text = std::fs::read_to_string(&cfg).unwrap().replace(
        "candidates = [\"ar\", \"de\", \"en\", \"es\", \"fi\", \"fr\", \"hi\", \"id\", \"zh\"]",
        "candidates = [\"sw\"]",
    );
    std::fs::write(&cfg, text).unwrap();
    let o = run(&["pivot", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("out/pivot.json")).unwrap()).unwrap();
    let selections = summary["selections"].as_array().unwrap();
    assert_eq!(selections.len(), 11);
    assert!(selections.iter().all(|s| s["best_pivot"] == "sw"));
}

#[test]
fn train_then_predict() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let text =
        std::fs::read_to_string(&cfg)
            .unwrap()
            .replacen("[[models]]\nkind = \"mean\"\n\n", "", 1);
    std::fs::write(&cfg, &text).unwrap();
    let o = run(&["train", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let model = tmp.path().join("out/model.json");
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&model).unwrap()).unwrap();
    assert_eq!(json["parameters"]["kind"], "boosted_trees");

    let text = format!(
        "{text}\n[predict]\nmodel_path = {:?}\npivots = [\"en\"]\ntargets = [\"sw\", \"de\"]\n",
        model.display().to_string()
    );
    std::fs::write(&cfg, text).unwrap();
    let o = run(&["predict", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let preds = std::fs::read_to_string(tmp.path().join("out/predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 3);
    assert!(preds.starts_with("pivots,target,predicted"));
}

#[test]
fn featurize_emits_every_record() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let o = run(&[
        "featurize",
        "-c",
        cfg.to_str().unwrap(),
        "--imputation",
        "zero",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("out/features.csv")).unwrap();
    assert_eq!(csv.lines().count(), 60);
    assert!(csv
        .lines()
        .next()
        .unwrap()
        .ends_with("sim_geographic,log_train_size"));
}

#[test]
fn audit_bundled_and_with_lists() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["audit", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["median_languages"], 11.0);
    assert!(!tmp.path().join("per_language.csv").exists());

    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let o = run(&["audit", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let langs = std::fs::read_to_string(tmp.path().join("out/per_language.csv")).unwrap();
    assert!(langs.contains("en,3,5"), "{langs}");
}

#[test]
fn audit_empty_registry_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let reg = tmp.path().join("registry.csv");
    std::fs::write(&reg, "task_id,type,year,n_languages,n_families\n").unwrap();
    let cfg = tmp.path().join("config.toml");
    std::fs::write(
        &cfg,
        format!("[data]\nregistry = {:?}\n", reg.display().to_string()),
    )
    .unwrap();
    let o = run(&["audit", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));
}

#[test]
fn bad_hyperparameter_is_a_validation_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("config.toml");
    std::fs::write(&cfg, "[[models]]\nkind = \"group_lasso\"\nlambda = -1.0\n").unwrap();
    let o = run(&["validate", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("lambda"));
}
