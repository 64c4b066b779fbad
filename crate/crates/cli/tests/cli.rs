use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn emocal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emocal"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generated_ecg_round_trips_through_detect_hr() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("r.ecg");
    let out = emocal(&["gen-ecg", "--out", arg(&rec), "--bpm", "60", "--seconds", "30", "--ratings", "4,2,5"]);
    assert!(out.status.success(), "{out:?}");
    assert!(fs::read_to_string(&rec).unwrap().starts_with("256 4 2 5\n"));
    for ch in ["1", "2"] {
        let out = emocal(&["detect-hr", arg(&rec), "--channel", ch]);
        assert!(out.status.success(), "{out:?}");
        let text = stdout(&out);
        assert!(text.contains("peaks: 30"), "{text}");
        assert!(text.contains("mean_bpm: 60.00"), "{text}");
    }
    assert!(!emocal(&["detect-hr", arg(&rec), "--channel", "3"]).status.success());
}

#[test]
fn solve_prints_schedule_and_breakdown() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("p.json");
    fs::write(
        &problem,
        r#"{"events": [
            {"id": "review", "duration_min": 60, "priority": 0.9, "cognitive_load": 0.9},
            {"id": "email", "duration_min": 30, "priority": 0.2, "cognitive_load": 0.1}
        ]}"#,
    )
    .unwrap();
    let out = emocal(&["solve", arg(&problem)]);
    assert!(out.status.success(), "{out:?}");
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["placements"].as_array().unwrap().len(), 2);
    assert!(v["breakdown"].is_object());
    assert!(v["objective"].is_f64());

    // a 90 minute day cannot hold both exclusive events with a break
    let config = dir.path().join("c.toml");
    fs::write(&config, "day_start = \"09:00\"\nday_end = \"10:00\"\nalpha_emotional = 2.0\n").unwrap();
    let out = emocal(&["--config", arg(&config), "solve", arg(&problem)]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("no feasible schedule"));

    fs::write(&config, "alpha_temporl = 1.0\n").unwrap();
    let out = emocal(&["--config", arg(&config), "solve", arg(&problem)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha_temporl"));
}

#[test]
fn activity_log_generation_and_classification() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.csv");
    let out = emocal(&["gen-activity", "--sessions", "6", "--events-per-session", "200", "--seed", "3", "--out", arg(&log)]);
    assert!(out.status.success(), "{out:?}");
    let text = fs::read_to_string(&log).unwrap();
    assert!(text.starts_with("event,x,y,button,alt,control,shift,meta,key,repeat,mood_0,"));
    assert_eq!(text.lines().count(), 1 + 6 * 200);
    let again = emocal(&["--seed", "3", "gen-activity", "--sessions", "6", "--events-per-session", "200"]);
    assert_eq!(stdout(&again), text);

    let models = dir.path().join("models.json");
    let out = emocal(&["classify-activity", arg(&log), "--model", "tree,bayes", "--save", arg(&models)]);
    assert!(out.status.success(), "{out:?}");
    let grid = stdout(&out);
    assert_eq!(grid.lines().count(), 4, "{grid}");
    assert!(grid.contains("Decision Tree") && grid.contains("Naive Bayes") && grid.contains("MouseMovement"));
    let saved: serde_json::Value = serde_json::from_str(&fs::read_to_string(&models).unwrap()).unwrap();
    assert_eq!(saved["method"], "tree");

    assert!(!emocal(&["classify-activity", arg(&log), "--model", "svm"]).status.success());
}

#[test]
fn train_seq_writes_model_and_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let clips = dir.path().join("clips");
    let out = emocal(&["gen-ecg", "--clips", "2", "--seconds", "30", "--out", arg(&clips)]);
    assert!(out.status.success(), "{out:?}");
    let mut files: Vec<String> = fs::read_dir(&clips)
        .unwrap()
        .map(|e| e.unwrap().path().to_str().unwrap().to_owned())
        .collect();
    files.sort();
    assert_eq!(files.len(), 4);

    let model = dir.path().join("v.model");
    let bundle = dir.path().join("bundle.json");
    let mut args = vec!["train-seq", "--dim", "valence", "--kind", "lstm", "--window", "8", "--hidden", "4", "--epochs", "3"];
    args.extend(files.iter().map(String::as_str));
    args.extend(["--out", arg(&model), "--bundle", arg(&bundle)]);
    let out = emocal(&args);
    assert!(out.status.success(), "{out:?}");
    assert_eq!(stdout(&out).lines().filter(|l| l.trim_start().starts_with(char::is_numeric)).count(), 3);
    let saved: serde_json::Value = serde_json::from_str(&fs::read_to_string(&bundle).unwrap()).unwrap();
    assert_eq!(saved["window"], 8);
    assert_eq!(saved["valence"].as_str().unwrap(), fs::read_to_string(&model).unwrap());
    assert!(saved.get("arousal").is_none());
}
