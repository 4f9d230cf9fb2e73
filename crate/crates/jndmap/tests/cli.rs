mod common;

use std::fs;
use std::path::Path;

use common::{jndmap, ok, read_json, run, small_corpus};
use jndmap::tables::{self, CorpusPaths};

const RUN_ARTIFACTS: [&str; 10] = [
    "screening.json",
    "pairs.csv",
    "ranges.json",
    "codist.csv",
    "mf_params.json",
    "curve_samples.csv",
    "predictions.csv",
    "metrics.json",
    "metrics.txt",
    "run_manifest.json",
];

fn copy_corpus(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for f in ["vmaf_scores.csv", "dcr_ratings.csv", "jnd_truth.csv"] {
        fs::copy(from.join(f), to.join(f)).unwrap();
    }
}

#[test]
fn run_writes_every_artifact_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), 8, 3);
    for f in ["vmaf_scores.csv", "dcr_ratings.csv", "jnd_truth.csv", "sim_truth.json"] {
        assert!(corpus.join(f).is_file(), "{f}");
    }
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let stdout = ok(run(&corpus, &a, &[]));
    assert!(stdout.contains("best:"), "{stdout}");
    ok(run(&corpus, &b, &["--jobs", "3"]));

    for name in &RUN_ARTIFACTS {
        let x = fs::read(a.join(name)).unwrap_or_else(|_| panic!("missing {name}"));
        assert_eq!(x, fs::read(b.join(name)).unwrap(), "{name} differs between runs");
    }
    assert!(!a.join("error.json").exists());

    let manifest = read_json(&a.join("run_manifest.json"));
    assert_eq!(manifest["status"], "complete");
    let artifacts = manifest["artifacts"].as_object().unwrap();
    for name in &RUN_ARTIFACTS[..9] {
        let digest = artifacts[*name].as_str().unwrap();
        assert_eq!(digest, jndmap::commands::sha256_hex(&fs::read(a.join(name)).unwrap()));
    }
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 3);
}

#[test]
fn corrupted_rating_fails_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), 2, 1);
    let bad = dir.path().join("bad");
    copy_corpus(&corpus, &bad);
    let ratings = fs::read_to_string(bad.join("dcr_ratings.csv")).unwrap();
    let mut lines: Vec<String> = ratings.lines().map(String::from).collect();
    let row = &mut lines[4];
    let cut = row.rfind(',').unwrap();
    row.replace_range(cut + 1.., "9");
    fs::write(bad.join("dcr_ratings.csv"), lines.join("\n") + "\n").unwrap();

    let out_dir = dir.path().join("out");
    let out = run(&bad, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = read_json(&out_dir.join("error.json"));
    assert_eq!(err["status"], "failed");
    assert_eq!(err["exit_code"], 2);
    assert!(err["file"].as_str().unwrap().ends_with("dcr_ratings.csv"));
    assert_eq!(err["line"], 5);
    assert_eq!(err["column"], "score");
}

#[test]
fn unknown_or_missing_columns_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), 2, 1);
    let vmaf = fs::read_to_string(corpus.join("vmaf_scores.csv")).unwrap();

    let extra = dir.path().join("extra");
    copy_corpus(&corpus, &extra);
    let widened: String = vmaf.lines().enumerate().map(|(i, l)| format!("{l},{}\n", if i == 0 { "bitrate" } else { "1" })).collect();
    fs::write(extra.join("vmaf_scores.csv"), widened).unwrap();

    let missing = dir.path().join("missing");
    copy_corpus(&corpus, &missing);
    let narrowed: String = vmaf.lines().map(|l| format!("{}\n", &l[..l.rfind(',').unwrap()])).collect();
    fs::write(missing.join("vmaf_scores.csv"), narrowed).unwrap();

    for (case, col) in [(extra, "bitrate"), (missing, "vmaf")] {
        let out_dir = case.join("out");
        let out = run(&case, &out_dir, &[]);
        assert_eq!(out.status.code(), Some(2));
        let err = read_json(&out_dir.join("error.json"));
        assert_eq!(err["line"], 1);
        assert!(err["message"].as_str().unwrap().contains(col), "{err}");
    }
}

#[test]
fn columns_may_come_in_any_order() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), 1, 1);
    let text = fs::read_to_string(corpus.join("vmaf_scores.csv")).unwrap();
    let swapped: String = text
        .lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.reverse();
            f.join(",") + "\n"
        })
        .collect();
    let path = dir.path().join("swapped.csv");
    fs::write(&path, swapped).unwrap();
    let (_, a) = tables::read_stimuli(&corpus.join("vmaf_scores.csv")).unwrap();
    let (_, b) = tables::read_stimuli(&path).unwrap();
    assert_eq!(a, b);
}

#[test]
fn ratings_table_of_12_stimuli_by_24_observers() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_dir = small_corpus(dir.path(), 1, 9);
    let corpus = tables::load_corpus(&CorpusPaths::in_dir(&corpus_dir)).unwrap();
    assert_eq!(corpus.stimuli().len(), 12);
    assert_eq!(corpus.observers().len(), 24);
    assert_eq!(corpus.ratings().len(), 288);
}

#[test]
fn corpus_tables_round_trip_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_dir = small_corpus(dir.path(), 3, 4);
    let corpus = tables::load_corpus(&CorpusPaths::in_dir(&corpus_dir)).unwrap();
    let again = dir.path().join("again");
    fs::create_dir_all(&again).unwrap();
    let written = tables::write_corpus(&again, &corpus).unwrap();
    assert_eq!(written.len(), 3);
    for p in written {
        let name = p.file_name().unwrap();
        assert_eq!(fs::read(&p).unwrap(), fs::read(corpus_dir.join(name)).unwrap(), "{name:?}");
    }
}

#[test]
fn simulate_is_reproducible_and_seed_flag_wins() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, r#"{"n_contents": 2, "seed": 1}"#).unwrap();
    let sim = |name: &str, env: Option<&str>, flag: Option<&str>| {
        let out = dir.path().join(name);
        let mut c = jndmap();
        c.args(["simulate", "--spec"]).arg(&spec).arg("--out").arg(&out);
        if let Some(e) = env {
            c.env("JNDMAP_SEED", e);
        }
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        ok(c.output().unwrap());
        read_json(&out.join("sim_truth.json"))["spec"]["seed"].as_u64().unwrap()
    };
    assert_eq!(sim("file", None, None), 1);
    assert_eq!(sim("env", Some("2"), None), 2);
    assert_eq!(sim("flag", Some("2"), Some("3")), 3);
    let again = sim("file2", None, None);
    assert_eq!(again, 1);
    for f in ["vmaf_scores.csv", "dcr_ratings.csv", "jnd_truth.csv", "sim_truth.json"] {
        assert_eq!(fs::read(dir.path().join("file").join(f)).unwrap(), fs::read(dir.path().join("file2").join(f)).unwrap());
    }
    assert_ne!(
        fs::read(dir.path().join("file/dcr_ratings.csv")).unwrap(),
        fs::read(dir.path().join("env/dcr_ratings.csv")).unwrap()
    );

    let printed = ok(jndmap().args(["simulate", "--print-spec"]).output().unwrap());
    let spec: jndmap_core::SimSpec = serde_json::from_str(&printed).unwrap();
    assert_eq!(spec, jndmap_core::SimSpec::default());
}

#[test]
fn run_config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), 4, 2);
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"alpha": 0.1, "bin_width": 3, "seed": 1, "families": ["glm"]}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = jndmap()
        .args(["run", "--corpus"])
        .arg(&corpus)
        .arg("--config")
        .arg(&cfg)
        .args(["--alpha", "0.2"])
        .env("JNDMAP_SEED", "2")
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    ok(out);
    let c = &read_json(&out_dir.join("run_manifest.json"))["config"];
    assert_eq!(c["alpha"], 0.2);
    assert_eq!(c["bin_width"], 3.0);
    assert_eq!(c["seed"], 2);
    assert_eq!(c["families"], serde_json::json!(["glm"]));
    assert_eq!(c["thresholds"], serde_json::json!([0.75, 0.8, 0.85, 0.9, 0.95]));

    fs::write(&cfg, r#"{"alpah": 0.1}"#).unwrap();
    let out = jndmap().args(["run", "--corpus"]).arg(&corpus).arg("--config").arg(&cfg).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = jndmap().args(["run", "--corpus"]).arg(&corpus).args(["--k", "1", "--out"]).arg(&out_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stages_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), 6, 5);
    let d = dir.path();
    let stage = |args: &[&str], out: &str| {
        ok(jndmap().args(args).arg("--out").arg(d.join(out)).output().unwrap())
    };
    let c = corpus.to_str().unwrap();
    stage(&["screen", "--corpus", c], "screen");
    assert!(d.join("screen/screening.json").is_file());
    assert!(d.join("screen/dcr_ratings_screened.csv").is_file());
    stage(&["classify", "--corpus", c], "classify");
    let pairs = d.join("classify/pairs.csv");
    let ids = stage(&["decompose", "--corpus", c, "--pairs", pairs.to_str().unwrap(), "--bounds", "0,60,80,90,100"], "decompose");
    assert_eq!(ids.trim(), "(0,60], (60,80], (80,90], (90,100]");
    let ranges = d.join("decompose/ranges.json");
    stage(&["fit", "--pairs", pairs.to_str().unwrap(), "--ranges", ranges.to_str().unwrap()], "fit");
    for f in ["codist.csv", "mf_params.json", "curve_samples.csv"] {
        assert!(d.join("fit").join(f).is_file(), "{f}");
    }
    let models = d.join("fit/mf_params.json");
    let stdout = stage(
        &["evaluate", "--corpus", c, "--models", models.to_str().unwrap(), "--ranges", ranges.to_str().unwrap()],
        "eval",
    );
    assert!(stdout.starts_with("[dec]") || stdout.starts_with("[inc]"), "{stdout}");
    assert!(d.join("eval/metrics.json").is_file());
}

#[test]
fn predict_prints_one_line_and_appends_a_row() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), 6, 7);
    let out_dir = dir.path().join("out");
    ok(run(&corpus, &out_dir, &[]));
    let preds = dir.path().join("preds.csv");
    let predict = || {
        jndmap()
            .arg("predict")
            .arg("--models")
            .arg(out_dir.join("mf_params.json"))
            .arg("--ranges")
            .arg(out_dir.join("ranges.json"))
            .args(["--anchor-vmaf", "92", "--threshold", "0.95", "--out"])
            .arg(&preds)
            .output()
            .unwrap()
    };
    let stdout = ok(predict());
    assert_eq!(stdout.lines().count(), 1, "{stdout}");
    assert!(stdout.starts_with("vmaf 92 dec range "), "{stdout}");
    let text = fs::read_to_string(&preds).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with(&tables::PREDICTIONS_HEADER.join(",")));
    ok(predict());
    assert_eq!(fs::read_to_string(&preds).unwrap().lines().count(), 3);

    let out = jndmap()
        .arg("predict")
        .arg("--models")
        .arg(out_dir.join("mf_params.json"))
        .arg("--ranges")
        .arg(out_dir.join("ranges.json"))
        .args(["--anchor-vmaf", "92", "--threshold", "1.5"])
        .output()
        .unwrap();
    assert_ne!(out.status.code(), Some(0));
}

/// Five contents with fixed ladders; truths of orders 1 to 3 in both
/// directions.
fn miniature(dir: &Path) {
    let ladder = [99.0, 96.0, 92.5, 89.0, 85.0, 81.0, 77.0, 72.0];
    let mut vmaf = String::from("content_id,recipe_id,resolution,level,vmaf\n");
    let mut truth = String::from("content_id,anchor_recipe_id,direction,jnd_recipe_id,order\n");
    for c in 0..5 {
        for (i, v) in ladder.iter().enumerate() {
            vmaf.push_str(&format!("v{c},q{i},1080p,{i},{}\n", v - c as f64 * 0.5));
        }
        for order in 1..=3u32 {
            let step = order as usize * 2;
            truth.push_str(&format!("v{c},q0,dec,q{step},{order}\n"));
            truth.push_str(&format!("v{c},q7,inc,q{},{order}\n", 7 - step));
        }
    }
    fs::write(dir.join("vmaf_scores.csv"), vmaf).unwrap();
    fs::write(dir.join("jnd_truth.csv"), truth).unwrap();
}

#[test]
fn evaluate_scores_higher_orders() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), 8, 8);
    let models_dir = dir.path().join("models");
    ok(run(&corpus, &models_dir, &["--families", "glm,logistic2"]));
    let mini = dir.path().join("mini");
    fs::create_dir_all(&mini).unwrap();
    miniature(&mini);

    let out_dir = dir.path().join("eval");
    let stdout = ok(jndmap()
        .arg("evaluate")
        .arg("--vmaf")
        .arg(mini.join("vmaf_scores.csv"))
        .arg("--truth")
        .arg(mini.join("jnd_truth.csv"))
        .arg("--models")
        .arg(models_dir.join("mf_params.json"))
        .arg("--ranges")
        .arg(models_dir.join("ranges.json"))
        .args(["--families", "glm,logistic2", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap());
    let metrics = read_json(&out_dir.join("metrics.json"));
    let groups: Vec<&String> = metrics.as_object().unwrap().keys().collect();
    assert_eq!(groups, ["dec", "dec@2", "dec@3", "inc", "inc@2", "inc@3"]);
    for g in groups {
        let cell = &metrics[g.as_str()]["glm"]["0.75"];
        assert_eq!(cell["n"], 5, "{g}: {cell}");
        assert!(cell["rmse"].as_f64().unwrap() >= cell["mae"].as_f64().unwrap());
    }
    for g in ["[dec]", "[dec@2]", "[dec@3]", "[inc]", "[inc@2]", "[inc@3]"] {
        assert!(stdout.contains(g), "{g} missing:\n{stdout}");
    }
}

#[test]
fn render_writes_one_svg_per_range() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), 6, 6);
    let out_dir = dir.path().join("out");
    ok(run(&corpus, &out_dir, &["--k", "3"]));
    let plots = dir.path().join("plots");
    let stdout = ok(jndmap()
        .arg("render")
        .arg("--samples")
        .arg(out_dir.join("curve_samples.csv"))
        .arg("--codist")
        .arg(out_dir.join("codist.csv"))
        .arg("--out")
        .arg(&plots)
        .output()
        .unwrap());
    assert_eq!(stdout.lines().count(), 3, "{stdout}");
    for line in stdout.lines() {
        let svg = fs::read_to_string(line).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.contains("<circle"));
    }
}
