use std::path::Path;
use std::process::{Command, Output};

use hyperembed::store::save_features;
use hyperembed::{Matrix, Rng};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperembed"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn bounds_prints_the_known_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bounds", "--n", "10575", "--ell-sq", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "8.27");
    // a point query writes nothing unless asked
    assert!(!dir.path().join("out").exists());
}

#[test]
fn bounds_curve_is_written_under_out() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["bounds", "--out", "curves"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("curves/bound_curve.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("ell_sq,n,bound"));
    assert_eq!(lines.count(), 4 * 20);
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["gradcheck", "--loss", "all", "--trials", "100"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("ok")).count(), 8);
}

#[test]
fn gradcheck_rejects_unknown_loss() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["gradcheck", "--loss", "hinge"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["train", "--config", "missing.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.toml"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[train]\nlearning_rate = 0.1\n").unwrap();
    let o = run(&["train", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("learning_rate"));
}

#[test]
fn train_writes_artifacts_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "[data]\nsource = \"blobs\"\nclasses = 4\nper_class = 20\ndim = 6\n\
         [model]\nhidden = [16]\nfeature_dim = 4\n\
         [train]\niterations = 50\nlr = 0.05\nbatch_size = 32\nsnapshot_every = 25\n",
    )
    .unwrap();
    let a = run(&["train", "--config", "run.toml", "--seed", "5", "--out", "a"], dir.path());
    let b = run(&["train", "--config", "run.toml", "--seed", "5", "--out", "b"], dir.path());
    assert!(a.status.success() && b.status.success(), "{}", stderr(&a));
    for name in ["loss_curve.csv", "model.bin", "features.bin", "snapshot_50.bin"] {
        let x = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }
}

#[test]
fn scatter_requires_planar_features() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["scatter"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("feature_dim"));
}

#[test]
fn eval_pairs_writes_folds_and_far_curve() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = Rng::new(1);
    let base = rng.normal_matrix(20, 8, 1.0);
    let mut rows = Vec::new();
    for i in 0..20 {
        rows.push(base.row(i).to_vec());
        rows.push(base.row(i).iter().map(|v| v + 0.2 * rng.normal()).collect());
    }
    save_features(&dir.path().join("feats.bin"), &Matrix::from_rows(&rows).unwrap()).unwrap();
    let mut list = String::from("# a b same\n");
    for i in 0..20 {
        list.push_str(&format!("{} {} 1\n", 2 * i, 2 * i + 1));
        list.push_str(&format!("{} {} 0\n", 2 * i, (2 * i + 3) % 40));
    }
    std::fs::write(dir.path().join("pairs.txt"), list).unwrap();
    std::fs::write(
        dir.path().join("eval.toml"),
        "[eval]\nfeatures = \"feats.bin\"\npairs = \"pairs.txt\"\nfar = [0.1, 0.001]\n",
    )
    .unwrap();
    let o = run(&["eval-pairs", "--config", "eval.toml", "--out", "res"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let folds = std::fs::read_to_string(dir.path().join("res/fold_results.csv")).unwrap();
    assert!(folds.starts_with("fold,threshold,accuracy\n"));
    assert_eq!(folds.lines().count(), 11);
    let far = std::fs::read_to_string(dir.path().join("res/far_tpr.csv")).unwrap();
    let lines: Vec<&str> = far.lines().collect();
    assert_eq!(lines[0], "far,tpr");
    // 20 negatives cannot resolve a 0.001 false-accept rate
    assert_eq!(lines[2], "0.001,");
}

#[test]
fn synthetic_video_eval_runs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("v.toml"), "[video]\nsynthetic_pairs = 100\n").unwrap();
    let o = run(&["eval-video", "--config", "v.toml", "--out", "v"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("HIK-SVM"));
    assert!(dir.path().join("v/fold_results.csv").exists());
}

#[test]
fn prop_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["prop-check", "--trials", "200"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}
