use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "sellers": 5, "train_episodes": 2, "eval_episodes": 1, "steps_per_episode": 15, "price_resolution": 10,
  "rl": {"batch_size": 8, "prefill_episodes": 1, "background_hidden": 4, "seller_hidden": 3, "head_hidden": 4, "ddpg_hidden": [6, 6]}
}"#;

fn ia_arena(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ia-arena")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("small.json");
    fs::write(&path, SMALL).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn simulate_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out_dir = dir.path().join("sim");
    let out =
        ia_arena(&["simulate", "--config", &cfg, "--set", "allocator=greedy", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("episode,step,reward,critic_loss,wall_ms"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 45);
    assert!(rows[0].starts_with("0,0,") && rows[0].ends_with(",,"));
    assert!(rows[44].starts_with("2,14,"));
    assert!(out_dir.join("config.json").exists());
}

#[test]
fn compare_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = ia_arena(&["compare", "--config", &cfg, "--seeds", "2", "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 10, "{names:?}");
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
    let summary = fs::read_to_string(a.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(summary.starts_with("allocator,config_hash,seeds,mean_eval_reward,std_eval_reward\ngreedy,"));
}

#[test]
fn train_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let train_dir = dir.path().join("train");
    let out = ia_arena(&["train", "--config", &cfg, "--set", "allocator=iagru", "--out", train_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let ckpt = train_dir.join("checkpoint.txt");
    let eval_dir = dir.path().join("eval");
    let out = ia_arena(&[
        "evaluate",
        "--config",
        &cfg,
        "--set",
        "allocator=iagru",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(eval_dir.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 16);

    let out = ia_arena(&[
        "evaluate",
        "--config",
        &cfg,
        "--set",
        "allocator=ddpg",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("checkpoint holds a iagru agent"), "{}", stderr(&out));
}

#[test]
fn errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out_dir = dir.path().join("x");
    let out_dir = out_dir.to_str().unwrap();

    let out = ia_arena(&["simulate", "--config", &cfg, "--set", "bogus=1", "--out", out_dir]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("unknown config key bogus"));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ nope").unwrap();
    let out = ia_arena(&["simulate", "--config", bad.to_str().unwrap(), "--out", out_dir]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("malformed config"));

    let out = ia_arena(&["simulate", "--config", "/definitely/missing.json", "--out", out_dir]);
    assert!(stderr(&out).contains("cannot read config"));

    let out = ia_arena(&["train", "--config", &cfg, "--set", "allocator=greedy", "--out", out_dir]);
    assert!(stderr(&out).contains("not a learned allocator"));

    let out = ia_arena(&["compare", "--config", &cfg, "--allocators", "greedy,oracle", "--out", out_dir]);
    assert!(stderr(&out).contains("unknown allocator"));

    let out = ia_arena(&[
        "evaluate",
        "--config",
        &cfg,
        "--set",
        "allocator=iagru",
        "--checkpoint",
        "/nope.txt",
        "--out",
        out_dir,
    ]);
    assert!(!out.status.success());
}

#[test]
fn gradcheck_passes() {
    let out = ia_arena(&["gradcheck", "--instances", "5"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().all(|l| l.ends_with("ok")));
}
