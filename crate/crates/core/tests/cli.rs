use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pbooster::anonymizers::load_manipulated;
use pbooster::domain::{load_graph, TopicModel};
use pbooster::socialsim::GroundTruth;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pbooster"));
    c.env_remove("PBOOSTER_SEED");
    c
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn ok(cmd: &mut Command) -> String {
    let out = run(cmd);
    assert!(
        out.status.success(),
        "status {:?}\nstdout {}\nstderr {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn simulate(dir: &Path, seed: &str) {
    ok(bin()
        .args([
            "simulate",
            "--n-users",
            "40",
            "--degree-max",
            "9",
            "--sizes",
            "12",
            "--seed",
            seed,
            "--out",
        ])
        .arg(dir));
}

fn digest(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_creates_missing_dir_and_is_seed_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("deep/a");
    let b = tmp.path().join("b");
    simulate(&a, "7");
    simulate(&b, "7");
    let da = digest(&a);
    assert_eq!(
        da.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
        [
            "graph.jsonl",
            "histories_12.jsonl",
            "topics.jsonl",
            "truth.jsonl"
        ]
    );
    assert_eq!(da, digest(&b));

    let c = tmp.path().join("c");
    simulate(&c, "8");
    assert_ne!(da, digest(&c));
}

#[test]
fn seed_env_var_is_used_and_flag_wins() {
    let tmp = tempfile::tempdir().unwrap();
    let flag = tmp.path().join("flag");
    simulate(&flag, "7");
    let env = tmp.path().join("env");
    ok(bin()
        .env("PBOOSTER_SEED", "7")
        .args([
            "simulate",
            "--n-users",
            "40",
            "--degree-max",
            "9",
            "--sizes",
            "12",
            "--out",
        ])
        .arg(&env));
    assert_eq!(digest(&flag), digest(&env));
    let both = tmp.path().join("both");
    ok(bin()
        .env("PBOOSTER_SEED", "1")
        .args([
            "simulate",
            "--n-users",
            "40",
            "--degree-max",
            "9",
            "--sizes",
            "12",
            "--seed",
            "7",
            "--out",
        ])
        .arg(&both));
    assert_eq!(digest(&flag), digest(&both));
}

#[test]
fn config_file_with_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.toml");
    fs::write(
        &cfg,
        "seed = 7\nsizes = [12]\n[sim]\nn_users = 40\ndegree_max = 9\n",
    )
    .unwrap();
    let from_cfg = tmp.path().join("cfg_out");
    ok(bin()
        .arg("--config")
        .arg(&cfg)
        .args(["simulate", "--out"])
        .arg(&from_cfg));
    let flags = tmp.path().join("flags");
    simulate(&flags, "7");
    assert_eq!(digest(&from_cfg), digest(&flags));

    let over = tmp.path().join("over");
    ok(bin()
        .arg("--config")
        .arg(&cfg)
        .args(["simulate", "--n-users", "30", "--out"])
        .arg(&over));
    let g = load_graph(&over.join("graph.jsonl"), &TopicModel::new(20).unwrap()).unwrap();
    assert_eq!(g.len(), 30);
}

#[test]
fn anonymize_attack_evaluate_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("data");
    simulate(&d, "3");
    let common = |c: &mut Command| {
        c.arg("--in")
            .arg(d.join("histories_12.jsonl"))
            .arg("--graph")
            .arg(d.join("graph.jsonl"))
            .arg("--truth")
            .arg(d.join("truth.jsonl"))
            .arg("--topics")
            .arg(d.join("topics.jsonl"));
    };
    let model = TopicModel::new(20).unwrap();
    let graph = load_graph(&d.join("graph.jsonl"), &model).unwrap();
    let truth = GroundTruth::load(&d.join("truth.jsonl")).unwrap();
    let load = |p: &Path| load_manipulated(p, &graph, |u| truth.owner(u, &graph)).unwrap();

    let zero = tmp.path().join("zero.jsonl");
    let mut c = bin();
    c.args(["anonymize", "--method", "pbooster", "--lambda", "0"]);
    common(&mut c);
    let line = ok(c.arg("--out").arg(&zero));
    assert!(line.contains(" 0 decoys"), "{line}");
    assert!(load(&zero).iter().all(|m| m.added.is_empty()));

    let isp = tmp.path().join("isp.jsonl");
    let mut c = bin();
    c.args([
        "anonymize",
        "--method",
        "isppolluter",
        "--n-possible-call",
        "100",
        "--n-calls",
        "200",
    ]);
    common(&mut c);
    ok(c.arg("--out").arg(&isp));
    assert!(load(&isp).iter().all(|m| m.added.len() == 19_900));

    let jf = tmp.path().join("jf.jsonl");
    let mut c = bin();
    c.args(["anonymize", "--method", "justfriends", "--lambda", "10"]);
    common(&mut c);
    ok(c.arg("--out").arg(&jf));
    let jf_hist = load(&jf);
    assert!(jf_hist.iter().any(|m| !m.added.is_empty()));
    for m in &jf_hist {
        for a in &m.added {
            assert!(graph.are_friends(m.owner, a.source_user));
        }
    }

    let csv_path = tmp.path().join("attack/att.csv");
    let attack = |out: Option<&Path>| {
        let mut c = bin();
        c.args(["attack", "--top-k", "10", "--histories"])
            .arg(&jf)
            .arg("--graph")
            .arg(d.join("graph.jsonl"))
            .arg("--truth")
            .arg(d.join("truth.jsonl"));
        if let Some(p) = out {
            c.arg("--out").arg(p);
        }
        ok(&mut c)
    };
    let stdout_csv = attack(None);
    assert!(stdout_csv.starts_with("user,method,lambda,h,history_size,true_rank,success_top_k\n"));
    assert_eq!(stdout_csv.lines().count(), 41);
    attack(Some(&csv_path));
    assert_eq!(fs::read_to_string(&csv_path).unwrap(), stdout_csv);

    let ev = tmp.path().join("ev");
    let out = ok(bin()
        .args(["evaluate", "--k", "3", "--histories"])
        .arg(&jf)
        .arg(&zero)
        .arg(d.join("histories_12.jsonl"))
        .arg("--graph")
        .arg(d.join("graph.jsonl"))
        .arg("--truth")
        .arg(d.join("truth.jsonl"))
        .arg("--out")
        .arg(&ev));
    assert_eq!(out.lines().count(), 3, "{out}");
    let sil = fs::read_to_string(ev.join("silhouette.csv")).unwrap();
    assert!(sil.starts_with("method,lambda,h,history_size,n_users,silhouette\n"));
    assert_eq!(sil.lines().count(), 4);
    let scatter = fs::read_to_string(ev.join("scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 1 + 3 * 40);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    // Usage errors and validation errors exit with 1.
    assert_eq!(run(bin().arg("frobnicate")).status.code(), Some(1));
    assert_eq!(
        run(bin().args(["anonymize", "--method", "tor"]))
            .status
            .code(),
        Some(1)
    );
    let cfg = tmp.path().join("empty.toml");
    fs::write(&cfg, "lambdas = []\n").unwrap();
    let out = run(bin()
        .arg("--config")
        .arg(&cfg)
        .args(["experiment", "--out"])
        .arg(tmp.path().join("x")));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda grid is empty"));
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "sed = 1\n").unwrap();
    assert_eq!(
        run(bin().arg("--config").arg(&bad).args(["simulate"]))
            .status
            .code(),
        Some(1)
    );

    let d = tmp.path().join("d");
    simulate(&d, "2");
    fs::write(
        d.join("h.jsonl"),
        "{\"user\":\"u00000\",\"links\":[{\"url\":\"x\",\"topic\":20}]}\n",
    )
    .unwrap();
    let out = run(bin()
        .args(["anonymize", "--in"])
        .arg(d.join("h.jsonl"))
        .arg("--graph")
        .arg(d.join("graph.jsonl"))
        .arg("--out")
        .arg(tmp.path().join("o.jsonl")));
    assert_eq!(out.status.code(), Some(1));

    // A missing input file is a runtime error.
    let out = run(bin()
        .args(["attack", "--histories", "/nonexistent.jsonl", "--truth"])
        .arg(d.join("truth.jsonl"))
        .arg("--graph")
        .arg(d.join("graph.jsonl")));
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(bin().arg("--help")).status.code(), Some(0));
}

#[test]
fn experiment_writes_one_row_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("exp");
    let cfg = tmp.path().join("cfg.toml");
    fs::write(&cfg, "[sim]\ndegree_max = 12\n").unwrap();
    ok(bin()
        .arg("--config")
        .arg(&cfg)
        .args([
            "experiment",
            "--seed",
            "4",
            "--n-users",
            "40",
            "--sizes",
            "15",
            "--lambdas",
            "0,10",
        ])
        .args([
            "--batch-sizes",
            "5,25",
            "--methods",
            "none,pbooster,isppolluter",
            "--out",
        ])
        .arg(&out));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    // none + isppolluter once each, pbooster for 2 lambdas x 2 batch sizes.
    assert_eq!(summary.lines().count(), 1 + 2 + 4);
    let mut keys: Vec<&str> = summary
        .lines()
        .skip(1)
        .map(|l| l.splitn(5, ',').take(4).last().unwrap())
        .collect();
    keys.dedup();
    assert_eq!(keys, ["15"]);
    for f in [
        "cells.csv",
        "attack_users.csv",
        "scatter.csv",
        "silhouette.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
}
