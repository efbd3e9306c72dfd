use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn surveytax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surveytax"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("SURVEYTAX_LLM_BASE_URL")
        .env_remove("SURVEYTAX_LLM_MODEL")
        .env_remove("SURVEYTAX_LLM_API_KEY")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = surveytax(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap()
}

#[test]
fn stats_writes_csv_with_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let js = dir.path().join("s.json");
    ok(&["stats", "--data", s(&fixture("corpus10.jsonl")), "--out", s(&out), "--json", s(&js)]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("series,key,count\n"));
    assert!(text.contains("category,cs.CL,"));
    assert_eq!(json(&js)["record_count"], 10);
}

#[test]
fn run_reports_every_seed_and_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture("corpus10.jsonl");
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let md = dir.path().join("a.md");
    let csv = dir.path().join("a.csv");
    for out in [&a, &b] {
        ok(&[
            "run", "--graph", "cocategory", "--seeds", "0..4", "--data", s(&data), "--out", s(out),
            "--epochs", "60", "--markdown", s(&md), "--csv", s(&csv),
        ]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let report = json(&a);
    assert_eq!(report["per_seed"].as_array().unwrap().len(), 5);
    assert_eq!(report["label"], "Co-category");
    assert_eq!(report["schema_version"], 1);
    assert!(std::fs::read_to_string(&md).unwrap().starts_with("| Graph | Accuracy | Weighted F1 |"));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 2);
}

#[test]
fn removal_is_named_in_the_label() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    ok(&[
        "run", "--graph", "cocategory", "--remove", "cs.CL,cs.AI", "--seeds", "0", "--epochs", "20",
        "--data", s(&fixture("corpus10.jsonl")), "--out", s(&out),
    ]);
    let report = json(&out);
    assert_eq!(report["label"], "Co-category (Rm cs.AI, cs.CL)");
    assert_eq!(report["removed_categories"], serde_json::json!(["cs.AI", "cs.CL"]));
}

#[test]
fn exit_codes() {
    let bad_flag = surveytax(&["run", "--bogus"]);
    assert_eq!(bad_flag.status.code(), Some(2));
    let bad_seeds = surveytax(&["run", "--data", "x", "--out", "y", "--seeds", "4..1"]);
    assert_eq!(bad_seeds.status.code(), Some(2));
    let missing = surveytax(&["stats", "--data", "/definitely/missing.jsonl", "--out", "/tmp/never.csv"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error[io]: /definitely/missing.jsonl"));
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.jsonl");
    std::fs::write(&broken, "{\"paper_id\": 1}\n").unwrap();
    let parse = surveytax(&["stats", "--data", s(&broken), "--out", s(&dir.path().join("o.csv"))]);
    assert_eq!(parse.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&parse.stderr).contains("error[parse]: line 1"));
    let config = surveytax(&["run", "--data", s(&fixture("corpus10.jsonl")), "--out", "x", "--lr", "0"]);
    assert_eq!(config.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&config.stderr).contains("error[config]"));
    assert_eq!(surveytax(&["stats", "--data", "x", "--out", "y", "--subset", "nope"]).status.code(), Some(2));
}

#[test]
fn config_file_sets_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "epochs = 15\nhidden = 8\n[run]\nseeds = \"0..1\"\nremove = [\"cs.LG\"]\n").unwrap();
    let out = dir.path().join("r.json");
    ok(&[
        "run", "--config", s(&cfg), "--data", s(&fixture("corpus10.jsonl")), "--out", s(&out), "--hidden", "4",
    ]);
    let report = json(&out);
    assert_eq!(report["config"]["epochs"], 15);
    assert_eq!(report["config"]["hidden"], 4);
    assert_eq!(report["per_seed"].as_array().unwrap().len(), 2);
    assert_eq!(report["label"], "Co-category (Rm cs.LG)");

    std::fs::write(&cfg, "no_such_flag = 1\n").unwrap();
    assert_eq!(surveytax(&["run", "--config", s(&cfg), "--data", "x", "--out", "y"]).status.code(), Some(2));
}

#[test]
fn ablate_writes_one_report_per_removal() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.json");
    ok(&[
        "ablate", "--data", s(&fixture("corpus10.jsonl")), "--out", s(&out), "--seeds", "0..1", "--epochs", "10",
        "--removal", "none", "--removal", "cs.IR", "--removal", "all",
    ]);
    let reports = json(&out);
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 3);
    assert_eq!(reports[0]["label"], "Co-category");
    assert_eq!(reports[1]["label"], "Co-category (Rm cs.IR)");
    // No paper holds cs.IR, so its graph equals the base graph.
    assert_eq!(reports[0]["graph_stats"], reports[1]["graph_stats"]);
    assert_eq!(reports[0]["per_seed"], reports[1]["per_seed"]);
    assert_eq!(reports[2]["graph_stats"]["edges"], 0);
}

#[test]
fn ingest_and_synth_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let syn = dir.path().join("syn.jsonl");
    ok(&["synth", "--out", s(&syn), "--papers", "40", "--seed", "3"]);
    assert_eq!(std::fs::read_to_string(&syn).unwrap().lines().count(), 40);
    let clean = dir.path().join("clean.jsonl");
    ok(&["ingest", "--data", s(&syn), "--out", s(&clean)]);
    assert_eq!(std::fs::read(&syn).unwrap(), std::fs::read(&clean).unwrap());
    let nov = dir.path().join("nov.jsonl");
    ok(&["ingest", "--data", s(&fixture("corpus10.jsonl")), "--subset", "nov23", "--out", s(&nov)]);
    let kept = std::fs::read_to_string(&nov).unwrap().lines().count();
    assert!(kept <= 10);
}

#[test]
fn checkpoint_exports_match_fresh_training() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    let (model, metrics, graph) = (p("m.bin"), p("m.json"), p("graph"));
    let (w1_path, w2_path, audit) = (p("w1.csv"), p("w2.csv"), p("audit.json"));
    let data = fixture("separable20.jsonl");
    let common = ["--epochs", "80", "--hidden", "16", "--seed", "2"];

    let mut args = vec!["train", "--data", s(&data), "--out", &model, "--metrics", &metrics, "--bundle", &graph];
    args.extend(common);
    ok(&args);
    assert!(Path::new(&p("m.bin.json")).exists());
    assert_eq!(json(Path::new(&metrics))["loss_trace"].as_array().unwrap().len(), 80);
    assert!(Path::new(&p("graph/edges.tsv")).exists() && Path::new(&p("graph/nodes.csv")).exists());

    let mut fresh = vec!["export-weak-labels", "--data", s(&data), "--out", &w1_path, "--audit", &audit];
    fresh.extend(common);
    ok(&fresh);
    ok(&["export-weak-labels", "--bundle", &graph, "--checkpoint", &model, "--out", &w2_path]);
    let w1 = std::fs::read_to_string(&w1_path).unwrap();
    assert_eq!(w1, std::fs::read_to_string(&w2_path).unwrap());
    assert!(w1.starts_with("paper_id,predicted_class,confidence,source\n"));
    assert_eq!(w1.lines().count(), 21);
    assert!(w1.lines().nth(1).unwrap().ends_with(",gcn-cocategory-seed2"));
    assert!(Path::new(&p("w1.csv.meta.json")).exists());
    assert_eq!(json(Path::new(&audit))["agreement"], 1.0);

    let (emb_path, pc_path) = (p("e.csv"), p("pc.csv"));
    ok(&["export-embeddings", "--bundle", &graph, "--checkpoint", &model, "--out", &emb_path, "--projection", &pc_path]);
    let emb = std::fs::read_to_string(&emb_path).unwrap();
    assert!(emb.starts_with("node_id,label,h0,"));
    assert_eq!(emb.lines().count(), 21);
    assert!(std::fs::read_to_string(&pc_path).unwrap().starts_with("node_id,label,pc1,pc2\n"));

    let other = fixture("corpus10.jsonl");
    let mismatch = surveytax(&["export-embeddings", "--data", s(&other), "--checkpoint", &model, "--out", &p("x.csv")]);
    assert_eq!(mismatch.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("error[validation]"));
    assert_eq!(surveytax(&["export-embeddings", "--out", "x"]).status.code(), Some(2));
}

/// Chat-completions stub answering every request with `answer`.
fn stub_server(answer: &'static str) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let mut reader = BufReader::new(stream.unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let reply = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": answer}}]}).to_string();
            let mut stream = reader.into_inner();
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
        }
    });
    format!("http://{addr}")
}

#[test]
fn judge_records_live_then_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = dir.path().join("fx");
    let data = fixture("corpus10.jsonl");
    let live_out = dir.path().join("live.json");
    let base = stub_server("The best fit is Comprehensive.");
    let live = Command::new(env!("CARGO_BIN_EXE_surveytax"))
        .args(["judge", "--data", s(&data), "--transport", "live", "--fixtures", s(&fixtures)])
        .args(["--repetitions", "2", "--hints", "on", "--out", s(&live_out)])
        .env("RUST_LOG", "warn")
        .env("SURVEYTAX_LLM_BASE_URL", &base)
        .env("SURVEYTAX_LLM_MODEL", "stub")
        .output()
        .unwrap();
    assert!(live.status.success(), "{}", String::from_utf8_lossy(&live.stderr));
    assert_eq!(std::fs::read_dir(&fixtures).unwrap().count(), 20);
    let run = json(&live_out);
    assert_eq!(run["accuracy"]["mean"], 0.4);
    assert_eq!(run["hints"], true);

    let (r1, r2) = (dir.path().join("r1.json"), dir.path().join("r2.json"));
    for out in [&r1, &r2] {
        ok(&[
            "judge", "--data", s(&data), "--transport", "replay", "--fixtures", s(&fixtures), "--repetitions", "2",
            "--hints", "on", "--out", s(out),
        ]);
    }
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&r2).unwrap());
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&live_out).unwrap());

    let no_env = surveytax(&["judge", "--data", s(&data), "--transport", "live", "--out", s(&r1)]);
    assert_eq!(no_env.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&no_env.stderr).contains("SURVEYTAX_LLM_BASE_URL"));
    assert_eq!(surveytax(&["judge", "--data", s(&data), "--out", s(&r1)]).status.code(), Some(2));
    assert_eq!(surveytax(&["judge", "--data", s(&data), "--hints", "maybe", "--out", "x"]).status.code(), Some(2));
}
