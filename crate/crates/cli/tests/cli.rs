mod common;

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;

use common::{Workspace, BIN};
use serde_json::json;

#[test]
fn help_on_every_command() {
    for cmd in ["ingest", "quantify", "aggregate", "analyze", "train", "predict", "genre-influence", "report"] {
        let out = std::process::Command::new(BIN).args([cmd, "--help"]).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{cmd}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage: reviewmine"), "{cmd}");
    }
    let out = std::process::Command::new(BIN).arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn ingest_writes_eligible_games() {
    let ws = Workspace::new();
    let r = ws.run(&["ingest"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.summary["status"], "ok");
    assert_eq!(r.summary["eligible"], 12);
    let meta = fs::read_to_string(ws.out().join("data/metadata.csv")).unwrap();
    assert_eq!(meta.lines().count(), 13);
    let excl = fs::read_to_string(ws.out().join("data/exclusions.csv")).unwrap();
    assert!(excl.contains("1101,Steam,TooFewReviews,review_count=24"));
    assert!(excl.contains("2101,Meta,TooOld,release_date=2019-05-05"));
    assert!(excl.contains("1103,Steam,UnreleasedOrUnknownDate,release_date=Coming soon"));
}

#[test]
fn malformed_entry_is_a_diagnostic() {
    let ws = Workspace::new();
    let path = ws.path().join("raw/steam.json");
    let mut raw: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    raw["1999"] = json!({"name": "Broken", "price": "call us", "release_date": "2022-01-01", "review_count": 90});
    fs::write(&path, raw.to_string()).unwrap();
    let r = ws.run(&["ingest"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert_eq!(r.summary["status"], "diagnostics");
    assert_eq!(r.summary["parse_errors"], json!(["1999"]));
    assert_eq!(r.summary["eligible"], 12);
    let excl = fs::read_to_string(ws.out().join("data/exclusions.csv")).unwrap();
    assert!(excl.lines().any(|l| l.starts_with("1999,Steam,ParseError,")), "{excl}");
}

#[test]
fn missing_price_is_a_diagnostic() {
    let ws = Workspace::new();
    let path = ws.path().join("raw/steam.json");
    let mut raw: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    raw["1002"].as_object_mut().unwrap().remove("price");
    fs::write(&path, raw.to_string()).unwrap();
    let r = ws.run(&["ingest"]);
    assert_eq!(r.code, 2);
    assert_eq!(r.summary["missing_price"], json!(["1002"]));
}

#[test]
fn missing_input_path_is_fatal() {
    let ws = Workspace::new();
    let r = ws.run(&["ingest", "--steam", "nowhere/steam.json"]);
    assert_eq!(r.code, 1);
    assert_eq!(r.summary["error"], "MissingInput");
    assert!(r.summary["message"].as_str().unwrap().contains("nowhere/steam.json"));
    assert!(!ws.out().exists());
}

#[test]
fn malformed_json_is_fatal_with_offset() {
    let ws = Workspace::new();
    fs::write(ws.path().join("raw/meta.json"), "[{\"id\": 1,]").unwrap();
    let r = ws.run(&["ingest"]);
    assert_eq!(r.code, 1);
    assert_eq!(r.summary["error"], "Parse");
    assert!(r.summary["message"].as_str().unwrap().contains("byte"));
}

#[test]
fn analyze_before_aggregate() {
    let ws = Workspace::new();
    assert_eq!(ws.run(&["ingest"]).code, 0);
    let r = ws.run(&["analyze"]);
    assert_eq!(r.code, 1);
    assert_eq!(r.summary["status"], "error");
    assert_eq!(r.summary["error"], "MissingInput");
    for cmd in ["train", "predict", "genre-influence", "report"] {
        let r = ws.run(&[cmd]);
        assert_eq!((r.code, r.summary["error"].as_str()), (1, Some("MissingInput")), "{cmd}");
    }
}

#[test]
fn unreachable_endpoint_fails_before_any_work() {
    let ws = Workspace::new();
    assert_eq!(ws.run(&["ingest"]).code, 0);
    let r = ws.run(&["quantify"]);
    assert_eq!(r.code, 1);
    assert_eq!(r.summary["error"], "EndpointUnreachable");
    assert!(!ws.out().join("data/quantified").exists());
}

fn closed_port() -> u16 {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    l.local_addr().unwrap().port()
}

#[test]
fn endpoint_precedence_is_file_then_env_then_flag() {
    let ws = Workspace::new();
    assert_eq!(ws.run(&["ingest"]).code, 0);
    let env_url = format!("http://127.0.0.1:{}/from-env", closed_port());
    let flag_url = format!("http://127.0.0.1:{}/from-flag", closed_port());
    let message = |r: common::Run| r.summary["message"].as_str().unwrap().to_string();

    assert!(message(ws.run(&["quantify"])).contains("127.0.0.1:9/v1/chat/completions"));
    let r = ws.run_env(&["quantify"], &[("QUANT_ENDPOINT", &env_url)]);
    assert!(message(r).contains("/from-env"));
    let r = ws.run_env(&["quantify", "--endpoint", &flag_url], &[("QUANT_ENDPOINT", &env_url)]);
    assert!(message(r).contains("/from-flag"));
}

#[test]
fn bad_config_is_fatal() {
    let ws = Workspace::new();
    fs::write(ws.path().join("pipeline.toml"), "[filters]\nmin_reviews = 0\n").unwrap();
    let r = ws.run(&["ingest"]);
    assert_eq!((r.code, r.summary["error"].as_str()), (1, Some("Config")));
    fs::write(ws.path().join("pipeline.toml"), "[quantifier]\nendpoint = \"x\"\n").unwrap();
    let r = ws.run(&["ingest"]);
    assert_eq!((r.code, r.summary["error"].as_str()), (1, Some("Config")));
}

#[test]
fn missing_review_file_carries_through_as_diagnostics() {
    let ws = Workspace::new();
    fs::remove_file(ws.path().join("reviews/2004_20.csv")).unwrap();
    assert_eq!(ws.run(&["ingest"]).code, 0);
    let r = ws.run(&["quantify", "--mock-llm", "mock_llm.json"]);
    assert_eq!(r.code, 2);
    assert_eq!(r.summary["missing_review_files"], json!(["2004"]));
    assert_eq!(r.summary["attempted"], 220);
    let r = ws.run(&["aggregate"]);
    assert_eq!(r.code, 2);
    assert_eq!(r.summary["unmatched_metadata"], json!(["2004"]));
    assert_eq!(r.summary["merged_games"], 11);
    assert_eq!(ws.run(&["analyze"]).code, 0);
}

#[test]
fn single_platform_analysis() {
    let ws = Workspace::new();
    for args in &common::FULL_RUN[..3] {
        assert_eq!(ws.run(args).code, 0);
    }
    let r = ws.run(&["analyze", "--platform", "vr", "--out", "vr_only"]);
    assert_eq!(r.code, 0);
    assert_eq!(r.summary["platform_games"], json!({"vr": 5}));
    let names: Vec<String> = fs::read_dir(ws.path().join("vr_only"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.contains(&"correlations_vr.csv".to_string()));
    assert!(!names.contains(&"correlations_pc.csv".to_string()));
}

#[test]
fn report_without_model_is_a_diagnostic() {
    let ws = Workspace::new();
    for args in &common::FULL_RUN[..4] {
        assert_eq!(ws.run(args).code, 0);
    }
    let r = ws.run(&["report"]);
    assert_eq!(r.code, 2);
    assert_eq!(r.summary["model"], false);
    let md = fs::read_to_string(ws.out().join("reports/summary.md")).unwrap();
    assert!(md.contains("No model found."));
}

/// Answers every reviews request; the first page holds two reviews.
fn steam_server() -> (String, thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut targets = Vec::new();
        for stream in listener.incoming().take(2) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                if h.trim().is_empty() {
                    break;
                }
            }
            let target = line.split_whitespace().nth(1).unwrap().to_string();
            let body = if target.contains("cursor=*") {
                r#"{"success":1,"cursor":"next","reviews":[{"recommendationid":"55","review":"Great gameplay 9/10"},{"recommendationid":"56","review":"bad, story 2/10"}]}"#
            } else {
                r#"{"success":1,"cursor":"next","reviews":[]}"#
            };
            write!(stream, "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len()).unwrap();
            targets.push(target);
        }
        targets
    });
    (base, handle)
}

#[test]
fn ingest_fetches_missing_steam_reviews() {
    let ws = Workspace::new();
    fs::remove_file(ws.path().join("reviews/1001_20.csv")).unwrap();
    let mut cfg = fs::read_to_string(ws.path().join("pipeline.toml")).unwrap();
    cfg.push_str("\n[steam]\ninterval = 0\n");
    fs::write(ws.path().join("pipeline.toml"), cfg).unwrap();
    let (base, server) = steam_server();
    let r = ws.run(&["ingest", "--fetch-reviews", "--steam-base-url", &base]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.summary["reviews_fetched"], 1);
    assert_eq!(r.summary["reviews_present"], 7);
    let targets = server.join().unwrap();
    assert!(targets[0].starts_with("/appreviews/1001?"));
    let text = fs::read_to_string(ws.path().join("reviews/1001_2.csv")).unwrap();
    assert_eq!(text, "review_id,text\n55,Great gameplay 9/10\n56,\"bad, story 2/10\"\n");
}
