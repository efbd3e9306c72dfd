use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use surveytax::corpus::{read_records, Taxonomy};
use surveytax::llmjudge::{build_prompt, judge, ChatRequest, FnTransport, HttpTransport, JudgeOptions, PromptSpec, Transport};
use surveytax::Error;

fn records() -> (Vec<surveytax::corpus::PaperRecord>, Taxonomy) {
    let t = Taxonomy::bundled();
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus10.jsonl");
    (read_records(path, &t).unwrap(), t)
}

fn quick() -> JudgeOptions {
    JudgeOptions { retry_delay_ms: 0, ..JudgeOptions::default() }
}

#[test]
fn prompt_contains_classes_text_and_hints() {
    let (recs, t) = records();
    let plain = PromptSpec::new(&t, false).unwrap();
    let p = build_prompt(&plain, &recs[0]);
    for c in t.classes() {
        assert!(p.contains(&format!("- {c}\n")) || p.ends_with(&format!("- {c}")), "{c}");
    }
    assert!(p.contains(&recs[0].title) && p.contains(&recs[0].summary));
    assert!(!p.contains("Keywords"));
    assert_eq!(p, build_prompt(&plain, &recs[0]));

    let hinted = PromptSpec::new(&t, true).unwrap();
    let p = build_prompt(&hinted, &recs[0]);
    for kw in &t.hints()["Trustworthy"] {
        assert!(p.contains(kw.as_str()), "{kw}");
    }
}

#[test]
fn retries_then_succeeds() {
    let (recs, t) = records();
    let spec = PromptSpec::new(&t, false).unwrap();
    let calls = Mutex::new(std::collections::HashMap::<(String, usize), usize>::new());
    let flaky = FnTransport(|req: &ChatRequest| {
        let mut c = calls.lock().unwrap();
        let n = c.entry((req.paper_id.clone(), req.repetition)).or_default();
        *n += 1;
        if *n == 1 {
            Err(Error::Transport("connection reset".into()))
        } else {
            Ok("Comprehensive".into())
        }
    });
    let run = judge(&recs, &t, &spec, &flaky, &JudgeOptions { repetitions: 2, ..quick() }).unwrap();
    assert!(run.transcripts.iter().all(|tr| tr.attempts == 2 && tr.error.is_none()));
    assert_eq!(run.per_repetition.len(), 2);
    assert!((run.accuracy.mean - 0.4).abs() < 1e-15);
}

#[test]
fn exhausted_retries_count_as_wrong() {
    let (recs, t) = records();
    let spec = PromptSpec::new(&t, false).unwrap();
    let count = AtomicUsize::new(0);
    let down = FnTransport(|_: &ChatRequest| {
        count.fetch_add(1, Ordering::Relaxed);
        Err(Error::Transport("503".into()))
    });
    let options = JudgeOptions { repetitions: 1, max_retries: 2, ..quick() };
    let run = judge(&recs, &t, &spec, &down, &options).unwrap();
    assert_eq!(count.load(Ordering::Relaxed), 30);
    assert_eq!(run.accuracy.mean, 0.0);
    assert_eq!(run.per_repetition[0].failures, 10);
    assert!(run.transcripts.iter().all(|tr| tr.parsed.is_none() && tr.error.is_some()));
}

#[test]
fn concurrency_does_not_change_results() {
    let (recs, t) = records();
    let spec = PromptSpec::new(&t, true).unwrap();
    let answer = FnTransport(|req: &ChatRequest| Ok(if req.repetition.is_multiple_of(2) { "Comprehensive" } else { "Trustworthy" }.to_string()));
    let one = judge(&recs, &t, &spec, &answer, &JudgeOptions { concurrency: 1, ..quick() }).unwrap();
    let many = judge(&recs, &t, &spec, &answer, &JudgeOptions { concurrency: 8, ..quick() }).unwrap();
    assert_eq!(one, many);
    assert!(one.accuracy.std > 0.0);
}

/// Serves one canned HTTP response per connection and captures each request.
fn serve(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        let mut seen = Vec::new();
        for (status, body) in responses {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut head = String::new();
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" {
                    break;
                }
            }
            let mut body_in = vec![0; length];
            reader.read_exact(&mut body_in).unwrap();
            seen.push(head + &String::from_utf8(body_in).unwrap());
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
        seen
    });
    (format!("http://{addr}/v1"), handle)
}

#[test]
fn http_transport_posts_chat_completions() {
    let reply = r#"{"choices":[{"message":{"role":"assistant","content":"Efficiency"}}]}"#.to_string();
    let (base, server) = serve(vec![(200, reply)]);
    let http = HttpTransport::new(base, "test-model", Some("secret".into()));
    let req = ChatRequest { paper_id: "p".into(), repetition: 0, prompt: "Classify \"this\"".into() };
    assert_eq!(http.complete(&req).unwrap(), "Efficiency");
    let seen = server.join().unwrap();
    let raw = &seen[0];
    assert!(raw.starts_with("POST /v1/chat/completions "), "{raw}");
    assert!(raw.to_ascii_lowercase().contains("authorization: bearer secret"));
    let body: serde_json::Value = serde_json::from_str(raw.split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["messages"][0]["content"], "Classify \"this\"");
}

#[test]
fn http_errors_are_transport_errors() {
    let (base, server) = serve(vec![(500, "{}".into()), (200, r#"{"choices":[]}"#.into())]);
    let http = HttpTransport::new(base, "m", None);
    let req = ChatRequest { paper_id: "p".into(), repetition: 0, prompt: "x".into() };
    assert!(matches!(http.complete(&req), Err(Error::Transport(_))));
    assert!(matches!(http.complete(&req), Err(Error::Transport(_))));
    server.join().unwrap();
}
