use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use octav_core::client::{ClientConfig, HttpClient};
use octav_core::{render_interval, TimeInterval};
use octav_eval::{
    deterministic_score, evaluate_dataset, parse_intervals, recall_at_1, EvalConfig, EvalError, Judge, Prediction,
};
use octav_synth::{AudioEditPlan, OctavRecord, Turn, Variant};
use proptest::prelude::*;

fn iv(a: f64, b: f64) -> TimeInterval {
    TimeInterval::new(a, b).unwrap()
}

fn record(id: &str, answer: &str, variant: Variant) -> OctavRecord {
    OctavRecord {
        id: id.into(),
        video_id: "v".into(),
        chunk: iv(0.0, 30.0),
        events: vec![],
        edits: AudioEditPlan { mute: true, overlays: vec![] },
        turns: vec![Turn::user("What happens?"), Turn::assistant(answer)],
        variant,
        audio_events: vec![],
        flags: vec![],
    }
}

/// References all [0, 10]; predictions with IoU 1.0, 0.6, 0.4 and 0.0.
fn handcrafted() -> (Vec<OctavRecord>, Vec<Prediction>) {
    let preds = [iv(0.0, 10.0), iv(0.0, 6.0), iv(0.0, 4.0), iv(20.0, 30.0)];
    let records = (0..4)
        .map(|i| record(&format!("r{i}"), "The dog barks from [0.0, 10.0].", Variant::SingleTurn))
        .collect();
    let predictions = preds
        .iter()
        .enumerate()
        .map(|(i, p)| Prediction { id: format!("r{i}"), text: format!("The dog barks from {}.", render_interval(p)) })
        .collect();
    (records, predictions)
}

#[test]
fn handcrafted_recall() {
    let refs = vec![iv(0.0, 10.0); 4];
    let preds = [iv(0.0, 10.0), iv(0.0, 6.0), iv(0.0, 4.0), iv(20.0, 30.0)];
    assert_eq!(recall_at_1(&preds, &refs, 0.5).unwrap(), 0.5);
    assert_eq!(recall_at_1(&preds, &refs, 0.7).unwrap(), 0.25);

    let (records, predictions) = handcrafted();
    let report = evaluate_dataset(&records, &predictions, &EvalConfig::default(), &Judge::Deterministic).unwrap();
    assert_eq!(report.r1_iou_05, 0.5);
    assert_eq!(report.r1_iou_07, 0.25);
    assert_eq!(report.n, 4);
}

#[test]
fn perfect_and_empty_predictions() {
    let records = vec![
        record("a", "The sound of laugh is from [18.0, 20.0]. From [20.0, 22.0], boil water.", Variant::SingleTurn),
        record("b", "Sorry, there is no sound of bird chirping.", Variant::MultiTurn),
    ];
    let perfect: Vec<Prediction> =
        records.iter().map(|r| Prediction { id: r.id.clone(), text: r.reference_answer() }).collect();
    let report = evaluate_dataset(&records, &perfect, &EvalConfig::default(), &Judge::Deterministic).unwrap();
    assert_eq!((report.accuracy, report.r1_iou_05, report.r1_iou_07), (1.0, 1.0, 1.0));
    assert_eq!(report.grounded, 1);
    assert_eq!(report.per_variant["MT"].n, 1);

    let empty: Vec<Prediction> = records.iter().map(|r| Prediction { id: r.id.clone(), text: String::new() }).collect();
    let report = evaluate_dataset(&records, &empty, &EvalConfig::default(), &Judge::Deterministic).unwrap();
    assert_eq!((report.accuracy, report.r1_iou_05, report.mean_score), (0.0, 0.0, 0.0));
}

#[test]
fn report_json_keys() {
    let (records, predictions) = handcrafted();
    let report = evaluate_dataset(&records, &predictions, &EvalConfig::default(), &Judge::Deterministic).unwrap();
    let v = serde_json::to_value(&report).unwrap();
    for key in ["accuracy", "r1_iou_0.5", "r1_iou_0.7", "n", "judge_mode", "threshold"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["judge_mode"], "deterministic");
    assert_eq!(v["threshold"], 3);
}

#[test]
fn alignment_by_id_and_errors() {
    let (records, mut predictions) = handcrafted();
    predictions.reverse();
    let a = evaluate_dataset(&records, &predictions, &EvalConfig::default(), &Judge::Deterministic).unwrap();
    assert_eq!(a.r1_iou_05, 0.5);
    predictions[0].id = "zzz".into();
    assert!(matches!(
        evaluate_dataset(&records, &predictions, &EvalConfig::default(), &Judge::Deterministic),
        Err(EvalError::MissingPrediction(_))
    ));
    assert!(matches!(
        evaluate_dataset(&records, &predictions[..3], &EvalConfig::default(), &Judge::Deterministic),
        Err(EvalError::LengthMismatch { .. })
    ));
}

/// Judge server that replies `{"score": 4}` after a short delay and records
/// the peak number of concurrent requests.
fn judge_server(n: usize, body: &'static str) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/judge", listener.local_addr().unwrap());
    let live = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(AtomicUsize::new(0));
    let peak_out = peak.clone();
    thread::spawn(move || {
        let mut handles = vec![];
        for _ in 0..n {
            let (stream, _) = listener.accept().unwrap();
            let (live, peak) = (live.clone(), peak.clone());
            handles.push(thread::spawn(move || {
                let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                peak.fetch_max(now, Ordering::SeqCst);
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line.trim_end().is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                thread::sleep(Duration::from_millis(50));
                live.fetch_sub(1, Ordering::SeqCst);
                let mut stream = stream;
                write!(
                    stream,
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }));
        }
        for h in handles {
            h.join().unwrap();
        }
    });
    (url, peak_out)
}

#[test]
fn llm_judge_respects_job_limit() {
    let (records, predictions) = handcrafted();
    let (url, peak) = judge_server(4, r#"{"score": 4}"#);
    let client = HttpClient::new(ClientConfig::from_env(url));
    let cfg = EvalConfig { jobs: 2, ..EvalConfig::default() };
    let report = evaluate_dataset(&records, &predictions, &cfg, &Judge::Client(&client)).unwrap();
    assert_eq!(report.accuracy, 1.0);
    assert_eq!(report.mean_score, 4.0);
    assert_eq!(serde_json::to_value(&report).unwrap()["judge_mode"], "llm-client");
    assert!(peak.load(Ordering::SeqCst) <= 2);
}

#[test]
fn llm_judge_errors_are_surfaced() {
    let (records, predictions) = handcrafted();
    let (url, _) = judge_server(1, r#"{"score": 9}"#);
    let client = HttpClient::new(ClientConfig::from_env(url));
    let cfg = EvalConfig { jobs: 1, ..EvalConfig::default() };
    let one = (&records[..1], &predictions[..1]);
    assert!(matches!(
        evaluate_dataset(one.0, one.1, &cfg, &Judge::Client(&client)),
        Err(EvalError::BadScore(_))
    ));

    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", listener.local_addr().unwrap());
    drop(listener);
    let client = HttpClient::new(ClientConfig::from_env(url));
    assert!(matches!(
        evaluate_dataset(one.0, one.1, &cfg, &Judge::Client(&client)),
        Err(EvalError::Client(_))
    ));
}

fn interval() -> impl Strategy<Value = TimeInterval> {
    (0u32..5000, 0u32..5000).prop_map(|(a, d)| iv(a as f64 / 10.0, (a + d) as f64 / 10.0))
}

proptest! {
    #[test]
    fn recall_monotone_in_threshold(
        pairs in prop::collection::vec((interval(), interval()), 1..30),
        t1 in 0.01f64..1.0,
        t2 in 0.01f64..1.0,
    ) {
        let (p, r): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(recall_at_1(&p, &r, hi).unwrap() <= recall_at_1(&p, &r, lo).unwrap());
    }

    #[test]
    fn judge_self_is_five(words in prop::collection::vec("[a-z]{1,8}", 1..12), spans in prop::collection::vec(interval(), 0..4)) {
        let mut text = words.join(" ");
        for s in &spans {
            text.push_str(&format!(" from {}", render_interval(s)));
        }
        prop_assert_eq!(deterministic_score(&text, &text), 5);
    }

    #[test]
    fn parse_inverts_render(spans in prop::collection::vec(interval(), 0..6)) {
        let text: Vec<String> = spans.iter().map(|s| format!("at {}", render_interval(s))).collect();
        let parsed = parse_intervals(&text.join(", "));
        prop_assert_eq!(parsed.intervals, spans);
    }
}
