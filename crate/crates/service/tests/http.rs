mod common;

use std::time::Duration;

use axum::http::StatusCode;
use common::{app, call, create, post_event, SCRIPTED_LOG};
use qir_core::qprob::{DenseMatrix, ToDense};
use qir_core::session::{parse_log, replay};
use qir_core::SessionConfig;
use qir_service::store::Journal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn query(text: &str) -> Value {
    json!({"type": "query", "text": text})
}

fn click(doc_id: &str) -> Value {
    json!({"type": "click", "doc_id": doc_id})
}

fn assert_probability(v: &Value) {
    let p = v.as_f64().unwrap_or(f64::NAN);
    assert!((0.0..=1.0).contains(&p), "probability {v}");
}

#[tokio::test]
async fn create_query_rank() {
    let (_, r) = app(64);
    let id = create(&r, None).await;
    let (status, diag) = post_event(&r, &id, query("tiger")).await;
    assert_eq!(status, StatusCode::OK, "{diag}");
    assert_eq!(diag["t"], 0);
    assert_eq!(diag["drift_flagged"], false);
    assert_probability(&diag["event_probability"]);

    let (status, body) = call(&r, "GET", &format!("/sessions/{id}/rank?n=5"), None).await;
    assert_eq!(status, StatusCode::OK);
    let results = body["results"].as_array().unwrap();
    assert_eq!(results.len(), 5);
    for w in results.windows(2) {
        assert!(w[0]["probability"].as_f64() >= w[1]["probability"].as_f64());
    }
    for item in results {
        assert_probability(&item["probability"]);
        assert!(!item["title"].as_str().unwrap().is_empty());
    }

    let (_, body) = call(&r, "GET", &format!("/sessions/{id}/rank"), None).await;
    assert_eq!(body["results"].as_array().unwrap().len(), 10);
    let (_, body) = call(&r, "GET", &format!("/sessions/{id}/rank?n=1000"), None).await;
    assert_eq!(body["results"].as_array().unwrap().len(), 30);
}

#[tokio::test]
async fn empty_body_and_overrides() {
    let (_, r) = app(64);
    let (status, _) = call(&r, "POST", "/sessions", Some(json!({}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = create(
        &r,
        Some(json!({"alpha_click": 0.9, "tau": 0.25, "query_mode": "term_union", "prf_k": 3})),
    )
    .await;
    let (_, state) = call(&r, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(state["config"]["alpha_click"], 0.9);
    assert_eq!(state["config"]["tau"], 0.25);
    assert_eq!(state["query_mode"], "term_union");
    assert_eq!(state["config"]["alpha_judgment"], 0.6);

    for bad in [
        json!({"alpha_click": 1.5}),
        json!({"tau": 0.0}),
        json!({"prf_k": 0}),
        json!({"query_mode": "bm25"}),
        json!({"alpha": 0.5}),
        json!({"context": "the of and"}),
    ] {
        let (status, body) = call(&r, "POST", "/sessions", Some(bad.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
        assert!(body["error"].is_string());
    }
}

#[tokio::test]
async fn context_conditions_new_sessions() {
    let (_, r) = app(64);
    let id = create(&r, Some(json!({"context": "lion"}))).await;
    let (_, d) = call(&r, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(d["config"]["has_context"], true);
    let (_, rank) = call(&r, "GET", &format!("/sessions/{id}/rank?n=15"), None).await;
    // the lion context pushes lion documents ahead of every tiger document
    let lions = rank["results"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|x| x["doc_id"].as_str().unwrap().starts_with("lion-"))
        .count();
    assert!(lions >= 12, "{rank}");
}

#[tokio::test]
async fn unknown_session_is_404() {
    let (_, r) = app(64);
    for (method, uri, body) in [
        ("POST", "/sessions/nope/events", Some(query("tiger"))),
        ("GET", "/sessions/nope/rank", None),
        ("GET", "/sessions/nope/drift?q=tiger", None),
        ("GET", "/sessions/nope/state", None),
    ] {
        let (status, body) = call(&r, method, uri, body).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert!(body["error"].as_str().unwrap().contains("nope"));
    }
}

#[tokio::test]
async fn invalid_events_are_422() {
    let (_, r) = app(64);
    let id = create(&r, None).await;
    for bad in [
        click("tiger-99"),
        json!({"type": "judgment", "doc_id": "ghost", "positive": true}),
        json!({"type": "click", "doc_id": "tiger-01", "alpha": 1.5}),
        json!({"type": "query", "text": "the and of"}),
        json!({"type": "query", "text": "xylophone"}),
        json!({"type": "teleport"}),
        json!({"doc_id": "tiger-01"}),
        json!("query"),
    ] {
        let (status, body) = post_event(&r, &id, bad.clone()).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}: {body}");
        assert!(body["error"].is_string());
    }
    let (status, _) = call(&r, "POST", &format!("/sessions/{id}/events"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    // rejected events leave no trace
    let (_, state) = call(&r, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(state["history_length"], 0);
}

#[tokio::test]
async fn bad_query_parameters_are_422() {
    let (_, r) = app(64);
    let id = create(&r, None).await;
    for uri in [
        format!("/sessions/{id}/rank?n=0"),
        format!("/sessions/{id}/rank?n=ten"),
        format!("/sessions/{id}/drift"),
        format!("/sessions/{id}/drift?q=the"),
    ] {
        let (status, _) = call(&r, "GET", &uri, None).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{uri}");
    }
}

#[tokio::test]
async fn drift_is_read_only_and_predicts_the_query() {
    let (_, r) = app(64);
    let id = create(&r, None).await;
    post_event(&r, &id, query("tiger")).await;
    post_event(&r, &id, click("tiger-01")).await;
    let (status, d) = call(
        &r,
        "GET",
        &format!("/sessions/{id}/drift?q=lion%20museums"),
        None,
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(d["terms"], json!(["lion", "museums"]));
    assert_eq!(d["tau"], 0.1);
    let (_, state) = call(&r, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(state["history_length"], 2);
    let (_, diag) = post_event(&r, &id, query("lion museums")).await;
    assert_eq!(d["probability"], diag["event_probability"]);
    assert_eq!(d["drift"], diag["drift_flagged"]);
}

#[tokio::test]
async fn scripted_topic_switch_flags_drift_once() {
    let (_, r) = app(64);
    let id = create(&r, None).await;
    let mut flags = Vec::new();
    for line in parse_log(SCRIPTED_LOG).unwrap() {
        let (status, diag) = post_event(&r, &id, serde_json::to_value(&line.event).unwrap()).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(diag["t"], line.t);
        flags.push(diag["drift_flagged"].as_bool().unwrap());
    }
    assert_eq!(flags, [false, false, false, false, true, false]);
}

#[tokio::test]
async fn state_timeline_and_dense_gate() {
    let (_, r) = app(64);
    let id = create(&r, None).await;
    let (_, s) = call(&r, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(s["history_length"], 0);
    assert_eq!(s["last_diagnostics"], Value::Null);
    assert_eq!(s["ensemble_rank"], 60);
    for e in [query("tiger"), click("tiger-09"), json!({"type": "reset"})] {
        post_event(&r, &id, e).await;
    }
    let (_, s) = call(&r, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(s["history_length"], 3);
    let types: Vec<&str> = s["history"]
        .as_array()
        .unwrap()
        .iter()
        .map(|h| h["event"]["type"].as_str().unwrap())
        .collect();
    assert_eq!(types, ["query", "click", "reset"]);
    let ts: Vec<u64> = s["history"]
        .as_array()
        .unwrap()
        .iter()
        .map(|h| h["diagnostics"]["t"].as_u64().unwrap())
        .collect();
    assert_eq!(ts, [0, 1, 2]);
    assert_eq!(s["last_diagnostics"]["t"], 2);
    assert_eq!(s["last_diagnostics"]["event_probability"], 1.0);
    // 404 dimensions exceed the debug bound of 64
    assert_eq!(s["dim"], 404);
    assert_eq!(s["max_dense_dim"], 64);
    assert!(s.get("dense").is_none());

    let (_, r) = app(512);
    let id = create(&r, None).await;
    let (_, s) = call(&r, "GET", &format!("/sessions/{id}/state"), None).await;
    let dense: DenseMatrix = serde_json::from_value(s["dense"].clone()).unwrap();
    assert_eq!(dense.dim(), 404);
    assert!((dense.trace().re - 1.0).abs() < 1e-12);
}

#[tokio::test]
async fn document_endpoint() {
    let (_, r) = app(64);
    let (status, d) = call(&r, "GET", "/corpus/docs/lion-08", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(d["doc_id"], "lion-08");
    assert_eq!(d["paragraphs"].as_array().unwrap().len(), 2);
    assert_eq!(d["paragraphs"][1]["para_id"], "lion-08#1");
    assert!(d["paragraphs"][0]["text"]
        .as_str()
        .unwrap()
        .to_lowercase()
        .contains("museum"));
    let (status, _) = call(&r, "GET", "/corpus/docs/zebra-01", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn interleaved_sessions_are_isolated() {
    let (_, r) = app(64);
    let a = create(&r, None).await;
    let b = create(&r, None).await;
    let run = |id: String, events: Vec<Value>| {
        let r = r.clone();
        async move {
            for e in events {
                let (status, _) = post_event(&r, &id, e).await;
                assert_eq!(status, StatusCode::OK);
                tokio::task::yield_now().await;
            }
        }
    };
    tokio::join!(
        run(
            a.clone(),
            vec![query("tiger"), click("tiger-01"), click("tiger-02")]
        ),
        run(b.clone(), vec![query("lion"), click("lion-03")]),
    );
    let (_, sa) = call(&r, "GET", &format!("/sessions/{a}/state"), None).await;
    let (_, sb) = call(&r, "GET", &format!("/sessions/{b}/state"), None).await;
    let docs = |s: &Value| -> Vec<String> {
        s["history"]
            .as_array()
            .unwrap()
            .iter()
            .map(|h| {
                let e = &h["event"];
                e.get("doc_id")
                    .or(e.get("text"))
                    .unwrap()
                    .as_str()
                    .unwrap()
                    .to_string()
            })
            .collect()
    };
    assert_eq!(docs(&sa), ["tiger", "tiger-01", "tiger-02"]);
    assert_eq!(docs(&sb), ["lion", "lion-03"]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_events_on_one_session_are_serialized() {
    let (_, r) = app(64);
    let id = create(&r, None).await;
    let handles: Vec<_> = (1..=8)
        .map(|i| {
            let r = r.clone();
            let id = id.clone();
            tokio::spawn(async move { post_event(&r, &id, click(&format!("tiger-{i:02}"))).await })
        })
        .collect();
    let mut ts = Vec::new();
    for h in handles {
        let (status, d) = h.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        ts.push(d["t"].as_u64().unwrap());
    }
    ts.sort();
    assert_eq!(ts, (0..8).collect::<Vec<u64>>());
    let (_, s) = call(&r, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(s["history_length"], 8);
}

#[tokio::test]
async fn impossible_measurement_is_recovered() {
    let (_, r) = app(64);
    let id = create(&r, None).await;
    // hard conditioning on a tiger document makes an unrelated lion document impossible
    post_event(
        &r,
        &id,
        json!({"type": "click", "doc_id": "tiger-03", "alpha": 1.0}),
    )
    .await;
    let (_, rank) = call(&r, "GET", &format!("/sessions/{id}/rank?n=30"), None).await;
    let zero = rank["results"]
        .as_array()
        .unwrap()
        .iter()
        .find(|x| x["probability"].as_f64().unwrap() == 0.0)
        .map(|x| x["doc_id"].as_str().unwrap().to_string())
        .expect("some document is orthogonal to tiger-03");
    let (status, d) = post_event(
        &r,
        &id,
        json!({"type": "click", "doc_id": zero, "alpha": 1.0}),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(d["event_probability"], 0.0);
    assert_eq!(d["drift_flagged"], true);
    assert_eq!(d["recovered"], true);
    let (_, drift) = call(&r, "GET", &format!("/sessions/{id}/rank?n=1"), None).await;
    assert_eq!(drift["results"][0]["doc_id"], zero);
}

#[tokio::test]
async fn http_events_match_library_replay() {
    let (app_state, r) = app(512);
    let id = create(&r, None).await;
    let lines = parse_log(SCRIPTED_LOG).unwrap();
    for line in &lines {
        post_event(&r, &id, serde_json::to_value(&line.event).unwrap()).await;
    }
    let (_, s) = call(&r, "GET", &format!("/sessions/{id}/state"), None).await;
    let http: DenseMatrix = serde_json::from_value(s["dense"].clone()).unwrap();
    let (state, out) = replay(&app_state.engine, "x", SessionConfig::default(), &lines).unwrap();
    assert!(http.max_abs_diff(&state.rho.to_dense_bounded(512).unwrap()) <= 1e-12);
    for (h, o) in s["history"].as_array().unwrap().iter().zip(&out) {
        assert_eq!(
            h["diagnostics"]["event_probability"].as_f64().unwrap(),
            o.diag.unwrap().event_probability
        );
    }
}

#[tokio::test]
async fn evicted_sessions_come_back_from_the_journal() {
    let dir = tempfile::tempdir().unwrap();
    let (mut state, _) = app(512);
    state.journal = Some(Journal::open(dir.path()).unwrap());
    let r = qir_service::router(state.clone());
    let id = create(&r, Some(json!({"alpha_click": 0.5}))).await;
    for e in [
        query("tiger"),
        click("tiger-04"),
        json!({"type": "judgment", "doc_id": "lion-07", "positive": false}),
    ] {
        post_event(&r, &id, e).await;
    }
    let (_, before) = call(&r, "GET", &format!("/sessions/{id}/state"), None).await;
    let journal = std::fs::read_to_string(dir.path().join(format!("{id}.jsonl"))).unwrap();
    assert_eq!(parse_log(&journal).unwrap().len(), 3);
    // journal lines carry the same diagnostics the client saw
    assert!(journal.contains("\"diag\":{\"p\":"));

    std::thread::sleep(Duration::from_millis(5));
    assert_eq!(state.store.evict_idle(Duration::ZERO), 1);
    assert!(state.store.is_empty());

    let (status, after) = call(&r, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(after["history"], before["history"]);
    assert_eq!(after["config"]["alpha_click"], 0.5);
    assert_eq!(after["dense"], before["dense"]);

    // without a journal, eviction is final
    let (plain, _) = app(64);
    let r = qir_service::router(plain.clone());
    let id = create(&r, None).await;
    std::thread::sleep(Duration::from_millis(5));
    plain.store.evict_idle(Duration::ZERO);
    let (status, _) = call(&r, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn random_event_streams_never_yield_invalid_probabilities() {
    let (_, r) = app(64);
    let docs: Vec<String> = (1..=15)
        .flat_map(|i| [format!("tiger-{i:02}"), format!("lion-{i:02}")])
        .collect();
    let words = [
        "tiger",
        "lion",
        "museums",
        "jungle stripes",
        "pride savanna",
        "liger",
        "hunting",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..6 {
        let mode = if rng.random_bool(0.5) {
            "prf"
        } else {
            "term_union"
        };
        let id = create(
            &r,
            Some(json!({"query_mode": mode, "prf_k": rng.random_range(1..6)})),
        )
        .await;
        for _ in 0..8 {
            let doc = &docs[rng.random_range(0..docs.len())];
            let event = match rng.random_range(0..5) {
                0 => query(words[rng.random_range(0..words.len())]),
                1 => click(doc),
                2 => json!({"type": "click", "doc_id": doc, "alpha": rng.random_range(0.0..=1.0)}),
                3 => json!({"type": "judgment", "doc_id": doc, "positive": rng.random_bool(0.5)}),
                _ => json!({"type": "reset"}),
            };
            let (status, d) = post_event(&r, &id, event.clone()).await;
            assert_eq!(status, StatusCode::OK, "{event}: {d}");
            assert_probability(&d["event_probability"]);
            let (_, rank) = call(&r, "GET", &format!("/sessions/{id}/rank?n=30"), None).await;
            for item in rank["results"].as_array().unwrap() {
                assert_probability(&item["probability"]);
            }
            let (_, drift) = call(&r, "GET", &format!("/sessions/{id}/drift?q=lion"), None).await;
            assert_probability(&drift["probability"]);
        }
    }
}
