use std::collections::BTreeSet;

use vat_core::dataset::{Condition, Direction, Intervention};
use vat_core::evidence::Polarity;
use vat_core::{RunManifest, Taxonomy};
use vat_elicit::runner::prompts_for;
use vat_elicit::{
    run_elicitation, ElicitError, ElicitItem, EndpointConfig, Exemplar, HttpClient, MockConfig, MockServer, RunOptions,
    SteeringSpec,
};

fn items(n: usize) -> Vec<ElicitItem> {
    let t = Taxonomy::default_schwartz();
    (0..n)
        .map(|i| ElicitItem {
            scene_id: format!("scene-{:03}", i / 2),
            action_id: format!("a{}", i % 2),
            micro_value: t.micro_values()[i % t.micro_values().len()].id.clone(),
            polarity: if i % 3 == 0 { Polarity::Violate } else { Polarity::Support },
            scene: format!("Situation number {i} at a community meeting."),
            action: format!("Option {i}: speak up."),
            claim: None,
            country: None,
            topic: None,
        })
        .collect()
}

fn manifest(condition: Condition) -> RunManifest {
    let post = condition == Condition::Post;
    RunManifest {
        run_id: if post { "mock-post" } else { "mock-pre" }.into(),
        model: "mock".into(),
        intervention: if post { Intervention::PromptSteer } else { Intervention::None },
        shots: if post { 2 } else { 0 },
        target_value: Some("security".into()),
        direction: Direction::Reinforce,
        condition,
    }
}

fn steering() -> SteeringSpec {
    SteeringSpec {
        target_value: "security".into(),
        direction: Direction::Reinforce,
        shots: 2,
        exemplars: (0..4)
            .map(|i| Exemplar {
                scene: format!("Exemplar scene {i}"),
                action: format!("Exemplar action {i}"),
                judgment: "5".into(),
            })
            .collect(),
    }
}

fn endpoint(server: &MockServer) -> EndpointConfig {
    EndpointConfig {
        max_concurrent: 3,
        backoff_base_ms: 1,
        backoff_max_ms: 5,
        timeout_secs: 10.0,
        ..EndpointConfig::new(server.base_url(), "mock-model")
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn fixed_reply_fills_every_item() {
    let server = MockServer::start_local(MockConfig {
        fixed_reply: Some("3".into()),
        ..Default::default()
    })
    .await
    .unwrap();
    let cfg = endpoint(&server);
    let client = HttpClient::with_token(&cfg, None).unwrap();
    let t = Taxonomy::default_schwartz();
    let out = run_elicitation(&items(10), &t, &client, &cfg, None, manifest(Condition::Pre), &RunOptions::default())
        .await
        .unwrap();
    assert_eq!(out.table.len(), 10);
    assert!(out.table.entries().all(|(_, j)| j.likert.get() == 3));
    assert!(out.stats.failures.is_empty());
    server.stop().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn pre_and_post_share_keys_and_probe_bodies() {
    let server = MockServer::start_local(MockConfig {
        prose: true,
        delay_ms: 5,
        ..Default::default()
    })
    .await
    .unwrap();
    let cfg = endpoint(&server);
    let client = HttpClient::with_token(&cfg, None).unwrap();
    let t = Taxonomy::default_schwartz();
    let data = items(24);
    let s = steering();
    let pre = run_elicitation(&data, &t, &client, &cfg, None, manifest(Condition::Pre), &RunOptions::default())
        .await
        .unwrap();
    let post = run_elicitation(&data, &t, &client, &cfg, Some(&s), manifest(Condition::Post), &RunOptions::default())
        .await
        .unwrap();
    let pre_keys: BTreeSet<_> = pre.table.keys().cloned().collect();
    let post_keys: BTreeSet<_> = post.table.keys().cloned().collect();
    assert_eq!(pre_keys.len(), 24);
    assert_eq!(pre_keys, post_keys);

    let plain = prompts_for(&data, &t, None).unwrap();
    let steered = prompts_for(&data, &t, Some(&s)).unwrap();
    for (a, b) in plain.iter().zip(&steered) {
        assert_eq!(a.body, b.body);
        assert!(a.prefix.is_empty() && !b.prefix.is_empty());
    }
    assert!(server.stats().max_in_flight() <= cfg.max_concurrent);
    server.stop().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn transient_failures_are_retried() {
    let server = MockServer::start_local(MockConfig {
        fail_first: 2,
        ..Default::default()
    })
    .await
    .unwrap();
    let cfg = endpoint(&server);
    let client = HttpClient::with_token(&cfg, None).unwrap();
    let t = Taxonomy::default_schwartz();
    let out = run_elicitation(&items(4), &t, &client, &cfg, None, manifest(Condition::Pre), &RunOptions::default())
        .await
        .unwrap();
    assert_eq!(out.table.len(), 4);
    assert_eq!(out.stats.retries, 8);
    assert!(out.prompts.iter().all(|p| p.attempts == 3));
    assert_eq!(server.stats().injected_failures(), 8);
    server.stop().await.unwrap();

    // retries exhausted: per-item failures, not a fatal error
    let server = MockServer::start_local(MockConfig {
        fail_first: 5,
        ..Default::default()
    })
    .await
    .unwrap();
    let cfg = EndpointConfig {
        max_retries: 1,
        ..endpoint(&server)
    };
    let client = HttpClient::with_token(&cfg, None).unwrap();
    let out = run_elicitation(&items(3), &t, &client, &cfg, None, manifest(Condition::Pre), &RunOptions::default())
        .await
        .unwrap();
    assert_eq!(out.table.len(), 0);
    assert_eq!(out.stats.failures.len(), 3);
    assert!(out.stats.failures.iter().all(|f| f.attempts == 2));
    server.stop().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn garbage_reply_drops_one_item() {
    let data = items(10);
    let server = MockServer::start_local(MockConfig {
        garbage_markers: vec!["Situation number 7 ".into()],
        ..Default::default()
    })
    .await
    .unwrap();
    let cfg = endpoint(&server);
    let client = HttpClient::with_token(&cfg, None).unwrap();
    let t = Taxonomy::default_schwartz();
    let out = run_elicitation(&data, &t, &client, &cfg, None, manifest(Condition::Pre), &RunOptions::default())
        .await
        .unwrap();
    assert_eq!(out.table.len(), 9);
    assert_eq!(out.stats.failures.len(), 1);
    assert_eq!(out.stats.failures[0].index, 7);
    // one original ask plus one strict re-ask
    assert_eq!(out.stats.failures[0].attempts, 2);
    assert_eq!(server.stats().requests(), 11);
    server.stop().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn auth_failure_is_fatal() {
    let server = MockServer::start_local(MockConfig {
        required_token: Some("let-me-in".into()),
        ..Default::default()
    })
    .await
    .unwrap();
    let cfg = endpoint(&server);
    let t = Taxonomy::default_schwartz();
    let client = HttpClient::with_token(&cfg, None).unwrap();
    let err = run_elicitation(&items(3), &t, &client, &cfg, None, manifest(Condition::Pre), &RunOptions::default())
        .await
        .unwrap_err();
    assert!(matches!(err, ElicitError::Auth { status: 401 }));
    assert!(err.is_upstream());

    let client = HttpClient::with_token(&cfg, Some(vat_elicit::config::Secret::new("let-me-in"))).unwrap();
    let out = run_elicitation(&items(3), &t, &client, &cfg, None, manifest(Condition::Pre), &RunOptions::default())
        .await
        .unwrap();
    assert_eq!(out.table.len(), 3);
    server.stop().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn unreachable_endpoint_is_fatal() {
    // bind then release a port so nothing listens there
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let cfg = EndpointConfig {
        max_retries: 1,
        backoff_base_ms: 1,
        ..EndpointConfig::new(format!("http://127.0.0.1:{port}/v1"), "m")
    };
    let client = HttpClient::with_token(&cfg, None).unwrap();
    let t = Taxonomy::default_schwartz();
    let err = run_elicitation(&items(2), &t, &client, &cfg, None, manifest(Condition::Pre), &RunOptions::default())
        .await
        .unwrap_err();
    assert!(matches!(err, ElicitError::Unreachable { attempts: 2, .. }), "{err}");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn checkpoint_resume_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let t = Taxonomy::default_schwartz();
    let data = items(20);

    let server = MockServer::start_local(MockConfig::default()).await.unwrap();
    let cfg = endpoint(&server);
    let client = HttpClient::with_token(&cfg, None).unwrap();
    let full = run_elicitation(&data, &t, &client, &cfg, None, manifest(Condition::Pre), &RunOptions::default())
        .await
        .unwrap();

    // first pass only gets through part of the data set
    let ckpt = dir.path().join("pre.ckpt.jsonl");
    let opts = RunOptions {
        checkpoint: Some(ckpt.clone()),
    };
    let partial = run_elicitation(&data[..8], &t, &client, &cfg, None, manifest(Condition::Pre), &opts)
        .await
        .unwrap();
    assert_eq!(partial.table.len(), 8);
    // simulate a torn write at the moment of interruption
    std::fs::OpenOptions::new()
        .append(true)
        .open(&ckpt)
        .and_then(|mut f| std::io::Write::write_all(&mut f, b"{\"run_id\":\"mock-pre\",\"sce"))
        .unwrap();

    let before = server.stats().requests();
    let resumed = run_elicitation(&data, &t, &client, &cfg, None, manifest(Condition::Pre), &opts)
        .await
        .unwrap();
    assert_eq!(server.stats().requests() - before, 12);
    assert_eq!(resumed.stats.resumed, 8);
    assert_eq!(resumed.table, full.table);
    // every record made it into the checkpoint despite the torn line
    let text = std::fs::read_to_string(&ckpt).unwrap();
    let valid = text
        .lines()
        .filter(|l| serde_json::from_str::<vat_core::JudgmentRecord>(l).is_ok())
        .count();
    assert_eq!(valid, 20);

    // a checkpoint from another run is refused
    let err = run_elicitation(&data, &t, &client, &cfg, None, manifest(Condition::Post), &opts)
        .await
        .unwrap_err();
    assert!(matches!(err, ElicitError::Checkpoint { .. }));
    server.stop().await.unwrap();
}
