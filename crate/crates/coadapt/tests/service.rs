use std::sync::Arc;

use coadapt::client::{run_in_process, run_over_websocket, Faults, ScriptedClient};
use coadapt::config::{ExperimentConfig, InitScheme};
use coadapt::logfile::{load_iterates, load_log};
use coadapt::server::{persist, Server};
use coadapt::service::SessionActor;
use coadapt::wire::{ClientEnvelope, ClientMessage, ServerMessage, SessionStatus};
use coadapt_core::protocol::TrialKind;
use coadapt_core::{ClosedLoopSystem, Dims, Estimate};

fn config(dims: &str) -> Arc<ExperimentConfig> {
    let mut c = ExperimentConfig::defaults("t", dims.parse().unwrap());
    if c.dims.state_len() == 2 {
        c.init = InitScheme::Fixed {
            estimate: Estimate {
                h_hat: vec![0.65],
                m_hat: vec![0.0],
            },
        };
    }
    Arc::new(c)
}

fn assert_matches_closed_loop(actor: &SessionActor, cfg: &ExperimentConfig) {
    let sys = ClosedLoopSystem::from_config(&cfg.learner_config()).unwrap();
    let x0 = actor.history()[0].estimate.stacked();
    let want = sys.iterate(&x0, cfg.iterations).unwrap();
    assert_eq!(actor.history().len(), want.len());
    for (st, x) in actor.history().iter().zip(&want) {
        for (a, b) in st.estimate.stacked().iter().zip(x) {
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn exact_bot_session_matches_closed_loop() {
    for dims in ["1x1", "1x2", "2x1", "2x2"] {
        let cfg = config(dims);
        let mut actor = SessionActor::new(Arc::clone(&cfg), 0).unwrap();
        let mut bot = ScriptedClient::new("t");
        run_in_process(&mut actor, &mut bot);
        assert_eq!(bot.error(), None);
        let summary = bot.summary().unwrap();
        assert_eq!(summary.status, SessionStatus::Completed);
        let planned = [23, 33, 33, 53][["1x1", "1x2", "2x1", "2x2"].iter().position(|d| *d == dims).unwrap()];
        assert_eq!(summary.trials_played, planned);
        assert_eq!(summary.iterations_completed, 10);
        assert_matches_closed_loop(&actor, &cfg);
        let n = cfg.timing().sample_count();
        assert_eq!(actor.log().rows().len(), planned * n);
    }
}

#[test]
fn wrong_length_trace_is_rejected_and_replayed() {
    let cfg = config("1x1");
    let mut actor = SessionActor::new(Arc::clone(&cfg), 0).unwrap();
    let faults = Faults {
        short_trace: [1, 5].into_iter().collect(),
        tampered_cost: [7].into_iter().collect(),
        ..Default::default()
    };
    let mut bot = ScriptedClient::with_faults("t", faults);
    run_in_process(&mut actor, &mut bot);
    assert_eq!(bot.rejected(), 3);
    assert_eq!(bot.summary().unwrap().status, SessionStatus::Completed);
    assert_eq!(bot.summary().unwrap().trials_played, 23);
    assert_matches_closed_loop(&actor, &cfg);
}

#[test]
fn five_failed_checks_screen_out() {
    let cfg = config("1x1");
    let mut actor = SessionActor::new(Arc::clone(&cfg), 0).unwrap();
    let mut bot = ScriptedClient::with_faults(
        "t",
        Faults {
            failed_attention_checks: 5,
            ..Default::default()
        },
    );
    run_in_process(&mut actor, &mut bot);
    let s = bot.summary().unwrap();
    assert_eq!(s.status, SessionStatus::ScreenedOut);
    assert_eq!((s.trials_played, s.iterations_completed), (5, 0));
    let kinds = actor.log().rows().iter().filter(|r| r.trial_kind == TrialKind::AttentionCheck).count();
    assert_eq!(kinds, 5 * 600);
}

#[test]
fn four_failed_checks_then_pass() {
    let cfg = config("1x1");
    let mut actor = SessionActor::new(Arc::clone(&cfg), 0).unwrap();
    let mut bot = ScriptedClient::with_faults(
        "t",
        Faults {
            failed_attention_checks: 4,
            ..Default::default()
        },
    );
    run_in_process(&mut actor, &mut bot);
    assert_eq!(bot.summary().unwrap().status, SessionStatus::Completed);
    assert_eq!(bot.summary().unwrap().trials_played, 27);
    assert_matches_closed_loop(&actor, &cfg);
}

fn env(session: Option<&str>, seq: u64, message: ClientMessage) -> ClientEnvelope {
    ClientEnvelope {
        session_id: session.map(str::to_owned),
        seq,
        message,
    }
}

fn is_error(replies: &[coadapt::wire::ServerEnvelope]) -> bool {
    matches!(replies.last().map(|r| &r.message), Some(ServerMessage::Error { .. }))
}

#[test]
fn protocol_violations_terminate() {
    let join = || ClientMessage::Join {
        experiment_id: "t".into(),
    };
    let cases: Vec<Vec<ClientEnvelope>> = vec![
        vec![env(None, 1, join())],
        vec![env(None, 0, ClientMessage::TrialReady { trial_index: 0 })],
        vec![env(None, 0, join()), env(None, 1, ClientMessage::TrialReady { trial_index: 0 })],
        vec![
            env(None, 0, join()),
            env(Some("t-0000"), 1, ClientMessage::TrialReady { trial_index: 3 }),
        ],
        vec![env(None, 0, join()), env(Some("t-0000"), 1, join())],
        vec![env(
            None,
            0,
            ClientMessage::Join {
                experiment_id: "other".into(),
            },
        )],
    ];
    for msgs in cases {
        let mut actor = SessionActor::new(config("1x1"), 0).unwrap();
        let n = msgs.len();
        for (i, m) in msgs.into_iter().enumerate() {
            let replies = actor.handle(m);
            assert_eq!(is_error(&replies), i + 1 == n);
        }
        assert!(actor.is_finished());
        assert!(actor.termination_reason().is_some());
        assert!(is_error(&actor.handle(env(Some("t-0000"), n as u64, join()))));
    }
}

#[test]
fn interleaved_sessions_match_serial_runs() {
    let cfg = config("1x2");
    let serial: Vec<SessionActor> = (0..2)
        .map(|n| {
            let mut a = SessionActor::new(Arc::clone(&cfg), n).unwrap();
            run_in_process(&mut a, &mut ScriptedClient::new("t"));
            a
        })
        .collect();

    let mut actors: Vec<SessionActor> = (0..2).map(|n| SessionActor::new(Arc::clone(&cfg), n).unwrap()).collect();
    let mut bots = [ScriptedClient::new("t"), ScriptedClient::new("t")];
    let mut outboxes: Vec<Vec<ClientEnvelope>> = bots.iter_mut().map(|b| vec![b.join()]).collect();
    let mut turn = 0u64;
    while outboxes.iter().any(|o| !o.is_empty()) {
        // alternate unevenly so the two sessions drift apart
        turn = turn.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let i = if outboxes[0].is_empty() {
            1
        } else if outboxes[1].is_empty() {
            0
        } else {
            (turn >> 63) as usize
        };
        let msg = outboxes[i].pop().unwrap();
        for reply in actors[i].handle(msg) {
            if let Some(next) = bots[i].on_message(reply) {
                outboxes[i].push(next);
            }
        }
    }
    for (a, b) in actors.iter().zip(&serial) {
        assert!(a.log() == b.log(), "logs differ for {}", a.id());
        assert_eq!(a.history(), b.history());
    }
    assert!(actors[0].log() != actors[1].log());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn websocket_sessions_run_concurrently_and_persist() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("1x1");
    let server = Server::new((*cfg).clone(), Some(dir.path().to_owned())).unwrap();
    let listener = Server::bind("127.0.0.1:0").await.unwrap();
    let url = format!("ws://{}", listener.local_addr().unwrap());
    let handle = tokio::spawn(server.run(listener));

    let runs = (0..2).map(|_| {
        let url = url.clone();
        tokio::spawn(async move {
            let mut bot = ScriptedClient::new("t");
            run_over_websocket(&url, &mut bot).await.unwrap();
            bot
        })
    });
    let bots: Vec<ScriptedClient> = futures_util::future::join_all(runs)
        .await
        .into_iter()
        .map(Result::unwrap)
        .collect();
    for bot in &bots {
        assert_eq!(bot.summary().unwrap().status, SessionStatus::Completed);
    }

    // the server persists after closing; wait for both files
    let sys = ClosedLoopSystem::from_config(&cfg.learner_config()).unwrap();
    let want = sys.iterate(&[0.65, 0.0], 10).unwrap();
    for id in ["t-0000", "t-0001"] {
        let path = dir.path().join(format!("{id}_iterates.csv"));
        for _ in 0..200 {
            if path.exists() && load_iterates(&path).is_ok_and(|(_, t)| t.len() == 11) {
                break;
            }
            tokio::time::sleep(std::time::Duration::from_millis(10)).await;
        }
        let (dims, iterates) = load_iterates(&path).unwrap();
        assert_eq!(dims, Dims::new(1, 1).unwrap());
        for (e, x) in iterates.iter().zip(&want) {
            for (a, b) in e.stacked().iter().zip(x) {
                assert!((a - b).abs() <= 1e-9);
            }
        }
        let log = load_log(&dir.path().join(format!("{id}.csv"))).unwrap();
        assert_eq!(log.rows().len(), 23 * 600);
    }
    handle.abort();
}

#[test]
fn persisted_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut actor = SessionActor::new(config("2x1"), 3).unwrap();
    run_in_process(&mut actor, &mut ScriptedClient::new("t"));
    persist(&actor, dir.path()).unwrap();
    assert_eq!(&load_log(&dir.path().join("t-0003.csv")).unwrap(), actor.log());
    let (_, iterates) = load_iterates(&dir.path().join("t-0003_iterates.csv")).unwrap();
    let want: Vec<Estimate> = actor.history().iter().map(|s| s.estimate.clone()).collect();
    assert_eq!(iterates, want);
}
