use std::path::PathBuf;

use flexmind_core::engine::{self, ErrorCode};
use flexmind_core::store::{replay, EventStore};
use flexmind_core::{MockProvider, NodeId, NodeKind, OpKind, OrchestratorConfig, Provenance, SessionLog};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/mock")
}

fn named(log: &SessionLog, name: &str) -> NodeId {
    let found = log.snapshot().graph.find_by_name(name);
    assert_eq!(found.len(), 1, "{name} should name exactly one node");
    found[0].id
}

fn counts(log: &SessionLog) -> Vec<(NodeKind, usize)> {
    let graph = &log.snapshot().graph;
    NodeKind::ALL.iter().map(|&k| (k, graph.count_kind(k))).collect()
}

#[test]
fn laundry_walkthrough() {
    let dir = tempfile::tempdir().unwrap();
    let store = EventStore::open(dir.path()).unwrap();
    let provider = MockProvider::from_dir(fixtures());
    let config = OrchestratorConfig::default();
    let mut log = store.create_session("cleaning laundry with less water").unwrap();
    let root = log.snapshot().graph.root_id();

    let init = engine::run_op(&mut log, &provider, &config, OpKind::InitializeSpace, root, None, None).unwrap();
    assert_eq!((init.added_nodes.len(), init.added_edges.len()), (16, 16));
    assert!(init.added_nodes.iter().all(|n| n.provenance == Provenance::System));

    let lemon = named(&log, "lemon spray");
    let similar = engine::run_op(&mut log, &provider, &config, OpKind::FindSimilar, lemon, None, None).unwrap();
    assert_eq!((similar.added_nodes.len(), similar.added_edges.len()), (11, 13));
    // The existing category absorbed two new ideas instead of being duplicated.
    let deodorizers = log.snapshot().graph.find_category("chemical   DEODORIZERS").unwrap().id;
    assert_eq!(
        log.snapshot()
            .graph
            .children(deodorizers, flexmind_core::EdgeKind::Contains)
            .count(),
        5
    );
    assert!(log
        .snapshot()
        .graph
        .find_category("Natural Acidic Boost Appear")
        .is_some());

    let applicator = named(&log, "Pen-Style Concentrate Applicator");
    engine::pin(&mut log, applicator).unwrap();

    let answer = engine::run_op(
        &mut log,
        &provider,
        &config,
        OpKind::AnswerQuestion,
        applicator,
        Some("How does the applicator work?"),
        None,
    )
    .unwrap();
    assert!(answer.answer.unwrap().contains("concentrated cleaner"));

    let risks = engine::run_op(&mut log, &provider, &config, OpKind::DiagnoseRisks, lemon, None, None).unwrap();
    assert_eq!(risks.added_nodes.len(), 3);
    let limited = named(&log, "limited cleaning");
    let mitigations = engine::run_op(&mut log, &provider, &config, OpKind::MitigateRisk, limited, None, None).unwrap();
    assert_eq!(mitigations.added_nodes.len(), 2);

    let mine = engine::add_user_node(
        &mut log,
        limited,
        NodeKind::Mitigation,
        "a hydrogen peroxide and lemon mix spray",
        "",
    )
    .unwrap();
    engine::pin(&mut log, mine.id).unwrap();

    use NodeKind::*;
    assert_eq!(
        counts(&log),
        [
            (Task, 1),
            (Category, 6),
            (Idea, 19),
            (Attribute, 2),
            (Risk, 3),
            (Mitigation, 3),
            (Question, 1),
            (Answer, 1)
        ]
    );
    let snapshot = log.snapshot();
    assert_eq!(snapshot.graph.edges().count(), 37);
    assert_eq!(snapshot.pins.iter().collect::<Vec<_>>(), [applicator, mine.id]);
    assert_eq!(snapshot.last_seq, 8);
    assert!(snapshot.graph.check_invariants().is_empty());

    let kinds: Vec<&str> = log.events().iter().map(|e| e.payload.kind()).collect();
    assert_eq!(
        kinds,
        [
            "SessionCreated",
            "GenerationCompleted",
            "GenerationCompleted",
            "NodePinned",
            "GenerationCompleted",
            "GenerationCompleted",
            "GenerationCompleted",
            "UserNodeAdded",
            "NodePinned",
        ]
    );

    // The file on disk replays to the same state.
    let reread = store.load(log.id()).unwrap();
    assert_eq!(&reread, snapshot);
    assert_eq!(&replay(log.events()).unwrap(), snapshot);

    // The collection lists both pins with their path from the task.
    let collection = engine::collection(snapshot);
    assert_eq!(collection.len(), 2);
    assert_eq!(
        collection[0].path,
        [
            "cleaning laundry with less water",
            "Targeted Stain Treatment",
            "Pen-Style Concentrate Applicator"
        ]
    );
    assert_eq!(
        collection[1].path,
        [
            "cleaning laundry with less water",
            "Chemical Deodorizers",
            "Lemon Spray",
            "Limited Cleaning",
            "a hydrogen peroxide and lemon mix spray"
        ]
    );
}

#[test]
fn missing_fixture_is_unavailable_and_logged() {
    let provider = MockProvider::from_dir(fixtures());
    let mut log = SessionLog::in_memory("an unseeded task").unwrap();
    let root = log.snapshot().graph.root_id();
    let err = engine::run_op(
        &mut log,
        &provider,
        &OrchestratorConfig::default(),
        OpKind::InitializeSpace,
        root,
        None,
        None,
    )
    .unwrap_err();
    assert_eq!(err.code, ErrorCode::ProviderUnavailable);
    assert_eq!(log.events().last().unwrap().payload.kind(), "GenerationFailed");
    assert_eq!(log.snapshot().graph.nodes().count(), 1);
}
