//! Human-readable renderings shared by the subcommands.

use std::io::{self, Write};

use flexmind_core::engine::OpOutcome;
use flexmind_core::{NodeKind, SessionSnapshot};

/// Node counts by kind, e.g. `1 Task, 4 Category, 12 Idea`; a lone task
/// reads `1 Task, 0 others`.
pub fn kind_counts(snapshot: &SessionSnapshot) -> String {
    let counts: Vec<String> = NodeKind::ALL
        .iter()
        .map(|&kind| (kind, snapshot.graph.count_kind(kind)))
        .filter(|&(_, n)| n > 0)
        .map(|(kind, n)| format!("{n} {kind}"))
        .collect();
    if counts.len() == 1 {
        format!("{}, 0 others", counts[0])
    } else {
        counts.join(", ")
    }
}

pub fn write_summary(out: &mut dyn Write, snapshot: &SessionSnapshot) -> io::Result<()> {
    let graph = &snapshot.graph;
    writeln!(out, "      task: {}", graph.task_statement())?;
    writeln!(out, "      nodes: {}", kind_counts(snapshot))?;
    writeln!(out, "      edges: {}", graph.edge_count())?;
    let pins: Vec<String> = snapshot
        .pins
        .iter()
        .filter_map(|id| graph.node(id))
        .map(|n| format!("{:?}", n.name))
        .collect();
    writeln!(out, "      pins: [{}]", pins.join(", "))?;
    writeln!(out, "      last event: {}", snapshot.last_seq)?;
    if !snapshot.failures.is_empty() {
        writeln!(out, "      failed ops: {}", snapshot.failures.len())?;
    }
    Ok(())
}

pub fn write_delta(out: &mut dyn Write, outcome: &OpOutcome) -> io::Result<()> {
    for node in &outcome.added_nodes {
        writeln!(out, "      + {} {:?}", node.kind, node.name)?;
    }
    if let Some(answer) = &outcome.answer {
        writeln!(out, "      answer: {answer}")?;
    }
    Ok(())
}
