//! Machine-readable event stream emitted by runs.
//!
//! Every evaluation and every elimination decision becomes one event, so a
//! run's CPU ledger can be recomputed independently from its trace and its
//! course replayed for debugging. Serialized as JSON lines by the CLI.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::oracle::GroupOutcome;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    /// One capped group evaluation on one instance.
    GroupEval {
        epoch: usize,
        round: usize,
        partition: usize,
        instance: usize,
        participants: Vec<usize>,
        winner: Option<usize>,
        winner_runtime: Option<f64>,
        cpu_charge: f64,
    },
    /// One elimination decision after a block of evaluations.
    Elimination {
        epoch: usize,
        round: usize,
        partition: usize,
        kept: Vec<usize>,
        dropped: Vec<usize>,
    },
    /// One uncapped single evaluation (Hyperband-style baselines).
    SingleEval {
        bracket: usize,
        round: usize,
        config: usize,
        instance: usize,
        runtime: f64,
        finished: bool,
    },
}

impl TraceEvent {
    /// CPU seconds this event charged, zero for non-evaluation events.
    pub fn cpu_charge(&self) -> f64 {
        match self {
            TraceEvent::GroupEval { cpu_charge, .. } => *cpu_charge,
            TraceEvent::SingleEval { runtime, .. } => *runtime,
            TraceEvent::Elimination { .. } => 0.0,
        }
    }
}

/// Ordered event log for one run; `epoch` scopes subsequent events.
#[derive(Debug, Default)]
pub struct TraceLog {
    events: Vec<TraceEvent>,
    epoch: usize,
}

impl TraceLog {
    pub fn new() -> Self {
        TraceLog::default()
    }

    pub fn set_epoch(&mut self, epoch: usize) {
        self.epoch = epoch;
    }

    pub fn group_eval(&mut self, round: usize, partition: usize, outcome: &GroupOutcome) {
        self.events.push(TraceEvent::GroupEval {
            epoch: self.epoch,
            round,
            partition,
            instance: outcome.instance.0,
            participants: outcome.participants.iter().map(|c| c.0).collect(),
            winner: outcome.winner.map(|c| c.0),
            winner_runtime: outcome.winner_runtime,
            cpu_charge: outcome.cpu_charge,
        });
    }

    pub fn elimination(&mut self, round: usize, partition: usize, kept: &[usize], dropped: &[usize]) {
        self.events.push(TraceEvent::Elimination {
            epoch: self.epoch,
            round,
            partition,
            kept: kept.to_vec(),
            dropped: dropped.to_vec(),
        });
    }

    pub fn single_eval(
        &mut self,
        bracket: usize,
        round: usize,
        config: usize,
        instance: usize,
        runtime: f64,
        finished: bool,
    ) {
        self.events.push(TraceEvent::SingleEval {
            bracket,
            round,
            config,
            instance,
            runtime,
            finished,
        });
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<TraceEvent> {
        self.events
    }
}

/// Sum of charges over `events` in order; must reproduce the ledger total.
pub fn recompute_cpu_total(events: &[TraceEvent]) -> f64 {
    let mut total = 0.0;
    for e in events {
        total += e.cpu_charge();
    }
    total
}

/// Write one JSON object per event.
pub fn write_jsonl<W: Write>(events: &[TraceEvent], mut out: W) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
