//! Actor-behavior classification of consecutive intra-case event pairs.
//!
//! For two consecutive events `e_i → e_j` of the same case, with actors
//! `r_i` and `r_j`:
//!
//! | actors        | actor of interest performed another case's event in `(t_i, t_j)` | type |
//! |---------------|-----------------------|------|
//! | `r_i == r_j`  | no (`r_i`)            | Continuation |
//! | `r_i == r_j`  | yes (`r_i`)           | Interruption |
//! | `r_i != r_j`  | no (`r_j`)            | Handover idle |
//! | `r_i != r_j`  | yes (`r_j`)           | Handover busy |
//!
//! The interval is open: events exactly at `t_i` or `t_j` never count.
//! Witness lookups go through an [`ActorIndex`], one binary search per query.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event_log::{format_timestamp, parse_timestamp, Event, EventLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BehaviorType {
    #[serde(alias = "C")]
    Continuation,
    #[serde(alias = "I")]
    Interruption,
    #[serde(alias = "HI")]
    HandoverIdle,
    #[serde(alias = "HB")]
    HandoverBusy,
}

impl BehaviorType {
    pub const ALL: [BehaviorType; 4] = [
        BehaviorType::Continuation,
        BehaviorType::Interruption,
        BehaviorType::HandoverIdle,
        BehaviorType::HandoverBusy,
    ];

    /// Short label used in series names and artifacts.
    pub fn code(self) -> &'static str {
        match self {
            BehaviorType::Continuation => "C",
            BehaviorType::Interruption => "I",
            BehaviorType::HandoverIdle => "HI",
            BehaviorType::HandoverBusy => "HB",
        }
    }

    pub fn is_handover(self) -> bool {
        matches!(self, BehaviorType::HandoverIdle | BehaviorType::HandoverBusy)
    }
}

impl fmt::Display for BehaviorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown behavior code '{0}' (expected C, I, HI or HB)")]
pub struct UnknownBehavior(pub String);

impl FromStr for BehaviorType {
    type Err = UnknownBehavior;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BehaviorType::ALL
            .into_iter()
            .find(|b| b.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownBehavior(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy)]
struct IndexedEvent {
    timestamp: DateTime<Utc>,
    position: usize,
    case: u32,
}

/// Per-actor event lists in canonical log order.
#[derive(Debug, Clone, Default)]
pub struct ActorIndex {
    actors: HashMap<String, Vec<IndexedEvent>>,
    case_ids: HashMap<String, u32>,
}

impl ActorIndex {
    /// Indexes every event with a defined actor. The log must already be in
    /// canonical order (see [`crate::event_log::validate_and_sort`]).
    pub fn build(log: &EventLog) -> Self {
        let mut index = ActorIndex::default();
        for (position, e) in log.events().iter().enumerate() {
            let next = index.case_ids.len() as u32;
            let case = *index.case_ids.entry(e.case_id.clone()).or_insert(next);
            if let Some(actor) = &e.actor {
                index.actors.entry(actor.clone()).or_default().push(IndexedEvent {
                    timestamp: e.timestamp,
                    position,
                    case,
                });
            }
        }
        index
    }

    pub fn actor_count(&self) -> usize {
        self.actors.len()
    }

    /// Number of indexed events for `actor`.
    pub fn events_of(&self, actor: &str) -> usize {
        self.actors.get(actor).map_or(0, Vec::len)
    }

    pub fn indexed_events(&self) -> usize {
        self.actors.values().map(Vec::len).sum()
    }

    /// Log positions of `actor`'s events, in order.
    pub fn positions_of(&self, actor: &str) -> Vec<usize> {
        self.actors
            .get(actor)
            .map(|v| v.iter().map(|e| e.position).collect())
            .unwrap_or_default()
    }

    /// Whether `actor` performed an event with `lo < t < hi` that does not
    /// belong to `exclude_case`.
    pub fn exists_between(
        &self,
        actor: &str,
        lo: DateTime<Utc>,
        hi: DateTime<Utc>,
        exclude_case: &str,
    ) -> bool {
        if lo >= hi {
            return false;
        }
        let Some(list) = self.actors.get(actor) else {
            return false;
        };
        let excluded = self.case_ids.get(exclude_case).copied();
        let start = list.partition_point(|e| e.timestamp <= lo);
        let end = list.partition_point(|e| e.timestamp < hi);
        list[start..end.max(start)]
            .iter()
            .any(|e| Some(e.case) != excluded)
    }
}

/// Classifies the pair `first → second` of one case. Returns `None` when
/// either actor is missing.
pub fn classify_transition(first: &Event, second: &Event, index: &ActorIndex) -> Option<BehaviorType> {
    let (from, to) = (first.actor.as_deref()?, second.actor.as_deref()?);
    let same = from == to;
    let witness = index.exists_between(to, first.timestamp, second.timestamp, &first.case_id);
    Some(match (same, witness) {
        (true, false) => BehaviorType::Continuation,
        (true, true) => BehaviorType::Interruption,
        (false, false) => BehaviorType::HandoverIdle,
        (false, true) => BehaviorType::HandoverBusy,
    })
}

/// A classified consecutive pair of events of one case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub case_id: String,
    /// Position of the first event in the sorted log.
    pub from_event: usize,
    /// Position of the second event in the sorted log.
    pub to_event: usize,
    pub from_actor: String,
    pub to_actor: String,
    pub behavior: BehaviorType,
    pub from_timestamp: DateTime<Utc>,
    /// Timestamp of the receiving event; transitions are bucketed by its day.
    pub to_timestamp: DateTime<Utc>,
    /// Activity of the receiving event.
    pub to_activity: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Classification {
    /// Ordered by `to_event`.
    pub transitions: Vec<Transition>,
    /// Consecutive pairs skipped because an actor was missing.
    pub skipped: usize,
}

impl Classification {
    pub fn count(&self, behavior: BehaviorType) -> usize {
        self.transitions.iter().filter(|t| t.behavior == behavior).count()
    }
}

/// Classifies every consecutive same-case pair of a canonically ordered log.
pub fn classify_log(log: &EventLog, index: &ActorIndex) -> Classification {
    let events = log.events();
    let pairs: Vec<(usize, usize)> = log
        .traces()
        .iter()
        .flat_map(|t| t.positions.windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>())
        .collect();

    let mut classified: Vec<Option<Transition>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (a, b) = (&events[i], &events[j]);
            let behavior = classify_transition(a, b, index)?;
            Some(Transition {
                case_id: a.case_id.clone(),
                from_event: i,
                to_event: j,
                from_actor: a.actor.clone().unwrap_or_default(),
                to_actor: b.actor.clone().unwrap_or_default(),
                behavior,
                from_timestamp: a.timestamp,
                to_timestamp: b.timestamp,
                to_activity: b.activity.clone(),
            })
        })
        .collect();
    let skipped = classified.iter().filter(|t| t.is_none()).count();
    let mut transitions: Vec<Transition> = classified.drain(..).flatten().collect();
    transitions.sort_by_key(|t| t.to_event);
    Classification {
        transitions,
        skipped,
    }
}

// ---------------------------------------------------------------------------
// transitions dump

#[derive(Debug, Error)]
pub enum TransitionsIoError {
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Invalid { row: usize, message: String },
}

#[derive(Serialize, Deserialize)]
struct TransitionRow {
    case_id: String,
    from_ts: String,
    to_ts: String,
    from_actor: String,
    to_actor: String,
    behavior: String,
    to_activity: String,
    from_event: usize,
    to_event: usize,
}

/// Columns: `case_id, from_ts, to_ts, from_actor, to_actor, behavior`, then
/// `to_activity, from_event, to_event` so the file can be read back losslessly.
pub fn write_transitions_csv<W: Write>(transitions: &[Transition], sink: W) -> Result<(), TransitionsIoError> {
    let mut w = csv::Writer::from_writer(sink);
    for t in transitions {
        w.serialize(TransitionRow {
            case_id: t.case_id.clone(),
            from_ts: format_timestamp(&t.from_timestamp),
            to_ts: format_timestamp(&t.to_timestamp),
            from_actor: t.from_actor.clone(),
            to_actor: t.to_actor.clone(),
            behavior: t.behavior.code().to_string(),
            to_activity: t.to_activity.clone(),
            from_event: t.from_event,
            to_event: t.to_event,
        })?;
    }
    if transitions.is_empty() {
        w.write_record([
            "case_id", "from_ts", "to_ts", "from_actor", "to_actor", "behavior", "to_activity",
            "from_event", "to_event",
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_transitions_csv<R: Read>(source: R) -> Result<Vec<Transition>, TransitionsIoError> {
    let mut r = csv::Reader::from_reader(source);
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<TransitionRow>().enumerate() {
        let row = row?;
        let line = i + 2;
        let ts = |s: &str| {
            parse_timestamp(s, None).ok_or_else(|| TransitionsIoError::Invalid {
                row: line,
                message: format!("bad timestamp '{s}'"),
            })
        };
        out.push(Transition {
            behavior: row.behavior.parse().map_err(|e: UnknownBehavior| TransitionsIoError::Invalid {
                row: line,
                message: e.to_string(),
            })?,
            from_timestamp: ts(&row.from_ts)?,
            to_timestamp: ts(&row.to_ts)?,
            case_id: row.case_id,
            from_event: row.from_event,
            to_event: row.to_event,
            from_actor: row.from_actor,
            to_actor: row.to_actor,
            to_activity: row.to_activity,
        });
    }
    Ok(out)
}
