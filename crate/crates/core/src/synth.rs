//! Synthetic event logs and VAR panels with known causal structure.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use chrono::{DateTime, Duration, TimeZone, Utc};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::BehaviorType;
use crate::event_log::{validate_and_sort, Event, EventLog};
use crate::scalar::Scalar;
use crate::timeseries::{DailySeries, Panel, Role};

const SECONDS_PER_DAY: f64 = 86_400.0;
/// Mean number of events per case.
pub const MEAN_CASE_LENGTH: f64 = 6.0;
/// Mean gap between consecutive events of a case, in days.
pub const MEAN_GAP_DAYS: f64 = 0.2;
pub const VAR_BURN_IN: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    Config(String),
    #[error("VAR coefficients are not stable (companion spectral radius {spectral_radius:.4} >= 1)")]
    Unstable { spectral_radius: f64 },
}

pub fn synth_epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffect {
    pub behavior: BehaviorType,
    pub lag: usize,
    /// Days added to a case's duration per planted-behavior transition
    /// observed `lag` days before the case starts.
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthLogConfig {
    pub n_cases: usize,
    pub n_actors: usize,
    pub n_activities: usize,
    pub days: usize,
    pub handover_rate: f64,
    pub interruption_rate: f64,
    pub planted: Option<PlantedEffect>,
    /// When set, each case gets an `outcome` attribute that is `true` with
    /// this probability.
    pub outcome_rate: Option<f64>,
    pub seed: u64,
}

impl Default for SynthLogConfig {
    fn default() -> Self {
        Self {
            n_cases: 3650,
            n_actors: 10,
            n_activities: 8,
            days: 365,
            handover_rate: 0.5,
            interruption_rate: 0.2,
            planted: None,
            outcome_rate: None,
            seed: 0,
        }
    }
}

impl SynthLogConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        for (name, p) in [("handover_rate", self.handover_rate), ("interruption_rate", self.interruption_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if let Some(p) = self.outcome_rate {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("outcome_rate = {p} is not a probability"));
            }
        }
        if self.n_cases == 0 || self.n_actors == 0 || self.n_activities == 0 || self.days == 0 {
            return bad("n_cases, n_actors, n_activities and days must be positive".into());
        }
        if self.n_actors == 1 && self.handover_rate > 0.0 {
            return bad("a handover needs at least two actors".into());
        }
        if let Some(p) = &self.planted {
            if p.lag == 0 || p.lag >= self.days {
                return bad(format!("planted lag {} must be in 1..{}", p.lag, self.days));
            }
            if !p.beta.is_finite() || p.beta < 0.0 {
                return bad(format!("planted beta {} must be finite and non-negative", p.beta));
            }
        }
        Ok(())
    }
}


struct CaseState {
    activities: Vec<usize>,
    gaps: Vec<i64>,
    next: usize,
    prev_actor: usize,
    next_actor: usize,
    last_time: i64,
    /// Planted stretch added to the last gap; the actor is not held for it.
    extra: i64,
}

/// Per actor: (time, case) of every emitted event, in time order.
fn busy_between(events: &[(i64, usize)], lo: i64, hi: i64, case: usize) -> bool {
    let start = events.partition_point(|&(t, _)| t <= lo);
    events[start..].iter().take_while(|&&(t, _)| t < hi).any(|&(_, c)| c != case)
}

fn day_of(seconds: i64) -> usize {
    (seconds.max(0) as f64 / SECONDS_PER_DAY).floor() as usize
}

/// Generates a log by simulating cases over a shared pool of actors.
///
/// Cases arrive uniformly over the horizon. Each has `1 + Geometric` events
/// (mean six) separated by exponential gaps (mean 0.2 days). At each step the
/// next actor differs from the current one with probability
/// `handover_rate`. A same-actor step holds the actor exclusively (a
/// continuation) unless drawn as an interruption, with probability
/// `interruption_rate`, which leaves the actor free for other cases. Work
/// reaching a held actor waits until the hold ends.
///
/// With a planted effect, the last gap of a case starting on day `d` is
/// stretched by `beta` days per planted-behavior transition ending on day
/// `d − lag`.
pub fn generate_log(config: &SynthLogConfig) -> Result<EventLog, SynthError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let length_dist = Geometric::new(1.0 / MEAN_CASE_LENGTH).expect("valid geometric");
    let gap_dist = Exp::new(1.0 / (MEAN_GAP_DAYS * SECONDS_PER_DAY)).expect("valid exponential");

    let mut arrivals: Vec<i64> = (0..config.n_cases)
        .map(|_| {
            let day = rng.gen_range(0..config.days) as i64;
            day * SECONDS_PER_DAY as i64 + rng.gen_range(0..SECONDS_PER_DAY as i64)
        })
        .collect();
    arrivals.sort_unstable();

    let mut cases: Vec<CaseState> = arrivals
        .iter()
        .map(|_| {
            let len = 1 + length_dist.sample(&mut rng) as usize;
            let activities = (0..len).map(|_| rng.gen_range(0..config.n_activities)).collect();
            let gaps = (1..len)
                .map(|_| (gap_dist.sample(&mut rng) as i64).max(1))
                .collect();
            let actor = rng.gen_range(0..config.n_actors);
            CaseState {
                activities,
                gaps,
                next: 0,
                prev_actor: actor,
                next_actor: actor,
                last_time: 0,
                extra: 0,
            }
        })
        .collect();

    let mut queue: BinaryHeap<Reverse<(i64, u64, usize)>> = BinaryHeap::new();
    let mut seq = 0u64;
    for (case, &t) in arrivals.iter().enumerate() {
        queue.push(Reverse((t, seq, case)));
        seq += 1;
    }

    let mut actor_events: Vec<Vec<(i64, usize)>> = vec![Vec::new(); config.n_actors];
    let mut holds: Vec<Option<(usize, i64)>> = vec![None; config.n_actors];
    let mut daily_planted: Vec<usize> = Vec::new();
    let mut events: Vec<Event> = Vec::new();

    while let Some(Reverse((time, _, case))) = queue.pop() {
        let actor = cases[case].next_actor;
        if let Some(&(last, _)) = actor_events[actor].last() {
            if last >= time {
                queue.push(Reverse((last + 1, seq, case)));
                seq += 1;
                continue;
            }
        }
        match holds[actor] {
            Some((holder, until)) if holder != case && time <= until => {
                queue.push(Reverse((until + 1, seq, case)));
                seq += 1;
                continue;
            }
            Some((holder, _)) if holder == case => holds[actor] = None,
            _ => {}
        }

        let state = &mut cases[case];
        let index = state.next;
        if index > 0 {
            if let Some(p) = config.planted {
                let busy = busy_between(&actor_events[actor], state.last_time, time, case);
                let behavior = match (state.prev_actor == actor, busy) {
                    (true, false) => BehaviorType::Continuation,
                    (true, true) => BehaviorType::Interruption,
                    (false, false) => BehaviorType::HandoverIdle,
                    (false, true) => BehaviorType::HandoverBusy,
                };
                if behavior == p.behavior {
                    let day = day_of(time);
                    if day >= daily_planted.len() {
                        daily_planted.resize(day + 1, 0);
                    }
                    daily_planted[day] += 1;
                }
            }
        } else if let Some(p) = config.planted {
            let day = day_of(time);
            if day >= p.lag {
                let count = daily_planted.get(day - p.lag).copied().unwrap_or(0);
                state.extra = (p.beta * count as f64 * SECONDS_PER_DAY).round() as i64;
            }
        }

        events.push(Event {
            case_id: format!("case_{}", case + 1),
            activity: format!("A{}", state.activities[index] + 1),
            timestamp: synth_epoch() + Duration::seconds(time),
            actor: Some(format!("actor_{}", actor + 1)),
            sequence_index: events.len(),
        });
        actor_events[actor].push((time, case));
        state.last_time = time;
        state.prev_actor = actor;
        state.next = index + 1;

        if index < state.gaps.len() {
            let gap = state.gaps[index];
            let handover = rng.gen_bool(config.handover_rate);
            let next_actor = if handover {
                let k = rng.gen_range(0..config.n_actors - 1);
                if k >= actor {
                    k + 1
                } else {
                    k
                }
            } else {
                if !rng.gen_bool(config.interruption_rate) {
                    holds[actor] = Some((case, time + gap));
                }
                actor
            };
            state.next_actor = next_actor;
            let stretch = if index + 1 == state.gaps.len() { state.extra } else { 0 };
            queue.push(Reverse((time + gap + stretch, seq, case)));
            seq += 1;
        }
    }

    let mut log = EventLog::new(events);
    if let Some(rate) = config.outcome_rate {
        for case in 0..config.n_cases {
            let positive = rng.gen_bool(rate);
            log.set_case_attribute(&format!("case_{}", case + 1), "outcome", if positive { "true" } else { "false" });
        }
    }
    Ok(validate_and_sort(log).0)
}

// ---------------------------------------------------------------------------
// VAR panels

/// One coefficient of a sparse VAR: `target_t += coefficient · source_{t−lag}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarTerm {
    pub target: usize,
    pub source: usize,
    pub lag: usize,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarConfig {
    pub dimensions: usize,
    pub length: usize,
    pub terms: Vec<VarTerm>,
    pub noise_scale: f64,
    pub seed: u64,
    /// Columns tagged as KPIs and named `y<i>`; the rest are behaviors named
    /// `x<i>`.
    pub kpi_columns: BTreeSet<usize>,
}

impl VarConfig {
    pub fn column_name(&self, i: usize) -> String {
        if self.kpi_columns.contains(&i) {
            format!("y{i}")
        } else {
            format!("x{i}")
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.dimensions == 0 || self.length == 0 {
            return bad("dimensions and length must be positive".into());
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return bad(format!("noise_scale {} must be positive", self.noise_scale));
        }
        for t in &self.terms {
            if t.target >= self.dimensions || t.source >= self.dimensions {
                return bad(format!("term {t:?} refers to a column outside 0..{}", self.dimensions));
            }
            if t.lag == 0 {
                return bad(format!("term {t:?} has lag 0"));
            }
            if !t.coefficient.is_finite() {
                return bad(format!("term {t:?} has a non-finite coefficient"));
            }
        }
        if let Some(&k) = self.kpi_columns.iter().find(|&&k| k >= self.dimensions) {
            return bad(format!("KPI column {k} is outside 0..{}", self.dimensions));
        }
        Ok(())
    }
}

/// Largest eigenvalue modulus of the VAR companion matrix.
pub fn spectral_radius(dimensions: usize, terms: &[VarTerm]) -> f64 {
    let order = terms.iter().map(|t| t.lag).max().unwrap_or(0);
    if order == 0 {
        return 0.0;
    }
    let n = dimensions * order;
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for t in terms {
        companion[(t.target, (t.lag - 1) * dimensions + t.source)] += t.coefficient;
    }
    for i in dimensions..n {
        companion[(i, i - dimensions)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Simulates a stable VAR with Gaussian innovations after a burn-in.
pub fn generate_var<T: Scalar>(config: &VarConfig) -> Result<Panel<T>, SynthError> {
    config.validate()?;
    let radius = spectral_radius(config.dimensions, &config.terms);
    if radius >= 1.0 {
        return Err(SynthError::Unstable { spectral_radius: radius });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = config.dimensions;
    let total = VAR_BURN_IN + config.length;
    let mut data = vec![vec![0.0f64; total]; d];
    for t in 0..total {
        for column in data.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            column[t] = config.noise_scale * e;
        }
        for term in &config.terms {
            if t >= term.lag {
                let v = term.coefficient * data[term.source][t - term.lag];
                data[term.target][t] += v;
            }
        }
    }
    let start = synth_epoch().date_naive();
    let columns = data
        .into_iter()
        .enumerate()
        .map(|(i, col)| {
            let values = col[VAR_BURN_IN..].iter().map(|&v| T::lit(v)).collect();
            let role = if config.kpi_columns.contains(&i) { Role::Kpi } else { Role::Behavior };
            (DailySeries::observed(config.column_name(i), start, values), role)
        })
        .collect();
    Ok(Panel::from_columns(start, columns).expect("equal-length columns"))
}
