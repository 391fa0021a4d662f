//! Daily behavior-count and KPI series on a shared UTC calendar.
//!
//! Behavior series count classified transitions per day of the receiving
//! event. KPI series group cases by the UTC date of their first event: mean
//! throughput time in fractional days, or the fraction of cases satisfying an
//! [`OutcomeRule`]. Days without any case start are filled by carrying the
//! last observation forward (initial gaps take the first observation) and are
//! flagged in the series mask.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::{BehaviorType, Transition};
use crate::event_log::EventLog;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("no completed cases remain after the completion filter")]
    NoCompletedCases,
    #[error("outcome attribute '{0}' is not present in the event log")]
    MissingAttribute(String),
    #[error("alignment needs at least two series, got {0}")]
    TooFewSeries(usize),
    #[error("series date ranges do not overlap")]
    NonOverlapping,
    #[error("KPI column '{column}' has {filled} of {total} days gap-filled (more than half)")]
    ExcessiveFill {
        column: String,
        filled: usize,
        total: usize,
    },
    #[error("KPI column '{0}' has no observed days")]
    Unobserved(String),
    #[error("panel file: {0}")]
    Format(String),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Behavior,
    Kpi,
}

/// A named real-valued series indexed by day offset from `start_day`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySeries<T> {
    pub name: String,
    pub start_day: NaiveDate,
    pub values: Vec<T>,
    /// `true` where the value was synthesized by gap-filling.
    pub mask: Vec<bool>,
}

impl<T: Scalar> DailySeries<T> {
    /// A fully observed series.
    pub fn observed(name: impl Into<String>, start_day: NaiveDate, values: Vec<T>) -> Self {
        let mask = vec![false; values.len()];
        Self {
            name: name.into(),
            start_day,
            values,
            mask,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn end_day(&self) -> NaiveDate {
        self.start_day + Duration::days(self.values.len().saturating_sub(1) as i64)
    }

    pub fn day(&self, offset: usize) -> NaiveDate {
        self.start_day + Duration::days(offset as i64)
    }

    pub fn filled_days(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// First and last unmasked days.
    pub fn observed_range(&self) -> Option<(NaiveDate, NaiveDate)> {
        let first = self.mask.iter().position(|&m| !m)?;
        let last = self.mask.iter().rposition(|&m| !m)?;
        Some((self.day(first), self.day(last)))
    }
}

/// Fills `None` entries by carrying the last value forward; leading gaps take
/// the first observed value. Returns `None` when nothing was observed.
pub fn fill_gaps<T: Scalar>(raw: &[Option<T>]) -> Option<(Vec<T>, Vec<bool>)> {
    let first = raw.iter().find_map(|v| *v)?;
    let mut last = first;
    let mut values = Vec::with_capacity(raw.len());
    let mut mask = Vec::with_capacity(raw.len());
    for v in raw {
        match v {
            Some(x) => {
                last = *x;
                values.push(*x);
                mask.push(false);
            }
            None => {
                values.push(last);
                mask.push(true);
            }
        }
    }
    Some((values, mask))
}

fn utc_day(t: &DateTime<Utc>) -> NaiveDate {
    t.date_naive()
}

fn day_span(lo: NaiveDate, hi: NaiveDate) -> usize {
    (hi - lo).num_days() as usize + 1
}

// ---------------------------------------------------------------------------
// behavior series

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Global,
    /// Grouped by the actor handing off the work (`from_actor`).
    PerActor,
    /// Grouped by the activity of the receiving event.
    PerActivity,
}

/// Series name for a behavior, optionally scoped to a group.
pub fn behavior_series_name(behavior: BehaviorType, granularity: Granularity, group: &str) -> String {
    match granularity {
        Granularity::Global => behavior.code().to_string(),
        Granularity::PerActor => format!("{}@user={}", behavior.code(), group),
        Granularity::PerActivity => format!("{}@activity={}", behavior.code(), group),
    }
}

/// Daily transition counts per behavior type (and group).
///
/// All series share the day range spanned by the transitions. For grouped
/// granularities only the `top_k` groups by total transition count are kept
/// (ties broken by name). An empty transition list yields no series.
pub fn behavior_series<T: Scalar>(
    transitions: &[Transition],
    granularity: Granularity,
    top_k: usize,
) -> Vec<DailySeries<T>> {
    let Some(start) = transitions.iter().map(|t| utc_day(&t.to_timestamp)).min() else {
        return Vec::new();
    };
    let end = transitions.iter().map(|t| utc_day(&t.to_timestamp)).max().unwrap();
    let len = day_span(start, end);

    let group_of = |t: &Transition| -> String {
        match granularity {
            Granularity::Global => String::new(),
            Granularity::PerActor => t.from_actor.clone(),
            Granularity::PerActivity => t.to_activity.clone(),
        }
    };

    let mut totals: HashMap<String, usize> = HashMap::new();
    for t in transitions {
        *totals.entry(group_of(t)).or_default() += 1;
    }
    let mut groups: Vec<(String, usize)> = totals.into_iter().collect();
    groups.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if granularity != Granularity::Global {
        groups.truncate(top_k);
    }
    let slot: HashMap<&str, usize> = groups.iter().enumerate().map(|(i, g)| (g.0.as_str(), i)).collect();

    let mut counts = vec![vec![vec![0usize; len]; BehaviorType::ALL.len()]; groups.len()];
    for t in transitions {
        let g = group_of(t);
        let Some(&gi) = slot.get(g.as_str()) else {
            continue;
        };
        let bi = BehaviorType::ALL.iter().position(|&b| b == t.behavior).unwrap();
        let d = (utc_day(&t.to_timestamp) - start).num_days() as usize;
        counts[gi][bi][d] += 1;
    }

    let mut out = Vec::with_capacity(groups.len() * 4);
    for (gi, (group, _)) in groups.iter().enumerate() {
        for (bi, &b) in BehaviorType::ALL.iter().enumerate() {
            let values = counts[gi][bi].iter().map(|&c| T::from_usize_lossy(c)).collect();
            out.push(DailySeries::observed(behavior_series_name(b, granularity, group), start, values));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// KPI series

/// Which cases count as completed for KPI computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Completion {
    /// Every case.
    All,
    /// Cases whose last event lies at least `days` before the log's final
    /// timestamp.
    Margin { days: f64 },
    /// Cases whose last event is one of these activities.
    EndActivities { activities: Vec<String> },
}

impl Default for Completion {
    fn default() -> Self {
        Completion::Margin { days: 1.0 }
    }
}

/// First/last event summary of one case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseSpan<'a> {
    pub case_id: &'a str,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub positions: Vec<usize>,
}

/// Cases of a canonically ordered log that pass the completion filter.
pub fn completed_cases<'a>(log: &'a EventLog, completion: &Completion) -> Vec<CaseSpan<'a>> {
    let events = log.events();
    let log_end = log.last_timestamp();
    log.traces()
        .into_iter()
        .map(|t| CaseSpan {
            case_id: t.case_id,
            start: events[t.positions[0]].timestamp,
            end: events[*t.positions.last().unwrap()].timestamp,
            positions: t.positions,
        })
        .filter(|c| match completion {
            Completion::All => true,
            Completion::Margin { days } => {
                let margin = Duration::milliseconds((days * 86_400_000.0).round() as i64);
                log_end.is_some_and(|end| c.end + margin <= end)
            }
            Completion::EndActivities { activities } => {
                let last = &events[*c.positions.last().unwrap()].activity;
                activities.iter().any(|a| a == last)
            }
        })
        .collect()
}

/// Duration in fractional 86 400-second days.
pub fn duration_days<T: Scalar>(d: Duration) -> T {
    let secs = d.num_seconds() as f64 + f64::from(d.subsec_nanos()) * 1e-9;
    T::lit(secs / 86_400.0)
}

/// Groups per-case values by start day and averages them; empty days are
/// gap-filled and masked.
fn daily_mean<T: Scalar>(name: &str, per_case: &[(NaiveDate, T)]) -> Option<DailySeries<T>> {
    let start = per_case.iter().map(|c| c.0).min()?;
    let end = per_case.iter().map(|c| c.0).max()?;
    let len = day_span(start, end);
    let mut sums = vec![(T::zero(), 0usize); len];
    for (day, v) in per_case {
        let slot = &mut sums[(*day - start).num_days() as usize];
        slot.0 += *v;
        slot.1 += 1;
    }
    let raw: Vec<Option<T>> = sums
        .iter()
        .map(|&(s, n)| (n > 0).then(|| s / T::from_usize_lossy(n)))
        .collect();
    let (values, mask) = fill_gaps(&raw)?;
    Some(DailySeries {
        name: name.to_string(),
        start_day: start,
        values,
        mask,
    })
}

/// Daily mean throughput time (days) of completed cases by start date.
pub fn throughput_series<T: Scalar>(log: &EventLog, completion: &Completion) -> Result<DailySeries<T>, SeriesError> {
    let per_case: Vec<(NaiveDate, T)> = completed_cases(log, completion)
        .iter()
        .map(|c| (utc_day(&c.start), duration_days::<T>(c.end - c.start)))
        .collect();
    daily_mean("TT", &per_case).ok_or(SeriesError::NoCompletedCases)
}

/// Case-level binary outcome definitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OutcomeRule {
    /// Case is positive when any activity label contains any keyword
    /// (case-insensitive).
    Keyword { keywords: Vec<String> },
    /// Looks at the last event whose label starts with `prefix`; the case is
    /// positive when that label is one of `positive` (case-insensitive).
    /// With an empty `positive` list, the case is positive when its final
    /// event carries the prefix at all.
    LastEvent {
        prefix: String,
        #[serde(default)]
        positive: Vec<String>,
    },
    /// Boolean case attribute.
    Attribute {
        name: String,
        #[serde(default = "default_truthy")]
        true_values: Vec<String>,
    },
}

fn default_truthy() -> Vec<String> {
    vec!["true".into(), "1".into(), "yes".into()]
}

impl OutcomeRule {
    pub fn attribute(name: impl Into<String>) -> Self {
        OutcomeRule::Attribute {
            name: name.into(),
            true_values: default_truthy(),
        }
    }

    fn evaluate(&self, log: &EventLog, case: &CaseSpan<'_>) -> bool {
        let events = log.events();
        let labels = || case.positions.iter().map(|&p| events[p].activity.as_str());
        match self {
            OutcomeRule::Keyword { keywords } => {
                let lowered: Vec<String> = keywords.iter().map(|k| k.to_lowercase()).collect();
                labels().any(|l| {
                    let l = l.to_lowercase();
                    lowered.iter().any(|k| l.contains(k.as_str()))
                })
            }
            OutcomeRule::LastEvent { prefix, positive } => {
                if positive.is_empty() {
                    return labels().next_back().is_some_and(|l| l.starts_with(prefix.as_str()));
                }
                labels().rfind(|l| l.starts_with(prefix.as_str()))
                    .is_some_and(|l| positive.iter().any(|p| p.eq_ignore_ascii_case(l)))
            }
            OutcomeRule::Attribute { name, true_values } => log
                .case_attribute(case.case_id, name)
                .is_some_and(|v| true_values.iter().any(|t| t.eq_ignore_ascii_case(v.trim()))),
        }
    }
}

/// Daily fraction of (completed) cases starting that day which satisfy `rule`.
pub fn outcome_series<T: Scalar>(
    log: &EventLog,
    name: &str,
    rule: &OutcomeRule,
    completion: &Completion,
) -> Result<DailySeries<T>, SeriesError> {
    if let OutcomeRule::Attribute { name: attr, .. } = rule {
        if !log.has_attribute(attr) {
            return Err(SeriesError::MissingAttribute(attr.clone()));
        }
    }
    let per_case: Vec<(NaiveDate, T)> = completed_cases(log, completion)
        .iter()
        .map(|c| {
            let v = if rule.evaluate(log, c) { T::one() } else { T::zero() };
            (utc_day(&c.start), v)
        })
        .collect();
    daily_mean(name, &per_case).ok_or(SeriesError::NoCompletedCases)
}

// ---------------------------------------------------------------------------
// panel

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelColumn<T> {
    pub series: DailySeries<T>,
    pub role: Role,
    /// Fraction of calendar days synthesized by gap-filling.
    pub fill_fraction: f64,
}

/// Series aligned on one contiguous daily calendar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel<T> {
    start_day: NaiveDate,
    len: usize,
    columns: Vec<PanelColumn<T>>,
}

impl<T: Scalar> Panel<T> {
    /// Builds a panel from columns that already share `start_day` and length.
    pub fn from_columns(start_day: NaiveDate, columns: Vec<(DailySeries<T>, Role)>) -> Result<Self, SeriesError> {
        let len = columns.first().map_or(0, |c| c.0.len());
        let mut out = Vec::with_capacity(columns.len());
        for (s, role) in columns {
            if s.len() != len || s.start_day != start_day || s.mask.len() != len {
                return Err(SeriesError::Format(format!("column '{}' is not aligned", s.name)));
            }
            let fill_fraction = if len == 0 { 0.0 } else { s.filled_days() as f64 / len as f64 };
            out.push(PanelColumn {
                series: s,
                role,
                fill_fraction,
            });
        }
        Ok(Self {
            start_day,
            len,
            columns: out,
        })
    }

    pub fn start_day(&self) -> NaiveDate {
        self.start_day
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[PanelColumn<T>] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&PanelColumn<T>> {
        self.columns.iter().find(|c| c.series.name == name)
    }

    pub fn values(&self, name: &str) -> Option<&[T]> {
        self.column(name).map(|c| c.series.values.as_slice())
    }

    pub fn names_with_role(&self, role: Role) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| c.role == role)
            .map(|c| c.series.name.as_str())
            .collect()
    }

    pub fn behavior_names(&self) -> Vec<&str> {
        self.names_with_role(Role::Behavior)
    }

    pub fn kpi_names(&self) -> Vec<&str> {
        self.names_with_role(Role::Kpi)
    }

    pub fn day(&self, offset: usize) -> NaiveDate {
        self.start_day + Duration::days(offset as i64)
    }

    /// Drops the first `rows` days from every column.
    pub fn trim_front(&self, rows: usize) -> Self {
        let rows = rows.min(self.len);
        let columns = self
            .columns
            .iter()
            .map(|c| {
                let mut s = c.series.clone();
                s.values.drain(..rows);
                s.mask.drain(..rows);
                s.start_day += Duration::days(rows as i64);
                (s, c.role)
            })
            .collect();
        Self::from_columns(self.start_day + Duration::days(rows as i64), columns)
            .expect("trimming keeps columns aligned")
    }

    /// Replaces the columns while keeping the calendar.
    pub fn with_columns(&self, columns: Vec<(DailySeries<T>, Role)>) -> Result<Self, SeriesError> {
        let start = columns.first().map_or(self.start_day, |c| c.0.start_day);
        Self::from_columns(start, columns)
    }
}

/// Aligns series onto the intersection of their observed date ranges.
///
/// Behavior series are observed on every day of their range; KPI series only
/// on unmasked days. A KPI column with more than half of the aligned days
/// gap-filled is rejected.
pub fn align<T: Scalar>(series: Vec<(DailySeries<T>, Role)>) -> Result<Panel<T>, SeriesError> {
    if series.len() < 2 {
        return Err(SeriesError::TooFewSeries(series.len()));
    }
    let mut lo = NaiveDate::MIN;
    let mut hi = NaiveDate::MAX;
    for (s, role) in &series {
        let (first, last) = match role {
            Role::Behavior if !s.is_empty() => (s.start_day, s.end_day()),
            _ => s
                .observed_range()
                .ok_or_else(|| SeriesError::Unobserved(s.name.clone()))?,
        };
        lo = lo.max(first);
        hi = hi.min(last);
    }
    if lo > hi {
        return Err(SeriesError::NonOverlapping);
    }
    let len = day_span(lo, hi);

    let mut columns = Vec::with_capacity(series.len());
    for (s, role) in series {
        let mut values = Vec::with_capacity(len);
        let mut mask = Vec::with_capacity(len);
        for d in 0..len {
            let day = lo + Duration::days(d as i64);
            let offset = (day - s.start_day).num_days();
            if offset >= 0 && (offset as usize) < s.len() {
                values.push(s.values[offset as usize]);
                mask.push(s.mask[offset as usize]);
            } else {
                // only reachable for behavior series, which are zero-filled
                values.push(T::zero());
                mask.push(true);
            }
        }
        let filled = mask.iter().filter(|&&m| m).count();
        if role == Role::Kpi && 2 * filled > len {
            return Err(SeriesError::ExcessiveFill {
                column: s.name,
                filled,
                total: len,
            });
        }
        columns.push((
            DailySeries {
                name: s.name,
                start_day: lo,
                values,
                mask,
            },
            role,
        ));
    }
    Panel::from_columns(lo, columns)
}

// ---------------------------------------------------------------------------
// panel files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSidecar {
    pub start_day: NaiveDate,
    pub len: usize,
    pub columns: Vec<SidecarColumn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarColumn {
    pub name: String,
    pub role: Role,
    pub fill_fraction: f64,
    pub mask: Vec<bool>,
}

/// Writes `date,<col>...` rows. Values use the shortest round-trip decimal form.
pub fn write_panel_csv<T: Scalar, W: Write>(panel: &Panel<T>, sink: W) -> Result<(), SeriesError> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["date".to_string()];
    header.extend(panel.columns.iter().map(|c| c.series.name.clone()));
    w.write_record(&header)?;
    for d in 0..panel.len {
        let mut row = vec![panel.day(d).to_string()];
        row.extend(panel.columns.iter().map(|c| c.series.values[d].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn panel_sidecar<T: Scalar>(panel: &Panel<T>) -> PanelSidecar {
    PanelSidecar {
        start_day: panel.start_day,
        len: panel.len,
        columns: panel
            .columns
            .iter()
            .map(|c| SidecarColumn {
                name: c.series.name.clone(),
                role: c.role,
                fill_fraction: c.fill_fraction,
                mask: c.series.mask.clone(),
            })
            .collect(),
    }
}

pub fn write_panel_sidecar<T: Scalar, W: Write>(panel: &Panel<T>, sink: W) -> Result<(), SeriesError> {
    serde_json::to_writer_pretty(sink, &panel_sidecar(panel))?;
    Ok(())
}

/// Reads a panel written by [`write_panel_csv`] and [`write_panel_sidecar`].
pub fn read_panel<T: Scalar, R1: Read, R2: Read>(csv_source: R1, sidecar: R2) -> Result<Panel<T>, SeriesError> {
    let meta: PanelSidecar = serde_json::from_reader(sidecar)?;
    let mut r = csv::Reader::from_reader(csv_source);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("date") || header.len() != meta.columns.len() + 1 {
        return Err(SeriesError::Format("header does not match sidecar".into()));
    }
    for (h, c) in header[1..].iter().zip(&meta.columns) {
        if h != &c.name {
            return Err(SeriesError::Format(format!("column '{h}' does not match sidecar '{}'", c.name)));
        }
    }
    let mut values: Vec<Vec<T>> = vec![Vec::with_capacity(meta.len); meta.columns.len()];
    for (row_no, rec) in r.records().enumerate() {
        let rec = rec?;
        let expected_day = meta.start_day + Duration::days(row_no as i64);
        if rec.get(0) != Some(expected_day.to_string().as_str()) {
            return Err(SeriesError::Format(format!("row {} is not day {expected_day}", row_no + 2)));
        }
        for (c, col) in values.iter_mut().enumerate() {
            let raw = rec.get(c + 1).unwrap_or("");
            let v: T = raw
                .parse()
                .map_err(|_| SeriesError::Format(format!("row {}: bad number '{raw}'", row_no + 2)))?;
            col.push(v);
        }
    }
    let columns = meta
        .columns
        .into_iter()
        .zip(values)
        .map(|(c, v)| {
            (
                DailySeries {
                    name: c.name,
                    start_day: meta.start_day,
                    values: v,
                    mask: c.mask,
                },
                c.role,
            )
        })
        .collect();
    let panel = Panel::from_columns(meta.start_day, columns)?;
    if panel.len != meta.len && !panel.columns.is_empty() {
        return Err(SeriesError::Format("row count does not match sidecar".into()));
    }
    Ok(panel)
}

/// Indexes series by name.
pub fn series_by_name<T: Scalar>(series: &[DailySeries<T>]) -> BTreeMap<&str, &DailySeries<T>> {
    series.iter().map(|s| (s.name.as_str(), s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_log::{validate_and_sort, Event};
    use chrono::TimeZone;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2022, 3, 1, 8, 0, 0).unwrap()
    }

    fn tr(day: i64, behavior: BehaviorType, from: &str, act: &str) -> Transition {
        let ts = t0() + Duration::days(day);
        Transition {
            case_id: "c".into(),
            from_event: 0,
            to_event: 1,
            from_actor: from.into(),
            to_actor: "z".into(),
            behavior,
            from_timestamp: ts,
            to_timestamp: ts,
            to_activity: act.into(),
        }
    }

    fn ev(case: &str, act: &str, hours: i64, seq: usize) -> Event {
        Event {
            case_id: case.into(),
            activity: act.into(),
            timestamp: t0() + Duration::hours(hours),
            actor: Some("r".into()),
            sequence_index: seq,
        }
    }

    #[test]
    fn counts_on_single_day() {
        let ts = vec![
            tr(0, BehaviorType::HandoverIdle, "a", "x"),
            tr(0, BehaviorType::HandoverIdle, "a", "x"),
            tr(0, BehaviorType::HandoverIdle, "b", "x"),
        ];
        let s = behavior_series::<f64>(&ts, Granularity::Global, 10);
        let by = series_by_name(&s);
        assert_eq!(by["HI"].values, vec![3.0]);
        assert_eq!(by["C"].values, vec![0.0]);
        assert_eq!(by["HI"].filled_days(), 0);
    }

    #[test]
    fn zero_days_are_observed_not_filled() {
        let ts = vec![
            tr(0, BehaviorType::Continuation, "a", "x"),
            tr(3, BehaviorType::Continuation, "a", "x"),
        ];
        let s = behavior_series::<f64>(&ts, Granularity::Global, 10);
        assert_eq!(series_by_name(&s)["C"].values, vec![1.0, 0.0, 0.0, 1.0]);
        assert!(s.iter().all(|x| x.filled_days() == 0));
    }

    #[test]
    fn top_k_keeps_most_frequent_groups() {
        let ts = vec![
            tr(0, BehaviorType::HandoverBusy, "a", "x"),
            tr(0, BehaviorType::HandoverBusy, "b", "x"),
            tr(1, BehaviorType::HandoverBusy, "b", "y"),
            tr(1, BehaviorType::Continuation, "c", "y"),
            tr(1, BehaviorType::Continuation, "c", "y"),
        ];
        let s = behavior_series::<f64>(&ts, Granularity::PerActor, 2);
        let names: Vec<_> = s.iter().map(|x| x.name.as_str()).collect();
        assert_eq!(names.len(), 8);
        assert!(names.contains(&"HB@user=b"));
        assert!(names.contains(&"C@user=c"));
        assert!(!names.iter().any(|n| n.ends_with("=a")));
        let acts = behavior_series::<f64>(&ts, Granularity::PerActivity, 10);
        assert!(acts.iter().any(|x| x.name == "HB@activity=y"));
    }

    #[test]
    fn empty_transitions_give_no_series() {
        assert!(behavior_series::<f64>(&[], Granularity::Global, 10).is_empty());
    }

    #[test]
    fn throughput_of_two_day_case() {
        let log = validate_and_sort(EventLog::new(vec![ev("a", "A", 0, 0), ev("a", "B", 48, 1)])).0;
        let s = throughput_series::<f64>(&log, &Completion::All).unwrap();
        assert_eq!(s.values, vec![2.0]);
        assert_eq!(s.start_day, t0().date_naive());
    }

    #[test]
    fn throughput_mean_and_gap_fill() {
        let log = validate_and_sort(EventLog::new(vec![
            ev("a", "A", 0, 0),
            ev("a", "B", 24, 1),
            ev("b", "A", 1, 2),
            ev("b", "B", 73, 3),
            ev("c", "A", 48, 4),
            ev("c", "B", 48 + 96, 5),
        ]))
        .0;
        let s = throughput_series::<f64>(&log, &Completion::All).unwrap();
        assert_eq!(s.values, vec![2.0, 2.0, 4.0]);
        assert_eq!(s.mask, vec![false, true, false]);
    }

    #[test]
    fn completion_margin_drops_truncated_cases() {
        let log = validate_and_sort(EventLog::new(vec![
            ev("a", "A", 0, 0),
            ev("a", "B", 10, 1),
            ev("b", "A", 30, 2),
            ev("b", "B", 40, 3),
        ]))
        .0;
        let kept = completed_cases(&log, &Completion::default());
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].case_id, "a");
        let by_end = completed_cases(
            &log,
            &Completion::EndActivities {
                activities: vec!["B".into()],
            },
        );
        assert_eq!(by_end.len(), 2);
        assert!(matches!(
            throughput_series::<f64>(&log, &Completion::Margin { days: 100.0 }),
            Err(SeriesError::NoCompletedCases)
        ));
    }

    #[test]
    fn outcome_rules() {
        let mut log = EventLog::new(vec![
            ev("a", "O_Created", 0, 0),
            ev("a", "O_Accepted", 1, 1),
            ev("a", "W_Call", 2, 2),
            ev("b", "O_Created", 3, 3),
            ev("b", "O_Cancelled", 4, 4),
            ev("c", "Operatie hart", 5, 5),
        ]);
        log.set_case_attribute("a", "gr", "TRUE");
        log.set_case_attribute("b", "gr", "false");
        let (log, _) = validate_and_sort(log);
        let acc = OutcomeRule::LastEvent {
            prefix: "O_".into(),
            positive: vec!["O_Accepted".into()],
        };
        let s = outcome_series::<f64>(&log, "pct_accepted", &acc, &Completion::All).unwrap();
        assert!((s.values[0] - 1.0 / 3.0).abs() < 1e-15);

        let op = OutcomeRule::Keyword {
            keywords: vec!["operatie".into(), "resectie".into()],
        };
        let s = outcome_series::<f64>(&log, "pct_op", &op, &Completion::All).unwrap();
        assert!((s.values[0] - 1.0 / 3.0).abs() < 1e-15);

        let none = OutcomeRule::Keyword { keywords: vec![] };
        let s = outcome_series::<f64>(&log, "none", &none, &Completion::All).unwrap();
        assert_eq!(s.values, vec![0.0]);

        let gr = OutcomeRule::attribute("gr");
        let s = outcome_series::<f64>(&log, "pct_gr", &gr, &Completion::All).unwrap();
        assert!((s.values[0] - 1.0 / 3.0).abs() < 1e-15);

        assert!(matches!(
            outcome_series::<f64>(&log, "x", &OutcomeRule::attribute("nope"), &Completion::All),
            Err(SeriesError::MissingAttribute(_))
        ));
    }

    #[test]
    fn kpi_interior_gap_carries_forward() {
        let d0 = t0().date_naive();
        let kpi = DailySeries {
            name: "TT".into(),
            start_day: d0,
            values: vec![2.0, 2.0, 4.0],
            mask: vec![false, true, false],
        };
        let beh = DailySeries::observed("HI", d0, vec![1.0, 0.0, 5.0]);
        let p = align(vec![(beh.clone(), Role::Behavior), (kpi.clone(), Role::Kpi)]).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.values("TT").unwrap(), &[2.0, 2.0, 4.0]);
        assert_eq!(p.column("TT").unwrap().series.mask, vec![false, true, false]);
        assert!((p.column("TT").unwrap().fill_fraction - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.column("HI").unwrap().series, beh);
    }

    #[test]
    fn align_errors() {
        let d0 = t0().date_naive();
        let a = DailySeries::observed("a", d0, vec![1.0f64; 3]);
        let b = DailySeries::observed("b", d0 + Duration::days(10), vec![1.0; 3]);
        assert!(matches!(align(vec![(a.clone(), Role::Behavior)]), Err(SeriesError::TooFewSeries(1))));
        assert!(matches!(
            align(vec![(a.clone(), Role::Behavior), (b, Role::Kpi)]),
            Err(SeriesError::NonOverlapping)
        ));
        let sparse = DailySeries {
            name: "k".into(),
            start_day: d0,
            values: vec![1.0; 5],
            mask: vec![false, true, true, true, false],
        };
        let beh = DailySeries::observed("a", d0, vec![1.0; 5]);
        assert!(matches!(
            align(vec![(beh, Role::Behavior), (sparse, Role::Kpi)]),
            Err(SeriesError::ExcessiveFill { filled: 3, total: 5, .. })
        ));
    }

    #[test]
    fn panel_files_round_trip_exactly() {
        let d0 = t0().date_naive();
        let kpi = DailySeries {
            name: "TT".into(),
            start_day: d0,
            values: vec![0.1 + 0.2, 1.0 / 3.0, 1e-300],
            mask: vec![false, true, false],
        };
        let beh = DailySeries::observed("HB@user=User 1", d0, vec![1.0, 0.0, 5.0]);
        let p = align(vec![(beh, Role::Behavior), (kpi, Role::Kpi)]).unwrap();
        let mut csv_buf = Vec::new();
        let mut json_buf = Vec::new();
        write_panel_csv(&p, &mut csv_buf).unwrap();
        write_panel_sidecar(&p, &mut json_buf).unwrap();
        let back: Panel<f64> = read_panel(csv_buf.as_slice(), json_buf.as_slice()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn trim_front_shifts_calendar() {
        let d0 = t0().date_naive();
        let a = DailySeries::observed("a", d0, vec![1.0f64, 2.0, 3.0]);
        let b = DailySeries::observed("b", d0, vec![4.0f64, 5.0, 6.0]);
        let p = Panel::from_columns(d0, vec![(a, Role::Behavior), (b, Role::Kpi)]).unwrap();
        let t = p.trim_front(1);
        assert_eq!(t.len(), 2);
        assert_eq!(t.start_day(), d0 + Duration::days(1));
        assert_eq!(t.values("b").unwrap(), &[5.0, 6.0]);
    }
}
