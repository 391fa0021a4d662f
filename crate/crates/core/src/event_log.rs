//! Event logs: parsing from CSV and XES, canonical ordering, and export.
//!
//! An [`EventLog`] is a flat list of [`Event`]s. Every event remembers the
//! ordinal at which it appeared in its source file so that timestamp ties can
//! be broken deterministically. After [`validate_and_sort`] the events are in
//! canonical `(timestamp, sequence_index)` order and each case's trace is the
//! subsequence of events sharing its `case_id`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Read, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Utc};
use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum number of offending rows echoed back in a parse error.
const MAX_REPORTED_ROWS: usize = 10;

#[derive(Debug, Error)]
pub enum EventLogError {
    #[error("missing mapped column(s) {missing:?}; header has {available:?}")]
    Schema {
        missing: Vec<String>,
        available: Vec<String>,
    },
    #[error("{count} row(s) with unparseable timestamps; first offending rows: {}", format_rows(.first))]
    BadTimestamps {
        count: usize,
        first: Vec<(usize, String)>,
    },
    #[error("row {row}: required field '{field}' is empty")]
    EmptyField { row: usize, field: String },
    #[error("event log contains no events")]
    Empty,
    #[error("malformed XML at byte {offset}: {message}")]
    Xml { offset: u64, message: String },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

fn format_rows(rows: &[(usize, String)]) -> String {
    rows.iter()
        .map(|(r, v)| format!("{r} ('{v}')"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// A single atomic occurrence of an activity in a case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub case_id: String,
    pub activity: String,
    pub timestamp: DateTime<Utc>,
    pub actor: Option<String>,
    /// Ordinal of the event in its source file.
    pub sequence_index: usize,
}

/// An ordered collection of events plus per-case attributes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventLog {
    events: Vec<Event>,
    case_attributes: BTreeMap<String, BTreeMap<String, String>>,
    attribute_names: BTreeSet<String>,
    synthesized_case_ids: usize,
}

/// Borrowed view of one case's events, as positions into the sorted log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace<'a> {
    pub case_id: &'a str,
    pub positions: Vec<usize>,
}

/// Summary returned by [`validate_and_sort`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogSummary {
    pub events: usize,
    pub cases: usize,
    pub actors: usize,
    pub missing_actor: usize,
    pub synthesized_case_ids: usize,
}

impl EventLog {
    pub fn new(events: Vec<Event>) -> Self {
        Self {
            events,
            ..Self::default()
        }
    }

    /// Attaches a case-level attribute (first value set for a case wins).
    pub fn set_case_attribute(&mut self, case_id: &str, name: &str, value: &str) {
        self.attribute_names.insert(name.to_string());
        self.case_attributes
            .entry(case_id.to_string())
            .or_default()
            .entry(name.to_string())
            .or_insert_with(|| value.to_string());
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn case_attribute(&self, case_id: &str, name: &str) -> Option<&str> {
        self.case_attributes
            .get(case_id)
            .and_then(|m| m.get(name))
            .map(String::as_str)
    }

    /// Names of every case attribute seen while parsing.
    pub fn attribute_names(&self) -> &BTreeSet<String> {
        &self.attribute_names
    }

    pub fn has_attribute(&self, name: &str) -> bool {
        self.attribute_names.contains(name)
    }

    pub fn missing_actor_count(&self) -> usize {
        self.events.iter().filter(|e| e.actor.is_none()).count()
    }

    /// Number of XES traces that lacked `concept:name`.
    pub fn synthesized_case_ids(&self) -> usize {
        self.synthesized_case_ids
    }

    pub fn first_timestamp(&self) -> Option<DateTime<Utc>> {
        self.events.iter().map(|e| e.timestamp).min()
    }

    pub fn last_timestamp(&self) -> Option<DateTime<Utc>> {
        self.events.iter().map(|e| e.timestamp).max()
    }

    /// Traces in order of their first event in the current event order.
    pub fn traces(&self) -> Vec<Trace<'_>> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut traces: Vec<Trace<'_>> = Vec::new();
        for (pos, e) in self.events.iter().enumerate() {
            let slot = *index.entry(e.case_id.as_str()).or_insert_with(|| {
                traces.push(Trace {
                    case_id: e.case_id.as_str(),
                    positions: Vec::new(),
                });
                traces.len() - 1
            });
            traces[slot].positions.push(pos);
        }
        traces
    }

    pub fn summary(&self) -> LogSummary {
        let cases: BTreeSet<&str> = self.events.iter().map(|e| e.case_id.as_str()).collect();
        let actors: BTreeSet<&str> = self.events.iter().filter_map(|e| e.actor.as_deref()).collect();
        LogSummary {
            events: self.events.len(),
            cases: cases.len(),
            actors: actors.len(),
            missing_actor: self.missing_actor_count(),
            synthesized_case_ids: self.synthesized_case_ids,
        }
    }
}

/// Stable-sorts events by `(timestamp, sequence_index)`.
pub fn validate_and_sort(mut log: EventLog) -> (EventLog, LogSummary) {
    log.events
        .sort_by_key(|a| (a.timestamp, a.sequence_index));
    let summary = log.summary();
    (log, summary)
}

// ---------------------------------------------------------------------------
// timestamps

/// Parses a timestamp. Without a format string the value must be RFC 3339.
/// With a format, zoned formats are tried first, then naive date-times and
/// dates, which are interpreted as UTC.
pub fn parse_timestamp(value: &str, format: Option<&str>) -> Option<DateTime<Utc>> {
    let value = value.trim();
    match format {
        None => DateTime::parse_from_rfc3339(value)
            .ok()
            .map(|t| t.with_timezone(&Utc)),
        Some(fmt) => DateTime::parse_from_str(value, fmt)
            .map(|t| t.with_timezone(&Utc))
            .ok()
            .or_else(|| NaiveDateTime::parse_from_str(value, fmt).ok().map(|t| t.and_utc()))
            .or_else(|| {
                NaiveDate::parse_from_str(value, fmt)
                    .ok()
                    .and_then(|d| d.and_hms_opt(0, 0, 0))
                    .map(|t| t.and_utc())
            }),
    }
}

/// Canonical timestamp rendering used by every writer in this crate.
pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

// ---------------------------------------------------------------------------
// CSV

/// Which CSV columns hold the event fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub case: String,
    pub activity: String,
    pub timestamp: String,
    pub actor: String,
    /// Extra columns read as case attributes (first non-empty value per case).
    #[serde(default)]
    pub attributes: Vec<String>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            case: "case".into(),
            activity: "activity".into(),
            timestamp: "timestamp".into(),
            actor: "actor".into(),
            attributes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    pub mapping: ColumnMapping,
    pub delimiter: u8,
    /// `None` means RFC 3339.
    pub timestamp_format: Option<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            mapping: ColumnMapping::default(),
            delimiter: b',',
            timestamp_format: None,
        }
    }
}

pub fn parse_csv<R: Read>(source: R, options: &CsvOptions) -> Result<EventLog, EventLogError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(source);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let locate = |name: &str| headers.iter().position(|h| h == name);

    let m = &options.mapping;
    let mut missing = Vec::new();
    let mut find = |name: &String| {
        let idx = locate(name);
        if idx.is_none() {
            missing.push(name.clone());
        }
        idx
    };
    let case_col = find(&m.case);
    let act_col = find(&m.activity);
    let ts_col = find(&m.timestamp);
    let actor_col = find(&m.actor);
    let attr_cols: Vec<(String, Option<usize>)> =
        m.attributes.iter().map(|a| (a.clone(), find(a))).collect();
    if !missing.is_empty() {
        return Err(EventLogError::Schema {
            missing,
            available: headers,
        });
    }
    let (case_col, act_col, ts_col, actor_col) = (
        case_col.unwrap(),
        act_col.unwrap(),
        ts_col.unwrap(),
        actor_col.unwrap(),
    );

    let mut log = EventLog::default();
    for (name, _) in &attr_cols {
        log.attribute_names.insert(name.clone());
    }
    let mut bad = Vec::new();
    let mut bad_count = 0usize;
    let fmt = options.timestamp_format.as_deref();

    for (ordinal, record) in reader.records().enumerate() {
        let record = record?;
        let row = record.position().map_or(ordinal + 2, |p| p.line() as usize);
        let field = |i: usize| record.get(i).unwrap_or("");
        let ts_raw = field(ts_col);
        let Some(timestamp) = parse_timestamp(ts_raw, fmt) else {
            bad_count += 1;
            if bad.len() < MAX_REPORTED_ROWS {
                bad.push((row, ts_raw.to_string()));
            }
            continue;
        };
        let case_id = field(case_col).trim();
        if case_id.is_empty() {
            return Err(EventLogError::EmptyField {
                row,
                field: m.case.clone(),
            });
        }
        let activity = field(act_col).trim();
        if activity.is_empty() {
            return Err(EventLogError::EmptyField {
                row,
                field: m.activity.clone(),
            });
        }
        let actor = Some(field(actor_col).trim())
            .filter(|a| !a.is_empty())
            .map(str::to_string);
        for (name, idx) in &attr_cols {
            let v = field(idx.unwrap()).trim();
            if !v.is_empty() {
                log.set_case_attribute(case_id, name, v);
            }
        }
        log.events.push(Event {
            case_id: case_id.to_string(),
            activity: activity.to_string(),
            timestamp,
            actor,
            sequence_index: ordinal,
        });
    }

    if bad_count > 0 {
        return Err(EventLogError::BadTimestamps {
            count: bad_count,
            first: bad,
        });
    }
    if log.events.is_empty() {
        return Err(EventLogError::Empty);
    }
    Ok(log)
}

/// Writes the canonical CSV form: `case,activity,timestamp,actor` followed by
/// one column per case attribute (repeated on every row of the case).
pub fn write_csv<W: Write>(log: &EventLog, sink: W) -> Result<(), EventLogError> {
    let mut w = csv::Writer::from_writer(sink);
    let attrs: Vec<&String> = log.attribute_names.iter().collect();
    let mut header = vec!["case", "activity", "timestamp", "actor"];
    header.extend(attrs.iter().map(|s| s.as_str()));
    w.write_record(&header)?;
    for e in &log.events {
        let mut row = vec![
            e.case_id.clone(),
            e.activity.clone(),
            format_timestamp(&e.timestamp),
            e.actor.clone().unwrap_or_default(),
        ];
        for a in &attrs {
            row.push(log.case_attribute(&e.case_id, a).unwrap_or("").to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Options matching the output of [`write_csv`] for a given log.
pub fn canonical_csv_options(log: &EventLog) -> CsvOptions {
    CsvOptions {
        mapping: ColumnMapping {
            attributes: log.attribute_names.iter().cloned().collect(),
            ..ColumnMapping::default()
        },
        ..CsvOptions::default()
    }
}

// ---------------------------------------------------------------------------
// XES

#[derive(Default)]
struct PendingEvent {
    activity: Option<String>,
    timestamp: Option<String>,
    actor: Option<String>,
}

#[derive(Default)]
struct PendingTrace {
    name: Option<String>,
    attributes: Vec<(String, String)>,
    events: Vec<PendingEvent>,
}

const XES_ATTRIBUTE_TAGS: [&[u8]; 6] = [b"string", b"date", b"int", b"float", b"boolean", b"id"];

fn xml_error<R>(reader: &Reader<R>, message: impl ToString) -> EventLogError {
    EventLogError::Xml {
        offset: reader.buffer_position(),
        message: message.to_string(),
    }
}

fn key_value<R>(reader: &Reader<R>, tag: &BytesStart<'_>) -> Result<(String, String), EventLogError> {
    let mut key = None;
    let mut value = None;
    for attr in tag.attributes() {
        let attr = attr.map_err(|e| xml_error(reader, e))?;
        let v = attr
            .unescape_value()
            .map_err(|e| xml_error(reader, e))?
            .into_owned();
        match attr.key.as_ref() {
            b"key" => key = Some(v),
            b"value" => value = Some(v),
            _ => {}
        }
    }
    Ok((key.unwrap_or_default(), value.unwrap_or_default()))
}

/// Parses the `concept`, `time` and `org` extensions of an XES document.
///
/// Trace-level attributes become case attributes. Event-level attributes other
/// than `concept:name`, `time:timestamp` and `org:resource` are ignored, as
/// are nested (meta) attributes, globals, classifiers and extensions.
pub fn parse_xes<R: BufRead>(source: R) -> Result<EventLog, EventLogError> {
    let mut reader = Reader::from_reader(source);
    let mut buf = Vec::new();

    let mut trace: Option<PendingTrace> = None;
    let mut event: Option<PendingEvent> = None;
    // depth of open non-empty attribute elements; only depth 0 attributes count
    let mut attr_depth = 0usize;
    let mut traces: Vec<PendingTrace> = Vec::new();
    let mut saw_log = false;

    loop {
        let ev = reader
            .read_event_into(&mut buf)
            .map_err(|e| xml_error(&reader, e))?;
        match ev {
            XmlEvent::Eof => break,
            XmlEvent::Start(tag) => match tag.local_name().as_ref() {
                b"log" => saw_log = true,
                b"trace" if attr_depth == 0 => {
                    if trace.is_some() {
                        return Err(xml_error(&reader, "nested <trace>"));
                    }
                    trace = Some(PendingTrace::default());
                }
                b"event" if attr_depth == 0 => {
                    if trace.is_none() || event.is_some() {
                        return Err(xml_error(&reader, "<event> outside of <trace>"));
                    }
                    event = Some(PendingEvent::default());
                }
                name => {
                    if XES_ATTRIBUTE_TAGS.contains(&name) && attr_depth == 0 {
                        let kv = key_value(&reader, &tag)?;
                        absorb_attribute(&mut trace, &mut event, kv);
                    }
                    attr_depth += 1;
                }
            },
            XmlEvent::Empty(tag) => {
                let name = tag.local_name();
                if XES_ATTRIBUTE_TAGS.contains(&name.as_ref()) && attr_depth == 0 {
                    let kv = key_value(&reader, &tag)?;
                    absorb_attribute(&mut trace, &mut event, kv);
                } else if name.as_ref() == b"event" && attr_depth == 0 {
                    if let Some(t) = trace.as_mut() {
                        t.events.push(PendingEvent::default());
                    }
                }
            }
            XmlEvent::End(tag) => match tag.local_name().as_ref() {
                b"event" if attr_depth == 0 => {
                    let e = event
                        .take()
                        .ok_or_else(|| xml_error(&reader, "unbalanced </event>"))?;
                    trace.as_mut().expect("event inside trace").events.push(e);
                }
                b"trace" if attr_depth == 0 => {
                    let t = trace
                        .take()
                        .ok_or_else(|| xml_error(&reader, "unbalanced </trace>"))?;
                    traces.push(t);
                }
                b"log" => {}
                _ => attr_depth = attr_depth.saturating_sub(1),
            },
            _ => {}
        }
        buf.clear();
    }
    if !saw_log {
        return Err(xml_error(&reader, "document has no <log> element"));
    }
    if trace.is_some() || event.is_some() {
        return Err(xml_error(&reader, "unexpected end of document"));
    }

    let mut log = EventLog::default();
    let mut bad = Vec::new();
    let mut bad_count = 0usize;
    let mut ordinal = 0usize;
    for (trace_no, t) in traces.into_iter().enumerate() {
        let case_id = match t.name.filter(|n| !n.trim().is_empty()) {
            Some(n) => n,
            None => {
                log.synthesized_case_ids += 1;
                format!("trace_{}", trace_no + 1)
            }
        };
        for (k, v) in &t.attributes {
            log.set_case_attribute(&case_id, k, v);
        }
        for e in t.events {
            let seq = ordinal;
            ordinal += 1;
            let raw = e.timestamp.unwrap_or_default();
            let Some(timestamp) = parse_timestamp(&raw, None) else {
                bad_count += 1;
                if bad.len() < MAX_REPORTED_ROWS {
                    bad.push((seq + 1, raw));
                }
                continue;
            };
            let activity = e.activity.unwrap_or_default();
            if activity.trim().is_empty() {
                return Err(EventLogError::EmptyField {
                    row: seq + 1,
                    field: "concept:name".into(),
                });
            }
            log.events.push(Event {
                case_id: case_id.clone(),
                activity,
                timestamp,
                actor: e.actor.filter(|a| !a.trim().is_empty()),
                sequence_index: seq,
            });
        }
    }
    if bad_count > 0 {
        return Err(EventLogError::BadTimestamps {
            count: bad_count,
            first: bad,
        });
    }
    if log.events.is_empty() {
        return Err(EventLogError::Empty);
    }
    Ok(log)
}

fn absorb_attribute(
    trace: &mut Option<PendingTrace>,
    event: &mut Option<PendingEvent>,
    (key, value): (String, String),
) {
    if let Some(e) = event.as_mut() {
        match key.as_str() {
            "concept:name" => e.activity = Some(value),
            "time:timestamp" => e.timestamp = Some(value),
            "org:resource" => e.actor = Some(value),
            _ => {}
        }
    } else if let Some(t) = trace.as_mut() {
        if key == "concept:name" {
            t.name = Some(value);
        } else {
            t.attributes.push((key, value));
        }
    }
}

fn xml_escape(s: &str) -> String {
    quick_xml::escape::escape(s).into_owned()
}

/// Writes a minimal XES document, one `<trace>` per case in order of first
/// appearance. Case attributes are emitted as `string` attributes.
pub fn write_xes<W: Write>(log: &EventLog, mut sink: W) -> Result<(), EventLogError> {
    writeln!(sink, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(sink, r#"<log xes.version="1.0">"#)?;
    writeln!(sink, r#"  <extension name="Concept" prefix="concept" uri="http://www.xes-standard.org/concept.xesext"/>"#)?;
    writeln!(sink, r#"  <extension name="Time" prefix="time" uri="http://www.xes-standard.org/time.xesext"/>"#)?;
    writeln!(sink, r#"  <extension name="Organizational" prefix="org" uri="http://www.xes-standard.org/org.xesext"/>"#)?;
    for trace in log.traces() {
        writeln!(sink, "  <trace>")?;
        writeln!(
            sink,
            r#"    <string key="concept:name" value="{}"/>"#,
            xml_escape(trace.case_id)
        )?;
        if let Some(attrs) = log.case_attributes.get(trace.case_id) {
            for (k, v) in attrs {
                writeln!(
                    sink,
                    r#"    <string key="{}" value="{}"/>"#,
                    xml_escape(k),
                    xml_escape(v)
                )?;
            }
        }
        for &p in &trace.positions {
            let e = &log.events[p];
            writeln!(sink, "    <event>")?;
            writeln!(
                sink,
                r#"      <string key="concept:name" value="{}"/>"#,
                xml_escape(&e.activity)
            )?;
            writeln!(
                sink,
                r#"      <date key="time:timestamp" value="{}"/>"#,
                format_timestamp(&e.timestamp)
            )?;
            if let Some(a) = &e.actor {
                writeln!(
                    sink,
                    r#"      <string key="org:resource" value="{}"/>"#,
                    xml_escape(a)
                )?;
            }
            writeln!(sink, "    </event>")?;
        }
        writeln!(sink, "  </trace>")?;
    }
    writeln!(sink, "</log>")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn opts(case: &str, act: &str, ts: &str, res: &str) -> CsvOptions {
        CsvOptions {
            mapping: ColumnMapping {
                case: case.into(),
                activity: act.into(),
                timestamp: ts.into(),
                actor: res.into(),
                attributes: vec![],
            },
            ..CsvOptions::default()
        }
    }

    #[test]
    fn three_rows_in_file_order() {
        let data = "case,act,ts,res\n\
                    1,A,2020-01-02T00:00:00Z,u1\n\
                    1,B,2020-01-01T00:00:00Z,u2\n\
                    2,A,2020-01-03T10:00:00+02:00,\n";
        let log = parse_csv(data.as_bytes(), &opts("case", "act", "ts", "res")).unwrap();
        assert_eq!(log.len(), 3);
        let acts: Vec<_> = log.events().iter().map(|e| e.activity.as_str()).collect();
        assert_eq!(acts, ["A", "B", "A"]);
        assert_eq!(log.events()[2].actor, None);
        assert_eq!(
            log.events()[2].timestamp,
            Utc.with_ymd_and_hms(2020, 1, 3, 8, 0, 0).unwrap()
        );
        assert_eq!(log.missing_actor_count(), 1);
    }

    #[test]
    fn header_only_is_empty_log() {
        let err = parse_csv("case,act,ts,res\n".as_bytes(), &opts("case", "act", "ts", "res"))
            .unwrap_err();
        assert!(matches!(err, EventLogError::Empty));
    }

    #[test]
    fn missing_column_is_schema_error() {
        let err = parse_csv("case,act,time,res\n".as_bytes(), &opts("case", "act", "ts", "res"))
            .unwrap_err();
        match err {
            EventLogError::Schema { missing, .. } => assert_eq!(missing, vec!["ts".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_timestamps_report_first_ten_rows() {
        let mut data = String::from("case,act,ts,res\n");
        for i in 0..15 {
            data.push_str(&format!("c{i},A,not-a-date-{i},u\n"));
        }
        data.push_str("c,A,2020-01-01T00:00:00Z,u\n");
        let err = parse_csv(data.as_bytes(), &opts("case", "act", "ts", "res")).unwrap_err();
        match err {
            EventLogError::BadTimestamps { count, first } => {
                assert_eq!(count, 15);
                assert_eq!(first.len(), 10);
                assert_eq!(first[0].0, 2);
                assert_eq!(first[9].0, 11);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn custom_timestamp_format() {
        let data = "case;act;ts;res\n1;A;2011/03/04 10:11:12;u\n2;B;2011/03/05;u\n";
        let mut o = opts("case", "act", "ts", "res");
        o.delimiter = b';';
        o.timestamp_format = Some("%Y/%m/%d %H:%M:%S".into());
        let log = parse_csv(data.as_bytes(), &o);
        // the second row does not match the full format
        assert!(matches!(log, Err(EventLogError::BadTimestamps { count: 1, .. })));
        o.timestamp_format = Some("%Y/%m/%d".into());
        let log = parse_csv("case;act;ts;res\n2;B;2011/03/05;u\n".as_bytes(), &o).unwrap();
        assert_eq!(
            log.events()[0].timestamp,
            Utc.with_ymd_and_hms(2011, 3, 5, 0, 0, 0).unwrap()
        );
    }

    #[test]
    fn attribute_columns_become_case_attributes() {
        let data = "case,act,ts,res,gr\n1,A,2020-01-01T00:00:00Z,u,\n1,B,2020-01-01T01:00:00Z,u,true\n";
        let mut o = opts("case", "act", "ts", "res");
        o.mapping.attributes = vec!["gr".into()];
        let log = parse_csv(data.as_bytes(), &o).unwrap();
        assert_eq!(log.case_attribute("1", "gr"), Some("true"));
        assert!(log.has_attribute("gr"));
    }

    #[test]
    fn ties_keep_file_order_and_sort_is_idempotent() {
        let t = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
        let mk = |case: &str, seq: usize, secs: i64| Event {
            case_id: case.into(),
            activity: "A".into(),
            timestamp: t + chrono::Duration::seconds(secs),
            actor: Some("u".into()),
            sequence_index: seq,
        };
        let log = EventLog::new(vec![mk("b", 0, 5), mk("a", 1, 5), mk("c", 2, 1)]);
        let (sorted, summary) = validate_and_sort(log);
        let cases: Vec<_> = sorted.events().iter().map(|e| e.case_id.as_str()).collect();
        assert_eq!(cases, ["c", "b", "a"]);
        assert_eq!(summary.cases, 3);
        let (again, _) = validate_and_sort(sorted.clone());
        assert_eq!(again, sorted);
    }

    const MINIMAL_XES: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<log xes.version="1.0">
  <extension name="Concept" prefix="concept" uri="http://www.xes-standard.org/concept.xesext"/>
  <global scope="event"><string key="concept:name" value="__INVALID__"/></global>
  <classifier name="Activity" keys="concept:name"/>
  <trace>
    <string key="concept:name" value="case-1"/>
    <boolean key="goods_received" value="true"/>
    <event>
      <string key="concept:name" value="Create &amp; check"/>
      <date key="time:timestamp" value="2019-01-01T10:00:00.000+01:00"/>
      <string key="org:resource" value="alice"/>
      <string key="lifecycle:transition" value="complete"/>
    </event>
    <event>
      <string key="concept:name" value="Approve"/>
      <date key="time:timestamp" value="2019-01-02T10:00:00.000+01:00"/>
      <list key="meta"><string key="org:resource" value="nested-ignored"/></list>
    </event>
  </trace>
  <trace>
    <event>
      <string key="concept:name" value="Solo"/>
      <date key="time:timestamp" value="2019-01-03T00:00:00Z"/>
      <string key="org:resource" value="bob"/>
    </event>
  </trace>
</log>"#;

    #[test]
    fn minimal_xes() {
        let log = parse_xes(MINIMAL_XES.as_bytes()).unwrap();
        assert_eq!(log.len(), 3);
        let e0 = &log.events()[0];
        assert_eq!(e0.case_id, "case-1");
        assert_eq!(e0.activity, "Create & check");
        assert_eq!(e0.actor.as_deref(), Some("alice"));
        assert_eq!(e0.timestamp, Utc.with_ymd_and_hms(2019, 1, 1, 9, 0, 0).unwrap());
        // org:resource nested in a list is a meta attribute, not the event's actor
        assert_eq!(log.events()[1].actor, None);
        assert_eq!(log.missing_actor_count(), 1);
        assert_eq!(log.events()[2].case_id, "trace_2");
        assert_eq!(log.synthesized_case_ids(), 1);
        assert_eq!(log.case_attribute("case-1", "goods_received"), Some("true"));
    }

    #[test]
    fn xes_event_without_timestamp_is_rejected() {
        let doc = r#"<log><trace><string key="concept:name" value="c"/><event><string key="concept:name" value="A"/></event></trace></log>"#;
        assert!(matches!(
            parse_xes(doc.as_bytes()),
            Err(EventLogError::BadTimestamps { count: 1, .. })
        ));
    }

    #[test]
    fn malformed_xml_reports_offset() {
        let doc = "<log><trace><event></trace></log>";
        match parse_xes(doc.as_bytes()) {
            Err(EventLogError::Xml { offset, .. }) => assert!(offset > 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_writer_round_trips() {
        let log = parse_xes(MINIMAL_XES.as_bytes()).unwrap();
        let (log, _) = validate_and_sort(log);
        let mut buf = Vec::new();
        write_csv(&log, &mut buf).unwrap();
        let reparsed = parse_csv(buf.as_slice(), &canonical_csv_options(&log)).unwrap();
        let (reparsed, _) = validate_and_sort(reparsed);
        let strip = |l: &EventLog| -> Vec<(String, String, DateTime<Utc>, Option<String>)> {
            l.events()
                .iter()
                .map(|e| (e.case_id.clone(), e.activity.clone(), e.timestamp, e.actor.clone()))
                .collect()
        };
        assert_eq!(strip(&reparsed), strip(&log));
        assert_eq!(reparsed.case_attribute("case-1", "goods_received"), Some("true"));
    }
}
