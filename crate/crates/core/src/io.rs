//! File formats.
//!
//! Performance tables are JSON documents:
//!
//! ```json
//! {
//!   "kind": "performance_table",
//!   "networks": [
//!     { "cost_msnt": 1000, "id": "sd@1000", "losses": { "d": 0.41, "s": 0.52 } }
//!   ],
//!   "schema_version": 1,
//!   "tasks": ["s", "d"]
//! }
//! ```
//!
//! [`serialize_table`] writes keys sorted, two-space indentation, shortest
//! round-trip floats and a trailing newline; parsing that output and
//! serialising again gives the same bytes.
//!
//! Relation matrices are comma-separated text with a mandatory header,
//! either `trained_with,performance_on,value` (directed) or
//! `task_a,task_b,affinity`. Task order is the order of first appearance.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::analysis::{AffinityMatrix, AnalysisError, PairwiseRelationMatrix, Relation};
use crate::model::{CandidateNetwork, ModelError, PerformanceTable, TaskSet};

pub const SCHEMA_VERSION: u32 = 1;
pub const TABLE_KIND: &str = "performance_table";

pub const DIRECTED_HEADER: [&str; 3] = ["trained_with", "performance_on", "value"];
pub const AFFINITY_HEADER: [&str; 3] = ["task_a", "task_b", "affinity"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("parse error at {location}: {reason}")]
    Parse { location: String, reason: String },
    #[error("validation error: {0}")]
    Validation(String),
}

impl From<ModelError> for FormatError {
    fn from(e: ModelError) -> Self {
        FormatError::Validation(e.to_string())
    }
}

impl From<AnalysisError> for FormatError {
    fn from(e: AnalysisError) -> Self {
        FormatError::Validation(e.to_string())
    }
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Parse {
            location: format!("line {}, column {}", e.line(), e.column()),
            reason: e.to_string(),
        }
    }
}

/// Loss map that refuses duplicate keys.
#[derive(Debug, Serialize)]
#[serde(transparent)]
struct Losses(BTreeMap<String, f64>);

impl<'de> Deserialize<'de> for Losses {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct LossVisitor;

        impl<'de> Visitor<'de> for LossVisitor {
            type Value = Losses;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from task id to loss")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Losses, A::Error> {
                let mut out = BTreeMap::new();
                while let Some((k, v)) = map.next_entry::<String, f64>()? {
                    if out.contains_key(&k) {
                        return Err(serde::de::Error::custom(format!("duplicate task {k:?}")));
                    }
                    out.insert(k, v);
                }
                Ok(Losses(out))
            }
        }

        deserializer.deserialize_map(LossVisitor)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkRecord {
    cost_msnt: u64,
    id: String,
    losses: Losses,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    kind: String,
    networks: Vec<NetworkRecord>,
    schema_version: u32,
    tasks: Vec<String>,
}

pub fn parse_table(bytes: &[u8]) -> Result<PerformanceTable, FormatError> {
    let file: TableFile = serde_json::from_slice(bytes)?;
    if file.kind != TABLE_KIND {
        return Err(FormatError::Validation(format!(
            "expected kind {TABLE_KIND:?}, got {:?}",
            file.kind
        )));
    }
    if file.schema_version != SCHEMA_VERSION {
        return Err(FormatError::Validation(format!(
            "unsupported schema_version {}",
            file.schema_version
        )));
    }
    let tasks = TaskSet::new(file.tasks)?;
    let networks = file
        .networks
        .into_iter()
        .map(|n| CandidateNetwork::new(n.id, n.cost_msnt, n.losses.0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PerformanceTable::new(tasks, networks)?)
}

pub fn serialize_table(table: &PerformanceTable) -> Vec<u8> {
    let file = TableFile {
        kind: TABLE_KIND.to_string(),
        networks: table
            .networks()
            .iter()
            .map(|n| NetworkRecord {
                cost_msnt: n.cost_msnt(),
                id: n.id().to_string(),
                losses: Losses(n.losses().clone()),
            })
            .collect(),
        schema_version: SCHEMA_VERSION,
        tasks: table.task_set().as_slice().to_vec(),
    };
    let mut out = serde_json::to_vec_pretty(&file).expect("table serialises");
    out.push(b'\n');
    out
}

fn csv_location(pos: Option<&csv::Position>) -> String {
    pos.map_or_else(|| "unknown position".to_string(), |p| format!("line {}", p.line()))
}

/// Parse a relation matrix; `label` names it in reports.
pub fn parse_matrix(bytes: &[u8], label: &str) -> Result<Relation, FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(bytes);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| FormatError::Parse {
            location: csv_location(e.position()),
            reason: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let directed = if header == DIRECTED_HEADER {
        true
    } else if header == AFFINITY_HEADER {
        false
    } else {
        return Err(FormatError::Validation(format!(
            "expected header {:?} or {:?}, got {header:?}",
            DIRECTED_HEADER.join(","),
            AFFINITY_HEADER.join(",")
        )));
    };
    let mut records = Vec::new();
    let mut order: Vec<String> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| FormatError::Parse {
            location: csv_location(e.position()),
            reason: e.to_string(),
        })?;
        let location = csv_location(record.position());
        if record.len() != 3 {
            return Err(FormatError::Parse {
                location,
                reason: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let value: f64 = record[2].parse().map_err(|_| FormatError::Parse {
            location: location.clone(),
            reason: format!("not a number: {:?}", &record[2]),
        })?;
        for t in [&record[0], &record[1]] {
            if !order.iter().any(|o| o == t) {
                order.push(t.to_string());
            }
        }
        records.push((record[0].to_string(), record[1].to_string(), value));
    }
    if order.len() < 2 {
        return Err(FormatError::Validation("matrix needs at least two tasks".into()));
    }
    let tasks = TaskSet::new(order)?;
    if directed {
        let mut m = PairwiseRelationMatrix::new(tasks, label);
        for (a, b, v) in records {
            m.insert(&a, &b, v)?;
        }
        Ok(Relation::Directed(m))
    } else {
        let mut m = AffinityMatrix::new(tasks, label);
        for (a, b, v) in records {
            m.insert(&a, &b, v)?;
        }
        Ok(Relation::Affinity(m))
    }
}

fn format_value(v: f64, precision: Option<usize>) -> String {
    match precision {
        Some(p) => format!("{v:.p$}"),
        None => format!("{v}"),
    }
}

/// Write a relation matrix as CSV. `precision` fixes the decimals; `None`
/// writes the shortest representation that parses back to the same value.
pub fn serialize_matrix(relation: &Relation, precision: Option<usize>) -> Vec<u8> {
    let mut out = String::new();
    match relation {
        Relation::Directed(m) => {
            out.push_str(&DIRECTED_HEADER.join(","));
            out.push('\n');
            for (a, b, v) in m.entries() {
                out.push_str(&format!("{a},{b},{}\n", format_value(v, precision)));
            }
        }
        Relation::Affinity(m) => {
            out.push_str(&AFFINITY_HEADER.join(","));
            out.push('\n');
            for (a, b, v) in m.entries() {
                out.push_str(&format!("{a},{b},{}\n", format_value(v, precision)));
            }
        }
    }
    out.into_bytes()
}

/// Parse a budget written in SNT (`"2.5"`) into milli-SNT. Digits beyond the
/// third decimal must be zero; nothing is rounded.
pub fn parse_snt(text: &str) -> Result<u64, FormatError> {
    let bad = |reason: &str| FormatError::Validation(format!("invalid SNT value {text:?}: {reason}"));
    let s = text.trim();
    let (whole, frac) = s.split_once('.').unwrap_or((s, ""));
    if whole.is_empty() && frac.is_empty() {
        return Err(bad("empty"));
    }
    if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad("expected a non-negative decimal number"));
    }
    if frac.len() > 3 && frac[3..].chars().any(|c| c != '0') {
        return Err(bad("finer than 0.001 SNT"));
    }
    let whole: u64 = if whole.is_empty() {
        0
    } else {
        whole.parse().map_err(|_| bad("too large"))?
    };
    let mut milli = 0u64;
    for (i, c) in frac.chars().take(3).enumerate() {
        milli += (c as u64 - '0' as u64) * 10u64.pow(2 - i as u32);
    }
    whole
        .checked_mul(1000)
        .and_then(|w| w.checked_add(milli))
        .ok_or_else(|| bad("too large"))
}

/// `2500` → `"2.5"`; at most three decimals, trailing zeros dropped.
pub fn format_snt(msnt: u64) -> String {
    let whole = msnt / 1000;
    let milli = msnt % 1000;
    if milli == 0 {
        return format!("{whole}");
    }
    let frac = format!("{milli:03}");
    format!("{whole}.{}", frac.trim_end_matches('0'))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "kind": "performance_table",
  "networks": [
    {
      "cost_msnt": 1000,
      "id": "s@1000",
      "losses": {
        "s": 0.25
      }
    }
  ],
  "schema_version": 1,
  "tasks": [
    "s"
  ]
}
"#;

    #[test]
    fn minimal_table_round_trips_bytewise() {
        let t = parse_table(MINIMAL.as_bytes()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(String::from_utf8(serialize_table(&t)).unwrap(), MINIMAL);
    }

    #[test]
    fn rejects_invalid_tables() {
        let dup_id = r#"{"kind": "performance_table", "schema_version": 1, "tasks": ["s"],
            "networks": [{"cost_msnt": 5, "id": "a", "losses": {"s": 1.0}},
                         {"cost_msnt": 6, "id": "a", "losses": {"s": 2.0}}]}"#;
        assert!(matches!(parse_table(dup_id.as_bytes()), Err(FormatError::Validation(_))));

        let cases = [
            MINIMAL.replace("\"s\": 0.25", "\"x\": 0.25"),
            MINIMAL.replace("\"s\": 0.25", "\"s\": -0.25"),
            MINIMAL.replace("\"cost_msnt\": 1000", "\"cost_msnt\": 0"),
            MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 2"),
            MINIMAL.replace("performance_table", "relation_matrix"),
        ];
        for c in cases {
            assert!(matches!(parse_table(c.as_bytes()), Err(FormatError::Validation(_))), "{c}");
        }
        let dup_key = MINIMAL.replace("\"s\": 0.25", "\"s\": 0.25, \"s\": 0.5");
        assert!(matches!(parse_table(dup_key.as_bytes()), Err(FormatError::Parse { .. })));
        let missing = MINIMAL.replace("\"schema_version\": 1,\n", "");
        assert!(matches!(parse_table(missing.as_bytes()), Err(FormatError::Parse { .. })));
        assert!(matches!(
            parse_table(b"trained_with,performance_on,value\n"),
            Err(FormatError::Parse { .. })
        ));
    }

    #[test]
    fn matrix_files() {
        let text = "trained_with,performance_on,value\na,b,1.5\nb,a,-0.5\n";
        let r = parse_matrix(text.as_bytes(), "m").unwrap();
        let Relation::Directed(m) = &r else { panic!() };
        assert_eq!(m.get("a", "b"), Some(1.5));
        assert_eq!(String::from_utf8(serialize_matrix(&r, None)).unwrap(), text);

        let aff = "task_a,task_b,affinity\na,b,0.5\n";
        assert!(matches!(parse_matrix(aff.as_bytes(), "x").unwrap(), Relation::Affinity(_)));

        assert!(matches!(
            parse_matrix(b"a,b,c\nx,y,1\n", "x"),
            Err(FormatError::Validation(_))
        ));
        assert!(matches!(
            parse_matrix(b"trained_with,performance_on,value\na,a,1\n", "x"),
            Err(FormatError::Validation(_))
        ));
        assert!(matches!(
            parse_matrix(b"trained_with,performance_on,value\na,b,1,5\n", "x"),
            Err(FormatError::Parse { .. })
        ));
        assert!(matches!(
            parse_matrix(b"trained_with,performance_on,value\na,b,x\n", "x"),
            Err(FormatError::Parse { .. })
        ));
        assert!(matches!(parse_matrix(MINIMAL.as_bytes(), "x"), Err(FormatError::Validation(_))));
    }

    #[test]
    fn snt_parsing_is_exact() {
        assert_eq!(parse_snt("2.5").unwrap(), 2500);
        assert_eq!(parse_snt("1").unwrap(), 1000);
        assert_eq!(parse_snt("0.125").unwrap(), 125);
        assert_eq!(parse_snt(".5").unwrap(), 500);
        assert_eq!(parse_snt("3.2500").unwrap(), 3250);
        for bad in ["", ".", "-1", "1e3", "2.0005", "abc", "1.2.3", "99999999999999999999"] {
            assert!(parse_snt(bad).is_err(), "{bad}");
        }
        assert_eq!(format_snt(2500), "2.5");
        assert_eq!(format_snt(1000), "1");
        assert_eq!(format_snt(125), "0.125");
    }
}
