//! Dataset records, hallucination levels, and dataset-level bookkeeping.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Keys every dataset line must carry, in the order they are checked.
pub const REQUIRED_FIELDS: [&str; 6] = [
    "record_id",
    "group_id",
    "query",
    "is_paraphrase",
    "generated_response",
    "ground_truth",
];

/// Degree of factual misalignment of a response. Integer coding is fixed:
/// Low = 1, Medium = 2, High = 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HallucinationLevel {
    Low,
    Medium,
    High,
}

impl HallucinationLevel {
    pub const ALL: [HallucinationLevel; 3] = [Self::Low, Self::Medium, Self::High];

    pub fn code(self) -> u8 {
        match self {
            Self::Low => 1,
            Self::Medium => 2,
            Self::High => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Self::Low),
            2 => Some(Self::Medium),
            3 => Some(Self::High),
            _ => None,
        }
    }

    /// Zero-based index, used for matrix layouts.
    pub fn index(self) -> usize {
        self.code() as usize - 1
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Low => "Low",
            Self::Medium => "Medium",
            Self::High => "High",
        }
    }
}

impl fmt::Display for HallucinationLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One dataset row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub record_id: String,
    pub group_id: String,
    pub query: String,
    pub is_paraphrase: bool,
    pub generated_response: String,
    pub ground_truth: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub computed_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub computed_level: Option<HallucinationLevel>,
}

impl QueryRecord {
    fn validate(&self, line: usize) -> Result<()> {
        if let Some(probs) = &self.token_probs {
            if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidField {
                    line,
                    field: "token_probs".into(),
                    message: format!("probability {bad} outside [0, 1]"),
                });
            }
        }
        if let Some(score) = self.computed_score {
            if !(0.0..=1.0).contains(&score) {
                return Err(Error::InvalidField {
                    line,
                    field: "computed_score".into(),
                    message: format!("{score} outside [0, 1]"),
                });
            }
        }
        Ok(())
    }
}

/// Parses a JSONL dataset, one record object per non-empty line.
///
/// Line numbers in errors are 1-based physical line numbers.
pub fn parse_dataset<R: BufRead>(reader: R) -> Result<Vec<QueryRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::MalformedRecord {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record_line(&line, line_no)?;
        if !seen.insert(record.record_id.clone()) {
            return Err(Error::DuplicateRecord {
                line: line_no,
                record_id: record.record_id,
            });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn parse_dataset_str(text: &str) -> Result<Vec<QueryRecord>> {
    parse_dataset(text.as_bytes())
}

fn parse_record_line(line: &str, line_no: usize) -> Result<QueryRecord> {
    let value: Value = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
        line: line_no,
        message: e.to_string(),
    })?;
    let Value::Object(map) = &value else {
        return Err(Error::MalformedRecord {
            line: line_no,
            message: "expected a JSON object".into(),
        });
    };
    for field in REQUIRED_FIELDS {
        if !map.contains_key(field) {
            return Err(Error::MissingField {
                line: line_no,
                field: field.into(),
            });
        }
    }
    let record: QueryRecord =
        serde_json::from_value(value).map_err(|e| Error::MalformedRecord {
            line: line_no,
            message: e.to_string(),
        })?;
    record.validate(line_no)?;
    Ok(record)
}

/// Serializes records as JSONL, one object per line.
pub fn write_dataset(records: &[QueryRecord]) -> Result<String> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record)?);
        out.push('\n');
    }
    Ok(out)
}

/// Partitions records by `group_id`. Within a group, input order is kept.
pub fn group_paraphrases(records: &[QueryRecord]) -> BTreeMap<&str, Vec<&QueryRecord>> {
    let mut groups: BTreeMap<&str, Vec<&QueryRecord>> = BTreeMap::new();
    for record in records {
        groups.entry(record.group_id.as_str()).or_default().push(record);
    }
    groups
}

/// Bucket name for records without a `computed_level`.
pub const UNCLASSIFIED: &str = "Unclassified";

/// Dataset composition counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    /// Original (non-paraphrased) queries.
    pub total_queries: usize,
    pub total_paraphrased: usize,
    pub total_responses: usize,
    /// Keys: `Low`, `Medium`, `High`, `Unclassified`. Always all four.
    pub level_counts: BTreeMap<String, usize>,
}

impl DatasetSummary {
    pub fn count(&self, level: HallucinationLevel) -> usize {
        self.level_counts.get(level.as_str()).copied().unwrap_or(0)
    }
}

pub fn summarize_dataset(records: &[QueryRecord]) -> DatasetSummary {
    let mut level_counts: BTreeMap<String, usize> = HallucinationLevel::ALL
        .iter()
        .map(|l| (l.as_str().to_string(), 0))
        .collect();
    level_counts.insert(UNCLASSIFIED.to_string(), 0);

    let mut total_paraphrased = 0;
    for record in records {
        if record.is_paraphrase {
            total_paraphrased += 1;
        }
        let key = record
            .computed_level
            .map(HallucinationLevel::as_str)
            .unwrap_or(UNCLASSIFIED);
        *level_counts.get_mut(key).expect("bucket preseeded") += 1;
    }
    DatasetSummary {
        total_queries: records.len() - total_paraphrased,
        total_paraphrased,
        total_responses: records.len(),
        level_counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FULL_LINE: &str = r#"{"record_id":"r1","group_id":"g1","query":"What is the band gap of TiO2?","is_paraphrase":false,"generated_response":"TiO2 has a band gap of 3.2 eV.","ground_truth":"TiO2 has a band gap of 3.2 eV.","token_probs":[0.9,0.5,0.7],"computed_score":0.91,"computed_level":"Low"}"#;

    fn record(id: &str, group: &str) -> QueryRecord {
        QueryRecord {
            record_id: id.into(),
            group_id: group.into(),
            query: format!("query {id}"),
            is_paraphrase: false,
            generated_response: "resp".into(),
            ground_truth: "truth".into(),
            token_probs: None,
            computed_score: None,
            computed_level: None,
        }
    }

    #[test]
    fn empty_stream_parses_to_nothing() {
        assert!(parse_dataset_str("").unwrap().is_empty());
        assert!(parse_dataset_str("\n\n  \n").unwrap().is_empty());
    }

    #[test]
    fn full_record_round_trips_byte_exactly() {
        let records = parse_dataset_str(FULL_LINE).unwrap();
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.record_id, "r1");
        assert_eq!(r.token_probs.as_deref(), Some(&[0.9, 0.5, 0.7][..]));
        assert_eq!(r.computed_level, Some(HallucinationLevel::Low));
        assert_eq!(write_dataset(&records).unwrap(), format!("{FULL_LINE}\n"));
    }

    #[test]
    fn missing_ground_truth_names_field_and_line() {
        let line = r#"{"record_id":"r1","group_id":"g1","query":"q","is_paraphrase":false,"generated_response":"a"}"#;
        let err = parse_dataset_str(line).unwrap_err();
        match &err {
            Error::MissingField { line, field } => {
                assert_eq!(*line, 1);
                assert_eq!(field, "ground_truth");
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert!(err.to_string().contains("ground_truth"));
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = format!("{FULL_LINE}\n\n{{not json");
        match parse_dataset_str(&text).unwrap_err() {
            Error::MalformedRecord { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn duplicate_record_id_is_rejected() {
        let text = format!("{FULL_LINE}\n{FULL_LINE}\n");
        match parse_dataset_str(&text).unwrap_err() {
            Error::DuplicateRecord { line, record_id } => {
                assert_eq!(line, 2);
                assert_eq!(record_id, "r1");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn out_of_range_probability_is_rejected() {
        let line = FULL_LINE.replace("0.5,0.7", "1.5,0.7");
        assert!(matches!(
            parse_dataset_str(&line).unwrap_err(),
            Error::InvalidField { ref field, .. } if field == "token_probs"
        ));
        let line = FULL_LINE.replace("0.91", "-0.1");
        assert!(matches!(
            parse_dataset_str(&line).unwrap_err(),
            Error::InvalidField { ref field, .. } if field == "computed_score"
        ));
    }

    #[test]
    fn unknown_level_is_malformed() {
        let line = FULL_LINE.replace("\"Low\"", "\"Severe\"");
        assert!(matches!(
            parse_dataset_str(&line).unwrap_err(),
            Error::MalformedRecord { line: 1, .. }
        ));
    }

    #[test]
    fn level_coding_and_order() {
        assert!(HallucinationLevel::Low < HallucinationLevel::Medium);
        assert!(HallucinationLevel::Medium < HallucinationLevel::High);
        for level in HallucinationLevel::ALL {
            assert_eq!(HallucinationLevel::from_code(level.code()), Some(level));
        }
        assert_eq!(HallucinationLevel::High.code(), 3);
        assert_eq!(HallucinationLevel::from_code(0), None);
    }

    #[test]
    fn grouping_partitions_in_input_order() {
        let records = vec![record("r1", "a"), record("r2", "a"), record("r3", "b")];
        let groups = group_paraphrases(&records);
        assert_eq!(groups.len(), 2);
        let a: Vec<_> = groups["a"].iter().map(|r| r.record_id.as_str()).collect();
        assert_eq!(a, ["r1", "r2"]);
        assert_eq!(groups["b"][0].record_id, "r3");

        let distinct = vec![record("r1", "x"), record("r2", "y")];
        assert!(group_paraphrases(&distinct).values().all(|g| g.len() == 1));
        assert!(group_paraphrases(&[]).is_empty());
    }

    #[test]
    fn summary_counts() {
        let mut high = record("r1", "a");
        high.computed_level = Some(HallucinationLevel::High);
        let mut low = record("r2", "a");
        low.computed_level = Some(HallucinationLevel::Low);
        let summary = summarize_dataset(&[high, low]);
        assert_eq!(summary.total_responses, 2);
        assert_eq!(summary.count(HallucinationLevel::High), 1);
        assert_eq!(summary.count(HallucinationLevel::Low), 1);
        assert_eq!(summary.count(HallucinationLevel::Medium), 0);

        let empty = summarize_dataset(&[]);
        assert_eq!(empty.total_queries, 0);
        assert_eq!(empty.total_responses, 0);
        assert!(empty.level_counts.values().all(|&c| c == 0));

        let mut records: Vec<_> = (0..4).map(|i| record(&format!("r{i}"), "g")).collect();
        records[1].is_paraphrase = true;
        records[3].is_paraphrase = true;
        let summary = summarize_dataset(&records);
        assert_eq!(summary.total_paraphrased, 2);
        assert_eq!(summary.total_queries, 2);
        assert_eq!(summary.level_counts[UNCLASSIFIED], 4);
    }

    fn arb_record() -> impl Strategy<Value = QueryRecord> {
        (
            "[a-z0-9]{1,6}",
            "[a-c]",
            ".{0,20}",
            any::<bool>(),
            ".{0,30}",
            ".{0,30}",
            proptest::option::of(proptest::collection::vec(0.0f64..=1.0, 0..5)),
            proptest::option::of(0.0f64..=1.0),
            proptest::option::of(0u8..3),
        )
            .prop_map(|(id, group, query, para, resp, truth, probs, score, level)| QueryRecord {
                record_id: id,
                group_id: group,
                query,
                is_paraphrase: para,
                generated_response: resp,
                ground_truth: truth,
                token_probs: probs,
                computed_score: score,
                computed_level: level.and_then(|c| HallucinationLevel::from_code(c + 1)),
            })
    }

    proptest! {
        #[test]
        fn serialize_parse_is_identity(records in proptest::collection::vec(arb_record(), 0..8)) {
            let mut seen = HashSet::new();
            let records: Vec<_> = records.into_iter().filter(|r| seen.insert(r.record_id.clone())).collect();
            let text = write_dataset(&records).unwrap();
            let parsed = parse_dataset_str(&text).unwrap();
            prop_assert_eq!(&parsed, &records);
            prop_assert_eq!(write_dataset(&parsed).unwrap(), text);
        }

        #[test]
        fn groups_partition_input(records in proptest::collection::vec(arb_record(), 0..20)) {
            let groups = group_paraphrases(&records);
            let total: usize = groups.values().map(Vec::len).sum();
            prop_assert_eq!(total, records.len());
            for (gid, members) in &groups {
                prop_assert!(members.iter().all(|r| r.group_id == *gid));
                // input order preserved: members appear as a subsequence
                let positions: Vec<usize> = members
                    .iter()
                    .map(|m| records.iter().position(|r| std::ptr::eq(r, *m)).unwrap())
                    .collect();
                prop_assert!(positions.windows(2).all(|w| w[0] < w[1]));
            }
        }

        #[test]
        fn summary_levels_sum_to_total(records in proptest::collection::vec(arb_record(), 0..20)) {
            let s = summarize_dataset(&records);
            prop_assert_eq!(s.level_counts.values().sum::<usize>(), s.total_responses);
            prop_assert_eq!(s.total_queries + s.total_paraphrased, s.total_responses);
        }
    }
}
