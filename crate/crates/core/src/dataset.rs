//! Claims files: JSON-lines or CSV with columns
//! `id, headline, source, image_ref, veracity, topic`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Claim, ClaimId, Topic, Veracity};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: duplicate claim id `{id}`")]
    DuplicateId { id: String, line: u64 },
    #[error("unsupported claims format `{0}` (expected jsonl or csv)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClaimFormat {
    JsonLines,
    Csv,
}

impl ClaimFormat {
    pub fn from_path(path: &Path) -> Result<Self, DatasetError> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(ClaimFormat::Csv),
            Some("jsonl") | Some("json") | Some("ndjson") => Ok(ClaimFormat::JsonLines),
            other => Err(DatasetError::UnknownFormat(other.unwrap_or("").to_string())),
        }
    }
}

impl std::str::FromStr for ClaimFormat {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ClaimFormat::Csv),
            "jsonl" | "json" | "ndjson" => Ok(ClaimFormat::JsonLines),
            other => Err(DatasetError::UnknownFormat(other.to_string())),
        }
    }
}

/// An ordered, id-indexed set of claims.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    claims: Vec<Claim>,
    index: HashMap<ClaimId, usize>,
}

impl Dataset {
    pub fn from_claims(claims: Vec<Claim>) -> Result<Self, DatasetError> {
        let mut ds = Dataset::default();
        for (i, claim) in claims.into_iter().enumerate() {
            ds.push(claim, i as u64 + 1)?;
        }
        Ok(ds)
    }

    fn push(&mut self, claim: Claim, line: u64) -> Result<(), DatasetError> {
        if self.index.contains_key(&claim.id) {
            return Err(DatasetError::DuplicateId {
                id: claim.id.to_string(),
                line,
            });
        }
        self.index.insert(claim.id.clone(), self.claims.len());
        self.claims.push(claim);
        Ok(())
    }

    pub fn load(path: &Path, format: ClaimFormat) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, format)
    }

    pub fn parse(text: &str, format: ClaimFormat) -> Result<Self, DatasetError> {
        match format {
            ClaimFormat::JsonLines => Self::parse_jsonl(text),
            ClaimFormat::Csv => Self::parse_csv(text),
        }
    }

    fn parse_jsonl(text: &str) -> Result<Self, DatasetError> {
        let mut ds = Dataset::default();
        for (i, line) in text.lines().enumerate() {
            let line_no = i as u64 + 1;
            if line.trim().is_empty() {
                continue;
            }
            let claim: Claim = serde_json::from_str(line).map_err(|e| DatasetError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            ds.push(claim, line_no)?;
        }
        Ok(ds)
    }

    fn parse_csv(text: &str) -> Result<Self, DatasetError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| DatasetError::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let mut ds = Dataset::default();
        for record in reader.records() {
            let record = record.map_err(|e| DatasetError::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let claim: Claim = record
                .deserialize(Some(&headers))
                .map_err(|e| DatasetError::Parse {
                    line,
                    message: e.to_string(),
                })?;
            ds.push(claim, line)?;
        }
        Ok(ds)
    }

    pub fn claims(&self) -> &[Claim] {
        &self.claims
    }

    pub fn get(&self, id: &ClaimId) -> Option<&Claim> {
        self.index.get(id).map(|&i| &self.claims[i])
    }

    pub fn len(&self) -> usize {
        self.claims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.claims.is_empty()
    }

    pub fn summary(&self) -> DatasetSummary {
        let mut by_topic = BTreeMap::new();
        let mut true_count = 0;
        for c in &self.claims {
            if c.veracity == Veracity::True {
                true_count += 1;
            }
            *by_topic.entry(c.topic).or_insert(0) += 1;
        }
        DatasetSummary {
            total: self.claims.len(),
            true_count,
            false_count: self.claims.len() - true_count,
            by_topic,
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for c in &self.claims {
            out.push_str(&serde_json::to_string(c).expect("claims serialize"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub total: usize,
    pub true_count: usize,
    pub false_count: usize,
    pub by_topic: BTreeMap<Topic, usize>,
}

impl fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} claims: {} true, {} false",
            self.total, self.true_count, self.false_count
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_csv(n_true: usize, n_false: usize) -> String {
        let mut s = String::from("id,headline,source,image_ref,veracity,topic\n");
        for i in 0..n_true + n_false {
            let v = if i < n_true { "true" } else { "false" };
            let topic = if i % 7 == 0 { "medical" } else { "political" };
            s.push_str(&format!("c{i},Headline number {i},example.com,,{v},{topic}\n"));
        }
        s
    }

    #[test]
    fn summary_of_binary_fixture() {
        let ds = Dataset::parse(&fixture_csv(188, 185), ClaimFormat::Csv).unwrap();
        assert_eq!(ds.summary().to_string(), "373 claims: 188 true, 185 false");
    }

    #[test]
    fn misleading_label_is_a_parse_error() {
        let text = "id,headline,source,image_ref,veracity,topic\n\
                    a,Fine headline,src,,true,other\n\
                    b,Bad headline,src,,misleading,other\n";
        match Dataset::parse(text, ClaimFormat::Csv) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let jsonl = "{\"id\":\"a\",\"headline\":\"h\",\"source\":\"s\",\"veracity\":\"misleading\",\"topic\":\"other\"}\n";
        assert!(matches!(
            Dataset::parse(jsonl, ClaimFormat::JsonLines),
            Err(DatasetError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let text = "id,headline,source,image_ref,veracity,topic\n\
                    a,One,src,,true,other\n\
                    a,Two,src,,false,other\n";
        assert!(matches!(
            Dataset::parse(text, ClaimFormat::Csv),
            Err(DatasetError::DuplicateId { .. })
        ));
    }

    #[test]
    fn jsonl_roundtrip() {
        let ds = Dataset::parse(&fixture_csv(3, 2), ClaimFormat::Csv).unwrap();
        let back = Dataset::parse(&ds.to_jsonl(), ClaimFormat::JsonLines).unwrap();
        assert_eq!(ds.claims(), back.claims());
        assert!(back.get(&"c4".into()).is_some());
    }
}
