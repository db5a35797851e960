use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{text_metrics, FormalityScorer, LinguaError, TextMetrics};
use crate::stats::significance::{mean, welch_t_test};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Length,
    Readability,
    Grade,
    Formality,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Length, Metric::Readability, Metric::Grade, Metric::Formality];

    fn of(self, m: &TextMetrics) -> f64 {
        match self {
            Metric::Length => m.length_words as f64,
            Metric::Readability => m.reading_ease,
            Metric::Grade => m.fk_grade,
            Metric::Formality => m.formality,
        }
    }

    fn header(self) -> &'static str {
        match self {
            Metric::Length => "Avg. length",
            Metric::Readability => "Avg. readability",
            Metric::Grade => "Avg. FK grade",
            Metric::Formality => "Avg. formality",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub mean: f64,
    /// Two-sided Welch p-value against the reference group; `None` for the reference itself.
    pub p_value: Option<f64>,
    pub starred: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: String,
    pub n: usize,
    pub cells: BTreeMap<Metric, MetricCell>,
}

impl GroupRow {
    pub fn cell(&self, m: Metric) -> &MetricCell {
        &self.cells[&m]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub reference: String,
    pub rows: Vec<GroupRow>,
}

impl GroupComparison {
    pub fn row(&self, group: &str) -> Option<&GroupRow> {
        self.rows.iter().find(|r| r.group == group)
    }

    pub fn to_table(&self) -> String {
        let mut header = vec!["Group".to_string(), "N".to_string()];
        header.extend(Metric::ALL.iter().map(|m| m.header().to_string()));
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut v = vec![r.group.clone(), r.n.to_string()];
                v.extend(Metric::ALL.iter().map(|m| {
                    let c = r.cell(*m);
                    format!("{:.2}{}", c.mean, if c.starred { "*" } else { "" })
                }));
                v
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(String::len).collect();
        for row in &rows {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        for row in std::iter::once(&header).chain(rows.iter()) {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        let _ = writeln!(
            out,
            "* p < {SIGNIFICANCE_LEVEL} (two-sided Welch t-test against {})",
            self.reference
        );
        out
    }
}

/// Expand `g1..g6,control` into the listed group names.
pub fn parse_group_list(list: &str) -> Vec<String> {
    let mut out = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let split = |s: &str| {
                let i = s.find(|c: char| c.is_ascii_digit())?;
                Some((s[..i].to_string(), s[i..].parse::<u32>().ok()?))
            };
            if let (Some((pa, na)), Some((pb, nb))) = (split(a), split(b)) {
                if pa == pb || pb.is_empty() {
                    out.extend((na..=nb).map(|k| format!("{pa}{k}")));
                    continue;
                }
            }
        }
        out.push(part.to_string());
    }
    out
}

/// Mean metrics per group and a Welch test of each group against `reference`.
///
/// Groups appear in the order given.
pub fn group_comparison(
    groups: &[(String, Vec<String>)],
    reference: &str,
    scorer: &dyn FormalityScorer,
) -> Result<GroupComparison, LinguaError> {
    for (g, texts) in groups {
        if texts.len() < 2 {
            return Err(LinguaError::GroupTooSmall { group: g.clone(), got: texts.len() });
        }
    }
    let metrics: Vec<(String, Vec<TextMetrics>)> = groups
        .iter()
        .map(|(g, texts)| {
            let m = texts
                .par_iter()
                .map(|t| text_metrics(t, scorer))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((g.clone(), m))
        })
        .collect::<Result<_, LinguaError>>()?;
    let base = metrics
        .iter()
        .find(|(g, _)| g == reference)
        .ok_or_else(|| LinguaError::UnknownGroup(reference.to_string()))?;
    let column = |ms: &[TextMetrics], m: Metric| ms.iter().map(|x| m.of(x)).collect::<Vec<f64>>();

    let rows = metrics
        .iter()
        .map(|(g, ms)| {
            let cells = Metric::ALL
                .iter()
                .map(|&m| {
                    let xs = column(ms, m);
                    let p_value = (g != reference).then(|| {
                        welch_t_test(&xs, &column(&base.1, m))
                            .map(|t| t.p_value)
                            .unwrap_or(1.0)
                    });
                    let cell = MetricCell {
                        mean: mean(&xs),
                        p_value,
                        starred: p_value.is_some_and(|p| p < SIGNIFICANCE_LEVEL),
                    };
                    (m, cell)
                })
                .collect();
            GroupRow { group: g.clone(), n: ms.len(), cells }
        })
        .collect();
    Ok(GroupComparison {
        reference: reference.to_string(),
        rows,
    })
}
