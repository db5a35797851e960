//! Per-arm tables in the shape of the effectiveness report.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::domain::{Claim, InterventionArm, Phase};

use super::bootstrap::Estimate;
use super::frame::AnalysisFrame;
use super::metrics::{accuracy, helpfulness, interaction_rates, AccuracyOptions};
use super::StatsError;

/// Subsets whose true/false counts differ by more than this share are flagged.
pub const BALANCE_TOLERANCE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub arm: InterventionArm,
    pub n_pre: usize,
    pub n_post: usize,
    pub acc_pre: Estimate,
    pub acc_post: Option<Estimate>,
    pub delta: Option<f64>,
    pub false_share_pre: f64,
    pub false_share_post: Option<f64>,
    pub false_flag_pre: f64,
    pub false_flag_post: Option<f64>,
    pub helpfulness_pct: Option<f64>,
    pub helpfulness_mean: Option<f64>,
}

impl ArmReport {
    pub fn build(frame: &AnalysisFrame, arm: InterventionArm, opts: &AccuracyOptions) -> Result<Self, StatsError> {
        let acc_pre = accuracy(frame, arm, Phase::Pre, opts)?;
        let acc_post = match accuracy(frame, arm, Phase::Post, opts) {
            Ok(e) => Some(e),
            Err(StatsError::EmptySelection(_)) => None,
            Err(e) => return Err(e),
        };
        let rates_pre = interaction_rates(frame, arm, Phase::Pre)?;
        let rates_post = interaction_rates(frame, arm, Phase::Post).ok();
        let help = helpfulness(frame, arm).ok();
        Ok(ArmReport {
            arm,
            n_pre: acc_pre.n,
            n_post: acc_post.map_or(0, |e| e.n),
            delta: acc_post.map(|p| p.point - acc_pre.point),
            acc_pre,
            acc_post,
            false_share_pre: rates_pre.false_share,
            false_share_post: rates_post.map(|r| r.false_share),
            false_flag_pre: rates_pre.false_flag,
            false_flag_post: rates_post.map(|r| r.false_flag),
            helpfulness_pct: help.map(|h| h.pct_helpful),
            helpfulness_mean: help.map(|h| h.mean),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceCheck {
    pub n_true: usize,
    pub n_false: usize,
    pub balanced: bool,
}

impl BalanceCheck {
    pub fn of<'a>(claims: impl IntoIterator<Item = &'a Claim>) -> Self {
        let (mut n_true, mut n_false) = (0, 0);
        for c in claims {
            if c.veracity.is_true() {
                n_true += 1;
            } else {
                n_false += 1;
            }
        }
        let larger = n_true.max(n_false);
        let gap = larger - n_true.min(n_false);
        BalanceCheck {
            n_true,
            n_false,
            balanced: larger == 0 || gap as f64 <= BALANCE_TOLERANCE * larger as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balance: Option<BalanceCheck>,
    pub excluded_users: usize,
    pub sessions: usize,
    pub arms: Vec<ArmReport>,
}

impl ExperimentReport {
    pub fn build(frame: &AnalysisFrame, opts: &AccuracyOptions) -> Result<Self, StatsError> {
        let arms = frame
            .arms()
            .into_iter()
            .map(|arm| ArmReport::build(frame, arm, opts))
            .collect::<Result<Vec<_>, _>>()?;
        if arms.is_empty() {
            return Err(StatsError::EmptySelection("no completed sessions".into()));
        }
        Ok(ExperimentReport {
            subset: None,
            balance: None,
            excluded_users: frame.exclusions.all().len(),
            sessions: frame.sessions.len(),
            arms,
        })
    }

    pub fn arm(&self, arm: InterventionArm) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.arm == arm)
    }

    pub fn warning(&self) -> Option<String> {
        let b = self.balance.as_ref()?;
        (!b.balanced).then(|| {
            format!(
                "subset is unbalanced: {} true vs {} false claims",
                b.n_true, b.n_false
            )
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned-column text table.
    pub fn to_table(&self) -> String {
        let header = [
            "Arm", "N pre", "N post", "Before", "After", "Delta", "Share pre", "Share post",
            "Flag pre", "Flag post", "Helpful %", "Helpful mean",
        ];
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
        let rows: Vec<Vec<String>> = self
            .arms
            .iter()
            .map(|a| {
                vec![
                    a.arm.display_name().to_string(),
                    a.n_pre.to_string(),
                    a.n_post.to_string(),
                    a.acc_pre.to_string(),
                    a.acc_post.map_or("-".into(), |e| e.to_string()),
                    a.delta.map_or("-".into(), |d| format!("{d:+.2}")),
                    format!("{:.2}", a.false_share_pre),
                    opt(a.false_share_post),
                    format!("{:.2}", a.false_flag_pre),
                    opt(a.false_flag_post),
                    opt(a.helpfulness_pct),
                    opt(a.helpfulness_mean),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        if let Some(s) = &self.subset {
            let _ = writeln!(out, "subset: {s}");
        }
        if let Some(w) = self.warning() {
            let _ = writeln!(out, "warning: {w}");
        }
        let line = |cells: Vec<String>| {
            cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let _ = writeln!(out, "{}", line(header.iter().map(|s| s.to_string()).collect()));
        for row in rows {
            let _ = writeln!(out, "{}", line(row));
        }
        out
    }
}

impl fmt::Display for ExperimentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_table())
    }
}

/// The full report restricted to claims matching `pred`.
pub fn subset_report(
    frame: &AnalysisFrame,
    dataset: &Dataset,
    label: &str,
    pred: impl Fn(&Claim) -> bool,
    opts: &AccuracyOptions,
) -> Result<ExperimentReport, StatsError> {
    let matching: Vec<&Claim> = dataset.claims().iter().filter(|c| pred(c)).collect();
    if matching.is_empty() {
        return Err(StatsError::EmptySelection(format!("no claims match {label}")));
    }
    let balance = BalanceCheck::of(matching.iter().copied());
    let sub = frame.restrict(dataset, &pred);
    let mut report = ExperimentReport::build(&sub, opts)?;
    report.subset = Some(label.to_string());
    report.balance = Some(balance);
    Ok(report)
}

/// Parse `topic=medical` style subset expressions into a claim predicate.
pub fn parse_subset(expr: &str) -> Result<Box<dyn Fn(&Claim) -> bool + Send + Sync>, StatsError> {
    let (key, value) = expr
        .split_once('=')
        .ok_or_else(|| StatsError::InvalidParameter(format!("subset `{expr}` is not key=value")))?;
    let value = value.trim().to_string();
    match key.trim() {
        "topic" => {
            let topic = value
                .parse::<crate::domain::Topic>()
                .map_err(|e| StatsError::InvalidParameter(e.to_string()))?;
            Ok(Box::new(move |c: &Claim| c.topic == topic))
        }
        "veracity" => {
            let v = value
                .parse::<crate::domain::Veracity>()
                .map_err(|e| StatsError::InvalidParameter(e.to_string()))?;
            Ok(Box::new(move |c: &Claim| c.veracity == v))
        }
        other => Err(StatsError::InvalidParameter(format!("unknown subset key `{other}`"))),
    }
}
