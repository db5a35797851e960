//! Ordinary least squares for alignment vs. accuracy, and the
//! aligned-vs-baseline group means comparison.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::significance::{mean, welch_t_test};
use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci: (f64, f64),
    pub slope_se: f64,
    pub p_value: f64,
    pub n: usize,
    pub x_mean: f64,
    pub sxx: f64,
    pub residual_var: f64,
    pub t_crit: f64,
}

impl RegressionResult {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    /// 95% confidence band for the mean response at `x`.
    pub fn band(&self, x: f64) -> (f64, f64) {
        let se = (self.residual_var * (1.0 / self.n as f64 + (x - self.x_mean).powi(2) / self.sxx)).sqrt();
        let y = self.predict(x);
        (y - self.t_crit * se, y + self.t_crit * se)
    }
}

/// Fits `y = intercept + slope * x` with a 95% t-interval on the slope.
pub fn ols(points: &[(f64, f64)]) -> Result<RegressionResult, StatsError> {
    let n = points.len();
    if n < 3 {
        return Err(StatsError::InsufficientData { needed: 3, got: n });
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(StatsError::InvalidParameter("all x values are equal".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    // rounding noise on an exact fit
    let scale = points.iter().map(|p| p.1.abs()).fold(1.0, f64::max);
    let sse = if sse <= nf * (1e-12 * scale).powi(2) { 0.0 } else { sse };
    let df = nf - 2.0;
    let se = (sse / df / sxx).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    let tcrit = dist.inverse_cdf(0.975);
    let p_value = if se == 0.0 {
        if slope == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        (2.0 * dist.sf((slope / se).abs())).min(1.0)
    };
    Ok(RegressionResult {
        slope,
        intercept,
        slope_ci: (slope - tcrit * se, slope + tcrit * se),
        slope_se: se,
        p_value,
        n,
        x_mean: mx,
        sxx,
        residual_var: sse / df,
        t_crit: tcrit,
    })
}

/// Mean accuracy of one cohort against another, with a Welch p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans {
    pub mean_a: f64,
    pub mean_b: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub p_value: f64,
}

pub fn group_means(a: &[f64], b: &[f64]) -> Result<GroupMeans, StatsError> {
    let t = welch_t_test(a, b)?;
    Ok(GroupMeans {
        mean_a: mean(a),
        mean_b: mean(b),
        n_a: a.len(),
        n_b: b.len(),
        p_value: t.p_value,
    })
}

pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "p<0.001".to_string()
    } else {
        format!("p={p:.3}")
    }
}

/// `85.89% vs. 76.65% (p=0.008)` for accuracies given on a 0-1 scale.
impl fmt::Display for GroupMeans {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:.2}% vs. {:.2}% ({})",
            self.mean_a * 100.0,
            self.mean_b * 100.0,
            format_p(self.p_value)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64 * 0.2, 0.5 + 0.6 * i as f64 * 0.2)).collect();
        let r = ols(&pts).unwrap();
        assert!((r.slope - 0.6).abs() < 1e-12);
        assert!((r.intercept - 0.5).abs() < 1e-12);
        assert_eq!(r.slope_ci.0, r.slope_ci.1);
    }

    #[test]
    fn constant_response() {
        let pts = [(0.0, 0.7), (0.2, 0.7), (0.4, 0.7), (0.6, 0.7)];
        let r = ols(&pts).unwrap();
        assert_eq!(r.slope, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn needs_three_points() {
        assert_eq!(
            ols(&[(0.0, 1.0), (1.0, 2.0)]),
            Err(StatsError::InsufficientData { needed: 3, got: 2 })
        );
    }

    #[test]
    fn p_formatting() {
        assert_eq!(format_p(0.007977716594059839), "p=0.008");
        assert_eq!(format_p(0.0002), "p<0.001");
    }
}
