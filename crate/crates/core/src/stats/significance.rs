//! Two-sample tests: Welch's t-test and the Mann-Whitney U test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::StatsError;

/// Largest per-sample size for which the exact U distribution is used.
pub const MWU_EXACT_MAX: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u: f64,
    pub p_value: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub t_p: f64,
    pub mannwhitney_p: f64,
    pub t_test: TTest,
    pub mann_whitney: MannWhitney,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n - 1 denominator).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

fn all_constant(a: &[f64], b: &[f64]) -> bool {
    let first = a.first().or(b.first()).copied();
    first.is_some_and(|v| a.iter().chain(b).all(|&x| x == v))
}

fn normal_sf(z: f64) -> f64 {
    Normal::standard().sf(z)
}

/// Two-sided Welch (unequal-variance) t-test.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::InsufficientData {
            needed: 2,
            got: a.len().min(b.len()),
        });
    }
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (variance(a) / a.len() as f64, variance(b) / b.len() as f64);
    let se2 = va + vb;
    if se2 == 0.0 {
        // both samples constant
        let p = if ma == mb { 1.0 } else { 0.0 };
        let t = if ma == mb { 0.0 } else { (ma - mb).signum() * f64::INFINITY };
        return Ok(TTest { t, df: f64::NAN, p_value: p });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest { t, df, p_value: p })
}

/// Average ranks (1-based) of the pooled sample, plus the tie-group sizes.
fn ranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut r = vec![0.0; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            r[k] = avg;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (r, ties)
}

/// Number of arrangements of m + n items giving each U value, for u in 0..=m*n.
fn u_counts(m: usize, n: usize) -> Vec<f64> {
    // f[j][u]: ways with i first-sample items and j second-sample items
    let mut prev: Vec<Vec<f64>> = (0..=n).map(|_| vec![1.0]).collect();
    for i in 1..=m {
        let mut cur: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        cur.push(vec![1.0]);
        for j in 1..=n {
            let mut row = vec![0.0; i * j + 1];
            // last item from the first sample: it beats all j second-sample items
            for (u, c) in prev[j].iter().enumerate() {
                row[u + j] += c;
            }
            for (u, c) in cur[j - 1].iter().enumerate() {
                row[u] += c;
            }
            cur.push(row);
        }
        prev = cur;
    }
    prev.pop().expect("n + 1 rows")
}

/// Two-sided Mann-Whitney U test.
///
/// Uses the exact null distribution when both samples have at most
/// [`MWU_EXACT_MAX`] values and there are no ties, otherwise the normal
/// approximation with tie and continuity corrections.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySelection("empty sample".into()));
    }
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (r, ties) = ranks(&pooled);
    let r1: f64 = r[..n1].iter().sum();
    let u1 = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let u2 = (n1 * n2) as f64 - u1;
    let u = u1.max(u2);
    let has_ties = ties.iter().any(|&t| t > 1);

    if n1 <= MWU_EXACT_MAX && n2 <= MWU_EXACT_MAX && !has_ties {
        let counts = u_counts(n1, n2);
        let total: f64 = counts.iter().sum();
        let k = u.round() as usize;
        let upper: f64 = counts[k..].iter().sum();
        let p = (2.0 * upper / total).min(1.0);
        return Ok(MannWhitney { u: u1, p_value: p, exact: true });
    }

    let n = (n1 + n2) as f64;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let sd = ((n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term)).sqrt();
    let mu = (n1 * n2) as f64 / 2.0;
    let p = if sd == 0.0 {
        1.0
    } else {
        (2.0 * normal_sf((u - mu - 0.5) / sd)).clamp(0.0, 1.0)
    };
    Ok(MannWhitney { u: u1, p_value: p, exact: false })
}

/// Both two-sided p-values for comparing two samples.
pub fn significance(a: &[f64], b: &[f64]) -> Result<Significance, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySelection("empty sample".into()));
    }
    if all_constant(a, b) {
        return Err(StatsError::DegenerateSample);
    }
    let t_test = welch_t_test(a, b)?;
    let mann_whitney = mann_whitney(a, b)?;
    Ok(Significance {
        t_p: t_test.p_value,
        mannwhitney_p: mann_whitney.p_value,
        t_test,
        mann_whitney,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u_distribution_small_case() {
        // m = n = 2: U takes 0..=4 with counts 1,1,2,1,1
        assert_eq!(u_counts(2, 2), vec![1.0, 1.0, 2.0, 1.0, 1.0]);
        assert_eq!(u_counts(5, 5).iter().sum::<f64>(), 252.0);
        assert_eq!(u_counts(3, 0), vec![1.0]);
    }

    #[test]
    fn ranks_average_ties() {
        let (r, t) = ranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(t, vec![1, 1, 2]);
    }

    #[test]
    fn constant_samples_are_degenerate() {
        assert_eq!(significance(&[2.0, 2.0], &[2.0, 2.0, 2.0]), Err(StatsError::DegenerateSample));
    }

    #[test]
    fn separated_constants() {
        let t = welch_t_test(&[1.0, 1.0], &[3.0, 3.0]).unwrap();
        assert_eq!(t.p_value, 0.0);
    }

    #[test]
    fn tiny_samples() {
        assert!(matches!(
            welch_t_test(&[1.0], &[2.0, 3.0]),
            Err(StatsError::InsufficientData { .. })
        ));
    }
}
