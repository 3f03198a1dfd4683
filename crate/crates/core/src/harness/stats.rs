use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::statistics::{Data, Max, Min, OrderStatistics};
use thiserror::Error;

use super::run::TrialResult;
use crate::model::Algorithm;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("no trials")]
    Empty,
    #[error("every trial timed out")]
    AllTimedOut,
    #[error("an exponent fit needs two distinct positive sizes")]
    DegenerateFit,
    #[error("chi-square test needs matching, non-empty categories with positive expectations")]
    BadCategories,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantiles {
    pub min: f64,
    pub median: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

/// Empirical quantiles with the median-unbiased estimator.
pub fn quantiles(values: &[f64]) -> Quantiles {
    let mut data = Data::new(values.to_vec());
    Quantiles {
        min: data.min(),
        median: data.median(),
        p90: data.quantile(0.9),
        p99: data.quantile(0.99),
        max: data.max(),
    }
}

/// Observed fraction of trials above their bound and the acceptance threshold
/// `p + 3σ` with `σ = sqrt(p(1-p)/N)`. Timed-out trials count as exceeding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub p: f64,
    pub exceeded: usize,
    pub trials: usize,
    pub fraction: f64,
    pub threshold: f64,
    pub holds: bool,
}

impl BoundCheck {
    pub fn new(p: f64, exceeded: usize, trials: usize) -> Self {
        let fraction = exceeded as f64 / trials as f64;
        let threshold = p + 3.0 * (p * (1.0 - p) / trials as f64).sqrt();
        BoundCheck {
            p,
            exceeded,
            trials,
            fraction,
            threshold,
            holds: fraction <= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub algo: Algorithm,
    pub trials: usize,
    pub timed_out: usize,
    pub not_legitimate: usize,
    pub violations: usize,
    pub rounds: Quantiles,
    pub moves: Quantiles,
    /// Byzantine runs: rounds to legitimacy against the round bound.
    /// Anonymous runs: total moves against the move bound.
    pub bound: BoundCheck,
}

/// Statistics over finished trials; each trial is compared with the bound
/// evaluated on its own graph.
pub fn summarize(results: &[TrialResult], p: f64) -> Result<Summary, StatsError> {
    let first = results.first().ok_or(StatsError::Empty)?;
    let finished: Vec<&TrialResult> = results.iter().filter(|r| !r.timed_out).collect();
    if finished.is_empty() {
        return Err(StatsError::AllTimedOut);
    }
    let rounds: Vec<f64> = finished
        .iter()
        .map(|r| r.rounds_to_legit.unwrap_or(r.metrics.rounds) as f64)
        .collect();
    let moves: Vec<f64> = finished.iter().map(|r| r.total_moves() as f64).collect();
    let exceeded = results
        .iter()
        .filter(|r| {
            r.timed_out
                || match r.algo {
                    Algorithm::Byzantine => r.rounds_to_legit.is_none_or(|x| x as f64 > r.round_bound),
                    Algorithm::Anonymous => r.total_moves() as f64 > r.move_bound,
                }
        })
        .count();
    Ok(Summary {
        algo: first.algo,
        trials: results.len(),
        timed_out: results.len() - finished.len(),
        not_legitimate: results.iter().filter(|r| !r.legitimate).count(),
        violations: results.iter().map(|r| r.violation_count).sum(),
        rounds: quantiles(&rounds),
        moves: quantiles(&moves),
        bound: BoundCheck::new(p, exceeded, results.len()),
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<f64, StatsError> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(x, y)| x > 0.0 && y > 0.0)
        .map(|&(x, y)| (x.ln(), y.ln()))
        .collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if logs.len() < 2 || sxx <= 0.0 {
        return Err(StatsError::DegenerateFit);
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub critical: f64,
    pub passed: bool,
}

/// Pearson goodness of fit of `observed` counts against `expected`
/// probabilities at significance `alpha`.
pub fn chi_square_test(observed: &[u64], expected: &[f64], alpha: f64) -> Result<ChiSquare, StatsError> {
    if observed.len() != expected.len() || observed.is_empty() || expected.iter().any(|&p| p <= 0.0) {
        return Err(StatsError::BadCategories);
    }
    let total: u64 = observed.iter().sum();
    let statistic: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = observed.len() - 1;
    if dof == 0 {
        return Ok(ChiSquare {
            statistic,
            dof,
            critical: 0.0,
            passed: statistic <= 1e-9,
        });
    }
    let critical = ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - alpha);
    Ok(ChiSquare {
        statistic,
        dof,
        critical,
        passed: statistic <= critical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_quantiles() {
        let q = quantiles(&[7.0]);
        assert_eq!((q.min, q.median, q.p90, q.p99, q.max), (7.0, 7.0, 7.0, 7.0, 7.0));
    }

    #[test]
    fn bound_threshold() {
        let b = BoundCheck::new(0.1, 0, 2000);
        assert_eq!(b.fraction, 0.0);
        assert!(b.holds);
        assert!((b.threshold - (0.1 + 3.0 * (0.09f64 / 2000.0).sqrt())).abs() < 1e-15);
        assert!(!BoundCheck::new(0.1, 400, 2000).holds);
    }

    #[test]
    fn exponent_of_power_law() {
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0]
            .iter()
            .map(|&n| (n, 3.0 * n * n))
            .collect();
        assert!((fit_exponent(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(fit_exponent(&[(1.0, 1.0)]), Err(StatsError::DegenerateFit));
    }

    #[test]
    fn chi_square_critical_values() {
        // Reference: the 0.999 quantile of χ²(1) is 10.827566...
        let c = chi_square_test(&[50, 50], &[0.5, 0.5], 0.001).unwrap();
        assert!((c.critical - 10.827_566_170_662_733).abs() < 1e-6);
        assert!(c.passed && c.statistic == 0.0);
        let c = chi_square_test(&[90, 10], &[0.5, 0.5], 0.001).unwrap();
        assert!(!c.passed);
        assert!(chi_square_test(&[1], &[0.5, 0.5], 0.001).is_err());
    }

    #[test]
    fn summary_rejects_empty() {
        assert_eq!(summarize(&[], 0.1).unwrap_err(), StatsError::Empty);
    }
}
