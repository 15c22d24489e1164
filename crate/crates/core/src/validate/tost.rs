//! Two one-sided Welch t-tests for equivalence of two means.

use serde::{Deserialize, Serialize};

use crate::error::StatsError;
use crate::stats::{t_cdf, t_quantile};

pub const DEFAULT_MARGIN: f64 = 0.1;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TostResult {
    /// p for H0: μ1 − μ2 ≤ −margin.
    pub p_lower: f64,
    /// p for H0: μ1 − μ2 ≥ +margin.
    pub p_upper: f64,
    pub margin: f64,
    pub alpha: f64,
    pub equivalent: bool,
    pub mean_diff: f64,
    pub df: f64,
    pub ci_g1: ConfidenceInterval,
    pub ci_g2: ConfidenceInterval,
    pub n_g1: usize,
    pub n_g2: usize,
}

struct Moments {
    n: f64,
    mean: f64,
    var: f64,
}

fn moments(xs: &[f64], which: &str) -> Result<Moments, StatsError> {
    if xs.len() < 2 {
        return Err(StatsError::InsufficientData(format!(
            "{which} has {} value(s)",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if !(var > 0.0) {
        return Err(StatsError::InsufficientData(format!("{which} has zero variance")));
    }
    Ok(Moments { n, mean, var })
}

fn mean_ci(m: &Moments, level: f64) -> ConfidenceInterval {
    let half = t_quantile(0.5 + level / 2.0, m.n - 1.0) * (m.var / m.n).sqrt();
    ConfidenceInterval {
        low: m.mean - half,
        high: m.mean + half,
    }
}

/// 95% t interval for the mean of `xs`.
pub fn mean_confidence_interval(xs: &[f64]) -> Result<ConfidenceInterval, StatsError> {
    Ok(mean_ci(&moments(xs, "sample")?, 0.95))
}

/// Equivalent iff both one-sided nulls are rejected at `alpha`.
pub fn tost_equivalence(g1: &[f64], g2: &[f64], margin: f64, alpha: f64) -> Result<TostResult, StatsError> {
    let a = moments(g1, "g1")?;
    let b = moments(g2, "g2")?;
    let (va, vb) = (a.var / a.n, b.var / b.n);
    let se = (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (a.n - 1.0) + vb * vb / (b.n - 1.0));
    let diff = a.mean - b.mean;
    let t_lower = (diff + margin) / se;
    let t_upper = (diff - margin) / se;
    let p_lower = t_cdf(-t_lower, df);
    let p_upper = t_cdf(t_upper, df);
    Ok(TostResult {
        p_lower,
        p_upper,
        margin,
        alpha,
        equivalent: p_lower.max(p_upper) < alpha,
        mean_diff: diff,
        df,
        ci_g1: mean_ci(&a, 0.95),
        ci_g2: mean_ci(&b, 0.95),
        n_g1: g1.len(),
        n_g2: g2.len(),
    })
}
