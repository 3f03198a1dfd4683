use std::f64::consts::{E, SQRT_2};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("failure probability must lie in (0, 1), got {0}")]
    Probability(f64),
    #[error("node count must be positive")]
    EmptyGraph,
}

/// Closed-form w.h.p. bounds. Logarithms are natural.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    /// `1 / ((Δ+1) e)`.
    pub alpha: f64,
    /// Rounds to legitimacy with failure probability `p`:
    /// `1 + max(-α⁻² ln p, √2/(√2-1) · n/α)`, counted from an arbitrary
    /// start (one round for degree stabilization included).
    pub byz_round_bound: f64,
    /// Vanish events with failure `p' = p/2`:
    /// `λ = max(-9/4 ln p', √2/(√2-1) · 3n/2)`.
    pub anon_vanish_bound: f64,
    /// Total moves with failure `p`: `2(λn + √(-λn ln p') - 1) + λn`.
    pub anon_move_bound: f64,
}

pub fn evaluate_bounds(n: usize, max_degree: usize, p: f64) -> Result<Bounds, BoundError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(BoundError::Probability(p));
    }
    if n == 0 {
        return Err(BoundError::EmptyGraph);
    }
    let n = n as f64;
    let ratio = SQRT_2 / (SQRT_2 - 1.0);
    let alpha = 1.0 / ((max_degree as f64 + 1.0) * E);
    let byz_round_bound = 1.0 + f64::max(-p.ln() / (alpha * alpha), ratio * n / alpha);
    let p2 = p / 2.0;
    let lambda = f64::max(-2.25 * p2.ln(), ratio * 1.5 * n);
    let ln_p2 = p2.ln();
    let anon_move_bound = 2.0 * (lambda * n + (-lambda * n * ln_p2).sqrt() - 1.0) + lambda * n;
    Ok(Bounds {
        alpha,
        byz_round_bound,
        anon_vanish_bound: lambda,
        anon_move_bound,
    })
}
