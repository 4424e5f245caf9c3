//! Interior-point cost estimates for the bisection planner and the rotation
//! scheme.

use super::PlannerError;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityEstimate {
    /// Bisection iterations, `floor(log2((N̄ − N̲)/ε))`, clamped at zero.
    pub k3: u32,
    pub sum_nm_cubed: f64,
    /// `(K1·9³ + K2·7³)·Σ N_m³`.
    pub algorithm3_flops_scale: f64,
    /// `K2·(7N')³`.
    pub low_complexity_flops_scale: f64,
}

/// Closed form of `Σ_{m=1..K3} (N̄ − D/2^m)³`.
pub fn sum_nm_cubed(n_upper: f64, d: f64, k3: u32) -> f64 {
    let k = k3 as f64;
    let half = math::powf(0.5, k);
    let quarter = half * half;
    let eighth = quarter * half;
    math::powi(n_upper, 3) * k - 3.0 * n_upper * n_upper * d * (1.0 - half) + n_upper * d * d * (1.0 - quarter)
        - math::powi(d, 3) * (1.0 - eighth) / 7.0
}

pub fn complexity_estimate(
    n_upper: f64,
    n_lower: f64,
    epsilon: f64,
    k1: u32,
    k2: u32,
    n_prime: usize,
) -> Result<ComplexityEstimate, PlannerError> {
    if !(n_upper >= n_lower) || !(n_lower >= 0.0) {
        return Err(PlannerError::InvalidArgument("need 0 <= N_lower <= N_upper"));
    }
    if !(epsilon > 0.0) {
        return Err(PlannerError::InvalidArgument("epsilon must be positive"));
    }
    let d = n_upper - n_lower;
    let k3 = if d > 0.0 { math::floor(math::log2(d / epsilon)).max(0.0) as u32 } else { 0 };
    let sum = sum_nm_cubed(n_upper, d, k3);
    let np = n_prime as f64;
    Ok(ComplexityEstimate {
        k3,
        sum_nm_cubed: sum,
        algorithm3_flops_scale: (k1 as f64 * 729.0 + k2 as f64 * 343.0) * sum,
        low_complexity_flops_scale: k2 as f64 * math::powi(7.0 * np, 3),
    })
}
