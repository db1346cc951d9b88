// SPDX-License-Identifier: Apache-2.0

use alloc::vec::Vec;

/// Deterministic ordered discretization: `round(a * c_max)` per component,
/// halves away from zero, after clipping `a` to `[-1, 1]`.
pub fn dod_discretize(a_hat: &[f64], c_max: u32) -> Vec<i32> {
    a_hat.iter().map(|&a| dod_one(a, c_max)).collect()
}

pub fn dod_one(a: f64, c_max: u32) -> i32 {
    let c = c_max as f64;
    // NaN clamps to zero: no scaling
    let a = if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) };
    libm::round(a * c).clamp(-c, c) as i32
}
