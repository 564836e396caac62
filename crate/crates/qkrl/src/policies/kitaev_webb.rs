//! Discretized Gaussian wavefunction preparation.
//!
//! The recursive conditional-rotation ladder splits the grid by the least
//! significant bit at each level: conditioned on the bits fixed so far, the
//! next qubit's rotation angle is `acos(sqrt(W_even / W))`, the ratio of
//! shifted theta-function sums. Sums are taken over the finite grid, so the
//! prepared state equals the normalized restriction of the Gaussian to the
//! grid to machine precision for any mean and width.

use crate::error::{Error, Result};
use crate::statevector::StateVector;

/// Infinite-lattice theta sum `F(m, v) = sum_n exp(-(n - m)^2 / v^2)`,
/// truncated at `|n - m| <= max(50, 10 v)`; the dropped tail is below 1e-15.
pub fn jacobi_theta_sum(m: f64, v: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::contract("theta sum needs v > 0"));
    }
    let half = (10.0 * v).max(50.0).ceil() as i64;
    let centre = m.round() as i64;
    let mut sum = 0.0;
    for n in (centre - half)..=(centre + half) {
        sum += (-((n as f64 - m) / v).powi(2)).exp();
    }
    Ok(sum)
}

/// Unnormalized grid weights `exp(-(x - m)^2 / v^2)` for `x = 0..2^k`,
/// computed with a shifted exponent so ratios stay finite for tiny `v`.
fn grid_weights(k: usize, m: f64, v: f64) -> Vec<f64> {
    let n = 1usize << k;
    let d2: Vec<f64> = (0..n).map(|x| ((x as f64 - m) / v).powi(2)).collect();
    let best = d2.iter().cloned().fold(f64::INFINITY, f64::min);
    d2.iter().map(|&d| (-(d - best)).exp()).collect()
}

/// Amplitudes of the grid-restricted Gaussian,
/// `c(x) ~ exp(-(x - m)^2 / (2 v^2))`, normalized. The direct oracle for the
/// ladder circuit.
pub fn direct_gaussian_amplitudes(k: usize, m: f64, v: f64) -> Result<Vec<f64>> {
    if !(v > 0.0) {
        return Err(Error::contract("gaussian width must be positive"));
    }
    let w = grid_weights(k, m, v);
    let norm: f64 = w.iter().sum::<f64>().sqrt();
    Ok(w.iter().map(|x| x.sqrt() / norm).collect())
}

/// Conditional rotation angles for the ladder: `angles[j][b]` rotates qubit
/// `j` (LSB first) when the lower `j` bits spell `b`.
pub fn gaussian_ladder_angles(k: usize, m: f64, v: f64) -> Result<Vec<Vec<f64>>> {
    if !(v > 0.0) {
        return Err(Error::contract("gaussian width must be positive"));
    }
    let weights = grid_weights(k, m, v);
    let n = weights.len();
    let mut angles = Vec::with_capacity(k);
    for j in 0..k {
        let stride = 1usize << j;
        let mut level = Vec::with_capacity(stride);
        for b in 0..stride {
            // Mass of x = b (mod 2^j), split by bit j.
            let mut even = 0.0;
            let mut total = 0.0;
            let mut x = b;
            while x < n {
                total += weights[x];
                if (x >> j) & 1 == 0 {
                    even += weights[x];
                }
                x += stride;
            }
            let ratio = if total > 0.0 { (even / total).clamp(0.0, 1.0) } else { 1.0 };
            level.push(2.0 * ratio.sqrt().acos());
        }
        angles.push(level);
    }
    Ok(angles)
}

/// Applies the conditional-rotation ladder on the given qubits (LSB first),
/// optionally under extra controls (used when the ladder is dispatched per
/// basis state of a state register). The qubits must start in `|0>` on every
/// controlled branch.
pub fn apply_gaussian_ladder(
    sv: &mut StateVector,
    qubits: &[usize],
    extra_controls: &[(usize, bool)],
    m: f64,
    v: f64,
) -> Result<()> {
    let k = qubits.len();
    let angles = gaussian_ladder_angles(k, m, v)?;
    for (j, level) in angles.iter().enumerate() {
        for (b, &angle) in level.iter().enumerate() {
            if angle == 0.0 {
                continue;
            }
            let mut controls: Vec<(usize, bool)> = extra_controls.to_vec();
            for (low, &q) in qubits.iter().enumerate().take(j) {
                controls.push((q, (b >> low) & 1 == 1));
            }
            sv.apply_multicontrolled_ry(qubits[j], &controls, angle)?;
        }
    }
    Ok(())
}
