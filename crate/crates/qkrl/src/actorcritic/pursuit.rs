//! Vector-valued kernel matching pursuit: greedy centre selection that
//! minimizes the mean squared error of the representer approximation to a
//! target function over probe states.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::OperatorKernel;

/// Sparse representer model returned by the pursuit.
#[derive(Debug, Clone, PartialEq)]
pub struct PursuitResult {
    pub centres: Vec<Vec<f64>>,
    /// One action-space weight vector per centre.
    pub weights: Vec<Vec<f64>>,
    pub mse: f64,
    /// MSE after each accepted atom (index 0 is the empty model).
    pub mse_history: Vec<f64>,
}

/// Greedily adds (centre, weight) atoms from the dictionary until the MSE
/// improvement drops below `eps_mu` or `n_max` atoms are used. Ties break
/// toward the lowest dictionary index; re-selected centres merge their
/// weights.
pub fn matching_pursuit(
    probe_states: &[Vec<f64>],
    targets: &[Vec<f64>],
    dictionary: &[Vec<f64>],
    kernel: &OperatorKernel,
    eps_mu: f64,
    n_max: usize,
) -> Result<PursuitResult> {
    if probe_states.is_empty() || dictionary.is_empty() {
        return Err(Error::contract("pursuit needs probes and a dictionary"));
    }
    if probe_states.len() != targets.len() {
        return Err(Error::contract("one target vector per probe state"));
    }
    let a_dims = kernel.a_dims();
    if targets.iter().any(|t| t.len() != a_dims) {
        return Err(Error::contract("target dimension mismatch"));
    }
    let n = probe_states.len() as f64;
    let m = kernel.matrix();
    let mtm = m.transpose() * &m;

    // Kernel activations g[c][j] = kappa(c, s_j), fixed per dictionary atom.
    let activations: Vec<Vec<f64>> = dictionary
        .iter()
        .map(|c| {
            probe_states
                .iter()
                .map(|s| kernel.scalar.eval(c, s))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut residual: Vec<Vec<f64>> = targets.to_vec();
    let mut mse = residual
        .iter()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        / n;
    let mut mse_history = vec![mse];
    let mut chosen: Vec<(usize, Vec<f64>)> = Vec::new();

    while chosen.len() < n_max {
        // Best atom: solve for the optimal weight of each candidate and keep
        // the lowest resulting MSE.
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for (c_idx, g) in activations.iter().enumerate() {
            let g2: f64 = g.iter().map(|x| x * x).sum();
            if g2 < 1e-300 {
                continue;
            }
            // Normal equations: g2 (M^T M) beta = M^T sum_j g_j r_j.
            let mut rhs_raw = vec![0.0; a_dims];
            for (gj, r) in g.iter().zip(&residual) {
                for (acc, x) in rhs_raw.iter_mut().zip(r) {
                    *acc += gj * x;
                }
            }
            let rhs = m.transpose() * DVector::from_column_slice(&rhs_raw);
            let system: DMatrix<f64> = &mtm * g2;
            let beta = match system.lu().solve(&rhs) {
                Some(b) => b,
                None => continue,
            };
            let mut sse = 0.0;
            let contrib = &m * &beta;
            for (gj, r) in g.iter().zip(&residual) {
                for (x, c) in r.iter().zip(contrib.iter()) {
                    let e = x - gj * c;
                    sse += e * e;
                }
            }
            let candidate_mse = sse / n;
            let better = match &best {
                None => true,
                Some((_, _, best_mse)) => candidate_mse < *best_mse - 1e-15,
            };
            if better {
                best = Some((c_idx, beta.iter().cloned().collect(), candidate_mse));
            }
        }
        let Some((c_idx, beta, new_mse)) = best else {
            break;
        };
        if mse - new_mse < eps_mu {
            break;
        }
        // Update the residual with the accepted atom.
        let contrib: Vec<f64> = {
            let b = DVector::from_column_slice(&beta);
            (&m * b).iter().cloned().collect()
        };
        for (gj, r) in activations[c_idx].iter().zip(residual.iter_mut()) {
            for (x, c) in r.iter_mut().zip(&contrib) {
                *x -= gj * c;
            }
        }
        mse = new_mse;
        mse_history.push(mse);
        match chosen.iter_mut().find(|(i, _)| *i == c_idx) {
            Some((_, w)) => {
                for (acc, b) in w.iter_mut().zip(&beta) {
                    *acc += b;
                }
            }
            None => chosen.push((c_idx, beta)),
        }
    }

    Ok(PursuitResult {
        centres: chosen.iter().map(|(i, _)| dictionary[*i].clone()).collect(),
        weights: chosen.into_iter().map(|(_, w)| w).collect(),
        mse,
        mse_history,
    })
}
