//! Quantum gradient estimation for smooth (Gevrey) value functions.
//!
//! The estimator forms a uniform superposition over a parameter-offset grid,
//! imprints the smoothed stencil value of the (normalized) value function as
//! a phase, and reads the per-dimension slope off an inverse QFT. Two phase
//! backends exist: `ExactPhase` synthesizes the diagonal phase from exact
//! dynamic-programming values (a zero-error value phase oracle), while
//! `ProbabilityOracle` extracts the value from the return-controlled ancilla
//! rotation of an actual trajectory circuit.

use crate::error::{Error, Result};
use crate::gradient::differencing::central_diff_coefficients;
use crate::gradient::estimate::GradientEstimate;
use crate::ledger::QueryLedger;
use crate::qmdp::{trajectory_statevector, ClassicalPolicy, TabularMdp};
use crate::rng::child_rng;
use crate::statevector::StateVector;

/// Gevrey smoothness parameters of the value function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GevreyParams {
    pub big_m: f64,
    pub c: f64,
    pub sigma: f64,
}

/// `M = 4 r_max / (1 - gamma)`, `c = D T^2`, `sigma = 0`, with `D` the bound
/// on higher-order policy derivatives (1 for Raw-PQCs).
pub fn gevrey_params(mdp: &TabularMdp, d_bound: f64) -> GevreyParams {
    GevreyParams {
        big_m: 4.0 * mdp.r_max / (1.0 - mdp.gamma),
        c: d_bound * (mdp.horizon * mdp.horizon) as f64,
        sigma: 0.0,
    }
}

/// Which value phase oracle backs the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseBackend {
    /// Diagonal phase from exact dynamic-programming values.
    ExactPhase,
    /// Phase synthesized from the ancilla amplitude of the return-controlled
    /// rotation circuit.
    ProbabilityOracle,
}

/// Estimator configuration.
#[derive(Debug, Clone)]
pub struct GevreyOptions {
    pub epsilon: f64,
    pub delta: f64,
    /// Stencil order m (2m phase-oracle factors per grid pass).
    pub scheme_m: usize,
    /// Qubits per parameter dimension; default fits the 24-qubit cap.
    pub grid_bits: Option<usize>,
    /// Grid edge R; default keeps c R <= 1/2.
    pub grid_edge: Option<f64>,
    /// Repetitions aggregated by coordinate-wise median.
    pub repetitions: Option<usize>,
    /// Phase power n; default targets resolution epsilon / 3.
    pub n_power: Option<u64>,
    pub backend: PhaseBackend,
}

impl GevreyOptions {
    pub fn new(epsilon: f64, delta: f64) -> Self {
        Self {
            epsilon,
            delta,
            scheme_m: 1,
            grid_bits: None,
            grid_edge: None,
            repetitions: None,
            n_power: None,
            backend: PhaseBackend::ExactPhase,
        }
    }
}

fn default_repetitions(d: usize, delta: f64) -> usize {
    let base = ((d.max(2) as f64) / delta).ln().ceil() as usize;
    let n = base.max(5);
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

/// Core estimator over an arbitrary normalized value function
/// `f: R^d -> [-1, 1]`; returns the gradient estimate in the same units.
pub fn quantum_gevrey_gradient_fn(
    value: &mut dyn FnMut(&[f64]) -> Result<f64>,
    theta0: &[f64],
    opts: &GevreyOptions,
    gevrey_c: f64,
    seed: u64,
    ledger: &QueryLedger,
) -> Result<GradientEstimate> {
    let d = theta0.len();
    if d == 0 {
        return Err(Error::contract("gradient needs at least one parameter"));
    }
    let k = opts
        .grid_bits
        .unwrap_or_else(|| (crate::statevector::MAX_QUBITS / d).clamp(4, 8));
    if d * k > crate::statevector::MAX_QUBITS {
        return Err(Error::config(format!(
            "{d} dimensions at {k} qubits each exceed the simulator cap"
        )));
    }
    let grid_edge = opts
        .grid_edge
        .unwrap_or_else(|| (0.5 / gevrey_c.max(1.0)).min(0.25));
    let n_points = 1usize << k;
    let resolution = opts.epsilon / 3.0;
    let n_power = opts
        .n_power
        .unwrap_or_else(|| (2.0 * std::f64::consts::PI / (grid_edge * resolution)).ceil() as u64)
        .max(1);
    let reps = opts
        .repetitions
        .unwrap_or_else(|| default_repetitions(d, opts.delta));
    let coeffs = central_diff_coefficients(opts.scheme_m)?;
    let m = opts.scheme_m as i64;

    // Smoothed-value phase per grid point, shared by every repetition.
    let total = 1usize << (d * k);
    let mask = n_points - 1;
    let mut phases = vec![0.0f64; total];
    let mut offset = vec![0.0; d];
    let mut shifted = vec![0.0; d];
    for (idx, phase) in phases.iter_mut().enumerate() {
        for (j, o) in offset.iter_mut().enumerate() {
            let digit = (idx >> (j * k)) & mask;
            *o = grid_edge * digit as f64 / n_points as f64 - grid_edge / 2.0;
        }
        let mut smoothed = 0.0;
        for l in -m..=m {
            let cl = coeffs[(l + m) as usize];
            if cl == 0.0 {
                continue;
            }
            for (s, (t, o)) in shifted.iter_mut().zip(theta0.iter().zip(&offset)) {
                *s = t + l as f64 * o;
            }
            smoothed += cl * value(&shifted)?;
        }
        *phase = n_power as f64 * smoothed;
    }

    let layout: Vec<(String, usize)> = (0..d).map(|j| (format!("g{j}"), k)).collect();
    let layout_refs: Vec<(&str, usize)> = layout.iter().map(|(n, w)| (n.as_str(), *w)).collect();

    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); d];
    for rep in 0..reps {
        let mut sv = StateVector::new(&layout_refs)?;
        let regs: Vec<_> = (0..d)
            .map(|j| sv.register(&format!("g{j}")))
            .collect::<Result<Vec<_>>>()?;
        for &reg in &regs {
            sv.qft(reg); // |0> -> uniform superposition
        }
        sv.apply_diagonal_phase_full(|idx| phases[idx]);
        for &reg in &regs {
            sv.inverse_qft(reg);
        }
        let mut rng = child_rng(seed, rep as u64);
        for (j, &reg) in regs.iter().enumerate() {
            let outcome = sv.measure(reg, &mut rng) as i64;
            let signed = if outcome > n_points as i64 / 2 {
                outcome - n_points as i64
            } else {
                outcome
            };
            samples[j].push(
                2.0 * std::f64::consts::PI * signed as f64 / (n_power as f64 * grid_edge),
            );
        }
    }

    let estimate: Vec<f64> = samples.iter_mut().map(|s| median(s)).collect();
    let queries = n_power * 2 * opts.scheme_m as u64 * reps as u64;
    ledger.record_phase_queries(queries);
    GradientEstimate::new(estimate, queries, opts.epsilon, opts.delta, "gevrey")
}

/// Gradient of the MDP value at the policy's current parameters.
pub fn quantum_gevrey_gradient<P: ClassicalPolicy + Clone>(
    mdp: &TabularMdp,
    policy: &P,
    opts: &GevreyOptions,
    seed: u64,
    ledger: &QueryLedger,
) -> Result<GradientEstimate> {
    let scale = mdp.r_max / (1.0 - mdp.gamma);
    let theta0 = policy.params();
    let gevrey = gevrey_params(mdp, 1.0);
    let mut probe = policy.clone();
    let backend = opts.backend;

    let mut scaled_opts = opts.clone();
    scaled_opts.epsilon = opts.epsilon / scale;

    let mut value = |params: &[f64]| -> Result<f64> {
        probe.set_params(params)?;
        match backend {
            PhaseBackend::ExactPhase => Ok(mdp.exact_value(&probe) / scale),
            PhaseBackend::ProbabilityOracle => probability_oracle_value(mdp, &probe, ledger),
        }
    };
    let mut est = quantum_gevrey_gradient_fn(&mut value, &theta0, &scaled_opts, gevrey.c, seed, ledger)?;
    for e in est.estimate.iter_mut() {
        *e *= scale;
    }
    est.epsilon_target = opts.epsilon;
    est.backend = match backend {
        PhaseBackend::ExactPhase => "gevrey-exact-phase".to_string(),
        PhaseBackend::ProbabilityOracle => "gevrey-probability-oracle".to_string(),
    };
    // Theorem accounting: each phase query hides a T-step trajectory.
    ledger.record_interactions(est.queries * mdp.horizon as u64);
    Ok(est)
}

/// Normalized value from the probability-oracle circuit: trajectory
/// superposition, return register, and a return-controlled ancilla rotation
/// whose `|0>` probability is the normalized value.
fn probability_oracle_value<P: ClassicalPolicy>(
    mdp: &TabularMdp,
    policy: &P,
    ledger: &QueryLedger,
) -> Result<f64> {
    let ret_bits = 8;
    let codec = mdp.return_codec(ret_bits)?;
    let (mut sv, s_regs, a_regs) =
        trajectory_statevector(mdp, &[("ret", ret_bits), ("anc", 1)])?;
    let ret_reg = sv.register("ret")?;
    let anc = sv.register("anc")?;
    mdp.oracle_init(&mut sv, s_regs[0], ledger)?;
    mdp.oracle_trajectory(&mut sv, policy, &s_regs, &a_regs, ledger)?;
    mdp.oracle_return(&mut sv, &s_regs, &a_regs, ret_reg, &codec, ledger)?;

    let max_ret = mdp.max_return();
    let anc_qubit = sv.reg_offset(anc);
    let ret_offset = sv.reg_offset(ret_reg);
    for v in 0..codec.total_points() {
        let r_norm = (codec.decode(v)?[0] / max_ret).clamp(0.0, 1.0);
        // |0> amplitude sqrt(R~): angle 2 acos(sqrt(R~)).
        let angle = 2.0 * r_norm.sqrt().acos();
        if angle == 0.0 {
            continue;
        }
        let controls: Vec<(usize, bool)> = (0..ret_bits)
            .map(|b| (ret_offset + b, (v >> b) & 1 == 1))
            .collect();
        sv.apply_multicontrolled_ry(anc_qubit, &controls, angle)?;
    }
    // P(anc = 0) = sum_tau P(tau) R~(tau) = V~ (up to return quantization).
    let p0 = sv.projector_expectation(anc, &[0]);
    // Normalized by r_max / (1 - gamma) rather than max_return: rescale.
    Ok(p0 * max_ret / (mdp.r_max / (1.0 - mdp.gamma)))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite estimates"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
