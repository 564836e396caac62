//! Quantum multivariate Monte Carlo mean estimators and the classical
//! Hoeffding baseline.
//!
//! QBounded reconstructs `E[X]` from directional phases over a centered grid
//! followed by an inverse grid Fourier transform. The directional phase
//! `m E[trunc(zeta <x, X>)]` is synthesized exactly per grid point from the
//! enumerated outcome distribution (an idealized, zero-error directional
//! mean oracle); the Fourier reconstruction and measurement run honestly.
//! When the truncation provably never binds, the grid state is an exact
//! tensor product and the simulation factorizes per dimension; otherwise a
//! joint-grid statevector is used, subject to the qubit cap.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::gradient::estimate::GradientEstimate;
use crate::gradient::oracle::BinaryOracle;
use crate::ledger::QueryLedger;
use crate::rng::{child_rng, Rng};
use crate::statevector::StateVector;

/// Estimator configuration.
#[derive(Debug, Clone)]
pub struct QmcOptions {
    /// Median repetitions; default grows with log(d / delta).
    pub repetitions: Option<usize>,
    /// Grid constant alpha in the grid-size formula.
    pub alpha: f64,
    /// Force the joint-grid simulation even when the product certificate
    /// holds (testing hook).
    pub force_joint: bool,
    /// Cap on log2(grid size per dimension).
    pub max_grid_bits: usize,
}

impl Default for QmcOptions {
    fn default() -> Self {
        Self {
            repetitions: None,
            alpha: 1.0,
            force_joint: false,
            max_grid_bits: 20,
        }
    }
}

fn default_repetitions(d: usize, delta: f64) -> usize {
    let n = (((d.max(2)) as f64) / delta).ln().ceil() as usize;
    let n = n.max(5);
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Grid label of index `j`: `(2j + 1 - m) / (2m)`, inside `(-1/2, 1/2)`.
fn grid_point(j: usize, m: usize) -> f64 {
    (2.0 * j as f64 + 1.0 - m as f64) / (2.0 * m as f64)
}

/// Applies the inverse centered-grid Fourier transform in place:
/// `out_k = (1/sqrt(m)) sum_j exp(-2 pi i m x_j y_k) in_j`, factored as
/// diagonal phases around a standard DFT.
fn centered_inverse_qft(buf: &mut [Complex64]) {
    let m = buf.len();
    let twiddle = |t: usize| {
        Complex64::from_polar(1.0, -std::f64::consts::PI * t as f64 * (1.0 - m as f64) / m as f64)
    };
    for (j, b) in buf.iter_mut().enumerate() {
        *b *= twiddle(j);
    }
    let fft = FftPlanner::new().plan_fft_forward(m);
    fft.process(buf);
    let scale = 1.0 / (m as f64).sqrt();
    for (k, b) in buf.iter_mut().enumerate() {
        *b *= twiddle(k) * scale;
    }
}

struct QmcGeometry {
    m: usize,
    zeta: f64,
    reps: usize,
}

fn geometry(oracle: &BinaryOracle, n: u64, delta: f64, opts: &QmcOptions) -> Result<QmcGeometry> {
    let d = oracle.dim();
    if n == 0 {
        return Err(Error::contract("query budget must be positive"));
    }
    let ln_term = (d as f64 / delta).ln().max(1e-6);
    let m_raw = 8.0 * std::f64::consts::PI * n as f64 / (opts.alpha * ln_term);
    let bits = (m_raw.log2().ceil() as usize).max(1);
    if bits > opts.max_grid_bits {
        return Err(Error::budget(format!(
            "grid of 2^{bits} points per dimension exceeds the 2^{} cap",
            opts.max_grid_bits
        )));
    }
    let m = 1usize << bits;
    let zeta = 1.0 / (400.0 * std::f64::consts::PI * n as f64 * d as f64).ln().sqrt();
    let reps = opts.repetitions.unwrap_or_else(|| default_repetitions(d, delta));
    Ok(QmcGeometry { m, zeta, reps })
}

/// Bounded quantum multivariate Monte Carlo: estimates `E[X]` for payloads
/// with `||X||_2 <= 1` at query budget `n`.
pub fn qbounded(
    oracle: &BinaryOracle,
    n: u64,
    delta: f64,
    opts: &QmcOptions,
    seed: u64,
    ledger: &QueryLedger,
) -> Result<GradientEstimate> {
    if oracle.max_l2() > 1.0 + 1e-9 {
        return Err(Error::contract(
            "qbounded needs caller-normalized payloads with l2 norm at most 1",
        ));
    }
    let geo = geometry(oracle, n, delta, opts)?;
    let x_max = (geo.m as f64 - 1.0) / (2.0 * geo.m as f64);
    // Truncation never binds when zeta |<x, X>| <= 1 for every outcome and
    // grid point; then the grid state is an exact product across dimensions.
    let certified = geo.zeta * x_max * oracle.max_l1() <= 1.0;

    let estimate = if certified && !opts.force_joint {
        qbounded_product(oracle, &geo, seed, ledger)?
    } else {
        qbounded_joint(oracle, &geo, seed, ledger)?
    };
    ledger.record_binary_queries(n);
    ledger.record_interactions(n * oracle.interactions_per_query);
    let resolution = 2.0 * std::f64::consts::PI / (geo.zeta * geo.m as f64);
    GradientEstimate::new(
        estimate,
        n,
        resolution,
        delta,
        if certified && !opts.force_joint {
            "qbounded-product"
        } else {
            "qbounded-joint"
        },
    )
}

/// Exact product-state path: per dimension, an m-point phase vector and a
/// centered inverse QFT.
fn qbounded_product(
    oracle: &BinaryOracle,
    geo: &QmcGeometry,
    seed: u64,
    ledger: &QueryLedger,
) -> Result<Vec<f64>> {
    let d = oracle.dim();
    let mean = oracle.expectation();
    let mut estimate = vec![0.0; d];
    let amp = Complex64::new(1.0 / (geo.m as f64).sqrt(), 0.0);
    for (j, e) in mean.iter().enumerate() {
        let mut buf: Vec<Complex64> = (0..geo.m)
            .map(|idx| {
                amp * Complex64::from_polar(
                    1.0,
                    geo.m as f64 * geo.zeta * grid_point(idx, geo.m) * e,
                )
            })
            .collect();
        centered_inverse_qft(&mut buf);
        let probs: Vec<f64> = buf.iter().map(|a| a.norm_sqr()).collect();
        let mut samples = Vec::with_capacity(geo.reps);
        for rep in 0..geo.reps {
            let mut rng = child_rng(seed, ((j as u64) << 32) | rep as u64);
            let k = sample_from(&probs, &mut rng);
            samples.push(2.0 * std::f64::consts::PI * grid_point(k, geo.m) / geo.zeta);
        }
        estimate[j] = median(&mut samples);
        ledger.record_idealized_invocation(geo.reps as u64);
    }
    Ok(estimate)
}

/// Joint-grid path on the statevector, used when truncation may bind.
fn qbounded_joint(
    oracle: &BinaryOracle,
    geo: &QmcGeometry,
    seed: u64,
    ledger: &QueryLedger,
) -> Result<Vec<f64>> {
    let d = oracle.dim();
    let bits = geo.m.trailing_zeros() as usize;
    if d * bits > crate::statevector::MAX_QUBITS {
        return Err(Error::config(format!(
            "joint grid needs {} qubits, cap is {}",
            d * bits,
            crate::statevector::MAX_QUBITS
        )));
    }
    let mask = geo.m - 1;
    // Directional phase per joint grid point, truncation applied per
    // outcome.
    let total = 1usize << (d * bits);
    let mut phases = vec![0.0f64; total];
    let mut x = vec![0.0; d];
    for (idx, phase) in phases.iter_mut().enumerate() {
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = grid_point((idx >> (j * bits)) & mask, geo.m);
        }
        let mut expect = 0.0;
        for o in oracle.outcomes() {
            let dot: f64 = x.iter().zip(&o.payload).map(|(a, b)| a * b).sum();
            let v = geo.zeta * dot;
            if v.abs() <= 1.0 {
                expect += o.prob * v;
            }
        }
        *phase = geo.m as f64 * expect;
    }

    let layout: Vec<(String, usize)> = (0..d).map(|j| (format!("x{j}"), bits)).collect();
    let layout_refs: Vec<(&str, usize)> = layout.iter().map(|(n, w)| (n.as_str(), *w)).collect();
    let twiddle = move |t: usize| {
        -std::f64::consts::PI * t as f64 * (1.0 - geo.m as f64) / geo.m as f64
    };
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(geo.reps); d];
    for rep in 0..geo.reps {
        let mut sv = StateVector::new(&layout_refs)?;
        let regs: Vec<_> = (0..d)
            .map(|j| sv.register(&format!("x{j}")))
            .collect::<Result<Vec<_>>>()?;
        for &reg in &regs {
            sv.qft(reg);
        }
        sv.apply_diagonal_phase_full(|idx| phases[idx]);
        for &reg in &regs {
            sv.apply_diagonal_phase(reg, twiddle);
            sv.inverse_qft(reg);
            sv.apply_diagonal_phase(reg, twiddle);
        }
        let mut rng = child_rng(seed, rep as u64);
        for (j, &reg) in regs.iter().enumerate() {
            let k = sv.measure(reg, &mut rng);
            samples[j].push(2.0 * std::f64::consts::PI * grid_point(k, geo.m) / geo.zeta);
        }
        ledger.record_idealized_invocation(1);
    }
    Ok(samples.iter_mut().map(|s| median(s)).collect())
}

fn sample_from(probs: &[f64], rng: &mut Rng) -> usize {
    use rand::Rng as _;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Coordinate-wise median-of-means over oracle measurements (the classical
/// sub-Gaussian initializer).
pub fn median_of_means(
    oracle: &BinaryOracle,
    groups: usize,
    group_size: usize,
    rng: &mut Rng,
    ledger: &QueryLedger,
) -> Vec<f64> {
    let d = oracle.dim();
    let mut group_means: Vec<Vec<f64>> = Vec::with_capacity(groups);
    for _ in 0..groups {
        let mut mean = vec![0.0; d];
        for _ in 0..group_size {
            let o = oracle.sample(rng);
            for (m, x) in mean.iter_mut().zip(&o.payload) {
                *m += x;
            }
        }
        for m in mean.iter_mut() {
            *m /= group_size as f64;
        }
        group_means.push(mean);
    }
    ledger.record_interactions((groups * group_size) as u64 * oracle.interactions_per_query);
    ledger.record_classical_trajectories((groups * group_size) as u64);
    (0..d)
        .map(|j| {
            let mut col: Vec<f64> = group_means.iter().map(|g| g[j]).collect();
            median(&mut col)
        })
        .collect()
}

/// Variance-adaptive estimator: classical median-of-means initializer,
/// exact upper-tail quantile shells of `||X - X'||_2`, QBounded per shell,
/// recombined as `X' + sum_j q_j Ybar_j`.
pub fn qestimator(
    oracle: &BinaryOracle,
    n: u64,
    delta: f64,
    opts: &QmcOptions,
    seed: u64,
    ledger: &QueryLedger,
) -> Result<GradientEstimate> {
    let d = oracle.dim();
    let mut rng = child_rng(seed, 0xC1A551C);
    let groups = {
        let g = ((1.0 / delta).ln().ceil() as usize).max(3);
        if g % 2 == 0 {
            g + 1
        } else {
            g
        }
    };
    let centre = median_of_means(oracle, groups, 4, &mut rng, ledger);

    let norms: Vec<f64> = oracle
        .outcomes()
        .iter()
        .map(|o| {
            o.payload
                .iter()
                .zip(&centre)
                .map(|(x, c)| (x - c) * (x - c))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    if max_norm < 1e-12 {
        // Degenerate payload: every outcome equals the classical estimate.
        ledger.record_binary_queries(n);
        return GradientEstimate::new(centre, n, 0.0, delta, "qestimator-degenerate");
    }

    let quantiles = tail_quantiles(oracle, &norms);
    let mut estimate = centre.clone();
    let mut previous = 0.0;
    for (level, q) in quantiles.iter().enumerate() {
        if *q <= previous {
            continue;
        }
        let (lo, hi, scale) = (previous, *q, *q);
        let shell = oracle.map_payload(|p| {
            let diff: Vec<f64> = p.iter().zip(&centre).map(|(x, c)| x - c).collect();
            let norm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > lo && norm <= hi {
                diff.iter().map(|v| v / scale).collect()
            } else {
                vec![0.0; d]
            }
        })?;
        let scratch = QueryLedger::new();
        let sub = qbounded(&shell, n, delta, opts, child_seed_for(seed, level), &scratch)?;
        ledger.record_idealized_invocation(scratch.idealized_invocations());
        for (e, y) in estimate.iter_mut().zip(&sub.estimate) {
            *e += q * y;
        }
        previous = *q;
        if previous >= max_norm {
            break;
        }
    }
    ledger.record_binary_queries(n);
    ledger.record_interactions(n * oracle.interactions_per_query);
    GradientEstimate::new(estimate, n, 0.0, delta, "qestimator")
}

fn child_seed_for(seed: u64, level: usize) -> u64 {
    crate::rng::child_seed(seed, 0xE57 + level as u64)
}

/// Exact upper-tail quantiles of the centred norms at levels `2^-j`:
/// `q_j = min { q in norms : P(norm > q) <= 2^-j }`.
pub fn tail_quantiles(oracle: &BinaryOracle, norms: &[f64]) -> Vec<f64> {
    let mut pairs: Vec<(f64, f64)> = norms
        .iter()
        .zip(oracle.outcomes())
        .map(|(n, o)| (*n, o.prob))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite norms"));
    let max_norm = pairs.last().map(|p| p.0).unwrap_or(0.0);
    let mut quantiles = Vec::new();
    for j in 1..=48 {
        let level = 0.5f64.powi(j);
        let chosen = pairs
            .iter()
            .map(|(q, _)| *q)
            .find(|q| tail_prob(&pairs, *q) <= level)
            .unwrap_or(max_norm);
        quantiles.push(chosen);
        if chosen >= max_norm {
            break;
        }
    }
    // The last shell must reach the maximal norm.
    if quantiles.last().map(|q| *q < max_norm).unwrap_or(true) {
        quantiles.push(max_norm);
    }
    quantiles
}

fn tail_prob(sorted_pairs: &[(f64, f64)], q: f64) -> f64 {
    sorted_pairs
        .iter()
        .filter(|(n, _)| *n > q)
        .map(|(_, p)| p)
        .sum()
}

/// Classical multivariate Monte Carlo baseline at the Hoeffding budget
/// `n = ceil((2 B^2 / eps^2) ln(2d / delta))` for per-coordinate bound `B`.
pub fn classical_mvmc(
    oracle: &BinaryOracle,
    epsilon: f64,
    delta: f64,
    bound: f64,
    seed: u64,
    ledger: &QueryLedger,
) -> Result<GradientEstimate> {
    if !(epsilon > 0.0 && bound > 0.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::contract("classical baseline needs positive inputs"));
    }
    let d = oracle.dim();
    let n = ((2.0 * bound * bound / (epsilon * epsilon))
        * (2.0 * d as f64 / delta).ln())
    .ceil() as u64;
    let mut rng = child_rng(seed, 0xC7A55);
    let mut mean = vec![0.0; d];
    for _ in 0..n {
        let o = oracle.sample(&mut rng);
        for (m, x) in mean.iter_mut().zip(&o.payload) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    ledger.record_binary_queries(n);
    ledger.record_interactions(n * oracle.interactions_per_query);
    ledger.record_classical_trajectories(n);
    GradientEstimate::new(mean, n, epsilon, delta, "classical-mvmc")
}
