//! Representer Raw-PQC: kernel-activated controlled rotations on the action
//! qubits.
//!
//! Each centre contributes an ancilla block whose `|0...0>` amplitude is the
//! feature overlap `<phi(s)|phi(c_i)>`; rotations `R_Y(theta_iq)` on the
//! action qubits fire on that block. The action marginal is therefore a
//! mixture over centre-activation patterns with weights `kappa(s, c_i)`,
//! which has an exact closed form and, coordinate by coordinate, is a
//! first-harmonic trigonometric polynomial in every angle, so the two-term
//! parameter-shift rule is exact.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::encoding::{GridCodec, RegisterLayout};
use crate::error::{Error, Result};
use crate::kernels::ScalarKernel;
use crate::qmdp::ClassicalPolicy;
use crate::rng::Rng;
use crate::statevector::{state_preparation_unitary, StateVector};

/// Raw-PQC policy with kernel-controlled rotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPqc {
    pub layout: RegisterLayout,
    pub kernel: ScalarKernel,
    pub centres: Vec<Vec<f64>>,
    /// Rotation angles, one per (centre, action qubit).
    pub angles: Vec<Vec<f64>>,
}

impl RawPqc {
    pub fn new(
        layout: RegisterLayout,
        kernel: ScalarKernel,
        centres: Vec<Vec<f64>>,
        angles: Vec<Vec<f64>>,
    ) -> Result<Self> {
        kernel.validate()?;
        let p = Self {
            layout,
            kernel,
            centres,
            angles,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if self.centres.is_empty() || self.centres.len() != self.angles.len() {
            return Err(Error::config("centres and angle rows must pair up"));
        }
        if self.centres.len() > 16 {
            return Err(Error::config("raw PQC supports at most 16 centres"));
        }
        let wa = self.layout.action.qubits();
        for c in &self.centres {
            if c.len() != self.layout.state.dims {
                return Err(Error::config("centre dimension mismatch"));
            }
        }
        for row in &self.angles {
            if row.len() != wa {
                return Err(Error::config("angle row must cover every action qubit"));
            }
        }
        Ok(())
    }

    pub fn n_centres(&self) -> usize {
        self.centres.len()
    }

    fn action_qubits(&self) -> usize {
        self.layout.action.qubits()
    }

    /// Kernel activations `kappa(s, c_i)`, each in [0, 1].
    fn activations(&self, s: usize) -> Vec<f64> {
        let state = self.layout.state.decode(s).expect("state index in range");
        self.centres
            .iter()
            .map(|c| {
                self.kernel
                    .eval(&state, c)
                    .expect("dimensions validated")
                    .clamp(0.0, 1.0)
            })
            .collect()
    }

    /// Closed-form action distribution: mixture over activation patterns.
    fn action_distribution(&self, s: usize) -> Vec<f64> {
        let n = self.n_centres();
        let wa = self.action_qubits();
        let kappas = self.activations(s);
        let n_a = self.layout.n_actions();
        let mut probs = vec![0.0; n_a];
        for pattern in 0..(1usize << n) {
            let mut w = 1.0;
            for (i, &k) in kappas.iter().enumerate() {
                w *= if (pattern >> i) & 1 == 1 { k } else { 1.0 - k };
                if w == 0.0 {
                    break;
                }
            }
            if w == 0.0 {
                continue;
            }
            // Per-qubit one probabilities under the summed rotation.
            let mut p_one = vec![0.0; wa];
            for (q, p) in p_one.iter_mut().enumerate() {
                let theta: f64 = (0..n)
                    .filter(|i| (pattern >> i) & 1 == 1)
                    .map(|i| self.angles[i][q])
                    .sum();
                *p = (theta / 2.0).sin().powi(2);
            }
            for (a, slot) in probs.iter_mut().enumerate() {
                let mut pa = w;
                for (q, p1) in p_one.iter().enumerate() {
                    pa *= if (a >> q) & 1 == 1 { *p1 } else { 1.0 - *p1 };
                }
                *slot += pa;
            }
        }
        probs
    }

    /// Mean action `sum_a a <P_a>` of the closed-form distribution.
    pub fn policy_mean(&self, s: usize) -> Vec<f64> {
        let probs = self.action_distribution(s);
        let mut mean = vec![0.0; self.layout.action.dims];
        for (a, p) in probs.iter().enumerate() {
            let v = self.layout.action.decode(a).expect("action in range");
            for (m, x) in mean.iter_mut().zip(v) {
                *m += p * x;
            }
        }
        mean
    }

    /// Circuit-path probability: ancilla inner-product blocks plus
    /// controlled rotations, evaluated on the statevector.
    pub fn prob_via_circuit(&self, s: usize, a: usize) -> Result<f64> {
        let state = self.layout.state.decode(s)?;
        let wa = self.action_qubits();
        let anc_width = ancilla_width(&self.kernel, &self.layout.state);
        let n = self.n_centres();

        let mut names: Vec<(String, usize)> = (0..n)
            .map(|i| (format!("anc{i}"), anc_width))
            .collect();
        names.push(("act".to_string(), wa));
        let layout: Vec<(&str, usize)> = names.iter().map(|(s, w)| (s.as_str(), *w)).collect();
        let mut sv = StateVector::new(&layout)?;
        let act = sv.register("act")?;
        let act_offset = sv.reg_offset(act);

        for (i, centre) in self.centres.iter().enumerate() {
            let anc = sv.register(&format!("anc{i}"))?;
            match feature_vector(&self.kernel, &self.layout.state, &state)? {
                Some(fs) => {
                    let fc = feature_vector(&self.kernel, &self.layout.state, centre)?
                        .expect("same kernel yields features");
                    let dim = 1usize << anc_width;
                    let prep_s = state_preparation_unitary(&pad(&fs, dim))?;
                    let prep_c = state_preparation_unitary(&pad(&fc, dim))?;
                    sv.apply_inner_product_subcircuit(&prep_s, &prep_c, anc)?;
                }
                None => {
                    // Classical kernel: load sqrt(kappa) onto |0> directly.
                    let kappa = self
                        .kernel
                        .eval(&state, centre)?
                        .clamp(0.0, 1.0);
                    sv.apply_multicontrolled_ry(
                        sv.reg_offset(anc),
                        &[],
                        2.0 * kappa.sqrt().acos(),
                    )?;
                }
            }
            let controls: Vec<(usize, bool)> = (0..anc_width)
                .map(|b| (sv.reg_offset(anc) + b, false))
                .collect();
            for q in 0..wa {
                sv.apply_multicontrolled_ry(act_offset + q, &controls, self.angles[i][q])?;
            }
        }
        Ok(sv.projector_expectation(act, &[a]))
    }
}

impl ClassicalPolicy for RawPqc {
    fn n_actions(&self) -> usize {
        self.layout.n_actions()
    }

    fn prob(&self, s: usize, a: usize) -> f64 {
        self.action_distribution(s)[a]
    }

    fn params(&self) -> Vec<f64> {
        self.angles.iter().flatten().cloned().collect()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        let wa = self.action_qubits();
        if params.len() != self.n_centres() * wa {
            return Err(Error::contract("angle parameter count mismatch"));
        }
        for (i, chunk) in params.chunks(wa).enumerate() {
            self.angles[i].copy_from_slice(chunk);
        }
        Ok(())
    }

    /// Exact gradient via the two-term parameter-shift rule.
    fn grad_log_prob(&self, s: usize, a: usize) -> Vec<f64> {
        let p = self.prob(s, a);
        let base = self.params();
        let mut probe = self.clone();
        let mut grad = vec![0.0; base.len()];
        for (j, g) in grad.iter_mut().enumerate() {
            let mut shifted = base.clone();
            shifted[j] += std::f64::consts::FRAC_PI_2;
            probe.set_params(&shifted).expect("shape preserved");
            let plus = probe.prob(s, a);
            shifted[j] -= std::f64::consts::PI;
            probe.set_params(&shifted).expect("shape preserved");
            let minus = probe.prob(s, a);
            *g = (plus - minus) / (2.0 * p);
        }
        grad
    }
}

fn pad(v: &[f64], dim: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); dim];
    for (o, &x) in out.iter_mut().zip(v) {
        *o = Complex64::new(x, 0.0);
    }
    out
}

/// Ancilla width needed for the kernel's feature encoding.
fn ancilla_width(kernel: &ScalarKernel, codec: &GridCodec) -> usize {
    fn bits_for(len: usize) -> usize {
        (usize::BITS - (len - 1).leading_zeros()).max(1) as usize
    }
    match kernel {
        ScalarKernel::KroneckerDelta => codec.qubits(),
        ScalarKernel::PureStateOverlap => bits_for(codec.dims + 1),
        ScalarKernel::RPowerOverlap { r } => bits_for((codec.dims + 1).pow(*r)),
        ScalarKernel::SquaredCosine { .. } => codec.dims,
        ScalarKernel::Rbf { .. } | ScalarKernel::Matern { .. } => 1,
    }
}

/// Feature encoding whose pairwise overlap squares to the kernel; `None`
/// for classical kernels, which use a synthetic rotation instead.
fn feature_vector(kernel: &ScalarKernel, codec: &GridCodec, x: &[f64]) -> Result<Option<Vec<f64>>> {
    Ok(match kernel {
        ScalarKernel::KroneckerDelta => {
            let mut e = vec![0.0; codec.total_points()];
            e[codec.encode(x)?] = 1.0;
            Some(e)
        }
        ScalarKernel::PureStateOverlap => Some(amplitude_feature(x)),
        ScalarKernel::RPowerOverlap { r } => {
            let base = amplitude_feature(x);
            let mut v = vec![1.0];
            for _ in 0..*r {
                let mut next = Vec::with_capacity(v.len() * base.len());
                for &p in &v {
                    for &b in &base {
                        next.push(p * b);
                    }
                }
                v = next;
            }
            Some(v)
        }
        ScalarKernel::SquaredCosine { bandwidth } => {
            let mut v = vec![1.0];
            for &xi in x {
                let (s, c) = (bandwidth * xi / 2.0).sin_cos();
                let mut next = Vec::with_capacity(v.len() * 2);
                for &p in &v {
                    next.push(p * c);
                    next.push(p * s);
                }
                v = next;
            }
            Some(v)
        }
        ScalarKernel::Rbf { .. } | ScalarKernel::Matern { .. } => None,
    })
}

/// Amplitude encoding with a dedicated direction for the zero vector.
fn amplitude_feature(x: &[f64]) -> Vec<f64> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut v = vec![0.0; x.len() + 1];
    if norm == 0.0 {
        v[x.len()] = 1.0;
    } else {
        for (o, &xi) in v.iter_mut().zip(x) {
            *o = xi / norm;
        }
    }
    v
}

/// Parameter-shift expansion of a higher-order derivative: iterating the
/// two-term rule over the multi-index yields shift vectors (in units of
/// pi/2) with rational coefficients, `2^p` terms before merging.
pub fn shift_expansion(alpha: &[usize], d: usize) -> Vec<(f64, Vec<i32>)> {
    let mut terms: HashMap<Vec<i32>, f64> = HashMap::new();
    terms.insert(vec![0; d], 1.0);
    for &j in alpha {
        let mut next: HashMap<Vec<i32>, f64> = HashMap::new();
        for (shift, coef) in terms {
            for (delta, sign) in [(1, 0.5), (-1, -0.5)] {
                let mut s = shift.clone();
                s[j] += delta;
                *next.entry(s).or_insert(0.0) += coef * sign;
            }
        }
        terms = next;
    }
    terms.into_iter().map(|(s, c)| (c, s)).collect()
}

/// Evaluates `sum_a |d_alpha pi(a|s)|` for random angle settings and
/// multi-indices of order up to `p_max`, returning the maximum observed.
/// For Raw-PQCs this never exceeds 1.
pub fn check_higher_order_bound(
    policy: &RawPqc,
    p_max: usize,
    trials: usize,
    rng: &mut Rng,
) -> Result<f64> {
    use rand::Rng as _;
    if p_max > 3 {
        return Err(Error::contract("higher-order check supports p <= 3"));
    }
    let d = policy.n_params();
    let n_states = policy.layout.n_states();
    let mut probe = policy.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let theta: Vec<f64> = (0..d)
            .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        let p = rng.gen_range(0..=p_max);
        let alpha: Vec<usize> = (0..p).map(|_| rng.gen_range(0..d)).collect();
        let s = rng.gen_range(0..n_states);
        let value = higher_order_derivative_l1(policy, &mut probe, &theta, &alpha, s)?;
        worst = worst.max(value);
    }
    Ok(worst)
}

/// `sum_a |d_alpha pi(a|s)|` at the given angles via the shift expansion.
fn higher_order_derivative_l1(
    policy: &RawPqc,
    probe: &mut RawPqc,
    theta: &[f64],
    alpha: &[usize],
    s: usize,
) -> Result<f64> {
    let d = theta.len();
    let terms = shift_expansion(alpha, d);
    let n_a = policy.layout.n_actions();
    let mut deriv = vec![0.0; n_a];
    for (coef, shift) in &terms {
        let shifted: Vec<f64> = theta
            .iter()
            .zip(shift)
            .map(|(t, s)| t + *s as f64 * std::f64::consts::FRAC_PI_2)
            .collect();
        probe.set_params(&shifted)?;
        let dist = probe.action_distribution(s);
        for (acc, p) in deriv.iter_mut().zip(dist) {
            *acc += coef * p;
        }
    }
    Ok(deriv.iter().map(|v| v.abs()).sum())
}

/// Solves the Gram system `kappa(s_j, c_i) beta_i = mean(s_j)` over probe
/// states, returning weights `beta[i]` per action dimension. Diagnostic for
/// the representer identity on small instances.
pub fn extract_representer_weights(policy: &RawPqc, probes: &[usize]) -> Result<Vec<Vec<f64>>> {
    use nalgebra::{DMatrix, DVector};
    let n = policy.n_centres();
    if probes.len() < n {
        return Err(Error::contract("need at least as many probes as centres"));
    }
    let mut k = DMatrix::zeros(probes.len(), n);
    for (j, &s) in probes.iter().enumerate() {
        let state = policy.layout.state.decode(s)?;
        for (i, c) in policy.centres.iter().enumerate() {
            k[(j, i)] = policy.kernel.eval(&state, c)?;
        }
    }
    let a_dims = policy.layout.action.dims;
    let means: Vec<Vec<f64>> = probes.iter().map(|&s| policy.policy_mean(s)).collect();
    let svd = k.svd(true, true);
    let mut beta = vec![vec![0.0; a_dims]; n];
    for dim in 0..a_dims {
        let y = DVector::from_iterator(probes.len(), means.iter().map(|m| m[dim]));
        let sol = svd
            .solve(&y, 1e-12)
            .map_err(|e| Error::solver(e.to_string()))?;
        for i in 0..n {
            beta[i][dim] = sol[i];
        }
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{DimRange, GridCodec, RegisterLayout};
    use rand::Rng as _;

    fn layout(s_bits: usize, a_bits: usize) -> RegisterLayout {
        RegisterLayout::new(
            GridCodec::new(1, s_bits, DimRange::new(0.0, 3.0)).unwrap(),
            GridCodec::new(1, a_bits, DimRange::new(0.0, 3.0)).unwrap(),
            4,
            1.0,
        )
        .unwrap()
    }

    fn kron_policy(angles: Vec<Vec<f64>>) -> RawPqc {
        let l = layout(1, 1);
        let centres = l.state.grid();
        RawPqc::new(l, ScalarKernel::KroneckerDelta, centres, angles).unwrap()
    }

    #[test]
    fn deterministic_angles_give_deterministic_policy() {
        let p = kron_policy(vec![vec![std::f64::consts::PI], vec![0.0]]);
        assert!((p.prob(0, 1) - 1.0).abs() < 1e-12);
        assert!((p.prob(1, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_pi_gives_uniform_policy() {
        let p = kron_policy(vec![
            vec![std::f64::consts::FRAC_PI_2],
            vec![std::f64::consts::FRAC_PI_2],
        ]);
        for s in 0..2 {
            for a in 0..2 {
                assert!((p.prob(s, a) - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn probabilities_normalize_for_every_kernel() {
        let mut rng = crate::rng::rng_from_seed(8);
        let l = layout(2, 2);
        for kernel in [
            ScalarKernel::KroneckerDelta,
            ScalarKernel::PureStateOverlap,
            ScalarKernel::SquaredCosine { bandwidth: 0.9 },
            ScalarKernel::Rbf { lengthscale: 1.2 },
        ] {
            let centres: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.gen_range(0.0..3.0)]).collect();
            let angles: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let p = RawPqc::new(l, kernel, centres, angles).unwrap();
            for s in 0..4 {
                let total: f64 = (0..4).map(|a| p.prob(s, a)).sum();
                assert!((total - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn circuit_path_matches_closed_form() {
        let mut rng = crate::rng::rng_from_seed(15);
        let l = layout(1, 2);
        for kernel in [
            ScalarKernel::KroneckerDelta,
            ScalarKernel::PureStateOverlap,
            ScalarKernel::RPowerOverlap { r: 2 },
            ScalarKernel::SquaredCosine { bandwidth: 1.1 },
            ScalarKernel::Matern {
                nu: crate::kernels::MaternNu::Half,
                lengthscale: 1.0,
            },
        ] {
            // Kronecker features are basis encodings, so its centres must be
            // grid points (observed states); other kernels take any vector.
            let centres: Vec<Vec<f64>> = if kernel == ScalarKernel::KroneckerDelta {
                l.state.grid().into_iter().take(2).collect()
            } else {
                (0..2).map(|_| vec![rng.gen_range(0.0..3.0)]).collect()
            };
            let angles: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let p = RawPqc::new(l, kernel.clone(), centres, angles).unwrap();
            for s in 0..2 {
                for a in 0..4 {
                    let closed = p.prob(s, a);
                    let circuit = p.prob_via_circuit(s, a).unwrap();
                    assert!(
                        (closed - circuit).abs() < 1e-10,
                        "{kernel:?} s={s} a={a}: closed {closed} vs circuit {circuit}"
                    );
                }
            }
        }
    }

    #[test]
    fn parameter_shift_matches_finite_differences() {
        let mut rng = crate::rng::rng_from_seed(21);
        let l = layout(1, 2);
        let centres: Vec<Vec<f64>> = (0..2).map(|_| vec![rng.gen_range(0.0..3.0)]).collect();
        let angles: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..2).map(|_| rng.gen_range(-1.5..1.5)).collect())
            .collect();
        let p = RawPqc::new(l, ScalarKernel::SquaredCosine { bandwidth: 0.8 }, centres, angles)
            .unwrap();
        let (s, a) = (1, 2);
        let analytic = p.grad_log_prob(s, a);
        let h = 1e-6;
        let base = p.params();
        let mut probe = p.clone();
        for (j, &g) in analytic.iter().enumerate() {
            let mut v = base.clone();
            v[j] += h;
            probe.set_params(&v).unwrap();
            let plus = probe.prob(s, a).ln();
            v[j] -= 2.0 * h;
            probe.set_params(&v).unwrap();
            let minus = probe.prob(s, a).ln();
            let fd = (plus - minus) / (2.0 * h);
            assert!((fd - g).abs() < 1e-5 * (1.0 + g.abs()));
        }
    }

    #[test]
    fn shift_expansion_orders() {
        // p = 1: two terms with coefficients +-1/2.
        let t = shift_expansion(&[0], 2);
        assert_eq!(t.len(), 2);
        let total: f64 = t.iter().map(|(c, _)| c.abs()).sum();
        assert!((total - 1.0).abs() < 1e-15);
        // p = 2 repeated index: stencil {+pi: 1/4, 0: -1/2, -pi: 1/4}.
        let t = shift_expansion(&[0, 0], 1);
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn zeroth_order_is_total_probability() {
        let p = kron_policy(vec![vec![0.7], vec![-0.4]]);
        let mut probe = p.clone();
        let v = higher_order_derivative_l1(&p, &mut probe, &p.params(), &[], 0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn higher_order_bound_holds() {
        let mut rng = crate::rng::rng_from_seed(5);
        let l = layout(1, 2);
        let centres: Vec<Vec<f64>> = (0..2).map(|_| vec![rng.gen_range(0.0..3.0)]).collect();
        let angles = vec![vec![0.0; 2]; 2];
        let p = RawPqc::new(l, ScalarKernel::SquaredCosine { bandwidth: 1.0 }, centres, angles)
            .unwrap();
        let max = check_higher_order_bound(&p, 3, 100, &mut rng).unwrap();
        assert!(max <= 1.0 + 1e-8, "max = {max}");
    }

    #[test]
    fn representer_identity_kronecker() {
        // Kronecker centres spanning the state grid: the policy mean lies
        // exactly in the kernel span, so extraction reproduces it everywhere.
        let l = layout(1, 1);
        let centres = l.state.grid();
        let p = RawPqc::new(
            l,
            ScalarKernel::KroneckerDelta,
            centres.clone(),
            vec![vec![0.9], vec![2.1]],
        )
        .unwrap();
        let beta = extract_representer_weights(&p, &[0, 1]).unwrap();
        for s in 0..2usize {
            let state = p.layout.state.decode(s).unwrap();
            let recon: f64 = (0..2)
                .map(|i| beta[i][0] * p.kernel.eval(&state, &centres[i]).unwrap())
                .sum();
            assert!((recon - p.policy_mean(s)[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn representer_identity_single_overlap_centre() {
        // One centre with the overlap kernel and action range starting at 0:
        // mean(s) = kappa(s, c) * hi * sin^2(theta/2), exactly beta kappa.
        let l = RegisterLayout::new(
            GridCodec::new(2, 1, DimRange::new(0.5, 1.5)).unwrap(),
            GridCodec::new(1, 1, DimRange::new(0.0, 2.0)).unwrap(),
            4,
            1.0,
        )
        .unwrap();
        let p = RawPqc::new(
            l,
            ScalarKernel::PureStateOverlap,
            vec![vec![1.0, 0.7]],
            vec![vec![1.1]],
        )
        .unwrap();
        let beta = extract_representer_weights(&p, &[0]).unwrap();
        for s in 0..p.layout.n_states() {
            let state = p.layout.state.decode(s).unwrap();
            let recon = beta[0][0] * p.kernel.eval(&state, &p.centres[0]).unwrap();
            assert!(
                (recon - p.policy_mean(s)[0]).abs() < 1e-10,
                "state {s}: {recon} vs {}",
                p.policy_mean(s)[0]
            );
        }
    }
}
