//! Dense complex statevector simulator with named registers.
//!
//! Registers are contiguous, disjoint qubit spans declared at construction.
//! Within a span the register value is little-endian: bit `j` of the value
//! lives on global qubit `offset + j`. Every operation is unitary (or an
//! isometry guarded by an explicit zero-register precondition), so the l2
//! norm stays 1 to within roundoff; contracts are global-phase invariant.
//!
//! The simulator is deliberately capped at 24 qubits.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Hard cap on the total qubit count.
pub const MAX_QUBITS: usize = 24;

/// Handle to a declared register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegId(usize);

/// Detached offset/mask pair for reading a register value out of a basis
/// index.
#[derive(Debug, Clone, Copy)]
pub struct RegView {
    offset: usize,
    mask: usize,
}

impl RegView {
    pub fn get(&self, index: usize) -> usize {
        (index >> self.offset) & self.mask
    }
}

#[derive(Debug, Clone)]
struct Register {
    name: String,
    offset: usize,
    width: usize,
}

/// Dense statevector over a set of named registers.
#[derive(Debug, Clone)]
pub struct StateVector {
    amps: Vec<Complex64>,
    registers: Vec<Register>,
    n_qubits: usize,
}

impl StateVector {
    /// Creates a register file in `|0...0>`; spans are allocated in
    /// declaration order from qubit 0 upward.
    pub fn new(layout: &[(&str, usize)]) -> Result<Self> {
        let mut registers = Vec::with_capacity(layout.len());
        let mut offset = 0;
        for (name, width) in layout {
            if *width == 0 {
                return Err(Error::config(format!("register {name} has zero width")));
            }
            registers.push(Register {
                name: (*name).to_string(),
                offset,
                width: *width,
            });
            offset += width;
        }
        if offset == 0 {
            return Err(Error::config("statevector needs at least one qubit"));
        }
        if offset > MAX_QUBITS {
            return Err(Error::config(format!(
                "{offset} qubits exceed the cap of {MAX_QUBITS}"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << offset];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            amps,
            registers,
            n_qubits: offset,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Looks a register up by name.
    pub fn register(&self, name: &str) -> Result<RegId> {
        self.registers
            .iter()
            .position(|r| r.name == name)
            .map(RegId)
            .ok_or_else(|| Error::contract(format!("no register named {name}")))
    }

    pub fn reg_width(&self, reg: RegId) -> usize {
        self.registers[reg.0].width
    }

    pub fn reg_offset(&self, reg: RegId) -> usize {
        self.registers[reg.0].offset
    }

    fn reg_mask(&self, reg: RegId) -> usize {
        ((1usize << self.reg_width(reg)) - 1) << self.reg_offset(reg)
    }

    /// Register value embedded in a global basis index.
    pub fn value_of(&self, index: usize, reg: RegId) -> usize {
        (index >> self.reg_offset(reg)) & ((1 << self.reg_width(reg)) - 1)
    }

    /// Copyable view of a register span, for closures that must read
    /// register values while the statevector itself is borrowed mutably.
    pub fn view(&self, reg: RegId) -> RegView {
        RegView {
            offset: self.reg_offset(reg),
            mask: (1usize << self.reg_width(reg)) - 1,
        }
    }

    /// Replaces the register bits of `index` with `value`.
    pub fn with_value(&self, index: usize, reg: RegId, value: usize) -> usize {
        (index & !self.reg_mask(reg)) | (value << self.reg_offset(reg))
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Resets to a computational basis state given per-register values.
    pub fn set_basis_state(&mut self, values: &[(RegId, usize)]) -> Result<()> {
        let mut index = 0usize;
        for (reg, v) in values {
            if *v >= (1 << self.reg_width(*reg)) {
                return Err(Error::range(format!(
                    "value {v} exceeds register width {}",
                    self.reg_width(*reg)
                )));
            }
            index = self.with_value(index, *reg, *v);
        }
        self.amps.fill(Complex64::new(0.0, 0.0));
        self.amps[index] = Complex64::new(1.0, 0.0);
        Ok(())
    }

    /// Multi-controlled `R_Y(angle)` on `target`; `controls` are
    /// (qubit, required bit) pairs.
    pub fn apply_multicontrolled_ry(
        &mut self,
        target: usize,
        controls: &[(usize, bool)],
        angle: f64,
    ) -> Result<()> {
        self.check_target_controls(target, controls)?;
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        let bit = 1usize << target;
        for i0 in 0..self.amps.len() {
            if i0 & bit != 0 || !self.controls_match(i0, controls) {
                continue;
            }
            let i1 = i0 | bit;
            let a0 = self.amps[i0];
            let a1 = self.amps[i1];
            self.amps[i0] = a0 * c - a1 * s;
            self.amps[i1] = a0 * s + a1 * c;
        }
        Ok(())
    }

    /// Multi-controlled X on `target`.
    pub fn apply_multicontrolled_x(
        &mut self,
        target: usize,
        controls: &[(usize, bool)],
    ) -> Result<()> {
        self.check_target_controls(target, controls)?;
        let bit = 1usize << target;
        for i0 in 0..self.amps.len() {
            if i0 & bit != 0 || !self.controls_match(i0, controls) {
                continue;
            }
            self.amps.swap(i0, i0 | bit);
        }
        Ok(())
    }

    fn check_target_controls(&self, target: usize, controls: &[(usize, bool)]) -> Result<()> {
        if target >= self.n_qubits {
            return Err(Error::contract(format!("target qubit {target} out of range")));
        }
        for (q, _) in controls {
            if *q >= self.n_qubits {
                return Err(Error::contract(format!("control qubit {q} out of range")));
            }
            if *q == target {
                return Err(Error::contract("target qubit cannot also be a control"));
            }
        }
        Ok(())
    }

    fn controls_match(&self, index: usize, controls: &[(usize, bool)]) -> bool {
        controls
            .iter()
            .all(|(q, v)| ((index >> q) & 1 == 1) == *v)
    }

    /// Multiplies the amplitude of every basis state by
    /// `exp(i * phase_fn(register value))`.
    pub fn apply_diagonal_phase(&mut self, reg: RegId, phase_fn: impl Fn(usize) -> f64) {
        let width = self.reg_width(reg);
        let offset = self.reg_offset(reg);
        let mask = (1usize << width) - 1;
        // Precompute one phase per register value.
        let phases: Vec<Complex64> = (0..=mask)
            .map(|v| Complex64::from_polar(1.0, phase_fn(v)))
            .collect();
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= phases[(i >> offset) & mask];
        }
    }

    /// Diagonal phase over the full basis index.
    pub fn apply_diagonal_phase_full(&mut self, phase_fn: impl Fn(usize) -> f64) {
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= Complex64::from_polar(1.0, phase_fn(i));
        }
    }

    /// Applies a dense unitary to one register.
    pub fn apply_register_unitary(&mut self, reg: RegId, u: &DMatrix<Complex64>) -> Result<()> {
        let n = 1usize << self.reg_width(reg);
        if u.nrows() != n || u.ncols() != n {
            return Err(Error::contract(format!(
                "unitary of size {}x{} does not fit a {}-qubit register",
                u.nrows(),
                u.ncols(),
                self.reg_width(reg)
            )));
        }
        let mut scratch = vec![Complex64::new(0.0, 0.0); n];
        self.for_each_block(reg, |amps, idx_of| {
            for (v, s) in scratch.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for w in 0..n {
                    acc += u[(v, w)] * amps[idx_of(w)];
                }
                *s = acc;
            }
            for (v, s) in scratch.iter().enumerate() {
                amps[idx_of(v)] = *s;
            }
        });
        Ok(())
    }

    /// Markov-style inner-product block: applies `prep_b` then `prep_a^dag`
    /// to the register, so that starting from `|0>` the amplitude left on
    /// `|0...0>` equals `<phi_A|phi_B>`.
    pub fn apply_inner_product_subcircuit(
        &mut self,
        prep_a: &DMatrix<Complex64>,
        prep_b: &DMatrix<Complex64>,
        reg: RegId,
    ) -> Result<()> {
        if prep_a.nrows() != prep_b.nrows() || prep_a.ncols() != prep_b.ncols() {
            return Err(Error::contract(
                "inner-product preparations must act on the same span",
            ));
        }
        self.apply_register_unitary(reg, prep_b)?;
        self.apply_register_unitary(reg, &prep_a.adjoint())?;
        Ok(())
    }

    /// Iterates over all blocks that share every qubit outside `reg`,
    /// presenting an indexer from register value to global index.
    fn for_each_block(&mut self, reg: RegId, mut f: impl FnMut(&mut [Complex64], &dyn Fn(usize) -> usize)) {
        let offset = self.reg_offset(reg);
        let width = self.reg_width(reg);
        let low_mask = (1usize << offset) - 1;
        let rest = self.amps.len() >> width;
        for outer in 0..rest {
            let low = outer & low_mask;
            let high = (outer & !low_mask) << width;
            let base = high | low;
            let idx_of = move |v: usize| base | (v << offset);
            f(&mut self.amps, &idx_of);
        }
    }

    /// Quantum Fourier transform over a register:
    /// `|j> -> 2^(-w/2) sum_k exp(2 pi i jk / 2^w) |k>`.
    pub fn qft(&mut self, reg: RegId) {
        self.fourier(reg, rustfft::FftDirection::Inverse);
    }

    /// Inverse QFT over a register.
    pub fn inverse_qft(&mut self, reg: RegId) {
        self.fourier(reg, rustfft::FftDirection::Forward);
    }

    fn fourier(&mut self, reg: RegId, direction: rustfft::FftDirection) {
        let n = 1usize << self.reg_width(reg);
        let fft = FftPlanner::new().plan_fft(n, direction);
        let scale = 1.0 / (n as f64).sqrt();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        self.for_each_block(reg, |amps, idx_of| {
            for (v, b) in buf.iter_mut().enumerate() {
                *b = amps[idx_of(v)];
            }
            fft.process(&mut buf);
            for (v, b) in buf.iter().enumerate() {
                amps[idx_of(v)] = *b * scale;
            }
        });
    }

    /// Marginal probability of each register value.
    pub fn marginal_probs(&self, reg: RegId) -> Vec<f64> {
        let offset = self.reg_offset(reg);
        let mask = (1usize << self.reg_width(reg)) - 1;
        let mut probs = vec![0.0; mask + 1];
        for (i, a) in self.amps.iter().enumerate() {
            probs[(i >> offset) & mask] += a.norm_sqr();
        }
        probs
    }

    /// Sum of |amplitude|^2 over basis states whose register value is in
    /// `indices` (marginalized over all other registers).
    pub fn projector_expectation(&self, reg: RegId, indices: &[usize]) -> f64 {
        let probs = self.marginal_probs(reg);
        indices
            .iter()
            .filter(|&&v| v < probs.len())
            .map(|&v| probs[v])
            .sum()
    }

    /// Samples a measurement outcome of `reg` and collapses the state.
    pub fn measure(&mut self, reg: RegId, rng: &mut Rng) -> usize {
        use rand::Rng as _;
        let probs = self.marginal_probs(reg);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut outcome = probs.len() - 1;
        for (v, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                outcome = v;
                break;
            }
        }
        let offset = self.reg_offset(reg);
        let mask = (1usize << self.reg_width(reg)) - 1;
        let mut norm2 = 0.0;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if (i >> offset) & mask == outcome {
                norm2 += a.norm_sqr();
            } else {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        let scale = 1.0 / norm2.sqrt();
        for a in self.amps.iter_mut() {
            *a *= scale;
        }
        outcome
    }

    /// True when the register is `|0>` on every branch with support.
    pub fn register_is_zeroed(&self, reg: RegId) -> bool {
        let mask = self.reg_mask(reg);
        self.amps
            .iter()
            .enumerate()
            .all(|(i, a)| i & mask == 0 || a.norm_sqr() < 1e-24)
    }

    /// Injects a branch-dependent state into a zeroed register: for every
    /// basis index with `reg = |0>`, the amplitude is distributed over
    /// register values with the weights returned by `f` (indexed by the
    /// surrounding basis state). Each returned vector must be l2-normalized,
    /// which makes the map an isometry.
    pub fn inject_register_with(
        &mut self,
        reg: RegId,
        mut f: impl FnMut(usize) -> Vec<Complex64>,
    ) -> Result<()> {
        if !self.register_is_zeroed(reg) {
            return Err(Error::contract(format!(
                "register {} must be |0> before injection",
                self.registers[reg.0].name
            )));
        }
        let n = 1usize << self.reg_width(reg);
        let mask = self.reg_mask(reg);
        let offset = self.reg_offset(reg);
        for i in 0..self.amps.len() {
            if i & mask != 0 {
                continue;
            }
            let a = self.amps[i];
            if a.norm_sqr() < 1e-30 {
                continue;
            }
            let column = f(i);
            debug_assert_eq!(column.len(), n);
            debug_assert!(
                (column.iter().map(|c| c.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-9,
                "injected column must be normalized"
            );
            for (v, c) in column.iter().enumerate() {
                self.amps[i | (v << offset)] = a * c;
            }
        }
        Ok(())
    }

    /// Writes a branch-dependent classical value into a zeroed register by
    /// permuting basis states.
    pub fn write_register_value_with(
        &mut self,
        reg: RegId,
        mut f: impl FnMut(usize) -> usize,
    ) -> Result<()> {
        if !self.register_is_zeroed(reg) {
            return Err(Error::contract(format!(
                "register {} must be |0> before writing",
                self.registers[reg.0].name
            )));
        }
        let mask = self.reg_mask(reg);
        let offset = self.reg_offset(reg);
        let width = self.reg_width(reg);
        for i in 0..self.amps.len() {
            if i & mask != 0 || self.amps[i].norm_sqr() < 1e-30 {
                continue;
            }
            let v = f(i);
            debug_assert!(v < (1 << width));
            if v != 0 {
                self.amps.swap(i, i | (v << offset));
            }
        }
        Ok(())
    }

    /// Text dump `index re im`, one basis state per line, for golden tests.
    pub fn dump_amplitudes(&self) -> String {
        let mut out = String::new();
        for (i, a) in self.amps.iter().enumerate() {
            out.push_str(&format!("{i} {:+.12e} {:+.12e}\n", a.re, a.im));
        }
        out
    }
}

/// Completes a normalized target column to a full unitary whose first
/// column is `target` (Householder reflection).
pub fn state_preparation_unitary(target: &[Complex64]) -> Result<DMatrix<Complex64>> {
    let n = target.len();
    if n == 0 || n & (n - 1) != 0 {
        return Err(Error::contract("target length must be a power of two"));
    }
    let norm = target.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-15 {
        return Err(Error::contract("cannot prepare the zero vector"));
    }
    // Rotate by a global phase so the first component is real nonnegative;
    // the Householder construction is then exact.
    let phase = if target[0].norm() > 1e-15 {
        target[0] / target[0].norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let t: Vec<Complex64> = target.iter().map(|c| c / (norm * phase)).collect();

    let mut w: Vec<Complex64> = t.clone();
    w[0] -= Complex64::new(1.0, 0.0);
    let w2: f64 = w.iter().map(|c| c.norm_sqr()).sum();
    let mut u = DMatrix::<Complex64>::identity(n, n);
    if w2 > 1e-30 {
        for i in 0..n {
            for j in 0..n {
                u[(i, j)] -= w[i] * w[j].conj() * Complex64::new(2.0 / w2, 0.0);
            }
        }
    }
    // Restore the global phase on the prepared column.
    Ok(u * phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn single_qubit() -> (StateVector, RegId) {
        let sv = StateVector::new(&[("q", 1)]).unwrap();
        let reg = sv.register("q").unwrap();
        (sv, reg)
    }

    #[test]
    fn qubit_cap_enforced() {
        assert!(StateVector::new(&[("big", 25)]).is_err());
        assert!(StateVector::new(&[("ok", 24)]).is_ok());
    }

    #[test]
    fn ry_identity_at_zero_angle() {
        let (mut sv, _) = single_qubit();
        sv.apply_multicontrolled_ry(0, &[], 0.0).unwrap();
        assert!((sv.amplitudes()[0] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn ry_pi_flips_zero_to_one() {
        let (mut sv, _) = single_qubit();
        sv.apply_multicontrolled_ry(0, &[], PI).unwrap();
        assert!(sv.amplitudes()[0].norm() < 1e-15);
        assert!((sv.amplitudes()[1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ry_half_pi_equal_superposition() {
        let (mut sv, _) = single_qubit();
        sv.apply_multicontrolled_ry(0, &[], PI / 2.0).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((sv.amplitudes()[0].re - r).abs() < 1e-15);
        assert!((sv.amplitudes()[1].re - r).abs() < 1e-15);
    }

    #[test]
    fn overlapping_target_and_control_rejected() {
        let (mut sv, _) = single_qubit();
        assert!(matches!(
            sv.apply_multicontrolled_ry(0, &[(0, true)], 0.3),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn controlled_ry_respects_pattern() {
        let mut sv = StateVector::new(&[("c", 1), ("t", 1)]).unwrap();
        // Control is |0>, pattern requires |1|: nothing happens.
        sv.apply_multicontrolled_ry(1, &[(0, true)], PI).unwrap();
        assert!((sv.amplitudes()[0].norm() - 1.0).abs() < 1e-15);
        // Flip control, now the rotation fires.
        sv.apply_multicontrolled_x(0, &[]).unwrap();
        sv.apply_multicontrolled_ry(1, &[(0, true)], PI).unwrap();
        assert!((sv.amplitudes()[0b11].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_phase_identity_and_global_phase() {
        let (mut sv, reg) = single_qubit();
        sv.apply_multicontrolled_ry(0, &[], PI / 2.0).unwrap();
        let before = sv.marginal_probs(reg);
        sv.apply_diagonal_phase(reg, |_| 0.0);
        sv.apply_diagonal_phase(reg, |_| PI);
        let after = sv.marginal_probs(reg);
        for (b, a) in before.iter().zip(&after) {
            assert!((b - a).abs() < 1e-15);
        }
        // Global phase -1 on every amplitude.
        assert!((sv.amplitudes()[0].re + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn qft_inverse_qft_round_trip() {
        let mut sv = StateVector::new(&[("r", 3)]).unwrap();
        let reg = sv.register("r").unwrap();
        sv.set_basis_state(&[(reg, 5)]).unwrap();
        sv.qft(reg);
        sv.inverse_qft(reg);
        assert!((sv.amplitudes()[5].re - 1.0).abs() < 1e-12);
        assert!((sv.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qft_of_zero_is_uniform() {
        let mut sv = StateVector::new(&[("r", 2)]).unwrap();
        let reg = sv.register("r").unwrap();
        sv.qft(reg);
        for a in sv.amplitudes() {
            assert!((a.re - 0.5).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
    }

    #[test]
    fn linear_phase_recovers_slope() {
        // Direct matrix-multiplication oracle: phase 2 pi b / 2^k on a
        // uniform superposition is QFT|1>, so the inverse QFT returns |1>.
        for k in 1..=4usize {
            let mut sv = StateVector::new(&[("r", k)]).unwrap();
            let reg = sv.register("r").unwrap();
            let n = 1usize << k;
            sv.qft(reg); // uniform superposition from |0>
            sv.apply_diagonal_phase(reg, |b| 2.0 * PI * b as f64 / n as f64);
            sv.inverse_qft(reg);
            let probs = sv.marginal_probs(reg);
            assert!((probs[1] - 1.0).abs() < 1e-12, "k={k}: {probs:?}");
        }
    }

    #[test]
    fn inner_product_subcircuit_matches_dense_oracle() {
        use rand::Rng as _;
        let mut rng = crate::rng::rng_from_seed(3);
        for _ in 0..10 {
            let dim = 4;
            let va: Vec<Complex64> = (0..dim)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let vb: Vec<Complex64> = (0..dim)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let na = va.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let nb = vb.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let pa = state_preparation_unitary(&va).unwrap();
            let pb = state_preparation_unitary(&vb).unwrap();

            let mut sv = StateVector::new(&[("anc", 2)]).unwrap();
            let reg = sv.register("anc").unwrap();
            sv.apply_inner_product_subcircuit(&pa, &pb, reg).unwrap();

            let expected: Complex64 = va
                .iter()
                .zip(&vb)
                .map(|(a, b)| a.conj() * b)
                .sum::<Complex64>()
                / c(na * nb, 0.0);
            assert!((sv.amplitudes()[0] - expected).norm() < 1e-12);
            assert!((sv.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inner_product_identical_preps_gives_one() {
        let v: Vec<Complex64> = vec![c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)];
        let p = state_preparation_unitary(&v).unwrap();
        let mut sv = StateVector::new(&[("anc", 2)]).unwrap();
        let reg = sv.register("anc").unwrap();
        sv.apply_inner_product_subcircuit(&p, &p, reg).unwrap();
        assert!((sv.amplitudes()[0].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inner_product_orthogonal_preps_gives_zero() {
        let va = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let vb = vec![c(0.0, 0.0), c(1.0, 0.0)];
        let pa = state_preparation_unitary(&va).unwrap();
        let pb = state_preparation_unitary(&vb).unwrap();
        let mut sv = StateVector::new(&[("anc", 1)]).unwrap();
        let reg = sv.register("anc").unwrap();
        sv.apply_inner_product_subcircuit(&pa, &pb, reg).unwrap();
        assert!(sv.amplitudes()[0].norm() < 1e-12);
    }

    #[test]
    fn measure_basis_state_is_certain() {
        let mut sv = StateVector::new(&[("r", 2)]).unwrap();
        let reg = sv.register("r").unwrap();
        sv.set_basis_state(&[(reg, 3)]).unwrap();
        let mut rng = crate::rng::rng_from_seed(0);
        assert_eq!(sv.measure(reg, &mut rng), 3);
    }

    #[test]
    fn measure_uniform_qubit_frequency() {
        let mut base = StateVector::new(&[("q", 1)]).unwrap();
        let reg = base.register("q").unwrap();
        base.apply_multicontrolled_ry(0, &[], PI / 2.0).unwrap();
        let mut rng = crate::rng::rng_from_seed(1234);
        let shots = 100_000;
        let mut ones = 0usize;
        for _ in 0..shots {
            let mut sv = base.clone();
            ones += sv.measure(reg, &mut rng);
        }
        let freq = ones as f64 / shots as f64;
        assert!((0.48..=0.52).contains(&freq), "freq={freq}");
    }

    #[test]
    fn collapse_matches_conditional_distribution() {
        // (|00> + |11>)/sqrt(2) over two one-qubit registers.
        let mut sv = StateVector::new(&[("a", 1), ("b", 1)]).unwrap();
        let ra = sv.register("a").unwrap();
        let rb = sv.register("b").unwrap();
        sv.apply_multicontrolled_ry(0, &[], PI / 2.0).unwrap();
        sv.apply_multicontrolled_x(1, &[(0, true)]).unwrap();
        let mut rng = crate::rng::rng_from_seed(7);
        let outcome = sv.measure(ra, &mut rng);
        let probs = sv.marginal_probs(rb);
        // Exact conditional from the Bell amplitudes: b == a with certainty.
        assert!((probs[outcome] - 1.0).abs() < 1e-12);
        assert!((sv.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projector_expectation_partitions() {
        let mut sv = StateVector::new(&[("r", 2), ("junk", 1)]).unwrap();
        let reg = sv.register("r").unwrap();
        sv.apply_multicontrolled_ry(0, &[], 0.7).unwrap();
        sv.apply_multicontrolled_ry(2, &[], 1.1).unwrap();
        assert!((sv.projector_expectation(reg, &[0, 1, 2, 3]) - 1.0).abs() < 1e-12);
        assert_eq!(sv.projector_expectation(reg, &[]), 0.0);
        let p01 = sv.projector_expectation(reg, &[0, 1]);
        let p23 = sv.projector_expectation(reg, &[2, 3]);
        assert!((p01 + p23 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn injection_requires_zeroed_register() {
        let mut sv = StateVector::new(&[("r", 1)]).unwrap();
        let reg = sv.register("r").unwrap();
        sv.apply_multicontrolled_x(0, &[]).unwrap();
        let col = vec![c(1.0, 0.0), c(0.0, 0.0)];
        assert!(matches!(
            sv.inject_register_with(reg, |_| col.clone()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn norm_preserved_by_random_circuit() {
        use rand::Rng as _;
        let mut sv = StateVector::new(&[("a", 2), ("b", 2)]).unwrap();
        let ra = sv.register("a").unwrap();
        let mut rng = crate::rng::rng_from_seed(99);
        for step in 0..50 {
            match step % 4 {
                0 => sv
                    .apply_multicontrolled_ry(
                        rng.gen_range(0..4),
                        &[],
                        rng.gen_range(-PI..PI),
                    )
                    .unwrap(),
                1 => {
                    let t = rng.gen_range(0..4);
                    let ctl = (t + 1) % 4;
                    sv.apply_multicontrolled_ry(t, &[(ctl, true)], rng.gen_range(-PI..PI))
                        .unwrap();
                }
                2 => sv.apply_diagonal_phase(ra, |v| v as f64 * 0.37),
                _ => sv.inverse_qft(ra),
            }
            assert!((sv.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dump_format_is_stable() {
        let sv = StateVector::new(&[("q", 1)]).unwrap();
        let dump = sv.dump_amplitudes();
        let mut lines = dump.lines();
        assert_eq!(lines.next().unwrap(), "0 +1.000000000000e0 +0.000000000000e0");
    }
}
