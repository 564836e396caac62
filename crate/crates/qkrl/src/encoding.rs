//! Fixed-point binary encodings between real vectors and basis-register
//! indices.
//!
//! Every dimension of a state or action is discretized onto `2^k` evenly
//! spaced grid points over a configurable real range `[lo, hi]`. Packing is
//! unsigned fixed point, dimension 0 in the most significant position, so
//! `encode` is monotone per dimension on grid points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real-valued range for one register kind, shared by all its dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimRange {
    pub lo: f64,
    pub hi: f64,
}

impl DimRange {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Uniform fixed-point grid codec for a block of `dims` dimensions with
/// `bits` qubits each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCodec {
    pub dims: usize,
    pub bits: usize,
    pub range: DimRange,
}

impl GridCodec {
    pub fn new(dims: usize, bits: usize, range: DimRange) -> Result<Self> {
        if dims == 0 {
            return Err(Error::config("codec needs at least one dimension"));
        }
        if bits == 0 || bits > 16 {
            return Err(Error::config(format!(
                "bits per dimension must be in 1..=16, got {bits}"
            )));
        }
        if !(range.width() > 0.0) {
            return Err(Error::config(format!(
                "range [{}, {}] must have positive width",
                range.lo, range.hi
            )));
        }
        Ok(Self { dims, bits, range })
    }

    /// Grid points per dimension, `2^bits`.
    pub fn points_per_dim(&self) -> usize {
        1usize << self.bits
    }

    /// Total basis states, `2^(dims*bits)`.
    pub fn total_points(&self) -> usize {
        1usize << (self.dims * self.bits)
    }

    /// Total qubits spanned by the block.
    pub fn qubits(&self) -> usize {
        self.dims * self.bits
    }

    /// Distance between adjacent grid points in one dimension.
    pub fn spacing(&self) -> f64 {
        self.range.width() / (self.points_per_dim() - 1).max(1) as f64
    }

    /// Per-dimension precision `2^-k * (hi - lo)`, a lower bound on the grid
    /// spacing.
    pub fn epsilon_k(&self) -> f64 {
        self.range.width() / self.points_per_dim() as f64
    }

    /// Largest l1 norm over the grid, `sum_d max(|lo|, |hi|)`.
    pub fn max_l1_norm(&self) -> f64 {
        self.dims as f64 * self.range.lo.abs().max(self.range.hi.abs())
    }

    /// Grid value of digit `j` in one dimension.
    pub fn grid_value(&self, j: usize) -> f64 {
        self.range.lo + j as f64 * self.spacing()
    }

    /// Nearest grid digit for a single component; ties round up.
    fn digit(&self, v: f64) -> Result<usize> {
        let slack = self.spacing() * 1e-9;
        if v < self.range.lo - slack || v > self.range.hi + slack {
            return Err(Error::range(format!(
                "component {v} outside [{}, {}]",
                self.range.lo, self.range.hi
            )));
        }
        let j = ((v - self.range.lo) / self.spacing() + 0.5).floor() as isize;
        Ok(j.clamp(0, self.points_per_dim() as isize - 1) as usize)
    }

    /// Index of the nearest grid point of `vector`; round-half-up per
    /// dimension, dimension 0 most significant.
    pub fn encode(&self, vector: &[f64]) -> Result<usize> {
        if vector.len() != self.dims {
            return Err(Error::contract(format!(
                "expected {} components, got {}",
                self.dims,
                vector.len()
            )));
        }
        let mut index = 0usize;
        for &v in vector {
            index = (index << self.bits) | self.digit(v)?;
        }
        Ok(index)
    }

    /// Grid-point vector for a basis index; inverse of [`encode`] on grid
    /// points.
    ///
    /// [`encode`]: GridCodec::encode
    pub fn decode(&self, index: usize) -> Result<Vec<f64>> {
        if index >= self.total_points() {
            return Err(Error::range(format!(
                "index {index} exceeds {} basis states",
                self.total_points()
            )));
        }
        let mask = self.points_per_dim() - 1;
        let mut out = vec![0.0; self.dims];
        for d in 0..self.dims {
            let shift = self.bits * (self.dims - 1 - d);
            out[d] = self.grid_value((index >> shift) & mask);
        }
        Ok(out)
    }

    /// All grid vectors in index order.
    pub fn grid(&self) -> Vec<Vec<f64>> {
        (0..self.total_points())
            .map(|i| self.decode(i).expect("index in range"))
            .collect()
    }
}

/// Register layout for an experiment: state block, action block, and the
/// scalar reward register.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegisterLayout {
    pub state: GridCodec,
    pub action: GridCodec,
    pub reward: GridCodec,
}

impl RegisterLayout {
    /// Builds a layout; the reward register is one-dimensional over
    /// `[0, r_max]` with its own bit width.
    pub fn new(state: GridCodec, action: GridCodec, reward_bits: usize, r_max: f64) -> Result<Self> {
        let reward = GridCodec::new(1, reward_bits, DimRange::new(0.0, r_max))?;
        Ok(Self {
            state,
            action,
            reward,
        })
    }

    pub fn n_states(&self) -> usize {
        self.state.total_points()
    }

    pub fn n_actions(&self) -> usize {
        self.action.total_points()
    }

    /// Max l1 action norm over the grid (`a_max`).
    pub fn a_max(&self) -> f64 {
        self.action.max_l1_norm()
    }
}
