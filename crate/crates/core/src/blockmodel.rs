//! Block-structured variables and the problem contract consumed by the solver.
//!
//! A [`BlockVector`] is an ordered list of dense `f64` tensors. Each problem
//! implements [`Problem`], which splits its objective into a smooth coupling
//! term `H` and one (possibly nonconvex, possibly extended-valued) term per
//! block, each with a computable proximal map.

use ndarray::{ArrayD, Zip};

use crate::error::{Error, Result};

/// Dense row-major tensor used for every block.
pub type Tensor = ArrayD<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    blocks: Vec<Tensor>,
}

impl BlockVector {
    pub fn new(blocks: Vec<Tensor>) -> Self {
        Self { blocks }
    }

    pub fn zeros_like(other: &BlockVector) -> Self {
        Self {
            blocks: other
                .blocks
                .iter()
                .map(|b| Tensor::zeros(b.raw_dim()))
                .collect(),
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, i: usize) -> &Tensor {
        &self.blocks[i]
    }

    pub fn blocks(&self) -> &[Tensor] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Tensor> {
        self.blocks
    }

    /// Replace block `i`, keeping its shape fixed.
    pub fn set_block(&mut self, i: usize, value: Tensor) -> Result<()> {
        let slot = self
            .blocks
            .get_mut(i)
            .ok_or_else(|| Error::Shape(format!("block index {i} out of range")))?;
        if slot.shape() != value.shape() {
            return Err(Error::Shape(format!(
                "block {i}: expected shape {:?}, got {:?}",
                slot.shape(),
                value.shape()
            )));
        }
        *slot = value;
        Ok(())
    }

    /// Checks that `other` has the same block count and per-block shapes.
    pub fn check_compatible(&self, other: &BlockVector) -> Result<()> {
        if self.blocks.len() != other.blocks.len() {
            return Err(Error::Shape(format!(
                "block count {} vs {}",
                self.blocks.len(),
                other.blocks.len()
            )));
        }
        for (i, (a, b)) in self.blocks.iter().zip(&other.blocks).enumerate() {
            if a.shape() != b.shape() {
                return Err(Error::Shape(format!(
                    "block {i}: {:?} vs {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn block_norm_sq(&self, i: usize) -> f64 {
        self.blocks[i].iter().map(|v| v * v).sum()
    }

    /// Squared Euclidean norm, accumulated blockwise.
    pub fn norm_sq(&self) -> f64 {
        (0..self.blocks.len()).map(|i| self.block_norm_sq(i)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    pub fn sub(&self, other: &BlockVector) -> Result<BlockVector> {
        block_axpy(-1.0, other, self)
    }
}

/// Blockwise `a * x + y`.
pub fn block_axpy(a: f64, x: &BlockVector, y: &BlockVector) -> Result<BlockVector> {
    x.check_compatible(y)?;
    let blocks = x
        .blocks
        .iter()
        .zip(&y.blocks)
        .map(|(xb, yb)| {
            let mut out = yb.clone();
            Zip::from(&mut out).and(xb).for_each(|o, &xv| *o += a * xv);
            out
        })
        .collect();
    Ok(BlockVector { blocks })
}

/// Inertial point `x_cur[block] + coeff * (x_cur[block] - x_prev[block])`.
///
/// With `coeff == 0` the current block is returned unchanged (bitwise).
pub fn extrapolate(
    x_cur: &BlockVector,
    x_prev: &BlockVector,
    coeff: f64,
    block: usize,
) -> Result<Tensor> {
    if coeff < 0.0 {
        return Err(Error::ParameterDomain(format!(
            "extrapolation coefficient must be nonnegative, got {coeff}"
        )));
    }
    let cur = x_cur
        .blocks
        .get(block)
        .ok_or_else(|| Error::Shape(format!("block index {block} out of range")))?;
    let prev = x_prev
        .blocks
        .get(block)
        .ok_or_else(|| Error::Shape(format!("block index {block} out of range")))?;
    if cur.shape() != prev.shape() {
        return Err(Error::Shape(format!(
            "block {block}: {:?} vs {:?}",
            cur.shape(),
            prev.shape()
        )));
    }
    if coeff == 0.0 {
        return Ok(cur.clone());
    }
    let mut out = cur.clone();
    Zip::from(&mut out)
        .and(prev)
        .for_each(|o, &p| *o += coeff * (*o - p));
    Ok(out)
}

/// Per-block `½‖x_next_i − x_cur_i‖²`.
pub fn step_deltas(x_next: &BlockVector, x_cur: &BlockVector) -> Result<Vec<f64>> {
    x_next.check_compatible(x_cur)?;
    Ok(x_next
        .blocks
        .iter()
        .zip(&x_cur.blocks)
        .map(|(a, b)| 0.5 * a.iter().zip(b.iter()).map(|(u, v)| (u - v).powi(2)).sum::<f64>())
        .collect())
}

/// Per-block inertial and step parameters used in one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertialParams {
    pub alpha: f64,
    pub beta: f64,
    /// Effective step parameter (includes any per-block multiplier).
    pub tau: f64,
    /// Weight from the step rule; `None` under the dynamic schedule.
    pub delta: Option<f64>,
    pub lipschitz: f64,
}

/// The objective contract: `F(x) = H(x) + Σ f_i(x_i)`.
///
/// `H` must be continuously differentiable with blockwise Lipschitz
/// gradients; each `f_i` must have a computable proximal map
/// `argmin_q f_i(q) + (t/2)‖q − p‖²`.
pub trait Problem: Send + Sync {
    fn num_blocks(&self) -> usize;

    /// Smooth coupling term `H`.
    fn eval_smooth(&self, x: &BlockVector) -> f64;

    /// Nonsmooth term of one block. Infeasible points give `+∞`.
    fn eval_nonsmooth(&self, block: usize, value: &Tensor) -> f64;

    fn eval_objective(&self, x: &BlockVector) -> f64 {
        let mut total = self.eval_smooth(x);
        for i in 0..self.num_blocks() {
            total += self.eval_nonsmooth(i, x.block(i));
        }
        total
    }

    /// Gradient of `H` with respect to block `block`, evaluated at `x`.
    fn partial_grad(&self, block: usize, x: &BlockVector) -> Tensor;

    /// One deterministic element of `prox_t^{f_block}(p)`.
    fn prox(&self, block: usize, t: f64, p: &Tensor) -> Tensor;

    fn is_convex(&self, block: usize) -> bool;

    /// Exact partial Lipschitz modulus of `∇_block H` at `x`, when the
    /// problem can compute one. `None` makes the solver backtrack.
    fn lipschitz(&self, _block: usize, _x: &BlockVector) -> Option<Result<f64>> {
        None
    }

    /// Multiplier applied to this block's step parameter unless the run
    /// configuration overrides it.
    fn step_scale(&self, _block: usize) -> f64 {
        1.0
    }

    /// Short label for traces and reports.
    fn name(&self) -> &str {
        "problem"
    }

    /// Seeded feasible starting point. Problems without one must be run
    /// with an explicit `x0`.
    fn initial_point(&self, _seed: u64) -> Result<BlockVector> {
        Err(Error::Contract(format!(
            "{} has no default starting point",
            self.name()
        )))
    }
}
