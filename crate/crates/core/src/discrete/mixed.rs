use num_complex::Complex64;

use crate::discrete::pair::{branch_operators, BranchOperators, Measurement};
use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat};
use crate::model::CollisionBlocks;

/// Filter state for a mixed initial system state.
///
/// `x` plays the role of `αα†`, `y` of `αβ†` and `rho` is the unnormalized a
/// posteriori state.
#[derive(Clone, Debug)]
pub struct MixedPairState {
    pub x: CMat,
    pub y: CMat,
    pub rho: CMat,
    pub step: usize,
    pub tail: f64,
}

impl MixedPairState {
    /// `X = ρ0`, `Y = 0`, `ρ = w_0 ρ0`.
    pub fn initial(rho0: &CMat, tail: f64) -> Self {
        MixedPairState {
            x: rho0.clone(),
            y: CMat::zeros(rho0.nrows(), rho0.ncols()),
            rho: rho0 * cr(tail),
            step: 0,
            tail,
        }
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.rho).re
    }

    /// Normalized a posteriori state.
    pub fn state(&self) -> Result<CMat> {
        let tr = self.trace();
        if !(tr > 0.0) {
            return Err(Error::UndefinedState);
        }
        Ok(&self.rho * cr(1.0 / tr))
    }

    /// Probabilities that the photon is still ahead versus already consumed.
    pub fn scenario_probabilities(&self) -> Result<(f64, f64)> {
        let tr = self.trace();
        if !(tr > 0.0) {
            return Err(Error::UndefinedState);
        }
        let future = linalg::trace(&self.x).re * self.tail / tr;
        Ok((future, 1.0 - future))
    }

    pub(crate) fn scaled(&self, s: f64) -> Self {
        MixedPairState {
            x: &self.x * cr(s),
            y: &self.y * cr(s),
            rho: &self.rho * cr(s),
            step: self.step,
            tail: self.tail,
        }
    }

    /// One collision followed by the outcome described by `ops`.
    pub fn branch(&self, ops: &BranchOperators, xi: Complex64, tau: f64) -> Self {
        let (a, b) = (&ops.a, &ops.b);
        let adag = a.adjoint();
        let bdag = b.adjoint();
        let c = xi * tau.sqrt();
        let mass = cr(tau * xi.norm_sqr());

        let axa = a * &self.x * &adag;
        let axb = a * &self.x * &bdag;
        let bya = b * &self.y * &adag;
        let x = axa.clone();
        let y = a * &self.y * &adag + &axb * c.conj();
        let mut rho = a * &self.rho * &adag - &axa * mass + &bya * c + bya.adjoint() * c.conj();
        rho += b * &self.x * &bdag * mass;
        linalg::hermitize_in_place(&mut rho);
        MixedPairState {
            x: linalg::hermitize(&x),
            y,
            rho,
            step: self.step + 1,
            tail: (self.tail - tau * xi.norm_sqr()).max(0.0),
        }
    }
}

/// Counting update of the mixed-state filter with outcome `eta`.
pub fn mixed_counting_step(state: &MixedPairState, blocks: &CollisionBlocks, xi_j: Complex64, eta: u8) -> MixedPairState {
    assert!(eta <= 1, "counting outcome must be 0 or 1");
    let ops = BranchOperators {
        a: blocks.block(eta, 0).clone(),
        b: blocks.block(eta, 1).clone(),
    };
    state.branch(&ops, xi_j, blocks.tau)
}

/// Homodyne update of the mixed-state filter with outcome `q` ∈ {+1, −1}.
pub fn mixed_homodyne_step(state: &MixedPairState, blocks: &CollisionBlocks, xi_j: Complex64, q: i8) -> MixedPairState {
    assert!(q == 1 || q == -1, "homodyne outcome must be ±1");
    let ops = branch_operators(blocks, Measurement::Homodyne);
    state.branch(&ops[if q == 1 { 0 } else { 1 }], xi_j, blocks.tau)
}
