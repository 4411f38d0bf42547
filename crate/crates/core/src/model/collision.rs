use crate::error::{Error, Result};
use crate::linalg::{self, c, cr, CMat};
use crate::model::SystemModel;

const UNITARITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockMode {
    /// Dense exponential of the collision Hamiltonian.
    Exact,
    /// Truncated small-step expansion.
    FirstOrder,
}

/// The four system blocks of one collision unitary, indexed by the
/// environment qubit's (output, input) levels.
#[derive(Clone, Debug)]
pub struct CollisionBlocks {
    pub v00: CMat,
    pub v01: CMat,
    pub v10: CMat,
    pub v11: CMat,
    pub mode: BlockMode,
    pub tau: f64,
}

impl CollisionBlocks {
    /// Block `V_{ij}`.
    pub fn block(&self, i: u8, j: u8) -> &CMat {
        match (i, j) {
            (0, 0) => &self.v00,
            (0, 1) => &self.v01,
            (1, 0) => &self.v10,
            (1, 1) => &self.v11,
            _ => panic!("collision block index ({i}, {j}) out of range"),
        }
    }

    pub fn dim(&self) -> usize {
        self.v00.nrows()
    }

    /// The full `2d × 2d` matrix `[[V00, V01], [V10, V11]]`.
    pub fn block_matrix(&self) -> CMat {
        let d = self.dim();
        let mut m = CMat::zeros(2 * d, 2 * d);
        m.view_mut((0, 0), (d, d)).copy_from(&self.v00);
        m.view_mut((0, d), (d, d)).copy_from(&self.v01);
        m.view_mut((d, 0), (d, d)).copy_from(&self.v10);
        m.view_mut((d, d), (d, d)).copy_from(&self.v11);
        m
    }

    /// `‖V†V - 1‖_F` of the block matrix.
    pub fn unitarity_residual(&self) -> f64 {
        linalg::unitarity_residual(&self.block_matrix())
    }

    /// Frobenius distance between two block sets, blockwise summed in
    /// quadrature.
    pub fn distance(&self, other: &CollisionBlocks) -> f64 {
        (&self.block_matrix() - &other.block_matrix()).norm()
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {tau}")));
    }
    Ok(())
}

/// Collision Hamiltonian `1⊗H_S + (i/√τ)(σ⁺⊗L − σ⁻⊗L†)` with the
/// environment qubit as the outer (block) index.
pub fn collision_hamiltonian(model: &SystemModel, tau: f64) -> CMat {
    let d = model.dim();
    let h = model.hamiltonian();
    let l = model.coupling();
    let k = c(0.0, 1.0 / tau.sqrt());
    let mut hk = CMat::zeros(2 * d, 2 * d);
    hk.view_mut((0, 0), (d, d)).copy_from(h);
    hk.view_mut((d, d), (d, d)).copy_from(h);
    // σ⁺ = |1⟩⟨0| fills the lower-left block, σ⁻ the upper-right one
    hk.view_mut((d, 0), (d, d)).copy_from(&(l * k));
    hk.view_mut((0, d), (d, d)).copy_from(&(l.adjoint() * (-k)));
    hk
}

/// Blocks of `exp(-iτ H_k)` by dense matrix exponential.
pub fn build_collision_exact(model: &SystemModel, tau: f64) -> Result<CollisionBlocks> {
    check_tau(tau)?;
    let d = model.dim();
    let generator = collision_hamiltonian(model, tau) * c(0.0, -tau);
    let v = linalg::expm(&generator)?;
    let blocks = CollisionBlocks {
        v00: v.view((0, 0), (d, d)).into_owned(),
        v01: v.view((0, d), (d, d)).into_owned(),
        v10: v.view((d, 0), (d, d)).into_owned(),
        v11: v.view((d, d), (d, d)).into_owned(),
        mode: BlockMode::Exact,
        tau,
    };
    let residual = blocks.unitarity_residual();
    if !(residual < UNITARITY_TOL) {
        return Err(Error::Numeric {
            what: "collision unitary".into(),
            residual,
        });
    }
    Ok(blocks)
}

/// Small-step blocks `V00 = 1 − iτH_S − (τ/2)L†L`, `V10 = √τ L`,
/// `V01 = −√τ L†`, `V11 = 1`.
pub fn build_collision_first_order(model: &SystemModel, tau: f64) -> Result<CollisionBlocks> {
    check_tau(tau)?;
    let spread = model.spectral_spread();
    if tau * spread > 0.1 {
        log::warn!("first-order collision blocks with τ·ω_max = {:.3}; expansion is coarse", tau * spread);
    }
    let d = model.dim();
    let id = linalg::identity(d);
    let l = model.coupling();
    let sq = cr(tau.sqrt());
    Ok(CollisionBlocks {
        v00: &id - model.hamiltonian() * c(0.0, tau) - model.decay_operator() * cr(0.5 * tau),
        v01: l.adjoint() * (-sq),
        v10: l * sq,
        v11: id,
        mode: BlockMode::FirstOrder,
        tau,
    })
}

pub fn build_collision(model: &SystemModel, tau: f64, mode: BlockMode) -> Result<CollisionBlocks> {
    match mode {
        BlockMode::Exact => build_collision_exact(model, tau),
        BlockMode::FirstOrder => build_collision_first_order(model, tau),
    }
}
