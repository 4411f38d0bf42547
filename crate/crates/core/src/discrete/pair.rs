use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, CVec};
use crate::model::{CollisionBlocks, SystemModel};

/// Which observable is measured on each environment qubit after its
/// collision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measurement {
    /// `σ⁺σ⁻`, outcomes η ∈ {0, 1} (index = η).
    Counting,
    /// `σˣ`, outcomes q ∈ {+1, −1} (index 0 ↦ +1, index 1 ↦ −1).
    Homodyne,
}

impl Measurement {
    /// Physical label of outcome `index`: η for counting, q for homodyne.
    pub fn label(self, index: usize) -> i8 {
        match (self, index) {
            (Measurement::Counting, 0) => 0,
            (Measurement::Counting, 1) => 1,
            (Measurement::Homodyne, 0) => 1,
            (Measurement::Homodyne, 1) => -1,
            _ => panic!("outcome index {index} out of range"),
        }
    }

    pub fn symbol(self, index: usize) -> char {
        match (self, index) {
            (Measurement::Counting, 0) => '0',
            (Measurement::Counting, 1) => '1',
            (Measurement::Homodyne, 0) => '+',
            _ => '-',
        }
    }
}

/// Kraus-like pair `(A, B)` for one outcome: `α' = Aα`,
/// `β' = Aβ + √τ ξ Bα`.
#[derive(Clone, Debug)]
pub struct BranchOperators {
    pub a: CMat,
    pub b: CMat,
}

/// Branch operators for both outcomes of a measurement, in index order.
pub fn branch_operators(blocks: &CollisionBlocks, kind: Measurement) -> [BranchOperators; 2] {
    match kind {
        Measurement::Counting => [
            BranchOperators {
                a: blocks.v00.clone(),
                b: blocks.v01.clone(),
            },
            BranchOperators {
                a: blocks.v10.clone(),
                b: blocks.v11.clone(),
            },
        ],
        Measurement::Homodyne => {
            let s = cr(std::f64::consts::FRAC_1_SQRT_2);
            [
                BranchOperators {
                    a: (&blocks.v00 + &blocks.v10) * s,
                    b: (&blocks.v01 + &blocks.v11) * s,
                },
                BranchOperators {
                    a: (&blocks.v00 - &blocks.v10) * s,
                    b: (&blocks.v01 - &blocks.v11) * s,
                },
            ]
        }
    }
}

/// Unnormalized conditional vectors of the joint system/future-environment
/// state, together with the future photon weight `w_j`.
///
/// `α` is the branch where the photon is still ahead in the chain, `β` the
/// branch where it has already passed through the system.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalPair {
    pub alpha: CVec,
    pub beta: CVec,
    pub step: usize,
    pub tail: f64,
}

impl ConditionalPair {
    /// `α = ψ`, `β = 0` at step 0.
    pub fn initial(psi: &CVec, tail: f64) -> Self {
        ConditionalPair {
            alpha: psi.clone(),
            beta: CVec::zeros(psi.len()),
            step: 0,
            tail,
        }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn trace(&self) -> f64 {
        pair_trace(self)
    }

    /// Both vectors scaled by `1/√trace`.
    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if !(tr > 0.0) {
            return Err(Error::UndefinedState);
        }
        let s = cr(1.0 / tr.sqrt());
        Ok(ConditionalPair {
            alpha: &self.alpha * s,
            beta: &self.beta * s,
            step: self.step,
            tail: self.tail,
        })
    }

    /// One collision followed by the outcome described by `ops`.
    pub fn branch(&self, ops: &BranchOperators, xi: Complex64, tau: f64) -> Self {
        let c = xi * tau.sqrt();
        let alpha = &ops.a * &self.alpha;
        let mut beta = &ops.a * &self.beta;
        beta += (&ops.b * &self.alpha) * c;
        ConditionalPair {
            alpha,
            beta,
            step: self.step + 1,
            tail: (self.tail - tau * xi.norm_sqr()).max(0.0),
        }
    }
}

/// Counting-measurement update with outcome `eta` ∈ {0, 1}.
pub fn counting_step(pair: &ConditionalPair, blocks: &CollisionBlocks, xi_j: Complex64, eta: u8) -> ConditionalPair {
    assert!(eta <= 1, "counting outcome must be 0 or 1");
    let ops = BranchOperators {
        a: blocks.block(eta, 0).clone(),
        b: blocks.block(eta, 1).clone(),
    };
    pair.branch(&ops, xi_j, blocks.tau)
}

/// Homodyne update with outcome `q` ∈ {+1, −1}.
pub fn homodyne_step(pair: &ConditionalPair, blocks: &CollisionBlocks, xi_j: Complex64, q: i8) -> ConditionalPair {
    assert!(q == 1 || q == -1, "homodyne outcome must be ±1");
    let idx = if q == 1 { 0 } else { 1 };
    let ops = branch_operators(blocks, Measurement::Homodyne);
    pair.branch(&ops[idx], xi_j, blocks.tau)
}

/// Update for outcome `index` of measurement `kind`.
pub fn measurement_step(
    pair: &ConditionalPair,
    blocks: &CollisionBlocks,
    xi_j: Complex64,
    kind: Measurement,
    index: usize,
) -> ConditionalPair {
    match kind {
        Measurement::Counting => counting_step(pair, blocks, xi_j, index as u8),
        Measurement::Homodyne => homodyne_step(pair, blocks, xi_j, kind.label(index)),
    }
}

/// Unnormalized a posteriori state `αα†·w + ββ†`.
pub fn posterior_density(pair: &ConditionalPair) -> CMat {
    linalg::outer(&pair.alpha, &pair.alpha) * cr(pair.tail) + linalg::outer(&pair.beta, &pair.beta)
}

/// `⟨α|α⟩·w + ⟨β|β⟩`, the probability of the record that produced the pair.
pub fn pair_trace(pair: &ConditionalPair) -> f64 {
    pair.alpha.norm_squared() * pair.tail + pair.beta.norm_squared()
}

/// Probabilities that the photon is still in the future chain versus
/// already consumed.
pub fn scenario_probabilities(pair: &ConditionalPair) -> Result<(f64, f64)> {
    let tr = pair_trace(pair);
    if !(tr > 0.0) {
        return Err(Error::UndefinedState);
    }
    Ok((pair.alpha.norm_squared() * pair.tail / tr, pair.beta.norm_squared() / tr))
}

/// `p(o) = trace(step(pair, o)) / trace(pair)` for both outcomes in index
/// order.
pub fn outcome_distribution(
    pair: &ConditionalPair,
    blocks: &CollisionBlocks,
    xi_j: Complex64,
    kind: Measurement,
) -> Result<[f64; 2]> {
    let tr = pair_trace(pair);
    if !(tr > 0.0) {
        return Err(Error::UndefinedState);
    }
    let ops = branch_operators(blocks, kind);
    Ok([
        pair.branch(&ops[0], xi_j, blocks.tau).trace() / tr,
        pair.branch(&ops[1], xi_j, blocks.tau).trace() / tr,
    ])
}

/// Complex-valued `(k_j, r_j)` before taking real parts.
pub(crate) fn intensities_complex(
    pair: &ConditionalPair,
    model: &SystemModel,
    xi: Complex64,
) -> Result<(Complex64, Complex64)> {
    let tr = pair_trace(pair);
    if !(tr > 0.0) {
        return Err(Error::UndefinedState);
    }
    let s = cr(1.0 / tr.sqrt());
    let a = &pair.alpha * s;
    let b = &pair.beta * s;
    let rho = posterior_density(pair) * cr(1.0 / tr);
    let l = model.coupling();
    let ldag = l.adjoint();
    let ab = linalg::outer(&a, &b);
    let ba = linalg::outer(&b, &a);
    let aa = linalg::outer(&a, &a);

    let k = linalg::trace(&(model.decay_operator() * &rho))
        + linalg::trace(&(l * &ba)) * xi.conj()
        + linalg::trace(&(&ab * &ldag)) * xi
        + linalg::trace(&aa) * xi.norm_sqr();
    let r = linalg::trace(&(l * &rho))
        + linalg::trace(&(&rho * &ldag))
        + linalg::trace(&ba) * xi.conj()
        + linalg::trace(&ab) * xi;
    Ok((k, r))
}

/// Small-step counting intensity `k_j` and homodyne rate `r_j`.
pub fn first_order_intensities(pair: &ConditionalPair, model: &SystemModel, xi_j: Complex64) -> Result<(f64, f64)> {
    let (k, r) = intensities_complex(pair, model, xi_j)?;
    Ok((k.re, r.re))
}
