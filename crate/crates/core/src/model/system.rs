use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat, CVec};

const HERMITIAN_TOL: f64 = 1e-12;
const STATE_TOL: f64 = 1e-10;

/// Initial state of the system: a unit vector or a density matrix.
#[derive(Clone, Debug)]
pub enum InitialState {
    Pure(CVec),
    Mixed(CMat),
}

impl InitialState {
    pub fn density(&self) -> CMat {
        match self {
            InitialState::Pure(psi) => linalg::outer(psi, psi),
            InitialState::Mixed(rho) => rho.clone(),
        }
    }

    pub fn as_pure(&self) -> Option<&CVec> {
        match self {
            InitialState::Pure(psi) => Some(psi),
            InitialState::Mixed(_) => None,
        }
    }

    /// Spectral decomposition into weighted pure states. Components with
    /// weight below 1e-14 are dropped.
    pub fn ensemble(&self) -> Vec<(f64, CVec)> {
        match self {
            InitialState::Pure(psi) => vec![(1.0, psi.clone())],
            InitialState::Mixed(rho) => {
                let eig = linalg::hermitize(rho).symmetric_eigen();
                eig.eigenvalues
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 1e-14)
                    .map(|(k, &w)| (w, eig.eigenvectors.column(k).into_owned()))
                    .collect()
            }
        }
    }

    fn dim(&self) -> usize {
        match self {
            InitialState::Pure(psi) => psi.len(),
            InitialState::Mixed(rho) => rho.nrows(),
        }
    }
}

/// System Hamiltonian `H_S`, coupling operator `L` and initial state.
///
/// Units are fixed by ħ = 1: `H_S` is a rate and `L` carries 1/√time.
#[derive(Clone, Debug)]
pub struct SystemModel {
    hamiltonian: CMat,
    coupling: CMat,
    initial: InitialState,
}

impl SystemModel {
    pub fn new(hamiltonian: CMat, coupling: CMat, initial: InitialState) -> Result<Self> {
        let d = hamiltonian.nrows();
        if d == 0 || !hamiltonian.is_square() {
            return Err(Error::invalid("hamiltonian must be a non-empty square matrix"));
        }
        if coupling.shape() != (d, d) {
            return Err(Error::invalid(format!(
                "coupling has shape {:?}, expected ({d}, {d})",
                coupling.shape()
            )));
        }
        if initial.dim() != d {
            return Err(Error::invalid(format!(
                "initial state has dimension {}, expected {d}",
                initial.dim()
            )));
        }
        let residual = linalg::hermitian_residual(&hamiltonian);
        if residual > HERMITIAN_TOL * hamiltonian.norm().max(1.0) {
            return Err(Error::invalid(format!(
                "hamiltonian is not Hermitian (residual {residual:e})"
            )));
        }
        match &initial {
            InitialState::Pure(psi) => {
                let n = psi.norm();
                if (n - 1.0).abs() > STATE_TOL {
                    return Err(Error::invalid(format!("initial vector has norm {n}")));
                }
            }
            InitialState::Mixed(rho) => {
                if !rho.is_square() {
                    return Err(Error::invalid("initial density matrix is not square"));
                }
                let tr = linalg::trace(rho);
                if (tr - cr(1.0)).norm() > STATE_TOL {
                    return Err(Error::invalid(format!("initial density matrix has trace {tr}")));
                }
                if linalg::hermitian_residual(rho) > STATE_TOL {
                    return Err(Error::invalid("initial density matrix is not Hermitian"));
                }
                let min = linalg::min_eigenvalue(rho);
                if min < -1e-12 {
                    return Err(Error::invalid(format!(
                        "initial density matrix has negative eigenvalue {min:e}"
                    )));
                }
            }
        }
        Ok(SystemModel {
            hamiltonian,
            coupling,
            initial,
        })
    }

    /// Two-level atom with `H_S = 0`, `L = √Γ σ⁻`, starting in the ground
    /// state `|0⟩`. Basis order is (ground, excited).
    pub fn two_level_atom(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::invalid(format!("decay rate must be positive, got {gamma}")));
        }
        let mut l = linalg::zeros(2);
        l[(0, 1)] = cr(gamma.sqrt());
        let psi = CVec::from_vec(vec![cr(1.0), cr(0.0)]);
        SystemModel::new(linalg::zeros(2), l, InitialState::Pure(psi))
    }

    /// Random model for property tests and benchmarks: Hermitian `H_S` and
    /// general `L` with Gaussian entries of the given scales, and a random
    /// pure initial state.
    pub fn random<R: rand::Rng + ?Sized>(
        dim: usize,
        h_scale: f64,
        l_scale: f64,
        rng: &mut R,
    ) -> Self {
        let h = linalg::random_hermitian(dim, h_scale, rng);
        let l = linalg::random_matrix(dim, l_scale, rng);
        let psi = linalg::random_unit_vector(dim, rng);
        SystemModel::new(h, l, InitialState::Pure(psi)).expect("random model is valid")
    }

    pub fn with_initial(&self, initial: InitialState) -> Result<Self> {
        SystemModel::new(self.hamiltonian.clone(), self.coupling.clone(), initial)
    }

    pub fn with_pure_initial(&self, psi: CVec) -> Result<Self> {
        self.with_initial(InitialState::Pure(psi))
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &CMat {
        &self.hamiltonian
    }

    pub fn coupling(&self) -> &CMat {
        &self.coupling
    }

    pub fn initial(&self) -> &InitialState {
        &self.initial
    }

    /// `L†L`
    pub fn decay_operator(&self) -> CMat {
        self.coupling.adjoint() * &self.coupling
    }

    /// Largest gap in the spectrum of `H_S`.
    pub fn spectral_spread(&self) -> f64 {
        let ev = linalg::hermitize(&self.hamiltonian).symmetric_eigenvalues();
        let max = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ev.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }
}

/// Basis vector `|k⟩` of dimension `d`.
pub fn basis_vector(d: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(d);
    v[k] = Complex64::new(1.0, 0.0);
    v
}
