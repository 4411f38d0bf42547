use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, c, cr, CMat};
use crate::model::{PhotonProfile, SystemModel};

/// Largest tolerated drift of `Tr ρ` in [`integrate_master`].
pub const MASTER_DRIFT_LIMIT: f64 = 1e-5;

/// The coupled triple `(ρ̃, ρ̃01, ρ̃00)`. `ρ̃10` is `rho01†`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hierarchy {
    pub rho: CMat,
    pub rho01: CMat,
    pub rho00: CMat,
}

impl Hierarchy {
    /// `ρ = ρ00 = ρ0`, `ρ01 = 0`.
    pub fn initial(model: &SystemModel) -> Self {
        let rho0 = model.initial().density();
        let d = model.dim();
        Hierarchy {
            rho: rho0.clone(),
            rho01: CMat::zeros(d, d),
            rho00: rho0,
        }
    }

    pub fn zeros(d: usize) -> Self {
        Hierarchy {
            rho: CMat::zeros(d, d),
            rho01: CMat::zeros(d, d),
            rho00: CMat::zeros(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn rho10(&self) -> CMat {
        self.rho01.adjoint()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.rho).re
    }

    pub fn scaled(&self, s: f64) -> Self {
        let s = cr(s);
        Hierarchy {
            rho: &self.rho * s,
            rho01: &self.rho01 * s,
            rho00: &self.rho00 * s,
        }
    }

    /// `self + s·other`
    pub fn add_scaled(&self, other: &Hierarchy, s: f64) -> Self {
        let s = cr(s);
        Hierarchy {
            rho: &self.rho + &other.rho * s,
            rho01: &self.rho01 + &other.rho01 * s,
            rho00: &self.rho00 + &other.rho00 * s,
        }
    }

    /// Symmetrizes `ρ` and `ρ00`.
    pub fn hermitize(&mut self) {
        linalg::hermitize_in_place(&mut self.rho);
        linalg::hermitize_in_place(&mut self.rho00);
    }

    /// Divides all three sectors by `Tr ρ`.
    pub fn renormalize(&mut self) -> Result<()> {
        let tr = self.trace();
        if !(tr > 0.0) {
            return Err(Error::UndefinedState);
        }
        let s = cr(1.0 / tr);
        self.rho *= s;
        self.rho01 *= s;
        self.rho00 *= s;
        Ok(())
    }

    /// Real and imaginary parts of all entries, sector by sector in
    /// column-major order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(6 * self.rho.len());
        for m in [&self.rho, &self.rho01, &self.rho00] {
            for z in m.iter() {
                out.push(z.re);
                out.push(z.im);
            }
        }
        out
    }

    /// Inverse of [`Hierarchy::flatten`].
    pub fn unflatten(d: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), 6 * d * d);
        let sector = |k: usize| {
            let off = 2 * d * d * k;
            CMat::from_iterator(d, d, (0..d * d).map(|i| c(data[off + 2 * i], data[off + 2 * i + 1])))
        };
        Hierarchy {
            rho: sector(0),
            rho01: sector(1),
            rho00: sector(2),
        }
    }
}

/// Operators derived from a model that every step needs.
#[derive(Clone, Debug)]
pub struct HierarchyOperators {
    pub l: CMat,
    pub ldag: CMat,
    /// `L†L`
    pub ldl: CMat,
    /// `G = H − (i/2)L†L`
    pub g: CMat,
    /// `−iG`
    pub mig: CMat,
    /// `(−iG)† = iG†`
    pub mig_dag: CMat,
}

impl HierarchyOperators {
    pub fn new(model: &SystemModel) -> Self {
        let l = model.coupling().clone();
        let ldag = l.adjoint();
        let ldl = &ldag * &l;
        let g = model.hamiltonian() - &ldl * c(0.0, 0.5);
        let mig = &g * c(0.0, -1.0);
        let mig_dag = mig.adjoint();
        HierarchyOperators {
            l,
            ldag,
            ldl,
            g,
            mig,
            mig_dag,
        }
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// `−i[H,X] − ½{L†L,X} + LXL†`
    pub fn dissipator(&self, x: &CMat) -> CMat {
        &self.mig * x + x * &self.mig_dag + &self.l * x * &self.ldag
    }
}

/// Right-hand side of the a priori hierarchy.
pub fn master_derivative(ops: &HierarchyOperators, h: &Hierarchy, xi: Complex64) -> Hierarchy {
    let rho10 = h.rho10();
    let mut drho = ops.dissipator(&h.rho);
    drho += (&h.rho01 * &ops.ldag - &ops.ldag * &h.rho01) * xi;
    drho += (&ops.l * &rho10 - &rho10 * &ops.l) * xi.conj();
    let mut d01 = ops.dissipator(&h.rho01);
    d01 += (&ops.l * &h.rho00 - &h.rho00 * &ops.l) * xi.conj();
    Hierarchy {
        rho: drho,
        rho01: d01,
        rho00: ops.dissipator(&h.rho00),
    }
}

/// Sampled solution of an ODE or SDE for the hierarchy.
#[derive(Clone, Debug)]
pub struct MasterPath {
    pub times: Vec<f64>,
    pub states: Vec<Hierarchy>,
    /// Largest `|Tr ρ − 1|` seen over all steps.
    pub max_trace_drift: f64,
}

impl MasterPath {
    /// State at the recorded time closest to `t`.
    pub fn at(&self, t: f64) -> &Hierarchy {
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(k, _)| k)
            .expect("path is never empty");
        &self.states[k]
    }
}

/// Number of grid steps of size `dt` covering `[0, t_end]`.
pub(crate) fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::invalid(format!("end time must be >= 0, got {t_end}")));
    }
    Ok((t_end / dt - 1e-9).ceil().max(0.0) as usize)
}

/// Fixed-step RK4 integration of the a priori hierarchy on `[0, t_end]`,
/// recording every `stride`-th step.
pub fn integrate_master(
    model: &SystemModel,
    profile: &PhotonProfile,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<MasterPath> {
    let n = step_count(t_end, dt)?;
    let stride = stride.max(1);
    let ops = HierarchyOperators::new(model);
    let mut h = Hierarchy::initial(model);
    let mut path = MasterPath {
        times: vec![0.0],
        states: vec![h.clone()],
        max_trace_drift: 0.0,
    };
    for i in 0..n {
        let t = i as f64 * dt;
        let x0 = profile.amplitude(t);
        let xm = profile.amplitude(t + 0.5 * dt);
        let x1 = profile.amplitude(t + dt);
        let k1 = master_derivative(&ops, &h, x0);
        let k2 = master_derivative(&ops, &h.add_scaled(&k1, 0.5 * dt), xm);
        let k3 = master_derivative(&ops, &h.add_scaled(&k2, 0.5 * dt), xm);
        let k4 = master_derivative(&ops, &h.add_scaled(&k3, dt), x1);
        h = h
            .add_scaled(&k1, dt / 6.0)
            .add_scaled(&k2, dt / 3.0)
            .add_scaled(&k3, dt / 3.0)
            .add_scaled(&k4, dt / 6.0);
        h.hermitize();
        let drift = (h.trace() - 1.0).abs();
        path.max_trace_drift = path.max_trace_drift.max(drift);
        if !(drift <= MASTER_DRIFT_LIMIT) {
            return Err(Error::Accuracy {
                drift,
                time: t + dt,
                limit: MASTER_DRIFT_LIMIT,
            });
        }
        if (i + 1) % stride == 0 || i + 1 == n {
            path.times.push((i + 1) as f64 * dt);
            path.states.push(h.clone());
        }
    }
    Ok(path)
}
