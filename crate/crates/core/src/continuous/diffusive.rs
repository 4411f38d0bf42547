use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::continuous::hierarchy::{master_derivative, step_count, Hierarchy, HierarchyOperators};
use crate::continuous::jump::StepOptions;
use crate::continuous::kernel::{diffusive_table, flat_hermitize, flat_trace, DiffusiveKernel, KernelTable, RVec};
use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat};
use crate::model::{PhotonProfile, SystemModel};
use crate::seeding::trajectory_rng;

/// `r_t` as a complex number; the imaginary part is roundoff.
#[cfg(test)]
pub(crate) fn homodyne_rate_complex(ops: &HierarchyOperators, h: &Hierarchy, xi: Complex64) -> Complex64 {
    let l_rho = linalg::trace(&(&ops.l * &h.rho));
    let rho_ldag = linalg::trace(&(&h.rho * &ops.ldag));
    let t01 = linalg::trace(&h.rho01);
    l_rho + rho_ldag + t01.conj() * xi.conj() + t01 * xi
}

/// Homodyne rate `r_t = Tr(Lρ + ρL† + ρ10 ξ* + ρ01 ξ)`.
pub fn homodyne_rate(ops: &HierarchyOperators, h: &Hierarchy, xi: Complex64) -> f64 {
    let l_rho = linalg::trace(&(&ops.l * &h.rho));
    2.0 * l_rho.re + 2.0 * (xi * linalg::trace(&h.rho01)).re
}

/// Noise coefficients of the three sectors.
pub fn diffusion_coefficients(ops: &HierarchyOperators, h: &Hierarchy, xi: Complex64) -> Hierarchy {
    let r = cr(homodyne_rate(ops, h, xi));
    let lr = |x: &CMat| &ops.l * x + x * &ops.ldag;
    let rho = lr(&h.rho) + &h.rho01 * xi + h.rho10() * xi.conj() - &h.rho * r;
    let rho01 = lr(&h.rho01) + &h.rho00 * xi.conj() - &h.rho01 * r;
    let rho00 = lr(&h.rho00) - &h.rho00 * r;
    Hierarchy { rho, rho01, rho00 }
}

/// Euler–Maruyama step of the homodyne filter with Wiener increment `dw`.
pub fn diffusive_step(ops: &HierarchyOperators, h: &Hierarchy, xi: Complex64, dt: f64, dw: f64, renormalize: bool) -> Result<Hierarchy> {
    let drift = master_derivative(ops, h, xi);
    let noise = diffusion_coefficients(ops, h, xi);
    let mut next = h.add_scaled(&drift, dt).add_scaled(&noise, dw);
    next.hermitize();
    if renormalize {
        next.renormalize()?;
    }
    Ok(next)
}

/// One sampled homodyne trajectory.
#[derive(Clone, Debug)]
pub struct DiffusivePath {
    pub times: Vec<f64>,
    pub states: Vec<Hierarchy>,
    /// `r_t` at the recorded times.
    pub rates: Vec<f64>,
    /// Accumulated Wiener process `w(t)` at the recorded times.
    pub wiener: Vec<f64>,
    /// All increments `Δw_i`.
    pub increments: Vec<f64>,
    /// Smallest eigenvalue of `ρ̃` seen at recorded times. Monitored only.
    pub min_eigenvalue: f64,
    pub seed: u64,
    pub index: u64,
}

/// Homodyne unraveling on a fixed grid, sharing per-step kernels between
/// runs. Each step is the Euler–Maruyama update of [`diffusive_step`].
#[derive(Debug)]
pub struct DiffusiveSimulator {
    table: KernelTable<DiffusiveKernel>,
    initial: Hierarchy,
    opts: StepOptions,
}

impl DiffusiveSimulator {
    pub fn new(model: &SystemModel, profile: &PhotonProfile, opts: &StepOptions) -> Result<Self> {
        Self::build(model, profile, opts, true)
    }

    fn build(model: &SystemModel, profile: &PhotonProfile, opts: &StepOptions, cache: bool) -> Result<Self> {
        let n = step_count(opts.t_end, opts.dt)?;
        Ok(DiffusiveSimulator {
            table: diffusive_table(HierarchyOperators::new(model), profile, n, opts.dt, cache),
            initial: Hierarchy::initial(model),
            opts: opts.clone(),
        })
    }

    /// Trajectory `index` under `seed`.
    pub fn run(&self, seed: u64, index: u64) -> Result<DiffusivePath> {
        let mut path = self.run_with(&mut trajectory_rng(seed, index))?;
        path.seed = seed;
        path.index = index;
        Ok(path)
    }

    /// Homodyne unraveling driven by `dw ~ N(0, dt)`.
    pub fn run_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DiffusivePath> {
        let table = &self.table;
        let ops = table.ops();
        let d = ops.dim();
        let n = table.steps();
        let dt = self.opts.dt;
        let stride = self.opts.stride.max(1);
        let normal = Normal::new(0.0, dt.sqrt()).expect("positive standard deviation");
        let h0 = &self.initial;
        let mut path = DiffusivePath {
            times: vec![0.0],
            states: vec![h0.clone()],
            rates: vec![homodyne_rate(ops, h0, table.xi(0))],
            wiener: vec![0.0],
            increments: Vec::with_capacity(n),
            min_eigenvalue: linalg::min_eigenvalue(&h0.rho),
            seed: 0,
            index: 0,
        };
        let mut x = RVec::from_vec(h0.flatten());
        let mut y = RVec::zeros(x.len());
        let mut z = RVec::zeros(x.len());
        let mut last = None;
        let mut w = 0.0;
        for i in 0..n {
            let ker = table.get(i, &mut last);
            let dw = normal.sample(rng);
            let r = ker.rate.dot(&x);
            y.gemv(1.0, &ker.drift, &x, 0.0);
            z.gemv(1.0, &ker.noise, &x, 0.0);
            y.axpy(dw, &z, 1.0);
            y.axpy(-dw * r, &x, 1.0);
            std::mem::swap(&mut x, &mut y);
            flat_hermitize(x.as_mut_slice(), d);
            if self.opts.renormalize {
                let tr = flat_trace(x.as_slice(), d);
                if !(tr > 0.0) {
                    return Err(Error::UndefinedState);
                }
                x /= tr;
            }
            w += dw;
            path.increments.push(dw);
            if (i + 1) % stride == 0 || i + 1 == n {
                let h = Hierarchy::unflatten(d, x.as_slice());
                path.times.push((i + 1) as f64 * dt);
                path.rates.push(homodyne_rate(ops, &h, table.xi(i + 1)));
                path.wiener.push(w);
                path.min_eigenvalue = path.min_eigenvalue.min(linalg::min_eigenvalue(&h.rho));
                path.states.push(h);
            }
        }
        Ok(path)
    }
}

/// Homodyne unraveling driven by `dw ~ N(0, dt)`.
pub fn simulate_diffusive_trajectory_with<R: Rng + ?Sized>(
    model: &SystemModel,
    profile: &PhotonProfile,
    opts: &StepOptions,
    rng: &mut R,
) -> Result<DiffusivePath> {
    DiffusiveSimulator::build(model, profile, opts, false)?.run_with(rng)
}

/// [`simulate_diffusive_trajectory_with`] on the stream of trajectory `index`.
pub fn simulate_diffusive_trajectory(
    model: &SystemModel,
    profile: &PhotonProfile,
    opts: &StepOptions,
    seed: u64,
    index: u64,
) -> Result<DiffusivePath> {
    DiffusiveSimulator::build(model, profile, opts, false)?.run(seed, index)
}
