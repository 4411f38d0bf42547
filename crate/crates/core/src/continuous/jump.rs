use num_complex::Complex64;
use rand::Rng;

use crate::continuous::hierarchy::{step_count, Hierarchy, HierarchyOperators, MasterPath};
use crate::continuous::kernel::{flat_hermitize, flat_trace, jump_table, JumpKernel, KernelTable, RVec};
use crate::error::{Error, Result};
use crate::linalg::{self, cr};
use crate::model::{PhotonProfile, SystemModel};
use crate::seeding::trajectory_rng;

/// Intensities at or below this value cannot trigger a jump.
pub const JUMP_THRESHOLD: f64 = 1e-12;
/// Upper bound on `k·dt` for a no-jump step.
pub const STEP_GUARD: f64 = 0.2;
const CLAMP_TOL: f64 = 1e-10;
const INCONSISTENT: f64 = -1e-6;

/// `k_t` as a complex number, before any clamping.
#[cfg(test)]
pub(crate) fn jump_intensity_complex(ops: &HierarchyOperators, h: &Hierarchy, xi: Complex64) -> Complex64 {
    let rho10 = h.rho10();
    linalg::trace(&(&ops.ldl * &h.rho))
        + linalg::trace(&(&ops.l * &rho10)) * xi.conj()
        + linalg::trace(&(&h.rho01 * &ops.ldag)) * xi
        + linalg::trace(&h.rho00) * xi.norm_sqr()
}

pub(crate) fn intensity_raw(ops: &HierarchyOperators, h: &Hierarchy, xi: Complex64) -> f64 {
    // Tr(Lρ10) is the conjugate of Tr(ρ01L†), so only real parts are needed
    let d = ops.dim();
    let mut cross = Complex64::new(0.0, 0.0);
    let mut direct = 0.0;
    for i in 0..d {
        for j in 0..d {
            cross += h.rho01[(i, j)] * ops.ldag[(j, i)];
            direct += (ops.ldl[(i, j)] * h.rho[(j, i)]).re;
        }
    }
    direct + 2.0 * (xi * cross).re + linalg::trace(&h.rho00).re * xi.norm_sqr()
}

/// Counting intensity `k_t`.
///
/// Values in `[−1e−10, 0)` are roundoff and clamp to 0; small negatives above
/// −1e−6 are clamped with a warning; anything lower is an error.
pub fn jump_intensity(ops: &HierarchyOperators, h: &Hierarchy, xi: Complex64) -> Result<f64> {
    clamp_intensity(intensity_raw(ops, h, xi))
}

fn clamp_intensity(k: f64) -> Result<f64> {
    if k >= 0.0 {
        Ok(k)
    } else if k >= -CLAMP_TOL {
        Ok(0.0)
    } else if k >= INCONSISTENT {
        log::warn!("clamping negative jump intensity {k:e}");
        Ok(0.0)
    } else {
        Err(Error::ModelInconsistency { value: k })
    }
}

/// State right after a count.
pub fn jump_update(ops: &HierarchyOperators, h: &Hierarchy, xi: Complex64) -> Result<Hierarchy> {
    let k = jump_intensity(ops, h, xi)?;
    if !(k > JUMP_THRESHOLD) {
        return Err(Error::ForbiddenJump { intensity: k });
    }
    let inv = cr(1.0 / k);
    let l_rho00 = &ops.l * &h.rho00;
    let rho00 = &l_rho00 * &ops.ldag;
    let rho01 = &ops.l * &h.rho01 * &ops.ldag + &l_rho00 * xi.conj();
    let cross = &h.rho01 * &ops.ldag * xi;
    let mut rho = &ops.l * &h.rho * &ops.ldag + &cross + cross.adjoint() + &h.rho00 * cr(xi.norm_sqr());
    rho *= inv;
    let mut out = Hierarchy {
        rho,
        rho01: rho01 * inv,
        rho00: rho00 * inv,
    };
    out.hermitize();
    Ok(out)
}

/// `−iGX + iXG†`
fn non_hermitian_flow(ops: &HierarchyOperators, x: &linalg::CMat) -> linalg::CMat {
    &ops.mig * x + x * &ops.mig_dag
}

/// Deterministic drift of the conditional triple between counts.
pub fn no_jump_drift(ops: &HierarchyOperators, h: &Hierarchy, xi: Complex64) -> Result<Hierarchy> {
    let k = jump_intensity(ops, h, xi)?;
    Ok(no_jump_drift_with(ops, h, xi, k))
}

fn no_jump_drift_with(ops: &HierarchyOperators, h: &Hierarchy, xi: Complex64, k: f64) -> Hierarchy {
    let kc = cr(k);
    let ldag_rho01 = &ops.ldag * &h.rho01 * xi;
    let mut rho = non_hermitian_flow(ops, &h.rho) - &ldag_rho01 - ldag_rho01.adjoint();
    rho += &h.rho * kc - &h.rho00 * cr(xi.norm_sqr());
    let rho01 = non_hermitian_flow(ops, &h.rho01) - &h.rho00 * &ops.l * xi.conj() + &h.rho01 * kc;
    let rho00 = non_hermitian_flow(ops, &h.rho00) + &h.rho00 * kc;
    Hierarchy { rho, rho01, rho00 }
}

/// Unnormalized no-count flow; real-linear in the triple.
pub(crate) fn linear_no_jump_flow(ops: &HierarchyOperators, h: &Hierarchy, xi: Complex64) -> Hierarchy {
    no_jump_drift_with(ops, h, xi, 0.0)
}

/// One step of the no-count evolution over `[t, t + dt]` with `ξ` held at
/// its value at `t`.
///
/// The deterministic flow is advanced with classical RK4. A plain Euler step
/// is only first order in the factorized structure of the triple, which lets
/// `k_t` dip below zero near its zeros; RK4 keeps that defect at roundoff
/// for the step sizes used in practice.
pub fn no_jump_step(ops: &HierarchyOperators, h: &Hierarchy, xi: Complex64, dt: f64, renormalize: bool) -> Result<Hierarchy> {
    let k = jump_intensity(ops, h, xi)?;
    let product = k * dt;
    if !(product < STEP_GUARD) {
        return Err(Error::StepSize {
            product,
            limit: STEP_GUARD,
        });
    }
    let f = |x: &Hierarchy| no_jump_drift_with(ops, x, xi, intensity_raw(ops, x, xi));
    let k1 = no_jump_drift_with(ops, h, xi, k);
    let k2 = f(&h.add_scaled(&k1, 0.5 * dt));
    let k3 = f(&h.add_scaled(&k2, 0.5 * dt));
    let k4 = f(&h.add_scaled(&k3, dt));
    let mut next = h
        .add_scaled(&k1, dt / 6.0)
        .add_scaled(&k2, dt / 3.0)
        .add_scaled(&k3, dt / 3.0)
        .add_scaled(&k4, dt / 6.0);
    next.hermitize();
    if renormalize {
        next.renormalize()?;
    }
    Ok(next)
}

/// RK4 integration of the no-count conditional state, with `Tr ρ` reset to
/// one after each step. This is the continuum filter along a record without
/// counts.
pub fn no_jump_flow(model: &SystemModel, profile: &PhotonProfile, t_end: f64, dt: f64) -> Result<Hierarchy> {
    let n = step_count(t_end, dt)?;
    let ops = HierarchyOperators::new(model);
    let mut h = Hierarchy::initial(model);
    for i in 0..n {
        let t = i as f64 * dt;
        let (x0, xm, x1) = (profile.amplitude(t), profile.amplitude(t + 0.5 * dt), profile.amplitude(t + dt));
        let f = |x: &Hierarchy, xi: Complex64| no_jump_drift_with(&ops, x, xi, intensity_raw(&ops, x, xi));
        jump_intensity(&ops, &h, x0)?;
        let k1 = f(&h, x0);
        let k2 = f(&h.add_scaled(&k1, 0.5 * dt), xm);
        let k3 = f(&h.add_scaled(&k2, 0.5 * dt), xm);
        let k4 = f(&h.add_scaled(&k3, dt), x1);
        h = h
            .add_scaled(&k1, dt / 6.0)
            .add_scaled(&k2, dt / 3.0)
            .add_scaled(&k3, dt / 3.0)
            .add_scaled(&k4, dt / 6.0);
        h.hermitize();
        h.renormalize()?;
    }
    Ok(h)
}

#[derive(Clone, Debug)]
pub struct StepOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Record the state every `stride` steps (and at the final step).
    pub stride: usize,
    /// Rescale `Tr ρ` to one after each homodyne step. The counting path is
    /// always normalized.
    pub renormalize: bool,
    /// Stop after this many counts (jump unraveling only).
    pub stop_after_counts: Option<usize>,
}

impl StepOptions {
    pub fn new(t_end: f64, dt: f64) -> Self {
        StepOptions {
            t_end,
            dt,
            stride: 1,
            renormalize: false,
            stop_after_counts: None,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }
}

/// One sampled counting trajectory.
#[derive(Clone, Debug)]
pub struct JumpPath {
    pub times: Vec<f64>,
    pub states: Vec<Hierarchy>,
    /// `k_t` at the recorded times.
    pub intensities: Vec<f64>,
    /// Cumulative counts at the recorded times.
    pub counts: Vec<usize>,
    pub jump_times: Vec<f64>,
    /// `Π (1 − k dt)` over no-count steps up to the first count (or the end).
    pub survival_product: f64,
    pub seed: u64,
    pub index: u64,
}

impl JumpPath {
    pub fn first_jump(&self) -> Option<f64> {
        self.jump_times.first().copied()
    }

    pub fn as_master_path(&self) -> MasterPath {
        MasterPath {
            times: self.times.clone(),
            states: self.states.clone(),
            max_trace_drift: self.states.iter().map(|h| (h.trace() - 1.0).abs()).fold(0.0, f64::max),
        }
    }
}

/// Jump unraveling on a fixed grid, sharing per-step kernels between runs.
///
/// Between counts the unnormalized triple follows a linear flow; each step
/// applies the RK4 polynomial of that flow with `ξ` frozen and rescales to
/// `Tr ρ = 1`, so the counting path carries no trace drift.
#[derive(Debug)]
pub struct JumpSimulator {
    table: KernelTable<JumpKernel>,
    initial: Hierarchy,
    opts: StepOptions,
}

impl JumpSimulator {
    pub fn new(model: &SystemModel, profile: &PhotonProfile, opts: &StepOptions) -> Result<Self> {
        Self::build(model, profile, opts, true)
    }

    fn build(model: &SystemModel, profile: &PhotonProfile, opts: &StepOptions, cache: bool) -> Result<Self> {
        let n = step_count(opts.t_end, opts.dt)?;
        Ok(JumpSimulator {
            table: jump_table(HierarchyOperators::new(model), profile, n, opts.dt, cache),
            initial: Hierarchy::initial(model),
            opts: opts.clone(),
        })
    }

    pub fn options(&self) -> &StepOptions {
        &self.opts
    }

    /// Trajectory `index` under `seed`.
    pub fn run(&self, seed: u64, index: u64) -> Result<JumpPath> {
        let mut path = self.run_with(&mut trajectory_rng(seed, index))?;
        path.seed = seed;
        path.index = index;
        Ok(path)
    }

    pub fn run_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<JumpPath> {
        let table = &self.table;
        let ops = table.ops();
        let d = ops.dim();
        let n = table.steps();
        let dt = self.opts.dt;
        let stride = self.opts.stride.max(1);
        let mut path = JumpPath {
            times: Vec::with_capacity(n / stride + 2),
            states: Vec::with_capacity(n / stride + 2),
            intensities: Vec::with_capacity(n / stride + 2),
            counts: Vec::with_capacity(n / stride + 2),
            jump_times: Vec::new(),
            survival_product: 1.0,
            seed: 0,
            index: 0,
        };
        let push = |path: &mut JumpPath, t: f64, h: Hierarchy, k: f64| {
            path.times.push(t);
            path.states.push(h);
            path.intensities.push(k);
            path.counts.push(path.jump_times.len());
        };
        push(&mut path, 0.0, self.initial.clone(), jump_intensity(ops, &self.initial, table.xi(0))?);
        let mut x = RVec::from_vec(self.initial.flatten());
        let mut y = RVec::zeros(x.len());
        let mut last = None;
        for i in 0..n {
            let t = i as f64 * dt;
            let ker = table.get(i, &mut last);
            let k = clamp_intensity(ker.intensity.dot(&x))?;
            let u: f64 = rng.random();
            if u < k * dt {
                let h = jump_update(ops, &Hierarchy::unflatten(d, x.as_slice()), table.xi(i))?;
                x.copy_from_slice(&h.flatten());
                path.jump_times.push(t + dt);
            } else {
                let product = k * dt;
                if !(product < STEP_GUARD) {
                    return Err(Error::StepSize {
                        product,
                        limit: STEP_GUARD,
                    });
                }
                if path.jump_times.is_empty() {
                    path.survival_product *= 1.0 - product;
                }
                y.gemv(1.0, &ker.propagator, &x, 0.0);
                let tr = flat_trace(y.as_slice(), d);
                if !(tr > 0.0) {
                    return Err(Error::UndefinedState);
                }
                y /= tr;
                std::mem::swap(&mut x, &mut y);
                flat_hermitize(x.as_mut_slice(), d);
            }
            let done = self.opts.stop_after_counts.is_some_and(|c| path.jump_times.len() >= c);
            if (i + 1) % stride == 0 || i + 1 == n || done {
                let h = Hierarchy::unflatten(d, x.as_slice());
                let k1 = jump_intensity(ops, &h, table.xi(i + 1))?;
                push(&mut path, (i + 1) as f64 * dt, h, k1);
            }
            if done {
                break;
            }
        }
        Ok(path)
    }
}

/// Jump unraveling: at every step a count happens with probability `k dt`.
pub fn simulate_jump_trajectory_with<R: Rng + ?Sized>(
    model: &SystemModel,
    profile: &PhotonProfile,
    opts: &StepOptions,
    rng: &mut R,
) -> Result<JumpPath> {
    JumpSimulator::build(model, profile, opts, false)?.run_with(rng)
}

/// [`simulate_jump_trajectory_with`] on the stream of trajectory `index`.
pub fn simulate_jump_trajectory(
    model: &SystemModel,
    profile: &PhotonProfile,
    opts: &StepOptions,
    seed: u64,
    index: u64,
) -> Result<JumpPath> {
    JumpSimulator::build(model, profile, opts, false)?.run(seed, index)
}
