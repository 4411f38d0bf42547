//! Per-time-step real-linear maps on the flattened triple.
//!
//! For a fixed `ξ`, the unnormalized no-count flow and the drift and noise
//! parts of the homodyne step are real-linear maps of the triple. They
//! depend on time only through `ξ_t`, so a batch of trajectories on the same
//! grid can share one matrix per step.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::continuous::diffusive::homodyne_rate;
use crate::continuous::hierarchy::{master_derivative, Hierarchy, HierarchyOperators};
use crate::continuous::jump::{intensity_raw, linear_no_jump_flow};
use crate::linalg::CMat;
use crate::model::PhotonProfile;

/// Upper bound on cached kernel storage per batch.
const CACHE_BYTES: usize = 256 << 20;

pub(crate) type RMat = DMatrix<f64>;
pub(crate) type RVec = DVector<f64>;

fn flat_len(d: usize) -> usize {
    6 * d * d
}

/// Real matrix of a real-linear map of the triple, in [`Hierarchy::flatten`]
/// coordinates.
fn matrix_of(d: usize, f: impl Fn(&Hierarchy) -> Hierarchy) -> RMat {
    let n = flat_len(d);
    let mut m = RMat::zeros(n, n);
    let mut e = vec![0.0; n];
    for k in 0..n {
        e[k] = 1.0;
        let col = f(&Hierarchy::unflatten(d, &e)).flatten();
        m.set_column(k, &RVec::from_vec(col));
        e[k] = 0.0;
    }
    m
}

fn functional_of(d: usize, f: impl Fn(&Hierarchy) -> f64) -> RVec {
    let n = flat_len(d);
    let mut e = vec![0.0; n];
    RVec::from_fn(n, |k, _| {
        e[k] = 1.0;
        let v = f(&Hierarchy::unflatten(d, &e));
        e[k] = 0.0;
        v
    })
}

/// `Tr ρ` of a flattened triple.
pub(crate) fn flat_trace(x: &[f64], d: usize) -> f64 {
    (0..d).map(|i| x[2 * i * (d + 1)]).sum()
}

/// Symmetrizes the `ρ` and `ρ00` sectors of a flattened triple in place.
pub(crate) fn flat_hermitize(x: &mut [f64], d: usize) {
    for off in [0, 4 * d * d] {
        for j in 0..d {
            x[off + 2 * (j + j * d) + 1] = 0.0;
            for i in 0..j {
                let a = off + 2 * (i + j * d);
                let b = off + 2 * (j + i * d);
                let re = 0.5 * (x[a] + x[b]);
                let im = 0.5 * (x[a + 1] - x[b + 1]);
                x[a] = re;
                x[a + 1] = im;
                x[b] = re;
                x[b + 1] = -im;
            }
        }
    }
}

/// No-count step: `x ↦ Φ x` followed by normalization; `k = w·x`.
#[derive(Clone, Debug)]
pub(crate) struct JumpKernel {
    pub propagator: RMat,
    pub intensity: RVec,
}

/// Homodyne step: `x ↦ D x + dw (N x − (c·x) x)`.
#[derive(Clone, Debug)]
pub(crate) struct DiffusiveKernel {
    pub drift: RMat,
    pub noise: RMat,
    pub rate: RVec,
}

fn jump_kernel(ops: &HierarchyOperators, xi: Complex64, dt: f64) -> JumpKernel {
    let d = ops.dim();
    let a = matrix_of(d, |h| linear_no_jump_flow(ops, h, xi)) * dt;
    // fourth-order Taylor polynomial of exp(dt A), i.e. RK4 on a linear flow
    let n = a.nrows();
    let id = RMat::identity(n, n);
    let mut phi = &id + &a * 0.25;
    phi = &id + (&a * &phi) * (1.0 / 3.0);
    phi = &id + (&a * &phi) * 0.5;
    phi = &id + &a * &phi;
    JumpKernel {
        propagator: phi,
        intensity: functional_of(d, |h| intensity_raw(ops, h, xi)),
    }
}

fn diffusive_kernel(ops: &HierarchyOperators, xi: Complex64, dt: f64) -> DiffusiveKernel {
    let d = ops.dim();
    let n = flat_len(d);
    let drift = RMat::identity(n, n) + matrix_of(d, |h| master_derivative(ops, h, xi)) * dt;
    let noise = matrix_of(d, |h| {
        let lr = |x: &CMat| &ops.l * x + x * &ops.ldag;
        Hierarchy {
            rho: lr(&h.rho) + &h.rho01 * xi + h.rho10() * xi.conj(),
            rho01: lr(&h.rho01) + &h.rho00 * xi.conj(),
            rho00: lr(&h.rho00),
        }
    });
    DiffusiveKernel {
        drift,
        noise,
        rate: functional_of(d, |h| homodyne_rate(ops, h, xi)),
    }
}

/// Kernels for every step of a fixed grid, cached when they fit in memory.
///
/// Steps with bitwise-equal `ξ` share one kernel.
#[derive(Debug)]
pub(crate) struct KernelTable<K> {
    ops: HierarchyOperators,
    xs: Vec<Complex64>,
    dt: f64,
    /// `slot[i]` indexes `kernels` when cached.
    slot: Vec<usize>,
    kernels: Option<Vec<K>>,
    build: fn(&HierarchyOperators, Complex64, f64) -> K,
}

impl<K> KernelTable<K> {
    fn new(ops: HierarchyOperators, profile: &PhotonProfile, steps: usize, dt: f64, cache: bool, build: fn(&HierarchyOperators, Complex64, f64) -> K, per_kernel: usize) -> Self {
        // one extra grid point so the state at the final time can be evaluated
        let xs: Vec<Complex64> = (0..=steps).map(|i| profile.amplitude(i as f64 * dt)).collect();
        let mut slot = Vec::with_capacity(steps);
        let mut distinct = 0usize;
        for (i, x) in xs[..steps].iter().enumerate() {
            if i > 0 && xs[i - 1] == *x {
                slot.push(slot[i - 1]);
            } else {
                slot.push(distinct);
                distinct += 1;
            }
        }
        let kernels = if cache && distinct.saturating_mul(per_kernel) <= CACHE_BYTES {
            let mut ks = Vec::with_capacity(distinct);
            for (i, x) in xs[..steps].iter().enumerate() {
                if i == 0 || slot[i] != slot[i - 1] {
                    ks.push(build(&ops, *x, dt));
                }
            }
            Some(ks)
        } else {
            None
        };
        KernelTable {
            ops,
            xs,
            dt,
            slot,
            kernels,
            build,
        }
    }

    pub fn ops(&self) -> &HierarchyOperators {
        &self.ops
    }

    pub fn xi(&self, i: usize) -> Complex64 {
        self.xs[i]
    }

    pub fn steps(&self) -> usize {
        self.slot.len()
    }

    /// Kernel for step `i`. Uncached tables rebuild only when `ξ` changes
    /// from the previous call's step, tracked through `last`.
    pub fn get<'a>(&'a self, i: usize, last: &'a mut Option<(usize, K)>) -> &'a K {
        if let Some(ks) = &self.kernels {
            return &ks[self.slot[i]];
        }
        if last.as_ref().is_none_or(|(s, _)| *s != self.slot[i]) {
            *last = Some((self.slot[i], (self.build)(&self.ops, self.xs[i], self.dt)));
        }
        &last.as_ref().expect("just filled").1
    }
}

pub(crate) fn jump_table(ops: HierarchyOperators, profile: &PhotonProfile, steps: usize, dt: f64, cache: bool) -> KernelTable<JumpKernel> {
    let n = flat_len(ops.dim());
    KernelTable::new(ops, profile, steps, dt, cache, jump_kernel, (n * n + n) * 8)
}

pub(crate) fn diffusive_table(
    ops: HierarchyOperators,
    profile: &PhotonProfile,
    steps: usize,
    dt: f64,
    cache: bool,
) -> KernelTable<DiffusiveKernel> {
    let n = flat_len(ops.dim());
    KernelTable::new(ops, profile, steps, dt, cache, diffusive_kernel, (2 * n * n + n) * 8)
}
