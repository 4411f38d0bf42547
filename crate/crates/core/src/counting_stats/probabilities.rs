use num_complex::Complex64;
use rayon::prelude::*;

use crate::counting_stats::mesh::{Mesh, Side};
use crate::counting_stats::pairs::{assemble, CountRecord, PointSegments, Segments, MAX_COUNTS};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::model::{make_generator, PhotonProfile, SystemModel};
use crate::simpson::{integrate_samples, Estimate};

/// Grid sizes for the count-number integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct QuadratureOptions {
    /// Intervals per dimension for zero and one count.
    pub intervals: usize,
    /// Intervals per dimension for two counts.
    pub intervals_2d: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            intervals: 2048,
            intervals_2d: 256,
        }
    }
}

impl QuadratureOptions {
    fn validate(&self) -> Result<()> {
        for n in [self.intervals, self.intervals_2d] {
            if n < 4 || n % 2 != 0 {
                return Err(Error::invalid(format!("quadrature intervals must be even and >= 4, got {n}")));
            }
        }
        Ok(())
    }
}

/// Exclusive density `‖α̅‖² tail(t) + ‖β̅‖²` of a record with at most two
/// counts, in units `(1/time)^m`. With no counts this is a probability.
///
/// Mixed initial states are averaged over their spectral ensemble.
pub fn exclusive_density(model: &SystemModel, profile: &PhotonProfile, record: &CountRecord, opts: &QuadratureOptions) -> Result<f64> {
    opts.validate()?;
    exclusive_density_with(model, profile, record, opts.intervals)
}

fn exclusive_density_with(model: &SystemModel, profile: &PhotonProfile, record: &CountRecord, intervals: usize) -> Result<f64> {
    let m = record.num_counts();
    if m > MAX_COUNTS {
        return Err(Error::NotImplemented(format!(
            "continuum formulas are available for up to {MAX_COUNTS} counts, got {m}"
        )));
    }
    let seg = PointSegments::new(model, profile, record, intervals)?;
    let tail = profile.tail(record.window_end());
    Ok(model
        .initial()
        .ensemble()
        .iter()
        .map(|(w, psi)| w * assemble(&seg, m, psi).weight(tail))
        .sum())
}

/// `P_0^t(0)`, the probability of no counts in `(0, t]`.
pub fn prob_no_counts(model: &SystemModel, profile: &PhotonProfile, t: f64, opts: &QuadratureOptions) -> Result<f64> {
    exclusive_density(model, profile, &CountRecord::no_counts(t)?, opts)
}

/// Segments between nodes of a shared mesh; count `j` sits at node
/// `edges[j]` and takes the limit of `ξ` from `sides[j − 1]`.
struct GridSegments<'a> {
    mesh: &'a Mesh,
    l: &'a CMat,
    ldag: &'a CMat,
    stride: usize,
    edges: Vec<usize>,
    sides: &'a [Side],
}

impl Segments for GridSegments<'_> {
    fn propagate(&self, k: usize, v: &CVec) -> CVec {
        self.mesh.apply(self.edges[k], self.edges[k + 1], v)
    }

    fn absorb(&self, k: usize, v: &CVec) -> CVec {
        self.mesh.absorb(self.edges[k], self.edges[k + 1], self.stride, self.ldag, v)
    }

    fn xi_at_count(&self, j: usize) -> Complex64 {
        self.mesh.xi(self.edges[j], self.sides[j - 1])
    }

    fn coupling(&self) -> &CMat {
        self.l
    }
}

struct Grid {
    mesh: Mesh,
    l: CMat,
    ldag: CMat,
    tail: f64,
    ensemble: Vec<(f64, CVec)>,
}

impl Grid {
    fn new(model: &SystemModel, profile: &PhotonProfile, t: f64, n: usize) -> Result<Self> {
        Ok(Grid {
            mesh: Mesh::new(&make_generator(model), profile, 0.0, t, n)?,
            l: model.coupling().clone(),
            ldag: model.coupling().adjoint(),
            tail: profile.tail(t),
            ensemble: model.initial().ensemble(),
        })
    }

    /// Density with counts at mesh nodes `idx`.
    fn density(&self, stride: usize, idx: &[usize], sides: &[Side]) -> f64 {
        let mut edges = vec![0];
        edges.extend_from_slice(idx);
        edges.push(self.mesh.last());
        let seg = GridSegments {
            mesh: &self.mesh,
            l: &self.l,
            ldag: &self.ldag,
            stride,
            edges,
            sides,
        };
        self.ensemble
            .iter()
            .map(|(w, psi)| w * assemble(&seg, idx.len(), psi).weight(self.tail))
            .sum()
    }

    /// `∫_{x_a}^{x_b} f` run by run, with `f(node, side)` evaluated in parallel.
    fn integrate<F>(&self, a: usize, b: usize, stride: usize, f: F) -> f64
    where
        F: Fn(usize, Side) -> f64 + Sync,
    {
        self.mesh
            .runs(a, b, stride)
            .iter()
            .map(|run| {
                let values: Vec<f64> = (0..=(run.w - run.u) / stride)
                    .into_par_iter()
                    .map(|j| {
                        let g = run.u + j * stride;
                        f(g, run.side(g))
                    })
                    .collect();
                integrate_samples(&values, run.h)
            })
            .sum()
    }

    /// `∫_0^t p(t1) dt1` on the mesh coarsened by `stride`.
    fn one_count(&self, stride: usize) -> f64 {
        self.integrate(0, self.mesh.last(), stride, |g, side| self.density(stride, &[g], &[side]))
    }

    /// `∫∫_{t1<t2} p(t1, t2)` on the mesh coarsened by `stride`.
    fn two_counts(&self, stride: usize) -> f64 {
        let end = self.mesh.last();
        self.integrate(0, end, stride, |i, s1| {
            self.integrate(i, end, stride, |k, s2| self.density(stride, &[i, k], &[s1, s2]))
        })
    }
}

/// `P_0^t(m)`, the probability of exactly `m ≤ 2` counts in `(0, t]`,
/// with a Richardson estimate of the quadrature error.
pub fn prob_m_counts(model: &SystemModel, profile: &PhotonProfile, t: f64, m: usize, opts: &QuadratureOptions) -> Result<Estimate> {
    opts.validate()?;
    if m > MAX_COUNTS {
        return Err(Error::NotImplemented(format!(
            "count probabilities are available for up to {MAX_COUNTS} counts, got {m}"
        )));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("window end must be finite and >= 0, got {t}")));
    }
    if m == 0 {
        let record = CountRecord::no_counts(t)?;
        let fine = exclusive_density_with(model, profile, &record, opts.intervals)?;
        let coarse = exclusive_density_with(model, profile, &record, opts.intervals / 2)?;
        return Ok(Estimate::richardson(fine, coarse));
    }
    if t == 0.0 {
        return Ok(Estimate {
            value: 0.0,
            error_estimate: 0.0,
        });
    }
    if m == 1 {
        let grid = Grid::new(model, profile, t, opts.intervals)?;
        Ok(Estimate::richardson(grid.one_count(1), grid.one_count(2)))
    } else {
        let grid = Grid::new(model, profile, t, opts.intervals_2d)?;
        Ok(Estimate::richardson(grid.two_counts(1), grid.two_counts(2)))
    }
}

/// One-count exclusive density `p_0^t(t1)` on the nodes of `[0, t]` split
/// into about `n` intervals (uniform unless `ξ` jumps inside the window).
pub fn one_count_density_scan(model: &SystemModel, profile: &PhotonProfile, t: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    if n < 1 || !(t > 0.0) {
        return Err(Error::invalid("density scan needs t > 0 and at least one interval"));
    }
    let grid = Grid::new(model, profile, t, n)?;
    let last = grid.mesh.last();
    Ok((0..=last)
        .into_par_iter()
        .map(|g| {
            let side = if g == last { Side::Left } else { Side::Right };
            (grid.mesh.x(g), grid.density(1, &[g], &[side]))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, cr};
    use crate::model::{basis_vector, InitialState};

    fn tla() -> SystemModel {
        SystemModel::two_level_atom(1.0).unwrap()
    }

    fn opts() -> QuadratureOptions {
        QuadratureOptions::default()
    }

    #[test]
    fn no_count_closed_form() {
        let p = PhotonProfile::matched_exponential(1.0).unwrap();
        assert_eq!(prob_no_counts(&tla(), &p, 0.0, &opts()).unwrap(), 1.0);
        let v = prob_no_counts(&tla(), &p, 2.0, &opts()).unwrap();
        assert!((v - 5.0 * (-2.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn zero_counts_is_prob_no_counts() {
        let p = PhotonProfile::gaussian(1.0, 0.5).unwrap();
        let a = prob_m_counts(&tla(), &p, 1.7, 0, &opts()).unwrap();
        assert_eq!(a.value, prob_no_counts(&tla(), &p, 1.7, &opts()).unwrap());
    }

    #[test]
    fn vacuum_decay_counts() {
        let m = tla().with_pure_initial(basis_vector(2, 1)).unwrap();
        for t in [0.5, 2.0] {
            let p1 = prob_m_counts(&m, &PhotonProfile::vacuum(), t, 1, &opts()).unwrap();
            assert!((p1.value - (1.0 - (-t).exp())).abs() < 1e-10);
        }
    }

    #[test]
    fn two_level_normalization() {
        let p = PhotonProfile::matched_exponential(1.0).unwrap();
        for t in [0.5, 1.0, 2.0, 5.0] {
            let e: Vec<Estimate> = (0..=2).map(|m| prob_m_counts(&tla(), &p, t, m, &opts()).unwrap()).collect();
            let sum: f64 = e.iter().map(|x| x.value).sum();
            let err: f64 = e.iter().map(|x| x.error_estimate).sum();
            assert!((sum - 1.0).abs() <= 2.0 * err + 1e-12, "t = {t}: {sum} ± {err}");
            assert!(e[2].value.abs() < 1e-12);
        }
    }

    #[test]
    fn window_packet_normalization() {
        // ξ jumps at both edges inside the counting window
        let p = PhotonProfile::constant_window(0.4, 1.7).unwrap();
        let q = QuadratureOptions {
            intervals: 512,
            intervals_2d: 64,
        };
        for t in [1.0, 3.0] {
            let e: Vec<Estimate> = (0..=2).map(|m| prob_m_counts(&tla(), &p, t, m, &q).unwrap()).collect();
            let sum: f64 = e.iter().map(|x| x.value).sum();
            assert!((sum - 1.0).abs() < 1e-9, "t = {t}: {sum}");
            assert!(e[1].error_estimate < 1e-9);
        }
    }

    #[test]
    fn mixed_start_is_ensemble_average() {
        let p = PhotonProfile::matched_exponential(1.0).unwrap();
        let mut rho = linalg::zeros(2);
        rho[(0, 0)] = cr(0.3);
        rho[(1, 1)] = cr(0.7);
        let mixed = tla().with_initial(InitialState::Mixed(rho)).unwrap();
        let excited = tla().with_pure_initial(basis_vector(2, 1)).unwrap();
        let q = opts();
        let want = 0.3 * prob_no_counts(&tla(), &p, 1.5, &q).unwrap() + 0.7 * prob_no_counts(&excited, &p, 1.5, &q).unwrap();
        assert!((prob_no_counts(&mixed, &p, 1.5, &q).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn scan_agrees_with_point_density() {
        let p = PhotonProfile::matched_exponential(1.0).unwrap();
        let scan = one_count_density_scan(&tla(), &p, 3.0, 300).unwrap();
        let (t1, v) = scan[100];
        let rec = CountRecord::new(vec![t1], 3.0).unwrap();
        let point = exclusive_density(&tla(), &p, &rec, &opts()).unwrap();
        assert!((v - point).abs() < 1e-7, "{v} vs {point}");
        assert!(scan.iter().all(|x| x.1 >= -1e-12));
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = PhotonProfile::vacuum();
        assert!(matches!(prob_m_counts(&tla(), &p, 1.0, 3, &opts()), Err(Error::NotImplemented(_))));
        let odd = QuadratureOptions {
            intervals: 7,
            ..opts()
        };
        assert!(prob_m_counts(&tla(), &p, 1.0, 1, &odd).is_err());
    }
}
