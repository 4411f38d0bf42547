use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::model::{make_generator, PhotonProfile, SystemModel};
use super::mesh::Mesh;

/// Largest number of counts with a printed continuum formula.
pub const MAX_COUNTS: usize = 2;

/// Count times `0 < t_1 < … < t_m < t` within the window `(0, t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CountRecord {
    times: Vec<f64>,
    window_end: f64,
}

impl CountRecord {
    pub fn new(times: Vec<f64>, window_end: f64) -> Result<Self> {
        if !(window_end >= 0.0) || !window_end.is_finite() {
            return Err(Error::invalid(format!("window end must be finite and >= 0, got {window_end}")));
        }
        let mut prev = 0.0;
        for &t in &times {
            if !(t > prev && t < window_end) {
                return Err(Error::invalid(format!(
                    "count times must satisfy 0 < t_1 < … < t_m < t = {window_end}, got {times:?}"
                )));
            }
            prev = t;
        }
        Ok(CountRecord { times, window_end })
    }

    pub fn no_counts(window_end: f64) -> Result<Self> {
        Self::new(Vec::new(), window_end)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn window_end(&self) -> f64 {
        self.window_end
    }

    pub fn num_counts(&self) -> usize {
        self.times.len()
    }
}

/// Conditional vectors of a count record with the `√dt` density factors
/// stripped: `α̅` for "photon still ahead", `β̅` for "photon consumed".
///
/// For `m` counts both carry units `(1/time)^{m/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityPair {
    pub alpha_bar: CVec,
    pub beta_bar: CVec,
}

impl DensityPair {
    /// `‖α̅‖² tail + ‖β̅‖²`
    pub fn weight(&self, tail: f64) -> f64 {
        self.alpha_bar.norm_squared() * tail + self.beta_bar.norm_squared()
    }
}

/// Segment operators between consecutive record times.
///
/// Segment `k` runs from `t_k` to `t_{k+1}` with `t_0 = 0`, `t_{m+1} = t`.
pub(crate) trait Segments {
    /// `T_{t_{k+1} − t_k} v`
    fn propagate(&self, k: usize, v: &CVec) -> CVec;
    /// `∫_{t_k}^{t_{k+1}} T_{t_{k+1}−s} ξ_s L† T_{s−t_k} ds v`
    fn absorb(&self, k: usize, v: &CVec) -> CVec;
    /// `ξ` at count `j` (1-based).
    fn xi_at_count(&self, j: usize) -> Complex64;
    fn coupling(&self) -> &CMat;
}

#[derive(Clone, Copy, PartialEq)]
enum Substitution {
    None,
    /// The photon is absorbed by the system during segment `k`.
    Absorb(usize),
    /// Count `j` is the photon itself.
    Direct(usize),
}

fn chain(seg: &dyn Segments, m: usize, psi: &CVec, sub: Substitution) -> CVec {
    let mut v = psi.clone();
    for k in 0..=m {
        v = if sub == Substitution::Absorb(k) {
            -seg.absorb(k, &v)
        } else {
            seg.propagate(k, &v)
        };
        if k < m {
            let j = k + 1;
            v = if sub == Substitution::Direct(j) {
                v * seg.xi_at_count(j)
            } else {
                seg.coupling() * v
            };
        }
    }
    v
}

/// `α̅` is the chain with `L` at every count; `β̅` sums the chains where
/// exactly one count is the photon itself or one segment absorbs it.
pub(crate) fn assemble(seg: &dyn Segments, m: usize, psi: &CVec) -> DensityPair {
    let alpha_bar = chain(seg, m, psi, Substitution::None);
    let mut beta_bar = chain(seg, m, psi, Substitution::Absorb(0));
    for k in 1..=m {
        beta_bar += chain(seg, m, psi, Substitution::Absorb(k));
        beta_bar += chain(seg, m, psi, Substitution::Direct(k));
    }
    DensityPair { alpha_bar, beta_bar }
}

/// Segments of an arbitrary record, each integrated on its own mesh.
pub(crate) struct PointSegments {
    l: CMat,
    ldag: CMat,
    xi_counts: Vec<Complex64>,
    meshes: Vec<Mesh>,
}

impl PointSegments {
    pub fn new(model: &SystemModel, profile: &PhotonProfile, record: &CountRecord, intervals: usize) -> Result<Self> {
        if intervals < 2 {
            return Err(Error::invalid("at least two quadrature intervals are required"));
        }
        let gen = make_generator(model);
        let mut edges = vec![0.0];
        edges.extend_from_slice(record.times());
        edges.push(record.window_end());
        let meshes = edges
            .windows(2)
            .map(|w| Mesh::new(&gen, profile, w[0], w[1], intervals))
            .collect::<Result<_>>()?;
        Ok(PointSegments {
            l: model.coupling().clone(),
            ldag: model.coupling().adjoint(),
            xi_counts: record.times().iter().map(|&t| profile.amplitude(t)).collect(),
            meshes,
        })
    }
}

impl Segments for PointSegments {
    fn propagate(&self, k: usize, v: &CVec) -> CVec {
        let mesh = &self.meshes[k];
        mesh.apply(0, mesh.last(), v)
    }

    fn absorb(&self, k: usize, v: &CVec) -> CVec {
        let mesh = &self.meshes[k];
        mesh.absorb(0, mesh.last(), 1, &self.ldag, v)
    }

    fn xi_at_count(&self, j: usize) -> Complex64 {
        self.xi_counts[j - 1]
    }

    fn coupling(&self) -> &CMat {
        &self.l
    }
}

fn pure_initial(model: &SystemModel) -> Result<&CVec> {
    model
        .initial()
        .as_pure()
        .ok_or_else(|| Error::invalid("conditional vectors need a pure initial state"))
}

/// Conditional vectors for an arbitrary record of at most two counts.
pub fn density_pair(model: &SystemModel, profile: &PhotonProfile, record: &CountRecord, intervals: usize) -> Result<DensityPair> {
    if record.num_counts() > MAX_COUNTS {
        return Err(Error::NotImplemented(format!(
            "continuum formulas are available for up to {MAX_COUNTS} counts, got {}",
            record.num_counts()
        )));
    }
    let psi = pure_initial(model)?;
    let seg = PointSegments::new(model, profile, record, intervals)?;
    Ok(assemble(&seg, record.num_counts(), psi))
}

/// `α̅ = T_t ψ`, `β̅ = −∫_0^t T_{t−s} ξ_s L† T_s ψ ds`.
pub fn no_count_pair(model: &SystemModel, profile: &PhotonProfile, t: f64, intervals: usize) -> Result<DensityPair> {
    density_pair(model, profile, &CountRecord::no_counts(t)?, intervals)
}

/// Conditional vectors for a single count at `t1` in `(0, t)`.
pub fn one_count_pair(model: &SystemModel, profile: &PhotonProfile, t: f64, t1: f64, intervals: usize) -> Result<DensityPair> {
    density_pair(model, profile, &CountRecord::new(vec![t1], t)?, intervals)
}

/// Conditional vectors for counts at `t1 < t2` in `(0, t)`.
pub fn two_count_pair(
    model: &SystemModel,
    profile: &PhotonProfile,
    t: f64,
    t1: f64,
    t2: f64,
    intervals: usize,
) -> Result<DensityPair> {
    density_pair(model, profile, &CountRecord::new(vec![t1, t2], t)?, intervals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, cr};
    use crate::model::basis_vector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const N: usize = 2048;

    fn tla() -> SystemModel {
        SystemModel::two_level_atom(1.0).unwrap()
    }

    #[test]
    fn record_validation() {
        assert!(CountRecord::new(vec![0.5, 0.4], 1.0).is_err());
        assert!(CountRecord::new(vec![0.0], 1.0).is_err());
        assert!(CountRecord::new(vec![1.0], 1.0).is_err());
        assert!(CountRecord::new(vec![0.2, 0.7], 1.0).is_ok());
        assert!(CountRecord::no_counts(-1.0).is_err());
    }

    #[test]
    fn zero_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = SystemModel::random(3, 1.0, 1.0, &mut rng);
        let p = no_count_pair(&m, &PhotonProfile::matched_exponential(1.0).unwrap(), 0.0, N).unwrap();
        assert_eq!(&p.alpha_bar, m.initial().as_pure().unwrap());
        assert_eq!(p.beta_bar.norm(), 0.0);
    }

    #[test]
    fn vacuum_has_no_consumed_branch() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = SystemModel::random(3, 1.0, 1.0, &mut rng);
        let p = no_count_pair(&m, &PhotonProfile::vacuum(), 1.3, N).unwrap();
        let want = make_generator(&m).propagator(1.3).unwrap() * m.initial().as_pure().unwrap();
        assert!((p.alpha_bar - want).norm() < 1e-12);
        assert_eq!(p.beta_bar.norm(), 0.0);
    }

    #[test]
    fn two_level_no_count_weight() {
        let prof = PhotonProfile::matched_exponential(1.0).unwrap();
        for t in [0.3, 1.0, 2.0, 5.0] {
            let p = no_count_pair(&tla(), &prof, t, N).unwrap();
            let want = (-t).exp() * (1.0 + t * t);
            assert!((p.weight(prof.tail(t)) - want).abs() < 1e-6, "t = {t}");
        }
    }

    #[test]
    fn ground_state_cannot_emit_first() {
        let prof = PhotonProfile::gaussian(1.0, 0.4).unwrap();
        let p = one_count_pair(&tla(), &prof, 3.0, 1.2, N).unwrap();
        assert_eq!(p.alpha_bar.norm(), 0.0);
    }

    #[test]
    fn excited_decay_density() {
        let m = tla().with_pure_initial(basis_vector(2, 1)).unwrap();
        let prof = PhotonProfile::vacuum();
        for t1 in [0.2, 0.9, 2.5] {
            let p = one_count_pair(&m, &prof, 3.0, t1, N).unwrap();
            assert!((p.alpha_bar.norm_squared() - (-t1).exp()).abs() < 1e-12);
            assert!((p.alpha_bar[0].norm() - p.alpha_bar.norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn uncoupled_system_sees_photon_directly() {
        let h = linalg::random_hermitian(2, 1.0, &mut ChaCha8Rng::seed_from_u64(4));
        let psi = linalg::random_unit_vector(2, &mut ChaCha8Rng::seed_from_u64(5));
        let m = SystemModel::new(h, linalg::zeros(2), crate::model::InitialState::Pure(psi.clone())).unwrap();
        let prof = PhotonProfile::gaussian(1.0, 0.5).unwrap();
        let p = one_count_pair(&m, &prof, 2.0, 0.8, N).unwrap();
        assert_eq!(p.alpha_bar.norm(), 0.0);
        let want = make_generator(&m).propagator(2.0).unwrap() * &psi * prof.amplitude(0.8);
        assert!((p.beta_bar - want).norm() < 1e-12);
        let p2 = two_count_pair(&m, &prof, 2.0, 0.5, 1.1, N).unwrap();
        assert_eq!(p2.weight(1.0), 0.0);
    }

    #[test]
    fn single_photon_gives_at_most_one_count() {
        for prof in [PhotonProfile::matched_exponential(1.0).unwrap(), PhotonProfile::gaussian(1.5, 0.6).unwrap()] {
            let p = two_count_pair(&tla(), &prof, 4.0, 0.7, 1.9, N).unwrap();
            assert!(p.weight(prof.tail(4.0)) < 1e-10);
        }
    }

    #[test]
    fn mixed_initial_state_rejected_and_m3_unsupported() {
        let m = tla()
            .with_initial(crate::model::InitialState::Mixed(linalg::identity(2) * cr(0.5)))
            .unwrap();
        assert!(no_count_pair(&m, &PhotonProfile::vacuum(), 1.0, N).is_err());
        let r = CountRecord::new(vec![0.1, 0.2, 0.3], 1.0).unwrap();
        assert!(matches!(
            density_pair(&tla(), &PhotonProfile::vacuum(), &r, N),
            Err(Error::NotImplemented(_))
        ));
    }
}
