//! Closed-form results for a two-level atom, `H_S = 0`, `L = √Γσ⁻`,
//! starting in the ground state `|0⟩` and driven by one photon.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{cr, CMat};
use crate::model::{PhotonProfile, SystemModel};

const QUAD_TOL: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct TwoLevelAtomSpec {
    gamma: f64,
    profile: PhotonProfile,
}

impl TwoLevelAtomSpec {
    pub fn new(gamma: f64, profile: PhotonProfile) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!("decay rate must be positive, got {gamma}")));
        }
        Ok(TwoLevelAtomSpec { gamma, profile })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn profile(&self) -> &PhotonProfile {
        &self.profile
    }

    pub fn model(&self) -> SystemModel {
        SystemModel::two_level_atom(self.gamma).expect("validated decay rate")
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// `∫_0^t ξ_s e^{−Γ(t−s)/2} ds`
fn damped_overlap(spec: &TwoLevelAtomSpec, t: f64) -> Complex64 {
    let g = spec.gamma;
    if let Some(gp) = spec.profile.matched_rate() {
        // ξ_s = √Γp e^{−Γp s/2}
        let x = 0.5 * (g - gp) * t;
        let ratio = if x == 0.0 { 1.0 } else { x.exp_m1() / x };
        return cr(gp.sqrt() * t * ratio * (-0.5 * g * t).exp());
    }
    let mut cuts = vec![0.0];
    cuts.extend(spec.profile.breakpoints().into_iter().filter(|&b| b > 0.0 && b < t));
    cuts.push(t);
    let mut acc = Complex64::new(0.0, 0.0);
    for w in cuts.windows(2) {
        let f = |s: f64| spec.profile.amplitude(s) * (-0.5 * g * (t - s)).exp();
        let re = quadrature::double_exponential::integrate(|s| f(s).re, w[0], w[1], QUAD_TOL).integral;
        let im = quadrature::double_exponential::integrate(|s| f(s).im, w[0], w[1], QUAD_TOL).integral;
        acc += Complex64::new(re, im);
    }
    acc
}

/// A priori excitation probability `p(t) = Γ e^{−Γt} |∫_0^t ξ_s e^{Γs/2} ds|²`.
pub fn tla_excitation_probability(spec: &TwoLevelAtomSpec, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(spec.gamma * damped_overlap(spec, t).norm_sqr())
}

/// `P_0^t(0) = ∫_t^∞ |ξ_s|² ds + p(t)`.
pub fn tla_no_count_probability(spec: &TwoLevelAtomSpec, t: f64) -> Result<f64> {
    Ok(spec.profile.tail(t) + tla_excitation_probability(spec, t)?)
}

/// `(1 − p(t))|0⟩⟨0| + p(t)|1⟩⟨1|`
pub fn tla_apriori_state(spec: &TwoLevelAtomSpec, t: f64) -> Result<CMat> {
    let p = tla_excitation_probability(spec, t)?;
    let mut rho = CMat::zeros(2, 2);
    rho[(0, 0)] = cr(1.0 - p);
    rho[(1, 1)] = cr(p);
    Ok(rho)
}

/// One row of oracle output.
#[derive(Clone, Debug, Serialize)]
pub struct TlaOracleRow {
    pub t: f64,
    pub excitation: f64,
    pub no_count: f64,
}

pub fn tla_table(spec: &TwoLevelAtomSpec, times: &[f64]) -> Result<Vec<TlaOracleRow>> {
    times
        .iter()
        .map(|&t| {
            Ok(TlaOracleRow {
                t,
                excitation: tla_excitation_probability(spec, t)?,
                no_count: tla_no_count_probability(spec, t)?,
            })
        })
        .collect()
}
