//! Discrete-to-continuum convergence of the no-count conditional state.

use serde::Serialize;

use crate::continuous::no_jump_flow;
use crate::discrete::{counting_step, mixed_counting_step, posterior_density, ConditionalPair, MixedPairState};
use crate::error::{Error, Result};
use crate::linalg::{cr, CMat};
use crate::model::{build_collision_exact, discretize_profile_with, DiscretizeOptions, InitialState, PhotonProfile, SystemModel};

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub taus: Vec<f64>,
    pub times: Vec<f64>,
    /// Largest Frobenius distance over `times`, per `τ`.
    pub errors: Vec<f64>,
    /// `log2(e_k / e_{k+1})` for consecutive halvings.
    pub successive_orders: Vec<f64>,
    /// Least-squares slope of `ln e` against `ln τ`.
    pub fitted_order: f64,
    /// `ln e − fit` per `τ`.
    pub fit_residuals: Vec<f64>,
    pub reference_dt: f64,
}

/// Normalized no-count states of the exact collision filter at `steps`.
fn discrete_no_count_states(
    model: &SystemModel,
    profile: &PhotonProfile,
    tau: f64,
    steps: &[usize],
    opts: &DiscretizeOptions,
) -> Result<Vec<CMat>> {
    let last = *steps.iter().max().unwrap_or(&0);
    let disc = discretize_profile_with(profile, tau, last as f64 * tau, opts)?;
    let blocks = build_collision_exact(model, tau)?;
    let w0 = disc.tail_weight(0);
    let normalize = |m: CMat| -> Result<CMat> {
        let tr = crate::linalg::trace(&m).re;
        if !(tr > 0.0) {
            return Err(Error::UndefinedState);
        }
        Ok(m * cr(1.0 / tr))
    };
    let mut out = Vec::with_capacity(steps.len());
    match model.initial() {
        InitialState::Pure(psi) => {
            let mut pair = ConditionalPair::initial(psi, w0);
            for j in 0..=last {
                if steps.contains(&j) {
                    out.push(normalize(posterior_density(&pair))?);
                }
                if j < last {
                    pair = counting_step(&pair, &blocks, disc.xi(j), 0).normalized()?;
                }
            }
        }
        InitialState::Mixed(rho) => {
            let mut s = MixedPairState::initial(rho, w0);
            for j in 0..=last {
                if steps.contains(&j) {
                    out.push(s.state()?);
                }
                if j < last {
                    s = mixed_counting_step(&s, &blocks, disc.xi(j), 0);
                    let tr = s.trace();
                    s = s.scaled(1.0 / tr);
                }
            }
        }
    }
    Ok(out)
}

/// Compares the exact collision filter along the all-zero counting record
/// with the continuum no-count filter at `τ0, τ0/2, …` (`levels` values).
///
/// Every entry of `times` must be a multiple of `τ0` (up to 1e-9 relative).
pub fn no_count_convergence(
    model: &SystemModel,
    profile: &PhotonProfile,
    tau0: f64,
    levels: usize,
    times: &[f64],
    reference_dt: f64,
    allow_unnormalized: bool,
) -> Result<ConvergenceReport> {
    if !(tau0 > 0.0) || levels < 2 || times.is_empty() {
        return Err(Error::invalid("convergence needs τ0 > 0, at least two levels and one time"));
    }
    let opts = DiscretizeOptions {
        allow_unnormalized,
        ..Default::default()
    };
    let mut reference = Vec::new();
    for &t in times {
        let ratio = t / tau0;
        if !(t > 0.0) || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::invalid(format!("time {t} is not a positive multiple of τ0 = {tau0}")));
        }
        reference.push(no_jump_flow(model, profile, t, reference_dt)?.rho);
    }
    let mut taus = Vec::new();
    let mut errors = Vec::new();
    for level in 0..levels {
        let scale = 1usize << level;
        let tau = tau0 / scale as f64;
        let steps: Vec<usize> = times.iter().map(|t| (t / tau0).round() as usize * scale).collect();
        let states = discrete_no_count_states(model, profile, tau, &steps, &opts)?;
        let err = states
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        taus.push(tau);
        errors.push(err);
    }
    let successive_orders = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let xs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let fit_residuals = xs.iter().zip(&ys).map(|(x, y)| y - (my + slope * (x - mx))).collect();
    Ok(ConvergenceReport {
        taus,
        times: times.to_vec(),
        errors,
        successive_orders,
        fitted_order: slope,
        fit_residuals,
        reference_dt,
    })
}
