//! Single-photon wave packets and their discretization onto the collision
//! grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
enum Shape {
    MatchedExponential { gamma: f64 },
    ConstantWindow { t0: f64, t1: f64 },
    Gaussian { t0: f64, sigma: f64, mass: f64 },
    Vacuum,
    Tabulated(Tabulated),
}

#[derive(Clone, Debug)]
struct Tabulated {
    dt: f64,
    values: Vec<Complex64>,
    // remaining |ξ|² mass from sample k onwards
    suffix: Vec<f64>,
}

impl Tabulated {
    fn segment_mass(a: Complex64, b: Complex64, h: f64) -> f64 {
        // exact ∫_0^h |a + (b - a) s/h|² ds
        h * (a.norm_sqr() + (a * b.conj()).re + b.norm_sqr()) / 3.0
    }

    fn amplitude(&self, t: f64) -> Complex64 {
        let n = self.values.len();
        if t < 0.0 || n == 0 {
            return Complex64::new(0.0, 0.0);
        }
        let x = t / self.dt;
        let k = x.floor() as usize;
        if k + 1 >= n {
            return if k + 1 == n && x == k as f64 {
                self.values[k]
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        let frac = x - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }

    fn tail(&self, t: f64) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        if t <= 0.0 {
            return self.suffix[0];
        }
        let x = t / self.dt;
        let k = x.floor() as usize;
        if k + 1 >= n {
            return 0.0;
        }
        let a = self.amplitude(t);
        let b = self.values[k + 1];
        let h = (k + 1) as f64 * self.dt - t;
        Self::segment_mass(a, b, h) + self.suffix[k + 1]
    }
}

/// Photon wave packet `ξ_t` (units 1/√time) together with its tail weight
/// `∫_t^∞ |ξ_s|² ds`.
#[derive(Clone, Debug)]
pub struct PhotonProfile {
    shape: Shape,
}

impl PhotonProfile {
    /// `ξ_t = √Γ e^{-Γt/2}`, the wave packet spontaneously emitted by a
    /// two-level source of linewidth `Γ`.
    pub fn matched_exponential(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("profile rate must be positive, got {gamma}")));
        }
        Ok(PhotonProfile {
            shape: Shape::MatchedExponential { gamma },
        })
    }

    /// Flat packet `1/√(t1 - t0)` on `[t0, t1)`.
    pub fn constant_window(t0: f64, t1: f64) -> Result<Self> {
        if !(t0 >= 0.0 && t1 > t0 && t1.is_finite()) {
            return Err(Error::invalid(format!("window needs 0 <= t0 < t1, got [{t0}, {t1})")));
        }
        Ok(PhotonProfile {
            shape: Shape::ConstantWindow { t0, t1 },
        })
    }

    /// Gaussian intensity centred at `t0` with standard deviation `sigma`,
    /// renormalized to unit mass on `t >= 0`.
    pub fn gaussian(t0: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && t0.is_finite()) {
            return Err(Error::invalid(format!("gaussian needs sigma > 0, got {sigma}")));
        }
        let mass = 0.5 * erfc(-t0 / (std::f64::consts::SQRT_2 * sigma));
        if mass < 1e-12 {
            return Err(Error::invalid("gaussian has no mass on t >= 0"));
        }
        Ok(PhotonProfile {
            shape: Shape::Gaussian { t0, sigma, mass },
        })
    }

    /// No photon within any finite window: `ξ ≡ 0` while the tail weight
    /// stays 1. With this profile every filter reduces to the usual vacuum
    /// filter.
    pub fn vacuum() -> Self {
        PhotonProfile { shape: Shape::Vacuum }
    }

    /// Samples `ξ(k·dt)`, linearly interpolated and zero after the last
    /// sample.
    pub fn tabulated(dt: f64, values: Vec<Complex64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("tabulated profile needs dt > 0, got {dt}")));
        }
        if values.len() < 2 {
            return Err(Error::invalid("tabulated profile needs at least two samples"));
        }
        let n = values.len();
        let mut suffix = vec![0.0; n];
        for k in (0..n - 1).rev() {
            suffix[k] = suffix[k + 1] + Tabulated::segment_mass(values[k], values[k + 1], dt);
        }
        Ok(PhotonProfile {
            shape: Shape::Tabulated(Tabulated { dt, values, suffix }),
        })
    }

    pub fn name(&self) -> &'static str {
        match self.shape {
            Shape::MatchedExponential { .. } => "matched_exponential",
            Shape::ConstantWindow { .. } => "constant_window",
            Shape::Gaussian { .. } => "gaussian",
            Shape::Vacuum => "vacuum",
            Shape::Tabulated(_) => "tabulated",
        }
    }

    /// Rate of the matched exponential, if this is one.
    pub fn matched_rate(&self) -> Option<f64> {
        match self.shape {
            Shape::MatchedExponential { gamma } => Some(gamma),
            _ => None,
        }
    }

    pub fn is_vacuum(&self) -> bool {
        matches!(self.shape, Shape::Vacuum)
    }

    pub fn amplitude(&self, t: f64) -> Complex64 {
        if t < 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        match &self.shape {
            Shape::MatchedExponential { gamma } => {
                Complex64::new(gamma.sqrt() * (-0.5 * gamma * t).exp(), 0.0)
            }
            Shape::ConstantWindow { t0, t1 } => {
                if t >= *t0 && t < *t1 {
                    Complex64::new(1.0 / (t1 - t0).sqrt(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            Shape::Gaussian { t0, sigma, mass } => {
                let z = (t - t0) / sigma;
                let peak = (2.0 * PI * sigma * sigma).powf(-0.25) / mass.sqrt();
                Complex64::new(peak * (-0.25 * z * z).exp(), 0.0)
            }
            Shape::Vacuum => Complex64::new(0.0, 0.0),
            Shape::Tabulated(tab) => tab.amplitude(t),
        }
    }

    pub fn intensity(&self, t: f64) -> f64 {
        self.amplitude(t).norm_sqr()
    }

    /// `∫_t^∞ |ξ_s|² ds`
    pub fn tail(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match &self.shape {
            Shape::MatchedExponential { gamma } => (-gamma * t).exp(),
            Shape::ConstantWindow { t0, t1 } => ((t1 - t.max(*t0)) / (t1 - t0)).clamp(0.0, 1.0),
            Shape::Gaussian { t0, sigma, mass } => {
                0.5 * erfc((t - t0) / (std::f64::consts::SQRT_2 * sigma)) / mass
            }
            Shape::Vacuum => 1.0,
            Shape::Tabulated(tab) => tab.tail(t),
        }
    }

    /// Times where `ξ` or its derivative jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.shape {
            Shape::ConstantWindow { t0, t1 } => vec![*t0, *t1],
            Shape::Tabulated(tab) => (0..tab.values.len()).map(|k| k as f64 * tab.dt).collect(),
            _ => Vec::new(),
        }
    }

    /// Times where `ξ` itself jumps.
    pub fn discontinuities(&self) -> Vec<f64> {
        match &self.shape {
            Shape::ConstantWindow { t0, t1 } => vec![*t0, *t1],
            Shape::Tabulated(tab) => {
                let last = tab.values.len() - 1;
                if tab.values[last] == Complex64::new(0.0, 0.0) {
                    Vec::new()
                } else {
                    vec![last as f64 * tab.dt]
                }
            }
            _ => Vec::new(),
        }
    }

    /// Whether `tail` is evaluated in closed form.
    pub fn has_analytic_tail(&self) -> bool {
        !matches!(self.shape, Shape::Tabulated(_))
    }

    /// Earliest time after which the remaining mass is below `threshold`.
    /// Infinite for the vacuum profile.
    pub fn support_hint(&self, threshold: f64) -> f64 {
        match &self.shape {
            Shape::MatchedExponential { gamma } => (1.0 / threshold).ln().max(0.0) / gamma,
            Shape::ConstantWindow { t1, .. } => *t1,
            Shape::Vacuum => f64::INFINITY,
            Shape::Gaussian { .. } | Shape::Tabulated(_) => {
                if self.tail(0.0) < threshold {
                    return 0.0;
                }
                let mut hi = 1.0;
                while self.tail(hi) >= threshold {
                    hi *= 2.0;
                    if hi > 1e12 {
                        return f64::INFINITY;
                    }
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.tail(mid) >= threshold {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    /// Fails unless `tail(0)` is within `tolerance` of 1.
    pub fn check_normalization(&self, tolerance: f64) -> Result<()> {
        let w = self.tail(0.0);
        if (w - 1.0).abs() > tolerance {
            return Err(Error::Normalization {
                weight: w,
                tolerance,
            });
        }
        Ok(())
    }
}

/// How collision-grid amplitudes are taken from the continuous packet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Sampling {
    /// `ξ_k = ξ(kτ)`
    LeftEndpoint,
    /// `τ|ξ_k|²` equals the exact packet mass on `[kτ, (k+1)τ)`; the phase
    /// is taken at the cell midpoint.
    #[default]
    CellAverage,
}

#[derive(Clone, Debug)]
pub struct DiscretizeOptions {
    pub sampling: Sampling,
    /// Allowed deviation of `w_0` from 1.
    pub tolerance: f64,
    pub allow_unnormalized: bool,
    /// Maximum numeric tail mass allowed beyond the horizon.
    pub truncation_threshold: f64,
}

impl Default for DiscretizeOptions {
    fn default() -> Self {
        DiscretizeOptions {
            sampling: Sampling::default(),
            tolerance: 1e-4,
            allow_unnormalized: false,
            truncation_threshold: 1e-6,
        }
    }
}

/// Collision-grid amplitudes `ξ_k` for `k = 0..K` and tail weights
/// `w_j = Σ_{k≥j} τ|ξ_k|² + tail(Kτ)` for `j = 0..=K`.
#[derive(Clone, Debug)]
pub struct DiscretizedProfile {
    tau: f64,
    values: Vec<Complex64>,
    tail_weights: Vec<f64>,
}

pub fn discretize_profile(profile: &PhotonProfile, tau: f64, horizon: f64) -> Result<DiscretizedProfile> {
    discretize_profile_with(profile, tau, horizon, &DiscretizeOptions::default())
}

pub fn discretize_profile_with(
    profile: &PhotonProfile,
    tau: f64,
    horizon: f64,
    opts: &DiscretizeOptions,
) -> Result<DiscretizedProfile> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {tau}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
    }
    if horizon < tau * (1.0 - 1e-12) {
        return Err(Error::invalid(format!("horizon {horizon} shorter than step {tau}")));
    }
    let steps = ((horizon / tau) - 1e-9).ceil().max(1.0) as usize;
    let end = steps as f64 * tau;
    if !profile.has_analytic_tail() && profile.tail(end) >= opts.truncation_threshold {
        return Err(Error::invalid(format!(
            "horizon {end} leaves tail mass {:e} (threshold {:e})",
            profile.tail(end),
            opts.truncation_threshold
        )));
    }

    let values: Vec<Complex64> = (0..steps)
        .map(|k| {
            let t = k as f64 * tau;
            match opts.sampling {
                Sampling::LeftEndpoint => profile.amplitude(t),
                Sampling::CellAverage => {
                    let mass = (profile.tail(t) - profile.tail(t + tau)).max(0.0);
                    let mid = profile.amplitude(t + 0.5 * tau);
                    let phase = if mid.norm() > 0.0 {
                        mid / mid.norm()
                    } else {
                        let left = profile.amplitude(t);
                        if left.norm() > 0.0 {
                            left / left.norm()
                        } else {
                            Complex64::new(1.0, 0.0)
                        }
                    };
                    phase * (mass / tau).sqrt()
                }
            }
        })
        .collect();

    let mut tail_weights = vec![0.0; steps + 1];
    tail_weights[steps] = profile.tail(end);
    for j in (0..steps).rev() {
        tail_weights[j] = tail_weights[j + 1] + tau * values[j].norm_sqr();
    }

    let w0 = tail_weights[0];
    if !opts.allow_unnormalized && (w0 - 1.0).abs() > opts.tolerance {
        return Err(Error::Normalization {
            weight: w0,
            tolerance: opts.tolerance,
        });
    }
    Ok(DiscretizedProfile {
        tau,
        values,
        tail_weights,
    })
}

impl DiscretizedProfile {
    /// Builds a profile directly from grid amplitudes; the tail beyond the
    /// last sample is `remainder`.
    pub fn from_values(tau: f64, values: Vec<Complex64>, remainder: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::invalid(format!("time step must be positive, got {tau}")));
        }
        let steps = values.len();
        let mut tail_weights = vec![0.0; steps + 1];
        tail_weights[steps] = remainder;
        for j in (0..steps).rev() {
            tail_weights[j] = tail_weights[j + 1] + tau * values[j].norm_sqr();
        }
        Ok(DiscretizedProfile {
            tau,
            values,
            tail_weights,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Number of grid amplitudes `K`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn tail_weights(&self) -> &[f64] {
        &self.tail_weights
    }

    /// `ξ_k`, zero past the horizon.
    pub fn xi(&self, k: usize) -> Complex64 {
        self.values.get(k).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// `w_j`; past the horizon this is the remainder `w_K`.
    pub fn tail_weight(&self, j: usize) -> f64 {
        self.tail_weights[j.min(self.values.len())]
    }
}
