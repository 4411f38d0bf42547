use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;

use crate::discrete::mixed::MixedPairState;
use crate::discrete::pair::{branch_operators, posterior_density, BranchOperators, ConditionalPair, Measurement};
use crate::error::{Error, Result};
use crate::linalg::{self, cr, CMat};
use crate::model::{CollisionBlocks, DiscretizedProfile, InitialState, SystemModel};
use crate::seeding::trajectory_rng;

/// Largest horizon accepted by [`enumerate_outcomes`].
pub const MAX_ENUMERATION_STEPS: usize = 20;

/// Common interface of the pure and mixed discrete filters.
pub(crate) trait FilterState: Clone {
    fn branch(&self, ops: &BranchOperators, xi: Complex64, tau: f64) -> Self;
    fn trace(&self) -> f64;
    fn scaled(&self, s: f64) -> Self;
    /// Unnormalized a posteriori state.
    fn density(&self) -> CMat;
    /// Unnormalized weight of the "photon still ahead" sector.
    fn future_weight(&self) -> f64;
}

impl FilterState for ConditionalPair {
    fn branch(&self, ops: &BranchOperators, xi: Complex64, tau: f64) -> Self {
        ConditionalPair::branch(self, ops, xi, tau)
    }
    fn trace(&self) -> f64 {
        ConditionalPair::trace(self)
    }
    fn scaled(&self, s: f64) -> Self {
        let r = cr(s.sqrt());
        ConditionalPair {
            alpha: &self.alpha * r,
            beta: &self.beta * r,
            step: self.step,
            tail: self.tail,
        }
    }
    fn density(&self) -> CMat {
        posterior_density(self)
    }
    fn future_weight(&self) -> f64 {
        self.alpha.norm_squared() * self.tail
    }
}

impl FilterState for MixedPairState {
    fn branch(&self, ops: &BranchOperators, xi: Complex64, tau: f64) -> Self {
        MixedPairState::branch(self, ops, xi, tau)
    }
    fn trace(&self) -> f64 {
        MixedPairState::trace(self)
    }
    fn scaled(&self, s: f64) -> Self {
        MixedPairState::scaled(self, s)
    }
    fn density(&self) -> CMat {
        self.rho.clone()
    }
    fn future_weight(&self) -> f64 {
        linalg::trace(&self.x).re * self.tail
    }
}

#[derive(Clone, Debug)]
pub struct SampleOptions {
    /// Number of collisions `J`.
    pub steps: usize,
    /// Stop early once this many counts were seen (counting only).
    pub stop_after_counts: Option<usize>,
    /// Keep the normalized state after every step.
    pub record_states: bool,
}

impl SampleOptions {
    pub fn new(steps: usize) -> Self {
        SampleOptions {
            steps,
            stop_after_counts: None,
            record_states: true,
        }
    }
}

/// One sampled measurement record with its filter history.
///
/// Vectors indexed by step have `len() = outcomes.len() + 1`; entry 0 is the
/// initial condition.
#[derive(Clone, Debug)]
pub struct DiscreteTrajectory {
    pub kind: Measurement,
    pub tau: f64,
    /// Outcome index per step (η for counting; 0 ↦ q = +1, 1 ↦ q = −1).
    pub outcomes: Vec<u8>,
    /// Accumulated `ln P(record up to step j)`.
    pub log_prob: Vec<f64>,
    /// Probability that the photon is still ahead, per step.
    pub p_future: Vec<f64>,
    /// Diagonal of the normalized a posteriori state, per step.
    pub populations: Vec<Vec<f64>>,
    /// Normalized a posteriori states (empty unless recorded).
    pub states: Vec<CMat>,
}

impl DiscreteTrajectory {
    pub fn steps(&self) -> usize {
        self.outcomes.len()
    }

    /// Probability of the whole record.
    pub fn probability(&self) -> f64 {
        self.log_prob.last().copied().unwrap_or(0.0).exp()
    }

    /// Number of counts (counting records only; homodyne returns the number
    /// of `−1` outcomes).
    pub fn count_total(&self) -> usize {
        self.outcomes.iter().filter(|&&o| o == 1).count()
    }

    /// Time of the first count, `(l_1) τ`.
    pub fn first_count_time(&self) -> Option<f64> {
        self.outcomes.iter().position(|&o| o == 1).map(|k| (k + 1) as f64 * self.tau)
    }

    pub fn outcome_string(&self) -> String {
        self.outcomes.iter().map(|&o| self.kind.symbol(o as usize)).collect()
    }
}

fn record<S: FilterState>(traj: &mut DiscreteTrajectory, state: &S, record_states: bool) -> Result<()> {
    let tr = state.trace();
    if !(tr > 0.0) {
        return Err(Error::UndefinedState);
    }
    let rho = state.density() * cr(1.0 / tr);
    traj.p_future.push(state.future_weight() / tr);
    traj.populations.push(rho.diagonal().iter().map(|z| z.re).collect());
    if record_states {
        traj.states.push(rho);
    }
    Ok(())
}

fn run_sampler<S: FilterState, R: Rng + ?Sized>(
    init: S,
    blocks: &CollisionBlocks,
    profile: &DiscretizedProfile,
    kind: Measurement,
    opts: &SampleOptions,
    rng: &mut R,
) -> Result<DiscreteTrajectory> {
    let ops = branch_operators(blocks, kind);
    let tau = blocks.tau;
    let mut traj = DiscreteTrajectory {
        kind,
        tau,
        outcomes: Vec::with_capacity(opts.steps),
        log_prob: Vec::with_capacity(opts.steps + 1),
        p_future: Vec::with_capacity(opts.steps + 1),
        populations: Vec::with_capacity(opts.steps + 1),
        states: Vec::new(),
    };
    let tr0 = init.trace();
    if !(tr0 > 0.0) {
        return Err(Error::UndefinedState);
    }
    traj.log_prob.push(tr0.ln());
    record(&mut traj, &init, opts.record_states)?;
    // the running state is kept at unit trace; probabilities are the traces
    // of the two branches
    let mut state = init.scaled(1.0 / tr0);
    let mut counts = 0;
    for j in 0..opts.steps {
        let xi = profile.xi(j);
        let next = [state.branch(&ops[0], xi, tau), state.branch(&ops[1], xi, tau)];
        let p = [next[0].trace().max(0.0), next[1].trace().max(0.0)];
        let total = p[0] + p[1];
        if !(total > 0.0) {
            return Err(Error::UndefinedState);
        }
        // first-order blocks do not conserve the trace; the draw uses the
        // renormalized pair while the record probability keeps the raw trace
        let o = if rng.random::<f64>() * total < p[0] { 0 } else { 1 };
        let [n0, n1] = next;
        let chosen = if o == 0 { n0 } else { n1 };
        traj.outcomes.push(o as u8);
        traj.log_prob.push(traj.log_prob[j] + p[o].ln());
        state = chosen.scaled(1.0 / p[o]);
        record(&mut traj, &state, opts.record_states)?;
        if kind == Measurement::Counting && o == 1 {
            counts += 1;
            if opts.stop_after_counts.is_some_and(|n| counts >= n) {
                break;
            }
        }
    }
    Ok(traj)
}

/// Samples one measurement record from the exact conditional outcome
/// distributions of the collision model.
///
/// Pure initial states run the vector filter, mixed ones the matrix filter.
pub fn sample_trajectory<R: Rng + ?Sized>(
    model: &SystemModel,
    blocks: &CollisionBlocks,
    profile: &DiscretizedProfile,
    kind: Measurement,
    opts: &SampleOptions,
    rng: &mut R,
) -> Result<DiscreteTrajectory> {
    check_sampling_inputs(model, blocks, profile, opts.steps)?;
    let w0 = profile.tail_weight(0);
    match model.initial() {
        InitialState::Pure(psi) => run_sampler(ConditionalPair::initial(psi, w0), blocks, profile, kind, opts, rng),
        InitialState::Mixed(rho) => run_sampler(MixedPairState::initial(rho, w0), blocks, profile, kind, opts, rng),
    }
}

/// [`sample_trajectory`] with the stream of trajectory `index` under `seed`.
pub fn sample_trajectory_seeded(
    model: &SystemModel,
    blocks: &CollisionBlocks,
    profile: &DiscretizedProfile,
    kind: Measurement,
    opts: &SampleOptions,
    seed: u64,
    index: u64,
) -> Result<DiscreteTrajectory> {
    let mut rng = trajectory_rng(seed, index);
    sample_trajectory(model, blocks, profile, kind, opts, &mut rng)
}

fn check_sampling_inputs(model: &SystemModel, blocks: &CollisionBlocks, profile: &DiscretizedProfile, steps: usize) -> Result<()> {
    if model.dim() != blocks.dim() {
        return Err(Error::invalid("collision blocks do not match the model dimension"));
    }
    if (blocks.tau - profile.tau()).abs() > 1e-12 * blocks.tau {
        return Err(Error::invalid(format!(
            "blocks built for τ = {} but profile has τ = {}",
            blocks.tau,
            profile.tau()
        )));
    }
    if steps > profile.len() {
        return Err(Error::invalid(format!(
            "{steps} steps requested but the profile covers only {}",
            profile.len()
        )));
    }
    Ok(())
}

/// Probability of every outcome string of length `steps`, keyed by the
/// time-ordered string (`"0110"`, `"+-+"`).
///
/// Zero-probability strings are kept with value 0.
pub fn enumerate_outcomes(
    model: &SystemModel,
    blocks: &CollisionBlocks,
    profile: &DiscretizedProfile,
    kind: Measurement,
    steps: usize,
) -> Result<BTreeMap<String, f64>> {
    if steps > MAX_ENUMERATION_STEPS {
        return Err(Error::invalid(format!(
            "enumeration over 2^{steps} records exceeds the limit of 2^{MAX_ENUMERATION_STEPS}"
        )));
    }
    check_sampling_inputs(model, blocks, profile, steps)?;
    let w0 = profile.tail_weight(0);
    let ops = branch_operators(blocks, kind);
    let mut out = BTreeMap::new();
    match model.initial() {
        InitialState::Pure(psi) => walk(
            ConditionalPair::initial(psi, w0),
            &ops,
            profile,
            blocks.tau,
            kind,
            steps,
            &mut String::new(),
            &mut out,
        ),
        InitialState::Mixed(rho) => walk(
            MixedPairState::initial(rho, w0),
            &ops,
            profile,
            blocks.tau,
            kind,
            steps,
            &mut String::new(),
            &mut out,
        ),
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn walk<S: FilterState>(
    state: S,
    ops: &[BranchOperators; 2],
    profile: &DiscretizedProfile,
    tau: f64,
    kind: Measurement,
    remaining: usize,
    prefix: &mut String,
    out: &mut BTreeMap<String, f64>,
) {
    if remaining == 0 {
        out.insert(prefix.clone(), state.trace());
        return;
    }
    let xi = profile.xi(prefix.chars().count());
    for (o, op) in ops.iter().enumerate() {
        prefix.push(kind.symbol(o));
        walk(state.branch(op, xi, tau), ops, profile, tau, kind, remaining - 1, prefix, out);
        prefix.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        basis_vector, build_collision_exact, build_collision_first_order, discretize_profile, PhotonProfile,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tla_setup(tau: f64, horizon: f64) -> (SystemModel, CollisionBlocks, DiscretizedProfile) {
        let m = SystemModel::two_level_atom(1.0).unwrap();
        let b = build_collision_exact(&m, tau).unwrap();
        let p = discretize_profile(&PhotonProfile::matched_exponential(1.0).unwrap(), tau, horizon).unwrap();
        (m, b, p)
    }

    #[test]
    fn record_probability_matches_pair_trace() {
        let (m, b, p) = tla_setup(0.05, 10.0);
        for kind in [Measurement::Counting, Measurement::Homodyne] {
            let t = sample_trajectory_seeded(&m, &b, &p, kind, &SampleOptions::new(120), 5, 0).unwrap();
            let mut pair = ConditionalPair::initial(&basis_vector(2, 0), p.tail_weight(0));
            let ops = branch_operators(&b, kind);
            for (k, &o) in t.outcomes.iter().enumerate() {
                pair = pair.branch(&ops[o as usize], p.xi(k), b.tau);
            }
            assert!((t.probability() - pair.trace()).abs() < 1e-8 * pair.trace().max(1e-300) + 1e-300);
            let rel = (t.log_prob.last().unwrap() - pair.trace().ln()).abs();
            assert!(rel < 1e-8, "log-probability mismatch {rel}");
        }
    }

    #[test]
    fn single_photon_gives_at_most_one_count() {
        let (m, b, p) = tla_setup(0.05, 12.0);
        for i in 0..200 {
            let t = sample_trajectory_seeded(&m, &b, &p, Measurement::Counting, &SampleOptions::new(p.len()), 17, i).unwrap();
            assert!(t.count_total() <= 1);
        }
    }

    #[test]
    fn enumeration_is_normalized_and_caps_counts() {
        let (m, b, p) = tla_setup(0.2, 4.0);
        let probs = enumerate_outcomes(&m, &b, &p, Measurement::Counting, 10).unwrap();
        assert_eq!(probs.len(), 1 << 10);
        let total: f64 = probs.values().sum();
        assert!((total - 1.0).abs() < 1e-9);
        let two_plus: f64 = probs.iter().filter(|(s, _)| s.matches('1').count() >= 2).map(|(_, v)| v).sum();
        assert!(two_plus < 1e-9);
        let homo = enumerate_outcomes(&m, &b, &p, Measurement::Homodyne, 8).unwrap();
        assert!((homo.values().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(homo.contains_key("+-+-+-+-"));
    }

    #[test]
    fn mixed_initial_state_enumeration() {
        let mut rho = linalg::zeros(2);
        rho[(0, 0)] = cr(0.5);
        rho[(1, 1)] = cr(0.5);
        let m = SystemModel::two_level_atom(1.0).unwrap().with_initial(InitialState::Mixed(rho)).unwrap();
        let b = build_collision_exact(&m, 0.2).unwrap();
        let p = discretize_profile(&PhotonProfile::matched_exponential(1.0).unwrap(), 0.2, 4.0).unwrap();
        let probs = enumerate_outcomes(&m, &b, &p, Measurement::Counting, 8).unwrap();
        assert!((probs.values().sum::<f64>() - 1.0).abs() < 1e-9);
        // half the ensemble starts excited: two counts are now possible
        let two: f64 = probs.iter().filter(|(s, _)| s.matches('1').count() == 2).map(|(_, v)| v).sum();
        assert!(two > 1e-3);
    }

    #[test]
    fn fixed_seed_replays_bit_identically() {
        let (m, b, p) = tla_setup(0.05, 10.0);
        let opts = SampleOptions::new(150);
        let a = sample_trajectory_seeded(&m, &b, &p, Measurement::Homodyne, &opts, 99, 3).unwrap();
        let c = sample_trajectory_seeded(&m, &b, &p, Measurement::Homodyne, &opts, 99, 3).unwrap();
        assert_eq!(a.outcomes, c.outcomes);
        assert_eq!(a.log_prob, c.log_prob);
    }

    #[test]
    fn photon_weight_never_returns_after_consumption() {
        let (m, b, p) = tla_setup(0.02, 15.0);
        for i in 0..50 {
            let t = sample_trajectory_seeded(&m, &b, &p, Measurement::Counting, &SampleOptions::new(p.len()), 4, i).unwrap();
            let mut consumed = false;
            for &f in &t.p_future {
                if consumed {
                    assert!(f < 1e-12);
                }
                consumed |= f < 1e-12;
            }
        }
    }

    #[test]
    fn intensities_stay_nonnegative_on_sampled_paths() {
        let m = SystemModel::two_level_atom(1.0).unwrap();
        let tau = 0.05;
        let b = build_collision_first_order(&m, tau).unwrap();
        let p = discretize_profile(&PhotonProfile::gaussian(3.0, 1.0).unwrap(), tau, 10.0).unwrap();
        let ops = branch_operators(&b, Measurement::Counting);
        for i in 0..20 {
            let t = sample_trajectory_seeded(&m, &b, &p, Measurement::Counting, &SampleOptions::new(p.len()), 8, i).unwrap();
            let mut pair = ConditionalPair::initial(&basis_vector(2, 0), p.tail_weight(0));
            for (k, &o) in t.outcomes.iter().enumerate() {
                let (kj, _) = crate::discrete::pair::first_order_intensities(&pair, &m, p.xi(k)).unwrap();
                assert!(kj >= -1e-10);
                pair = pair.branch(&ops[o as usize], p.xi(k), tau).normalized().unwrap();
            }
        }
    }

    #[test]
    fn vacuum_first_count_time_is_exponential() {
        let tau = 1e-3;
        let m = SystemModel::two_level_atom(1.0).unwrap().with_pure_initial(basis_vector(2, 1)).unwrap();
        let b = build_collision_exact(&m, tau).unwrap();
        let p = discretize_profile(&PhotonProfile::vacuum(), tau, 25.0).unwrap();
        let opts = SampleOptions {
            steps: p.len(),
            stop_after_counts: Some(1),
            record_states: false,
        };
        let n = 10_000;
        let times: Vec<f64> = (0..n)
            .map(|i| {
                sample_trajectory_seeded(&m, &b, &p, Measurement::Counting, &opts, 2024, i)
                    .unwrap()
                    .first_count_time()
                    .unwrap_or(25.0)
            })
            .collect();
        let mean = times.iter().sum::<f64>() / n as f64;
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        // exact per-step click probability sin²(√(Γτ)) gives a geometric law
        // whose mean differs from 1/Γ by O(τ)
        assert!((mean - 1.0).abs() < 3.0 * se + tau, "mean {mean} ± {se}");
    }

    #[test]
    fn rejects_too_many_steps() {
        let (m, b, p) = tla_setup(0.1, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_trajectory(&m, &b, &p, Measurement::Counting, &SampleOptions::new(11), &mut rng).is_err());
        assert!(enumerate_outcomes(&m, &b, &p, Measurement::Counting, 21).is_err());
    }
}
