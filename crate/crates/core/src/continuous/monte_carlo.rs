use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuous::diffusive::DiffusiveSimulator;
use crate::continuous::hierarchy::Hierarchy;
use crate::continuous::jump::{JumpSimulator, StepOptions};
use crate::error::{Error, Result};
use crate::model::{PhotonProfile, SystemModel};

/// Trajectories handled by one work item. Fixed so the reduction order does
/// not depend on the thread count.
pub const CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unraveling {
    Jump,
    Diffusive,
}

/// Running mean and sum of squared deviations, per component.
#[derive(Clone, Debug)]
struct Moments {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Moments {
            n: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.n += other.n;
    }

    fn stderr(&self) -> Vec<f64> {
        if self.n < 2 {
            return vec![0.0; self.mean.len()];
        }
        let n = self.n as f64;
        self.m2.iter().map(|s| (s / (n - 1.0) / n).sqrt()).collect()
    }
}

/// Batch mean of the conditional triple with per-component standard errors.
#[derive(Clone, Debug)]
pub struct McSummary {
    pub kind: Unraveling,
    pub trajectories: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub mean: Vec<Hierarchy>,
    /// Standard errors laid out as [`Hierarchy::flatten`].
    pub stderr: Vec<Vec<f64>>,
}

impl McSummary {
    /// Index of the recorded time closest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        self.times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .map(|(k, _)| k)
            .expect("summary is never empty")
    }

    /// Largest `|mean − reference| − (z·stderr + floor)` over all components
    /// at recorded index `k`; non-positive means every component is within
    /// the band.
    pub fn worst_excess(&self, k: usize, reference: &Hierarchy, z: f64, floor: f64) -> f64 {
        let m = self.mean[k].flatten();
        let r = reference.flatten();
        m.iter()
            .zip(&r)
            .zip(&self.stderr[k])
            .map(|((a, b), s)| (a - b).abs() - (z * s + floor))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Root-mean-square standard error at recorded index `k`.
    pub fn rms_stderr(&self, k: usize) -> f64 {
        let s = &self.stderr[k];
        (s.iter().map(|x| x * x).sum::<f64>() / s.len() as f64).sqrt()
    }
}

enum Simulator {
    Jump(JumpSimulator),
    Diffusive(DiffusiveSimulator),
}

impl Simulator {
    fn states(&self, seed: u64, index: u64) -> Result<(Vec<f64>, Vec<Hierarchy>)> {
        match self {
            Simulator::Jump(s) => s.run(seed, index).map(|p| (p.times, p.states)),
            Simulator::Diffusive(s) => s.run(seed, index).map(|p| (p.times, p.states)),
        }
    }
}

/// Averages `n` trajectories `0..n` of the given unraveling.
///
/// Trajectory `i` always uses random stream `i` under `seed`, and chunk
/// results are merged in index order, so the output is independent of the
/// number of worker threads.
pub fn monte_carlo_average(
    kind: Unraveling,
    model: &SystemModel,
    profile: &PhotonProfile,
    opts: &StepOptions,
    n: usize,
    seed: u64,
) -> Result<McSummary> {
    if n == 0 {
        return Err(Error::invalid("at least one trajectory is required"));
    }
    let sim = match kind {
        Unraveling::Jump => {
            let mut o = opts.clone();
            o.stop_after_counts = None;
            Simulator::Jump(JumpSimulator::new(model, profile, &o)?)
        }
        Unraveling::Diffusive => Simulator::Diffusive(DiffusiveSimulator::new(model, profile, opts)?),
    };
    let chunks: Vec<(usize, usize)> = (0..n).step_by(CHUNK).map(|s| (s, (s + CHUNK).min(n))).collect();
    let partial: Vec<(Vec<f64>, Vec<Moments>)> = chunks
        .par_iter()
        .map(|&(start, end)| {
            let mut times = Vec::new();
            let mut acc: Vec<Moments> = Vec::new();
            for i in start..end {
                let (t, states) = sim.states(seed, i as u64)?;
                if acc.is_empty() {
                    acc = states.iter().map(|h| Moments::new(h.flatten().len())).collect();
                    times = t;
                }
                for (m, h) in acc.iter_mut().zip(&states) {
                    m.push(&h.flatten());
                }
            }
            Ok((times, acc))
        })
        .collect::<Result<_>>()?;

    let mut iter = partial.into_iter();
    let (times, mut total) = iter.next().expect("at least one chunk");
    for (_, acc) in iter {
        for (a, b) in total.iter_mut().zip(&acc) {
            a.merge(b);
        }
    }
    let d = model.dim();
    Ok(McSummary {
        kind,
        trajectories: n,
        seed,
        times,
        mean: total.iter().map(|m| Hierarchy::unflatten(d, &m.mean)).collect(),
        stderr: total.iter().map(Moments::stderr).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuous::{simulate_diffusive_trajectory, simulate_jump_trajectory};

    #[test]
    fn moments_merge_matches_single_pass() {
        let data: Vec<f64> = (0..37).map(|i| ((i * 7919) % 101) as f64 / 13.0).collect();
        let mut whole = Moments::new(1);
        data.iter().for_each(|x| whole.push(&[*x]));
        let mut a = Moments::new(1);
        let mut b = Moments::new(1);
        data[..20].iter().for_each(|x| a.push(&[*x]));
        data[20..].iter().for_each(|x| b.push(&[*x]));
        a.merge(&b);
        assert!((a.mean[0] - whole.mean[0]).abs() < 1e-12);
        assert!((a.m2[0] - whole.m2[0]).abs() < 1e-9);
        let mean = data.iter().sum::<f64>() / 37.0;
        assert!((whole.mean[0] - mean).abs() < 1e-12);
    }

    #[test]
    fn single_trajectory_is_returned_as_is() {
        let m = SystemModel::two_level_atom(1.0).unwrap();
        let p = PhotonProfile::matched_exponential(1.0).unwrap();
        let opts = StepOptions::new(1.0, 1e-2).with_stride(10);
        let s = monte_carlo_average(Unraveling::Diffusive, &m, &p, &opts, 1, 5).unwrap();
        let path = simulate_diffusive_trajectory(&m, &p, &opts, 5, 0).unwrap();
        assert_eq!(s.mean, path.states);
        assert!(s.stderr.iter().flatten().all(|&x| x == 0.0));
        let s = monte_carlo_average(Unraveling::Jump, &m, &p, &opts, 1, 5).unwrap();
        assert_eq!(s.mean, simulate_jump_trajectory(&m, &p, &opts, 5, 0).unwrap().states);
    }

    #[test]
    fn result_does_not_depend_on_thread_count() {
        let m = SystemModel::two_level_atom(1.0).unwrap();
        let p = PhotonProfile::matched_exponential(1.0).unwrap();
        let opts = StepOptions::new(1.0, 1e-2).with_stride(50);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| monte_carlo_average(Unraveling::Jump, &m, &p, &opts, 300, 9).unwrap())
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.stderr, b.stderr);
    }

    #[test]
    fn zero_trajectories_rejected() {
        let m = SystemModel::two_level_atom(1.0).unwrap();
        let opts = StepOptions::new(1.0, 1e-2);
        assert!(monte_carlo_average(Unraveling::Jump, &m, &PhotonProfile::vacuum(), &opts, 0, 0).is_err());
    }
}
