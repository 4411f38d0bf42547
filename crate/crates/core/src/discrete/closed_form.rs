use num_complex::Complex64;

use crate::discrete::pair::ConditionalPair;
use crate::error::{Error, Result};
use crate::linalg::{cr, CMat, CVec};
use crate::model::{CollisionBlocks, DiscretizedProfile};

/// Steps `l_1 < … < l_m` (1-based) at which the counter clicked within the
/// first `horizon` collisions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountRecordDiscrete {
    counts: Vec<usize>,
    horizon: usize,
}

impl CountRecordDiscrete {
    pub fn new(counts: Vec<usize>, horizon: usize) -> Result<Self> {
        if counts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!("count steps {counts:?} are not strictly increasing")));
        }
        if let Some(&first) = counts.first() {
            if first < 1 {
                return Err(Error::invalid("count steps are 1-based"));
            }
        }
        if let Some(&last) = counts.last() {
            if last > horizon {
                return Err(Error::invalid(format!("count at step {last} beyond horizon {horizon}")));
            }
        }
        Ok(CountRecordDiscrete { counts, horizon })
    }

    /// Record from a time-ordered outcome string `η_1 … η_j`.
    pub fn from_outcomes(outcomes: &[u8]) -> Result<Self> {
        if let Some(bad) = outcomes.iter().find(|&&e| e > 1) {
            return Err(Error::invalid(format!("counting outcome {bad} is not 0 or 1")));
        }
        let counts = outcomes
            .iter()
            .enumerate()
            .filter(|(_, &e)| e == 1)
            .map(|(k, _)| k + 1)
            .collect();
        CountRecordDiscrete::new(counts, outcomes.len())
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_counts(&self) -> usize {
        self.counts.len()
    }
}

/// `V00^n` for `n = 0..=j`.
struct Powers(Vec<CMat>);

impl Powers {
    fn new(v00: &CMat, j: usize) -> Self {
        let mut p = Vec::with_capacity(j + 1);
        p.push(CMat::identity(v00.nrows(), v00.ncols()));
        for n in 1..=j {
            let next = &p[n - 1] * v00;
            p.push(next);
        }
        Powers(p)
    }

    fn apply(&self, n: usize, v: &CVec) -> CVec {
        &self.0[n] * v
    }
}

fn check_inputs(record: &CountRecordDiscrete, blocks: &CollisionBlocks, profile: &DiscretizedProfile, psi: &CVec) -> Result<()> {
    if (blocks.tau - profile.tau()).abs() > 1e-12 * blocks.tau {
        return Err(Error::invalid(format!(
            "blocks built for τ = {} but profile has τ = {}",
            blocks.tau,
            profile.tau()
        )));
    }
    if psi.len() != blocks.dim() {
        return Err(Error::invalid("initial vector dimension does not match the blocks"));
    }
    if record.horizon() > profile.len() && !profile.is_empty() && profile.tail_weight(profile.len()) > 0.0 {
        log::debug!("record extends past the profile horizon; ξ is zero there");
    }
    Ok(())
}

/// Conditional pair after `record.horizon()` collisions with clicks exactly at
/// `record.counts()`, evaluated from explicit product/sum formulas rather than
/// the step recurrence.
///
/// For up to two counts the expanded formulas are written out term by term;
/// more counts go through [`closed_form_pair_general`].
pub fn closed_form_pair(
    record: &CountRecordDiscrete,
    blocks: &CollisionBlocks,
    profile: &DiscretizedProfile,
    psi: &CVec,
) -> Result<ConditionalPair> {
    check_inputs(record, blocks, profile, psi)?;
    let j = record.horizon();
    let p = Powers::new(&blocks.v00, j);
    let sq = cr(blocks.tau.sqrt());
    let xi = |k: usize| profile.xi(k);
    let (alpha, beta) = match record.counts() {
        [] => no_count_terms(&p, blocks, &xi, psi, j),
        &[l] => one_count_terms(&p, blocks, &xi, psi, j, l),
        &[l1, l2] => two_count_terms(&p, blocks, &xi, psi, j, l1, l2),
        _ => return closed_form_pair_general(record, blocks, profile, psi),
    };
    Ok(ConditionalPair {
        alpha,
        beta: beta * sq,
        step: j,
        tail: profile.tail_weight(j),
    })
}

fn no_count_terms(p: &Powers, b: &CollisionBlocks, xi: &dyn Fn(usize) -> Complex64, psi: &CVec, j: usize) -> (CVec, CVec) {
    let alpha = p.apply(j, psi);
    let mut beta = CVec::zeros(psi.len());
    for k in 0..j {
        beta += p.apply(j - k - 1, &(&b.v01 * p.apply(k, psi))) * xi(k);
    }
    (alpha, beta)
}

fn one_count_terms(
    p: &Powers,
    b: &CollisionBlocks,
    xi: &dyn Fn(usize) -> Complex64,
    psi: &CVec,
    j: usize,
    l: usize,
) -> (CVec, CVec) {
    let before = p.apply(l - 1, psi);
    let clicked = &b.v10 * &before;
    let alpha = p.apply(j - l, &clicked);

    // photon measured directly at the count
    let mut beta = p.apply(j - l, &(&b.v11 * &before)) * xi(l - 1);
    // photon absorbed before the count, re-emitted at it
    let mut early = CVec::zeros(psi.len());
    for k in 0..l.saturating_sub(1) {
        early += p.apply(l - 2 - k, &(&b.v01 * p.apply(k, psi))) * xi(k);
    }
    beta += p.apply(j - l, &(&b.v10 * early));
    // photon absorbed after the count
    for k in l..j {
        beta += p.apply(j - k - 1, &(&b.v01 * p.apply(k - l, &clicked))) * xi(k);
    }
    (alpha, beta)
}

fn two_count_terms(
    p: &Powers,
    b: &CollisionBlocks,
    xi: &dyn Fn(usize) -> Complex64,
    psi: &CVec,
    j: usize,
    l1: usize,
    l2: usize,
) -> (CVec, CVec) {
    let before = p.apply(l1 - 1, psi);
    let first = &b.v10 * &before;
    let between = p.apply(l2 - l1 - 1, &first);
    let second = &b.v10 * &between;
    let alpha = p.apply(j - l2, &second);

    let d = psi.len();
    // photon detected at the first count
    let mut beta = p.apply(j - l2, &(&b.v10 * p.apply(l2 - l1 - 1, &(&b.v11 * &before)))) * xi(l1 - 1);
    // photon detected at the second count
    beta += p.apply(j - l2, &(&b.v11 * &between)) * xi(l2 - 1);
    // absorbed before the first count
    let mut early = CVec::zeros(d);
    for k in 0..l1.saturating_sub(1) {
        early += p.apply(l1 - 2 - k, &(&b.v01 * p.apply(k, psi))) * xi(k);
    }
    beta += p.apply(j - l2, &(&b.v10 * p.apply(l2 - l1 - 1, &(&b.v10 * early))));
    // absorbed between the counts
    let mut middle = CVec::zeros(d);
    for k in l1..l2.saturating_sub(1) {
        middle += p.apply(l2 - 2 - k, &(&b.v01 * p.apply(k - l1, &first))) * xi(k);
    }
    beta += p.apply(j - l2, &(&b.v10 * middle));
    // absorbed after the second count
    for k in l2..j {
        beta += p.apply(j - k - 1, &(&b.v01 * p.apply(k - l2, &second))) * xi(k);
    }
    (alpha, beta)
}

/// General-`m` closed form.
///
/// `α` is the time-ordered product with `V10` at each count and `V00`
/// elsewhere. `β` sums over the collision `s` at which the photon enters the
/// system: at a count the factor there becomes `V11`, otherwise `V01`, each
/// weighted by `ξ_{s−1}`. Between counts `l_p` and `l_{p+1}` the non-count
/// positions run over `l_p + 1 … l_{p+1} − 1` with `l_0 = 0`,
/// `l_{m+1} = j + 1`. No inverse of `V00` is formed.
pub fn closed_form_pair_general(
    record: &CountRecordDiscrete,
    blocks: &CollisionBlocks,
    profile: &DiscretizedProfile,
    psi: &CVec,
) -> Result<ConditionalPair> {
    check_inputs(record, blocks, profile, psi)?;
    let j = record.horizon();
    let p = Powers::new(&blocks.v00, j);
    let counts = record.counts();

    let positioned = |inject: Option<usize>| -> CVec {
        let mut cur = psi.clone();
        let mut last = 0;
        let mut events: Vec<(usize, &CMat)> = counts.iter().map(|&l| (l, &blocks.v10)).collect();
        if let Some(s) = inject {
            match events.iter_mut().find(|(l, _)| *l == s) {
                Some(e) => e.1 = &blocks.v11,
                None => {
                    events.push((s, &blocks.v01));
                    events.sort_by_key(|e| e.0);
                }
            }
        }
        for (pos, op) in events {
            cur = op * p.apply(pos - last - 1, &cur);
            last = pos;
        }
        p.apply(j - last, &cur)
    };

    let alpha = positioned(None);
    let mut beta = CVec::zeros(psi.len());
    let bounds: Vec<usize> = std::iter::once(0).chain(counts.iter().copied()).chain(std::iter::once(j + 1)).collect();
    for (pidx, w) in bounds.windows(2).enumerate() {
        if pidx > 0 {
            let l = w[0];
            beta += positioned(Some(l)) * profile.xi(l - 1);
        }
        for r in (w[0] + 1)..w[1] {
            beta += positioned(Some(r)) * profile.xi(r - 1);
        }
    }
    Ok(ConditionalPair {
        alpha,
        beta: beta * cr(blocks.tau.sqrt()),
        step: j,
        tail: profile.tail_weight(j),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::pair::counting_step;
    use crate::linalg::{self, c, ZERO};
    use crate::model::{basis_vector, build_collision_exact, SystemModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn iterate(outcomes: &[u8], blocks: &CollisionBlocks, prof: &DiscretizedProfile, psi: &CVec) -> ConditionalPair {
        let mut pair = ConditionalPair::initial(psi, prof.tail_weight(0));
        for (k, &e) in outcomes.iter().enumerate() {
            pair = counting_step(&pair, blocks, prof.xi(k), e);
        }
        pair
    }

    fn random_profile(tau: f64, n: usize, rng: &mut ChaCha8Rng) -> DiscretizedProfile {
        let vals: Vec<Complex64> = (0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let mass: f64 = vals.iter().map(|v| tau * v.norm_sqr()).sum();
        let s = (0.8 / mass).sqrt();
        DiscretizedProfile::from_values(tau, vals.into_iter().map(|v| v * s).collect(), 0.2).unwrap()
    }

    #[test]
    fn record_validation() {
        assert!(CountRecordDiscrete::new(vec![2, 2], 3).is_err());
        assert!(CountRecordDiscrete::new(vec![0], 3).is_err());
        assert!(CountRecordDiscrete::new(vec![4], 3).is_err());
        let r = CountRecordDiscrete::from_outcomes(&[0, 1, 0, 1]).unwrap();
        assert_eq!(r.counts(), &[2, 4]);
        assert_eq!(r.horizon(), 4);
        assert!(CountRecordDiscrete::from_outcomes(&[2]).is_err());
    }

    #[test]
    fn no_counts_without_photon() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = SystemModel::random(2, 1.0, 1.0, &mut rng);
        let b = build_collision_exact(&m, 0.1).unwrap();
        let prof = DiscretizedProfile::from_values(0.1, vec![ZERO; 3], 1.0).unwrap();
        let psi = linalg::random_unit_vector(2, &mut rng);
        let pair = closed_form_pair(&CountRecordDiscrete::new(vec![], 3).unwrap(), &b, &prof, &psi).unwrap();
        assert!((pair.alpha - &b.v00 * &b.v00 * &b.v00 * &psi).norm() < 1e-14);
        assert_eq!(pair.beta.norm(), 0.0);
    }

    #[test]
    fn single_count_at_first_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = SystemModel::random(2, 1.0, 1.0, &mut rng);
        let tau = 0.05;
        let b = build_collision_exact(&m, tau).unwrap();
        let prof = random_profile(tau, 4, &mut rng);
        let psi = linalg::random_unit_vector(2, &mut rng);
        let rec = CountRecordDiscrete::new(vec![1], 1).unwrap();
        for pair in [
            closed_form_pair(&rec, &b, &prof, &psi).unwrap(),
            closed_form_pair_general(&rec, &b, &prof, &psi).unwrap(),
        ] {
            assert!((&pair.alpha - &b.v10 * &psi).norm() < 1e-14);
            let want = &b.v11 * &psi * (prof.xi(0) * tau.sqrt());
            assert!((&pair.beta - want).norm() < 1e-14);
        }
    }

    #[test]
    fn printed_and_general_forms_match_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = SystemModel::random(2, 1.0, 1.0, &mut rng);
        let tau = 0.1;
        let b = build_collision_exact(&m, tau).unwrap();
        let prof = random_profile(tau, 7, &mut rng);
        let psi = linalg::random_unit_vector(2, &mut rng);
        for j in 0..=6usize {
            for bits in 0..(1u32 << j) {
                let outcomes: Vec<u8> = (0..j).map(|k| ((bits >> k) & 1) as u8).collect();
                let rec = CountRecordDiscrete::from_outcomes(&outcomes).unwrap();
                let want = iterate(&outcomes, &b, &prof, &psi);
                let general = closed_form_pair_general(&rec, &b, &prof, &psi).unwrap();
                let printed = closed_form_pair(&rec, &b, &prof, &psi).unwrap();
                for got in [general, printed] {
                    assert!((&got.alpha - &want.alpha).norm() < 1e-12, "α mismatch for {outcomes:?}");
                    assert!((&got.beta - &want.beta).norm() < 1e-12, "β mismatch for {outcomes:?}");
                    assert!((got.tail - want.tail).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn rejects_mismatched_tau() {
        let m = SystemModel::two_level_atom(1.0).unwrap();
        let b = build_collision_exact(&m, 0.1).unwrap();
        let prof = DiscretizedProfile::from_values(0.2, vec![ZERO; 3], 1.0).unwrap();
        let rec = CountRecordDiscrete::new(vec![], 2).unwrap();
        assert!(closed_form_pair(&rec, &b, &prof, &basis_vector(2, 0)).is_err());
    }
}
