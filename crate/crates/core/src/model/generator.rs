use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec};
use crate::model::SystemModel;

/// `G = H_S − (i/2) L†L`, generator of the no-count evolution.
#[derive(Clone, Debug)]
pub struct NonHermitianGenerator {
    pub g: CMat,
}

pub fn make_generator(model: &SystemModel) -> NonHermitianGenerator {
    NonHermitianGenerator {
        g: model.hamiltonian() - model.decay_operator() * c(0.0, 0.5),
    }
}

impl NonHermitianGenerator {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// `T_t = e^{−iGt}`
    pub fn propagator(&self, t: f64) -> Result<CMat> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("propagation time must be >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(linalg::identity(self.dim()));
        }
        linalg::expm(&(&self.g * c(0.0, -t)))
    }

    /// `−i(G − G†)`, which equals `−L†L`.
    pub fn decay_part(&self) -> CMat {
        (&self.g - self.g.adjoint()) * c(0.0, -1.0)
    }
}

/// `T_t v`
pub fn propagate(gen: &NonHermitianGenerator, t: f64, v: &CVec) -> Result<CVec> {
    Ok(gen.propagator(t)? * v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cr;
    use crate::model::system::basis_vector;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_level_generator() {
        let m = SystemModel::two_level_atom(1.0).unwrap();
        let g = make_generator(&m);
        let mut want = linalg::zeros(2);
        want[(1, 1)] = c(0.0, -0.5);
        assert!((&g.g - want).norm() < 1e-15);
    }

    #[test]
    fn no_coupling_gives_hamiltonian() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = linalg::random_hermitian(3, 1.0, &mut rng);
        let m = SystemModel::new(h.clone(), linalg::zeros(3), crate::model::InitialState::Pure(basis_vector(3, 0)))
            .unwrap();
        assert!((make_generator(&m).g - h).norm() < 1e-15);
    }

    #[test]
    fn propagation_examples() {
        let m = SystemModel::two_level_atom(1.0).unwrap();
        let g = make_generator(&m);
        let v = basis_vector(2, 1);
        let out = propagate(&g, 2.0, &v).unwrap();
        assert!((out[1] - cr((-1f64).exp())).norm() < 1e-14);
        assert!(out[0].norm() < 1e-15);
        let same = propagate(&g, 0.0, &v).unwrap();
        assert_eq!(same, v);
        assert!(matches!(propagate(&g, -1.0, &v), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn norm_is_monotone_on_a_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = SystemModel::random(4, 1.0, 0.8, &mut rng);
        let g = make_generator(&m);
        let v = linalg::random_unit_vector(4, &mut rng);
        let mut prev = v.norm();
        for k in 1..=100 {
            let n = propagate(&g, 0.05 * k as f64, &v).unwrap().norm();
            assert!(n <= prev + 1e-13);
            prev = n;
        }
        assert!(prev <= 1.0 && prev > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn decay_part_is_minus_ldagl(seed in 0u64..1_000_000, d in 1usize..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = SystemModel::random(d, 1.0, 1.0, &mut rng);
            let g = make_generator(&m);
            prop_assert!((g.decay_part() + m.decay_operator()).norm() < 1e-12);
        }

        #[test]
        fn semigroup_property(seed in 0u64..1_000_000, s in 0.0f64..2.0, t in 0.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = SystemModel::random(3, 1.0, 1.0, &mut rng);
            let g = make_generator(&m);
            let v = linalg::random_unit_vector(3, &mut rng);
            let lhs = propagate(&g, s + t, &v).unwrap();
            let rhs = propagate(&g, s, &propagate(&g, t, &v).unwrap()).unwrap();
            prop_assert!((lhs - rhs).norm() < 1e-10);
        }
    }
}
