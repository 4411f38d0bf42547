//! Dense complex linear algebra used throughout the crate.
//!
//! Everything here works on heap-allocated `nalgebra` matrices; the system
//! dimension is a runtime value and stays small (d ≤ 5 in practice).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn zeros(d: usize) -> CMat {
    CMat::zeros(d, d)
}

/// `|u⟩⟨v|`
pub fn outer(u: &CVec, v: &CVec) -> CMat {
    u * v.adjoint()
}

pub fn trace(m: &CMat) -> Complex64 {
    m.diagonal().sum()
}

/// Maximum absolute column sum.
pub fn one_norm(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Frobenius norm of `M - M†`.
pub fn hermitian_residual(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

/// `(M + M†) / 2`
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * cr(0.5)
}

pub fn hermitize_in_place(m: &mut CMat) {
    let d = m.nrows();
    for i in 0..d {
        m[(i, i)].im = 0.0;
        for j in (i + 1)..d {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// Frobenius norm of `U†U - 1`.
pub fn unitarity_residual(u: &CMat) -> f64 {
    (u.adjoint() * u - CMat::identity(u.ncols(), u.ncols())).norm()
}

/// Smallest eigenvalue of a Hermitian matrix (the matrix is symmetrized first).
pub fn min_eigenvalue(m: &CMat) -> f64 {
    hermitize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// 1-norm bounds below which the diagonal Padé approximant of the given degree
// reaches double precision without scaling.
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152e0;

/// Matrix exponential of a general complex square matrix by scaling and
/// squaring with a diagonal Padé approximant (degree 3 to 13 chosen from
/// the 1-norm).
pub fn expm(a: &CMat) -> Result<CMat> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::Numeric {
            what: "matrix exponential (non-finite input)".into(),
            residual: norm,
        });
    }

    let (u, v, squarings) = match THETA.iter().find(|(_, theta)| norm <= *theta) {
        Some(&(degree, _)) => {
            let coeffs: &[f64] = match degree {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let (u, v) = pade_low(a, coeffs);
            (u, v, 0)
        }
        None => {
            let s = ((norm / THETA13).log2().ceil()).max(0.0) as i32;
            let scaled = a * cr(2f64.powi(-s));
            let (u, v) = pade13(&scaled);
            (u, v, s as u32)
        }
    };

    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom.lu().solve(&numer).ok_or_else(|| Error::Numeric {
        what: "matrix exponential (singular Padé denominator)".into(),
        residual: f64::INFINITY,
    })?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric {
            what: "matrix exponential (overflow)".into(),
            residual: f64::INFINITY,
        });
    }
    Ok(r)
}

fn pade_low(a: &CMat, b: &[f64]) -> (CMat, CMat) {
    let n = a.nrows();
    let id = CMat::identity(n, n);
    let a2 = a * a;
    let mut odd = &id * cr(b[1]);
    let mut even = &id * cr(b[0]);
    let mut power = id;
    let mut k = 2;
    while k < b.len() {
        power = &power * &a2;
        even += &power * cr(b[k]);
        odd += &power * cr(b[k + 1]);
        k += 2;
    }
    (a * odd, even)
}

fn pade13(a: &CMat) -> (CMat, CMat) {
    let b = &PADE13;
    let n = a.nrows();
    let id = CMat::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * cr(b[13]) + &a4 * cr(b[11]) + &a2 * cr(b[9]);
    let u = a * (&a6 * inner_u
        + &a6 * cr(b[7])
        + &a4 * cr(b[5])
        + &a2 * cr(b[3])
        + &id * cr(b[1]));
    let inner_v = &a6 * cr(b[12]) + &a4 * cr(b[10]) + &a2 * cr(b[8]);
    let v = &a6 * inner_v + &a6 * cr(b[6]) + &a4 * cr(b[4]) + &a2 * cr(b[2]) + &id * cr(b[0]);
    (u, v)
}

/// Random complex matrix with independent standard normal real and
/// imaginary parts, scaled by `scale`.
pub fn random_matrix<R: rand::Rng + ?Sized>(d: usize, scale: f64, rng: &mut R) -> CMat {
    use rand_distr::{Distribution, StandardNormal};
    CMat::from_fn(d, d, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re * scale, im * scale)
    })
}

pub fn random_hermitian<R: rand::Rng + ?Sized>(d: usize, scale: f64, rng: &mut R) -> CMat {
    hermitize(&random_matrix(d, scale, rng))
}

/// Random unit vector, uniformly distributed on the complex sphere.
pub fn random_unit_vector<R: rand::Rng + ?Sized>(d: usize, rng: &mut R) -> CVec {
    use rand_distr::{Distribution, StandardNormal};
    let v = CVec::from_fn(d, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im)
    });
    let n = v.norm();
    v / cr(n)
}
