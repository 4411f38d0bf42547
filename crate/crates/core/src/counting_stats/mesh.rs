//! Piecewise-uniform nodes on `[a, b]`, split where the packet jumps so that
//! composite Simpson keeps its order on every piece.

use num_complex::Complex64;

use crate::error::Result;
use crate::linalg::{identity, CMat, CVec};
use crate::model::{NonHermitianGenerator, PhotonProfile};
use crate::simpson::simpson_weights;

/// Which one-sided limit of `ξ` a node stands for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Side {
    Left,
    Right,
}

struct Piece {
    first: usize,
    n: usize,
    h: f64,
    /// `T_{jh}` for `j = 0..=n`
    powers: Vec<CMat>,
}

pub(crate) struct Mesh {
    pieces: Vec<Piece>,
    nodes: Vec<f64>,
    left: Vec<Complex64>,
    right: Vec<Complex64>,
}

/// A sub-run of nodes `u, u + stride, …, w` with spacing `h` inside one
/// piece.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Run {
    pub u: usize,
    pub w: usize,
    pub h: f64,
}

impl Run {
    /// Side of `ξ` belonging to node `g` of this run.
    pub fn side(&self, g: usize) -> Side {
        if g == self.w && g != self.u {
            Side::Left
        } else {
            Side::Right
        }
    }
}

fn jump_tolerance(c: f64) -> f64 {
    1e-12 * c.abs().max(1.0)
}

impl Mesh {
    /// Exactly `intervals` intervals when `ξ` is continuous on
    /// `(a, b)`; otherwise every piece gets an even share of at least two.
    pub fn new(gen: &NonHermitianGenerator, profile: &PhotonProfile, a: f64, b: f64, intervals: usize) -> Result<Self> {
        let jumps = profile.discontinuities();
        let mut cuts = vec![a];
        cuts.extend(jumps.iter().copied().filter(|&c| c > a + jump_tolerance(c) && c < b - jump_tolerance(c)));
        cuts.push(b);
        let len = b - a;
        let mut pieces = Vec::new();
        let mut nodes = vec![a];
        let mut first = 0;
        for w in cuts.windows(2) {
            let n = if cuts.len() == 2 {
                intervals
            } else {
                (2 * ((intervals as f64 * (w[1] - w[0]) / len / 2.0).round() as usize)).max(2)
            };
            let h = (w[1] - w[0]) / n as f64;
            let step = gen.propagator(h)?;
            let mut powers = Vec::with_capacity(n + 1);
            powers.push(identity(gen.dim()));
            for j in 0..n {
                let next = &powers[j] * &step;
                powers.push(next);
            }
            nodes.extend((1..n).map(|j| w[0] + j as f64 * h));
            nodes.push(w[1]);
            pieces.push(Piece { first, n, h, powers });
            first += n;
        }
        let limit = |x: f64, sign: f64| match jumps.iter().find(|&&c| (x - c).abs() <= jump_tolerance(c)) {
            Some(&c) => profile.amplitude(c + sign * jump_tolerance(c)),
            None => profile.amplitude(x),
        };
        let left = nodes.iter().map(|&x| limit(x, -1.0)).collect();
        let right = nodes.iter().map(|&x| limit(x, 1.0)).collect();
        Ok(Mesh {
            pieces,
            nodes,
            left,
            right,
        })
    }

    /// Index of the last node.
    pub fn last(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn x(&self, g: usize) -> f64 {
        self.nodes[g]
    }

    pub fn xi(&self, g: usize, side: Side) -> Complex64 {
        match side {
            Side::Left => self.left[g],
            Side::Right => self.right[g],
        }
    }

    fn piece_of(&self, g: usize) -> usize {
        self.pieces
            .iter()
            .position(|p| g < p.first + p.n)
            .unwrap_or(self.pieces.len() - 1)
    }

    /// `T_{x_b − x_a} v` for `a ≤ b`.
    pub fn apply(&self, a: usize, b: usize, v: &CVec) -> CVec {
        let mut p = self.piece_of(a);
        let mut cur = a;
        let mut v = v.clone();
        loop {
            let piece = &self.pieces[p];
            let end = piece.first + piece.n;
            if b <= end {
                return &piece.powers[b - cur] * v;
            }
            v = &piece.powers[end - cur] * v;
            cur = end;
            p += 1;
        }
    }

    /// Runs covering `[x_a, x_b]` on the lattice coarsened by `stride`.
    pub fn runs(&self, a: usize, b: usize, stride: usize) -> Vec<Run> {
        self.pieces
            .iter()
            .filter_map(|p| {
                let (u, w) = (a.max(p.first), b.min(p.first + p.n));
                (u < w).then_some(Run {
                    u,
                    w,
                    h: p.h * stride as f64,
                })
            })
            .collect()
    }

    /// `∫_{x_a}^{x_b} T_{x_b−s} ξ_s L† T_{s−x_a} ds v` by composite Simpson on
    /// every run.
    pub fn absorb(&self, a: usize, b: usize, stride: usize, ldag: &CMat, v: &CVec) -> CVec {
        let mut out = CVec::zeros(v.len());
        for run in self.runs(a, b, stride) {
            let m = (run.w - run.u) / stride;
            for (j, wj) in simpson_weights(m).iter().enumerate() {
                let g = run.u + j * stride;
                let c = self.xi(g, run.side(g)) * (run.h * wj);
                if c != Complex64::new(0.0, 0.0) {
                    out += self.apply(g, b, &(ldag * self.apply(a, g, v))) * c;
                }
            }
        }
        out
    }
}
