//! Orthant-monotonicity check: sign constraints on the Jacobian written as
//! parity equations and solved over GF(2).

use crate::imatrix::IntervalMatrix;
use crate::interval::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Zero,
    Positive,
    Negative,
    /// Takes both signs over the domain.
    Mixed,
}

impl Sign {
    pub fn of(e: Interval) -> Sign {
        if e.lo == 0.0 && e.hi == 0.0 {
            Sign::Zero
        } else if e.lo >= 0.0 {
            Sign::Positive
        } else if e.hi <= 0.0 {
            Sign::Negative
        } else {
            Sign::Mixed
        }
    }
}

pub fn sign_matrix(m: &IntervalMatrix) -> Vec<Vec<Sign>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| Sign::of(m.get(i, j))).collect())
        .collect()
}

/// Orthant bits: `epsilon[i]` flips state `i`, `delta[k]` flips input `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotoneSigns {
    pub epsilon: Vec<bool>,
    pub delta: Vec<bool>,
}

impl MonotoneSigns {
    /// Re-substitutes the bits into the sign constraints
    /// `(-1)^(e_i + e_j) J_x,ij >= 0` and `(-1)^(e_i + d_k) J_p,ik >= 0`.
    pub fn verify(&self, jx: &[Vec<Sign>], jp: &[Vec<Sign>]) -> bool {
        let ok = |s: Sign, flip: bool| match s {
            Sign::Zero => true,
            Sign::Positive => !flip,
            Sign::Negative => flip,
            Sign::Mixed => false,
        };
        let n = self.epsilon.len();
        jx.len() == n
            && jp.len() == n
            && (0..n).all(|i| {
                jx[i].len() == n
                    && jp[i].len() == self.delta.len()
                    && (0..n).all(|j| j == i || ok(jx[i][j], self.epsilon[i] ^ self.epsilon[j]))
                    && (0..self.delta.len()).all(|k| ok(jp[i][k], self.epsilon[i] ^ self.delta[k]))
            })
    }
}

/// Row of a GF(2) system stored as packed bits plus right-hand side.
#[derive(Clone)]
struct Equation {
    bits: Vec<u64>,
    rhs: bool,
}

impl Equation {
    fn new(vars: usize, a: usize, b: usize, rhs: bool) -> Self {
        let mut bits = vec![0u64; vars.div_ceil(64)];
        bits[a / 64] ^= 1 << (a % 64);
        bits[b / 64] ^= 1 << (b % 64);
        Self { bits, rhs }
    }

    fn get(&self, v: usize) -> bool {
        self.bits[v / 64] >> (v % 64) & 1 == 1
    }

    fn xor_with(&mut self, other: &Equation) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a ^= b;
        }
        self.rhs ^= other.rhs;
    }
}

/// Finds orthant bits satisfying the sign pattern, or `None` when the
/// pattern has a mixed-sign entry or the parity equations are inconsistent.
/// The diagonal of `jx` is ignored; free variables are set to 0.
pub fn check_monotonicity(jx: &[Vec<Sign>], jp: &[Vec<Sign>]) -> Option<MonotoneSigns> {
    let n = jx.len();
    let m = jp.first().map_or(0, Vec::len);
    let vars = n + m;
    let mut eqs = Vec::new();
    for i in 0..n {
        for (j, &s) in jx[i].iter().enumerate() {
            if j == i || s == Sign::Zero {
                continue;
            }
            if s == Sign::Mixed {
                return None;
            }
            eqs.push(Equation::new(vars, i, j, s == Sign::Negative));
        }
        for (k, &s) in jp[i].iter().enumerate() {
            if s == Sign::Zero {
                continue;
            }
            if s == Sign::Mixed {
                return None;
            }
            eqs.push(Equation::new(vars, i, n + k, s == Sign::Negative));
        }
    }

    // Gauss-Jordan elimination, pivoting from the last variable down so the
    // lowest-indexed state of each coupled group is the free one: solutions
    // are normalized to epsilon = 0 on that state.
    let mut pivots = Vec::new();
    let mut row = 0;
    for v in (0..vars).rev() {
        let Some(r) = (row..eqs.len()).find(|&r| eqs[r].get(v)) else {
            continue;
        };
        eqs.swap(row, r);
        let pivot = eqs[row].clone();
        for (r, eq) in eqs.iter_mut().enumerate() {
            if r != row && eq.get(v) {
                eq.xor_with(&pivot);
            }
        }
        pivots.push(v);
        row += 1;
    }
    if eqs[row..].iter().any(|e| e.rhs) {
        return None;
    }
    // With free variables at 0, each pivot variable equals its row's rhs.
    let mut x = vec![false; vars];
    for (r, &v) in pivots.iter().enumerate() {
        x[v] = eqs[r].rhs;
    }
    let signs = MonotoneSigns {
        epsilon: x[..n].to_vec(),
        delta: x[n..].to_vec(),
    };
    debug_assert!(signs.verify(jx, jp));
    Some(signs)
}
