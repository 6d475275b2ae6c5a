//! n-tangle of pure qubit states.
//!
//! [`n_tangle_contraction`] evaluates the Levi-Civita contraction
//!
//! ```text
//! tau_n = 2 | sum a_A a_B a_C a_D  eps(A1,B1)..eps(A{n-1},B{n-1})
//!                                  eps(C1,D1)..eps(C{n-1},D{n-1})
//!                                  eps(An,Cn) eps(Bn,Dn) |
//! ```
//!
//! over unconjugated amplitudes and is the reference. [`n_tangle_spinflip`]
//! is the O(2^n) production path and must agree with it.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, VsmError};
use crate::meter::{kfold_meter, MeterSpec};
use crate::statevec::Ket;

/// The contraction visits 2^(2n) nonzero terms; above this it is refused.
pub const CONTRACTION_MAX_QUBITS: usize = 8;
/// Allowed `|tau - s^2|` for meter states.
pub const STRENGTH_TANGLE_TOL: f64 = 1e-8;

#[inline]
fn eps_sign(bit: usize) -> f64 {
    // eps(0,1) = 1, eps(1,0) = -1; used only where the pair differs.
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

fn pairwise_sum(terms: &[Complex64]) -> Complex64 {
    match terms.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => terms[0],
        len => {
            let (l, r) = terms.split_at(len / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

/// Reference n-tangle. Only index tuples where every epsilon is nonzero are
/// visited: `B' = !A'`, `C_n = !A_n`, `D' = !C'`, `D_n = !B_n`, leaving
/// `A`, `B_n` and `C'` free.
pub fn n_tangle_contraction(state: &Ket) -> Result<f64> {
    let n = state.n();
    if n > CONTRACTION_MAX_QUBITS {
        return Err(VsmError::Resource {
            what: "n-tangle contraction",
            needed: n,
            limit: CONTRACTION_MAX_QUBITS,
        });
    }
    if n == 0 {
        return Err(VsmError::Argument(
            "n-tangle needs at least one qubit".into(),
        ));
    }
    let a = state.amplitudes();
    let head_mask = (1usize << (n - 1)) - 1;
    let mut terms = Vec::with_capacity(1 << (2 * n));
    for alpha in 0..(1usize << n) {
        let (alpha_head, alpha_last) = (alpha >> 1, alpha & 1);
        let head_sign_ab = if alpha_head.count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        };
        for beta_last in 0..2usize {
            let beta = ((!alpha_head & head_mask) << 1) | beta_last;
            for gamma_head in 0..(1usize << (n - 1)) {
                let gamma = (gamma_head << 1) | (alpha_last ^ 1);
                let delta = ((!gamma_head & head_mask) << 1) | (beta_last ^ 1);
                let head_sign_cd = if gamma_head.count_ones() % 2 == 0 {
                    1.0
                } else {
                    -1.0
                };
                let sign = head_sign_ab * head_sign_cd * eps_sign(alpha_last) * eps_sign(beta_last);
                terms.push(a[alpha] * a[beta] * a[gamma] * a[delta] * sign);
            }
        }
    }
    Ok(2.0 * pairwise_sum(&terms).norm())
}

/// `psi_x^T Y^(x)m psi_y` for m-qubit vectors.
fn spin_flip_form(x: &[Complex64], y: &[Complex64], m: usize) -> Complex64 {
    let full = (1usize << m) - 1;
    let i = Complex64::new(0.0, 1.0);
    let mut acc = Vec::with_capacity(x.len());
    for (idx, &yv) in y.iter().enumerate() {
        // Y|0> = i|1>, Y|1> = -i|0>: phase i^(#zeros) (-i)^(#ones)
        let ones = idx.count_ones() as usize;
        let zeros = m - ones;
        let phase = i.powu(zeros as u32) * (-i).powu(ones as u32);
        acc.push(x[full ^ idx] * phase * yv);
    }
    pairwise_sum(&acc)
}

/// Fast n-tangle.
///
/// Even n: `|<psi*| Y^(x)n |psi>|^2`. For odd n that overlap vanishes
/// identically while the contraction does not, so the state is split on its
/// last qubit into `psi_0, psi_1` and `tau = 4 |det B|` with
/// `B_xy = psi_x^T Y^(x)(n-1) psi_y`. For even n the two forms coincide.
pub fn n_tangle_spinflip(state: &Ket) -> f64 {
    let n = state.n();
    let a = state.amplitudes();
    if n.is_multiple_of(2) {
        return spin_flip_form(a, a, n).norm_sqr();
    }
    let half: (Vec<Complex64>, Vec<Complex64>) = (
        a.iter().step_by(2).copied().collect(),
        a.iter().skip(1).step_by(2).copied().collect(),
    );
    let m = n - 1;
    let b00 = spin_flip_form(&half.0, &half.0, m);
    let b01 = spin_flip_form(&half.0, &half.1, m);
    let b10 = spin_flip_form(&half.1, &half.0, m);
    let b11 = spin_flip_form(&half.1, &half.1, m);
    4.0 * (b00 * b11 - b01 * b10).norm()
}

/// Full-register spin-flip overlap `|<psi*| Y^(x)n |psi>|^2` for any n.
pub fn spin_flip_overlap(state: &Ket) -> f64 {
    let a = state.amplitudes();
    spin_flip_form(a, a, state.n()).norm_sqr()
}

/// Reduced contraction for K-fold meters: with `m = (K-1)N`,
/// `4 (sum a_{A,0..0} a_{B,1..1} eps(A1,B1)..eps(Am,Bm))^2`.
pub fn meter_tangle_simplified(spec: &MeterSpec) -> Result<f64> {
    let meter = kfold_meter(spec)?;
    let a = meter.amplitudes();
    let n = spec.n();
    let m = (spec.k() - 1) * n;
    let last_ones = (1usize << n) - 1;
    let mut sum = Complex64::new(0.0, 0.0);
    for alpha in 0..(1usize << m) {
        for beta in 0..(1usize << m) {
            let mut eps = 1.0;
            for bit in 0..m {
                let (x, y) = ((alpha >> bit) & 1, (beta >> bit) & 1);
                if x == y {
                    eps = 0.0;
                    break;
                }
                eps *= eps_sign(x);
            }
            if eps != 0.0 {
                sum += a[alpha << n] * a[(beta << n) | last_ones] * eps;
            }
        }
    }
    Ok(4.0 * sum.norm_sqr())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TangleMethod {
    Contraction,
    Spinflip,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangleReport {
    pub n: usize,
    pub tau: f64,
    pub method: TangleMethod,
    pub strength_squared: Option<f64>,
    pub residual: Option<f64>,
    /// The n-tangle is an entanglement monotone only for n = 3 and even n.
    pub monotone: bool,
}

impl TangleReport {
    pub fn for_state(state: &Ket) -> Result<Self> {
        let n = state.n();
        let (tau, method) = if n <= CONTRACTION_MAX_QUBITS {
            (n_tangle_contraction(state)?, TangleMethod::Contraction)
        } else {
            (n_tangle_spinflip(state), TangleMethod::Spinflip)
        };
        Ok(Self {
            n,
            tau,
            method,
            strength_squared: None,
            residual: None,
            monotone: is_monotone(n),
        })
    }

    pub fn passed(&self) -> bool {
        self.residual.is_none_or(|r| r < STRENGTH_TANGLE_TOL)
    }
}

pub fn is_monotone(n: usize) -> bool {
    n.is_multiple_of(2) || n <= 3
}

/// Tangle of each meter state against its squared strength.
pub fn verify_strength_tangle(specs: &[MeterSpec]) -> Vec<TangleReport> {
    specs
        .iter()
        .map(|spec| {
            let meter = kfold_meter(spec).expect("validated meter spec");
            let mut report = TangleReport::for_state(&meter).expect("nonempty state");
            let s2 = spec.strength().powi(2);
            report.strength_squared = Some(s2);
            report.residual = Some((report.tau - s2).abs());
            report
        })
        .collect()
}
