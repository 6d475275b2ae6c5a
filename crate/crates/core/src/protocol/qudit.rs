//! Single-qudit variable-strength measurement with a qudit meter and a
//! modular-shift interaction `|i>|j> -> |i>|(i+j) mod d>`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, VsmError};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug)]
pub struct QuditVsm {
    pub d: usize,
    pub theta: f64,
    /// `E_i = cos^2(theta)|i><i| + sin^2(theta)/(d-1) (I - |i><i|)`.
    pub effects: Vec<DMatrix<Complex64>>,
    pub strength: f64,
}

fn check_d(d: usize) -> Result<()> {
    if d < 2 {
        return Err(VsmError::Argument(format!(
            "qudit dimension must be >= 2, got {d}"
        )));
    }
    Ok(())
}

/// `(d cos^2(theta) - 1)/(d - 1)`.
pub fn qudit_strength(d: usize, theta: f64) -> f64 {
    let c = theta.cos();
    (d as f64 * c * c - 1.0) / (d as f64 - 1.0)
}

pub fn qudit_vsm(d: usize, theta: f64) -> Result<QuditVsm> {
    check_d(d)?;
    let (s, c) = theta.sin_cos();
    let on = Complex64::new(c * c, 0.0);
    let off = Complex64::new(s * s / (d as f64 - 1.0), 0.0);
    let effects = (0..d)
        .map(|i| {
            DMatrix::from_fn(d, d, |r, col| {
                if r != col {
                    ZERO
                } else if r == i {
                    on
                } else {
                    off
                }
            })
        })
        .collect();
    Ok(QuditVsm {
        d,
        theta,
        effects,
        strength: qudit_strength(d, theta),
    })
}

/// `cos(theta)|0> + sin(theta)/sqrt(d-1) sum_{j>0} |j>`.
pub fn qudit_meter(d: usize, theta: f64) -> Result<Vec<Complex64>> {
    check_d(d)?;
    let (s, c) = theta.sin_cos();
    let rest = s / (d as f64 - 1.0).sqrt();
    Ok((0..d)
        .map(|j| Complex64::new(if j == 0 { c } else { rest }, 0.0))
        .collect())
}

/// `M_j = <j|_M U |phi>_M`, computed from the explicit d^2 x d^2 shift
/// unitary on system (x) meter (system index most significant).
pub fn qudit_kraus_bruteforce(d: usize, theta: f64) -> Result<Vec<DMatrix<Complex64>>> {
    let phi = qudit_meter(d, theta)?;
    let dim = d * d;
    let mut u = DMatrix::from_element(dim, dim, ZERO);
    for i in 0..d {
        for j in 0..d {
            u[(i * d + (i + j) % d, i * d + j)] = Complex64::new(1.0, 0.0);
        }
    }
    let kraus = (0..d)
        .map(|outcome| {
            DMatrix::from_fn(d, d, |row, col| {
                (0..d)
                    .map(|m| u[(row * d + outcome, col * d + m)] * phi[m])
                    .sum()
            })
        })
        .collect();
    Ok(kraus)
}

pub fn qudit_effects_bruteforce(d: usize, theta: f64) -> Result<Vec<DMatrix<Complex64>>> {
    Ok(qudit_kraus_bruteforce(d, theta)?
        .iter()
        .map(|m| m.adjoint() * m)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_6;

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn strong_limit_d2() {
        let v = qudit_vsm(2, 0.0).unwrap();
        assert_eq!(v.strength, 1.0);
        assert_eq!(v.effects[0][(0, 0)].re, 1.0);
        assert_eq!(v.effects[0][(1, 1)].re, 0.0);
        assert_eq!(v.effects[1][(1, 1)].re, 1.0);
    }

    #[test]
    fn uniform_point() {
        for d in 2..=5 {
            let theta = (d as f64).powf(-0.5).acos();
            let v = qudit_vsm(d, theta).unwrap();
            assert!(v.strength.abs() < 1e-12);
            for e in &v.effects {
                for i in 0..d {
                    assert!((e[(i, i)].re - 1.0 / d as f64).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn d4_strength() {
        assert!((qudit_vsm(4, FRAC_PI_6).unwrap().strength - 2.0 / 3.0).abs() < 1e-15);
        assert!(qudit_vsm(1, 0.3).is_err());
    }

    #[test]
    fn bruteforce_matches_closed_form_and_is_luders() {
        for d in 2..=4 {
            for i in 0..10 {
                let theta = i as f64 * 0.15;
                let closed = qudit_vsm(d, theta).unwrap();
                let brute = qudit_effects_bruteforce(d, theta).unwrap();
                let kraus = qudit_kraus_bruteforce(d, theta).unwrap();
                let mut total = DMatrix::from_element(d, d, ZERO);
                for ((e, b), m) in closed.effects.iter().zip(&brute).zip(&kraus) {
                    assert!(max_diff(e, b) < 1e-12);
                    // diagonal with nonnegative entries: M_j = sqrt(E_j)
                    let root = e.map(|z| Complex64::new(z.re.sqrt(), 0.0));
                    assert!(max_diff(m, &root) < 1e-12);
                    total += b;
                }
                assert!(max_diff(&total, &DMatrix::identity(d, d)) < 1e-12);
            }
        }
    }
}
