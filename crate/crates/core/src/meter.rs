//! GHZ states, nonlocal meter states and the angle/strength map.
//!
//! A K-fold meter over N sites lives on NK qubits laid out round-major:
//! round `k` (0-based) occupies qubits `k*N .. (k+1)*N`.

use std::f64::consts::FRAC_PI_2;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Result, VsmError};
use crate::pauli::Sign;
use crate::statevec::{max_qubits, Ket};

/// Slack allowed on the `[0, pi/2]` angle domain before rejecting.
const THETA_SLACK: f64 = 1e-12;

/// Negative strengths down to this value still count as the uniform point.
pub const STRENGTH_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeterSpec {
    n: usize,
    k: usize,
    theta: f64,
}

impl MeterSpec {
    pub fn new(k: usize, n: usize, theta: f64) -> Result<Self> {
        if n < 1 {
            return Err(VsmError::Argument("meter needs N >= 1 sites".into()));
        }
        if k < 1 {
            return Err(VsmError::Argument("meter needs K >= 1 rounds".into()));
        }
        let theta = check_theta(theta)?;
        let limit = max_qubits();
        if n * k > limit {
            return Err(VsmError::Resource {
                what: "K-fold meter",
                needed: n * k,
                limit,
            });
        }
        Ok(Self { n, k, theta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn qubits(&self) -> usize {
        self.n * self.k
    }

    pub fn strength(&self) -> f64 {
        strength(self.k, self.theta)
    }

    /// False when the strength is negative, i.e. outside the `[0, 1]`
    /// range of a variable-strength measurement.
    pub fn vsm_compliant(&self) -> bool {
        self.strength() >= -STRENGTH_TOL
    }

    /// `(alpha, beta)` before the `2^(-K/2)` normalization.
    pub fn alpha_beta(&self) -> (f64, f64) {
        let root = ((1u64 << self.k) as f64 - 1.0).sqrt();
        let (s, c) = self.theta.sin_cos();
        (c + root * s, c - s / root)
    }
}

impl FromStr for MeterSpec {
    type Err = VsmError;

    /// `"K,N,theta"`; theta in radians or with a `deg` suffix.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [k, n, theta] = parts.as_slice() else {
            return Err(VsmError::Parse(format!(
                "meter spec '{s}' should look like K,N,theta"
            )));
        };
        let k = k
            .parse()
            .map_err(|_| VsmError::Parse(format!("invalid K '{k}'")))?;
        let n = n
            .parse()
            .map_err(|_| VsmError::Parse(format!("invalid N '{n}'")))?;
        MeterSpec::new(k, n, parse_angle(theta)?)
    }
}

fn check_theta(theta: f64) -> Result<f64> {
    if !(-THETA_SLACK..=FRAC_PI_2 + THETA_SLACK).contains(&theta) {
        return Err(VsmError::Domain(format!(
            "theta = {theta} is outside [0, pi/2]"
        )));
    }
    Ok(theta.clamp(0.0, FRAC_PI_2))
}

/// Radians by default; `"30deg"` or `"30 deg"` for degrees.
pub fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim();
    let (num, deg) = match t.strip_suffix("deg") {
        Some(rest) => (rest.trim(), true),
        None => (t, false),
    };
    let v: f64 = num
        .parse()
        .map_err(|_| VsmError::Parse(format!("invalid angle '{s}'")))?;
    Ok(if deg { v.to_radians() } else { v })
}

/// `(|0..0> + sign |1..1>)/sqrt(2)`, the `sign` eigenstate of X on every qubit.
pub fn ghz(n: usize, sign: Sign) -> Result<Ket> {
    if n < 1 {
        return Err(VsmError::Argument("GHZ state needs N >= 1".into()));
    }
    check_len(n)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << n];
    let h = std::f64::consts::FRAC_1_SQRT_2;
    amps[0] = Complex64::new(h, 0.0);
    *amps.last_mut().unwrap() = Complex64::new(sign.value() * h, 0.0);
    Ket::new(amps)
}

fn check_len(n: usize) -> Result<()> {
    let limit = max_qubits();
    if n > limit {
        return Err(VsmError::Resource {
            what: "GHZ state",
            needed: n,
            limit,
        });
    }
    Ok(())
}

/// `cos(theta) GHZ+ + sin(theta) GHZ-`.
pub fn nonlocal_meter(n: usize, theta: f64) -> Result<Ket> {
    if n < 1 {
        return Err(VsmError::Argument("meter needs N >= 1".into()));
    }
    check_len(n)?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (s, c) = theta.sin_cos();
    let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << n];
    amps[0] = Complex64::new(h * (c + s), 0.0);
    *amps.last_mut().unwrap() = Complex64::new(h * (c - s), 0.0);
    Ket::new(amps)
}

/// Basis index of `(x)_k |l_k>^(x)N` for the round pattern `l` (bit k of
/// `pattern`, counted from the most significant of K bits, is `l_k`).
pub fn round_pattern_index(pattern: usize, k: usize, n: usize) -> usize {
    let block = (1usize << n) - 1;
    (0..k)
        .filter(|&r| (pattern >> (k - 1 - r)) & 1 == 1)
        .fold(0, |acc, r| acc | (block << (n * (k - 1 - r))))
}

/// K-fold nonlocal meter on NK qubits.
pub fn kfold_meter(spec: &MeterSpec) -> Result<Ket> {
    let (n, k) = (spec.n, spec.k);
    let (alpha, beta) = spec.alpha_beta();
    let norm = 2f64.powf(-(k as f64) / 2.0);
    let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << (n * k)];
    amps[0] = Complex64::new(norm * alpha, 0.0);
    for pattern in 1..(1usize << k) {
        amps[round_pattern_index(pattern, k, n)] = Complex64::new(norm * beta, 0.0);
    }
    Ket::new(amps)
}

/// Measurement strength `(2^K cos^2 theta - 1)/(2^K - 1)`; `cos 2theta` for K=1.
pub fn strength(k: usize, theta: f64) -> f64 {
    assert!(k >= 1, "strength needs K >= 1");
    if k == 1 {
        return (2.0 * theta).cos();
    }
    let d = (1u64 << k) as f64;
    let c = theta.cos();
    (d * c * c - 1.0) / (d - 1.0)
}

/// Inverse of [`strength`] on `[0, 1]`.
pub fn theta_for_strength(k: usize, s: f64) -> Result<f64> {
    if k < 1 {
        return Err(VsmError::Argument("K must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(VsmError::Domain(format!("strength {s} is outside [0, 1]")));
    }
    let d = (1u64 << k) as f64;
    Ok(((s * (d - 1.0) + 1.0) / d).sqrt().min(1.0).acos())
}

/// Angle at which the strength vanishes: `arccos(2^(-K/2))`.
pub fn uniform_theta(k: usize) -> f64 {
    2f64.powf(-(k as f64) / 2.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::ProductObservable;
    use crate::statevec::{expectation, tensor};
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, FRAC_PI_6, FRAC_PI_8};

    fn real_amps(k: &Ket) -> Vec<f64> {
        k.amplitudes().iter().map(|a| a.re).collect()
    }

    #[test]
    fn ghz_examples() {
        let g = ghz(2, Sign::Plus).unwrap();
        assert_eq!(real_amps(&g), vec![FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]);
        let g3 = ghz(3, Sign::Minus).unwrap();
        let a = real_amps(&g3);
        assert_eq!(a[0], FRAC_1_SQRT_2);
        assert_eq!(a[7], -FRAC_1_SQRT_2);
        assert!(a[1..7].iter().all(|&x| x == 0.0));
        let xxx = "XXX".parse::<ProductObservable>().unwrap().matrix();
        assert!((expectation(&xxx, &g3).unwrap() + 1.0).abs() < 1e-15);
        assert!(ghz(0, Sign::Plus).is_err());
    }

    #[test]
    fn nonlocal_meter_examples() {
        assert!(nonlocal_meter(3, 0.0)
            .unwrap()
            .approx_eq(&ghz(3, Sign::Plus).unwrap(), 1e-15));
        assert!(nonlocal_meter(2, FRAC_PI_4)
            .unwrap()
            .approx_eq(&Ket::basis(2, 0).unwrap(), 1e-15));
        let m = nonlocal_meter(2, FRAC_PI_8).unwrap();
        let (s, c) = FRAC_PI_8.sin_cos();
        let expected = [(c + s) * FRAC_1_SQRT_2, 0.0, 0.0, (c - s) * FRAC_1_SQRT_2];
        for (a, e) in real_amps(&m).iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn nonlocal_meter_is_ghz_superposition() {
        for i in 0..20 {
            let theta = i as f64 * FRAC_PI_2 / 19.0;
            for n in 1..=4 {
                let m = nonlocal_meter(n, theta).unwrap();
                let gp = ghz(n, Sign::Plus).unwrap();
                let gm = ghz(n, Sign::Minus).unwrap();
                for idx in 0..m.dim() {
                    let e = theta.cos() * gp.amplitude(idx) + theta.sin() * gm.amplitude(idx);
                    assert!((m.amplitude(idx) - e).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn kfold_k1_equals_nonlocal_meter() {
        for theta in [0.0, 0.3, 1.1, FRAC_PI_2] {
            let spec = MeterSpec::new(1, 3, theta).unwrap();
            assert!(kfold_meter(&spec)
                .unwrap()
                .approx_eq(&nonlocal_meter(3, theta).unwrap(), 1e-15));
        }
    }

    #[test]
    fn kfold_k2_n3_written_out() {
        let theta = 0.37;
        let spec = MeterSpec::new(2, 3, theta).unwrap();
        let m = kfold_meter(&spec).unwrap();
        let (s, c) = theta.sin_cos();
        let r3 = 3f64.sqrt();
        let a = 0.5 * (c + r3 * s);
        let b = 0.5 * (c - s / r3);
        for idx in 0..64 {
            let expected = match idx {
                0b000000 => a,
                0b111000 | 0b000111 | 0b111111 => b,
                _ => 0.0,
            };
            assert!(
                (m.amplitude(idx).re - expected).abs() < 1e-15,
                "index {idx:06b}"
            );
            assert_eq!(m.amplitude(idx).im, 0.0);
        }
    }

    #[test]
    fn kfold_theta_zero_is_ghz_product() {
        let spec = MeterSpec::new(3, 2, 0.0).unwrap();
        let g = ghz(2, Sign::Plus).unwrap();
        let expected = tensor(&[g.clone(), g.clone(), g]).unwrap();
        assert!(kfold_meter(&spec).unwrap().approx_eq(&expected, 1e-15));
    }

    #[test]
    fn kfold_norm_over_grid() {
        for n in 1..=4 {
            for k in 1..=3 {
                for i in 0..50 {
                    let theta = i as f64 * FRAC_PI_2 / 49.0;
                    let m = kfold_meter(&MeterSpec::new(k, n, theta).unwrap()).unwrap();
                    assert!((m.norm() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn strength_examples() {
        for theta in [0.0, 0.2, 0.9, 1.4] {
            assert_eq!(strength(1, theta), (2.0 * theta).cos());
        }
        for k in 1..=5 {
            assert_eq!(strength(k, 0.0), 1.0);
        }
        assert!((strength(2, FRAC_PI_6) - 2.0 / 3.0).abs() < 1e-15);
        assert!(strength(1, 1.2) < 0.0);
        assert!(!MeterSpec::new(1, 2, 1.2).unwrap().vsm_compliant());
        assert!(MeterSpec::new(2, 2, uniform_theta(2))
            .unwrap()
            .vsm_compliant());
    }

    #[test]
    fn theta_for_strength_examples() {
        assert_eq!(theta_for_strength(2, 1.0).unwrap(), 0.0);
        for k in 1..=4 {
            let t = theta_for_strength(k, 0.0).unwrap();
            assert!((t - 2f64.powf(-(k as f64) / 2.0).acos()).abs() < 1e-15);
        }
        assert!((theta_for_strength(1, 0.5).unwrap() - FRAC_PI_6).abs() < 1e-15);
        assert!(theta_for_strength(1, 1.5).is_err());
        assert!(theta_for_strength(1, -0.1).is_err());
    }

    #[test]
    fn strength_roundtrip() {
        for k in 1..=4 {
            for i in 0..=100 {
                let s = i as f64 / 100.0;
                let t = theta_for_strength(k, s).unwrap();
                assert!((strength(k, t) - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spec_parsing_and_domain() {
        let spec: MeterSpec = "2,3,0.5".parse().unwrap();
        assert_eq!((spec.k(), spec.n(), spec.theta()), (2, 3, 0.5));
        let spec: MeterSpec = "1, 2, 90deg".parse().unwrap();
        assert_eq!(spec.theta(), FRAC_PI_2);
        assert!("1,2".parse::<MeterSpec>().is_err());
        assert!("1,2,2.0".parse::<MeterSpec>().is_err());
        assert!("0,2,0".parse::<MeterSpec>().is_err());
        assert!((parse_angle("30deg").unwrap() - FRAC_PI_6).abs() < 1e-15);
        assert!(parse_angle("abc").is_err());
    }
}
