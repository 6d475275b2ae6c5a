//! Dense state vectors and operators over n qubits.
//!
//! Qubit 0 is the most significant bit of the basis index. All operations
//! take their inputs by reference and return fresh values.

use std::env;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VsmError};
use crate::pauli::{PauliLetter, Sign};

/// Default absolute tolerance for complex equality checks.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Tolerance used when parsing serialized kets.
pub const PARSE_NORM_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_QUBITS: usize = 24;
pub const MAX_QUBITS_ENV: &str = "VSM_MAX_QUBITS";

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Qubit cap for dense states; `VSM_MAX_QUBITS` overrides the default.
pub fn max_qubits() -> usize {
    env::var(MAX_QUBITS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_QUBITS)
}

fn qubits_for_len(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(VsmError::Argument(format!(
            "amplitude count {len} is not a power of two"
        )));
    }
    let n = len.trailing_zeros() as usize;
    let limit = max_qubits();
    if n > limit {
        return Err(VsmError::Resource {
            what: "dense state",
            needed: n,
            limit,
        });
    }
    Ok(n)
}

#[inline]
fn bit_of(index: usize, qubit: usize, n: usize) -> usize {
    (index >> (n - 1 - qubit)) & 1
}

/// Complex amplitude vector over n qubits.
///
/// [`Ket::new`] requires unit norm. [`Ket::unnormalized`] skips that check and
/// is used for measurement branches whose squared norm is a probability.
#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    n: usize,
    amps: Vec<Complex64>,
}

impl Ket {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        let ket = Self::unnormalized(amps)?;
        let norm = ket.norm();
        if (norm - 1.0).abs() > DEFAULT_TOL {
            return Err(VsmError::Argument(format!(
                "state is not normalized (norm {norm})"
            )));
        }
        Ok(ket)
    }

    pub fn unnormalized(amps: Vec<Complex64>) -> Result<Self> {
        let n = qubits_for_len(amps.len())?;
        Ok(Self { n, amps })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        if index >= 1usize << n {
            return Err(VsmError::Argument(format!(
                "basis index {index} out of range for {n} qubits"
            )));
        }
        let mut amps = vec![ZERO; 1usize << n];
        amps[index] = Complex64::new(1.0, 0.0);
        Self::unnormalized(amps)
    }

    /// Product state from a label over `0`, `1`, `+`, `-`, e.g. `"+1"`.
    pub fn from_label(label: &str) -> Result<Self> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let parts = label
            .chars()
            .map(|c| {
                let amps = match c {
                    '0' => [1.0, 0.0],
                    '1' => [0.0, 1.0],
                    '+' => [s, s],
                    '-' => [s, -s],
                    other => {
                        return Err(VsmError::Parse(format!(
                            "unexpected character '{other}' in state label"
                        )))
                    }
                };
                Ket::from_real(&amps)
            })
            .collect::<Result<Vec<_>>>()?;
        tensor(&parts)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn normalized(&self) -> Result<Ket> {
        let norm = self.norm();
        if norm == 0.0 {
            return Err(VsmError::Argument(
                "cannot normalize the zero vector".into(),
            ));
        }
        Ok(self.scale(Complex64::new(1.0 / norm, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Ket {
        Ket {
            n: self.n,
            amps: self.amps.iter().map(|a| a * c).collect(),
        }
    }

    /// Componentwise complex conjugate in the computational basis.
    pub fn conj(&self) -> Ket {
        Ket {
            n: self.n,
            amps: self.amps.iter().map(|a| a.conj()).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Ket) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn approx_eq(&self, other: &Ket, tol: f64) -> bool {
        self.max_abs_diff(other).is_ok_and(|d| d <= tol)
    }

    pub fn to_vector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.amps)
    }

    /// Single-qubit reduced density matrix of `qubit`, row-major.
    pub fn reduced_qubit(&self, qubit: usize) -> Result<[[Complex64; 2]; 2]> {
        check_qubit(qubit, self.n)?;
        let mut rho = [[ZERO; 2]; 2];
        let mask = 1usize << (self.n - 1 - qubit);
        for (i, a) in self.amps.iter().enumerate() {
            if i & mask != 0 {
                continue;
            }
            let b = self.amps[i | mask];
            rho[0][0] += a * a.conj();
            rho[0][1] += a * b.conj();
            rho[1][0] += b * a.conj();
            rho[1][1] += b * b.conj();
        }
        Ok(rho)
    }

    pub fn to_json(&self) -> KetJson {
        KetJson {
            n: self.n,
            re: self.amps.iter().map(|a| a.re).collect(),
            im: self.amps.iter().map(|a| a.im).collect(),
        }
    }

    pub fn from_json(json: &KetJson) -> Result<Ket> {
        if json.re.len() != json.im.len() {
            return Err(VsmError::Parse(format!(
                "re/im length mismatch ({} vs {})",
                json.re.len(),
                json.im.len()
            )));
        }
        let expected = 1usize
            .checked_shl(json.n as u32)
            .ok_or_else(|| VsmError::Parse(format!("qubit count {} too large", json.n)))?;
        if json.re.len() != expected {
            return Err(VsmError::Dimension {
                expected,
                found: json.re.len(),
            });
        }
        let ket = Ket::unnormalized(
            json.re
                .iter()
                .zip(&json.im)
                .map(|(&re, &im)| Complex64::new(re, im))
                .collect(),
        )?;
        if !ket.is_normalized(PARSE_NORM_TOL) {
            return Err(VsmError::Parse(format!(
                "state norm {} differs from 1 by more than {PARSE_NORM_TOL}",
                ket.norm()
            )));
        }
        Ok(ket)
    }
}

/// Serialized form `{"n": int, "re": [...], "im": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KetJson {
    pub n: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(VsmError::Dimension { expected, found });
    }
    Ok(())
}

fn check_qubit(qubit: usize, n: usize) -> Result<()> {
    if qubit >= n {
        return Err(VsmError::Argument(format!(
            "qubit index {qubit} out of range for {n} qubits"
        )));
    }
    Ok(())
}

/// Kronecker product of kets in list order.
pub fn tensor(parts: &[Ket]) -> Result<Ket> {
    let (first, rest) = parts
        .split_first()
        .ok_or_else(|| VsmError::Argument("tensor of an empty list".into()))?;
    let total: usize = parts.iter().map(Ket::n).sum();
    let limit = max_qubits();
    if total > limit {
        return Err(VsmError::Resource {
            what: "tensor product",
            needed: total,
            limit,
        });
    }
    let mut amps = first.amps.clone();
    for part in rest {
        amps = amps
            .iter()
            .flat_map(|a| part.amps.iter().map(move |b| a * b))
            .collect();
    }
    Ket::unnormalized(amps)
}

/// Controlled-Pauli gate: where the `control` bit is 1, `letter` acts on
/// `target`.
pub fn apply_controlled(
    letter: PauliLetter,
    control: usize,
    target: usize,
    state: &Ket,
) -> Result<Ket> {
    let n = state.n;
    check_qubit(control, n)?;
    check_qubit(target, n)?;
    if control == target {
        return Err(VsmError::Argument(
            "control and target must be different qubits".into(),
        ));
    }
    let tshift = n - 1 - target;
    let mut out = vec![ZERO; state.dim()];
    for (i, &a) in state.amps.iter().enumerate() {
        if bit_of(i, control, n) == 0 {
            out[i] += a;
        } else {
            let (bit, phase) = letter.act((i >> tshift) & 1);
            let j = (i & !(1 << tshift)) | (bit << tshift);
            out[j] += phase * a;
        }
    }
    Ket::unnormalized(out)
}

/// Applies `<+|` or `<-|` on `qubit`, returning the unnormalized ket on the
/// remaining qubits together with its squared norm.
pub fn project_x(state: &Ket, qubit: usize, sign: Sign) -> Result<(Ket, f64)> {
    let n = state.n;
    check_qubit(qubit, n)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let w1 = Complex64::new(sign.value() * s, 0.0);
    let w0 = Complex64::new(s, 0.0);
    let low_bits = n - 1 - qubit;
    let low_mask = (1usize << low_bits) - 1;
    let mut out = vec![ZERO; state.dim() / 2];
    for (j, slot) in out.iter_mut().enumerate() {
        let high = j >> low_bits;
        let low = j & low_mask;
        let i0 = (high << (low_bits + 1)) | low;
        let i1 = i0 | (1 << low_bits);
        *slot = w0 * state.amps[i0] + w1 * state.amps[i1];
    }
    let ket = Ket {
        n: n - 1,
        amps: out,
    };
    let p = ket.norm_sqr();
    Ok((ket, p))
}

/// `<a|b>`, conjugate-linear in `a`.
pub fn inner(a: &Ket, b: &Ket) -> Result<Complex64> {
    check_dims(a.dim(), b.dim())?;
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

pub fn fidelity(a: &Ket, b: &Ket) -> Result<f64> {
    Ok(inner(a, b)?.norm_sqr())
}

/// `<psi|A|psi>` for Hermitian `A`.
pub fn expectation(op: &Operator, psi: &Ket) -> Result<f64> {
    if !op.is_hermitian(DEFAULT_TOL) {
        return Err(VsmError::Argument(
            "expectation requires a Hermitian operator".into(),
        ));
    }
    let v = inner(psi, &op.apply(psi)?)?;
    if v.im.abs() > DEFAULT_TOL {
        return Err(VsmError::Consistency(format!(
            "expectation has imaginary residue {}",
            v.im
        )));
    }
    Ok(v.re)
}

/// Dense 2^n x 2^n complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    n: usize,
    mat: DMatrix<Complex64>,
}

impl Operator {
    pub fn from_matrix(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(VsmError::Dimension {
                expected: mat.nrows(),
                found: mat.ncols(),
            });
        }
        let n = qubits_for_len(mat.nrows())?;
        Ok(Self { n, mat })
    }

    pub fn identity(n: usize) -> Self {
        let dim = 1usize << n;
        Self {
            n,
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(n: usize) -> Self {
        let dim = 1usize << n;
        Self {
            n,
            mat: DMatrix::from_element(dim, dim, ZERO),
        }
    }

    /// Outer product `|a><b|`.
    pub fn outer(a: &Ket, b: &Ket) -> Result<Self> {
        check_dims(a.dim(), b.dim())?;
        Self::from_matrix(a.to_vector() * b.to_vector().adjoint())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.mat
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            n: self.n,
            mat: self.mat.adjoint(),
        }
    }

    pub fn matmul(&self, rhs: &Operator) -> Operator {
        Operator {
            n: self.n,
            mat: &self.mat * &rhs.mat,
        }
    }

    pub fn add(&self, rhs: &Operator) -> Operator {
        Operator {
            n: self.n,
            mat: &self.mat + &rhs.mat,
        }
    }

    pub fn sub(&self, rhs: &Operator) -> Operator {
        Operator {
            n: self.n,
            mat: &self.mat - &rhs.mat,
        }
    }

    pub fn scale(&self, c: Complex64) -> Operator {
        Operator {
            n: self.n,
            mat: &self.mat * c,
        }
    }

    pub fn scale_real(&self, c: f64) -> Operator {
        self.scale(Complex64::new(c, 0.0))
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    pub fn apply(&self, ket: &Ket) -> Result<Ket> {
        check_dims(self.dim(), ket.dim())?;
        let v = &self.mat * ket.to_vector();
        Ket::unnormalized(v.iter().copied().collect())
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim(), other.dim(), "operator dimension mismatch");
        self.mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|r| (r..d).all(|c| (self.mat[(r, c)] - self.mat[(c, r)].conj()).norm() <= tol))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let prod = self.adjoint().matmul(self);
        prod.max_abs_diff(&Operator::identity(self.n)) <= tol
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = self.hermitian_part();
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn is_positive(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && self.min_eigenvalue() >= -tol
    }

    /// Principal square root of a positive semidefinite operator. Eigenvalues
    /// within `DEFAULT_TOL` below zero are clamped, and eigenvalues under the
    /// rounding floor `dim * eps * max|lambda|` are treated as zero.
    pub fn sqrt_psd(&self) -> Result<Operator> {
        if !self.is_hermitian(DEFAULT_TOL) {
            return Err(VsmError::Argument(
                "square root of a non-Hermitian operator".into(),
            ));
        }
        let eig = self.hermitian_part().symmetric_eigen();
        if let Some(&min) = eig.eigenvalues.iter().min_by(|a, b| a.total_cmp(b)) {
            if min < -DEFAULT_TOL {
                return Err(VsmError::Domain(format!(
                    "operator has negative eigenvalue {min}"
                )));
            }
        }
        let scale = eig.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        let floor = self.dim() as f64 * f64::EPSILON * scale;
        let roots = DMatrix::from_diagonal(
            &eig.eigenvalues
                .map(|l| Complex64::new(if l > floor { l.sqrt() } else { 0.0 }, 0.0)),
        );
        let v = &eig.eigenvectors;
        Ok(Operator {
            n: self.n,
            mat: v * roots * v.adjoint(),
        })
    }

    fn hermitian_part(&self) -> DMatrix<Complex64> {
        (&self.mat + self.mat.adjoint()) * Complex64::new(0.5, 0.0)
    }

    /// Row-major real and imaginary parts.
    pub fn to_json(&self) -> MatrixJson {
        let d = self.dim();
        let mut re = Vec::with_capacity(d);
        let mut im = Vec::with_capacity(d);
        for r in 0..d {
            re.push((0..d).map(|c| self.mat[(r, c)].re).collect());
            im.push((0..d).map(|c| self.mat[(r, c)].im).collect());
        }
        MatrixJson { re, im }
    }
}

/// Row-major matrix serialization: `{"re": [[..]..], "im": [[..]..]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}
