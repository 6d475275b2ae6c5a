//! Pauli product observables on N qubits.
//!
//! A [`ProductObservable`] carries one Pauli letter per site (no identities).
//! An [`ObservableSet`] of K pairwise-commuting, independent products has a
//! joint PVM of 2^K projectors, each of rank 2^(N-K), keyed by [`SignVector`].
//!
//! Site 0 is the most significant bit of the basis index everywhere.

use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VsmError};
use crate::statevec::Operator;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliLetter {
    X,
    Y,
    Z,
}

impl PauliLetter {
    pub const ALL: [PauliLetter; 3] = [PauliLetter::X, PauliLetter::Y, PauliLetter::Z];

    /// Row-major 2x2 matrix. Y|0> = i|1>, Y|1> = -i|0>.
    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        match self {
            PauliLetter::X => [[ZERO, ONE], [ONE, ZERO]],
            PauliLetter::Y => [[ZERO, -I], [I, ZERO]],
            PauliLetter::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }

    /// Action on a computational basis bit: returns `(new_bit, phase)`.
    pub fn act(self, bit: usize) -> (usize, Complex64) {
        match (self, bit) {
            (PauliLetter::X, b) => (b ^ 1, ONE),
            (PauliLetter::Y, 0) => (1, I),
            (PauliLetter::Y, _) => (0, -I),
            (PauliLetter::Z, 0) => (0, ONE),
            (PauliLetter::Z, _) => (1, -ONE),
        }
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'X' => Ok(PauliLetter::X),
            'Y' => Ok(PauliLetter::Y),
            'Z' => Ok(PauliLetter::Z),
            other => Err(VsmError::Parse(format!(
                "unexpected character '{other}' in Pauli string (allowed: X, Y, Z)"
            ))),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            PauliLetter::X => 'X',
            PauliLetter::Y => 'Y',
            PauliLetter::Z => 'Z',
        }
    }
}

/// A tensor product of single-site Pauli letters, one per site.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProductObservable {
    letters: Vec<PauliLetter>,
}

impl ProductObservable {
    pub fn new(letters: Vec<PauliLetter>) -> Result<Self> {
        if letters.is_empty() {
            return Err(VsmError::Argument(
                "a product observable needs at least one site".into(),
            ));
        }
        Ok(Self { letters })
    }

    pub fn n(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[PauliLetter] {
        &self.letters
    }

    pub fn letter(&self, site: usize) -> PauliLetter {
        self.letters[site]
    }

    /// Two products commute iff they anticommute on an even number of sites.
    pub fn commutes(&self, other: &ProductObservable) -> Result<bool> {
        if self.n() != other.n() {
            return Err(VsmError::Dimension {
                expected: self.n(),
                found: other.n(),
            });
        }
        let differing = self
            .letters
            .iter()
            .zip(&other.letters)
            .filter(|(a, b)| a != b)
            .count();
        Ok(differing % 2 == 0)
    }

    /// Dense 2^N x 2^N matrix. Each column has a single nonzero entry, so it
    /// is built by mapping basis states rather than by Kronecker products.
    pub fn matrix(&self) -> Operator {
        let n = self.n();
        let dim = 1usize << n;
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        for col in 0..dim {
            let (row, phase) = self.act_on_basis(col);
            m[(row, col)] = phase;
        }
        Operator::from_matrix(m).expect("power-of-two dimension")
    }

    /// Image of basis state `index` as `(index', phase)`.
    pub fn act_on_basis(&self, index: usize) -> (usize, Complex64) {
        let n = self.n();
        let mut out = 0usize;
        let mut phase = ONE;
        for (site, letter) in self.letters.iter().enumerate() {
            let shift = n - 1 - site;
            let (bit, p) = letter.act((index >> shift) & 1);
            out |= bit << shift;
            phase *= p;
        }
        (out, phase)
    }
}

impl FromStr for ProductObservable {
    type Err = VsmError;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .trim()
            .chars()
            .map(PauliLetter::from_char)
            .collect::<Result<Vec<_>>>()?;
        ProductObservable::new(letters)
    }
}

impl fmt::Display for ProductObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.letters {
            write!(f, "{}", l.as_char())?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn from_bit(bit: usize) -> Self {
        if bit == 0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn bit(self) -> usize {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn from_int(v: i64) -> Result<Self> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(VsmError::Parse(format!(
                "sign must be +1 or -1, got {other}"
            ))),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

impl Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Ordered outcome signs `(s_1 .. s_K)`, one per observable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignVector(Vec<Sign>);

impl SignVector {
    pub fn new(signs: Vec<Sign>) -> Self {
        Self(signs)
    }

    /// All 2^K sign vectors in canonical order: `+..+` first, first entry
    /// most significant (so for K=2: `++`, `+-`, `-+`, `--`).
    pub fn all(k: usize) -> impl Iterator<Item = SignVector> {
        (0..1usize << k).map(move |i| SignVector::from_index(i, k))
    }

    pub fn from_index(index: usize, k: usize) -> Self {
        Self(
            (0..k)
                .map(|j| Sign::from_bit((index >> (k - 1 - j)) & 1))
                .collect(),
        )
    }

    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, s| (acc << 1) | s.bit())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn signs(&self) -> &[Sign] {
        &self.0
    }

    pub fn get(&self, k: usize) -> Sign {
        self.0[k]
    }
}

impl FromStr for SignVector {
    type Err = VsmError;

    fn from_str(s: &str) -> Result<Self> {
        let signs = s
            .trim()
            .chars()
            .map(|c| match c {
                '+' => Ok(Sign::Plus),
                '-' => Ok(Sign::Minus),
                other => Err(VsmError::Parse(format!(
                    "unexpected character '{other}' in sign string"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        if signs.is_empty() {
            return Err(VsmError::Parse("empty sign string".into()));
        }
        Ok(SignVector(signs))
    }
}

impl fmt::Display for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// K product observables over the same N sites.
///
/// Construction only checks shape. Commutation and independence are checked
/// by [`ObservableSet::validate`] and enforced by [`ObservableSet::joint_pvm`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservableSet {
    n: usize,
    observables: Vec<ProductObservable>,
}

impl ObservableSet {
    pub fn new(observables: Vec<ProductObservable>) -> Result<Self> {
        let first = observables
            .first()
            .ok_or_else(|| VsmError::Argument("observable set is empty".into()))?;
        let n = first.n();
        if let Some(bad) = observables.iter().find(|o| o.n() != n) {
            return Err(VsmError::Dimension {
                expected: n,
                found: bad.n(),
            });
        }
        Ok(Self { n, observables })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.observables.len()
    }

    pub fn observables(&self) -> &[ProductObservable] {
        &self.observables
    }

    /// Product of `(I + s_k O_k)/2` over k, the simultaneous eigenspace
    /// projector for sign vector `s`. Only a projector when the set commutes.
    fn sign_projector(&self, matrices: &[Operator], signs: &SignVector) -> Operator {
        let mut p = Operator::identity(self.n);
        let id = Operator::identity(self.n);
        for (m, s) in matrices.iter().zip(signs.signs()) {
            let factor = id
                .add(&m.scale(Complex64::new(s.value(), 0.0)))
                .scale(Complex64::new(0.5, 0.0));
            p = p.matmul(&factor);
        }
        p
    }

    pub fn validate(&self) -> SetReport {
        let k = self.k();
        let mut commutation = vec![vec![true; k]; k];
        let mut non_commuting = Vec::new();
        for (a, oa) in self.observables.iter().enumerate() {
            for (b, ob) in self.observables.iter().enumerate().skip(a + 1) {
                let c = oa.commutes(ob).expect("same N by construction");
                commutation[a][b] = c;
                commutation[b][a] = c;
                if !c {
                    non_commuting.push((a, b));
                }
            }
        }
        let expected_rank = if k <= self.n {
            1usize << (self.n - k)
        } else {
            0
        };

        if let Some(&(first, second)) = non_commuting.first() {
            return SetReport {
                commutation,
                non_commuting,
                expected_rank,
                ranks: None,
                failure: Some(SetFailure::NonCommuting { first, second }),
            };
        }

        let matrices: Vec<Operator> = self.observables.iter().map(|o| o.matrix()).collect();
        // Commuting projector products are projectors, so rank = trace.
        let ranks: Vec<usize> = SignVector::all(k)
            .map(|s| {
                self.sign_projector(&matrices, &s)
                    .trace()
                    .re
                    .round()
                    .max(0.0) as usize
            })
            .collect();
        let failure = if k > self.n || ranks.iter().any(|&r| r != expected_rank) {
            Some(SetFailure::Dependent {
                k,
                n: self.n,
                ranks: ranks.clone(),
            })
        } else {
            None
        };
        SetReport {
            commutation,
            non_commuting,
            expected_rank,
            ranks: Some(ranks),
            failure,
        }
    }

    pub fn joint_pvm(&self) -> Result<Pvm> {
        let report = self.validate();
        match report.failure {
            Some(SetFailure::NonCommuting { first, second }) => {
                return Err(VsmError::Commutation { first, second })
            }
            Some(SetFailure::Dependent { ranks, .. }) => {
                return Err(VsmError::Dependence {
                    expected: report.expected_rank,
                    ranks,
                })
            }
            None => {}
        }
        let matrices: Vec<Operator> = self.observables.iter().map(|o| o.matrix()).collect();
        let projectors = SignVector::all(self.k())
            .map(|s| {
                let p = self.sign_projector(&matrices, &s);
                (s, p)
            })
            .collect();
        Ok(Pvm {
            n: self.n,
            k: self.k(),
            rank: report.expected_rank,
            projectors,
        })
    }
}

impl FromStr for ObservableSet {
    type Err = VsmError;

    /// Comma-separated products, e.g. `"XX,ZZ"`.
    fn from_str(s: &str) -> Result<Self> {
        let observables = s
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<ProductObservable>>>()?;
        ObservableSet::new(observables)
    }
}

impl fmt::Display for ObservableSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, o) in self.observables.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{o}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SetFailure {
    NonCommuting {
        first: usize,
        second: usize,
    },
    Dependent {
        k: usize,
        n: usize,
        ranks: Vec<usize>,
    },
}

#[derive(Clone, Debug)]
pub struct SetReport {
    /// `commutation[a][b]` is true iff observables a and b commute.
    pub commutation: Vec<Vec<bool>>,
    pub non_commuting: Vec<(usize, usize)>,
    /// 2^(N-K), or 0 when K > N.
    pub expected_rank: usize,
    /// Joint projector ranks in canonical sign order; only computed when
    /// every pair commutes.
    pub ranks: Option<Vec<usize>>,
    pub failure: Option<SetFailure>,
}

impl SetReport {
    pub fn accepted(&self) -> bool {
        self.failure.is_none()
    }
}

/// Joint projection-valued measure of a commuting independent set.
#[derive(Clone, Debug)]
pub struct Pvm {
    n: usize,
    k: usize,
    rank: usize,
    projectors: Vec<(SignVector, Operator)>,
}

impl Pvm {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn projectors(&self) -> &[(SignVector, Operator)] {
        &self.projectors
    }

    pub fn projector(&self, signs: &SignVector) -> &Operator {
        &self.projectors[signs.index()].1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(s: &str) -> ProductObservable {
        s.parse().unwrap()
    }

    fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        a.kronecker(b)
    }

    fn letter_matrix(l: PauliLetter) -> DMatrix<Complex64> {
        let m = l.matrix();
        DMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]])
    }

    #[test]
    fn letters_are_hermitian_unitary_traceless_involutions() {
        for l in PauliLetter::ALL {
            let m = letter_matrix(l);
            assert_eq!(m.adjoint(), m);
            assert_eq!(&m * &m, DMatrix::identity(2, 2));
            assert_eq!(m.trace(), ZERO);
        }
    }

    #[test]
    fn commutation_examples() {
        assert!(obs("XX").commutes(&obs("ZZ")).unwrap());
        assert!(!obs("XX").commutes(&obs("ZX")).unwrap());
        assert!(!obs("XYZ").commutes(&obs("YZX")).unwrap());
        assert!(matches!(
            obs("XX").commutes(&obs("XXX")),
            Err(VsmError::Dimension { .. })
        ));
    }

    #[test]
    fn xyz_commutator_is_nonzero() {
        let a = obs("XYZ").matrix();
        let b = obs("YZX").matrix();
        let comm = a.matmul(&b).sub(&b.matmul(&a));
        assert!(comm.matrix().norm() > 1.0);
    }

    #[test]
    fn matrix_examples() {
        let z = obs("Z").matrix();
        assert_eq!(z.matrix()[(0, 0)], ONE);
        assert_eq!(z.matrix()[(1, 1)], -ONE);
        let zz = obs("ZZ").matrix();
        let diag: Vec<f64> = (0..4).map(|i| zz.matrix()[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, -1.0, -1.0, 1.0]);
        assert!(zz.is_hermitian(0.0) && zz.is_unitary(1e-15));

        // element-by-element Kronecker oracle
        let expected = kron(
            &kron(
                &letter_matrix(PauliLetter::X),
                &letter_matrix(PauliLetter::Y),
            ),
            &letter_matrix(PauliLetter::Z),
        );
        assert_eq!(obs("XYZ").matrix().matrix(), &expected);
    }

    #[test]
    fn parsing_is_case_insensitive_and_strict() {
        assert_eq!(obs("xyZ").to_string(), "XYZ");
        assert!("XIZ".parse::<ProductObservable>().is_err());
        assert!("".parse::<ProductObservable>().is_err());
        let set: ObservableSet = "xx, zz".parse().unwrap();
        assert_eq!(set.to_string(), "XX,ZZ");
        assert!("XX,ZZZ".parse::<ObservableSet>().is_err());
    }

    #[test]
    fn sign_vector_order_and_roundtrip() {
        let all: Vec<String> = SignVector::all(2).map(|s| s.to_string()).collect();
        assert_eq!(all, ["++", "+-", "-+", "--"]);
        let s: SignVector = "-+-".parse().unwrap();
        assert_eq!(s.index(), 0b101);
        assert_eq!(SignVector::from_index(5, 3), s);
        assert_eq!(Sign::Minus * Sign::Minus, Sign::Plus);
    }

    #[test]
    fn zz_pvm() {
        let pvm: Pvm = "ZZ".parse::<ObservableSet>().unwrap().joint_pvm().unwrap();
        let plus = pvm.projector(&"+".parse().unwrap()).matrix();
        let minus = pvm.projector(&"-".parse().unwrap()).matrix();
        let d = |m: &DMatrix<Complex64>| (0..4).map(|i| m[(i, i)].re).collect::<Vec<_>>();
        assert_eq!(d(plus), vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(d(minus), vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(pvm.rank(), 2);
    }

    #[test]
    fn bell_pvm_plus_plus_projects_onto_phi_plus() {
        let pvm = "XX,ZZ"
            .parse::<ObservableSet>()
            .unwrap()
            .joint_pvm()
            .unwrap();
        let p = pvm.projector(&"++".parse().unwrap()).matrix();
        let h = Complex64::new(0.5, 0.0);
        let mut expected = DMatrix::from_element(4, 4, ZERO);
        for (r, c) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            expected[(r, c)] = h;
        }
        assert!((p - expected).norm() < 1e-14);
        // eigenvalue-count oracle for the rank of each projector
        for (_, proj) in pvm.projectors() {
            let ones = proj.eigenvalues().iter().filter(|&&e| e > 0.5).count();
            assert_eq!(ones, 1);
        }
    }

    #[test]
    fn validate_examples() {
        let ok = "XX,ZZ".parse::<ObservableSet>().unwrap().validate();
        assert!(ok.accepted());
        assert_eq!(ok.ranks, Some(vec![1, 1, 1, 1]));

        let bad = "XX,ZX".parse::<ObservableSet>().unwrap().validate();
        assert!(!bad.accepted());
        assert_eq!(bad.non_commuting, vec![(0, 1)]);
        assert_eq!(
            bad.failure,
            Some(SetFailure::NonCommuting {
                first: 0,
                second: 1
            })
        );

        let single = "ZZ".parse::<ObservableSet>().unwrap().validate();
        assert!(single.accepted());
        assert_eq!(single.ranks, Some(vec![2, 2]));
    }

    #[test]
    fn dependent_sets_are_rejected() {
        let set: ObservableSet = "XX,ZZ,XX".parse().unwrap();
        assert!(matches!(set.joint_pvm(), Err(VsmError::Dependence { .. })));
        // K <= N but the third is the product of the first two
        let set: ObservableSet = "XXXX,ZZZZ".parse().unwrap();
        assert!(set.validate().accepted());
        let set: ObservableSet = "XXXX,ZZZZ,YYYY".parse().unwrap();
        let report = set.validate();
        assert!(matches!(report.failure, Some(SetFailure::Dependent { .. })));
        assert!(report.ranks.unwrap().contains(&0));
        assert!(matches!(set.joint_pvm(), Err(VsmError::Dependence { .. })));
        let set: ObservableSet = "XX,ZX".parse().unwrap();
        assert!(matches!(
            set.joint_pvm(),
            Err(VsmError::Commutation {
                first: 0,
                second: 1
            })
        ));
    }
}
