use std::collections::BTreeMap;

use serde::Serialize;

use super::{combine_outcomes, MeasurementModel};
use crate::error::{Result, VsmError};
use crate::pauli::{Pvm, SignVector};
use crate::statevec::{inner, Ket, MatrixJson, Operator, DEFAULT_TOL};

/// Measurement operators `M_s`, one per sign vector, each standing for
/// `multiplicity` meter records.
#[derive(Clone, Debug)]
pub struct KrausSet {
    n: usize,
    k: usize,
    multiplicity: usize,
    operators: Vec<(SignVector, Operator)>,
}

impl KrausSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn multiplicity(&self) -> usize {
        self.multiplicity
    }

    pub fn operators(&self) -> &[(SignVector, Operator)] {
        &self.operators
    }

    pub fn operator(&self, signs: &SignVector) -> &Operator {
        &self.operators[signs.index()].1
    }

    /// `max |multiplicity * sum_s M_s^dag M_s - I|`.
    pub fn completeness_error(&self) -> f64 {
        let sum = self
            .operators
            .iter()
            .fold(Operator::zeros(self.n), |acc, (_, m)| {
                acc.add(&m.adjoint().matmul(m))
            })
            .scale_real(self.multiplicity as f64);
        sum.max_abs_diff(&Operator::identity(self.n))
    }

    /// Largest entrywise difference between matching operators.
    pub fn max_abs_diff(&self, other: &KrausSet) -> f64 {
        assert_eq!(self.operators.len(), other.operators.len());
        self.operators
            .iter()
            .zip(&other.operators)
            .map(|((sa, a), (sb, b))| {
                assert_eq!(sa, sb);
                a.max_abs_diff(b)
            })
            .fold(0.0, f64::max)
    }

    /// `E_s = multiplicity * M_s^dag M_s`.
    pub fn effects(&self) -> Povm {
        let mult = self.multiplicity as f64;
        Povm {
            n: self.n,
            k: self.k,
            effects: self
                .operators
                .iter()
                .map(|(s, m)| (s.clone(), m.adjoint().matmul(m).scale_real(mult)))
                .collect(),
        }
    }

    /// `max_s |sqrt(multiplicity) M_s - sqrt(E_s)|` with the principal root;
    /// zero for a minimally disturbing (Lüders) instrument.
    /// Largest deviation of `sqrt(multiplicity) M_s` from the positive root
    /// of `E_s`: the mismatch of its square against `E_s`, or how far it is
    /// from Hermitian or positive, whichever is worst.
    pub fn luders_deviation(&self, povm: &Povm) -> f64 {
        let scale = (self.multiplicity as f64).sqrt();
        let mut worst = 0.0f64;
        for ((s, m), (se, e)) in self.operators.iter().zip(povm.effects()) {
            assert_eq!(s, se);
            let root = m.scale_real(scale);
            worst = worst
                .max(root.matmul(&root).max_abs_diff(e))
                .max(root.max_abs_diff(&root.adjoint()))
                .max(-root.min_eigenvalue());
        }
        worst
    }

    pub fn to_json(&self) -> KrausJson {
        KrausJson {
            multiplicity: self.multiplicity,
            operators: self
                .operators
                .iter()
                .map(|(s, m)| (s.to_string(), m.to_json()))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KrausJson {
    pub multiplicity: usize,
    pub operators: BTreeMap<String, MatrixJson>,
}

/// Effects `E_s` keyed by sign vector in canonical order.
#[derive(Clone, Debug)]
pub struct Povm {
    n: usize,
    k: usize,
    effects: Vec<(SignVector, Operator)>,
}

/// Least-squares fit of effects to `(1/d)(I + s (d P_s - I))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VsmFit {
    pub strength: f64,
    /// Largest entrywise deviation from the fitted linear form.
    pub residual: f64,
}

impl Povm {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn effects(&self) -> &[(SignVector, Operator)] {
        &self.effects
    }

    pub fn effect(&self, signs: &SignVector) -> &Operator {
        &self.effects[signs.index()].1
    }

    pub fn completeness_error(&self) -> f64 {
        self.effects
            .iter()
            .fold(Operator::zeros(self.n), |acc, (_, e)| acc.add(e))
            .max_abs_diff(&Operator::identity(self.n))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.effects
            .iter()
            .map(|(_, e)| e.min_eigenvalue())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.completeness_error() <= tol
            && self.effects.iter().all(|(_, e)| e.is_hermitian(tol))
            && self.min_eigenvalue() >= -tol
    }

    pub fn vsm_fit(&self, pvm: &Pvm) -> VsmFit {
        let d = self.effects.len() as f64;
        let id = Operator::identity(self.n).scale_real(1.0 / d);
        let mut num = 0.0;
        let mut den = 0.0;
        for (s, e) in &self.effects {
            let a = e.sub(&id);
            let b = pvm.projector(s).sub(&id);
            num += a.matrix().dotc(b.matrix()).re;
            den += b.matrix().norm_squared();
        }
        let strength = num / den;
        let residual = self
            .effects
            .iter()
            .map(|(s, e)| {
                let fitted = id.add(&pvm.projector(s).sub(&id).scale_real(strength));
                e.max_abs_diff(&fitted)
            })
            .fold(0.0, f64::max);
        VsmFit { strength, residual }
    }

    /// Simplex coordinates of each effect over the PVM vertices:
    /// `c_j = Tr(E_i P_j) / rank`. Each row sums to 1 for a complete POVM.
    pub fn barycentric(&self, pvm: &Pvm) -> Vec<(SignVector, Vec<f64>)> {
        let rank = pvm.rank() as f64;
        self.effects
            .iter()
            .map(|(s, e)| {
                let coords = pvm
                    .projectors()
                    .iter()
                    .map(|(_, p)| e.matmul(p).trace().re / rank)
                    .collect();
                (s.clone(), coords)
            })
            .collect()
    }

    /// Born probabilities `<psi|E_s|psi>`.
    pub fn probabilities(&self, psi: &Ket) -> Result<Vec<(SignVector, f64)>> {
        if psi.n() != self.n {
            return Err(VsmError::Dimension {
                expected: self.n,
                found: psi.n(),
            });
        }
        self.effects
            .iter()
            .map(|(s, e)| Ok((s.clone(), inner(psi, &e.apply(psi)?)?.re)))
            .collect()
    }

    pub fn to_json(&self) -> BTreeMap<String, MatrixJson> {
        self.effects
            .iter()
            .map(|(s, e)| (s.to_string(), e.to_json()))
            .collect()
    }
}

impl MeasurementModel {
    /// Extracts the measurement operators by simulating the circuit on every
    /// system basis state and projecting the meter onto each X-basis record.
    /// Records with the same combined signs must yield identical operators.
    pub fn kraus_bruteforce(&self) -> Result<KrausSet> {
        let (n, k) = (self.n(), self.k());
        let dim = 1usize << n;
        let records = 1usize << (n * k);
        // columns[record][basis] = conditional system vector
        let mut columns: Vec<Vec<Ket>> = vec![Vec::with_capacity(dim); records];
        let mut raws = Vec::with_capacity(records);
        for basis in 0..dim {
            let coupled = self.couple(&Ket::basis(n, basis)?)?;
            for (r, (raw, branch)) in self.meter_branches(&coupled)?.into_iter().enumerate() {
                if basis == 0 {
                    raws.push(raw);
                }
                columns[r].push(branch);
            }
        }

        let mut groups: Vec<Option<Operator>> = vec![None; 1 << k];
        let mut counts = vec![0usize; 1 << k];
        for (raw, cols) in raws.iter().zip(columns) {
            let signs = combine_outcomes(raw, k, n)?;
            let mut op = Operator::zeros(n).into_matrix();
            for (c, ket) in cols.iter().enumerate() {
                for (r, a) in ket.amplitudes().iter().enumerate() {
                    op[(r, c)] = *a;
                }
            }
            let op = Operator::from_matrix(op)?;
            let slot = signs.index();
            counts[slot] += 1;
            match &groups[slot] {
                None => groups[slot] = Some(op),
                Some(rep) => {
                    let diff = rep.max_abs_diff(&op);
                    if diff > DEFAULT_TOL {
                        return Err(VsmError::Consistency(format!(
                            "meter records with signs {signs} give operators differing by {diff:e}"
                        )));
                    }
                }
            }
        }
        let multiplicity = self.multiplicity();
        if let Some(c) = counts.iter().find(|&&c| c != multiplicity) {
            return Err(VsmError::Consistency(format!(
                "sign class has {c} records, expected {multiplicity}"
            )));
        }
        Ok(KrausSet {
            n,
            k,
            multiplicity,
            operators: SignVector::all(k)
                .zip(groups)
                .map(|(s, op)| (s, op.expect("every class is populated")))
                .collect(),
        })
    }

    /// `M_s = 2^(-K(N-1)/2) [cos(theta) P_s + sin(theta)/sqrt(2^K - 1) (I - P_s)]`.
    pub fn kraus_closed_form(&self) -> KrausSet {
        let (n, k) = (self.n(), self.k());
        let (sin, cos) = self.theta().sin_cos();
        let others = sin / (((1u64 << k) - 1) as f64).sqrt();
        let prefactor = 2f64.powf(-((k * (n - 1)) as f64) / 2.0);
        let id = Operator::identity(n);
        let operators = self
            .pvm()
            .projectors()
            .iter()
            .map(|(s, p)| {
                let m = p
                    .scale_real(cos)
                    .add(&id.sub(p).scale_real(others))
                    .scale_real(prefactor);
                (s.clone(), m)
            })
            .collect();
        KrausSet {
            n,
            k,
            multiplicity: self.multiplicity(),
            operators,
        }
    }

    /// Effects of the closed-form instrument,
    /// `E_s = cos^2(theta) P_s + sin^2(theta)/(2^K - 1) (I - P_s)`.
    pub fn povm(&self) -> Povm {
        self.kraus_closed_form().effects()
    }

    pub fn outcome_distribution(&self, system: &Ket) -> Result<Vec<(SignVector, f64)>> {
        self.povm().probabilities(system)
    }

    /// Effects written directly from the closed formula, without going
    /// through the Kraus operators.
    pub fn povm_formula(&self) -> Povm {
        let k = self.k();
        let (sin, cos) = self.theta().sin_cos();
        let id = Operator::identity(self.n());
        let others = sin * sin / (((1u64 << k) - 1) as f64);
        Povm {
            n: self.n(),
            k,
            effects: self
                .pvm()
                .projectors()
                .iter()
                .map(|(s, p)| {
                    (
                        s.clone(),
                        p.scale_real(cos * cos).add(&id.sub(p).scale_real(others)),
                    )
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meter::{strength, uniform_theta};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

    fn model(obs: &str, theta: f64) -> MeasurementModel {
        MeasurementModel::new(obs.parse().unwrap(), theta, None).unwrap()
    }

    #[test]
    fn zz_has_two_operators_each_twice() {
        let m = model("ZZ", 0.4);
        let k = m.kraus_bruteforce().unwrap();
        assert_eq!(k.operators().len(), 2);
        assert_eq!(k.multiplicity(), 2);
        assert!(k.completeness_error() < 1e-12);
    }

    #[test]
    fn bell_model_has_four_operators_each_four_times() {
        let m = model("XX,ZZ", 0.4);
        let k = m.kraus_bruteforce().unwrap();
        assert_eq!(k.operators().len(), 4);
        assert_eq!(k.multiplicity(), 4);
        assert!(k.max_abs_diff(&m.kraus_closed_form()) < 1e-12);
    }

    #[test]
    fn uniform_point_operators_are_scalar() {
        for obs in ["XYZ", "XX,ZZ", "XXX,ZZX"] {
            let m = MeasurementModel::new(obs.parse().unwrap(), 0.0, None).unwrap();
            let m =
                MeasurementModel::new(m.observables().clone(), uniform_theta(m.k()), None).unwrap();
            let kraus = m.kraus_bruteforce().unwrap();
            let first = kraus.operators()[0].1.matrix()[(0, 0)];
            for (_, op) in kraus.operators() {
                let scalar = Operator::identity(m.n()).scale(first);
                assert!(op.max_abs_diff(&scalar) < 1e-12);
            }
        }
    }

    #[test]
    fn k1_closed_form_matches_written_operator() {
        // M_pm = 2^{-(N-1)/2}{cos P_pm + sin (I - P_pm)}
        let theta = 0.9;
        let m = model("XYZ", theta);
        let (s, c) = theta.sin_cos();
        let id = Operator::identity(3);
        for (signs, p) in m.pvm().projectors() {
            let expected = p
                .scale_real(c)
                .add(&id.sub(p).scale_real(s))
                .scale_real(0.5);
            assert!(
                m.kraus_closed_form()
                    .operator(signs)
                    .max_abs_diff(&expected)
                    < 1e-15
            );
        }
    }

    #[test]
    fn theta_zero_bell_operators_are_half_projectors() {
        let m = model("XX,ZZ", 0.0);
        let k = m.kraus_closed_form();
        for (s, op) in k.operators() {
            assert!(op.max_abs_diff(&m.pvm().projector(s).scale_real(0.5)) < 1e-15);
        }
        assert!(k.completeness_error() < 1e-15);
    }

    #[test]
    fn effects_match_formula_and_are_luders() {
        for obs in ["X", "XY", "XX,ZZ", "XYZ,ZXZ"] {
            for i in 0..7 {
                let theta = i as f64 * FRAC_PI_2 / 6.0;
                let m = model(obs, theta);
                let povm = m.povm();
                let reference = m.povm_formula();
                for ((_, a), (_, b)) in povm.effects().iter().zip(reference.effects()) {
                    assert!(a.max_abs_diff(b) < 1e-12);
                }
                assert!(povm.is_valid(1e-10));
                let kraus = m.kraus_closed_form();
                assert!(kraus.luders_deviation(&povm) < 1e-12);
            }
        }
    }

    #[test]
    fn theta_zero_effects_are_projectors() {
        let m = model("ZZ", 0.0);
        for (s, e) in m.povm().effects() {
            assert!(e.max_abs_diff(m.pvm().projector(s)) < 1e-15);
        }
    }

    #[test]
    fn vsm_fit_recovers_strength() {
        for obs in ["ZZ", "XX,ZZ", "XXX,ZZX"] {
            let m = model(obs, 0.3);
            let fit = m.povm().vsm_fit(m.pvm());
            assert!((fit.strength - strength(m.k(), 0.3)).abs() < 1e-12);
            assert!(fit.residual < 1e-12);
        }
    }

    #[test]
    fn barycentric_rows_sum_to_one() {
        let m = model("XX,ZZ", FRAC_PI_6);
        for (s, coords) in m.povm().barycentric(m.pvm()) {
            assert!((coords.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let c = FRAC_PI_6.cos().powi(2);
            assert!((coords[s.index()] - c).abs() < 1e-12);
        }
    }

    #[test]
    fn distribution_examples() {
        let bell = Ket::from_real(&[
            std::f64::consts::FRAC_1_SQRT_2,
            0.0,
            0.0,
            std::f64::consts::FRAC_1_SQRT_2,
        ])
        .unwrap();
        let d = model("XX,ZZ", 0.0).outcome_distribution(&bell).unwrap();
        assert!((d[0].1 - 1.0).abs() < 1e-15);
        assert_eq!(d[0].0.to_string(), "++");

        let d = model("XX,ZZ", uniform_theta(2))
            .outcome_distribution(&Ket::from_label("0+").unwrap())
            .unwrap();
        for (_, p) in &d {
            assert!((p - 0.25).abs() < 1e-12);
        }

        let theta = 0.7;
        let d = model("XX,ZZ", theta).outcome_distribution(&bell).unwrap();
        let total: f64 = d.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((d[0].1 - theta.cos().powi(2)).abs() < 1e-12);
        for (_, p) in &d[1..] {
            assert!((p - theta.sin().powi(2) / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn json_keys_are_sign_strings() {
        let m = model("XX,ZZ", 0.2);
        let json = serde_json::to_value(m.povm().to_json()).unwrap();
        let keys: Vec<&String> = json.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["++", "+-", "-+", "--"]);
        assert_eq!(json["++"]["re"].as_array().unwrap().len(), 4);
    }
}
