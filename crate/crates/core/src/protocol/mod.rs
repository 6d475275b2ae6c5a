//! The indirect measurement: couple a system to a K-fold GHZ-like meter with
//! local controlled-Pauli gates, read every meter qubit in the X basis, and
//! multiply the local outcomes round by round.
//!
//! Qubit layout of the coupled register: system qubits `0..N` first, then
//! meter qubit `(k, n)` at `N + k*N + n` (round-major).

mod kraus;
mod qudit;
mod sampling;

pub use kraus::{KrausSet, Povm, VsmFit};
pub use qudit::{
    qudit_effects_bruteforce, qudit_kraus_bruteforce, qudit_meter, qudit_strength, qudit_vsm,
    QuditVsm,
};
pub use sampling::{
    rng_from_seed, sample, sample_counts, OutcomeRecord, OutcomeRecordJson, Sampler, RNG_ALGORITHM,
};

use serde::{Deserialize, Serialize};

use crate::error::{Result, VsmError};
use crate::meter::{kfold_meter, MeterSpec};
use crate::pauli::{ObservableSet, Pvm, Sign, SignVector};
use crate::statevec::{apply_controlled, project_x, tensor, Ket};

/// Qubit layout string recorded in every emitted artifact.
pub const QUBIT_ORDER: &str =
    "big-endian: qubit 0 is the most significant index bit; coupled register = system[0..N] then meter round-major (N + k*N + n)";

/// Full configuration of one indirect measurement.
#[derive(Clone, Debug)]
pub struct MeasurementModel {
    set: ObservableSet,
    pvm: Pvm,
    meter: MeterSpec,
    /// 0-based permutation of rounds; the same order is used on every site.
    order: Vec<usize>,
}

impl MeasurementModel {
    pub fn new(set: ObservableSet, theta: f64, order: Option<Vec<usize>>) -> Result<Self> {
        let pvm = set.joint_pvm()?;
        let meter = MeterSpec::new(set.k(), set.n(), theta)?;
        let k = set.k();
        let order = order.unwrap_or_else(|| (0..k).collect());
        let mut seen = vec![false; k];
        if order.len() != k
            || !order
                .iter()
                .all(|&r| r < k && !std::mem::replace(&mut seen[r], true))
        {
            return Err(VsmError::Argument(format!(
                "coupling order {order:?} is not a permutation of 0..{k}"
            )));
        }
        Ok(Self {
            set,
            pvm,
            meter,
            order,
        })
    }

    pub fn from_json(json: &ModelJson) -> Result<Self> {
        let set: ObservableSet = json.observables.join(",").parse()?;
        let order = match &json.order {
            None => None,
            Some(o) => Some(
                o.iter()
                    .map(|&r| {
                        r.checked_sub(1)
                            .ok_or_else(|| VsmError::Parse("coupling order is 1-based".into()))
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        Self::new(set, json.theta, order)
    }

    pub fn to_json(&self) -> ModelJson {
        ModelJson {
            observables: self
                .set
                .observables()
                .iter()
                .map(|o| o.to_string())
                .collect(),
            theta: self.theta(),
            order: Some(self.order.iter().map(|r| r + 1).collect()),
        }
    }

    pub fn observables(&self) -> &ObservableSet {
        &self.set
    }

    pub fn pvm(&self) -> &Pvm {
        &self.pvm
    }

    pub fn meter(&self) -> &MeterSpec {
        &self.meter
    }

    pub fn n(&self) -> usize {
        self.set.n()
    }

    pub fn k(&self) -> usize {
        self.set.k()
    }

    pub fn theta(&self) -> f64 {
        self.meter.theta()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn strength(&self) -> f64 {
        self.meter.strength()
    }

    pub fn vsm_compliant(&self) -> bool {
        self.meter.vsm_compliant()
    }

    /// Number of meter records sharing each sign vector: `2^(K(N-1))`.
    pub fn multiplicity(&self) -> usize {
        1usize << (self.k() * (self.n() - 1))
    }

    pub fn meter_qubit(&self, round: usize, site: usize) -> usize {
        self.n() + round * self.n() + site
    }

    /// `system (x) meter` followed by controlled `O_{k,n}` gates (meter qubit
    /// `(k, n)` controls system qubit `n`), rounds in coupling order.
    pub fn couple(&self, system: &Ket) -> Result<Ket> {
        if system.n() != self.n() {
            return Err(VsmError::Dimension {
                expected: self.n(),
                found: system.n(),
            });
        }
        let mut state = tensor(&[system.clone(), kfold_meter(&self.meter)?])?;
        for site in 0..self.n() {
            for &round in &self.order {
                let letter = self.set.observables()[round].letter(site);
                state = apply_controlled(letter, self.meter_qubit(round, site), site, &state)?;
            }
        }
        Ok(state)
    }

    /// Splits a coupled state over every X-basis meter record. Records come
    /// out in lexicographic order of the raw outcomes (first meter qubit
    /// slowest, `+` before `-`); each carries the unnormalized system branch.
    pub fn meter_branches(&self, coupled: &Ket) -> Result<Vec<(Vec<Sign>, Ket)>> {
        let meter_qubits = self.n() * self.k();
        if coupled.n() != self.n() + meter_qubits {
            return Err(VsmError::Dimension {
                expected: self.n() + meter_qubits,
                found: coupled.n(),
            });
        }
        let mut out = Vec::with_capacity(1 << meter_qubits);
        let mut raw = Vec::with_capacity(meter_qubits);
        self.branch(coupled, meter_qubits, &mut raw, &mut out)?;
        Ok(out)
    }

    fn branch(
        &self,
        state: &Ket,
        remaining: usize,
        raw: &mut Vec<Sign>,
        out: &mut Vec<(Vec<Sign>, Ket)>,
    ) -> Result<()> {
        if remaining == 0 {
            out.push((raw.clone(), state.clone()));
            return Ok(());
        }
        // The next unread meter qubit always sits right after the system.
        for sign in [Sign::Plus, Sign::Minus] {
            let (projected, _) = project_x(state, self.n(), sign)?;
            raw.push(sign);
            self.branch(&projected, remaining - 1, raw, out)?;
            raw.pop();
        }
        Ok(())
    }
}

/// `{"observables": ["XX","ZZ"], "theta": 0.5235987755982988, "order": [1,2]}`
/// with a 1-based coupling order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub observables: Vec<String>,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<usize>>,
}

/// Per-round products of the raw local outcomes; `raw` is round-major.
pub fn combine_outcomes(raw: &[Sign], k: usize, n: usize) -> Result<SignVector> {
    if raw.len() != n * k {
        return Err(VsmError::Dimension {
            expected: n * k,
            found: raw.len(),
        });
    }
    if n == 0 {
        return Err(VsmError::Argument("N must be at least 1".into()));
    }
    Ok(SignVector::new(
        raw.chunks(n)
            .map(|round| round.iter().fold(Sign::Plus, |acc, &s| acc * s))
            .collect(),
    ))
}
