//! Monte Carlo readout of the full meter record.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::{combine_outcomes, MeasurementModel};
use crate::error::{Result, VsmError};
use crate::pauli::{Sign, SignVector};
use crate::statevec::{fidelity, Ket, KetJson};

/// Generator identity recorded in output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha20Rng (rand_chacha 0.9) seeded with seed_from_u64";

/// Post-states of records in the same sign class must agree to this fidelity.
const POST_STATE_FIDELITY_TOL: f64 = 1e-10;
/// Records below this probability carry no usable post-state.
const NEGLIGIBLE_PROBABILITY: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeRecord {
    /// Local X-basis outcomes, round-major (NK entries).
    pub raw: Vec<Sign>,
    pub signs: SignVector,
    /// Normalized post-measurement system state.
    pub post_state: Ket,
    /// Probability of this exact meter record.
    pub probability: f64,
}

#[derive(Serialize)]
pub struct OutcomeRecordJson {
    pub raw: Vec<i8>,
    pub signs: String,
    pub post_state: KetJson,
    pub probability: f64,
}

impl OutcomeRecord {
    pub fn to_json(&self) -> OutcomeRecordJson {
        OutcomeRecordJson {
            raw: self.raw.iter().map(|s| s.value() as i8).collect(),
            signs: self.signs.to_string(),
            post_state: self.post_state.to_json(),
            probability: self.probability,
        }
    }
}

struct Record {
    raw: Vec<Sign>,
    signs: SignVector,
    probability: f64,
}

/// Precomputed Born distribution over meter records for one model and input
/// state. Draws are sequential on the caller's generator.
pub struct Sampler {
    records: Vec<Record>,
    /// Normalized post-state per sign class (canonical order); `None` when
    /// the class has zero probability.
    post_states: Vec<Option<Ket>>,
    weights: WeightedIndex<f64>,
}

impl Sampler {
    pub fn new(model: &MeasurementModel, system: &Ket) -> Result<Self> {
        if !system.is_normalized(crate::statevec::DEFAULT_TOL) {
            return Err(VsmError::Argument("input state must be normalized".into()));
        }
        let coupled = model.couple(system)?;
        let branches = model.meter_branches(&coupled)?;
        let mut post_states: Vec<Option<Ket>> = vec![None; 1 << model.k()];
        let mut records = Vec::with_capacity(branches.len());
        for (raw, branch) in branches {
            let signs = combine_outcomes(&raw, model.k(), model.n())?;
            let probability = branch.norm_sqr();
            if probability > NEGLIGIBLE_PROBABILITY {
                let post = branch.normalized()?;
                match &post_states[signs.index()] {
                    None => post_states[signs.index()] = Some(post),
                    Some(rep) => {
                        let f = fidelity(rep, &post)?;
                        if f < 1.0 - POST_STATE_FIDELITY_TOL {
                            return Err(VsmError::Consistency(format!(
                                "post-states for signs {signs} disagree (fidelity {f})"
                            )));
                        }
                    }
                }
            }
            records.push(Record {
                raw,
                signs,
                probability,
            });
        }
        let weights = WeightedIndex::new(records.iter().map(|r| r.probability))
            .map_err(|e| VsmError::Consistency(format!("invalid record distribution: {e}")))?;
        Ok(Self {
            records,
            post_states,
            weights,
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> OutcomeRecord {
        let record = &self.records[self.weights.sample(rng)];
        OutcomeRecord {
            raw: record.raw.clone(),
            signs: record.signs.clone(),
            post_state: self.post_states[record.signs.index()]
                .clone()
                .expect("sampled classes have positive probability"),
            probability: record.probability,
        }
    }

    /// Draws only the combined sign vector (index in canonical order).
    pub fn draw_signs<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.records[self.weights.sample(rng)].signs.index()
    }

    pub fn post_state(&self, signs: &SignVector) -> Option<&Ket> {
        self.post_states[signs.index()].as_ref()
    }

    /// Total probability of each sign class, canonical order.
    pub fn class_probabilities(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.post_states.len()];
        for r in &self.records {
            p[r.signs.index()] += r.probability;
        }
        p
    }
}

pub fn rng_from_seed(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// One full meter record drawn with a fresh generator seeded by `seed`.
pub fn sample(model: &MeasurementModel, system: &Ket, seed: u64) -> Result<OutcomeRecord> {
    let sampler = Sampler::new(model, system)?;
    Ok(sampler.draw(&mut rng_from_seed(seed)))
}

/// Counts of each sign vector over `samples` draws from one seeded stream.
pub fn sample_counts(
    model: &MeasurementModel,
    system: &Ket,
    seed: u64,
    samples: u64,
) -> Result<Vec<(SignVector, u64)>> {
    let sampler = Sampler::new(model, system)?;
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![0u64; 1 << model.k()];
    for _ in 0..samples {
        counts[sampler.draw_signs(&mut rng)] += 1;
    }
    Ok(SignVector::all(model.k()).zip(counts).collect())
}
