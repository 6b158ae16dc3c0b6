//! Monte-Carlo sampling of measurement outcomes.
//!
//! Each trial draws a state index from the priors and then an outcome: conclusive
//! `i` with probability `⟨φ_i|Π_i|φ_i⟩`, inconclusive otherwise. Off-diagonal outcome
//! probabilities of a verified measurement are below round-off and are clipped to
//! zero, so a misidentification can never be drawn.
//!
//! Randomness comes from ChaCha8 (a counter-based stream cipher generator). Trials are
//! split over a fixed number of shards; shard `j` uses the stream `j` of the generator
//! seeded with `seed`, so results depend only on `(ensemble, measurement, trials, seed)`
//! and not on thread scheduling or machine.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::ensemble::{Measurement, StateEnsemble};
use crate::error::{Error, Result};

/// Number of independent streams; fixed so that output does not depend on the host.
pub const SHARDS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimulationResult {
    pub trials: u64,
    pub seed: u64,
    /// `counts[i][k]`: state `i` prepared, outcome `k`; `k = m` is inconclusive.
    pub counts: Vec<Vec<u64>>,
}

impl SimulationResult {
    pub fn num_states(&self) -> usize {
        self.counts.len()
    }

    /// Trials in which state `i` was prepared.
    pub fn prepared(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    /// Correct conclusive outcomes.
    pub fn successes(&self) -> u64 {
        (0..self.num_states()).map(|i| self.counts[i][i]).sum()
    }

    pub fn inconclusive(&self) -> u64 {
        let m = self.num_states();
        self.counts.iter().map(|row| row[m]).sum()
    }

    /// Conclusive outcomes naming the wrong state.
    pub fn misidentifications(&self) -> u64 {
        let m = self.num_states();
        (0..m).map(|i| (0..m).filter(|&k| k != i).map(|k| self.counts[i][k]).sum::<u64>()).sum()
    }

    /// Empirical `P_D`.
    pub fn success_frequency(&self) -> f64 {
        self.successes() as f64 / self.trials as f64
    }

    /// Empirical `p_i`, the success frequency given that state `i` was prepared.
    pub fn state_success_frequency(&self, i: usize) -> f64 {
        let n = self.prepared(i);
        if n == 0 {
            return f64::NAN;
        }
        self.counts[i][i] as f64 / n as f64
    }
}

/// Standard error of a binomial frequency with success probability `p` over `n` trials.
pub fn binomial_standard_error(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Runs `trials` independent preparations and measurements.
pub fn simulate(e: &StateEnsemble, meas: &Measurement, trials: u64, seed: u64) -> Result<SimulationResult> {
    if trials == 0 {
        return Err(Error::InvalidOptions("at least one trial is required".into()));
    }
    let check = meas.check(e)?;
    if !check.valid {
        return Err(Error::InvalidMeasurement(format!(
            "measurement fails verification (detection residual {:.2e}, min eigenvalue of Π_0 {:.2e})",
            check.detection_residual, check.min_inconclusive_eigenvalue
        )));
    }
    let table = meas.outcome_table(e)?;
    let m = e.num_states();
    let success: Vec<f64> = (0..m).map(|i| table[(i, i)].clamp(0.0, 1.0)).collect();
    let states = WeightedIndex::new(e.priors()).map_err(|err| Error::InvalidPriors(err.to_string()))?;

    let per_shard = trials / SHARDS as u64;
    let extra = trials % SHARDS as u64;
    let shards: Vec<Vec<Vec<u64>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..SHARDS)
            .map(|j| {
                let n = per_shard + u64::from((j as u64) < extra);
                let (states, success) = (&states, &success);
                scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(j as u64);
                    let mut counts = vec![vec![0u64; m + 1]; m];
                    for _ in 0..n {
                        let i = states.sample(&mut rng);
                        let k = if rng.random::<f64>() < success[i] { i } else { m };
                        counts[i][k] += 1;
                    }
                    counts
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation shard panicked")).collect()
    });

    let mut counts = vec![vec![0u64; m + 1]; m];
    for shard in shards {
        for (row, srow) in counts.iter_mut().zip(shard) {
            for (c, s) in row.iter_mut().zip(srow) {
                *c += s;
            }
        }
    }
    Ok(SimulationResult { trials, seed, counts })
}
