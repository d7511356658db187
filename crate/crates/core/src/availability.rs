//! Memory-slot availability under detector lockouts.
//!
//! A station that registers a click without a matching herald from the far
//! side closes the slot and waits the heralding time before resetting it.
//! Per station and per slot this is a renewal chain on `{0, 1, ..., L}`:
//! state 0 is "available", state `k > 0` means `k` locked attempts remain.
//! From 0 a lone click (probability `c`) jumps to `L`; locked states count
//! down deterministically. Stations are treated as independent, so the
//! probability that both ends of a slot are open is `π₀²`.

use crate::error::{invalid, Error, Result};
use crate::memory::MemoryConfig;
use crate::source::SourceConfig;

/// Probability that one station registers at least one click during one
/// photon-pair window of a single slot.
pub fn local_click_probability(src: &SourceConfig, mem: &MemoryConfig, p_t: f64) -> f64 {
    let per_bin = src.lambda * src.lambda * p_t * mem.efficiency + mem.dark_count;
    let none = (1.0 - per_bin).clamp(0.0, 1.0);
    (1.0 - none.powi(src.window_bins() as i32)).clamp(0.0, 1.0)
}

/// Largest chain that will be materialized as a dense matrix.
pub const DENSE_STATE_LIMIT: u64 = 4096;

/// Largest chain whose stationary vector will be materialized.
pub const VECTOR_STATE_LIMIT: u64 = 10_000_000;

const BALANCE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvailabilityChain {
    lockout: u64,
    click: f64,
}

impl AvailabilityChain {
    pub fn new(lockout_attempts: u64, click_probability: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&click_probability) {
            return Err(invalid(
                "p_local_click",
                format!("must be a probability, got {click_probability}"),
            ));
        }
        Ok(Self {
            lockout: lockout_attempts,
            click: click_probability,
        })
    }

    /// Chain whose lockout lasts `ceil(heralding / attempt)` attempts.
    pub fn from_timing(heralding_time: f64, attempt_duration: f64, click_probability: f64) -> Result<Self> {
        if !(attempt_duration > 0.0) {
            return Err(invalid("tau_c", format!("must be > 0, got {attempt_duration}")));
        }
        if !(heralding_time >= 0.0 && heralding_time.is_finite()) {
            return Err(invalid("tau_h", format!("must be >= 0, got {heralding_time}")));
        }
        Self::new(lockout_attempts(heralding_time, attempt_duration), click_probability)
    }

    pub fn lockout_attempts(&self) -> u64 {
        self.lockout
    }

    pub fn click_probability(&self) -> f64 {
        self.click
    }

    pub fn states(&self) -> u64 {
        self.lockout + 1
    }

    /// Non-zero entries of row `state` as `(column, probability)`.
    pub fn transition_row(&self, state: u64) -> Vec<(u64, f64)> {
        match (state, self.lockout) {
            (_, 0) => vec![(0, 1.0)],
            (0, _) if self.click == 0.0 => vec![(0, 1.0)],
            (0, l) if self.click == 1.0 => vec![(l, 1.0)],
            (0, l) => vec![(0, 1.0 - self.click), (l, self.click)],
            (k, _) => vec![(k - 1, 1.0)],
        }
    }

    /// Dense row-stochastic transition matrix.
    pub fn transition_matrix(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.states();
        if n > DENSE_STATE_LIMIT {
            return Err(Error::ResourceLimit {
                required: n,
                limit: DENSE_STATE_LIMIT,
            });
        }
        let n = n as usize;
        let mut m = vec![vec![0.0; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, p) in self.transition_row(i as u64) {
                row[j as usize] += p;
            }
        }
        Ok(m)
    }

    /// Stationary probability of the available state, solved from the
    /// renewal balance equations and checked against them.
    pub fn station_availability(&self) -> Result<f64> {
        let l = self.lockout as f64;
        let pi0 = 1.0 / (1.0 + self.click * l);
        let pi_locked = self.click * pi0;
        // Locked states share π_locked, so only the balance at state 0 and
        // the normalization can fail.
        let inflow = if self.lockout > 0 {
            (1.0 - self.click) * pi0 + pi_locked
        } else {
            pi0
        };
        let balance = (inflow - pi0).abs();
        let total = (pi0 + l * pi_locked - 1.0).abs();
        if !pi0.is_finite() || balance > BALANCE_TOLERANCE || total > BALANCE_TOLERANCE {
            return Err(Error::Numerical {
                diagnostics: format!(
                    "L = {}, c = {}, π₀ = {pi0}, balance residual = {balance:e}, normalization residual = {total:e}",
                    self.lockout, self.click
                ),
            });
        }
        Ok(pi0)
    }

    /// Full stationary vector.
    pub fn stationary_distribution(&self) -> Result<Vec<f64>> {
        let n = self.states();
        if n > VECTOR_STATE_LIMIT {
            return Err(Error::ResourceLimit {
                required: n,
                limit: VECTOR_STATE_LIMIT,
            });
        }
        let pi0 = self.station_availability()?;
        let mut pi = vec![self.click * pi0; n as usize];
        pi[0] = pi0;
        Ok(pi)
    }
}

/// `ceil(heralding / attempt)`, the number of attempts a lone click blocks.
pub fn lockout_attempts(heralding_time: f64, attempt_duration: f64) -> u64 {
    let ratio = heralding_time / attempt_duration;
    // Absorb rounding noise so exact multiples do not round up.
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as u64
    } else {
        ratio.ceil() as u64
    }
}

/// π₍₀,₀₎: both stations' ends of a slot open, stations independent.
pub fn stationary_availability(chain: &AvailabilityChain) -> Result<f64> {
    let pi0 = chain.station_availability()?;
    Ok(pi0 * pi0)
}

/// Stationary distribution of an arbitrary irreducible row-stochastic
/// matrix by Grassmann–Taksar–Heyman elimination (subtraction free).
pub fn stationary_dense(matrix: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = matrix.len();
    if n == 0 || matrix.iter().any(|r| r.len() != n) {
        return Err(invalid("matrix", "must be square and non-empty"));
    }
    for (i, row) in matrix.iter().enumerate() {
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > BALANCE_TOLERANCE || row.iter().any(|&p| !(p >= 0.0)) {
            return Err(invalid("matrix", format!("row {i} is not a probability vector (sum {s})")));
        }
    }
    let mut p: Vec<Vec<f64>> = matrix.to_vec();
    for k in (1..n).rev() {
        let s: f64 = p[k][..k].iter().sum();
        if s <= 0.0 {
            return Err(Error::Numerical {
                diagnostics: format!("chain is reducible: state {k} cannot reach lower states"),
            });
        }
        for i in 0..k {
            p[i][k] /= s;
        }
        for i in 0..k {
            let pik = p[i][k];
            if pik == 0.0 {
                continue;
            }
            for j in 0..k {
                p[i][j] += pik * p[k][j];
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        pi[k] = (0..k).map(|i| pi[i] * p[i][k]).sum();
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    Ok(pi)
}
