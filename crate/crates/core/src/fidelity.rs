//! Single-pair fidelity of the heralded memory state, including
//! multi-photon SPDC emission and detector dark counts to fourth order in
//! the squeezing parameter.
//!
//! Every stored pair is scored against the even-parity Bell state. False
//! heralds (extra photons, dark counts) are treated as contributing zero
//! overlap, so the reported fidelity is a lower bound.
//!
//! In qubit mode each memory slot sees a two-bin window, so the expressions
//! are evaluated with a single encoded qubit; in qudit mode with `m`.

use crate::error::{invalid, Result};
use crate::memory::MemoryConfig;
use crate::source::SourceConfig;

/// `2^k p_T² η² λ²`, the single-pair emission-and-storage term.
fn leading_term(src: &SourceConfig, mem: &MemoryConfig, p_t: f64) -> f64 {
    let dim = f64::from(src.window_bins());
    let x = p_t * mem.efficiency * src.lambda;
    dim * x * x
}

/// Depolarizing-channel overlap factor after storing for `t` seconds.
fn decay_bracket(t: f64, mem: &MemoryConfig) -> f64 {
    let a = (-t / mem.coherence_a).exp();
    let b = (-t / mem.coherence_b).exp();
    let e1 = mem.weights.identity;
    (a + (1.0 - a) * e1) * (b + (1.0 - b) * e1)
        + (1.0 - a) * (1.0 - b) * mem.weights.error_square_sum()
}

/// Unnormalized overlap of the stored pair with the Bell target after `t` seconds.
pub fn bell_overlap_numerator(
    t: f64,
    src: &SourceConfig,
    mem: &MemoryConfig,
    p_t: f64,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid("t", format!("storage time must be >= 0, got {t}")));
    }
    Ok(leading_term(src, mem, p_t) * decay_bracket(t, mem))
}

/// Total heralding probability for one photon-pair window, truncated at
/// fourth order in λ. This is `p_suc`.
pub fn herald_trace(src: &SourceConfig, mem: &MemoryConfig, p_t: f64) -> f64 {
    let k = src.encoding_bits() as i32;
    let d = f64::from(src.window_bins());
    let x = p_t * mem.efficiency;
    let y = 1.0 - x;
    let l2 = src.lambda * src.lambda;
    let l4 = l2 * l2;
    let pd = mem.dark_count;
    let half = 2f64.powi(k - 1);
    let double = 2f64.powi(k + 1);

    d * x * x * l2
        + half * (d + 1.0) * x.powi(4) * l4
        + double * x * y * l2 * pd
        + d * (d + 1.0) * x * x * y * y * l4 * (pd + 2.0)
        + double * (d + 1.0) * (x.powi(3) * y * l4 + x * y.powi(3) * l4 * pd)
        + pd * pd * (half * (d + 1.0) * y.powi(4) * l4 + d * y * y * l2 + 1.0)
}

/// Fidelity of a pair stored for `t` seconds.
pub fn pair_fidelity(t: f64, src: &SourceConfig, mem: &MemoryConfig, p_t: f64) -> Result<f64> {
    let num = bell_overlap_numerator(t, src, mem, p_t)?;
    let trace = herald_trace(src, mem, p_t);
    if trace <= 0.0 {
        return Err(crate::Error::UndefinedFidelity);
    }
    Ok(num / trace)
}

/// One `weight · exp(-rate · t)` component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub weight: f64,
    /// 1/s
    pub rate: f64,
}

/// `F(t)` as a finite sum of decaying exponentials.
///
/// Waiting-time averages over geometric attempt counts have closed forms
/// for each exponential, which is what makes the analytic fidelity
/// averages cheap even when millions of attempts are expected.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityCurve {
    terms: Vec<ExpTerm>,
}

impl FidelityCurve {
    pub fn new(terms: Vec<ExpTerm>) -> Self {
        Self { terms }
    }

    /// Builds the curve for the given source, memories and transmission.
    pub fn from_model(src: &SourceConfig, mem: &MemoryConfig, p_t: f64) -> Result<Self> {
        let trace = herald_trace(src, mem, p_t);
        if trace <= 0.0 {
            return Err(crate::Error::UndefinedFidelity);
        }
        let scale = leading_term(src, mem, p_t) / trace;
        let e1 = mem.weights.identity;
        let s = mem.weights.error_square_sum();
        let ra = 1.0 / mem.coherence_a;
        let rb = 1.0 / mem.coherence_b;
        // (e1 + (1-e1)a)(e1 + (1-e1)b) + s(1-a)(1-b), expanded in a = e^{-ra t}, b = e^{-rb t}
        let cross = e1 * (1.0 - e1) - s;
        let terms = vec![
            ExpTerm { weight: scale * (e1 * e1 + s), rate: 0.0 },
            ExpTerm { weight: scale * cross, rate: ra },
            ExpTerm { weight: scale * cross, rate: rb },
            ExpTerm { weight: scale * ((1.0 - e1).powi(2) + s), rate: ra + rb },
        ];
        Ok(Self::new(terms.into_iter().filter(|t| t.weight != 0.0).collect()))
    }

    /// Time-independent curve.
    pub fn constant(value: f64) -> Self {
        Self::new(vec![ExpTerm { weight: value, rate: 0.0 }])
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn at(&self, t: f64) -> f64 {
        self.terms.iter().map(|e| e.weight * (-e.rate * t).exp()).sum()
    }
}
