//! From link, source and memory configurations to the protocol-level
//! quantities `p_ent`, `τ_h`, `τ_c` and the fidelity curve.

use crate::analytics::{avg_attempts_closed_form, multi_click_probability, ProtocolMetrics};
use crate::availability::{local_click_probability, stationary_availability, AvailabilityChain};
use crate::cutoff::{CutoffMetrics, CutoffParams};
use crate::error::{invalid, Result};
use crate::fidelity::{herald_trace, FidelityCurve};
use crate::link::LinkConfig;
use crate::memory::MemoryConfig;
use crate::source::{Mode, SlotLayout, SourceConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub mode: Mode,
    pub layout: SlotLayout,
    pub p_t: f64,
    /// s
    pub tau_h: f64,
    /// s
    pub tau_c: f64,
    /// Two-sided heralding probability per slot window.
    pub p_suc: f64,
    /// Lone-click probability per station per slot window.
    pub click: f64,
    pub lockout: u64,
    pub pi_00: f64,
    pub p_ent: f64,
    pub curve: FidelityCurve,
}

impl OperatingPoint {
    pub fn derive(link: &LinkConfig, src: &SourceConfig, mem: &MemoryConfig) -> Result<Self> {
        let p_t = link.effective_transmission()?;
        let tau_h = link.heralding_time()?;
        let tau_c = src.attempt_duration();
        let p_suc = herald_trace(src, mem, p_t);
        let click = local_click_probability(src, mem, p_t);
        let chain = AvailabilityChain::from_timing(tau_h, tau_c, click)?;
        let pi_00 = stationary_availability(&chain)?;
        Ok(Self {
            mode: src.mode,
            layout: src.layout(),
            p_t,
            tau_h,
            tau_c,
            p_suc,
            click,
            lockout: chain.lockout_attempts(),
            pi_00,
            p_ent: p_suc * pi_00,
            curve: FidelityCurve::from_model(src, mem, p_t)?,
        })
    }

    /// Metrics with an optional cutoff on the first pair (qubit mode, two pairs).
    pub fn evaluate(&self, t_cut: Option<f64>) -> Result<Evaluation> {
        let base = ProtocolMetrics::evaluate(self.layout, self.p_ent, self.tau_h, self.tau_c, &self.curve)?;
        let Some(t_cut) = t_cut else {
            return Ok(Evaluation {
                avg_attempts: base.avg_attempts,
                rate_hz: base.rate_hz,
                avg_fidelity: base.avg_fidelity,
                multi_click: base.multi_click,
                cutoff: None,
            });
        };
        if self.mode != Mode::Qubit || self.layout.pairs() != 2 {
            return Err(invalid(
                "t_cut",
                "a storage cutoff is only defined for qubit mode with two pairs",
            ));
        }
        let params = CutoffParams::from_time(t_cut, self.layout.slots(), self.tau_c)?;
        let cut = CutoffMetrics::evaluate(params, self.p_ent, self.tau_h, self.tau_c, &self.curve)?;
        Ok(Evaluation {
            avg_attempts: cut.avg_attempts,
            rate_hz: cut.rate_hz,
            avg_fidelity: cut.avg_fidelity,
            multi_click: multi_click_probability(self.layout, self.p_ent)?,
            cutoff: Some(cut),
        })
    }

    /// `⟨A⟩` without cutoff.
    pub fn avg_attempts(&self) -> Result<f64> {
        avg_attempts_closed_form(self.layout, self.p_ent)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub avg_attempts: f64,
    pub rate_hz: f64,
    pub avg_fidelity: f64,
    /// `1 - p_approx`
    pub multi_click: f64,
    pub cutoff: Option<CutoffMetrics>,
}
