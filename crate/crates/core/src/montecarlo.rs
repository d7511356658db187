//! Event-driven Monte Carlo of the collection protocol.
//!
//! Every slot carries two lockout chains, one per station. A chain is
//! autonomous: while its end of the slot is open it clicks alone with
//! probability `c` per attempt and then stays closed for `L` attempts,
//! independent of whether the slot currently holds a pair. When both ends
//! are open a two-sided herald occurs with probability `p_suc`. A trial
//! collects `N` pairs, keeping one herald per attempt and discarding the
//! rest; with a cutoff, the stored pairs are dropped when the window after
//! the first pair closes. Trials follow each other on one continuous
//! timeline, starting from the stationary lockout state.
//!
//! Only event times are visited: gaps between events are drawn from
//! geometric distributions, so runs with millions of attempts per trial
//! stay cheap. Fidelity is attached through `F(storage time)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;

use crate::availability::AvailabilityChain;
use crate::cutoff::CutoffParams;
use crate::error::{invalid, Error, Result};
use crate::fidelity::FidelityCurve;
use crate::link::LinkConfig;
use crate::memory::MemoryConfig;
use crate::operating::OperatingPoint;
use crate::source::{SlotLayout, SourceConfig};

/// Identifier of the only supported generator.
pub const CHACHA8: &str = "chacha8";

/// Default number of independent partitions a batch is split into.
pub const DEFAULT_PARTITIONS: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngSpec {
    pub seed: u64,
    pub algorithm: String,
}

impl RngSpec {
    pub fn chacha8(seed: u64) -> Self {
        Self {
            seed,
            algorithm: CHACHA8.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithm != CHACHA8 {
            return Err(invalid(
                "rng.algorithm",
                format!("unsupported generator `{}`, expected `{CHACHA8}`", self.algorithm),
            ));
        }
        Ok(())
    }

    /// ChaCha8 keyed by the seed, one stream per partition.
    fn stream(&self, partition: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(partition);
        rng
    }
}

impl Default for RngSpec {
    fn default() -> Self {
        Self::chacha8(0)
    }
}

/// Attempt-level description of the simulated process.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessParams {
    pub layout: SlotLayout,
    /// Two-sided herald probability per open slot-attempt.
    pub p_suc: f64,
    /// Lone-click probability per station per slot-attempt.
    pub click: f64,
    pub lockout: u64,
    /// s
    pub tau_h: f64,
    /// s
    pub tau_c: f64,
    pub curve: FidelityCurve,
    /// `N_cut`: later pairs must arrive within `N_cut - 1` attempts of the first.
    pub cutoff: Option<u64>,
}

impl ProcessParams {
    pub fn from_point(point: &OperatingPoint, t_cut: Option<f64>) -> Result<Self> {
        let cutoff = match t_cut {
            None => None,
            Some(t) => Some(CutoffParams::from_time(t, point.layout.slots(), point.tau_c)?.n_cut()),
        };
        Ok(Self {
            layout: point.layout,
            p_suc: point.p_suc,
            click: point.click,
            lockout: point.lockout,
            tau_h: point.tau_h,
            tau_c: point.tau_c,
            curve: point.curve.clone(),
            cutoff,
        })
    }

    /// Stationary probability that both ends of a slot are open.
    pub fn analytic_availability(&self) -> f64 {
        let pi0 = 1.0 / (1.0 + self.click * self.lockout as f64);
        pi0 * pi0
    }

    pub fn analytic_p_ent(&self) -> f64 {
        self.p_suc * self.analytic_availability()
    }

    fn validate(&self) -> Result<()> {
        if !(self.p_suc > 0.0 && self.p_suc <= 1.0) {
            return Err(Error::NoProgress(format!(
                "herald probability must be in (0, 1], got {}",
                self.p_suc
            )));
        }
        if !(0.0..=1.0).contains(&self.click) {
            return Err(invalid("click", format!("must be a probability, got {}", self.click)));
        }
        if !(self.tau_c > 0.0) || !(self.tau_h >= 0.0) {
            return Err(invalid("tau", "need tau_c > 0 and tau_h >= 0"));
        }
        if let Some(n) = self.cutoff {
            if n < 2 {
                return Err(Error::InvalidCutoff { n_cut: n });
            }
        }
        Ok(())
    }
}

/// One simulated collection of `N` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub total_attempts: u64,
    /// 1-based attempt of each kept pair, counted from the trial start.
    pub per_pair_success_attempt: Vec<u64>,
    /// s
    pub per_pair_storage_time: Vec<f64>,
    /// Cutoff expiries that dropped stored pairs.
    pub discard_events: u64,
    /// Extra heralds thrown away because another slot heralded in the same attempt.
    pub multi_click_discards: u64,
    pub sampled_fidelities: Vec<f64>,
    /// Slot-attempts with both ends open, over all `D` slots.
    pub open_slot_attempts: u64,
}

impl TrialRecord {
    pub fn mean_fidelity(&self) -> f64 {
        self.sampled_fidelities.iter().sum::<f64>() / self.sampled_fidelities.len() as f64
    }

    pub fn had_multi_click(&self) -> bool {
        self.multi_click_discards > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Pending {
    /// Something happens while both ends are open.
    Both,
    /// Only the given end is open and clicks.
    One(End),
    /// An end reopens; nothing happens by itself.
    Reopen,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum End {
    A,
    B,
}

struct Regimes {
    both: Geometric,
    any_both: f64,
    one: Geometric,
    p_suc: f64,
    click: f64,
    lockout: u64,
}

impl Regimes {
    fn new(p: &ProcessParams) -> Result<Self> {
        let ln_quiet = (-p.p_suc).ln_1p() + 2.0 * (-p.click).ln_1p();
        let any_both = -ln_quiet.exp_m1();
        let geometric = |x: f64| {
            Geometric::new(x).map_err(|e| invalid("probability", format!("{e}: {x}")))
        };
        Ok(Self {
            both: geometric(any_both)?,
            any_both,
            one: geometric(p.click)?,
            p_suc: p.p_suc,
            click: p.click,
            lockout: p.lockout,
        })
    }
}

struct Slot {
    open_a: u64,
    open_b: u64,
    next: u64,
    pending: Pending,
    /// Start of the current both-open stretch not yet counted.
    open_since: Option<u64>,
    open_count: u64,
}

impl Slot {
    fn stationary(now: u64, regimes: &Regimes, rng: &mut ChaCha8Rng) -> Self {
        let pi0 = 1.0 / (1.0 + regimes.click * regimes.lockout as f64);
        let mut end = || {
            if regimes.lockout == 0 || rng.random::<f64>() < pi0 {
                now
            } else {
                now + rng.random_range(1..=regimes.lockout)
            }
        };
        let (open_a, open_b) = (end(), end());
        let mut slot = Slot {
            open_a,
            open_b,
            next: now,
            pending: Pending::Reopen,
            open_since: None,
            open_count: 0,
        };
        slot.schedule(now, regimes, rng);
        slot
    }

    fn schedule(&mut self, from: u64, regimes: &Regimes, rng: &mut ChaCha8Rng) {
        let a = from >= self.open_a;
        let b = from >= self.open_b;
        match (a, b) {
            (true, true) => {
                if self.open_since.is_none() {
                    self.open_since = Some(from);
                }
                self.next = from.saturating_add(regimes.both.sample(rng));
                self.pending = Pending::Both;
            }
            (true, false) | (false, true) => {
                let (end, reopen) = if a { (End::A, self.open_b) } else { (End::B, self.open_a) };
                let at = from.saturating_add(regimes.one.sample(rng));
                if at < reopen {
                    self.next = at;
                    self.pending = Pending::One(end);
                } else {
                    self.next = reopen;
                    self.pending = Pending::Reopen;
                }
            }
            (false, false) => {
                self.next = self.open_a.min(self.open_b);
                self.pending = Pending::Reopen;
            }
        }
    }

    fn close(&mut self, end: End, at: u64, lockout: u64) {
        let reopen = at + lockout + 1;
        match end {
            End::A => self.open_a = reopen,
            End::B => self.open_b = reopen,
        }
    }

    /// Handles the pending event; returns true on a two-sided herald.
    fn fire(&mut self, regimes: &Regimes, rng: &mut ChaCha8Rng) -> bool {
        let t = self.next;
        match self.pending {
            Pending::Reopen => {
                self.schedule(t, regimes, rng);
                false
            }
            Pending::One(end) => {
                self.close(end, t, regimes.lockout);
                self.schedule(t + 1, regimes, rng);
                false
            }
            Pending::Both => {
                let c = regimes.click;
                // Outcome conditioned on at least one of herald, click A, click B.
                let herald = rng.random::<f64>() * regimes.any_both < regimes.p_suc;
                let (a, b) = if herald {
                    (rng.random_bool(c), rng.random_bool(c))
                } else if rng.random::<f64>() * (2.0 - c) < 1.0 {
                    (true, rng.random_bool(c))
                } else {
                    (false, true)
                };
                if a || b {
                    self.count_open(t);
                }
                if a {
                    self.close(End::A, t, regimes.lockout);
                }
                if b {
                    self.close(End::B, t, regimes.lockout);
                }
                self.schedule(t + 1, regimes, rng);
                herald
            }
        }
    }

    /// Counts open attempts up to and including `until`.
    fn count_open(&mut self, until: u64) {
        if let Some(start) = self.open_since.take() {
            if start <= until {
                self.open_count += until + 1 - start;
            }
            if start > until {
                self.open_since = Some(start);
            }
        }
    }

    fn take_open_count(&mut self, until: u64) -> u64 {
        if let Some(start) = self.open_since {
            if start <= until {
                self.open_count += until + 1 - start;
                self.open_since = Some(until + 1);
            }
        }
        std::mem::take(&mut self.open_count)
    }
}

/// A continuous run of trials on one timeline and one random stream.
struct Run<'a> {
    params: &'a ProcessParams,
    regimes: Regimes,
    slots: Vec<Slot>,
    clock: u64,
    rng: ChaCha8Rng,
}

impl<'a> Run<'a> {
    fn new(params: &'a ProcessParams, mut rng: ChaCha8Rng) -> Result<Self> {
        let regimes = Regimes::new(params)?;
        let slots = (0..params.layout.slots())
            .map(|_| Slot::stationary(0, &regimes, &mut rng))
            .collect();
        Ok(Self {
            params,
            regimes,
            slots,
            clock: 0,
            rng,
        })
    }

    fn trial(&mut self) -> Result<TrialRecord> {
        let start = self.clock;
        let n = self.params.layout.pairs() as usize;
        let mut held = vec![false; self.slots.len()];
        let mut kept: Vec<u64> = Vec::with_capacity(n);
        let mut deadline: Option<u64> = None;
        let mut discards = 0;
        let mut multi = 0;
        let mut hits = Vec::new();

        let end = loop {
            let t = self.slots.iter().map(|s| s.next).min().unwrap_or(u64::MAX);
            if t == u64::MAX {
                return Err(Error::NoProgress("no further events can occur".into()));
            }
            if deadline.is_some_and(|d| t > d) {
                held.fill(false);
                kept.clear();
                deadline = None;
                discards += 1;
            }
            hits.clear();
            for (j, slot) in self.slots.iter_mut().enumerate() {
                while slot.next == t {
                    if slot.fire(&self.regimes, &mut self.rng) && !held[j] {
                        hits.push(j);
                    }
                }
            }
            if let Some(&j) = hits.first() {
                multi += hits.len() as u64 - 1;
                held[j] = true;
                kept.push(t);
                if kept.len() == 1 {
                    if let Some(n_cut) = self.params.cutoff {
                        deadline = Some(t + n_cut - 1);
                    }
                }
                if kept.len() == n {
                    break t;
                }
            }
        };

        let open = self.slots.iter_mut().map(|s| s.take_open_count(end)).sum();
        self.clock = end + 1;
        let last = kept[n - 1];
        let storage: Vec<f64> = kept
            .iter()
            .map(|&a| self.params.tau_h + (last - a) as f64 * self.params.tau_c)
            .collect();
        Ok(TrialRecord {
            total_attempts: end - start + 1,
            per_pair_success_attempt: kept.iter().map(|&a| a - start + 1).collect(),
            sampled_fidelities: storage.iter().map(|&t| self.params.curve.at(t)).collect(),
            per_pair_storage_time: storage,
            discard_events: discards,
            multi_click_discards: multi,
            open_slot_attempts: open,
        })
    }
}

/// Runs `trials` trials split over `partitions` independent streams.
/// The output depends only on the parameters, the seed and the partition count.
pub fn simulate(
    params: &ProcessParams,
    trials: u64,
    rng: &RngSpec,
    partitions: u32,
) -> Result<Vec<TrialRecord>> {
    params.validate()?;
    rng.validate()?;
    if trials == 0 {
        return Err(invalid("trials", "must be >= 1"));
    }
    if partitions == 0 {
        return Err(invalid("partitions", "must be >= 1"));
    }
    let parts = u64::from(partitions).min(trials);
    let chunks: Vec<Result<Vec<TrialRecord>>> = (0..parts)
        .into_par_iter()
        .map(|i| {
            let count = trials / parts + u64::from(i < trials % parts);
            let mut run = Run::new(params, rng.stream(i))?;
            (0..count).map(|_| run.trial()).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(trials as usize);
    for chunk in chunks {
        out.extend(chunk?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    fn from_samples(xs: impl Iterator<Item = f64> + Clone) -> Self {
        let n = xs.clone().count() as f64;
        // Shifted by the first sample so constant streams come out exact.
        let shift = xs.clone().next().unwrap_or(0.0);
        let mean = shift + xs.clone().map(|x| x - shift).sum::<f64>() / n;
        let var = if n > 1.0 {
            xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            stderr: (var / n).sqrt(),
        }
    }

    /// Within `sigmas` standard errors, with a relative floor of 1e-12 for
    /// quantities that carry no sampling noise.
    pub fn agrees_with(&self, value: f64, sigmas: f64) -> bool {
        (self.mean - value).abs() <= sigmas * self.stderr + 1e-12 * value.abs()
    }

    /// Distance from `value` in standard errors.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = (self.mean - value).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub trials: u64,
    pub mean_attempts: Estimate,
    pub mean_fidelity: Estimate,
    pub rate_hz: Estimate,
    /// Fraction of slot-attempts with both ends open.
    pub availability: Estimate,
    /// Fraction of trials with at least one discarded extra herald.
    pub multi_click_rate: Estimate,
    pub mean_discards: f64,
}

pub fn summarize(records: &[TrialRecord], layout: SlotLayout, tau_c: f64) -> McSummary {
    let attempts = Estimate::from_samples(records.iter().map(|r| r.total_attempts as f64));
    let slots = f64::from(layout.slots());
    // Ratio estimator for pooled open slot-attempts.
    let total_open: f64 = records.iter().map(|r| r.open_slot_attempts as f64).sum();
    let total_slot_attempts: f64 = records.iter().map(|r| r.total_attempts as f64 * slots).sum();
    let ratio = total_open / total_slot_attempts;
    let m = records.len() as f64;
    let resid: f64 = records
        .iter()
        .map(|r| {
            let e = r.open_slot_attempts as f64 - ratio * r.total_attempts as f64 * slots;
            e * e
        })
        .sum();
    let avail_se = if m > 1.0 {
        (resid / (m * (m - 1.0))).sqrt() / (total_slot_attempts / m)
    } else {
        0.0
    };
    let rate = 1.0 / (attempts.mean * tau_c);
    McSummary {
        trials: records.len() as u64,
        mean_attempts: attempts,
        mean_fidelity: Estimate::from_samples(records.iter().map(TrialRecord::mean_fidelity)),
        rate_hz: Estimate {
            mean: rate,
            stderr: rate * attempts.stderr / attempts.mean,
        },
        availability: Estimate {
            mean: ratio,
            stderr: avail_se,
        },
        multi_click_rate: Estimate::from_samples(
            records.iter().map(|r| f64::from(u8::from(r.had_multi_click()))),
        ),
        mean_discards: records.iter().map(|r| r.discard_events as f64).sum::<f64>() / m,
    }
}

/// Simulates the physical configuration end to end.
pub fn simulate_batch(
    link: &LinkConfig,
    src: &SourceConfig,
    mem: &MemoryConfig,
    trials: u64,
    rng: &RngSpec,
    partitions: u32,
) -> Result<McSummary> {
    let point = OperatingPoint::derive(link, src, mem)?;
    let params = ProcessParams::from_point(&point, mem.cutoff)?;
    let records = simulate(&params, trials, rng, partitions)?;
    Ok(summarize(&records, params.layout, params.tau_c))
}

/// Lockout chain matching the simulated per-station dynamics.
pub fn station_chain(params: &ProcessParams) -> Result<AvailabilityChain> {
    AvailabilityChain::new(params.lockout, params.click)
}
