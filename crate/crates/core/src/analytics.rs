//! Attempt statistics, distribution rate and waiting-time-averaged fidelity
//! without a storage cutoff.
//!
//! Each pair is collected in a stage. Stage `k` (1-based) has `D + 1 - k`
//! free slots, so its gap of failed attempts is geometric with ratio
//! `(1 - p_ent)^(D+1-k)`. The production routes use the closed forms of
//! these geometric sums; the `*_sum_form` functions evaluate the nested
//! sums term by term and exist as independent checks.

use crate::error::{invalid, Error, Result};
use crate::fidelity::FidelityCurve;
use crate::geometric::Gap;
use crate::source::{SlotLayout, SourceConfig};

/// Default relative tail tolerance for the truncated sums.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Largest number of summand evaluations a truncated sum may use.
pub const SUM_TERM_LIMIT: u64 = 50_000_000;

/// τ_c for the configured source.
pub fn attempt_duration(src: &SourceConfig) -> f64 {
    src.attempt_duration()
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(name, format!("must be in [0, 1], got {p}")))
    }
}

/// `p_ent = p_suc · π₀₀`.
pub fn entanglement_probability(p_suc: f64, pi_00: f64) -> Result<f64> {
    check_probability("p_suc", p_suc)?;
    check_probability("pi_00", pi_00)?;
    Ok(p_suc * pi_00)
}

fn check_p_ent(p_ent: f64) -> Result<()> {
    check_probability("p_ent", p_ent)?;
    if p_ent == 0.0 {
        return Err(Error::Divergent { p_ent });
    }
    Ok(())
}

fn stage_gaps(layout: SlotLayout, p_ent: f64) -> impl Iterator<Item = Gap> {
    let d = layout.slots();
    (1..=layout.pairs()).map(move |k| Gap::new(p_ent, d + 1 - k, None))
}

/// `⟨A⟩ = N + Σ_k w_k / (1 - w_k)` with `w_k = (1-p_ent)^(D+1-k)`.
pub fn avg_attempts_closed_form(layout: SlotLayout, p_ent: f64) -> Result<f64> {
    check_p_ent(p_ent)?;
    Ok(stage_gaps(layout, p_ent).map(|g| 1.0 + g.mean()).sum())
}

/// `⟨A⟩` by direct summation over increasing success attempts
/// `a_1 < … < a_N`, each path weighted by
/// `(1-p)^((D-N+1) a_N + Σ_{k<N} a_k)` and normalized by the total weight.
///
/// Truncation stops once a rigorous bound on the neglected tail is below
/// `tail_tol` relative to both accumulated sums.
pub fn avg_attempts_sum_form(layout: SlotLayout, p_ent: f64, tail_tol: f64) -> Result<f64> {
    check_p_ent(p_ent)?;
    if !(tail_tol > 0.0) {
        return Err(invalid("tail_tol", format!("must be > 0, got {tail_tol}")));
    }
    let n = layout.pairs() as usize;
    let d = layout.slots();
    if p_ent == 1.0 {
        // No gaps at all: pair k arrives on attempt k.
        return Ok(n as f64);
    }
    let q = 1.0 - p_ent;
    let r = q.powi((d - layout.pairs() + 1) as i32);
    // Every inner prefix sum is bounded by (1/(1-q))^(N-1).
    let inner_bound = p_ent.powi(1 - n as i32);

    let mut depth: u64 = 64;
    loop {
        let cost = depth.saturating_mul(n as u64);
        if cost > SUM_TERM_LIMIT {
            return Err(Error::ResourceLimit {
                required: cost,
                limit: SUM_TERM_LIMIT,
            });
        }
        let (s0, s1) = increasing_index_sums(n, q, r, depth as usize);
        let rj = r.powf(depth as f64);
        let j = depth as f64;
        let tail0 = inner_bound * rj / (1.0 - r);
        let tail1 = inner_bound * rj * ((j + 1.0) / (1.0 - r) + r / ((1.0 - r) * (1.0 - r)));
        if tail0 <= tail_tol * s0 && tail1 <= tail_tol * s1 {
            return Ok(s1 / s0);
        }
        depth *= 2;
    }
}

/// Returns `(Σ w, Σ (a_N + 1) w)` over all `a_1 < … < a_N < depth`.
fn increasing_index_sums(n: usize, q: f64, r: f64, depth: usize) -> (f64, f64) {
    // prefix[a] = Σ over a_1 < … < a_{N-1} < a of q^(a_1 + … + a_{N-1})
    let mut prefix = vec![1.0; depth];
    let mut powers = Vec::with_capacity(depth);
    let mut x = 1.0;
    for _ in 0..depth {
        powers.push(x);
        x *= q;
    }
    for _level in 1..n {
        let mut acc = 0.0;
        for a in 0..depth {
            let term = powers[a] * prefix[a];
            prefix[a] = acc;
            acc += term;
        }
    }
    let (mut s0, mut s1) = (0.0, 0.0);
    let mut ra = 1.0;
    for (a, inner) in prefix.iter().enumerate() {
        let w = ra * inner;
        s0 += w;
        s1 += (a as f64 + 1.0) * w;
        ra *= r;
    }
    (s0, s1)
}

/// `ln` of the probability that a run collects all `N` pairs with exactly
/// one success in every successful attempt.
fn ln_p_approx(layout: SlotLayout, p_ent: f64) -> f64 {
    let d = layout.slots();
    let ln_q = (-p_ent).ln_1p();
    (1..=layout.pairs())
        .map(|k| {
            let free = d + 1 - k;
            let single = (f64::from(free) * p_ent).ln() + f64::from(free - 1) * ln_q;
            single - Gap::new(p_ent, free, None).hit().ln()
        })
        .sum()
}

/// `p_approx = D!/(D-N)! p^N (1-p)^(Σ_k (D-k)) Π_k 1/(1 - (1-p)^(D+1-k))`.
pub fn p_approx(layout: SlotLayout, p_ent: f64) -> Result<f64> {
    check_p_ent(p_ent)?;
    if p_ent == 1.0 {
        return Ok(if layout.slots() == 1 { 1.0 } else { 0.0 });
    }
    Ok(ln_p_approx(layout, p_ent).exp())
}

/// `1 - p_approx`, accurate when it is tiny.
pub fn multi_click_probability(layout: SlotLayout, p_ent: f64) -> Result<f64> {
    check_p_ent(p_ent)?;
    if p_ent == 1.0 {
        return Ok(if layout.slots() == 1 { 0.0 } else { 1.0 });
    }
    Ok(-ln_p_approx(layout, p_ent).exp_m1())
}

/// `R = 1 / (⟨A⟩ τ_c)`, in completed N-pair batches per second.
pub fn distribution_rate(avg_attempts: f64, tau_c: f64) -> Result<f64> {
    if !(avg_attempts > 0.0) {
        return Err(invalid("avg_attempts", format!("must be > 0, got {avg_attempts}")));
    }
    if !(tau_c > 0.0) {
        return Err(invalid("tau_c", format!("must be > 0, got {tau_c}")));
    }
    Ok(1.0 / (avg_attempts * tau_c))
}

fn check_times(tau_h: f64, tau_c: f64) -> Result<()> {
    if !(tau_h >= 0.0 && tau_h.is_finite()) {
        return Err(invalid("tau_h", format!("must be >= 0, got {tau_h}")));
    }
    if !(tau_c > 0.0 && tau_c.is_finite()) {
        return Err(invalid("tau_c", format!("must be > 0, got {tau_c}")));
    }
    Ok(())
}

/// Mean fidelity over the `N` pairs of a completed batch.
///
/// The last pair is stored for `τ_h`; pair `k` additionally waits for the
/// attempts of every later stage. Uses the exponential form of `F` so the
/// expectation over the stage gaps is exact at any `p_ent`.
pub fn avg_fidelity_no_cutoff(
    layout: SlotLayout,
    p_ent: f64,
    tau_h: f64,
    tau_c: f64,
    curve: &FidelityCurve,
) -> Result<f64> {
    check_p_ent(p_ent)?;
    check_times(tau_h, tau_c)?;
    let gaps: Vec<Gap> = stage_gaps(layout, p_ent).collect();
    let n = gaps.len();
    let mut total = curve.at(tau_h);
    for term in curve.terms() {
        let s = term.rate * tau_c;
        let base = term.weight * (-term.rate * tau_h).exp();
        // Pair k waits on stages k+1..=N; walk k downwards accumulating the product.
        let mut product = 1.0;
        for gap in gaps[1..].iter().rev() {
            product *= gap.laplace(s);
            total += base * product;
        }
    }
    Ok(total / n as f64)
}

/// Mean pair fidelity by nested summation over the gaps of stages `2..=N`,
/// for an arbitrary `F`. Each gap is truncated where its remaining
/// probability mass drops below `tail_tol / N`.
pub fn avg_fidelity_sum_form(
    layout: SlotLayout,
    p_ent: f64,
    tau_h: f64,
    tau_c: f64,
    fidelity: impl Fn(f64) -> f64,
    tail_tol: f64,
) -> Result<f64> {
    check_p_ent(p_ent)?;
    check_times(tau_h, tau_c)?;
    if !(tail_tol > 0.0) {
        return Err(invalid("tail_tol", format!("must be > 0, got {tail_tol}")));
    }
    let n = layout.pairs();
    let d = layout.slots();
    if n == 1 || p_ent == 1.0 {
        return Ok((0..n).map(|j| fidelity(tau_h + f64::from(j) * tau_c)).sum::<f64>() / f64::from(n));
    }
    let q = 1.0 - p_ent;
    // Stages N, N-1, …, 2: ratio and truncation depth.
    let mut levels = Vec::new();
    let mut cost: u64 = 1;
    for stage in (2..=n).rev() {
        let w = q.powi((d + 1 - stage) as i32);
        let depth = ((tail_tol / f64::from(n)).ln() / w.ln()).ceil().max(1.0) as u64;
        cost = cost.saturating_mul(depth);
        levels.push((w, depth));
    }
    if cost > SUM_TERM_LIMIT {
        return Err(Error::ResourceLimit {
            required: cost,
            limit: SUM_TERM_LIMIT,
        });
    }
    let head = fidelity(tau_h);
    let mut mass = 0.0;
    let mut acc = 0.0;
    nest(&levels, 0, 1.0, 0.0, head, tau_h, tau_c, &fidelity, &mut mass, &mut acc);
    Ok(acc / (mass * f64::from(n)))
}

#[allow(clippy::too_many_arguments)]
fn nest(
    levels: &[(f64, u64)],
    at: usize,
    weight: f64,
    offset: f64,
    partial: f64,
    tau_h: f64,
    tau_c: f64,
    fidelity: &impl Fn(f64) -> f64,
    mass: &mut f64,
    acc: &mut f64,
) {
    let Some(&(w, depth)) = levels.get(at) else {
        *mass += weight;
        *acc += weight * partial;
        return;
    };
    let mut wi = 1.0 - w;
    for i in 0..depth {
        let shifted = offset + (i as f64 + 1.0) * tau_c;
        let sum = partial + fidelity(tau_h + shifted);
        nest(levels, at + 1, weight * wi, shifted, sum, tau_h, tau_c, fidelity, mass, acc);
        wi *= w;
    }
}

/// Everything derived for one operating point without a cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolMetrics {
    pub layout: SlotLayout,
    pub p_ent: f64,
    pub tau_c: f64,
    pub avg_attempts: f64,
    pub p_approx: f64,
    /// `1 - p_approx`, computed without cancellation.
    pub multi_click: f64,
    pub rate_hz: f64,
    pub avg_fidelity: f64,
}

impl ProtocolMetrics {
    pub fn evaluate(
        layout: SlotLayout,
        p_ent: f64,
        tau_h: f64,
        tau_c: f64,
        curve: &FidelityCurve,
    ) -> Result<Self> {
        let avg_attempts = avg_attempts_closed_form(layout, p_ent)?;
        Ok(Self {
            layout,
            p_ent,
            tau_c,
            avg_attempts,
            p_approx: p_approx(layout, p_ent)?,
            multi_click: multi_click_probability(layout, p_ent)?,
            rate_hz: distribution_rate(avg_attempts, tau_c)?,
            avg_fidelity: avg_fidelity_no_cutoff(layout, p_ent, tau_h, tau_c, curve)?,
        })
    }
}
