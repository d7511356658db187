//! Two-pair collection in qubit mode with a storage cutoff on the first pair.
//!
//! After the first pair is stored the second must arrive within
//! `N_cut - 1` attempts; otherwise the first pair is discarded and the
//! cycle restarts. Only `N = 2` is covered.

use crate::analytics::distribution_rate;
use crate::error::{invalid, Error, Result};
use crate::fidelity::FidelityCurve;
use crate::geometric::Gap;

/// Relative gap between `p_succ` and `p_2p` above which they are flagged.
pub const P_SUCC_DIVERGENCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffParams {
    n_cut: u64,
    slots: u32,
}

impl CutoffParams {
    pub fn new(n_cut: u64, slots: u32) -> Result<Self> {
        if slots < 2 {
            return Err(invalid("slots", format!("two pairs need D >= 2, got {slots}")));
        }
        if n_cut < 2 {
            return Err(Error::InvalidCutoff { n_cut });
        }
        Ok(Self { n_cut, slots })
    }

    /// `N_cut = floor(t_cut / (D τ_c))`.
    pub fn from_time(t_cut: f64, slots: u32, tau_c: f64) -> Result<Self> {
        if !(t_cut > 0.0) {
            return Err(invalid("t_cut", format!("must be > 0, got {t_cut}")));
        }
        if !(tau_c > 0.0) {
            return Err(invalid("tau_c", format!("must be > 0, got {tau_c}")));
        }
        let n = (t_cut / (f64::from(slots) * tau_c)).floor();
        // Saturates for absurdly long cutoffs.
        Self::new(n as u64, slots)
    }

    pub fn n_cut(&self) -> u64 {
        self.n_cut
    }

    pub fn slots(&self) -> u32 {
        self.slots
    }

    fn first_gap(&self, p_ent: f64) -> Gap {
        Gap::new(p_ent, self.slots, None)
    }

    fn second_gap(&self, p_ent: f64) -> Gap {
        Gap::new(p_ent, self.slots - 1, Some(self.n_cut - 2))
    }
}

fn check_p_ent(p_ent: f64) -> Result<()> {
    if !(p_ent > 0.0 && p_ent <= 1.0) {
        return Err(invalid("p_ent", format!("must be in (0, 1], got {p_ent}")));
    }
    Ok(())
}

/// Mean attempts of a cycle that finishes within the cutoff, and the
/// probability `p_2p` of such a cycle with single clicks throughout.
pub fn n_succ_and_p2p(params: &CutoffParams, p_ent: f64) -> Result<(f64, f64)> {
    check_p_ent(p_ent)?;
    let first = params.first_gap(p_ent);
    let second = params.second_gap(p_ent);
    let n_succ = 2.0 + first.mean() + second.mean();
    if p_ent == 1.0 {
        let p2p = if params.slots == 2 { 1.0 } else { 0.0 };
        return Ok((n_succ, p2p));
    }
    let d = f64::from(params.slots);
    let ln_q = (-p_ent).ln_1p();
    // D(D-1) p² q^(2D-3) Σ_i1 q^(D i1) Σ_{i2 ≤ N_cut-2} q^((D-1) i2)
    let ln_p2p = (d * p_ent).ln() + ((d - 1.0) * p_ent).ln() + (2.0 * d - 3.0) * ln_q
        + (second.mass()).ln()
        - first.hit().ln();
    Ok((n_succ, ln_p2p.exp()))
}

/// Attempts spent on a failed cycle, `N_cut + ⟨n_1⟩`, and the failure
/// probability `p_fail = (1 - p_ent)^N_cut`.
pub fn n_fail_and_p_fail(params: &CutoffParams, p_ent: f64) -> Result<(f64, f64)> {
    check_p_ent(p_ent)?;
    let n_first = 1.0 + params.first_gap(p_ent).mean();
    let p_fail = (params.n_cut as f64 * (-p_ent).ln_1p()).exp();
    Ok((params.n_cut as f64 + n_first, p_fail))
}

/// Renewal composition `⟨n⟩ = ((⟨n_fail⟩ - ⟨n_succ⟩) p_fail + ⟨n_succ⟩) / p_succ`.
pub fn avg_attempts_with_cutoff(params: &CutoffParams, p_ent: f64) -> Result<f64> {
    let (n_succ, _) = n_succ_and_p2p(params, p_ent)?;
    let (n_fail, p_fail) = n_fail_and_p_fail(params, p_ent)?;
    let p_succ = -(params.n_cut as f64 * (-p_ent).ln_1p()).exp_m1();
    if p_succ <= 0.0 {
        return Err(Error::Divergent { p_ent });
    }
    Ok(((n_fail - n_succ) * p_fail + n_succ) / p_succ)
}

/// Mean fidelity of the two pairs of a cycle completed within the cutoff.
pub fn avg_fidelity_with_cutoff(
    params: &CutoffParams,
    p_ent: f64,
    tau_h: f64,
    tau_c: f64,
    curve: &FidelityCurve,
) -> Result<f64> {
    check_p_ent(p_ent)?;
    if !(tau_h >= 0.0) || !(tau_c > 0.0) {
        return Err(invalid("tau", format!("need tau_h >= 0 and tau_c > 0, got {tau_h}, {tau_c}")));
    }
    let second = params.second_gap(p_ent);
    let waited: f64 = curve
        .terms()
        .iter()
        .map(|e| e.weight * (-e.rate * tau_h).exp() * second.laplace(e.rate * tau_c))
        .sum();
    Ok(0.5 * (curve.at(tau_h) + waited))
}

/// The same average by explicit finite summation over the second gap, for
/// any `F`. The first-pair sum factors out of numerator and normalization.
pub fn avg_fidelity_with_cutoff_sum(
    params: &CutoffParams,
    p_ent: f64,
    tau_h: f64,
    tau_c: f64,
    fidelity: impl Fn(f64) -> f64,
) -> Result<f64> {
    check_p_ent(p_ent)?;
    let w = (1.0 - p_ent).powi(params.slots as i32 - 1);
    let (mut mass, mut acc, mut wi) = (0.0, 0.0, 1.0);
    for i2 in 0..=params.n_cut - 2 {
        mass += wi;
        acc += wi * fidelity(tau_h + (i2 as f64 + 1.0) * tau_c);
        wi *= w;
    }
    Ok(0.5 * (fidelity(tau_h) + acc / mass))
}

/// All cutoff quantities for one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffMetrics {
    pub params: CutoffParams,
    pub p_ent: f64,
    pub n_succ: f64,
    pub p_2p: f64,
    pub n_fail: f64,
    pub p_fail: f64,
    pub p_succ: f64,
    pub avg_attempts: f64,
    pub rate_hz: f64,
    pub avg_fidelity: f64,
}

impl CutoffMetrics {
    pub fn evaluate(
        params: CutoffParams,
        p_ent: f64,
        tau_h: f64,
        tau_c: f64,
        curve: &FidelityCurve,
    ) -> Result<Self> {
        let (n_succ, p_2p) = n_succ_and_p2p(&params, p_ent)?;
        let (n_fail, p_fail) = n_fail_and_p_fail(&params, p_ent)?;
        let avg_attempts = avg_attempts_with_cutoff(&params, p_ent)?;
        Ok(Self {
            params,
            p_ent,
            n_succ,
            p_2p,
            n_fail,
            p_fail,
            p_succ: -(params.n_cut as f64 * (-p_ent).ln_1p()).exp_m1(),
            avg_attempts,
            rate_hz: distribution_rate(avg_attempts, tau_c)?,
            avg_fidelity: avg_fidelity_with_cutoff(&params, p_ent, tau_h, tau_c, curve)?,
        })
    }

    /// True when `p_succ` and `p_2p` differ by more than [`P_SUCC_DIVERGENCE`].
    pub fn success_estimates_diverge(&self) -> bool {
        (self.p_succ - self.p_2p).abs() > P_SUCC_DIVERGENCE * self.p_succ.max(self.p_2p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{avg_attempts_closed_form, avg_fidelity_no_cutoff};
    use crate::fidelity::ExpTerm;
    use crate::source::SlotLayout;
    use proptest::prelude::*;

    fn params(n_cut: u64, d: u32) -> CutoffParams {
        CutoffParams::new(n_cut, d).unwrap()
    }

    fn curve() -> FidelityCurve {
        FidelityCurve::new(vec![
            ExpTerm { weight: 0.24, rate: 0.0 },
            ExpTerm { weight: 0.72, rate: 0.3 },
        ])
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// Direct double sum with the first-pair index truncated deep in its tail.
    fn enumerate(d: u32, p: f64, n_cut: u64) -> (f64, f64) {
        let q = 1.0 - p;
        let df = f64::from(d);
        let pre = df * (df - 1.0) * p * p * q.powi(2 * d as i32 - 3);
        let (mut w_sum, mut n_sum) = (0.0, 0.0);
        for i1 in 0..20_000u64 {
            for i2 in 0..=n_cut - 2 {
                let w = q.powf((i2 as f64) * (df - 1.0) + df * i1 as f64);
                w_sum += w;
                n_sum += (i1 + i2 + 2) as f64 * w;
            }
        }
        (n_sum / w_sum, pre * w_sum)
    }

    #[test]
    fn rejects_short_windows() {
        assert!(matches!(CutoffParams::new(1, 2), Err(Error::InvalidCutoff { n_cut: 1 })));
        assert!(CutoffParams::new(5, 1).is_err());
        assert_eq!(CutoffParams::from_time(1.0, 2, 4e-7).unwrap().n_cut(), 1_250_000);
        assert!(matches!(
            CutoffParams::from_time(1e-6, 2, 4e-7),
            Err(Error::InvalidCutoff { n_cut: 1 })
        ));
    }

    #[test]
    fn n_cut_rounds_down() {
        assert_eq!(CutoffParams::from_time(0.99e-5, 2, 1e-6).unwrap().n_cut(), 4);
    }

    #[test]
    fn shortest_window_enumerates_by_hand() {
        // D = 2, N_cut = 2: only i2 = 0 survives.
        let p = params(2, 2);
        let (n_succ, p2p) = n_succ_and_p2p(&p, 0.5).unwrap();
        // Σ_i1 (i1 + 2) 0.25^i1 / Σ 0.25^i1 = 2 + 1/3
        assert!((n_succ - 7.0 / 3.0).abs() < 1e-15);
        // 2 · 0.25 · 0.5 · (4/3)
        assert!((p2p - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sums_match_enumeration() {
        for (d, p, n_cut) in [(2, 0.1, 5), (4, 0.05, 30), (3, 0.01, 200), (6, 0.2, 3)] {
            let (n_want, p_want) = enumerate(d, p, n_cut);
            let (n_got, p_got) = n_succ_and_p2p(&params(n_cut, d), p).unwrap();
            assert!(rel(n_got, n_want) < 1e-11, "n_succ ({d},{p},{n_cut})");
            assert!(rel(p_got, p_want) < 1e-11, "p_2p ({d},{p},{n_cut})");
        }
    }

    #[test]
    fn failure_quantities() {
        let (_, p_fail) = n_fail_and_p_fail(&params(100, 2), 0.01).unwrap();
        assert!((p_fail - 0.99f64.powi(100)).abs() < 1e-14);
        assert!((p_fail - 0.3660).abs() < 1e-4);
        let (n_fail, p_fail) = n_fail_and_p_fail(&params(50, 2), 1.0).unwrap();
        assert_eq!((n_fail, p_fail), (51.0, 0.0));
        // Normalized first-pair mean 1/(1 - q^D).
        let (n_fail, _) = n_fail_and_p_fail(&params(10, 2), 0.1).unwrap();
        assert!((n_fail - 10.0 - 1.0 / 0.19).abs() < 1e-12);
    }

    #[test]
    fn certain_success_takes_two_attempts() {
        assert!((avg_attempts_with_cutoff(&params(7, 3), 1.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn minimal_window_fidelity_is_two_point_average() {
        let c = curve();
        let f = avg_fidelity_with_cutoff(&params(2, 4), 0.03, 1e-3, 0.2, &c).unwrap();
        let want = 0.5 * (c.at(1e-3) + c.at(1e-3 + 0.2));
        assert!((f - want).abs() < 1e-15);
    }

    #[test]
    fn constant_curve_is_unchanged() {
        let f = avg_fidelity_with_cutoff(&params(40, 2), 0.01, 1e-3, 0.01, &FidelityCurve::constant(0.9)).unwrap();
        assert!((f - 0.9).abs() < 1e-15);
    }

    #[test]
    fn fidelity_closed_form_matches_finite_sum() {
        let c = curve();
        for (d, p, n_cut) in [(2, 0.01, 500), (4, 0.05, 80), (3, 1e-4, 3000)] {
            let pr = params(n_cut, d);
            let closed = avg_fidelity_with_cutoff(&pr, p, 2e-3, 1e-3, &c).unwrap();
            let summed = avg_fidelity_with_cutoff_sum(&pr, p, 2e-3, 1e-3, |t| c.at(t)).unwrap();
            assert!(rel(closed, summed) < 1e-12, "({d},{p},{n_cut})");
        }
    }

    #[test]
    fn long_windows_converge_to_no_cutoff() {
        let c = curve();
        for (d, p) in [(2, 0.1f64), (4, 0.01), (6, 1e-3), (2, 1e-7)] {
            let n_cut = (100.0 / p).ceil() as u64;
            let pr = params(n_cut, d);
            let layout = SlotLayout::new(d, 2).unwrap();
            let a = avg_attempts_closed_form(layout, p).unwrap();
            let (n_succ, p2p) = n_succ_and_p2p(&pr, p).unwrap();
            assert!(rel(avg_attempts_with_cutoff(&pr, p).unwrap(), a) < 1e-6);
            assert!(rel(n_succ, a) < 1e-6);
            assert!(rel(p2p, crate::analytics::p_approx(layout, p).unwrap()) < 1e-6);
            let f0 = avg_fidelity_no_cutoff(layout, p, 1e-3, 1e-6, &c).unwrap();
            assert!(rel(avg_fidelity_with_cutoff(&pr, p, 1e-3, 1e-6, &c).unwrap(), f0) < 1e-6);
        }
    }

    #[test]
    fn divergence_flag() {
        let m = CutoffMetrics::evaluate(params(1000, 4), 1e-3, 1e-3, 1e-6, &curve()).unwrap();
        assert!(m.success_estimates_diverge());
        let m = CutoffMetrics::evaluate(params(100_000, 2), 1e-3, 1e-3, 1e-6, &curve()).unwrap();
        assert!(!m.success_estimates_diverge());
    }

    proptest! {
        #[test]
        fn cutoff_filters_long_waits(d in 2u32..7, p in 1e-6f64..0.2, n_cut in 2u64..100_000, rate in 0.0f64..3.0) {
            let c = FidelityCurve::new(vec![
                ExpTerm { weight: 0.25, rate: 0.0 },
                ExpTerm { weight: 0.7, rate },
            ]);
            let layout = SlotLayout::new(d, 2).unwrap();
            let pr = params(n_cut, d);
            let with = avg_fidelity_with_cutoff(&pr, p, 1e-3, 1e-4, &c).unwrap();
            let without = avg_fidelity_no_cutoff(layout, p, 1e-3, 1e-4, &c).unwrap();
            prop_assert!(with >= without * (1.0 - 1e-14));
        }

        #[test]
        fn discarding_costs_attempts(d in 2u32..7, p in 1e-6f64..0.2, n_cut in 2u64..100_000) {
            let layout = SlotLayout::new(d, 2).unwrap();
            let with = avg_attempts_with_cutoff(&params(n_cut, d), p).unwrap();
            let without = avg_attempts_closed_form(layout, p).unwrap();
            prop_assert!(with >= without * (1.0 - 1e-12), "{} < {}", with, without);
        }

        #[test]
        fn p2p_is_a_probability(d in 2u32..9, p in 1e-9f64..1.0, n_cut in 2u64..1_000_000) {
            let (_, p2p) = n_succ_and_p2p(&params(n_cut, d), p).unwrap();
            prop_assert!(p2p > 0.0 && p2p <= 1.0 + 1e-14);
        }
    }
}
