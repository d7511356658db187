//! Grid search for the highest-rate operating point under a fidelity floor.

use rayon::prelude::*;

use crate::error::{ConfigErrors, Issues, Result};
use crate::link::LinkConfig;
use crate::memory::MemoryConfig;
use crate::operating::OperatingPoint;
use crate::source::{Mode, SourceConfig};

/// Largest squeezing parameter the optimizer may visit (weak-pump regime).
pub const LAMBDA_MAX: f64 = 0.1;

/// Reported points must keep the multi-click probability below this.
pub const MULTI_CLICK_GUARD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub lambda_grid: Vec<f64>,
    /// `None` means no cutoff. Only consulted in qubit mode with two pairs.
    pub t_cut_grid: Vec<Option<f64>>,
    pub fidelity_floor: f64,
    /// Ground separations, m.
    pub distances: Vec<f64>,
    pub modes: Vec<Mode>,
    pub n_values: Vec<u32>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            lambda_grid: default_lambda_grid(),
            t_cut_grid: default_t_cut_grid(),
            fidelity_floor: 0.9,
            distances: vec![200e3],
            modes: vec![Mode::Qudit, Mode::Qubit],
            n_values: vec![1],
        }
    }
}

/// 101 evenly spaced values on `[0, 0.1]`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=100).map(|i| f64::from(i) * 1e-3).collect()
}

pub fn default_t_cut_grid() -> Vec<Option<f64>> {
    [0.01, 0.05, 0.1, 0.5, 1.0, 5.0]
        .into_iter()
        .map(Some)
        .chain([None])
        .collect()
}

impl SweepSpec {
    pub(crate) fn collect_issues(&self, issues: &mut Issues, section: &str) {
        let p = |k: &str| format!("{section}.{k}");
        if self.lambda_grid.is_empty() {
            issues.push(p("lambda_grid"), "must not be empty");
        }
        for (i, &l) in self.lambda_grid.iter().enumerate() {
            if !(0.0..=LAMBDA_MAX).contains(&l) {
                issues.push(
                    format!("{}[{i}]", p("lambda_grid")),
                    format!("must be in [0, {LAMBDA_MAX}], got {l}"),
                );
            }
        }
        if self.t_cut_grid.is_empty() {
            issues.push(p("t_cut_grid"), "must not be empty");
        }
        for (i, t) in self.t_cut_grid.iter().enumerate() {
            if let Some(t) = *t {
                issues.positive(&format!("{}[{i}]", p("t_cut_grid")), t);
            }
        }
        if !(0.0..1.0).contains(&self.fidelity_floor) {
            issues.push(
                p("fidelity_floor"),
                format!("must be in [0, 1), got {}", self.fidelity_floor),
            );
        }
        if self.distances.is_empty() {
            issues.push(p("distances"), "must not be empty");
        }
        for (i, &d) in self.distances.iter().enumerate() {
            issues.positive(&format!("{}[{i}]", p("distances")), d);
        }
        if self.modes.is_empty() {
            issues.push(p("modes"), "must not be empty");
        }
        if self.n_values.is_empty() {
            issues.push(p("n_values"), "must not be empty");
        }
        for (i, &n) in self.n_values.iter().enumerate() {
            if n == 0 {
                issues.push(format!("{}[{i}]", p("n_values")), "must be >= 1");
            }
        }
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigErrors> {
        let mut issues = Issues::default();
        self.collect_issues(&mut issues, "sweep");
        issues.into_result()
    }

    /// Cutoff candidates for a source: the grid in qubit mode with two
    /// pairs, otherwise only "no cutoff".
    fn cutoffs_for(&self, src: &SourceConfig) -> Vec<Option<f64>> {
        if src.mode == Mode::Qubit && src.pairs == 2 {
            self.t_cut_grid.clone()
        } else {
            vec![None]
        }
    }
}

/// The best feasible grid point of one (mode, n, distance) combination.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub lambda: f64,
    pub t_cut: Option<f64>,
    pub p_ent: f64,
    pub avg_attempts: f64,
    pub rate_hz: f64,
    pub avg_fidelity: f64,
    pub multi_click: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub mode: Mode,
    pub pairs: u32,
    pub multiplexing: u32,
    /// m
    pub distance: f64,
    pub p_t: f64,
    /// `None` when no grid point meets the constraints.
    pub best: Option<Candidate>,
}

impl PointResult {
    pub fn feasible(&self) -> bool {
        self.best.is_some()
    }

    pub fn rate_hz(&self) -> f64 {
        self.best.as_ref().map_or(0.0, |c| c.rate_hz)
    }
}

/// Evaluates one grid point; `None` when it cannot be evaluated.
pub fn evaluate_candidate(
    link: &LinkConfig,
    src: &SourceConfig,
    mem: &MemoryConfig,
    t_cut: Option<f64>,
) -> Option<Candidate> {
    let point = OperatingPoint::derive(link, src, mem).ok()?;
    let e = point.evaluate(t_cut).ok()?;
    let finite = [e.avg_attempts, e.rate_hz, e.avg_fidelity, e.multi_click]
        .iter()
        .all(|v| v.is_finite());
    finite.then_some(Candidate {
        lambda: src.lambda,
        t_cut,
        p_ent: point.p_ent,
        avg_attempts: e.avg_attempts,
        rate_hz: e.rate_hz,
        avg_fidelity: e.avg_fidelity,
        multi_click: e.multi_click,
    })
}

/// Best grid point for the source's mode and multiplexing at `distance`.
/// Ties keep the earliest grid point (λ outer, t_cut inner).
pub fn optimize_point(
    spec: &SweepSpec,
    link: &LinkConfig,
    src: &SourceConfig,
    mem: &MemoryConfig,
    distance: f64,
) -> Result<PointResult> {
    let link = link.with_separation(distance);
    let p_t = link.effective_transmission()?;
    let floor = spec.fidelity_floor;
    let mut best: Option<Candidate> = None;
    for &lambda in &spec.lambda_grid {
        let src = src.with_lambda(lambda);
        for t_cut in spec.cutoffs_for(&src) {
            let Some(c) = evaluate_candidate(&link, &src, mem, t_cut) else {
                continue;
            };
            let ok = c.avg_fidelity >= floor && c.multi_click < MULTI_CLICK_GUARD && c.rate_hz > 0.0;
            if ok && best.as_ref().is_none_or(|b| c.rate_hz > b.rate_hz) {
                best = Some(c);
            }
        }
    }
    Ok(PointResult {
        mode: src.mode,
        pairs: src.pairs,
        multiplexing: src.multiplexing,
        distance,
        p_t,
        best,
    })
}

/// Optimizes every (mode, n, distance) combination, ordered by mode as
/// listed, then n, then distance.
pub fn sweep(
    spec: &SweepSpec,
    link: &LinkConfig,
    src: &SourceConfig,
    mem: &MemoryConfig,
) -> Result<Vec<PointResult>> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for &mode in &spec.modes {
        for &n in &spec.n_values {
            for &d in &spec.distances {
                jobs.push((mode, n, d));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(mode, n, d)| {
            let src = SourceConfig {
                mode,
                multiplexing: n,
                ..src.clone()
            };
            optimize_point(spec, link, &src, mem, d)
        })
        .collect()
}
