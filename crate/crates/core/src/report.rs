//! Result rows and their CSV form.
//!
//! Numbers are written with 12 significant digits in scientific notation;
//! absent values are empty fields. Output depends only on the rows, so
//! identical runs give byte-identical files.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use csv::{Terminator, WriterBuilder};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::montecarlo::{simulate, summarize, McSummary, ProcessParams};
use crate::operating::{Evaluation, OperatingPoint};
use crate::optimizer::{sweep, PointResult};
use crate::source::{Mode, SourceConfig};

pub const HEADER: [&str; 21] = [
    "distance_m",
    "mode",
    "m",
    "n",
    "lambda",
    "t_cut_s",
    "p_T",
    "p_ent",
    "avg_attempts",
    "rate_hz",
    "avg_fidelity",
    "multi_click",
    "availability",
    "feasible",
    "source",
    "avg_attempts_stderr",
    "rate_hz_stderr",
    "avg_fidelity_stderr",
    "multi_click_stderr",
    "availability_stderr",
    "agreement",
];

/// Standard errors allowed between a Monte Carlo estimate and its analytic value.
pub const AGREEMENT_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSource {
    Analytic,
    Mc,
}

impl RowSource {
    pub fn as_str(self) -> &'static str {
        match self {
            RowSource::Analytic => "analytic",
            RowSource::Mc => "mc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub distance_m: f64,
    pub mode: Mode,
    pub pairs: u32,
    pub multiplexing: u32,
    pub lambda: Option<f64>,
    pub t_cut: Option<f64>,
    pub p_t: f64,
    pub p_ent: Option<f64>,
    pub avg_attempts: Option<f64>,
    pub rate_hz: f64,
    pub avg_fidelity: Option<f64>,
    pub multi_click: Option<f64>,
    pub availability: Option<f64>,
    pub feasible: bool,
    pub source: RowSource,
    pub avg_attempts_stderr: Option<f64>,
    pub rate_hz_stderr: Option<f64>,
    pub avg_fidelity_stderr: Option<f64>,
    pub multi_click_stderr: Option<f64>,
    pub availability_stderr: Option<f64>,
    pub agreement: Option<bool>,
}

impl ResultRow {
    fn blank(distance_m: f64, src: &SourceConfig, p_t: f64, source: RowSource) -> Self {
        Self {
            distance_m,
            mode: src.mode,
            pairs: src.pairs,
            multiplexing: src.multiplexing,
            lambda: None,
            t_cut: None,
            p_t,
            p_ent: None,
            avg_attempts: None,
            rate_hz: 0.0,
            avg_fidelity: None,
            multi_click: None,
            availability: None,
            feasible: false,
            source,
            avg_attempts_stderr: None,
            rate_hz_stderr: None,
            avg_fidelity_stderr: None,
            multi_click_stderr: None,
            availability_stderr: None,
            agreement: None,
        }
    }

    pub fn from_sweep(r: &PointResult) -> Self {
        let src = SourceConfig {
            pairs: r.pairs,
            multiplexing: r.multiplexing,
            mode: r.mode,
            ..SourceConfig::default()
        };
        let mut row = Self::blank(r.distance, &src, r.p_t, RowSource::Analytic);
        if let Some(c) = &r.best {
            row.lambda = Some(c.lambda);
            row.t_cut = c.t_cut;
            row.p_ent = Some(c.p_ent);
            row.avg_attempts = Some(c.avg_attempts);
            row.rate_hz = c.rate_hz;
            row.avg_fidelity = Some(c.avg_fidelity);
            row.multi_click = Some(c.multi_click);
            row.feasible = true;
        }
        row
    }

    pub fn analytic(
        distance_m: f64,
        src: &SourceConfig,
        point: &OperatingPoint,
        eval: &Evaluation,
        t_cut: Option<f64>,
    ) -> Self {
        Self {
            lambda: Some(src.lambda),
            t_cut,
            p_ent: Some(point.p_ent),
            avg_attempts: Some(eval.avg_attempts),
            rate_hz: eval.rate_hz,
            avg_fidelity: Some(eval.avg_fidelity),
            multi_click: Some(eval.multi_click),
            availability: Some(point.pi_00),
            feasible: true,
            ..Self::blank(distance_m, src, point.p_t, RowSource::Analytic)
        }
    }

    pub fn monte_carlo(
        distance_m: f64,
        src: &SourceConfig,
        point: &OperatingPoint,
        mc: &McSummary,
        t_cut: Option<f64>,
    ) -> Self {
        Self {
            lambda: Some(src.lambda),
            t_cut,
            p_ent: Some(point.p_ent),
            avg_attempts: Some(mc.mean_attempts.mean),
            rate_hz: mc.rate_hz.mean,
            avg_fidelity: Some(mc.mean_fidelity.mean),
            multi_click: Some(mc.multi_click_rate.mean),
            availability: Some(mc.availability.mean),
            feasible: true,
            avg_attempts_stderr: Some(mc.mean_attempts.stderr),
            rate_hz_stderr: Some(mc.rate_hz.stderr),
            avg_fidelity_stderr: Some(mc.mean_fidelity.stderr),
            multi_click_stderr: Some(mc.multi_click_rate.stderr),
            availability_stderr: Some(mc.availability.stderr),
            ..Self::blank(distance_m, src, point.p_t, RowSource::Mc)
        }
    }

    fn record(&self) -> Vec<String> {
        // Adding 0.0 folds -0.0 into 0.0.
        let num = |x: f64| format!("{:.11e}", x + 0.0);
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        let flag = |b: bool| if b { "true" } else { "false" }.to_string();
        vec![
            num(self.distance_m),
            self.mode.as_str().to_string(),
            self.pairs.to_string(),
            self.multiplexing.to_string(),
            opt(self.lambda),
            opt(self.t_cut),
            num(self.p_t),
            opt(self.p_ent),
            opt(self.avg_attempts),
            num(self.rate_hz),
            opt(self.avg_fidelity),
            opt(self.multi_click),
            opt(self.availability),
            flag(self.feasible),
            self.source.as_str().to_string(),
            opt(self.avg_attempts_stderr),
            opt(self.rate_hz_stderr),
            opt(self.avg_fidelity_stderr),
            opt(self.multi_click_stderr),
            opt(self.availability_stderr),
            self.agreement.map(flag).unwrap_or_default(),
        ]
    }
}

/// Whether every Monte Carlo estimate lies within [`AGREEMENT_SIGMAS`] of
/// the analytic value. Multi-click frequency is only comparable without a
/// cutoff, since restarts add attempts that the closed form does not see.
pub fn agreement(eval: &Evaluation, pi_00: f64, mc: &McSummary, with_cutoff: bool) -> bool {
    let k = AGREEMENT_SIGMAS;
    mc.mean_attempts.agrees_with(eval.avg_attempts, k)
        && mc.mean_fidelity.agrees_with(eval.avg_fidelity, k)
        && mc.availability.agrees_with(pi_00, k)
        && (with_cutoff || mc.multi_click_rate.agrees_with(eval.multi_click, k))
}

pub fn to_csv(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = WriterBuilder::new()
        .terminator(Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.into_inner()
        .map_err(|e| Error::Csv(csv::Error::from(e.into_error())))
}

pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    let bytes = to_csv(rows)?;
    let output = |source| Error::Output {
        path: path.to_path_buf(),
        source,
    };
    let mut f = File::create(path).map_err(output)?;
    f.write_all(&bytes).map_err(output)?;
    f.flush().map_err(output)
}

/// Analytic evaluation at the configured operating point.
pub fn evaluate_rows(cfg: &RunConfig) -> Result<Vec<ResultRow>> {
    let point = OperatingPoint::derive(&cfg.link, &cfg.source, &cfg.memory)?;
    let t_cut = cfg.memory.cutoff;
    let eval = point.evaluate(t_cut)?;
    Ok(vec![ResultRow::analytic(
        cfg.link.ground_separation,
        &cfg.source,
        &point,
        &eval,
        t_cut,
    )])
}

pub fn sweep_rows(cfg: &RunConfig) -> Result<Vec<ResultRow>> {
    let results = sweep(&cfg.sweep, &cfg.link, &cfg.source, &cfg.memory)?;
    Ok(results.iter().map(ResultRow::from_sweep).collect())
}

fn mc_at(cfg: &RunConfig, point: &OperatingPoint) -> Result<McSummary> {
    let params = ProcessParams::from_point(point, cfg.memory.cutoff)?;
    let records = simulate(
        &params,
        cfg.montecarlo.trials,
        &cfg.rng,
        cfg.montecarlo.partitions,
    )?;
    Ok(summarize(&records, params.layout, params.tau_c))
}

/// Monte Carlo estimates at the configured operating point.
pub fn mc_rows(cfg: &RunConfig) -> Result<Vec<ResultRow>> {
    let point = OperatingPoint::derive(&cfg.link, &cfg.source, &cfg.memory)?;
    let mc = mc_at(cfg, &point)?;
    Ok(vec![ResultRow::monte_carlo(
        cfg.link.ground_separation,
        &cfg.source,
        &point,
        &mc,
        cfg.memory.cutoff,
    )])
}

/// Analytic and Monte Carlo rows side by side for every sweep distance,
/// mode and multiplexing value at the configured λ and cutoff.
pub fn validate_rows(cfg: &RunConfig) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for &mode in &cfg.sweep.modes {
        for &n in &cfg.sweep.n_values {
            for &d in &cfg.sweep.distances {
                let src = SourceConfig {
                    mode,
                    multiplexing: n,
                    ..cfg.source.clone()
                };
                let t_cut = cfg.memory.cutoff.filter(|_| mode == Mode::Qubit && src.pairs == 2);
                let mem = cfg.memory.with_cutoff(t_cut);
                let link = cfg.link.with_separation(d);
                let point = OperatingPoint::derive(&link, &src, &mem)?;
                let eval = point.evaluate(t_cut)?;
                let local = RunConfig {
                    memory: mem,
                    ..cfg.clone()
                };
                let mc = mc_at(&local, &point)?;
                let ok = agreement(&eval, point.pi_00, &mc, t_cut.is_some());
                let mut a = ResultRow::analytic(d, &src, &point, &eval, t_cut);
                let mut m = ResultRow::monte_carlo(d, &src, &point, &mc, t_cut);
                a.agreement = Some(ok);
                m.agreement = Some(ok);
                rows.push(a);
                rows.push(m);
            }
        }
    }
    Ok(rows)
}
