//! TOML run configuration.
//!
//! Sections mirror the modules: `[link]`, `[source]`, `[memory]`, `[sweep]`,
//! `[rng]`, `[montecarlo]` and `[output]`. Every key is optional and falls
//! back to the reference parameter set. Problems are collected rather than
//! reported one at a time, each tagged with its `section.key` path, and
//! unknown keys are rejected.

use std::path::PathBuf;

use toml::{Table, Value};

use crate::error::{ConfigErrors, Issues};
use crate::link::{LinkConfig, LinkMode};
use crate::memory::{MemoryConfig, PauliWeights};
use crate::montecarlo::{RngSpec, CHACHA8, DEFAULT_PARTITIONS};
use crate::optimizer::{SweepSpec, LAMBDA_MAX};
use crate::source::{Mode, SourceConfig};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McSettings {
    pub trials: u64,
    pub partitions: u32,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            trials: 100_000,
            partitions: DEFAULT_PARTITIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub link: LinkConfig,
    pub source: SourceConfig,
    pub memory: MemoryConfig,
    pub sweep: SweepSpec,
    pub rng: RngSpec,
    pub montecarlo: McSettings,
    pub output: Option<PathBuf>,
}

const SECTIONS: &[&str] = &["link", "source", "memory", "sweep", "rng", "montecarlo", "output"];

/// Written in place of a cutoff time to mean "no cutoff".
const NONE: &str = "none";

struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    known: &'static [&'static str],
}

impl<'a> Section<'a> {
    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        debug_assert!(self.known.contains(&key), "{key}");
        self.table.and_then(|t| t.get(key))
    }

    fn unknown(&self, issues: &mut Issues) {
        for key in self.table.into_iter().flat_map(Table::keys) {
            if !self.known.contains(&key.as_str()) {
                issues.push(self.path(key), "unknown key");
            }
        }
    }

    fn float(&self, issues: &mut Issues, key: &str, into: &mut f64) {
        if let Some(v) = self.get(key) {
            match as_float(v) {
                Some(x) => *into = x,
                None => issues.push(self.path(key), format!("expected a number, got {}", v.type_str())),
            }
        }
    }

    fn int<T: TryFrom<i64>>(&self, issues: &mut Issues, key: &str, into: &mut T) {
        if let Some(v) = self.get(key) {
            match v.as_integer().map(T::try_from) {
                Some(Ok(x)) => *into = x,
                Some(Err(_)) => issues.push(self.path(key), "integer out of range"),
                None => issues.push(self.path(key), format!("expected an integer, got {}", v.type_str())),
            }
        }
    }

    fn string(&self, issues: &mut Issues, key: &str) -> Option<&'a str> {
        let v = self.get(key)?;
        let s = v.as_str();
        if s.is_none() {
            issues.push(self.path(key), format!("expected a string, got {}", v.type_str()));
        }
        s
    }

    fn array(&self, issues: &mut Issues, key: &str) -> Option<&'a [Value]> {
        let v = self.get(key)?;
        let a = v.as_array().map(Vec::as_slice);
        if a.is_none() {
            issues.push(self.path(key), format!("expected an array, got {}", v.type_str()));
        }
        a
    }

    /// Number or the string "none".
    fn optional_time(&self, issues: &mut Issues, key: &str, into: &mut Option<f64>) {
        if let Some(v) = self.get(key) {
            match optional_time(v) {
                Some(t) => *into = t,
                None => issues.push(self.path(key), format!("expected a number or \"{NONE}\"")),
            }
        }
    }
}

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn optional_time(v: &Value) -> Option<Option<f64>> {
    match v.as_str() {
        Some(NONE) => Some(None),
        Some(_) => None,
        None => as_float(v).map(Some),
    }
}

fn list<T>(
    s: &Section,
    issues: &mut Issues,
    key: &str,
    what: &str,
    item: impl Fn(&Value) -> Option<T>,
    into: &mut Vec<T>,
) {
    let Some(items) = s.array(issues, key) else {
        return;
    };
    let mut out = Vec::with_capacity(items.len());
    let mut ok = true;
    for (i, v) in items.iter().enumerate() {
        match item(v) {
            Some(x) => out.push(x),
            None => {
                ok = false;
                issues.push(format!("{}[{i}]", s.path(key)), format!("expected {what}"));
            }
        }
    }
    if ok {
        *into = out;
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let root: Table = toml::from_str(text)
        .map_err(|e| ConfigErrors(vec![crate::error::ConfigIssue::new("", e.to_string().trim_end())]))?;
    let mut issues = Issues::default();
    for key in root.keys() {
        if !SECTIONS.contains(&key.as_str()) {
            issues.push(key.clone(), "unknown section");
        }
    }
    let section = |name: &'static str, known: &'static [&'static str], issues: &mut Issues| {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                issues.push(name, "expected a table");
                None
            }
        };
        let s = Section { name, table, known };
        s.unknown(issues);
        s
    };

    let mut cfg = RunConfig::default();

    let s = section(
        "link",
        &[
            "mode",
            "p_t_direct",
            "p_t_anchors",
            "satellite_altitude",
            "ground_separation",
            "transmitter_aperture",
            "receiver_aperture",
            "wavelength",
            "pointing_jitter",
            "atmospheric_transmittance_zenith",
            "heralding_time",
        ],
        &mut issues,
    );
    let l = &mut cfg.link;
    if let Some(m) = s.string(&mut issues, "mode") {
        match LinkMode::parse(m) {
            Some(m) => l.mode = m,
            None => issues.push(s.path("mode"), format!("unknown link mode `{m}`")),
        }
    }
    s.float(&mut issues, "p_t_direct", &mut l.p_t_direct);
    let pair = |v: &Value| match v.as_array().map(Vec::as_slice) {
        Some([d, p]) => Some((as_float(d)?, as_float(p)?)),
        _ => None,
    };
    list(&s, &mut issues, "p_t_anchors", "a [separation, p_T] pair", pair, &mut l.p_t_anchors);
    s.float(&mut issues, "satellite_altitude", &mut l.satellite_altitude);
    s.float(&mut issues, "ground_separation", &mut l.ground_separation);
    s.float(&mut issues, "transmitter_aperture", &mut l.transmitter_aperture);
    s.float(&mut issues, "receiver_aperture", &mut l.receiver_aperture);
    s.float(&mut issues, "wavelength", &mut l.wavelength);
    s.float(&mut issues, "pointing_jitter", &mut l.pointing_jitter);
    s.float(&mut issues, "atmospheric_transmittance_zenith", &mut l.atmospheric_transmittance_zenith);
    s.optional_time(&mut issues, "heralding_time", &mut l.heralding_time_override);

    let s = section("source", &["lambda", "rep_rate", "pairs", "multiplexing", "mode"], &mut issues);
    let src = &mut cfg.source;
    s.float(&mut issues, "lambda", &mut src.lambda);
    s.float(&mut issues, "rep_rate", &mut src.rep_rate);
    s.int(&mut issues, "pairs", &mut src.pairs);
    s.int(&mut issues, "multiplexing", &mut src.multiplexing);
    if let Some(m) = s.string(&mut issues, "mode") {
        match Mode::parse(m) {
            Some(m) => src.mode = m,
            None => issues.push(s.path("mode"), format!("unknown mode `{m}`")),
        }
    }

    let s = section(
        "memory",
        &[
            "efficiency",
            "coherence_a",
            "coherence_b",
            "eps_1",
            "eps_x",
            "eps_y",
            "eps_z",
            "dark_count",
            "t_cut",
        ],
        &mut issues,
    );
    let mem = &mut cfg.memory;
    s.float(&mut issues, "efficiency", &mut mem.efficiency);
    s.float(&mut issues, "coherence_a", &mut mem.coherence_a);
    s.float(&mut issues, "coherence_b", &mut mem.coherence_b);
    s.float(&mut issues, "eps_1", &mut mem.weights.identity);
    s.float(&mut issues, "eps_x", &mut mem.weights.x);
    s.float(&mut issues, "eps_y", &mut mem.weights.y);
    s.float(&mut issues, "eps_z", &mut mem.weights.z);
    s.float(&mut issues, "dark_count", &mut mem.dark_count);
    s.optional_time(&mut issues, "t_cut", &mut mem.cutoff);

    let s = section(
        "sweep",
        &["lambda_grid", "t_cut_grid", "fidelity_floor", "distances", "modes", "n_values"],
        &mut issues,
    );
    let sw = &mut cfg.sweep;
    list(&s, &mut issues, "lambda_grid", "a number", as_float, &mut sw.lambda_grid);
    list(&s, &mut issues, "t_cut_grid", "a number or \"none\"", optional_time, &mut sw.t_cut_grid);
    s.float(&mut issues, "fidelity_floor", &mut sw.fidelity_floor);
    list(&s, &mut issues, "distances", "a number", as_float, &mut sw.distances);
    let mode = |v: &Value| v.as_str().and_then(Mode::parse);
    list(&s, &mut issues, "modes", "\"qubit\" or \"qudit\"", mode, &mut sw.modes);
    let n = |v: &Value| v.as_integer().and_then(|i| u32::try_from(i).ok());
    list(&s, &mut issues, "n_values", "a non-negative integer", n, &mut sw.n_values);

    let s = section("rng", &["seed", "algorithm"], &mut issues);
    if let Some(v) = s.get("seed") {
        // TOML integers are signed; seeds above i64::MAX are written as strings.
        let seed = match v {
            Value::Integer(i) => u64::try_from(*i).ok(),
            Value::String(t) => t.parse().ok(),
            _ => None,
        };
        match seed {
            Some(x) => cfg.rng.seed = x,
            None => issues.push(s.path("seed"), "expected an unsigned 64-bit integer"),
        }
    }
    if let Some(a) = s.string(&mut issues, "algorithm") {
        cfg.rng.algorithm = a.to_string();
    }

    let s = section("montecarlo", &["trials", "partitions"], &mut issues);
    s.int(&mut issues, "trials", &mut cfg.montecarlo.trials);
    s.int(&mut issues, "partitions", &mut cfg.montecarlo.partitions);

    let s = section("output", &["path"], &mut issues);
    if let Some(p) = s.string(&mut issues, "path") {
        cfg.output = Some(PathBuf::from(p));
    }

    cfg.collect_issues(&mut issues);
    issues.into_result().map(|()| cfg)
}

impl RunConfig {
    fn collect_issues(&self, issues: &mut Issues) {
        self.link.collect_issues(issues, "link");
        self.source.collect_issues(issues, "source");
        if self.source.lambda > LAMBDA_MAX {
            issues.push("source.lambda", format!("must be <= {LAMBDA_MAX} (weak pump), got {}", self.source.lambda));
        }
        self.memory.collect_issues(issues, "memory");
        self.sweep.collect_issues(issues, "sweep");
        if self.rng.algorithm != CHACHA8 {
            issues.push("rng.algorithm", format!("unsupported generator `{}`, expected `{CHACHA8}`", self.rng.algorithm));
        }
        if self.montecarlo.trials == 0 {
            issues.push("montecarlo.trials", "must be >= 1");
        }
        if self.montecarlo.partitions == 0 {
            issues.push("montecarlo.partitions", "must be >= 1");
        }
    }

    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let mut issues = Issues::default();
        self.collect_issues(&mut issues);
        issues.into_result()
    }

    /// Renders a document that parses back to the same configuration.
    pub fn render(&self) -> String {
        let time = |t: Option<f64>| t.map_or(Value::from(NONE), Value::from);
        let floats = |xs: &[f64]| Value::Array(xs.iter().map(|&x| Value::from(x)).collect());
        let mut root = Table::new();

        let l = &self.link;
        let mut t = Table::new();
        t.insert("mode".into(), l.mode.as_str().into());
        t.insert("p_t_direct".into(), l.p_t_direct.into());
        let anchors = l.p_t_anchors.iter().map(|&(d, p)| floats(&[d, p])).collect();
        t.insert("p_t_anchors".into(), Value::Array(anchors));
        t.insert("satellite_altitude".into(), l.satellite_altitude.into());
        t.insert("ground_separation".into(), l.ground_separation.into());
        t.insert("transmitter_aperture".into(), l.transmitter_aperture.into());
        t.insert("receiver_aperture".into(), l.receiver_aperture.into());
        t.insert("wavelength".into(), l.wavelength.into());
        t.insert("pointing_jitter".into(), l.pointing_jitter.into());
        t.insert("atmospheric_transmittance_zenith".into(), l.atmospheric_transmittance_zenith.into());
        t.insert("heralding_time".into(), time(l.heralding_time_override));
        root.insert("link".into(), t.into());

        let s = &self.source;
        let mut t = Table::new();
        t.insert("lambda".into(), s.lambda.into());
        t.insert("rep_rate".into(), s.rep_rate.into());
        t.insert("pairs".into(), i64::from(s.pairs).into());
        t.insert("multiplexing".into(), i64::from(s.multiplexing).into());
        t.insert("mode".into(), s.mode.as_str().into());
        root.insert("source".into(), t.into());

        let m = &self.memory;
        let PauliWeights { identity, x, y, z } = m.weights;
        let mut t = Table::new();
        t.insert("efficiency".into(), m.efficiency.into());
        t.insert("coherence_a".into(), m.coherence_a.into());
        t.insert("coherence_b".into(), m.coherence_b.into());
        t.insert("eps_1".into(), identity.into());
        t.insert("eps_x".into(), x.into());
        t.insert("eps_y".into(), y.into());
        t.insert("eps_z".into(), z.into());
        t.insert("dark_count".into(), m.dark_count.into());
        t.insert("t_cut".into(), time(m.cutoff));
        root.insert("memory".into(), t.into());

        let w = &self.sweep;
        let mut t = Table::new();
        t.insert("lambda_grid".into(), floats(&w.lambda_grid));
        t.insert("t_cut_grid".into(), Value::Array(w.t_cut_grid.iter().map(|&c| time(c)).collect()));
        t.insert("fidelity_floor".into(), w.fidelity_floor.into());
        t.insert("distances".into(), floats(&w.distances));
        t.insert("modes".into(), Value::Array(w.modes.iter().map(|m| m.as_str().into()).collect()));
        t.insert("n_values".into(), Value::Array(w.n_values.iter().map(|&n| i64::from(n).into()).collect()));
        root.insert("sweep".into(), t.into());

        let mut t = Table::new();
        let seed = match i64::try_from(self.rng.seed) {
            Ok(i) => Value::from(i),
            Err(_) => Value::from(self.rng.seed.to_string()),
        };
        t.insert("seed".into(), seed);
        t.insert("algorithm".into(), self.rng.algorithm.as_str().into());
        root.insert("rng".into(), t.into());

        let mut t = Table::new();
        let trials = i64::try_from(self.montecarlo.trials).unwrap_or(i64::MAX);
        t.insert("trials".into(), trials.into());
        t.insert("partitions".into(), i64::from(self.montecarlo.partitions).into());
        root.insert("montecarlo".into(), t.into());

        if let Some(p) = &self.output {
            let mut t = Table::new();
            t.insert("path".into(), p.to_string_lossy().as_ref().into());
            root.insert("output".into(), t.into());
        }
        root.to_string()
    }
}
