use crate::error::{Issues, Result};

/// How the SPDC source output is grouped into entanglement attempts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    /// Consecutive time-bin qubit pairs, one memory pair per photon pair.
    Qubit,
    /// `2^m` consecutive bins read as one qudit pair that yields `m` Bell pairs.
    Qudit,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Qubit => "qubit",
            Mode::Qudit => "qudit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "qubit" => Some(Mode::Qubit),
            "qudit" => Some(Mode::Qudit),
            _ => None,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Number of memory slots swept per attempt (`D`) and number of successful
/// slots needed to finish (`N`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SlotLayout {
    slots: u32,
    pairs: u32,
}

impl SlotLayout {
    pub fn new(slots: u32, pairs: u32) -> Result<Self> {
        if pairs == 0 || pairs > slots {
            return Err(crate::error::invalid(
                "layout",
                format!("need 1 <= N <= D, got D = {slots}, N = {pairs}"),
            ));
        }
        Ok(Self { slots, pairs })
    }

    /// `D`
    pub fn slots(self) -> u32 {
        self.slots
    }

    /// `N`
    pub fn pairs(self) -> u32 {
        self.pairs
    }
}

/// Largest supported target pair count; `2^m` bins must stay representable.
pub const MAX_PAIRS: u32 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    /// Squeezing parameter λ.
    pub lambda: f64,
    /// Pump repetition rate, Hz.
    pub rep_rate: f64,
    /// Target number of event-ready pairs `m`.
    pub pairs: u32,
    /// Multiplexing factor `n`.
    pub multiplexing: u32,
    pub mode: Mode,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            rep_rate: 1e7,
            pairs: 2,
            multiplexing: 1,
            mode: Mode::Qudit,
        }
    }
}

impl SourceConfig {
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    /// Qubits written per memory slot by one heralded photon: `m` for a
    /// qudit, 1 for a time-bin qubit.
    pub fn encoding_bits(&self) -> u32 {
        match self.mode {
            Mode::Qubit => 1,
            Mode::Qudit => self.pairs,
        }
    }

    /// Time bins per photon-pair window seen by one memory slot.
    pub fn window_bins(&self) -> u32 {
        1 << self.encoding_bits()
    }

    pub fn layout(&self) -> SlotLayout {
        let (slots, pairs) = match self.mode {
            Mode::Qubit => (self.pairs * self.multiplexing, self.pairs),
            Mode::Qudit => (self.multiplexing, 1),
        };
        SlotLayout { slots, pairs }
    }

    /// Duration of one attempt over all slots, τ_c in seconds.
    pub fn attempt_duration(&self) -> f64 {
        let bins = match self.mode {
            Mode::Qubit => 2.0 * f64::from(self.pairs),
            Mode::Qudit => f64::from(1u32 << self.pairs),
        };
        bins * f64::from(self.multiplexing) / self.rep_rate
    }

    pub(crate) fn collect_issues(&self, issues: &mut Issues, section: &str) {
        let p = |k: &str| format!("{section}.{k}");
        if !(0.0..1.0).contains(&self.lambda) {
            issues.push(p("lambda"), format!("must be in [0, 1), got {}", self.lambda));
        }
        issues.positive(&p("rep_rate"), self.rep_rate);
        if self.pairs == 0 || self.pairs > MAX_PAIRS {
            issues.push(p("pairs"), format!("must be in 1..={MAX_PAIRS}, got {}", self.pairs));
        }
        if self.multiplexing == 0 {
            issues.push(p("multiplexing"), "must be >= 1");
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::default();
        self.collect_issues(&mut issues, "source");
        issues.into_result().map_err(Into::into)
    }
}
