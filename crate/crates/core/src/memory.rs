use crate::error::{Issues, Result};

/// Relative Pauli error weights of the memory decoherence channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliWeights {
    pub identity: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl PauliWeights {
    /// Fully depolarizing: all four weights equal.
    pub const DEPOLARIZING: PauliWeights = PauliWeights {
        identity: 0.25,
        x: 0.25,
        y: 0.25,
        z: 0.25,
    };

    pub fn sum(&self) -> f64 {
        self.identity + self.x + self.y + self.z
    }

    pub fn error_square_sum(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }
}

impl Default for PauliWeights {
    fn default() -> Self {
        Self::DEPOLARIZING
    }
}

/// Tolerance on the Pauli weight normalization.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryConfig {
    /// Storage efficiency η, detection included.
    pub efficiency: f64,
    /// Coherence time of Alice's memories, s.
    pub coherence_a: f64,
    /// Coherence time of Bob's memories, s.
    pub coherence_b: f64,
    pub weights: PauliWeights,
    /// Dark-count probability per detection window.
    pub dark_count: f64,
    /// Storage cutoff for the first pair (qubit mode), s.
    pub cutoff: Option<f64>,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            efficiency: 0.5,
            coherence_a: 10.0,
            coherence_b: 10.0,
            weights: PauliWeights::DEPOLARIZING,
            dark_count: 1.6e-5,
            cutoff: None,
        }
    }
}

impl MemoryConfig {
    pub fn with_cutoff(&self, cutoff: Option<f64>) -> Self {
        Self {
            cutoff,
            ..self.clone()
        }
    }

    pub(crate) fn collect_issues(&self, issues: &mut Issues, section: &str) {
        let p = |k: &str| format!("{section}.{k}");
        issues.probability(&p("efficiency"), self.efficiency);
        issues.positive(&p("coherence_a"), self.coherence_a);
        issues.positive(&p("coherence_b"), self.coherence_b);
        if !(0.0..1.0).contains(&self.dark_count) {
            issues.push(p("dark_count"), format!("must be in [0, 1), got {}", self.dark_count));
        }
        let w = self.weights;
        for (k, v) in [("eps_1", w.identity), ("eps_x", w.x), ("eps_y", w.y), ("eps_z", w.z)] {
            if !(v >= 0.0 && v.is_finite()) {
                issues.push(p(k), format!("must be >= 0, got {v}"));
            }
        }
        if (w.sum() - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            issues.push(
                p("eps"),
                format!("Pauli weights must sum to 1, got {}", w.sum()),
            );
        }
        if let Some(t) = self.cutoff {
            issues.positive(&p("t_cut"), t);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut issues = Issues::default();
        self.collect_issues(&mut issues, "memory");
        issues.into_result().map_err(Into::into)
    }

    /// Soft problems that do not block a run.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(t) = self.cutoff {
            let shortest = self.coherence_a.min(self.coherence_b);
            if t >= shortest {
                out.push(format!(
                    "cutoff {t} s is not below the memory coherence time {shortest} s"
                ));
            }
        }
        out
    }
}
