use serde::Serialize;

/// A sampled point that decides a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    pub x: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub value: f64,
}

impl Witness {
    pub fn at(x: f64, value: f64) -> Witness {
        Witness {
            order: None,
            x,
            t: None,
            value,
        }
    }

    pub fn with_order(mut self, order: usize) -> Witness {
        self.order = Some(order);
        self
    }

    pub fn with_t(mut self, t: f64) -> Witness {
        self.t = Some(t);
        self
    }
}

/// Three-valued outcome of a numerical class check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails { witness: Witness },
    Inconclusive { reason: String },
}

impl Verdict {
    pub fn fails(witness: Witness) -> Verdict {
        Verdict::Fails { witness }
    }

    pub fn inconclusive(reason: impl Into<String>) -> Verdict {
        Verdict::Inconclusive { reason: reason.into() }
    }

    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }

    pub fn is_fail(&self) -> bool {
        matches!(self, Verdict::Fails { .. })
    }

    pub fn is_inconclusive(&self) -> bool {
        matches!(self, Verdict::Inconclusive { .. })
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Fails { witness } => Some(witness),
            _ => None,
        }
    }

    /// Conjunction: any failure wins, then any inconclusive part.
    pub fn and(&self, other: &Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fails { .. }, _) => self.clone(),
            (_, Verdict::Fails { .. }) => other.clone(),
            (Verdict::Inconclusive { .. }, _) => self.clone(),
            (_, Verdict::Inconclusive { .. }) => other.clone(),
            _ => Verdict::Holds,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails { .. } => "fails",
            Verdict::Inconclusive { .. } => "inconclusive",
        }
    }
}

/// Outcome of a theorem-consequence check.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Check {
    Pass,
    Fail { witnesses: Vec<Witness> },
    NotApplicable,
}

impl Check {
    pub fn passed(&self) -> bool {
        matches!(self, Check::Pass)
    }

    pub fn failed(&self) -> bool {
        matches!(self, Check::Fail { .. })
    }
}
