use serde::{Deserialize, Serialize};

/// Counts oracle invocations made by one run.
///
/// `base_cost_per_call` converts oracle calls into queries to whatever the
/// oracle was built from (e.g. a median-boosted or estimation-based oracle
/// spends many inner queries per call).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLedger {
    pub calls_plain: u64,
    pub calls_adjoint: u64,
    pub calls_controlled: u64,
    pub base_cost_per_call: u64,
}

impl Default for QueryLedger {
    fn default() -> Self {
        Self::new(1)
    }
}

impl QueryLedger {
    pub fn new(base_cost_per_call: u64) -> Self {
        Self {
            calls_plain: 0,
            calls_adjoint: 0,
            calls_controlled: 0,
            base_cost_per_call,
        }
    }

    pub fn charge_plain(&mut self, count: u64) {
        self.calls_plain += count;
    }

    pub fn charge_adjoint(&mut self, count: u64) {
        self.calls_adjoint += count;
    }

    pub fn charge_controlled(&mut self, count: u64) {
        self.calls_controlled += count;
    }

    /// Oracle calls of every kind, ignoring the base cost.
    pub fn calls(&self) -> u64 {
        self.calls_plain + self.calls_adjoint + self.calls_controlled
    }

    /// Total cost in base-query units.
    pub fn total(&self) -> u64 {
        self.calls() * self.base_cost_per_call
    }
}
