use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Energy store that drains every step and refills on forage events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metabolism {
    pub energy: f64,
    pub initial_energy: f64,
    pub depletion: f64,
    pub replenish: f64,
    pub energy_cap: f64,
}

impl Default for Metabolism {
    fn default() -> Self {
        Self::new(100.0, 1.0, 50.0, 200.0)
    }
}

impl Metabolism {
    /// A full store (`energy == initial_energy`).
    pub fn new(initial_energy: f64, depletion: f64, replenish: f64, energy_cap: f64) -> Self {
        Self {
            energy: initial_energy,
            initial_energy,
            depletion,
            replenish,
            energy_cap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("initial_energy", self.initial_energy),
            ("depletion", self.depletion),
            ("replenish", self.replenish),
            ("energy_cap", self.energy_cap),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, "must be finite and > 0"));
            }
        }
        if self.initial_energy > self.energy_cap {
            return Err(Error::config("initial_energy", "exceeds energy_cap"));
        }
        if !(0.0..=self.energy_cap).contains(&self.energy) {
            return Err(Error::config("energy", "outside [0, energy_cap]"));
        }
        Ok(())
    }

    pub fn refilled(&self) -> Self {
        Self {
            energy: self.initial_energy,
            ..*self
        }
    }

    /// Steps needed to starve from a full store without foraging.
    pub fn starvation_steps(&self) -> u64 {
        (self.initial_energy / self.depletion).ceil() as u64
    }

    pub(crate) fn apply_with_cost(self, foraged: bool, extra_cost: f64) -> (Self, bool) {
        let gain = if foraged { self.replenish } else { 0.0 };
        let energy = (self.energy - self.depletion - extra_cost + gain).min(self.energy_cap);
        let died = energy <= 0.0;
        let energy = if died { 0.0 } else { energy };
        (Self { energy, ..self }, died)
    }
}

/// One metabolic tick: drain `depletion`, add `replenish` if foraged, cap the
/// store, and report death when it empties.
pub fn apply_metabolism(m: Metabolism, foraged: bool) -> (Metabolism, bool) {
    m.apply_with_cost(foraged, 0.0)
}
