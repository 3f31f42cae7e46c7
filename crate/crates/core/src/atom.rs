use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::Spin;

/// Bohr magneton over Planck's constant, Hz/G.
pub const BOHR_MAGNETON_HZ_PER_G: f64 = 1.399_624_5e6;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Hyperfine state `|F~, m>` labelled by its weak-field total angular momentum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateLabel {
    pub f: u32,
    pub m: i32,
}

impl StateLabel {
    pub const fn new(f: u32, m: i32) -> Self {
        StateLabel { f, m }
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|F={}, m={}>", self.f, self.m)
    }
}

/// Ground-state constants of a J = 1/2 alkali atom. Frequencies in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AtomSpec {
    pub nuclear_spin: Spin,
    pub electron_spin: Spin,
    pub g_j: f64,
    pub g_i: f64,
    pub hfs_frequency: f64,
    /// mu_B / h in Hz/G.
    pub bohr_magneton: f64,
    pub clock_lower: StateLabel,
    pub clock_upper: StateLabel,
}

impl Default for AtomSpec {
    fn default() -> Self {
        AtomSpec::rubidium87()
    }
}

impl AtomSpec {
    pub fn rubidium87() -> Self {
        AtomSpec {
            nuclear_spin: Spin::from_twice(3),
            electron_spin: Spin::from_twice(1),
            g_j: 2.002_331_13,
            g_i: -0.000_995_141_4,
            hfs_frequency: 6.834_682_611e9,
            bohr_magneton: BOHR_MAGNETON_HZ_PER_G,
            clock_lower: StateLabel::new(1, -1),
            clock_upper: StateLabel::new(2, 1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.electron_spin.twice() != 1 {
            return Err(Error::UnsupportedAtom(format!(
                "electron spin J = {} (only J = 1/2 is supported)",
                self.electron_spin.value()
            )));
        }
        if self.nuclear_spin.is_integer() {
            return Err(Error::UnsupportedAtom(format!(
                "nuclear spin I = {} (half-integer I required for integer F)",
                self.nuclear_spin.value()
            )));
        }
        if !(self.hfs_frequency > 0.0) {
            return Err(Error::param("hfs_frequency", self.hfs_frequency, "must be positive"));
        }
        if !(self.bohr_magneton > 0.0) {
            return Err(Error::param("bohr_magneton", self.bohr_magneton, "must be positive"));
        }
        self.check_label(self.clock_lower)?;
        self.check_label(self.clock_upper)?;
        Ok(())
    }

    /// F~ = I - 1/2.
    pub fn lower_f(&self) -> u32 {
        (self.nuclear_spin.twice() - 1) / 2
    }

    /// F~ = I + 1/2.
    pub fn upper_f(&self) -> u32 {
        self.nuclear_spin.twice().div_ceil(2)
    }

    pub fn manifolds(&self) -> [u32; 2] {
        [self.lower_f(), self.upper_f()]
    }

    /// +1 for the upper manifold, -1 for the lower one (the ± of Breit-Rabi).
    pub fn hyperfine_sign(&self, f: u32) -> Result<f64> {
        if f == self.upper_f() {
            Ok(1.0)
        } else if f == self.lower_f() {
            Ok(-1.0)
        } else {
            Err(Error::InvalidState {
                label: StateLabel::new(f, 0),
                reason: format!(
                    "F~ must be {} or {}",
                    self.lower_f(),
                    self.upper_f()
                ),
            })
        }
    }

    /// Rotating-frame sign: +1 for the lower manifold, -1 for the upper.
    pub fn rotation_sign(&self, f: u32) -> Result<f64> {
        self.hyperfine_sign(f).map(|s| -s)
    }

    pub fn check_label(&self, label: StateLabel) -> Result<()> {
        self.hyperfine_sign(label.f)?;
        if label.m.unsigned_abs() > label.f {
            return Err(Error::InvalidState {
                label,
                reason: "|m| exceeds F~".into(),
            });
        }
        Ok(())
    }

    /// Energy of the manifold at zero field, Hz.
    pub fn zero_field_energy(&self, f: u32) -> Result<f64> {
        let s = self.hyperfine_sign(f)?;
        let two_i_plus_1 = self.nuclear_spin.twice() as f64 + 1.0;
        Ok(-self.hfs_frequency / (2.0 * two_i_plus_1) + s * self.hfs_frequency / 2.0)
    }

    /// All labels of one manifold in basis order (descending m).
    pub fn manifold_labels(&self, f: u32) -> Vec<StateLabel> {
        (0..=2 * f as i32).map(|k| StateLabel::new(f, f as i32 - k)).collect()
    }
}
