//! Joint-distribution representation and probability algebra for three-node
//! inference networks: two binary evidence variables `E1`, `E2` and one binary
//! conclusion variable `C`.
//!
//! A network is an eight-cell contingency table holding the full joint
//! distribution `P(e1, e2, c)`. Cells are kept in a fixed lexicographic order
//! over `(e1, e2, c)` with 0 before 1, which is also the serialized order.

use std::fmt;
use thiserror::Error;

/// Number of cells in the joint table over three binary variables.
pub const CELL_COUNT: usize = 8;

/// Minimum mass an `(e1, e2)` slice must carry for its conditional to be defined.
///
/// Uniform simplex sampling makes exact zeros measure-zero, but tables loaded
/// from files may contain them; slices below this mass raise
/// [`JointError::DegenerateSlice`] instead of returning 0/0.
pub const MIN_SLICE_MASS: f64 = 1e-12;

/// Strict tolerance on total mass accepted by [`JointTable::new`].
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Loose tolerance used when loading tables from text: deviations up to this
/// are renormalized away, anything larger is rejected as corrupt.
pub const LOAD_MASS_TOLERANCE: f64 = 1e-9;

/// One of the three network variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    E1,
    E2,
    C,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::E1 => write!(f, "E1"),
            Var::E2 => write!(f, "E2"),
            Var::C => write!(f, "C"),
        }
    }
}

/// Errors from table construction and conditional-probability queries.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum JointError {
    /// A cell is negative or not finite.
    #[error("cell {index} is {value}, expected a finite probability >= 0")]
    InvalidCell { index: usize, value: f64 },
    /// Total mass deviates from 1 beyond the allowed tolerance.
    #[error("cells sum to {sum}, more than {tolerance} away from 1")]
    UnnormalizedMass { sum: f64, tolerance: f64 },
    /// An `(e1, e2)` slice carries too little mass for `P(C | e1, e2)`.
    #[error("slice (e1={e1}, e2={e2}) has mass {mass}, below {MIN_SLICE_MASS}; conditional undefined")]
    DegenerateSlice { e1: bool, e2: bool, mass: f64 },
    /// A single-variable marginal is too extreme for conditioning on it.
    #[error("marginal mass {mass} for {var}={value} is below {MIN_SLICE_MASS}; conditional undefined")]
    DegenerateMarginal { var: Var, value: bool, mass: f64 },
}

/// Index of the cell `(e1, e2, c)` in the fixed serialization order.
#[inline]
pub fn cell_index(e1: bool, e2: bool, c: bool) -> usize {
    ((e1 as usize) << 2) | ((e2 as usize) << 1) | (c as usize)
}

/// Index of the `(e1, e2)` slot in four-entry conditional arrays.
#[inline]
pub fn pair_index(e1: bool, e2: bool) -> usize {
    ((e1 as usize) << 1) | (e2 as usize)
}

/// Eight-cell joint probability distribution over `(E1, E2, C)`.
///
/// Invariants (enforced on construction): every cell is finite and
/// non-negative, and the cells sum to 1 within [`MASS_TOLERANCE`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointTable {
    cells: [f64; CELL_COUNT],
}

impl JointTable {
    /// Builds a table from cells already normalized to unit mass.
    pub fn new(cells: [f64; CELL_COUNT]) -> Result<Self, JointError> {
        Self::check_cells(&cells)?;
        let sum: f64 = cells.iter().sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(JointError::UnnormalizedMass {
                sum,
                tolerance: MASS_TOLERANCE,
            });
        }
        Ok(JointTable { cells })
    }

    /// Builds a table from cells whose mass may have drifted in text
    /// round-trips: deviations up to [`LOAD_MASS_TOLERANCE`] are renormalized,
    /// larger ones are rejected. Cells already within the strict tolerance are
    /// kept bit for bit so loading is idempotent.
    pub fn from_unnormalized(cells: [f64; CELL_COUNT]) -> Result<Self, JointError> {
        Self::check_cells(&cells)?;
        let sum: f64 = cells.iter().sum();
        if (sum - 1.0).abs() > LOAD_MASS_TOLERANCE {
            return Err(JointError::UnnormalizedMass {
                sum,
                tolerance: LOAD_MASS_TOLERANCE,
            });
        }
        if (sum - 1.0).abs() <= MASS_TOLERANCE {
            return Ok(JointTable { cells });
        }
        let mut cells = cells;
        for cell in &mut cells {
            *cell /= sum;
        }
        Ok(JointTable { cells })
    }

    fn check_cells(cells: &[f64; CELL_COUNT]) -> Result<(), JointError> {
        for (index, &value) in cells.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(JointError::InvalidCell { index, value });
            }
        }
        Ok(())
    }

    /// The table with all eight cells equal to 1/8.
    pub fn uniform() -> Self {
        JointTable {
            cells: [0.125; CELL_COUNT],
        }
    }

    /// Cells in `(e1, e2, c)` lexicographic order.
    #[inline]
    pub fn cells(&self) -> &[f64; CELL_COUNT] {
        &self.cells
    }

    /// The probability of one joint state.
    #[inline]
    pub fn cell(&self, e1: bool, e2: bool, c: bool) -> f64 {
        self.cells[cell_index(e1, e2, c)]
    }

    /// Marginal probability that `var` is true.
    pub fn marginal(&self, var: Var) -> f64 {
        let bit = match var {
            Var::E1 => 2,
            Var::E2 => 1,
            Var::C => 0,
        };
        self.cells
            .iter()
            .enumerate()
            .filter(|(i, _)| (i >> bit) & 1 == 1)
            .map(|(_, &v)| v)
            .sum()
    }

    /// Mass of the `(e1, e2)` slice, i.e. `P(e1, e2)`.
    #[inline]
    pub fn pair_mass(&self, e1: bool, e2: bool) -> f64 {
        self.cell(e1, e2, false) + self.cell(e1, e2, true)
    }

    /// `P(C | e1, e2)`.
    pub fn conditional_c(&self, e1: bool, e2: bool) -> Result<f64, JointError> {
        let mass = self.pair_mass(e1, e2);
        if mass < MIN_SLICE_MASS {
            return Err(JointError::DegenerateSlice { e1, e2, mass });
        }
        Ok(self.cell(e1, e2, true) / mass)
    }

    /// `P(C | E1=value)`, marginalizing over `E2`.
    pub fn conditional_c_given_e1(&self, value: bool) -> Result<f64, JointError> {
        let mass = self.pair_mass(value, false) + self.pair_mass(value, true);
        if mass < MIN_SLICE_MASS {
            return Err(JointError::DegenerateMarginal {
                var: Var::E1,
                value,
                mass,
            });
        }
        Ok((self.cell(value, false, true) + self.cell(value, true, true)) / mass)
    }

    /// `P(C | E2=value)`, marginalizing over `E1`.
    pub fn conditional_c_given_e2(&self, value: bool) -> Result<f64, JointError> {
        let mass = self.pair_mass(false, value) + self.pair_mass(true, value);
        if mass < MIN_SLICE_MASS {
            return Err(JointError::DegenerateMarginal {
                var: Var::E2,
                value,
                mass,
            });
        }
        Ok((self.cell(false, value, true) + self.cell(true, value, true)) / mass)
    }

    /// Signed additivity defect
    /// `P(C|E1&E2) - P(C|E1&~E2) - P(C|~E1&E2) + P(C|~E1&~E2)`.
    ///
    /// Zero exactly when the four conditionals are additive, i.e. when a
    /// three-parameter linear response can reproduce all of them.
    pub fn additivity_defect(&self) -> Result<f64, JointError> {
        Ok(self.conditional_c(true, true)? - self.conditional_c(true, false)?
            - self.conditional_c(false, true)?
            + self.conditional_c(false, false)?)
    }

    /// Absolute value of [`additivity_defect`](Self::additivity_defect).
    pub fn additivity_factor(&self) -> Result<f64, JointError> {
        Ok(self.additivity_defect()?.abs())
    }

    /// The four conditionals `P(C | e1, e2)` plus the three priors.
    pub fn conditional_profile(&self) -> Result<ConditionalProfile, JointError> {
        let mut p_c_given = [0.0; 4];
        for e1 in [false, true] {
            for e2 in [false, true] {
                p_c_given[pair_index(e1, e2)] = self.conditional_c(e1, e2)?;
            }
        }
        Ok(ConditionalProfile {
            p_c_given,
            prior_e1: self.marginal(Var::E1),
            prior_e2: self.marginal(Var::E2),
            prior_c: self.marginal(Var::C),
        })
    }
}

/// Conditional view of a table: `P(C | e1, e2)` for the four evidence states,
/// plus the three base rates. Indexed by [`pair_index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalProfile {
    pub p_c_given: [f64; 4],
    pub prior_e1: f64,
    pub prior_e2: f64,
    pub prior_c: f64,
}

impl ConditionalProfile {
    /// `P(C | e1, e2)` from the profile.
    #[inline]
    pub fn conditional(&self, e1: bool, e2: bool) -> f64 {
        self.p_c_given[pair_index(e1, e2)]
    }
}
