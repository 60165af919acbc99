//! Discrete probability tables over a finite label space.
//!
//! A world is stored in factored form: `P(Y, U, I) = P(U) P(Y) P(I | Y)`.
//! Independence of the prejudice `U` from the truth `Y` therefore holds by
//! construction, and [`validate_world`] only has to measure the two strict
//! inequalities (informative signal, distinct marginals).

mod info;
mod stream;

use alloc::vec::Vec;

pub use info::{entropy, mutual_information, JointTable};
pub use stream::{substream, SimRng, StreamTag};

use crate::Label;

/// Tolerance on the sum of a probability vector.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Default threshold for the strict inequalities checked by [`validate_world`].
pub const STRICT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProbError {
    #[error("label space needs at least 2 labels, got {0}")]
    LabelSpaceTooSmall(usize),
    #[error("probability {value} at index {index} is negative or not finite")]
    InvalidEntry { index: usize, value: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("expected {expected} entries, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("table is empty")]
    Empty,
}

/// The label alphabet `{0, .., K-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelSpace {
    size_k: usize,
}

impl LabelSpace {
    pub fn new(size_k: usize) -> Result<Self, ProbError> {
        if size_k < 2 {
            return Err(ProbError::LabelSpaceTooSmall(size_k));
        }
        Ok(Self { size_k })
    }

    pub fn size(&self) -> usize {
        self.size_k
    }
}

/// A probability vector over a label space.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Builds a distribution, rejecting negative or non-finite weights and
    /// vectors whose sum is off by more than [`NORMALIZATION_TOL`].
    pub fn new(probs: Vec<f64>) -> Result<Self, ProbError> {
        if probs.is_empty() {
            return Err(ProbError::Empty);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(ProbError::InvalidEntry { index, value });
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(ProbError::NotNormalized(total));
        }
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            probs: alloc::vec![1.0 / k as f64; k],
        }
    }

    /// All mass on `label`.
    pub fn point(k: usize, label: Label) -> Self {
        let mut probs = alloc::vec![0.0; k];
        probs[label] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, label: Label) -> f64 {
        self.probs[label]
    }

    pub fn total_variation(&self, other: &Distribution) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// Draws a label by inverting the cumulative distribution.
    ///
    /// Consumes exactly one `u64` from the stream regardless of the outcome.
    pub fn sample<R: rand_core::RngCore + ?Sized>(&self, rng: &mut R) -> Label {
        let u = unit_f64(rng);
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (label, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last_positive = label;
                if u < acc {
                    return label;
                }
            }
        }
        // Rounding left a sliver of mass above the cumulative sum.
        last_positive
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        entropy(self)
    }
}

/// Uniform draw on `[0, 1)` with 53 bits of precision.
pub fn unit_f64<R: rand_core::RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Samples `d` once from `rng`.
pub fn sample<R: rand_core::RngCore + ?Sized>(d: &Distribution, rng: &mut R) -> Label {
    d.sample(rng)
}

/// One row per conditioning label: row `y` is `P(I | Y = y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTable {
    rows: Vec<Distribution>,
}

impl ConditionalTable {
    pub fn new(rows: Vec<Distribution>) -> Result<Self, ProbError> {
        let k = rows.len();
        if k == 0 {
            return Err(ProbError::Empty);
        }
        for row in &rows {
            if row.len() != k {
                return Err(ProbError::DimensionMismatch {
                    expected: k,
                    actual: row.len(),
                });
            }
        }
        Ok(Self { rows })
    }

    /// The noiseless channel: the signal always equals the truth.
    pub fn identity(k: usize) -> Self {
        Self {
            rows: (0..k).map(|y| Distribution::point(k, y)).collect(),
        }
    }

    /// Symmetric channel that keeps the true label with probability
    /// `accuracy` and otherwise spreads the remainder evenly.
    pub fn symmetric(k: usize, accuracy: f64) -> Result<Self, ProbError> {
        let off = (1.0 - accuracy) / (k - 1) as f64;
        let rows = (0..k)
            .map(|y| {
                Distribution::new(
                    (0..k)
                        .map(|i| if i == y { accuracy } else { off })
                        .collect(),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(rows)
    }

    pub fn row(&self, y: Label) -> &Distribution {
        &self.rows[y]
    }

    pub fn rows(&self) -> &[Distribution] {
        &self.rows
    }
}

/// The joint law of truth, prejudice and informative signal.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldDistribution {
    labels: LabelSpace,
    p_y: Distribution,
    p_u: Distribution,
    p_i_given_y: ConditionalTable,
}

impl WorldDistribution {
    pub fn new(
        labels: LabelSpace,
        p_y: Distribution,
        p_u: Distribution,
        p_i_given_y: ConditionalTable,
    ) -> Result<Self, ProbError> {
        let k = labels.size();
        for actual in [p_y.len(), p_u.len(), p_i_given_y.rows.len()] {
            if actual != k {
                return Err(ProbError::DimensionMismatch {
                    expected: k,
                    actual,
                });
            }
        }
        Ok(Self {
            labels,
            p_y,
            p_u,
            p_i_given_y,
        })
    }

    pub fn labels(&self) -> LabelSpace {
        self.labels
    }

    pub fn k(&self) -> usize {
        self.labels.size()
    }

    pub fn p_y(&self) -> &Distribution {
        &self.p_y
    }

    pub fn p_u(&self) -> &Distribution {
        &self.p_u
    }

    pub fn p_i_given_y(&self) -> &ConditionalTable {
        &self.p_i_given_y
    }

    /// `P(Y, I)` with `Y` on rows.
    pub fn joint_y_i(&self) -> JointTable {
        let k = self.k();
        let mut cells = Vec::with_capacity(k * k);
        for y in 0..k {
            let py = self.p_y.prob(y);
            cells.extend(self.p_i_given_y.row(y).probs().iter().map(|p| py * p));
        }
        JointTable::from_cells_unchecked(k, k, cells)
    }

    /// Law of the informative signal, `P(I) = sum_y P(y) P(I | y)`.
    pub fn signal_marginal(&self) -> Distribution {
        Distribution {
            probs: self.joint_y_i().col_marginal(),
        }
    }

    /// `P(Y, U) = P(Y) P(U)`.
    pub fn joint_y_u(&self) -> JointTable {
        JointTable::outer(&self.p_y, &self.p_u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// `I(Y;U) = 0`.
    Independence,
    /// `I(Y;I) > 0`.
    Informativeness,
    /// `P(Y) != P(U)`.
    DistinctMarginals,
}

impl Constraint {
    pub fn describe(&self) -> &'static str {
        match self {
            Constraint::Independence => "independence I(Y;U) = 0",
            Constraint::Informativeness => "informative signal I(Y;I) > 0",
            Constraint::DistinctMarginals => "distinct marginals P(Y) != P(U)",
        }
    }
}

impl core::fmt::Display for Constraint {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.describe())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck {
    pub constraint: Constraint,
    pub passed: bool,
    /// Mutual information in bits, or total-variation distance for
    /// [`Constraint::DistinctMarginals`].
    pub measured: f64,
    /// True when the constraint holds because of how the world is stored
    /// rather than because of the measured value.
    pub structural: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<ConstraintCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, constraint: Constraint) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.constraint == constraint)
    }
}

/// Checks the three distributional constraints of the game.
///
/// `tol` is the margin both strict inequalities must clear; use
/// [`STRICT_TOL`] unless there is a reason not to.
pub fn validate_world(w: &WorldDistribution, tol: f64) -> ValidationReport {
    let mi_yu = mutual_information(&w.joint_y_u());
    let mi_yi = mutual_information(&w.joint_y_i());
    let tv = w.p_y.total_variation(&w.p_u);
    ValidationReport {
        checks: alloc::vec![
            ConstraintCheck {
                constraint: Constraint::Independence,
                passed: true,
                measured: mi_yu,
                structural: true,
            },
            ConstraintCheck {
                constraint: Constraint::Informativeness,
                passed: mi_yi > tol,
                measured: mi_yi,
                structural: false,
            },
            ConstraintCheck {
                constraint: Constraint::DistinctMarginals,
                passed: tv > tol,
                measured: tv,
                structural: false,
            },
        ],
    }
}
