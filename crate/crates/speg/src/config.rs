//! Problem configuration: a single TOML document that pins the system, the
//! constraint sets, the disturbance model, and the penalty parameters.
//! Parsing is strict; unknown keys are rejected so golden files stay
//! trustworthy.

use nalgebra::DVector;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::governor::PenaltyConfig;
use crate::polytope::{DisturbanceSet, Polytope};
use crate::safesets::{LinearSystem, SafeSetLadder};
use crate::wire;

pub const DEFAULT_THETA: f64 = 2.0;
pub const DEFAULT_PHI_QUAD: f64 = 0.01;
pub const DEFAULT_EPS_TIGHT: f64 = 1e-3;
pub const DEFAULT_K_CAP: usize = 50;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub system: SystemSection,
    pub feedback: FeedbackSection,
    pub state_constraints: RowsSection,
    pub input_constraints: RowsSection,
    pub disturbance: DisturbanceSection,
    pub penalty: PenaltySection,
    #[serde(default)]
    pub safe_sets: SafeSetsSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub dt: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackSection {
    pub k: Vec<Vec<f64>>,
}

/// Half-space rows `[n₁, …, n_d, offset]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowsSection {
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSection {
    /// `"box"` or `"ball"`.
    pub kind: String,
    pub radius: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltySection {
    pub horizon: usize,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub phi_quad: Option<f64>,
    pub adjustment_weight: Vec<Vec<f64>>,
    /// Defaults to `1e-6 · (1 + max offset)` of the built ladder.
    #[serde(default)]
    pub eps_zero_tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafeSetsSection {
    #[serde(default)]
    pub eps_tight: Option<f64>,
    #[serde(default)]
    pub k_cap: Option<usize>,
}

impl ProblemConfig {
    pub fn from_toml_str(text: &str) -> Result<ProblemConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<ProblemConfig> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn system(&self) -> Result<LinearSystem> {
        LinearSystem::new(
            wire::rows_to_matrix(&self.system.a, "system.a")?,
            wire::rows_to_matrix(&self.system.b, "system.b")?,
            wire::rows_to_matrix(&self.system.e, "system.e")?,
            self.system.dt,
        )
    }

    pub fn state_set(&self) -> Result<Polytope> {
        rows_to_polytope(&self.state_constraints.rows, "state_constraints")
    }

    pub fn input_set(&self) -> Result<Polytope> {
        rows_to_polytope(&self.input_constraints.rows, "input_constraints")
    }

    pub fn disturbance(&self) -> Result<DisturbanceSet> {
        match self.disturbance.kind.as_str() {
            "box" => DisturbanceSet::box_set(DVector::from_row_slice(&self.disturbance.radius)),
            "ball" => {
                let r = *self
                    .disturbance
                    .radius
                    .first()
                    .ok_or_else(|| Error::Config("ball disturbance needs a radius".into()))?;
                if self.disturbance.radius.len() > 1 {
                    return Err(Error::Config(
                        "ball disturbance takes a single scalar radius; use radius = [r] and dim from E".into(),
                    ));
                }
                DisturbanceSet::ball(r, self.num_disturbances()?)
            }
            other => Err(Error::Config(format!("unknown disturbance kind {other:?}"))),
        }
    }

    fn num_disturbances(&self) -> Result<usize> {
        Ok(self.system()?.num_disturbances())
    }

    pub fn eps_tight(&self) -> f64 {
        self.safe_sets.eps_tight.unwrap_or(DEFAULT_EPS_TIGHT)
    }

    pub fn k_cap(&self) -> usize {
        self.safe_sets.k_cap.unwrap_or(DEFAULT_K_CAP)
    }

    /// Build the ladder and the penalty configuration this document pins.
    pub fn build(&self) -> Result<(SafeSetLadder, PenaltyConfig)> {
        let ladder = SafeSetLadder::build(
            self.system()?,
            wire::rows_to_matrix(&self.feedback.k, "feedback.k")?,
            self.state_set()?,
            self.input_set()?,
            self.disturbance()?,
            self.penalty.horizon,
            self.eps_tight(),
            self.k_cap(),
        )?;
        let penalty = self.penalty_for(&ladder)?;
        Ok((ladder, penalty))
    }

    /// The penalty configuration against an already-built ladder.
    pub fn penalty_for(&self, ladder: &SafeSetLadder) -> Result<PenaltyConfig> {
        PenaltyConfig::new(
            self.penalty.theta.unwrap_or(DEFAULT_THETA),
            self.penalty.phi_quad.unwrap_or(DEFAULT_PHI_QUAD),
            self.penalty.horizon,
            wire::rows_to_matrix(&self.penalty.adjustment_weight, "penalty.adjustment_weight")?,
            self.penalty
                .eps_zero_tol
                .unwrap_or_else(|| PenaltyConfig::default_eps_zero_tol(ladder)),
        )
    }
}

fn rows_to_polytope(rows: &[Vec<f64>], what: &str) -> Result<Polytope> {
    if rows.is_empty() {
        return Err(Error::Config(format!("{what}: at least one row is required")));
    }
    let width = rows[0].len();
    if width < 2 || rows.iter().any(|r| r.len() != width) {
        return Err(Error::Config(format!(
            "{what}: rows must be [n1, …, nd, offset] with a common width"
        )));
    }
    let dim = width - 1;
    let list = rows
        .iter()
        .map(|r| (DVector::from_row_slice(&r[..dim]), r[dim]))
        .collect();
    Polytope::new(dim, list)
}
