//! Reference route: solve the protection problem first, then walk the
//! depth ladder down until a feasible depth appears.
//!
//! This is the naive series-of-problems implementation the one-shot
//! governor is validated against: it is meant to be slow and right, not
//! fast. [`agreement_report`] drives both routes over sampled states and
//! compares the extracted depths, inputs, and mean wall times.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::governor::{self, PenaltyConfig};
use crate::qp::{self, QpStatus, QuadraticProgram};
use crate::safesets::SafeSetLadder;
use crate::tol::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemStatus {
    Feasible,
    Infeasible,
}

/// Outcome of the series route at one state.
#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Input returned by the first feasible subproblem, if any.
    pub u: Option<DVector<f64>>,
    /// `horizon+1` when the protection problem is feasible, otherwise the
    /// largest feasible depth, `-1` when every subproblem is infeasible.
    pub depth: i64,
    /// Status of each subproblem actually solved, protection first, then
    /// depths `horizon, horizon-1, …`.
    pub per_problem_status: Vec<ProblemStatus>,
    pub wall_time: Duration,
}

/// Stack the input-space rows of groups `0..=upto` at a fixed state, plus
/// the input-set rows: the admissible-input system for depth `upto`.
fn input_rows_at(
    ladder: &SafeSetLadder,
    x: &DVector<f64>,
    upto: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    let m = ladder.system().num_inputs();
    let n = ladder.system().num_states();
    let groups = &ladder.groups()[..=upto];
    let total: usize =
        groups.iter().map(|g| g.num_rows()).sum::<usize>() + ladder.input_set().num_rows();
    let mut cons = DMatrix::zeros(total, m);
    let mut offs = DVector::zeros(total);
    let mut r = 0;
    for g in groups {
        for i in 0..g.num_rows() {
            for j in 0..m {
                cons[(r, j)] = g.input_coeffs()[(i, j)];
            }
            let mut shift = 0.0;
            for j in 0..n {
                shift += g.state_coeffs()[(i, j)] * x[j];
            }
            offs[r] = g.offsets()[i] - shift;
            r += 1;
        }
    }
    for i in 0..ladder.input_set().num_rows() {
        for j in 0..m {
            cons[(r, j)] = ladder.input_set().normals()[(i, j)];
        }
        offs[r] = ladder.input_set().offsets()[i];
        r += 1;
    }
    (cons, offs)
}

/// The series route: minimize the adjustment subject to the full
/// (protection) constraint set; if that is infeasible, test depths
/// `horizon` down to 0 by phase-one feasibility and return the first hit.
pub fn solve_series(
    ladder: &SafeSetLadder,
    cfg: &PenaltyConfig,
    x: &DVector<f64>,
    u_nom: &DVector<f64>,
) -> Result<OracleResult> {
    if cfg.horizon() != ladder.horizon() {
        return Err(Error::Config("penalty horizon does not match ladder horizon".into()));
    }
    let started = Instant::now();
    let tols = Tolerances::shared();
    let mut statuses = Vec::new();

    // Protection problem: guard every depth (the cumulative system is the
    // terminal system under the nesting invariant) and keep the adjustment
    // minimal.
    let terminal_index = ladder.groups().len() - 1;
    let (cons, offs) = input_rows_at(ladder, x, terminal_index);
    let protection = qp::solve(
        &QuadraticProgram::new(
            cfg.adjustment_weight() * 2.0,
            -(cfg.adjustment_weight() * u_nom) * 2.0,
            cons,
            offs,
        )?,
        tols,
    )?;
    match protection.status {
        QpStatus::Optimal => {
            statuses.push(ProblemStatus::Feasible);
            return Ok(OracleResult {
                u: Some(protection.z),
                depth: (ladder.horizon() + 1) as i64,
                per_problem_status: statuses,
                wall_time: started.elapsed(),
            });
        }
        QpStatus::Infeasible => statuses.push(ProblemStatus::Infeasible),
        QpStatus::MaxIterations => {
            return Err(Error::Solver("protection subproblem hit the iteration cap".into()))
        }
    }

    for k in (0..=ladder.horizon()).rev() {
        let (cons, offs) = input_rows_at(ladder, x, k);
        let check = qp::phase_one(&cons, &offs, cfg.eps_zero_tol(), tols)?;
        if check.feasible {
            statuses.push(ProblemStatus::Feasible);
            return Ok(OracleResult {
                u: Some(check.witness),
                depth: k as i64,
                per_problem_status: statuses,
                wall_time: started.elapsed(),
            });
        }
        statuses.push(ProblemStatus::Infeasible);
    }

    Ok(OracleResult {
        u: None,
        depth: -1,
        per_problem_status: statuses,
        wall_time: started.elapsed(),
    })
}

/// One compared state in an agreement run.
#[derive(Debug, Clone, Serialize)]
pub struct AgreementSample {
    pub x: Vec<f64>,
    pub governor_k_star: i64,
    pub oracle_depth: i64,
    /// `‖u_governor - u_oracle‖∞`, filled in protected cases only (the
    /// depth subproblems carry no cost, so their inputs are not comparable).
    pub u_gap: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AgreementReport {
    pub samples: usize,
    pub matches: usize,
    pub max_protected_u_gap: f64,
    pub mean_governor_seconds: f64,
    pub mean_series_seconds: f64,
    pub mismatches: Vec<AgreementSample>,
}

impl AgreementReport {
    pub fn all_match(&self) -> bool {
        self.matches == self.samples
    }

    /// How many times slower the series route is per call.
    pub fn series_slowdown(&self) -> f64 {
        if self.mean_governor_seconds == 0.0 {
            f64::INFINITY
        } else {
            self.mean_series_seconds / self.mean_governor_seconds
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Run both routes on `samples` states drawn uniformly from `bounds`
/// (seeded, reproducible) with a fixed nominal input, and compare.
pub fn agreement_report(
    ladder: &SafeSetLadder,
    cfg: &PenaltyConfig,
    bounds: &[(f64, f64)],
    u_nom: &DVector<f64>,
    samples: usize,
    seed: u64,
) -> Result<AgreementReport> {
    if bounds.len() != ladder.system().num_states() {
        return Err(Error::Dimension("sampling box dimension mismatch".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matches = 0usize;
    let mut max_gap = 0.0f64;
    let mut governor_total = Duration::ZERO;
    let mut series_total = Duration::ZERO;
    let mut mismatches = Vec::new();

    for _ in 0..samples {
        let x = DVector::from_fn(ladder.system().num_states(), |i, _| {
            rng.random_range(bounds[i].0..bounds[i].1)
        });

        let g_start = Instant::now();
        let gov = governor::govern(ladder, cfg, &x, u_nom)?;
        governor_total += g_start.elapsed();

        let orc = solve_series(ladder, cfg, &x, u_nom)?;
        series_total += orc.wall_time;

        let protected = gov.k_star == (ladder.horizon() + 1) as i64;
        let u_gap = if protected && orc.depth == gov.k_star {
            let gap = orc
                .u
                .as_ref()
                .map(|u| (u - &gov.u).amax())
                .unwrap_or(f64::INFINITY);
            max_gap = max_gap.max(gap);
            Some(gap)
        } else {
            None
        };

        if gov.k_star == orc.depth {
            matches += 1;
        } else {
            mismatches.push(AgreementSample {
                x: x.iter().copied().collect(),
                governor_k_star: gov.k_star,
                oracle_depth: orc.depth,
                u_gap,
            });
        }
    }

    Ok(AgreementReport {
        samples,
        matches,
        max_protected_u_gap: max_gap,
        mean_governor_seconds: governor_total.as_secs_f64() / samples.max(1) as f64,
        mean_series_seconds: series_total.as_secs_f64() / samples.max(1) as f64,
        mismatches,
    })
}
