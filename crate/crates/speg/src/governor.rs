//! The one-shot safety governor.
//!
//! At a state `x` with nominal input `u_nom`, the governor solves a single
//! strictly convex QP over `(u, ε₀, …, ε_{horizon+1})`:
//!
//! * each constraint group of depth `k` is relaxed by a shared slack `ε_k`;
//! * slacks are ordered, `0 ≤ ε₀ ≤ ε₁ ≤ … ≤ ε_{horizon+1}`;
//! * the cost adds the adjustment penalty `(u_nom - u)ᵀ S (u_nom - u)` and
//!   geometrically weighted slack penalties `θ^{horizon+2-k} φ(ε_k)` with
//!   `φ(ε) = ε + a ε²`.
//!
//! Violating a shallow group is always dearer than any savings at deeper
//! groups, so the optimal slack pattern reveals the deepest constraint
//! depth still attainable: `k_star` is the largest `k` with `ε_k ≈ 0`.
//! When every group can be satisfied the solution coincides with the
//! minimally adjusted safe input; when none can, the governor still
//! returns the input minimizing the weighted violation.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qp::{self, QpStatus, QuadraticProgram};
use crate::safesets::SafeSetLadder;
use crate::tol::Tolerances;

/// Penalty and weighting parameters for the governor QP.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    theta: f64,
    phi_quad: f64,
    horizon: usize,
    adjustment_weight: DMatrix<f64>,
    eps_zero_tol: f64,
}

impl PenaltyConfig {
    /// `theta` must exceed 1, `phi_quad` is the quadratic coefficient of
    /// `φ(ε) = ε + a ε²` (nonnegative), `adjustment_weight` must be
    /// symmetric positive definite.
    pub fn new(
        theta: f64,
        phi_quad: f64,
        horizon: usize,
        adjustment_weight: DMatrix<f64>,
        eps_zero_tol: f64,
    ) -> Result<Self> {
        if !(theta.is_finite() && theta > 1.0) {
            return Err(Error::Config("theta must be finite and greater than 1".into()));
        }
        if !(phi_quad.is_finite() && phi_quad >= 0.0) {
            return Err(Error::Config("phi_quad must be finite and nonnegative".into()));
        }
        if adjustment_weight.nrows() != adjustment_weight.ncols()
            || adjustment_weight.nrows() == 0
        {
            return Err(Error::Dimension("adjustment weight must be square".into()));
        }
        let mut sym = adjustment_weight.clone();
        for i in 0..sym.nrows() {
            for j in 0..sym.ncols() {
                if (sym[(i, j)] - adjustment_weight[(j, i)]).abs() > 1e-12 {
                    return Err(Error::Config("adjustment weight must be symmetric".into()));
                }
                sym[(i, j)] = 0.5 * (adjustment_weight[(i, j)] + adjustment_weight[(j, i)]);
            }
        }
        if Cholesky::new(sym).is_none() {
            return Err(Error::NotPositiveDefinite("adjustment weight".into()));
        }
        if !(eps_zero_tol.is_finite() && eps_zero_tol > 0.0) {
            return Err(Error::Config("eps_zero_tol must be positive".into()));
        }
        Ok(PenaltyConfig { theta, phi_quad, horizon, adjustment_weight, eps_zero_tol })
    }

    /// Default slack-zero tolerance for a ladder: scales with the largest
    /// constraint offset since slacks live in constraint units.
    pub fn default_eps_zero_tol(ladder: &SafeSetLadder) -> f64 {
        1e-6 * (1.0 + ladder.max_offset())
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi_quad(&self) -> f64 {
        self.phi_quad
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn adjustment_weight(&self) -> &DMatrix<f64> {
        &self.adjustment_weight
    }

    pub fn eps_zero_tol(&self) -> f64 {
        self.eps_zero_tol
    }

    /// Number of slack variables: depths `0..=horizon` plus the terminal one.
    pub fn num_slacks(&self) -> usize {
        self.horizon + 2
    }

    /// Weight `θ^{horizon+2-k}` on the depth-k slack penalty.
    pub fn depth_weight(&self, k: usize) -> f64 {
        self.theta.powi((self.horizon + 2 - k) as i32)
    }

    /// `φ(ε) = ε + a ε²`.
    pub fn phi(&self, eps: f64) -> f64 {
        eps + self.phi_quad * eps * eps
    }

    /// Checks `φ(0) = 0`, `φ'(0) = 1` by central difference, and convexity
    /// of `φ` on a grid over `[0, 10]`.
    pub fn phi_properties_hold(&self) -> bool {
        if self.phi(0.0) != 0.0 {
            return false;
        }
        let h = 1e-7;
        let slope = (self.phi(h) - self.phi(-h)) / (2.0 * h);
        if (slope - 1.0).abs() > 1e-5 {
            return false;
        }
        let grid = 100;
        for i in 1..grid {
            let eps = 10.0 * i as f64 / grid as f64;
            let dd = self.phi(eps + h) - 2.0 * self.phi(eps) + self.phi(eps - h);
            if dd < -1e-9 {
                return false;
            }
        }
        true
    }

    /// The model cost `(u_nom - u)ᵀ S (u_nom - u) + Σ_k θ^{horizon+2-k} φ(ε_k)`.
    pub fn objective_value(
        &self,
        u_nom: &DVector<f64>,
        u: &DVector<f64>,
        slacks: &DVector<f64>,
    ) -> f64 {
        let d = u_nom - u;
        let mut cost = (self.adjustment_weight.clone() * &d).dot(&d);
        for k in 0..self.num_slacks() {
            cost += self.depth_weight(k) * self.phi(slacks[k]);
        }
        cost
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QpDiag {
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Governor output at one state.
#[derive(Debug, Clone)]
pub struct GovernorSolution {
    pub u: DVector<f64>,
    /// Slack profile `ε₀..ε_{horizon+1}`, nondecreasing.
    pub slacks: DVector<f64>,
    /// Largest depth with a vanishing slack: `horizon+1` means protected
    /// (the terminal group holds), `-1` means no depth is attainable.
    pub k_star: i64,
    pub qp: QpDiag,
}

impl GovernorSolution {
    pub fn is_protected(&self, cfg: &PenaltyConfig) -> bool {
        self.k_star == (cfg.horizon() + 1) as i64
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            u: Vec<f64>,
            eps: Vec<f64>,
            k_star: i64,
            qp: &'a QpDiag,
        }
        Ok(serde_json::to_string_pretty(&Doc {
            u: self.u.iter().copied().collect(),
            eps: self.slacks.iter().copied().collect(),
            k_star: self.k_star,
            qp: &self.qp,
        })?)
    }
}

/// Assemble the governor QP at state `x` with nominal input `u_nom`.
///
/// Decision vector `z = (u, ε₀, …, ε_{horizon+1})`. When `phi_quad` is zero
/// a small curvature floor keeps the slack block positive definite.
pub fn assemble(
    ladder: &SafeSetLadder,
    cfg: &PenaltyConfig,
    x: &DVector<f64>,
    u_nom: &DVector<f64>,
) -> Result<QuadraticProgram> {
    if cfg.horizon() != ladder.horizon() {
        return Err(Error::Config(format!(
            "penalty horizon {} does not match ladder horizon {}",
            cfg.horizon(),
            ladder.horizon()
        )));
    }
    let n = ladder.system().num_states();
    let m = ladder.system().num_inputs();
    if x.len() != n {
        return Err(Error::Dimension(format!("state has length {}, expected {n}", x.len())));
    }
    if u_nom.len() != m {
        return Err(Error::Dimension(format!(
            "nominal input has length {}, expected {m}",
            u_nom.len()
        )));
    }
    if cfg.adjustment_weight().nrows() != m {
        return Err(Error::Dimension("adjustment weight does not match input dimension".into()));
    }

    let slacks = cfg.num_slacks();
    let nv = m + slacks;
    let mut hessian = DMatrix::zeros(nv, nv);
    hessian
        .view_mut((0, 0), (m, m))
        .copy_from(&(cfg.adjustment_weight() * 2.0));
    for k in 0..slacks {
        let curv = 2.0 * cfg.phi_quad() * cfg.depth_weight(k);
        hessian[(m + k, m + k)] = if curv > 0.0 { curv } else { 1e-8 };
    }
    let mut linear = DVector::zeros(nv);
    linear
        .rows_mut(0, m)
        .copy_from(&(-(cfg.adjustment_weight() * u_nom) * 2.0));
    for k in 0..slacks {
        linear[m + k] = cfg.depth_weight(k);
    }

    let group_rows: usize = ladder.groups().iter().map(|g| g.num_rows()).sum();
    let input_rows = ladder.input_set().num_rows();
    let order_rows = 2 * (cfg.horizon() + 1);
    let total = group_rows + input_rows + order_rows;
    let mut cons = DMatrix::zeros(total, nv);
    let mut offs = DVector::zeros(total);

    let mut r = 0;
    for (gi, group) in ladder.groups().iter().enumerate() {
        for i in 0..group.num_rows() {
            for j in 0..m {
                cons[(r, j)] = group.input_coeffs()[(i, j)];
            }
            cons[(r, m + gi)] = -1.0;
            let mut shift = 0.0;
            for j in 0..n {
                shift += group.state_coeffs()[(i, j)] * x[j];
            }
            offs[r] = group.offsets()[i] - shift;
            r += 1;
        }
    }
    for i in 0..input_rows {
        for j in 0..m {
            cons[(r, j)] = ladder.input_set().normals()[(i, j)];
        }
        offs[r] = ladder.input_set().offsets()[i];
        r += 1;
    }
    for k in 0..=cfg.horizon() {
        cons[(r, m + k)] = -1.0; // 0 ≤ ε_k
        r += 1;
        cons[(r, m + k)] = 1.0; // ε_k ≤ ε_{k+1}
        cons[(r, m + k + 1)] = -1.0;
        r += 1;
    }
    debug_assert_eq!(r, total);

    QuadraticProgram::new(hessian, linear, cons, offs)
}

/// Solve the governor QP and extract the governed input, the slack profile
/// and `k_star`.
///
/// The QP is feasible by construction (inputs range over a nonempty set and
/// every mixed row is slack-relaxed), so any non-optimal solver status is a
/// hard error.
pub fn govern(
    ladder: &SafeSetLadder,
    cfg: &PenaltyConfig,
    x: &DVector<f64>,
    u_nom: &DVector<f64>,
) -> Result<GovernorSolution> {
    let qp = assemble(ladder, cfg, x, u_nom)?;
    let sol = qp::solve(&qp, Tolerances::shared())?;
    if sol.status != QpStatus::Optimal {
        return Err(Error::Solver(format!(
            "governor subproblem ended with status {:?} (kkt residual {:.3e})",
            sol.status, sol.kkt_residual
        )));
    }
    let m = ladder.system().num_inputs();
    let u = sol.z.rows(0, m).into_owned();
    let slacks = sol.z.rows(m, cfg.num_slacks()).into_owned();

    if ladder.input_set().signed_margin(&u) < -1e-6 {
        return Err(Error::Solver("governed input escaped the input set".into()));
    }
    if slacks[0] < -1e-8 {
        return Err(Error::Solver("negative slack in governor solution".into()));
    }
    for k in 0..cfg.num_slacks() - 1 {
        if slacks[k] > slacks[k + 1] + 1e-8 {
            return Err(Error::Solver("slack profile is not nondecreasing".into()));
        }
    }

    let mut k_star = -1i64;
    for k in 0..cfg.num_slacks() {
        if slacks[k] <= cfg.eps_zero_tol() {
            k_star = k as i64;
        }
    }

    Ok(GovernorSolution {
        u,
        slacks,
        k_star,
        qp: QpDiag {
            status: sol.status,
            kkt_residual: sol.kkt_residual,
            iterations: sol.iterations,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::{DisturbanceSet, Polytope};
    use crate::safesets::LinearSystem;

    fn acc_like_config(horizon: usize) -> PenaltyConfig {
        PenaltyConfig::new(2.0, 0.01, horizon, DMatrix::from_element(1, 1, 0.01), 1e-6)
            .unwrap()
    }

    fn scalar_ladder() -> (SafeSetLadder, PenaltyConfig) {
        let sys = LinearSystem::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            1.0,
        )
        .unwrap();
        let state = Polytope::from_bounds(&[-1.0], &[1.0]).unwrap();
        let input = Polytope::from_bounds(&[-1.0], &[1.0]).unwrap();
        let w = DisturbanceSet::box_set(DVector::from_element(1, 0.1)).unwrap();
        let ladder = SafeSetLadder::build(
            sys,
            DMatrix::from_element(1, 1, -0.5),
            state,
            input,
            w,
            3,
            1e-3,
            60,
        )
        .unwrap();
        let cfg = PenaltyConfig::new(
            2.0,
            0.01,
            3,
            DMatrix::from_element(1, 1, 0.01),
            PenaltyConfig::default_eps_zero_tol(&ladder),
        )
        .unwrap();
        (ladder, cfg)
    }

    #[test]
    fn depth_weights_follow_the_geometric_ladder() {
        let cfg = acc_like_config(8);
        assert_eq!(cfg.depth_weight(0), 1024.0);
        assert_eq!(cfg.depth_weight(9), 2.0);
        assert_eq!(cfg.num_slacks(), 10);
    }

    #[test]
    fn phi_matches_hand_values() {
        let cfg = acc_like_config(8);
        assert_eq!(cfg.phi(0.0), 0.0);
        assert!((cfg.phi(1.0) - 1.01).abs() < 1e-15);
        assert!((cfg.phi(2.0) - 2.04).abs() < 1e-15);
        assert!(cfg.phi_properties_hold());
    }

    #[test]
    fn objective_vanishes_at_nominal_with_zero_slacks() {
        let cfg = acc_like_config(8);
        let u_nom = DVector::from_element(1, 0.7);
        let zeros = DVector::zeros(cfg.num_slacks());
        assert_eq!(cfg.objective_value(&u_nom, &u_nom, &zeros), 0.0);
    }

    #[test]
    fn rejects_theta_at_or_below_one() {
        assert!(PenaltyConfig::new(1.0, 0.01, 3, DMatrix::identity(1, 1), 1e-6).is_err());
    }

    #[test]
    fn assembled_hessian_is_positive_definite() {
        let (ladder, cfg) = scalar_ladder();
        let qp = assemble(&ladder, &cfg, &DVector::zeros(1), &DVector::zeros(1)).unwrap();
        assert!(Cholesky::new(qp.hessian.clone()).is_some());

        // Zero quadratic coefficient still keeps the slack block PD through
        // the curvature floor.
        let cfg0 =
            PenaltyConfig::new(2.0, 0.0, ladder.horizon(), DMatrix::from_element(1, 1, 0.01), 1e-6)
                .unwrap();
        let qp0 = assemble(&ladder, &cfg0, &DVector::zeros(1), &DVector::zeros(1)).unwrap();
        assert!(Cholesky::new(qp0.hessian.clone()).is_some());
    }

    #[test]
    fn nominal_input_passes_through_when_strictly_feasible() {
        let (ladder, cfg) = scalar_ladder();
        let x = DVector::from_element(1, 0.0);
        let u_nom = DVector::from_element(1, 0.05);
        let sol = govern(&ladder, &cfg, &x, &u_nom).unwrap();
        assert!(sol.is_protected(&cfg));
        assert!((sol.u[0] - 0.05).abs() < 1e-8, "u = {}", sol.u[0]);
        assert!(sol.slacks.amax() <= cfg.eps_zero_tol());
    }

    #[test]
    fn slack_profile_is_monotone_even_when_squeezed() {
        let (ladder, cfg) = scalar_ladder();
        // Far outside every set: all groups must be violated, monotonically.
        let x = DVector::from_element(1, 5.0);
        let sol = govern(&ladder, &cfg, &x, &DVector::zeros(1)).unwrap();
        assert_eq!(sol.k_star, -1);
        for k in 0..cfg.num_slacks() - 1 {
            assert!(sol.slacks[k] <= sol.slacks[k + 1] + 1e-8);
        }
        assert!(sol.slacks[0] > cfg.eps_zero_tol());
    }

    #[test]
    fn protection_matches_direct_terminal_solve() {
        let (ladder, cfg) = scalar_ladder();
        let x = DVector::from_element(1, 0.2);
        let u_nom = DVector::from_element(1, 0.9);
        let sol = govern(&ladder, &cfg, &x, &u_nom).unwrap();
        assert!(sol.is_protected(&cfg));

        // Direct route: minimize the adjustment subject to every group row
        // with zero slack plus the input rows.
        let m = 1;
        let rows: usize = ladder.groups().iter().map(|g| g.num_rows()).sum::<usize>()
            + ladder.input_set().num_rows();
        let mut cons = DMatrix::zeros(rows, m);
        let mut offs = DVector::zeros(rows);
        let mut r = 0;
        for g in ladder.groups() {
            for i in 0..g.num_rows() {
                cons[(r, 0)] = g.input_coeffs()[(i, 0)];
                offs[r] = g.offsets()[i] - g.state_coeffs()[(i, 0)] * x[0];
                r += 1;
            }
        }
        for i in 0..ladder.input_set().num_rows() {
            cons[(r, 0)] = ladder.input_set().normals()[(i, 0)];
            offs[r] = ladder.input_set().offsets()[i];
            r += 1;
        }
        let direct = qp::solve(
            &QuadraticProgram::new(
                cfg.adjustment_weight() * 2.0,
                -(cfg.adjustment_weight() * &u_nom) * 2.0,
                cons,
                offs,
            )
            .unwrap(),
            Tolerances::shared(),
        )
        .unwrap();
        assert_eq!(direct.status, QpStatus::Optimal);
        assert!((direct.z[0] - sol.u[0]).abs() < 1e-5);
    }
}
