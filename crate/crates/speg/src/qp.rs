//! Dense strictly convex quadratic programming.
//!
//! Solves
//!
//! ```text
//!     minimize     1/2 zᵀ H z + fᵀ z
//!     subject to   G z ≤ g
//! ```
//!
//! with `H` positive definite, using a dual active-set method: start from
//! the unconstrained minimizer and repeatedly pull in the most violated
//! constraint, taking full or partial (dual) steps until primal feasibility.
//! The method needs no feasible starting point and detects an inconsistent
//! row system on the fly, producing a nonnegative row combination that
//! certifies emptiness.
//!
//! A thin LP layer ([`maximize`], [`phase_one`]) reuses the same solver by
//! adding a small curvature regularization on the decision variables and a
//! large bounding box, which is how all polyhedral linear programs in this
//! crate are solved.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tol::Tolerances;

/// A dense inequality-constrained quadratic program.
#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    /// Cost curvature `H`, symmetric positive definite.
    pub hessian: DMatrix<f64>,
    /// Linear cost term `f`.
    pub linear: DVector<f64>,
    /// Constraint rows `G`.
    pub constraints: DMatrix<f64>,
    /// Constraint offsets `g`.
    pub offsets: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// Solver output.
///
/// For `Optimal`, `multipliers` holds the KKT multipliers (one per row of
/// `G`, zero on inactive rows). For `Infeasible`, it instead holds a
/// nonnegative combination `λ` with `Gᵀλ ≈ 0` and `λᵀg < 0`, certifying
/// that the row system is empty; `z` is the last iterate.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub multipliers: DVector<f64>,
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl QuadraticProgram {
    pub fn new(
        hessian: DMatrix<f64>,
        linear: DVector<f64>,
        constraints: DMatrix<f64>,
        offsets: DVector<f64>,
    ) -> Result<Self> {
        let qp = QuadraticProgram { hessian, linear, constraints, offsets };
        qp.validate()?;
        Ok(qp)
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn num_rows(&self) -> usize {
        self.offsets.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.hessian.nrows() != n || self.hessian.ncols() != n {
            return Err(Error::Dimension(format!(
                "hessian is {}x{}, expected {n}x{n}",
                self.hessian.nrows(),
                self.hessian.ncols()
            )));
        }
        if self.constraints.ncols() != n && self.num_rows() > 0 {
            return Err(Error::Dimension(format!(
                "constraint matrix has {} columns, expected {n}",
                self.constraints.ncols()
            )));
        }
        if self.constraints.nrows() != self.num_rows() {
            return Err(Error::Dimension(format!(
                "{} constraint rows vs {} offsets",
                self.constraints.nrows(),
                self.num_rows()
            )));
        }
        let finite = self.hessian.iter().all(|v| v.is_finite())
            && self.linear.iter().all(|v| v.is_finite())
            && self.constraints.iter().all(|v| v.is_finite())
            && self.offsets.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Dimension("non-finite entry in problem data".into()));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (self.hessian[(i, j)] - self.hessian[(j, i)]).abs() > 1e-12 {
                    return Err(Error::NotPositiveDefinite(format!(
                        "hessian is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Debug dump: the constraint rows in the polytope JSON schema, extended
    /// with the cost terms.
    pub fn debug_json(&self) -> serde_json::Value {
        let n = self.dim();
        let rows: Vec<Vec<f64>> = (0..self.num_rows())
            .map(|i| {
                let mut r: Vec<f64> = self.constraints.row(i).iter().copied().collect();
                r.push(self.offsets[i]);
                r
            })
            .collect();
        let h: Vec<Vec<f64>> =
            (0..n).map(|i| self.hessian.row(i).iter().copied().collect()).collect();
        let f: Vec<f64> = self.linear.iter().copied().collect();
        serde_json::json!({ "dim": n, "rows": rows, "H": h, "f": f })
    }
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn row_dot(m: &DMatrix<f64>, i: usize, v: &DVector<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..v.len() {
        s += m[(i, j)] * v[j];
    }
    s
}

/// Solve a strictly convex QP. Fails fast (before iterating) if `H` is not
/// positive definite.
pub fn solve(qp: &QuadraticProgram, tols: &Tolerances) -> Result<QpSolution> {
    qp.validate()?;
    let n = qp.dim();
    let q = qp.num_rows();

    let chol: Cholesky<f64, Dyn> = Cholesky::new(qp.hessian.clone())
        .ok_or_else(|| Error::NotPositiveDefinite("cost curvature failed to factor".into()))?;
    let lower = chol.l();
    let upper = lower.transpose();

    let mut z = -chol.solve(&qp.linear);
    let mut active: Vec<usize> = Vec::new();
    let mut mu: Vec<f64> = Vec::new();
    // L⁻¹Gᵢᵀ for each active row (H = LLᵀ), kept in step with `active`.
    // Directions come from a QR factorization of these columns, which keeps
    // the conditioning of the active set instead of squaring it.
    let mut whitened_cols: Vec<DVector<f64>> = Vec::new();
    let mut iterations = 0usize;

    // Constraints violated by less than this never enter the active set;
    // it sits two orders below the promised feasibility residual.
    let add_tol = 0.01 * tols.kkt * (1.0 + max_abs(&qp.offsets));

    'outer: loop {
        // Most violated row, first index winning ties.
        let mut pick: Option<usize> = None;
        let mut worst = add_tol;
        for i in 0..q {
            if active.contains(&i) {
                continue;
            }
            let s = row_dot(&qp.constraints, i, &z) - qp.offsets[i];
            if s > worst {
                worst = s;
                pick = Some(i);
            }
        }
        let Some(p) = pick else { break 'outer };

        let nplus = qp.constraints.row(p).transpose().into_owned();
        if nplus.norm_squared() < 1e-30 {
            // Zero row with negative offset: trivially inconsistent.
            let mut cert = DVector::zeros(q);
            cert[p] = 1.0;
            return Ok(QpSolution {
                z,
                multipliers: cert,
                status: QpStatus::Infeasible,
                kkt_residual: 0.0,
                iterations,
            });
        }
        // Whitened normal ñ = L⁻¹n⁺, fixed while p is being added.
        let whitened_n = lower
            .solve_lower_triangular(&nplus)
            .ok_or_else(|| Error::Solver("triangular solve failed".into()))?;
        let whitened_ref = whitened_n.norm_squared(); // = n⁺ᵀH⁻¹n⁺
        let mut accumulated = 0.0; // multiplier being built up for row p

        loop {
            iterations += 1;
            if iterations > tols.iteration_cap {
                let multipliers = scatter(q, &active, &mu);
                let kkt_residual = residual(qp, &z, &multipliers);
                return Ok(QpSolution {
                    z,
                    multipliers,
                    status: QpStatus::MaxIterations,
                    kkt_residual,
                    iterations,
                });
            }

            // Split ñ into its component inside span(Ñ) (giving the dual
            // direction r) and the orthogonal remainder (giving the primal
            // direction d = L⁻ᵀ remainder, so that curv = dᵀHd = ‖rem‖²).
            let (r, d, curv) = if active.is_empty() {
                let d = upper
                    .solve_upper_triangular(&whitened_n)
                    .ok_or_else(|| Error::Solver("triangular solve failed".into()))?;
                (DVector::zeros(0), d, whitened_ref)
            } else {
                let qa = active.len();
                let ntilde = DMatrix::from_fn(n, qa, |row, col| whitened_cols[col][row]);
                let qr = ntilde.qr();
                let coeffs = qr.q().transpose() * &whitened_n;
                let remainder = &whitened_n - qr.q() * &coeffs;
                let r = qr
                    .r()
                    .solve_upper_triangular(&coeffs)
                    .ok_or_else(|| Error::Solver("active set lost rank".into()))?;
                let curv = remainder.norm_squared();
                let d = upper
                    .solve_upper_triangular(&remainder)
                    .ok_or_else(|| Error::Solver("triangular solve failed".into()))?;
                (r, d, curv)
            };

            let dependent = curv <= 1e-16 * whitened_ref.max(f64::MIN_POSITIVE);

            // Longest dual step keeping the active multipliers nonnegative.
            // Components below the dust level (relative to the expansion
            // scale) do not count as ascent directions.
            let r_dust = 1e-10 * max_abs(&r).max(1.0);
            let mut t1 = f64::INFINITY;
            let mut drop_j: Option<usize> = None;
            for (j, rj) in r.iter().enumerate() {
                if *rj > r_dust {
                    let tj = mu[j] / rj;
                    if tj < t1 {
                        t1 = tj;
                        drop_j = Some(j);
                    }
                }
            }

            // Step that brings row p onto its boundary.
            let slack = nplus.dot(&z) - qp.offsets[p];
            let t2 = if dependent { f64::INFINITY } else { slack / curv };

            if t1.is_infinite() && t2.is_infinite() {
                // Row p is a nonnegative combination of active rows, yet
                // violated: the system is empty. λ_p = 1, λ_i = -r_i ≥ 0.
                let mut cert = DVector::zeros(q);
                cert[p] = 1.0;
                for (j, &i) in active.iter().enumerate() {
                    cert[i] = (-r[j]).max(0.0);
                }
                let cert_res =
                    max_abs(&(qp.constraints.transpose() * &cert)) / (1.0 + max_abs(&cert));
                return Ok(QpSolution {
                    z,
                    multipliers: cert,
                    status: QpStatus::Infeasible,
                    kkt_residual: cert_res,
                    iterations,
                });
            }

            let t = t1.min(t2);
            z.axpy(-t, &d, 1.0);
            for (j, rj) in r.iter().enumerate() {
                mu[j] -= t * rj;
            }
            accumulated += t;

            if t2 <= t1 {
                active.push(p);
                mu.push(accumulated);
                whitened_cols.push(whitened_n.clone());
                continue 'outer;
            }
            let j = drop_j.expect("finite t1 implies a row to drop");
            active.remove(j);
            mu.remove(j);
            whitened_cols.remove(j);
        }
    }

    // The whitened iterations carry conditioning error (notably for the
    // curvature-regularized LP problems); one direct solve of the equality
    // KKT system on the final active set restores machine accuracy.
    polish(qp, &active, &mut z, &mut mu);

    let multipliers = scatter(q, &active, &mu);
    let kkt_residual = residual(qp, &z, &multipliers);
    Ok(QpSolution { z, multipliers, status: QpStatus::Optimal, kkt_residual, iterations })
}

fn polish(qp: &QuadraticProgram, active: &[usize], z: &mut DVector<f64>, mu: &mut [f64]) {
    let n = qp.dim();
    let qa = active.len();
    if qa == 0 {
        return;
    }
    let mut kkt = DMatrix::zeros(n + qa, n + qa);
    kkt.view_mut((0, 0), (n, n)).copy_from(&qp.hessian);
    for (j, &i) in active.iter().enumerate() {
        for t in 0..n {
            kkt[(t, n + j)] = qp.constraints[(i, t)];
            kkt[(n + j, t)] = qp.constraints[(i, t)];
        }
    }
    let mut rhs = DVector::zeros(n + qa);
    rhs.rows_mut(0, n).copy_from(&(-&qp.linear));
    for (j, &i) in active.iter().enumerate() {
        rhs[n + j] = qp.offsets[i];
    }
    let Some(sol) = kkt.lu().solve(&rhs) else { return };
    if !sol.iter().all(|v| v.is_finite()) {
        return;
    }
    let cand_z = sol.rows(0, n).into_owned();
    // Accept only if the polished point is no worse on the rows the active
    // set does not pin (it moves by at most the accumulated drift).
    let before = worst_violation(qp, z, active);
    let after = worst_violation(qp, &cand_z, active);
    let dual_ok = (0..qa).all(|j| sol[n + j] >= -1e-9 * (1.0 + sol[n + j].abs()));
    if dual_ok && after <= before.max(0.0) + 1e-12 {
        *z = cand_z;
        for (j, m) in mu.iter_mut().enumerate() {
            *m = sol[n + j].max(0.0);
        }
    }
}

fn worst_violation(qp: &QuadraticProgram, z: &DVector<f64>, skip: &[usize]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..qp.num_rows() {
        if skip.contains(&i) {
            continue;
        }
        worst = worst.max(row_dot(&qp.constraints, i, z) - qp.offsets[i]);
    }
    worst
}

fn scatter(q: usize, active: &[usize], mu: &[f64]) -> DVector<f64> {
    let mut out = DVector::zeros(q);
    for (j, &i) in active.iter().enumerate() {
        out[i] = mu[j].max(0.0);
    }
    out
}

/// Normalized KKT residual: max of stationarity (scaled by `1 + ‖f‖∞`),
/// feasibility violation (scaled by `1 + ‖g‖∞`), and raw complementarity.
fn residual(qp: &QuadraticProgram, z: &DVector<f64>, multipliers: &DVector<f64>) -> f64 {
    let stat = &qp.hessian * z + &qp.linear + qp.constraints.transpose() * multipliers;
    let stat_n = max_abs(&stat) / (1.0 + max_abs(&qp.linear));
    let mut feas = 0.0f64;
    let mut comp = 0.0f64;
    for i in 0..qp.num_rows() {
        let s = row_dot(&qp.constraints, i, z) - qp.offsets[i];
        feas = feas.max(s);
        comp = comp.max((multipliers[i] * s).abs());
    }
    let feas_n = feas.max(0.0) / (1.0 + max_abs(&qp.offsets));
    stat_n.max(feas_n).max(comp)
}

/// Result of a bounded linear maximization.
#[derive(Debug, Clone)]
pub struct LinearMaximum {
    pub value: f64,
    pub point: DVector<f64>,
    /// The optimizer ended up pressed against the artificial bounding box,
    /// i.e. the program is unbounded over the rows alone.
    pub hit_box: bool,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LinearMaximum),
    Infeasible,
}

/// Maximize `objective · z` over `{z : rows z ≤ offsets}`.
///
/// The LP is solved through the QP path with curvature `lp_curvature` on the
/// decision variables and a `±lp_box` bounding box, so the reported value
/// slightly undershoots the exact maximum (by about `δ‖z*‖²`).
pub fn maximize(
    objective: &DVector<f64>,
    rows: &DMatrix<f64>,
    offsets: &DVector<f64>,
    tols: &Tolerances,
) -> Result<LpOutcome> {
    let n = objective.len();
    let q = offsets.len();
    let mut cons = DMatrix::zeros(q + 2 * n, n);
    let mut offs = DVector::zeros(q + 2 * n);
    cons.view_mut((0, 0), (q, n)).copy_from(rows);
    offs.rows_mut(0, q).copy_from(offsets);
    for i in 0..n {
        cons[(q + i, i)] = 1.0;
        offs[q + i] = tols.lp_box;
        cons[(q + n + i, i)] = -1.0;
        offs[q + n + i] = tols.lp_box;
    }
    let qp = QuadraticProgram::new(
        DMatrix::identity(n, n) * (2.0 * tols.lp_curvature),
        -objective.clone(),
        cons,
        offs,
    )?;
    let sol = solve(&qp, tols)?;
    match sol.status {
        QpStatus::Optimal => {
            let hit_box = max_abs(&sol.z) >= tols.lp_box * (1.0 - 1e-9);
            Ok(LpOutcome::Optimal(LinearMaximum {
                value: objective.dot(&sol.z),
                point: sol.z,
                hit_box,
            }))
        }
        QpStatus::Infeasible => Ok(LpOutcome::Infeasible),
        QpStatus::MaxIterations => {
            Err(Error::Solver("linear maximization hit the iteration cap".into()))
        }
    }
}

/// Minimum uniform slack certificate for `{z : rows z ≤ offsets}`.
#[derive(Debug, Clone)]
pub struct FeasibilityCheck {
    pub feasible: bool,
    /// Smallest `s` such that `rows z ≤ offsets + s·1` admits a solution
    /// inside the bounding box (clipped below at zero).
    pub min_slack: f64,
    pub witness: DVector<f64>,
}

/// Phase-one check: minimize a single shared slack over all rows.
pub fn phase_one(
    rows: &DMatrix<f64>,
    offsets: &DVector<f64>,
    feas_tol: f64,
    tols: &Tolerances,
) -> Result<FeasibilityCheck> {
    let q = offsets.len();
    let n = rows.ncols();
    let nv = n + 1; // decision variables plus the slack
    let mut cons = DMatrix::zeros(q + 1 + 2 * n, nv);
    let mut offs = DVector::zeros(q + 1 + 2 * n);
    for i in 0..q {
        for j in 0..n {
            cons[(i, j)] = rows[(i, j)];
        }
        cons[(i, n)] = -1.0;
        offs[i] = offsets[i];
    }
    cons[(q, n)] = -1.0; // s ≥ 0
    for i in 0..n {
        cons[(q + 1 + i, i)] = 1.0;
        offs[q + 1 + i] = tols.lp_box;
        cons[(q + 1 + n + i, i)] = -1.0;
        offs[q + 1 + n + i] = tols.lp_box;
    }
    let mut linear = DVector::zeros(nv);
    linear[n] = 1.0;
    let qp = QuadraticProgram::new(
        DMatrix::identity(nv, nv) * (2.0 * tols.lp_curvature),
        linear,
        cons,
        offs,
    )?;
    let sol = solve(&qp, tols)?;
    if sol.status != QpStatus::Optimal {
        return Err(Error::Solver(format!(
            "phase-one subproblem ended with status {:?}",
            sol.status
        )));
    }
    let min_slack = sol.z[n];
    Ok(FeasibilityCheck {
        feasible: min_slack <= feas_tol,
        min_slack,
        witness: sol.z.rows(0, n).into_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tols() -> Tolerances {
        Tolerances::default()
    }

    fn qp1d(h: f64, f: f64, rows: &[(f64, f64)]) -> QuadraticProgram {
        let g = DMatrix::from_fn(rows.len(), 1, |i, _| rows[i].0);
        let o = DVector::from_fn(rows.len(), |i, _| rows[i].1);
        QuadraticProgram::new(
            DMatrix::from_element(1, 1, h),
            DVector::from_element(1, f),
            g,
            o,
        )
        .unwrap()
    }

    #[test]
    fn clamps_to_lower_bound_with_known_multiplier() {
        // min z² s.t. z ≥ 1  →  z = 1, μ = 2
        let qp = qp1d(2.0, 0.0, &[(-1.0, -1.0)]);
        let sol = solve(&qp, &tols()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.z[0] - 1.0).abs() < 1e-12);
        assert!((sol.multipliers[0] - 2.0).abs() < 1e-12);
        assert!(sol.kkt_residual <= 1e-8);
    }

    #[test]
    fn clamps_unconstrained_optimum_into_interval() {
        // min (z-3)² s.t. 0 ≤ z ≤ 2  →  z = 2
        let qp = qp1d(2.0, -6.0, &[(1.0, 2.0), (-1.0, 0.0)]);
        let sol = solve(&qp, &tols()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.z[0] - 2.0).abs() < 1e-12);
        assert!((sol.multipliers[0] - 2.0).abs() < 1e-12);
        assert!(sol.multipliers[1].abs() < 1e-12);
    }

    #[test]
    fn unconstrained_minimizer_passes_through() {
        let qp = QuadraticProgram::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 3.0]),
            DVector::from_row_slice(&[1.0, -2.0]),
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
        )
        .unwrap();
        let sol = solve(&qp, &tols()).unwrap();
        let grad = &qp.hessian * &sol.z + &qp.linear;
        assert!(grad.amax() < 1e-12);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn certifies_infeasible_interval() {
        // z ≤ -1 and z ≥ 2
        let qp = qp1d(2.0, 0.0, &[(1.0, -1.0), (-1.0, -2.0)]);
        let sol = solve(&qp, &tols()).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
        let lam = &sol.multipliers;
        assert!(lam.iter().all(|v| *v >= 0.0));
        let combo_rows = qp.constraints.transpose() * lam;
        assert!(combo_rows.amax() < 1e-9);
        assert!(lam.dot(&qp.offsets) < -1e-9);
    }

    #[test]
    fn rejects_indefinite_hessian() {
        let qp = QuadraticProgram {
            hessian: DMatrix::from_element(1, 1, -1.0),
            linear: DVector::zeros(1),
            constraints: DMatrix::zeros(0, 1),
            offsets: DVector::zeros(0),
        };
        assert!(matches!(solve(&qp, &tols()), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn identical_inputs_give_identical_bytes() {
        let qp = QuadraticProgram::new(
            DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]),
            DVector::from_row_slice(&[0.3, -1.7]),
            DMatrix::from_row_slice(3, 2, &[1.0, 1.0, -1.0, 0.25, 0.5, -2.0]),
            DVector::from_row_slice(&[0.1, 0.4, -0.2]),
        )
        .unwrap();
        let a = solve(&qp, &tols()).unwrap();
        let b = solve(&qp, &tols()).unwrap();
        assert_eq!(a.z.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   b.z.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(a.multipliers.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   b.multipliers.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn cost_scaling_leaves_minimizer_in_place() {
        let base = QuadraticProgram::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5]),
            DVector::from_row_slice(&[-1.0, 0.7]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            DVector::from_row_slice(&[0.2, 0.1]),
        )
        .unwrap();
        let scaled = QuadraticProgram::new(
            base.hessian.clone() * 7.0,
            base.linear.clone() * 7.0,
            base.constraints.clone(),
            base.offsets.clone(),
        )
        .unwrap();
        let a = solve(&base, &tols()).unwrap();
        let b = solve(&scaled, &tols()).unwrap();
        assert!((a.z.clone() - b.z.clone()).amax() < 1e-9);
    }

    #[test]
    fn maximize_reports_box_hit_on_unbounded_direction() {
        // maximize x subject to x ≥ 0 only
        let out = maximize(
            &DVector::from_row_slice(&[1.0]),
            &DMatrix::from_row_slice(1, 1, &[-1.0]),
            &DVector::from_row_slice(&[0.0]),
            &tols(),
        )
        .unwrap();
        match out {
            LpOutcome::Optimal(m) => assert!(m.hit_box),
            LpOutcome::Infeasible => panic!("should be feasible"),
        }
    }

    #[test]
    fn phase_one_measures_violation_gap() {
        // x ≤ -1 together with x ≥ 2: best shared slack is 1.5
        let rows = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let offs = DVector::from_row_slice(&[-1.0, -2.0]);
        let check = phase_one(&rows, &offs, 1e-9, &tols()).unwrap();
        assert!(!check.feasible);
        assert!((check.min_slack - 1.5).abs() < 1e-6);

        let offs_ok = DVector::from_row_slice(&[3.0, -2.0]);
        let check = phase_one(&rows, &offs_ok, 1e-9, &tols()).unwrap();
        assert!(check.feasible);
        assert!(check.witness[0] >= 2.0 - 1e-7 && check.witness[0] <= 3.0 + 1e-7);
    }
}
