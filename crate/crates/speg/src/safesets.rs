//! Safe-set construction for linear systems with additive disturbances.
//!
//! Given dynamics `x⁺ = Ax + Bu + Ew`, a stabilizing virtual feedback
//! `u = Kx + v`, polyhedral state and input constraint sets, and a bounded
//! disturbance set, this module builds:
//!
//! * the k-step safe sets — states from which admissible inputs can keep
//!   the state inside the constraint set for at least k future steps under
//!   every admissible disturbance;
//! * the infinite-step safe set — a robust controlled-invariant subset of
//!   the state constraints, obtained by tightening the asymptotic rows and
//!   running the recursion to finite determination;
//! * the deduplicated one-step constraint ladder over `(x, u)` that the
//!   governor assembles into its per-step quadratic program.
//!
//! Everything here is computed once offline; the resulting
//! [`SafeSetLadder`] is immutable and cheap to share.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::{DisturbanceSet, Polytope};
use crate::tol::Tolerances;
use crate::wire;

/// Margin by which the closed-loop spectral radius must stay below one.
pub const SCHUR_MARGIN: f64 = 1e-6;

/// Discrete-time dynamics `x⁺ = Ax + Bu + Ew` with a sampling period kept
/// as metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    e: DMatrix<f64>,
    dt: f64,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, e: DMatrix<f64>, dt: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || n == 0 {
            return Err(Error::Dimension("A must be square and nonempty".into()));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::Dimension("B must have as many rows as A".into()));
        }
        if e.nrows() != n || e.ncols() == 0 {
            return Err(Error::Dimension("E must have as many rows as A".into()));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config("sampling period must be positive".into()));
        }
        let finite = a.iter().chain(b.iter()).chain(e.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Dimension("non-finite entry in system matrices".into()));
        }
        Ok(LinearSystem { a, b, e, dt })
    }

    pub fn num_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn num_disturbances(&self) -> usize {
        self.e.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + &self.e * w
    }
}

/// Largest eigenvalue magnitude.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().fold(0.0f64, |acc, ev| acc.max(ev.norm()))
}

/// Stabilizing virtual feedback `u = Kx + v`; construction verifies that
/// `A + BK` is Schur with margin [`SCHUR_MARGIN`].
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualFeedback {
    gain: DMatrix<f64>,
    closed_loop: DMatrix<f64>,
}

impl VirtualFeedback {
    pub fn new(sys: &LinearSystem, gain: DMatrix<f64>) -> Result<Self> {
        if gain.nrows() != sys.num_inputs() || gain.ncols() != sys.num_states() {
            return Err(Error::Dimension(format!(
                "feedback gain is {}x{}, expected {}x{}",
                gain.nrows(),
                gain.ncols(),
                sys.num_inputs(),
                sys.num_states()
            )));
        }
        let closed_loop = sys.a() + sys.b() * &gain;
        let rho = spectral_radius(&closed_loop);
        if rho >= 1.0 - SCHUR_MARGIN || rho.is_nan() {
            return Err(Error::SpectralRadius { rho, limit: 1.0 - SCHUR_MARGIN });
        }
        Ok(VirtualFeedback { gain, closed_loop })
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    pub fn closed_loop(&self) -> &DMatrix<f64> {
        &self.closed_loop
    }
}

/// Depth label of a constraint group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupDepth {
    Step(usize),
    Infinite,
}

impl std::fmt::Display for GroupDepth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GroupDepth::Step(k) => write!(f, "{k}"),
            GroupDepth::Infinite => write!(f, "inf"),
        }
    }
}

/// Rows over `(x, u)` whose nonpositivity means the successor state lands in
/// a target set for every admissible disturbance. Rows are jointly
/// normalized over the stacked `(x, u)` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintGroup {
    state_coeffs: DMatrix<f64>,
    input_coeffs: DMatrix<f64>,
    offsets: DVector<f64>,
    depth: GroupDepth,
}

impl ConstraintGroup {
    /// One-step robust constraint into `target`: row j reads
    /// `(Γⱼᵀ A) x + (Γⱼᵀ B) u ≤ γⱼ - h_W(Γⱼᵀ E)`.
    pub fn one_step(
        target: &Polytope,
        sys: &LinearSystem,
        w: &DisturbanceSet,
        depth: GroupDepth,
    ) -> Result<ConstraintGroup> {
        if target.dim() != sys.num_states() {
            return Err(Error::Dimension("target set lives in the wrong dimension".into()));
        }
        if w.dim() != sys.num_disturbances() {
            return Err(Error::Dimension("disturbance set dimension mismatch".into()));
        }
        let n = sys.num_states();
        let m = sys.num_inputs();
        let tols = Tolerances::shared();
        let mut rows: Vec<(DVector<f64>, DVector<f64>, f64)> = Vec::new();
        for (normal, offset) in target.rows_vec() {
            let cx = sys.a().transpose() * &normal;
            let cu = sys.b().transpose() * &normal;
            let tighten = w.support(&(sys.e().transpose() * &normal))?;
            let c = offset - tighten;
            let joint = (cx.norm_squared() + cu.norm_squared()).sqrt();
            if joint < tols.unit_norm {
                if c < -tols.row_match {
                    return Err(Error::Ladder(
                        "a target row is unreachable for every input".into(),
                    ));
                }
                continue; // vacuous
            }
            if (joint - 1.0).abs() > tols.unit_norm {
                rows.push((cx / joint, cu / joint, c / joint));
            } else {
                rows.push((cx, cu, c));
            }
        }
        // Positive-multiple dedup inside the group, then a stable order.
        let mut kept: Vec<(DVector<f64>, DVector<f64>, f64)> = Vec::new();
        'row: for row in rows {
            for k in kept.iter_mut() {
                if rows_match(&row, k, tols.row_match) {
                    k.2 = k.2.min(row.2);
                    continue 'row;
                }
            }
            kept.push(row);
        }
        kept.sort_by(|a, b| {
            for j in 0..n {
                match a.0[j].total_cmp(&b.0[j]) {
                    std::cmp::Ordering::Equal => continue,
                    other => return other,
                }
            }
            for j in 0..m {
                match a.1[j].total_cmp(&b.1[j]) {
                    std::cmp::Ordering::Equal => continue,
                    other => return other,
                }
            }
            a.2.total_cmp(&b.2)
        });
        Ok(ConstraintGroup {
            state_coeffs: DMatrix::from_fn(kept.len(), n, |i, j| kept[i].0[j]),
            input_coeffs: DMatrix::from_fn(kept.len(), m, |i, j| kept[i].1[j]),
            offsets: DVector::from_fn(kept.len(), |i, _| kept[i].2),
            depth,
        })
    }

    pub fn from_parts(
        state_coeffs: DMatrix<f64>,
        input_coeffs: DMatrix<f64>,
        offsets: DVector<f64>,
        depth: GroupDepth,
    ) -> Result<ConstraintGroup> {
        if state_coeffs.nrows() != offsets.len() || input_coeffs.nrows() != offsets.len() {
            return Err(Error::Dimension("constraint group row counts differ".into()));
        }
        Ok(ConstraintGroup { state_coeffs, input_coeffs, offsets, depth })
    }

    pub fn num_rows(&self) -> usize {
        self.offsets.len()
    }

    pub fn depth(&self) -> GroupDepth {
        self.depth
    }

    pub fn state_coeffs(&self) -> &DMatrix<f64> {
        &self.state_coeffs
    }

    pub fn input_coeffs(&self) -> &DMatrix<f64> {
        &self.input_coeffs
    }

    pub fn offsets(&self) -> &DVector<f64> {
        &self.offsets
    }

    /// Row values `Cx·x + Cu·u - c`; all nonpositive means the group holds.
    pub fn evaluate(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.state_coeffs * x + &self.input_coeffs * u - &self.offsets
    }

    pub fn max_violation(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        if self.num_rows() == 0 {
            return f64::NEG_INFINITY;
        }
        self.evaluate(x, u).max()
    }

    fn retain(&self, keep: &[bool]) -> ConstraintGroup {
        let idx: Vec<usize> = (0..self.num_rows()).filter(|&i| keep[i]).collect();
        ConstraintGroup {
            state_coeffs: DMatrix::from_fn(idx.len(), self.state_coeffs.ncols(), |i, j| {
                self.state_coeffs[(idx[i], j)]
            }),
            input_coeffs: DMatrix::from_fn(idx.len(), self.input_coeffs.ncols(), |i, j| {
                self.input_coeffs[(idx[i], j)]
            }),
            offsets: DVector::from_fn(idx.len(), |i, _| self.offsets[idx[i]]),
            depth: self.depth,
        }
    }
}

type GroupRow = (DVector<f64>, DVector<f64>, f64);

fn rows_match(a: &GroupRow, b: &GroupRow, tol: f64) -> bool {
    a.0.iter().zip(b.0.iter()).all(|(x, y)| (x - y).abs() <= tol)
        && a.1.iter().zip(b.1.iter()).all(|(x, y)| (x - y).abs() <= tol)
        && (a.2 - b.2).abs() <= tol * (1.0 + b.2.abs())
}

/// Keep, per group, only rows not already present in a shallower group
/// (positive multiples count as identical). Emptied groups are retained
/// with zero rows so depth labels stay aligned.
pub fn dedupe_groups(raw: &[ConstraintGroup]) -> Vec<ConstraintGroup> {
    let tol = Tolerances::shared().row_match;
    let mut seen: Vec<GroupRow> = Vec::new();
    let mut out = Vec::with_capacity(raw.len());
    for group in raw {
        let mut keep = vec![true; group.num_rows()];
        for (i, flag) in keep.iter_mut().enumerate() {
            let row: GroupRow = (
                group.state_coeffs.row(i).transpose().into_owned(),
                group.input_coeffs.row(i).transpose().into_owned(),
                group.offsets[i],
            );
            if seen.iter().any(|s| rows_match(&row, s, tol)) {
                *flag = false;
            } else {
                seen.push(row);
            }
        }
        out.push(group.retain(&keep));
    }
    out
}

// --- tube construction ------------------------------------------------------

/// Stage rows of the k-step tube over `(x, v)`: the virtual closed loop
/// `x_{t+1} = A_c x_t + B v`, `u_t = K x_t + v`, must respect the state and
/// input constraints at every `t = 0..=k`, with offsets tightened by the
/// accumulated worst-case disturbance response.
fn tube_rows(
    sys: &LinearSystem,
    fb: &VirtualFeedback,
    state_set: &Polytope,
    input_set: &Polytope,
    w: &DisturbanceSet,
    k: usize,
) -> Result<Vec<(DVector<f64>, f64)>> {
    let n = sys.num_states();
    let m = sys.num_inputs();
    let state_rows = state_set.rows_vec();
    let input_rows = input_set.rows_vec();

    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut power = DMatrix::<f64>::identity(n, n); // A_c^t
    let mut response = DMatrix::<f64>::zeros(n, m); // Λ_t = (I - A_c^t)(I - A_c)⁻¹ B
    let mut state_tight = vec![0.0; state_rows.len()];
    let mut input_tight = vec![0.0; input_rows.len()];

    for _t in 0..=k {
        for (j, (normal, offset)) in state_rows.iter().enumerate() {
            let cx = power.transpose() * normal;
            let cv = response.transpose() * normal;
            let mut joint = DVector::zeros(n + m);
            joint.rows_mut(0, n).copy_from(&cx);
            joint.rows_mut(n, m).copy_from(&cv);
            rows.push((joint, offset - state_tight[j]));
        }
        let kx = fb.gain() * &power; // K A_c^t
        let kv = fb.gain() * &response; // K Λ_t
        for (j, (normal, offset)) in input_rows.iter().enumerate() {
            let cx = kx.transpose() * normal;
            let cv = kv.transpose() * normal + normal;
            let mut joint = DVector::zeros(n + m);
            joint.rows_mut(0, n).copy_from(&cx);
            joint.rows_mut(n, m).copy_from(&cv);
            rows.push((joint, offset - input_tight[j]));
        }
        // Accumulate h_W(Γᵀ A_c^t E) terms and advance the recurrences
        // Λ_{t+1} = Λ_t + A_c^t B, A_c^{t+1} = A_c A_c^t.
        let disturbed = &power * sys.e(); // A_c^t E
        for (j, (normal, _)) in state_rows.iter().enumerate() {
            state_tight[j] += w.support(&(disturbed.transpose() * normal))?;
        }
        let k_disturbed = fb.gain() * &power * sys.e(); // K A_c^t E (m×p)
        for (j, (normal, _)) in input_rows.iter().enumerate() {
            input_tight[j] += w.support(&(k_disturbed.transpose() * normal))?;
        }
        response += &power * sys.b();
        power = fb.closed_loop() * &power;
    }
    Ok(rows)
}

/// The k-step tube over `(x, v)`, redundancy-removed. Heavy tightening may
/// make it empty, which is reported through the polytope itself.
pub fn build_tube(
    sys: &LinearSystem,
    fb: &VirtualFeedback,
    state_set: &Polytope,
    input_set: &Polytope,
    w: &DisturbanceSet,
    k: usize,
) -> Result<Polytope> {
    let rows = tube_rows(sys, fb, state_set, input_set, w, k)?;
    Polytope::new(sys.num_states() + sys.num_inputs(), rows)?.remove_redundant()
}

/// Project a tube onto the leading state coordinates.
pub fn project_to_state(tube: &Polytope, n: usize) -> Result<Polytope> {
    if n == 0 || n >= tube.dim() {
        return Err(Error::Dimension("state dimension must be a strict prefix".into()));
    }
    let keep: Vec<usize> = (0..n).collect();
    tube.project_out(&keep)
}

/// Offsets tightened by the full infinite disturbance-response series,
/// `γ_j - Σ_{τ=0}^{∞} h_W(Γⱼᵀ A_c^τ E)`. The series converges geometrically
/// for a Schur closed loop; it is summed until increments fall below
/// machine noise.
fn asymptotic_offsets(
    sys: &LinearSystem,
    fb: &VirtualFeedback,
    state_set: &Polytope,
    input_set: &Polytope,
    w: &DisturbanceSet,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = sys.num_states();
    let state_rows = state_set.rows_vec();
    let input_rows = input_set.rows_vec();
    let scale = 1.0
        + state_rows
            .iter()
            .chain(input_rows.iter())
            .fold(0.0f64, |acc, (_, o)| acc.max(o.abs()));
    let mut state_off: Vec<f64> = state_rows.iter().map(|(_, o)| *o).collect();
    let mut input_off: Vec<f64> = input_rows.iter().map(|(_, o)| *o).collect();
    let mut power = DMatrix::<f64>::identity(n, n);
    let cap = 50_000;
    for _ in 0..cap {
        let disturbed = &power * sys.e();
        let k_disturbed = fb.gain() * &disturbed;
        let mut largest = 0.0f64;
        for (j, (normal, _)) in state_rows.iter().enumerate() {
            let d = w.support(&(disturbed.transpose() * normal))?;
            state_off[j] -= d;
            largest = largest.max(d);
        }
        for (j, (normal, _)) in input_rows.iter().enumerate() {
            let d = w.support(&(k_disturbed.transpose() * normal))?;
            input_off[j] -= d;
            largest = largest.max(d);
        }
        power = fb.closed_loop() * &power;
        if largest <= 1e-15 * scale {
            return Ok((state_off, input_off));
        }
    }
    Err(Error::NoConvergence { k_cap: cap })
}

/// Infinite-step safe set by finite determination: intersect the k-step
/// tube with the tightened asymptotic input region, stop at the first k
/// where one more step no longer changes the set, then project to states.
///
/// The asymptotic rows use the fully summed disturbance-response offsets
/// (rather than the offsets at the current round), so consecutive rounds
/// become exactly equal once the fresh stage rows go redundant and the
/// stopping test is well conditioned.
pub fn build_infinite_set(
    sys: &LinearSystem,
    fb: &VirtualFeedback,
    state_set: &Polytope,
    input_set: &Polytope,
    w: &DisturbanceSet,
    eps_tight: f64,
    k_cap: usize,
) -> Result<Polytope> {
    if !(eps_tight > 0.0 && eps_tight < 1.0) {
        return Err(Error::Config("eps_tight must lie strictly between 0 and 1".into()));
    }
    let n = sys.num_states();
    let m = sys.num_inputs();
    let eye = DMatrix::<f64>::identity(n, n);
    let response_inf = (eye - fb.closed_loop())
        .try_inverse()
        .ok_or_else(|| Error::Solver("I - A_c is singular".into()))?
        * sys.b(); // (I - A_c)⁻¹ B
    let (state_limit, input_limit) =
        asymptotic_offsets(sys, fb, state_set, input_set, w)?;

    let intersected = |k: usize| -> Result<Polytope> {
        let mut rows = tube_rows(sys, fb, state_set, input_set, w, k)?;
        // State-set rows restated on (x, v) — the stage-0 rows already cover
        // them, but keeping them explicit matches the intersection shape.
        for (normal, offset) in state_set.rows_vec() {
            let mut joint = DVector::zeros(n + m);
            joint.rows_mut(0, n).copy_from(&normal);
            rows.push((joint, offset));
        }
        // Asymptotic rows over v, shaved inward by ε·(1 + |γ|). The shave
        // must point inward regardless of the offset sign, otherwise rows
        // with negative offsets never dominate the fresh stage rows and the
        // recursion cannot settle.
        let shave = |offset: f64| offset - eps_tight * (1.0 + offset.abs());
        for (j, (normal, _)) in state_set.rows_vec().iter().enumerate() {
            let cv = response_inf.transpose() * normal;
            let mut joint = DVector::zeros(n + m);
            joint.rows_mut(n, m).copy_from(&cv);
            rows.push((joint, shave(state_limit[j])));
        }
        let gain_response = fb.gain() * &response_inf + DMatrix::<f64>::identity(m, m);
        for (j, (normal, _)) in input_set.rows_vec().iter().enumerate() {
            let cv = gain_response.transpose() * normal;
            let mut joint = DVector::zeros(n + m);
            joint.rows_mut(n, m).copy_from(&cv);
            rows.push((joint, shave(input_limit[j])));
        }
        Polytope::new(n + m, rows)?.remove_redundant()
    };

    let mut prev = intersected(0)?;
    for k in 0..k_cap {
        let next = intersected(k + 1)?;
        let prev_empty = prev.is_empty()?;
        let next_empty = next.is_empty()?;
        if prev_empty && next_empty {
            return Ok(Polytope::empty(n));
        }
        if !prev_empty
            && !next_empty
            && prev.contains(&next)?
            && next.contains(&prev)?
        {
            return project_to_state(&prev, n)?.remove_redundant();
        }
        prev = next;
    }
    Err(Error::NoConvergence { k_cap })
}

// --- the ladder -------------------------------------------------------------

/// The complete offline artifact: the k-step sets, the infinite-step set,
/// the deduplicated constraint groups, and everything needed to run the
/// governor against them.
#[derive(Debug, Clone)]
pub struct SafeSetLadder {
    system: LinearSystem,
    feedback: VirtualFeedback,
    input_set: Polytope,
    disturbance: DisturbanceSet,
    step_sets: Vec<Polytope>,
    infinite_set: Polytope,
    groups: Vec<ConstraintGroup>,
    horizon: usize,
}

pub const LADDER_SCHEMA_VERSION: u32 = 1;

impl SafeSetLadder {
    /// Full offline pipeline: tubes, projections, infinite-step set, raw
    /// one-step groups, deduplication, and the nesting checks.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        sys: LinearSystem,
        feedback_gain: DMatrix<f64>,
        state_set: Polytope,
        input_set: Polytope,
        disturbance: DisturbanceSet,
        horizon: usize,
        eps_tight: f64,
        k_cap: usize,
    ) -> Result<SafeSetLadder> {
        if state_set.dim() != sys.num_states() {
            return Err(Error::Dimension("state set dimension mismatch".into()));
        }
        if input_set.dim() != sys.num_inputs() {
            return Err(Error::Dimension("input set dimension mismatch".into()));
        }
        if disturbance.dim() != sys.num_disturbances() {
            return Err(Error::Dimension("disturbance dimension mismatch".into()));
        }
        if state_set.is_empty()? {
            return Err(Error::Config("state constraint set is empty".into()));
        }
        if input_set.is_empty()? {
            return Err(Error::Config("input constraint set is empty".into()));
        }
        let fb = VirtualFeedback::new(&sys, feedback_gain)?;

        let mut step_sets = Vec::with_capacity(horizon + 1);
        for k in 0..=horizon {
            let tube = build_tube(&sys, &fb, &state_set, &input_set, &disturbance, k)?;
            step_sets.push(project_to_state(&tube, sys.num_states())?);
        }
        let infinite_set = build_infinite_set(
            &sys,
            &fb,
            &state_set,
            &input_set,
            &disturbance,
            eps_tight,
            k_cap,
        )?;

        if !sets_row_equal(&step_sets[0], &state_set) {
            return Err(Error::Ladder(
                "the 0-step set does not reproduce the state constraint rows".into(),
            ));
        }

        let mut raw = Vec::with_capacity(horizon + 2);
        for (k, set) in step_sets.iter().enumerate() {
            raw.push(ConstraintGroup::one_step(set, &sys, &disturbance, GroupDepth::Step(k))?);
        }
        raw.push(ConstraintGroup::one_step(
            &infinite_set,
            &sys,
            &disturbance,
            GroupDepth::Infinite,
        )?);

        Self::from_parts(sys, fb, input_set, disturbance, step_sets, infinite_set, raw)
    }

    /// Assemble a ladder from prebuilt pieces: dedupe the groups in depth
    /// order and verify the nesting invariants.
    pub fn from_parts(
        system: LinearSystem,
        feedback: VirtualFeedback,
        input_set: Polytope,
        disturbance: DisturbanceSet,
        step_sets: Vec<Polytope>,
        infinite_set: Polytope,
        raw_groups: Vec<ConstraintGroup>,
    ) -> Result<SafeSetLadder> {
        if step_sets.is_empty() {
            return Err(Error::Ladder("a ladder needs at least the 0-step set".into()));
        }
        let horizon = step_sets.len() - 1;
        if raw_groups.len() != horizon + 2 {
            return Err(Error::Ladder(format!(
                "expected {} groups (steps 0..={horizon} plus the terminal one), got {}",
                horizon + 2,
                raw_groups.len()
            )));
        }
        for (k, g) in raw_groups.iter().enumerate() {
            let expected =
                if k == horizon + 1 { GroupDepth::Infinite } else { GroupDepth::Step(k) };
            if g.depth() != expected {
                return Err(Error::Ladder(format!(
                    "group {k} carries depth label {}, expected {expected}",
                    g.depth()
                )));
            }
        }

        for k in 0..horizon {
            if !step_sets[k].contains(&step_sets[k + 1])? {
                return Err(Error::Ladder(format!(
                    "the {}-step set is not contained in the {k}-step set",
                    k + 1
                )));
            }
        }
        if !infinite_set.is_empty()? && !step_sets[horizon].contains(&infinite_set)? {
            return Err(Error::Ladder(
                "the infinite-step set escapes the deepest k-step set".into(),
            ));
        }

        let groups = dedupe_groups(&raw_groups);
        Ok(SafeSetLadder {
            system,
            feedback,
            input_set,
            disturbance,
            step_sets,
            infinite_set,
            groups,
            horizon,
        })
    }

    pub fn system(&self) -> &LinearSystem {
        &self.system
    }

    pub fn feedback(&self) -> &VirtualFeedback {
        &self.feedback
    }

    pub fn input_set(&self) -> &Polytope {
        &self.input_set
    }

    pub fn disturbance(&self) -> &DisturbanceSet {
        &self.disturbance
    }

    /// The k-step safe sets, index 0 being the state constraint set itself.
    pub fn step_sets(&self) -> &[Polytope] {
        &self.step_sets
    }

    pub fn infinite_set(&self) -> &Polytope {
        &self.infinite_set
    }

    /// Deduplicated groups: depths `0..=horizon` followed by the terminal
    /// (infinite-step) group.
    pub fn groups(&self) -> &[ConstraintGroup] {
        &self.groups
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Largest constraint offset magnitude, used to scale slack tolerances.
    pub fn max_offset(&self) -> f64 {
        let mut m = 0.0f64;
        for g in &self.groups {
            for c in g.offsets().iter() {
                m = m.max(c.abs());
            }
        }
        for c in self.input_set.offsets().iter() {
            m = m.max(c.abs());
        }
        m
    }

    /// Per-pair nesting summary, useful for human-readable reports.
    pub fn nesting_report(&self) -> Result<Vec<(String, bool)>> {
        let mut out = Vec::new();
        for k in 0..self.horizon {
            let ok = self.step_sets[k].contains(&self.step_sets[k + 1])?;
            out.push((format!("step[{}] within step[{k}]", k + 1), ok));
        }
        let ok = self.step_sets[self.horizon].contains(&self.infinite_set)?;
        out.push((format!("infinite set within step[{}]", self.horizon), ok));
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = LadderDoc {
            schema_version: LADDER_SCHEMA_VERSION,
            horizon: self.horizon,
            system: SystemDoc {
                a: wire::matrix_to_rows(self.system.a()),
                b: wire::matrix_to_rows(self.system.b()),
                e: wire::matrix_to_rows(self.system.e()),
                dt: self.system.dt(),
            },
            feedback: wire::matrix_to_rows(self.feedback.gain()),
            input_set: self.input_set.clone(),
            disturbance: match &self.disturbance {
                DisturbanceSet::Box { radius } => DisturbanceDoc {
                    kind: "box".into(),
                    radius: wire::vector_to_vec(radius),
                },
                DisturbanceSet::Ball { radius, dim } => DisturbanceDoc {
                    kind: "ball".into(),
                    radius: vec![*radius; *dim],
                },
            },
            step_sets: self.step_sets.clone(),
            infinite_set: self.infinite_set.clone(),
            groups: self
                .groups
                .iter()
                .map(|g| GroupDoc {
                    depth: match g.depth() {
                        GroupDepth::Step(k) => DepthDoc::Step(k),
                        GroupDepth::Infinite => DepthDoc::Tag("inf".into()),
                    },
                    state_coeffs: wire::matrix_to_rows(g.state_coeffs()),
                    input_coeffs: wire::matrix_to_rows(g.input_coeffs()),
                    offsets: wire::vector_to_vec(g.offsets()),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<SafeSetLadder> {
        let doc: LadderDoc = serde_json::from_str(text)?;
        if doc.schema_version != LADDER_SCHEMA_VERSION {
            return Err(Error::Serde(format!(
                "unsupported ladder schema version {}",
                doc.schema_version
            )));
        }
        let system = LinearSystem::new(
            wire::rows_to_matrix(&doc.system.a, "system.a")?,
            wire::rows_to_matrix(&doc.system.b, "system.b")?,
            wire::rows_to_matrix(&doc.system.e, "system.e")?,
            doc.system.dt,
        )?;
        let n = system.num_states();
        let m = system.num_inputs();
        let feedback =
            VirtualFeedback::new(&system, wire::rows_to_matrix(&doc.feedback, "feedback")?)?;
        let disturbance = match doc.disturbance.kind.as_str() {
            "box" => DisturbanceSet::box_set(DVector::from_row_slice(&doc.disturbance.radius))?,
            "ball" => {
                let r = doc
                    .disturbance
                    .radius
                    .first()
                    .copied()
                    .ok_or_else(|| Error::Serde("ball disturbance needs a radius".into()))?;
                DisturbanceSet::ball(r, doc.disturbance.radius.len())?
            }
            other => return Err(Error::Serde(format!("unknown disturbance kind {other:?}"))),
        };
        let mut groups = Vec::with_capacity(doc.groups.len());
        for g in &doc.groups {
            let depth = match &g.depth {
                DepthDoc::Step(k) => GroupDepth::Step(*k),
                DepthDoc::Tag(s) if s == "inf" => GroupDepth::Infinite,
                DepthDoc::Tag(s) => {
                    return Err(Error::Serde(format!("unknown depth label {s:?}")))
                }
            };
            groups.push(ConstraintGroup::from_parts(
                wire::rows_to_matrix_allow_empty(&g.state_coeffs, n, "group state coeffs")?,
                wire::rows_to_matrix_allow_empty(&g.input_coeffs, m, "group input coeffs")?,
                DVector::from_row_slice(&g.offsets),
                depth,
            )?);
        }
        SafeSetLadder::from_parts(
            system,
            feedback,
            doc.input_set,
            disturbance,
            doc.step_sets,
            doc.infinite_set,
            groups,
        )
    }
}

/// Row-set equality of two canonical polytopes, tolerance `row_match`.
pub fn sets_row_equal(a: &Polytope, b: &Polytope) -> bool {
    if a.dim() != b.dim() || a.num_rows() != b.num_rows() {
        return false;
    }
    let tol = Tolerances::shared().row_match;
    let b_rows = b.rows_vec();
    let mut used = vec![false; b_rows.len()];
    'outer: for (na, oa) in a.rows_vec() {
        for (j, (nb, ob)) in b_rows.iter().enumerate() {
            if used[j] {
                continue;
            }
            let close = na.iter().zip(nb.iter()).all(|(x, y)| (x - y).abs() <= tol)
                && (oa - ob).abs() <= tol * (1.0 + ob.abs());
            if close {
                used[j] = true;
                continue 'outer;
            }
        }
        return false;
    }
    true
}

// --- wire structs -----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SystemDoc {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    e: Vec<Vec<f64>>,
    dt: f64,
}

#[derive(Serialize, Deserialize)]
struct DisturbanceDoc {
    kind: String,
    radius: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DepthDoc {
    Step(usize),
    Tag(String),
}

#[derive(Serialize, Deserialize)]
struct GroupDoc {
    depth: DepthDoc,
    state_coeffs: Vec<Vec<f64>>,
    input_coeffs: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LadderDoc {
    schema_version: u32,
    horizon: usize,
    system: SystemDoc,
    feedback: Vec<Vec<f64>>,
    input_set: Polytope,
    disturbance: DisturbanceDoc,
    step_sets: Vec<Polytope>,
    infinite_set: Polytope,
    groups: Vec<GroupDoc>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_system() -> LinearSystem {
        LinearSystem::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn spectral_radius_of_rotation_scale() {
        // Scaled rotation: complex pair with magnitude exactly 0.9.
        let c = 0.9 * (0.3f64).cos();
        let s = 0.9 * (0.3f64).sin();
        let m = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        assert!((spectral_radius(&m) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn feedback_rejects_unstable_closed_loop() {
        let sys = scalar_system();
        // A + BK = 1 + 0 = 1: on the unit circle, not Schur.
        let err = VirtualFeedback::new(&sys, DMatrix::from_element(1, 1, 0.0)).unwrap_err();
        assert!(err.to_string().contains("spectral radius"));
    }

    #[test]
    fn one_step_group_tightens_by_support() {
        // Target {x ≤ 1}, A = B = E = 1, W = [-1/2, 1/2]: row x + u ≤ 1/2.
        let sys = scalar_system();
        let target = Polytope::new(1, vec![(DVector::from_element(1, 1.0), 1.0)]).unwrap();
        let w = DisturbanceSet::box_set(DVector::from_element(1, 0.5)).unwrap();
        let g = ConstraintGroup::one_step(&target, &sys, &w, GroupDepth::Step(0)).unwrap();
        assert_eq!(g.num_rows(), 1);
        let scale = (2.0f64).sqrt();
        assert!((g.state_coeffs()[(0, 0)] - 1.0 / scale).abs() < 1e-12);
        assert!((g.input_coeffs()[(0, 0)] - 1.0 / scale).abs() < 1e-12);
        assert!((g.offsets()[0] - 0.5 / scale).abs() < 1e-12);
    }

    #[test]
    fn zero_disturbance_keeps_raw_offsets() {
        let sys = scalar_system();
        let target = Polytope::new(1, vec![(DVector::from_element(1, 1.0), 1.0)]).unwrap();
        let w = DisturbanceSet::box_set(DVector::from_element(1, 0.0)).unwrap();
        let g = ConstraintGroup::one_step(&target, &sys, &w, GroupDepth::Step(0)).unwrap();
        let scale = (2.0f64).sqrt();
        assert!((g.offsets()[0] - 1.0 / scale).abs() < 1e-12);
    }

    #[test]
    fn dedupe_drops_rows_seen_at_shallower_depth() {
        let mk = |rows: &[(f64, f64, f64)], depth| {
            ConstraintGroup::from_parts(
                DMatrix::from_fn(rows.len(), 1, |i, _| rows[i].0),
                DMatrix::from_fn(rows.len(), 1, |i, _| rows[i].1),
                DVector::from_fn(rows.len(), |i, _| rows[i].2),
                depth,
            )
            .unwrap()
        };
        let inv = 1.0 / (2.0f64).sqrt();
        let g0 = mk(&[(inv, inv, inv)], GroupDepth::Step(0));
        let g1 = mk(&[(inv, inv, inv), (1.0, 0.0, 0.0)], GroupDepth::Step(1));
        let deduped = dedupe_groups(&[g0, g1]);
        assert_eq!(deduped[0].num_rows(), 1);
        assert_eq!(deduped[1].num_rows(), 1);
        assert_eq!(deduped[1].state_coeffs()[(0, 0)], 1.0);
    }

    #[test]
    fn tube_stage_zero_state_rows_are_the_state_set() {
        // Λ_0 = 0, so the t = 0 state rows coincide with the raw state rows.
        let sys = scalar_system();
        let fb = VirtualFeedback::new(&sys, DMatrix::from_element(1, 1, -0.5)).unwrap();
        let state = Polytope::from_bounds(&[-1.0], &[1.0]).unwrap();
        let input = Polytope::from_bounds(&[-10.0], &[10.0]).unwrap();
        let w = DisturbanceSet::box_set(DVector::from_element(1, 0.0)).unwrap();
        let rows = tube_rows(&sys, &fb, &state, &input, &w, 0).unwrap();
        // First two rows are the state rows lifted with a zero v column.
        assert_eq!(rows[0].0[1], 0.0);
        assert_eq!(rows[1].0[1], 0.0);
        assert_eq!(rows[0].1.abs(), 1.0);
    }

    #[test]
    fn zero_step_projection_recovers_state_set() {
        let sys = scalar_system();
        let fb = VirtualFeedback::new(&sys, DMatrix::from_element(1, 1, -0.5)).unwrap();
        let state = Polytope::from_bounds(&[-1.0], &[1.0]).unwrap();
        let input = Polytope::from_bounds(&[-10.0], &[10.0]).unwrap();
        let w = DisturbanceSet::box_set(DVector::from_element(1, 0.0)).unwrap();
        let tube = build_tube(&sys, &fb, &state, &input, &w, 0).unwrap();
        let proj = project_to_state(&tube, 1).unwrap();
        assert!(sets_row_equal(&proj, &state));
    }

    #[test]
    fn car_following_stage_one_rows_match_hand_arithmetic() {
        // A = [[1, 1/4], [0, 1]], B = (-1/32, -1/4), E = (1/32, 1/4),
        // K = [0.2842, 0.8056], |w| ≤ 1. The stage-1 row for the gap upper
        // bound is Γ(A_c x + B v) ≤ 20 - h_W(ΓᵀE) with Γ = (1, 0).
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.25, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[-0.03125, -0.25]);
        let e = DMatrix::from_row_slice(2, 1, &[0.03125, 0.25]);
        let sys = LinearSystem::new(a, b, e, 0.25).unwrap();
        let gain = DMatrix::from_row_slice(1, 2, &[0.2842, 0.8056]);
        let fb = VirtualFeedback::new(&sys, gain).unwrap();
        let state = Polytope::from_bounds(&[10.0, -5.0], &[20.0, 5.0]).unwrap();
        let input = Polytope::from_bounds(&[-2.0], &[2.0]).unwrap();
        let w = DisturbanceSet::box_set(DVector::from_element(1, 1.0)).unwrap();

        let rows = tube_rows(&sys, &fb, &state, &input, &w, 1).unwrap();
        // Hand values: A_c = A + BK, row = (A_cᵀΓ, BᵀΓ) with offset
        // 20 - |ΓᵀE| = 19.96875.
        let a_c = fb.closed_loop();
        let expect = DVector::from_row_slice(&[a_c[(0, 0)], a_c[(0, 1)], -0.03125]);
        let found = rows.iter().any(|(n, o)| {
            (n - &expect).amax() < 1e-12 && (o - 19.96875).abs() < 1e-12
        });
        assert!(found, "stage-1 gap row missing from the tube");

        // The one-step group offset for the minimum-gap row tightens by
        // h_W((-1,0)ᵀE) = 1/32.
        let group = ConstraintGroup::one_step(&state, &sys, &w, GroupDepth::Step(0)).unwrap();
        let scale = (1.0f64 + 0.0625 + 0.0009765625).sqrt(); // ‖(-1, -1/4, 1/32)‖
        let tightened = (-10.0 - 0.03125) / scale;
        let found = (0..group.num_rows()).any(|i| {
            (group.offsets()[i] - tightened).abs() < 1e-12
                && (group.state_coeffs()[(i, 0)] + 1.0 / scale).abs() < 1e-12
        });
        assert!(found, "minimum-gap row not tightened by the support value");
    }

    #[test]
    fn zero_disturbance_invariant_box_is_its_own_terminal_set() {
        // Contractive closed loop, no disturbance, effectively unbounded
        // inputs: the terminal set equals the (invariant) state box, and a
        // virtual-feedback step stays inside it.
        let sys = scalar_system();
        let fb = VirtualFeedback::new(&sys, DMatrix::from_element(1, 1, -0.5)).unwrap();
        let state = Polytope::from_bounds(&[-1.0], &[1.0]).unwrap();
        let input = Polytope::from_bounds(&[-1e3], &[1e3]).unwrap();
        let w = DisturbanceSet::box_set(DVector::from_element(1, 0.0)).unwrap();
        let inf = build_infinite_set(&sys, &fb, &state, &input, &w, 1e-3, 60).unwrap();
        assert!(state.contains(&inf).unwrap());
        assert!(inf.contains(&state).unwrap(), "terminal set lost part of the invariant box");

        // Sampled one-step invariance under u = Kx (v = 0).
        for i in 0..100 {
            let x = DVector::from_element(1, -1.0 + 2.0 * (i as f64) / 99.0);
            if !inf.contains_point(&x, 1e-9) {
                continue;
            }
            let u = fb.gain() * &x;
            let next = sys.step(&x, &u, &DVector::zeros(1));
            assert!(inf.contains_point(&next, 1e-7), "left the set from {x:?}");
        }
    }

    #[test]
    fn scalar_ladder_builds_and_nests() {
        let sys = scalar_system();
        let state = Polytope::from_bounds(&[-1.0], &[1.0]).unwrap();
        let input = Polytope::from_bounds(&[-1.0], &[1.0]).unwrap();
        let w = DisturbanceSet::box_set(DVector::from_element(1, 0.1)).unwrap();
        let ladder = SafeSetLadder::build(
            sys,
            DMatrix::from_element(1, 1, -0.5),
            state.clone(),
            input,
            w,
            3,
            1e-3,
            60,
        )
        .unwrap();
        assert_eq!(ladder.step_sets().len(), 4);
        assert!(sets_row_equal(&ladder.step_sets()[0], &state));
        for (label, ok) in ladder.nesting_report().unwrap() {
            assert!(ok, "nesting failed: {label}");
        }
        assert!(!ladder.infinite_set().is_empty().unwrap());

        // Invariance of the terminal set under u = Kx + v for a sampled point.
        let json = ladder.to_json().unwrap();
        let back = SafeSetLadder::from_json(&json).unwrap();
        assert_eq!(json, back.to_json().unwrap());
    }
}
