//! H-representation polyhedral computation kernel.
//!
//! A [`Polytope`] is the intersection of half-spaces `nᵀx ≤ γ` stored in a
//! canonical form: every normal has unit Euclidean norm, no two rows are
//! positive multiples of each other, and rows are sorted. Canonicalization
//! is bit-idempotent, which keeps the JSON round trip exact.
//!
//! Projections are computed by Fourier-Motzkin elimination with redundancy
//! removal after every eliminated coordinate; redundancy and containment
//! tests are one linear program per row, solved through the in-crate QP
//! solver (see [`crate::qp`]).

use nalgebra::{DMatrix, DVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::qp::{self, LpOutcome};
use crate::tol::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    normals: DMatrix<f64>,
    offsets: DVector<f64>,
    dim: usize,
}

type Row = (DVector<f64>, f64);

enum Canonical {
    Rows(Vec<Row>),
    Infeasible,
}

fn canonicalize(dim: usize, rows: Vec<Row>, tols: &Tolerances) -> Canonical {
    let mut normalized: Vec<Row> = Vec::with_capacity(rows.len());
    for (mut normal, mut offset) in rows {
        let norm = normal.norm();
        if norm < tols.unit_norm {
            // 0ᵀx ≤ γ: vacuous when γ is nonnegative, inconsistent otherwise.
            // Combination dust slightly below zero is treated as vacuous too.
            if offset < -tols.row_match {
                return Canonical::Infeasible;
            }
            continue;
        }
        if (norm - 1.0).abs() > tols.unit_norm {
            normal /= norm;
            offset /= norm;
        }
        normalized.push((normal, offset));
    }

    // Positive multiples collapse to a single row; when two matching rows
    // carry different offsets within tolerance, the tighter one survives.
    let mut kept: Vec<Row> = Vec::with_capacity(normalized.len());
    'row: for (normal, offset) in normalized {
        for (kn, ko) in kept.iter_mut() {
            let close_normal = normal
                .iter()
                .zip(kn.iter())
                .all(|(a, b)| (a - b).abs() <= tols.row_match);
            if close_normal && (offset - *ko).abs() <= tols.row_match * (1.0 + ko.abs()) {
                *ko = ko.min(offset);
                continue 'row;
            }
        }
        kept.push((normal, offset));
    }

    kept.sort_by(|a, b| {
        for j in 0..dim {
            match a.0[j].total_cmp(&b.0[j]) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        a.1.total_cmp(&b.1)
    });
    Canonical::Rows(kept)
}

impl Polytope {
    /// Build a polytope from half-space rows, canonicalizing them.
    ///
    /// An inconsistent zero row makes the result the canonical empty
    /// polytope rather than an error.
    pub fn new(dim: usize, rows: Vec<Row>) -> Result<Polytope> {
        if dim == 0 {
            return Err(Error::Dimension("polytope dimension must be positive".into()));
        }
        for (normal, offset) in &rows {
            if normal.len() != dim {
                return Err(Error::Dimension(format!(
                    "row normal has length {}, expected {dim}",
                    normal.len()
                )));
            }
            if !normal.iter().all(|v| v.is_finite()) || !offset.is_finite() {
                return Err(Error::Dimension("non-finite entry in polytope row".into()));
            }
        }
        match canonicalize(dim, rows, Tolerances::shared()) {
            Canonical::Rows(kept) => Ok(Self::from_canonical(dim, kept)),
            Canonical::Infeasible => Ok(Self::empty(dim)),
        }
    }

    fn from_canonical(dim: usize, rows: Vec<Row>) -> Polytope {
        let q = rows.len();
        let normals = DMatrix::from_fn(q, dim, |i, j| rows[i].0[j]);
        let offsets = DVector::from_fn(q, |i, _| rows[i].1);
        Polytope { normals, offsets, dim }
    }

    /// The canonical empty polytope: `x₁ ≤ -1` together with `x₁ ≥ 1`.
    pub fn empty(dim: usize) -> Polytope {
        let mut lo = DVector::zeros(dim);
        lo[0] = -1.0;
        let mut hi = DVector::zeros(dim);
        hi[0] = 1.0;
        Self::from_canonical(dim, vec![(lo, -1.0), (hi, -1.0)])
    }

    /// Axis-aligned box `lo ≤ x ≤ hi`.
    pub fn from_bounds(lo: &[f64], hi: &[f64]) -> Result<Polytope> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Dimension("bound arrays must have equal positive length".into()));
        }
        let dim = lo.len();
        let mut rows = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            let mut up = DVector::zeros(dim);
            up[i] = 1.0;
            rows.push((up, hi[i]));
            let mut dn = DVector::zeros(dim);
            dn[i] = -1.0;
            rows.push((dn, -lo[i]));
        }
        Self::new(dim, rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_rows(&self) -> usize {
        self.offsets.len()
    }

    pub fn normals(&self) -> &DMatrix<f64> {
        &self.normals
    }

    pub fn offsets(&self) -> &DVector<f64> {
        &self.offsets
    }

    pub fn rows_vec(&self) -> Vec<Row> {
        (0..self.num_rows())
            .map(|i| (self.normals.row(i).transpose().into_owned(), self.offsets[i]))
            .collect()
    }

    /// Smallest `γᵢ - nᵢᵀx` over all rows; positive inside, `+∞` when the
    /// polytope has no rows (whole space).
    pub fn signed_margin(&self, x: &DVector<f64>) -> f64 {
        let mut margin = f64::INFINITY;
        for i in 0..self.num_rows() {
            let mut dot = 0.0;
            for j in 0..self.dim {
                dot += self.normals[(i, j)] * x[j];
            }
            margin = margin.min(self.offsets[i] - dot);
        }
        margin
    }

    pub fn contains_point(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.signed_margin(x) >= -tol
    }

    /// Emptiness decided by a phase-one feasibility program.
    pub fn is_empty(&self) -> Result<bool> {
        if self.num_rows() == 0 {
            return Ok(false);
        }
        let tols = Tolerances::shared();
        let check = qp::phase_one(&self.normals, &self.offsets, tols.membership, tols)?;
        Ok(!check.feasible)
    }

    /// A point satisfying all rows, when one exists.
    pub fn feasible_point(&self) -> Result<Option<DVector<f64>>> {
        if self.num_rows() == 0 {
            return Ok(Some(DVector::zeros(self.dim)));
        }
        let tols = Tolerances::shared();
        let check = qp::phase_one(&self.normals, &self.offsets, tols.membership, tols)?;
        Ok(check.feasible.then_some(check.witness))
    }

    /// Maximize `direction · x` over the polytope (with the LP conventions
    /// of [`qp::maximize`]).
    pub fn maximize(&self, direction: &DVector<f64>) -> Result<LpOutcome> {
        if direction.len() != self.dim {
            return Err(Error::Dimension("objective length differs from polytope dim".into()));
        }
        qp::maximize(direction, &self.normals, &self.offsets, Tolerances::shared())
    }

    /// Per-coordinate bounds. Errors if some coordinate is unbounded over
    /// the polytope.
    pub fn bounding_box(&self) -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::with_capacity(self.dim);
        for j in 0..self.dim {
            let mut dir = DVector::zeros(self.dim);
            dir[j] = 1.0;
            let hi = match self.maximize(&dir)? {
                LpOutcome::Optimal(m) if !m.hit_box => m.value,
                LpOutcome::Optimal(_) => {
                    return Err(Error::Solver(format!("coordinate {j} is unbounded above")))
                }
                LpOutcome::Infeasible => return Err(Error::Solver("empty polytope".into())),
            };
            dir[j] = -1.0;
            let lo = match self.maximize(&dir)? {
                LpOutcome::Optimal(m) if !m.hit_box => -m.value,
                LpOutcome::Optimal(_) => {
                    return Err(Error::Solver(format!("coordinate {j} is unbounded below")))
                }
                LpOutcome::Infeasible => return Err(Error::Solver("empty polytope".into())),
            };
            out.push((lo, hi));
        }
        Ok(out)
    }

    /// Intersection: the union of both row systems, canonicalized.
    pub fn intersect(&self, other: &Polytope) -> Result<Polytope> {
        if self.dim != other.dim {
            return Err(Error::Dimension("intersection of mismatched dimensions".into()));
        }
        let mut rows = self.rows_vec();
        rows.extend(other.rows_vec());
        Polytope::new(self.dim, rows)
    }

    /// Cartesian product: rows act on the concatenated coordinates.
    pub fn product(&self, other: &Polytope) -> Result<Polytope> {
        let dim = self.dim + other.dim;
        let mut rows = Vec::with_capacity(self.num_rows() + other.num_rows());
        for (n, o) in self.rows_vec() {
            let mut padded = DVector::zeros(dim);
            padded.rows_mut(0, self.dim).copy_from(&n);
            rows.push((padded, o));
        }
        for (n, o) in other.rows_vec() {
            let mut padded = DVector::zeros(dim);
            padded.rows_mut(self.dim, other.dim).copy_from(&n);
            rows.push((padded, o));
        }
        Polytope::new(dim, rows)
    }

    /// Orthogonal projection onto the kept coordinates via Fourier-Motzkin
    /// elimination, one coordinate per round, with redundancy removal after
    /// each round. The result's coordinates follow the ascending original
    /// order of `keep`.
    pub fn project_out(&self, keep: &[usize]) -> Result<Polytope> {
        let mut keep: Vec<usize> = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.is_empty() || keep.len() >= self.dim {
            return Err(Error::Dimension(
                "keep set must be a nonempty strict subset of the coordinates".into(),
            ));
        }
        if *keep.last().unwrap() >= self.dim {
            return Err(Error::Dimension("keep index out of range".into()));
        }
        let final_dim = keep.len();
        let tols = Tolerances::shared();

        let mut drops: Vec<usize> =
            (0..self.dim).filter(|j| !keep.contains(j)).collect();
        drops.sort_unstable_by(|a, b| b.cmp(a)); // highest first keeps indices stable

        let mut current = self.clone();
        for col in drops {
            let rows = fm_eliminate(&current.rows_vec(), col, tols.fm_zero);
            let reduced = Polytope::new(current.dim - 1, rows)?;
            if reduced.is_empty()? {
                return Ok(Polytope::empty(final_dim));
            }
            current = reduced.remove_redundant()?;
        }
        Ok(current)
    }

    /// Drop every row implied by the remaining ones. Each candidate row is
    /// tested by maximizing its normal over the other rows.
    pub fn remove_redundant(&self) -> Result<Polytope> {
        let q = self.num_rows();
        if q <= 1 {
            return Ok(self.clone());
        }
        if self.is_empty()? {
            return Ok(self.clone());
        }
        let tols = Tolerances::shared();
        let mut kept = vec![true; q];
        for i in 0..q {
            let others: Vec<usize> =
                (0..q).filter(|&j| j != i && kept[j]).collect();
            if others.is_empty() {
                continue;
            }
            let rows = DMatrix::from_fn(others.len(), self.dim, |r, c| {
                self.normals[(others[r], c)]
            });
            let offs = DVector::from_fn(others.len(), |r, _| self.offsets[others[r]]);
            let dir = self.normals.row(i).transpose().into_owned();
            match qp::maximize(&dir, &rows, &offs, tols)? {
                LpOutcome::Optimal(m) => {
                    let bound = self.offsets[i]
                        + tols.redundancy * (1.0 + self.offsets[i].abs());
                    if !m.hit_box && m.value <= bound {
                        kept[i] = false;
                    }
                }
                // The remaining rows describe a superset of a nonempty set.
                LpOutcome::Infeasible => {}
            }
        }
        let rows: Vec<Row> = (0..q)
            .filter(|&i| kept[i])
            .map(|i| (self.normals.row(i).transpose().into_owned(), self.offsets[i]))
            .collect();
        Polytope::new(self.dim, rows)
    }

    /// Does this polytope contain `other`? One LP per row of `self`.
    pub fn contains(&self, other: &Polytope) -> Result<bool> {
        Ok(self.contains_report(other)?.contained)
    }

    pub fn contains_report(&self, other: &Polytope) -> Result<ContainsReport> {
        if self.dim != other.dim {
            return Err(Error::Dimension("containment of mismatched dimensions".into()));
        }
        let tols = Tolerances::shared();
        for i in 0..self.num_rows() {
            let dir = self.normals.row(i).transpose().into_owned();
            match qp::maximize(&dir, &other.normals, &other.offsets, tols)? {
                LpOutcome::Optimal(m) => {
                    let bound = self.offsets[i]
                        + tols.containment * (1.0 + self.offsets[i].abs());
                    if m.hit_box && m.value > bound {
                        return Ok(ContainsReport {
                            contained: false,
                            failing_row: Some(i),
                            unbounded: true,
                            excess: m.value - self.offsets[i],
                        });
                    }
                    if m.value > bound {
                        return Ok(ContainsReport {
                            contained: false,
                            failing_row: Some(i),
                            unbounded: false,
                            excess: m.value - self.offsets[i],
                        });
                    }
                }
                // An empty inner set is contained vacuously.
                LpOutcome::Infeasible => break,
            }
        }
        Ok(ContainsReport { contained: true, failing_row: None, unbounded: false, excess: 0.0 })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Polytope> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Outcome of a containment test, with a diagnostic for the unbounded case.
#[derive(Debug, Clone)]
pub struct ContainsReport {
    pub contained: bool,
    pub failing_row: Option<usize>,
    /// The failing maximization ran off to the LP bounding box.
    pub unbounded: bool,
    pub excess: f64,
}

fn fm_eliminate(rows: &[Row], col: usize, zero_tol: f64) -> Vec<Row> {
    let mut uppers: Vec<&Row> = Vec::new();
    let mut lowers: Vec<&Row> = Vec::new();
    let mut out: Vec<Row> = Vec::new();
    let strip = |normal: &DVector<f64>| -> DVector<f64> {
        let dim = normal.len();
        DVector::from_fn(dim - 1, |i, _| if i < col { normal[i] } else { normal[i + 1] })
    };
    for row in rows {
        let c = row.0[col];
        if c > zero_tol {
            uppers.push(row);
        } else if c < -zero_tol {
            lowers.push(row);
        } else {
            out.push((strip(&row.0), row.1));
        }
    }
    for up in &uppers {
        let su = 1.0 / up.0[col];
        for lo in &lowers {
            let sl = 1.0 / (-lo.0[col]);
            let normal = strip(&up.0) * su + strip(&lo.0) * sl;
            let offset = up.1 * su + lo.1 * sl;
            out.push((normal, offset));
        }
    }
    out
}

// --- disturbance sets ------------------------------------------------------

/// Bounded disturbance set: an axis-aligned box (per-coordinate radii) or a
/// Euclidean ball.
#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceSet {
    Box { radius: DVector<f64> },
    Ball { radius: f64, dim: usize },
}

impl DisturbanceSet {
    pub fn box_set(radius: DVector<f64>) -> Result<DisturbanceSet> {
        if radius.is_empty() {
            return Err(Error::Dimension("disturbance dimension must be positive".into()));
        }
        if !radius.iter().all(|w| w.is_finite() && *w >= 0.0) {
            return Err(Error::Config("box radii must be finite and nonnegative".into()));
        }
        Ok(DisturbanceSet::Box { radius })
    }

    pub fn ball(radius: f64, dim: usize) -> Result<DisturbanceSet> {
        if dim == 0 {
            return Err(Error::Dimension("disturbance dimension must be positive".into()));
        }
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::Config("ball radius must be finite and nonnegative".into()));
        }
        Ok(DisturbanceSet::Ball { radius, dim })
    }

    pub fn dim(&self) -> usize {
        match self {
            DisturbanceSet::Box { radius } => radius.len(),
            DisturbanceSet::Ball { dim, .. } => *dim,
        }
    }

    /// Support function `h_W(a) = max { aᵀw : w ∈ W }`.
    pub fn support(&self, a: &DVector<f64>) -> Result<f64> {
        if a.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "support direction has length {}, disturbance dimension is {}",
                a.len(),
                self.dim()
            )));
        }
        Ok(match self {
            DisturbanceSet::Box { radius } => {
                a.iter().zip(radius.iter()).map(|(ai, wi)| wi * ai.abs()).sum()
            }
            DisturbanceSet::Ball { radius, .. } => radius * a.norm(),
        })
    }

    /// Vertices of a box set in ascending lexicographic order.
    pub fn vertices(&self) -> Result<Vec<DVector<f64>>> {
        match self {
            DisturbanceSet::Box { radius } => {
                let p = radius.len();
                let mut out = Vec::with_capacity(1 << p);
                for mask in 0..(1usize << p) {
                    let v = DVector::from_fn(p, |i, _| {
                        if (mask >> (p - 1 - i)) & 1 == 0 { -radius[i] } else { radius[i] }
                    });
                    if !out.contains(&v) {
                        out.push(v);
                    }
                }
                Ok(out)
            }
            DisturbanceSet::Ball { .. } => Err(Error::Config(
                "vertex enumeration requires a box disturbance set".into(),
            )),
        }
    }
}

// --- serialization ---------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct PolytopeDoc {
    dim: usize,
    rows: Vec<Vec<f64>>,
}

impl Serialize for Polytope {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = (0..self.num_rows())
            .map(|i| {
                let mut row: Vec<f64> = self.normals.row(i).iter().copied().collect();
                row.push(self.offsets[i]);
                row
            })
            .collect();
        PolytopeDoc { dim: self.dim, rows }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Polytope {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = PolytopeDoc::deserialize(deserializer)?;
        let mut rows = Vec::with_capacity(doc.rows.len());
        for (i, row) in doc.rows.iter().enumerate() {
            if row.len() != doc.dim + 1 {
                return Err(D::Error::custom(format!(
                    "row {i} has {} entries, expected {}",
                    row.len(),
                    doc.dim + 1
                )));
            }
            let normal = DVector::from_row_slice(&row[..doc.dim]);
            rows.push((normal, row[doc.dim]));
        }
        Polytope::new(doc.dim, rows).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vec1(x: f64) -> DVector<f64> {
        DVector::from_row_slice(&[x])
    }

    #[test]
    fn box_support_is_weighted_absolute_sum() {
        let w = DisturbanceSet::box_set(vec1(1.0)).unwrap();
        assert_eq!(w.support(&vec1(2.0)).unwrap(), 2.0);
        assert_eq!(w.support(&vec1(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn box_support_matches_vertex_enumeration() {
        let w = DisturbanceSet::box_set(DVector::from_row_slice(&[1.0, 1.0])).unwrap();
        let a = DVector::from_row_slice(&[0.25, -0.5]);
        // Independent oracle: max of aᵀw over the four vertices.
        let brute = w
            .vertices()
            .unwrap()
            .iter()
            .map(|v| a.dot(v))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(brute, 0.75);
        assert!((w.support(&a).unwrap() - brute).abs() < 1e-15);
    }

    #[test]
    fn ball_support_scales_with_direction_norm() {
        let w = DisturbanceSet::ball(2.0, 2).unwrap();
        let a = DVector::from_row_slice(&[3.0, 4.0]);
        assert!((w.support(&a).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn support_rejects_mismatched_direction() {
        let w = DisturbanceSet::box_set(vec1(1.0)).unwrap();
        assert!(w.support(&DVector::from_row_slice(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn projects_box_to_interval() {
        let p = Polytope::from_bounds(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let proj = p.project_out(&[0]).unwrap();
        let expect = Polytope::from_bounds(&[0.0], &[1.0]).unwrap();
        assert_eq!(proj, expect);
    }

    #[test]
    fn projects_single_elimination() {
        // x ≤ v, v ≤ 3  →  x ≤ 3
        let rows = vec![
            (DVector::from_row_slice(&[1.0, -1.0]), 0.0),
            (DVector::from_row_slice(&[0.0, 1.0]), 3.0),
        ];
        let p = Polytope::new(2, rows).unwrap();
        let proj = p.project_out(&[0]).unwrap();
        assert_eq!(proj.num_rows(), 1);
        assert!((proj.normals()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((proj.offsets()[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn projection_of_inconsistent_strip_is_empty() {
        // x ≤ v ≤ x - 1 has no solution for any x.
        let rows = vec![
            (DVector::from_row_slice(&[1.0, -1.0]), 0.0),
            (DVector::from_row_slice(&[-1.0, 1.0]), -1.0),
        ];
        let p = Polytope::new(2, rows).unwrap();
        let proj = p.project_out(&[0]).unwrap();
        assert!(proj.is_empty().unwrap());
    }

    #[test]
    fn projection_membership_agrees_with_lift_feasibility() {
        use rand::Rng;
        use rand::SeedableRng;
        // A lifted 3-D polytope with coupling between x and the eliminated v.
        let rows = vec![
            (DVector::from_row_slice(&[1.0, 0.5, -1.0]), 1.0),
            (DVector::from_row_slice(&[-1.0, 0.25, 1.0]), 1.5),
            (DVector::from_row_slice(&[0.3, -1.0, 0.5]), 0.8),
            (DVector::from_row_slice(&[0.0, 0.0, 1.0]), 1.0),
            (DVector::from_row_slice(&[0.0, 0.0, -1.0]), 1.0),
            (DVector::from_row_slice(&[1.0, 1.0, 0.0]), 2.0),
            (DVector::from_row_slice(&[-1.0, -1.0, 0.0]), 2.0),
            (DVector::from_row_slice(&[0.0, -1.0, 0.0]), 2.0),
            (DVector::from_row_slice(&[0.0, 1.0, 0.0]), 2.0),
        ];
        let lifted = Polytope::new(3, rows).unwrap();
        let proj = lifted.project_out(&[0, 1]).unwrap();

        let tols = Tolerances::shared();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut inside = 0;
        for _ in 0..1000 {
            let x = DVector::from_row_slice(&[
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            ]);
            // LP over the eliminated coordinate: is some lift of x feasible?
            let q = lifted.num_rows();
            let rows_v = DMatrix::from_fn(q, 1, |i, _| lifted.normals()[(i, 2)]);
            let offs_v = DVector::from_fn(q, |i, _| {
                lifted.offsets()[i]
                    - lifted.normals()[(i, 0)] * x[0]
                    - lifted.normals()[(i, 1)] * x[1]
            });
            let liftable = qp::phase_one(&rows_v, &offs_v, 1e-7, tols).unwrap().feasible;
            let member = proj.contains_point(&x, 1e-7);
            assert_eq!(member, liftable, "disagreement at x = {x:?}");
            if member {
                inside += 1;
            }
        }
        assert!(inside > 50, "sampling box misses the projection");
    }

    #[test]
    fn drops_dominated_row() {
        let rows = vec![(vec1(1.0), 1.0), (vec1(1.0), 2.0)];
        let p = Polytope::new(1, rows).unwrap().remove_redundant().unwrap();
        assert_eq!(p.num_rows(), 1);
        assert_eq!(p.offsets()[0], 1.0);
    }

    #[test]
    fn positive_multiple_collapses_at_construction() {
        // 2x ≤ 2 normalizes onto x ≤ 1.
        let rows = vec![(vec1(1.0), 1.0), (vec1(2.0), 2.0)];
        let p = Polytope::new(1, rows).unwrap();
        assert_eq!(p.num_rows(), 1);
        assert_eq!(p.offsets()[0], 1.0);
    }

    #[test]
    fn redundancy_removal_keeps_membership_on_octagon() {
        use rand::Rng;
        use rand::SeedableRng;
        // 8 irredundant rows plus 12 redundant ones.
        let mut rows: Vec<Row> = Vec::new();
        for k in 0..8 {
            let angle = std::f64::consts::FRAC_PI_4 * k as f64;
            rows.push((DVector::from_row_slice(&[angle.cos(), angle.sin()]), 1.0));
        }
        for k in 0..8 {
            let angle = std::f64::consts::FRAC_PI_4 * k as f64 + 0.1;
            rows.push((DVector::from_row_slice(&[angle.cos(), angle.sin()]), 1.7));
        }
        for k in 0..4 {
            let angle = std::f64::consts::FRAC_PI_2 * k as f64;
            rows.push((DVector::from_row_slice(&[angle.cos(), angle.sin()]), 2.5));
        }
        let raw = Polytope::new(2, rows).unwrap();
        assert_eq!(raw.num_rows(), 20);
        let trimmed = raw.remove_redundant().unwrap();
        assert_eq!(trimmed.num_rows(), 8);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let x = DVector::from_row_slice(&[
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ]);
            assert_eq!(raw.contains_point(&x, 0.0), trimmed.contains_point(&x, 0.0));
        }
    }

    #[test]
    fn containment_on_nested_intervals() {
        let big = Polytope::new(1, vec![(vec1(1.0), 2.0)]).unwrap();
        let small = Polytope::new(1, vec![(vec1(1.0), 1.0)]).unwrap();
        assert!(big.contains(&small).unwrap());
        assert!(!small.contains(&big).unwrap());
    }

    #[test]
    fn containment_flags_unbounded_inner_set() {
        // Q = { x ≥ 0 } is unbounded in the +x direction tested by P's row.
        let p = Polytope::new(1, vec![(vec1(1.0), 1.0)]).unwrap();
        let q = Polytope::new(1, vec![(vec1(-1.0), 0.0)]).unwrap();
        let report = p.contains_report(&q).unwrap();
        assert!(!report.contained);
        assert!(report.unbounded);
    }

    #[test]
    fn empty_passes_through_redundancy_removal() {
        let e = Polytope::empty(2);
        let out = e.remove_redundant().unwrap();
        assert_eq!(e, out);
        assert!(out.is_empty().unwrap());
    }

    #[test]
    fn inconsistent_zero_row_yields_empty() {
        let rows = vec![(DVector::from_row_slice(&[0.0, 0.0]), -1.0)];
        let p = Polytope::new(2, rows).unwrap();
        assert!(p.is_empty().unwrap());
    }

    #[test]
    fn vacuous_zero_row_is_dropped() {
        let rows = vec![(vec1(1.0), 1.0), (vec1(0.0), 5.0)];
        let p = Polytope::new(1, rows).unwrap();
        assert_eq!(p.num_rows(), 1);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let p = Polytope::new(
            2,
            vec![
                (DVector::from_row_slice(&[3.0, 4.0]), 2.5),
                (DVector::from_row_slice(&[-1.0, 0.7]), -0.1),
            ],
        )
        .unwrap();
        let text = p.to_json().unwrap();
        let back = Polytope::from_json(&text).unwrap();
        assert_eq!(p, back);
        assert_eq!(text, back.to_json().unwrap());
    }

    proptest! {
        #[test]
        fn canonicalization_is_bit_idempotent(
            raw in proptest::collection::vec(
                (proptest::collection::vec(-1e3f64..1e3, 3), -1e3f64..1e3),
                0..12,
            )
        ) {
            let rows: Vec<Row> = raw
                .iter()
                .map(|(n, o)| (DVector::from_row_slice(n), *o))
                .collect();
            let once = Polytope::new(3, rows).unwrap();
            let twice = Polytope::new(3, once.rows_vec()).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn membership_is_preserved_by_round_trip(
            raw in proptest::collection::vec(
                (proptest::collection::vec(-10f64..10.0, 2), -10f64..10.0),
                1..8,
            ),
            px in -10f64..10.0,
            py in -10f64..10.0,
        ) {
            let rows: Vec<Row> = raw
                .iter()
                .map(|(n, o)| (DVector::from_row_slice(n), *o))
                .collect();
            let p = Polytope::new(2, rows).unwrap();
            let back = Polytope::from_json(&p.to_json().unwrap()).unwrap();
            let x = DVector::from_row_slice(&[px, py]);
            prop_assert_eq!(p.contains_point(&x, 1e-9), back.contains_point(&x, 1e-9));
        }
    }
}
