//! All numeric tolerances in one place.

/// Tolerance and iteration-limit record shared by the solver and the
/// polyhedral routines. Every threshold used anywhere in the crate lives
/// here, so a single instance pins the numeric behavior of a whole run.
#[derive(Debug, Clone)]
pub struct Tolerances {
    /// Half-band around 1.0 inside which a row normal is considered already
    /// normalized (and is left untouched, keeping canonicalization
    /// bit-idempotent).
    pub unit_norm: f64,
    /// Two normalized rows closer than this are treated as positive
    /// multiples of each other.
    pub row_match: f64,
    /// Coefficients below this magnitude are treated as exact zeros during
    /// Fourier-Motzkin pairing.
    pub fm_zero: f64,
    /// Curvature regularization added to the decision variables when a
    /// linear program is solved through the quadratic-program path.
    pub lp_curvature: f64,
    /// Half-width of the artificial bounding box imposed on LP solves.
    pub lp_box: f64,
    /// Normalized KKT residual bound a solution must satisfy.
    pub kkt: f64,
    /// Slack allowed when deciding that one row is implied by the others.
    pub redundancy: f64,
    /// Slack allowed in polytope containment certificates.
    pub containment: f64,
    /// Point-membership tolerance on normalized rows.
    pub membership: f64,
    /// Active-set iteration cap.
    pub iteration_cap: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            unit_norm: 1e-12,
            row_match: 1e-9,
            fm_zero: 1e-10,
            lp_curvature: 1e-9,
            lp_box: 1e6,
            kkt: 1e-8,
            redundancy: 1e-7,
            containment: 1e-7,
            membership: 1e-9,
            iteration_cap: 100_000,
        }
    }
}

impl Tolerances {
    pub fn shared() -> &'static Tolerances {
        static DEFAULT: std::sync::OnceLock<Tolerances> = std::sync::OnceLock::new();
        DEFAULT.get_or_init(Tolerances::default)
    }
}
