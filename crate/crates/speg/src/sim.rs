//! Closed-loop simulation under the governor.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::governor::{self, PenaltyConfig};
use crate::safesets::SafeSetLadder;
use crate::tol::Tolerances;

/// Nominal controller hook: a constant input or a per-step schedule.
#[derive(Debug, Clone)]
pub enum NominalControl {
    Constant(DVector<f64>),
    Schedule(Vec<DVector<f64>>),
}

impl NominalControl {
    fn at(&self, t: usize) -> Result<&DVector<f64>> {
        match self {
            NominalControl::Constant(u) => Ok(u),
            NominalControl::Schedule(list) => list.get(t).ok_or_else(|| {
                Error::Config(format!("nominal schedule is shorter than the run ({t} steps)"))
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSegment {
    pub start: usize,
    pub value: DVector<f64>,
}

/// Disturbance realization schedule. `WorstCaseVertex` greedily picks, at
/// every step, the box vertex that minimizes the successor's margin to the
/// infinite-step set (ties going to the lexicographically smallest vertex).
/// Profiles may leave the modeled disturbance set on purpose; the simulator
/// traces straight through the resulting violations.
#[derive(Debug, Clone)]
pub enum DisturbanceProfile {
    Constant(DVector<f64>),
    Piecewise(Vec<ProfileSegment>),
    WorstCaseVertex,
}

impl DisturbanceProfile {
    pub fn piecewise(segments: Vec<ProfileSegment>) -> Result<DisturbanceProfile> {
        if segments.windows(2).any(|w| w[0].start >= w[1].start) {
            return Err(Error::Config("segment start times must strictly increase".into()));
        }
        Ok(DisturbanceProfile::Piecewise(segments))
    }

    /// Parse a compact profile spec: `"constant:<w>"` with a
    /// comma-separated vector, `"piecewise:<t>=<w>;<t>=<w>;…"`, or
    /// `"worst-case"`.
    pub fn parse(text: &str, dim: usize) -> Result<DisturbanceProfile> {
        if text == "worst-case" {
            return Ok(DisturbanceProfile::WorstCaseVertex);
        }
        if let Some(rest) = text.strip_prefix("constant:") {
            let w = parse_vector(rest)?;
            if w.len() != dim {
                return Err(Error::Config("disturbance value has the wrong dimension".into()));
            }
            return Ok(DisturbanceProfile::Constant(w));
        }
        if let Some(rest) = text.strip_prefix("piecewise:") {
            let mut segments = Vec::new();
            for part in rest.split(';') {
                let (t, w) = part.split_once('=').ok_or_else(|| {
                    Error::Config(format!("piecewise segment {part:?} is not <t>=<w>"))
                })?;
                let start: usize = t
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad segment time {t:?}")))?;
                let value = parse_vector(w)?;
                if value.len() != dim {
                    return Err(Error::Config(
                        "disturbance value has the wrong dimension".into(),
                    ));
                }
                segments.push(ProfileSegment { start, value });
            }
            return DisturbanceProfile::piecewise(segments);
        }
        Err(Error::Config(format!(
            "unknown profile {text:?}; use constant:<w>, piecewise:<t>=<w>;…, or worst-case"
        )))
    }

    fn scheduled_value(&self, t: usize, dim: usize) -> Option<DVector<f64>> {
        match self {
            DisturbanceProfile::Constant(w) => Some(w.clone()),
            DisturbanceProfile::Piecewise(segments) => Some(
                segments
                    .iter()
                    .rev()
                    .find(|s| s.start <= t)
                    .map(|s| s.value.clone())
                    .unwrap_or_else(|| DVector::zeros(dim)),
            ),
            DisturbanceProfile::WorstCaseVertex => None,
        }
    }
}

/// One recorded step: the pre-step state, the inputs applied at it, and the
/// governor diagnostics.
#[derive(Debug, Clone)]
pub struct SimStep {
    pub t: usize,
    pub state: DVector<f64>,
    pub u_nom: DVector<f64>,
    pub u: DVector<f64>,
    pub w: DVector<f64>,
    pub slacks: DVector<f64>,
    pub k_star: i64,
    pub in_state_set: bool,
    pub in_infinite_set: bool,
}

#[derive(Debug, Clone)]
pub struct SimTrace {
    pub steps: Vec<SimStep>,
    pub final_state: DVector<f64>,
}

impl SimTrace {
    /// Smallest margin to the infinite-step set over the recorded states.
    pub fn min_infinite_margin(&self, ladder: &SafeSetLadder) -> f64 {
        self.steps
            .iter()
            .map(|s| ladder.infinite_set().signed_margin(&s.state))
            .fold(f64::INFINITY, f64::min)
    }

    /// First step index whose state violates the state constraint set.
    pub fn first_state_violation(&self) -> Option<usize> {
        self.steps.iter().find(|s| !s.in_state_set).map(|s| s.t)
    }

    /// CSV with one row per step; floats carry 17 significant digits so the
    /// file round-trips losslessly.
    pub fn to_csv(&self) -> String {
        let (n, m, p, ks) = match self.steps.first() {
            Some(s) => (s.state.len(), s.u.len(), s.w.len(), s.slacks.len()),
            None => return String::new(),
        };
        let mut header: Vec<String> = vec!["t".into()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=m).map(|i| format!("u_nom{i}")));
        header.extend((1..=m).map(|i| format!("u{i}")));
        header.extend((1..=p).map(|i| format!("w{i}")));
        header.push("k_star".into());
        header.extend((0..ks).map(|k| format!("eps{k}")));
        header.push("in_X0".into());
        header.push("in_Xinf".into());

        let mut out = header.join(",");
        out.push('\n');
        for s in &self.steps {
            let mut fields: Vec<String> = vec![s.t.to_string()];
            fields.extend(s.state.iter().map(|v| fmt_float(*v)));
            fields.extend(s.u_nom.iter().map(|v| fmt_float(*v)));
            fields.extend(s.u.iter().map(|v| fmt_float(*v)));
            fields.extend(s.w.iter().map(|v| fmt_float(*v)));
            fields.push(s.k_star.to_string());
            fields.extend(s.slacks.iter().map(|v| fmt_float(*v)));
            fields.push(s.in_state_set.to_string());
            fields.push(s.in_infinite_set.to_string());
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Comma-separated float vector, e.g. `"15,-4"`.
pub fn parse_vector(text: &str) -> Result<DVector<f64>> {
    let values: std::result::Result<Vec<f64>, _> =
        text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => {
            Ok(DVector::from_row_slice(&v))
        }
        _ => Err(Error::Config(format!("expected comma-separated numbers, got {text:?}"))),
    }
}

/// Run the governed closed loop for `steps` steps from `x0`.
pub fn run(
    ladder: &SafeSetLadder,
    cfg: &PenaltyConfig,
    x0: DVector<f64>,
    nominal: &NominalControl,
    profile: &DisturbanceProfile,
    steps: usize,
) -> Result<SimTrace> {
    if steps == 0 {
        return Err(Error::Config("simulation needs at least one step".into()));
    }
    let n = ladder.system().num_states();
    let p = ladder.system().num_disturbances();
    if x0.len() != n || !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::Dimension("initial state has the wrong shape".into()));
    }
    let membership = Tolerances::shared().membership;

    let mut x = x0;
    let mut trace = Vec::with_capacity(steps);
    for t in 0..steps {
        let u_nom = nominal.at(t)?.clone();
        let sol = governor::govern(ladder, cfg, &x, &u_nom)?;

        let w = match profile.scheduled_value(t, p) {
            Some(w) => {
                if w.len() != p {
                    return Err(Error::Dimension(
                        "disturbance value has the wrong dimension".into(),
                    ));
                }
                w
            }
            None => worst_vertex(ladder, &x, &sol.u)?,
        };

        trace.push(SimStep {
            t,
            state: x.clone(),
            u_nom,
            u: sol.u.clone(),
            w: w.clone(),
            slacks: sol.slacks,
            k_star: sol.k_star,
            in_state_set: ladder.step_sets()[0].contains_point(&x, membership),
            in_infinite_set: ladder.infinite_set().contains_point(&x, membership),
        });
        x = ladder.system().step(&x, &sol.u, &w);
    }
    Ok(SimTrace { steps: trace, final_state: x })
}

fn worst_vertex(
    ladder: &SafeSetLadder,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    let vertices = ladder.disturbance().vertices()?;
    let mut best: Option<(f64, DVector<f64>)> = None;
    for v in vertices {
        let margin = ladder.infinite_set().signed_margin(&ladder.system().step(x, u, &v));
        match &best {
            Some((m, _)) if margin >= *m => {}
            _ => best = Some((margin, v)),
        }
    }
    best.map(|(_, v)| v).ok_or_else(|| Error::Config("disturbance set has no vertices".into()))
}
