//! Cost-coefficient calibration from observed flow splits.
//!
//! An observation is a demand split plus the flows it produced. A parameter
//! set explains an observation when the equilibrium complementarity products
//! are nonpositive (within `eps`); calibration minimizes the number of
//! violated products, with the hinge sum as a continuous tie-breaker.
//!
//! The native fit is a multi-start pattern search. [`export_milp`] writes
//! the same feasibility structure as a mixed-integer program in LP text
//! format for external solvers, with the `gamma_i * ct_j` bilinearity
//! substituted by variables `D_i`.

use std::io::{Read, Write};

use thiserror::Error;

use crate::model::{
    cost_gap, validate_flow_tol, CostParams, DemandConfig, Exit, ExitCosts, FlowViolation,
    FlowVector, ModelError, OccupancyOffsets,
};
use crate::par::map_indexed;

/// Feasibility tolerance for observed flows (looser than the model's: field
/// data are rounded).
pub const OBSERVATION_TOL: f64 = 1e-6;

/// Search box for `ct` and `cc`.
pub const CT_CC_BOUNDS: (f64, f64) = (1.0, 100.0);
/// Search box for `gamma`.
pub const GAMMA_BOUNDS: (f64, f64) = (1.0, 20.0);

#[derive(Clone, Copy, Debug, Error, PartialEq)]
pub enum ObservationRejection {
    #[error(transparent)]
    Demand(#[from] ModelError),
    #[error(transparent)]
    Flow(#[from] FlowViolation),
}

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("observation set is empty")]
    Empty,
    #[error("observation {index}: {source}")]
    BadObservation {
        index: usize,
        #[source]
        source: ObservationRejection,
    },
    #[error("csv header must be f1,x1s,x1b,x2s,x2b with optional trailing d")]
    Header,
    #[error("csv row {row}, column {col}: expected a number")]
    BadField { row: usize, col: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("calibration options out of range: {0}")]
    BadOptions(&'static str),
}

/// One observed demand split and the flows it produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    demand: DemandConfig,
    flow: FlowVector,
}

impl Observation {
    /// Observation with `f2 = 1 - f1`; the flow must be feasible for the
    /// demand within [`OBSERVATION_TOL`].
    pub fn new(f1: f64, flow: FlowVector) -> Result<Self, ObservationRejection> {
        let demand = DemandConfig::from_f1(f1)?;
        validate_flow_tol(&flow, &demand, &OccupancyOffsets::ZERO, OBSERVATION_TOL)?;
        Ok(Observation { demand, flow })
    }

    /// Attaches the absolute total demand the fractions refer to.
    pub fn with_total(mut self, d: f64) -> Result<Self, ObservationRejection> {
        self.demand = self.demand.with_total(d)?;
        Ok(self)
    }

    pub fn demand(&self) -> &DemandConfig {
        &self.demand
    }

    pub fn flow(&self) -> &FlowVector {
        &self.flow
    }
}

/// Non-empty list of observations.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet(Vec<Observation>);

impl ObservationSet {
    pub fn new(obs: Vec<Observation>) -> Result<Self, CalibError> {
        if obs.is_empty() {
            return Err(CalibError::Empty);
        }
        Ok(ObservationSet(obs))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Observation> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Observation] {
        &self.0
    }

    /// Reads `f1,x1s,x1b,x2s,x2b[,d]` rows.
    pub fn read_csv(reader: impl Read) -> Result<Self, CalibError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["f1", "x1s", "x1b", "x2s", "x2b"];
        let with_d = match headers.len() {
            5 => false,
            6 if headers.get(5) == Some("d") => true,
            _ => return Err(CalibError::Header),
        };
        if expected
            .iter()
            .enumerate()
            .any(|(i, want)| headers.get(i) != Some(want))
        {
            return Err(CalibError::Header);
        }

        let mut out = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            let field = |col: usize| -> Result<f64, CalibError> {
                record
                    .get(col)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or(CalibError::BadField { row: r + 1, col })
            };
            let flow = FlowVector::new(field(1)?, field(2)?, field(3)?, field(4)?);
            let mut ob = Observation::new(field(0)?, flow)
                .map_err(|source| CalibError::BadObservation { index: r, source })?;
            if with_d {
                ob = ob
                    .with_total(field(5)?)
                    .map_err(|source| CalibError::BadObservation { index: r, source })?;
            }
            out.push(ob);
        }
        ObservationSet::new(out)
    }

    /// Writes the CSV form; the `d` column appears when every observation
    /// carries a total.
    pub fn write_csv(&self, mut w: impl Write) -> Result<(), CalibError> {
        let with_d = self.0.iter().all(|o| o.demand.total().is_some());
        if with_d {
            writeln!(w, "f1,x1s,x1b,x2s,x2b,d")?;
        } else {
            writeln!(w, "f1,x1s,x1b,x2s,x2b")?;
        }
        for o in &self.0 {
            let x = o.flow;
            write!(
                w,
                "{:.9},{:.9},{:.9},{:.9},{:.9}",
                o.demand.f1(),
                x.x1s,
                x.x1b,
                x.x2s,
                x.x2b
            )?;
            if with_d {
                write!(w, ",{:.9}", o.demand.total().unwrap())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Complementarity products of an observation set under a parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct ViolationStats {
    /// Products exceeding `+eps`.
    pub count: usize,
    /// Sum of the positive parts of all products.
    pub hinge: f64,
    /// `xs_i * gap_i` and `-xb_i * gap_i` per observation, ordered
    /// `[exit-1 steadfast, exit-1 bypass, exit-2 steadfast, exit-2 bypass]`.
    pub per_constraint: Vec<f64>,
}

/// Evaluates the equilibrium inequalities of every observation at `costs`.
pub fn violation_count(costs: &CostParams, obs: &ObservationSet, eps: f64) -> ViolationStats {
    let zero = OccupancyOffsets::ZERO;
    let mut per_constraint = Vec::with_capacity(obs.len() * 4);
    let mut count = 0;
    let mut hinge = 0.0;
    for ob in obs.iter() {
        for exit in Exit::BOTH {
            let gap = cost_gap(exit, &ob.flow, costs, &zero);
            for slack in [ob.flow.steadfast(exit) * gap, -ob.flow.bypass(exit) * gap] {
                if slack > eps {
                    count += 1;
                }
                if slack > 0.0 {
                    hinge += slack;
                }
                per_constraint.push(slack);
            }
        }
    }
    ViolationStats {
        count,
        hinge,
        per_constraint,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CalibOptions {
    /// Violation margin: a product counts as violated above `+eps`.
    pub eps: f64,
    /// Big-M constant of the exported program.
    pub big_m: f64,
    /// Tie both exits to one parameter set.
    pub symmetric: bool,
    /// Multi-start count (low-discrepancy starts plus the canonical set).
    pub starts: usize,
    /// Pattern-search probe sweeps per start.
    pub iters: usize,
    /// Offset into the low-discrepancy start sequence; fixes the run
    /// bit-for-bit.
    pub seed: u64,
}

impl Default for CalibOptions {
    fn default() -> Self {
        CalibOptions {
            eps: 1e-6,
            big_m: 1e6,
            symmetric: false,
            starts: 64,
            iters: 500,
            seed: 0,
        }
    }
}

impl CalibOptions {
    fn validate(&self) -> Result<(), CalibError> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(CalibError::BadOptions("eps must be positive and finite"));
        }
        if !(self.big_m.is_finite() && self.big_m > 0.0) {
            return Err(CalibError::BadOptions("big_m must be positive and finite"));
        }
        if self.starts == 0 || self.iters == 0 {
            return Err(CalibError::BadOptions("starts and iters must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CalibrationResult {
    pub costs: CostParams,
    pub violations: usize,
    pub hinge: f64,
    /// Products at the fitted parameters, ordered as in [`ViolationStats`].
    pub per_constraint: Vec<f64>,
}

/// Coordinate box of the search: 3 dims when symmetric, else 6
/// (`[ct1, cc1, gamma1, ct2, cc2, gamma2]`).
struct SearchSpace {
    symmetric: bool,
}

impl SearchSpace {
    fn dims(&self) -> usize {
        if self.symmetric {
            3
        } else {
            6
        }
    }

    fn bounds(&self, dim: usize) -> (f64, f64) {
        if dim % 3 == 2 {
            GAMMA_BOUNDS
        } else {
            CT_CC_BOUNDS
        }
    }

    fn clamp_coord(&self, dim: usize, v: f64) -> f64 {
        let (lo, hi) = self.bounds(dim);
        v.clamp(lo, hi)
    }

    fn to_costs(&self, v: &[f64]) -> CostParams {
        let exit1 = ExitCosts::new(v[0], v[1], v[2]);
        let exit2 = if self.symmetric {
            exit1
        } else {
            ExitCosts::new(v[3], v[4], v[5])
        };
        CostParams { exit1, exit2 }
    }
}

/// Radical-inverse low-discrepancy sequence.
fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

fn lex_lt(a: (usize, f64), b: (usize, f64)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Compass pattern search on the clamped box, accepting the best probe that
/// lexicographically improves `(count, hinge)`; the step halves when no
/// probe does, from 1.0 down to 1e-4.
fn pattern_search(
    space: &SearchSpace,
    mut point: Vec<f64>,
    iters: usize,
    score: &impl Fn(&[f64]) -> (usize, f64),
) -> (Vec<f64>, (usize, f64)) {
    for dim in 0..space.dims() {
        point[dim] = space.clamp_coord(dim, point[dim]);
    }
    let mut best = score(&point);
    let mut step = 1.0;
    for _ in 0..iters {
        if step < 1e-4 {
            break;
        }
        let mut chosen: Option<(usize, f64, (usize, f64))> = None;
        for dim in 0..space.dims() {
            for dir in [1.0, -1.0] {
                let old = point[dim];
                let cand = space.clamp_coord(dim, old + dir * step);
                if cand == old {
                    continue;
                }
                point[dim] = cand;
                let s = score(&point);
                point[dim] = old;
                if lex_lt(s, best) && chosen.map_or(true, |(.., sc)| lex_lt(s, sc)) {
                    chosen = Some((dim, cand, s));
                }
            }
        }
        match chosen {
            Some((dim, val, s)) => {
                point[dim] = val;
                best = s;
            }
            None => step *= 0.5,
        }
    }
    (point, best)
}

/// Fits cost parameters to the observations by minimizing
/// `(violations, hinge)` lexicographically.
///
/// Starts from the canonical calibrated set plus `starts - 1` Halton points
/// of the box; ties across starts resolve to the coordinatewise smallest
/// parameters, so a fixed seed reproduces the result exactly.
pub fn calibrate(obs: &ObservationSet, opts: &CalibOptions) -> Result<CalibrationResult, CalibError> {
    opts.validate()?;
    let space = SearchSpace {
        symmetric: opts.symmetric,
    };
    let d = space.dims();
    let score = |v: &[f64]| {
        let stats = violation_count(&space.to_costs(v), obs, opts.eps);
        (stats.count, stats.hinge)
    };

    const BASES: [u64; 6] = [2, 3, 5, 7, 11, 13];
    let canonical = CostParams::calibrated();
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(opts.starts);
    starts.push(if opts.symmetric {
        vec![canonical.exit1.ct, canonical.exit1.cc, canonical.exit1.gamma]
    } else {
        vec![
            canonical.exit1.ct,
            canonical.exit1.cc,
            canonical.exit1.gamma,
            canonical.exit2.ct,
            canonical.exit2.cc,
            canonical.exit2.gamma,
        ]
    });
    for i in 1..opts.starts {
        let mut v = Vec::with_capacity(d);
        for dim in 0..d {
            let (lo, hi) = space.bounds(dim);
            v.push(lo + halton(opts.seed + i as u64, BASES[dim]) * (hi - lo));
        }
        starts.push(v);
    }

    let fitted = map_indexed(starts.len(), |i| {
        pattern_search(&space, starts[i].clone(), opts.iters, &score)
    });
    let mut winner = &fitted[0];
    for candidate in &fitted[1..] {
        let better = lex_lt(candidate.1, winner.1)
            || (candidate.1 == winner.1
                && candidate
                    .0
                    .iter()
                    .zip(&winner.0)
                    .find_map(|(a, b)| match a.total_cmp(b) {
                        std::cmp::Ordering::Equal => None,
                        ord => Some(ord == std::cmp::Ordering::Less),
                    })
                    .unwrap_or(false));
        if better {
            winner = candidate;
        }
    }

    let costs = space.to_costs(&winner.0);
    let stats = violation_count(&costs, obs, opts.eps);
    Ok(CalibrationResult {
        costs,
        violations: stats.count,
        hinge: stats.hinge,
        per_constraint: stats.per_constraint,
    })
}

fn f9(x: f64) -> String {
    format!("{x:.9}")
}

/// Appends `coef * var` to an LP expression, skipping zero coefficients.
fn push_term(line: &mut String, coef: f64, var: &str) {
    if coef == 0.0 {
        return;
    }
    if line.is_empty() {
        if coef < 0.0 {
            line.push_str("- ");
        }
    } else if coef < 0.0 {
        line.push_str(" - ");
    } else {
        line.push_str(" + ");
    }
    line.push_str(&f9(coef.abs()));
    line.push(' ');
    line.push_str(var);
}

/// Linear coefficients of exit `i`'s cost gap at an observed flow, over the
/// variables `[ct1, cc1, ct2, cc2, D1, D2]` (`D_i` standing for
/// `gamma_i * ct_j`).
fn gap_coefficients(flow: &FlowVector, exit: Exit) -> [f64; 6] {
    let mut c = [0.0; 6];
    match exit {
        Exit::One => {
            let lane = flow.x1s + flow.x2b;
            c[0] += lane; // ct1
            c[1] += flow.x1b * lane; // cc1
            c[2] -= flow.x2s; // ct2
            c[4] -= flow.x1b; // D1
            c[3] -= flow.x2b * (flow.x2s + flow.x1b); // cc2
        }
        Exit::Two => {
            let lane = flow.x2s + flow.x1b;
            c[2] += lane;
            c[3] += flow.x2b * lane;
            c[0] -= flow.x1s;
            c[5] -= flow.x2b; // D2
            c[1] -= flow.x1b * (flow.x1s + flow.x2b);
        }
    }
    c
}

const MILP_VARS: [&str; 6] = ["ct1", "cc1", "ct2", "cc2", "D1", "D2"];

/// Writes the violation-minimization program in LP text format.
///
/// Per observation `k` and exit `i` there are binaries `z_s_<k>_<i>`,
/// `z_b_<k>_<i>` (1 iff the product exceeds `+eps`) and four big-M rows
/// enforcing that meaning; the objective is the binary sum. A header note
/// records how to recover `gamma_i = D_i / ct_j` after solving.
pub fn export_milp(
    obs: &ObservationSet,
    opts: &CalibOptions,
    mut out: impl Write,
) -> Result<(), CalibError> {
    opts.validate()?;
    let m = opts.big_m;
    let eps = opts.eps;

    writeln!(out, "\\ equilibrium-inequality violation minimization")?;
    writeln!(out, "\\ observations: {}", obs.len())?;
    writeln!(out, "\\ eps = {}  big-M = {}", f9(eps), f9(m))?;
    writeln!(
        out,
        "\\ D1 stands for gamma1*ct2 and D2 for gamma2*ct1; after solving,"
    )?;
    writeln!(out, "\\ recover gamma1 = D1/ct2 and gamma2 = D2/ct1")?;
    writeln!(
        out,
        "\\ z_s_<k>_<i> (z_b_<k>_<i>) = 1 iff observation k violates the"
    )?;
    writeln!(out, "\\ steadfast (bypass) inequality of exit i")?;

    let binaries: Vec<String> = (1..=obs.len())
        .flat_map(|k| {
            [
                format!("z_s_{k}_1"),
                format!("z_b_{k}_1"),
                format!("z_s_{k}_2"),
                format!("z_b_{k}_2"),
            ]
        })
        .collect();

    writeln!(out, "Minimize")?;
    write!(out, " obj:")?;
    for (n, z) in binaries.iter().enumerate() {
        if n > 0 && n % 8 == 0 {
            writeln!(out)?;
            write!(out, "     ")?;
        }
        write!(out, "{}{z}", if n == 0 { " " } else { " + " })?;
    }
    writeln!(out)?;

    writeln!(out, "Subject To")?;
    for (k0, ob) in obs.iter().enumerate() {
        let k = k0 + 1;
        for exit in Exit::BOTH {
            let i = exit.label();
            let coef = gap_coefficients(ob.flow(), exit);
            let xs = ob.flow().steadfast(exit);
            let xb = ob.flow().bypass(exit);
            let z_s = format!("z_s_{k}_{i}");
            let z_b = format!("z_b_{k}_{i}");

            // z = 0 admits product <= eps; z = 1 demands product >= eps.
            let mut row = String::new();
            for (v, c) in MILP_VARS.iter().zip(coef) {
                push_term(&mut row, xs * c, v);
            }
            push_term(&mut row, -m, &z_s);
            writeln!(out, " s_up_{k}_{i}: {row} <= {}", f9(eps))?;

            let mut row = String::new();
            for (v, c) in MILP_VARS.iter().zip(coef) {
                push_term(&mut row, -xs * c, v);
            }
            push_term(&mut row, m, &z_s);
            writeln!(out, " s_lo_{k}_{i}: {row} <= {}", f9(m - eps))?;

            let mut row = String::new();
            for (v, c) in MILP_VARS.iter().zip(coef) {
                push_term(&mut row, -xb * c, v);
            }
            push_term(&mut row, -m, &z_b);
            writeln!(out, " b_up_{k}_{i}: {row} <= {}", f9(eps))?;

            let mut row = String::new();
            for (v, c) in MILP_VARS.iter().zip(coef) {
                push_term(&mut row, xb * c, v);
            }
            push_term(&mut row, m, &z_b);
            writeln!(out, " b_lo_{k}_{i}: {row} <= {}", f9(m - eps))?;
        }
    }
    // gamma_i >= 1 in substituted form.
    writeln!(out, " gamma_lb_1: D1 - ct2 >= 0")?;
    writeln!(out, " gamma_lb_2: D2 - ct1 >= 0")?;
    if opts.symmetric {
        writeln!(out, " sym_ct: ct1 - ct2 = 0")?;
        writeln!(out, " sym_cc: cc1 - cc2 = 0")?;
        writeln!(out, " sym_d: D1 - D2 = 0")?;
    }

    writeln!(out, "Bounds")?;
    for v in MILP_VARS {
        writeln!(out, " {v} >= 1")?;
    }

    writeln!(out, "Binaries")?;
    for chunk in binaries.chunks(8) {
        writeln!(out, " {}", chunk.join(" "))?;
    }
    writeln!(out, "End")?;
    Ok(())
}
