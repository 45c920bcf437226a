//! Flows, cost parameters and congestion costs at the diverge.
//!
//! Demand splits into four streams: for each exit `i` a steadfast flow
//! `x_i_s` (stays in its own lane) and a bypass flow `x_i_b` (rides the other
//! exit's lane and merges late). Costs are quadratic in lane occupancies.
//! Occupancy offsets model externally commanded vehicles that load the lanes
//! but are not part of the decision-making flow.

use thiserror::Error;

/// One of the two exits at the diverge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Exit {
    One,
    Two,
}

impl Exit {
    pub const BOTH: [Exit; 2] = [Exit::One, Exit::Two];

    /// The opposite exit.
    pub fn other(self) -> Exit {
        match self {
            Exit::One => Exit::Two,
            Exit::Two => Exit::One,
        }
    }

    /// Zero-based index, for packing per-exit data into `[T; 2]`.
    pub fn index(self) -> usize {
        match self {
            Exit::One => 0,
            Exit::Two => 1,
        }
    }

    /// One-based label as used in file formats (`1` or `2`).
    pub fn label(self) -> u8 {
        self.index() as u8 + 1
    }
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "exit {}", self.label())
    }
}

#[derive(Clone, Copy, Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("demand fractions must be nonnegative and sum to 1 (f1={f1}, f2={f2})")]
    Demand { f1: f64, f2: f64 },
    #[error("total demand must be positive and finite (got {0})")]
    TotalDemand(f64),
    #[error("{exit} costs out of range (ct={ct}, cc={cc}, gamma={gamma}): need finite ct>0, cc>0, gamma>=1")]
    Costs { exit: Exit, ct: f64, cc: f64, gamma: f64 },
    #[error("occupancy offsets must be nonnegative and finite (os1={os1}, ob1={ob1}, os2={os2}, ob2={ob2})")]
    Offsets { os1: f64, ob1: f64, os2: f64, ob2: f64 },
}

/// Tolerance for flow conservation and nonnegativity checks.
pub const FLOW_TOL: f64 = 1e-9;

const DEMAND_SUM_TOL: f64 = 1e-9;

/// Demand split between the two exits, as fractions of a unit total.
///
/// The optional absolute total `d` (vehicles per hour) is carried as
/// metadata; all model arithmetic is on the fractions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DemandConfig {
    f1: f64,
    f2: f64,
    d: Option<f64>,
}

impl DemandConfig {
    /// Validates `f1, f2 >= 0` and `f1 + f2 = 1` within `1e-9`.
    pub fn new(f1: f64, f2: f64) -> Result<Self, ModelError> {
        let ok = f1 >= 0.0 && f2 >= 0.0 && (f1 + f2 - 1.0).abs() <= DEMAND_SUM_TOL;
        if !ok {
            return Err(ModelError::Demand { f1, f2 });
        }
        Ok(DemandConfig { f1, f2, d: None })
    }

    /// Demand split with `f2 = 1 - f1`.
    pub fn from_f1(f1: f64) -> Result<Self, ModelError> {
        Self::new(f1, 1.0 - f1)
    }

    /// Attaches an absolute total demand (must be positive and finite).
    pub fn with_total(mut self, d: f64) -> Result<Self, ModelError> {
        if !(d.is_finite() && d > 0.0) {
            return Err(ModelError::TotalDemand(d));
        }
        self.d = Some(d);
        Ok(self)
    }

    pub fn f1(&self) -> f64 {
        self.f1
    }

    pub fn f2(&self) -> f64 {
        self.f2
    }

    pub fn total(&self) -> Option<f64> {
        self.d
    }

    /// Demand fraction bound for `exit`.
    pub fn fraction(&self, exit: Exit) -> f64 {
        match exit {
            Exit::One => self.f1,
            Exit::Two => self.f2,
        }
    }
}

/// Congestion cost coefficients for one exit's vehicles.
///
/// `ct` prices lane occupancy, `cc` prices the crossing conflict with the
/// opposite bypass stream, and `gamma >= 1` is the extra lane load a
/// bypasser of this exit exerts while merging late.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExitCosts {
    pub ct: f64,
    pub cc: f64,
    pub gamma: f64,
}

impl ExitCosts {
    pub fn new(ct: f64, cc: f64, gamma: f64) -> ExitCosts {
        ExitCosts { ct, cc, gamma }
    }

    fn is_valid(&self) -> bool {
        self.ct.is_finite()
            && self.cc.is_finite()
            && self.gamma.is_finite()
            && self.ct > 0.0
            && self.cc > 0.0
            && self.gamma >= 1.0
    }
}

/// Cost coefficients for both exits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostParams {
    pub exit1: ExitCosts,
    pub exit2: ExitCosts,
}

impl CostParams {
    pub fn new(exit1: ExitCosts, exit2: ExitCosts) -> Result<Self, ModelError> {
        let params = CostParams { exit1, exit2 };
        params.validate()?;
        Ok(params)
    }

    /// Same coefficients on both exits.
    pub fn symmetric(costs: ExitCosts) -> Result<Self, ModelError> {
        Self::new(costs, costs)
    }

    /// The canonical parameter set fitted to observed diverge data:
    /// `ct = cc = 1`, `gamma = 2.7` on both exits.
    pub fn calibrated() -> Self {
        CostParams::symmetric(ExitCosts::new(1.0, 1.0, 2.7)).expect("canonical set is valid")
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for exit in Exit::BOTH {
            let c = self.exit(exit);
            if !c.is_valid() {
                return Err(ModelError::Costs {
                    exit,
                    ct: c.ct,
                    cc: c.cc,
                    gamma: c.gamma,
                });
            }
        }
        Ok(())
    }

    pub fn exit(&self, exit: Exit) -> &ExitCosts {
        match exit {
            Exit::One => &self.exit1,
            Exit::Two => &self.exit2,
        }
    }

    /// Largest coefficient across both exits; scales residual thresholds.
    pub fn max_component(&self) -> f64 {
        let mut m = f64::NEG_INFINITY;
        for exit in Exit::BOTH {
            let c = self.exit(exit);
            m = m.max(c.ct).max(c.cc).max(c.gamma);
        }
        m
    }
}

/// The four decision flows: steadfast and bypass per exit.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FlowVector {
    pub x1s: f64,
    pub x1b: f64,
    pub x2s: f64,
    pub x2b: f64,
}

impl FlowVector {
    pub const ZERO: FlowVector = FlowVector {
        x1s: 0.0,
        x1b: 0.0,
        x2s: 0.0,
        x2b: 0.0,
    };

    pub fn new(x1s: f64, x1b: f64, x2s: f64, x2b: f64) -> FlowVector {
        FlowVector { x1s, x1b, x2s, x2b }
    }

    pub fn steadfast(&self, exit: Exit) -> f64 {
        match exit {
            Exit::One => self.x1s,
            Exit::Two => self.x2s,
        }
    }

    pub fn bypass(&self, exit: Exit) -> f64 {
        match exit {
            Exit::One => self.x1b,
            Exit::Two => self.x2b,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x1s, self.x1b, self.x2s, self.x2b]
    }
}

/// Externally commanded lane occupancies, added on top of the decision flows.
///
/// `os_i` loads exit `i`'s steadfast stream, `ob_i` its bypass stream. The
/// commanded vehicles consume demand: the decision flows of exit `i` must sum
/// to the residual `f_i - os_i - ob_i`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OccupancyOffsets {
    pub os1: f64,
    pub ob1: f64,
    pub os2: f64,
    pub ob2: f64,
}

impl OccupancyOffsets {
    pub const ZERO: OccupancyOffsets = OccupancyOffsets {
        os1: 0.0,
        ob1: 0.0,
        os2: 0.0,
        ob2: 0.0,
    };

    pub fn new(os1: f64, ob1: f64, os2: f64, ob2: f64) -> Result<Self, ModelError> {
        let o = OccupancyOffsets { os1, ob1, os2, ob2 };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = [self.os1, self.ob1, self.os2, self.ob2]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0);
        if !ok {
            return Err(ModelError::Offsets {
                os1: self.os1,
                ob1: self.ob1,
                os2: self.os2,
                ob2: self.ob2,
            });
        }
        Ok(())
    }

    pub fn steadfast(&self, exit: Exit) -> f64 {
        match exit {
            Exit::One => self.os1,
            Exit::Two => self.os2,
        }
    }

    pub fn bypass(&self, exit: Exit) -> f64 {
        match exit {
            Exit::One => self.ob1,
            Exit::Two => self.ob2,
        }
    }

    /// Demand left to the decision-making flow of `exit`.
    pub fn residual(&self, demand: &DemandConfig, exit: Exit) -> f64 {
        demand.fraction(exit) - self.steadfast(exit) - self.bypass(exit)
    }
}

/// Which feasibility constraint a flow vector broke.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowConstraint {
    SteadfastNonneg(Exit),
    BypassNonneg(Exit),
    /// `x_i_s + x_i_b` must equal the residual demand of the exit.
    Conservation(Exit),
}

#[derive(Clone, Copy, Debug, Error, PartialEq)]
#[error("flow violates {constraint:?} by {magnitude:e}")]
pub struct FlowViolation {
    pub constraint: FlowConstraint,
    pub magnitude: f64,
}

/// Checks nonnegativity and per-exit conservation against the residual
/// demand, within `tol`. Reports the first broken constraint (exit 1 first).
pub fn validate_flow_tol(
    x: &FlowVector,
    demand: &DemandConfig,
    offsets: &OccupancyOffsets,
    tol: f64,
) -> Result<(), FlowViolation> {
    for exit in Exit::BOTH {
        let xs = x.steadfast(exit);
        let xb = x.bypass(exit);
        // `!(v >= -tol)` instead of `v < -tol` so NaN components are caught.
        if !(xs >= -tol) {
            return Err(FlowViolation {
                constraint: FlowConstraint::SteadfastNonneg(exit),
                magnitude: -xs,
            });
        }
        if !(xb >= -tol) {
            return Err(FlowViolation {
                constraint: FlowConstraint::BypassNonneg(exit),
                magnitude: -xb,
            });
        }
        let gap = xs + xb - offsets.residual(demand, exit);
        if !(gap.abs() <= tol) {
            return Err(FlowViolation {
                constraint: FlowConstraint::Conservation(exit),
                magnitude: gap,
            });
        }
    }
    Ok(())
}

/// [`validate_flow_tol`] at the model tolerance [`FLOW_TOL`].
pub fn validate_flow(
    x: &FlowVector,
    demand: &DemandConfig,
    offsets: &OccupancyOffsets,
) -> Result<(), FlowViolation> {
    validate_flow_tol(x, demand, offsets, FLOW_TOL)
}

/// Occupancy of exit `e`'s streams: decision flow plus commanded offset.
fn occupancy(x: &FlowVector, offsets: &OccupancyOffsets, e: Exit) -> (f64, f64) {
    (
        x.steadfast(e) + offsets.steadfast(e),
        x.bypass(e) + offsets.bypass(e),
    )
}

/// Cost of a steadfast vehicle bound for `exit`.
///
/// It shares its lane with its own steadfast stream and the opposite exit's
/// bypassers, and pays the crossing conflict with its own bypass stream:
/// `ct_i * (Xs_i + Xb_j) + cc_i * Xb_i * (Xs_i + Xb_j)`.
pub fn steadfast_cost(
    exit: Exit,
    x: &FlowVector,
    costs: &CostParams,
    offsets: &OccupancyOffsets,
) -> f64 {
    let j = exit.other();
    let c = costs.exit(exit);
    let (xs_i, xb_i) = occupancy(x, offsets, exit);
    let (_, xb_j) = occupancy(x, offsets, j);
    let lane_load = xs_i + xb_j;
    c.ct * lane_load + c.cc * xb_i * lane_load
}

/// Cost of a bypassing vehicle bound for `exit`.
///
/// It rides the opposite lane, weighted `gamma_i` for the late merge, and
/// pays that lane's crossing conflict:
/// `ct_j * (Xs_j + gamma_i * Xb_i) + cc_j * Xb_j * (Xs_j + Xb_i)`.
pub fn bypass_cost(
    exit: Exit,
    x: &FlowVector,
    costs: &CostParams,
    offsets: &OccupancyOffsets,
) -> f64 {
    let j = exit.other();
    let cj = costs.exit(j);
    let gamma = costs.exit(exit).gamma;
    let (xs_j, xb_j) = occupancy(x, offsets, j);
    let (_, xb_i) = occupancy(x, offsets, exit);
    cj.ct * (xs_j + gamma * xb_i) + cj.cc * xb_j * (xs_j + xb_i)
}

/// `steadfast_cost - bypass_cost` for `exit`; negative means staying is
/// cheaper.
pub fn cost_gap(exit: Exit, x: &FlowVector, costs: &CostParams, offsets: &OccupancyOffsets) -> f64 {
    steadfast_cost(exit, x, costs, offsets) - bypass_cost(exit, x, costs, offsets)
}

/// Which equilibrium-uniqueness conditions the cost parameters satisfy.
///
/// Both conditions non-strict, checked exactly (ties count as satisfied):
/// `ct_i >= cc_i` and `(gamma_i - 1) * ct_j >= cc_i` for each exit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UniquenessReport {
    /// `ct_i >= cc_i`, indexed by `Exit::index()`.
    pub ct_ge_cc: [bool; 2],
    /// `(gamma_i - 1) * ct_j >= cc_i`, indexed by `Exit::index()`.
    pub gamma_dominates: [bool; 2],
    pub all_hold: bool,
}

impl UniquenessReport {
    pub fn ct_ge_cc(&self, exit: Exit) -> bool {
        self.ct_ge_cc[exit.index()]
    }

    pub fn gamma_dominates(&self, exit: Exit) -> bool {
        self.gamma_dominates[exit.index()]
    }
}

pub fn check_uniqueness_conditions(costs: &CostParams) -> UniquenessReport {
    let mut ct_ge_cc = [false; 2];
    let mut gamma_dominates = [false; 2];
    for exit in Exit::BOTH {
        let c = costs.exit(exit);
        let cj = costs.exit(exit.other());
        ct_ge_cc[exit.index()] = c.ct >= c.cc;
        gamma_dominates[exit.index()] = (c.gamma - 1.0) * cj.ct >= c.cc;
    }
    UniquenessReport {
        ct_ge_cc,
        gamma_dominates,
        all_hold: ct_ge_cc[0] && ct_ge_cc[1] && gamma_dominates[0] && gamma_dominates[1],
    }
}
