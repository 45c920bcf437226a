//! System cost of a flow pattern and its minimization.
//!
//! The social cost weighs every stream's travel cost by its occupancy
//! (commanded offsets included), so selfish equilibria can be compared
//! against the best coordinated split of the same demand.

use crate::model::{
    bypass_cost, steadfast_cost, CostParams, DemandConfig, Exit, FlowConstraint, FlowViolation,
    FlowVector, OccupancyOffsets, FLOW_TOL,
};
use crate::numeric::{golden_min, grid_axis};
use crate::par::map_indexed;
use crate::solver::{solve_equilibrium, SolverError, SolverOptions, ORACLE_MAX_STEP};

/// Default scan step for [`minimize_social_cost`].
pub const DEFAULT_SOCIAL_GRID: f64 = 1e-3;

/// Total travel cost `sum_i (Xs_i * J_i_s + Xb_i * J_i_b)` with
/// offset-augmented occupancies. Rejects flows with negative components.
pub fn social_cost(
    x: &FlowVector,
    costs: &CostParams,
    offsets: &OccupancyOffsets,
) -> Result<f64, FlowViolation> {
    for exit in Exit::BOTH {
        if !(x.steadfast(exit) >= -FLOW_TOL) {
            return Err(FlowViolation {
                constraint: FlowConstraint::SteadfastNonneg(exit),
                magnitude: -x.steadfast(exit),
            });
        }
        if !(x.bypass(exit) >= -FLOW_TOL) {
            return Err(FlowViolation {
                constraint: FlowConstraint::BypassNonneg(exit),
                magnitude: -x.bypass(exit),
            });
        }
    }
    Ok(social_cost_unchecked(x, costs, offsets))
}

pub(crate) fn social_cost_unchecked(
    x: &FlowVector,
    costs: &CostParams,
    offsets: &OccupancyOffsets,
) -> f64 {
    let mut total = 0.0;
    for exit in Exit::BOTH {
        let occ_s = x.steadfast(exit) + offsets.steadfast(exit);
        let occ_b = x.bypass(exit) + offsets.bypass(exit);
        total += occ_s * steadfast_cost(exit, x, costs, offsets)
            + occ_b * bypass_cost(exit, x, costs, offsets);
    }
    total
}

#[derive(Clone, Copy, Debug)]
pub struct SocialResult {
    /// Cost-minimizing feasible flow.
    pub flow: FlowVector,
    pub cost: f64,
    /// Social cost of the selfish equilibrium of the same demand.
    pub equilibrium_cost: f64,
    /// `equilibrium_cost / cost` (>= 1 up to solver tolerance).
    pub ratio: f64,
}

/// Minimizes the social cost over feasible splits of `demand` (no offsets).
///
/// A grid scan at step `grid` seeds coordinate descent with golden-section
/// line searches; the equilibrium and all-steadfast points are seeded too,
/// so the result never loses to either.
pub fn minimize_social_cost(
    demand: &DemandConfig,
    costs: &CostParams,
    grid: f64,
    opts: &SolverOptions,
) -> Result<SocialResult, SolverError> {
    costs.validate()?;
    if !(grid.is_finite() && grid > 0.0 && grid <= ORACLE_MAX_STEP) {
        return Err(SolverError::BadGridStep { step: grid });
    }
    let f1 = demand.f1();
    let f2 = demand.f2();
    let zero = OccupancyOffsets::ZERO;
    let obj = |x1: f64, x2: f64| {
        let flow = FlowVector::new(x1, f1 - x1, x2, f2 - x2);
        social_cost_unchecked(&flow, costs, &zero)
    };

    // Row-parallel scan; each row reports its best column, rows reduce in
    // order with strict comparisons, so ties resolve row-major.
    let x1v = grid_axis(f1, grid);
    let x2v = grid_axis(f2, grid);
    let row_best = map_indexed(x1v.len(), |i| {
        let x1 = x1v[i];
        let mut best = (f64::INFINITY, 0.0);
        for &x2 in &x2v {
            let c = obj(x1, x2);
            if c < best.0 {
                best = (c, x2);
            }
        }
        best
    });
    let mut grid_seed = (x1v[0], row_best[0].1);
    let mut grid_cost = row_best[0].0;
    for (i, &(c, x2)) in row_best.iter().enumerate().skip(1) {
        if c < grid_cost {
            grid_cost = c;
            grid_seed = (x1v[i], x2);
        }
    }

    let eq = solve_equilibrium(demand, costs, &zero, opts)?;
    let equilibrium_cost = social_cost_unchecked(&eq.flow, costs, &zero);
    let seeds = [grid_seed, (eq.flow.x1s, eq.flow.x2s), (f1, f2)];

    let mut best: Option<(f64, f64, f64)> = None;
    for (s1, s2) in seeds {
        let refined = descend(s1, s2, f1, f2, &obj);
        if best.map_or(true, |(.., c)| refined.2 < c) {
            best = Some(refined);
        }
    }
    let (x1, x2, cost) = best.expect("at least one seed");
    Ok(SocialResult {
        flow: FlowVector::new(x1, f1 - x1, x2, f2 - x2),
        cost,
        equilibrium_cost,
        ratio: equilibrium_cost / cost,
    })
}

/// Coordinate descent with golden-section line searches (interval 1e-10);
/// accepts only strict improvements, so the seed value is a guarantee.
fn descend(
    mut x1: f64,
    mut x2: f64,
    f1: f64,
    f2: f64,
    obj: &impl Fn(f64, f64) -> f64,
) -> (f64, f64, f64) {
    const LINE_TOL: f64 = 1e-10;
    let mut cost = obj(x1, x2);
    for _ in 0..100 {
        let before = cost;
        let (c1, v1) = golden_min(0.0, f1, LINE_TOL, |t| obj(t, x2));
        if v1 < cost {
            x1 = c1;
            cost = v1;
        }
        let (c2, v2) = golden_min(0.0, f2, LINE_TOL, |t| obj(x1, t));
        if v2 < cost {
            x2 = c2;
            cost = v2;
        }
        if before - cost < 1e-14 {
            break;
        }
    }
    (x1, x2, cost)
}
