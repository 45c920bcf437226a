//! Wardrop equilibrium computation.
//!
//! Exit `i`'s steadfast share is a best response to the other exit's: the
//! cost gap (staying minus bypassing) is monotone increasing in the own
//! steadfast share whenever `ct_i >= cc_i`, so the response is the gap's
//! clamped root. Alternating the two responses from the all-steadfast point
//! contracts to the equilibrium when the uniqueness conditions hold.
//!
//! [`grid_oracle`] is the independent cross-check: an exhaustive scan of the
//! steadfast-share rectangle that keeps near-complementary cells, merges
//! them into clusters and polishes one representative per cluster.

use std::collections::HashMap;

use thiserror::Error;

use crate::model::{
    bypass_cost, check_uniqueness_conditions, cost_gap, steadfast_cost, validate_flow,
    CostParams, DemandConfig, Exit, FlowViolation, FlowVector, ModelError, OccupancyOffsets,
    FLOW_TOL,
};
use crate::numeric::{bisect, grid_axis};
use crate::par::map_indexed;

/// Largest allowed grid step for [`grid_oracle`].
pub const ORACLE_MAX_STEP: f64 = 0.01;

/// Survivor threshold factor: cells with Wardrop residual up to
/// `ORACLE_KAPPA_FACTOR * max(C) * h` are kept.
pub const ORACLE_KAPPA_FACTOR: f64 = 10.0;

/// A converged alternation additionally certifies its point to this Wardrop
/// residual.
pub const CONVERGED_RESIDUAL_TOL: f64 = 1e-8;

/// Residual certification threshold for grid-oracle fallback points.
pub const FALLBACK_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    /// Stop the alternation when successive iterates move less than this.
    pub tol: f64,
    pub max_iters: u32,
    /// Bracket width at which the best-response bisection stops.
    pub bisect_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iters: 10_000,
            bisect_tol: 1e-12,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<(), SolverError> {
        let ok = self.tol.is_finite()
            && self.tol > 0.0
            && self.bisect_tol.is_finite()
            && self.bisect_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SolverError::BadOptions {
                tol: self.tol,
                bisect_tol: self.bisect_tol,
            })
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("infeasible flow: {0}")]
    Flow(#[from] FlowViolation),
    #[error("opposite steadfast share {value} outside [0, {max}]")]
    SteadfastOutOfRange { value: f64, max: f64 },
    #[error("offsets leave negative residual demand on {exit}: {residual}")]
    NegativeResidual { exit: Exit, residual: f64 },
    #[error("solver tolerances must be positive and finite (tol={tol}, bisect_tol={bisect_tol})")]
    BadOptions { tol: f64, bisect_tol: f64 },
    #[error("grid step {step} outside (0, {ORACLE_MAX_STEP}]")]
    BadGridStep { step: f64 },
    #[error(
        "grid certificate is empty although the uniqueness conditions hold; \
         the survivor threshold is misconfigured for this instance"
    )]
    EmptyCertificateCertified,
    #[error(
        "grid certificate is empty and the uniqueness conditions fail; \
         equilibria (if any) sit below the survivor threshold near the boundary"
    )]
    EmptyCertificateUncertified,
}

/// Residual decision demand per exit, after commanded offsets.
fn residuals(
    demand: &DemandConfig,
    offsets: &OccupancyOffsets,
) -> Result<[f64; 2], SolverError> {
    let mut out = [0.0; 2];
    for exit in Exit::BOTH {
        let r = offsets.residual(demand, exit);
        if r < -FLOW_TOL {
            return Err(SolverError::NegativeResidual { exit, residual: r });
        }
        out[exit.index()] = r.max(0.0);
    }
    Ok(out)
}

/// Decision flows when exit `One` keeps `x1` steadfast and exit `Two` keeps
/// `x2`, given residual demands.
fn flow_from_shares(x1: f64, x2: f64, res: &[f64; 2]) -> FlowVector {
    FlowVector::new(x1, res[0] - x1, x2, res[1] - x2)
}

#[derive(Clone, Copy, Debug)]
pub struct BestResponse {
    /// Optimal steadfast share in `[0, residual_i]`.
    pub xs: f64,
    /// True when `ct_i >= cc_i`, which guarantees the cost gap is monotone
    /// and the response unique. Otherwise the returned root is still a valid
    /// indifference point but uniqueness is not certified.
    pub certified: bool,
}

/// Steadfast share of `exit` that equalizes staying and bypassing (clamped
/// to the feasible interval), holding the other exit's share at `xjs`.
pub fn best_response(
    exit: Exit,
    xjs: f64,
    demand: &DemandConfig,
    costs: &CostParams,
    offsets: &OccupancyOffsets,
    opts: &SolverOptions,
) -> Result<BestResponse, SolverError> {
    costs.validate()?;
    offsets.validate()?;
    opts.validate()?;
    let res = residuals(demand, offsets)?;
    let res_i = res[exit.index()];
    let res_j = res[exit.other().index()];
    if !(0.0..=res_j).contains(&xjs) {
        return Err(SolverError::SteadfastOutOfRange {
            value: xjs,
            max: res_j,
        });
    }

    let report = check_uniqueness_conditions(costs);
    let certified = report.ct_ge_cc(exit);
    let gap = |x: f64| {
        let flow = match exit {
            Exit::One => flow_from_shares(x, xjs, &res),
            Exit::Two => flow_from_shares(xjs, x, &res),
        };
        cost_gap(exit, &flow, costs, offsets)
    };

    // Staying costs at least as much as bypassing even with nobody staying:
    // everyone bypasses.
    if gap(0.0) >= 0.0 {
        return Ok(BestResponse { xs: 0.0, certified });
    }
    // Bypassing never pays even when everyone stays: full steadfast share.
    if gap(res_i) <= 0.0 {
        return Ok(BestResponse { xs: res_i, certified });
    }

    // gap(0) < 0 < gap(res_i): a root exists. With the monotone guarantee
    // the whole interval brackets it; otherwise sample the slope and, if the
    // gap wiggles, bracket the root closest to zero before bisecting.
    let (mut lo, mut hi) = (0.0, res_i);
    if !certified && !slope_samples_nonneg(&gap, res_i) {
        const SCAN: usize = 64;
        for k in 1..=SCAN {
            let t = res_i * (k as f64) / (SCAN as f64);
            if gap(t) >= 0.0 {
                lo = res_i * ((k - 1) as f64) / (SCAN as f64);
                hi = t;
                break;
            }
        }
    }
    let xs = bisect(lo, hi, opts.bisect_tol, gap);
    Ok(BestResponse { xs, certified })
}

/// Forward-difference slope probes at both endpoints and the midpoint.
fn slope_samples_nonneg(gap: &impl Fn(f64) -> f64, res_i: f64) -> bool {
    let h = (res_i * 1e-7).max(1e-12);
    if res_i <= 2.0 * h {
        return true;
    }
    [0.0, 0.5 * (res_i - h), res_i - h]
        .iter()
        .all(|&x| gap(x + h) - gap(x) >= 0.0)
}

/// Travel costs of the four streams at a flow point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamCosts {
    pub j1s: f64,
    pub j1b: f64,
    pub j2s: f64,
    pub j2b: f64,
}

impl StreamCosts {
    pub fn at(x: &FlowVector, costs: &CostParams, offsets: &OccupancyOffsets) -> StreamCosts {
        StreamCosts {
            j1s: steadfast_cost(Exit::One, x, costs, offsets),
            j1b: bypass_cost(Exit::One, x, costs, offsets),
            j2s: steadfast_cost(Exit::Two, x, costs, offsets),
            j2b: bypass_cost(Exit::Two, x, costs, offsets),
        }
    }

    pub fn steadfast(&self, exit: Exit) -> f64 {
        match exit {
            Exit::One => self.j1s,
            Exit::Two => self.j2s,
        }
    }

    pub fn bypass(&self, exit: Exit) -> f64 {
        match exit {
            Exit::One => self.j1b,
            Exit::Two => self.j2b,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EquilibriumResult {
    pub flow: FlowVector,
    pub costs: StreamCosts,
    /// Wardrop complementarity residual at `flow` (0 at an exact
    /// equilibrium).
    pub residual: f64,
    pub iterations: u32,
    /// The cost parameters satisfy the uniqueness conditions.
    pub unique_certified: bool,
    /// Successive iterates moved less than `tol` and the residual passed
    /// [`CONVERGED_RESIDUAL_TOL`].
    pub converged: bool,
}

/// Wardrop residual without feasibility checks (flows must be feasible).
fn wardrop_residual(
    x: &FlowVector,
    costs: &CostParams,
    offsets: &OccupancyOffsets,
) -> f64 {
    let mut r: f64 = 0.0;
    for exit in Exit::BOTH {
        let gap = cost_gap(exit, x, costs, offsets);
        r = r.max(x.steadfast(exit) * gap).max(-x.bypass(exit) * gap);
    }
    r
}

/// Max complementarity violation `max_i max(xs_i * gap_i, -xb_i * gap_i, 0)`
/// at a feasible flow; rejects infeasible flows.
pub fn verify_wardrop(
    x: &FlowVector,
    demand: &DemandConfig,
    costs: &CostParams,
    offsets: &OccupancyOffsets,
) -> Result<f64, SolverError> {
    costs.validate()?;
    offsets.validate()?;
    validate_flow(x, demand, offsets)?;
    Ok(wardrop_residual(x, costs, offsets))
}

/// Equilibrium of the residual demand by alternating best responses from the
/// all-steadfast point.
pub fn solve_equilibrium(
    demand: &DemandConfig,
    costs: &CostParams,
    offsets: &OccupancyOffsets,
    opts: &SolverOptions,
) -> Result<EquilibriumResult, SolverError> {
    costs.validate()?;
    offsets.validate()?;
    opts.validate()?;
    let res = residuals(demand, offsets)?;
    let report = check_uniqueness_conditions(costs);

    let mut x1 = res[0];
    let mut x2 = res[1];
    let mut iterations = 0;
    let mut moved_below_tol = false;
    for it in 1..=opts.max_iters {
        let b1 = best_response(Exit::One, x2, demand, costs, offsets, opts)?.xs;
        let b2 = best_response(Exit::Two, b1, demand, costs, offsets, opts)?.xs;
        let delta = (b1 - x1).abs().max((b2 - x2).abs());
        x1 = b1;
        x2 = b2;
        iterations = it;
        if delta < opts.tol {
            moved_below_tol = true;
            break;
        }
    }

    let flow = flow_from_shares(x1, x2, &res);
    let residual = wardrop_residual(&flow, costs, offsets);
    Ok(EquilibriumResult {
        flow,
        costs: StreamCosts::at(&flow, costs, offsets),
        residual,
        iterations,
        unique_certified: report.all_hold,
        converged: moved_below_tol && residual <= CONVERGED_RESIDUAL_TOL,
    })
}

/// One near-equilibrium cluster found by [`grid_oracle`].
#[derive(Clone, Copy, Debug)]
pub struct OracleCandidate {
    /// Cluster representative after one best-response polish pass.
    pub flow: FlowVector,
    /// Wardrop residual of the polished flow.
    pub residual: f64,
    /// Surviving grid cells merged into this cluster.
    pub cluster_size: usize,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut at = i;
        while self.0[at] != root {
            let next = self.0[at];
            self.0[at] = root;
            at = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        // Root at the row-major-smaller member so representatives are
        // order-stable.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.0[hi] = lo;
    }
}

/// Exhaustive equilibrium search on the steadfast-share rectangle.
///
/// Scans `[0, res_1] x [0, res_2]` at step `h` (at most
/// [`ORACLE_MAX_STEP`]), keeps cells whose Wardrop residual is within
/// `10 * max(C) * h`, merges survivors within three cells of each other, and
/// polishes each cluster's lowest-residual member by one best-response pass.
/// Candidates come back in row-major order of first cluster membership.
pub fn grid_oracle(
    demand: &DemandConfig,
    costs: &CostParams,
    offsets: &OccupancyOffsets,
    h: f64,
) -> Result<Vec<OracleCandidate>, SolverError> {
    costs.validate()?;
    offsets.validate()?;
    if !(h.is_finite() && h > 0.0 && h <= ORACLE_MAX_STEP) {
        return Err(SolverError::BadGridStep { step: h });
    }
    let res = residuals(demand, offsets)?;
    let report = check_uniqueness_conditions(costs);
    let x1v = grid_axis(res[0], h);
    let x2v = grid_axis(res[1], h);
    let threshold = ORACLE_KAPPA_FACTOR * costs.max_component() * h;

    // Row-parallel scan; rows concatenate in index order, so the survivor
    // list is row-major regardless of scheduling.
    let rows = map_indexed(x1v.len(), |i| {
        let x1 = x1v[i];
        let mut kept: Vec<(usize, usize, f64)> = Vec::new();
        for (j, &x2) in x2v.iter().enumerate() {
            let flow = flow_from_shares(x1, x2, &res);
            let r = wardrop_residual(&flow, costs, offsets);
            if r <= threshold {
                kept.push((i, j, r));
            }
        }
        kept
    });
    let survivors: Vec<(usize, usize, f64)> = rows.into_iter().flatten().collect();
    if survivors.is_empty() {
        return Err(if report.all_hold {
            SolverError::EmptyCertificateCertified
        } else {
            SolverError::EmptyCertificateUncertified
        });
    }

    // Single-link clustering: survivors within Chebyshev distance 3 cells
    // merge. A cell map keeps the neighbor probes O(1).
    let mut cell_of: HashMap<(usize, usize), usize> = HashMap::with_capacity(survivors.len());
    for (s, &(i, j, _)) in survivors.iter().enumerate() {
        cell_of.insert((i, j), s);
    }
    let mut uf = UnionFind((0..survivors.len()).collect());
    for (s, &(i, j, _)) in survivors.iter().enumerate() {
        for di in 0..=3usize {
            for dj in -3i64..=3 {
                if di == 0 && dj <= 0 {
                    continue; // forward half-neighborhood suffices
                }
                let nj = j as i64 + dj;
                if nj < 0 {
                    continue;
                }
                if let Some(&n) = cell_of.get(&(i + di, nj as usize)) {
                    uf.union(s, n);
                }
            }
        }
    }

    // Per cluster: lowest-residual member wins (earlier row-major index on
    // ties); clusters keep first-encounter order.
    struct Cluster {
        best: usize,
        size: usize,
    }
    let mut order: Vec<usize> = Vec::new();
    let mut clusters: HashMap<usize, Cluster> = HashMap::new();
    for s in 0..survivors.len() {
        let root = uf.find(s);
        match clusters.get_mut(&root) {
            None => {
                clusters.insert(root, Cluster { best: s, size: 1 });
                order.push(root);
            }
            Some(c) => {
                c.size += 1;
                if survivors[s].2 < survivors[c.best].2 {
                    c.best = s;
                }
            }
        }
    }

    let opts = SolverOptions::default();
    let mut out = Vec::with_capacity(order.len());
    for root in order {
        let c = &clusters[&root];
        let (_, j, _) = survivors[c.best];
        // One polish pass from the representative's opposite share.
        let b1 = best_response(Exit::One, x2v[j], demand, costs, offsets, &opts)?.xs;
        let b2 = best_response(Exit::Two, b1, demand, costs, offsets, &opts)?.xs;
        let flow = flow_from_shares(b1, b2, &res);
        out.push(OracleCandidate {
            flow,
            residual: wardrop_residual(&flow, costs, offsets),
            cluster_size: c.size,
        });
    }
    Ok(out)
}

/// [`solve_equilibrium`], falling back to the best [`grid_oracle`] candidate
/// when the alternation does not converge (possible when the uniqueness
/// conditions fail). A fallback result counts as converged when its residual
/// passes [`FALLBACK_RESIDUAL_TOL`].
pub fn solve_with_fallback(
    demand: &DemandConfig,
    costs: &CostParams,
    offsets: &OccupancyOffsets,
    opts: &SolverOptions,
    grid_step: f64,
) -> Result<EquilibriumResult, SolverError> {
    let attempt = solve_equilibrium(demand, costs, offsets, opts)?;
    if attempt.converged {
        return Ok(attempt);
    }
    let candidates = grid_oracle(demand, costs, offsets, grid_step)?;
    let best = candidates
        .iter()
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .expect("grid_oracle errors instead of returning empty");
    Ok(EquilibriumResult {
        flow: best.flow,
        costs: StreamCosts::at(&best.flow, costs, offsets),
        residual: best.residual,
        iterations: attempt.iterations,
        unique_certified: attempt.unique_certified,
        converged: best.residual <= FALLBACK_RESIDUAL_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ExitCosts;

    fn calibrated() -> CostParams {
        CostParams::calibrated()
    }

    fn defaults() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn best_response_interior_root() {
        // With x2s = 0.35 and f = (0.65, 0.35), the exit-1 gap reduces to
        // -(x^2 - 4.35x + 2.105); its root in [0, 0.65] is the response.
        let demand = DemandConfig::new(0.65, 0.35).unwrap();
        let expected = (4.35 - (4.35f64 * 4.35 - 4.0 * 2.105).sqrt()) / 2.0;
        let br = best_response(
            Exit::One,
            0.35,
            &demand,
            &calibrated(),
            &OccupancyOffsets::ZERO,
            &defaults(),
        )
        .unwrap();
        assert!(br.certified);
        assert!((br.xs - expected).abs() < 1e-9, "xs={} expected={expected}", br.xs);
        assert!((br.xs - 0.554622).abs() < 1e-6);
    }

    #[test]
    fn best_response_all_bypass_when_own_lane_flooded() {
        // Everyone bound for exit 2 bypasses through lane 1, so exit 1's
        // vehicles all dodge into lane 2.
        let demand = DemandConfig::new(0.1, 0.9).unwrap();
        let br = best_response(
            Exit::One,
            0.0,
            &demand,
            &calibrated(),
            &OccupancyOffsets::ZERO,
            &defaults(),
        )
        .unwrap();
        assert_eq!(br.xs, 0.0);
    }

    #[test]
    fn best_response_all_steadfast_when_cheap() {
        let demand = DemandConfig::new(0.3, 0.7).unwrap();
        let br = best_response(
            Exit::One,
            0.7,
            &demand,
            &calibrated(),
            &OccupancyOffsets::ZERO,
            &defaults(),
        )
        .unwrap();
        assert_eq!(br.xs, 0.3);
    }

    #[test]
    fn best_response_rejects_out_of_range_share() {
        let demand = DemandConfig::new(0.65, 0.35).unwrap();
        let err = best_response(
            Exit::One,
            0.4,
            &demand,
            &calibrated(),
            &OccupancyOffsets::ZERO,
            &defaults(),
        )
        .unwrap_err();
        assert!(matches!(err, SolverError::SteadfastOutOfRange { .. }));
    }

    #[test]
    fn equilibrium_symmetric_demand_stays_steadfast() {
        let demand = DemandConfig::new(0.5, 0.5).unwrap();
        let eq = solve_equilibrium(&demand, &calibrated(), &OccupancyOffsets::ZERO, &defaults())
            .unwrap();
        assert!(eq.converged && eq.unique_certified);
        assert!((eq.flow.x1s - 0.5).abs() < 1e-9);
        assert!((eq.flow.x2s - 0.5).abs() < 1e-9);
        assert!(eq.flow.x1b.abs() < 1e-9 && eq.flow.x2b.abs() < 1e-9);
        assert!((eq.costs.j1s - 0.5).abs() < 1e-9);
        assert!(eq.residual <= CONVERGED_RESIDUAL_TOL);
    }

    #[test]
    fn equilibrium_asymmetric_demand_bypasses() {
        let demand = DemandConfig::new(0.65, 0.35).unwrap();
        let eq = solve_equilibrium(&demand, &calibrated(), &OccupancyOffsets::ZERO, &defaults())
            .unwrap();
        let expected = (4.35 - (4.35f64 * 4.35 - 4.0 * 2.105).sqrt()) / 2.0;
        assert!(eq.converged);
        assert!((eq.flow.x1s - expected).abs() < 1e-9);
        assert!((eq.flow.x2s - 0.35).abs() < 1e-12);
        assert!((eq.flow.x1b - (0.65 - expected)).abs() < 1e-9);
        // Exit 1 is indifferent at the split.
        assert!((eq.costs.j1s - eq.costs.j1b).abs() < 1e-9);
    }

    #[test]
    fn equilibrium_single_exit_demand() {
        // All demand bound for exit 1: the split solves x^2 - 4.7x + 2.7 = 0.
        let demand = DemandConfig::new(1.0, 0.0).unwrap();
        let eq = solve_equilibrium(&demand, &calibrated(), &OccupancyOffsets::ZERO, &defaults())
            .unwrap();
        let expected = (4.7 - (4.7f64 * 4.7 - 4.0 * 2.7).sqrt()) / 2.0;
        assert!(eq.converged);
        assert!((eq.flow.x1s - expected).abs() < 1e-9);
        assert!((eq.flow.x1s - 0.669970).abs() < 1e-6);
        assert!((eq.flow.x1b - 0.330030).abs() < 1e-6);
        assert_eq!(eq.flow.x2s, 0.0);
    }

    #[test]
    fn verify_wardrop_flags_profitable_deviation() {
        // All-steadfast under f1 = 0.65 is not an equilibrium: exit 1's gap
        // is 0.65 - 0.35 = 0.3, weighted by its steadfast share.
        let demand = DemandConfig::new(0.65, 0.35).unwrap();
        let x = FlowVector::new(0.65, 0.0, 0.35, 0.0);
        let r = verify_wardrop(&x, &demand, &calibrated(), &OccupancyOffsets::ZERO).unwrap();
        assert!((r - 0.195).abs() < 1e-12, "r={r}");
    }

    #[test]
    fn verify_wardrop_rejects_infeasible() {
        let demand = DemandConfig::new(0.65, 0.35).unwrap();
        let x = FlowVector::new(0.7, 0.0, 0.35, 0.0);
        assert!(matches!(
            verify_wardrop(&x, &demand, &calibrated(), &OccupancyOffsets::ZERO),
            Err(SolverError::Flow(_))
        ));
    }

    #[test]
    fn grid_oracle_agrees_with_alternation() {
        let demand = DemandConfig::new(0.65, 0.35).unwrap();
        let eq = solve_equilibrium(&demand, &calibrated(), &OccupancyOffsets::ZERO, &defaults())
            .unwrap();
        let candidates =
            grid_oracle(&demand, &calibrated(), &OccupancyOffsets::ZERO, 2e-3).unwrap();
        assert_eq!(candidates.len(), 1);
        let c = &candidates[0];
        for (a, b) in c.flow.as_array().iter().zip(eq.flow.as_array()) {
            assert!((a - b).abs() <= 2.0 * 2e-3, "{a} vs {b}");
        }
        assert!(c.residual <= 1e-8);
    }

    #[test]
    fn grid_oracle_rejects_bad_step() {
        let demand = DemandConfig::new(0.5, 0.5).unwrap();
        for h in [0.0, -1.0, 0.05, f64::NAN] {
            assert!(matches!(
                grid_oracle(&demand, &calibrated(), &OccupancyOffsets::ZERO, h),
                Err(SolverError::BadGridStep { .. })
            ));
        }
    }

    #[test]
    fn equilibrium_invariant_under_cost_scaling() {
        let demand = DemandConfig::new(0.65, 0.35).unwrap();
        let base = solve_equilibrium(&demand, &calibrated(), &OccupancyOffsets::ZERO, &defaults())
            .unwrap();
        for lambda in [0.5, 3.0, 10.0] {
            let scaled = CostParams::symmetric(ExitCosts::new(lambda, lambda, 2.7)).unwrap();
            let eq =
                solve_equilibrium(&demand, &scaled, &OccupancyOffsets::ZERO, &defaults()).unwrap();
            for (a, b) in eq.flow.as_array().iter().zip(base.flow.as_array()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn commanded_offsets_shift_the_split() {
        // Commanding part of exit 1 to stay (os1) crowds lane 1 and pushes
        // the residual split toward bypassing.
        let demand = DemandConfig::new(0.65, 0.35).unwrap();
        let offsets = OccupancyOffsets::new(0.1625, 0.0, 0.0, 0.0).unwrap();
        let eq = solve_equilibrium(&demand, &calibrated(), &offsets, &defaults()).unwrap();
        assert!(eq.converged);
        let total_exit1 = eq.flow.x1s + eq.flow.x1b;
        assert!((total_exit1 - (0.65 - 0.1625)).abs() < 1e-9);
        assert!(validate_flow(&eq.flow, &demand, &offsets).is_ok());
    }
}
