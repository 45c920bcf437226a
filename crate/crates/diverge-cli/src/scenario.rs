//! Scenario documents: TOML with unknown keys rejected.
//!
//! ```toml
//! [demand]
//! f1 = 0.65        # f2 defaults to 1 - f1; d (absolute total) is optional
//!
//! [costs.exit1]
//! ct = 1.0
//! cc = 1.0
//! gamma = 2.7
//!
//! [costs.exit2]
//! ct = 1.0
//! cc = 1.0
//! gamma = 2.7
//!
//! [offsets]        # optional, defaults to zero
//! os1 = 0.0975
//! ob1 = 0.065
//!
//! [solver]         # optional
//! tol = 1e-10
//! max_iters = 10000
//! bisect_tol = 1e-12
//! ```

use serde::Deserialize;

use diverge::{CostParams, DemandConfig, ExitCosts, OccupancyOffsets, SolverOptions};

use crate::Failure;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    demand: DemandDoc,
    costs: CostsDoc,
    #[serde(default)]
    offsets: OffsetsDoc,
    #[serde(default)]
    solver: SolverDoc,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DemandDoc {
    f1: f64,
    f2: Option<f64>,
    d: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CostsDoc {
    exit1: ExitDoc,
    exit2: ExitDoc,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExitDoc {
    ct: f64,
    cc: f64,
    gamma: f64,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct OffsetsDoc {
    #[serde(default)]
    os1: f64,
    #[serde(default)]
    ob1: f64,
    #[serde(default)]
    os2: f64,
    #[serde(default)]
    ob2: f64,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SolverDoc {
    tol: Option<f64>,
    max_iters: Option<u32>,
    bisect_tol: Option<f64>,
}

pub struct Scenario {
    pub demand: DemandConfig,
    pub costs: CostParams,
    pub offsets: OccupancyOffsets,
    pub solver: SolverOptions,
}

pub fn load_scenario(path: &std::path::Path) -> Result<Scenario, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("reading {}: {e}", path.display())))?;
    let doc: ScenarioDoc = toml::from_str(&text)
        .map_err(|e| Failure::Validation(format!("scenario {}: {e}", path.display())))?;

    let validation = |e: &dyn std::fmt::Display| {
        Failure::Validation(format!("scenario {}: {e}", path.display()))
    };

    let mut demand = match doc.demand.f2 {
        Some(f2) => DemandConfig::new(doc.demand.f1, f2),
        None => DemandConfig::from_f1(doc.demand.f1),
    }
    .map_err(|e| validation(&e))?;
    if let Some(d) = doc.demand.d {
        demand = demand.with_total(d).map_err(|e| validation(&e))?;
    }

    let exit = |e: &ExitDoc| ExitCosts::new(e.ct, e.cc, e.gamma);
    let costs = CostParams::new(exit(&doc.costs.exit1), exit(&doc.costs.exit2))
        .map_err(|e| validation(&e))?;

    let o = &doc.offsets;
    let offsets = OccupancyOffsets::new(o.os1, o.ob1, o.os2, o.ob2).map_err(|e| validation(&e))?;

    let defaults = SolverOptions::default();
    let solver = SolverOptions {
        tol: doc.solver.tol.unwrap_or(defaults.tol),
        max_iters: doc.solver.max_iters.unwrap_or(defaults.max_iters),
        bisect_tol: doc.solver.bisect_tol.unwrap_or(defaults.bisect_tol),
    };
    if !(solver.tol.is_finite() && solver.tol > 0.0)
        || !(solver.bisect_tol.is_finite() && solver.bisect_tol > 0.0)
    {
        return Err(validation(&"solver tolerances must be positive and finite"));
    }

    Ok(Scenario {
        demand,
        costs,
        offsets,
        solver,
    })
}
