//! Deterministic emission: fixed decimal places, LF endings, atomic file
//! replacement.

use std::io::Write;
use std::path::Path;

use diverge::stackelberg::SweepRow;
use diverge::{DemandConfig, EquilibriumResult};

use crate::Failure;

/// Fixed 9-decimal form used for every flow, cost, and parameter.
pub fn f9(x: f64) -> String {
    format!("{x:.9}")
}

/// Residuals get 12 decimals: they sit near the solver tolerances.
pub fn f12(x: f64) -> String {
    format!("{x:.12}")
}

/// Writes via a sibling temp file and rename, so the target is never
/// partially written.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let io = |e: &dyn std::fmt::Display| Failure::Io(format!("writing {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io(&e))?;
    tmp.write_all(bytes).map_err(|e| io(&e))?;
    tmp.persist(path).map_err(|e| io(&e))?;
    Ok(())
}

pub fn equilibrium_csv(demand: &DemandConfig, eq: &EquilibriumResult) -> String {
    let mut s = String::from("f1,x1s,x1b,x2s,x2b,j1s,j1b,j2s,j2b,residual\n");
    let x = &eq.flow;
    let j = &eq.costs;
    s.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        f9(demand.f1()),
        f9(x.x1s),
        f9(x.x1b),
        f9(x.x2s),
        f9(x.x2b),
        f9(j.j1s),
        f9(j.j1b),
        f9(j.j2s),
        f9(j.j2b),
        f12(eq.residual),
    ));
    s
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("beta,x1s,x1b,x2s,x2b,w,z,j_soc,residual,converged\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            f9(r.beta),
            f9(r.flow.x1s),
            f9(r.flow.x1b),
            f9(r.flow.x2s),
            f9(r.flow.x2b),
            f9(r.w),
            f9(r.z),
            f9(r.j_soc),
            f12(r.residual),
            r.converged,
        ));
    }
    s
}

/// One social-curve point: equilibrium versus optimum at a demand split.
pub struct CurveRow {
    pub f1: f64,
    pub eq: EquilibriumResult,
    pub eq_cost: f64,
    pub opt: diverge::social::SocialResult,
}

pub fn social_curve_csv(rows: &[CurveRow]) -> String {
    let mut s = String::from(
        "f1,eq_x1s,eq_x1b,eq_x2s,eq_x2b,eq_cost,opt_x1s,opt_x1b,opt_x2s,opt_x2b,opt_cost,ratio\n",
    );
    for r in rows {
        let e = &r.eq.flow;
        let o = &r.opt.flow;
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            f9(r.f1),
            f9(e.x1s),
            f9(e.x1b),
            f9(e.x2s),
            f9(e.x2b),
            f9(r.eq_cost),
            f9(o.x1s),
            f9(o.x1b),
            f9(o.x2s),
            f9(o.x2b),
            f9(r.opt.cost),
            f9(r.opt.ratio),
        ));
    }
    s
}
