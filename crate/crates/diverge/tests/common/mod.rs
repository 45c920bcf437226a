//! Shared helpers for the integration suites.

#![allow(dead_code)]

use diverge::{CostParams, DemandConfig, ExitCosts};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random demand and costs satisfying both uniqueness conditions:
/// `cc <= ct` by construction and `gamma` inflated past the dominance bound.
pub fn random_certified(rng: &mut impl Rng) -> (DemandConfig, CostParams) {
    let f1: f64 = rng.random_range(0.02..=0.98);
    let demand = DemandConfig::from_f1(f1).unwrap();
    let ct1: f64 = rng.random_range(0.5..=3.0);
    let ct2: f64 = rng.random_range(0.5..=3.0);
    let cc1 = ct1 * rng.random_range(0.1..=1.0);
    let cc2 = ct2 * rng.random_range(0.1..=1.0);
    let gamma1 = 1.0 + (cc1 / ct2) * rng.random_range(1.05..=3.0);
    let gamma2 = 1.0 + (cc2 / ct1) * rng.random_range(1.05..=3.0);
    let costs = CostParams::new(
        ExitCosts::new(ct1, cc1, gamma1),
        ExitCosts::new(ct2, cc2, gamma2),
    )
    .unwrap();
    assert!(diverge::check_uniqueness_conditions(&costs).all_hold);
    (demand, costs)
}

/// One parsed linear constraint of an LP-format document.
pub struct LpRow {
    pub name: String,
    /// `(coefficient, variable)` pairs on the left-hand side.
    pub terms: Vec<(f64, String)>,
    /// `"<="`, `">="`, or `"="`.
    pub op: String,
    pub rhs: f64,
}

/// Minimal LP-format reader covering what [`diverge::calibrate::export_milp`]
/// emits: named rows in `Subject To`, plus the `Bounds` and `Binaries`
/// sections returned verbatim as token lists.
pub struct LpDocument {
    pub rows: Vec<LpRow>,
    pub bounds: Vec<String>,
    pub binaries: Vec<String>,
    pub objective: Vec<String>,
}

pub fn parse_lp(text: &str) -> LpDocument {
    #[derive(PartialEq)]
    enum Section {
        Preamble,
        Objective,
        Rows,
        Bounds,
        Binaries,
    }
    let mut section = Section::Preamble;
    let mut rows = Vec::new();
    let mut bounds = Vec::new();
    let mut binaries = Vec::new();
    let mut objective = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('\\') {
            continue;
        }
        match line {
            "Minimize" => {
                section = Section::Objective;
                continue;
            }
            "Subject To" => {
                section = Section::Rows;
                continue;
            }
            "Bounds" => {
                section = Section::Bounds;
                continue;
            }
            "Binaries" => {
                section = Section::Binaries;
                continue;
            }
            "End" => break,
            _ => {}
        }
        match section {
            Section::Objective => {
                objective.extend(line.split_whitespace().map(str::to_owned))
            }
            Section::Rows => {
                let (name, body) = line
                    .split_once(':')
                    .expect("constraint rows are named");
                rows.push(parse_row(name.trim(), body));
            }
            Section::Bounds => bounds.push(line.to_owned()),
            Section::Binaries => {
                binaries.extend(line.split_whitespace().map(str::to_owned))
            }
            Section::Preamble => panic!("tokens before any section: {line}"),
        }
    }
    LpDocument {
        rows,
        bounds,
        binaries,
        objective,
    }
}

fn parse_row(name: &str, body: &str) -> LpRow {
    let tokens: Vec<&str> = body.split_whitespace().collect();
    let op_at = tokens
        .iter()
        .position(|t| matches!(*t, "<=" | ">=" | "="))
        .expect("row has a comparison operator");
    let rhs: f64 = tokens[op_at + 1].parse().expect("numeric right-hand side");

    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut pending: Option<f64> = None;
    for &tok in &tokens[..op_at] {
        match tok {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Ok(v) = tok.parse::<f64>() {
                    pending = Some(v);
                } else {
                    let coef = sign * pending.take().unwrap_or(1.0);
                    terms.push((coef, tok.to_owned()));
                    sign = 1.0;
                }
            }
        }
    }
    LpRow {
        name: name.to_owned(),
        terms,
        op: tokens[op_at].to_owned(),
        rhs,
    }
}

impl LpRow {
    /// Left-hand side value under a variable assignment.
    pub fn lhs(&self, value: &dyn Fn(&str) -> f64) -> f64 {
        self.terms.iter().map(|(c, v)| c * value(v)).sum()
    }

    pub fn satisfied(&self, value: &dyn Fn(&str) -> f64, slack: f64) -> bool {
        let lhs = self.lhs(value);
        match self.op.as_str() {
            "<=" => lhs <= self.rhs + slack,
            ">=" => lhs >= self.rhs - slack,
            _ => (lhs - self.rhs).abs() <= slack,
        }
    }
}
