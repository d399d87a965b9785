//! Brute-force checks of Greedy's regret guarantees on tiny instances.

use super::AllocatorResult;
use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::model::Instance;
use crate::oracle::{diagnostics_p, exact_spread, SpreadOracle};

const TOL: f64 = 1e-9;

/// Limits on brute-force work.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsCap {
    pub max_nodes: usize,
    pub max_ads: usize,
    /// Largest number of constrained allocations enumerated for the optimum.
    pub max_allocations: u64,
}

impl Default for BoundsCap {
    fn default() -> Self {
        Self {
            max_nodes: 10,
            max_ads: 4,
            max_allocations: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    PreconditionNotMet,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::PreconditionNotMet => "precondition-not-met",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub verdict: Verdict,
    pub bound: Option<f64>,
    pub note: String,
}

impl BoundCheck {
    fn unmet(note: impl Into<String>) -> Self {
        Self {
            verdict: Verdict::PreconditionNotMet,
            bound: None,
            note: note.into(),
        }
    }

    fn against(regret: f64, bound: f64) -> Self {
        let ok = regret <= bound + TOL;
        Self {
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            bound: Some(bound),
            note: format!("regret {regret:.6} vs bound {bound:.6}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// Exact regret of the allocation under test.
    pub regret: f64,
    /// Least regret over all valid allocations.
    pub optimal_regret: f64,
    pub total_budget: f64,
    pub p: Vec<f64>,
    pub p_max: f64,
    /// Fewest seeds whose revenue reaches the budget, per ad.
    pub s_opt: Vec<Option<usize>>,
    pub full_regret: BoundCheck,
    pub one_third: BoundCheck,
    pub p_max_bound: BoundCheck,
}

impl BoundReport {
    pub fn checks(&self) -> [(&'static str, &BoundCheck); 3] {
        [
            ("full-regret", &self.full_regret),
            ("one-third", &self.one_third),
            ("p-max", &self.p_max_bound),
        ]
    }
}

/// Exact revenue of every subset of nodes (bit `u` of the index = node `u`).
fn revenue_table(instance: &Instance, i: usize) -> Result<Vec<f64>> {
    let n = instance.node_count();
    let mut table = vec![0.0; 1 << n];
    let mut set = Vec::with_capacity(n);
    for (mask, slot) in table.iter_mut().enumerate().skip(1) {
        set.clear();
        set.extend((0..n as NodeId).filter(|u| mask >> u & 1 == 1));
        *slot = instance.cpe(i) * exact_spread(instance.view(i), instance.ctps(i), &set)?.mean;
    }
    Ok(table)
}

fn regret_of(instance: &Instance, tables: &[Vec<f64>], masks: &[usize]) -> f64 {
    masks
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            (instance.budget(i) - tables[i][m]).abs() + instance.lambda() * m.count_ones() as f64
        })
        .sum()
}

fn optimal_regret(instance: &Instance, tables: &[Vec<f64>], cap: &BoundsCap) -> Result<f64> {
    let (n, h) = (instance.node_count(), instance.ad_count());
    if (0..n as NodeId).all(|u| instance.kappa(u) as usize >= h) {
        // ads decouple
        return Ok((0..h)
            .map(|i| {
                tables[i]
                    .iter()
                    .enumerate()
                    .map(|(m, r)| {
                        (instance.budget(i) - r).abs() + instance.lambda() * m.count_ones() as f64
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .sum());
    }
    // per-node choices: subsets of ads of size <= kappa
    let choices: Vec<Vec<usize>> = (0..n as NodeId)
        .map(|u| {
            (0..1usize << h)
                .filter(|c| c.count_ones() <= instance.kappa(u))
                .collect()
        })
        .collect();
    let combos = choices
        .iter()
        .fold(1u64, |acc, c| acc.saturating_mul(c.len() as u64));
    if combos > cap.max_allocations {
        return Err(Error::CapExceeded {
            coins: combos.min(usize::MAX as u64) as usize,
            cap: cap.max_allocations as usize,
        });
    }
    let mut masks = vec![0usize; h];
    let mut best = f64::INFINITY;
    fn walk(
        u: usize,
        choices: &[Vec<usize>],
        masks: &mut Vec<usize>,
        best: &mut f64,
        eval: &dyn Fn(&[usize]) -> f64,
    ) {
        if u == choices.len() {
            *best = best.min(eval(masks));
            return;
        }
        for &c in &choices[u] {
            for (i, m) in masks.iter_mut().enumerate() {
                if c >> i & 1 == 1 {
                    *m |= 1 << u;
                }
            }
            walk(u + 1, choices, masks, best, eval);
            for m in masks.iter_mut() {
                *m &= !(1 << u);
            }
        }
    }
    let eval = |m: &[usize]| regret_of(instance, tables, m);
    walk(0, &choices, &mut masks, &mut best, &eval);
    Ok(best)
}

/// Evaluates the three Greedy regret bounds against `result`'s allocation.
///
/// `p_i`, `s_opt` and the optimum are computed exactly by subset
/// enumeration. A bound whose hypotheses fail is reported as
/// [`Verdict::PreconditionNotMet`] and not asserted.
pub fn check_bounds(
    instance: &Instance,
    result: &AllocatorResult,
    cap: &BoundsCap,
) -> Result<BoundReport> {
    let (n, h) = (instance.node_count(), instance.ad_count());
    if n > cap.max_nodes || h > cap.max_ads {
        return Err(Error::invalid(format!(
            "bound check limited to {} nodes and {} ads, instance has {n} and {h}",
            cap.max_nodes, cap.max_ads
        )));
    }
    let tables = (0..h)
        .map(|i| revenue_table(instance, i))
        .collect::<Result<Vec<_>>>()?;
    let masks: Vec<usize> = (0..h)
        .map(|i| {
            result
                .allocation
                .seeds(i)
                .iter()
                .fold(0, |m, &u| m | 1 << u)
        })
        .collect();
    let regret = regret_of(instance, &tables, &masks);
    let optimal = optimal_regret(instance, &tables, cap)?;
    let diag = diagnostics_p(instance, SpreadOracle::Exact)?;
    let total_budget: f64 = instance.budgets().iter().sum();
    let s_opt: Vec<Option<usize>> = (0..h)
        .map(|i| {
            tables[i]
                .iter()
                .enumerate()
                .filter(|(_, &r)| r >= instance.budget(i) - TOL)
                .map(|(m, _)| m.count_ones() as usize)
                .min()
        })
        .collect();
    let lambda = instance.lambda();
    let in_regime = diag.out_of_regime.is_empty();

    let one_third = if lambda != 0.0 {
        BoundCheck::unmet("needs lambda = 0")
    } else if optimal > total_budget / 3.0 + TOL {
        BoundCheck::unmet(format!(
            "optimal regret {optimal:.6} exceeds a third of the budget"
        ))
    } else {
        BoundCheck::against(regret, total_budget / 3.0)
    };

    let tight = diag.p_max.min(1.0 - diag.p_max).min(diag.p_max / 2.0) * total_budget;
    let p_max_bound = if lambda != 0.0 {
        BoundCheck::unmet("needs lambda = 0")
    } else if !in_regime {
        BoundCheck::unmet("some p_i outside (0, 1)")
    } else if optimal > tight + TOL {
        BoundCheck::unmet(format!("optimal regret {optimal:.6} exceeds {tight:.6}"))
    } else {
        BoundCheck::against(regret, tight)
    };

    let min_direct = (0..h)
        .flat_map(|i| (0..n as NodeId).map(move |u| (u, i)))
        .map(|(u, i)| instance.ctp(u, i) * instance.cpe(i))
        .fold(f64::INFINITY, f64::min);
    let full_regret = if (0..n as NodeId).any(|u| (instance.kappa(u) as usize) < h) {
        BoundCheck::unmet("some attention bound below the number of ads")
    } else if lambda > min_direct + TOL {
        BoundCheck::unmet("lambda exceeds the smallest ctp * cpe")
    } else if !in_regime {
        BoundCheck::unmet("some p_i outside (0, 1)")
    } else if s_opt.iter().any(Option::is_none) {
        BoundCheck::unmet("some budget is unreachable")
    } else if (0..h).any(|i| diag.p[i] / 2.0 - lambda / (2.0 * instance.budget(i)) <= 0.0) {
        BoundCheck::unmet("p_i / 2 - lambda / 2B_i is not positive")
    } else {
        let bound: f64 = (0..h)
            .map(|i| {
                let b = instance.budget(i);
                let p = diag.p[i];
                let s = s_opt[i].unwrap() as f64;
                let log = (1.0 / (p / 2.0 - lambda / (2.0 * b))).ln().ceil();
                (p * b + lambda) / 2.0 + lambda * (1.0 + s * log)
            })
            .sum();
        BoundCheck::against(regret, bound)
    };

    Ok(BoundReport {
        regret,
        optimal_regret: optimal,
        total_budget,
        p: diag.p,
        p_max: diag.p_max,
        s_opt,
        full_regret,
        one_third,
        p_max_bound,
    })
}
