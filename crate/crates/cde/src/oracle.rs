//! Exhaustive ground truth for rate optimization.
//!
//! Universal recovery holds exactly when, for every nonempty proper subset
//! I of nodes, the senders outside I contribute at least as many symbols
//! as the number of columns nobody in I holds. This module evaluates that
//! cut system directly and searches rate vectors by brute force, so the
//! greedy search elsewhere in the crate can be validated against it.
//!
//! Search order is fixed: totals ascend, and vectors of a given total are
//! enumerated lexicographically, so reported witnesses are reproducible.

use crate::model::{Instance, Rational};
use num_traits::Zero;

/// Subset enumeration is 2^n; refuse instances where that is unreasonable.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("exhaustive search over {n} nodes exceeds the {MAX_NODES}-node cap")]
pub struct TooLarge {
    pub n: usize,
}

const MAX_NODES: usize = 20;

/// Columns missing from each node subset, indexed by bitmask.
fn deficiencies(inst: &Instance) -> Vec<usize> {
    let n = inst.n();
    let k = inst.k();
    let mut union_weight = vec![0usize; 1 << n];
    let mut unions: Vec<crate::model::BitVector> = Vec::with_capacity(1 << n);
    unions.push(crate::model::BitVector::new(k));
    for mask in 1usize..1 << n {
        let low = mask.trailing_zeros() as usize;
        let u = unions[mask & (mask - 1)].or(inst.row(low));
        union_weight[mask] = u.weight();
        unions.push(u);
    }
    union_weight.iter().map(|w| k - w).collect()
}

/// Does `rates` satisfy every cut constraint of `inst`?
pub fn feasible(inst: &Instance, rates: &[usize]) -> Result<bool, TooLarge> {
    let n = inst.n();
    assert_eq!(rates.len(), n);
    if n > MAX_NODES {
        return Err(TooLarge { n });
    }
    let deficiency = deficiencies(inst);
    let total: usize = rates.iter().sum();
    let inside: Vec<usize> = {
        let mut inside = vec![0usize; 1 << n];
        for mask in 1usize..1 << n {
            let low = mask.trailing_zeros() as usize;
            inside[mask] = inside[mask & (mask - 1)] + rates[low];
        }
        inside
    };
    let full = (1usize << n) - 1;
    for mask in 1..full {
        if total - inside[mask] < deficiency[mask] {
            return Ok(false);
        }
    }
    Ok(true)
}

struct Dfs<'a> {
    n: usize,
    deficiency: &'a [usize],
    caps: Vec<usize>,
}

impl Dfs<'_> {
    /// First rate vector of the given total in lexicographic order that
    /// satisfies every cut, or None.
    fn first_feasible(&self, total: usize) -> Option<Vec<usize>> {
        let mut rates = vec![0usize; self.n];
        self.descend(total, 0, &mut rates, &mut |_| true)
    }

    /// Cheapest rate vector of the given total; among ties, the first in
    /// lexicographic order. None when no vector of this total is feasible.
    fn cheapest(&self, total: usize, weights: &[Rational]) -> Option<(Rational, Vec<usize>)> {
        let mut best: Option<(Rational, Vec<usize>)> = None;
        let mut rates = vec![0usize; self.n];
        self.descend(total, 0, &mut rates, &mut |r| {
            let cost: Rational = r
                .iter()
                .zip(weights)
                .map(|(&ri, w)| Rational::from_integer(ri as i64) * w)
                .sum();
            if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                best = Some((cost, r.to_vec()));
            }
            false
        });
        best
    }

    /// Assign rates[i..] summing to `remaining`; `visit` sees each complete
    /// feasible vector and returns true to stop the search.
    fn descend(
        &self,
        remaining: usize,
        i: usize,
        rates: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) -> Option<Vec<usize>> {
        if i == self.n {
            if remaining == 0 && self.satisfies(rates) && visit(rates) {
                return Some(rates.clone());
            }
            return None;
        }
        for r in 0..=remaining.min(self.caps[i]) {
            rates[i] = r;
            if let Some(found) = self.descend(remaining - r, i + 1, rates, visit) {
                return Some(found);
            }
        }
        rates[i] = 0;
        None
    }

    fn satisfies(&self, rates: &[usize]) -> bool {
        let total: usize = rates.iter().sum();
        let full = (1usize << self.n) - 1;
        let mut inside = vec![0usize; 1 << self.n];
        for mask in 1..full {
            let low = mask.trailing_zeros() as usize;
            inside[mask] = inside[mask & (mask - 1)] + rates[low];
            if total - inside[mask] < self.deficiency[mask] {
                return false;
            }
        }
        true
    }
}

fn searcher<'a>(inst: &Instance, deficiency: &'a [usize], total: usize) -> Dfs<'a> {
    let n = inst.n();
    let k = inst.k();
    // The singleton cut for node i caps its own rate at total - (k - w_i).
    let caps = (0..n)
        .map(|i| {
            let need = k - inst.row(i).weight();
            total.saturating_sub(need)
        })
        .collect();
    Dfs {
        n,
        deficiency,
        caps,
    }
}

/// Minimum total rate with a lexicographically least witness.
pub fn min_sum_rate(inst: &Instance) -> Result<(usize, Vec<usize>), TooLarge> {
    let n = inst.n();
    if n > MAX_NODES {
        return Err(TooLarge { n });
    }
    let deficiency = deficiencies(inst);
    for total in 0..=inst.k() {
        if let Some(rates) = searcher(inst, &deficiency, total).first_feasible(total) {
            return Ok((total, rates));
        }
    }
    unreachable!("broadcasting every column is always sufficient");
}

/// Minimum weighted cost among rate vectors of exactly the given total,
/// with its first lexicographic witness. None when the total is infeasible.
pub fn min_cost_at_sum(
    inst: &Instance,
    weights: &[Rational],
    total: usize,
) -> Result<Option<(Rational, Vec<usize>)>, TooLarge> {
    let n = inst.n();
    assert_eq!(weights.len(), n);
    if n > MAX_NODES {
        return Err(TooLarge { n });
    }
    let deficiency = deficiencies(inst);
    Ok(searcher(inst, &deficiency, total).cheapest(total, weights))
}

/// Minimum weighted cost over all feasible rate vectors: scanning totals up
/// to K is exhaustive, since any optimum above K can be reduced onto a
/// vector of total at most K without touching a binding cut.
pub fn min_weighted_cost(
    inst: &Instance,
    weights: &[Rational],
) -> Result<(Rational, usize, Vec<usize>), TooLarge> {
    let mut best: Option<(Rational, usize, Vec<usize>)> = None;
    for total in 0..=inst.k() {
        if let Some((cost, rates)) = min_cost_at_sum(inst, weights, total)? {
            if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
                best = Some((cost, total, rates));
            }
        }
    }
    Ok(best.expect("broadcasting every column is always sufficient"))
}

/// True when every weight is strictly positive.
pub fn usable_weights(weights: &[Rational]) -> bool {
    !weights.is_empty() && weights.iter().all(|w| *w > Rational::zero())
}
