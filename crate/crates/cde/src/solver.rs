//! Rate optimization drivers built on the greedy basis search.
//!
//! The minimum broadcast count over K packets is K minus the largest slack
//! at which a basis exists, plus one uncoded send per single-owner packet
//! stripped during normalization. Slack feasibility is monotone, so the
//! plain solver binary-searches it; the weighted solver instead walks the
//! slack axis toward the minimum of the (convex) cost curve, visiting
//! nodes cheapest-first so high rates land on cheap senders.

use crate::basis_search::{check_basis, sdb, sdb_extend, BasisSet, SdbResult};
use crate::model::{Instance, NormalizationReport, Rational, Violation};

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("instance is invalid: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("weighted optimization requires per-node weights")]
    MissingWeights,
    #[error("weighted optimization requires a canonical instance; normalize first")]
    NotCanonical,
    #[error("staged exchange requires group metadata")]
    MissingGroups,
    #[error("{total} transmissions cannot be scheduled over {k} packets")]
    TotalTooLarge { total: usize, k: usize },
    #[error("round {round}: prior transmissions conflict at slack {d}")]
    StaleSeeds { round: usize, d: usize },
    #[error("round {round}: extended basis failed verification")]
    BadExtension { round: usize },
}

/// Minimum-broadcast solution for one instance.
#[derive(Debug, Clone)]
pub struct Solution {
    /// Total transmissions, coded rows plus forced uncoded sends.
    pub min_broadcasts: usize,
    /// Slack achieved on the normalized core.
    pub d: usize,
    /// Transmissions per original node, forced sends included.
    pub rates: Vec<usize>,
    /// Coded transmissions per node, over the core only.
    pub core_rates: Vec<usize>,
    /// Basis over the core columns.
    pub basis: BasisSet,
    /// The normalized core the basis refers to.
    pub core: Instance,
    pub report: NormalizationReport,
}

/// Minimum-cost solution at some slack, weights applied per transmission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedSolution {
    pub cost: Rational,
    pub total: usize,
    pub d: usize,
    pub rates: Vec<usize>,
    pub basis: BasisSet,
}

/// Cheapest schedule using exactly a given number of transmissions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Kappa {
    Point(WeightedSolution),
    Infeasible,
}

/// Largest feasible slack in [0, d_hi] with its search result. Probes the
/// endpoints first: the top value usually holds, and slack 0 never fails.
fn best_slack(inst: &Instance, order: &[usize], d_hi: usize) -> (usize, Vec<usize>, BasisSet) {
    let base = || match sdb(inst, 0, order) {
        SdbResult::Found { rates, basis } => (0, rates, basis),
        SdbResult::NotFound => unreachable!("slack 0 always succeeds on a valid instance"),
    };
    if d_hi == 0 {
        return base();
    }
    if let SdbResult::Found { rates, basis } = sdb(inst, d_hi, order) {
        return (d_hi, rates, basis);
    }
    let (mut lo, mut best) = match sdb(inst, 1, order) {
        SdbResult::Found { rates, basis } => (1, (rates, basis)),
        SdbResult::NotFound => return base(),
    };
    let mut hi = d_hi;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        match sdb(inst, mid, order) {
            SdbResult::Found { rates, basis } => {
                lo = mid;
                best = (rates, basis);
            }
            SdbResult::NotFound => hi = mid,
        }
    }
    (lo, best.0, best.1)
}

fn slack_ceiling(inst: &Instance) -> usize {
    inst.min_packets().min(inst.max_packets().saturating_sub(1))
}

/// Fewest broadcasts for every node to recover every packet.
pub fn solve(inst: &Instance) -> Result<Solution, SolveError> {
    let violations = inst.validate();
    if !violations.is_empty() {
        return Err(SolveError::Invalid(violations));
    }
    let (core, report) = inst.normalize();
    let n = inst.n();
    let mut rates = vec![0usize; n];
    for &(node, _) in &report.forced {
        rates[node] += 1;
    }
    let (d, core_rates, basis) = if core.k() == 0 {
        (
            0,
            vec![0; n],
            BasisSet {
                d: 0,
                vectors: Vec::new(),
                provenance: Vec::new(),
            },
        )
    } else {
        let order: Vec<usize> = (0..n).collect();
        best_slack(&core, &order, slack_ceiling(&core))
    };
    for (r, c) in rates.iter_mut().zip(&core_rates) {
        *r += c;
    }
    Ok(Solution {
        min_broadcasts: basis.len() + report.forced.len(),
        d,
        rates,
        core_rates,
        basis,
        core,
        report,
    })
}

fn weight_order(weights: &[Rational]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..weights.len()).collect();
    idx.sort_by(|&a, &b| weights[a].cmp(&weights[b]).then(a.cmp(&b)));
    idx
}

fn checked_weights(inst: &Instance) -> Result<&[Rational], SolveError> {
    let violations = inst.validate();
    if !violations.is_empty() {
        return Err(SolveError::Invalid(violations));
    }
    let weights = inst.weights().ok_or(SolveError::MissingWeights)?;
    if !inst.is_canonical() {
        return Err(SolveError::NotCanonical);
    }
    Ok(weights)
}

fn eval_slack(
    inst: &Instance,
    order: &[usize],
    weights: &[Rational],
    memo: &mut [Option<Option<WeightedSolution>>],
    d: usize,
) -> Option<WeightedSolution> {
    if memo[d].is_none() {
        memo[d] = Some(match sdb(inst, d, order) {
            SdbResult::Found { rates, basis } => {
                let cost = rates
                    .iter()
                    .zip(weights)
                    .map(|(&r, w)| Rational::from_integer(r as i64) * w)
                    .sum();
                Some(WeightedSolution {
                    cost,
                    total: inst.k() - d,
                    d,
                    rates,
                    basis,
                })
            }
            SdbResult::NotFound => None,
        });
    }
    memo[d].clone().unwrap()
}

/// Cheapest schedule under per-transmission node weights.
///
/// The cost curve over slack is convex, so a neighbor-probing binary
/// search homes in on its minimum; every probed point is kept and the
/// cheapest one returned, so a locally flat probe cannot lose the optimum
/// among evaluated slacks. Ties prefer higher slack, i.e. fewer sends.
pub fn solve_weighted(inst: &Instance) -> Result<WeightedSolution, SolveError> {
    let weights = checked_weights(inst)?;
    let order = weight_order(weights);
    let d_hi = slack_ceiling(inst);
    let mut memo: Vec<Option<Option<WeightedSolution>>> = vec![None; d_hi + 1];
    let (mut lo, mut hi) = (0usize, d_hi);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        let right = eval_slack(inst, &order, weights, &mut memo, mid);
        let left = eval_slack(inst, &order, weights, &mut memo, mid - 1);
        let go_right = match (&right, &left) {
            (Some(r), Some(l)) => r.cost <= l.cost,
            (Some(_), None) => true,
            (None, _) => false,
        };
        if go_right {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    eval_slack(inst, &order, weights, &mut memo, lo);
    let best = memo
        .into_iter()
        .flatten()
        .flatten()
        .min_by(|a, b| a.cost.cmp(&b.cost).then(b.d.cmp(&a.d)));
    Ok(best.expect("slack 0 always succeeds on a valid instance"))
}

/// Cheapest schedule using exactly `total` transmissions.
pub fn kappa(inst: &Instance, total: usize) -> Result<Kappa, SolveError> {
    let weights = checked_weights(inst)?;
    let k = inst.k();
    if total > k {
        return Err(SolveError::TotalTooLarge { total, k });
    }
    if total + inst.min_packets() < k {
        return Ok(Kappa::Infeasible);
    }
    let d = k - total;
    let order = weight_order(weights);
    let mut memo = vec![None; d + 1];
    Ok(match eval_slack(inst, &order, weights, &mut memo, d) {
        Some(point) => Kappa::Point(point),
        None => Kappa::Infeasible,
    })
}

/// One stage of a grouped exchange: the nodes present so far, the columns
/// they collectively hold, and the transmissions scheduled up to now.
#[derive(Debug, Clone)]
pub struct SloRound {
    /// Original node ids present, in arrival order.
    pub nodes: Vec<usize>,
    /// Original column ids covered this round, ascending.
    pub columns: Vec<usize>,
    pub d: usize,
    /// Cumulative transmission count, equal to the basis size.
    pub min_broadcasts: usize,
    /// Cumulative per-node rates over all original nodes.
    pub rates: Vec<usize>,
    /// Basis over this round's columns; earlier rounds' rows come first.
    pub basis: BasisSet,
    /// Rows added in this round.
    pub new_rows: usize,
}

#[derive(Debug, Clone)]
pub struct SloSolution {
    pub rounds: Vec<SloRound>,
}

/// Staged exchange: groups of nodes arrive in order, each stage reaching
/// universal recovery over the columns present, reusing every transmission
/// already sent. Per stage the best slack is found fresh (capped by the
/// previous stage's slack), then the prior rows seed the construction so
/// the new basis extends the old one. Each extension is re-verified.
pub fn solve_slo(inst: &Instance) -> Result<SloSolution, SolveError> {
    let violations = inst.validate();
    if !violations.is_empty() {
        return Err(SolveError::Invalid(violations));
    }
    let groups = inst.groups().ok_or(SolveError::MissingGroups)?;
    let n = inst.n();
    let mut present: Vec<usize> = Vec::new();
    let mut cum_rates = vec![0usize; n];
    let mut prior_rows: Vec<(crate::model::BitVector, usize)> = Vec::new();
    let mut prior_d = usize::MAX;
    let mut rounds = Vec::with_capacity(groups.len());
    for (gi, group) in groups.iter().enumerate() {
        let round = gi + 1;
        present.extend(group.iter().copied());
        let columns: Vec<usize> = inst.columns_held(&present).ones().collect();
        let sub = inst.subinstance(&present, &columns);
        let order: Vec<usize> = (0..present.len()).collect();
        let d_hi = slack_ceiling(&sub).min(prior_d);
        let (d, _, _) = best_slack(&sub, &order, d_hi);
        let seeds: Vec<(crate::model::BitVector, usize)> = prior_rows
            .iter()
            .map(|(v, sender)| {
                let local = present.iter().position(|&p| p == *sender).unwrap();
                (v.restrict(&columns), local)
            })
            .collect();
        let prior_local: Vec<usize> = present.iter().map(|&p| cum_rates[p]).collect();
        let extended = sdb_extend(&sub, d, &order, &seeds, &prior_local)
            .map_err(|e| SolveError::StaleSeeds { round, d: e.d })?;
        let SdbResult::Found { rates, mut basis } = extended else {
            return Err(SolveError::BadExtension { round });
        };
        if !check_basis(&basis.vectors, d) {
            return Err(SolveError::BadExtension { round });
        }
        for (i, &p) in present.iter().enumerate() {
            cum_rates[p] = rates[i];
        }
        for p in &mut basis.provenance {
            *p = present[*p];
        }
        let new_rows = basis.len() - prior_rows.len();
        prior_rows = basis
            .vectors
            .iter()
            .zip(&basis.provenance)
            .map(|(v, &sender)| (v.embed(&columns, inst.k()), sender))
            .collect();
        prior_d = d;
        rounds.push(SloRound {
            nodes: present.clone(),
            columns,
            d,
            min_broadcasts: basis.len(),
            rates: cum_rates.clone(),
            basis,
            new_rows,
        });
    }
    Ok(SloSolution { rounds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_canonical, sample_weights, BitVector};
    use crate::oracle;
    use rand::{Rng, SeedableRng};

    fn bv(bits: &[u8]) -> BitVector {
        BitVector::from_bools(&bits.iter().map(|&b| b == 1).collect::<Vec<_>>())
    }

    fn example1() -> Instance {
        Instance::new(vec![
            bv(&[1, 1, 1, 1, 1, 1, 0, 0, 0]),
            bv(&[1, 1, 1, 0, 0, 0, 1, 1, 1]),
            bv(&[0, 0, 0, 1, 1, 1, 1, 1, 1]),
            bv(&[1, 0, 1, 0, 0, 1, 0, 1, 0]),
        ])
        .unwrap()
    }

    fn weighted_example() -> Instance {
        Instance::new(vec![
            bv(&[0, 1, 0, 1, 0, 0, 1, 1, 1]),
            bv(&[1, 0, 0, 0, 1, 1, 0, 1, 1]),
            bv(&[0, 1, 1, 0, 0, 1, 0, 1, 1]),
            bv(&[1, 0, 1, 0, 1, 1, 0, 1, 0]),
            bv(&[1, 1, 0, 1, 1, 0, 1, 0, 1]),
        ])
        .unwrap()
        .with_weights(
            [2, 3, 6, 8, 10]
                .iter()
                .map(|&w| Rational::from_integer(w))
                .collect(),
        )
    }

    fn staged_example() -> Instance {
        Instance::new(vec![
            bv(&[1, 1, 1, 1, 0, 0, 0, 0, 0]),
            bv(&[0, 1, 1, 1, 1, 0, 0, 0, 0]),
            bv(&[1, 1, 0, 0, 0, 1, 0, 0, 0]),
            bv(&[0, 0, 1, 1, 0, 0, 1, 0, 0]),
            bv(&[1, 0, 1, 0, 0, 0, 0, 1, 0]),
            bv(&[1, 1, 0, 0, 0, 0, 0, 0, 1]),
        ])
        .unwrap()
        .with_groups(vec![vec![0, 1], vec![2, 3], vec![4, 5]])
    }

    #[test]
    fn minimum_broadcasts_on_worked_instance() {
        let s = solve(&example1()).unwrap();
        assert_eq!(s.min_broadcasts, 5);
        assert_eq!(s.d, 4);
        assert_eq!(s.rates, vec![2, 2, 1, 0]);
        assert_eq!(s.basis.len(), 5);
        assert!(s.report.forced.is_empty());
        assert!(check_basis(&s.basis.vectors, s.d));
        assert!(oracle::feasible(&example1(), &s.rates).unwrap());
    }

    #[test]
    fn normalization_feeds_into_totals() {
        // Column 9 is held by everyone, column 10 only by node 1.
        let mut rows = Vec::new();
        for (i, base) in example1().rows().iter().enumerate() {
            let mut bits = base.to_bools();
            bits.push(true);
            bits.push(i == 1);
            rows.push(BitVector::from_bools(&bits));
        }
        let inst = Instance::new(rows).unwrap();
        let s = solve(&inst).unwrap();
        assert_eq!(s.min_broadcasts, 6);
        assert_eq!(s.d, 4);
        assert_eq!(s.rates, vec![2, 3, 1, 0]);
        assert_eq!(s.core_rates, vec![2, 2, 1, 0]);
        assert_eq!(s.report.removed_universal, vec![9]);
        assert_eq!(s.report.forced, vec![(1, 10)]);
        assert_eq!(s.report.column_map, (0..9).collect::<Vec<_>>());
        assert_eq!(s.core.k(), 9);
    }

    #[test]
    fn plain_solver_matches_exhaustive_search() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x501e);
        for i in 0..150 {
            let n = rng.gen_range(3..=6);
            let k = rng.gen_range(4..=10);
            let inst = sample_canonical(&mut rng, n, k);
            let s = solve(&inst).unwrap();
            let (best, _) = oracle::min_sum_rate(&inst).unwrap();
            assert_eq!(s.min_broadcasts, best, "case {i}: {inst:?}");
            assert!(oracle::feasible(&inst, &s.rates).unwrap(), "case {i}");
            assert!(check_basis(&s.basis.vectors, s.d), "case {i}");
        }
    }

    #[test]
    fn weighted_solver_on_worked_instance() {
        let s = solve_weighted(&weighted_example()).unwrap();
        assert_eq!(s.cost, Rational::from_integer(21));
        assert_eq!(s.total, 7);
        assert_eq!(s.d, 2);
        assert_eq!(s.rates, vec![3, 3, 1, 0, 0]);
        assert!(check_basis(&s.basis.vectors, s.d));
    }

    #[test]
    fn cost_at_fixed_totals_traces_the_curve() {
        let inst = weighted_example();
        let costs: Vec<i64> = (5..=9)
            .map(|total| {
                let Kappa::Point(p) = kappa(&inst, total).unwrap() else {
                    panic!("total {total} should be feasible");
                };
                assert_eq!(p.total, total);
                p.cost.to_integer()
            })
            .collect();
        assert_eq!(costs, vec![29, 22, 21, 23, 25]);
        assert_eq!(kappa(&inst, 4).unwrap(), Kappa::Infeasible);
        assert!(matches!(
            kappa(&inst, 10),
            Err(SolveError::TotalTooLarge { total: 10, k: 9 })
        ));
    }

    #[test]
    fn weighted_preconditions() {
        let no_weights = example1();
        assert!(matches!(
            solve_weighted(&no_weights),
            Err(SolveError::MissingWeights)
        ));

        let zero = example1().with_weights(vec![Rational::from_integer(0); 4]);
        assert!(matches!(solve_weighted(&zero), Err(SolveError::Invalid(_))));

        let mut rows = Vec::new();
        for base in example1().rows() {
            let mut bits = base.to_bools();
            bits.push(true);
            rows.push(BitVector::from_bools(&bits));
        }
        let not_canonical = Instance::new(rows)
            .unwrap()
            .with_weights(vec![Rational::from_integer(1); 4]);
        assert!(matches!(
            solve_weighted(&not_canonical),
            Err(SolveError::NotCanonical)
        ));
    }

    #[test]
    fn weighted_handles_a_node_with_nothing() {
        // An empty row pins the slack ceiling to 0, so the cost search has
        // nothing to bisect and must still evaluate that single point.
        let inst = Instance::new(vec![
            bv(&[1, 1, 1, 1]),
            bv(&[1, 1, 1, 1]),
            bv(&[0, 0, 0, 0]),
        ])
        .unwrap()
        .with_weights(vec![Rational::from_integer(1); 3]);
        let s = solve_weighted(&inst).unwrap();
        assert_eq!((s.d, s.total), (0, 4));
        assert_eq!(s.cost, Rational::from_integer(4));
        let (best, _, _) = oracle::min_weighted_cost(&inst, inst.weights().unwrap()).unwrap();
        assert_eq!(s.cost, best);
    }

    #[test]
    fn weighted_solver_matches_exhaustive_search() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xc057);
        for i in 0..60 {
            let n = rng.gen_range(3..=5);
            let k = rng.gen_range(4..=9);
            let weights = sample_weights(&mut rng, n);
            let inst = sample_canonical(&mut rng, n, k).with_weights(weights.clone());
            let s = solve_weighted(&inst).unwrap();
            let (best, _, _) = oracle::min_weighted_cost(&inst, &weights).unwrap();
            assert_eq!(s.cost, best, "case {i}: {inst:?}");
            assert!(oracle::feasible(&inst, &s.rates).unwrap(), "case {i}");
        }
    }

    #[test]
    fn staged_walkthrough() {
        let inst = staged_example();
        let sol = solve_slo(&inst).unwrap();
        assert_eq!(sol.rounds.len(), 3);

        let r1 = &sol.rounds[0];
        assert_eq!(r1.columns, vec![0, 1, 2, 3, 4]);
        assert_eq!((r1.d, r1.min_broadcasts), (3, 2));
        assert_eq!(r1.rates, vec![1, 1, 0, 0, 0, 0]);

        let r2 = &sol.rounds[1];
        assert_eq!(r2.columns, vec![0, 1, 2, 3, 4, 5, 6]);
        assert_eq!((r2.d, r2.min_broadcasts), (2, 5));
        assert_eq!(r2.rates, vec![2, 1, 1, 1, 0, 0]);
        assert_eq!(r2.new_rows, 3);

        let r3 = &sol.rounds[2];
        assert_eq!(r3.columns, (0..9).collect::<Vec<_>>());
        assert_eq!((r3.d, r3.min_broadcasts), (2, 7));
        assert_eq!(r3.rates, vec![2, 1, 1, 1, 1, 1]);
        assert_eq!(r3.new_rows, 2);
        let supports: Vec<Vec<usize>> = r3
            .basis
            .vectors
            .iter()
            .map(|v| v.ones().collect())
            .collect();
        assert_eq!(
            supports,
            vec![
                vec![0, 1, 2, 3],
                vec![1, 2, 3, 4],
                vec![0, 1, 2],
                vec![0, 1, 5],
                vec![2, 3, 6],
                vec![0, 2, 7],
                vec![0, 1, 8],
            ]
        );
        assert_eq!(r3.basis.provenance, vec![0, 1, 0, 2, 3, 4, 5]);

        // Earlier rows are prefixes of later rounds, senders included.
        for (a, b) in sol.rounds.iter().zip(sol.rounds.iter().skip(1)) {
            assert!(b.d <= a.d);
            for (i, v) in a.basis.vectors.iter().enumerate() {
                let lifted = v.embed(&a.columns, inst.k()).restrict(&b.columns);
                assert_eq!(lifted, b.basis.vectors[i]);
                assert_eq!(a.basis.provenance[i], b.basis.provenance[i]);
            }
        }

        // Cumulative rates reach universal recovery among those present.
        for r in &sol.rounds {
            let sub = inst.subinstance(&r.nodes, &r.columns);
            let local: Vec<usize> = r.nodes.iter().map(|&p| r.rates[p]).collect();
            assert!(oracle::feasible(&sub, &local).unwrap());
            assert_eq!(local.iter().sum::<usize>(), r.min_broadcasts);
        }
    }

    #[test]
    fn first_visited_node_gains_one_rate_per_slack_step() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x1a7e);
        let mut checked = 0;
        for _ in 0..80 {
            let n = rng.gen_range(3..=6);
            let k = rng.gen_range(4..=10);
            let inst = sample_canonical(&mut rng, n, k);
            let order: Vec<usize> = (0..n).collect();
            let mut prev: Option<Vec<usize>> = None;
            for d in (0..=slack_ceiling(&inst)).rev() {
                let found = match sdb(&inst, d, &order) {
                    SdbResult::Found { rates, .. } => Some(rates),
                    SdbResult::NotFound => None,
                };
                if let (Some(hi), Some(lo)) = (&prev, &found) {
                    assert_eq!(lo[0], hi[0] + 1, "slack {d} on {inst:?}");
                    checked += 1;
                }
                prev = found;
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn staged_requires_groups() {
        assert!(matches!(
            solve_slo(&example1()),
            Err(SolveError::MissingGroups)
        ));
    }
}
