//! Greedy search for d-basis sets.
//!
//! A d-basis over K columns is a set of K-d binary vectors in which every
//! nonempty subset S covers at least |S| + d columns. Each vector is a
//! transmission: a node combines d+1 of its packets; the subset condition
//! is exactly what lets a Vandermonde-seeded code realize the pattern.
//!
//! The search scans nodes in a caller-chosen order, proposes for each node
//! the candidate vectors built from its first d held packets plus one more,
//! and tracks saturated "regions" (merged pool vectors) to reject proposals
//! that would overfill a span. Merging follows the pairwise rule: regions
//! fuse while the union's capacity is no larger than the rows it absorbs.

use crate::model::{BitVector, Instance};
use rand::{Rng, SeedableRng};

/// Search outcome: the rate vector counts accepted candidates per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SdbResult {
    Found { rates: Vec<usize>, basis: BasisSet },
    NotFound,
}

impl SdbResult {
    pub fn found(&self) -> Option<(&Vec<usize>, &BasisSet)> {
        match self {
            SdbResult::Found { rates, basis } => Some((rates, basis)),
            SdbResult::NotFound => None,
        }
    }
}

/// Basis vectors plus the node that contributed each one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisSet {
    pub d: usize,
    pub vectors: Vec<BitVector>,
    pub provenance: Vec<usize>,
}

impl BasisSet {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn width(&self) -> usize {
        self.vectors.first().map_or(0, BitVector::width)
    }

    /// Every vector has weight exactly d + 1.
    pub fn is_balanced(&self) -> bool {
        self.vectors.iter().all(|v| v.weight() == self.d + 1)
    }
}

/// The candidate vectors of `u` at slack `d`: the first d set positions of
/// `u` joined with each later set position in turn. Empty when w(u) <= d.
pub fn candidates(u: &BitVector, d: usize) -> Vec<BitVector> {
    let ones: Vec<usize> = u.ones().collect();
    if ones.len() <= d {
        return Vec::new();
    }
    (d..ones.len())
        .map(|i| {
            let mut v = BitVector::from_indices(u.width(), &ones[..d]);
            v.set(ones[i], true);
            v
        })
        .collect()
}

/// True when `v` lies inside the span of `u`, i.e. support(v) ⊆ support(u).
pub fn generates(u: &BitVector, v: &BitVector) -> bool {
    v.is_subset_of(u)
}

/// Pairwise merge test for saturated pool vectors:
/// w(OR(S) ∨ b) <= Σ w(q_i) + w(b) - |S| d, with |S| limited to 2.
pub fn should_merge(pool_subset: &[&BitVector], b: &BitVector, d: usize) -> bool {
    assert!((1..=2).contains(&pool_subset.len()));
    let mut or = b.clone();
    let mut bound = b.weight();
    for q in pool_subset {
        or.or_assign(q);
        bound += q.weight() - d;
    }
    or.weight() <= bound
}

/// A merged pool vector: its support is the OR of the basis rows absorbed
/// into it, and it can hold at most w(support) - d rows.
struct Region {
    support: BitVector,
    absorbed: Vec<usize>,
}

impl Region {
    fn capacity(&self, d: usize) -> usize {
        self.support.weight() - d
    }

    fn slack(&self, d: usize) -> usize {
        self.capacity(d) - self.absorbed.len()
    }
}

struct Search {
    d: usize,
    target: usize,
    vectors: Vec<BitVector>,
    provenance: Vec<usize>,
    pool: Vec<Region>,
}

enum Accept {
    Taken,
    Rejected,
}

impl Search {
    fn new(inst: &Instance, d: usize) -> Search {
        Search {
            d,
            target: inst.k().saturating_sub(d),
            vectors: Vec::new(),
            provenance: Vec::new(),
            pool: Vec::new(),
        }
    }

    /// Would absorbing `b` into `region` keep every subset of its rows legal?
    fn absorb_ok(&self, region: &Region, b: &BitVector) -> bool {
        // Subsets of the absorbed rows, smallest unions first is irrelevant:
        // all must satisfy w(OR ∨ b) >= |S| + 1 + d.
        let rows = &region.absorbed;
        let mut ors: Vec<BitVector> = Vec::with_capacity(1 << rows.len());
        ors.push(BitVector::new(b.width()));
        for mask in 1usize..1 << rows.len() {
            let low = mask.trailing_zeros() as usize;
            let or = ors[mask & (mask - 1)].or(&self.vectors[rows[low]]);
            let need = mask.count_ones() as usize + 1 + self.d;
            if or.or(b).weight() < need {
                return false;
            }
            ors.push(or);
        }
        true
    }

    fn offer(&mut self, b: &BitVector, sender: usize) -> Accept {
        let mut home: Option<usize> = None;
        for (i, region) in self.pool.iter().enumerate() {
            if generates(&region.support, b) {
                if region.slack(self.d) == 0 {
                    return Accept::Rejected;
                }
                if home.is_none() {
                    home = Some(i);
                }
            }
        }
        if let Some(i) = home {
            if !self.absorb_ok(&self.pool[i], b) {
                return Accept::Rejected;
            }
        }
        let index = self.vectors.len();
        self.vectors.push(b.clone());
        self.provenance.push(sender);
        let region = match home {
            Some(i) => {
                let mut region = self.pool.remove(i);
                region.absorbed.push(index);
                region
            }
            None => Region {
                support: b.clone(),
                absorbed: vec![index],
            },
        };
        self.merge_cascade(region);
        Accept::Taken
    }

    /// Fuse the held region with pool members while capacity allows: single
    /// partners first, then pairs, each in pool insertion order, restarting
    /// after every fuse. The settled region joins the pool at the end.
    fn merge_cascade(&mut self, mut cur: Region) {
        'restart: loop {
            for i in 0..self.pool.len() {
                if self.mergeable(&[i], &cur) {
                    let other = self.pool.remove(i);
                    cur = self.fuse(cur, vec![other]);
                    continue 'restart;
                }
            }
            for i in 0..self.pool.len() {
                for j in i + 1..self.pool.len() {
                    if self.mergeable(&[i, j], &cur) {
                        let second = self.pool.remove(j);
                        let first = self.pool.remove(i);
                        cur = self.fuse(cur, vec![first, second]);
                        continue 'restart;
                    }
                }
            }
            break;
        }
        self.pool.push(cur);
    }

    fn mergeable(&self, members: &[usize], cur: &Region) -> bool {
        let mut or = cur.support.clone();
        let mut absorbed = cur.absorbed.len();
        for &i in members {
            or.or_assign(&self.pool[i].support);
            absorbed += self.pool[i].absorbed.len();
        }
        or.weight() - self.d <= absorbed
    }

    fn fuse(&self, mut cur: Region, others: Vec<Region>) -> Region {
        for o in others {
            cur.support.or_assign(&o.support);
            cur.absorbed.extend(o.absorbed);
        }
        debug_assert!(cur.absorbed.len() <= cur.capacity(self.d));
        cur
    }

    fn finish(self, rates: Vec<usize>) -> SdbResult {
        SdbResult::Found {
            rates,
            basis: BasisSet {
                d: self.d,
                vectors: self.vectors,
                provenance: self.provenance,
            },
        }
    }
}

/// Greedy basis search at slack `d`, visiting nodes in `order`.
pub fn sdb(inst: &Instance, d: usize, order: &[usize]) -> SdbResult {
    sdb_extend(inst, d, order, &[], &vec![0; inst.n()]).expect("no seeds to conflict")
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("seed row {index} cannot be placed at slack {d}")]
pub struct SeedConflict {
    pub index: usize,
    pub d: usize,
}

/// Basis search that starts from rows already fixed by earlier rounds.
///
/// Seeds enter the pool first, in order, keeping their (possibly heavier
/// than d+1) supports; their senders' rates arrive in `prior_rates`. New
/// candidates then fill the remaining capacity. Seeds that cannot legally
/// coexist at this slack are reported, not dropped.
pub fn sdb_extend(
    inst: &Instance,
    d: usize,
    order: &[usize],
    seeds: &[(BitVector, usize)],
    prior_rates: &[usize],
) -> Result<SdbResult, SeedConflict> {
    assert_eq!(prior_rates.len(), inst.n());
    if d >= inst.k() && !(inst.k() == 0 && seeds.is_empty()) {
        return Ok(SdbResult::NotFound);
    }
    let mut search = Search::new(inst, d);
    for (index, (v, sender)) in seeds.iter().enumerate() {
        match search.offer(v, *sender) {
            Accept::Taken => {}
            Accept::Rejected => return Err(SeedConflict { index, d }),
        }
    }
    let mut rates = prior_rates.to_vec();
    if search.vectors.len() == search.target {
        return Ok(search.finish(rates));
    }
    for &node in order {
        for b in candidates(inst.row(node), d) {
            if let Accept::Taken = search.offer(&b, node) {
                rates[node] += 1;
                if search.vectors.len() == search.target {
                    return Ok(search.finish(rates));
                }
            }
        }
    }
    Ok(SdbResult::NotFound)
}

/// Independent validity check: every nonempty subset S of `vectors` must
/// cover at least |S| + d columns. Exhaustive up to 20 vectors, seeded
/// random subsets beyond that.
pub fn check_basis(vectors: &[BitVector], d: usize) -> bool {
    let n = vectors.len();
    if n == 0 {
        return true;
    }
    if n <= 20 {
        if vectors[0].width() <= 64 {
            let packed: Vec<u64> = vectors
                .iter()
                .map(|v| v.ones().fold(0u64, |acc, i| acc | 1 << i))
                .collect();
            let mut ors = vec![0u64; 1 << n];
            for mask in 1usize..1 << n {
                let low = mask.trailing_zeros() as usize;
                let or = ors[mask & (mask - 1)] | packed[low];
                ors[mask] = or;
                if (or.count_ones() as usize) < mask.count_ones() as usize + d {
                    return false;
                }
            }
            return true;
        }
        for mask in 1usize..1 << n {
            let mut or = BitVector::new(vectors[0].width());
            for (i, v) in vectors.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    or.or_assign(v);
                }
            }
            if or.weight() < mask.count_ones() as usize + d {
                return false;
            }
        }
        return true;
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5db);
    for _ in 0..100_000 {
        let mut or = BitVector::new(vectors[0].width());
        let mut size = 0;
        for v in vectors {
            if rng.gen_bool(0.5) {
                or.or_assign(v);
                size += 1;
            }
        }
        if size > 0 && or.weight() < size + d {
            return false;
        }
    }
    true
}
