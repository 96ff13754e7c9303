//! Packet distribution instances: who holds which packet, at what weight,
//! in which group.
//!
//! Columns are packets, rows are nodes. A canonical instance has every
//! column held by at least two nodes and missed by at least one; universal
//! and single-owner columns carry no information for the exchange and are
//! split off by [`Instance::normalize`].

use num_rational::Ratio;
use serde::Deserialize;
use thiserror::Error;

pub type Rational = Ratio<i64>;

/// Fixed-width bit row backed by u64 words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    width: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn new(width: usize) -> BitVector {
        BitVector {
            width,
            words: vec![0; width.div_ceil(64)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> BitVector {
        let mut v = BitVector::new(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.set(i, true);
            }
        }
        v
    }

    pub fn from_indices(width: usize, ones: &[usize]) -> BitVector {
        let mut v = BitVector::new(width);
        for &i in ones {
            v.set(i, true);
        }
        v
    }

    pub fn unit(width: usize, pos: usize) -> BitVector {
        BitVector::from_indices(width, &[pos])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.width);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, b: bool) {
        assert!(i < self.width);
        if b {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn or(&self, other: &BitVector) -> BitVector {
        assert_eq!(self.width, other.width);
        BitVector {
            width: self.width,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a | b)
                .collect(),
        }
    }

    pub fn or_assign(&mut self, other: &BitVector) {
        assert_eq!(self.width, other.width);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    /// True when every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BitVector) -> bool {
        assert_eq!(self.width, other.width);
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Indices of set bits, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + bit)
            })
        })
    }

    /// Keep only the listed columns, in the order given.
    pub fn restrict(&self, cols: &[usize]) -> BitVector {
        let mut v = BitVector::new(cols.len());
        for (new, &old) in cols.iter().enumerate() {
            if self.get(old) {
                v.set(new, true);
            }
        }
        v
    }

    /// Spread bit j of `self` to position `cols[j]` of a wider vector.
    pub fn embed(&self, cols: &[usize], width: usize) -> BitVector {
        assert_eq!(self.width, cols.len());
        let mut v = BitVector::new(width);
        for (j, &old) in cols.iter().enumerate() {
            if self.get(j) {
                v.set(old, true);
            }
        }
        v
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.width).map(|i| self.get(i)).collect()
    }
}

impl std::fmt::Debug for BitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.width {
            write!(f, "{}", u8::from(self.get(i)))?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("instance needs at least one node")]
    NoNodes,
    #[error("node {node}: row width {got} differs from {expected}")]
    RowWidth {
        node: usize,
        got: usize,
        expected: usize,
    },
    #[error("declared {field}={declared} but file carries {got}")]
    DeclaredSize {
        field: &'static str,
        declared: usize,
        got: usize,
    },
    #[error("matrix entry at node {node}, packet {col} is not 0 or 1")]
    NotBinary { node: usize, col: usize },
    #[error("weight {index} is not a finite positive number")]
    BadWeight { index: usize },
    #[error("group {group} lists node {node}, outside 1..={n}")]
    GroupNodeRange { group: usize, node: usize, n: usize },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Reasons an instance cannot be solved as given.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Packet held by no node: collective omniscience is impossible.
    EmptyColumn(usize),
    NonPositiveWeight(usize),
    WeightCount { expected: usize, got: usize },
    EmptyGroup(usize),
    NodeInNoGroup(usize),
    NodeInTwoGroups(usize),
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::EmptyColumn(c) => write!(f, "packet {} is held by no node", c + 1),
            Violation::NonPositiveWeight(i) => write!(f, "weight of node {} is not positive", i + 1),
            Violation::WeightCount { expected, got } => {
                write!(f, "expected {expected} weights, got {got}")
            }
            Violation::EmptyGroup(g) => write!(f, "group {} is empty", g + 1),
            Violation::NodeInNoGroup(i) => write!(f, "node {} appears in no group", i + 1),
            Violation::NodeInTwoGroups(i) => write!(f, "node {} appears in two groups", i + 1),
        }
    }
}

/// Which original packets a normalized instance dropped, and why.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NormalizationReport {
    /// Original column indices held by every node.
    pub removed_universal: Vec<usize>,
    /// (node, original column) pairs where only that node holds the packet;
    /// each costs one uncoded transmission on top of the core solution.
    pub forced: Vec<(usize, usize)>,
    /// Original column index for each retained column.
    pub column_map: Vec<usize>,
}

/// One cooperative data exchange problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    rows: Vec<BitVector>,
    weights: Option<Vec<Rational>>,
    groups: Option<Vec<Vec<usize>>>,
}

impl Instance {
    pub fn new(rows: Vec<BitVector>) -> Result<Instance, ModelError> {
        let Some(first) = rows.first() else {
            return Err(ModelError::NoNodes);
        };
        let expected = first.width();
        for (node, r) in rows.iter().enumerate() {
            if r.width() != expected {
                return Err(ModelError::RowWidth {
                    node,
                    got: r.width(),
                    expected,
                });
            }
        }
        Ok(Instance {
            rows,
            weights: None,
            groups: None,
        })
    }

    pub fn with_weights(mut self, weights: Vec<Rational>) -> Instance {
        self.weights = Some(weights);
        self
    }

    pub fn with_groups(mut self, groups: Vec<Vec<usize>>) -> Instance {
        self.groups = Some(groups);
        self
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.rows[0].width()
    }

    pub fn row(&self, node: usize) -> &BitVector {
        &self.rows[node]
    }

    pub fn rows(&self) -> &[BitVector] {
        &self.rows
    }

    pub fn weights(&self) -> Option<&[Rational]> {
        self.weights.as_deref()
    }

    pub fn groups(&self) -> Option<&[Vec<usize>]> {
        self.groups.as_deref()
    }

    /// Smallest per-node packet count.
    pub fn min_packets(&self) -> usize {
        self.rows.iter().map(BitVector::weight).min().unwrap()
    }

    pub fn max_packets(&self) -> usize {
        self.rows.iter().map(BitVector::weight).max().unwrap()
    }

    /// Union of the rows of `nodes`.
    pub fn columns_held(&self, nodes: &[usize]) -> BitVector {
        let mut u = BitVector::new(self.k());
        for &i in nodes {
            u.or_assign(&self.rows[i]);
        }
        u
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let union = self.columns_held(&(0..self.n()).collect::<Vec<_>>());
        for c in 0..self.k() {
            if !union.get(c) {
                out.push(Violation::EmptyColumn(c));
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != self.n() {
                out.push(Violation::WeightCount {
                    expected: self.n(),
                    got: w.len(),
                });
            }
            for (i, wi) in w.iter().enumerate() {
                if *wi <= Rational::from_integer(0) {
                    out.push(Violation::NonPositiveWeight(i));
                }
            }
        }
        if let Some(groups) = &self.groups {
            let mut seen = vec![0usize; self.n()];
            for (g, members) in groups.iter().enumerate() {
                if members.is_empty() {
                    out.push(Violation::EmptyGroup(g));
                }
                for &i in members {
                    seen[i] += 1;
                }
            }
            for (i, &count) in seen.iter().enumerate() {
                if count == 0 {
                    out.push(Violation::NodeInNoGroup(i));
                } else if count > 1 {
                    out.push(Violation::NodeInTwoGroups(i));
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Every column held by 2..=N-1 nodes.
    pub fn is_canonical(&self) -> bool {
        (0..self.k()).all(|c| {
            let owners = self.rows.iter().filter(|r| r.get(c)).count();
            owners >= 2 && owners < self.n()
        })
    }

    /// Strip universal and single-owner columns. Idempotent; weights and
    /// groups carry over untouched since the node set is unchanged.
    pub fn normalize(&self) -> (Instance, NormalizationReport) {
        let mut report = NormalizationReport::default();
        for c in 0..self.k() {
            let owners: Vec<usize> = (0..self.n()).filter(|&i| self.rows[i].get(c)).collect();
            if owners.len() == self.n() {
                report.removed_universal.push(c);
            } else if owners.len() == 1 {
                report.forced.push((owners[0], c));
            } else {
                report.column_map.push(c);
            }
        }
        let rows = self
            .rows
            .iter()
            .map(|r| r.restrict(&report.column_map))
            .collect();
        let inst = Instance {
            rows,
            weights: self.weights.clone(),
            groups: self.groups.clone(),
        };
        (inst, report)
    }

    /// Rows `nodes` restricted to columns `cols`, dropping weights and groups.
    pub fn subinstance(&self, nodes: &[usize], cols: &[usize]) -> Instance {
        Instance {
            rows: nodes.iter().map(|&i| self.rows[i].restrict(cols)).collect(),
            weights: None,
            groups: None,
        }
    }
}

#[derive(Deserialize)]
struct InstanceFile {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    matrix: Vec<Vec<u8>>,
    #[serde(default)]
    weights: Option<Vec<serde_json::Number>>,
    #[serde(default)]
    groups: Option<Vec<Vec<usize>>>,
}

/// Parse the on-disk JSON shape. Node and packet indices in the file are
/// 1-based; everything in memory is 0-based.
pub fn instance_from_json(s: &str) -> Result<Instance, ModelError> {
    let file: InstanceFile = serde_json::from_str(s)?;
    if file.matrix.len() != file.n {
        return Err(ModelError::DeclaredSize {
            field: "N",
            declared: file.n,
            got: file.matrix.len(),
        });
    }
    let mut rows = Vec::with_capacity(file.n);
    for (node, row) in file.matrix.iter().enumerate() {
        if row.len() != file.k {
            return Err(ModelError::DeclaredSize {
                field: "K",
                declared: file.k,
                got: row.len(),
            });
        }
        let mut v = BitVector::new(file.k);
        for (col, &cell) in row.iter().enumerate() {
            match cell {
                0 => {}
                1 => v.set(col, true),
                _ => return Err(ModelError::NotBinary { node, col }),
            }
        }
        rows.push(v);
    }
    let mut inst = Instance::new(rows)?;
    if let Some(nums) = file.weights {
        let mut weights = Vec::with_capacity(nums.len());
        for (index, num) in nums.iter().enumerate() {
            let r = if let Some(i) = num.as_i64() {
                Some(Rational::from_integer(i))
            } else {
                num.as_f64().and_then(Rational::approximate_float)
            };
            weights.push(r.ok_or(ModelError::BadWeight { index })?);
        }
        inst = inst.with_weights(weights);
    }
    if let Some(groups) = file.groups {
        let mut converted = Vec::with_capacity(groups.len());
        for (g, members) in groups.iter().enumerate() {
            let mut zero_based = Vec::with_capacity(members.len());
            for &node in members {
                if node == 0 || node > file.n {
                    return Err(ModelError::GroupNodeRange {
                        group: g + 1,
                        node,
                        n: file.n,
                    });
                }
                zero_based.push(node - 1);
            }
            converted.push(zero_based);
        }
        inst = inst.with_groups(converted);
    }
    Ok(inst)
}

/// Uniform canonical instance for randomized suites: every column gets
/// 2..=n-1 distinct owners. Needs n >= 3.
pub fn sample_canonical(rng: &mut impl rand::Rng, n: usize, k: usize) -> Instance {
    assert!(n >= 3);
    let mut rows = vec![BitVector::new(k); n];
    for c in 0..k {
        let owners = rng.gen_range(2..n);
        let mut pool: Vec<usize> = (0..n).collect();
        for _ in 0..owners {
            let pick = rng.gen_range(0..pool.len());
            rows[pool.swap_remove(pick)].set(c, true);
        }
    }
    Instance::new(rows).unwrap()
}

/// Companion weight sampler: small positive integers.
pub fn sample_weights(rng: &mut impl rand::Rng, n: usize) -> Vec<Rational> {
    (0..n)
        .map(|_| Rational::from_integer(rng.gen_range(1..=20)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn bv(bits: &[u8]) -> BitVector {
        BitVector::from_bools(&bits.iter().map(|&b| b == 1).collect::<Vec<_>>())
    }

    #[test]
    fn bitvector_basics() {
        let a = bv(&[1, 1, 0, 1, 0, 0, 1, 0, 0]);
        assert_eq!(a.weight(), 4);
        assert_eq!(a.ones().collect::<Vec<_>>(), vec![0, 1, 3, 6]);
        let b = bv(&[1, 0, 0, 1, 0, 0, 0, 0, 0]);
        assert!(b.is_subset_of(&a));
        assert!(!a.is_subset_of(&b));
        assert_eq!(a.or(&b), a);
        assert_eq!(bv(&[0, 0, 0]).weight(), 0);
        assert!(bv(&[0, 0, 0]).is_zero());
    }

    #[test]
    fn bitvector_wide_words() {
        let ones: Vec<usize> = vec![0, 63, 64, 65, 129];
        let v = BitVector::from_indices(130, &ones);
        assert_eq!(v.weight(), 5);
        assert_eq!(v.ones().collect::<Vec<_>>(), ones);
        let mut u = BitVector::new(130);
        u.set(64, true);
        assert!(u.is_subset_of(&v));
    }

    #[test]
    fn restrict_and_embed_roundtrip() {
        let v = bv(&[1, 0, 1, 1, 0, 1]);
        let cols = [0, 2, 4, 5];
        let r = v.restrict(&cols);
        assert_eq!(r, bv(&[1, 1, 0, 1]));
        let back = r.embed(&cols, 6);
        assert_eq!(back, bv(&[1, 0, 1, 0, 0, 1]));
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

    #[test]
    fn example1_shape() {
        let inst = example1();
        assert_eq!((inst.n(), inst.k()), (4, 9));
        assert!(inst.is_valid());
        assert!(inst.is_canonical());
        assert_eq!(inst.min_packets(), 4);
        assert_eq!(inst.max_packets(), 6);
    }

    #[test]
    fn validation_diagnostics() {
        let inst = Instance::new(vec![bv(&[1, 0, 0]), bv(&[1, 0, 1]), bv(&[1, 0, 1])]).unwrap();
        assert_eq!(inst.validate(), vec![Violation::EmptyColumn(1)]);

        let weighted = inst
            .clone()
            .with_weights(vec![Rational::from_integer(0), Rational::from_integer(2)]);
        let v = weighted.validate();
        assert!(v.contains(&Violation::WeightCount { expected: 3, got: 2 }));
        assert!(v.contains(&Violation::NonPositiveWeight(0)));

        let grouped = inst.with_groups(vec![vec![0, 1], vec![1]]);
        let v = grouped.validate();
        assert!(v.contains(&Violation::NodeInTwoGroups(1)));
        assert!(v.contains(&Violation::NodeInNoGroup(2)));
    }

    #[test]
    fn normalize_strips_universal_and_singleton() {
        // col 0 universal, col 2 only at node 1, col 4 only at node 2.
        let inst = Instance::new(vec![
            bv(&[1, 1, 0, 1, 0]),
            bv(&[1, 1, 1, 0, 0]),
            bv(&[1, 0, 0, 1, 1]),
        ])
        .unwrap();
        let (core, report) = inst.normalize();
        assert_eq!(report.removed_universal, vec![0]);
        assert_eq!(report.forced, vec![(1, 2), (2, 4)]);
        assert_eq!(report.column_map, vec![1, 3]);
        assert_eq!(core.k(), 2);
        assert!(core.is_canonical());

        let (again, second) = core.normalize();
        assert_eq!(again, core);
        assert!(second.removed_universal.is_empty() && second.forced.is_empty());
        assert_eq!(second.column_map, vec![0, 1]);
    }

    #[test]
    fn normalize_of_canonical_is_identity() {
        let inst = example1();
        let (core, report) = inst.normalize();
        assert_eq!(core, inst);
        assert_eq!(report.column_map, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn json_instance_parses() {
        let text = r#"{
            "N": 3, "K": 4,
            "matrix": [[1,1,0,0],[0,1,1,0],[1,0,1,1]],
            "weights": [2, 3.5, 6],
            "groups": [[1,2],[3]]
        }"#;
        let inst = instance_from_json(text).unwrap();
        assert_eq!((inst.n(), inst.k()), (3, 4));
        assert!(inst.row(2).get(3));
        assert_eq!(
            inst.weights().unwrap()[1],
            Rational::new(7, 2)
        );
        assert_eq!(inst.groups().unwrap(), &[vec![0, 1], vec![2]]);
    }

    #[test]
    fn json_instance_shape_errors() {
        assert!(matches!(
            instance_from_json(r#"{"N":2,"K":2,"matrix":[[1,1]]}"#),
            Err(ModelError::DeclaredSize { field: "N", .. })
        ));
        assert!(matches!(
            instance_from_json(r#"{"N":1,"K":2,"matrix":[[1,1,0]]}"#),
            Err(ModelError::DeclaredSize { field: "K", .. })
        ));
        assert!(matches!(
            instance_from_json(r#"{"N":1,"K":2,"matrix":[[1,2]]}"#),
            Err(ModelError::NotBinary { node: 0, col: 1 })
        ));
        assert!(matches!(
            instance_from_json(r#"{"N":2,"K":1,"matrix":[[1],[1]],"groups":[[0],[1,2]]}"#),
            Err(ModelError::GroupNodeRange { node: 0, .. })
        ));
    }

    #[test]
    fn sampler_is_canonical_and_deterministic() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(3..=6);
            let k = rng.gen_range(4..=10);
            let inst = sample_canonical(&mut rng, n, k);
            assert!(inst.is_canonical());
            assert!(inst.is_valid());
        }
        let mut a = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut b = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        assert_eq!(sample_canonical(&mut a, 5, 8), sample_canonical(&mut b, 5, 8));
    }
}
