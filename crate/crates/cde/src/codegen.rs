//! Turns a basis into concrete field-level transmissions.
//!
//! Every transmission is a linear combination, over GF(2^m), of the packets
//! in one basis row's support. Coefficients come from a Vandermonde matrix
//! on distinct nonzero points: each row's codeword lies in the left kernel
//! of the column block outside its support, which pins its support exactly
//! and keeps any R columns of the finished code independent, so every node
//! holding at least d packets can solve for the rest.
//!
//! Rows wider than d+1 (they appear when a basis extends an earlier one)
//! are built as combinations of the balanced sub-rows covering them, with
//! generator powers separating repeated supports.
//!
//! Construction is verified after the fact: full rank plus column-subset
//! rank checks. On failure the evaluation points are cycled, then the
//! field grows, before giving up.

use crate::basis_search::{candidates, BasisSet};
use crate::gf2m::{Field, FieldError, FieldSpec, Gf};
use crate::linalg::Matrix;
use crate::model::BitVector;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CodegenError {
    #[error("GF(2^{m}) has too few nonzero points for {k} packets")]
    FieldTooSmall { m: u32, k: usize },
    #[error("no verified code found for this basis (slack {d}, {k} packets)")]
    ConstructionFailed { d: usize, k: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// A coding matrix: row i gives the coefficients node `i`'s transmission
/// applies to each packet. Each row carries the basis support it was built
/// for; coefficients outside it are zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CodeFile", into = "CodeFile")]
pub struct CodeMatrix {
    pub field: FieldSpec,
    pub d: usize,
    pub rows: Vec<Vec<Gf>>,
    pub supports: Vec<BitVector>,
}

impl CodeMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn matrix(&self) -> Matrix {
        Matrix::from_rows(self.rows.clone())
    }
}

/// Serialized form: field elements as lowercase hex strings, supports as
/// 0/1 arrays.
#[derive(Serialize, Deserialize, Clone)]
struct CodeFile {
    field: FieldSpec,
    d: usize,
    matrix: Vec<Vec<String>>,
    support: Vec<Vec<u8>>,
}

impl From<CodeMatrix> for CodeFile {
    fn from(code: CodeMatrix) -> CodeFile {
        CodeFile {
            field: code.field,
            d: code.d,
            matrix: code
                .rows
                .iter()
                .map(|r| r.iter().map(|c| format!("{c}")).collect())
                .collect(),
            support: code
                .supports
                .iter()
                .map(|s| s.to_bools().iter().map(|&b| u8::from(b)).collect())
                .collect(),
        }
    }
}

impl TryFrom<CodeFile> for CodeMatrix {
    type Error = String;

    fn try_from(file: CodeFile) -> Result<CodeMatrix, String> {
        let size = 1u32.checked_shl(file.field.m).unwrap_or(0);
        let mut rows = Vec::with_capacity(file.matrix.len());
        let width = file.matrix.first().map_or(0, Vec::len);
        for r in &file.matrix {
            if r.len() != width {
                return Err("ragged coefficient rows".into());
            }
            let mut row = Vec::with_capacity(r.len());
            for s in r {
                let v = u16::from_str_radix(s, 16)
                    .map_err(|_| format!("bad field element {s:?}"))?;
                if u32::from(v) >= size {
                    return Err(format!("element {s:?} outside GF(2^{})", file.field.m));
                }
                row.push(Gf(v));
            }
            rows.push(row);
        }
        if file.support.len() != rows.len() {
            return Err("one support pattern per matrix row required".into());
        }
        let mut supports = Vec::with_capacity(file.support.len());
        for (s, row) in file.support.iter().zip(&rows) {
            if s.len() != width {
                return Err("support width differs from matrix width".into());
            }
            if s.iter().any(|&b| b > 1) {
                return Err("support entries must be 0 or 1".into());
            }
            let bits: Vec<bool> = s.iter().map(|&b| b == 1).collect();
            let support = BitVector::from_bools(&bits);
            if row
                .iter()
                .enumerate()
                .any(|(c, v)| !v.is_zero() && !support.get(c))
            {
                return Err("nonzero coefficient outside declared support".into());
            }
            supports.push(support);
        }
        Ok(CodeMatrix {
            field: file.field,
            d: file.d,
            rows,
            supports,
        })
    }
}

/// rows x k matrix whose l-th row is the l-th power of each point.
pub fn vandermonde(field: &Field, rows: usize, points: &[Gf]) -> Matrix {
    let mut m = Matrix::zeros(rows, points.len());
    for (j, &p) in points.iter().enumerate() {
        let mut acc = Gf::ONE;
        for l in 0..rows {
            m.set(l, j, acc);
            acc = field.mul(acc, p);
        }
    }
    m
}

fn binomial_capped(k: usize, r: usize, cap: u128) -> u128 {
    if r > k {
        return 0;
    }
    let r = r.min(k - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (k - i) as u128 / (i as u128 + 1);
        if acc > cap {
            return cap + 1;
        }
    }
    acc
}

fn all_combinations(k: usize, r: usize, f: &mut impl FnMut(&[usize]) -> bool) -> bool {
    let mut idx: Vec<usize> = (0..r).collect();
    if r == 0 {
        return f(&idx);
    }
    if r > k {
        return true;
    }
    loop {
        if !f(&idx) {
            return false;
        }
        let mut i = r - 1;
        while idx[i] == i + k - r {
            if i == 0 {
                return true;
            }
            i -= 1;
        }
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

const EXHAUSTIVE_SUBSET_LIMIT: u128 = 100_000;
const SAMPLED_SUBSET_TRIALS: usize = 10_000;

/// Every r-column submatrix must be invertible. Exhaustive while the count
/// stays reasonable, otherwise seeded random subsets.
fn submatrices_invertible(field: &Field, a: &Matrix, r: usize) -> bool {
    let k = a.cols();
    let check = |cols: &[usize]| a.columns(cols).rank(field) == r;
    if binomial_capped(k, r, EXHAUSTIVE_SUBSET_LIMIT) <= EXHAUSTIVE_SUBSET_LIMIT {
        return all_combinations(k, r, &mut |cols| check(cols));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xc0de);
    let mut pool: Vec<usize> = (0..k).collect();
    for _ in 0..SAMPLED_SUBSET_TRIALS {
        for i in 0..r {
            let j = rng.gen_range(i..k);
            pool.swap(i, j);
        }
        if !check(&pool[..r]) {
            return false;
        }
    }
    true
}

/// Full soundness check for a code, constructed or parsed back from disk:
/// shape consistency, coefficients confined to the declared supports and
/// field, row count matching width minus d, full rank, and invertibility
/// of every row-count-sized column subset.
pub fn verify_code(field: &Field, code: &CodeMatrix) -> bool {
    let r = code.len();
    let k = code.width();
    if code.field != field.spec() || code.supports.len() != r || r + code.d != k.max(code.d) {
        return false;
    }
    for (row, support) in code.rows.iter().zip(&code.supports) {
        if row.len() != k || support.width() != k {
            return false;
        }
        let confined = row.iter().enumerate().all(|(c, v)| {
            usize::from(v.0) < field.size() && (v.is_zero() || support.get(c))
        });
        if !confined {
            return false;
        }
    }
    let a = code.matrix();
    a.rank(field) == r && submatrices_invertible(field, &a, r)
}

/// One construction attempt at fixed field and point rotation.
fn attempt(field: &Field, basis: &BasisSet, shift: usize) -> Option<CodeMatrix> {
    let k = basis.width();
    let r = basis.len();
    let d = basis.d;
    let points: Vec<Gf> = (0..k).map(|j| Gf((((j + shift) % k) + 1) as u16)).collect();
    let v = vandermonde(field, r, &points);
    let alpha = field.generator();

    let mut rows: Vec<Vec<Gf>> = Vec::with_capacity(r);
    for (i, support) in basis.vectors.iter().enumerate() {
        let occurrence = basis.vectors[..i]
            .iter()
            .filter(|u| *u == support)
            .count();
        let subs = if support.weight() == d + 1 {
            vec![support.clone()]
        } else {
            candidates(support, d)
        };
        let mut x = vec![Gf::ZERO; r];
        for (j, sub) in subs.iter().enumerate() {
            let zero_cols: Vec<usize> = (0..k).filter(|&c| !sub.get(c)).collect();
            let kernel = v.columns(&zero_cols).left_kernel_vector(field).ok()?;
            let coeff = field.pow(alpha, occurrence * j);
            for (xi, ki) in x.iter_mut().zip(&kernel) {
                *xi = field.add(*xi, field.mul(coeff, *ki));
            }
        }
        let codeword = v.vec_mul(field, &x);
        debug_assert!(codeword
            .iter()
            .enumerate()
            .all(|(c, v)| support.get(c) || v.is_zero()));
        rows.push(codeword);
    }

    let code = CodeMatrix {
        field: field.spec(),
        d,
        rows,
        supports: basis.vectors.clone(),
    };
    verify_code(field, &code).then_some(code)
}

fn smallest_degree(k: usize) -> u32 {
    let mut m = 1;
    while (1usize << m) <= k {
        m += 1;
    }
    m
}

/// Build a verified code for the basis. With `field` given, only the
/// evaluation points are cycled; otherwise the field also grows on demand,
/// starting from the smallest degree with more nonzero points than packets.
pub fn build_code(basis: &BasisSet, field: Option<FieldSpec>) -> Result<CodeMatrix, CodegenError> {
    let k = basis.width();
    let d = basis.d;
    let shifts = k.max(1);
    match field {
        Some(spec) => {
            let field = Field::new(spec)?;
            if field.size() <= k {
                return Err(CodegenError::FieldTooSmall { m: spec.m, k });
            }
            for shift in 0..shifts {
                if let Some(code) = attempt(&field, basis, shift) {
                    return Ok(code);
                }
            }
            Err(CodegenError::ConstructionFailed { d, k })
        }
        None => {
            for m in smallest_degree(k)..=16 {
                let field = Field::with_default_poly(m)?;
                for shift in 0..shifts {
                    if let Some(code) = attempt(&field, basis, shift) {
                        return Ok(code);
                    }
                }
            }
            Err(CodegenError::ConstructionFailed { d, k })
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("{known} known packets, but decoding needs at least {need}")]
    InsufficientKnowledge { known: usize, need: usize },
    #[error("received {got} symbols for a {expected}-row code")]
    WrongRowCount { got: usize, expected: usize },
    #[error("received word is inconsistent with the code")]
    Unsolvable,
}

/// All transmitted symbols for one packet vector.
pub fn encode(field: &Field, code: &CodeMatrix, payload: &[Gf]) -> Vec<Gf> {
    assert_eq!(payload.len(), code.width());
    code.matrix().mul_vec(field, payload)
}

/// Recover the full packet vector from own packets plus received symbols.
/// `known_values` is read only at positions set in `known`.
pub fn decode(
    field: &Field,
    code: &CodeMatrix,
    known: &BitVector,
    known_values: &[Gf],
    received: &[Gf],
) -> Result<Vec<Gf>, DecodeError> {
    let k = code.width();
    let r = code.len();
    assert_eq!(known.width(), k);
    assert_eq!(known_values.len(), k);
    if received.len() != r {
        return Err(DecodeError::WrongRowCount {
            got: received.len(),
            expected: r,
        });
    }
    let missing: Vec<usize> = (0..k).filter(|&c| !known.get(c)).collect();
    if missing.len() > r {
        return Err(DecodeError::InsufficientKnowledge {
            known: known.weight(),
            need: k - r,
        });
    }
    let mut payload = vec![Gf::ZERO; k];
    for c in known.ones() {
        payload[c] = known_values[c];
    }
    if missing.is_empty() {
        return Ok(payload);
    }
    let a = code.matrix();
    let rhs: Vec<Gf> = (0..r)
        .map(|i| {
            let mut acc = received[i];
            for c in known.ones() {
                acc = field.add(acc, field.mul(a.at(i, c), payload[c]));
            }
            acc
        })
        .collect();
    let solved = a
        .columns(&missing)
        .solve(field, &rhs)
        .map_err(|_| DecodeError::Unsolvable)?;
    for (&c, &v) in missing.iter().zip(&solved) {
        payload[c] = v;
    }
    Ok(payload)
}

/// Simulate the exchange end to end: random packet vectors are encoded and
/// every listed node must decode them from its own side information.
pub fn verify_universal_recovery(
    field: &Field,
    code: &CodeMatrix,
    sides: &[BitVector],
    trials: usize,
    seed: u64,
) -> bool {
    let k = code.width();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let payload: Vec<Gf> = (0..k)
            .map(|_| Gf(rng.gen_range(0..field.size()) as u16))
            .collect();
        let sent = encode(field, code, &payload);
        for side in sides {
            let mut visible = vec![Gf::ZERO; k];
            for c in side.ones() {
                visible[c] = payload[c];
            }
            match decode(field, code, side, &visible, &sent) {
                Ok(out) if out == payload => {}
                _ => return false,
            }
        }
    }
    true
}
