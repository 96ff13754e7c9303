//! GF(2^m) arithmetic over log/antilog tables, m up to 16.
//!
//! Addition is XOR. Multiplication walks the cycle of the primitive element
//! x once at construction time; the walk doubles as the primitivity check,
//! so a `Field` can only be built from a genuinely primitive polynomial.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Degree and primitive polynomial picking out one concrete GF(2^m).
///
/// The polynomial is stored as a bit pattern with bit i for x^i, so
/// x^4 + x + 1 is 0b1_0011.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub m: u32,
    pub poly: u32,
}

/// Standard primitive polynomials, indexed by m - 1.
const DEFAULT_POLYS: [u32; 16] = [
    0b11,                    // x + 1
    0b111,                   // x^2 + x + 1
    0b1011,                  // x^3 + x + 1
    0b1_0011,                // x^4 + x + 1
    0b10_0101,               // x^5 + x^2 + 1
    0b100_0011,              // x^6 + x + 1
    0b1000_1001,             // x^7 + x^3 + 1
    0b1_0001_1101,           // x^8 + x^4 + x^3 + x^2 + 1
    0b10_0001_0001,          // x^9 + x^4 + 1
    0b100_0000_1001,         // x^10 + x^3 + 1
    0b1000_0000_0101,        // x^11 + x^2 + 1
    0b1_0000_0101_0011,      // x^12 + x^6 + x^4 + x + 1
    0b10_0000_0001_1011,     // x^13 + x^4 + x^3 + x + 1
    0b100_0100_0100_0011,    // x^14 + x^10 + x^6 + x + 1
    0b1000_0000_0000_0011,   // x^15 + x + 1
    0b1_0001_0000_0000_1011, // x^16 + x^12 + x^3 + x + 1
];

impl FieldSpec {
    /// The stock polynomial for a given degree.
    pub fn with_default_poly(m: u32) -> Result<FieldSpec, FieldError> {
        if m == 0 || m > 16 {
            return Err(FieldError::UnsupportedDegree(m));
        }
        Ok(FieldSpec {
            m,
            poly: DEFAULT_POLYS[m as usize - 1],
        })
    }
}

/// A value in the ambient field, always < 2^m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Gf(pub u16);

impl Gf {
    pub const ZERO: Gf = Gf(0);
    pub const ONE: Gf = Gf(1);

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl std::fmt::Display for Gf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:x}", self.0)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FieldError {
    #[error("field degree {0} outside 1..=16")]
    UnsupportedDegree(u32),
    #[error("polynomial {0:#b} must have bit m and bit 0 set")]
    MalformedPolynomial(u32),
    #[error("polynomial {0:#b} is not primitive")]
    NotPrimitive(u32),
    #[error("zero has no multiplicative inverse")]
    DivisionByZero,
}

/// Arithmetic tables for one GF(2^m).
#[derive(Debug, Clone)]
pub struct Field {
    spec: FieldSpec,
    qm1: usize,
    exp: Vec<u16>, // doubled so products of two logs never wrap
    log: Vec<u16>,
}

fn xtime(a: u32, m: u32, poly: u32) -> u32 {
    let s = a << 1;
    if s >> m & 1 == 1 {
        s ^ poly
    } else {
        s
    }
}

impl Field {
    pub fn new(spec: FieldSpec) -> Result<Field, FieldError> {
        let FieldSpec { m, poly } = spec;
        if m == 0 || m > 16 {
            return Err(FieldError::UnsupportedDegree(m));
        }
        if poly >> m != 1 || poly & 1 != 1 {
            return Err(FieldError::MalformedPolynomial(poly));
        }
        let qm1 = (1usize << m) - 1;
        let mut exp = vec![0u16; 2 * qm1];
        let mut log = vec![u16::MAX; 1usize << m];
        // x generates the multiplicative group iff its orbit closes exactly
        // after 2^m - 1 steps with no earlier repeat.
        let mut cur: u32 = 1;
        for (i, slot) in exp.iter_mut().take(qm1).enumerate() {
            if log[cur as usize] != u16::MAX {
                return Err(FieldError::NotPrimitive(poly));
            }
            *slot = cur as u16;
            log[cur as usize] = i as u16;
            cur = xtime(cur, m, poly);
        }
        if cur != 1 {
            return Err(FieldError::NotPrimitive(poly));
        }
        exp.copy_within(0..qm1, qm1);
        Ok(Field { spec, qm1, exp, log })
    }

    pub fn with_default_poly(m: u32) -> Result<Field, FieldError> {
        Field::new(FieldSpec::with_default_poly(m)?)
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    /// Number of elements, 2^m.
    pub fn size(&self) -> usize {
        self.qm1 + 1
    }

    /// The primitive element x.
    pub fn generator(&self) -> Gf {
        Gf(self.exp[usize::from(self.qm1 > 1)])
    }

    pub fn add(&self, a: Gf, b: Gf) -> Gf {
        Gf(a.0 ^ b.0)
    }

    pub fn mul(&self, a: Gf, b: Gf) -> Gf {
        if a.0 == 0 || b.0 == 0 {
            return Gf(0);
        }
        Gf(self.exp[self.log[a.0 as usize] as usize + self.log[b.0 as usize] as usize])
    }

    pub fn inv(&self, a: Gf) -> Result<Gf, FieldError> {
        if a.0 == 0 {
            return Err(FieldError::DivisionByZero);
        }
        Ok(Gf(self.exp[self.qm1 - self.log[a.0 as usize] as usize]))
    }

    pub fn div(&self, a: Gf, b: Gf) -> Result<Gf, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: Gf, e: usize) -> Gf {
        if e == 0 {
            return Gf::ONE;
        }
        if a.0 == 0 {
            return Gf(0);
        }
        Gf(self.exp[self.log[a.0 as usize] as usize * e % self.qm1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bit-by-bit polynomial multiply-and-reduce, written against the tables
    /// on purpose: it never touches exp/log.
    fn schoolbook_mul(a: u32, b: u32, m: u32, poly: u32) -> u32 {
        let mut prod: u64 = 0;
        for i in 0..32 {
            if b >> i & 1 == 1 {
                prod ^= (a as u64) << i;
            }
        }
        for bit in (m as u64..64).rev() {
            if prod >> bit & 1 == 1 {
                prod ^= (poly as u64) << (bit - m as u64);
            }
        }
        prod as u32
    }

    fn schoolbook_inv(a: u32, m: u32, poly: u32) -> Option<u32> {
        (1..1u32 << m).find(|&y| schoolbook_mul(a, y, m, poly) == 1)
    }

    #[test]
    fn frozen_gf16_values() {
        // Worked by hand with poly x^4 + x + 1:
        //   (x^3+1)(x^3+x^2) = x^6+x^5+x^3+x^2 = x^2+x after reduction.
        assert_eq!(schoolbook_mul(9, 12, 4, 0b1_0011), 6);
        assert_eq!(schoolbook_inv(2, 4, 0b1_0011), Some(9));

        let f = Field::with_default_poly(4).unwrap();
        assert_eq!(f.add(Gf(9), Gf(12)), Gf(5));
        assert_eq!(f.mul(Gf(9), Gf(12)), Gf(6));
        assert_eq!(f.inv(Gf(2)).unwrap(), Gf(9));
    }

    #[test]
    fn tables_agree_with_schoolbook_through_m8() {
        for m in 1..=8 {
            let f = Field::with_default_poly(m).unwrap();
            let poly = f.spec().poly;
            for a in 0..1u32 << m {
                for b in 0..1u32 << m {
                    assert_eq!(
                        f.mul(Gf(a as u16), Gf(b as u16)).0 as u32,
                        schoolbook_mul(a, b, m, poly),
                        "m={m} a={a} b={b}"
                    );
                }
            }
        }
    }

    #[test]
    fn field_axioms_exhaustive_small_m() {
        for m in 2..=4 {
            let f = Field::with_default_poly(m).unwrap();
            let q = f.size() as u16;
            for a in 0..q {
                let a = Gf(a);
                assert_eq!(f.add(a, Gf::ZERO), a);
                assert_eq!(f.mul(a, Gf::ONE), a);
                assert_eq!(f.add(a, a), Gf::ZERO);
                if !a.is_zero() {
                    let ai = f.inv(a).unwrap();
                    assert_eq!(f.mul(a, ai), Gf::ONE);
                }
                for b in 0..q {
                    let b = Gf(b);
                    assert_eq!(f.mul(a, b), f.mul(b, a));
                    assert_eq!(f.add(a, b), f.add(b, a));
                    for c in 0..q {
                        let c = Gf(c);
                        assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                        assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
                        assert_eq!(
                            f.mul(a, f.add(b, c)),
                            f.add(f.mul(a, b), f.mul(a, c))
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn pow_matches_repeated_mul() {
        let f = Field::with_default_poly(4).unwrap();
        for a in 0..16 {
            let a = Gf(a);
            let mut acc = Gf::ONE;
            for e in 0..20 {
                assert_eq!(f.pow(a, e), acc, "a={a:?} e={e}");
                acc = f.mul(acc, a);
            }
        }
        assert_eq!(f.pow(Gf::ZERO, 0), Gf::ONE);
    }

    #[test]
    fn all_default_polys_are_primitive() {
        for m in 1..=16 {
            Field::with_default_poly(m).unwrap();
        }
    }

    #[test]
    fn rejects_bad_polynomials() {
        // Irreducible but order(x) = 5: never generates the full group.
        assert_eq!(
            Field::new(FieldSpec { m: 4, poly: 0b1_1111 }).unwrap_err(),
            FieldError::NotPrimitive(0b1_1111)
        );
        // (x^2 + x + 1)^2, reducible.
        assert_eq!(
            Field::new(FieldSpec { m: 4, poly: 0b1_0101 }).unwrap_err(),
            FieldError::NotPrimitive(0b1_0101)
        );
        assert_eq!(
            Field::new(FieldSpec { m: 4, poly: 0b0_0011 }).unwrap_err(),
            FieldError::MalformedPolynomial(0b0_0011)
        );
        assert_eq!(
            Field::new(FieldSpec { m: 4, poly: 0b1_0010 }).unwrap_err(),
            FieldError::MalformedPolynomial(0b1_0010)
        );
        assert_eq!(
            Field::new(FieldSpec { m: 0, poly: 1 }).unwrap_err(),
            FieldError::UnsupportedDegree(0)
        );
        assert_eq!(
            Field::new(FieldSpec { m: 17, poly: 1 }).unwrap_err(),
            FieldError::UnsupportedDegree(17)
        );
    }

    #[test]
    fn inv_of_zero_fails() {
        let f = Field::with_default_poly(4).unwrap();
        assert_eq!(f.inv(Gf::ZERO), Err(FieldError::DivisionByZero));
        assert_eq!(f.div(Gf(5), Gf::ZERO), Err(FieldError::DivisionByZero));
    }

    #[test]
    fn generator_is_x() {
        assert_eq!(Field::with_default_poly(4).unwrap().generator(), Gf(2));
        assert_eq!(Field::with_default_poly(1).unwrap().generator(), Gf(1));
    }
}
