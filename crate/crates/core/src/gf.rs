//! Table-driven arithmetic over GF(2^p), 1 <= p <= 16.
//!
//! Elements are plain integers in `[0, 2^p)` read as polynomials over GF(2).
//! Multiplication goes through log/antilog tables built from a primitive
//! polynomial with `x` (value 2) as the generator.

use thiserror::Error;

/// A field element. Only the low `p` bits are meaningful.
pub type Symbol = u16;

/// Largest supported extension degree.
pub const MAX_DEGREE: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("extension degree {0} outside 1..=16")]
    BadDegree(u32),
    #[error("polynomial {poly:#x} is not primitive of degree {p}")]
    NonPrimitivePolynomial { p: u32, poly: u32 },
    #[error("division by zero")]
    DivisionByZero,
}

/// Default primitive polynomial for each degree (index = p).
const DEFAULT_POLYS: [u32; 17] = [
    0, 0x3, 0x7, 0xB, 0x13, 0x25, 0x43, 0x89, 0x11D, 0x211, 0x409, 0x805, 0x1053, 0x201B,
    0x4443, 0x8003, 0x1100B,
];

/// Returns the default primitive polynomial for degree `p`.
pub fn default_primitive_poly(p: u32) -> Result<u32, FieldError> {
    if p == 0 || p > MAX_DEGREE {
        return Err(FieldError::BadDegree(p));
    }
    Ok(DEFAULT_POLYS[p as usize])
}

/// Log/antilog tables for GF(2^p). Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Field {
    p: u32,
    poly: u32,
    log: Vec<u32>,
    // antilog table doubled in length so that `exp[log a + log b]` needs no reduction
    exp: Vec<Symbol>,
}

impl Field {
    /// Builds the tables for GF(2^p) with the given primitive polynomial.
    pub fn new(p: u32, poly: u32) -> Result<Field, FieldError> {
        if p == 0 || p > MAX_DEGREE {
            return Err(FieldError::BadDegree(p));
        }
        let bad = FieldError::NonPrimitivePolynomial { p, poly };
        if poly >> p != 1 {
            return Err(bad);
        }
        let order = (1usize << p) - 1;
        let mut log = vec![u32::MAX; order + 1];
        let mut exp = vec![0 as Symbol; 2 * order];
        let mut a: u32 = 1;
        for i in 0..order {
            if log[a as usize] != u32::MAX {
                return Err(bad);
            }
            log[a as usize] = i as u32;
            exp[i] = a as Symbol;
            a <<= 1;
            if a & (1 << p) != 0 {
                a ^= poly;
            }
        }
        if a != 1 {
            return Err(bad);
        }
        for i in order..2 * order {
            exp[i] = exp[i - order];
        }
        log[0] = 0;
        Ok(Field { p, poly, log, exp })
    }

    /// GF(2^p) with the default primitive polynomial.
    pub fn with_default_poly(p: u32) -> Result<Field, FieldError> {
        Field::new(p, default_primitive_poly(p)?)
    }

    pub fn degree(&self) -> u32 {
        self.p
    }

    pub fn primitive_poly(&self) -> u32 {
        self.poly
    }

    /// Number of field elements, 2^p.
    pub fn size(&self) -> usize {
        1 << self.p
    }

    /// Multiplicative group order, 2^p - 1.
    pub fn order(&self) -> usize {
        self.size() - 1
    }

    pub fn contains(&self, a: Symbol) -> bool {
        (a as usize) < self.size()
    }

    /// Discrete log of a nonzero element.
    pub fn log(&self, a: Symbol) -> Option<u32> {
        if a == 0 {
            None
        } else {
            Some(self.log[a as usize])
        }
    }

    /// `x^i` for `0 <= i < 2^p - 1`.
    pub fn antilog(&self, i: usize) -> Symbol {
        self.exp[i % self.order()]
    }

    #[inline]
    pub fn add(&self, a: Symbol, b: Symbol) -> Symbol {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: Symbol, b: Symbol) -> Symbol {
        if a == 0 || b == 0 {
            return 0;
        }
        self.exp[(self.log[a as usize] + self.log[b as usize]) as usize]
    }

    pub fn inv(&self, a: Symbol) -> Result<Symbol, FieldError> {
        if a == 0 {
            return Err(FieldError::DivisionByZero);
        }
        let order = self.order() as u32;
        Ok(self.exp[((order - self.log[a as usize]) % order) as usize])
    }

    pub fn div(&self, a: Symbol, b: Symbol) -> Result<Symbol, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// Table `s -> h*s` over the whole field.
    pub fn mul_map(&self, h: Symbol) -> Vec<Symbol> {
        (0..self.size() as Symbol).map(|s| self.mul(h, s)).collect()
    }
}
