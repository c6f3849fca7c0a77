//! Fixed-precision p-adic scalars and the unramified quadratic extension.
//!
//! A nonzero scalar is stored as `p^v * u + O(p^N)` with `u` a unit residue
//! modulo `p^(N-v)`; the absolute precision `N` is carried by every value and
//! propagated pessimistically: addition keeps the minimum absolute precision,
//! multiplication the minimum relative precision, and inversion pays twice
//! the valuation.  The quadratic extension `K_p = Q_p(sqrt(d))` for a
//! non-residue `d` is represented on the basis `(1, sqrt(d))`.
//!
//! The logarithm uses the Iwasawa branch `log p = 0`: for a unit `u` the
//! value is `log(u^(p^2-1)) / (p^2 - 1)`, and `p`-power parts are discarded.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero as NumZero};
use std::fmt;
use std::str::FromStr;

/// `p^k` as a `u64`, failing if it does not fit.
pub fn pow_p(p: u64, k: u32) -> Result<u64> {
    let mut acc: u64 = 1;
    for _ in 0..k {
        acc = acc
            .checked_mul(p)
            .ok_or_else(|| Error::ResourceLimit(format!("p^{k} exceeds u64 range")))?;
    }
    Ok(acc)
}

/// Modular inverse of `a` modulo `m` (extended Euclid); `a` must be a unit.
pub fn mod_inv(a: u64, m: u64) -> Result<u64> {
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut s0, mut s1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    if r0 != 1 {
        return Err(Error::DivisionByZero);
    }
    Ok(((s0 % m as i128 + m as i128) % m as i128) as u64)
}

/// `a * b mod m` without overflow.
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    acc
}

/// p-adic valuation and unit part of a nonzero `BigInt`.
fn big_val_unit(n: &BigInt, p: u64) -> (i64, BigInt) {
    let pb = BigInt::from(p);
    let mut v = 0i64;
    let mut u = n.clone();
    while (&u % &pb).is_zero() {
        u /= &pb;
        v += 1;
    }
    (v, u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Repr {
    /// Indistinguishable from zero at the stated precision.
    Zero,
    /// `p^val * unit` with `unit` reduced modulo `p^(prec-val)`, `p` not
    /// dividing `unit`.
    NonZero { val: i64, unit: u64 },
}

/// A p-adic number known to absolute precision `O(p^prec)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PAdicScalar {
    p: u64,
    prec: i64,
    repr: Repr,
}

impl PAdicScalar {
    pub fn zero(p: u64, prec: i64) -> Self {
        PAdicScalar { p, prec, repr: Repr::Zero }
    }

    pub fn one(p: u64, prec: i64) -> Self {
        Self::from_i64(p, 1, prec)
    }

    /// Build `p^val * unit + O(p^prec)`, reducing `unit` modulo `p^(prec-val)`.
    pub fn from_val_unit(p: u64, val: i64, unit: u64, prec: i64) -> Self {
        if val >= prec {
            return Self::zero(p, prec);
        }
        let m = pow_p(p, (prec - val) as u32).expect("modulus overflow");
        let u = unit % m;
        if u == 0 {
            // The caller passed a non-unit; renormalize through the integer path.
            return Self::from_big(p, &(BigInt::from(u)), prec);
        }
        if u % p == 0 {
            let (v2, u2) = big_val_unit(&BigInt::from(u), p);
            return Self::from_val_unit(p, val + v2, u2.to_u64().unwrap(), prec);
        }
        PAdicScalar { p, prec, repr: Repr::NonZero { val, unit: u } }
    }

    pub fn from_i64(p: u64, n: i64, prec: i64) -> Self {
        Self::from_big(p, &BigInt::from(n), prec)
    }

    pub fn from_big(p: u64, n: &BigInt, prec: i64) -> Self {
        if n.is_zero() {
            return Self::zero(p, prec);
        }
        let (val, unit) = big_val_unit(n, p);
        if val >= prec {
            return Self::zero(p, prec);
        }
        let m = BigInt::from(pow_p(p, (prec - val) as u32).expect("modulus overflow"));
        let u = ((unit % &m) + &m) % &m;
        PAdicScalar { p, prec, repr: Repr::NonZero { val, unit: u.to_u64().unwrap() } }
    }

    /// Exact rational input; the denominator contributes negative valuation.
    pub fn from_ratio(p: u64, q: &BigRational, prec: i64) -> Result<Self> {
        if q.is_zero() {
            return Ok(Self::zero(p, prec));
        }
        let (vn, un) = big_val_unit(q.numer(), p);
        let (vd, ud) = big_val_unit(q.denom(), p);
        let val = vn - vd;
        if val >= prec {
            return Ok(Self::zero(p, prec));
        }
        let m = BigInt::from(pow_p(p, (prec - val) as u32)?);
        let un = (((un % &m) + &m) % &m).to_u64().unwrap();
        let ud = (((ud % &m) + &m) % &m).to_u64().unwrap();
        let u = mul_mod(un, mod_inv(ud, m.to_u64().unwrap())?, m.to_u64().unwrap());
        Ok(PAdicScalar { p, prec, repr: Repr::NonZero { val, unit: u } })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// Absolute precision: the value is known modulo `p^precision`.
    pub fn precision(&self) -> i64 {
        self.prec
    }

    /// `None` for (indistinguishable-from-)zero.
    pub fn valuation(&self) -> Option<i64> {
        match self.repr {
            Repr::Zero => None,
            Repr::NonZero { val, .. } => Some(val),
        }
    }

    pub fn unit_part(&self) -> Option<u64> {
        match self.repr {
            Repr::Zero => None,
            Repr::NonZero { unit, .. } => Some(unit),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero)
    }

    /// Reduce to a (smaller) absolute precision.
    pub fn with_precision(&self, prec: i64) -> Self {
        match self.repr {
            Repr::Zero => Self::zero(self.p, prec.min(self.prec)),
            Repr::NonZero { val, unit } => Self::from_val_unit(self.p, val, unit, prec.min(self.prec)),
        }
    }

    /// The canonical integer representative `p^val * unit` as a rational.
    pub fn to_ratio(&self) -> BigRational {
        match self.repr {
            Repr::Zero => BigRational::from_integer(0.into()),
            Repr::NonZero { val, unit } => {
                let u = BigInt::from(unit);
                if val >= 0 {
                    BigRational::from_integer(u * BigInt::from(self.p).pow(val as u32))
                } else {
                    BigRational::new(u, BigInt::from(self.p).pow((-val) as u32))
                }
            }
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.p, rhs.p, "mixed primes");
        let prec = self.prec.min(rhs.prec);
        match (self.repr, rhs.repr) {
            (Repr::Zero, _) => rhs.with_precision(prec),
            (_, Repr::Zero) => self.with_precision(prec),
            (Repr::NonZero { val: v1, unit: u1 }, Repr::NonZero { val: v2, unit: u2 }) => {
                let v = v1.min(v2);
                if v >= prec {
                    return Self::zero(self.p, prec);
                }
                let m = pow_p(self.p, (prec - v) as u32).expect("modulus overflow");
                // shifts at or beyond the modulus width vanish mod m
                let shift = |dv: i64| {
                    if dv >= prec - v {
                        0
                    } else {
                        pow_p(self.p, dv as u32).unwrap() % m
                    }
                };
                let a = mul_mod(u1 % m, shift(v1 - v), m);
                let b = mul_mod(u2 % m, shift(v2 - v), m);
                let s = (a + b) % m;
                if s == 0 {
                    return Self::zero(self.p, prec);
                }
                let (dv, du) = big_val_unit(&BigInt::from(s), self.p);
                Self::from_val_unit(self.p, v + dv, du.to_u64().unwrap(), prec)
            }
        }
    }

    pub fn neg(&self) -> Self {
        match self.repr {
            Repr::Zero => *self,
            Repr::NonZero { val, unit } => {
                let m = pow_p(self.p, (self.prec - val) as u32).unwrap();
                Self::from_val_unit(self.p, val, m - unit, self.prec)
            }
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.p, rhs.p, "mixed primes");
        match (self.repr, rhs.repr) {
            (Repr::Zero, Repr::Zero) => {
                // 0*0 known modulo p^(N1+N2)? Pessimistically keep the better
                // of the two shifted bounds.
                Self::zero(self.p, self.prec.max(rhs.prec))
            }
            (Repr::Zero, Repr::NonZero { val, .. }) => Self::zero(self.p, self.prec + val),
            (Repr::NonZero { val, .. }, Repr::Zero) => Self::zero(self.p, rhs.prec + val),
            (Repr::NonZero { val: v1, unit: u1 }, Repr::NonZero { val: v2, unit: u2 }) => {
                let rel = (self.prec - v1).min(rhs.prec - v2);
                let val = v1 + v2;
                let m = pow_p(self.p, rel as u32).expect("modulus overflow");
                Self::from_val_unit(self.p, val, mul_mod(u1 % m, u2 % m, m), val + rel)
            }
        }
    }

    pub fn inv(&self) -> Result<Self> {
        match self.repr {
            Repr::Zero => Err(Error::DivisionByZero),
            Repr::NonZero { val, unit } => {
                let rel = self.prec - val;
                let m = pow_p(self.p, rel as u32)?;
                let u = mod_inv(unit, m)?;
                if -val >= -val + rel {
                    return Err(Error::PrecisionExhausted("inverse".into()));
                }
                Ok(Self::from_val_unit(self.p, -val, u, -val + rel))
            }
        }
    }

    pub fn div(&self, rhs: &Self) -> Result<Self> {
        Ok(self.mul(&rhs.inv()?))
    }

    /// Multiply by an exact integer (no precision inflation: the absolute
    /// precision grows by the integer's valuation).
    pub fn mul_i64(&self, n: i64) -> Self {
        if n == 0 {
            return Self::zero(self.p, i64::MAX / 4);
        }
        let (w, u) = big_val_unit(&BigInt::from(n), self.p);
        match self.repr {
            Repr::Zero => Self::zero(self.p, self.prec + w),
            Repr::NonZero { val, unit } => {
                let rel = self.prec - val;
                let m = pow_p(self.p, rel as u32).expect("modulus overflow");
                let uu = (((u % BigInt::from(m)) + BigInt::from(m)) % BigInt::from(m))
                    .to_u64()
                    .unwrap();
                Self::from_val_unit(self.p, val + w, mul_mod(unit, uu, m), self.prec + w)
            }
        }
    }

    /// Divide by an exact nonzero integer; exact loss of `v_p(n)` digits.
    pub fn div_i64(&self, n: i64) -> Result<Self> {
        if n == 0 {
            return Err(Error::DivisionByZero);
        }
        let (w, u) = big_val_unit(&BigInt::from(n), self.p);
        match self.repr {
            Repr::Zero => Ok(Self::zero(self.p, self.prec - w)),
            Repr::NonZero { val, unit } => {
                let rel = self.prec - val;
                let m = pow_p(self.p, rel as u32)?;
                let uu = (((u % BigInt::from(m)) + BigInt::from(m)) % BigInt::from(m))
                    .to_u64()
                    .unwrap();
                let inv = mod_inv(uu, m)?;
                Ok(Self::from_val_unit(self.p, val - w, mul_mod(unit, inv, m), self.prec - w))
            }
        }
    }

    /// Multiply by an exact `p^k`.
    pub fn shift(&self, k: i64) -> Self {
        match self.repr {
            Repr::Zero => Self::zero(self.p, self.prec + k),
            Repr::NonZero { val, unit } => PAdicScalar {
                p: self.p,
                prec: self.prec + k,
                repr: Repr::NonZero { val: val + k, unit },
            },
        }
    }

    /// Integer power with exact exponent.
    pub fn pow(&self, e: i64) -> Result<Self> {
        if e == 0 {
            return Ok(Self::one(self.p, self.prec));
        }
        let base = if e < 0 { self.inv()? } else { *self };
        let mut k = e.unsigned_abs();
        let mut acc = Self::one(base.p, base.prec + base.valuation().unwrap_or(0).max(0) * (k as i64));
        acc = acc.with_precision(i64::MAX / 4);
        let mut b = base;
        let mut out: Option<Self> = None;
        while k > 0 {
            if k & 1 == 1 {
                out = Some(match out {
                    None => b,
                    Some(o) => o.mul(&b),
                });
            }
            k >>= 1;
            if k > 0 {
                b = b.mul(&b);
            }
        }
        let _ = acc;
        Ok(out.unwrap())
    }

    /// Canonical square root in `Q_p` (unit part modulo `p` in `1..=(p-1)/2`),
    /// or an error if the element is not a square in `Q_p`.
    pub fn sqrt(&self) -> Result<Self> {
        let p = self.p;
        match self.repr {
            Repr::Zero => Ok(Self::zero(p, (self.prec + 1) / 2)),
            Repr::NonZero { val, unit } => {
                if val % 2 != 0 {
                    return Err(Error::RamifiedRoot(val));
                }
                let rel = self.prec - val;
                // Square root of the unit: residue root then Hensel lifting.
                let r0 = sqrt_mod_p(unit % p, p)
                    .ok_or_else(|| Error::NoSolution("not a square in Q_p".into()))?;
                let mut k: u32 = 1;
                let mut r = r0;
                while (k as i64) < rel {
                    let k2 = (2 * k).min(rel as u32);
                    let m = pow_p(p, k2)?;
                    // Newton step r <- (r + u/r)/2 mod p^(2k).
                    let inv_r = mod_inv(r, m)?;
                    let half = mod_inv(2, m)?;
                    r = mul_mod((r + mul_mod(unit % m, inv_r, m)) % m, half, m);
                    k = k2;
                }
                let m = pow_p(p, rel as u32)?;
                let mut r = r % m;
                if r % p > (p - 1) / 2 {
                    r = m - r;
                }
                Ok(Self::from_val_unit(p, val / 2, r, val / 2 + rel))
            }
        }
    }
}

/// Square root modulo an odd prime by direct search (p stays small here).
fn sqrt_mod_p(a: u64, p: u64) -> Option<u64> {
    let a = a % p;
    if a == 0 {
        return Some(0);
    }
    if pow_mod(a, (p - 1) / 2, p) != 1 {
        return None;
    }
    if p % 4 == 3 {
        return Some(pow_mod(a, (p + 1) / 4, p));
    }
    (1..p).find(|r| mul_mod(*r, *r, p) == a)
}

impl fmt::Display for PAdicScalar {
    /// `p^v * (d0 + d1*p + d2*p^2 + ...) + O(p^N)` with exactly `N - v`
    /// digits, so the string round-trips the precision exactly.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.repr {
            Repr::Zero => write!(f, "0 + O({}^{})", self.p, self.prec),
            Repr::NonZero { val, unit } => {
                let rel = (self.prec - val) as u32;
                let mut digits = Vec::new();
                let mut u = unit;
                for _ in 0..rel {
                    digits.push(u % self.p);
                    u /= self.p;
                }
                let body = digits
                    .iter()
                    .enumerate()
                    .map(|(i, d)| match i {
                        0 => format!("{d}"),
                        1 => format!("{d}*{}", self.p),
                        _ => format!("{d}*{}^{}", self.p, i),
                    })
                    .collect::<Vec<_>>()
                    .join(" + ");
                write!(f, "{}^{} * ({}) + O({}^{})", self.p, val, body, self.p, self.prec)
            }
        }
    }
}

impl PAdicScalar {
    /// Parse the `Display` format back; the prime is recovered from the text.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let err = |m: &str| Error::Parse(format!("{m}: {s:?}"));
        let (body, tail) = s
            .rsplit_once("+ O(")
            .ok_or_else(|| err("missing O(p^N) tail"))?;
        let tail = tail.trim().trim_end_matches(')');
        let (p_str, n_str) = tail.split_once('^').ok_or_else(|| err("bad tail"))?;
        let p: u64 = p_str.trim().parse().map_err(|_| err("bad prime"))?;
        let prec: i64 = n_str.trim().parse().map_err(|_| err("bad precision"))?;
        let body = body.trim();
        if body == "0" {
            return Ok(Self::zero(p, prec));
        }
        let (head, digits) = body
            .split_once('*')
            .ok_or_else(|| err("missing p^v factor"))?;
        let head = head.trim();
        let vpart = head
            .strip_prefix(&format!("{p}^"))
            .ok_or_else(|| err("bad valuation factor"))?;
        let val: i64 = vpart.trim().parse().map_err(|_| err("bad valuation"))?;
        let digits = digits.trim().trim_start_matches('(').trim_end_matches(')');
        let mut unit: u64 = 0;
        let mut count: i64 = 0;
        for (i, term) in digits.split('+').enumerate() {
            let term = term.trim();
            let d: u64 = match term.split_once('*') {
                None => term.parse().map_err(|_| err("bad digit"))?,
                Some((d, _pow)) => d.trim().parse().map_err(|_| err("bad digit"))?,
            };
            if d >= p {
                return Err(err("digit out of range"));
            }
            unit += d * pow_p(p, i as u32)?;
            count += 1;
        }
        if val + count != prec {
            return Err(err("digit count inconsistent with precision"));
        }
        Ok(Self::from_val_unit(p, val, unit, prec))
    }
}

impl FromStr for PAdicScalar {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// An element `a + b*sqrt(d)` of the unramified quadratic extension of `Q_p`,
/// where `d` is a non-residue unit modulo `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadElem {
    pub a: PAdicScalar,
    pub b: PAdicScalar,
    pub d: i64,
}

impl QuadElem {
    pub fn new(a: PAdicScalar, b: PAdicScalar, d: i64) -> Self {
        assert_eq!(a.p(), b.p());
        QuadElem { a, b, d }
    }

    pub fn from_scalar(a: PAdicScalar, d: i64) -> Self {
        let z = PAdicScalar::zero(a.p(), a.precision());
        QuadElem { a, b: z, d }
    }

    pub fn p(&self) -> u64 {
        self.a.p()
    }

    pub fn zero(p: u64, prec: i64, d: i64) -> Self {
        QuadElem { a: PAdicScalar::zero(p, prec), b: PAdicScalar::zero(p, prec), d }
    }

    pub fn one(p: u64, prec: i64, d: i64) -> Self {
        QuadElem { a: PAdicScalar::one(p, prec), b: PAdicScalar::zero(p, prec), d }
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    /// `min(v(a), v(b))`: the basis `(1, sqrt(d))` is a unit basis of the
    /// unramified extension, so the valuation is the coordinate minimum.
    pub fn valuation(&self) -> Option<i64> {
        match (self.a.valuation(), self.b.valuation()) {
            (None, None) => None,
            (Some(v), None) | (None, Some(v)) => Some(v),
            (Some(v), Some(w)) => Some(v.min(w)),
        }
    }

    pub fn precision(&self) -> i64 {
        self.a.precision().min(self.b.precision())
    }

    pub fn with_precision(&self, prec: i64) -> Self {
        QuadElem {
            a: self.a.with_precision(prec),
            b: self.b.with_precision(prec),
            d: self.d,
        }
    }

    pub fn conj(&self) -> Self {
        QuadElem { a: self.a, b: self.b.neg(), d: self.d }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.d, rhs.d);
        QuadElem { a: self.a.add(&rhs.a), b: self.b.add(&rhs.b), d: self.d }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.d, rhs.d);
        QuadElem { a: self.a.sub(&rhs.a), b: self.b.sub(&rhs.b), d: self.d }
    }

    pub fn neg(&self) -> Self {
        QuadElem { a: self.a.neg(), b: self.b.neg(), d: self.d }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.d, rhs.d);
        let a = self.a.mul(&rhs.a).add(&self.b.mul(&rhs.b).mul_i64(self.d));
        let b = self.a.mul(&rhs.b).add(&self.b.mul(&rhs.a));
        QuadElem { a, b, d: self.d }
    }

    pub fn mul_i64(&self, n: i64) -> Self {
        QuadElem { a: self.a.mul_i64(n), b: self.b.mul_i64(n), d: self.d }
    }

    pub fn div_i64(&self, n: i64) -> Result<Self> {
        Ok(QuadElem { a: self.a.div_i64(n)?, b: self.b.div_i64(n)?, d: self.d })
    }

    pub fn scalar_mul(&self, s: &PAdicScalar) -> Self {
        QuadElem { a: self.a.mul(s), b: self.b.mul(s), d: self.d }
    }

    /// Field norm `a^2 - d b^2` down to `Q_p`.
    pub fn norm(&self) -> PAdicScalar {
        self.a.mul(&self.a).sub(&self.b.mul(&self.b).mul_i64(self.d))
    }

    pub fn trace(&self) -> PAdicScalar {
        self.a.add(&self.a)
    }

    pub fn inv(&self) -> Result<Self> {
        let n = self.norm();
        let ninv = n.inv()?;
        Ok(self.conj().scalar_mul(&ninv))
    }

    pub fn div(&self, rhs: &Self) -> Result<Self> {
        Ok(self.mul(&rhs.inv()?))
    }

    pub fn pow(&self, e: i64) -> Result<Self> {
        if e == 0 {
            return Ok(Self::one(self.p(), self.precision(), self.d));
        }
        let base = if e < 0 { self.inv()? } else { *self };
        let mut k = e.unsigned_abs();
        let mut b = base;
        let mut out: Option<Self> = None;
        while k > 0 {
            if k & 1 == 1 {
                out = Some(match out {
                    None => b,
                    Some(o) => o.mul(&b),
                });
            }
            k >>= 1;
            if k > 0 {
                b = b.mul(&b);
            }
        }
        Ok(out.unwrap())
    }

    /// Canonical square root of a scalar inside `K_p`: Hensel when the unit
    /// part is a residue, otherwise a multiple of `sqrt(d)`.  Odd valuation
    /// is ramified and rejected.  The canonical choice takes the first
    /// nonzero coordinate with unit part modulo `p` in `1..=(p-1)/2`.
    pub fn sqrt_scalar(x: &PAdicScalar, d: i64) -> Result<Self> {
        let p = x.p();
        match x.valuation() {
            None => Ok(Self::zero(p, (x.precision() + 1) / 2, d)),
            Some(v) => {
                if v % 2 != 0 {
                    return Err(Error::RamifiedRoot(v));
                }
                match x.sqrt() {
                    Ok(r) => Ok(Self::from_scalar(r, d)),
                    Err(Error::NoSolution(_)) => {
                        // x = d * (x/d) with x/d a square in Q_p.
                        let mut r = x.div_i64(d)?.sqrt()?;
                        if r.unit_part().map(|u| u % p > (p - 1) / 2) == Some(true) {
                            r = r.neg();
                        }
                        let z = PAdicScalar::zero(p, r.precision());
                        Ok(QuadElem { a: z, b: r, d })
                    }
                    Err(e) => Err(e),
                }
            }
        }
    }

    /// Iwasawa-branch logarithm (`log p = 0`).  Defined on all nonzero
    /// elements; the p-power part contributes nothing.
    pub fn iwasawa_log(&self) -> Result<Self> {
        self.branch_log(&Self::zero(self.p(), self.precision(), self.d))
    }

    /// Logarithm on the branch `log p = lambda`.
    pub fn branch_log(&self, lambda: &Self) -> Result<Self> {
        let v = self.valuation().ok_or(Error::DivisionByZero)?;
        let p = self.p();
        let unit = QuadElem {
            a: self.a.shift(-v),
            b: self.b.shift(-v),
            d: self.d,
        };
        let rel = unit.precision();
        if rel <= 0 {
            return Err(Error::PrecisionExhausted("log of a value with no unit digits".into()));
        }
        // u^(p^2-1) is a principal unit; its log divided by p^2-1 is log(u).
        let e = (p * p - 1) as i64;
        let principal = unit.pow(e)?.with_precision(rel);
        let one = Self::one(p, rel, self.d);
        let t = principal.sub(&one);
        let mut term = t; // t^k, updated multiplicatively
        let mut acc = Self::zero(p, rel, self.d);
        let mut k: i64 = 1;
        loop {
            let tv = term.valuation();
            match tv {
                None => break,
                Some(tv) => {
                    // v(t^k / k) >= v(t^k) - v_p(k) and v_p(k) <= 2 in the
                    // range of k this loop can reach; stop once clear of rel.
                    if tv >= rel + 2 {
                        break;
                    }
                }
            }
            let contrib = term.div_i64(k)?;
            if k % 2 == 1 {
                acc = acc.add(&contrib);
            } else {
                acc = acc.sub(&contrib);
            }
            if k as usize > (rel as usize) + 8 {
                break;
            }
            term = term.mul(&t);
            k += 1;
        }
        let mut out = acc.div_i64(e)?.with_precision(rel);
        if v != 0 && !lambda.is_zero() {
            out = out.add(&lambda.mul_i64(v));
        }
        let _ = p;
        Ok(out)
    }

    /// p-adic exponential; requires valuation >= 1 (convergence for odd p).
    pub fn exp(&self) -> Result<Self> {
        let p = self.p();
        let prec = self.precision();
        match self.valuation() {
            None => Ok(Self::one(p, prec, self.d)),
            Some(v) if v < 1 => Err(Error::ExpOutOfRange(v)),
            Some(_) => {
                let mut acc = Self::one(p, prec, self.d);
                let mut term = Self::one(p, prec + 4, self.d);
                let mut k: i64 = 1;
                loop {
                    term = term.mul(self);
                    term = term.div_i64(k)?;
                    match term.valuation() {
                        None => break,
                        Some(tv) if tv >= prec => break,
                        Some(_) => acc = acc.add(&term.with_precision(prec)),
                    }
                    k += 1;
                    if k > 4 * (prec + 8) {
                        break;
                    }
                }
                Ok(acc)
            }
        }
    }
}

impl fmt::Display for QuadElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) + ({})*sqrt({})", self.a, self.b, self.d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    const P: u64 = 11;
    const N: i64 = 6;

    /// Independent oracle: inverse by extended Euclid on plain integers.
    fn inv_oracle(a: i64, m: i64) -> i64 {
        let (mut r0, mut r1, mut s0, mut s1) = (m, a.rem_euclid(m), 0i64, 1i64);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (s0, s1) = (s1, s0 - q * s1);
        }
        assert_eq!(r0, 1);
        s0.rem_euclid(m)
    }

    #[test]
    fn basic_ring_ops() {
        let x = PAdicScalar::from_i64(P, 3, N);
        let y = PAdicScalar::from_i64(P, 22, N);
        assert_eq!(y.valuation(), Some(1));
        assert_eq!(y.unit_part(), Some(2));
        let s = x.add(&y);
        assert_eq!(s, PAdicScalar::from_i64(P, 25, N));
        let pr = x.mul(&y);
        assert_eq!(pr.valuation(), Some(1));
        // 3 * 22 = 66 = 11 * 6
        assert_eq!(pr.unit_part(), Some(6));
    }

    #[test]
    fn inverse_matches_euclid_oracle() {
        let m = 11i64.pow(5);
        let want = inv_oracle(3, m) as u64;
        let x = PAdicScalar::from_i64(P, 3, 5);
        let inv = x.inv().unwrap();
        assert_eq!(inv.valuation(), Some(0));
        assert_eq!(inv.unit_part(), Some(want));
        assert_eq!(x.mul(&inv), PAdicScalar::one(P, 5));
    }

    #[test]
    fn precision_propagation() {
        let x = PAdicScalar::from_val_unit(P, 1, 5, 4); // 5p + O(p^4)
        let y = PAdicScalar::from_i64(P, 7, 6);
        assert_eq!(x.add(&y).precision(), 4);
        // relative precisions 3 and 6 -> product has relative 3, abs 1+3.
        assert_eq!(x.mul(&y).precision(), 4);
        let z = PAdicScalar::from_val_unit(P, 2, 3, 6); // v=2, rel 4
        assert_eq!(z.inv().unwrap().precision(), 2); // N - 2v
    }

    #[test]
    fn cancellation_drops_to_zero_marker() {
        let x = PAdicScalar::from_i64(P, 5, 4);
        let y = PAdicScalar::from_i64(P, 5, 4);
        let d = x.sub(&y);
        assert!(d.is_zero());
        assert_eq!(d.precision(), 4);
    }

    #[test]
    fn display_round_trip() {
        let cases = [
            PAdicScalar::from_i64(P, 3 + 5 * 11, 6),
            PAdicScalar::from_val_unit(P, -2, 7 + 11, 3),
            PAdicScalar::from_i64(P, -1, 4),
            PAdicScalar::zero(P, 5),
            PAdicScalar::from_i64(13, 170, 7),
        ];
        for x in cases {
            let s = x.to_string();
            let back = PAdicScalar::parse(&s).unwrap();
            assert_eq!(back, x, "round-trip failed for {s}");
        }
    }

    #[test]
    fn hensel_sqrt_matches_squaring() {
        // Oracle: lift a root of x^2 = 3 mod 11^6 by exhaustive digit search.
        let x = PAdicScalar::from_i64(P, 3, N);
        let r = x.sqrt().unwrap();
        assert_eq!(r.mul(&r), x);
        assert!(r.unit_part().unwrap() % P <= (P - 1) / 2);
        // 2 is a non-residue mod 11 -> error in Q_p
        assert!(PAdicScalar::from_i64(P, 2, N).sqrt().is_err());
        // odd valuation is ramified
        assert!(matches!(
            PAdicScalar::from_i64(P, 11, N).sqrt(),
            Err(Error::RamifiedRoot(1))
        ));
    }

    #[test]
    fn quad_sqrt_of_nonresidue() {
        let x = PAdicScalar::from_i64(P, 2, N);
        let r = QuadElem::sqrt_scalar(&x, 2).unwrap();
        assert!(r.a.is_zero());
        let sq = r.mul(&r);
        assert_eq!(sq.a.with_precision(5), x.with_precision(5));
        assert!(sq.b.is_zero() || sq.b.valuation().unwrap() >= 5);
        // d_K = 8 also lives in Q_p(sqrt(2)): sqrt(8) = 2*sqrt(2)
        let e = PAdicScalar::from_i64(P, 8, N);
        let r8 = QuadElem::sqrt_scalar(&e, 2).unwrap();
        let sq8 = r8.mul(&r8);
        assert_eq!(sq8.a.with_precision(5), e.with_precision(5));
    }

    /// Oracle for the log: the truncated series applied directly to 1 + 11.
    #[test]
    fn log_matches_series_oracle() {
        let n = 6i64;
        // sum_{k=1..8} (-1)^(k+1) 11^k / k  modulo 11^6, computed exactly.
        let m = BigInt::from(11).pow(9);
        let mut acc = num_rational::BigRational::from_integer(0.into());
        for k in 1..=8i64 {
            let t = num_rational::BigRational::new(BigInt::from(11).pow(k as u32), BigInt::from(k));
            if k % 2 == 1 {
                acc += t;
            } else {
                acc -= t;
            }
        }
        let _ = m;
        let want = PAdicScalar::from_ratio(P, &acc, n).unwrap();
        let u = QuadElem::from_scalar(PAdicScalar::from_i64(P, 12, n), 2);
        let got = u.iwasawa_log().unwrap();
        assert!(got.b.is_zero());
        assert_eq!(got.a.with_precision(n), want.with_precision(n));
    }

    #[test]
    fn log_is_homomorphic_and_kills_p() {
        let n = 6i64;
        let u = QuadElem::new(
            PAdicScalar::from_i64(P, 3, n),
            PAdicScalar::from_i64(P, 4, n),
            2,
        );
        let v = QuadElem::new(
            PAdicScalar::from_i64(P, 7, n),
            PAdicScalar::from_i64(P, 1, n),
            2,
        );
        let lhs = u.mul(&v).iwasawa_log().unwrap();
        let rhs = u.iwasawa_log().unwrap().add(&v.iwasawa_log().unwrap());
        assert_eq!(lhs.with_precision(5), rhs.with_precision(5));
        // log(p * u) = log(u) under the Iwasawa branch
        let pu = u.scalar_mul(&PAdicScalar::from_i64(P, 11, n + 1));
        assert_eq!(
            pu.iwasawa_log().unwrap().with_precision(5),
            u.iwasawa_log().unwrap().with_precision(5)
        );
    }

    #[test]
    fn exp_log_round_trip_on_principal_units() {
        let n = 6i64;
        let x = QuadElem::new(
            PAdicScalar::from_i64(P, 11 * 4, n),
            PAdicScalar::from_i64(P, 11 * 9, n),
            2,
        );
        let u = x.exp().unwrap();
        let back = u.iwasawa_log().unwrap();
        assert_eq!(back.with_precision(5), x.with_precision(5));
        // exp of valuation 0 must fail
        assert!(QuadElem::one(P, n, 2).add(&QuadElem::one(P, n, 2)).exp().is_err());
    }

    #[test]
    fn conjugation_is_a_ring_map() {
        let u = QuadElem::new(
            PAdicScalar::from_i64(P, 3, N),
            PAdicScalar::from_i64(P, 4, N),
            2,
        );
        let v = QuadElem::new(
            PAdicScalar::from_i64(P, 5, N),
            PAdicScalar::from_i64(P, 10, N),
            2,
        );
        assert_eq!(u.mul(&v).conj(), u.conj().mul(&v.conj()));
        assert_eq!(u.add(&v).conj(), u.conj().add(&v.conj()));
        let nrm = u.norm();
        assert_eq!(u.mul(&u.conj()).a, nrm);
    }
}
