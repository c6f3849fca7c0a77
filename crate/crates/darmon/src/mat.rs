//! Exact 2x2 rational matrices, plus SL2(Z) word decomposition.
//!
//! All group elements that act on the tree are kept as exact matrices over Q
//! (entries only ever have p-power and small coprime denominators), so tree
//! operations and stabilizer membership are decided exactly.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use std::fmt;

pub type Q = BigRational;

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// p-adic valuation of a nonzero rational; `None` for zero.
pub fn val_p(x: &Q, p: u64) -> Option<i64> {
    if x.is_zero() {
        return None;
    }
    let pb = BigInt::from(p);
    let mut v = 0i64;
    let mut n = x.numer().clone();
    while (&n % &pb).is_zero() {
        n /= &pb;
        v += 1;
    }
    let mut d = x.denom().clone();
    while (&d % &pb).is_zero() {
        d /= &pb;
        v -= 1;
    }
    Some(v)
}

/// Canonical representative of `x` modulo `p^n * Z_(p)`: an element of
/// `Z[1/p]` of the form `p^w * u` with `0 <= u < p^(n-w)` and `p` not
/// dividing `u`, or `0` when `v_p(x) >= n`.
pub fn reduce_mod_pn(x: &Q, p: u64, n: i64) -> Q {
    match val_p(x, p) {
        None => Q::zero(),
        Some(w) if w >= n => Q::zero(),
        Some(w) => {
            let pb = BigInt::from(p);
            let modulus = pb.pow((n - w) as u32);
            // x = p^w * num/den with num, den prime to p
            let mut num = x.numer().clone();
            let mut den = x.denom().clone();
            if w >= 0 {
                num /= pb.pow(w as u32);
            } else {
                den /= pb.pow((-w) as u32);
            }
            let num = ((num % &modulus) + &modulus) % &modulus;
            let den = ((den % &modulus) + &modulus) % &modulus;
            let den_inv = mod_inv_big(&den, &modulus).expect("denominator is a unit");
            let u = (num * den_inv) % &modulus;
            let base = if w >= 0 {
                Q::from_integer(pb.pow(w as u32))
            } else {
                Q::new(BigInt::one(), pb.pow((-w) as u32))
            };
            base * Q::from_integer(u)
        }
    }
}

fn mod_inv_big(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let (mut r0, mut r1) = (m.clone(), ((a % m) + m) % m);
    let (mut s0, mut s1) = (BigInt::zero(), BigInt::one());
    while !r1.is_zero() {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        r0 = std::mem::replace(&mut r1, r2);
        let s2 = &s0 - &q * &s1;
        s0 = std::mem::replace(&mut s1, s2);
    }
    if r0 != BigInt::one() {
        return None;
    }
    Some(((s0 % m) + m) % m)
}

/// A 2x2 matrix over Q, row major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mat2 {
    pub e: [[Q; 2]; 2],
}

impl fmt::Debug for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{}, {}], [{}, {}]]",
            self.e[0][0], self.e[0][1], self.e[1][0], self.e[1][1]
        )
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Mat2 {
    pub fn new(a: Q, b: Q, c: Q, d: Q) -> Self {
        Mat2 { e: [[a, b], [c, d]] }
    }

    pub fn from_i64(a: i64, b: i64, c: i64, d: i64) -> Self {
        Self::new(qi(a), qi(b), qi(c), qi(d))
    }

    pub fn identity() -> Self {
        Self::from_i64(1, 0, 0, 1)
    }

    pub fn det(&self) -> Q {
        &self.e[0][0] * &self.e[1][1] - &self.e[0][1] * &self.e[1][0]
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let mut out = [[Q::zero(), Q::zero()], [Q::zero(), Q::zero()]];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = &self.e[i][0] * &rhs.e[0][j] + &self.e[i][1] * &rhs.e[1][j];
            }
        }
        Mat2 { e: out }
    }

    pub fn inv(&self) -> Result<Self> {
        let d = self.det();
        if d.is_zero() {
            return Err(Error::SingularMatrix);
        }
        Ok(Mat2::new(
            &self.e[1][1] / &d,
            -&self.e[0][1] / &d,
            -&self.e[1][0] / &d,
            &self.e[0][0] / &d,
        ))
    }

    pub fn neg(&self) -> Self {
        Mat2::new(
            -self.e[0][0].clone(),
            -self.e[0][1].clone(),
            -self.e[1][0].clone(),
            -self.e[1][1].clone(),
        )
    }

    pub fn trace(&self) -> Q {
        &self.e[0][0] + &self.e[1][1]
    }

    pub fn is_integer(&self) -> bool {
        self.e.iter().flatten().all(|x| x.is_integer())
    }

    /// Entries as `i64` when the matrix is integral and small enough.
    pub fn to_i64(&self) -> Option<[[i64; 2]; 2]> {
        let mut out = [[0i64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                if !self.e[i][j].is_integer() {
                    return None;
                }
                out[i][j] = i64::try_from(self.e[i][j].numer().clone()).ok()?;
            }
        }
        Some(out)
    }

    pub fn to_bigint(&self) -> Option<[[BigInt; 2]; 2]> {
        if !self.is_integer() {
            return None;
        }
        Some([
            [self.e[0][0].numer().clone(), self.e[0][1].numer().clone()],
            [self.e[1][0].numer().clone(), self.e[1][1].numer().clone()],
        ])
    }

    /// Minimal p-adic valuation over the four entries (`None` for the zero
    /// matrix).
    pub fn min_val(&self, p: u64) -> Option<i64> {
        self.e
            .iter()
            .flatten()
            .filter_map(|x| val_p(x, p))
            .min()
    }

    /// `p^(-min_val) * self`: scaled to be p-integral and p-primitive.
    pub fn p_primitive(&self, p: u64) -> Self {
        let v = self.min_val(p).expect("zero matrix");
        let f = if v >= 0 {
            Q::new(BigInt::one(), BigInt::from(p).pow(v as u32))
        } else {
            Q::from_integer(BigInt::from(p).pow((-v) as u32))
        };
        Mat2::new(
            &self.e[0][0] * &f,
            &self.e[0][1] * &f,
            &self.e[1][0] * &f,
            &self.e[1][1] * &f,
        )
    }
}

/// `S = [[0,-1],[1,0]]`, order 4.
pub fn mat_s() -> Mat2 {
    Mat2::from_i64(0, -1, 1, 0)
}

/// `T = [[1,1],[0,1]]`.
pub fn mat_t() -> Mat2 {
    Mat2::from_i64(1, 1, 0, 1)
}

/// `U = S T = [[0,-1],[1,1]]`, order 6.
pub fn mat_u() -> Mat2 {
    mat_s().mul(&mat_t())
}

/// The Weyl flip `t -> 1/t`.
pub fn mat_w() -> Mat2 {
    Mat2::from_i64(0, 1, 1, 0)
}

/// A single letter of a word in the two distinguished generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Letter {
    /// generator index: 0 for the order-4 generator, 1 for the order-6 one
    pub gen: usize,
    pub inverse: bool,
}

/// Decompose `g` in SL2(Z) as a word in `S` and `T` by the Euclidean
/// algorithm on the first column; returns letters multiplying left to right.
///
/// The output alphabet is `{S, S^-1, T, T^-1}` encoded as (matrix, letter in
/// S/U alphabet done by `word_in_s_u`).
fn word_in_s_t(g: &Mat2) -> Result<Vec<(char, i64)>> {
    let m = g
        .to_bigint()
        .ok_or_else(|| Error::NotInGroup("word decomposition needs an integer matrix".into()))?;
    if g.det() != Q::one() {
        return Err(Error::NotInGroup("word decomposition needs determinant 1".into()));
    }
    let mut a = m[0][0].clone();
    let mut b = m[0][1].clone();
    let mut c = m[1][0].clone();
    let mut d = m[1][1].clone();
    // word such that  g = word * h, h the running reduced matrix
    let mut word: Vec<(char, i64)> = Vec::new();
    while !c.is_zero() {
        if !a.is_zero() {
            // q with |a - qc| minimal-ish (euclidean floor is enough)
            let q = num_integer::Integer::div_floor(&a, &c);
            if !q.is_zero() {
                // h <- T^-q h ; record T^q
                a -= &q * &c;
                b -= &q * &d;
                word.push(('T', i64::try_from(&q).map_err(|_| {
                    Error::ResourceLimit("word exponent exceeds i64".into())
                })?));
            }
        }
        // h <- S^-1 h ; record S.   S^-1 = [[0,1],[-1,0]]
        let (na, nb) = (c.clone(), d.clone());
        let (nc, nd) = (-a.clone(), -b.clone());
        a = na;
        b = nb;
        c = nc;
        d = nd;
        word.push(('S', 1));
    }
    // h = [[a, b],[0, d]] with a*d = 1
    if a == BigInt::from(-1) {
        // h = [[-1, b],[0,-1]] = S^2 T^x with x = -b
        word.push(('S', 2));
        let x = -&b;
        if !x.is_zero() {
            word.push(('T', i64::try_from(&x).map_err(|_| {
                Error::ResourceLimit("word exponent exceeds i64".into())
            })?));
        }
    } else if !b.is_zero() {
        word.push(('T', i64::try_from(&b).map_err(|_| {
            Error::ResourceLimit("word exponent exceeds i64".into())
        })?));
    }
    Ok(word)
}

/// Word for `g` in the alphabet `{S^±1, U^±1}` with `U = S T`
/// (so `T = S^-1 U`).  The product of the letters left to right equals `g`.
pub fn word_in_s_u(g: &Mat2) -> Result<Vec<Letter>> {
    let st_word = word_in_s_t(g)?;
    let mut out = Vec::new();
    for (ch, k) in st_word {
        match ch {
            'S' => {
                let inv = k < 0;
                for _ in 0..k.unsigned_abs() {
                    out.push(Letter { gen: 0, inverse: inv });
                }
            }
            'T' => {
                // T = S^-1 U, T^-1 = U^-1 S
                if k >= 0 {
                    for _ in 0..k {
                        out.push(Letter { gen: 0, inverse: true });
                        out.push(Letter { gen: 1, inverse: false });
                    }
                } else {
                    for _ in 0..(-k) {
                        out.push(Letter { gen: 1, inverse: true });
                        out.push(Letter { gen: 0, inverse: false });
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    // sanity: multiply back
    let mut acc = Mat2::identity();
    for l in &out {
        let m = if l.gen == 0 { mat_s() } else { mat_u() };
        let m = if l.inverse { m.inv()? } else { m };
        acc = acc.mul(&m);
    }
    if acc != *g {
        return Err(Error::NotInGroup("word decomposition failed verification".into()));
    }
    Ok(out)
}

/// Image of `g` under the abelianization of SL2(Z), identified with Z/12
/// (the class of `T` generates; `S` maps to `-3`).
pub fn abelianized_sl2z(g: &Mat2) -> Result<i64> {
    let w = word_in_s_t(g)?;
    let mut acc: i64 = 0;
    for (ch, k) in w {
        match ch {
            'S' => acc += -3 * k,
            'T' => acc += k,
            _ => unreachable!(),
        }
    }
    Ok(acc.rem_euclid(12))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_decomposition_round_trips() {
        let cases = [
            Mat2::from_i64(3, 2, 4, 3),
            Mat2::from_i64(1, 0, 0, 1),
            Mat2::from_i64(-1, 0, 0, -1),
            Mat2::from_i64(1, 5, 0, 1),
            Mat2::from_i64(0, -1, 1, 0),
            Mat2::from_i64(7, 3, 30, 13),
            Mat2::from_i64(-19, 4, -5, 1),
        ];
        for g in cases {
            // word_in_s_u verifies the product internally
            word_in_s_u(&g).unwrap();
        }
    }

    #[test]
    fn abelianization_is_a_homomorphism() {
        let gens = [
            Mat2::from_i64(3, 2, 4, 3),
            Mat2::from_i64(1, 1, 0, 1),
            Mat2::from_i64(0, -1, 1, 0),
            Mat2::from_i64(2, 1, 1, 1),
        ];
        for g in &gens {
            for h in &gens {
                let lhs = abelianized_sl2z(&g.mul(h)).unwrap();
                let rhs = (abelianized_sl2z(g).unwrap() + abelianized_sl2z(h).unwrap()) % 12;
                assert_eq!(lhs, rhs, "g={g:?} h={h:?}");
            }
        }
        // defining relations die: S^4 and (ST)^6
        assert_eq!(abelianized_sl2z(&mat_s()).unwrap(), 9);
        assert_eq!(abelianized_sl2z(&mat_t()).unwrap(), 1);
        let u = mat_u();
        let mut u6 = Mat2::identity();
        for _ in 0..6 {
            u6 = u6.mul(&u);
        }
        assert_eq!(abelianized_sl2z(&u6).unwrap(), 0);
    }

    #[test]
    fn reduce_mod_pn_canonicalizes() {
        let p = 11;
        assert_eq!(reduce_mod_pn(&qi(121 + 5), p, 2), qi(5));
        assert_eq!(reduce_mod_pn(&qi(121), p, 2), qi(0));
        // 1/3 mod 11: 3*4=12=1 -> 4
        assert_eq!(reduce_mod_pn(&Q::new(1.into(), 3.into()), p, 1), qi(4));
        // x = 1/(11*2): v = -1, unit 1/2 -> inverse of 2 mod 11^2 is 61
        let x = Q::new(1.into(), 22.into());
        let r = reduce_mod_pn(&x, p, 1);
        assert_eq!(r, Q::new(61.into(), 11.into()));
        // reduction is idempotent and congruent
        let diff = &x - &r;
        assert!(val_p(&diff, p).unwrap() >= 1);
    }
}
