//! The split multiplicative curve `E_q / Q_p`: Weierstrass coefficients
//! as `q`-series, the analytic parametrization `K_p^x / q^Z -> E_q`, the
//! lattice-killing logarithm, homothety indices of period lattices, the
//! power isogeny, and the curve-side Darmon point.

use crate::error::{Error, Result};
use crate::padic::{PAdicScalar, QuadElem};
use num_bigint::BigInt;
use num_rational::BigRational;
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

/// `y^2 + xy = x^3 + a4 x + a6` with `a4, a6` the classical `q`-series,
/// truncated past the working precision.
#[derive(Clone, Debug)]
pub struct TateCurve {
    pub p: u64,
    pub q: PAdicScalar,
    pub prec: i64,
    pub a4: PAdicScalar,
    pub a6: PAdicScalar,
}

/// `s_k(q) = sum_{n>=1} n^k q^n / (1 - q^n)`, truncated once the term
/// valuation clears the precision.
fn s_series(q: &PAdicScalar, k: u32, prec: i64) -> Result<PAdicScalar> {
    let p = q.p();
    let vq = q.valuation().ok_or(Error::DivisionByZero)?;
    assert!(vq >= 1);
    let mut acc = PAdicScalar::zero(p, prec);
    let mut qn = PAdicScalar::one(p, prec);
    let mut n: i64 = 0;
    loop {
        n += 1;
        qn = qn.mul(q);
        if n * vq > prec {
            return Ok(acc);
        }
        let nk = (0..k).fold(1i64, |a, _| a.saturating_mul(n));
        let one = PAdicScalar::one(p, prec);
        let term = qn.mul_i64(nk).div(&one.sub(&qn))?;
        acc = acc.add(&term);
    }
}

impl TateCurve {
    pub fn new(q: PAdicScalar, prec: i64) -> Result<Self> {
        let p = q.p();
        if q.valuation().map(|v| v < 1).unwrap_or(true) {
            return Err(Error::BadDatum(
                "the period must have positive valuation".into(),
            ));
        }
        let s3 = s_series(&q, 3, prec)?;
        let s5 = s_series(&q, 5, prec)?;
        let a4 = s3.mul_i64(-5);
        let a6 = s3.mul_i64(5).add(&s5.mul_i64(7)).div_i64(-12)?;
        Ok(TateCurve { p, q, prec, a4, a6 })
    }

    /// Residual of the Weierstrass equation at an affine point.
    pub fn equation_residual(&self, x: &QuadElem, y: &QuadElem) -> QuadElem {
        let d = x.d;
        let a4 = QuadElem::from_scalar(self.a4, d);
        let a6 = QuadElem::from_scalar(self.a6, d);
        let lhs = y.mul(y).add(&x.mul(y));
        let rhs = x.mul(x).mul(x).add(&a4.mul(x)).add(&a6);
        lhs.sub(&rhs)
    }

    /// Curve description file `(p, q, N)`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let body = format!("tate-curve v1\np={}\nq={}\nN={}\n", self.p, self.q, self.prec);
        std::fs::write(path, body)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let mut p = None;
        let mut q = None;
        let mut n = None;
        for line in BufReader::new(f).lines() {
            let line = line?;
            if let Some(v) = line.strip_prefix("p=") {
                p = Some(v.parse::<u64>().map_err(|_| Error::Parse("bad p".into()))?);
            } else if let Some(v) = line.strip_prefix("q=") {
                q = Some(v.parse::<PAdicScalar>()?);
            } else if let Some(v) = line.strip_prefix("N=") {
                n = Some(v.parse::<i64>().map_err(|_| Error::Parse("bad N".into()))?);
            }
        }
        let q = q.ok_or_else(|| Error::Parse("curve file missing q".into()))?;
        if let Some(p) = p {
            if p != q.p() {
                return Err(Error::Parse("p does not match the period".into()));
            }
        }
        TateCurve::new(q, n.ok_or_else(|| Error::Parse("curve file missing N".into()))?)
    }
}

/// A projective point, `infinity` encoding `(0 : 1 : 0)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TatePoint {
    pub x: QuadElem,
    pub y: QuadElem,
    pub infinity: bool,
    /// reported precision of the coordinates
    pub prec: i64,
}

impl fmt::Display for TatePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.infinity {
            write!(f, "(0 : 1 : 0)")
        } else {
            write!(
                f,
                "({} : {} : 1) + O({}^{})",
                self.x,
                self.y,
                self.x.p(),
                self.prec
            )
        }
    }
}

/// The analytic parametrization: `u` modulo `q^Z` to a point of `E_q`,
/// via the classical theta-quotient series.
pub fn tate_point(e: &TateCurve, u: &QuadElem) -> Result<TatePoint> {
    let p = e.p;
    let d = u.d;
    let prec = e.prec.min(u.precision());
    let vq = e.q.valuation().expect("period is nonzero");
    let vu = u.valuation().ok_or(Error::DivisionByZero)?;
    // normalize to 0 <= v(u) < v(q)
    let shift = -vu.div_euclid(vq);
    let qe = QuadElem::from_scalar(e.q, d);
    let mut u = u.mul(&qe.pow(shift)?);
    if u.valuation() == Some(vq) {
        // boundary representative: one more division
        u = u.div(&qe)?;
    }
    let one = QuadElem::one(p, prec, d);
    if u.sub(&one).is_zero() {
        return Ok(TatePoint {
            x: QuadElem::zero(p, prec, d),
            y: one,
            infinity: true,
            prec,
        });
    }
    let x_term = |w: &QuadElem| -> Result<QuadElem> {
        // w / (1 - w)^2
        let den = one.sub(w);
        w.div(&den.mul(&den))
    };
    let y_term = |w: &QuadElem| -> Result<QuadElem> {
        // w^2 / (1 - w)^3
        let den = one.sub(w);
        w.mul(w).div(&den.mul(&den).mul(&den))
    };
    let mut x = x_term(&u)?;
    let mut y = y_term(&u)?;
    let u_inv = one.div(&u)?;
    let mut qn = one;
    let mut n: i64 = 0;
    loop {
        n += 1;
        qn = qn.mul(&qe);
        if n * vq > prec + vu.abs() + 2 {
            break;
        }
        let a = qn.mul(&u);
        let b = qn.mul(&u_inv);
        let c = x_term(&qn)?;
        x = x.add(&x_term(&a)?).add(&x_term(&b)?).sub(&c).sub(&c);
        // the n < 0 half of the Y series folds to -w/(1-w)^3 at w = q^n/u
        let neg_half = b.div(&one.sub(&b).pow(3)?)?;
        y = y.add(&y_term(&a)?).sub(&neg_half).add(&c);
    }
    Ok(TatePoint { x, y, infinity: false, prec })
}

/// The lattice-killing logarithm: `log(u) - (ord u / ord q) log(q)` on
/// the branch with `log p = 0`; vanishes exactly on `q^Z` and on
/// torsion.
pub fn log_q(e: &TateCurve, u: &QuadElem) -> Result<QuadElem> {
    let vu = u.valuation().ok_or(Error::DivisionByZero)?;
    let vq = e.q.valuation().expect("period is nonzero");
    let lu = u.iwasawa_log()?;
    let lq = QuadElem::from_scalar(e.q, u.d).iwasawa_log()?;
    let ratio = BigRational::new(BigInt::from(vu), BigInt::from(vq));
    let scale = PAdicScalar::from_ratio(u.p(), &ratio, lq.precision())?;
    Ok(lu.sub(&lq.scalar_mul(&scale)))
}

/// A discrete rank-one lattice `<u>` in `K_p^x` (the `d = 1` case of a
/// period lattice; the vector form is kept for the homothety check).
#[derive(Clone, Debug)]
pub struct PeriodLattice {
    pub gens: Vec<QuadElem>,
}

impl PeriodLattice {
    pub fn rank_one(u: QuadElem) -> Result<Self> {
        if u.valuation().map(|v| v == 0).unwrap_or(true) {
            return Err(Error::BadDatum(
                "a discrete lattice generator needs nonzero valuation".into(),
            ));
        }
        Ok(PeriodLattice { gens: vec![u] })
    }
}

/// Indices `(n1, n2)` of the intersection of two rank-one lattices in
/// each of them, or `NotHomothetic`.
pub fn homothety_index(l1: &PeriodLattice, l2: &PeriodLattice) -> Result<(i64, i64)> {
    let u = &l1.gens[0];
    let w = &l2.gens[0];
    let v1 = u.valuation().ok_or(Error::DivisionByZero)?;
    let v2 = w.valuation().ok_or(Error::DivisionByZero)?;
    if v1 == 0 || v2 == 0 {
        return Err(Error::NotHomothetic);
    }
    let g = {
        fn gcd(a: i64, b: i64) -> i64 {
            if b == 0 { a.abs() } else { gcd(b, a % b) }
        }
        gcd(v1, v2)
    };
    let (a, b) = (v2 / g, v1 / g);
    // u^a and w^b share a valuation; their ratio is a unit, and the
    // lattices meet exactly when it is a root of unity
    let r = u.pow(a)?.div(&w.pow(b)?)?;
    let one = QuadElem::one(r.p(), r.precision(), r.d);
    if !r.iwasawa_log()?.is_zero() {
        return Err(Error::NotHomothetic);
    }
    let p = r.p() as i64;
    let mut k = 1i64;
    let mut rk = r;
    while k <= p * p - 1 {
        if rk.sub(&one).is_zero() {
            let (mut ia, mut ib) = (a * k, b * k);
            if ia < 0 {
                ia = -ia;
                ib = -ib;
            }
            return Ok((ia.abs(), ib.abs()));
        }
        rk = rk.mul(&r);
        k += 1;
    }
    Err(Error::NotHomothetic)
}

/// The power isogeny composed with the parametrization:
/// `phi_A(u) = tate_point(u^n)` with `n` the homothety index of the
/// abstract period lattice against `<q>`.
pub fn phi_a(e: &TateCurve, u: &QuadElem, n: i64) -> Result<TatePoint> {
    tate_point(e, &u.pow(n)?)
}

/// The coordinate map `Psi_A = log_A o phi_A = log_q(.^n)`.
pub fn psi_a(e: &TateCurve, n: i64) -> impl Fn(&QuadElem) -> Result<QuadElem> + '_ {
    move |x| log_q(e, &x.pow(n)?)
}

/// The curve-side Darmon point: the logarithm value `f * v` for an
/// integer endomorphism `f`, and the exponentiated point when the value
/// is inside the convergence domain of `exp`.
pub fn darmon_point_on_a(
    value: &QuadElem,
    e: &TateCurve,
    f: i64,
) -> Result<(Option<TatePoint>, QuadElem)> {
    let log_val = value.mul_i64(f);
    if log_val.is_zero() {
        return Ok((
            Some(TatePoint {
                x: QuadElem::zero(e.p, e.prec, value.d),
                y: QuadElem::one(e.p, e.prec, value.d),
                infinity: true,
                prec: e.prec,
            }),
            log_val,
        ));
    }
    let v = log_val.valuation().expect("nonzero");
    if v < 1 {
        // exp does not converge: report the log form only
        return Ok((None, log_val));
    }
    let u = log_val.exp()?;
    Ok((Some(tate_point(e, &u)?), log_val))
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: u64 = 11;
    const PREC: i64 = 8;

    fn fixture_curve() -> TateCurve {
        // q = 11: the simplest split period at p = 11
        TateCurve::new(PAdicScalar::from_i64(P, 11, PREC), PREC).unwrap()
    }

    fn qe(n: i64) -> QuadElem {
        QuadElem::from_scalar(PAdicScalar::from_i64(P, n, PREC), 2)
    }

    #[test]
    fn lattice_points_map_to_identity() {
        let e = fixture_curve();
        for k in [1i64, 2, 3, -1] {
            let u = QuadElem::from_scalar(e.q, 2).pow(k).unwrap();
            assert!(tate_point(&e, &u).unwrap().infinity);
        }
    }

    #[test]
    fn minus_one_is_two_torsion() {
        let e = fixture_curve();
        let pt = tate_point(&e, &qe(-1)).unwrap();
        assert!(!pt.infinity);
        // 2-torsion on y^2 + xy = ... means y = -(y + x), i.e. 2y + x = 0
        let res = pt.y.mul_i64(2).add(&pt.x);
        assert!(res.valuation().map(|v| v >= 6).unwrap_or(true), "2y+x = {res}");
    }

    #[test]
    fn points_satisfy_the_curve_equation() {
        let e = fixture_curve();
        for u in [qe(2), qe(3), qe(7).div(&qe(5)).unwrap(), qe(-4)] {
            let pt = tate_point(&e, &u).unwrap();
            let res = e.equation_residual(&pt.x, &pt.y);
            assert!(
                res.valuation().map(|v| v >= 6).unwrap_or(true),
                "residual {res} for u = {u}"
            );
        }
    }

    #[test]
    fn parametrization_is_q_periodic_and_galois_equivariant() {
        let e = fixture_curve();
        let u = qe(3);
        let pt1 = tate_point(&e, &u).unwrap();
        let pt2 = tate_point(&e, &u.mul(&QuadElem::from_scalar(e.q, 2))).unwrap();
        // normalization divides the period back out, at a small precision
        // cost; the coordinates agree on the common precision
        assert!(pt1.x.sub(&pt2.x).is_zero(), "{} vs {}", pt1.x, pt2.x);
        assert!(pt1.y.sub(&pt2.y).is_zero());
        // a genuinely quadratic input: conjugate input gives conjugate point
        let w = qe(3).add(&QuadElem::new(
            PAdicScalar::zero(P, PREC),
            PAdicScalar::from_i64(P, 1, PREC),
            2,
        ));
        let pw = tate_point(&e, &w).unwrap();
        let pwc = tate_point(&e, &w.conj()).unwrap();
        assert_eq!(pw.x.conj(), pwc.x);
        assert_eq!(pw.y.conj(), pwc.y);
    }

    #[test]
    fn log_kills_the_lattice_exactly() {
        let e = fixture_curve();
        let q = QuadElem::from_scalar(e.q, 2);
        assert!(log_q(&e, &q).unwrap().is_zero());
        assert!(log_q(&e, &q.pow(3).unwrap()).unwrap().is_zero());
        // homomorphism
        let (u, v) = (qe(2), qe(3));
        let both = log_q(&e, &u.mul(&v)).unwrap();
        let sum = log_q(&e, &u).unwrap().add(&log_q(&e, &v).unwrap());
        assert!(both.sub(&sum).is_zero());
        // torsion killed: the Teichmuller lift of 10 is a root of unity
        let mut t = qe(10);
        for _ in 0..6 {
            // Newton toward t^(p-1) = 1 by repeated p-powering
            let mut s = t;
            for _ in 0..P - 1 {
                s = s.mul(&t);
            }
            t = s;
        }
        assert!(log_q(&e, &t).unwrap().is_zero());
    }

    #[test]
    fn homothety_indices() {
        let e = fixture_curve();
        let q = QuadElem::from_scalar(e.q, 2);
        let l1 = PeriodLattice::rank_one(q).unwrap();
        let l2 = PeriodLattice::rank_one(q.mul(&q)).unwrap();
        assert_eq!(homothety_index(&l1, &l1.clone()).unwrap(), (1, 1));
        assert_eq!(homothety_index(&l1, &l2).unwrap(), (2, 1));
        // non-discrete generator is rejected at construction
        assert!(PeriodLattice::rank_one(qe(3)).is_err());
        // discrete but incommensurable unit parts
        let w = q.mul(&qe(3));
        let l3 = PeriodLattice::rank_one(w).unwrap();
        assert!(matches!(homothety_index(&l1, &l3), Err(Error::NotHomothetic)));
    }

    #[test]
    fn phi_a_trivial_index_is_the_parametrization() {
        let e = fixture_curve();
        let u = qe(5);
        assert_eq!(phi_a(&e, &u, 1).unwrap(), tate_point(&e, &u).unwrap());
        // homomorphism through the lattice: u^2 maps as doubling input
        assert_eq!(phi_a(&e, &u, 2).unwrap(), tate_point(&e, &u.mul(&u)).unwrap());
    }

    #[test]
    fn curve_file_round_trip() {
        let e = fixture_curve();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.txt");
        e.save(&path).unwrap();
        let e2 = TateCurve::load(&path).unwrap();
        assert_eq!(e.a4, e2.a4);
        assert_eq!(e.a6, e2.a6);
    }

    #[test]
    fn darmon_point_on_a_scales_in_f() {
        let e = fixture_curve();
        let v = QuadElem::from_scalar(PAdicScalar::from_i64(P, 22, PREC), 2);
        let (pt0, l0) = darmon_point_on_a(&v, &e, 0).unwrap();
        assert!(l0.is_zero() && pt0.unwrap().infinity);
        let (_, l1) = darmon_point_on_a(&v, &e, 1).unwrap();
        let (_, l2) = darmon_point_on_a(&v, &e, 2).unwrap();
        assert!(l2.sub(&l1.mul_i64(2)).is_zero());
        // unit-valuation log value cannot be exponentiated
        let bad = qe(3);
        let (pt, _) = darmon_point_on_a(&bad, &e, 1).unwrap();
        assert!(pt.is_none());
    }
}
