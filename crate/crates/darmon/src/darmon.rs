//! The arithmetic endpoint over a real quadratic field: optimal
//! embeddings of the order of conductor `c`, their fixed points on the
//! `p`-adic upper half space, the associated unit and group element, the
//! multiplicative boundary integral, and the main evaluation
//! `Psi(P) = -t * sum_B Psi(a - z b) * mu~(B)` over the primitive boxes.

use crate::bttree::{cover, ChartPoint};
use crate::cocycle::{exponent_t, hecke_stabilize, GammaCocycle};
use crate::error::{Error, Result};
use crate::lift::{lift_from_values, LiftedCocycle};
use crate::mat::{mat_s, mat_u, Mat2};
use crate::measures::P1Measure;
use crate::padic::{pow_p, PAdicScalar, QuadElem};
use crate::quatalg::GroupDatum;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use std::fmt::Write as _;

type Q = BigRational;

/// Square-free part of a positive integer (the `d` with `sqrt(d_K)` a
/// rational multiple of `sqrt(d)`).
pub fn squarefree_part(n: i64) -> i64 {
    assert!(n > 0);
    let mut n = n;
    let mut out = 1;
    let mut q = 2;
    while q * q <= n {
        let mut e = 0;
        while n % q == 0 {
            n /= q;
            e += 1;
        }
        if e % 2 == 1 {
            out *= q;
        }
        q += 1;
    }
    out * n
}

/// Is `a` a square modulo the odd prime `p`?
pub fn is_residue(a: i64, p: u64) -> bool {
    let r = a.rem_euclid(p as i64) as u64;
    if r == 0 {
        return true;
    }
    (0..p).any(|x| (x * x) % p == r)
}

/// An optimal embedding of the order of conductor `c` in the real
/// quadratic field of discriminant `d_k`, recorded by the trace-zero
/// matrix `m` with `m^2 = d_k` that is the image of `sqrt(d_k)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OptimalEmbedding {
    pub d_k: i64,
    pub c: i64,
    /// `[[a, b], [c', -a]]` with `a^2 + b c' = d_k`
    pub mat: [[i64; 2]; 2],
}

impl OptimalEmbedding {
    pub fn to_mat2(&self) -> Mat2 {
        let m = self.mat;
        Mat2::from_i64(m[0][0], m[0][1], m[1][0], m[1][1])
    }

    /// The order `{x + y sqrt(d_k) : image integral}` equals
    /// `Z + c O_K` — an exact lattice comparison in `(x, y)` coordinates.
    pub fn is_optimal(&self) -> bool {
        let [[a, b], [cp, _]] = self.mat;
        if a * a + b * cp != self.d_k {
            return false;
        }
        // y-coordinates with integral image form (1/g)Z
        let g = gcd3(b.abs(), cp.abs(), (2 * a).abs());
        if g == 0 || g * self.c != 2 {
            return false;
        }
        // x-alignment of the second basis vector (x == -a/g mod Z against
        // the generator of c O_K over Z)
        if self.d_k % 4 == 0 {
            // generator c*sqrt(d_k)/2 has integral x-part
            (2 * a) % (2 * g) == 0
        } else {
            // generator c*(1 + sqrt(d_k))/2 has x-part c/2
            (2 * a + self.c * g).rem_euclid(2 * g) == 0
        }
    }
}

fn gcd3(a: i64, b: i64, c: i64) -> i64 {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    gcd(gcd(a, b), c)
}

/// Short words in the generators, used to identify conjugate embeddings.
fn short_words(datum: &GroupDatum, max_len: usize) -> Result<Vec<Mat2>> {
    let gens = datum.generator_mats();
    let mut all: Vec<Mat2> = vec![Mat2::identity()];
    let mut seen: std::collections::HashSet<String> =
        all.iter().map(|m| format!("{m}")).collect();
    let mut frontier = all.clone();
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for g in gens.iter().chain(gens.iter()) {
                for h in [g.clone(), g.inv()?] {
                    let c = w.mul(&h);
                    if seen.insert(format!("{c}")) {
                        next.push(c);
                    }
                }
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    Ok(all)
}

/// Bounded brute-force search for optimal embeddings, deduplicated by
/// conjugation with short words in the generators.  An empty result is
/// not a proof of nonexistence.
pub fn find_embeddings(
    datum: &GroupDatum,
    d_k: i64,
    c: i64,
    search_bound: i64,
) -> Result<Vec<OptimalEmbedding>> {
    if datum.disc != 1 {
        return Err(Error::OracleUnavailable(
            "embedding search is implemented for the matrix case".into(),
        ));
    }
    if d_k <= 0 || (d_k % 4 != 0 && d_k % 4 != 1) {
        return Err(Error::BadDatum(format!("{d_k} is not a discriminant")));
    }
    if is_residue(d_k, datum.p) {
        return Err(Error::BadDatum(format!(
            "{} splits or ramifies at p = {}: not inert",
            d_k, datum.p
        )));
    }
    let words = short_words(datum, 4)?;
    let mut found: Vec<OptimalEmbedding> = Vec::new();
    for a in -search_bound..=search_bound {
        let rem = d_k - a * a;
        for b in -search_bound..=search_bound {
            if b == 0 || rem % b != 0 {
                continue;
            }
            let cp = rem / b;
            if cp.abs() > search_bound {
                continue;
            }
            let cand = OptimalEmbedding { d_k, c, mat: [[a, b], [cp, -a]] };
            if !cand.is_optimal() {
                continue;
            }
            let cm = cand.to_mat2();
            let dup = found.iter().any(|e| {
                let em = e.to_mat2();
                words.iter().any(|w| match w.inv() {
                    Ok(wi) => w.mul(&em).mul(&wi) == cm,
                    Err(_) => false,
                })
            });
            if !dup {
                found.push(cand);
            }
        }
    }
    if found.is_empty() {
        return Err(Error::NoSolution(format!(
            "no optimal embedding found with entries bounded by {search_bound}"
        )));
    }
    Ok(found)
}

/// The fixed point `z = (a + sqrt(d_k)) / c'` of the embedded torus on
/// the boundary, together with its conjugate: the root of
/// `c' z^2 - 2 a z - b` that is an eigenvector for `+sqrt(d_k)`.
pub fn fixed_point(psi: &OptimalEmbedding, p: u64, prec: i64) -> Result<(QuadElem, QuadElem)> {
    let [[a, _b], [cp, _]] = psi.mat;
    if cp == 0 {
        return Err(Error::DegenerateForm);
    }
    let d0 = squarefree_part(psi.d_k);
    let sqrt_dk = QuadElem::sqrt_scalar(&PAdicScalar::from_i64(p, psi.d_k, prec), d0)?;
    let z = sqrt_dk
        .add(&QuadElem::from_scalar(PAdicScalar::from_i64(p, a, prec), d0))
        .div_i64(cp)?;
    Ok((z, z.conj()))
}

/// The fundamental norm-one unit of the order of conductor `c`, returned
/// as `(t, s)` with `eps_c = (t + s sqrt(d_k)) / 2`, `t, s > 0` minimal.
pub fn fundamental_unit(d_k: i64, c: i64) -> Result<(i64, i64)> {
    let in_order = |t: i64, s: i64| -> bool {
        if s % c != 0 {
            return false;
        }
        if d_k % 4 == 0 { t % 2 == 0 } else { (t - s) % 2 == 0 }
    };
    // minimal solution of t^2 - d_k s^2 = 4 with s >= 1
    let mut base = None;
    for s in 1..=2_000_000i64 {
        let t2 = d_k
            .checked_mul(s * s)
            .and_then(|x| x.checked_add(4))
            .ok_or_else(|| Error::ResourceLimit("Pell search overflow".into()))?;
        let t = (t2 as f64).sqrt().round() as i64;
        if t * t == t2 {
            base = Some((t, s));
            break;
        }
    }
    let (t0, s0) = base.ok_or_else(|| Error::ResourceLimit("Pell search bound hit".into()))?;
    // power up until the unit lies in Z + c O_K
    let (mut t, mut s) = (t0, s0);
    for _ in 0..64 {
        if in_order(t, s) {
            return Ok((t, s));
        }
        let nt = (t
            .checked_mul(t0)
            .zip(d_k.checked_mul(s).and_then(|x| x.checked_mul(s0)))
            .map(|(x, y)| x + y)
            .ok_or_else(|| Error::ResourceLimit("unit power overflow".into()))?)
            / 2;
        let ns = (t * s0 + s * t0) / 2;
        t = nt;
        s = ns;
    }
    Err(Error::ResourceLimit("no power of the unit lies in the order".into()))
}

/// `gamma_psi = psi(eps_c)`: an element of the arithmetic group fixing
/// `z_psi` projectively.
pub fn gamma_psi(psi: &OptimalEmbedding, unit: (i64, i64)) -> Result<Mat2> {
    let (t, s) = unit;
    let m = psi.to_mat2();
    let half = Q::new(BigInt::from(1), BigInt::from(2));
    let tt = Q::from(BigInt::from(t)) * &half;
    let ss = Q::from(BigInt::from(s)) * &half;
    let g = Mat2::new(
        &tt + &ss * &m.e[0][0],
        &ss * &m.e[0][1],
        &ss * &m.e[1][0],
        &tt - &ss * &m.e[0][0],
    );
    if !g.is_integer() || g.det() != Q::one() {
        return Err(Error::NotInGroup(format!(
            "psi(eps_c) = {g} is not in the arithmetic group"
        )));
    }
    Ok(g)
}

/// A sample point of a boundary cell: `None` encodes the point at
/// infinity.  `offset` shifts the sample within the cell.
pub fn sample_of_chart(p: u64, depth: u32, cp: ChartPoint, offset: i64) -> Result<Option<Q>> {
    let pk = pow_p(p, depth)? as i64;
    match cp {
        ChartPoint::Affine(a) => Ok(Some(Q::from(BigInt::from(a as i64 + pk * offset)))),
        ChartPoint::Infinite(c) => {
            let t = c as i64 + pk * offset;
            if t == 0 {
                Ok(None)
            } else {
                Ok(Some(Q::new(BigInt::one(), BigInt::from(p as i64 * t))))
            }
        }
    }
}

fn embed_q(p: u64, q: &Q, prec: i64, d: i64) -> Result<QuadElem> {
    Ok(QuadElem::from_scalar(PAdicScalar::from_ratio(p, q, prec)?, d))
}

/// `f_d(t) = (t - z1)/(t - z2)` evaluated at a boundary point, with
/// `f_d(inf) = 1`.
fn divisor_function(t: Option<&Q>, z1: &QuadElem, z2: &QuadElem) -> Result<QuadElem> {
    let p = z1.p();
    let prec = z1.precision().min(z2.precision());
    match t {
        None => Ok(QuadElem::one(p, prec, z1.d)),
        Some(q) => {
            let tq = embed_q(p, q, prec, z1.d)?;
            let num = tq.sub(z1);
            let den = tq.sub(z2);
            if num.is_zero() || den.is_zero() {
                return Err(Error::DegenerateForm);
            }
            num.div(&den)
        }
    }
}

/// Riemann product of an arbitrary boundary function against a harmonic
/// measure over the depth-`n` cover, with canonical (or offset) sample
/// points.  The `None` sample encodes the point at infinity.
pub fn mult_integral_with(
    nu: &P1Measure,
    prec: i64,
    d: i64,
    f: &dyn Fn(Option<&Q>) -> Result<QuadElem>,
    offsets: Option<&[i64]>,
) -> Result<Vec<QuadElem>> {
    let p = nu.p;
    let mut out = vec![QuadElem::one(p, prec, d); nu.m];
    for (idx, cp) in cover(p, nu.depth)?.into_iter().enumerate() {
        let off = offsets.map(|o| o[idx % o.len()]).unwrap_or(0);
        let t = sample_of_chart(p, nu.depth, cp, off)?;
        let fv = f(t.as_ref())?;
        for (o, &e) in out.iter_mut().zip(&nu.vals[idx]) {
            if e != 0 {
                *o = o.mul(&fv.pow(e)?);
            }
        }
    }
    Ok(out)
}

/// The multiplicative integral of `f_d(t) = (t - z1)/(t - z2)` against a
/// harmonic measure.
pub fn mult_integral(
    nu: &P1Measure,
    z1: &QuadElem,
    z2: &QuadElem,
    offsets: Option<&[i64]>,
) -> Result<Vec<QuadElem>> {
    let prec = z1.precision().min(z2.precision());
    let z1 = *z1;
    let z2 = *z2;
    mult_integral_with(nu, prec, z1.d, &move |t| divisor_function(t, &z1, &z2), offsets)
}

/// Moebius action of an integral matrix on a quadratic-extension point.
pub fn moebius(g: &Mat2, z: &QuadElem) -> Result<QuadElem> {
    let m = g
        .to_i64()
        .ok_or_else(|| Error::Parse(format!("{g} is not integral")))?;
    let p = z.p();
    let prec = z.precision();
    let sc = |n: i64| QuadElem::from_scalar(PAdicScalar::from_i64(p, n, prec), z.d);
    let num = sc(m[0][0]).mul(z).add(&sc(m[0][1]));
    let den = sc(m[1][0]).mul(z).add(&sc(m[1][1]));
    num.div(&den)
}

/// The 2-cocycle `d_z(g1, g2) = X-int (s - g1^{-1} z)/(s - z) d mu_{g2}`.
pub fn two_cocycle_dz(
    c: &mut GammaCocycle,
    datum: &GroupDatum,
    z: &QuadElem,
    g1: &Mat2,
    g2: &Mat2,
) -> Result<Vec<QuadElem>> {
    let mu = c.evaluate(datum, g2)?;
    let z1 = moebius(&g1.inv()?, z)?;
    mult_integral(&mu, &z1, z, None)
}

/// The coordinate map applied to the integrand: the default is the
/// branch of the logarithm with `log p = 0`.
pub type CoordinateMap<'a> = &'a dyn Fn(&QuadElem) -> Result<QuadElem>;

/// A computed point value with its full provenance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DarmonResult {
    pub value: Vec<QuadElem>,
    pub datum_hash: String,
    pub psi: [[i64; 2]; 2],
    pub d_k: i64,
    pub c: i64,
    pub depth: u32,
    pub prec: u32,
    pub r: u64,
    pub t: u64,
    pub seed: u64,
    pub kappa: i64,
}

impl DarmonResult {
    /// Deterministic text form (the golden-value format).
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        writeln!(s, "darmon-result v1").unwrap();
        writeln!(s, "datum={}", self.datum_hash).unwrap();
        writeln!(
            s,
            "psi=[[{},{}],[{},{}]]",
            self.psi[0][0], self.psi[0][1], self.psi[1][0], self.psi[1][1]
        )
        .unwrap();
        writeln!(s, "d_K={} c={}", self.d_k, self.c).unwrap();
        writeln!(
            s,
            "n={} N={} r={} t={} seed={} kappa={}",
            self.depth, self.prec, self.r, self.t, self.seed, self.kappa
        )
        .unwrap();
        for (i, v) in self.value.iter().enumerate() {
            writeln!(s, "value[{i}]={v}").unwrap();
        }
        s
    }
}

/// Evaluate the main formula `-t * sum_B Psi(a - z b) * mu~_{gamma}(B)`
/// over the primitive boxes at the lift's depth.  Every integrand is a
/// unit of the quadratic extension (asserted per box).
pub fn darmon_integral(
    lift: &mut LiftedCocycle,
    datum: &GroupDatum,
    gamma: &Mat2,
    z_psi: &QuadElem,
    t: u64,
    psi_map: CoordinateMap,
) -> Result<Vec<QuadElem>> {
    darmon_integral_sampled(lift, datum, gamma, z_psi, t, psi_map, None)
}

/// As [`darmon_integral`] but with every box sampled at a point offset
/// from the canonical corner by a seeded random multiple of `p^n` — a
/// consistency knob: the sum must be insensitive to the choice.
pub fn darmon_integral_sampled(
    lift: &mut LiftedCocycle,
    datum: &GroupDatum,
    gamma: &Mat2,
    z_psi: &QuadElem,
    t: u64,
    psi_map: CoordinateMap,
    sample_seed: Option<u64>,
) -> Result<Vec<QuadElem>> {
    let p = datum.p;
    let v = lift.evaluate(datum, gamma)?;
    let md = pow_p(p, lift.prec)? as i64;
    let pk = pow_p(p, lift.depth)? as i64;
    let prec = z_psi.precision();
    let mut acc = vec![QuadElem::zero(p, prec, z_psi.d); lift.m];
    for (&(a, b), vals) in &v.vals {
        if vals.iter().all(|&x| x == 0) {
            continue;
        }
        // per-box offsets keyed on (seed, a, b): independent of the
        // iteration order of the support map
        let (oa, ob) = match sample_seed {
            Some(s) => {
                let h = s
                    .wrapping_mul(0x9e3779b97f4a7c15)
                    .wrapping_add(a)
                    .wrapping_mul(0xbf58476d1ce4e5b9)
                    .wrapping_add(b)
                    .wrapping_mul(0x94d049bb133111eb);
                (((h >> 17) % p as u64) as i64, ((h >> 41) % p as u64) as i64)
            }
            None => (0, 0),
        };
        let sc = |n: i64| QuadElem::from_scalar(PAdicScalar::from_i64(p, n, prec), z_psi.d);
        let integrand = sc(a as i64 + pk * oa).sub(&z_psi.mul(&sc(b as i64 + pk * ob)));
        if integrand.valuation() != Some(0) {
            return Err(Error::PrecisionExhausted(format!(
                "integrand at box ({a},{b}) is not a unit"
            )));
        }
        let mapped = psi_map(&integrand)?;
        for (o, &e) in acc.iter_mut().zip(vals) {
            // measure values live modulo p^prec: use the centered lift
            let mut e = e as i64;
            if e > md / 2 {
                e -= md;
            }
            *o = o.add(&mapped.mul_i64(e));
        }
    }
    let tt = t as i64;
    Ok(acc.iter().map(|x| x.mul_i64(-tt)).collect())
}

/// Pipeline parameters for a full point computation.
#[derive(Clone, Debug)]
pub struct PointParams {
    pub depth: u32,
    pub prec: u32,
    pub r: u64,
    pub seed: u64,
    pub search_bound: i64,
}

impl Default for PointParams {
    fn default() -> Self {
        PointParams { depth: 3, prec: 6, r: 2, seed: 0, search_bound: 12 }
    }
}

/// End-to-end pipeline: embedding, radial cocycle, Hecke stabilization,
/// lift, and the main integral with the logarithm coordinate map.
pub fn darmon_point(
    datum: &GroupDatum,
    d_k: i64,
    c: i64,
    params: &PointParams,
) -> Result<DarmonResult> {
    let mut psi = find_embeddings(datum, d_k, c, params.search_bound)?
        .into_iter()
        .next()
        .expect("find_embeddings is nonempty on success");
    if psi.mat[1][0] == 0 {
        // fixed point at infinity: replace psi by a conjugate, which is
        // legitimate because the value only depends on the orbit
        let g = datum.generator_mats()[0].clone();
        let m = g.mul(&psi.to_mat2()).mul(&g.inv()?);
        let mm = m.to_i64().expect("conjugate of integral matrix");
        psi = OptimalEmbedding { d_k, c, mat: mm };
        if psi.mat[1][0] == 0 {
            return Err(Error::DegenerateForm);
        }
    }
    darmon_point_for_embedding(datum, &psi, params)
}

/// As [`darmon_point`] but with the embedding fixed by the caller (used
/// for conjugacy-invariance checks).
pub fn darmon_point_for_embedding(
    datum: &GroupDatum,
    psi: &OptimalEmbedding,
    params: &PointParams,
) -> Result<DarmonResult> {
    let sys = crate::cocycle::build_radial(datum, None)?;
    let coc = GammaCocycle::new(sys, params.depth);
    let mut stab = hecke_stabilize(datum, coc, params.r)?;
    let mu_s = stab.evaluate(datum, &mat_s())?;
    let mu_u = stab.evaluate(datum, &mat_u())?;
    let mut lift = lift_from_values(datum, &mu_s, &mu_u, params.prec, params.seed)?;
    darmon_point_with_lift(datum, psi, &mut lift, params)
}

/// Final stage of the pipeline, reusable with an externally built lift.
pub fn darmon_point_with_lift(
    datum: &GroupDatum,
    psi: &OptimalEmbedding,
    lift: &mut LiftedCocycle,
    params: &PointParams,
) -> Result<DarmonResult> {
    let p = datum.p;
    let t = exponent_t(datum)?;
    let (z, _zbar) = fixed_point(psi, p, params.prec as i64 + 2)?;
    let unit = fundamental_unit(psi.d_k, psi.c)?;
    let g = gamma_psi(psi, unit)?;
    let log_map: CoordinateMap = &|x| x.iwasawa_log();
    let value = darmon_integral(lift, datum, &g, &z, t, log_map)?;
    // precision ledger: losses from the exponent multiplication and the
    // finite-depth constancy of the integrand
    let kappa = crate::mat::val_p(&Q::from(BigInt::from(t as i64)), p).unwrap_or(0);
    Ok(DarmonResult {
        value,
        datum_hash: datum.hash.clone(),
        psi: psi.mat,
        d_k: psi.d_k,
        c: psi.c,
        depth: params.depth,
        prec: params.prec,
        r: params.r,
        t,
        seed: params.seed,
        kappa,
    })
}

/// Valuation of the coordinatewise difference of two value vectors — the
/// `agree modulo p^k` comparator used throughout the tests.
pub fn agreement_valuation(a: &[QuadElem], b: &[QuadElem]) -> i64 {
    let mut min = i64::MAX;
    for (x, y) in a.iter().zip(b) {
        let d = x.sub(y);
        let v = d.valuation().unwrap_or(d.precision());
        min = min.min(v);
    }
    min
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quatalg::fixture_datum;
    use num_traits::Zero;

    const P: u64 = 11;

    fn fixture_psi() -> OptimalEmbedding {
        OptimalEmbedding { d_k: 8, c: 1, mat: [[0, 2], [4, 0]] }
    }

    #[test]
    fn embedding_search_finds_the_standard_one() {
        let datum = fixture_datum(P).unwrap();
        let found = find_embeddings(&datum, 8, 1, 8).unwrap();
        assert!(!found.is_empty());
        for e in &found {
            assert!(e.is_optimal());
            let m = e.to_mat2();
            assert_eq!(m.trace(), Q::zero());
            assert_eq!(m.det(), Q::from(BigInt::from(-8)));
        }
    }

    #[test]
    fn wrong_norm_is_rejected_and_conjugates_are_deduplicated() {
        let bad = OptimalEmbedding { d_k: 8, c: 1, mat: [[1, 2], [3, -1]] };
        assert!(!bad.is_optimal()); // 1 + 6 != 8
        let datum = fixture_datum(P).unwrap();
        let found = find_embeddings(&datum, 8, 1, 8).unwrap();
        // the S-conjugate of each found embedding is not listed again
        let s = mat_s();
        for e in &found {
            let conj = s.mul(&e.to_mat2()).mul(&s.inv().unwrap());
            let cm = conj.to_i64().unwrap();
            assert!(!found.iter().any(|f| f.mat == cm && f.mat != e.mat));
        }
    }

    #[test]
    fn split_discriminant_is_rejected() {
        let datum = fixture_datum(P).unwrap();
        // 5 is a residue mod 11 (4^2 = 16 = 5)
        assert!(find_embeddings(&datum, 5, 1, 8).is_err());
    }

    #[test]
    fn fixed_point_is_an_eigenvector() {
        let psi = fixture_psi();
        let (z, zbar) = fixed_point(&psi, P, 8).unwrap();
        assert_eq!(z.conj(), zbar);
        // c' z^2 - 2 a z - b = 0 for [[0,2],[4,0]]: 4 z^2 = 2, z = sqrt(2)/2
        let lhs = z.mul(&z).mul_i64(4);
        let rhs = QuadElem::from_scalar(PAdicScalar::from_i64(P, 2, 8), z.d);
        assert!(lhs.sub(&rhs).valuation().map(|v| v >= 7).unwrap_or(true));
        // eigenvector: m (z, 1)^t = sqrt(8) (z, 1)^t
        let sqrt8 = QuadElem::sqrt_scalar(&PAdicScalar::from_i64(P, 8, 8), 2).unwrap();
        let top = z.mul_i64(0).add(&QuadElem::from_scalar(PAdicScalar::from_i64(P, 2, 8), 2));
        let want_top = sqrt8.mul(&z);
        assert!(top.sub(&want_top).valuation().map(|v| v >= 7).unwrap_or(true));
        let bottom = z.mul_i64(4);
        assert!(bottom.sub(&sqrt8).valuation().map(|v| v >= 7).unwrap_or(true));
    }

    #[test]
    fn degenerate_form_is_reported() {
        let psi = OptimalEmbedding { d_k: 8, c: 1, mat: [[2, 2], [0, -2]] };
        assert!(matches!(fixed_point(&psi, P, 6), Err(Error::DegenerateForm)));
    }

    #[test]
    fn fundamental_unit_of_z_sqrt2() {
        // eps_1 = 3 + 2 sqrt(2) = (6 + 2 sqrt(8)) / 2
        assert_eq!(fundamental_unit(8, 1).unwrap(), (6, 2));
        // norm 1: (t^2 - 8 s^2) / 4
        let (t, s) = fundamental_unit(8, 1).unwrap();
        assert_eq!(t * t - 8 * s * s, 4);
        // conductor 3: the minimal power with s divisible by 3
        let (t3, s3) = fundamental_unit(8, 3).unwrap();
        assert_eq!(s3 % 3, 0);
        assert_eq!(t3 * t3 - 8 * s3 * s3, 4);
        assert!(t3 > t);
    }

    #[test]
    fn gamma_psi_fixes_the_point() {
        let psi = fixture_psi();
        let g = gamma_psi(&psi, fundamental_unit(8, 1).unwrap()).unwrap();
        assert_eq!(g.to_i64().unwrap(), [[3, 2], [4, 3]]);
        assert_eq!(g.det(), Q::one());
        let (z, _) = fixed_point(&psi, P, 8).unwrap();
        let gz = moebius(&g, &z).unwrap();
        assert!(gz.sub(&z).valuation().map(|v| v >= 7).unwrap_or(true));
        // conjugation covariance: gamma_{g psi g^-1} = g gamma_psi g^-1
        let s = mat_s();
        let conj_m = s.mul(&psi.to_mat2()).mul(&s.inv().unwrap()).to_i64().unwrap();
        let psi2 = OptimalEmbedding { d_k: 8, c: 1, mat: conj_m };
        let g2 = gamma_psi(&psi2, fundamental_unit(8, 1).unwrap()).unwrap();
        assert_eq!(g2, s.mul(&g).mul(&s.inv().unwrap()));
    }

    #[test]
    fn mult_integral_basics() {
        let psi = fixture_psi();
        let (z, zbar) = fixed_point(&psi, P, 8).unwrap();
        let zero = P1Measure::zero(P, 2, 1).unwrap();
        let one = QuadElem::one(P, 8, z.d);
        // zero measure -> all ones
        for v in mult_integral(&zero, &z, &zbar, None).unwrap() {
            assert_eq!(v, one);
        }
        // equal divisor points -> f == 1
        let mut nu = P1Measure::zero(P, 2, 1).unwrap();
        nu.add_at(ChartPoint::Affine(3), &vec![2]);
        nu.add_at(ChartPoint::Affine(7), &vec![-2]);
        for v in mult_integral(&nu, &z, &z, None).unwrap() {
            assert_eq!(v, one);
        }
        // swapping the divisor inverts the result
        let a = mult_integral(&nu, &z, &zbar, None).unwrap();
        let b = mult_integral(&nu, &zbar, &z, None).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let prod = x.mul(y);
            assert!(prod.sub(&one).valuation().map(|v| v >= 6).unwrap_or(true));
        }
    }

    #[test]
    fn two_cocycle_normalization() {
        let datum = fixture_datum(P).unwrap();
        let sys = crate::cocycle::build_radial(&datum, None).unwrap();
        let mut c = GammaCocycle::new(sys, 2);
        let psi = fixture_psi();
        let (z, _) = fixed_point(&psi, P, 8).unwrap();
        let id = Mat2::identity();
        let g = mat_s().mul(&mat_u());
        let one = QuadElem::one(P, z.precision(), z.d);
        for v in two_cocycle_dz(&mut c, &datum, &z, &id, &g).unwrap() {
            assert_eq!(v, one);
        }
        for v in two_cocycle_dz(&mut c, &datum, &z, &g, &id).unwrap() {
            assert_eq!(v, one);
        }
    }

    #[test]
    fn darmon_integral_zero_and_linearity() {
        let datum = fixture_datum(P).unwrap();
        let psi = fixture_psi();
        let (z, _) = fixed_point(&psi, P, 8).unwrap();
        let g = gamma_psi(&psi, fundamental_unit(8, 1).unwrap()).unwrap();
        let log_map: CoordinateMap = &|x| x.iwasawa_log();
        // zero lift -> zero vector
        let zm = P1Measure::zero(P, 2, 1).unwrap();
        let mut zl = lift_from_values(&datum, &zm, &zm, 4, 0).unwrap();
        for v in darmon_integral(&mut zl, &datum, &g, &z, 1, log_map).unwrap() {
            assert!(v.is_zero());
        }
        // doubling the lift doubles the value
        let sys = crate::cocycle::build_radial(&datum, None).unwrap();
        let mut coc = GammaCocycle::new(sys, 2);
        let mu_s = coc.evaluate(&datum, &mat_s()).unwrap();
        let mu_u = coc.evaluate(&datum, &mat_u()).unwrap();
        let mut l1 = lift_from_values(&datum, &mu_s, &mu_u, 5, 0).unwrap();
        let mut mu_s2 = mu_s.clone();
        mu_s2.add_assign(&mu_s);
        let mut mu_u2 = mu_u.clone();
        mu_u2.add_assign(&mu_u);
        let mut l2 = lift_from_values(&datum, &mu_s2, &mu_u2, 5, 0).unwrap();
        let v1 = darmon_integral(&mut l1, &datum, &g, &z, 1, log_map).unwrap();
        let v2 = darmon_integral(&mut l2, &datum, &g, &z, 1, log_map).unwrap();
        for (x, y) in v1.iter().zip(&v2) {
            let diff = x.mul_i64(2).sub(y);
            assert!(diff.valuation().map(|v| v >= 4).unwrap_or(true), "2*{x} != {y}");
        }
    }

    #[test]
    fn pipeline_runs_and_is_deterministic() {
        let datum = fixture_datum(P).unwrap();
        let params = PointParams { depth: 2, prec: 4, ..Default::default() };
        let r1 = darmon_point(&datum, 8, 1, &params).unwrap();
        let r2 = darmon_point(&datum, 8, 1, &params).unwrap();
        assert_eq!(r1.serialize(), r2.serialize());
        assert_eq!(r1.value.len(), 1);
    }
}
