//! Weight-2 modular symbols for Gamma_0(p) via Manin symbols on P^1(F_p).
//!
//! This is the independent homology oracle: it computes the rank-one
//! quotient of cuspidal homology cut out by an integral Hecke eigenvalue and
//! the star involution, and evaluates the resulting homomorphism
//! `Gamma_0(p) -> Z` exactly (continued fractions and exact rational linear
//! algebra, no floating point and no p-adic truncation).

use crate::error::{Error, Result};
use crate::mat::{Mat2, Q};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

/// Index of the class of `(c : d)` in P^1(F_p): classes `(1 : i)` get index
/// `i` for `0 <= i < p`, and `(0 : 1)` gets index `p`.
pub fn p1_index(p: u64, c: i64, d: i64) -> usize {
    let pi = p as i64;
    let c = c.rem_euclid(pi) as u64;
    let d = d.rem_euclid(pi) as u64;
    assert!(c != 0 || d != 0, "(0:0) is not projective");
    if c != 0 {
        let cinv = crate::padic::mod_inv(c, p).expect("prime modulus");
        (crate::padic::mul_mod(d, cinv, p)) as usize
    } else {
        p as usize
    }
}

/// A representative in SL2(Z) of the coset of Gamma_0(p) indexed by
/// [`p1_index`]: its bottom row reduces to the class.
pub fn coset_rep(p: u64, index: usize) -> Mat2 {
    if index == p as usize {
        Mat2::identity()
    } else {
        Mat2::from_i64(0, -1, 1, index as i64)
    }
}

/// Schreier generators of Gamma_0(p) from the coset action of `S` and `T`
/// on P^1(F_p) (with the identity-based transversal of [`coset_rep`]).
pub fn schreier_generators(p: u64) -> Vec<Mat2> {
    let n = p as usize + 1;
    let mut out = Vec::new();
    for g in [Mat2::from_i64(0, -1, 1, 0), Mat2::from_i64(1, 1, 0, 1)] {
        for i in 0..n {
            let rg = coset_rep(p, i).mul(&g);
            let m = rg.to_i64().expect("integral");
            let j = p1_index(p, m[1][0], m[1][1]);
            let gamma = rg.mul(&coset_rep(p, j).inv().expect("unimodular"));
            let gm = gamma.to_i64().expect("integral");
            assert_eq!(gm[1][0].rem_euclid(p as i64), 0, "Schreier element in Gamma_0(p)");
            out.push(gamma);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// small dense linear algebra over Q
// ---------------------------------------------------------------------------

/// Reduced row echelon form in place; returns the pivot columns.
pub fn rref(rows: &mut Vec<Vec<Q>>) -> Vec<usize> {
    let nrows = rows.len();
    if nrows == 0 {
        return vec![];
    }
    let ncols = rows[0].len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(sel) = (r..nrows).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, sel);
        let inv = Q::one() / rows[r][c].clone();
        for x in rows[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..nrows {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                for j in 0..ncols {
                    let t = &rows[r][j] * &f;
                    rows[i][j] -= t;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == nrows {
            break;
        }
    }
    rows.truncate(r);
    pivots
}

/// Basis of the right kernel `{x : M x = 0}` of a row-major matrix.
pub fn right_kernel(m: &[Vec<Q>]) -> Vec<Vec<Q>> {
    if m.is_empty() {
        return vec![];
    }
    let ncols = m[0].len();
    let mut rows = m.to_vec();
    let pivots = rref(&mut rows);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    let mut basis = Vec::new();
    for &f in &free {
        let mut v = vec![Q::zero(); ncols];
        v[f] = Q::one();
        for (r, &pc) in pivots.iter().enumerate() {
            v[pc] = -rows[r][f].clone();
        }
        basis.push(v);
    }
    basis
}

/// Basis of the left kernel `{x : x M = 0}`.
pub fn left_kernel(m: &[Vec<Q>]) -> Vec<Vec<Q>> {
    if m.is_empty() {
        return vec![];
    }
    let ncols = m[0].len();
    let t: Vec<Vec<Q>> = (0..ncols)
        .map(|j| m.iter().map(|row| row[j].clone()).collect())
        .collect();
    right_kernel(&t)
}

fn vec_mat(v: &[Q], m: &[Vec<Q>]) -> Vec<Q> {
    let ncols = m.first().map_or(0, |r| r.len());
    (0..ncols)
        .map(|j| v.iter().zip(m).map(|(x, row)| x * &row[j]).sum())
        .collect()
}

// ---------------------------------------------------------------------------
// the Manin symbol space
// ---------------------------------------------------------------------------

/// The weight-2 modular symbol space for Gamma_0(p): the free module on
/// P^1(F_p) modulo the two-term and three-term Manin relations, with its
/// boundary map, star involution, and Hecke action by Merel matrices.
pub struct ManinSymbols {
    pub p: u64,
    /// number of Manin symbols, `p + 1`
    n: usize,
    /// reduced relation rows and their pivot columns
    rel: Vec<Vec<Q>>,
    rel_pivots: Vec<usize>,
    /// non-pivot symbol indices: coordinates on the quotient
    free_cols: Vec<usize>,
}

impl ManinSymbols {
    pub fn new(p: u64) -> Result<Self> {
        if p < 2 || (2..p).any(|d| p % d == 0) {
            return Err(Error::BadDatum(format!("{p} is not prime")));
        }
        let n = p as usize + 1;
        let sigma = [[0i64, -1], [1, 0]];
        let tau = [[0i64, -1], [1, -1]];
        let mut rows = Vec::new();
        for i in 0..n {
            let mut r = vec![Q::zero(); n];
            r[i] += Q::one();
            r[Self::act_right_index(p, i, &sigma)] += Q::one();
            rows.push(r);
            let mut r = vec![Q::zero(); n];
            r[i] += Q::one();
            let it = Self::act_right_index(p, i, &tau);
            r[it] += Q::one();
            r[Self::act_right_index(p, it, &tau)] += Q::one();
            rows.push(r);
        }
        let pivots = rref(&mut rows);
        let free_cols: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
        let ms = ManinSymbols {
            p,
            n,
            rel: rows,
            rel_pivots: pivots,
            free_cols,
        };
        // relations must be killed by the boundary map
        #[cfg(debug_assertions)]
        {
            let rel = ms.rel.clone();
            for r in &rel {
                let mut b = [Q::zero(), Q::zero()];
                for (i, x) in r.iter().enumerate() {
                    let bi = ms.boundary_of_symbol(i);
                    b[0] += &bi[0] * x;
                    b[1] += &bi[1] * x;
                }
                debug_assert!(b[0].is_zero() && b[1].is_zero());
            }
        }
        Ok(ms)
    }

    /// `(c:d) -> (c:d) g` on symbol indices.
    fn act_right_index(p: u64, i: usize, g: &[[i64; 2]; 2]) -> usize {
        let (c, d) = if i == p as usize { (0, 1) } else { (1, i as i64) };
        p1_index(p, c * g[0][0] + d * g[1][0], c * g[0][1] + d * g[1][1])
    }

    /// Dimension of the relation quotient.
    pub fn dim(&self) -> usize {
        self.free_cols.len()
    }

    /// Reduce a symbol-space vector to quotient coordinates.
    pub fn project(&self, v: &[Q]) -> Vec<Q> {
        let mut w = v.to_vec();
        for (r, &pc) in self.rel_pivots.iter().enumerate() {
            if !w[pc].is_zero() {
                let f = w[pc].clone();
                for j in 0..self.n {
                    let t = &self.rel[r][j] * &f;
                    w[j] -= t;
                }
            }
        }
        self.free_cols.iter().map(|&c| w[c].clone()).collect()
    }

    fn project_symbol(&self, i: usize) -> Vec<Q> {
        let mut v = vec![Q::zero(); self.n];
        v[i] = Q::one();
        self.project(&v)
    }

    /// Boundary of the symbol with index `i`, as a vector on the two cusp
    /// classes `([0], [oo])` of Gamma_0(p).
    fn boundary_of_symbol(&self, i: usize) -> [Q; 2] {
        // a lift g in SL2(Z) of the class: the symbol is {g 0, g oo}
        let g = coset_rep(self.p, i);
        let m = g.to_i64().expect("integral rep");
        let mut b = [Q::zero(), Q::zero()];
        b[self.cusp_class(m[0][0], m[1][0])] += Q::one(); // g oo = a/c
        b[self.cusp_class(m[0][1], m[1][1])] -= Q::one(); // g 0 = b/d
        b
    }

    /// Gamma_0(p)-class of the cusp `a/c`: index 0 for the class of 0,
    /// index 1 for the class of infinity (denominator divisible by p).
    fn cusp_class(&self, a: i64, c: i64) -> usize {
        let g = a.gcd(&c);
        let c = if g == 0 { c } else { c / g };
        usize::from(c.rem_euclid(self.p as i64) == 0)
    }

    /// Matrix (row-major, acting on quotient coordinate columns) induced by
    /// a map sending symbol `i` to a symbol-space vector.
    fn induced<F: Fn(usize) -> Vec<Q>>(&self, f: F) -> Vec<Vec<Q>> {
        let d = self.dim();
        let cols: Vec<Vec<Q>> = self.free_cols.iter().map(|&c| self.project(&f(c))).collect();
        (0..d)
            .map(|i| (0..d).map(|j| cols[j][i].clone()).collect())
            .collect()
    }

    /// The star involution `(c:d) -> (-c:d)` on the quotient.
    pub fn star(&self) -> Vec<Vec<Q>> {
        self.induced(|i| {
            let (c, d) = if i == self.p as usize { (0, 1) } else { (1, i as i64) };
            let j = p1_index(self.p, -c, d);
            let mut v = vec![Q::zero(); self.n];
            v[j] = Q::one();
            v
        })
    }

    /// Hecke operator `T_ell` on the quotient via Merel's family
    /// `{[[a,b],[c,d]] : ad - bc = ell, a > b >= 0, d > c >= 0}`.
    /// For `ell = p` this is the `U_p` operator (degenerate terms drop out).
    pub fn hecke(&self, ell: u64) -> Vec<Vec<Q>> {
        let mats = merel_matrices(ell);
        self.induced(|i| {
            let (c, d) = if i == self.p as usize { (0, 1) } else { (1, i as i64) };
            let mut v = vec![Q::zero(); self.n];
            for m in &mats {
                let nc = c * m[0][0] + d * m[1][0];
                let nd = c * m[0][1] + d * m[1][1];
                let pi = self.p as i64;
                if nc.rem_euclid(pi) == 0 && nd.rem_euclid(pi) == 0 {
                    continue; // non-primitive image (only for ell = p)
                }
                v[p1_index(self.p, nc, nd)] += Q::one();
            }
            v
        })
    }

    /// Dimension of the cuspidal subspace (kernel of the boundary map on the
    /// quotient); equals twice the genus of X_0(p).
    pub fn cuspidal_rank(&self) -> usize {
        let d = self.dim();
        // rows: quotient basis, cols: the two cusp classes
        let bmat: Vec<Vec<Q>> = self
            .free_cols
            .iter()
            .map(|&c| self.boundary_of_symbol(c).to_vec())
            .collect();
        // boundary of a general quotient vector x is x^T bmat; kernel of the
        // transpose pairing
        let bt: Vec<Vec<Q>> = (0..2).map(|j| (0..d).map(|i| bmat[i][j].clone()).collect()).collect();
        right_kernel(&bt).len()
    }

    /// The modular symbol `{oo, r}` (or 0 for `r = oo`) as a symbol-space
    /// vector, by the continued-fraction algorithm: the path from infinity
    /// through the convergents of `r` is a sum of unimodular paths
    /// `M_k {0, oo}` with `M_k = [[p_k, (-1)^(k-1) p_(k-1)],
    /// [q_k, (-1)^(k-1) q_(k-1)]]`, each contributing the Manin symbol of
    /// the bottom row of `M_k`.
    pub fn symbol_from_infinity(&self, r: Option<&Q>) -> Vec<Q> {
        let mut v = vec![Q::zero(); self.n];
        let Some(r) = r else { return v };
        let mut a = r.numer().clone();
        let mut b = r.denom().clone();
        // convergent denominators, seeded at (q_-2, q_-1) = (1, 0)
        let (mut qm2, mut qm1) = (BigInt::one(), BigInt::zero());
        let mut k: i64 = 0;
        loop {
            let digit = a.div_floor(&b);
            let rem = &a - &digit * &b;
            let qk = &digit * &qm1 + &qm2;
            let sign = if (k - 1).rem_euclid(2) == 0 { 1 } else { -1 };
            let idx = p1_index(
                self.p,
                big_mod_i64(&qk, self.p),
                sign * big_mod_i64(&qm1, self.p),
            );
            v[idx] += Q::one();
            if rem.is_zero() {
                break;
            }
            a = std::mem::replace(&mut b, rem);
            qm2 = std::mem::replace(&mut qm1, qk);
            k += 1;
        }
        v
    }
}

fn big_mod_i64(x: &BigInt, p: u64) -> i64 {
    let p = BigInt::from(p);
    ((x % &p + &p) % &p).to_i64().unwrap()
}

/// Merel's matrices of determinant `ell`.
pub fn merel_matrices(ell: u64) -> Vec<[[i64; 2]; 2]> {
    let l = ell as i64;
    let mut out = Vec::new();
    for a in 1..=l {
        for d in 1..=(l + 1 - a) {
            for b in 0..a {
                for c in 0..d {
                    if a * d - b * c == l {
                        out.push([[a, b], [c, d]]);
                    }
                }
            }
        }
    }
    out
}

/// The rank-one homology oracle: a functional on the Manin symbol space that
/// is a left eigenvector for `T_2` with the given integral eigenvalue and is
/// fixed by the star involution, scaled so that Gamma_0(p) maps onto Z.
pub struct HomologyOracle {
    pub p: u64,
    ms: ManinSymbols,
    /// functional on raw symbol vectors
    lambda: Vec<Q>,
    /// generator of the value group of the unscaled functional on Gamma_0(p)
    scale: Q,
}

impl HomologyOracle {
    pub fn new(p: u64, a2: i64) -> Result<Self> {
        let ms = ManinSymbols::new(p)?;
        let d = ms.dim();
        let t2 = ms.hecke(2);
        let star = ms.star();
        // lambda (T_2 - a2) = 0 and lambda (star - 1) = 0: left kernel of
        // the horizontally stacked matrix
        let mut stacked: Vec<Vec<Q>> = Vec::with_capacity(d);
        for i in 0..d {
            let mut row: Vec<Q> = t2[i].clone();
            row[i] -= Q::from_integer(BigInt::from(a2));
            let mut srow = star[i].clone();
            srow[i] -= Q::one();
            row.extend(srow);
            stacked.push(row);
        }
        let lk = left_kernel(&stacked);
        if lk.len() != 1 {
            return Err(Error::NoSolution(format!(
                "eigen-functional space for (a_2 = {a2}, star = +1) has dimension {} at p = {p}",
                lk.len()
            )));
        }
        // pull the functional back to raw symbol space
        let lam_q = &lk[0];
        let lambda: Vec<Q> = (0..ms.n)
            .map(|i| {
                let pi = ms.project_symbol(i);
                pi.iter().zip(lam_q).map(|(a, b)| a * b).sum()
            })
            .collect();
        let mut oracle = HomologyOracle {
            p,
            ms,
            lambda,
            scale: Q::one(),
        };
        // normalize: the value group over Schreier generators of Gamma_0(p)
        // is a cyclic subgroup of Q; rescale it to Z
        let vals: Vec<Q> = schreier_generators(p)
            .iter()
            .map(|g| oracle.value_raw(g))
            .collect::<Result<_>>()?;
        let gen = rational_gcd(&vals)
            .ok_or_else(|| Error::NoSolution("oracle functional vanishes on Gamma_0(p)".into()))?;
        oracle.scale = gen;
        Ok(oracle)
    }

    pub fn manin(&self) -> &ManinSymbols {
        &self.ms
    }

    /// Unscaled value of the functional on the class `{0, g 0}`.
    pub fn value_raw(&self, g: &Mat2) -> Result<Q> {
        let m = g
            .to_i64()
            .ok_or_else(|| Error::NotInGroup("oracle needs an integral matrix".into()))?;
        if g.det() != Q::one() || m[1][0].rem_euclid(self.p as i64) != 0 {
            return Err(Error::NotInGroup(format!(
                "{g:?} is not in Gamma_0({})",
                self.p
            )));
        }
        // g 0 = b/d; d != 0 in Gamma_0(p)
        let g0 = Q::new(BigInt::from(m[0][1]), BigInt::from(m[1][1]));
        let xi_g0 = self.ms.symbol_from_infinity(Some(&g0));
        let xi_0 = self.ms.symbol_from_infinity(Some(&Q::zero()));
        let val: Q = xi_g0
            .iter()
            .zip(&xi_0)
            .zip(&self.lambda)
            .map(|((a, b), l)| (a - b) * l)
            .sum();
        Ok(val)
    }

    /// The homomorphism `Gamma_0(p) -> Z` (surjective by construction).
    pub fn value(&self, g: &Mat2) -> Result<i64> {
        let v = self.value_raw(g)? / &self.scale;
        if !v.is_integer() {
            return Err(Error::OracleUnavailable(format!(
                "non-integral normalized value {v}"
            )));
        }
        v.to_integer()
            .to_i64()
            .ok_or_else(|| Error::ResourceLimit("oracle value exceeds i64".into()))
    }

    /// Eigenvalue of `T_ell` (or `U_p` for `ell = p`) on the oracle line.
    pub fn hecke_eigenvalue(&self, ell: u64) -> Result<i64> {
        let t = self.ms.hecke(ell);
        // lambda restricted to quotient coordinates
        let lam_q: Vec<Q> = self
            .ms
            .free_cols
            .iter()
            .map(|&c| self.lambda[c].clone())
            .collect();
        let img = vec_mat(&lam_q, &t);
        let mut eig: Option<Q> = None;
        for (x, l) in img.iter().zip(&lam_q) {
            if l.is_zero() {
                if !x.is_zero() {
                    return Err(Error::NoSolution("functional is not a Hecke eigenvector".into()));
                }
                continue;
            }
            let e = x / l;
            match &eig {
                None => eig = Some(e),
                Some(prev) if *prev == e => {}
                _ => {
                    return Err(Error::NoSolution("functional is not a Hecke eigenvector".into()))
                }
            }
        }
        let e = eig.ok_or_else(|| Error::NoSolution("zero functional".into()))?;
        if !e.is_integer() {
            return Err(Error::NoSolution(format!("non-integral eigenvalue {e}")));
        }
        Ok(e.to_integer().to_i64().unwrap())
    }
}

/// Generator of the subgroup of Q generated by the given rationals
/// (`None` if all are zero).
fn rational_gcd(vals: &[Q]) -> Option<Q> {
    let mut l = BigInt::one();
    for v in vals {
        l = l.lcm(v.denom());
    }
    let mut g = BigInt::zero();
    for v in vals {
        let n = (v * Q::from_integer(l.clone())).to_integer();
        g = g.gcd(&n);
    }
    if g.is_zero() {
        None
    } else {
        Some(Q::new(g, l))
    }
}
