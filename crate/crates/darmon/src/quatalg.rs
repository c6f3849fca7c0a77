//! Quaternion algebra arithmetic and the group datum: orders, the local
//! splitting at p, norm-1 unit groups, and the abelianization oracle.
//!
//! A datum bundles everything downstream modules need about the arithmetic
//! groups: bases of the two Eichler orders, the element `omega_p` of norm
//! `p`, generators and relations of the norm-1 unit group of the maximal
//! order, the 2x2 splitting at `p`, and a named oracle computing the
//! homology class of elements of the smaller unit group.  The matrix case
//! (discriminant 1) is generated internally from modular symbols; genuinely
//! quaternionic data can be supplied in the same file format with a lookup
//! table oracle.

use crate::error::{Error, Result};
use crate::mat::{qi, val_p, Mat2, Q};
use crate::modsym::{rref, HomologyOracle};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// The rational quaternion algebra with `i^2 = a`, `j^2 = b`, `ij = -ji`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuatAlgebra {
    pub a: Q,
    pub b: Q,
}

/// An element `x0 + x1 i + x2 j + x3 ij` with rational coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuatElement {
    pub c: [Q; 4],
}

impl fmt::Display for QuatElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({} + {} i + {} j + {} ij)",
            self.c[0], self.c[1], self.c[2], self.c[3]
        )
    }
}

impl QuatElement {
    pub fn new(c: [Q; 4]) -> Self {
        QuatElement { c }
    }

    pub fn from_i64(c: [i64; 4]) -> Self {
        QuatElement::new(c.map(qi))
    }

    pub fn one() -> Self {
        QuatElement::from_i64([1, 0, 0, 0])
    }

    pub fn zero() -> Self {
        QuatElement::from_i64([0, 0, 0, 0])
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut c = self.c.clone();
        for (x, y) in c.iter_mut().zip(&other.c) {
            *x += y;
        }
        QuatElement::new(c)
    }

    pub fn neg(&self) -> Self {
        QuatElement::new(self.c.clone().map(|x| -x))
    }

    pub fn scale(&self, s: &Q) -> Self {
        QuatElement::new(self.c.clone().map(|x| x * s))
    }

    /// Product in the algebra `alg`.
    pub fn mul(&self, other: &Self, alg: &QuatAlgebra) -> Self {
        let (x0, x1, x2, x3) = (&self.c[0], &self.c[1], &self.c[2], &self.c[3]);
        let (y0, y1, y2, y3) = (&other.c[0], &other.c[1], &other.c[2], &other.c[3]);
        let (a, b) = (&alg.a, &alg.b);
        let ab = a * b;
        QuatElement::new([
            x0 * y0 + a * x1 * y1 + b * x2 * y2 - &ab * x3 * y3,
            x0 * y1 + x1 * y0 - b * x2 * y3 + b * x3 * y2,
            x0 * y2 + x2 * y0 + a * x1 * y3 - a * x3 * y1,
            x0 * y3 + x3 * y0 + x1 * y2 - x2 * y1,
        ])
    }

    /// Quaternionic conjugate: negates the pure part.
    pub fn conj(&self) -> Self {
        QuatElement::new([
            self.c[0].clone(),
            -self.c[1].clone(),
            -self.c[2].clone(),
            -self.c[3].clone(),
        ])
    }

    /// Reduced norm `x0^2 - a x1^2 - b x2^2 + ab x3^2`.
    pub fn norm(&self, alg: &QuatAlgebra) -> Q {
        let (x0, x1, x2, x3) = (&self.c[0], &self.c[1], &self.c[2], &self.c[3]);
        x0 * x0 - &alg.a * x1 * x1 - &alg.b * x2 * x2 + &alg.a * &alg.b * x3 * x3
    }

    /// Reduced trace `2 x0`.
    pub fn trace(&self) -> Q {
        &self.c[0] + &self.c[0]
    }

    pub fn inv(&self, alg: &QuatAlgebra) -> Result<Self> {
        let n = self.norm(alg);
        if n.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(self.conj().scale(&(Q::one() / n)))
    }
}

// ---------------------------------------------------------------------------
// datum file format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct AlgebraFile {
    a: String,
    b: String,
}

#[derive(Serialize, Deserialize)]
struct IpFile {
    #[serde(rename = "I")]
    i: Vec<Vec<String>>,
    #[serde(rename = "J")]
    j: Vec<Vec<String>>,
    precision: u32,
}

#[derive(Serialize, Deserialize)]
struct HFile {
    rank: usize,
    oracle: String,
    #[serde(default, skip_serializing_if = "HashMap::is_empty")]
    table: HashMap<String, Vec<i64>>,
}

#[derive(Serialize, Deserialize)]
struct DatumFile {
    p: u64,
    #[serde(rename = "D")]
    disc: u64,
    #[serde(rename = "M")]
    level: u64,
    algebra: AlgebraFile,
    #[serde(rename = "R0_basis")]
    r0_basis: Vec<Vec<String>>,
    #[serde(rename = "R1_basis")]
    r1_basis: Vec<Vec<String>>,
    omega_p: Vec<String>,
    gamma0_generators: Vec<Vec<String>>,
    /// relation words as lists of `[generator index, exponent]`
    gamma0_relations: Vec<Vec<[i64; 2]>>,
    ip: IpFile,
    #[serde(rename = "H")]
    h: HFile,
}

fn parse_q(s: &str) -> Result<Q> {
    Q::from_str(s.trim()).map_err(|e| Error::Parse(format!("bad rational `{s}`: {e}")))
}

fn parse_quat(v: &[String]) -> Result<QuatElement> {
    if v.len() != 4 {
        return Err(Error::Parse("quaternion needs 4 coordinates".into()));
    }
    Ok(QuatElement::new([
        parse_q(&v[0])?,
        parse_q(&v[1])?,
        parse_q(&v[2])?,
        parse_q(&v[3])?,
    ]))
}

fn parse_mat(v: &[Vec<String>]) -> Result<Mat2> {
    if v.len() != 2 || v.iter().any(|r| r.len() != 2) {
        return Err(Error::Parse("matrix needs 2x2 entries".into()));
    }
    Ok(Mat2::new(
        parse_q(&v[0][0])?,
        parse_q(&v[0][1])?,
        parse_q(&v[1][0])?,
        parse_q(&v[1][1])?,
    ))
}

fn quat_strings(q: &QuatElement) -> Vec<String> {
    q.c.iter().map(|x| x.to_string()).collect()
}

fn mat_strings(m: &Mat2) -> Vec<Vec<String>> {
    m.e.iter()
        .map(|r| r.iter().map(|x| x.to_string()).collect())
        .collect()
}

/// The abelianization oracle backing a datum.
pub enum Oracle {
    /// the Manin-symbol fixture for the matrix case
    ManinSymbols(HomologyOracle),
    /// explicit table keyed by the display form of the quaternion
    Table(HashMap<String, Vec<i64>>),
}

/// A validated group datum.
pub struct GroupDatum {
    pub p: u64,
    pub disc: u64,
    pub level: u64,
    pub alg: QuatAlgebra,
    pub r0_basis: [QuatElement; 4],
    pub r1_basis: [QuatElement; 4],
    pub omega_p: QuatElement,
    pub gamma0_generators: Vec<QuatElement>,
    /// defining relation words of the unit group, in the generators
    pub gamma0_relations: Vec<Vec<(usize, i64)>>,
    pub ip_i: Mat2,
    pub ip_j: Mat2,
    pub ip_precision: u32,
    pub h_rank: usize,
    pub oracle: Oracle,
    /// SHA-256 of the serialized file, for provenance metadata
    pub hash: String,
}

impl GroupDatum {
    /// The p-adic splitting: a ring homomorphism into 2x2 matrices.
    pub fn embed_p(&self, q: &QuatElement) -> Mat2 {
        let k = self.ip_i.mul(&self.ip_j);
        let mut out = Mat2::identity();
        for x in out.e.iter_mut().flatten() {
            *x = Q::zero();
        }
        for (idx, m) in [&Mat2::identity(), &self.ip_i, &self.ip_j, &k]
            .into_iter()
            .enumerate()
        {
            for r in 0..2 {
                for c in 0..2 {
                    out.e[r][c] += &q.c[idx] * &m.e[r][c];
                }
            }
        }
        out
    }

    /// Inverse of [`Self::embed_p`] on its image (the splitting is an
    /// isomorphism onto 2x2 matrices).
    pub fn unembed_p(&self, m: &Mat2) -> Result<QuatElement> {
        let k = self.ip_i.mul(&self.ip_j);
        let basis = [Mat2::identity(), self.ip_i.clone(), self.ip_j.clone(), k];
        // solve sum x_idx * basis_idx = m as a 4x4 rational system
        let mut rows: Vec<Vec<Q>> = Vec::with_capacity(4);
        for r in 0..2 {
            for c in 0..2 {
                let mut row: Vec<Q> = basis.iter().map(|bm| bm.e[r][c].clone()).collect();
                row.push(m.e[r][c].clone());
                rows.push(row);
            }
        }
        let pivots = rref(&mut rows);
        if pivots.contains(&4) {
            return Err(Error::NoSolution("matrix is outside the split image".into()));
        }
        let mut x = [Q::zero(), Q::zero(), Q::zero(), Q::zero()];
        for (r, &pc) in pivots.iter().enumerate() {
            x[pc] = rows[r][4].clone();
        }
        Ok(QuatElement::new(x))
    }

    /// Coordinates of `q` in the given order basis, if the exact rational
    /// system is solvable.
    fn coords_in(&self, basis: &[QuatElement; 4], q: &QuatElement) -> Option<[Q; 4]> {
        let mut rows: Vec<Vec<Q>> = Vec::with_capacity(4);
        for idx in 0..4 {
            let mut row: Vec<Q> = basis.iter().map(|b| b.c[idx].clone()).collect();
            row.push(q.c[idx].clone());
            rows.push(row);
        }
        let pivots = rref(&mut rows);
        if pivots.contains(&4) || pivots.len() != 4 {
            return None;
        }
        let mut x = [Q::zero(), Q::zero(), Q::zero(), Q::zero()];
        for (r, &pc) in pivots.iter().enumerate() {
            x[pc] = rows[r][4].clone();
        }
        Some(x)
    }

    fn in_order(&self, basis: &[QuatElement; 4], q: &QuatElement) -> bool {
        self.coords_in(basis, q)
            .is_some_and(|x| x.iter().all(|v| v.is_integer()))
    }

    /// Norm-1 units of the maximal order `R_0`.
    pub fn is_in_gamma0(&self, q: &QuatElement) -> bool {
        q.norm(&self.alg) == Q::one() && self.in_order(&self.r0_basis, q)
    }

    /// Norm-1 units of the Eichler order `R_1`.
    pub fn is_in_gamma1(&self, q: &QuatElement) -> bool {
        q.norm(&self.alg) == Q::one() && self.in_order(&self.r1_basis, q)
    }

    /// The conjugate group `omega_p Gamma_0 omega_p^-1`.
    pub fn is_in_gamma0_hat(&self, q: &QuatElement) -> Result<bool> {
        let wi = self.omega_p.inv(&self.alg)?;
        let conj = wi.mul(q, &self.alg).mul(&self.omega_p, &self.alg);
        Ok(self.is_in_gamma0(&conj))
    }

    /// Matrix-side membership tests via the splitting.
    pub fn is_in_gamma0_mat(&self, m: &Mat2) -> bool {
        self.unembed_p(m).map(|q| self.is_in_gamma0(&q)).unwrap_or(false)
    }

    pub fn is_in_gamma1_mat(&self, m: &Mat2) -> bool {
        self.unembed_p(m).map(|q| self.is_in_gamma1(&q)).unwrap_or(false)
    }

    /// Generators of `Gamma_0` as 2x2 matrices.
    pub fn generator_mats(&self) -> Vec<Mat2> {
        self.gamma0_generators.iter().map(|g| self.embed_p(g)).collect()
    }

    /// `omega_p` as a matrix.
    pub fn omega_mat(&self) -> Mat2 {
        self.embed_p(&self.omega_p)
    }

    /// Homology class of an element of `Gamma_1`, via the configured oracle.
    pub fn abelianization_image(&self, q: &QuatElement) -> Result<Vec<i64>> {
        if !self.is_in_gamma1(q) {
            return Err(Error::NotInGroup(format!("{q} is not in Gamma_1")));
        }
        match &self.oracle {
            Oracle::ManinSymbols(h) => Ok(vec![h.value(&self.embed_p(q))?]),
            Oracle::Table(t) => t
                .get(&q.to_string())
                .cloned()
                .ok_or_else(|| Error::OracleUnavailable(format!("no table entry for {q}"))),
        }
    }

    /// Homology class of a matrix in `Gamma_1`.
    pub fn abelianization_of_mat(&self, m: &Mat2) -> Result<Vec<i64>> {
        self.abelianization_image(&self.unembed_p(m)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DatumFile {
            p: self.p,
            disc: self.disc,
            level: self.level,
            algebra: AlgebraFile {
                a: self.alg.a.to_string(),
                b: self.alg.b.to_string(),
            },
            r0_basis: self.r0_basis.iter().map(quat_strings).collect(),
            r1_basis: self.r1_basis.iter().map(quat_strings).collect(),
            omega_p: quat_strings(&self.omega_p),
            gamma0_generators: self.gamma0_generators.iter().map(quat_strings).collect(),
            gamma0_relations: self
                .gamma0_relations
                .iter()
                .map(|w| w.iter().map(|&(g, e)| [g as i64, e]).collect())
                .collect(),
            ip: IpFile {
                i: mat_strings(&self.ip_i),
                j: mat_strings(&self.ip_j),
                precision: self.ip_precision,
            },
            h: HFile {
                rank: self.h_rank,
                oracle: match &self.oracle {
                    Oracle::ManinSymbols(h) => format!("manin-symbols:{}", h.p),
                    Oracle::Table(_) => "table".into(),
                },
                table: match &self.oracle {
                    Oracle::ManinSymbols(_) => HashMap::new(),
                    Oracle::Table(t) => t.clone(),
                },
            },
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatumFile = serde_json::from_str(text)?;
        let alg = QuatAlgebra {
            a: parse_q(&file.algebra.a)?,
            b: parse_q(&file.algebra.b)?,
        };
        let basis4 = |rows: &Vec<Vec<String>>| -> Result<[QuatElement; 4]> {
            if rows.len() != 4 {
                return Err(Error::Parse("order basis needs 4 elements".into()));
            }
            Ok([
                parse_quat(&rows[0])?,
                parse_quat(&rows[1])?,
                parse_quat(&rows[2])?,
                parse_quat(&rows[3])?,
            ])
        };
        let oracle = if let Some(ps) = file.h.oracle.strip_prefix("manin-symbols:") {
            let op: u64 = ps
                .parse()
                .map_err(|_| Error::Parse(format!("bad oracle `{}`", file.h.oracle)))?;
            if op != file.p {
                return Err(Error::BadDatum("oracle prime differs from datum prime".into()));
            }
            Oracle::ManinSymbols(HomologyOracle::new(op, -2)?)
        } else if file.h.oracle == "table" {
            Oracle::Table(file.h.table.clone())
        } else {
            return Err(Error::Parse(format!("unknown oracle `{}`", file.h.oracle)));
        };
        let datum = GroupDatum {
            p: file.p,
            disc: file.disc,
            level: file.level,
            alg,
            r0_basis: basis4(&file.r0_basis)?,
            r1_basis: basis4(&file.r1_basis)?,
            omega_p: parse_quat(&file.omega_p)?,
            gamma0_generators: file
                .gamma0_generators
                .iter()
                .map(|v| parse_quat(v))
                .collect::<Result<_>>()?,
            gamma0_relations: file
                .gamma0_relations
                .iter()
                .map(|w| {
                    w.iter()
                        .map(|&[g, e]| {
                            usize::try_from(g)
                                .map(|gi| (gi, e))
                                .map_err(|_| Error::Parse("negative generator index".into()))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?,
            ip_i: parse_mat(&file.ip.i)?,
            ip_j: parse_mat(&file.ip.j)?,
            ip_precision: file.ip.precision,
            h_rank: file.h.rank,
            oracle,
            hash: sha256_hex(text.as_bytes()),
        };
        datum.validate()?;
        Ok(datum)
    }

    /// Check every structural invariant; the first failure is named.
    pub fn validate(&self) -> Result<()> {
        let p = self.p;
        if p < 2 || (2..p).any(|d| p % d == 0) {
            return Err(Error::BadDatum("p-not-prime".into()));
        }
        if self.level % p == 0 || self.disc % p == 0 {
            return Err(Error::BadDatum("p-divides-MD".into()));
        }
        for d in 2..=self.disc {
            if self.disc % (d * d) == 0 {
                return Err(Error::BadDatum("D-not-squarefree".into()));
            }
        }
        // splitting relations
        let i2 = self.ip_i.mul(&self.ip_i);
        let j2 = self.ip_j.mul(&self.ip_j);
        let scal = |x: &Q| Mat2::new(x.clone(), Q::zero(), Q::zero(), x.clone());
        if i2 != scal(&self.alg.a) || j2 != scal(&self.alg.b) {
            return Err(Error::BadDatum("ip-squares".into()));
        }
        if self.ip_i.mul(&self.ip_j) != self.ip_j.mul(&self.ip_i).neg() {
            return Err(Error::BadDatum("ip-anticommute".into()));
        }
        // omega_p has reduced norm p
        if self.omega_p.norm(&self.alg) != qi(p as i64) {
            return Err(Error::BadDatum("omega-norm".into()));
        }
        // R0 maps into integral matrices at p with unit index
        let mut det_rows: Vec<Vec<Q>> = Vec::new();
        for q in &self.r0_basis {
            let m = self.embed_p(q);
            if m.e.iter().flatten().any(|x| val_p(x, p).is_some_and(|v| v < 0)) {
                return Err(Error::BadDatum("R0-not-p-integral".into()));
            }
            det_rows.push(vec![
                m.e[0][0].clone(),
                m.e[0][1].clone(),
                m.e[1][0].clone(),
                m.e[1][1].clone(),
            ]);
        }
        if det4(&det_rows).and_then(|d| val_p(&d, p)) != Some(0) {
            return Err(Error::BadDatum("R0-not-maximal-at-p".into()));
        }
        // R1 maps into the upper-triangular-mod-p order with index p
        let mut det_rows: Vec<Vec<Q>> = Vec::new();
        for q in &self.r1_basis {
            let m = self.embed_p(q);
            if m.e.iter().flatten().any(|x| val_p(x, p).is_some_and(|v| v < 0)) {
                return Err(Error::BadDatum("R1-not-p-integral".into()));
            }
            if val_p(&m.e[1][0], p).is_some_and(|v| v < 1) {
                return Err(Error::BadDatum("R1-not-upper-triangular-mod-p".into()));
            }
            det_rows.push(vec![
                m.e[0][0].clone(),
                m.e[0][1].clone(),
                m.e[1][0].clone(),
                m.e[1][1].clone(),
            ]);
        }
        if det4(&det_rows).and_then(|d| val_p(&d, p)) != Some(1) {
            return Err(Error::BadDatum("R1-index-at-p".into()));
        }
        // generators are norm-1 units of R0
        for g in &self.gamma0_generators {
            if g.norm(&self.alg) != Q::one() {
                return Err(Error::BadDatum("generator-norm".into()));
            }
            if !self.in_order(&self.r0_basis, g) {
                return Err(Error::BadDatum("generator-not-in-R0".into()));
            }
        }
        // relation words multiply to +-1 in the algebra
        for w in &self.gamma0_relations {
            let mut acc = QuatElement::one();
            for &(gi, e) in w {
                let g = self
                    .gamma0_generators
                    .get(gi)
                    .ok_or_else(|| Error::BadDatum("relation-generator-index".into()))?;
                let g = if e < 0 { g.inv(&self.alg)? } else { g.clone() };
                for _ in 0..e.unsigned_abs() {
                    acc = acc.mul(&g, &self.alg);
                }
            }
            if acc != QuatElement::one() && acc != QuatElement::one().neg() {
                return Err(Error::BadDatum("relation-word".into()));
            }
        }
        if self.h_rank == 0 {
            return Err(Error::BadDatum("H-rank-zero".into()));
        }
        Ok(())
    }
}

/// Determinant of a 4x4 rational matrix (cofactor expansion is fine at this
/// size).
fn det4(rows: &[Vec<Q>]) -> Option<Q> {
    if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
        return None;
    }
    let det3 = |r: [[&Q; 3]; 3]| -> Q {
        r[0][0] * &(r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * &(r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * &(r[1][0] * r[2][1] - r[1][1] * r[2][0])
    };
    let mut acc = Q::zero();
    for c in 0..4 {
        let cols: Vec<usize> = (0..4).filter(|&x| x != c).collect();
        let minor = det3([
            [&rows[1][cols[0]], &rows[1][cols[1]], &rows[1][cols[2]]],
            [&rows[2][cols[0]], &rows[2][cols[1]], &rows[2][cols[2]]],
            [&rows[3][cols[0]], &rows[3][cols[1]], &rows[3][cols[2]]],
        ]);
        let term = &rows[0][c] * &minor;
        if c % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    Some(acc)
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let d = h.finalize();
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// Build the matrix-case fixture datum: the split algebra realized as 2x2
/// matrices, the maximal order of integral matrices, and the Eichler order
/// of upper-triangular-mod-p matrices.  The unit group of the maximal order
/// is generated by the standard order-4 and order-6 elements.
pub fn fixture_datum(p: u64) -> Result<GroupDatum> {
    let half = Q::new(BigInt::one(), BigInt::from(2));
    let alg = QuatAlgebra { a: Q::one(), b: Q::one() };
    // matrix units in quaternion coordinates for i -> diag(1,-1), j -> [[0,1],[1,0]]
    let e11 = QuatElement::new([half.clone(), half.clone(), Q::zero(), Q::zero()]);
    let e12 = QuatElement::new([Q::zero(), Q::zero(), half.clone(), half.clone()]);
    let e21 = QuatElement::new([Q::zero(), Q::zero(), half.clone(), -half.clone()]);
    let e22 = QuatElement::new([half.clone(), -half.clone(), Q::zero(), Q::zero()]);
    let pi = p as i64;
    let r0_basis = [e11.clone(), e12.clone(), e21.clone(), e22.clone()];
    let r1_basis = [e11, e12, e21.scale(&qi(pi)), e22];
    // omega_p = [[0,-1],[p,0]]
    let omega_p = QuatElement::new([
        Q::zero(),
        Q::zero(),
        Q::new(BigInt::from(pi - 1), BigInt::from(2)),
        Q::new(BigInt::from(-1 - pi), BigInt::from(2)),
    ]);
    // S = [[0,-1],[1,0]], U = [[0,-1],[1,1]]
    let s = QuatElement::new([Q::zero(), Q::zero(), Q::zero(), -Q::one()]);
    let u = QuatElement::new([half.clone(), -half, Q::zero(), -Q::one()]);
    let json = GroupDatum {
        p,
        disc: 1,
        level: 1,
        alg,
        r0_basis,
        r1_basis,
        omega_p,
        gamma0_generators: vec![s, u],
        // S^4 = 1 and S^2 = U^3 (the amalgam presentation of the unit group)
        gamma0_relations: vec![vec![(0, 4)], vec![(0, 2), (1, -3)]],
        ip_i: Mat2::from_i64(1, 0, 0, -1),
        ip_j: Mat2::from_i64(0, 1, 1, 0),
        ip_precision: 16,
        h_rank: 1,
        oracle: Oracle::ManinSymbols(HomologyOracle::new(p, -2)?),
        hash: String::new(),
    }
    .to_json()?;
    // round through the serializer so the hash matches the on-disk form
    GroupDatum::from_json(&json)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::{mat_s, mat_u};

    #[test]
    fn quaternion_norm_is_multiplicative() {
        let alg = QuatAlgebra { a: qi(-1), b: qi(-3) };
        let x = QuatElement::new([qi(1), qi(2), Q::new(1.into(), 2.into()), qi(-1)]);
        let y = QuatElement::new([qi(0), qi(3), qi(1), Q::new(2.into(), 5.into())]);
        let xy = x.mul(&y, &alg);
        assert_eq!(xy.norm(&alg), x.norm(&alg) * y.norm(&alg));
        // conjugation is an anti-homomorphism: conj(xy) = conj(y) conj(x)
        assert_eq!(xy.conj(), y.conj().mul(&x.conj(), &alg));
        // x * inv(x) = 1
        assert_eq!(x.mul(&x.inv(&alg).unwrap(), &alg), QuatElement::one());
    }

    #[test]
    fn fixture_embeds_to_the_expected_matrices() {
        let d = fixture_datum(11).unwrap();
        assert_eq!(d.embed_p(&d.gamma0_generators[0]), mat_s());
        assert_eq!(d.embed_p(&d.gamma0_generators[1]), mat_u());
        assert_eq!(d.omega_mat(), Mat2::from_i64(0, -1, 11, 0));
        assert_eq!(d.embed_p(&QuatElement::one()), Mat2::identity());
        // embedding is a ring map and det matches the reduced norm
        let x = QuatElement::new([qi(1), qi(2), qi(3), Q::new(1.into(), 2.into())]);
        let y = QuatElement::new([qi(-1), qi(0), qi(5), qi(2)]);
        assert_eq!(
            d.embed_p(&x.mul(&y, &d.alg)),
            d.embed_p(&x).mul(&d.embed_p(&y))
        );
        assert_eq!(d.embed_p(&x).det(), x.norm(&d.alg));
        assert_eq!(d.embed_p(&x).trace(), x.trace());
        // unembed inverts
        assert_eq!(d.unembed_p(&d.embed_p(&x)).unwrap(), x);
    }

    #[test]
    fn membership_tests() {
        let d = fixture_datum(11).unwrap();
        assert!(d.is_in_gamma0(&d.gamma0_generators[0]));
        assert!(d.is_in_gamma0(&QuatElement::one()));
        assert!(!d.is_in_gamma0(&d.omega_p)); // norm p
        // T = [[1,1],[0,1]] is in Gamma_1; [[1,0],[1,1]] is not
        assert!(d.is_in_gamma1_mat(&Mat2::from_i64(1, 1, 0, 1)));
        assert!(!d.is_in_gamma1_mat(&Mat2::from_i64(1, 0, 1, 1)));
        assert!(d.is_in_gamma1_mat(&Mat2::from_i64(1, 0, 11, 1)));
        assert!(d.is_in_gamma0_mat(&Mat2::from_i64(1, 0, 1, 1)));
        // half-integral matrix is not in the order
        assert!(!d.is_in_gamma0_mat(&Mat2::new(
            Q::new(1.into(), 2.into()),
            Q::zero(),
            Q::zero(),
            qi(2)
        )));
        // Gamma_0_hat: omega S omega^-1
        let wm = d.omega_mat();
        let sm = mat_s();
        let cand = wm.mul(&sm).mul(&wm.inv().unwrap());
        let q = d.unembed_p(&cand).unwrap();
        assert!(d.is_in_gamma0_hat(&q).unwrap());
        assert!(!d.is_in_gamma0(&q) || cand.is_integer());
    }

    #[test]
    fn datum_round_trip_and_validation() {
        let d = fixture_datum(11).unwrap();
        let json = d.to_json().unwrap();
        let d2 = GroupDatum::from_json(&json).unwrap();
        assert_eq!(d2.hash, d.hash);
        assert_eq!(d2.to_json().unwrap(), json);
        // corrupt omega_p: norm check must fire
        let bad = json.replace("\"p\": 11", "\"p\": 13");
        assert!(GroupDatum::from_json(&bad).is_err());
    }

    #[test]
    fn abelianization_dispatch() {
        let d = fixture_datum(11).unwrap();
        let t = Mat2::from_i64(1, 1, 0, 1);
        // parabolic elements die in the cuspidal quotient
        assert_eq!(d.abelianization_of_mat(&t).unwrap(), vec![0]);
        assert_eq!(
            d.abelianization_of_mat(&Mat2::identity().neg()).unwrap(),
            vec![0]
        );
        // homomorphism on products of Gamma_1 elements
        let g1 = Mat2::from_i64(1, 0, 11, 1);
        let g2 = Mat2::from_i64(12, 1, 11, 1);
        let a = d.abelianization_of_mat(&g1).unwrap()[0];
        let b = d.abelianization_of_mat(&g2).unwrap()[0];
        let ab = d.abelianization_of_mat(&g1.mul(&g2)).unwrap()[0];
        assert_eq!(ab, a + b);
        // non-member is rejected
        assert!(d.abelianization_of_mat(&mat_s()).is_err());
    }
}
