//! The Bruhat-Tits tree of PGL2(Q_p) with exact vertex normal forms, and the
//! induced combinatorics on P^1(Q_p): balls, edge <-> ball dictionaries, and
//! finite covers by residue charts.
//!
//! A vertex is a homothety class of rank-2 lattices in Q_p^2.  Every class
//! has a unique representative basis matrix `[[p^n, m], [0, 1]]` with
//! `n` an integer and `m` in `Z[1/p]` taken modulo `p^n`; we store the pair
//! `(n, m)` with `m` in canonical reduced form.  All computations are done on
//! exact rationals, so no p-adic precision is ever lost in the combinatorics.

use crate::error::{Error, Result};
use crate::mat::{qi, reduce_mod_pn, val_p, Mat2, Q};
use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use std::fmt;

/// A vertex of the tree in normal form `(n, m)`, the class of the lattice
/// with basis matrix `[[p^n, m], [0, 1]]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Vertex {
    pub p: u64,
    pub n: i64,
    /// canonical representative mod `p^n` (see [`reduce_mod_pn`])
    pub m: Q,
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.n, self.m)
    }
}

impl Vertex {
    pub fn new(p: u64, n: i64, m: &Q) -> Self {
        Vertex {
            p,
            n,
            m: reduce_mod_pn(m, p, n),
        }
    }

    /// The standard base vertex `v_* = (0, 0)`, class of Z_p^2.
    pub fn base(p: u64) -> Self {
        Vertex::new(p, 0, &Q::zero())
    }

    /// The other endpoint `\hat v_* = (-1, 0)` of the base edge.
    pub fn hat_base(p: u64) -> Self {
        Vertex::new(p, -1, &Q::zero())
    }

    /// Representative basis matrix `[[p^n, m], [0, 1]]`.
    pub fn basis(&self) -> Mat2 {
        let pn = pow_q(self.p, self.n);
        Mat2::new(pn, self.m.clone(), Q::zero(), Q::one())
    }

    /// Parity class `n mod 2`; the tree is bipartite and the standard group
    /// actions preserve or swap the classes according to `v_p(det)`.
    pub fn parity(&self) -> u8 {
        (self.n.rem_euclid(2)) as u8
    }

    /// Combinatorial distance in the tree.
    pub fn distance(&self, other: &Vertex) -> u64 {
        assert_eq!(self.p, other.p);
        let a = self
            .basis()
            .inv()
            .expect("basis is invertible")
            .mul(&other.basis());
        let vdet = val_p(&a.det(), self.p).expect("nonzero determinant");
        let minv = a.min_val(self.p).expect("nonzero matrix");
        (vdet - 2 * minv).unsigned_abs()
    }

    /// The two canonical tree moves from `(n, m)`: the parent-direction
    /// neighbor `(n-1, m)` and the `p` children `(n+1, m + c p^n)`.
    pub fn neighbors(&self) -> Vec<Vertex> {
        let mut out = vec![Vertex::new(self.p, self.n - 1, &self.m)];
        let pn = pow_q(self.p, self.n);
        for c in 0..self.p {
            let m = &self.m + qi(c as i64) * &pn;
            out.push(Vertex::new(self.p, self.n + 1, &m));
        }
        out
    }
}

fn pow_q(p: u64, n: i64) -> Q {
    if n >= 0 {
        Q::from_integer(BigInt::from(p).pow(n as u32))
    } else {
        Q::new(BigInt::one(), BigInt::from(p).pow((-n) as u32))
    }
}

/// Normal form of the lattice class spanned by the columns of `b` over Z_p
/// (exact column reduction over the localization Z_(p)).
pub fn vertex_of_matrix(p: u64, b: &Mat2) -> Result<Vertex> {
    if b.det().is_zero() {
        return Err(Error::SingularMatrix);
    }
    let mut m = b.e.clone();
    // choose the bottom-row entry of minimal valuation as the second column
    let v21 = val_p(&m[1][0], p);
    let v22 = val_p(&m[1][1], p);
    let swap = match (v21, v22) {
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => true,
        _ => false,
    };
    if swap {
        m[0].swap(0, 1);
        m[1].swap(0, 1);
    }
    // eliminate the bottom-left entry: the quotient lies in Z_(p)
    if !m[1][0].is_zero() {
        let q = &m[1][0] / &m[1][1];
        m[0][0] = &m[0][0] - &q * &m[0][1];
        m[1][0] = Q::zero();
    }
    // columns now (a, 0) and (b, d); unit-scale and divide out the homothety
    let a = m[0][0].clone();
    let b12 = m[0][1].clone();
    let d = m[1][1].clone();
    let va = val_p(&a, p).ok_or(Error::SingularMatrix)?;
    let vd = val_p(&d, p).expect("pivot nonzero");
    let n = va - vd;
    let mm = &b12 / &d;
    Ok(Vertex::new(p, n, &mm))
}

/// Image of a vertex under `g` acting on lattice classes.
pub fn act_vertex(g: &Mat2, v: &Vertex) -> Result<Vertex> {
    vertex_of_matrix(v.p, &g.mul(&v.basis()))
}

/// An ordered edge of the tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub from: Vertex,
    pub to: Vertex,
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

impl Edge {
    pub fn new(from: Vertex, to: Vertex) -> Result<Self> {
        if from.distance(&to) != 1 {
            return Err(Error::Parse(format!(
                "vertices {from} and {to} are not adjacent"
            )));
        }
        Ok(Edge { from, to })
    }

    /// The distinguished base edge `e_* = (v_*, \hat v_*)`.
    pub fn base(p: u64) -> Self {
        Edge {
            from: Vertex::base(p),
            to: Vertex::hat_base(p),
        }
    }

    pub fn reversed(&self) -> Self {
        Edge {
            from: self.to.clone(),
            to: self.from.clone(),
        }
    }

    /// Parity of the source vertex: "even" edges emanate from the even class.
    pub fn parity(&self) -> u8 {
        self.from.parity()
    }
}

pub fn act_edge(g: &Mat2, e: &Edge) -> Result<Edge> {
    Ok(Edge {
        from: act_vertex(g, &e.from)?,
        to: act_vertex(g, &e.to)?,
    })
}

/// A compact open subset of P^1(Q_p) of ball type: either the disc
/// `a + p^n Z_p` or its complement in P^1 (which contains infinity).
///
/// Centers are stored as canonical representatives in `Z[1/p]` modulo `p^n`,
/// so equality of the structs is equality of the sets.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Ball {
    pub p: u64,
    pub center: Q,
    /// radius exponent: the ball is a coset of `p^depth Z_p` (depth may be
    /// negative)
    pub depth: i64,
    /// `false`: the disc itself; `true`: its complement in P^1
    pub complement: bool,
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let core = format!("{} + O(p^{})", self.center, self.depth);
        if self.complement {
            write!(f, "!({core})")
        } else {
            write!(f, "{core}")
        }
    }
}

impl Ball {
    pub fn disc(p: u64, center: &Q, depth: i64) -> Self {
        Ball {
            p,
            center: reduce_mod_pn(center, p, depth),
            depth,
            complement: false,
        }
    }

    pub fn complement(p: u64, center: &Q, depth: i64) -> Self {
        Ball {
            p,
            center: reduce_mod_pn(center, p, depth),
            depth,
            complement: true,
        }
    }

    /// The whole of Z_p, i.e. `0 + O(p^0)`.
    pub fn zp(p: u64) -> Self {
        Ball::disc(p, &Q::zero(), 0)
    }

    /// Membership test for a finite rational point (`None` means infinity).
    pub fn contains(&self, x: Option<&Q>) -> bool {
        let inside = match x {
            None => false,
            Some(x) => match val_p(&(x - &self.center), self.p) {
                None => true,
                Some(v) => v >= self.depth,
            },
        };
        inside != self.complement
    }

    /// A distinguished sample point: the center, or infinity for complements.
    pub fn sample(&self) -> Option<Q> {
        if self.complement {
            None
        } else {
            Some(self.center.clone())
        }
    }

    /// A matrix `M` with `M(Z_p) = self` under the Moebius action.
    pub fn transporter(&self) -> Mat2 {
        let pn = pow_q(self.p, self.depth);
        let inside = Mat2::new(pn.clone(), self.center.clone(), Q::zero(), Q::one());
        if self.complement {
            // post-compose with x -> 1/(px), which sends Z_p onto its
            // complement in P^1
            inside.mul(&Mat2::new(
                Q::zero(),
                Q::one(),
                qi(self.p as i64),
                Q::zero(),
            ))
        } else {
            inside
        }
    }

    /// The edge corresponding to this ball: the image of the base edge under
    /// the transporter.
    pub fn edge(&self) -> Edge {
        let m = self.transporter();
        act_edge(&m, &Edge::base(self.p)).expect("transporter is invertible")
    }

    /// Image of the ball under the Moebius action of `g` (exact; `g` need
    /// not be integral).
    pub fn act(g: &Mat2, ball: &Ball) -> Result<Ball> {
        let m = g.mul(&ball.transporter());
        ball_of_transporter(ball.p, &m)
    }

    /// Exact containment `other subset-of self` (both are ball-type sets;
    /// note that disc forms never contain infinity, complements always do).
    pub fn contains_ball(&self, other: &Ball) -> bool {
        match (self.complement, other.complement) {
            (false, false) => {
                self.depth <= other.depth
                    && val_p(&(&self.center - &other.center), self.p)
                        .map_or(true, |v| v >= self.depth)
            }
            (false, true) => false,
            (true, false) => {
                // P^1 minus A contains B iff A and B are disjoint
                discs_disjoint(&self.clone().into_disc(), other)
            }
            (true, true) => {
                // complement anti-monotonicity
                let a = Ball { complement: false, ..other.clone() };
                let b = Ball { complement: false, ..self.clone() };
                a.contains_ball(&b)
            }
        }
    }

    /// Exact disjointness.
    pub fn disjoint_from(&self, other: &Ball) -> bool {
        match (self.complement, other.complement) {
            (false, false) => discs_disjoint(self, other),
            (false, true) => other
                .clone()
                .into_disc()
                .contains_ball(self),
            (true, false) => self.clone().into_disc().contains_ball(other),
            (true, true) => false, // both contain infinity
        }
    }

    fn into_disc(mut self) -> Ball {
        self.complement = false;
        self
    }

    /// Parse the literal form `c + O(p^n)` or `!(c + O(p^n))` with `c` a
    /// rational number.
    pub fn parse(p: u64, s: &str) -> Result<Ball> {
        let s = s.trim();
        let (complement, body) = if let Some(rest) = s.strip_prefix("!(") {
            let rest = rest
                .strip_suffix(')')
                .ok_or_else(|| Error::Parse(format!("unbalanced parentheses in ball `{s}`")))?;
            (true, rest.trim())
        } else {
            (false, s)
        };
        let (c, n) = body
            .rsplit_once('+')
            .ok_or_else(|| Error::Parse(format!("ball literal `{s}` lacks `+ O(p^n)`")))?;
        let n = n
            .trim()
            .strip_prefix("O(p^")
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| Error::Parse(format!("ball literal `{s}` lacks `O(p^n)`")))?
            .parse::<i64>()
            .map_err(|e| Error::Parse(format!("bad depth in `{s}`: {e}")))?;
        let c: Q = c
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad center in `{s}`: {e}")))?;
        Ok(if complement {
            Ball::complement(p, &c, n)
        } else {
            Ball::disc(p, &c, n)
        })
    }
}

/// Two disc-form balls are either nested or disjoint; they meet iff the
/// center difference has valuation at least the shallower depth.
fn discs_disjoint(a: &Ball, b: &Ball) -> bool {
    debug_assert!(!a.complement && !b.complement);
    val_p(&(&a.center - &b.center), a.p).map_or(false, |v| v < a.depth.min(b.depth))
}

/// The ball `M(Z_p)` for an invertible `M`, computed exactly.
pub fn ball_of_transporter(p: u64, m: &Mat2) -> Result<Ball> {
    let det = m.det();
    if det.is_zero() {
        return Err(Error::SingularMatrix);
    }
    let c = &m.e[1][0];
    let d = &m.e[1][1];
    // infinity lies in M(Z_p) iff  c != 0 and v(d) >= v(c)
    let contains_inf = match (val_p(c, p), val_p(d, p)) {
        (Some(vc), Some(vd)) => vd >= vc,
        (Some(_), None) => true,
        _ => false,
    };
    if contains_inf {
        // M(Z_p) is the complement of M'(Z_p), M' = M * [[0,1],[p,0]]
        let m2 = m.mul(&Mat2::new(Q::zero(), Q::one(), qi(p as i64), Q::zero()));
        let inner = ball_of_transporter(p, &m2)?;
        debug_assert!(!inner.complement);
        return Ok(Ball::complement(p, &inner.center, inner.depth));
    }
    // finite image: a disc with center M(0) = b/d
    let b = &m.e[0][1];
    let a = &m.e[0][0];
    let center = b / d;
    let depth = if c.is_zero() {
        // x -> (a x + b)/d
        val_p(a, p).unwrap() - val_p(d, p).unwrap()
    } else {
        // v(d) < v(c): image is b/d + (det/d^2) Z_p
        val_p(&det, p).unwrap() - 2 * val_p(d, p).unwrap()
    };
    Ok(Ball::disc(p, &center, depth))
}

/// The ball attached to an edge: the unique ball whose transporter carries
/// the base edge to it.  Inverse of [`Ball::edge`].
pub fn ball_of_edge(e: &Edge) -> Result<Ball> {
    let p = e.from.p;
    if e.from.distance(&e.to) != 1 {
        return Err(Error::Parse(format!("{e} is not an edge")));
    }
    let bs = e.from.basis();
    let bs_inv = bs.inv()?;
    let x = act_vertex(&bs_inv, &e.to)?;
    // x is a neighbor of the base vertex: either hat v_* or (1, j)
    let h = if x == Vertex::hat_base(p) {
        Mat2::identity()
    } else {
        debug_assert_eq!(x.n, 1);
        let j = x.m.to_integer().to_i64().expect("small digit");
        // T^j * S fixes v_* (det is a p-unit, lattice unchanged) and moves
        // hat v_* to (1, j)
        Mat2::from_i64(1, j, 0, 1).mul(&Mat2::from_i64(0, -1, 1, 0))
    };
    let t = bs.mul(&h);
    debug_assert_eq!(act_edge(&t, &Edge::base(p)).unwrap(), *e);
    ball_of_transporter(p, &t)
}

/// A point of the standard depth-`k` chart of P^1(Q_p): the cover of P^1 by
/// the `(p+1) p^(k-1)` residue classes of P^1(Z/p^k).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChartPoint {
    /// the class of `a mod p^k` inside Z_p
    Affine(u64),
    /// the class `{x : 1/x = p c mod p^k}` for `c mod p^(k-1)`
    Infinite(u64),
}

impl fmt::Display for ChartPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChartPoint::Affine(a) => write!(f, "A{a}"),
            ChartPoint::Infinite(c) => write!(f, "I{c}"),
        }
    }
}

/// The depth-`k` cover of P^1(Q_p) in chart coordinates, `k >= 1`.
pub fn cover(p: u64, k: u32) -> Result<Vec<ChartPoint>> {
    if k == 0 {
        return Err(Error::Unsupported("cover depth must be >= 1".into()));
    }
    let pk = crate::padic::pow_p(p, k)?;
    let pk1 = pk / p;
    let count = (pk as u128) + (pk1 as u128);
    if count > 40_000_000 {
        return Err(Error::ResourceLimit(format!(
            "cover at depth {k} has {count} charts"
        )));
    }
    let mut out = Vec::with_capacity(count as usize);
    out.extend((0..pk).map(ChartPoint::Affine));
    out.extend((0..pk1).map(ChartPoint::Infinite));
    Ok(out)
}

/// The ball underlying a chart point at depth `k`.
pub fn ball_of_chart(p: u64, k: u32, cp: ChartPoint) -> Result<Ball> {
    match cp {
        ChartPoint::Affine(a) => Ok(Ball::disc(p, &qi(a as i64), k as i64)),
        ChartPoint::Infinite(c) => {
            // {x : 1/x in pc + p^k Z_p} = (w * [[p^k, pc],[0,1]])(Z_p)
            let w = Mat2::from_i64(0, 1, 1, 0);
            let t = Mat2::new(
                pow_q(p, k as i64),
                qi((p * c) as i64),
                Q::zero(),
                Q::one(),
            );
            ball_of_transporter(p, &w.mul(&t))
        }
    }
}

/// The chart point containing the ball's sample point (the chart is a coarser
/// cover: valid whenever the ball refines a depth-`k` chart cell).
pub fn chart_of_ball(k: u32, b: &Ball) -> Result<ChartPoint> {
    let p = b.p;
    let pk = crate::padic::pow_p(p, k)?;
    match b.sample() {
        Some(x) => {
            let vx = val_p(&x, p).unwrap_or(i64::MAX);
            if vx < 0 {
                // disc around a point outside Z_p; image of the disc under
                // inversion is 1/x + p^(depth - 2 v(x)) Z_p
                if b.depth - 2 * vx < k as i64 {
                    return Err(Error::Parse(format!("ball {b} straddles depth-{k} charts")));
                }
                let inv = Q::one() / &x;
                let r = rational_mod(&inv, pk)?;
                debug_assert_eq!(r % p, 0, "v(1/x) >= 1 when v(x) <= -1");
                Ok(ChartPoint::Infinite(r / p))
            } else {
                if b.depth < k as i64 {
                    return Err(Error::Parse(format!("ball {b} straddles depth-{k} charts")));
                }
                Ok(ChartPoint::Affine(rational_mod(&x, pk)?))
            }
        }
        None => {
            // a complement ball contains both 0 and infinity unless its
            // center is 0, and no chart cell contains both; it fits in the
            // chart cell of infinity iff it is {v <= depth-1} u {oo} with
            // depth-1 <= -k
            if !(b.center.is_zero() && b.depth <= 1 - k as i64) {
                return Err(Error::Parse(format!("ball {b} straddles depth-{k} charts")));
            }
            Ok(ChartPoint::Infinite(0))
        }
    }
}

/// Reduce a p-integral rational modulo `p^k`, returning a `u64`.
pub fn rational_mod(x: &Q, modulus: u64) -> Result<u64> {
    let m = BigInt::from(modulus);
    let num = ((x.numer() % &m) + &m) % &m;
    let den = ((x.denom() % &m) + &m) % &m;
    let num = num.to_u64().unwrap();
    let den = den.to_u64().unwrap();
    let inv = crate::padic::mod_inv(den, modulus)
        .map_err(|_| Error::Parse(format!("{x} is not p-integral")))?;
    Ok(crate::padic::mul_mod(num, inv, modulus))
}

/// Fast projective action of an integral matrix with p-unit determinant on
/// depth-`k` chart points; all arithmetic mod `p^k` in machine words.
pub fn act_chart(p: u64, k: u32, g: &[[i64; 2]; 2], cp: ChartPoint) -> ChartPoint {
    let pk = crate::padic::pow_p(p, k).expect("depth in range");
    let r = |t: i64| -> u64 { (t.rem_euclid(pk as i64)) as u64 };
    let (x, y) = match cp {
        ChartPoint::Affine(a) => (a % pk, 1u64),
        ChartPoint::Infinite(c) => (1u64, (p * c) % pk),
    };
    let nx = (crate::padic::mul_mod(r(g[0][0]), x, pk) + crate::padic::mul_mod(r(g[0][1]), y, pk))
        % pk;
    let ny = (crate::padic::mul_mod(r(g[1][0]), x, pk) + crate::padic::mul_mod(r(g[1][1]), y, pk))
        % pk;
    if ny % p != 0 {
        let inv = crate::padic::mod_inv(ny, pk).expect("unit");
        ChartPoint::Affine(crate::padic::mul_mod(nx, inv, pk))
    } else {
        let inv = crate::padic::mod_inv(nx, pk).expect("primitive vector");
        ChartPoint::Infinite(crate::padic::mul_mod(ny, inv, pk) / p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: u64 = 11;

    #[test]
    fn normal_form_of_standard_matrices() {
        let v = Vertex::base(P);
        assert_eq!(v.n, 0);
        // diag(p, 1) moves the base vertex distance 1
        let g = Mat2::from_i64(P as i64, 0, 0, 1);
        let w = act_vertex(&g, &v).unwrap();
        assert_eq!(v.distance(&w), 1);
        assert_eq!(w, Vertex::new(P, 1, &Q::zero()));
        // scaling a basis does not move the vertex
        let s = Mat2::from_i64(3 * P as i64, 0, 0, 3 * P as i64);
        assert_eq!(act_vertex(&s, &w).unwrap(), w);
    }

    #[test]
    fn distance_is_a_metric_on_samples() {
        let verts: Vec<Vertex> = (0..6)
            .map(|i| Vertex::new(P, i % 4 - 1, &qi(7 * i + 3)))
            .collect();
        for a in &verts {
            assert_eq!(a.distance(a), 0);
            for b in &verts {
                assert_eq!(a.distance(b), b.distance(a));
                for c in &verts {
                    assert!(a.distance(c) <= a.distance(b) + b.distance(c));
                }
            }
        }
    }

    #[test]
    fn neighbors_are_adjacent_and_distinct() {
        let v = Vertex::new(P, 2, &qi(14));
        let ns = v.neighbors();
        assert_eq!(ns.len(), (P + 1) as usize);
        for w in &ns {
            assert_eq!(v.distance(w), 1);
        }
        for i in 0..ns.len() {
            for j in (i + 1)..ns.len() {
                assert_ne!(ns[i], ns[j]);
            }
        }
    }

    #[test]
    fn sl2z_fixes_base_vertex_and_acts_transitively_on_its_edges() {
        let v = Vertex::base(P);
        for g in [
            Mat2::from_i64(0, -1, 1, 0),
            Mat2::from_i64(1, 1, 0, 1),
            Mat2::from_i64(3, 2, 4, 3),
        ] {
            assert_eq!(act_vertex(&g, &v).unwrap(), v);
        }
        // the p+1 neighbors are reached from hat v_* by {1} u {T^m S}
        let mut seen = std::collections::HashSet::new();
        seen.insert(Vertex::hat_base(P));
        for m in 0..P as i64 {
            let g = Mat2::from_i64(1, m, 0, 1).mul(&Mat2::from_i64(0, -1, 1, 0));
            seen.insert(act_vertex(&g, &Vertex::hat_base(P)).unwrap());
        }
        assert_eq!(seen.len(), (P + 1) as usize);
        for w in &seen {
            assert_eq!(v.distance(w), 1);
        }
    }

    #[test]
    fn ball_edge_round_trip() {
        let balls = [
            Ball::zp(P),
            Ball::disc(P, &qi(5), 2),
            Ball::disc(P, &Q::new(3.into(), 11.into()), -1),
            Ball::complement(P, &qi(0), 0),
            Ball::complement(P, &qi(7), 3),
        ];
        for b in &balls {
            let e = b.edge();
            let b2 = ball_of_edge(&e).unwrap();
            assert_eq!(*b, b2, "edge was {e}");
        }
        // base edge corresponds to Z_p itself
        assert_eq!(ball_of_edge(&Edge::base(P)).unwrap(), Ball::zp(P));
        // reversed base edge corresponds to the complement
        assert_eq!(
            ball_of_edge(&Edge::base(P).reversed()).unwrap(),
            Ball::complement(P, &Q::zero(), 0)
        );
    }

    #[test]
    fn ball_action_matches_pointwise_moebius_oracle() {
        let g = Mat2::from_i64(3, 2, 4, 3);
        let h = Mat2::from_i64(2, 1, 11, 6); // det 1, moves Z_p off itself
        for b in [Ball::disc(P, &qi(4), 1), Ball::complement(P, &qi(0), 0)] {
            for m in [&g, &h] {
                let img = Ball::act(m, &b).unwrap();
                // oracle: sample rationals, compare membership pointwise
                for t in -30i64..30 {
                    for s in 1i64..4 {
                        let x = Q::new(t.into(), (s * s).into());
                        let denom = &m.e[1][0] * &x + &m.e[1][1];
                        let y = if denom.is_zero() {
                            None
                        } else {
                            Some((&m.e[0][0] * &x + &m.e[0][1]) / denom)
                        };
                        assert_eq!(
                            b.contains(Some(&x)),
                            img.contains(y.as_ref()),
                            "m={m:?} x={x} ball={b}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn ball_literals_round_trip() {
        for s in ["5 + O(p^2)", "!(0 + O(p^0))", "3/11 + O(p^-1)", "!(7 + O(p^3))"] {
            let b = Ball::parse(P, s).unwrap();
            let b2 = Ball::parse(P, &b.to_string()).unwrap();
            assert_eq!(b, b2);
        }
        assert!(Ball::parse(P, "garbage").is_err());
    }

    #[test]
    fn cover_counts_and_charts_partition() {
        for k in 1..=3u32 {
            let cov = cover(P, k).unwrap();
            let expected = ((P + 1) * P.pow(k - 1)) as usize;
            assert_eq!(cov.len(), expected);
            // the underlying balls partition P^1: every sample rational lies
            // in exactly one
            let balls: Vec<Ball> = cov
                .iter()
                .map(|&cp| ball_of_chart(P, k, cp).unwrap())
                .collect();
            for t in [-25i64, -1, 0, 7, 121, 1331, 5] {
                for s in [1i64, 11, 121, 3] {
                    let x = Q::new(t.into(), s.into());
                    let hits = balls.iter().filter(|b| b.contains(Some(&x))).count();
                    assert_eq!(hits, 1, "x = {x} at depth {k}");
                }
            }
            let inf_hits = balls.iter().filter(|b| b.contains(None)).count();
            assert_eq!(inf_hits, 1);
        }
    }

    #[test]
    fn chart_of_ball_inverts_ball_of_chart() {
        for k in 1..=2u32 {
            for cp in cover(P, k).unwrap() {
                let b = ball_of_chart(P, k, cp).unwrap();
                assert_eq!(chart_of_ball(k, &b).unwrap(), cp, "cp = {cp} k = {k}");
            }
        }
    }

    #[test]
    fn fast_chart_action_agrees_with_exact_ball_action() {
        let k = 2u32;
        let mats = [
            [[0i64, -1], [1, 0]],
            [[0, -1], [1, 1]],
            [[3, 2], [4, 3]],
            [[1, 5], [0, 1]],
        ];
        for cp in cover(P, k).unwrap() {
            let b = ball_of_chart(P, k, cp).unwrap();
            for g in &mats {
                let fast = act_chart(P, k, g, cp);
                let gm = Mat2::from_i64(g[0][0], g[0][1], g[1][0], g[1][1]);
                let img = Ball::act(&gm, &b).unwrap();
                let slow = chart_of_ball(k, &img).unwrap();
                assert_eq!(fast, slow, "g = {gm:?} cp = {cp}");
            }
        }
    }
}
