//! Radial coset systems on the Bruhat–Tits tree and the universal
//! measure-valued 1-cocycle they induce, together with the Hecke
//! stabilization `t_r = T_r - (r+1)`, the exponent of the abelianized
//! amalgam, and an exact coboundary solver.
//!
//! Throughout, `Gamma_0` is the stabilizer of the even base vertex `v_*`,
//! `Gamma_0^` (its `omega_p`-conjugate) the stabilizer of the odd base
//! vertex, and `Gamma_1` their intersection, the stabilizer of the base
//! edge `e_*`.

use crate::bttree::{act_chart, act_edge, act_vertex, ball_of_chart, cover, Edge, Vertex};
use crate::error::{Error, Result};
use crate::mat::{abelianized_sl2z, val_p, Mat2, Q};
use crate::measures::{chart_index, hv_add, hv_neg, HValue, P1Measure};
use crate::modsym::schreier_generators;
use crate::quatalg::{GroupDatum, Oracle};
use num_traits::{One, Signed, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::collections::HashMap;

/// Hard cap on the number of memoized transporters.
const TRANSPORTER_LIMIT: usize = 4_000_000;

/// A radial system: one transporter per vertex and per even edge of the
/// tree, organized so that the transporters of the edges at a vertex are
/// the vertex transporter times a fixed transversal of `Gamma_1`-cosets.
///
/// Transporters are produced lazily along the path from the base, so only
/// the part of the tree that is actually queried is materialized.
pub struct RadialSystem {
    pub p: u64,
    /// transversal of `Gamma_1 \ Gamma_0`; `sigma[0] = 1`
    pub sigma: Vec<Mat2>,
    /// transversal of `Gamma_1 \ Gamma_0^`, the `omega_p`-conjugates
    pub sigma_hat: Vec<Mat2>,
    even_t: HashMap<Vertex, Mat2>,
    odd_t: HashMap<Vertex, Mat2>,
    edge_t: HashMap<Edge, Mat2>,
}

/// Build a radial system for the datum.  The transversal of
/// `Gamma_1 \ Gamma_0` is found by orbit enumeration of the supplied
/// generators on the `p + 1` edges at the base vertex; `seed` optionally
/// perturbs each nontrivial representative by a random element of
/// `Gamma_1`, producing a different (but equally valid) system.
pub fn build_radial(datum: &GroupDatum, seed: Option<u64>) -> Result<RadialSystem> {
    let p = datum.p;
    let base = Vertex::base(p);
    let hat = Vertex::hat_base(p);
    let mut gens = datum.generator_mats();
    let invs: Vec<Mat2> = gens.iter().map(|g| g.inv()).collect::<Result<_>>()?;
    gens.extend(invs);

    // orbit enumeration on the neighbors of v_* (equivalently the edges at
    // v_*, since every such edge is (v_*, neighbor))
    let mut reps: HashMap<Vertex, Mat2> = HashMap::new();
    let mut queue = vec![Mat2::identity()];
    reps.insert(hat.clone(), Mat2::identity());
    let mut steps = 0usize;
    while let Some(g) = queue.pop() {
        if reps.len() == p as usize + 1 {
            break;
        }
        steps += 1;
        if steps > 100_000 {
            break;
        }
        for h in &gens {
            let cand = h.mul(&g);
            let target = act_vertex(&cand, &hat)?;
            if !reps.contains_key(&target) {
                reps.insert(target, cand.clone());
                queue.push(cand);
            }
        }
    }
    if reps.len() != p as usize + 1 {
        return Err(Error::OrbitIncomplete(format!(
            "generators reach only {} of the {} edges at the base vertex",
            reps.len(),
            p + 1
        )));
    }

    // deterministic ordering: identity first, then by target vertex label
    let mut targets: Vec<Vertex> = reps.keys().cloned().collect();
    targets.sort_by_key(|v| (v != &hat, format!("{v}")));
    let mut sigma: Vec<Mat2> = targets.into_iter().map(|v| reps[&v].clone()).collect();
    debug_assert_eq!(sigma[0], Mat2::identity());

    if let Some(s) = seed {
        // right-multiply each nontrivial representative by a random element
        // of Gamma_1: same coset, same target edge, different system
        let mut rng = StdRng::seed_from_u64(s);
        for item in sigma.iter_mut().skip(1) {
            let len = rng.gen_range(2..6);
            let mut w = Mat2::identity();
            for _ in 0..len {
                w = w.mul(&gens[rng.gen_range(0..gens.len())]);
            }
            // return w to the trivial coset: xi = rep(target)^-1 * w
            let target = act_vertex(&w, &hat)?;
            let xi = reps[&target].inv()?.mul(&w);
            debug_assert!(datum.is_in_gamma1_mat(&xi));
            *item = item.mul(&xi);
        }
    }

    let omega = datum.omega_mat();
    let omega_inv = omega.inv()?;
    let sigma_hat: Vec<Mat2> = sigma
        .iter()
        .map(|g| omega.mul(g).mul(&omega_inv))
        .collect();

    let mut sys = RadialSystem {
        p,
        sigma,
        sigma_hat,
        even_t: HashMap::new(),
        odd_t: HashMap::new(),
        edge_t: HashMap::new(),
    };
    sys.even_t.insert(base, Mat2::identity());
    sys.odd_t.insert(hat, Mat2::identity());
    sys.edge_t.insert(Edge::base(p), Mat2::identity());
    Ok(sys)
}

impl RadialSystem {
    fn check_budget(&self) -> Result<()> {
        if self.even_t.len() + self.odd_t.len() + self.edge_t.len() > TRANSPORTER_LIMIT {
            return Err(Error::ResourceLimit("transporter table full".into()));
        }
        Ok(())
    }

    /// Transporter of a vertex: an element of the ambient group moving the
    /// base vertex of the same parity onto `v`.
    pub fn vertex_transporter(&mut self, v: &Vertex) -> Result<Mat2> {
        let even = v.parity() == 0;
        if let Some(t) = if even { self.even_t.get(v) } else { self.odd_t.get(v) } {
            return Ok(t.clone());
        }
        self.check_budget()?;
        let base = Vertex::base(self.p);
        // the neighbor closer to the base is the parent along the path
        let parent = v
            .neighbors()
            .into_iter()
            .min_by_key(|w| w.distance(&base))
            .ok_or_else(|| Error::OrbitIncomplete("vertex has no neighbors".into()))?;
        let tp = self.vertex_transporter(&parent)?;
        let reps = if even { &self.sigma_hat } else { &self.sigma };
        let target = if even { base } else { Vertex::hat_base(self.p) };
        for r in reps.clone() {
            let cand = tp.mul(&r);
            if act_vertex(&cand, &target)? == *v {
                if even {
                    self.even_t.insert(v.clone(), cand.clone());
                } else {
                    self.odd_t.insert(v.clone(), cand.clone());
                }
                return Ok(cand);
            }
        }
        Err(Error::OrbitIncomplete(format!(
            "no coset representative reaches {v} from {parent}"
        )))
    }

    /// Transporter of an even edge `e`: an element `t_e` with
    /// `t_e(e_*) = e`, chosen radially (`t_e = t_v sigma_i` for the
    /// endpoint `v` closer to the base).
    pub fn transporter(&mut self, e: &Edge) -> Result<Mat2> {
        if e.parity() != 0 {
            return Err(Error::Parse(format!("{e} is not an even edge")));
        }
        if let Some(t) = self.edge_t.get(e) {
            return Ok(t.clone());
        }
        self.check_budget()?;
        let base = Vertex::base(self.p);
        let estar = Edge::base(self.p);
        let (parent, reps) = if e.from.distance(&base) <= e.to.distance(&base) {
            (e.from.clone(), self.sigma.clone())
        } else {
            (e.to.clone(), self.sigma_hat.clone())
        };
        let tv = self.vertex_transporter(&parent)?;
        for r in &reps {
            let cand = tv.mul(r);
            if act_edge(&cand, &estar)? == *e {
                self.edge_t.insert(e.clone(), cand.clone());
                return Ok(cand);
            }
        }
        Err(Error::OrbitIncomplete(format!(
            "no coset representative reaches {e}"
        )))
    }
}

/// One value of the universal cocycle: the homology class of
/// `t_e^-1 gamma t_{gamma^-1(e)}`, an element of the edge stabilizer;
/// values on odd edges are the negatives of the reversed-edge values.
pub fn universal_cocycle(
    datum: &GroupDatum,
    sys: &mut RadialSystem,
    gamma: &Mat2,
    e: &Edge,
) -> Result<HValue> {
    if e.parity() == 1 {
        return Ok(hv_neg(&universal_cocycle(datum, sys, gamma, &e.reversed())?));
    }
    let te = sys.transporter(e)?;
    let pre = act_edge(&gamma.inv()?, e)?;
    let tpre = sys.transporter(&pre)?;
    let g = te.inv()?.mul(gamma).mul(&tpre);
    if !datum.is_in_gamma1_mat(&g) {
        return Err(Error::CocycleViolation(format!(
            "{g} is not in the edge stabilizer"
        )));
    }
    datum.abelianization_of_mat(&g)
}

/// The universal cocycle as a map `group element -> depth-n measure`,
/// with memoization per group element.
pub struct GammaCocycle {
    pub depth: u32,
    pub system: RadialSystem,
    cache: HashMap<String, P1Measure>,
}

impl GammaCocycle {
    pub fn new(system: RadialSystem, depth: u32) -> Self {
        GammaCocycle {
            depth,
            system,
            cache: HashMap::new(),
        }
    }

    /// Assemble the value measure of `gamma` on the depth-`n` cover.
    pub fn evaluate(&mut self, datum: &GroupDatum, gamma: &Mat2) -> Result<P1Measure> {
        let key = format!("{gamma}");
        if let Some(m) = self.cache.get(&key) {
            return Ok(m.clone());
        }
        let p = datum.p;
        let mut out = P1Measure::zero(p, self.depth, datum.h_rank)?;
        for (idx, cp) in cover(p, self.depth)?.into_iter().enumerate() {
            let e = ball_of_chart(p, self.depth, cp)?.edge();
            out.vals[idx] = universal_cocycle(datum, &mut self.system, gamma, &e)?;
        }
        if !out.is_harmonic() {
            return Err(Error::NotHarmonic(format!(
                "cocycle value of {gamma} has nonzero total mass"
            )));
        }
        self.cache.insert(key, out.clone());
        Ok(out)
    }

    /// Write every cached value as a measure file `word-<k>.p1meas` in
    /// `dir`, with an `index.txt` mapping group elements to files.
    pub fn dump(&self, dir: &std::path::Path) -> Result<()> {
        let mut index = String::new();
        let mut keys: Vec<&String> = self.cache.keys().collect();
        keys.sort();
        for (k, key) in keys.into_iter().enumerate() {
            let name = format!("word-{k}.p1meas");
            self.cache[key].save(&dir.join(&name))?;
            index.push_str(&format!("{key} -> {name}\n"));
        }
        std::fs::write(dir.join("index.txt"), index)?;
        Ok(())
    }
}

/// `true` when every entry of the matrix lies in `Z[1/p]`.
pub fn is_p_integral(m: &Mat2, p: u64) -> bool {
    m.e.iter().flatten().all(|x| {
        let mut d = x.denom().abs();
        let pb = num_bigint::BigInt::from(p);
        while (&d % &pb).is_zero() {
            d /= &pb;
        }
        d.is_one()
    })
}

/// Coset representatives for the degree-`r` Hecke operator in the matrix
/// case: the standard `r + 1` integral matrices of determinant `r`.
pub fn hecke_reps(r: u64) -> Vec<Mat2> {
    let mut out: Vec<Mat2> = (0..r as i64)
        .map(|j| Mat2::from_i64(1, j, 0, r as i64))
        .collect();
    out.push(Mat2::from_i64(r as i64, 0, 0, 1));
    out
}

/// For each representative index `i`, the unique `j` with
/// `delta_i gamma delta_j^-1` in the `p`-integral group (the permutation
/// of right cosets `Gamma delta_i` under right multiplication by `gamma`).
fn hecke_permutation(gamma: &Mat2, reps: &[Mat2], p: u64) -> Result<Vec<usize>> {
    let mut perm = Vec::with_capacity(reps.len());
    for di in reps {
        let mut found = None;
        for (j, dj) in reps.iter().enumerate() {
            let cand = di.mul(gamma).mul(&dj.inv()?);
            if is_p_integral(&cand, p) {
                if found.is_some() {
                    return Err(Error::CocycleViolation(
                        "Hecke coset permutation is not unique".into(),
                    ));
                }
                found = Some(j);
            }
        }
        perm.push(found.ok_or_else(|| {
            Error::NoSolution("no Hecke coset representative matches".into())
        })?);
    }
    Ok(perm)
}

/// The Hecke-stabilized cocycle `t_r c = T_r c - (r+1) c`, with
/// `(T_r c)(gamma) = sum_i delta_i^-1 . c(delta_i gamma delta_{s(i)}^-1)`
/// where `s` is the coset permutation of `gamma`; the action of
/// `delta_i^-1` is taken projectively via the adjugate.
pub struct StabilizedCocycle {
    pub r: u64,
    reps: Vec<Mat2>,
    pub base: GammaCocycle,
}

pub fn hecke_stabilize(datum: &GroupDatum, c: GammaCocycle, r: u64) -> Result<StabilizedCocycle> {
    if r == datum.p || datum.level % r == 0 || datum.disc % r == 0 {
        return Err(Error::BadDatum(format!("r = {r} must not divide MDp")));
    }
    Ok(StabilizedCocycle {
        r,
        reps: hecke_reps(r),
        base: c,
    })
}

impl StabilizedCocycle {
    pub fn evaluate(&mut self, datum: &GroupDatum, gamma: &Mat2) -> Result<P1Measure> {
        let p = datum.p;
        let perm = hecke_permutation(gamma, &self.reps, p)?;
        let mut acc = self
            .base
            .evaluate(datum, gamma)?
            .scale(-(self.r as i64 + 1));
        for (i, di) in self.reps.clone().into_iter().enumerate() {
            let inner = di.mul(gamma).mul(&self.reps[perm[i]].inv()?);
            let val = self.base.evaluate(datum, &inner)?;
            // adjugate of delta_i: same projective action as delta_i^-1
            let d = di
                .to_i64()
                .ok_or_else(|| Error::Parse("Hecke representative overflow".into()))?;
            let adj = [[d[1][1], -d[0][1]], [-d[1][0], d[0][0]]];
            acc.add_assign(&val.act_unit(&adj)?);
        }
        Ok(acc)
    }
}

/// Exponent `t` of the abelianized amalgam
/// `(Gamma_0^ab + Gamma_0^^ab) / (anti-diagonal image of Gamma_1)`,
/// computed by subgroup closure in the finite group.
pub fn exponent_t(datum: &GroupDatum) -> Result<u64> {
    match &datum.oracle {
        Oracle::ManinSymbols(_) => {}
        Oracle::Table(_) => {
            return Err(Error::OracleUnavailable(
                "abelianization data for the two factors is only wired for the matrix case".into(),
            ))
        }
    }
    const N: i64 = 12; // order of SL_2(Z)^ab
    let omega = datum.omega_mat();
    let omega_inv = omega.inv()?;
    // relation lattice: the subgroup of (Z/N)^2 generated by the
    // anti-diagonal images of the Gamma_1 generators
    let mut lattice: Vec<(i64, i64)> = vec![(0, 0)];
    for g in schreier_generators(datum.p) {
        let a = abelianized_sl2z(&g)?;
        let b = abelianized_sl2z(&omega_inv.mul(&g).mul(&omega))?;
        lattice.push((a.rem_euclid(N), (-b).rem_euclid(N)));
    }
    let mut grew = true;
    while grew {
        grew = false;
        for i in 0..lattice.len() {
            for j in 0..lattice.len() {
                let s = (
                    (lattice[i].0 + lattice[j].0).rem_euclid(N),
                    (lattice[i].1 + lattice[j].1).rem_euclid(N),
                );
                if !lattice.contains(&s) {
                    lattice.push(s);
                    grew = true;
                }
            }
        }
    }
    // exponent of (Z/N)^2 modulo the lattice
    let order = |x: (i64, i64), lattice: &Vec<(i64, i64)>| -> u64 {
        for k in 1..=N {
            let y = ((k * x.0).rem_euclid(N), (k * x.1).rem_euclid(N));
            if lattice.contains(&y) {
                return k as u64;
            }
        }
        unreachable!("order divides N")
    };
    let mut t = 1u64;
    for a in 0..N {
        for b in 0..N {
            t = num_integer::lcm(t, order((a, b), &lattice));
        }
    }
    Ok(t)
}

/// Image of a group element in the abelianized amalgam, as a pair in
/// `(Z/12)^2` (defined up to the relation lattice); matrix case only.
pub fn amalgam_image(datum: &GroupDatum, g: &Mat2, hat_factor: bool) -> Result<(i64, i64)> {
    let v = if hat_factor {
        let omega = datum.omega_mat();
        (0, abelianized_sl2z(&omega.inv()?.mul(g).mul(&omega))?)
    } else {
        (abelianized_sl2z(g)?, 0)
    };
    Ok((v.0.rem_euclid(12), v.1.rem_euclid(12)))
}

/// Solve `gamma.m - m = d_gamma` for an unknown depth-`n` measure `m`,
/// given the differences on a generating set.  The action of each
/// generator permutes the cover cells, so the system is a potential
/// problem on a graph; inconsistent cycles surface as `NoSolution` and
/// unconstrained components are set to zero.
pub fn solve_coboundary(
    p: u64,
    depth: u32,
    m_rank: usize,
    data: &[([[i64; 2]; 2], P1Measure)],
) -> Result<P1Measure> {
    let cells = cover(p, depth)?;
    let ncells = cells.len();
    for (_, d) in data {
        assert_eq!((d.p, d.depth, d.m), (p, depth, m_rank));
    }
    // permutation of cell indices under each generator
    let mut perms: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for (g, _) in data {
        let mut fwd = vec![usize::MAX; ncells];
        for (i, cp) in cells.iter().enumerate() {
            fwd[i] = chart_index(p, depth, act_chart(p, depth, g, *cp));
        }
        let mut inv = vec![usize::MAX; ncells];
        for (i, &j) in fwd.iter().enumerate() {
            inv[j] = i;
        }
        // inv[i] = pi^-1(i), so (g.m)[i] = m[inv[i]]
        perms.push((fwd, inv));
    }
    let mut m = P1Measure::zero(p, depth, m_rank)?;
    let mut known = vec![false; ncells];
    for start in 0..ncells {
        if known[start] {
            continue;
        }
        known[start] = true;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for (k, (fwd, inv)) in perms.iter().enumerate() {
                let d = &data[k].1;
                // m[pi^-1(j)] - m[j] = d[j]; follow both directions
                let pre = inv[i];
                let fwd_j = fwd[i]; // the j with pi^-1(j) = i
                // edge A: from i (as j) to pre = pi^-1(i)
                let mut targets = vec![(pre, {
                    let mut v = m.vals[i].clone();
                    hv_add(&mut v, &d.vals[i]);
                    v
                })];
                // edge B: from i (as pi^-1(j)) back to j = fwd_j
                let mut v = m.vals[i].clone();
                hv_add(&mut v, &hv_neg(&d.vals[fwd_j]));
                targets.push((fwd_j, v));
                for (t, val) in targets {
                    if !known[t] {
                        known[t] = true;
                        m.vals[t] = val;
                        stack.push(t);
                    } else if m.vals[t] != val {
                        return Err(Error::NoSolution(format!(
                            "inconsistent potential at cell {t}: {:?} vs {:?}",
                            m.vals[t], val
                        )));
                    }
                }
            }
        }
    }
    Ok(m)
}

/// Residual `gamma.m - m - d` of a candidate coboundary solution;
/// identically zero iff `m` solves the system exactly.
pub fn coboundary_residual(
    m: &P1Measure,
    data: &[([[i64; 2]; 2], P1Measure)],
) -> Result<Vec<P1Measure>> {
    let mut out = Vec::new();
    for (g, d) in data {
        let mut r = m.act_unit(g)?;
        r.add_assign(&m.neg());
        r.add_assign(&d.neg());
        out.push(r);
    }
    Ok(out)
}

/// Decompose a rational into `p`-powers times a unit: used by tests to
/// state moduli; re-exported convenience over [`val_p`].
pub fn padic_valuation(x: &Q, p: u64) -> Option<i64> {
    val_p(x, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::{mat_s, mat_u};
    use crate::quatalg::fixture_datum;

    const P: u64 = 11;

    fn random_word(rng: &mut StdRng, len: usize) -> Mat2 {
        let s = mat_s();
        let u = mat_u();
        let gens = [s.clone(), u.clone(), s.inv().unwrap(), u.inv().unwrap()];
        let mut g = Mat2::identity();
        for _ in 0..len {
            g = g.mul(&gens[rng.gen_range(0..4)]);
        }
        g
    }

    #[test]
    fn radial_system_counts_and_transporter_property() {
        let datum = fixture_datum(P).unwrap();
        let mut sys = build_radial(&datum, None).unwrap();
        assert_eq!(sys.sigma.len(), 12);
        assert_eq!(sys.sigma_hat.len(), 12);
        assert_eq!(sys.sigma[0], Mat2::identity());
        // base edge transporter is the identity
        assert_eq!(sys.transporter(&Edge::base(P)).unwrap(), Mat2::identity());
        // transporter property on all 132 even edges of the depth-2 cover
        let mut seen = 0;
        for cp in cover(P, 2).unwrap() {
            let e = ball_of_chart(P, 2, cp).unwrap().edge();
            let e = if e.parity() == 0 { e } else { e.reversed() };
            let t = sys.transporter(&e).unwrap();
            assert_eq!(act_edge(&t, &Edge::base(P)).unwrap(), e);
            seen += 1;
        }
        assert_eq!(seen, 132);
        // set equality at the base vertex: the sigma-orbit of e_* is the
        // full set of edges at v_*
        let mut edges: Vec<Edge> = sys
            .sigma
            .iter()
            .map(|s| act_edge(s, &Edge::base(P)).unwrap())
            .collect();
        edges.sort_by_key(|e| format!("{e}"));
        edges.dedup();
        assert_eq!(edges.len(), 12);
        for e in &edges {
            assert_eq!(e.from, Vertex::base(P));
        }
    }

    #[test]
    fn identity_evaluates_to_zero() {
        let datum = fixture_datum(P).unwrap();
        let sys = build_radial(&datum, None).unwrap();
        let mut c = GammaCocycle::new(sys, 2);
        let z = c.evaluate(&datum, &Mat2::identity()).unwrap();
        assert!(z.vals.iter().all(|v| v.iter().all(|&x| x == 0)));
    }

    #[test]
    fn cocycle_identity_on_random_words() {
        let datum = fixture_datum(P).unwrap();
        let sys = build_radial(&datum, None).unwrap();
        let mut c = GammaCocycle::new(sys, 2);
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..8 {
            let l1 = rng.gen_range(1..6);
            let l2 = rng.gen_range(1..6);
            let g1 = random_word(&mut rng, l1);
            let g2 = random_word(&mut rng, l2);
            let lhs = c.evaluate(&datum, &g1.mul(&g2)).unwrap();
            let mut rhs = c.evaluate(&datum, &g1).unwrap();
            let m2 = c.evaluate(&datum, &g2).unwrap();
            rhs.add_assign(&m2.act_unit(&g1.to_i64().unwrap()).unwrap());
            assert_eq!(lhs, rhs, "cocycle identity fails for {g1}, {g2}");
        }
    }

    #[test]
    fn values_are_consistent_across_depths() {
        let datum = fixture_datum(P).unwrap();
        let sys = build_radial(&datum, None).unwrap();
        let mut c3 = GammaCocycle::new(sys, 3);
        let g = mat_u().mul(&mat_s()).mul(&mat_u());
        let m3 = c3.evaluate(&datum, &g).unwrap();
        let sys2 = build_radial(&datum, None).unwrap();
        let mut c2 = GammaCocycle::new(sys2, 2);
        let m2 = c2.evaluate(&datum, &g).unwrap();
        for cp in cover(P, 2).unwrap() {
            let b = ball_of_chart(P, 2, cp).unwrap();
            assert_eq!(m3.value_on_ball(&b).unwrap(), *m2.get(cp));
        }
        assert!(m3.is_harmonic());
    }

    #[test]
    fn reversal_antisymmetry() {
        let datum = fixture_datum(P).unwrap();
        let mut sys = build_radial(&datum, None).unwrap();
        let g = mat_s().mul(&mat_u());
        let e = ball_of_chart(P, 2, crate::bttree::ChartPoint::Affine(17))
            .unwrap()
            .edge();
        let a = universal_cocycle(&datum, &mut sys, &g, &e).unwrap();
        let b = universal_cocycle(&datum, &mut sys, &g, &e.reversed()).unwrap();
        assert_eq!(a, hv_neg(&b));
    }

    #[test]
    fn evaluation_extends_to_omega_conjugates() {
        let datum = fixture_datum(P).unwrap();
        let sys = build_radial(&datum, None).unwrap();
        let mut c = GammaCocycle::new(sys, 2);
        let omega = datum.omega_mat();
        let ghat = omega.mul(&mat_u()).mul(&omega.inv().unwrap());
        let m = c.evaluate(&datum, &ghat).unwrap();
        assert!(m.is_harmonic());
        // pointwise cocycle identity mixing the two factors:
        // mu(g1 g2)(e) = mu(g1)(e) + mu(g2)(g1^-1 e)
        let g = mat_s();
        let prod = ghat.mul(&g);
        let ghat_inv = ghat.inv().unwrap();
        let sys = &mut c.system;
        for cp in cover(P, 2).unwrap() {
            let e = ball_of_chart(P, 2, cp).unwrap().edge();
            let lhs = universal_cocycle(&datum, sys, &prod, &e).unwrap();
            let mut rhs = universal_cocycle(&datum, sys, &ghat, &e).unwrap();
            let pre = act_edge(&ghat_inv, &e).unwrap();
            hv_add(&mut rhs, &universal_cocycle(&datum, sys, &g, &pre).unwrap());
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn hecke_kills_invariant_constants() {
        // a constant assignment gamma -> (uniform measure) is fixed by the
        // permutation action of every determinant-r representative, so
        // T_r - (r+1) sends it to zero
        let r = 2u64;
        let mut uniform = P1Measure::zero(P, 2, 1).unwrap();
        for v in uniform.vals.iter_mut() {
            v[0] = 7;
        }
        let mut acc = uniform.scale(-(r as i64 + 1));
        for di in hecke_reps(r) {
            acc.add_assign(&uniform.act_unit(&di.to_i64().unwrap()).unwrap());
        }
        assert!(acc.vals.iter().all(|v| v[0] == 0));
    }

    #[test]
    fn stabilized_cocycle_satisfies_the_cocycle_identity() {
        let datum = fixture_datum(P).unwrap();
        let sys = build_radial(&datum, None).unwrap();
        let c = GammaCocycle::new(sys, 2);
        let mut t2 = hecke_stabilize(&datum, c, 2).unwrap();
        let g1 = mat_u();
        let g2 = mat_s().mul(&mat_u());
        let lhs = t2.evaluate(&datum, &g1.mul(&g2)).unwrap();
        let mut rhs = t2.evaluate(&datum, &g1).unwrap();
        let m2 = t2.evaluate(&datum, &g2).unwrap();
        rhs.add_assign(&m2.act_unit(&g1.to_i64().unwrap()).unwrap());
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn two_stabilized_systems_differ_by_an_exact_coboundary() {
        let datum = fixture_datum(P).unwrap();
        let depth = 2;
        let mut a = hecke_stabilize(
            &datum,
            GammaCocycle::new(build_radial(&datum, None).unwrap(), depth),
            2,
        )
        .unwrap();
        let mut b = hecke_stabilize(
            &datum,
            GammaCocycle::new(build_radial(&datum, Some(99)).unwrap(), depth),
            2,
        )
        .unwrap();
        let mut data = Vec::new();
        for g in [mat_s(), mat_u()] {
            let mut d = a.evaluate(&datum, &g).unwrap();
            d.add_assign(&b.evaluate(&datum, &g).unwrap().neg());
            data.push((g.to_i64().unwrap(), d));
        }
        let m = solve_coboundary(P, depth, 1, &data).unwrap();
        for r in coboundary_residual(&m, &data).unwrap() {
            assert!(r.vals.iter().all(|v| v.iter().all(|&x| x == 0)));
        }
    }

    #[test]
    fn coboundary_solver_round_trip_and_infeasibility() {
        let mut rng = StdRng::seed_from_u64(5);
        let mut m0 = P1Measure::zero(P, 2, 1).unwrap();
        for v in m0.vals.iter_mut() {
            v[0] = rng.gen_range(-20..20);
        }
        let gs = [mat_s().to_i64().unwrap(), mat_u().to_i64().unwrap()];
        let mut data = Vec::new();
        for g in gs {
            let mut d = m0.act_unit(&g).unwrap();
            d.add_assign(&m0.neg());
            data.push((g, d));
        }
        let m = solve_coboundary(P, 2, 1, &data).unwrap();
        for r in coboundary_residual(&m, &data).unwrap() {
            assert!(r.vals.iter().all(|v| v[0] == 0));
        }
        // perturbing one difference value breaks an orbit cycle
        data[0].1.vals[3][0] += 1;
        assert!(matches!(
            solve_coboundary(P, 2, 1, &data),
            Err(Error::NoSolution(_))
        ));
    }

    #[test]
    fn exponent_of_the_amalgam() {
        let datum = fixture_datum(P).unwrap();
        let t = exponent_t(&datum).unwrap();
        assert!(t >= 1 && 12 % t == 0, "t = {t} must divide 12");
        // independent oracle: t must kill the class of T, which generates
        // Gamma_0^ab = Z/12, in the quotient by the Gamma_1 relations.
        // Both factors embed Z/12, so t = 1 can only happen if the
        // relation lattice is everything; the Schreier generators of
        // Gamma_0(11) include T itself (T in Gamma_0(11)), forcing the
        // anti-diagonal (phi(T), -phihat(T)) into the lattice.  Re-derive
        // the exponent by brute force over the quotient as a cross-check.
        let omega = datum.omega_mat();
        let omega_inv = omega.inv().unwrap();
        let mut lattice: Vec<(i64, i64)> = vec![(0, 0)];
        for g in schreier_generators(P) {
            let a = abelianized_sl2z(&g).unwrap().rem_euclid(12);
            let b = abelianized_sl2z(&omega_inv.mul(&g).mul(&omega))
                .unwrap()
                .rem_euclid(12);
            let gen = (a, (12 - b) % 12);
            let mut grew = true;
            while grew {
                grew = false;
                for y in lattice.clone() {
                    let s = ((gen.0 + y.0) % 12, (gen.1 + y.1) % 12);
                    if !lattice.contains(&s) {
                        lattice.push(s);
                        grew = true;
                    }
                }
            }
        }
        let mut t_oracle = 1i64;
        for a in 0..12 {
            for b in 0..12 {
                let mut k = 1;
                while !lattice.contains(&((k * a) % 12, (k * b) % 12)) {
                    k += 1;
                }
                t_oracle = num_integer::lcm(t_oracle, k);
            }
        }
        assert_eq!(t, t_oracle as u64);
        let _ = amalgam_image(&datum, &mat_u(), false).unwrap();
    }

    #[test]
    fn seeded_system_is_valid_but_different() {
        let datum = fixture_datum(P).unwrap();
        let mut s1 = build_radial(&datum, Some(1)).unwrap();
        let mut s2 = build_radial(&datum, Some(2)).unwrap();
        assert_eq!(s1.sigma[0], Mat2::identity());
        let mut differ = false;
        for cp in cover(P, 2).unwrap() {
            let e = ball_of_chart(P, 2, cp).unwrap().edge();
            let e = if e.parity() == 0 { e } else { e.reversed() };
            let t1 = s1.transporter(&e).unwrap();
            let t2 = s2.transporter(&e).unwrap();
            assert_eq!(act_edge(&t1, &Edge::base(P)).unwrap(), e);
            assert_eq!(act_edge(&t2, &Edge::base(P)).unwrap(), e);
            if t1 != t2 {
                differ = true;
            }
        }
        assert!(differ, "distinct seeds should give distinct transporters");
    }
}
