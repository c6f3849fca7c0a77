//! The Tate curve E_q over Q_p: points from the analytic
//! parametrization, the lattice-killing logarithm, homothety indices of
//! period lattices, and exponentiating a logarithm back to a point.

use darmon::padic::{PAdicScalar, QuadElem};
use darmon::tate::{
    darmon_point_on_a, homothety_index, log_q, tate_point, PeriodLattice, TateCurve,
};

fn main() -> darmon::error::Result<()> {
    let (p, prec) = (11u64, 8i64);
    let q = PAdicScalar::from_i64(p, 11, prec);
    let e = TateCurve::new(q, prec)?;
    println!("E_q at p = {p}, q = 11:");
    println!("  a4 = {}", e.a4);
    println!("  a6 = {}", e.a6);

    // a lattice point maps to the identity; -1 maps to 2-torsion
    let qd = QuadElem::from_scalar(q, 2);
    println!("Phi(q) is the identity: {}", tate_point(&e, &qd)?.infinity);
    let u = QuadElem::from_scalar(PAdicScalar::from_i64(p, 3, prec), 2);
    let pt = tate_point(&e, &u)?;
    println!("Phi(3) = {pt}");
    let res = e.equation_residual(&pt.x, &pt.y);
    match res.valuation() {
        Some(v) => println!("  curve-equation residual valuation: {v}"),
        None => println!("  curve-equation residual: zero to working precision"),
    }

    // the logarithm kills q exactly and is a homomorphism
    println!("log_q(q) = 0: {}", log_q(&e, &qd)?.is_zero());
    println!("log_q(3) = {}", log_q(&e, &u)?);

    // homothety indices of rank-one period lattices
    let l1 = PeriodLattice::rank_one(qd)?;
    let l2 = PeriodLattice::rank_one(qd.mul(&qd))?;
    println!("index of <q> against <q^2>: {:?}", homothety_index(&l1, &l2)?);

    // exponentiate a logarithm value of high enough valuation
    let v = QuadElem::from_scalar(PAdicScalar::from_i64(p, 22, prec), 2);
    let (point, log) = darmon_point_on_a(&v, &e, 1)?;
    println!("exp of log value {log}:");
    match point {
        Some(pt) => println!("  {pt}"),
        None => println!("  out of the convergence range (log form only)"),
    }
    Ok(())
}
