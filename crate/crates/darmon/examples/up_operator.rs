//! Apply the U_p operator to a lifted cocycle and watch the ordinary
//! projection emerge: the integral of the smoothed cocycle converges,
//! one p-adic digit per application, toward the eigenvalue-(+1) line.

use darmon::cocycle::{build_radial, exponent_t, hecke_stabilize, GammaCocycle};
use darmon::darmon::{
    agreement_valuation, darmon_integral, find_embeddings, fixed_point, fundamental_unit,
    gamma_psi, CoordinateMap,
};
use darmon::lift::{lift_from_values, up_operator};
use darmon::mat::{mat_s, mat_u};
use darmon::quatalg::fixture_datum;

fn main() -> darmon::error::Result<()> {
    let datum = fixture_datum(11)?;
    let (depth, prec) = (2u32, 4u32);

    let sys = build_radial(&datum, None)?;
    let mut stab = hecke_stabilize(&datum, GammaCocycle::new(sys, depth), 2)?;
    let mu_s = stab.evaluate(&datum, &mat_s())?;
    let mu_u = stab.evaluate(&datum, &mat_u())?;
    let mut lift = lift_from_values(&datum, &mu_s, &mu_u, prec, 0)?;

    // the embedding data for the integral
    let psi = find_embeddings(&datum, 8, 1, 12)?
        .into_iter()
        .find(|e| e.mat[1][0] != 0)
        .expect("a non-degenerate embedding exists");
    let (z, _) = fixed_point(&psi, datum.p, prec as i64 + 2)?;
    let g = gamma_psi(&psi, fundamental_unit(8, 1)?)?;
    let t = exponent_t(&datum)?;
    let log_map: CoordinateMap = &|x| x.iwasawa_log();

    let mut values = Vec::new();
    let mut current = lift;
    for k in 0..3 {
        values.push(darmon_integral(&mut current, &datum, &g, &z, t, log_map)?);
        println!("integral of U_p^{k} L computed");
        current = up_operator(&datum, &mut current)?;
    }
    values.push(darmon_integral(&mut current, &datum, &g, &z, t, log_map)?);

    // successive iterates approach each other: U_p acts as +1 on the
    // ordinary part and contracts the complement
    for k in 0..3 {
        let v = agreement_valuation(&values[k], &values[k + 1]);
        println!("v_p(integral(U_p^{k} L) - integral(U_p^{} L)) = {v}", k + 1);
    }
    Ok(())
}
