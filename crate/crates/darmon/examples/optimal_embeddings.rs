//! Optimal embeddings of a real quadratic order into the arithmetic
//! group: search, fixed points on the p-adic upper half plane, the
//! fundamental unit, and the distinguished automorph gamma_psi.

use darmon::darmon::{find_embeddings, fixed_point, fundamental_unit, gamma_psi, moebius};
use darmon::quatalg::fixture_datum;

fn main() -> darmon::error::Result<()> {
    let datum = fixture_datum(11)?;
    let (d_k, c) = (8i64, 1i64);

    let embeddings = find_embeddings(&datum, d_k, c, 12)?;
    println!("found {} optimal embedding(s) of the order of discriminant {d_k}", embeddings.len());
    for e in &embeddings {
        println!("  psi = {:?}, optimal: {}", e.mat, e.is_optimal());
    }

    let psi = embeddings
        .iter()
        .find(|e| e.mat[1][0] != 0)
        .expect("a non-degenerate representative exists");

    // the fixed point z_psi in K_p \ Q_p
    let (z, zbar) = fixed_point(psi, datum.p, 8)?;
    println!("fixed point z_psi = {z}");
    println!("  conjugate      = {zbar}");

    // the fundamental unit of the order, as (t, s) with e = (t + s sqrt(d_K))/2
    let (t, s) = fundamental_unit(d_k, c)?;
    println!("fundamental unit: ({t} + {s}*sqrt({d_k}))/2, norm {}", (t * t - d_k * s * s) / 4);

    // gamma_psi fixes z_psi
    let g = gamma_psi(psi, (t, s))?;
    println!("gamma_psi = {g}");
    let gz = moebius(&g, &z)?;
    assert!(gz.sub(&z).is_zero(), "gamma_psi must fix z_psi");
    println!("gamma_psi(z_psi) = z_psi confirmed");
    Ok(())
}
