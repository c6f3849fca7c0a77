//! Generate the matrix-case group datum at p = 11, inspect it, and
//! round-trip it through its file format.

use darmon::quatalg::fixture_datum;

fn main() -> darmon::error::Result<()> {
    let datum = fixture_datum(11)?;
    datum.validate()?;

    println!("p = {}, discriminant = {}, level = {}", datum.p, datum.disc, datum.level);
    println!("homology rank m = {}", datum.h_rank);
    println!("datum hash: {}", datum.hash);
    println!("Gamma_0 generators ({}):", datum.gamma0_generators.len());
    for (i, g) in datum.gamma0_generators.iter().enumerate() {
        let m = datum.embed_p(g);
        println!("  g{i} -> {m}");
    }
    println!("relations: {:?}", datum.gamma0_relations);

    // abelianization values drive the whole construction; they are
    // defined on Gamma_1, so a generator outside it is reported as such
    for (i, g) in datum.gamma0_generators.iter().enumerate() {
        match datum.abelianization_image(g) {
            Ok(v) => println!("  phi(g{i}) = {v:?}"),
            Err(_) => println!("  g{i} lies outside Gamma_1 (no abelianization value)"),
        }
    }

    let text = datum.to_json()?;
    let again = darmon::quatalg::GroupDatum::from_json(&text)?;
    assert_eq!(datum.hash, again.hash);
    println!("round-trip through JSON preserves the hash");
    Ok(())
}
