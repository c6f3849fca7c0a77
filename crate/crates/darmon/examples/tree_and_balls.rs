//! Walk the Bruhat-Tits tree of PGL_2(Q_p): vertices, edges, the
//! dictionary with balls in P^1(Q_p), and the depth-k chart cover.

use darmon::bttree::{act_vertex, ball_of_edge, cover, Ball, Vertex};
use darmon::mat::{mat_s, Mat2};
use num_rational::BigRational;

fn main() -> darmon::error::Result<()> {
    let p = 11u64;

    let base = Vertex::base(p);
    println!("base vertex: {base:?}");
    let nbrs = base.neighbors();
    println!("it has {} neighbors (p + 1 = {})", nbrs.len(), p + 1);
    for v in nbrs.iter().take(3) {
        println!("  neighbor at distance {}: {v:?}", base.distance(v));
    }

    // the standard involution moves the base vertex to a neighbor
    let s = mat_s();
    let sv = act_vertex(&s, &nbrs[0])?;
    println!("S * first neighbor = {sv:?} (distance {} from base)", base.distance(&sv));

    // every oriented edge cuts P^1 into a ball and its complement
    let e = darmon::bttree::Edge::base(p);
    let b = ball_of_edge(&e)?;
    println!("ball of the base edge: {b:?}");
    println!("  contains 0: {}", b.contains(Some(&BigRational::from_integer(0.into())).as_ref().copied()));

    // the depth-2 cover of P^1(Q_p) by disjoint charts
    let charts = cover(p, 2)?;
    println!(
        "depth-2 cover has {} charts (p^2 + p = {})",
        charts.len(),
        p * p + p
    );

    // a ball can be written down and parsed back
    let z = Ball::zp(p);
    let g = Mat2::identity();
    let moved = Ball::act(&g, &z)?;
    println!("Z_p acted on by the identity is unchanged: {}", moved.contains_ball(&z) && z.contains_ball(&moved));
    Ok(())
}
