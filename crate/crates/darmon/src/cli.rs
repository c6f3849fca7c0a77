//! Command-line surface: fixture generation, the end-to-end pipeline
//! driver, standalone lifting and integration, and the self-test
//! harness.  Exit codes: 0 ok, 1 mathematical failure, 2 usage.

use crate::cocycle::{build_radial, exponent_t, hecke_stabilize, GammaCocycle};
use crate::darmon::{
    darmon_integral, darmon_point, find_embeddings, fixed_point, fundamental_unit, gamma_psi,
    CoordinateMap, PointParams,
};
use crate::error::{Error, Result};
use crate::lift::{lift_cocycle, LiftedCocycle};
use crate::mat::{mat_s, mat_u};
use crate::padic::PAdicScalar;
use crate::quatalg::{fixture_datum, GroupDatum};
use crate::tate::TateCurve;
use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use std::time::Instant;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "darmon", version, about = "Darmon points on p-adic tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// The coordinate map selector: `log` for the Iwasawa logarithm on the
/// torus, or `tate:q,n` for the curve-side map `log_q(.^n)`.
#[derive(Clone, Debug)]
enum PsiSelector {
    Log,
    Tate { q: i64, n_index: i64 },
}

impl std::str::FromStr for PsiSelector {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "log" {
            return Ok(PsiSelector::Log);
        }
        let rest = s
            .strip_prefix("tate:")
            .ok_or_else(|| format!("expected `log` or `tate:q,n`, got {s:?}"))?;
        let (q, n) = rest
            .split_once(',')
            .ok_or_else(|| format!("expected `tate:q,n`, got {s:?}"))?;
        let q: i64 = q.trim().parse().map_err(|_| format!("bad q in {s:?}"))?;
        let n_index: i64 = n.trim().parse().map_err(|_| format!("bad n in {s:?}"))?;
        Ok(PsiSelector::Tate { q, n_index })
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SelftestLevel {
    Quick,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and validate a group datum for a prime p
    Fixture {
        #[arg(long, default_value_t = 11)]
        p: u64,
        /// output path for the datum file
        #[arg(long, default_value = "datum.json")]
        out: PathBuf,
    },
    /// Run the full pipeline and write a result file
    Compute {
        #[command(flatten)]
        config: RunConfigArgs,
    },
    /// Build the lifted cocycle and save it to a directory
    Lift {
        #[arg(long)]
        datum: PathBuf,
        #[arg(long, default_value_t = 3)]
        n: u32,
        #[arg(long, default_value_t = 6, alias = "precision")]
        capital_n: u32,
        #[arg(long, default_value_t = 2)]
        r: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "lift-out")]
        out: PathBuf,
    },
    /// Integrate against a previously saved lift
    Integrate {
        /// directory produced by `lift`
        #[arg(long)]
        lift: PathBuf,
        #[command(flatten)]
        config: RunConfigArgs,
    },
    /// Run the invariant suites of every module
    Selftest {
        #[arg(long, value_enum, default_value_t = SelftestLevel::Quick)]
        level: SelftestLevel,
    },
}

/// Flags mirroring the run configuration.
#[derive(Parser, Clone)]
struct RunConfigArgs {
    /// path to the group datum (generated if absent)
    #[arg(long)]
    datum: Option<PathBuf>,
    #[arg(long, default_value_t = 11)]
    p: u64,
    #[arg(long, default_value_t = 8)]
    d_k: i64,
    /// conductor of the order in K, prime to everything in sight
    #[arg(long, default_value_t = 1)]
    c: i64,
    /// tree depth n >= 1
    #[arg(long, default_value_t = 3)]
    n: u32,
    /// working precision N >= 2
    #[arg(long, default_value_t = 6, alias = "precision")]
    capital_n: u32,
    /// auxiliary Hecke prime for stabilization
    #[arg(long, default_value_t = 2)]
    r: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// coordinate map: `log` or `tate:q,n`
    #[arg(long, default_value = "log")]
    psi: PsiSelector,
    /// embedding search bound
    #[arg(long, default_value_t = 12)]
    search_bound: i64,
    #[arg(long, default_value = "result.txt")]
    out: PathBuf,
}

impl RunConfigArgs {
    fn validate(&self, datum: &GroupDatum) -> std::result::Result<(), String> {
        if self.n < 1 {
            return Err("depth n must be at least 1".into());
        }
        if self.capital_n < 2 {
            return Err("precision N must be at least 2".into());
        }
        let modulus = (datum.level as i64)
            .saturating_mul(datum.disc as i64)
            .saturating_mul(self.d_k)
            .saturating_mul(datum.p as i64);
        fn gcd(a: i64, b: i64) -> i64 {
            if b == 0 { a.abs() } else { gcd(b, a % b) }
        }
        if gcd(self.c, modulus) != 1 {
            return Err(format!(
                "conductor c = {} must be prime to M*D*d_K*p = {}",
                self.c, modulus
            ));
        }
        let max_depth: u32 = std::env::var("DARMON_MAX_DEPTH")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(6);
        if self.n > max_depth {
            return Err(format!(
                "depth {} exceeds the resource ceiling {max_depth} (DARMON_MAX_DEPTH)",
                self.n
            ));
        }
        Ok(())
    }

    fn hash(&self) -> String {
        let canon = format!(
            "d_K={} c={} n={} N={} r={} seed={} psi={:?} bound={}",
            self.d_k, self.c, self.n, self.capital_n, self.r, self.seed, self.psi,
            self.search_bound
        );
        let mut h = Sha256::new();
        h.update(canon.as_bytes());
        hex(&h.finalize())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn load_or_make_datum(path: &Option<PathBuf>, p: u64) -> Result<GroupDatum> {
    match path {
        Some(path) => GroupDatum::load(path),
        None => fixture_datum(p),
    }
}

fn header(config_hash: &str, datum_hash: &str) -> String {
    format!("tool=darmon {VERSION}\nconfig={config_hash}\ndatum={datum_hash}\n")
}

/// Dispatch; returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version with code 0 itself
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(RunError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            2
        }
        Err(RunError::Math(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

enum RunError {
    Usage(String),
    Math(Error),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Math(e)
    }
}

fn run(cmd: Command) -> std::result::Result<(), RunError> {
    match cmd {
        Command::Fixture { p, out } => {
            let datum = fixture_datum(p)?;
            datum.save(&out)?;
            println!("wrote datum for p = {p} (hash {}) to {}", datum.hash, out.display());
            Ok(())
        }
        Command::Compute { config } => {
            let datum = load_or_make_datum(&config.datum, config.p)?;
            config.validate(&datum).map_err(RunError::Usage)?;
            let params = PointParams {
                depth: config.n,
                prec: config.capital_n,
                r: config.r,
                seed: config.seed,
                search_bound: config.search_bound,
            };
            let result = darmon_point(&datum, config.d_k, config.c, &params)?;
            let body = finish(&config, &datum, result)?;
            std::fs::write(&config.out, &body).map_err(Error::from)?;
            print!("{body}");
            Ok(())
        }
        Command::Lift { datum, n, capital_n, r, seed, out } => {
            let datum = GroupDatum::load(&datum)?;
            let sys = build_radial(&datum, None)?;
            let coc = GammaCocycle::new(sys, n);
            let mut stab = hecke_stabilize(&datum, coc, r)?;
            let mu_s = stab.evaluate(&datum, &mat_s())?;
            let mu_u = stab.evaluate(&datum, &mat_u())?;
            let lift =
                crate::lift::lift_from_values(&datum, &mu_s, &mu_u, capital_n, seed)?;
            lift.verify(&datum, &mu_s, &mu_u)?;
            lift.save(&out)?;
            println!("wrote verified lift (depth {n}, precision {capital_n}) to {}", out.display());
            Ok(())
        }
        Command::Integrate { lift, config } => {
            let datum = load_or_make_datum(&config.datum, config.p)?;
            config.validate(&datum).map_err(RunError::Usage)?;
            let mut lift = LiftedCocycle::load(&lift)?;
            let params = PointParams {
                depth: lift.depth,
                prec: lift.prec,
                r: config.r,
                seed: lift.seed,
                search_bound: config.search_bound,
            };
            let psi = find_embeddings(&datum, config.d_k, config.c, config.search_bound)?
                .into_iter()
                .find(|e| e.mat[1][0] != 0)
                .ok_or(Error::DegenerateForm)?;
            let result =
                crate::darmon::darmon_point_with_lift(&datum, &psi, &mut lift, &params)?;
            let body = finish(&config, &datum, result)?;
            std::fs::write(&config.out, &body).map_err(Error::from)?;
            print!("{body}");
            Ok(())
        }
        Command::Selftest { level } => selftest(level),
    }
}

/// Apply the selected coordinate map and assemble the output file.
fn finish(
    config: &RunConfigArgs,
    datum: &GroupDatum,
    result: crate::darmon::DarmonResult,
) -> Result<String> {
    let mut body = header(&config.hash(), &datum.hash);
    match &config.psi {
        PsiSelector::Log => {
            body.push_str(&result.serialize());
        }
        PsiSelector::Tate { q, n_index } => {
            // re-integrate through the curve-side map log_q(.^n)
            let e = TateCurve::new(
                PAdicScalar::from_i64(datum.p, *q, config.capital_n as i64),
                config.capital_n as i64,
            )?;
            let n_index = *n_index;
            let psi = crate::darmon::OptimalEmbedding {
                d_k: result.d_k,
                c: result.c,
                mat: result.psi,
            };
            let sys = build_radial(datum, None)?;
            let coc = GammaCocycle::new(sys, config.n);
            let mut stab = hecke_stabilize(datum, coc, config.r)?;
            let mu_s = stab.evaluate(datum, &mat_s())?;
            let mu_u = stab.evaluate(datum, &mat_u())?;
            let mut lift = crate::lift::lift_from_values(
                datum,
                &mu_s,
                &mu_u,
                config.capital_n,
                config.seed,
            )?;
            let t = exponent_t(datum)?;
            let (z, _) = fixed_point(&psi, datum.p, config.capital_n as i64 + 2)?;
            let g = gamma_psi(&psi, fundamental_unit(result.d_k, result.c)?)?;
            let map: CoordinateMap = &|x| crate::tate::log_q(&e, &x.pow(n_index)?);
            let value = darmon_integral(&mut lift, datum, &g, &z, t, map)?;
            let curve_result = crate::darmon::DarmonResult { value, ..result };
            body.push_str(&curve_result.serialize());
            for (i, v) in curve_result.value.iter().enumerate() {
                match crate::tate::darmon_point_on_a(v, &e, 1)? {
                    (Some(pt), log) => {
                        body.push_str(&format!("point[{i}]={pt}\nlog[{i}]={log}\n"));
                    }
                    (None, log) => {
                        body.push_str(&format!(
                            "point[{i}]=exp-out-of-range\nlog[{i}]={log}\n"
                        ));
                    }
                }
            }
        }
    }
    Ok(body)
}

fn selftest(level: SelftestLevel) -> std::result::Result<(), RunError> {
    let mut failures = 0usize;
    let mut check = |name: &str, body: &dyn Fn() -> Result<()>| {
        let t0 = Instant::now();
        match body() {
            Ok(()) => println!("ok   {name} ({:.2?})", t0.elapsed()),
            Err(e) => {
                failures += 1;
                println!("FAIL {name}: {e}");
            }
        }
    };

    let datum = fixture_datum(11)?;
    check("datum validates and round-trips", &|| {
        datum.validate()?;
        let text = datum.to_json()?;
        let datum2 = GroupDatum::from_json(&text)?;
        if datum2.hash != datum.hash {
            return Err(Error::BadDatum("round-trip changed the hash".into()));
        }
        Ok(())
    });

    check("radial cocycle is sound at depth 2", &|| {
        let sys = build_radial(&datum, None)?;
        let mut coc = GammaCocycle::new(sys, 2);
        let gens = datum.generator_mats();
        let (g, h) = (&gens[0], &gens[1]);
        let lhs = coc.evaluate(&datum, &g.mul(h))?;
        let mut rhs = coc.evaluate(&datum, g)?;
        rhs.add_assign(&coc.evaluate(&datum, h)?.act_unit(&g.to_i64().expect("integral generator"))?);
        if lhs != rhs {
            return Err(Error::CocycleViolation("cocycle identity fails".into()));
        }
        Ok(())
    });

    check("lift verifies against its boundary", &|| {
        let sys = build_radial(&datum, None)?;
        let mut coc = GammaCocycle::new(sys, 2);
        let lift = lift_cocycle(&datum, &mut coc, 4, 7)?;
        let mu_s = coc.evaluate(&datum, &mat_s())?;
        let mu_u = coc.evaluate(&datum, &mat_u())?;
        lift.verify(&datum, &mu_s, &mu_u)
    });

    check("pipeline is deterministic", &|| {
        let params = PointParams { depth: 2, prec: 4, ..Default::default() };
        let a = darmon_point(&datum, 8, 1, &params)?;
        let b = darmon_point(&datum, 8, 1, &params)?;
        if a.serialize() != b.serialize() {
            return Err(Error::CocycleViolation("rerun differs".into()));
        }
        Ok(())
    });

    check("tate module basics", &|| {
        let q = PAdicScalar::from_i64(11, 11, 6);
        let e = TateCurve::new(q, 6)?;
        let u = crate::padic::QuadElem::from_scalar(q, 2);
        if !crate::tate::log_q(&e, &u)?.is_zero() {
            return Err(Error::CocycleViolation("log_q(q) != 0".into()));
        }
        let l1 = crate::tate::PeriodLattice::rank_one(u)?;
        let l2 = crate::tate::PeriodLattice::rank_one(u.mul(&u))?;
        if crate::tate::homothety_index(&l1, &l2)? != (2, 1) {
            return Err(Error::CocycleViolation("homothety index wrong".into()));
        }
        Ok(())
    });

    if matches!(level, SelftestLevel::Full) {
        check("depths 3 and 4 agree within the precision ledger", &|| {
            let p3 = PointParams { depth: 3, prec: 6, ..Default::default() };
            let p4 = PointParams { depth: 4, prec: 6, ..Default::default() };
            let a = darmon_point(&datum, 8, 1, &p3)?;
            let b = darmon_point(&datum, 8, 1, &p4)?;
            let v = crate::darmon::agreement_valuation(&a.value, &b.value);
            if v < 3 {
                return Err(Error::PrecisionExhausted(format!(
                    "depth comparison only agrees to valuation {v}"
                )));
            }
            Ok(())
        });
    }

    if failures > 0 {
        Err(RunError::Math(Error::CocycleViolation(format!(
            "{failures} selftest check(s) failed"
        ))))
    } else {
        println!("all selftest checks passed");
        Ok(())
    }
}
