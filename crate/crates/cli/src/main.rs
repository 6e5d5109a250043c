//! Batch verification front-end. Every subcommand loads flat files, runs
//! exact checks and writes a JSON report; exit codes are part of the
//! interface: 0 pass, 1 fail (with witness), 2 precondition or topology
//! failure, 64 parse error, 65 budget exceeded, 70 oracle disagreement.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use bldgraph::checkers::{self, PropertyKind};
use bldgraph::convergence::{self, PointedSpace};
use bldgraph::error::CoreError;
use bldgraph::graph::{GraphPoint, MetricGraph};
use bldgraph::io::{self, IoError, PointFile};
use bldgraph::lifting;
use bldgraph::map::GraphMap;
use bldgraph::oracle::Oracle;
use bldgraph::rational::{fmt_rat, parse_rat, Rat};

#[derive(Parser)]
#[command(name = "bldgraph", version, about = "Exact checks for piecewise-linear maps between metric graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the primary JSON artifact here (reports, walks, witnesses).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Omit timing fields so identical inputs produce identical bytes.
    #[arg(long, global = true)]
    no_timing: bool,
    /// Cross-check exact verdicts against the dyadic brute-force oracle.
    #[arg(long, global = true)]
    oracle: bool,
    /// Oracle grid fineness: step = (min edge length)/denominator.
    #[arg(long, global = true, default_value_t = 64)]
    budget_oracle_denominator: i64,
    /// Oracle center thinning stride (grid metric stays at full step).
    #[arg(long, global = true, default_value_t = 8)]
    budget_oracle_stride: usize,
    /// Node budget for the quasi-isometry search.
    #[arg(long, global = true, default_value_t = 2_000_000)]
    budget_search: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Check one property of a map at a given constant.
    Check {
        #[arg(long)]
        map: PathBuf,
        /// bld | lq | lq-local | radial | radial-pointwise | coradial | lipschitz
        #[arg(long)]
        property: String,
        #[arg(long = "L")]
        constant: String,
    },
    /// Run all topological checks and the four minimal constants.
    Characterize {
        #[arg(long)]
        map: PathBuf,
    },
    /// Least admissible constant for one property.
    MinConstant {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        property: String,
    },
    /// Total lift of a walk through a branched cover.
    Lift {
        #[arg(long)]
        map: PathBuf,
        /// Walk file in the target space.
        #[arg(long)]
        walk: PathBuf,
        /// Start point over the walk's start (vertex name or point JSON).
        #[arg(long)]
        start: String,
    },
    /// Fiber-to-fiber transport along a geodesic.
    Transport {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long = "L")]
        constant: String,
    },
    /// Check a quasi-isometry witness between two pointed spaces.
    QiCheck {
        /// Source graph file (must carry a basepoint).
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// Witness file with epsilon, delta and the net assignments.
        #[arg(long)]
        witness: PathBuf,
    },
    /// Exhaustive witness search over net-to-net assignments.
    QiSearch {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        epsilon: String,
        #[arg(long)]
        delta: String,
    },
    /// Verify a convergence certificate (optionally with the limit
    /// harnesses at a constant).
    Converge {
        #[arg(long)]
        cert: PathBuf,
        #[arg(long = "lq-limit")]
        lq_limit: Option<String>,
        #[arg(long = "bld-limit")]
        bld_limit: Option<String>,
    },
    /// Generate the winding degeneration certificate.
    WindingDemo {
        #[arg(long, default_value_t = 3)]
        k_max: usize,
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Emit the canonical fixture corpus to disk.
    Fixtures {
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(classify(&err))
        }
    }
}

#[derive(Debug)]
enum CliError {
    Io(IoError),
    Core(CoreError),
    Usage(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(s) => write!(f, "{s}"),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Core(c) => CliError::Core(c),
            other => CliError::Io(other),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

fn classify(err: &CliError) -> u8 {
    match err {
        CliError::Io(_) | CliError::Usage(_) => 64,
        CliError::Core(CoreError::BudgetExceeded(_)) => 65,
        CliError::Core(_) => 2,
    }
}

type CliResult = Result<u8, CliError>;

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Check { map, property, constant } => cmd_check(cli, map, property, constant),
        Command::Characterize { map } => cmd_characterize(cli, map),
        Command::MinConstant { map, property } => cmd_min_constant(cli, map, property),
        Command::Lift { map, walk, start } => cmd_lift(cli, map, walk, start),
        Command::Transport { map, x, y, constant } => cmd_transport(cli, map, x, y, constant),
        Command::QiCheck { source, target, witness } => cmd_qi_check(cli, source, target, witness),
        Command::QiSearch { source, target, epsilon, delta } => {
            cmd_qi_search(cli, source, target, epsilon, delta)
        }
        Command::Converge { cert, lq_limit, bld_limit } => {
            cmd_converge(cli, cert, lq_limit.as_deref(), bld_limit.as_deref())
        }
        Command::WindingDemo { k_max, m, out_dir } => cmd_winding_demo(cli, *k_max, *m, out_dir),
        Command::Fixtures { out_dir } => cmd_fixtures(out_dir),
    }
}

fn parse_constant(s: &str) -> Result<Rat, CliError> {
    parse_rat(s).ok_or_else(|| CliError::Usage(format!("invalid rational constant `{s}`")))
}

fn parse_property(s: &str) -> Result<PropertyKind, CliError> {
    PropertyKind::parse(s)
        .ok_or_else(|| CliError::Usage(format!("unknown property `{s}`")))
}

fn parse_point(g: &MetricGraph, s: &str) -> Result<GraphPoint, CliError> {
    let file: PointFile = if s.trim_start().starts_with('{') {
        serde_json::from_str(s)
            .map_err(|e| CliError::Usage(format!("invalid point `{s}`: {e}")))?
    } else {
        PointFile::Named(s.to_string())
    };
    Ok(io::point_from_file(g, &file)?)
}

fn emit<T: serde::Serialize>(cli: &Cli, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .expect("report serialization is infallible");
    println!("{text}");
    if let Some(out) = &cli.out {
        io::save_json(out, value)?;
    }
    Ok(())
}

fn elapsed_field(cli: &Cli, started: Instant) -> Option<u128> {
    if cli.no_timing {
        None
    } else {
        Some(started.elapsed().as_millis())
    }
}

fn oracle_property_verdict(o: &mut Oracle<'_>, property: PropertyKind, l: &Rat) -> Option<bool> {
    match property {
        PropertyKind::Bld => {
            Some(o.is_discrete() && o.is_open() && o.check_radial(l) && o.check_lipschitz(l))
        }
        PropertyKind::Lq => Some(o.check_lq(l)),
        PropertyKind::LqLocal => Some(o.check_lq_local(l)),
        PropertyKind::Radial => Some(o.check_radial(l)),
        PropertyKind::RadialPointwise => Some(o.check_radial_pointwise(l)),
        PropertyKind::Coradial => None,
        PropertyKind::Lipschitz => Some(o.check_lipschitz(l)),
    }
}

fn cmd_check(cli: &Cli, map: &Path, property: &str, constant: &str) -> CliResult {
    let started = Instant::now();
    let f = io::load_map(map)?;
    let property = parse_property(property)?;
    let l = parse_constant(constant)?;
    let rep = checkers::check_property(&f, property, &l)?;
    let mut file = io::report_to_file(&f, &rep, None, elapsed_field(cli, started));
    let mut oracle_mismatch = false;
    if cli.oracle {
        let mut o = Oracle::new(&f, cli.budget_oracle_denominator, cli.budget_oracle_stride);
        if let Some(ov) = oracle_property_verdict(&mut o, property, &l) {
            if ov != rep.verdict {
                oracle_mismatch = true;
                eprintln!(
                    "oracle disagreement: exact verdict {} vs oracle {}",
                    rep.verdict, ov
                );
            }
        }
        file.elapsed_ms = elapsed_field(cli, started);
    }
    emit(cli, &file)?;
    if oracle_mismatch {
        return Ok(70);
    }
    Ok(if rep.verdict { 0 } else { 1 })
}

fn cmd_characterize(cli: &Cli, map: &Path) -> CliResult {
    let started = Instant::now();
    let f = io::load_map(map)?;
    let rep = checkers::characterize(&f);
    let file = io::characterize_to_file(&rep, elapsed_field(cli, started));
    emit(cli, &file)?;
    let mut oracle_mismatch = false;
    if cli.oracle {
        let mut o = Oracle::new(&f, cli.budget_oracle_denominator, cli.budget_oracle_stride);
        let oc = o.min_constant();
        let expected = rep.bld.clone();
        if o.is_discrete() && o.is_open() && oc != expected {
            oracle_mismatch = true;
            eprintln!(
                "oracle disagreement on the minimal constant: exact {:?} vs oracle {:?}",
                expected.as_ref().map(fmt_rat),
                oc.as_ref().map(fmt_rat)
            );
        }
    }
    if oracle_mismatch {
        return Ok(70);
    }
    Ok(match rep.equivalence {
        Some(true) => 0,
        Some(false) => 1,
        None => 2,
    })
}

fn cmd_min_constant(cli: &Cli, map: &Path, property: &str) -> CliResult {
    let started = Instant::now();
    let f = io::load_map(map)?;
    let property = parse_property(property)?;
    let minimal = checkers::min_constant(&f, property)?;
    let rep = checkers::check_property(&f, property, &minimal)?;
    let file = io::report_to_file(&f, &rep, Some(&minimal), elapsed_field(cli, started));
    emit(cli, &file)?;
    if cli.oracle {
        let mut o = Oracle::new(&f, cli.budget_oracle_denominator, cli.budget_oracle_stride);
        if let Some(oc) = o.min_constant() {
            if oc != minimal {
                eprintln!(
                    "oracle disagreement: exact minimal {} vs oracle {}",
                    fmt_rat(&minimal),
                    fmt_rat(&oc)
                );
                return Ok(70);
            }
        }
    }
    Ok(0)
}

fn cmd_lift(cli: &Cli, map: &Path, walk: &Path, start: &str) -> CliResult {
    let f = io::load_map(map)?;
    let beta = io::load_walk(walk, f.target())?;
    let start = parse_point(f.source(), start)?;
    let lift = lifting::total_lift(&f, &beta, &start)?;
    debug_assert!(lifting::verify_lift(&f, &lift.lift, &beta));
    let file = io::walk_to_file(f.source(), &lift.lift);
    emit(cli, &file)?;
    Ok(0)
}

fn cmd_transport(cli: &Cli, map: &Path, x: &str, y: &str, constant: &str) -> CliResult {
    let f = io::load_map(map)?;
    let l = parse_constant(constant)?;
    let x = parse_point(f.target(), x)?;
    let y = parse_point(f.target(), y)?;
    let t = lifting::fiber_transport(&f, &x, &y, &l)?;
    let table = serde_json::json!({
        "from": io::point_to_file(f.target(), &t.from),
        "to": io::point_to_file(f.target(), &t.to),
        "bound": fmt_rat(&t.bound),
        "pairs": t.pairs.iter().map(|(a, b, d)| serde_json::json!({
            "fiber_point": io::point_to_file(f.source(), a),
            "transported": io::point_to_file(f.source(), b),
            "distance": fmt_rat(d),
        })).collect::<Vec<_>>(),
    });
    emit(cli, &table)?;
    Ok(0)
}

fn load_pointed(path: &Path) -> Result<PointedSpace, CliError> {
    let (g, bp) = io::load_graph(path)?;
    let bp = bp.ok_or_else(|| {
        CliError::Usage(format!("{} must declare a basepoint", path.display()))
    })?;
    Ok(PointedSpace::new(g, bp)?)
}

fn cmd_qi_check(cli: &Cli, source: &Path, target: &Path, witness: &Path) -> CliResult {
    let src = load_pointed(source)?;
    let dst = load_pointed(target)?;
    let wf: io::QiWitnessFile = serde_json::from_str(
        &std::fs::read_to_string(witness)
            .map_err(|source| IoError::Io { path: witness.into(), source })?,
    )
    .map_err(|e| IoError::Json { path: witness.into(), source: e })?;
    let w = io::qi_witness_from_file(&src.space, &dst.space, &wf)?;
    let rep = convergence::check_quasi_isometry(&src, &dst, &w)?;
    let min_eps = convergence::min_qi_epsilon(&src, &dst, &w)?;
    let out = serde_json::json!({
        "pass": rep.pass,
        "epsilon": fmt_rat(&w.epsilon),
        "delta": fmt_rat(&w.delta),
        "max_distortion": fmt_rat(&rep.max_distortion),
        "worst_coverage_gap": fmt_rat(&rep.worst_coverage_gap),
        "mesh_correction": fmt_rat(&rep.mesh_correction),
        "violation": rep.violation.as_ref().map(|v| format!("{v:?}")),
        "min_epsilon_infimum": fmt_rat(&min_eps.infimum),
        "min_epsilon_attained": min_eps.attained,
        "net_policy_floor": fmt_rat(&min_eps.policy_floor),
    });
    emit(cli, &out)?;
    Ok(if rep.pass { 0 } else { 1 })
}

fn cmd_qi_search(cli: &Cli, source: &Path, target: &Path, epsilon: &str, delta: &str) -> CliResult {
    let src = load_pointed(source)?;
    let dst = load_pointed(target)?;
    let eps = parse_constant(epsilon)?;
    let delta = parse_constant(delta)?;
    match convergence::search_quasi_isometry(&src, &dst, &eps, &delta, cli.budget_search)? {
        Some(w) => {
            let file = io::qi_witness_to_file(&src.space, &dst.space, &w);
            emit(cli, &file)?;
            Ok(0)
        }
        None => {
            let out = serde_json::json!({
                "found": false,
                "note": "no witness over the searched nets; not a nonexistence proof",
            });
            emit(cli, &out)?;
            Ok(1)
        }
    }
}

fn cmd_converge(
    cli: &Cli,
    cert: &Path,
    lq_limit: Option<&str>,
    bld_limit: Option<&str>,
) -> CliResult {
    let certificate = io::load_certificate(cert)?;
    let rep = convergence::check_package_convergence(&certificate)?;
    let mut out = serde_json::json!({
        "pass": rep.pass,
        "issues": rep.issues,
        "worst_eps": fmt_rat(&rep.worst_eps),
        "worst_tail": fmt_rat(&rep.worst_tail),
        "packages": certificate.packages.len(),
    });
    if let Some(l) = lq_limit {
        let l = parse_constant(l)?;
        let h = convergence::lq_limit_harness(&certificate, &l)?;
        out["lq_limit"] = serde_json::json!({
            "constant": fmt_rat(&l),
            "limit_pass": h.limit_pass,
        });
    }
    if let Some(l) = bld_limit {
        let l = parse_constant(l)?;
        let h = convergence::bld_limit_harness(&certificate, &l)?;
        out["bld_limit"] = serde_json::json!({
            "constant": fmt_rat(&l),
            "limit_discrete": h.limit_discrete,
            "limit_bld": h.limit_bld,
            "note": if h.limit_discrete { "limit theorem applies" } else { "discreteness hypothesis fails; limit theorem not applicable" },
        });
    }
    emit(cli, &out)?;
    Ok(if rep.pass { 0 } else { 1 })
}

fn cmd_winding_demo(cli: &Cli, k_max: usize, m: usize, out_dir: &Path) -> CliResult {
    let cert = convergence::winding_demo(k_max, m)?;
    let path = io::save_certificate(out_dir, "winding", &cert)?;
    let rep = convergence::check_package_convergence(&cert)?;
    let out = serde_json::json!({
        "certificate": path.display().to_string(),
        "packages": cert.packages.len(),
        "pass": rep.pass,
        "issues": rep.issues,
    });
    emit(cli, &out)?;
    Ok(if rep.pass { 0 } else { 1 })
}

fn cmd_fixtures(out_dir: &Path) -> CliResult {
    std::fs::create_dir_all(out_dir)
        .map_err(|source| IoError::Io { path: out_dir.into(), source })?;
    use bldgraph::fixtures as fx;
    let corpus: Vec<(&str, GraphMap)> = vec![
        ("id_i3", fx::identity(&std::sync::Arc::new(fx::path_graph(3)))),
        ("id_c4", fx::identity(&std::sync::Arc::new(fx::cycle_graph(4, bldgraph::rational::rat_int(1))))),
        ("w2", fx::winding(2, 3)),
        ("w3", fx::winding(3, 3)),
        ("tent", fx::tent()),
        ("fold", fx::fold()),
        ("speed2", fx::speed2()),
        ("const", fx::const_map()),
    ];
    let mut written = Vec::new();
    for (name, map) in &corpus {
        let path = out_dir.join(format!("{name}.gm.json"));
        io::save_map(
            &path,
            map,
            &format!("{name}.source.mg.json"),
            &format!("{name}.target.mg.json"),
        )?;
        written.push(path.display().to_string());
    }
    println!("{}", serde_json::json!({ "written": written }));
    Ok(0)
}
