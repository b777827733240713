//! `homdist`: exact homotopic distance and its invariants on finite spaces,
//! plus the symbolic bound ledger and the conformance checker.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use homdist::conformance::{check_propositions, GenConfig, Suite};
use homdist::distance::{higher_distance, naive_distance, subspace_distance, DistanceError, DistanceResult};
use homdist::finspace::{
    core_reduce, open_sets, parse_map, parse_space_named, path_components, CMap, FiniteSpace, SpaceError,
};
use homdist::invariants::{
    cat, fibered_power, map_tc, pair_points, pair_tc, param_tc, power_with_projections, rel_tc, tc_n,
    tuple_index, Budget, InvariantError,
};
use homdist::ledger::{self, LedgerError, Options};

#[derive(Parser, Debug)]
#[command(name = "homdist", version, about = "Homotopic distance calculator for finite T0 spaces")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Summarize a space file.
    Space {
        file: PathBuf,
        /// Print the core as a space file.
        #[arg(long)]
        core: bool,
    },
    /// Distance between maps given as map files.
    Dist(DistArgs),
    /// One of the distance-based invariants.
    Invariant {
        #[arg(value_enum)]
        which: Which,
        #[command(flatten)]
        args: InvArgs,
    },
    /// Symbolic bound propagation.
    Ledger {
        #[command(subcommand)]
        action: LedgerAction,
    },
    /// Property checks on seeded random finite spaces.
    Conformance {
        #[arg(long, value_enum, default_value = "hard")]
        suite: SuiteArg,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        count: u64,
        #[arg(long, default_value_t = 6)]
        max_points: usize,
        /// Largest product or fibered power the checks may build.
        #[arg(long, default_value_t = 64)]
        budget: usize,
    },
}

#[derive(Args, Debug)]
struct DistArgs {
    /// Space files the maps refer to.
    #[arg(long = "space")]
    spaces: Vec<PathBuf>,
    /// Map files, in order.
    #[arg(long = "map", required = true)]
    maps: Vec<PathBuf>,
    /// Restrict to these source points (comma separated).
    #[arg(long)]
    subspace: Option<String>,
    #[arg(long)]
    witness: bool,
    /// Use plain enumeration instead of the search.
    #[arg(long)]
    oracle: bool,
}

#[derive(Args, Debug)]
struct InvArgs {
    #[arg(long = "space")]
    spaces: Vec<PathBuf>,
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Points of the subspace: `a,b` for pairs, `(a,a),(c,d)` for tuples.
    #[arg(long)]
    subspace: Option<String>,
    #[arg(long)]
    basepoint: Option<String>,
    /// Largest product the computation may build.
    #[arg(long, default_value_t = 25)]
    budget: usize,
    #[arg(long)]
    witness: bool,
    #[arg(long)]
    oracle: bool,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Which {
    Cat,
    Tcn,
    Reltc,
    Pairtc,
    Maptc,
    Paramtc,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SuiteArg {
    Hard,
    Report,
}

#[derive(Subcommand, Debug)]
enum LedgerAction {
    Run {
        scenario: PathBuf,
        /// Override a parameter, `name=value`.
        #[arg(long = "param")]
        params: Vec<String>,
        #[arg(long = "exclude-rule")]
        exclude: Vec<String>,
    },
}

enum Failure {
    /// Bad input: exit code 2.
    Usage(String),
    /// The computation itself failed: exit code 1.
    Compute(String),
    /// Hard conformance failures: exit code 3, report already printed.
    Conformance,
}

impl From<SpaceError> for Failure {
    fn from(e: SpaceError) -> Self {
        match e {
            SpaceError::ThresholdExceeded { .. } => Failure::Compute(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<DistanceError> for Failure {
    fn from(e: DistanceError) -> Self {
        match e {
            DistanceError::NoMaps | DistanceError::Mismatch | DistanceError::EmptySubspace => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Compute(e.to_string()),
        }
    }
}

impl From<InvariantError> for Failure {
    fn from(e: InvariantError) -> Self {
        match e {
            InvariantError::Distance(d) => d.into(),
            InvariantError::ZeroArity | InvariantError::UnknownPoint(_) | InvariantError::EmptySubspace => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Compute(e.to_string()),
        }
    }
}

impl From<LedgerError> for Failure {
    fn from(e: LedgerError) -> Self {
        match e {
            LedgerError::Contradiction { .. } | LedgerError::NoFixpoint(_) | LedgerError::Overflow(_) => {
                Failure::Compute(e.to_string())
            }
            _ => Failure::Usage(e.to_string()),
        }
    }
}

type Outcome = Result<String, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_space(path: &Path) -> Result<Arc<FiniteSpace>, Failure> {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("X");
    Ok(Arc::new(parse_space_named(&read(path)?, stem)?))
}

fn load_spaces(paths: &[PathBuf]) -> Result<Vec<Arc<FiniteSpace>>, Failure> {
    paths.iter().map(|p| load_space(p)).collect()
}

/// Splits `a,b` or `(a,b),(c,d)` at top-level commas.
fn split_points(list: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in list.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if ch == ',' && depth == 0 {
            out.push(cur.trim().to_string());
            cur.clear();
        } else if !ch.is_whitespace() {
            cur.push(ch);
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn resolve(space: &FiniteSpace, list: &str) -> Result<Vec<usize>, Failure> {
    let names = split_points(list);
    if names.is_empty() {
        return Err(Failure::Usage("empty subspace".into()));
    }
    let mut idx: Vec<usize> = names
        .iter()
        .map(|n| space.index_of(n).ok_or_else(|| Failure::Usage(format!("unknown point `{n}` in {}", space.name()))))
        .collect::<Result<_, _>>()?;
    idx.sort_unstable();
    idx.dedup();
    Ok(idx)
}

fn witness_lines(out: &mut String, d: &DistanceResult) {
    for (piece, fences) in d.cover.iter().zip(&d.fences) {
        let members = piece.names(&d.domain).join(" ");
        let lengths: Vec<String> = fences.iter().map(|f| f.len().to_string()).collect();
        let _ = writeln!(out, "  piece {{{members}}} fences {}", lengths.join(" "));
    }
}

/// Value of `maps`, by search or by enumeration, printed as `label = value`.
fn report(label: &str, maps: &[CMap], members: Option<&[usize]>, witness: bool, oracle: bool) -> Outcome {
    let mut out = String::new();
    if oracle {
        let restricted: Vec<CMap> = match members {
            Some(m) => maps.iter().map(|f| f.restrict(m)).collect::<Result<_, _>>()?,
            None => maps.to_vec(),
        };
        let _ = writeln!(out, "{label} = {}", naive_distance(&restricted)?);
        return Ok(out);
    }
    let d = match members {
        Some(m) => subspace_distance(m, maps)?,
        None => higher_distance(maps)?,
    };
    let _ = writeln!(out, "{label} = {}", d.value);
    if witness {
        witness_lines(&mut out, &d);
    }
    Ok(out)
}

fn run_space(file: &Path, core: bool) -> Outcome {
    let x = load_space(file)?;
    let name = x.name().to_string();
    let mut out = String::new();
    let _ = writeln!(out, "points({name}) = {}", x.len());
    let _ = writeln!(out, "relations({name}) = {}", x.covers().len());
    let _ = writeln!(out, "components({name}) = {}", path_components(&x).len());
    match open_sets(&x) {
        Ok(opens) => {
            let _ = writeln!(out, "opens({name}) = {}", opens.len());
        }
        Err(SpaceError::ThresholdExceeded { .. }) => {}
        Err(e) => return Err(e.into()),
    }
    let red = core_reduce(&x);
    let _ = writeln!(out, "core-points({name}) = {}", red.core.len());
    let _ = writeln!(out, "contractible({name}) = {}", red.core.len() == 1 && path_components(&x).len() == 1);
    if core {
        out.push_str(&homdist::finspace::format_space(&red.core));
    }
    Ok(out)
}

fn run_dist(args: &DistArgs) -> Outcome {
    let spaces = load_spaces(&args.spaces)?;
    let mut ids = Vec::new();
    let mut maps = Vec::new();
    for path in &args.maps {
        let (id, f) = parse_map(&read(path)?, &spaces)?;
        ids.push(id);
        maps.push(f);
    }
    let members = match &args.subspace {
        Some(list) => Some(resolve(maps[0].source(), list)?),
        None => None,
    };
    let label = match &members {
        Some(m) => {
            let names: Vec<&str> = m.iter().map(|&i| maps[0].source().point_name(i)).collect();
            format!("D_{{{}}}({})", names.join(","), ids.join(","))
        }
        None => format!("D({})", ids.join(",")),
    };
    report(&label, &maps, members.as_deref(), args.witness, args.oracle)
}

fn one_space(args: &InvArgs) -> Result<Arc<FiniteSpace>, Failure> {
    match args.spaces.as_slice() {
        [p] => load_space(p),
        _ => Err(Failure::Usage("expected exactly one --space".into())),
    }
}

fn load_fibration(args: &InvArgs) -> Result<(String, CMap), Failure> {
    let spaces = load_spaces(&args.spaces)?;
    let path = args.map.as_ref().ok_or_else(|| Failure::Usage("--map is required".into()))?;
    Ok(parse_map(&read(path)?, &spaces)?)
}

fn run_invariant(which: Which, args: &InvArgs) -> Outcome {
    let budget = Budget { max_points: args.budget, ..Budget::default() };
    let n = args.n;
    match which {
        Which::Cat => {
            let x = one_space(args)?;
            let base = match &args.basepoint {
                Some(p) => x.index_of(p).ok_or_else(|| Failure::Usage(format!("unknown basepoint `{p}`")))?,
                None => 0,
            };
            let label = format!("cat({})", x.name());
            if args.oracle {
                connected(&x)?;
                let sq = power_with_projections(&x, 2, &Budget::with_points(budget.max_points.max(x.len() * x.len())))?;
                let i1 = (0..x.len()).map(|p| tuple_index(&x, &[p, base])).collect();
                let i2 = (0..x.len()).map(|p| tuple_index(&x, &[base, p])).collect();
                let maps = [CMap::new(x.clone(), sq.space.clone(), i1)?, CMap::new(x.clone(), sq.space, i2)?];
                return report(&label, &maps, None, false, true);
            }
            let d = cat(&x, base, &budget)?;
            Ok(finish(&label, &d, args.witness))
        }
        Which::Tcn => {
            let x = one_space(args)?;
            let label = format!("TC_{n}({})", x.name());
            if args.oracle {
                connected(&x)?;
                let pw = power_with_projections(&x, n, &budget)?;
                return report(&label, &pw.projections, None, false, true);
            }
            Ok(finish(&label, &tc_n(&x, n, &budget)?, args.witness))
        }
        Which::Reltc => {
            let x = one_space(args)?;
            let pw = power_with_projections(&x, n, &budget)?;
            let list = args.subspace.as_deref().ok_or_else(|| Failure::Usage("--subspace is required".into()))?;
            let members = resolve(&pw.space, list)?;
            let names: Vec<&str> = members.iter().map(|&i| pw.space.point_name(i)).collect();
            let label = format!("TC_{n},{}({{{}}})", x.name(), names.join(","));
            if args.oracle {
                return report(&label, &pw.projections, Some(&members), false, true);
            }
            Ok(finish(&label, &rel_tc(&x, n, &members, &budget)?, args.witness))
        }
        Which::Pairtc => {
            let x = one_space(args)?;
            let list = args.subspace.as_deref().ok_or_else(|| Failure::Usage("--subspace is required".into()))?;
            let b = resolve(&x, list)?;
            let names: Vec<&str> = b.iter().map(|&i| x.point_name(i)).collect();
            let label = format!("TC_{n}({},{{{}}})", x.name(), names.join(","));
            if args.oracle && n > 1 {
                connected(&x)?;
                let pw = power_with_projections(&x, n, &budget)?;
                return report(&label, &pw.projections, Some(&pair_points(&x, &b, n)), false, true);
            }
            Ok(finish(&label, &pair_tc(&x, &b, n, &budget)?, args.witness))
        }
        Which::Maptc => {
            let (id, q) = load_fibration(args)?;
            let label = format!("TC_{n}({id})");
            if args.oracle {
                connected(q.source())?;
                connected(q.target())?;
                surjective(&q)?;
                let pw = power_with_projections(q.source(), n, &budget)?;
                let maps: Vec<CMap> = pw.projections.iter().map(|p| p.then(&q)).collect::<Result<_, _>>()?;
                return report(&label, &maps, None, false, true);
            }
            Ok(finish(&label, &map_tc(&q, n, &budget)?, args.witness))
        }
        Which::Paramtc => {
            let (id, q) = load_fibration(args)?;
            let label = format!("TC_{n}[{id}]");
            let mut out = if args.oracle {
                surjective(&q)?;
                let fp = fibered_power(&q, n, &budget)?;
                report(&label, &fp.projections, None, false, true)?
            } else {
                let r = param_tc(&q, n, &budget)?;
                finish(&label, &r.result, args.witness)
            };
            let connected = homdist::invariants::fibers_path_connected(&q);
            let _ = writeln!(out, "fibers-path-connected({id}) = {connected}");
            let _ = writeln!(out, "fibration-verified({id}) = false");
            Ok(out)
        }
    }
}

fn connected(x: &FiniteSpace) -> Result<(), Failure> {
    if path_components(x).len() == 1 {
        Ok(())
    } else {
        Err(InvariantError::NotPathConnected(x.name().to_string()).into())
    }
}

fn surjective(q: &CMap) -> Result<(), Failure> {
    if q.is_surjective() {
        Ok(())
    } else {
        Err(InvariantError::NotSurjective(q.target().name().to_string()).into())
    }
}

fn finish(label: &str, d: &DistanceResult, witness: bool) -> String {
    let mut out = format!("{label} = {}\n", d.value);
    if witness {
        witness_lines(&mut out, d);
    }
    out
}

fn run_ledger(scenario: &Path, params: &[String], exclude: &[String]) -> Outcome {
    let mut overrides = BTreeMap::new();
    for p in params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("expected --param name=value, got `{p}`")))?;
        let v: i64 = v.trim().parse().map_err(|_| Failure::Usage(format!("parameter `{k}` is not an integer")))?;
        overrides.insert(k.trim().to_string(), v);
    }
    let rules: Vec<&str> = exclude.iter().map(String::as_str).collect();
    let options = Options::excluding(&rules)?;
    Ok(ledger::run(&read(scenario)?, &overrides, &options)?)
}

fn run(cli: &Cli) -> Outcome {
    match &cli.verb {
        Verb::Space { file, core } => run_space(file, *core),
        Verb::Dist(args) => run_dist(args),
        Verb::Invariant { which, args } => run_invariant(*which, args),
        Verb::Ledger { action: LedgerAction::Run { scenario, params, exclude } } => {
            run_ledger(scenario, params, exclude)
        }
        Verb::Conformance { suite, seed, count, max_points, budget } => {
            if *max_points == 0 {
                return Err(Failure::Usage("--max-points must be at least 1".into()));
            }
            let suite = match suite {
                SuiteArg::Hard => Suite::Hard,
                SuiteArg::Report => Suite::Report,
            };
            let cfg = GenConfig {
                seed: *seed,
                max_points: *max_points,
                budget: Budget { max_points: *budget, max_arity: 3 },
                ..GenConfig::default()
            };
            let report = check_propositions(&cfg, suite, *count);
            print!("{}", report.render());
            if suite == Suite::Hard && report.failures() > 0 {
                Err(Failure::Conformance)
            } else {
                Ok(String::new())
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {}", msg.replace('\n', " "));
            ExitCode::from(2)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {}", msg.replace('\n', " "));
            ExitCode::from(1)
        }
        Err(Failure::Conformance) => {
            eprintln!("error: hard conformance suite has failures");
            ExitCode::from(3)
        }
    }
}
