//! `taskgroup`: budgeted network selection, baselines, approximations and
//! task-relationship statistics from the command line.
//!
//! Exit codes: 0 success, 1 no feasible answer within the budget, 2 usage or
//! validation error, 3 the exact solver and the exhaustive oracle disagree.

mod render;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use taskgroup::analysis::{
    correlate, group_size_report, row_effect_summary, symmetrize, CorrelationMode, Relation,
};
use taskgroup::approx::{esa_pipeline, hoa_extend, hoa_pipeline, ApproxError};
use taskgroup::fixtures::{Fixture, TASK_SET_1};
use taskgroup::io::{parse_matrix, parse_snt, parse_table, serialize_table};
use taskgroup::model::{PerformanceTable, TaskSet};
use taskgroup::solver::{
    solve_all_in_one, solve_independent, solve_optimal, solve_oracle, solve_pessimal, solve_random_mean, sweep,
    Budget, Method, SolveError, SweepConfig,
};
use taskgroup::synth::{letter_tasks, random_table, template_table};

use render::Format;

#[derive(Parser)]
#[command(name = "taskgroup", version, about = "Budgeted task grouping: pick which tasks share a network")]
struct Cli {
    /// Output style: aligned text or JSON/CSV for scripts.
    #[arg(long, value_enum, default_value_t = FormatArg::Human, global = true)]
    format: FormatArg,
    /// Seed for every randomised step.
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Worker threads (default: one per core).
    #[arg(long, env = "TASKGROUP_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Human,
    Machine,
}

#[derive(Subcommand)]
enum Command {
    /// Best networks for one budget.
    Solve(SolveArgs),
    /// Loss/cost curve over a budget range, as CSV.
    Sweep(SweepArgs),
    /// Check the exact solver against exhaustive search.
    Oracle(BudgetArgs),
    /// Higher-order approximation from pair networks.
    #[command(subcommand)]
    Hoa(HoaCommand),
    /// Select on a proxy table, score on the final table.
    Esa(EsaArgs),
    /// Symmetrize a directed relation matrix.
    Affinity(AffinityArgs),
    /// Pearson correlation between two relation matrices.
    Corr(CorrArgs),
    /// Optimal, pessimal, random and simple baselines at one budget.
    Baselines(BaselineArgs),
    /// List embedded tables, or print one as CSV.
    Fixtures(FixturesArgs),
    /// Per-size comparison of multi-task networks with single-task ones, or
    /// row/column means of a directed matrix.
    Report(ReportArgs),
    /// Write a seeded synthetic performance table.
    Synth(SynthArgs),
}

#[derive(Args)]
struct BudgetArgs {
    /// Performance table (JSON).
    table: PathBuf,
    /// Budget in SNT, e.g. 2.5.
    #[arg(long)]
    budget: String,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: BudgetArgs,
    /// optimal, pessimal, random, all_in_one or independent.
    #[arg(long, default_value = "optimal")]
    method: String,
    /// Draws for the random baseline.
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
}

#[derive(Args)]
struct SweepArgs {
    /// Performance table (JSON).
    table: PathBuf,
    /// First budget in SNT.
    #[arg(long)]
    from: String,
    /// Last budget in SNT, inclusive.
    #[arg(long)]
    to: String,
    /// Budget increment in SNT.
    #[arg(long)]
    step: String,
    /// Comma-separated methods.
    #[arg(long, default_value = "optimal,random,pessimal")]
    methods: String,
    /// Draws for the random baseline at each budget.
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
}

#[derive(Subcommand)]
enum HoaCommand {
    /// Add predicted higher-order networks; writes a table file.
    Predict {
        /// Table with singles and pair networks.
        table: PathBuf,
        /// Output path (default: standard output).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Predict, select, and list the networks to train.
    Pipeline(BudgetArgs),
}

#[derive(Args)]
struct EsaArgs {
    /// Table measured after shortened training.
    #[arg(long)]
    proxy: PathBuf,
    /// Table measured after full training.
    #[arg(long = "final")]
    fin: PathBuf,
    #[arg(long)]
    budget: String,
}

#[derive(Args)]
struct AffinityArgs {
    /// Directed matrix: a CSV path or `fixtures:NAME`.
    matrix: String,
}

#[derive(Args)]
struct CorrArgs {
    /// CSV path or `fixtures:NAME`.
    a: String,
    /// CSV path or `fixtures:NAME`.
    b: String,
    /// Correlate the 10 symmetrized pair values.
    #[arg(long, conflicts_with = "directed")]
    symmetric: bool,
    /// Correlate all ordered pairs (both inputs directed).
    #[arg(long)]
    directed: bool,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    common: BudgetArgs,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
}

#[derive(Args)]
struct FixturesArgs {
    /// Fixture to print; omit to list them.
    name: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Performance table (JSON), or a directed matrix as CSV or `fixtures:NAME`.
    input: String,
    /// Cost of a full-size network in SNT (table input only).
    #[arg(long, default_value = "1")]
    full_cost: String,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of tasks, named a, b, c, ...
    #[arg(long, default_value_t = 5, conflicts_with = "names")]
    tasks: usize,
    /// Comma-separated task names instead of letters.
    #[arg(long)]
    names: Option<String>,
    /// Use the five names of the first embedded task set.
    #[arg(long, conflicts_with_all = ["names", "tasks"])]
    fixture_tasks: bool,
    /// Cost of a full-size network in SNT.
    #[arg(long, default_value = "1")]
    full_cost: String,
    /// Cost of a half-size single-task network in SNT.
    #[arg(long, default_value = "0.5")]
    half_cost: String,
    /// Instead of all templates, this many random networks with losses
    /// uniform on (0, 1) and the two costs above.
    #[arg(long)]
    random: Option<usize>,
    /// Output path (default: standard output).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
enum Failure {
    Infeasible(anyhow::Error),
    Invalid(anyhow::Error),
    Uncertified(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let infeasible = |s: &SolveError| {
            matches!(
                s,
                SolveError::BudgetInfeasible { .. } | SolveError::NoFeasiblePartition { .. } | SolveError::NoAllInOneNetwork
            )
        };
        let hit = e.chain().any(|c| {
            c.downcast_ref::<SolveError>().is_some_and(infeasible)
                || matches!(c.downcast_ref::<ApproxError>(), Some(ApproxError::Solve(s)) if infeasible(s))
        });
        if hit {
            Failure::Infeasible(e)
        } else {
            Failure::Invalid(e)
        }
    }
}

type Outcome = std::result::Result<String, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let format = match cli.format {
        FormatArg::Human => Format::Human,
        FormatArg::Machine => Format::Machine,
    };
    match run(cli.command, format, cli.seed) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(Failure::Infeasible(e)) => {
            eprintln!("infeasible: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Uncertified(report)) => {
            print!("{report}");
            eprintln!("error: exact solver and exhaustive search disagree");
            ExitCode::from(3)
        }
    }
}

fn run(command: Command, format: Format, seed: u64) -> Outcome {
    match command {
        Command::Solve(a) => cmd_solve(a, format, seed),
        Command::Sweep(a) => cmd_sweep(a, seed),
        Command::Oracle(a) => cmd_oracle(a, format),
        Command::Hoa(HoaCommand::Predict { table, output }) => cmd_hoa_predict(&table, output.as_deref()),
        Command::Hoa(HoaCommand::Pipeline(a)) => cmd_hoa_pipeline(a, format),
        Command::Esa(a) => cmd_esa(a, format),
        Command::Affinity(a) => cmd_affinity(a, format),
        Command::Corr(a) => cmd_corr(a, format),
        Command::Baselines(a) => cmd_baselines(a, format, seed),
        Command::Fixtures(a) => cmd_fixtures(a, format),
        Command::Report(a) => cmd_report(a, format),
        Command::Synth(a) => cmd_synth(a, seed),
    }
}

fn read_table(path: &Path) -> Result<PerformanceTable> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_table(&bytes).with_context(|| format!("loading table {}", path.display()))
}

/// `fixtures:NAME` or a CSV path.
fn read_relation(source: &str) -> Result<Relation> {
    if let Some(name) = source.strip_prefix("fixtures:") {
        return name.parse::<Fixture>().map(Fixture::load).map_err(|e| anyhow!(e));
    }
    let bytes = fs::read(source).with_context(|| format!("reading {source}"))?;
    parse_matrix(&bytes, source).with_context(|| format!("loading matrix {source}"))
}

fn budget(text: &str) -> Result<Budget> {
    Ok(Budget::from_msnt(parse_snt(text)?)?)
}

fn write_or_return(bytes: Vec<u8>, output: Option<&Path>) -> Outcome {
    match output {
        Some(path) => {
            fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
            Ok(String::new())
        }
        None => Ok(String::from_utf8(bytes).expect("serialised tables are UTF-8")),
    }
}

fn cmd_solve(a: SolveArgs, format: Format, seed: u64) -> Outcome {
    let table = read_table(&a.common.table)?;
    let b = budget(&a.common.budget)?;
    let method: Method = a.method.parse().map_err(anyhow::Error::from)?;
    if method == Method::RandomMean {
        let r = solve_random_mean(&table, b, a.trials, seed).map_err(anyhow::Error::from)?;
        return Ok(render::random_report(&r, format));
    }
    let s = match method {
        Method::Optimal => solve_optimal(&table, b),
        Method::Pessimal => solve_pessimal(&table, b),
        Method::AllInOne => solve_all_in_one(&table, b),
        Method::Independent => solve_independent(&table, b),
        Method::RandomMean => unreachable!("handled above"),
    }
    .map_err(anyhow::Error::from)?;
    Ok(render::solution(method, &s, format))
}

fn cmd_sweep(a: SweepArgs, seed: u64) -> Outcome {
    let table = read_table(&a.table)?;
    let methods = a
        .methods
        .split(',')
        .map(str::parse::<Method>)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(anyhow::Error::from)?;
    let config = SweepConfig {
        from_msnt: parse_snt(&a.from).map_err(anyhow::Error::from)?,
        to_msnt: parse_snt(&a.to).map_err(anyhow::Error::from)?,
        step_msnt: parse_snt(&a.step).map_err(anyhow::Error::from)?,
        methods,
        trials: a.trials,
        seed,
    };
    let rows = sweep(&table, &config).map_err(|e| Failure::Invalid(e.into()))?;
    Ok(render::sweep_csv(&rows))
}

fn cmd_oracle(a: BudgetArgs, format: Format) -> Outcome {
    let table = read_table(&a.table)?;
    let b = budget(&a.budget)?;
    let exact = solve_optimal(&table, b);
    let oracle = solve_oracle(&table, b);
    let agree = exact == oracle;
    if let (Err(SolveError::TooManyCandidates { .. }), _) | (_, Err(SolveError::TooManyCandidates { .. })) =
        (&exact, &oracle)
    {
        return Err(Failure::Invalid(oracle.unwrap_err().into()));
    }
    let text = render::oracle(&exact, &oracle, agree, format);
    match (&exact, agree) {
        (_, false) => Err(Failure::Uncertified(text)),
        (Err(e), true) => Err(Failure::from(anyhow::Error::from(e.clone()))),
        (Ok(_), true) => Ok(text),
    }
}

fn cmd_hoa_predict(table: &Path, output: Option<&Path>) -> Outcome {
    let base = read_table(table)?;
    let extended = hoa_extend(&base).map_err(anyhow::Error::from)?;
    let combined = extended.combined().map_err(anyhow::Error::from)?;
    write_or_return(serialize_table(&combined), output)
}

fn cmd_hoa_pipeline(a: BudgetArgs, format: Format) -> Outcome {
    let base = read_table(&a.table)?;
    let b = budget(&a.budget)?;
    let out = hoa_pipeline(&base, b).map_err(anyhow::Error::from)?;
    Ok(render::hoa(&out, format))
}

fn cmd_esa(a: EsaArgs, format: Format) -> Outcome {
    let proxy = read_table(&a.proxy)?;
    let fin = read_table(&a.fin)?;
    let b = budget(&a.budget)?;
    let out = esa_pipeline(&proxy, &fin, b).map_err(anyhow::Error::from)?;
    Ok(render::esa(&out, format))
}

fn cmd_affinity(a: AffinityArgs, format: Format) -> Outcome {
    let Relation::Directed(m) = read_relation(&a.matrix)? else {
        return Err(invalid(format!("{} is already symmetric", a.matrix)));
    };
    let sym = symmetrize(&m).map_err(anyhow::Error::from)?;
    Ok(render::matrix(&Relation::Affinity(sym), format, Some(4)))
}

fn cmd_corr(a: CorrArgs, format: Format) -> Outcome {
    let (x, y) = (read_relation(&a.a)?, read_relation(&a.b)?);
    let both_directed = matches!((&x, &y), (Relation::Directed(_), Relation::Directed(_)));
    let mode = if a.symmetric {
        CorrelationMode::Symmetric
    } else if a.directed || both_directed {
        CorrelationMode::Directed
    } else {
        CorrelationMode::Symmetric
    };
    let c = correlate(&x, &y, mode).map_err(anyhow::Error::from)?;
    Ok(render::correlation(&a.a, &a.b, mode, &c, format))
}

fn cmd_baselines(a: BaselineArgs, format: Format, seed: u64) -> Outcome {
    let table = read_table(&a.common.table)?;
    let b = budget(&a.common.budget)?;
    let optimal = solve_optimal(&table, b).map_err(anyhow::Error::from)?;
    let rows = vec![
        (Method::Optimal, Ok(optimal)),
        (Method::Pessimal, solve_pessimal(&table, b)),
        (Method::AllInOne, solve_all_in_one(&table, b)),
        (Method::Independent, solve_independent(&table, b)),
    ];
    let random = solve_random_mean(&table, b, a.trials, seed);
    Ok(render::baselines(b, &rows, &random, format))
}

fn cmd_fixtures(a: FixturesArgs, format: Format) -> Outcome {
    match a.name {
        None => Ok(render::fixture_list(format)),
        Some(name) => {
            let f: Fixture = name.parse().map_err(|e| anyhow!("{e}"))?;
            Ok(render::matrix(&f.load(), format, None))
        }
    }
}

fn cmd_report(a: ReportArgs, format: Format) -> Outcome {
    let relation = match a.input.strip_prefix("fixtures:") {
        Some(_) => read_relation(&a.input)?,
        None => {
            let bytes = fs::read(&a.input).with_context(|| format!("reading {}", a.input))?;
            if bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{') {
                let table = parse_table(&bytes).with_context(|| format!("loading table {}", a.input))?;
                let full = parse_snt(&a.full_cost).map_err(anyhow::Error::from)?;
                let rows = group_size_report(&table, full).map_err(anyhow::Error::from)?;
                if rows.is_empty() {
                    return Err(invalid(format!("no networks cost {} SNT", render::snt(full))));
                }
                return Ok(render::group_sizes(&rows, format));
            }
            parse_matrix(&bytes, &a.input).with_context(|| format!("loading matrix {}", a.input))?
        }
    };
    let Relation::Directed(m) = relation else {
        return Err(invalid("row and column means need a directed matrix".into()));
    };
    let effects = row_effect_summary(&m).map_err(anyhow::Error::from)?;
    Ok(render::row_effects(&effects, format))
}

fn cmd_synth(a: SynthArgs, seed: u64) -> Outcome {
    let tasks = if a.fixture_tasks {
        TaskSet::new(TASK_SET_1).map_err(anyhow::Error::from)?
    } else if let Some(names) = &a.names {
        TaskSet::new(names.split(',').map(str::trim)).map_err(anyhow::Error::from)?
    } else {
        if !(1..=26).contains(&a.tasks) {
            return Err(invalid(format!("--tasks must be in 1..=26, got {}", a.tasks)));
        }
        letter_tasks(a.tasks)
    };
    let full = parse_snt(&a.full_cost).map_err(anyhow::Error::from)?;
    let half = parse_snt(&a.half_cost).map_err(anyhow::Error::from)?;
    if full == 0 || half == 0 {
        return Err(invalid("costs must be positive".into()));
    }
    let table = match a.random {
        Some(0) => return Err(invalid("--random needs at least one network".into())),
        Some(m) => random_table(&tasks, m, &[half, full], seed),
        None => {
            if tasks.len() > 12 {
                return Err(invalid(format!("{} tasks give too many templates; use --random", tasks.len())));
            }
            template_table(&tasks, full, half, seed)
        }
    };
    write_or_return(serialize_table(&table), a.output.as_deref())
}

fn invalid(msg: String) -> Failure {
    Failure::Invalid(anyhow!(msg))
}
