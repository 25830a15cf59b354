//! Output formatting.
//!
//! Human output: costs and budgets in SNT with 3 decimals, losses with 6,
//! correlation statistics with 4, relation values with 3, relative
//! performance with 2. Machine output is JSON with shortest round-trip
//! numbers; sweeps are CSV in both modes; matrices are CSV with 4 decimals
//! (fixtures keep their printed digits).

use serde::Serialize;
use serde_json::json;
use taskgroup::analysis::{Correlation, CorrelationMode, GroupSizeRow, Relation, RowEffect};
use taskgroup::approx::{EsaOutcome, HoaOutcome};
use taskgroup::fixtures::Fixture;
use taskgroup::io::serialize_matrix;
use taskgroup::model::Solution;
use taskgroup::solver::{Budget, Method, RandomMeanReport, SolveError, SweepOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Human,
    Machine,
}

/// Milli-SNT as SNT with three decimals.
pub fn snt(msnt: u64) -> String {
    format!("{}.{:03}", msnt / 1000, msnt % 1000)
}

fn loss(v: f64) -> String {
    format!("{v:.6}")
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

/// Left-aligned columns separated by two spaces.
fn columns(rows: &[Vec<String>]) -> String {
    let width = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0; width];
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            if i + 1 == row.len() {
                line.push_str(cell);
            } else {
                line.push_str(&format!("{cell:<w$}  ", w = widths[i]));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn row(cells: &[&str]) -> Vec<String> {
    cells.iter().map(|c| c.to_string()).collect()
}

fn solution_lines(s: &Solution) -> String {
    let mut head = vec![
        row(&["networks", &s.network_ids.join(" ")]),
        row(&["cost", &format!("{} SNT", snt(s.cost_msnt))]),
        row(&["total loss", &loss(s.total_loss)]),
    ];
    if let Some(b) = s.budget_msnt {
        head.insert(0, row(&["budget", &format!("{} SNT", snt(b))]));
    }
    let mut tasks = vec![row(&["task", "network", "loss"])];
    for o in &s.per_task {
        tasks.push(vec![o.task.clone(), o.network.clone(), loss(o.loss)]);
    }
    format!("{}\n{}", columns(&head), columns(&tasks))
}

pub fn solution(method: Method, s: &Solution, format: Format) -> String {
    match format {
        Format::Machine => to_json(&json!({ "method": method, "solution": s })),
        Format::Human => format!("method      {method}\n{}", solution_lines(s)),
    }
}

pub fn random_report(r: &RandomMeanReport, format: Format) -> String {
    match format {
        Format::Machine => to_json(&json!({ "method": Method::RandomMean, "report": r })),
        Format::Human => columns(&[
            row(&["method", "random_mean"]),
            row(&["budget", &format!("{} SNT", snt(r.budget_msnt))]),
            row(&["trials", &r.trials.to_string()]),
            row(&["seed", &r.seed.to_string()]),
            row(&["mean loss", &loss(r.mean_loss)]),
            row(&["std dev", &loss(r.std_dev)]),
            row(&["rejected draws", &r.rejected.to_string()]),
            row(&["max cost", &format!("{} SNT", snt(r.max_cost_msnt))]),
        ]),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Tidy CSV, one row per (budget, method). Ids are `;`-separated; random
/// rows carry the mean loss, the largest sampled cost and no ids.
pub fn sweep_csv(rows: &[SweepOutcome]) -> String {
    let mut out = String::from("budget,method,total_loss,cost,ids,status\n");
    for r in rows {
        let line = match r {
            SweepOutcome::Point(p) => format!(
                "{},{},{},{},{},ok",
                snt(p.budget.msnt()),
                p.method,
                loss(p.solution.total_loss),
                snt(p.solution.cost_msnt),
                csv_field(&p.solution.network_ids.join(";")),
            ),
            SweepOutcome::Infeasible { budget, method, .. } => {
                format!("{},{method},,,,infeasible", snt(budget.msnt()))
            }
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn result_json(r: &Result<Solution, SolveError>) -> serde_json::Value {
    match r {
        Ok(s) => json!({ "solution": s }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

pub fn oracle(
    exact: &Result<Solution, SolveError>,
    oracle: &Result<Solution, SolveError>,
    agree: bool,
    format: Format,
) -> String {
    match format {
        Format::Machine => to_json(&json!({
            "certified": agree,
            "optimal": result_json(exact),
            "oracle": result_json(oracle),
        })),
        Format::Human => {
            let describe = |r: &Result<Solution, SolveError>| match r {
                Ok(s) => format!("{}  cost {} SNT  loss {}", s.network_ids.join(" "), snt(s.cost_msnt), loss(s.total_loss)),
                Err(e) => format!("error: {e}"),
            };
            columns(&[
                row(&["optimal", &describe(exact)]),
                row(&["oracle", &describe(oracle)]),
                row(&["certified", if agree { "yes" } else { "no" }]),
            ])
        }
    }
}

pub fn hoa(out: &HoaOutcome, format: Format) -> String {
    match format {
        Format::Machine => to_json(out),
        Format::Human => {
            let retrain = if out.retrain.is_empty() {
                "none".to_string()
            } else {
                out.retrain.join(" ")
            };
            let head = columns(&[
                row(&["candidates", &out.candidates.to_string()]),
                row(&["predicted", &out.predicted.to_string()]),
                row(&["retrain", &retrain]),
            ]);
            format!("{head}\n{}", solution_lines(&out.solution))
        }
    }
}

pub fn esa(out: &EsaOutcome, format: Format) -> String {
    match format {
        Format::Machine => to_json(out),
        Format::Human => {
            let line = |label: &str, s: &Solution| {
                vec![label.to_string(), s.network_ids.join(" "), snt(s.cost_msnt), loss(s.total_loss)]
            };
            columns(&[
                row(&["", "networks", "cost", "loss"]),
                line("proxy choice", &out.chosen),
                line("realized", &out.realized),
                line("final optimum", &out.final_optimal),
                row(&["gap", "", "", &loss(out.gap)]),
            ])
        }
    }
}

/// Human: a grid with `-` on the diagonal (directed) or upper triangle
/// (symmetric), 3 decimals. Machine: CSV with `precision` decimals, or the
/// shortest exact form when `None`.
pub fn matrix(relation: &Relation, format: Format, precision: Option<usize>) -> String {
    if format == Format::Machine {
        return String::from_utf8(serialize_matrix(relation, precision)).expect("UTF-8");
    }
    let ts = relation.task_set();
    let names: Vec<&str> = ts.iter().collect();
    let mut rows = vec![std::iter::once(String::new()).chain(names.iter().map(|s| s.to_string())).collect()];
    for (i, a) in names.iter().enumerate() {
        let mut r = vec![a.to_string()];
        for (j, b) in names.iter().enumerate() {
            let v = match relation {
                Relation::Directed(m) => m.get(a, b),
                Relation::Affinity(m) if j > i => m.get(a, b),
                Relation::Affinity(_) => None,
            };
            r.push(v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}")));
        }
        rows.push(r);
    }
    let note = match relation {
        Relation::Directed(_) => "rows: trained with; columns: performance on\n",
        Relation::Affinity(_) => "",
    };
    format!("{}\n{note}{}", relation.label(), columns(&rows))
}

fn mode_name(mode: CorrelationMode) -> &'static str {
    match mode {
        CorrelationMode::Directed => "directed",
        CorrelationMode::Symmetric => "symmetric",
    }
}

pub fn correlation(a: &str, b: &str, mode: CorrelationMode, c: &Correlation, format: Format) -> String {
    match format {
        Format::Machine => to_json(&json!({
            "a": a,
            "b": b,
            "mode": mode_name(mode),
            "r": c.r,
            "p": c.p,
            "n": c.n,
        })),
        Format::Human => columns(&[
            row(&["a", a]),
            row(&["b", b]),
            row(&["mode", mode_name(mode)]),
            row(&["n", &c.n.to_string()]),
            row(&["r", &format!("{:.4}", c.r)]),
            row(&["p", &format!("{:.4}", c.p)]),
        ]),
    }
}

pub fn baselines(
    budget: Budget,
    rows: &[(Method, Result<Solution, SolveError>)],
    random: &Result<RandomMeanReport, SolveError>,
    format: Format,
) -> String {
    match format {
        Format::Machine => {
            let mut methods = serde_json::Map::new();
            for (m, r) in rows {
                methods.insert(m.to_string(), result_json(r));
            }
            methods.insert(
                Method::RandomMean.to_string(),
                match random {
                    Ok(r) => json!({ "report": r }),
                    Err(e) => json!({ "error": e.to_string() }),
                },
            );
            to_json(&json!({ "budget_msnt": budget.msnt(), "methods": methods }))
        }
        Format::Human => {
            let mut table = vec![row(&["method", "total_loss", "cost", "networks"])];
            for (m, r) in rows {
                table.push(match r {
                    Ok(s) => vec![m.to_string(), loss(s.total_loss), snt(s.cost_msnt), s.network_ids.join(" ")],
                    Err(e) => vec![m.to_string(), "-".into(), "-".into(), e.to_string()],
                });
            }
            table.push(match random {
                Ok(r) => vec![
                    Method::RandomMean.to_string(),
                    loss(r.mean_loss),
                    snt(r.max_cost_msnt),
                    format!("{} trials, std dev {}", r.trials, loss(r.std_dev)),
                ],
                Err(e) => vec![Method::RandomMean.to_string(), "-".into(), "-".into(), e.to_string()],
            });
            format!("budget {} SNT\n{}", snt(budget.msnt()), columns(&table))
        }
    }
}

pub fn fixture_list(format: Format) -> String {
    match format {
        Format::Machine => {
            let list: Vec<_> = Fixture::ALL
                .iter()
                .map(|f| json!({ "name": f.name(), "description": f.description(), "tasks": f.tasks() }))
                .collect();
            to_json(&list)
        }
        Format::Human => {
            let rows: Vec<Vec<String>> = Fixture::ALL
                .iter()
                .map(|f| vec![f.name().to_string(), f.description().to_string()])
                .collect();
            columns(&rows)
        }
    }
}

pub fn group_sizes(rows: &[GroupSizeRow], format: Format) -> String {
    match format {
        Format::Machine => to_json(&rows),
        Format::Human => {
            let pct = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:+.2}%"));
            let mut table = vec![row(&["size", "networks", "vs full singles", "vs split singles"])];
            for r in rows {
                table.push(vec![
                    r.size.to_string(),
                    r.networks.to_string(),
                    pct(r.vs_full_singles),
                    pct(r.vs_split_singles),
                ]);
            }
            columns(&table)
        }
    }
}

pub fn row_effects(effects: &[RowEffect], format: Format) -> String {
    match format {
        Format::Machine => to_json(&effects),
        Format::Human => {
            let mut table = vec![row(&["task", "row mean (helps others)", "column mean (helped)"])];
            for e in effects {
                table.push(vec![e.task.clone(), format!("{:+.2}", e.as_helper), format!("{:+.2}", e.as_helped)]);
            }
            columns(&table)
        }
    }
}
