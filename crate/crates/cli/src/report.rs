//! Plain-text summary tables.
//!
//! Markers follow the usual footnote conventions: † iteration limit reached,
//! ‡ preconditioner application broke down, ∗ memory cap hit (LSQR) or outer
//! tolerance not reached (LSQR-IR).

use std::fmt::Write;

use crate::plan::{JobKind, Outcome, Plan, Problem};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Layout {
    /// One row per problem and preconditioner; iteration counts per
    /// tolerance and factorization precision.
    Iterations,
    /// One row per problem and precision; iterations and ratio_PT per criterion.
    Criteria,
    /// One row per LSQR-IR run.
    Refinement,
}

pub fn render(layout: Layout, plan: &Plan, problems: &[Problem], outcomes: &[Outcome]) -> String {
    match layout {
        Layout::Iterations => iterations(plan, problems, outcomes),
        Layout::Criteria => criteria(plan, problems, outcomes),
        Layout::Refinement => refinement(plan, problems, outcomes),
    }
}

fn sci(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.3e}"))
}

/// Insert `key` unless present; returns its position.
fn position<T: PartialEq>(keys: &mut Vec<T>, key: T) -> usize {
    keys.iter().position(|k| *k == key).unwrap_or_else(|| {
        keys.push(key);
        keys.len() - 1
    })
}

fn iterations(plan: &Plan, problems: &[Problem], outcomes: &[Outcome]) -> String {
    let mut rows: Vec<(usize, String)> = Vec::new();
    let mut cols: Vec<(String, String)> = Vec::new();
    let mut cells: Vec<(usize, usize, String)> = Vec::new();
    let mut nnz: Vec<Option<usize>> = Vec::new();
    for (job, outcome) in plan.jobs.iter().zip(outcomes) {
        let JobKind::Lsqr(setup) = &job.kind else {
            continue;
        };
        let r = position(&mut rows, (job.problem, job.precond().to_string()));
        let c = position(
            &mut cols,
            (format!("{:e}", setup.lsqr.delta), setup.fact.to_string()),
        );
        nnz.resize(rows.len(), None);
        let cell = match outcome {
            Ok(run) => {
                nnz[r].get_or_insert(run.record.nnz_l);
                format!("{}{}", run.record.iterations, run.marker)
            }
            Err(_) => "err".into(),
        };
        cells.push((r, c, cell));
    }
    let mut header = vec![
        "Identifier".to_string(),
        "preconditioner".into(),
        "nz(L)".into(),
    ];
    header.extend(cols.iter().map(|(d, f)| format!("{f} d={d}")));
    let mut body = vec![vec![String::new(); header.len()]; rows.len()];
    for (r, (p, pre)) in rows.iter().enumerate() {
        body[r][0] = problems[*p].name.clone();
        body[r][1] = pre.clone();
        body[r][2] = nnz[r].map_or_else(|| "-".into(), |n| n.to_string());
    }
    for (r, c, cell) in cells {
        body[r][3 + c] = cell;
    }
    table(&header, &body, 2)
}

fn criteria(plan: &Plan, problems: &[Problem], outcomes: &[Outcome]) -> String {
    let mut rows: Vec<(usize, String)> = Vec::new();
    let mut cols: Vec<String> = Vec::new();
    let mut cells = Vec::new();
    for (job, outcome) in plan.jobs.iter().zip(outcomes) {
        let JobKind::Lsqr(setup) = &job.kind else {
            continue;
        };
        let r = position(&mut rows, (job.problem, setup.fact.to_string()));
        let c = position(&mut cols, setup.lsqr.criterion.to_string());
        let cell = match outcome {
            Ok(run) => (
                format!("{}{}", run.record.iterations, run.marker),
                sci(run.record.ratio_pt),
            ),
            Err(_) => ("err".into(), "-".into()),
        };
        cells.push((r, c, cell));
    }
    let mut header = vec!["Identifier".to_string(), "fact".into()];
    for c in &cols {
        header.push(format!("{c} iters"));
        header.push(format!("{c} ratio_PT"));
    }
    let mut body = vec![vec![String::new(); header.len()]; rows.len()];
    for (r, (p, fact)) in rows.iter().enumerate() {
        body[r][0] = problems[*p].name.clone();
        body[r][1] = fact.clone();
    }
    for (r, c, (iters, pt)) in cells {
        body[r][2 + 2 * c] = iters;
        body[r][3 + 2 * c] = pt;
    }
    table(&header, &body, 2)
}

fn refinement(plan: &Plan, problems: &[Problem], outcomes: &[Outcome]) -> String {
    let header: Vec<String> = [
        "Identifier",
        "preconditioner",
        "fact",
        "nz(L)",
        "nout",
        "nsol",
        "ratio_GS",
        "termination",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let body = plan
        .jobs
        .iter()
        .zip(outcomes)
        .map(|(job, outcome)| {
            let JobKind::Refine(cfg, _) = &job.kind else {
                unreachable!("refinement table with an LSQR job")
            };
            let mut row = vec![
                problems[job.problem].name.clone(),
                job.precond().to_string(),
                cfg.fact.to_string(),
            ];
            match outcome {
                Ok(run) => {
                    let r = &run.record;
                    let opt = |v: Option<usize>| v.map_or_else(|| "-".into(), |n| n.to_string());
                    row.extend([
                        r.nnz_l.to_string(),
                        opt(r.nout),
                        opt(r.nsol),
                        format!("{}{}", sci(r.ratio_gs), run.marker),
                        r.termination.clone(),
                    ]);
                }
                Err(_) => row.extend(["-", "-", "-", "-", "error"].map(String::from)),
            }
            row
        })
        .collect::<Vec<_>>();
    table(&header, &body, 3)
}

/// Left-align the first `left` columns, right-align the rest.
fn table(header: &[String], body: &[Vec<String>], left: usize) -> String {
    let width = |s: &str| s.chars().count();
    let mut w: Vec<usize> = header.iter().map(|h| width(h)).collect();
    for row in body {
        for (k, cell) in row.iter().enumerate() {
            w[k] = w[k].max(width(cell));
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let pad = " ".repeat(w[k] - width(c));
                if k < left {
                    format!("{c}{pad}")
                } else {
                    format!("{pad}{c}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(header);
    let rule: Vec<String> = w.iter().map(|&n| "-".repeat(n)).collect();
    line(&rule);
    for row in body {
        line(row);
    }
    out
}
