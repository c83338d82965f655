//! Plain-text graph and assignment files.
//!
//! Edge list: a header line `n_nodes n_edges`, then one `i j` pair per line
//! (0-based, row-major order when written by this crate).
//!
//! Assignment: one 0-based label per line.

use std::io::{BufRead, Write};

use super::{Assignment, Digraph};
use crate::{Error, Result};

pub fn write_edge_list<W: Write>(graph: &Digraph, mut out: W) -> Result<()> {
    writeln!(out, "{} {}", graph.n_nodes(), graph.n_edges())?;
    for (i, j) in graph.edges() {
        writeln!(out, "{i} {j}")?;
    }
    Ok(())
}

pub fn read_edge_list<R: BufRead>(input: R) -> Result<Digraph> {
    let mut lines = numbered_lines(input);
    let (line_no, header) = lines.next().transpose()?.ok_or(Error::Parse {
        line: 1,
        message: "missing header `n_nodes n_edges`".into(),
    })?;
    let [n, m] = parse_pair(&header, line_no)?;
    let mut edges = Vec::with_capacity(m);
    let mut seen = std::collections::HashSet::with_capacity(m);
    for item in lines {
        let (line_no, line) = item?;
        let [i, j] = parse_pair(&line, line_no)?;
        if i >= n || j >= n {
            return Err(Error::Parse {
                line: line_no,
                message: format!("node index out of range for {n} nodes"),
            });
        }
        if !seen.insert((i, j)) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate edge ({i}, {j})"),
            });
        }
        edges.push((i, j));
    }
    if edges.len() != m {
        return Err(Error::Parse {
            line: 1,
            message: format!("header announces {m} edges, found {}", edges.len()),
        });
    }
    Digraph::from_edges(n, edges)
}

pub fn write_assignment<W: Write>(assignment: &Assignment, mut out: W) -> Result<()> {
    for l in assignment.labels() {
        writeln!(out, "{l}")?;
    }
    Ok(())
}

/// Reads labels; the role count is `roles` if given, else `max label + 1`.
pub fn read_assignment<R: BufRead>(input: R, roles: Option<usize>) -> Result<Assignment> {
    let mut labels = Vec::new();
    for item in numbered_lines(input) {
        let (line_no, line) = item?;
        let label = line.trim().parse::<usize>().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad label `{}`: {e}", line.trim()),
        })?;
        labels.push(label);
    }
    let roles = roles.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    Assignment::new(labels, roles)
}

/// Non-blank lines with their 1-based line numbers.
fn numbered_lines<R: BufRead>(input: R) -> impl Iterator<Item = Result<(usize, String)>> {
    input
        .lines()
        .enumerate()
        .filter_map(|(k, line)| match line {
            Ok(l) if l.trim().is_empty() => None,
            Ok(l) => Some(Ok((k + 1, l))),
            Err(e) => Some(Err(Error::Io(e))),
        })
}

fn parse_pair(line: &str, line_no: usize) -> Result<[usize; 2]> {
    let mut fields = line.split_whitespace();
    let mut next = || -> Result<usize> {
        let tok = fields.next().ok_or_else(|| Error::Parse {
            line: line_no,
            message: "expected two integers".into(),
        })?;
        tok.parse().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad integer `{tok}`: {e}"),
        })
    };
    let pair = [next()?, next()?];
    if fields.next().is_some() {
        return Err(Error::Parse {
            line: line_no,
            message: "trailing fields".into(),
        });
    }
    Ok(pair)
}
