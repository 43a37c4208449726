//! LP-format text interchange for models, so any external MILP solver can
//! be driven through files without linking.
//!
//! The writer emits standard LP-format text. Comment lines carry the
//! structural hints (`\ hint ...`) that let the bundled solver binary
//! rebuild the instance; external solvers ignore them.

use std::sync::Arc as Rc;

use crate::error::{Error, Result};
use crate::model::{Assignment, Cmp, IlpModel, Row, RowTag, StructuralHints, VarId, VarKind};
use crate::network::Topology;

/// Formats a coefficient so it round-trips, using exponent notation outside
/// a comfortable magnitude window.
fn fmt_coeff(v: f64) -> String {
    let a = v.abs();
    if v == v.trunc() && a < 1e15 {
        format!("{}", v as i64)
    } else if (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn push_terms(out: &mut String, terms: &[(VarId, f64)], model: &IlpModel, first: &mut bool) {
    let topo = &model.hints.topology;
    for (v, c) in terms {
        if *c == 0.0 {
            continue;
        }
        let name = model.var_kind(*v).name(topo);
        let mag = fmt_coeff(c.abs());
        if *first {
            let sign = if *c < 0.0 { "- " } else { "" };
            out.push_str(&format!(" {sign}{mag} {name}"));
            *first = false;
        } else {
            let sign = if *c < 0.0 { '-' } else { '+' };
            out.push_str(&format!(" {sign} {mag} {name}"));
        }
        if out.len() - out.rfind('\n').map_or(0, |i| i + 1) > 220 {
            out.push('\n');
        }
    }
}

/// Serializes a model to LP text, expanding shared expressions into each
/// referencing row.
pub fn write_lp(model: &IlpModel) -> String {
    let topo = &model.hints.topology;
    let mut out = String::new();
    out.push_str("\\ ILP admission model\n");
    out.push_str(&format!("\\ hint n_slots {}\n", model.hints.n_slots));
    out.push_str(&format!(
        "\\ hint source {}\n",
        topo.label(model.hints.source)
    ));
    out.push_str(&format!("\\ hint dest {}\n", topo.label(model.hints.dest)));
    let demands: Vec<String> = model
        .hints
        .demand_slots
        .iter()
        .map(|d| d.to_string())
        .collect();
    out.push_str(&format!("\\ hint demand_slots {}\n", demands.join(" ")));
    out.push_str(&format!("\\ hint pli {}\n", u8::from(model.hints.pli)));
    if let Some(reach) = &model.hints.reach_km {
        let vals: Vec<String> = reach.iter().map(|d| fmt_coeff(*d)).collect();
        out.push_str(&format!("\\ hint reach {}\n", vals.join(" ")));
    }
    for (i, fiber) in topo.arcs().iter().enumerate() {
        // one hint per undirected pair, in arc order
        if i % 2 == 0 {
            out.push_str(&format!(
                "\\ hint edge {} {} {}\n",
                topo.label(fiber.from),
                topo.label(fiber.to),
                fmt_coeff(fiber.distance_km)
            ));
        }
    }
    for node in 0..topo.num_nodes() {
        out.push_str(&format!(
            "\\ hint degree {} {}\n",
            topo.label(node),
            topo.degree_io(node)
        ));
    }
    if let Some(paths) = &model.hints.restricted_paths {
        for p in paths {
            let labels: Vec<String> = p.iter().map(|&n| topo.label(n).to_string()).collect();
            out.push_str(&format!("\\ hint path {}\n", labels.join(" ")));
        }
    }

    out.push_str("Minimize\n obj:");
    let mut first = true;
    let obj_terms: Vec<(VarId, f64)> = model
        .objective
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(i, c)| (VarId(i as u32), *c))
        .collect();
    push_terms(&mut out, &obj_terms, model, &mut first);
    if first {
        out.push_str(" 0 ");
        out.push_str(&model.var_kind(VarId(0)).name(topo));
    }
    out.push('\n');

    out.push_str("Subject To\n");
    for (i, row) in model.rows.iter().enumerate() {
        out.push_str(&format!(" c{i}:"));
        let mut first = true;
        if let Some(s) = row.shared {
            let mut merged: Vec<(VarId, f64)> = model.shared[s as usize].clone();
            merged.extend_from_slice(&row.terms);
            merged.sort_by_key(|(v, _)| *v);
            merged.dedup_by(|a, b| {
                if a.0 == b.0 {
                    b.1 += a.1;
                    true
                } else {
                    false
                }
            });
            push_terms(&mut out, &merged, model, &mut first);
        } else {
            push_terms(&mut out, &row.terms, model, &mut first);
        }
        if first {
            // empty left-hand side; keep the row syntactically valid
            out.push_str(&format!(" 0 {}", model.var_kind(VarId(0)).name(topo)));
        }
        out.push_str(&format!(" {} {}\n", row.cmp.symbol(), fmt_coeff(row.rhs)));
    }

    out.push_str("Binaries\n");
    let mut line_len = 0usize;
    for i in 0..model.num_vars() {
        let name = model.var_kind(VarId(i as u32)).name(topo);
        if line_len + name.len() + 1 > 220 {
            out.push('\n');
            line_len = 0;
        }
        out.push(' ');
        out.push_str(&name);
        line_len += name.len() + 1;
    }
    out.push_str("\nEnd\n");
    out
}

#[derive(Debug, Default)]
struct Hints {
    n_slots: Option<usize>,
    source: Option<u32>,
    dest: Option<u32>,
    demand_slots: Vec<usize>,
    pli: bool,
    reach: Option<Vec<f64>>,
    edges: Vec<(u32, u32, f64)>,
    degrees: Vec<(u32, u32)>,
    paths: Vec<Vec<u32>>,
}

fn parse_hint(rest: &str, hints: &mut Hints) -> Result<()> {
    let fields: Vec<&str> = rest.split_whitespace().collect();
    let bad = || Error::parse(format!("bad hint `{rest}`"));
    match fields.as_slice() {
        ["n_slots", n] => hints.n_slots = Some(n.parse().map_err(|_| bad())?),
        ["source", s] => hints.source = Some(s.parse().map_err(|_| bad())?),
        ["dest", d] => hints.dest = Some(d.parse().map_err(|_| bad())?),
        ["demand_slots", rest @ ..] => {
            hints.demand_slots = rest
                .iter()
                .map(|t| t.parse().map_err(|_| bad()))
                .collect::<Result<_>>()?;
        }
        ["pli", f] => hints.pli = *f == "1",
        ["reach", rest @ ..] => {
            hints.reach = Some(
                rest.iter()
                    .map(|t| t.parse().map_err(|_| bad()))
                    .collect::<Result<_>>()?,
            );
        }
        ["edge", u, v, d] => hints.edges.push((
            u.parse().map_err(|_| bad())?,
            v.parse().map_err(|_| bad())?,
            d.parse().map_err(|_| bad())?,
        )),
        ["degree", n, q] => hints
            .degrees
            .push((n.parse().map_err(|_| bad())?, q.parse().map_err(|_| bad())?)),
        ["path", rest @ ..] => {
            hints.paths.push(
                rest.iter()
                    .map(|t| t.parse().map_err(|_| bad()))
                    .collect::<Result<_>>()?,
            );
        }
        _ => {} // unknown hints are ignored
    }
    Ok(())
}

#[derive(Debug, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Rows,
    Bounds,
    Binaries,
    Done,
}

/// Parses LP text written by [`write_lp`] (or an equivalent subset of the
/// LP format) back into a model. Rows come back fully materialized.
pub fn parse_lp(text: &str) -> Result<IlpModel> {
    let mut hints = Hints::default();
    let mut section = Section::Preamble;
    let mut obj_tokens: Vec<String> = Vec::new();
    let mut row_tokens: Vec<String> = Vec::new();

    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('\\') {
            let rest = rest.trim();
            if let Some(h) = rest.strip_prefix("hint ") {
                parse_hint(h, &mut hints)?;
            }
            continue;
        }
        let lower = line.to_ascii_lowercase();
        match lower.as_str() {
            "minimize" | "min" => {
                section = Section::Objective;
                continue;
            }
            "maximize" | "max" => {
                return Err(Error::parse("only minimization models are supported"));
            }
            "subject to" | "st" | "s.t." | "such that" => {
                section = Section::Rows;
                continue;
            }
            "bounds" => {
                section = Section::Bounds;
                continue;
            }
            "binaries" | "binary" | "bin" | "general" | "generals" => {
                section = Section::Binaries;
                continue;
            }
            "end" => {
                section = Section::Done;
                continue;
            }
            _ => {}
        }
        match section {
            Section::Objective => obj_tokens.extend(tokenize(line)),
            Section::Rows => row_tokens.extend(tokenize(line)),
            // bounds and binaries carry no information for a pure binary model
            _ => {}
        }
    }

    let n_slots = hints
        .n_slots
        .ok_or_else(|| Error::parse("missing n_slots hint"))?;
    if hints.demand_slots.is_empty() {
        return Err(Error::parse("missing demand_slots hint"));
    }
    let topology = Rc::new(Topology::from_edges(&hints.edges, &hints.degrees)?);
    let source = topology.index_of(hints.source.ok_or_else(|| Error::parse("missing source"))?)?;
    let dest = topology.index_of(hints.dest.ok_or_else(|| Error::parse("missing dest"))?)?;
    let restricted_paths: Option<Vec<Vec<usize>>> = if hints.paths.is_empty() {
        None
    } else {
        Some(
            hints
                .paths
                .iter()
                .map(|p| {
                    p.iter()
                        .map(|l| topology.index_of(*l))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?,
        )
    };

    let structural = StructuralHints {
        topology: topology.clone(),
        source,
        dest,
        n_slots,
        demand_slots: hints.demand_slots.clone(),
        restricted_paths: restricted_paths.clone(),
        reach_km: hints.reach.clone(),
        pli: hints.pli,
    };
    let vars = crate::model::canonical_variables(
        &topology,
        n_slots,
        &hints.demand_slots,
        restricted_paths.as_ref().map_or(0, |p| p.len()),
    );
    let lookup: std::collections::HashMap<VarKind, VarId> = vars
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, VarId(i as u32)))
        .collect();
    let var_of = |name: &str| -> Result<VarId> {
        let kind = VarKind::parse(name, &topology)?;
        lookup.get(&kind).copied().ok_or_else(|| {
            Error::parse(format!("variable `{name}` does not fit the hinted layout"))
        })
    };

    let mut objective = vec![0.0f64; vars.len()];
    for (v, c) in parse_linear(&obj_tokens, &var_of)?.0 {
        objective[v.0 as usize] += c;
    }

    let mut rows = Vec::new();
    // split the row token stream on `name:` markers
    let mut current: Vec<String> = Vec::new();
    let mut chunks: Vec<Vec<String>> = Vec::new();
    for tok in row_tokens {
        if tok.ends_with(':') && !current.is_empty() {
            chunks.push(std::mem::take(&mut current));
        }
        current.push(tok);
    }
    if !current.is_empty() {
        chunks.push(current);
    }
    for chunk in &chunks {
        let (terms, cmp, rhs) = parse_row(chunk, &var_of)?;
        rows.push(Row {
            terms,
            shared: None,
            cmp,
            rhs,
            tag: RowTag::Parsed,
        });
    }

    Ok(IlpModel::from_parts(
        vars,
        lookup,
        objective,
        rows,
        Vec::new(),
        structural,
    ))
}

fn tokenize(line: &str) -> Vec<String> {
    // separate comparison operators from adjacent text
    let spaced = line
        .replace("<=", " @le@ ")
        .replace(">=", " @ge@ ")
        .replace("=<", " @le@ ")
        .replace("=>", " @ge@ ")
        .replace('<', " @le@ ")
        .replace('>', " @ge@ ")
        .replace('=', " = ");
    spaced
        .split_whitespace()
        .map(|t| match t {
            "@le@" => "<=".to_string(),
            "@ge@" => ">=".to_string(),
            other => other.to_string(),
        })
        .collect()
}

type VarResolver<'a> = dyn Fn(&str) -> Result<VarId> + 'a;
type ParsedRow = (Vec<(VarId, f64)>, Cmp, f64);

/// Parses `[+-] [coef] var ...` until a comparator or end; returns the terms
/// and the number of tokens consumed.
fn parse_linear(tokens: &[String], var_of: &VarResolver) -> Result<(Vec<(VarId, f64)>, usize)> {
    let mut terms = Vec::new();
    let mut sign = 1.0f64;
    let mut coeff: Option<f64> = None;
    let mut i = 0usize;
    while i < tokens.len() {
        let t = &tokens[i];
        if t == "<=" || t == ">=" || t == "=" {
            break;
        }
        if t.ends_with(':') {
            i += 1;
            continue;
        }
        if t == "+" {
            i += 1;
            continue;
        }
        if t == "-" {
            sign = -sign;
            i += 1;
            continue;
        }
        if let Ok(num) = t.parse::<f64>() {
            coeff = Some(coeff.unwrap_or(1.0) * num);
            i += 1;
            continue;
        }
        // signed number fused to the token, e.g. "-2.5"
        if (t.starts_with('-') || t.starts_with('+')) && t[1..].parse::<f64>().is_ok() {
            let num: f64 = t.parse().unwrap();
            coeff = Some(coeff.unwrap_or(1.0) * num);
            i += 1;
            continue;
        }
        let v = var_of(t)?;
        terms.push((v, sign * coeff.unwrap_or(1.0)));
        sign = 1.0;
        coeff = None;
        i += 1;
    }
    Ok((terms, i))
}

fn parse_row(tokens: &[String], var_of: &VarResolver) -> Result<ParsedRow> {
    let (mut terms, used) = parse_linear(tokens, var_of)?;
    if used >= tokens.len() {
        return Err(Error::parse("constraint without comparator"));
    }
    let cmp = match tokens[used].as_str() {
        "<=" => Cmp::Le,
        ">=" => Cmp::Ge,
        "=" => Cmp::Eq,
        other => return Err(Error::parse(format!("unknown comparator `{other}`"))),
    };
    let rhs_tokens = &tokens[used + 1..];
    let rhs_str: String = rhs_tokens.concat();
    let rhs: f64 = rhs_str
        .parse()
        .map_err(|_| Error::parse(format!("bad right-hand side `{rhs_str}`")))?;
    // combine duplicate variables
    terms.sort_by_key(|(v, _)| *v);
    terms.dedup_by(|a, b| {
        if a.0 == b.0 {
            b.1 += a.1;
            true
        } else {
            false
        }
    });
    Ok((terms, cmp, rhs))
}

/// Serializes a solution: status, objective, then `name value` per nonzero.
pub fn write_solution(model: &IlpModel, status: &str, objective: f64, ones: &[VarId]) -> String {
    let topo = &model.hints.topology;
    let mut out = format!("status {status}\n");
    out.push_str(&format!("objective {objective}\n"));
    for v in ones {
        out.push_str(&format!("{} 1\n", model.var_kind(*v).name(topo)));
    }
    out
}

/// Parses a solution file against a model. Returns the status keyword, the
/// reported objective and the assignment (values above 0.5 count as one).
pub fn parse_solution(text: &str, model: &IlpModel) -> Result<(String, f64, Assignment)> {
    let topo = &model.hints.topology;
    let mut status = None;
    let mut objective = 0.0f64;
    let mut ones = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["status", s] => status = Some(s.to_string()),
            ["objective", v] => {
                objective = v
                    .parse()
                    .map_err(|_| Error::parse(format!("bad objective `{v}`")))?
            }
            [name, value] => {
                let val: f64 = value
                    .parse()
                    .map_err(|_| Error::parse(format!("bad value `{value}`")))?;
                if val > 0.5 {
                    let kind = VarKind::parse(name, topo)?;
                    let id = model
                        .var_id(kind)
                        .ok_or_else(|| Error::parse(format!("unknown variable `{name}`")))?;
                    ones.push(id);
                }
            }
            _ => return Err(Error::parse(format!("bad solution line `{line}`"))),
        }
    }
    let status = status.ok_or_else(|| Error::parse("solution file missing a status line"))?;
    Ok((status, objective, Assignment::new(ones)))
}
