//! Text formats for elements, distributions and kernels.
//!
//! Elements are one `index value` pair per line with an optional final
//! `tail <bound>` line; `#` starts a comment. Distributions use the same
//! layout and additionally accept the `#deficit <x>` trailer written by the
//! tsv output, so that output can be read back verbatim.

use std::fmt::Write as _;

use evoalg_core::markov::{Distribution, ProbSeq, SparseKernel};
use evoalg_core::{BasisIndex, Element};

use crate::kernel::Kernel;

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{0}")]
    Invalid(#[from] evoalg_core::Error),
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError::Syntax { line, msg: msg.into() }
}

fn number<T: std::str::FromStr>(line: usize, word: &str) -> Result<T, ParseError> {
    word.parse().map_err(|_| syntax(line, format!("cannot read `{word}` as a number")))
}

struct Entries {
    pairs: Vec<(BasisIndex, f64)>,
    tail: Option<f64>,
    deficit: Option<f64>,
}

fn read_entries(text: &str) -> Result<Entries, ParseError> {
    let mut out = Entries { pairs: Vec::new(), tail: None, deficit: None };
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let trimmed = raw.trim();
        if let Some(rest) = trimmed.strip_prefix("#deficit") {
            out.deficit = Some(number(line, rest.trim())?);
            continue;
        }
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if out.tail.is_some() {
            return Err(syntax(line, "`tail` must be the last line"));
        }
        let words: Vec<&str> = trimmed.split_whitespace().collect();
        match words.as_slice() {
            ["tail", b] => out.tail = Some(number(line, b)?),
            [i, x] => out.pairs.push((number(line, i)?, number(line, x)?)),
            _ => return Err(syntax(line, format!("expected `index value`, found `{trimmed}`"))),
        }
    }
    Ok(out)
}

pub fn parse_element(text: &str) -> Result<Element, ParseError> {
    let e = read_entries(text)?;
    let element = Element::from_pairs(e.pairs)?;
    Ok(match e.tail {
        Some(t) => element.with_tail(t)?,
        None => element,
    })
}

pub fn write_element(e: &Element) -> String {
    let mut out = String::new();
    for (i, x) in e.iter() {
        writeln!(out, "{i} {x}").unwrap();
    }
    if e.tail_bound() > 0.0 {
        writeln!(out, "tail {}", e.tail_bound()).unwrap();
    }
    out
}

/// The mass deficit comes from `#deficit` or, failing that, `tail`.
pub fn parse_distribution(text: &str, abs_tol: f64) -> Result<Distribution, ParseError> {
    let e = read_entries(text)?;
    let deficit = e.deficit.or(e.tail).unwrap_or(0.0);
    Ok(Distribution::new(Element::from_pairs(e.pairs)?, deficit, abs_tol)?)
}

/// `state<TAB>probability` rows sorted by state, then `#deficit <x>`.
pub fn write_distribution_tsv(d: &Distribution) -> String {
    write_table_tsv(d.underlying().iter(), d.mass_deficit())
}

pub(crate) fn write_table_tsv(rows: impl Iterator<Item = (BasisIndex, f64)>, deficit: f64) -> String {
    let mut out = String::new();
    for (i, p) in rows {
        writeln!(out, "{i}\t{p}").unwrap();
    }
    writeln!(out, "#deficit {deficit}").unwrap();
    out
}

/// Arguments of a `builtin` kernel line, e.g. `renewal geometric 0.5`.
pub fn parse_builtin(words: &[&str], max_population: usize) -> Result<Kernel, ParseError> {
    let bad = |msg: &str| syntax(1, format!("{msg} in `builtin {}`", words.join(" ")));
    let prob = |w: &str| number::<f64>(1, w);
    let kernel = match words {
        ["renewal", "geometric", q] => Kernel::renewal(ProbSeq::Geometric { start: 1, ratio: prob(q)? })?,
        ["house-of-cards", "constant", p] => Kernel::house_of_cards(ProbSeq::Constant(prob(p)?))?,
        ["house-of-cards", "geometric", q] => Kernel::house_of_cards(ProbSeq::Geometric { start: 0, ratio: prob(q)? })?,
        ["branching", rest @ ..] if !rest.is_empty() => {
            let offspring = rest.iter().map(|w| prob(w)).collect::<Result<Vec<_>, _>>()?;
            Kernel::branching(offspring, max_population)?
        }
        ["identity"] => Kernel::Identity,
        [] => return Err(bad("missing chain family")),
        _ => return Err(bad("unknown chain family or arity")),
    };
    Ok(kernel)
}

/// `kernel v1`, then a single `builtin ...` line or `row i k p` lines
/// closed by `end`.
pub fn parse_kernel(text: &str, max_population: usize) -> Result<Kernel, ParseError> {
    let mut lines =
        text.lines().enumerate().map(|(n, l)| (n + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, "kernel v1")) => {}
        Some((line, other)) => return Err(syntax(line, format!("expected `kernel v1`, found `{other}`"))),
        None => return Err(syntax(1, "empty kernel file")),
    }
    let mut entries = Vec::new();
    let mut ended = false;
    let mut builtin = None;
    for (line, l) in lines {
        if ended || builtin.is_some() {
            return Err(syntax(line, "unexpected content after the kernel definition"));
        }
        let words: Vec<&str> = l.split_whitespace().collect();
        match words.as_slice() {
            ["builtin", rest @ ..] if entries.is_empty() => {
                builtin = Some(parse_builtin(rest, max_population).map_err(|e| match e {
                    ParseError::Syntax { msg, .. } => syntax(line, msg),
                    other => other,
                })?);
            }
            ["row", i, k, p] => entries.push((number(line, i)?, number(line, k)?, number(line, p)?)),
            ["end"] => ended = true,
            _ => return Err(syntax(line, format!("cannot read `{l}`"))),
        }
    }
    if let Some(k) = builtin {
        return Ok(k);
    }
    if !ended {
        return Err(syntax(text.lines().count().max(1), "missing `end`"));
    }
    Ok(Kernel::Sparse(SparseKernel::from_entries(entries)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use evoalg_core::markov::TransitionKernel;

    #[test]
    fn element_round_trip() {
        let e = Element::from_pairs([(0, 0.1), (7, -2.5e-300)]).unwrap().with_tail(0.125).unwrap();
        assert_eq!(parse_element(&write_element(&e)).unwrap(), e);
    }

    #[test]
    fn element_parse_rules() {
        let e = parse_element("# weights\n0 1\n3   2.5\n\ntail 0.5\n").unwrap();
        assert_eq!(e.get(3), 2.5);
        assert_eq!(e.tail_bound(), 0.5);
        assert!(parse_element("0 1\n0 2\n").is_err());
        assert!(parse_element("tail 0.5\n0 1\n").is_err());
        assert!(parse_element("0 x\n").is_err());
        assert!(parse_element("0 1 2\n").is_err());
    }

    #[test]
    fn distribution_round_trip() {
        let d = Distribution::new(Element::from_pairs([(0, 0.3), (4, 0.6)]).unwrap(), 0.1, 1e-12).unwrap();
        let tsv = write_distribution_tsv(&d);
        assert_eq!(tsv, "0\t0.3\n4\t0.6\n#deficit 0.1\n");
        assert_eq!(parse_distribution(&tsv, 1e-12).unwrap(), d);
        assert!(parse_distribution("0 0.5\n", 1e-12).is_err());
    }

    #[test]
    fn kernel_files() {
        let k = parse_kernel("kernel v1\nbuiltin renewal geometric 0.5\n", 16).unwrap();
        assert_eq!(k.row(0, 3).entries, vec![(1, 0.5), (2, 0.25)]);
        let k = parse_kernel("kernel v1\n# two states\nrow 0 1 1\nrow 1 0 0.5\nrow 1 1 0.5\nend\n", 16).unwrap();
        assert_eq!(k.state_limit(), Some(2));
        assert!(parse_kernel("kernel v2\n", 16).is_err());
        assert!(parse_kernel("kernel v1\nrow 0 0 1\n", 16).is_err());
        assert!(parse_kernel("kernel v1\nbuiltin renewal geometric 0.5\nrow 0 0 1\n", 16).is_err());
        assert!(matches!(
            parse_kernel("kernel v1\nbuiltin house-of-cards constant 0\n", 16),
            Err(ParseError::Invalid(evoalg_core::Error::InvalidParameter(_)))
        ));
    }
}
