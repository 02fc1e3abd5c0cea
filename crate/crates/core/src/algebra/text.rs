//! Plain-text form of monoids and actions.
//!
//! ```text
//! MONOID n identity
//! <n lines of n space-separated ids>
//! ACTION m                      (optional)
//! <n lines of m space-separated carrier points>
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;

use super::{AlgebraError, FiniteAction, MonoidTable};

pub fn write_monoid(m: &MonoidTable) -> String {
    let mut out = format!("MONOID {} {}\n", m.len(), m.identity());
    for a in m.elements() {
        push_row(&mut out, m.row(a));
    }
    out
}

pub fn write_action(act: &FiniteAction) -> String {
    let mut out = write_monoid(act.monoid());
    let _ = writeln!(out, "ACTION {}", act.carrier_size());
    for a in act.monoid().elements() {
        push_row(&mut out, act.map(a));
    }
    out
}

fn push_row(out: &mut String, row: &[usize]) {
    let line: Vec<String> = row.iter().map(usize::to_string).collect();
    out.push_str(&line.join(" "));
    out.push('\n');
}

/// Parsed document: a monoid and, if present, an action of it.
#[derive(Clone, Debug)]
pub struct AlgebraDoc {
    pub monoid: MonoidTable,
    pub action: Option<FiniteAction>,
}

pub fn parse(text: &str) -> Result<AlgebraDoc, AlgebraError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (line_no, header) = lines.next().ok_or(AlgebraError::Parse { line: 0, msg: "empty document".into() })?;
    let head = numbers_after(line_no, header, "MONOID", 2)?;
    let (n, identity) = (head[0], head[1]);
    let rows = (0..n)
        .map(|_| {
            let (ln, l) = lines.next().ok_or(AlgebraError::Parse { line: line_no, msg: "missing table row".into() })?;
            parse_row(ln, l)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let monoid = MonoidTable::from_rows(rows, identity)?;

    let action = match lines.next() {
        None => None,
        Some((ln, l)) => {
            let m = numbers_after(ln, l, "ACTION", 1)?[0];
            let maps = (0..n)
                .map(|_| {
                    let (ln2, l2) = lines.next().ok_or(AlgebraError::Parse { line: ln, msg: "missing action row".into() })?;
                    if m == 0 {
                        return Ok(Vec::new());
                    }
                    parse_row(ln2, l2)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Some(FiniteAction::new(monoid.clone(), m, maps)?)
        }
    };
    if let Some((ln, _)) = lines.next() {
        return Err(AlgebraError::Parse { line: ln, msg: "trailing content".into() });
    }
    Ok(AlgebraDoc { monoid, action })
}

fn numbers_after(line: usize, text: &str, keyword: &str, count: usize) -> Result<Vec<usize>, AlgebraError> {
    let rest = text.strip_prefix(keyword).ok_or_else(|| AlgebraError::Parse { line, msg: format!("expected {keyword}") })?;
    let nums = parse_row(line, rest)?;
    if nums.len() != count {
        return Err(AlgebraError::Parse { line, msg: format!("{keyword} takes {count} number(s)") });
    }
    Ok(nums)
}

fn parse_row(line: usize, text: &str) -> Result<Vec<usize>, AlgebraError> {
    text.split_whitespace().map(|t| t.parse().map_err(|_| AlgebraError::Parse { line, msg: format!("bad id {t:?}") })).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monoid_text_layout() {
        let text = write_monoid(&MonoidTable::cyclic(3).unwrap());
        assert_eq!(text, "MONOID 3 0\n0 1 2\n1 2 0\n2 0 1\n");
    }

    #[test]
    fn action_roundtrip() {
        let act = FiniteAction::saturating_shift(4, 6).unwrap();
        let doc = parse(&write_action(&act)).unwrap();
        assert_eq!(doc.action.unwrap(), act);
        assert_eq!(doc.monoid, *act.monoid());
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(parse(""), Err(AlgebraError::Parse { .. })));
        assert!(matches!(parse("MONOID 2 0\n0 1\n"), Err(AlgebraError::Parse { .. })));
        assert!(matches!(parse("MONOID 2 0\n0 1\n1 5\n"), Err(AlgebraError::OutOfRange { .. })));
        assert!(matches!(parse("MONOID 1 0\n0\nACTION 2\n0 3\n"), Err(AlgebraError::OutOfRange { .. })));
        assert!(matches!(parse("MONOID 1 0\n0\nACTION 1\n0\nextra\n"), Err(AlgebraError::Parse { .. })));
    }

    #[test]
    fn comments_are_skipped() {
        let doc = parse("# trivial\nMONOID 1 0\n\n0\n").unwrap();
        assert_eq!(doc.monoid.len(), 1);
        assert!(doc.action.is_none());
    }
}
