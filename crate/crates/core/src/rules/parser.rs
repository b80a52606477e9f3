//! Line-oriented parser for the signature rule grammar.
//!
//! ```text
//! RULE <name> LEVEL <level> WHEN <atom> (AND <atom>)*
//!      [REPEAT <count> MINDIST <meters> | RATE <count>/<window_s>]
//! ```
//!
//! `#` starts a comment; blank lines are ignored. Errors carry the 1-based
//! line and column of the offending token.

use std::collections::BTreeSet;

use thiserror::Error;

use super::{Atom, AtomValue, Comparator, Field, SignatureRule, StatefulSpec};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("rule parse error at line {line}, column {col}: {kind}")]
pub struct RuleParseError {
    pub line: usize,
    pub col: usize,
    pub kind: RuleParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleParseErrorKind {
    #[error("expected {expected}, found `{found}`")]
    Syntax { expected: &'static str, found: String },
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("unknown level `{0}`")]
    UnknownLevel(String),
    #[error("duplicate rule name `{0}`")]
    DuplicateRuleName(String),
    #[error("{0}")]
    InvalidValue(String),
}

/// Whitespace tokenizer that remembers 1-based token columns.
struct Cursor<'a> {
    toks: Vec<(&'a str, usize)>,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn new(line_no: usize, line: &'a str) -> Self {
        let mut toks = Vec::new();
        let mut start = None;
        for (i, c) in line.char_indices() {
            if c.is_whitespace() {
                if let Some(s) = start.take() {
                    toks.push((&line[s..i], s + 1));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            toks.push((&line[s..], s + 1));
        }
        Cursor { toks, pos: 0, line: line_no }
    }

    fn err(&self, col: usize, kind: RuleParseErrorKind) -> RuleParseError {
        RuleParseError { line: self.line, col, kind }
    }

    fn end_col(&self) -> usize {
        self.toks.last().map(|(t, c)| c + t.len()).unwrap_or(1)
    }

    fn next(&mut self, expected: &'static str) -> Result<(&'a str, usize), RuleParseError> {
        match self.toks.get(self.pos) {
            Some(&(text, col)) => {
                self.pos += 1;
                Ok((text, col))
            }
            None => Err(self.err(
                self.end_col(),
                RuleParseErrorKind::Syntax { expected, found: "end of line".into() },
            )),
        }
    }

    fn keyword(&mut self, kw: &'static str) -> Result<(), RuleParseError> {
        let (text, col) = self.next(kw)?;
        if text == kw {
            Ok(())
        } else {
            Err(self.err(col, RuleParseErrorKind::Syntax { expected: kw, found: text.into() }))
        }
    }

    fn peek(&self) -> Option<(&'a str, usize)> {
        self.toks.get(self.pos).copied()
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_value(text: &str) -> Option<AtomValue> {
    if let Ok(n) = text.parse::<f64>() {
        return n.is_finite().then_some(AtomValue::Number(n));
    }
    is_ident(text).then(|| AtomValue::Name(text.to_string()))
}

fn parse_atom(cur: &mut Cursor) -> Result<Atom, RuleParseError> {
    let (ftext, fcol) = cur.next("field name")?;
    let field: Field = ftext
        .parse()
        .map_err(|_| cur.err(fcol, RuleParseErrorKind::UnknownField(ftext.into())))?;

    let (ctext, ccol) = cur.next("comparator")?;
    let cmp: Comparator = ctext.parse().map_err(|_| {
        cur.err(ccol, RuleParseErrorKind::Syntax { expected: "comparator", found: ctext.into() })
    })?;

    let (vtext, vcol) = cur.next("value")?;
    let value = parse_value(vtext).ok_or_else(|| {
        cur.err(vcol, RuleParseErrorKind::Syntax { expected: "number or name", found: vtext.into() })
    })?;

    // Type checks: name-valued fields take names with =/!=; numeric fields
    // take numbers.
    match (&value, field.is_name_valued()) {
        (AtomValue::Name(_), true) if cmp.is_ordering() => Err(cur.err(
            ccol,
            RuleParseErrorKind::InvalidValue(format!("field {field} only supports = and !=")),
        )),
        (AtomValue::Name(_), false) => Err(cur.err(
            vcol,
            RuleParseErrorKind::InvalidValue(format!("field {field} expects a number")),
        )),
        (AtomValue::Number(_), true) => Err(cur.err(
            vcol,
            RuleParseErrorKind::InvalidValue(format!("field {field} expects a name")),
        )),
        _ => Ok(Atom { field, cmp, value }),
    }
}

fn parse_u32(cur: &Cursor, col: usize, text: &str, what: &str) -> Result<u32, RuleParseError> {
    text.parse::<u32>()
        .map_err(|_| cur.err(col, RuleParseErrorKind::InvalidValue(format!("{what}: `{text}`"))))
}

fn parse_rule_line(line_no: usize, line: &str) -> Result<SignatureRule, RuleParseError> {
    let mut cur = Cursor::new(line_no, line);

    cur.keyword("RULE")?;
    let (name, ncol) = cur.next("rule name")?;
    if !is_ident(name) {
        return Err(cur.err(
            ncol,
            RuleParseErrorKind::Syntax { expected: "rule name", found: name.into() },
        ));
    }

    cur.keyword("LEVEL")?;
    let (ltext, lcol) = cur.next("level")?;
    let level = ltext
        .parse()
        .map_err(|_| cur.err(lcol, RuleParseErrorKind::UnknownLevel(ltext.into())))?;

    cur.keyword("WHEN")?;
    let mut atoms = vec![parse_atom(&mut cur)?];
    let mut stateful = None;

    while let Some((text, col)) = cur.peek() {
        match text {
            "AND" => {
                cur.next("AND")?;
                atoms.push(parse_atom(&mut cur)?);
            }
            "REPEAT" => {
                cur.next("REPEAT")?;
                let (ctext, ccol) = cur.next("repeat count")?;
                let count = parse_u32(&cur, ccol, ctext, "repeat count")?;
                if count < 2 {
                    return Err(cur.err(
                        ccol,
                        RuleParseErrorKind::InvalidValue("REPEAT count must be at least 2".into()),
                    ));
                }
                cur.keyword("MINDIST")?;
                let (dtext, dcol) = cur.next("distance in meters")?;
                let dist: f64 = dtext.parse().unwrap_or(f64::NAN);
                if !dist.is_finite() || dist < 0.0 {
                    return Err(cur.err(
                        dcol,
                        RuleParseErrorKind::InvalidValue(format!("distance: `{dtext}`")),
                    ));
                }
                stateful = Some(StatefulSpec::Repeat { count, min_distance_m: dist });
            }
            "RATE" => {
                cur.next("RATE")?;
                let (rtext, rcol) = cur.next("count/window")?;
                let Some((c, w)) = rtext.split_once('/') else {
                    return Err(cur.err(
                        rcol,
                        RuleParseErrorKind::Syntax { expected: "count/window", found: rtext.into() },
                    ));
                };
                let count = parse_u32(&cur, rcol, c, "rate count")?;
                let window_s = parse_u32(&cur, rcol, w, "rate window")?;
                if window_s == 0 {
                    return Err(cur.err(
                        rcol,
                        RuleParseErrorKind::InvalidValue("RATE window must be positive".into()),
                    ));
                }
                stateful = Some(StatefulSpec::Rate { count, window_s });
            }
            other => {
                return Err(cur.err(
                    col,
                    RuleParseErrorKind::Syntax {
                        expected: "AND, REPEAT, RATE or end of line",
                        found: other.into(),
                    },
                ));
            }
        }
        if stateful.is_some() {
            // A stateful tail must end the rule.
            if let Some((extra, ecol)) = cur.peek() {
                return Err(cur.err(
                    ecol,
                    RuleParseErrorKind::Syntax { expected: "end of line", found: extra.into() },
                ));
            }
            break;
        }
    }

    Ok(SignatureRule { name: name.to_string(), level, atoms, stateful })
}

/// Parses a full rule file. Rule names must be unique within the set.
pub fn parse_rules(text: &str) -> Result<Vec<SignatureRule>, RuleParseError> {
    let mut rules = Vec::new();
    let mut names = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        let rule = parse_rule_line(idx + 1, line)?;
        if !names.insert(rule.name.clone()) {
            return Err(RuleParseError {
                line: idx + 1,
                col: 1,
                kind: RuleParseErrorKind::DuplicateRuleName(rule.name),
            });
        }
        rules.push(rule);
    }
    Ok(rules)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::ActionLevel;

    #[test]
    fn parses_spoof_rule() {
        let rules = parse_rules(
            "RULE gps_spoof LEVEL Emergency WHEN SELECTOR = FREQUENCY AND FREQ_MHZ = 1575.42 AND POWER_DB > -120",
        )
        .unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].name, "gps_spoof");
        assert_eq!(rules[0].level, ActionLevel::Emergency);
        assert_eq!(rules[0].atoms.len(), 3);
        assert!(rules[0].stateful.is_none());
    }

    #[test]
    fn parses_info_rule() {
        let rules = parse_rules("RULE lost_link LEVEL Info WHEN SELECTOR = SIGNAL_LOSS").unwrap();
        assert_eq!(rules[0].level, ActionLevel::Info);
    }

    #[test]
    fn unknown_level_rejected() {
        let e = parse_rules("RULE x LEVEL Critical WHEN SELECTOR = DEBUG").unwrap_err();
        assert_eq!(e.kind, RuleParseErrorKind::UnknownLevel("Critical".into()));
        assert_eq!(e.line, 1);
    }

    #[test]
    fn unknown_field_rejected_with_position() {
        let e = parse_rules("RULE x LEVEL Info WHEN ALTITUDE > 10").unwrap_err();
        assert_eq!(e.kind, RuleParseErrorKind::UnknownField("ALTITUDE".into()));
        assert_eq!(e.col, 24);
    }

    #[test]
    fn duplicate_names_rejected() {
        let text =
            "RULE a LEVEL Info WHEN SELECTOR = DEBUG\nRULE a LEVEL Info WHEN SELECTOR = DEBUG";
        let e = parse_rules(text).unwrap_err();
        assert_eq!(e.kind, RuleParseErrorKind::DuplicateRuleName("a".into()));
        assert_eq!(e.line, 2);
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let text = "# heading\n\nRULE a LEVEL Info WHEN SELECTOR = DEBUG # trailing\n";
        assert_eq!(parse_rules(text).unwrap().len(), 1);
    }

    #[test]
    fn repeat_tail_parses() {
        let rules =
            parse_rules("RULE w LEVEL Elevated WHEN POWER_DB > -40 REPEAT 2 MINDIST 100").unwrap();
        assert_eq!(
            rules[0].stateful,
            Some(StatefulSpec::Repeat { count: 2, min_distance_m: 100.0 })
        );
    }

    #[test]
    fn rate_tail_parses() {
        let rules = parse_rules("RULE d LEVEL Group WHEN EVENT = NET_PKT RATE 1000/1").unwrap();
        assert_eq!(rules[0].stateful, Some(StatefulSpec::Rate { count: 1000, window_s: 1 }));
    }

    #[test]
    fn repeat_below_two_rejected() {
        assert!(parse_rules("RULE w LEVEL Info WHEN POWER_DB > -40 REPEAT 1 MINDIST 5").is_err());
    }

    #[test]
    fn zero_rate_window_rejected() {
        assert!(parse_rules("RULE d LEVEL Group WHEN EVENT = NET_PKT RATE 10/0").is_err());
    }

    #[test]
    fn ordering_comparator_on_name_field_rejected() {
        let e = parse_rules("RULE x LEVEL Info WHEN SELECTOR > FREQUENCY").unwrap_err();
        assert!(matches!(e.kind, RuleParseErrorKind::InvalidValue(_)));
    }

    #[test]
    fn name_value_on_numeric_field_rejected() {
        let e = parse_rules("RULE x LEVEL Info WHEN FREQ_MHZ = WIDE").unwrap_err();
        assert!(matches!(e.kind, RuleParseErrorKind::InvalidValue(_)));
    }

    #[test]
    fn number_on_name_field_rejected() {
        let e = parse_rules("RULE x LEVEL Info WHEN EVENT = 5").unwrap_err();
        assert!(matches!(e.kind, RuleParseErrorKind::InvalidValue(_)));
    }

    #[test]
    fn truncated_line_reports_end_of_line() {
        let e = parse_rules("RULE x LEVEL Info WHEN").unwrap_err();
        assert!(
            matches!(e.kind, RuleParseErrorKind::Syntax { ref found, .. } if found == "end of line")
        );
    }

    #[test]
    fn tokens_after_stateful_tail_rejected() {
        assert!(parse_rules("RULE x LEVEL Info WHEN POWER_DB > 0 RATE 5/10 AND EVENT = X").is_err());
    }

    mod round_trip {
        use super::super::*;
        use crate::rules::{format_rules, Atom, AtomValue, Comparator, Field};
        use proptest::prelude::*;

        fn arb_atom() -> impl Strategy<Value = Atom> {
            let numeric_field = prop::sample::select(vec![
                Field::FreqMhz,
                Field::PowerDb,
                Field::SatCount,
                Field::IntervalS,
                Field::Bytes,
            ]);
            let name_field =
                prop::sample::select(vec![Field::Selector, Field::Event, Field::Link]);
            let any_cmp = prop::sample::select(vec![
                Comparator::Eq,
                Comparator::Ne,
                Comparator::Gt,
                Comparator::Ge,
                Comparator::Lt,
                Comparator::Le,
            ]);
            let eq_cmp = prop::sample::select(vec![Comparator::Eq, Comparator::Ne]);
            prop_oneof![
                (numeric_field, any_cmp, -1e6f64..1e6).prop_map(|(field, cmp, n)| Atom {
                    field,
                    cmp,
                    value: AtomValue::Number(n),
                }),
                (name_field, eq_cmp, "[A-Z][A-Z0-9_]{0,10}").prop_map(|(field, cmp, s)| Atom {
                    field,
                    cmp,
                    value: AtomValue::Name(s),
                }),
            ]
        }

        fn arb_rule(idx: usize) -> impl Strategy<Value = SignatureRule> {
            let stateful = prop_oneof![
                Just(None),
                (2u32..100, 0.0f64..10_000.0).prop_map(|(count, d)| Some(
                    StatefulSpec::Repeat { count, min_distance_m: d }
                )),
                (1u32..100_000, 1u32..86_400).prop_map(|(count, window_s)| Some(
                    StatefulSpec::Rate { count, window_s }
                )),
            ];
            (
                prop::sample::select(crate::rules::ActionLevel::ALL.to_vec()),
                prop::collection::vec(arb_atom(), 1..5),
                stateful,
            )
                .prop_map(move |(level, atoms, stateful)| SignatureRule {
                    name: format!("rule_{idx}"),
                    level,
                    atoms,
                    stateful,
                })
        }

        fn arb_ruleset() -> impl Strategy<Value = Vec<SignatureRule>> {
            // Unique names come from the index.
            (0usize..6).prop_flat_map(|n| (0..n).map(arb_rule).collect::<Vec<_>>())
        }

        proptest! {
            #[test]
            fn format_then_parse_is_identity(rules in arb_ruleset()) {
                let text = format_rules(&rules);
                let back = parse_rules(&text).unwrap();
                prop_assert_eq!(back, rules);
            }
        }
    }
}
