//! Signature rules: the grammar, the shipped default set and stateless
//! evaluation over the event stream.
//!
//! A rule pairs an indicator (a conjunction of field predicates, optionally
//! qualified by a stateful tail) with the action level it demands. The
//! rules engine evaluates only the stateless predicates; `REPEAT` / `RATE`
//! tails are carried on the emitted [`RuleMatch`] for the analytics engine,
//! which owns all state.

mod parser;

pub use parser::{parse_rules, RuleParseError, RuleParseErrorKind};

use std::fmt;
use std::str::FromStr;

use crate::telemetry::{TelemetryEvent, Timestamp};

/// Graduated response levels, ordered from least to most severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionLevel {
    Info,
    Elevated,
    Group,
    Emergency,
}

impl ActionLevel {
    pub const ALL: [ActionLevel; 4] =
        [ActionLevel::Info, ActionLevel::Elevated, ActionLevel::Group, ActionLevel::Emergency];

    pub fn as_str(&self) -> &'static str {
        match self {
            ActionLevel::Info => "Info",
            ActionLevel::Elevated => "Elevated",
            ActionLevel::Group => "Group",
            ActionLevel::Emergency => "Emergency",
        }
    }
}

impl fmt::Display for ActionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActionLevel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Info" => Ok(ActionLevel::Info),
            "Elevated" => Ok(ActionLevel::Elevated),
            "Group" => Ok(ActionLevel::Group),
            "Emergency" => Ok(ActionLevel::Emergency),
            _ => Err(()),
        }
    }
}

/// Queryable event fields. `SELECTOR` reads the selector tag; every other
/// field reads the payload token with the matching lowercase key, and a
/// predicate over an absent token is simply false.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Selector,
    FreqMhz,
    PowerDb,
    SatCount,
    Event,
    Link,
    IntervalS,
    Bytes,
}

impl Field {
    pub fn as_str(&self) -> &'static str {
        match self {
            Field::Selector => "SELECTOR",
            Field::FreqMhz => "FREQ_MHZ",
            Field::PowerDb => "POWER_DB",
            Field::SatCount => "SAT_COUNT",
            Field::Event => "EVENT",
            Field::Link => "LINK",
            Field::IntervalS => "INTERVAL_S",
            Field::Bytes => "BYTES",
        }
    }

    /// Payload token key this field reads, or None for `SELECTOR`.
    pub fn token_key(&self) -> Option<&'static str> {
        match self {
            Field::Selector => None,
            Field::FreqMhz => Some("freq_mhz"),
            Field::PowerDb => Some("power_db"),
            Field::SatCount => Some("sat_count"),
            Field::Event => Some("event"),
            Field::Link => Some("link"),
            Field::IntervalS => Some("interval_s"),
            Field::Bytes => Some("bytes"),
        }
    }

    /// Name-valued fields compare as exact strings and only with `=`/`!=`;
    /// the rest compare numerically.
    pub fn is_name_valued(&self) -> bool {
        matches!(self, Field::Selector | Field::Event | Field::Link)
    }
}

impl FromStr for Field {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SELECTOR" => Ok(Field::Selector),
            "FREQ_MHZ" => Ok(Field::FreqMhz),
            "POWER_DB" => Ok(Field::PowerDb),
            "SAT_COUNT" => Ok(Field::SatCount),
            "EVENT" => Ok(Field::Event),
            "LINK" => Ok(Field::Link),
            "INTERVAL_S" => Ok(Field::IntervalS),
            "BYTES" => Ok(Field::Bytes),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Eq,
    Ne,
    Gt,
    Ge,
    Lt,
    Le,
}

impl Comparator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
        }
    }

    pub fn is_ordering(&self) -> bool {
        !matches!(self, Comparator::Eq | Comparator::Ne)
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Comparator {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "=" => Ok(Comparator::Eq),
            "!=" => Ok(Comparator::Ne),
            ">" => Ok(Comparator::Gt),
            ">=" => Ok(Comparator::Ge),
            "<" => Ok(Comparator::Lt),
            "<=" => Ok(Comparator::Le),
            _ => Err(()),
        }
    }
}

/// Right-hand side of a predicate: a number or a bare name.
#[derive(Debug, Clone, PartialEq)]
pub enum AtomValue {
    Number(f64),
    Name(String),
}

impl fmt::Display for AtomValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // Minimal rendering keeps rule files readable; parses back equal.
            AtomValue::Number(n) => write!(f, "{n}"),
            AtomValue::Name(n) => f.write_str(n),
        }
    }
}

/// One stateless predicate: `<field> <comparator> <value>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub field: Field,
    pub cmp: Comparator,
    pub value: AtomValue,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.field, self.cmp, self.value)
    }
}

/// Tolerance for numeric equality: decimal text survives the round trip
/// through the log format well inside this band.
pub const NUMERIC_EQ_TOLERANCE: f64 = 0.005;

impl Atom {
    /// Whether this predicate holds on `e`. Absent tokens never match.
    pub fn holds(&self, e: &TelemetryEvent) -> bool {
        match self.field.token_key() {
            None => {
                let AtomValue::Name(want) = &self.value else { return false };
                let is = e.selector.as_str() == want;
                match self.cmp {
                    Comparator::Eq => is,
                    Comparator::Ne => !is,
                    _ => false,
                }
            }
            Some(key) if self.field.is_name_valued() => {
                let Some(have) = e.token(key) else { return false };
                let AtomValue::Name(want) = &self.value else { return false };
                match self.cmp {
                    Comparator::Eq => have == want,
                    Comparator::Ne => have != want,
                    _ => false,
                }
            }
            Some(key) => {
                let Some(have) = e.numeric_token(key) else { return false };
                let AtomValue::Number(want) = self.value else { return false };
                match self.cmp {
                    Comparator::Eq => (have - want).abs() <= NUMERIC_EQ_TOLERANCE,
                    Comparator::Ne => (have - want).abs() > NUMERIC_EQ_TOLERANCE,
                    Comparator::Gt => have > want,
                    Comparator::Ge => have >= want,
                    Comparator::Lt => have < want,
                    Comparator::Le => have <= want,
                }
            }
        }
    }
}

/// Stateful qualification deferred to the analytics engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatefulSpec {
    /// Fire once `count` matches have accumulated while the drone covered
    /// at least `min_distance_m` meters.
    Repeat { count: u32, min_distance_m: f64 },
    /// Fire when more than `count` matches land within `window_s` seconds.
    Rate { count: u32, window_s: u32 },
}

impl fmt::Display for StatefulSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatefulSpec::Repeat { count, min_distance_m } => {
                write!(f, "REPEAT {count} MINDIST {min_distance_m}")
            }
            StatefulSpec::Rate { count, window_s } => write!(f, "RATE {count}/{window_s}"),
        }
    }
}

/// A parsed signature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureRule {
    pub name: String,
    pub level: ActionLevel,
    pub atoms: Vec<Atom>,
    pub stateful: Option<StatefulSpec>,
}

impl fmt::Display for SignatureRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RULE {} LEVEL {} WHEN ", self.name, self.level)?;
        for (i, atom) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, " AND ")?;
            }
            write!(f, "{atom}")?;
        }
        if let Some(s) = &self.stateful {
            write!(f, " {s}")?;
        }
        Ok(())
    }
}

/// A rule whose stateless predicates all held on one event.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleMatch {
    pub rule: String,
    pub level: ActionLevel,
    pub event: TelemetryEvent,
    pub ts: Timestamp,
    pub stateful: Option<StatefulSpec>,
}

/// Evaluates every rule against one event. Pure and deterministic; matches
/// come back in rule-set order.
pub fn eval_event(rules: &[SignatureRule], e: &TelemetryEvent) -> Vec<RuleMatch> {
    rules
        .iter()
        .filter(|r| r.atoms.iter().all(|a| a.holds(e)))
        .map(|r| RuleMatch {
            rule: r.name.clone(),
            level: r.level,
            event: e.clone(),
            ts: e.timestamp,
            stateful: r.stateful,
        })
        .collect()
}

/// Renders a rule set in the grammar accepted by [`parse_rules`].
pub fn format_rules(rules: &[SignatureRule]) -> String {
    let mut out = String::new();
    for r in rules {
        out.push_str(&r.to_string());
        out.push('\n');
    }
    out
}

/// Text of the shipped signature set (also available as a standalone file
/// for the CLI `--rules` flag).
pub const DEFAULT_RULES_TEXT: &str = include_str!("default.rules");

/// The shipped signature set: six rules covering link loss, Wi-Fi power
/// anomalies, deauthentication bursts, network floods, GPS-band carriers
/// above the noise floor and satellite-count anomalies.
pub fn default_ruleset() -> Vec<SignatureRule> {
    parse_rules(DEFAULT_RULES_TEXT).expect("shipped default.rules must parse")
}
