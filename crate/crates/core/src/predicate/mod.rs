//! Filter algebra over attribute sets.
//!
//! A [`FilterExpr`] is a negation-free predicate built from token membership,
//! closed numeric ranges, conjunction and disjunction. Values are kept in a
//! canonical form (flattened, children sorted by their text key, duplicates
//! removed) so that structurally equal filters compare equal and hash alike.
//!
//! Subsumption comes in two flavours: [`subsumes_logical`] decides whether
//! one filter implies another for every possible attribute set, while
//! [`subsumes_bitmap`] compares satisfier sets on one concrete dataset.

mod bitmap;
mod implication;
mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};

pub use bitmap::{subsumes_bitmap, Bitmap, Ones};
pub(crate) use implication::Dnf;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub enum FilterExpr {
    /// Passes every row. The filter of the base index.
    True,
    /// Row carries the token.
    Attr(String),
    /// Named numeric attribute lies in `[lo, hi]`; `None` is an open end.
    Range {
        attr: String,
        lo: Option<f64>,
        hi: Option<f64>,
    },
    And(Vec<FilterExpr>),
    Or(Vec<FilterExpr>),
}

impl FilterExpr {
    pub fn attr(token: impl Into<String>) -> Self {
        FilterExpr::Attr(token.into())
    }

    pub fn range(attr: impl Into<String>, lo: Option<f64>, hi: Option<f64>) -> Result<Self> {
        let attr = attr.into();
        if lo.is_some_and(f64::is_nan) || hi.is_some_and(f64::is_nan) {
            return Err(Error::InvalidFilter(format!("NaN bound on {attr}")));
        }
        if let (Some(l), Some(h)) = (lo, hi) {
            if l > h {
                return Err(Error::InvalidFilter(format!(
                    "range on {attr} has lo {l} > hi {h}"
                )));
            }
        }
        Ok(FilterExpr::Range { attr, lo, hi })
    }

    /// Canonical conjunction. An empty list is the always-true filter.
    pub fn and(children: impl IntoIterator<Item = FilterExpr>) -> Self {
        FilterExpr::And(children.into_iter().collect()).canonicalize()
    }

    /// Canonical disjunction.
    ///
    /// Panics on an empty list: an empty disjunction is unsatisfiable and has
    /// no representation here.
    pub fn or(children: impl IntoIterator<Item = FilterExpr>) -> Self {
        let children: Vec<_> = children.into_iter().collect();
        assert!(!children.is_empty(), "empty disjunction");
        FilterExpr::Or(children).canonicalize()
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse::parse(text)
    }

    pub fn is_true(&self) -> bool {
        matches!(self, FilterExpr::True)
    }

    /// Flattens nested same-kind connectives, drops neutral elements, sorts
    /// children by [`FilterExpr::key`] and removes duplicates. Idempotent.
    pub fn canonicalize(self) -> Self {
        match self {
            FilterExpr::And(children) => {
                let mut flat = Vec::with_capacity(children.len());
                for c in children {
                    match c.canonicalize() {
                        FilterExpr::True => {}
                        FilterExpr::And(inner) => flat.extend(inner),
                        other => flat.push(other),
                    }
                }
                sort_dedup(&mut flat);
                match flat.len() {
                    0 => FilterExpr::True,
                    1 => flat.pop().unwrap(),
                    _ => FilterExpr::And(flat),
                }
            }
            FilterExpr::Or(children) => {
                let mut flat = Vec::with_capacity(children.len());
                for c in children {
                    match c.canonicalize() {
                        FilterExpr::True => return FilterExpr::True,
                        FilterExpr::Or(inner) => flat.extend(inner),
                        other => flat.push(other),
                    }
                }
                sort_dedup(&mut flat);
                match flat.len() {
                    0 => panic!("empty disjunction"),
                    1 => flat.pop().unwrap(),
                    _ => FilterExpr::Or(flat),
                }
            }
            leaf => leaf,
        }
    }

    /// Depth-first text serialization; the ordering key for canonical sorting.
    pub fn key(&self) -> String {
        self.to_string()
    }

    /// Number of nodes in the expression tree.
    pub fn size(&self) -> usize {
        match self {
            FilterExpr::And(c) | FilterExpr::Or(c) => 1 + c.iter().map(|x| x.size()).sum::<usize>(),
            _ => 1,
        }
    }

    pub fn evaluate(&self, a: &AttributeSet) -> bool {
        evaluate(self, a)
    }
}

fn sort_dedup(children: &mut Vec<FilterExpr>) {
    let mut keyed: Vec<(String, FilterExpr)> = children.drain(..).map(|c| (c.key(), c)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.dedup_by(|a, b| a.0 == b.0);
    children.extend(keyed.into_iter().map(|(_, c)| c));
}

fn bound_eq(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => x.to_bits() == y.to_bits() || x == y,
        _ => false,
    }
}

impl PartialEq for FilterExpr {
    fn eq(&self, other: &Self) -> bool {
        use FilterExpr::*;
        match (self, other) {
            (True, True) => true,
            (Attr(a), Attr(b)) => a == b,
            (
                Range { attr, lo, hi },
                Range {
                    attr: a2,
                    lo: l2,
                    hi: h2,
                },
            ) => attr == a2 && bound_eq(*lo, *l2) && bound_eq(*hi, *h2),
            (And(a), And(b)) | (Or(a), Or(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for FilterExpr {}

impl Hash for FilterExpr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        // Consistent with `eq`: the text form is injective on canonical values.
        self.key().hash(state);
    }
}

fn fmt_bound(f: &mut fmt::Formatter<'_>, b: Option<f64>) -> fmt::Result {
    match b {
        None => f.write_str("*"),
        Some(x) if x == 0.0 => f.write_str("0"),
        Some(x) => write!(f, "{x}"),
    }
}

impl fmt::Display for FilterExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterExpr::True => f.write_str("*"),
            FilterExpr::Attr(t) => f.write_str(t),
            FilterExpr::Range { attr, lo, hi } => {
                write!(f, "{attr}:[")?;
                fmt_bound(f, *lo)?;
                f.write_str(",")?;
                fmt_bound(f, *hi)?;
                f.write_str("]")
            }
            FilterExpr::And(children) => {
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str("&")?;
                    }
                    if matches!(c, FilterExpr::Or(_)) {
                        write!(f, "({c})")?;
                    } else {
                        write!(f, "{c}")?;
                    }
                }
                Ok(())
            }
            FilterExpr::Or(children) => {
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str("|")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::str::FromStr for FilterExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse::parse(s)
    }
}

impl serde::Serialize for FilterExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.key())
    }
}

impl<'de> serde::Deserialize<'de> for FilterExpr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Attribute values of one row: a token set plus named numeric values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AttributeSet {
    pub tokens: BTreeSet<String>,
    pub numerics: BTreeMap<String, f64>,
}

impl AttributeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            tokens: tokens.into_iter().map(Into::into).collect(),
            numerics: BTreeMap::new(),
        }
    }

    pub fn with_numeric(mut self, name: impl Into<String>, value: f64) -> Self {
        self.numerics.insert(name.into(), value);
        self
    }

    pub fn has(&self, token: &str) -> bool {
        self.tokens.contains(token)
    }

    /// Parses one attribute line: comma separated tokens, `name=value` for
    /// numeric attributes. Blank lines are the empty set.
    pub fn parse_line(line: &str) -> Result<Self> {
        let mut set = AttributeSet::new();
        for item in line.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.split_once('=') {
                Some((name, value)) => {
                    let v: f64 = value.trim().parse().map_err(|_| {
                        Error::Dataset(format!("bad numeric attribute {item:?}"))
                    })?;
                    set.numerics.insert(name.trim().to_string(), v);
                }
                None => {
                    set.tokens.insert(item.to_string());
                }
            }
        }
        Ok(set)
    }

    pub fn to_line(&self) -> String {
        let mut parts: Vec<String> = self.tokens.iter().cloned().collect();
        parts.extend(self.numerics.iter().map(|(k, v)| format!("{k}={v}")));
        parts.join(",")
    }
}

/// True iff `a` satisfies `f`. A range on an attribute the row lacks is false.
pub fn evaluate(f: &FilterExpr, a: &AttributeSet) -> bool {
    match f {
        FilterExpr::True => true,
        FilterExpr::Attr(t) => a.tokens.contains(t),
        FilterExpr::Range { attr, lo, hi } => match a.numerics.get(attr) {
            Some(&v) => lo.is_none_or(|l| v >= l) && hi.is_none_or(|h| v <= h),
            None => false,
        },
        FilterExpr::And(children) => children.iter().all(|c| evaluate(c, a)),
        FilterExpr::Or(children) => children.iter().any(|c| evaluate(c, a)),
    }
}

/// How subsumption between filters is decided.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsumptionMode {
    /// Implication between the filter expressions, valid for any dataset.
    #[default]
    Logical,
    /// Satisfier-set containment on the indexed dataset.
    Bitmap,
}

impl std::str::FromStr for SubsumptionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logical" => Ok(SubsumptionMode::Logical),
            "bitmap" => Ok(SubsumptionMode::Bitmap),
            other => Err(Error::Config(format!("unknown subsumption mode {other:?}"))),
        }
    }
}

impl fmt::Display for SubsumptionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubsumptionMode::Logical => "logical",
            SubsumptionMode::Bitmap => "bitmap",
        })
    }
}

fn interval_contains(
    outer: (Option<f64>, Option<f64>),
    inner: (Option<f64>, Option<f64>),
) -> bool {
    let lo_ok = match (outer.0, inner.0) {
        (None, _) => true,
        (Some(_), None) => false,
        (Some(o), Some(i)) => o <= i,
    };
    let hi_ok = match (outer.1, inner.1) {
        (None, _) => true,
        (Some(_), None) => false,
        (Some(o), Some(i)) => o >= i,
    };
    lo_ok && hi_ok
}

/// Intersection of all ranges on `attr` among the conjuncts, if any exist.
fn conjunct_interval(conjuncts: &[FilterExpr], attr: &str) -> Option<(Option<f64>, Option<f64>)> {
    let mut acc: Option<(Option<f64>, Option<f64>)> = None;
    for c in conjuncts {
        if let FilterExpr::Range { attr: a, lo, hi } = c {
            if a == attr {
                let (alo, ahi) = acc.unwrap_or((None, None));
                let nlo = match (alo, *lo) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                };
                let nhi = match (ahi, *hi) {
                    (Some(x), Some(y)) => Some(x.min(y)),
                    (x, y) => x.or(y),
                };
                acc = Some((nlo, nhi));
            }
        }
    }
    acc
}

/// True iff every attribute set satisfying `inner` also satisfies `outer`.
///
/// Exact for filters whose normal forms stay small; beyond that it falls back
/// to [`subsumes_structural`], which may miss a subsumption but never claims
/// a false one.
pub fn subsumes_logical(outer: &FilterExpr, inner: &FilterExpr) -> bool {
    LogicalTest::new(inner).subsumed_by(outer)
}

/// [`subsumes_logical`] against one fixed inner filter, with its normal form
/// computed once.
#[derive(Clone, Debug)]
pub struct LogicalTest<'a> {
    inner: &'a FilterExpr,
    dnf: Option<Dnf>,
}

impl<'a> LogicalTest<'a> {
    pub fn new(inner: &'a FilterExpr) -> Self {
        let dnf = if inner.is_true() { None } else { Dnf::of(inner) };
        Self { inner, dnf }
    }

    pub fn subsumed_by(&self, outer: &FilterExpr) -> bool {
        if outer.is_true() || outer == self.inner {
            return true;
        }
        if self.inner.is_true() {
            return false;
        }
        self.dnf
            .as_ref()
            .and_then(|d| d.implies(outer))
            .unwrap_or_else(|| subsumes_structural(outer, self.inner))
    }
}

/// Sound, incomplete structural subsumption.
///
/// Rules, applied recursively: `*` subsumes everything; equal filters
/// subsume each other; a disjunction is subsumed when each disjunct is; a
/// conjunction subsumes when each conjunct does; a disjunction subsumes what
/// one of its disjuncts subsumes; a conjunction is subsumed when one of its
/// conjuncts is, or when its ranges on one attribute intersect to an
/// interval the outer range contains; ranges on the same attribute compare
/// by interval containment.
pub fn subsumes_structural(outer: &FilterExpr, inner: &FilterExpr) -> bool {
    use FilterExpr::*;
    if outer.is_true() || outer == inner {
        return true;
    }
    match (outer, inner) {
        (_, True) => false,
        (_, Or(disjuncts)) => disjuncts.iter().all(|d| subsumes_structural(outer, d)),
        (And(conjuncts), _) => conjuncts.iter().all(|c| subsumes_structural(c, inner)),
        (Or(disjuncts), _) => {
            disjuncts.iter().any(|d| subsumes_structural(d, inner))
                || matches!(inner, And(cs) if cs.iter().any(|c| subsumes_structural(outer, c)))
        }
        (_, And(conjuncts)) => {
            if conjuncts.iter().any(|c| subsumes_structural(outer, c)) {
                return true;
            }
            match outer {
                Range { attr, lo, hi } => conjunct_interval(conjuncts, attr)
                    .is_some_and(|iv| interval_contains((*lo, *hi), iv)),
                _ => false,
            }
        }
        (Attr(a), Attr(b)) => a == b,
        (
            Range { attr, lo, hi },
            Range {
                attr: a2,
                lo: l2,
                hi: h2,
            },
        ) => attr == a2 && interval_contains((*lo, *hi), (*l2, *h2)),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> FilterExpr {
        FilterExpr::parse(s).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        assert!(f("A").evaluate(&AttributeSet::from_tokens(["A", "E"])));
        assert!(f("D&E").evaluate(&AttributeSet::from_tokens(["D", "E"])));
        assert!(f("*").evaluate(&AttributeSet::new()));
        assert!(!f("A&B").evaluate(&AttributeSet::from_tokens(["A"])));
        assert!(f("B|A").evaluate(&AttributeSet::from_tokens(["A"])));
    }

    #[test]
    fn range_on_missing_attribute_is_false() {
        let a = AttributeSet::from_tokens(["x"]);
        assert!(!f("x:[*,*]").evaluate(&a));
        let a = a.with_numeric("x", 3.0);
        assert!(f("x:[3,3]").evaluate(&a));
        assert!(f("x:[*,5]").evaluate(&a));
        assert!(!f("x:[3.5,*]").evaluate(&a));
    }

    #[test]
    fn range_rejects_inverted_bounds() {
        assert!(FilterExpr::range("x", Some(2.0), Some(1.0)).is_err());
        assert!(FilterExpr::parse("x:[5,1]").is_err());
    }

    #[test]
    fn canonical_form_is_order_insensitive() {
        assert_eq!(f("B&A"), f("A&B"));
        assert_eq!(f("(C|A)|B"), f("A|B|C"));
        assert_eq!(f("A&A"), f("A"));
        assert_eq!(f("A&*"), f("A"));
        assert_eq!(f("A|*"), FilterExpr::True);
        assert_eq!(f("(B|A)&y:[0,3]").key(), "(A|B)&y:[0,3]");
    }

    #[test]
    fn logical_subsumption_examples() {
        assert!(subsumes_logical(&f("A|B"), &f("A")));
        assert!(subsumes_logical(&f("A"), &f("A")));
        assert!(subsumes_logical(&f("A:[1,7]"), &f("A:[1,5]")));
        assert!(!subsumes_logical(&f("A:[1,5]"), &f("A:[1,7]")));
        assert!(subsumes_logical(&f("*"), &f("x:[1,2]|Q")));
        assert!(!subsumes_logical(&f("A"), &f("*")));
        assert!(subsumes_logical(&f("D"), &f("D&(C|E)")));
        assert!(!subsumes_logical(&f("A|B|C"), &f("D&(C|E)")));
        assert!(subsumes_logical(&f("A|C"), &f("(A&E)|C")));
        assert!(subsumes_logical(&f("A|B|C"), &f("(A|B)&E")));
        assert!(subsumes_logical(&f("A&B"), &f("A&B&C")));
        assert!(!subsumes_logical(&f("A&B&C"), &f("A&B")));
        assert!(subsumes_logical(&f("x:[0,10]"), &f("x:[2,*]&x:[*,4]")));
        assert!(!subsumes_logical(&f("x:[0,10]"), &f("x:[2,*]")));
        assert!(!subsumes_logical(&f("x:[0,10]"), &f("y:[2,3]")));
    }

    #[test]
    fn structural_rules_are_weaker_but_agree_when_they_fire() {
        let outer = f("(A&B)|(A&C)");
        let inner = f("A&(B|C)");
        assert!(subsumes_logical(&outer, &inner));
        assert!(!subsumes_structural(&outer, &inner));
        for (o, i) in [("A|B", "A"), ("D", "D&(C|E)"), ("x:[0,10]", "x:[2,*]&x:[*,4]")] {
            assert!(subsumes_structural(&f(o), &f(i)));
        }
    }
}
