//! Exact implication between negation-free filters.
//!
//! `inner` implies `outer` iff every clause of `inner`'s disjunctive normal
//! form implies `outer`. Because filters are monotone, a clause implies
//! `outer` iff `outer` holds on the least attribute set satisfying it: only
//! the clause's tokens present, and numeric attributes absent unless the
//! clause constrains them. A constrained attribute can still take any value
//! in its interval, so `outer` is checked at one representative value per
//! region cut out by `outer`'s range endpoints.

use std::collections::{BTreeMap, BTreeSet};

use super::FilterExpr;

type Interval = (Option<f64>, Option<f64>);

const MAX_CLAUSES: usize = 256;
const MAX_ASSIGNMENTS: usize = 4096;

#[derive(Clone, Debug, Default)]
pub(crate) struct Clause {
    tokens: BTreeSet<String>,
    ranges: BTreeMap<String, Interval>,
}

/// Disjunctive normal form with unsatisfiable clauses removed.
#[derive(Clone, Debug)]
pub(crate) struct Dnf(Vec<Clause>);

fn intersect(a: Interval, b: Interval) -> Interval {
    let lo = match (a.0, b.0) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, y) => x.or(y),
    };
    let hi = match (a.1, b.1) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    };
    (lo, hi)
}

fn is_empty(iv: Interval) -> bool {
    matches!(iv, (Some(l), Some(h)) if l > h)
}

fn merge(a: &Clause, b: &Clause) -> Option<Clause> {
    let mut out = a.clone();
    out.tokens.extend(b.tokens.iter().cloned());
    for (attr, iv) in &b.ranges {
        let merged = match out.ranges.get(attr) {
            Some(cur) => intersect(*cur, *iv),
            None => *iv,
        };
        if is_empty(merged) {
            return None;
        }
        out.ranges.insert(attr.clone(), merged);
    }
    Some(out)
}

impl Dnf {
    /// `None` when the normal form would exceed the clause limit.
    pub(crate) fn of(f: &FilterExpr) -> Option<Dnf> {
        Self::build(f).map(Dnf)
    }

    fn build(f: &FilterExpr) -> Option<Vec<Clause>> {
        match f {
            FilterExpr::True => Some(vec![Clause::default()]),
            FilterExpr::Attr(t) => {
                let mut c = Clause::default();
                c.tokens.insert(t.clone());
                Some(vec![c])
            }
            FilterExpr::Range { attr, lo, hi } => {
                let mut c = Clause::default();
                c.ranges.insert(attr.clone(), (*lo, *hi));
                Some(vec![c])
            }
            FilterExpr::Or(children) => {
                let mut out = Vec::new();
                for ch in children {
                    out.extend(Self::build(ch)?);
                    if out.len() > MAX_CLAUSES {
                        return None;
                    }
                }
                Some(out)
            }
            FilterExpr::And(children) => {
                let mut acc = vec![Clause::default()];
                for ch in children {
                    let rhs = Self::build(ch)?;
                    let mut next = Vec::with_capacity(acc.len() * rhs.len());
                    for a in &acc {
                        for b in &rhs {
                            if let Some(m) = merge(a, b) {
                                next.push(m);
                            }
                        }
                        if next.len() > MAX_CLAUSES {
                            return None;
                        }
                    }
                    acc = next;
                }
                Some(acc)
            }
        }
    }

    /// Whether every attribute set satisfying this form satisfies `outer`.
    /// `None` when the check would need too many sample assignments.
    pub(crate) fn implies(&self, outer: &FilterExpr) -> Option<bool> {
        let mut endpoints: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        collect_endpoints(outer, &mut endpoints);
        for clause in &self.0 {
            if !clause_implies(clause, outer, &endpoints)? {
                return Some(false);
            }
        }
        Some(true)
    }
}

fn collect_endpoints<'a>(f: &'a FilterExpr, out: &mut BTreeMap<&'a str, Vec<f64>>) {
    match f {
        FilterExpr::Range { attr, lo, hi } => {
            let e = out.entry(attr.as_str()).or_default();
            e.extend(lo.iter().chain(hi.iter()).copied());
        }
        FilterExpr::And(c) | FilterExpr::Or(c) => {
            for x in c {
                collect_endpoints(x, out);
            }
        }
        _ => {}
    }
}

/// One value inside every region of `iv` on which the outer filter's truth
/// is constant.
fn sample_points(iv: Interval, endpoints: &[f64]) -> Vec<f64> {
    let inside = |x: f64| iv.0.is_none_or(|l| x >= l) && iv.1.is_none_or(|h| x <= h);
    let mut pts: Vec<f64> = endpoints.iter().copied().filter(|&x| inside(x)).collect();
    pts.extend(iv.0);
    pts.extend(iv.1);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut out = Vec::with_capacity(pts.len() * 2 + 2);
    match (pts.first(), iv.0) {
        (Some(&first), None) => out.push(first - 1.0),
        (None, _) => out.push(0.0),
        _ => {}
    }
    for (i, &p) in pts.iter().enumerate() {
        out.push(p);
        if let Some(&next) = pts.get(i + 1) {
            out.push(p + (next - p) / 2.0);
        }
    }
    if let (Some(&last), None) = (pts.last(), iv.1) {
        out.push(last + 1.0);
    }
    out
}

fn clause_implies(
    clause: &Clause,
    outer: &FilterExpr,
    endpoints: &BTreeMap<&str, Vec<f64>>,
) -> Option<bool> {
    let mut axes: Vec<(&str, Vec<f64>)> = Vec::new();
    let mut total = 1usize;
    for (attr, iv) in &clause.ranges {
        let pts = sample_points(*iv, endpoints.get(attr.as_str()).map_or(&[], Vec::as_slice));
        total = total.saturating_mul(pts.len());
        axes.push((attr.as_str(), pts));
    }
    if total > MAX_ASSIGNMENTS {
        return None;
    }
    let mut idx = vec![0usize; axes.len()];
    let mut values: BTreeMap<&str, f64> = BTreeMap::new();
    loop {
        values.clear();
        for (a, i) in axes.iter().zip(&idx) {
            values.insert(a.0, a.1[*i]);
        }
        if !eval(outer, &clause.tokens, &values) {
            return Some(false);
        }
        let mut d = 0;
        loop {
            if d == axes.len() {
                return Some(true);
            }
            idx[d] += 1;
            if idx[d] < axes[d].1.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

fn eval(f: &FilterExpr, tokens: &BTreeSet<String>, values: &BTreeMap<&str, f64>) -> bool {
    match f {
        FilterExpr::True => true,
        FilterExpr::Attr(t) => tokens.contains(t),
        FilterExpr::Range { attr, lo, hi } => values
            .get(attr.as_str())
            .is_some_and(|&v| lo.is_none_or(|l| v >= l) && hi.is_none_or(|h| v <= h)),
        FilterExpr::And(c) => c.iter().all(|x| eval(x, tokens, values)),
        FilterExpr::Or(c) => c.iter().any(|x| eval(x, tokens, values)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn implies(inner: &str, outer: &str) -> bool {
        let inner = FilterExpr::parse(inner).unwrap();
        let outer = FilterExpr::parse(outer).unwrap();
        Dnf::of(&inner).unwrap().implies(&outer).unwrap()
    }

    #[test]
    fn distributes_over_disjunction() {
        assert!(implies("A&(B|C)", "(A&B)|(A&C)"));
        assert!(implies("(A&B)|(A&C)", "A&(B|C)"));
        assert!(!implies("A|(B&C)", "(A&B)|(A&C)"));
    }

    #[test]
    fn ranges_split_across_disjuncts() {
        assert!(implies("x:[1,5]", "x:[1,3]|x:[3,5]"));
        assert!(!implies("x:[1,5]", "x:[1,3]|x:[3.5,5]"));
        assert!(!implies("x:[*,5]", "x:[0,*]"));
        assert!(implies("x:[2,*]&x:[*,4]", "x:[0,10]"));
        assert!(implies("x:[5,6]&x:[7,8]", "Q"), "unsatisfiable implies anything");
        assert!(!implies("A", "x:[*,*]"), "missing numeric fails every range");
    }

    #[test]
    fn sample_points_cover_regions() {
        assert_eq!(sample_points((None, None), &[]), vec![0.0]);
        assert_eq!(sample_points((Some(1.0), Some(5.0)), &[3.0, 9.0]), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(sample_points((None, Some(2.0)), &[]), vec![1.0, 2.0]);
    }
}
