use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::predicate::FilterExpr;

/// Unique canonical filters with occurrence counts, in first-seen order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WorkloadTally {
    entries: Vec<(FilterExpr, u64)>,
    index: HashMap<String, usize>,
}

impl WorkloadTally {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_filters<I: IntoIterator<Item = FilterExpr>>(filters: I) -> Self {
        let mut t = Self::new();
        for f in filters {
            t.add(f, 1);
        }
        t
    }

    pub fn from_counts<I: IntoIterator<Item = (FilterExpr, u64)>>(entries: I) -> Self {
        let mut t = Self::new();
        for (f, c) in entries {
            t.add(f, c);
        }
        t
    }

    /// Adds `count` occurrences; a zero count is ignored.
    pub fn add(&mut self, filter: FilterExpr, count: u64) {
        if count == 0 {
            return;
        }
        let filter = filter.canonicalize();
        let key = filter.key();
        match self.index.get(&key) {
            Some(&i) => self.entries[i].1 += count,
            None => {
                self.index.insert(key, self.entries.len());
                self.entries.push((filter, count));
            }
        }
    }

    pub fn entries(&self) -> &[(FilterExpr, u64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of queries.
    pub fn mass(&self) -> u64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn count(&self, f: &FilterExpr) -> u64 {
        self.index.get(&f.key()).map_or(0, |&i| self.entries[i].1)
    }

    /// Parses one entry per line: `<count>\t<filter>`, or a bare filter
    /// counted once. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut t = Self::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (count, filter) = match line.split_once('\t') {
                Some((c, f)) => {
                    let c: u64 = c.trim().parse().map_err(|_| {
                        Error::Config(format!("line {}: bad count {c:?}", lineno + 1))
                    })?;
                    (c, f)
                }
                None => (1, line),
            };
            let f = FilterExpr::parse(filter)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
            t.add(f, count);
        }
        Ok(t)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (f, c) in &self.entries {
            let _ = writeln!(s, "{c}\t{f}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedups_canonical_filters() {
        let t = WorkloadTally::from_filters(
            ["A&B", "B&A", "A", "B|A"].iter().map(|s| FilterExpr::parse(s).unwrap()),
        );
        assert_eq!(t.len(), 3);
        assert_eq!(t.count(&FilterExpr::parse("A&B").unwrap()), 2);
        assert_eq!(t.mass(), 4);
    }

    #[test]
    fn text_round_trip() {
        let t = WorkloadTally::parse("# header\n2\tA\nD&E\n\n3\tx:[1,5]\n1\tA\n").unwrap();
        assert_eq!(t.count(&FilterExpr::attr("A")), 3);
        assert_eq!(WorkloadTally::parse(&t.to_text()).unwrap(), t);
        assert!(WorkloadTally::parse("x\tA").is_err());
        assert!(WorkloadTally::parse("2\tA&").is_err());
    }
}
