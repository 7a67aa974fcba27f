//! Compact filter grammar.
//!
//! ```text
//! expr   := term ('|' term)*
//! term   := factor ('&' factor)*
//! factor := '(' expr ')' | '*' | NAME | NAME ':' '[' bound ',' bound ']'
//! bound  := '*' | NUMBER
//! ```
//!
//! `&` binds tighter than `|`. Whitespace is insignificant.

use super::FilterExpr;
use crate::error::{Error, Result};

const RESERVED: &[char] = &['&', '|', '(', ')', '*', ':', '[', ']', ','];

pub(super) fn parse(text: &str) -> Result<FilterExpr> {
    let mut p = Parser { src: text, pos: 0 };
    let expr = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing input"));
    }
    Ok(expr.canonicalize())
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::FilterParse {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_raw() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek_raw(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.peek_raw()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<FilterExpr> {
        let mut terms = vec![self.term()?];
        while self.eat('|') {
            terms.push(self.term()?);
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            FilterExpr::Or(terms)
        })
    }

    fn term(&mut self) -> Result<FilterExpr> {
        let mut factors = vec![self.factor()?];
        while self.eat('&') {
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            FilterExpr::And(factors)
        })
    }

    fn factor(&mut self) -> Result<FilterExpr> {
        if self.eat('(') {
            let e = self.expr()?;
            self.expect(')')?;
            return Ok(e);
        }
        if self.eat('*') {
            return Ok(FilterExpr::True);
        }
        let name = self.name()?;
        if self.eat(':') {
            self.expect('[')?;
            let lo = self.bound()?;
            self.expect(',')?;
            let hi = self.bound()?;
            self.expect(']')?;
            return FilterExpr::range(name, lo, hi).map_err(|e| match e {
                Error::InvalidFilter(msg) => self.err(&msg),
                other => other,
            });
        }
        Ok(FilterExpr::Attr(name))
    }

    fn name(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek_raw() {
            if c.is_whitespace() || RESERVED.contains(&c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        if self.pos == start {
            return Err(self.err("expected attribute name"));
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn bound(&mut self) -> Result<Option<f64>> {
        if self.eat('*') {
            return Ok(None);
        }
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek_raw() {
            if c == ',' || c == ']' || c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>()
            .ok()
            .filter(|v| !v.is_nan())
            .map(Some)
            .ok_or_else(|| self.err(&format!("bad number {text:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_examples() {
        for s in ["A", "A&B", "A|B|C", "x:[1,5]", "(A|B)&y:[0,3]", "*"] {
            let f = parse(s).unwrap();
            assert_eq!(f.key(), s, "{s}");
        }
    }

    #[test]
    fn precedence() {
        let f = parse("A&B|C").unwrap();
        assert!(matches!(&f, FilterExpr::Or(c) if c.len() == 2));
        let g = parse("A&(B|C)").unwrap();
        assert!(matches!(&g, FilterExpr::And(c) if c.len() == 2));
    }

    #[test]
    fn open_bounds_and_whitespace() {
        let f = parse(" x : [ * , 2.5 ] ").unwrap();
        assert_eq!(f.key(), "x:[*,2.5]");
        assert_eq!(parse("x:[-1e3,*]").unwrap().key(), "x:[-1000,*]");
    }

    #[test]
    fn errors_report_position() {
        for bad in ["", "A&", "(A|B", "A)", "x:[1,", "x:[a,2]", "x:[3,1]", "|A"] {
            assert!(parse(bad).is_err(), "{bad:?} should fail");
        }
        match parse("A&").unwrap_err() {
            Error::FilterParse { pos, .. } => assert_eq!(pos, 2),
            e => panic!("unexpected {e}"),
        }
    }
}
