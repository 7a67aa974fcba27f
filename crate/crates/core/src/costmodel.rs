//! Analytical size and speed model shared by the optimizer and the planner.
//!
//! All logarithms are natural. Downscaling only uses ratios of logs, so the
//! base does not matter there; in `indexed_cost` it fixes the unit that
//! `gamma` aligns brute force against.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predicate::FilterExpr;
use crate::scalar::{round_to_usize, Scalar};

/// Model parameters. `budget` is in model size units (`M * rows`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct CostParams<T> {
    pub m_inf: usize,
    pub sef_inf: usize,
    pub k: usize,
    pub gamma: T,
    pub cor: T,
    pub budget: usize,
}

pub const DEFAULT_COR: f64 = 0.5;

impl<T: Scalar> CostParams<T> {
    /// Calibrated `gamma` and the default correlation exponent.
    pub fn new(m_inf: usize, sef_inf: usize, k: usize, budget: usize) -> Self {
        Self {
            m_inf,
            sef_inf,
            k,
            gamma: calibrate_gamma(k),
            cor: T::from_f64_lossy(DEFAULT_COR),
            budget,
        }
    }

    pub fn with_gamma(mut self, gamma: T) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_cor(mut self, cor: T) -> Self {
        self.cor = cor;
        self
    }

    pub fn with_sef_inf(mut self, sef_inf: usize) -> Self {
        self.sef_inf = sef_inf;
        self
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    /// Size of the base index over `n` rows.
    pub fn base_size(&self, n: usize) -> usize {
        index_model_size(n, self.m_inf)
    }

    /// Checks every invariant except the budget.
    pub fn validate_shape(&self) -> Result<()> {
        if self.m_inf < 2 {
            return Err(Error::Param(format!("M_inf must be at least 2, got {}", self.m_inf)));
        }
        if self.k < 1 {
            return Err(Error::Param("k must be at least 1".into()));
        }
        if self.sef_inf < self.k {
            return Err(Error::Param(format!(
                "sef_inf {} is below k {}",
                self.sef_inf, self.k
            )));
        }
        if !(self.gamma > T::zero()) || !self.gamma.is_finite() {
            return Err(Error::Param(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.cor > T::zero()) || !self.cor.is_finite() {
            return Err(Error::Param(format!("cor must be positive, got {}", self.cor)));
        }
        Ok(())
    }

    /// Full validation against a dataset of `n` rows.
    pub fn validate(&self, n: usize) -> Result<()> {
        self.validate_shape()?;
        if self.budget < self.base_size(n) {
            return Err(Error::Config(format!(
                "budget {} is below the base index size {}",
                self.budget,
                self.base_size(n)
            )));
        }
        Ok(())
    }
}

fn log_ratio(card_h: usize, n: usize) -> Result<f64> {
    if card_h == 0 {
        return Err(Error::EmptySubindex("cardinality is zero".into()));
    }
    if card_h > n {
        return Err(Error::Param(format!("cardinality {card_h} exceeds dataset size {n}")));
    }
    if card_h == n {
        return Ok(1.0);
    }
    Ok((card_h as f64).ln() / (n as f64).ln())
}

/// Degree for a subindex over `card_h` of `n` rows: `M_inf * ln card_h / ln n`
/// rounded to nearest, clamped to `[2, M_inf]`.
pub fn m_downscale(card_h: usize, n: usize, m_inf: usize) -> Result<usize> {
    let m = round_to_usize(m_inf as f64 * log_ratio(card_h, n)?);
    Ok(m.clamp(2, m_inf.max(2)))
}

/// Serving exploration factor for a subindex: the same scaling as
/// [`m_downscale`], never below `k`.
pub fn sef_downscale(card_h: usize, n: usize, sef_inf: usize, k: usize) -> Result<usize> {
    let s = round_to_usize(sef_inf as f64 * log_ratio(card_h, n)?);
    Ok(s.max(k))
}

pub fn index_model_size(card_h: usize, m: usize) -> usize {
    m * card_h
}

/// `ln(card_h) * sef * (card_h / card_f)^cor`. Infinite when `card_f` is zero
/// or exceeds `card_h`, since such a subindex cannot serve the filter.
pub fn indexed_cost<T: Scalar>(card_h: usize, card_f: usize, sef: usize, cor: T) -> T {
    if card_f == 0 || card_h < card_f {
        return T::infinity();
    }
    let ch = T::of_usize(card_h);
    let ratio = ch / T::of_usize(card_f);
    ch.ln() * T::of_usize(sef) * ratio.powf(cor)
}

pub fn brute_cost<T: Scalar>(card_f: usize, gamma: T) -> T {
    gamma * T::of_usize(card_f)
}

/// `gamma` at which brute force over 1000 rows costs the same as a perfectly
/// selective indexed search at `sef = k`.
pub fn calibrate_gamma<T: Scalar>(k: usize) -> T {
    let thousand = T::of_usize(1000);
    T::of_usize(k) * thousand.ln() / thousand
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    BruteForce,
    /// Position of the serving member in the collection slice passed in.
    Indexed(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueryCost<T> {
    pub cost: T,
    pub strategy: Strategy,
}

/// Cheapest modeled way to serve `f` with the given collection members,
/// evaluated at the construction-time `sef = k`.
///
/// Brute force wins ties. Among indexed members the first minimum wins.
pub fn query_cost<T: Scalar>(
    members: &[(&FilterExpr, usize)],
    f: &FilterExpr,
    card_f: usize,
    params: &CostParams<T>,
    subsumes: impl Fn(&FilterExpr, &FilterExpr) -> bool,
) -> QueryCost<T> {
    let mut best = QueryCost {
        cost: brute_cost(card_f, params.gamma),
        strategy: Strategy::BruteForce,
    };
    if card_f == 0 {
        return best;
    }
    for (i, (h, card_h)) in members.iter().enumerate() {
        if *card_h < card_f || !subsumes(h, f) {
            continue;
        }
        let c = indexed_cost(*card_h, card_f, params.k, params.cor);
        if c < best.cost {
            best = QueryCost {
                cost: c,
                strategy: Strategy::Indexed(i),
            };
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn downscale_examples() {
        assert_eq!(m_downscale(4, 8, 32).unwrap(), 21);
        assert_eq!(m_downscale(3, 10, 10).unwrap(), 5);
        assert_eq!(m_downscale(3, 8, 10).unwrap(), 5);
        assert_eq!(m_downscale(8, 8, 10).unwrap(), 10);
        assert_eq!(m_downscale(1, 8, 10).unwrap(), 2);
        assert!(m_downscale(0, 8, 10).is_err());
        assert_eq!(sef_downscale(4, 8, 50, 10).unwrap(), 33);
        assert_eq!(sef_downscale(8, 8, 50, 10).unwrap(), 50);
        assert_eq!(sef_downscale(2, 1_000_000, 20, 10).unwrap(), 10);
    }

    #[test]
    fn size_examples() {
        assert_eq!(index_model_size(4, 21), 84);
        assert_eq!(index_model_size(3, 5), 15);
        assert_eq!(index_model_size(1, 2), 2);
    }

    #[test]
    fn cost_examples() {
        let c: f64 = indexed_cost(4, 3, 1, 1.0);
        assert!(close(c, 4.0 * 4f64.ln() / 3.0, 1e-12));
        assert!(close(c, 1.848, 5e-4));
        let c: f64 = indexed_cost(8, 1, 1, 1.0);
        assert!(close(c, 16.636, 5e-4));
        let c: f64 = indexed_cost(5, 5, 1, 1.0);
        assert!(close(c, 5f64.ln(), 1e-12));
        assert!(indexed_cost::<f64>(3, 4, 1, 1.0).is_infinite());
        assert_eq!(brute_cost(3, 1.0f64), 3.0);
        assert_eq!(brute_cost(0, 1.0f64), 0.0);
    }

    #[test]
    fn gamma_calibration_balances_at_one_thousand() {
        for k in [1, 10, 50] {
            let g: f64 = calibrate_gamma(k);
            let idx: f64 = indexed_cost(1000, 1000, k, 0.5);
            assert!(close(brute_cost(1000, g), idx, 1e-9));
        }
        assert!(close(calibrate_gamma::<f64>(10), 0.06908, 1e-5));
        let g32: f32 = calibrate_gamma(10);
        assert!((g32 - 0.069_077_55).abs() < 1e-6);
    }

    #[test]
    fn validation() {
        let p = CostParams::<f64>::new(10, 10, 1, 80);
        p.validate(8).unwrap();
        assert!(p.with_budget(79).validate(8).is_err());
        assert!(CostParams::<f64>::new(1, 10, 1, 80).validate(8).is_err());
        assert!(CostParams::<f64>::new(10, 5, 10, 1000).validate(8).is_err());
        assert!(p.with_gamma(0.0).validate(8).is_err());
        assert!(p.with_cor(-1.0).validate(8).is_err());
    }

    #[test]
    fn query_cost_base_only() {
        let p = CostParams::<f64>::new(10, 1, 1, 80).with_gamma(1.0).with_cor(1.0);
        let t = FilterExpr::True;
        let members = [(&t, 8usize)];
        let f = FilterExpr::attr("F");
        let qc = query_cost(&members, &f, 1, &p, crate::predicate::subsumes_logical);
        assert_eq!(qc.strategy, Strategy::BruteForce);
        assert!(close(qc.cost, 1.0, 1e-12));
        let qc = query_cost(&members, &t, 8, &p, crate::predicate::subsumes_logical);
        assert_eq!(qc.strategy, Strategy::Indexed(0));
        assert!(close(qc.cost, 8f64.ln(), 1e-12));
        let qc = query_cost(&members, &f, 0, &p, crate::predicate::subsumes_logical);
        assert_eq!(qc.cost, 0.0);
    }
}
