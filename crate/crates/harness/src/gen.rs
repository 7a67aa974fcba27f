//! Synthetic vectors, attributes and query workloads.

use std::collections::BTreeSet;
use std::str::FromStr;

use fvs_core::{AttributeSet, AttributedDataset, Error, FilterExpr, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Zipf};
use serde::{Deserialize, Serialize};

use crate::io::Matrix;

/// Standard normal vectors.
pub fn gaussian_vectors(n: usize, dim: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * dim).map(|_| rng.sample(StandardNormal)).collect();
    Matrix { dim, data }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttrRecipe {
    None,
    /// Token `a{i}` on each row with probability `1/i`, `i = 1..=attr_count`.
    #[default]
    PerRank,
    /// Numeric attributes `x1..` drawn from `N(0, 1)`.
    Gaussian,
    /// Both of the above.
    Mixed,
}

impl FromStr for AttrRecipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "per-rank" => Ok(Self::PerRank),
            "gaussian" => Ok(Self::Gaussian),
            "mixed" => Ok(Self::Mixed),
            _ => Err(Error::Config(format!("unknown attribute recipe {s:?}"))),
        }
    }
}

pub fn token_name(i: usize) -> String {
    format!("a{i}")
}

pub fn numeric_name(i: usize) -> String {
    format!("x{i}")
}

pub fn gen_attributes(
    n: usize,
    recipe: AttrRecipe,
    attr_count: usize,
    numeric_count: usize,
    seed: u64,
) -> Vec<AttributeSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tokens = matches!(recipe, AttrRecipe::PerRank | AttrRecipe::Mixed);
    let numerics = matches!(recipe, AttrRecipe::Gaussian | AttrRecipe::Mixed);
    (0..n)
        .map(|_| {
            let mut set = if tokens {
                AttributeSet::from_tokens((1..=attr_count).filter(|&i| rng.random_bool(1.0 / i as f64)).map(token_name))
            } else {
                AttributeSet::new()
            };
            if numerics {
                for j in 1..=numeric_count {
                    let v: f64 = rng.sample(StandardNormal);
                    set = set.with_numeric(numeric_name(j), v);
                }
            }
            set
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorkloadRecipe {
    #[default]
    ZipfConjunctive,
    ZipfDisjunctive,
    ZipfRange,
    UniformSingleAttr,
}

impl FromStr for WorkloadRecipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zipf-conjunctive" => Ok(Self::ZipfConjunctive),
            "zipf-disjunctive" => Ok(Self::ZipfDisjunctive),
            "zipf-range" => Ok(Self::ZipfRange),
            "uniform-single-attr" => Ok(Self::UniformSingleAttr),
            _ => Err(Error::Config(format!("unknown workload recipe {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadSpec {
    pub recipe: WorkloadRecipe,
    pub size: usize,
    pub zipf_exponent: f64,
    pub unfiltered_fraction: f64,
    /// Standard deviation of the noise added to sampled dataset rows.
    pub query_noise: f64,
    pub seed: u64,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        Self {
            recipe: WorkloadRecipe::ZipfConjunctive,
            size: 1000,
            zipf_exponent: 1.0,
            unfiltered_fraction: 0.2,
            query_noise: 0.1,
            seed: 0,
        }
    }
}

/// Tokens present on some but not all rows, most frequent first.
fn selective_tokens(ds: &AttributedDataset<f32>) -> Vec<String> {
    let mut t: Vec<(&str, usize)> = ds
        .attribute_index()
        .tokens()
        .filter(|&(_, c)| c > 0 && c < ds.len())
        .collect();
    t.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    t.into_iter().map(|(s, _)| s.to_string()).collect()
}

fn numeric_attributes(ds: &AttributedDataset<f32>) -> Vec<String> {
    let names: BTreeSet<&String> = ds.attributes().iter().flat_map(|a| a.numerics.keys()).collect();
    names.into_iter().cloned().collect()
}

/// Range templates over quantile bins: 20 bins per attribute, spans of 1 to 4
/// bins.
fn range_templates(ds: &AttributedDataset<f32>) -> Result<Vec<FilterExpr>> {
    const BINS: usize = 20;
    let mut out = Vec::new();
    for name in numeric_attributes(ds) {
        let mut vals: Vec<f64> = ds.attributes().iter().filter_map(|a| a.numerics.get(&name).copied()).collect();
        vals.sort_by(f64::total_cmp);
        let q = |i: usize| vals[((vals.len() - 1) * i) / BINS];
        for width in 1..=4 {
            for lo in 0..=BINS - width {
                out.push(FilterExpr::range(name.clone(), Some(q(lo)), Some(q(lo + width)))?);
            }
        }
    }
    Ok(out)
}

/// Candidate filter templates for a zipf recipe, in an unshuffled order.
pub fn templates(recipe: WorkloadRecipe, ds: &AttributedDataset<f32>) -> Result<Vec<FilterExpr>> {
    let toks = selective_tokens(ds);
    let pairs = |join: fn(Vec<FilterExpr>) -> FilterExpr| {
        let mut v = Vec::new();
        for i in 0..toks.len() {
            for j in i + 1..toks.len() {
                v.push(join(vec![FilterExpr::attr(&toks[i]), FilterExpr::attr(&toks[j])]));
            }
        }
        v
    };
    let t = match recipe {
        WorkloadRecipe::ZipfConjunctive => {
            let mut v: Vec<FilterExpr> = toks.iter().map(FilterExpr::attr).collect();
            v.extend(pairs(|c| FilterExpr::and(c)));
            v
        }
        WorkloadRecipe::ZipfDisjunctive => pairs(|c| FilterExpr::or(c)),
        WorkloadRecipe::ZipfRange => range_templates(ds)?,
        WorkloadRecipe::UniformSingleAttr => toks.iter().map(FilterExpr::attr).collect(),
    };
    if t.is_empty() {
        return Err(Error::Config(format!("dataset has no attributes usable by {recipe:?}")));
    }
    Ok(t)
}

/// Rank `r` (from 1) drawn with weight `r^-s`; `s = 0` is uniform.
pub fn zipf_ranks(n: usize, s: f64, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let z = Zipf::new(n as f64, s).map_err(|e| Error::Config(format!("zipf: {e}")))?;
    Ok((0..count).map(|_| z.sample(rng) as usize).collect())
}

/// Query vectors and filters. Vectors are dataset rows plus gaussian noise.
pub fn gen_workload(spec: &WorkloadSpec, ds: &AttributedDataset<f32>) -> Result<(Vec<Vec<f32>>, Vec<FilterExpr>)> {
    if ds.is_empty() {
        return Err(Error::Dataset("cannot draw queries from an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut tpl = templates(spec.recipe, ds)?;
    let filters = match spec.recipe {
        WorkloadRecipe::UniformSingleAttr => (0..spec.size)
            .map(|_| {
                if rng.random_bool(spec.unfiltered_fraction.clamp(0.0, 1.0)) {
                    FilterExpr::True
                } else {
                    tpl[rng.random_range(0..tpl.len())].clone()
                }
            })
            .collect(),
        _ => {
            tpl.shuffle(&mut rng);
            zipf_ranks(tpl.len(), spec.zipf_exponent, spec.size, &mut rng)?
                .into_iter()
                .map(|r| tpl[r - 1].clone())
                .collect()
        }
    };
    let noise = Normal::new(0.0f32, spec.query_noise as f32).map_err(|e| Error::Config(format!("noise: {e}")))?;
    let queries = (0..spec.size)
        .map(|_| {
            let row = rng.random_range(0..ds.len());
            ds.vector(row).iter().map(|v| v + noise.sample(&mut rng)).collect()
        })
        .collect();
    Ok((queries, filters))
}

#[cfg(test)]
mod tests {
    use super::*;
    use fvs_core::Metric;

    #[test]
    fn first_rank_always_present() {
        let a = gen_attributes(500, AttrRecipe::PerRank, 20, 0, 1);
        assert!(a.iter().all(|s| s.has("a1")));
        assert_eq!(a, gen_attributes(500, AttrRecipe::PerRank, 20, 0, 1));
    }

    #[test]
    fn gaussian_recipe_has_numerics_only() {
        let a = gen_attributes(10, AttrRecipe::Gaussian, 20, 2, 1);
        assert!(a.iter().all(|s| s.tokens.is_empty() && s.numerics.len() == 2));
    }

    #[test]
    fn range_templates_are_valid() {
        let m = gaussian_vectors(400, 2, 3);
        let attrs = gen_attributes(400, AttrRecipe::Gaussian, 0, 2, 4);
        let ds = AttributedDataset::new(2, m.data, attrs, Metric::L2).unwrap();
        let t = templates(WorkloadRecipe::ZipfRange, &ds).unwrap();
        assert_eq!(t.len(), 2 * (20 + 19 + 18 + 17));
        assert!(t.iter().all(|f| ds.cardinality(f) > 0));
    }
}
