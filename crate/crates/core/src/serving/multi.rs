use crate::costmodel::indexed_cost;
use crate::predicate::Bitmap;
use crate::scalar::Scalar;

/// Subindexes whose union covers a query's rows, each searched with the
/// query bitmap at its own `sef`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverChoice<T> {
    /// `(member, sef)` in pick order.
    pub parts: Vec<(usize, usize)>,
    pub cost: T,
}

/// Cost of searching one member for the query: the indexed cost with the
/// query's cardinality inside that member.
fn part_cost<T: Scalar>(query: &Bitmap, rows: &Bitmap, card: usize, sef: usize, cor: T) -> Option<T> {
    let cond = query.intersection_count(rows).ok()?;
    (cond > 0).then(|| indexed_cost(card, cond, sef, cor))
}

/// Greedy weighted set cover: repeatedly takes the member with the lowest
/// cost per newly covered row (ties by key) until every query row is
/// covered. `sets` holds `(rows, card, sef, key)` per member.
pub fn greedy_cover<T: Scalar>(
    query: &Bitmap,
    sets: &[(&Bitmap, usize, usize, &str)],
    cor: T,
) -> Option<CoverChoice<T>> {
    let costs: Vec<Option<T>> = sets
        .iter()
        .map(|(rows, card, sef, _)| part_cost(query, rows, *card, *sef, cor))
        .collect();
    let mut uncovered = query.clone();
    let mut used = vec![false; sets.len()];
    let mut parts = Vec::new();
    let mut total = T::zero();
    while uncovered.count() > 0 {
        let mut best: Option<(T, usize)> = None;
        for (i, (rows, _, _, key)) in sets.iter().enumerate() {
            let Some(cost) = costs[i] else { continue };
            if used[i] {
                continue;
            }
            let fresh = uncovered.intersection_count(rows).ok()?;
            if fresh == 0 {
                continue;
            }
            let ratio = cost / T::of_usize(fresh);
            let better = match best {
                None => true,
                Some((r, j)) => ratio < r || (ratio == r && *key < sets[j].3),
            };
            if better {
                best = Some((ratio, i));
            }
        }
        let (_, i) = best?;
        used[i] = true;
        parts.push((i, sets[i].2));
        total = total + costs[i].unwrap();
        uncovered = uncovered.and_not(sets[i].0).ok()?;
    }
    Some(CoverChoice { parts, cost: total })
}

/// Minimum-cost cover by enumeration of every subset. Exponential; for
/// checking the greedy cover on small collections.
pub fn exhaustive_cover<T: Scalar>(
    query: &Bitmap,
    sets: &[(&Bitmap, usize, usize, &str)],
    cor: T,
) -> Option<CoverChoice<T>> {
    assert!(sets.len() <= 20, "exhaustive cover over {} sets", sets.len());
    let costs: Vec<Option<T>> = sets
        .iter()
        .map(|(rows, card, sef, _)| part_cost(query, rows, *card, *sef, cor))
        .collect();
    let mut best: Option<CoverChoice<T>> = None;
    for mask in 1u32..(1 << sets.len()) {
        let members: Vec<usize> = (0..sets.len()).filter(|i| mask >> i & 1 == 1).collect();
        if members.iter().any(|&i| costs[i].is_none()) {
            continue;
        }
        let mut uncovered = query.clone();
        for &i in &members {
            uncovered = uncovered.and_not(sets[i].0).ok()?;
        }
        if uncovered.count() > 0 {
            continue;
        }
        let cost = members.iter().fold(T::zero(), |a, &i| a + costs[i].unwrap());
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            best = Some(CoverChoice {
                parts: members.iter().map(|&i| (i, sets[i].2)).collect(),
                cost,
            });
        }
    }
    if query.count() == 0 {
        return Some(CoverChoice {
            parts: Vec::new(),
            cost: T::zero(),
        });
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjoint_halves_beat_a_loose_superset() {
        let n = 100;
        let q = Bitmap::from_rows(n, 0..40);
        let left = Bitmap::from_rows(n, 0..20);
        let right = Bitmap::from_rows(n, 20..40);
        let wide = Bitmap::from_rows(n, 0..90);
        let sets = [(&wide, 90, 10, "w"), (&left, 20, 10, "l"), (&right, 20, 10, "r")];
        let g = greedy_cover(&q, &sets, 1.0f64).unwrap();
        assert_eq!(g.parts.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1, 2]);
        let e = exhaustive_cover(&q, &sets, 1.0f64).unwrap();
        assert!((g.cost - e.cost).abs() < 1e-12);
    }

    #[test]
    fn uncoverable_query() {
        let q = Bitmap::from_rows(10, [1, 9]);
        let a = Bitmap::from_rows(10, [1, 2]);
        assert!(greedy_cover(&q, &[(&a, 2, 1, "a")], 1.0f64).is_none());
        assert!(exhaustive_cover(&q, &[(&a, 2, 1, "a")], 1.0f64).is_none());
    }
}
