//! Exact 0/1 knapsack over integer costs.

use serde::{Deserialize, Serialize};

/// An advertising channel: integer cost, real-valued exposure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub cost: i64,
    pub exposure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Chosen item indices, ascending.
    pub subset: Vec<usize>,
    pub total_cost: i64,
    pub total_exposure: f64,
}

/// Maximum-exposure subset with total cost at most `budget`.
///
/// Among optimal subsets the lexicographically smallest index sequence is
/// returned. Items with non-positive cost are never selected.
pub fn knapsack_opt(budget: i64, items: &[(i64, f64)]) -> Selection {
    let n = items.len();
    let cap = budget
        .max(0)
        .min(items.iter().map(|(c, _)| (*c).max(0)).sum()) as usize;
    // best[i][b]: best value using items i.. with capacity b.
    let mut best = vec![vec![0.0f64; cap + 1]; n + 1];
    for i in (0..n).rev() {
        let (cost, value) = items[i];
        for b in 0..=cap {
            let skip = best[i + 1][b];
            best[i][b] = if cost > 0 && cost as usize <= b {
                let take = value + best[i + 1][b - cost as usize];
                if take > skip {
                    take
                } else {
                    skip
                }
            } else {
                skip
            };
        }
    }
    let mut subset = Vec::new();
    let mut b = cap;
    for i in 0..n {
        if best[i][b] == 0.0 {
            break;
        }
        let (cost, value) = items[i];
        if cost > 0 && cost as usize <= b && value + best[i + 1][b - cost as usize] == best[i][b] {
            subset.push(i);
            b -= cost as usize;
        }
    }
    let total_cost = subset.iter().map(|&i| items[i].0).sum();
    Selection {
        total_exposure: best[0][cap],
        subset,
        total_cost,
    }
}

/// Convenience wrapper over named channels.
pub fn best_channels(budget: i64, channels: &[Channel]) -> Selection {
    let items: Vec<(i64, f64)> = channels.iter().map(|c| (c.cost, c.exposure)).collect();
    knapsack_opt(budget, &items)
}

/// Ratio-greedy selection: highest exposure per unit cost first, ties by
/// index, skipping channels that no longer fit.
pub fn greedy_by_ratio(budget: i64, channels: &[Channel]) -> Selection {
    let mut order: Vec<usize> = (0..channels.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = channels[a].exposure / channels[a].cost as f64;
        let rb = channels[b].exposure / channels[b].cost as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut left = budget;
    let mut subset = Vec::new();
    for i in order {
        if channels[i].cost > 0 && channels[i].cost <= left {
            left -= channels[i].cost;
            subset.push(i);
        }
    }
    subset.sort_unstable();
    Selection {
        total_cost: subset.iter().map(|&i| channels[i].cost).sum(),
        total_exposure: subset.iter().map(|&i| channels[i].exposure).sum(),
        subset,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_hand_case() {
        let s = knapsack_opt(10, &[(6, 30.0), (5, 25.0), (4, 20.0)]);
        assert_eq!(s.subset, vec![0, 2]);
        assert_eq!(s.total_exposure, 50.0);
        assert_eq!(s.total_cost, 10);
    }

    #[test]
    fn degenerate_budgets() {
        let items = [(3, 1.5), (4, 2.0)];
        assert_eq!(knapsack_opt(0, &items).subset, Vec::<usize>::new());
        assert_eq!(knapsack_opt(100, &items).subset, vec![0, 1]);
        assert_eq!(knapsack_opt(5, &[]).total_exposure, 0.0);
    }

    #[test]
    fn prefers_lexicographically_smallest_tie() {
        let s = knapsack_opt(5, &[(5, 10.0), (2, 5.0), (3, 5.0)]);
        assert_eq!(s.subset, vec![0]);
    }

    #[test]
    fn greedy_can_be_beaten() {
        let ch = |name: &str, cost, exposure| Channel {
            name: name.into(),
            cost,
            exposure,
        };
        let channels = vec![ch("a", 6, 30.0), ch("b", 5, 24.0), ch("c", 5, 24.0)];
        assert_eq!(greedy_by_ratio(10, &channels).total_exposure, 30.0);
        assert_eq!(best_channels(10, &channels).total_exposure, 48.0);
    }
}
