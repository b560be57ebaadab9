//! Exact maximum-total-profit assignment between two box sets.
//!
//! Small instances (the common case: a handful of boxes per image index)
//! are solved by bitmask dynamic programming over the smaller side, which
//! also yields the lexicographically smallest optimal pairing. Oversized
//! instances fall back to an augmenting-path solver on a padded square
//! matrix; still exact and deterministic, without the canonical tie-break.

/// A maximum-total assignment. Pairs carry only strictly positive profit
/// and are sorted by `(row, col)`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

const MAX_MASK_BITS: usize = 20;
const MAX_DP_STATES: usize = 1 << 22;

pub(crate) fn max_profit_assignment(profit: &[Vec<f64>]) -> Assignment {
    let n = profit.len();
    let m = profit.first().map(|r| r.len()).unwrap_or(0);
    if n == 0 || m == 0 {
        return Assignment {
            pairs: Vec::new(),
            total: 0.0,
        };
    }
    let pairs = if m <= MAX_MASK_BITS && (n + 1).saturating_mul(1 << m) <= MAX_DP_STATES {
        assignment_dp(profit)
    } else if n <= MAX_MASK_BITS && (m + 1).saturating_mul(1 << n) <= MAX_DP_STATES {
        let transposed: Vec<Vec<f64>> = (0..m)
            .map(|j| (0..n).map(|i| profit[i][j]).collect())
            .collect();
        assignment_dp(&transposed)
            .into_iter()
            .map(|(j, i)| (i, j))
            .collect()
    } else {
        assignment_hungarian(profit)
    };
    finish(profit, pairs)
}

fn finish(profit: &[Vec<f64>], mut pairs: Vec<(usize, usize)>) -> Assignment {
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(i, j)| profit[i][j]).sum();
    Assignment { pairs, total }
}

/// Bitmask DP over columns; rows are visited in ascending order.
///
/// Reconstruction prefers pairing over skipping and the smallest column on
/// value ties; because it re-evaluates the exact sums stored in the memo,
/// the float comparisons are exact and the returned pairing is the
/// lexicographically smallest optimal one (zero-profit pairs excluded).
fn assignment_dp(profit: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = profit.len();
    let m = profit[0].len();
    let full = 1usize << m;
    let mut memo = vec![0.0f64; (n + 1) * full];
    for i in (0..n).rev() {
        for mask in 0..full {
            let mut best = memo[(i + 1) * full + mask];
            for j in 0..m {
                if mask & (1 << j) == 0 {
                    let p = profit[i][j];
                    if p > 0.0 {
                        let v = p + memo[(i + 1) * full + (mask | (1 << j))];
                        if v > best {
                            best = v;
                        }
                    }
                }
            }
            memo[i * full + mask] = best;
        }
    }

    let mut pairs = Vec::new();
    let mut mask = 0usize;
    for i in 0..n {
        let target = memo[i * full + mask];
        for j in 0..m {
            if mask & (1 << j) == 0 {
                let p = profit[i][j];
                if p > 0.0 && p + memo[(i + 1) * full + (mask | (1 << j))] == target {
                    pairs.push((i, j));
                    mask |= 1 << j;
                    break;
                }
            }
        }
    }
    pairs
}

/// Shortest-augmenting-path assignment on a padded square cost matrix.
fn assignment_hungarian(profit: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = profit.len();
    let m = profit[0].len();
    let size = n.max(m);
    let mut max_p = 0.0f64;
    for row in profit {
        for &p in row {
            if p > max_p {
                max_p = p;
            }
        }
    }
    // Minimization on cost = max_p - profit; padding cells cost max_p.
    let cost = |i: usize, j: usize| -> f64 {
        if i < n && j < m {
            max_p - profit[i][j]
        } else {
            max_p
        }
    };

    // Rows and the virtual column 0 are 1-based; p[j] is the row matched
    // to column j, 0 meaning unmatched.
    let mut u = vec![0.0f64; size + 1];
    let mut v = vec![0.0f64; size + 1];
    let mut p = vec![0usize; size + 1];
    let mut way = vec![0usize; size + 1];
    for i in 1..=size {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; size + 1];
        let mut used = vec![false; size + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=size {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=size {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs = Vec::new();
    for j in 1..=size {
        let row = p[j];
        if row >= 1 && row <= n && j <= m && profit[row - 1][j - 1] > 0.0 {
            pairs.push((row - 1, j - 1));
        }
    }
    pairs
}
