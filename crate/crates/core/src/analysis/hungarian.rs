//! Exact minimum-cost perfect matching on a square cost matrix.
//!
//! This is the classic O(n^3) Hungarian algorithm in its potential /
//! shortest-augmenting-path form. It is deliberately hand-rolled: the
//! alignment instruments depend on exact optimality of each assignment
//! subproblem, so the solver is kept small, dependency-free, and easy to
//! cross-check against brute-force enumeration in tests.

use crate::error::{Error, Result};

/// Result of a linear assignment: `assignment[row] = column`, plus the total
/// cost of the matching.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub assignment: Vec<usize>,
    pub cost: f64,
}

fn check_matrix(cost: &[Vec<f64>]) -> Result<usize> {
    let n = cost.len();
    if n == 0 {
        return Err(Error::InvalidParameter(
            "assignment needs a non-empty cost matrix".into(),
        ));
    }
    for (i, row) in cost.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidParameter(format!(
                "cost matrix must be square: row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        for (j, &c) in row.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "cost matrix entry ({i}, {j}) is not finite"
                )));
            }
        }
    }
    Ok(n)
}

/// Solve the assignment problem: pick one column per row (a permutation)
/// minimizing the summed cost. Errors on empty, non-square, or non-finite
/// input. Runs in O(n^3) time and O(n) extra space per augmentation.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Assignment> {
    let n = check_matrix(cost)?;

    // Potentials for rows (u) and columns (v), 1-based with a dummy slot 0.
    // `matched_row[j]` is the row currently matched to column j (0 = none).
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        // Grow an alternating tree from row i until a free column is found.
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // Flip matched edges along the augmenting path.
        while j0 != 0 {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if matched_row[j] > 0 {
            assignment[matched_row[j] - 1] = j - 1;
        }
    }
    let total = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .sum();
    Ok(Assignment {
        assignment,
        cost: total,
    })
}
