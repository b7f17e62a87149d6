//! Dense O(n^3) Hungarian solver with row/column potentials.

/// Cap on tied optimal matchings examined when breaking ties.
const TIE_ENUMERATION_LIMIT: usize = 50_000;

/// Minimum-cost perfect matching on a square cost matrix given row-major.
/// Returns `assignment[row] = column`.
///
/// Distinct matchings that are tied in exact arithmetic usually differ in
/// the last bits of their floating-point totals. Among the matchings that use
/// only tight edges of the final dual, the one with the smallest row-order
/// [`total`] is returned, so the result agrees bit for bit with an exhaustive
/// search whenever the tie set is small enough to enumerate.
pub fn solve(n: usize, costs: &[f64]) -> Vec<usize> {
    assert_eq!(costs.len(), n * n);
    if n == 0 {
        return Vec::new();
    }
    let (assignment, u, v) = hungarian(n, costs);
    let scale = costs.iter().fold(1.0f64, |m, c| m.max(c.abs()));
    let tol = 64.0 * f64::EPSILON * scale * n as f64;
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| costs[i * n + j] - u[i] - v[j] <= tol).collect())
        .collect();
    let mut best = (total(n, costs, &assignment), assignment);
    let mut current = vec![0usize; n];
    let mut taken = vec![false; n];
    let mut budget = TIE_ENUMERATION_LIMIT;
    enumerate_tight(0, n, costs, &tight, &mut current, &mut taken, &mut budget, &mut best);
    best.1
}

#[allow(clippy::too_many_arguments)]
fn enumerate_tight(
    row: usize,
    n: usize,
    costs: &[f64],
    tight: &[Vec<usize>],
    current: &mut Vec<usize>,
    taken: &mut Vec<bool>,
    budget: &mut usize,
    best: &mut (f64, Vec<usize>),
) {
    if *budget == 0 {
        return;
    }
    if row == n {
        *budget -= 1;
        let t = total(n, costs, current);
        if t < best.0 {
            *best = (t, current.clone());
        }
        return;
    }
    for &j in &tight[row] {
        if !taken[j] {
            taken[j] = true;
            current[row] = j;
            enumerate_tight(row + 1, n, costs, tight, current, taken, budget, best);
            taken[j] = false;
        }
    }
}

/// Returns the assignment and the row and column potentials, 0-based.
fn hungarian(n: usize, costs: &[f64]) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = costs[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
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

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    (assignment, u[1..].to_vec(), v[1..].to_vec())
}

/// Sum of `costs[i][assignment[i]]` in row order.
pub fn total(n: usize, costs: &[f64], assignment: &[usize]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| costs[i * n + j])
        .sum()
}
