use nalgebra::DVector;

/// Minimum-cost assignment of every row to a distinct column of a
/// `rows x cols` cost matrix (row-major, `rows <= cols`). Returns the column
/// of each row. Shortest augmenting path with potentials, `O(rows² cols)`.
pub fn hungarian(cost: &[f64], rows: usize, cols: usize) -> Vec<usize> {
    assert!(rows <= cols, "need rows <= cols");
    assert_eq!(cost.len(), rows * cols);
    if rows == 0 {
        return Vec::new();
    }
    // 1-based arrays; index 0 is the virtual start column.
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * cols + j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; rows];
    for j in 1..=cols {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// OSPA distance of order `p` with cut-off `c` between two point sets,
/// using the Euclidean distance on the first `min(len)` coordinates.
pub fn ospa(x: &[DVector<f64>], y: &[DVector<f64>], cutoff: f64, order: f64) -> f64 {
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let (m, n) = (small.len(), large.len());
    if n == 0 {
        return 0.0;
    }
    let cost: Vec<f64> = small
        .iter()
        .flat_map(|a| {
            large.iter().map(move |b| {
                let k = a.len().min(b.len());
                let d = (a.rows(0, k) - b.rows(0, k)).norm();
                d.min(cutoff).powf(order)
            })
        })
        .collect();
    let assignment = hungarian(&cost, m, n);
    let matched: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    let penalty = cutoff.powf(order) * (n - m) as f64;
    ((matched + penalty) / n as f64).powf(1.0 / order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(cost: &[f64], rows: usize, cols: usize) -> f64 {
        fn go(i: usize, rows: usize, cols: usize, cost: &[f64], used: &mut Vec<bool>) -> f64 {
            if i == rows {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..cols {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[i * cols + j] + go(i + 1, rows, cols, cost, used));
                    used[j] = false;
                }
            }
            best
        }
        go(0, rows, cols, cost, &mut vec![false; cols])
    }

    #[test]
    fn hungarian_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let rows = rng.random_range(0..6);
            let cols = rng.random_range(rows.max(1)..7);
            let cost: Vec<f64> = (0..rows * cols)
                .map(|_| rng.random_range(0.0..10.0))
                .collect();
            let a = hungarian(&cost, rows, cols);
            let mut seen = a.clone();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), rows);
            let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i * cols + j]).sum();
            assert!((total - brute_force(&cost, rows, cols)).abs() < 1e-9);
        }
    }

    fn pts(v: &[(f64, f64)]) -> Vec<DVector<f64>> {
        v.iter()
            .map(|&(a, b)| DVector::from_vec(vec![a, b]))
            .collect()
    }

    #[test]
    fn ospa_basic_values() {
        assert_eq!(ospa(&[], &[], 100.0, 2.0), 0.0);
        assert_eq!(ospa(&pts(&[(0.0, 0.0)]), &[], 100.0, 2.0), 100.0);
        let x = pts(&[(0.0, 0.0), (10.0, 0.0)]);
        assert!(ospa(&x, &x, 100.0, 2.0).abs() < 1e-12);
        // one point 3-4-5 away, one missing
        let y = pts(&[(3.0, 4.0)]);
        let expect = ((25.0 + 100.0f64.powi(2)) / 2.0).sqrt();
        assert!((ospa(&x, &y, 100.0, 2.0) - expect).abs() < 1e-9);
        assert!((ospa(&y, &x, 100.0, 2.0) - expect).abs() < 1e-9);
    }

    #[test]
    fn ospa_is_bounded_by_cutoff() {
        let x = pts(&[(0.0, 0.0), (1e4, 0.0)]);
        let y = pts(&[(5e3, 5e3)]);
        let d = ospa(&x, &y, 50.0, 1.0);
        assert!((d - 50.0).abs() < 1e-12);
    }
}
