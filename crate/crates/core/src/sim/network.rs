use serde::{Deserialize, Serialize};

use crate::error::{FusionError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    Line,
    Ring,
    Star,
    Full,
    Custom,
}

/// Undirected, connected sensor network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkTopology {
    neighbours: Vec<Vec<usize>>,
}

impl NetworkTopology {
    pub fn build(kind: TopologyKind, n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(FusionError::InvalidConfig(
                "network needs at least one sensor".into(),
            ));
        }
        let generated: Vec<(usize, usize)> = match kind {
            TopologyKind::Line => (1..n).map(|i| (i - 1, i)).collect(),
            TopologyKind::Ring if n > 2 => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            TopologyKind::Ring => (1..n).map(|i| (i - 1, i)).collect(),
            TopologyKind::Star => (1..n).map(|i| (0, i)).collect(),
            TopologyKind::Full => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
            TopologyKind::Custom => edges.to_vec(),
        };
        Self::from_edges(n, &generated)
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut neighbours = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(FusionError::InvalidConfig(format!(
                    "invalid link ({a}, {b}) for {n} sensors"
                )));
            }
            neighbours[a].push(b);
            neighbours[b].push(a);
        }
        for nb in &mut neighbours {
            nb.sort_unstable();
            nb.dedup();
        }
        let topo = Self { neighbours };
        if !topo.is_connected() {
            return Err(FusionError::InvalidConfig(
                "sensor network is not connected".into(),
            ));
        }
        Ok(topo)
    }

    pub fn len(&self) -> usize {
        self.neighbours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbours.is_empty()
    }

    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.neighbours[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbours[i].len()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &self.neighbours[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Metropolis weights of node `i` over `[i, neighbours ascending]`:
    /// `ω_ij = 1 / (1 + max(d_i, d_j))` and the remainder on `i` itself.
    pub fn metropolis_weights(&self, i: usize) -> Vec<f64> {
        let di = self.degree(i);
        let others: Vec<f64> = self.neighbours[i]
            .iter()
            .map(|&j| 1.0 / (1 + di.max(self.degree(j))) as f64)
            .collect();
        let own = 1.0 - others.iter().sum::<f64>();
        std::iter::once(own).chain(others).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metropolis_rows_are_stochastic() {
        for kind in [
            TopologyKind::Line,
            TopologyKind::Ring,
            TopologyKind::Star,
            TopologyKind::Full,
        ] {
            for n in 1..7 {
                let t = NetworkTopology::build(kind, n, &[]).unwrap();
                for i in 0..n {
                    let w = t.metropolis_weights(i);
                    assert_eq!(w.len(), t.degree(i) + 1);
                    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    assert!(w.iter().all(|&x| x > 0.0));
                }
            }
        }
    }

    #[test]
    fn metropolis_is_symmetric() {
        let t = NetworkTopology::build(
            TopologyKind::Custom,
            6,
            &[(4, 0), (4, 2), (4, 3), (4, 5), (0, 1)],
        )
        .unwrap();
        let weight = |i: usize, j: usize| {
            let pos = t.neighbours(i).iter().position(|&k| k == j).unwrap();
            t.metropolis_weights(i)[pos + 1]
        };
        for i in 0..6 {
            for &j in t.neighbours(i) {
                assert_eq!(weight(i, j), weight(j, i));
            }
        }
        let w1 = t.metropolis_weights(1);
        assert!((w1[0] - 2.0 / 3.0).abs() < 1e-15 && (w1[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn disconnected_rejected() {
        assert!(NetworkTopology::build(TopologyKind::Custom, 3, &[(0, 1)]).is_err());
        assert!(NetworkTopology::from_edges(2, &[(0, 0)]).is_err());
    }
}
