//! Exact maximum clique over small consistency graphs.
//!
//! Candidate sets are capped well below 32 vertices, so adjacency fits in a
//! bitmask per vertex and a plain branch-and-bound with a popcount bound is
//! exact and fast.

/// Undirected graph on `n < 32` vertices stored as one adjacency mask per
/// vertex. Self loops are ignored.
#[derive(Debug, Clone)]
pub struct MaskGraph {
    n: usize,
    adj: Vec<u32>,
}

impl MaskGraph {
    pub fn new(n: usize) -> Self {
        assert!(n < 32, "mask graph limited to 31 vertices");
        MaskGraph { n, adj: vec![0; n] }
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        self.adj[a] |= 1 << b;
        self.adj[b] |= 1 << a;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest clique, as an ascending vertex list. Ties resolve to the first
    /// clique found when candidates are expanded in ascending vertex order,
    /// which makes the result deterministic for a given graph.
    pub fn max_clique(&self) -> Vec<usize> {
        let all = if self.n == 32 { u32::MAX } else { (1u32 << self.n) - 1 };
        let mut best: u32 = 0;
        self.expand(0, all, &mut best);
        (0..self.n).filter(|&v| best & (1 << v) != 0).collect()
    }

    fn expand(&self, current: u32, mut cands: u32, best: &mut u32) {
        if current.count_ones() + cands.count_ones() <= best.count_ones() {
            return;
        }
        if cands == 0 {
            if current.count_ones() > best.count_ones() {
                *best = current;
            }
            return;
        }
        while cands != 0 {
            if current.count_ones() + cands.count_ones() <= best.count_ones() {
                return;
            }
            let v = cands.trailing_zeros() as usize;
            let bit = 1u32 << v;
            cands &= !bit;
            self.expand(current | bit, cands & self.adj[v], best);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_clique(adj: &[u32], set: u32) -> bool {
        let mut rest = set;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= !(1 << v);
            if set & !(1 << v) & !adj[v] != 0 {
                return false;
            }
        }
        true
    }

    /// Oracle: enumerate every subset and keep the largest clique.
    fn brute_force_max(g: &MaskGraph) -> u32 {
        let mut best = 0u32;
        for set in 0u32..(1 << g.n) {
            if set.count_ones() > best.count_ones() && is_clique(&g.adj, set) {
                best = set;
            }
        }
        best.count_ones()
    }

    #[test]
    fn empty_and_singleton() {
        assert!(MaskGraph::new(0).max_clique().is_empty());
        assert_eq!(MaskGraph::new(1).max_clique(), vec![0]);
    }

    #[test]
    fn triangle_with_pendant() {
        let mut g = MaskGraph::new(4);
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        g.add_edge(0, 2);
        g.add_edge(2, 3);
        assert_eq!(g.max_clique(), vec![0, 1, 2]);
    }

    #[test]
    fn matches_subset_enumeration_on_random_graphs() {
        // Deterministic LCG so the test is reproducible without pulling in an
        // RNG dependency for a fixture.
        let mut state = 0x2545f491_4f6cdd1du64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as u32
        };
        for trial in 0..200 {
            let n = 2 + (next() % 13) as usize;
            let density = 20 + next() % 75;
            let mut g = MaskGraph::new(n);
            for a in 0..n {
                for b in (a + 1)..n {
                    if next() % 100 < density {
                        g.add_edge(a, b);
                    }
                }
            }
            let got = g.max_clique();
            let want = brute_force_max(&g);
            assert_eq!(got.len() as u32, want, "trial {trial}");
            let mask = got.iter().fold(0u32, |m, &v| m | 1 << v);
            assert!(is_clique(&g.adj, mask), "trial {trial} returned non-clique");
        }
    }
}
