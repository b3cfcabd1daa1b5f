//! Sparse LDLᵀ factorization for the Gauss-Newton normal equations.
//!
//! Up-looking factorization over the upper-triangular pattern with an
//! elimination tree, natural ordering. Graphs stay small enough (a few
//! thousand variables, block-tridiagonal plus loop closures) that fill-in
//! without a reordering pass is acceptable.

use std::collections::BTreeMap;

/// Symmetric matrix assembled from upper-triangle triplets. Duplicate entries
/// accumulate.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    n: usize,
    cols: Vec<BTreeMap<usize, f64>>,
}

impl SymMatrix {
    pub fn new(n: usize) -> Self {
        SymMatrix { n, cols: vec![BTreeMap::new(); n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Adds `v` at (row, col). Only the upper triangle is stored; entries are
    /// mirrored automatically.
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let (r, c) = if row <= col { (row, col) } else { (col, row) };
        *self.cols[c].entry(r).or_insert(0.0) += v;
    }

    /// Scales the diagonal by (1 + lambda). Used for damped retries.
    pub fn damp(&mut self, lambda: f64) {
        for (c, col) in self.cols.iter_mut().enumerate() {
            if let Some(d) = col.get_mut(&c) {
                *d *= 1.0 + lambda;
            }
        }
    }

    fn csc(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut ap = Vec::with_capacity(self.n + 1);
        let mut ai = Vec::new();
        let mut ax = Vec::new();
        ap.push(0);
        for col in &self.cols {
            for (&r, &v) in col {
                ai.push(r);
                ax.push(v);
            }
            ap.push(ai.len());
        }
        (ap, ai, ax)
    }
}

/// LDLᵀ factor. `None` from [`factor`] means a pivot hit zero or went
/// negative, which callers treat as a singular system and answer by damping.
#[derive(Debug)]
pub struct LdlFactor {
    n: usize,
    lp: Vec<usize>,
    lnz: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

pub fn factor(a: &SymMatrix) -> Option<LdlFactor> {
    let n = a.n;
    let (ap, ai, ax) = a.csc();

    // Symbolic pass: elimination tree and column counts of L.
    let mut parent = vec![usize::MAX; n];
    let mut counts = vec![0usize; n];
    let mut flag = vec![usize::MAX; n];
    for k in 0..n {
        flag[k] = k;
        for p in ap[k]..ap[k + 1] {
            let mut i = ai[p];
            while i < k && flag[i] != k {
                if parent[i] == usize::MAX {
                    parent[i] = k;
                }
                counts[i] += 1;
                flag[i] = k;
                i = parent[i];
            }
        }
    }
    let mut lp = vec![0usize; n + 1];
    for k in 0..n {
        lp[k + 1] = lp[k] + counts[k];
    }

    // Numeric pass, up-looking. `lnz[i]` counts entries written to column i so
    // far; columns fill in increasing k, so the written prefix is always the
    // part needed when applying column i.
    let nz = lp[n];
    let mut li = vec![0usize; nz];
    let mut lx = vec![0.0f64; nz];
    let mut lnz = vec![0usize; n];
    let mut d = vec![0.0f64; n];
    let mut y = vec![0.0f64; n];
    let mut path = vec![0usize; n];
    let mut pattern = vec![0usize; n];
    let mut flag = vec![usize::MAX; n];
    for k in 0..n {
        let mut top = n;
        flag[k] = k;
        for p in ap[k]..ap[k + 1] {
            let i0 = ai[p];
            if i0 > k {
                continue;
            }
            y[i0] += ax[p];
            let mut i = i0;
            let mut len = 0;
            while i < k && flag[i] != k {
                path[len] = i;
                len += 1;
                flag[i] = k;
                i = parent[i];
            }
            // Reverse the rootward walk so `pattern[top..]` ends up
            // topologically ordered (descendants first).
            while len > 0 {
                len -= 1;
                top -= 1;
                pattern[top] = path[len];
            }
        }
        let mut dk = y[k];
        y[k] = 0.0;
        for &i in &pattern[top..n] {
            let yi = y[i];
            y[i] = 0.0;
            let l_ki = yi / d[i];
            for q in lp[i]..lp[i] + lnz[i] {
                y[li[q]] -= lx[q] * yi;
            }
            let slot = lp[i] + lnz[i];
            li[slot] = k;
            lx[slot] = l_ki;
            lnz[i] += 1;
            dk -= l_ki * yi;
        }
        if dk <= 0.0 || !dk.is_finite() {
            return None;
        }
        d[k] = dk;
    }
    Some(LdlFactor { n, lp, lnz, li, lx, d })
}

impl LdlFactor {
    /// Solves L D Lᵀ x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        for j in 0..self.n {
            let bj = b[j];
            for q in self.lp[j]..self.lp[j] + self.lnz[j] {
                b[self.li[q]] -= self.lx[q] * bj;
            }
        }
        for j in 0..self.n {
            b[j] /= self.d[j];
        }
        for j in (0..self.n).rev() {
            let mut s = b[j];
            for q in self.lp[j]..self.lp[j] + self.lnz[j] {
                s -= self.lx[q] * b[self.li[q]];
            }
            b[j] = s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense Gaussian elimination oracle with partial pivoting.
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut x = b.to_vec();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
            m.swap(col, piv);
            x.swap(col, piv);
            let p = m[col][col];
            for row in (col + 1)..n {
                let f = m[row][col] / p;
                for c in col..n {
                    m[row][c] -= f * m[col][c];
                }
                x[row] -= f * x[col];
            }
        }
        for col in (0..n).rev() {
            x[col] /= m[col][col];
            for row in 0..col {
                let f = m[row][col];
                x[row] -= f * x[col];
                m[row][col] = 0.0;
            }
        }
        x
    }

    fn random_spd(n: usize, state: &mut u64) -> (SymMatrix, Vec<Vec<f64>>) {
        let next = |s: &mut u64| {
            *s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((*s >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        // SPD via B Bᵀ + n I on a sparse-ish random B.
        let mut bmat = vec![vec![0.0f64; n]; n];
        for row in bmat.iter_mut() {
            for cell in row.iter_mut() {
                if next(state).abs() < 0.4 {
                    *cell = next(state);
                }
            }
        }
        let mut dense = vec![vec![0.0f64; n]; n];
        for r in 0..n {
            for c in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += bmat[r][k] * bmat[c][k];
                }
                dense[r][c] = s + if r == c { n as f64 } else { 0.0 };
            }
        }
        let mut sym = SymMatrix::new(n);
        for r in 0..n {
            for c in r..n {
                if dense[r][c] != 0.0 {
                    sym.add(r, c, dense[r][c]);
                }
            }
        }
        (sym, dense)
    }

    #[test]
    fn solves_diagonal() {
        let mut a = SymMatrix::new(3);
        for i in 0..3 {
            a.add(i, i, 2.0);
        }
        let f = factor(&a).unwrap();
        let mut b = vec![2.0, 4.0, 6.0];
        f.solve(&mut b);
        assert_eq!(b, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn matches_dense_elimination() {
        let mut state = 0x9e3779b97f4a7c15u64;
        for n in [1usize, 2, 3, 5, 8, 13, 21, 40] {
            let (sym, dense) = random_spd(n, &mut state);
            let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() + 1.0).collect();
            let want = dense_solve(&dense, &b);
            let f = factor(&sym).expect("SPD matrix must factor");
            let mut got = b.clone();
            f.solve(&mut got);
            for i in 0..n {
                assert!(
                    (got[i] - want[i]).abs() < 1e-8 * (1.0 + want[i].abs()),
                    "n={n} i={i}: {} vs {}",
                    got[i],
                    want[i]
                );
            }
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = SymMatrix::new(2);
        a.add(0, 0, 1.0);
        a.add(1, 1, -1.0);
        assert!(factor(&a).is_none());
    }

    #[test]
    fn damping_restores_solvability() {
        // Rank-1 system; damping the diagonal makes it factorable.
        let mut a = SymMatrix::new(2);
        a.add(0, 0, 1.0);
        a.add(0, 1, 1.0);
        a.add(1, 1, 1.0);
        for _ in 0..10 {
            if factor(&a).is_some() {
                return;
            }
            a.damp(10.0);
        }
        panic!("damping never produced a factorable system");
    }
}
