use std::collections::VecDeque;

use super::SparseSymmetric;
use crate::error::{Error, Result};

/// Reverse Cuthill–McKee ordering. Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseSymmetric) -> Vec<usize> {
    let n = a.dim();
    let adj: Vec<Vec<usize>> = (0..n).map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect()).collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, mask: &[bool]| -> (usize, usize) {
        // returns (eccentricity, a min-degree node in the last level)
        let mut dist = vec![usize::MAX; n];
        dist[start] = 0;
        let mut q = VecDeque::from([start]);
        let mut last = start;
        while let Some(u) = q.pop_front() {
            for &w in &adj[u] {
                if !mask[w] && dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    q.push_back(w);
                    if dist[w] > dist[last] || (dist[w] == dist[last] && degree[w] < degree[last]) {
                        last = w;
                    }
                }
            }
        }
        (dist[last], last)
    };

    while order.len() < n {
        let seed = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]).unwrap();
        // pseudo-peripheral node
        let mut root = seed;
        let (mut ecc, mut far) = bfs_levels(root, &visited);
        for _ in 0..8 {
            let (e2, f2) = bfs_levels(far, &visited);
            if e2 <= ecc {
                break;
            }
            root = far;
            ecc = e2;
            far = f2;
        }
        let start = order.len();
        visited[root] = true;
        order.push(root);
        let mut head = start;
        while head < order.len() {
            let u = order[head];
            head += 1;
            let mut nbrs: Vec<usize> = adj[u].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factorization stored by rows over the matrix envelope (profile).
/// Fill stays inside the envelope, so a bandwidth-reducing ordering keeps it
/// compact.
#[derive(Clone, Debug)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SparseSymmetric) -> Result<Self> {
        let perm = reverse_cuthill_mckee(a);
        Self::factor_with_ordering(a, perm)
    }

    pub fn factor_with_ordering(a: &SparseSymmetric, perm: Vec<usize>) -> Result<Self> {
        let n = a.dim();
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for (j, _) in a.row(old) {
                first[new] = first[new].min(inv[j]);
            }
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; offset[n]];
        for (new, &old) in perm.iter().enumerate() {
            for (j, v) in a.row(old) {
                let c = inv[j];
                if c <= new {
                    data[offset[new] + c - first[new]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let ri = &data[offset[i] + lo - fi..offset[i] + j - fi];
                let rj = &data[offset[j] + lo - fj..offset[j] + j - fj];
                let s: f64 = ri.iter().zip(rj).map(|(x, y)| x * y).sum();
                let ljj = data[offset[j + 1] - 1];
                let idx = offset[i] + j - fi;
                data[idx] = (data[idx] - s) / ljj;
            }
            let row = &data[offset[i]..offset[i + 1] - 1];
            let d = data[offset[i + 1] - 1] - row.iter().map(|x| x * x).sum::<f64>();
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Numerical(format!("Cholesky factorization failed at pivot {i} (value {d:e})")));
            }
            data[offset[i + 1] - 1] = d.sqrt();
        }
        Ok(EnvelopeCholesky {
            perm,
            first,
            offset,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Stored entries, a proxy for factor memory.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1] - 1];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, x)| l * x).sum();
            y[i] = (y[i] - s) / self.data[self.offset[i + 1] - 1];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            y[i] /= self.data[self.offset[i + 1] - 1];
            let xi = y[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1] - 1];
            for (l, yk) in row.iter().zip(&mut y[fi..i]) {
                *yk -= l * xi;
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = y[new];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{assemble_cotangent_stiffness, assemble_lumped_mass, shapes};

    #[test]
    fn rcm_is_a_permutation() {
        let m = shapes::icosphere(2);
        let s = assemble_cotangent_stiffness(&m).unwrap();
        let mut p = reverse_cuthill_mckee(&s);
        p.sort_unstable();
        assert!(p.iter().enumerate().all(|(i, &j)| i == j));
    }

    #[test]
    fn solves_shifted_laplacian_against_dense() {
        let m = shapes::icosphere(2);
        let s = assemble_cotangent_stiffness(&m).unwrap();
        let mass = assemble_lumped_mass(&m);
        let a = s.add_diagonal(&mass, 0.3);
        let chol = EnvelopeCholesky::factor(&a).unwrap();
        assert!(chol.envelope_size() < a.dim() * a.dim() / 4);
        let b: Vec<f64> = (0..a.dim()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let mut x = b.clone();
        chol.solve_in_place(&mut x);
        let mut r = vec![0.0; a.dim()];
        a.mul_vec(&x, &mut r);
        let err = r.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "residual {err}");
        let dense = a.to_dense().cholesky().unwrap().solve(&nalgebra::DVector::from_vec(b));
        assert!(x.iter().zip(dense.iter()).all(|(u, v)| (u - v).abs() < 1e-9));
    }

    #[test]
    fn rejects_indefinite() {
        let a = SparseSymmetric::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(EnvelopeCholesky::factor(&a), Err(Error::Numerical(_))));
    }
}
