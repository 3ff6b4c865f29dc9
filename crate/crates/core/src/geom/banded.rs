//! Sparse matrices with a reverse Cuthill–McKee band LU (no pivoting).
//!
//! Every system solved here is either positive definite or a small perturbation of a
//! Laplacian-like M-matrix, so unpivoted elimination is stable enough.

use nalgebra::ComplexField;
use std::collections::{BTreeMap, VecDeque};

/// Row-wise sparse matrix.
#[derive(Clone, Debug)]
pub struct Sparse<T> {
    pub n: usize,
    pub rows: Vec<BTreeMap<usize, T>>,
}

impl<T: ComplexField + Copy> Sparse<T> {
    pub fn new(n: usize) -> Self {
        Sparse { n, rows: vec![BTreeMap::new(); n] }
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let e = self.rows[i].entry(j).or_insert(T::zero());
        *e += v;
    }

    pub fn mul(&self, x: &[T]) -> Vec<T> {
        self.rows.iter().map(|r| r.iter().fold(T::zero(), |s, (&j, &v)| s + v * x[j])).collect()
    }

    /// x ↦ Aᴴx.
    pub fn mul_adjoint(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        for (i, r) in self.rows.iter().enumerate() {
            for (&j, &v) in r {
                out[j] += v.conjugate() * x[i];
            }
        }
        out
    }

    pub fn axpy(&self, alpha: T, other: &Sparse<T>) -> Sparse<T> {
        let mut out = self.clone();
        for (i, r) in other.rows.iter().enumerate() {
            for (&j, &v) in r {
                out.add(i, j, alpha * v);
            }
        }
        out
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<T> {
        let mut m = nalgebra::DMatrix::from_element(self.n, self.n, T::zero());
        for (i, r) in self.rows.iter().enumerate() {
            for (&j, &v) in r {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn lu(&self) -> Option<BandLu<T>> {
        BandLu::new(self)
    }
}

/// Reverse Cuthill–McKee order of the symmetric pattern; returns new → old.
pub fn rcm<T>(a: &Sparse<T>) -> Vec<usize> {
    let n = a.n;
    let mut nb: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, r) in a.rows.iter().enumerate() {
        for &j in r.keys() {
            if i != j {
                nb[i].push(j);
                nb[j].push(i);
            }
        }
    }
    for v in nb.iter_mut() {
        v.sort_unstable();
        v.dedup();
    }
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n).filter(|&v| !seen[v]).min_by_key(|&v| nb[v].len()).unwrap();
        seen[start] = true;
        let mut q = VecDeque::from([start]);
        while let Some(v) = q.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = nb[v].iter().copied().filter(|&w| !seen[w]).collect();
            next.sort_by_key(|&w| nb[w].len());
            for w in next {
                seen[w] = true;
                q.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

pub struct BandLu<T> {
    n: usize,
    b: usize,
    perm: Vec<usize>,
    data: Vec<T>,
}

impl<T: ComplexField + Copy> BandLu<T> {
    fn new(a: &Sparse<T>) -> Option<Self> {
        let n = a.n;
        let perm = rcm(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut b = 0;
        for (i, r) in a.rows.iter().enumerate() {
            for &j in r.keys() {
                b = b.max(inv[i].abs_diff(inv[j]));
            }
        }
        let w = 2 * b + 1;
        let mut data = vec![T::zero(); n * w];
        for (i, r) in a.rows.iter().enumerate() {
            for (&j, &v) in r {
                let (pi, pj) = (inv[i], inv[j]);
                data[pi * w + pj + b - pi] += v;
            }
        }
        for k in 0..n {
            let piv = data[k * w + b];
            if piv == T::zero() || !piv.is_finite() {
                return None;
            }
            let end = (k + b + 1).min(n);
            for i in k + 1..end {
                let lik = data[i * w + k + b - i] / piv;
                data[i * w + k + b - i] = lik;
                if lik == T::zero() {
                    continue;
                }
                for j in k + 1..end {
                    let akj = data[k * w + j + b - k];
                    data[i * w + j + b - i] -= lik * akj;
                }
            }
        }
        Some(BandLu { n, b, perm, data })
    }

    pub fn bandwidth(&self) -> usize {
        self.b
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let (n, b) = (self.n, self.b);
        let w = 2 * b + 1;
        let mut y: Vec<T> = self.perm.iter().map(|&o| rhs[o]).collect();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(b)..i {
                s -= self.data[i * w + k + b - i] * y[k];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..(i + b + 1).min(n) {
                s -= self.data[i * w + j + b - i] * y[j];
            }
            y[i] = s / self.data[i * w + b];
        }
        let mut x = vec![T::zero(); n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_lu_solves_a_grid_laplacian() {
        let n = 30;
        let mut a = Sparse::<f64>::new(n * n);
        for i in 0..n {
            for j in 0..n {
                let v = i * n + j;
                a.add(v, v, 4.5);
                for (di, dj) in [(1, 0), (0, 1)] {
                    let w = ((i + di) % n) * n + (j + dj) % n;
                    a.add(v, w, -1.0);
                    a.add(w, v, -1.0);
                }
            }
        }
        let x: Vec<f64> = (0..n * n).map(|i| (i as f64 * 0.1).sin()).collect();
        let b = a.mul(&x);
        let lu = a.lu().unwrap();
        let y = lu.solve(&b);
        let err = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        assert!(lu.bandwidth() < 3 * n);
    }
}
