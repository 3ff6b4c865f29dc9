//! Quadratic differentials, harmonic Beltrami differentials and Weil–Petersson pairings.
//!
//! A [`QuadDiff`] stores per face the coefficient of the differential in an orthonormal
//! frame of a reference metric `c` whose first axis is the face's first edge. The
//! holomorphic space is the near-kernel of a piecewise-linear ∂̄ operator on vertex values
//! carried in cone-rescaled vertex frames.

use crate::error::{LabError, Result};
use crate::geom::banded::Sparse;
use crate::geom::mat2::{self, M2};
use crate::geom::ops::{face_areas, tri_angles};
use crate::geom::{MetricField, OperatorField, SurfaceMesh};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadDiff {
    pub values: Vec<C64>,
    /// Optional quadratic nodal values (vertices then edge midpoints) in node frames.
    pub nodes: Option<Vec<C64>>,
}

impl QuadDiff {
    pub fn zero(n: usize) -> Self {
        QuadDiff { values: vec![C64::new(0.0, 0.0); n], nodes: None }
    }

    pub fn from_values(values: Vec<C64>) -> Self {
        QuadDiff { values, nodes: None }
    }

    pub fn scale(&self, s: C64) -> Self {
        QuadDiff {
            values: self.values.iter().map(|v| v * s).collect(),
            nodes: self.nodes.as_ref().map(|n| n.iter().map(|v| v * s).collect()),
        }
    }

    pub fn add(&self, o: &QuadDiff) -> Self {
        let nodes = match (&self.nodes, &o.nodes) {
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x + y).collect()),
            _ => None,
        };
        QuadDiff { values: self.values.iter().zip(&o.values).map(|(a, b)| a + b).collect(), nodes }
    }

    /// Σ cᵢ qᵢ.
    pub fn combine(basis: &[QuadDiff], coeffs: &[C64]) -> Self {
        let mut out = basis[0].scale(C64::new(0.0, 0.0));
        for (q, c) in basis.iter().zip(coeffs) {
            out = out.add(&q.scale(*c));
        }
        out
    }

    /// Σ xᵢ qᵢ for real coordinates x = (Re c₁, Im c₁, Re c₂, ...).
    pub fn from_real(basis: &[QuadDiff], x: &[f64]) -> Self {
        let c: Vec<C64> = x.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
        Self::combine(basis, &c)
    }
}

/// Operator matrix of a Beltrami coefficient μ in an orthonormal frame.
pub fn beltrami_matrix(mu: C64) -> M2 {
    M2::new(mu.re, mu.im, mu.im, -mu.re)
}

/// Orthonormal frame of c per face, first axis along edge 0: columns are chart vectors.
pub fn frames(mesh: &SurfaceMesh, c: &MetricField) -> Vec<M2> {
    (0..mesh.face_count())
        .map(|f| {
            let g = &c.values[f];
            let d = mesh.edge_vec(f, 0);
            let n = mat2::quad(g, d).sqrt();
            let e1 = nalgebra::Vector2::new(d[0] / n, d[1] / n);
            let e2 = mat2::j_of(g) * e1;
            M2::from_columns(&[e1, e2])
        })
        .collect()
}

/// Re φ as a symmetric bilinear form in chart coordinates.
pub fn re_tensor(mesh: &SurfaceMesh, q: &QuadDiff, c: &MetricField) -> MetricField {
    let fr = frames(mesh, c);
    MetricField::variation(
        fr.iter()
            .zip(&q.values)
            .map(|(p, v)| {
                let pi = p.try_inverse().expect("frame");
                pi.transpose() * beltrami_matrix(v.conj()) * pi
            })
            .collect(),
    )
}

/// Recover per-face coefficients from a symmetric form (its trace-free part w.r.t. c).
pub fn from_tensor(mesh: &SurfaceMesh, r: &MetricField, c: &MetricField) -> QuadDiff {
    let fr = frames(mesh, c);
    QuadDiff::from_values(
        fr.iter()
            .zip(&r.values)
            .map(|(p, m)| {
                let iso = p.transpose() * m * p;
                C64::new(0.5 * (iso[(0, 0)] - iso[(1, 1)]), -0.5 * (iso[(0, 1)] + iso[(1, 0)]))
            })
            .collect(),
    )
}

/// ν_φ: the h-self-adjoint operator with Re φ(x, y) = h(ν x, y), frames taken from h.
pub fn harmonic_beltrami(mesh: &SurfaceMesh, q: &QuadDiff, h: &MetricField) -> OperatorField {
    let r = re_tensor(mesh, q, h);
    OperatorField {
        values: h.values.iter().zip(&r.values).map(|(g, m)| g.try_inverse().expect("metric") * m).collect(),
    }
}

/// ⟨q1, q2⟩ = ∫ q1 q̄2 da_h; real part g_WP, imaginary part ω_WP.
pub fn hermitian(mesh: &SurfaceMesh, q1: &QuadDiff, q2: &QuadDiff, h: &MetricField) -> C64 {
    face_areas(mesh, h).iter().zip(q1.values.iter().zip(&q2.values)).map(|(a, (x, y))| x * y.conj() * a).sum()
}

/// (g_WP, ω_WP) computed from the operator traces ½∫tr(νν') and ½∫tr(Jνν').
pub fn wp_products(mesh: &SurfaceMesh, q1: &QuadDiff, q2: &QuadDiff, h: &MetricField) -> (f64, f64) {
    let n1 = harmonic_beltrami(mesh, q1, h);
    let n2 = harmonic_beltrami(mesh, q2, h);
    let j = h.j();
    let areas = face_areas(mesh, h);
    let mut g = 0.0;
    let mut w = 0.0;
    for f in 0..mesh.face_count() {
        let p = n1.values[f] * n2.values[f];
        g += 0.5 * p.trace() * areas[f];
        w += 0.5 * (j.values[f] * p).trace() * areas[f];
    }
    (g, w)
}

/// Geometry of the quadratic (P2) ∂̄ operator for a reference metric.
///
/// Nodes are the vertices (in cone-rescaled vertex frames) followed by the edge
/// midpoints (in frames along the edge). Local node order on a face is
/// corners 0, 1, 2 then the midpoints of local edges 0, 1, 2.
pub struct DbarGeometry {
    pub nv: usize,
    /// Global node of each local node.
    pub node: Vec<[usize; 6]>,
    /// Face-frame value = node value × rot.
    pub rot: Vec<[C64; 6]>,
    /// ∂̄λ_k in the face's orthonormal frame.
    pub grad: Vec<[C64; 3]>,
    pub face_area: Vec<f64>,
}

fn p2_poly(i: usize) -> Vec<(f64, [u32; 3])> {
    let e = |k: usize, p: u32| {
        let mut x = [0; 3];
        x[k] = p;
        x
    };
    if i < 3 {
        vec![(2.0, e(i, 2)), (-1.0, e(i, 1))]
    } else {
        let k = i - 3;
        let mut x = [0; 3];
        x[k] = 1;
        x[(k + 1) % 3] = 1;
        vec![(4.0, x)]
    }
}

fn fact(n: u32) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// ∫ N_i N_j over a triangle of unit area.
fn p2_mass(i: usize, j: usize) -> f64 {
    let mut s = 0.0;
    for (ca, a) in p2_poly(i) {
        for (cb, b) in p2_poly(j) {
            let x = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
            s += ca * cb * 2.0 * fact(x[0]) * fact(x[1]) * fact(x[2]) / fact(x[0] + x[1] + x[2] + 2);
        }
    }
    s
}

impl DbarGeometry {
    pub fn new(mesh: &SurfaceMesh, c: &MetricField) -> Self {
        let fr = frames(mesh, c);
        let sq = c.edge_sq(mesh);
        let face_area = face_areas(mesh, c);
        let nv = mesh.vertex_count;
        let z: Vec<[C64; 3]> = (0..mesh.face_count())
            .map(|f| {
                let pi = fr[f].try_inverse().expect("frame");
                mesh.chart[f].map(|p| {
                    let v = pi * nalgebra::Vector2::new(p[0], p[1]);
                    C64::new(v[0], v[1])
                })
            })
            .collect();
        let one = C64::new(1.0, 0.0);
        let mut rot = vec![[one; 6]; mesh.face_count()];
        for star in mesh.vertex_stars() {
            let angles: Vec<f64> = star.iter().map(|&(f, k)| tri_angles(sq[f])[k]).collect();
            let cone: f64 = angles.iter().sum();
            let mut psi = 0.0;
            for (&(f, k), a) in star.iter().zip(&angles) {
                let beta = (z[f][(k + 1) % 3] - z[f][k]).arg();
                rot[f][k] = C64::from_polar(1.0, 2.0 * (psi - beta));
                psi += a * 2.0 * PI / cone;
            }
        }
        let mut node = vec![[0; 6]; mesh.face_count()];
        for f in 0..mesh.face_count() {
            for k in 0..3 {
                node[f][k] = mesh.faces[f][k];
                node[f][3 + k] = nv + mesh.edge_of[f][k];
                let beta = (z[f][(k + 1) % 3] - z[f][k]).arg();
                rot[f][3 + k] = C64::from_polar(1.0, -2.0 * beta);
            }
        }
        let grad = z
            .iter()
            .map(|zz| {
                // λ = A + B z + C z̄ through the corners; C is ∂̄λ
                let m = nalgebra::Matrix3::from_fn(|r, col| match col {
                    0 => one,
                    1 => zz[r],
                    _ => zz[r].conj(),
                });
                let inv = m.try_inverse().expect("degenerate face");
                [inv[(2, 0)], inv[(2, 1)], inv[(2, 2)]]
            })
            .collect();
        DbarGeometry { nv, node, rot, grad, face_area }
    }

    pub fn node_count(&self) -> usize {
        self.nv + self.node.len() * 3 / 2
    }

    /// ∂̄ of local basis function `i` at corner `j`.
    fn dbar_at(&self, f: usize, i: usize, j: usize) -> C64 {
        let g = &self.grad[f];
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        if i < 3 {
            g[i] * (4.0 * d(i, j) - 1.0)
        } else {
            let k = i - 3;
            let k1 = (k + 1) % 3;
            (g[k] * d(k1, j) + g[k1] * d(k, j)) * 4.0
        }
    }

    /// Corner values of ∂̄ of the P2 field on face f.
    pub fn face_dbar(&self, f: usize, p: &[C64]) -> [C64; 3] {
        [0, 1, 2].map(|j| (0..6).map(|i| self.dbar_at(f, i, j) * self.rot[f][i] * p[self.node[f][i]]).sum())
    }

    /// ∫ |∂̄ p|² da.
    pub fn energy(&self, p: &[C64]) -> f64 {
        (0..self.node.len())
            .map(|f| {
                let a = self.face_dbar(f, p);
                let mut s = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        let m = if i == j { 2.0 } else { 1.0 } / 12.0;
                        s += m * (a[i].conj() * a[j]).re;
                    }
                }
                s * self.face_area[f]
            })
            .sum()
    }

    /// Centroid values.
    pub fn to_faces(&self, p: &[C64]) -> Vec<C64> {
        (0..self.node.len())
            .map(|f| (0..6).map(|i| self.rot[f][i] * p[self.node[f][i]] * if i < 3 { -1.0 / 9.0 } else { 4.0 / 9.0 }).sum())
            .collect()
    }

    /// Nodal lift of face values: area-weighted averages in node frames.
    pub fn lift(&self, q: &[C64]) -> Vec<C64> {
        let n = self.node_count();
        let mut p = vec![C64::new(0.0, 0.0); n];
        let mut w = vec![0.0; n];
        for f in 0..self.node.len() {
            for i in 0..6 {
                p[self.node[f][i]] += q[f] * self.rot[f][i].conj() * self.face_area[f];
                w[self.node[f][i]] += self.face_area[f];
            }
        }
        p.iter().zip(&w).map(|(a, b)| a / b).collect()
    }

    fn assemble(&self) -> (Sparse<C64>, Sparse<C64>) {
        let n = self.node_count();
        let mut a = Sparse::new(n);
        let mut m = Sparse::new(n);
        for f in 0..self.node.len() {
            let ar = self.face_area[f];
            let d: Vec<[C64; 3]> = (0..6).map(|i| [0, 1, 2].map(|j| self.dbar_at(f, i, j) * self.rot[f][i])).collect();
            for i in 0..6 {
                for k in 0..6 {
                    let (gi, gk) = (self.node[f][i], self.node[f][k]);
                    let mut s = C64::new(0.0, 0.0);
                    for j in 0..3 {
                        for l in 0..3 {
                            let w = if j == l { 2.0 } else { 1.0 } / 12.0;
                            s += d[i][j].conj() * d[k][l] * w;
                        }
                    }
                    a.add(gi, gk, s * ar);
                    m.add(gi, gk, self.rot[f][i].conj() * self.rot[f][k] * (p2_mass(i, k) * ar));
                }
            }
        }
        (a, m)
    }
}

/// Discrete Cauchy–Riemann residual in L²: ‖∂̄ q_h‖ plus, when q has no nodal values,
/// the mismatch between q and the centroid values of its nodal lift.
pub fn dbar_residual(mesh: &SurfaceMesh, q: &QuadDiff, c: &MetricField) -> f64 {
    let geo = DbarGeometry::new(mesh, c);
    match &q.nodes {
        Some(p) => geo.energy(p).sqrt(),
        None => {
            let p = geo.lift(&q.values);
            let back = geo.to_faces(&p);
            let mis: f64 = back.iter().zip(&q.values).zip(&geo.face_area).map(|((x, y), a)| (x - y).norm_sqr() * a).sum();
            geo.energy(&p).sqrt() + mis.sqrt()
        }
    }
}

pub struct Basis {
    pub elements: Vec<QuadDiff>,
    /// Smallest singular values of the mass-normalized ∂̄ operator in real counting
    /// (each complex value appears twice).
    pub singular_values: Vec<f64>,
    /// Ratio of the (6g−5)-th to the (6g−6)-th real singular value.
    pub gap: f64,
}

/// The 3g−3 complex directions of smallest ∂̄ residual, WP-orthonormalized.
pub fn holomorphic_basis(mesh: &SurfaceMesh, c: &MetricField) -> Result<Basis> {
    let b = basis_unchecked(mesh, c);
    if b.gap < 10.0 {
        return Err(LabError::SpectralGap { gap: b.gap });
    }
    Ok(b)
}

/// Smallest generalized eigenpairs of (A, M) by shifted subspace inverse iteration.
fn smallest_eigen(a: &Sparse<C64>, m: &Sparse<C64>, k: usize) -> (Vec<f64>, DMatrix<C64>) {
    let n = a.n;
    // deterministic start
    let x = DMatrix::<C64>::from_fn(n, k, |i, j| {
        let t = (i * 7919 + j * 104729) as f64;
        C64::new((t * 0.618).sin(), (t * 0.414).cos())
    });
    subspace_iteration(a, m, x, 60)
}

fn subspace_iteration(a: &Sparse<C64>, m: &Sparse<C64>, mut x: DMatrix<C64>, iters: usize) -> (Vec<f64>, DMatrix<C64>) {
    let n = a.n;
    let k = x.ncols();
    let diag = |s: &Sparse<C64>, i: usize| s.rows[i].get(&i).map_or(0.0, |v| v.re);
    let shift = 1e-9 * (0..n).map(|i| diag(a, i) / diag(m, i)).fold(0.0, f64::max);
    let lu = a.axpy(C64::new(shift, 0.0), m).lu().expect("shifted ∂̄ matrix positive definite");
    let cols = |x: &DMatrix<C64>, op: &dyn Fn(&[C64]) -> Vec<C64>| {
        let c: Vec<Vec<C64>> = (0..x.ncols()).map(|j| op(x.column(j).as_slice())).collect();
        DMatrix::from_fn(n, x.ncols(), |i, j| c[j][i])
    };
    let mut vals = vec![0.0; k];
    for _ in 0..iters {
        let y = cols(&x, &|v| lu.solve(&m.mul(v)));
        // Rayleigh–Ritz on span(y)
        let mk = y.adjoint() * cols(&y, &|v| m.mul(v));
        let ak = y.adjoint() * cols(&y, &|v| a.mul(v));
        let l = mk.cholesky().expect("subspace independent");
        let linv = l.l().try_inverse().expect("invertible");
        let c = &linv * ak * linv.adjoint();
        let c = (&c + c.adjoint()) * C64::new(0.5, 0.0);
        let eig = c.symmetric_eigen();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
        let vecs = linv.adjoint() * &eig.eigenvectors;
        let ordered = DMatrix::from_fn(k, k, |i, j| vecs[(i, order[j])]);
        x = &y * ordered;
        vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    }
    (vals, x)
}

/// Re-express a differential given in the frames of `from` in the frames of `to`,
/// keeping the trace-free part of its real tensor.
fn convert_value(v: C64, p_from: &M2, p_to: &M2) -> C64 {
    let pi = p_from.try_inverse().expect("frame");
    let t = pi.transpose() * beltrami_matrix(v.conj()) * pi;
    let iso = p_to.transpose() * t * p_to;
    C64::new(0.5 * (iso[(0, 0)] - iso[(1, 1)]), -0.5 * (iso[(0, 1)] + iso[(1, 0)]))
}

/// Carry a basis holomorphic for `from` to the holomorphic space of `to`: the converted
/// elements are projected (in the P2 mass inner product) onto the near-kernel at `to`,
/// found by a few subspace iterations seeded with them.
pub fn transport_basis(mesh: &SurfaceMesh, from: &MetricField, basis: &[QuadDiff], to: &MetricField) -> Vec<QuadDiff> {
    if from.values == to.values {
        return basis.to_vec();
    }
    let g_from = DbarGeometry::new(mesh, from);
    let g_to = DbarGeometry::new(mesh, to);
    let (f_from, f_to) = (frames(mesh, from), frames(mesh, to));
    let n = g_to.node_count();
    let seeds: Vec<Vec<C64>> = basis
        .iter()
        .map(|q| {
            let p = q.nodes.clone().unwrap_or_else(|| g_from.lift(&q.values));
            let mut out = vec![C64::new(0.0, 0.0); n];
            let mut w = vec![0.0; n];
            for f in 0..mesh.face_count() {
                for i in 0..6 {
                    let node = g_to.node[f][i];
                    let v = convert_value(p[node] * g_from.rot[f][i], &f_from[f], &f_to[f]);
                    out[node] += v * g_to.rot[f][i].conj();
                    w[node] += 1.0;
                }
            }
            out.iter().zip(&w).map(|(a, b)| a / b).collect()
        })
        .collect();
    let (a, m) = g_to.assemble();
    let x0 = DMatrix::from_fn(n, seeds.len(), |i, j| seeds[j][i]);
    let (_, x) = subspace_iteration(&a, &m, x0, 6);
    // M-orthogonal projection of each seed onto span(x)
    let mx: Vec<Vec<C64>> = (0..x.ncols()).map(|j| m.mul(x.column(j).as_slice())).collect();
    let k = x.ncols();
    let gram = DMatrix::from_fn(k, k, |i, j| x.column(i).iter().zip(&mx[j]).map(|(a, b)| a.conj() * b).sum::<C64>());
    seeds
        .iter()
        .map(|s| {
            let rhs = DVector::from_fn(k, |i, _| mx[i].iter().zip(s).map(|(a, b)| a.conj() * b).sum::<C64>());
            let c = gram.clone().lu().solve(&rhs).expect("independent subspace");
            let p: Vec<C64> = (0..n).map(|r| (0..k).map(|j| x[(r, j)] * c[j]).sum()).collect();
            QuadDiff { values: g_to.to_faces(&p), nodes: Some(p) }
        })
        .collect()
}

/// As [`holomorphic_basis`] without the spectral-gap check.
pub fn basis_unchecked(mesh: &SurfaceMesh, c: &MetricField) -> Basis {
    let dim = 3 * mesh.genus - 3;
    let geo = DbarGeometry::new(mesh, c);
    let (a, m) = geo.assemble();
    let (vals, x) = smallest_eigen(&a, &m, dim + 4);
    let sv: Vec<f64> = vals.iter().flat_map(|v| [v.max(0.0).sqrt(); 2]).collect();
    let gap = sv[2 * dim] / sv[2 * dim - 1].max(1e-300);
    let mut elements: Vec<QuadDiff> = Vec::with_capacity(dim);
    for j in 0..dim {
        let p: Vec<C64> = x.column(j).iter().copied().collect();
        let mut q = QuadDiff { values: geo.to_faces(&p), nodes: Some(p) };
        for e in &elements {
            let proj = hermitian(mesh, &q, e, c);
            q = q.add(&e.scale(-proj));
        }
        let n = hermitian(mesh, &q, &q, c).re.sqrt();
        elements.push(q.scale(C64::new(1.0 / n, 0.0)));
    }
    Basis { elements, singular_values: sv, gap }
}

/// Fischer–Tromba products ⅛∫tr(J̇_H J̇'_H) and ⅛∫tr(J J̇_H J̇'_H), with the horizontal
/// projection onto the span of J̇_φ = 2Jν_φ over the basis.
pub fn ft_products(
    mesh: &SurfaceMesh,
    jdot1: &OperatorField,
    jdot2: &OperatorField,
    h: &MetricField,
    basis: &[QuadDiff],
) -> Result<(f64, f64)> {
    let j = h.j();
    for f in 0..mesh.face_count() {
        for jd in [&jdot1.values[f], &jdot2.values[f]] {
            let ac = j.values[f] * jd + jd * j.values[f];
            if ac.norm() > 1e-10 * (1.0 + jd.norm()) {
                return Err(LabError::Precondition(format!("J̇ does not anti-commute with J on face {f}")));
            }
        }
    }
    let p1 = horizontal(mesh, jdot1, h, basis);
    let p2 = horizontal(mesh, jdot2, h, basis);
    let areas = face_areas(mesh, h);
    let mut g = 0.0;
    let mut w = 0.0;
    for f in 0..mesh.face_count() {
        let p = p1.values[f] * p2.values[f];
        g += 0.125 * p.trace() * areas[f];
        w += 0.125 * (j.values[f] * p).trace() * areas[f];
    }
    Ok((g, w))
}

/// J̇_φ = 2Jν_φ.
pub fn jdot_of(mesh: &SurfaceMesh, q: &QuadDiff, h: &MetricField) -> OperatorField {
    let nu = harmonic_beltrami(mesh, q, h);
    h.j().compose(&nu).map(|_, m| m * 2.0)
}

fn jdot_directions(mesh: &SurfaceMesh, h: &MetricField, basis: &[QuadDiff]) -> Vec<OperatorField> {
    basis
        .iter()
        .flat_map(|q| [jdot_of(mesh, q, h), jdot_of(mesh, &q.scale(C64::new(0.0, 1.0)), h)])
        .collect()
}

/// Real coefficients (x₁, y₁, …) of the L² projection of J̇ onto the J̇ of φ = Σ(xₖ + iyₖ)ψₖ.
pub fn horizontal_coeffs(mesh: &SurfaceMesh, jdot: &OperatorField, h: &MetricField, basis: &[QuadDiff]) -> Vec<f64> {
    let areas = face_areas(mesh, h);
    let dirs = jdot_directions(mesh, h, basis);
    let ip = |a: &OperatorField, b: &OperatorField| -> f64 {
        (0..mesh.face_count()).map(|f| (a.values[f].transpose() * b.values[f]).trace() * areas[f]).sum()
    };
    let n = dirs.len();
    let gram = DMatrix::from_fn(n, n, |r, c| ip(&dirs[r], &dirs[c]));
    let rhs = DVector::from_fn(n, |r, _| ip(&dirs[r], jdot));
    gram.lu().solve(&rhs).expect("basis directions independent").iter().copied().collect()
}

/// Real L² projection of J̇ onto span_ℝ{J̇_φ, J̇_{iφ}}.
pub fn horizontal(mesh: &SurfaceMesh, jdot: &OperatorField, h: &MetricField, basis: &[QuadDiff]) -> OperatorField {
    let x = horizontal_coeffs(mesh, jdot, h, basis);
    let mut out = OperatorField { values: vec![M2::zeros(); mesh.face_count()] };
    for (d, c) in jdot_directions(mesh, h, basis).iter().zip(&x) {
        for (o, v) in out.values.iter_mut().zip(&d.values) {
            *o += v * *c;
        }
    }
    out
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::build_bolza_mesh;
    use crate::wolf::hyperbolic_background;

    #[test]
    fn genus_two_has_three_holomorphic_differentials() {
        let m = build_bolza_mesh(2).unwrap();
        let h = hyperbolic_background(&m).unwrap();
        let b = holomorphic_basis(&m, &h).unwrap();
        assert_eq!(b.elements.len(), 3);
        assert!(b.gap >= 10.0);
        let q = QuadDiff::combine(&b.elements, &[C64::new(0.3, 0.2), C64::new(-1.0, 0.5), C64::new(0.0, 1.0)]);
        assert!(dbar_residual(&m, &q, &h) < 0.1 * dbar_residual(&m, &QuadDiff::from_values(vec![C64::new(1.0, 0.0); m.face_count()]), &h));
    }

    #[test]
    fn weil_petersson_products_agree_with_the_hermitian_pairing() {
        let m = build_bolza_mesh(2).unwrap();
        let h = hyperbolic_background(&m).unwrap();
        let b = holomorphic_basis(&m, &h).unwrap();
        let q1 = QuadDiff::combine(&b.elements, &[C64::new(1.0, 0.0), C64::new(0.5, -0.2), C64::new(0.0, 0.0)]);
        let q2 = QuadDiff::combine(&b.elements, &[C64::new(0.3, 0.4), C64::new(1.0, 0.0), C64::new(0.0, 0.7)]);
        let z = hermitian(&m, &q1, &q2, &h);
        let (g, w) = wp_products(&m, &q1, &q2, &h);
        assert!((g - z.re).abs() < 1e-12 * z.norm());
        assert!((w - z.im).abs() < 1e-12 * z.norm());
        let (_, w11) = wp_products(&m, &q1, &q1, &h);
        assert!(w11.abs() < 1e-12);
    }

    #[test]
    fn beltrami_matrix_is_traceless_and_symmetric() {
        let n = beltrami_matrix(C64::new(0.3, -0.4));
        assert_eq!(n.trace(), 0.0);
        assert_eq!(n[(0, 1)], n[(1, 0)]);
        assert!(((n * n).trace() / 2.0 - 0.25).abs() < 1e-15);
    }
}
