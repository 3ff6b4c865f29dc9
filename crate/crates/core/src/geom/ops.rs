//! Discrete operators: angles, curvature, cotangent Laplacian, integration.

use super::field::{MetricField, ScalarField};
use super::mesh::SurfaceMesh;
use crate::error::{LabError, Result};
use std::f64::consts::PI;

/// Area of a triangle from squared side lengths (Heron).
pub fn tri_area(l: [f64; 3]) -> f64 {
    let s = 2.0 * (l[0] * l[1] + l[1] * l[2] + l[2] * l[0]) - (l[0] * l[0] + l[1] * l[1] + l[2] * l[2]);
    0.25 * s.max(0.0).sqrt()
}

/// Corner angles from squared lengths of local edges; corner k is opposite edge k+1.
pub fn tri_angles(l: [f64; 3]) -> [f64; 3] {
    let a = tri_area(l);
    [0, 1, 2].map(|k| {
        let opp = l[(k + 1) % 3];
        let (x, y) = (l[k], l[(k + 2) % 3]);
        // cot = (x + y - opp) / (4A), angle via atan2 for accuracy
        (4.0 * a).atan2(x + y - opp)
    })
}

/// Derivatives of the corner angles with respect to the squared lengths: d[k][j] = ∂θ_k/∂L_j.
pub fn tri_angle_grad(l: [f64; 3]) -> [[f64; 3]; 3] {
    let a = tri_area(l);
    let th = tri_angles(l);
    let len = l.map(f64::sqrt);
    let mut d = [[0.0; 3]; 3];
    for k in 0..3 {
        let opp = (k + 1) % 3;
        d[k][opp] = 1.0 / (4.0 * a);
        for j in [k, (k + 2) % 3] {
            // the angle of the third corner, between the opposite edge and edge j
            let third = if j == k { (k + 1) % 3 } else { (k + 2) % 3 };
            d[k][j] = -len[opp] * th[third].cos() / (4.0 * a * len[j]);
        }
    }
    d
}

/// ∂A/∂L_j.
pub fn tri_area_grad(l: [f64; 3]) -> [f64; 3] {
    let a = tri_area(l);
    [0, 1, 2].map(|j| (l[(j + 1) % 3] + l[(j + 2) % 3] - l[j]) / (16.0 * a))
}

fn check(mesh: &SurfaceMesh, sq: &[[f64; 3]]) -> Result<()> {
    for (f, l) in sq.iter().enumerate() {
        if !(tri_area(*l) > 0.0) || l.iter().any(|v| !(*v > 0.0)) {
            return Err(LabError::Degenerate(f));
        }
    }
    let _ = mesh;
    Ok(())
}

/// Per-face areas under g.
pub fn face_areas(mesh: &SurfaceMesh, g: &MetricField) -> Vec<f64> {
    g.edge_sq(mesh).into_iter().map(tri_area).collect()
}

/// Barycentric dual areas per vertex.
pub fn vertex_areas(mesh: &SurfaceMesh, g: &MetricField) -> Vec<f64> {
    let mut a = vec![0.0; mesh.vertex_count];
    for (f, fa) in face_areas(mesh, g).into_iter().enumerate() {
        for &v in &mesh.faces[f] {
            a[v] += fa / 3.0;
        }
    }
    a
}

pub fn area(mesh: &SurfaceMesh, g: &MetricField) -> f64 {
    face_areas(mesh, g).iter().sum()
}

/// ∫ f da with f piecewise linear; face order is fixed.
pub fn integrate(mesh: &SurfaceMesh, f: &ScalarField, g: &MetricField) -> f64 {
    let fm = f.face_mean(mesh);
    face_areas(mesh, g).iter().zip(fm).map(|(a, v)| a * v).sum()
}

/// ∫ of a per-face constant.
pub fn integrate_faces(mesh: &SurfaceMesh, vals: &[f64], g: &MetricField) -> f64 {
    face_areas(mesh, g).iter().zip(vals).map(|(a, v)| a * v).sum()
}

/// Angle defects 2π − Σθ per vertex.
pub fn angle_defects(mesh: &SurfaceMesh, sq: &[[f64; 3]]) -> Vec<f64> {
    let mut d = vec![2.0 * PI; mesh.vertex_count];
    for (f, l) in sq.iter().enumerate() {
        let th = tri_angles(*l);
        for k in 0..3 {
            d[mesh.faces[f][k]] -= th[k];
        }
    }
    d
}

/// Angle-defect curvature per vertex: defect divided by the barycentric dual area.
pub fn gauss_curvature(mesh: &SurfaceMesh, g: &MetricField) -> Result<ScalarField> {
    let sq = g.edge_sq(mesh);
    check(mesh, &sq)?;
    let d = angle_defects(mesh, &sq);
    let a = vertex_areas(mesh, g);
    Ok(ScalarField { values: d.iter().zip(&a).map(|(d, a)| d / a).collect() })
}

/// Sparse symmetric matrix with a lumped mass companion: Δ = −M⁻¹S.
#[derive(Clone, Debug)]
pub struct LinearOperator {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub mass: Vec<f64>,
}

impl LinearOperator {
    pub fn n(&self) -> usize {
        self.mass.len()
    }

    /// S u (the positive semi-definite stiffness).
    pub fn stiffness_apply(&self, u: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(j, w)| w * u[j]).sum()).collect()
    }

    /// Δu = −M⁻¹ S u.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.stiffness_apply(u).iter().zip(&self.mass).map(|(s, m)| -s / m).collect()
    }

    pub fn stiffness_sparse(&self) -> super::banded::Sparse<f64> {
        let mut m = super::banded::Sparse::new(self.n());
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, w) in r {
                m.add(i, j, w);
            }
        }
        m
    }

    pub fn stiffness_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.n();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, w) in r {
                m[(i, j)] += w;
            }
        }
        m
    }

    pub fn asymmetry(&self) -> f64 {
        let s = self.stiffness_dense();
        (&s - s.transpose()).amax()
    }
}

/// Cotangent Laplacian of the metric g.
pub fn laplace_beltrami(mesh: &SurfaceMesh, g: &MetricField) -> Result<LinearOperator> {
    let sq = g.edge_sq(mesh);
    check(mesh, &sq)?;
    let n = mesh.vertex_count;
    let mut dense: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); n];
    for (f, l) in sq.iter().enumerate() {
        let a = tri_area(*l);
        let t = mesh.faces[f];
        for k in 0..3 {
            // edge k (corners k, k+1) is opposite corner k+2
            let cot = (l[k] + l[(k + 1) % 3] + l[(k + 2) % 3] - 2.0 * l[k]) / (4.0 * a);
            let w = 0.5 * cot;
            let (i, j) = (t[k], t[(k + 1) % 3]);
            *dense[i].entry(i).or_default() += w;
            *dense[j].entry(j).or_default() += w;
            *dense[i].entry(j).or_default() -= w;
            *dense[j].entry(i).or_default() -= w;
        }
    }
    let rows = dense.into_iter().map(|m| m.into_iter().collect()).collect();
    Ok(LinearOperator { rows, mass: vertex_areas(mesh, g) })
}

/// Gradient of the piecewise-linear u on face f, as a chart covector.
pub fn face_gradient(mesh: &SurfaceMesh, f: usize, u: [f64; 3]) -> [f64; 2] {
    let p = mesh.chart[f];
    let (e1, e2) = ([p[1][0] - p[0][0], p[1][1] - p[0][1]], [p[2][0] - p[0][0], p[2][1] - p[0][1]]);
    let det = e1[0] * e2[1] - e1[1] * e2[0];
    let (d1, d2) = (u[1] - u[0], u[2] - u[0]);
    [(d1 * e2[1] - d2 * e1[1]) / det, (d2 * e1[0] - d1 * e2[0]) / det]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{build_bolza_mesh, mat2};

    #[test]
    fn angle_gradient_matches_differences() {
        let l = [1.3, 0.8, 1.1];
        let g = tri_angle_grad(l);
        let ga = tri_area_grad(l);
        let h = 1e-6;
        for j in 0..3 {
            let (mut p, mut m) = (l, l);
            p[j] += h;
            m[j] -= h;
            let (tp, tm) = (tri_angles(p), tri_angles(m));
            for k in 0..3 {
                assert!((g[k][j] - (tp[k] - tm[k]) / (2.0 * h)).abs() < 1e-8);
            }
            assert!((ga[j] - (tri_area(p) - tri_area(m)) / (2.0 * h)).abs() < 1e-8);
        }
    }

    #[test]
    fn gauss_bonnet_is_exact() {
        let m = build_bolza_mesh(2).unwrap();
        let g = MetricField::chart(&m);
        let k = gauss_curvature(&m, &g).unwrap();
        let a = vertex_areas(&m, &g);
        let total: f64 = k.values.iter().zip(&a).map(|(k, a)| k * a).sum();
        assert!((total + 4.0 * PI).abs() < 1e-8 * 4.0 * PI);
    }

    #[test]
    fn curvature_scales_conformally() {
        let m = build_bolza_mesh(1).unwrap();
        let g = MetricField::chart(&m);
        let k0 = gauss_curvature(&m, &g).unwrap();
        let c: f64 = 0.3;
        let k1 = gauss_curvature(&m, &g.scale((2.0 * c).exp())).unwrap();
        for (a, b) in k0.values.iter().zip(&k1.values) {
            assert!((b - a * (-2.0 * c).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_kills_constants_and_integrates_to_zero() {
        let m = build_bolza_mesh(2).unwrap();
        let g = MetricField::chart(&m).map(|_, x| x * 1.1 + mat2::sym(0.05, 0.02, 0.0));
        let l = laplace_beltrami(&m, &g).unwrap();
        assert!(l.asymmetry() < 1e-12);
        let c = vec![3.0; m.vertex_count];
        assert!(l.apply(&c).iter().all(|v| v.abs() < 1e-10));
        let u: Vec<f64> = (0..m.vertex_count).map(|i| (i as f64 * 0.37).sin()).collect();
        let lu = l.apply(&u);
        let s: f64 = lu.iter().zip(&l.mass).map(|(a, b)| a * b).sum();
        assert!(s.abs() < 1e-10);
    }

    #[test]
    fn transport_round_trip() {
        let m = build_bolza_mesh(1).unwrap();
        let a = mat2::sym(1.0, 0.4, 2.0);
        for f in 0..m.face_count() {
            for k in 0..3 {
                let (g, e) = m.adjacency[f][k];
                let there = crate::geom::OperatorField::transport(&a, m.transitions[f][k]);
                let back = crate::geom::OperatorField::transport(&there, m.transitions[g][e]);
                assert!((back - a).norm() < 1e-12);
            }
        }
    }
}
