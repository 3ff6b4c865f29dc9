//! Edge-based metrics and a Newton solver for prescribed angle-defect curvature.

use super::field::MetricField;
use super::mesh::SurfaceMesh;
use super::ops::{tri_angle_grad, tri_angles, tri_area, tri_area_grad};
use crate::error::{LabError, Result};
use super::banded::Sparse;
use nalgebra::DVector;
use std::f64::consts::PI;

/// Squared length of every edge, read from the first incident face.
pub fn edge_values(mesh: &SurfaceMesh, g: &MetricField) -> Vec<f64> {
    let sq = g.edge_sq(mesh);
    mesh.edges.iter().map(|&(f, k, _, _)| sq[f][k]).collect()
}

pub fn per_face(mesh: &SurfaceMesh, ev: &[f64]) -> Vec<[f64; 3]> {
    mesh.edge_of.iter().map(|e| [ev[e[0]], ev[e[1]], ev[e[2]]]).collect()
}

pub fn metric_from_edges(mesh: &SurfaceMesh, ev: &[f64]) -> MetricField {
    MetricField::from_edge_sq(mesh, &per_face(mesh, ev))
}

/// Endpoints of each edge.
pub fn edge_ends(mesh: &SurfaceMesh) -> Vec<(usize, usize)> {
    mesh.edges.iter().map(|&(f, k, _, _)| (mesh.faces[f][k], mesh.faces[f][(k + 1) % 3])).collect()
}

/// How vertex unknowns x scale a base metric.
#[derive(Clone, Copy, Debug)]
pub enum Scaling {
    /// L = ½(x_i + x_j)·L₀ + S.
    Linear,
    /// L = exp(x_i + x_j)·L₀ + S.
    Exponential,
}

pub struct CurvatureProblem<'a> {
    pub mesh: &'a SurfaceMesh,
    pub base: Vec<f64>,
    pub extra: Vec<f64>,
    pub target: Vec<f64>,
    pub scaling: Scaling,
}

pub struct NewtonTrace {
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

impl<'a> CurvatureProblem<'a> {
    pub fn edges(&self, x: &[f64]) -> Vec<f64> {
        edge_ends(self.mesh)
            .iter()
            .enumerate()
            .map(|(e, &(i, j))| {
                let s = match self.scaling {
                    Scaling::Linear => 0.5 * (x[i] + x[j]),
                    Scaling::Exponential => (x[i] + x[j]).exp(),
                };
                s * self.base[e] + self.extra[e]
            })
            .collect()
    }

    fn valid(&self, ev: &[f64]) -> bool {
        per_face(self.mesh, ev).into_iter().all(|l| l.iter().all(|v| *v > 0.0) && tri_area(l) > 0.0)
    }

    /// Residual R_v = defect_v − K_v A_v and the L² curvature error.
    pub fn residual(&self, ev: &[f64]) -> (DVector<f64>, f64) {
        let m = self.mesh;
        let mut r = DVector::from_element(m.vertex_count, 2.0 * PI);
        let mut av = vec![0.0; m.vertex_count];
        for (f, l) in per_face(m, ev).into_iter().enumerate() {
            let th = tri_angles(l);
            let a = tri_area(l);
            for k in 0..3 {
                r[m.faces[f][k]] -= th[k];
                av[m.faces[f][k]] += a / 3.0;
            }
        }
        let mut l2 = 0.0;
        for v in 0..m.vertex_count {
            r[v] -= self.target[v] * av[v];
            l2 += r[v] * r[v] / av[v];
        }
        (r, l2.sqrt())
    }

    pub fn jacobian(&self, x: &[f64], ev: &[f64]) -> Sparse<f64> {
        let m = self.mesh;
        let n = m.vertex_count;
        let ends = edge_ends(m);
        // dL_e / dx for the two endpoints
        let dl: Vec<f64> = ends
            .iter()
            .enumerate()
            .map(|(e, &(i, j))| match self.scaling {
                Scaling::Linear => 0.5 * self.base[e],
                Scaling::Exponential => (x[i] + x[j]).exp() * self.base[e],
            })
            .collect();
        let mut jac = Sparse::new(n);
        for (f, l) in per_face(m, ev).into_iter().enumerate() {
            let dth = tri_angle_grad(l);
            let da = tri_area_grad(l);
            for j in 0..3 {
                let e = m.edge_of[f][j];
                let (a, b) = ends[e];
                for k in 0..3 {
                    let v = m.faces[f][k];
                    let dv = -dth[k][j] - self.target[v] * da[j] / 3.0;
                    jac.add(v, a, dv * dl[e]);
                    jac.add(v, b, dv * dl[e]);
                }
            }
        }
        jac
    }

    /// Newton iteration with step halving to keep all triangles valid and the residual decreasing.
    pub fn solve(&self, x0: Vec<f64>, tol: f64, max_iter: usize) -> Result<(Vec<f64>, NewtonTrace)> {
        let mut x = x0;
        let mut ev = self.edges(&x);
        if !self.valid(&ev) {
            return Err(LabError::Positivity("initial metric is degenerate".into()));
        }
        let (mut r, mut err) = self.residual(&ev);
        let mut trace = NewtonTrace { residuals: vec![err], iterations: 0 };
        while err >= tol {
            if trace.iterations >= max_iter {
                return Err(LabError::NoConvergence(format!("curvature Newton: residual trace {:?}", trace.residuals)));
            }
            let jac = self.jacobian(&x, &ev);
            let lu = jac.lu().ok_or_else(|| LabError::NoConvergence("singular Newton matrix".into()))?;
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let step = lu.solve(&rhs);
            let mut lambda = 1.0;
            loop {
                let xt: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + lambda * s).collect();
                let evt = self.edges(&xt);
                if self.valid(&evt) && xt.iter().all(|v| v.is_finite()) {
                    let (rt, et) = self.residual(&evt);
                    if et < err || lambda < 1e-3 {
                        x = xt;
                        ev = evt;
                        r = rt;
                        err = et;
                        break;
                    }
                }
                lambda *= 0.5;
                if lambda < 1e-6 {
                    return Err(LabError::Positivity("step halving could not keep the metric valid".into()));
                }
            }
            trace.iterations += 1;
            trace.residuals.push(err);
        }
        Ok((x, trace))
    }
}
