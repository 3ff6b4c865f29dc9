//! Per-face tensor fields and per-vertex scalar fields.

use super::mat2::{self, M2};
use super::mesh::SurfaceMesh;
use crate::error::{LabError, Result};
use nalgebra::{Matrix3, Vector3};

/// Symmetric 2×2 tensor per face in the face chart.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    pub values: Vec<M2>,
    /// Variations are symmetric but need not be definite.
    pub variation: bool,
}

/// Arbitrary 2×2 operator per face.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorField {
    pub values: Vec<M2>,
}

/// Piecewise-linear scalar given by vertex values.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl MetricField {
    pub fn new(values: Vec<M2>) -> Result<Self> {
        for (f, m) in values.iter().enumerate() {
            if !mat2::is_spd(m) {
                return Err(LabError::NotSpd(f));
            }
        }
        Ok(MetricField { values, variation: false })
    }

    pub fn variation(values: Vec<M2>) -> Self {
        MetricField { values, variation: true }
    }

    /// The flat chart metric (identity in every face frame).
    pub fn chart(mesh: &SurfaceMesh) -> Self {
        MetricField { values: vec![mat2::ident(); mesh.face_count()], variation: false }
    }

    /// Per-face tensors reproducing the given squared lengths of local edges.
    pub fn from_edge_sq(mesh: &SurfaceMesh, sq: &[[f64; 3]]) -> Self {
        let values = (0..mesh.face_count())
            .map(|f| {
                let mut a = Matrix3::zeros();
                for k in 0..3 {
                    let d = mesh.edge_vec(f, k);
                    a[(k, 0)] = d[0] * d[0];
                    a[(k, 1)] = 2.0 * d[0] * d[1];
                    a[(k, 2)] = d[1] * d[1];
                }
                let s = a.lu().solve(&Vector3::new(sq[f][0], sq[f][1], sq[f][2])).expect("degenerate chart");
                mat2::sym(s[0], s[1], s[2])
            })
            .collect();
        MetricField { values, variation: false }
    }

    /// Squared lengths of local edges measured with each face's tensor.
    pub fn edge_sq(&self, mesh: &SurfaceMesh) -> Vec<[f64; 3]> {
        (0..mesh.face_count())
            .map(|f| {
                let g = &self.values[f];
                [0, 1, 2].map(|k| mat2::quad(g, mesh.edge_vec(f, k)))
            })
            .collect()
    }

    /// Average the two measurements of every shared edge, giving an edge-conforming field.
    pub fn conform(&self, mesh: &SurfaceMesh) -> Self {
        let mut sq = self.edge_sq(mesh);
        for &(f, k, g, m) in &mesh.edges {
            let v = 0.5 * (sq[f][k] + sq[g][m]);
            sq[f][k] = v;
            sq[g][m] = v;
        }
        let mut out = Self::from_edge_sq(mesh, &sq);
        out.variation = self.variation;
        out
    }

    /// Largest relative disagreement of shared edge lengths.
    pub fn nonconformity(&self, mesh: &SurfaceMesh) -> f64 {
        let sq = self.edge_sq(mesh);
        mesh.edges
            .iter()
            .map(|&(f, k, g, m)| (sq[f][k] - sq[g][m]).abs() / sq[f][k].abs().max(sq[g][m].abs()).max(1e-300))
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> Self {
        MetricField { values: self.values.iter().map(|m| m * s).collect(), variation: self.variation }
    }

    pub fn map(&self, f: impl Fn(usize, &M2) -> M2) -> Self {
        MetricField { values: self.values.iter().enumerate().map(|(i, m)| f(i, m)).collect(), variation: self.variation }
    }

    /// Per-face Jacobian factor sqrt(det g) relative to the chart.
    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|m| m.determinant().max(0.0).sqrt()).collect()
    }

    /// h(a·, a·) per face.
    pub fn pullback(&self, a: &OperatorField) -> Self {
        self.map(|f, g| mat2::pullback(g, &a.values[f]))
    }

    pub fn j(&self) -> OperatorField {
        OperatorField { values: self.values.iter().map(mat2::j_of).collect() }
    }

    pub fn max_dist(&self, other: &MetricField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

impl OperatorField {
    pub fn identity(n: usize) -> Self {
        OperatorField { values: vec![mat2::ident(); n] }
    }

    pub fn map(&self, f: impl Fn(usize, &M2) -> M2) -> Self {
        OperatorField { values: self.values.iter().enumerate().map(|(i, m)| f(i, m)).collect() }
    }

    pub fn compose(&self, other: &OperatorField) -> Self {
        self.map(|f, a| a * other.values[f])
    }

    pub fn trace(&self) -> Vec<f64> {
        self.values.iter().map(|m| m.trace()).collect()
    }

    pub fn det(&self) -> Vec<f64> {
        self.values.iter().map(|m| m.determinant()).collect()
    }

    pub fn adjoint(&self, g: &MetricField) -> Self {
        self.map(|f, a| mat2::adjoint(a, &g.values[f]))
    }

    pub fn pos_sqrt(&self) -> Result<Self> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(f, m)| mat2::pos_sqrt(m).ok_or(LabError::NotSpd(f)))
            .collect::<Result<Vec<_>>>()?;
        Ok(OperatorField { values })
    }

    /// Transport the value of face f across local edge k into the neighbour's frame.
    pub fn transport(m: &M2, rho: f64) -> M2 {
        let r = mat2::rot(rho);
        r * m * r.transpose()
    }
}

impl ScalarField {
    pub fn constant(n: usize, c: f64) -> Self {
        ScalarField { values: vec![c; n] }
    }

    /// Face averages of the vertex values.
    pub fn face_mean(&self, mesh: &SurfaceMesh) -> Vec<f64> {
        mesh.faces.iter().map(|t| (self.values[t[0]] + self.values[t[1]] + self.values[t[2]]) / 3.0).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
