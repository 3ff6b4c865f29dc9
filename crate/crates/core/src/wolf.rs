//! Wolf parameterization: hyperbolic metrics e·h₀ + 2t·Re φ, the resolvent (2 − Δ)⁻¹,
//! and Wolf coordinates.

use crate::error::{LabError, Result};
use crate::geom::regge::{edge_values, metric_from_edges, CurvatureProblem, Scaling};
use crate::geom::{laplace_beltrami, MetricField, ScalarField, SurfaceMesh};
use crate::harmonic::{harmonic_from, HarmonicMap, MapProblem};
use crate::quaddiff::{hermitian, holomorphic_basis, re_tensor, transport_basis, QuadDiff};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

pub const WOLF_TOL: f64 = 1e-8;
pub const WOLF_MAX_ITER: usize = 50;

/// The discrete hyperbolic metric conformal (edgewise) to the chart metric.
pub fn hyperbolic_background(mesh: &SurfaceMesh) -> Result<MetricField> {
    let chart = MetricField::chart(mesh);
    let base = edge_values(mesh, &chart);
    let p = CurvatureProblem {
        mesh,
        extra: vec![0.0; base.len()],
        base,
        target: vec![-1.0; mesh.vertex_count],
        scaling: Scaling::Linear,
    };
    let (x, _) = p.solve(vec![1.0; mesh.vertex_count], 1e-12, WOLF_MAX_ITER)?;
    Ok(metric_from_edges(mesh, &p.edges(&x)))
}

#[derive(Clone, Debug)]
pub struct WolfSolution {
    pub e: ScalarField,
    pub h: MetricField,
    pub residuals: Vec<f64>,
}

/// Edge values Re φ(d, d). Quadratic nodal values give them directly at the edge
/// midpoints; otherwise the two incident faces are averaged.
pub fn re_edges(mesh: &SurfaceMesh, q: &QuadDiff, h0: &MetricField) -> Vec<f64> {
    if let Some(p) = q.nodes.as_ref().filter(|p| p.len() == mesh.vertex_count + mesh.edge_count()) {
        let base = edge_values(mesh, h0);
        return base.iter().enumerate().map(|(e, l)| l * p[mesh.vertex_count + e].re).collect();
    }
    let r = re_tensor(mesh, q, h0).edge_sq(mesh);
    mesh.edges.iter().map(|&(f, k, g, m)| 0.5 * (r[f][k] + r[g][m])).collect()
}

/// Solve for e making e·h₀ + 2t·Re φ hyperbolic (angle-defect curvature −1).
pub fn wolf_solve(mesh: &SurfaceMesh, h0: &MetricField, q: &QuadDiff, t: f64) -> Result<WolfSolution> {
    wolf_solve_from(mesh, h0, q, t, None)
}

pub fn wolf_solve_from(
    mesh: &SurfaceMesh,
    h0: &MetricField,
    q: &QuadDiff,
    t: f64,
    seed: Option<&ScalarField>,
) -> Result<WolfSolution> {
    let base = edge_values(mesh, h0);
    let extra: Vec<f64> = re_edges(mesh, q, h0).iter().map(|s| 2.0 * t * s).collect();
    let p = CurvatureProblem { mesh, base, extra, target: vec![-1.0; mesh.vertex_count], scaling: Scaling::Linear };
    let x0 = seed.map(|s| s.values.clone()).unwrap_or_else(|| vec![1.0; mesh.vertex_count]);
    let (x, trace) = p.solve(x0, WOLF_TOL, WOLF_MAX_ITER)?;
    if x.iter().any(|v| *v <= 0.0) {
        return Err(LabError::Positivity("energy density lost positivity".into()));
    }
    let h = metric_from_edges(mesh, &p.edges(&x));
    let h = MetricField::new(h.values).map_err(|_| LabError::Positivity(format!("h_t not positive at t = {t}")))?;
    Ok(WolfSolution { e: ScalarField { values: x }, h, residuals: trace.residuals })
}

/// Solve (2 − Δ)u = f with the lumped-mass cotangent Laplacian of h.
pub fn resolvent(mesh: &SurfaceMesh, h: &MetricField, f: &ScalarField) -> Result<ScalarField> {
    let lap = laplace_beltrami(mesh, h)?;
    let mut a = lap.stiffness_sparse();
    for v in 0..lap.n() {
        a.add(v, v, 2.0 * lap.mass[v]);
    }
    let rhs: Vec<f64> = (0..lap.n()).map(|v| lap.mass[v] * f.values[v]).collect();
    let lu = a.lu().ok_or_else(|| LabError::NoConvergence("resolvent matrix singular".into()))?;
    Ok(ScalarField { values: lu.solve(&rhs) })
}

/// |ν_q|² at the vertices for the metric the nodes of q refer to: squared moduli of the
/// nodal values, or area-averaged face values when q has no nodes.
pub fn nu_sq_vertices(mesh: &SurfaceMesh, q: &QuadDiff, c: &MetricField) -> ScalarField {
    match q.nodes.as_ref().filter(|p| p.len() == mesh.vertex_count + mesh.edge_count()) {
        Some(p) => ScalarField { values: p[..mesh.vertex_count].iter().map(|z| z.norm_sqr()).collect() },
        None => crate::minlag::to_vertices(mesh, &q.values.iter().map(|z| z.norm_sqr()).collect::<Vec<_>>(), c),
    }
}

/// Predicted t² coefficient of e(t) for W_c(tq): |ν|² + 2(2 − Δ)⁻¹|ν|².
pub fn e_second_order(chart: &WolfChart, q: &QuadDiff) -> Result<ScalarField> {
    let n = nu_sq_vertices(chart.mesh, q, &chart.c);
    let u = resolvent(chart.mesh, &chart.c, &n)?;
    Ok(ScalarField { values: n.values.iter().zip(&u.values).map(|(a, b)| a + 2.0 * b).collect() })
}

/// t² coefficient of e(t) from the even parts at t and t/2, Richardson-extrapolated.
pub fn e_second_order_fit(chart: &WolfChart, q: &QuadDiff, t: f64) -> Result<ScalarField> {
    let even = |t: f64| -> Result<Vec<f64>> {
        let p = wolf_solve(chart.mesh, &chart.c, q, t)?.e;
        let m = wolf_solve(chart.mesh, &chart.c, q, -t)?.e;
        Ok(p.values.iter().zip(&m.values).map(|(a, b)| (a + b - 2.0) / (2.0 * t * t)).collect())
    };
    let (c1, c2) = (even(t)?, even(t / 2.0)?);
    Ok(ScalarField { values: c1.iter().zip(&c2).map(|(a, b)| (4.0 * b - a) / 3.0).collect() })
}

/// Solver defaults for Wolf-coordinate inversion.
pub const COORD_TOL: f64 = 1e-9;
pub const COORD_MAX_ITER: usize = 40;

/// A base metric c with a holomorphic basis for it: Wolf coordinates a ↦ W_c(Σ aᵢψᵢ).
#[derive(Clone)]
pub struct WolfChart<'a> {
    pub mesh: &'a SurfaceMesh,
    pub c: MetricField,
    pub basis: Vec<QuadDiff>,
    gram: DMatrix<C64>,
}

#[derive(Clone, Debug)]
pub struct Coords {
    pub a: Vec<C64>,
    /// Harmonic map from c to the target metric.
    pub map: HarmonicMap,
    pub residual: f64,
    pub iterations: usize,
}

impl<'a> WolfChart<'a> {
    pub fn new(mesh: &'a SurfaceMesh, c: MetricField, basis: Vec<QuadDiff>) -> Self {
        let n = basis.len();
        let gram = DMatrix::from_fn(n, n, |i, j| hermitian(mesh, &basis[j], &basis[i], &c));
        WolfChart { mesh, c, basis, gram }
    }

    /// Chart at the discrete hyperbolic background with its computed holomorphic basis.
    pub fn background(mesh: &'a SurfaceMesh) -> Result<Self> {
        let h0 = hyperbolic_background(mesh)?;
        let b = holomorphic_basis(mesh, &h0)?;
        Ok(Self::new(mesh, h0, b.elements))
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn qd(&self, a: &[C64]) -> QuadDiff {
        QuadDiff::combine(&self.basis, a)
    }

    pub fn solve(&self, a: &[C64], seed: Option<&ScalarField>) -> Result<WolfSolution> {
        wolf_solve_from(self.mesh, &self.c, &self.qd(a), 1.0, seed)
    }

    /// Coefficients of the projection of q on the basis.
    pub fn coeffs(&self, q: &QuadDiff) -> Vec<C64> {
        let r = DVector::from_fn(self.dim(), |i, _| hermitian(self.mesh, q, &self.basis[i], &self.c));
        self.gram.clone().lu().solve(&r).expect("basis independent").iter().copied().collect()
    }

    /// Harmonic map c → h, warm-started from given displacements.
    pub fn harmonic(&self, h: &MetricField, warm: Option<&[f64]>) -> Result<HarmonicMap> {
        let p = MapProblem::new(self.mesh, &self.c, h)?;
        harmonic_from(&p, &self.c, warm.map(|w| w.to_vec()).unwrap_or_else(|| vec![0.0; p.dim()]))
    }

    /// Wolf coordinates of h at c: a with the harmonic maps c → h and c → W_c(a) having
    /// equal Hopf coordinates. Fixed-point iteration; the Hopf coordinates of W_c(a) are a
    /// up to discretization error, so the iteration contracts fast.
    pub fn coords_of(&self, h: &MetricField, warm: Option<&[f64]>) -> Result<Coords> {
        let map = self.harmonic(h, warm)?;
        let y = self.coeffs(&map.hopf);
        let mut a = y.clone();
        let mut seed: Option<ScalarField> = None;
        let mut disp = Some(map.displacement.clone());
        for it in 0..COORD_MAX_ITER {
            let w = self.solve(&a, seed.as_ref())?;
            let m2 = self.harmonic(&w.h, disp.as_deref())?;
            let hy = self.coeffs(&m2.hopf);
            let r: Vec<C64> = y.iter().zip(&hy).map(|(p, q)| p - q).collect();
            let res = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if res < COORD_TOL {
                return Ok(Coords { a, map, residual: res, iterations: it });
            }
            for (x, d) in a.iter_mut().zip(&r) {
                *x += d;
            }
            seed = Some(w.e);
            disp = Some(m2.displacement);
        }
        Err(LabError::NoConvergence("Wolf coordinate inversion".into()))
    }

    /// The same chart data re-based at another metric.
    pub fn transported(&self, c: MetricField) -> WolfChart<'a> {
        let basis = transport_basis(self.mesh, &self.c, &self.basis, &c);
        WolfChart::new(self.mesh, c, basis)
    }
}

/// Wolf coordinates of h at h₀ (see [`WolfChart::coords_of`]).
pub fn teich_coords(mesh: &SurfaceMesh, h: &MetricField, h0: &MetricField, basis: &[QuadDiff]) -> Result<Vec<C64>> {
    Ok(WolfChart::new(mesh, h0.clone(), basis.to_vec()).coords_of(h, None)?.a)
}

pub fn to_real(a: &[C64]) -> Vec<f64> {
    a.iter().flat_map(|z| [z.re, z.im]).collect()
}

pub fn to_complex(x: &[f64]) -> Vec<C64> {
    x.chunks(2).map(|p| C64::new(p[0], p[1])).collect()
}

pub fn coord_dist(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{area, build_bolza_mesh, gauss_curvature};

    #[test]
    fn zero_differential_gives_the_background() {
        let m = build_bolza_mesh(2).unwrap();
        let bg = WolfChart::background(&m).unwrap();
        let w = bg.solve(&[C64::new(0.0, 0.0); 3], None).unwrap();
        assert!(w.e.values.iter().all(|e| (e - 1.0).abs() < 1e-9));
        assert!(w.h.max_dist(&bg.c) < 1e-9);
        assert!((area(&m, &bg.c) - 4.0 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn wolf_metric_is_hyperbolic_and_stretched() {
        let m = build_bolza_mesh(2).unwrap();
        let bg = WolfChart::background(&m).unwrap();
        let a = [C64::new(0.3, -0.2), C64::new(0.1, 0.1), C64::new(-0.2, 0.0)];
        let w = bg.solve(&a, None).unwrap();
        let k = gauss_curvature(&m, &w.h).unwrap();
        assert!(k.values.iter().all(|v| (v + 1.0).abs() < 1e-8));
        // e ≥ 1 up to mesh error
        assert!(w.e.values.iter().all(|e| *e > 1.0 - 1e-3), "{:?}", w.e.values.iter().copied().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn coordinates_invert_the_parameterization() {
        let m = build_bolza_mesh(2).unwrap();
        let bg = WolfChart::background(&m).unwrap();
        let a = vec![C64::new(0.2, 0.1), C64::new(-0.15, 0.05), C64::new(0.0, -0.1)];
        let h = bg.solve(&a, None).unwrap().h;
        let c = bg.coords_of(&h, None).unwrap();
        assert!(coord_dist(&c.a, &a) < 1e-6, "{:?}", c.a);
        assert_eq!(to_complex(&to_real(&a)), a);
    }

    #[test]
    fn resolvent_of_constants() {
        let m = build_bolza_mesh(1).unwrap();
        let h = hyperbolic_background(&m).unwrap();
        let u = resolvent(&m, &h, &ScalarField { values: vec![3.0; m.vertex_count] }).unwrap();
        assert!(u.values.iter().all(|v| (v - 1.5).abs() < 1e-12));
    }
}
