//! Piecewise-linear harmonic maps between two metrics on the same mesh, their energies
//! and Hopf differentials.
//!
//! Internally a map is a displacement per vertex, written in a cone-rescaled vertex
//! frame. The image of a domain face is unfolded in that face's chart; the target tensor
//! is the face tensor corrected linearly towards the vertex-averaged tensors at the
//! image centroid, so the energy is a cubic polynomial in the displacements.

use crate::error::{LabError, Result};
use crate::geom::banded::Sparse;
use crate::geom::mat2::{self, M2};
use crate::geom::ops::face_areas;
use crate::geom::{MetricField, SurfaceMesh};
use crate::quaddiff::{from_tensor, QuadDiff};
use nalgebra::Vector2;
use std::f64::consts::PI;

type V2 = Vector2<f64>;

/// Image of each vertex: a target face and barycentric coordinates in it.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMap {
    pub face: Vec<usize>,
    pub bary: Vec<[f64; 3]>,
}

impl DiscreteMap {
    pub fn identity(mesh: &SurfaceMesh) -> Self {
        let mut face = vec![0; mesh.vertex_count];
        let mut bary = vec![[0.0; 3]; mesh.vertex_count];
        for (v, star) in mesh.vertex_stars().iter().enumerate() {
            let (f, k) = star[0];
            face[v] = f;
            bary[v][k] = 1.0;
        }
        DiscreteMap { face, bary }
    }

    pub fn validate(&self, mesh: &SurfaceMesh) -> Result<()> {
        for (v, (f, b)) in self.face.iter().zip(&self.bary).enumerate() {
            if *f >= mesh.face_count() || b.iter().any(|x| *x < -1e-12) || (b.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(LabError::Precondition(format!("invalid image of vertex {v}")));
            }
        }
        Ok(())
    }
}

fn v2(p: [f64; 2]) -> V2 {
    V2::new(p[0], p[1])
}

/// Rigid map from the chart of f to the chart of its neighbour across local edge k.
fn cross(mesh: &SurfaceMesh, f: usize, k: usize) -> (usize, impl Fn(V2) -> V2) {
    let (g, m) = mesh.adjacency[f][k];
    let (a, b) = (v2(mesh.chart[f][k]), v2(mesh.chart[f][(k + 1) % 3]));
    let (a2, b2) = (v2(mesh.chart[g][(m + 1) % 3]), v2(mesh.chart[g][m]));
    let ang = (b2 - a2)[1].atan2((b2 - a2)[0]) - (b - a)[1].atan2((b - a)[0]);
    let r = mat2::rot(ang);
    (g, move |p: V2| a2 + r * (p - a))
}

fn barycentric(mesh: &SurfaceMesh, f: usize, p: V2) -> [f64; 3] {
    let c = &mesh.chart[f];
    let (x0, x1, x2) = (v2(c[0]), v2(c[1]), v2(c[2]));
    let x = M2::from_columns(&[x1 - x0, x2 - x0]);
    let l = x.try_inverse().expect("degenerate chart") * (p - x0);
    [1.0 - l[0] - l[1], l[0], l[1]]
}

/// Walk from face f towards the chart point p until a face contains it.
fn locate(mesh: &SurfaceMesh, mut f: usize, mut p: V2) -> (usize, [f64; 3]) {
    for _ in 0..4 * mesh.face_count() {
        let b = barycentric(mesh, f, p);
        let (j, min) = b.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &x)| if x < acc.1 { (i, x) } else { acc });
        if min >= -1e-13 {
            let mut b = b.map(|x| x.max(0.0));
            let s: f64 = b.iter().sum();
            b.iter_mut().for_each(|x| *x /= s);
            return (f, b);
        }
        // corner j is opposite local edge j+1
        let (g, t) = cross(mesh, f, (j + 1) % 3);
        p = t(p);
        f = g;
    }
    panic!("point location did not terminate");
}

/// Per-face data for the map energy between a domain metric c and a target metric h.
pub struct MapProblem<'a> {
    mesh: &'a SurfaceMesh,
    c_inv: Vec<M2>,
    area_c: Vec<f64>,
    h: Vec<M2>,
    /// Vertex-averaged target tensor at each corner, in the face chart.
    hv: Vec<[M2; 3]>,
    /// Vertex frame → face chart at each corner.
    rot: Vec<[M2; 3]>,
    xinv: Vec<M2>,
    grad_bary: Vec<[V2; 3]>,
    stars: Vec<Vec<(usize, usize)>>,
    /// Start angle of each star sector in the vertex frame.
    psi: Vec<Vec<f64>>,
}

impl<'a> MapProblem<'a> {
    pub fn new(mesh: &'a SurfaceMesh, c: &MetricField, h: &MetricField) -> Result<Self> {
        let nf = mesh.face_count();
        for (f, g) in c.values.iter().chain(&h.values).enumerate() {
            if !mat2::is_spd(g) {
                return Err(LabError::NotSpd(f % nf));
            }
        }
        let mut rot = vec![[mat2::ident(); 3]; nf];
        let mut hv = vec![[M2::zeros(); 3]; nf];
        let stars = mesh.vertex_stars();
        let mut psis = Vec::with_capacity(stars.len());
        for star in &stars {
            let angles: Vec<f64> = star
                .iter()
                .map(|&(f, k)| {
                    let a = v2(mesh.edge_vec(f, k));
                    let b = -v2(mesh.edge_vec(f, (k + 2) % 3));
                    (a[0] * b[1] - a[1] * b[0]).atan2(a.dot(&b))
                })
                .collect();
            let cone: f64 = angles.iter().sum();
            let mut psi = 0.0;
            let mut avg = M2::zeros();
            let mut starts = Vec::with_capacity(star.len());
            for (&(f, k), a) in star.iter().zip(&angles) {
                let d = mesh.edge_vec(f, k);
                let r = mat2::rot(d[1].atan2(d[0]) - psi);
                rot[f][k] = r;
                avg += r.transpose() * h.values[f] * r * *a;
                starts.push(psi);
                psi += a * 2.0 * PI / cone;
            }
            psis.push(starts);
            avg /= cone;
            for &(f, k) in star {
                hv[f][k] = rot[f][k] * avg * rot[f][k].transpose();
            }
        }
        let mut xinv = Vec::with_capacity(nf);
        let mut grad_bary = Vec::with_capacity(nf);
        for f in 0..nf {
            let p = &mesh.chart[f];
            let x = M2::from_columns(&[v2(p[1]) - v2(p[0]), v2(p[2]) - v2(p[0])]);
            let xi = x.try_inverse().ok_or(LabError::Degenerate(f))?;
            let g1 = V2::new(xi[(0, 0)], xi[(0, 1)]);
            let g2 = V2::new(xi[(1, 0)], xi[(1, 1)]);
            grad_bary.push([-g1 - g2, g1, g2]);
            xinv.push(xi);
        }
        Ok(MapProblem {
            mesh,
            c_inv: c.values.iter().map(|g| mat2::inv(g).expect("spd")).collect(),
            area_c: face_areas(mesh, c),
            h: h.values.clone(),
            hv,
            rot,
            xinv,
            grad_bary,
            stars,
            psi: psis,
        })
    }

    pub fn dim(&self) -> usize {
        2 * self.mesh.vertex_count
    }

    fn chart_disp(&self, f: usize, d: &[f64]) -> [V2; 3] {
        let t = self.mesh.faces[f];
        [0, 1, 2].map(|k| self.rot[f][k] * V2::new(d[2 * t[k]], d[2 * t[k] + 1]))
    }

    /// Differential of the image and the target tensor at the image centroid.
    fn face_state(&self, f: usize, u: &[V2; 3]) -> (M2, M2) {
        let dmat = mat2::ident() + M2::from_columns(&[u[1] - u[0], u[2] - u[0]]) * self.xinv[f];
        let m = (u[0] + u[1] + u[2]) / 3.0;
        let mut ht = self.h[f];
        for k in 0..3 {
            ht += (self.hv[f][k] - self.h[f]) * self.grad_bary[f][k].dot(&m);
        }
        (dmat, ht)
    }

    fn face_energy(&self, f: usize, u: &[V2; 3]) -> f64 {
        let (d, ht) = self.face_state(f, u);
        0.5 * self.area_c[f] * (self.c_inv[f] * d.transpose() * ht * d).trace()
    }

    /// Gradient of the face energy w.r.t. the three chart displacements.
    fn face_grad(&self, f: usize, u: &[V2; 3]) -> [V2; 3] {
        let (d, ht) = self.face_state(f, u);
        let a = self.area_c[f];
        let mm = ht * d * self.c_inv[f] * self.xinv[f].transpose() * a;
        let g1 = V2::new(mm[(0, 0)], mm[(1, 0)]);
        let g2 = V2::new(mm[(0, 1)], mm[(1, 1)]);
        let gm = d * self.c_inv[f] * d.transpose();
        let mut s = V2::zeros();
        for k in 0..3 {
            s += self.grad_bary[f][k] * (0.5 * a * (gm.component_mul(&(self.hv[f][k] - self.h[f]))).sum());
        }
        s /= 3.0;
        [-g1 - g2 + s, g1 + s, g2 + s]
    }

    pub fn energy(&self, d: &[f64]) -> f64 {
        (0..self.mesh.face_count()).map(|f| self.face_energy(f, &self.chart_disp(f, d))).sum()
    }

    pub fn gradient(&self, d: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for f in 0..self.mesh.face_count() {
            let gf = self.face_grad(f, &self.chart_disp(f, d));
            for k in 0..3 {
                let v = self.mesh.faces[f][k];
                let gv = self.rot[f][k].transpose() * gf[k];
                g[2 * v] += gv[0];
                g[2 * v + 1] += gv[1];
            }
        }
        g
    }

    /// Exact Hessian: the gradient is quadratic, so central differences of it are exact.
    pub fn hessian(&self, d: &[f64]) -> Sparse<f64> {
        let mut hm = Sparse::new(self.dim());
        let step = 1e-3;
        for f in 0..self.mesh.face_count() {
            let t = self.mesh.faces[f];
            let base = self.chart_disp(f, d);
            for k in 0..3 {
                for a in 0..2 {
                    let dir = self.rot[f][k] * if a == 0 { V2::new(step, 0.0) } else { V2::new(0.0, step) };
                    let mut up = base;
                    up[k] += dir;
                    let mut dn = base;
                    dn[k] -= dir;
                    let (gp, gn) = (self.face_grad(f, &up), self.face_grad(f, &dn));
                    for j in 0..3 {
                        let col = self.rot[f][j].transpose() * (gp[j] - gn[j]) / (2.0 * step);
                        hm.add(2 * t[j], 2 * t[k] + a, col[0]);
                        hm.add(2 * t[j] + 1, 2 * t[k] + a, col[1]);
                    }
                }
            }
        }
        hm
    }

    /// Newton iteration with backtracking; energies of accepted iterates are returned.
    pub fn solve(&self, d0: Vec<f64>, tol: f64, max_iter: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut d = d0;
        let mut e = self.energy(&d);
        let mut trace = vec![e];
        for _ in 0..max_iter {
            let g = self.gradient(&d);
            let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if gn < tol {
                return Ok((d, trace));
            }
            let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
            let mut step = self.hessian(&d).lu().map(|lu| lu.solve(&rhs)).unwrap_or_else(|| rhs.clone());
            if step.iter().zip(&g).map(|(s, x)| s * x).sum::<f64>() >= 0.0 {
                step = rhs;
            }
            let mut lambda = 1.0;
            loop {
                let dt: Vec<f64> = d.iter().zip(&step).map(|(a, s)| a + lambda * s).collect();
                let et = self.energy(&dt);
                // near the minimum the energy decrease drowns in rounding; accept tiny full steps
                if et <= e || (lambda == 1.0 && et - e <= 1e-13 * e.abs()) {
                    d = dt;
                    e = et.min(e);
                    break;
                }
                lambda *= 0.5;
                if lambda < 1e-10 {
                    return Err(LabError::NoConvergence(format!(
                        "harmonic map line search stalled: energy {e}, gradient norm {gn:.3e}"
                    )));
                }
            }
            trace.push(e);
        }
        let gn = self.gradient(&d).iter().map(|x| x * x).sum::<f64>().sqrt();
        if gn < tol {
            return Ok((d, trace));
        }
        Err(LabError::NoConvergence(format!("harmonic map: gradient norm {gn:.3e} after {max_iter} iterations")))
    }

    /// Pullback of the target under the map, per face, in chart coordinates.
    pub fn pullback(&self, d: &[f64]) -> MetricField {
        MetricField::variation(
            (0..self.mesh.face_count())
                .map(|f| {
                    let (dm, ht) = self.face_state(f, &self.chart_disp(f, d));
                    dm.transpose() * ht * dm
                })
                .collect(),
        )
    }

    /// Faces whose image is folded (negative Jacobian).
    pub fn folded_faces(&self, d: &[f64]) -> usize {
        (0..self.mesh.face_count())
            .filter(|&f| self.face_state(f, &self.chart_disp(f, d)).0.determinant() <= 0.0)
            .count()
    }

    /// Star slot whose sector contains the direction of a vertex-frame vector.
    fn sector(&self, v: usize, x: V2) -> usize {
        let a = x[1].atan2(x[0]).rem_euclid(2.0 * PI);
        self.psi[v].iter().rposition(|&p| p <= a).unwrap_or(0)
    }

    pub fn to_map(&self, d: &[f64]) -> DiscreteMap {
        let mut face = Vec::with_capacity(self.mesh.vertex_count);
        let mut bary = Vec::with_capacity(self.mesh.vertex_count);
        for v in 0..self.mesh.vertex_count {
            let x = V2::new(d[2 * v], d[2 * v + 1]);
            let (f, k) = self.stars[v][self.sector(v, x)];
            let (g, b) = locate(self.mesh, f, v2(self.mesh.chart[f][k]) + self.rot[f][k] * x);
            face.push(g);
            bary.push(b);
        }
        DiscreteMap { face, bary }
    }

    /// Displacements of a map: each image is developed into the star of its vertex and
    /// moved around the star until its direction lies in the sector of the face used.
    pub fn from_map(&self, map: &DiscreteMap) -> Result<Vec<f64>> {
        map.validate(self.mesh)?;
        let mut d = vec![0.0; self.dim()];
        for v in 0..self.mesh.vertex_count {
            let t = map.face[v];
            let c = &self.mesh.chart[t];
            let b = map.bary[v];
            let p = v2(c[0]) * b[0] + v2(c[1]) * b[1] + v2(c[2]) * b[2];
            let star = &self.stars[v];
            let (mut j, mut p) = develop(self.mesh, t, star, p)
                .ok_or_else(|| LabError::Precondition(format!("image of vertex {v} too far")))?;
            let mut x = V2::zeros();
            for _ in 0..star.len() {
                let (f, k) = star[j];
                x = self.rot[f][k].transpose() * (p - v2(self.mesh.chart[f][k]));
                if x.norm() < 1e-15 {
                    break;
                }
                let want = self.sector(v, x);
                if want == j {
                    break;
                }
                let n = star.len();
                // step one face towards the wanted sector
                let ccw = (want + n - j) % n <= n / 2;
                let (edge, next) = if ccw { ((k + 2) % 3, (j + 1) % n) } else { (k, (j + n - 1) % n) };
                let (g, tr) = cross(self.mesh, f, edge);
                debug_assert_eq!(g, star[next].0);
                p = tr(p);
                j = next;
            }
            d[2 * v] = x[0];
            d[2 * v + 1] = x[1];
        }
        Ok(d)
    }
}

/// Carry a chart point of face `from` into the chart of the nearest face of `star`;
/// returns the star slot and the developed point.
fn develop(mesh: &SurfaceMesh, from: usize, star: &[(usize, usize)], p: V2) -> Option<(usize, V2)> {
    use std::collections::VecDeque;
    let mut seen = vec![false; mesh.face_count()];
    let mut q = VecDeque::from([(from, p, 0usize)]);
    seen[from] = true;
    while let Some((f, x, depth)) = q.pop_front() {
        if let Some(j) = star.iter().position(|s| s.0 == f) {
            return Some((j, x));
        }
        if depth > 12 {
            continue;
        }
        for k in 0..3 {
            let (g, t) = cross(mesh, f, k);
            if !seen[g] {
                seen[g] = true;
                q.push_back((g, t(x), depth + 1));
            }
        }
    }
    None
}

pub const HARMONIC_TOL: f64 = 1e-8;
pub const HARMONIC_MAX_ITER: usize = 100;

pub fn map_energy(mesh: &SurfaceMesh, f: &DiscreteMap, c: &MetricField, h: &MetricField) -> Result<f64> {
    let p = MapProblem::new(mesh, c, h)?;
    Ok(p.energy(&p.from_map(f)?))
}

#[derive(Clone, Debug)]
pub struct HarmonicMap {
    pub map: DiscreteMap,
    pub displacement: Vec<f64>,
    pub energy: f64,
    pub energy_trace: Vec<f64>,
    pub gradient_norm: f64,
    pub folded_faces: usize,
    pub hopf: QuadDiff,
}

pub fn harmonic_solve(mesh: &SurfaceMesh, c: &MetricField, h: &MetricField, seed: &DiscreteMap) -> Result<HarmonicMap> {
    let p = MapProblem::new(mesh, c, h)?;
    let d0 = p.from_map(seed)?;
    harmonic_from(&p, c, d0)
}

/// Solve from raw displacements (warm starts skip the map round trip).
pub fn harmonic_from(p: &MapProblem, c: &MetricField, d0: Vec<f64>) -> Result<HarmonicMap> {
    let (d, trace) = p.solve(d0, HARMONIC_TOL, HARMONIC_MAX_ITER)?;
    let gradient_norm = p.gradient(&d).iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(HarmonicMap {
        map: p.to_map(&d),
        energy: *trace.last().unwrap(),
        energy_trace: trace,
        gradient_norm,
        folded_faces: p.folded_faces(&d),
        hopf: hopf_of(p, c, &d),
        displacement: d,
    })
}

fn hopf_of(p: &MapProblem, c: &MetricField, d: &[f64]) -> QuadDiff {
    from_tensor(p.mesh, &p.pullback(d).map(|_, m| m * 0.5), c)
}

/// (2,0)-part of the pullback metric in the c-orthonormal frames.
pub fn hopf(mesh: &SurfaceMesh, f: &DiscreteMap, c: &MetricField, h: &MetricField) -> Result<QuadDiff> {
    let p = MapProblem::new(mesh, c, h)?;
    let d = p.from_map(f)?;
    Ok(hopf_of(&p, c, &d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{area, build_bolza_mesh};
    use crate::wolf::hyperbolic_background;

    #[test]
    fn identity_round_trips_through_displacements() {
        let m = build_bolza_mesh(1).unwrap();
        let c = MetricField::chart(&m);
        let p = MapProblem::new(&m, &c, &c).unwrap();
        let d = p.from_map(&DiscreteMap::identity(&m)).unwrap();
        assert!(d.iter().all(|x| x.abs() < 1e-14));
        let d: Vec<f64> = (0..p.dim()).map(|i| 0.01 * (i as f64 * 0.37).sin()).collect();
        let back = p.from_map(&p.to_map(&d)).unwrap();
        let err = d.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn gradient_and_hessian_match_differences() {
        let m = build_bolza_mesh(1).unwrap();
        let h = hyperbolic_background(&m).unwrap();
        let c = MetricField::chart(&m);
        let p = MapProblem::new(&m, &c, &h).unwrap();
        let d: Vec<f64> = (0..p.dim()).map(|i| 0.02 * (i as f64 * 1.7).cos()).collect();
        let dir: Vec<f64> = (0..p.dim()).map(|i| (i as f64 * 0.91).sin()).collect();
        let s = 1e-5;
        let at = |t: f64| d.iter().zip(&dir).map(|(a, b)| a + t * b).collect::<Vec<_>>();
        let fd = (p.energy(&at(s)) - p.energy(&at(-s))) / (2.0 * s);
        let an: f64 = p.gradient(&d).iter().zip(&dir).map(|(a, b)| a * b).sum();
        assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "{fd} {an}");
        let hd = p.hessian(&d).mul(&dir);
        let (gp, gm) = (p.gradient(&at(s)), p.gradient(&at(-s)));
        for i in 0..p.dim() {
            assert!(((gp[i] - gm[i]) / (2.0 * s) - hd[i]).abs() < 1e-6, "{i}");
        }
    }

    #[test]
    fn conformal_target_gives_identity_with_area_energy() {
        let run = |r| {
            let m = build_bolza_mesh(r).unwrap();
            let h = hyperbolic_background(&m).unwrap();
            let c = h.map(|f, g| g * (1.0 + 0.1 * (f as f64).sin()));
            let hm = harmonic_solve(&m, &c, &h, &DiscreteMap::identity(&m)).unwrap();
            assert!(hm.gradient_norm < HARMONIC_TOL);
            assert!(hm.energy_trace.windows(2).all(|w| w[1] <= w[0] + 1e-13 * w[0]));
            let dmax = hm.displacement.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            ((hm.energy - area(&m, &h)).abs(), dmax)
        };
        let (e1, d1) = run(1);
        let (e2, d2) = run(2);
        assert!(e2 < 1e-3 * 4.0 * PI && e2 < e1 / 3.0, "{e1} {e2}");
        assert!(d2 < d1 / 1.5, "{d1} {d2}");
    }

    #[test]
    fn energy_is_invariant_under_facewise_rescaling_of_the_domain() {
        let m = build_bolza_mesh(1).unwrap();
        let h = hyperbolic_background(&m).unwrap();
        let c = MetricField::chart(&m);
        let c2 = c.map(|f, g| g * (0.5 + (f % 5) as f64));
        let p1 = MapProblem::new(&m, &c, &h).unwrap();
        let p2 = MapProblem::new(&m, &c2, &h).unwrap();
        let d: Vec<f64> = (0..p1.dim()).map(|i| 0.01 * (i as f64).cos()).collect();
        assert!((p1.energy(&d) - p2.energy(&d)).abs() < 1e-10);
    }
}
