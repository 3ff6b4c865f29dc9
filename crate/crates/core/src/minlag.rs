//! Labourie operators of metric pairs, the function F, its first variation and
//! second-order probes.

use crate::center::{center_find, f_general_near};
use crate::error::{LabError, Result};
use crate::geom::mat2::{self, M2};
use crate::geom::mesh::chart_from_lengths;
use crate::geom::ops::face_areas;
use crate::geom::{MetricField, OperatorField, ScalarField, SurfaceMesh};
use crate::quaddiff::{harmonic_beltrami, QuadDiff};
use crate::wolf::{resolvent, wolf_solve, WolfChart};
use nalgebra::{DMatrix, Vector2};
use num_complex::Complex64 as C64;

#[derive(Clone, Debug)]
pub struct Labourie {
    pub b: OperatorField,
    /// Largest |(det h⁻¹h*)^{1/4} − 1| over faces: the determinant normalization applied.
    pub normalization: f64,
    /// Relative circulation of b around dual cells in the developed h-flat structure.
    pub codazzi: f64,
}

/// Positive h-self-adjoint root of h⁻¹h* per face, without normalization.
pub fn labourie_root(h: &MetricField, hstar: &MetricField) -> Result<OperatorField> {
    let values = h
        .values
        .iter()
        .zip(&hstar.values)
        .enumerate()
        .map(|(f, (g, gs))| {
            if !mat2::is_spd(g) || !mat2::is_spd(gs) {
                return Err(LabError::NotSpd(f));
            }
            mat2::pos_sqrt(&(mat2::inv(g).ok_or(LabError::NotSpd(f))? * gs)).ok_or(LabError::NotSpd(f))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OperatorField { values })
}

/// The root of h⁻¹h* rescaled to determinant one, per face.
pub fn labourie_normalized(mesh: &SurfaceMesh, h: &MetricField, hstar: &MetricField) -> Result<Labourie> {
    let root = labourie_root(h, hstar)?;
    let dets: Vec<f64> = root.values.iter().map(|r| r.determinant().sqrt()).collect();
    let norm = dets.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    let b = root.map(|f, r| r / dets[f]);
    let codazzi = codazzi_residual(mesh, h, &b);
    Ok(Labourie { b, normalization: norm, codazzi })
}

/// Discrete d^∇b: the circulation Σ b(t) of b along the boundary of each vertex's dual
/// cell, developed with the flat structure of h, relative to Σ |b(t)|.
pub fn codazzi_residual(mesh: &SurfaceMesh, h: &MetricField, b: &OperatorField) -> f64 {
    let sq = h.edge_sq(mesh);
    let nf = mesh.face_count();
    let mut iso = Vec::with_capacity(nf);
    let mut y = Vec::with_capacity(nf);
    for f in 0..nf {
        let c = &mesh.chart[f];
        let x = M2::new(c[1][0] - c[0][0], c[2][0] - c[0][0], c[1][1] - c[0][1], c[2][1] - c[0][1]);
        let p = chart_from_lengths([sq[f][0].sqrt(), sq[f][1].sqrt(), sq[f][2].sqrt()]);
        let yy = M2::new(p[1][0], p[2][0], p[1][1], p[2][1]);
        let a = yy * x.try_inverse().expect("chart");
        iso.push(a * b.values[f] * a.try_inverse().expect("metric"));
        y.push(p);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for star in mesh.vertex_stars() {
        let mut psi = 0.0;
        let mut circ = Vector2::zeros();
        let mut mag = 0.0;
        for &(f, k) in &star {
            let p = &y[f];
            let v = |i: usize| Vector2::new(p[i % 3][0], p[i % 3][1]);
            let mid = |i: usize| (v(i) + v(i + 1)) / 2.0;
            let e_out = v(k + 1) - v(k);
            let e_in = v(k + 2) - v(k);
            let beta = e_out[1].atan2(e_out[0]);
            let r = mat2::rot(psi - beta);
            let t = mid(k + 2) - mid(k);
            let bt = iso[f] * t;
            circ += r * bt;
            mag += bt.norm();
            psi += (e_out[0] * e_in[1] - e_out[1] * e_in[0]).atan2(e_out.dot(&e_in));
        }
        num += circ.norm_squared();
        den += mag * mag;
    }
    (num / den).sqrt()
}

/// F = ∫ tr(b) da_h. The integrand is taken from the unnormalized root B, whose trace
/// equals tr(b) when det B = 1 and for which tr(B⁻¹) det B = tr B makes F symmetric.
pub fn f_normalized(mesh: &SurfaceMesh, h: &MetricField, hstar: &MetricField) -> Result<f64> {
    let root = labourie_root(h, hstar)?;
    Ok(face_areas(mesh, h).iter().zip(&root.values).map(|(a, b)| a * b.trace()).sum())
}

/// ⟨a, b⟩_h = tr(h⁻¹ a h⁻¹ b) for symmetric forms.
fn pair_h(g: &M2, a: &M2, b: &M2) -> f64 {
    let gi = mat2::inv(g).expect("metric");
    (gi * a * gi * b).trace()
}

/// β(ḣ) = −½ ∫ ⟨ḣ, h(b·,·) − tr(b) h⟩_h da_h.
pub fn df_covector(mesh: &SurfaceMesh, h: &MetricField, b: &OperatorField, hdot: &MetricField) -> f64 {
    let areas = face_areas(mesh, h);
    (0..mesh.face_count())
        .map(|f| {
            let g = &h.values[f];
            let bb = &b.values[f];
            let form = g * bb - g * bb.trace();
            -0.5 * pair_h(g, &hdot.values[f], &form) * areas[f]
        })
        .sum()
}

/// Ḟ along h_t = h(α_t·, α_t·) with b_t the root of h_t⁻¹h*:
/// ∫ [tr(b_t) tr(α_t⁻¹α̇_t) − tr(α_t⁻¹α̇_t b_t)] da_t.
pub fn first_variation(
    mesh: &SurfaceMesh,
    h: &MetricField,
    alpha: &OperatorField,
    alpha_dot: &OperatorField,
    hstar: &MetricField,
) -> Result<f64> {
    let ht = h.pullback(alpha);
    let b = labourie_root(&ht, hstar)?;
    let areas = face_areas(mesh, &ht);
    let mut s = 0.0;
    for f in 0..mesh.face_count() {
        let w = mat2::inv(&alpha.values[f]).ok_or(LabError::Degenerate(f))? * alpha_dot.values[f];
        s += (b.values[f].trace() * w.trace() - (w * b.values[f]).trace()) * areas[f];
    }
    Ok(s)
}

/// α with h_t = h(α·, α·): the positive h-self-adjoint root of h⁻¹h_t.
pub fn alpha_of(h: &MetricField, ht: &MetricField) -> Result<OperatorField> {
    OperatorField {
        values: h.values.iter().zip(&ht.values).map(|(g, gt)| mat2::inv(g).expect("metric") * gt).collect(),
    }
    .pos_sqrt()
}

/// Ḟ_t of a metric family at t, with α̇ from central differences of α over ±dt.
pub fn first_variation_path(
    mesh: &SurfaceMesh,
    h: &MetricField,
    family: impl Fn(f64) -> Result<MetricField>,
    hstar: &MetricField,
    t: f64,
    dt: f64,
) -> Result<f64> {
    let a = alpha_of(h, &family(t)?)?;
    let ap = alpha_of(h, &family(t + dt)?)?;
    let am = alpha_of(h, &family(t - dt)?)?;
    let ad = OperatorField { values: ap.values.iter().zip(&am.values).map(|(p, m)| (p - m) / (2.0 * dt)).collect() };
    first_variation(mesh, h, &a, &ad, hstar)
}

/// |ν_φ|² = ½ tr(ν_φ²) per face.
pub fn nu_sq(mesh: &SurfaceMesh, q: &QuadDiff, h: &MetricField) -> Vec<f64> {
    harmonic_beltrami(mesh, q, h).values.iter().map(|n| 0.5 * (n * n).trace()).collect()
}

/// Vertex values of a face quantity by area-weighted averaging.
pub fn to_vertices(mesh: &SurfaceMesh, vals: &[f64], h: &MetricField) -> ScalarField {
    let areas = face_areas(mesh, h);
    let mut s = vec![0.0; mesh.vertex_count];
    let mut w = vec![0.0; mesh.vertex_count];
    for (f, t) in mesh.faces.iter().enumerate() {
        for &v in t {
            s[v] += vals[f] * areas[f];
            w[v] += areas[f];
        }
    }
    ScalarField { values: s.iter().zip(&w).map(|(a, b)| a / b).collect() }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct HessProbe {
    pub fd_hess: f64,
    pub lower_bound: f64,
    pub wp2: f64,
}

pub const HESS_STEP: f64 = 1e-2;

/// Second derivative of t ↦ F(W_h(tq), h*) at 0 by Richardson-extrapolated central
/// differences (steps δ, δ/2), with the two lower bounds.
pub fn hess_diag_and_bound(bg: &WolfChart, h: &MetricField, hstar: &MetricField, q: &QuadDiff) -> Result<HessProbe> {
    let mesh = bg.mesh;
    let ns = nu_sq(mesh, q, h);
    let areas = face_areas(mesh, h);
    let wp2 = 2.0 * ns.iter().zip(&areas).map(|(a, b)| a * b).sum::<f64>();
    let u = resolvent(mesh, h, &to_vertices(mesh, &ns, h))?;
    let uf = u.face_mean(mesh);
    let b = labourie_normalized(mesh, h, hstar)?.b;
    let lower_bound: f64 = (0..mesh.face_count()).map(|f| 2.0 * uf[f] * b.values[f].trace() * areas[f]).sum();
    if q.values.iter().all(|z| z.norm() == 0.0) {
        return Ok(HessProbe { fd_hess: 0.0, lower_bound, wp2 });
    }
    let c0 = center_find(bg, h, hstar, None)?;
    let f0 = c0.total_energy();
    let f_at = |t: f64| -> Result<f64> { f_general_near(bg, &wolf_solve(mesh, h, q, t)?.h, hstar, &c0) };
    let d = HESS_STEP;
    let second = |s: f64| -> Result<f64> { Ok((f_at(s)? - 2.0 * f0 + f_at(-s)?) / (s * s)) };
    let (a1, a2) = (second(d)?, second(d / 2.0)?);
    Ok(HessProbe { fd_hess: (4.0 * a2 - a1) / 3.0, lower_bound, wp2 })
}

/// ḣ = 2h(ν_q·,·), the tangent of the Wolf ray t ↦ W_h(tq) at t = 0.
pub fn wolf_tangent(mesh: &SurfaceMesh, q: &QuadDiff, h: &MetricField) -> MetricField {
    let nu = harmonic_beltrami(mesh, q, h);
    MetricField::variation(h.values.iter().zip(&nu.values).map(|(g, n)| g * n * 2.0).collect())
}

#[derive(Clone, Debug)]
pub struct JacobianProbe {
    pub matrix: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// ‖J − Jᵀ‖ / ‖J‖.
    pub asymmetry: f64,
    pub near_singular: bool,
}

/// Finite-difference Jacobian of h* ↦ (dF(h, h*)(ḣᵢ))ᵢ over the real Wolf directions at h*,
/// with ḣᵢ the Wolf tangents of the basis at h. `at_h` and `at_hstar` are charts based at h
/// and h*.
pub fn d1f_jacobian_probe(mesh: &SurfaceMesh, at_h: &WolfChart, at_hstar: &WolfChart, step: f64) -> Result<JacobianProbe> {
    let h = &at_h.c;
    let dirs: Vec<MetricField> = at_h
        .basis
        .iter()
        .flat_map(|q| [wolf_tangent(mesh, q, h), wolf_tangent(mesh, &q.scale(C64::new(0.0, 1.0)), h)])
        .collect();
    let n = dirs.len();
    let covector = |y: &[f64]| -> Result<Vec<f64>> {
        let a: Vec<C64> = y.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
        let hs = at_hstar.solve(&a, None)?.h;
        let b = labourie_normalized(mesh, h, &hs)?.b;
        Ok(dirs.iter().map(|d| df_covector(mesh, h, &b, d)).collect())
    };
    let mut j = DMatrix::zeros(n, n);
    for c in 0..n {
        let mut yp = vec![0.0; n];
        yp[c] = step;
        let mut ym = vec![0.0; n];
        ym[c] = -step;
        let (p, m) = (covector(&yp)?, covector(&ym)?);
        for r in 0..n {
            j[(r, c)] = (p[r] - m[r]) / (2.0 * step);
        }
    }
    let sv: Vec<f64> = {
        let mut s: Vec<f64> = j.clone().svd(false, false).singular_values.iter().copied().collect();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        s
    };
    let asymmetry = (&j - j.transpose()).norm() / j.norm();
    let near_singular = sv[0] < 1e-6 * sv[n - 1];
    Ok(JacobianProbe { matrix: j, singular_values: sv, asymmetry, near_singular })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{area, build_bolza_mesh};
    use crate::wolf::hyperbolic_background;

    #[test]
    fn diagonal_pair_has_identity_operator() {
        let m = build_bolza_mesh(1).unwrap();
        let h = hyperbolic_background(&m).unwrap();
        let l = labourie_normalized(&m, &h, &h).unwrap();
        assert!(l.b.values.iter().all(|b| (b - mat2::ident()).norm() < 1e-14));
        let f = f_normalized(&m, &h, &h).unwrap();
        assert!((f - 2.0 * area(&m, &h)).abs() < 1e-10);
    }

    #[test]
    fn operator_identities_per_face() {
        let m = build_bolza_mesh(1).unwrap();
        let h = hyperbolic_background(&m).unwrap();
        let hs = h.map(|f, g| {
            let a = M2::new(1.0 + 0.3 * (f as f64).sin(), 0.2, -0.1, 0.9);
            a.transpose() * g * a
        });
        let b = labourie_normalized(&m, &h, &hs).unwrap().b;
        let bs = labourie_normalized(&m, &hs, &h).unwrap().b;
        for f in 0..m.face_count() {
            let (g, gs, bb) = (&h.values[f], &hs.values[f], &b.values[f]);
            assert!((bb.determinant() - 1.0).abs() < 1e-12);
            // h(b·,b·) = h* up to the determinant normalization
            let scale = (mat2::inv(g).unwrap() * gs).determinant().sqrt();
            assert!((mat2::pullback(g, bb) * scale - gs).norm() < 1e-12 * gs.norm());
            assert!((bs.values[f] - bb.try_inverse().unwrap()).norm() < 1e-12 * bb.norm());
            let i = mat2::ident();
            assert!(((i + bb) * (i + bb) - bb * (2.0 + bb.trace())).norm() < 1e-12 * bb.norm_squared());
        }
        let fa = f_normalized(&m, &h, &hs).unwrap();
        let fb = f_normalized(&m, &hs, &h).unwrap();
        assert!((fa - fb).abs() < 1e-10 * fa);
    }

    #[test]
    fn conformal_family_variation_is_f() {
        let m = build_bolza_mesh(1).unwrap();
        let h = hyperbolic_background(&m).unwrap();
        let hs = h.map(|f, g| g * (1.0 + 0.2 * (f as f64).cos()));
        let fam = |t: f64| Ok(h.scale((1.0 + t) * (1.0 + t)));
        let d = first_variation_path(&m, &h, fam, &hs, 0.0, 1e-4).unwrap();
        let f = f_normalized(&m, &h, &hs).unwrap();
        assert!((d - f).abs() < 1e-7 * f, "{d} {f}");
        let fd = (f_normalized(&m, &h.scale(1.0001f64.powi(2)), &hs).unwrap()
            - f_normalized(&m, &h.scale(0.9999f64.powi(2)), &hs).unwrap())
            / 2e-4;
        assert!((fd - f).abs() < 1e-6 * f);
    }

    #[test]
    fn covector_matches_first_variation_at_zero() {
        let m = build_bolza_mesh(1).unwrap();
        let h = hyperbolic_background(&m).unwrap();
        let hs = h.map(|f, g| {
            let a = M2::new(1.1, 0.1 * (f as f64).cos(), 0.0, 0.95);
            a.transpose() * g * a
        });
        let hdot = h.map(|f, g| {
            let a = M2::new(0.3, 0.1 * (f as f64).sin(), -0.05, -0.2);
            a.transpose() * g + g * a
        });
        let b = labourie_root(&h, &hs).unwrap();
        let cov = df_covector(&m, &h, &b, &hdot);
        let fam = |t: f64| Ok(MetricField::variation(h.values.iter().zip(&hdot.values).map(|(g, d)| g + d * t).collect()));
        let fv = first_variation_path(&m, &h, fam, &hs, 0.0, 1e-5).unwrap();
        let fd = (f_normalized(&m, &fam(1e-5).unwrap(), &hs).unwrap() - f_normalized(&m, &fam(-1e-5).unwrap(), &hs).unwrap()) / 2e-5;
        assert!((fv - fd).abs() < 1e-6 * fd.abs().max(1.0), "{fv} {fd}");
        assert!((cov - fv).abs() < 1e-6 * fd.abs().max(1.0), "{cov} {fv}");
    }
}
