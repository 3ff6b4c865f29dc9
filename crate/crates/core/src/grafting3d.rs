//! Smooth grafting, the constant-curvature surface of a hyperbolic end, its equidistant
//! foliation, data at infinity and the renormalized volume.

use crate::error::{LabError, Result};
use crate::geom::mat2::{self, M2};
use crate::geom::ops::{face_areas, vertex_areas};
use crate::geom::regge::{edge_ends, edge_values, metric_from_edges, CurvatureProblem, Scaling};
use crate::geom::{gauss_curvature, MetricField, OperatorField, SurfaceMesh};
use crate::minlag::{codazzi_residual, df_covector, labourie_normalized};
use std::f64::consts::PI;

/// β = cosh(s/2)𝟙 + sinh(s/2)b per face.
fn beta(b: &OperatorField, s: f64) -> OperatorField {
    b.map(|_, m| mat2::ident() * (s / 2.0).cosh() + m * (s / 2.0).sinh())
}

/// h# = h(β·,β·) with β = cosh(s/2)𝟙 + sinh(s/2)b.
pub fn sgr_metric(mesh: &SurfaceMesh, s: f64, h: &MetricField, hstar: &MetricField) -> Result<MetricField> {
    if !(s > 0.0) {
        return Err(LabError::Precondition(format!("grafting parameter {s} must be positive")));
    }
    let b = labourie_normalized(mesh, h, hstar)?.b;
    MetricField::new(h.pullback(&beta(&b, s)).values)
}

/// Face values averaged to vertices with angle-free equal weights.
fn face_to_vertex(mesh: &SurfaceMesh, vals: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; mesh.vertex_count];
    let mut n = vec![0.0; mesh.vertex_count];
    for (f, t) in mesh.faces.iter().enumerate() {
        for &v in t {
            s[v] += vals[f];
            n[v] += 1.0;
        }
    }
    s.iter().zip(&n).map(|(a, b)| a / b).collect()
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct CurvatureBound {
    pub tau: f64,
    /// −(1+τ)⁻².
    pub bound: f64,
    pub k_min: f64,
    /// Largest |K(h_τ)·det β_τ + 1| over vertices, h_τ = h(β_τ·,β_τ·), β_τ = 𝟙 + τb.
    pub gauss_defect: f64,
    /// Area-weighted L² mean of the same defect.
    pub gauss_defect_l2: f64,
    /// Largest e^{2u} of the hyperbolic metric e^{2u}h_τ.
    pub max_conformal_factor: f64,
    pub liouville_residual: f64,
    pub liouville_iterations: usize,
}

pub const LIOUVILLE_TOL: f64 = 1e-10;

/// Vertex values of tr b, area-weighted over the incident faces.
fn trace_at_vertices(mesh: &SurfaceMesh, b: &OperatorField, h: &MetricField) -> Vec<f64> {
    let areas = face_areas(mesh, h);
    let (mut s, mut w) = (vec![0.0; mesh.vertex_count], vec![0.0; mesh.vertex_count]);
    for (f, t) in mesh.faces.iter().enumerate() {
        for &v in t {
            s[v] += b.values[f].trace() * areas[f];
            w[v] += areas[f];
        }
    }
    s.iter().zip(&w).map(|(a, b)| a / b).collect()
}

/// h(β_τ·,β_τ·) as a Regge metric. Since tr(b)·h(b·,·) = h + h* when det b = 1, the edge values
/// are h_e + 2τ(h_e + h*_e)/tr b + τ²h*_e with tr b averaged over the edge ends.
pub fn graft_edges(mesh: &SurfaceMesh, tau: f64, h: &MetricField, hstar: &MetricField, trb: &[f64]) -> MetricField {
    let (he, hse) = (edge_values(mesh, h), edge_values(mesh, hstar));
    let ev: Vec<f64> = edge_ends(mesh)
        .iter()
        .enumerate()
        .map(|(e, &(p, q))| he[e] + 2.0 * tau * (he[e] + hse[e]) / (0.5 * (trb[p] + trb[q])) + tau * tau * hse[e])
        .collect();
    metric_from_edges(mesh, &ev)
}

/// Curvature of the rescaled grafting metric h_τ = h(β_τ·,β_τ·), τ = tanh(s/2), against the
/// bound −(1+τ)⁻², and the hyperbolic metric conformal to h_τ.
pub fn curvature_bound_check(mesh: &SurfaceMesh, s: f64, h: &MetricField, hstar: &MetricField) -> Result<CurvatureBound> {
    let tau = (s / 2.0).tanh();
    let b = labourie_normalized(mesh, h, hstar)?.b;
    let trb = trace_at_vertices(mesh, &b, h);
    let ht = graft_edges(mesh, tau, h, hstar, &trb);
    let k = gauss_curvature(mesh, &ht)?;
    let defect: Vec<f64> = k.values.iter().zip(&trb).map(|(k, t)| k * (1.0 + tau * tau + tau * t) + 1.0).collect();
    let va = vertex_areas(mesh, &ht);
    let gauss_defect = defect.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let gauss_defect_l2 = (defect.iter().zip(&va).map(|(d, a)| d * d * a).sum::<f64>() / va.iter().sum::<f64>()).sqrt();
    let k_min = k.values.iter().copied().fold(f64::INFINITY, f64::min);
    let p = CurvatureProblem {
        mesh,
        base: edge_values(mesh, &ht),
        extra: vec![0.0; mesh.edge_count()],
        target: vec![-1.0; mesh.vertex_count],
        scaling: Scaling::Exponential,
    };
    let (u, trace) = p.solve(vec![0.0; mesh.vertex_count], LIOUVILLE_TOL, 50)?;
    Ok(CurvatureBound {
        tau,
        bound: -(1.0 + tau).powi(-2),
        k_min,
        gauss_defect,
        gauss_defect_l2,
        max_conformal_factor: u.iter().map(|x| (2.0 * x).exp()).fold(0.0, f64::max),
        liouville_residual: *trace.residuals.last().unwrap(),
        liouville_iterations: trace.iterations,
    })
}

/// First, second and third fundamental forms and shape operator of the surface of
/// constant curvature −1/cosh²(s/2) in the hyperbolic end.
#[derive(Clone, Debug)]
pub struct EndData {
    pub i: MetricField,
    pub ii: MetricField,
    pub iii: MetricField,
    pub b: OperatorField,
}

pub fn end_data(mesh: &SurfaceMesh, s: f64, h: &MetricField, hstar: &MetricField) -> Result<EndData> {
    let b = labourie_normalized(mesh, h, hstar)?.b;
    Ok(end_data_from(h, &b, s))
}

pub fn end_data_from(h: &MetricField, b: &OperatorField, s: f64) -> EndData {
    let (c, sh) = ((s / 2.0).cosh(), (s / 2.0).sinh());
    let i = h.scale(c * c);
    let ii = MetricField::variation(h.values.iter().zip(&b.values).map(|(g, m)| g * m * (c * sh)).collect());
    let iii = h.pullback(b).scale(sh * sh);
    EndData { i, ii, iii, b: b.map(|_, m| m * (sh / c)) }
}

/// Largest |K_I + 1 − det B| over vertices (hyperbolic Gauss equation).
pub fn gauss_residual(mesh: &SurfaceMesh, i: &MetricField, b: &OperatorField) -> Result<f64> {
    let k = gauss_curvature(mesh, &i.conform(mesh))?;
    let det = face_to_vertex(mesh, &b.det());
    Ok(k.values.iter().zip(&det).map(|(k, d)| (k + 1.0 - d).abs()).fold(0.0, f64::max))
}

#[derive(Clone, Debug)]
pub struct Leaf {
    pub t: f64,
    pub i: MetricField,
    pub b: OperatorField,
    /// Mean curvature tr B_t per face.
    pub h: Vec<f64>,
    /// Face areas of I_t.
    pub da: Vec<f64>,
}

/// The leaf at distance t: I_t = I(E·,E·), B_t = E⁻¹(sinh t 𝟙 + cosh t B), E = cosh t 𝟙 + sinh t B.
pub fn equidistant_evolve(mesh: &SurfaceMesh, i: &MetricField, b: &OperatorField, t: f64) -> Result<Leaf> {
    let (c, s) = (t.cosh(), t.sinh());
    let e = b.map(|_, m| mat2::ident() * c + m * s);
    let mut bt = Vec::with_capacity(e.values.len());
    for (f, (ef, m)) in e.values.iter().zip(&b.values).enumerate() {
        let inv = mat2::inv(ef).filter(|_| ef.determinant() > 0.0).ok_or_else(|| {
            LabError::Precondition(format!("evolution factor singular on face {f} at t = {t} (past the focal distance)"))
        })?;
        bt.push(inv * (mat2::ident() * s + m * c));
    }
    let areas = face_areas(mesh, i);
    let da = e.values.iter().zip(&areas).map(|(m, a)| m.determinant() * a).collect();
    let b = OperatorField { values: bt };
    Ok(Leaf { t, i: i.pullback(&e), h: b.trace(), da, b })
}

#[derive(Clone, Debug)]
pub struct LeafResiduals {
    /// max ‖dB_t/dt − (𝟙 − B_t²)‖.
    pub shape: f64,
    /// max |dH_t/dt − (2 − tr B_t²)|.
    pub mean: f64,
    /// max ‖dI_t/dt − 2I𝐼_t‖ relative to ‖I_t‖.
    pub metric: f64,
}

/// The equidistant evolution equations at t by centered differences with step dt.
pub fn leaf_residuals(mesh: &SurfaceMesh, i: &MetricField, b: &OperatorField, t: f64, dt: f64) -> Result<LeafResiduals> {
    let l = equidistant_evolve(mesh, i, b, t)?;
    let lp = equidistant_evolve(mesh, i, b, t + dt)?;
    let lm = equidistant_evolve(mesh, i, b, t - dt)?;
    let mut out = LeafResiduals { shape: 0.0, mean: 0.0, metric: 0.0 };
    for f in 0..mesh.face_count() {
        let bt = l.b.values[f];
        let bd = (lp.b.values[f] - lm.b.values[f]) / (2.0 * dt);
        out.shape = out.shape.max((bd - (mat2::ident() - bt * bt)).norm());
        let hd = (lp.h[f] - lm.h[f]) / (2.0 * dt);
        out.mean = out.mean.max((hd - (2.0 - (bt * bt).trace())).abs());
        let id = (lp.i.values[f] - lm.i.values[f]) / (2.0 * dt);
        let ii = l.i.values[f] * bt * 2.0;
        out.metric = out.metric.max((id - ii).norm() / l.i.values[f].norm());
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct Infinity {
    pub i: MetricField,
    pub ii: MetricField,
    pub iii: MetricField,
    /// I𝐼_∞ = I_∞(B_∞·,·).
    pub b: OperatorField,
}

/// Coefficients of I_t = e^{2t}I_∞ + 2I𝐼_∞ + e^{−2t}I𝐼𝐼_∞.
pub fn data_at_infinity(i: &MetricField, b: &OperatorField) -> Result<Infinity> {
    let one = mat2::ident();
    let mut binf = Vec::with_capacity(b.values.len());
    for (f, m) in b.values.iter().enumerate() {
        let inv = mat2::inv(&(one + m)).ok_or_else(|| LabError::Precondition(format!("𝟙 + B singular on face {f}")))?;
        binf.push(inv * (one - m));
    }
    let iinf = i.pullback(&b.map(|_, m| one + m)).scale(0.25);
    let ii = MetricField::variation(i.values.iter().zip(&b.values).map(|(g, m)| g * (one - m * m) * 0.25).collect());
    let iii = i.pullback(&b.map(|_, m| one - m)).scale(0.25);
    Ok(Infinity { i: iinf, ii, iii, b: OperatorField { values: binf } })
}

/// Relative distance between I_t and its three-term expansion.
pub fn expansion_residual(mesh: &SurfaceMesh, i: &MetricField, b: &OperatorField, inf: &Infinity, t: f64) -> Result<f64> {
    let l = equidistant_evolve(mesh, i, b, t)?;
    let (p, m) = ((2.0 * t).exp(), (-2.0 * t).exp());
    Ok((0..mesh.face_count())
        .map(|f| {
            let e = inf.i.values[f] * p + inf.ii.values[f] * 2.0 + inf.iii.values[f] * m;
            (e - l.i.values[f]).norm() / l.i.values[f].norm()
        })
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug)]
pub struct InfinityReport {
    /// max |K(I_∞) + 2 tr B_∞| over vertices.
    pub gauss_defect: f64,
    /// max |K(2I_∞) + tr B_∞|: the modified Gauss equation for the metric 2I_∞.
    pub modified_gauss_defect: f64,
    pub codazzi: f64,
}

pub fn infinity_report(mesh: &SurfaceMesh, inf: &Infinity) -> Result<InfinityReport> {
    let k = gauss_curvature(mesh, &inf.i.conform(mesh))?;
    let hv = face_to_vertex(mesh, &inf.b.trace());
    let gauss_defect = k.values.iter().zip(&hv).map(|(k, h)| (k + 2.0 * h).abs()).fold(0.0, f64::max);
    let modified_gauss_defect = k.values.iter().zip(&hv).map(|(k, h)| (0.5 * k + h).abs()).fold(0.0, f64::max);
    Ok(InfinityReport { gauss_defect, modified_gauss_defect, codazzi: codazzi_residual(mesh, &inf.i, &inf.b) })
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct RvReport {
    pub t: Vec<f64>,
    /// W_t = V_t − ¼∫H_t da_t + ½∫H da.
    pub w_t: Vec<f64>,
    /// W = W_t + πχt.
    pub w: Vec<f64>,
    /// Least-squares slope of W_t.
    pub dwdt: f64,
    /// max |W − W(t0)| / |W(t0)|.
    pub w_spread: f64,
    /// ½∫(1 − det B_t)da_t per leaf.
    pub gauss_bonnet: Vec<f64>,
    /// ½∫(−K_t)da_t per leaf with the angle-defect curvature of I_t.
    pub gauss_bonnet_mesh: Vec<f64>,
    pub mean_residual: f64,
}

/// ∫_0^t Σ det(cosh τ 𝟙 + sinh τ B) da dτ by composite Simpson.
fn volume(areas: &[f64], b: &OperatorField, t: f64, steps: usize) -> f64 {
    let n = steps.max(2) + steps % 2;
    let dt = t / n as f64;
    let a = |tau: f64| -> f64 {
        let (c, s) = (tau.cosh(), tau.sinh());
        b.values.iter().zip(areas).map(|(m, da)| (mat2::ident() * c + m * s).determinant() * da).sum()
    };
    let mut sum = a(0.0) + a(t);
    for k in 1..n {
        sum += a(k as f64 * dt) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * dt / 3.0
}

/// W_t and W at `samples` leaves in [t0, t1]; volumes by Simpson with `steps` intervals per
/// unit distance.
pub fn renormalized_volume(
    mesh: &SurfaceMesh,
    i: &MetricField,
    b: &OperatorField,
    t0: f64,
    t1: f64,
    samples: usize,
    steps: usize,
) -> Result<RvReport> {
    if !(t1 > t0 && t0 >= 0.0) {
        return Err(LabError::Precondition(format!("need t1 > t0 ≥ 0, got [{t0}, {t1}]")));
    }
    let areas = face_areas(mesh, i);
    let h0: f64 = b.trace().iter().zip(&areas).map(|(h, a)| h * a).sum();
    let chi = mesh.euler() as f64;
    let n = samples.max(2);
    let mut rep = RvReport {
        t: vec![],
        w_t: vec![],
        w: vec![],
        dwdt: 0.0,
        w_spread: 0.0,
        gauss_bonnet: vec![],
        gauss_bonnet_mesh: vec![],
        mean_residual: 0.0,
    };
    for k in 0..n {
        let t = t0 + (t1 - t0) * k as f64 / (n - 1) as f64;
        let leaf = equidistant_evolve(mesh, i, b, t)?;
        let v = volume(&areas, b, t, ((steps as f64 * t).ceil() as usize).max(2));
        let ht: f64 = leaf.h.iter().zip(&leaf.da).map(|(h, a)| h * a).sum();
        let wt = v - 0.25 * ht + 0.5 * h0;
        rep.t.push(t);
        rep.w_t.push(wt);
        rep.w.push(wt + PI * chi * t);
        rep.gauss_bonnet.push(0.5 * leaf.b.det().iter().zip(&leaf.da).map(|(d, a)| (1.0 - d) * a).sum::<f64>());
        let kt = gauss_curvature(mesh, &leaf.i.conform(mesh))?;
        let va = crate::geom::ops::vertex_areas(mesh, &leaf.i.conform(mesh));
        rep.gauss_bonnet_mesh.push(-0.5 * kt.values.iter().zip(&va).map(|(k, a)| k * a).sum::<f64>());
        rep.mean_residual = rep.mean_residual.max(leaf_residuals(mesh, i, b, t.max(1e-3), 1e-4)?.mean);
    }
    let tm = rep.t.iter().sum::<f64>() / n as f64;
    let wm = rep.w_t.iter().sum::<f64>() / n as f64;
    let num: f64 = rep.t.iter().zip(&rep.w_t).map(|(t, w)| (t - tm) * (w - wm)).sum();
    let den: f64 = rep.t.iter().map(|t| (t - tm).powi(2)).sum();
    rep.dwdt = num / den;
    rep.w_spread = rep.w.iter().map(|w| (w - rep.w[0]).abs()).fold(0.0, f64::max) / rep.w[0].abs().max(1e-300);
    Ok(rep)
}

/// ⟨a, b⟩_g = tr(g⁻¹ a g⁻¹ b).
fn pair_g(g: &M2, a: &M2, b: &M2) -> f64 {
    let gi = mat2::inv(g).expect("metric");
    (gi * a * gi * b).trace()
}

/// (∫⟨δI, I𝐼 − HI⟩_I da_I, dF_covector(δh)) with δI = cosh²(s/2)δh.
pub fn liouville_check(mesh: &SurfaceMesh, s: f64, h: &MetricField, hstar: &MetricField, dh: &MetricField) -> Result<(f64, f64)> {
    let b = labourie_normalized(mesh, h, hstar)?.b;
    let e = end_data_from(h, &b, s);
    let c2 = (s / 2.0).cosh().powi(2);
    let areas = face_areas(mesh, &e.i);
    let mut lhs = 0.0;
    for f in 0..mesh.face_count() {
        let g = &e.i.values[f];
        let hm = e.b.values[f].trace();
        lhs += pair_g(g, &(dh.values[f] * c2), &(e.ii.values[f] - g * hm)) * areas[f];
    }
    Ok((lhs, df_covector(mesh, h, &b, dh)))
}

#[derive(Clone, Debug)]
pub struct VariationReport {
    /// Central difference of W = ¼∫H da (the t = 0 value) along the perturbation.
    pub fd_w: f64,
    /// −¼∫(δH_∞ + ⟨δI_∞, I𝐼_∞ − ½H_∞ I_∞⟩)da_∞ − ½∫⟨δI, I𝐼 − HI⟩da.
    pub schlafli: f64,
    /// The same with the traceless part of I𝐼_∞ only.
    pub traceless: f64,
    pub surface_term: f64,
}

/// First variation of W along a family of pairs, against the variation formulas, with
/// derivatives by central differences of step `eps`.
pub fn variation_checks(
    mesh: &SurfaceMesh,
    s: f64,
    family: impl Fn(f64) -> Result<(MetricField, MetricField)>,
    eps: f64,
) -> Result<VariationReport> {
    let data = |t: f64| -> Result<(EndData, Infinity, f64)> {
        let (h, hs) = family(t)?;
        let e = end_data(mesh, s, &h, &hs)?;
        let inf = data_at_infinity(&e.i, &e.b)?;
        let areas = face_areas(mesh, &e.i);
        let w = 0.25 * e.b.trace().iter().zip(&areas).map(|(h, a)| h * a).sum::<f64>();
        Ok((e, inf, w))
    };
    let (e0, inf0, _) = data(0.0)?;
    let (ep, infp, wp) = data(eps)?;
    let (em, infm, wm) = data(-eps)?;
    let d = |p: &M2, m: &M2| (p - m) / (2.0 * eps);
    let a_inf = face_areas(mesh, &inf0.i);
    let a0 = face_areas(mesh, &e0.i);
    let (mut at_inf, mut at_inf0, mut surf) = (0.0, 0.0, 0.0);
    for f in 0..mesh.face_count() {
        let gi = &inf0.i.values[f];
        let hinf = inf0.b.values[f].trace();
        let di = d(&infp.i.values[f], &infm.i.values[f]);
        let dh = (infp.b.values[f].trace() - infm.b.values[f].trace()) / (2.0 * eps);
        at_inf += (dh + pair_g(gi, &di, &(inf0.ii.values[f] - gi * (0.5 * hinf)))) * a_inf[f];
        at_inf0 += pair_g(gi, &di, &(inf0.ii.values[f] - gi * (0.5 * hinf))) * a_inf[f];
        let g = &e0.i.values[f];
        let d_surf = d(&ep.i.values[f], &em.i.values[f]);
        surf += pair_g(g, &d_surf, &(e0.ii.values[f] - g * e0.b.values[f].trace())) * a0[f];
    }
    Ok(VariationReport {
        fd_w: (wp - wm) / (2.0 * eps),
        schlafli: -0.25 * at_inf - 0.5 * surf,
        traceless: -0.25 * at_inf0 - 0.5 * surf,
        surface_term: surf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{area, build_bolza_mesh};
    use crate::wolf::hyperbolic_background;

    #[test]
    fn diagonal_grafting_is_conformal() {
        let m = build_bolza_mesh(1).unwrap();
        let h = hyperbolic_background(&m).unwrap();
        let s = 0.8;
        let g = sgr_metric(&m, s, &h, &h).unwrap();
        assert!(g.max_dist(&h.scale(s.exp())) < 1e-12 * s.exp());
        let c = curvature_bound_check(&m, s, &h, &h).unwrap();
        assert!((c.k_min - c.bound).abs() < 1e-6, "{c:?}");
        assert!(c.liouville_residual < 1e-8);
    }

    #[test]
    fn end_data_algebra() {
        let m = build_bolza_mesh(1).unwrap();
        let h = hyperbolic_background(&m).unwrap();
        let hs = h.map(|f, g| {
            let a = M2::new(1.1, 0.1 * (f as f64).sin(), 0.05, 0.9);
            a.transpose() * g * a
        });
        let e = end_data(&m, 0.7, &h, &hs).unwrap();
        for f in 0..m.face_count() {
            let g = e.i.values[f];
            let bb = e.b.values[f];
            assert!((mat2::pullback(&g, &bb) - e.iii.values[f]).norm() < 1e-12 * g.norm());
            assert!((g * bb - e.ii.values[f]).norm() < 1e-12 * g.norm());
            assert!((g * bb - bb.transpose() * g).norm() < 1e-12 * g.norm());
        }
    }

    #[test]
    fn totally_geodesic_leaves_scale() {
        let m = build_bolza_mesh(1).unwrap();
        let h = hyperbolic_background(&m).unwrap();
        let zero = OperatorField { values: vec![M2::zeros(); m.face_count()] };
        let l = equidistant_evolve(&m, &h, &zero, 0.6).unwrap();
        assert!(l.i.max_dist(&h.scale(0.6f64.cosh().powi(2))) < 1e-12);
        let l0 = equidistant_evolve(&m, &h, &zero, 0.0).unwrap();
        assert_eq!(l0.i, h);
    }

    #[test]
    fn expansion_and_volume() {
        let m = build_bolza_mesh(1).unwrap();
        let h = hyperbolic_background(&m).unwrap();
        let hs = h.map(|f, g| {
            let a = M2::new(1.05, 0.05 * (f as f64).cos(), 0.0, 1.0 / 1.05);
            a.transpose() * g * a
        });
        let e = end_data(&m, 1.0, &h, &hs).unwrap();
        let inf = data_at_infinity(&e.i, &e.b).unwrap();
        for t in [3.0, 4.0] {
            assert!(expansion_residual(&m, &e.i, &e.b, &inf, t).unwrap() < 1e-8);
        }
        let r = leaf_residuals(&m, &e.i, &e.b, 0.5, 1e-4).unwrap();
        assert!(r.shape < 1e-7 && r.mean < 1e-7 && r.metric < 1e-7, "{r:?}");
        let rv = renormalized_volume(&m, &e.i, &e.b, 0.0, 1.0, 5, 64).unwrap();
        // ½∫(1 − det B)da = ½ area(h) for det b = 1
        let half = 0.5 * area(&m, &h);
        assert!((rv.dwdt - half).abs() < 1e-6 * half, "{} {half}", rv.dwdt);
    }

    #[test]
    fn liouville_pairing_is_pointwise_algebra() {
        let m = build_bolza_mesh(1).unwrap();
        let h = hyperbolic_background(&m).unwrap();
        let hs = h.map(|f, g| {
            let a = M2::new(1.1, 0.1 * (f as f64).sin(), 0.05, 0.9);
            a.transpose() * g * a
        });
        let dh = h.map(|f, g| {
            let a = M2::new(0.2, 0.1, -0.1 * (f as f64).cos(), 0.1);
            a.transpose() * g + g * a
        });
        let s = 0.9;
        let (lhs, beta) = liouville_check(&m, s, &h, &hs, &dh).unwrap();
        assert!((lhs + s.sinh() * beta).abs() < 1e-10 * lhs.abs(), "{lhs} {beta}");
    }
}
