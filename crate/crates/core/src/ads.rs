//! Constant-curvature space-like surfaces in MGH AdS manifolds: surface data from a normalized
//! pair, duality, left and right metrics through landslides, and length-spectrum comparison.

use crate::center::rotated_center;
use crate::error::{LabError, Result};
use crate::geom::loops::{small_classes, LoopGraph};
use crate::geom::mat2::{self, M2};
use crate::geom::ops::face_areas;
use crate::geom::{gauss_curvature, MetricField, OperatorField, SurfaceMesh};
use crate::landslide::{landslide, Pair, Provenance};
use crate::minlag::{codazzi_residual, labourie_normalized, labourie_root};
use crate::wolf::WolfChart;
use num_complex::Complex64 as C64;

/// K* = −K/(K+1).
pub fn kstar(k: f64) -> Result<f64> {
    if !(k < -1.0) {
        return Err(LabError::Precondition(format!("curvature {k} must be below −1")));
    }
    Ok(-k / (k + 1.0))
}

#[derive(Clone, Debug)]
pub struct AdsSurface {
    pub k: f64,
    pub i: MetricField,
    pub b: OperatorField,
    pub iii: MetricField,
}

/// I = (−1/K)h, B = √(−1−K)·b, I𝐼𝐼 = I(B·,B·). b is the root of h⁻¹h* without the
/// determinant rescaling, so I𝐼𝐼 is exactly (−1−K)/(−K)·h* and stays edge-consistent; det B
/// then equals −1−K up to the discrete normalization error.
pub fn ads_surface(k: f64, h: &MetricField, hstar: &MetricField) -> Result<AdsSurface> {
    kstar(k)?;
    let b = labourie_root(h, hstar)?;
    Ok(surface_from(k, h, &b))
}

pub fn surface_from(k: f64, h: &MetricField, b: &OperatorField) -> AdsSurface {
    let i = h.scale(-1.0 / k);
    let b = b.map(|_, m| m * (-1.0 - k).sqrt());
    AdsSurface { k, iii: i.pullback(&b), i, b }
}

/// Vertex average of face values weighted by incident face area.
fn to_vertices(mesh: &SurfaceMesh, vals: &[f64], g: &MetricField) -> Vec<f64> {
    let areas = face_areas(mesh, g);
    let (mut s, mut w) = (vec![0.0; mesh.vertex_count], vec![0.0; mesh.vertex_count]);
    for (f, t) in mesh.faces.iter().enumerate() {
        for &v in t {
            s[v] += vals[f] * areas[f];
            w[v] += areas[f];
        }
    }
    s.iter().zip(&w).map(|(a, b)| a / b).collect()
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SurfaceReport {
    /// max |det B + 1 + K| over faces.
    pub det_defect: f64,
    /// max |K(I) − K| over vertices.
    pub curvature_defect: f64,
    /// max |K(I) + 1 + det B| over vertices.
    pub gauss_defect: f64,
    /// max ‖I B − (I B)ᵀ‖ relative to ‖I‖.
    pub self_adjoint: f64,
    pub codazzi: f64,
}

pub fn surface_report(mesh: &SurfaceMesh, s: &AdsSurface) -> Result<SurfaceReport> {
    let kv = gauss_curvature(mesh, &s.i.conform(mesh))?;
    let det = s.b.det();
    let det_v = to_vertices(mesh, &det, &s.i);
    let self_adjoint = s
        .i
        .values
        .iter()
        .zip(&s.b.values)
        .map(|(g, b)| {
            let l = g * b;
            (l - l.transpose()).norm() / g.norm()
        })
        .fold(0.0, f64::max);
    Ok(SurfaceReport {
        det_defect: det.iter().map(|d| (d + 1.0 + s.k).abs()).fold(0.0, f64::max),
        curvature_defect: kv.values.iter().map(|v| (v - s.k).abs()).fold(0.0, f64::max),
        gauss_defect: kv.values.iter().zip(&det_v).map(|(v, d)| (v + 1.0 + d).abs()).fold(0.0, f64::max),
        self_adjoint,
        codazzi: codazzi_residual(mesh, &s.i, &s.b),
    })
}

/// (I*, B*) = (I(B·,B·), B⁻¹).
pub fn dual_surface(i: &MetricField, b: &OperatorField) -> Result<(MetricField, OperatorField)> {
    let inv = b
        .values
        .iter()
        .enumerate()
        .map(|(f, m)| mat2::inv(m).ok_or_else(|| LabError::Precondition(format!("shape operator singular on face {f}"))))
        .collect::<Result<Vec<M2>>>()?;
    Ok((MetricField::new(i.pullback(b).values)?, OperatorField { values: inv }))
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct DualReport {
    pub k_star: f64,
    /// max per-face distance of dual(dual(I, B)) from (I, B), relative.
    pub involution: f64,
    /// max |K(I*) − K*| over vertices.
    pub curvature_defect: f64,
    /// max ‖I(B·,·) − I*(B*·,·)‖ relative: the shared second fundamental form.
    pub shared_ii: f64,
    /// max ‖I*(B*·,B*·) − I‖ relative: the dual's third form is the original metric.
    pub third_form: f64,
}

pub fn dual_report(mesh: &SurfaceMesh, s: &AdsSurface) -> Result<DualReport> {
    let (is, bs) = dual_surface(&s.i, &s.b)?;
    let (ii, bb) = dual_surface(&is, &bs)?;
    let rel = |a: &M2, b: &M2| (a - b).norm() / b.norm();
    let mut out = DualReport { k_star: kstar(s.k)?, involution: 0.0, curvature_defect: 0.0, shared_ii: 0.0, third_form: 0.0 };
    for f in 0..mesh.face_count() {
        let (g, b) = (&s.i.values[f], &s.b.values[f]);
        out.involution = out.involution.max(rel(&ii.values[f], g)).max(rel(&bb.values[f], b));
        out.shared_ii = out.shared_ii.max(rel(&(is.values[f] * bs.values[f]), &(g * b)));
        out.third_form = out.third_form.max(rel(&mat2::pullback(&is.values[f], &bs.values[f]), g));
    }
    let kv = gauss_curvature(mesh, &is.conform(mesh))?;
    out.curvature_defect = kv.values.iter().map(|v| (v - out.k_star).abs()).fold(0.0, f64::max);
    Ok(out)
}

/// Which side of the manifold the surface faces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Convexity {
    Past,
    Future,
}

/// t with K = −1/cos²(t/2).
pub fn mgh_angle(k: f64) -> Result<f64> {
    kstar(k)?;
    Ok(2.0 * (-1.0 / k).sqrt().acos())
}

/// Left and right metrics of the MGH manifold containing a surface of curvature K with induced
/// metric and third form homothetic to h and h*: (L¹_{e^{it}}, L¹_{e^{−it}}) on the past-convex
/// side and the conjugate rotations on the future-convex side.
pub fn mgh_left_right<'a>(bg: &WolfChart<'a>, k: f64, pair: &Pair<'a>, side: Convexity) -> Result<(MetricField, MetricField)> {
    let t = mgh_angle(k)?;
    let s = if side == Convexity::Past { 1.0 } else { -1.0 };
    let pair = match &pair.provenance {
        Some(_) => pair.clone(),
        None => {
            let p = crate::landslide::center_of(bg, pair, None)?;
            Pair { provenance: Some(p), ..pair.clone() }
        }
    };
    Ok((landslide(bg, s * t, &pair)?.h, landslide(bg, -s * t, &pair)?.h))
}

/// The normalized pair of the curvature-K surface on the given side of the MGH manifold with
/// left and right metrics (h_l, h_r). At the center c the Wolf coordinates of h_r are those of
/// h_l turned by e^{∓2it}.
pub fn mgh_surface<'a>(
    bg: &WolfChart<'a>,
    k: f64,
    h_l: &MetricField,
    h_r: &MetricField,
    side: Convexity,
    x0: Option<&[f64]>,
) -> Result<Pair<'a>> {
    let t = mgh_angle(k)?;
    let s = if side == Convexity::Past { 1.0 } else { -1.0 };
    let c = rotated_center(bg, h_l, h_r, -2.0 * s * t, x0)?;
    let rot = C64::from_polar(1.0, -s * t);
    let a: Vec<C64> = c.a.iter().map(|z| z * rot).collect();
    let neg: Vec<C64> = a.iter().map(|z| -z).collect();
    let h = c.chart.solve(&a, None)?.h;
    let hstar = c.chart.solve(&neg, None)?.h;
    Ok(Pair { h, hstar, provenance: Some(Provenance { x: c.x.clone(), chart: c.chart, a }) })
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SelfDual {
    pub k_plus: f64,
    pub k_minus: f64,
    /// |(−1 − K₊) − K₊/K₋|.
    pub scalar_identity: f64,
    /// max per-face ‖I(B·,B·) − (−1/K₋)h₋‖ relative.
    pub dual_match: f64,
    pub plus: SurfaceReport,
    pub minus: SurfaceReport,
}

/// The past-convex K₊ = K₋* surface with induced metric (−1/K₊)h₊ built from the pair
/// (h₊, h₋); its dual should be the future-convex K₋ surface with induced metric (−1/K₋)h₋.
pub fn phi_selfdual(mesh: &SurfaceMesh, k_minus: f64, h_plus: &MetricField, h_minus: &MetricField) -> Result<SelfDual> {
    let k_plus = kstar(k_minus)?;
    let s = ads_surface(k_plus, h_plus, h_minus)?;
    let (is, bs) = dual_surface(&s.i, &s.b)?;
    let target = h_minus.scale(-1.0 / k_minus);
    let dual_match = (0..mesh.face_count())
        .map(|f| (is.values[f] - target.values[f]).norm() / target.values[f].norm())
        .fold(0.0, f64::max);
    let dual = AdsSurface { k: k_minus, iii: is.pullback(&bs), i: is, b: bs };
    Ok(SelfDual {
        k_plus,
        k_minus,
        scalar_identity: ((-1.0 - k_plus) - k_plus / k_minus).abs(),
        dual_match,
        plus: surface_report(mesh, &s)?,
        minus: surface_report(mesh, &dual)?,
    })
}

/// The equivariant embedding at angle θ: induced metric cos²(θ/2)h with shape operator
/// tan(θ/2)b. Largest |K(I) + 1 + det B| over vertices.
pub fn landslide_link_residual(mesh: &SurfaceMesh, theta: f64, h: &MetricField, hstar: &MetricField) -> Result<f64> {
    let b = labourie_normalized(mesh, h, hstar)?.b;
    let (c, t) = ((theta / 2.0).cos(), (theta / 2.0).tan());
    let i = h.scale(c * c);
    let det: Vec<f64> = b.det().iter().map(|d| d * t * t).collect();
    let det_v = to_vertices(mesh, &det, &i);
    let kv = gauss_curvature(mesh, &i)?;
    Ok(kv.values.iter().zip(&det_v).map(|(k, d)| (k + 1.0 + d).abs()).fold(0.0, f64::max))
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct Comparison {
    pub k_minus: f64,
    pub k_plus: f64,
    /// √(K₋/K₊*).
    pub factor: f64,
    pub len_minus: Vec<f64>,
    pub len_plus_star: Vec<f64>,
    /// max ℓ(h₋)/(factor·ℓ(h₊*)); at most 1 when the comparison holds.
    pub worst_ratio: f64,
}

/// Length-spectrum comparison h₋ ≤ (K₋/K₊*)h₊* for the surfaces of curvature K₋ (future
/// side) and K₊ (past side) in the manifold with left and right metrics (h_l, h_r), measured
/// on the shortest loops of `loops` homology classes.
pub fn comparison_check(
    bg: &WolfChart,
    graph: &LoopGraph,
    k_minus: f64,
    k_plus: f64,
    h_l: &MetricField,
    h_r: &MetricField,
    loops: usize,
) -> Result<Comparison> {
    let minus = mgh_surface(bg, k_minus, h_l, h_r, Convexity::Future, None)?;
    let plus = mgh_surface(bg, k_plus, h_l, h_r, Convexity::Past, None)?;
    let factor = (k_minus / kstar(k_plus)?).sqrt();
    let classes = small_classes(graph.genus, loops);
    let len_minus = graph.shortest(&minus.h, &classes, 1);
    let len_plus_star = graph.shortest(&plus.hstar, &classes, 1);
    let worst_ratio = len_minus.iter().zip(&len_plus_star).map(|(a, b)| a / (factor * b)).fold(0.0, f64::max);
    Ok(Comparison { k_minus, k_plus, factor, len_minus, len_plus_star, worst_ratio })
}
