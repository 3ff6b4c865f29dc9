//! The landslide flow on pairs of metrics, its Hamiltonian check, landslide symmetries
//! and fixed points of their compositions.
//!
//! The flow is realized as rotation of Wolf coordinates at the center of the pair:
//! L_θ(W_c(a), W_c(−a)) = (W_c(e^{iθ}a), W_c(−e^{iθ}a)).

use crate::center::{center_find, center_near, rotated_center};
use crate::error::{LabError, Result};
use crate::geom::mat2;
use crate::geom::ops::face_areas;
use crate::geom::{MetricField, OperatorField};
use crate::minlag::labourie_normalized;
use crate::quaddiff::{ft_products, harmonic_beltrami, horizontal_coeffs, jdot_of, QuadDiff};
use crate::wolf::{coord_dist, to_complex, to_real, wolf_solve, WolfChart};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

/// Center data of a normalized pair: c = W_{h₀}(x) and h = W_c(a), h* = W_c(−a).
#[derive(Clone)]
pub struct Provenance<'a> {
    pub x: Vec<f64>,
    pub chart: WolfChart<'a>,
    pub a: Vec<C64>,
}

#[derive(Clone)]
pub struct Pair<'a> {
    pub h: MetricField,
    pub hstar: MetricField,
    pub provenance: Option<Provenance<'a>>,
}

impl<'a> Pair<'a> {
    pub fn new(h: MetricField, hstar: MetricField) -> Self {
        Pair { h, hstar, provenance: None }
    }

    /// The normalized pair with center W_{h₀}(x) and Wolf coordinates ±a there.
    pub fn normalized(bg: &WolfChart<'a>, x: &[f64], a: &[C64]) -> Result<Self> {
        let chart = if x.iter().all(|v| *v == 0.0) { bg.clone() } else { bg.transported(bg.solve(&to_complex(x), None)?.h) };
        let neg: Vec<C64> = a.iter().map(|z| -z).collect();
        let h = chart.solve(a, None)?.h;
        let hstar = chart.solve(&neg, None)?.h;
        Ok(Pair { h, hstar, provenance: Some(Provenance { x: x.to_vec(), chart, a: a.to_vec() }) })
    }

    pub fn stripped(&self) -> Pair<'a> {
        Pair::new(self.h.clone(), self.hstar.clone())
    }

    pub fn swapped(&self) -> Pair<'a> {
        let provenance = self.provenance.as_ref().map(|p| Provenance { a: p.a.iter().map(|z| -z).collect(), ..p.clone() });
        Pair { h: self.hstar.clone(), hstar: self.h.clone(), provenance }
    }
}

/// Center data of the pair, from provenance or a center search warm-started at x0.
pub fn center_of<'a>(bg: &WolfChart<'a>, pair: &Pair<'a>, x0: Option<&[f64]>) -> Result<Provenance<'a>> {
    if let Some(p) = &pair.provenance {
        return Ok(p.clone());
    }
    let c = center_find(bg, &pair.h, &pair.hstar, x0)?;
    Ok(Provenance { x: c.x.clone(), a: c.a.clone(), chart: c.chart })
}

pub fn landslide<'a>(bg: &WolfChart<'a>, theta: f64, pair: &Pair<'a>) -> Result<Pair<'a>> {
    landslide_from(bg, theta, pair, None)
}

pub fn landslide_from<'a>(bg: &WolfChart<'a>, theta: f64, pair: &Pair<'a>, x0: Option<&[f64]>) -> Result<Pair<'a>> {
    let p = center_of(bg, pair, x0)?;
    let rot = C64::from_polar(1.0, theta);
    let a: Vec<C64> = p.a.iter().map(|z| z * rot).collect();
    let neg: Vec<C64> = a.iter().map(|z| -z).collect();
    let h = p.chart.solve(&a, None)?.h;
    let hstar = p.chart.solve(&neg, None)?.h;
    Ok(Pair { h, hstar, provenance: Some(Provenance { a, ..p }) })
}

/// Wolf coordinates of both metrics at the background.
pub fn pair_coords(bg: &WolfChart, pair: &Pair) -> Result<(Vec<C64>, Vec<C64>)> {
    Ok((bg.coords_of(&pair.h, None)?.a, bg.coords_of(&pair.hstar, None)?.a))
}

pub fn pair_dist(a: &(Vec<C64>, Vec<C64>), b: &(Vec<C64>, Vec<C64>)) -> f64 {
    coord_dist(&a.0, &b.0).max(coord_dist(&a.1, &b.1))
}

/// Coordinate distance between L_{θ1}∘L_{θ2} and L_{θ1+θ2}; the intermediate pair is
/// re-centered from scratch.
pub fn flow_group_check(bg: &WolfChart, theta1: f64, theta2: f64, pair: &Pair) -> Result<f64> {
    let base = pair.stripped();
    let p = center_of(bg, &base, None)?;
    let mid = landslide_from(bg, theta2, &base, Some(&p.x))?.stripped();
    let left = landslide_from(bg, theta1, &mid, Some(&p.x))?;
    let right = landslide_from(bg, theta1 + theta2, &base, Some(&p.x))?;
    Ok(pair_dist(&pair_coords(bg, &left)?, &pair_coords(bg, &right)?))
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct OrbitReport {
    pub thetas: Vec<f64>,
    pub f: Vec<f64>,
    pub drift: f64,
}

/// F_general at `samples` equally spaced angles of the orbit, each recomputed through a
/// fresh center search of the flowed pair.
pub fn orbit_drift(bg: &WolfChart, pair: &Pair, samples: usize) -> Result<OrbitReport> {
    let p = center_of(bg, pair, None)?;
    let thetas: Vec<f64> = (0..samples).map(|k| 2.0 * std::f64::consts::PI * k as f64 / samples as f64).collect();
    let f = thetas
        .par_iter()
        .map(|&t| {
            let q = landslide_from(bg, t, pair, Some(&p.x))?;
            Ok(center_find(bg, &q.h, &q.hstar, Some(&p.x))?.total_energy())
        })
        .collect::<Result<Vec<f64>>>()?;
    let drift = f.iter().map(|v| (v - f[0]).abs()).fold(0.0, f64::max) / f[0];
    Ok(OrbitReport { thetas, f, drift })
}

/// Tangent of the flow at θ = 0 from β_θ = cos(θ/2)𝟙 + sin(θ/2)Jb:
/// ḣ = ½(h(Jb·,·) + h(·,Jb·)) and J̇ = ½(J·Jb − Jb·J).
pub fn generator(mesh: &crate::geom::SurfaceMesh, h: &MetricField, hstar: &MetricField) -> Result<(MetricField, OperatorField)> {
    let b = labourie_normalized(mesh, h, hstar)?.b;
    let j = h.j();
    let mut hd = Vec::with_capacity(b.values.len());
    let mut jd = Vec::with_capacity(b.values.len());
    for f in 0..b.values.len() {
        let (jf, g) = (j.values[f], h.values[f]);
        let jb = jf * b.values[f];
        hd.push(((jb.transpose() * g) + g * jb) * 0.5);
        jd.push((jf * jb - jb * jf) * 0.5);
    }
    Ok((MetricField::variation(hd), OperatorField { values: jd }))
}

/// Flow derivative at θ = 0 in real Wolf coordinates at h (chart transported from the
/// background), by central differences at δ and δ/2 with Richardson extrapolation.
pub fn flow_tangent_fd(bg: &WolfChart, pair: &Pair, at_h: &WolfChart, delta: f64) -> Result<Vec<f64>> {
    let p = center_of(bg, pair, None)?;
    let pair = Pair { provenance: Some(p), ..pair.clone() };
    let warm = at_h.harmonic(&pair.h, None)?.displacement;
    let coords = |t: f64| -> Result<Vec<f64>> {
        let q = landslide(bg, t, &pair)?;
        Ok(to_real(&at_h.coords_of(&q.h, Some(&warm))?.a))
    };
    let diff = |d: f64| -> Result<Vec<f64>> {
        let (p, m) = (coords(d)?, coords(-d)?);
        Ok(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * d)).collect())
    };
    let (d1, d2) = (diff(delta)?, diff(delta / 2.0)?);
    Ok(d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect())
}

pub const FLOW_STEP: f64 = 1e-2;
pub const F_STEP: f64 = 1e-3;

#[derive(Clone, Debug, serde::Serialize)]
pub struct HamiltonianCheck {
    /// ω_WP(X, v) with X from the differentiated flow.
    pub lhs: f64,
    /// ¼ dF(v) from differences of F_general along the Wolf ray.
    pub rhs: f64,
    /// −¼ ∫ tr(b ν_q) da.
    pub closed: f64,
}

impl HamiltonianCheck {
    fn spread(&self) -> f64 {
        (self.lhs - self.rhs).abs().max((self.lhs - self.closed).abs()).max((self.rhs - self.closed).abs())
    }
}

/// Largest disagreement between the three forms over all directions, relative to the
/// Euclidean norm of the ¼dF covector. Per-direction ratios are meaningless where a
/// component nearly vanishes.
pub fn hamiltonian_rel_error(checks: &[HamiltonianCheck]) -> f64 {
    let norm = checks.iter().map(|c| c.rhs * c.rhs).sum::<f64>().sqrt();
    checks.iter().map(HamiltonianCheck::spread).fold(0.0, f64::max) / norm.max(1e-12)
}

/// Basis direction k of a chart: ψ_{k/2} for even k, iψ_{k/2} for odd k.
pub fn direction(chart: &WolfChart, k: usize) -> QuadDiff {
    let q = &chart.basis[k / 2];
    if k % 2 == 0 { q.clone() } else { q.scale(C64::new(0.0, 1.0)) }
}

/// The Hamiltonian identity in every real basis direction of the chart at h.
pub fn hamiltonian_check(bg: &WolfChart, pair: &Pair) -> Result<Vec<HamiltonianCheck>> {
    let mesh = bg.mesh;
    let (h, hstar) = (&pair.h, &pair.hstar);
    let p = center_of(bg, pair, None)?;
    let seed = center_find(bg, h, hstar, Some(&p.x))?;
    let at_h = bg.transported(h.clone());
    let xdot = flow_tangent_fd(bg, pair, &at_h, FLOW_STEP)?;
    let jx = jdot_of(mesh, &at_h.qd(&to_complex(&xdot)), h);
    let b = labourie_normalized(mesh, h, hstar)?.b;
    let areas = face_areas(mesh, h);
    (0..2 * at_h.dim())
        .into_par_iter()
        .map(|k| {
            let q = direction(&at_h, k);
            let lhs = ft_products(mesh, &jx, &jdot_of(mesh, &q, h), h, &at_h.basis)?.1;
            let f = |t: f64| -> Result<f64> {
                let ht = wolf_solve(mesh, h, &q, t)?.h;
                Ok(center_near(bg, &ht, hstar, &seed)?.total_energy())
            };
            let rhs = 0.25 * (f(F_STEP)? - f(-F_STEP)?) / (2.0 * F_STEP);
            let nu = harmonic_beltrami(mesh, &q, h);
            let closed = -0.25 * (0..mesh.face_count()).map(|f| (b.values[f] * nu.values[f]).trace() * areas[f]).sum::<f64>();
            Ok(HamiltonianCheck { lhs, rhs, closed })
        })
        .collect()
}

/// Analytic generator against the differentiated flow, both in real Wolf coordinates at h;
/// returns (analytic, finite-difference, relative distance).
pub fn generator_check(bg: &WolfChart, pair: &Pair) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let at_h = bg.transported(pair.h.clone());
    let (_, jd) = generator(bg.mesh, &pair.h, &pair.hstar)?;
    let analytic = horizontal_coeffs(bg.mesh, &jd, &pair.h, &at_h.basis);
    let fd = flow_tangent_fd(bg, pair, &at_h, FLOW_STEP)?;
    let num = analytic.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den = fd.iter().map(|b| b * b).sum::<f64>().sqrt() + 1e-12;
    Ok((analytic, fd, num / den))
}

/// 𝒮_{e^{iθ},h₀}(h): with c the metric where the coordinates of h are those of h₀ turned by
/// e^{iθ}, the metric W_c(e^{−iθ}a_c(h₀)). Returns it with the background coordinates of c.
pub fn symmetry(bg: &WolfChart, theta: f64, h0: &MetricField, h: &MetricField, x0: Option<&[f64]>) -> Result<(MetricField, Vec<f64>)> {
    let c = rotated_center(bg, h0, h, theta, x0)?;
    let rot = C64::from_polar(1.0, -theta);
    let a: Vec<C64> = c.a.iter().map(|z| z * rot).collect();
    Ok((c.chart.solve(&a, None)?.h, c.x.clone()))
}

pub const FIXED_TOL: f64 = 1e-5;
pub const FIXED_MAX_ITER: usize = 500;

#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub h: MetricField,
    pub coords: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Fixed point of 𝒮_{e^{iθ₊},h₊}∘𝒮_{e^{iθ₋},h₋} by damped averaging in background Wolf
/// coordinates, starting from the given coordinates. The damping starts at ½, doubles
/// (up to 1) when the residual at least halves and halves when it stalls.
pub fn fixed_point(
    bg: &WolfChart,
    theta_plus: f64,
    theta_minus: f64,
    h_plus: &MetricField,
    h_minus: &MetricField,
    start: &[f64],
) -> Result<FixedPoint> {
    for t in [theta_plus, theta_minus] {
        if !(t > 0.0 && t < std::f64::consts::PI) {
            return Err(LabError::Precondition(format!("angle {t} outside (0, π)")));
        }
    }
    let mut y = start.to_vec();
    let mut lambda: f64 = 0.5;
    let mut prev = f64::INFINITY;
    let (mut xm, mut xp): (Option<Vec<f64>>, Option<Vec<f64>>) = (None, None);
    for it in 0..FIXED_MAX_ITER {
        let h = bg.solve(&to_complex(&y), None)?.h;
        let (h1, x1) = symmetry(bg, theta_minus, h_minus, &h, xm.as_deref())?;
        let (h2, x2) = symmetry(bg, theta_plus, h_plus, &h1, xp.as_deref())?;
        xm = Some(x1);
        xp = Some(x2);
        let z = to_real(&bg.coords_of(&h2, None)?.a);
        let r: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
        let res = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if res < FIXED_TOL {
            return Ok(FixedPoint { h, coords: y, residual: res, iterations: it });
        }
        // near an involution a full step only flips the residual, so a stalled decrease
        // halves the step as well
        if res < 0.5 * prev {
            lambda = (2.0 * lambda).min(1.0);
        } else if res > 0.95 * prev {
            lambda = (0.5 * lambda).max(1.0 / 64.0);
        }
        prev = res;
        for (a, d) in y.iter_mut().zip(&r) {
            *a += lambda * d;
        }
    }
    Err(LabError::NoConvergence(format!("fixed point: residual {prev:.3e} after {FIXED_MAX_ITER} iterations")))
}

/// Fixed-point runs from several starts; returns the runs and the largest pairwise distance
/// between converged points.
pub fn fixed_point_multi(
    bg: &WolfChart,
    theta_plus: f64,
    theta_minus: f64,
    h_plus: &MetricField,
    h_minus: &MetricField,
    starts: &[Vec<f64>],
) -> Result<(Vec<FixedPoint>, f64)> {
    let runs = starts
        .par_iter()
        .map(|s| fixed_point(bg, theta_plus, theta_minus, h_plus, h_minus, s))
        .collect::<Result<Vec<_>>>()?;
    let mut spread = 0.0f64;
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let d = runs[i].coords.iter().zip(&runs[j].coords).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            spread = spread.max(d);
        }
    }
    Ok((runs, spread))
}

/// J J̇ + J̇ J per face, largest norm.
pub fn anticommutator(h: &MetricField, jd: &OperatorField) -> f64 {
    let j = h.j();
    j.values.iter().zip(&jd.values).map(|(a, b)| mat2::frob(&(a * b + b * a))).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::build_bolza_mesh;
    use std::f64::consts::PI;

    fn setup(m: &crate::geom::SurfaceMesh) -> (WolfChart<'_>, Vec<C64>) {
        (WolfChart::background(m).unwrap(), vec![C64::new(0.2, -0.1), C64::new(0.1, 0.15), C64::new(-0.05, 0.0)])
    }

    #[test]
    fn zero_angle_is_the_identity_and_pi_swaps() {
        let m = build_bolza_mesh(2).unwrap();
        let (bg, a) = setup(&m);
        let p = Pair::normalized(&bg, &[0.0; 6], &a).unwrap();
        let same = landslide(&bg, 0.0, &p).unwrap();
        assert!(same.h.max_dist(&p.h) < 1e-12 && same.hstar.max_dist(&p.hstar) < 1e-12);
        let half = landslide(&bg, PI, &p.stripped()).unwrap();
        assert!(half.h.max_dist(&p.hstar) < 1e-6 && half.hstar.max_dist(&p.h) < 1e-6);
    }

    #[test]
    fn generator_vanishes_on_the_diagonal_and_anticommutes() {
        let m = build_bolza_mesh(2).unwrap();
        let (bg, a) = setup(&m);
        let h = bg.solve(&a, None).unwrap().h;
        let (hd, jd) = generator(&m, &h, &h).unwrap();
        assert!(hd.values.iter().all(|v| v.norm() < 1e-12) && jd.values.iter().all(|v| v.norm() < 1e-12));
        let p = Pair::normalized(&bg, &[0.0; 6], &a).unwrap();
        let (_, jd) = generator(&m, &p.h, &p.hstar).unwrap();
        assert!(anticommutator(&p.h, &jd) < 1e-12);
        assert!(jd.values.iter().any(|v| v.norm() > 1e-3));
    }

    #[test]
    fn symmetry_fixes_its_base_point() {
        let m = build_bolza_mesh(2).unwrap();
        let (bg, a) = setup(&m);
        let h0 = bg.solve(&a, None).unwrap().h;
        let (s, _) = symmetry(&bg, 1.1, &h0, &h0, None).unwrap();
        assert!(coord_dist(&bg.coords_of(&s, None).unwrap().a, &a) < 1e-5);
    }

    #[test]
    fn fixed_point_rejects_angles_outside_the_interval() {
        let m = build_bolza_mesh(2).unwrap();
        let (bg, _) = setup(&m);
        let err = fixed_point(&bg, 0.0, 1.0, &bg.c, &bg.c, &[0.0; 6]).err().unwrap();
        assert!(matches!(err, LabError::Precondition(_)));
    }
}
