//! Centers of metric pairs: the metric c from which the harmonic maps to h and h* have
//! opposite Hopf differentials, and the total energy F there.
//!
//! Candidate centers are W_{h₀}(x) for real Wolf coordinates x at the background. At each
//! candidate both targets are expressed in Wolf coordinates at c and the root-finder drives
//! their sum to zero.

use crate::error::{LabError, Result};
use crate::geom::MetricField;
use crate::quaddiff::QuadDiff;
use crate::wolf::{to_complex, to_real, Coords, WolfChart};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

pub const CENTER_MAX_ITER: usize = 200;

#[derive(Clone)]
pub struct Center<'a> {
    /// Real Wolf coordinates of c at the background.
    pub x: Vec<f64>,
    pub chart: WolfChart<'a>,
    /// Wolf coordinates of h at c; the Hopf differential of c → h is Σ aᵢψᵢ.
    pub a: Vec<C64>,
    pub a_star: Vec<C64>,
    pub energy: f64,
    pub energy_star: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Last Jacobian of the residual in x, when one was formed; seeds nearby searches.
    pub jacobian: Option<DMatrix<f64>>,
}

impl<'a> Center<'a> {
    pub fn c(&self) -> &MetricField {
        &self.chart.c
    }

    pub fn q(&self) -> QuadDiff {
        self.chart.qd(&self.a)
    }

    /// E(c, h) + E(c, h*).
    pub fn total_energy(&self) -> f64 {
        self.energy + self.energy_star
    }
}

struct Eval<'a> {
    chart: WolfChart<'a>,
    coords: Coords,
    coords_star: Coords,
    r: DVector<f64>,
}

fn evaluate<'a>(bg: &WolfChart<'a>, x: &[f64], h: &MetricField, hstar: &MetricField, rot: C64) -> Result<Eval<'a>> {
    let c = bg.solve(&to_complex(x), None)?.h;
    let chart = bg.transported(c);
    let coords = chart.coords_of(h, None)?;
    let coords_star = chart.coords_of(hstar, None)?;
    let turned: Vec<C64> = coords.a.iter().map(|z| z * rot).collect();
    let r = DVector::from_vec(to_real(&coords_star.a).iter().zip(to_real(&turned)).map(|(p, q)| p - q).collect());
    Ok(Eval { chart, coords, coords_star, r })
}

fn finish<'a>(x: Vec<f64>, e: Eval<'a>, iterations: usize, jacobian: Option<DMatrix<f64>>) -> Center<'a> {
    let residual = e.r.norm();
    Center {
        x,
        a: e.coords.a,
        a_star: e.coords_star.a,
        energy: e.coords.map.energy,
        energy_star: e.coords_star.map.energy,
        chart: e.chart,
        residual,
        iterations,
        jacobian,
    }
}

/// Relative residual target ‖a + a*‖ < tol·(‖a‖ + 1e−9).
pub const CENTER_TOL: f64 = 1e-6;

/// Newton iteration on the Wolf-coordinate sum with a finite-difference Jacobian, Broyden
/// updates, and a trust region on the step length.
pub fn center_find<'a>(bg: &WolfChart<'a>, h: &MetricField, hstar: &MetricField, x0: Option<&[f64]>) -> Result<Center<'a>> {
    rotated_center(bg, h, hstar, std::f64::consts::PI, x0)
}

/// Center search started from a nearby center, reusing its position and Jacobian.
pub fn center_near<'a>(bg: &WolfChart<'a>, h: &MetricField, hstar: &MetricField, near: &Center) -> Result<Center<'a>> {
    search(bg, h, hstar, C64::new(-1.0, 0.0), Some(&near.x), near.jacobian.clone())
}

/// The metric c at which the Wolf coordinates of h₂ are those of h₁ turned by e^{iθ}.
/// θ = π gives the center of the pair.
pub fn rotated_center<'a>(bg: &WolfChart<'a>, h: &MetricField, h2: &MetricField, theta: f64, x0: Option<&[f64]>) -> Result<Center<'a>> {
    search(bg, h, h2, C64::from_polar(1.0, theta), x0, None)
}

fn search<'a>(
    bg: &WolfChart<'a>,
    h: &MetricField,
    hstar: &MetricField,
    rot: C64,
    x0: Option<&[f64]>,
    jac0: Option<DMatrix<f64>>,
) -> Result<Center<'a>> {
    let n = 2 * bg.dim();
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut cur = evaluate(bg, &x, h, hstar, rot)?;
    let scale = |e: &Eval| e.coords.a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() + 1e-9;
    let mut jac = jac0;
    let mut radius = 0.5;
    for it in 0..CENTER_MAX_ITER {
        if cur.r.norm() < CENTER_TOL * scale(&cur) {
            return Ok(finish(x, cur, it, jac));
        }
        let j = match jac.take() {
            Some(j) => j,
            None => fd_jacobian(bg, &x, h, hstar, rot)?,
        };
        let mut step = j.clone().lu().solve(&(-&cur.r)).ok_or_else(|| LabError::NoConvergence("singular center Jacobian".into()))?;
        if step.norm() > radius {
            step *= radius / step.norm();
        }
        let xt: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + s).collect();
        match evaluate(bg, &xt, h, hstar, rot) {
            Ok(next) if next.r.norm() < cur.r.norm() => {
                // Broyden update
                let dr = &next.r - &cur.r;
                let upd = (&dr - &j * &step) * step.transpose() / step.norm_squared();
                jac = Some(j + upd);
                if step.norm() >= 0.99 * radius {
                    radius *= 2.0;
                }
                x = xt;
                cur = next;
            }
            _ => {
                radius *= 0.25;
                if radius < 1e-10 {
                    return Err(LabError::NoConvergence(format!("center search stalled at residual {:.3e}", cur.r.norm())));
                }
            }
        }
    }
    Err(LabError::NoConvergence(format!("center search: residual {:.3e} after {CENTER_MAX_ITER} iterations", cur.r.norm())))
}

fn fd_jacobian(bg: &WolfChart, x: &[f64], h: &MetricField, hstar: &MetricField, rot: C64) -> Result<DMatrix<f64>> {
    let n = x.len();
    let step = 1e-4;
    let mut j = DMatrix::zeros(n, n);
    for c in 0..n {
        let mut xp = x.to_vec();
        xp[c] += step;
        let mut xm = x.to_vec();
        xm[c] -= step;
        let rp = evaluate(bg, &xp, h, hstar, rot)?.r;
        let rm = evaluate(bg, &xm, h, hstar, rot)?.r;
        j.set_column(c, &((rp - rm) / (2.0 * step)));
    }
    Ok(j)
}

/// F(h, h*) as the total energy E(c, h) + E(c, h*) at the center.
pub fn f_general(bg: &WolfChart, h: &MetricField, hstar: &MetricField) -> Result<f64> {
    Ok(center_find(bg, h, hstar, None)?.total_energy())
}

/// F(h, h*) with the center search seeded by a nearby center.
pub fn f_general_near(bg: &WolfChart, h: &MetricField, hstar: &MetricField, near: &Center) -> Result<f64> {
    Ok(center_near(bg, h, hstar, near)?.total_energy())
}

/// E(c', h) + E(c', h*) at a probe center c' = W_{h₀}(x').
pub fn total_energy_at(bg: &WolfChart, x: &[f64], h: &MetricField, hstar: &MetricField) -> Result<f64> {
    let c = bg.solve(&to_complex(x), None)?.h;
    let chart = WolfChart::new(bg.mesh, c, bg.basis.clone());
    Ok(chart.harmonic(h, None)?.energy + chart.harmonic(hstar, None)?.energy)
}

/// Largest amount by which the total energy at the center exceeds probes at x ± δeᵢ
/// (non-positive when the center minimizes over the probes).
pub fn probe_excess(bg: &WolfChart, center: &Center, h: &MetricField, hstar: &MetricField, delta: f64) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..center.x.len() {
        for s in [-1.0, 1.0] {
            let mut xp = center.x.clone();
            xp[i] += s * delta;
            worst = worst.max(center.total_energy() - total_energy_at(bg, &xp, h, hstar)?);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::build_bolza_mesh;
    use crate::wolf::coord_dist;
    use crate::landslide::Pair;

    #[test]
    fn normalized_pair_is_centered_at_once() {
        let m = build_bolza_mesh(2).unwrap();
        let bg = WolfChart::background(&m).unwrap();
        let a = [C64::new(0.2, 0.1), C64::new(-0.1, 0.0), C64::new(0.05, 0.1)];
        let p = Pair::normalized(&bg, &[0.0; 6], &a).unwrap();
        let c = center_find(&bg, &p.h, &p.hstar, None).unwrap();
        assert_eq!(c.iterations, 0);
        assert!(c.residual < CENTER_TOL);
        assert!(c.x.iter().all(|v| v.abs() < 1e-12));
        assert!(coord_dist(&c.a, &a) < 1e-6);
        assert!((c.energy - c.energy_star).abs() < 1e-3 * c.energy);
    }

    #[test]
    fn shifted_center_is_recovered() {
        let m = build_bolza_mesh(2).unwrap();
        let bg = WolfChart::background(&m).unwrap();
        let x = [0.05, -0.03, 0.0, 0.04, -0.02, 0.01];
        let a = [C64::new(0.15, 0.0), C64::new(0.0, 0.1), C64::new(-0.1, 0.05)];
        let p = Pair::normalized(&bg, &x, &a).unwrap();
        let c = center_find(&bg, &p.h, &p.hstar, None).unwrap();
        let d = c.x.iter().zip(&x).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        assert!(d < 1e-5, "{:?}", c.x);
        // the center minimizes the total energy
        assert!(probe_excess(&bg, &c, &p.h, &p.hstar, 1e-2).unwrap() < 1e-8);
    }
}
