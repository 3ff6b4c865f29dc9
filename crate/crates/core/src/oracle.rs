//! Independent checks: manufactured solutions with refinement sweeps, randomized 2×2 algebra,
//! and a finite-difference harness with step selection.

use crate::ads::{dual_surface, kstar};
use crate::error::{LabError, Result};
use crate::geom::mat2::{self, M2};
use crate::geom::ops::vertex_areas;
use crate::geom::regge::{edge_values, metric_from_edges, CurvatureProblem, Scaling};
use crate::geom::{build_bolza_mesh, MetricField, OperatorField, ScalarField, SurfaceMesh};
use crate::wolf::{hyperbolic_background, resolvent};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ORACLE_SEED: u64 = 0x5eed_2024;

/// Radial bump u = ε(1 − r²/R²)⁴ around the octagon centre, with its hyperbolic Laplacian
/// u'' + coth(r)u'. Supported inside the inscribed disk, so it is well defined on the surface.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct Bump {
    pub amplitude: f64,
    pub radius: f64,
}

impl Default for Bump {
    fn default() -> Self {
        Bump { amplitude: 0.3, radius: 1.2 }
    }
}

impl Bump {
    pub fn value(&self, r: f64) -> f64 {
        if r >= self.radius {
            return 0.0;
        }
        self.amplitude * (1.0 - (r / self.radius).powi(2)).powi(4)
    }

    pub fn laplacian(&self, r: f64) -> f64 {
        let (e, rr) = (self.amplitude, self.radius * self.radius);
        if r >= self.radius {
            return 0.0;
        }
        if r < 1e-9 {
            return -16.0 * e / rr;
        }
        let w = 1.0 - r * r / rr;
        let (w1, w2) = (-2.0 * r / rr, -2.0 / rr);
        let d1 = 4.0 * e * w.powi(3) * w1;
        let d2 = 12.0 * e * w * w * w1 * w1 + 4.0 * e * w.powi(3) * w2;
        d2 + d1 / r.tanh()
    }

    fn radii(mesh: &SurfaceMesh) -> Result<Vec<f64>> {
        let hyp = mesh.hyperboloid.as_ref().ok_or_else(|| LabError::Precondition("mesh has no hyperboloid positions".into()))?;
        Ok(hyp.iter().map(crate::geom::bolza::radius).collect())
    }
}

/// h = e^{2u}h₀ (edgewise) and the curvature e^{−2u}(K₀ − Δ₀u) of the smooth metric at the
/// vertices, with h₀ the discrete hyperbolic background (K₀ = −1).
pub fn manufactured_curvature(mesh: &SurfaceMesh, bump: &Bump) -> Result<(MetricField, ScalarField, ScalarField)> {
    let h0 = hyperbolic_background(mesh)?;
    let r = Bump::radii(mesh)?;
    let u: Vec<f64> = r.iter().map(|r| bump.value(*r)).collect();
    let k: Vec<f64> = r.iter().zip(&u).map(|(r, u)| (-2.0 * u).exp() * (-1.0 - bump.laplacian(*r))).collect();
    let p = CurvatureProblem {
        mesh,
        base: edge_values(mesh, &h0),
        extra: vec![0.0; mesh.edge_count()],
        target: k.clone(),
        scaling: Scaling::Exponential,
    };
    let h = metric_from_edges(mesh, &p.edges(&u));
    Ok((h, ScalarField { values: u }, ScalarField { values: k }))
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct Sweep {
    pub solver: String,
    pub refinements: Vec<usize>,
    /// L² error against the smooth solution at the vertices, weighted by vertex area. The
    /// largest pointwise error sits at the valence-16 centre vertex and converges more slowly.
    pub errors: Vec<f64>,
    /// log₂ of successive error ratios.
    pub orders: Vec<f64>,
}

impl Sweep {
    pub fn final_order(&self) -> f64 {
        *self.orders.last().unwrap_or(&f64::NAN)
    }
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

/// Errors of the three solvers against the bump solution over the given refinements:
/// the resolvent (2 − Δ)u = f, the Liouville problem K(e^{2u}h₀) = K_exact, and the Wolf-type
/// linear scaling K(e·h₀) = K_exact with e = e^{2u}.
pub fn convergence_sweeps(refinements: &[usize], bump: &Bump) -> Result<Vec<Sweep>> {
    let mut err = [Vec::new(), Vec::new(), Vec::new()];
    for &r in refinements {
        let mesh = build_bolza_mesh(r)?;
        let (_, u, k) = manufactured_curvature(&mesh, bump)?;
        let h0 = hyperbolic_background(&mesh)?;
        let radii = Bump::radii(&mesh)?;
        let va = vertex_areas(&mesh, &h0);
        let l2_err = |a: &[f64], b: &[f64]| a.iter().zip(b).zip(&va).map(|((x, y), w)| (x - y).powi(2) * w).sum::<f64>().sqrt();

        let f: Vec<f64> = radii.iter().zip(&u.values).map(|(r, u)| 2.0 * u - bump.laplacian(*r)).collect();
        let sol = resolvent(&mesh, &h0, &ScalarField { values: f })?;
        err[0].push(l2_err(&sol.values, &u.values));

        let base = edge_values(&mesh, &h0);
        let extra = vec![0.0; mesh.edge_count()];
        let p = CurvatureProblem { mesh: &mesh, base: base.clone(), extra: extra.clone(), target: k.values.clone(), scaling: Scaling::Exponential };
        let (x, _) = p.solve(vec![0.0; mesh.vertex_count], 1e-12, 50)?;
        err[1].push(l2_err(&x, &u.values));

        let p = CurvatureProblem { mesh: &mesh, base, extra, target: k.values.clone(), scaling: Scaling::Linear };
        let (x, _) = p.solve(vec![1.0; mesh.vertex_count], 1e-12, 50)?;
        let e: Vec<f64> = u.values.iter().map(|u| (2.0 * u).exp()).collect();
        err[2].push(l2_err(&x, &e));
    }
    Ok(["laplacian", "liouville", "wolf"]
        .iter()
        .zip(err)
        .map(|(name, errors)| Sweep { solver: name.to_string(), refinements: refinements.to_vec(), orders: orders(&errors), errors })
        .collect())
}

#[derive(Clone, Debug, Default, serde::Serialize)]
pub struct Bruteforce {
    pub samples: usize,
    pub seed: u64,
    /// Largest relative violation of each identity.
    pub worst: Vec<(String, f64)>,
    pub violations: usize,
}

fn random_spd(rng: &mut ChaCha8Rng) -> M2 {
    let a = M2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    a.transpose() * a + M2::identity() * rng.gen_range(0.2..2.0)
}

/// Pointwise identities on `count` random pairs (h, h*) with det h = det h*, at tolerance `tol`
/// relative to the natural scale of each identity.
pub fn pointwise_bruteforce(count: usize, seed: u64, tol: f64) -> Bruteforce {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = [
        "det_one_root",
        "root_squares",
        "self_adjoint",
        "swap_inverse",
        "one_plus_b_squared",
        "det_one_plus_b2",
        "trace_identity",
        "eigen_trace",
        "beta_det",
        "duality_involution",
        "kstar_involution",
        "gauss_scalars",
    ];
    let mut worst = vec![0.0f64; names.len()];
    let mut violations = 0;
    let one = M2::identity();
    for _ in 0..count {
        let h = random_spd(&mut rng);
        let g = random_spd(&mut rng);
        let hs = g * (h.determinant() / g.determinant()).sqrt();
        let hi = mat2::inv(&h).unwrap();
        let b = mat2::pos_sqrt(&(hi * hs)).unwrap();
        let bi = mat2::pos_sqrt(&(mat2::inv(&hs).unwrap() * h)).unwrap();
        let tr = b.trace();
        let lam = b.eigenvalues().map(|v| v.max()).unwrap_or(f64::NAN);
        let tau = rng.gen_range(0.0..1.0);
        let beta = one + b * tau;
        let k = -1.0 - rng.gen_range(1e-3..20.0);
        let (i2, b2) = dual_surface(&MetricField { values: vec![h], variation: false }, &OperatorField { values: vec![b * 1.3] }).unwrap();
        let (i3, b3) = dual_surface(&i2, &b2).unwrap();
        let ks = kstar(k).unwrap();
        let n = |m: &M2| m.norm().max(1.0);
        let errs = [
            (b.determinant() - 1.0).abs(),
            (b * b - hi * hs).norm() / n(&(hi * hs)),
            ((h * b) - (h * b).transpose()).norm() / n(&h),
            (bi - mat2::inv(&b).unwrap()).norm() / n(&bi),
            ((one + b) * (one + b) - b * (2.0 + tr)).norm() / n(&b) / (2.0 + tr),
            ((one + b * b).determinant() - tr * tr).abs() / (tr * tr),
            (h * b * tr - (h + hs)).norm() / n(&(h + hs)),
            (tr - (lam + 1.0 / lam)).abs() / tr,
            (beta.determinant() - (1.0 + tau * tau + tau * tr)).abs() / beta.determinant(),
            ((i3.values[0] - h).norm() / n(&h)).max((b3.values[0] - b * 1.3).norm() / n(&b)),
            (kstar(ks).unwrap() - k).abs() / k.abs(),
            ((-1.0 - ks) - ks / k).abs() / ks.abs(),
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
            if !(e <= tol) {
                violations += 1;
            }
        }
    }
    Bruteforce { samples: count, seed, worst: names.iter().map(|s| s.to_string()).zip(worst).collect(), violations }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct FdEstimate {
    /// Richardson-extrapolated first derivative at the selected step.
    pub derivative: f64,
    /// Central second difference at the selected step.
    pub second: f64,
    /// Larger step of the extrapolated pair.
    pub step: f64,
    /// Observed convergence order of the central differences near the selected step.
    pub order: f64,
    pub steps: Vec<f64>,
    pub central: Vec<f64>,
}

/// Central differences of f at 0 over the steps (decreasing), with the step chosen where
/// successive estimates agree best: truncation error shrinks as the step decreases until
/// evaluation noise takes over.
pub fn fd_harness(f: impl Fn(f64) -> Result<f64>, steps: &[f64]) -> Result<FdEstimate> {
    if steps.len() < 3 {
        return Err(LabError::Precondition("fd_harness needs at least three steps".into()));
    }
    let f0 = f(0.0)?;
    let mut central = Vec::with_capacity(steps.len());
    let mut second = Vec::with_capacity(steps.len());
    for &h in steps {
        let (p, m) = (f(h)?, f(-h)?);
        central.push((p - m) / (2.0 * h));
        second.push((p - 2.0 * f0 + m) / (h * h));
    }
    let diffs: Vec<f64> = central.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    let k = (0..diffs.len()).min_by(|a, b| diffs[*a].partial_cmp(&diffs[*b]).unwrap()).unwrap();
    let (h1, h2) = (steps[k], steps[k + 1]);
    let ratio = h1 / h2;
    let derivative = (ratio * ratio * central[k + 1] - central[k]) / (ratio * ratio - 1.0);
    let order = if k > 0 && diffs[k] > 0.0 {
        (diffs[k - 1] / diffs[k]).ln() / (steps[k - 1] / steps[k]).ln()
    } else if k + 1 < diffs.len() && diffs[k + 1] > 0.0 {
        (diffs[k] / diffs[k + 1]).ln() / (steps[k] / steps[k + 1]).ln()
    } else {
        f64::INFINITY
    };
    Ok(FdEstimate { derivative, second: second[k], step: h1, order, steps: steps.to_vec(), central })
}

/// Steps h₀·2^{−k}, k < n.
pub fn halving_steps(h0: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| h0 * 0.5f64.powi(k as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harness_on_polynomials() {
        let e = fd_harness(|t| Ok(t * t), &halving_steps(0.1, 6)).unwrap();
        assert!(e.derivative.abs() < 1e-10);
        assert!((e.second - 2.0).abs() < 1e-10);
        let e = fd_harness(|t| Ok((1.0 + t).exp().sin()), &halving_steps(0.2, 8)).unwrap();
        let exact = 1f64.exp() * 1f64.exp().cos();
        assert!((e.derivative - exact).abs() < 1e-8, "{e:?}");
        assert!(e.order > 1.8, "{e:?}");
    }

    #[test]
    fn harness_backs_off_under_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise: Vec<f64> = (0..64).map(|_| rng.gen_range(-1e-8..1e-8)).collect();
        let f = |t: f64| {
            let k = ((t.abs() * 1e6) as usize + if t < 0.0 { 31 } else { 0 }) % 64;
            Ok(t.sin() * 3.0 + noise[k])
        };
        let e = fd_harness(f, &halving_steps(0.1, 14)).unwrap();
        assert!(e.step >= 1e-3, "{e:?}");
        assert!((e.derivative - 3.0).abs() < 1e-5, "{e:?}");
    }

    #[test]
    fn bruteforce_small() {
        let r = pointwise_bruteforce(200, 1, 1e-12);
        assert_eq!(r.violations, 0, "{:?}", r.worst);
    }

    #[test]
    fn bump_at_zero_amplitude() {
        let m = build_bolza_mesh(1).unwrap();
        let (h, u, k) = manufactured_curvature(&m, &Bump { amplitude: 0.0, radius: 1.2 }).unwrap();
        let h0 = hyperbolic_background(&m).unwrap();
        assert!(h.max_dist(&h0) < 1e-14);
        assert!(u.values.iter().all(|v| *v == 0.0));
        assert!(k.values.iter().all(|v| *v == -1.0));
    }

    #[test]
    fn bump_laplacian_matches_differences() {
        let b = Bump::default();
        for r in [0.0, 0.3, 0.9] {
            // radial Laplacian by differences of the profile
            let d = 1e-4;
            let lap = if r == 0.0 {
                2.0 * (b.value(d) - b.value(0.0)) * 2.0 / (d * d)
            } else {
                (b.value(r + d) - 2.0 * b.value(r) + b.value(r - d)) / (d * d) + (b.value(r + d) - b.value(r - d)) / (2.0 * d) / r.tanh()
            };
            assert!((lap - b.laplacian(r)).abs() < 1e-5, "{r} {lap} {}", b.laplacian(r));
        }
    }
}
