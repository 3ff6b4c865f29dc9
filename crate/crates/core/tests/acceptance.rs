//! Acceptance gate: one PASS/FAIL line per criterion. Failing criteria are reported, not
//! raised; set ACCEPTANCE_STRICT=1 to turn any FAIL into a non-zero exit.

use landslide_lab::ads::{self, Convexity};
use landslide_lab::center::center_find;
use landslide_lab::geom::ops::vertex_areas;
use landslide_lab::geom::{build_bolza_mesh, MetricField, ScalarField, SurfaceMesh};
use landslide_lab::grafting3d::{curvature_bound_check, end_data, liouville_check, renormalized_volume};
use landslide_lab::landslide::{
    direction, fixed_point, fixed_point_multi, flow_group_check, hamiltonian_check, hamiltonian_rel_error, landslide, orbit_drift, pair_coords,
    pair_dist, Pair,
};
use landslide_lab::minlag::{f_normalized, hess_diag_and_bound, wolf_tangent};
use landslide_lab::oracle::{convergence_sweeps, pointwise_bruteforce, Bump, ORACLE_SEED};
use landslide_lab::quaddiff::holomorphic_basis;
use landslide_lab::wolf::{e_second_order, e_second_order_fit, resolvent, WolfChart};
use landslide_lab::Result;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

struct Line {
    pass: bool,
    detail: String,
}

fn line(pass: bool, detail: impl Into<String>) -> Result<Line> {
    Ok(Line { pass, detail: detail.into() })
}

/// Surface, background chart and the sample pairs at one refinement.
struct Lab {
    mesh: &'static SurfaceMesh,
    bg: WolfChart<'static>,
}

impl Lab {
    fn new(r: usize) -> Result<Lab> {
        let mesh: &'static SurfaceMesh = Box::leak(Box::new(build_bolza_mesh(r)?));
        Ok(Lab { mesh, bg: WolfChart::background(mesh)? })
    }

    /// Sample pair k: Wolf coordinates a with |Re|, |Im| ≤ 0.15 at a center c; pair 0 is
    /// centered at the background.
    fn pair(&self, k: usize) -> Result<Pair<'static>> {
        let (x, a) = sample(k, self.bg.dim(), 0.15);
        Pair::normalized(&self.bg, &x, &a)
    }
}

fn sample(k: usize, dim: usize, amp: f64) -> (Vec<f64>, Vec<C64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(ORACLE_SEED + k as u64);
    let a: Vec<C64> = (0..dim).map(|_| C64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp))).collect();
    let x: Vec<f64> = (0..2 * dim).map(|_| if k == 0 { 0.0 } else { rng.gen_range(-0.1..0.1) }).collect();
    (x, a)
}

fn l2(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(x, w)| x * x * w).sum::<f64>().sqrt()
}

fn c1_basis(r2: &Lab, r3: &Lab) -> Result<Line> {
    let mut parts = Vec::new();
    let mut pass = true;
    for lab in [r2, r3] {
        let b = holomorphic_basis(lab.mesh, &lab.bg.c)?;
        pass &= b.elements.len() == 3 && b.gap >= 10.0;
        parts.push(format!("{} faces: dim {} gap {:.1}", lab.mesh.face_count(), b.elements.len(), b.gap));
    }
    line(pass, parts.join("; "))
}

fn c2_energy(lab: &Lab) -> Result<Line> {
    let mut worst = 0.0f64;
    for k in 0..5 {
        let p = lab.pair(k)?;
        let c = center_find(&lab.bg, &p.h, &p.hstar, None)?;
        let f = f_normalized(lab.mesh, &p.h, &p.hstar)?;
        worst = worst.max((f - 2.0 * c.energy).abs() / (2.0 * c.energy)).max((f - 2.0 * c.energy_star).abs() / (2.0 * c.energy_star));
    }
    line(worst < 1e-4, format!("max |F − 2E|/2E over 5 pairs and both energies {worst:.2e} (tol 1e-4)"))
}

fn c3_hamiltonian(lab: &Lab) -> Result<Line> {
    let mut worst = 0.0f64;
    for k in 0..3 {
        worst = worst.max(hamiltonian_rel_error(&hamiltonian_check(&lab.bg, &lab.pair(k)?)?));
    }
    line(worst < 1e-3, format!("max spread of ω(X,v), ¼dF(v), −¼∫tr(bν) over 6 directions relative to |¼dF|, 3 pairs {worst:.2e} (tol 1e-3)"))
}

fn c4_flow(lab: &Lab) -> Result<Line> {
    let p = lab.pair(0)?;
    let orbit = orbit_drift(&lab.bg, &p, 16)?;
    let group = flow_group_check(&lab.bg, 0.7, 1.1, &p)?;
    let fresh = p.stripped();
    let base = pair_coords(&lab.bg, &p)?;
    let period = pair_dist(&pair_coords(&lab.bg, &landslide(&lab.bg, 2.0 * PI, &fresh)?)?, &base);
    let half = pair_coords(&lab.bg, &landslide(&lab.bg, PI, &fresh)?)?;
    let swap = pair_dist(&half, &(base.1.clone(), base.0.clone()));
    line(
        orbit.drift < 1e-4 && group < 1e-4 && period < 1e-4 && swap < 1e-4,
        format!("F drift {:.2e} (tol 1e-4), group law {group:.2e}, L_2π {period:.2e}, L_π vs swap {swap:.2e} (tol 1e-4)", orbit.drift),
    )
}

fn c5_convexity(lab: &Lab) -> Result<Line> {
    let n = 2 * lab.bg.dim();
    let h = lab.pair(0)?.h;
    let at = lab.bg.transported(h.clone());
    let mut diag = 0.0f64;
    for k in 0..n {
        let pr = hess_diag_and_bound(&lab.bg, &h, &h, &direction(&at, k))?;
        diag = diag.max((pr.fd_hess - pr.wp2).abs() / pr.wp2);
    }
    let mut slack = f64::INFINITY;
    for k in 1..4 {
        let p = lab.pair(k)?;
        let at = lab.bg.transported(p.h.clone());
        for d in 0..n {
            let pr = hess_diag_and_bound(&lab.bg, &p.h, &p.hstar, &direction(&at, d))?;
            slack = slack.min(pr.fd_hess - pr.wp2.max(pr.lower_bound));
        }
    }
    line(
        diag < 0.02 && slack >= -1e-3,
        format!("h = h*: max |Hess − 2g_WP|/2g_WP {diag:.2e} (tol 2%); off-diagonal min Hess − bound {slack:.3e} (≥ −1e-3)"),
    )
}

fn c6_resolvent(lab: &Lab) -> Result<Line> {
    let mut rng = ChaCha8Rng::seed_from_u64(ORACLE_SEED);
    let n = lab.mesh.vertex_count;
    let mut min = f64::INFINITY;
    for k in 0..20 {
        // half smooth positive data, half near-deltas
        let values: Vec<f64> = if k % 2 == 0 {
            (0..n).map(|_| rng.gen_range(0.01..1.0)).collect()
        } else {
            let v = rng.gen_range(0..n);
            (0..n).map(|i| if i == v { 1.0 } else { 1e-9 }).collect()
        };
        let u = resolvent(lab.mesh, &lab.bg.c, &ScalarField { values })?;
        min = min.min(u.values.iter().copied().fold(f64::INFINITY, f64::min));
    }
    line(min > 0.0, format!("min (2−Δ)⁻¹f over 20 positive f: {min:.3e}"))
}

fn c7_expansion(lab: &Lab) -> Result<Line> {
    let w = vertex_areas(lab.mesh, &lab.bg.c);
    let mut worst = 0.0f64;
    for k in 0..3 {
        let q = lab.bg.qd(&sample(k, lab.bg.dim(), 0.15).1);
        let pred = e_second_order(&lab.bg, &q)?;
        let fit = e_second_order_fit(&lab.bg, &q, 0.1)?;
        let d: Vec<f64> = fit.values.iter().zip(&pred.values).map(|(a, b)| a - b).collect();
        worst = worst.max(l2(&d, &w) / l2(&pred.values, &w));
    }
    line(worst < 0.02, format!("max relative L² error of the t² coefficient over 3 directions {:.2}% (tol 2%)", 100.0 * worst))
}

fn c8_grafting(r2: &Lab, r3: &Lab) -> Result<Line> {
    let (p2, p3) = (r2.pair(0)?, r3.pair(0)?);
    let mut pass = true;
    let mut parts = Vec::new();
    for s in [0.2, 0.8, 2.0] {
        let a = curvature_bound_check(r2.mesh, s, &p2.h, &p2.hstar)?;
        let b = curvature_bound_check(r3.mesh, s, &p3.h, &p3.hstar)?;
        // mesh error: the identity's defect must shrink under refinement, and the curvature
        // bound may be missed by at most the finest defect
        let converging = b.gauss_defect_l2 < a.gauss_defect_l2;
        let bounded = b.k_min >= b.bound - b.gauss_defect;
        pass &= converging && bounded;
        parts.push(format!(
            "s={s}: L² defect {:.2e}→{:.2e}, K_min−bound {:.2e} (ε {:.2e})",
            a.gauss_defect_l2,
            b.gauss_defect_l2,
            b.k_min - b.bound,
            b.gauss_defect
        ));
    }
    line(pass, parts.join("; "))
}

fn c9_volume(lab: &Lab) -> Result<Line> {
    let p = lab.pair(0)?;
    let e = end_data(lab.mesh, 0.8, &p.h, &p.hstar)?;
    let rv = renormalized_volume(lab.mesh, &e.i, &e.b, 0.0, 1.0, 9, 64)?;
    let expected = -PI * lab.mesh.euler() as f64;
    let slope = (rv.dwdt - expected).abs() / expected;
    line(
        slope < 1e-3 && rv.w_spread < 1e-4 && rv.mean_residual < 1e-8,
        format!(
            "dW_t/dt {:.6} vs 2π rel {slope:.2e} (tol 1e-3), W spread {:.2e} (tol 1e-4), leaf residual {:.2e} (tol 1e-8)",
            rv.dwdt, rv.w_spread, rv.mean_residual
        ),
    )
}

fn c10_liouville(lab: &Lab) -> Result<Line> {
    let p = lab.pair(0)?;
    let at = lab.bg.transported(p.h.clone());
    let mut worst = 0.0f64;
    for s in [0.2, 0.8, 2.0] {
        for k in 0..2 * lab.bg.dim() {
            let dh: MetricField = wolf_tangent(lab.mesh, &direction(&at, k), &p.h);
            let (lhs, beta) = liouville_check(lab.mesh, s, &p.h, &p.hstar, &dh)?;
            // the stated homothety factors fix the sign: ∫⟨δI, II − HI⟩ = −sinh(s)β(δh)
            worst = worst.max((lhs + s.sinh() * beta).abs() / (s.sinh() * beta).abs().max(1e-12));
        }
    }
    line(worst < 1e-3, format!("max |∫⟨δI, II−HI⟩ + sinh(s)β| / |sinh(s)β| over 3 s × 6 directions {worst:.2e} (tol 1e-3)"))
}

fn c11_ads(lab: &Lab) -> Result<Line> {
    let p = lab.pair(0)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, side) in [(-2.5, Convexity::Past), (-1.5, Convexity::Future)] {
        let s = ads::ads_surface(k, &p.h, &p.hstar)?;
        let primal = ads::surface_report(lab.mesh, &s)?;
        let dual = ads::dual_report(lab.mesh, &s)?;
        let (hl, hr) = ads::mgh_left_right(&lab.bg, k, &p, side)?;
        let other = if side == Convexity::Past { Convexity::Future } else { Convexity::Past };
        let (hl2, hr2) = ads::mgh_left_right(&lab.bg, ads::kstar(k)?, &p.swapped().stripped(), other)?;
        let a = (lab.bg.coords_of(&hl, None)?.a, lab.bg.coords_of(&hr, None)?.a);
        let b = (lab.bg.coords_of(&hl2, None)?.a, lab.bg.coords_of(&hr2, None)?.a);
        let d = pair_dist(&a, &b);
        pass &= dual.involution < 1e-12 && dual.curvature_defect <= primal.gauss_defect && d < 1e-3;
        parts.push(format!(
            "K={k}: involution {:.1e}, |K(dual) − K*| {:.1e} (mesh error {:.1e}), left/right mismatch {d:.1e}",
            dual.involution, dual.curvature_defect, primal.gauss_defect
        ));
    }
    line(pass, parts.join("; "))
}

fn c12_fixed(lab: &Lab) -> Result<Line> {
    // near the diagonal: h₋ is a small perturbation of h₊
    let ap = sample(10, lab.bg.dim(), 0.1).1;
    let am: Vec<C64> = ap.iter().zip(sample(11, lab.bg.dim(), 0.02).1).map(|(p, d)| p + d).collect();
    let hp = lab.bg.solve(&ap, None)?.h;
    let hm = lab.bg.solve(&am, None)?.h;
    let mut rng = ChaCha8Rng::seed_from_u64(ORACLE_SEED);
    let starts: Vec<Vec<f64>> =
        (0..5).map(|k| (0..2 * lab.bg.dim()).map(|_| if k == 0 { 0.0 } else { rng.gen_range(-0.2..0.2) }).collect()).collect();
    let (_, spread) = fixed_point_multi(&lab.bg, PI / 2.0, PI / 2.0, &hp, &hm, &starts)?;
    let other = fixed_point(&lab.bg, 1.0, 1.3, &hp, &hm, &starts[0]);
    let res = other.as_ref().map(|f| f.residual).unwrap_or(f64::INFINITY);
    line(
        spread < 1e-4 && res < 1e-5,
        format!("θ₊+θ₋ = π: 5-start spread {spread:.2e} (tol 1e-4); θ₊+θ₋ ≠ π: residual {res:.2e} (tol 1e-5)"),
    )
}

fn c13_oracle() -> Result<Line> {
    let sweeps = convergence_sweeps(&[1, 2, 3], &Bump::default())?;
    let b = pointwise_bruteforce(10_000, ORACLE_SEED, 1e-12);
    let orders: Vec<String> = sweeps.iter().map(|s| format!("{} {:.2}", s.solver, s.final_order())).collect();
    line(
        sweeps.iter().all(|s| s.final_order() >= 1.8) && b.violations == 0,
        format!("L² orders {} (≥ 1.8); 2×2 algebra {} violations in {} samples at 1e-12", orders.join(", "), b.violations, b.samples),
    )
}

fn main() {
    let start = Instant::now();
    let r2 = Lab::new(2).expect("refinement 2");
    let r3 = Lab::new(3).expect("refinement 3");
    type Check<'a> = Box<dyn Fn() -> Result<Line> + 'a>;
    let checks: Vec<(&str, Check)> = vec![
        ("basis dimension", Box::new(|| c1_basis(&r2, &r3))),
        ("energy identity", Box::new(|| c2_energy(&r3))),
        ("Hamiltonian identity", Box::new(|| c3_hamiltonian(&r2))),
        ("flow conservation and group law", Box::new(|| c4_flow(&r3))),
        ("convexity", Box::new(|| c5_convexity(&r2))),
        ("resolvent positivity", Box::new(|| c6_resolvent(&r3))),
        ("Wolf expansion", Box::new(|| c7_expansion(&r3))),
        ("grafting curvature", Box::new(|| c8_grafting(&r2, &r3))),
        ("renormalized volume", Box::new(|| c9_volume(&r3))),
        ("Liouville form", Box::new(|| c10_liouville(&r3))),
        ("AdS duality", Box::new(|| c11_ads(&r3))),
        ("fixed points", Box::new(|| c12_fixed(&r2))),
        ("solver quality", Box::new(c13_oracle)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = match check() {
            Ok(l) => (l.pass, l.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!("{} [{:>2}] {name}: {detail} ({:.1} s)", if pass { "PASS" } else { "FAIL" }, i + 1, t.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {} criteria pass ({:.0} s)", checks.len() - failed, checks.len(), start.elapsed().as_secs_f64());
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
