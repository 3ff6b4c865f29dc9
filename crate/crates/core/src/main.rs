use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use landslide_lab::ads::{self, Convexity};
use landslide_lab::center::{center_find, CENTER_TOL};
use landslide_lab::geom::io::{read_mesh, write_mesh, FieldFile};
use landslide_lab::geom::{build_bolza_mesh, gauss_curvature, MetricField, SurfaceMesh};
use landslide_lab::grafting3d::{curvature_bound_check, end_data, renormalized_volume, LIOUVILLE_TOL};
use landslide_lab::landslide::{
    direction, fixed_point, flow_group_check, landslide, orbit_drift, pair_coords, pair_dist, Pair, FIXED_TOL,
};
use landslide_lab::minlag::{f_normalized, hess_diag_and_bound};
use landslide_lab::oracle::{self, Bump, ORACLE_SEED};
use landslide_lab::quaddiff::{dbar_residual, holomorphic_basis};
use landslide_lab::wolf::{wolf_solve, WolfChart, WOLF_TOL};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

const DEFAULT_PHI: &str = "0.3,0.1;-0.1,0.2;0.05,0";

#[derive(Parser)]
#[command(name = "landslide-lab", version, about = "Landslide flows, smooth grafting and AdS duality on discrete genus-2 surfaces")]
struct Cli {
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for internal sweeps (capped by LANDSLIDE_LAB_THREADS).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct SurfaceArgs {
    /// Mesh file; otherwise the Bolza mesh at --refinement.
    #[arg(long)]
    mesh: Option<PathBuf>,
    #[arg(long)]
    refinement: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct PairArgs {
    #[command(flatten)]
    surface: SurfaceArgs,
    /// Metric field JSON for h.
    #[arg(long)]
    h: Option<PathBuf>,
    /// Metric field JSON for h*.
    #[arg(long)]
    hstar: Option<PathBuf>,
    /// Wolf coordinates a of the normalized pair (W_c(a), W_c(−a)): a JSON file of [re, im]
    /// pairs or inline `re,im;re,im;...`.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    /// Real background coordinates of the center c of a generated pair.
    #[arg(long, allow_hyphen_values = true)]
    center: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the Bolza mesh.
    Mesh {
        #[arg(long)]
        refinement: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Holomorphic quadratic differentials of the hyperbolic background.
    Basis {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[arg(long)]
        min_gap: Option<f64>,
        /// Directory for basis_<k>.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The hyperbolic metric W(tφ).
    Wolf {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[arg(long, allow_hyphen_values = true)]
        phi: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        t: Option<f64>,
        #[arg(long)]
        wolf_tol: Option<f64>,
        /// Directory for e.json and h.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Center of a pair and F.
    Center {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        center_tol: Option<f64>,
    },
    /// Apply the landslide flow.
    Landslide {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<f64>,
        /// Directory for h.json and hstar.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Conservation of F, group law, period and swap of the flow.
    FlowCheck {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        theta1: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        theta2: Option<f64>,
        #[arg(long)]
        drift_tol: Option<f64>,
        #[arg(long)]
        group_tol: Option<f64>,
    },
    /// Second derivative of F along a Wolf direction against its lower bounds.
    Convexity {
        #[command(flatten)]
        pair: PairArgs,
        /// Real basis direction 0..6g−6.
        #[arg(long)]
        dir: Option<usize>,
        #[arg(long)]
        diag_rel_tol: Option<f64>,
        #[arg(long)]
        bound_slack: Option<f64>,
    },
    /// Curvature of the smoothly grafted metric.
    Graft {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        gauss_tol: Option<f64>,
    },
    /// Renormalized volume along the equidistant foliation.
    Rv {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long)]
        t1: Option<f64>,
        /// Simpson intervals per unit distance.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        slope_rel_tol: Option<f64>,
        #[arg(long)]
        w_tol: Option<f64>,
        #[arg(long)]
        leaf_tol: Option<f64>,
    },
    /// Constant-curvature surface in AdS, its dual, and left/right metrics.
    Ads {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long = "K", allow_hyphen_values = true)]
        k: Option<f64>,
        /// past or future.
        #[arg(long)]
        side: Option<String>,
        #[arg(long)]
        involution_tol: Option<f64>,
        #[arg(long)]
        dual_tol: Option<f64>,
        #[arg(long)]
        coord_tol: Option<f64>,
    },
    /// Fixed points of a composition of two landslide symmetries.
    FixedPoint {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[arg(long)]
        tp: Option<f64>,
        #[arg(long)]
        tm: Option<f64>,
        /// Metric field JSON for h₊ (or --phi-plus).
        #[arg(long)]
        hp: Option<PathBuf>,
        #[arg(long)]
        hm: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        phi_plus: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        phi_minus: Option<String>,
        #[arg(long)]
        starts: Option<usize>,
        #[arg(long)]
        start_radius: Option<f64>,
        #[arg(long)]
        spread_tol: Option<f64>,
    },
    /// Independent checks of the solvers and the pointwise algebra.
    Oracle {
        /// all, bruteforce, mms or fd.
        #[arg(long)]
        suite: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        /// Comma-separated refinement levels of the manufactured-solution sweep.
        #[arg(long)]
        refinements: Option<String>,
        #[arg(long)]
        min_order: Option<f64>,
    },
}

/// Config values with flag precedence; records every resolved setting for the report.
struct Settings {
    file: BTreeMap<String, String>,
    used: Map<String, Value>,
}

fn norm_key(k: &str) -> String {
    k.trim().replace('-', "_")
}

fn parse_config(text: &str) -> anyhow::Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("config line {}: expected `key = value`", n + 1))?;
        if k.trim().is_empty() {
            bail!("config line {}: empty key", n + 1);
        }
        out.insert(norm_key(k), v.trim().to_string());
    }
    Ok(out)
}

impl Settings {
    fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let file = match path {
            Some(p) => parse_config(&std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?)?,
            None => BTreeMap::new(),
        };
        Ok(Settings { file, used: Map::new() })
    }

    fn opt<T>(&mut self, key: &str, flag: Option<T>) -> anyhow::Result<Option<T>>
    where
        T: FromStr + serde::Serialize,
        T::Err: std::fmt::Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(s) => Some(s.parse::<T>().map_err(|e| anyhow!("config key {key}: {e}"))?),
                None => None,
            },
        };
        if let Some(v) = &v {
            self.used.insert(key.to_string(), serde_json::to_value(v)?);
        }
        Ok(v)
    }

    fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> anyhow::Result<T>
    where
        T: FromStr + serde::Serialize,
        T::Err: std::fmt::Display,
    {
        let v = self.opt(key, flag)?.unwrap_or(default);
        self.used.insert(key.to_string(), serde_json::to_value(&v)?);
        Ok(v)
    }

    fn path(&mut self, key: &str, flag: Option<PathBuf>) -> anyhow::Result<Option<PathBuf>> {
        Ok(self.opt::<String>(key, flag.map(|p| p.display().to_string()))?.map(PathBuf::from))
    }
}

fn load_surface(st: &mut Settings, a: &SurfaceArgs) -> anyhow::Result<SurfaceMesh> {
    if let Some(p) = st.path("mesh", a.mesh.clone())? {
        let text = std::fs::read_to_string(&p).with_context(|| format!("reading mesh {}", p.display()))?;
        return read_mesh(&text).with_context(|| format!("mesh {}", p.display()));
    }
    let r = st.get("refinement", a.refinement, 2usize)?;
    Ok(build_bolza_mesh(r)?)
}

fn read_metric(path: &Path, mesh: &SurfaceMesh) -> anyhow::Result<MetricField> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let g = FieldFile::from_json(&text)?.into_metric().with_context(|| format!("field {}", path.display()))?;
    if g.values.len() != mesh.face_count() {
        bail!("{}: {} faces, mesh has {}", path.display(), g.values.len(), mesh.face_count());
    }
    Ok(g)
}

fn write_field(dir: &Path, name: &str, f: &FieldFile) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let p = dir.join(name);
    std::fs::write(&p, f.to_json()).with_context(|| format!("writing {}", p.display()))?;
    Ok(())
}

/// A JSON file of [re, im] pairs, or inline `re,im;re,im`.
fn parse_coeffs(spec: &str) -> anyhow::Result<Vec<C64>> {
    let p = Path::new(spec);
    if p.is_file() {
        let v: Vec<[f64; 2]> = serde_json::from_str(&std::fs::read_to_string(p)?).with_context(|| format!("coefficients {spec}"))?;
        return Ok(v.into_iter().map(|[a, b]| C64::new(a, b)).collect());
    }
    spec.split(';')
        .map(|z| {
            let (a, b) = z.split_once(',').unwrap_or((z, "0"));
            Ok(C64::new(a.trim().parse()?, b.trim().parse()?))
        })
        .collect::<anyhow::Result<_>>()
        .with_context(|| format!("coefficients `{spec}`: neither a file nor `re,im;...`"))
}

fn parse_reals(spec: &str) -> anyhow::Result<Vec<f64>> {
    spec.split(',').map(|v| Ok(v.trim().parse::<f64>()?)).collect::<anyhow::Result<_>>().with_context(|| format!("list `{spec}`"))
}

fn coeffs_for(bg: &WolfChart, spec: &str) -> anyhow::Result<Vec<C64>> {
    let a = parse_coeffs(spec)?;
    if a.len() != bg.dim() {
        bail!("expected {} complex coefficients, got {}", bg.dim(), a.len());
    }
    Ok(a)
}

fn complex_json(a: &[C64]) -> Value {
    json!(a.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
}

fn load_pair<'a>(st: &mut Settings, a: &PairArgs, bg: &WolfChart<'a>) -> anyhow::Result<Pair<'a>> {
    let h = st.path("h", a.h.clone())?;
    let hs = st.path("hstar", a.hstar.clone())?;
    match (h, hs) {
        (Some(h), Some(hs)) => Ok(Pair::new(read_metric(&h, bg.mesh)?, read_metric(&hs, bg.mesh)?)),
        (None, None) => {
            let phi = st.get("phi", a.phi.clone(), DEFAULT_PHI.to_string())?;
            let coeffs = coeffs_for(bg, &phi)?;
            let x = match st.opt("center", a.center.clone())? {
                Some(s) => parse_reals(&s)?,
                None => vec![0.0; 2 * bg.dim()],
            };
            if x.len() != 2 * bg.dim() {
                bail!("center needs {} real coordinates", 2 * bg.dim());
            }
            Ok(Pair::normalized(bg, &x, &coeffs)?)
        }
        _ => bail!("give both --h and --hstar, or neither"),
    }
}

struct Outcome {
    pass: bool,
    results: Value,
}

fn setup_threads(jobs: Option<usize>) -> anyhow::Result<usize> {
    let cap = match std::env::var("LANDSLIDE_LAB_THREADS") {
        Ok(v) => Some(v.trim().parse::<usize>().context("LANDSLIDE_LAB_THREADS")?.max(1)),
        Err(_) => None,
    };
    let want = jobs.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)).max(1);
    let n = cap.map_or(want, |c| want.min(c));
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(n)
}

fn run(cli: Cli) -> anyhow::Result<(String, Settings, Outcome)> {
    let mut st = Settings::load(cli.config.as_deref())?;
    let jobs = st.opt("jobs", cli.jobs)?;
    let threads = setup_threads(jobs)?;
    st.used.insert("jobs".into(), json!(threads));
    let (name, out) = match cli.command {
        Command::Mesh { refinement, out } => ("mesh", cmd_mesh(&mut st, refinement, out)?),
        Command::Basis { surface, min_gap, out } => ("basis", cmd_basis(&mut st, &surface, min_gap, out)?),
        Command::Wolf { surface, phi, t, wolf_tol, out } => ("wolf", cmd_wolf(&mut st, &surface, phi, t, wolf_tol, out)?),
        Command::Center { pair, center_tol } => ("center", cmd_center(&mut st, &pair, center_tol)?),
        Command::Landslide { pair, theta, out } => ("landslide", cmd_landslide(&mut st, &pair, theta, out)?),
        Command::FlowCheck { pair, samples, theta1, theta2, drift_tol, group_tol } => {
            ("flow-check", cmd_flow_check(&mut st, &pair, samples, theta1, theta2, drift_tol, group_tol)?)
        }
        Command::Convexity { pair, dir, diag_rel_tol, bound_slack } => {
            ("convexity", cmd_convexity(&mut st, &pair, dir, diag_rel_tol, bound_slack)?)
        }
        Command::Graft { pair, s, eps, gauss_tol } => ("graft", cmd_graft(&mut st, &pair, s, eps, gauss_tol)?),
        Command::Rv { pair, s, t0, t1, steps, samples, csv, slope_rel_tol, w_tol, leaf_tol } => {
            ("rv", cmd_rv(&mut st, &pair, s, t0, t1, steps, samples, csv, slope_rel_tol, w_tol, leaf_tol)?)
        }
        Command::Ads { pair, k, side, involution_tol, dual_tol, coord_tol } => {
            ("ads", cmd_ads(&mut st, &pair, k, side, involution_tol, dual_tol, coord_tol)?)
        }
        Command::FixedPoint { surface, tp, tm, hp, hm, phi_plus, phi_minus, starts, start_radius, spread_tol } => (
            "fixed-point",
            cmd_fixed_point(&mut st, &surface, tp, tm, hp, hm, phi_plus, phi_minus, starts, start_radius, spread_tol)?,
        ),
        Command::Oracle { suite, samples, tol, refinements, min_order } => {
            ("oracle", cmd_oracle(&mut st, suite, samples, tol, refinements, min_order)?)
        }
    };
    Ok((name.to_string(), st, out))
}

fn cmd_mesh(st: &mut Settings, refinement: Option<usize>, out: Option<PathBuf>) -> anyhow::Result<Outcome> {
    let r = st.get("refinement", refinement, 2usize)?;
    let out = st.path("out", out)?.ok_or_else(|| anyhow!("mesh needs --out"))?;
    let m = build_bolza_mesh(r)?;
    std::fs::write(&out, write_mesh(&m)).with_context(|| format!("writing {}", out.display()))?;
    Ok(Outcome {
        pass: true,
        results: json!({
            "faces": m.face_count(), "vertices": m.vertex_count, "edges": m.edge_count(),
            "euler": m.euler(), "genus": m.genus, "file": out.display().to_string(),
        }),
    })
}

fn cmd_basis(st: &mut Settings, s: &SurfaceArgs, min_gap: Option<f64>, out: Option<PathBuf>) -> anyhow::Result<Outcome> {
    let mesh = load_surface(st, s)?;
    let min_gap = st.get("min_gap", min_gap, 10.0)?;
    let out = st.path("out", out)?;
    let h0 = landslide_lab::wolf::hyperbolic_background(&mesh)?;
    // a small gap is reported, not raised, so the report still carries it
    let basis = match holomorphic_basis(&mesh, &h0) {
        Ok(b) => b,
        Err(landslide_lab::LabError::SpectralGap { .. }) => landslide_lab::quaddiff::basis_unchecked(&mesh, &h0),
        Err(e) => return Err(e.into()),
    };
    let residuals: Vec<f64> = basis.elements.iter().map(|q| dbar_residual(&mesh, q, &h0)).collect();
    if let Some(dir) = &out {
        for (k, q) in basis.elements.iter().enumerate() {
            write_field(dir, &format!("basis_{k}.json"), &FieldFile::Quaddiff(q.values.iter().map(|z| [z.re, z.im]).collect()))?;
        }
    }
    let dim = basis.elements.len();
    Ok(Outcome {
        pass: basis.gap >= min_gap && dim == 3 * mesh.genus - 3,
        results: json!({
            "dimension": dim, "expected_dimension": 3 * mesh.genus - 3, "gap": basis.gap,
            "singular_values": basis.singular_values, "dbar_residuals": residuals,
        }),
    })
}

fn cmd_wolf(
    st: &mut Settings,
    s: &SurfaceArgs,
    phi: Option<String>,
    t: Option<f64>,
    tol: Option<f64>,
    out: Option<PathBuf>,
) -> anyhow::Result<Outcome> {
    let mesh = load_surface(st, s)?;
    let phi = st.get("phi", phi, DEFAULT_PHI.to_string())?;
    let t = st.get("t", t, 1.0)?;
    let tol = st.get("wolf_tol", tol, WOLF_TOL)?;
    let out = st.path("out", out)?;
    let bg = WolfChart::background(&mesh)?;
    let a = coeffs_for(&bg, &phi)?;
    let sol = wolf_solve(&mesh, &bg.c, &bg.qd(&a), t)?;
    let k = gauss_curvature(&mesh, &sol.h)?;
    let defect = k.values.iter().map(|v| (v + 1.0).abs()).fold(0.0, f64::max);
    let e_min = sol.e.values.iter().copied().fold(f64::INFINITY, f64::min);
    if let Some(dir) = &out {
        write_field(dir, "e.json", &FieldFile::from_scalar(&sol.e))?;
        write_field(dir, "h.json", &FieldFile::from_metric(&sol.h))?;
    }
    let residual = sol.residuals.last().copied().unwrap_or(0.0);
    Ok(Outcome {
        pass: residual < tol && defect < tol,
        results: json!({
            "t": t, "residual": residual, "iterations": sol.residuals.len(),
            "curvature_defect": defect, "e_min": e_min, "area": landslide_lab::geom::area(&mesh, &sol.h),
        }),
    })
}

fn cmd_center(st: &mut Settings, p: &PairArgs, tol: Option<f64>) -> anyhow::Result<Outcome> {
    let mesh = load_surface(st, &p.surface)?;
    let bg = WolfChart::background(&mesh)?;
    let pair = load_pair(st, p, &bg)?;
    let tol = st.get("center_tol", tol, CENTER_TOL)?;
    let c = center_find(&bg, &pair.h, &pair.hstar, None)?;
    let f = f_normalized(&mesh, &pair.h, &pair.hstar)?;
    Ok(Outcome {
        pass: c.residual < tol,
        results: json!({
            "center_coords": c.x, "q_coords": complex_json(&c.a), "q_star_coords": complex_json(&c.a_star),
            "residual": c.residual, "iterations": c.iterations, "F": f,
            "energy": c.energy, "energy_star": c.energy_star, "total_energy": c.total_energy(),
        }),
    })
}

fn cmd_landslide(st: &mut Settings, p: &PairArgs, theta: Option<f64>, out: Option<PathBuf>) -> anyhow::Result<Outcome> {
    let mesh = load_surface(st, &p.surface)?;
    let bg = WolfChart::background(&mesh)?;
    let pair = load_pair(st, p, &bg)?;
    let theta = st.get("theta", theta, PI / 2.0)?;
    let out = st.path("out", out)?;
    let q = landslide(&bg, theta, &pair)?;
    let (a, astar) = pair_coords(&bg, &q)?;
    let prov = q.provenance.as_ref().expect("flowed pairs carry their center");
    if let Some(dir) = &out {
        write_field(dir, "h.json", &FieldFile::from_metric(&q.h))?;
        write_field(dir, "hstar.json", &FieldFile::from_metric(&q.hstar))?;
    }
    Ok(Outcome {
        pass: true,
        results: json!({
            "theta": theta, "center_coords": prov.x, "q_coords": complex_json(&prov.a),
            "h_coords": complex_json(&a), "hstar_coords": complex_json(&astar),
            "F_before": f_normalized(&mesh, &pair.h, &pair.hstar)?, "F_after": f_normalized(&mesh, &q.h, &q.hstar)?,
        }),
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_flow_check(
    st: &mut Settings,
    p: &PairArgs,
    samples: Option<usize>,
    theta1: Option<f64>,
    theta2: Option<f64>,
    drift_tol: Option<f64>,
    group_tol: Option<f64>,
) -> anyhow::Result<Outcome> {
    let mesh = load_surface(st, &p.surface)?;
    let bg = WolfChart::background(&mesh)?;
    let pair = load_pair(st, p, &bg)?;
    let samples = st.get("samples", samples, 16usize)?;
    let t1 = st.get("theta1", theta1, 0.7)?;
    let t2 = st.get("theta2", theta2, 1.1)?;
    let drift_tol = st.get("drift_tol", drift_tol, 1e-4)?;
    let group_tol = st.get("group_tol", group_tol, 1e-4)?;
    let orbit = orbit_drift(&bg, &pair, samples)?;
    let group = flow_group_check(&bg, t1, t2, &pair)?;
    let base = pair_coords(&bg, &pair)?;
    let fresh = pair.stripped();
    let period = pair_dist(&pair_coords(&bg, &landslide(&bg, 2.0 * PI, &fresh)?)?, &base);
    let half = pair_coords(&bg, &landslide(&bg, PI, &fresh)?)?;
    let swap = pair_dist(&half, &(base.1.clone(), base.0.clone()));
    Ok(Outcome {
        pass: orbit.drift < drift_tol && group < group_tol && period < group_tol && swap < group_tol,
        results: json!({
            "drift": orbit.drift, "thetas": orbit.thetas, "F_samples": orbit.f,
            "group_residual": group, "period_residual": period, "swap_residual": swap,
        }),
    })
}

fn cmd_convexity(
    st: &mut Settings,
    p: &PairArgs,
    dir: Option<usize>,
    diag_rel_tol: Option<f64>,
    slack: Option<f64>,
) -> anyhow::Result<Outcome> {
    let mesh = load_surface(st, &p.surface)?;
    let bg = WolfChart::background(&mesh)?;
    let pair = load_pair(st, p, &bg)?;
    let k = st.get("dir", dir, 0usize)?;
    let rel = st.get("diag_rel_tol", diag_rel_tol, 0.02)?;
    let slack = st.get("bound_slack", slack, 1e-3)?;
    if k >= 2 * bg.dim() {
        bail!("direction {k} out of range 0..{}", 2 * bg.dim());
    }
    let at_h = bg.transported(pair.h.clone());
    let probe = hess_diag_and_bound(&bg, &pair.h, &pair.hstar, &direction(&at_h, k))?;
    let diagonal = pair.h.max_dist(&pair.hstar) < 1e-12;
    let pass = if diagonal {
        (probe.fd_hess - probe.wp2).abs() < rel * probe.wp2
    } else {
        probe.fd_hess >= probe.wp2.max(probe.lower_bound) - slack
    };
    Ok(Outcome {
        pass,
        results: json!({
            "dir": k, "diagonal": diagonal, "fd_hess": probe.fd_hess,
            "lower_bound": probe.lower_bound, "wp2": probe.wp2, "pass": pass,
        }),
    })
}

fn cmd_graft(st: &mut Settings, p: &PairArgs, s: Option<f64>, eps: Option<f64>, gauss_tol: Option<f64>) -> anyhow::Result<Outcome> {
    let mesh = load_surface(st, &p.surface)?;
    let bg = WolfChart::background(&mesh)?;
    let pair = load_pair(st, p, &bg)?;
    let s = st.get("s", s, 0.8)?;
    let eps = st.get("eps", eps, 0.05)?;
    let gauss_tol = st.get("gauss_tol", gauss_tol, 0.05)?;
    let r = curvature_bound_check(&mesh, s, &pair.h, &pair.hstar)?;
    Ok(Outcome {
        pass: r.k_min >= r.bound - eps && r.gauss_defect_l2 < gauss_tol && r.liouville_residual < LIOUVILLE_TOL,
        results: json!({ "s": s, "curvature": r }),
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_rv(
    st: &mut Settings,
    p: &PairArgs,
    s: Option<f64>,
    t0: Option<f64>,
    t1: Option<f64>,
    steps: Option<usize>,
    samples: Option<usize>,
    csv: Option<PathBuf>,
    slope_rel_tol: Option<f64>,
    w_tol: Option<f64>,
    leaf_tol: Option<f64>,
) -> anyhow::Result<Outcome> {
    let mesh = load_surface(st, &p.surface)?;
    let bg = WolfChart::background(&mesh)?;
    let pair = load_pair(st, p, &bg)?;
    let s = st.get("s", s, 0.8)?;
    let t0 = st.get("t0", t0, 0.0)?;
    let t1 = st.get("t1", t1, 1.0)?;
    let steps = st.get("steps", steps, 64usize)?;
    let samples = st.get("samples", samples, 9usize)?;
    let csv = st.path("csv", csv)?;
    let slope_tol = st.get("slope_rel_tol", slope_rel_tol, 1e-3)?;
    let w_tol = st.get("w_tol", w_tol, 1e-4)?;
    let leaf_tol = st.get("leaf_tol", leaf_tol, 1e-8)?;
    let end = end_data(&mesh, s, &pair.h, &pair.hstar)?;
    let rv = renormalized_volume(&mesh, &end.i, &end.b, t0, t1, samples, steps)?;
    let expected = -PI * mesh.euler() as f64;
    if let Some(path) = &csv {
        let mut text = String::from("t,w_t,w,gauss_bonnet,gauss_bonnet_mesh\n");
        for k in 0..rv.t.len() {
            text.push_str(&format!("{},{},{},{},{}\n", rv.t[k], rv.w_t[k], rv.w[k], rv.gauss_bonnet[k], rv.gauss_bonnet_mesh[k]));
        }
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    let slope_err = (rv.dwdt - expected).abs() / expected;
    Ok(Outcome {
        pass: slope_err < slope_tol && rv.w_spread < w_tol && rv.mean_residual < leaf_tol,
        results: json!({ "s": s, "expected_slope": expected, "slope_rel_error": slope_err, "volume": rv }),
    })
}

fn parse_side(s: &str) -> anyhow::Result<Convexity> {
    match s.to_ascii_lowercase().as_str() {
        "past" => Ok(Convexity::Past),
        "future" => Ok(Convexity::Future),
        _ => bail!("side must be past or future, got {s}"),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_ads(
    st: &mut Settings,
    p: &PairArgs,
    k: Option<f64>,
    side: Option<String>,
    involution_tol: Option<f64>,
    dual_tol: Option<f64>,
    coord_tol: Option<f64>,
) -> anyhow::Result<Outcome> {
    let mesh = load_surface(st, &p.surface)?;
    let bg = WolfChart::background(&mesh)?;
    let pair = load_pair(st, p, &bg)?;
    let k = st.get("K", k, -2.5)?;
    let side = parse_side(&st.get("side", side, "past".to_string())?)?;
    let inv_tol = st.get("involution_tol", involution_tol, 1e-12)?;
    let dual_tol = st.get("dual_tol", dual_tol, 1e-6)?;
    let coord_tol = st.get("coord_tol", coord_tol, 1e-3)?;
    let surf = ads::ads_surface(k, &pair.h, &pair.hstar)?;
    let report = ads::surface_report(&mesh, &surf)?;
    let dual = ads::dual_report(&mesh, &surf)?;
    let (hl, hr) = ads::mgh_left_right(&bg, k, &pair, side)?;
    let other = if side == Convexity::Past { Convexity::Future } else { Convexity::Past };
    let (hl2, hr2) = ads::mgh_left_right(&bg, ads::kstar(k)?, &pair.swapped().stripped(), other)?;
    let lr = (bg.coords_of(&hl, None)?.a, bg.coords_of(&hr, None)?.a);
    let lr2 = (bg.coords_of(&hl2, None)?.a, bg.coords_of(&hr2, None)?.a);
    let consistency = pair_dist(&lr, &lr2);
    Ok(Outcome {
        pass: dual.involution < inv_tol && dual.curvature_defect < dual_tol && consistency < coord_tol,
        results: json!({
            "K": k, "K_star": dual.k_star, "side": side,
            "gauss_residual": report.gauss_defect, "surface": report, "dual_residuals": dual,
            "hl_coords": complex_json(&lr.0), "hr_coords": complex_json(&lr.1), "dual_consistency": consistency,
        }),
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_fixed_point(
    st: &mut Settings,
    s: &SurfaceArgs,
    tp: Option<f64>,
    tm: Option<f64>,
    hp: Option<PathBuf>,
    hm: Option<PathBuf>,
    phi_plus: Option<String>,
    phi_minus: Option<String>,
    starts: Option<usize>,
    radius: Option<f64>,
    spread_tol: Option<f64>,
) -> anyhow::Result<Outcome> {
    let mesh = load_surface(st, s)?;
    let bg = WolfChart::background(&mesh)?;
    let tp = st.get("tp", tp, PI / 2.0)?;
    let tm = st.get("tm", tm, PI / 2.0)?;
    let n = st.get("starts", starts, 5usize)?;
    let radius = st.get("start_radius", radius, 0.2)?;
    let spread_tol = st.get("spread_tol", spread_tol, 1e-4)?;
    let metric = |st: &mut Settings, key: &str, file: Option<PathBuf>, pkey: &str, phi: Option<String>, dflt: &str| -> anyhow::Result<MetricField> {
        match st.path(key, file)? {
            Some(f) => read_metric(&f, &mesh),
            None => Ok(bg.solve(&coeffs_for(&bg, &st.get(pkey, phi, dflt.to_string())?)?, None)?.h),
        }
    };
    let h_plus = metric(st, "hp", hp, "phi_plus", phi_plus, "0.2,0;0,0.1;0,0")?;
    let h_minus = metric(st, "hm", hm, "phi_minus", phi_minus, "-0.1,0.1;0.1,0;0,-0.05")?;
    let mut rng = ChaCha8Rng::seed_from_u64(ORACLE_SEED);
    let points: Vec<Vec<f64>> = (0..n)
        .map(|k| if k == 0 { vec![0.0; 2 * bg.dim()] } else { (0..2 * bg.dim()).map(|_| rng.gen_range(-radius..radius)).collect() })
        .collect();
    use rayon::prelude::*;
    let runs: Vec<_> = points.par_iter().map(|x| fixed_point(&bg, tp, tm, &h_plus, &h_minus, x)).collect();
    let mut converged = Vec::new();
    let mut entries = Vec::new();
    for (x, r) in points.iter().zip(&runs) {
        match r {
            Ok(f) => {
                entries.push(json!({ "start": x, "coords": f.coords, "residual": f.residual, "iterations": f.iterations, "error": null }));
                converged.push(f.coords.clone());
            }
            Err(landslide_lab::LabError::NoConvergence(msg)) => {
                entries.push(json!({ "start": x, "coords": null, "residual": null, "iterations": null, "error": msg }))
            }
            Err(e) => bail!("fixed point: {e}"),
        }
    }
    let mut spread = 0.0f64;
    for i in 0..converged.len() {
        for j in i + 1..converged.len() {
            spread = spread.max(converged[i].iter().zip(&converged[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
        }
    }
    let complementary = (tp + tm - PI).abs() < 1e-12;
    let pass = if complementary { converged.len() == n && spread < spread_tol } else { !converged.is_empty() };
    Ok(Outcome {
        pass,
        results: json!({
            "complementary": complementary, "converged": converged.len(), "spread": spread,
            "residual_tol": FIXED_TOL, "runs": entries,
        }),
    })
}

fn testcase(name: &str, suite: &str, secs: f64, failure: Option<String>, detail: Value) -> Value {
    json!({ "name": name, "classname": suite, "time": secs, "failure": failure, "detail": detail })
}

fn testsuite(name: &str, cases: Vec<Value>) -> Value {
    let failures = cases.iter().filter(|c| !c["failure"].is_null()).count();
    let time: f64 = cases.iter().map(|c| c["time"].as_f64().unwrap_or(0.0)).sum();
    json!({ "name": name, "tests": cases.len(), "failures": failures, "errors": 0, "time": time, "testcases": cases })
}

fn suite_bruteforce(samples: usize, tol: f64) -> Value {
    let t = Instant::now();
    let b = oracle::pointwise_bruteforce(samples, ORACLE_SEED, tol);
    let secs = t.elapsed().as_secs_f64();
    let cases = b
        .worst
        .iter()
        .map(|(name, w)| {
            let fail = (*w >= tol).then(|| format!("worst defect {w:.3e} ≥ {tol:.1e}"));
            testcase(name, "bruteforce", secs / b.worst.len() as f64, fail, json!({ "worst": w, "samples": b.samples }))
        })
        .collect();
    testsuite("bruteforce", cases)
}

fn suite_mms(refinements: &[usize], min_order: f64) -> anyhow::Result<Value> {
    let t = Instant::now();
    let sweeps = oracle::convergence_sweeps(refinements, &Bump::default())?;
    let secs = t.elapsed().as_secs_f64() / sweeps.len().max(1) as f64;
    let cases = sweeps
        .iter()
        .map(|s| {
            let o = s.final_order();
            let fail = (!(o >= min_order)).then(|| format!("order {o:.3} < {min_order}"));
            testcase(&s.solver, "mms", secs, fail, serde_json::to_value(s).expect("sweep serializes"))
        })
        .collect();
    Ok(testsuite("mms", cases))
}

fn suite_fd() -> anyhow::Result<Value> {
    let mut cases = Vec::new();
    let steps = oracle::halving_steps(0.1, 8);
    let t = Instant::now();
    let e = oracle::fd_harness(|x| Ok((1.0 + x).exp()), &steps)?;
    let err = (e.derivative - 1f64.exp()).abs();
    cases.push(testcase("exp_derivative", "fd", t.elapsed().as_secs_f64(), (err >= 1e-8).then(|| format!("error {err:.3e}")), json!(e)));

    let t = Instant::now();
    let mesh = build_bolza_mesh(2)?;
    let bg = WolfChart::background(&mesh)?;
    let q = bg.qd(&[C64::new(0.2, -0.1), C64::new(0.05, 0.1), C64::new(-0.1, 0.0)]);
    let hstar = bg.solve(&[C64::new(-0.1, 0.1), C64::new(0.1, 0.0), C64::new(0.0, 0.05)], None)?.h;
    let h = &bg.c;
    let e = oracle::fd_harness(|s| f_normalized(&mesh, &wolf_solve(&mesh, h, &q, s)?.h, &hstar), &oracle::halving_steps(0.05, 6))?;
    let b = landslide_lab::minlag::labourie_root(h, &hstar)?;
    let hdot = landslide_lab::minlag::wolf_tangent(&mesh, &q, h);
    let cov = landslide_lab::minlag::df_covector(&mesh, h, &b, &hdot);
    let rel = (e.derivative - cov).abs() / cov.abs().max(1e-12);
    cases.push(testcase(
        "f_covector_along_wolf_ray",
        "fd",
        t.elapsed().as_secs_f64(),
        (rel >= 1e-3).then(|| format!("relative error {rel:.3e}")),
        json!({ "fd": e, "covector": cov, "rel_error": rel }),
    ));
    Ok(testsuite("fd", cases))
}

fn cmd_oracle(
    st: &mut Settings,
    suite: Option<String>,
    samples: Option<usize>,
    tol: Option<f64>,
    refinements: Option<String>,
    min_order: Option<f64>,
) -> anyhow::Result<Outcome> {
    let suite = st.get("suite", suite, "all".to_string())?;
    let samples = st.get("samples", samples, 10_000usize)?;
    let tol = st.get("tol", tol, 1e-12)?;
    let refs = st.get("refinements", refinements, "1,2,3".to_string())?;
    let refs: Vec<usize> = refs.split(',').map(|r| r.trim().parse::<usize>()).collect::<Result<_, _>>().context("refinements")?;
    let min_order = st.get("min_order", min_order, 1.8)?;
    let mut suites = Vec::new();
    let all = suite == "all";
    if !matches!(suite.as_str(), "all" | "bruteforce" | "mms" | "fd") {
        bail!("unknown suite {suite}");
    }
    if all || suite == "bruteforce" {
        suites.push(suite_bruteforce(samples, tol));
    }
    if all || suite == "mms" {
        suites.push(suite_mms(&refs, min_order)?);
    }
    if all || suite == "fd" {
        suites.push(suite_fd()?);
    }
    let failures: usize = suites.iter().map(|s| s["failures"].as_u64().unwrap_or(0) as usize).sum();
    let tests: usize = suites.iter().map(|s| s["tests"].as_u64().unwrap_or(0) as usize).sum();
    Ok(Outcome { pass: failures == 0, results: json!({ "tests": tests, "failures": failures, "testsuites": suites }) })
}

fn emit(report: Option<&Path>, v: &Value) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(v)? + "\n";
    match report {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let report = cli.report.clone();
    match run(cli) {
        Ok((command, st, out)) => {
            let v = json!({ "command": command, "pass": out.pass, "config": Value::Object(st.used), "results": out.results });
            if let Err(e) = emit(report.as_deref(), &v) {
                eprintln!("error: {e:#}");
                return ExitCode::from(1);
            }
            ExitCode::from(if out.pass { 0 } else { 2 })
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
