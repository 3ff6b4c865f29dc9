//! Genus-2 test surface from the regular hyperbolic octagon with corner angles π/4.

use super::mesh::SurfaceMesh;
use crate::error::{LabError, Result};
use std::f64::consts::PI;

type H3 = [f64; 3];

fn minkowski(a: &H3, b: &H3) -> f64 {
    a[0] * b[0] + a[1] * b[1] - a[2] * b[2]
}

fn hpoint(r: f64, ang: f64) -> H3 {
    [r.sinh() * ang.cos(), r.sinh() * ang.sin(), r.cosh()]
}

/// Hyperbolic distance between hyperboloid points, stable for short segments.
pub fn hdist(a: &H3, b: &H3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    let s = minkowski(&d, &d).max(0.0).sqrt();
    2.0 * (0.5 * s).asinh()
}

fn hmid(a: &H3, b: &H3) -> H3 {
    let s = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
    let n = (-minkowski(&s, &s)).sqrt();
    [s[0] / n, s[1] / n, s[2] / n]
}

/// Hyperbolic distance from the octagon centre.
pub fn radius(p: &H3) -> f64 {
    p[2].max(1.0).acosh()
}

/// Build the Bolza mesh with `refinement` rounds of geodesic 1→4 subdivision.
pub fn build_bolza_mesh(refinement: usize) -> Result<SurfaceMesh> {
    if refinement > 6 {
        return Err(LabError::Refinement(refinement));
    }
    let t = (PI / 8.0).tan().recip();
    let corner_r = (t * t).acosh();
    let mid_r = t.acosh();
    // vertices: 0 centre, 1 corner class, 2..6 side midpoints (side k ~ side k+4)
    let mut faces = Vec::new();
    let mut pos: Vec<[H3; 3]> = Vec::new();
    let centre = [0.0, 0.0, 1.0];
    for k in 0..8 {
        let pk = hpoint(corner_r, k as f64 * PI / 4.0);
        let mk = hpoint(mid_r, k as f64 * PI / 4.0 + PI / 8.0);
        let pk1 = hpoint(corner_r, (k + 1) as f64 * PI / 4.0);
        faces.push([0, 1, 2 + k % 4]);
        pos.push([centre, pk, mk]);
        faces.push([0, 2 + k % 4, 1]);
        pos.push([centre, mk, pk1]);
    }
    let a = |k: usize| 2 * (k % 8);
    let b = |k: usize| 2 * (k % 8) + 1;
    let mut adjacency = vec![[(0, 0); 3]; 16];
    for k in 0..8 {
        // spoke to corner k: A_k edge 0 and B_{k-1} edge 2
        adjacency[a(k)][0] = (b(k + 7), 2);
        adjacency[b(k + 7)][2] = (a(k), 0);
        // spoke to midpoint k: A_k edge 2 and B_k edge 0
        adjacency[a(k)][2] = (b(k), 0);
        adjacency[b(k)][0] = (a(k), 2);
        // half sides glued across opposite sides of the octagon
        adjacency[a(k)][1] = (b(k + 4), 1);
        adjacency[b(k + 4)][1] = (a(k), 1);
    }
    let mut hyper = vec![[0.0; 3]; 6];
    for (f, t) in faces.iter().enumerate() {
        for c in 0..3 {
            if t[c] != 1 && hyper[t[c]][2] == 0.0 {
                hyper[t[c]] = pos[f][c];
            }
        }
    }
    hyper[1] = pos[0][1];
    let lengths = |pos: &[[H3; 3]]| -> Vec<[f64; 3]> {
        pos.iter()
            .map(|p| [hdist(&p[0], &p[1]), hdist(&p[1], &p[2]), hdist(&p[2], &p[0])])
            .collect()
    };
    let mut mesh = SurfaceMesh::assemble_loose(6, faces, lengths(&pos), adjacency, Some(hyper))?;
    for _ in 0..refinement {
        let (m, p) = subdivide(&mesh, &pos)?;
        mesh = m;
        pos = p;
    }
    Ok(mesh)
}

fn subdivide(mesh: &SurfaceMesh, pos: &[[H3; 3]]) -> Result<(SurfaceMesh, Vec<[H3; 3]>)> {
    let nv = mesh.vertex_count;
    let nf = mesh.face_count();
    let mut faces = Vec::with_capacity(4 * nf);
    let mut newpos = Vec::with_capacity(4 * nf);
    let mut hyper = mesh.hyperboloid.clone().unwrap_or_default();
    hyper.resize(nv + mesh.edge_count(), [0.0; 3]);
    for f in 0..nf {
        let t = mesh.faces[f];
        let m = [nv + mesh.edge_of[f][0], nv + mesh.edge_of[f][1], nv + mesh.edge_of[f][2]];
        let p = pos[f];
        let q = [hmid(&p[0], &p[1]), hmid(&p[1], &p[2]), hmid(&p[2], &p[0])];
        for k in 0..3 {
            if hyper[m[k]][2] == 0.0 {
                hyper[m[k]] = q[k];
            }
        }
        faces.push([t[0], m[0], m[2]]);
        newpos.push([p[0], q[0], q[2]]);
        faces.push([t[1], m[1], m[0]]);
        newpos.push([p[1], q[1], q[0]]);
        faces.push([t[2], m[2], m[1]]);
        newpos.push([p[2], q[2], q[1]]);
        faces.push([m[0], m[1], m[2]]);
        newpos.push([q[0], q[1], q[2]]);
    }
    let child = |f: usize, c: usize| 4 * f + c;
    let mut adj = vec![[(0, 0); 3]; 4 * nf];
    for f in 0..nf {
        adj[child(f, 0)][1] = (child(f, 3), 2);
        adj[child(f, 3)][2] = (child(f, 0), 1);
        adj[child(f, 1)][1] = (child(f, 3), 0);
        adj[child(f, 3)][0] = (child(f, 1), 1);
        adj[child(f, 2)][1] = (child(f, 3), 1);
        adj[child(f, 3)][1] = (child(f, 2), 1);
        for k in 0..3 {
            let (g, m) = mesh.adjacency[f][k];
            adj[child(f, k)][0] = (child(g, (m + 1) % 3), 2);
            adj[child(f, (k + 1) % 3)][2] = (child(g, m), 0);
        }
    }
    let lengths = newpos
        .iter()
        .map(|p| [hdist(&p[0], &p[1]), hdist(&p[1], &p[2]), hdist(&p[2], &p[0])])
        .collect();
    // shared edges are the same geodesic segment, but rounding can differ across faces
    let mut mesh2 = SurfaceMesh::assemble_loose(nv + mesh.edge_count(), faces, lengths, adj, Some(hyper))?;
    mesh2.hyperboloid.as_mut().map(|h| h.truncate(mesh2.vertex_count));
    Ok((mesh2, newpos))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{area, MetricField};

    #[test]
    fn base_counts() {
        let m = build_bolza_mesh(0).unwrap();
        assert_eq!((m.vertex_count, m.edge_count(), m.face_count()), (6, 24, 16));
        assert_eq!(m.euler(), -2);
        assert_eq!(m.genus, 2);
    }

    #[test]
    fn face_count_grows_by_four() {
        for k in 0..4 {
            let m = build_bolza_mesh(k).unwrap();
            assert_eq!(m.face_count(), 16 * 4usize.pow(k as u32));
            assert_eq!(m.euler(), -2);
        }
        assert!(build_bolza_mesh(7).is_err());
    }

    #[test]
    fn hyperbolic_angles_close_up() {
        // hyperbolic corner angles from the lengths, via the hyperbolic law of cosines
        let m = build_bolza_mesh(1).unwrap();
        let mut sum = vec![0.0; m.vertex_count];
        for (f, l) in m.edge_lengths.iter().enumerate() {
            for k in 0..3 {
                let (b, c, a) = (l[k], l[(k + 2) % 3], l[(k + 1) % 3]);
                let cos = (b.cosh() * c.cosh() - a.cosh()) / (b.sinh() * c.sinh());
                sum[m.faces[f][k]] += cos.clamp(-1.0, 1.0).acos();
            }
        }
        for s in sum {
            assert!((s - 2.0 * PI).abs() < 1e-9, "{s}");
        }
    }

    #[test]
    fn chart_area_converges_and_background_is_exact() {
        let err = |r| {
            let m = build_bolza_mesh(r).unwrap();
            (area(&m, &MetricField::chart(&m)) - 4.0 * PI).abs()
        };
        let (e1, e2) = (err(1), err(2));
        assert!(e2 < e1 / 3.0, "{e1} {e2}");
        let m = build_bolza_mesh(2).unwrap();
        let h = crate::wolf::hyperbolic_background(&m).unwrap();
        assert!((area(&m, &h) - 4.0 * PI).abs() < 1e-8);
    }

    #[test]
    fn vertex_stars_cover_all_corners() {
        let m = build_bolza_mesh(0).unwrap();
        let stars = m.vertex_stars();
        let total: usize = stars.iter().map(|s| s.len()).sum();
        assert_eq!(total, 48);
        assert_eq!(stars[0].len(), 16);
        assert_eq!(stars[1].len(), 16);
    }
}
