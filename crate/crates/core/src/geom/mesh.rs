//! Triangulated closed surfaces with per-face flat charts.
//!
//! Local edge `k` of a face runs from corner `k` to corner `k+1`; the face chart puts
//! corner 0 at the origin and edge 0 along the positive x-axis.

use crate::error::{LabError, Result};
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    pub vertex_count: usize,
    pub faces: Vec<[usize; 3]>,
    /// Lengths of local edges 0, 1, 2 (l01, l12, l20).
    pub edge_lengths: Vec<[f64; 3]>,
    /// (neighbour face, neighbour local edge) across each local edge.
    pub adjacency: Vec<[(usize, usize); 3]>,
    /// Rotation taking directions in this face's chart to the neighbour's chart.
    pub transitions: Vec<[f64; 3]>,
    pub genus: usize,
    /// Unique edges as (f0, e0, f1, e1) with f0 < f1 or (f0 == f1, e0 < e1).
    pub edges: Vec<(usize, usize, usize, usize)>,
    /// Edge index of each local edge.
    pub edge_of: Vec<[usize; 3]>,
    /// Chart coordinates of the three corners.
    pub chart: Vec<[[f64; 2]; 3]>,
    /// One hyperboloid representative per vertex, when known (Bolza meshes).
    pub hyperboloid: Option<Vec<[f64; 3]>>,
}

/// Chart positions of a triangle with given edge lengths.
pub fn chart_from_lengths(l: [f64; 3]) -> [[f64; 2]; 3] {
    let (a, b, c) = (l[0], l[1], l[2]);
    // corner 2 at distance c from corner 0 and b from corner 1
    let x = (a * a + c * c - b * b) / (2.0 * a);
    let y = (c * c - x * x).max(0.0).sqrt();
    [[0.0, 0.0], [a, 0.0], [x, y]]
}

impl SurfaceMesh {
    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn euler(&self) -> i64 {
        self.vertex_count as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    /// Chart vector of local edge k.
    pub fn edge_vec(&self, f: usize, k: usize) -> [f64; 2] {
        let p = &self.chart[f];
        let (a, b) = (p[k], p[(k + 1) % 3]);
        [b[0] - a[0], b[1] - a[1]]
    }

    /// Assemble a mesh from faces, lengths and adjacency; derives edges, charts, transitions.
    pub fn assemble(
        vertex_count: usize,
        faces: Vec<[usize; 3]>,
        edge_lengths: Vec<[f64; 3]>,
        adjacency: Vec<[(usize, usize); 3]>,
        hyperboloid: Option<Vec<[f64; 3]>>,
    ) -> Result<Self> {
        let nf = faces.len();
        let mut edges = Vec::with_capacity(nf * 3 / 2);
        let mut edge_of = vec![[usize::MAX; 3]; nf];
        for f in 0..nf {
            for k in 0..3 {
                let (g, m) = adjacency[f][k];
                if g >= nf || m > 2 || adjacency[g][m] != (f, k) {
                    return Err(LabError::Precondition(format!("inconsistent adjacency at face {f} edge {k}")));
                }
                let (a, b) = (faces[f][k], faces[f][(k + 1) % 3]);
                if faces[g][m] != b || faces[g][(m + 1) % 3] != a {
                    return Err(LabError::Precondition(format!("orientation mismatch at face {f} edge {k}")));
                }
                let (la, lb) = (edge_lengths[f][k], edge_lengths[g][m]);
                if (la - lb).abs() > 1e-12 * la.max(lb) {
                    return Err(LabError::Precondition(format!("edge length mismatch at face {f} edge {k}")));
                }
                if (f, k) < (g, m) {
                    edge_of[f][k] = edges.len();
                    edge_of[g][m] = edges.len();
                    edges.push((f, k, g, m));
                }
            }
        }
        let mut chart = Vec::with_capacity(nf);
        for (f, l) in edge_lengths.iter().enumerate() {
            let (a, b, c) = (l[0], l[1], l[2]);
            if !(a > 0.0 && b > 0.0 && c > 0.0 && a < b + c && b < a + c && c < a + b) {
                return Err(LabError::Degenerate(f));
            }
            chart.push(chart_from_lengths(*l));
        }
        let mut mesh = SurfaceMesh {
            vertex_count,
            faces,
            edge_lengths,
            adjacency,
            transitions: vec![[0.0; 3]; nf],
            genus: 0,
            edges,
            edge_of,
            chart,
            hyperboloid,
        };
        let chi = mesh.euler();
        if chi > -2 || chi % 2 != 0 {
            return Err(LabError::Precondition(format!("Euler characteristic {chi} is not that of genus >= 2")));
        }
        mesh.genus = ((2 - chi) / 2) as usize;
        for f in 0..nf {
            for k in 0..3 {
                let (g, m) = mesh.adjacency[f][k];
                let d = mesh.edge_vec(f, k);
                let e = mesh.edge_vec(g, m);
                let rho = e[1].atan2(e[0]) - d[1].atan2(d[0]) - PI;
                mesh.transitions[f][k] = wrap(rho);
            }
        }
        Ok(mesh)
    }

    /// Like [`SurfaceMesh::assemble`], but first averages the two copies of every shared
    /// edge length so that rounding differences disappear.
    pub fn assemble_loose(
        vertex_count: usize,
        faces: Vec<[usize; 3]>,
        mut edge_lengths: Vec<[f64; 3]>,
        adjacency: Vec<[(usize, usize); 3]>,
        hyperboloid: Option<Vec<[f64; 3]>>,
    ) -> Result<Self> {
        for f in 0..faces.len() {
            for k in 0..3 {
                let (g, m) = adjacency[f][k];
                if (f, k) < (g, m) && g < faces.len() && m < 3 {
                    let l = 0.5 * (edge_lengths[f][k] + edge_lengths[g][m]);
                    edge_lengths[f][k] = l;
                    edge_lengths[g][m] = l;
                }
            }
        }
        Self::assemble(vertex_count, faces, edge_lengths, adjacency, hyperboloid)
    }

    /// Reconstruct adjacency from vertex pairs; fails if some pair is shared by more than one edge.
    pub fn adjacency_from_pairs(faces: &[[usize; 3]]) -> Result<Vec<[(usize, usize); 3]>> {
        use std::collections::HashMap;
        let mut map: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (f, t) in faces.iter().enumerate() {
            for k in 0..3 {
                map.entry((t[k], t[(k + 1) % 3])).or_default().push((f, k));
            }
        }
        let mut adj = vec![[(usize::MAX, 0); 3]; faces.len()];
        for (f, t) in faces.iter().enumerate() {
            for k in 0..3 {
                let rev = map.get(&(t[(k + 1) % 3], t[k]));
                let fwd = &map[&(t[k], t[(k + 1) % 3])];
                match rev {
                    Some(v) if v.len() == 1 && fwd.len() == 1 => adj[f][k] = v[0],
                    _ => {
                        return Err(LabError::Precondition(format!(
                            "edge ({}, {}) is not shared by exactly two faces; supply an adjacency block",
                            t[k],
                            t[(k + 1) % 3]
                        )))
                    }
                }
            }
        }
        Ok(adj)
    }

    /// Corners incident to each vertex, in counter-clockwise order: (face, local corner).
    pub fn vertex_stars(&self) -> Vec<Vec<(usize, usize)>> {
        let mut first: Vec<Option<(usize, usize)>> = vec![None; self.vertex_count];
        for (f, t) in self.faces.iter().enumerate() {
            for k in 0..3 {
                if first[t[k]].is_none() {
                    first[t[k]] = Some((f, k));
                }
            }
        }
        first
            .into_iter()
            .map(|s| {
                let mut star = Vec::new();
                let Some(start) = s else { return star };
                let (mut f, mut k) = start;
                loop {
                    star.push((f, k));
                    // the edge entering corner k is local edge k+2; cross it to go counter-clockwise
                    let (g, m) = self.adjacency[f][(k + 2) % 3];
                    // in g this edge runs from our corner, so our vertex is g's corner m
                    f = g;
                    k = m;
                    if (f, k) == start {
                        break;
                    }
                }
                star
            })
            .collect()
    }
}

pub fn wrap(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    if r <= -PI {
        r += 2.0 * PI;
    }
    r
}
