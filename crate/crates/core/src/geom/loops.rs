//! Shortest closed curves in homology classes, for comparing length spectra.
//!
//! The graph has the mesh vertices plus evenly spaced points on every edge, with a straight
//! segment between any two points of a face. Homology is tracked with a tree-cotree cocycle
//! basis: every path carries a vector in Z^{2g}, and the shortest loop of class c is found by
//! Dijkstra on (point, partial class) from every point of the basis cycles.

use super::field::MetricField;
use super::mat2;
use super::mesh::SurfaceMesh;
use super::regge::edge_ends;
use crate::error::{LabError, Result};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

/// Homology class of the fundamental cycle of each edge, oriented along `edge_ends`.
pub fn edge_classes(mesh: &SurfaceMesh) -> Result<Vec<Vec<i32>>> {
    Ok(tree_cotree(mesh)?.0)
}

/// Edge classes, generator edges, and the tree edge towards the root at each vertex.
fn tree_cotree(mesh: &SurfaceMesh) -> Result<(Vec<Vec<i32>>, Vec<usize>, Vec<Option<usize>>)> {
    let n2g = 2 * mesh.genus;
    let ends = edge_ends(mesh);
    let ne = mesh.edge_count();
    let mut vert_edges = vec![Vec::new(); mesh.vertex_count];
    for (e, &(u, v)) in ends.iter().enumerate() {
        vert_edges[u].push(e);
        vert_edges[v].push(e);
    }
    let mut in_tree = vec![false; ne];
    let mut parent = vec![None; mesh.vertex_count];
    let mut seen = vec![false; mesh.vertex_count];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &e in &vert_edges[u] {
            let w = if ends[e].0 == u { ends[e].1 } else { ends[e].0 };
            if !seen[w] {
                seen[w] = true;
                in_tree[e] = true;
                parent[w] = Some(e);
                queue.push_back(w);
            }
        }
    }
    // dual tree through edges not in the primal tree
    let mut in_cotree = vec![false; ne];
    let mut fseen = vec![false; mesh.face_count()];
    let mut queue = VecDeque::from([0]);
    fseen[0] = true;
    while let Some(f) = queue.pop_front() {
        for k in 0..3 {
            let e = mesh.edge_of[f][k];
            let g = mesh.adjacency[f][k].0;
            if !in_tree[e] && !fseen[g] {
                fseen[g] = true;
                in_cotree[e] = true;
                queue.push_back(g);
            }
        }
    }
    let generators: Vec<usize> = (0..ne).filter(|&e| !in_tree[e] && !in_cotree[e]).collect();
    if generators.len() != n2g {
        return Err(LabError::Precondition(format!("tree-cotree left {} generators, expected {n2g}", generators.len())));
    }
    let mut z: Vec<Option<Vec<i32>>> = vec![None; ne];
    for e in 0..ne {
        if in_tree[e] {
            z[e] = Some(vec![0; n2g]);
        }
    }
    for (j, &e) in generators.iter().enumerate() {
        let mut v = vec![0; n2g];
        v[j] = 1;
        z[e] = Some(v);
    }
    let sign = |f: usize, k: usize| -> i32 {
        let e = mesh.edge_of[f][k];
        if ends[e].0 == mesh.faces[f][k] {
            1
        } else {
            -1
        }
    };
    // peel the dual tree from its leaves: each face boundary is null-homologous
    let mut unknown: Vec<usize> = (0..mesh.face_count()).map(|f| (0..3).filter(|&k| z[mesh.edge_of[f][k]].is_none()).count()).collect();
    let mut queue: VecDeque<usize> = (0..mesh.face_count()).filter(|&f| unknown[f] == 1).collect();
    while let Some(f) = queue.pop_front() {
        if unknown[f] != 1 {
            continue;
        }
        let k = (0..3).find(|&k| z[mesh.edge_of[f][k]].is_none()).unwrap();
        let mut acc = vec![0; n2g];
        for m in (0..3).filter(|&m| m != k) {
            let zm = z[mesh.edge_of[f][m]].as_ref().unwrap();
            for i in 0..n2g {
                acc[i] -= sign(f, m) * zm[i];
            }
        }
        let s = sign(f, k);
        let e = mesh.edge_of[f][k];
        z[e] = Some(acc.iter().map(|a| a * s).collect());
        unknown[f] = 0;
        for g in [mesh.edges[e].0, mesh.edges[e].2] {
            if g != f && unknown[g] > 0 {
                unknown[g] -= 1;
                if unknown[g] == 1 {
                    queue.push_back(g);
                }
            }
        }
    }
    let z = z
        .into_iter()
        .enumerate()
        .map(|(e, v)| v.ok_or_else(|| LabError::Precondition(format!("edge {e} left without a homology class"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((z, generators, parent))
}

/// Straight segment inside a face. Each point is snapped to the start vertex of its edge, and
/// `class` is the homology increment between the snapped ends.
struct Seg {
    face: usize,
    from: usize,
    to: usize,
    dpos: [f64; 2],
    class: Vec<i32>,
}

pub struct LoopGraph {
    pub genus: usize,
    pub point_count: usize,
    segs: Vec<Seg>,
    /// Points on the basis cycles; every non-trivial loop passes through one of them.
    starts: Vec<usize>,
}

impl LoopGraph {
    /// Graph with `steiner` interior points per edge.
    pub fn new(mesh: &SurfaceMesh, steiner: usize) -> Result<Self> {
        let (z, generators, parent) = tree_cotree(mesh)?;
        let n2g = 2 * mesh.genus;
        let ends = edge_ends(mesh);
        let nv = mesh.vertex_count;
        let point_on = |e: usize, i: usize| nv + e * steiner + i;
        let mut segs = Vec::new();
        for f in 0..mesh.face_count() {
            let c = &mesh.chart[f];
            let mut pot = vec![vec![0i32; n2g]; 3];
            for k in 0..2 {
                let e = mesh.edge_of[f][k];
                let s = if ends[e].0 == mesh.faces[f][k] { 1 } else { -1 };
                pot[k + 1] = pot[k].iter().zip(&z[e]).map(|(p, q)| p + s * q).collect();
            }
            let mut pts: Vec<(usize, [f64; 2], &Vec<i32>)> = (0..3).map(|k| (mesh.faces[f][k], c[k], &pot[k])).collect();
            for k in 0..3 {
                let e = mesh.edge_of[f][k];
                let (a, b) = if ends[e].0 == mesh.faces[f][k] { (k, (k + 1) % 3) } else { ((k + 1) % 3, k) };
                for i in 0..steiner {
                    let t = (i + 1) as f64 / (steiner + 1) as f64;
                    let p = [c[a][0] + t * (c[b][0] - c[a][0]), c[a][1] + t * (c[b][1] - c[a][1])];
                    pts.push((point_on(e, i), p, &pot[a]));
                }
            }
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    if i != j {
                        let (p, q) = (&pts[i], &pts[j]);
                        segs.push(Seg {
                            face: f,
                            from: p.0,
                            to: q.0,
                            dpos: [q.1[0] - p.1[0], q.1[1] - p.1[1]],
                            class: q.2.iter().zip(p.2).map(|(a, b)| a - b).collect(),
                        });
                    }
                }
            }
        }
        // basis cycles: each generator edge closed up through the tree
        let mut on_cycle = vec![false; mesh.edge_count()];
        for &g in &generators {
            on_cycle[g] = true;
            for mut v in [ends[g].0, ends[g].1] {
                while let Some(e) = parent[v] {
                    on_cycle[e] = true;
                    v = if ends[e].0 == v { ends[e].1 } else { ends[e].0 };
                }
            }
        }
        let mut mark = vec![false; nv + mesh.edge_count() * steiner];
        for e in (0..mesh.edge_count()).filter(|&e| on_cycle[e]) {
            mark[ends[e].0] = true;
            mark[ends[e].1] = true;
            for i in 0..steiner {
                mark[point_on(e, i)] = true;
            }
        }
        let starts = (0..mark.len()).filter(|&p| mark[p]).collect();
        Ok(LoopGraph { genus: mesh.genus, point_count: nv + mesh.edge_count() * steiner, segs, starts })
    }

    /// Shortest loop length in each requested class under metric g, tracking partial classes
    /// with entries in [−reach, reach].
    pub fn shortest(&self, g: &MetricField, classes: &[Vec<i32>], reach: i32) -> Vec<f64> {
        let n2g = 2 * self.genus;
        let side = (2 * reach + 1) as usize;
        let states: usize = side.pow(n2g as u32);
        let encode = |c: &[i32]| -> Option<usize> {
            let mut k = 0;
            for &v in c.iter().rev() {
                if v.abs() > reach {
                    return None;
                }
                k = k * side + (v + reach) as usize;
            }
            Some(k)
        };
        let decode = |mut k: usize| -> Vec<i32> {
            (0..n2g)
                .map(|_| {
                    let v = (k % side) as i32 - reach;
                    k /= side;
                    v
                })
                .collect()
        };
        let mut out_of = vec![Vec::new(); self.point_count];
        for s in &self.segs {
            let len = mat2::quad(&g.values[s.face], s.dpos).sqrt();
            out_of[s.from].push((s.to, len, &s.class));
        }
        let targets: Vec<Option<usize>> = classes.iter().map(|c| encode(c)).collect();
        let mut best = vec![f64::INFINITY; classes.len()];
        let zero = encode(&vec![0; n2g]).unwrap();
        let mut dist = vec![f64::INFINITY; self.point_count * states];
        let mut touched = Vec::new();
        for &s in &self.starts {
            for i in touched.drain(..) {
                dist[i] = f64::INFINITY;
            }
            let bound = best.iter().copied().fold(0.0f64, f64::max);
            let mut heap = BinaryHeap::new();
            dist[s * states + zero] = 0.0;
            touched.push(s * states + zero);
            heap.push(State(0.0, s, zero));
            while let Some(State(d, p, k)) = heap.pop() {
                if d > dist[p * states + k] {
                    continue;
                }
                if d > bound && best.iter().all(|b| b.is_finite()) {
                    break;
                }
                if p == s {
                    for (t, b) in targets.iter().zip(best.iter_mut()) {
                        if *t == Some(k) && d < *b {
                            *b = d;
                        }
                    }
                }
                let cls = decode(k);
                for &(q, len, dc) in &out_of[p] {
                    let nc: Vec<i32> = cls.iter().zip(dc).map(|(a, b)| a + b).collect();
                    let Some(nk) = encode(&nc) else { continue };
                    let nd = d + len;
                    let idx = q * states + nk;
                    if nd < dist[idx] {
                        if dist[idx].is_infinite() {
                            touched.push(idx);
                        }
                        dist[idx] = nd;
                        heap.push(State(nd, q, nk));
                    }
                }
            }
        }
        best
    }
}

/// The first `count` classes in {−1, 0, 1}^{2g} up to sign, in lexicographic order.
pub fn small_classes(genus: usize, count: usize) -> Vec<Vec<i32>> {
    let n2g = 2 * genus;
    let mut out = Vec::new();
    for k in 0..3usize.pow(n2g as u32) {
        let mut r = k;
        let c: Vec<i32> = (0..n2g)
            .map(|_| {
                let v = (r % 3) as i32 - 1;
                r /= 3;
                v
            })
            .collect();
        // keep the representative whose first non-zero entry is positive
        if let Some(first) = c.iter().find(|v| **v != 0) {
            if *first > 0 {
                out.push(c);
            }
        }
        if out.len() == count {
            break;
        }
    }
    out
}

#[derive(PartialEq)]
struct State(f64, usize, usize);

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.partial_cmp(&self.0).unwrap_or(Ordering::Equal)
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::build_bolza_mesh;

    #[test]
    fn face_boundaries_are_null_homologous() {
        let m = build_bolza_mesh(1).unwrap();
        let z = edge_classes(&m).unwrap();
        let ends = edge_ends(&m);
        for f in 0..m.face_count() {
            let mut acc = vec![0; 4];
            for k in 0..3 {
                let e = m.edge_of[f][k];
                let s = if ends[e].0 == m.faces[f][k] { 1 } else { -1 };
                for i in 0..4 {
                    acc[i] += s * z[e][i];
                }
            }
            assert_eq!(acc, vec![0; 4]);
        }
    }

    #[test]
    fn scaling_the_metric_scales_lengths() {
        let m = build_bolza_mesh(1).unwrap();
        let g = crate::wolf::hyperbolic_background(&m).unwrap();
        let lg = LoopGraph::new(&m, 1).unwrap();
        let cls = small_classes(2, 4);
        let a = lg.shortest(&g, &cls, 1);
        let b = lg.shortest(&g.scale(4.0), &cls, 1);
        for (x, y) in a.iter().zip(&b) {
            assert!(x.is_finite() && *x > 0.0);
            assert!((2.0 * x - y).abs() < 1e-12 * y);
        }
    }
}
