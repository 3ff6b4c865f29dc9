//! Text mesh files and JSON field files.
//!
//! Mesh files may end with an `adjacency` line followed by one `f0 e0 f1 e1` line per
//! edge; without it adjacency is rebuilt from vertex pairs, which fails on multi-edges.

use super::field::{MetricField, OperatorField, ScalarField};
use super::mat2;
use super::mesh::SurfaceMesh;
use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

pub fn write_mesh(mesh: &SurfaceMesh) -> String {
    let mut s = String::new();
    writeln!(s, "glmesh 1").unwrap();
    writeln!(s, "{} {} {} {}", mesh.vertex_count, mesh.edge_count(), mesh.face_count(), mesh.genus).unwrap();
    for (t, l) in mesh.faces.iter().zip(&mesh.edge_lengths) {
        writeln!(s, "{} {} {} {:e} {:e} {:e}", t[0], t[1], t[2], l[0], l[1], l[2]).unwrap();
    }
    writeln!(s, "adjacency").unwrap();
    for &(f, k, g, m) in &mesh.edges {
        writeln!(s, "{f} {k} {g} {m}").unwrap();
    }
    s
}

fn perr(line: usize, msg: impl Into<String>) -> LabError {
    LabError::Parse { line, msg: msg.into() }
}

fn nums<T: std::str::FromStr>(line: usize, s: &str, n: usize) -> Result<Vec<T>> {
    let v: Vec<T> = s
        .split_whitespace()
        .map(|w| w.parse::<T>().map_err(|_| perr(line, format!("bad number `{w}`"))))
        .collect::<Result<_>>()?;
    if v.len() != n {
        return Err(perr(line, format!("expected {n} fields, found {}", v.len())));
    }
    Ok(v)
}

pub fn read_mesh(text: &str) -> Result<SurfaceMesh> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (ln, head) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
    if head != "glmesh 1" {
        return Err(perr(ln, "expected header `glmesh 1`"));
    }
    let (ln, counts) = lines.next().ok_or_else(|| perr(ln + 1, "missing counts line"))?;
    let c: Vec<usize> = nums(ln, counts, 4)?;
    let (nv, ne, nf, genus) = (c[0], c[1], c[2], c[3]);
    let mut faces = Vec::with_capacity(nf);
    let mut lengths = Vec::with_capacity(nf);
    let mut last = ln;
    for _ in 0..nf {
        let (ln, l) = lines.next().ok_or_else(|| perr(last + 1, "missing face line"))?;
        last = ln;
        let w: Vec<&str> = l.split_whitespace().collect();
        if w.len() != 6 {
            return Err(perr(ln, format!("expected 6 fields, found {}", w.len())));
        }
        let t: Vec<usize> = nums(ln, &w[..3].join(" "), 3)?;
        let x: Vec<f64> = nums(ln, &w[3..].join(" "), 3)?;
        if t.iter().any(|&v| v >= nv) {
            return Err(perr(ln, "vertex index out of range"));
        }
        faces.push([t[0], t[1], t[2]]);
        lengths.push([x[0], x[1], x[2]]);
    }
    let adjacency = match lines.next() {
        Some((ln, "adjacency")) => {
            let mut adj = vec![[(usize::MAX, 0); 3]; nf];
            let mut last = ln;
            for _ in 0..ne {
                let (ln, l) = lines.next().ok_or_else(|| perr(last + 1, "missing adjacency line"))?;
                last = ln;
                let a: Vec<usize> = nums(ln, l, 4)?;
                if a[0] >= nf || a[2] >= nf || a[1] > 2 || a[3] > 2 {
                    return Err(perr(ln, "adjacency index out of range"));
                }
                adj[a[0]][a[1]] = (a[2], a[3]);
                adj[a[2]][a[3]] = (a[0], a[1]);
            }
            if adj.iter().flatten().any(|x| x.0 == usize::MAX) {
                return Err(perr(last, "adjacency block leaves edges unmatched"));
            }
            adj
        }
        Some((ln, _)) => return Err(perr(ln, "unexpected trailing content")),
        None => SurfaceMesh::adjacency_from_pairs(&faces)?,
    };
    let mesh = SurfaceMesh::assemble(nv, faces, lengths, adjacency, None)?;
    if mesh.edge_count() != ne || mesh.genus != genus {
        return Err(perr(2, format!("counts disagree with faces: E={} g={}", mesh.edge_count(), mesh.genus)));
    }
    Ok(mesh)
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(tag = "kind", content = "values", rename_all = "lowercase")]
pub enum FieldFile {
    Scalar(Vec<f64>),
    Metric(Vec<[f64; 3]>),
    Operator(Vec<[f64; 4]>),
    Quaddiff(Vec<[f64; 2]>),
}

impl FieldFile {
    pub fn from_metric(g: &MetricField) -> Self {
        FieldFile::Metric(g.values.iter().map(|m| [m[(0, 0)], m[(0, 1)], m[(1, 1)]]).collect())
    }

    pub fn from_operator(a: &OperatorField) -> Self {
        FieldFile::Operator(a.values.iter().map(|m| [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]).collect())
    }

    pub fn from_scalar(s: &ScalarField) -> Self {
        FieldFile::Scalar(s.values.clone())
    }

    pub fn into_metric(self) -> Result<MetricField> {
        match self {
            FieldFile::Metric(v) => MetricField::new(v.into_iter().map(|x| mat2::sym(x[0], x[1], x[2])).collect()),
            _ => Err(LabError::Precondition("expected a metric field".into())),
        }
    }

    pub fn into_scalar(self) -> Result<ScalarField> {
        match self {
            FieldFile::Scalar(values) => Ok(ScalarField { values }),
            _ => Err(LabError::Precondition("expected a scalar field".into())),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("field serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::build_bolza_mesh;

    #[test]
    fn mesh_text_round_trip() {
        let m = build_bolza_mesh(1).unwrap();
        let back = read_mesh(&write_mesh(&m)).unwrap();
        assert_eq!(back.faces, m.faces);
        assert_eq!(back.adjacency, m.adjacency);
        for (a, b) in back.edge_lengths.iter().zip(&m.edge_lengths) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() <= 1e-15 * b[k]);
            }
        }
    }

    #[test]
    fn base_mesh_needs_adjacency_block() {
        let m = build_bolza_mesh(0).unwrap();
        let text = write_mesh(&m);
        let cut = text.split("adjacency").next().unwrap();
        assert!(read_mesh(cut).is_err());
        assert!(read_mesh(&text).is_ok());
    }

    #[test]
    fn refined_mesh_rebuilds_adjacency() {
        let m = build_bolza_mesh(1).unwrap();
        let text = write_mesh(&m);
        let cut = text.split("adjacency").next().unwrap();
        assert_eq!(read_mesh(cut).unwrap().adjacency, m.adjacency);
    }

    #[test]
    fn malformed_line_is_reported() {
        let err = read_mesh("glmesh 1\n6 24 16 2\n0 1 x 1 1 1\n").unwrap_err();
        assert!(matches!(err, LabError::Parse { line: 3, .. }));
    }

    #[test]
    fn field_json_is_lossless() {
        let f = FieldFile::Scalar(vec![0.1, 1.0 / 3.0, -2e-300]);
        assert_eq!(FieldFile::from_json(&f.to_json()).unwrap(), f);
        let q = FieldFile::Quaddiff(vec![[0.5, -0.25]]);
        assert!(q.to_json().contains("\"kind\":\"quaddiff\""));
    }
}
