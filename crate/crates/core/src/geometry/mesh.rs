use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{Vector3, Vector4};

use super::manifold::{Manifold, Point};
use crate::error::{GaugeError, Result};

/// Closed oriented triangulated surface; edges are oriented from lower to higher vertex index.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialComplex {
    surface: Manifold,
    vertices: Vec<Point>,
    edges: Vec<[usize; 2]>,
    faces: Vec<[usize; 3]>,
    face_edges: Vec<[(usize, f64); 3]>,
}

/// Unit icosphere; vertices of level l form a prefix of level l + 1.
pub(crate) fn icosphere(level: usize) -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let t = 0.5 * (1.0 + 5f64.sqrt());
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut verts: Vec<Vector3<f64>> = raw.iter().map(|v| Vector3::new(v[0], v[1], v[2]).normalize()).collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let ab = mid(f[0], f[1], &mut verts);
            let bc = mid(f[1], f[2], &mut verts);
            let ca = mid(f[2], f[0], &mut verts);
            next.push([f[0], ab, ca]);
            next.push([f[1], bc, ab]);
            next.push([f[2], ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    for f in faces.iter_mut() {
        let (a, b, c) = (verts[f[0]], verts[f[1]], verts[f[2]]);
        if (b - a).cross(&(c - a)).dot(&a) < 0.0 {
            f.swap(1, 2);
        }
    }
    (verts, faces)
}

impl SimplicialComplex {
    pub fn build(m: &Manifold, level: usize) -> Result<Self> {
        match m {
            Manifold::RoundSphere2 { radius } => {
                let (v, f) = icosphere(level);
                let verts = v.iter().map(|p| Vector4::new(p[0], p[1], p[2], 0.0) * *radius).collect();
                SimplicialComplex::from_faces(m.clone(), verts, f)
            }
            Manifold::FlatTorus2 { periods } => {
                let n = 4 * (1usize << level);
                let idx = |i: usize, j: usize| (i % n) * n + (j % n);
                let mut verts = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        verts.push(Vector4::new(
                            periods[0] * i as f64 / n as f64,
                            periods[1] * j as f64 / n as f64,
                            0.0,
                            0.0,
                        ));
                    }
                }
                let mut faces = Vec::with_capacity(2 * n * n);
                for i in 0..n {
                    for j in 0..n {
                        let a = idx(i, j);
                        let b = idx(i + 1, j);
                        let c = idx(i + 1, j + 1);
                        let d = idx(i, j + 1);
                        faces.push([a, b, c]);
                        faces.push([a, c, d]);
                    }
                }
                SimplicialComplex::from_faces(m.clone(), verts, faces)
            }
            other => Err(GaugeError::UnsupportedGeometry(format!("triangulating {}", other.name()))),
        }
    }

    /// Assembles edges and checks that every edge borders exactly two faces with
    /// opposite induced orientations.
    pub fn from_faces(surface: Manifold, vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut uses: Vec<(u32, u32)> = Vec::new();
        let mut face_edges = Vec::with_capacity(faces.len());
        for f in &faces {
            if f.iter().any(|&v| v >= nv) || f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(GaugeError::InvalidComplex(format!("bad face {f:?}")));
            }
            let mut fe = [(0usize, 0.0f64); 3];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let e = *index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    uses.push((0, 0));
                    edges.len() - 1
                });
                let sign = if a < b { 1.0 } else { -1.0 };
                if sign > 0.0 {
                    uses[e].0 += 1;
                } else {
                    uses[e].1 += 1;
                }
                fe[k] = (e, sign);
            }
            face_edges.push(fe);
        }
        for (e, u) in uses.iter().enumerate() {
            if *u != (1, 1) {
                return Err(GaugeError::InvalidComplex(format!(
                    "edge {:?} is not shared by two consistently oriented faces",
                    edges[e]
                )));
            }
        }
        Ok(SimplicialComplex { surface, vertices, edges, faces, face_edges })
    }

    pub fn surface(&self) -> &Manifold {
        &self.surface
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Boundary edges of each face with their orientation signs.
    pub fn face_edges(&self) -> &[[(usize, f64); 3]] {
        &self.face_edges
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    pub fn connected_components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let a = find(&mut parent, e[0]);
            let b = find(&mut parent, e[1]);
            if a != b {
                parent[a] = b;
            }
        }
        (0..self.vertices.len()).filter(|&v| find(&mut parent, v) == v).count()
    }

    /// b1 = 2 b0 - chi for a closed orientable surface.
    pub fn first_betti(&self) -> usize {
        (2 * self.connected_components() as i64 - self.euler_characteristic()).max(0) as usize
    }

    /// Minimal-image vector from the tail to the head of an edge.
    pub fn edge_vector(&self, e: usize) -> Point {
        let [a, b] = self.edges[e];
        self.surface.wrapped_delta(&self.vertices[a], &self.vertices[b])
    }

    /// Face corners unwrapped around the first vertex.
    pub fn face_positions(&self, f: usize) -> [Point; 3] {
        let [a, b, c] = self.faces[f];
        let p = self.vertices[a];
        [
            p,
            p + self.surface.wrapped_delta(&p, &self.vertices[b]),
            p + self.surface.wrapped_delta(&p, &self.vertices[c]),
        ]
    }

    /// Integer coboundary d0 (edges x vertices) as a dense row list.
    pub fn d0_rows(&self) -> Vec<[(usize, i32); 2]> {
        self.edges.iter().map(|e| [(e[0], -1), (e[1], 1)]).collect()
    }

    /// Integer coboundary d1 (faces x edges).
    pub fn d1_rows(&self) -> Vec<[(usize, i32); 3]> {
        self.face_edges
            .iter()
            .map(|fe| [(fe[0].0, fe[0].1 as i32), (fe[1].0, fe[1].1 as i32), (fe[2].0, fe[2].1 as i32)])
            .collect()
    }

    pub fn to_off(&self) -> String {
        let mut s = String::from("OFF\n");
        let _ = writeln!(s, "{} {} {}", self.vertices.len(), self.faces.len(), self.edges.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", v[0], v[1], v[2]);
        }
        for f in &self.faces {
            let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
        }
        s
    }

    pub fn from_off(text: &str, surface: Manifold) -> Result<Self> {
        let bad = |msg: &str| GaugeError::InvalidComplex(format!("OFF: {msg}"));
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split_whitespace())
            .peekable();
        if tokens.peek() == Some(&"OFF") {
            tokens.next();
        }
        let mut num = |what: &str| -> Result<f64> {
            tokens
                .next()
                .ok_or_else(|| bad(&format!("missing {what}")))?
                .parse::<f64>()
                .map_err(|_| bad(&format!("bad {what}")))
        };
        let nv = num("vertex count")? as usize;
        let nf = num("face count")? as usize;
        let _ne = num("edge count")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            vertices.push(Vector4::new(num("x")?, num("y")?, num("z")?, 0.0));
        }
        let mut faces = Vec::with_capacity(nf);
        for _ in 0..nf {
            if num("face arity")? as usize != 3 {
                return Err(bad("only triangles are supported"));
            }
            faces.push([num("index")? as usize, num("index")? as usize, num("index")? as usize]);
        }
        SimplicialComplex::from_faces(surface, vertices, faces)
    }
}
