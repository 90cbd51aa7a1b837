use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::motion::Vec3;
use crate::{Error, Result};

/// Indexed triangle mesh in the object's canonical frame (meters).
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    normals: Vec<Vec3>,
    watertight: bool,
}

const DEGENERATE_AREA: f64 = 1e-14;

impl TriangleMesh {
    /// Builds a mesh, dropping zero-area triangles. Fails on out-of-range
    /// indices, non-finite vertices or when no triangle survives.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(v) = vertices
            .iter()
            .position(|v| !v.iter().all(|x| x.is_finite()))
        {
            return Err(Error::invalid(format!("vertex {v} is not finite")));
        }
        let mut kept = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        for (i, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&k| k >= vertices.len()) {
                return Err(Error::invalid(format!(
                    "triangle {i} references vertex out of range ({tri:?}, {} vertices)",
                    vertices.len()
                )));
            }
            let [a, b, c] = tri.map(|k| vertices[k]);
            let n = (b - a).cross(&(c - a));
            if n.norm() * 0.5 <= DEGENERATE_AREA {
                continue;
            }
            kept.push(*tri);
            normals.push(n.normalize());
        }
        if kept.is_empty() {
            return Err(Error::invalid("mesh has no non-degenerate triangles"));
        }
        let watertight = edges_closed(&kept);
        Ok(Self {
            vertices,
            triangles: kept,
            normals,
            watertight,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Unit face normals (right-handed winding).
    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    /// Every edge is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        self.triangles[i].map(|k| self.vertices[k])
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// The eight corners of the axis-aligned bounding box.
    pub fn bbox_corners(&self) -> [Vec3; 8] {
        let (lo, hi) = self.bounds();
        let mut out = [Vec3::zeros(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            *c = Vec3::new(
                if i & 1 == 0 { lo.x } else { hi.x },
                if i & 2 == 0 { lo.y } else { hi.y },
                if i & 4 == 0 { lo.z } else { hi.z },
            );
        }
        out
    }

    pub fn translated(&self, t: &Vec3) -> Self {
        let vertices = self.vertices.iter().map(|v| v + t).collect();
        Self {
            vertices,
            ..self.clone()
        }
    }

    /// Axis-aligned box centered at the origin with the given half extents.
    pub fn cuboid(half: Vec3) -> Result<Self> {
        let mut vertices = Vec::with_capacity(8);
        for i in 0..8 {
            vertices.push(Vec3::new(
                if i & 1 == 0 { -half.x } else { half.x },
                if i & 2 == 0 { -half.y } else { half.y },
                if i & 4 == 0 { -half.z } else { half.z },
            ));
        }
        // outward winding
        let triangles = vec![
            [0, 2, 1],
            [1, 2, 3], // -z
            [4, 5, 6],
            [5, 7, 6], // +z
            [0, 1, 4],
            [1, 5, 4], // -y
            [2, 6, 3],
            [3, 6, 7], // +y
            [0, 4, 2],
            [2, 4, 6], // -x
            [1, 3, 5],
            [3, 7, 5], // +x
        ];
        Self::new(vertices, triangles)
    }

    /// Icosahedron refined `subdivisions` times, vertices projected onto the
    /// sphere of the given radius.
    pub fn icosphere(radius: f64, subdivisions: usize) -> Result<Self> {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vec3> = [
            (-1.0, phi, 0.0),
            (1.0, phi, 0.0),
            (-1.0, -phi, 0.0),
            (1.0, -phi, 0.0),
            (0.0, -1.0, phi),
            (0.0, 1.0, phi),
            (0.0, -1.0, -phi),
            (0.0, 1.0, -phi),
            (phi, 0.0, -1.0),
            (phi, 0.0, 1.0),
            (-phi, 0.0, -1.0),
            (-phi, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
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
        for _ in 0..subdivisions {
            let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
            let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                    verts.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let ab = midpoint(a, b, &mut verts);
                let bc = midpoint(b, c, &mut verts);
                let ca = midpoint(c, a, &mut verts);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        let verts = verts.into_iter().map(|v| v * radius).collect();
        Self::new(verts, faces)
    }

    /// Parses Wavefront OBJ text. Only `v` and triangular `f` records are
    /// used; other record types are skipped with a warning.
    pub fn from_obj_str(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut skipped: Vec<String> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let tag = it.next().unwrap_or("");
            match tag {
                "v" => {
                    let vals: Vec<f64> = it
                        .take(3)
                        .map(|s| s.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| Error::format(format!("obj line {}: {e}", lineno + 1)))?;
                    if vals.len() != 3 {
                        return Err(Error::format(format!(
                            "obj line {}: vertex needs 3 coordinates",
                            lineno + 1
                        )));
                    }
                    vertices.push(Vec3::new(vals[0], vals[1], vals[2]));
                }
                "f" => {
                    let idx: Vec<usize> = it
                        .map(|tok| parse_obj_index(tok, vertices.len(), lineno + 1))
                        .collect::<Result<_>>()?;
                    if idx.len() != 3 {
                        return Err(Error::format(format!(
                            "obj line {}: only triangular faces are supported (got {} vertices)",
                            lineno + 1,
                            idx.len()
                        )));
                    }
                    triangles.push([idx[0], idx[1], idx[2]]);
                }
                other => {
                    if !skipped.iter().any(|s| s == other) {
                        skipped.push(other.to_string());
                    }
                }
            }
        }
        if !skipped.is_empty() {
            log::warn!("obj: ignored record types {skipped:?}");
        }
        if triangles.is_empty() {
            return Err(Error::invalid("obj contains no faces"));
        }
        Self::new(vertices, triangles)
    }

    pub fn load_obj(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_obj_str(&text).map_err(|e| Error::format(format!("{}: {e}", path.display())))
    }

    pub fn to_obj_string(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        s
    }
}

fn parse_obj_index(tok: &str, n_vertices: usize, lineno: usize) -> Result<usize> {
    let first = tok.split('/').next().unwrap_or("");
    let i: i64 = first
        .parse()
        .map_err(|_| Error::format(format!("obj line {lineno}: bad face index {tok:?}")))?;
    let resolved = if i > 0 { i - 1 } else { n_vertices as i64 + i };
    if i == 0 || resolved < 0 {
        return Err(Error::format(format!(
            "obj line {lineno}: face index {i} out of range"
        )));
    }
    Ok(resolved as usize)
}

fn edges_closed(triangles: &[[usize; 3]]) -> bool {
    let mut count: HashMap<(usize, usize), u32> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    count.values().all(|&c| c == 2)
}
