use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Indexed triangle mesh in the target's model frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// One unit normal per vertex.
    pub vertex_normals: Vec<Vec3>,
    /// Uniform RGB albedo in `[0, 1]³`.
    pub albedo: [f64; 3],
    /// Optional per-triangle albedo override.
    pub face_albedo: Option<Vec<[f64; 3]>>,
}

impl TriangleMesh {
    pub fn validate(&self) -> Result<()> {
        if self.triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        if self.vertex_normals.len() != self.vertices.len() {
            return Err(Error::InvalidParameter(format!(
                "{} normals for {} vertices",
                self.vertex_normals.len(),
                self.vertices.len()
            )));
        }
        let n = self.vertices.len() as u32;
        if let Some(t) = self.triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::InvalidParameter(format!(
                "triangle {t:?} indexes past {n} vertices"
            )));
        }
        if let Some(v) = self.vertices.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite vertex {v:?}")));
        }
        if let Some(nrm) = self
            .vertex_normals
            .iter()
            .find(|nrm| (nrm.norm() - 1.0).abs() > 1e-6)
        {
            return Err(Error::InvalidParameter(format!("normal {nrm:?} is not unit length")));
        }
        let in_unit = |c: &[f64; 3]| c.iter().all(|x| (0.0..=1.0).contains(x));
        if !in_unit(&self.albedo) {
            return Err(Error::InvalidParameter(format!("albedo {:?}", self.albedo)));
        }
        if let Some(fa) = &self.face_albedo {
            if fa.len() != self.triangles.len() || !fa.iter().all(in_unit) {
                return Err(Error::InvalidParameter("per-face albedo override".into()));
            }
        }
        Ok(())
    }

    pub fn triangle_albedo(&self, tri: usize) -> [f64; 3] {
        self.face_albedo
            .as_ref()
            .map(|fa| fa[tri])
            .unwrap_or(self.albedo)
    }

    pub fn with_albedo(mut self, albedo: [f64; 3]) -> Self {
        self.albedo = albedo;
        self
    }

    /// Axis-aligned box spanning `min..max` with flat per-face normals (24 vertices, 12 triangles).
    pub fn cuboid(min: Vec3, max: Vec3) -> Self {
        let c = |x: bool, y: bool, z: bool| {
            Vec3::new(
                if x { max.x } else { min.x },
                if y { max.y } else { min.y },
                if z { max.z } else { min.z },
            )
        };
        // Each face listed counter-clockwise seen from outside.
        let faces: [(Vec3, [Vec3; 4]); 6] = [
            (Vec3::X, [c(true, false, false), c(true, true, false), c(true, true, true), c(true, false, true)]),
            (-Vec3::X, [c(false, false, false), c(false, false, true), c(false, true, true), c(false, true, false)]),
            (Vec3::Y, [c(false, true, false), c(false, true, true), c(true, true, true), c(true, true, false)]),
            (-Vec3::Y, [c(false, false, false), c(true, false, false), c(true, false, true), c(false, false, true)]),
            (Vec3::Z, [c(false, false, true), c(true, false, true), c(true, true, true), c(false, true, true)]),
            (-Vec3::Z, [c(false, false, false), c(false, true, false), c(true, true, false), c(true, false, false)]),
        ];
        let mut mesh = TriangleMesh {
            vertices: Vec::with_capacity(24),
            triangles: Vec::with_capacity(12),
            vertex_normals: Vec::with_capacity(24),
            albedo: [0.8, 0.8, 0.8],
            face_albedo: None,
        };
        for (normal, quad) in faces {
            let base = mesh.vertices.len() as u32;
            mesh.vertices.extend(quad);
            mesh.vertex_normals.extend([normal; 4]);
            mesh.triangles.push([base, base + 1, base + 2]);
            mesh.triangles.push([base, base + 2, base + 3]);
        }
        mesh
    }

    /// Flat rectangle in the model XY plane, centered on the origin, facing +Z.
    pub fn plate(width: f64, height: f64) -> Self {
        let (hw, hh) = (width / 2.0, height / 2.0);
        TriangleMesh {
            vertices: vec![
                Vec3::new(-hw, -hh, 0.0),
                Vec3::new(hw, -hh, 0.0),
                Vec3::new(hw, hh, 0.0),
                Vec3::new(-hw, hh, 0.0),
            ],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
            vertex_normals: vec![Vec3::Z; 4],
            albedo: [0.8, 0.8, 0.8],
            face_albedo: None,
        }
    }
}

/// Loads a Wavefront OBJ file (`v`, `vn`, `f` statements; polygons are fan-split).
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading mesh {}", path.display()), e))?;
    parse_obj(&text, &path.display().to_string())
}

/// Parses OBJ text. `source` names the input in error messages.
pub fn parse_obj(text: &str, source: &str) -> Result<TriangleMesh> {
    let err = |line: usize, message: String| Error::MeshParse {
        path: source.to_string(),
        line,
        message,
    };

    let mut positions: Vec<Vec3> = Vec::new();
    let mut normals: Vec<Vec3> = Vec::new();
    // Corners as (position index, optional normal index), already zero-based.
    let mut faces: Vec<[(usize, Option<usize>); 3]> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let keyword = parts.next().unwrap_or("");
        match keyword {
            "v" | "vn" => {
                let nums: Vec<f64> = parts
                    .map(|p| p.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| err(lineno, format!("bad number in '{line}': {e}")))?;
                if nums.len() < 3 || (keyword == "vn" && nums.len() != 3) || nums.len() > 4 {
                    return Err(err(lineno, format!("expected 3 coordinates in '{line}'")));
                }
                let v = Vec3::new(nums[0], nums[1], nums[2]);
                if !v.is_finite() {
                    return Err(err(lineno, format!("non-finite coordinate in '{line}'")));
                }
                if keyword == "v" {
                    positions.push(v);
                } else {
                    let n = v
                        .try_normalize()
                        .ok_or_else(|| err(lineno, "zero-length normal".into()))?;
                    normals.push(n);
                }
            }
            "f" => {
                let corners = parts
                    .map(|c| parse_corner(c, positions.len(), normals.len()))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|m| err(lineno, m))?;
                if corners.len() < 3 {
                    return Err(err(lineno, "face needs at least 3 vertices".into()));
                }
                for k in 1..corners.len() - 1 {
                    faces.push([corners[0], corners[k], corners[k + 1]]);
                }
            }
            "vt" | "vp" | "o" | "g" | "s" | "usemtl" | "mtllib" | "l" => {}
            other => return Err(err(lineno, format!("unsupported statement '{other}'"))),
        }
    }

    if faces.is_empty() {
        return Err(Error::EmptyMesh);
    }

    // Face normals for corners without an explicit vn.
    let mut accum: Vec<Vec3> = vec![Vec3::ZERO; positions.len()];
    for f in &faces {
        let [a, b, c] = f.map(|(p, _)| positions[p]);
        let n = (b - a).cross(c - a);
        for (p, _) in f {
            accum[*p] += n;
        }
    }

    let mut mesh = TriangleMesh {
        vertices: Vec::new(),
        triangles: Vec::with_capacity(faces.len()),
        vertex_normals: Vec::new(),
        albedo: [0.8, 0.8, 0.8],
        face_albedo: None,
    };
    let mut remap: HashMap<(usize, Option<usize>), u32> = HashMap::new();
    for f in &faces {
        let tri = f.map(|corner| {
            *remap.entry(corner).or_insert_with(|| {
                let (p, n) = corner;
                mesh.vertices.push(positions[p]);
                let normal = match n {
                    Some(n) => normals[n],
                    None => accum[p].try_normalize().unwrap_or(Vec3::Z),
                };
                mesh.vertex_normals.push(normal);
                (mesh.vertices.len() - 1) as u32
            })
        });
        mesh.triangles.push(tri);
    }
    mesh.validate()?;
    Ok(mesh)
}

fn parse_corner(
    token: &str,
    n_pos: usize,
    n_norm: usize,
) -> std::result::Result<(usize, Option<usize>), String> {
    let mut fields = token.split('/');
    let v = fields.next().unwrap_or("");
    let _vt = fields.next();
    let vn = fields.next().filter(|s| !s.is_empty());
    let p = resolve_index(v, n_pos).map_err(|m| format!("vertex index in '{token}': {m}"))?;
    let n = vn
        .map(|s| resolve_index(s, n_norm))
        .transpose()
        .map_err(|m| format!("normal index in '{token}': {m}"))?;
    Ok((p, n))
}

fn resolve_index(s: &str, count: usize) -> std::result::Result<usize, String> {
    let i: i64 = s.parse().map_err(|_| format!("'{s}' is not an integer"))?;
    let idx = match i {
        0 => return Err("index 0 is invalid (OBJ indices are 1-based)".into()),
        i if i > 0 => i - 1,
        i => count as i64 + i,
    };
    if idx < 0 || idx as usize >= count {
        return Err(format!("index {i} out of range (have {count})"));
    }
    Ok(idx as usize)
}
