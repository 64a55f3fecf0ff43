use image::{GrayImage, Luma, Rgb, RgbImage};

use super::{DepthMap, TriangleMesh};
use crate::error::Result;
use crate::geometry::{CameraIntrinsics, ResolvedScene, Vec3};

/// Mask value for target pixels.
pub const MASK_ON: u8 = 255;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSettings {
    /// Ambient light fraction in `[0, 1]`.
    pub ambient: f64,
    /// Fragments at or beyond this depth are discarded (meters).
    pub far_plane: f64,
    /// Geometry closer than this is clipped away (meters).
    pub near_plane: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            ambient: 0.08,
            far_plane: 1e6,
            near_plane: 1e-3,
        }
    }
}

/// Color, depth and segmentation rasters for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub color: RgbImage,
    /// Camera-frame z-depth in meters, `0.0` on background.
    pub depth: DepthMap,
    /// `255` on target pixels, `0` elsewhere.
    pub mask: GrayImage,
}

impl RenderOutput {
    pub fn width(&self) -> u32 {
        self.color.width()
    }

    pub fn height(&self) -> u32 {
        self.color.height()
    }
}

#[derive(Clone, Copy)]
struct ClipVertex {
    pos: Vec3,
    normal: Vec3,
}

fn lerp_vertex(a: &ClipVertex, b: &ClipVertex, t: f64) -> ClipVertex {
    ClipVertex {
        pos: a.pos.lerp(b.pos, t),
        normal: a.normal.lerp(b.normal, t),
    }
}

/// Clips a camera-frame triangle to `z <= -near`; returns 0, 3 or 4 vertices.
fn clip_near(tri: [ClipVertex; 3], near: f64, out: &mut Vec<ClipVertex>) {
    out.clear();
    let inside = |v: &ClipVertex| v.pos.z <= -near;
    for k in 0..3 {
        let cur = &tri[k];
        let next = &tri[(k + 1) % 3];
        let (ci, ni) = (inside(cur), inside(next));
        if ci {
            out.push(*cur);
        }
        if ci != ni {
            let t = (-near - cur.pos.z) / (next.pos.z - cur.pos.z);
            out.push(lerp_vertex(cur, next, t));
        }
    }
}

/// Rasterizes `mesh` as seen from the resolved camera.
///
/// Triangles are processed in index order with a strict less-than depth
/// test, so identical inputs always produce identical bytes.
pub fn render(
    mesh: &TriangleMesh,
    scene: &ResolvedScene,
    cam: &CameraIntrinsics,
    settings: &RenderSettings,
) -> Result<RenderOutput> {
    mesh.validate()?;
    cam.validate()?;
    let (w, h) = (cam.width_px, cam.height_px);
    let (wu, hu) = (w as usize, h as usize);
    let f = cam.focal_px();
    let (cx, cy) = cam.center();

    let to_cam = scene.target_orientation_camera();
    let offset = scene.world_to_camera(scene.target_position);
    let positions: Vec<Vec3> = mesh
        .vertices
        .iter()
        .map(|v| to_cam.rotate(*v) + offset)
        .collect();
    let normals: Vec<Vec3> = mesh.vertex_normals.iter().map(|n| to_cam.rotate(*n)).collect();
    let toward_light = -scene.sun_direction_camera();
    let ambient = settings.ambient;

    let mut zbuf = vec![f64::INFINITY; wu * hu];
    let mut color = RgbImage::new(w, h);
    let mut clipped = Vec::with_capacity(4);

    for (ti, tri) in mesh.triangles.iter().enumerate() {
        let albedo = mesh.triangle_albedo(ti);
        let corners = tri.map(|i| ClipVertex {
            pos: positions[i as usize],
            normal: normals[i as usize],
        });
        clip_near(corners, settings.near_plane, &mut clipped);
        if clipped.len() < 3 {
            continue;
        }
        // Screen-space vertices: (u, v, 1/z, normal).
        let screen: Vec<(f64, f64, f64, Vec3)> = clipped
            .iter()
            .map(|c| {
                let depth = -c.pos.z;
                (
                    cx + f * c.pos.x / depth,
                    cy - f * c.pos.y / depth,
                    1.0 / depth,
                    c.normal,
                )
            })
            .collect();
        for k in 1..screen.len() - 1 {
            let sub = [screen[0], screen[k], screen[k + 1]];
            raster_triangle(
                &sub,
                albedo,
                toward_light,
                ambient,
                settings.far_plane,
                (wu, hu, f, cx, cy),
                &mut zbuf,
                &mut color,
            );
        }
    }

    let mut depth = DepthMap::new(w, h);
    let mut mask = GrayImage::new(w, h);
    for (idx, z) in zbuf.iter().enumerate() {
        if z.is_finite() {
            depth.data[idx] = *z as f32;
            let (x, y) = ((idx % wu) as u32, (idx / wu) as u32);
            mask.put_pixel(x, y, Luma([MASK_ON]));
        }
    }
    Ok(RenderOutput { color, depth, mask })
}

#[allow(clippy::too_many_arguments)]
fn raster_triangle(
    v: &[(f64, f64, f64, Vec3); 3],
    albedo: [f64; 3],
    toward_light: Vec3,
    ambient: f64,
    far: f64,
    (wu, hu, f, cx, cy): (usize, usize, f64, f64, f64),
    zbuf: &mut [f64],
    color: &mut RgbImage,
) {
    let edge = |a: (f64, f64), b: (f64, f64), p: (f64, f64)| {
        (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
    };
    let p0 = (v[0].0, v[0].1);
    let p1 = (v[1].0, v[1].1);
    let p2 = (v[2].0, v[2].1);
    let area = edge(p0, p1, p2);
    if !area.is_finite() || area.abs() < 1e-12 {
        return;
    }
    let umin = p0.0.min(p1.0).min(p2.0);
    let umax = p0.0.max(p1.0).max(p2.0);
    let vmin = p0.1.min(p1.1).min(p2.1);
    let vmax = p0.1.max(p1.1).max(p2.1);
    let i0 = ((umin - 0.5).ceil().max(0.0)) as i64;
    let i1 = ((umax - 0.5).floor()).min(wu as f64 - 1.0) as i64;
    let j0 = ((vmin - 0.5).ceil().max(0.0)) as i64;
    let j1 = ((vmax - 0.5).floor()).min(hu as f64 - 1.0) as i64;
    if i0 > i1 || j0 > j1 {
        return;
    }
    for j in j0..=j1 {
        let py = j as f64 + 0.5;
        for i in i0..=i1 {
            let px = i as f64 + 0.5;
            let p = (px, py);
            let b0 = edge(p1, p2, p) / area;
            let b1 = edge(p2, p0, p) / area;
            let b2 = edge(p0, p1, p) / area;
            if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                continue;
            }
            let w0 = b0 * v[0].2;
            let w1 = b1 * v[1].2;
            let w2 = b2 * v[2].2;
            let inv_z = w0 + w1 + w2;
            if inv_z <= 0.0 {
                continue;
            }
            let depth = 1.0 / inv_z;
            if depth >= far {
                continue;
            }
            let idx = j as usize * wu + i as usize;
            if depth >= zbuf[idx] {
                continue;
            }
            zbuf[idx] = depth;

            let mut n = (v[0].3 * w0 + v[1].3 * w1 + v[2].3 * w2) / inv_z;
            n = n.try_normalize().unwrap_or(Vec3::Z);
            let point = Vec3::new((px - cx) / f * depth, -(py - cy) / f * depth, -depth);
            if n.dot(-point) < 0.0 {
                n = -n;
            }
            let intensity = ambient + (1.0 - ambient) * n.dot(toward_light).max(0.0);
            let quantize = |a: f64| (255.0 * (a * intensity).clamp(0.0, 1.0)).round() as u8;
            color.put_pixel(
                i as u32,
                j as u32,
                Rgb([quantize(albedo[0]), quantize(albedo[1]), quantize(albedo[2])]),
            );
        }
    }
}
