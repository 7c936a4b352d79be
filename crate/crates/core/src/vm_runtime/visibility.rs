use glam::DVec3;
use rayon::prelude::*;

use crate::proxy_mesh::ProxyMesh;
use crate::splat_render::Camera;

/// Page ID and view depth of the nearest proxy-mesh face per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct VisibilityBuffer {
    pub width: u32,
    pub height: u32,
    /// 0 where no assigned face is visible.
    pub page: Vec<u32>,
    /// View-space depth; infinite where nothing was drawn.
    pub depth: Vec<f32>,
}

impl VisibilityBuffer {
    pub fn page_at(&self, x: u32, y: u32) -> u32 {
        self.page[(y * self.width + x) as usize]
    }
}

const BAND: u32 = 8;

/// Screen-space triangle: pixel coordinates plus inverse depth per vertex.
#[derive(Clone, Copy)]
struct ScreenTri {
    p: [[f64; 2]; 3],
    inv_z: [f64; 3],
    page: u32,
}

/// Clips a view-space triangle against `z = near`; returns 0, 3 or 4 points.
fn clip_near(v: [DVec3; 3], near: f64) -> Vec<DVec3> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let (a, b) = (v[i], v[(i + 1) % 3]);
        let (ina, inb) = (a.z >= near, b.z >= near);
        if ina {
            out.push(a);
        }
        if ina != inb {
            let t = (near - a.z) / (b.z - a.z);
            out.push(a + (b - a) * t);
        }
    }
    out
}

fn screen_triangles(mesh: &ProxyMesh, cam: &Camera) -> Vec<ScreenTri> {
    let mut tris = Vec::new();
    for f in 0..mesh.faces.len() {
        let view = mesh.triangle(f).map(|p| cam.to_view(p));
        let poly = clip_near(view, cam.near);
        for k in 1..poly.len().saturating_sub(1) {
            let pts = [poly[0], poly[k], poly[k + 1]];
            tris.push(ScreenTri {
                p: pts.map(|t| cam.project_view(t)),
                inv_z: pts.map(|t| 1.0 / t.z),
                page: mesh.face_page[f],
            });
        }
    }
    tris
}

fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Rasterizes the proxy mesh with a depth test at pixel centers. Faces are
/// drawn in index order and a later face must be strictly nearer to win, so
/// the result is deterministic. Both windings are drawn.
pub fn render_visibility(mesh: &ProxyMesh, cam: &Camera) -> VisibilityBuffer {
    let (w, h) = (cam.width, cam.height);
    let tris = screen_triangles(mesh, cam);
    let bands: Vec<(Vec<u32>, Vec<f32>)> = (0..h.div_ceil(BAND))
        .into_par_iter()
        .map(|band| {
            let y0 = band * BAND;
            let y1 = (y0 + BAND).min(h);
            let n = ((y1 - y0) * w) as usize;
            let mut page = vec![0u32; n];
            let mut depth = vec![f32::INFINITY; n];
            let mut zbuf = vec![f64::INFINITY; n];
            for t in &tris {
                let area = edge(t.p[0], t.p[1], t.p[2]);
                if area == 0.0 || !area.is_finite() {
                    continue;
                }
                let lo_y = t.p.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
                let hi_y = t.p.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
                let lo_x = t.p.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
                let hi_x = t.p.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
                let ys = ((lo_y - 0.5).ceil().max(y0 as f64)) as u32;
                let ye = ((hi_y - 0.5).floor().min(y1 as f64 - 1.0) + 1.0).max(ys as f64) as u32;
                let xs = ((lo_x - 0.5).ceil().max(0.0)) as u32;
                let xe = ((hi_x - 0.5).floor().min(w as f64 - 1.0) + 1.0).max(xs as f64) as u32;
                for y in ys..ye {
                    for x in xs..xe {
                        let p = [x as f64 + 0.5, y as f64 + 0.5];
                        let b0 = edge(t.p[1], t.p[2], p) / area;
                        let b1 = edge(t.p[2], t.p[0], p) / area;
                        let b2 = edge(t.p[0], t.p[1], p) / area;
                        if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                            continue;
                        }
                        let inv_z = b0 * t.inv_z[0] + b1 * t.inv_z[1] + b2 * t.inv_z[2];
                        let z = 1.0 / inv_z;
                        let i = ((y - y0) * w + x) as usize;
                        if z < zbuf[i] {
                            zbuf[i] = z;
                            depth[i] = z as f32;
                            page[i] = t.page;
                        }
                    }
                }
            }
            (page, depth)
        })
        .collect();
    let mut page = Vec::with_capacity((w * h) as usize);
    let mut depth = Vec::with_capacity((w * h) as usize);
    for (p, d) in bands {
        page.extend(p);
        depth.extend(d);
    }
    VisibilityBuffer { width: w, height: h, page, depth }
}
