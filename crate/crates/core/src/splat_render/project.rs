use glam::{DMat3, DVec3};

use super::camera::Camera;
use super::sh::evaluate_sh;
use crate::gaussian::Gaussian;

/// Variance in px² added to every projected covariance.
pub const LOW_PASS: f64 = 0.3;
/// Splats are rasterized over their 3σ box.
pub const EXTENT_SIGMAS: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Splat {
    pub center: [f64; 2],
    /// Inverse 2D covariance as `(xx, xy, yy)`.
    pub conic: [f64; 3],
    /// Pixel bounds `[x0, y0, x1, y1)` clipped to the image.
    pub bounds: [u32; 4],
    pub color: [f32; 3],
    pub alpha: f32,
}

/// Jacobian of the perspective projection at view-space point `t`.
fn projection_jacobian(cam: &Camera, t: DVec3) -> [[f64; 3]; 2] {
    let (fx, fy) = cam.focal();
    [
        [fx / t.z, 0.0, -fx * t.x / (t.z * t.z)],
        [0.0, fy / t.z, -fy * t.y / (t.z * t.z)],
    ]
}

/// Image-plane covariance `J W Σ Wᵀ Jᵀ` before the low-pass term, or
/// `None` behind the near plane.
pub fn projected_covariance(g: &Gaussian, cam: &Camera) -> Option<[[f64; 2]; 2]> {
    let t = cam.to_view(g.position());
    if t.z <= cam.near {
        return None;
    }
    let w = cam.view_rotation();
    let sigma: DMat3 = w * g.covariance() * w.transpose();
    let j = projection_jacobian(cam, t);
    let mut out = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            let mut s = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    s += j[r][a] * sigma.col(b)[a] * j[c][b];
                }
            }
            out[r][c] = s;
        }
    }
    Some(out)
}

/// Projects a Gaussian to a screen-space splat; `None` when it is padding,
/// behind the near plane, degenerate or entirely off screen.
pub fn project_gaussian(g: &Gaussian, cam: &Camera) -> Option<Splat> {
    if g.is_padding() || g.opacity <= 0.0 {
        return None;
    }
    let cov = projected_covariance(g, cam)?;
    let (a, b, c) = (cov[0][0] + LOW_PASS, cov[0][1], cov[1][1] + LOW_PASS);
    let det = a * c - b * b;
    if !(det >= 1e-12) || !det.is_finite() {
        return None;
    }
    let conic = [c / det, -b / det, a / det];
    let center = cam.project_view(cam.to_view(g.position()));
    let (rx, ry) = (EXTENT_SIGMAS * a.sqrt(), EXTENT_SIGMAS * c.sqrt());
    let clip = |v: f64, hi: u32| v.clamp(0.0, hi as f64) as u32;
    let x0 = clip((center[0] - rx).floor(), cam.width);
    let x1 = clip((center[0] + rx).ceil(), cam.width);
    let y0 = clip((center[1] - ry).floor(), cam.height);
    let y1 = clip((center[1] + ry).ceil(), cam.height);
    if x0 >= x1 || y0 >= y1 {
        return None;
    }
    Some(Splat {
        center,
        conic,
        bounds: [x0, y0, x1, y1],
        color: evaluate_sh(&g.sh, g.position() - cam.position),
        alpha: g.opacity,
    })
}
