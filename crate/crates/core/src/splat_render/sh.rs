//! Real spherical harmonics up to degree 3 with the constants used by the
//! reference Gaussian splatting renderer.

use glam::DVec3;

use crate::gaussian::SH_LEN;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
pub const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
pub const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// The 16 basis functions at unit direction `d`.
pub fn basis(d: DVec3) -> [f64; 16] {
    let (x, y, z) = (d.x, d.y, d.z);
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    [
        SH_C0,
        -SH_C1 * y,
        SH_C1 * z,
        -SH_C1 * x,
        SH_C2[0] * xy,
        SH_C2[1] * yz,
        SH_C2[2] * (2.0 * zz - xx - yy),
        SH_C2[3] * xz,
        SH_C2[4] * (xx - yy),
        SH_C3[0] * y * (3.0 * xx - yy),
        SH_C3[1] * xy * z,
        SH_C3[2] * y * (4.0 * zz - xx - yy),
        SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy),
        SH_C3[4] * x * (4.0 * zz - xx - yy),
        SH_C3[5] * z * (xx - yy),
        SH_C3[6] * x * (xx - 3.0 * yy),
    ]
}

/// Color seen along `dir` (from the camera towards the Gaussian), clamped
/// below at zero. Coefficients are stored `sh[3 * i + channel]`.
pub fn evaluate_sh(coeffs: &[f32; SH_LEN], dir: DVec3) -> [f32; 3] {
    let b = basis(dir.normalize_or_zero());
    let mut c = [0.5f64; 3];
    for (i, bi) in b.iter().enumerate() {
        for (ch, out) in c.iter_mut().enumerate() {
            *out += coeffs[3 * i + ch] as f64 * bi;
        }
    }
    c.map(|v| v.max(0.0) as f32)
}
