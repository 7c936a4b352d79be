#![no_main]

use libfuzzer_sys::fuzz_target;
use splatvm::scene_io::parse_ply;

fuzz_target!(|data: &[u8]| {
    if let Ok(gaussians) = parse_ply(data, f32::INFINITY) {
        for g in &gaussians {
            assert!(g.position.iter().all(|c| c.is_finite()));
            assert!(g.opacity >= 0.0 && g.opacity <= 1.0);
        }
        let cropped = parse_ply(data, 1.0).expect("crop cannot introduce errors");
        assert!(cropped.len() <= gaussians.len());
    }
});
