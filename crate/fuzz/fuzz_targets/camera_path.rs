#![no_main]

use libfuzzer_sys::fuzz_target;
use splatvm::harness::CameraPath;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(path) = CameraPath::parse(text) else { return };
    let first = path.pose_at(0.0);
    assert_eq!(first, path.checkpoints[0]);
    let end = path.pose_at(path.duration());
    assert!(end.position.is_finite());
});
