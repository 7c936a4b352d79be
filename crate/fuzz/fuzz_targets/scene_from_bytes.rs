#![no_main]

use libfuzzer_sys::fuzz_target;
use splatvm::scene_io::SceneFile;

fuzz_target!(|data: &[u8]| {
    let Ok(scene) = SceneFile::from_bytes(data) else { return };
    // Compared as bytes: NaN payloads make field equality unreliable.
    let bytes = scene.to_bytes().expect("a decoded scene re-encodes");
    let again = SceneFile::from_bytes(&bytes).expect("re-encoded scene decodes");
    assert_eq!(again.to_bytes().unwrap(), bytes);
});
