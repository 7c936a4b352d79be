#![no_main]

use libfuzzer_sys::fuzz_target;
use splatvm::harness::decode_png;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_png(data) {
        assert_eq!(img.pixels.len(), img.width as usize * img.height as usize);
    }
});
