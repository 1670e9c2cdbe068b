#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = hffd::dataset::decode_pgm(data) {
        assert_eq!(img.data.len(), img.width * img.height);
        assert!(img.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }
});
