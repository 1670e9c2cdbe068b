#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = hffd::dataset::decode_image(data) {
        assert_eq!(img.data.len(), img.width * img.height);
        assert!(img.data.iter().all(|v| (0.0..=1.0).contains(v)));
        if img.width * img.height <= 1 << 16 {
            let small = img.resize(16, 16);
            assert!(small.data.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
});
