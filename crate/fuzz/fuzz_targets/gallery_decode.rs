#![no_main]

use libfuzzer_sys::fuzz_target;

// Anything that decodes must re-encode to the same bytes.
fuzz_target!(|data: &[u8]| {
    if let Ok(g) = hffd::Gallery::from_bytes(data) {
        assert_eq!(g.to_bytes().unwrap(), data);
    }
});
