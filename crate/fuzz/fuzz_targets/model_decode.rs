#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = hffd::LdaModel::from_bytes(data) {
        let again = hffd::LdaModel::from_bytes(&m.to_bytes().unwrap()).unwrap();
        assert_eq!(m.w.shape(), again.w.shape());
        let _ = m.project(&vec![0.5; m.input_dim()]);
    }
});
