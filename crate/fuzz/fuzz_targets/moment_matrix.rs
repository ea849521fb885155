#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(m) = reslab_core::moments::MomentMatrix::parse(s) {
            assert_eq!(reslab_core::moments::MomentMatrix::parse(&m.to_json()).unwrap(), m);
        }
    }
});
