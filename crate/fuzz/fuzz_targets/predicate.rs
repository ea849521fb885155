#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(f) = reslab_core::predicate::Predicate::parse(s) {
            assert_eq!(reslab_core::predicate::Predicate::parse(&f.to_json()).unwrap(), f);
        }
    }
});
