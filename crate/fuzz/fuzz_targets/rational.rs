#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(x) = reslab_core::rational::parse_q(s) {
            assert_eq!(reslab_core::rational::parse_q(&reslab_core::rational::fmt_q(&x)).unwrap(), x);
        }
    }
});
