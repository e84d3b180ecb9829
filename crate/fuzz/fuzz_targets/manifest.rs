#![no_main]

use libfuzzer_sys::fuzz_target;
use sld::motion::Manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = Manifest::from_json_slice(data) {
        let back = Manifest::from_json_slice(m.to_json_string().as_bytes()).expect("re-parse");
        assert_eq!(back, m);
    }
});
