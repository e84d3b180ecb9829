#![no_main]

use libfuzzer_sys::fuzz_target;
use sld::net::Checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = Checkpoint::from_bytes(data) {
        let bytes = ck.to_bytes().expect("re-encode");
        Checkpoint::from_bytes(&bytes).expect("re-decode");
    }
});
