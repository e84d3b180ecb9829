#![no_main]

use libfuzzer_sys::fuzz_target;
use sld::motion::PoseSequence;

fuzz_target!(|data: &[u8]| {
    if let Ok(seq) = PoseSequence::from_json_slice(data) {
        // Whatever parses must survive a write/read cycle unchanged.
        let back = PoseSequence::from_json_slice(seq.to_json_string().as_bytes()).expect("re-parse");
        assert_eq!(back.frames(), seq.frames());
    }
});
