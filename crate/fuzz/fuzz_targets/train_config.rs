#![no_main]

use libfuzzer_sys::fuzz_target;
use sld::train::TrainConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = TrainConfig::from_json_slice(data) {
        let _ = cfg.validate();
        let back = TrainConfig::from_json_slice(cfg.to_json_string().as_bytes()).expect("re-parse");
        assert_eq!(back, cfg);
    }
});
