#![no_main]

//! Input: `METHOD PATH\nBODY`.

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use sld::net::{AblationMode, Checkpoint, Model, Profile};
use sld::numkit::Rng;
use sld_cli::{route, Session};

fn session() -> &'static Session {
    static SESSION: OnceLock<Session> = OnceLock::new();
    SESSION.get_or_init(|| {
        let model = Model::init(Profile::micro(), AblationMode::Full, 3, &mut Rng::new(1)).unwrap();
        let ck = Checkpoint {
            model,
            seed: 1,
            epoch: 0,
            config: serde_json::Value::Null,
            optimizer: None,
        };
        Session::new(ck).unwrap()
    })
}

fuzz_target!(|data: &[u8]| {
    let (head, body) = match data.iter().position(|&b| b == b'\n') {
        Some(i) => (&data[..i], &data[i + 1..]),
        None => (data, &[][..]),
    };
    let head = String::from_utf8_lossy(head);
    let (method, path) = head.split_once(' ').unwrap_or(("GET", &head));
    let res = route(session(), method, path, body);
    assert!(matches!(res.status, 200 | 400 | 404));
    serde_json::from_str::<serde_json::Value>(&res.body).expect("responses are JSON");
});
