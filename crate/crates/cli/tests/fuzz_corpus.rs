//! Runs the checked-in fuzz seeds through the same entry points as the
//! fuzz targets, so broken seeds show up without a nightly toolchain.

use std::fs;
use std::path::PathBuf;

use sld::motion::{Manifest, PoseSequence};
use sld::net::{AblationMode, Checkpoint, Model, Profile};
use sld::numkit::Rng;
use sld::train::TrainConfig;
use sld_cli::{route, Session};

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn parser_seeds_are_valid() {
    for (p, b) in seeds("motion_file") {
        PoseSequence::from_json_slice(&b).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, b) in seeds("manifest") {
        Manifest::from_json_slice(&b).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, b) in seeds("train_config") {
        TrainConfig::from_json_slice(&b)
            .and_then(|c| c.validate())
            .unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, b) in seeds("checkpoint") {
        let ck = Checkpoint::from_bytes(&b).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(ck.to_bytes().unwrap(), b);
    }
}

#[test]
fn api_seeds_succeed() {
    let model = Model::init(Profile::micro(), AblationMode::Full, 3, &mut Rng::new(1)).unwrap();
    let session = Session::new(Checkpoint {
        model,
        seed: 1,
        epoch: 0,
        config: serde_json::Value::Null,
        optimizer: None,
    })
    .unwrap();
    for (p, data) in seeds("api_request") {
        let text = String::from_utf8(data).unwrap();
        let (head, body) = text.split_once('\n').unwrap();
        let (method, path) = head.split_once(' ').unwrap();
        let res = route(&session, method, path, body.as_bytes());
        assert_eq!(res.status, 200, "{}: {}", p.display(), res.body);
    }
}
