use std::fs;
use std::path::{Path, PathBuf};

use sld::motion::{synth_generate, Manifest};
use sld::net::Profile;
use sld::numkit::Rng;
use sld::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug)]
pub struct CorpusOptions {
    pub sequences: usize,
    pub seed: u64,
    pub profile: Profile,
    /// Frames per sequence; defaults to two windows' worth.
    pub frames: Option<usize>,
    /// Window stride; defaults to the future length.
    pub stride: Option<usize>,
}

/// Writes `seq_NNNN.json` motion files and a manifest into `dir`, returning
/// the manifest path.
pub fn write_corpus(dir: &Path, opts: &CorpusOptions) -> Result<PathBuf> {
    if opts.sequences == 0 {
        return Err(Error::Argument("--sequences must be at least 1".into()));
    }
    let p = &opts.profile;
    p.validate()?;
    let frames = opts.frames.unwrap_or(2 * p.total_length());
    if frames < p.total_length() {
        return Err(Error::Argument(format!(
            "--frames {frames} is shorter than one {}+{} window",
            p.t_past, p.t_future
        )));
    }
    let stride = opts.stride.unwrap_or(p.t_future);
    if stride == 0 {
        return Err(Error::Argument("--stride must be positive".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
    let seqs = synth_generate(&Rng::new(opts.seed), &p.skeleton()?, opts.sequences, p.fps, frames);
    let mut files = Vec::with_capacity(seqs.len());
    for (i, s) in seqs.iter().enumerate() {
        let name = format!("seq_{i:04}.json");
        s.sequence.save(dir.join(&name))?;
        files.push(name);
    }
    let manifest = Manifest {
        files,
        t_past: p.t_past,
        t_future: p.t_future,
        stride,
        multimodal_threshold: 0.5,
    };
    let path = dir.join(MANIFEST_NAME);
    manifest.save(&path)?;
    Ok(path)
}
