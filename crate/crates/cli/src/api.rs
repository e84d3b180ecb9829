//! Request handling shared by the HTTP service and the `predict` command.
//! Everything here is a pure function of the loaded checkpoint and the
//! request, so identical requests give byte-identical responses.

use serde::{Deserialize, Serialize};
use serde_json::json;

use sld::motion::{synth_generate, PoseSequence, Primitive};
use sld::net::{Checkpoint, Model, PredictionSet};
use sld::numkit::Rng;
use sld::{Error, Result};

/// Seed of the bundled sample motions.
pub const SAMPLE_SEED: u64 = 0x5eed;
pub const SAMPLE_COUNT: usize = 8;

type Frames = Vec<Vec<[f64; 3]>>;

#[derive(Clone, Debug)]
pub struct Sample {
    pub id: String,
    pub primitive: Primitive,
    pub past: PoseSequence,
}

/// Read-only snapshot of a checkpoint plus the bundled samples.
#[derive(Debug)]
pub struct Session {
    model: Model,
    samples: Vec<Sample>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub body: String,
}

impl Response {
    fn ok(body: String) -> Self {
        Self { status: 200, body }
    }

    fn error(status: u16, message: impl std::fmt::Display) -> Self {
        Self {
            status,
            body: json!({ "error": message.to_string() }).to_string(),
        }
    }
}

#[derive(Serialize)]
struct PredictionBody<'a> {
    coefficients: Vec<&'a [f64]>,
    futures: Vec<Frames>,
    past: Frames,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictRequest {
    past: Option<Frames>,
    sample_id: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EditRequest {
    past: Option<Frames>,
    sample_id: Option<String>,
    sample_index: usize,
    deltas: Vec<f64>,
}

/// Prediction-set JSON as written by `sld predict` and `/api/predict`.
pub fn prediction_json(set: &PredictionSet) -> String {
    let body = PredictionBody {
        coefficients: (0..set.coefficients.samples()).map(|k| set.coefficients.row(k)).collect(),
        futures: set.futures.iter().map(PoseSequence::to_nested).collect(),
        past: set.past.to_nested(),
    };
    serde_json::to_string(&body).expect("prediction serializes")
}

/// Past motions synthesized for the model's skeleton from a fixed seed.
pub fn bundled_samples(model: &Model) -> Result<Vec<Sample>> {
    let profile = model.profile();
    let frames = profile.total_length();
    synth_generate(&Rng::new(SAMPLE_SEED), model.skeleton(), SAMPLE_COUNT, profile.fps, frames)
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(Sample {
                id: format!("sample-{i:02}"),
                primitive: s.primitive,
                past: s.sequence.slice(0, profile.t_past)?,
            })
        })
        .collect()
}

impl Session {
    pub fn new(checkpoint: Checkpoint) -> Result<Self> {
        let model = checkpoint.model;
        let samples = bundled_samples(&model)?;
        Ok(Self { model, samples })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    fn model_info(&self) -> String {
        let p = self.model.profile();
        json!({
            "m": self.model.direction_count(),
            "c": p.c_latent,
            "k": self.model.k(),
            "v": p.joints(),
            "t_past": p.t_past,
            "t_future": p.t_future,
            "n": p.n_freq,
            "parents": p.parents,
            "fps": p.fps,
            "profile": p.name,
            "ablation_mode": self.model.mode(),
        })
        .to_string()
    }

    fn samples_json(&self) -> String {
        let list: Vec<_> = self
            .samples
            .iter()
            .map(|s| json!({ "id": s.id, "primitive": s.primitive.name(), "past": s.past.to_nested() }))
            .collect();
        serde_json::Value::Array(list).to_string()
    }

    fn resolve_past(&self, past: Option<Frames>, sample_id: Option<String>) -> Result<PoseSequence> {
        match (past, sample_id) {
            (Some(frames), None) => {
                let p = self.model.profile();
                if let Some(bad) = frames.iter().position(|f| f.len() != p.joints()) {
                    return Err(Error::Argument(format!(
                        "frame {bad} has {} joints, model expects {}",
                        frames[bad].len(),
                        p.joints()
                    )));
                }
                if frames.is_empty() {
                    return Err(Error::Argument("past has no frames".into()));
                }
                PoseSequence::from_nested(self.model.skeleton().clone(), p.fps, &frames)
            }
            (None, Some(id)) => self
                .samples
                .iter()
                .find(|s| s.id == id)
                .map(|s| s.past.clone())
                .ok_or_else(|| Error::Argument(format!("unknown sample_id `{id}`"))),
            _ => Err(Error::Argument("give exactly one of `past` and `sample_id`".into())),
        }
    }

    pub fn predict(&self, past: &PoseSequence) -> Result<String> {
        Ok(prediction_json(&self.model.predict_k(past)?))
    }

    fn predict_request(&self, body: &[u8]) -> Result<String> {
        let req: PredictRequest = parse(body)?;
        let past = self.resolve_past(req.past, req.sample_id)?;
        self.predict(&past)
    }

    fn edit_request(&self, body: &[u8]) -> Result<String> {
        let req: EditRequest = parse(body)?;
        let past = self.resolve_past(req.past, req.sample_id)?;
        if req.sample_index >= self.model.k() {
            return Err(Error::Argument(format!(
                "sample_index {} out of range for K = {}",
                req.sample_index,
                self.model.k()
            )));
        }
        let base = self.model.predict_first(&past, req.sample_index + 1)?;
        let (future, coefficients) = self.model.predict_edited(&past, &base, req.sample_index, &req.deltas)?;
        if !future.frames().all_finite() {
            return Err(Error::Argument("edited motion is not finite; deltas too large".into()));
        }
        Ok(json!({ "future": future.to_nested(), "coefficients": coefficients }).to_string())
    }
}

fn parse<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T> {
    serde_json::from_slice(body).map_err(|e| Error::Argument(format!("bad request body: {e}")))
}

/// Dispatches one request. `path` may carry a query string, which is ignored.
pub fn route(session: &Session, method: &str, path: &str, body: &[u8]) -> Response {
    let path = path.split('?').next().unwrap_or_default();
    let result = match (method, path) {
        ("GET", "/api/model") => Ok(session.model_info()),
        ("GET", "/api/samples") => Ok(session.samples_json()),
        ("POST", "/api/predict") => session.predict_request(body),
        ("POST", "/api/edit") => session.edit_request(body),
        _ => return Response::error(404, format!("no route for {method} {path}")),
    };
    match result {
        Ok(body) => Response::ok(body),
        Err(e) => Response::error(400, e),
    }
}
