//! Procedural motion corpus: a handful of motion primitives expressed as
//! sinusoidal joint-angle trajectories, posed by forward kinematics so that
//! bone lengths stay fixed.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{PoseSequence, Skeleton};
use crate::numkit::{Rng, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    Walk,
    SitDown,
    ArmRaise,
    Turn,
    IdleSway,
}

impl Primitive {
    pub const ALL: [Primitive; 5] = [
        Primitive::Walk,
        Primitive::SitDown,
        Primitive::ArmRaise,
        Primitive::Turn,
        Primitive::IdleSway,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Walk => "walk",
            Primitive::SitDown => "sit_down",
            Primitive::ArmRaise => "arm_raise",
            Primitive::Turn => "turn",
            Primitive::IdleSway => "idle_sway",
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct SynthSequence {
    pub primitive: Primitive,
    pub sequence: PoseSequence,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Side {
    Left,
    Right,
}

/// What the rotation stored at a joint does: it turns the bone that ends
/// at that joint (and everything below it).
#[derive(Clone, Copy, Debug, PartialEq)]
enum Role {
    Rigid,
    Leg(Side),
    Shin(Side),
    Arm(Side),
    Forearm(Side),
    LowerSpine,
    UpperSpine,
    Neck,
}

fn role_of(name: &str) -> Role {
    let side = if name.starts_with("l_") {
        Side::Left
    } else {
        Side::Right
    };
    match name.trim_start_matches("l_").trim_start_matches("r_") {
        "knee" | "foot" => Role::Leg(side),
        "ankle" => Role::Shin(side),
        "elbow" | "hand" => Role::Arm(side),
        "wrist" => Role::Forearm(side),
        "spine" => Role::LowerSpine,
        "thorax" | "neck" => Role::UpperSpine,
        "head" => Role::Neck,
        _ => Role::Rigid,
    }
}

/// Rest-pose offset from the parent, y up, roughly unit standing height.
fn rest_offset(name: &str) -> [f64; 3] {
    let sign = if name.starts_with("l_") { 1.0 } else { -1.0 };
    match name.trim_start_matches("l_").trim_start_matches("r_") {
        "hip" => [0.07 * sign, 0.0, 0.0],
        "knee" | "ankle" => [0.0, -0.24, 0.0],
        "foot" => [0.07 * sign, -0.48, 0.0],
        "spine" | "thorax" => [0.0, 0.12, 0.0],
        "neck" => [0.0, 0.1, 0.0],
        "head" => [0.0, 0.08, 0.0],
        "shoulder" => [0.1 * sign, 0.0, 0.0],
        "elbow" => [0.0, -0.16, 0.0],
        "wrist" => [0.0, -0.15, 0.0],
        "hand" => [-0.12, -0.3, 0.0],
        _ => [0.0, 0.1, 0.0],
    }
}

type Mat3 = [[f64; 3]; 3];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn mat_vec(a: &Mat3, v: &[f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| (0..3).map(|k| a[i][k] * v[k]).sum())
}

fn rot_x(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

fn rot_y(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn rot_z(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// Per-sequence randomized parameters.
#[derive(Clone, Debug)]
struct Params {
    primitive: Primitive,
    amplitude: f64,
    omega: f64,
    phase: f64,
    heading: f64,
    speed: f64,
    start: f64,
    duration: f64,
    /// Sign of the turn rate, or which arm(s) rise.
    variant: usize,
}

impl Params {
    fn draw(rng: &mut Rng) -> Self {
        let primitive = Primitive::ALL[rng.below(Primitive::ALL.len())];
        let freq = match primitive {
            Primitive::Walk => rng.uniform_in(0.8, 1.2),
            Primitive::ArmRaise => rng.uniform_in(0.3, 0.6),
            Primitive::Turn => rng.uniform_in(0.7, 1.0),
            Primitive::IdleSway | Primitive::SitDown => rng.uniform_in(0.2, 0.5),
        };
        Self {
            primitive,
            amplitude: rng.uniform_in(0.7, 1.3),
            omega: TAU * freq,
            phase: rng.uniform_in(0.0, TAU),
            heading: rng.uniform_in(0.0, TAU),
            speed: rng.uniform_in(0.5, 0.9),
            start: rng.uniform_in(0.0, 1.0),
            duration: rng.uniform_in(1.5, 3.0),
            variant: rng.below(3),
        }
    }

    /// Smooth 0 -> 1 ramp used by the sit-down primitive.
    fn progress(&self, s: f64) -> f64 {
        let x = ((s - self.start) / self.duration).clamp(0.0, 1.0);
        0.5 * (1.0 - (PI * x).cos())
    }

    /// `(pitch, roll)` for a joint role at time `s`.
    fn angles(&self, role: Role, s: f64) -> (f64, f64) {
        let a = self.amplitude;
        let wave = (self.omega * s + self.phase).sin();
        let side_sign = |side: Side| if side == Side::Left { 1.0 } else { -1.0 };
        match (self.primitive, role) {
            (_, Role::Rigid) => (0.0, 0.0),
            (Primitive::Walk, Role::Leg(side)) => (0.45 * a * wave * side_sign(side), 0.0),
            (Primitive::Walk, Role::Shin(side)) => {
                let w = (self.omega * s + self.phase + side_sign(side) * PI / 2.0).sin();
                (0.3 * a * (1.0 + w), 0.0)
            }
            (Primitive::Walk, Role::Arm(side)) => (-0.35 * a * wave * side_sign(side), 0.0),
            (Primitive::Walk, Role::Forearm(_)) => (-0.3, 0.0),
            (Primitive::Walk, Role::LowerSpine) => (0.05, 0.0),
            (Primitive::Walk, _) => (0.02 * wave, 0.0),

            (Primitive::SitDown, role) => {
                let p = self.progress(s);
                match role {
                    Role::Leg(_) => (-1.3 * a * p, 0.0),
                    Role::Shin(_) => (1.4 * a * p, 0.0),
                    Role::Arm(_) => (-0.6 * p, 0.0),
                    Role::LowerSpine | Role::UpperSpine => (-0.3 * p, 0.0),
                    _ => (0.05 * wave, 0.0),
                }
            }

            (Primitive::ArmRaise, Role::Arm(side)) => {
                let raised = match (self.variant, side) {
                    (0, Side::Left) | (1, Side::Right) | (2, _) => 1.0,
                    _ => 0.0,
                };
                let lift = 1.4 * a * 0.5 * (1.0 - (self.omega * s + self.phase).cos());
                (0.0, raised * lift * side_sign(side))
            }
            (Primitive::ArmRaise, Role::Forearm(_)) => (-0.2 * a, 0.0),
            (Primitive::ArmRaise, _) => (0.0, 0.02 * wave),

            (Primitive::Turn, Role::Leg(side)) => {
                (0.15 * a * (2.0 * self.omega * s).sin() * side_sign(side), 0.0)
            }
            (Primitive::Turn, _) => (0.0, 0.0),

            (Primitive::IdleSway, Role::LowerSpine) => (0.0, 0.08 * a * wave),
            (Primitive::IdleSway, Role::Neck) => (0.05 * a * wave, 0.0),
            (Primitive::IdleSway, Role::Arm(side)) => (0.05 * a * wave * side_sign(side), 0.0),
            (Primitive::IdleSway, _) => (0.0, 0.03 * a * wave),
        }
    }

    /// Root position and orientation at time `s`.
    fn root(&self, s: f64) -> ([f64; 3], Mat3) {
        let base = 0.48;
        let forward = [self.heading.sin(), 0.0, self.heading.cos()];
        let wave = (self.omega * s + self.phase).sin();
        match self.primitive {
            Primitive::Walk => {
                let d = self.speed * s;
                let bob = 0.01 * (2.0 * (self.omega * s + self.phase)).sin();
                ([forward[0] * d, base + bob, forward[2] * d], rot_y(self.heading))
            }
            Primitive::SitDown => {
                let p = self.progress(s);
                let back = -0.1 * p;
                (
                    [forward[0] * back, base - 0.22 * p, forward[2] * back],
                    rot_y(self.heading),
                )
            }
            Primitive::Turn => {
                let rate = if self.variant == 0 { -1.0 } else { 1.0 } * (0.6 + 0.6 * self.amplitude / 1.3);
                ([0.0, base, 0.0], rot_y(self.heading + rate * s))
            }
            Primitive::ArmRaise => ([0.0, base, 0.0], rot_y(self.heading)),
            Primitive::IdleSway => {
                let side = 0.015 * wave;
                (
                    [forward[2] * side, base, -forward[0] * side],
                    mat_mul(&rot_y(self.heading), &rot_z(0.02 * wave)),
                )
            }
        }
    }
}

/// Poses one frame by forward kinematics. Each joint's local rotation
/// turns the bone from its parent, so `|pos[j] - pos[parent]|` always
/// equals the rest offset length.
fn pose_frame(skeleton: &Skeleton, roles: &[Role], offsets: &[[f64; 3]], params: &Params, s: f64) -> Vec<f64> {
    let v = skeleton.joint_count();
    let mut pos = vec![[0.0; 3]; v];
    let mut rot = vec![[[0.0; 3]; 3]; v];
    for &j in skeleton.order() {
        match skeleton.parent(j) {
            None => {
                let (p, r) = params.root(s);
                pos[j] = p;
                rot[j] = r;
            }
            Some(parent) => {
                let (pitch, roll) = params.angles(roles[j], s);
                let local = mat_mul(&rot_x(pitch), &rot_z(roll));
                rot[j] = mat_mul(&rot[parent], &local);
                let off = mat_vec(&rot[j], &offsets[j]);
                pos[j] = [0, 1, 2].map(|i| pos[parent][i] + off[i]);
            }
        }
    }
    pos.into_iter().flatten().collect()
}

/// Generates `count` sequences of `frames` frames each. Sequence `i` draws
/// from its own sub-stream of `rng`, so a larger `count` with the same seed
/// yields the smaller corpus as a prefix.
pub fn synth_generate(rng: &Rng, skeleton: &Skeleton, count: usize, fps: u32, frames: usize) -> Vec<SynthSequence> {
    let v = skeleton.joint_count();
    let name = |j: usize| skeleton.joint_name(j).unwrap_or("").to_string();
    let roles: Vec<Role> = (0..v).map(|j| role_of(&name(j))).collect();
    let offsets: Vec<[f64; 3]> = (0..v).map(|j| rest_offset(&name(j))).collect();
    (0..count)
        .map(|i| {
            let params = Params::draw(&mut rng.derive(i as u64));
            let mut data = Vec::with_capacity(frames * v * 3);
            for t in 0..frames {
                let s = params.start + t as f64 / f64::from(fps.max(1));
                data.extend(pose_frame(skeleton, &roles, &offsets, &params, s));
            }
            let tensor = Tensor::new(&[frames, v, 3], data).expect("frame layout");
            SynthSequence {
                primitive: params.primitive,
                sequence: PoseSequence::new(skeleton.clone(), fps, tensor)
                    .expect("forward kinematics keeps bones non-degenerate"),
            }
        })
        .collect()
}
