use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ArenaConfig, Axis, MotionState, Surface, SynthError, TrajectoryConfig, Vec2};

const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub position: Vec2,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    Bounce { surface: u32, velocity_before: Vec2, velocity_after: Vec2 },
    Hit { velocity: Vec2 },
    OcclusionStart,
    OcclusionEnd,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEvent {
    pub frame_index: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `frames[t]` holds the samples of frame `t`'s exposure window, the first
    /// at shutter open and the last at shutter close.
    pub frames: Vec<Vec<Sample>>,
    /// Time between consecutive samples, in frame periods.
    pub sample_dt: f64,
    pub exposure_fraction: f64,
    pub events: Vec<TrajectoryEvent>,
    /// Distance between the shutter-open and shutter-close positions, per frame.
    pub displacement: Vec<f64>,
    /// Per-frame FMO flag; empty until [`Trajectory::label`] is called.
    pub is_fmo: Vec<bool>,
}

impl Trajectory {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn label(&mut self, diameter: f64) -> Result<(), SynthError> {
        self.is_fmo = label_fmo(self, diameter)?;
        Ok(())
    }

    /// Events whose frame index lies in `range`.
    pub fn events_in(&self, range: std::ops::Range<usize>) -> Vec<TrajectoryEvent> {
        self.events.iter().filter(|e| range.contains(&e.frame_index)).cloned().collect()
    }
}

/// An object moves farther than its own diameter during one exposure.
pub fn label_fmo(trajectory: &Trajectory, diameter: f64) -> Result<Vec<bool>, SynthError> {
    if !(diameter > 0.0) {
        return Err(SynthError::InvalidDiameter(diameter));
    }
    Ok(trajectory.displacement.iter().map(|&d| d > diameter).collect())
}

const REST_SPEED: f64 = 1e-3;
const MAX_CONTACTS: usize = 64;
const CONTACT_SLOP: f64 = 1e-9;

struct Integrator<'a> {
    arena: &'a ArenaConfig,
    gravity: Vec2,
    restitution: f64,
    position: Vec2,
    velocity: Vec2,
    stopped: bool,
}

fn normal_component(surface: &Surface, v: Vec2) -> f64 {
    let n = match surface.axis {
        Axis::Vertical => v.x,
        Axis::Horizontal => v.y,
    };
    if surface.inside_positive { n } else { -n }
}

/// Earliest time in `[0, horizon]` at which the path leaves the inside of `surface`.
fn contact_time(surface: &Surface, p: Vec2, v: Vec2, g: Vec2, horizon: f64) -> Option<f64> {
    let d0 = surface.inside_distance(p);
    if d0 < -CONTACT_SLOP {
        return None;
    }
    let (a, b, c) = (0.5 * normal_component(surface, g), normal_component(surface, v), d0.max(0.0));
    let mut roots = [f64::NAN; 2];
    if a == 0.0 {
        if b < 0.0 {
            roots[0] = -c / b;
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            if q != 0.0 {
                roots = [q / a, c / q];
            } else {
                roots[0] = 0.0;
            }
        }
    }
    roots
        .into_iter()
        .filter(|&t| t >= 0.0 && t <= horizon && 2.0 * a * t + b < 0.0)
        .filter(|&t| {
            let along = surface.along(p + v * t + g * (0.5 * t * t));
            along >= surface.span.0 && along <= surface.span.1
        })
        .min_by(f64::total_cmp)
}

impl Integrator<'_> {
    /// Gravity with the normal part removed on surfaces the object rests on.
    fn effective_gravity(&self) -> Vec2 {
        let mut g = self.gravity;
        for s in &self.arena.surfaces {
            let along = s.along(self.position);
            let resting = s.inside_distance(self.position).abs() <= CONTACT_SLOP
                && normal_component(s, self.velocity) == 0.0
                && normal_component(s, g) < 0.0
                && along >= s.span.0
                && along <= s.span.1;
            if resting {
                match s.axis {
                    Axis::Vertical => g.x = 0.0,
                    Axis::Horizontal => g.y = 0.0,
                }
            }
        }
        g
    }

    /// Exact constant-acceleration motion; bounces are resolved at their contact time.
    fn step(&mut self, dt: f64, frame_index: usize, events: &mut Vec<TrajectoryEvent>) {
        if self.stopped {
            return;
        }
        let mut remaining = dt;
        for _ in 0..MAX_CONTACTS {
            let g = self.effective_gravity();
            let mut first: Option<(usize, f64)> = None;
            for (i, s) in self.arena.surfaces.iter().enumerate() {
                if let Some(t) = contact_time(s, self.position, self.velocity, g, remaining) {
                    if first.is_none_or(|(_, f)| t < f) {
                        first = Some((i, t));
                    }
                }
            }
            let t = first.map_or(remaining, |(_, t)| t);
            self.position += self.velocity * t + g * (0.5 * t * t);
            self.velocity += g * t;
            remaining -= t;
            let Some((i, _)) = first else { return };

            let surface = &self.arena.surfaces[i];
            let before = self.velocity;
            let (p_n, v_n) = match surface.axis {
                Axis::Vertical => (&mut self.position.x, &mut self.velocity.x),
                Axis::Horizontal => (&mut self.position.y, &mut self.velocity.y),
            };
            *p_n = surface.coord;
            if v_n.abs() <= REST_SPEED {
                *v_n = 0.0;
            } else {
                *v_n = -self.restitution * *v_n;
                events.push(TrajectoryEvent {
                    frame_index,
                    kind: EventKind::Bounce { surface: surface.id, velocity_before: before, velocity_after: self.velocity },
                });
            }
        }
        // contact budget exhausted: hold position for the rest of the step
    }
}

fn draw_velocity(rng: &mut ChaCha8Rng, config: &TrajectoryConfig) -> Vec2 {
    let angle = rng.random_range(0.0..TAU);
    let speed = rng.random_range(config.speed_min..=config.speed_max);
    Vec2::new(angle.cos(), angle.sin()) * speed
}

fn place(rng: &mut ChaCha8Rng, arena: &ArenaConfig) -> Result<Vec2, SynthError> {
    let m = arena.placement_margin;
    let (x_max, y_max) = (f64::from(arena.width) - 1.0 - m, f64::from(arena.height) - 1.0 - m);
    if x_max < m || y_max < m {
        return Err(SynthError::PlacementFailed(0));
    }
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let p = Vec2::new(rng.random_range(m..=x_max), rng.random_range(m..=y_max));
        if arena.placement_ok(p) {
            return Ok(p);
        }
    }
    Err(SynthError::PlacementFailed(MAX_PLACEMENT_ATTEMPTS))
}

/// Simulates one object over `config.n_frames` frames.
///
/// Hits, stops and occlusion onsets are Bernoulli draws at frame boundaries
/// (from frame 1 on). Motion continues through the shutter-closed part of each
/// period without being sampled.
pub fn generate_trajectory(seed: u64, config: &TrajectoryConfig, arena: &ArenaConfig) -> Result<Trajectory, SynthError> {
    config.validate()?;
    arena.validate()?;
    let span = f64::from(arena.width.min(arena.height)) - 1.0;
    if config.speed_max >= span {
        return Err(SynthError::SpeedExceedsArena {
            speed_max: config.speed_max,
            width: arena.width,
            height: arena.height,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let MotionState { position, velocity } = match config.initial {
        Some(state) => state,
        None => {
            let position = place(&mut rng, arena)?;
            MotionState { position, velocity: draw_velocity(&mut rng, config) }
        }
    };

    let n_frames = config.n_frames as usize;
    let s = config.substeps_per_frame as usize;
    let e = config.exposure_fraction;
    let sample_dt = e / (s - 1) as f64;
    let gap_steps = if e < 1.0 { ((1.0 - e) * s as f64).ceil() as usize } else { 0 };
    let gap_dt = if gap_steps > 0 { (1.0 - e) / gap_steps as f64 } else { 0.0 };

    let mut sim = Integrator {
        arena,
        gravity: config.gravity,
        restitution: config.restitution,
        position,
        velocity,
        stopped: false,
    };
    let mut events = Vec::new();
    let mut frames = Vec::with_capacity(n_frames);
    let mut displacement = Vec::with_capacity(n_frames);
    let mut occluded_until: Option<usize> = None;

    for t in 0..n_frames {
        if t > 0 {
            if occluded_until == Some(t) {
                occluded_until = None;
                events.push(TrajectoryEvent { frame_index: t, kind: EventKind::OcclusionEnd });
            }
            let (u_hit, u_stop, u_occ): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
            if !sim.stopped && u_hit < config.p_hit {
                sim.velocity = draw_velocity(&mut rng, config);
                events.push(TrajectoryEvent { frame_index: t, kind: EventKind::Hit { velocity: sim.velocity } });
            }
            if !sim.stopped && u_stop < config.p_stop {
                sim.stopped = true;
                sim.velocity = Vec2::ZERO;
                events.push(TrajectoryEvent { frame_index: t, kind: EventKind::Stop });
            }
            if occluded_until.is_none() && u_occ < config.p_occlusion {
                let len = rng.random_range(config.occlusion_len.0..=config.occlusion_len.1) as usize;
                occluded_until = Some(t + len);
                events.push(TrajectoryEvent { frame_index: t, kind: EventKind::OcclusionStart });
            }
        }

        let visible = occluded_until.is_none();
        let mut samples = Vec::with_capacity(s);
        samples.push(Sample { position: sim.position, visible });
        for _ in 1..s {
            sim.step(sample_dt, t, &mut events);
            samples.push(Sample { position: sim.position, visible });
        }
        displacement.push((samples[s - 1].position - samples[0].position).norm());
        frames.push(samples);
        for _ in 0..gap_steps {
            sim.step(gap_dt, t, &mut events);
        }
    }
    if occluded_until.is_some() {
        events.push(TrajectoryEvent { frame_index: n_frames, kind: EventKind::OcclusionEnd });
    }

    Ok(Trajectory { frames, sample_dt, exposure_fraction: e, events, displacement, is_fmo: Vec::new() })
}
