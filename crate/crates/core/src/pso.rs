//! Particle swarm optimizer with an exponentially decaying inertia weight
//! and staged acceleration coefficients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PsoError {
    #[error("invalid PSO configuration: {0}")]
    Config(String),
    #[error("generation {g} outside [0, {big_g}]")]
    Generation { g: usize, big_g: usize },
}

/// Increment added to `(c1, c2)` while `g/G` is at or below `upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageIncrement {
    pub upper: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoSchedule {
    pub omega_min: f64,
    pub omega_max: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub c1_init: f64,
    pub c2_init: f64,
    /// Ordered by `upper`; the last stage must reach 1.
    pub stages: [StageIncrement; 4],
    /// Accelerations are kept inside `[c_min, c_max]` after every update.
    pub c_min: f64,
    pub c_max: f64,
    /// Per-component velocity limit as a fraction of the bound width.
    pub velocity_fraction: f64,
}

impl Default for PsoSchedule {
    fn default() -> Self {
        let (omega_min, omega_max) = (0.4, 0.9);
        Self {
            omega_min,
            omega_max,
            lambda1: 3.0,
            lambda2: Self::closing_lambda2(omega_min, omega_max),
            c1_init: 2.5,
            c2_init: 0.5,
            stages: [
                StageIncrement {
                    upper: 0.30,
                    alpha: 0.085,
                    beta: -0.0425,
                },
                StageIncrement {
                    upper: 0.60,
                    alpha: 0.045,
                    beta: -0.09,
                },
                StageIncrement {
                    upper: 0.85,
                    alpha: -0.025,
                    beta: 0.05,
                },
                StageIncrement {
                    upper: 1.00,
                    alpha: -0.0025,
                    beta: 0.0025,
                },
            ],
            c_min: 0.05,
            c_max: 4.5,
            velocity_fraction: 0.2,
        }
    }
}

impl PsoSchedule {
    /// The `λ2` for which the inertia weight starts exactly at `ω_max`.
    pub fn closing_lambda2(omega_min: f64, omega_max: f64) -> f64 {
        omega_max.exp() / (omega_max - omega_min)
    }

    pub fn validate(&self) -> Result<(), PsoError> {
        let bad = |m: &str| Err(PsoError::Config(m.into()));
        if !(self.omega_min > 0.0 && self.omega_min < self.omega_max) {
            return bad("need 0 < omega_min < omega_max");
        }
        if !(self.lambda2 > 0.0) || !self.lambda1.is_finite() {
            return bad("lambda2 must be positive and lambda1 finite");
        }
        if !(self.c_min >= 0.0 && self.c_min <= self.c_max) {
            return bad("need 0 <= c_min <= c_max");
        }
        if !(self.c1_init >= 0.0 && self.c2_init >= 0.0) {
            return bad("initial accelerations must be non-negative");
        }
        if !(self.velocity_fraction > 0.0 && self.velocity_fraction <= 1.0) {
            return bad("velocity_fraction must be in (0, 1]");
        }
        let mut prev = 0.0;
        for s in &self.stages {
            if !(s.upper > prev) {
                return bad("stage thresholds must increase");
            }
            prev = s.upper;
        }
        if prev < 1.0 {
            return bad("last stage must cover g/G = 1");
        }
        Ok(())
    }

    pub fn stage(&self, g: usize, big_g: usize) -> &StageIncrement {
        let frac = g as f64 / big_g as f64;
        self.stages.iter().find(|s| frac <= s.upper).unwrap_or(&self.stages[3])
    }
}

/// `ω(g) = ω_min + exp(ω_max − λ1·(ω_max + ω_min)·g/G)/λ2`
pub fn inertia_weight(g: usize, big_g: usize, sched: &PsoSchedule) -> Result<f64, PsoError> {
    if big_g == 0 || g > big_g {
        return Err(PsoError::Generation { g, big_g });
    }
    let frac = g as f64 / big_g as f64;
    let exponent = sched.omega_max - sched.lambda1 * (sched.omega_max + sched.omega_min) * frac;
    Ok(sched.omega_min + exponent.exp() / sched.lambda2)
}

/// Adds the stage increment for generation `g` and clamps to the schedule's
/// acceleration band.
pub fn acceleration_update(c1: f64, c2: f64, g: usize, big_g: usize, sched: &PsoSchedule) -> Result<(f64, f64), PsoError> {
    if big_g == 0 || g > big_g {
        return Err(PsoError::Generation { g, big_g });
    }
    let s = sched.stage(g, big_g);
    Ok((
        (c1 + s.alpha).clamp(sched.c_min, sched.c_max),
        (c2 + s.beta).clamp(sched.c_min, sched.c_max),
    ))
}

/// Box constraints of the search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, PsoError> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self, PsoError> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn validate(&self) -> Result<(), PsoError> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(PsoError::Config("bounds must be non-empty and of equal length".into()));
        }
        if self
            .lower
            .iter()
            .zip(&self.upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u))
        {
            return Err(PsoError::Config("each bound needs finite lower < upper".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(k, v)| *v >= self.lower[k] && *v <= self.upper[k])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub pbest_position: Vec<f64>,
    pub pbest_fitness: f64,
}

/// Anything that maps a candidate to a cost. Non-finite costs rank last.
pub trait Fitness: Sync {
    fn evaluate(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> Fitness for F {
    fn evaluate(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

fn sanitize(f: f64) -> f64 {
    if f.is_nan() {
        f64::INFINITY
    } else {
        f
    }
}

fn evaluate_all<F: Fitness + ?Sized>(positions: &[Vec<f64>], fitness: &F) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        positions.par_iter().map(|x| sanitize(fitness.evaluate(x))).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        positions.iter().map(|x| sanitize(fitness.evaluate(x))).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub gbest_position: Vec<f64>,
    pub gbest_fitness: f64,
    /// Index of the last completed generation; the initial population is 0.
    pub generation: usize,
    /// Index of the final generation.
    pub max_generation: usize,
    pub c1: f64,
    pub c2: f64,
    pub bounds: Bounds,
    pub seed: u64,
    rng: ChaCha8Rng,
}

impl Swarm {
    /// Random initial positions inside `bounds`, zero velocities, and one
    /// fitness evaluation per particle.
    pub fn new<F: Fitness + ?Sized>(
        bounds: Bounds,
        population: usize,
        max_generation: usize,
        sched: &PsoSchedule,
        fitness: &F,
        seed: u64,
    ) -> Result<Self, PsoError> {
        bounds.validate()?;
        sched.validate()?;
        if population < 1 {
            return Err(PsoError::Config("population must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions: Vec<Vec<f64>> = (0..population)
            .map(|_| {
                (0..bounds.dim())
                    .map(|k| rng.random_range(bounds.lower[k]..=bounds.upper[k]))
                    .collect()
            })
            .collect();
        let costs = evaluate_all(&positions, fitness);
        let particles: Vec<Particle> = positions
            .into_iter()
            .zip(costs)
            .map(|(x, f)| Particle {
                velocity: vec![0.0; x.len()],
                pbest_position: x.clone(),
                position: x,
                pbest_fitness: f,
            })
            .collect();
        let mut swarm = Self {
            gbest_position: particles[0].pbest_position.clone(),
            gbest_fitness: particles[0].pbest_fitness,
            particles,
            generation: 0,
            max_generation,
            c1: sched.c1_init,
            c2: sched.c2_init,
            bounds,
            seed,
            rng,
        };
        swarm.refresh_gbest();
        Ok(swarm)
    }

    fn refresh_gbest(&mut self) {
        // strict comparison keeps the earliest particle on ties
        for p in &self.particles {
            if p.pbest_fitness < self.gbest_fitness {
                self.gbest_fitness = p.pbest_fitness;
                self.gbest_position = p.pbest_position.clone();
            }
        }
    }

    pub fn is_finished(&self) -> bool {
        self.generation >= self.max_generation
    }
}

/// Advances every particle by one generation. Random coefficients are drawn
/// up front so the stream does not depend on evaluation order.
pub fn pso_step<F: Fitness + ?Sized>(swarm: &mut Swarm, sched: &PsoSchedule, fitness: &F) -> Result<(), PsoError> {
    if swarm.is_finished() {
        return Err(PsoError::Generation {
            g: swarm.generation + 1,
            big_g: swarm.max_generation,
        });
    }
    let g = swarm.generation + 1;
    let big_g = swarm.max_generation;
    let omega = inertia_weight(g, big_g, sched)?;
    let draws: Vec<(f64, f64)> = swarm.particles.iter().map(|_| (swarm.rng.random(), swarm.rng.random())).collect();
    let (c1, c2) = (swarm.c1, swarm.c2);
    let b = &swarm.bounds;
    for (p, (r1, r2)) in swarm.particles.iter_mut().zip(&draws) {
        for k in 0..p.position.len() {
            let vmax = sched.velocity_fraction * (b.upper[k] - b.lower[k]);
            let x = p.position[k];
            let v = omega * p.velocity[k] + c1 * r1 * (p.pbest_position[k] - x) + c2 * r2 * (swarm.gbest_position[k] - x);
            let v = v.clamp(-vmax, vmax);
            let moved = x + v;
            if moved < b.lower[k] || moved > b.upper[k] {
                p.position[k] = moved.clamp(b.lower[k], b.upper[k]);
                p.velocity[k] = 0.0;
            } else {
                p.position[k] = moved;
                p.velocity[k] = v;
            }
        }
    }
    let positions: Vec<Vec<f64>> = swarm.particles.iter().map(|p| p.position.clone()).collect();
    let costs = evaluate_all(&positions, fitness);
    for (p, f) in swarm.particles.iter_mut().zip(costs) {
        if f < p.pbest_fitness {
            p.pbest_fitness = f;
            p.pbest_position = p.position.clone();
        }
    }
    swarm.refresh_gbest();
    let (c1n, c2n) = acceleration_update(c1, c2, g, big_g, sched)?;
    swarm.c1 = c1n;
    swarm.c2 = c2n;
    swarm.generation = g;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoResult {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    /// Best fitness after each generation, starting with the initial population.
    pub trace: Vec<f64>,
    pub seed: u64,
    pub evaluations: usize,
}

/// Runs `generations` generations (the initial population counts as the
/// first) and returns the best point found.
pub fn minimize<F: Fitness + ?Sized>(
    fitness: &F,
    sched: &PsoSchedule,
    bounds: Bounds,
    population: usize,
    generations: usize,
    seed: u64,
) -> Result<PsoResult, PsoError> {
    if population < 2 {
        return Err(PsoError::Config("population must be at least 2".into()));
    }
    if generations < 1 {
        return Err(PsoError::Config("generations must be at least 1".into()));
    }
    let last = generations - 1;
    let mut swarm = Swarm::new(bounds, population, last.max(1), sched, fitness, seed)?;
    let mut trace = vec![swarm.gbest_fitness];
    for _ in 0..last {
        pso_step(&mut swarm, sched, fitness)?;
        trace.push(swarm.gbest_fitness);
    }
    Ok(PsoResult {
        best_position: swarm.gbest_position,
        best_fitness: swarm.gbest_fitness,
        trace,
        seed,
        evaluations: population * generations,
    })
}
