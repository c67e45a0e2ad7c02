//! Particle swarm optimization over mixed continuous/integer/categorical
//! spaces, plus the composite cost and the inverse-time learning-rate schedule.
//!
//! Minimization convention throughout. Integer and categorical dimensions are
//! optimised as continuous coordinates and rounded when decoded.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::{exec, seeded_rng, Error, Result, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Dimension {
    Continuous { lo: f64, hi: f64 },
    Integer { lo: i64, hi: i64 },
    Categorical { options: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedDimension {
    pub name: String,
    #[serde(flatten)]
    pub dim: Dimension,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParamValue {
    Real(f64),
    Int(i64),
    Choice(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub dims: Vec<NamedDimension>,
}

impl Dimension {
    /// Bounds of the continuous relaxation. Integer and categorical values
    /// get equal-width cells of width one around each admissible value.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Dimension::Continuous { lo, hi } => (*lo, *hi),
            Dimension::Integer { lo, hi } => (*lo as f64 - 0.5, *hi as f64 + 0.5),
            Dimension::Categorical { options } => (-0.5, options.len() as f64 - 0.5),
        }
    }

    pub fn decode(&self, x: f64) -> ParamValue {
        match self {
            Dimension::Continuous { lo, hi } => ParamValue::Real(x.clamp(*lo, *hi)),
            Dimension::Integer { lo, hi } => ParamValue::Int((x.round() as i64).clamp(*lo, *hi)),
            Dimension::Categorical { options } => {
                let i = (x.round().max(0.0) as usize).min(options.len() - 1);
                ParamValue::Choice(options[i].clone())
            }
        }
    }

    /// Continuous coordinate representing `value`, if admissible.
    pub fn encode(&self, value: &ParamValue) -> Option<f64> {
        match (self, value) {
            (Dimension::Continuous { lo, hi }, ParamValue::Real(v)) => Some(v.clamp(*lo, *hi)),
            (Dimension::Continuous { lo, hi }, ParamValue::Int(v)) => Some((*v as f64).clamp(*lo, *hi)),
            (Dimension::Integer { lo, hi }, ParamValue::Int(v)) => Some((*v).clamp(*lo, *hi) as f64),
            (Dimension::Integer { lo, hi }, ParamValue::Real(v)) => {
                Some((v.round() as i64).clamp(*lo, *hi) as f64)
            }
            (Dimension::Categorical { options }, ParamValue::Choice(s)) => {
                options.iter().position(|o| o == s).map(|i| i as f64)
            }
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Dimension::Continuous { lo, hi } if !(lo < hi) => {
                Err(Error::Config(format!("continuous bounds need lo < hi, got [{lo}, {hi}]")))
            }
            Dimension::Integer { lo, hi } if lo >= hi => {
                Err(Error::Config(format!("integer bounds need lo < hi, got [{lo}, {hi}]")))
            }
            Dimension::Categorical { options } if options.is_empty() => {
                Err(Error::Config("categorical dimension has no options".into()))
            }
            _ => Ok(()),
        }
    }
}

impl SearchSpace {
    pub fn new(dims: Vec<NamedDimension>) -> Result<Self> {
        let space = SearchSpace { dims };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::Config("search space has no dimensions".into()));
        }
        self.dims.iter().try_for_each(|d| d.dim.validate())
    }

    /// A purely continuous box, used for benchmark functions.
    pub fn continuous_box(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(
            (0..dim)
                .map(|i| NamedDimension {
                    name: format!("x{i}"),
                    dim: Dimension::Continuous { lo, hi },
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.dims.iter().map(|d| d.dim.bounds()).collect()
    }

    pub fn decode(&self, position: &[f64]) -> Vec<ParamValue> {
        self.dims
            .iter()
            .zip(position)
            .map(|(d, &x)| d.dim.decode(x))
            .collect()
    }
}

/// PSO coefficients. Defaults are the constriction-equivalent constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoParams {
    pub omega: f64,
    pub c1: f64,
    pub c2: f64,
    /// Velocity cap as a fraction of each dimension's range.
    pub vmax_fraction: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams {
            omega: 0.729,
            c1: 1.49445,
            c2: 1.49445,
            vmax_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    pub fitness: f64,
    rng: Rng,
}

/// Velocity rule with explicit random coefficients `r1`, `r2` per dimension.
pub fn velocity_update(
    velocity: &[f64],
    position: &[f64],
    personal_best: &[f64],
    global_best: &[f64],
    params: &PsoParams,
    r1: &[f64],
    r2: &[f64],
) -> Vec<f64> {
    (0..velocity.len())
        .map(|d| {
            params.omega * velocity[d]
                + params.c1 * r1[d] * (personal_best[d] - position[d])
                + params.c2 * r2[d] * (global_best[d] - position[d])
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    pub global_best: Vec<f64>,
    pub global_best_fitness: f64,
    pub params: PsoParams,
    bounds: Vec<(f64, f64)>,
    vmax: Vec<f64>,
}

fn sanitize(f: f64) -> f64 {
    if f.is_nan() {
        log::warn!("fitness returned NaN; treated as +inf");
        f64::INFINITY
    } else {
        f
    }
}

impl Swarm {
    /// Random initial swarm. Positions listed in `seeds` replace the first
    /// particles' random positions, clamped to bounds.
    pub fn init<F>(
        space: &SearchSpace,
        n_particles: usize,
        params: PsoParams,
        seed: u64,
        seeds: &[Vec<f64>],
        fitness: &F,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        space.validate()?;
        if n_particles == 0 {
            return Err(Error::pre("swarm needs at least one particle"));
        }
        let bounds = space.bounds();
        let vmax: Vec<f64> = bounds
            .iter()
            .map(|(lo, hi)| params.vmax_fraction * (hi - lo))
            .collect();
        let mut particles = Vec::with_capacity(n_particles);
        for i in 0..n_particles {
            let mut rng = seeded_rng(seed, i as u64 + 1);
            let mut position: Vec<f64> = bounds
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..=hi))
                .collect();
            if let Some(s) = seeds.get(i) {
                if s.len() != bounds.len() {
                    return Err(Error::dims("seed particle", bounds.len(), s.len()));
                }
                position = s
                    .iter()
                    .zip(&bounds)
                    .map(|(x, &(lo, hi))| x.clamp(lo, hi))
                    .collect();
            }
            let velocity = vmax.iter().map(|&v| rng.random_range(-v..=v)).collect();
            particles.push(Particle {
                best_position: position.clone(),
                position,
                velocity,
                best_fitness: f64::INFINITY,
                fitness: f64::INFINITY,
                rng,
            });
        }
        let mut swarm = Swarm {
            particles,
            global_best: Vec::new(),
            global_best_fitness: f64::INFINITY,
            params,
            bounds,
            vmax,
        };
        swarm.evaluate(fitness);
        if swarm.global_best.is_empty() {
            swarm.global_best = swarm.particles[0].position.clone();
        }
        Ok(swarm)
    }

    /// Evaluates current positions in parallel, then updates bests in
    /// particle order so the result does not depend on scheduling.
    fn evaluate<F>(&mut self, fitness: &F)
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let positions: Vec<Vec<f64>> = self.particles.iter().map(|p| p.position.clone()).collect();
        let values = exec::map(&positions, |x| sanitize(fitness(x)));
        for (p, f) in self.particles.iter_mut().zip(values) {
            p.fitness = f;
            if f < p.best_fitness {
                p.best_fitness = f;
                p.best_position = p.position.clone();
            }
            if f < self.global_best_fitness {
                self.global_best_fitness = f;
                self.global_best = p.position.clone();
            }
        }
    }

    /// One velocity/position update of every particle followed by evaluation.
    pub fn step<F>(&mut self, fitness: &F)
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let dim = self.bounds.len();
        for p in &mut self.particles {
            let r1: Vec<f64> = (0..dim).map(|_| p.rng.random::<f64>()).collect();
            let r2: Vec<f64> = (0..dim).map(|_| p.rng.random::<f64>()).collect();
            let v = velocity_update(
                &p.velocity,
                &p.position,
                &p.best_position,
                &self.global_best,
                &self.params,
                &r1,
                &r2,
            );
            for d in 0..dim {
                p.velocity[d] = v[d].clamp(-self.vmax[d], self.vmax[d]);
                let (lo, hi) = self.bounds[d];
                p.position[d] = (p.position[d] + p.velocity[d]).clamp(lo, hi);
            }
        }
        self.evaluate(fitness);
    }

    pub fn mean_fitness(&self) -> f64 {
        let finite: Vec<f64> = self
            .particles
            .iter()
            .map(|p| p.fitness)
            .filter(|f| f.is_finite())
            .collect();
        if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub best_position: Vec<f64>,
    pub best_params: Vec<ParamValue>,
    pub best_fitness: f64,
    /// Row 0 is the initial evaluation, then one row per iteration.
    pub trace: Vec<TraceRow>,
}

pub fn write_trace_csv<W: std::io::Write>(w: &mut W, trace: &[TraceRow]) -> std::io::Result<()> {
    writeln!(w, "iter,best_fitness,mean_fitness")?;
    for r in trace {
        writeln!(w, "{},{},{}", r.iter, r.best_fitness, r.mean_fitness)?;
    }
    Ok(())
}

/// Runs initialisation plus `n_iters` swarm steps.
pub fn optimize<F>(
    space: &SearchSpace,
    fitness: F,
    n_particles: usize,
    n_iters: usize,
    seed: u64,
    params: PsoParams,
) -> Result<OptimizeResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    optimize_seeded(space, fitness, n_particles, n_iters, seed, params, &[])
}

/// Like [`optimize`], with explicit starting positions for the first particles.
pub fn optimize_seeded<F>(
    space: &SearchSpace,
    fitness: F,
    n_particles: usize,
    n_iters: usize,
    seed: u64,
    params: PsoParams,
    seeds: &[Vec<f64>],
) -> Result<OptimizeResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut swarm = Swarm::init(space, n_particles, params, seed, seeds, &fitness)?;
    let mut trace = vec![TraceRow {
        iter: 0,
        best_fitness: swarm.global_best_fitness,
        mean_fitness: swarm.mean_fitness(),
    }];
    for it in 1..=n_iters {
        swarm.step(&fitness);
        trace.push(TraceRow {
            iter: it,
            best_fitness: swarm.global_best_fitness,
            mean_fitness: swarm.mean_fitness(),
        });
    }
    if !swarm.global_best_fitness.is_finite() && swarm.global_best_fitness > 0.0 {
        return Err(Error::Numerical("every fitness evaluation failed".into()));
    }
    Ok(OptimizeResult {
        best_params: space.decode(&swarm.global_best),
        best_position: swarm.global_best,
        best_fitness: swarm.global_best_fitness,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompositeCostWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for CompositeCostWeights {
    fn default() -> Self {
        CompositeCostWeights {
            alpha: 1.0 / 3.0,
            beta: 1.0 / 3.0,
            gamma: 1.0 / 3.0,
        }
    }
}

impl CompositeCostWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.gamma];
        if all.iter().any(|w| *w < 0.0 || !w.is_finite()) || all.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config(
                "composite cost weights must be nonnegative with a positive sum".into(),
            ));
        }
        Ok(())
    }
}

/// Weighted sum of reconstruction, clustering and hierarchical losses.
pub fn composite_cost(l_rec: f64, l_clus: f64, l_hier: f64, w: &CompositeCostWeights) -> f64 {
    w.alpha * l_rec + w.beta * l_clus + w.gamma * l_hier
}

/// Inverse-time decay `eta0 / (1 + alpha * t)`.
pub fn adaptive_lr(eta0: f64, alpha: f64, t: u64) -> f64 {
    eta0 / (1.0 + alpha * t as f64)
}
