// SPDX-License-Identifier: Apache-2.0

//! Differential evolution over protocol parameters.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{JointState, ModeState, QubitInit};
use crate::metrics;
use crate::protocol::{
    apply_ideal, build_cubic_protocol, build_quartic_protocol, build_simultaneous_variant, CubicParams,
    CubicRound, ProtocolSpec, QuarticParams, SimultaneousParams, Simulator, TargetGate,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub names: Vec<String>,
    pub bounds: Vec<(f64, f64)>,
}

impl SearchSpace {
    pub fn new(entries: Vec<(String, f64, f64)>) -> Result<Self> {
        for (n, lo, hi) in &entries {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Config(format!("invalid bounds for {n}: [{lo}, {hi}]")));
            }
        }
        Ok(Self {
            names: entries.iter().map(|e| e.0.clone()).collect(),
            bounds: entries.iter().map(|e| (e.1, e.2)).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.bounds).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Reflect a coordinate back into its interval.
    fn reflect(&self, i: usize, v: f64) -> f64 {
        let (lo, hi) = self.bounds[i];
        let w = hi - lo;
        if w == 0.0 {
            return lo;
        }
        let mut y = (v - lo).rem_euclid(2.0 * w);
        if y > w {
            y = 2.0 * w - y;
        }
        lo + y
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeConfig {
    #[serde(default = "default_population")]
    pub population: usize,
    #[serde(default = "default_crossover")]
    pub crossover: f64,
    /// Differential weight drawn uniformly from this range each generation.
    #[serde(default = "default_mutation")]
    pub mutation: (f64, f64),
    #[serde(default = "default_generations")]
    pub max_generations: usize,
    /// Improvements of the best loss below this count as stalls.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_population() -> usize {
    40
}
fn default_crossover() -> f64 {
    0.7
}
fn default_mutation() -> (f64, f64) {
    (0.5, 1.0)
}
fn default_generations() -> usize {
    1000
}
fn default_tol() -> f64 {
    1e-6
}
fn default_patience() -> usize {
    25
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population: default_population(),
            crossover: default_crossover(),
            mutation: default_mutation(),
            max_generations: default_generations(),
            tol: default_tol(),
            patience: default_patience(),
            seed: 0,
        }
    }
}

/// Resumable optimiser state; the random stream of each generation is derived from the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeState {
    pub generation: usize,
    pub population: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
    pub stall: usize,
    pub history: Vec<(usize, f64)>,
    pub done: bool,
}

impl DeState {
    pub fn best_index(&self) -> usize {
        let mut b = 0;
        for (i, l) in self.losses.iter().enumerate() {
            if *l < self.losses[b] {
                b = i;
            }
        }
        b
    }

    pub fn best(&self) -> (&[f64], f64) {
        let b = self.best_index();
        (&self.population[b], self.losses[b])
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeResult {
    pub best: Vec<f64>,
    pub best_loss: f64,
    pub generations: usize,
    pub evaluations: usize,
    pub history: Vec<(usize, f64)>,
    pub converged: bool,
}

fn generation_rng(seed: u64, generation: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(generation as u64);
    rng
}

fn validate(space: &SearchSpace, cfg: &DeConfig) -> Result<()> {
    if space.dim() == 0 {
        return Err(Error::Config("empty search space".into()));
    }
    if cfg.population < 4 {
        return Err(Error::Config("population must be at least 4".into()));
    }
    if !(0.0..=1.0).contains(&cfg.crossover) {
        return Err(Error::Config("crossover must lie in [0, 1]".into()));
    }
    if !(cfg.mutation.0 > 0.0 && cfg.mutation.0 <= cfg.mutation.1) {
        return Err(Error::Config("invalid mutation range".into()));
    }
    Ok(())
}

fn evaluate_all<F>(loss: &F, xs: &[Vec<f64>]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    xs.par_iter()
        .map(|x| {
            let l = loss(x);
            if l.is_nan() {
                f64::INFINITY
            } else {
                l
            }
        })
        .collect()
}

/// Initial population: uniform in the bounds, optionally seeded with given points.
pub fn initialize<F>(loss: &F, space: &SearchSpace, cfg: &DeConfig, seeds: &[Vec<f64>]) -> Result<DeState>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    validate(space, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut population: Vec<Vec<f64>> = Vec::with_capacity(cfg.population);
    for s in seeds.iter().take(cfg.population) {
        if s.len() != space.dim() {
            return Err(Error::Dimension {
                expected: space.dim(),
                got: s.len(),
            });
        }
        population.push(s.iter().enumerate().map(|(i, v)| space.reflect(i, *v)).collect());
    }
    while population.len() < cfg.population {
        population.push(
            space
                .bounds
                .iter()
                .map(|&(lo, hi)| if hi > lo { rng.random_range(lo..hi) } else { lo })
                .collect(),
        );
    }
    let losses = evaluate_all(loss, &population);
    let mut state = DeState {
        generation: 0,
        population,
        losses,
        stall: 0,
        history: Vec::new(),
        done: false,
    };
    let best = state.best().1;
    state.history.push((0, best));
    Ok(state)
}

/// One rand/1/bin generation with dithered weight and greedy selection.
pub fn step<F>(loss: &F, space: &SearchSpace, cfg: &DeConfig, state: &mut DeState)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let np = state.population.len();
    let dim = space.dim();
    let gen = state.generation + 1;
    let mut rng = generation_rng(cfg.seed, gen);
    let f = if cfg.mutation.1 > cfg.mutation.0 {
        rng.random_range(cfg.mutation.0..cfg.mutation.1)
    } else {
        cfg.mutation.0
    };
    let trials: Vec<Vec<f64>> = (0..np)
        .map(|i| {
            let mut pick = || loop {
                let k = rng.random_range(0..np);
                if k != i {
                    break k;
                }
            };
            let (a, mut b, mut c) = (pick(), pick(), pick());
            while b == a {
                b = pick();
            }
            while c == a || c == b {
                c = pick();
            }
            let jrand = rng.random_range(0..dim);
            (0..dim)
                .map(|j| {
                    if j == jrand || rng.random::<f64>() < cfg.crossover {
                        let v = state.population[a][j] + f * (state.population[b][j] - state.population[c][j]);
                        space.reflect(j, v)
                    } else {
                        state.population[i][j]
                    }
                })
                .collect()
        })
        .collect();
    let trial_losses = evaluate_all(loss, &trials);
    let before = state.best().1;
    for (i, (t, l)) in trials.into_iter().zip(trial_losses).enumerate() {
        if l <= state.losses[i] {
            state.population[i] = t;
            state.losses[i] = l;
        }
    }
    let after = state.best().1;
    state.generation = gen;
    state.history.push((gen, after));
    if before - after < cfg.tol {
        state.stall += 1;
    } else {
        state.stall = 0;
    }
    if state.stall >= cfg.patience || gen >= cfg.max_generations {
        state.done = true;
    }
}

/// Run to termination, calling `on_generation` after every generation (for checkpoints and logs).
pub fn run_from<F>(
    loss: &F,
    space: &SearchSpace,
    cfg: &DeConfig,
    mut state: DeState,
    mut on_generation: impl FnMut(&DeState) -> Result<()>,
) -> Result<DeResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    while !state.done {
        step(loss, space, cfg, &mut state);
        on_generation(&state)?;
    }
    let (best, best_loss) = state.best();
    Ok(DeResult {
        best: best.to_vec(),
        best_loss,
        generations: state.generation,
        evaluations: state.population.len() * (state.generation + 1),
        converged: state.stall >= cfg.patience,
        history: state.history.clone(),
    })
}

pub fn differential_evolution<F>(loss: &F, space: &SearchSpace, cfg: &DeConfig) -> Result<DeResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let state = initialize(loss, space, cfg, &[])?;
    run_from(loss, space, cfg, state, |_| Ok(()))
}

/// Bounded Nelder-Mead refinement from `x0`; coordinates are reflected into the box.
pub fn nelder_mead<F>(loss: &F, space: &SearchSpace, x0: &[f64], step: f64, max_evals: usize, tol: f64) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x0.len();
    let clamp = |x: Vec<f64>| -> Vec<f64> { x.iter().enumerate().map(|(i, v)| space.reflect(i, *v)).collect() };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut x = x0.to_vec();
        let (lo, hi) = space.bounds[i];
        let h = step * (hi - lo).max(1e-12);
        x[i] = if x[i] + h <= hi { x[i] + h } else { x[i] - h };
        simplex.push(clamp(x));
    }
    let mut values = evaluate_all(loss, &simplex);
    let mut evals = n + 1;
    while evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if values[n] - values[0] < tol {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { clamp((0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect()) };
        let xr = along(-1.0);
        let fr = loss(&xr);
        evals += 1;
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = loss(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let x = along(-0.5);
                let f = loss(&x);
                (x, f)
            } else {
                let x = along(0.5);
                let f = loss(&x);
                (x, f)
            };
            evals += 1;
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for k in 1..=n {
                    simplex[k] = clamp((0..n).map(|j| simplex[0][j] + 0.5 * (simplex[k][j] - simplex[0][j])).collect());
                }
                let shrunk = evaluate_all(loss, &simplex[1..]);
                values[1..].copy_from_slice(&shrunk);
                evals += n;
            }
        }
    }
    let b = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    (simplex[b].clone(), values[b])
}

/// Local refinement applied to the best DE point: repeated Nelder-Mead restarts until one stops helping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolishConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Initial simplex size relative to each bound width.
    #[serde(default = "polish_step")]
    pub step: f64,
    #[serde(default = "polish_evals")]
    pub max_evals: usize,
    #[serde(default = "polish_restarts")]
    pub restarts: usize,
    #[serde(default = "polish_tol")]
    pub tol: f64,
}

fn yes() -> bool {
    true
}
fn polish_step() -> f64 {
    0.02
}
fn polish_evals() -> usize {
    20000
}
fn polish_restarts() -> usize {
    6
}
fn polish_tol() -> f64 {
    1e-10
}

impl Default for PolishConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            step: polish_step(),
            max_evals: polish_evals(),
            restarts: polish_restarts(),
            tol: polish_tol(),
        }
    }
}

pub fn polish<F>(loss: &F, space: &SearchSpace, x0: &[f64], cfg: &PolishConfig) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let start = loss(x0);
    if !cfg.enabled {
        return (x0.to_vec(), start);
    }
    let (mut x, mut l) = nelder_mead(loss, space, x0, cfg.step, cfg.max_evals, cfg.tol);
    if start < l {
        x = x0.to_vec();
        l = start;
    }
    let mut step = cfg.step / 2.0;
    for _ in 0..cfg.restarts {
        let (x2, l2) = nelder_mead(loss, space, &x, step, cfg.max_evals, cfg.tol * 1e-2);
        if l2 >= l - 1e-9 {
            if l2 < l {
                x = x2;
                l = l2;
            }
            break;
        }
        x = x2;
        l = l2;
        step = (step / 2.0).max(1e-4);
    }
    (x, l)
}

/// How a flat parameter vector maps onto a gate sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Template {
    /// Per round `(beta, t3, t1p, t2)`; with `ideal_squeeze` the last entry is the squeezing `r` instead.
    Cubic {
        rounds: usize,
        #[serde(default)]
        pre_squeeze: bool,
        #[serde(default)]
        ideal_squeeze: bool,
    },
    /// `(r_pre, t2, phi2, t4, phi4, theta, r_post)`.
    Quartic,
    /// `(beta, t, t2)`.
    Simultaneous,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSettings {
    pub time: (f64, f64),
    pub squeeze: (f64, f64),
    pub beta: (f64, f64),
    pub angle: (f64, f64),
}

impl Default for BoundSettings {
    fn default() -> Self {
        Self {
            time: (0.0, 300.0),
            squeeze: (-2.0, 2.0),
            beta: (-5.0, 2.0),
            angle: (-std::f64::consts::PI, std::f64::consts::PI),
        }
    }
}

/// Base parameters that the template fills in.
#[derive(Clone, Debug, PartialEq)]
pub enum ProtocolBase {
    Cubic(CubicParams),
    Quartic {
        params: crate::sideband::SystemParams,
        options: crate::sideband::HamiltonianOptions,
        omega2: f64,
        omega4: f64,
    },
    Simultaneous {
        params: crate::sideband::SystemParams,
        options: crate::sideband::HamiltonianOptions,
        base: SimultaneousParams,
    },
}

impl Template {
    pub fn search_space(&self, b: &BoundSettings) -> Result<SearchSpace> {
        let mut e = Vec::new();
        match self {
            Template::Cubic {
                rounds,
                pre_squeeze,
                ideal_squeeze,
            } => {
                if *rounds == 0 {
                    return Err(Error::Config("at least one round is required".into()));
                }
                if *pre_squeeze {
                    e.push(("r_pre".to_string(), b.squeeze.0, b.squeeze.1));
                }
                for n in 1..=*rounds {
                    e.push((format!("beta[{n}]"), b.beta.0, b.beta.1));
                    e.push((format!("t3[{n}]"), b.time.0, b.time.1));
                    e.push((format!("t1p[{n}]"), b.time.0, b.time.1));
                    if *ideal_squeeze {
                        e.push((format!("r[{n}]"), b.squeeze.0, b.squeeze.1));
                    } else {
                        e.push((format!("t2[{n}]"), b.time.0, b.time.1));
                    }
                }
            }
            Template::Quartic => {
                e.push(("r_pre".into(), b.squeeze.0, b.squeeze.1));
                e.push(("t2".into(), b.time.0, b.time.1));
                e.push(("phi2".into(), b.angle.0, b.angle.1));
                e.push(("t4".into(), b.time.0, b.time.1));
                e.push(("phi4".into(), b.angle.0, b.angle.1));
                e.push(("theta".into(), b.angle.0, b.angle.1));
                e.push(("r_post".into(), b.squeeze.0, b.squeeze.1));
            }
            Template::Simultaneous => {
                e.push(("beta".into(), b.beta.0, b.beta.1));
                e.push(("t".into(), b.time.0.max(1e-3), b.time.1));
                e.push(("t2".into(), b.time.0, b.time.1));
            }
        }
        SearchSpace::new(e)
    }

    pub fn build(&self, base: &ProtocolBase, x: &[f64]) -> Result<ProtocolSpec> {
        match (self, base) {
            (
                Template::Cubic {
                    rounds,
                    pre_squeeze,
                    ideal_squeeze,
                },
                ProtocolBase::Cubic(p),
            ) => {
                let off = usize::from(*pre_squeeze);
                if x.len() != off + 4 * rounds {
                    return Err(Error::Dimension {
                        expected: off + 4 * rounds,
                        got: x.len(),
                    });
                }
                let mut p = p.clone();
                p.rounds = (0..*rounds)
                    .map(|n| {
                        let v = &x[off + 4 * n..off + 4 * n + 4];
                        CubicRound {
                            t1: 0.0,
                            beta: v[0],
                            t3: v[1],
                            t1p: v[2],
                            t2: if *ideal_squeeze { 0.0 } else { v[3] },
                            r: if *ideal_squeeze { v[3] } else { 0.0 },
                        }
                    })
                    .collect();
                build_cubic_protocol(&p, if *pre_squeeze { x[0] } else { 0.0 })
            }
            (
                Template::Quartic,
                ProtocolBase::Quartic {
                    params,
                    options,
                    omega2,
                    omega4,
                },
            ) => {
                if x.len() != 7 {
                    return Err(Error::Dimension { expected: 7, got: x.len() });
                }
                let q = QuarticParams {
                    r_pre: x[0],
                    t2: x[1],
                    phi2: x[2],
                    t4: x[3],
                    phi4: x[4],
                    theta: x[5],
                    r_post: x[6],
                    omega2: *omega2,
                    omega4: *omega4,
                };
                build_quartic_protocol(*params, *options, &q)
            }
            (Template::Simultaneous, ProtocolBase::Simultaneous { params, options, base }) => {
                if x.len() != 3 {
                    return Err(Error::Dimension { expected: 3, got: x.len() });
                }
                let s = SimultaneousParams {
                    beta: x[0],
                    t: x[1],
                    t2: x[2],
                    ..*base
                };
                build_simultaneous_variant(*params, *options, &s)
            }
            _ => Err(Error::Config("template does not match the protocol base".into())),
        }
    }
}

/// A weighted input and the pure target it should be mapped to.
#[derive(Clone, Debug)]
pub struct ObjectiveCase {
    pub weight: f64,
    pub input: ModeState,
    pub target: ModeState,
}

/// Loss `1 - sum_i w_i F_i / sum_i w_i` over a set of inputs.
pub struct Objective<'a> {
    pub sim: &'a Simulator,
    pub template: Template,
    pub base: ProtocolBase,
    pub cases: Vec<ObjectiveCase>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Evaluation {
    pub fidelities: Vec<f64>,
    pub mean_fidelity: f64,
    pub total_time: f64,
}

impl<'a> Objective<'a> {
    /// Cases with targets `exp(i zeta Q^j)|input>`.
    pub fn for_target(
        sim: &'a Simulator,
        template: Template,
        base: ProtocolBase,
        target: &TargetGate,
        inputs: Vec<(f64, ModeState)>,
    ) -> Self {
        let cases = inputs
            .into_iter()
            .map(|(weight, input)| ObjectiveCase {
                weight,
                target: apply_ideal(&sim.ops, target, &input),
                input,
            })
            .collect();
        Self {
            sim,
            template,
            base,
            cases,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let spec = self.template.build(&self.base, x)?;
        self.evaluate_spec(&spec)
    }

    pub fn evaluate_spec(&self, spec: &ProtocolSpec) -> Result<Evaluation> {
        let mut fidelities = Vec::with_capacity(self.cases.len());
        for c in &self.cases {
            let out = self.sim.run(spec, &c.input)?;
            let f = match &c.target {
                ModeState::Pure(t) => metrics::mode_fidelity(&out, t)?,
                m => metrics::fidelity(&out.reduced_mode(), m)?,
            };
            fidelities.push(f);
        }
        let wsum: f64 = self.cases.iter().map(|c| c.weight).sum();
        let mean = self.cases.iter().zip(&fidelities).map(|(c, f)| c.weight * f).sum::<f64>() / wsum;
        Ok(Evaluation {
            fidelities,
            mean_fidelity: mean,
            total_time: spec.total_time(),
        })
    }

    /// Loss for the optimiser; failed simulations (for example leakage) count as zero fidelity.
    pub fn loss(&self, x: &[f64]) -> f64 {
        match self.evaluate(x) {
            Ok(e) => 1.0 - e.mean_fidelity,
            Err(_) => 1.0,
        }
    }
}

/// Fidelity statistics under independent relative perturbations of every parameter.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerturbationSummary {
    pub trials: usize,
    pub magnitude: f64,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub fidelities: Vec<f64>,
}

pub fn perturbation_study(
    objective: &Objective,
    x: &[f64],
    magnitude: f64,
    trials: usize,
    seed: u64,
) -> Result<PerturbationSummary> {
    if trials == 0 {
        return Err(Error::Config("at least one trial is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<Vec<f64>> = (0..trials)
        .map(|_| {
            x.iter()
                .map(|v| v * (1.0 + magnitude * (2.0 * rng.random::<f64>() - 1.0)))
                .collect()
        })
        .collect();
    let fidelities: Vec<f64> = samples
        .par_iter()
        .map(|s| objective.evaluate(s).map(|e| e.mean_fidelity).unwrap_or(0.0))
        .collect();
    let min = fidelities.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = fidelities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = fidelities.iter().sum::<f64>() / trials as f64;
    Ok(PerturbationSummary {
        trials,
        magnitude,
        min,
        mean,
        max,
        fidelities,
    })
}

/// Output of the protocol for a single input with the template's qubit preparation.
pub fn run_single(sim: &Simulator, spec: &ProtocolSpec, input: &ModeState) -> Result<JointState> {
    sim.apply(spec, &JointState::product(spec.qubit, input))
}

pub fn default_qubit() -> QubitInit {
    QubitInit::PlusY
}
