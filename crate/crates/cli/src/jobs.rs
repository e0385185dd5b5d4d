// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use sbgate::config::ProtocolDoc;
use sbgate::fock::HilbertConfig;
use sbgate::linalg::C64;
use sbgate::metrics::{
    classical_threshold, cuts_to_csv, density_diff_map, fmt12, minimize_variance, qng_threshold, wigner,
    wigner_cut, GridSpec, LineCut, ScanSettings, VarianceScan,
};
use sbgate::noise::NoiseModel;
use sbgate::optimizer::{
    initialize, polish, run_from, BoundSettings, DeConfig, DeState, PolishConfig, SearchSpace, Template,
};
use sbgate::sideband::HamiltonianMode;
use sbgate::study::{self, Context, SWEEP_HEADER};

use crate::output::{write_json, write_json_atomic, write_text};
use crate::{Flags, ModeArg};

/// A protocol given inline or as a path relative to the job file.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum ProtocolRef {
    Path(PathBuf),
    Inline(Box<ProtocolDoc>),
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn resolve(r: &ProtocolRef, flags: &Flags) -> Result<ProtocolDoc> {
    let mut doc = match r {
        ProtocolRef::Inline(d) => (**d).clone(),
        ProtocolRef::Path(p) => {
            let base = flags.config.parent().unwrap_or(Path::new("."));
            let path = base.join(p);
            ProtocolDoc::load(&path).with_context(|| format!("loading protocol {}", path.display()))?
        }
    };
    if let Some(d) = flags.dim {
        let h = doc.hilbert;
        doc.hilbert = HilbertConfig::new(d, h.leakage_buffer.min(d / 4), h.leakage_tol)?;
    }
    if let Some(m) = flags.mode {
        doc.mode = match (m, doc.mode) {
            (ModeArg::Full, _) => HamiltonianMode::Full,
            (ModeArg::Ld, HamiltonianMode::Ld(n)) => HamiltonianMode::Ld(n),
            (ModeArg::Ld, HamiltonianMode::Full) => HamiltonianMode::Ld(1),
        };
    }
    doc.validate()?;
    Ok(doc)
}

fn c(a: [f64; 2]) -> C64 {
    C64::new(a[0], a[1])
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    #[serde(default)]
    pub alpha: [f64; 2],
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

fn vacuum_input() -> Vec<InputSpec> {
    vec![InputSpec {
        alpha: [0.0, 0.0],
        weight: 1.0,
    }]
}

fn weighted(inputs: &[InputSpec]) -> Vec<(f64, C64)> {
    inputs.iter().map(|i| (i.weight, c(i.alpha))).collect()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedCut {
    pub name: String,
    pub cut: LineCut,
}

fn default_cuts() -> Vec<NamedCut> {
    vec![NamedCut {
        name: "p0".into(),
        cut: LineCut::Line {
            slope: 0.0,
            intercept: 0.0,
            from: -10.0,
            to: 10.0,
            samples: 401,
        },
    }]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateJob {
    pub protocol: ProtocolRef,
    #[serde(default)]
    pub alpha: [f64; 2],
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_cuts")]
    pub cuts: Vec<NamedCut>,
    #[serde(default)]
    pub variance: ScanSettings,
}

pub fn simulate(flags: &Flags) -> Result<()> {
    let job: SimulateJob = read_json(&flags.config)?;
    let ctx = Context::new(resolve(&job.protocol, flags)?)?;
    let (report, grid, out) = study::simulate_report(&ctx, c(job.alpha), &job.grid, &job.variance)?;
    let target_grid = wigner(&out.target, &job.grid)?;
    let mut cuts = Vec::new();
    for nc in &job.cuts {
        cuts.push((format!("{}_generated", nc.name), wigner_cut(&out.generated, &nc.cut)?));
        cuts.push((format!("{}_target", nc.name), wigner_cut(&out.target, &nc.cut)?));
    }
    write_text(&flags.out, "wigner.csv", &grid.to_csv())?;
    write_text(&flags.out, "wigner_target.csv", &target_grid.to_csv())?;
    write_text(&flags.out, "cuts.csv", &cuts_to_csv(&cuts))?;
    write_json(&flags.out, "report.json", &report)?;
    Ok(())
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeJob {
    #[serde(default)]
    pub protocol: Option<ProtocolRef>,
    /// Defaults to the free parameters of the protocol document.
    #[serde(default)]
    pub template: Option<Template>,
    #[serde(default)]
    pub bounds: BoundSettings,
    #[serde(default)]
    pub de: DeConfig,
    #[serde(default)]
    pub polish: PolishConfig,
    #[serde(default = "vacuum_input")]
    pub inputs: Vec<InputSpec>,
    /// Put the document's own parameters into the initial population.
    #[serde(default)]
    pub seed_with_protocol: bool,
    #[serde(default = "yes")]
    pub resume: bool,
    /// Self-test on a shifted sphere of this dimension instead of a protocol.
    #[serde(default)]
    pub sphere: Option<usize>,
}

fn yes() -> bool {
    true
}

#[derive(Serialize)]
struct BestReport {
    names: Vec<String>,
    x: Vec<f64>,
    loss: f64,
    de_loss: f64,
    fidelities: Vec<f64>,
    mean_fidelity: f64,
    total_time: f64,
    generations: usize,
    converged: bool,
}

fn history_csv(state: &DeState) -> String {
    let mut s = String::from("generation,best_loss\n");
    for (g, l) in &state.history {
        s.push_str(&format!("{g},{}\n", fmt12(*l)));
    }
    s
}

fn run_de<F>(loss: &F, space: &SearchSpace, cfg: &DeConfig, seeds: &[Vec<f64>], out: &Path, resume: bool) -> Result<DeState>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let ck = out.join("checkpoint.json");
    let state = if resume && ck.exists() {
        let mut s: DeState = read_json(&ck)?;
        if s.population.len() != cfg.population || s.population.iter().any(|x| x.len() != space.dim()) {
            bail!("checkpoint {} does not match the search space", ck.display());
        }
        s.done = s.stall >= cfg.patience || s.generation >= cfg.max_generations;
        s
    } else {
        let s = initialize(loss, space, cfg, seeds)?;
        write_json_atomic(out, "checkpoint.json", &s)?;
        s
    };
    let mut last = state.clone();
    run_from(loss, space, cfg, state, |s| {
        write_json_atomic(out, "checkpoint.json", s).map_err(|e| sbgate::Error::Config(e.to_string()))?;
        write_text(out, "history.csv", &history_csv(s)).map_err(|e| sbgate::Error::Config(e.to_string()))?;
        last = s.clone();
        Ok(())
    })?;
    write_text(out, "history.csv", &history_csv(&last))?;
    Ok(last)
}

pub fn optimize(flags: &Flags) -> Result<()> {
    let job: OptimizeJob = read_json(&flags.config)?;
    let mut cfg = job.de.clone();
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(n) = job.sphere {
        let entries = (0..n).map(|i| (format!("x{i}"), -5.0, 5.0)).collect();
        let space = SearchSpace::new(entries)?;
        let loss = |x: &[f64]| x.iter().map(|v| (v - 0.5).powi(2)).sum::<f64>();
        let state = run_de(&loss, &space, &cfg, &[], &flags.out, job.resume)?;
        let (x, de_loss) = state.best();
        let (xp, lp) = polish(&loss, &space, x, &job.polish);
        return write_json(
            &flags.out,
            "best.json",
            &BestReport {
                names: space.names.clone(),
                x: xp,
                loss: lp,
                de_loss,
                fidelities: vec![],
                mean_fidelity: f64::NAN,
                total_time: 0.0,
                generations: state.generation,
                converged: state.stall >= cfg.patience,
            },
        );
    }
    let pref = job.protocol.as_ref().ok_or_else(|| anyhow!("optimize needs a protocol or a sphere self-test"))?;
    let doc = resolve(pref, flags)?;
    let ctx = Context::new(doc.clone())?;
    let (own_template, base, own_x) = study::parametrize(&doc)?;
    let template = job.template.clone().unwrap_or(own_template.clone());
    let space = template.search_space(&job.bounds)?;
    let seeds = if job.seed_with_protocol && template == own_template {
        vec![own_x]
    } else {
        vec![]
    };
    let obj = study::objective(&ctx, template.clone(), base, &weighted(&job.inputs))?;
    let loss = |x: &[f64]| obj.loss(x);
    let state = run_de(&loss, &space, &cfg, &seeds, &flags.out, job.resume)?;
    let (x, de_loss) = state.best();
    let (xp, lp) = polish(&loss, &space, x, &job.polish);
    let eval = obj.evaluate(&xp)?;
    let best_doc = study::with_parameters(&doc, &template, &xp)?;
    write_json(&flags.out, "protocol.json", &best_doc)?;
    write_json(
        &flags.out,
        "best.json",
        &BestReport {
            names: space.names.clone(),
            x: xp,
            loss: lp,
            de_loss,
            fidelities: eval.fidelities,
            mean_fidelity: eval.mean_fidelity,
            total_time: eval.total_time,
            generations: state.generation,
            converged: state.stall >= cfg.patience,
        },
    )
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaRange {
    /// Unit direction of the sweep in the complex plane.
    #[serde(default = "imag_axis")]
    pub direction: [f64; 2],
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

fn imag_axis() -> [f64; 2] {
    [0.0, 1.0]
}

impl AlphaRange {
    fn values(&self) -> Vec<C64> {
        let d = c(self.direction);
        let d = if d.norm() > 0.0 { d / d.norm() } else { d };
        if self.points < 2 {
            return vec![d * self.from];
        }
        (0..self.points)
            .map(|i| d * (self.from + (self.to - self.from) * i as f64 / (self.points - 1) as f64))
            .collect()
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepJob {
    pub protocol: ProtocolRef,
    #[serde(default)]
    pub alphas: Vec<[f64; 2]>,
    #[serde(default)]
    pub range: Option<AlphaRange>,
    #[serde(default)]
    pub variance: ScanSettings,
}

#[derive(Serialize)]
struct SweepFailure {
    alpha: [f64; 2],
    error: String,
}

#[derive(Serialize)]
struct SweepSummary {
    rows: Vec<study::SweepRow>,
    failures: Vec<SweepFailure>,
    qng_crossing: Option<f64>,
}

pub fn sweep(flags: &Flags) -> Result<()> {
    let job: SweepJob = read_json(&flags.config)?;
    let ctx = Context::new(resolve(&job.protocol, flags)?)?;
    let mut alphas: Vec<C64> = job.alphas.iter().map(|a| c(*a)).collect();
    if let Some(r) = &job.range {
        alphas.extend(r.values());
    }
    if alphas.is_empty() {
        bail!("sweep needs alphas or a range");
    }
    let mut csv = format!("{SWEEP_HEADER},error\n");
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for a in alphas {
        match study::sweep_row(&ctx, a, &job.variance) {
            Ok(r) => {
                csv.push_str(&format!("{},\n", r.csv()));
                rows.push(r);
            }
            Err(e) => {
                let msg = e.to_string().replace([',', '\n'], ";");
                csv.push_str(&format!("{},{},{},NaN,NaN,NaN,NaN,NaN,{msg}\n", fmt12(a.re), fmt12(a.im), fmt12(a.norm())));
                failures.push(SweepFailure {
                    alpha: [a.re, a.im],
                    error: e.to_string(),
                });
            }
        }
    }
    write_text(&flags.out, "sweep.csv", &csv)?;
    let qng_crossing = study::qng_crossing(&rows);
    write_json(
        &flags.out,
        "sweep.json",
        &SweepSummary {
            rows,
            failures,
            qng_crossing,
        },
    )
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledNoise {
    pub label: String,
    pub noise: NoiseModel,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseJob {
    pub protocol: ProtocolRef,
    pub models: Vec<LabeledNoise>,
    #[serde(default = "origin")]
    pub alphas: Vec<[f64; 2]>,
}

fn origin() -> Vec<[f64; 2]> {
    vec![[0.0, 0.0]]
}

pub fn noise_study(flags: &Flags) -> Result<()> {
    let job: NoiseJob = read_json(&flags.config)?;
    let ctx = Context::new(resolve(&job.protocol, flags)?)?;
    let models: Vec<(String, NoiseModel)> = job.models.iter().map(|m| (m.label.clone(), m.noise)).collect();
    let alphas: Vec<C64> = job.alphas.iter().map(|a| c(*a)).collect();
    let rows = study::noise_study(&ctx, &models, &alphas)?;
    let mut csv = String::from("label,alpha_re,alpha_im,fidelity,noiseless_fidelity\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.label,
            fmt12(r.alpha_re),
            fmt12(r.alpha_im),
            fmt12(r.fidelity),
            fmt12(r.noiseless_fidelity)
        ));
    }
    write_text(&flags.out, "noise.csv", &csv)?;
    write_json(&flags.out, "noise.json", &rows)
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbJob {
    pub protocol: ProtocolRef,
    #[serde(default = "one_percent")]
    pub magnitude: f64,
    #[serde(default = "hundred")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "vacuum_input")]
    pub inputs: Vec<InputSpec>,
}

fn one_percent() -> f64 {
    0.01
}

fn hundred() -> usize {
    100
}

pub fn perturb(flags: &Flags) -> Result<()> {
    let job: PerturbJob = read_json(&flags.config)?;
    let ctx = Context::new(resolve(&job.protocol, flags)?)?;
    let seed = flags.seed.unwrap_or(job.seed);
    let summary = study::perturb(&ctx, job.magnitude, job.trials, seed, &weighted(&job.inputs))?;
    let mut csv = String::from("trial,fidelity\n");
    for (i, f) in summary.fidelities.iter().enumerate() {
        csv.push_str(&format!("{i},{}\n", fmt12(*f)));
    }
    write_text(&flags.out, "perturb.csv", &csv)?;
    write_json(&flags.out, "perturb.json", &summary)
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceJob {
    pub protocol: ProtocolRef,
    #[serde(default)]
    pub alpha: [f64; 2],
    #[serde(default)]
    pub variance: ScanSettings,
    /// Extra truncations at which the minima are recomputed.
    #[serde(default)]
    pub dims: Vec<usize>,
}

#[derive(Serialize)]
struct ConvergenceRow {
    dim: usize,
    generated_xi_min: f64,
    generated_v_min: f64,
    target_xi_min: f64,
    target_v_min: f64,
}

#[derive(Serialize)]
struct VarianceReport {
    alpha: [f64; 2],
    generated: VarianceScan,
    target: VarianceScan,
    qng_threshold_at_xi_min: f64,
    classical_threshold: f64,
    convergence: Vec<ConvergenceRow>,
}

fn minima(ctx: &Context, alpha: C64, scan: &ScanSettings) -> Result<(VarianceScan, VarianceScan)> {
    let out = ctx.run_coherent(alpha)?;
    let t = ctx.target();
    Ok((
        minimize_variance(&out.generated, t.j, t.basis, scan)?,
        minimize_variance(&out.target, t.j, t.basis, scan)?,
    ))
}

pub fn variance_scan(flags: &Flags) -> Result<()> {
    let job: VarianceJob = read_json(&flags.config)?;
    let doc = resolve(&job.protocol, flags)?;
    let ctx = Context::new(doc.clone())?;
    let alpha = c(job.alpha);
    let (generated, target) = minima(&ctx, alpha, &job.variance)?;
    let mut csv = String::from("xi,generated,target,qng_threshold\n");
    for (i, xi) in generated.xi_values.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            fmt12(*xi),
            fmt12(generated.variances[i]),
            fmt12(target.variances.get(i).copied().unwrap_or(f64::NAN)),
            fmt12(qng_threshold(*xi))
        ));
    }
    let mut convergence = Vec::new();
    for &d in &job.dims {
        let mut dd = doc.clone();
        dd.hilbert = HilbertConfig::new(d, dd.hilbert.leakage_buffer.min(d / 4), dd.hilbert.leakage_tol)?;
        let (g, t) = minima(&Context::new(dd)?, alpha, &job.variance)?;
        convergence.push(ConvergenceRow {
            dim: d,
            generated_xi_min: g.xi_min,
            generated_v_min: g.v_min,
            target_xi_min: t.xi_min,
            target_v_min: t.v_min,
        });
    }
    write_text(&flags.out, "variance.csv", &csv)?;
    write_json(
        &flags.out,
        "variance.json",
        &VarianceReport {
            alpha: job.alpha,
            qng_threshold_at_xi_min: qng_threshold(generated.xi_min),
            classical_threshold: classical_threshold(alpha),
            generated,
            target,
            convergence,
        },
    )
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffJob {
    pub protocols: Vec<ProtocolRef>,
    #[serde(default)]
    pub alpha: [f64; 2],
    #[serde(default = "twenty")]
    pub n_max: usize,
}

fn twenty() -> usize {
    20
}

#[derive(Serialize)]
struct DiffEntry {
    file: String,
    fidelity: f64,
    max_abs_diff: f64,
}

pub fn diff_map(flags: &Flags) -> Result<()> {
    let job: DiffJob = read_json(&flags.config)?;
    if job.protocols.is_empty() {
        bail!("diff-map needs at least one protocol");
    }
    let mut entries = Vec::new();
    for (k, p) in job.protocols.iter().enumerate() {
        let ctx = Context::new(resolve(p, flags)?)?;
        let out = ctx.run_coherent(c(job.alpha))?;
        let map = density_diff_map(&out.generated, &out.target, job.n_max)?;
        let file = format!("diff_{}.csv", k + 1);
        write_text(&flags.out, &file, &map.to_csv())?;
        entries.push(DiffEntry {
            file,
            fidelity: out.fidelity,
            max_abs_diff: map.max(),
        });
    }
    write_json(&flags.out, "diff.json", &entries)
}
