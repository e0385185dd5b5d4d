// SPDX-License-Identifier: Apache-2.0

//! End-to-end runs of a protocol document: outputs, reports, sweeps and robustness studies.

use serde::{Deserialize, Serialize};

use crate::config::ProtocolDoc;
use crate::error::{Error, Result};
use crate::fock::{coherent_state, JointState, ModeState};
use crate::linalg::C64;
use crate::metrics::{
    self, classical_threshold, minimize_variance, negativity_volume, qng_threshold, wigner, GridSpec, ScanSettings,
};
use crate::noise::{noisy_evolution, NoiseModel};
use crate::optimizer::{perturbation_study, Objective, PerturbationSummary, ProtocolBase, Template};
use crate::protocol::{apply_ideal, CubicRound, ProtocolSpec, Simulator, TargetGate};

/// A protocol document bound to a simulator.
pub struct Context {
    pub doc: ProtocolDoc,
    pub sim: Simulator,
    pub spec: ProtocolSpec,
}

/// Generated and ideal states for one input.
pub struct RunOutput {
    pub joint: JointState,
    pub generated: ModeState,
    pub target: ModeState,
    pub fidelity: f64,
}

impl Context {
    pub fn new(doc: ProtocolDoc) -> Result<Self> {
        let spec = doc.spec()?;
        let sim = Simulator::new(doc.hilbert)?;
        Ok(Self { doc, sim, spec })
    }

    pub fn dim(&self) -> usize {
        self.sim.dim()
    }

    pub fn target(&self) -> &TargetGate {
        &self.doc.target
    }

    pub fn coherent(&self, alpha: C64) -> Result<ModeState> {
        coherent_state(alpha, &self.sim.cfg)
    }

    pub fn ideal(&self, input: &ModeState) -> ModeState {
        apply_ideal(&self.sim.ops, &self.doc.target, input)
    }

    /// Runs the sequence, with the document's noise model when present.
    pub fn run(&self, input: &ModeState) -> Result<RunOutput> {
        self.run_with(input, self.doc.noise.as_ref())
    }

    pub fn run_with(&self, input: &ModeState, noise: Option<&NoiseModel>) -> Result<RunOutput> {
        let joint_in = JointState::product(self.spec.qubit, input);
        let joint = match noise {
            Some(n) if !n.is_noiseless() => noisy_evolution(&self.sim, &self.spec, &joint_in, n)?,
            _ => self.sim.apply(&self.spec, &joint_in)?,
        };
        let target = self.ideal(input);
        let fidelity = match &target {
            ModeState::Pure(t) => metrics::mode_fidelity(&joint, t)?,
            m => metrics::fidelity(&joint.reduced_mode(), m)?,
        };
        Ok(RunOutput {
            generated: joint.reduced_mode(),
            joint,
            target,
            fidelity,
        })
    }

    pub fn run_coherent(&self, alpha: C64) -> Result<RunOutput> {
        self.run(&self.coherent(alpha)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulationReport {
    pub alpha: [f64; 2],
    pub fidelity: f64,
    pub total_time: f64,
    pub xi_min: f64,
    pub v_min: f64,
    pub target_xi_min: f64,
    pub target_v_min: f64,
    pub negativity_generated: f64,
    pub negativity_target: f64,
    pub wigner_normalization_defect: f64,
    pub leakage: f64,
}

/// Fidelity, variance minimum and negativity for one coherent input; also returns the generated Wigner grid.
pub fn simulate_report(
    ctx: &Context,
    alpha: C64,
    grid: &GridSpec,
    scan: &ScanSettings,
) -> Result<(SimulationReport, metrics::WignerGrid, RunOutput)> {
    let out = ctx.run_coherent(alpha)?;
    let t = ctx.target();
    let gen_scan = minimize_variance(&out.generated, t.j, t.basis, scan)?;
    let tgt_scan = minimize_variance(&out.target, t.j, t.basis, scan)?;
    let wg = wigner(&out.generated, grid)?;
    let wt = wigner(&out.target, grid)?;
    let report = SimulationReport {
        alpha: [alpha.re, alpha.im],
        fidelity: out.fidelity,
        total_time: ctx.spec.total_time(),
        xi_min: gen_scan.xi_min,
        v_min: gen_scan.v_min,
        target_xi_min: tgt_scan.xi_min,
        target_v_min: tgt_scan.v_min,
        negativity_generated: negativity_volume(&wg),
        negativity_target: negativity_volume(&wt),
        wigner_normalization_defect: wg.normalization_defect(),
        leakage: out.joint.leakage(ctx.sim.cfg.leakage_buffer),
    };
    Ok((report, wg, out))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub abs_alpha: f64,
    pub fidelity: f64,
    pub xi_min: f64,
    pub v_min: f64,
    pub qng_threshold: f64,
    pub classical_threshold: f64,
}

pub const SWEEP_HEADER: &str = "alpha_re,alpha_im,abs_alpha,fidelity,xi_min,v_min,qng_threshold,classical_threshold";

impl SweepRow {
    pub fn csv(&self) -> String {
        let f = metrics::fmt12;
        format!(
            "{},{},{},{},{},{},{},{}",
            f(self.alpha_re),
            f(self.alpha_im),
            f(self.abs_alpha),
            f(self.fidelity),
            f(self.xi_min),
            f(self.v_min),
            f(self.qng_threshold),
            f(self.classical_threshold)
        )
    }
}

/// One sweep row. The QNG column is evaluated at the row's own `xi_min`.
pub fn sweep_row(ctx: &Context, alpha: C64, scan: &ScanSettings) -> Result<SweepRow> {
    let t = ctx.target();
    let out = ctx.run_coherent(alpha)?;
    let s = minimize_variance(&out.generated, t.j, t.basis, scan)?;
    Ok(SweepRow {
        alpha_re: alpha.re,
        alpha_im: alpha.im,
        abs_alpha: alpha.norm(),
        fidelity: out.fidelity,
        xi_min: s.xi_min,
        v_min: s.v_min,
        qng_threshold: qng_threshold(s.xi_min),
        classical_threshold: classical_threshold(alpha),
    })
}

pub fn sweep(ctx: &Context, alphas: &[C64], scan: &ScanSettings) -> Result<Vec<SweepRow>> {
    alphas.iter().map(|&a| sweep_row(ctx, a, scan)).collect()
}

/// First `|alpha|` where `v_min` rises through the QNG threshold, by linear interpolation between rows.
pub fn qng_crossing(rows: &[SweepRow]) -> Option<f64> {
    rows.windows(2).find_map(|w| {
        let g0 = w[0].v_min - w[0].qng_threshold;
        let g1 = w[1].v_min - w[1].qng_threshold;
        (g0 < 0.0 && g1 >= 0.0).then(|| w[0].abs_alpha + (w[1].abs_alpha - w[0].abs_alpha) * (-g0) / (g1 - g0))
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseRow {
    pub label: String,
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub fidelity: f64,
    pub noiseless_fidelity: f64,
}

pub fn noise_study(ctx: &Context, models: &[(String, NoiseModel)], alphas: &[C64]) -> Result<Vec<NoiseRow>> {
    let mut rows = Vec::new();
    for &a in alphas {
        let input = ctx.coherent(a)?;
        let clean = ctx.run_with(&input, None)?.fidelity;
        for (label, m) in models {
            let f = ctx.run_with(&input, Some(m))?.fidelity;
            rows.push(NoiseRow {
                label: label.clone(),
                alpha_re: a.re,
                alpha_im: a.im,
                fidelity: f,
                noiseless_fidelity: clean,
            });
        }
    }
    Ok(rows)
}

/// Free parameters of a document as a template, base and flat vector.
pub fn parametrize(doc: &ProtocolDoc) -> Result<(Template, ProtocolBase, Vec<f64>)> {
    if let Some(q) = &doc.quartic {
        let base = ProtocolBase::Quartic {
            params: doc.system(),
            options: doc.options(),
            omega2: q.omega2,
            omega4: q.omega4,
        };
        let x = vec![q.r_pre, q.t2, q.phi2, q.t4, q.phi4, q.theta, q.r_post];
        return Ok((Template::Quartic, base, x));
    }
    if let Some(s) = &doc.simultaneous {
        let base = ProtocolBase::Simultaneous {
            params: doc.system(),
            options: doc.options(),
            base: *s,
        };
        return Ok((Template::Simultaneous, base, vec![s.beta, s.t, s.t2]));
    }
    if doc.rounds.iter().any(|r| r.t1 != 0.0) {
        return Err(Error::Config("rounds with a leading U1 pulse have no flat parametrisation".into()));
    }
    let ideal_squeeze = doc.rounds.iter().any(|r| r.r != 0.0);
    if ideal_squeeze && doc.rounds.iter().any(|r| r.t2 != 0.0) {
        return Err(Error::Config("rounds mix U2 pulses and ideal squeezing".into()));
    }
    let pre = doc.pre_squeeze != 0.0;
    let mut x = Vec::new();
    if pre {
        x.push(doc.pre_squeeze);
    }
    for r in &doc.rounds {
        x.extend([r.beta, r.t3, r.t1p, if ideal_squeeze { r.r } else { r.t2 }]);
    }
    let template = Template::Cubic {
        rounds: doc.rounds.len(),
        pre_squeeze: pre,
        ideal_squeeze,
    };
    Ok((template, ProtocolBase::Cubic(doc.cubic_params()), x))
}

/// Writes a flat parameter vector back into a copy of the document.
pub fn with_parameters(doc: &ProtocolDoc, template: &Template, x: &[f64]) -> Result<ProtocolDoc> {
    let mut out = doc.clone();
    match template {
        Template::Cubic {
            rounds,
            pre_squeeze,
            ideal_squeeze,
        } => {
            let off = usize::from(*pre_squeeze);
            if x.len() != off + 4 * rounds {
                return Err(Error::Dimension {
                    expected: off + 4 * rounds,
                    got: x.len(),
                });
            }
            out.quartic = None;
            out.simultaneous = None;
            out.pre_squeeze = if *pre_squeeze { x[0] } else { 0.0 };
            out.rounds = x[off..]
                .chunks(4)
                .map(|v| CubicRound {
                    t1: 0.0,
                    beta: v[0],
                    t3: v[1],
                    t1p: v[2],
                    t2: if *ideal_squeeze { 0.0 } else { v[3] },
                    r: if *ideal_squeeze { v[3] } else { 0.0 },
                })
                .collect();
        }
        Template::Quartic => {
            let q = out
                .quartic
                .as_mut()
                .ok_or_else(|| Error::Config("quartic template needs a quartic document".into()))?;
            if x.len() != 7 {
                return Err(Error::Dimension { expected: 7, got: x.len() });
            }
            q.r_pre = x[0];
            q.t2 = x[1];
            q.phi2 = x[2];
            q.t4 = x[3];
            q.phi4 = x[4];
            q.theta = x[5];
            q.r_post = x[6];
        }
        Template::Simultaneous => {
            let s = out
                .simultaneous
                .as_mut()
                .ok_or_else(|| Error::Config("simultaneous template needs a simultaneous document".into()))?;
            if x.len() != 3 {
                return Err(Error::Dimension { expected: 3, got: x.len() });
            }
            s.beta = x[0];
            s.t = x[1];
            s.t2 = x[2];
        }
    }
    Ok(out)
}

/// Objective over coherent inputs with the document's target.
pub fn objective<'a>(ctx: &'a Context, template: Template, base: ProtocolBase, inputs: &[(f64, C64)]) -> Result<Objective<'a>> {
    let states = inputs
        .iter()
        .map(|&(w, a)| Ok((w, ctx.coherent(a)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Objective::for_target(&ctx.sim, template, base, ctx.target(), states))
}

/// Relative `U[-m, m]` perturbations of every free parameter of the document.
pub fn perturb(ctx: &Context, magnitude: f64, trials: usize, seed: u64, inputs: &[(f64, C64)]) -> Result<PerturbationSummary> {
    let (template, base, x) = parametrize(&ctx.doc)?;
    let obj = objective(ctx, template, base, inputs)?;
    perturbation_study(&obj, &x, magnitude, trials, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::table1_rounds;

    #[test]
    fn parametrisation_round_trips() {
        let mut doc = ProtocolDoc::cubic(0.3, table1_rounds(), 1.0);
        doc.pre_squeeze = 0.4;
        let (t, base, x) = parametrize(&doc).unwrap();
        assert_eq!(x.len(), 13);
        let back = with_parameters(&doc, &t, &x).unwrap();
        assert_eq!(back, doc);
        assert_eq!(t.build(&base, &x).unwrap(), doc.spec().unwrap());
    }

    #[test]
    fn crossing_interpolates() {
        let row = |a: f64, v: f64| SweepRow {
            alpha_re: 0.0,
            alpha_im: a,
            abs_alpha: a,
            fidelity: 1.0,
            xi_min: 1.0,
            v_min: v,
            qng_threshold: 2.0,
            classical_threshold: 5.0,
        };
        let rows = [row(0.0, 1.0), row(0.5, 1.5), row(1.0, 1.9), row(1.5, 2.3)];
        assert!((qng_crossing(&rows).unwrap() - 1.125).abs() < 1e-12);
        assert!(qng_crossing(&rows[..2]).is_none());
    }
}
