// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Prints one PASS/FAIL line per criterion plus INFO lines, and
//! exits non-zero when any criterion fails.

use std::time::Instant;

use sbgate::config::ProtocolDoc;
use sbgate::fock::{HilbertConfig, ModeState, OperatorSet, Quadrature};
use sbgate::linalg::{self, CMat, HermitianEigen, C64};
use sbgate::metrics::{
    self, classical_threshold, cubic_phase_vacuum_wigner, density_diff_map, effective_cubicity_fit, minimize_variance,
    negativity_volume, nonlinear_variance, qng_threshold, qubit_infidelity, trace_distance, wigner, GridSpec,
    ScanSettings,
};
use sbgate::noise::{dephasing_step, heating_step, NoiseModel};
use sbgate::optimizer::{initialize, polish, run_from, BoundSettings, DeConfig, PolishConfig, Template};
use sbgate::protocol::{table1_rounds, CubicRound, QuarticParams, TargetGate};
use sbgate::sideband::{
    direct_propagator, rotating_hamiltonian, sideband_series, DirectOptions, HamiltonianMode, HamiltonianOptions,
    SystemParams, TwoToneDrive,
};
use sbgate::study::{self, Context};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

const ETA: f64 = 0.3;
const DIM: usize = 160;

/// Vacuum-optimised references at dimension 160, per round `(beta, t3, t1p, t2)`.
const REF_N1: [f64; 4] = [-4.999999999999975, 233.96520583040152, 138.55411748425823, 94.4304355859926];
const REF_N2: [f64; 8] = [
    -1.0746475717069597, 299.99999988488935, 150.1185822460464, 164.07668840452,
    -4.872767933265779, 139.63906771336124, 4.3419251682328423e-7, 91.86079909020478,
];
const REF_N3: [f64; 12] = [
    -0.7937754443024261, 299.9999999579868, 137.9073235002977, 134.05000193810696,
    -3.065424777154611, 256.97133917694464, 35.4507099702035, 16.432708461373085,
    -4.999999949479974, 102.99765088851555, 83.32248004326702, 4.7549534311735677e-7,
];
/// Optimised jointly on vacuum and `alpha = +-1, +-i` at dimension 200.
const REF_COHERENT: [f64; 12] = [
    -2.39975255194, 233.307971369, 1.39561320727, 164.739460005,
    -2.99999999524, 299.999999983, 299.999999781, 2.04804508806e-6,
    -2.9999999975, 131.920279862, 14.5788687343, 105.72519916,
];

fn rounds(x: &[f64]) -> Vec<CubicRound> {
    x.chunks(4)
        .map(|c| CubicRound {
            t1: 0.0,
            beta: c[0],
            t3: c[1],
            t1p: c[2],
            t2: c[3],
            r: 0.0,
        })
        .collect()
}

fn doc(r: Vec<CubicRound>, dim: usize) -> ProtocolDoc {
    let mut d = ProtocolDoc::cubic(ETA, r, 1.0);
    d.hilbert = HilbertConfig::new(dim, 20, 1e-4).expect("valid truncation");
    d
}

fn table1(dim: usize) -> Context {
    Context::new(doc(table1_rounds(), dim)).expect("fixed protocol builds")
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn i_alpha(m: f64) -> C64 {
    C64::new(0.0, m)
}

fn c1() -> Outcome {
    let ctx = table1(DIM);
    let out = ctx.run_coherent(C64::new(0.0, 0.0))?;
    let t = ctx.spec.total_time();
    let ok = out.fidelity >= 0.999 && within(t, 797.0, 1.0);
    let stretch = within(out.fidelity, 0.99986, 2e-3);
    Ok((ok, format!("F = {:.6} (>= 0.999; stretch {}), total time = {t:.2} us (797 +- 1)", out.fidelity, if stretch { "met" } else { "not met" })))
}

fn c2() -> Outcome {
    let ctx = table1(DIM);
    let f = |a: C64| ctx.run_coherent(a).map(|o| o.fidelity);
    let (p1, m1, pi, mi) = (f(C64::new(1.0, 0.0))?, f(C64::new(-1.0, 0.0))?, f(i_alpha(1.0))?, f(i_alpha(-1.0))?);
    let ok = p1 >= 0.998 && m1 >= 0.998 && within(pi, 0.969, 0.01) && within(mi, 0.969, 0.01);
    Ok((ok, format!("F(1) = {p1:.4}, F(-1) = {m1:.4} (>= 0.998); F(i) = {pi:.4}, F(-i) = {mi:.4} (0.969 +- 0.01)")))
}

fn c3() -> Outcome {
    let ctx = table1(DIM);
    let out = ctx.run_coherent(C64::new(0.0, 0.0))?;
    let grid = GridSpec::square(10.0, 201);
    let vt = negativity_volume(&wigner(&out.target, &grid)?);
    let vg = negativity_volume(&wigner(&out.generated, &grid)?);
    let ok = within(vt, 0.226, 0.005) && within(vg, 0.2229, 0.01);
    Ok((ok, format!("V-(target) = {vt:.4} (0.226 +- 0.005), V-(generated) = {vg:.4} (0.2229 +- 0.01)")))
}

fn c4() -> Outcome {
    let vac = ModeState::vacuum(40);
    let v0 = nonlinear_variance(&vac, 3, 0.0, Quadrature::P)?;
    let v1 = nonlinear_variance(&vac, 3, 1.0, Quadrature::P)?;
    let classical = metrics::classical_variance(C64::new(0.0, 0.0), 1.0);
    let scan = ScanSettings::default();
    let ctx = table1(DIM);
    let out = ctx.run_coherent(i_alpha(1.0))?;
    let g = minimize_variance(&out.generated, 3, Quadrature::P, &scan)?;
    let mut ok = within(v0, 0.5, 1e-4) && within(v1, 5.0, 0.01) && within(classical, v1, 0.01);
    ok &= within(g.v_min, 1.706, 0.05) && within(g.xi_min, -1.082, 0.05);
    let mut ideal = Vec::new();
    for d in [120, 160, 200] {
        let c = Context::new(doc(table1_rounds(), d))?;
        let input = c.coherent(i_alpha(1.0))?;
        let s = minimize_variance(&c.ideal(&input), 3, Quadrature::P, &scan)?;
        ok &= within(s.v_min, 1.505, 0.05) && within(s.xi_min, -0.986, 0.05);
        ideal.push(format!("d{d}: {:.3} at {:.3}", s.v_min, s.xi_min));
    }
    Ok((
        ok,
        format!(
            "vacuum V(0) = {v0:.5}, V(1) = {v1:.4}, classical(0) = {classical:.4}; generated(|i>) min {:.3} at xi = {:.3} (1.706 at -1.082); ideal target min [{}] (1.505 at -0.986)",
            g.v_min,
            g.xi_min,
            ideal.join(", ")
        ),
    ))
}

fn crossing(ctx: &Context, scan: &ScanSettings) -> (Option<f64>, usize) {
    let mut rows = Vec::new();
    let mut failed = 0;
    for k in 0..=32 {
        match study::sweep_row(ctx, i_alpha(0.05 * k as f64), scan) {
            Ok(r) => rows.push(r),
            Err(_) => failed += 1,
        }
    }
    (study::qng_crossing(&rows), failed)
}

fn c5() -> Outcome {
    let q = qng_threshold(1.0);
    let (x, failed) = crossing(&table1(DIM), &ScanSettings::default());
    let ok = within(q, 1.9655, 1e-3) && x.is_some_and(|x| within(x, 1.045, 0.05));
    Ok((ok, format!("V_QNG(1) = {q:.5} (1.9655 +- 1e-3); crossing |alpha| = {x:?} (1.045 +- 0.05), {failed} sweep points failed")))
}

fn c6() -> Outcome {
    let ctx = table1(120);
    let heat = NoiseModel::heating(10.0);
    let deph = NoiseModel::dephasing(50.0);
    let f = |a: C64, m: &NoiseModel| -> Result<f64, sbgate::Error> { ctx.run_with(&ctx.coherent(a)?, Some(m)).map(|o| o.fidelity) };
    let start = Instant::now();
    let h0 = f(C64::new(0.0, 0.0), &heat)?;
    let hi = f(i_alpha(1.0), &heat)?;
    let d0 = f(C64::new(0.0, 0.0), &deph)?;
    let dp = f(i_alpha(1.0), &deph)?;
    let dm = f(i_alpha(-1.0), &deph)?;
    let secs = start.elapsed().as_secs_f64() / 5.0;
    let ok = within(h0, 0.993, 0.005)
        && within(hi, 0.962, 0.01)
        && within(d0, 0.971, 0.01)
        && within(dp, 0.89, 0.02)
        && within(dm, 0.89, 0.02)
        && secs < 1800.0;
    Ok((
        ok,
        format!("heating: F(0) = {h0:.4} (0.993), F(i) = {hi:.4} (0.962); dephasing: F(0) = {d0:.4} (0.971), F(+-i) = {dp:.4}/{dm:.4} (0.89); {secs:.1} s per run"),
    ))
}

fn c7() -> Outcome {
    let s = study::perturb(&table1(DIM), 0.01, 100, 0, &[(1.0, C64::new(0.0, 0.0))])?;
    let ok = s.trials >= 100 && within(s.mean, 0.9991, 5e-4);
    Ok((ok, format!("mean F = {:.5} over {} trials (0.9991 +- 5e-4), min {:.5}", s.mean, s.trials, s.min)))
}

/// DE with the published settings followed by a local polish; returns `(x, fidelity)`.
fn optimize(ctx: &Context, template: Template, seed: u64) -> Result<(Vec<f64>, f64), Box<dyn std::error::Error>> {
    let (_, base, _) = study::parametrize(&ctx.doc)?;
    let space = template.search_space(&BoundSettings::default())?;
    let obj = study::objective(ctx, template, base, &[(1.0, C64::new(0.0, 0.0))])?;
    let loss = |x: &[f64]| obj.loss(x);
    let cfg = DeConfig {
        seed,
        ..DeConfig::default()
    };
    let state = initialize(&loss, &space, &cfg, &[])?;
    let res = run_from(&loss, &space, &cfg, state, |_| Ok(()))?;
    let (x, l) = polish(&loss, &space, &res.best, &PolishConfig::default());
    Ok((x, 1.0 - l))
}

fn c8() -> Outcome {
    let ctx = Context::new(doc(rounds(&REF_N1), DIM))?;
    let cubic = |n, pre| Template::Cubic {
        rounds: n,
        pre_squeeze: pre,
        ideal_squeeze: false,
    };
    let best = |t: Template| -> Result<(Vec<f64>, f64), Box<dyn std::error::Error>> {
        let mut b = (Vec::new(), f64::NEG_INFINITY);
        for seed in 1..=4 {
            let r = optimize(&ctx, t.clone(), seed)?;
            if r.1 > b.1 {
                b = r;
            }
        }
        Ok(b)
    };
    let (_, f1) = best(cubic(1, false))?;
    let (xs, fs) = best(cubic(1, true))?;
    let (_, f3) = best(cubic(3, false))?;
    let r_pre = xs[0];
    let ok = f1 >= 0.998 && fs >= 0.9995 && within(r_pre.abs(), 0.772, 0.05) && f3 >= 0.9995;
    Ok((
        ok,
        format!("N=1 F = {f1:.6} (>= 0.998); pre-squeezed F = {fs:.6} (>= 0.9995) with r_pre = {r_pre:.3} (0.772 +- 0.05); N=3 F = {f3:.6} (>= 0.9995)"),
    ))
}

fn gamma_fit(ctx: &Context) -> Result<(f64, Vec<(f64, f64)>), Box<dyn std::error::Error>> {
    let mut samples = Vec::new();
    for m in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let out = ctx.run_coherent(i_alpha(m))?;
        let s = minimize_variance(&out.generated, 3, Quadrature::P, &ScanSettings::default())?;
        // the realised cubicity is the magnitude of the minimising xi
        samples.push((m, -s.xi_min));
    }
    Ok((effective_cubicity_fit(&samples, ETA, 1.0)?, samples))
}

fn c9() -> Outcome {
    let (g, s) = gamma_fit(&table1(DIM))?;
    let pts: Vec<String> = s.iter().map(|(a, z)| format!("{a}:{z:.3}")).collect();
    Ok((within(g, 0.9, 0.2), format!("gamma = {g:.3} (0.9 +- 0.2); zeta_eff by |alpha| [{}]", pts.join(", "))))
}

fn c10() -> Outcome {
    let mut d = ProtocolDoc::cubic(ETA, Vec::new(), 0.25);
    d.quartic = Some(QuarticParams {
        r_pre: 0.0,
        t2: 50.0,
        phi2: std::f64::consts::FRAC_PI_2,
        t4: 100.0,
        phi4: 0.0,
        theta: 0.0,
        r_post: 0.0,
        omega2: 0.2,
        omega4: 0.8,
    });
    d.target = TargetGate {
        j: 4,
        zeta: 0.25,
        basis: Quadrature::X,
    };
    d.hilbert = HilbertConfig::new(DIM, 20, 1e-4)?;
    let ctx = Context::new(d)?;
    let (x, f) = optimize(&ctx, Template::Quartic, 1)?;
    Ok((f >= 0.99, format!("F = {f:.5} (>= 0.99); t2 = {:.2}, t4 = {:.2} us", x[1], x[3])))
}

fn c11() -> Outcome {
    let ops = OperatorSet::new(60)?;
    let mut worst_u: f64 = 0.0;
    for (re, im, r, th) in [(0.3, -0.7, 0.4, 1.1), (-1.5, 0.2, -0.8, -2.0), (1.0, 1.0, 1.2, 3.0)] {
        worst_u = worst_u
            .max(linalg::unitarity_defect(&ops.displacement(C64::new(re, im))))
            .max(linalg::unitarity_defect(&ops.squeezing(r)))
            .max(linalg::unitarity_defect(&ops.rotation(th)));
    }
    let mut worst_h: f64 = 0.0;
    for k in 1..=4u32 {
        for mode in [HamiltonianMode::Full, HamiltonianMode::Ld(1), HamiltonianMode::Ld(3)] {
            let h = rotating_hamiltonian(&TwoToneDrive::new(k, 0.3, 0.7), &SystemParams::new(ETA), &HamiltonianOptions::with_mode(mode), 60)?;
            worst_h = worst_h.max(linalg::hermiticity_defect(&h));
        }
    }
    let ctx = table1(DIM);
    let mut worst_b: f64 = 0.0;
    for b in ctx.spec.blocks.iter().filter(|b| b.is_coupled()) {
        let (up, um) = ctx.sim.block_unitaries(&ctx.spec, b, b.duration())?;
        worst_b = worst_b.max(linalg::unitarity_defect(&up)).max(linalg::unitarity_defect(&um));
    }
    let thermal = ctx.run(&sbgate::fock::thermal_state(0.2, &ctx.sim.cfg)?)?;
    let tr = (thermal.joint.trace() - 1.0).abs();
    let herm = linalg::hermiticity_defect(&thermal.joint.density());
    let ok = worst_u < 1e-10 && worst_h < 1e-12 && worst_b < 1e-10 && tr < 1e-10 && herm < 1e-12;
    Ok((
        ok,
        format!("Gaussian unitarity {worst_u:.1e}, H_k Hermiticity {worst_h:.1e}, block unitarity {worst_b:.1e}, mixed-run trace {tr:.1e}, Hermiticity {herm:.1e}"),
    ))
}

fn c12() -> Outcome {
    let plus_y = [C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0), C64::new(0.0, std::f64::consts::FRAC_1_SQRT_2)];
    let mut worst: f64 = 0.0;
    for x in [&REF_N1[..], &REF_N3[..]] {
        let ctx = Context::new(doc(rounds(x), DIM))?;
        for a in [C64::new(0.0, 0.0), C64::new(0.1, 0.1)] {
            worst = worst.max(qubit_infidelity(&ctx.run_coherent(a)?.joint, plus_y));
        }
    }
    let t1 = table1(DIM);
    worst = worst.max(qubit_infidelity(&t1.run_coherent(i_alpha(1.0))?.joint, plus_y));
    Ok((worst < 1e-10, format!("max reduced-qubit infidelity {worst:.1e} (< 1e-10)")))
}

fn c13() -> Outcome {
    let dim = 20;
    let big = dim + 60;
    let ops = OperatorSet::new(big)?;
    let mut ok = true;
    let mut last_gap = 0.0;
    for nu_t in [0.0, 1.3] {
        let e = C64::from_polar(1.0, nu_t);
        let g = &linalg::scale(&ops.a, e.conj() * ETA) + &linalg::scale(&ops.ad, e * ETA);
        let u = HermitianEigen::new(&g)?.exp_i(1.0);
        let oracle = CMat::from_fn(dim, dim, |i, j| u[(i, j)]);
        let mut prev = f64::INFINITY;
        for k in 0..=12 {
            let gap = linalg::frobenius(&(&sideband_series(ETA, nu_t, k, dim)? - &oracle));
            ok &= gap < prev;
            prev = gap;
        }
        ok &= prev < 1e-8;
        last_gap = prev.max(last_gap);
    }
    Ok((ok, format!("monotone in K, gap at K=12 = {last_gap:.1e} (< 1e-8) on the lowest {dim} Fock levels")))
}

fn c14() -> Outcome {
    let params = SystemParams::new(ETA);
    let opts = HamiltonianOptions::with_mode(HamiltonianMode::Full);
    let mut ok = true;
    let mut detail = Vec::new();
    let d = 16;
    let ops = OperatorSet::new(d)?;
    for k in [1u32, 2] {
        let drive = TwoToneDrive::new(k, 0.3, 0.0);
        let t = 1.0;
        let h = rotating_hamiltonian(&drive, &params, &opts, d)?;
        let rwa = HermitianEigen::new(&h)?.exp_i(t);
        let dp = direct_propagator(&drive, &params, &opts, t, &ops, &DirectOptions::default())?;
        let gap = linalg::frobenius(&(&dp.unitary - &rwa));
        let bound = 1e-3 * (0.3 * t).powi(2);
        ok &= gap < bound;
        detail.push(format!("k={k} t={t} us gap {gap:.2e} (< {bound:.1e})"));
    }
    let d = 30;
    let ops = OperatorSet::new(d)?;
    let drive = TwoToneDrive::new(3, 0.3, 0.0);
    let t = 88.75;
    let h = rotating_hamiltonian(&drive, &params, &opts, d)?;
    let rwa = HermitianEigen::new(&h)?.exp_i(t);
    let dp = direct_propagator(
        &drive,
        &params,
        &opts,
        t,
        &ops,
        &DirectOptions {
            initial_steps: 16000,
            ..DirectOptions::default()
        },
    )?;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut psi = vec![C64::new(0.0, 0.0); 2 * d];
    psi[0] = C64::new(r, 0.0);
    psi[d] = C64::new(0.0, r);
    let f = linalg::dot(&linalg::matvec(&rwa, &psi), &linalg::matvec(&dp.unitary, &psi)).norm_sqr();
    ok &= f >= 0.999;
    detail.push(format!("k=3 t={t} us vacuum F {f:.6} (>= 0.999)"));
    Ok((ok, detail.join("; ")))
}

fn mean_n(m: &CMat) -> f64 {
    (0..m.nrows()).map(|i| i as f64 * m[(i, i)].re).sum()
}

fn c15() -> Outcome {
    let ctx = table1(120);
    let mut ok = true;
    let out = ctx.run_coherent(C64::new(0.0, 0.0))?;
    let rho = out.generated.density();
    let mut h = rho.clone();
    let model = NoiseModel::heating(1000.0);
    let mut prev = mean_n(&h);
    let mut min_eig = f64::INFINITY;
    for _ in 0..20 {
        h = heating_step(&h, &model)?;
        let n = mean_n(&h);
        ok &= n > prev;
        prev = n;
        min_eig = min_eig.min(HermitianEigen::new_unchecked(&h)?.values.iter().copied().fold(f64::INFINITY, f64::min));
    }
    let tr = (linalg::trace(&h).re - 1.0).abs();
    let deph = dephasing_step(&rho, &NoiseModel::dephasing(5.0), 500.0)?;
    let diag = (0..rho.nrows()).map(|i| (deph[(i, i)] - rho[(i, i)]).norm()).fold(0.0, f64::max);
    let dmin = HermitianEigen::new_unchecked(&deph)?.values.iter().copied().fold(f64::INFINITY, f64::min);
    ok &= min_eig > -1e-12 && tr < 1e-12 && diag < 1e-15 && dmin > -1e-12;
    let mut halving: f64 = 0.0;
    let input = ctx.coherent(C64::new(0.0, 0.0))?;
    for base in [NoiseModel::heating(10.0), NoiseModel::dephasing(50.0)] {
        let a = ctx.run_with(&input, Some(&NoiseModel { step: 1.0, ..base }))?.joint.reduced_mode();
        let b = ctx.run_with(&input, Some(&NoiseModel { step: 0.5, ..base }))?.joint.reduced_mode();
        halving = halving.max(trace_distance(&a, &b)?);
    }
    ok &= halving < 1e-4;
    Ok((
        ok,
        format!("heating min eigenvalue {min_eig:.1e}, trace error {tr:.1e}, <n> increasing; dephasing diagonal change {diag:.1e}; step-halving trace distance {halving:.1e} (< 1e-4)"),
    ))
}

fn diff_maxima() -> Result<Vec<f64>, Box<dyn std::error::Error>> {
    let mut out = Vec::new();
    for x in [&REF_N1[..], &REF_N2[..], &REF_N3[..]] {
        let ctx = Context::new(doc(rounds(x), DIM))?;
        let r = ctx.run_coherent(C64::new(0.0, 0.0))?;
        out.push(density_diff_map(&r.generated, &r.target, 30)?.max());
    }
    Ok(out)
}

fn c16() -> Outcome {
    let m = diff_maxima()?;
    Ok((m[0] > m[1] && m[1] > m[2], format!("max |drho| for N=1,2,3: {:.4}, {:.4}, {:.4}", m[0], m[1], m[2])))
}

fn info() -> Result<Vec<String>, Box<dyn std::error::Error>> {
    let mut lines = Vec::new();
    let vac = C64::new(0.0, 0.0);
    for (name, x) in [("N=1", &REF_N1[..]), ("N=2", &REF_N2[..]), ("N=3", &REF_N3[..])] {
        let ctx = Context::new(doc(rounds(x), DIM))?;
        let out = ctx.run_coherent(vac)?;
        lines.push(format!("{name} vacuum reference: F = {:.6}, total time {:.1} us", out.fidelity, ctx.spec.total_time()));
    }
    let n3 = Context::new(doc(rounds(&REF_N3), DIM))?;
    let out = n3.run_coherent(vac)?;
    let grid = GridSpec::square(10.0, 201);
    lines.push(format!(
        "N=3 vacuum reference: V-(generated) = {:.4}, V-(target, d{DIM}) = {:.4}",
        negativity_volume(&wigner(&out.generated, &grid)?),
        negativity_volume(&wigner(&out.target, &grid)?)
    ));
    let n = 201;
    let h = 20.0 / (n - 1) as f64;
    let mut neg = 0.0;
    for i in 0..n {
        for j in 0..n {
            let w = cubic_phase_vacuum_wigner(1.0, -10.0 + h * i as f64, -10.0 + h * j as f64);
            if w < 0.0 {
                neg -= w * h * h;
            }
        }
    }
    lines.push(format!("untruncated cubic phase state on the same window: V- = {neg:.4}"));
    let p = study::perturb(&n3, 0.01, 100, 0, &[(1.0, vac)])?;
    lines.push(format!("N=3 vacuum reference, 1% perturbations: mean F = {:.5}, min {:.5}", p.mean, p.min));
    let n3_120 = Context::new(doc(rounds(&REF_N3), 120).clone());
    if let Ok(c) = n3_120 {
        let input = c.coherent(vac)?;
        match (
            c.run_with(&input, Some(&NoiseModel::heating(10.0))),
            c.run_with(&input, Some(&NoiseModel::dephasing(50.0))),
        ) {
            (Ok(a), Ok(b)) => lines.push(format!("N=3 vacuum reference, d120: heating F = {:.4}, dephasing F = {:.4}", a.fidelity, b.fidelity)),
            (a, b) => lines.push(format!("N=3 vacuum reference, d120 noise runs: {:?} / {:?}", a.err(), b.err())),
        }
    }
    let coh = Context::new(doc(rounds(&REF_COHERENT), 200))?;
    let fs: Vec<String> = [vac, C64::new(1.0, 0.0), C64::new(-1.0, 0.0), i_alpha(1.0), i_alpha(-1.0)]
        .iter()
        .map(|&a| coh.run_coherent(a).map(|o| format!("{:.4}", o.fidelity)).unwrap_or_else(|e| e.to_string()))
        .collect();
    lines.push(format!("coherent reference (d200): F at 0, 1, -1, i, -i = {}", fs.join(", ")));
    let out = coh.run_coherent(i_alpha(1.0))?;
    let s = minimize_variance(&out.generated, 3, Quadrature::P, &ScanSettings::default())?;
    let t = minimize_variance(&out.target, 3, Quadrature::P, &ScanSettings::default())?;
    lines.push(format!(
        "coherent reference from |i>: generated min {:.3} at {:.3}, d200 target min {:.3} at {:.3}, classical threshold {:.1}",
        s.v_min,
        s.xi_min,
        t.v_min,
        t.xi_min,
        classical_threshold(i_alpha(1.0))
    ));
    let (x, failed) = crossing(&coh, &ScanSettings::default());
    lines.push(format!("coherent reference: QNG crossing |alpha| = {x:?} ({failed} sweep points failed)"));
    if let Ok((g, _)) = gamma_fit(&coh) {
        lines.push(format!("coherent reference: gamma = {g:.3}"));
    }
    Ok(lines)
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 16] = [
        (1, "fixed 3-round protocol, vacuum", c1),
        (2, "fixed 3-round protocol, coherent inputs", c2),
        (3, "negativity volumes", c3),
        (4, "nonlinear variance", c4),
        (5, "QNG threshold and crossing", c5),
        (6, "heating and dephasing", c6),
        (7, "1% perturbations", c7),
        (8, "re-optimisation", c8),
        (9, "effective cubicity fit", c9),
        (10, "quartic gate", c10),
        (11, "unitarity, trace, Hermiticity", c11),
        (12, "qubit disentanglement", c12),
        (13, "sideband series reconstruction", c13),
        (14, "direct propagator vs RWA", c14),
        (15, "channel validity", c15),
        (16, "density-matrix convergence", c16),
    ];
    let filter: Vec<u32> = std::env::var("SBGATE_CRITERIA")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        println!("{} criterion {id:>2} {name}: {detail} [{secs:.1} s]", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(id);
        }
    }
    if filter.is_empty() {
        match info() {
            Ok(lines) => lines.iter().for_each(|l| println!("INFO {l}")),
            Err(e) => println!("INFO reference runs failed: {e}"),
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: {} failing: {failed:?}", failed.len());
        std::process::exit(1);
    }
}
