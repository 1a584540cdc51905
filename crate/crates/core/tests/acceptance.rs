//! Acceptance criteria 1–10. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Every tolerance and runtime budget is
//! pinned below.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use mra_core::direct::frequency_marching;
use mra_core::experiment::{loglog_slope, run_experiment, ExperimentConfig, ExperimentResults, Task};
use mra_core::invariants::{
    bispectrum_of, normalized_bispectrum, CMat, InvariantAccumulator, RMat,
};
use mra_core::manifold::{
    inner, project_tangent, random_point, rtr_solve, ManifoldKind, Objective, PhaseProblem, RtrOptions,
};
use mra_core::observations::generate_observations;
use mra_core::pipeline::{mra_recover, Method, RecoveryOptions};
use mra_core::sdp::{check_lemma_la, sdp_solve, SdpOptions, SdpProblem};
use mra_core::signal::{fft, ifft, phase_of, relative_error, Signal};
use mra_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_signal(n: usize, real: bool, seed: u64) -> Signal {
    if real {
        Signal::gaussian(n, seed).unwrap()
    } else {
        Signal::complex_gaussian(n, seed).unwrap()
    }
}

/// Random signal whose DFT stays above `floor` in modulus.
fn nonvanishing(n: usize, real: bool, seed: u64, floor: f64) -> Signal {
    let mut s = seed;
    loop {
        let x = random_signal(n, real, s);
        if fft(x.values()).iter().all(|v| v.norm() > floor) {
            return x;
        }
        s = s.wrapping_add(7919);
    }
}

fn cplx(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

fn frob(m: &CMat) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn rel_vec(a: &[C64], b: &[C64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    d / b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt().max(1e-300)
}

fn modulate(z: &[C64], m: usize) -> Vec<C64> {
    let n = z.len() as f64;
    z.iter().enumerate().map(|(k, v)| v * C64::from_polar(1.0, -2.0 * PI * (m * k) as f64 / n)).collect()
}

fn ac1() -> Outcome {
    let cases: Vec<(&str, Signal, Vec<(Method, f64)>)> = {
        let fast = |tol_unwrap: f64| {
            vec![
                (Method::Manifold, 1e-6),
                (Method::Iterps, 1e-6),
                (Method::Fm, 1e-6),
                (Method::Direct, 1e-6),
                (Method::Unwrap, tol_unwrap),
            ]
        };
        vec![
            ("window(41,21,1)", Signal::window(41, 21, 1.0).unwrap(), fast(1e-5)),
            ("complex N=21", nonvanishing(21, false, 2101, 1e-2), fast(1e-5)),
            ("window(15,8,1)", Signal::window(15, 8, 1.0).unwrap(), vec![(Method::Sdp, 1e-4)]),
            ("complex N=15", nonvanishing(15, false, 1501, 1e-2), vec![(Method::Sdp, 1e-4)]),
        ]
    };
    let mut worst = String::new();
    let mut pass = true;
    for (name, x, methods) in cases {
        let batch = generate_observations(&x, 1, 0.0, 1).unwrap();
        let opts = RecoveryOptions { truth: Some(x.clone()), ..Default::default() };
        for (m, tol) in methods {
            match mra_recover(&batch, m, &opts) {
                Ok(r) => {
                    let e = r.relative_error.unwrap();
                    if !(e < tol) {
                        pass = false;
                        worst += &format!(" {name}/{m}={e:.1e}>{tol:.0e}");
                    }
                }
                Err(err) => {
                    pass = false;
                    worst += &format!(" {name}/{m} error: {err}");
                }
            }
        }
    }
    let detail = if pass { "all methods within tolerance".to_string() } else { format!("failures:{worst}") };
    outcome(pass, detail)
}

fn ac2() -> Outcome {
    let cfg = ExperimentConfig::preset("figure2").unwrap();
    let res = run_experiment(&cfg).unwrap();
    let mut slopes = Vec::new();
    for task in [Task::PowerSpectrum, Task::Bispectrum] {
        for &s in &cfg.sigma_grid {
            slopes.push((task.name(), s, loglog_slope(&res, task.name(), s).unwrap_or(f64::NAN)));
        }
    }
    let pass = slopes.iter().all(|t| (-0.6..=-0.4).contains(&t.2));
    let detail = slopes.iter().map(|(t, s, v)| format!("{t}@σ={s}: {v:.3}")).collect::<Vec<_>>().join(", ");
    outcome(pass, detail)
}

fn bias_pattern(n: usize, real: bool) -> Vec<Vec<f64>> {
    (0..n)
        .map(|k1| {
            (0..n)
                .map(|k2| match (k1, k2, real) {
                    (0, 0, true) => 3.0,
                    (0, 0, false) => 2.0,
                    (0, _, _) => 1.0,
                    (_, 0, true) => 1.0,
                    _ if k1 == k2 => 1.0,
                    _ => 0.0,
                })
                .collect()
        })
        .collect()
}

fn ac3() -> Outcome {
    let n = 8;
    let m = 200_000;
    let mut worst = 0.0f64;
    for real in [true, false] {
        let base = random_signal(n, real, 31);
        let shift = C64::new(0.5, 0.0) - base.mean();
        let x = Signal::new(base.values().iter().map(|v| v + shift).collect(), real).unwrap();
        let batch = generate_observations(&x, m, 1.0, 32).unwrap();
        let sum = batch
            .observations
            .par_chunks(4096)
            .map(|c| {
                let mut s = CMat::zeros(n, n);
                for o in c {
                    s += bispectrum_of(&Signal::from_complex(o.clone()).unwrap());
                }
                s
            })
            .reduce(|| CMat::zeros(n, n), |a, b| a + b);
        let mean = sum / C64::new(m as f64, 0.0);
        let scaled = (mean - bispectrum_of(&x)) / C64::new((n * n) as f64 * 0.5, 0.0);
        let a = bias_pattern(n, real);
        for k1 in 0..n {
            for k2 in 0..n {
                worst = worst.max((scaled[(k1, k2)] - a[k1][k2]).norm());
            }
        }
    }
    outcome(worst <= 0.1, format!("max entrywise deviation from A (real and complex) = {worst:.4} (tol 0.1)"))
}

fn ac4() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in 5..=33 {
        for real in [true, false] {
            for t in 0..20u64 {
                let x = nonvanishing(n, real, 40_000 + 100 * n as u64 + t, 1e-3);
                let y = fft(x.values());
                let yt = phase_of(&y).into_values();
                let ph = frequency_marching(&normalized_bispectrum(&bispectrum_of(&x)), yt[0], yt[1]);
                let rec: Vec<C64> = y.iter().zip(ph.values()).map(|(a, p)| a.norm() * p).collect();
                let xh = Signal::new(ifft(&rec), real).unwrap();
                worst = worst.max(relative_error(&x, &xh).unwrap());
                count += 1;
            }
        }
    }
    outcome(worst < 1e-8, format!("{count} signals, worst relative error {worst:.2e} (tol 1e-8)"))
}

fn random_problem(n: usize, real: bool, rng: &mut ChaCha8Rng) -> PhaseProblem {
    let b = CMat::from_fn(n, n, |_, _| {
        let v = cplx(rng);
        v / v.norm()
    });
    let w = RMat::from_fn(n, n, |_, _| rng.gen_range(0.2..1.5));
    PhaseProblem::new(&b, &w, real, C64::new(1.0, 0.0)).unwrap()
}

fn ac5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let (mut inv, mut adj, mut l4, mut fd_g, mut fd_h, mut l9) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for trial in 0..20 {
        let real = trial % 2 == 1;
        let n = 7 + trial % 5;
        let p = random_problem(n, real, &mut rng);
        let kind = p.kind();
        let z = random_point(kind, n, C64::new(1.0, 0.0), &mut rng);
        let f = p.cost(&z);
        for m in 0..n {
            inv = inv.max((p.cost(&modulate(&z, m)) - f).abs() / f.abs().max(1.0));
        }
        let u: Vec<C64> = (0..n).map(|_| cplx(&mut rng)).collect();
        let x = CMat::from_fn(n, n, |_, _| cplx(&mut rng));
        let lhs = inner(&u, &p.m_adj(&x));
        let rhs: f64 = p.m_of_z(&u).iter().zip(x.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        adj = adj.max((lhs - rhs).abs() / rhs.abs().max(1.0));
        let uu = nalgebra::DVector::from_vec(u.clone());
        l4 = l4.max(rel_vec(&p.m_adj(&(&uu * uu.adjoint())), &p.m_apply(&u, &u)));
        let dz: Vec<C64> = (0..n).map(|_| cplx(&mut rng)).collect();
        let h = 1e-5;
        let zp: Vec<C64> = u.iter().zip(&dz).map(|(a, b)| a + b * h).collect();
        let zm: Vec<C64> = u.iter().zip(&dz).map(|(a, b)| a - b * h).collect();
        let fd = (p.cost(&zp) - p.cost(&zm)) / (2.0 * h);
        let an = inner(&p.egrad(&u), &dz);
        fd_g = fd_g.max((fd - an).abs() / an.abs().max(1.0));
        let gfd: Vec<C64> = p.egrad(&zp).iter().zip(p.egrad(&zm)).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        fd_h = fd_h.max(rel_vec(&p.ehess(&u, &dz), &gfd));
        if real {
            let t = project_tangent(ManifoldKind::Real, &z, &dz);
            l9 = l9.max(rel_vec(&p.m_apply(&z, &t), &p.m_apply(&t, &z)));
        }
    }
    // Second-order bound at converged points of noiseless unit-weight problems.
    let bound = 2.0 * (3f64.sqrt() - 1.0) / 3.0;
    let mut worst_ratio = f64::INFINITY;
    let mut converged = 0;
    for (x, seed) in [(Signal::window(21, 10, 1.0).unwrap(), 1u64), (nonvanishing(21, false, 5, 1e-2), 2), (nonvanishing(15, true, 6, 1e-2), 3)] {
        let n = x.len();
        let bt = normalized_bispectrum(&bispectrum_of(&x));
        let yt = phase_of(&fft(x.values())).into_values();
        let p = PhaseProblem::unweighted(&bt, x.is_real(), yt[0]).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..5 {
            let z0 = random_point(p.kind(), n, yt[0], &mut r);
            let rep = rtr_solve(&p, &z0, &RtrOptions::default()).unwrap();
            if rep.converged {
                converged += 1;
                worst_ratio = worst_ratio.min(rep.cost / (bound * n as f64));
            }
        }
    }
    let pass = inv < 1e-10 && adj < 1e-10 && l4 < 1e-10 && fd_g < 1e-5 && fd_h < 1e-5 && l9 < 1e-10 && converged > 0 && worst_ratio >= 1.0;
    outcome(
        pass,
        format!(
            "modulation {inv:.1e}, adjoint {adj:.1e}, M^adj(zz*)=M(z)z {l4:.1e}, grad fd {fd_g:.1e}, hess fd {fd_h:.1e}, \
             M(z)ż=M(ż)z {l9:.1e}, min f/bound over {converged} converged runs {worst_ratio:.2}"
        ),
    )
}

fn ac6() -> Outcome {
    // ADMM leaves ‖Z − zz*‖ at roughly 150× its stopping tolerance, so the
    // solver runs at 1e−8 here; the gap at the library default is reported too.
    let tight = SdpOptions { tol: 1e-8, ..Default::default() };
    let (mut phase_err, mut gap, mut default_gap) = (0.0f64, 0.0f64, 0.0f64);
    let mut unconverged = 0;
    for n in 5..=15 {
        for t in 0..3u64 {
            let x = nonvanishing(n, true, 600 + 10 * n as u64 + t, 1e-2);
            let b = bispectrum_of(&x);
            let w = b.map(|v| v.norm());
            let yt = phase_of(&fft(x.values())).into_values();
            let p = SdpProblem::new(&normalized_bispectrum(&b), &w, yt[0], Some(yt[1]), true).unwrap();
            let z_gap = |rep: &mra_core::sdp::SdpReport| {
                let v = nalgebra::DVector::from_vec(rep.z.clone());
                frob(&(&rep.z_matrix - &v * v.adjoint()))
            };
            default_gap = default_gap.max(z_gap(&sdp_solve(&p, &SdpOptions::default()).unwrap()));
            let rep = sdp_solve(&p, &tight).unwrap();
            if !rep.converged {
                unconverged += 1;
            }
            let ph = phase_of(&rep.z).into_values();
            phase_err = phase_err.max(ph.iter().zip(&yt).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));
            gap = gap.max(z_gap(&rep));
        }
    }
    outcome(
        phase_err < 1e-4 && gap < 1e-4 && unconverged == 0,
        format!(
            "33 problems at solver tol 1e-8: max phase error {phase_err:.1e}, max ‖Z−zz*‖ {gap:.1e} (tol 1e-4), \
             {unconverged} unconverged; gap at default solver tol {default_gap:.1e}"
        ),
    )
}

fn ac7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut accepted = 0;
    let mut counterexamples = 0;
    let samples = 100_000;
    for n in 4..=8usize {
        for trial in 0..samples {
            let mut u = vec![C64::new(1.0, 0.0); n];
            for k in 2..=(n - 1) / 2 {
                // Half the draws use N-th roots of unity, which is where any
                // counterexample would have to live for the filter to pass.
                let th = if trial % 2 == 0 {
                    2.0 * PI * rng.gen_range(0..n) as f64 / n as f64
                } else {
                    rng.gen_range(-PI..PI)
                };
                u[k] = C64::from_polar(1.0, th);
                u[n - k] = u[k].conj();
            }
            if n % 2 == 0 {
                u[n / 2] = C64::new(if rng.gen_bool(0.5) { 1.0 } else { -1.0 }, 0.0);
            }
            if check_lemma_la(&u) {
                accepted += 1;
                if u.iter().any(|v| (v - 1.0).norm() > 1e-9) {
                    counterexamples += 1;
                }
            }
        }
    }
    outcome(
        counterexamples == 0,
        format!("{} samples per N for N=4..8, {accepted} passed the filter, {counterexamples} counterexamples", samples),
    )
}

fn ac8() -> Outcome {
    let n = 15;
    let x = Signal::gaussian(n, 88).unwrap();
    let truth = bispectrum_of(&x);
    let err = |sigma: f64, m: usize, salt: u64| -> f64 {
        (0..10u64)
            .map(|t| {
                let batch = generate_observations(&x, m, sigma, salt + t).unwrap();
                let mut acc = InvariantAccumulator::new(n, sigma, true);
                acc.accumulate_batch(&batch).unwrap();
                let e = acc.finalize().unwrap();
                frob(&(&e.bispec_hat - &truth)) / frob(&truth)
            })
            .sum::<f64>()
            / 10.0
    };
    let e1 = err(1.0, 500, 8000);
    let e2 = err(2.0, 64 * 500, 9000);
    let ratio = e2 / e1;
    outcome(
        (0.5..=2.0).contains(&ratio),
        format!("error(σ=1, M=500) = {e1:.4}, error(σ=2, M=32000) = {e2:.4}, ratio {ratio:.3} (allowed [0.5, 2])"),
    )
}

fn stats(res: &ExperimentResults, method: Method, sigma: f64, m: usize) -> (f64, f64) {
    let a = res.find(method.name(), sigma, m).expect("cell present");
    (a.mean_rel_error, a.stderr_rel_error)
}

fn ac9() -> Outcome {
    let mut cfg = ExperimentConfig::preset("figure3").unwrap();
    cfg.sigma_grid = vec![1.0];
    cfg.m_grid = vec![1000];
    cfg.repetitions = 5;
    let chain = [Method::Oracle, Method::Em, Method::Manifold, Method::Fm];
    cfg.tasks = chain.iter().map(|&m| Task::Recover(m)).collect();
    let low = run_experiment(&cfg).unwrap();
    let mut pass = true;
    let mut detail = String::from("σ=1,M=1e3:");
    for w in chain.windows(2) {
        let (ma, sa) = stats(&low, w[0], 1.0, 1000);
        let (mb, sb) = stats(&low, w[1], 1.0, 1000);
        // One standard error of the difference of the two means.
        let ok = ma <= mb + (sa * sa + sb * sb).sqrt();
        pass &= ok;
        detail += &format!(" {}={ma:.3}±{sa:.3} {}", w[0], if ok { "≤" } else { ">" });
    }
    let (mf, sf) = stats(&low, Method::Fm, 1.0, 1000);
    detail += &format!(" fm={mf:.3}±{sf:.3};");

    let mut cfg = ExperimentConfig::preset("figure5").unwrap();
    cfg.sigma_grid = vec![4.0];
    cfg.repetitions = 5;
    let invariant = [Method::Fm, Method::Direct, Method::Manifold, Method::Iterps, Method::Unwrap, Method::Sdp];
    cfg.tasks = invariant.iter().chain([&Method::Em]).map(|&m| Task::Recover(m)).collect();
    let high = run_experiment(&cfg).unwrap();
    let (best, bm, _) = invariant
        .iter()
        .map(|&m| {
            let (mean, se) = stats(&high, m, 4.0, 10000);
            (m, mean, se)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let (em, se) = stats(&high, Method::Em, 4.0, 10000);
    let ok = bm <= em + se;
    pass &= ok;
    let (man, _) = stats(&high, Method::Manifold, 4.0, 10000);
    let (sdp, _) = stats(&high, Method::Sdp, 4.0, 10000);
    detail += &format!(" σ=4,M=1e4: best invariant {best}={bm:.3} {} em={em:.3}±{se:.3} (logged: manifold {man:.3}, sdp {sdp:.3})", if ok { "≤" } else { ">" });
    outcome(pass, detail)
}

fn ac10() -> Outcome {
    let x = Signal::gaussian(41, 10).unwrap();
    let batch = generate_observations(&x, 10_000, 1.0, 11).unwrap();
    let mut seq = InvariantAccumulator::new(41, 1.0, true);
    seq.accumulate_batch(&batch).unwrap();
    let shards: Vec<InvariantAccumulator> = batch
        .observations
        .par_chunks(2500)
        .map(|c| {
            let mut a = InvariantAccumulator::new(41, 1.0, true);
            for o in c {
                a.accumulate(o).unwrap();
            }
            a
        })
        .collect();
    let merged = shards.iter().skip(1).fold(shards[0].clone(), |acc, s| acc.merge(s).unwrap());
    let (a, b) = (seq.finalize().unwrap(), merged.finalize().unwrap());
    let db = frob(&(&a.bispec_hat - &b.bispec_hat)) / frob(&a.bispec_hat);
    let pn = a.power_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dp = a.power_hat.iter().zip(&b.power_hat).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt() / pn;
    let dm = (a.mu_hat - b.mu_hat).norm() / a.mu_hat.norm().max(1e-300);
    let worst = db.max(dp).max(dm);
    outcome(shards.len() == 4 && worst <= 1e-9, format!("{} shards, relative differences: bispectrum {db:.1e}, power {dp:.1e}, mean {dm:.1e} (tol 1e-9)", shards.len()))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, f64, fn() -> Outcome); 10] = [
        (1, "noiseless exact recovery", 120.0, ac1),
        (2, "estimation error slope vs M", 300.0, ac2),
        (3, "raw bispectrum bias pattern", 120.0, ac3),
        (4, "frequency marching exactness", 60.0, ac4),
        (5, "manifold geometry suite", 60.0, ac5),
        (6, "SDP exactness", 180.0, ac6),
        (7, "randomized nonneg-DFT uniqueness search", 60.0, ac7),
        (8, "sample complexity scaling", 180.0, ac8),
        (9, "method ordering", 600.0, ac9),
        (10, "streaming equivalence", 60.0, ac10),
    ];
    let mut passed = 0;
    for (id, name, budget, f) in criteria {
        let t0 = Instant::now();
        let o = f();
        let secs = t0.elapsed().as_secs_f64();
        let ok = o.pass && secs <= budget;
        if ok {
            passed += 1;
        }
        println!("AC{id} {} {name}: {} [{secs:.1}s of {budget:.0}s]", if ok { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {passed}/10 criteria passed");
    if passed == 10 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
