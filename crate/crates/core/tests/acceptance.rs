//! Acceptance suite: one PASS/FAIL line per criterion.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plate_core::elasticity::{quadratic_form_c0, reduced_min_oracle, LameParams, SymMatrix};
use plate_core::energy::BoundaryDatum;
use plate_core::geometry::{bad_cube_pieces, classify_cubes, projection_measure, CrackSurface, ShiftedGrid};
use plate_core::interpolation::{build_approximant, mismatch_fraction, structure_preservation_check, weak_probe, FnField};
use plate_core::kirchhoff_love::{extract_psi, jump_decomposition_check, kl_average, kl_lift, kl_verify, tol_fd, KLState};
use plate_core::lab::{jump_energy_average, minima_sweep, recovery_sweep, DatumSpec, RecoverySweep, Smoothing};
use plate_core::mesh::BoxGrid;
use plate_core::minimize::{minimize_limit, SolverConfig};

type Check = (bool, String);

fn lame2() -> LameParams {
    LameParams::new(1.0, 1.0, 2).unwrap()
}

fn bar(cells: usize) -> BoxGrid {
    BoxGrid::new(vec![0.0], vec![1.0], vec![cells]).unwrap()
}

/// Least-squares slope of `log err` against `log h`.
fn loglog_slope(h: &[f64], err: &[f64]) -> f64 {
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn reduced_tensor_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for n in [2usize, 3] {
        for _ in 0..10 {
            let mu = rng.random_range(0.1..5.0);
            // 2 mu + n lambda > 0
            let lambda = rng.random_range(-2.0 * mu / n as f64 + 1e-3..5.0);
            let p = LameParams::new(lambda, mu, n).unwrap();
            for _ in 0..200 {
                let m = n - 1;
                let mut e = SymMatrix::zeros(m);
                for i in 0..m {
                    for j in i..m {
                        e.set(i, j, rng.random_range(-1.0..1.0));
                    }
                }
                let (oracle, _) = reduced_min_oracle(&p, &e).unwrap();
                let closed = quadratic_form_c0(&p, &e).unwrap();
                worst = worst.max((oracle - closed).abs() / closed.abs().max(1e-300));
            }
        }
    }
    (worst <= 1e-9, format!("max relative gap {worst:.2e}"))
}

fn griffith_crossover() -> Check {
    let p = lame2();
    let cfg = SolverConfig::default();
    let mut kinds = Vec::new();
    let mut totals = Vec::new();
    let ts: Vec<f64> = (0..=35).map(|i| 0.5 + 0.02 * i as f64).collect();
    for &t in &ts {
        let g = BoundaryDatum::new(DatumSpec::Stretch(t).build(&bar(256)).unwrap()).unwrap();
        let (_, e) = minimize_limit(&g, &p, &cfg).unwrap();
        kinds.push(e.surface + e.boundary_penalty > 0.0);
        totals.push(e.total);
    }
    let switches: Vec<usize> = (1..kinds.len()).filter(|&i| kinds[i] != kinds[i - 1]).collect();
    let crossover = 3f64.sqrt() / 2.0;
    let energies_ok = ts
        .iter()
        .zip(&totals)
        .all(|(t, e)| (e - (4.0 / 3.0 * t * t).min(1.0)).abs() < 1e-8);
    match switches.as_slice() {
        [i] if !kinds[0] => {
            let t = ts[*i];
            let rel = (t - crossover).abs() / crossover;
            (rel <= 0.05 && energies_ok, format!("switch at t = {t:.2} ({:.1}% from crossover), closed forms matched: {energies_ok}", 100.0 * rel))
        }
        _ => (false, format!("switch indices {switches:?}")),
    }
}

fn recovery_family() -> RecoverySweep {
    let s = DatumSpec::CrackedStretch { t: 1.0, jump: 0.1 }.build(&bar(256)).unwrap();
    recovery_sweep(&s, &lame2(), &[1e-1, 3e-2, 1e-2, 3e-3, 1e-3], 32, Smoothing::SqrtRho).unwrap()
}

fn recovery_convergence(sweep: &RecoverySweep) -> Check {
    let gaps: Vec<f64> = sweep.rows.iter().map(|r| r.rel_gap).collect();
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
    let last = *gaps.last().unwrap();
    let gaps_s: Vec<String> = gaps.iter().map(|g| format!("{g:.4}")).collect();
    (monotone && last <= 0.02, format!("relative gaps [{}]", gaps_s.join(", ")))
}

fn minima_convergence() -> Check {
    let p = lame2();
    let cfg = SolverConfig::default();
    let mut ok = true;
    let mut detail = Vec::new();
    for t in [0.5, 1.2] {
        let g = BoundaryDatum::new(DatumSpec::Stretch(t).build(&bar(128)).unwrap()).unwrap();
        let rows = minima_sweep(&g, &p, &[1e-1, 1e-2], 16, &cfg, 1e-3, 1e-6).unwrap();
        for r in &rows {
            let surface_ok = r.surface_gap <= r.face_area;
            let gap_ok = r.rho > 0.05 || r.rel_gap <= 0.05;
            ok &= surface_ok && gap_ok;
            detail.push(format!("t={t} rho={} gap={:.4} surface_gap={:.3}", r.rho, r.rel_gap, r.surface_gap));
        }
    }
    (ok, detail.join("; "))
}

fn jump_energy_averaging() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (lo, hi) = (vec![-0.25, -0.25], vec![1.25, 1.25]);
    let s2 = std::f64::consts::SQRT_2;
    // vectors e1, e2, e1+e2, e1-e2, e2-e1
    let oracle = |nu: [f64; 2]| nu[0].abs() + nu[1].abs() + ((nu[0] + nu[1]).abs() + 2.0 * (nu[0] - nu[1]).abs()) / s2;
    let vertical = CrackSurface::segment([0.5, 0.0], [0.5, 1.0]).unwrap();
    let tilted = CrackSurface::segment([0.1, 0.8], [0.9, 0.2]).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, crack, nu, tabulated) in [("vertical", vertical, [1.0, 0.0], 3.1213), ("tilted", tilted, [0.6, 0.8], 2.6728)] {
        let st = jump_energy_average(&crack, 1.0 / 64.0, 200, &lo, &hi, &mut rng).unwrap();
        let target = oracle(nu) * crack.measure();
        let rel = (st.mean - target).abs() / target;
        ok &= rel <= 0.03 && (target - tabulated).abs() < 1e-4;
        detail.push(format!("{name}: mean {:.4} vs {target:.4} ({:.2}%)", st.mean, 100.0 * rel));
    }
    (ok, detail.join("; "))
}

fn projection_vanishing() -> Check {
    let crack = CrackSurface::segment([0.5, 0.0], [0.5, 1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let hs: Vec<f64> = (4..=8).map(|k| 0.5f64.powi(k)).collect();
    let mut means = Vec::new();
    for &h in &hs {
        let mut acc = 0.0;
        let samples = 8;
        for _ in 0..samples {
            let y = vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let grid = ShiftedGrid::new(h, y, vec![-0.25, -0.25], vec![1.25, 1.25]).unwrap();
            let c = classify_cubes(&grid, &crack).unwrap();
            acc += projection_measure(2, &bad_cube_pieces(&c), &[0.0, 1.0], h / 8.0).unwrap().value;
        }
        means.push(acc / samples as f64);
    }
    let ratios: Vec<f64> = means.windows(2).map(|w| w[1] / w[0]).collect();
    let ok = ratios.iter().all(|r| (0.4..=0.6).contains(r));
    let rs: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    (ok, format!("halving ratios [{}]", rs.join(", ")))
}

fn approximant_properties() -> Check {
    let crack = CrackSurface::segment([0.5, -1.0], [0.5, 2.0]).unwrap();
    let v = FnField::everywhere(2, |x| {
        let s = if x[0] > 0.5 { 1.0 } else { 0.0 };
        vec![0.5 * x[0] + s, 0.25 * x[0] - 0.5 * s]
    })
    .with_gradient(|_| vec![vec![0.5, 0.0], vec![0.25, 0.0]]);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let hs: Vec<f64> = (4..=8).map(|k| 0.5f64.powi(k)).collect();
    let (lo, hi) = ([0.0, 0.0], [1.0, 1.0]);
    let phi = |x: &[f64]| (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin();
    let mut mism = Vec::new();
    let mut weak = Vec::new();
    let mut structure = true;
    for &h in &hs {
        let y = vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let margin = 5.0 * h;
        let grid = ShiftedGrid::new(h, y, vec![-margin; 2], vec![1.0 + margin; 2]).unwrap();
        let a = build_approximant(&v, &grid, &crack, &lo, &hi).unwrap();
        mism.push(mismatch_fraction(&a, &v, 1e-3, 400).unwrap());
        let (d, c) = weak_probe(&a, &a.strain(0).unwrap(), &v, &phi).unwrap();
        weak.push((d - c).abs());
        for j in 0..2 {
            structure &= structure_preservation_check(&a, 1, j, 16) == Some(true);
        }
    }
    let monotone = mism.windows(2).all(|w| w[1] < w[0]);
    let slope = loglog_slope(&hs, &weak);
    let last = *mism.last().unwrap();
    (
        monotone && last < 0.01 && slope >= 0.9 && structure,
        format!("mismatch {:.4} -> {last:.4}, weak slope {slope:.2}, structure {structure}", mism[0]),
    )
}

fn random_kl_state(rng: &mut ChaCha8Rng, cells: usize) -> KLState {
    let c: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (a, b, d, e, f) = (c[0], c[1], c[2], c[3], c[4]);
    let mut s = KLState::from_fns(
        bar(cells),
        move |x| vec![a * x[0] + b * x[0] * x[0]],
        move |x| d * x[0] * x[0] + e * x[0].powi(3) + f,
        move |x| vec![2.0 * d * x[0] + 3.0 * e * x[0] * x[0]],
    )
    .unwrap();
    let cuts = rng.random_range(0..3);
    for _ in 0..cuts {
        let w = rng.random_range(1..cells - 1);
        s.set_cut(0, w, true).unwrap();
    }
    s
}

fn kl_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut ok = true;
    let mut notes = Vec::new();
    for _ in 0..20 {
        let s = random_kl_state(&mut rng, 32);
        let plate = BoxGrid::plate(&[0.0], &[1.0], &[32], 8).unwrap();
        let u = kl_lift(&s, &plate).unwrap();
        let avg = kl_average(&u).unwrap();
        let avg_ok = (0..33).all(|w| (avg.value(w)[0] - s.ubar(w)[0]).abs() < 1e-12);
        let psi = extract_psi(&u, -0.3, 0.2).unwrap();
        let tol = tol_fd(1.0 / 32.0, 10.0);
        let psi_ok = (0..33).all(|w| psi.psi[w].is_nan() || (psi.psi[w] - s.grad_un(w)[0]).abs() <= tol);
        let rep = kl_verify(&u);
        let jd = jump_decomposition_check(&s, &u);
        ok &= avg_ok && psi_ok && jd && rep.non_vertical_breaks == 0;
    }
    notes.push(format!("20 random states round-trip: {ok}"));
    let mut res = Vec::new();
    let hs: Vec<f64> = [16usize, 32, 64, 128].iter().map(|&c| 1.0 / c as f64).collect();
    for &h in &hs {
        let cells = (1.0 / h).round() as usize;
        let s = KLState::from_fns(bar(cells), |x| vec![0.2 * x[0]], |x| (2.0 * x[0]).sin(), |x| vec![2.0 * (2.0 * x[0]).cos()]).unwrap();
        let plate = BoxGrid::plate(&[0.0], &[1.0], &[cells], 8).unwrap();
        res.push(kl_verify(&kl_lift(&s, &plate).unwrap()).appgra_residual);
    }
    let slope = loglog_slope(&hs, &res);
    ok &= slope >= 1.9;
    notes.push(format!("appgra slope {slope:.2}"));
    (ok, notes.join("; "))
}

fn compactness(sweep: &RecoverySweep) -> Check {
    let ok = sweep.rows.iter().all(|r| r.compactness_holds());
    let worst = sweep
        .rows
        .iter()
        .map(|r| (r.an_norm / r.an_bound).max(r.nn_norm / r.nn_bound))
        .fold(0.0f64, f64::max);
    (ok, format!("{} rows, largest norm/bound ratio {worst:.3}", sweep.rows.len()))
}

fn report(index: usize, name: &str, limit: Option<Duration>, run: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let (pass, detail) = run();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let pass = pass && in_time;
    let budget = limit.map(|l| format!(" / {}s budget", l.as_secs())).unwrap_or_default();
    println!(
        "criterion {index} {name}: {} ({detail}; {:.2}s{budget})",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    pass
}

fn main() {
    let secs = Duration::from_secs;
    let mut all = true;
    all &= report(1, "reduced tensor identity", Some(secs(1)), reduced_tensor_identity);
    all &= report(2, "griffith bar crossover", Some(secs(30)), griffith_crossover);
    let start = Instant::now();
    let sweep = recovery_family();
    let family_time = start.elapsed();
    all &= report(3, "recovery convergence", Some(secs(60)), || {
        let (ok, detail) = recovery_convergence(&sweep);
        (ok && family_time <= secs(60), format!("{detail}, sweep {:.2}s", family_time.as_secs_f64()))
    });
    all &= report(4, "minima convergence", Some(secs(120)), minima_convergence);
    all &= report(5, "jump energy averaging", None, jump_energy_averaging);
    all &= report(6, "transversal projection vanishing", None, projection_vanishing);
    all &= report(7, "approximant properties", None, approximant_properties);
    all &= report(8, "kirchhoff-love structure", Some(secs(10)), kl_suite);
    all &= report(9, "compactness diagnostics", None, || compactness(&sweep));
    if !all {
        std::process::exit(1);
    }
}
