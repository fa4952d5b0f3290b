//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. The construction criteria share one family cache on the
//! reference problem (speeds 1 and 2, 4096 points over 200, S = 12, t0 = 5).

use std::process::ExitCode;
use std::time::Instant;

use gkdv_core::diagnostics::{
    alpha_ode_residual, fit_rate, mass_monotonicity, projection_series, psi, psi_prime, psi_third,
    weights, Classification,
};
use gkdv_core::linearized::evans::evans_eigenvalue;
use gkdv_core::profiles::decay_distance;
use gkdv_core::{
    classify, evolve, make_grid, modulate, parse_config, prepare, q_profile, solve_spectrum,
    spectral_derivative, uniqueness_residual, EvolveConfig, FamilyCache, Field, GridSpec,
    Prepared, ShootExit, SolitonFamily, Trajectory,
};

const P: u32 = 6;

const REFERENCE: &str = r#"
[family]
p = 6
speeds = [1.0, 2.0]
shifts = [-20.0, 0.0]

[grid]
num_points = 4096
domain_length = 200.0
origin = -100.0

[evolve]
dt = 1.25e-4
record_stride = 80

[horizons]
S = 12.0
t0 = 5.0
"#;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, detail: String, started: Instant) {
        if !pass {
            self.failures += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("{id} {verdict}: {detail} [{:.1}s]", started.elapsed().as_secs_f64());
    }

    fn error(&mut self, id: &str, e: impl std::fmt::Display, started: Instant) {
        self.line(id, false, format!("error: {e}"), started);
    }
}

fn grid_for(c: f64, n: usize) -> GridSpec {
    let width = 1.2 * 2.0 * decay_distance(P, c, 1e-13);
    make_grid(n, width, -width / 2.0).unwrap()
}

fn sup(f: &Field) -> f64 {
    f.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn ac1(r: &mut Report) {
    let t = Instant::now();
    let mut worst_ode = 0.0f64;
    let mut worst_mass = 0.0f64;
    let mass = |c: f64| {
        let q = q_profile(P, c, &grid_for(c, 4096), 0.0).unwrap();
        (q.dot(&q), q)
    };
    let (m1, _) = mass(1.0);
    for c in [0.5, 1.0, 2.0, 4.0] {
        let (m, q) = mass(c);
        let qxx = spectral_derivative(&q, 2).unwrap();
        let res = q.zip_map(&qxx, |q, qxx| qxx - c * q + q.powi(P as i32));
        worst_ode = worst_ode.max(sup(&res) / sup(&q));
        let predicted = m1 * c.powf(2.0 / (P as f64 - 1.0) - 0.5);
        worst_mass = worst_mass.max((m - predicted).abs() / predicted);
    }
    r.line(
        "AC-1",
        worst_ode < 1e-10 && worst_mass < 1e-8,
        format!("ODE residual {worst_ode:.2e} (< 1e-10), mass scaling error {worst_mass:.2e} (< 1e-8)"),
        t,
    );
}

fn ac2(r: &mut Report) {
    let t = Instant::now();
    let grids = [(0.25, 160.0), (1.0, 100.0), (2.25, 100.0), (4.0, 64.0)];
    let mut pts = Vec::new();
    for (c, len) in grids {
        let g = make_grid(2048, len, -len / 2.0).unwrap();
        match solve_spectrum(P, c, &g) {
            Ok(b) => pts.push((c, b.e_c)),
            Err(e) => return r.error("AC-2", e, t),
        }
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let e0 = pts[1].1;
    let oracle = match evans_eigenvalue(P, 1.0) {
        Ok(v) => v,
        Err(e) => return r.error("AC-2", e, t),
    };
    let rel = (e0 - oracle).abs() / oracle;
    r.line(
        "AC-2",
        (slope - 1.5).abs() < 1e-5 && rel < 1e-6,
        format!("log-log slope {slope:.8} (|s - 1.5| < 1e-5), e0 {e0:.10} vs shooting {oracle:.10}, rel {rel:.2e} (< 1e-6)"),
        t,
    );
}

fn ac3(r: &mut Report, prep: &Prepared) {
    let t = Instant::now();
    let mut failed = Vec::new();
    let mut detail = Vec::new();
    for b in prep.bases() {
        let checks = b.checks();
        for (name, ok) in checks.flags() {
            if !ok {
                failed.push(format!("c={} {name}", b.c));
            }
        }
        detail.push(format!("c={} e_c {:.6}", b.c, b.e_c));
    }
    let pass = failed.is_empty();
    let tail = if pass {
        "all basis checks pass".to_string()
    } else {
        format!("failed: {}", failed.join(", "))
    };
    r.line("AC-3", pass, format!("{}; {tail}", detail.join(", ")), t);
}

fn ac4(r: &mut Report, prep: &Prepared) {
    let t = Instant::now();
    let g = *prep.frame.grid();
    let basis = prep.frame.basis(0);
    let x0 = basis.center;
    let q = q_profile(P, 1.0, &g, x0).unwrap();

    let cfg = EvolveConfig::new(1.25e-4, 0.0, 5.0, 400);
    let traj = match evolve(&q, P, &cfg) {
        Ok(tr) => tr,
        Err(e) => return r.error("AC-4", e, t),
    };
    let (_, last) = traj.last().unwrap();
    let exact = q_profile(P, 1.0, &g, x0 + 5.0).unwrap();
    let transport = (last - &exact).h1_norm();
    let (dm, de) = traj.conservation_drift();

    // Y^+ decays under the forward flow, so the unstable growth is seen
    // backward in time.
    let delta = 1e-6;
    let mut u0 = q.clone();
    u0.axpy(delta, &basis.y_plus);
    let back = EvolveConfig::new(-1.25e-4, 0.0, -8.0, 80);
    let single = SolitonFamily::new(P, &[1.0], &[x0]).unwrap();
    let growth = evolve(&u0, P, &back).and_then(|tr| {
        let mut series = Vec::new();
        let mut guess = vec![0.0];
        for (&s, u) in tr.times.iter().zip(&tr.snapshots) {
            let m = modulate(u, &single, s, &guess)?;
            guess = m.y.clone();
            let w = m.w.expect("modulation returns the remainder");
            series.push((-s, w.h1_norm()));
        }
        series.retain(|&(s, d)| s >= 1.0 && d < 1e-3);
        let hi = series.last().map_or(1.0, |p| p.0);
        // The fit reports decay; the distance grows in backward time.
        fit_rate(&series, (1.0, hi)).map(|f| -f.rate)
    });
    let growth = match growth {
        Ok(g) => g,
        Err(e) => return r.error("AC-4", e, t),
    };
    let rel = (growth - basis.e_c).abs() / basis.e_c;
    r.line(
        "AC-4",
        transport < 1e-6 && dm < 1e-9 && de < 1e-9 && rel < 0.05,
        format!(
            "transport H1 error {transport:.2e} (< 1e-6), mass drift {dm:.2e}, energy drift {de:.2e} (< 1e-9), \
             growth {growth:.5} vs e_c {:.5}, rel {rel:.2e} (< 0.05)",
            basis.e_c
        ),
        t,
    );
}

fn u_minus_r(prep: &Prepared, traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.times
        .iter()
        .zip(&traj.snapshots)
        .map(|(&t, u)| (t, (u - &prep.frame.multisoliton(t).unwrap()).h1_norm()))
        .collect()
}

fn ac5(r: &mut Report, prep: &Prepared, cache: &mut FamilyCache) {
    let t = Instant::now();
    let stages = match cache.stages(&[0.01, 0.0]) {
        Ok(s) => s,
        Err(e) => return r.error("AC-5", e, t),
    };
    let s1 = &stages[1];
    let series = u_minus_r(prep, &s1.trajectory);
    let fit = fit_rate(&series, (prep.shoot.t0, prep.shoot.s));
    let rate = fit.as_ref().map_or(f64::NAN, |f| f.rate);
    let converged = stages.iter().all(|s| s.exit == ShootExit::Converged);
    let tube = stages.iter().all(|s| s.tube_ok);
    let pass = s1.iterations <= 15 && converged && tube && rate >= prep.constants.gamma_eff;
    r.line(
        "AC-5",
        pass,
        format!(
            "stage-1 iterations {} (<= 15), exits {:?}, tube compliance {tube}, ||u - R|| rate {rate:.4} (>= gamma_eff {:.4})",
            s1.iterations,
            stages.iter().map(|s| s.exit).collect::<Vec<_>>(),
            prep.constants.gamma_eff
        ),
        t,
    );
}

fn classify_member(
    prep: &Prepared,
    cache: &mut FamilyCache,
    a: &[f64],
) -> gkdv_core::Result<(std::sync::Arc<Trajectory>, Classification)> {
    let traj = cache.trajectory(a)?;
    let c = classify(&traj, &prep.frame, cache, &prep.classify)?;
    Ok((traj, c))
}

fn ac6(r: &mut Report, prep: &Prepared, cache: &mut FamilyCache) -> Vec<(Vec<f64>, Vec<f64>)> {
    let t = Instant::now();
    let mut recovered = Vec::new();
    let mut pass = true;
    let mut detail = Vec::new();
    for a in [vec![0.01, 0.0], vec![0.01, 0.005]] {
        match classify_member(prep, cache, &a) {
            Ok((_, c)) => {
                for (j, (&want, p)) in a.iter().zip(&c.plateaus).enumerate() {
                    let ok = if want == 0.0 {
                        p.zero && p.max_abs < prep.classify.tol_class
                    } else {
                        !p.zero && ((p.value - want) / want).abs() < 0.05
                    };
                    pass &= ok;
                    detail.push(format!(
                        "A{}={want}: got {:.9e} (zero {}, max {:.2e})",
                        j + 1,
                        p.value,
                        p.zero,
                        p.max_abs
                    ));
                }
                recovered.push((a.clone(), c.a.clone()));
            }
            Err(e) => {
                pass = false;
                detail.push(format!("{a:?}: {e}"));
            }
        }
    }
    r.line(
        "AC-6",
        pass,
        format!("{}; tol_class {:.2e}", detail.join("; "), prep.classify.tol_class),
        t,
    );
    recovered
}

fn ac7(r: &mut Report, prep: &Prepared, cache: &mut FamilyCache) {
    let t = Instant::now();
    let pair = cache.trajectory(&[0.02, 0.0]).and_then(|b| Ok((cache.trajectory(&[0.01, 0.0])?, b)));
    let (a, b) = match pair {
        Ok(p) => p,
        Err(e) => return r.error("AC-7", e, t),
    };
    let t0 = prep.shoot.t0;
    let ua = a.at(t0).unwrap();
    let ub = b.at(t0).unwrap();
    let dist = (ub - ua).h1_norm();
    let bound = 0.5 * 0.01 * (-prep.frame.rates()[0] * t0).exp();
    r.line(
        "AC-7",
        dist >= bound,
        format!("||phi_(0.02,0) - phi_(0.01,0)|| at t0 = {dist:.3e} (>= {bound:.3e})"),
        t,
    );
}

fn ac8(r: &mut Report, prep: &Prepared, cache: &mut FamilyCache) {
    let t = Instant::now();
    let sigma0 = prep.constants.sigma0;
    let mut psi_err = 0.0f64;
    let mut third_ok = true;
    let g = *prep.frame.grid();
    for x in g.nodes() {
        psi_err = psi_err.max((psi(sigma0, x) + psi(sigma0, -x) - 1.0).abs());
        third_ok &= psi_third(sigma0, x).abs() <= sigma0 / 4.0 * psi_prime(sigma0, x).abs() * (1.0 + 1e-12) + 1e-300;
    }
    let traj = match cache.trajectory(&[0.01, 0.0]) {
        Ok(tr) => tr,
        Err(e) => return r.error("AC-8", e, t),
    };
    let mut partition = 0.0f64;
    let mut hx_ok = true;
    let mut ht_ok = true;
    for &s in traj.times.iter().step_by(10) {
        let w = weights(&prep.family, sigma0, s, &g);
        let mut total = Field::zeros(g);
        for p in &w.phi {
            total.axpy(1.0, p);
        }
        partition = partition.max(total.values().iter().fold(0.0, |m, v| m.max((v - 1.0).abs())));
        hx_ok &= w.h_x.values().iter().all(|&v| v <= 0.0);
        ht_ok &= w.h_t.values().iter().zip(w.h_x.values()).all(|(&ht, &hx)| ht >= sigma0 * hx.abs() * (1.0 - 1e-12));
    }
    let mono = mass_monotonicity(&prep.frame, &traj, sigma0);
    let (mono_ok, worst) = match &mono {
        Ok(m) => (m.iter().all(|m| m.pass), m.iter().fold(0.0f64, |a, m| a.max(m.worst_ratio))),
        Err(_) => (false, f64::NAN),
    };
    r.line(
        "AC-8",
        psi_err < 1e-14 && third_ok && partition < 1e-14 && hx_ok && ht_ok && mono_ok,
        format!(
            "psi symmetry {psi_err:.1e}, |psi'''| bound {third_ok}, partition {partition:.1e}, h_x <= 0 {hx_ok}, \
             h_t >= sigma0|h_x| {ht_ok}, mass monotonicity {mono_ok} (worst ratio {worst:.3})"
        ),
        t,
    );
}

fn ac9(r: &mut Report, prep: &Prepared, cache: &mut FamilyCache) {
    let t = Instant::now();
    let traj = match cache.trajectory(&[0.01, 0.0]) {
        Ok(tr) => tr,
        Err(e) => return r.error("AC-9", e, t),
    };
    let rates = prep.frame.rates();
    let series = projection_series(&prep.frame, &traj, |_, s, u| Ok(u - &prep.frame.multisoliton(s)?));
    let series = match series {
        Ok(s) => s,
        Err(e) => return r.error("AC-9", e, t),
    };
    let res = match alpha_ode_residual(&series, &rates) {
        Ok(v) => v,
        Err(e) => return r.error("AC-9", e, t),
    };
    let target = 0.9 * (rates[0] + prep.constants.gamma_eff);
    let mut env_rates = Vec::new();
    for k in 0..rates.len() {
        let mut env = Vec::with_capacity(series.times.len());
        let mut m = 0.0f64;
        for i in (0..series.times.len()).rev() {
            m = m.max(series.alpha_plus[k][i].abs());
            env.push((series.times[i], m));
        }
        env.reverse();
        env_rates.push(fit_rate(&env, (prep.shoot.t0, prep.shoot.s)).map_or(f64::NAN, |f| f.rate));
    }
    let worst = res.worst();
    r.line(
        "AC-9",
        worst <= 0.1 && env_rates.iter().all(|&e| e >= target),
        format!("alpha ODE residual {worst:.2e} (<= 0.1), alpha+ envelope rates {env_rates:.4?} (>= {target:.4})"),
        t,
    );
}

fn ac10(r: &mut Report, prep: &Prepared, cache: &mut FamilyCache, recovered: &[(Vec<f64>, Vec<f64>)]) {
    let t = Instant::now();
    let prop = prep.propagated_tolerance();
    let theta_max = |s: &[(f64, f64)]| s.iter().fold(0.0f64, |m, p| m.max(p.1));
    let mut pass = !recovered.is_empty();
    let mut detail = Vec::new();
    for (a, got) in recovered {
        let traj = match cache.trajectory(a) {
            Ok(tr) => tr,
            Err(e) => return r.error("AC-10", e, t),
        };
        match uniqueness_residual(&traj, got, cache, &prep.frame) {
            Ok(th) => {
                let m = theta_max(&th);
                pass &= m < 10.0 * prop;
                detail.push(format!("{a:?} round trip theta {m:.3e}"));
            }
            Err(e) => return r.error("AC-10", e, t),
        }
    }
    let base = cache.trajectory(&[0.01, 0.0]);
    let mismatch = base.and_then(|tr| uniqueness_residual(&tr, &[0.02, 0.0], cache, &prep.frame));
    match mismatch {
        Ok(th) => {
            let m = theta_max(&th);
            pass &= m >= 100.0 * prop;
            detail.push(format!("mismatched theta {m:.3e} (>= {:.3e})", 100.0 * prop));
        }
        Err(e) => return r.error("AC-10", e, t),
    }
    r.line(
        "AC-10",
        pass,
        format!("{} (round trips < {:.3e})", detail.join(", "), 10.0 * prop),
        t,
    );
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut r = Report { failures: 0 };
    ac1(&mut r);
    ac2(&mut r);

    let t = Instant::now();
    let prep = match parse_config(REFERENCE).and_then(|c| prepare(&c)) {
        Ok(p) => p,
        Err(e) => {
            for id in ["AC-3", "AC-4", "AC-5", "AC-6", "AC-7", "AC-8", "AC-9", "AC-10"] {
                r.error(id, &e, t);
            }
            return ExitCode::FAILURE;
        }
    };
    ac3(&mut r, &prep);
    ac4(&mut r, &prep);

    let mut cache = FamilyCache::new(&prep.frame, prep.shoot.clone());
    ac5(&mut r, &prep, &mut cache);
    let recovered = ac6(&mut r, &prep, &mut cache);
    ac7(&mut r, &prep, &mut cache);
    ac8(&mut r, &prep, &mut cache);
    ac9(&mut r, &prep, &mut cache);
    ac10(&mut r, &prep, &mut cache, &recovered);

    println!(
        "acceptance: {} of 10 criteria failed [{:.1}s]",
        r.failures,
        started.elapsed().as_secs_f64()
    );
    if r.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
