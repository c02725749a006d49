//! Acceptance suite. Runs every criterion at its pinned tolerance, prints
//! one line per criterion, and exits nonzero if any fails.

use std::time::Instant;

use infogame::value::default_threshold_constant;
use infogame::{
    azema_structure_residual, build_kernel, conjugate_pde_residual, convex_envelope,
    estimate_value_mc, fenchel_conjugate, load_builtin, non_revealing_set, path_diagnostics,
    perturb_kernel, play_match, posterior_consistency, solve_backward, stay_probability_estimate,
    synthesize_informed, DualLattice, ExactSampler, FixtureParams, GameSpec, MeanSe, PathSampler,
    Perturbation, SampleMode, SimplexGrid, SimplexPoint, TimeGrid, UninformedStrategy, ValueTable,
};
use infogame_cli::{run, Command, RunConfig};

const N_PATHS: usize = 100_000;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn fixture(name: &str) -> GameSpec<f64> {
    load_builtin(name, &FixtureParams::default()).unwrap()
}

fn solve(spec: &GameSpec<f64>, n: usize, m: usize) -> ValueTable<f64> {
    let grid = SimplexGrid::new(spec.dim, m).unwrap();
    solve_backward(spec, TimeGrid::new(0.0, spec.horizon, n).unwrap(), &grid).unwrap()
}

fn binary(p: f64) -> SimplexPoint<f64> {
    SimplexPoint::binary(p).unwrap()
}

/// Lower convex hull of `(xs, ys)` evaluated at `x`, by minimizing over
/// every chord that straddles `x`.
fn brute_vex(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut best = f64::INFINITY;
    for a in 0..xs.len() {
        if xs[a] > x {
            break;
        }
        for b in a..xs.len() {
            if xs[b] < x {
                continue;
            }
            let v = if xs[b] == xs[a] {
                ys[a]
            } else {
                ys[a] + (ys[b] - ys[a]) * (x - xs[a]) / (xs[b] - xs[a])
            };
            best = best.min(v);
        }
    }
    best
}

fn ex1_h(s: f64, p: f64) -> f64 {
    let alpha = 4.0 - s;
    -(2.0 * p - 1.0).abs() + alpha * (p * p + (1.0 - p) * (1.0 - p)).sqrt()
}

fn criterion_1() -> Verdict {
    let spec = fixture("reveal");
    let start = Instant::now();
    let table = solve(&spec, 200, 400);
    let secs = start.elapsed().as_secs_f64();
    let grid = table.grid();
    let err = (0..grid.len())
        .map(|j| (table.values(0)[j] - (1.0 - grid.point(j).coords()[0])).abs())
        .fold(0.0, f64::max);
    // envelope of H against the chord oracle
    let xs: Vec<f64> = grid.points().iter().map(|p| p.coords()[0]).collect();
    let order: Vec<usize> = {
        let mut o: Vec<usize> = (0..grid.len()).collect();
        o.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
        o
    };
    let h = table.hamiltonian(0);
    let env = convex_envelope(grid, h).unwrap();
    let sx: Vec<f64> = order.iter().map(|&j| xs[j]).collect();
    let sy: Vec<f64> = order.iter().map(|&j| h[j]).collect();
    let hull_err = (0..grid.len())
        .map(|j| (env.values()[j] - brute_vex(&sx, &sy, xs[j])).abs())
        .fold(0.0, f64::max);
    verdict(
        err <= 0.01 && secs < 5.0 && hull_err <= 1e-12,
        format!("max |V(0,p) - (1 - p1)| = {err:.3e} (<= 0.01), hull oracle gap {hull_err:.1e}, {secs:.2} s (< 5 s)"),
    )
}

fn criterion_2() -> Verdict {
    let spec = fixture("ex1");
    let start = Instant::now();
    let table = solve(&spec, 400, 400);
    let secs = start.elapsed().as_secs_f64();
    // VexH(s, p) on a fine mesh of s, by brute-force chords on 1001 points
    let xs: Vec<f64> = (0..=1000).map(|j| j as f64 / 1000.0).collect();
    let ps = [0.1, 0.3, 0.5, 0.7, 0.9];
    let ts = [0.0, 0.2, 0.4, 0.6, 0.8];
    let steps = 400;
    let ds = 1.0 / steps as f64;
    let vex: Vec<Vec<f64>> = (0..=steps)
        .map(|j| {
            let s = j as f64 * ds;
            let ys: Vec<f64> = xs.iter().map(|&x| ex1_h(s, x)).collect();
            ps.iter().map(|&p| brute_vex(&xs, &ys, p)).collect()
        })
        .collect();
    let mut worst: f64 = 0.0;
    for &t in &ts {
        let j0 = (t / ds).round() as usize;
        for (ip, &p) in ps.iter().enumerate() {
            // composite Simpson on [t, 1]
            let intervals = steps - j0;
            let mut acc = vex[j0][ip] + vex[steps][ip];
            for j in 1..intervals {
                acc += vex[j0 + j][ip] * if j % 2 == 1 { 4.0 } else { 2.0 };
            }
            let integral = acc * ds / 3.0;
            let v = table.value_at(t, &binary(p)).unwrap();
            worst = worst.max((v - integral).abs());
        }
    }
    verdict(worst <= 0.02 && secs < 20.0, format!("max over 25 (t,p) of |V - integral of VexH| = {worst:.3e} (<= 0.02), {secs:.2} s (< 20 s)"))
}

fn criterion_3() -> Verdict {
    let spec = fixture("counterexample");
    let table = solve(&spec, 400, 400);
    let grid = table.grid();
    let tg = table.time_grid();
    let mut early: f64 = 0.0;
    for t in [0.0, 0.2, 0.4] {
        let k = tg.nearest(t);
        early = early.max(table.values(k).iter().fold(0.0, |a, &v| a.max(v.abs())));
    }
    let lambda = |t: f64| 0.2 - 0.7 * t + 0.5 * t * t;
    let mut late: f64 = 0.0;
    for t in [0.7, 0.85] {
        let k = tg.nearest(t);
        for j in 0..grid.len() {
            let p1 = grid.point(j).coords()[0];
            late = late.max((table.values(k)[j] - lambda(t) * p1 * (1.0 - p1)).abs());
        }
    }
    // ∫ VexH(s, ½) ds over [0.55, 1]: zero before 0.7, (0.7 − s)/4 after
    let integral = -0.045 / 4.0;
    let v = table.value_at(0.55, &binary(0.5)).unwrap();
    let gap = (v - integral).abs();
    let (a, b, c) = (early <= 0.01, late <= 0.01, gap > 0.02);
    verdict(
        a && b && c,
        format!(
            "early max |V| = {early:.3e} (<= 0.01) {}; late max |V - L(t)p1p2| = {late:.3e} (<= 0.01) {}; \
             |V(0.55,1/2) - integral of VexH| = {gap:.4} (> 0.02) {}",
            ok(a),
            ok(b),
            ok(c)
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

fn criterion_4() -> Verdict {
    let cases = [
        ("reveal", 200, 400, binary(0.5)),
        ("ex1", 400, 400, binary(0.5)),
        (
            "autonomous3",
            100,
            60,
            SimplexPoint::new(vec![1.0 / 3.0; 3]).unwrap(),
        ),
    ];
    let mut all = true;
    let mut parts = Vec::new();
    for (name, n, m, p0) in cases {
        let start = Instant::now();
        let spec = fixture(name);
        let table = solve(&spec, n, m);
        let kernel = build_kernel(&table).unwrap();
        let sampler = PathSampler::new(&kernel, &p0, SampleMode::Unconditional, 1).unwrap();
        let value = table.values(0)[sampler.start()];
        let mc = estimate_value_mc(&sampler, &table, N_PATHS).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let gap = (mc.mean - value).abs();
        // 1e-9 absorbs rounding when every path has the same cost
        let pass = gap <= 3.0 * mc.se + 1e-9 && secs < 60.0;
        all &= pass;
        parts.push(format!(
            "{name}: |{:.6} - {value:.6}| = {gap:.2e}, SE {:.2e}, {secs:.1} s {}",
            mc.mean,
            mc.se,
            ok(pass)
        ));
    }
    verdict(all, parts.join("; "))
}

fn ex1_kernel() -> (ValueTable<f64>, infogame::MartingaleKernel<f64>) {
    let table = solve(&fixture("ex1"), 400, 400);
    let kernel = build_kernel(&table).unwrap();
    (table, kernel)
}

fn criterion_5(kernel: &infogame::MartingaleKernel<f64>) -> Verdict {
    let sampler = PathSampler::new(kernel, &binary(0.5), SampleMode::Joint, 2).unwrap();
    let report = posterior_consistency(&sampler, N_PATHS, 500).unwrap();
    verdict(
        report.max_deviation <= 0.02,
        format!(
            "max |P[i | p_k] - (p_k)_i| = {:.3e} over {} cells (<= 0.02)",
            report.max_deviation,
            report.cells.len()
        ),
    )
}

fn criterion_6(table: &ValueTable<f64>, kernel: &infogame::MartingaleKernel<f64>) -> Verdict {
    let p0 = binary(0.5);
    let base = PathSampler::new(kernel, &p0, SampleMode::Unconditional, 3).unwrap();
    let value = table.values(0)[base.start()];
    let mut all = true;
    let mut parts = Vec::new();
    for (label, mode) in [
        ("eager", Perturbation::Eager),
        ("delay", Perturbation::Delay),
        ("mix(0.5)", Perturbation::Mix(0.5)),
    ] {
        let perturbed = perturb_kernel(kernel, mode).unwrap();
        let sampler = PathSampler::new(&perturbed, &p0, SampleMode::Unconditional, 3).unwrap();
        let est = estimate_value_mc(&sampler, table, N_PATHS).unwrap();
        let margin = est.mean - value;
        let mut pass = est.mean >= value - 3.0 * est.se - 0.01;
        if label == "eager" {
            pass &= margin > 0.0;
        }
        all &= pass;
        parts.push(format!(
            "{label} margin {margin:+.4e} (SE {:.1e}) {}",
            est.se,
            ok(pass)
        ));
    }
    verdict(all, format!("V = {value:.6}; {}", parts.join(", ")))
}

fn criterion_7(table: &ValueTable<f64>, kernel: &infogame::MartingaleKernel<f64>) -> Verdict {
    let spec = fixture("ex1");
    let nrs = non_revealing_set(table, default_threshold_constant(&spec, table));
    let sampler = PathSampler::new(kernel, &binary(0.5), SampleMode::Unconditional, 4).unwrap();
    let d = path_diagnostics(table, &nrs, &sampler, N_PATHS).unwrap();
    verdict(
        d.in_h_fraction >= 0.99 && d.max_jump_residual <= 0.02,
        format!(
            "in_H fraction {:.5} (>= 0.99), max jump residual {:.2e} over {} jumps (<= 0.02)",
            d.in_h_fraction, d.max_jump_residual, d.jumps
        ),
    )
}

fn criterion_8(table: &ValueTable<f64>, kernel: &infogame::MartingaleKernel<f64>) -> Verdict {
    let azema = fixture("azema_h");
    let band = azema.band.clone().unwrap();
    let stay = stay_probability_estimate(&band, 0.01, 0.04, N_PATHS, 5).unwrap();
    let stay_ok = (stay.mean - 0.75).abs() <= 3.0 * stay.se;

    let ex1 = fixture("ex1");
    let p0 = 0.4;
    let exact = ExactSampler::new(ex1.band.clone().unwrap(), *table.time_grid(), p0, 6).unwrap();
    let generic = PathSampler::new(kernel, &binary(p0), SampleMode::Unconditional, 6).unwrap();
    let grid = table.grid();
    let knots = [100usize, 200, 300];
    let below = |x: f64| if x < 0.5 { 1.0 } else { 0.0 };
    let ex: Vec<Vec<f64>> = exact.map(N_PATHS, |p| {
        knots.iter().map(|&k| below(p.values[k])).collect()
    });
    let gen: Vec<Vec<f64>> = generic.map(N_PATHS, |p| {
        knots
            .iter()
            .map(|&k| below(grid.point(p.nodes[k + 1]).coords()[0]))
            .collect()
    });
    let mut marg_ok = true;
    let mut parts = Vec::new();
    for (j, &k) in knots.iter().enumerate() {
        let a = MeanSe::from_samples(&ex.iter().map(|r| r[j]).collect::<Vec<_>>());
        let b = MeanSe::from_samples(&gen.iter().map(|r| r[j]).collect::<Vec<_>>());
        let se = (a.se * a.se + b.se * b.se).sqrt();
        let pass = (a.mean - b.mean).abs() <= 3.0 * se;
        marg_ok &= pass;
        parts.push(format!("k={k}: {:.4} vs {:.4}", a.mean, b.mean));
    }
    verdict(
        stay_ok && marg_ok,
        format!(
            "stay probability {:.4} +- {:.4} vs 0.75 {}; lower-edge marginals exact vs kernel {} {}",
            stay.mean,
            stay.se,
            ok(stay_ok),
            parts.join(", "),
            ok(marg_ok)
        ),
    )
}

fn criterion_9() -> Verdict {
    let spec = fixture("azema_h");
    let sampler = ExactSampler::new(
        spec.band.clone().unwrap(),
        TimeGrid::new(0.0, 0.25, 2000).unwrap(),
        0.5,
        7,
    )
    .unwrap();
    let r = azema_structure_residual(&spec, &sampler, 10_000).unwrap();
    let qv_gap = (r.quadratic_variation.mean - 0.25).abs();
    verdict(
        r.residual.mean.abs() <= 0.01 && qv_gap <= 0.01,
        format!(
            "mean residual {:.2e} (<= 0.01), mean quadratic variation {:.5} (within 0.01 of 1/4)",
            r.residual.mean, r.quadratic_variation.mean
        ),
    )
}

fn criterion_10() -> Verdict {
    let start = Instant::now();
    let spec = fixture("reveal");
    let table = solve(&spec, 200, 400);
    let informed = synthesize_informed(&table, &spec).unwrap();
    let p0 = binary(0.5);
    let value = table.values(0)[table.grid().snap(&p0).unwrap().0];
    let catalog = [
        (
            "posterior_best_response",
            UninformedStrategy::PosteriorBestResponse,
        ),
        ("constant v=-1", UninformedStrategy::Constant(0)),
        ("constant v=+1", UninformedStrategy::Constant(1)),
        ("uniform", UninformedStrategy::UniformRandom),
    ];
    let mut all = true;
    let mut parts = Vec::new();
    for (label, strategy) in catalog {
        let r = play_match(&informed, strategy, &p0, N_PATHS, 8, 0).unwrap();
        let bound = 3.0 * r.payoff.se + 0.02;
        let mut pass = r.payoff.mean <= value + bound;
        if strategy == UninformedStrategy::PosteriorBestResponse {
            pass &= (r.payoff.mean - value).abs() <= bound;
        }
        all &= pass;
        parts.push(format!("{label} {:.4} {}", r.payoff.mean, ok(pass)));
    }
    let secs = start.elapsed().as_secs_f64();
    all &= secs < 60.0;
    verdict(
        all,
        format!("V = {value:.4}; {}; {secs:.1} s (< 60 s)", parts.join(", ")),
    )
}

fn criterion_11() -> Verdict {
    let spec = fixture("reveal");
    let table = solve(&spec, 400, 400);
    let lattice = DualLattice::new(2, 4.0, 400).unwrap();
    let conj = conjugate_pde_residual(&spec, &table, lattice, &[0, 100, 200, 300, 399]).unwrap();
    let terminal = fenchel_conjugate(table.grid(), table.values(400), lattice).unwrap();
    let terminal_gap = (0..lattice.len())
        .map(|j| {
            let q = lattice.point(j);
            (terminal.values[j] - q[0].max(q[1])).abs()
        })
        .fold(0.0, f64::max);
    let max_abs = conj.max_abs();
    verdict(
        max_abs <= 0.05 && terminal_gap <= 1e-12,
        format!(
            "max unmasked residual {max_abs:.3e} (<= 0.05, {:.2}% masked), terminal gap {terminal_gap:.1e} (<= 1e-12)",
            100.0 * conj.masked_fraction()
        ),
    )
}

fn criterion_12() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let text = "fixture = \"ex1\"\nn = 100\nm = 100\npaths = 20000\nseed = 42\np0 = [0.35, 0.65]\n";
    let cfg = RunConfig::parse(text).unwrap();
    let run_with = |command: Command, out: &str, threads: usize| -> Vec<u8> {
        let out = dir.path().join(out);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| run(command, &cfg, &out)).unwrap();
        std::fs::read(out.join("report.json")).unwrap()
    };
    let mut same = true;
    for command in [Command::Solve, Command::Simulate, Command::Diagnose] {
        let a = run_with(command, &format!("{command}_a"), 1);
        let b = run_with(command, &format!("{command}_b"), 1);
        let c = run_with(command, &format!("{command}_c"), 4);
        same &= a == b && a == c;
    }
    verdict(
        same,
        "solve, simulate and diagnose reports byte-identical across repeats and thread counts"
            .into(),
    )
}

fn main() {
    let mut results: Vec<(u32, Verdict)> = Vec::new();
    let mut report = |id: u32, v: Verdict| {
        println!(
            "criterion {id:>2} {} {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
        results.push((id, v));
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    report(4, criterion_4());
    let (table, kernel) = ex1_kernel();
    report(5, criterion_5(&kernel));
    report(6, criterion_6(&table, &kernel));
    report(7, criterion_7(&table, &kernel));
    report(8, criterion_8(&table, &kernel));
    report(9, criterion_9());
    report(10, criterion_10());
    report(11, criterion_11());
    report(12, criterion_12());
    let failed: Vec<u32> = results
        .iter()
        .filter(|r| !r.1.passed)
        .map(|r| r.0)
        .collect();
    println!(
        "{} of {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
