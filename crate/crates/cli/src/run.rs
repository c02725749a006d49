//! Command dispatch.

use std::fmt::Write as _;
use std::path::Path;

use infogame::value::default_threshold_constant;
use infogame::{
    azema_structure_residual, build_kernel, closed_form_value, conjugate_pde_residual,
    dynamic_programming_check, estimate_value_mc, fenchel_conjugate, min_tangent_second_difference,
    non_revealing_set, obstacle_residual, path_diagnostics, perturb_kernel, play_match,
    posterior_consistency, solve_backward, stay_probability_estimate, synthesize_informed, Builtin,
    DualLattice, Error, ExactSampler, GameSpec, MeanSe, PathSampler, SampleMode, SimplexGrid,
    TimeGrid, UninformedStrategy, ValueTable,
};

use crate::config::{parse_perturbation, parse_uninformed, Command, RunConfig};
use crate::error::{CliError, ConfigError};
use crate::report::{write_file, Check, RunReport};

/// Slack for comparisons whose statistical error can be exactly zero.
const FLOAT_FLOOR: f64 = 1e-9;

struct Ctx<'a> {
    command: Command,
    cfg: &'a RunConfig,
    spec: GameSpec<f64>,
    out: &'a Path,
    report: RunReport,
}

/// Runs `command`, writes its artifacts and `report.json` into `out`, and
/// returns the report.
pub fn run(command: Command, cfg: &RunConfig, out: &Path) -> Result<RunReport, CliError> {
    if let Some(c) = cfg.command {
        if c != command {
            return Err(ConfigError::Invalid {
                field: "command",
                message: format!("config says `{c}`, invoked as `{command}`"),
            }
            .into());
        }
    }
    let spec = cfg.game()?;
    if spec.builtin == Some(Builtin::Azema) && command != Command::Simulate {
        return Err(ConfigError::Invalid {
            field: "fixture",
            message: "azema_h supports only `simulate`".into(),
        }
        .into());
    }
    if command == Command::Match && !spec.is_payoff_based() {
        return Err(ConfigError::Invalid {
            field: "fixture",
            message: format!("`{}` has no payoffs to play", spec.name),
        }
        .into());
    }
    std::fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.to_owned(),
        source,
    })?;
    let report = RunReport::new(command, cfg, &spec.name);
    let mut ctx = Ctx {
        command,
        cfg,
        spec,
        out,
        report,
    };
    match command {
        Command::Solve => ctx.solve()?,
        Command::Simulate if ctx.spec.builtin == Some(Builtin::Azema) => ctx.simulate_exact()?,
        Command::Simulate => ctx.simulate()?,
        Command::Match => ctx.play()?,
        Command::Diagnose => ctx.diagnose()?,
    }
    ctx.report.write(out)?;
    Ok(ctx.report)
}

impl Ctx<'_> {
    fn wrap<T>(&self, r: Result<T, Error>) -> Result<T, CliError> {
        r.map_err(|source| CliError::Run {
            command: self.command,
            source,
        })
    }

    fn time_grid(&self) -> Result<TimeGrid<f64>, CliError> {
        self.wrap(TimeGrid::new(self.cfg.t0, self.spec.horizon, self.cfg.n))
    }

    fn solve_table(&mut self) -> Result<ValueTable<f64>, CliError> {
        let grid = self.wrap(SimplexGrid::new(self.spec.dim, self.cfg.m))?;
        let table = self.wrap(solve_backward(&self.spec, self.time_grid()?, &grid))?;
        let p0 = self.cfg.p0_point(self.spec.dim);
        let (node, dist) = self.wrap(grid.snap(&p0))?;
        let interpolated = self.wrap(table.value_at(self.cfg.t0, &p0))?;
        self.report.headline("value", table.values(0)[node]);
        self.report.headline("value_interpolated", interpolated);
        self.report.headline("snap_distance", dist);
        Ok(table)
    }

    fn sigma(&self) -> f64 {
        self.cfg.sigma
    }

    fn check(&mut self, c: Check) {
        self.report.check(self.cfg, c);
    }

    fn artifact(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        write_file(&self.out.join(name), body)?;
        self.report.artifacts.push(name.to_string());
        Ok(())
    }

    fn solve(&mut self) -> Result<(), CliError> {
        let table = self.solve_table()?;
        let tg = *table.time_grid();
        let columns: Vec<(String, Vec<Option<f64>>)> = self
            .cfg
            .knots
            .iter()
            .map(|&k| {
                (
                    format!("V(t={})", tg.knot(k)),
                    table.values(k).iter().map(|&v| Some(v)).collect(),
                )
            })
            .collect();
        let csv = node_csv(table.grid(), &columns);
        self.artifact("values.csv", &csv)?;

        let grid = table.grid();
        let mut err = None::<f64>;
        for node in 0..grid.len() {
            match closed_form_value(&self.spec, tg.t0(), grid.point(node)) {
                Ok(v) => err = Some(err.unwrap_or(0.0).max((table.values(0)[node] - v).abs())),
                Err(Error::NoClosedForm(_) | Error::OutsideClosedFormDomain { .. }) => {
                    err = None;
                    break;
                }
                Err(source) => {
                    return Err(CliError::Run {
                        command: self.command,
                        source,
                    })
                }
            }
        }
        if let Some(e) = err {
            self.report.headline("closed_form_max_error", e);
            let tol = self.cfg.closed_form_tol(self.spec.builtin);
            self.check(Check::at_most("closed_form", e, tol));
        }

        let v0 = table.values(0);
        let scale = v0.iter().fold(1.0f64, |a, &x| a.max(x.abs()));
        let m2 = (grid.resolution() * grid.resolution()) as f64;
        let min_d2 = (0..grid.len())
            .filter_map(|node| min_tangent_second_difference(grid, v0, node))
            .fold(f64::INFINITY, f64::min);
        if min_d2.is_finite() {
            self.report.headline("min_second_difference", min_d2);
            self.check(Check::at_least("convexity", min_d2, -1e-9 * scale * m2));
        }
        // a vertex never splits, so its value is the plain Riemann sum of H
        let tau = tg.tau();
        let vertex_gap = (0..self.spec.dim)
            .map(|i| {
                let id = grid.vertex_id(i);
                let sum: f64 = (0..tg.steps()).map(|k| table.hamiltonian(k)[id]).sum();
                (v0[id] - tau * sum).abs()
            })
            .fold(0.0, f64::max);
        self.check(Check::at_most("vertex_values", vertex_gap, 1e-9 * scale));
        Ok(())
    }

    fn simulate(&mut self) -> Result<(), CliError> {
        let table = self.solve_table()?;
        let kernel = self.wrap(build_kernel(&table))?;
        let (mass, drift) = kernel.max_row_defects();
        self.check(Check::at_most("kernel_martingale", mass.max(drift), 1e-12));

        let cfg = self.cfg;
        let p0 = cfg.p0_point(self.spec.dim);
        let sampler = self.wrap(PathSampler::new(
            &kernel,
            &p0,
            SampleMode::Unconditional,
            cfg.seed,
        ))?;
        let value = table.values(0)[sampler.start()];
        let mc = self.wrap(estimate_value_mc(&sampler, &table, cfg.paths))?;
        self.report.headline("mc_mean", mc.mean);
        self.report.headline("mc_se", mc.se);
        self.check(Check::at_most(
            "mc_value",
            (mc.mean - value).abs(),
            self.sigma() * mc.se + FLOAT_FLOOR,
        ));

        let n = table.steps();
        let mut knots = vec![n / 4, n / 2, 3 * n / 4];
        knots.dedup();
        for (k, est) in self.wrap(dynamic_programming_check(
            &sampler, &table, cfg.paths, &knots,
        ))? {
            self.report.headline(&format!("dp:{k}"), est.mean);
            self.check(Check::at_most(
                format!("dp:{k}"),
                (est.mean - value).abs(),
                self.sigma() * est.se + FLOAT_FLOOR,
            ));
        }

        let joint = self.wrap(PathSampler::new(&kernel, &p0, SampleMode::Joint, cfg.seed))?;
        let post = self.wrap(posterior_consistency(&joint, cfg.paths, cfg.min_visits))?;
        self.report
            .headline("posterior_cells", post.cells.len() as f64);
        self.check(Check::at_most(
            "posterior",
            post.max_deviation,
            cfg.posterior_tol,
        ));

        for name in &cfg.perturbations {
            let mode = parse_perturbation(name).expect("validated");
            let perturbed = self.wrap(perturb_kernel(&kernel, mode))?;
            let s = self.wrap(PathSampler::new(
                &perturbed,
                &p0,
                SampleMode::Unconditional,
                cfg.seed,
            ))?;
            let est = self.wrap(estimate_value_mc(&s, &table, cfg.paths))?;
            self.report
                .headline(&format!("perturbation:{name}:mean"), est.mean);
            self.report
                .headline(&format!("perturbation:{name}:margin"), est.mean - value);
            let floor = value - self.sigma() * est.se - cfg.perturbation_slack;
            self.check(Check::at_least(
                format!("perturbation:{name}"),
                est.mean,
                floor,
            ));
        }

        let c = cfg
            .h_constant
            .unwrap_or_else(|| default_threshold_constant(&self.spec, &table));
        let nrs = non_revealing_set(&table, c);
        let diag = self.wrap(path_diagnostics(&table, &nrs, &sampler, cfg.paths))?;
        self.report.headline("h_threshold", nrs.threshold);
        self.report.headline("in_h_fraction", diag.in_h_fraction);
        self.report.headline("jumps", diag.jumps as f64);
        self.report
            .headline("max_jump_residual", diag.max_jump_residual);
        self.report
            .headline("mean_abs_jump_residual", diag.mean_abs_jump_residual);
        self.check(Check::at_least(
            "in_h_fraction",
            diag.in_h_fraction,
            cfg.in_h_min,
        ));
        self.check(Check::at_most(
            "jump_flatness",
            diag.max_jump_residual,
            cfg.jump_tol,
        ));

        if let (Some(Builtin::Ex1 { .. }), Some(band)) = (self.spec.builtin, &self.spec.band) {
            let exact = self.wrap(ExactSampler::new(
                band.clone(),
                *table.time_grid(),
                p0.coords()[0],
                cfg.seed,
            ))?;
            let grid = table.grid();
            let below = |x: f64| if x < 0.5 { 1.0 } else { 0.0 };
            let ex: Vec<Vec<f64>> = exact.map(cfg.paths, |p| {
                knots.iter().map(|&k| below(p.values[k])).collect()
            });
            let gen: Vec<Vec<f64>> = sampler.map(cfg.paths, |p| {
                knots
                    .iter()
                    .map(|&k| below(grid.point(p.nodes[k + 1]).coords()[0]))
                    .collect()
            });
            for (j, &k) in knots.iter().enumerate() {
                let a = MeanSe::from_samples(&ex.iter().map(|r| r[j]).collect::<Vec<_>>());
                let b = MeanSe::from_samples(&gen.iter().map(|r| r[j]).collect::<Vec<_>>());
                self.report.headline(&format!("exact_lower:{k}"), a.mean);
                self.report.headline(&format!("kernel_lower:{k}"), b.mean);
                let se = (a.se * a.se + b.se * b.se).sqrt();
                self.check(Check::at_most(
                    format!("exact_marginal:{k}"),
                    (a.mean - b.mean).abs(),
                    self.sigma() * se + FLOAT_FLOOR,
                ));
            }
        }
        Ok(())
    }

    fn simulate_exact(&mut self) -> Result<(), CliError> {
        let cfg = self.cfg;
        let band = self.spec.band.clone().expect("azema fixture has a band");
        let tg = self.time_grid()?;
        let x0 = cfg.p0_point(self.spec.dim).coords()[0];
        let sampler = self.wrap(ExactSampler::new(band.clone(), tg, x0, cfg.seed))?;
        let n = tg.steps();
        let mut knots = vec![n / 4, n / 2, 3 * n / 4, n];
        knots.dedup();
        let xs: Vec<Vec<f64>> =
            sampler.map(cfg.paths, |p| knots.iter().map(|&k| p.values[k]).collect());
        for (j, &k) in knots.iter().enumerate() {
            let ms = MeanSe::from_samples(&xs.iter().map(|r| r[j]).collect::<Vec<_>>());
            self.report.headline(&format!("mean_p:{k}"), ms.mean);
            self.check(Check::at_most(
                format!("martingale:{k}"),
                (ms.mean - x0).abs(),
                self.sigma() * ms.se + FLOAT_FLOOR,
            ));
        }

        let (s, t) = (0.01, 0.04);
        if cfg.t0 <= s && t <= self.spec.horizon {
            let expected = (band.upper(t) - band.lower(s)) / (band.upper(t) - band.lower(t));
            let est = self.wrap(stay_probability_estimate(&band, s, t, cfg.paths, cfg.seed))?;
            self.report.headline("stay_probability", est.mean);
            self.report.headline("stay_probability_se", est.se);
            self.report.headline("stay_probability_expected", expected);
            self.check(Check::at_most(
                "stay_probability",
                (est.mean - expected).abs(),
                self.sigma() * est.se,
            ));
        }

        if cfg.t0 == 0.0 && x0 == 0.5 {
            let r = self.wrap(azema_structure_residual(&self.spec, &sampler, cfg.paths))?;
            self.report.headline("azema_residual", r.residual.mean);
            self.report
                .headline("quadratic_variation", r.quadratic_variation.mean);
            self.report
                .headline("quadratic_variation_se", r.quadratic_variation.se);
            self.check(Check::at_most(
                "azema_residual",
                r.residual.mean.abs(),
                cfg.azema_tol,
            ));
            let qv_gap = (r.quadratic_variation.mean - self.spec.horizon).abs();
            self.check(Check::at_most("quadratic_variation", qv_gap, cfg.azema_tol));
        }
        Ok(())
    }

    fn play(&mut self) -> Result<(), CliError> {
        let table = self.solve_table()?;
        let cfg = self.cfg;
        let spec = self.spec.clone();
        let informed = self.wrap(synthesize_informed(&table, &spec))?;
        let p0 = cfg.p0_point(spec.dim);
        let (node, _) = self.wrap(table.grid().snap(&p0))?;
        let value = table.values(0)[node];
        let sigma = self.sigma();
        for name in &cfg.uninformed {
            let strategy = parse_uninformed(name).expect("validated");
            let r = self.wrap(play_match(&informed, strategy, &p0, cfg.paths, cfg.seed, 0))?;
            let key = format!("match:{name}");
            self.report.headline(&format!("{key}:mean"), r.payoff.mean);
            self.report.headline(&format!("{key}:se"), r.payoff.se);
            let bound = sigma * r.payoff.se + cfg.match_slack;
            match strategy {
                UninformedStrategy::Clairvoyant => {
                    self.check(Check::at_least(key, r.payoff.mean, value - bound))
                }
                UninformedStrategy::PosteriorBestResponse => {
                    self.check(Check::at_most(key, (r.payoff.mean - value).abs(), bound));
                }
                _ => self.check(Check::at_most(key, r.payoff.mean, value + bound)),
            }
            self.check(Check::at_most(
                format!("decomposition:{name}"),
                r.decomposition_gap,
                1e-12,
            ));
            let (a, b) = (r.terminal_pairing, r.running_pairing);
            let se = (a.se * a.se + b.se * b.se).sqrt();
            self.check(Check::at_most(
                format!("pairing:{name}"),
                (a.mean - b.mean).abs(),
                sigma * se + FLOAT_FLOOR,
            ));
        }
        Ok(())
    }

    fn diagnose(&mut self) -> Result<(), CliError> {
        let table = self.solve_table()?;
        let cfg = self.cfg;
        let grid = table.grid();
        let n = table.steps();
        let tg = *table.time_grid();

        let knots: Vec<usize> = cfg.knots.iter().copied().filter(|&k| k < n).collect();
        let mut min_time = f64::INFINITY;
        let mut columns = Vec::new();
        for k in 0..n {
            let rows = (0..grid.len())
                .map(|node| obstacle_residual(&table, k, node))
                .collect::<Result<Vec<_>, _>>();
            let rows = self.wrap(rows)?;
            min_time = rows
                .iter()
                .map(|r| r.time_residual)
                .fold(min_time, f64::min);
            if knots.contains(&k) {
                let t = tg.knot(k);
                columns.push((
                    format!("time_residual(t={t})"),
                    rows.iter().map(|r| Some(r.time_residual)).collect(),
                ));
                columns.push((
                    format!("convexity_residual(t={t})"),
                    rows.iter().map(|r| r.convexity_residual).collect(),
                ));
            }
        }
        self.report.headline("min_time_residual", min_time);
        let scale = table.values(0).iter().fold(1.0f64, |a, &x| a.max(x.abs()));
        self.check(Check::at_least(
            "obstacle_time",
            min_time,
            -1e-9 * scale / tg.tau(),
        ));
        self.artifact("residuals.csv", &node_csv(grid, &columns))?;

        let c = cfg
            .h_constant
            .unwrap_or_else(|| default_threshold_constant(&self.spec, &table));
        let nrs = non_revealing_set(&table, c);
        let members: usize = (0..n)
            .map(|k| {
                (0..grid.len())
                    .filter(|&node| nrs.contains(k, node))
                    .count()
            })
            .sum();
        self.report.headline("h_constant", c);
        self.report.headline("h_threshold", nrs.threshold);
        self.report
            .headline("h_fraction", members as f64 / (n * grid.len()) as f64);
        let hcols: Vec<(String, Vec<Option<f64>>)> = knots
            .iter()
            .map(|&k| {
                let col = (0..grid.len())
                    .map(|node| Some(if nrs.contains(k, node) { 1.0 } else { 0.0 }))
                    .collect();
                (format!("in_h(t={})", tg.knot(k)), col)
            })
            .collect();
        self.artifact("non_revealing.csv", &node_csv_int(grid, &hcols))?;
        if let (Some(Builtin::Ex1 { .. }), Some(band)) = (self.spec.builtin, &self.spec.band) {
            let d = self.wrap(nrs.hausdorff_to_band(&table, band))?;
            self.report.headline("band_hausdorff", d);
            self.check(Check::at_most(
                "band_hausdorff",
                d,
                2.0 / cfg.m as f64 + tg.tau(),
            ));
        }

        let res = cfg.dual_resolution.unwrap_or(cfg.m);
        let lattice = self.wrap(DualLattice::new(self.spec.dim, cfg.dual_half_width, res))?;
        let terminal = self.wrap(fenchel_conjugate(grid, table.values(n), lattice))?;
        let terminal_gap = (0..lattice.len())
            .map(|j| {
                let q = lattice.point(j);
                let top = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (terminal.values[j] - top).abs()
            })
            .fold(0.0, f64::max);
        self.report.headline("conjugate_terminal_gap", terminal_gap);
        self.check(Check::at_most("conjugate_terminal", terminal_gap, 1e-12));

        let cknots = cfg.conjugate_knots();
        let conj = self.wrap(conjugate_pde_residual(&self.spec, &table, lattice, &cknots))?;
        let masked = conj.masked_fraction();
        let max_abs = conj.max_abs();
        self.report.headline("conjugate_max_residual", max_abs);
        self.report.headline("conjugate_masked_fraction", masked);
        self.check(Check::at_most(
            "conjugate_residual",
            max_abs,
            cfg.conjugate_tol,
        ));
        self.check(Check::at_most("conjugate_masked", masked, 0.2));
        let mut csv = String::new();
        let dual_names: Vec<String> = (1..=self.spec.dim).map(|i| format!("q{i}")).collect();
        let _ = write!(csv, "{}", dual_names.join(","));
        for &k in &cknots {
            let _ = write!(csv, ",residual(t={})", tg.knot(k));
        }
        csv.push('\n');
        for j in 0..lattice.len() {
            let q = lattice.point(j);
            csv.push_str(&q.iter().map(|x| fmt_f(*x)).collect::<Vec<_>>().join(","));
            for row in &conj.residuals {
                csv.push(',');
                if let Some(r) = row[j] {
                    csv.push_str(&fmt_f(r));
                }
            }
            csv.push('\n');
        }
        self.artifact("conjugate.csv", &csv)?;
        Ok(())
    }
}

/// 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn node_header(grid: &SimplexGrid<f64>, names: impl Iterator<Item = String>) -> String {
    let mut h = String::from("node");
    for i in 1..=grid.dim() {
        let _ = write!(h, ",p{i}");
    }
    for name in names {
        h.push(',');
        h.push_str(&name);
    }
    h.push('\n');
    h
}

/// One row per lattice node: id, coordinates, then the columns; `None`
/// leaves the cell empty.
pub fn node_csv(grid: &SimplexGrid<f64>, columns: &[(String, Vec<Option<f64>>)]) -> String {
    let mut s = node_header(grid, columns.iter().map(|c| c.0.clone()));
    for node in 0..grid.len() {
        let _ = write!(s, "{node}");
        for x in grid.point(node).coords() {
            let _ = write!(s, ",{}", fmt_f(*x));
        }
        for (_, col) in columns {
            s.push(',');
            if let Some(v) = col[node] {
                s.push_str(&fmt_f(v));
            }
        }
        s.push('\n');
    }
    s
}

fn node_csv_int(grid: &SimplexGrid<f64>, columns: &[(String, Vec<Option<f64>>)]) -> String {
    let mut s = node_header(grid, columns.iter().map(|c| c.0.clone()));
    for node in 0..grid.len() {
        let _ = write!(s, "{node}");
        for x in grid.point(node).coords() {
            let _ = write!(s, ",{}", fmt_f(*x));
        }
        for (_, col) in columns {
            let _ = write!(s, ",{}", col[node].unwrap_or(0.0) as u8);
        }
        s.push('\n');
    }
    s
}
