//! Subcommand dispatch, CSV emission and the run manifest.

use super::config::{ExperimentConfig, Subcommand};
use super::fit::{fit_decay, log_times, DecayFit};
use crate::characteristics::{
    characteristics_decay_report, picard_solve_characteristics, SampleGrid, SolveOptions, SyntheticField,
};
use crate::dispersion::{log_grid, penrose_margin, PenroseGrid, TauLine};
use crate::equilibria::{make_equilibrium, Equilibrium};
use crate::error::{Error, Result};
use crate::kernel::green::{assemble_physical_green, radial_green_norms, BoxRule, GreenOptions};
use crate::kernel::lp::{envelopes, littlewood_paley_block};
use crate::kernel::{
    build_mode_kernel_table, default_radii, laplace_consistency, radial_modes, solve_mode_resolvent, ResolventTable,
    TimeGrid,
};
use crate::report::NormKind;
use crate::response::bootstrap::{bootstrap_grid, bootstrap_run, BootstrapOptions};
use crate::response::forcing::ForcingOptions;
use crate::response::{linear_response, response_resolvent, uniform_times, DensityHistory};
use crate::transport::{free_decay_report, InitialDatum};
use num_complex::Complex64;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

/// An upstream failure tagged with the module it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct RunError {
    pub module: &'static str,
    pub error: Error,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.module, self.error)
    }
}

impl std::error::Error for RunError {}

trait Provenance<T> {
    fn from_module(self, module: &'static str) -> std::result::Result<T, RunError>;
}

impl<T> Provenance<T> for Result<T> {
    fn from_module(self, module: &'static str) -> std::result::Result<T, RunError> {
        self.map_err(|error| RunError { module, error })
    }
}

/// One CSV file: fixed header row, one record per line.
#[derive(Debug, Clone, PartialEq)]
pub struct Csv {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    fn new(name: impl Into<String>, header: &[&'static str]) -> Self {
        Self {
            name: name.into(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn body(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Shortest round-trip decimal, always with `.` as separator.
fn num(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub subcommand: Subcommand,
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
    pub wall_time: f64,
}

struct Outcome {
    tables: Vec<Csv>,
    lines: Vec<String>,
}

/// Runs the configured subcommand and writes its CSV files and
/// `manifest.json` into `config.output`. Nothing is written on failure.
pub fn run_experiment(config: &ExperimentConfig, quiet: bool) -> std::result::Result<RunSummary, RunError> {
    let start = Instant::now();
    let eq = make_equilibrium(config.family, config.dim).from_module("equilibria")?;
    let outcome = match config.subcommand {
        Subcommand::Penrose => penrose(config, &eq),
        Subcommand::Kernel => kernel(config, &eq),
        Subcommand::Green => green(config, &eq),
        Subcommand::FreeTransport => free_transport(config),
        Subcommand::Chars => chars(config),
        Subcommand::Linres => linres(config, &eq),
        Subcommand::Bootstrap => bootstrap(config, &eq),
        Subcommand::Rates => rates(config, &eq),
    }?;
    let wall_time = start.elapsed().as_secs_f64();
    let manifest = manifest(config, &outcome, wall_time);
    let mut files: Vec<(String, String)> = outcome.tables.iter().map(|t| (t.name.clone(), t.body())).collect();
    files.push(("manifest.json".to_string(), manifest));
    let written = write_atomically(&config.output, &files).from_module("cli")?;
    if !quiet {
        for line in &outcome.lines {
            println!("{line}");
        }
    }
    Ok(RunSummary {
        subcommand: config.subcommand,
        files: written,
        lines: outcome.lines,
        wall_time,
    })
}

fn manifest(config: &ExperimentConfig, outcome: &Outcome, wall_time: f64) -> String {
    let value = serde_json::json!({
        "subcommand": config.subcommand.name(),
        "config": config.to_text(),
        "versions": {
            "vlasov-decay": env!("CARGO_PKG_VERSION"),
            "target_os": std::env::consts::OS,
            "target_arch": std::env::consts::ARCH,
        },
        "wall_time_seconds": wall_time,
        "files": outcome.tables.iter().map(|t| t.name.clone()).collect::<Vec<_>>(),
        "summary": outcome.lines,
    });
    serde_json::to_string_pretty(&value).expect("manifest serializes") + "\n"
}

/// Writes every file under a temporary name, then renames them all. A
/// failure before the renames removes the temporaries.
fn write_atomically(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    let io = |e: std::io::Error, what: &Path| Error::Configuration(format!("{}: {e}", what.display()));
    fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, body) in files {
        let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
        if let Err(e) = fs::write(&tmp, body) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            let _ = fs::remove_file(&tmp);
            return Err(io(e, &tmp));
        }
        staged.push((tmp, dir.join(name)));
    }
    let mut out = Vec::with_capacity(staged.len());
    for (tmp, target) in staged {
        fs::rename(&tmp, &target).map_err(|e| io(e, &target))?;
        out.push(target);
    }
    Ok(out)
}

fn fit_line(label: &str, fit: &Result<DecayFit>, target: Option<f64>) -> String {
    match fit {
        Ok(f) => {
            let target = target.map(|p| format!(" (target {p})")).unwrap_or_default();
            format!(
                "{label}: exponent {:.4}{target} over [{}, {}], residual {:.2e}",
                f.exponent, f.window.0, f.window.1, f.residual_rms
            )
        }
        Err(e) => format!("{label}: no fit ({e})"),
    }
}

fn xi_grid(config: &ExperimentConfig, lo: f64, hi: f64, per_octave: usize) -> Vec<f64> {
    let g = &config.grid;
    log_grid(
        g.xi_min.map(f64::log2).unwrap_or(lo),
        g.xi_max.map(f64::log2).unwrap_or(hi),
        g.xi_per_octave.unwrap_or(per_octave),
    )
}

fn penrose(config: &ExperimentConfig, eq: &Equilibrium) -> std::result::Result<Outcome, RunError> {
    let g = &config.grid;
    let mut grid = PenroseGrid::default_grid();
    grid.r_grid = xi_grid(config, -6.0, 6.0, 8);
    grid.tau_line = TauLine::symmetric(g.tau_half_width.unwrap_or(40.0), g.tau_step.unwrap_or(0.05));
    grid.keep_samples = true;
    let report = penrose_margin(eq, &grid).from_module("dispersion")?;
    let mut csv = Csv::new(
        "penrose.csv",
        &["r", "tau_re", "tau_im", "re_K", "im_K", "abs_one_minus_K"],
    );
    for s in &report.samples {
        csv.push(vec![
            num(s.r),
            num(s.tau.re),
            num(s.tau.im),
            num(s.k_tilde.re),
            num(s.k_tilde.im),
            num(s.distance()),
        ]);
    }
    let nonzero: Vec<_> = report.winding_counts.iter().filter(|w| w.1 != 0).collect();
    let verdict = if report.is_stable() { "stable" } else { "not stable" };
    let lines = vec![
        format!(
            "penrose: margin {:.6e} at tau = {} {:+}i, |xi| = {}; nonzero winding counts: {}; verdict: {verdict}",
            report.margin,
            report.argmin.0,
            report.argmin.1,
            report.argmin.2,
            nonzero.len()
        ),
        format!("grid: {}", report.grid_spec),
    ];
    Ok(Outcome {
        tables: vec![csv],
        lines,
    })
}

fn radial_resolvent(eq: &Equilibrium, radii: &[f64], dt: f64, horizon: f64) -> std::result::Result<ResolventTable, RunError> {
    let time = TimeGrid::new(dt, horizon).from_module("kernel")?;
    let table = build_mode_kernel_table(eq, time, radial_modes(eq.dim(), radii)).from_module("kernel")?;
    solve_mode_resolvent(&table).from_module("kernel")
}

fn kernel(config: &ExperimentConfig, eq: &Equilibrium) -> std::result::Result<Outcome, RunError> {
    let g = &config.grid;
    let radii = if g.xi_min.is_some() || g.xi_max.is_some() || g.xi_per_octave.is_some() {
        let mut r = vec![0.0];
        r.extend(xi_grid(config, -8.0, 4.0, 16));
        r
    } else {
        default_radii()
    };
    let res = radial_resolvent(eq, &radii, g.dt.unwrap_or(0.05), g.horizon.unwrap_or(40.0))?;
    let (steps, modes) = res.shape();
    let mut csv = Csv::new("kernel.csv", &["t", "r", "K", "G"]);
    for n in 0..steps {
        let t = res.time().time(n);
        for (i, &r) in radii.iter().enumerate().take(modes) {
            csv.push(vec![num(t), num(r), num(res.kernel().get(n, i)), num(res.get(n, i))]);
        }
    }
    let nearest = |target: f64| {
        (0..modes)
            .min_by(|&a, &b| {
                (radii[a] - target)
                    .abs()
                    .partial_cmp(&(radii[b] - target).abs())
                    .expect("finite radii")
            })
            .expect("modes")
    };
    let mut samples = Vec::new();
    for &tau in &[-2.0, -1.0, 0.0, 0.5, 2.0] {
        for &r in &[0.5, 1.0, 2.0, 3.0] {
            samples.push((Complex64::new(tau, 0.0), nearest(r)));
        }
    }
    let laplace = laplace_consistency(&res, &samples).from_module("kernel")?;
    let lines = vec![format!(
        "kernel: {steps} steps x {modes} modes, Volterra residual {:.3e}, Laplace consistency {:.3e}",
        res.residual(),
        laplace
    )];
    Ok(Outcome {
        tables: vec![csv],
        lines,
    })
}

fn green(config: &ExperimentConfig, eq: &Equilibrium) -> std::result::Result<Outcome, RunError> {
    let g = &config.grid;
    let dt = g.dt.unwrap_or(0.05);
    let mut lines = Vec::new();
    let mut tables = Vec::new();
    if config.blocks {
        let times = g.times.clone().unwrap_or_else(|| vec![1.0, 2.0, 5.0, 10.0, 20.0]);
        let horizon = times.iter().cloned().fold(0.0, f64::max);
        let res = radial_resolvent(eq, &default_radii(), dt, horizon)?;
        let mut csv = Csv::new("green_blocks.csv", &["q", "t", "L1", "Linf", "bound_ratio"]);
        for q in config.q_min..=config.q_max {
            let block = littlewood_paley_block(&res, q, &times, config.a_threshold).from_module("kernel")?;
            for (j, &t) in block.times.iter().enumerate() {
                let (ea, eb) = envelopes(q, t, eq.dim(), block.regime, block.delta, block.k_pow);
                let ratio = (block.l1[j] / ea).max(block.linf[j] / eb);
                csv.push(vec![q.to_string(), num(t), num(block.l1[j]), num(block.linf[j]), num(ratio)]);
            }
            lines.push(format!(
                "block q = {q} ({:?}): sup L1 ratio {:.3e}, sup Linf ratio {:.3e}",
                block.regime, block.l1_ratio, block.linf_ratio
            ));
        }
        tables.push(csv);
    } else {
        let times = g.times.clone().unwrap_or_else(|| log_times(2.0, 50.0, 16));
        let horizon = times.iter().cloned().fold(0.0, f64::max);
        let res = radial_resolvent(eq, &default_radii(), dt, horizon)?;
        let times: Vec<f64> = times
            .iter()
            .map(|&t| res.time().time(((t / dt).round() as usize).min(res.time().len() - 1)))
            .collect();
        let opts = GreenOptions {
            points: g.green_points.unwrap_or(64),
            k_max: config.order,
            ..GreenOptions::default()
        };
        let asm = assemble_physical_green(&res, &times, &opts).from_module("kernel")?;
        let mut csv = Csv::new("green.csv", &["t", "k", "norm_L1", "norm_Linf"]);
        for n in &asm.norms {
            csv.push(vec![num(n.t), n.k.to_string(), num(n.l1), num(n.linf)]);
        }
        let window = (times[0], times[times.len() - 1]);
        let d = eq.dim() as f64;
        for k in 0..=config.order {
            let kf = k as f64;
            lines.push(fit_line(&format!("G k={k} L1"), &fit_decay(&asm.series(k, false), window, false), Some(-(kf + 1.0))));
            lines.push(fit_line(
                &format!("G k={k} Linf"),
                &fit_decay(&asm.series(k, true), window, false),
                Some(-(d + 1.0 + kf)),
            ));
        }
        lines.extend(asm.warnings.iter().map(|w| format!("warning: {w}")));
        tables.push(csv);
    }
    Ok(Outcome { tables, lines })
}

fn free_transport(config: &ExperimentConfig) -> std::result::Result<Outcome, RunError> {
    let f0 = InitialDatum::gaussian(config.dim, config.eps0, config.order).from_module("transport")?;
    let times = config.grid.times.clone().unwrap_or_else(|| log_times(5.0, 100.0, 20));
    let report = free_decay_report(&f0, config.order, &times).from_module("transport")?;
    let mut csv = Csv::new("free_transport.csv", &["t", "k", "L1", "Linf"]);
    for &t in &times {
        for k in 0..=config.order {
            let at = |kind| {
                report
                    .get("rho_free", k, kind)
                    .and_then(|s| s.points.iter().find(|p| p.0 == t))
                    .map(|p| p.1)
                    .expect("every time is reported")
            };
            csv.push(vec![num(t), k.to_string(), num(at(NormKind::L1)), num(at(NormKind::LInf))]);
        }
    }
    let window = (times[0].max(1e-12), times[times.len() - 1]);
    let d = config.dim as f64;
    let mut lines = Vec::new();
    for k in 0..=config.order {
        let kf = k as f64;
        for (kind, target) in [(NormKind::L1, -kf), (NormKind::LInf, -(d + kf))] {
            let fit = report.fit("rho_free", k, kind, window, false).expect("series exists");
            lines.push(fit_line(&format!("rho_free k={k} {}", kind.label()), &fit, Some(target)));
        }
    }
    lines.extend(report.warnings.iter().map(|w| format!("warning: {w}")));
    Ok(Outcome {
        tables: vec![csv],
        lines,
    })
}

fn chars(config: &ExperimentConfig) -> std::result::Result<Outcome, RunError> {
    let g = &config.grid;
    let field = SyntheticField::saturating(config.dim, config.field_eps).from_module("characteristics")?;
    let grid = SampleGrid::new(
        config.dim,
        g.x_points.unwrap_or(3),
        g.x_half_width.unwrap_or(2.0),
        g.v_points.unwrap_or(3),
        g.v_half_width.unwrap_or(1.5),
    )
    .from_module("characteristics")?;
    let opts = SolveOptions {
        tol: config.tol.picard,
        k_max: 3,
        ..SolveOptions::default()
    };
    let times = g.times.clone().unwrap_or_else(|| vec![g.horizon.unwrap_or(10.0)]);
    let mut tables = Vec::new();
    let mut lines = Vec::new();
    for &t in &times {
        let sol = picard_solve_characteristics(Arc::new(field), t, &grid, &opts).from_module("characteristics")?;
        let grad_x = sol.sup_grad_x_y();
        let mut csv = Csv::new(format!("chars_t{t}.csv"), &["s", "k", "supY_k", "supW_k", "supGradxY"]);
        for k in 0..=opts.k_max {
            let norms = sol.sup_norms(k).from_module("characteristics")?;
            for (j, (&s, &(y, w))) in sol.s_grid().iter().zip(&norms).enumerate() {
                csv.push(vec![num(s), k.to_string(), num(y), num(w), num(grad_x[j])]);
            }
        }
        let report = characteristics_decay_report(&sol, opts.k_max, config.field_eps).from_module("characteristics")?;
        let worst = |q: &str| {
            (0..=opts.k_max)
                .filter_map(|k| report.get(q, k, NormKind::LInf))
                .flat_map(|s| s.points.iter().map(|p| p.1))
                .fold(0.0, f64::max)
        };
        lines.push(format!(
            "chars t = {t}: Picard iterations {}, fixed-point residual {:.2e}, sup Y ratio {:.3}, sup W ratio {:.3}",
            sol.iterations(),
            sol.fixed_point_residual(),
            worst("Y_ratio"),
            worst("W_ratio")
        ));
        lines.extend(sol.warnings().iter().map(|w| format!("warning: {w}")));
        tables.push(csv);
    }
    Ok(Outcome { tables, lines })
}

/// `⟨t⟩^{-3} exp(−r²/2⟨t⟩²)` scaled to a unit `Y_t^N` ledger.
pub fn unit_ledger_forcing(grid: &Arc<crate::numerics::radial::RadialGrid>, times: &[f64], order: usize) -> Result<DensityHistory> {
    let values = times
        .iter()
        .map(|&t| {
            let s2 = 1.0 + t * t;
            grid.radii()
                .iter()
                .map(|r| (2.0 * std::f64::consts::PI * s2).powf(-1.5) * (-0.5 * r * r / s2).exp())
                .collect()
        })
        .collect();
    let s = DensityHistory::from_values(times.to_vec(), grid.clone(), values)?;
    let ledger = *s.ledger(order).last().expect("nonempty");
    Ok(s.scale(1.0 / ledger))
}

fn linres(config: &ExperimentConfig, eq: &Equilibrium) -> std::result::Result<Outcome, RunError> {
    let g = &config.grid;
    if config.order > 2 {
        return Err(RunError {
            module: "response",
            error: Error::Capability("ledgers of order above 2 are not tracked by the radial engine".into()),
        });
    }
    let horizon = g.horizon.unwrap_or(40.0);
    let grid = Arc::new(bootstrap_grid(horizon, g.dr.unwrap_or(0.25)));
    let res = response_resolvent(eq, &grid, g.dt.unwrap_or(0.05), horizon).from_module("response")?;
    let times = uniform_times(g.forcing_dt.unwrap_or(0.25), horizon).from_module("response")?;
    let s = unit_ledger_forcing(&grid, &times, config.order).from_module("response")?;
    let rho = linear_response(&s, &res).from_module("response")?;
    let ledger = rho.log_ledger(config.order);
    let mut csv = Csv::new("linres.csv", &["t", "k", "L1", "Linf", "ledger"]);
    let mut q = Vec::with_capacity(times.len());
    for (n, &t) in times.iter().enumerate() {
        for (k, (l1, linf)) in rho.norms(n, config.order).into_iter().enumerate() {
            csv.push(vec![num(t), k.to_string(), num(l1), num(linf), num(ledger[n])]);
        }
        q.push((t, rho.weighted(n, config.order) / (2.0 + t).ln()));
    }
    let peak = q.iter().map(|p| p.1).fold(0.0, f64::max);
    let trend = fit_decay(&q, (0.75 * horizon, horizon), false);
    let lines = vec![
        format!("linres: forcing ledger 1, sup_t weighted density / log(2+t) = {peak:.4e}"),
        fit_line("trend over the last quarter", &trend, None),
    ];
    Ok(Outcome {
        tables: vec![csv],
        lines,
    })
}

fn bootstrap(config: &ExperimentConfig, eq: &Equilibrium) -> std::result::Result<Outcome, RunError> {
    let g = &config.grid;
    if config.order > 2 {
        return Err(RunError {
            module: "response",
            error: Error::Capability("ledgers of order above 2 are not tracked by the radial engine".into()),
        });
    }
    let opts = BootstrapOptions {
        horizon: g.horizon.unwrap_or(20.0),
        dt: g.forcing_dt.unwrap_or(0.25),
        max_iter: config.tol.max_iter,
        eps0: config.eps0,
        m0: config.m0,
        tol: config.tol.convergence,
        forcing: ForcingOptions {
            solve: SolveOptions {
                tol: config.tol.picard,
                k_max: 0,
                ..SolveOptions::default()
            },
            ledger_order: config.order,
            ..ForcingOptions::default()
        },
    };
    let grid = Arc::new(bootstrap_grid(opts.horizon, g.dr.unwrap_or(0.25)));
    let res = response_resolvent(eq, &grid, g.dt.unwrap_or(0.05), opts.horizon).from_module("response")?;
    let f0 = InitialDatum::gaussian(config.dim, config.eps0, config.order).from_module("transport")?;
    let run = bootstrap_run(&f0, eq, &res, grid, &opts).from_module("response")?;
    let mut csv = Csv::new("bootstrap.csv", &["iter", "t", "N_ledger", "flag"]);
    let bound = opts.m0 * opts.eps0;
    let mut lines = Vec::new();
    for state in &run.states {
        for (n, &t) in state.density.t_grid().iter().enumerate() {
            let flag = u8::from(state.ledger[n] > bound);
            csv.push(vec![state.iteration.to_string(), num(t), num(state.ledger[n]), flag.to_string()]);
        }
        lines.push(format!(
            "iterate {}: N(T) = {:.6e}, relative density change {:.2e}, Picard iterations {}",
            state.iteration,
            state.final_ledger(),
            state.density_change,
            state.picard_iterations
        ));
    }
    let last = run.last();
    let reaction = *last.reaction_ledger.last().expect("nonempty");
    let linear = *last.linear_ledger.last().expect("nonempty");
    lines.push(format!(
        "bootstrap: converged {} after {} iterates; N(T) = {:.6e} vs M0*eps0 = {bound:.3e} ({}); measured N(T)/eps0 = {:.3}",
        run.converged,
        run.states.len(),
        last.final_ledger(),
        if last.violation { "violated" } else { "closed" },
        last.final_ledger() / opts.eps0
    ));
    lines.push(format!(
        "ledgers at T: R_L {linear:.6e}, R_L - R_NL {reaction:.6e}, S {:.6e}",
        last.forcing_ledger.last().expect("nonempty")
    ));
    Ok(Outcome {
        tables: vec![csv],
        lines,
    })
}

fn rates(config: &ExperimentConfig, eq: &Equilibrium) -> std::result::Result<Outcome, RunError> {
    let g = &config.grid;
    let d = config.dim as f64;
    let mut csv = Csv::new(
        "rates.csv",
        &["quantity", "k", "norm", "exponent", "target", "amplitude", "residual_rms", "t_min", "t_max"],
    );
    let mut lines = Vec::new();
    let mut record = |name: &str, k: usize, kind: NormKind, target: f64, fit: Result<DecayFit>| {
        lines.push(fit_line(&format!("{name} k={k} {}", kind.label()), &fit, Some(target)));
        if let Ok(f) = fit {
            csv.push(vec![
                name.to_string(),
                k.to_string(),
                kind.label().to_string(),
                num(f.exponent),
                num(target),
                num(f.amplitude),
                num(f.residual_rms),
                num(f.window.0),
                num(f.window.1),
            ]);
        }
    };

    let f0 = InitialDatum::gaussian(config.dim, config.eps0, config.order).from_module("transport")?;
    let free_times = log_times(5.0, 100.0, 20);
    let free = free_decay_report(&f0, config.order, &free_times).from_module("transport")?;
    for k in 0..=config.order {
        let kf = k as f64;
        for (kind, target) in [(NormKind::L1, -kf), (NormKind::LInf, -(d + kf))] {
            let fit = free.fit("rho_free", k, kind, (5.0, 100.0), false).expect("series exists");
            record("rho_free", k, kind, target, fit);
        }
    }

    if config.dim == 3 && eq.is_isotropic() {
        let dt = g.dt.unwrap_or(0.05);
        let horizon = g.horizon.unwrap_or(50.0);
        let res = radial_resolvent(eq, &default_radii(), dt, horizon)?;
        let times: Vec<f64> = (0..res.time().len())
            .map(|n| res.time().time(n))
            .filter(|&t| t >= 2.0)
            .collect();
        let rule = BoxRule::Adaptive {
            min_side: 40.0,
            per_time: 12.0,
        };
        let norms = radial_green_norms(&res, &times, config.order, rule, g.dr.unwrap_or(0.1)).from_module("kernel")?;
        for k in 0..=config.order {
            let kf = k as f64;
            let series = |linf: bool| -> Vec<(f64, f64)> {
                norms
                    .iter()
                    .filter(|n| n.k == k)
                    .map(|n| (n.t, if linf { n.linf } else { n.l1 }))
                    .collect()
            };
            let window = (2.0, horizon);
            record("G", k, NormKind::L1, -(kf + 1.0), fit_decay(&series(false), window, false));
            record("G", k, NormKind::LInf, -(d + 1.0 + kf), fit_decay(&series(true), window, false));
        }
    } else {
        lines.push("G: skipped, the radial engine needs an isotropic equilibrium in d = 3".into());
    }
    Ok(Outcome {
        tables: vec![csv],
        lines,
    })
}
