use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tsd_core::lmi::{Interconnect, Method, SubsystemLmis};
use tsd_core::model::{load_network, NetworkModel};
use tsd_core::sdp::{self, Objective};
use tsd_core::sim::{self, SimOptions};
use tsd_core::sweep::{self, Binding, ParamRange, SweepGrid};
use tsd_core::synth::{self, SynthOptions, SynthesisReport};
use tsd_core::{plot, Error};

const EXIT_USAGE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "tsd", version, about = "Decentralized non-PDC synthesis for T-S descriptor networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the LMI conditions and write a result file.
    Synth {
        model: PathBuf,
        #[arg(long, default_value = "theorem1")]
        method: Method,
        #[command(flatten)]
        synth: SynthArgs,
        #[arg(long)]
        out: PathBuf,
        /// Write every relaxed instance as MatrixMarket files.
        #[arg(long)]
        dump_lmi: Option<PathBuf>,
        /// Write the stage-one SDP of each subsystem in SDPA format.
        #[arg(long)]
        dump_sdp: Option<PathBuf>,
    },
    /// Re-verify a stored result against a model.
    Check {
        model: PathBuf,
        result: PathBuf,
        #[arg(long, default_value_t = 5)]
        grid_density: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Simulate the closed loop and report dissipation residuals.
    Simulate {
        model: PathBuf,
        result: PathBuf,
        /// Initial states, `;` between subsystems and `,` between entries.
        #[arg(long, allow_hyphen_values = true)]
        x0: String,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long = "T", default_value_t = 10.0)]
        t_end: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        open_loop: bool,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
    },
    /// Grid scalar model entries and record feasibility per method.
    Sweep {
        model: PathBuf,
        /// `name=sub.M[rule][row][col]`, or a bare default shortcut (`a`, `b`).
        #[arg(long = "bind")]
        bindings: Vec<String>,
        /// `name:min:max:steps`.
        #[arg(long = "range", allow_hyphen_values = true)]
        ranges: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "theorem1,corollary1")]
        methods: Vec<Method>,
        #[command(flatten)]
        synth: SynthArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Render the state columns of a trajectory CSV.
    Plot {
        csv: PathBuf,
        #[arg(long)]
        svg: PathBuf,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// Base strictness margin.
    #[arg(long, default_value_t = 1e-7)]
    delta: f64,
    /// Keep the full interconnection block with `-ε·I` instead of compressing it.
    #[arg(long)]
    interconnect_eps: Option<f64>,
    /// Relative slack on μ traded for a better-conditioned X1.
    #[arg(long, default_value_t = 0.1)]
    backoff: f64,
    #[arg(long, default_value_t = 5)]
    grid_density: usize,
}

impl SynthArgs {
    fn options(&self, method: Method) -> SynthOptions {
        let mut o = SynthOptions::with_method(method);
        o.assembly.delta = self.delta;
        if let Some(eps) = self.interconnect_eps {
            o.assembly.interconnect = Interconnect::Regularize(eps);
        }
        o.backoff = self.backoff;
        o.grid_density = self.grid_density;
        o
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Singular { .. } | Error::Diverged { .. } => EXIT_NUMERICAL,
        _ => EXIT_USAGE,
    }
}

fn run(cmd: Command) -> Result<u8, Error> {
    match cmd {
        Command::Synth {
            model,
            method,
            synth,
            out,
            dump_lmi,
            dump_sdp,
        } => {
            let net = load_network(&model)?;
            let opts = synth.options(method);
            if let Some(dir) = &dump_lmi {
                dump_instances(&net, &opts, dir)?;
            }
            if let Some(dir) = &dump_sdp {
                dump_problems(&net, &opts, dir)?;
            }
            let report = synth::synthesize(&net, &opts)?;
            report.save(&out)?;
            print_report(&report);
            Ok(verdict_code(&report))
        }
        Command::Check {
            model,
            result,
            grid_density,
            tol,
        } => {
            let net = load_network(&model)?;
            let report = SynthesisReport::load(&result)?;
            let checks = synth::verify_blended(&net, &report, grid_density, tol)?;
            let mut ok = true;
            for (res, v) in report.aligned(&net)?.iter().zip(&checks) {
                println!(
                    "{}: relaxed max eig {:.3e} ({}), blended max eig {:.3e} over {} samples, min eig X1 {:.3e} -> {}",
                    res.name,
                    v.relaxed_max_eig,
                    v.relaxed_witness,
                    v.blended_max_eig,
                    v.samples,
                    v.min_x1_eig,
                    if v.pass { "PASS" } else { "FAIL" }
                );
                if let Some(w) = v.blended_witness.as_ref().filter(|_| !v.pass) {
                    println!("  worst sample: peer {} v={:?} h={:?}", w.peer, w.v, w.h);
                }
                ok &= v.pass;
            }
            Ok(if ok { 0 } else { EXIT_INFEASIBLE })
        }
        Command::Simulate {
            model,
            result,
            x0,
            dt,
            t_end,
            out,
            open_loop,
            tol,
        } => {
            let net = load_network(&model)?;
            let report = SynthesisReport::load(&result)?;
            if !report.all_feasible() && !open_loop {
                eprintln!("warning: simulating gains from an uncertified result");
            }
            let x0 = parse_x0(&x0)?;
            let opts = SimOptions { dt, t_end, open_loop };
            let traj = sim::simulate(&net, &report, &x0, &opts)?;
            sim::save_csv(&traj, &out)?;
            let last = traj.t.len() - 1;
            println!(
                "|x(0)| = {:.6e}, |x(T)| = {:.6e} at T = {}",
                traj.state_norm(0),
                traj.state_norm(last),
                traj.t[last]
            );
            for h in sim::hinf_report(&traj, &report, tol) {
                println!(
                    "{}: rho {:.6}, int x'x {:.6e}, int phi'phi {:.6e}, V(t0) {:.6e}, V(tf) {:.6e}, D {:.6e} -> {}",
                    h.name,
                    h.rho,
                    h.state_energy,
                    h.phi_energy,
                    h.v_start,
                    h.v_end,
                    h.residual,
                    if h.pass { "PASS" } else { "FAIL" }
                );
            }
            for d in sim::derivative_bound_diagnostic(&traj, &net)? {
                if d.warn {
                    // The shared-X1 conditions never use the bounds.
                    let tag = if report.method == Method::Theorem1 { "WARN" } else { "note" };
                    println!(
                        "{tag} {}: d{}_{}/dt reached {:.4e} at t = {:.4} below the declared bound {}",
                        d.subsystem, d.family, d.rule, d.min_observed, d.at_time, d.declared
                    );
                }
            }
            Ok(0)
        }
        Command::Sweep {
            model,
            bindings,
            ranges,
            methods,
            synth,
            out,
            svg,
        } => {
            let net = load_network(&model)?;
            let grid = if bindings.is_empty() && ranges.is_empty() {
                SweepGrid {
                    methods,
                    ..SweepGrid::default_example()
                }
            } else {
                let bindings = bindings.iter().map(|b| Binding::parse(b)).collect::<Result<Vec<_>, _>>()?;
                let ranges = ranges.iter().map(|r| ParamRange::parse(r)).collect::<Result<Vec<_>, _>>()?;
                SweepGrid::new(bindings, ranges, methods)?
            };
            let done = sweep::run_sweep(&net, &grid, &synth.options(Method::Theorem1))?;
            sweep::save_csv(&done, &out)?;
            if let Some(path) = &svg {
                sweep::save_svg(&done, path)?;
            }
            for m in &done.methods {
                println!("{}: {} of {} cells feasible", m, done.feasible_count(*m), done.cells.len());
            }
            Ok(0)
        }
        Command::Plot { csv, svg } => {
            plot::save_trajectory_svg(&csv, &svg)?;
            Ok(0)
        }
    }
}

fn verdict_code(report: &SynthesisReport) -> u8 {
    if report.all_feasible() {
        0
    } else if report
        .subsystems
        .iter()
        .any(|s| !s.feasible && s.solver.status == sdp::SolveStatus::IllConditioned)
    {
        EXIT_NUMERICAL
    } else {
        EXIT_INFEASIBLE
    }
}

fn print_report(report: &SynthesisReport) {
    println!("method {}", report.method);
    for s in &report.subsystems {
        println!(
            "{}: {} rho {:.6} (minimum {:.6}), solver {} after {} iterations, max relaxed eig {:.3e}, blended {:.3e}",
            s.name,
            if s.feasible { "feasible" } else { "infeasible" },
            s.rho,
            s.rho_min,
            s.solver.status,
            s.solver.iterations,
            s.verification.relaxed_max_eig,
            s.verification.blended_max_eig
        );
    }
}

fn parse_x0(text: &str) -> Result<Vec<Vec<f64>>, Error> {
    text.split(';')
        .map(|part| {
            part.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Invalid(format!("bad initial-state entry `{}`", v.trim())))
                })
                .collect()
        })
        .collect()
}

fn dump_instances(net: &NetworkModel, opts: &SynthOptions, dir: &Path) -> Result<(), Error> {
    for (i, sub) in net.subsystems.iter().enumerate() {
        let ctx = SubsystemLmis::new(net, i, opts.method, &opts.assembly)?;
        for inst in ctx.all_relaxed()? {
            inst.dump(&dir.join(&sub.name))?;
        }
    }
    Ok(())
}

fn dump_problems(net: &NetworkModel, opts: &SynthOptions, dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    for (i, sub) in net.subsystems.iter().enumerate() {
        let ctx = SubsystemLmis::new(net, i, opts.method, &opts.assembly)?;
        let problem = sdp::vectorize(&ctx.all_relaxed()?, &ctx.catalog, Objective::MinimizeMu)?;
        problem.write_sdpa(&dir.join(format!("{}.dat-s", sub.name)))?;
    }
    Ok(())
}
