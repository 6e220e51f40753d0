//! Command-line driver: run evolutions, solve single steps, print dual
//! norms, tabulate law graphs, and run the invariant check suite.

use clap::{Parser, Subcommand};
use crowdflow::config::{load_law, load_spatial_context, ScenarioConfig, StepFileConfig};
use crowdflow::csvio;
use crowdflow::elliptic::EllipticSolver;
use crowdflow::error::Error;
use crowdflow::evolution::{energy, region_classify, run};
use crowdflow::grid::{ScalarField, VectorField};
use crowdflow::step::{solve_step, StepProblem};
use crowdflow::suite::run_suite;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "crowdflow", about = "Two-species overcrowding-dispersal solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full evolution scenario and write monitors and snapshots.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (falls back to $CROWDFLOW_OUT, then ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one resolvent problem and write the certified solution.
    Step {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the dual norms of a two-species field.
    Norms {
        #[arg(long)]
        config: PathBuf,
        /// CSV with columns x[,y],f1,f2 on the config's mesh nodes.
        #[arg(long)]
        field: PathBuf,
    },
    /// Tabulate the law: density, conjugate, subdifferential and prox.
    Graphs {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 3.0)]
        rmax: f64,
        #[arg(long, default_value_t = 3.0)]
        qmax: f64,
        #[arg(long, default_value_t = 61)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suite and print a PASS/FAIL table.
    Check {
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("CROWDFLOW_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run { config, out } => cmd_run(&config, &out_dir(out)),
        Command::Step { config, out } => cmd_step(&config, &out_dir(out)),
        Command::Norms { config, field } => cmd_norms(&config, &field),
        Command::Graphs { config, rmax, qmax, samples, out } => {
            cmd_graphs(&config, rmax, qmax, samples, &out_dir(out))
        }
        Command::Check { seed } => cmd_check(seed),
    }
}

fn cmd_run(config_path: &Path, out: &Path) -> Result<ExitCode, Error> {
    let config = ScenarioConfig::from_path(config_path)?;
    let base = config_path.parent().unwrap_or_else(|| Path::new("."));
    let loaded = config.build(base)?;
    let scenario = &loaded.scenario;
    let trajectory = run(scenario, &loaded.solver)?;

    std::fs::create_dir_all(out.join("snapshots"))?;
    let e0 = energy(&scenario.mesh, &scenario.law, &scenario.rho0);
    let w = scenario.mesh.lumped_weights();
    let m0 = {
        let mut m = [0.0; 2];
        for k in 0..2 {
            m[k] = (0..scenario.mesh.n_nodes()).map(|i| w[i] * scenario.rho0[k][i]).sum();
        }
        m
    };
    csvio::write_monitors(&out.join("monitors.csv"), &trajectory.reports, (e0, m0))?;
    for snap in &trajectory.snapshots {
        let labels = region_classify(&snap.rho, 1e-9);
        csvio::write_snapshot(
            &out.join("snapshots").join(format!("snap_{}.csv", snap.step)),
            &scenario.mesh,
            &snap.rho,
            &snap.eta,
            &labels,
        )?;
    }
    let worst_slack =
        trajectory.reports.iter().map(|r| r.slack).fold(f64::NEG_INFINITY, f64::max);
    let worst_slack = if worst_slack.is_finite() { worst_slack } else { 0.0 };
    let worst_gap = trajectory.reports.iter().map(|r| r.rel_gap).fold(0.0f64, f64::max);
    let last = trajectory.reports.last();
    let report = serde_json::json!({
        "converged": trajectory.completed,
        "failure": trajectory.failure,
        "final_energy": last.map(|r| r.energy).unwrap_or(e0),
        "final_mass": last.map(|r| r.mass).unwrap_or(m0),
        "steps": trajectory.reports.len(),
        "worst_gap": worst_gap,
        "worst_slack": worst_slack,
    });
    std::fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;

    if trajectory.completed {
        println!(
            "completed {} steps; worst relative gap {:.3e}, worst slack {:.3e}",
            trajectory.reports.len(),
            worst_gap,
            worst_slack
        );
        Ok(ExitCode::from(0))
    } else {
        eprintln!(
            "partial trajectory: {}",
            trajectory.failure.as_deref().unwrap_or("step failed")
        );
        Ok(ExitCode::from(2))
    }
}

fn cmd_step(config_path: &Path, out: &Path) -> Result<ExitCode, Error> {
    let config = StepFileConfig::from_path(config_path)?;
    let loaded = config.build()?;
    let problem = StepProblem {
        mesh: &loaded.mesh,
        partition: &loaded.partition,
        law: &loaded.law,
        sigma: loaded.sigma,
        mu: loaded.mu,
        chi: loaded.chi,
        boundary: loaded.boundary,
    };
    let solution = solve_step(&problem, &loaded.solver)?;
    std::fs::create_dir_all(out)?;
    let labels = region_classify(&solution.rho, 1e-9);
    csvio::write_snapshot(
        &out.join("solution.csv"),
        &loaded.mesh,
        &solution.rho,
        &solution.eta,
        &labels,
    )?;
    println!(
        "gap={:.6e} rel_gap={:.6e} negativity={:.3e} fenchel={:.3e} complementarity={:.3e} \
         iterations={} converged={}",
        solution.gap,
        solution.rel_gap,
        solution.kkt.negativity,
        solution.kkt.fenchel,
        solution.kkt.complementarity[0].max(solution.kkt.complementarity[1]),
        solution.iterations,
        solution.converged
    );
    Ok(ExitCode::from(if solution.converged { 0 } else { 2 }))
}

fn cmd_norms(config_path: &Path, field_path: &Path) -> Result<ExitCode, Error> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let (mesh, partition, sigma) = load_spatial_context(&text)?;
    let (_, fields) = csvio::read_field_pair(field_path)?;
    if fields[0].len() != mesh.n_nodes() {
        return Err(Error::Usage(format!(
            "field file has {} rows, mesh has {} nodes",
            fields[0].len(),
            mesh.n_nodes()
        )));
    }
    for k in 0..2 {
        let solver = EllipticSolver::new(&mesh, &partition, k, &sigma[k])?;
        let norm = solver.dual_norm(
            &ScalarField(fields[k].clone()),
            &VectorField::zeros(mesh.n_elems()),
        );
        println!("species{} H^-1 norm = {:.12e}", k + 1, norm);
    }
    Ok(ExitCode::from(0))
}

fn cmd_graphs(
    config_path: &Path,
    rmax: f64,
    qmax: f64,
    samples: usize,
    out: &Path,
) -> Result<ExitCode, Error> {
    if samples < 2 || !(rmax > 0.0) || !(qmax > 0.0) {
        return Err(Error::Usage("graphs needs samples >= 2 and positive ranges".into()));
    }
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let law = load_law(&text)?;
    let p = law.at(0);

    let mut csv = String::from("r,beta,q,beta_star,subdiff_lo,subdiff_hi,prox_conjugate\n");
    for i in 0..samples {
        let r = rmax * i as f64 / (samples - 1) as f64;
        let q = -qmax + 2.0 * qmax * i as f64 / (samples - 1) as f64;
        let beta = p.beta(r);
        let (lo, hi) = match p.subdiff(r) {
            Ok(iv) => (iv.lo, iv.hi),
            Err(_) => (f64::NAN, f64::NAN),
        };
        let beta_star = p.conjugate(q).unwrap_or(f64::INFINITY);
        let prox = p.prox_conjugate(1.0, q);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            csvio::fmt_f64(r),
            csvio::fmt_f64(beta),
            csvio::fmt_f64(q),
            csvio::fmt_f64(beta_star),
            csvio::fmt_f64(lo),
            csvio::fmt_f64(hi),
            csvio::fmt_f64(prox),
        ));
    }
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("graphs.csv"), csv)?;
    println!("wrote {}", out.join("graphs.csv").display());
    Ok(ExitCode::from(0))
}

fn cmd_check(seed: u64) -> Result<ExitCode, Error> {
    let results = run_suite(seed)?;
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(10);
    let mut all_passed = true;
    println!("{:<width$}  {:>12}  {:>12}  result", "check", "observed", "threshold");
    for r in &results {
        println!(
            "{:<width$}  {:>12.3e}  {:>12.3e}  {}",
            r.name,
            r.observed,
            r.threshold,
            if r.passed { "PASS" } else { "FAIL" }
        );
        all_passed &= r.passed;
    }
    Ok(ExitCode::from(if all_passed { 0 } else { 1 }))
}
