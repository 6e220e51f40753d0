//! The time loop: piecewise-constant proximal iteration with slab-averaged
//! sources, lagged drift, weighted-energy rescaling and per-step monitors.
//!
//! Each step solves one resolvent problem with effective data
//! sigma_eff = tau sigma, mu = rho_prev + tau f0, chi = tau (rho_prev V
//! + fbar), pi_eff = tau pi, and records the energy, masses, dissipation,
//! the discrete energy-inequality slack and the solver certificates. A
//! non-converged step aborts with the partial trajectory.

use crate::energy::EnergyLaw;
use crate::error::Error;
use crate::grid::{
    lift_dirichlet, BoundaryData, BoundaryPartition, Mesh, ScalarField, SourceData, VectorField,
};
use crate::step::{KktResiduals, SolverConfig, StepEngine, StepProblem};

/// Piecewise-constant time table: entry j is active on
/// [entries[j].0, entries[j+1].0), the last one up to infinity.
#[derive(Debug, Clone)]
pub struct TimeTable<T: Clone> {
    entries: Vec<(f64, T)>,
}

impl<T: Clone> TimeTable<T> {
    pub fn constant(value: T) -> Self {
        TimeTable { entries: vec![(0.0, value)] }
    }

    pub fn new(entries: Vec<(f64, T)>) -> Result<Self, Error> {
        if entries.is_empty() {
            return Err(Error::Config("time table needs at least one entry".into()));
        }
        for w in entries.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Config("time table entries must be increasing".into()));
            }
        }
        Ok(TimeTable { entries })
    }

    pub fn is_constant(&self) -> bool {
        self.entries.len() == 1
    }

    pub fn first(&self) -> &T {
        &self.entries[0].1
    }

    pub fn entries(&self) -> &[(f64, T)] {
        &self.entries
    }

    /// Overlap fractions of each entry with the slab (t0, t1], normalized by
    /// the slab length: the exact time average of a piecewise-constant table.
    pub fn slab_weights(&self, t0: f64, t1: f64) -> Vec<(f64, &T)> {
        assert!(t1 > t0);
        let mut out = Vec::new();
        for (j, (start, value)) in self.entries.iter().enumerate() {
            let end = self.entries.get(j + 1).map(|e| e.0).unwrap_or(f64::INFINITY);
            let lo = start.max(t0);
            let hi = end.min(t1);
            if hi > lo {
                out.push(((hi - lo) / (t1 - t0), value));
            }
        }
        // clamp: slabs starting before the first entry use the first value
        if self.entries[0].0 > t0 {
            let hi = self.entries[0].0.min(t1);
            if hi > t0 {
                out.insert(0, ((hi - t0) / (t1 - t0), &self.entries[0].1));
            }
        }
        out
    }
}

/// A full time-dependent problem.
pub struct Scenario {
    pub mesh: Mesh,
    pub partition: BoundaryPartition,
    pub law: EnergyLaw,
    pub sigma: [ScalarField; 2],
    pub rho0: [ScalarField; 2],
    pub drift: TimeTable<[VectorField; 2]>,
    pub source: TimeTable<SourceData>,
    pub boundary: BoundaryData,
    pub tau: f64,
    pub horizon: f64,
    /// Optional positive weights of the two densities inside the energy.
    pub alpha: Option<[f64; 2]>,
    pub snapshot_stride: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), Error> {
        let n = self.mesh.n_nodes();
        for k in 0..2 {
            if self.sigma[k].len() != n || self.rho0[k].len() != n {
                return Err(Error::Config("field sizes do not match the mesh".into()));
            }
            if self.sigma[k].min() <= 0.0 {
                return Err(Error::Config("sigma must be positive".into()));
            }
            if !self.rho0[k].all_finite() || self.rho0[k].min() < 0.0 {
                return Err(Error::Config(
                    "initial densities must be finite and nonnegative".into(),
                ));
            }
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if self.tau > self.horizon {
            return Err(Error::Config(format!(
                "tau = {} exceeds the horizon T = {}",
                self.tau, self.horizon
            )));
        }
        let alpha = self.alpha.unwrap_or([1.0, 1.0]);
        if alpha[0] <= 0.0 || alpha[1] <= 0.0 {
            return Err(Error::Config("energy weights must be positive".into()));
        }
        let weighted_energy = {
            let w = self.mesh.lumped_weights();
            let mut acc = 0.0;
            for i in 0..n {
                acc += w[i]
                    * self
                        .law
                        .at(i)
                        .beta(alpha[0] * self.rho0[0][i] + alpha[1] * self.rho0[1][i]);
            }
            acc
        };
        if !weighted_energy.is_finite() {
            return Err(Error::Config(
                "initial density has infinite energy under the configured law".into(),
            ));
        }
        Ok(())
    }

    pub fn is_drift_free(&self) -> bool {
        self.drift
            .entries()
            .iter()
            .all(|(_, v)| {
                v[0].0.iter().all(|x| x[0] == 0.0 && x[1] == 0.0)
                    && v[1].0.iter().all(|x| x[0] == 0.0 && x[1] == 0.0)
            })
    }

    pub fn has_homogeneous_boundary(&self) -> bool {
        self.boundary.g[0].0.iter().all(|&v| v == 0.0)
            && self.boundary.g[1].0.iter().all(|&v| v == 0.0)
            && self.boundary.pi[0].iter().all(|&v| v == 0.0)
            && self.boundary.pi[1].iter().all(|&v| v == 0.0)
    }

    fn step_count(&self) -> usize {
        let ratio = self.horizon / self.tau;
        if (ratio - ratio.round()).abs() < 1e-9 {
            ratio.round() as usize
        } else {
            ratio.ceil() as usize
        }
    }
}

/// One recorded state of the evolution.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub rho: [ScalarField; 2],
    pub eta: [ScalarField; 2],
}

/// Per-step monitors.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    pub energy: f64,
    pub mass: [f64; 2],
    /// int F_sigma[grad(eta - g~)] with the scenario weights.
    pub dissipation: f64,
    /// Discrete energy-inequality defect (left side minus right side);
    /// nonpositive up to the solver tolerance.
    pub slack: f64,
    pub gap: f64,
    pub rel_gap: f64,
    pub kkt: KktResiduals,
    /// int ((rho1 + rho2 - M)+)^2 with M from the law's growth constants.
    pub excess: f64,
    pub iterations: usize,
}

/// Computed evolution with monitors.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub reports: Vec<StepReport>,
    pub completed: bool,
    pub failure: Option<String>,
    pub tau: f64,
    pub drift_free: bool,
    pub homogeneous_boundary: bool,
}

impl Trajectory {
    pub fn final_rho(&self) -> &[ScalarField; 2] {
        &self.snapshots.last().expect("trajectory holds the initial snapshot").rho
    }

    pub fn final_eta(&self) -> &[ScalarField; 2] {
        &self.snapshots.last().expect("trajectory holds the initial snapshot").eta
    }
}

/// Total internal energy of a density pair under the law.
pub fn energy(mesh: &Mesh, law: &EnergyLaw, rho: &[ScalarField; 2]) -> f64 {
    let w = mesh.lumped_weights();
    let mut acc = 0.0;
    for i in 0..mesh.n_nodes() {
        let total = rho[0][i] + rho[1][i];
        if total < -1e-9 {
            return f64::INFINITY;
        }
        acc += w[i] * law.at(i).beta(total.max(0.0));
        if !acc.is_finite() {
            return f64::INFINITY;
        }
    }
    acc
}

/// Node classification by dominance pattern, for diagnostics only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionLabel {
    S1,
    S2,
    S,
    Vacuum,
}

impl RegionLabel {
    pub fn token(&self) -> &'static str {
        match self {
            RegionLabel::S1 => "S1",
            RegionLabel::S2 => "S2",
            RegionLabel::S => "S",
            RegionLabel::Vacuum => "vacuum",
        }
    }
}

pub fn region_classify(rho: &[ScalarField; 2], threshold: f64) -> Vec<RegionLabel> {
    (0..rho[0].len())
        .map(|i| match (rho[0][i] > threshold, rho[1][i] > threshold) {
            (true, false) => RegionLabel::S1,
            (false, true) => RegionLabel::S2,
            (true, true) => RegionLabel::S,
            (false, false) => RegionLabel::Vacuum,
        })
        .collect()
}

fn element_average(mesh: &Mesh, u: &ScalarField) -> Vec<f64> {
    (0..mesh.n_elems())
        .map(|e| {
            let verts = mesh.elem(e);
            verts.iter().map(|&v| u[v]).sum::<f64>() / verts.len() as f64
        })
        .collect()
}

/// Run the proximal evolution.
pub fn run(scenario: &Scenario, config: &SolverConfig) -> Result<Trajectory, Error> {
    scenario.validate()?;
    if let Some(alpha) = scenario.alpha {
        if alpha != [1.0, 1.0] {
            return run_weighted(scenario, config);
        }
    }
    run_plain(scenario, config)
}

fn run_plain(scenario: &Scenario, config: &SolverConfig) -> Result<Trajectory, Error> {
    let mesh = &scenario.mesh;
    let n = mesh.n_nodes();
    let ne = mesh.n_elems();
    let w = mesh.lumped_weights();
    let steps = scenario.step_count();
    let stride = scenario.snapshot_stride.max(1);
    let big_m = scenario.law.coercivity().big_m;

    let lifted = lift_dirichlet(mesh, &scenario.partition, &scenario.boundary, &scenario.sigma)?;
    let glift = [mesh.gradient(&lifted[0]), mesh.gradient(&lifted[1])];
    let sigma_elem =
        [element_average(mesh, &scenario.sigma[0]), element_average(mesh, &scenario.sigma[1])];
    let lift_dissipation: f64 = (0..ne)
        .map(|e| {
            let m = mesh.elem_measure(e);
            let mut acc = 0.0;
            for k in 0..2 {
                acc += 0.5
                    * m
                    * sigma_elem[k][e]
                    * (glift[k][e][0] * glift[k][e][0] + glift[k][e][1] * glift[k][e][1]);
            }
            acc
        })
        .sum();
    let neumann_base = [
        scenario.partition.neumann_load(mesh, 0, &scenario.boundary.pi[0]),
        scenario.partition.neumann_load(mesh, 1, &scenario.boundary.pi[1]),
    ];

    let mut rho = [scenario.rho0[0].clone(), scenario.rho0[1].clone()];
    let mut eta = [lifted[0].clone(), lifted[1].clone()];
    let mut snapshots = vec![Snapshot {
        step: 0,
        time: 0.0,
        rho: [rho[0].clone(), rho[1].clone()],
        eta: [ScalarField::zeros(n), ScalarField::zeros(n)],
    }];
    let mut reports = Vec::with_capacity(steps);
    let mut completed = true;
    let mut failure = None;

    // engine cache: the shape changes only when the slab length changes
    let mut engine: Option<(f64, StepEngine)> = None;

    let mut t_prev = 0.0;
    for step in 1..=steps {
        let t_next = if step == steps { scenario.horizon } else { step as f64 * scenario.tau };
        let tau_i = t_next - t_prev;

        // exact slab averages of the piecewise-constant tables
        let mut f0 = [ScalarField::zeros(n), ScalarField::zeros(n)];
        let mut fbar = [VectorField::zeros(ne), VectorField::zeros(ne)];
        for (frac, src) in scenario.source.slab_weights(t_prev, t_next) {
            for k in 0..2 {
                for i in 0..n {
                    f0[k][i] += frac * src.f0[k][i];
                }
                for e in 0..ne {
                    fbar[k][e][0] += frac * src.fbar[k][e][0];
                    fbar[k][e][1] += frac * src.fbar[k][e][1];
                }
            }
        }
        let mut drift = [VectorField::zeros(ne), VectorField::zeros(ne)];
        for (frac, v) in scenario.drift.slab_weights(t_prev, t_next) {
            for k in 0..2 {
                for e in 0..ne {
                    drift[k][e][0] += frac * v[k][e][0];
                    drift[k][e][1] += frac * v[k][e][1];
                }
            }
        }

        let rebuild = match &engine {
            Some((tau_cached, _)) => (tau_cached - tau_i).abs() > 1e-14 * scenario.tau,
            None => true,
        };
        if rebuild {
            let sigma_eff = [
                ScalarField(scenario.sigma[0].0.iter().map(|s| tau_i * s).collect()),
                ScalarField(scenario.sigma[1].0.iter().map(|s| tau_i * s).collect()),
            ];
            let boundary_eff = BoundaryData {
                g: [scenario.boundary.g[0].clone(), scenario.boundary.g[1].clone()],
                pi: [
                    scenario.boundary.pi[0].iter().map(|p| tau_i * p).collect(),
                    scenario.boundary.pi[1].iter().map(|p| tau_i * p).collect(),
                ],
            };
            let problem = StepProblem {
                mesh,
                partition: &scenario.partition,
                law: &scenario.law,
                sigma: sigma_eff,
                mu: [ScalarField::zeros(n), ScalarField::zeros(n)],
                chi: [VectorField::zeros(ne), VectorField::zeros(ne)],
                boundary: boundary_eff,
            };
            engine = Some((tau_i, StepEngine::new(&problem, config.power_iterations)?));
        }
        let (_, eng) = engine.as_ref().unwrap();

        // lagged drift: the transported density is the previous iterate
        let rho_elem = [element_average(mesh, &rho[0]), element_average(mesh, &rho[1])];
        let mut mu = [ScalarField::zeros(n), ScalarField::zeros(n)];
        let mut chi = [VectorField::zeros(ne), VectorField::zeros(ne)];
        for k in 0..2 {
            for i in 0..n {
                mu[k][i] = rho[k][i] + tau_i * f0[k][i];
            }
            for e in 0..ne {
                chi[k][e][0] = tau_i * (rho_elem[k][e] * drift[k][e][0] + fbar[k][e][0]);
                chi[k][e][1] = tau_i * (rho_elem[k][e] * drift[k][e][1] + fbar[k][e][1]);
            }
        }

        let solution = eng.solve(&mu, &chi, config, Some(&eta));

        // monitors are evaluated with the unscaled weights
        let energy_prev = energy(mesh, &scenario.law, &rho);
        let energy_now = energy(mesh, &scenario.law, &solution.rho);
        let mut mass = [0.0; 2];
        for k in 0..2 {
            mass[k] = (0..n).map(|i| w[i] * solution.rho[k][i]).sum();
        }
        let geta = [mesh.gradient(&solution.eta[0]), mesh.gradient(&solution.eta[1])];
        let mut dissipation = 0.0;
        let mut drift_pairing = 0.0;
        let mut fbar_pairing = 0.0;
        for e in 0..ne {
            let m = mesh.elem_measure(e);
            for k in 0..2 {
                let diff = [geta[k][e][0] - glift[k][e][0], geta[k][e][1] - glift[k][e][1]];
                dissipation += 0.5 * m * sigma_elem[k][e] * (diff[0] * diff[0] + diff[1] * diff[1]);
                drift_pairing += m
                    * rho_elem[k][e]
                    * (drift[k][e][0] * diff[0] + drift[k][e][1] * diff[1]);
                fbar_pairing += m * (fbar[k][e][0] * diff[0] + fbar[k][e][1] * diff[1]);
            }
        }
        let mut charge_now = 0.0;
        let mut charge_prev = 0.0;
        let mut source_pairing = 0.0;
        let mut neumann_pairing = 0.0;
        for k in 0..2 {
            for i in 0..n {
                charge_now += w[i] * solution.rho[k][i] * lifted[k][i];
                charge_prev += w[i] * rho[k][i] * lifted[k][i];
                source_pairing += w[i] * f0[k][i] * (solution.eta[k][i] - lifted[k][i]);
                neumann_pairing += neumann_base[k][i] * solution.eta[k][i];
            }
        }
        source_pairing -= fbar_pairing;
        let lhs = (energy_now - charge_now) - (energy_prev - charge_prev) + tau_i * dissipation;
        let rhs = tau_i * source_pairing - tau_i * drift_pairing
            + tau_i * lift_dissipation
            + tau_i * neumann_pairing;
        let slack = lhs - rhs;
        let excess = (0..n)
            .map(|i| {
                let e = (solution.rho[0][i] + solution.rho[1][i] - big_m).max(0.0);
                w[i] * e * e
            })
            .sum();

        reports.push(StepReport {
            step,
            time: t_next,
            energy: energy_now,
            mass,
            dissipation,
            slack,
            gap: solution.gap,
            rel_gap: solution.rel_gap,
            kkt: solution.kkt,
            excess,
            iterations: solution.iterations,
        });

        // the scheme's state space is the nonnegative densities: project
        // the certified iterate back onto it so sub-tolerance negative
        // parts cannot accumulate across steps
        rho = [solution.rho[0].clone(), solution.rho[1].clone()];
        for i in 0..n {
            let p = scenario.law.at(i).project_pair([rho[0][i], rho[1][i]]);
            rho[0][i] = p[0];
            rho[1][i] = p[1];
        }
        eta = [solution.eta[0].clone(), solution.eta[1].clone()];
        if step % stride == 0 || step == steps || !solution.converged {
            snapshots.push(Snapshot {
                step,
                time: t_next,
                rho: [rho[0].clone(), rho[1].clone()],
                eta: [eta[0].clone(), eta[1].clone()],
            });
        }
        if !solution.converged {
            completed = false;
            failure = Some(format!(
                "step {step} did not certify: relative gap {:.3e} after {} iterations",
                solution.rel_gap, solution.iterations
            ));
            break;
        }
        t_prev = t_next;
    }

    Ok(Trajectory {
        snapshots,
        reports,
        completed,
        failure,
        tau: scenario.tau,
        drift_free: scenario.is_drift_free(),
        homogeneous_boundary: scenario.has_homogeneous_boundary(),
    })
}

/// Run the weighted-energy evolution by rescaling to the plain scheme and
/// mapping the densities back.
pub fn run_weighted(scenario: &Scenario, config: &SolverConfig) -> Result<Trajectory, Error> {
    scenario.validate()?;
    let alpha = scenario.alpha.unwrap_or([1.0, 1.0]);
    let rescaled = rescale_scenario(scenario, alpha);
    let mut trajectory = run_plain(&rescaled, config)?;
    for snap in trajectory.snapshots.iter_mut() {
        for k in 0..2 {
            for v in snap.rho[k].0.iter_mut() {
                *v /= alpha[k];
            }
        }
    }
    for report in trajectory.reports.iter_mut() {
        for k in 0..2 {
            report.mass[k] /= alpha[k];
        }
    }
    Ok(trajectory)
}

/// The equivalent plain scenario of a weighted one: densities scaled by
/// alpha, weights folded into sigma, sources and fluxes.
pub fn rescale_scenario(scenario: &Scenario, alpha: [f64; 2]) -> Scenario {
    let scale_field = |f: &ScalarField, s: f64| ScalarField(f.0.iter().map(|v| v * s).collect());
    let scale_vec = |f: &VectorField, s: f64| {
        VectorField(f.0.iter().map(|v| [v[0] * s, v[1] * s]).collect())
    };
    // divide the per-species data by its weight
    let source = TimeTable::new(
        scenario
            .source
            .entries()
            .iter()
            .map(|(t, s)| {
                (
                    *t,
                    SourceData {
                        f0: [
                            scale_field(&s.f0[0], 1.0 / alpha[0]),
                            scale_field(&s.f0[1], 1.0 / alpha[1]),
                        ],
                        fbar: [
                            scale_vec(&s.fbar[0], 1.0 / alpha[0]),
                            scale_vec(&s.fbar[1], 1.0 / alpha[1]),
                        ],
                    },
                )
            })
            .collect(),
    )
    .expect("source table stays valid");
    Scenario {
        mesh: scenario.mesh.clone(),
        partition: scenario.partition.clone(),
        law: scenario.law.clone(),
        sigma: [
            scale_field(&scenario.sigma[0], 1.0 / alpha[0]),
            scale_field(&scenario.sigma[1], 1.0 / alpha[1]),
        ],
        rho0: [
            scale_field(&scenario.rho0[0], alpha[0]),
            scale_field(&scenario.rho0[1], alpha[1]),
        ],
        drift: scenario.drift.clone(),
        source,
        boundary: BoundaryData {
            g: [scenario.boundary.g[0].clone(), scenario.boundary.g[1].clone()],
            pi: [
                scenario.boundary.pi[0].iter().map(|p| p / alpha[0]).collect(),
                scenario.boundary.pi[1].iter().map(|p| p / alpha[1]).collect(),
            ],
        },
        tau: scenario.tau,
        horizon: scenario.horizon,
        alpha: None,
        snapshot_stride: scenario.snapshot_stride,
    }
}

/// Data-dependent bound on sup over steps of int ((rho1 + rho2 - M)+)^2,
/// following the discrete energy inequality and the quadratic growth of
/// the law. Tight for drift-free homogeneous runs; for general data the
/// source and flux norms enter quadratically with an exponential factor in
/// the drift bound.
pub fn apriori_bound(scenario: &Scenario) -> Result<f64, Error> {
    scenario.validate()?;
    let mesh = &scenario.mesh;
    let n = mesh.n_nodes();
    let ne = mesh.n_elems();
    let w = mesh.lumped_weights();
    let coercivity = scenario.law.coercivity();
    let big_c = coercivity.big_c;
    let big_m = coercivity.big_m;
    let lifted = lift_dirichlet(mesh, &scenario.partition, &scenario.boundary, &scenario.sigma)?;
    let glift = [mesh.gradient(&lifted[0]), mesh.gradient(&lifted[1])];
    let sigma_elem =
        [element_average(mesh, &scenario.sigma[0]), element_average(mesh, &scenario.sigma[1])];

    let e0 = energy(mesh, &scenario.law, &scenario.rho0);
    let mut charge0 = 0.0;
    let mut gmax_sq = 0.0;
    let mut gmax_l1 = 0.0;
    for i in 0..n {
        for k in 0..2 {
            charge0 += w[i] * scenario.rho0[k][i] * lifted[k][i];
        }
        let gm = lifted[0][i].abs().max(lifted[1][i].abs());
        gmax_sq += w[i] * gm * gm;
        gmax_l1 += w[i] * gm;
    }
    let mut lift_dissipation = 0.0;
    for e in 0..ne {
        let m = mesh.elem_measure(e);
        for k in 0..2 {
            lift_dissipation += 0.5
                * m
                * sigma_elem[k][e]
                * (glift[k][e][0] * glift[k][e][0] + glift[k][e][1] * glift[k][e][1]);
        }
    }
    let mut data_norms = 0.0;
    for (_, src) in scenario.source.entries() {
        for k in 0..2 {
            for i in 0..n {
                data_norms += w[i] * src.f0[k][i] * src.f0[k][i];
            }
            for e in 0..ne {
                data_norms += mesh.elem_measure(e)
                    * (src.fbar[k][e][0] * src.fbar[k][e][0]
                        + src.fbar[k][e][1] * src.fbar[k][e][1]);
            }
        }
    }
    let mut pi_norm = 0.0;
    for k in 0..2 {
        for (fi, f) in mesh.facets().iter().enumerate() {
            pi_norm += f.measure * scenario.boundary.pi[k][fi] * scenario.boundary.pi[k][fi];
        }
    }
    let vmax = scenario
        .drift
        .entries()
        .iter()
        .flat_map(|(_, v)| v.iter())
        .flat_map(|f| f.0.iter())
        .map(|x| (x[0] * x[0] + x[1] * x[1]).sqrt())
        .fold(0.0, f64::max);
    let domain = mesh.total_measure();
    let horizon = scenario.horizon;

    let base = e0 + charge0.abs()
        + horizon * lift_dissipation
        + gmax_sq / (2.0 * big_c)
        + big_m * gmax_l1
        + horizon * (data_norms + pi_norm)
        + horizon * vmax * vmax * big_m * big_m * domain;
    let groenwall = if vmax > 0.0 {
        let rate = 2.0 * horizon * vmax * vmax / big_c;
        1.0 + rate * rate.exp()
    } else {
        1.0
    };
    Ok((2.0 / big_c) * base * groenwall)
}
