//! Gradient-flow identification diagnostics: the resolvent of the energy
//! subdifferential in the weighted dual metric, contraction checks between
//! trajectories, and stationary-limit probes.
//!
//! With homogeneous boundary data the proximal step is exactly the
//! resolvent of a maximal monotone operator on the discrete dual product
//! space, so resolvent nonexpansiveness and step-wise distance contraction
//! are executable consequences rather than assumptions; this module turns
//! them into checks.

use crate::elliptic::{EllipticSolver, ProductMetric};
use crate::energy::EnergyLaw;
use crate::error::Error;
use crate::evolution::{run, Scenario, Trajectory};
use crate::grid::{BoundaryData, BoundaryPartition, Mesh, ScalarField, VectorField};
use crate::step::{kkt_residuals, SolverConfig, StepEngine, StepProblem, StepSolution};

/// Handles for resolvent evaluations over one (mesh, partition, law, sigma)
/// quadruple with homogeneous boundary data.
pub struct GradientFlow<'a> {
    pub mesh: &'a Mesh,
    pub partition: &'a BoundaryPartition,
    pub law: &'a EnergyLaw,
    pub sigma: [ScalarField; 2],
}

impl<'a> GradientFlow<'a> {
    pub fn new(
        mesh: &'a Mesh,
        partition: &'a BoundaryPartition,
        law: &'a EnergyLaw,
        sigma: [ScalarField; 2],
    ) -> Self {
        GradientFlow { mesh, partition, law, sigma }
    }

    /// The metric of the ambient dual product space.
    pub fn metric(&self) -> Result<ProductMetric<'a>, Error>
    {
        ProductMetric::new(self.mesh, self.partition, &self.sigma)
    }

    /// Solve rho + lambda dE(rho) owns f with homogeneous boundary data.
    pub fn resolvent(
        &self,
        lambda: f64,
        f: &[ScalarField; 2],
        config: &SolverConfig,
    ) -> Result<StepSolution, Error> {
        if !(lambda > 0.0) {
            return Err(Error::Usage(format!("resolvent needs lambda > 0, got {lambda}")));
        }
        let ne = self.mesh.n_elems();
        let sigma_eff = [
            ScalarField(self.sigma[0].0.iter().map(|s| lambda * s).collect()),
            ScalarField(self.sigma[1].0.iter().map(|s| lambda * s).collect()),
        ];
        let problem = StepProblem {
            mesh: self.mesh,
            partition: self.partition,
            law: self.law,
            sigma: sigma_eff,
            mu: [f[0].clone(), f[1].clone()],
            chi: [VectorField::zeros(ne), VectorField::zeros(ne)],
            boundary: BoundaryData::zeros(self.mesh),
        };
        let engine = StepEngine::new(&problem, config.power_iterations)?;
        Ok(engine.solve(&problem.mu, &problem.chi, config, None))
    }
}

/// Verdict of a trajectory-pair contraction check.
#[derive(Debug, Clone, PartialEq)]
pub enum ContractionVerdict {
    Pass,
    Fail { step: usize, distance: f64, previous: f64 },
    NotApplicable { reason: String },
}

#[derive(Debug, Clone)]
pub struct ContractionReport {
    pub distances: Vec<f64>,
    pub verdict: ContractionVerdict,
}

/// Step-wise product-metric distances between two trajectories and the
/// nonincrease verdict. Applicable only to drift-free pairs sharing the
/// same time grid and homogeneous boundary data.
pub fn contraction_check(
    a: &Trajectory,
    b: &Trajectory,
    metric: &ProductMetric,
) -> Result<ContractionReport, Error> {
    if a.snapshots.len() != b.snapshots.len() || (a.tau - b.tau).abs() > 1e-14 {
        return Err(Error::Usage("trajectories do not share a time grid".into()));
    }
    if a.snapshots[0].rho[0].len() != b.snapshots[0].rho[0].len() {
        return Err(Error::Usage("trajectories live on different meshes".into()));
    }
    if !a.drift_free || !b.drift_free {
        return Ok(ContractionReport {
            distances: Vec::new(),
            verdict: ContractionVerdict::NotApplicable {
                reason: "contraction requires vanishing drift".into(),
            },
        });
    }
    if !a.homogeneous_boundary || !b.homogeneous_boundary {
        return Ok(ContractionReport {
            distances: Vec::new(),
            verdict: ContractionVerdict::NotApplicable {
                reason: "contraction requires homogeneous boundary data".into(),
            },
        });
    }
    let mut distances = Vec::with_capacity(a.snapshots.len());
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        distances.push(metric.pair_distance(&sa.rho, &sb.rho));
    }
    let mut verdict = ContractionVerdict::Pass;
    for i in 1..distances.len() {
        if distances[i] > distances[i - 1] + 1e-8 {
            verdict = ContractionVerdict::Fail {
                step: i,
                distance: distances[i],
                previous: distances[i - 1],
            };
            break;
        }
    }
    Ok(ContractionReport { distances, verdict })
}

/// Outcome of a stationary-limit probe.
#[derive(Debug, Clone)]
pub struct StationaryProbe {
    pub converged: bool,
    pub steps: usize,
    pub rho_inf: [ScalarField; 2],
    pub eta_inf: [ScalarField; 2],
    /// Potentials of the direct stationary solves.
    pub eta_direct: [ScalarField; 2],
    /// Product-metric increments of the trailing steps.
    pub tail_distances: Vec<f64>,
    /// Worst state-relation residual of (rho_inf, eta_direct).
    pub membership_residual: f64,
}

/// Run the evolution of a time-constant scenario until the step increment
/// falls below `tail_tolerance`, then cross-validate the potentials
/// against the direct stationary linear solves.
///
/// The stepping is done in place (constant source, no drift, so every step
/// shares one engine) and stops the moment the tail tolerance fires or the
/// horizon is exhausted.
pub fn stationary_probe(
    scenario: &Scenario,
    config: &SolverConfig,
    tail_tolerance: f64,
) -> Result<StationaryProbe, Error> {
    scenario.validate()?;
    if !scenario.source.is_constant() {
        return Err(Error::Usage(
            "stationary probe requires a time-constant source".into(),
        ));
    }
    if !scenario.is_drift_free() {
        return Err(Error::Usage("stationary probe requires vanishing drift".into()));
    }
    let mesh = &scenario.mesh;
    let n = mesh.n_nodes();
    let ne = mesh.n_elems();
    let tau = scenario.tau;
    let metric = ProductMetric::new(mesh, &scenario.partition, &scenario.sigma)?;

    let sigma_eff = [
        ScalarField(scenario.sigma[0].0.iter().map(|s| tau * s).collect()),
        ScalarField(scenario.sigma[1].0.iter().map(|s| tau * s).collect()),
    ];
    let boundary_eff = BoundaryData {
        g: [scenario.boundary.g[0].clone(), scenario.boundary.g[1].clone()],
        pi: [
            scenario.boundary.pi[0].iter().map(|p| tau * p).collect(),
            scenario.boundary.pi[1].iter().map(|p| tau * p).collect(),
        ],
    };
    let shape = StepProblem {
        mesh,
        partition: &scenario.partition,
        law: &scenario.law,
        sigma: sigma_eff,
        mu: [ScalarField::zeros(n), ScalarField::zeros(n)],
        chi: [VectorField::zeros(ne), VectorField::zeros(ne)],
        boundary: boundary_eff,
    };
    let engine = StepEngine::new(&shape, config.power_iterations)?;
    // certify every iteration: near stationarity the warm start barely
    // moves before stopping, which keeps the step increments quiet
    let mut step_config = config.clone();
    step_config.check_interval = 1;

    let src = scenario.source.first();
    let mut chi = [VectorField::zeros(ne), VectorField::zeros(ne)];
    for k in 0..2 {
        for e in 0..ne {
            chi[k][e] = [tau * src.fbar[k][e][0], tau * src.fbar[k][e][1]];
        }
    }
    let steps = (scenario.horizon / tau).ceil() as usize;
    let mut rho = [scenario.rho0[0].clone(), scenario.rho0[1].clone()];
    let mut eta = [engine.lifted()[0].clone(), engine.lifted()[1].clone()];
    let mut tail_distances = Vec::new();
    let mut converged = false;
    let mut cut = 0;
    for step in 1..=steps {
        let mut mu = [ScalarField::zeros(n), ScalarField::zeros(n)];
        for k in 0..2 {
            for i in 0..n {
                mu[k][i] = rho[k][i] + tau * src.f0[k][i];
            }
        }
        let solution = engine.solve(&mu, &chi, &step_config, Some(&eta));
        if !solution.converged {
            return Err(Error::Solver(format!(
                "stationary probe step {step} did not certify (relative gap {:.3e})",
                solution.rel_gap
            )));
        }
        let d = metric.pair_distance(&solution.rho, &rho);
        tail_distances.push(d);
        rho = [solution.rho[0].clone(), solution.rho[1].clone()];
        for i in 0..n {
            let p = scenario.law.at(i).project_pair([rho[0][i], rho[1][i]]);
            rho[0][i] = p[0];
            rho[1][i] = p[1];
        }
        eta = [solution.eta[0].clone(), solution.eta[1].clone()];
        cut = step;
        if d < tail_tolerance {
            converged = true;
            break;
        }
    }
    let rho_inf = [rho[0].clone(), rho[1].clone()];
    let eta_inf = [eta[0].clone(), eta[1].clone()];

    // direct stationary potentials: one linear mixed solve per species
    let src = scenario.source.first();
    let mut eta_direct =
        [ScalarField::zeros(scenario.mesh.n_nodes()), ScalarField::zeros(scenario.mesh.n_nodes())];
    for k in 0..2 {
        let solver =
            EllipticSolver::new(&scenario.mesh, &scenario.partition, k, &scenario.sigma[k])?;
        eta_direct[k] = solver.solve_mixed_poisson(
            &src.f0[k],
            &src.fbar[k],
            &scenario.boundary.pi[k],
            &scenario.boundary.g[k],
        );
    }
    let membership_residual =
        kkt_residuals(&scenario.mesh, &scenario.law, &rho_inf, &eta_direct).max_violation;
    Ok(StationaryProbe {
        converged,
        steps: cut,
        rho_inf,
        eta_inf,
        eta_direct,
        tail_distances,
        membership_residual,
    })
}
