//! One resolvent problem: the coupled primal/dual pair solved by
//! primal-dual splitting, with density recovery, duality-gap certification
//! and pointwise state-relation residuals.
//!
//! The dual unknown is the potential pair (eta_1, eta_2), pinned to the
//! Dirichlet charges of each species. Its objective splits into a quadratic
//! term in the gradients (closed-form resolvent element by element) and a
//! pointwise term carrying the coupled conjugate beta*(eta_1 v eta_2) and
//! the linear loads, handled by the coupled prox after a linear shift. The
//! discrete primal and dual are exact Fenchel duals under the lumped nodal
//! quadrature, so the duality gap is a true optimality certificate and is
//! the only stopping criterion.

use crate::energy::{DensitySelection, EnergyLaw, GraphPoint, LawFamily, PointLaw};
use crate::error::Error;
use crate::grid::{lift_dirichlet, BoundaryData, BoundaryPartition, Mesh, ScalarField, VectorField};
use crate::linalg::SparseSym;

/// Splitting-solver knobs.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Relative duality-gap target: gap <= tol * (1 + |dual value|).
    pub gap_tolerance: f64,
    /// Manual (primal, dual) step sizes; `None` balances them from the
    /// operator-norm estimate.
    pub step_sizes: Option<(f64, f64)>,
    pub over_relaxation: f64,
    pub power_iterations: usize,
    /// Gap evaluation cadence, in iterations.
    pub check_interval: usize,
    /// Absolute slack allowed when projecting a recovered density onto the
    /// feasible set for primal evaluation.
    pub feasibility_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 500_000,
            gap_tolerance: 1e-8,
            step_sizes: None,
            over_relaxation: 1.0,
            power_iterations: 50,
            check_interval: 10,
            feasibility_tolerance: 1e-7,
        }
    }
}

impl SolverConfig {
    pub fn with_gap_tolerance(tol: f64) -> Self {
        SolverConfig { gap_tolerance: tol, ..Default::default() }
    }
}

/// Data of one resolvent problem. `sigma` is the effective weight (already
/// scaled by the time step when driven by the evolution loop), `mu` the
/// effective mass and `chi` the effective drift flux.
pub struct StepProblem<'a> {
    pub mesh: &'a Mesh,
    pub partition: &'a BoundaryPartition,
    pub law: &'a EnergyLaw,
    pub sigma: [ScalarField; 2],
    pub mu: [ScalarField; 2],
    pub chi: [VectorField; 2],
    pub boundary: BoundaryData,
}

/// Pointwise state-relation residuals of a step solution.
#[derive(Debug, Clone, Copy, Default)]
pub struct KktResiduals {
    /// Largest negative part over both densities.
    pub negativity: f64,
    /// Largest nodal Fenchel defect of (total density, max potential).
    pub fenchel: f64,
    /// Largest nodal rho_k (eta~ - eta_k) per species.
    pub complementarity: [f64; 2],
    pub max_violation: f64,
}

/// Converged (or best-effort) primal-dual output of one step.
#[derive(Debug, Clone)]
pub struct StepSolution {
    pub eta: [ScalarField; 2],
    pub eta_max: ScalarField,
    pub rho: [ScalarField; 2],
    pub flux: [VectorField; 2],
    /// Absolute duality gap at the reported iterate.
    pub gap: f64,
    /// Gap relative to 1 + |dual value|.
    pub rel_gap: f64,
    pub dual_value: f64,
    pub kkt: KktResiduals,
    pub iterations: usize,
    pub converged: bool,
    /// (iteration, best relative gap) at each certification point.
    pub gap_trace: Vec<(usize, f64)>,
}

/// Assembled operators for one problem shape; reusable across solves that
/// share mesh, partitions, law, sigma and boundary data.
pub struct StepEngine<'a> {
    mesh: &'a Mesh,
    law: &'a EnergyLaw,
    sigma_elem: [Vec<f64>; 2],
    stiffness: [SparseSym; 2],
    free: [Vec<bool>; 2],
    lifted: [ScalarField; 2],
    neumann: [ScalarField; 2],
    weights: Vec<f64>,
    opnorm: f64,
}

impl<'a> StepEngine<'a> {
    pub fn new(problem: &StepProblem<'a>, power_iterations: usize) -> Result<Self, Error> {
        let mesh = problem.mesh;
        let n = mesh.n_nodes();
        for k in 0..2 {
            if problem.sigma[k].len() != n || problem.mu[k].len() != n {
                return Err(Error::Grid("field sizes do not match the mesh".into()));
            }
            if problem.chi[k].len() != mesh.n_elems() {
                return Err(Error::Grid("drift flux size does not match the mesh".into()));
            }
            if !problem.mu[k].all_finite() {
                return Err(Error::Domain("effective mass must be finite".into()));
            }
        }
        if let LawFamily::Tabulated(t) = problem.law.family() {
            if t.extend {
                return Err(Error::Domain(
                    "step solver needs a finite conjugate; linearly extended tabulated laws \
                     are not admissible"
                        .into(),
                ));
            }
        }
        let stiffness = [
            mesh.assemble_stiffness(&problem.sigma[0])?,
            mesh.assemble_stiffness(&problem.sigma[1])?,
        ];
        let sigma_elem = [elementwise(mesh, &problem.sigma[0]), elementwise(mesh, &problem.sigma[1])];
        let free = [
            (0..n).map(|i| !problem.partition.is_dirichlet_node(0, i)).collect::<Vec<bool>>(),
            (0..n).map(|i| !problem.partition.is_dirichlet_node(1, i)).collect::<Vec<bool>>(),
        ];
        let lifted = lift_dirichlet(mesh, problem.partition, &problem.boundary, &problem.sigma)?;
        let neumann = [
            problem.partition.neumann_load(mesh, 0, &problem.boundary.pi[0]),
            problem.partition.neumann_load(mesh, 1, &problem.boundary.pi[1]),
        ];
        let weights = mesh.lumped_weights().to_vec();
        let opnorm = estimate_opnorm(mesh, &free, &weights, power_iterations)?;
        Ok(StepEngine {
            mesh,
            law: problem.law,
            sigma_elem,
            stiffness,
            free,
            lifted,
            neumann,
            weights,
            opnorm,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    pub fn lifted(&self) -> &[ScalarField; 2] {
        &self.lifted
    }

    pub fn opnorm(&self) -> f64 {
        self.opnorm
    }

    /// Recover the density pair from a potential pair: mass-matrix inversion
    /// of the weak-form residual at free nodes, pointwise inverse-graph
    /// selection driven by the Dirichlet charges at pinned nodes.
    pub fn recover_density(
        &self,
        eta: &[ScalarField; 2],
        mu: &[ScalarField; 2],
        chi: &[VectorField; 2],
    ) -> [ScalarField; 2] {
        let n = self.mesh.n_nodes();
        let mut rho = [ScalarField::zeros(n), ScalarField::zeros(n)];
        for k in 0..2 {
            let a_eta = self.stiffness[k].apply_alloc(&eta[k].0);
            let chi_load = self.mesh.divergence_adjoint(&chi[k]);
            for i in 0..n {
                if self.free[k][i] {
                    rho[k][i] =
                        mu[k][i] - (a_eta[i] + chi_load[i] - self.neumann[k][i]) / self.weights[i];
                }
            }
        }
        // pinned rows: pointwise partial minimization of the primal
        for i in 0..n {
            let pinned = [!self.free[0][i], !self.free[1][i]];
            if !pinned[0] && !pinned[1] {
                continue;
            }
            let p = self.law.at(i);
            if pinned[0] && pinned[1] {
                let d = [self.lifted[0][i], self.lifted[1][i]];
                match p.select_density(d) {
                    DensitySelection::FirstOnly(iv) => {
                        rho[0][i] = iv.lo;
                        rho[1][i] = 0.0;
                    }
                    DensitySelection::SecondOnly(iv) => {
                        rho[0][i] = 0.0;
                        rho[1][i] = iv.lo;
                    }
                    DensitySelection::Simplex(iv) => {
                        rho[0][i] = 0.5 * iv.lo;
                        rho[1][i] = 0.5 * iv.lo;
                    }
                }
            } else {
                let (k, j) = if pinned[0] { (0, 1) } else { (1, 0) };
                let other = rho[j][i].max(0.0);
                let total = p.conj_subdiff(self.lifted[k][i]).lo.max(other);
                rho[k][i] = total - other;
            }
        }
        rho
    }

    /// Dual objective at a potential pair respecting the Dirichlet charges.
    pub fn dual_value(
        &self,
        eta: &[ScalarField; 2],
        mu: &[ScalarField; 2],
        chi: &[VectorField; 2],
    ) -> f64 {
        let n = self.mesh.n_nodes();
        let mut value = 0.0;
        for k in 0..2 {
            for i in 0..n {
                value += (self.weights[i] * mu[k][i] + self.neumann[k][i]) * eta[k][i];
            }
            let g = self.mesh.gradient(&eta[k]);
            for e in 0..self.mesh.n_elems() {
                let m = self.mesh.elem_measure(e);
                let g2 = g[e][0] * g[e][0] + g[e][1] * g[e][1];
                let cg = chi[k][e][0] * g[e][0] + chi[k][e][1] * g[e][1];
                value -= m * (cg + 0.5 * self.sigma_elem[k][e] * g2);
            }
        }
        for i in 0..n {
            let q = eta[0][i].max(eta[1][i]);
            value -= self.weights[i] * self.law.at(i).conjugate(q).unwrap_or(f64::INFINITY);
        }
        value
    }

    /// Primal objective at an exactly feasible density/flux pair. The
    /// boundary pairing with the Dirichlet charges is evaluated through the
    /// lifted volume form.
    pub fn primal_value(
        &self,
        rho: &[ScalarField; 2],
        flux: &[VectorField; 2],
        mu: &[ScalarField; 2],
        chi: &[VectorField; 2],
    ) -> f64 {
        let n = self.mesh.n_nodes();
        let mut value = 0.0;
        for i in 0..n {
            let b = self.law.at(i).pair_energy([rho[0][i], rho[1][i]]);
            if b == f64::INFINITY {
                return f64::INFINITY;
            }
            value += self.weights[i] * b;
        }
        for k in 0..2 {
            let glift = self.mesh.gradient(&self.lifted[k]);
            for e in 0..self.mesh.n_elems() {
                let m = self.mesh.elem_measure(e);
                let f = flux[k][e];
                value += 0.5 * m * self.sigma_elem[k][e] * (f[0] * f[0] + f[1] * f[1]);
                let total_flux = [
                    self.sigma_elem[k][e] * f[0] + chi[k][e][0],
                    self.sigma_elem[k][e] * f[1] + chi[k][e][1],
                ];
                value -= m * (total_flux[0] * glift[e][0] + total_flux[1] * glift[e][1]);
            }
            for i in 0..n {
                value += (self.weights[i] * (mu[k][i] - rho[k][i]) + self.neumann[k][i])
                    * self.lifted[k][i];
            }
        }
        value
    }

    /// Certified duality gap of a primal/dual candidate.
    ///
    /// The recovered density is projected onto the pointwise feasible set
    /// and the primal is evaluated there; the balance residual this
    /// projection introduces is paired exactly against the multipliers
    /// (eta - g~), which makes the certificate the Lagrangian excess over
    /// the dual value: nonnegative by construction and vanishing exactly at
    /// optimality. Densities infeasible beyond the stated tolerance yield
    /// an infinite gap.
    pub fn duality_gap(
        &self,
        rho: &[ScalarField; 2],
        flux: &[VectorField; 2],
        eta: &[ScalarField; 2],
        mu: &[ScalarField; 2],
        chi: &[VectorField; 2],
        feasibility_tol: f64,
    ) -> (f64, f64) {
        let d = self.dual_value(eta, mu, chi);
        let n = self.mesh.n_nodes();
        let mut projected = [rho[0].clone(), rho[1].clone()];
        let mut residual_pairing = 0.0;
        for i in 0..n {
            let p = self.law.at(i).project_pair([rho[0][i], rho[1][i]]);
            for k in 0..2 {
                let defect = rho[k][i] - p[k];
                if defect.abs() > feasibility_tol {
                    return (f64::INFINITY, d);
                }
                residual_pairing +=
                    self.weights[i] * (eta[k][i] - self.lifted[k][i]) * defect;
                projected[k][i] = p[k];
            }
        }
        let p = self.primal_value(&projected, flux, mu, chi);
        (p - d + residual_pairing, d)
    }

    /// State-relation residuals at a density/potential pair.
    pub fn kkt_residuals(&self, rho: &[ScalarField; 2], eta: &[ScalarField; 2]) -> KktResiduals {
        kkt_residuals(self.mesh, self.law, rho, eta)
    }

    /// Graph-membership check of the converged pair at every node carrying
    /// mass, at the stated tolerance.
    pub fn membership_holds(
        &self,
        rho: &[ScalarField; 2],
        eta: &[ScalarField; 2],
        tol: f64,
    ) -> bool {
        for i in 0..self.mesh.n_nodes() {
            let total = rho[0][i] + rho[1][i];
            if total <= tol {
                continue;
            }
            let gp = GraphPoint { r: [rho[0][i], rho[1][i]], d: [eta[0][i], eta[1][i]] };
            let rep = self.law.at(i).coupled_membership(gp, tol);
            if !rep.member {
                return false;
            }
        }
        true
    }

    /// Run the splitting iteration. `warm` seeds the potentials (their
    /// Dirichlet entries are overwritten by the current charges).
    pub fn solve(
        &self,
        mu: &[ScalarField; 2],
        chi: &[VectorField; 2],
        config: &SolverConfig,
        warm: Option<&[ScalarField; 2]>,
    ) -> StepSolution {
        let n = self.mesh.n_nodes();
        let ne = self.mesh.n_elems();
        let w = &self.weights;
        let theta = config.over_relaxation;

        // linear coefficient of the pointwise dual term
        let mut shift = [vec![0.0; n], vec![0.0; n]];
        for k in 0..2 {
            for i in 0..n {
                shift[k][i] = mu[k][i] + self.neumann[k][i] / w[i];
            }
        }

        let (tau, sig) = self.step_sizes(config);

        let mut eta: [Vec<f64>; 2] = match warm {
            Some(start) => [start[0].0.clone(), start[1].0.clone()],
            None => [self.lifted[0].0.clone(), self.lifted[1].0.clone()],
        };
        for k in 0..2 {
            for i in 0..n {
                if !self.free[k][i] {
                    eta[k][i] = self.lifted[k][i];
                }
            }
        }
        let mut eta_bar = [eta[0].clone(), eta[1].clone()];
        let mut eta_old = [eta[0].clone(), eta[1].clone()];
        let mut p: [Vec<[f64; 2]>; 2] = [vec![[0.0, 0.0]; ne], vec![[0.0, 0.0]; ne]];
        let mut grad_buf = vec![[0.0, 0.0]; ne];
        let mut kstar = vec![0.0; n];
        for k in 0..2 {
            self.mesh.gradient_into(&eta[k], &mut grad_buf);
            for e in 0..ne {
                p[k][e] = [
                    self.sigma_elem[k][e] * grad_buf[e][0] + chi[k][e][0],
                    self.sigma_elem[k][e] * grad_buf[e][1] + chi[k][e][1],
                ];
            }
        }

        let mut best_gap = f64::INFINITY;
        let mut best_rel = f64::INFINITY;
        let mut best_dual = f64::NEG_INFINITY;
        let mut best_eta: [Vec<f64>; 2] = [eta[0].clone(), eta[1].clone()];
        let mut trace = Vec::new();
        let mut iterations = 0;
        let mut converged = false;

        let certify = |eta_now: &[Vec<f64>; 2],
                           it: usize,
                           best_gap: &mut f64,
                           best_rel: &mut f64,
                           best_dual: &mut f64,
                           best_eta: &mut [Vec<f64>; 2],
                           trace: &mut Vec<(usize, f64)>|
         -> bool {
            let fields = [ScalarField(eta_now[0].clone()), ScalarField(eta_now[1].clone())];
            let rho = self.recover_density(&fields, mu, chi);
            let flux = [self.mesh.gradient(&fields[0]), self.mesh.gradient(&fields[1])];
            let (gap, dual) = self.duality_gap(
                &rho,
                &flux,
                &fields,
                mu,
                chi,
                config.feasibility_tolerance,
            );
            let rel = if gap.is_finite() { gap.max(0.0) / (1.0 + dual.abs()) } else { f64::INFINITY };
            if rel < *best_rel {
                *best_rel = rel;
                *best_gap = gap;
                *best_dual = dual;
                best_eta[0].clone_from(&eta_now[0]);
                best_eta[1].clone_from(&eta_now[1]);
            }
            trace.push((it, *best_rel));
            *best_rel <= config.gap_tolerance
        };

        // a warm start can carry components in flat directions of the dual
        // (vacuum regions), where the splitting rotates instead of
        // contracting; fall back to the cold start once if it stalls
        let mut restarted = warm.is_none();
        let restart_after = 5000.min(config.max_iterations / 4).max(1);

        if certify(&eta, 0, &mut best_gap, &mut best_rel, &mut best_dual, &mut best_eta, &mut trace)
        {
            converged = true;
        } else {
            for it in 1..=config.max_iterations {
                iterations = it;
                if !restarted && it >= restart_after && best_rel > config.gap_tolerance.sqrt() {
                    restarted = true;
                    for k in 0..2 {
                        for i in 0..n {
                            eta[k][i] = self.lifted[k][i];
                        }
                        self.mesh.gradient_into(&eta[k], &mut grad_buf);
                        for e in 0..ne {
                            p[k][e] = [
                                self.sigma_elem[k][e] * grad_buf[e][0] + chi[k][e][0],
                                self.sigma_elem[k][e] * grad_buf[e][1] + chi[k][e][1],
                            ];
                        }
                        eta_bar[k].clone_from(&eta[k]);
                        eta_old[k].clone_from(&eta[k]);
                    }
                }
                // dual ascent on the element variables
                for k in 0..2 {
                    self.mesh.gradient_into(&eta_bar[k], &mut grad_buf);
                    for e in 0..ne {
                        let se = self.sigma_elem[k][e];
                        let q = [
                            p[k][e][0] + sig * grad_buf[e][0],
                            p[k][e][1] + sig * grad_buf[e][1],
                        ];
                        let denom = se + sig;
                        p[k][e] = [
                            (se * q[0] + sig * chi[k][e][0]) / denom,
                            (se * q[1] + sig * chi[k][e][1]) / denom,
                        ];
                    }
                }
                // primal descent on the nodal potentials
                for k in 0..2 {
                    std::mem::swap(&mut eta_old[k], &mut eta[k]);
                }
                for k in 0..2 {
                    self.mesh.divergence_adjoint_into(&p[k], &mut kstar);
                    for i in 0..n {
                        if self.free[k][i] {
                            eta[k][i] = eta_old[k][i] - tau * kstar[i] / w[i]
                                + tau * shift[k][i];
                        } else {
                            eta[k][i] = self.lifted[k][i];
                        }
                    }
                }
                for i in 0..n {
                    let law = self.law.at(i);
                    match (self.free[0][i], self.free[1][i]) {
                        (true, true) => {
                            let a = law.prox_coupled(tau, [eta[0][i], eta[1][i]]);
                            eta[0][i] = a[0];
                            eta[1][i] = a[1];
                        }
                        (true, false) => {
                            eta[0][i] = law.prox_coupled_pinned(tau, eta[1][i], eta[0][i]);
                        }
                        (false, true) => {
                            eta[1][i] = law.prox_coupled_pinned(tau, eta[0][i], eta[1][i]);
                        }
                        (false, false) => {}
                    }
                }
                for k in 0..2 {
                    for i in 0..n {
                        eta_bar[k][i] = eta[k][i] + theta * (eta[k][i] - eta_old[k][i]);
                    }
                }

                if it % config.check_interval == 0
                    && certify(
                        &eta,
                        it,
                        &mut best_gap,
                        &mut best_rel,
                        &mut best_dual,
                        &mut best_eta,
                        &mut trace,
                    )
                {
                    converged = true;
                    break;
                }
            }
        }

        if best_rel.is_infinite() {
            // no finite certificate was produced; report the last iterate
            best_eta[0].clone_from(&eta[0]);
            best_eta[1].clone_from(&eta[1]);
        }
        let eta_fields = [ScalarField(best_eta[0].clone()), ScalarField(best_eta[1].clone())];
        let rho = self.recover_density(&eta_fields, mu, chi);
        let flux = [self.mesh.gradient(&eta_fields[0]), self.mesh.gradient(&eta_fields[1])];
        let kkt = self.kkt_residuals(&rho, &eta_fields);
        let eta_max = ScalarField(
            (0..n).map(|i| eta_fields[0][i].max(eta_fields[1][i])).collect(),
        );
        StepSolution {
            eta: eta_fields,
            eta_max,
            rho,
            flux,
            gap: best_gap,
            rel_gap: best_rel,
            dual_value: best_dual,
            kkt,
            iterations,
            converged,
            gap_trace: trace,
        }
    }

    fn step_sizes(&self, config: &SolverConfig) -> (f64, f64) {
        match config.step_sizes {
            Some((mut tau, mut sig)) => {
                let product_limit = 1.0 / (self.opnorm * self.opnorm);
                let product = tau * sig;
                if product > product_limit {
                    let scale = (product_limit / product).sqrt();
                    tau *= scale;
                    sig *= scale;
                }
                (tau, sig)
            }
            None => {
                // equilibrate the primal/dual steps against the weight
                // scale: the dual conjugate's curvature grows like
                // 1/sigma, so the primal potential can take steps larger
                // by that factor while keeping the stable product
                let s = 0.95f64.sqrt() / self.opnorm;
                let sigma_max = self
                    .sigma_elem
                    .iter()
                    .flat_map(|v| v.iter())
                    .fold(0.0f64, |a, &b| a.max(b));
                let ratio = (1.0 / sigma_max).clamp(1e-6, 1e6);
                (s * ratio.sqrt(), s / ratio.sqrt())
            }
        }
    }
}

/// Solve one resolvent problem from scratch.
pub fn solve_step(problem: &StepProblem, config: &SolverConfig) -> Result<StepSolution, Error> {
    let engine = StepEngine::new(problem, config.power_iterations)?;
    Ok(engine.solve(&problem.mu, &problem.chi, config, None))
}

/// Pointwise state-relation residuals of a density/potential pair: the
/// negative part of the densities, the Fenchel defect of (total density,
/// max potential), and the complementarity products rho_k (eta~ - eta_k).
pub fn kkt_residuals(
    mesh: &Mesh,
    law: &EnergyLaw,
    rho: &[ScalarField; 2],
    eta: &[ScalarField; 2],
) -> KktResiduals {
    let n = mesh.n_nodes();
    let mut out = KktResiduals::default();
    for i in 0..n {
        let p = law.at(i);
        let r = [rho[0][i], rho[1][i]];
        let emax = eta[0][i].max(eta[1][i]);
        for k in 0..2 {
            out.negativity = out.negativity.max(-r[k]);
            out.complementarity[k] = out.complementarity[k].max(r[k] * (emax - eta[k][i]));
        }
        // the Fenchel defect is measured at the nearest feasible pair; the
        // projection distance itself is visible through the negativity and
        // the solver's feasibility gate
        let proj = p.project_pair(r);
        let total = proj[0] + proj[1];
        let b = p.beta(total);
        let bs = p.conjugate(emax).unwrap_or(f64::INFINITY);
        let defect = if b.is_finite() && bs.is_finite() {
            (b + bs - emax * total).max(0.0)
        } else {
            f64::INFINITY
        };
        out.fenchel = out.fenchel.max(defect);
    }
    out.max_violation = out
        .negativity
        .max(out.fenchel)
        .max(out.complementarity[0])
        .max(out.complementarity[1]);
    out
}

fn elementwise(mesh: &Mesh, sigma: &ScalarField) -> Vec<f64> {
    (0..mesh.n_elems())
        .map(|e| {
            let verts = mesh.elem(e);
            verts.iter().map(|&v| sigma[v]).sum::<f64>() / verts.len() as f64
        })
        .collect()
}

/// Largest eigenvalue estimate of the reduced weighted gradient operator,
/// by power iteration over both species' free node sets.
fn estimate_opnorm(
    mesh: &Mesh,
    free: &[Vec<bool>; 2],
    weights: &[f64],
    iterations: usize,
) -> Result<f64, Error> {
    let ones = ScalarField::constant(mesh.n_nodes(), 1.0);
    let a1 = mesh.assemble_stiffness(&ones)?;
    let n = mesh.n_nodes();
    let mut worst: f64 = 0.0;
    for mask in free {
        let mut v: Vec<f64> = (0..n)
            .map(|i| if mask[i] { ((i * 2654435761 + 1) % 1000) as f64 / 1000.0 + 0.1 } else { 0.0 })
            .collect();
        let mut lambda = 0.0;
        let mut av = vec![0.0; n];
        for _ in 0..iterations.max(1) {
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            for x in v.iter_mut() {
                *x /= norm;
            }
            a1.apply(&v, &mut av);
            for i in 0..n {
                av[i] = if mask[i] { av[i] / weights[i] } else { 0.0 };
            }
            lambda = v.iter().zip(&av).map(|(a, b)| a * b).sum();
            std::mem::swap(&mut v, &mut av);
        }
        worst = worst.max(lambda);
    }
    if worst <= 0.0 {
        return Err(Error::Solver("operator-norm estimate failed".into()));
    }
    Ok((worst * 1.02).sqrt())
}
