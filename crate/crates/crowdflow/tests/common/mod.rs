//! Shared test oracles: dense linear algebra and a projected-gradient
//! minimizer of the reduced primal problem, independent of the splitting
//! solver under test.

#![allow(dead_code)]

use crowdflow::energy::{EnergyLaw, LawFamily};
use crowdflow::grid::{BoundaryData, BoundaryPartition, Mesh, ScalarField, Side, VectorField};
use crowdflow::step::{solve_step, SolverConfig, StepProblem};
use rand_chacha::ChaCha8Rng;
use rand::Rng;

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let d = a[col][col];
        assert!(d.abs() > 1e-14, "singular oracle system");
        for row in col + 1..n {
            let f = a[row][col] / d;
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Flow-work evaluator for one species: the dual maximum over potentials
/// pinned to the Dirichlet charge, computed densely.
pub struct FlowOracle {
    weights: Vec<f64>,
    stiff_dense: Vec<Vec<f64>>,
    free: Vec<usize>,
    dirichlet_values: Vec<f64>,
    chi_load: Vec<f64>,
    neumann: Vec<f64>,
    chi: VectorField,
    sigma_elem: Vec<f64>,
    mesh_measures: Vec<f64>,
}

impl FlowOracle {
    pub fn new(
        mesh: &Mesh,
        partition: &BoundaryPartition,
        species: usize,
        sigma: &ScalarField,
        chi: &VectorField,
        pi: &[f64],
        g: &ScalarField,
    ) -> Self {
        let n = mesh.n_nodes();
        let a = mesh.assemble_stiffness(sigma).unwrap();
        let mut stiff_dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                stiff_dense[i][j] += v;
            }
        }
        let free: Vec<usize> =
            (0..n).filter(|&i| !partition.is_dirichlet_node(species, i)).collect();
        let dirichlet_values =
            (0..n).map(|i| if partition.is_dirichlet_node(species, i) { g[i] } else { 0.0 }).collect();
        let chi_load = mesh.divergence_adjoint(chi).0;
        let neumann = partition.neumann_load(mesh, species, pi).0;
        let sigma_elem = (0..mesh.n_elems())
            .map(|e| {
                let verts = mesh.elem(e);
                verts.iter().map(|&v| sigma[v]).sum::<f64>() / verts.len() as f64
            })
            .collect();
        FlowOracle {
            weights: mesh.lumped_weights().to_vec(),
            stiff_dense,
            free,
            dirichlet_values,
            chi_load,
            neumann,
            chi: chi.clone(),
            sigma_elem,
            mesh_measures: (0..mesh.n_elems()).map(|e| mesh.elem_measure(e)).collect(),
        }
    }

    /// Optimal potential for the mass distribution m.
    pub fn potential(&self, m: &[f64]) -> Vec<f64> {
        let n = self.weights.len();
        let mut z: Vec<f64> = self.dirichlet_values.clone();
        let nf = self.free.len();
        let mut a = vec![vec![0.0; nf]; nf];
        let mut rhs = vec![0.0; nf];
        for (r, &i) in self.free.iter().enumerate() {
            rhs[r] = self.weights[i] * m[i] - self.chi_load[i] + self.neumann[i];
            for c in 0..n {
                if let Some(cc) = self.free.iter().position(|&j| j == c) {
                    a[r][cc] = self.stiff_dense[i][c];
                } else {
                    rhs[r] -= self.stiff_dense[i][c] * z[c];
                }
            }
        }
        let sol = dense_solve(a, rhs);
        for (r, &i) in self.free.iter().enumerate() {
            z[i] = sol[r];
        }
        z
    }

    /// Flow work and its gradient contribution (the optimal potential).
    pub fn value_and_potential(&self, mesh: &Mesh, m: &[f64]) -> (f64, Vec<f64>) {
        let z = self.potential(m);
        let mut value = 0.0;
        for i in 0..self.weights.len() {
            value += (self.weights[i] * m[i] + self.neumann[i]) * z[i];
        }
        let gz = mesh.gradient(&ScalarField(z.clone()));
        for e in 0..gz.len() {
            let g2 = gz[e][0] * gz[e][0] + gz[e][1] * gz[e][1];
            let cg = self.chi[e][0] * gz[e][0] + self.chi[e][1] * gz[e][1];
            value -= self.mesh_measures[e] * (cg + 0.5 * self.sigma_elem[e] * g2);
        }
        (value, z)
    }
}

/// Projection of one node's density pair onto the feasible set of the law.
pub fn project_node(law: &EnergyLaw, i: usize, r: [f64; 2]) -> [f64; 2] {
    let mut p = [r[0].max(0.0), r[1].max(0.0)];
    if let LawFamily::CrowdMotion { capacity } = law.family() {
        let cap = *capacity;
        if p[0] + p[1] > cap {
            let t = (p[0] + p[1] - cap) / 2.0;
            p = [p[0] - t, p[1] - t];
            if p[0] < 0.0 {
                p = [0.0, cap.min(p[1] - p[0])];
            } else if p[1] < 0.0 {
                p = [cap.min(p[0] - p[1]), 0.0];
            }
        }
    }
    let _ = i;
    p
}

pub struct PrimalOracle<'a> {
    mesh: &'a Mesh,
    law: &'a EnergyLaw,
    flows: [FlowOracle; 2],
    mu: [Vec<f64>; 2],
}

impl<'a> PrimalOracle<'a> {
    pub fn objective_and_grad(&self, rho: &[Vec<f64>; 2]) -> (f64, [Vec<f64>; 2]) {
        let n = self.mesh.n_nodes();
        let w = self.mesh.lumped_weights();
        let mut value = 0.0;
        let mut grad = [vec![0.0; n], vec![0.0; n]];
        for i in 0..n {
            let total = rho[0][i] + rho[1][i];
            let p = self.law.at(i);
            value += w[i] * p.beta(total);
            let slope = match self.law.family() {
                LawFamily::CrowdMotion { .. } => 0.0,
                _ => p.subdiff(total.max(0.0)).map(|iv| iv.hi.max(0.0)).unwrap_or(0.0),
            };
            grad[0][i] += w[i] * slope;
            grad[1][i] += w[i] * slope;
        }
        for k in 0..2 {
            let m: Vec<f64> = (0..n).map(|i| self.mu[k][i] - rho[k][i]).collect();
            let (v, z) = self.flows[k].value_and_potential(self.mesh, &m);
            value += v;
            for i in 0..n {
                grad[k][i] -= w[i] * z[i];
            }
        }
        (value, grad)
    }

    /// Projected gradient descent with adaptive step, run to stagnation.
    pub fn minimize(&self) -> ([Vec<f64>; 2], f64) {
        let n = self.mesh.n_nodes();
        let mut rho = [vec![0.0; n], vec![0.0; n]];
        for k in 0..2 {
            for i in 0..n {
                rho[k][i] = project_node(self.law, i, [self.mu[k][i].max(0.0), 0.0])[0];
            }
        }
        let (mut value, mut grad) = self.objective_and_grad(&rho);
        let mut step = 1.0;
        for _ in 0..200_000 {
            let mut cand = [vec![0.0; n], vec![0.0; n]];
            loop {
                for i in 0..n {
                    let moved = [
                        rho[0][i] - step * grad[0][i],
                        rho[1][i] - step * grad[1][i],
                    ];
                    let p = project_node(self.law, i, moved);
                    cand[0][i] = p[0];
                    cand[1][i] = p[1];
                }
                let (v_new, g_new) = self.objective_and_grad(&cand);
                if v_new <= value + 1e-18 {
                    let displacement: f64 = (0..n)
                        .map(|i| {
                            (cand[0][i] - rho[0][i]).abs() + (cand[1][i] - rho[1][i]).abs()
                        })
                        .sum();
                    rho = cand.clone();
                    value = v_new;
                    grad = g_new;
                    step *= 1.2;
                    if displacement < 1e-14 && step < 1e-6 {
                        return (rho, value);
                    }
                    break;
                }
                step *= 0.5;
                if step < 1e-18 {
                    return (rho, value);
                }
            }
        }
        (rho, value)
    }
}

pub struct Case {
    pub mesh: Mesh,
    pub partition: BoundaryPartition,
    pub law: EnergyLaw,
    pub sigma: [ScalarField; 2],
    pub mu: [ScalarField; 2],
    pub chi: [VectorField; 2],
    pub boundary: BoundaryData,
}

impl Case {
    pub fn random(mesh: Mesh, law: EnergyLaw, sigma_scale: f64, rng: &mut ChaCha8Rng) -> Case {
        let partition =
            BoundaryPartition::from_sides(&mesh, [&[Side::Left], &[Side::Right]]).unwrap();
        let n = mesh.n_nodes();
        let ne = mesh.n_elems();
        let sigma = [
            ScalarField::constant(n, sigma_scale),
            ScalarField::constant(n, 1.5 * sigma_scale),
        ];
        let mu = [
            ScalarField((0..n).map(|_| rng.gen_range(-0.2..1.2)).collect()),
            ScalarField((0..n).map(|_| rng.gen_range(-0.2..1.2)).collect()),
        ];
        let chi = [
            VectorField((0..ne).map(|_| [rng.gen_range(-0.3..0.3), 0.0]).collect()),
            VectorField((0..ne).map(|_| [rng.gen_range(-0.3..0.3), 0.0]).collect()),
        ];
        let mut boundary = BoundaryData::zeros(&mesh);
        for k in 0..2 {
            for i in 0..n {
                if partition.is_dirichlet_node(k, i) {
                    boundary.g[k][i] = rng.gen_range(0.0..0.5);
                }
            }
            for &fi in partition.neumann_facets(k) {
                boundary.pi[k][fi] = rng.gen_range(-0.3..0.3);
            }
        }
        Case { mesh, partition, law, sigma, mu, chi, boundary }
    }

    pub fn problem(&self) -> StepProblem<'_> {
        StepProblem {
            mesh: &self.mesh,
            partition: &self.partition,
            law: &self.law,
            sigma: [self.sigma[0].clone(), self.sigma[1].clone()],
            mu: [self.mu[0].clone(), self.mu[1].clone()],
            chi: [self.chi[0].clone(), self.chi[1].clone()],
            boundary: BoundaryData {
                g: [self.boundary.g[0].clone(), self.boundary.g[1].clone()],
                pi: [self.boundary.pi[0].clone(), self.boundary.pi[1].clone()],
            },
        }
    }

    pub fn oracle(&self) -> PrimalOracle<'_> {
        let flows = [
            FlowOracle::new(
                &self.mesh,
                &self.partition,
                0,
                &self.sigma[0],
                &self.chi[0],
                &self.boundary.pi[0],
                &self.boundary.g[0],
            ),
            FlowOracle::new(
                &self.mesh,
                &self.partition,
                1,
                &self.sigma[1],
                &self.chi[1],
                &self.boundary.pi[1],
                &self.boundary.g[1],
            ),
        ];
        PrimalOracle {
            mesh: &self.mesh,
            law: &self.law,
            flows,
            mu: [self.mu[0].0.clone(), self.mu[1].0.clone()],
        }
    }

    pub fn compare_with_oracle(&self, rho_tol: f64, value_tol: f64) {
        let config = SolverConfig::with_gap_tolerance(1e-10);
        let solution = solve_step(&self.problem(), &config).unwrap();
        assert!(solution.converged, "solver gap stalled at {}", solution.rel_gap);
        let (rho_star, n_star) = self.oracle().minimize();
        // dual value meets the primal minimum
        assert!(
            (solution.dual_value - n_star).abs() <= value_tol * (1.0 + n_star.abs()),
            "dual {} vs oracle {}",
            solution.dual_value,
            n_star
        );
        for k in 0..2 {
            for i in 0..self.mesh.n_nodes() {
                if !self.partition.is_dirichlet_node(k, i) {
                    let diff = (solution.rho[k][i] - rho_star[k][i]).abs();
                    assert!(
                        diff <= rho_tol,
                        "species {k} node {i}: solver {} oracle {}",
                        solution.rho[k][i],
                        rho_star[k][i]
                    );
                }
            }
        }
    }
}

