//! Weighted mixed-boundary Poisson solves, the minimal-flow transition work,
//! and the dual Sobolev norms and inner products built on them.
//!
//! All solves share one factorized reduced stiffness per (mesh, sigma,
//! partition); handles are immutable after construction and may be reused
//! across time steps. Zero-order loads use the lumped nodal quadrature,
//! quadratic forms are integrated exactly on elements, and the Neumann
//! pairing is facet-lumped with one flux value per facet.

use crate::error::Error;
use crate::grid::{BoundaryPartition, Mesh, ScalarField, VectorField};
use crate::grid::ReducedStiffness;

/// Factorized solver for one species' weighted mixed-boundary problems.
pub struct EllipticSolver<'a> {
    mesh: &'a Mesh,
    partition: &'a BoundaryPartition,
    species: usize,
    sigma: ScalarField,
    reduced: ReducedStiffness,
}

impl<'a> EllipticSolver<'a> {
    pub fn new(
        mesh: &'a Mesh,
        partition: &'a BoundaryPartition,
        species: usize,
        sigma: &ScalarField,
    ) -> Result<Self, Error> {
        let reduced = ReducedStiffness::build(mesh, partition, species, sigma)?;
        Ok(EllipticSolver { mesh, partition, species, sigma: sigma.clone(), reduced })
    }

    pub fn mesh(&self) -> &Mesh {
        self.mesh
    }

    pub fn sigma(&self) -> &ScalarField {
        &self.sigma
    }

    /// Solve the discrete weak problem
    ///   int sigma grad z . grad xi = int mu xi - int chi . grad xi
    ///                                + <pi, xi>_Neumann
    /// over test functions xi vanishing on the species' Dirichlet nodes,
    /// with z equal to g there.
    pub fn solve_mixed_poisson(
        &self,
        mu: &ScalarField,
        chi: &VectorField,
        pi: &[f64],
        g: &ScalarField,
    ) -> ScalarField {
        let n = self.mesh.n_nodes();
        let w = self.mesh.lumped_weights();
        let mut load = vec![0.0; n];
        for i in 0..n {
            load[i] = w[i] * mu[i];
        }
        let chi_load = self.mesh.divergence_adjoint(chi);
        for i in 0..n {
            load[i] -= chi_load[i];
        }
        let neumann = self.partition.neumann_load(self.mesh, self.species, pi);
        for i in 0..n {
            load[i] += neumann[i];
        }
        let mut z = vec![0.0; n];
        for i in 0..n {
            if self.partition.is_dirichlet_node(self.species, i) {
                z[i] = g[i];
            }
        }
        self.reduced.solve_with_dirichlet(&load, &mut z);
        ScalarField(z)
    }

    /// Value of the dual flow objective at a potential z:
    ///   int mu z - int chi . grad z - 1/2 int sigma |grad z|^2 + <pi, z>_N.
    pub fn dual_objective(
        &self,
        mu: &ScalarField,
        chi: &VectorField,
        pi: &[f64],
        z: &ScalarField,
    ) -> f64 {
        let w = self.mesh.lumped_weights();
        let mut value = 0.0;
        for i in 0..self.mesh.n_nodes() {
            value += w[i] * mu[i] * z[i];
        }
        let gz = self.mesh.gradient(z);
        for e in 0..self.mesh.n_elems() {
            let m = self.mesh.elem_measure(e);
            let verts = self.mesh.elem(e);
            let sig: f64 = verts.iter().map(|&v| self.sigma[v]).sum::<f64>()
                / verts.len() as f64;
            let g2 = gz[e][0] * gz[e][0] + gz[e][1] * gz[e][1];
            let cg = chi[e][0] * gz[e][0] + chi[e][1] * gz[e][1];
            value -= m * (cg + 0.5 * sig * g2);
        }
        let neumann = self.partition.neumann_load(self.mesh, self.species, pi);
        for i in 0..self.mesh.n_nodes() {
            value += neumann[i] * z[i];
        }
        value
    }

    /// Minimal-flow transition work of the mass distribution mu under drift
    /// chi and boundary actions (pi, g): the maximum of the dual objective,
    /// attained by the mixed Poisson solution.
    pub fn transition_work(
        &self,
        mu: &ScalarField,
        chi: &VectorField,
        pi: &[f64],
        g: &ScalarField,
    ) -> f64 {
        let z = self.solve_mixed_poisson(mu, chi, pi, g);
        self.dual_objective(mu, chi, pi, &z)
    }

    /// Flow potential of a source couple (f0, fbar) with homogeneous
    /// boundary data; the gradient of the result is the optimal flow.
    pub fn flow_potential(&self, f0: &ScalarField, fbar: &VectorField) -> ScalarField {
        let zero_pi = vec![0.0; self.mesh.facets().len()];
        let zero_g = ScalarField::zeros(self.mesh.n_nodes());
        self.solve_mixed_poisson(f0, fbar, &zero_pi, &zero_g)
    }

    /// Weighted inner product of two source couples through their flow
    /// potentials: int sigma grad(z_f) . grad(z_g).
    pub fn dual_inner(
        &self,
        f: (&ScalarField, &VectorField),
        g: (&ScalarField, &VectorField),
    ) -> f64 {
        let zf = self.flow_potential(f.0, f.1);
        let zg = self.flow_potential(g.0, g.1);
        self.weighted_gradient_inner(&zf, &zg)
    }

    /// Dual norm of a source couple.
    pub fn dual_norm(&self, f0: &ScalarField, fbar: &VectorField) -> f64 {
        let z = self.flow_potential(f0, fbar);
        self.weighted_gradient_inner(&z, &z).max(0.0).sqrt()
    }

    /// int sigma grad(u) . grad(v) for nodal fields u, v.
    pub fn weighted_gradient_inner(&self, u: &ScalarField, v: &ScalarField) -> f64 {
        let gu = self.mesh.gradient(u);
        let gv = self.mesh.gradient(v);
        let mut acc = 0.0;
        for e in 0..self.mesh.n_elems() {
            let verts = self.mesh.elem(e);
            let sig: f64 = verts.iter().map(|&v| self.sigma[v]).sum::<f64>()
                / verts.len() as f64;
            acc += self.mesh.elem_measure(e)
                * sig
                * (gu[e][0] * gv[e][0] + gu[e][1] * gv[e][1]);
        }
        acc
    }
}

/// Per-species solver pair plus the product-space metric they induce.
pub struct ProductMetric<'a> {
    pub solvers: [EllipticSolver<'a>; 2],
}

impl<'a> ProductMetric<'a> {
    pub fn new(
        mesh: &'a Mesh,
        partition: &'a BoundaryPartition,
        sigma: &[ScalarField; 2],
    ) -> Result<Self, Error> {
        Ok(ProductMetric {
            solvers: [
                EllipticSolver::new(mesh, partition, 0, &sigma[0])?,
                EllipticSolver::new(mesh, partition, 1, &sigma[1])?,
            ],
        })
    }

    /// Product dual norm of a density pair seen as a source (f0 = rho,
    /// fbar = 0 for each species).
    pub fn pair_norm(&self, rho: &[ScalarField; 2]) -> f64 {
        let mut acc = 0.0;
        for k in 0..2 {
            let fbar = VectorField::zeros(self.solvers[k].mesh().n_elems());
            let n = self.solvers[k].dual_norm(&rho[k], &fbar);
            acc += n * n;
        }
        acc.sqrt()
    }

    /// Product distance between two density pairs.
    pub fn pair_distance(&self, a: &[ScalarField; 2], b: &[ScalarField; 2]) -> f64 {
        let diff = [
            ScalarField(a[0].0.iter().zip(&b[0].0).map(|(x, y)| x - y).collect()),
            ScalarField(a[1].0.iter().zip(&b[1].0).map(|(x, y)| x - y).collect()),
        ];
        self.pair_norm(&diff)
    }

    /// Product inner product of two density-pair sources.
    pub fn pair_inner(&self, a: &[ScalarField; 2], b: &[ScalarField; 2]) -> f64 {
        let mut acc = 0.0;
        for k in 0..2 {
            let fbar = VectorField::zeros(self.solvers[k].mesh().n_elems());
            acc += self.solvers[k].dual_inner((&a[k], &fbar), (&b[k], &fbar));
        }
        acc
    }
}
