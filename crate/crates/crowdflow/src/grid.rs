//! Interval and rectangle discretizations with per-species boundary
//! partitions, plus the discrete gradient/divergence/mass/stiffness
//! operators and Dirichlet-data lifting.
//!
//! Elements are P1 simplices (segments in 1-D, triangles from split
//! rectangles in 2-D), so nodal fields have element-wise constant gradients
//! and pointwise proximal steps stay pointwise. Dirichlet conditions are
//! enforced by node elimination; boundary data is lifted by a weighted
//! harmonic extension that vanishes on the Neumann part of the boundary.

use crate::error::Error;
use crate::linalg::{CholeskyBanded, SparseSym};

/// Boundary side names used by mesh constructors and configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// One boundary facet: a vertex in 1-D, an edge in 2-D.
#[derive(Debug, Clone)]
pub struct Facet {
    pub nodes: Vec<usize>,
    pub measure: f64,
    pub normal: [f64; 2],
    pub side: Side,
}

/// Conforming simplicial mesh of an interval or an axis-aligned rectangle.
#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    nodes: Vec<[f64; 2]>,
    /// per element: vertex ids (dim + 1 of them)
    elems: Vec<Vec<usize>>,
    measures: Vec<f64>,
    /// per element, per vertex: gradient of the matching P1 basis function
    grads: Vec<Vec<[f64; 2]>>,
    facets: Vec<Facet>,
    /// lumped quadrature weights (integral of each nodal basis function)
    weights: Vec<f64>,
}

impl Mesh {
    /// Uniform mesh of the interval (a, b) with `n_cells` segments.
    pub fn interval(a: f64, b: f64, n_cells: usize) -> Result<Self, Error> {
        if !(b > a) {
            return Err(Error::Grid(format!("degenerate interval bounds ({a}, {b})")));
        }
        if n_cells < 2 {
            return Err(Error::Grid(format!("need at least 2 cells, got {n_cells}")));
        }
        let h = (b - a) / n_cells as f64;
        let nodes: Vec<[f64; 2]> = (0..=n_cells).map(|i| [a + i as f64 * h, 0.0]).collect();
        let mut elems = Vec::with_capacity(n_cells);
        let mut measures = Vec::with_capacity(n_cells);
        let mut grads = Vec::with_capacity(n_cells);
        for i in 0..n_cells {
            let len = nodes[i + 1][0] - nodes[i][0];
            elems.push(vec![i, i + 1]);
            measures.push(len);
            grads.push(vec![[-1.0 / len, 0.0], [1.0 / len, 0.0]]);
        }
        let facets = vec![
            Facet { nodes: vec![0], measure: 1.0, normal: [-1.0, 0.0], side: Side::Left },
            Facet { nodes: vec![n_cells], measure: 1.0, normal: [1.0, 0.0], side: Side::Right },
        ];
        let mut mesh =
            Mesh { dim: 1, nodes, elems, measures, grads, facets, weights: Vec::new() };
        mesh.weights = mesh.compute_weights();
        Ok(mesh)
    }

    /// Uniform triangulation of the rectangle bounds.0 x bounds.1, each cell
    /// split into two triangles.
    pub fn rectangle(
        bounds: ((f64, f64), (f64, f64)),
        nx: usize,
        ny: usize,
    ) -> Result<Self, Error> {
        let ((x0, x1), (y0, y1)) = bounds;
        if !(x1 > x0) || !(y1 > y0) {
            return Err(Error::Grid("degenerate rectangle bounds".into()));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::Grid(format!("need at least 2x2 cells, got {nx}x{ny}")));
        }
        let hx = (x1 - x0) / nx as f64;
        let hy = (y1 - y0) / ny as f64;
        let node_id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([x0 + i as f64 * hx, y0 + j as f64 * hy]);
            }
        }
        let mut elems = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let a = node_id(i, j);
                let b = node_id(i + 1, j);
                let c = node_id(i + 1, j + 1);
                let d = node_id(i, j + 1);
                elems.push(vec![a, b, c]);
                elems.push(vec![a, c, d]);
            }
        }
        let mut measures = Vec::with_capacity(elems.len());
        let mut grads = Vec::with_capacity(elems.len());
        for e in &elems {
            let p: Vec<[f64; 2]> = e.iter().map(|&v| nodes[v]).collect();
            let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            let area = det.abs() / 2.0;
            measures.push(area);
            let mut g = Vec::with_capacity(3);
            for k in 0..3 {
                let (pj, pk) = (p[(k + 1) % 3], p[(k + 2) % 3]);
                g.push([(pj[1] - pk[1]) / det, (pk[0] - pj[0]) / det]);
            }
            grads.push(g);
        }
        let mut facets = Vec::new();
        for i in 0..nx {
            facets.push(Facet {
                nodes: vec![node_id(i, 0), node_id(i + 1, 0)],
                measure: hx,
                normal: [0.0, -1.0],
                side: Side::Bottom,
            });
            facets.push(Facet {
                nodes: vec![node_id(i, ny), node_id(i + 1, ny)],
                measure: hx,
                normal: [0.0, 1.0],
                side: Side::Top,
            });
        }
        for j in 0..ny {
            facets.push(Facet {
                nodes: vec![node_id(0, j), node_id(0, j + 1)],
                measure: hy,
                normal: [-1.0, 0.0],
                side: Side::Left,
            });
            facets.push(Facet {
                nodes: vec![node_id(nx, j), node_id(nx, j + 1)],
                measure: hy,
                normal: [1.0, 0.0],
                side: Side::Right,
            });
        }
        let mut mesh =
            Mesh { dim: 2, nodes, elems, measures, grads, facets, weights: Vec::new() };
        mesh.weights = mesh.compute_weights();
        Ok(mesh)
    }

    fn compute_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.nodes.len()];
        let share = 1.0 / (self.dim as f64 + 1.0);
        for (e, verts) in self.elems.iter().enumerate() {
            for &v in verts {
                w[v] += self.measures[e] * share;
            }
        }
        w
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elems(&self) -> usize {
        self.elems.len()
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn elem(&self, e: usize) -> &[usize] {
        &self.elems[e]
    }

    pub fn elem_measure(&self, e: usize) -> f64 {
        self.measures[e]
    }

    pub fn elem_centroid(&self, e: usize) -> [f64; 2] {
        let verts = &self.elems[e];
        let mut c = [0.0, 0.0];
        for &v in verts {
            c[0] += self.nodes[v][0];
            c[1] += self.nodes[v][1];
        }
        let n = verts.len() as f64;
        [c[0] / n, c[1] / n]
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    /// Lumped quadrature weights: w_i is the integral of basis function i.
    pub fn lumped_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_measure(&self) -> f64 {
        self.measures.iter().sum()
    }

    /// Node ids lying on the boundary.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut seen = vec![false; self.nodes.len()];
        for f in &self.facets {
            for &v in &f.nodes {
                seen[v] = true;
            }
        }
        (0..self.nodes.len()).filter(|&i| seen[i]).collect()
    }

    /// Element-wise P1 gradient of a nodal field.
    pub fn gradient(&self, u: &ScalarField) -> VectorField {
        assert_eq!(u.len(), self.n_nodes(), "field size mismatch");
        let mut out = vec![[0.0, 0.0]; self.n_elems()];
        self.gradient_into(&u.0, &mut out);
        VectorField(out)
    }

    /// Allocation-free gradient for solver inner loops.
    pub fn gradient_into(&self, u: &[f64], out: &mut [[f64; 2]]) {
        for (e, verts) in self.elems.iter().enumerate() {
            let mut g = [0.0, 0.0];
            for (k, &v) in verts.iter().enumerate() {
                g[0] += u[v] * self.grads[e][k][0];
                g[1] += u[v] * self.grads[e][k][1];
            }
            out[e] = g;
        }
    }

    /// Allocation-free divergence adjoint for solver inner loops.
    pub fn divergence_adjoint_into(&self, v: &[[f64; 2]], out: &mut [f64]) {
        out.fill(0.0);
        for (e, verts) in self.elems.iter().enumerate() {
            let ve = v[e];
            for (k, &vert) in verts.iter().enumerate() {
                out[vert] +=
                    self.measures[e] * (ve[0] * self.grads[e][k][0] + ve[1] * self.grads[e][k][1]);
            }
        }
    }

    /// Exact negative-transpose pairing of the gradient: returns the nodal
    /// load l with l_j = sum_e |e| v_e . grad(phi_j)|_e, so that
    /// <grad u, v>_elements = <u, divergence_adjoint v>_nodes.
    pub fn divergence_adjoint(&self, v: &VectorField) -> ScalarField {
        assert_eq!(v.len(), self.n_elems(), "field size mismatch");
        let mut out = vec![0.0; self.n_nodes()];
        for (e, verts) in self.elems.iter().enumerate() {
            let ve = v[e];
            for (k, &vert) in verts.iter().enumerate() {
                out[vert] +=
                    self.measures[e] * (ve[0] * self.grads[e][k][0] + ve[1] * self.grads[e][k][1]);
            }
        }
        ScalarField(out)
    }

    /// Weighted stiffness operator xi -> int sigma grad(xi) . grad(.) with
    /// nodal sigma interpolated per element.
    pub fn assemble_stiffness(&self, sigma: &ScalarField) -> Result<SparseSym, Error> {
        assert_eq!(sigma.len(), self.n_nodes(), "sigma size mismatch");
        if sigma.0.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Domain("sigma must be positive at every node".into()));
        }
        let mut triplets = Vec::new();
        for (e, verts) in self.elems.iter().enumerate() {
            let sigma_e: f64 =
                verts.iter().map(|&v| sigma[v]).sum::<f64>() / verts.len() as f64;
            let scale = sigma_e * self.measures[e];
            for (a, &va) in verts.iter().enumerate() {
                for (b, &vb) in verts.iter().enumerate() {
                    let g = self.grads[e][a][0] * self.grads[e][b][0]
                        + self.grads[e][a][1] * self.grads[e][b][1];
                    triplets.push((va, vb, scale * g));
                }
            }
        }
        Ok(SparseSym::from_triplets(self.n_nodes(), &triplets))
    }

    /// Consistent P1 mass operator xi -> int xi (.)
    pub fn assemble_mass(&self) -> SparseSym {
        let mut triplets = Vec::new();
        for (e, verts) in self.elems.iter().enumerate() {
            let n = verts.len() as f64;
            let scale = self.measures[e] / (n * (n + 1.0));
            for &va in verts {
                for &vb in verts {
                    let v = if va == vb { 2.0 * scale } else { scale };
                    triplets.push((va, vb, v));
                }
            }
        }
        SparseSym::from_triplets(self.n_nodes(), &triplets)
    }
}

/// Nodal scalar field (density or potential values).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(pub Vec<f64>);

impl ScalarField {
    pub fn zeros(n: usize) -> Self {
        ScalarField(vec![0.0; n])
    }

    pub fn constant(n: usize, v: f64) -> Self {
        ScalarField(vec![v; n])
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        ScalarField(mesh.nodes().iter().map(|&p| f(p)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for ScalarField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for ScalarField {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Element-wise vector field (fluxes, drifts).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField(pub Vec<[f64; 2]>);

impl VectorField {
    pub fn zeros(n: usize) -> Self {
        VectorField(vec![[0.0, 0.0]; n])
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        VectorField((0..mesh.n_elems()).map(|e| f(mesh.elem_centroid(e))).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for VectorField {
    type Output = [f64; 2];
    fn index(&self, i: usize) -> &[f64; 2] {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for VectorField {
    fn index_mut(&mut self, i: usize) -> &mut [f64; 2] {
        &mut self.0[i]
    }
}

/// A source functional represented by the couple (f0, fbar):
/// <f, xi> = int f0 xi - int fbar . grad xi.
#[derive(Debug, Clone)]
pub struct SourceData {
    pub f0: [ScalarField; 2],
    pub fbar: [VectorField; 2],
}

impl SourceData {
    pub fn zeros(mesh: &Mesh) -> Self {
        SourceData {
            f0: [ScalarField::zeros(mesh.n_nodes()), ScalarField::zeros(mesh.n_nodes())],
            fbar: [VectorField::zeros(mesh.n_elems()), VectorField::zeros(mesh.n_elems())],
        }
    }
}

/// Dirichlet charges and Neumann fluxes for both species.
///
/// `g` holds full nodal fields whose extension vanishes away from the
/// Dirichlet nodes; `pi` holds one piecewise-constant value per boundary
/// facet, meaningful on the Neumann facets of each species.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub g: [ScalarField; 2],
    pub pi: [Vec<f64>; 2],
}

impl BoundaryData {
    pub fn zeros(mesh: &Mesh) -> Self {
        BoundaryData {
            g: [ScalarField::zeros(mesh.n_nodes()), ScalarField::zeros(mesh.n_nodes())],
            pi: [vec![0.0; mesh.facets().len()], vec![0.0; mesh.facets().len()]],
        }
    }
}

/// Per-species Dirichlet/Neumann split of the boundary facets.
#[derive(Debug, Clone)]
pub struct BoundaryPartition {
    dirichlet_facets: [Vec<usize>; 2],
    neumann_facets: [Vec<usize>; 2],
    dirichlet_nodes: [Vec<bool>; 2],
}

impl BoundaryPartition {
    /// Build from per-species sets of Dirichlet sides; every other side is
    /// Neumann. Nodes shared by both parts (corners) count as Dirichlet.
    pub fn from_sides(mesh: &Mesh, dirichlet_sides: [&[Side]; 2]) -> Result<Self, Error> {
        let mut dirichlet_facets: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        let mut neumann_facets: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        let mut dirichlet_nodes =
            [vec![false; mesh.n_nodes()], vec![false; mesh.n_nodes()]];
        for k in 0..2 {
            for (fi, f) in mesh.facets().iter().enumerate() {
                if dirichlet_sides[k].contains(&f.side) {
                    dirichlet_facets[k].push(fi);
                    for &v in &f.nodes {
                        dirichlet_nodes[k][v] = true;
                    }
                } else {
                    neumann_facets[k].push(fi);
                }
            }
            if dirichlet_facets[k].is_empty() {
                return Err(Error::Grid(format!(
                    "species {} has an empty Dirichlet part",
                    k + 1
                )));
            }
        }
        Ok(BoundaryPartition { dirichlet_facets, neumann_facets, dirichlet_nodes })
    }

    pub fn dirichlet_facets(&self, k: usize) -> &[usize] {
        &self.dirichlet_facets[k]
    }

    pub fn neumann_facets(&self, k: usize) -> &[usize] {
        &self.neumann_facets[k]
    }

    pub fn is_dirichlet_node(&self, k: usize, node: usize) -> bool {
        self.dirichlet_nodes[k][node]
    }

    /// Sorted list of non-Dirichlet (free) node ids for species k.
    pub fn free_nodes(&self, k: usize) -> Vec<usize> {
        (0..self.dirichlet_nodes[k].len())
            .filter(|&i| !self.dirichlet_nodes[k][i])
            .collect()
    }

    /// Facet-lumped Neumann load: l_j = sum over Neumann facets containing j
    /// of pi_f |f| / #nodes(f).
    pub fn neumann_load(&self, mesh: &Mesh, k: usize, pi: &[f64]) -> ScalarField {
        let mut load = vec![0.0; mesh.n_nodes()];
        for &fi in &self.neumann_facets[k] {
            let f = &mesh.facets()[fi];
            let share = pi[fi] * f.measure / f.nodes.len() as f64;
            for &v in &f.nodes {
                load[v] += share;
            }
        }
        ScalarField(load)
    }
}

/// Weighted harmonic extension of Dirichlet data: minimizes int sigma
/// |grad(g~)|^2 subject to g~ = g on the species' Dirichlet nodes and
/// g~ = 0 on the remaining boundary nodes.
pub fn lift_dirichlet(
    mesh: &Mesh,
    partition: &BoundaryPartition,
    data: &BoundaryData,
    sigma: &[ScalarField; 2],
) -> Result<[ScalarField; 2], Error> {
    let boundary: Vec<usize> = mesh.boundary_nodes();
    let mut lifted = [ScalarField::zeros(mesh.n_nodes()), ScalarField::zeros(mesh.n_nodes())];
    for k in 0..2 {
        let stiffness = mesh.assemble_stiffness(&sigma[k])?;
        let mut fixed = vec![false; mesh.n_nodes()];
        let mut value = vec![0.0; mesh.n_nodes()];
        for &b in &boundary {
            fixed[b] = true;
            value[b] = if partition.is_dirichlet_node(k, b) { data.g[k][b] } else { 0.0 };
        }
        let free: Vec<usize> = (0..mesh.n_nodes()).filter(|&i| !fixed[i]).collect();
        let mut out = ScalarField(value.clone());
        if !free.is_empty() {
            let mut rhs = vec![0.0; free.len()];
            for (row, &i) in free.iter().enumerate() {
                let mut acc = 0.0;
                for (j, v) in stiffness.row(i) {
                    if fixed[j] {
                        acc -= v * value[j];
                    }
                }
                rhs[row] = acc;
            }
            let chol = stiffness
                .reduce_to_banded(&free)
                .cholesky()
                .map_err(|e| Error::Solver(format!("lifting system: {e}")))?;
            let sol = chol.solve(&rhs);
            for (row, &i) in free.iter().enumerate() {
                out[i] = sol[row];
            }
        }
        lifted[k] = out;
    }
    Ok(lifted)
}

/// Factorized reduced stiffness for one species, reusable across solves.
#[derive(Debug)]
pub struct ReducedStiffness {
    pub stiffness: SparseSym,
    pub free: Vec<usize>,
    pub chol: CholeskyBanded,
}

impl ReducedStiffness {
    pub fn build(
        mesh: &Mesh,
        partition: &BoundaryPartition,
        k: usize,
        sigma: &ScalarField,
    ) -> Result<Self, Error> {
        let stiffness = mesh.assemble_stiffness(sigma)?;
        let free = partition.free_nodes(k);
        let chol = stiffness
            .reduce_to_banded(&free)
            .cholesky()
            .map_err(|e| Error::Solver(format!("reduced stiffness: {e}")))?;
        Ok(ReducedStiffness { stiffness, free, chol })
    }

    /// Solve the reduced system for the free entries of z given the full
    /// right-hand side load and the fixed Dirichlet values in `z`.
    pub fn solve_with_dirichlet(&self, load: &[f64], z: &mut [f64]) {
        let mut rhs = Vec::with_capacity(self.free.len());
        let mut fixed = vec![true; z.len()];
        for &i in &self.free {
            fixed[i] = false;
        }
        for &i in &self.free {
            let mut acc = load[i];
            for (j, v) in self.stiffness.row(i) {
                if fixed[j] {
                    acc -= v * z[j];
                }
            }
            rhs.push(acc);
        }
        self.chol.solve_in_place(&mut rhs);
        for (row, &i) in self.free.iter().enumerate() {
            z[i] = rhs[row];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_mesh_examples() {
        let mesh = Mesh::interval(0.0, 1.0, 4).unwrap();
        assert_eq!(mesh.n_nodes(), 5);
        let xs: Vec<f64> = mesh.nodes().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(Mesh::interval(0.0, 1.0, 1).is_err());
        assert!(Mesh::interval(1.0, 0.0, 4).is_err());
    }

    #[test]
    fn rectangle_mesh_counts() {
        let mesh = Mesh::rectangle(((0.0, 1.0), (0.0, 1.0)), 2, 2).unwrap();
        assert_eq!(mesh.n_nodes(), 9);
        assert_eq!(mesh.n_elems(), 8);
        assert!((mesh.total_measure() - 1.0).abs() < 1e-14);
        assert_eq!(mesh.facets().len(), 8);
    }

    #[test]
    fn stiffness_interior_stencil() {
        let mesh = Mesh::interval(0.0, 1.0, 4).unwrap();
        let sigma = ScalarField::constant(5, 1.0);
        let a = mesh.assemble_stiffness(&sigma).unwrap();
        assert!((a.get(2, 1) + 4.0).abs() < 1e-12);
        assert!((a.get(2, 2) - 8.0).abs() < 1e-12);
        assert!((a.get(2, 3) + 4.0).abs() < 1e-12);
        // doubling sigma doubles every entry
        let a2 = mesh.assemble_stiffness(&ScalarField::constant(5, 2.0)).unwrap();
        assert!((a2.get(2, 2) - 16.0).abs() < 1e-12);
        // nonpositive sigma rejected
        assert!(mesh.assemble_stiffness(&ScalarField::constant(5, 0.0)).is_err());
    }

    #[test]
    fn mass_row_sums_are_basis_integrals() {
        for mesh in [
            Mesh::interval(0.0, 2.0, 5).unwrap(),
            Mesh::rectangle(((0.0, 1.0), (0.0, 2.0)), 3, 2).unwrap(),
        ] {
            let m = mesh.assemble_mass();
            let w = mesh.lumped_weights();
            for i in 0..mesh.n_nodes() {
                let row_sum: f64 = m.row(i).map(|(_, v)| v).sum();
                assert!(
                    (row_sum - w[i]).abs() < 1e-13,
                    "row {i}: {row_sum} vs lumped {}",
                    w[i]
                );
            }
            let total: f64 = w.iter().sum();
            assert!((total - mesh.total_measure()).abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_examples() {
        let mesh = Mesh::interval(0.0, 1.0, 4).unwrap();
        let u = ScalarField::from_fn(&mesh, |p| p[0]);
        let g = mesh.gradient(&u);
        for e in 0..mesh.n_elems() {
            assert!((g[e][0] - 1.0).abs() < 1e-13);
        }
        let c = ScalarField::constant(5, 3.0);
        let gc = mesh.gradient(&c);
        for e in 0..mesh.n_elems() {
            assert!(gc[e][0].abs() < 1e-13);
        }
    }

    #[test]
    fn gradient_divergence_adjointness() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for mesh in [
            Mesh::interval(-1.0, 2.0, 7).unwrap(),
            Mesh::rectangle(((0.0, 1.0), (0.0, 1.0)), 4, 3).unwrap(),
        ] {
            for _ in 0..5 {
                let u = ScalarField(
                    (0..mesh.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                );
                let v = VectorField(
                    (0..mesh.n_elems())
                        .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                        .collect(),
                );
                let gu = mesh.gradient(&u);
                let lhs: f64 = (0..mesh.n_elems())
                    .map(|e| mesh.elem_measure(e) * (gu[e][0] * v[e][0] + gu[e][1] * v[e][1]))
                    .sum();
                let dv = mesh.divergence_adjoint(&v);
                let rhs: f64 = (0..mesh.n_nodes()).map(|i| u[i] * dv[i]).sum();
                assert!((lhs - rhs).abs() < 1e-13, "adjointness broken: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn stiffness_nullspace_is_constants() {
        for mesh in [
            Mesh::interval(0.0, 1.0, 6).unwrap(),
            Mesh::rectangle(((0.0, 1.0), (0.0, 1.0)), 3, 3).unwrap(),
        ] {
            let sigma = ScalarField::constant(mesh.n_nodes(), 1.3);
            let a = mesh.assemble_stiffness(&sigma).unwrap();
            let ones = vec![1.0; mesh.n_nodes()];
            let r = a.apply_alloc(&ones);
            for v in r {
                assert!(v.abs() < 1e-12);
            }
            // and positive definite on the complement: x'Ax > 0 for x = coords
            let x: Vec<f64> = mesh.nodes().iter().map(|p| p[0]).collect();
            let ax = a.apply_alloc(&x);
            let quad: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
            assert!(quad > 1e-6);
        }
    }

    #[test]
    fn dirichlet_energy_refinement_consistency() {
        // int sigma |grad u_h|^2 for u = sin(pi x) converges to pi^2/2 at
        // second order
        let exact = std::f64::consts::PI * std::f64::consts::PI / 2.0;
        let mut errors = Vec::new();
        for n in [8usize, 16, 32] {
            let mesh = Mesh::interval(0.0, 1.0, n).unwrap();
            let u = ScalarField::from_fn(&mesh, |p| (std::f64::consts::PI * p[0]).sin());
            let g = mesh.gradient(&u);
            let energy: f64 =
                (0..mesh.n_elems()).map(|e| mesh.elem_measure(e) * g[e][0] * g[e][0]).sum();
            errors.push((energy - exact).abs());
        }
        let order1 = (errors[0] / errors[1]).log2();
        let order2 = (errors[1] / errors[2]).log2();
        assert!(order1 > 1.9 && order2 > 1.9, "orders {order1}, {order2}");
    }

    #[test]
    fn partition_validation() {
        let mesh = Mesh::interval(0.0, 1.0, 4).unwrap();
        let p = BoundaryPartition::from_sides(&mesh, [&[Side::Left], &[Side::Right]]).unwrap();
        assert!(p.is_dirichlet_node(0, 0));
        assert!(!p.is_dirichlet_node(0, 4));
        assert!(p.is_dirichlet_node(1, 4));
        assert_eq!(p.free_nodes(0), vec![1, 2, 3, 4]);
        // empty Dirichlet part rejected
        assert!(BoundaryPartition::from_sides(&mesh, [&[], &[Side::Left]]).is_err());
    }

    #[test]
    fn corner_nodes_go_to_the_dirichlet_side() {
        let mesh = Mesh::rectangle(((0.0, 1.0), (0.0, 1.0)), 3, 3).unwrap();
        let p =
            BoundaryPartition::from_sides(&mesh, [&[Side::Left], &[Side::Left]]).unwrap();
        // the corner (0,0) belongs to both a left (Dirichlet) and a bottom
        // (Neumann) facet; it must be treated as Dirichlet
        let corner = mesh
            .nodes()
            .iter()
            .position(|p| p[0] == 0.0 && p[1] == 0.0)
            .unwrap();
        assert!(p.is_dirichlet_node(0, corner));
    }

    #[test]
    fn lifting_examples() {
        let mesh = Mesh::interval(0.0, 1.0, 4).unwrap();
        let partition =
            BoundaryPartition::from_sides(&mesh, [&[Side::Left], &[Side::Left]]).unwrap();
        let sigma = [ScalarField::constant(5, 1.0), ScalarField::constant(5, 1.0)];

        // zero data lifts to zero
        let zero = BoundaryData::zeros(&mesh);
        let lift = lift_dirichlet(&mesh, &partition, &zero, &sigma).unwrap();
        assert!(lift[0].0.iter().all(|&v| v == 0.0));

        // unit charge at the left with a Neumann right end: linear ramp 1 -> 0
        let mut data = BoundaryData::zeros(&mesh);
        data.g[0][0] = 1.0;
        let lift = lift_dirichlet(&mesh, &partition, &data, &sigma).unwrap();
        for (i, want) in [1.0, 0.75, 0.5, 0.25, 0.0].iter().enumerate() {
            assert!((lift[0][i] - want).abs() < 1e-12, "node {i}: {}", lift[0][i]);
        }

        // constant charge on a two-sided Dirichlet boundary lifts constantly
        let both =
            BoundaryPartition::from_sides(&mesh, [&[Side::Left, Side::Right], &[Side::Left]])
                .unwrap();
        let mut data = BoundaryData::zeros(&mesh);
        data.g[0][0] = 2.0;
        data.g[0][4] = 2.0;
        let lift = lift_dirichlet(&mesh, &both, &data, &sigma).unwrap();
        for i in 0..5 {
            assert!((lift[0][i] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reduced_stiffness_solves_two_point_problem() {
        let mesh = Mesh::interval(0.0, 1.0, 8).unwrap();
        let partition =
            BoundaryPartition::from_sides(&mesh, [&[Side::Left, Side::Right], &[Side::Left]])
                .unwrap();
        let sigma = ScalarField::constant(9, 1.0);
        let red = ReducedStiffness::build(&mesh, &partition, 0, &sigma).unwrap();
        // -z'' = 0, z(0)=0, z(1)=1 -> z = x
        let load = vec![0.0; 9];
        let mut z = vec![0.0; 9];
        z[8] = 1.0;
        red.solve_with_dirichlet(&load, &mut z);
        for (i, zi) in z.iter().enumerate() {
            assert!((zi - i as f64 / 8.0).abs() < 1e-12);
        }
    }
}
