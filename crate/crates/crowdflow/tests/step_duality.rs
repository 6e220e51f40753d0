//! Brute-force validation of the step solver: the primal problem reduced to
//! the densities alone is minimized by projected gradient descent with dense
//! linear algebra, fully independent of the splitting iteration, and the two
//! solutions are compared node by node.

mod common;

use common::Case;
use crowdflow::elliptic::ProductMetric;
use crowdflow::energy::EnergyLaw;
use crowdflow::grid::{BoundaryData, BoundaryPartition, Mesh, ScalarField, Side, VectorField};
use crowdflow::step::{solve_step, SolverConfig, StepProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn quadratic_law_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for trial in 0..3 {
        let mesh = Mesh::interval(0.0, 1.0, 4).unwrap();
        let case = Case::random(mesh, EnergyLaw::quadratic(), 1.0, &mut rng);
        case.compare_with_oracle(1e-5, 1e-7);
        let _ = trial;
    }
}

#[test]
fn crowd_motion_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for _ in 0..3 {
        let mesh = Mesh::interval(0.0, 1.0, 4).unwrap();
        let case = Case::random(mesh, EnergyLaw::crowd_motion(1.0), 1.0, &mut rng);
        case.compare_with_oracle(2e-5, 1e-6);
    }
}

#[test]
fn porous_medium_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mesh = Mesh::interval(0.0, 1.0, 4).unwrap();
    let case = Case::random(mesh, EnergyLaw::porous_medium(2.0), 1.0, &mut rng);
    case.compare_with_oracle(2e-5, 1e-6);
}

#[test]
fn sigma_rescaling_stays_consistent_with_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mesh = Mesh::interval(0.0, 1.0, 4).unwrap();
    let case = Case::random(mesh, EnergyLaw::quadratic(), 2.0, &mut rng);
    case.compare_with_oracle(1e-5, 1e-7);
}

#[test]
fn resolvent_is_nonexpansive_for_homogeneous_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mesh = Mesh::interval(0.0, 1.0, 16).unwrap();
    let partition =
        BoundaryPartition::from_sides(&mesh, [&[Side::Left], &[Side::Left]]).unwrap();
    let law = EnergyLaw::porous_medium(1.0);
    let n = mesh.n_nodes();
    let sigma = [ScalarField::constant(n, 1.0), ScalarField::constant(n, 1.0)];
    let lambda = 0.05;
    let sigma_eff = [
        ScalarField::constant(n, lambda),
        ScalarField::constant(n, lambda),
    ];
    let metric = ProductMetric::new(&mesh, &partition, &sigma).unwrap();
    let config = SolverConfig::with_gap_tolerance(1e-11);
    for _ in 0..5 {
        let mu_a = [
            ScalarField((0..n).map(|_| rng.gen_range(0.0..1.0)).collect()),
            ScalarField((0..n).map(|_| rng.gen_range(0.0..1.0)).collect()),
        ];
        let mu_b = [
            ScalarField((0..n).map(|_| rng.gen_range(0.0..1.0)).collect()),
            ScalarField((0..n).map(|_| rng.gen_range(0.0..1.0)).collect()),
        ];
        let mut solve = |mu: &[ScalarField; 2]| {
            let problem = StepProblem {
                mesh: &mesh,
                partition: &partition,
                law: &law,
                sigma: [sigma_eff[0].clone(), sigma_eff[1].clone()],
                mu: [mu[0].clone(), mu[1].clone()],
                chi: [VectorField::zeros(mesh.n_elems()), VectorField::zeros(mesh.n_elems())],
                boundary: BoundaryData::zeros(&mesh),
            };
            let s = solve_step(&problem, &config).unwrap();
            assert!(s.converged);
            s.rho
        };
        let rho_a = solve(&mu_a);
        let rho_b = solve(&mu_b);
        let d_out = metric.pair_distance(&rho_a, &rho_b);
        let d_in = metric.pair_distance(&mu_a, &mu_b);
        assert!(d_out <= d_in + 1e-8, "resolvent expanded: {d_out} > {d_in}");
    }
}

#[test]
fn max_potential_stays_nonnegative_where_mass_sits() {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mesh = Mesh::interval(0.0, 1.0, 16).unwrap();
    let case = Case::random(mesh, EnergyLaw::quadratic(), 1.0, &mut rng);
    let solution = solve_step(&case.problem(), &SolverConfig::with_gap_tolerance(1e-9)).unwrap();
    assert!(solution.converged);
    for i in 0..case.mesh.n_nodes() {
        if solution.rho[0][i] + solution.rho[1][i] > 1e-6 {
            assert!(solution.eta_max[i] >= -1e-7, "eta~ negative at node {i}");
        }
    }
}
