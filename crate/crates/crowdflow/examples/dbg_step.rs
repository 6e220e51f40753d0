use crowdflow::energy::EnergyLaw;
use crowdflow::evolution::{Scenario, TimeTable};
use crowdflow::flow::stationary_probe;
use crowdflow::grid::{BoundaryData, BoundaryPartition, Mesh, ScalarField, Side, SourceData, VectorField};
use crowdflow::step::SolverConfig;

fn main() {
    let mesh = Mesh::interval(0.0, 1.0, 16).unwrap();
    let partition = BoundaryPartition::from_sides(&mesh, [&[Side::Left], &[Side::Left]]).unwrap();
    let n = mesh.n_nodes();
    let ne = mesh.n_elems();
    let scenario = Scenario {
        boundary: BoundaryData::zeros(&mesh),
        mesh: mesh.clone(),
        partition: partition.clone(),
        law: EnergyLaw::quadratic(),
        sigma: [ScalarField::constant(n, 1.0), ScalarField::constant(n, 1.0)],
        rho0: [ScalarField::constant(n, 0.4), ScalarField::constant(n, 0.3)],
        drift: TimeTable::constant([VectorField::zeros(ne), VectorField::zeros(ne)]),
        source: TimeTable::constant(SourceData {
            f0: [ScalarField::zeros(n), ScalarField::zeros(n)],
            fbar: [VectorField::zeros(ne), VectorField::zeros(ne)],
        }),
        tau: 0.01,
        horizon: 6.0,
        alpha: None,
        snapshot_stride: 1,
    };
    for tol in [1e-12f64, 1e-13, 1e-14] {
        let config = SolverConfig::with_gap_tolerance(tol);
        match stationary_probe(&scenario, &config, 1e-8) {
            Ok(p) => {
                let tail: Vec<String> = p.tail_distances.iter().rev().take(5).map(|d| format!("{d:.2e}")).collect();
                println!("tol={tol:.0e}: converged={} steps={} rho_max={:.2e} last tails {:?}",
                    p.converged, p.steps, p.rho_inf[0].max().max(p.rho_inf[1].max()), tail);
            }
            Err(e) => println!("tol={tol:.0e}: ERROR {e}"),
        }
    }
}
