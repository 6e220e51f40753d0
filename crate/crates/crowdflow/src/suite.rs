//! The self-check suite behind the `check` subcommand: seeded sweeps of the
//! law properties, the discrete operator identities, the step certificates
//! and the gradient-flow contraction, each reported as one pass/fail line.
//!
//! Oracles here are deliberately primitive (grid searches and direct
//! evaluations) so that they exercise the production paths from the
//! outside.

use crate::elliptic::{EllipticSolver, ProductMetric};
use crate::energy::{DensitySelection, EnergyLaw, GraphPoint};
use crate::error::Error;
use crate::evolution::{run, Scenario, TimeTable};
use crate::flow::{contraction_check, ContractionVerdict, GradientFlow};
use crate::grid::{
    BoundaryData, BoundaryPartition, Mesh, ScalarField, Side, SourceData, VectorField,
};
use crate::step::{solve_step, SolverConfig, StepProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub observed: f64,
    pub threshold: f64,
}

impl CheckResult {
    fn new(name: &'static str, observed: f64, threshold: f64) -> Self {
        CheckResult { name, passed: observed <= threshold, observed, threshold }
    }
}

/// Run every check with the given seed; deterministic for a fixed seed.
pub fn run_suite(seed: u64) -> Result<Vec<CheckResult>, Error> {
    let mut results = Vec::new();
    results.push(fenchel_young_check(seed));
    results.push(prox_oracle_check(seed));
    results.push(characterization_agreement_check(seed));
    results.push(swap_symmetry_check(seed));
    results.push(adjointness_check(seed));
    results.push(duality_consistency_check());
    results.push(step_certificate_check(seed)?);
    results.push(membership_at_convergence_check(seed)?);
    results.push(resolvent_nonexpansive_check(seed)?);
    results.push(contraction_run_check(seed)?);
    Ok(results)
}

fn sample_laws() -> Vec<EnergyLaw> {
    vec![
        EnergyLaw::porous_medium(1.0),
        EnergyLaw::porous_medium(2.0),
        EnergyLaw::crowd_motion(1.0),
        EnergyLaw::quadratic(),
    ]
}

fn fenchel_young_check(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x01);
    let laws = sample_laws();
    let mut worst: f64 = 0.0;
    for _ in 0..400 {
        let law = &laws[rng.gen_range(0..laws.len())];
        let p = law.at(0);
        let r = rng.gen_range(0.0..2.0);
        let q = rng.gen_range(-3.0..3.0);
        if p.beta(r).is_finite() {
            let defect = q * r - p.beta(r) - p.conjugate(q).unwrap_or(f64::INFINITY);
            worst = worst.max(defect);
        }
    }
    CheckResult::new("fenchel-young inequality", worst, 1e-10)
}

fn prox_oracle_check(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x02);
    let laws = sample_laws();
    let mut worst: f64 = 0.0;
    for _ in 0..60 {
        let law = &laws[rng.gen_range(0..laws.len())];
        let p = law.at(0);
        let s = rng.gen_range(0.1..10.0);
        let q = rng.gen_range(-5.0..5.0);
        let got = p.prox_conjugate(s, q);
        // coarse-to-fine 1-D grid search
        let mut lo = -6.0;
        let mut hi = 6.0;
        let mut best = 0.0;
        for pass in 0..2 {
            let n = if pass == 0 { 2400 } else { 800 };
            let h = (hi - lo) / n as f64;
            let mut best_v = f64::INFINITY;
            for i in 0..=n {
                let a = lo + i as f64 * h;
                let v = (a - q).powi(2) / (2.0 * s) + p.conjugate(a).unwrap_or(f64::INFINITY);
                if v < best_v {
                    best_v = v;
                    best = a;
                }
            }
            lo = best - 2.0 * h;
            hi = best + 2.0 * h;
        }
        worst = worst.max((got - best).abs());
    }
    CheckResult::new("prox matches grid oracle", worst, 2e-3)
}

fn characterization_agreement_check(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x03);
    let laws = sample_laws();
    let mut disagreements = 0usize;
    let total = 400;
    for _ in 0..total {
        let law = &laws[rng.gen_range(0..laws.len())];
        let p = law.at(0);
        let gp = if rng.gen_bool(0.5) {
            // exact member via the inverse graph
            let d = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            match p.select_density(d) {
                DensitySelection::FirstOnly(iv) => GraphPoint { r: [iv.lo, 0.0], d },
                DensitySelection::SecondOnly(iv) => GraphPoint { r: [0.0, iv.lo], d },
                DensitySelection::Simplex(iv) => GraphPoint { r: [iv.lo, 0.0], d },
            }
        } else {
            GraphPoint {
                r: [rng.gen_range(-0.5..2.0), rng.gen_range(-0.5..2.0)],
                d: [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
            }
        };
        let rep = p.coupled_membership(gp, 5e-3);
        if !rep.agree {
            disagreements += 1;
        }
    }
    CheckResult::new("graph characterizations agree", disagreements as f64, 0.0)
}

fn swap_symmetry_check(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x04);
    let laws = sample_laws();
    let mut mismatches = 0usize;
    for _ in 0..200 {
        let law = &laws[rng.gen_range(0..laws.len())];
        let p = law.at(0);
        let gp = GraphPoint {
            r: [rng.gen_range(-0.5..2.0), rng.gen_range(-0.5..2.0)],
            d: [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)],
        };
        let swapped = GraphPoint { r: [gp.r[1], gp.r[0]], d: [gp.d[1], gp.d[0]] };
        if p.coupled_membership(gp, 1e-6).member != p.coupled_membership(swapped, 1e-6).member {
            mismatches += 1;
        }
    }
    CheckResult::new("membership swap symmetry", mismatches as f64, 0.0)
}

fn adjointness_check(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05);
    let mut worst: f64 = 0.0;
    for mesh in [
        Mesh::interval(0.0, 1.0, 9).expect("valid mesh"),
        Mesh::rectangle(((0.0, 1.0), (0.0, 1.0)), 3, 4).expect("valid mesh"),
    ] {
        for _ in 0..10 {
            let u = ScalarField((0..mesh.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect());
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
            worst = worst.max((lhs - rhs).abs());
        }
    }
    CheckResult::new("gradient/divergence adjointness", worst, 1e-13)
}

fn duality_consistency_check() -> CheckResult {
    let mesh = Mesh::interval(0.0, 1.0, 24).expect("valid mesh");
    let partition = BoundaryPartition::from_sides(&mesh, [&[Side::Left], &[Side::Left]])
        .expect("valid partition");
    let sigma = ScalarField::constant(25, 1.25);
    let solver = EllipticSolver::new(&mesh, &partition, 0, &sigma).expect("factorization");
    let mu = ScalarField::from_fn(&mesh, |p| (3.0 * p[0]).sin());
    let chi = VectorField::zeros(24);
    let pi = vec![0.0; mesh.facets().len()];
    let g = ScalarField::zeros(25);
    let work = solver.transition_work(&mu, &chi, &pi, &g);
    let norm = solver.dual_norm(&mu, &chi);
    CheckResult::new(
        "transition work = half squared dual norm",
        (work - 0.5 * norm * norm).abs(),
        1e-12,
    )
}

fn random_problem<'a>(
    mesh: &'a Mesh,
    partition: &'a BoundaryPartition,
    law: &'a EnergyLaw,
    rng: &mut ChaCha8Rng,
) -> StepProblem<'a> {
    let n = mesh.n_nodes();
    let ne = mesh.n_elems();
    let mut boundary = BoundaryData::zeros(mesh);
    for k in 0..2 {
        for i in 0..n {
            if partition.is_dirichlet_node(k, i) {
                boundary.g[k][i] = rng.gen_range(0.0..0.4);
            }
        }
        for &fi in partition.neumann_facets(k) {
            boundary.pi[k][fi] = rng.gen_range(-0.2..0.2);
        }
    }
    StepProblem {
        mesh,
        partition,
        law,
        sigma: [ScalarField::constant(n, 1.0), ScalarField::constant(n, 1.5)],
        mu: [
            ScalarField((0..n).map(|_| rng.gen_range(0.0..1.0)).collect()),
            ScalarField((0..n).map(|_| rng.gen_range(0.0..1.0)).collect()),
        ],
        chi: [
            VectorField((0..ne).map(|_| [rng.gen_range(-0.2..0.2), 0.0]).collect()),
            VectorField((0..ne).map(|_| [rng.gen_range(-0.2..0.2), 0.0]).collect()),
        ],
        boundary,
    }
}

fn step_certificate_check(seed: u64) -> Result<CheckResult, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x06);
    let mesh = Mesh::interval(0.0, 1.0, 16)?;
    let partition = BoundaryPartition::from_sides(&mesh, [&[Side::Left], &[Side::Right]])?;
    let law = EnergyLaw::quadratic();
    let config = SolverConfig::with_gap_tolerance(1e-8);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let problem = random_problem(&mesh, &partition, &law, &mut rng);
        let solution = solve_step(&problem, &config)?;
        if !solution.converged {
            worst = f64::INFINITY;
            break;
        }
        worst = worst.max(solution.rel_gap).max(solution.kkt.negativity);
        // the best-so-far gap trace must never increase
        for w in solution.gap_trace.windows(2) {
            worst = worst.max(w[1].1 - w[0].1);
        }
    }
    Ok(CheckResult::new("step gap certificates", worst, 1e-7))
}

fn membership_at_convergence_check(seed: u64) -> Result<CheckResult, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x07);
    let mesh = Mesh::interval(0.0, 1.0, 16)?;
    let partition = BoundaryPartition::from_sides(&mesh, [&[Side::Left], &[Side::Left]])?;
    let law = EnergyLaw::porous_medium(1.0);
    let config = SolverConfig::with_gap_tolerance(1e-9);
    let problem = random_problem(&mesh, &partition, &law, &mut rng);
    let solution = solve_step(&problem, &config)?;
    let mut worst = if solution.converged { 0.0 } else { f64::INFINITY };
    for i in 0..mesh.n_nodes() {
        let total = solution.rho[0][i] + solution.rho[1][i];
        if total > 1e-6 {
            let gp = GraphPoint {
                r: [solution.rho[0][i], solution.rho[1][i]],
                d: [solution.eta[0][i], solution.eta[1][i]],
            };
            let rep = law.at(i).coupled_membership(gp, 1e-8);
            worst = worst.max(rep.fenchel_residual.max(0.0));
        }
    }
    Ok(CheckResult::new("graph membership at convergence", worst, 1e-5))
}

fn resolvent_nonexpansive_check(seed: u64) -> Result<CheckResult, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x08);
    let mesh = Mesh::interval(0.0, 1.0, 12)?;
    let partition = BoundaryPartition::from_sides(&mesh, [&[Side::Left], &[Side::Left]])?;
    let law = EnergyLaw::quadratic();
    let n = mesh.n_nodes();
    let sigma = [ScalarField::constant(n, 1.0), ScalarField::constant(n, 1.0)];
    let flow = GradientFlow::new(&mesh, &partition, &law, sigma);
    let metric = flow.metric()?;
    let config = SolverConfig::with_gap_tolerance(1e-11);
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let f = [
            ScalarField((0..n).map(|_| rng.gen_range(0.0..1.0)).collect()),
            ScalarField((0..n).map(|_| rng.gen_range(0.0..1.0)).collect()),
        ];
        let g = [
            ScalarField((0..n).map(|_| rng.gen_range(0.0..1.0)).collect()),
            ScalarField((0..n).map(|_| rng.gen_range(0.0..1.0)).collect()),
        ];
        let jf = flow.resolvent(0.1, &f, &config)?.rho;
        let jg = flow.resolvent(0.1, &g, &config)?.rho;
        let d_out = metric.pair_distance(&jf, &jg);
        let d_in = metric.pair_distance(&f, &g);
        worst = worst.max(d_out - d_in);
    }
    Ok(CheckResult::new("resolvent nonexpansiveness", worst, 1e-8))
}

fn contraction_run_check(seed: u64) -> Result<CheckResult, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x09);
    let n = 13;
    let ne = 12;
    let make = |rho0: [ScalarField; 2]| -> Result<Scenario, Error> {
        let mesh = Mesh::interval(0.0, 1.0, 12)?;
        let partition = BoundaryPartition::from_sides(&mesh, [&[Side::Left], &[Side::Left]])?;
        let boundary = BoundaryData::zeros(&mesh);
        Ok(Scenario {
            mesh,
            partition,
            law: EnergyLaw::quadratic(),
            sigma: [ScalarField::constant(n, 1.0), ScalarField::constant(n, 1.0)],
            rho0,
            drift: TimeTable::constant([VectorField::zeros(ne), VectorField::zeros(ne)]),
            source: TimeTable::constant(SourceData {
                f0: [ScalarField::zeros(n), ScalarField::zeros(n)],
                fbar: [VectorField::zeros(ne), VectorField::zeros(ne)],
            }),
            boundary,
            tau: 0.01,
            horizon: 0.04,
            alpha: None,
            snapshot_stride: 1,
        })
    };
    let ra = [
        ScalarField((0..n).map(|_| rng.gen_range(0.0..1.0)).collect()),
        ScalarField((0..n).map(|_| rng.gen_range(0.0..1.0)).collect()),
    ];
    let rb = [
        ScalarField((0..n).map(|_| rng.gen_range(0.0..1.0)).collect()),
        ScalarField((0..n).map(|_| rng.gen_range(0.0..1.0)).collect()),
    ];
    let sa = make(ra)?;
    let sb = make(rb)?;
    let config = SolverConfig::with_gap_tolerance(1e-10);
    let ta = run(&sa, &config)?;
    let tb = run(&sb, &config)?;
    let metric = ProductMetric::new(&sa.mesh, &sa.partition, &sa.sigma)?;
    let report = contraction_check(&ta, &tb, &metric)?;
    let worst = match report.verdict {
        ContractionVerdict::Pass => {
            let mut w: f64 = 0.0;
            for pair in report.distances.windows(2) {
                w = w.max(pair[1] - pair[0]);
            }
            w
        }
        _ => f64::INFINITY,
    };
    Ok(CheckResult::new("trajectory contraction", worst, 1e-8))
}
