mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tomo_core::bayes::{
    bayes_report, build_tangent_basis, certified_report, fisher_apply, fisher_solve, tangent_project, AsymptoticOptions,
    FisherOperator,
};
use tomo_core::maxlike::{solve, SolverOptions};
use tomo_core::simulate::{simulate, PovmSpec, SimulationSpec};
use tomo_core::{random, HermitianMatrix, MeasurementDataset};

use common::*;

fn qutrit_rank_two() -> MeasurementDataset {
    // exact frequencies of a rank-2 state over the four qutrit MUBs
    let rho = HermitianMatrix::from_real_diagonal(&[0.0, 0.3, 0.7]);
    let effects = tomo_core::povm::mub_effects(3).unwrap();
    let freqs: Vec<f64> = effects.iter().map(|e| e.probability(&rho) / 4.0).collect();
    MeasurementDataset::from_frequencies(effects, &freqs, 1200).unwrap()
}

#[test]
fn fisher_matrix_matches_manifold_curvature_at_rank_two() {
    let ds = qutrit_rank_two();
    let out = solve(&ds, &SolverOptions::default()).unwrap();
    assert!(out.converged);
    assert_eq!(out.certificate.rank, 2);
    let basis = build_tangent_basis(&out.rho, 2).unwrap();
    assert_eq!(basis.len(), 7);
    let op = FisherOperator::new(&ds, &out.rho, &out.certificate, 1e-7).unwrap();
    let err = max_relative_entry_error(&op.matrix(&basis), &fd_fisher_matrix(&ds, &out.rho, &basis, 1e-4));
    assert!(err < 1e-4, "{err}");
}

#[test]
fn fisher_matrix_is_symmetric_positive_definite() {
    for ds in [rank_one_qubit(300), rank_one_qutrit(900), qutrit_rank_two(), symmetric_qubit(300)] {
        let out = solve(&ds, &SolverOptions::default()).unwrap();
        let basis = build_tangent_basis(&out.rho, out.certificate.rank).unwrap();
        let m = FisherOperator::new(&ds, &out.rho, &out.certificate, 1e-7).unwrap().matrix(&basis);
        assert!((&m - m.transpose()).amax() < 1e-9);
        assert!(m.clone().symmetric_eigen().eigenvalues.min() > 0.0);
    }
}

#[test]
fn solve_round_trip_and_tangency() {
    let ds = qutrit_rank_two();
    let out = solve(&ds, &SolverOptions::default()).unwrap();
    let cert = &out.certificate;
    let basis = build_tangent_basis(&out.rho, cert.rank).unwrap();
    let op = FisherOperator::new(&ds, &out.rho, cert, 1e-7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..5 {
        let a = random::gaussian_hermitian(3, &mut rng);
        let a_par = tangent_project(&a, &cert.projector);
        let x = fisher_solve(&op, &basis, &a).unwrap();
        assert!((&tangent_project(&x, &cert.projector) - &x).frobenius_norm() < 1e-10);
        let image = tangent_project(&op.apply(&x), &cert.projector);
        assert!((&image - &a_par).frobenius_norm() < 1e-8 * (1.0 + a_par.frobenius_norm()));
    }
}

#[test]
fn interior_operator_has_only_the_data_term() {
    let ds = symmetric_qubit(300);
    let rho = tomo_core::DensityMatrix::maximally_mixed(2);
    let cert = tomo_core::maxlike::certify(&ds, &rho, 1e-7, 1e-9).unwrap();
    let x = HermitianMatrix::pauli_x();
    let fx = fisher_apply(&ds, &rho, &cert, &x).unwrap();
    let expected = ds
        .effects()
        .iter()
        .zip(ds.weights())
        .map(|(e, &w)| {
            let p = e.probability(rho.as_hermitian());
            let y = tangent_project(e.matrix(), &cert.projector);
            y.scale(w * x.dot(&y) / (p * p))
        })
        .fold(HermitianMatrix::zeros(2), |acc, t| &acc + &t);
    assert!((&fx - &expected).frobenius_norm() < 1e-12);
}

#[test]
fn variance_ignores_directions_removed_by_projection() {
    let ds = qutrit_rank_two();
    let out = solve(&ds, &SolverOptions::default()).unwrap();
    let opts = AsymptoticOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = random::gaussian_hermitian(3, &mut rng);
    let base = bayes_report(&ds, &a, &out.rho, &out.certificate, &opts).unwrap();
    let p = &out.certificate.projector;
    let q = &HermitianMatrix::identity(3) - p;
    let b = random::gaussian_hermitian(3, &mut rng);
    let kernel_part = HermitianMatrix::new(q.matrix() * b.matrix() * q.matrix()).unwrap();
    for shifted in [&a + &HermitianMatrix::identity(3).scale(2.5), &a + &kernel_part, &a + &p.scale(-0.7)] {
        let r = bayes_report(&ds, &shifted, &out.rho, &out.certificate, &opts).unwrap();
        assert!((r.variance - base.variance).abs() < 1e-12 * base.variance.max(1e-300) + 1e-18);
    }
    let par = bayes_report(&ds, &tangent_project(&a, p), &out.rho, &out.certificate, &opts).unwrap();
    assert!((par.variance - base.variance).abs() < 1e-12 * base.variance);
    let id = bayes_report(&ds, &HermitianMatrix::identity(3), &out.rho, &out.certificate, &opts).unwrap();
    assert!(id.variance.abs() < 1e-24);
    assert!((id.mean - 1.0).abs() < 1e-12);
}

#[test]
fn report_fields_follow_dimension_formulas() {
    let ds = rank_one_qutrit(900);
    let out = solve(&ds, &SolverOptions::default()).unwrap();
    let r = certified_report(&ds, &HermitianMatrix::from_real_diagonal(&[0.0, 1.0, -1.0]), &out.rho, &AsymptoticOptions::default())
        .unwrap();
    assert_eq!((r.rank, r.m, r.n), (1, 3, 4));
    assert!((r.spectral_gap.unwrap() - 0.25).abs() < 1e-8);
    assert!((r.lambda_bar - 1.0).abs() < 1e-12);
    let json = serde_json::to_value(&r).unwrap();
    for key in ["rho_ml", "rank", "m", "n", "mean", "variance", "lambda_bar", "spectral_gap", "valid"] {
        assert!(json.get(key).is_some(), "{key}");
    }
}

#[test]
fn variance_scales_as_one_over_n() {
    let a = HermitianMatrix::pauli_x();
    let small = certified_report(&rank_one_qubit(300), &a, &tomo_core::DensityMatrix::qubit(0.0, 0.0, 1.0).unwrap(), &AsymptoticOptions::default())
        .unwrap();
    let large = certified_report(&rank_one_qubit(3000), &a, &tomo_core::DensityMatrix::qubit(0.0, 0.0, 1.0).unwrap(), &AsymptoticOptions::default())
        .unwrap();
    assert!((small.variance / large.variance - 10.0).abs() < 1e-9);
}

#[test]
fn simulated_full_rank_pipeline_is_valid() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let ds = simulate(&SimulationSpec {
        dim: 3,
        true_state: random::random_rank_density(3, 3, &mut rng),
        povm: PovmSpec::Preset("mub".into()),
        shots: 5000,
        seed: 77,
    })
    .unwrap();
    let out = solve(&ds, &SolverOptions::default()).unwrap();
    let r = certified_report(&ds, &random::gaussian_hermitian(3, &mut rng), &out.rho, &AsymptoticOptions::default()).unwrap();
    assert!(r.valid && r.variance > 0.0);
    assert_eq!((r.m, r.n), (-1, 8));
}
