mod common;

use nalgebra::{DMatrix, DVector};
use osserman_lab::curvature::{higher_jacobi, jacobi, MetricGPsi};
use osserman_lab::grassmann::{admissible_pairs, sample_subspace, SampleConfig, TypePair};
use osserman_lab::product::{product_metric, theorem17_case, ProductSpec};
use osserman_lab::pseudo_linalg::{orthogonal_complement, orthonormalize, JordanPartition, SubspaceFrame, Tolerances};
use osserman_lab::psi_fields::{combine, psi_from_potential, psi_membership_scan, GridRegion};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{hessian_identity, normal_vector, projector_form, to_polynomial, uniform_point, Monomials, RandomPsi};

const ORTHO: f64 = 1e-10;

fn setup(seed: u64, p: usize, u: usize, v: usize) -> (ChaCha8Rng, MetricGPsi, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rp = RandomPsi::draw(&mut rng, p, 4);
    let metric = product_metric(&ProductSpec { psi: rp.field(), u, v }).unwrap();
    let point = metric.point(&uniform_point(&mut rng, p, 1.0)).unwrap();
    (rng, metric, point)
}

fn pick_pair(metric: &MetricGPsi, k: usize) -> TypePair {
    let pairs = admissible_pairs(metric.signature());
    pairs[k % pairs.len()]
}

fn sample(metric: &MetricGPsi, point: &[f64], pair: &TypePair, seed: u64) -> SubspaceFrame {
    let g = metric.metric_at(point).unwrap();
    let cfg = SampleConfig {
        seed,
        ..SampleConfig::default()
    };
    sample_subspace(&g, pair, &cfg, 0).unwrap()
}

fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, rel: f64) -> bool {
    (a - b).norm() <= rel * a.norm().max(b.norm()).max(1.0)
}

/// `f = 1/2 x^T H x` for `H = A^T A + I`.
fn quadratic_potential(rng: &mut ChaCha8Rng, p: usize) -> (Monomials, DMatrix<f64>) {
    let a = DMatrix::from_fn(p, p, |_, _| rand::Rng::gen_range(rng, -1.0..1.0));
    let h = a.transpose() * &a + DMatrix::identity(p, p);
    let mut terms = Vec::new();
    for i in 0..p {
        for j in i..p {
            let mut e = vec![0; p];
            e[i] += 1;
            e[j] += 1;
            terms.push((e, if i == j { 0.5 * h[(i, i)] } else { h[(i, j)] }));
        }
    }
    (terms, h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn curvature_has_the_tensor_symmetries(seed in any::<u64>(), p in 2usize..=4) {
        let (_, metric, point) = setup(seed, p, 0, 0);
        let rt = metric.curvature_closed(&point).unwrap();
        let scale = rt.max_abs().max(1.0);
        prop_assert!(rt.symmetry_defect() <= 1e-12 * scale);
        prop_assert!(rt.bianchi_defect() <= 1e-12 * scale);
    }

    #[test]
    fn jacobi_is_quadratic_in_its_argument(seed in any::<u64>(), p in 2usize..=3, c in 0.1f64..10.0) {
        let (mut rng, metric, point) = setup(seed, p, 1, 0);
        let g = metric.metric_at(&point).unwrap();
        let rt = metric.curvature_closed(&point).unwrap();
        let x = normal_vector(&mut rng, metric.dim());
        let j1 = jacobi(&rt, &g, &x).unwrap();
        let jc = jacobi(&rt, &g, &(&x * c)).unwrap();
        prop_assert!(close(&(j1.form() * (c * c)), jc.form(), 1e-12));
        let tol = Tolerances::default().rank;
        prop_assert_eq!(j1.rank(tol), jc.rank(tol));
    }

    #[test]
    fn orthonormalize_is_idempotent(seed in any::<u64>(), p in 2usize..=3, k in 0usize..16) {
        let (_, metric, point) = setup(seed, p, 0, 1);
        let g = metric.metric_at(&point).unwrap();
        let pair = pick_pair(&metric, k);
        let frame = sample(&metric, &point, &pair, seed);
        prop_assert_eq!(frame.type_counts(), (pair.timelike, pair.spacelike));
        prop_assert!(frame.orthonormal_defect(&g) < ORTHO);
        let again = orthonormalize(&frame, &g, ORTHO).unwrap();
        prop_assert_eq!(again.signs(), frame.signs());
        prop_assert!(again.orthonormal_defect(&g) < ORTHO);
        let before = projector_form(&metric.curvature_closed(&point).unwrap(), g.gram(), frame.vectors());
        let after = projector_form(&metric.curvature_closed(&point).unwrap(), g.gram(), again.vectors());
        prop_assert!(close(&before, &after, 1e-9));
    }

    #[test]
    fn higher_jacobi_ignores_the_choice_of_basis(seed in any::<u64>(), p in 2usize..=3, k in 0usize..16) {
        let (mut rng, metric, point) = setup(seed, p, 1, 1);
        let g = metric.metric_at(&point).unwrap();
        let rt = metric.curvature_closed(&point).unwrap();
        let pair = pick_pair(&metric, k);
        let frame = sample(&metric, &point, &pair, seed);
        let n = frame.len();
        let mix = DMatrix::from_fn(n, n, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0)) + DMatrix::identity(n, n) * 2.0;
        let e = frame.matrix() * mix;
        let mixed = SubspaceFrame::new(metric.dim(), e.column_iter().map(|c| c.into_owned()).collect()).unwrap();
        let rebuilt = orthonormalize(&mixed, &g, ORTHO).unwrap();
        let a = higher_jacobi(&rt, &g, &frame, ORTHO).unwrap();
        let b = higher_jacobi(&rt, &g, &rebuilt, ORTHO).unwrap();
        let oracle = projector_form(&rt, g.gram(), mixed.vectors());
        prop_assert!(close(a.form(), b.form(), 1e-8));
        prop_assert!(close(a.form(), &oracle, 1e-8));
    }

    #[test]
    fn complement_negates_the_jacobi_operator(seed in any::<u64>(), p in 2usize..=3, k in 0usize..16) {
        let (_, metric, point) = setup(seed, p, 0, 0);
        let g = metric.metric_at(&point).unwrap();
        let rt = metric.curvature_closed(&point).unwrap();
        let pair = pick_pair(&metric, k);
        let frame = sample(&metric, &point, &pair, seed);
        let perp = orthogonal_complement(&frame, &g, ORTHO).unwrap();
        prop_assert_eq!(perp.type_counts(), (pair.dual().timelike, pair.dual().spacelike));
        let a = higher_jacobi(&rt, &g, &frame, ORTHO).unwrap();
        let b = higher_jacobi(&rt, &g, &perp, ORTHO).unwrap();
        let scale = a.magnitude().max(b.magnitude()).max(1.0);
        prop_assert!((a.form() + b.form()).norm() <= 1e-9 * scale);
    }

    #[test]
    fn combine_is_linear(seed in any::<u64>(), a in 0.01f64..10.0, b in 0.01f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p1, p2) = (RandomPsi::draw(&mut rng, 3, 4), RandomPsi::draw(&mut rng, 3, 4));
        let (f1, f2) = (p1.field(), p2.field());
        let sum = combine(&[(a, &f1), (b, &f2)]).unwrap();
        let x = uniform_point(&mut rng, 3, 1.5);
        let want = p1.value(&x) * a + p2.value(&x) * b;
        prop_assert!(close(&sum.eval(&x), &want, 1e-12));
    }

    #[test]
    fn quadratic_potentials_satisfy_the_hessian_identity(seed in any::<u64>(), p in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (terms, h) = quadratic_potential(&mut rng, p);
        let metric = MetricGPsi::new(psi_from_potential(&to_polynomial(p, &terms)).unwrap());
        let point = metric.point(&uniform_point(&mut rng, p, 1.0)).unwrap();
        let g = metric.metric_at(&point).unwrap();
        let rt = metric.curvature_closed(&point).unwrap();
        let xs: Vec<DVector<f64>> = (0..3).map(|_| normal_vector(&mut rng, 2 * p)).collect();
        let lhs = g.apply(&(jacobi(&rt, &g, &xs[0]).unwrap().matrix() * &xs[1]), &xs[2]);
        let rho: Vec<DVector<f64>> = xs.iter().map(|v| v.rows(0, p).into_owned()).collect();
        let rhs = hessian_identity(&h, &rho[0], &rho[1], &rho[2]);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
    }

    #[test]
    fn membership_is_stable_under_positive_scaling(seed in any::<u64>(), a in 0.1f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (terms, _) = quadratic_potential(&mut rng, 2);
        let psi = psi_from_potential(&to_polynomial(2, &terms)).unwrap();
        let region = GridRegion::cube(2, 1.0, 3).unwrap();
        let scaled = combine(&[(a, &psi)]).unwrap();
        prop_assert!(psi_membership_scan(&psi, &region, 8, 1e-9, seed).unwrap().is_member());
        prop_assert!(psi_membership_scan(&scaled, &region, 8, 1e-9, seed).unwrap().is_member());
    }

    #[test]
    fn case_table_respects_duality(p in 2usize..=4, u in 0usize..=3, v in 0usize..=3, k in 0usize..64) {
        let spec = ProductSpec { psi: osserman_lab::psi_fields::PsiField::zero(p), u, v };
        let pairs = admissible_pairs(spec.signature());
        let pair = pairs[k % pairs.len()];
        let here = theorem17_case(&pair, p, u, v).unwrap();
        let there = theorem17_case(&pair.dual(), p, u, v).unwrap();
        prop_assert_eq!(here.expected_jordan, there.expected_jordan);
    }

    #[test]
    fn two_step_partition_accounts_for_every_dimension(m in 1usize..12, rank in 0usize..8) {
        match JordanPartition::two_step(m, rank) {
            Some(part) => {
                prop_assert!(2 * rank <= m);
                prop_assert_eq!(part.count(2), rank);
                prop_assert_eq!(part.count(1) + 2 * part.count(2), m);
            }
            None => prop_assert!(2 * rank > m),
        }
    }
}
