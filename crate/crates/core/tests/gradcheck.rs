use divpref::model::{
    grad_check, grad_check_against, sample_loss_and_gradient, Cdf, CdfKind, LossSettings, DEFAULT_SMOOTHING,
    DEFAULT_STEP,
};
use divpref::synthetic::{gradcheck_fixture, LossKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn settings(kind: CdfKind) -> LossSettings {
    LossSettings {
        cdf: Cdf::from(kind),
        smoothing_eps: DEFAULT_SMOOTHING,
    }
}

#[test]
fn every_loss_matches_finite_differences_under_every_cdf() {
    for cdf in [CdfKind::ExactNormal, CdfKind::Logistic, CdfKind::Tanh] {
        let s = settings(cdf);
        for loss in LossKind::ALL {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for i in 0..40 {
                let (head, sample) = gradcheck_fixture(loss, &mut rng);
                let err = grad_check(&head, &s, &sample, DEFAULT_STEP).unwrap();
                assert!(err <= 1e-4, "{loss:?} {cdf:?} fixture {i}: relative error {err:e}");
            }
        }
    }
}

#[test]
fn planted_gradient_fault_is_caught() {
    let s = settings(CdfKind::Logistic);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for loss in LossKind::ALL {
        let (head, sample) = gradcheck_fixture(loss, &mut rng);
        let (_, mut grad) = sample_loss_and_gradient(&head, &s, &sample).unwrap();
        *grad.get_flat_mut(0) += 0.5;
        let err = grad_check_against(&head, &s, &sample, &grad, DEFAULT_STEP).unwrap();
        assert!(err > 1e-2, "{loss:?}: fault went unnoticed ({err:e})");
    }
}

#[test]
fn smoothing_variants_keep_gradients_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for eps in [0.0, 0.01, 0.2] {
        let s = LossSettings {
            cdf: Cdf::from(CdfKind::Logistic),
            smoothing_eps: eps,
        };
        for loss in [LossKind::MeanVarKl, LossKind::ClassificationKl] {
            for _ in 0..20 {
                let (head, sample) = gradcheck_fixture(loss, &mut rng);
                assert!(grad_check(&head, &s, &sample, DEFAULT_STEP).unwrap() <= 1e-4);
            }
        }
    }
}
