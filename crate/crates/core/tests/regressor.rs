use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rrmon_core::spectral::{RegressorModel, DEFAULT_LAYER_DIMS, FEATURE_DIM};

fn dataset(rng: &mut ChaCha8Rng, n: usize) -> Vec<(Vec<f64>, f64)> {
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..FEATURE_DIM).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y = rng.random_range(-1.5..1.5);
            (x, y)
        })
        .collect()
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let eps = 1e-5;
    for draw in 0..20u64 {
        let model = RegressorModel::<f64>::random(&DEFAULT_LAYER_DIMS, 100 + draw).unwrap();
        let data = dataset(&mut rng, 8);
        let (_, grad) = model.loss_and_gradient(&data);
        let params = model.params();
        assert_eq!(grad.len(), params.len());
        // A random subset plus the output layer keeps the check quick.
        let mut picks: Vec<usize> = (0..40).map(|_| rng.random_range(0..params.len())).collect();
        picks.extend(params.len() - 8..params.len());
        for i in picks {
            let mut m = model.clone();
            let mut p = params.clone();
            p[i] = params[i] + eps;
            m.set_params(&p).unwrap();
            let up = m.loss(&data);
            p[i] = params[i] - eps;
            m.set_params(&p).unwrap();
            let down = m.loss(&data);
            let numeric = (up - down) / (2.0 * eps);
            let denom = numeric.abs().max(grad[i].abs()).max(1e-6);
            let rel = (numeric - grad[i]).abs() / denom;
            assert!(
                rel < 1e-4,
                "draw {draw} param {i}: analytic {} numeric {numeric} rel {rel}",
                grad[i]
            );
        }
    }
}
