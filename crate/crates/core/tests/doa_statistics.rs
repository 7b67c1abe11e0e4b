mod common;

use mmv_huber::doa::{
    complex_normal, music_estimate, sample_covariance, sample_igcg_noise, sample_inverse_gaussian, simulate_snapshots,
    steering_matrix, NoiseModel, Scenario, SteeringGrid,
};
use mmv_huber::{Complex64, ComplexMatrix};
use nalgebra::DMatrix;

fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[test]
fn inverse_gaussian_texture_has_unit_mean_and_expected_variance() {
    let mut rng = common::rng(1);
    let lambda = 0.5;
    let draws: Vec<f64> = (0..400_000)
        .map(|_| sample_inverse_gaussian(&mut rng, 1.0, lambda))
        .collect();
    assert!(draws.iter().all(|&t| t > 0.0));
    let (mean, var) = moments(&draws);
    let std_err = (var / draws.len() as f64).sqrt();
    assert!((mean - 1.0).abs() <= 4.0 * std_err, "mean {mean}");
    // Var τ = mean³ / λ.
    assert!((var / (1.0 / lambda) - 1.0).abs() <= 0.05, "variance {var}");
}

#[test]
fn igcg_noise_has_unit_power_and_heavy_tails() {
    let mut rng = common::rng(2);
    let noise = sample_igcg_noise(1000, 1000, 0.1, &mut rng);
    let power: Vec<f64> = noise.as_slice().iter().map(|z| z.norm_sqr()).collect();
    let (mean, var) = moments(&power);
    let std_err = (var / power.len() as f64).sqrt();
    assert!((mean - 1.0).abs() <= 3.0 * std_err, "E|e|² = {mean} ± {std_err}");

    let re: Vec<f64> = noise.as_slice().iter().map(|z| z.re).collect();
    let m2 = re.iter().map(|x| x * x).sum::<f64>() / re.len() as f64;
    let m4 = re.iter().map(|x| x.powi(4)).sum::<f64>() / re.len() as f64;
    let kurtosis = m4 / (m2 * m2);
    // 3(1 + 1/λ) = 33 in theory; the sample estimate is noisy but far above 3.
    assert!(kurtosis > 10.0, "kurtosis {kurtosis}");
}

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks_statistic(mut x: Vec<f64>, mut y: Vec<f64>) -> f64 {
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / nx - j as f64 / ny).abs());
    }
    d
}

#[test]
fn igcg_with_huge_shape_is_indistinguishable_from_gaussian() {
    let mut rng = common::rng(3);
    let m = 100_000;
    let igcg = sample_igcg_noise(1, m, 1e6, &mut rng);
    let gauss: Vec<Complex64> = (0..m).map(|_| complex_normal(&mut rng)).collect();
    // Critical value at the 1% level: 1.628 · sqrt(2/m).
    let critical = 1.628 * (2.0 / m as f64).sqrt();
    let parts: [fn(&Complex64) -> f64; 3] = [|z| z.re, |z| z.im, |z| z.norm_sqr()];
    for part in parts {
        let d = ks_statistic(
            igcg.as_slice().iter().map(part).collect(),
            gauss.iter().map(part).collect(),
        );
        assert!(d < critical, "KS statistic {d} exceeds {critical}");
    }
}

#[test]
fn snapshot_covariance_matches_model() {
    let grid = SteeringGrid::uniform(8, -90.0, 2.0, 90.0).unwrap();
    let scenario = Scenario::new(grid.clone(), &[0.0, 8.0], 100_000, 0.0, NoiseModel::gaussian(1.0)).unwrap();
    let mut rng = common::rng(4);
    let (y, _) = simulate_snapshots(&scenario, &mut rng);
    let r = common::to_nalgebra(&sample_covariance(&y));

    let a = common::to_nalgebra(&steering_matrix(&grid));
    let cols: Vec<usize> = scenario.true_doa_indices.iter().collect();
    let a_gamma = DMatrix::from_fn(8, 2, |i, j| a[(i, cols[j])]);
    let power = Complex64::new(scenario.source_power(), 0.0);
    let model = &a_gamma * a_gamma.adjoint() * power + DMatrix::<Complex64>::identity(8, 8);

    let spectral = |m: &DMatrix<Complex64>| m.clone().singular_values()[0];
    let rel = spectral(&(&r - &model)) / spectral(&model);
    assert!(rel <= 0.05, "relative spectral deviation {rel}");
}

#[test]
fn music_is_invariant_to_measurement_scaling() {
    let grid = SteeringGrid::uniform(20, -90.0, 2.0, 90.0).unwrap();
    let scenario = Scenario::new(grid.clone(), &[-20.0, 30.0], 30, 0.0, NoiseModel::gaussian(1.0)).unwrap();
    for seed in 0..10 {
        let mut rng = common::rng(100 + seed);
        let (y, _) = simulate_snapshots(&scenario, &mut rng);
        let base = music_estimate(&y, &grid, 2).unwrap();
        for factor in [Complex64::new(1e-3, 0.0), Complex64::from_polar(7.5, 2.1)] {
            assert_eq!(music_estimate(&y.scale(factor), &grid, 2).unwrap(), base);
        }
    }
}

#[test]
fn noiseless_snapshots_lie_in_source_subspace() {
    let grid = SteeringGrid::uniform(20, -90.0, 2.0, 90.0).unwrap();
    let scenario = Scenario::new(grid.clone(), &[0.0, 8.0], 10, -10.0, NoiseModel::gaussian(0.0)).unwrap();
    let mut rng = common::rng(5);
    let (y, s) = simulate_snapshots(&scenario, &mut rng);
    let clean: ComplexMatrix = steering_matrix(&grid).matmul(&s).unwrap();
    assert_eq!(y, clean);
    assert_eq!(music_estimate(&y, &grid, 2).unwrap(), scenario.true_doa_indices);
}
