//! Direction-of-arrival estimation on a half-wavelength uniform linear array.
//!
//! Sources are restricted to a grid of candidate angles, which turns the
//! snapshot matrix into an exact MMV model over the overcomplete steering
//! matrix; the support of the recovered signal matrix names the source
//! directions. Angles are in degrees at every public boundary.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::{top_k_indices, ComplexMatrix, SupportSet};

/// ULA response `a(θ)ₖ = e^{−iπk sin θ}` for k = 0..n.
pub fn steering_vector(theta_deg: f64, n: usize) -> Vec<Complex64> {
    let phase = -PI * theta_deg.to_radians().sin();
    (0..n).map(|k| Complex64::from_polar(1.0, phase * k as f64)).collect()
}

/// Candidate directions for an `sensors`-element array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringGrid {
    sensors: usize,
    angles: Vec<f64>,
}

impl SteeringGrid {
    pub fn new(sensors: usize, angles: Vec<f64>) -> Result<Self> {
        if sensors == 0 {
            return Err(invalid("array needs at least one sensor"));
        }
        if angles.is_empty() {
            return Err(invalid("grid needs at least one angle"));
        }
        if let Some(a) = angles.iter().find(|a| !(-90.0..=90.0).contains(*a)) {
            return Err(invalid(format!("grid angle {a} outside [-90, 90]")));
        }
        if angles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("grid angles must be strictly increasing"));
        }
        Ok(Self { sensors, angles })
    }

    /// `min, min + step, …` up to and including `max` (within rounding).
    pub fn uniform(sensors: usize, min: f64, step: f64, max: f64) -> Result<Self> {
        if !(step > 0.0) || !(max >= min) {
            return Err(invalid(format!("bad grid range {min}:{step}:{max}")));
        }
        let count = ((max - min) / step + 1e-9).floor() as usize + 1;
        Self::new(sensors, (0..count).map(|k| min + step * k as f64).collect())
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Grid index of `angle_deg`, if it is a grid point (to within 1e-9 degrees).
    pub fn index_of(&self, angle_deg: f64) -> Option<usize> {
        self.angles.iter().position(|a| (a - angle_deg).abs() < 1e-9)
    }
}

/// `n × p` matrix whose columns are the steering vectors of the grid angles.
pub fn steering_matrix(grid: &SteeringGrid) -> ComplexMatrix {
    let columns: Vec<Vec<Complex64>> = grid
        .angles()
        .iter()
        .map(|&theta| steering_vector(theta, grid.sensors()))
        .collect();
    ComplexMatrix::from_fn(grid.sensors(), grid.len(), |i, j| columns[j][i])
}

/// Draw from CN(0, 1): independent N(0, ½) real and imaginary parts.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Inverse Gaussian variate with the given mean and shape, via the
/// Michael–Schucany–Haas transformation.
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(rng: &mut R, mean: f64, shape: f64) -> f64 {
    let nu: f64 = StandardNormal.sample(rng);
    let y = nu * nu;
    // Smaller root of the quadratic, written to avoid cancellation.
    let x = if y == 0.0 {
        mean
    } else {
        let my = mean * y;
        let root = (4.0 * mean * shape * y + my * my).sqrt();
        4.0 * mean * mean * shape * y / ((my + root) * (my + root))
    };
    let u: f64 = rng.random();
    if u * (mean + x) <= mean {
        x
    } else {
        mean * mean / x
    }
}

/// Compound-Gaussian noise with inverse-Gaussian texture:
/// `εᵢⱼ = √τᵢⱼ · zᵢⱼ`, `τ ~ IG(1, λ)`, `z ~ CN(0, 1)`, so `E|ε|² = 1`.
pub fn sample_igcg_noise<R: Rng + ?Sized>(n: usize, q: usize, lambda: f64, rng: &mut R) -> ComplexMatrix {
    assert!(lambda > 0.0, "IG-CG shape must be positive");
    ComplexMatrix::from_fn(n, q, |_, _| {
        let tau = sample_inverse_gaussian(rng, 1.0, lambda);
        complex_normal(rng) * tau.sqrt()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    /// Circular complex Gaussian.
    Gaussian,
    /// Inverse-Gaussian compound Gaussian with texture shape `lambda`.
    Igcg { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// `E|ε|²`; zero gives noiseless snapshots.
    pub variance: f64,
}

impl NoiseModel {
    pub fn gaussian(variance: f64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            variance,
        }
    }

    pub fn igcg(lambda: f64, variance: f64) -> Self {
        Self {
            kind: NoiseKind::Igcg { lambda },
            variance,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, q: usize, rng: &mut R) -> ComplexMatrix {
        let unit = match self.kind {
            NoiseKind::Gaussian => ComplexMatrix::from_fn(n, q, |_, _| complex_normal(rng)),
            NoiseKind::Igcg { lambda } => sample_igcg_noise(n, q, lambda, rng),
        };
        unit.scale(Complex64::new(self.variance.sqrt(), 0.0))
    }
}

/// One Monte Carlo configuration of the source-localization problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: SteeringGrid,
    pub true_doa_indices: SupportSet,
    pub snapshots: usize,
    pub snr_db: f64,
    pub noise: NoiseModel,
}

impl Scenario {
    pub fn new(
        grid: SteeringGrid,
        true_doas_deg: &[f64],
        snapshots: usize,
        snr_db: f64,
        noise: NoiseModel,
    ) -> Result<Self> {
        let indices = true_doas_deg
            .iter()
            .map(|&d| {
                grid.index_of(d)
                    .ok_or_else(|| invalid(format!("true DOA {d} is not a grid point")))
            })
            .collect::<Result<Vec<_>>>()?;
        let true_doa_indices = SupportSet::new(indices, grid.len())?;
        if snapshots == 0 {
            return Err(invalid("need at least one snapshot"));
        }
        if !(noise.variance >= 0.0 && noise.variance.is_finite()) {
            return Err(invalid("noise variance must be finite and nonnegative"));
        }
        if let NoiseKind::Igcg { lambda } = noise.kind {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(invalid("IG-CG shape must be finite and positive"));
            }
        }
        Ok(Self {
            grid,
            true_doa_indices,
            snapshots,
            snr_db,
            noise,
        })
    }

    /// Per-source power `10^{SNR/10}`, relative to unit noise power.
    pub fn source_power(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }
}

/// Draws `(Y, S_true)` with `Y = A(θ̃)·S_true + E`.
///
/// The active rows of `S_true` hold i.i.d. CN(0, σₓ²) source waveforms.
pub fn simulate_snapshots<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> (ComplexMatrix, ComplexMatrix) {
    let p = scenario.grid.len();
    let q = scenario.snapshots;
    let amplitude = scenario.source_power().sqrt();
    let mut s = ComplexMatrix::zeros(p, q);
    for k in scenario.true_doa_indices.iter() {
        for v in s.row_mut(k) {
            *v = complex_normal(rng) * amplitude;
        }
    }
    let noise = scenario.noise.sample(scenario.grid.sensors(), q, rng);
    let y = steering_matrix(&scenario.grid)
        .matmul(&s)
        .and_then(|clean| clean.add(&noise))
        .expect("steering matrix matches the scenario grid");
    (y, s)
}

/// `(1/q) Y Yᴴ`.
pub fn sample_covariance(y: &ComplexMatrix) -> ComplexMatrix {
    let q = y.cols() as f64;
    let n = y.rows();
    let mut r = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: Complex64 = y
                .row(i)
                .iter()
                .zip(y.row(j))
                .map(|(a, b)| a * b.conj())
                .sum::<Complex64>()
                / q;
            r[(i, j)] = v;
            r[(j, i)] = v.conj();
        }
    }
    r
}

/// MUSIC pseudospectrum `1/‖Eₙᴴ a(θ)‖²` on every grid angle.
pub fn music_pseudospectrum(y: &ComplexMatrix, grid: &SteeringGrid, k: usize) -> Result<Vec<f64>> {
    let n = grid.sensors();
    if y.rows() != n {
        return Err(invalid(format!(
            "snapshots have {} rows, array has {n} sensors",
            y.rows()
        )));
    }
    if k >= n {
        return Err(invalid(format!("MUSIC needs fewer sources ({k}) than sensors ({n})")));
    }
    let r = sample_covariance(y);
    let eig = DMatrix::from_fn(n, n, |i, j| r[(i, j)]).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let noise_basis: Vec<usize> = order[..n - k].to_vec();

    Ok(grid
        .angles()
        .iter()
        .map(|&theta| {
            let a = steering_vector(theta, n);
            let denom: f64 = noise_basis
                .iter()
                .map(|&col| {
                    a.iter()
                        .enumerate()
                        .map(|(i, &ai)| eig.eigenvectors[(i, col)].conj() * ai)
                        .sum::<Complex64>()
                        .norm_sqr()
                })
                .sum();
            1.0 / denom.max(f64::MIN_POSITIVE)
        })
        .collect())
}

/// Grid indices of the K largest MUSIC pseudospectrum peaks.
pub fn music_estimate(y: &ComplexMatrix, grid: &SteeringGrid, k: usize) -> Result<SupportSet> {
    let spectrum = music_pseudospectrum(y, grid, k)?;
    find_k_peaks(&spectrum, k)
}

/// Indices of the `k` largest local maxima of `values`.
///
/// A run of equal values whose neighbours are strictly smaller (a missing
/// neighbour at either end counts as smaller) is one peak, located at the
/// run's first index. Peaks are ranked by value, ties to the lower index.
/// With fewer than `k` peaks the remaining slots take the largest non-peak
/// values.
pub fn find_k_peaks(values: &[f64], k: usize) -> Result<SupportSet> {
    let len = values.len();
    if k > len {
        return Err(invalid(format!("cannot pick {k} peaks from {len} values")));
    }
    let mut is_peak = vec![false; len];
    let mut start = 0;
    while start < len {
        let v = values[start];
        let mut end = start;
        while end + 1 < len && values[end + 1] == v {
            end += 1;
        }
        let left_lower = start == 0 || values[start - 1] < v;
        let right_lower = end + 1 == len || values[end + 1] < v;
        if left_lower && right_lower {
            is_peak[start] = true;
        }
        start = end + 1;
    }

    let ranked = top_k_indices(values, len);
    let mut picked: Vec<usize> = ranked.iter().copied().filter(|&i| is_peak[i]).take(k).collect();
    if picked.len() < k {
        let missing = k - picked.len();
        picked.extend(ranked.iter().copied().filter(|&i| !is_peak[i]).take(missing));
    }
    Ok(SupportSet::from_unchecked(picked))
}

/// Whether the estimated support equals the truth exactly.
pub fn exact_recovery(estimated: &SupportSet, truth: &SupportSet) -> bool {
    estimated == truth
}
