//! Instance generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use mmv_huber::doa::complex_normal;
use mmv_huber::{Complex64, ComplexMatrix, SupportSet};
use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// i.i.d. CN(0, 1) dictionary with unit-norm columns.
pub fn unit_column_dictionary(n: usize, p: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
    let mut a = gaussian_matrix(n, p, rng);
    for j in 0..p {
        let norm = a.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            a[(i, j)] /= norm;
        }
    }
    a
}

/// p×q signal with CN(0, 1) entries on `k` random rows.
pub fn row_sparse_signal(p: usize, q: usize, k: usize, rng: &mut ChaCha8Rng) -> (ComplexMatrix, SupportSet) {
    let rows = sample(rng, p, k).into_vec();
    let support = SupportSet::new(rows, p).unwrap();
    let mut s = ComplexMatrix::zeros(p, q);
    for i in support.iter() {
        for v in s.row_mut(i) {
            *v = complex_normal(rng);
        }
    }
    (s, support)
}

pub struct Instance {
    pub a: ComplexMatrix,
    pub s: ComplexMatrix,
    pub support: SupportSet,
    pub y: ComplexMatrix,
}

/// `Y = A S + noise_std · CN(0, 1)` with a unit-column Gaussian dictionary.
pub fn instance(n: usize, p: usize, k: usize, q: usize, noise_std: f64, seed: u64) -> Instance {
    let mut r = rng(seed);
    let a = unit_column_dictionary(n, p, &mut r);
    let (s, support) = row_sparse_signal(p, q, k, &mut r);
    let noise = gaussian_matrix(n, q, &mut r).scale(Complex64::new(noise_std, 0.0));
    let y = a.matmul(&s).unwrap().add(&noise).unwrap();
    Instance { a, s, support, y }
}

pub fn to_nalgebra(m: &ComplexMatrix) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// Best least-squares fit over every support of size `k`, by exhaustive search.
pub fn exhaustive_best_support(y: &ComplexMatrix, a: &ComplexMatrix, k: usize) -> (SupportSet, ComplexMatrix) {
    let p = a.cols();
    let y_na = to_nalgebra(y);
    let a_na = to_nalgebra(a);
    let mut best: Option<(f64, Vec<usize>, DMatrix<Complex64>)> = None;
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let sub = DMatrix::from_fn(a.rows(), k, |i, j| a_na[(i, subset[j])]);
        let svd = sub.clone().svd(true, true);
        let x = svd.solve(&y_na, 1e-12).unwrap();
        let resid = (&y_na - &sub * &x).norm();
        if best.as_ref().is_none_or(|b| resid < b.0) {
            best = Some((resid, subset.clone(), x));
        }
        // Next k-combination in lexicographic order.
        let mut i = k;
        while i > 0 && subset[i - 1] == p - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        subset[i - 1] += 1;
        for j in i..k {
            subset[j] = subset[j - 1] + 1;
        }
    }
    let (_, rows, x) = best.unwrap();
    let mut s = ComplexMatrix::zeros(p, y.cols());
    for (r, &row) in rows.iter().enumerate() {
        for j in 0..y.cols() {
            s[(row, j)] = x[(r, j)];
        }
    }
    (SupportSet::new(rows, p).unwrap(), s)
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Minimizes a convex scalar function over μ ≥ 0 by bracketing then golden section.
pub fn minimize_nonnegative(f: impl Fn(f64) -> f64) -> f64 {
    let mut hi = 1e-3;
    while f(hi) <= f(0.0) || f(2.0 * hi) < f(hi) {
        hi *= 2.0;
        assert!(hi < 1e12, "objective does not grow");
    }
    golden_section(&f, 0.0, 2.0 * hi, 1e-11)
}

pub fn relative_error(estimate: &ComplexMatrix, truth: &ComplexMatrix) -> f64 {
    estimate.sub(truth).unwrap().norm() / truth.norm()
}
