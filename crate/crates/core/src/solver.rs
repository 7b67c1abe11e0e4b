//! Greedy row-sparse recovery: SNIHT and its Huber-criterion variant.
//!
//! Both solvers run projected gradient descent on a K-rowsparse signal
//! matrix. The Huber variant minimizes the jointly convex criterion
//!
//! ```text
//! Q(S, σ) = α·n·q·σ + Σᵢⱼ ρ((yᵢⱼ − (AS)ᵢⱼ)/σ)·σ
//! ```
//!
//! alternating a fixed-point scale update, a gradient step along
//! `Aᴴ ψ(E/σ)σ` with an adaptively chosen stepsize, and hard thresholding.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::doa::find_k_peaks;
use crate::error::{invalid, Error, Result};
use crate::loss::{ConsistencyFactors, LossFamily};
use crate::matrix::{hard_threshold, row_norms, row_support, ComplexMatrix, SupportSet};

/// Ratio between the Rayleigh median and the scale of CN(0, σ²) noise, rounded.
pub const MEDIAN_TO_SCALE: f64 = 1.201;

/// How the initial support is picked from the row norms of `Aᴴ ψ(Y/σ⁰)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSupportMode {
    /// The K largest row norms.
    #[default]
    TopK,
    /// The K largest local maxima of the row-norm sequence. Suited to
    /// dictionaries whose neighbouring columns are strongly coherent, such
    /// as a finely sampled steering grid.
    Peaks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Number of nonzero rows K.
    pub sparsity: usize,
    /// Explicit loss; when unset the Huber threshold is derived from `q_quantile`.
    pub loss: Option<LossFamily>,
    pub q_quantile: f64,
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Lower bound on the scale, relative to the initial scale estimate.
    pub sigma_floor_ratio: f64,
    pub init_support: InitSupportMode,
}

impl SolverConfig {
    pub fn new(sparsity: usize) -> Self {
        Self {
            sparsity,
            loss: None,
            q_quantile: 0.8,
            max_iter: 500,
            rel_tol: 1e-6,
            sigma_floor_ratio: 1e-12,
            init_support: InitSupportMode::TopK,
        }
    }

    pub fn with_loss(mut self, loss: LossFamily) -> Self {
        self.loss = Some(loss);
        self
    }

    pub fn with_init_support(mut self, mode: InitSupportMode) -> Self {
        self.init_support = mode;
        self
    }

    /// The loss the Huber solver will use.
    pub fn huber_loss(&self) -> Result<LossFamily> {
        match self.loss {
            Some(loss) => Ok(loss),
            None => LossFamily::huber_from_quantile(self.q_quantile),
        }
    }

    fn validate(&self, y: &ComplexMatrix, a: &ComplexMatrix) -> Result<()> {
        if y.rows() != a.rows() {
            return Err(invalid(format!(
                "measurements have {} rows but the dictionary has {}",
                y.rows(),
                a.rows()
            )));
        }
        if self.sparsity > a.cols() {
            return Err(invalid(format!(
                "sparsity {} exceeds dictionary width {}",
                self.sparsity,
                a.cols()
            )));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(invalid(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if !(self.sigma_floor_ratio > 0.0 && self.sigma_floor_ratio.is_finite()) {
            return Err(invalid("sigma_floor_ratio must be finite and positive"));
        }
        Ok(())
    }
}

/// Iterate of the solver after `iter` updates.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub s: ComplexMatrix,
    pub sigma: f64,
    pub mu: f64,
    /// Support used by the next stepsize computation.
    pub support: SupportSet,
    pub iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    /// Relative change below tolerance with an unchanged support.
    Converged,
    /// The gradient carries no energy on the support.
    Stationary,
    /// The stepsize update came out negative.
    NegativeStep,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub s_hat: ComplexMatrix,
    pub sigma_hat: f64,
    pub support: SupportSet,
    pub iterations: usize,
    pub converged: bool,
    pub halt: HaltReason,
    /// `Q(Sⁿ, σⁿ)` for n = 0..=iterations.
    pub objective_trace: Vec<f64>,
}

/// Huber-criterion objective `Q(S, σ)`.
pub fn objective_q(
    s: &ComplexMatrix,
    sigma: f64,
    y: &ComplexMatrix,
    a: &ComplexMatrix,
    factors: &ConsistencyFactors,
    loss: &LossFamily,
) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(invalid(format!("scale must be positive, got {sigma}")));
    }
    let e = y.sub(&a.matmul(s)?)?;
    Ok(objective_from_residual(&e, sigma, factors, loss))
}

fn objective_from_residual(e: &ComplexMatrix, sigma: f64, factors: &ConsistencyFactors, loss: &LossFamily) -> f64 {
    let nq = e.as_slice().len() as f64;
    let fit: f64 = e.as_slice().iter().map(|&r| loss.rho(r / sigma)).sum();
    factors.alpha * nq * sigma + fit * sigma
}

/// Initial scale: `1.201 · median |yᵢⱼ|`.
pub fn init_scale(y: &ComplexMatrix) -> Result<f64> {
    let mut moduli: Vec<f64> = y.as_slice().iter().map(|z| z.norm()).collect();
    moduli.sort_unstable_by(f64::total_cmp);
    let m = moduli.len();
    let median = if m % 2 == 1 {
        moduli[m / 2]
    } else {
        0.5 * (moduli[m / 2 - 1] + moduli[m / 2])
    };
    if median == 0.0 {
        let what = if y.is_zero() {
            "measurement matrix is identically zero"
        } else {
            "at least half of the measurements are exactly zero"
        };
        return Err(Error::DegenerateInput(what.into()));
    }
    Ok(MEDIAN_TO_SCALE * median)
}

/// Initial support from the correlations `Aᴴ ψ(Y/σ⁰)`.
pub fn init_support(
    y: &ComplexMatrix,
    a: &ComplexMatrix,
    sigma0: f64,
    k: usize,
    loss: &LossFamily,
    mode: InitSupportMode,
) -> Result<SupportSet> {
    if !(sigma0 > 0.0) {
        return Err(invalid(format!("initial scale must be positive, got {sigma0}")));
    }
    if k > a.cols() {
        return Err(invalid(format!("sparsity {k} exceeds dictionary width {}", a.cols())));
    }
    let scored = y.map(|z| loss.psi(z / sigma0));
    let corr = a.adjoint_mul(&scored)?;
    match mode {
        InitSupportMode::TopK => Ok(hard_threshold(&corr, k)?.1),
        InitSupportMode::Peaks => find_k_peaks(&row_norms(&corr), k),
    }
}

/// One fixed-point step of the scale estimating equation:
/// `σ'² = σ²/α · mean |ψ(eᵢⱼ/σ)|²`, floored at `sigma_floor`.
pub fn scale_update(
    e: &ComplexMatrix,
    sigma_n: f64,
    factors: &ConsistencyFactors,
    loss: &LossFamily,
    sigma_floor: f64,
) -> f64 {
    let nq = e.as_slice().len() as f64;
    let mean_chi = e.as_slice().iter().map(|&r| loss.chi(r / sigma_n)).sum::<f64>() / nq;
    let sigma = sigma_n * (mean_chi / factors.alpha).sqrt();
    sigma.max(sigma_floor)
}

/// Winsorized residuals `ψ(E/σ)·σ`.
pub fn pseudo_residual(e: &ComplexMatrix, sigma: f64, loss: &LossFamily) -> ComplexMatrix {
    match loss {
        LossFamily::LeastSquares => e.clone(),
        LossFamily::Huber { .. } => e.map(|r| loss.psi(r / sigma) * sigma),
    }
}

/// `A_Γ G_(Γ)`: the change in `AS` caused by a unit step along `G` restricted to `Γ`.
fn support_direction(a: &ComplexMatrix, g: &ComplexMatrix, support: &SupportSet) -> ComplexMatrix {
    let mut b = ComplexMatrix::zeros(a.rows(), g.cols());
    for k in support.iter() {
        let g_row = g.row(k);
        for i in 0..a.rows() {
            let coef = a[(i, k)];
            for (out, &gv) in b.row_mut(i).iter_mut().zip(g_row) {
                *out += coef * gv;
            }
        }
    }
    b
}

/// Scalar line search `min_μ L(μ) = Σ ρ((E − μB)/σ)` behind the stepsize.
#[derive(Debug, Clone)]
pub struct StepsizeProblem<'a> {
    residual: &'a ComplexMatrix,
    direction: ComplexMatrix,
    sigma: f64,
    loss: LossFamily,
}

impl<'a> StepsizeProblem<'a> {
    pub fn new(
        residual: &'a ComplexMatrix,
        a: &ComplexMatrix,
        g: &ComplexMatrix,
        support: &SupportSet,
        sigma: f64,
        loss: LossFamily,
    ) -> Result<Self> {
        if support.is_empty() {
            return Err(invalid("stepsize needs a nonempty support"));
        }
        if !(sigma > 0.0) {
            return Err(invalid(format!("scale must be positive, got {sigma}")));
        }
        if residual.rows() != a.rows() || g.rows() != a.cols() || g.cols() != residual.cols() {
            return Err(invalid(format!(
                "stepsize shapes do not conform: E {:?}, A {:?}, G {:?}",
                residual.shape(),
                a.shape(),
                g.shape()
            )));
        }
        if let Some(&bad) = support.as_slice().iter().find(|&&k| k >= a.cols()) {
            return Err(invalid(format!("support index {bad} out of range 0..{}", a.cols())));
        }
        Ok(Self {
            residual,
            direction: support_direction(a, g, support),
            sigma,
            loss,
        })
    }

    /// `B = A_Γ G_(Γ)`.
    pub fn direction(&self) -> &ComplexMatrix {
        &self.direction
    }

    /// `L(μ)`.
    pub fn objective(&self, mu: f64) -> f64 {
        self.residual
            .as_slice()
            .iter()
            .zip(self.direction.as_slice())
            .map(|(&e, &b)| self.loss.rho((e - b * mu) / self.sigma))
            .sum()
    }

    /// `H(μ) = Re⟨E, B⟩_{W(μ)} / ‖B‖²_{W(μ)}` with `W(μ) = w((E − μB)/σ)`.
    /// Returns 0 when the weighted norm of `B` vanishes.
    pub fn fixed_point_map(&self, mu: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (&e, &b) in self.residual.as_slice().iter().zip(self.direction.as_slice()) {
            let w = self.loss.weight((e - b * mu) / self.sigma);
            num += w * (e * b.conj()).re;
            den += w * b.norm_sqr();
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    /// Iterates `H` from `mu0` until successive values differ by at most `tol`.
    pub fn solve(&self, mu0: f64, tol: f64, max_iter: usize) -> f64 {
        let mut mu = mu0;
        for _ in 0..max_iter {
            let next = self.fixed_point_map(mu);
            if (next - mu).abs() <= tol {
                return next;
            }
            mu = next;
        }
        mu
    }
}

/// Stepsize update along `G` restricted to `Γ`.
///
/// Least squares uses the exact minimizer `‖G_(Γ)‖²/‖A_Γ G_(Γ)‖²`; Huber takes
/// a single fixed-point step `H(μⁿ)` warm-started at the previous stepsize.
pub fn compute_stepsize(
    e_n: &ComplexMatrix,
    a: &ComplexMatrix,
    g: &ComplexMatrix,
    support: &SupportSet,
    mu_n: f64,
    sigma: f64,
    loss: &LossFamily,
) -> Result<f64> {
    let problem = StepsizeProblem::new(e_n, a, g, support, sigma, *loss)?;
    let b_norm = problem.direction().norm_sqr();
    if b_norm == 0.0 {
        return Ok(0.0);
    }
    Ok(match loss {
        LossFamily::LeastSquares => {
            let g_norm: f64 = support.iter().flat_map(|k| g.row(k)).map(Complex64::norm_sqr).sum();
            g_norm / b_norm
        }
        LossFamily::Huber { .. } => problem.fixed_point_map(mu_n),
    })
}

/// `Y − A S`, touching only the nonzero rows of `S`.
fn residual(y: &ComplexMatrix, a: &ComplexMatrix, s: &ComplexMatrix) -> ComplexMatrix {
    let mut e = y.clone();
    for k in row_support(s, 0.0).iter() {
        let s_row = s.row(k);
        for i in 0..a.rows() {
            let coef = a[(i, k)];
            for (out, &sv) in e.row_mut(i).iter_mut().zip(s_row) {
                *out -= coef * sv;
            }
        }
    }
    e
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Variant {
    /// Least squares with the scale pinned at 1.
    Classic,
    /// Huber loss with joint scale estimation.
    Robust(LossFamily),
}

/// Step-by-step driver shared by [`sniht`] and [`hub_sniht`].
///
/// Exposes every iterate, which [`sniht`]/[`hub_sniht`] hide.
#[derive(Debug, Clone)]
pub struct Recovery<'a> {
    y: &'a ComplexMatrix,
    a: &'a ComplexMatrix,
    config: SolverConfig,
    variant: Variant,
    loss: LossFamily,
    factors: ConsistencyFactors,
    sigma_floor: f64,
    state: SolverState,
    residual: ComplexMatrix,
    trace: Vec<f64>,
    halt: Option<HaltReason>,
}

impl<'a> Recovery<'a> {
    /// Sets up the Huber-criterion solver.
    pub fn robust(y: &'a ComplexMatrix, a: &'a ComplexMatrix, config: &SolverConfig) -> Result<Self> {
        let loss = config.huber_loss()?;
        Self::start(y, a, config, Variant::Robust(loss))
    }

    /// Sets up classical SNIHT.
    pub fn classic(y: &'a ComplexMatrix, a: &'a ComplexMatrix, config: &SolverConfig) -> Result<Self> {
        Self::start(y, a, config, Variant::Classic)
    }

    fn start(y: &'a ComplexMatrix, a: &'a ComplexMatrix, config: &SolverConfig, variant: Variant) -> Result<Self> {
        config.validate(y, a)?;
        let loss = match variant {
            Variant::Classic => LossFamily::LeastSquares,
            Variant::Robust(loss) => loss,
        };
        let k = config.sparsity;
        let sigma0 = match variant {
            Variant::Robust(_) if k > 0 => init_scale(y)?,
            _ => 1.0,
        };
        let support = if k == 0 {
            SupportSet::empty()
        } else {
            init_support(y, a, sigma0, k, &loss, config.init_support)?
        };
        let factors = loss.consistency();
        let s = ComplexMatrix::zeros(a.cols(), y.cols());
        let trace = vec![objective_from_residual(y, sigma0, &factors, &loss)];
        let halt = (k == 0).then_some(HaltReason::Stationary);
        Ok(Self {
            y,
            a,
            config: config.clone(),
            variant,
            loss,
            factors,
            sigma_floor: config.sigma_floor_ratio * sigma0,
            state: SolverState {
                s,
                sigma: sigma0,
                mu: 0.0,
                support,
                iter: 0,
            },
            residual: y.clone(),
            trace,
            halt,
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn halted(&self) -> Option<HaltReason> {
        self.halt
    }

    /// Performs one iteration. Returns `false` once the solver has halted.
    pub fn step(&mut self) -> Result<bool> {
        if self.halt.is_some() {
            return Ok(false);
        }
        let iteration = self.state.iter;
        let fail = |quantity| Error::NumericFailure { iteration, quantity };
        let e = &self.residual;

        let sigma = match self.variant {
            Variant::Classic => self.state.sigma,
            Variant::Robust(loss) => scale_update(e, self.state.sigma, &self.factors, &loss, self.sigma_floor),
        };
        if !sigma.is_finite() {
            return Err(fail("scale"));
        }
        let e_psi = pseudo_residual(e, sigma, &self.loss);
        let g = self.a.adjoint_mul(&e_psi)?;

        if self.state.support.is_empty() {
            self.state.sigma = sigma;
            return Ok(self.stop(HaltReason::Stationary));
        }
        let mu = compute_stepsize(e, self.a, &g, &self.state.support, self.state.mu, sigma, &self.loss)?;
        if !mu.is_finite() {
            return Err(fail("stepsize"));
        }
        if mu <= 0.0 {
            self.state.sigma = sigma;
            self.state.mu = 0.0;
            let reason = if mu == 0.0 {
                HaltReason::Stationary
            } else {
                HaltReason::NegativeStep
            };
            return Ok(self.stop(reason));
        }

        let moved = self.state.s.add_scaled(Complex64::new(mu, 0.0), &g)?;
        let (s_next, support_next) = hard_threshold(&moved, self.config.sparsity)?;
        if !s_next.is_finite() {
            return Err(fail("signal"));
        }
        let change = s_next.sub(&self.state.s)?.norm();
        let previous = self.state.s.norm();
        let same_support = support_next == self.state.support;

        self.residual = residual(self.y, self.a, &s_next);
        self.trace.push(objective_from_residual(
            &self.residual,
            sigma,
            &self.factors,
            &self.loss,
        ));
        self.state = SolverState {
            s: s_next,
            sigma,
            mu,
            support: support_next,
            iter: iteration + 1,
        };

        if same_support && change <= self.config.rel_tol * previous {
            return Ok(self.stop(HaltReason::Converged));
        }
        if self.state.iter >= self.config.max_iter {
            return Ok(self.stop(HaltReason::MaxIterations));
        }
        Ok(true)
    }

    fn stop(&mut self, reason: HaltReason) -> bool {
        self.halt = Some(reason);
        false
    }

    /// Iterates until a halting rule fires.
    pub fn run(mut self) -> Result<RecoveryResult> {
        while self.step()? {}
        Ok(self.finish())
    }

    pub fn finish(self) -> RecoveryResult {
        let halt = self.halt.unwrap_or(HaltReason::MaxIterations);
        RecoveryResult {
            support: row_support(&self.state.s, 0.0),
            s_hat: self.state.s,
            sigma_hat: self.state.sigma,
            iterations: self.state.iter,
            converged: matches!(halt, HaltReason::Converged | HaltReason::Stationary),
            halt,
            objective_trace: self.trace,
        }
    }
}

/// Huber-criterion SNIHT with joint scale estimation.
pub fn hub_sniht(y: &ComplexMatrix, a: &ComplexMatrix, config: &SolverConfig) -> Result<RecoveryResult> {
    Recovery::robust(y, a, config)?.run()
}

/// Classical least-squares SNIHT.
pub fn sniht(y: &ComplexMatrix, a: &ComplexMatrix, config: &SolverConfig) -> Result<RecoveryResult> {
    Recovery::classic(y, a, config)?.run()
}
