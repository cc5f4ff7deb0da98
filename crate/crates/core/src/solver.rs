//! ADMM solver for the adaptive graph-convolutional self-expressive model
//!
//! ```text
//! min_{F,C,Z}  ||2F - (C+I)X||^2 + alpha ||X - CF||^2 + beta ||C - CZ||^2
//! s.t.         C = Z,  C1 = 1,  Z = Z^T,  Z >= 0,  diag(Z) = 0
//! ```
//!
//! with augmented Lagrangian
//!
//! ```text
//! L = ||2F - (C+I)X||^2 + alpha ||X - CF||^2 + beta ||C - CZ||^2
//!     + <Gamma, C - Z> + <Lambda, C1 - 1> + mu/2 (||C - Z||^2 + ||C1 - 1||^2)
//! ```
//!
//! All norms are Frobenius and `<A, B> = tr(A^T B)`. Each iteration
//! minimizes `L` exactly over `C`, then `F`, then `Z` (every block is a
//! strongly convex quadratic with an SPD normal matrix, solved by Cholesky),
//! projects `Z` onto its constraint set, and takes a dual ascent step on
//! `Gamma`, `Lambda` with a geometrically growing penalty `mu`.
//!
//! The block solutions are the stationarity conditions of `L`:
//!
//! ```text
//! C (2XX^T + 2a FF^T + 2b (I-Z)(I-Z)^T + mu(I + 11^T))
//!     = 4FX^T - 2XX^T + 2a XF^T + mu Z + mu 11^T - Gamma - Lambda 1^T
//! (a C^T C + 4I) F = (2C + 2I + a C^T) X
//! (2b C^T C + mu I) Z = 2b C^T C + Gamma + mu C
//! ```

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Weight of the self-reconstruction term `||X - CF||^2`.
    pub alpha: f64,
    /// Weight of the idempotence term `||C - CZ||^2`.
    pub beta: f64,
    /// Initial penalty.
    pub mu0: f64,
    /// Penalty growth factor per iteration.
    pub rho: f64,
    /// Penalty cap.
    pub mu_max: f64,
    /// Stopping tolerance on both constraint residuals.
    pub epsilon: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            beta: 0.01,
            mu0: 1e-6,
            rho: 1.1,
            mu_max: 1e30,
            epsilon: 1e-7,
            max_iter: 1000,
        }
    }
}

impl SolverConfig {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self {
            alpha,
            beta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.alpha > 0.0, "alpha must be > 0"),
            (self.beta > 0.0, "beta must be > 0"),
            (self.mu0 > 0.0, "mu0 must be > 0"),
            (self.rho > 1.0, "rho must be > 1"),
            (self.mu_max >= self.mu0, "mu_max must be >= mu0"),
            (self.epsilon > 0.0, "epsilon must be > 0"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::InvalidArgument(msg.into()));
            }
        }
        let finite = [
            self.alpha,
            self.beta,
            self.mu0,
            self.rho,
            self.mu_max,
            self.epsilon,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "solver parameters must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Constraint residuals checked by the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `max |C - Z|`
    pub coupling: f64,
    /// `max |C1 - 1|`
    pub row_sum: f64,
}

impl Residuals {
    pub fn within(&self, epsilon: f64) -> bool {
        self.coupling <= epsilon && self.row_sum <= epsilon
    }
}

/// Per-iteration log entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub residuals: Residuals,
    /// `||C_{t+1} - C_t||_F^2`
    pub delta_c: f64,
    /// `||F_{t+1} - F_t||_F^2`
    pub delta_f: f64,
    /// `||Z_{t+1} - Z_t||_F^2`, measured after projection.
    pub delta_z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// Reconstruction coefficients, `n x n`.
    pub c: DMatrix<f64>,
    /// Aggregated features, `n x d`.
    pub f: DMatrix<f64>,
    /// Auxiliary copy of `C` carrying the structural constraints.
    pub z: DMatrix<f64>,
    /// Multiplier for `C = Z`.
    pub gamma: DMatrix<f64>,
    /// Multiplier for `C1 = 1`.
    pub lambda: DVector<f64>,
    pub mu: f64,
    pub iteration: usize,
    pub history: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub c: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    /// Penalty after the last iteration.
    pub mu: f64,
}

/// Point within an iteration at which the observer of [`solve_observed`]
/// fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Before the `C` update, with the multipliers of this iteration.
    Start,
    /// After the `C` update.
    C,
    /// After the `F` update.
    F,
    /// After the `Z` update, before projection.
    Z,
}

pub fn initialize(x: &DataMatrix, config: &SolverConfig) -> SolverState {
    let n = x.n();
    SolverState {
        c: DMatrix::zeros(n, n),
        f: x.values().clone(),
        z: DMatrix::zeros(n, n),
        gamma: DMatrix::zeros(n, n),
        lambda: DVector::zeros(n),
        mu: config.mu0,
        iteration: 0,
        history: Vec::new(),
    }
}

fn cholesky(m: DMatrix<f64>, system: &'static str, iteration: usize) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m).ok_or(Error::Factorization { system, iteration })
}

fn check_state(state: &SolverState, x: &DataMatrix) -> Result<()> {
    let n = x.n();
    let ok = state.c.shape() == (n, n)
        && state.z.shape() == (n, n)
        && state.gamma.shape() == (n, n)
        && state.lambda.len() == n
        && state.f.shape() == (n, x.d());
    if ok {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "solver state does not match a {}x{} data matrix",
            n,
            x.d()
        )))
    }
}

/// Exact minimizer of the augmented Lagrangian over `C`.
pub fn update_c(
    state: &SolverState,
    x: &DataMatrix,
    config: &SolverConfig,
) -> Result<DMatrix<f64>> {
    check_state(state, x)?;
    let gram = x.values() * x.values().transpose();
    c_block(state, x.values(), &gram, config)
}

fn c_block(
    state: &SolverState,
    x: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    config: &SolverConfig,
) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let mu = state.mu;
    let (alpha, beta) = (config.alpha, config.beta);

    let i_minus_z = DMatrix::identity(n, n) - &state.z;
    let mut system = gram * 2.0;
    system += (&state.f * state.f.transpose()) * (2.0 * alpha);
    system += (&i_minus_z * i_minus_z.transpose()) * (2.0 * beta);
    // mu (I + 11^T)
    system.add_scalar_mut(mu);
    for i in 0..n {
        system[(i, i)] += mu;
    }

    let fxt = &state.f * x.transpose();
    let mut rhs = &fxt * 4.0 - gram * 2.0 + fxt.transpose() * (2.0 * alpha);
    rhs += &state.z * mu;
    rhs.add_scalar_mut(mu);
    rhs -= &state.gamma;
    for j in 0..n {
        let mut col = rhs.column_mut(j);
        col -= &state.lambda;
    }

    // C M = R with M symmetric  <=>  M C^T = R^T
    let chol = cholesky(system, "C", state.iteration + 1)?;
    Ok(chol.solve(&rhs.transpose()).transpose())
}

/// Exact minimizer of the augmented Lagrangian over `F` given the current `C`.
pub fn update_f(
    state: &SolverState,
    x: &DataMatrix,
    config: &SolverConfig,
) -> Result<DMatrix<f64>> {
    check_state(state, x)?;
    let ctc = state.c.tr_mul(&state.c);
    f_block(state, x.values(), &ctc, config)
}

fn f_block(
    state: &SolverState,
    x: &DMatrix<f64>,
    ctc: &DMatrix<f64>,
    config: &SolverConfig,
) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let alpha = config.alpha;
    let mut system = ctc * alpha;
    for i in 0..n {
        system[(i, i)] += 4.0;
    }
    let mut mix = &state.c * 2.0 + state.c.transpose() * alpha;
    for i in 0..n {
        mix[(i, i)] += 2.0;
    }
    let rhs = mix * x;
    let chol = cholesky(system, "F", state.iteration + 1)?;
    Ok(chol.solve(&rhs))
}

/// Exact minimizer of the augmented Lagrangian over `Z` (before projection).
pub fn update_z(state: &SolverState, config: &SolverConfig) -> Result<DMatrix<f64>> {
    let ctc = state.c.tr_mul(&state.c);
    z_block(state, &ctc, config)
}

fn z_block(state: &SolverState, ctc: &DMatrix<f64>, config: &SolverConfig) -> Result<DMatrix<f64>> {
    let n = state.c.nrows();
    let mu = state.mu;
    let weighted = ctc * (2.0 * config.beta);
    let mut system = weighted.clone();
    for i in 0..n {
        system[(i, i)] += mu;
    }
    let rhs = weighted + &state.gamma + &state.c * mu;
    let chol = cholesky(system, "Z", state.iteration + 1)?;
    Ok(chol.solve(&rhs))
}

/// Maps `Z` onto `{Z = Z^T, Z >= 0, diag(Z) = 0}`: zero the diagonal, clamp
/// negatives, then average with the transpose.
pub fn project_z(z: &DMatrix<f64>) -> DMatrix<f64> {
    let n = z.nrows();
    let clean = |i: usize, j: usize| if i == j { 0.0 } else { z[(i, j)].max(0.0) };
    DMatrix::from_fn(n, n, |i, j| (clean(i, j) + clean(j, i)) / 2.0)
}

/// Dual ascent on both multipliers and the penalty schedule step.
pub fn update_multipliers(
    state: &SolverState,
    config: &SolverConfig,
) -> (DMatrix<f64>, DVector<f64>, f64) {
    let mu = state.mu;
    let gamma = &state.gamma + (&state.c - &state.z) * mu;
    let lambda = &state.lambda + row_sum_gap(&state.c) * mu;
    let next_mu = (config.rho * mu).min(config.mu_max);
    (gamma, lambda, next_mu)
}

/// `C1 - 1`
fn row_sum_gap(c: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(c.nrows(), c.row_iter().map(|r| r.sum() - 1.0))
}

pub fn residuals(state: &SolverState) -> Residuals {
    let coupling = state
        .c
        .iter()
        .zip(state.z.iter())
        .fold(0.0f64, |acc, (c, z)| acc.max((c - z).abs()));
    Residuals {
        coupling,
        row_sum: row_sum_gap(&state.c).amax(),
    }
}

pub fn augmented_lagrangian(state: &SolverState, x: &DataMatrix, config: &SolverConfig) -> f64 {
    let x = x.values();
    let n = x.nrows();
    let c_plus_i = &state.c + DMatrix::<f64>::identity(n, n);
    let fit = (&state.f * 2.0 - c_plus_i * x).norm_squared();
    let recon = (x - &state.c * &state.f).norm_squared();
    let idem = (&state.c - &state.c * &state.z).norm_squared();
    let gap = &state.c - &state.z;
    let rows = row_sum_gap(&state.c);
    fit + config.alpha * recon
        + config.beta * idem
        + state.gamma.dot(&gap)
        + state.lambda.dot(&rows)
        + state.mu / 2.0 * (gap.norm_squared() + rows.norm_squared())
}

pub fn solve(x: &DataMatrix, config: &SolverConfig) -> Result<SolverResult> {
    solve_observed(x, config, |_, _| {})
}

/// Runs the solver, calling `observer` at the start of each iteration and
/// after each block update. Within one iteration the multipliers and the
/// penalty seen by the observer do not change.
pub fn solve_observed<O>(
    x: &DataMatrix,
    config: &SolverConfig,
    mut observer: O,
) -> Result<SolverResult>
where
    O: FnMut(Stage, &SolverState),
{
    config.validate()?;
    if x.n() < 2 {
        return Err(Error::InvalidArgument(
            "at least 2 samples are required: C1 = 1 and diag(C) = 0 are infeasible for n = 1"
                .into(),
        ));
    }
    let gram = x.values() * x.values().transpose();
    let mut state = initialize(x, config);
    while state.iteration < config.max_iter && !residuals(&state).within(config.epsilon) {
        step(&mut state, x.values(), &gram, config, &mut observer)?;
    }
    let converged = residuals(&state).within(config.epsilon);
    Ok(SolverResult {
        converged,
        iterations: state.iteration,
        mu: state.mu,
        c: state.c,
        z: state.z,
        f: state.f,
        history: state.history,
    })
}

fn step<O>(
    state: &mut SolverState,
    x: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    config: &SolverConfig,
    observer: &mut O,
) -> Result<()>
where
    O: FnMut(Stage, &SolverState),
{
    observer(Stage::Start, state);
    let c = c_block(state, x, gram, config)?;
    let delta_c = (&c - &state.c).norm_squared();
    state.c = c;
    observer(Stage::C, state);

    let ctc = state.c.tr_mul(&state.c);
    let f = f_block(state, x, &ctc, config)?;
    let delta_f = (&f - &state.f).norm_squared();
    state.f = f;
    observer(Stage::F, state);

    let z = z_block(state, &ctc, config)?;
    let previous_z = std::mem::replace(&mut state.z, z);
    observer(Stage::Z, state);
    state.z = project_z(&state.z);
    let delta_z = (&state.z - previous_z).norm_squared();

    let (gamma, lambda, mu) = update_multipliers(state, config);
    state.gamma = gamma;
    state.lambda = lambda;
    state.mu = mu;
    state.iteration += 1;
    state.history.push(IterationRecord {
        residuals: residuals(state),
        delta_c,
        delta_f,
        delta_z,
    });
    Ok(())
}
