//! Reference implementations used as oracles by the integration tests.
//!
//! Nothing here calls into the code paths it is used to check: the
//! Lagrangian is evaluated with explicit loops, block gradients are taken
//! from the residual form of each term (not from the normal equations the
//! solver factors), and block minimizers are found by conjugate gradients
//! that only ever see those gradients.

#![allow(dead_code)]

use std::collections::HashMap;

use agcsc_core::solver::{initialize, project_z, SolverConfig, SolverState};
use agcsc_core::DataMatrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub x: DataMatrix,
    pub state: SolverState,
    pub config: SolverConfig,
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

/// Random data and a random state whose `Z` satisfies its constraints.
pub fn random_instance(n: usize, d: usize, mu: f64, alpha: f64, beta: f64, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DataMatrix::new(uniform(&mut rng, n, d, -1.0, 1.0)).unwrap();
    let config = SolverConfig::new(alpha, beta);
    let mut state = initialize(&x, &config);
    state.c = uniform(&mut rng, n, n, -0.2, 0.5);
    state.f = uniform(&mut rng, n, d, -1.0, 1.0);
    state.z = project_z(&uniform(&mut rng, n, n, -0.1, 0.4));
    state.gamma = uniform(&mut rng, n, n, -1.0, 1.0);
    state.lambda = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    state.mu = mu;
    Instance { x, state, config }
}

fn matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut acc = 0.0;
            for l in 0..a.ncols() {
                acc += a[(i, l)] * b[(l, j)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

fn frob2(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

fn eye(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
}

/// Term-by-term augmented Lagrangian with naive loops.
pub fn lagrangian(x: &DMatrix<f64>, s: &SolverState, alpha: f64, beta: f64) -> f64 {
    let n = x.nrows();
    let cx = matmul(&s.c, x);
    let fit = frob2(&DMatrix::from_fn(n, x.ncols(), |i, j| {
        2.0 * s.f[(i, j)] - cx[(i, j)] - x[(i, j)]
    }));
    let cf = matmul(&s.c, &s.f);
    let recon = frob2(&DMatrix::from_fn(n, x.ncols(), |i, j| {
        x[(i, j)] - cf[(i, j)]
    }));
    let cz = matmul(&s.c, &s.z);
    let idem = frob2(&DMatrix::from_fn(n, n, |i, j| s.c[(i, j)] - cz[(i, j)]));
    let mut inner_gamma = 0.0;
    let mut gap2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let g = s.c[(i, j)] - s.z[(i, j)];
            inner_gamma += s.gamma[(i, j)] * g;
            gap2 += g * g;
        }
    }
    let mut inner_lambda = 0.0;
    let mut rows2 = 0.0;
    for i in 0..n {
        let r: f64 = (0..n).map(|j| s.c[(i, j)]).sum::<f64>() - 1.0;
        inner_lambda += s.lambda[i] * r;
        rows2 += r * r;
    }
    fit + alpha * recon + beta * idem + inner_gamma + inner_lambda + s.mu / 2.0 * (gap2 + rows2)
}

fn ones_col(n: usize) -> DMatrix<f64> {
    DMatrix::from_element(n, 1, 1.0)
}

/// dL/dC from the residual form of each term.
pub fn grad_c(x: &DMatrix<f64>, s: &SolverState, alpha: f64, beta: f64) -> DMatrix<f64> {
    let n = x.nrows();
    let i = eye(n);
    let fit_res = &s.f * 2.0 - matmul(&(&s.c + &i), x);
    let recon_res = x - matmul(&s.c, &s.f);
    let idem_res = &s.c - matmul(&s.c, &s.z);
    let row_res = matmul(&s.c, &ones_col(n)) - ones_col(n);
    let lambda = DMatrix::from_column_slice(n, 1, s.lambda.as_slice());
    matmul(&fit_res, &x.transpose()) * -2.0
        + matmul(&recon_res, &s.f.transpose()) * (-2.0 * alpha)
        + matmul(&idem_res, &(&i - &s.z).transpose()) * (2.0 * beta)
        + &s.gamma
        + matmul(&lambda, &ones_col(n).transpose())
        + (&s.c - &s.z) * s.mu
        + matmul(&row_res, &ones_col(n).transpose()) * s.mu
}

/// dL/dF.
pub fn grad_f(x: &DMatrix<f64>, s: &SolverState, alpha: f64, _beta: f64) -> DMatrix<f64> {
    let n = x.nrows();
    let fit_res = &s.f * 2.0 - matmul(&(&s.c + eye(n)), x);
    let recon_res = x - matmul(&s.c, &s.f);
    fit_res * 4.0 + matmul(&s.c.transpose(), &recon_res) * (-2.0 * alpha)
}

/// dL/dZ (unconstrained).
pub fn grad_z(_x: &DMatrix<f64>, s: &SolverState, _alpha: f64, beta: f64) -> DMatrix<f64> {
    let idem_res = &s.c - matmul(&s.c, &s.z);
    matmul(&s.c.transpose(), &idem_res) * (-2.0 * beta) - &s.gamma - (&s.c - &s.z) * s.mu
}

/// Minimizes a convex quadratic given only its gradient, by conjugate
/// gradients with Hessian products taken as gradient differences. Restarts
/// from the true residual every `len` steps to shed rounding drift.
pub fn minimize_quadratic<G>(start: &DMatrix<f64>, grad: G) -> DMatrix<f64>
where
    G: Fn(&DMatrix<f64>) -> DMatrix<f64>,
{
    let zero = DMatrix::zeros(start.nrows(), start.ncols());
    let g0 = grad(&zero);
    let hess = |v: &DMatrix<f64>| {
        let scale = v.norm();
        if scale == 0.0 {
            return zero.clone();
        }
        (grad(&(v / scale)) - &g0) * scale
    };
    let scale = g0.norm().max(1.0);
    let mut x = start.clone();
    for _ in 0..30 {
        let mut r = -grad(&x);
        if r.norm() <= 1e-15 * scale {
            break;
        }
        let mut p = r.clone();
        let mut rr = r.norm_squared();
        for _ in 0..x.len() {
            let hp = hess(&p);
            let curvature = p.dot(&hp);
            if curvature <= 0.0 {
                break;
            }
            let step = rr / curvature;
            x += &p * step;
            r -= &hp * step;
            let next = r.norm_squared();
            if next.sqrt() <= 1e-15 * scale {
                break;
            }
            p = &r + &p * (next / rr);
            rr = next;
        }
    }
    x
}

/// Numerical minimizer of L over one block, holding the rest of `state`.
pub fn block_minimizer(inst: &Instance, block: char) -> DMatrix<f64> {
    let x = inst.x.values();
    let (a, b) = (inst.config.alpha, inst.config.beta);
    match block {
        'C' => minimize_quadratic(&inst.state.c, |v| {
            let mut s = inst.state.clone();
            s.c = v.clone();
            grad_c(x, &s, a, b)
        }),
        'F' => minimize_quadratic(&inst.state.f, |v| {
            let mut s = inst.state.clone();
            s.f = v.clone();
            grad_f(x, &s, a, b)
        }),
        'Z' => minimize_quadratic(&inst.state.z, |v| {
            let mut s = inst.state.clone();
            s.z = v.clone();
            grad_z(x, &s, a, b)
        }),
        _ => unreachable!(),
    }
}

/// Central-difference directional derivative of the oracle Lagrangian.
pub fn directional_derivative(
    inst: &Instance,
    block: char,
    point: &DMatrix<f64>,
    direction: &DMatrix<f64>,
    h: f64,
) -> f64 {
    let x = inst.x.values();
    let eval = |m: DMatrix<f64>| {
        let mut s = inst.state.clone();
        match block {
            'C' => s.c = m,
            'F' => s.f = m,
            'Z' => s.z = m,
            _ => unreachable!(),
        }
        lagrangian(x, &s, inst.config.alpha, inst.config.beta)
    };
    (eval(point + direction * h) - eval(point - direction * h)) / (2.0 * h)
}

/// Largest number of samples matched by any injective relabeling of the
/// predicted ids, found by enumerating every such relabeling.
pub fn brute_force_matches(pred: &[usize], truth: &[usize]) -> usize {
    let kp = pred.iter().max().map_or(0, |m| m + 1);
    let kt = truth.iter().max().map_or(0, |m| m + 1);
    fn go(
        p: usize,
        kp: usize,
        kt: usize,
        used: &mut Vec<bool>,
        map: &mut Vec<Option<usize>>,
        pred: &[usize],
        truth: &[usize],
    ) -> usize {
        if p == kp {
            return pred
                .iter()
                .zip(truth)
                .filter(|(&a, &b)| map[a] == Some(b))
                .count();
        }
        map[p] = None;
        let mut best = go(p + 1, kp, kt, used, map, pred, truth);
        for t in 0..kt {
            if !used[t] {
                used[t] = true;
                map[p] = Some(t);
                best = best.max(go(p + 1, kp, kt, used, map, pred, truth));
                used[t] = false;
            }
        }
        map[p] = None;
        best
    }
    go(
        0,
        kp,
        kt,
        &mut vec![false; kt],
        &mut vec![None; kp],
        pred,
        truth,
    )
}

/// NMI from the textbook identities `H = ln n - (1/n) sum c ln c` and
/// `I = H(U) + H(V) - H(U, V)`, with the same degenerate-case rule.
pub fn nmi_direct(pred: &[usize], truth: &[usize]) -> f64 {
    let n = pred.len() as f64;
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut a: HashMap<usize, f64> = HashMap::new();
    let mut b: HashMap<usize, f64> = HashMap::new();
    for (&p, &t) in pred.iter().zip(truth) {
        *joint.entry((p, t)).or_default() += 1.0;
        *a.entry(p).or_default() += 1.0;
        *b.entry(t).or_default() += 1.0;
    }
    let h = |counts: &mut dyn Iterator<Item = f64>| {
        n.ln() - counts.map(|c| c * c.ln()).sum::<f64>() / n
    };
    let ha = h(&mut a.values().copied());
    let hb = h(&mut b.values().copied());
    let hab = h(&mut joint.values().copied());
    if a.len() == 1 || b.len() == 1 {
        // same partition iff both have the same number of blocks as the join
        return if a.len() == joint.len() && b.len() == joint.len() {
            1.0
        } else {
            0.0
        };
    }
    (ha + hb - hab) / (ha * hb).sqrt()
}

/// Minimum within-cluster sum of squares over every split into two
/// nonempty groups.
pub fn brute_force_two_means(points: &DMatrix<f64>) -> f64 {
    let n = points.nrows();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << (n - 1)) {
        let mut total = 0.0;
        for side in [true, false] {
            let rows: Vec<usize> = (0..n).filter(|&i| ((mask >> i) & 1 == 1) == side).collect();
            let block = points.select_rows(&rows);
            let mean = block.row_mean();
            total += block
                .row_iter()
                .map(|r| (r - &mean).norm_squared())
                .sum::<f64>();
        }
        best = best.min(total);
    }
    best
}

/// All label vectors of length `n` over `0..k`.
pub fn all_labelings(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..k).map(move |l| {
                    let mut w = v.clone();
                    w.push(l);
                    w
                })
            })
            .collect();
    }
    out
}

/// Affinity with `k` planted groups of random sizes: strong random weights
/// inside groups, weak random weights across.
pub fn planted_affinity(n: usize, k: usize, seed: u64) -> (DMatrix<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n)
        .map(|i| if i < k { i } else { rng.random_range(0..k) })
        .collect();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let w = if labels[i] == labels[j] {
                rng.random_range(0.5..1.0)
            } else {
                rng.random_range(0.0..0.1)
            };
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
    }
    (a, labels)
}

/// Random permutation of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        p.swap(i, j);
    }
    p
}
