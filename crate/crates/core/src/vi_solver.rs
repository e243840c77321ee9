//! Solvers for the discrete variational inequality
//!
//! ```text
//!     minimize  J(u) = 1/2 u'Au - b'u   subject to   u_i <= c_i  (i constrained)
//! ```
//!
//! over a reduced SPD system, together with full KKT diagnostics. Three
//! interchangeable solvers are provided:
//!
//! * [`solve_psor`] - projected successive over-relaxation: Gauss-Seidel
//!   sweeps with immediate projection onto the bounds. Energy-decreasing for
//!   `omega` in `(0, 2)`; sweep order is the increasing reduced index, which
//!   makes the iteration bit-deterministic.
//! * [`solve_pdas`] - primal-dual active set: alternates exact
//!   equality-constrained solves (sparse skyline Cholesky) with
//!   multiplier-driven active-set updates; typically finitely convergent.
//! * [`solve_bruteforce`] - enumeration of all `2^k` active sets through a
//!   Schur complement on the constrained columns of `A^{-1}`. The oracle the
//!   other two are tested against; refuses more than 20 constraints.
//!
//! The multiplier convention: `mu = b - A u` restricted to the constrained
//! indices, so a solution satisfies `mu >= 0`, `u <= c` and
//! `mu_i (c_i - u_i) = 0`, the discrete face of the Signorini
//! complementarity conditions.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::SparseSystem;
use crate::linalg::dense_spd_solve;
use crate::sparse::{CsrMatrix, FactorError, SkylineCholesky};

/// Which admissible set the instance discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViLabel {
    /// Constraints on the rod-side nodes of a junction mesh.
    EpsProblem,
    /// Constraints on the `D0` closure nodes of a limit mesh.
    LimitProblem,
    Custom,
}

/// A sparse SPD quadratic program with nodal upper bounds.
#[derive(Debug, Clone)]
pub struct DiscreteVI {
    pub system: SparseSystem,
    /// `(reduced index, upper bound)`, sorted by index.
    pub constraints: Vec<(usize, f64)>,
    pub label: ViLabel,
}

impl DiscreteVI {
    pub fn new(
        system: SparseSystem,
        mut constraints: Vec<(usize, f64)>,
        label: ViLabel,
    ) -> DiscreteVI {
        constraints.sort_unstable_by_key(|&(i, _)| i);
        constraints.dedup_by_key(|&mut (i, _)| i);
        let n = system.n_reduced();
        assert!(
            constraints.iter().all(|&(i, _)| i < n),
            "constraint index out of range"
        );
        DiscreteVI {
            system,
            constraints,
            label,
        }
    }

    pub fn dim(&self) -> usize {
        self.system.n_reduced()
    }

    /// Default KKT tolerance, `1e-8 * (1 + |b|_inf)`.
    pub fn tol_kkt_default(&self) -> f64 {
        let b_inf = self.system.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        1e-8 * (1.0 + b_inf)
    }

    /// `J(u) = 1/2 u'Au - b'u`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        0.5 * self.system.a.bilinear(u, u)
            - self.system.b.iter().zip(u).map(|(b, u)| b * u).sum::<f64>()
    }

    /// Clamp a vector onto the feasible set.
    pub fn project(&self, u: &mut [f64]) {
        for &(i, c) in &self.constraints {
            if u[i] > c {
                u[i] = c;
            }
        }
    }
}

/// Solver parameters. `None` fields fall back to the documented defaults.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// PSOR relaxation factor in `(0, 2)`. Default 1.5.
    pub omega: f64,
    /// Update tolerance. Default 1e-10.
    pub tol: f64,
    /// KKT tolerance; default `1e-8 * (1 + |b|_inf)`.
    pub tol_kkt: Option<f64>,
    /// Iteration cap; default `200 * dim` sweeps for PSOR, 50 for PDAS.
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            omega: 1.5,
            tol: 1e-10,
            tol_kkt: None,
            max_iter: None,
        }
    }
}

/// Solver selection for batch runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Psor,
    Pdas,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "psor" => Ok(Method::Psor),
            "pdas" => Ok(Method::Pdas),
            other => Err(format!("unknown method '{other}' (expected psor|pdas)")),
        }
    }
}

/// Dispatch on the configured solver.
pub fn solve_vi(
    vi: &DiscreteVI,
    method: Method,
    opts: &SolverOptions,
) -> Result<SolveResult, SolveError> {
    match method {
        Method::Psor => Ok(solve_psor(vi, opts)),
        Method::Pdas => solve_pdas(vi, opts),
    }
}

/// The four KKT violation maxima of a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResidual {
    /// `max(0, u_i - c_i)` over constrained `i`.
    pub feasibility: f64,
    /// `max(0, -mu_i)` over constrained `i`.
    pub sign: f64,
    /// `max |mu_i (c_i - u_i)|` over constrained `i`.
    pub complementarity: f64,
    /// `max |(A u - b)_i|` over unconstrained `i`.
    pub stationarity: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.feasibility
            .max(self.sign)
            .max(self.complementarity)
            .max(self.stationarity)
    }
}

/// Evaluate the KKT residuals of an arbitrary candidate `u`.
pub fn kkt_residual(vi: &DiscreteVI, u: &[f64]) -> KktResidual {
    let residual = residual_vector(vi, u);
    let mut constrained = vec![false; vi.dim()];
    let mut feasibility = 0.0f64;
    let mut sign = 0.0f64;
    let mut complementarity = 0.0f64;
    for &(i, c) in &vi.constraints {
        constrained[i] = true;
        let mu = residual[i];
        feasibility = feasibility.max(u[i] - c);
        sign = sign.max(-mu);
        complementarity = complementarity.max((mu * (c - u[i])).abs());
    }
    let mut stationarity = 0.0f64;
    for i in 0..vi.dim() {
        if !constrained[i] {
            stationarity = stationarity.max(residual[i].abs());
        }
    }
    KktResidual {
        feasibility: feasibility.max(0.0),
        sign: sign.max(0.0),
        complementarity,
        stationarity,
    }
}

/// `b - A u`.
fn residual_vector(vi: &DiscreteVI, u: &[f64]) -> Vec<f64> {
    let mut r = vi.system.a.matvec_alloc(u);
    for (ri, bi) in r.iter_mut().zip(&vi.system.b) {
        *ri = bi - *ri;
    }
    r
}

/// One line of per-iteration solver history.
#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    pub iter: usize,
    pub max_update: f64,
    pub kkt_max: f64,
    pub energy: f64,
}

/// Solver output. `converged = false` flags an exhausted iteration budget or
/// a detected active-set cycle; the history is returned either way.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Reduced solution vector.
    pub u: Vec<f64>,
    /// Multipliers `(b - A u)_i`, aligned with `vi.constraints`.
    pub mu: Vec<f64>,
    /// Constrained reduced indices with `u_i >= c_i - 1e-9` (reporting
    /// tolerance only; solvers compare exactly).
    pub active_set: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error("brute-force enumeration refuses {0} constraints (limit 20)")]
    TooManyConstraints(usize),
    #[error("no KKT-consistent active set found (assembly defect?)")]
    NoKktPoint,
}

const ACTIVE_REPORT_TOL: f64 = 1e-9;

fn finish(vi: &DiscreteVI, u: Vec<f64>, iterations: usize, converged: bool,
          history: Vec<IterationRecord>) -> SolveResult {
    let residual = residual_vector(vi, &u);
    let mu: Vec<f64> = vi.constraints.iter().map(|&(i, _)| residual[i]).collect();
    let active_set: Vec<usize> = vi
        .constraints
        .iter()
        .filter(|&&(i, c)| u[i] >= c - ACTIVE_REPORT_TOL)
        .map(|&(i, _)| i)
        .collect();
    SolveResult {
        u,
        mu,
        active_set,
        iterations,
        converged,
        history,
    }
}

/// Projected SOR on the bound-constrained quadratic program.
///
/// Starts from the projection of zero; sweeps nodes in increasing reduced
/// index with immediate projection, so the iteration is deterministic. Stops
/// when the largest nodal update falls below `tol * (1 + max|u|)` and the
/// KKT residual below `tol_kkt`.
pub fn solve_psor(vi: &DiscreteVI, opts: &SolverOptions) -> SolveResult {
    assert!(opts.omega > 0.0 && opts.omega < 2.0, "omega must lie in (0,2)");
    let n = vi.dim();
    let a = &vi.system.a;
    let b = &vi.system.b;
    let tol_kkt = opts.tol_kkt.unwrap_or_else(|| vi.tol_kkt_default());
    let max_iter = opts.max_iter.unwrap_or(200 * n.max(1));

    let mut bound = vec![f64::INFINITY; n];
    for &(i, c) in &vi.constraints {
        bound[i] = c;
    }
    let mut u = vec![0.0f64; n];
    vi.project(&mut u);

    let diag = a.diagonal();
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut max_update = 0.0f64;
        let mut max_abs = 0.0f64;
        for i in 0..n {
            let (cols, vals) = a.row(i);
            let mut sigma = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                if *c != i {
                    sigma += v * u[*c];
                }
            }
            let gs = (b[i] - sigma) / diag[i];
            let mut next = u[i] + opts.omega * (gs - u[i]);
            if next > bound[i] {
                next = bound[i];
            }
            max_update = max_update.max((next - u[i]).abs());
            u[i] = next;
            max_abs = max_abs.max(next.abs());
        }
        let kkt = kkt_residual(vi, &u);
        history.push(IterationRecord {
            iter: iterations,
            max_update,
            kkt_max: kkt.max(),
            energy: vi.energy(&u),
        });
        if max_update < opts.tol * (1.0 + max_abs) && kkt.max() < tol_kkt {
            converged = true;
            break;
        }
    }
    finish(vi, u, iterations, converged, history)
}

/// Primal-dual active set iteration, starting from the empty active set.
pub fn solve_pdas(vi: &DiscreteVI, opts: &SolverOptions) -> Result<SolveResult, SolveError> {
    solve_pdas_from(vi, opts, &BTreeSet::new())
}

/// Primal-dual active set iteration from a caller-chosen initial guess.
///
/// Each step pins `u_i = c_i` on the guessed active set, solves the
/// complementary equality-constrained system exactly (skyline Cholesky,
/// refactorized per active-set change), computes the multipliers and
/// re-guesses: a constraint stays active if its multiplier is positive and
/// joins if its bound is violated. Terminates when the set repeats itself;
/// a revisit of an older set (a cycle, excluded for the systems assembled
/// here but checked anyway) is flagged as non-convergence.
pub fn solve_pdas_from(
    vi: &DiscreteVI,
    opts: &SolverOptions,
    initial_active: &BTreeSet<usize>,
) -> Result<SolveResult, SolveError> {
    let n = vi.dim();
    let a = &vi.system.a;
    let b = &vi.system.b;
    let max_iter = opts.max_iter.unwrap_or(50);
    let constrained_ids: Vec<usize> = vi.constraints.iter().map(|&(i, _)| i).collect();
    let mut bound = vec![0.0f64; n];
    for &(i, c) in &vi.constraints {
        bound[i] = c;
    }

    let mut active: BTreeSet<usize> = initial_active
        .iter()
        .copied()
        .filter(|i| constrained_ids.binary_search(i).is_ok())
        .collect();
    let mut seen: Vec<BTreeSet<usize>> = Vec::new();
    let mut history = Vec::new();
    let mut u = vec![0.0f64; n];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        // pin active nodes, solve for the rest
        let mut pinned = vec![0.0f64; n];
        for &i in &active {
            pinned[i] = bound[i];
        }
        let a_pinned = a.matvec_alloc(&pinned);
        let free: Vec<usize> = (0..n).filter(|i| !active.contains(i)).collect();
        let rhs: Vec<f64> = free.iter().map(|&i| b[i] - a_pinned[i]).collect();
        let sub = a.submatrix(&free);
        let chol = SkylineCholesky::factor(&sub)?;
        let u_free = chol.solve(&rhs);
        u = pinned;
        for (k, &i) in free.iter().enumerate() {
            u[i] = u_free[k];
        }

        // multipliers and the next guess: mu + sigma (u - c) > 0, sigma = 1
        let residual = residual_vector(vi, &u);
        let mut next: BTreeSet<usize> = BTreeSet::new();
        for &(i, c) in &vi.constraints {
            let was_active = active.contains(&i);
            let take = if was_active {
                residual[i] > 0.0
            } else {
                u[i] > c
            };
            if take {
                next.insert(i);
            }
        }
        let kkt = kkt_residual(vi, &u);
        history.push(IterationRecord {
            iter: iterations,
            max_update: f64::NAN,
            kkt_max: kkt.max(),
            energy: vi.energy(&u),
        });
        if next == active {
            converged = true;
            break;
        }
        if seen.contains(&next) {
            // cycle without a fixed point
            break;
        }
        seen.push(std::mem::replace(&mut active, next));
    }
    Ok(finish(vi, u, iterations, converged, history))
}

/// Enumerate all `2^k` active sets and return the unique KKT point.
///
/// Factors `A` once, pulls the constrained columns of `A^{-1}` and walks the
/// subsets through dense Schur-complement solves, so the per-subset cost is
/// `O(k^3)` instead of a full sparse solve.
pub fn solve_bruteforce(vi: &DiscreteVI) -> Result<SolveResult, SolveError> {
    let k = vi.constraints.len();
    if k > 20 {
        return Err(SolveError::TooManyConstraints(k));
    }
    let n = vi.dim();
    let chol = SkylineCholesky::factor(&vi.system.a)?;
    let u0 = chol.solve(&vi.system.b);
    if k == 0 {
        return Ok(finish(vi, u0, 1, true, Vec::new()));
    }
    // columns of A^{-1} on the constrained indices, and their Gram block
    let mut w_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    for &(i, _) in &vi.constraints {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        w_cols.push(chol.solve(&e));
    }
    let gram: Vec<f64> = (0..k)
        .flat_map(|p| {
            let row_idx = vi.constraints[p].0;
            (0..k).map(move |q| (row_idx, q))
        })
        .map(|(row_idx, q)| w_cols[q][row_idx])
        .collect();

    let tol = 1e-9 * (1.0 + u0.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let mut found: Option<(u32, Vec<f64>)> = None;
    let mut scanned = 0usize;
    'subsets: for mask in 0u32..(1u32 << k) {
        scanned += 1;
        let members: Vec<usize> = (0..k).filter(|p| mask >> p & 1 == 1).collect();
        let s = members.len();
        // solve G_SS lambda = (c - u0)_S
        let mut g_ss = vec![0.0f64; s * s];
        let mut rhs = vec![0.0f64; s];
        for (pi, &p) in members.iter().enumerate() {
            for (qi, &q) in members.iter().enumerate() {
                g_ss[pi * s + qi] = gram[p * k + q];
            }
            let (idx, c) = vi.constraints[p];
            rhs[pi] = c - u0[idx];
        }
        let lambda = match dense_spd_solve(&g_ss, &rhs) {
            Some(l) => l,
            None => continue,
        };
        // dual sign: mu = -lambda >= 0
        for &l in &lambda {
            if -l < -tol {
                continue 'subsets;
            }
        }
        // primal feasibility on the complement
        for p in 0..k {
            if mask >> p & 1 == 1 {
                continue;
            }
            let (idx, c) = vi.constraints[p];
            let mut val = u0[idx];
            for (pi, &m) in members.iter().enumerate() {
                val += gram[p * k + m] * lambda[pi];
            }
            if val > c + tol {
                continue 'subsets;
            }
        }
        let mut u = u0.clone();
        for (pi, &m) in members.iter().enumerate() {
            let col = &w_cols[m];
            for i in 0..n {
                u[i] += col[i] * lambda[pi];
            }
        }
        found = Some((mask, u));
        break;
    }
    match found {
        Some((_, u)) => Ok(finish(vi, u, scanned, true, Vec::new())),
        None => Err(SolveError::NoKktPoint),
    }
}

/// All KKT-consistent active-set bitmasks (test hook for the uniqueness
/// property; same tolerance policy as [`solve_bruteforce`]).
pub fn bruteforce_kkt_candidates(vi: &DiscreteVI) -> Result<Vec<u32>, SolveError> {
    let k = vi.constraints.len();
    if k > 20 {
        return Err(SolveError::TooManyConstraints(k));
    }
    let chol = SkylineCholesky::factor(&vi.system.a)?;
    let u0 = chol.solve(&vi.system.b);
    let n = vi.dim();
    let mut w_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    for &(i, _) in &vi.constraints {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        w_cols.push(chol.solve(&e));
    }
    let tol = 1e-9 * (1.0 + u0.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let mut hits = Vec::new();
    'subsets: for mask in 0u32..(1u32 << k) {
        let members: Vec<usize> = (0..k).filter(|p| mask >> p & 1 == 1).collect();
        let s = members.len();
        let mut g_ss = vec![0.0f64; s * s];
        let mut rhs = vec![0.0f64; s];
        for (pi, &p) in members.iter().enumerate() {
            for (qi, &q) in members.iter().enumerate() {
                g_ss[pi * s + qi] = w_cols[q][vi.constraints[p].0];
            }
            let (idx, c) = vi.constraints[p];
            rhs[pi] = c - u0[idx];
        }
        let lambda = match dense_spd_solve(&g_ss, &rhs) {
            Some(l) => l,
            None => continue,
        };
        if lambda.iter().any(|&l| -l < -tol) {
            continue;
        }
        for p in 0..k {
            if mask >> p & 1 == 1 {
                continue;
            }
            let (idx, c) = vi.constraints[p];
            let mut val = u0[idx];
            for (pi, &m) in members.iter().enumerate() {
                val += w_cols[m][idx] * lambda[pi];
            }
            if val > c + tol {
                continue 'subsets;
            }
        }
        hits.push(mask);
    }
    Ok(hits)
}

/// Report of the discrete equivalence checks between the equality/inequality
/// and the single-inequality forms of the weak problem.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    /// `u'A(u - g_vec)` with `g_vec` the bounds on constrained indices and
    /// zero elsewhere.
    pub equality_lhs: f64,
    /// `b'(u - g_vec)`.
    pub equality_rhs: f64,
    /// `|lhs - rhs| / (1 + max(|lhs|, |rhs|))`.
    pub equality_residual: f64,
    /// Worst `max(0, -(Au - b)'(phi - u))` over the random feasible trials.
    pub max_inequality_violation: f64,
    /// Index of the worst trial, if any violated.
    pub witness_trial: Option<usize>,
}

/// Verify the discrete counterparts of the defining identities of a weak
/// solution: the energy equality against the obstacle datum, and the
/// variational inequality against `trial_count` random feasible fields.
pub fn check_definitions_equivalence(
    vi: &DiscreteVI,
    u: &[f64],
    trial_count: usize,
    seed: u64,
) -> EquivalenceReport {
    let n = vi.dim();
    let mut g_vec = vec![0.0f64; n];
    for &(i, c) in &vi.constraints {
        g_vec[i] = c;
    }
    let u_minus_g: Vec<f64> = u.iter().zip(&g_vec).map(|(u, g)| u - g).collect();
    let equality_lhs = vi.system.a.bilinear(u, &u_minus_g);
    let equality_rhs: f64 = vi
        .system
        .b
        .iter()
        .zip(&u_minus_g)
        .map(|(b, v)| b * v)
        .sum();
    let equality_residual =
        (equality_lhs - equality_rhs).abs() / (1.0 + equality_lhs.abs().max(equality_rhs.abs()));

    let grad = {
        // A u - b
        let mut r = vi.system.a.matvec_alloc(u);
        for (ri, bi) in r.iter_mut().zip(&vi.system.b) {
            *ri -= bi;
        }
        r
    };
    let scale = 1.0 + u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation = 0.0f64;
    let mut witness_trial = None;
    for t in 0..trial_count {
        let mut phi: Vec<f64> = (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        vi.project(&mut phi);
        let dot: f64 = grad.iter().zip(phi.iter().zip(u)).map(|(g, (p, u))| g * (p - u)).sum();
        let violation = (-dot).max(0.0);
        if violation > max_violation {
            max_violation = violation;
            witness_trial = Some(t);
        }
    }
    EquivalenceReport {
        equality_lhs,
        equality_rhs,
        equality_residual,
        max_inequality_violation: max_violation,
        witness_trial,
    }
}

/// Worst violation of the Minty-form inequality
/// `(A phi - b)'(phi - u) >= 0` over `trial_count` random feasible `phi`.
///
/// For an SPD `A` this follows from the plain inequality plus convexity, so
/// it cross-checks the solved `u` through a different algebraic route.
pub fn check_minty(vi: &DiscreteVI, u: &[f64], trial_count: usize, seed: u64) -> f64 {
    let n = vi.dim();
    let scale = 1.0 + u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trial_count {
        let mut phi: Vec<f64> = (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        vi.project(&mut phi);
        let a_phi = vi.system.a.matvec_alloc(&phi);
        let dot: f64 = (0..n)
            .map(|i| (a_phi[i] - vi.system.b[i]) * (phi[i] - u[i]))
            .sum();
        worst = worst.max(-dot);
    }
    worst
}

/// Random SPD instance with `k` upper bounds, for solver validation.
///
/// Deterministic in `seed`; condition numbers stay moderate so the
/// brute-force oracle's tolerance policy is meaningful.
pub fn random_spd_instance(dim: usize, k: usize, seed: u64) -> DiscreteVI {
    assert!(k <= dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = vec![0.0f64; dim * dim];
    for v in m.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    // A = M'M/dim + 0.5 I
    let mut triplets = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = 0.0;
            for r in 0..dim {
                acc += m[r * dim + i] * m[r * dim + j];
            }
            let mut v = acc / dim as f64;
            if i == j {
                v += 0.5;
            }
            triplets.push((i, j, v));
        }
    }
    let a = CsrMatrix::from_triplets(dim, &mut triplets);
    let b: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut indices: Vec<usize> = (0..dim).collect();
    for i in 0..k {
        let j = rng.gen_range(i..dim);
        indices.swap(i, j);
    }
    let constraints: Vec<(usize, f64)> = indices[..k]
        .iter()
        .map(|&i| (i, rng.gen_range(-1.0..1.0)))
        .collect();
    let system = SparseSystem {
        a,
        b,
        dirichlet: Vec::new(),
        free_nodes: (0..dim).collect(),
        free_map: (0..dim).map(Some).collect(),
    };
    DiscreteVI::new(system, constraints, ViLabel::Custom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// The 2x2 instance used across the solver examples:
    /// A = [[2,-1],[-1,2]], b = (1,1).
    fn two_by_two(constraints: Vec<(usize, f64)>) -> DiscreteVI {
        let mut t = vec![
            (0usize, 0usize, 2.0),
            (0, 1, -1.0),
            (1, 0, -1.0),
            (1, 1, 2.0),
        ];
        let a = CsrMatrix::from_triplets(2, &mut t);
        let system = SparseSystem {
            a,
            b: vec![1.0, 1.0],
            dirichlet: Vec::new(),
            free_nodes: vec![0, 1],
            free_map: vec![Some(0), Some(1)],
        };
        DiscreteVI::new(system, constraints, ViLabel::Custom)
    }

    #[test]
    fn psor_unconstrained_solves_linear_system() {
        let vi = two_by_two(vec![]);
        let res = solve_psor(&vi, &SolverOptions::default());
        assert!(res.converged);
        assert_relative_eq!(res.u[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(res.u[1], 1.0, epsilon = 1e-9);
        assert!(res.active_set.is_empty());
    }

    #[test]
    fn psor_active_bound() {
        // oracle (active-set enumeration by hand): binding u0 <= 0 gives
        // u = (0, 1/2), mu0 = b0 - (A u)0 = 1 - (-1/2) = 3/2 >= 0.
        let vi = two_by_two(vec![(0, 0.0)]);
        let res = solve_psor(&vi, &SolverOptions::default());
        assert!(res.converged);
        assert_relative_eq!(res.u[0], 0.0, epsilon = 1e-10);
        assert_relative_eq!(res.u[1], 0.5, epsilon = 1e-9);
        assert_relative_eq!(res.mu[0], 1.5, epsilon = 1e-8);
        assert_eq!(res.active_set, vec![0]);
    }

    #[test]
    fn psor_inactive_bound() {
        let vi = two_by_two(vec![(0, 10.0)]);
        let res = solve_psor(&vi, &SolverOptions::default());
        assert!(res.converged);
        assert_relative_eq!(res.u[0], 1.0, epsilon = 1e-9);
        assert!(res.active_set.is_empty());
    }

    #[test]
    fn pdas_matches_psor_on_examples() {
        for constraints in [vec![], vec![(0, 0.0)], vec![(0, 10.0)]] {
            let vi = two_by_two(constraints);
            let psor = solve_psor(&vi, &SolverOptions::default());
            let pdas = solve_pdas(&vi, &SolverOptions::default()).unwrap();
            assert!(pdas.converged);
            for i in 0..2 {
                assert!((psor.u[i] - pdas.u[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn bruteforce_is_the_oracle() {
        let vi = two_by_two(vec![(0, 0.0)]);
        let res = solve_bruteforce(&vi).unwrap();
        assert_relative_eq!(res.u[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(res.u[1], 0.5, epsilon = 1e-12);
        let kkt = kkt_residual(&vi, &res.u);
        assert!(kkt.max() < 1e-10);

        // k = 0 degenerates to the plain solve
        let vi = two_by_two(vec![]);
        let res = solve_bruteforce(&vi).unwrap();
        assert_relative_eq!(res.u[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bruteforce_refuses_large_enumerations() {
        let vi = random_spd_instance(40, 21, 0);
        assert!(matches!(
            solve_bruteforce(&vi),
            Err(SolveError::TooManyConstraints(21))
        ));
    }

    #[test]
    fn pdas_zero_load_converges_immediately() {
        let mut vi = random_spd_instance(20, 5, 1);
        vi.system.b = vec![0.0; 20];
        for c in vi.constraints.iter_mut() {
            c.1 = c.1.abs(); // all bounds >= 0
        }
        let res = solve_pdas(&vi, &SolverOptions::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
        assert!(res.u.iter().all(|&v| v.abs() < 1e-14));
        assert!(res.active_set.is_empty());
    }

    #[test]
    fn solvers_agree_on_random_instances() {
        for seed in 0..25u64 {
            let dim = 8 + (seed as usize * 7) % 40;
            let k = (seed as usize * 3) % 13;
            let vi = random_spd_instance(dim, k, 1000 + seed);
            let psor = solve_psor(&vi, &SolverOptions::default());
            let pdas = solve_pdas(&vi, &SolverOptions::default()).unwrap();
            let brute = solve_bruteforce(&vi).unwrap();
            assert!(psor.converged && pdas.converged, "seed {seed}");
            let scale = 1.0 + brute.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..dim {
                assert!(
                    (psor.u[i] - brute.u[i]).abs() <= 1e-8 * scale,
                    "psor vs brute, seed {seed} node {i}"
                );
                assert!(
                    (pdas.u[i] - brute.u[i]).abs() <= 1e-8 * scale,
                    "pdas vs brute, seed {seed} node {i}"
                );
            }
        }
    }

    #[test]
    fn pdas_start_independence_and_uniqueness() {
        let vi = random_spd_instance(100, 12, 77);
        let from_empty = solve_pdas(&vi, &SolverOptions::default()).unwrap();
        let all: BTreeSet<usize> = vi.constraints.iter().map(|&(i, _)| i).collect();
        let from_full = solve_pdas_from(&vi, &SolverOptions::default(), &all).unwrap();
        assert!(from_empty.converged && from_full.converged);
        assert_eq!(from_empty.active_set, from_full.active_set);
        for i in 0..vi.dim() {
            assert!((from_empty.u[i] - from_full.u[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn unique_kkt_point_over_random_instances() {
        for seed in 0..100u64 {
            let vi = random_spd_instance(20, 8, 5000 + seed);
            let candidates = bruteforce_kkt_candidates(&vi).unwrap();
            assert_eq!(candidates.len(), 1, "seed {seed}: {candidates:?}");
        }
    }

    #[test]
    fn psor_energy_is_monotone() {
        // the 1e-14 slack is an absolute roundoff allowance, so probe it on
        // an instance with O(1) energy
        let mut vi = random_spd_instance(60, 15, 9);
        vi.system.b.iter_mut().for_each(|b| *b *= 0.05);
        vi.constraints.iter_mut().for_each(|c| c.1 *= 0.05);
        for omega in [0.8, 1.0, 1.5, 1.9] {
            let res = solve_psor(
                &vi,
                &SolverOptions {
                    omega,
                    ..Default::default()
                },
            );
            for w in res.history.windows(2) {
                assert!(
                    w[1].energy <= w[0].energy + 1e-14,
                    "omega {omega}: energy rose from {} to {}",
                    w[0].energy,
                    w[1].energy
                );
            }
        }
    }

    #[test]
    fn joint_scaling_covariance() {
        let vi = random_spd_instance(30, 10, 21);
        let base = solve_pdas(&vi, &SolverOptions::default()).unwrap();
        let lambda = 3.7;
        let mut scaled = vi.clone();
        scaled.system.b.iter_mut().for_each(|b| *b *= lambda);
        scaled.constraints.iter_mut().for_each(|c| c.1 *= lambda);
        let res = solve_pdas(&scaled, &SolverOptions::default()).unwrap();
        assert_eq!(res.active_set, base.active_set);
        for i in 0..vi.dim() {
            assert_relative_eq!(res.u[i], lambda * base.u[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn kkt_residual_examples() {
        let vi = two_by_two(vec![(0, 0.0)]);
        let exact = solve_bruteforce(&vi).unwrap();
        let kkt = kkt_residual(&vi, &exact.u);
        assert!(kkt.max() <= 1e-10);

        // u = c on all constraints with b = 0: stationarity picks up |A c|
        // on the unconstrained nodes
        let mut vi0 = two_by_two(vec![(0, 0.7)]);
        vi0.system.b = vec![0.0, 0.0];
        let u = vec![0.7, 0.0];
        let kkt = kkt_residual(&vi0, &u);
        assert_relative_eq!(kkt.stationarity, 0.7, epsilon = 1e-14); // |(-1)*0.7|
        assert_eq!(kkt.feasibility, 0.0);

        // strictly feasible interior point
        let u = vec![-1.0, 0.0];
        let kkt = kkt_residual(&vi0, &u);
        assert_eq!(kkt.feasibility, 0.0);
    }

    #[test]
    fn equivalence_checks_detect_perturbations() {
        let vi = random_spd_instance(40, 10, 31);
        let res = solve_pdas(&vi, &SolverOptions::default()).unwrap();
        let report = check_definitions_equivalence(&vi, &res.u, 50, 7);
        assert!(report.equality_residual <= 1e-10);
        assert!(report.max_inequality_violation <= 1e-10);

        // perturb an inactive node: the equality must notice
        let mut bad = res.u.clone();
        let inactive = (0..vi.dim())
            .find(|i| !res.active_set.contains(i))
            .unwrap();
        bad[inactive] += 1e-3;
        let report = check_definitions_equivalence(&vi, &bad, 50, 7);
        assert!(report.equality_residual > 1e-8);
    }

    #[test]
    fn zero_problem_all_residuals_vanish() {
        let mut vi = two_by_two(vec![(0, 0.0), (1, 0.0)]);
        vi.system.b = vec![0.0, 0.0];
        let res = solve_psor(&vi, &SolverOptions::default());
        assert!(res.converged);
        let report = check_definitions_equivalence(&vi, &res.u, 10, 3);
        assert_eq!(report.equality_residual, 0.0);
        assert_eq!(report.max_inequality_violation, 0.0);
    }
}
