//! Dense and Lanczos eigensolvers for real symmetric operators.
//!
//! The Lanczos solver keeps every Krylov vector and reorthogonalizes each new
//! one against all of them (and against already converged eigenvectors).
//! A single Krylov space only ever sees one vector per degenerate eigenspace,
//! so converged pairs are locked and the iteration restarts in their
//! orthogonal complement until no unresolved level remains below the k-th.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::models::dot;

pub const DEFAULT_SEED: u64 = 0x5EED;

/// Half-integer total spin, stored as `2S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TotalSpin {
    Quantized { twice_s: u32 },
    Mixed,
}

impl TotalSpin {
    pub fn value(&self) -> Option<f64> {
        match self {
            TotalSpin::Quantized { twice_s } => Some(*twice_s as f64 / 2.0),
            TotalSpin::Mixed => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

impl Parity {
    pub fn sign(&self) -> Option<i32> {
        match self {
            Parity::Even => Some(1),
            Parity::Odd => Some(-1),
            Parity::Mixed => None,
        }
    }
}

/// Quantum numbers of one eigenstate; `None` where not computed or not conserved.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StateLabels {
    pub sz_twice: Option<i32>,
    pub total_spin: Option<TotalSpin>,
    pub s_squared: Option<f64>,
    pub parity: Option<Parity>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    /// Ascending.
    pub energies: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub labels: Vec<StateLabels>,
    /// `|H v - E v|_2` per state.
    pub residuals: Vec<f64>,
    /// Operator applications (Lanczos) or QR sweeps bound (dense).
    pub iterations: usize,
}

impl EigenSolution {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    /// Largest `|<v_a, v_b> - delta_ab|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, va) in self.vectors.iter().enumerate() {
            for (b, vb) in self.vectors.iter().enumerate().skip(a) {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot(va, vb) - target).abs());
            }
        }
        worst
    }
}

/// Makes the largest-magnitude amplitude positive.
pub fn fix_phase(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// All eigenpairs of a real symmetric matrix, ascending.
pub fn dense_spectrum(matrix: &DMatrix<f64>) -> Result<EigenSolution> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return invalid(format!("matrix is {}x{}, not square", n, matrix.ncols()));
    }
    let scale = matrix.amax().max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * scale {
                return invalid(format!("matrix is not symmetric at ({i}, {j})"));
            }
        }
    }
    if n == 0 {
        return Ok(EigenSolution {
            energies: vec![],
            vectors: vec![],
            labels: vec![],
            residuals: vec![],
            iterations: 0,
        });
    }
    let max_sweeps = 100 * n.max(10);
    let eig = SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, max_sweeps).ok_or_else(|| {
        Error::Numeric {
            message: "symmetric QR iteration did not converge".into(),
            iterations: max_sweeps,
            residuals: vec![],
        }
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let mut energies = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    for &idx in &order {
        let e = eig.eigenvalues[idx];
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        fix_phase(&mut v);
        let mv = matrix * nalgebra::DVector::from_column_slice(&v);
        let r = mv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - e * b).powi(2))
            .sum::<f64>()
            .sqrt();
        energies.push(e);
        vectors.push(v);
        residuals.push(r);
    }
    Ok(EigenSolution {
        labels: vec![StateLabels::default(); n],
        energies,
        vectors,
        residuals,
        iterations: max_sweeps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LanczosOptions {
    /// Budget of operator applications over all restarts.
    pub max_iter: usize,
    /// Residual bound relative to the estimated spectral width.
    pub tol: f64,
    pub seed: u64,
    /// Largest Krylov space built before an explicit restart.
    pub krylov_dim: usize,
    /// Levels closer than this (relative to the spectral width) are one multiplet.
    pub degeneracy_tol: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol: 1e-10,
            seed: DEFAULT_SEED,
            krylov_dim: 160,
            degeneracy_tol: 1e-9,
        }
    }
}

struct Locked {
    value: f64,
    vector: Vec<f64>,
}

struct RunOutcome {
    converged: Vec<(f64, Vec<f64>, f64)>,
    lowest_ritz: f64,
    lowest_converged: bool,
    restart_vector: Vec<f64>,
    matvecs: usize,
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn orthogonalize(w: &mut [f64], against: &[&[f64]]) {
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for v in against {
            let p = dot(v, w);
            if p != 0.0 {
                w.iter_mut().zip(v.iter()).for_each(|(a, b)| *a -= p * b);
            }
        }
    }
}

fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> SymmetricEigen<f64, nalgebra::Dyn> {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    SymmetricEigen::new(t)
}

/// Eigenvalues of the symmetric tridiagonal matrix `(alpha, beta)` together
/// with the last component of each eigenvector, by implicit QL iteration.
/// Only the last row of the eigenvector matrix is accumulated, which is all
/// the Ritz residual estimates need, so the cost is `O(m^2)`.
fn tridiagonal_ritz(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = alpha.len();
    let mut d = alpha.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&beta[..n - 1]);
    let mut z = vec![0.0; n];
    z[n - 1] = 1.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l || iter == 100 {
                break;
            }
            iter += 1;
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    (d, z)
}

fn sorted_indices(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

struct Solver<'a, F: Fn(&[f64], &mut [f64])> {
    apply: &'a F,
    dim: usize,
    opts: LanczosOptions,
    width: f64,
}

impl<F: Fn(&[f64], &mut [f64])> Solver<'_, F> {
    fn tol_abs(&self) -> f64 {
        self.opts.tol * self.width.max(f64::MIN_POSITIVE)
    }

    fn run(&mut self, start: Vec<f64>, locked: &[Locked], want: usize, budget: usize) -> RunOutcome {
        let dim = self.dim;
        let avail = dim - locked.len();
        let mmax = self.opts.krylov_dim.min(avail).min(budget.max(1));
        let locked_refs: Vec<&[f64]> = locked.iter().map(|l| l.vector.as_slice()).collect();

        let mut q0 = start;
        orthogonalize(&mut q0, &locked_refs);
        normalize(&mut q0);
        let mut basis: Vec<Vec<f64>> = vec![q0];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![0.0; dim];
        let mut matvecs = 0;
        let mut last_beta;

        let e = loop {
            let j = basis.len() - 1;
            (self.apply)(&basis[j], &mut w);
            matvecs += 1;
            let a = dot(&basis[j], &w);
            alpha.push(a);
            for (x, q) in w.iter_mut().zip(&basis[j]) {
                *x -= a * q;
            }
            if j > 0 {
                let b = beta[j - 1];
                for (x, q) in w.iter_mut().zip(&basis[j - 1]) {
                    *x -= b * q;
                }
            }
            {
                let mut against: Vec<&[f64]> = locked_refs.clone();
                against.extend(basis.iter().map(Vec::as_slice));
                orthogonalize(&mut w, &against);
            }
            last_beta = dot(&w, &w).sqrt();
            let m = alpha.len();
            let scale_now = alpha.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(self.width);
            let breakdown = last_beta <= 1e-12 * scale_now.max(f64::MIN_POSITIVE);
            let full = m >= mmax;
            if breakdown || full || (m >= want && m.is_multiple_of(4)) {
                let (vals, last_row) = tridiagonal_ritz(&alpha, &beta);
                let (lo, hi) = vals
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
                self.width = self.width.max(hi - lo).max(lo.abs()).max(hi.abs());
                let order = sorted_indices(&vals);
                let done = breakdown
                    || order.iter().take(want.min(m)).all(|&i| {
                        (last_beta * last_row[i]).abs() <= 0.01 * self.tol_abs()
                    });
                if done || full {
                    break tridiagonal_eigen(&alpha, &beta);
                }
            }
            let mut next = w.clone();
            for x in next.iter_mut() {
                *x /= last_beta;
            }
            beta.push(last_beta);
            basis.push(next);
        };

        let m = alpha.len();
        let vals: Vec<f64> = e.eigenvalues.iter().copied().collect();
        let order = sorted_indices(&vals);
        let tol_abs = self.tol_abs();
        let mut converged = Vec::new();
        let mut restart_vector = vec![0.0; dim];
        let mut lowest_converged = false;
        let mut hv = vec![0.0; dim];
        for (rank, &i) in order.iter().take(want.max(1).min(m)).enumerate() {
            let mut y = vec![0.0; dim];
            for (c, q) in basis.iter().take(m).enumerate() {
                let s = e.eigenvectors[(c, i)];
                y.iter_mut().zip(q).for_each(|(a, b)| *a += s * b);
            }
            normalize(&mut y);
            (self.apply)(&y, &mut hv);
            let theta = vals[i];
            let res = hv
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - theta * b).powi(2))
                .sum::<f64>()
                .sqrt();
            if res <= tol_abs {
                if rank == 0 {
                    lowest_converged = true;
                }
                converged.push((theta, y, res));
            } else {
                restart_vector.iter_mut().zip(&y).for_each(|(a, b)| *a += b);
            }
        }
        RunOutcome {
            converged,
            lowest_ritz: vals[order[0]],
            lowest_converged,
            restart_vector,
            matvecs,
        }
    }
}

/// Lowest `k` eigenpairs of the symmetric operator `apply` (`y = A x`).
pub fn lanczos_lowest_k<F>(apply: &F, dim: usize, k: usize, opts: &LanczosOptions) -> Result<EigenSolution>
where
    F: Fn(&[f64], &mut [f64]),
{
    if k == 0 || k > dim {
        return invalid(format!("need 1 <= k <= dim, got k = {k}, dim = {dim}"));
    }
    let mut solver = Solver {
        apply,
        dim,
        opts: *opts,
        width: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut locked: Vec<Locked> = Vec::new();
    let mut used = 0usize;
    let mut start: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    let mut best_residuals: Vec<f64> = Vec::new();

    loop {
        if locked.len() == dim {
            break;
        }
        if used >= opts.max_iter {
            return Err(Error::Numeric {
                message: format!("Lanczos found {} of {k} eigenpairs", locked.len().min(k)),
                iterations: used,
                residuals: best_residuals,
            });
        }
        let want = k.saturating_sub(locked.len()).max(1);
        let outcome = solver.run(start, &locked, want, opts.max_iter - used);
        used += outcome.matvecs;
        best_residuals = outcome.converged.iter().map(|c| c.2).collect();

        let verified = {
            let mut values: Vec<f64> = locked.iter().map(|l| l.value).collect();
            values.extend(outcome.converged.iter().map(|c| c.0));
            values.sort_by(f64::total_cmp);
            outcome.lowest_converged
                && values.len() >= k
                && outcome.lowest_ritz >= values[k - 1] - opts.degeneracy_tol * solver.width
        };
        let progressed = !outcome.converged.is_empty();
        for (value, vector, _) in outcome.converged {
            locked.push(Locked { value, vector });
        }
        if verified {
            break;
        }
        start = if progressed || dot(&outcome.restart_vector, &outcome.restart_vector) == 0.0 {
            (0..dim).map(|_| rng.random::<f64>() - 0.5).collect()
        } else {
            outcome.restart_vector
        };
    }

    locked.sort_by(|a, b| a.value.total_cmp(&b.value));
    locked.truncate(k);
    let mut energies = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    let mut hv = vec![0.0; dim];
    for l in locked {
        let mut v = l.vector;
        fix_phase(&mut v);
        apply(&v, &mut hv);
        let r = hv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - l.value * b).powi(2))
            .sum::<f64>()
            .sqrt();
        energies.push(l.value);
        vectors.push(v);
        residuals.push(r);
    }
    let tol_abs = solver.tol_abs();
    if let Some((i, r)) = residuals.iter().enumerate().find(|(_, r)| **r > tol_abs) {
        return Err(Error::Numeric {
            message: format!("state {i} residual {r:e} exceeds {tol_abs:e}"),
            iterations: used,
            residuals,
        });
    }
    Ok(EigenSolution {
        labels: vec![StateLabels::default(); energies.len()],
        energies,
        vectors,
        residuals,
        iterations: used,
    })
}

/// Lowest Ritz value after each of the first `steps` plain Lanczos iterations
/// from the seeded start vector.
pub fn lowest_ritz_history<F>(apply: &F, dim: usize, steps: usize, seed: u64) -> Vec<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    normalize(&mut q);
    let mut basis = vec![q];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut w = vec![0.0; dim];
    let mut history = Vec::new();
    for j in 0..steps.min(dim) {
        apply(&basis[j], &mut w);
        let a = dot(&basis[j], &w);
        alpha.push(a);
        let refs: Vec<&[f64]> = basis.iter().map(Vec::as_slice).collect();
        orthogonalize(&mut w, &refs);
        let (vals, _) = tridiagonal_ritz(&alpha, &beta);
        history.push(vals.iter().copied().fold(f64::INFINITY, f64::min));
        let b = normalize(&mut w);
        if b < 1e-12 {
            break;
        }
        beta.push(b);
        basis.push(w.clone());
    }
    history
}
