//! Basis pursuit denoising solver.
//!
//! Each block is decomposed by minimizing
//!
//! ```text
//! (1/2) ||f - G y||_2^2 + lambda ||y||_1,      G = ( I | P' ),  y = [ s ; alpha ]
//! ```
//!
//! with ADMM. The quadratic step needs `(G^T G + rho I)^{-1}`, an
//! `(n^2 + k)`-dimensional solve. Because `G G^T = I + P' P'^T`, the matrix
//! inversion lemma reduces it to one `k x k` solve plus a handful of
//! matrix-vector products with `P'`, so the per-iteration cost is `O(n^2 k)`.
//! A dense Cholesky path is kept alongside for cross-checking the reduction.

use crate::basis::ScaledBasis;
use crate::error::{Error, Result};
use crate::linalg::{dot, max_abs, Cholesky};

/// Elementwise shrinkage: `sign(x) * max(|x| - kappa, 0)`.
///
/// The proximal operator of `kappa * |.|`; the z-update applies it to every
/// coordinate.
pub fn soft_threshold(x: f64, kappa: f64) -> f64 {
    if x > kappa {
        x - kappa
    } else if x < -kappa {
        x + kappa
    } else {
        0.0
    }
}

/// The stacked measurement operator `G = ( I | P' )`, kept in structured form
/// (the identity part is implicit, only `P'` is stored).
#[derive(Debug, Clone)]
pub struct StackedSystem {
    scaled: ScaledBasis,
}

impl StackedSystem {
    pub fn new(scaled: ScaledBasis) -> Self {
        StackedSystem { scaled }
    }

    /// Number of pixels per block (`n^2`).
    pub fn n2(&self) -> usize {
        self.scaled.n() * self.scaled.n()
    }

    /// Number of basis columns.
    pub fn k(&self) -> usize {
        self.scaled.k()
    }

    /// Total number of unknowns (`n^2 + k`).
    pub fn width(&self) -> usize {
        self.n2() + self.k()
    }

    pub fn scaled_basis(&self) -> &ScaledBasis {
        &self.scaled
    }

    /// `G y = s + P' alpha`.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.width(), "stacked vector length mismatch");
        let n2 = self.n2();
        let mut out = y[..n2].to_vec();
        if self.k() > 0 {
            let smooth = self.scaled.mat_vec(&y[n2..]);
            for (o, s) in out.iter_mut().zip(&smooth) {
                *o += s;
            }
        }
        out
    }

    /// `G^T r = [ r ; P'^T r ]`.
    pub fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.n2(), "residual length mismatch");
        let mut out = r.to_vec();
        out.extend(self.scaled.mat_t_vec(r));
        out
    }

    /// Materializes `G` row-major (`n^2` rows, `n^2 + k` columns). Intended
    /// for tests and small systems only.
    pub fn to_dense(&self) -> Vec<f64> {
        let n2 = self.n2();
        let w = self.width();
        let mut g = vec![0.0; n2 * w];
        for i in 0..n2 {
            g[i * w + i] = 1.0;
        }
        for j in 0..self.k() {
            let col = self.scaled.column(j);
            for i in 0..n2 {
                g[i * w + n2 + j] = col[i];
            }
        }
        g
    }
}

#[derive(Debug, Clone)]
enum Factorization {
    /// `k x k` Cholesky of `(1 + rho) I + P'^T P'`; the y-update is applied
    /// through the matrix inversion lemma.
    Structured { gram: Cholesky },
    /// Cholesky of the full `(n^2+k) x (n^2+k)` matrix `G^T G + rho I`.
    Dense { full: Cholesky },
}

/// Data-independent solve operator for the ADMM y-update, reusable across
/// every block of an image.
#[derive(Debug, Clone)]
pub struct SolverState {
    system: StackedSystem,
    rho: f64,
    factorization: Factorization,
}

impl SolverState {
    /// Precomputes the structured (reduced) solve operator.
    pub fn new(scaled: ScaledBasis, rho: f64) -> Result<Self> {
        Self::build(scaled, rho, false)
    }

    /// Precomputes the dense factorization of `G^T G + rho I`. Quadratic
    /// memory in `n^2 + k`; meant for validation at small block sizes.
    pub fn new_dense(scaled: ScaledBasis, rho: f64) -> Result<Self> {
        Self::build(scaled, rho, true)
    }

    fn build(scaled: ScaledBasis, rho: f64, dense: bool) -> Result<Self> {
        if rho <= 0.0 || !rho.is_finite() {
            return Err(Error::invalid(format!(
                "rho must be positive and finite, got {rho}"
            )));
        }
        let system = StackedSystem::new(scaled);
        let factorization = if dense {
            let full = Cholesky::new(&dense_normal_matrix(&system, rho), system.width())
                .expect("G^T G + rho I is positive definite for rho > 0");
            Factorization::Dense { full }
        } else {
            let k = system.k();
            let mut gram = vec![0.0; k * k];
            for i in 0..k {
                for j in 0..=i {
                    let g = dot(system.scaled.column(i), system.scaled.column(j));
                    gram[i * k + j] = g;
                    gram[j * k + i] = g;
                }
                gram[i * k + i] += 1.0 + rho;
            }
            let gram = Cholesky::new(&gram, k)
                .expect("(1 + rho) I + P'^T P' is positive definite for rho > 0");
            Factorization::Structured { gram }
        };
        Ok(SolverState {
            system,
            rho,
            factorization,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn system(&self) -> &StackedSystem {
        &self.system
    }

    /// Solves `(G^T G + rho I) y = rhs`.
    pub fn apply_inverse(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(
            rhs.len(),
            self.system.width(),
            "right-hand side length mismatch"
        );
        match &self.factorization {
            Factorization::Dense { full } => full.solve(rhs),
            Factorization::Structured { gram } => {
                let n2 = self.system.n2();
                let rho = self.rho;
                // (rho I + G^T G)^{-1} r = (r - G^T h) / rho  with
                // h = ((1+rho) I + P' P'^T)^{-1} G r, and the inner inverse
                // expanded through the k x k Gram factor.
                let t = self.system.apply(rhs);
                let v = self.system.scaled.mat_t_vec(&t);
                let w = if v.is_empty() { v } else { gram.solve(&v) };
                let mut h = t;
                if !w.is_empty() {
                    let pw = self.system.scaled.mat_vec(&w);
                    for (hi, pwi) in h.iter_mut().zip(&pw) {
                        *hi -= pwi;
                    }
                }
                for hi in h.iter_mut() {
                    *hi /= 1.0 + rho;
                }
                let mut out = Vec::with_capacity(self.system.width());
                for i in 0..n2 {
                    out.push((rhs[i] - h[i]) / rho);
                }
                let pth = self.system.scaled.mat_t_vec(&h);
                for (j, &b) in rhs[n2..].iter().enumerate() {
                    out.push((b - pth[j]) / rho);
                }
                out
            }
        }
    }
}

fn dense_normal_matrix(system: &StackedSystem, rho: f64) -> Vec<f64> {
    let n2 = system.n2();
    let k = system.k();
    let w = n2 + k;
    let mut m = vec![0.0; w * w];
    for i in 0..n2 {
        m[i * w + i] = 1.0 + rho;
    }
    for j in 0..k {
        let col = system.scaled.column(j);
        for i in 0..n2 {
            m[i * w + n2 + j] = col[i];
            m[(n2 + j) * w + i] = col[i];
        }
    }
    for a in 0..k {
        for b in 0..k {
            let g = dot(system.scaled.column(a), system.scaled.column(b));
            m[(n2 + a) * w + n2 + b] = g + if a == b { rho } else { 0.0 };
        }
    }
    m
}

/// Per-block solver output: the sparse layer, the smooth coefficients and
/// their reconstruction, plus exit diagnostics.
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Smooth-model coefficients (length `k`).
    pub alpha: Vec<f64>,
    /// The sparse layer `s` (length `n^2`), carrying exact zeros from the
    /// shrinkage step.
    pub sparse: Vec<f64>,
    /// The smooth reconstruction `P' alpha` (length `n^2`).
    pub smooth: Vec<f64>,
    /// Number of ADMM iterations performed.
    pub iterations_run: usize,
    /// `||y - z||_2` at exit.
    pub primal_residual: f64,
}

impl Decomposition {
    /// The stacked solution `z = [ s ; alpha ]`.
    pub fn stacked(&self) -> Vec<f64> {
        let mut z = self.sparse.clone();
        z.extend_from_slice(&self.alpha);
        z
    }
}

/// Runs exactly `iterations` ADMM steps from zero and returns the
/// decomposition built from the thresholded iterate `z`.
pub fn solve_lasso(
    f: &[f64],
    state: &SolverState,
    lambda: f64,
    iterations: usize,
) -> Result<Decomposition> {
    let system = state.system();
    if f.len() != system.n2() {
        return Err(Error::invalid(format!(
            "signal length {} does not match block size {}",
            f.len(),
            system.n2()
        )));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("signal contains non-finite values"));
    }
    if lambda <= 0.0 || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    if iterations == 0 {
        return Err(Error::invalid("iteration count must be at least 1"));
    }

    let width = system.width();
    let n2 = system.n2();
    let rho = state.rho();
    let kappa = lambda / rho;
    let gtf = system.apply_transpose(f);

    let mut y = vec![0.0; width];
    let mut z = vec![0.0; width];
    let mut u = vec![0.0; width];
    let mut rhs = vec![0.0; width];
    for _ in 0..iterations {
        for i in 0..width {
            rhs[i] = gtf[i] + rho * (z[i] - u[i]);
        }
        y = state.apply_inverse(&rhs);
        for i in 0..width {
            z[i] = soft_threshold(y[i] + u[i], kappa);
            u[i] += y[i] - z[i];
        }
    }

    let primal_residual = {
        let mut sq = 0.0;
        for i in 0..width {
            let d = y[i] - z[i];
            sq += d * d;
        }
        sq.sqrt()
    };
    let alpha = z[n2..].to_vec();
    let smooth = system.scaled_basis().mat_vec(&alpha);
    Ok(Decomposition {
        alpha,
        sparse: z[..n2].to_vec(),
        smooth,
        iterations_run: iterations,
        primal_residual,
    })
}

/// Maximum violation of the LASSO optimality conditions at the decomposition:
/// for nonzero coordinates `|[G^T(f - Gz)]_i - lambda * sign(z_i)|`, for zero
/// coordinates `max(0, |[G^T(f - Gz)]_i| - lambda)`.
pub fn kkt_residual(
    decomp: &Decomposition,
    system: &StackedSystem,
    f: &[f64],
    lambda: f64,
) -> Result<f64> {
    if decomp.sparse.len() != system.n2() || decomp.alpha.len() != system.k() {
        return Err(Error::invalid(
            "decomposition does not match system dimensions",
        ));
    }
    if f.len() != system.n2() {
        return Err(Error::invalid(format!(
            "signal length {} does not match block size {}",
            f.len(),
            system.n2()
        )));
    }
    let z = decomp.stacked();
    let gz = system.apply(&z);
    let residual: Vec<f64> = f.iter().zip(&gz).map(|(fi, gi)| fi - gi).collect();
    let grad = system.apply_transpose(&residual);
    let mut worst = 0.0_f64;
    for (zi, gi) in z.iter().zip(&grad) {
        let violation = if *zi != 0.0 {
            (gi - lambda * zi.signum()).abs()
        } else {
            (gi.abs() - lambda).max(0.0)
        };
        worst = worst.max(violation);
    }
    Ok(worst)
}

/// LASSO objective `(1/2) ||f - G z||^2 + lambda ||z||_1` of a stacked vector.
pub fn lasso_objective(system: &StackedSystem, f: &[f64], z: &[f64], lambda: f64) -> f64 {
    let gz = system.apply(z);
    let mut fit = 0.0;
    for (fi, gi) in f.iter().zip(&gz) {
        let d = fi - gi;
        fit += d * d;
    }
    0.5 * fit + lambda * z.iter().map(|v| v.abs()).sum::<f64>()
}

/// The smallest lambda for which the all-zero vector solves the problem.
pub fn lambda_max(system: &StackedSystem, f: &[f64]) -> f64 {
    max_abs(&system.apply_transpose(f))
}
