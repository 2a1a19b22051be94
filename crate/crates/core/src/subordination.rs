//! Two-block operator-valued Cauchy transforms and the subordination fixed
//! point for the signal-plus-noise model, with Stieltjes inversion to a
//! spectral density.
//!
//! A `p x d` matrix `Y` is hermitized as `[[0, Y*], [Y, 0]]`; its Cauchy
//! transform with values in the diagonal scalars `C^2` is a pair of
//! complex numbers, and the first component at `(zeta, zeta)` equals
//! `zeta * G_{Y*Y}(zeta^2)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::SpnModel;

/// Default absolute tolerance on the fixed-point residual.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Damping weight of the plain fixed-point step.
pub const DAMPING: f64 = 0.5;
/// Offsets a grid solve passes through before its target offset.
pub const EPSILON_LADDER: [f64; 5] = [0.1, 0.03, 0.01, 3e-3, 1e-3];
/// Default Stieltjes inversion offset.
pub const DEFAULT_EPSILON: f64 = 1e-3;

const NEGATIVE_CLAMP: f64 = -1e-12;

/// Stopping rule of the fixed-point solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

/// A point of `C^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CPoint2 {
    pub z1: Complex64,
    pub z2: Complex64,
}

impl CPoint2 {
    pub fn new(z1: Complex64, z2: Complex64) -> Self {
        CPoint2 { z1, z2 }
    }

    pub fn diagonal(z: Complex64) -> Self {
        CPoint2 { z1: z, z2: z }
    }

    /// Both imaginary parts strictly positive.
    pub fn in_upper(&self) -> bool {
        self.z1.im > 0.0 && self.z2.im > 0.0
    }

    fn dist(&self, other: &CPoint2) -> f64 {
        (self.z1 - other.z1).norm().max((self.z2 - other.z2).norm())
    }

    fn lerp(&self, other: &CPoint2, t: f64) -> CPoint2 {
        CPoint2 { z1: self.z1 * (1.0 - t) + other.z1 * t, z2: self.z2 * (1.0 - t) + other.z2 * t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubordinationResult {
    /// Cauchy transform of the hermitized `A + sigma C`.
    pub g: CPoint2,
    /// Subordinated argument `z - sigma^2 eta(g)`.
    pub omega: CPoint2,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub epsilon: f64,
    /// Trapezoid integral of `values` over `grid`.
    pub mass: f64,
    pub max_residual: f64,
    pub max_iterations: usize,
}

impl DensityCurve {
    fn new(grid: Vec<f64>, values: Vec<f64>, epsilon: f64, max_residual: f64, max_iterations: usize) -> Self {
        let mut curve = DensityCurve { grid, values, epsilon, mass: 0.0, max_residual, max_iterations };
        curve.mass = curve.moment(0);
        curve
    }

    /// Trapezoid estimate of `int x^k rho(x) dx` over the grid.
    pub fn moment(&self, k: u32) -> f64 {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, r)| 0.5 * (x[1] - x[0]) * (x[0].powi(k as i32) * r[0] + x[1].powi(k as i32) * r[1]))
            .sum()
    }

    /// Cumulative trapezoid integral at each grid point, starting at zero.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.grid.len());
        out.push(0.0);
        for (x, r) in self.grid.windows(2).zip(self.values.windows(2)) {
            acc += 0.5 * (x[1] - x[0]) * (r[0] + r[1]);
            out.push(acc);
        }
        out
    }

    /// `x,rho` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,rho\n");
        for (x, r) in self.grid.iter().zip(&self.values) {
            s.push_str(&format!("{x},{r}\n"));
        }
        s
    }
}

/// Variance map of a circular `p x d` block with entry variance `1/d`.
pub fn eta(x: CPoint2, p: usize, d: usize) -> CPoint2 {
    CPoint2 { z1: x.z2 * (p as f64 / d as f64), z2: x.z1 }
}

fn check_upper(z: &CPoint2) -> Result<()> {
    if z.in_upper() {
        Ok(())
    } else {
        Err(Error::Domain(format!("point {:?} is not in the upper half-plane of C^2", z)))
    }
}

/// Cauchy transform of the hermitized `p x d` matrix with singular values
/// `a`.
pub fn g_lambda_atoms(a: &[f64], p: usize, d: usize, z: CPoint2) -> Result<CPoint2> {
    check_upper(&z)?;
    if a.len() != d || p < d {
        return Err(Error::DimensionMismatch(format!("{} singular values for p = {p}, d = {d}", a.len())));
    }
    let a_sq: Vec<f64> = a.iter().map(|x| x * x).collect();
    Ok(Block::new(a_sq, p, d, 0.0).transform(&z).0)
}

/// The hermitized signal with its noise level.
#[derive(Debug, Clone)]
struct Block {
    a_sq: Vec<f64>,
    p: f64,
    d: f64,
    sigma_sq: f64,
}

impl Block {
    fn new(a_sq: Vec<f64>, p: usize, d: usize, sigma_sq: f64) -> Self {
        Block { a_sq, p: p as f64, d: d as f64, sigma_sq }
    }

    fn from_model(model: &SpnModel) -> Self {
        let a_sq = model.singular_values.iter().map(|a| a * a).collect();
        Block::new(a_sq, model.p, model.d, model.sigma * model.sigma)
    }

    /// `G_{Lambda(A)}(w)` and its Jacobian `[[dG1/dw1, dG1/dw2], [dG2/dw1, dG2/dw2]]`.
    fn transform(&self, w: &CPoint2) -> (CPoint2, [[Complex64; 2]; 2]) {
        let prod = w.z1 * w.z2;
        let (mut s, mut t) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for &a in &self.a_sq {
            let r = (prod - a).inv();
            s += r;
            t += r * r;
        }
        let (p, d) = (self.p, self.d);
        let g = CPoint2 {
            z1: w.z2 * s / d,
            z2: w.z1 * s / p + (p - d) / (p * w.z2),
        };
        let jac = [
            [-w.z2 * w.z2 * t / d, (s - prod * t) / d],
            [(s - prod * t) / p, -w.z1 * w.z1 * t / p - (p - d) / (p * w.z2 * w.z2)],
        ];
        (g, jac)
    }

    fn omega(&self, g: &CPoint2, z: &CPoint2) -> CPoint2 {
        CPoint2 {
            z1: z.z1 - g.z2 * (self.sigma_sq * self.p / self.d),
            z2: z.z2 - g.z1 * self.sigma_sq,
        }
    }

    /// Image of `g` under the undamped map, and the residual `|g - image|`.
    fn step(&self, g: &CPoint2, z: &CPoint2) -> (CPoint2, f64) {
        let image = self.transform(&self.omega(g, z)).0;
        (image, g.dist(&image))
    }

    /// One Newton step on `g - G(omega(g))`.
    fn newton(&self, g: &CPoint2, z: &CPoint2) -> Option<CPoint2> {
        let w = self.omega(g, z);
        let (image, jg) = self.transform(&w);
        let f = [g.z1 - image.z1, g.z2 - image.z2];
        let (c1, c2) = (Complex64::new(-self.sigma_sq * self.p / self.d, 0.0), Complex64::new(-self.sigma_sq, 0.0));
        // d omega1 / d g2 = c1, d omega2 / d g1 = c2
        let one = Complex64::new(1.0, 0.0);
        let j = [[one - jg[0][1] * c2, -jg[0][0] * c1], [-jg[1][1] * c2, one - jg[1][0] * c1]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.norm() < 1e-300 || !det.is_finite() {
            return None;
        }
        let dx1 = (f[0] * j[1][1] - j[0][1] * f[1]) / det;
        let dx2 = (j[0][0] * f[1] - j[1][0] * f[0]) / det;
        let next = CPoint2 { z1: g.z1 - dx1, z2: g.z2 - dx2 };
        (next.z1.is_finite() && next.z2.is_finite()).then_some(next)
    }

    fn admissible(&self, g: &CPoint2, z: &CPoint2) -> bool {
        g.z1.im <= 0.0 && g.z2.im <= 0.0 && self.omega(g, z).in_upper()
    }

    fn solve(&self, z: &CPoint2, init: Option<CPoint2>, tol: f64, max_iter: usize) -> Result<SubordinationResult> {
        check_upper(z)?;
        if !(tol > 0.0) {
            return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
        }
        if self.sigma_sq == 0.0 {
            let g = self.transform(z).0;
            return Ok(SubordinationResult { g, omega: *z, iterations: 1, residual: 0.0 });
        }
        let mut g = init.unwrap_or_else(|| self.transform(z).0);
        if !self.admissible(&g, z) {
            g = self.transform(z).0;
        }
        let (mut image, mut residual) = self.step(&g, z);
        let mut iterations = 0;
        while residual > tol {
            if iterations == max_iter {
                return Err(Error::NoConvergence { iterations, residual });
            }
            iterations += 1;
            // Newton is taken only when it stays admissible and improves the
            // residual; otherwise fall back to the damped step.
            let accepted = self.newton(&g, z).filter(|n| self.admissible(n, z)).and_then(|n| {
                let (im, r) = self.step(&n, z);
                (r < residual).then_some((n, im, r))
            });
            let (ng, nimage, nres) = accepted.unwrap_or_else(|| {
                let n = g.lerp(&image, DAMPING);
                let (im, r) = self.step(&n, z);
                (n, im, r)
            });
            g = ng;
            image = nimage;
            residual = nres;
        }
        Ok(SubordinationResult { g, omega: self.omega(&g, z), iterations: iterations.max(1), residual })
    }
}

/// Solves `g = G_{Lambda(A)}(z - sigma^2 eta(g))` starting from
/// `G_{Lambda(A)}(z)`.
pub fn solve_subordination(model: &SpnModel, z: CPoint2, tol: f64, max_iter: usize) -> Result<SubordinationResult> {
    Block::from_model(model).solve(&z, None, tol, max_iter)
}

/// As [`solve_subordination`], starting from `init` when it is admissible.
pub fn solve_subordination_from(
    model: &SpnModel,
    z: CPoint2,
    init: CPoint2,
    tol: f64,
    max_iter: usize,
) -> Result<SubordinationResult> {
    Block::from_model(model).solve(&z, Some(init), tol, max_iter)
}

/// `(zeta, zeta)` with `zeta^2 = x + i eps`, `Im zeta > 0`.
fn lift(x: f64, eps: f64) -> CPoint2 {
    let mut zeta = Complex64::new(x, eps).sqrt();
    if zeta.im < 0.0 {
        zeta = -zeta;
    }
    CPoint2::diagonal(zeta)
}

fn check_grid(grid: &[f64], eps: f64) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(Error::Domain("density grid must be nonempty and positive".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("density grid must be strictly ascending".into()));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
    }
    Ok(())
}

/// Density values at every offset in `epsilons` (descending), each solve
/// continued from the previous one at the same grid point. Returns one
/// `(values, max_residual, max_iterations)` per offset.
fn density_chain(
    block: &Block,
    grid: &[f64],
    epsilons: &[f64],
    opts: SolverOptions,
) -> Result<Vec<(Vec<f64>, f64, usize)>> {
    let ladder: Vec<f64> = EPSILON_LADDER.iter().copied().filter(|&l| l > epsilons[0]).collect();
    let per_point: Vec<Vec<(f64, f64, usize)>> = grid
        .par_iter()
        .map(|&x| {
            let mut prev: Option<CPoint2> = None;
            let mut out = Vec::with_capacity(epsilons.len());
            for (i, &eps) in ladder.iter().chain(epsilons).enumerate() {
                let z = lift(x, eps);
                let sol = block.solve(&z, prev, opts.tol, opts.max_iter)?;
                prev = Some(sol.g);
                if i >= ladder.len() {
                    let zeta = z.z1;
                    let rho = -(sol.g.z1 / zeta).im / std::f64::consts::PI;
                    out.push((rho, sol.residual, sol.iterations));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    if let Some(bad) = per_point.iter().flatten().find(|pt| pt.0 < NEGATIVE_CLAMP) {
        return Err(Error::Domain(format!("inversion produced negative density {:e}", bad.0)));
    }
    Ok((0..epsilons.len())
        .map(|j| {
            let values = per_point.iter().map(|pt| pt[j].0.max(0.0)).collect();
            let max_res = per_point.iter().map(|pt| pt[j].1).fold(0.0, f64::max);
            let max_it = per_point.iter().map(|pt| pt[j].2).max().unwrap_or(0);
            (values, max_res, max_it)
        })
        .collect())
}

/// Spectral density of the SPN law by Stieltjes inversion at offset `eps`.
pub fn spn_density(model: &SpnModel, grid: &[f64], eps: f64) -> Result<DensityCurve> {
    spn_density_with(model, grid, eps, SolverOptions::default())
}

pub fn spn_density_with(model: &SpnModel, grid: &[f64], eps: f64, opts: SolverOptions) -> Result<DensityCurve> {
    if model.sigma == 0.0 {
        return Err(Error::SigmaZero);
    }
    check_grid(grid, eps)?;
    let block = Block::from_model(model);
    let (values, max_res, max_it) = density_chain(&block, grid, &[eps], opts)?.remove(0);
    Ok(DensityCurve::new(grid.to_vec(), values, eps, max_res, max_it))
}

/// Richardson combination `2 rho(eps/2) - rho(eps)`, which cancels the
/// first-order smoothing of the inversion offset. Negative values are set
/// to zero.
pub fn spn_density_extrapolated(model: &SpnModel, grid: &[f64], eps: f64) -> Result<DensityCurve> {
    spn_density_extrapolated_with(model, grid, eps, SolverOptions::default())
}

pub fn spn_density_extrapolated_with(
    model: &SpnModel,
    grid: &[f64],
    eps: f64,
    opts: SolverOptions,
) -> Result<DensityCurve> {
    if model.sigma == 0.0 {
        return Err(Error::SigmaZero);
    }
    check_grid(grid, eps)?;
    let block = Block::from_model(model);
    let mut chain = density_chain(&block, grid, &[eps, eps / 2.0], opts)?;
    let (fine, res_f, it_f) = chain.pop().expect("two offsets");
    let (coarse, res_c, it_c) = chain.pop().expect("two offsets");
    let values = fine.iter().zip(&coarse).map(|(f, c)| (2.0 * f - c).max(0.0)).collect();
    Ok(DensityCurve::new(grid.to_vec(), values, eps, res_f.max(res_c), it_f.max(it_c)))
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// A point safely beyond the right edge of the SPN support.
pub fn support_bound(model: &SpnModel) -> f64 {
    let a_max = model.singular_values.last().copied().unwrap_or(0.0);
    let noise = model.sigma.abs() * (1.0 + (model.p as f64 / model.d as f64).sqrt());
    1.5 * (a_max + noise).powi(2) + 1.0
}
