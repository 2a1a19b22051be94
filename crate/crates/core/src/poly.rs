//! Power sums to polynomial roots.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::series::{Scalar, ScalarKind};

/// Imaginary parts below `IMAG_TOL * (1 + |root|)` are treated as zero.
pub const IMAG_TOL: f64 = 1e-6;

/// Elementary symmetric functions `e_1..e_k` from power sums `p_1..p_k` via
/// Newton's identities `k e_k = sum_{i=1}^k (-1)^{i-1} e_{k-i} p_i`.
pub fn elementary_from_power_sums<S: Scalar>(power_sums: &[S]) -> Vec<S> {
    let mut e: Vec<S> = vec![S::one()];
    for k in 1..=power_sums.len() {
        let mut acc = S::zero();
        for i in 1..=k {
            let term = e[k - i].clone() * power_sums[i - 1].clone();
            acc = if i % 2 == 1 { acc + term } else { acc - term };
        }
        e.push(acc / S::from_u64(k as u64));
    }
    e.remove(0);
    e
}

/// Monic coefficients, highest degree first: `x^k - e_1 x^{k-1} + e_2 ... `.
pub fn monic_from_elementary<S: Scalar>(e: &[S]) -> Vec<S> {
    let mut coeffs = vec![S::one()];
    for (i, ek) in e.iter().enumerate() {
        coeffs.push(if i % 2 == 0 { -ek.clone() } else { ek.clone() });
    }
    coeffs
}

fn horner<S: Scalar>(coeffs: &[S], x: &S) -> (S, S) {
    let mut p = S::zero();
    let mut dp = S::zero();
    for c in coeffs {
        dp = dp * x.clone() + p.clone();
        p = p * x.clone() + c.clone();
    }
    (p, dp)
}

/// Eigenvalues of the companion matrix of a monic polynomial.
fn companion_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let zeros = coeffs.iter().rev().take_while(|c| **c == 0.0).count().min(coeffs.len() - 1);
    let coeffs = &coeffs[..coeffs.len() - zeros];
    let k = coeffs.len() - 1;
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    if k == 0 {
        return roots;
    }
    let mut m = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        m[(0, j)] = -coeffs[j + 1];
    }
    for i in 1..k {
        m[(i, i - 1)] = 1.0;
    }
    // Shifting the matrix shifts its spectrum; retry with a shift when the
    // unshifted QR iteration stalls.
    let scale = 1.0 + coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max);
    for shift in [0.0, 0.37, -0.61, 1.13] {
        let shifted = &m + DMatrix::<f64>::identity(k, k) * (shift * scale);
        if let Some(schur) = Schur::try_new(shifted, f64::EPSILON, 10_000) {
            let eig = schur.complex_eigenvalues();
            roots.extend(eig.iter().map(|z| z - shift * scale));
            return roots;
        }
    }
    roots.extend(std::iter::repeat_n(Complex64::new(f64::NAN, f64::NAN), k));
    roots
}

/// Newton steps on a real root, evaluating the polynomial in the scalar
/// backend. Stops as soon as a step fails to reduce the residual.
fn polish<S: Scalar>(coeffs: &[S], root: f64) -> f64 {
    let mut x = root;
    let Some(xs) = S::from_f64(x) else { return root };
    let mut best = horner(coeffs, &xs).0.to_f64().abs();
    for _ in 0..20 {
        if best == 0.0 {
            break;
        }
        let xs = S::from_f64(x).expect("finite");
        let (p, dp) = horner(coeffs, &xs);
        if dp.is_zero() {
            break;
        }
        let next = (xs - p / dp).to_f64();
        if !next.is_finite() {
            break;
        }
        let r = horner(coeffs, &S::from_f64(next).expect("finite")).0.to_f64().abs();
        if r >= best {
            break;
        }
        best = r;
        x = next;
    }
    x
}

// Dense polynomials below are stored lowest degree first.

fn trim<S: Scalar>(mut a: Vec<S>) -> Vec<S> {
    while a.len() > 1 && a.last().is_some_and(|c| c.is_zero()) {
        a.pop();
    }
    a
}

fn derivative<S: Scalar>(a: &[S]) -> Vec<S> {
    if a.len() <= 1 {
        return vec![S::zero()];
    }
    a.iter().enumerate().skip(1).map(|(i, c)| c.clone() * S::from_u64(i as u64)).collect()
}

fn is_zero_poly<S: Scalar>(a: &[S]) -> bool {
    a.iter().all(|c| c.is_zero())
}

/// Quotient and remainder of `a / b`, `b` nonzero.
fn div_rem<S: Scalar>(a: &[S], b: &[S]) -> (Vec<S>, Vec<S>) {
    let b = trim(b.to_vec());
    let mut r = trim(a.to_vec());
    let db = b.len() - 1;
    let lead = b[db].clone();
    if r.len() < b.len() {
        return (vec![S::zero()], r);
    }
    let mut q = vec![S::zero(); r.len() - db];
    while r.len() >= b.len() && !is_zero_poly(&r) {
        let shift = r.len() - b.len();
        let k = r[r.len() - 1].clone() / lead.clone();
        for (i, bc) in b.iter().enumerate() {
            r[shift + i] = r[shift + i].clone() - k.clone() * bc.clone();
        }
        q[shift] = k;
        r.pop();
        r = trim(r);
    }
    (trim(q), r)
}

fn monic<S: Scalar>(a: Vec<S>) -> Vec<S> {
    let lead = a.last().cloned().unwrap_or_else(S::one);
    a.into_iter().map(|c| c / lead.clone()).collect()
}

fn gcd<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    let (mut a, mut b) = (trim(a.to_vec()), trim(b.to_vec()));
    while !is_zero_poly(&b) {
        let (_, r) = div_rem(&a, &b);
        a = b;
        b = r;
    }
    monic(a)
}

/// Yun's square-free decomposition: `(factor, multiplicity)` pairs whose
/// product is the monic input. Only meaningful for exact scalars.
fn square_free<S: Scalar>(f: &[S]) -> Vec<(Vec<S>, usize)> {
    let f = trim(f.to_vec());
    let fp = derivative(&f);
    let a0 = gcd(&f, &fp);
    let mut b = div_rem(&f, &a0).0;
    let c = div_rem(&fp, &a0).0;
    let mut d = trim(
        c.iter()
            .zip(derivative(&b).into_iter().chain(std::iter::repeat(S::zero())))
            .map(|(x, y)| x.clone() - y)
            .collect(),
    );
    let mut out = Vec::new();
    let mut mult = 1;
    while b.len() > 1 {
        let a = gcd(&b, &d);
        let nb = div_rem(&b, &a).0;
        let nc = div_rem(&d, &a).0;
        let nbp = derivative(&nb);
        let len = nc.len().max(nbp.len());
        d = trim(
            (0..len)
                .map(|i| {
                    nc.get(i).cloned().unwrap_or_else(S::zero) - nbp.get(i).cloned().unwrap_or_else(S::zero)
                })
                .collect(),
        );
        if a.len() > 1 {
            out.push((a, mult));
        }
        b = nb;
        mult += 1;
    }
    out
}

/// Relative size of a cluster of `k` roots produced by rounding a `k`-fold
/// root, at roughly 1e-12 relative coefficient error.
fn cluster_radius(k: usize, center: f64) -> f64 {
    1e-12f64.powf(1.0 / k as f64) * (1.0 + center.abs())
}

/// Collapses runs of nearby roots that contain a complex member into their
/// centroid when the run is no wider than a perturbed multiple root of that
/// size would be.
/// Merged roots are flagged `true`.
fn merge_clusters(mut roots: Vec<Complex64>) -> Vec<(Complex64, bool)> {
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut out = Vec::with_capacity(roots.len());
    let mut i = 0;
    while i < roots.len() {
        let mut best_end = i + 1;
        for end in (i + 2)..=roots.len() {
            let group = &roots[i..end];
            let centroid = group.iter().sum::<Complex64>() / group.len() as f64;
            let radius = cluster_radius(group.len(), centroid.norm());
            let tight = group.iter().all(|r| (r - centroid).norm() <= radius);
            if group[group.len() - 1].re - group[0].re > 2.0 * cluster_radius(roots.len(), centroid.norm()) {
                break;
            }
            if tight
                && centroid.im.abs() <= IMAG_TOL * (1.0 + centroid.norm())
                && group.iter().any(|r| r.im.abs() > IMAG_TOL * (1.0 + r.norm()))
            {
                best_end = end;
            }
        }
        let group = &roots[i..best_end];
        if group.len() > 1 {
            let centroid = group.iter().map(|r| r.re).sum::<f64>() / group.len() as f64;
            out.extend(std::iter::repeat_n((Complex64::new(centroid, 0.0), true), group.len()));
        } else {
            out.push((group[0], false));
        }
        i = best_end;
    }
    out
}

fn polish_real<S: Scalar>(coeffs: &[S], r: Complex64) -> Complex64 {
    if r.im.abs() <= IMAG_TOL * (1.0 + r.norm()) {
        Complex64::new(polish(coeffs, r.re), 0.0)
    } else {
        r
    }
}

fn float_coeffs<S: Scalar>(coeffs: &[S]) -> Vec<f64> {
    coeffs.iter().map(Scalar::to_f64).collect()
}

/// All complex roots of a monic polynomial given highest degree first,
/// sorted by real part.
///
/// Exact scalars go through a square-free decomposition first, so repeated
/// roots are found as simple roots of their factor. Floating scalars fall
/// back to collapsing the tight clusters a repeated root turns into.
pub fn complex_roots<S: Scalar>(coeffs: &[S]) -> Vec<Complex64> {
    let mut roots = match S::KIND {
        ScalarKind::Rational => {
            let ascending: Vec<S> = coeffs.iter().rev().cloned().collect();
            let mut roots = Vec::new();
            for (factor, mult) in square_free(&ascending) {
                let desc: Vec<S> = factor.into_iter().rev().collect();
                for r in companion_roots(&float_coeffs(&desc)) {
                    roots.extend(std::iter::repeat_n(polish_real(&desc, r), mult));
                }
            }
            roots
        }
        ScalarKind::Float => merge_clusters(companion_roots(&float_coeffs(coeffs)))
            .into_iter()
            .map(|(r, merged)| if merged { r } else { polish_real(coeffs, r) })
            .collect(),
    };
    for r in roots.iter_mut() {
        if r.im.abs() <= IMAG_TOL * (1.0 + r.norm()) {
            r.im = 0.0;
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    roots
}

/// Real roots, ascending; fails if any root is genuinely complex.
pub fn real_roots<S: Scalar>(coeffs: &[S]) -> Result<Vec<f64>> {
    complex_roots(coeffs)
        .into_iter()
        .map(|r| {
            if r.im != 0.0 {
                Err(Error::NonRealRoots { re: r.re, im: r.im })
            } else {
                Ok(r.re)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    #[test]
    fn newton_identities_small() {
        // roots 1, 2, 3: e = (6, 11, 6)
        let p = [6.0, 14.0, 36.0];
        let e = elementary_from_power_sums(&p);
        assert_eq!(e, vec![6.0, 11.0, 6.0]);
        assert_eq!(monic_from_elementary(&e), vec![1.0, -6.0, 11.0, -6.0]);
    }

    #[test]
    fn exact_roots_recovered() {
        let q = |n: i64| BigRational::from_integer(n.into());
        let coeffs = [q(1), q(-6), q(11), q(-6)];
        let r = real_roots(&coeffs).unwrap();
        for (got, want) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-14, "{r:?}");
        }
    }

    #[test]
    fn complex_roots_rejected() {
        // x^2 + 1
        assert!(matches!(real_roots(&[1.0, 0.0, 1.0]), Err(Error::NonRealRoots { .. })));
    }

    #[test]
    fn square_free_splits_multiplicities() {
        let q = |n: i64| BigRational::from_integer(n.into());
        // (x - 1)^2 (x - 2)^3, lowest degree first
        let f = [q(-8), q(28), q(-38), q(25), q(-8), q(1)];
        let parts = square_free(&f);
        assert_eq!(parts, vec![(vec![q(-1), q(1)], 2), (vec![q(-2), q(1)], 3)]);
        let desc: Vec<_> = f.iter().rev().cloned().collect();
        assert_eq!(real_roots(&desc).unwrap(), vec![1.0, 1.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn float_quadruple_root_merged() {
        // (x - 1.5)^4
        let r = real_roots(&[1.0, -6.0, 13.5, -13.5, 5.0625]).unwrap();
        assert!(r.iter().all(|x| (x - 1.5).abs() < 1e-8), "{r:?}");
        // genuinely complex roots stay complex
        assert!(real_roots(&[1.0, -3.0, 2.0 + 1e-4]).is_ok());
        assert!(real_roots(&[1.0, -3.0, 2.25 + 1e-4]).is_err());
    }

    #[test]
    fn double_root_stays_real() {
        let r = real_roots(&[1.0, -2.0, 1.0]).unwrap();
        assert!(r.iter().all(|x| (x - 1.0).abs() < 1e-7), "{r:?}");
    }
}
