#![allow(dead_code)]

use freedeconv::ncpart::{enumerate_nc, is_noncrossing, NcPartition};
use freedeconv::series::{RationalSeries, Series};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rational() -> impl Strategy<Value = Q> {
    (-9i64..=9, 1i64..=5).prop_map(|(n, d)| q(n, d))
}

pub fn nonzero_rational() -> impl Strategy<Value = Q> {
    (prop_oneof![-9i64..=-1, 1i64..=9], 1i64..=5).prop_map(|(n, d)| q(n, d))
}

/// Rational series of exactly `order` coefficients.
pub fn series_of(order: usize) -> impl Strategy<Value = RationalSeries> {
    proptest::collection::vec(rational(), order).prop_map(|c| Series::new(c).unwrap())
}

/// Series with a nonzero first coefficient.
pub fn invertible_of(order: usize) -> impl Strategy<Value = RationalSeries> {
    (nonzero_rational(), proptest::collection::vec(rational(), order - 1)).prop_map(|(first, mut rest)| {
        rest.insert(0, first);
        Series::new(rest).unwrap()
    })
}

/// Moment series of a probability measure with nonzero mean: a finite
/// atomic law with positive atoms.
pub fn positive_atoms(max_len: usize) -> impl Strategy<Value = Vec<Q>> {
    proptest::collection::vec((1i64..=12, 1i64..=4).prop_map(|(n, d)| q(n, d)), 1..=max_len)
}

// Truncated power series in `t` with constant term, lowest degree first.

fn mul(a: &[Q], b: &[Q], len: usize) -> Vec<Q> {
    let mut out = vec![q(0, 1); len];
    for (i, x) in a.iter().enumerate().take(len) {
        for (j, y) in b.iter().enumerate().take(len - i) {
            out[i + j] += x * y;
        }
    }
    out
}

fn inv(a: &[Q], len: usize) -> Vec<Q> {
    let mut out = vec![q(0, 1); len];
    out[0] = a[0].recip();
    for n in 1..len {
        let mut acc = q(0, 1);
        for k in 1..=n.min(a.len() - 1) {
            acc += &a[k] * &out[n - k];
        }
        out[n] = -acc * &out[0];
    }
    out
}

/// SPN moments `m_1..m_order` from the subordination fixed point, solved
/// as formal power series in `t = 1/zeta`: with `g_i = t u_i(t)`,
/// `u_1 = (W_2/d) sum_k 1/(W_1 W_2 - a_k t^2)`,
/// `u_2 = (W_1/p) sum_k 1/(W_1 W_2 - a_k t^2) + (p - d)/(p W_2)`,
/// `W_1 = 1 - sigma^2 (p/d) t^2 u_2`, `W_2 = 1 - sigma^2 t^2 u_1`.
/// Here `a_k` are the squared singular values.
pub fn spn_moments_by_subordination(a_sq: &[Q], sigma_sq: &Q, p: usize, d: usize, order: usize) -> Vec<Q> {
    let len = 2 * order + 1;
    let (pq, dq) = (q(p as i64, 1), q(d as i64, 1));
    let one = |len: usize| {
        let mut v = vec![q(0, 1); len];
        v[0] = q(1, 1);
        v
    };
    let shift2 = |u: &[Q], c: &Q| {
        let mut w = one(len);
        for (i, x) in u.iter().enumerate().take(len - 2) {
            w[i + 2] -= c * x;
        }
        w
    };
    let (mut u1, mut u2) = (one(len), one(len));
    for _ in 0..=order {
        let w1 = shift2(&u2, &(sigma_sq * &pq / &dq));
        let w2 = shift2(&u1, sigma_sq);
        let prod = mul(&w1, &w2, len);
        let mut s = vec![q(0, 1); len];
        for a in a_sq {
            let mut den = prod.clone();
            den[2] -= a;
            for (x, y) in s.iter_mut().zip(inv(&den, len)) {
                *x += y;
            }
        }
        let n1: Vec<Q> = mul(&w2, &s, len).into_iter().map(|x| x / &dq).collect();
        let tail = inv(&w2, len);
        let n2: Vec<Q> = mul(&w1, &s, len)
            .into_iter()
            .zip(tail)
            .map(|(x, y)| x / &pq + y * (&pq - &dq) / &pq)
            .collect();
        u1 = n1;
        u2 = n2;
    }
    (1..=order).map(|n| u1[2 * n].clone()).collect()
}

/// Blocks of `pi` on odd positions, blocks of `sigma` on even positions of
/// `1 < 1' < 2 < 2' < ...`.
pub fn interleave(pi: &NcPartition, sigma: &NcPartition) -> Vec<Vec<usize>> {
    let mut blocks: Vec<Vec<usize>> = pi.blocks().into_iter().map(|b| b.iter().map(|k| 2 * k - 1).collect()).collect();
    blocks.extend(sigma.blocks().into_iter().map(|b| b.iter().map(|k| 2 * k).collect()));
    blocks
}

fn refines(fine: &NcPartition, coarse: &NcPartition) -> bool {
    fine.blocks().iter().all(|b| b.iter().all(|&k| coarse.labels()[k - 1] == coarse.labels()[b[0] - 1]))
}

/// The largest `sigma` whose interleaving with `pi` stays non-crossing,
/// found by searching all of `NC(n)`.
pub fn kreweras_by_definition(pi: &NcPartition) -> NcPartition {
    let n = pi.n();
    let compatible: Vec<NcPartition> = enumerate_nc(n)
        .unwrap()
        .into_iter()
        .filter(|s| is_noncrossing(2 * n, &interleave(pi, s)).unwrap())
        .collect();
    let top = compatible.iter().min_by_key(|s| s.num_blocks()).unwrap().clone();
    assert!(compatible.iter().all(|s| refines(s, &top)), "no maximum for {:?}", pi.blocks());
    top
}
