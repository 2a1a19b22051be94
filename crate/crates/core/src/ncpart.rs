//! Non-crossing partitions of `{1..n}` and their Kreweras complements.
//!
//! Partitions are stored as canonical label vectors: `labels[i]` is the index
//! of the block containing `i + 1`, with blocks numbered in order of their
//! minimum element. Enumeration results and complements are cached per order
//! for the lifetime of the process.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on the enumerated order. Catalan(14) = 2,674,440.
pub const DEFAULT_MAX_ORDER: usize = 14;

/// Orders above this are never cached, whatever the configured maximum.
pub const HARD_MAX_ORDER: usize = 20;

/// Environment variable overriding [`DEFAULT_MAX_ORDER`].
pub const MAX_ORDER_ENV: &str = "FREEDECONV_MAX_NC_ORDER";

/// The configured maximum order, read once from the environment.
pub fn max_order() -> usize {
    static MAX: OnceLock<usize> = OnceLock::new();
    *MAX.get_or_init(|| {
        std::env::var(MAX_ORDER_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&v| v >= 1)
            .map(|v| v.min(HARD_MAX_ORDER))
            .unwrap_or(DEFAULT_MAX_ORDER)
    })
}

fn check_order(n: usize) -> Result<()> {
    let max = max_order();
    if n > max {
        return Err(Error::OrderTooLarge { n, max });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NcPartition {
    labels: Vec<u8>,
}

impl NcPartition {
    /// Builds a partition from 1-based blocks, validating coverage and
    /// non-crossingness.
    pub fn from_blocks(n: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let labels = labels_from_blocks(n, blocks)?;
        if !labels_noncrossing(&labels) {
            return Err(Error::MalformedPartition(format!("{blocks:?} is crossing")));
        }
        Ok(NcPartition { labels })
    }

    fn from_labels_unchecked(labels: &[u8]) -> Self {
        NcPartition { labels: labels.to_vec() }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn num_blocks(&self) -> usize {
        self.labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0)
    }

    /// Blocks in canonical form: sorted by minimum, ascending within a block.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.num_blocks()];
        for (i, &l) in self.labels.iter().enumerate() {
            blocks[l as usize].push(i + 1);
        }
        blocks
    }

    /// Block sizes, largest first.
    pub fn block_type(&self) -> Vec<u8> {
        block_type(&self.labels)
    }

    pub fn all_singletons(n: usize) -> Self {
        NcPartition { labels: (0..n as u8).collect() }
    }

    pub fn single_block(n: usize) -> Self {
        NcPartition { labels: vec![0; n] }
    }

    /// The image of the partition under `k -> k - 1 (mod n)`.
    pub fn rotate_down(&self) -> Self {
        let n = self.n();
        let blocks: Vec<Vec<usize>> = self
            .blocks()
            .into_iter()
            .map(|b| b.into_iter().map(|k| if k == 1 { n } else { k - 1 }).collect())
            .collect();
        NcPartition { labels: labels_from_blocks(n, &blocks).expect("rotation preserves coverage") }
    }
}

impl Serialize for NcPartition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.blocks().serialize(s)
    }
}

impl<'de> Deserialize<'de> for NcPartition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let blocks = Vec::<Vec<usize>>::deserialize(d)?;
        let n = blocks.iter().map(Vec::len).sum();
        NcPartition::from_blocks(n, &blocks).map_err(serde::de::Error::custom)
    }
}

fn labels_from_blocks(n: usize, blocks: &[Vec<usize>]) -> Result<Vec<u8>> {
    if n == 0 || n > u8::MAX as usize {
        return Err(Error::MalformedPartition(format!("ground set size {n} out of range")));
    }
    let mut owner = vec![usize::MAX; n];
    for (bi, block) in blocks.iter().enumerate() {
        if block.is_empty() {
            return Err(Error::MalformedPartition("empty block".into()));
        }
        for &k in block {
            if k == 0 || k > n {
                return Err(Error::MalformedPartition(format!("element {k} outside 1..={n}")));
            }
            if owner[k - 1] != usize::MAX {
                return Err(Error::MalformedPartition(format!("element {k} appears twice")));
            }
            owner[k - 1] = bi;
        }
    }
    if let Some(k) = owner.iter().position(|&o| o == usize::MAX) {
        return Err(Error::MalformedPartition(format!("element {} not covered", k + 1)));
    }
    Ok(canonical_labels(&owner))
}

/// Relabels blocks by order of first appearance.
fn canonical_labels<T: Copy + Eq + std::hash::Hash>(raw: &[T]) -> Vec<u8> {
    let mut map: HashMap<T, u8> = HashMap::new();
    raw.iter()
        .map(|&r| {
            let next = map.len() as u8;
            *map.entry(r).or_insert(next)
        })
        .collect()
}

fn block_type(labels: &[u8]) -> Vec<u8> {
    let nb = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut sizes = vec![0u8; nb];
    for &l in labels {
        sizes[l as usize] += 1;
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// Stack scan: a block can only be revisited while it is the innermost
/// open block.
fn labels_noncrossing(labels: &[u8]) -> bool {
    let nb = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut last = vec![0usize; nb];
    for (i, &l) in labels.iter().enumerate() {
        last[l as usize] = i;
    }
    let mut seen = vec![false; nb];
    let mut stack: Vec<u8> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if !seen[l as usize] {
            seen[l as usize] = true;
            stack.push(l);
        } else if stack.last() != Some(&l) {
            return false;
        }
        if last[l as usize] == i {
            stack.pop();
        }
    }
    true
}

/// Checks the non-crossing condition for an arbitrary set partition of `{1..n}`.
pub fn is_noncrossing(n: usize, blocks: &[Vec<usize>]) -> Result<bool> {
    let labels = labels_from_blocks(n, blocks)?;
    Ok(labels_noncrossing(&labels))
}

/// Cached enumeration of one order.
struct NcTable {
    n: usize,
    labels: Vec<u8>,
    kreweras: Vec<u8>,
}

impl NcTable {
    fn len(&self) -> usize {
        self.labels.len() / self.n
    }

    fn partition(&self, i: usize) -> &[u8] {
        &self.labels[i * self.n..(i + 1) * self.n]
    }

    fn complement(&self, i: usize) -> &[u8] {
        &self.kreweras[i * self.n..(i + 1) * self.n]
    }
}

const SLOTS: usize = HARD_MAX_ORDER + 1;
static TABLES: [OnceLock<Arc<NcTable>>; SLOTS] = [const { OnceLock::new() }; SLOTS];

fn table(n: usize) -> Result<Arc<NcTable>> {
    if n == 0 {
        return Err(Error::MalformedPartition("ground set must be nonempty".into()));
    }
    check_order(n)?;
    Ok(TABLES[n]
        .get_or_init(|| {
            let labels = enumerate_labels(n);
            let kreweras = labels.chunks(n).flat_map(kreweras_labels).collect();
            Arc::new(NcTable { n, labels, kreweras })
        })
        .clone())
}

/// Flat label vectors (stride `m`) of NC(m) on the ground set `{0..m}`, in
/// lexicographic order of the canonical block form, for every `m <= n`.
/// Entry 0 holds the single empty partition.
fn lex_ordered_upto(n: usize) -> Vec<Vec<u8>> {
    let mut subs: Vec<Vec<u8>> = vec![Vec::new()];
    for m in 1..=n {
        let mut out = Vec::new();
        let mut first_block = vec![0usize];
        first_block_dfs(m, &mut first_block, &subs, &mut out);
        subs.push(out);
    }
    subs
}

/// Visits every first block (a sorted set containing 0) in lexicographic
/// order: the prefix itself, then each one-element extension.
fn first_block_dfs(m: usize, block: &mut Vec<usize>, subs: &[Vec<u8>], out: &mut Vec<u8>) {
    emit_with_first_block(m, block, subs, out);
    let start = *block.last().unwrap() + 1;
    for next in start..m {
        block.push(next);
        first_block_dfs(m, block, subs, out);
        block.pop();
    }
}

fn emit_with_first_block(m: usize, block: &[usize], subs: &[Vec<u8>], out: &mut Vec<u8>) {
    // Gaps between consecutive members of the first block and after its last.
    let gaps: Vec<(usize, usize)> = block
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let end = block.get(i + 1).copied().unwrap_or(m);
            (b + 1, end - b - 1)
        })
        .collect();
    let mut labels = vec![0u8; m];
    fill_gaps(&gaps, 0, 1, &mut labels, subs, out);
}

fn fill_gaps(
    gaps: &[(usize, usize)],
    idx: usize,
    next_label: u8,
    labels: &mut [u8],
    subs: &[Vec<u8>],
    out: &mut Vec<u8>,
) {
    if idx == gaps.len() {
        out.extend_from_slice(labels);
        return;
    }
    let (start, len) = gaps[idx];
    if len == 0 {
        fill_gaps(gaps, idx + 1, next_label, labels, subs, out);
        return;
    }
    for sub in subs[len].chunks(len) {
        let mut used = 0u8;
        for (j, &l) in sub.iter().enumerate() {
            labels[start + j] = next_label + l;
            used = used.max(l + 1);
        }
        fill_gaps(gaps, idx + 1, next_label + used, labels, subs, out);
    }
}

fn enumerate_labels(n: usize) -> Vec<u8> {
    lex_ordered_upto(n).pop().unwrap_or_default()
}

/// Kreweras complement via the permutation identity K(pi) = pi^{-1} gamma,
/// with each block read as an increasing cycle and gamma the long cycle.
fn kreweras_labels(labels: &[u8]) -> Vec<u8> {
    let n = labels.len();
    let nb = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); nb];
    for (i, &l) in labels.iter().enumerate() {
        blocks[l as usize].push(i);
    }
    let mut inv = vec![0usize; n];
    for block in &blocks {
        for (j, &x) in block.iter().enumerate() {
            let next = block[(j + 1) % block.len()];
            inv[next] = x;
        }
    }
    let perm: Vec<usize> = (0..n).map(|x| inv[(x + 1) % n]).collect();
    let mut cycle = vec![usize::MAX; n];
    let mut c = 0;
    for start in 0..n {
        if cycle[start] != usize::MAX {
            continue;
        }
        let mut x = start;
        while cycle[x] == usize::MAX {
            cycle[x] = c;
            x = perm[x];
        }
        c += 1;
    }
    canonical_labels(&cycle)
}

/// Every non-crossing partition of `{1..n}`, in lexicographic order of the
/// canonical block form.
pub fn enumerate_nc(n: usize) -> Result<Vec<NcPartition>> {
    let t = table(n)?;
    Ok((0..t.len()).map(|i| NcPartition::from_labels_unchecked(t.partition(i))).collect())
}

/// Number of non-crossing partitions of `{1..n}`, read from the cache.
pub fn count_nc(n: usize) -> Result<usize> {
    Ok(table(n)?.len())
}

pub fn kreweras(pi: &NcPartition) -> NcPartition {
    NcPartition { labels: kreweras_labels(&pi.labels) }
}

/// Partitions of `{1..n}` paired with their Kreweras complements.
pub fn enumerate_with_kreweras(n: usize) -> Result<Vec<(NcPartition, NcPartition)>> {
    let t = table(n)?;
    Ok((0..t.len())
        .map(|i| {
            (
                NcPartition::from_labels_unchecked(t.partition(i)),
                NcPartition::from_labels_unchecked(t.complement(i)),
            )
        })
        .collect())
}

/// `prod_{V in pi} f_{|V|}` for 1-indexed coefficients stored at `coeffs[k - 1]`.
pub fn coef_product<S>(coeffs: &[S], pi: &NcPartition) -> Result<S>
where
    S: Clone + std::ops::Mul<Output = S> + num_traits::One,
{
    let ty = pi.block_type();
    if let Some(&big) = ty.first() {
        if big as usize > coeffs.len() {
            return Err(Error::InsufficientOrder { needed: big as usize, available: coeffs.len() });
        }
    }
    Ok(ty.iter().fold(S::one(), |acc, &s| acc * coeffs[s as usize - 1].clone()))
}

/// Aggregated form of NC(n) for boxed convolution: every distinct pair
/// (block type of pi, block type of K(pi)) with its multiplicity.
#[derive(Debug)]
pub struct TypePairs {
    pub n: usize,
    pub pairs: Vec<(Vec<u8>, Vec<u8>, u64)>,
}

static TYPE_PAIRS: [OnceLock<Arc<TypePairs>>; SLOTS] = [const { OnceLock::new() }; SLOTS];

pub fn type_pairs(n: usize) -> Result<Arc<TypePairs>> {
    if n == 0 {
        return Err(Error::MalformedPartition("ground set must be nonempty".into()));
    }
    check_order(n)?;
    if let Some(tp) = TYPE_PAIRS[n].get() {
        return Ok(tp.clone());
    }
    let t = table(n)?;
    Ok(TYPE_PAIRS[n]
        .get_or_init(|| {
            let mut counts: HashMap<(Vec<u8>, Vec<u8>), u64> = HashMap::new();
            for i in 0..t.len() {
                let key = (block_type(t.partition(i)), block_type(t.complement(i)));
                *counts.entry(key).or_insert(0) += 1;
            }
            let mut pairs: Vec<_> = counts.into_iter().map(|((a, b), c)| (a, b, c)).collect();
            pairs.sort();
            Arc::new(TypePairs { n, pairs })
        })
        .clone())
}

pub fn catalan(n: usize) -> u64 {
    // C_{k+1} = C_k * 2(2k+1)/(k+2), exact in u64 for n <= 35.
    (0..n).fold(1u64, |c, k| c * 2 * (2 * k as u64 + 1) / (k as u64 + 2))
}
