//! Occupation-number basis of the bosonic Fock space over a mode set,
//! truncated at `n_max` particles and split into blocks of fixed particle
//! number and total momentum.

use std::collections::HashMap;

use crate::fock::FockError;
use crate::spectral::ModeSet;

pub const DEFAULT_BASIS_LIMIT: usize = 200_000;

/// States sharing particle number `n` and total momentum `Σ k n_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub n: usize,
    pub momentum: i64,
    /// Occupation vectors in mode order `-k_max..=k_max`.
    pub states: Vec<Vec<u16>>,
}

impl Block {
    pub fn dim(&self) -> usize {
        self.states.len()
    }
}

#[derive(Clone, Debug)]
pub struct FockBasis {
    mode_set: ModeSet,
    n_max: usize,
    blocks: Vec<Block>,
    lookup: HashMap<Vec<u16>, (usize, usize)>,
    block_index: HashMap<(usize, i64), usize>,
}

/// `C(n_max + d, d)`, saturating.
pub fn basis_size(d: usize, n_max: usize) -> usize {
    let mut c: u128 = 1;
    for i in 1..=d as u128 {
        c = c * (n_max as u128 + i) / i;
        if c > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    c as usize
}

impl FockBasis {
    /// All occupation vectors with at most `n_max` particles.
    pub fn new(mode_set: ModeSet, n_max: usize) -> Result<Self, FockError> {
        Self::with_limit(mode_set, n_max, DEFAULT_BASIS_LIMIT)
    }

    pub fn with_limit(mode_set: ModeSet, n_max: usize, limit: usize) -> Result<Self, FockError> {
        let d = mode_set.dim();
        let size = basis_size(d, n_max);
        if size > limit {
            return Err(FockError::Size(format!("Fock basis would hold {size} states (limit {limit})")));
        }
        if n_max > u16::MAX as usize {
            return Err(FockError::Size(format!("n_max = {n_max} exceeds occupation storage")));
        }
        let mut blocks: Vec<Block> = Vec::new();
        let mut block_index = HashMap::new();
        for n in 0..=n_max {
            let mut by_momentum: std::collections::BTreeMap<i64, Vec<Vec<u16>>> = Default::default();
            let mut occ = vec![0u16; d];
            compositions(n, 0, &mut occ, &mut |o| {
                let p = o.iter().enumerate().map(|(i, c)| mode_set.mode(i) * *c as i64).sum();
                by_momentum.entry(p).or_default().push(o.to_vec());
            });
            for (momentum, states) in by_momentum {
                block_index.insert((n, momentum), blocks.len());
                blocks.push(Block { n, momentum, states });
            }
        }
        let mut lookup = HashMap::with_capacity(size);
        for (b, block) in blocks.iter().enumerate() {
            for (i, s) in block.states.iter().enumerate() {
                lookup.insert(s.clone(), (b, i));
            }
        }
        Ok(Self { mode_set, n_max, blocks, lookup, block_index })
    }

    pub fn mode_set(&self) -> ModeSet {
        self.mode_set
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, b: usize) -> &Block {
        &self.blocks[b]
    }

    pub fn num_states(&self) -> usize {
        self.lookup.len()
    }

    /// `(block, position)` of an occupation vector.
    pub fn locate(&self, occ: &[u16]) -> Option<(usize, usize)> {
        self.lookup.get(occ).copied()
    }

    pub fn block_of(&self, n: usize, momentum: i64) -> Option<usize> {
        self.block_index.get(&(n, momentum)).copied()
    }

    /// All states in block-major order.
    pub fn states(&self) -> impl Iterator<Item = &Vec<u16>> {
        self.blocks.iter().flat_map(|b| b.states.iter())
    }
}

/// Lexicographic enumeration of `occ[i..]` summing to `remaining`.
fn compositions(remaining: usize, i: usize, occ: &mut [u16], visit: &mut impl FnMut(&[u16])) {
    if i + 1 == occ.len() {
        occ[i] = remaining as u16;
        visit(occ);
        occ[i] = 0;
        return;
    }
    for c in 0..=remaining {
        occ[i] = c as u16;
        compositions(remaining - c, i + 1, occ, visit);
    }
    occ[i] = 0;
}

/// Applies `a_k` (index `i` into the mode set) in place; returns `√n_k` or
/// `None` when the occupation is zero.
#[inline]
pub(crate) fn annihilate(occ: &mut [u16], i: usize) -> Option<f64> {
    let n = occ[i];
    if n == 0 {
        return None;
    }
    occ[i] = n - 1;
    Some((n as f64).sqrt())
}

/// Applies `a*_k` in place; returns `√(n_k + 1)`.
#[inline]
pub(crate) fn create(occ: &mut [u16], i: usize) -> f64 {
    occ[i] += 1;
    (occ[i] as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes() {
        assert_eq!(FockBasis::new(ModeSet::new(0), 3).unwrap().num_states(), 4);
        assert_eq!(FockBasis::new(ModeSet::new(1), 2).unwrap().num_states(), 10);
        let b = FockBasis::new(ModeSet::new(2), 6).unwrap();
        assert_eq!(b.num_states(), basis_size(5, 6));
        assert!(matches!(FockBasis::with_limit(ModeSet::new(3), 40, 1000), Err(FockError::Size(_))));
    }

    #[test]
    fn blocks_share_number_and_momentum() {
        let ms = ModeSet::new(1);
        let b = FockBasis::new(ms, 4).unwrap();
        let (blk, _) = b.locate(&[1, 0, 1]).unwrap();
        assert_eq!((b.block(blk).n, b.block(blk).momentum), (2, 0));
        for block in b.blocks() {
            for s in &block.states {
                let n: usize = s.iter().map(|c| *c as usize).sum();
                let p: i64 = s.iter().enumerate().map(|(i, c)| ms.mode(i) * *c as i64).sum();
                assert_eq!((n, p), (block.n, block.momentum));
            }
        }
        let again = FockBasis::new(ms, 4).unwrap();
        assert!(b.states().eq(again.states()));
    }
}
