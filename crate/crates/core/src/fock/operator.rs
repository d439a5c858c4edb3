//! Second-quantized operators on a truncated Fock basis, stored as dense
//! matrices per pair of (particle number, momentum) blocks.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use num_complex::Complex;
use rayon::prelude::*;

use crate::classical::ThetaSpec;
use crate::fock::basis::{annihilate, create, FockBasis};
use crate::fock::FockError;
use crate::linalg::CMat;
use crate::scalar::{abs, czero, Cplx, Real};
use crate::spectral::OneBodySpectrum;

/// Operator with matrix blocks `(row block, column block) → CMat`; absent
/// pairs are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockOperator<T> {
    dims: Vec<usize>,
    blocks: BTreeMap<(usize, usize), CMat<T>>,
}

impl<T: Real> BlockOperator<T> {
    pub fn zeros(basis: &FockBasis) -> Self {
        Self { dims: basis.blocks().iter().map(|b| b.dim()).collect(), blocks: BTreeMap::new() }
    }

    pub fn identity(basis: &FockBasis) -> Self {
        let mut op = Self::zeros(basis);
        for (b, d) in op.dims.clone().into_iter().enumerate() {
            op.blocks.insert((b, b), CMat::identity(d));
        }
        op
    }

    /// Diagonal operator with entries `f(block, occupation)`.
    pub fn diagonal(basis: &FockBasis, f: impl Fn(usize, &[u16]) -> T + Sync) -> Self {
        let mut op = Self::zeros(basis);
        let mats: Vec<CMat<T>> = basis
            .blocks()
            .par_iter()
            .enumerate()
            .map(|(b, blk)| {
                let mut m = CMat::zeros(blk.dim(), blk.dim());
                for (i, s) in blk.states.iter().enumerate() {
                    m[(i, i)] = Complex::new(f(b, s), T::zero());
                }
                m
            })
            .collect();
        for (b, m) in mats.into_iter().enumerate() {
            op.blocks.insert((b, b), m);
        }
        op
    }

    /// Assembles `Σ_terms` from a per-state action: `apply(occ, emit)` calls
    /// `emit(target_occ, coefficient)` for each output component. Targets
    /// outside the truncated basis are dropped.
    pub fn assemble(
        basis: &FockBasis,
        apply: impl Fn(&[u16], &mut dyn FnMut(&[u16], Cplx<T>)) + Sync,
    ) -> Self {
        let cols: Vec<BTreeMap<usize, CMat<T>>> = basis
            .blocks()
            .par_iter()
            .map(|blk| {
                let mut out: BTreeMap<usize, CMat<T>> = BTreeMap::new();
                for (j, s) in blk.states.iter().enumerate() {
                    apply(s, &mut |target, c| {
                        if let Some((tb, ti)) = basis.locate(target) {
                            let m = out.entry(tb).or_insert_with(|| CMat::zeros(basis.block(tb).dim(), blk.dim()));
                            m[(ti, j)] += c;
                        }
                    });
                }
                out
            })
            .collect();
        let mut op = Self::zeros(basis);
        for (b, col) in cols.into_iter().enumerate() {
            for (tb, m) in col {
                op.blocks.insert((tb, b), m);
            }
        }
        op
    }

    pub fn num_blocks(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&CMat<T>> {
        self.blocks.get(&(row, col))
    }

    /// The `(row, col)` block, with absent blocks materialized as zeros.
    pub fn block_or_zero(&self, row: usize, col: usize) -> CMat<T> {
        self.blocks.get(&(row, col)).cloned().unwrap_or_else(|| CMat::zeros(self.dims[row], self.dims[col]))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize), &CMat<T>)> {
        self.blocks.iter()
    }

    pub fn insert(&mut self, row: usize, col: usize, m: CMat<T>) {
        assert_eq!((m.rows(), m.cols()), (self.dims[row], self.dims[col]));
        self.blocks.insert((row, col), m);
    }

    pub fn is_block_diagonal(&self) -> bool {
        self.blocks.keys().all(|(r, c)| r == c)
    }

    pub fn scale(&self, s: Cplx<T>) -> Self {
        Self { dims: self.dims.clone(), blocks: self.blocks.iter().map(|(k, m)| (*k, m.scale(s))).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dims, other.dims);
        let mut blocks = self.blocks.clone();
        for (k, m) in &other.blocks {
            let entry = blocks.entry(*k).or_insert_with(|| CMat::zeros(m.rows(), m.cols()));
            *entry = entry.add(m);
        }
        Self { dims: self.dims.clone(), blocks }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex::new(-T::one(), T::zero())))
    }

    pub fn adjoint(&self) -> Self {
        Self { dims: self.dims.clone(), blocks: self.blocks.iter().map(|((r, c), m)| ((*c, *r), m.adjoint())).collect() }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dims, other.dims);
        let mut by_row: BTreeMap<usize, Vec<(usize, &CMat<T>)>> = BTreeMap::new();
        for ((r, c), m) in &other.blocks {
            by_row.entry(*r).or_default().push((*c, m));
        }
        let mut blocks: BTreeMap<(usize, usize), CMat<T>> = BTreeMap::new();
        for ((r, c), a) in &self.blocks {
            if let Some(list) = by_row.get(c) {
                for (d, b) in list {
                    let prod = a.matmul(b);
                    match blocks.get_mut(&(*r, *d)) {
                        Some(acc) => *acc = acc.add(&prod),
                        None => {
                            blocks.insert((*r, *d), prod);
                        }
                    }
                }
            }
        }
        Self { dims: self.dims.clone(), blocks }
    }

    /// `AB - BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    pub fn max_abs(&self) -> T {
        self.blocks.values().fold(T::zero(), |m, b| m.max(b.max_abs()))
    }

    /// `max |A - A*|` over all entries.
    pub fn hermitian_defect(&self) -> T {
        self.sub(&self.adjoint()).max_abs()
    }

    /// Diagonal entries of a block-diagonal operator per block.
    pub fn diagonal_values(&self, b: usize) -> Vec<Cplx<T>> {
        match self.blocks.get(&(b, b)) {
            Some(m) => (0..m.rows()).map(|i| m[(i, i)]).collect(),
            None => vec![czero(); self.dims[b]],
        }
    }

    /// Writes the block-diagonal part: `u64` block count, then per block
    /// `i64 n, i64 momentum, u64 dim` and `dim²` row-major `(re, im)` pairs,
    /// all little-endian with `f64` entries.
    pub fn write_binary<W: Write>(&self, basis: &FockBasis, mut out: W) -> Result<(), FockError> {
        if !self.is_block_diagonal() {
            return Err(FockError::Consistency("binary dumps hold block-diagonal operators only".into()));
        }
        out.write_all(&(self.dims.len() as u64).to_le_bytes())?;
        for (b, blk) in basis.blocks().iter().enumerate() {
            out.write_all(&(blk.n as i64).to_le_bytes())?;
            out.write_all(&blk.momentum.to_le_bytes())?;
            out.write_all(&(blk.dim() as u64).to_le_bytes())?;
            let zero = CMat::zeros(blk.dim(), blk.dim());
            let m = self.blocks.get(&(b, b)).unwrap_or(&zero);
            for z in m.as_slice() {
                out.write_all(&z.re.to_f64_lossy().to_le_bytes())?;
                out.write_all(&z.im.to_f64_lossy().to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(basis: &FockBasis, mut input: R) -> Result<Self, FockError> {
        let mut word = [0u8; 8];
        let mut next = |input: &mut R| -> Result<[u8; 8], FockError> {
            input.read_exact(&mut word)?;
            Ok(word)
        };
        let count = u64::from_le_bytes(next(&mut input)?) as usize;
        if count != basis.blocks().len() {
            return Err(FockError::Consistency(format!("dump has {count} blocks, basis has {}", basis.blocks().len())));
        }
        let mut op = Self::zeros(basis);
        for (b, blk) in basis.blocks().iter().enumerate() {
            let n = i64::from_le_bytes(next(&mut input)?);
            let p = i64::from_le_bytes(next(&mut input)?);
            let dim = u64::from_le_bytes(next(&mut input)?) as usize;
            if (n, p, dim) != (blk.n as i64, blk.momentum, blk.dim()) {
                return Err(FockError::Consistency(format!("block {b} header mismatch")));
            }
            let mut m = CMat::zeros(dim, dim);
            for i in 0..dim {
                for j in 0..dim {
                    let re = f64::from_le_bytes(next(&mut input)?);
                    let im = f64::from_le_bytes(next(&mut input)?);
                    m[(i, j)] = Complex::new(T::lit(re), T::lit(im));
                }
            }
            op.blocks.insert((b, b), m);
        }
        Ok(op)
    }
}

/// Which second-quantized operator to build.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorKind<T> {
    /// `H_{τ,0} = Σ λ_k n_k / τ`
    H0,
    /// `N_τ = Σ n_k / τ`
    N,
    /// `W_τ = (1/2τ²) Σ_{r,s,m} ŵ(m) a*_{r+m} a*_{s-m} a_r a_s`
    W,
    /// `W_τ + (w(0)/2τ) N_τ` with `w(0) = Σ_{|m| ≤ 2k_max} ŵ(m)`
    WPrime,
    /// `Θ_τ(ξ) = τ^{-p} Σ ξ_{k⃗,l⃗} a*_{k⃗} a_{l⃗}`
    Theta(ThetaSpec<T>),
    /// `Σ k n_k`
    Momentum,
}

/// Builds an operator. `w_hat[m]` must hold `ŵ(m)` for `0 ≤ m ≤ 2k_max`
/// when the interaction is requested.
pub fn build_operator<T: Real>(
    kind: &OperatorKind<T>,
    basis: &FockBasis,
    kappa: T,
    tau: T,
    w_hat: Option<&[T]>,
) -> Result<BlockOperator<T>, FockError> {
    if !(tau > T::zero()) {
        return Err(FockError::Domain(format!("tau must be positive, got {tau}")));
    }
    let ms = basis.mode_set();
    let inv_tau = T::one() / tau;
    match kind {
        OperatorKind::H0 => {
            let spec = OneBodySpectrum::new(ms, kappa)?;
            Ok(BlockOperator::diagonal(basis, |_, s| {
                s.iter().zip(&spec.eigenvalues).map(|(c, l)| T::from_usize_lossy(*c as usize) * *l).sum::<T>() * inv_tau
            }))
        }
        OperatorKind::N => Ok(BlockOperator::diagonal(basis, |b, _| T::from_usize_lossy(basis.block(b).n) * inv_tau)),
        OperatorKind::Momentum => {
            Ok(BlockOperator::diagonal(basis, |b, _| T::from_i64_lossy(basis.block(b).momentum)))
        }
        OperatorKind::W | OperatorKind::WPrime => {
            let d = ms.dim();
            let w_hat = w_hat.ok_or_else(|| FockError::Domain("interaction requested without ŵ".into()))?;
            if w_hat.len() < d {
                return Err(FockError::Domain(format!("need ŵ(m) for |m| ≤ {}, got {} values", d - 1, w_hat.len())));
            }
            let pref = T::lit(0.5) * inv_tau * inv_tau;
            let k = ms.k_max as i64;
            let w = BlockOperator::assemble(basis, |s, emit| {
                let mut occ = s.to_vec();
                for si in 0..d {
                    let Some(a1) = annihilate(&mut occ, si) else { continue };
                    for ri in 0..d {
                        let Some(a2) = annihilate(&mut occ, ri) else { continue };
                        let (r, sm) = (ms.mode(ri), ms.mode(si));
                        for m in (-2 * k)..=(2 * k) {
                            let (rp, sp) = (r + m, sm - m);
                            if rp.abs() > k || sp.abs() > k {
                                continue;
                            }
                            let (rpi, spi) = (ms.index_of(rp).unwrap(), ms.index_of(sp).unwrap());
                            let c1 = create(&mut occ, spi);
                            let c2 = create(&mut occ, rpi);
                            let amp = T::lit(a1 * a2 * c1 * c2) * w_hat[m.unsigned_abs() as usize] * pref;
                            emit(&occ, Complex::new(amp, T::zero()));
                            occ[rpi] -= 1;
                            occ[spi] -= 1;
                        }
                        occ[ri] += 1;
                    }
                    occ[si] += 1;
                }
            });
            let scale = w.max_abs().max(T::one());
            let defect = w.hermitian_defect();
            if defect > T::lit(1e-12) * scale {
                return Err(FockError::Consistency(format!("W_τ assembled with Hermitian defect {defect}")));
            }
            if matches!(kind, OperatorKind::WPrime) {
                let w0 = w_hat[0] + T::lit(2.0) * w_hat[1..d].iter().copied().sum::<T>();
                let n = build_operator(&OperatorKind::N, basis, kappa, tau, None)?;
                return Ok(w.add(&n.scale(Complex::new(w0 * T::lit(0.5) * inv_tau, T::zero()))));
            }
            Ok(w)
        }
        OperatorKind::Theta(spec) => {
            if spec.mode_set() != ms {
                return Err(FockError::Domain("ξ is defined on a different mode set".into()));
            }
            let p = spec.p();
            let d = ms.dim();
            let xi = spec.matrix();
            let pref = inv_tau.powi(p as i32);
            let dims = d.pow(p as u32);
            let multi = |idx: usize| -> Vec<usize> {
                let mut v = vec![0; p];
                let mut r = idx;
                for slot in v.iter_mut().rev() {
                    *slot = r % d;
                    r /= d;
                }
                v
            };
            Ok(BlockOperator::assemble(basis, |s, emit| {
                for l in 0..dims {
                    let mut occ = s.to_vec();
                    let mut amp = 1.0;
                    let mut ok = true;
                    for &i in multi(l).iter().rev() {
                        match annihilate(&mut occ, i) {
                            Some(a) => amp *= a,
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if !ok {
                        continue;
                    }
                    for k in 0..dims {
                        let x = xi[(k, l)];
                        if x.re == T::zero() && x.im == T::zero() {
                            continue;
                        }
                        let mut out = occ.clone();
                        let mut c = amp;
                        for &i in multi(k).iter().rev() {
                            c *= create(&mut out, i);
                        }
                        emit(&out, x * T::lit(c) * pref);
                    }
                }
            }))
        }
    }
}

/// `a_k` (annihilation of mode `k`) on the truncated basis.
pub fn annihilation<T: Real>(basis: &FockBasis, k: i64) -> Result<BlockOperator<T>, FockError> {
    let i = basis.mode_set().index_of(k).ok_or_else(|| FockError::Domain(format!("mode {k} not in the mode set")))?;
    Ok(BlockOperator::assemble(basis, |s, emit| {
        let mut occ = s.to_vec();
        if let Some(a) = annihilate(&mut occ, i) {
            emit(&occ, Complex::new(T::lit(a), T::zero()));
        }
    }))
}

/// `a*_k`; components leaving the truncated basis are dropped.
pub fn creation<T: Real>(basis: &FockBasis, k: i64) -> Result<BlockOperator<T>, FockError> {
    Ok(annihilation(basis, k)?.adjoint())
}

/// `max |[a_k, a*_k] - 1|` per particle-number layer `n = 0..=n_max`. On a
/// truncated basis the relation holds exactly below the top layer.
pub fn ccr_defect<T: Real>(basis: &FockBasis, k: i64) -> Result<Vec<T>, FockError> {
    let a = annihilation::<T>(basis, k)?;
    let c = a.commutator(&a.adjoint()).sub(&BlockOperator::identity(basis));
    let mut layers = vec![T::zero(); basis.n_max() + 1];
    for ((r, col), m) in c.entries() {
        let n = basis.block(*r).n.max(basis.block(*col).n);
        layers[n] = layers[n].max(m.as_slice().iter().fold(T::zero(), |acc, z| acc.max(abs(z.norm()))));
    }
    Ok(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Potential;
    use crate::spectral::{grid_point, ModeSet};

    #[test]
    fn lift_of_identity_is_falling_factorial() {
        let ms = ModeSet::new(1);
        let basis = FockBasis::new(ms, 4).unwrap();
        let tau = 2.0f64;
        let t1 = build_operator(&OperatorKind::Theta(ThetaSpec::identity(ms, 1).unwrap()), &basis, 1.0, tau, None).unwrap();
        let t2 = build_operator(&OperatorKind::Theta(ThetaSpec::identity(ms, 2).unwrap()), &basis, 1.0, tau, None).unwrap();
        assert!(t1.is_block_diagonal() && t2.is_block_diagonal());
        for (b, blk) in basis.blocks().iter().enumerate() {
            let n = blk.n as f64;
            for (i, v) in t1.diagonal_values(b).iter().enumerate() {
                assert!((v.re - n / tau).abs() < 1e-14, "{i}");
            }
            for v in t2.diagonal_values(b) {
                assert!((v.re - n * (n - 1.0) / (tau * tau)).abs() < 1e-13);
            }
            let m = t1.block_or_zero(b, b);
            assert!(m.sub(&CMat::identity(blk.dim()).scale(Complex::new(n / tau, 0.0))).max_abs() < 1e-14);
        }
        // n = 3, τ = 2 → 3/2
        let (b3, _) = basis.locate(&[1, 1, 1]).unwrap();
        assert!((t1.diagonal_values(b3)[0].re - 1.5).abs() < 1e-15);
        let (b1, _) = basis.locate(&[0, 1, 0]).unwrap();
        assert_eq!(t2.diagonal_values(b1)[0].re, 0.0);
    }

    #[test]
    fn interaction_is_hermitian_and_conserving() {
        let ms = ModeSet::new(2);
        let basis = FockBasis::new(ms, 5).unwrap();
        let w = Potential::fourier(vec![0.2, -0.4, 0.1, 0.3, 1.0, 0.3, 0.1, -0.4, 0.2]).unwrap();
        let table = w.coefficient_table(4).unwrap();
        let op = build_operator(&OperatorKind::W, &basis, 1.0, 3.0, Some(&table)).unwrap();
        assert!(op.is_block_diagonal());
        assert!(op.hermitian_defect() < 1e-14);
        assert!(matches!(build_operator::<f64>(&OperatorKind::W, &basis, 1.0, 3.0, Some(&table[..3])), Err(FockError::Domain(_))));
    }

    #[test]
    fn two_particle_sector_matches_position_space() {
        // oracle: ⟨ψ_i| w(x₁-x₂)/τ² |ψ_j⟩ by direct quadrature over an n×n
        // grid, with ψ the symmetrized plane-wave pair states
        let ms = ModeSet::new(1);
        let tau = 1.7;
        let basis = FockBasis::new(ms, 2).unwrap();
        let w = Potential::fourier(vec![0.1, -0.25, 0.6, -0.25, 0.1]).unwrap();
        let op = build_operator(&OperatorKind::W, &basis, 1.0, tau, Some(&w.coefficient_table(2).unwrap())).unwrap();
        let n = 16;
        let psi = |occ: &[u16], x1: f64, x2: f64| -> Complex<f64> {
            let ks: Vec<i64> = occ.iter().enumerate().flat_map(|(i, c)| std::iter::repeat(ms.mode(i)).take(*c as usize)).collect();
            let e = |k: i64, x: f64| Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 * x);
            if ks[0] == ks[1] {
                e(ks[0], x1) * e(ks[1], x2)
            } else {
                (e(ks[0], x1) * e(ks[1], x2) + e(ks[1], x1) * e(ks[0], x2)) / 2f64.sqrt()
            }
        };
        for (b, blk) in basis.blocks().iter().enumerate().filter(|(_, b)| b.n == 2) {
            let m = op.get(b, b).unwrap();
            for (i, si) in blk.states.iter().enumerate() {
                for (j, sj) in blk.states.iter().enumerate() {
                    let mut acc = Complex::new(0.0, 0.0);
                    for a in 0..n {
                        for c in 0..n {
                            let (x1, x2) = (grid_point::<f64>(a, n), grid_point::<f64>(c, n));
                            acc += psi(si, x1, x2).conj() * w.value_at(x1 - x2).unwrap() * psi(sj, x1, x2);
                        }
                    }
                    acc /= (n * n) as f64 * tau * tau;
                    assert!((acc - m[(i, j)]).norm() < 1e-10, "{si:?} {sj:?}");
                }
            }
        }
    }

    #[test]
    fn commutation_relations_hold_below_top_layer() {
        let basis = FockBasis::new(ModeSet::new(1), 4).unwrap();
        let layers = ccr_defect::<f64>(&basis, 1).unwrap();
        assert!(layers[..4].iter().all(|v| *v < 1e-14));
        assert!(layers[4] > 0.5);
    }

    #[test]
    fn binary_dump_round_trip() {
        let basis = FockBasis::new(ModeSet::new(1), 3).unwrap();
        let op = build_operator::<f64>(&OperatorKind::W, &basis, 1.0, 2.0, Some(&[0.3, 0.2, -0.1])).unwrap();
        let mut buf = Vec::new();
        op.write_binary(&basis, &mut buf).unwrap();
        let back = BlockOperator::<f64>::read_binary(&basis, buf.as_slice()).unwrap();
        assert!(back.sub(&op).max_abs() == 0.0);
        let a = annihilation::<f64>(&basis, 0).unwrap();
        assert!(a.write_binary(&basis, Vec::new()).is_err());
    }
}
