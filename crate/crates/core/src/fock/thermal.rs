//! Per-block eigendecomposition of `H_τ = H_{τ,0} + ζ W_τ`, the thermal
//! state `e^{-H_τ} f(N_τ)` and everything computed from it.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;

use crate::classical::CutoffFunction;
use crate::fock::basis::{annihilate, create, FockBasis};
use crate::fock::operator::BlockOperator;
use crate::fock::FockError;
use crate::linalg::{sym_eigen, CMat, RMat};
use crate::scalar::{czero, Cplx, Real};
use crate::spectral::OneBodySpectrum;

#[derive(Clone, Debug)]
pub struct BlockEigen<T> {
    pub values: Vec<T>,
    /// Columns are eigenvectors.
    pub vectors: RMat<T>,
}

/// Eigenpairs of a real symmetric, block-diagonal Hamiltonian.
#[derive(Clone, Debug)]
pub struct ThermalDecomposition<T> {
    basis: Arc<FockBasis>,
    tau: T,
    blocks: Vec<BlockEigen<T>>,
    reconstruction_error: T,
}

const RECONSTRUCTION_TOL: f64 = 1e-10;

impl<T: Real> ThermalDecomposition<T> {
    /// Diagonalizes `h` block by block. `h` must be block-diagonal, real and
    /// symmetric.
    pub fn new(basis: Arc<FockBasis>, h: &BlockOperator<T>, tau: T) -> Result<Self, FockError> {
        if !h.is_block_diagonal() {
            return Err(FockError::Consistency("Hamiltonian couples different (n, momentum) blocks".into()));
        }
        let results: Vec<Result<(BlockEigen<T>, T), FockError>> = (0..basis.blocks().len())
            .into_par_iter()
            .map(|b| {
                let dim = basis.block(b).dim();
                let m = h.get(b, b).cloned().unwrap_or_else(|| CMat::zeros(dim, dim));
                let scale = m.max_abs().max(T::one());
                if m.max_imag() > T::lit(1e-12) * scale {
                    return Err(FockError::Consistency(format!("block {b} of the Hamiltonian is not real")));
                }
                let r = m.real_part();
                if r.symmetric_defect() > T::lit(1e-12) * scale {
                    return Err(FockError::Consistency(format!("block {b} of the Hamiltonian is not symmetric")));
                }
                let eig = sym_eigen(&r);
                let err = eig.reconstruction_error(&r) / scale;
                Ok((BlockEigen { values: eig.values, vectors: eig.vectors }, err))
            })
            .collect();
        let mut blocks = Vec::with_capacity(results.len());
        let mut reconstruction_error = T::zero();
        for r in results {
            let (b, e) = r?;
            reconstruction_error = reconstruction_error.max(e);
            blocks.push(b);
        }
        if reconstruction_error > T::lit(RECONSTRUCTION_TOL) {
            return Err(FockError::Consistency(format!("eigendecomposition residual {reconstruction_error}")));
        }
        Ok(Self { basis, tau, blocks, reconstruction_error })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn blocks(&self) -> &[BlockEigen<T>] {
        &self.blocks
    }

    /// Largest relative `∥H - VΛVᵀ∥` over blocks.
    pub fn reconstruction_error(&self) -> T {
        self.reconstruction_error
    }

    /// `e^{-sH}` as a block operator.
    pub fn semigroup(&self, s: T) -> BlockOperator<T> {
        self.spectral_function(|e| Complex::new((-s * e).exp(), T::zero()))
    }

    /// `g(H) = V g(Λ) Vᵀ` per block.
    pub fn spectral_function(&self, g: impl Fn(T) -> Cplx<T> + Sync) -> BlockOperator<T> {
        let mats: Vec<CMat<T>> = self
            .blocks
            .par_iter()
            .map(|be| {
                let n = be.values.len();
                let gv: Vec<Cplx<T>> = be.values.iter().map(|e| g(*e)).collect();
                CMat::from_fn(n, n, |i, j| {
                    let mut s = czero();
                    for k in 0..n {
                        s += gv[k] * (be.vectors[(i, k)] * be.vectors[(j, k)]);
                    }
                    s
                })
            })
            .collect();
        let mut op = BlockOperator::zeros(&self.basis);
        for (b, m) in mats.into_iter().enumerate() {
            op.insert(b, b, m);
        }
        op
    }
}

/// Heisenberg evolution `Ψ^t_τ A = e^{itτH_τ} A e^{-itτH_τ}`.
pub fn heisenberg_evolve<T: Real>(a: &BlockOperator<T>, dec: &ThermalDecomposition<T>, t: T) -> BlockOperator<T> {
    let theta = t * dec.tau();
    let blocks = dec.blocks();
    let mut out = BlockOperator::zeros(dec.basis());
    let entries: Vec<((usize, usize), CMat<T>)> = a
        .entries()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|((r, c), m)| {
            let (vr, vc) = (&blocks[*r], &blocks[*c]);
            let to_c = |v: &RMat<T>| CMat::from_real(v);
            let (ur, uc) = (to_c(&vr.vectors), to_c(&vc.vectors));
            let mut inner = ur.adjoint().matmul(m).matmul(&uc);
            for i in 0..inner.rows() {
                for j in 0..inner.cols() {
                    let phase = theta * (vr.values[i] - vc.values[j]);
                    inner[(i, j)] = inner[(i, j)] * Complex::new(phase.cos(), phase.sin());
                }
            }
            ((*r, *c), ur.matmul(&inner).matmul(&uc.adjoint()))
        })
        .collect();
    for ((r, c), m) in entries {
        out.insert(r, c, m);
    }
    out
}

/// Thermal weights `e^{-E_j} f(n/τ)` on top of a decomposition.
#[derive(Clone, Debug)]
pub struct ThermalState<T> {
    dec: Arc<ThermalDecomposition<T>>,
    weights: Vec<Vec<T>>,
    weight_sum: T,
    z0: T,
    diagnostic_free: bool,
    truncation_tail: T,
}

/// Tolerated relative mass outside the basis for diagnostic (`f ≡ 1`) states.
pub const DIAGNOSTIC_TAIL_TOL: f64 = 1e-10;

/// `Z_{τ,0} = Π_k (1 - e^{-λ_k/τ})^{-1}` over the full Fock space of the mode set.
pub fn free_partition_function<T: Real>(spectrum: &OneBodySpectrum<T>, tau: T) -> T {
    spectrum.eigenvalues.iter().fold(T::one(), |acc, l| acc / -(-*l / tau).exp_m1())
}

/// `Z_τ`, `Z_{τ,0}` and `𝒵_τ = Z_τ / Z_{τ,0}`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PartitionFunctions {
    pub z_tau: f64,
    pub z_tau_0: f64,
    pub relative: f64,
}

impl<T: Real> ThermalState<T> {
    /// `free` marks a decomposition of `H_{τ,0}` alone; only then is the
    /// diagnostic cutoff admissible.
    pub fn new(
        dec: Arc<ThermalDecomposition<T>>,
        cutoff: &CutoffFunction<T>,
        spectrum: &OneBodySpectrum<T>,
        free: bool,
    ) -> Result<Self, FockError> {
        let tau = dec.tau();
        let n_max = dec.basis().n_max();
        let diagnostic_free = match cutoff.radius() {
            Some(k) => {
                if k * tau > T::from_usize_lossy(n_max) {
                    return Err(FockError::TruncationUnsound(format!(
                        "K·τ = {} exceeds n_max = {n_max}; raise n_max to ⌈K·τ⌉",
                        (k * tau).to_f64_lossy()
                    )));
                }
                false
            }
            None if free => true,
            None => {
                return Err(FockError::Domain("the cutoff f ≡ 1 is only admissible without interaction".into()));
            }
        };
        let weights: Vec<Vec<T>> = dec
            .blocks()
            .par_iter()
            .enumerate()
            .map(|(b, be)| {
                let f = cutoff.eval(T::from_usize_lossy(dec.basis().block(b).n) / tau);
                be.values.iter().map(|e| if f == T::zero() { T::zero() } else { (-*e).exp() * f }).collect()
            })
            .collect();
        let weight_sum: T = weights.iter().flat_map(|w| w.iter().copied()).sum();
        if !weight_sum.is_finite() {
            return Err(FockError::Consistency("thermal weights overflow".into()));
        }
        let z0 = free_partition_function(spectrum, tau);
        let truncation_tail = if diagnostic_free { T::one() - weight_sum / z0 } else { T::zero() };
        Ok(Self { dec, weights, weight_sum, z0, diagnostic_free, truncation_tail })
    }

    pub fn decomposition(&self) -> &Arc<ThermalDecomposition<T>> {
        &self.dec
    }

    /// Relative mass of the Fock space beyond `n_max` (diagnostic states only).
    pub fn truncation_tail(&self) -> T {
        self.truncation_tail
    }

    /// For `f ≡ 1` without interaction, `Z_τ` is the closed-form free
    /// product (so `𝒵_τ = 1`); otherwise the basis sum, which is exact
    /// because `f(n/τ) = 0` beyond `n_max`.
    pub fn partition_functions(&self) -> PartitionFunctions {
        let z = if self.diagnostic_free { self.z0 } else { self.weight_sum };
        PartitionFunctions {
            z_tau: z.to_f64_lossy(),
            z_tau_0: self.z0.to_f64_lossy(),
            relative: (z / self.z0).to_f64_lossy(),
        }
    }

    pub fn z_tau(&self) -> T {
        if self.diagnostic_free {
            self.z0
        } else {
            self.weight_sum
        }
    }

    pub fn z_tau_0(&self) -> T {
        self.z0
    }

    fn check_usable(&self) -> Result<(), FockError> {
        if self.weight_sum <= T::zero() {
            return Err(FockError::Degenerate);
        }
        if self.truncation_tail > T::lit(DIAGNOSTIC_TAIL_TOL) {
            return Err(FockError::TruncationUnsound(format!(
                "free state loses relative mass {} beyond n_max",
                self.truncation_tail.to_f64_lossy()
            )));
        }
        Ok(())
    }

    /// `ρ_τ(A) = Tr(A e^{-H_τ} f(N_τ)) / Tr(e^{-H_τ} f(N_τ))`.
    pub fn expectation(&self, a: &BlockOperator<T>) -> Result<Cplx<T>, FockError> {
        self.check_usable()?;
        let parts: Vec<Cplx<T>> = (0..self.weights.len())
            .into_par_iter()
            .filter_map(|b| {
                let m = a.get(b, b)?;
                let be = &self.dec.blocks()[b];
                let n = be.values.len();
                let mut acc = czero();
                for j in 0..n {
                    let wj = self.weights[b][j];
                    if wj == T::zero() {
                        continue;
                    }
                    let mut s = czero();
                    for r in 0..n {
                        let vr = be.vectors[(r, j)];
                        if vr == T::zero() {
                            continue;
                        }
                        for c in 0..n {
                            s += m[(r, c)] * (vr * be.vectors[(c, j)]);
                        }
                    }
                    acc += s * wj;
                }
                Some(acc)
            })
            .collect();
        Ok(parts.into_iter().sum::<Cplx<T>>() / self.weight_sum)
    }

    /// Per-block density matrices `V diag(w) Vᵀ / Σw`.
    pub fn density_matrices(&self) -> Vec<RMat<T>> {
        self.dec
            .blocks()
            .par_iter()
            .zip(self.weights.par_iter())
            .map(|(be, w)| {
                let n = be.values.len();
                RMat::from_fn(n, n, |i, j| {
                    let mut s = T::zero();
                    for k in 0..n {
                        s += w[k] * be.vectors[(i, k)] * be.vectors[(j, k)];
                    }
                    s / self.weight_sum
                })
            })
            .collect()
    }
}

/// `γ_{τ,p}(k⃗; l⃗) = τ^{-p} ρ_τ(a*_{l⃗} a_{k⃗})` for `p ∈ {1, 2}`.
pub fn gamma_tau_p<T: Real>(state: &ThermalState<T>, p: usize) -> Result<CMat<T>, FockError> {
    if p == 0 || p > crate::classical::MAX_P {
        return Err(FockError::Size(format!("p = {p} unsupported")));
    }
    state.check_usable()?;
    let basis = state.decomposition().basis().clone();
    let d = basis.mode_set().dim();
    let dims = d.pow(p as u32);
    let rho = state.density_matrices();
    let multi = |idx: usize| -> Vec<usize> {
        let mut v = vec![0; p];
        let mut r = idx;
        for slot in v.iter_mut().rev() {
            *slot = r % d;
            r /= d;
        }
        v
    };
    let tau_p = state.decomposition().tau().powi(p as i32);
    let partial: Vec<CMat<T>> = basis
        .blocks()
        .par_iter()
        .enumerate()
        .map(|(b, blk)| {
            let mut g = CMat::zeros(dims, dims);
            for (i, s) in blk.states.iter().enumerate() {
                for k in 0..dims {
                    let mut occ = s.clone();
                    let mut amp = 1.0;
                    let mut ok = true;
                    for &m in multi(k).iter().rev() {
                        match annihilate(&mut occ, m) {
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
                    for l in 0..dims {
                        let mut out = occ.clone();
                        let mut c = amp;
                        for &m in multi(l).iter().rev() {
                            c *= create(&mut out, m);
                        }
                        if let Some((tb, j)) = basis.locate(&out) {
                            if tb == b {
                                // ρ(A) = Σ_{i,j} ρ_{ij} ⟨j|A|i⟩
                                g[(k, l)] += Complex::new(rho[b][(i, j)] * T::lit(c), T::zero());
                            }
                        }
                    }
                }
            }
            g
        })
        .collect();
    let mut total = CMat::zeros(dims, dims);
    for g in partial {
        total = total.add(&g);
    }
    Ok(total.scale(Complex::new(T::one() / tau_p, T::zero())))
}
