//! Truncated Fock-space linear algebra.
//!
//! Single-mode states and operators are dense vectors and matrices over the
//! number basis `|0>, ..., |cutoff>`. Several modes (optical modes and
//! two-level matter qubits alike) live in a [`MultiModeState`], a dense
//! row-major tensor. Mixed states are never formed explicitly: loss is
//! unraveled into pure trajectories carried by a [`WeightedEnsemble`].

use num_complex::Complex64;

use crate::error::{check_probability, Error, Result};

pub type C64 = Complex64;

/// Poisson tail bound used to pick cutoffs.
pub const TRUNCATION_TOL: f64 = 1e-14;
/// Largest tolerated norm defect of a constructed coherent state.
pub const NORM_DEFECT_TOL: f64 = 1e-12;
/// Largest tolerated discarded weight when unraveling loss.
pub const LOSS_TAIL_TOL: f64 = 1e-12;
/// Starting number of Kraus trajectories per mode.
pub const DEFAULT_K_MAX: usize = 12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Weight of the Poisson(`mean`) distribution above `cutoff`.
pub fn poisson_tail(mean: f64, cutoff: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut p = (-mean).exp();
    let mut n = 0usize;
    while n < cutoff {
        n += 1;
        p *= mean / n as f64;
    }
    let mut tail = 0.0;
    loop {
        n += 1;
        p *= mean / n as f64;
        tail += p;
        if (n as f64) > mean && p < tail * 1e-18 {
            break;
        }
        if p == 0.0 {
            break;
        }
    }
    tail
}

/// Smallest cutoff whose coherent-state tail stays below [`TRUNCATION_TOL`].
pub fn truncation_cutoff(alpha_abs: f64) -> usize {
    let mean = alpha_abs * alpha_abs;
    let mut n = 1;
    while poisson_tail(mean, n) >= TRUNCATION_TOL {
        n += 1;
    }
    n
}

/// Binomial weight `C(n, k) (1-eta)^k eta^(n-k)`.
pub(crate) fn binomial_weight(n: usize, k: usize, eta: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut c = 1.0;
    for i in 0..k.min(n - k) {
        c *= (n - i) as f64 / (i + 1) as f64;
    }
    c * (1.0 - eta).powi(k as i32) * eta.powi((n - k) as i32)
}

/// Matrix element `<n-k| A_k |n>` of the amplitude-damping Kraus operator.
#[inline]
pub(crate) fn kraus_element(k: usize, n: usize, eta: f64) -> f64 {
    binomial_weight(n, k, eta).sqrt()
}

/// Pure single-mode state over photon numbers `0..=cutoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    amps: Vec<C64>,
}

impl FockState {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.len() < 2 {
            return Err(Error::Dimension("a Fock state needs cutoff >= 1".into()));
        }
        Ok(Self { amps })
    }

    pub fn vacuum(cutoff: usize) -> Self {
        Self::number(0, cutoff)
    }

    pub fn number(n: usize, cutoff: usize) -> Self {
        let mut amps = vec![ZERO; cutoff.max(1) + 1];
        if n < amps.len() {
            amps[n] = ONE;
        }
        Self { amps }
    }

    /// Coherent state `|alpha>`, renormalized after truncation.
    pub fn coherent(alpha: C64, cutoff: usize) -> Result<Self> {
        let cutoff = cutoff.max(1);
        let mean = alpha.norm_sqr();
        let tail = poisson_tail(mean, cutoff);
        if tail > NORM_DEFECT_TOL {
            return Err(Error::Truncation {
                alpha: alpha.norm(),
                cutoff,
                tail,
                tol: NORM_DEFECT_TOL,
            });
        }
        let mut amps = Vec::with_capacity(cutoff + 1);
        let mut a = C64::new((-mean / 2.0).exp(), 0.0);
        amps.push(a);
        for n in 1..=cutoff {
            a = a * alpha / (n as f64).sqrt();
            amps.push(a);
        }
        Ok(Self { amps }.normalized())
    }

    pub fn cutoff(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= n);
        }
        self
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &FockState) -> C64 {
        inner_product(&self.amps, &other.amps)
    }

    pub fn scaled(mut self, c: C64) -> Self {
        self.amps.iter_mut().for_each(|a| *a *= c);
        self
    }

    /// `self + c * other`.
    pub fn add_scaled(mut self, other: &FockState, c: C64) -> Self {
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += c * b;
        }
        self
    }

    pub fn apply(&self, op: &FockOperator) -> FockState {
        op.apply(self)
    }

    /// `A_k |self>` using the banded structure of the Kraus operator.
    pub fn apply_kraus(&self, k: usize, eta: f64) -> FockState {
        let mut out = vec![ZERO; self.amps.len()];
        for n in k..self.amps.len() {
            out[n - k] = self.amps[n] * kraus_element(k, n, eta);
        }
        FockState { amps: out }
    }
}

/// `<a|b>` for raw amplitude slices.
pub fn inner_product(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Dense square operator on a single truncated mode.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    dim: usize,
    data: Vec<C64>,
}

impl FockOperator {
    pub fn zeros(cutoff: usize) -> Self {
        let dim = cutoff + 1;
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(cutoff: usize) -> Self {
        let mut op = Self::zeros(cutoff);
        for i in 0..op.dim {
            op.data[i * op.dim + i] = ONE;
        }
        op
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let mut op = Self::zeros(diag.len() - 1);
        for (i, d) in diag.iter().enumerate() {
            op.data[i * op.dim + i] = *d;
        }
        op
    }

    /// `|u><v|`.
    pub fn outer(u: &FockState, v: &FockState) -> Self {
        let dim = u.dim();
        let mut data = Vec::with_capacity(dim * dim);
        for a in u.amplitudes() {
            for b in v.amplitudes() {
                data.push(a * b.conj());
            }
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cutoff(&self) -> usize {
        self.dim - 1
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cutoff());
        for r in 0..self.dim {
            for c in 0..self.dim {
                out.data[c * self.dim + r] = self.data[r * self.dim + c].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &FockOperator) -> Self {
        let d = self.dim;
        let mut out = Self::zeros(self.cutoff());
        for r in 0..d {
            for k in 0..d {
                let a = self.data[r * d + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..d {
                    out.data[r * d + c] += a * rhs.data[k * d + c];
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &FockOperator) -> Self {
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect();
        Self { dim: self.dim, data }
    }

    pub fn sub(&self, rhs: &FockOperator) -> Self {
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Self { dim: self.dim, data }
    }

    pub fn apply(&self, state: &FockState) -> FockState {
        let d = self.dim;
        let amps = (0..d)
            .map(|r| (0..d).map(|c| self.data[r * d + c] * state.amplitudes()[c]).sum())
            .collect();
        FockState { amps }
    }

    /// `<u| self |v>`.
    pub fn expectation(&self, u: &FockState, v: &FockState) -> C64 {
        inner_product(u.amplitudes(), self.apply(v).amplitudes())
    }

    pub fn max_abs_diff(&self, rhs: &FockOperator) -> f64 {
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Row-major matrix entries.
    pub fn entries(&self) -> &[C64] {
        &self.data
    }
}

/// Annihilation operator: `a|n> = sqrt(n)|n-1>`.
pub fn annihilation(cutoff: usize) -> FockOperator {
    let mut op = FockOperator::zeros(cutoff);
    for n in 1..op.dim {
        op.data[(n - 1) * op.dim + n] = C64::new((n as f64).sqrt(), 0.0);
    }
    op
}

/// Number operator: `n|n> = n|n>`.
pub fn number_operator(cutoff: usize) -> FockOperator {
    let diag: Vec<C64> = (0..=cutoff).map(|n| C64::new(n as f64, 0.0)).collect();
    FockOperator::diagonal(&diag)
}

/// Phase-space rotation `exp(i theta n)`.
pub fn rotation(theta: f64, cutoff: usize) -> FockOperator {
    FockOperator::diagonal(&rotation_diagonal(theta, cutoff))
}

pub(crate) fn rotation_diagonal(theta: f64, cutoff: usize) -> Vec<C64> {
    (0..=cutoff).map(|n| C64::from_polar(1.0, theta * n as f64)).collect()
}

/// Amplitude-damping Kraus operator
/// `A_k = sqrt((1-eta)^k / k!) sqrt(eta)^n a^k`.
pub fn kraus_loss(k: usize, eta: f64, cutoff: usize) -> Result<FockOperator> {
    check_probability("eta", eta)?;
    let mut op = FockOperator::zeros(cutoff);
    for n in k..op.dim {
        op.data[(n - k) * op.dim + n] = C64::new(kraus_element(k, n, eta), 0.0);
    }
    Ok(op)
}

/// `max |sum_k A_k^dagger A_k - I|` over matrix entries.
pub fn completeness_defect(family: &[FockOperator]) -> f64 {
    let Some(first) = family.first() else {
        return f64::INFINITY;
    };
    let mut acc = FockOperator::zeros(first.cutoff());
    for a in family {
        acc = acc.add(&a.adjoint().matmul(a));
    }
    acc.max_abs_diff(&FockOperator::identity(first.cutoff()))
}

/// Kraus operators `A_0..=A_kmax`, extending `k_max` from
/// [`DEFAULT_K_MAX`] until completeness holds within `tol`.
pub fn kraus_family(eta: f64, cutoff: usize, tol: f64) -> Result<Vec<FockOperator>> {
    check_probability("eta", eta)?;
    let mut family: Vec<FockOperator> = (0..=DEFAULT_K_MAX.min(cutoff))
        .map(|k| kraus_loss(k, eta, cutoff))
        .collect::<Result<_>>()?;
    // Diagonal of sum A_k^dag A_k is the binomial CDF; track it directly.
    let defect = |kmax: usize| -> f64 {
        (0..=cutoff)
            .map(|n| {
                let s: f64 = (0..=kmax.min(n)).map(|k| binomial_weight(n, k, eta)).sum();
                (1.0 - s).abs()
            })
            .fold(0.0, f64::max)
    };
    let mut kmax = family.len() - 1;
    while kmax < cutoff && defect(kmax) > tol {
        kmax += 1;
        family.push(kraus_loss(kmax, eta, cutoff)?);
    }
    Ok(family)
}

/// Dense pure state of several modes; the last mode varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiModeState {
    dims: Vec<usize>,
    amps: Vec<C64>,
}

impl MultiModeState {
    pub fn new(dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if len != amps.len() || dims.is_empty() {
            return Err(Error::Dimension(format!(
                "dims {dims:?} need {len} amplitudes, got {}",
                amps.len()
            )));
        }
        Ok(Self { dims, amps })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self {
            dims,
            amps: vec![ZERO; len],
        }
    }

    /// Tensor product of single-mode amplitude vectors.
    pub fn product(factors: &[&[C64]]) -> Self {
        let mut out = Self {
            dims: vec![],
            amps: vec![ONE],
        };
        for f in factors {
            out = out.tensor_raw(f);
        }
        out
    }

    pub fn from_fock(state: &FockState) -> Self {
        Self {
            dims: vec![state.dim()],
            amps: state.amplitudes().to_vec(),
        }
    }

    fn tensor_raw(&self, f: &[C64]) -> Self {
        let mut amps = Vec::with_capacity(self.amps.len() * f.len());
        for a in &self.amps {
            for b in f {
                amps.push(a * b);
            }
        }
        let mut dims = self.dims.clone();
        dims.push(f.len());
        Self { dims, amps }
    }

    pub fn tensor(&self, other: &MultiModeState) -> Self {
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims, amps }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= n);
        }
        self
    }

    pub fn scaled(mut self, c: C64) -> Self {
        self.amps.iter_mut().for_each(|a| *a *= c);
        self
    }

    pub fn add_scaled(mut self, other: &MultiModeState, c: C64) -> Self {
        debug_assert_eq!(self.dims, other.dims);
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += c * b;
        }
        self
    }

    pub fn inner(&self, other: &MultiModeState) -> C64 {
        inner_product(&self.amps, &other.amps)
    }

    /// (outer, dim, inner) block sizes around `mode`.
    fn blocks(&self, mode: usize) -> (usize, usize, usize) {
        let outer = self.dims[..mode].iter().product();
        let inner = self.dims[mode + 1..].iter().product();
        (outer, self.dims[mode], inner)
    }

    pub fn apply_mode(&self, mode: usize, op: &FockOperator) -> Self {
        let (outer, d, inner) = self.blocks(mode);
        assert_eq!(op.dim(), d, "operator dimension mismatch on mode {mode}");
        let mut out = vec![ZERO; self.amps.len()];
        for o in 0..outer {
            for r in 0..d {
                for c in 0..d {
                    let m = op.get(r, c);
                    if m == ZERO {
                        continue;
                    }
                    let src = (o * d + c) * inner;
                    let dst = (o * d + r) * inner;
                    for i in 0..inner {
                        out[dst + i] += m * self.amps[src + i];
                    }
                }
            }
        }
        Self {
            dims: self.dims.clone(),
            amps: out,
        }
    }

    /// Applies `A_k` to one mode without forming the matrix.
    pub fn apply_kraus(&self, mode: usize, k: usize, eta: f64) -> Self {
        let (outer, d, inner) = self.blocks(mode);
        let mut out = vec![ZERO; self.amps.len()];
        for n in k..d {
            let e = kraus_element(k, n, eta);
            if e == 0.0 {
                continue;
            }
            for o in 0..outer {
                let src = (o * d + n) * inner;
                let dst = (o * d + n - k) * inner;
                for i in 0..inner {
                    out[dst + i] = self.amps[src + i] * e;
                }
            }
        }
        Self {
            dims: self.dims.clone(),
            amps: out,
        }
    }

    pub fn apply_diagonal(&self, mode: usize, diag: &[C64]) -> Self {
        let (outer, d, inner) = self.blocks(mode);
        let mut out = self.amps.clone();
        for o in 0..outer {
            for (n, dv) in diag.iter().enumerate().take(d) {
                let base = (o * d + n) * inner;
                out[base..base + inner].iter_mut().for_each(|a| *a *= dv);
            }
        }
        Self {
            dims: self.dims.clone(),
            amps: out,
        }
    }

    /// Applies `diag` to `target` on the branch where the two-level
    /// `control` mode is in its second basis state.
    pub fn apply_controlled_diagonal(&self, control: usize, target: usize, diag: &[C64]) -> Self {
        let strides = self.strides();
        let mut out = self.amps.clone();
        for (idx, a) in out.iter_mut().enumerate() {
            let c = (idx / strides[control]) % self.dims[control];
            if c == 1 {
                let t = (idx / strides[target]) % self.dims[target];
                *a *= diag[t];
            }
        }
        Self {
            dims: self.dims.clone(),
            amps: out,
        }
    }

    /// Controlled-Z between two qubit modes.
    pub fn apply_cz(&self, a: usize, b: usize) -> Self {
        let strides = self.strides();
        let mut out = self.amps.clone();
        for (idx, amp) in out.iter_mut().enumerate() {
            if (idx / strides[a]) % 2 == 1 && (idx / strides[b]) % 2 == 1 {
                *amp = -*amp;
            }
        }
        Self {
            dims: self.dims.clone(),
            amps: out,
        }
    }

    /// Contracts `mode` with `<bra|`, removing the mode.
    pub fn contract(&self, mode: usize, bra: &[C64]) -> Self {
        let (outer, d, inner) = self.blocks(mode);
        let mut out = vec![ZERO; outer * inner];
        for o in 0..outer {
            for (n, b) in bra.iter().enumerate().take(d) {
                let w = b.conj();
                if w == ZERO {
                    continue;
                }
                let src = (o * d + n) * inner;
                for i in 0..inner {
                    out[o * inner + i] += w * self.amps[src + i];
                }
            }
        }
        let mut dims = self.dims.clone();
        dims.remove(mode);
        if dims.is_empty() {
            dims.push(1);
        }
        Self { dims, amps: out }
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.dims.len()];
        for m in (0..self.dims.len().saturating_sub(1)).rev() {
            s[m] = s[m + 1] * self.dims[m + 1];
        }
        s
    }

    /// Reduced density matrix on `keep` (in the given order), row-major.
    pub fn partial_trace(&self, keep: &[usize]) -> (usize, Vec<C64>) {
        let strides = self.strides();
        let traced: Vec<usize> = (0..self.dims.len()).filter(|m| !keep.contains(m)).collect();
        let kdim: usize = keep.iter().map(|&m| self.dims[m]).product();
        let tdim: usize = traced.iter().map(|&m| self.dims[m]).product();
        let index = |kidx: usize, tidx: usize| -> usize {
            let mut idx = 0;
            let mut rem = kidx;
            for &m in keep.iter().rev() {
                idx += (rem % self.dims[m]) * strides[m];
                rem /= self.dims[m];
            }
            let mut rem = tidx;
            for &m in traced.iter().rev() {
                idx += (rem % self.dims[m]) * strides[m];
                rem /= self.dims[m];
            }
            idx
        };
        let mut rho = vec![ZERO; kdim * kdim];
        for t in 0..tdim {
            for r in 0..kdim {
                let a = self.amps[index(r, t)];
                if a == ZERO {
                    continue;
                }
                for c in 0..kdim {
                    rho[r * kdim + c] += a * self.amps[index(c, t)].conj();
                }
            }
        }
        (kdim, rho)
    }
}

/// `<a|b>` for multimode states.
pub fn inner(a: &MultiModeState, b: &MultiModeState) -> C64 {
    a.inner(b)
}

/// Tensor product of two multimode states.
pub fn tensor_product(a: &MultiModeState, b: &MultiModeState) -> MultiModeState {
    a.tensor(b)
}

/// One pure branch of an unraveled mixed state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub weight: f64,
    pub state: MultiModeState,
    /// Photons lost so far on each mode.
    pub losses: Vec<usize>,
}

/// Mixed state as a list of weighted pure trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEnsemble {
    dims: Vec<usize>,
    members: Vec<Trajectory>,
}

impl WeightedEnsemble {
    pub fn pure(state: MultiModeState) -> Self {
        let weight = state.norm_sqr();
        let losses = vec![0; state.num_modes()];
        Self {
            dims: state.dims().to_vec(),
            members: vec![Trajectory {
                weight,
                state: state.normalized(),
                losses,
            }],
        }
    }

    pub fn empty(dims: Vec<usize>) -> Self {
        Self { dims, members: vec![] }
    }

    pub fn from_members(dims: Vec<usize>, members: Vec<Trajectory>) -> Self {
        Self { dims, members }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn members(&self) -> &[Trajectory] {
        &self.members
    }

    pub fn into_members(self) -> Vec<Trajectory> {
        self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.members.iter().map(|t| t.weight).sum()
    }

    pub fn renormalized(mut self) -> Self {
        let w = self.total_weight();
        if w > 0.0 {
            self.members.iter_mut().for_each(|t| t.weight /= w);
        }
        self
    }

    /// Unravels loss with transmittance `eta` on `mode` into trajectories
    /// `k = 0..=k_max`; fails if the discarded weight exceeds
    /// [`LOSS_TAIL_TOL`] of the input weight.
    pub fn apply_loss(&self, mode: usize, eta: f64, k_max: usize) -> Result<Self> {
        check_probability("eta", eta)?;
        let mut members = Vec::new();
        let mut kept = 0.0;
        for t in &self.members {
            for k in 0..=k_max.min(self.dims[mode] - 1) {
                let next = t.state.apply_kraus(mode, k, eta);
                let w = next.norm_sqr();
                if w == 0.0 {
                    continue;
                }
                kept += t.weight * w;
                let mut losses = t.losses.clone();
                losses[mode] += k;
                members.push(Trajectory {
                    weight: t.weight * w,
                    state: next.normalized(),
                    losses,
                });
            }
        }
        let tail = (self.total_weight() - kept).abs();
        if tail > LOSS_TAIL_TOL * self.total_weight().max(1e-300) {
            return Err(Error::LossTail {
                tail,
                tol: LOSS_TAIL_TOL,
                k_max,
            });
        }
        Ok(Self {
            dims: self.dims.clone(),
            members,
        })
    }

    /// Like [`apply_loss`](Self::apply_loss), extending `k_max` from
    /// [`DEFAULT_K_MAX`] until the tail is within tolerance. At
    /// `k_max = cutoff` the unraveling is exact.
    pub fn apply_loss_adaptive(&self, mode: usize, eta: f64) -> Result<Self> {
        let top = self.dims[mode] - 1;
        let mut k = DEFAULT_K_MAX.min(top);
        loop {
            match self.apply_loss(mode, eta, k) {
                Err(Error::LossTail { .. }) if k < top => k = (k + 4).min(top),
                other => return other,
            }
        }
    }

    /// Keeps trajectories whose loss count on `mode` is `residue` mod
    /// `modulus`; returns the renormalized selection and its probability.
    pub fn project_loss_residue(&self, mode: usize, modulus: usize, residue: usize) -> Result<(Self, f64)> {
        if modulus == 0 || residue >= modulus {
            return Err(Error::InvalidParameter {
                name: "residue",
                value: residue as f64,
                reason: "need 0 <= residue < modulus",
            });
        }
        let total = self.total_weight();
        let members: Vec<Trajectory> = self
            .members
            .iter()
            .filter(|t| t.losses[mode] % modulus == residue)
            .cloned()
            .collect();
        let kept = Self {
            dims: self.dims.clone(),
            members,
        };
        let p = if total > 0.0 { kept.total_weight() / total } else { 0.0 };
        Ok((kept.renormalized(), p))
    }

    /// `sum_i w_i |<target|psi_i>|^2 / sum_i w_i`.
    pub fn fidelity_to_pure(&self, target: &MultiModeState) -> f64 {
        let w = self.total_weight();
        if w == 0.0 {
            return 0.0;
        }
        let t = target.clone().normalized();
        self.members
            .iter()
            .map(|m| m.weight * t.inner(&m.state).norm_sqr())
            .sum::<f64>()
            / w
    }

    /// Reduced density matrix of the mixture on `keep`.
    pub fn partial_trace(&self, keep: &[usize]) -> (usize, Vec<C64>) {
        let w = self.total_weight();
        let mut acc: Option<(usize, Vec<C64>)> = None;
        for m in &self.members {
            let (d, rho) = m.state.partial_trace(keep);
            match acc.as_mut() {
                None => acc = Some((d, rho.iter().map(|x| x * (m.weight / w)).collect())),
                Some((_, a)) => a.iter_mut().zip(&rho).for_each(|(x, y)| *x += y * (m.weight / w)),
            }
        }
        acc.unwrap_or((0, vec![]))
    }
}

/// Unravels loss on `mode` of a pure state.
pub fn apply_loss_unraveled(state: &MultiModeState, mode: usize, eta: f64, k_max: usize) -> Result<WeightedEnsemble> {
    WeightedEnsemble::pure(state.clone()).apply_loss(mode, eta, k_max)
}

/// Keeps loss trajectories with count `residue` mod `modulus` on `mode`.
pub fn project_loss_residue(
    ensemble: &WeightedEnsemble,
    mode: usize,
    modulus: usize,
    residue: usize,
) -> Result<(WeightedEnsemble, f64)> {
    ensemble.project_loss_residue(mode, modulus, residue)
}

/// Optimal equal-prior unambiguous discrimination of two pure states.
///
/// `E_a` and `E_b` are rank one, proportional to the projectors orthogonal
/// to the *other* state, scaled by `1 / (1 + |<a|b>|)`; `E_fail` completes
/// them to the projector on the span.
#[derive(Debug, Clone)]
pub struct UsdMeasurement {
    a: FockState,
    b: FockState,
    overlap: C64,
    dual_a: FockState,
    dual_b: FockState,
}

impl UsdMeasurement {
    pub fn new(a: &FockState, b: &FockState) -> Result<Self> {
        let a = a.clone().normalized();
        let b = b.clone().normalized();
        let overlap = a.inner(&b);
        let s = overlap.norm();
        if 1.0 - s < 1e-12 {
            return Err(Error::Indistinguishable);
        }
        let scale = 1.0 / ((1.0 - s * s).sqrt() * (1.0 + s).sqrt());
        // a_perp_b = a - <b|a> b
        let dual_a = a.clone().add_scaled(&b, -overlap.conj()).scaled(C64::new(scale, 0.0));
        let dual_b = b.clone().add_scaled(&a, -overlap).scaled(C64::new(scale, 0.0));
        Ok(Self {
            a,
            b,
            overlap,
            dual_a,
            dual_b,
        })
    }

    pub fn overlap(&self) -> C64 {
        self.overlap
    }

    pub fn success_probability(&self) -> f64 {
        1.0 - self.overlap.norm()
    }

    /// Vector `d` with `E_outcome = |d><d|` (outcome 0 identifies `a`).
    pub fn functional(&self, outcome: usize) -> &FockState {
        if outcome == 0 {
            &self.dual_a
        } else {
            &self.dual_b
        }
    }

    /// `[E_a, E_b, E_fail]` as dense operators.
    pub fn elements(&self) -> [FockOperator; 3] {
        let ea = FockOperator::outer(&self.dual_a, &self.dual_a);
        let eb = FockOperator::outer(&self.dual_b, &self.dual_b);
        let e2 = self.b.clone().add_scaled(&self.a, -self.overlap).normalized();
        let span = FockOperator::outer(&self.a, &self.a).add(&FockOperator::outer(&e2, &e2));
        let fail = span.sub(&ea).sub(&eb);
        [ea, eb, fail]
    }
}

/// Builds the USD measurement for `span_a`, `span_b`.
pub fn usd_povm(span_a: &FockState, span_b: &FockState) -> Result<UsdMeasurement> {
    UsdMeasurement::new(span_a, span_b)
}
