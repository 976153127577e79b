//! One elementary link.
//!
//! An atom `A` at the left source entangles with a light mode through a
//! controlled rotation, giving `(|0>|0_L> + |1>|1_L>)/sqrt(2)`. The light
//! crosses half the link, a syndrome measurement reads the loss residue,
//! a fresh matter qubit `M` interacts with the light, and the light is read
//! out in the logical Z basis by unambiguous state discrimination. The
//! right half is the mirror image, and a Bell measurement on the two `M`
//! qubits leaves `A` and `B` entangled.

use crate::cat::{closed_form, damped_codeword, residue_series, series_coefficients, CatCode, SeriesCoefficients};
use crate::error::{check_positive, Error, Result};
use crate::fock::{rotation_diagonal, FockState, MultiModeState, UsdMeasurement, WeightedEnsemble, C64};
use crate::qubit::{bell_basis, fidelity_phi_plus, PauliFrame, TwoQubit};

pub const DEFAULT_ATTENUATION_DB_PER_KM: f64 = 0.2;

/// Transmittance of half an elementary link.
pub fn half_link_transmittance(link_length_km: f64, attenuation_db_per_km: f64) -> f64 {
    10f64.powf(-attenuation_db_per_km * (link_length_km / 2.0) / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkParams {
    pub code: CatCode,
    /// Transmittance per half link.
    pub eta: f64,
    /// Accepted syndrome residues.
    pub desired: Vec<usize>,
}

impl LinkParams {
    pub fn new(code: CatCode, eta: f64, desired: Vec<usize>) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                value: eta,
                reason: "must lie in (0, 1]",
            });
        }
        if desired.is_empty() {
            return Err(Error::InvalidParameter {
                name: "desired_residues",
                value: 0.0,
                reason: "must not be empty",
            });
        }
        if let Some(&j) = desired.iter().find(|&&j| j >= code.modulus()) {
            return Err(Error::InvalidParameter {
                name: "desired_residues",
                value: j as f64,
                reason: "residue must be below loss_order + 1",
            });
        }
        Ok(Self { code, eta, desired })
    }

    pub fn from_distance(
        code: CatCode,
        link_length_km: f64,
        attenuation_db_per_km: f64,
        desired: Vec<usize>,
    ) -> Result<Self> {
        check_positive("link_length_km", link_length_km)?;
        Self::new(
            code,
            half_link_transmittance(link_length_km, attenuation_db_per_km),
            desired,
        )
    }
}

/// Closed-form statistics of one half link in one residue class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidueStats {
    pub residue: usize,
    /// Probability of the residue.
    pub probability: f64,
    /// Probability that no net logical phase flip occurred.
    pub fidelity: f64,
    /// USD success on the damped codewords of this class.
    pub usd: f64,
}

/// `f_j = S_j^(2s)(beta) / S_j^(s)(beta)` with `beta = (1 - eta) alpha^2`.
pub fn half_link_fidelity(alpha: f64, eta: f64, modulus: usize, residue: usize) -> f64 {
    let beta = (1.0 - eta) * alpha * alpha;
    let all = residue_series(beta, modulus, residue);
    if all == 0.0 {
        return 1.0;
    }
    residue_series(beta, 2 * modulus, residue) / all
}

/// Per-residue closed forms for every residue class.
pub fn residue_stats(alpha: f64, eta: f64, modulus: usize) -> Vec<ResidueStats> {
    (0..modulus)
        .map(|j| ResidueStats {
            residue: j,
            probability: closed_form::syndrome_probability(alpha, eta, modulus, j),
            fidelity: half_link_fidelity(alpha, eta, modulus, j),
            usd: closed_form::usd_probability_damped(alpha, eta, modulus, j),
        })
        .collect()
}

/// Phase flips on the two halves cancel through the Bell measurement.
pub fn compose_halves(f_left: f64, f_right: f64) -> f64 {
    f_left * f_right + (1.0 - f_left) * (1.0 - f_right)
}

/// Link fidelity for residues `(left, right)` from residue series.
pub fn link_fidelity(alpha: f64, eta: f64, modulus: usize, left: usize, right: usize) -> f64 {
    compose_halves(
        half_link_fidelity(alpha, eta, modulus, left),
        half_link_fidelity(alpha, eta, modulus, right),
    )
}

/// One-loss link fidelity from parity sums of squared `C_m`, `D_m`.
pub fn f0_closed_form(code: &CatCode, eta: f64, left: usize, right: usize) -> Result<f64> {
    let x = code.alpha() * code.alpha();
    let m_max = 40 + ((1.0 - eta) * x) as usize;
    let sc = series_coefficients(code, eta, m_max)?;
    Ok(f0_from_series(&sc, left, right))
}

/// Link fidelity for residues `(left, right)` from given coefficients.
pub fn f0_from_series(sc: &SeriesCoefficients, left: usize, right: usize) -> f64 {
    let parity = |v: &[f64]| -> f64 {
        let total: f64 = v.iter().map(|c| c * c).sum();
        if total == 0.0 {
            return 1.0;
        }
        v.iter().step_by(2).map(|c| c * c).sum::<f64>() / total
    };
    let half = |j: usize| {
        if j.is_multiple_of(2) {
            parity(&sc.c)
        } else {
            parity(&sc.d)
        }
    };
    compose_halves(half(left), half(right))
}

/// Probability that one channel shows a desired residue; both halves
/// must agree unless `single_side` is set.
pub fn p_dsm(params: &LinkParams, single_side: bool) -> f64 {
    let s = params.code.modulus();
    let one: f64 = params
        .desired
        .iter()
        .map(|&j| closed_form::syndrome_probability(params.code.alpha(), params.eta, s, j))
        .sum();
    if single_side {
        one
    } else {
        one * one
    }
}

/// `<2 F0 - 1>` over all residue pairs, for a channel that accepts every
/// syndrome.
pub fn averaged_link_channel(params: &LinkParams) -> f64 {
    let stats = residue_stats(params.code.alpha(), params.eta, params.code.modulus());
    let half: f64 = stats.iter().map(|r| r.probability * (2.0 * r.fidelity - 1.0)).sum();
    half * half
}

/// Oracle result for one residue pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidueOutcome {
    pub left: usize,
    pub right: usize,
    pub probability: f64,
    /// Two-atom fidelity to `Phi+` after the frame correction, conditioned
    /// on both readouts succeeding.
    pub fidelity: f64,
    /// Probability that both light readouts succeed.
    pub readout_success: f64,
    pub frame: PauliFrame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutcome {
    pub modulus: usize,
    pub eta: f64,
    pub outcomes: Vec<ResidueOutcome>,
}

impl LinkOutcome {
    pub fn get(&self, left: usize, right: usize) -> Option<&ResidueOutcome> {
        self.outcomes.iter().find(|o| o.left == left && o.right == right)
    }

    pub fn total_probability(&self) -> f64 {
        self.outcomes.iter().map(|o| o.probability).sum()
    }

    /// `sum_pairs p (2F - 1)`.
    pub fn averaged_parameter(&self) -> f64 {
        self.outcomes
            .iter()
            .map(|o| o.probability * (2.0 * o.fidelity - 1.0))
            .sum()
    }
}

/// Logical readout of a damped light mode in residue class `residue`.
pub fn damped_readout(code: &CatCode, eta: f64, residue: usize) -> Result<Option<UsdMeasurement>> {
    let zero = damped_codeword(code, eta, residue, 0)?;
    let one = damped_codeword(code, eta, residue, 1)?;
    match (zero, one) {
        (Some(a), Some(b)) => Ok(Some(UsdMeasurement::new(&a, &b)?)),
        _ => Ok(None),
    }
}

/// `(|0>|0_L> + |1>|1_L>)/sqrt(2)` on modes `[qubit, light]`.
pub fn atom_light_pair(code: &CatCode, cutoff: usize) -> Result<MultiModeState> {
    let plus = [C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0); 2];
    let zero = code.codeword(0, cutoff)?;
    let state = MultiModeState::product(&[&plus, zero.amplitudes()]);
    Ok(state.apply_controlled_diagonal(0, 1, &rotation_diagonal(code.logical_angle(), cutoff)))
}

/// Atom–memory state after one readout outcome of one trajectory.
#[derive(Debug, Clone)]
struct HalfTrajectory {
    weight: f64,
    losses: usize,
    state: TwoQubit,
}

#[derive(Debug, Clone)]
struct HalfBranch {
    trajectories: Vec<HalfTrajectory>,
}

/// Branches of one half link in class `residue`, one per readout outcome.
/// Trajectory weights are conditional on the residue; over both branches
/// they sum to the readout success probability.
fn half_link_branches(code: &CatCode, eta: f64, residue: usize) -> Result<(f64, Vec<HalfBranch>)> {
    let cutoff = code.cutoff();
    let pair = atom_light_pair(code, cutoff)?;
    let lossy = WeightedEnsemble::pure(pair).apply_loss_adaptive(1, eta)?;
    let (class, p) = lossy.project_loss_residue(1, code.modulus(), residue)?;
    if p == 0.0 {
        return Ok((0.0, vec![]));
    }
    let Some(usd) = damped_readout(code, eta, residue)? else {
        return Ok((p, vec![]));
    };
    let plus = [C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0); 2];
    let memory = MultiModeState::product(&[&plus]);
    let rot = rotation_diagonal(code.logical_angle(), cutoff);
    let coupled: Vec<(f64, usize, MultiModeState)> = class
        .members()
        .iter()
        .map(|t| {
            let joint = t.state.tensor(&memory).apply_controlled_diagonal(2, 1, &rot);
            (t.weight, t.losses[1], joint)
        })
        .collect();
    let mut branches = Vec::with_capacity(2);
    for outcome in 0..2 {
        let d: &FockState = usd.functional(outcome);
        let mut trajectories = Vec::with_capacity(coupled.len());
        for (w, losses, joint) in &coupled {
            let out = joint.contract(1, d.amplitudes());
            let n = out.norm_sqr();
            if n == 0.0 {
                continue;
            }
            let out = out.normalized();
            let a = out.amplitudes();
            trajectories.push(HalfTrajectory {
                weight: w * n,
                losses: *losses,
                state: [a[0], a[1], a[2], a[3]],
            });
        }
        branches.push(HalfBranch { trajectories });
    }
    Ok((p, branches))
}

/// `psi_AB[a][b] = sum_{x,y} conj(bell[x][y]) L[a][x] R[b][y]`.
fn swap_memories(left: &TwoQubit, right: &TwoQubit, bell: &TwoQubit) -> TwoQubit {
    let mut out = [C64::new(0.0, 0.0); 4];
    for a in 0..2 {
        for b in 0..2 {
            let mut acc = C64::new(0.0, 0.0);
            for x in 0..2 {
                for y in 0..2 {
                    acc += bell[2 * x + y].conj() * left[2 * a + x] * right[2 * b + y];
                }
            }
            out[2 * a + b] = acc;
        }
    }
    out
}

/// Frame-corrected fidelity of the swapped pair, averaged over readout and
/// Bell outcomes; the frame of each branch comes from its least-lossy
/// trajectory pair. Returns (success probability, fidelity, canonical frame).
fn compose(left: &[HalfBranch], right: &[HalfBranch]) -> (f64, f64, PauliFrame) {
    let mut success = 0.0;
    let mut weighted_fid = 0.0;
    let mut canonical = None;
    for lb in left {
        for rb in right {
            for bell in bell_basis() {
                let (Some(lt), Some(rt)) = (
                    lb.trajectories.iter().min_by_key(|t| t.losses),
                    rb.trajectories.iter().min_by_key(|t| t.losses),
                ) else {
                    continue;
                };
                let frame = PauliFrame::aligning(&swap_memories(&lt.state, &rt.state, &bell));
                canonical.get_or_insert(frame);
                let mut p = 0.0;
                let mut pf = 0.0;
                for l in &lb.trajectories {
                    for r in &rb.trajectories {
                        let psi = swap_memories(&l.state, &r.state, &bell);
                        let w = l.weight * r.weight * crate::qubit::norm_sqr(&psi);
                        p += w;
                        pf += w * fidelity_phi_plus(&frame.apply(&psi));
                    }
                }
                success += p;
                weighted_fid += pf;
            }
        }
    }
    let fid = if success > 0.0 { weighted_fid / success } else { 0.0 };
    (success, fid, canonical.unwrap_or_default())
}

/// Exact Fock-space evaluation of every residue pair.
pub fn link_oracle(params: &LinkParams) -> Result<LinkOutcome> {
    let s = params.code.modulus();
    let halves: Vec<(f64, Vec<HalfBranch>)> = (0..s)
        .map(|j| half_link_branches(&params.code, params.eta, j))
        .collect::<Result<_>>()?;
    let mut outcomes = Vec::with_capacity(s * s);
    for (jl, (pl, bl)) in halves.iter().enumerate() {
        for (jr, (pr, br)) in halves.iter().enumerate() {
            let (success, fidelity, frame) = compose(bl, br);
            outcomes.push(ResidueOutcome {
                left: jl,
                right: jr,
                probability: pl * pr,
                fidelity,
                readout_success: success,
                frame,
            });
        }
    }
    Ok(LinkOutcome {
        modulus: s,
        eta: params.eta,
        outcomes,
    })
}
