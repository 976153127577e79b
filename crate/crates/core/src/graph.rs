//! Hybrid matter–light graph states built from cat-code nodes.
//!
//! Each photonic node starts in `|0_L>` and is attached to a matter qubit
//! in `|+>` by a controlled logical rotation. Matter qubits are linked by
//! CZ gates and then measured in the X basis, which leaves a graph state
//! on the photonic nodes. Undesired photonic nodes are removed by a logical
//! Z readout; every measurement outcome goes into a Z Pauli frame instead
//! of a physical correction.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::cat::CatCode;
use crate::error::{Error, Result};
use crate::fock::{rotation_diagonal, MultiModeState, Trajectory, WeightedEnsemble, C64};
use crate::link::damped_readout;
use crate::qubit::{fidelity_phi_plus, hadamard_second, norm_sqr, PauliFrame, TwoQubit};

/// Largest dense amplitude count a graph may allocate.
pub const AMPLITUDE_BUDGET: usize = 1 << 23;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Graph over photonic cat nodes, optionally still carrying the matter
/// qubits. With matter present the mode order is all matter qubits, then
/// all photonic modes; afterwards only photonic modes remain.
#[derive(Debug, Clone)]
pub struct HybridGraph {
    code: CatCode,
    cutoff: usize,
    n_photonic: usize,
    edges: Vec<(usize, usize)>,
    sides: Vec<Side>,
    matter_present: bool,
    state: MultiModeState,
    z_frame: Vec<bool>,
}

impl HybridGraph {
    pub fn code(&self) -> &CatCode {
        &self.code
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn n_photonic(&self) -> usize {
        self.n_photonic
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    pub fn has_matter(&self) -> bool {
        self.matter_present
    }

    pub fn state(&self) -> &MultiModeState {
        &self.state
    }

    /// Pending logical Z correction per photonic node.
    pub fn z_frame(&self) -> &[bool] {
        &self.z_frame
    }
}

fn plus() -> [C64; 2] {
    [C64::new(FRAC_1_SQRT_2, 0.0); 2]
}

/// Builds the hybrid graph with matter CZ gates on `edges`.
pub fn build_hybrid_graph(
    code: &CatCode,
    cutoff: usize,
    edges: &[(usize, usize)],
    sides: &[Side],
) -> Result<HybridGraph> {
    let n = sides.len();
    if n < 2 {
        return Err(Error::Dimension("a graph needs at least two photonic nodes".into()));
    }
    if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a >= n || b >= n || a == b) {
        return Err(Error::Dimension(format!("invalid edge ({a}, {b}) for {n} nodes")));
    }
    let amps = (1usize << n).saturating_mul((cutoff + 1).saturating_pow(n as u32));
    if amps > AMPLITUDE_BUDGET {
        return Err(Error::Dimension(format!(
            "{n} photonic nodes at cutoff {cutoff} need {amps} amplitudes, budget is {AMPLITUDE_BUDGET}"
        )));
    }
    let zero = code.codeword(0, cutoff)?;
    let p = plus();
    let mut factors: Vec<&[C64]> = vec![&p; n];
    factors.extend(std::iter::repeat_n(zero.amplitudes(), n));
    let mut state = MultiModeState::product(&factors);
    for &(a, b) in edges {
        state = state.apply_cz(a, b);
    }
    let rot = rotation_diagonal(code.logical_angle(), cutoff);
    for i in 0..n {
        state = state.apply_controlled_diagonal(i, n + i, &rot);
    }
    Ok(HybridGraph {
        code: *code,
        cutoff,
        n_photonic: n,
        edges: edges.to_vec(),
        sides: sides.to_vec(),
        matter_present: true,
        state,
        z_frame: vec![false; n],
    })
}

/// Linear chain of `n_photonic` nodes with alternating sides.
pub fn build_hybrid_chain(n_photonic: usize, code: &CatCode, cutoff: usize) -> Result<HybridGraph> {
    let edges: Vec<(usize, usize)> = (1..n_photonic).map(|i| (i - 1, i)).collect();
    build_hybrid_graph(code, cutoff, &edges, &alternating_sides(n_photonic))
}

/// `2m` nodes alternating left/right, every left node joined to every right
/// node. For `m = 2` this is the four-cycle 0-1-2-3-0.
pub fn build_multiplexed_graph(channels: usize, code: &CatCode, cutoff: usize) -> Result<HybridGraph> {
    let n = 2 * channels;
    let mut edges = Vec::new();
    for l in (0..n).step_by(2) {
        for r in (1..n).step_by(2) {
            let e = (l.min(r), l.max(r));
            edges.push(e);
        }
    }
    edges.sort_unstable();
    build_hybrid_graph(code, cutoff, &edges, &alternating_sides(n))
}

fn alternating_sides(n: usize) -> Vec<Side> {
    (0..n)
        .map(|i| if i % 2 == 0 { Side::Left } else { Side::Right })
        .collect()
}

/// X-basis measurement of every matter qubit; `true` is the `-` outcome,
/// recorded as a logical Z on the partner photonic node.
pub fn measure_matter_x(graph: &HybridGraph, minus: &[bool]) -> Result<HybridGraph> {
    if !graph.matter_present {
        return Err(Error::Dimension("matter qubits were already measured".into()));
    }
    if minus.is_empty() || minus.len() != graph.n_photonic {
        return Err(Error::Dimension(format!(
            "expected {} matter outcomes, got {}",
            graph.n_photonic,
            minus.len()
        )));
    }
    let h = FRAC_1_SQRT_2;
    let mut state = graph.state.clone();
    let mut z_frame = graph.z_frame.clone();
    for (i, &m) in minus.iter().enumerate() {
        let bra = [C64::new(h, 0.0), C64::new(if m { -h } else { h }, 0.0)];
        state = state.contract(0, &bra);
        z_frame[i] ^= m;
    }
    Ok(HybridGraph {
        state: state.normalized(),
        matter_present: false,
        z_frame,
        ..graph.clone()
    })
}

/// Graph-state amplitudes over logical bit strings (first node is the most
/// significant bit), with `Z` applied where `z_frame` is set.
pub fn graph_coefficients(n: usize, edges: &[(usize, usize)], z_frame: &[bool]) -> Vec<C64> {
    let scale = (1.0 / (1u64 << n) as f64).sqrt();
    (0..1usize << n)
        .map(|b| {
            let bit = |i: usize| (b >> (n - 1 - i)) & 1;
            let mut parity = edges.iter().map(|&(x, y)| bit(x) & bit(y)).sum::<usize>();
            parity += z_frame
                .iter()
                .enumerate()
                .filter(|(_, &z)| z)
                .map(|(i, _)| bit(i))
                .sum::<usize>();
            C64::new(if parity % 2 == 0 { scale } else { -scale }, 0.0)
        })
        .collect()
}

/// `sum_b c_b |b_0> ... |b_{n-1}>` in codewords, normalized.
pub fn logical_state(code: &CatCode, cutoff: usize, coeffs: &[C64]) -> Result<MultiModeState> {
    let n = coeffs.len().trailing_zeros() as usize;
    if 1usize << n != coeffs.len() {
        return Err(Error::Dimension("coefficient count must be a power of two".into()));
    }
    let words = [code.codeword(0, cutoff)?, code.codeword(1, cutoff)?];
    let mut acc = MultiModeState::zeros(vec![cutoff + 1; n]);
    for (b, c) in coeffs.iter().enumerate() {
        if c.norm() == 0.0 {
            continue;
        }
        let factors: Vec<&[C64]> = (0..n).map(|i| words[(b >> (n - 1 - i)) & 1].amplitudes()).collect();
        acc = acc.add_scaled(&MultiModeState::product(&factors), *c);
    }
    Ok(acc.normalized())
}

/// Loss-unraveled state restricted to surviving photonic nodes.
#[derive(Debug, Clone)]
pub struct PrunedGraph {
    pub code: CatCode,
    pub eta: f64,
    /// Surviving node indices, in mode order.
    pub survivors: Vec<usize>,
    pub residues: Vec<usize>,
    /// Edges among survivors, in original node indices.
    pub edges: Vec<(usize, usize)>,
    /// Logical Z frame per survivor.
    pub z_frame: Vec<bool>,
    /// Joint probability of the residues and the pruning outcomes.
    pub probability: f64,
    /// Normalized trajectories over the survivor modes.
    pub ensemble: WeightedEnsemble,
}

fn lose_and_project(
    ens: &WeightedEnsemble,
    mode: usize,
    eta: f64,
    modulus: usize,
    residue: usize,
) -> Result<(WeightedEnsemble, f64)> {
    ens.apply_loss_adaptive(mode, eta)?
        .project_loss_residue(mode, modulus, residue)
}

/// Contracts `mode` of every trajectory with the readout functional of
/// `outcome`; returns the renormalized ensemble and the success weight.
fn read_out_mode(
    ens: &WeightedEnsemble,
    code: &CatCode,
    eta: f64,
    mode: usize,
    residue: usize,
    outcome: u8,
) -> Result<(WeightedEnsemble, f64)> {
    let Some(usd) = damped_readout(code, eta, residue)? else {
        return Ok((WeightedEnsemble::empty(vec![]), 0.0));
    };
    let d = usd.functional(outcome as usize).amplitudes();
    let mut members = Vec::with_capacity(ens.len());
    let mut dims = ens.dims().to_vec();
    dims.remove(mode);
    for t in ens.members() {
        let out = t.state.contract(mode, d);
        let n = out.norm_sqr();
        if n == 0.0 {
            continue;
        }
        let mut losses = t.losses.clone();
        losses.remove(mode);
        members.push(Trajectory {
            weight: t.weight * n,
            state: out.normalized(),
            losses,
        });
    }
    let kept = WeightedEnsemble::from_members(dims, members);
    let p = kept.total_weight() / ens.total_weight();
    Ok((kept.renormalized(), p))
}

/// Transmits every node with transmittance `eta`, keeps the observed
/// `residues`, and Z-reads the nodes whose residue is not in `desired`
/// with the given outcomes (one per pruned node, in node order). A pruned
/// node reading `1` flips the Z frame of its neighbours.
pub fn prune_undesired_nodes(
    graph: &HybridGraph,
    eta: f64,
    residues: &[usize],
    desired: &[usize],
    z_outcomes: &[u8],
) -> Result<PrunedGraph> {
    let n = graph.n_photonic;
    if residues.len() != n {
        return Err(Error::Dimension(format!(
            "expected {n} residues, got {}",
            residues.len()
        )));
    }
    let pruned: Vec<usize> = (0..n).filter(|&i| !desired.contains(&residues[i])).collect();
    prune_nodes(graph, eta, residues, &pruned, z_outcomes)
}

/// Like [`prune_undesired_nodes`] with the pruned nodes given explicitly.
pub fn prune_nodes(
    graph: &HybridGraph,
    eta: f64,
    residues: &[usize],
    pruned: &[usize],
    z_outcomes: &[u8],
) -> Result<PrunedGraph> {
    if graph.matter_present {
        return Err(Error::Dimension("measure the matter qubits before pruning".into()));
    }
    let n = graph.n_photonic;
    if residues.len() != n {
        return Err(Error::Dimension(format!(
            "expected {n} residues, got {}",
            residues.len()
        )));
    }
    let survivors: Vec<usize> = (0..n).filter(|i| !pruned.contains(i)).collect();
    for side in [Side::Left, Side::Right] {
        if !survivors.iter().any(|&i| graph.sides[i] == side) {
            return Err(Error::NoSurvivor(match side {
                Side::Left => "left",
                Side::Right => "right",
            }));
        }
    }
    if z_outcomes.len() != pruned.len() {
        return Err(Error::Dimension(format!(
            "expected {} Z outcomes, got {}",
            pruned.len(),
            z_outcomes.len()
        )));
    }
    let s = graph.code.modulus();
    let mut labels: Vec<usize> = (0..n).collect();
    let mut edges = graph.edges.clone();
    let mut z_frame = graph.z_frame.clone();
    let mut ens = WeightedEnsemble::pure(graph.state.clone());
    let mut probability = 1.0;
    for (&node, &z) in pruned.iter().zip(z_outcomes) {
        let mode = labels.iter().position(|&l| l == node).expect("label present");
        let (lossy, p) = lose_and_project(&ens, mode, eta, s, residues[node])?;
        probability *= p;
        if p == 0.0 {
            ens = lossy;
            break;
        }
        let (read, p) = read_out_mode(&lossy, &graph.code, eta, mode, residues[node], z)?;
        probability *= p;
        ens = read;
        labels.remove(mode);
        if z == 1 {
            for nb in edges
                .iter()
                .filter_map(|&(a, b)| (a == node).then_some(b).or((b == node).then_some(a)))
                .collect::<Vec<_>>()
            {
                z_frame[nb] ^= true;
            }
        }
        edges.retain(|&(a, b)| a != node && b != node);
        if probability == 0.0 {
            break;
        }
    }
    if probability > 0.0 {
        for (mode, &node) in labels.iter().enumerate() {
            let (lossy, p) = lose_and_project(&ens, mode, eta, s, residues[node])?;
            probability *= p;
            ens = lossy;
            if p == 0.0 {
                break;
            }
        }
    }
    Ok(PrunedGraph {
        code: graph.code,
        eta,
        residues: survivors.iter().map(|&i| residues[i]).collect(),
        z_frame: survivors.iter().map(|&i| z_frame[i]).collect(),
        survivors,
        edges,
        probability,
        ensemble: ens,
    })
}

/// Two-atom trajectories after reading both survivors into fresh matter
/// qubits with outcomes `(o_left, o_right)`.
#[derive(Debug, Clone)]
pub struct AtomBranch {
    /// Probability of these readout outcomes given the pruned state.
    pub probability: f64,
    pub trajectories: Vec<(f64, usize, TwoQubit)>,
}

impl AtomBranch {
    /// Fidelity to the two-node graph state after a Hadamard on the second
    /// atom, with the frame fixed by the least-lossy trajectory.
    pub fn fidelity(&self) -> f64 {
        let Some(dominant) = self.trajectories.iter().min_by_key(|t| t.1) else {
            return 0.0;
        };
        let frame = PauliFrame::aligning(&hadamard_second(&dominant.2));
        let w: f64 = self.trajectories.iter().map(|t| t.0).sum();
        self.trajectories
            .iter()
            .map(|(wt, _, psi)| wt * fidelity_phi_plus(&frame.apply(&hadamard_second(psi))))
            .sum::<f64>()
            / w
    }
}

/// Reads two surviving photonic modes into matter qubits.
pub fn read_survivors(pruned: &PrunedGraph, outcomes: [u8; 2]) -> Result<AtomBranch> {
    if pruned.survivors.len() != 2 {
        return Err(Error::Unsupported(format!(
            "atom readout needs exactly two survivors, got {}",
            pruned.survivors.len()
        )));
    }
    let rot = rotation_diagonal(pruned.code.logical_angle(), pruned.ensemble.dims()[0] - 1);
    let p = plus();
    let atom = MultiModeState::product(&[&p]);
    let mut probability = 0.0;
    let mut trajectories = Vec::new();
    let usd = [
        damped_readout(&pruned.code, pruned.eta, pruned.residues[0])?,
        damped_readout(&pruned.code, pruned.eta, pruned.residues[1])?,
    ];
    let (Some(u0), Some(u1)) = (&usd[0], &usd[1]) else {
        return Ok(AtomBranch {
            probability: 0.0,
            trajectories,
        });
    };
    let d0 = u0.functional(outcomes[0] as usize).amplitudes();
    let d1 = u1.functional(outcomes[1] as usize).amplitudes();
    for t in pruned.ensemble.members() {
        // modes: light0, light1 -> light0, light1, atom0, atom1
        let joint = t
            .state
            .tensor(&atom)
            .tensor(&atom)
            .apply_controlled_diagonal(2, 0, &rot)
            .apply_controlled_diagonal(3, 1, &rot)
            .contract(0, d0)
            .contract(0, d1);
        let a = joint.amplitudes();
        let psi = [a[0], a[1], a[2], a[3]];
        let n = norm_sqr(&psi);
        if n == 0.0 {
            continue;
        }
        probability += t.weight * n;
        let scale = 1.0 / n.sqrt();
        trajectories.push((t.weight * n, t.losses.iter().sum(), psi.map(|x| x * scale)));
    }
    Ok(AtomBranch {
        probability,
        trajectories,
    })
}

/// Direct transmission of a two-node graph carrying `z_frame`.
pub fn direct_pair(
    code: &CatCode,
    cutoff: usize,
    eta: f64,
    residues: [usize; 2],
    z_frame: [bool; 2],
) -> Result<PrunedGraph> {
    let coeffs = graph_coefficients(2, &[(0, 1)], &z_frame);
    let state = logical_state(code, cutoff, &coeffs)?;
    let s = code.modulus();
    let mut ens = WeightedEnsemble::pure(state);
    let mut probability = 1.0;
    for (mode, &residue) in residues.iter().enumerate() {
        let (next, p) = lose_and_project(&ens, mode, eta, s, residue)?;
        ens = next;
        probability *= p;
    }
    Ok(PrunedGraph {
        code: *code,
        eta,
        survivors: vec![0, 1],
        residues: residues.to_vec(),
        edges: vec![(0, 1)],
        z_frame: z_frame.to_vec(),
        probability,
        ensemble: ens,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceParams {
    pub alpha: f64,
    pub eta: f64,
}

/// Per pruning-branch comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceBranch {
    /// Matter X outcomes (`true` for `-`).
    pub matter_minus: [bool; 4],
    pub z_outcomes: [u8; 2],
    /// Probability of this pruning outcome given pruning succeeded.
    pub probability: f64,
    pub fidelity_pruned: f64,
    pub fidelity_direct: f64,
    /// Largest gap between the conditional readout distributions.
    pub readout_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub params: EquivalenceParams,
    pub branches: Vec<EquivalenceBranch>,
    /// Largest fidelity or readout-probability gap between the two paths.
    pub max_deviation: f64,
    /// Spread of frame-corrected fidelities across all outcome branches.
    pub frame_spread: f64,
    /// `sum_z P(z | pruning success)` farthest from one over matter
    /// outcome patterns.
    pub pruning_total: f64,
    pub tolerance: f64,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }
}

/// Compares the four-node graph with nodes 1 and 2 pruned (odd losses)
/// against direct transmission of a two-node graph (even losses on both).
pub fn equivalence_check(params: EquivalenceParams) -> Result<EquivalenceReport> {
    let code = CatCode::new(params.alpha, 1)?;
    let cutoff = code.cutoff();
    let hybrid = build_multiplexed_graph(2, &code, cutoff)?;
    // Without loss odd residues cannot occur; prune even nodes instead.
    let residues = if params.eta < 1.0 { [0, 1, 1, 0] } else { [0; 4] };
    let mut branches = Vec::new();
    let mut fidelities = Vec::new();
    let mut pruning_total: f64 = 1.0;
    for minus in MATTER_PATTERNS {
        let photonic = measure_matter_x(&hybrid, &minus)?;
        let mut raw = Vec::with_capacity(4);
        for z in OUTCOME_PAIRS {
            let pruned = prune_nodes(&photonic, params.eta, &residues, &[1, 2], &z)?;
            let frame = [pruned.z_frame[0], pruned.z_frame[1]];
            let direct = direct_pair(&code, cutoff, params.eta, [residues[0], residues[3]], frame)?;
            let mut pr = [0.0; 4];
            let mut dr = [0.0; 4];
            let mut fp = 0.0;
            let mut fd = 0.0;
            for (i, o) in OUTCOME_PAIRS.into_iter().enumerate() {
                let a = read_survivors(&pruned, o)?;
                let b = read_survivors(&direct, o)?;
                pr[i] = a.probability;
                dr[i] = b.probability;
                let (fa, fb) = (a.fidelity(), b.fidelity());
                fidelities.push(fa);
                fp += a.probability * fa;
                fd += b.probability * fb;
            }
            let (sp, sd) = (pr.iter().sum::<f64>(), dr.iter().sum::<f64>());
            let readout_deviation = pr
                .iter()
                .zip(&dr)
                .map(|(a, b)| (a / sp - b / sd).abs())
                .fold(0.0, f64::max);
            raw.push((z, pruned.probability, fp / sp, fd / sd, readout_deviation));
        }
        let total: f64 = raw.iter().map(|r| r.1).sum();
        let sum: f64 = raw.iter().map(|r| r.1 / total).sum();
        if (sum - 1.0).abs() > (pruning_total - 1.0).abs() {
            pruning_total = sum;
        }
        branches.extend(raw.into_iter().map(|(z, p, fp, fd, rd)| EquivalenceBranch {
            matter_minus: minus,
            z_outcomes: z,
            probability: p / total,
            fidelity_pruned: fp,
            fidelity_direct: fd,
            readout_deviation: rd,
        }));
    }
    let max_deviation = branches
        .iter()
        .map(|b| (b.fidelity_pruned - b.fidelity_direct).abs().max(b.readout_deviation))
        .fold(0.0, f64::max);
    let lo = fidelities.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = fidelities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(EquivalenceReport {
        params,
        branches,
        max_deviation,
        frame_spread: hi - lo,
        pruning_total,
        tolerance: 1e-8,
    })
}

const OUTCOME_PAIRS: [[u8; 2]; 4] = [[0, 0], [0, 1], [1, 0], [1, 1]];
const MATTER_PATTERNS: [[bool; 4]; 2] = [[false; 4], [true, false, false, true]];
