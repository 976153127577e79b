//! Closed-form secret-key-rate model of the repeater chain.

use serde::{Deserialize, Serialize};

use crate::cat::{closed_form, CatCode};
use crate::error::{check_positive, check_probability, Error, Result};
use crate::link::{
    compose_halves, half_link_transmittance, residue_stats, LinkOutcome, LinkParams, DEFAULT_ATTENUATION_DB_PER_KM,
};

pub const DEFAULT_FIBER_SPEED_M_PER_S: f64 = 2e8;
pub const DEFAULT_INTERACTION_TIME_S: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Multiplexed channels with quantum memories at the sources.
    #[default]
    Qm,
    /// Multiplexed channels joined through photonic graph states.
    Graph,
    /// One channel, accepting every syndrome outcome.
    SingleChannelAvg,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Qm => "qm",
            Variant::Graph => "graph",
            Variant::SingleChannelAvg => "single-channel-avg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryModel {
    #[default]
    None,
    Depolarizing,
    Dephasing,
}

impl MemoryModel {
    pub fn name(&self) -> &'static str {
        match self {
            MemoryModel::None => "none",
            MemoryModel::Depolarizing => "depolarizing",
            MemoryModel::Dephasing => "dephasing",
        }
    }
}

/// Which codewords the readout discriminates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UsdCodewords {
    /// Codewords after loss in the observed residue class.
    #[default]
    Damped,
    /// Codewords as prepared.
    Original,
}

impl UsdCodewords {
    pub fn name(&self) -> &'static str {
        match self {
            UsdCodewords::Damped => "damped",
            UsdCodewords::Original => "original",
        }
    }
}

/// Full chain parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub total_distance_km: f64,
    pub link_length_km: f64,
    pub channels: usize,
    pub alpha: f64,
    pub loss_order: usize,
    /// Gate and measurement success probability `p_m`.
    pub gate_success: f64,
    /// Light–matter interaction time `t0`.
    pub interaction_time_s: f64,
    pub fiber_speed_m_per_s: f64,
    pub attenuation_db_per_km: f64,
    pub variant: Variant,
    pub memory: MemoryModel,
    pub coherence_time_s: f64,
    pub desired_residues: Vec<usize>,
    /// Count the desired-syndrome probability on one half link only.
    pub single_side: bool,
    pub usd_codewords: UsdCodewords,
    /// Matter qubits per channel per elementary link; `N_s` is this times
    /// the channel count.
    pub matter_qubits_per_channel: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            total_distance_km: 1000.0,
            link_length_km: 1.0,
            channels: 1,
            alpha: 1.268,
            loss_order: 1,
            gate_success: 1.0,
            interaction_time_s: DEFAULT_INTERACTION_TIME_S,
            fiber_speed_m_per_s: DEFAULT_FIBER_SPEED_M_PER_S,
            attenuation_db_per_km: DEFAULT_ATTENUATION_DB_PER_KM,
            variant: Variant::Qm,
            memory: MemoryModel::None,
            coherence_time_s: 1.0,
            desired_residues: vec![0],
            single_side: false,
            usd_codewords: UsdCodewords::Damped,
            matter_qubits_per_channel: 1.0,
        }
    }
}

impl ProtocolConfig {
    pub fn code(&self) -> Result<CatCode> {
        CatCode::new(self.alpha, self.loss_order)
    }

    /// Transmittance of half an elementary link.
    pub fn eta(&self) -> f64 {
        half_link_transmittance(self.link_length_km, self.attenuation_db_per_km)
    }

    pub fn link_params(&self) -> Result<LinkParams> {
        LinkParams::new(self.code()?, self.eta(), self.desired_residues.clone())
    }

    /// `L_tot / L0` as a real number.
    pub fn links_real(&self) -> f64 {
        self.total_distance_km / self.link_length_km
    }

    /// `L_tot / L0`, required to be an integer within 1e-9 km.
    pub fn links(&self) -> Result<usize> {
        let n = self.links_real();
        let rounded = n.round();
        if rounded < 1.0 || (rounded * self.link_length_km - self.total_distance_km).abs() > 1e-9 {
            return Err(Error::InvalidParameter {
                name: "total_distance_km",
                value: self.total_distance_km,
                reason: "must be a positive integer multiple of link_length_km",
            });
        }
        Ok(rounded as usize)
    }

    /// Checks every field except divisibility of the distances.
    pub fn validate_fields(&self) -> Result<()> {
        check_positive("total_distance_km", self.total_distance_km)?;
        check_positive("link_length_km", self.link_length_km)?;
        check_positive("alpha", self.alpha)?;
        check_probability("gate_success", self.gate_success)?;
        check_positive("interaction_time_s", self.interaction_time_s)?;
        check_positive("fiber_speed_m_per_s", self.fiber_speed_m_per_s)?;
        if !(self.attenuation_db_per_km >= 0.0 && self.attenuation_db_per_km.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "attenuation_db_per_km",
                value: self.attenuation_db_per_km,
                reason: "must be non-negative",
            });
        }
        if self.channels == 0 {
            return Err(Error::InvalidParameter {
                name: "channels",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        if self.memory != MemoryModel::None {
            check_positive("coherence_time_s", self.coherence_time_s)?;
        }
        if self.matter_qubits_per_channel.is_nan() || self.matter_qubits_per_channel <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "matter_qubits_per_channel",
                value: self.matter_qubits_per_channel,
                reason: "must be positive",
            });
        }
        self.link_params()?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_fields()?;
        self.links()?;
        Ok(())
    }

    /// Matter qubits per elementary link, `N_s`.
    pub fn matter_qubits(&self) -> f64 {
        self.matter_qubits_per_channel * self.channels as f64
    }
}

/// Link quantities consumed by the rate formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkInputs {
    /// Desired-syndrome probability of one channel.
    pub p_dsm: f64,
    /// Link fidelity given desired syndromes on both halves.
    pub f0: f64,
    /// Readout success of one link (both halves) given desired syndromes.
    pub p_usd: f64,
    /// `<2 F0 - 1>` over every residue pair.
    pub avg_parameter: f64,
    /// Readout success of one link averaged over every residue pair.
    pub avg_usd: f64,
}

impl LinkInputs {
    /// Closed forms for the configured link.
    pub fn closed_form(config: &ProtocolConfig) -> Result<Self> {
        let params = config.link_params()?;
        let s = params.code.modulus();
        let stats = residue_stats(config.alpha, params.eta, s);
        let original = closed_form::usd_probability(config.alpha, s);
        let usd = |j: usize| match config.usd_codewords {
            UsdCodewords::Damped => stats[j].usd,
            UsdCodewords::Original => original,
        };
        let p_single: f64 = params.desired.iter().map(|&j| stats[j].probability).sum();
        let mut f_acc = 0.0;
        for &l in &params.desired {
            for &r in &params.desired {
                f_acc +=
                    stats[l].probability * stats[r].probability * compose_halves(stats[l].fidelity, stats[r].fidelity);
            }
        }
        let u_single: f64 = params.desired.iter().map(|&j| stats[j].probability * usd(j)).sum();
        let half_param: f64 = stats.iter().map(|r| r.probability * (2.0 * r.fidelity - 1.0)).sum();
        let avg_u: f64 = stats.iter().map(|r| r.probability * usd(r.residue)).sum();
        let (f0, p_usd) = if p_single > 0.0 {
            (f_acc / (p_single * p_single), (u_single / p_single).powi(2))
        } else {
            (0.5, 0.0)
        };
        Ok(Self {
            p_dsm: if config.single_side {
                p_single
            } else {
                p_single * p_single
            },
            f0,
            p_usd,
            avg_parameter: half_param * half_param,
            avg_usd: avg_u * avg_u,
        })
    }

    /// The same quantities from an exact link evaluation (damped readout).
    pub fn from_outcome(config: &ProtocolConfig, outcome: &LinkOutcome) -> Self {
        let desired = &config.desired_residues;
        let mut p = 0.0;
        let mut f = 0.0;
        let mut u = 0.0;
        for o in outcome
            .outcomes
            .iter()
            .filter(|o| desired.contains(&o.left) && desired.contains(&o.right))
        {
            p += o.probability;
            f += o.probability * o.fidelity;
            u += o.probability * o.readout_success;
        }
        let p_single = p.sqrt();
        Self {
            p_dsm: if config.single_side { p_single } else { p },
            f0: if p > 0.0 { f / p } else { 0.5 },
            p_usd: if p > 0.0 { u / p } else { 0.0 },
            avg_parameter: outcome.averaged_parameter(),
            avg_usd: outcome.outcomes.iter().map(|o| o.probability * o.readout_success).sum(),
        }
    }
}

/// Every intermediate and final rate quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport {
    pub n_links: f64,
    pub p_dsm: f64,
    pub p_tdsm: f64,
    pub p_usd: f64,
    pub p_tz: f64,
    pub p_tot: f64,
    pub t_r: f64,
    pub f0: f64,
    pub f_tot: f64,
    pub e_x: f64,
    pub e_z: f64,
    pub r_inf_raw: f64,
    pub r_inf: f64,
    pub r_qkd: f64,
    pub r_nqkd: f64,
    pub r_per_channel_use: f64,
    pub cost: f64,
    pub cost_prime: f64,
}

impl RateReport {
    /// Column names, in [`RateReport::values`] order.
    pub const FIELDS: [&'static str; 18] = [
        "n_links",
        "p_dsm",
        "p_tdsm",
        "p_usd",
        "p_tz",
        "p_tot",
        "t_r",
        "f0",
        "f_tot",
        "e_x",
        "e_z",
        "r_inf_raw",
        "r_inf",
        "r_qkd",
        "r_nqkd",
        "r_per_channel_use",
        "cost",
        "cost_prime",
    ];

    pub fn values(&self) -> [f64; 18] {
        [
            self.n_links,
            self.p_dsm,
            self.p_tdsm,
            self.p_usd,
            self.p_tz,
            self.p_tot,
            self.t_r,
            self.f0,
            self.f_tot,
            self.e_x,
            self.e_z,
            self.r_inf_raw,
            self.r_inf,
            self.r_qkd,
            self.r_nqkd,
            self.r_per_channel_use,
            self.cost,
            self.cost_prime,
        ]
    }
}

/// `-p log2 p - (1-p) log2 (1-p)`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_probability("p", p)?;
    let term = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    Ok(term(p) + term(1.0 - p))
}

/// `base^n`, exact for integral `n`.
fn power(base: f64, n: f64) -> f64 {
    if n.fract() == 0.0 && n.abs() < i32::MAX as f64 {
        base.powi(n as i32)
    } else {
        base.powf(n)
    }
}

/// `[1 - (1 - P_dsm)^m]^n`.
pub fn p_tdsm(p_dsm: f64, m: usize, n: f64) -> f64 {
    power(1.0 - power(1.0 - p_dsm, m as f64), n)
}

/// Number of readouts entering `P_tz`.
pub fn readout_count(variant: Variant, n: f64, m: usize) -> f64 {
    match variant {
        Variant::Graph => n * m as f64,
        Variant::Qm | Variant::SingleChannelAvg => n,
    }
}

/// `(P_USD p_m)^{k_m}`.
pub fn p_tz(p_usd: f64, p_m: f64, k_m: f64) -> f64 {
    power(p_usd * p_m, k_m)
}

/// QM variant waits for the heralding signal; graph variant does not.
pub fn repetition_time(variant: Variant, t0: f64, link_length_km: f64, c: f64) -> f64 {
    match variant {
        Variant::Qm => t0.max(wait_time(link_length_km, c)),
        Variant::Graph | Variant::SingleChannelAvg => t0,
    }
}

/// Memory wait time `2 L0 / c`.
pub fn wait_time(link_length_km: f64, c: f64) -> f64 {
    2.0 * link_length_km * 1e3 / c
}

/// `1 - exp(-t_w / t_c)`.
pub fn memory_error_prob(t_w: f64, t_c: f64) -> f64 {
    if t_c.is_infinite() {
        return 0.0;
    }
    -(-t_w / t_c).exp_m1()
}

/// `[1 + (2 F0 - 1)^n] / 2`.
pub fn swapped_fidelity(f0: f64, n: f64) -> f64 {
    0.5 * (1.0 + power(2.0 * f0 - 1.0, n))
}

/// `(e_x, e_z)` with a depolarizing memory of error probability `p`.
pub fn qber_depolarizing(f0: f64, n: f64, p: f64) -> (f64, f64) {
    let lam = power(2.0 * f0 - 1.0, n);
    let keep = power(1.0 - p, n);
    // [(1 - lam) keep + 1 - keep] / 2
    (1.0 - 0.5 * (1.0 + lam * keep), 0.5 * (1.0 - keep))
}

/// `(e_x, e_z)` with a dephasing memory of error probability `p`.
pub fn qber_dephasing(f0: f64, n: f64, p: f64) -> (f64, f64) {
    let lam = power(2.0 * f0 - 1.0, n);
    let keep = power(1.0 - 2.0 * p, n);
    (1.0 - 0.5 * (1.0 + lam * keep), 0.0)
}

/// `C = N_s L_tot / (R L0)` and `C' = N_s / (R L0)`.
pub fn cost_coefficient(config: &ProtocolConfig, r_qkd: f64, n_s: f64) -> Result<(f64, f64)> {
    if r_qkd.is_nan() || r_qkd <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "r_qkd",
            value: r_qkd,
            reason: "cost needs a positive key rate",
        });
    }
    let c_prime = n_s / (r_qkd * config.link_length_km);
    Ok((c_prime * config.total_distance_km, c_prime))
}

/// Rates for the configured chain with link inputs supplied by the caller.
pub fn skr(config: &ProtocolConfig, link: &LinkInputs) -> Result<RateReport> {
    config.validate()?;
    Ok(skr_at(config, link, config.links()? as f64))
}

/// Closed-form link inputs followed by [`skr`].
pub fn evaluate(config: &ProtocolConfig) -> Result<RateReport> {
    config.validate()?;
    let link = LinkInputs::closed_form(config)?;
    Ok(skr_at(config, &link, config.links()? as f64))
}

/// Like [`evaluate`] but with `n = L_tot / L0` taken as a real number.
pub fn evaluate_relaxed(config: &ProtocolConfig) -> Result<RateReport> {
    config.validate_fields()?;
    let link = LinkInputs::closed_form(config)?;
    Ok(skr_at(config, &link, config.links_real()))
}

/// Rate quantities with `n` supplied directly, possibly non-integral.
pub fn skr_at(config: &ProtocolConfig, link: &LinkInputs, n: f64) -> RateReport {
    let t0 = config.interaction_time_s;
    let c = config.fiber_speed_m_per_s;
    let l0 = config.link_length_km;
    let p_m = config.gate_success;
    let (m, p_dsm, p_tdsm_v, p_usd, p_tz_v, t_r, f_tot, e_x, e_z);
    match config.variant {
        Variant::SingleChannelAvg => {
            m = 1;
            p_dsm = 1.0;
            p_tdsm_v = 1.0;
            p_usd = link.avg_usd;
            p_tz_v = p_tz(p_usd, p_m, n);
            t_r = repetition_time(config.variant, t0, l0, c);
            f_tot = 0.5 * (1.0 + power(link.avg_parameter, n));
            e_x = 1.0 - f_tot;
            e_z = 0.0;
        }
        Variant::Qm | Variant::Graph => {
            m = config.channels;
            p_dsm = link.p_dsm;
            p_tdsm_v = p_tdsm(p_dsm, m, n);
            p_usd = link.p_usd;
            p_tz_v = p_tz(p_usd, p_m, readout_count(config.variant, n, m));
            t_r = repetition_time(config.variant, t0, l0, c);
            f_tot = swapped_fidelity(link.f0, n);
            let memory = if config.variant == Variant::Qm {
                config.memory
            } else {
                MemoryModel::None
            };
            let p = memory_error_prob(wait_time(l0, c), config.coherence_time_s);
            (e_x, e_z) = match memory {
                MemoryModel::None => (1.0 - f_tot, 0.0),
                MemoryModel::Depolarizing => qber_depolarizing(link.f0, n, p),
                MemoryModel::Dephasing => qber_dephasing(link.f0, n, p),
            };
        }
    }
    let h = |e: f64| binary_entropy(e.clamp(0.0, 1.0)).unwrap_or(1.0);
    let r_inf_raw = 1.0 - h(e_z) - h(e_x);
    let r_inf = r_inf_raw.max(0.0);
    let p_tot = p_tdsm_v * p_tz_v;
    let r_qkd = p_tot * r_inf / t_r;
    let r_nqkd = r_qkd / m as f64;
    let n_s = config.matter_qubits_per_channel * m as f64;
    let (cost, cost_prime) = cost_coefficient(config, r_qkd, n_s).unwrap_or((f64::INFINITY, f64::INFINITY));
    RateReport {
        n_links: n,
        p_dsm,
        p_tdsm: p_tdsm_v,
        p_usd,
        p_tz: p_tz_v,
        p_tot,
        t_r,
        f0: link.f0,
        f_tot,
        e_x,
        e_z,
        r_inf_raw,
        r_inf,
        r_qkd,
        r_nqkd,
        r_per_channel_use: t_r * r_nqkd,
        cost,
        cost_prime,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::link_oracle;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(binary_entropy(0.5).unwrap(), 1.0, epsilon = 1e-15);
        let p = 0.11f64;
        let direct = -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
        assert_abs_diff_eq!(binary_entropy(p).unwrap(), direct, epsilon = 1e-15);
        assert_abs_diff_eq!(binary_entropy(p).unwrap(), 0.4999, epsilon = 1e-4);
        assert!(binary_entropy(1.5).is_err());
    }

    #[test]
    fn success_probabilities() {
        assert_eq!(p_tdsm(1.0, 3, 10.0), 1.0);
        assert_abs_diff_eq!(p_tdsm(0.7, 1, 3.0), 0.7f64.powi(3), epsilon = 1e-15);
        assert_abs_diff_eq!(p_tdsm(0.5, 2, 2.0), 0.5625, epsilon = 1e-15);
        assert_eq!(p_tz(1.0, 1.0, 7.0), 1.0);
        let k = readout_count(Variant::Qm, 3.0, 5);
        assert_abs_diff_eq!(p_tz(0.9, 1.0, k), 0.729, epsilon = 1e-15);
        let k = readout_count(Variant::Graph, 2.0, 2);
        assert_abs_diff_eq!(p_tz(0.9, 1.0, k), 0.6561, epsilon = 1e-15);
    }

    #[test]
    fn repetition_times() {
        assert_eq!(repetition_time(Variant::Graph, 1e-6, 5.0, 2e8), 1e-6);
        assert_abs_diff_eq!(repetition_time(Variant::Qm, 1e-6, 0.5, 2e8), 5e-6, epsilon = 1e-18);
        assert_eq!(repetition_time(Variant::Qm, 1.0, 0.5, 2e8), 1.0);
    }

    #[test]
    fn memory_and_swapping() {
        assert_eq!(memory_error_prob(0.0, 1.0), 0.0);
        assert_abs_diff_eq!(memory_error_prob(2.0, 2.0), 1.0 - (-1f64).exp(), epsilon = 1e-15);
        assert_eq!(memory_error_prob(1.0, f64::INFINITY), 0.0);
        assert_eq!(swapped_fidelity(1.0, 9.0), 1.0);
        assert_eq!(swapped_fidelity(0.5, 9.0), 0.5);
        assert_abs_diff_eq!(swapped_fidelity(0.75, 2.0), 0.625, epsilon = 1e-15);
    }

    #[test]
    fn qber_examples() {
        assert_eq!(qber_depolarizing(1.0, 3.0, 0.0), (0.0, 0.0));
        let (ex, ez) = qber_depolarizing(0.8, 3.0, 1.0);
        assert_abs_diff_eq!(ex, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ez, 0.5, epsilon = 1e-15);
        let (ex, ez) = qber_depolarizing(0.9, 2.0, 0.1);
        assert_abs_diff_eq!(ex, 0.2408, epsilon = 1e-12);
        assert_abs_diff_eq!(ez, 0.095, epsilon = 1e-12);
        assert_eq!(qber_dephasing(1.0, 3.0, 0.0), (0.0, 0.0));
        let (ex, ez) = qber_dephasing(0.9, 2.0, 0.1);
        assert_abs_diff_eq!(ex, 2.0 * 0.18 * 0.82, epsilon = 1e-12);
        assert_eq!(ez, 0.0);
        assert_abs_diff_eq!(qber_dephasing(0.9, 2.0, 0.5).0, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn cost_examples() {
        let cfg = ProtocolConfig {
            link_length_km: 1.0,
            ..Default::default()
        };
        assert_abs_diff_eq!(cost_coefficient(&cfg, 0.05, 5.0).unwrap().1, 100.0, epsilon = 1e-12);
        let half = cost_coefficient(&cfg, 0.1, 5.0).unwrap().1;
        assert_abs_diff_eq!(half, 50.0, epsilon = 1e-12);
        let cfg = ProtocolConfig {
            link_length_km: 1.25,
            ..Default::default()
        };
        // C' = 100 with N_s = 10 at 1.25 km needs R = 10 / (100 * 1.25)
        assert_abs_diff_eq!(cost_coefficient(&cfg, 0.08, 10.0).unwrap().1, 100.0, epsilon = 1e-12);
        assert!(cost_coefficient(&cfg, 0.0, 10.0).is_err());
    }

    #[test]
    fn perfect_chain() {
        let cfg = ProtocolConfig {
            variant: Variant::Graph,
            ..Default::default()
        };
        let link = LinkInputs {
            p_dsm: 1.0,
            f0: 1.0,
            p_usd: 1.0,
            avg_parameter: 1.0,
            avg_usd: 1.0,
        };
        let r = skr(&cfg, &link).unwrap();
        assert_abs_diff_eq!(r.r_qkd, 1e6, epsilon = 1e-6);
        let bad = LinkInputs { f0: 0.5, ..link };
        let r = skr(&cfg, &bad).unwrap();
        assert_eq!(r.r_inf, 0.0);
        assert_eq!(r.r_qkd, 0.0);
        assert!(r.r_inf_raw <= 0.0);
    }

    #[test]
    fn inconsistent_links_rejected() {
        let cfg = ProtocolConfig {
            total_distance_km: 10.5,
            link_length_km: 1.0,
            ..Default::default()
        };
        assert!(evaluate(&cfg).is_err());
        assert!(evaluate_relaxed(&cfg).is_ok());
        let cfg = ProtocolConfig {
            interaction_time_s: -1.0,
            ..Default::default()
        };
        assert!(evaluate(&cfg).is_err());
    }

    #[test]
    fn oracle_inputs_match_closed_form() {
        let cfg = ProtocolConfig {
            alpha: 1.1,
            link_length_km: 20.0,
            total_distance_km: 100.0,
            ..Default::default()
        };
        let outcome = link_oracle(&cfg.link_params().unwrap()).unwrap();
        let a = LinkInputs::from_outcome(&cfg, &outcome);
        let b = LinkInputs::closed_form(&cfg).unwrap();
        for (x, y) in [
            (a.p_dsm, b.p_dsm),
            (a.f0, b.f0),
            (a.p_usd, b.p_usd),
            (a.avg_parameter, b.avg_parameter),
            (a.avg_usd, b.avg_usd),
        ] {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn headline_per_channel_rates() {
        let multi = ProtocolConfig {
            channels: 3,
            ..Default::default()
        };
        let r = evaluate(&multi).unwrap();
        assert!(r.r_per_channel_use > 1e-4 && r.r_per_channel_use < 1e-2, "{r:?}");
        let avg = ProtocolConfig {
            variant: Variant::SingleChannelAvg,
            ..Default::default()
        };
        let a = evaluate(&avg).unwrap();
        assert!(a.r_per_channel_use > 1e-15 && a.r_per_channel_use < 1e-13, "{a:?}");
    }

    fn config_strategy() -> impl Strategy<Value = ProtocolConfig> {
        (
            0.3f64..2.5,
            1usize..8,
            1usize..40,
            prop_oneof![Just(0.5f64), Just(1.0), Just(2.0)],
            0.9f64..=1.0,
            prop_oneof![Just(Variant::Qm), Just(Variant::Graph), Just(Variant::SingleChannelAvg)],
            prop_oneof![
                Just(MemoryModel::None),
                Just(MemoryModel::Depolarizing),
                Just(MemoryModel::Dephasing)
            ],
            1e-4f64..10.0,
            prop_oneof![Just(1usize), Just(3)],
        )
            .prop_map(|(alpha, m, n, l0, pm, variant, memory, tc, l)| ProtocolConfig {
                alpha,
                channels: m,
                link_length_km: l0,
                total_distance_km: l0 * n as f64,
                gate_success: pm,
                variant,
                memory,
                coherence_time_s: tc,
                loss_order: l,
                ..Default::default()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn report_probabilities_in_range(cfg in config_strategy()) {
            let r = evaluate(&cfg).unwrap();
            for p in [r.p_dsm, r.p_tdsm, r.p_usd, r.p_tz, r.p_tot, r.f0, r.f_tot, r.e_x, r.e_z, r.r_inf] {
                prop_assert!((0.0..=1.0).contains(&p), "{r:?}");
            }
            prop_assert!(r.r_qkd >= 0.0);
        }

        #[test]
        fn rate_non_increasing_in_links(cfg in config_strategy()) {
            let link = LinkInputs::closed_form(&cfg).unwrap();
            let short = skr(&cfg, &link).unwrap();
            let longer = ProtocolConfig { total_distance_km: cfg.total_distance_km + cfg.link_length_km, ..cfg.clone() };
            let long = skr(&longer, &link).unwrap();
            prop_assert!(long.r_qkd <= short.r_qkd * (1.0 + 1e-12));
        }

        #[test]
        fn graph_equals_qm_in_matched_limit(cfg in config_strategy()) {
            let base = ProtocolConfig {
                channels: 1,
                gate_success: 1.0,
                interaction_time_s: 1e-3,
                ..cfg
            };
            let link = LinkInputs::closed_form(&base).unwrap();
            let graph = skr(&ProtocolConfig { variant: Variant::Graph, memory: MemoryModel::None, ..base.clone() }, &link).unwrap();
            let qm = skr(&ProtocolConfig { variant: Variant::Qm, memory: MemoryModel::Dephasing, coherence_time_s: 1e300, ..base }, &link).unwrap();
            prop_assert!((graph.r_qkd - qm.r_qkd).abs() <= 1e-12 * graph.r_qkd.max(1e-300));
        }

        #[test]
        fn single_link_swapping_is_identity(f in 0.0f64..=1.0) {
            prop_assert!((swapped_fidelity(f, 1.0) - f).abs() < 1e-15);
        }

        #[test]
        fn dephasing_never_flips_bits(f in 0.5f64..=1.0, n in 1u32..50, p in 0.0f64..=1.0) {
            prop_assert_eq!(qber_dephasing(f, n as f64, p).1, 0.0);
            if p > 0.0 {
                prop_assert!(qber_depolarizing(f, n as f64, p).1 > 0.0);
            }
        }
    }
}
