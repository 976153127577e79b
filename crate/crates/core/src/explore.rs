//! Parameter sweeps, optimisation over `(alpha, m)`, threshold and cost
//! root finding, and the figure drivers built on them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{map_with, Execution};
use crate::rate::{skr_at, LinkInputs, MemoryModel, ProtocolConfig, RateReport, Variant};

/// Relative tolerance on bisected parameters.
pub const PARAM_REL_TOL: f64 = 1e-3;
/// Relative objective gap accepted at a reported crossing.
pub const OBJECTIVE_REL_TOL: f64 = 1e-6;
const MAX_BISECTIONS: usize = 200;
const GOLDEN_ITERATIONS: usize = 60;
const REFINED_PEAKS: usize = 4;

/// A scalar field of [`ProtocolConfig`] that a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Alpha,
    Channels,
    LinkLength,
    TotalDistance,
    GateSuccess,
    MeasurementError,
    CoherenceTime,
    InteractionTime,
    LossOrder,
    Attenuation,
    DesiredResidue,
}

impl Axis {
    pub const ALL: [Axis; 11] = [
        Axis::Alpha,
        Axis::Channels,
        Axis::LinkLength,
        Axis::TotalDistance,
        Axis::GateSuccess,
        Axis::MeasurementError,
        Axis::CoherenceTime,
        Axis::InteractionTime,
        Axis::LossOrder,
        Axis::Attenuation,
        Axis::DesiredResidue,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Axis::Alpha => "alpha",
            Axis::Channels => "channels",
            Axis::LinkLength => "link_length_km",
            Axis::TotalDistance => "total_distance_km",
            Axis::GateSuccess => "gate_success",
            Axis::MeasurementError => "measurement_error",
            Axis::CoherenceTime => "coherence_time_s",
            Axis::InteractionTime => "interaction_time_s",
            Axis::LossOrder => "loss_order",
            Axis::Attenuation => "attenuation_db_per_km",
            Axis::DesiredResidue => "desired_residue",
        }
    }

    /// Writes `value` into `config`.
    pub fn apply(&self, config: &mut ProtocolConfig, value: f64) -> Result<()> {
        let count = |min: f64| -> Result<usize> {
            if value.fract() == 0.0 && value >= min && value < u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidParameter {
                    name: self.name(),
                    value,
                    reason: "must be a non-negative integer in range",
                })
            }
        };
        match self {
            Axis::Alpha => config.alpha = value,
            Axis::Channels => config.channels = count(1.0)?,
            Axis::LinkLength => config.link_length_km = value,
            Axis::TotalDistance => config.total_distance_km = value,
            Axis::GateSuccess => config.gate_success = value,
            Axis::MeasurementError => config.gate_success = 1.0 - value,
            Axis::CoherenceTime => config.coherence_time_s = value,
            Axis::InteractionTime => config.interaction_time_s = value,
            Axis::LossOrder => config.loss_order = count(1.0)?,
            Axis::Attenuation => config.attenuation_db_per_km = value,
            Axis::DesiredResidue => config.desired_residues = vec![count(0.0)?],
        }
        Ok(())
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Axis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::UnknownAxis(s.to_string()))
    }
}

/// Quantity that sweeps report and the optimiser targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// `t_r R_QKD / m`, bits per channel use. Maximised.
    #[default]
    PerChannelUse,
    /// `R_QKD`, bits per second. Maximised.
    BitsPerSecond,
    /// `C'`. Minimised.
    CostPrime,
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::PerChannelUse => "per-channel-use",
            Objective::BitsPerSecond => "bits-per-second",
            Objective::CostPrime => "cost-prime",
        }
    }

    pub fn value(&self, report: &RateReport) -> f64 {
        match self {
            Objective::PerChannelUse => report.r_per_channel_use,
            Objective::BitsPerSecond => report.r_qkd,
            Objective::CostPrime => report.cost_prime,
        }
    }

    /// Larger is better.
    pub fn score(&self, report: &RateReport) -> f64 {
        match self {
            Objective::CostPrime => -report.cost_prime,
            _ => self.value(report),
        }
    }
}

/// Number of links for `config`, relaxed to a real number on request.
fn link_count(config: &ProtocolConfig, relaxed: bool) -> Result<f64> {
    if relaxed {
        config.validate_fields()?;
        Ok(config.links_real())
    } else {
        config.validate()?;
        Ok(config.links()? as f64)
    }
}

fn evaluate_point(config: &ProtocolConfig, relaxed: bool) -> Result<RateReport> {
    let n = link_count(config, relaxed)?;
    let link = LinkInputs::closed_form(config)?;
    Ok(skr_at(config, &link, n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ProtocolConfig,
    /// Outer axis first; the last axis varies fastest.
    pub axes: Vec<(Axis, Vec<f64>)>,
    pub objective: Objective,
    /// Treat `L_tot / L0` as real instead of requiring an integer.
    pub relaxed: bool,
    pub execution: Execution,
}

impl SweepSpec {
    pub fn new(base: ProtocolConfig, axes: Vec<(Axis, Vec<f64>)>) -> Self {
        Self {
            base,
            axes,
            objective: Objective::default(),
            relaxed: false,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::InvalidParameter {
                name: "axes",
                value: 0.0,
                reason: "at least one axis is required",
            });
        }
        for (axis, grid) in &self.axes {
            if grid.is_empty() {
                return Err(Error::InvalidParameter {
                    name: axis.name(),
                    value: 0.0,
                    reason: "grid is empty",
                });
            }
            if let Some(&bad) = grid.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: axis.name(),
                    value: bad,
                    reason: "grid values must be finite",
                });
            }
            if let Some(w) = grid.windows(2).find(|w| w[1] <= w[0]) {
                return Err(Error::InvalidParameter {
                    name: axis.name(),
                    value: w[1],
                    reason: "grid must be strictly increasing",
                });
            }
        }
        Ok(())
    }

    /// Grid points in row-major order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut points = vec![Vec::with_capacity(self.axes.len())];
        for (_, grid) in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    grid.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        points
    }

    pub fn config_at(&self, point: &[f64]) -> Result<ProtocolConfig> {
        let mut config = self.base.clone();
        for ((axis, _), &v) in self.axes.iter().zip(point) {
            axis.apply(&mut config, v)?;
        }
        Ok(config)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: Vec<f64>,
    pub objective: f64,
    pub report: RateReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axes: Vec<Axis>,
    pub objective: Objective,
    pub rows: Vec<SweepRow>,
}

/// Evaluates every grid point of `spec`.
pub fn sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let points = spec.points();
    let results = map_with(spec.execution, &points, |p| {
        let config = spec.config_at(p)?;
        evaluate_point(&config, spec.relaxed)
    });
    let rows = points
        .into_iter()
        .zip(results)
        .map(|(point, r)| {
            r.map(|report| SweepRow {
                point,
                objective: spec.objective.value(&report),
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        axes: spec.axes.iter().map(|(a, _)| *a).collect(),
        objective: spec.objective,
        rows,
    })
}

/// Search box for [`optimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeSpec {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_points: usize,
    pub m_max: usize,
    pub objective: Objective,
    /// Golden-section pass around the best grid point of each `m`.
    pub refine: bool,
    pub relaxed: bool,
    pub execution: Execution,
}

impl Default for OptimizeSpec {
    fn default() -> Self {
        Self {
            alpha_min: 0.2,
            alpha_max: 2.5,
            alpha_points: 231,
            m_max: 64,
            objective: Objective::default(),
            refine: true,
            relaxed: false,
            execution: Execution::default(),
        }
    }
}

impl OptimizeSpec {
    pub fn with_objective(objective: Objective) -> Self {
        Self {
            objective,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_min > 0.0 && self.alpha_min < self.alpha_max && self.alpha_max.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "alpha_min",
                value: self.alpha_min,
                reason: "need 0 < alpha_min < alpha_max < inf",
            });
        }
        if self.alpha_points < 2 {
            return Err(Error::InvalidParameter {
                name: "alpha_points",
                value: self.alpha_points as f64,
                reason: "need at least two grid points",
            });
        }
        if self.m_max == 0 {
            return Err(Error::InvalidParameter {
                name: "m_max",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        Ok(())
    }

    pub fn alpha_grid(&self) -> Vec<f64> {
        let step = (self.alpha_max - self.alpha_min) / (self.alpha_points - 1) as f64;
        (0..self.alpha_points)
            .map(|i| {
                if i + 1 == self.alpha_points {
                    self.alpha_max
                } else {
                    self.alpha_min + step * i as f64
                }
            })
            .collect()
    }
}

/// Best point found by [`optimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub alpha: f64,
    pub channels: usize,
    /// Objective value, not the internal score.
    pub objective: f64,
    pub report: RateReport,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    alpha: f64,
    channels: usize,
    score: f64,
    report: RateReport,
}

/// Index of the first strictly best finite score.
fn first_best(scores: impl IntoIterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.into_iter().enumerate() {
        if s.is_finite() && best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best
}

/// Indices of the `count` highest finite local maxima, in grid order.
fn local_maxima(scores: &[f64], count: usize) -> Vec<usize> {
    let at = |i: usize| scores.get(i).copied().unwrap_or(f64::NEG_INFINITY);
    let mut peaks: Vec<usize> = (0..scores.len())
        .filter(|&i| {
            let s = scores[i];
            let left = if i == 0 { f64::NEG_INFINITY } else { at(i - 1) };
            s.is_finite() && s > left && s >= at(i + 1)
        })
        .collect();
    peaks.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    peaks.truncate(count);
    peaks.sort_unstable();
    peaks
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..GOLDEN_ITERATIONS {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Maximises the objective over `alpha` and `m = 1..=m_max`.
///
/// Ties go to the smaller `m`, then the smaller `alpha`.
pub fn optimize(config: &ProtocolConfig, spec: &OptimizeSpec) -> Result<Optimum> {
    spec.validate()?;
    let n = link_count(config, spec.relaxed)?;
    let grid = spec.alpha_grid();
    let links = map_with(spec.execution, &grid, |&a| {
        LinkInputs::closed_form(&ProtocolConfig {
            alpha: a,
            ..config.clone()
        })
        .ok()
    });
    let m_max = if config.variant == Variant::SingleChannelAvg {
        1
    } else {
        spec.m_max
    };
    let ms: Vec<usize> = (1..=m_max).collect();
    let candidates = map_with(spec.execution, &ms, |&m| {
        let cfg = ProtocolConfig {
            channels: m,
            ..config.clone()
        };
        let reports: Vec<Option<RateReport>> = links
            .iter()
            .zip(&grid)
            .map(|(l, &a)| {
                l.as_ref().map(|l| {
                    skr_at(
                        &ProtocolConfig {
                            alpha: a,
                            ..cfg.clone()
                        },
                        l,
                        n,
                    )
                })
            })
            .collect();
        let scores: Vec<f64> = reports
            .iter()
            .map(|r| r.map_or(f64::NEG_INFINITY, |r| spec.objective.score(&r)))
            .collect();
        let (i, score) = first_best(scores.iter().copied())?;
        let mut best = Candidate {
            alpha: grid[i],
            channels: m,
            score,
            report: reports[i]?,
        };
        if spec.refine {
            let eval = |a: f64| {
                let c = ProtocolConfig {
                    alpha: a,
                    ..cfg.clone()
                };
                LinkInputs::closed_form(&c).ok().map(|l| skr_at(&c, &l, n))
            };
            for k in local_maxima(&scores, REFINED_PEAKS) {
                let lo = grid[k.saturating_sub(1)];
                let hi = grid[(k + 1).min(grid.len() - 1)];
                let (a, s) = golden_max(
                    |a| eval(a).map_or(f64::NEG_INFINITY, |r| spec.objective.score(&r)),
                    lo,
                    hi,
                );
                let better = s > best.score || (s == best.score && a < best.alpha);
                if better {
                    if let Some(report) = eval(a) {
                        best = Candidate {
                            alpha: a,
                            channels: m,
                            score: s,
                            report,
                        };
                    }
                }
            }
        }
        Some(best)
    });
    let scores = candidates.iter().map(|c| c.map_or(f64::NEG_INFINITY, |c| c.score));
    let (i, _) = first_best(scores).ok_or_else(|| {
        Error::EmptyFeasibleSet(format!(
            "no finite {} over alpha in [{}, {}] and m in 1..={}",
            spec.objective.name(),
            spec.alpha_min,
            spec.alpha_max,
            m_max
        ))
    })?;
    let best = candidates[i].expect("finite score implies a candidate");
    Ok(Optimum {
        alpha: best.alpha,
        channels: best.channels,
        objective: spec.objective.value(&best.report),
        report: best.report,
    })
}

/// Parameter value where two optimised objectives meet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub value: f64,
    pub objective_a: f64,
    pub objective_b: f64,
    /// `|a - b| / max(|a|, |b|)` at `value`.
    pub relative_gap: f64,
    pub iterations: usize,
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 && hi > 0.0 {
        (lo * hi).sqrt()
    } else {
        0.5 * (lo + hi)
    }
}

/// Bisects on `axis` inside `[lo, hi]` for the point where the optimised
/// objectives of `a` and `b` coincide.
pub fn find_threshold(
    a: &ProtocolConfig,
    b: &ProtocolConfig,
    axis: Axis,
    lo: f64,
    hi: f64,
    spec: &OptimizeSpec,
) -> Result<Threshold> {
    let objectives = |v: f64| -> Result<(f64, f64)> {
        let mut ca = a.clone();
        let mut cb = b.clone();
        axis.apply(&mut ca, v)?;
        axis.apply(&mut cb, v)?;
        Ok((optimize(&ca, spec)?.objective, optimize(&cb, spec)?.objective))
    };
    let gap = |(x, y): (f64, f64)| {
        let scale = x.abs().max(y.abs());
        if scale == 0.0 {
            0.0
        } else {
            (x - y).abs() / scale
        }
    };
    let sign = |(x, y): (f64, f64)| (x - y).partial_cmp(&0.0);
    let (mut lo, mut hi) = (lo.min(hi), lo.max(hi));
    let f_lo = objectives(lo)?;
    let f_hi = objectives(hi)?;
    let s_lo = sign(f_lo);
    let s_hi = sign(f_hi);
    let no_crossing = Error::NoCrossing { lo, hi };
    let (Some(s_lo), Some(s_hi)) = (s_lo, s_hi) else {
        return Err(no_crossing);
    };
    use std::cmp::Ordering::Equal;
    if s_lo == Equal && s_hi == Equal {
        return Err(no_crossing);
    }
    for (v, f, s) in [(lo, f_lo, s_lo), (hi, f_hi, s_hi)] {
        if s == Equal {
            return Ok(Threshold {
                value: v,
                objective_a: f.0,
                objective_b: f.1,
                relative_gap: 0.0,
                iterations: 0,
            });
        }
    }
    if s_lo == s_hi {
        return Err(no_crossing);
    }
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mid = midpoint(lo, hi);
        let f_mid = objectives(mid)?;
        let narrow = hi - lo <= PARAM_REL_TOL * mid.abs();
        let exhausted = mid <= lo || mid >= hi || iterations >= MAX_BISECTIONS;
        if (narrow && gap(f_mid) <= OBJECTIVE_REL_TOL) || exhausted || sign(f_mid) == Some(Equal) {
            return Ok(Threshold {
                value: mid,
                objective_a: f_mid.0,
                objective_b: f_mid.1,
                relative_gap: gap(f_mid),
                iterations,
            });
        }
        if sign(f_mid) == Some(s_lo) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Smallest `C'` over `(alpha, m)` with `n` relaxed to a real number.
pub fn min_cost_prime(config: &ProtocolConfig, spec: &OptimizeSpec) -> Result<Optimum> {
    let spec = OptimizeSpec {
        objective: Objective::CostPrime,
        relaxed: true,
        ..*spec
    };
    optimize(config, &spec)
}

/// Matter qubits per channel that put the optimal `C'` exactly on `target`
/// for the given configuration.
pub fn calibrate_matter_qubits(config: &ProtocolConfig, target: f64, spec: &OptimizeSpec) -> Result<f64> {
    let unit = ProtocolConfig {
        matter_qubits_per_channel: 1.0,
        ..config.clone()
    };
    let best = min_cost_prime(&unit, spec)?;
    if !best.objective.is_finite() || best.objective <= 0.0 {
        return Err(Error::EmptyFeasibleSet(
            "no positive key rate to calibrate against".into(),
        ));
    }
    Ok(target / best.objective)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRoot {
    pub link_length_km: f64,
    pub optimum: Optimum,
    pub iterations: usize,
}

/// Link length in `[lo, hi]` at which the optimal `C'` equals `target`.
pub fn solve_cost_target(
    config: &ProtocolConfig,
    target: f64,
    lo: f64,
    hi: f64,
    spec: &OptimizeSpec,
) -> Result<CostRoot> {
    let eval = |l0: f64| -> Result<Optimum> {
        min_cost_prime(
            &ProtocolConfig {
                link_length_km: l0,
                ..config.clone()
            },
            spec,
        )
    };
    let excess = |o: &Optimum| o.objective - target;
    let (mut lo, mut hi) = (lo.min(hi), lo.max(hi));
    let g_lo = excess(&eval(lo)?);
    let g_hi = excess(&eval(hi)?);
    if g_lo.is_nan() || g_hi.is_nan() || (g_lo > 0.0) == (g_hi > 0.0) {
        return Err(Error::NoCrossing { lo, hi });
    }
    let lo_positive = g_lo > 0.0;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let o = eval(mid)?;
        let g = excess(&o);
        if hi - lo <= PARAM_REL_TOL * mid || g == 0.0 || iterations >= MAX_BISECTIONS {
            return Ok(CostRoot {
                link_length_km: mid,
                optimum: o,
                iterations,
            });
        }
        if (g > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Headline number set against its published reference value.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryLine {
    pub quantity: String,
    pub produced: f64,
    /// `NaN` when no reference value exists.
    pub reference: f64,
}

impl SummaryLine {
    fn new(quantity: &str, produced: f64, reference: f64) -> Self {
        Self {
            quantity: quantity.to_string(),
            produced,
            reference,
        }
    }

    pub fn ratio(&self) -> f64 {
        self.produced / self.reference
    }
}

/// Everything behind one figure.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureData {
    pub id: u8,
    pub title: &'static str,
    /// `(name, value)` parameter assumptions.
    pub assumptions: Vec<(String, String)>,
    pub tables: Vec<Table>,
    pub summary: Vec<SummaryLine>,
}

pub const FIGURE_IDS: [u8; 5] = [2, 3, 4, 5, 6];

/// Builds the data set for figure `id`.
pub fn reproduce(id: u8, exec: Execution) -> Result<FigureData> {
    match id {
        2 => figure_success(exec),
        3 => figure_multiplexing(exec),
        4 => figure_threshold(exec),
        5 => figure_three_loss(exec),
        6 => figure_cost(exec),
        _ => Err(Error::Unsupported(format!(
            "figure id {id}; known ids are 2, 3, 4, 5, 6"
        ))),
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.log10(), b.log10(), n)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect()
}

fn describe(config: &ProtocolConfig) -> Vec<(String, String)> {
    vec![
        ("total_distance_km".into(), config.total_distance_km.to_string()),
        ("link_length_km".into(), config.link_length_km.to_string()),
        ("loss_order".into(), config.loss_order.to_string()),
        ("gate_success".into(), config.gate_success.to_string()),
        ("interaction_time_s".into(), config.interaction_time_s.to_string()),
        ("fiber_speed_m_per_s".into(), config.fiber_speed_m_per_s.to_string()),
        ("attenuation_db_per_km".into(), config.attenuation_db_per_km.to_string()),
        ("variant".into(), config.variant.name().into()),
        ("memory".into(), config.memory.name().into()),
        ("coherence_time_s".into(), config.coherence_time_s.to_string()),
        ("desired_residues".into(), format!("{:?}", config.desired_residues)),
        ("usd_codewords".into(), config.usd_codewords.name().into()),
        (
            "matter_qubits_per_channel".into(),
            config.matter_qubits_per_channel.to_string(),
        ),
    ]
}

fn success_config() -> ProtocolConfig {
    ProtocolConfig {
        total_distance_km: 1000.0,
        link_length_km: 1.0,
        channels: 1,
        ..Default::default()
    }
}

/// Readout success `P_tz` against `alpha` for even and odd desired residues.
fn figure_success(exec: Execution) -> Result<FigureData> {
    let base = success_config();
    let alphas = linspace(0.2, 2.0, 181);
    let mut spec = SweepSpec::new(
        base.clone(),
        vec![(Axis::DesiredResidue, vec![0.0, 1.0]), (Axis::Alpha, alphas.clone())],
    );
    spec.execution = exec;
    let table = sweep(&spec)?;
    let (even, odd) = table.rows.split_at(alphas.len());
    let mut out = Table::new(
        "success",
        &["alpha", "p_tz_even", "p_tz_odd", "p_tdsm_even", "p_tdsm_odd"],
    );
    for (i, &a) in alphas.iter().enumerate() {
        out.rows.push(vec![
            a,
            even[i].report.p_tz,
            odd[i].report.p_tz,
            even[i].report.p_tdsm,
            odd[i].report.p_tdsm,
        ]);
    }
    let peak = |rows: &[SweepRow]| first_best(rows.iter().map(|r| r.report.p_tz)).map_or(f64::NAN, |(i, _)| alphas[i]);
    Ok(FigureData {
        id: 2,
        title: "total readout success probability versus alpha, even and odd residues",
        assumptions: describe(&base),
        tables: vec![out],
        summary: vec![
            SummaryLine::new("alpha_peak_even", peak(even), f64::NAN),
            SummaryLine::new("alpha_peak_odd", peak(odd), f64::NAN),
        ],
    })
}

pub const HEADLINE_ALPHA: f64 = 1.268;

/// Per-channel-use rate against `alpha`: accept-all single channel versus
/// `m` multiplexed channels.
fn figure_multiplexing(exec: Execution) -> Result<FigureData> {
    let base = success_config();
    let alphas = linspace(0.2, 2.5, 231);
    let channel_counts = [2usize, 3, 4, 5];
    let mut avg_spec = SweepSpec::new(
        ProtocolConfig {
            variant: Variant::SingleChannelAvg,
            ..base.clone()
        },
        vec![(Axis::Alpha, alphas.clone())],
    );
    avg_spec.execution = exec;
    let avg = sweep(&avg_spec)?;
    let mut multi_spec = SweepSpec::new(
        base.clone(),
        vec![
            (Axis::Channels, channel_counts.iter().map(|&m| m as f64).collect()),
            (Axis::Alpha, alphas.clone()),
        ],
    );
    multi_spec.execution = exec;
    let multi = sweep(&multi_spec)?;
    let mut columns = vec!["alpha".to_string(), "single_channel_avg".to_string()];
    columns.extend(channel_counts.iter().map(|m| format!("m{m}")));
    let mut out = Table {
        name: "multiplexing".into(),
        columns,
        rows: Vec::new(),
    };
    for (i, &a) in alphas.iter().enumerate() {
        let mut row = vec![a, avg.rows[i].report.r_per_channel_use];
        row.extend((0..channel_counts.len()).map(|k| multi.rows[k * alphas.len() + i].report.r_per_channel_use));
        out.rows.push(row);
    }
    let at = |cfg: ProtocolConfig| {
        crate::rate::evaluate(&ProtocolConfig {
            alpha: HEADLINE_ALPHA,
            ..cfg
        })
    };
    let single = at(ProtocolConfig {
        variant: Variant::SingleChannelAvg,
        ..base.clone()
    })?
    .r_per_channel_use;
    let three = at(ProtocolConfig {
        channels: 3,
        ..base.clone()
    })?
    .r_per_channel_use;
    Ok(FigureData {
        id: 3,
        title: "per-channel-use key rate versus alpha, single accept-all channel and multiplexed channels",
        assumptions: describe(&base),
        tables: vec![out],
        summary: vec![
            SummaryLine::new("single_channel_avg_at_1.268", single, 1e-14),
            SummaryLine::new("m3_at_1.268", three, 1e-3),
            SummaryLine::new("gain_orders_of_magnitude", (three / single).log10(), 10.0),
        ],
    })
}

fn threshold_configs(memory: MemoryModel, coherence_time_s: f64) -> (ProtocolConfig, ProtocolConfig) {
    let base = ProtocolConfig {
        total_distance_km: 1000.0,
        link_length_km: 0.5,
        ..Default::default()
    };
    let qm = ProtocolConfig {
        variant: Variant::Qm,
        memory,
        coherence_time_s,
        ..base.clone()
    };
    let graph = ProtocolConfig {
        variant: Variant::Graph,
        ..base
    };
    (qm, graph)
}

pub const THRESHOLD_COHERENCE_TIMES: [f64; 3] = [0.05, 0.5, 5.0];
pub const THRESHOLD_BRACKET: (f64, f64) = (1e-5, 1e-2);

/// Crossing measurement error between the memory and graph variants.
pub fn measurement_error_threshold(memory: MemoryModel, coherence_time_s: f64, exec: Execution) -> Result<Threshold> {
    let (qm, graph) = threshold_configs(memory, coherence_time_s);
    let spec = OptimizeSpec {
        objective: Objective::BitsPerSecond,
        execution: exec,
        ..Default::default()
    };
    find_threshold(
        &qm,
        &graph,
        Axis::MeasurementError,
        THRESHOLD_BRACKET.0,
        THRESHOLD_BRACKET.1,
        &spec,
    )
}

/// Optimised rates against measurement error and the crossing points.
fn figure_threshold(exec: Execution) -> Result<FigureData> {
    let spec = OptimizeSpec {
        objective: Objective::BitsPerSecond,
        execution: exec,
        ..Default::default()
    };
    let errors = logspace(THRESHOLD_BRACKET.0, THRESHOLD_BRACKET.1, 31);
    let (dephasing, graph) = threshold_configs(MemoryModel::Dephasing, THRESHOLD_COHERENCE_TIMES[0]);
    let (depolarizing, _) = threshold_configs(MemoryModel::Depolarizing, THRESHOLD_COHERENCE_TIMES[0]);
    let mut curves = Table::new(
        "rates",
        &["measurement_error", "graph", "qm_dephasing", "qm_depolarizing"],
    );
    for &e in &errors {
        let mut row = vec![e];
        for cfg in [&graph, &dephasing, &depolarizing] {
            let mut c = cfg.clone();
            Axis::MeasurementError.apply(&mut c, e)?;
            row.push(optimize(&c, &spec)?.objective);
        }
        curves.rows.push(row);
    }
    let mut crossings = Table::new("crossings", &["coherence_time_s", "dephasing", "depolarizing"]);
    let mut headline = f64::NAN;
    for &tc in &THRESHOLD_COHERENCE_TIMES {
        let mut row = vec![tc];
        for memory in [MemoryModel::Dephasing, MemoryModel::Depolarizing] {
            let v = match measurement_error_threshold(memory, tc, exec) {
                Ok(t) => t.value,
                Err(Error::NoCrossing { .. }) => f64::NAN,
                Err(e) => return Err(e),
            };
            if memory == MemoryModel::Dephasing && tc == THRESHOLD_COHERENCE_TIMES[0] {
                headline = v;
            }
            row.push(v);
        }
        crossings.rows.push(row);
    }
    let mut assumptions = describe(&dephasing);
    assumptions.retain(|(k, _)| k != "variant" && k != "memory" && k != "coherence_time_s" && k != "gate_success");
    assumptions.push(("objective".into(), Objective::BitsPerSecond.name().into()));
    assumptions.push(("m_max".into(), spec.m_max.to_string()));
    Ok(FigureData {
        id: 4,
        title: "optimised key rate versus measurement error, memory and graph variants",
        assumptions,
        tables: vec![curves, crossings],
        summary: vec![SummaryLine::new("crossing_dephasing_tc0.05", headline, 6e-4)],
    })
}

pub const THREE_LOSS_DISTANCES: [f64; 10] = [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0, 900.0, 1000.0];

fn three_loss_config(total_distance_km: f64) -> ProtocolConfig {
    ProtocolConfig {
        total_distance_km,
        link_length_km: 1.0,
        loss_order: 3,
        gate_success: 0.999,
        variant: Variant::Graph,
        desired_residues: vec![0],
        ..Default::default()
    }
}

/// Optimised graph-variant rate of the 3-loss code at `total_distance_km`.
pub fn three_loss_rate(total_distance_km: f64, exec: Execution) -> Result<Optimum> {
    let spec = OptimizeSpec {
        objective: Objective::BitsPerSecond,
        execution: exec,
        ..Default::default()
    };
    optimize(&three_loss_config(total_distance_km), &spec)
}

/// Graph-variant rate of the 3-loss code against distance, plus the
/// interaction time that matches the 100 km reference.
fn figure_three_loss(exec: Execution) -> Result<FigureData> {
    let base = three_loss_config(100.0);
    let t0 = base.interaction_time_s;
    let rates = THREE_LOSS_DISTANCES
        .iter()
        .map(|&d| three_loss_rate(d, exec))
        .collect::<Result<Vec<_>>>()?;
    let near = rates[0].objective;
    let far = rates[rates.len() - 1].objective;
    // rate scales as 1 / t0 at a fixed optimum
    let t0_matched = t0 * near / 2e5;
    let mut out = Table::new(
        "three_loss",
        &["total_distance_km", "r_qkd", "r_qkd_matched_t0", "alpha", "channels"],
    );
    for (d, o) in THREE_LOSS_DISTANCES.iter().zip(&rates) {
        out.rows.push(vec![
            *d,
            o.objective,
            o.objective * t0 / t0_matched,
            o.alpha,
            o.channels as f64,
        ]);
    }
    let mut assumptions = describe(&base);
    assumptions.retain(|(k, _)| k != "total_distance_km");
    Ok(FigureData {
        id: 5,
        title: "optimised graph-variant key rate of the 3-loss code versus total distance",
        assumptions,
        tables: vec![out],
        summary: vec![
            SummaryLine::new("r_qkd_100km", near, 2e5),
            SummaryLine::new("r_qkd_1000km", far, 7e3),
            SummaryLine::new("t0_matching_100km_s", t0_matched, f64::NAN),
            SummaryLine::new("r_qkd_1000km_matched_t0", far * t0 / t0_matched, 7e3),
        ],
    })
}

pub const COST_TARGET: f64 = 100.0;
pub const COST_CALIBRATION_LINK_KM: f64 = 1.25;
pub const COST_BRACKET_KM: (f64, f64) = (0.2, 6.0);
pub const COST_DISTANCES: [f64; 9] = [200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0, 900.0, 1000.0];

/// Multiplexed memory configuration used for the cost curve.
pub fn cost_config(total_distance_km: f64) -> ProtocolConfig {
    ProtocolConfig {
        total_distance_km,
        link_length_km: COST_CALIBRATION_LINK_KM,
        variant: Variant::Qm,
        memory: MemoryModel::Dephasing,
        coherence_time_s: 0.5,
        gate_success: 1.0,
        ..Default::default()
    }
}

/// Link length reaching `C' = 100` against total distance, with `N_s`
/// calibrated at 1000 km.
fn figure_cost(exec: Execution) -> Result<FigureData> {
    let spec = OptimizeSpec {
        execution: exec,
        ..Default::default()
    };
    let q = calibrate_matter_qubits(&cost_config(1000.0), COST_TARGET, &spec)?;
    let mut out = Table::new(
        "cost",
        &[
            "total_distance_km",
            "link_length_km",
            "r_qkd",
            "alpha",
            "channels",
            "link_length_km_doubled_ns",
        ],
    );
    let mut at_1000 = f64::NAN;
    for &d in &COST_DISTANCES {
        let cfg = ProtocolConfig {
            matter_qubits_per_channel: q,
            ..cost_config(d)
        };
        let root = solve_cost_target(&cfg, COST_TARGET, COST_BRACKET_KM.0, COST_BRACKET_KM.1, &spec)?;
        let doubled = solve_cost_target(
            &ProtocolConfig {
                matter_qubits_per_channel: 2.0 * q,
                ..cfg
            },
            COST_TARGET,
            COST_BRACKET_KM.0,
            COST_BRACKET_KM.1,
            &spec,
        )?;
        if d == 1000.0 {
            at_1000 = root.link_length_km;
        }
        out.rows.push(vec![
            d,
            root.link_length_km,
            root.optimum.report.r_qkd,
            root.optimum.alpha,
            root.optimum.channels as f64,
            doubled.link_length_km,
        ]);
    }
    let mut assumptions = describe(&cost_config(1000.0));
    assumptions.retain(|(k, _)| k != "total_distance_km" && k != "link_length_km" && k != "matter_qubits_per_channel");
    assumptions.push(("matter_qubits_per_channel_calibrated".into(), q.to_string()));
    assumptions.push(("cost_target".into(), COST_TARGET.to_string()));
    Ok(FigureData {
        id: 6,
        title: "link length reaching the target cost coefficient versus total distance",
        assumptions,
        tables: vec![out],
        summary: vec![
            SummaryLine::new("link_length_km_at_1000km", at_1000, COST_CALIBRATION_LINK_KM),
            SummaryLine::new("matter_qubits_per_channel", q, f64::NAN),
        ],
    })
}
