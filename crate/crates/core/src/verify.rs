//! Self-checks of the Fock-space oracle against the closed forms.

use crate::cat::{closed_form, series_coefficients, syndrome_class_probability, usd_probability_damped, CatCode};
use crate::error::Result;
use crate::fock::{completeness_defect, kraus_family, MultiModeState, WeightedEnsemble, TRUNCATION_TOL};
use crate::graph::{equivalence_check, EquivalenceParams};
use crate::link::{f0_from_series, link_oracle, LinkParams};
use crate::par::{map_with, Execution};
use crate::rate::{qber_dephasing, qber_depolarizing, swapped_fidelity};

pub const ORACLE_ALPHAS: [f64; 3] = [0.6, 1.0, 1.4];
pub const ORACLE_ETAS: [f64; 4] = [0.3, 0.5, 0.7, 0.9];
pub const ORACLE_LOSS_ORDERS: [usize; 2] = [1, 3];
pub const EQUIVALENCE_POINTS: [(f64, f64); 4] = [(0.8, 0.6), (0.8, 0.9), (1.2, 0.6), (1.2, 0.9)];

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// Largest deviation seen across the check's grid.
    pub deviation: f64,
    pub tolerance: f64,
    pub points: usize,
}

impl Check {
    fn new(name: &'static str, tolerance: f64, deviations: impl IntoIterator<Item = f64>) -> Self {
        let mut points = 0;
        let mut deviation: f64 = 0.0;
        for d in deviations {
            points += 1;
            // NaN fails the check
            deviation = if d.is_nan() || deviation.is_nan() {
                f64::NAN
            } else {
                deviation.max(d)
            };
        }
        Self {
            name,
            deviation,
            tolerance,
            points,
        }
    }

    pub fn passed(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VerifyOptions {
    /// Relative perturbation of `C_1` fed into the series checks.
    pub series_perturbation: f64,
    pub execution: Execution,
}

fn oracle_grid() -> Vec<(f64, f64, usize)> {
    let mut grid = Vec::new();
    for &l in &ORACLE_LOSS_ORDERS {
        for &a in &ORACLE_ALPHAS {
            for &e in &ORACLE_ETAS {
                grid.push((a, e, l));
            }
        }
    }
    grid
}

/// `max |sum_k A_k^dagger A_k - I|` on each code's truncated space.
pub fn kraus_completeness(exec: Execution) -> Result<Check> {
    let devs = map_with(exec, &oracle_grid(), |&(a, e, l)| -> Result<f64> {
        let cutoff = CatCode::new(a, l)?.cutoff();
        Ok(completeness_defect(&kraus_family(e, cutoff, TRUNCATION_TOL)?))
    });
    Ok(Check::new(
        "kraus_completeness",
        1e-10,
        devs.into_iter().collect::<Result<Vec<_>>>()?,
    ))
}

/// `|sum of trajectory weights - 1|` after loss on either codeword.
pub fn trajectory_normalization(exec: Execution) -> Result<Check> {
    let devs = map_with(exec, &oracle_grid(), |&(a, e, l)| -> Result<f64> {
        let code = CatCode::new(a, l)?;
        let mut worst: f64 = 0.0;
        for bit in 0..2 {
            let word = code.codeword(bit, code.cutoff())?;
            let ens = WeightedEnsemble::pure(MultiModeState::from_fock(&word)).apply_loss_adaptive(0, e)?;
            worst = worst.max((ens.total_weight() - 1.0).abs());
        }
        Ok(worst)
    });
    Ok(Check::new(
        "trajectory_normalization",
        1e-10,
        devs.into_iter().collect::<Result<Vec<_>>>()?,
    ))
}

/// `|sum_j P_j - 1|` for the oracle residue probabilities.
pub fn residue_partition(exec: Execution) -> Result<Check> {
    let devs = map_with(exec, &oracle_grid(), |&(a, e, l)| -> Result<f64> {
        let code = CatCode::new(a, l)?;
        let mut total = 0.0;
        for j in 0..code.modulus() {
            total += syndrome_class_probability(&code, e, j)?;
        }
        Ok((total - 1.0).abs())
    });
    Ok(Check::new(
        "residue_partition",
        1e-10,
        devs.into_iter().collect::<Result<Vec<_>>>()?,
    ))
}

/// Residue probabilities and damped readout success, closed form against
/// the trajectory oracle.
pub fn syndrome_closed_form(exec: Execution) -> Result<Check> {
    let devs = map_with(exec, &oracle_grid(), |&(a, e, l)| -> Result<f64> {
        let code = CatCode::new(a, l)?;
        let s = code.modulus();
        let mut worst: f64 = 0.0;
        for j in 0..s {
            let p = closed_form::syndrome_probability(a, e, s, j);
            worst = worst.max((p - syndrome_class_probability(&code, e, j)?).abs());
            let u = closed_form::usd_probability_damped(a, e, s, j);
            worst = worst.max((u - usd_probability_damped(&code, e, j)?).abs());
        }
        Ok(worst)
    });
    Ok(Check::new(
        "syndrome_closed_form",
        1e-8,
        devs.into_iter().collect::<Result<Vec<_>>>()?,
    ))
}

/// One-loss link fidelity per residue pair from the oracle against the
/// `C_m`, `D_m` series.
pub fn link_closed_form(opts: VerifyOptions) -> Result<Check> {
    let grid: Vec<(f64, f64)> = ORACLE_ALPHAS
        .iter()
        .flat_map(|&a| ORACLE_ETAS.iter().map(move |&e| (a, e)))
        .collect();
    let devs = map_with(opts.execution, &grid, |&(a, e)| -> Result<f64> {
        let code = CatCode::new(a, 1)?;
        let outcome = link_oracle(&LinkParams::new(code, e, vec![0, 1])?)?;
        let mut sc = series_coefficients(&code, e, 40 + ((1.0 - e) * a * a) as usize)?;
        if let Some(c1) = sc.c.get_mut(1) {
            *c1 *= 1.0 + opts.series_perturbation;
        }
        let mut worst: f64 = 0.0;
        for o in &outcome.outcomes {
            worst = worst.max((f0_from_series(&sc, o.left, o.right) - o.fidelity).abs());
        }
        Ok(worst)
    });
    Ok(Check::new(
        "link_closed_form",
        1e-8,
        devs.into_iter().collect::<Result<Vec<_>>>()?,
    ))
}

/// `sum C_m^2` and `sum D_m^2` against the one-loss residue probabilities.
pub fn series_weights(opts: VerifyOptions) -> Result<Check> {
    let mut devs = Vec::new();
    for &a in &ORACLE_ALPHAS {
        for &e in &ORACLE_ETAS {
            let code = CatCode::new(a, 1)?;
            let mut sc = series_coefficients(&code, e, 40 + ((1.0 - e) * a * a) as usize)?;
            if let Some(c1) = sc.c.get_mut(1) {
                *c1 *= 1.0 + opts.series_perturbation;
            }
            let even: f64 = sc.c.iter().map(|c| c * c).sum();
            let odd: f64 = sc.d.iter().map(|d| d * d).sum();
            devs.push((even - syndrome_class_probability(&code, e, 0)?).abs());
            devs.push((odd - syndrome_class_probability(&code, e, 1)?).abs());
        }
    }
    Ok(Check::new("series_weights", 1e-10, devs))
}

/// `alpha` grid for the undamped readout check: 21 even points on
/// `[0.2, 2.0]` plus the first zero of the overlap.
pub fn usd_alphas() -> Vec<f64> {
    let mut v: Vec<f64> = (0..21).map(|i| 0.2 + 0.09 * i as f64).collect();
    v.push(std::f64::consts::FRAC_PI_2.sqrt());
    v
}

/// `1 - |<0|1>|` from Fock vectors against `1 - |cos x| / cosh x`.
pub fn usd_pattern() -> Result<Check> {
    let mut devs = Vec::new();
    for a in usd_alphas() {
        let code = CatCode::new(a, 1)?;
        let (zero, one) = code.codewords()?;
        let overlap = zero.inner(&one).norm() / (zero.norm_sqr() * one.norm_sqr()).sqrt();
        let x = a * a;
        let expected = 1.0 - x.cos().abs() / x.cosh();
        devs.push((1.0 - overlap - expected).abs());
    }
    Ok(Check::new("usd_pattern", 1e-10, devs))
}

/// Pruned multiplexed graph against direct transmission.
pub fn graph_equivalence(exec: Execution) -> Result<Check> {
    let devs = map_with(exec, &EQUIVALENCE_POINTS, |&(alpha, eta)| -> Result<f64> {
        Ok(equivalence_check(EquivalenceParams { alpha, eta })?.max_deviation)
    });
    Ok(Check::new(
        "graph_equivalence",
        1e-8,
        devs.into_iter().collect::<Result<Vec<_>>>()?,
    ))
}

/// Memory-error QBERs: exact reduction at `p = 0` and the worked values.
pub fn qber_formulas() -> Check {
    let mut devs = Vec::new();
    for &f0 in &[0.5, 0.75, 0.9, 0.99, 1.0] {
        for n in 1..=20 {
            let n = n as f64;
            let loss_only = (1.0 - swapped_fidelity(f0, n), 0.0);
            for (ex, ez) in [qber_depolarizing(f0, n, 0.0), qber_dephasing(f0, n, 0.0)] {
                devs.push((ex - loss_only.0).abs() + (ez - loss_only.1).abs());
            }
        }
    }
    let (ex, ez) = qber_depolarizing(0.9, 2.0, 0.1);
    devs.push((ex - 0.2408).abs());
    devs.push((ez - 0.095).abs());
    let (ex, ez) = qber_dephasing(0.9, 2.0, 0.1);
    devs.push((ex - 0.2952).abs());
    devs.push(ez.abs());
    Check::new("qber_formulas", 1e-12, devs)
}

/// Every check, in a fixed order.
pub fn run_all(opts: VerifyOptions) -> Result<Vec<Check>> {
    Ok(vec![
        kraus_completeness(opts.execution)?,
        trajectory_normalization(opts.execution)?,
        residue_partition(opts.execution)?,
        syndrome_closed_form(opts.execution)?,
        link_closed_form(opts)?,
        series_weights(opts)?,
        usd_pattern()?,
        graph_equivalence(opts.execution)?,
        qber_formulas(),
    ])
}
