//! Rotation-symmetric cat codes.
//!
//! Bit 0 is the equal superposition of `|alpha w^r>` for `r = 0..s` with
//! `w = exp(2 pi i / s)` and `s = loss_order + 1`; bit 1 is the same
//! constellation rotated by `pi / s`. Loss of `k` photons moves the code
//! into the residue class `-k mod s`, which is what the syndrome measures.

use std::f64::consts::PI;

use crate::error::{check_probability, Error, Result};
use crate::fock::{truncation_cutoff, FockState, MultiModeState, WeightedEnsemble, C64};

/// Cat-code family descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatCode {
    alpha: f64,
    loss_order: usize,
}

impl CatCode {
    pub fn new(alpha: f64, loss_order: usize) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: alpha,
                reason: "must be finite and non-negative",
            });
        }
        if loss_order == 0 {
            return Err(Error::InvalidParameter {
                name: "loss_order",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        Ok(Self { alpha, loss_order })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn loss_order(&self) -> usize {
        self.loss_order
    }

    /// Syndrome modulus `s = loss_order + 1`.
    pub fn modulus(&self) -> usize {
        self.loss_order + 1
    }

    /// Cutoff from the truncation rule, at least one full residue period.
    pub fn cutoff(&self) -> usize {
        truncation_cutoff(self.alpha).max(self.modulus())
    }

    /// Logical X rotation angle `pi / s`.
    pub fn logical_angle(&self) -> f64 {
        PI / self.modulus() as f64
    }

    /// Codeword `|bit>` built as a sum of coherent states.
    pub fn codeword(&self, bit: u8, cutoff: usize) -> Result<FockState> {
        let s = self.modulus();
        let offset = if bit == 0 { 0.0 } else { self.logical_angle() };
        let mut acc = FockState::vacuum(cutoff).scaled(C64::new(0.0, 0.0));
        for r in 0..s {
            let phase = 2.0 * PI * r as f64 / s as f64 + offset;
            let coh = FockState::coherent(C64::from_polar(self.alpha, phase), cutoff)?;
            acc = acc.add_scaled(&coh, C64::new(1.0, 0.0));
        }
        Ok(acc.normalized())
    }

    /// Both codewords at the rule cutoff.
    pub fn codewords(&self) -> Result<(FockState, FockState)> {
        let n = self.cutoff();
        Ok((self.codeword(0, n)?, self.codeword(1, n)?))
    }
}

/// `<0|1>` by Fock-space inner product.
pub fn codeword_overlap(code: &CatCode) -> Result<C64> {
    let (zero, one) = code.codewords()?;
    Ok(zero.inner(&one))
}

/// Optimal USD success probability `1 - |<0|1>|` for the undamped code.
pub fn usd_probability(code: &CatCode) -> Result<f64> {
    Ok(1.0 - codeword_overlap(code)?.norm())
}

/// Normalized `A_k |bit>`; `None` when the branch has zero weight.
pub fn damped_codeword(code: &CatCode, eta: f64, k: usize, bit: u8) -> Result<Option<FockState>> {
    check_probability("eta", eta)?;
    let cw = code.codeword(bit, code.cutoff())?;
    let out = cw.apply_kraus(k, eta);
    if out.norm_sqr() == 0.0 {
        return Ok(None);
    }
    Ok(Some(out.normalized()))
}

/// USD success probability on the damped codewords after `residue` losses.
pub fn usd_probability_damped(code: &CatCode, eta: f64, residue: usize) -> Result<f64> {
    let zero = damped_codeword(code, eta, residue, 0)?;
    let one = damped_codeword(code, eta, residue, 1)?;
    match (zero, one) {
        (Some(a), Some(b)) => Ok(1.0 - a.inner(&b).norm()),
        _ => Ok(0.0),
    }
}

/// Probability that codeword `bit` loses `j (mod s)` photons, by trajectory
/// enumeration.
pub fn syndrome_class_probability_for(code: &CatCode, eta: f64, residue: usize, bit: u8) -> Result<f64> {
    check_probability("eta", eta)?;
    let s = code.modulus();
    let cw = code.codeword(bit, code.cutoff())?;
    let ens = WeightedEnsemble::pure(MultiModeState::from_fock(&cw)).apply_loss_adaptive(0, eta)?;
    Ok(ens.project_loss_residue(0, s, residue)?.1)
}

/// Residue-class probability averaged over the two codewords.
pub fn syndrome_class_probability(code: &CatCode, eta: f64, residue: usize) -> Result<f64> {
    let p0 = syndrome_class_probability_for(code, eta, residue, 0)?;
    let p1 = syndrome_class_probability_for(code, eta, residue, 1)?;
    Ok(0.5 * (p0 + p1))
}

/// `sum_{k = j mod s} (y z)^k / k!` for a unit phase `z`.
pub fn phased_residue_series(y: f64, modulus: usize, residue: usize, z: C64) -> C64 {
    let residue = residue % modulus;
    let mut term = C64::new(1.0, 0.0);
    let mut sum = C64::new(0.0, 0.0);
    let mut scale = 0.0;
    for k in 0.. {
        if k % modulus == residue {
            sum += term;
            scale += term.norm();
        }
        if k >= residue && (term.norm() == 0.0 || (k as f64 > y && term.norm() <= 1e-18 * scale)) {
            break;
        }
        term = term * z * (y / (k + 1) as f64);
    }
    sum
}

/// `S_j^(s)(y) = sum_{k = j mod s} y^k / k!`.
pub fn residue_series(y: f64, modulus: usize, residue: usize) -> f64 {
    phased_residue_series(y, modulus, residue, C64::new(1.0, 0.0)).re
}

/// Closed forms for the cat code, checked against the Fock oracle in tests.
pub mod closed_form {
    use super::*;

    fn rotation(modulus: usize) -> C64 {
        C64::from_polar(1.0, PI / modulus as f64)
    }

    /// `<0|1> = sum_{n = 0 mod s} (x e^{i pi/s})^n / n! / S_0(x)`,
    /// which for one-loss codes is `cos(x) / cosh(x)`.
    pub fn overlap(alpha: f64, modulus: usize) -> C64 {
        let x = alpha * alpha;
        phased_residue_series(x, modulus, 0, rotation(modulus)) / residue_series(x, modulus, 0)
    }

    /// Overlap of the damped codewords in loss class `residue`.
    pub fn damped_overlap(alpha: f64, eta: f64, modulus: usize, residue: usize) -> C64 {
        let y = eta * alpha * alpha;
        let jp = (modulus - residue % modulus) % modulus;
        let norm = residue_series(y, modulus, jp);
        if norm == 0.0 {
            return C64::new(1.0, 0.0);
        }
        phased_residue_series(y, modulus, jp, rotation(modulus)) / norm
    }

    pub fn usd_probability(alpha: f64, modulus: usize) -> f64 {
        1.0 - overlap(alpha, modulus).norm()
    }

    pub fn usd_probability_damped(alpha: f64, eta: f64, modulus: usize, residue: usize) -> f64 {
        1.0 - damped_overlap(alpha, eta, modulus, residue).norm()
    }

    /// `P_j = S_{-j}(eta x) S_j((1-eta) x) / S_0(x)`.
    pub fn syndrome_probability(alpha: f64, eta: f64, modulus: usize, residue: usize) -> f64 {
        let x = alpha * alpha;
        let jp = (modulus - residue % modulus) % modulus;
        residue_series(eta * x, modulus, jp) * residue_series((1.0 - eta) * x, modulus, residue)
            / residue_series(x, modulus, 0)
    }
}

/// Loss amplitudes of the one-loss code: `C_m = ||A_{2m}|0>||`,
/// `D_m = ||A_{2m+1}|0>||`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCoefficients {
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub eta: f64,
    pub alpha: f64,
}

impl SeriesCoefficients {
    /// `sum C_m^2 + sum D_m^2`.
    pub fn total(&self) -> f64 {
        self.c.iter().chain(&self.d).map(|v| v * v).sum()
    }
}

/// `C_m = sqrt(cosh(eta x)/cosh x) beta^m / sqrt((2m)!)` and
/// `D_m = sqrt(sinh(eta x)/cosh x) beta^(m+1/2) / sqrt((2m+1)!)` with
/// `x = alpha^2`, `beta = (1-eta) x`, for `m = 0..=m_max`.
pub fn series_coefficients(code: &CatCode, eta: f64, m_max: usize) -> Result<SeriesCoefficients> {
    if code.loss_order() != 1 {
        return Err(Error::Unsupported(format!(
            "series coefficients need loss order 1, got {}",
            code.loss_order()
        )));
    }
    check_probability("eta", eta)?;
    let alpha = code.alpha();
    let x = alpha * alpha;
    let beta = (1.0 - eta) * x;
    let even = (residue_series(eta * x, 2, 0) / residue_series(x, 2, 0)).sqrt();
    let odd = (residue_series(eta * x, 2, 1) / residue_series(x, 2, 0)).sqrt();
    // t_k = beta^(k/2) / sqrt(k!)
    let mut t = Vec::with_capacity(2 * m_max + 2);
    t.push(1.0);
    for k in 1..=(2 * m_max + 1) {
        let prev: f64 = t[k - 1];
        t.push(prev * (beta / k as f64).sqrt());
    }
    let c = (0..=m_max).map(|m| even * t[2 * m]).collect();
    let d = (0..=m_max).map(|m| odd * t[2 * m + 1]).collect();
    Ok(SeriesCoefficients { c, d, eta, alpha })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn code(alpha: f64, l: usize) -> CatCode {
        CatCode::new(alpha, l).unwrap()
    }

    #[test]
    fn one_loss_codewords_match_cat_states() {
        let c = code(1.0, 1);
        let n = c.cutoff();
        let plus = FockState::coherent(C64::new(1.0, 0.0), n)
            .unwrap()
            .add_scaled(
                &FockState::coherent(C64::new(-1.0, 0.0), n).unwrap(),
                C64::new(1.0, 0.0),
            )
            .normalized();
        let iplus = FockState::coherent(C64::new(0.0, 1.0), n)
            .unwrap()
            .add_scaled(
                &FockState::coherent(C64::new(0.0, -1.0), n).unwrap(),
                C64::new(1.0, 0.0),
            )
            .normalized();
        assert_abs_diff_eq!(c.codeword(0, n).unwrap().inner(&plus).norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.codeword(1, n).unwrap().inner(&iplus).norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn codeword_support() {
        let c = code(1.0, 1);
        let one = c.codeword(1, c.cutoff()).unwrap();
        for (n, a) in one.amplitudes().iter().enumerate() {
            if n % 2 == 1 {
                assert!(a.norm() < 1e-14);
            } else {
                // amplitude proportional to (i alpha)^n: phase i^n
                let expected = C64::new(0.0, 1.0).powu(n as u32);
                assert!((a / a.norm() - expected).norm() < 1e-10);
            }
        }
        let three = code(1.0, 3);
        for (n, a) in three
            .codeword(0, three.cutoff())
            .unwrap()
            .amplitudes()
            .iter()
            .enumerate()
        {
            if n % 4 != 0 {
                assert!(a.norm() < 1e-14, "n={n} amp={a}");
            }
        }
    }

    #[test]
    fn overlap_examples() {
        let ov = codeword_overlap(&code(1.0, 1)).unwrap();
        assert_abs_diff_eq!(ov.re, 1f64.cos() / 1f64.cosh(), epsilon = 1e-10);
        assert_abs_diff_eq!(ov.re, 0.3501, epsilon = 1e-4);
        let zero = codeword_overlap(&code((PI / 2.0).sqrt(), 1)).unwrap();
        assert!(zero.norm() < 1e-10);
        let far = codeword_overlap(&code(4.0, 1)).unwrap();
        assert!(far.norm() < 1e-6);
        assert_abs_diff_eq!(usd_probability(&code(1.0, 1)).unwrap(), 0.6499, epsilon = 1e-4);
        assert_abs_diff_eq!(usd_probability(&code(0.0, 1)).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn syndrome_examples() {
        let c = code(1.0, 1);
        assert_abs_diff_eq!(syndrome_class_probability(&c, 1.0, 0).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(syndrome_class_probability(&c, 1.0, 1).unwrap(), 0.0, epsilon = 1e-14);
        let p = syndrome_class_probability_for(&c, 0.5, 0, 0).unwrap();
        let closed = 0.5f64.cosh() * 0.5f64.cosh() / 1f64.cosh();
        assert_abs_diff_eq!(p, closed, epsilon = 1e-10);
        assert_abs_diff_eq!(p, 0.8240, epsilon = 1e-4);
        let c3 = code(1.2, 3);
        let total: f64 = (0..4).map(|j| syndrome_class_probability(&c3, 0.8, j).unwrap()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn closed_forms_match_oracle() {
        for l in [1, 2, 3] {
            for alpha in [0.6, 1.0, 1.5] {
                let c = code(alpha, l);
                let s = c.modulus();
                let ov = codeword_overlap(&c).unwrap();
                assert!((ov - closed_form::overlap(alpha, s)).norm() < 1e-10);
                for eta in [0.3, 0.6, 0.9] {
                    for j in 0..s {
                        let oracle = syndrome_class_probability(&c, eta, j).unwrap();
                        let closed = closed_form::syndrome_probability(alpha, eta, s, j);
                        assert_abs_diff_eq!(oracle, closed, epsilon = 1e-10);
                        let u = usd_probability_damped(&c, eta, j).unwrap();
                        let uc = closed_form::usd_probability_damped(alpha, eta, s, j);
                        assert_abs_diff_eq!(u, uc, epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn damped_one_loss_overlaps() {
        let (alpha, eta) = (1.1f64, 0.7);
        let y = eta * alpha * alpha;
        let even = closed_form::damped_overlap(alpha, eta, 2, 0);
        assert_abs_diff_eq!(even.re, y.cos() / y.cosh(), epsilon = 1e-12);
        let odd = closed_form::damped_overlap(alpha, eta, 2, 1);
        assert_abs_diff_eq!(odd.im, y.sin() / y.sinh(), epsilon = 1e-12);
    }

    #[test]
    fn series_coefficients_examples() {
        let lossless = series_coefficients(&code(1.0, 1), 1.0, 5).unwrap();
        assert_abs_diff_eq!(lossless.c[0], 1.0, epsilon = 1e-15);
        assert!(lossless.c[1..].iter().chain(&lossless.d).all(|v| *v == 0.0));
        let sc = series_coefficients(&code(1.0, 1), 0.6, 30).unwrap();
        assert_abs_diff_eq!(sc.total(), 1.0, epsilon = 1e-10);
        let c = code(1.0, 1);
        let sc = series_coefficients(&c, 0.5, 10).unwrap();
        let zero = c.codeword(0, c.cutoff()).unwrap();
        for k in 0..=21 {
            let norm = zero.apply_kraus(k, 0.5).norm_sqr().sqrt();
            let v = if k % 2 == 0 { sc.c[k / 2] } else { sc.d[k / 2] };
            assert_abs_diff_eq!(norm, v, epsilon = 1e-10);
        }
        assert!(series_coefficients(&code(1.0, 3), 0.5, 4).is_err());
    }

    #[test]
    fn residue_series_identities() {
        let y = 0.8f64;
        assert_abs_diff_eq!(residue_series(y, 2, 0), y.cosh(), epsilon = 1e-14);
        assert_abs_diff_eq!(residue_series(y, 2, 1), y.sinh(), epsilon = 1e-14);
        assert_abs_diff_eq!(residue_series(0.0, 3, 0), 1.0, epsilon = 0.0);
        assert_eq!(residue_series(0.0, 3, 2), 0.0);
        let total: f64 = (0..4).map(|j| residue_series(2.5, 4, j)).sum();
        assert_abs_diff_eq!(total, 2.5f64.exp(), epsilon = 1e-12);
    }
}
