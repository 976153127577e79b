//! Two-qubit helpers: Bell states and deferred Pauli-frame corrections.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::fock::C64;

/// Two-qubit amplitudes indexed by `2 * first + second`.
pub type TwoQubit = [C64; 4];

const ZERO: C64 = C64::new(0.0, 0.0);

pub fn phi_plus() -> TwoQubit {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    [h, ZERO, ZERO, h]
}

/// Bell basis `Phi+, Phi-, Psi+, Psi-`.
pub fn bell_basis() -> [TwoQubit; 4] {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    [
        [h, ZERO, ZERO, h],
        [h, ZERO, ZERO, -h],
        [ZERO, h, h, ZERO],
        [ZERO, h, -h, ZERO],
    ]
}

pub fn norm_sqr(psi: &TwoQubit) -> f64 {
    psi.iter().map(|a| a.norm_sqr()).sum()
}

/// `|<Phi+|psi>|^2 / <psi|psi>`.
pub fn fidelity_phi_plus(psi: &TwoQubit) -> f64 {
    let n = norm_sqr(psi);
    if n == 0.0 {
        return 0.0;
    }
    ((psi[0] + psi[3]) * FRAC_1_SQRT_2).norm_sqr() / n
}

/// Hadamard on the second qubit.
pub fn hadamard_second(psi: &TwoQubit) -> TwoQubit {
    let h = FRAC_1_SQRT_2;
    [
        (psi[0] + psi[1]) * h,
        (psi[0] - psi[1]) * h,
        (psi[2] + psi[3]) * h,
        (psi[2] - psi[3]) * h,
    ]
}

/// Correction on the second qubit: optional `X`, then `diag(1, e^{i phase})`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PauliFrame {
    pub x_flip: bool,
    pub phase: f64,
}

impl PauliFrame {
    /// Frame that maps the dominant Bell component of `psi` onto `Phi+`.
    pub fn aligning(psi: &TwoQubit) -> Self {
        let x_flip = psi[0].norm_sqr() + psi[3].norm_sqr() < psi[1].norm_sqr() + psi[2].norm_sqr();
        let (a, b) = if x_flip { (psi[1], psi[2]) } else { (psi[0], psi[3]) };
        let phase = if a.norm() == 0.0 || b.norm() == 0.0 {
            0.0
        } else {
            (a.arg() - b.arg()).rem_euclid(2.0 * PI)
        };
        Self { x_flip, phase }
    }

    pub fn apply(&self, psi: &TwoQubit) -> TwoQubit {
        let mut out = if self.x_flip {
            [psi[1], psi[0], psi[3], psi[2]]
        } else {
            *psi
        };
        let z = C64::from_polar(1.0, self.phase);
        out[1] *= z;
        out[3] *= z;
        out
    }

    /// Bit 7 holds the X flip, bits 0..7 the phase in units of `2 pi / 128`.
    pub fn byte(&self) -> u8 {
        let steps = (self.phase / (2.0 * PI) * 128.0).round().rem_euclid(128.0) as u8;
        ((self.x_flip as u8) << 7) | steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn aligning_recovers_phi_plus() {
        let h = FRAC_1_SQRT_2;
        let psi = [ZERO, C64::from_polar(h, 0.3), C64::from_polar(h, -1.1), ZERO];
        let frame = PauliFrame::aligning(&psi);
        assert!(frame.x_flip);
        assert_abs_diff_eq!(fidelity_phi_plus(&frame.apply(&psi)), 1.0, epsilon = 1e-14);
        let minus = bell_basis()[1];
        let frame = PauliFrame::aligning(&minus);
        assert_eq!(frame.byte(), 64);
        assert_abs_diff_eq!(fidelity_phi_plus(&frame.apply(&minus)), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn identity_frame() {
        let f = PauliFrame::aligning(&phi_plus());
        assert_eq!(f.byte(), 0);
        assert_eq!(f.apply(&phi_plus()), phi_plus());
    }
}
