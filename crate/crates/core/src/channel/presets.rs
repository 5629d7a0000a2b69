//! Standard test channels.

use num_complex::Complex64;

use super::{CqChannel, CqInterferenceChannel, CqMac};
use crate::error::Result;
use crate::quantum::{DensityMatrix, Operator};

/// `x → |x⟩⟨x|` on a qubit.
pub fn noiseless_channel() -> CqChannel {
    CqChannel::new(DensityMatrix::basis(2, 0), DensityMatrix::basis(2, 1))
        .expect("basis states are valid")
}

/// Both inputs map to the maximally mixed qubit.
pub fn useless_channel() -> CqChannel {
    let m = DensityMatrix::maximally_mixed(2);
    CqChannel::new(m.clone(), m).expect("valid")
}

/// Binary symmetric channel embedded as diagonal qubit states.
pub fn bsc_channel(p: f64) -> Result<CqChannel> {
    CqChannel::new(
        DensityMatrix::from_diagonal(&[1.0 - p, p])?,
        DensityMatrix::from_diagonal(&[p, 1.0 - p])?,
    )
}

/// Binary erasure channel embedded as diagonal qutrit states
/// (basis order `0, e, 1`).
pub fn bec_channel(eps: f64) -> Result<CqChannel> {
    CqChannel::new(
        DensityMatrix::from_diagonal(&[1.0 - eps, eps, 0.0])?,
        DensityMatrix::from_diagonal(&[0.0, eps, 1.0 - eps])?,
    )
}

/// Pure-state channel `0 → |0⟩`, `1 → cos θ|0⟩ + sin θ|1⟩` (overlap `cos θ`).
pub fn pure_state_channel(theta: f64) -> CqChannel {
    let zero = DensityMatrix::basis(2, 0).to_dense();
    let tilted = DensityMatrix::pure(&[
        Complex64::new(theta.cos(), 0.0),
        Complex64::new(theta.sin(), 0.0),
    ])
    .expect("unit ket");
    CqChannel::new(zero, tilted).expect("valid")
}

/// Amplitude damping with decay `γ` applied to the conjugate-basis states
/// `|+⟩` and `|−⟩`; the two outputs do not commute for `γ < 1`.
pub fn amplitude_damping_channel(gamma: f64) -> Result<CqChannel> {
    let out = |sign: f64| {
        let off = Complex64::new(sign * 0.5 * (1.0 - gamma).sqrt(), 0.0);
        let m = crate::quantum::CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.5 * (1.0 + gamma), 0.0),
                off,
                off,
                Complex64::new(0.5 * (1.0 - gamma), 0.0),
            ],
        );
        DensityMatrix::from_matrix(m)
    };
    CqChannel::new(out(1.0)?, out(-1.0)?)
}

/// Qubit state `(1 − q)|ψ⟩⟨ψ| + q I/2` with
/// `|ψ⟩ = cos(φ/2)|0⟩ + e^{iχ} sin(φ/2)|1⟩`.
pub fn noisy_bloch_state(phi: f64, chi: f64, noise: f64) -> DensityMatrix {
    let ket = [
        Complex64::new((phi / 2.0).cos(), 0.0),
        Complex64::from_polar((phi / 2.0).sin(), chi),
    ];
    let pure = DensityMatrix::pure(&ket).expect("unit ket");
    let mut op = pure.operator().scaled(1.0 - noise);
    op.add_scaled(&Operator::identity(2), noise / 2.0);
    DensityMatrix::new(op).expect("convex mixture of states")
}

/// Qubit MAC with output `noisy_bloch_state(Σ x_s θ_s, Σ x_s χ_s, q)`.
pub fn bloch_mac(thetas: &[f64], phases: &[f64], noise: f64) -> Result<CqMac> {
    let k = thetas.len();
    let states = (0..1usize << k)
        .map(|idx| {
            let (mut phi, mut chi) = (0.0, 0.0);
            for s in 0..k {
                if (idx >> (k - 1 - s)) & 1 == 1 {
                    phi += thetas[s];
                    chi += phases.get(s).copied().unwrap_or(0.0);
                }
            }
            noisy_bloch_state(phi, chi, noise)
        })
        .collect();
    CqMac::new(k, states)
}

/// `ρ_{x,y} = a_x ⊗ b_y`.
pub fn product_mac(a: &CqChannel, b: &CqChannel) -> Result<CqMac> {
    let states = (0..4)
        .map(|i| a.output((i >> 1) as u8).kron(b.output((i & 1) as u8)))
        .collect();
    CqMac::new(2, states)
}

/// Commuting two-sender MAC observing `x ⊕ y` through BSC(`p`) and `x`
/// through BSC(`q`); output basis `|y₁ y₂⟩`.
pub fn adder_mac(p: f64, q: f64) -> Result<CqMac> {
    let bsc = |out: usize, inp: usize, e: f64| if out == inp { 1.0 - e } else { e };
    let states = (0..4)
        .map(|i| {
            let (x, y) = (i >> 1, i & 1);
            let probs: Vec<f64> = (0..4)
                .map(|o| bsc(o >> 1, x ^ y, p) * bsc(o & 1, x, q))
                .collect();
            DensityMatrix::from_diagonal(&probs)
        })
        .collect::<Result<Vec<_>>>()?;
    CqMac::new(2, states)
}

/// Commuting interference channel: receiver 1 sees `x₁ ⊕ (x₂ ∧ interference)`
/// through BSC(`p1`), receiver 2 sees `x₂ ⊕ (x₁ ∧ cross)` through BSC(`p2`).
/// A flag of 1 means the cross input is added; fractional values mix.
pub fn classical_interference_channel(p1: f64, p2: f64, a12: f64, a21: f64) -> Result<CqInterferenceChannel> {
    let bsc = |out: usize, inp: usize, e: f64| if out == inp { 1.0 - e } else { e };
    let states = (0..4)
        .map(|i| {
            let (x1, x2) = (i >> 1, i & 1);
            let probs: Vec<f64> = (0..4)
                .map(|o| {
                    let (y1, y2) = (o >> 1, o & 1);
                    let r1 = (1.0 - a12) * bsc(y1, x1, p1) + a12 * bsc(y1, x1 ^ x2, p1);
                    let r2 = (1.0 - a21) * bsc(y2, x2, p2) + a21 * bsc(y2, x2 ^ x1, p2);
                    r1 * r2
                })
                .collect();
            DensityMatrix::from_diagonal(&probs)
        })
        .collect::<Result<Vec<_>>>()?;
    CqInterferenceChannel::new([2, 2], states)
}
