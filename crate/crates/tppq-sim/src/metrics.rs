//! Gate scoring: computational-subspace extraction, virtual-Z frames, ideal
//! targets, the sampled average-fidelity estimator and state tomography.
//!
//! All 4×4 blocks live on the computational basis (|00⟩, |01⟩, |10⟩, |11⟩)
//! with |ij⟩ = |0⟩|i⟩|j+1⟩ — transmon index i, PPQ index j, resonator in the
//! ground state. Blocks cut from a 64-dim propagator are generally
//! sub-unitary; the missing column weight is leakage.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::ComplexMatrix;
use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("sample count must be positive")]
    ZeroSamples,
}

/// An ideal target gate on the computational subspace.
#[derive(Debug, Clone)]
pub struct IdealGate {
    pub label: String,
    pub matrix: ComplexMatrix,
}

/// CNOT with the transmon as control and the PPQ as target:
/// |00⟩→|00⟩, |01⟩→|01⟩, |10⟩→|11⟩, |11⟩→|10⟩.
pub fn ideal_cnot_tp() -> IdealGate {
    let mut m = ComplexMatrix::zeros(4, 4);
    m[(0, 0)] = C64::new(1.0, 0.0);
    m[(1, 1)] = C64::new(1.0, 0.0);
    m[(2, 3)] = C64::new(1.0, 0.0);
    m[(3, 2)] = C64::new(1.0, 0.0);
    IdealGate { label: "CNOT_TP".into(), matrix: m }
}

/// `R_X(θ) = exp(-i·θ·σ_x/2)` as a 2×2 block.
fn rx_2x2(theta: f64) -> ComplexMatrix {
    let c = (theta / 2.0).cos();
    let s = (theta / 2.0).sin();
    ComplexMatrix::from_rows(&[
        vec![C64::new(c, 0.0), C64::new(0.0, -s)],
        vec![C64::new(0.0, -s), C64::new(c, 0.0)],
    ])
}

/// X rotation of the transmon: `R_X(θ) ⊗ I₂` on the computational space.
pub fn ideal_rx_t(theta: f64) -> IdealGate {
    let m = rx_2x2(theta).kron(&ComplexMatrix::identity(2));
    IdealGate { label: format!("RX_T({theta:.6})"), matrix: m }
}

/// X rotation of the PPQ: `I₂ ⊗ R_X(θ)`.
pub fn ideal_rx_p(theta: f64) -> IdealGate {
    let m = ComplexMatrix::identity(2).kron(&rx_2x2(theta));
    IdealGate { label: format!("RX_P({theta:.6})"), matrix: m }
}

pub fn ideal_identity() -> IdealGate {
    IdealGate { label: "identity".into(), matrix: ComplexMatrix::identity(4) }
}

/// Cut the computational 4×4 block out of a 64×64 propagator:
/// `B[a,b] = U[comp_idx[a], comp_idx[b]]`.
pub fn computational_block(u: &ComplexMatrix, comp_idx: &[usize; 4]) -> ComplexMatrix {
    ComplexMatrix::from_fn(4, 4, |a, b| u[(comp_idx[a], comp_idx[b])])
}

/// Same cut when only the four computational columns were propagated
/// (a 64×4 block whose columns follow `comp_idx` order).
pub fn computational_block_from_columns(cols: &ComplexMatrix, comp_idx: &[usize; 4]) -> ComplexMatrix {
    ComplexMatrix::from_fn(4, 4, |a, b| cols[(comp_idx[a], b)])
}

/// Virtual-Z frame rotation applied after the pulse block: `Z(θ_T, θ_P)·B`
/// with symmetric phases `e^{-iθ(i-1/2)}` on each qubit's computational pair.
pub fn apply_vz(b: &ComplexMatrix, theta_t: f64, theta_p: f64) -> ComplexMatrix {
    let mut out = b.clone();
    let phases: Vec<C64> = (0..4)
        .map(|c| {
            let i = (c / 2) as f64;
            let j = (c % 2) as f64;
            C64::from_polar(1.0, -theta_t * (i - 0.5) - theta_p * (j - 0.5))
        })
        .collect();
    out.scale_rows(&phases);
    out
}

/// Take a lab-frame computational block into the co-rotating computational
/// frame and apply the schedule's virtual-Z angles, in one frame rotation.
///
/// Lab propagation accumulates the trivial idle phases `e^{-i·ω̃·t}` on every
/// computational state; gates are defined in the frame where those phases
/// stand still (a free idle is the identity there). Undoing them is a
/// virtual-Z by `+ω̃·T` per qubit, using the dressed transition frequencies
/// cached on the model, so it composes with the schedule's own angles.
pub fn apply_frame_and_vz(
    model: &crate::device::CompositeModel,
    b: &ComplexMatrix,
    duration: f64,
    vz: crate::pulses::VirtualZ,
) -> ComplexMatrix {
    apply_vz(
        b,
        -model.frame_omega_t * duration + vz.theta_t,
        -model.frame_omega_p * duration + vz.theta_p,
    )
}

/// Draw a Haar-random pure state of dimension 4 from the counter-based
/// stream `(seed, n)`: i.i.d. complex Gaussians, normalized.
fn random_pure_state(seed: u64, n: u64) -> [C64; 4] {
    let mut rng = SplitMix64::at(seed, n);
    let mut psi = [C64::new(0.0, 0.0); 4];
    for slot in psi.iter_mut() {
        let (re, im) = rng.next_gaussian_pair();
        *slot = C64::new(re, im);
    }
    let norm = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for slot in psi.iter_mut() {
        *slot /= norm;
    }
    psi
}

/// Sampled average gate fidelity:
/// `F = (1/N)·Σ_n |⟨ψ_n| ideal† · B |ψ_n⟩|` over Haar-random pure states.
///
/// The estimator is invariant under a global phase of `B` by construction,
/// and bit-reproducible for a fixed seed: state `n` depends only on
/// `(seed, n)` and the accumulation order is fixed.
pub fn estimate_fidelity(
    b: &ComplexMatrix,
    ideal: &IdealGate,
    samples: usize,
    seed: u64,
) -> Result<f64, MetricsError> {
    if samples == 0 {
        return Err(MetricsError::ZeroSamples);
    }
    let m = ideal.matrix.dagger().mul(b);
    let mut acc = 0.0;
    for n in 0..samples {
        let psi = random_pure_state(seed, n as u64);
        let mut bra_m_ket = C64::new(0.0, 0.0);
        for i in 0..4 {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..4 {
                row += m[(i, j)] * psi[j];
            }
            bra_m_ket += psi[i].conj() * row;
        }
        acc += bra_m_ket.norm();
    }
    Ok(acc / samples as f64)
}

/// Threshold below which an output amplitude is left out of the phase table.
const TOMOGRAPHY_AMP_CUTOFF: f64 = 1e-3;

/// One input column of a tomography table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TomographyRow {
    /// Input basis label, e.g. "10".
    pub input: String,
    /// Output populations on (|00⟩, |01⟩, |10⟩, |11⟩).
    pub populations: [f64; 4],
    /// `1 - Σ populations`: weight that left the computational subspace.
    pub leakage: f64,
    /// Index of the strongest output amplitude.
    pub dominant: usize,
    /// Relative phase Δφ of the dominant amplitude against the reference
    /// (the dominant amplitude of the |00⟩-input column), in radians.
    pub dominant_phase: f64,
    /// (output index, Δφ) for every amplitude above the cutoff.
    pub phases: Vec<(usize, f64)>,
}

/// Basis-state tomography of a computational block: populations, leakage and
/// relative phases per input, all phases referenced to the dominant amplitude
/// of the |00⟩-input output.
pub fn state_tomography(b: &ComplexMatrix) -> Vec<TomographyRow> {
    let labels = ["00", "01", "10", "11"];
    let columns: Vec<Vec<C64>> = (0..4).map(|c| b.column(c)).collect();
    let dominant_of = |col: &[C64]| -> usize {
        let mut best = 0;
        for i in 1..4 {
            if col[i].norm_sqr() > col[best].norm_sqr() {
                best = i;
            }
        }
        best
    };
    let ref_phase = {
        let col = &columns[0];
        let d = dominant_of(col);
        col[d].arg()
    };
    let wrap = |x: f64| {
        let mut y = x % std::f64::consts::TAU;
        if y > std::f64::consts::PI {
            y -= std::f64::consts::TAU;
        } else if y <= -std::f64::consts::PI {
            y += std::f64::consts::TAU;
        }
        y
    };
    columns
        .iter()
        .enumerate()
        .map(|(c, col)| {
            let mut populations = [0.0; 4];
            for (i, a) in col.iter().enumerate() {
                populations[i] = a.norm_sqr();
            }
            let leakage = (1.0 - populations.iter().sum::<f64>()).max(0.0);
            let dominant = dominant_of(col);
            let phases: Vec<(usize, f64)> = col
                .iter()
                .enumerate()
                .filter(|(_, a)| a.norm() > TOMOGRAPHY_AMP_CUTOFF)
                .map(|(i, a)| (i, wrap(a.arg() - ref_phase)))
                .collect();
            let dominant_phase = wrap(col[dominant].arg() - ref_phase);
            TomographyRow {
                input: labels[c].to_string(),
                populations,
                leakage,
                dominant,
                dominant_phase,
                phases,
            }
        })
        .collect()
}

/// Serializable form of a complex matrix: rows of `[re, im]` pairs.
pub fn matrix_to_rows(m: &ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|a| [a.re, a.im]).collect())
        .collect()
}

/// Full scoring record of one gate attempt.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateReport {
    pub target: String,
    /// Sampled average fidelity in [0, 1].
    pub fidelity: f64,
    pub sample_count: usize,
    pub rng_seed: u64,
    /// Time step used for the reported propagation, ns.
    pub tau_ns: f64,
    /// The (virtual-Z-adjusted) computational block, rows of [re, im].
    pub comp_block: Vec<Vec<[f64; 2]>>,
    pub tomography: Vec<TomographyRow>,
}

impl GateReport {
    /// Score a computational block (already frame-adjusted) against a target.
    pub fn from_block(
        block: &ComplexMatrix,
        ideal: &IdealGate,
        samples: usize,
        seed: u64,
        tau_ns: f64,
    ) -> Result<Self, MetricsError> {
        let fidelity = estimate_fidelity(block, ideal, samples, seed)?;
        Ok(Self {
            target: ideal.label.clone(),
            fidelity,
            sample_count: samples,
            rng_seed: seed,
            tau_ns,
            comp_block: matrix_to_rows(block),
            tomography: state_tomography(block),
        })
    }
}
