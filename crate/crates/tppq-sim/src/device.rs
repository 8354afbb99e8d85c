//! Circuit-level device models: the flux-tunable transmon, the
//! parity-protected qubit (PPQ), the resonator bus, and the composite
//! 64-dimensional system they form.
//!
//! Both qubits are Cooper-pair boxes diagonalized in the charge basis
//! `|n⟩, |n| ≤ n_max`; they differ only in the tunneling operator. The
//! transmon admits single Cooper pairs (first off-diagonals), the PPQ admits
//! pairs of pairs (second off-diagonals), which decouples the even- and
//! odd-`n` sectors and gives its eigenstates definite charge parity. The
//! lowest `d_trunc` eigenstates of each qubit are retained and every operator
//! is rewritten in that eigenbasis.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::linalg::{eig_hermitian, ComplexMatrix, LinalgError};

/// 1 GHz of linear frequency, as an angular frequency in rad/ns.
pub const GHZ: f64 = TAU;

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("invalid device spec: {0}")]
    InvalidSpec(String),
    #[error("calibration target {target_ghz} GHz outside reachable band [{lo_ghz:.6}, {hi_ghz:.6}] GHz")]
    CalibrationRange { target_ghz: f64, lo_ghz: f64, hi_ghz: f64 },
    #[error("flux bisection failed to reach tolerance (best |f01 - target| = {residual_ghz:.3e} GHz)")]
    CalibrationStalled { residual_ghz: f64 },
    #[error("composite assembly: {0}")]
    Assembly(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Which tunneling operator a Cooper-pair box carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TunnelingKind {
    /// Single Cooper pairs tunnel: couples `|n⟩ ↔ |n±1⟩` (transmon).
    SinglePair,
    /// Pairs of Cooper pairs tunnel: couples `|n⟩ ↔ |n±2⟩` (PPQ).
    PairOfPairs,
}

/// Charge parity of an eigenstate in the `|n⟩` basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    /// Support on both parity sectors (generic for single-pair tunneling).
    Mixed,
}

impl Parity {
    fn rank(self) -> u8 {
        match self {
            Parity::Even => 0,
            Parity::Odd => 1,
            Parity::Mixed => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
            Parity::Mixed => "mixed",
        }
    }
}

/// Circuit parameters of the full device. Energies are angular frequencies in
/// rad/ns; see [`GHZ`] for the conversion used by config loading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceSpec {
    /// Transmon charging energy.
    pub e_c_t: f64,
    /// Total transmon Josephson energy `E_J1 + E_J2` of the SQUID.
    pub e_j_sigma_t: f64,
    /// SQUID junction asymmetry `γ = E_J1 / E_J2`.
    pub gamma_squid: f64,
    /// Reduced external flux through the SQUID, radians.
    pub phi_e: f64,
    /// PPQ charging energy.
    pub e_c_p: f64,
    /// PPQ Josephson energy.
    pub e_j_p: f64,
    /// Resonator angular frequency.
    pub omega_r: f64,
    /// Qubit-resonator coupling (same for both qubits).
    pub g: f64,
    /// Charge-basis cutoff: the basis is `|n⟩, |n| ≤ n_max`.
    pub n_max: usize,
    /// Retained eigenstates per subsystem.
    pub d_trunc: usize,
}

impl Default for DeviceSpec {
    /// Reference hardware values (flux bias zero; calibrate separately).
    fn default() -> Self {
        Self {
            e_c_t: 0.2 * GHZ,
            e_j_sigma_t: 6.0 * GHZ,
            gamma_squid: 1.01,
            phi_e: 0.0,
            e_c_p: 0.2 * GHZ,
            e_j_p: 3.0 * GHZ,
            omega_r: 2.4 * GHZ,
            g: 0.01 * GHZ,
            n_max: 50,
            d_trunc: 4,
        }
    }
}

impl DeviceSpec {
    pub fn validate(&self) -> Result<(), DeviceError> {
        let positive = [
            ("e_c_t", self.e_c_t),
            ("e_j_sigma_t", self.e_j_sigma_t),
            ("e_c_p", self.e_c_p),
            ("e_j_p", self.e_j_p),
            ("omega_r", self.omega_r),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(DeviceError::InvalidSpec(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.gamma_squid > 0.0) {
            return Err(DeviceError::InvalidSpec("gamma_squid must be positive".into()));
        }
        if self.n_max < 10 {
            return Err(DeviceError::InvalidSpec(format!("n_max must be >= 10, got {}", self.n_max)));
        }
        if self.d_trunc < 2 {
            return Err(DeviceError::InvalidSpec(format!("d_trunc must be >= 2, got {}", self.d_trunc)));
        }
        Ok(())
    }

    /// Effective transmon Josephson energy at the stored flux bias.
    pub fn transmon_e_j(&self) -> f64 {
        squid_josephson_energy(self.e_j_sigma_t, self.gamma_squid, self.phi_e)
    }
}

/// Flux-dependent Josephson energy of an asymmetric DC SQUID:
/// `E_JΣ · sqrt(cos²φ_e + d²·sin²φ_e)` with `d = (γ-1)/(γ+1)`.
pub fn squid_josephson_energy(e_j_sigma: f64, gamma: f64, phi_e: f64) -> f64 {
    let d = (gamma - 1.0) / (gamma + 1.0);
    let (s, c) = phi_e.sin_cos();
    e_j_sigma * (c * c + d * d * s * s).sqrt()
}

/// Cooper-pair-box Hamiltonian in the charge basis.
///
/// Diagonal: `4·E_C·(n - n_g)²` for `n ∈ [-n_max, n_max]`. Tunneling:
/// `-E_J/2` on the first (single-pair) or second (pair-of-pairs)
/// off-diagonals.
pub fn build_charge_hamiltonian(
    kind: TunnelingKind,
    e_c: f64,
    e_j: f64,
    n_g: f64,
    n_max: usize,
) -> ComplexMatrix {
    let dim = 2 * n_max + 1;
    let band = match kind {
        TunnelingKind::SinglePair => 1,
        TunnelingKind::PairOfPairs => 2,
    };
    let mut h = ComplexMatrix::zeros(dim, dim);
    for i in 0..dim {
        let n = i as f64 - n_max as f64;
        h[(i, i)] = C64::new(4.0 * e_c * (n - n_g) * (n - n_g), 0.0);
        if i + band < dim {
            h[(i, i + band)] = C64::new(-e_j / 2.0, 0.0);
            h[(i + band, i)] = C64::new(-e_j / 2.0, 0.0);
        }
    }
    h
}

/// Default tolerance for [`classify_parity`].
pub const PARITY_TOL: f64 = 1e-8;

/// Classify a charge-basis eigenvector by the parity of its support.
///
/// `amps` is indexed by `n ∈ [-n_max, n_max]` (odd length, `n = 0` in the
/// middle). Weight at most `tol` on the opposite sector gives a definite
/// label; anything else is mixed.
pub fn classify_parity(amps: &[C64], tol: f64) -> Parity {
    debug_assert!(amps.len() % 2 == 1, "charge basis has odd dimension");
    let n_max = amps.len() / 2;
    let mut weight_even = 0.0;
    let mut weight_odd = 0.0;
    for (i, a) in amps.iter().enumerate() {
        // n = i - n_max; parity of n equals parity of i + n_max.
        if (i + n_max) % 2 == 0 {
            weight_even += a.norm_sqr();
        } else {
            weight_odd += a.norm_sqr();
        }
    }
    if weight_odd <= tol {
        Parity::Even
    } else if weight_even <= tol {
        Parity::Odd
    } else {
        Parity::Mixed
    }
}

/// A qubit reduced to its lowest `d_trunc` eigenstates.
#[derive(Debug, Clone)]
pub struct QubitModel {
    pub kind: TunnelingKind,
    /// Eigenenergies with the ground energy subtracted, ascending (rad/ns).
    pub energies: Vec<f64>,
    /// Truncated charge-number operator in the eigenenergy basis.
    pub n_op: ComplexMatrix,
    /// Charge parity per retained level.
    pub parity: Vec<Parity>,
    /// Retained change-of-basis columns (charge basis → eigenbasis),
    /// kept for diagnostics.
    pub v: ComplexMatrix,
}

impl QubitModel {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `(E1 - E0)/2π` in GHz.
    pub fn f01_ghz(&self) -> f64 {
        (self.energies[1] - self.energies[0]) / GHZ
    }

    /// `(E2 - E1)/2π` in GHz.
    pub fn f12_ghz(&self) -> f64 {
        (self.energies[2] - self.energies[1]) / GHZ
    }

    /// Anharmonicity `(E2 - 2·E1 + E0)/2π` in GHz.
    pub fn anharmonicity_ghz(&self) -> f64 {
        (self.energies[2] - 2.0 * self.energies[1] + self.energies[0]) / GHZ
    }
}

/// Energy gap below which two levels are treated as degenerate when applying
/// the parity tie-break.
const DEGENERACY_TIE_TOL: f64 = 1e-9;

/// Retained-gap threshold below which a warning is emitted.
const NARROW_GAP_WARN: f64 = 1e-6;

/// Diagonalize a charge-basis Hamiltonian and truncate to the lowest
/// `d_trunc` levels.
///
/// The ground energy is subtracted, the charge-number operator is rewritten
/// in the retained eigenbasis, and each level gets a parity label. Level
/// order is ascending energy with degenerate pairs ordered even before odd.
/// Eigenvector phases are fixed so that the dominant `n_op` matrix element
/// from each level to a lower level is real and non-negative, making the
/// drive matrix elements deterministic.
pub fn diagonalize_and_truncate(
    h_large: &ComplexMatrix,
    kind: TunnelingKind,
    d_trunc: usize,
) -> Result<QubitModel, DeviceError> {
    let dim = h_large.rows();
    assert!(dim % 2 == 1, "charge basis has odd dimension");
    let n_max = dim / 2;
    let eig = eig_hermitian(h_large)?;

    // Ascending order with the parity tie-break inside degenerate clusters.
    let parities: Vec<Parity> =
        (0..dim).map(|j| classify_parity(&eig.eigenvectors.column(j), PARITY_TOL)).collect();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap().then(a.cmp(&b))
    });
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len()
            && (eig.eigenvalues[order[j]] - eig.eigenvalues[order[i]]).abs() <= DEGENERACY_TIE_TOL
        {
            j += 1;
        }
        order[i..j].sort_by_key(|&k| parities[k].rank());
        i = j;
    }

    let e0 = eig.eigenvalues[order[0]];
    let energies: Vec<f64> = order[..d_trunc].iter().map(|&k| eig.eigenvalues[k] - e0).collect();
    for w in energies.windows(2) {
        if w[1] - w[0] < NARROW_GAP_WARN {
            eprintln!(
                "warning: retained levels nearly degenerate (gap {:.3e} rad/ns); level ordering may be fragile",
                w[1] - w[0]
            );
        }
    }

    let mut v = ComplexMatrix::from_fn(dim, d_trunc, |i, j| eig.eigenvectors[(i, order[j])]);

    // n̂ in the retained eigenbasis: V† diag(n) V.
    let n_values: Vec<f64> = (0..dim).map(|i| i as f64 - n_max as f64).collect();
    let mut n_op = ComplexMatrix::from_fn(d_trunc, d_trunc, |a, b| {
        (0..dim).map(|n| v[(n, a)].conj() * n_values[n] * v[(n, b)]).sum()
    });
    n_op.symmetrize_hermitian();

    // Ladder phase convention: walking up the levels, rotate each column so
    // its strongest n̂ matrix element to a lower level is real positive. For
    // the PPQ this pins the 1↔2 element; cross-parity elements vanish and are
    // never used as the reference.
    for m in 1..d_trunc {
        let (mut best_r, mut best_mag) = (0usize, 0.0f64);
        for r in 0..m {
            let mag = n_op[(r, m)].norm();
            if mag > best_mag {
                best_mag = mag;
                best_r = r;
            }
        }
        if best_mag > 1e-10 {
            let phase = n_op[(best_r, m)].conj() / best_mag;
            for i in 0..dim {
                let x = v[(i, m)] * phase;
                v[(i, m)] = x;
            }
            for r in 0..d_trunc {
                let x = n_op[(r, m)] * phase;
                n_op[(r, m)] = x;
                n_op[(m, r)] = x.conj();
            }
            n_op[(m, m)] = C64::new(n_op[(m, m)].re, 0.0);
        }
    }

    let parity: Vec<Parity> =
        (0..d_trunc).map(|j| classify_parity(&v.column(j), PARITY_TOL)).collect();

    Ok(QubitModel { kind, energies, n_op, parity, v })
}

/// Convenience: build and truncate a qubit in one call.
pub fn build_qubit(
    kind: TunnelingKind,
    e_c: f64,
    e_j: f64,
    n_g: f64,
    n_max: usize,
    d_trunc: usize,
) -> Result<QubitModel, DeviceError> {
    let h = build_charge_hamiltonian(kind, e_c, e_j, n_g, n_max);
    diagonalize_and_truncate(&h, kind, d_trunc)
}

/// Transmon `f01` in GHz at a given reduced flux, idle (`n_g = 0`).
pub fn transmon_f01_at_flux(spec: &DeviceSpec, phi_e: f64) -> Result<f64, DeviceError> {
    let e_j = squid_josephson_energy(spec.e_j_sigma_t, spec.gamma_squid, phi_e);
    let q = build_qubit(TunnelingKind::SinglePair, spec.e_c_t, e_j, 0.0, spec.n_max, 2)?;
    Ok(q.f01_ghz())
}

/// Tolerance on the calibrated qubit frequency, GHz.
pub const FLUX_CAL_TOL_GHZ: f64 = 1e-6;

/// Targets overshooting the sweet-spot maximum by at most this much clamp to
/// `φ_e = 0` instead of erroring. Reference frequencies are typically quoted
/// from the dressed (coupled) spectrum, which sits slightly above the bare
/// `f01`; the clamp keeps those usable as calibration targets.
pub const FLUX_CAL_CLAMP_GHZ: f64 = 1e-3;

/// Margin below π/2 bounding the calibration search window.
const FLUX_CAL_EPS: f64 = 1e-6;

/// Find the reduced flux `φ_e ∈ [0, π/2)` at which the transmon `f01` equals
/// `target_f01_ghz`, by bisection. `f01` decreases monotonically with flux on
/// this interval, which the search relies on.
pub fn calibrate_flux(spec: &DeviceSpec, target_f01_ghz: f64) -> Result<f64, DeviceError> {
    spec.validate()?;
    let (mut lo, mut hi) = (0.0f64, FRAC_PI_2 - FLUX_CAL_EPS);
    let f_lo = transmon_f01_at_flux(spec, lo)?; // highest reachable frequency
    let f_hi = transmon_f01_at_flux(spec, hi)?; // lowest reachable frequency
    if target_f01_ghz > f_lo + FLUX_CAL_TOL_GHZ {
        if target_f01_ghz - f_lo <= FLUX_CAL_CLAMP_GHZ {
            eprintln!(
                "warning: calibration target {target_f01_ghz} GHz is {:.3e} GHz above the sweet-spot f01 {f_lo:.6}; clamping to phi_e = 0",
                target_f01_ghz - f_lo
            );
            return Ok(0.0);
        }
        return Err(DeviceError::CalibrationRange {
            target_ghz: target_f01_ghz,
            lo_ghz: f_hi,
            hi_ghz: f_lo,
        });
    }
    if target_f01_ghz < f_hi - FLUX_CAL_TOL_GHZ {
        return Err(DeviceError::CalibrationRange {
            target_ghz: target_f01_ghz,
            lo_ghz: f_hi,
            hi_ghz: f_lo,
        });
    }
    let mut best = (lo, (f_lo - target_f01_ghz).abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = transmon_f01_at_flux(spec, mid)?;
        let residual = (f_mid - target_f01_ghz).abs();
        if residual < best.1 {
            best = (mid, residual);
        }
        if residual <= FLUX_CAL_TOL_GHZ {
            return Ok(mid);
        }
        if f_mid > target_f01_ghz {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    if best.1 <= FLUX_CAL_TOL_GHZ {
        Ok(best.0)
    } else {
        Err(DeviceError::CalibrationStalled { residual_ghz: best.1 })
    }
}

/// Resonator truncated to `d` Fock states.
#[derive(Debug, Clone)]
pub struct ResonatorModel {
    pub omega_r: f64,
    /// Annihilation operator: `√(k+1)` on the superdiagonal.
    pub annihilation: ComplexMatrix,
    /// Fock energies `k·ω_R`.
    pub energies: Vec<f64>,
}

impl ResonatorModel {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Quadrature `â + â†`.
    pub fn x_op(&self) -> ComplexMatrix {
        self.annihilation.add(&self.annihilation.dagger())
    }
}

pub fn build_resonator(omega_r: f64, d: usize) -> ResonatorModel {
    let mut a = ComplexMatrix::zeros(d, d);
    for k in 0..d.saturating_sub(1) {
        a[(k, k + 1)] = C64::new(((k + 1) as f64).sqrt(), 0.0);
    }
    let energies = (0..d).map(|k| k as f64 * omega_r).collect();
    ResonatorModel { omega_r, annihilation: a, energies }
}

/// The assembled resonator ⊗ transmon ⊗ PPQ system.
///
/// Composite index `16k + 4m_T + m_P` (for the standard `d_trunc = 4`). The
/// idle Hamiltonian is diagonal in this basis; everything the drives and the
/// coupling touch is collected here so the propagator never needs to go back
/// to the subsystem models.
#[derive(Debug, Clone)]
pub struct CompositeModel {
    pub dim: usize,
    /// Idle energies (diagonal of H₀), rad/ns.
    pub h0_diag: Vec<f64>,
    /// `I ⊗ n̂_T ⊗ I`.
    pub n_t: ComplexMatrix,
    /// `I ⊗ I ⊗ n̂_P`.
    pub n_p: ComplexMatrix,
    /// `(â+â†) ⊗ n̂_T ⊗ I`.
    pub x_r_nt: ComplexMatrix,
    /// `(â+â†) ⊗ I ⊗ n̂_P`.
    pub x_r_np: ComplexMatrix,
    /// Drive prefactor `-8·E_C,T` multiplying `n_g,T(t)·n̂_T`.
    pub drive_prefactor_t: f64,
    /// Drive prefactor `-8·E_C,P` multiplying `n_g,P(t)·n̂_P`.
    pub drive_prefactor_p: f64,
    /// Qubit-resonator coupling.
    pub g: f64,
    /// Composite indices of the computational basis `|0⟩|i⟩|j+1⟩` in the
    /// order (|00⟩, |01⟩, |10⟩, |11⟩).
    pub comp_idx: [usize; 4],
    /// Rotating-frame frequency of the transmon's computational pair
    /// (rad/ns): its dressed 0↔1 transition. Gate blocks are scored in the
    /// frame co-rotating at these frequencies, where idle computational
    /// states sit still.
    pub frame_omega_t: f64,
    /// Rotating-frame frequency of the PPQ's computational 1↔2 pair (rad/ns).
    pub frame_omega_p: f64,
    pub transmon: QubitModel,
    pub ppq: QubitModel,
    pub resonator: ResonatorModel,
}

pub fn assemble_composite(
    transmon: QubitModel,
    ppq: QubitModel,
    resonator: ResonatorModel,
    drive_prefactor_t: f64,
    drive_prefactor_p: f64,
    g: f64,
) -> Result<CompositeModel, DeviceError> {
    let d = transmon.dim();
    if ppq.dim() != d || resonator.dim() != d {
        return Err(DeviceError::Assembly(format!(
            "subsystem dimensions differ: transmon {}, ppq {}, resonator {}",
            d,
            ppq.dim(),
            resonator.dim()
        )));
    }
    if d < 3 {
        return Err(DeviceError::Assembly(format!(
            "need at least 3 levels per subsystem to host the computational basis, got {d}"
        )));
    }
    let dim = d * d * d;
    let mut h0_diag = vec![0.0; dim];
    for k in 0..d {
        for mt in 0..d {
            for mp in 0..d {
                h0_diag[d * d * k + d * mt + mp] =
                    resonator.energies[k] + transmon.energies[mt] + ppq.energies[mp];
            }
        }
    }
    let eye = ComplexMatrix::identity(d);
    let x_r = resonator.x_op();
    let n_t = eye.kron(&transmon.n_op).kron(&eye);
    let n_p = eye.kron(&eye).kron(&ppq.n_op);
    let x_r_nt = x_r.kron(&transmon.n_op).kron(&eye);
    let x_r_np = x_r.kron(&eye).kron(&ppq.n_op);
    // |0⟩|i⟩|j+1⟩ for (i,j) in (00, 01, 10, 11).
    let comp_idx = [1, 2, d + 1, d + 2];

    let mut model = CompositeModel {
        dim,
        h0_diag,
        n_t,
        n_p,
        x_r_nt,
        x_r_np,
        drive_prefactor_t,
        drive_prefactor_p,
        g,
        comp_idx,
        frame_omega_t: 0.0,
        frame_omega_p: 0.0,
        transmon,
        ppq,
        resonator,
    };
    match model.dressed_frequencies() {
        Ok(dressed) => {
            model.frame_omega_t = dressed.f01_t_ghz * GHZ;
            model.frame_omega_p = dressed.f12_p_ghz * GHZ;
        }
        Err(_) => {
            // Hybridization too strong to label dressed states; fall back to
            // the bare ladders.
            eprintln!("warning: dressed-state labeling failed; frame uses bare frequencies");
            model.frame_omega_t = model.transmon.energies[1] - model.transmon.energies[0];
            model.frame_omega_p = model.ppq.energies[2] - model.ppq.energies[1];
        }
    }
    Ok(model)
}

impl CompositeModel {
    /// Build the full composite model from circuit parameters, idling both
    /// qubits at `n_g = 0` and the transmon at the stored flux bias.
    pub fn from_spec(spec: &DeviceSpec) -> Result<Self, DeviceError> {
        spec.validate()?;
        let transmon = build_qubit(
            TunnelingKind::SinglePair,
            spec.e_c_t,
            spec.transmon_e_j(),
            0.0,
            spec.n_max,
            spec.d_trunc,
        )?;
        let ppq = build_qubit(
            TunnelingKind::PairOfPairs,
            spec.e_c_p,
            spec.e_j_p,
            0.0,
            spec.n_max,
            spec.d_trunc,
        )?;
        let resonator = build_resonator(spec.omega_r, spec.d_trunc);
        assemble_composite(transmon, ppq, resonator, -8.0 * spec.e_c_t, -8.0 * spec.e_c_p, spec.g)
    }

    /// Computational-basis state `|ij⟩ = |0⟩|i⟩|j+1⟩` as a composite vector.
    pub fn basis_state(&self, i: usize, j: usize) -> Vec<C64> {
        assert!(i < 2 && j < 2);
        let mut psi = vec![C64::new(0.0, 0.0); self.dim];
        psi[self.comp_idx[2 * i + j]] = C64::new(1.0, 0.0);
        psi
    }

    /// `|++⟩`: resonator in `|0⟩`, both qubits in the equal superposition of
    /// their computational pairs.
    pub fn plus_plus_state(&self) -> Vec<C64> {
        let mut psi = vec![C64::new(0.0, 0.0); self.dim];
        for idx in self.comp_idx {
            psi[idx] = C64::new(0.5, 0.0);
        }
        psi
    }

    /// The idle Hamiltonian including the coupling: `diag(H₀) + H_I`.
    pub fn idle_hamiltonian(&self) -> ComplexMatrix {
        let mut h = self.x_r_nt.add(&self.x_r_np).scale(C64::new(self.g, 0.0));
        for i in 0..self.dim {
            h[(i, i)] += self.h0_diag[i];
        }
        h
    }

    /// Qubit frequencies of the coupled system, read off the dressed idle
    /// spectrum (eigenstates matched to bare labels by largest overlap).
    ///
    /// These are the observable transition frequencies; the coupling shifts
    /// them a few hundred kHz off the bare subsystem ladders.
    pub fn dressed_frequencies(&self) -> Result<DressedFrequencies, DeviceError> {
        let eig = eig_hermitian(&self.idle_hamiltonian())?;
        let mut energy_of = vec![f64::NAN; self.dim];
        for j in 0..self.dim {
            let col = eig.eigenvectors.column(j);
            let (mut best, mut best_w) = (0usize, 0.0);
            for (i, a) in col.iter().enumerate() {
                let w = a.norm_sqr();
                if w > best_w {
                    best_w = w;
                    best = i;
                }
            }
            if energy_of[best].is_nan() {
                energy_of[best] = eig.eigenvalues[j];
            }
        }
        let d = self.resonator.dim();
        let level = |k: usize, mt: usize, mp: usize| energy_of[d * d * k + d * mt + mp];
        let e00 = level(0, 0, 1);
        let e01 = level(0, 0, 2);
        let e10 = level(0, 1, 1);
        let e11 = level(0, 1, 2);
        if [e00, e01, e10, e11].iter().any(|e| e.is_nan()) {
            return Err(DeviceError::Assembly(
                "dressed states too hybridized to match computational labels".into(),
            ));
        }
        Ok(DressedFrequencies {
            f01_t_ghz: (e10 - e00) / GHZ,
            f12_p_ghz: (e01 - e00) / GHZ,
            zz_mhz: (e11 - e10 - e01 + e00) / GHZ * 1e3,
        })
    }
}

/// Observable transition frequencies of the coupled system.
#[derive(Debug, Clone, Copy)]
pub struct DressedFrequencies {
    /// Transmon 0↔1 transition (PPQ in its computational ground level).
    pub f01_t_ghz: f64,
    /// PPQ 1↔2 transition (transmon in its ground level).
    pub f12_p_ghz: f64,
    /// ZZ interaction strength in MHz.
    pub zz_mhz: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn paper_spec() -> DeviceSpec {
        DeviceSpec::default()
    }

    #[test]
    fn squid_energy_limits() {
        let ej = 6.0 * GHZ;
        assert!((squid_josephson_energy(ej, 1.01, 0.0) - ej).abs() < TOL);
        assert!((squid_josephson_energy(ej, 1.01, std::f64::consts::PI) - ej).abs() < 1e-9);
        // At φ_e = π/2 only the asymmetry survives: d = 0.01/2.01.
        let d = 0.01 / 2.01;
        let at_half = squid_josephson_energy(ej, 1.01, FRAC_PI_2);
        assert!((at_half - ej * d).abs() < 1e-9 * ej);
    }

    #[test]
    fn charge_hamiltonian_small_single_pair() {
        let h = build_charge_hamiltonian(TunnelingKind::SinglePair, 1.0, 2.0, 0.0, 1);
        let expect = [[4.0, -1.0, 0.0], [-1.0, 0.0, -1.0], [0.0, -1.0, 4.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((h[(i, j)].re - expect[i][j]).abs() < TOL);
                assert_eq!(h[(i, j)].im, 0.0);
            }
        }
    }

    #[test]
    fn charge_hamiltonian_small_pair_of_pairs() {
        let h = build_charge_hamiltonian(TunnelingKind::PairOfPairs, 1.0, 2.0, 0.0, 1);
        let expect = [[4.0, 0.0, -1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 4.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((h[(i, j)].re - expect[i][j]).abs() < TOL);
            }
        }
    }

    #[test]
    fn ppq_ground_energy_converged_in_cutoff() {
        let spec = paper_spec();
        let e50 = {
            let h = build_charge_hamiltonian(TunnelingKind::PairOfPairs, spec.e_c_p, spec.e_j_p, 0.0, 50);
            eig_hermitian(&h).unwrap().eigenvalues[0]
        };
        let e80 = {
            let h = build_charge_hamiltonian(TunnelingKind::PairOfPairs, spec.e_c_p, spec.e_j_p, 0.0, 80);
            eig_hermitian(&h).unwrap().eigenvalues[0]
        };
        assert!((e50 - e80).abs() <= 1e-10 * e80.abs());
    }

    #[test]
    fn retained_spectra_converged_in_cutoff() {
        let spec = paper_spec();
        for (kind, e_c, e_j) in [
            (TunnelingKind::SinglePair, spec.e_c_t, spec.e_j_sigma_t),
            (TunnelingKind::PairOfPairs, spec.e_c_p, spec.e_j_p),
        ] {
            let q50 = build_qubit(kind, e_c, e_j, 0.0, 50, 4).unwrap();
            let q80 = build_qubit(kind, e_c, e_j, 0.0, 80, 4).unwrap();
            for (a, b) in q50.energies.iter().zip(&q80.energies) {
                assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn transmon_spectrum_reference_values() {
        let spec = paper_spec();
        let q = build_qubit(TunnelingKind::SinglePair, spec.e_c_t, spec.e_j_sigma_t, 0.0, 50, 4).unwrap();
        // Exact values frozen from the independent Sturm-bisection oracle at
        // n_max = 80; the perturbative series √(8·E_J·E_C) - E_C ≈ 2.898 is
        // only good to a couple percent at E_J/E_C = 30.
        let f01 = q.f01_ghz();
        assert!((f01 - 2.882738192).abs() < 1e-6, "f01 = {f01} GHz");
        let series = (8.0f64 * 6.0 * 0.2).sqrt() - 0.2;
        assert!((f01 - series).abs() < 0.02, "f01 = {f01} GHz vs series {series}");
        let anh = q.anharmonicity_ghz();
        assert!((anh + 0.247272).abs() < 1e-5, "anharmonicity = {anh} GHz");
        // Single-pair tunneling mixes parities already in the ground state.
        assert_eq!(q.parity, vec![Parity::Mixed; 4]);
    }

    #[test]
    fn ppq_levels_one_two_share_parity() {
        let spec = paper_spec();
        let q = build_qubit(TunnelingKind::PairOfPairs, spec.e_c_p, spec.e_j_p, 0.0, 50, 4).unwrap();
        assert_ne!(q.parity[1], Parity::Mixed);
        assert_eq!(q.parity[1], q.parity[2], "levels 1 and 2 must share parity");
        assert_ne!(q.parity[0], q.parity[1]);
        // Selection rule: n̂ has no matrix elements across parity sectors.
        for a in 0..4 {
            for b in 0..4 {
                if q.parity[a] != q.parity[b] {
                    assert!(q.n_op[(a, b)].norm() <= 1e-10);
                }
            }
        }
        // The addressable 1↔2 element is nonzero and (by convention) positive real.
        assert!(q.n_op[(1, 2)].re > 0.1);
        assert!(q.n_op[(1, 2)].im.abs() < 1e-12);
    }

    #[test]
    fn zero_tunneling_gives_charge_ladder() {
        let q = build_qubit(TunnelingKind::SinglePair, 1.0, 0.0, 0.0, 20, 4).unwrap();
        let expect = [0.0, 4.0, 4.0, 16.0];
        for (e, x) in q.energies.iter().zip(expect) {
            assert!((e - x).abs() < 1e-10, "{e} vs {x}");
        }
    }

    #[test]
    fn parity_classification_basics() {
        let n_max = 5;
        let dim = 2 * n_max + 1;
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[n_max] = C64::new(1.0, 0.0); // n = 0
        assert_eq!(classify_parity(&amps, PARITY_TOL), Parity::Even);
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[n_max + 1] = C64::new(0.5f64.sqrt(), 0.0); // n = +1
        amps[n_max - 1] = C64::new(0.5f64.sqrt(), 0.0); // n = -1
        assert_eq!(classify_parity(&amps, PARITY_TOL), Parity::Odd);
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[n_max] = C64::new(0.8, 0.0);
        amps[n_max + 1] = C64::new(0.6, 0.0);
        assert_eq!(classify_parity(&amps, PARITY_TOL), Parity::Mixed);
    }

    #[test]
    fn transmon_ground_state_is_parity_mixed() {
        let spec = paper_spec();
        let h = build_charge_hamiltonian(TunnelingKind::SinglePair, spec.e_c_t, spec.e_j_sigma_t, 0.0, 50);
        let eig = eig_hermitian(&h).unwrap();
        let ground = eig.eigenvectors.column(0);
        // Direct summation: both parity sectors carry real weight.
        let n_max = 50;
        let (mut even, mut odd) = (0.0, 0.0);
        for (i, a) in ground.iter().enumerate() {
            if (i + n_max) % 2 == 0 {
                even += a.norm_sqr();
            } else {
                odd += a.norm_sqr();
            }
        }
        assert!(even > 1e-3 && odd > 1e-3);
        assert_eq!(classify_parity(&ground, PARITY_TOL), Parity::Mixed);
    }

    #[test]
    fn pair_hamiltonian_block_diagonalizes_over_parity() {
        let spec = paper_spec();
        let n_max = 20;
        let h = build_charge_hamiltonian(TunnelingKind::PairOfPairs, spec.e_c_p, spec.e_j_p, 0.0, n_max);
        let dim = 2 * n_max + 1;
        // Reorder indices: all even-n first, then odd-n.
        let perm: Vec<usize> = (0..dim)
            .filter(|i| (i + n_max) % 2 == 0)
            .chain((0..dim).filter(|i| (i + n_max) % 2 == 1))
            .collect();
        let n_even = (0..dim).filter(|i| (i + n_max) % 2 == 0).count();
        let mut off_block: f64 = 0.0;
        for (pi, &i) in perm.iter().enumerate() {
            for (pj, &j) in perm.iter().enumerate() {
                if (pi < n_even) != (pj < n_even) {
                    off_block = off_block.max(h[(i, j)].norm());
                }
            }
        }
        assert!(off_block <= 1e-14);
    }

    #[test]
    fn f01_monotone_in_flux() {
        let spec = paper_spec();
        let mut prev = f64::INFINITY;
        for k in 0..=12 {
            let phi = (k as f64 * FRAC_PI_2 / 12.0).min(FRAC_PI_2 - 1e-9);
            let f = transmon_f01_at_flux(&spec, phi).unwrap();
            assert!(f <= prev + 1e-9, "f01 not non-increasing at phi={phi}");
            prev = f;
        }
    }

    #[test]
    fn calibrate_flux_boundary_and_errors() {
        let spec = paper_spec();
        let f0 = transmon_f01_at_flux(&spec, 0.0).unwrap();
        let phi = calibrate_flux(&spec, f0).unwrap();
        assert!(phi.abs() < 1e-3, "expected φ_e ≈ 0, got {phi}");
        assert!(matches!(calibrate_flux(&spec, 10.0), Err(DeviceError::CalibrationRange { .. })));
    }

    #[test]
    fn calibrate_flux_to_reference_frequency() {
        let spec = paper_spec();
        // 2.883 GHz is the dressed sweet-spot frequency: it sits 2.6e-4 GHz
        // above the bare maximum, so calibration clamps to φ_e = 0.
        let phi = calibrate_flux(&spec, 2.883).unwrap();
        assert_eq!(phi, 0.0);
        // A bare-reachable target bisects normally.
        let phi = calibrate_flux(&spec, 2.85).unwrap();
        let f = transmon_f01_at_flux(&spec, phi).unwrap();
        assert!((f - 2.85).abs() <= FLUX_CAL_TOL_GHZ);
        assert!(phi > 0.0 && phi < FRAC_PI_2);
    }

    #[test]
    fn dressed_frequencies_match_reference_spectrum() {
        let spec = paper_spec();
        let model = CompositeModel::from_spec(&spec).unwrap();
        let dressed = model.dressed_frequencies().unwrap();
        assert!((dressed.f01_t_ghz - 2.883).abs() <= 1e-4, "f01_T = {}", dressed.f01_t_ghz);
        assert!((dressed.f12_p_ghz - 2.847).abs() <= 1e-4, "f12_P = {}", dressed.f12_p_ghz);
        assert!(dressed.zz_mhz.abs() < 0.1, "zz = {} MHz", dressed.zz_mhz);
    }

    #[test]
    fn resonator_matrix_elements() {
        let r = build_resonator(2.4 * GHZ, 4);
        assert!((r.annihilation[(0, 1)].re - 1.0).abs() < TOL);
        assert!((r.annihilation[(1, 2)].re - 2f64.sqrt()).abs() < TOL);
        assert!((r.annihilation[(2, 3)].re - 3f64.sqrt()).abs() < TOL);
        assert_eq!(r.annihilation[(1, 0)].re, 0.0);
        // Number operator.
        let num = r.annihilation.dagger().mul(&r.annihilation);
        for k in 0..4 {
            assert!((num[(k, k)].re - k as f64).abs() < TOL);
        }
        // (â+â†) is Hermitian with a spectrum symmetric about zero.
        let x = r.x_op();
        let eig = eig_hermitian(&x).unwrap();
        for (lo, hi) in eig.eigenvalues.iter().zip(eig.eigenvalues.iter().rev()) {
            assert!((lo + hi).abs() < 1e-12);
        }
    }

    #[test]
    fn composite_idle_spectrum_is_sum_of_ladders() {
        let spec = paper_spec();
        let model = CompositeModel::from_spec(&spec).unwrap();
        assert_eq!(model.dim, 64);
        assert_eq!(model.comp_idx, [1, 2, 5, 6]);
        let et = &model.transmon.energies;
        let ep = &model.ppq.energies;
        // |0⟩|0⟩|1⟩ carries E_P[1]; |0⟩|1⟩|1⟩ carries E_T[1] + E_P[1].
        assert!((model.h0_diag[1] - ep[1]).abs() < 1e-12);
        assert!((model.h0_diag[5] - (et[1] + ep[1])).abs() < 1e-12);
        for k in 0..4 {
            for mt in 0..4 {
                for mp in 0..4 {
                    let idx = 16 * k + 4 * mt + mp;
                    let expect = model.resonator.energies[k] + et[mt] + ep[mp];
                    assert!((model.h0_diag[idx] - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn drive_and_coupling_operators_commute() {
        let spec = paper_spec();
        let model = CompositeModel::from_spec(&spec).unwrap();
        let ops = [&model.n_t, &model.n_p, &model.x_r_nt, &model.x_r_np];
        for a in ops {
            for b in ops {
                let comm = a.mul(b).sub(&b.mul(a));
                assert!(comm.max_abs() <= 1e-10, "commutator norm {}", comm.max_abs());
            }
        }
    }

    #[test]
    fn composite_requires_matching_dims() {
        let spec = paper_spec();
        let t = build_qubit(TunnelingKind::SinglePair, spec.e_c_t, spec.e_j_sigma_t, 0.0, 50, 4).unwrap();
        let p = build_qubit(TunnelingKind::PairOfPairs, spec.e_c_p, spec.e_j_p, 0.0, 50, 3).unwrap();
        let r = build_resonator(spec.omega_r, 4);
        assert!(matches!(
            assemble_composite(t, p, r, -1.0, -1.0, spec.g),
            Err(DeviceError::Assembly(_))
        ));
    }

    #[test]
    fn spec_validation_rejects_nonsense() {
        let mut spec = paper_spec();
        spec.e_c_t = -1.0;
        assert!(spec.validate().is_err());
        let mut spec = paper_spec();
        spec.n_max = 5;
        assert!(spec.validate().is_err());
        let mut spec = paper_spec();
        spec.d_trunc = 1;
        assert!(spec.validate().is_err());
    }

    /// Sturm-sequence bisection for real symmetric tridiagonal matrices: a
    /// second, independent eigenvalue routine used as the oracle for the
    /// Jacobi solver on the charge Hamiltonians.
    mod sturm {
        /// Number of eigenvalues of T strictly below x (LDLᵀ sign count).
        fn count_below(diag: &[f64], off: &[f64], x: f64) -> usize {
            let mut count = 0;
            let mut d = diag[0] - x;
            if d < 0.0 {
                count += 1;
            }
            for i in 1..diag.len() {
                let b = off[i - 1];
                let denom = if d.abs() < 1e-300 { 1e-300f64.copysign(d) } else { d };
                d = diag[i] - x - b * b / denom;
                if d < 0.0 {
                    count += 1;
                }
            }
            count
        }

        /// All eigenvalues, ascending, via bisection.
        pub fn eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
            let n = diag.len();
            // Gershgorin bounds.
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for i in 0..n {
                let r = if i > 0 { off[i - 1].abs() } else { 0.0 }
                    + if i < n - 1 { off[i].abs() } else { 0.0 };
                lo = lo.min(diag[i] - r);
                hi = hi.max(diag[i] + r);
            }
            let scale = hi.abs().max(lo.abs()).max(1.0);
            (0..n)
                .map(|k| {
                    let (mut a, mut b) = (lo, hi);
                    while b - a > 1e-14 * scale {
                        let mid = 0.5 * (a + b);
                        if count_below(diag, off, mid) <= k {
                            a = mid;
                        } else {
                            b = mid;
                        }
                    }
                    0.5 * (a + b)
                })
                .collect()
        }
    }

    #[test]
    fn jacobi_matches_sturm_oracle_on_charge_hamiltonians() {
        let spec = paper_spec();
        let n_max = 50;
        let scale = 4.0 * spec.e_c_p * (n_max as f64).powi(2);

        // Transmon: the charge Hamiltonian is directly tridiagonal.
        let h_t =
            build_charge_hamiltonian(TunnelingKind::SinglePair, spec.e_c_t, spec.e_j_sigma_t, 0.0, n_max);
        let dim = 2 * n_max + 1;
        let diag: Vec<f64> = (0..dim).map(|i| h_t[(i, i)].re).collect();
        let off: Vec<f64> = (0..dim - 1).map(|i| h_t[(i, i + 1)].re).collect();
        let oracle_t = sturm::eigenvalues(&diag, &off);
        let jacobi_t = eig_hermitian(&h_t).unwrap().eigenvalues;
        for (a, b) in jacobi_t.iter().zip(&oracle_t) {
            assert!((a - b).abs() <= 1e-8 * scale, "transmon: {a} vs {b}");
        }

        // PPQ: reordering by charge parity splits the pentadiagonal matrix
        // into two independent tridiagonal blocks.
        let h_p = build_charge_hamiltonian(TunnelingKind::PairOfPairs, spec.e_c_p, spec.e_j_p, 0.0, n_max);
        let mut oracle_p = Vec::new();
        for parity in 0..2usize {
            let idx: Vec<usize> = (0..dim).filter(|i| (i + n_max) % 2 == parity).collect();
            let diag: Vec<f64> = idx.iter().map(|&i| h_p[(i, i)].re).collect();
            let off: Vec<f64> = idx.windows(2).map(|w| h_p[(w[0], w[1])].re).collect();
            oracle_p.extend(sturm::eigenvalues(&diag, &off));
        }
        oracle_p.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let jacobi_p = eig_hermitian(&h_p).unwrap().eigenvalues;
        for (a, b) in jacobi_p.iter().zip(&oracle_p) {
            assert!((a - b).abs() <= 1e-8 * scale, "ppq: {a} vs {b}");
        }
    }
}
