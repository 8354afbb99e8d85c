//! Time evolution of the driven composite system.
//!
//! The total Hamiltonian splits into the diagonal idle part H₀ and the drive
//! part H₁(t) = pref_T·n_gT(t)·N_T + pref_P·n_gP(t)·N_P + G·(X_R·N_T + X_R·N_P).
//! One second-order Suzuki-Trotter step over τ is
//!
//! ```text
//! exp(-iτH₀/2) · exp(-iτH₁(t_mid)) · exp(-iτH₀/2),   t_mid = (2n+1)τ/2
//! ```
//!
//! The four H₁ terms commute pairwise (wherever two terms overlap they carry
//! the same subsystem operator), so they share one eigenbasis
//! `Q = W_X ⊗ W_T ⊗ W_P` built from the 4×4 eigendecompositions of (â+â†),
//! n̂_T and n̂_P. In that basis H₁(t) is diagonal for every t, and
//! exp(-iτH₁(t)) = Q·exp(-iτD(t))·Q† costs two basis changes instead of a
//! per-step 64×64 eigendecomposition. Chaining steps lets the half-step
//! phases merge, so the bulk of a propagation is one 64×64·64×k product per
//! step:
//!
//! ```text
//! U(N) = E·Q·[P_{N-1}·K·P_{N-2}·K···K·P_0]·Q†·E,    K = Q†·exp(-iτH₀)·Q
//! ```
//!
//! with E = exp(-iτH₀/2) and P_n diagonal. An exact-diagonalization
//! propagator with identical step midpoints serves as the reference to
//! isolate the splitting error.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::device::CompositeModel;
use crate::linalg::{eig_hermitian, expm_hermitian, ComplexMatrix, LinalgError};
use crate::pulses::{Channel, PulseSchedule};

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("time step must be positive, got {0}")]
    NonPositiveTau(f64),
    #[error("propagation window is empty: t0 = {t0}, t1 = {t1}")]
    EmptyWindow { t0: f64, t1: f64 },
    #[error("tau list must not be empty")]
    EmptyTauList,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A propagator over a time window, with its stepping metadata.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub u: ComplexMatrix,
    pub t_start: f64,
    pub t_end: f64,
    pub tau: f64,
    pub step_count: usize,
}

impl Propagator {
    /// `max |U†U - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        self.u.unitarity_defect()
    }
}

/// State samples taken during a propagation.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<Vec<C64>>,
    pub bloch_t: Vec<[f64; 3]>,
    pub bloch_p: Vec<[f64; 3]>,
    pub leakage: Vec<f64>,
}

impl TrajectoryRecord {
    fn push(&mut self, model: &CompositeModel, t: f64, state: &[C64]) {
        self.times.push(t);
        self.bloch_t.push(reduced_bloch(model, state, Channel::Transmon));
        self.bloch_p.push(reduced_bloch(model, state, Channel::Ppq));
        self.leakage.push(leakage_weight(model, state));
        self.states.push(state.to_vec());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Dense drive Hamiltonian H₁(t) (tests, diagnostics and the exact path).
pub fn drive_hamiltonian(model: &CompositeModel, schedule: &PulseSchedule, t: f64) -> ComplexMatrix {
    let a_t = model.drive_prefactor_t * schedule.offset_charge(Channel::Transmon, t);
    let a_p = model.drive_prefactor_p * schedule.offset_charge(Channel::Ppq, t);
    let dim = model.dim;
    ComplexMatrix::from_fn(dim, dim, |i, j| {
        a_t * model.n_t[(i, j)]
            + a_p * model.n_p[(i, j)]
            + model.g * (model.x_r_nt[(i, j)] + model.x_r_np[(i, j)])
    })
}

/// How many full steps of length `tau` fit in `[t0, t1]`, plus the shortened
/// tail step that absorbs the remainder (zero when the window divides
/// evenly). Durations like 9.9966 ns at τ = 1 ps stay exact this way.
fn step_plan(t0: f64, t1: f64, tau: f64) -> Result<(usize, f64), EvolveError> {
    if !(tau > 0.0) {
        return Err(EvolveError::NonPositiveTau(tau));
    }
    if !(t1 > t0) {
        return Err(EvolveError::EmptyWindow { t0, t1 });
    }
    let duration = t1 - t0;
    let n_full = ((duration / tau) + 1e-9).floor() as usize;
    let tail = duration - n_full as f64 * tau;
    let tail = if tail > 1e-9 * tau { tail } else { 0.0 };
    Ok((n_full, tail))
}

/// One Newton-Schulz sweep pushing a nearly-unitary matrix onto the unitary
/// manifold: Q ← Q·(3I - Q†Q)/2. Squares the orthonormality defect, which
/// keeps defect accumulation negligible over multi-million-step products.
fn polish_unitary(q: &mut ComplexMatrix) {
    let n = q.rows();
    for _ in 0..2 {
        let gram = q.dagger().mul(q);
        let mut corr = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let g = gram[(i, j)];
                corr[(i, j)] = if i == j { C64::new(1.5 - 0.5 * g.re, -0.5 * g.im) } else { -0.5 * g };
            }
        }
        *q = q.mul(&corr);
    }
}

/// Precomputed machinery for propagating one composite model.
pub struct TrotterEngine<'a> {
    pub model: &'a CompositeModel,
    /// Shared eigenbasis of the commuting H₁ terms.
    q: ComplexMatrix,
    q_dag: ComplexMatrix,
    /// Eigenvalues of I⊗n̂_T⊗I along the Q basis.
    d_t: Vec<f64>,
    /// Eigenvalues of I⊗I⊗n̂_P along the Q basis.
    d_p: Vec<f64>,
    /// Eigenvalues of (â+â†)⊗n̂_T⊗I + (â+â†)⊗I⊗n̂_P along the Q basis.
    d_coupling: Vec<f64>,
}

impl<'a> TrotterEngine<'a> {
    pub fn new(model: &'a CompositeModel) -> Result<Self, EvolveError> {
        let d = model.resonator.dim();
        let eig_x = eig_hermitian(&model.resonator.x_op())?;
        let eig_t = eig_hermitian(&model.transmon.n_op)?;
        let eig_p = eig_hermitian(&model.ppq.n_op)?;
        let mut q = eig_x.eigenvectors.kron(&eig_t.eigenvectors).kron(&eig_p.eigenvectors);
        polish_unitary(&mut q);
        let q_dag = q.dagger();
        let dim = model.dim;
        let mut d_t = vec![0.0; dim];
        let mut d_p = vec![0.0; dim];
        let mut d_coupling = vec![0.0; dim];
        for k in 0..d {
            for mt in 0..d {
                for mp in 0..d {
                    let i = d * d * k + d * mt + mp;
                    d_t[i] = eig_t.eigenvalues[mt];
                    d_p[i] = eig_p.eigenvalues[mp];
                    d_coupling[i] =
                        eig_x.eigenvalues[k] * (eig_t.eigenvalues[mt] + eig_p.eigenvalues[mp]);
                }
            }
        }
        Ok(Self { model, q, q_dag, d_t, d_p, d_coupling })
    }

    /// Diagonal of H₁(t) in the Q basis.
    fn h1_diag(&self, schedule: &PulseSchedule, t: f64, out: &mut [f64]) {
        let a_t = self.model.drive_prefactor_t * schedule.offset_charge(Channel::Transmon, t);
        let a_p = self.model.drive_prefactor_p * schedule.offset_charge(Channel::Ppq, t);
        let g = self.model.g;
        for i in 0..out.len() {
            out[i] = a_t * self.d_t[i] + a_p * self.d_p[i] + g * self.d_coupling[i];
        }
    }

    /// `exp(-iτ·H₁(t))` through the shared eigenbasis (the fast path,
    /// exposed for the equivalence checks).
    pub fn exp_h1(&self, schedule: &PulseSchedule, t: f64, tau: f64) -> ComplexMatrix {
        let dim = self.model.dim;
        let mut d = vec![0.0; dim];
        self.h1_diag(schedule, t, &mut d);
        let phases: Vec<C64> = d.iter().map(|&x| C64::from_polar(1.0, -tau * x)).collect();
        let mut left = self.q.clone();
        left.scale_cols(&phases);
        left.mul(&self.q_dag)
    }

    /// Half-step phases `exp(-iτ·H₀/2)`.
    fn h0_half_phases(&self, tau: f64) -> Vec<C64> {
        self.model
            .h0_diag
            .iter()
            .map(|&e| C64::from_polar(1.0, -0.5 * tau * e))
            .collect()
    }

    /// One Trotter step applied to an accumulated operator (or column block):
    /// `U ← exp(-iτH₀/2)·exp(-iτH₁(t_mid))·exp(-iτH₀/2)·U`.
    pub fn trotter_step(
        &self,
        u_acc: &ComplexMatrix,
        schedule: &PulseSchedule,
        t_mid: f64,
        tau: f64,
    ) -> ComplexMatrix {
        let e_half = self.h0_half_phases(tau);
        let mut u = u_acc.clone();
        u.scale_rows(&e_half);
        let mut w = self.q_dag.mul(&u);
        let dim = self.model.dim;
        let mut d = vec![0.0; dim];
        self.h1_diag(schedule, t_mid, &mut d);
        let phases: Vec<C64> = d.iter().map(|&x| C64::from_polar(1.0, -tau * x)).collect();
        w.scale_rows(&phases);
        let mut out = self.q.mul(&w);
        out.scale_rows(&e_half);
        out
    }

    /// Propagate the columns `y0` (given in the lab basis) over `[t0, t1]`:
    /// returns `U(t1, t0) · y0`. This is the hot loop; column blocks are
    /// independent, so wide blocks are split across threads.
    fn run_columns(
        &self,
        schedule: &PulseSchedule,
        t0: f64,
        t1: f64,
        tau: f64,
        y0: &ComplexMatrix,
        mut recorder: Option<(&mut TrajectoryRecord, usize)>,
    ) -> Result<(ComplexMatrix, usize), EvolveError> {
        let (n_full, tail) = step_plan(t0, t1, tau)?;
        let dim = self.model.dim;
        let cols = y0.cols();

        let e_half = self.h0_half_phases(tau);
        let e_full: Vec<C64> = e_half.iter().map(|p| p * p).collect();
        // K = Q†·exp(-iτH₀)·Q.
        let mut k_mat = self.q_dag.clone();
        k_mat.scale_cols(&e_full);
        let k_mat = k_mat.mul(&self.q);

        if let Some((rec, _)) = recorder.as_mut() {
            let psi0 = y0.column(0);
            rec.push(self.model, t0, &psi0);
        }

        let bulk = if n_full == 0 {
            y0.clone()
        } else {
            // w = Q†·(E ∘ y0)
            let mut scaled = y0.clone();
            scaled.scale_rows(&e_half);
            let seed = self.q_dag.mul(&scaled);

            let run_chunk = |mut w: ComplexMatrix,
                             mut on_sample: Option<&mut dyn FnMut(usize, &ComplexMatrix)>|
             -> ComplexMatrix {
                let mut tmp = ComplexMatrix::zeros(dim, w.cols());
                let mut d = vec![0.0; dim];
                let mut phases = vec![C64::new(0.0, 0.0); dim];
                for n in 0..n_full {
                    if n > 0 {
                        k_mat.mul_into(&w, &mut tmp);
                        std::mem::swap(&mut w, &mut tmp);
                    }
                    let t_mid = t0 + (n as f64 + 0.5) * tau;
                    self.h1_diag(schedule, t_mid, &mut d);
                    for i in 0..dim {
                        phases[i] = C64::from_polar(1.0, -tau * d[i]);
                    }
                    w.scale_rows(&phases);
                    if let Some(cb) = on_sample.as_mut() {
                        cb(n + 1, &w);
                    }
                }
                w
            };

            if let Some((rec, stride)) = recorder.as_mut() {
                // Recording runs on a single column; samples are mapped back
                // to the lab basis as E ∘ (Q·w).
                let stride = (*stride).max(1);
                let model = self.model;
                let mut sample = |n: usize, w: &ComplexMatrix| {
                    if n % stride == 0 && n < n_full {
                        let psi_interior = self.q.mul(w);
                        let mut psi: Vec<C64> = psi_interior.column(0);
                        for (p, e) in psi.iter_mut().zip(&e_half) {
                            *p *= e;
                        }
                        rec.push(model, t0 + n as f64 * tau, &psi);
                    }
                };
                let w = run_chunk(seed, Some(&mut sample));
                let mut out = self.q.mul(&w);
                out.scale_rows(&e_half);
                out
            } else if cols >= 16 {
                // Split columns across threads; each chunk is an independent
                // arithmetic stream, so the partition does not change results.
                let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
                let threads = threads.min(cols / 8).max(1);
                if threads > 1 {
                    let chunk = cols.div_ceil(threads);
                    let blocks: Vec<ComplexMatrix> = std::thread::scope(|scope| {
                        let mut handles = Vec::new();
                        for c0 in (0..cols).step_by(chunk) {
                            let c1 = (c0 + chunk).min(cols);
                            let sub = ComplexMatrix::from_fn(dim, c1 - c0, |i, j| seed[(i, c0 + j)]);
                            let run = &run_chunk;
                            handles.push(scope.spawn(move || run(sub, None)));
                        }
                        handles.into_iter().map(|h| h.join().expect("propagation worker panicked")).collect()
                    });
                    let mut w = ComplexMatrix::zeros(dim, cols);
                    let mut c = 0;
                    for b in blocks {
                        for j in 0..b.cols() {
                            for i in 0..dim {
                                w[(i, c + j)] = b[(i, j)];
                            }
                        }
                        c += b.cols();
                    }
                    let mut out = self.q.mul(&w);
                    out.scale_rows(&e_half);
                    out
                } else {
                    let w = run_chunk(seed, None);
                    let mut out = self.q.mul(&w);
                    out.scale_rows(&e_half);
                    out
                }
            } else {
                let w = run_chunk(seed, None);
                let mut out = self.q.mul(&w);
                out.scale_rows(&e_half);
                out
            }
        };

        // Shortened final step for the remainder.
        let result = if tail > 0.0 {
            let t_mid = t0 + n_full as f64 * tau + 0.5 * tail;
            self.trotter_step(&bulk, schedule, t_mid, tail)
        } else {
            bulk
        };

        if let Some((rec, _)) = recorder {
            rec.push(self.model, t1, &result.column(0));
        }

        Ok((result, n_full + usize::from(tail > 0.0)))
    }

    /// Full propagator over `[t0, t1]` by second-order Suzuki-Trotter steps.
    pub fn propagate(
        &self,
        schedule: &PulseSchedule,
        t0: f64,
        t1: f64,
        tau: f64,
    ) -> Result<Propagator, EvolveError> {
        let eye = ComplexMatrix::identity(self.model.dim);
        let (u, step_count) = self.run_columns(schedule, t0, t1, tau, &eye, None)?;
        Ok(Propagator { u, t_start: t0, t_end: t1, tau, step_count })
    }

    /// Selected propagator columns: `U(t1, t0)·e_c` for each index in `cols`.
    /// The gate objective only needs the four computational columns, which
    /// makes optimizer evaluations ~16× cheaper than the full matrix.
    pub fn propagate_columns(
        &self,
        schedule: &PulseSchedule,
        t0: f64,
        t1: f64,
        tau: f64,
        cols: &[usize],
    ) -> Result<ComplexMatrix, EvolveError> {
        let dim = self.model.dim;
        let mut y0 = ComplexMatrix::zeros(dim, cols.len());
        for (j, &c) in cols.iter().enumerate() {
            y0[(c, j)] = C64::new(1.0, 0.0);
        }
        Ok(self.run_columns(schedule, t0, t1, tau, &y0, None)?.0)
    }

    /// Propagate a state and record samples every `stride` steps (plus the
    /// initial and final states).
    pub fn propagate_state_recorded(
        &self,
        schedule: &PulseSchedule,
        t0: f64,
        t1: f64,
        tau: f64,
        psi0: &[C64],
        stride: usize,
    ) -> Result<(Vec<C64>, TrajectoryRecord), EvolveError> {
        let dim = self.model.dim;
        assert_eq!(psi0.len(), dim);
        let y0 = ComplexMatrix::from_fn(dim, 1, |i, _| psi0[i]);
        let mut record = TrajectoryRecord::default();
        let (out, _) = self.run_columns(schedule, t0, t1, tau, &y0, Some((&mut record, stride)))?;
        Ok((out.column(0), record))
    }

    /// Propagate a state without recording.
    pub fn propagate_state(
        &self,
        schedule: &PulseSchedule,
        t0: f64,
        t1: f64,
        tau: f64,
        psi0: &[C64],
    ) -> Result<Vec<C64>, EvolveError> {
        let dim = self.model.dim;
        assert_eq!(psi0.len(), dim);
        let y0 = ComplexMatrix::from_fn(dim, 1, |i, _| psi0[i]);
        Ok(self.run_columns(schedule, t0, t1, tau, &y0, None)?.0.column(0))
    }

    /// Reference propagator: every step exponentiates the full
    /// `H₀ + H₁(t_mid)` by exact diagonalization, over exactly the same step
    /// midpoints as [`Self::propagate`], so differences isolate the Trotter
    /// splitting error.
    pub fn propagate_exact(
        &self,
        schedule: &PulseSchedule,
        t0: f64,
        t1: f64,
        tau: f64,
    ) -> Result<Propagator, EvolveError> {
        let eye = ComplexMatrix::identity(self.model.dim);
        let (u, step_count) = self.run_exact(schedule, t0, t1, tau, eye)?;
        Ok(Propagator { u, t_start: t0, t_end: t1, tau, step_count })
    }

    /// Exact-diagonalization propagation of a single state.
    pub fn propagate_exact_state(
        &self,
        schedule: &PulseSchedule,
        t0: f64,
        t1: f64,
        tau: f64,
        psi0: &[C64],
    ) -> Result<Vec<C64>, EvolveError> {
        let dim = self.model.dim;
        let y0 = ComplexMatrix::from_fn(dim, 1, |i, _| psi0[i]);
        Ok(self.run_exact(schedule, t0, t1, tau, y0)?.0.column(0))
    }

    fn run_exact(
        &self,
        schedule: &PulseSchedule,
        t0: f64,
        t1: f64,
        tau: f64,
        y0: ComplexMatrix,
    ) -> Result<(ComplexMatrix, usize), EvolveError> {
        let (n_full, tail) = step_plan(t0, t1, tau)?;
        let dim = self.model.dim;
        let mut acc = y0;
        let mut tmp = ComplexMatrix::zeros(dim, acc.cols());
        let apply = |acc: &mut ComplexMatrix, tmp: &mut ComplexMatrix, t_mid: f64, dt: f64| -> Result<(), EvolveError> {
            let mut h = drive_hamiltonian(self.model, schedule, t_mid);
            for i in 0..dim {
                h[(i, i)] += self.model.h0_diag[i];
            }
            let u = expm_hermitian(&h, -dt)?;
            u.mul_into(acc, tmp);
            std::mem::swap(acc, tmp);
            Ok(())
        };
        for n in 0..n_full {
            apply(&mut acc, &mut tmp, t0 + (n as f64 + 0.5) * tau, tau)?;
        }
        if tail > 0.0 {
            apply(&mut acc, &mut tmp, t0 + n_full as f64 * tau + 0.5 * tail, tail)?;
        }
        Ok((acc, n_full + usize::from(tail > 0.0)))
    }

    /// State error `1 - |⟨ψ_ED|ψ_ST⟩|` between the Suzuki-Trotter and the
    /// exact-diagonalization propagations of `|++⟩` under free evolution
    /// (drives off, coupling on), for each τ in the list.
    ///
    /// With the drives silent the Hamiltonian is constant over the window, so
    /// the exact reference comes from a single diagonalization of H₀ + H_I.
    /// A per-step exact reference would agree mathematically but accumulates
    /// its own roundoff over ~10⁴ diagonalizations, putting a ~1e-12 noise
    /// floor on the error right where the small-τ splitting signal lives.
    pub fn trotter_error_scan(
        &self,
        taus: &[f64],
        duration: f64,
    ) -> Result<Vec<(f64, f64)>, EvolveError> {
        if taus.is_empty() {
            return Err(EvolveError::EmptyTauList);
        }
        let schedule = PulseSchedule::free_evolution(duration);
        let psi0 = self.model.plus_plus_state();
        let ed = self.free_evolution_exact_state(duration, &psi0)?;
        let mut out = Vec::with_capacity(taus.len());
        for &tau in taus {
            let st = self.propagate_state(&schedule, 0.0, duration, tau, &psi0)?;
            let overlap: C64 = ed.iter().zip(&st).map(|(a, b)| a.conj() * b).sum();
            out.push((tau, 1.0 - overlap.norm()));
        }
        Ok(out)
    }

    /// `exp(-i·T·(H₀ + H_I))·ψ0` from one eigendecomposition of the constant
    /// idle-plus-coupling Hamiltonian.
    pub fn free_evolution_exact_state(
        &self,
        duration: f64,
        psi0: &[C64],
    ) -> Result<Vec<C64>, EvolveError> {
        let u = expm_hermitian(&self.model.idle_hamiltonian(), -duration)?;
        Ok(u.matvec(psi0))
    }
}

/// Reduced single-qubit Bloch vector of a composite state.
///
/// Traces out the two other subsystems, then reads the computational 2×2
/// block of the reduced density matrix — {0,1} for the transmon, {1,2} for
/// the PPQ — without renormalizing, so leakage shows up as |r| < 1.
pub fn reduced_bloch(model: &CompositeModel, state: &[C64], which: Channel) -> [f64; 3] {
    let d = model.resonator.dim();
    let (la, lb) = match which {
        Channel::Transmon => (0usize, 1usize),
        Channel::Ppq => (1usize, 2usize),
    };
    let mut rho_aa = 0.0;
    let mut rho_bb = 0.0;
    let mut rho_ab = C64::new(0.0, 0.0); // ⟨a|ρ|b⟩
    match which {
        Channel::Transmon => {
            for k in 0..d {
                for mp in 0..d {
                    let ia = d * d * k + d * la + mp;
                    let ib = d * d * k + d * lb + mp;
                    rho_aa += state[ia].norm_sqr();
                    rho_bb += state[ib].norm_sqr();
                    rho_ab += state[ia] * state[ib].conj();
                }
            }
        }
        Channel::Ppq => {
            for k in 0..d {
                for mt in 0..d {
                    let ia = d * d * k + d * mt + la;
                    let ib = d * d * k + d * mt + lb;
                    rho_aa += state[ia].norm_sqr();
                    rho_bb += state[ib].norm_sqr();
                    rho_ab += state[ia] * state[ib].conj();
                }
            }
        }
    }
    // (2·Re ρ01, 2·Im ρ10, ρ00 - ρ11); ρ10 = conj(ρ01).
    [2.0 * rho_ab.re, -2.0 * rho_ab.im, rho_aa - rho_bb]
}

/// Population outside the computational subspace.
pub fn leakage_weight(model: &CompositeModel, state: &[C64]) -> f64 {
    let inside: f64 = model.comp_idx.iter().map(|&i| state[i].norm_sqr()).sum();
    (1.0 - inside).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::DeviceSpec;
    use crate::pulses::{AuxParams, CrParams, Tone, VirtualZ};
    use crate::rng::SplitMix64;

    fn model() -> CompositeModel {
        CompositeModel::from_spec(&DeviceSpec::default()).unwrap()
    }

    fn table_cnot() -> PulseSchedule {
        PulseSchedule::cnot(
            CrParams { f1_ghz: 2.8470, t_s: 1460.0, rho: 0.09986, omega_s: 0.03, gamma1: -1.068e-6 },
            AuxParams {
                f2_ghz: 2.8472,
                t_g: 9.9966,
                sigma: 9.9966 / 4.0,
                omega_g: 0.02078,
                gamma2: 2.4186,
                beta: 0.0,
            },
            VirtualZ { theta_t: 0.6007, theta_p: -0.0333 },
        )
    }

    fn state_error(a: &[C64], b: &[C64]) -> f64 {
        let overlap: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
        1.0 - overlap.norm()
    }

    #[test]
    fn drive_hamiltonian_zero_and_coupling_only() {
        let m = model();
        let silent = PulseSchedule::free_evolution(10.0);
        let h = drive_hamiltonian(&m, &silent, 3.0);
        // Zero drives leave exactly H_I = G·(X_R·N_T + X_R·N_P).
        let hi = m.x_r_nt.add(&m.x_r_np).scale(C64::new(m.g, 0.0));
        assert!(h.max_abs_diff(&hi) < 1e-15);
        assert!(h.is_hermitian(1e-12));
        // And a model with G = 0 under zero drives has H₁ = 0.
        let mut spec = DeviceSpec::default();
        spec.g = 1e-300;
        let m0 = CompositeModel::from_spec(&spec).unwrap();
        let h0 = drive_hamiltonian(&m0, &silent, 3.0);
        assert!(h0.max_abs() < 1e-200);
    }

    #[test]
    fn drive_hamiltonian_matches_independent_kron_assembly() {
        let m = model();
        let sched = table_cnot();
        for &t in &[700.0, 1463.0] {
            let h = drive_hamiltonian(&m, &sched, t);
            assert!(h.is_hermitian(1e-12));
            // Rebuild from subsystem matrices in place.
            let eye = ComplexMatrix::identity(4);
            let x = m.resonator.x_op();
            let a_t = m.drive_prefactor_t * sched.offset_charge(Channel::Transmon, t);
            let a_p = m.drive_prefactor_p * sched.offset_charge(Channel::Ppq, t);
            let term_t = eye.kron(&m.transmon.n_op).kron(&eye).scale(C64::new(a_t, 0.0));
            let term_p = eye.kron(&eye).kron(&m.ppq.n_op).scale(C64::new(a_p, 0.0));
            let term_i = x
                .kron(&m.transmon.n_op)
                .kron(&eye)
                .add(&x.kron(&eye).kron(&m.ppq.n_op))
                .scale(C64::new(m.g, 0.0));
            let oracle = term_t.add(&term_p).add(&term_i);
            assert!(h.max_abs_diff(&oracle) < 1e-12);
        }
    }

    #[test]
    fn fast_path_equals_generic_expm() {
        let m = model();
        let engine = TrotterEngine::new(&m).unwrap();
        let sched = table_cnot();
        let tau = 1e-3;
        let mut rng = SplitMix64::new(2024);
        for _ in 0..100 {
            let t = rng.next_f64() * 1469.9966;
            let fast = engine.exp_h1(&sched, t, tau);
            let h1 = drive_hamiltonian(&m, &sched, t);
            let generic = expm_hermitian(&h1, -tau).unwrap();
            let diff = fast.max_abs_diff(&generic);
            assert!(diff <= 1e-10, "t = {t}: fast path differs by {diff:e}");
        }
    }

    #[test]
    fn free_evolution_of_eigenstate_is_pure_phase() {
        let m = model();
        let engine = TrotterEngine::new(&m).unwrap();
        // With drives off and T-couplings ignored... the composite ground
        // state |0,0,0⟩ only acquires phase through H_I's diagonal (zero), so
        // compare against the exact propagator instead of guessing.
        let sched = PulseSchedule::free_evolution(10.0);
        let psi0 = m.basis_state(0, 0);
        let st = engine.propagate_state(&sched, 0.0, 10.0, 1e-3, &psi0).unwrap();
        let ed = engine.propagate_exact_state(&sched, 0.0, 10.0, 1e-3, &psi0).unwrap();
        assert!(state_error(&ed, &st) < 1e-8);
        let norm: f64 = st.iter().map(|a| a.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-10);
    }

    #[test]
    fn zero_coupling_free_evolution_is_exact_diagonal_phases() {
        let mut spec = DeviceSpec::default();
        spec.g = 1e-300;
        let m = CompositeModel::from_spec(&spec).unwrap();
        let engine = TrotterEngine::new(&m).unwrap();
        let sched = PulseSchedule::free_evolution(10.0);
        let prop = engine.propagate(&sched, 0.0, 10.0, 1e-2).unwrap();
        for i in 0..m.dim {
            for j in 0..m.dim {
                let expect = if i == j {
                    C64::from_polar(1.0, -10.0 * m.h0_diag[i])
                } else {
                    C64::new(0.0, 0.0)
                };
                assert!((prop.u[(i, j)] - expect).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn splitting_exact_when_terms_commute() {
        // With zero drives and G = 0 there is no H₁ at all; ST and ED must
        // agree to machine precision per step.
        let mut spec = DeviceSpec::default();
        spec.g = 1e-300;
        let m = CompositeModel::from_spec(&spec).unwrap();
        let engine = TrotterEngine::new(&m).unwrap();
        let sched = PulseSchedule::free_evolution(1.0);
        let psi0 = m.plus_plus_state();
        let st = engine.propagate_state(&sched, 0.0, 1.0, 1e-2, &psi0).unwrap();
        let ed = engine.propagate_exact_state(&sched, 0.0, 1.0, 1e-2, &psi0).unwrap();
        assert!(state_error(&ed, &st) < 1e-12);
    }

    #[test]
    fn single_step_error_scales_as_tau_cubed() {
        let m = model();
        let engine = TrotterEngine::new(&m).unwrap();
        let sched = table_cnot();
        // One ST step vs exact exponentiation of the same midpoint
        // Hamiltonian, at τ and τ/2: third-order local error drops ~8×.
        let t_start = 700.0;
        let eye = ComplexMatrix::identity(m.dim);
        let mut errs = Vec::new();
        for &tau in &[2e-2, 1e-2] {
            let stepped = engine.trotter_step(&eye, &sched, t_start + 0.5 * tau, tau);
            let mut h = drive_hamiltonian(&m, &sched, t_start + 0.5 * tau);
            for i in 0..m.dim {
                h[(i, i)] += m.h0_diag[i];
            }
            let exact = expm_hermitian(&h, -tau).unwrap();
            errs.push(stepped.max_abs_diff(&exact));
        }
        let ratio = errs[0] / errs[1];
        assert!(
            (5.0..12.0).contains(&ratio),
            "halving tau should cut the local error ~8x, got {ratio} ({errs:?})"
        );
    }

    #[test]
    fn trotter_error_ordering_in_tau() {
        let m = model();
        let engine = TrotterEngine::new(&m).unwrap();
        let scan = engine.trotter_error_scan(&[1e-1, 1e-2, 1e-3], 5.0).unwrap();
        assert!(scan[0].1 > scan[1].1, "{scan:?}");
        assert!(scan[1].1 > scan[2].1, "{scan:?}");
        // Identical inputs give error 0.
        let psi = m.plus_plus_state();
        assert!(state_error(&psi, &psi).abs() < 1e-15);
    }

    #[test]
    fn second_order_global_convergence_slope() {
        let m = model();
        let engine = TrotterEngine::new(&m).unwrap();
        let scan = engine.trotter_error_scan(&[3e-3, 1e-2, 3e-2], 5.0).unwrap();
        // The overlap error 1 - |⟨ED|ST⟩| is quadratic in the state
        // deviation (norm conservation cancels the linear term), so the
        // τ²-converging quantity is the phase-minimized state distance
        // √(2E). Its log-log slope is the splitting order.
        let (lx, ly): (Vec<f64>, Vec<f64>) = scan
            .iter()
            .map(|(t, e)| (t.ln(), (2.0 * e.max(0.0)).sqrt().ln()))
            .unzip();
        let slope = (ly.last().unwrap() - ly[0]) / (lx.last().unwrap() - lx[0]);
        assert!((slope - 2.0).abs() <= 0.2, "log-log slope {slope} ({scan:?})");
    }

    #[test]
    fn shortened_tail_step_keeps_durations_exact() {
        let m = model();
        let engine = TrotterEngine::new(&m).unwrap();
        let sched = PulseSchedule::free_evolution(10.0);
        let psi0 = m.plus_plus_state();
        // 9.9966 ns at τ = 1 ps: 9996 full steps + 0.6 ps tail.
        let (n_full, tail) = step_plan(0.0, 9.9966, 1e-3).unwrap();
        assert_eq!(n_full, 9996);
        assert!((tail - 6e-4).abs() < 1e-12);
        // Propagating [0, T] in one go equals [0, a] then [a, T].
        let full = engine.propagate_state(&sched, 0.0, 9.9966, 1e-3, &psi0).unwrap();
        let part = engine.propagate_state(&sched, 0.0, 5.0, 1e-3, &psi0).unwrap();
        let part = engine.propagate_state(&sched, 5.0, 9.9966, 1e-3, &part).unwrap();
        assert!(state_error(&full, &part) < 1e-9);
    }

    #[test]
    fn norm_preserved_over_many_steps() {
        let m = model();
        let engine = TrotterEngine::new(&m).unwrap();
        let sched = table_cnot();
        let psi0 = m.basis_state(1, 0);
        // 10^6 steps: 100 ns of the CR stage at τ = 0.1 ps.
        let out = engine.propagate_state(&sched, 0.0, 100.0, 1e-4, &psi0).unwrap();
        let norm: f64 = out.iter().map(|a| a.norm_sqr()).sum();
        assert!((norm - 1.0).abs() <= 1e-8, "norm drift {}", (norm - 1.0).abs());
    }

    #[test]
    fn propagator_unitary_over_cnot_prefix() {
        let m = model();
        let engine = TrotterEngine::new(&m).unwrap();
        let sched = table_cnot();
        let prop = engine.propagate(&sched, 0.0, 50.0, 1e-3).unwrap();
        assert_eq!(prop.step_count, 50_000);
        assert!(prop.unitarity_defect() <= 1e-8);
    }

    #[test]
    fn column_propagation_matches_full_propagator() {
        let m = model();
        let engine = TrotterEngine::new(&m).unwrap();
        let sched = table_cnot();
        let prop = engine.propagate(&sched, 0.0, 3.0, 1e-2).unwrap();
        let cols = engine.propagate_columns(&sched, 0.0, 3.0, 1e-2, &m.comp_idx).unwrap();
        for (j, &c) in m.comp_idx.iter().enumerate() {
            for i in 0..m.dim {
                assert!((prop.u[(i, c)] - cols[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn time_reversal_returns_identity() {
        // Propagate a plateau segment of the CR stage forward, then under
        // the time-reversed, sign-flipped Hamiltonian: U_rev·U_fwd = 1.
        // Sign-flipping all of H means negating the idle energies, the drive
        // prefactors and the coupling; time reversal mirrors the carrier,
        // cos(ω(t0+t1-t) - γ) = cos(ωt - γ') with γ' = ω(t0+t1) - γ ( the
        // envelope is constant on the plateau, so it mirrors to itself).
        let m = model();
        let engine = TrotterEngine::new(&m).unwrap();
        let sched = table_cnot();
        // Fully inside the plateau (the rise ends at ϱ·T_S ≈ 145.8 ns).
        let t0 = 200.0;
        let t1 = 210.0;
        let tau = 1e-3;
        let forward = engine.propagate(&sched, t0, t1, tau).unwrap();

        let mut neg = m.clone();
        for e in neg.h0_diag.iter_mut() {
            *e = -*e;
        }
        neg.drive_prefactor_t = -neg.drive_prefactor_t;
        neg.drive_prefactor_p = -neg.drive_prefactor_p;
        neg.g = -neg.g;
        let neg_engine = TrotterEngine::new(&neg).unwrap();
        let mut mirrored = sched.clone();
        if let Tone::FlatTop { f_ghz, gamma, .. } = &mut mirrored.transmon[0] {
            *gamma = std::f64::consts::TAU * *f_ghz * (t0 + t1) - *gamma;
        } else {
            panic!("expected the CR tone");
        }
        let back = neg_engine.propagate(&mirrored, t0, t1, tau).unwrap();

        let round = back.u.mul(&forward.u);
        let defect = round.max_abs_diff(&ComplexMatrix::identity(m.dim));
        assert!(defect <= 1e-6, "time-reversal defect {defect:e}");
    }

    #[test]
    fn bloch_vectors_of_basis_and_superposition_states() {
        let m = model();
        // |0⟩|0⟩|1⟩ = computational |00⟩.
        let psi = m.basis_state(0, 0);
        let bt = reduced_bloch(&m, &psi, Channel::Transmon);
        let bp = reduced_bloch(&m, &psi, Channel::Ppq);
        assert!((bt[2] - 1.0).abs() < 1e-12 && bt[0].abs() < 1e-12 && bt[1].abs() < 1e-12);
        assert!((bp[2] - 1.0).abs() < 1e-12);
        assert!((leakage_weight(&m, &psi)).abs() < 1e-12);
        // Transmon on the equator.
        let mut psi = vec![C64::new(0.0, 0.0); m.dim];
        psi[m.comp_idx[0]] = C64::new(0.5f64.sqrt(), 0.0);
        psi[m.comp_idx[2]] = C64::new(0.5f64.sqrt(), 0.0);
        let bt = reduced_bloch(&m, &psi, Channel::Transmon);
        assert!((bt[0].abs() - 1.0).abs() < 1e-12, "equator x, got {bt:?}");
        assert!(bt[2].abs() < 1e-12);
    }

    #[test]
    fn bloch_matches_brute_force_partial_trace() {
        let m = model();
        let engine = TrotterEngine::new(&m).unwrap();
        let sched = table_cnot();
        let psi0 = m.basis_state(1, 0);
        let psi = engine.propagate_state(&sched, 0.0, 40.0, 1e-2, &psi0).unwrap();
        // Brute-force reduced density matrices from the full outer product.
        for which in [Channel::Transmon, Channel::Ppq] {
            let mut rho = [[C64::new(0.0, 0.0); 4]; 4];
            for a in 0..64 {
                for b in 0..64 {
                    let (ka, ta, pa) = (a / 16, (a / 4) % 4, a % 4);
                    let (kb, tb, pb) = (b / 16, (b / 4) % 4, b % 4);
                    let keep = match which {
                        Channel::Transmon => ka == kb && pa == pb,
                        Channel::Ppq => ka == kb && ta == tb,
                    };
                    if keep {
                        let (ia, ib) = match which {
                            Channel::Transmon => (ta, tb),
                            Channel::Ppq => (pa, pb),
                        };
                        rho[ia][ib] += psi[a] * psi[b].conj();
                    }
                }
            }
            let (la, lb) = match which {
                Channel::Transmon => (0, 1),
                Channel::Ppq => (1, 2),
            };
            let expect = [
                2.0 * rho[la][lb].re,
                -2.0 * rho[la][lb].im,
                rho[la][la].re - rho[lb][lb].re,
            ];
            let got = reduced_bloch(&m, &psi, which);
            for i in 0..3 {
                assert!((got[i] - expect[i]).abs() < 1e-10, "{which:?} component {i}");
            }
            let norm = (got[0] * got[0] + got[1] * got[1] + got[2] * got[2]).sqrt();
            assert!(norm <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn recording_samples_at_stride() {
        let m = model();
        let engine = TrotterEngine::new(&m).unwrap();
        let sched = PulseSchedule::free_evolution(2.0);
        let psi0 = m.plus_plus_state();
        let (_, rec) = engine
            .propagate_state_recorded(&sched, 0.0, 2.0, 1e-2, &psi0, 50)
            .unwrap();
        // Samples at steps 0, 50, 100, 150 plus the final state.
        assert_eq!(rec.times.len(), 5);
        assert!((rec.times[1] - 0.5).abs() < 1e-12);
        assert!((rec.times[4] - 2.0).abs() < 1e-12);
        for (i, state) in rec.states.iter().enumerate() {
            let norm: f64 = state.iter().map(|a| a.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-8, "sample {i} norm {norm}");
            assert!(rec.leakage[i] >= 0.0 && rec.leakage[i] <= 1.0);
        }
    }

    #[test]
    fn step_plan_edge_cases() {
        assert!(matches!(step_plan(0.0, 1.0, 0.0), Err(EvolveError::NonPositiveTau(_))));
        assert!(matches!(step_plan(1.0, 1.0, 1e-3), Err(EvolveError::EmptyWindow { .. })));
        let (n, tail) = step_plan(0.0, 10.0, 1e-3).unwrap();
        assert_eq!(n, 10_000);
        assert_eq!(tail, 0.0);
        let (n, tail) = step_plan(0.0, 1469.9966, 1e-3).unwrap();
        assert_eq!(n, 1_469_996);
        assert!(tail > 5e-4 && tail < 7e-4);
    }
}
