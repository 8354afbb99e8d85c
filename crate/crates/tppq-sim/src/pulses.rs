//! Pulse envelopes and offset-charge signal synthesis.
//!
//! Microwave drives enter the Hamiltonian through the dimensionless offset
//! charges `n_g,T(t)` and `n_g,P(t)`. Each channel carries a sum of tones,
//! every tone being an envelope times a carrier `cos(2π·f·t - γ)` referenced
//! to absolute lab time. The CNOT protocol is a flat-top tone on the transmon
//! (the cross-resonance stage) followed by a Gaussian tone on the PPQ (the
//! auxiliary stage), then virtual-Z frame rotations; single-qubit gates are a
//! lone Gaussian tone on the driven channel.
//!
//! Envelopes evaluate in closed form at arbitrary `t`: the propagator needs
//! them at step midpoints with picosecond spacing, so there are no sample
//! tables anywhere.

use serde::{Deserialize, Serialize};

/// Baseline-subtracted Gaussian envelope.
///
/// Inside the window `[t0, t0 + duration)` the value is
/// `Ω_G·[exp(-(t'-T_G/2)²/2σ²) - exp(-T_G²/8σ²)] / [1 - exp(-T_G²/8σ²)]`,
/// zero outside: continuous at both edges and exactly `Ω_G` at the peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianEnvelope {
    /// Peak amplitude Ω_G (dimensionless offset charge).
    pub amplitude: f64,
    /// Window length T_G in ns.
    pub duration: f64,
    /// Thickness σ in ns (conventionally T_G/4).
    pub sigma: f64,
    /// Window start in ns.
    pub t0: f64,
}

impl GaussianEnvelope {
    /// Standard shape with σ = T_G/4.
    pub fn new(amplitude: f64, duration: f64, t0: f64) -> Self {
        Self { amplitude, duration, sigma: duration / 4.0, t0 }
    }

    /// Baseline value subtracted from the raw Gaussian.
    fn baseline(&self) -> f64 {
        (-self.duration * self.duration / (8.0 * self.sigma * self.sigma)).exp()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let tp = t - self.t0;
        if !(0.0..self.duration).contains(&tp) {
            return 0.0;
        }
        let b = self.baseline();
        let x = (tp - self.duration / 2.0) / self.sigma;
        self.amplitude * ((-0.5 * x * x).exp() - b) / (1.0 - b)
    }

    /// Analytic d/dt of [`Self::eval`] inside the window, zero outside.
    pub fn eval_derivative(&self, t: f64) -> f64 {
        let tp = t - self.t0;
        if !(0.0..self.duration).contains(&tp) {
            return 0.0;
        }
        let b = self.baseline();
        let u = tp - self.duration / 2.0;
        let x = u / self.sigma;
        self.amplitude * (-u / (self.sigma * self.sigma)) * (-0.5 * x * x).exp() / (1.0 - b)
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.duration
    }
}

/// Sinusoidal flat-top envelope: quarter-sine rise over `T_rise = ϱ·T_S`,
/// plateau at Ω_S, mirror-image fall, zero outside `[0, T_S)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatTopEnvelope {
    /// Plateau amplitude Ω_S (dimensionless offset charge).
    pub amplitude: f64,
    /// Total duration T_S in ns.
    pub duration: f64,
    /// Rise fraction ϱ = T_rise/T_S, in (0, 0.5).
    pub rise_fraction: f64,
}

impl FlatTopEnvelope {
    pub fn new(amplitude: f64, duration: f64, rise_fraction: f64) -> Self {
        Self { amplitude, duration, rise_fraction }
    }

    pub fn rise_time(&self) -> f64 {
        self.rise_fraction * self.duration
    }

    /// Plateau length `T_CR = T_S - 2·T_rise`.
    pub fn plateau_time(&self) -> f64 {
        self.duration - 2.0 * self.rise_time()
    }

    pub fn eval(&self, t: f64) -> f64 {
        if !(0.0..self.duration).contains(&t) {
            return 0.0;
        }
        let t_rise = self.rise_time();
        let t_cr = self.plateau_time();
        if t < t_rise {
            self.amplitude * (std::f64::consts::FRAC_PI_2 * t / t_rise).sin()
        } else if t < t_rise + t_cr {
            self.amplitude
        } else {
            self.amplitude * (std::f64::consts::FRAC_PI_2 * (t - t_cr) / t_rise).sin()
        }
    }
}

/// DRAG quadrature settings: adds `β·Ω̇_G(t)·sin(carrier)` to a Gaussian tone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DragSpec {
    /// DRAG coefficient β in ns (≈ inverse anharmonicity scale).
    pub beta: f64,
    pub enabled: bool,
}

impl DragSpec {
    pub fn off() -> Self {
        Self { beta: 0.0, enabled: false }
    }

    pub fn with_beta(beta: f64) -> Self {
        Self { beta, enabled: beta != 0.0 }
    }

    pub fn effective_beta(&self) -> f64 {
        if self.enabled {
            self.beta
        } else {
            0.0
        }
    }
}

/// One tone of a drive channel: envelope × carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Tone {
    FlatTop {
        envelope: FlatTopEnvelope,
        /// Carrier frequency in GHz.
        f_ghz: f64,
        /// Carrier phase γ in radians; the carrier is cos(2π·f·t − γ) in
        /// absolute lab time.
        gamma: f64,
    },
    Gaussian {
        envelope: GaussianEnvelope,
        f_ghz: f64,
        gamma: f64,
        drag: DragSpec,
    },
}

impl Tone {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Tone::FlatTop { envelope, f_ghz, gamma } => {
                let carrier = (std::f64::consts::TAU * f_ghz * t - gamma).cos();
                envelope.eval(t) * carrier
            }
            Tone::Gaussian { envelope, f_ghz, gamma, drag } => {
                let phase = std::f64::consts::TAU * f_ghz * t - gamma;
                let mut v = envelope.eval(t) * phase.cos();
                let beta = drag.effective_beta();
                if beta != 0.0 {
                    v += beta * envelope.eval_derivative(t) * phase.sin();
                }
                v
            }
        }
    }

    fn end(&self) -> f64 {
        match self {
            Tone::FlatTop { envelope, .. } => envelope.duration,
            Tone::Gaussian { envelope, .. } => envelope.end(),
        }
    }
}

/// Which qubit a drive addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Transmon,
    Ppq,
}

/// Virtual-Z frame rotation angles applied after the pulse sequence.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VirtualZ {
    pub theta_t: f64,
    pub theta_p: f64,
}

/// Cross-resonance stage parameters (`x_CR` of the CNOT protocol).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrParams {
    /// Pulse frequency in GHz (near the PPQ transition).
    pub f1_ghz: f64,
    /// Total flat-top duration T_S = T_1 in ns.
    pub t_s: f64,
    /// Rise fraction ϱ.
    pub rho: f64,
    /// Amplitude Ω_S.
    pub omega_s: f64,
    /// Carrier phase γ_1.
    pub gamma1: f64,
}

/// Auxiliary-stage parameters (`x_Aux`): a Gaussian single-qubit rotation on
/// the PPQ starting at T_1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxParams {
    /// Pulse frequency in GHz (the PPQ transition).
    pub f2_ghz: f64,
    /// Gaussian window T_G = T_2 in ns.
    pub t_g: f64,
    /// Thickness σ in ns.
    pub sigma: f64,
    /// Amplitude Ω_G.
    pub omega_g: f64,
    /// Carrier phase γ_2, referenced to the pulse start T_1: the synthesized
    /// signal is cos(2π·f₂·(t - T_1) - γ₂), which in absolute time is a
    /// carrier phase of γ₂ + 2π·f₂·T_1. Pulse tables quote γ₂ this way; a
    /// T_1-independent value would make the tabulated angle meaningless.
    pub gamma2: f64,
    /// DRAG coefficient (zero for the PPQ by default).
    pub beta: f64,
}

/// A fully specified gate attempt: tones per channel plus virtual-Z angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub transmon: Vec<Tone>,
    pub ppq: Vec<Tone>,
    pub vz: VirtualZ,
}

impl PulseSchedule {
    /// The CNOT protocol: CR flat-top on the transmon over `[0, T_S)`, then
    /// the auxiliary Gaussian on the PPQ over `[T_S, T_S + T_G)`, then VZ.
    ///
    /// The auxiliary γ₂ is start-referenced (see [`AuxParams`]); it is
    /// translated to the absolute-time carrier phase here.
    pub fn cnot(cr: CrParams, aux: AuxParams, vz: VirtualZ) -> Self {
        let cr_tone = Tone::FlatTop {
            envelope: FlatTopEnvelope::new(cr.omega_s, cr.t_s, cr.rho),
            f_ghz: cr.f1_ghz,
            gamma: cr.gamma1,
        };
        let aux_tone = Tone::Gaussian {
            envelope: GaussianEnvelope {
                amplitude: aux.omega_g,
                duration: aux.t_g,
                sigma: aux.sigma,
                t0: cr.t_s,
            },
            f_ghz: aux.f2_ghz,
            gamma: aux.gamma2 + std::f64::consts::TAU * aux.f2_ghz * cr.t_s,
            drag: DragSpec::with_beta(aux.beta),
        };
        Self { transmon: vec![cr_tone], ppq: vec![aux_tone], vz }
    }

    /// A single-qubit `R_X` pulse: one Gaussian tone on the chosen channel
    /// starting at t = 0, nothing on the other channel.
    pub fn single_qubit(
        channel: Channel,
        f_ghz: f64,
        t_g: f64,
        omega_g: f64,
        gamma: f64,
        beta: f64,
    ) -> Self {
        let tone = Tone::Gaussian {
            envelope: GaussianEnvelope::new(omega_g, t_g, 0.0),
            f_ghz,
            gamma,
            drag: DragSpec::with_beta(beta),
        };
        let (transmon, ppq) = match channel {
            Channel::Transmon => (vec![tone], vec![]),
            Channel::Ppq => (vec![], vec![tone]),
        };
        Self { transmon, ppq, vz: VirtualZ::default() }
    }

    /// An all-silent schedule of the given length (free evolution).
    pub fn free_evolution(duration: f64) -> Self {
        Self {
            transmon: vec![Tone::FlatTop {
                envelope: FlatTopEnvelope::new(0.0, duration, 0.25),
                f_ghz: 0.0,
                gamma: 0.0,
            }],
            ppq: vec![],
            vz: VirtualZ::default(),
        }
    }

    /// Offset charge `n_g(t)` on a channel: the sum of its tones.
    pub fn offset_charge(&self, channel: Channel, t: f64) -> f64 {
        let tones = match channel {
            Channel::Transmon => &self.transmon,
            Channel::Ppq => &self.ppq,
        };
        tones.iter().map(|tone| tone.eval(t)).sum()
    }

    /// Protocol length: the latest tone end.
    pub fn total_duration(&self) -> f64 {
        self.transmon.iter().chain(&self.ppq).map(Tone::end).fold(0.0, f64::max)
    }
}
