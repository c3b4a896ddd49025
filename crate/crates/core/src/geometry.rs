//! Physical model: ULA steering vectors, their Taylor expansion in the AoD,
//! LoS channel vectors, and SINR evaluation.
//!
//! Conventions: the ULA axis is aligned with the global x-axis and the AoD is
//! measured from that axis, so a user straight below the UAV sits at θ = π/2.
//! Users are on the ground (z = 0); the UAV flies at fixed altitude `z0`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::units::SPEED_OF_LIGHT;

/// Distance below which two points are treated as coincident.
pub const COINCIDENT_EPS: f64 = 1e-9;

/// Physical constants and per-user / per-antenna limits of one system setup.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Carrier center frequency, Hz.
    pub carrier_freq: f64,
    /// Bandwidth, Hz (bookkeeping only; does not enter the optimization).
    pub bandwidth: f64,
    /// ULA antenna element separation `b`, meters.
    pub antenna_sep: f64,
    /// Number of transmit antennas at the UAV.
    pub n_antennas: usize,
    /// Number of single-antenna users.
    pub n_users: usize,
    /// Fixed flight altitude `z0`, meters.
    pub altitude: f64,
    /// Per-user noise power, watts.
    pub noise_power: Vec<f64>,
    /// Per-antenna transmit power cap, watts.
    pub per_antenna_cap: Vec<f64>,
    /// Per-user minimum required SINR, linear ratio.
    pub sinr_req: Vec<f64>,
    /// SINR margin γ compensating the AAR linearization, dB.
    pub gamma_margin_db: f64,
    /// Carrier wavelength, meters. Derived: c / carrier_freq.
    pub wavelength: f64,
    /// Path loss constant ϱ = (λ/4π)². Derived.
    pub rho_const: f64,
}

impl SystemParams {
    pub fn new(
        carrier_freq: f64,
        bandwidth: f64,
        antenna_sep: f64,
        n_antennas: usize,
        n_users: usize,
        altitude: f64,
        noise_power: Vec<f64>,
        per_antenna_cap: Vec<f64>,
        sinr_req: Vec<f64>,
        gamma_margin_db: f64,
    ) -> Result<Self> {
        if n_antennas < 1 {
            return Err(Error::InvalidParameter("n_antennas must be >= 1".into()));
        }
        if n_users < 1 {
            return Err(Error::InvalidParameter("n_users must be >= 1".into()));
        }
        if !(carrier_freq > 0.0 && carrier_freq.is_finite()) {
            return Err(Error::InvalidParameter("carrier_freq must be positive".into()));
        }
        if !(antenna_sep > 0.0 && antenna_sep.is_finite()) {
            return Err(Error::InvalidParameter("antenna_sep must be positive".into()));
        }
        if !(altitude > 0.0 && altitude.is_finite()) {
            return Err(Error::InvalidParameter("altitude must be positive".into()));
        }
        if noise_power.len() != n_users {
            return Err(Error::DimensionMismatch { expected: n_users, got: noise_power.len() });
        }
        if sinr_req.len() != n_users {
            return Err(Error::DimensionMismatch { expected: n_users, got: sinr_req.len() });
        }
        if per_antenna_cap.len() != n_antennas {
            return Err(Error::DimensionMismatch {
                expected: n_antennas,
                got: per_antenna_cap.len(),
            });
        }
        if noise_power.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter("noise powers must be positive".into()));
        }
        if per_antenna_cap.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter("per-antenna caps must be positive".into()));
        }
        // Γ_req > 0 is required by the rank-one tightness result.
        if sinr_req.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidParameter("SINR requirements must be positive".into()));
        }
        if !gamma_margin_db.is_finite() {
            return Err(Error::InvalidParameter("gamma margin must be finite".into()));
        }
        let wavelength = SPEED_OF_LIGHT / carrier_freq;
        let rho_const = (wavelength / (4.0 * std::f64::consts::PI)).powi(2);
        Ok(Self {
            carrier_freq,
            bandwidth,
            antenna_sep,
            n_antennas,
            n_users,
            altitude,
            noise_power,
            per_antenna_cap,
            sinr_req,
            gamma_margin_db,
            wavelength,
            rho_const,
        })
    }

    /// Default desk-scale setup: 2.4 GHz / 200 kHz, b = 6.25 cm, z0 = 100 m,
    /// σ² = -110 dBm, P_i = 20 dBm, Γ_req = 10 dB, γ = 0.3 dB.
    pub fn defaults(n_antennas: usize, n_users: usize) -> Self {
        use crate::units::{db_to_linear, dbm_to_watts};
        Self::new(
            2.4e9,
            200e3,
            6.25e-2,
            n_antennas,
            n_users,
            100.0,
            vec![dbm_to_watts(-110.0); n_users],
            vec![dbm_to_watts(20.0); n_antennas],
            vec![db_to_linear(10.0); n_users],
            0.3,
        )
        .expect("default parameters are valid")
    }

    /// Antenna separation in wavelengths, b/λ.
    pub fn sep_over_lambda(&self) -> f64 {
        self.antenna_sep / self.wavelength
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position2D {
    pub x: f64,
    pub y: f64,
}

impl Position2D {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position2D) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Ground-plane projection.
    pub fn xy(&self) -> Position2D {
        Position2D::new(self.x, self.y)
    }

    pub fn distance(&self, other: &Position3D) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }
}

/// ULA array response: unit-modulus phase ramp across the elements, first
/// entry fixed to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(pub DVector<Complex64>);

impl SteeringVector {
    pub fn as_vector(&self) -> &DVector<Complex64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() == 0
    }
}

/// Array response a(θ): entry n is exp(-j·2π·(b/λ)·n·cos θ).
pub fn steering_vector(theta: f64, params: &SystemParams) -> SteeringVector {
    let phase_step = -2.0 * std::f64::consts::PI * params.sep_over_lambda() * theta.cos();
    let entries: Vec<Complex64> = (0..params.n_antennas)
        .map(|n| Complex64::from_polar(1.0, phase_step * n as f64))
        .collect();
    SteeringVector(DVector::from_vec(entries))
}

/// First-order Taylor terms of the array response around the AoD estimate:
/// a(θ̄ + Δθ) ≈ a0 + a1·Δθ with a1 = (j·2π·(b/λ)·n·sin θ̄) ∘ a0.
pub fn taylor_terms(theta_bar: f64, params: &SystemParams) -> (SteeringVector, DVector<Complex64>) {
    let a0 = steering_vector(theta_bar, params);
    let c = 2.0 * std::f64::consts::PI * params.sep_over_lambda() * theta_bar.sin();
    let a1 = DVector::from_iterator(
        params.n_antennas,
        a0.0.iter()
            .enumerate()
            .map(|(n, e)| Complex64::new(0.0, c * n as f64) * e),
    );
    (a0, a1)
}

/// Exact array response at the perturbed AoD θ̄ + Δθ. Used on the evaluation
/// side only; the optimizer sees the linearized model.
pub fn nonlinear_aar(theta_bar: f64, delta_theta: f64, params: &SystemParams) -> SteeringVector {
    steering_vector(theta_bar + delta_theta, params)
}

/// LoS channel vector h = √ϱ · ‖r0 - rk‖⁻¹ · a(θ).
pub fn channel_vector(
    r0: &Position3D,
    rk: &Position3D,
    theta: f64,
    params: &SystemParams,
) -> Result<DVector<Complex64>> {
    let d = r0.distance(rk);
    if d < COINCIDENT_EPS {
        return Err(Error::CoincidentPoints);
    }
    let gain = params.rho_const.sqrt() / d;
    Ok(steering_vector(theta, params).0 * Complex64::new(gain, 0.0))
}

/// Received SINR of user `k`: |h_kᴴ w_k|² / (Σ_{r≠k} |h_kᴴ w_r|² + σ²).
pub fn sinr(
    k: usize,
    beamformers: &[DVector<Complex64>],
    h_k: &DVector<Complex64>,
    noise_power: f64,
) -> f64 {
    let signal = h_k.dotc(&beamformers[k]).norm_sqr();
    let interference: f64 = beamformers
        .iter()
        .enumerate()
        .filter(|(r, _)| *r != k)
        .map(|(_, w)| h_k.dotc(w).norm_sqr())
        .sum();
    signal / (interference + noise_power)
}

/// AoD implied by the geometry with the ULA axis along the global x-axis:
/// θ = arccos((x_k - x_0) / ‖r_k - r_0‖), in [0, π].
pub fn aod_from_geometry(r0: &Position3D, rk: &Position3D) -> Result<f64> {
    let d = r0.distance(rk);
    if d < COINCIDENT_EPS {
        return Err(Error::CoincidentPoints);
    }
    Ok(((rk.x - r0.x) / d).clamp(-1.0, 1.0).acos())
}
