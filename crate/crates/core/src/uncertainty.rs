//! Uncertainty sets for the AoD (interval) and user location (disk), sampling
//! of true realizations, and brute-force worst-case oracles used to validate
//! solver output against the exact models.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{nonlinear_aar, taylor_terms, Position2D, SystemParams};

/// Interval AoD uncertainty: θ_k = θ̄_k + Δθ_k with |Δθ_k| ≤ α_k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoDUncertainty {
    pub theta_bar: f64,
    pub alpha: f64,
}

impl AoDUncertainty {
    pub fn new(theta_bar: f64, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(Error::InvalidParameter("alpha must be nonnegative".into()));
        }
        // Pitch jitter is 1e-3..1e-1 rad in practice; 0.5 is a sanity cap.
        if alpha > 0.5 {
            return Err(Error::InvalidParameter(format!("alpha {alpha} exceeds 0.5 rad cap")));
        }
        if !theta_bar.is_finite() {
            return Err(Error::InvalidParameter("theta_bar must be finite".into()));
        }
        Ok(Self { theta_bar, alpha })
    }
}

/// Disk location uncertainty: r'_k = r̄'_k + Δr'_k with ‖Δr'_k‖ ≤ D_k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationUncertainty {
    pub center: Position2D,
    pub radius: f64,
}

impl LocationUncertainty {
    pub fn new(center: Position2D, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::InvalidParameter("radius must be nonnegative".into()));
        }
        Ok(Self { center, radius })
    }
}

/// One user's uncertainty description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserUncertainty {
    pub aod: AoDUncertainty,
    pub loc: LocationUncertainty,
}

/// A hidden true realization drawn from the uncertainty sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrueRealization {
    pub delta_theta: f64,
    pub delta_r: [f64; 2],
}

/// One user of a concrete problem instance: the uncertainty description the
/// optimizer sees and the hidden truth used for evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioUser {
    pub uncertainty: UserUncertainty,
    pub truth: TrueRealization,
}

/// A concrete problem instance: initial UAV position plus all users.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub uav_init: crate::geometry::Position3D,
    pub users: Vec<ScenarioUser>,
}

impl Scenario {
    pub fn uncertainties(&self) -> Vec<UserUncertainty> {
        self.users.iter().map(|u| u.uncertainty).collect()
    }

    pub fn truths(&self) -> Vec<TrueRealization> {
        self.users.iter().map(|u| u.truth).collect()
    }
}

/// Draw Δθ uniform on [-α, α] and Δr' uniform on the radius-D disk.
pub fn sample_realization<R: Rng>(
    rng: &mut R,
    aod: &AoDUncertainty,
    loc: &LocationUncertainty,
) -> TrueRealization {
    let delta_theta = if aod.alpha > 0.0 {
        rng.gen_range(-aod.alpha..=aod.alpha)
    } else {
        0.0
    };
    let delta_r = if loc.radius > 0.0 {
        let u: f64 = rng.gen();
        let r = loc.radius * u.sqrt();
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        [r * phi.cos(), r * phi.sin()]
    } else {
        [0.0, 0.0]
    };
    TrueRealization { delta_theta, delta_r }
}

/// Seeded, reproducible variant of [`sample_realization`].
pub fn sample_realization_seeded(
    seed: u64,
    aod: &AoDUncertainty,
    loc: &LocationUncertainty,
) -> TrueRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_realization(&mut rng, aod, loc)
}

/// Exact maximum of ‖r_0 - r_k‖² over the location disk:
/// (‖r'_0 - r̄'_k‖ + D_k)² + z_0².
pub fn worst_case_distance_sq(uav_xy: &Position2D, loc: &LocationUncertainty, z0: f64) -> f64 {
    let planar = uav_xy.distance(&loc.center) + loc.radius;
    planar * planar + z0 * z0
}

/// Which array-response model the oracle evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AarModel {
    /// First-order Taylor model a0 + a1·Δθ (what the optimizer sees).
    Linearized,
    /// Exact phase model a(θ̄ + Δθ) (what the physics does).
    Nonlinear,
}

/// Grid resolution for the worst-case SINR search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleGrid {
    /// Δθ samples on [-α, α], endpoints included.
    pub n_theta: usize,
    /// Disk boundary directions; the disk center is always added.
    pub n_boundary: usize,
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self { n_theta: 101, n_boundary: 64 }
    }
}

/// Per-user minimum SINR over the gridded uncertainty product set.
///
/// The location enters only through the path loss: the array gain cancels
/// between numerator and denominator, so for each Δθ the SINR is evaluated at
/// each candidate distance and the overall minimum is taken.
pub fn worst_case_sinr_oracle(
    beamformers: &[DVector<Complex64>],
    uav_xy: &Position2D,
    users: &[UserUncertainty],
    params: &SystemParams,
    model: AarModel,
    grid: OracleGrid,
) -> Result<Vec<f64>> {
    if beamformers.len() != users.len() {
        return Err(Error::DimensionMismatch { expected: users.len(), got: beamformers.len() });
    }
    if beamformers.iter().any(|w| w.len() != params.n_antennas) {
        return Err(Error::DimensionMismatch {
            expected: params.n_antennas,
            got: beamformers.iter().map(|w| w.len()).find(|&l| l != params.n_antennas).unwrap_or(0),
        });
    }
    let mut out = Vec::with_capacity(users.len());
    for (k, user) in users.iter().enumerate() {
        let d2_candidates = candidate_distances_sq(uav_xy, &user.loc, params.altitude, grid.n_boundary);
        let (a0, a1) = taylor_terms(user.aod.theta_bar, params);
        let mut min_sinr = f64::INFINITY;
        for dt in theta_grid(user.aod.alpha, grid.n_theta) {
            let a = match model {
                AarModel::Linearized => &a0.0 + &a1 * Complex64::new(dt, 0.0),
                AarModel::Nonlinear => nonlinear_aar(user.aod.theta_bar, dt, params).0,
            };
            let signal = a.dotc(&beamformers[k]).norm_sqr();
            let interference: f64 = beamformers
                .iter()
                .enumerate()
                .filter(|(r, _)| *r != k)
                .map(|(_, w)| a.dotc(w).norm_sqr())
                .sum();
            for &d2 in &d2_candidates {
                let g = params.rho_const / d2;
                let s = g * signal / (g * interference + params.noise_power[k]);
                if s < min_sinr {
                    min_sinr = s;
                }
            }
        }
        out.push(min_sinr);
    }
    Ok(out)
}

/// SINR of every user at one concrete realization, using the exact AAR and
/// the true location. This is the evaluation-side ground truth.
pub fn realized_sinrs(
    beamformers: &[DVector<Complex64>],
    uav_xy: &Position2D,
    users: &[UserUncertainty],
    realizations: &[TrueRealization],
    params: &SystemParams,
) -> Result<Vec<f64>> {
    if beamformers.len() != users.len() || realizations.len() != users.len() {
        return Err(Error::DimensionMismatch { expected: users.len(), got: beamformers.len() });
    }
    let mut out = Vec::with_capacity(users.len());
    for (k, (user, re)) in users.iter().zip(realizations).enumerate() {
        let a = nonlinear_aar(user.aod.theta_bar, re.delta_theta, params).0;
        let true_pos = Position2D::new(user.loc.center.x + re.delta_r[0], user.loc.center.y + re.delta_r[1]);
        let d2 = uav_xy.distance(&true_pos).powi(2) + params.altitude * params.altitude;
        let g = params.rho_const / d2;
        let signal = a.dotc(&beamformers[k]).norm_sqr();
        let interference: f64 = beamformers
            .iter()
            .enumerate()
            .filter(|(r, _)| *r != k)
            .map(|(_, w)| a.dotc(w).norm_sqr())
            .sum();
        out.push(g * signal / (g * interference + params.noise_power[k]));
    }
    Ok(out)
}

fn theta_grid(alpha: f64, n: usize) -> Vec<f64> {
    if alpha == 0.0 || n <= 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|i| -alpha + 2.0 * alpha * i as f64 / (n - 1) as f64)
        .collect()
}

/// Candidate squared distances: disk center plus `n_boundary` boundary points.
fn candidate_distances_sq(
    uav_xy: &Position2D,
    loc: &LocationUncertainty,
    z0: f64,
    n_boundary: usize,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_boundary + 1);
    let z2 = z0 * z0;
    out.push(uav_xy.distance(&loc.center).powi(2) + z2);
    if loc.radius > 0.0 {
        for i in 0..n_boundary {
            let phi = std::f64::consts::TAU * i as f64 / n_boundary as f64;
            let p = Position2D::new(
                loc.center.x + loc.radius * phi.cos(),
                loc.center.y + loc.radius * phi.sin(),
            );
            out.push(uav_xy.distance(&p).powi(2) + z2);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::steering_vector;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn disk(cx: f64, cy: f64, r: f64) -> LocationUncertainty {
        LocationUncertainty::new(Position2D::new(cx, cy), r).unwrap()
    }

    #[test]
    fn realization_respects_bounds() {
        let aod = AoDUncertainty::new(1.0, 0.05).unwrap();
        let loc = disk(10.0, -3.0, 20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let r = sample_realization(&mut rng, &aod, &loc);
            assert!(r.delta_theta.abs() <= aod.alpha);
            assert!((r.delta_r[0].powi(2) + r.delta_r[1].powi(2)).sqrt() <= loc.radius);
        }
    }

    #[test]
    fn degenerate_sets_give_zero() {
        let aod = AoDUncertainty::new(1.0, 0.0).unwrap();
        let loc = disk(0.0, 0.0, 0.0);
        let r = sample_realization_seeded(7, &aod, &loc);
        assert_eq!(r, TrueRealization { delta_theta: 0.0, delta_r: [0.0, 0.0] });
    }

    #[test]
    fn sampling_is_deterministic() {
        let aod = AoDUncertainty::new(1.2, 0.03).unwrap();
        let loc = disk(5.0, 5.0, 15.0);
        let a = sample_realization_seeded(42, &aod, &loc);
        let b = sample_realization_seeded(42, &aod, &loc);
        assert_eq!(a, b);
    }

    #[test]
    fn disk_second_moment() {
        // E‖Δr‖² = D²/2 for the uniform disk.
        let aod = AoDUncertainty::new(1.0, 0.0).unwrap();
        let loc = disk(0.0, 0.0, 20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| {
                let r = sample_realization(&mut rng, &aod, &loc);
                r.delta_r[0].powi(2) + r.delta_r[1].powi(2)
            })
            .sum::<f64>()
            / n as f64;
        assert_relative_eq!(mean, 200.0, max_relative = 0.02);
    }

    #[test]
    fn worst_distance_closed_form() {
        let uav = Position2D::new(0.0, 0.0);
        assert_relative_eq!(
            worst_case_distance_sq(&uav, &disk(30.0, 40.0, 20.0), 100.0),
            14_900.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            worst_case_distance_sq(&uav, &disk(30.0, 40.0, 0.0), 100.0),
            2500.0 + 10_000.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            worst_case_distance_sq(&uav, &disk(0.0, 0.0, 20.0), 100.0),
            10_400.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn worst_distance_matches_boundary_sampling() {
        let uav = Position2D::new(-12.0, 44.0);
        let loc = disk(100.0, -30.0, 17.0);
        let z0 = 100.0;
        let closed = worst_case_distance_sq(&uav, &loc, z0);
        let mut best = f64::NEG_INFINITY;
        let mut best_point = Position2D::new(0.0, 0.0);
        for i in 0..10_000 {
            let phi = std::f64::consts::TAU * i as f64 / 10_000.0;
            let p = Position2D::new(
                loc.center.x + loc.radius * phi.cos(),
                loc.center.y + loc.radius * phi.sin(),
            );
            let d2 = uav.distance(&p).powi(2) + z0 * z0;
            if d2 > best {
                best = d2;
                best_point = p;
            }
        }
        assert_relative_eq!(closed, best, max_relative = 1e-8);
        // Argmax sits on the boundary along -(r'_0 - r̄') from the center.
        let dir = [
            (loc.center.x - uav.x) / uav.distance(&loc.center),
            (loc.center.y - uav.y) / uav.distance(&loc.center),
        ];
        let expect = Position2D::new(
            loc.center.x + loc.radius * dir[0],
            loc.center.y + loc.radius * dir[1],
        );
        assert!(best_point.distance(&expect) < loc.radius * 1e-3);
    }

    fn mrt_beamformers(thetas: &[f64], power: f64, params: &SystemParams) -> Vec<DVector<Complex64>> {
        thetas
            .iter()
            .map(|&t| {
                let a = steering_vector(t, params).0;
                let n = a.norm();
                a * Complex64::new(power.sqrt() / n, 0.0)
            })
            .collect()
    }

    #[test]
    fn oracle_degenerate_equals_nominal_sinr() {
        let params = SystemParams::defaults(4, 2);
        let users = vec![
            UserUncertainty {
                aod: AoDUncertainty::new(1.2, 0.0).unwrap(),
                loc: disk(50.0, 0.0, 0.0),
            },
            UserUncertainty {
                aod: AoDUncertainty::new(2.0, 0.0).unwrap(),
                loc: disk(-80.0, 30.0, 0.0),
            },
        ];
        let uav = Position2D::new(0.0, 0.0);
        let w = mrt_beamformers(&[1.2, 2.0], 1e-5, &params);
        let oracle = worst_case_sinr_oracle(&w, &uav, &users, &params, AarModel::Nonlinear, OracleGrid::default()).unwrap();
        for (k, user) in users.iter().enumerate() {
            let a = steering_vector(user.aod.theta_bar, &params).0;
            let d2 = uav.distance(&user.loc.center).powi(2) + params.altitude.powi(2);
            let g = params.rho_const / d2;
            let signal = a.dotc(&w[k]).norm_sqr();
            let interf: f64 = w
                .iter()
                .enumerate()
                .filter(|(r, _)| *r != k)
                .map(|(_, wr)| a.dotc(wr).norm_sqr())
                .sum();
            let expect = g * signal / (g * interf + params.noise_power[k]);
            assert_relative_eq!(oracle[k], expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn oracle_monotone_in_uncertainty() {
        let params = SystemParams::defaults(4, 2);
        let uav = Position2D::new(0.0, 0.0);
        let w = mrt_beamformers(&[1.0, 2.2], 1e-5, &params);
        let mut prev = [f64::INFINITY; 2];
        for (alpha, d) in [(0.0, 0.0), (0.02, 5.0), (0.05, 20.0), (0.1, 40.0)] {
            let users = vec![
                UserUncertainty {
                    aod: AoDUncertainty::new(1.0, alpha).unwrap(),
                    loc: disk(60.0, 10.0, d),
                },
                UserUncertainty {
                    aod: AoDUncertainty::new(2.2, alpha).unwrap(),
                    loc: disk(-40.0, -70.0, d),
                },
            ];
            let o = worst_case_sinr_oracle(&w, &uav, &users, &params, AarModel::Nonlinear, OracleGrid::default()).unwrap();
            for k in 0..2 {
                assert!(o[k] <= prev[k] * (1.0 + 1e-12), "user {k}: {} > {}", o[k], prev[k]);
                prev[k] = o[k];
            }
        }
    }

    #[test]
    fn oracle_grid_convergence() {
        let params = SystemParams::defaults(6, 2);
        let uav = Position2D::new(0.0, 0.0);
        let w = mrt_beamformers(&[1.3, 1.9], 1e-5, &params);
        let users = vec![
            UserUncertainty {
                aod: AoDUncertainty::new(1.3, 0.06).unwrap(),
                loc: disk(70.0, -20.0, 20.0),
            },
            UserUncertainty {
                aod: AoDUncertainty::new(1.9, 0.09).unwrap(),
                loc: disk(-10.0, 90.0, 20.0),
            },
        ];
        let coarse = worst_case_sinr_oracle(&w, &uav, &users, &params, AarModel::Nonlinear, OracleGrid::default()).unwrap();
        let fine = worst_case_sinr_oracle(
            &w,
            &uav,
            &users,
            &params,
            AarModel::Nonlinear,
            OracleGrid { n_theta: 1001, n_boundary: 64 },
        )
        .unwrap();
        for k in 0..2 {
            assert_relative_eq!(coarse[k], fine[k], max_relative = 1e-3);
        }
    }

    #[test]
    fn realized_matches_oracle_at_degenerate_sets() {
        let params = SystemParams::defaults(4, 1);
        let uav = Position2D::new(10.0, 10.0);
        let users = vec![UserUncertainty {
            aod: AoDUncertainty::new(1.5, 0.0).unwrap(),
            loc: disk(100.0, -50.0, 0.0),
        }];
        let w = mrt_beamformers(&[1.5], 2e-6, &params);
        let zero = TrueRealization { delta_theta: 0.0, delta_r: [0.0, 0.0] };
        let r = realized_sinrs(&w, &uav, &users, &[zero], &params).unwrap();
        let o = worst_case_sinr_oracle(&w, &uav, &users, &params, AarModel::Nonlinear, OracleGrid::default()).unwrap();
        assert_relative_eq!(r[0], o[0], max_relative = 1e-12);
    }

    #[test]
    fn linearization_consistency_over_grid() {
        // For ρ ≤ 0.1 and θ̄ away from the endfire degeneracies, the gap
        // between the exact and linearized response stays below the analytic
        // curvature bound on a dense Δθ grid.
        let params = SystemParams::defaults(6, 1);
        let c = 2.0 * PI * params.sep_over_lambda();
        let curv_sq: f64 = (0..params.n_antennas)
            .map(|n| {
                let cn = c * n as f64;
                (cn + cn * cn).powi(2)
            })
            .sum();
        let half_curv = 0.5 * curv_sq.sqrt();
        for &theta_bar in &[0.2, 0.9, PI / 2.0, 2.3, PI - 0.2] {
            let rho = 0.1;
            let alpha = rho * theta_bar.abs();
            let (a0, a1) = taylor_terms(theta_bar, &params);
            let mut max_gap = 0.0f64;
            for dt in theta_grid(alpha, 101) {
                let exact = nonlinear_aar(theta_bar, dt, &params).0;
                let lin = &a0.0 + &a1 * Complex64::new(dt, 0.0);
                max_gap = max_gap.max((exact - lin).norm());
            }
            assert!(
                max_gap <= half_curv * alpha * alpha + 1e-12,
                "theta_bar={theta_bar}: gap {max_gap}"
            );
        }
    }
}
