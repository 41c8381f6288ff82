//! Geometric Rician channel model and the link metrics built on it.
//!
//! The BS reaches the users only through the IRS. For user `v` the BS-IRS
//! channel `H[v]` is N×M, the IRS-user channel `h[v]` has length N, and the
//! cascaded channel is `W[v] = diag(hᴴ) H`. For a reflection vector `b` the
//! effective channel is the row `u = bᴴ W`, stored here as a length-M vector
//! holding the row's entries, so `u f` is `u.dot(f)` (no conjugation).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};

/// ULA response: entry e is exp(-j 2π e (d/λ) sin Θ).
pub fn array_response(angle: f64, num_elements: usize, spacing_ratio: f64) -> Result<CVector> {
    if num_elements == 0 {
        return Err(Error::invalid("array needs at least one element"));
    }
    let phase = -2.0 * PI * spacing_ratio * angle.sin();
    Ok(CVector::from_fn(num_elements, |e, _| {
        C64::from_polar(1.0, phase * e as f64)
    }))
}

/// Large-scale power gain L0 (d/d0)^-α.
pub fn pathloss(ref_pathloss: f64, distance: f64, ref_distance: f64, exponent: f64) -> f64 {
    ref_pathloss * (distance / ref_distance).powf(-exponent)
}

/// Circularly symmetric complex Gaussian with unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * FRAC_1_SQRT_2
}

/// User drop around the IRS and the fixed BS-IRS angles.
#[derive(Debug, Clone, PartialEq)]
pub struct UserGeometry {
    pub user_distance: Vec<f64>,
    /// Angle of departure at the IRS towards each user.
    pub user_aod: Vec<f64>,
    /// Angle of arrival at the IRS from the BS.
    pub irs_aoa: f64,
    /// Angle of departure at the BS towards the IRS.
    pub bs_aod: f64,
}

const ANGLE_SPREAD: f64 = PI / 3.0;

impl UserGeometry {
    /// Binomial point process: `V` users uniform in the disc around the IRS.
    /// Angles are uniform on [-π/3, π/3].
    pub fn sample<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Self {
        let irs_aoa = rng.random_range(-ANGLE_SPREAD..=ANGLE_SPREAD);
        let bs_aod = rng.random_range(-ANGLE_SPREAD..=ANGLE_SPREAD);
        let mut user_distance = Vec::with_capacity(config.total_users);
        let mut user_aod = Vec::with_capacity(config.total_users);
        for _ in 0..config.total_users {
            // 1 - U lies in (0, 1], keeping the distance strictly positive.
            let u: f64 = 1.0 - rng.random::<f64>();
            user_distance.push(config.user_radius * u.sqrt());
            user_aod.push(rng.random_range(-ANGLE_SPREAD..=ANGLE_SPREAD));
        }
        UserGeometry {
            user_distance,
            user_aod,
            irs_aoa,
            bs_aod,
        }
    }

    pub fn num_users(&self) -> usize {
        self.user_distance.len()
    }

    pub fn validate(&self, config: &SystemConfig) -> Result<()> {
        if self.user_aod.len() != self.user_distance.len() {
            return Err(Error::dims(self.user_distance.len(), self.user_aod.len()));
        }
        let half = PI / 2.0;
        let in_range = |a: f64| (-half..=half).contains(&a);
        if !in_range(self.irs_aoa) || !in_range(self.bs_aod) || !self.user_aod.iter().all(|&a| in_range(a)) {
            return Err(Error::invalid("angles must lie in [-π/2, π/2]"));
        }
        if !self
            .user_distance
            .iter()
            .all(|&d| d > 0.0 && d <= config.user_radius)
        {
            return Err(Error::invalid("user distances must lie in (0, user_radius]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub bs_irs: Vec<CMatrix>,
    pub irs_user: Vec<CVector>,
    pub cascaded: Vec<CMatrix>,
}

/// Draws the Rician channels of every user. The random stream is consumed as
/// H[0], h[0], H[1], h[1], ... so a given seed always yields the same set.
pub fn synthesize_channels<R: Rng + ?Sized>(
    config: &SystemConfig,
    geometry: &UserGeometry,
    rng: &mut R,
) -> Result<ChannelSet> {
    config.validate()?;
    geometry.validate(config)?;
    let (n, m) = (config.num_irs_elements, config.num_bs_antennas);
    let spacing = config.element_spacing_ratio;

    let a_irs = array_response(geometry.irs_aoa, n, spacing)?;
    let a_bs = array_response(geometry.bs_aod, m, spacing)?;
    let los_bs = CMatrix::from_fn(n, m, |r, c| a_irs[r].conj() * a_bs[c]);
    let gain_bs = pathloss(
        config.ref_pathloss,
        config.bs_irs_distance,
        config.ref_distance,
        config.pathloss_exp_bs_irs,
    )
    .sqrt();
    let (los_w, nlos_w) = rician_weights(config.rician_bs_irs);

    let v = geometry.num_users();
    let mut bs_irs = Vec::with_capacity(v);
    let mut irs_user = Vec::with_capacity(v);
    let mut cascaded = Vec::with_capacity(v);
    for user in 0..v {
        let scatter = CMatrix::from_fn(n, m, |_, _| complex_gaussian(rng));
        let h_mat = (&los_bs * C64::from(los_w) + scatter * C64::from(nlos_w)) * C64::from(gain_bs);

        let gain_ru = pathloss(
            config.ref_pathloss,
            geometry.user_distance[user],
            config.ref_distance,
            config.pathloss_exp_irs_user,
        )
        .sqrt();
        let (los_u, nlos_u) = rician_weights(config.rician_irs_user);
        let a_user = array_response(geometry.user_aod[user], n, spacing)?;
        let scatter = CVector::from_fn(n, |_, _| complex_gaussian(rng));
        let h_vec = (a_user * C64::from(los_u) + scatter * C64::from(nlos_u)) * C64::from(gain_ru);

        cascaded.push(cascade(&h_vec, &h_mat));
        bs_irs.push(h_mat);
        irs_user.push(h_vec);
    }
    Ok(ChannelSet {
        bs_irs,
        irs_user,
        cascaded,
    })
}

fn rician_weights(factor: f64) -> (f64, f64) {
    if factor.is_infinite() {
        return (1.0, 0.0);
    }
    ((factor / (1.0 + factor)).sqrt(), (1.0 / (1.0 + factor)).sqrt())
}

/// `diag(hᴴ) H`: row n of H scaled by conj(h_n).
pub fn cascade(h: &CVector, h_mat: &CMatrix) -> CMatrix {
    let mut w = h_mat.clone();
    for (n, mut row) in w.row_iter_mut().enumerate() {
        row *= h[n].conj();
    }
    w
}

/// `u = bᴴ W` returned as the length-M vector of the row's entries.
pub fn effective_channel(w: &CMatrix, b: &CVector) -> Result<CVector> {
    if w.nrows() != b.len() {
        return Err(Error::dims(format!("b of length {}", w.nrows()), b.len()));
    }
    Ok(w.tr_mul(&b.conjugate()))
}

impl ChannelSet {
    pub fn num_users(&self) -> usize {
        self.cascaded.len()
    }

    pub fn effective_channels(&self, b: &CVector) -> Result<Vec<CVector>> {
        self.cascaded.iter().map(|w| effective_channel(w, b)).collect()
    }
}

/// SINR of one user. `beta` holds the cluster's coefficients, weakest
/// user first; users above `k` are decoded after `k` and interfere with it.
pub fn sinr(
    k: usize,
    own_gain: f64,
    beta: &[f64],
    interference: f64,
    cluster_power: f64,
    noise_power: f64,
) -> f64 {
    let later: f64 = beta[k + 1..].iter().sum();
    let signal = cluster_power * beta[k] * own_gain;
    signal / (cluster_power * later * own_gain + interference + noise_power)
}

/// Sum rate and consumed power of one cluster.
pub fn cluster_rate_and_power(
    gammas: &[f64],
    beta: &[f64],
    beam_norm_sq: f64,
    config: &SystemConfig,
) -> (f64, f64) {
    let rate = gammas
        .iter()
        .map(|g| config.bandwidth * g.max(0.0).ln_1p() / std::f64::consts::LN_2)
        .sum();
    let power = beam_norm_sq * config.cluster_power * beta.iter().sum::<f64>() + config.circuit_power;
    (rate, power)
}

/// Received gains |u_{i,k} f_j|² of every served user from every beam.
///
/// Rows are users in cluster-major order (row `i*K + k`), columns are beams.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    gains: DMatrix<f64>,
    users_per_cluster: usize,
    beam_norm_sq: Vec<f64>,
    /// ‖u_{i,k}‖², same row order as `gains`.
    user_norm_sq: Vec<f64>,
}

impl LinkGains {
    pub fn new(gains: DMatrix<f64>, users_per_cluster: usize, beam_norm_sq: Vec<f64>) -> Result<Self> {
        let clusters = beam_norm_sq.len();
        if gains.shape() != (clusters * users_per_cluster, clusters) {
            return Err(Error::dims(
                format!("{}x{}", clusters * users_per_cluster, clusters),
                format!("{}x{}", gains.nrows(), gains.ncols()),
            ));
        }
        let user_norm_sq = (0..gains.nrows())
            .map(|r| gains[(r, r / users_per_cluster.max(1))])
            .collect();
        Ok(LinkGains {
            gains,
            users_per_cluster,
            beam_norm_sq,
            user_norm_sq,
        })
    }

    /// Gains of the users in `clusters` (user indices into `effective`).
    pub fn from_effective(effective: &[CVector], clusters: &[Vec<usize>], beams: &[CVector]) -> Result<Self> {
        let k_users = clusters.first().map_or(0, Vec::len);
        let mut gains = DMatrix::zeros(clusters.len() * k_users, beams.len());
        for (i, cluster) in clusters.iter().enumerate() {
            for (k, &user) in cluster.iter().enumerate() {
                for (j, f) in beams.iter().enumerate() {
                    gains[(i * k_users + k, j)] = effective[user].dot(f).norm_sqr();
                }
            }
        }
        let mut links = Self::new(gains, k_users, beams.iter().map(|f| f.norm_squared()).collect())?;
        links.user_norm_sq = clusters
            .iter()
            .flat_map(|c| c.iter().map(|&u| effective[u].norm_squared()))
            .collect();
        Ok(links)
    }

    /// Replaces the channel norms used to rank users; defaults to the own-beam gains.
    pub fn with_user_norms(mut self, norms: Vec<f64>) -> Result<Self> {
        if norms.len() != self.gains.nrows() {
            return Err(Error::dims(self.gains.nrows(), norms.len()));
        }
        self.user_norm_sq = norms;
        Ok(self)
    }

    pub fn user_norm_sq(&self, i: usize, k: usize) -> f64 {
        self.user_norm_sq[i * self.users_per_cluster + k]
    }

    pub fn num_clusters(&self) -> usize {
        self.beam_norm_sq.len()
    }

    pub fn users_per_cluster(&self) -> usize {
        self.users_per_cluster
    }

    pub fn gain(&self, i: usize, k: usize, j: usize) -> f64 {
        self.gains[(i * self.users_per_cluster + k, j)]
    }

    pub fn own_gain(&self, i: usize, k: usize) -> f64 {
        self.gain(i, k, i)
    }

    pub fn beam_norm_sq(&self, i: usize) -> f64 {
        self.beam_norm_sq[i]
    }

    /// Ψ_{i,k}: power leaked from the other beams, each at its cluster's total power.
    pub fn interference(&self, i: usize, k: usize, beta: &DMatrix<f64>, config: &SystemConfig) -> f64 {
        (0..self.num_clusters())
            .filter(|&j| j != i)
            .map(|j| self.gain(i, k, j) * config.cluster_power * beta.row(j).sum())
            .sum()
    }

    pub fn sinr(&self, i: usize, k: usize, beta: &DMatrix<f64>, config: &SystemConfig) -> f64 {
        let row: Vec<f64> = beta.row(i).iter().copied().collect();
        sinr(
            k,
            self.own_gain(i, k),
            &row,
            self.interference(i, k, beta, config),
            config.cluster_power,
            config.noise_power,
        )
    }

    pub fn cluster_sinrs(&self, i: usize, beta: &DMatrix<f64>, config: &SystemConfig) -> Vec<f64> {
        (0..self.users_per_cluster).map(|k| self.sinr(i, k, beta, config)).collect()
    }

    pub fn cluster_rate_and_power(&self, i: usize, beta: &DMatrix<f64>, config: &SystemConfig) -> (f64, f64) {
        let row: Vec<f64> = beta.row(i).iter().copied().collect();
        cluster_rate_and_power(&self.cluster_sinrs(i, beta, config), &row, self.beam_norm_sq[i], config)
    }

    pub fn cluster_energy_efficiency(&self, i: usize, beta: &DMatrix<f64>, config: &SystemConfig) -> f64 {
        let (rate, power) = self.cluster_rate_and_power(i, beta, config);
        rate / power
    }

    /// Σ_i R_i / P_{i,T}.
    pub fn energy_efficiency(&self, beta: &DMatrix<f64>, config: &SystemConfig) -> f64 {
        (0..self.num_clusters())
            .map(|i| self.cluster_energy_efficiency(i, beta, config))
            .sum()
    }

    /// Mean ICI at the weakest user of each cluster.
    pub fn far_user_interference(&self, beta: &DMatrix<f64>, config: &SystemConfig) -> f64 {
        let total: f64 = (0..self.num_clusters())
            .map(|i| self.interference(i, 0, beta, config))
            .sum();
        total / self.num_clusters() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn broadside_response_is_all_ones() {
        let a = array_response(0.0, 4, 0.5).unwrap();
        assert!(a.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn endfire_half_wavelength_alternates() {
        let a = array_response(PI / 2.0, 2, 0.5).unwrap();
        assert!((a[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((a[1] - C64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn empty_array_rejected() {
        assert!(matches!(array_response(0.3, 0, 0.5), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn bs_irs_pathloss_reference_value() {
        // 1e-3 * 30^-2.2, evaluated with mpmath to 16 digits.
        let expected = 5.627_729_823_467_98e-7;
        let got = pathloss(1e-3, 30.0, 1.0, 2.2);
        assert!((got / expected - 1.0).abs() < 1e-12, "{got}");
    }

    #[test]
    fn cascaded_rows_are_scaled_by_conjugate_irs_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = SystemConfig {
            num_irs_elements: 6,
            num_bs_antennas: 5,
            num_clusters: 2,
            total_users: 4,
            ..SystemConfig::default()
        };
        let geo = UserGeometry::sample(&cfg, &mut rng);
        let set = synthesize_channels(&cfg, &geo, &mut rng).unwrap();
        for v in 0..set.num_users() {
            for n in 0..6 {
                for m in 0..5 {
                    let want = set.irs_user[v][n].conj() * set.bs_irs[v][(n, m)];
                    assert!((set.cascaded[v][(n, m)] - want).norm() <= 1e-15 * want.norm().max(1e-30));
                }
            }
        }
    }

    #[test]
    fn effective_channel_of_identity_is_conjugated_b() {
        let w = CMatrix::identity(3, 3);
        let b = CVector::from_element(3, C64::new(1.0, 0.0));
        let u = effective_channel(&w, &b).unwrap();
        assert!(u.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
        assert!(effective_channel(&w, &CVector::zeros(2)).is_err());
    }

    #[test]
    fn single_user_sinr_is_snr() {
        let g = sinr(0, 2.0, &[0.5], 0.0, 4.0, 0.1);
        assert!((g - 40.0).abs() < 1e-12);
    }

    #[test]
    fn unit_sinr_pair_gives_two_bits() {
        let cfg = SystemConfig::default();
        let (r, p) = cluster_rate_and_power(&[1.0, 1.0], &[0.0, 0.0], 1.0, &cfg);
        assert!((r - 2.0).abs() < 1e-12);
        assert!((p - cfg.circuit_power).abs() < 1e-15);
    }
}
