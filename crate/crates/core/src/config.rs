//! Scenario configuration.
//!
//! Everything is stored in linear units. The text format is a flat list of
//! `key = value` lines whose keys are the field names below; powers are given
//! in dBm and ratios in dB there, and converted once on load.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// BS antennas, M.
    pub num_bs_antennas: usize,
    /// IRS reflecting elements, N.
    pub num_irs_elements: usize,
    /// Users sharing one beam, K.
    pub users_per_cluster: usize,
    /// Beams, I.
    pub num_clusters: usize,
    /// Users dropped around the IRS, V.
    pub total_users: usize,
    /// Per-cluster transmit power P_i (W).
    pub cluster_power: f64,
    /// Per-cluster power budget P_max (W).
    pub max_power: f64,
    /// Circuit power P_c (W).
    pub circuit_power: f64,
    /// Receiver noise power σ² (W).
    pub noise_power: f64,
    pub bandwidth: f64,
    /// Rician factor of the BS-IRS link, linear.
    pub rician_bs_irs: f64,
    /// Rician factor of the IRS-user links, linear.
    pub rician_irs_user: f64,
    /// Path loss at the reference distance, linear.
    pub ref_pathloss: f64,
    pub ref_distance: f64,
    pub bs_irs_distance: f64,
    pub pathloss_exp_bs_irs: f64,
    pub pathloss_exp_irs_user: f64,
    pub user_radius: f64,
    /// SINR floor γ_min, linear.
    pub min_sinr: f64,
    /// Minimum received power gap for SIC, P_g (W).
    pub sic_power_gap: f64,
    /// Clustering correlation gate Δ.
    pub correlation_threshold: f64,
    /// Element spacing over wavelength for both arrays.
    pub element_spacing_ratio: f64,
    pub rng_seed: u64,

    /// Relative Dinkelbach residual at which stage 1 stops.
    pub stage1_tolerance: f64,
    pub stage1_max_iters: usize,
    /// Subgradient iterations per Dinkelbach step.
    pub stage1_dual_iters: usize,
    /// The c of the c/√t subgradient schedule.
    pub stage1_step_scale: f64,
    /// Relative EE change at which stage 2 stops.
    pub stage2_tolerance: f64,
    pub stage2_max_iters: usize,
    pub penalty_initial: f64,
    pub penalty_growth: f64,
    pub penalty_max: f64,
    /// Exact rank-one penalty, relative to tr(B), that counts as rank one.
    pub penalty_tolerance: f64,
    pub randomization_candidates: usize,
    pub solver_tolerance: f64,
    pub solver_max_iters: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let noise_power = dbm_to_watts(-114.0);
        SystemConfig {
            num_bs_antennas: 8,
            num_irs_elements: 32,
            users_per_cluster: 2,
            num_clusters: 5,
            total_users: 30,
            cluster_power: dbm_to_watts(30.0),
            max_power: dbm_to_watts(30.0),
            circuit_power: dbm_to_watts(30.0),
            noise_power,
            bandwidth: 1.0,
            rician_bs_irs: db_to_linear(3.0),
            rician_irs_user: db_to_linear(3.0),
            ref_pathloss: db_to_linear(-30.0),
            ref_distance: 1.0,
            bs_irs_distance: 30.0,
            pathloss_exp_bs_irs: 2.2,
            pathloss_exp_irs_user: 2.2,
            user_radius: 10.0,
            min_sinr: db_to_linear(3.0),
            sic_power_gap: 100.0 * noise_power,
            correlation_threshold: 0.7,
            element_spacing_ratio: 0.5,
            rng_seed: 1,
            stage1_tolerance: 1e-4,
            stage1_max_iters: 100,
            stage1_dual_iters: 400,
            stage1_step_scale: 1.0,
            stage2_tolerance: 1e-4,
            stage2_max_iters: 20,
            penalty_initial: 1e2,
            penalty_growth: 10.0,
            penalty_max: 1e6,
            penalty_tolerance: 1e-3,
            randomization_candidates: 50,
            solver_tolerance: 1e-6,
            solver_max_iters: 400,
        }
    }
}

#[derive(Clone, Copy)]
enum Unit {
    Count,
    Plain,
    Dbm,
    Db,
}

impl Unit {
    fn comment(self) -> &'static str {
        match self {
            Unit::Count => "count",
            Unit::Plain => "",
            Unit::Dbm => "dBm",
            Unit::Db => "dB",
        }
    }
}

// (key, unit) in file order.
const KEYS: &[(&str, Unit)] = &[
    ("num_bs_antennas", Unit::Count),
    ("num_irs_elements", Unit::Count),
    ("users_per_cluster", Unit::Count),
    ("num_clusters", Unit::Count),
    ("total_users", Unit::Count),
    ("cluster_power", Unit::Dbm),
    ("max_power", Unit::Dbm),
    ("circuit_power", Unit::Dbm),
    ("noise_power", Unit::Dbm),
    ("bandwidth", Unit::Plain),
    ("rician_bs_irs", Unit::Db),
    ("rician_irs_user", Unit::Db),
    ("ref_pathloss", Unit::Db),
    ("ref_distance", Unit::Plain),
    ("bs_irs_distance", Unit::Plain),
    ("pathloss_exp_bs_irs", Unit::Plain),
    ("pathloss_exp_irs_user", Unit::Plain),
    ("user_radius", Unit::Plain),
    ("min_sinr", Unit::Db),
    ("sic_power_gap", Unit::Dbm),
    ("correlation_threshold", Unit::Plain),
    ("element_spacing_ratio", Unit::Plain),
    ("rng_seed", Unit::Count),
    ("stage1_tolerance", Unit::Plain),
    ("stage1_max_iters", Unit::Count),
    ("stage1_dual_iters", Unit::Count),
    ("stage1_step_scale", Unit::Plain),
    ("stage2_tolerance", Unit::Plain),
    ("stage2_max_iters", Unit::Count),
    ("penalty_initial", Unit::Plain),
    ("penalty_growth", Unit::Plain),
    ("penalty_max", Unit::Plain),
    ("penalty_tolerance", Unit::Plain),
    ("randomization_candidates", Unit::Count),
    ("solver_tolerance", Unit::Plain),
    ("solver_max_iters", Unit::Count),
];

impl SystemConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses the flat key-value format. Missing keys keep their defaults;
    /// `sic_power_gap` defaults to 100 σ² of the parsed noise power.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SystemConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Config { line: line_no, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let &(known, _) = KEYS
                .iter()
                .find(|(k, _)| *k == key)
                .ok_or_else(|| err(format!("unknown key `{key}`")))?;
            if seen.contains(&known) {
                return Err(err(format!("duplicate key `{key}`")));
            }
            seen.push(known);
            cfg.assign(known, value).map_err(err)?;
        }
        if !seen.contains(&"sic_power_gap") {
            cfg.sic_power_gap = 100.0 * cfg.noise_power;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn assign(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let float = || {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{key}`: `{value}` is not a finite number"))
        };
        let count = || {
            value
                .parse::<u64>()
                .map_err(|_| format!("`{key}`: `{value}` is not a nonnegative integer"))
        };
        let usize_count = || count().map(|v| v as usize);
        match key {
            "num_bs_antennas" => self.num_bs_antennas = usize_count()?,
            "num_irs_elements" => self.num_irs_elements = usize_count()?,
            "users_per_cluster" => self.users_per_cluster = usize_count()?,
            "num_clusters" => self.num_clusters = usize_count()?,
            "total_users" => self.total_users = usize_count()?,
            "cluster_power" => self.cluster_power = dbm_to_watts(float()?),
            "max_power" => self.max_power = dbm_to_watts(float()?),
            "circuit_power" => self.circuit_power = dbm_to_watts(float()?),
            "noise_power" => self.noise_power = dbm_to_watts(float()?),
            "bandwidth" => self.bandwidth = float()?,
            "rician_bs_irs" => self.rician_bs_irs = db_to_linear(float()?),
            "rician_irs_user" => self.rician_irs_user = db_to_linear(float()?),
            "ref_pathloss" => self.ref_pathloss = db_to_linear(float()?),
            "ref_distance" => self.ref_distance = float()?,
            "bs_irs_distance" => self.bs_irs_distance = float()?,
            "pathloss_exp_bs_irs" => self.pathloss_exp_bs_irs = float()?,
            "pathloss_exp_irs_user" => self.pathloss_exp_irs_user = float()?,
            "user_radius" => self.user_radius = float()?,
            "min_sinr" => self.min_sinr = db_to_linear(float()?),
            "sic_power_gap" => self.sic_power_gap = dbm_to_watts(float()?),
            "correlation_threshold" => self.correlation_threshold = float()?,
            "element_spacing_ratio" => self.element_spacing_ratio = float()?,
            "rng_seed" => self.rng_seed = count()?,
            "stage1_tolerance" => self.stage1_tolerance = float()?,
            "stage1_max_iters" => self.stage1_max_iters = usize_count()?,
            "stage1_dual_iters" => self.stage1_dual_iters = usize_count()?,
            "stage1_step_scale" => self.stage1_step_scale = float()?,
            "stage2_tolerance" => self.stage2_tolerance = float()?,
            "stage2_max_iters" => self.stage2_max_iters = usize_count()?,
            "penalty_initial" => self.penalty_initial = float()?,
            "penalty_growth" => self.penalty_growth = float()?,
            "penalty_max" => self.penalty_max = float()?,
            "penalty_tolerance" => self.penalty_tolerance = float()?,
            "randomization_candidates" => self.randomization_candidates = usize_count()?,
            "solver_tolerance" => self.solver_tolerance = float()?,
            "solver_max_iters" => self.solver_max_iters = usize_count()?,
            _ => unreachable!("key table and assign are out of sync: {key}"),
        }
        Ok(())
    }

    fn value_text(&self, key: &str) -> String {
        match key {
            "num_bs_antennas" => self.num_bs_antennas.to_string(),
            "num_irs_elements" => self.num_irs_elements.to_string(),
            "users_per_cluster" => self.users_per_cluster.to_string(),
            "num_clusters" => self.num_clusters.to_string(),
            "total_users" => self.total_users.to_string(),
            "cluster_power" => watts_to_dbm(self.cluster_power).to_string(),
            "max_power" => watts_to_dbm(self.max_power).to_string(),
            "circuit_power" => watts_to_dbm(self.circuit_power).to_string(),
            "noise_power" => watts_to_dbm(self.noise_power).to_string(),
            "bandwidth" => self.bandwidth.to_string(),
            "rician_bs_irs" => linear_to_db(self.rician_bs_irs).to_string(),
            "rician_irs_user" => linear_to_db(self.rician_irs_user).to_string(),
            "ref_pathloss" => linear_to_db(self.ref_pathloss).to_string(),
            "ref_distance" => self.ref_distance.to_string(),
            "bs_irs_distance" => self.bs_irs_distance.to_string(),
            "pathloss_exp_bs_irs" => self.pathloss_exp_bs_irs.to_string(),
            "pathloss_exp_irs_user" => self.pathloss_exp_irs_user.to_string(),
            "user_radius" => self.user_radius.to_string(),
            "min_sinr" => linear_to_db(self.min_sinr).to_string(),
            "sic_power_gap" => watts_to_dbm(self.sic_power_gap).to_string(),
            "correlation_threshold" => self.correlation_threshold.to_string(),
            "element_spacing_ratio" => self.element_spacing_ratio.to_string(),
            "rng_seed" => self.rng_seed.to_string(),
            "stage1_tolerance" => self.stage1_tolerance.to_string(),
            "stage1_max_iters" => self.stage1_max_iters.to_string(),
            "stage1_dual_iters" => self.stage1_dual_iters.to_string(),
            "stage1_step_scale" => self.stage1_step_scale.to_string(),
            "stage2_tolerance" => self.stage2_tolerance.to_string(),
            "stage2_max_iters" => self.stage2_max_iters.to_string(),
            "penalty_initial" => self.penalty_initial.to_string(),
            "penalty_growth" => self.penalty_growth.to_string(),
            "penalty_max" => self.penalty_max.to_string(),
            "penalty_tolerance" => self.penalty_tolerance.to_string(),
            "randomization_candidates" => self.randomization_candidates.to_string(),
            "solver_tolerance" => self.solver_tolerance.to_string(),
            "solver_max_iters" => self.solver_max_iters.to_string(),
            _ => unreachable!("key table and value_text are out of sync: {key}"),
        }
    }

    /// Renders the config in the same format [`SystemConfig::parse`] reads.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        for &(key, unit) in KEYS {
            let value = self.value_text(key);
            match unit.comment() {
                "" => writeln!(out, "{key} = {value}"),
                c => writeln!(out, "{key} = {value}  # {c}"),
            }
            .expect("writing to a String");
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        for (name, v) in [
            ("num_bs_antennas", self.num_bs_antennas),
            ("num_irs_elements", self.num_irs_elements),
            ("users_per_cluster", self.users_per_cluster),
            ("num_clusters", self.num_clusters),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.num_bs_antennas + 1 <= self.num_clusters {
            return bad(format!(
                "need M > I - 1 for zero forcing, got M = {} and I = {}",
                self.num_bs_antennas, self.num_clusters
            ));
        }
        if self.total_users < self.users_per_cluster * self.num_clusters {
            return bad(format!(
                "total_users {} is below K*I = {}",
                self.total_users,
                self.users_per_cluster * self.num_clusters
            ));
        }
        for (name, v) in [
            ("cluster_power", self.cluster_power),
            ("max_power", self.max_power),
            ("circuit_power", self.circuit_power),
            ("noise_power", self.noise_power),
            ("bandwidth", self.bandwidth),
            ("ref_pathloss", self.ref_pathloss),
            ("ref_distance", self.ref_distance),
            ("bs_irs_distance", self.bs_irs_distance),
            ("user_radius", self.user_radius),
            ("sic_power_gap", self.sic_power_gap),
            ("element_spacing_ratio", self.element_spacing_ratio),
            ("stage1_tolerance", self.stage1_tolerance),
            ("stage1_step_scale", self.stage1_step_scale),
            ("stage2_tolerance", self.stage2_tolerance),
            ("penalty_initial", self.penalty_initial),
            ("penalty_max", self.penalty_max),
            ("penalty_tolerance", self.penalty_tolerance),
            ("solver_tolerance", self.solver_tolerance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [
            ("rician_bs_irs", self.rician_bs_irs),
            ("rician_irs_user", self.rician_irs_user),
            ("min_sinr", self.min_sinr),
            ("pathloss_exp_bs_irs", self.pathloss_exp_bs_irs),
            ("pathloss_exp_irs_user", self.pathloss_exp_irs_user),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be nonnegative and finite, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.correlation_threshold) {
            return bad(format!(
                "correlation_threshold must lie in [0, 1], got {}",
                self.correlation_threshold
            ));
        }
        if self.penalty_growth < 1.0 {
            return bad("penalty_growth must be at least 1".into());
        }
        if self.stage1_max_iters == 0 || self.stage2_max_iters == 0 || self.stage1_dual_iters == 0 {
            return bad("iteration limits must be at least 1".into());
        }
        Ok(())
    }

    /// Upper bound on Σβ within one cluster.
    pub fn beta_budget(&self) -> f64 {
        self.max_power / self.cluster_power
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matches_reference_scenario() {
        let c = SystemConfig::default();
        assert!((c.cluster_power - 1.0).abs() < 1e-12);
        assert!((c.noise_power / 3.981_071_705_534_969e-15 - 1.0).abs() < 1e-12);
        assert!((c.min_sinr - 1.995_262_314_968_879_6).abs() < 1e-12);
        c.validate().unwrap();
    }

    #[test]
    fn parse_converts_units_and_defaults_sic_gap() {
        let cfg = SystemConfig::parse(
            "# comment\nnum_bs_antennas = 10\nnoise_power = -100  # dBm\nmin_sinr = 0\n",
        )
        .unwrap();
        assert_eq!(cfg.num_bs_antennas, 10);
        assert!((cfg.noise_power - 1e-13).abs() < 1e-25);
        assert!((cfg.sic_power_gap - 1e-11).abs() < 1e-23);
        assert!((cfg.min_sinr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_and_duplicate_keys_rejected() {
        let e = SystemConfig::parse("bogus = 1").unwrap_err();
        assert!(matches!(e, Error::Config { line: 1, .. }), "{e}");
        let e = SystemConfig::parse("bandwidth = 1\n\nbandwidth = 2").unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, .. }), "{e}");
        assert!(SystemConfig::parse("bandwidth 1").is_err());
        assert!(SystemConfig::parse("bandwidth = nan").is_err());
    }

    #[test]
    fn invariants_enforced() {
        assert!(SystemConfig::parse("num_bs_antennas = 4").is_err());
        assert!(SystemConfig::parse("total_users = 9").is_err());
        assert!(SystemConfig::parse("correlation_threshold = 1.5").is_err());
        assert!(SystemConfig::parse("user_radius = 0").is_err());
    }

    #[test]
    fn text_round_trip() {
        let c = SystemConfig {
            num_irs_elements: 48,
            rng_seed: 99,
            ..SystemConfig::default()
        };
        let back = SystemConfig::parse(&c.to_config_text()).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        assert_eq!(back.num_irs_elements, 48);
        assert_eq!(back.rng_seed, 99);
        assert!(rel(back.noise_power, c.noise_power));
        assert!(rel(back.sic_power_gap, c.sic_power_gap));
        assert!(rel(back.ref_pathloss, c.ref_pathloss));
    }
}
