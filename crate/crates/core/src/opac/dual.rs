use super::pac::ClusterDuals;

/// Slacks of the normalised constraint rows; nonnegative means satisfied.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSlacks {
    pub power: f64,
    pub sinr: Vec<f64>,
    pub sic: Vec<f64>,
}

impl ConstraintSlacks {
    /// Largest violation, zero when every row holds.
    pub fn max_violation(&self) -> f64 {
        std::iter::once(self.power)
            .chain(self.sinr.iter().copied())
            .chain(self.sic.iter().copied())
            .map(|s| (-s).max(0.0))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub power: f64,
    pub sinr: f64,
    pub sic: f64,
}

impl StepSizes {
    pub fn uniform(step: f64) -> Self {
        StepSizes {
            power: step,
            sinr: step,
            sic: step,
        }
    }

    /// ω(t) = c / √t for iteration t ≥ 1.
    pub fn diminishing(c: f64, t: usize) -> Self {
        Self::uniform(c / (t.max(1) as f64).sqrt())
    }
}

/// Projected subgradient step on the dual: λ ← [λ − ω · slack]⁺.
pub fn subgradient_update(duals: &ClusterDuals, slacks: &ConstraintSlacks, steps: StepSizes) -> ClusterDuals {
    let step = |d: f64, w: f64, s: f64| (d - w * s).max(0.0);
    ClusterDuals {
        power: step(duals.power, steps.power, slacks.power),
        sinr: duals
            .sinr
            .iter()
            .zip(&slacks.sinr)
            .map(|(&d, &s)| step(d, steps.sinr, s))
            .collect(),
        sic: duals
            .sic
            .iter()
            .zip(&slacks.sic)
            .map(|(&d, &s)| step(d, steps.sic, s))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slacks(power: f64, sinr: f64, sic: f64) -> ConstraintSlacks {
        ConstraintSlacks {
            power,
            sinr: vec![sinr, sinr],
            sic: vec![sic],
        }
    }

    #[test]
    fn satisfied_rows_keep_zero_duals() {
        let d = subgradient_update(&ClusterDuals::zeros(2), &slacks(0.3, 0.1, 0.2), StepSizes::uniform(0.5));
        assert_eq!(d, ClusterDuals::zeros(2));
    }

    #[test]
    fn violated_power_raises_its_dual() {
        let d = subgradient_update(&ClusterDuals::zeros(2), &slacks(-0.2, 0.1, 0.1), StepSizes::uniform(0.5));
        assert!(d.power > 0.0);
        assert_eq!(d.sinr, vec![0.0, 0.0]);
    }

    #[test]
    fn max_violation_picks_the_worst_row() {
        assert_eq!(slacks(-0.1, -0.4, 0.2).max_violation(), 0.4);
        assert_eq!(slacks(0.1, 0.4, 0.2).max_violation(), 0.0);
    }
}
