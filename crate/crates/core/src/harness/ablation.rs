use rayon::prelude::*;

use super::run::{run_closed_loop, Metrics, RunStatus};
use super::scenario::Scenario;
use super::HarnessError;

/// Parameter varied across the runs of an ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    /// Measurement noise: `sigma_v = sigma_w = value`, one seed per run.
    NoiseSigma,
    /// Plant payload mass as a multiple of the nominal; the controller keeps
    /// the nominal model.
    MassFactor,
    /// Safety margin added to every obstacle radius (m).
    SafetyMargin,
}

impl std::str::FromStr for Sweep {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "noise" => Ok(Sweep::NoiseSigma),
            "mass" => Ok(Sweep::MassFactor),
            "margin" => Ok(Sweep::SafetyMargin),
            other => Err(HarnessError::Scenario(format!("unknown sweep '{other}', expected noise, mass or margin"))),
        }
    }
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::NoiseSigma => "noise",
            Sweep::MassFactor => "mass",
            Sweep::SafetyMargin => "margin",
        }
    }

    /// Copy of `base` with the swept parameter set to `value`. `index` picks
    /// the noise seed.
    pub fn apply(&self, base: &Scenario, value: f64, index: usize) -> Result<Scenario, HarnessError> {
        let mut s = base.clone();
        match self {
            Sweep::NoiseSigma => {
                s.noise.sigma_v = value;
                s.noise.sigma_w = value;
                s.noise.seed = base.noise.seed.wrapping_add(index as u64);
            }
            Sweep::MassFactor => {
                s.controller_model_mass = Some(base.controller_model_mass.unwrap_or(base.vehicle.payload_mass));
                s.vehicle.payload_mass = base.vehicle.payload_mass * value;
            }
            Sweep::SafetyMargin => {
                for o in &mut s.obstacles {
                    o.margin = value;
                }
            }
        }
        s.name = format!("{}_{}_{value}", base.name, self.name());
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub value: f64,
    pub metrics: Metrics,
    pub status: RunStatus,
}

/// One closed-loop run per value, in parallel. Rows keep the order of
/// `values`.
pub fn run_ablation(base: &Scenario, sweep: Sweep, values: &[f64]) -> Result<Vec<AblationRow>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Scenario("ablation needs at least one value".into()));
    }
    let scenarios = values
        .iter()
        .enumerate()
        .map(|(i, v)| sweep.apply(base, *v, i))
        .collect::<Result<Vec<_>, _>>()?;
    scenarios
        .par_iter()
        .zip(values.par_iter())
        .map(|(s, v)| {
            let log = run_closed_loop(s)?;
            Ok(AblationRow {
                value: *v,
                metrics: log.metrics,
                status: log.status,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ReferenceConfig;
    use crate::hull::Obstacle;

    fn base() -> Scenario {
        Scenario {
            schema: 1,
            name: "base".into(),
            duration: 1.0,
            control_dt: 0.05,
            plant_dt: 0.001,
            vehicle: Default::default(),
            geometry: Default::default(),
            initial_position: [0.0; 3],
            reference: ReferenceConfig::default(),
            obstacles: vec![Obstacle::sphere([6.0, 0.0, -5.0], 0.5, 0.5)],
            mpc: Default::default(),
            ecbf: Default::default(),
            safety_filter: true,
            noise: Default::default(),
            controller_model_mass: None,
            settle_time: 5.0,
        }
    }

    #[test]
    fn mass_sweep_changes_only_the_plant() {
        let s = Sweep::MassFactor.apply(&base(), 1.1, 0).unwrap();
        assert!((s.plant_params().unwrap().payload_mass() - 3.41).abs() < 1e-12);
        assert_eq!(s.controller_params().unwrap().payload_mass(), 3.1);
    }

    #[test]
    fn noise_sweep_uses_distinct_seeds() {
        let a = Sweep::NoiseSigma.apply(&base(), 0.01, 0).unwrap();
        let b = Sweep::NoiseSigma.apply(&base(), 0.01, 1).unwrap();
        assert_ne!(a.noise.seed, b.noise.seed);
        assert_eq!(a.noise.sigma_w, 0.01);
    }

    #[test]
    fn margin_sweep_sets_every_obstacle() {
        let s = Sweep::SafetyMargin.apply(&base(), 1.0, 0).unwrap();
        assert!(s.obstacles.iter().all(|o| o.margin == 1.0));
    }

    #[test]
    fn sweep_names_parse() {
        for name in ["noise", "mass", "margin"] {
            assert_eq!(name.parse::<Sweep>().unwrap().name(), name);
        }
        assert!("speed".parse::<Sweep>().is_err());
    }

    #[test]
    fn empty_sweep_is_rejected() {
        assert!(run_ablation(&base(), Sweep::NoiseSigma, &[]).is_err());
    }
}
