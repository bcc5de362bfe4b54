use serde::{Deserialize, Serialize};

use super::network::{NetworkTopology, TopologyKind};
use crate::error::{FusionError, Result};
use crate::gm::GmReduction;
use crate::mb::{BirthConfig, MbReduction, MotionModel, Region, SensorModel};
use crate::pgci::PgciConfig;

/// One simulated object, alive for steps `birth <= k < death`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub birth: usize,
    pub death: usize,
    /// `[px, py, vx, vy]` at the birth step.
    pub state: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionConfig {
    pub dt: f64,
    pub sigma_v: f64,
    pub survival: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            sigma_v: 5.0,
            survival: 0.98,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub sigma: f64,
    pub detection: f64,
    pub clutter_rate: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            detection: 0.95,
            clutter_rate: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub sensors: usize,
    pub topology: TopologyKind,
    /// Links for `topology = "custom"`.
    pub edges: Vec<(usize, usize)>,
    /// Node whose fused output is evaluated.
    pub designated: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            sensors: 2,
            topology: TopologyKind::Line,
            edges: Vec::new(),
            designated: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMode {
    /// Each Bernoulli component is updated as its own Bernoulli filter.
    Track,
    /// Cardinality-balanced MeMBer update.
    CbMember,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BirthMode {
    /// One component per object at its true initial state, at step 0.
    Known,
    /// Births driven by the previous scan.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub update: UpdateMode,
    pub birth: BirthMode,
    pub known_existence: f64,
    pub known_position_std: f64,
    pub known_velocity_std: f64,
    pub birth_max_existence: f64,
    pub birth_expected: f64,
    pub birth_velocity_std: f64,
    pub prune: f64,
    pub merge: f64,
    pub max_gaussians: usize,
    pub truncation: f64,
    pub max_bernoulli: usize,
    pub extraction: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            update: UpdateMode::CbMember,
            birth: BirthMode::Adaptive,
            known_existence: 0.5,
            known_position_std: 10.0,
            known_velocity_std: 10.0,
            birth_max_existence: 0.03,
            birth_expected: 0.1,
            birth_velocity_std: 10.0,
            prune: 1e-5,
            merge: 4.0,
            max_gaussians: 5,
            truncation: 1e-4,
            max_bernoulli: 100,
            extraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub gamma: f64,
    pub cluster_cap: u64,
    pub naive_cap: u64,
    pub fallback: bool,
    /// Also run the exhaustive fusion at every step and record its OSPA.
    pub compare_naive: bool,
    /// Every node replaces its posterior with its fused density.
    pub feedback: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            gamma: 4.0,
            cluster_cap: 1_000_000,
            naive_cap: 10_000_000,
            fallback: false,
            compare_naive: false,
            feedback: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OspaConfig {
    pub cutoff: f64,
    pub order: f64,
}

impl Default for OspaConfig {
    fn default() -> Self {
        Self {
            cutoff: 100.0,
            order: 2.0,
        }
    }
}

/// Built-in object layouts that depend on the experiment scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    Scenario1,
    Scenario2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

/// Everything a Monte-Carlo experiment needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub steps: usize,
    pub runs: usize,
    pub seed: u64,
    /// Propagate ground truth with sampled process noise.
    #[serde(default)]
    pub truth_process_noise: bool,
    pub region: Region,
    #[serde(default)]
    pub layout: Option<Layout>,
    #[serde(default)]
    pub motion: MotionConfig,
    #[serde(default)]
    pub sensor: SensorConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub fusion: FusionConfig,
    #[serde(default)]
    pub ospa: OspaConfig,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
}

impl ScenarioConfig {
    /// Two sensors, three objects alive for all 65 steps, births known.
    pub fn scenario1() -> Self {
        let objects = vec![
            ObjectSpec {
                birth: 0,
                death: 65,
                state: [-400.0, 250.0, 10.0, 0.0],
            },
            ObjectSpec {
                birth: 0,
                death: 65,
                state: [-350.0, -300.0, 8.0, 4.0],
            },
            ObjectSpec {
                birth: 0,
                death: 65,
                state: [400.0, -100.0, -3.0, -5.0],
            },
        ];
        Self {
            name: "scenario1".into(),
            steps: 65,
            runs: 50,
            seed: 1,
            truth_process_noise: false,
            region: Region::square(500.0),
            layout: Some(Layout::Scenario1),
            motion: MotionConfig::default(),
            sensor: SensorConfig::default(),
            network: NetworkConfig::default(),
            filter: FilterConfig {
                update: UpdateMode::Track,
                birth: BirthMode::Known,
                ..FilterConfig::default()
            },
            fusion: FusionConfig {
                compare_naive: true,
                feedback: true,
                ..FusionConfig::default()
            },
            ospa: OspaConfig::default(),
            objects,
        }
    }

    /// Ten objects, three sensors on a line, 100 steps, adaptive birth.
    pub fn scenario2_desk() -> Self {
        let mut cfg = Self {
            name: "scenario2".into(),
            steps: 100,
            runs: 50,
            seed: 2,
            truth_process_noise: false,
            region: Region::square(2000.0),
            layout: Some(Layout::Scenario2),
            motion: MotionConfig::default(),
            sensor: SensorConfig::default(),
            network: NetworkConfig {
                sensors: 3,
                topology: TopologyKind::Line,
                edges: Vec::new(),
                designated: 1,
            },
            filter: FilterConfig::default(),
            fusion: FusionConfig {
                fallback: true,
                ..FusionConfig::default()
            },
            ospa: OspaConfig::default(),
            objects: Vec::new(),
        };
        cfg.apply_scale(Scale::Desk);
        cfg
    }

    /// Forty objects, six sensors, 200 steps, 200 runs.
    pub fn scenario2_full() -> Self {
        let mut cfg = Self::scenario2_desk();
        cfg.apply_scale(Scale::Full);
        cfg
    }

    /// Regenerates the object set and network of a built-in layout. Configs
    /// without a layout, or with the fixed Scenario 1 layout, are unchanged.
    pub fn apply_scale(&mut self, scale: Scale) {
        if self.layout != Some(Layout::Scenario2) {
            return;
        }
        match scale {
            Scale::Desk => {
                self.steps = 100;
                self.runs = 50;
                self.network = NetworkConfig {
                    sensors: 3,
                    topology: TopologyKind::Line,
                    edges: Vec::new(),
                    designated: 1,
                };
                self.objects = scenario2_desk_objects();
            }
            Scale::Full => {
                self.steps = 200;
                self.runs = 200;
                self.network = NetworkConfig {
                    sensors: 6,
                    topology: TopologyKind::Custom,
                    edges: vec![(4, 0), (4, 2), (4, 3), (4, 5), (0, 1)],
                    designated: 4,
                };
                self.objects = scenario2_full_objects();
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FusionError::InvalidConfig(msg));
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        self.region.validate()?;
        for (i, o) in self.objects.iter().enumerate() {
            if o.birth >= o.death || o.death > self.steps {
                return bad(format!(
                    "object {i}: need birth < death <= steps, got {} / {} / {}",
                    o.birth, o.death, self.steps
                ));
            }
            if !self.region.contains(o.state[0], o.state[1]) {
                return bad(format!("object {i} starts outside the region"));
            }
        }
        let m = &self.motion;
        if !(m.dt > 0.0) || !(m.sigma_v >= 0.0) || !(0.0..=1.0).contains(&m.survival) {
            return bad(format!("invalid motion parameters {m:?}"));
        }
        let s = &self.sensor;
        if !(s.sigma > 0.0) || !(0.0..=1.0).contains(&s.detection) || !(s.clutter_rate >= 0.0) {
            return bad(format!("invalid sensor parameters {s:?}"));
        }
        if self.filter.update == UpdateMode::Track && !(s.clutter_rate > 0.0) {
            return bad("the track update needs a positive clutter rate".into());
        }
        let f = &self.filter;
        if f.max_gaussians == 0 || f.max_bernoulli == 0 || !(f.merge >= 0.0) || !(f.prune >= 0.0) {
            return bad(format!("invalid reduction parameters {f:?}"));
        }
        if !(self.fusion.gamma > 0.0) {
            return bad(format!("gamma must be positive, got {}", self.fusion.gamma));
        }
        if !(self.ospa.cutoff > 0.0) || !(self.ospa.order >= 1.0) {
            return bad(format!("invalid OSPA parameters {:?}", self.ospa));
        }
        self.topology()?;
        Ok(())
    }

    pub fn topology(&self) -> Result<NetworkTopology> {
        let n = &self.network;
        let topo = NetworkTopology::build(n.topology, n.sensors, &n.edges)?;
        if n.designated >= n.sensors {
            return Err(FusionError::InvalidConfig(format!(
                "designated node {} out of range for {} sensors",
                n.designated, n.sensors
            )));
        }
        Ok(topo)
    }

    pub fn motion_model(&self) -> MotionModel<f64> {
        MotionModel::constant_velocity(self.motion.dt, self.motion.sigma_v, self.motion.survival)
    }

    pub fn sensor_model(&self) -> SensorModel<f64> {
        SensorModel::position(
            self.sensor.sigma,
            self.sensor.detection,
            self.sensor.clutter_rate,
            self.region,
        )
    }

    pub fn gm_reduction(&self) -> GmReduction<f64> {
        GmReduction {
            prune_threshold: self.filter.prune,
            merge_threshold: self.filter.merge,
            max_components: self.filter.max_gaussians,
        }
    }

    pub fn mb_reduction(&self) -> MbReduction<f64> {
        MbReduction {
            truncation: self.filter.truncation,
            max_components: self.filter.max_bernoulli,
            gm: self.gm_reduction(),
        }
    }

    pub fn birth_config(&self) -> BirthConfig<f64> {
        BirthConfig {
            max_existence: self.filter.birth_max_existence,
            expected_births: self.filter.birth_expected,
            position_std: self.sensor.sigma,
            velocity_std: self.filter.birth_velocity_std,
        }
    }

    pub fn pgci_config(&self) -> PgciConfig<f64> {
        PgciConfig {
            gamma: self.fusion.gamma,
            cluster_cap: self.fusion.cluster_cap,
            naive_cap: self.fusion.naive_cap,
            fallback: self.fusion.fallback,
            reduction: self.gm_reduction(),
            parallel: true,
        }
    }
}

fn scenario2_desk_objects() -> Vec<ObjectSpec> {
    let births = [0, 0, 0, 0, 0, 10, 20, 30, 40, 50];
    let deaths = [100, 100, 70, 100, 90, 100, 100, 80, 100, 100];
    (0..10)
        .map(|i| {
            let x = -1600.0 + 800.0 * (i % 5) as f64;
            let (y, vy) = if i < 5 {
                (1000.0, 6.0)
            } else {
                (-1000.0, -6.0)
            };
            ObjectSpec {
                birth: births[i],
                death: deaths[i],
                state: [x, y, 3.0, vy],
            }
        })
        .collect()
}

fn scenario2_full_objects() -> Vec<ObjectSpec> {
    (0..40)
        .map(|i| {
            let (col, row) = (i % 8, i / 8);
            let x = -1750.0 + 450.0 * col as f64;
            let y = -1600.0 + 800.0 * row as f64;
            let birth = (i % 5) * 20;
            let death = (birth + 120 + (i % 3) * 20).min(200);
            let vy = if row % 2 == 0 { 2.0 } else { -2.0 };
            ObjectSpec {
                birth,
                death,
                state: [x, y, 2.0, vy],
            }
        })
        .collect()
}
