//! Built-in experiment catalog.

use mcf_core::flow::IntegratorConfig;

use crate::config::{
    AlphaProbe, ArrivalProbe, C3Probe, CorollaryProbe, ExperimentConfig, FrameChoice, Horizon, HuiskenProbe,
    InitialData, InitialKind, LemmaSweepProbe, Probes, RateFitProbe, SphereLawProbe, ZProbe,
};
use crate::error::{LabError, Result};

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    build: fn() -> ExperimentConfig,
}

impl Preset {
    pub fn config(&self) -> ExperimentConfig {
        (self.build)()
    }
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "sphere-exact",
        summary: "n=2 round sphere of radius 2: T = r0^2/4, r(t)^2 = r0^2 - 4t, curvature monitors below 1e-9",
        build: sphere_exact,
    },
    Preset {
        name: "rate-2n",
        summary: "Y_2 data with eps=0.01 (override n in 1..=3): a_2 and ||w|| decay at 2/n in s",
        build: rate_2n,
    },
    Preset {
        name: "lemma-sweep",
        summary: "randomized three-interval growth/decay sweep over exact modal solutions",
        build: lemma_sweep,
    },
    Preset {
        name: "huisken-monitors",
        summary: "n=3 Y_2 data: osc H, |grad H| and pinching decay at least at 2/n, Z approaches -1/n",
        build: huisken_monitors,
    },
    Preset {
        name: "non-c3",
        summary: "n=2 Y_2 data in both frames: arrival-time residual ~ rho^(2+2/n), profile follows Y_2",
        build: non_c3,
    },
    Preset {
        name: "corollary-c3",
        summary: "n=2 Y_3 data with the degree-2 tail tuned away: residual order above 3",
        build: corollary_c3,
    },
    Preset {
        name: "optimality",
        summary: "n=2 Y_4 data: quadratic forcing refills degree 2, so ||w|| decays no faster than 2/n",
        build: optimality,
    },
];

pub fn find(name: &str) -> Result<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| LabError::UnknownPreset(name.into()))
}

fn base(name: &str, n: usize, frame: FrameChoice) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        n,
        nodes: 32,
        frame,
        seed: 0,
        output_dir: None,
        initial: InitialData::default(),
        horizon: Horizon::default(),
        integrator: IntegratorConfig { tol: 1e-10, ..Default::default() },
        probes: Probes::default(),
    }
}

fn sphere_exact() -> ExperimentConfig {
    let mut c = base("sphere-exact", 2, FrameChoice::Both);
    c.initial = InitialData { kind: InitialKind::Sphere, radius: Some(2.0), ..Default::default() };
    c.probes.sphere_law = Some(SphereLawProbe::default());
    c.probes.arrival = Some(ArrivalProbe { rays: 8, ..Default::default() });
    c
}

fn rate_2n() -> ExperimentConfig {
    let mut c = base("rate-2n", 2, FrameChoice::Rescaled);
    c.probes.rate_fit = Some(RateFitProbe::default());
    c.probes.alpha = Some(AlphaProbe::default());
    c
}

fn lemma_sweep() -> ExperimentConfig {
    let mut c = base("lemma-sweep", 2, FrameChoice::None);
    c.seed = 0x5eed;
    c.probes.lemma_sweep = Some(LemmaSweepProbe::default());
    c
}

fn huisken_monitors() -> ExperimentConfig {
    let mut c = base("huisken-monitors", 3, FrameChoice::Rescaled);
    c.probes.huisken = Some(HuiskenProbe::default());
    c.probes.z = Some(ZProbe {});
    c
}

fn non_c3() -> ExperimentConfig {
    let mut c = base("non-c3", 2, FrameChoice::Both);
    c.probes.alpha = Some(AlphaProbe::default());
    c.probes.arrival = Some(ArrivalProbe::default());
    c.probes.c3 = Some(C3Probe::default());
    c
}

fn corollary_c3() -> ExperimentConfig {
    let mut c = base("corollary-c3", 2, FrameChoice::Mcf);
    c.initial = InitialData { degree: 3, tune_degree_two: true, ..Default::default() };
    c.probes.arrival = Some(ArrivalProbe::default());
    c.probes.corollary = Some(CorollaryProbe::default());
    c
}

fn optimality() -> ExperimentConfig {
    let mut c = base("optimality", 2, FrameChoice::Rescaled);
    c.initial = InitialData { degree: 4, ..Default::default() };
    c.probes.rate_fit =
        Some(RateFitProbe { degrees: vec![4], optimality: true, norm_window: Some([4.0, 15.0]), ..Default::default() });
    c
}
