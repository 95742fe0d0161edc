//! The run configuration: TOML with one table per concern.
//!
//! Every key has a default except `physics.g`, `physics.eta` and
//! `physics.beta`. Unknown keys are rejected with their location.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boundary::{BoundaryDatum, BoundaryTable};
use crate::characteristics::StepRule;
use crate::dynamic::{DynamicConfig, InitialPerturbation, Source, TimeScheme};
use crate::error::{Error, Result};
use crate::grid::{PhaseGrid, SpatialGrid, VelocityGrid};
use crate::io::snapshot::Snapshot;
use crate::model::{Params, Sign};
use crate::steady::{SteadyConfig, SteadySeed};
use crate::verify::{Horizon, Scenario, VerifySettings};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub physics: PhysicsSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub boundary: BoundarySection,
    #[serde(default)]
    pub steady: SteadySection,
    #[serde(default)]
    pub dynamic: DynamicSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub g: f64,
    /// `+1` attracting, `-1` repelling.
    pub eta: i64,
    pub beta: f64,
    /// Defaults to `2β/3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_tilde: Option<f64>,
    #[serde(default = "default_green_constant")]
    pub green_constant: f64,
}

fn default_green_constant() -> f64 {
    4.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    #[serde(rename = "L3")]
    pub l3: f64,
    pub m1: usize,
    pub m2: usize,
    pub m3: usize,
    pub vmax: f64,
    pub vertical_refinement: f64,
}

impl Default for GridSection {
    fn default() -> GridSection {
        GridSection {
            n1: 1,
            n2: 1,
            n3: 128,
            l3: 1.85,
            m1: 12,
            m2: 12,
            m3: 64,
            vmax: 3.05,
            vertical_refinement: 1.02,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Maxwellian,
    Modulated,
    Vacuum,
    Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundarySection {
    pub kind: BoundaryKind,
    pub amplitude: f64,
    /// `β_G` in `A e^{-β_G |v|²}`.
    pub decay: f64,
    /// Relative `cos 2πx1` modulation, `modulated` only.
    pub ripple: f64,
    /// Snapshot with role `boundary`, `table` only. Relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl Default for BoundarySection {
    fn default() -> BoundarySection {
        BoundarySection {
            kind: BoundaryKind::Maxwellian,
            amplitude: 1.0,
            decay: 2.0,
            ripple: 0.0,
            path: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedKind {
    Zero,
    FirstIterate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteadySection {
    pub tol_fix: f64,
    pub max_iter: usize,
    /// Step as a fraction of the local time scale.
    pub ode_step: f64,
    pub seed: SeedKind,
}

impl Default for SteadySection {
    fn default() -> SteadySection {
        SteadySection {
            tol_fix: 1e-10,
            max_iter: 60,
            ode_step: 2e-3,
            seed: SeedKind::Zero,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Zero,
    Layer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Frozen,
    PredictorCorrector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicSection {
    pub dt: f64,
    /// Final time. When absent the run lasts `rates / λ∞`.
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    pub rates: f64,
    pub f0: InitialKind,
    pub f0_amplitude: f64,
    pub f0_decay: f64,
    pub output_stride: usize,
    pub substeps: usize,
    pub scheme: SchemeKind,
}

impl Default for DynamicSection {
    fn default() -> DynamicSection {
        DynamicSection {
            dt: 0.05,
            t_final: None,
            rates: 20.0,
            f0: InitialKind::Layer,
            f0_amplitude: 0.01,
            f0_decay: 2.0,
            output_stride: 10,
            substeps: 4,
            scheme: SchemeKind::Frozen,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub seed: u64,
    pub samples: usize,
    pub jacobian_samples: usize,
    pub uniform_tolerance: f64,
    pub contraction: f64,
    pub uniqueness: f64,
    pub weight_drift: f64,
    pub jacobian: f64,
    pub determinant: f64,
    pub ode_step: f64,
    pub uniqueness_epsilon: f64,
    pub much_less_factor: f64,
}

impl Default for VerifySection {
    fn default() -> VerifySection {
        let s = VerifySettings::default();
        VerifySection {
            seed: s.seed,
            samples: s.samples,
            jacobian_samples: s.jacobian_samples,
            uniform_tolerance: s.uniform_tolerance,
            contraction: s.contraction,
            uniqueness: s.uniqueness,
            weight_drift: s.weight_drift,
            jacobian: s.jacobian,
            determinant: s.determinant,
            ode_step: s.ode_step,
            uniqueness_epsilon: s.uniqueness_epsilon,
            much_less_factor: s.much_less_factor,
        }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(key: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("{key} must be positive")))
    }
}

fn at_least_one(key: &str, n: usize) -> Result<()> {
    if n >= 1 {
        Ok(())
    } else {
        Err(bad(format!("{key} must be at least 1")))
    }
}

impl RunConfig {
    /// Parses and validates, filling in `physics.beta_tilde`.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| bad(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::parse(&text).map_err(|e| match e {
            Error::Config(msg) => bad(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The resolved configuration as TOML; parsing it gives back `self`.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("the config tree only holds plain values")
    }

    fn validate(&mut self) -> Result<()> {
        let p = &mut self.physics;
        positive("physics.g", p.g)?;
        if p.eta != 1 && p.eta != -1 {
            return Err(bad("physics.eta must be +1 or \u{2212}1"));
        }
        positive("physics.beta", p.beta)?;
        let bt = *p.beta_tilde.get_or_insert(2.0 * p.beta / 3.0);
        positive("physics.beta_tilde", bt)?;
        positive("physics.green_constant", p.green_constant)?;

        let g = &self.grid;
        for (k, n) in [
            ("grid.n1", g.n1),
            ("grid.n2", g.n2),
            ("grid.m1", g.m1),
            ("grid.m2", g.m2),
        ] {
            at_least_one(k, n)?;
        }
        if g.n3 < 2 {
            return Err(bad("grid.n3 must be at least 2"));
        }
        if g.m3 < 2 {
            return Err(bad("grid.m3 must be at least 2"));
        }
        positive("grid.L3", g.l3)?;
        positive("grid.vmax", g.vmax)?;
        if !(g.vertical_refinement >= 1.0 && g.vertical_refinement.is_finite()) {
            return Err(bad("grid.vertical_refinement must be at least 1"));
        }

        let b = &self.boundary;
        match b.kind {
            BoundaryKind::Table if b.path.is_none() => {
                return Err(bad("boundary.path is required for kind = \"table\""))
            }
            BoundaryKind::Table => {}
            _ if b.path.is_some() => {
                return Err(bad("boundary.path is only allowed with kind = \"table\""))
            }
            _ => {}
        }
        if !(b.amplitude >= 0.0 && b.amplitude.is_finite()) {
            return Err(bad("boundary.amplitude must be nonnegative"));
        }
        positive("boundary.decay", b.decay)?;
        if !(b.ripple.abs() <= 1.0) {
            return Err(bad("boundary.ripple must lie in [-1, 1]"));
        }
        if b.kind != BoundaryKind::Modulated && b.ripple != 0.0 {
            return Err(bad(
                "boundary.ripple is only allowed with kind = \"modulated\"",
            ));
        }

        let s = &self.steady;
        positive("steady.tol_fix", s.tol_fix)?;
        at_least_one("steady.max_iter", s.max_iter)?;
        positive("steady.ode_step", s.ode_step)?;

        let d = &self.dynamic;
        positive("dynamic.dt", d.dt)?;
        if let Some(t) = d.t_final {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(bad("dynamic.T must be nonnegative"));
            }
        }
        positive("dynamic.rates", d.rates)?;
        if !d.f0_amplitude.is_finite() {
            return Err(bad("dynamic.f0_amplitude must be finite"));
        }
        positive("dynamic.f0_decay", d.f0_decay)?;
        at_least_one("dynamic.output_stride", d.output_stride)?;
        at_least_one("dynamic.substeps", d.substeps)?;

        let v = &self.verify;
        at_least_one("verify.samples", v.samples)?;
        for (k, x) in [
            ("verify.uniform_tolerance", v.uniform_tolerance),
            ("verify.contraction", v.contraction),
            ("verify.uniqueness", v.uniqueness),
            ("verify.weight_drift", v.weight_drift),
            ("verify.jacobian", v.jacobian),
            ("verify.determinant", v.determinant),
            ("verify.ode_step", v.ode_step),
            ("verify.uniqueness_epsilon", v.uniqueness_epsilon),
            ("verify.much_less_factor", v.much_less_factor),
        ] {
            positive(k, x)?;
        }
        Ok(())
    }

    pub fn params(&self) -> Result<Params> {
        let p = &self.physics;
        let eta = if p.eta > 0 { Sign::Plus } else { Sign::Minus };
        Params::new(p.g, eta, p.beta, p.beta_tilde.unwrap_or(2.0 * p.beta / 3.0))
    }

    pub fn phase_grid(&self) -> Result<PhaseGrid> {
        let g = &self.grid;
        let spatial = SpatialGrid::new(g.n1, g.n2, g.n3, g.l3, g.vertical_refinement)?;
        let velocity = VelocityGrid::new([g.m1, g.m2, g.m3], g.vmax)?;
        Ok(PhaseGrid::new(spatial, velocity))
    }

    /// `base` resolves a relative table path.
    pub fn boundary(&self, base: &Path) -> Result<BoundaryDatum> {
        let b = &self.boundary;
        match b.kind {
            BoundaryKind::Maxwellian => BoundaryDatum::maxwellian(b.amplitude, b.decay),
            BoundaryKind::Modulated => BoundaryDatum::modulated(b.amplitude, b.decay, b.ripple),
            BoundaryKind::Vacuum => Ok(BoundaryDatum::vacuum()),
            BoundaryKind::Table => {
                let path = base.join(b.path.as_deref().unwrap_or_default());
                let snap = Snapshot::read(&path)?;
                Ok(BoundaryDatum::tabulated(boundary_table(&snap)?))
            }
        }
    }

    pub fn scenario(&self, base: &Path) -> Result<Scenario> {
        let s = &self.steady;
        let d = &self.dynamic;
        let v = &self.verify;
        let steady = SteadyConfig {
            tol_fix: s.tol_fix,
            max_iter: s.max_iter,
            step: StepRule::Relative(s.ode_step),
            mode_cut: None,
            seed: match s.seed {
                SeedKind::Zero => SteadySeed::Zero,
                SeedKind::FirstIterate => SteadySeed::FirstIterate,
            },
        };
        let dynamic = DynamicConfig {
            dt: d.dt,
            t_final: d.t_final.unwrap_or(0.0),
            output_stride: d.output_stride,
            substeps: d.substeps,
            mode_cut: None,
            scheme: match d.scheme {
                SchemeKind::Frozen => TimeScheme::Frozen,
                SchemeKind::PredictorCorrector => TimeScheme::PredictorCorrector,
            },
            source: Source::Coupling,
        };
        let f0 = match d.f0 {
            InitialKind::Zero => InitialPerturbation::Zero,
            InitialKind::Layer => InitialPerturbation::Layer {
                amplitude: d.f0_amplitude,
                decay: d.f0_decay,
            },
        };
        let verify = VerifySettings {
            seed: v.seed,
            samples: v.samples,
            jacobian_samples: v.jacobian_samples,
            uniform_tolerance: v.uniform_tolerance,
            contraction: v.contraction,
            uniqueness: v.uniqueness,
            weight_drift: v.weight_drift,
            jacobian: v.jacobian,
            determinant: v.determinant,
            ode_step: v.ode_step,
            green_constant: self.physics.green_constant,
            uniqueness_epsilon: v.uniqueness_epsilon,
            much_less_factor: v.much_less_factor,
        };
        Ok(Scenario {
            params: self.params()?,
            grid: self.phase_grid()?,
            boundary: self.boundary(base)?,
            steady,
            dynamic,
            horizon: d.t_final.map_or(Horizon::Rates(d.rates), Horizon::Time),
            f0,
            verify,
        })
    }
}

/// A `boundary` snapshot: dims `n1 n2 m1 m2 m3`, metadata `vmax`.
pub fn boundary_table(snap: &Snapshot) -> Result<BoundaryTable> {
    if snap.role != "boundary" || snap.dims.len() != 5 {
        return Err(Error::Format(
            "boundary table needs role boundary and five dimensions".into(),
        ));
    }
    let vmax = snap.meta("vmax")?;
    let d = &snap.dims;
    let velocity = VelocityGrid::new([d[2], d[3], d[4]], vmax)?;
    BoundaryTable::new(d[0], d[1], velocity, snap.data.clone())
}
