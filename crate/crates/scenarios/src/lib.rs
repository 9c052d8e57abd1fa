//! Named, configurable scenarios for the photocount simulator, with TOML
//! configuration, run-directory persistence and a command-line front end.

pub mod config;
pub mod error;
pub mod result;
mod runs;
pub mod units;

use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{Resolved, ScenarioConfig, SweepAxis};
pub use error::{Result, ScenarioError};
pub use result::{ScenarioResult, Table, WignerRecord};
use units::UnitKind;

/// Environment variable holding the default output root.
pub const OUTPUT_ENV: &str = "PHOTOCOUNT_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    PhotocountYesno,
    PhotocountSingleTone,
    PhotocountMultiplexed,
    CalibrateDisplacement,
    RamseyStorage,
    MidSweep,
    SingleDriveDecoherence,
    CoherenceRevivals,
    QndCheck,
    RabiCalibration,
    WignerSnapshot,
}

use UnitKind::{Dimensionless, Frequency, Rate, Time, Voltage};

impl Scenario {
    pub const ALL: [Scenario; 11] = [
        Scenario::PhotocountYesno,
        Scenario::PhotocountSingleTone,
        Scenario::PhotocountMultiplexed,
        Scenario::CalibrateDisplacement,
        Scenario::RamseyStorage,
        Scenario::MidSweep,
        Scenario::SingleDriveDecoherence,
        Scenario::CoherenceRevivals,
        Scenario::QndCheck,
        Scenario::RabiCalibration,
        Scenario::WignerSnapshot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::PhotocountYesno => "photocount-yesno",
            Scenario::PhotocountSingleTone => "photocount-single-tone",
            Scenario::PhotocountMultiplexed => "photocount-multiplexed",
            Scenario::CalibrateDisplacement => "calibrate-displacement",
            Scenario::RamseyStorage => "ramsey-storage",
            Scenario::MidSweep => "mid-sweep",
            Scenario::SingleDriveDecoherence => "single-drive-decoherence",
            Scenario::CoherenceRevivals => "coherence-revivals",
            Scenario::QndCheck => "qnd-check",
            Scenario::RabiCalibration => "rabi-calibration",
            Scenario::WignerSnapshot => "wigner-snapshot",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::PhotocountYesno => "yes-no qubit excitation probability vs displacement and pi-pulse detuning",
            Scenario::PhotocountSingleTone => "emission coefficient vs displacement and single-tone detuning",
            Scenario::PhotocountMultiplexed => "nine demultiplexed comb channels vs mean photon number",
            Scenario::CalibrateDisplacement => "sqrt(<n>) vs displacement amplitude with a linear fit",
            Scenario::RamseyStorage => "undriven storage Ramsey oscillations and fit",
            Scenario::MidSweep => "measurement-induced storage dephasing vs comb amplitude",
            Scenario::SingleDriveDecoherence => "Fock coherence decay rates vs single-drive detuning, with eigenvalue theory",
            Scenario::CoherenceRevivals => "normalized |rho_12|, |rho_13| vs time under the comb",
            Scenario::QndCheck => "storage populations and <n> vs time under the comb",
            Scenario::RabiCalibration => "Rabi oscillations of the bare multiplexing qubit and fit of xi",
            Scenario::WignerSnapshot => "Wigner function, reconstructed density matrix and mean coherence",
        }
    }

    /// Wall-clock budget at the canonical settings on one core.
    pub fn runtime_budget(self) -> &'static str {
        match self {
            Scenario::PhotocountYesno => "< 2 min",
            Scenario::PhotocountSingleTone => "< 5 min",
            Scenario::PhotocountMultiplexed => "< 5 min",
            Scenario::CalibrateDisplacement => "< 10 s",
            Scenario::RamseyStorage => "< 10 s",
            Scenario::MidSweep => "< 30 min",
            Scenario::SingleDriveDecoherence => "< 10 min",
            Scenario::CoherenceRevivals => "< 5 min",
            Scenario::QndCheck => "< 5 min",
            Scenario::RabiCalibration => "< 10 s",
            Scenario::WignerSnapshot => "< 1 min",
        }
    }

    /// Sweep axes the scenario accepts, with their units.
    pub fn axes(self) -> &'static [(&'static str, UnitKind)] {
        match self {
            Scenario::PhotocountYesno | Scenario::PhotocountSingleTone => &[("eps_max", Rate), ("delta_f", Frequency)],
            Scenario::PhotocountMultiplexed => &[("nbar", Dimensionless)],
            Scenario::CalibrateDisplacement => &[("eps_max", Rate)],
            Scenario::RamseyStorage => &[("time", Time)],
            Scenario::MidSweep => &[("omega_over_chi", Dimensionless), ("duration", Time)],
            Scenario::SingleDriveDecoherence => &[("delta_f", Frequency), ("time", Time)],
            Scenario::CoherenceRevivals | Scenario::QndCheck => &[("omega_over_chi", Dimensionless), ("time", Time)],
            Scenario::RabiCalibration => &[("v_mp", Voltage), ("time", Time)],
            Scenario::WignerSnapshot => &[("time", Time)],
        }
    }

    /// The configuration shipped in `configs/<name>.toml`.
    pub fn canonical_config(self) -> ScenarioConfig {
        runs::canonical(self)
    }

    pub(crate) fn max_photon_probed(self, r: &Resolved) -> Result<Option<usize>> {
        runs::max_photon_probed(self, r)
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Scenario::ALL.iter().map(|k| k.name()).collect();
            ScenarioError::Config(format!("unknown scenario `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

/// Validates and runs a scenario. `workers` caps the thread pool; `None`
/// uses the available parallelism. Results do not depend on `workers`.
pub fn run(config: &ScenarioConfig, workers: Option<usize>) -> Result<ScenarioResult> {
    let resolved = config.resolve()?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = workers {
            if n == 0 {
                return Err(ScenarioError::Config("--workers must be >= 1".into()));
            }
            b = b.num_threads(n);
        }
        b.build().map_err(|e| ScenarioError::Config(format!("thread pool: {e}")))?
    };
    let start = Instant::now();
    let out = pool.install(|| runs::run(&resolved))?;
    let provenance = result::Provenance {
        toolkit: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: resolved.scenario.name().into(),
        workers: pool.current_num_threads(),
        wall_time: start.elapsed().as_secs_f64(),
        solver_stats: out.stats,
        simulations: out.simulations,
    };
    Ok(ScenarioResult { config: resolved.config, tables: out.tables, wigner: out.wigner, provenance, notes: out.notes })
}

/// Output directory: explicit `--out`, else the config's `output`, else
/// `$PHOTOCOUNT_OUT/<scenario>`, else `runs/<scenario>`.
pub fn output_dir(explicit: Option<PathBuf>, config: &ScenarioConfig) -> PathBuf {
    if let Some(p) = explicit {
        return p;
    }
    if let Some(p) = &config.output {
        return p.clone();
    }
    let root = std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(config.scenario.name())
}
