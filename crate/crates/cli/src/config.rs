//! Flat `section.key = value` experiment configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use vseed_core::boundary::{make_test_flux, FluxKind, WallData};
use vseed_core::nse::InitialData;
use vseed_core::ChannelGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    NoSlip,
    Split,
    Monolithic,
    Sweep,
    Audit,
    Crossval,
    Manufactured,
}

impl RunMode {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "noslip" => Self::NoSlip,
            "split" => Self::Split,
            "monolithic" => Self::Monolithic,
            "sweep" => Self::Sweep,
            "audit" => Self::Audit,
            "crossval" => Self::Crossval,
            "manufactured" => Self::Manufactured,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FluxSpec {
    Zero,
    Synthetic(FluxKind),
    Csv(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForceSpec {
    None,
    /// constant streamwise body force
    Uniform(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedSpec {
    pub sizes: Vec<usize>,
    pub amplitude: f64,
    pub cfl: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub dt: f64,
    pub nt: usize,
    pub nu: f64,
    pub delta: f64,
    pub alpha: f64,
    pub flux: FluxSpec,
    pub through_flow: bool,
    pub force: ForceSpec,
    pub initial: Option<InitialData>,
    pub mode: RunMode,
    pub deltas: Vec<f64>,
    pub output_dir: PathBuf,
    pub save_stride: usize,
    pub tol: f64,
    /// bound on the cell divergence after every solve
    pub projection_tol: f64,
    pub oracle_sizes: Vec<usize>,
    pub manufactured: ManufacturedSpec,
}

impl ExperimentConfig {
    pub fn grid(&self) -> ChannelGrid {
        ChannelGrid::new(self.nx, self.ny, self.lx).expect("validated grid")
    }

    /// Builds the wall data; CSV paths are resolved by the loader.
    pub fn wall_data(&self) -> vseed_core::Result<WallData> {
        match &self.flux {
            FluxSpec::Zero => Ok(WallData::zeros(self.nx, self.nt, self.dt, self.lx)),
            FluxSpec::Synthetic(kind) => make_test_flux(kind, self.nx, self.lx, self.nt, self.dt, self.through_flow),
            FluxSpec::Csv(path) => {
                let w = WallData::read_csv(path, self.dt, self.lx)?;
                w.check_compatible()?;
                Ok(w)
            }
        }
    }
}

/// A parsed configuration plus the advisories raised while validating it.
#[derive(Debug, Clone)]
pub struct Validated {
    pub config: ExperimentConfig,
    pub advisories: Vec<String>,
}

#[derive(Debug)]
pub enum ConfigError {
    Unreadable(String),
    /// every violation found, in key order
    Invalid(Vec<String>),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Unreadable(m) => write!(f, "cannot read config: {m}"),
            ConfigError::Invalid(v) => {
                writeln!(f, "invalid config ({} violations):", v.len())?;
                for m in v {
                    writeln!(f, "  - {m}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

const KEYS: &[&str] = &[
    "mode",
    "grid.nx",
    "grid.ny",
    "grid.lx",
    "time.dt",
    "time.nt",
    "physics.nu",
    "physics.delta",
    "physics.alpha",
    "flux.kind",
    "flux.kappa",
    "flux.omega",
    "flux.amplitude",
    "flux.tones",
    "flux.seed",
    "flux.s",
    "flux.eta",
    "flux.path",
    "flux.through_flow",
    "force.kind",
    "force.amplitude",
    "initial.data",
    "sweep.deltas",
    "output.dir",
    "output.save_stride",
    "solver.tol",
    "solver.projection_tol",
    "oracle.sizes",
    "manufactured.sizes",
    "manufactured.amplitude",
    "manufactured.cfl",
    "manufactured.t_end",
];

/// Splits `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, Vec<String>> {
    let mut map = BTreeMap::new();
    let mut bad = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                let k = k.trim().to_string();
                if !KEYS.contains(&k.as_str()) {
                    bad.push(format!("line {}: unknown key `{k}`", n + 1));
                } else if map.insert(k.clone(), v.trim().to_string()).is_some() {
                    bad.push(format!("line {}: duplicate key `{k}`", n + 1));
                }
            }
            None => bad.push(format!("line {}: expected `key = value`", n + 1)),
        }
    }
    if bad.is_empty() {
        Ok(map)
    } else {
        Err(bad)
    }
}

struct Reader<'a> {
    map: &'a BTreeMap<String, String>,
    bad: Vec<String>,
}

impl Reader<'_> {
    fn get<T: std::str::FromStr>(&mut self, key: &str, default: Option<T>) -> Option<T> {
        match self.map.get(key) {
            Some(v) => match v.parse::<T>() {
                Ok(x) => Some(x),
                Err(_) => {
                    self.bad.push(format!("{key}: cannot parse `{v}`"));
                    None
                }
            },
            None if default.is_some() => default,
            None => {
                self.bad.push(format!("{key}: missing"));
                None
            }
        }
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Vec<T> {
        let Some(v) = self.map.get(key) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.parse::<T>() {
                Ok(x) => out.push(x),
                Err(_) => self.bad.push(format!("{key}: cannot parse list entry `{item}`")),
            }
        }
        out
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.bad.push(msg());
        }
    }
}

/// Parses and validates configuration text. `base` resolves relative CSV paths.
pub fn from_text(text: &str, base: &Path) -> Result<Validated, ConfigError> {
    let map = parse_pairs(text).map_err(ConfigError::Invalid)?;
    let mut r = Reader { map: &map, bad: Vec::new() };

    let mode_s: String = r.get("mode", None).unwrap_or_default();
    let mode = RunMode::parse(&mode_s);
    if mode.is_none() && !mode_s.is_empty() {
        r.bad.push(format!(
            "mode: `{mode_s}` is not one of noslip, split, monolithic, sweep, audit, crossval, manufactured"
        ));
    }
    let mode = mode.unwrap_or(RunMode::NoSlip);
    let manufactured_only = mode == RunMode::Manufactured;
    let grid_default = manufactured_only.then_some(16);

    let nx: usize = r.get("grid.nx", grid_default).unwrap_or(0);
    let ny: usize = r.get("grid.ny", grid_default).unwrap_or(0);
    let lx: f64 = r.get("grid.lx", Some(1.0)).unwrap_or(1.0);
    let dt: f64 = r.get("time.dt", manufactured_only.then_some(0.01)).unwrap_or(f64::NAN);
    let nt: usize = r.get("time.nt", manufactured_only.then_some(8)).unwrap_or(0);
    let nu: f64 = r.get("physics.nu", Some(1.0)).unwrap_or(f64::NAN);
    let delta: f64 = r.get("physics.delta", Some(0.1)).unwrap_or(f64::NAN);
    let alpha: f64 = r.get("physics.alpha", Some(1.0)).unwrap_or(f64::NAN);
    let tol: f64 = r.get("solver.tol", Some(1e-10)).unwrap_or(f64::NAN);
    let projection_tol: f64 = r.get("solver.projection_tol", Some(1e-10)).unwrap_or(f64::NAN);
    let save_stride: usize = r.get("output.save_stride", Some(1)).unwrap_or(0);
    let output_dir: String = r.get("output.dir", Some("out".to_string())).unwrap_or_default();
    let through_flow: bool = r.get("flux.through_flow", Some(false)).unwrap_or(false);

    r.check(nx >= 4 && ny >= 4, || format!("grid: nx and ny must be at least 4 (got {nx} x {ny})"));
    r.check(lx > 0.0 && lx.is_finite(), || format!("grid.lx must be positive (got {lx})"));
    r.check(dt > 0.0 && dt.is_finite(), || format!("time.dt must be positive (got {dt})"));
    r.check(nt >= 1, || "time.nt must be at least 1".into());
    r.check(nu > 0.0 && nu.is_finite(), || format!("physics.nu must be positive (got {nu})"));
    r.check(delta > 0.0 && delta <= 1.0, || format!("physics.delta must lie in (0, 1] (got {delta})"));
    r.check(alpha >= 0.0 && alpha.is_finite(), || format!("physics.alpha must be non-negative (got {alpha})"));
    r.check(tol > 0.0, || format!("solver.tol must be positive (got {tol})"));
    r.check(projection_tol > 0.0, || format!("solver.projection_tol must be positive (got {projection_tol})"));
    r.check(save_stride >= 1, || "output.save_stride must be at least 1".into());
    r.check(!output_dir.is_empty(), || "output.dir must not be empty".into());

    let kind: String = r.get("flux.kind", Some("zero".to_string())).unwrap_or_default();
    let kappa: u32 = r.get("flux.kappa", Some(1)).unwrap_or(1);
    let amplitude: f64 = r.get("flux.amplitude", Some(1.0)).unwrap_or(f64::NAN);
    let flux = match kind.as_str() {
        "zero" => FluxSpec::Zero,
        "tone" => {
            let omega: f64 = r.get("flux.omega", Some(std::f64::consts::TAU)).unwrap_or(f64::NAN);
            r.check(omega.is_finite(), || "flux.omega must be finite".into());
            FluxSpec::Synthetic(FluxKind::Tone { kappa, omega, amplitude })
        }
        "multitone" => {
            let mut tones = Vec::new();
            let spec: String = r.get("flux.tones", None).unwrap_or_default();
            for t in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                let parts: Vec<&str> = t.split(':').map(str::trim).collect();
                match parts.as_slice() {
                    [k, o, a] => match (k.parse::<u32>(), o.parse::<f64>(), a.parse::<f64>()) {
                        (Ok(k), Ok(o), Ok(a)) => tones.push((k, o, a)),
                        _ => r.bad.push(format!("flux.tones: cannot parse `{t}`")),
                    },
                    _ => r.bad.push(format!("flux.tones: `{t}` is not kappa:omega:amplitude")),
                }
            }
            r.check(!tones.is_empty(), || "flux.tones: at least one tone required".into());
            FluxSpec::Synthetic(FluxKind::Multitone { tones })
        }
        "noise" => {
            let seed: u64 = r.get("flux.seed", Some(7)).unwrap_or(7);
            let s: f64 = r.get("flux.s", Some(0.6)).unwrap_or(f64::NAN);
            let eta: f64 = r.get("flux.eta", Some(0.1)).unwrap_or(f64::NAN);
            r.check(s > 0.0 && eta > 0.0, || format!("flux.s and flux.eta must be positive (got {s}, {eta})"));
            FluxSpec::Synthetic(FluxKind::BandLimitedNoise {
                seed,
                s,
                eta,
                kappa,
                amplitude,
            })
        }
        "csv" => {
            let p: String = r.get("flux.path", None).unwrap_or_default();
            FluxSpec::Csv(base.join(p))
        }
        other => {
            r.bad.push(format!("flux.kind: `{other}` is not one of zero, tone, multitone, noise, csv"));
            FluxSpec::Zero
        }
    };
    if let FluxSpec::Synthetic(FluxKind::Tone { kappa: 0, .. } | FluxKind::BandLimitedNoise { kappa: 0, .. }) = flux {
        r.check(through_flow, || "flux.kappa = 0 drives net through-flow; set flux.through_flow = true".into());
    }
    r.check(amplitude.is_finite(), || "flux.amplitude must be finite".into());

    let force = match r.get("force.kind", Some("none".to_string())).unwrap_or_default().as_str() {
        "none" => ForceSpec::None,
        "uniform" => ForceSpec::Uniform(r.get("force.amplitude", Some(1.0)).unwrap_or(f64::NAN)),
        other => {
            r.bad.push(format!("force.kind: `{other}` is not one of none, uniform"));
            ForceSpec::None
        }
    };
    let initial = match r.map.get("initial.data").map(String::as_str) {
        None => None,
        Some("plain") => Some(InitialData::Plain),
        Some("lifted") => Some(InitialData::Lifted),
        Some(other) => {
            r.bad.push(format!("initial.data: `{other}` is not one of plain, lifted"));
            None
        }
    };

    let deltas: Vec<f64> = r.list("sweep.deltas");
    if mode == RunMode::Sweep {
        r.check(deltas.len() >= 4, || format!("sweep.deltas: at least 4 values required (got {})", deltas.len()));
    }
    if !deltas.is_empty() {
        r.check(deltas.windows(2).all(|p| p[1] < p[0]), || "sweep.deltas must be strictly decreasing".into());
        r.check(deltas.iter().all(|d| *d > 0.0 && *d <= 1.0), || "sweep.deltas must lie in (0, 1]".into());
    }
    if mode == RunMode::Audit || mode == RunMode::Sweep {
        r.check(nt + 1 >= 8, || format!("time.nt must be at least 7 for spectral audits (got {nt})"));
    }
    let oracle_sizes: Vec<usize> = r.list("oracle.sizes");
    if mode == RunMode::Crossval {
        r.check(!oracle_sizes.is_empty(), || "oracle.sizes: at least one grid size required".into());
        r.check(oracle_sizes.iter().all(|&n| (4..=12).contains(&n)), || "oracle.sizes must lie in 4..=12".into());
    }
    let sizes: Vec<usize> = r.list("manufactured.sizes");
    let manufactured = ManufacturedSpec {
        sizes: if sizes.is_empty() { vec![16, 32, 64, 128] } else { sizes },
        amplitude: r.get("manufactured.amplitude", Some(0.2)).unwrap_or(f64::NAN),
        cfl: r.get("manufactured.cfl", Some(0.25)).unwrap_or(f64::NAN),
        t_end: r.get("manufactured.t_end", Some(0.2)).unwrap_or(f64::NAN),
    };
    if mode == RunMode::Manufactured {
        let m = &manufactured;
        r.check(m.sizes.len() >= 2 && m.sizes.iter().all(|&n| n >= 4), || {
            "manufactured.sizes: at least two sizes of 4 or more".into()
        });
        r.check(m.amplitude > 0.0 && m.cfl > 0.0 && m.t_end > 0.0, || {
            "manufactured.amplitude, cfl and t_end must be positive".into()
        });
        r.check((lx - 1.0).abs() < 1e-12, || "manufactured runs need grid.lx = 1".into());
    }

    let mut bad = r.bad;
    if bad.is_empty() {
        if let FluxSpec::Csv(path) = &flux {
            match WallData::read_csv(path, dt, lx) {
                Ok(w) => {
                    if w.nx() != nx || w.nt() < nt {
                        bad.push(format!(
                            "flux.path: {} x {} samples do not cover nx = {nx}, nt = {nt}",
                            w.nx(),
                            w.nt() + 1
                        ));
                    } else if let Err(vseed_core::Error::Incompatible { t_index, defect, tolerance }) =
                        w.check_compatible()
                    {
                        bad.push(format!(
                            "flux.path: net flux violates the compatibility condition, worst at time index {t_index} (defect {defect:.3e} > {tolerance:.3e})"
                        ));
                    }
                }
                Err(e) => bad.push(format!("flux.path: {e}")),
            }
        }
    }
    if !bad.is_empty() {
        return Err(ConfigError::Invalid(bad));
    }

    let config = ExperimentConfig {
        nx,
        ny,
        lx,
        dt,
        nt,
        nu,
        delta,
        alpha,
        flux,
        through_flow,
        force,
        initial,
        mode,
        deltas,
        output_dir: PathBuf::from(output_dir),
        save_stride,
        tol,
        projection_tol,
        oracle_sizes,
        manufactured,
    };
    Ok(Validated {
        advisories: advisories(&config),
        config,
    })
}

pub fn from_file(path: &Path) -> Result<Validated, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable(format!("{}: {e}", path.display())))?;
    from_text(&text, path.parent().unwrap_or(Path::new(".")))
}

fn advisories(c: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    if c.mode == RunMode::Manufactured {
        return out;
    }
    let h = (c.lx / c.nx as f64).min(1.0 / c.ny as f64);
    if c.dt > 0.5 * h {
        out.push(format!(
            "CFL: dt = {} exceeds 0.5 h = {:.3e} for unit velocity; the run stops if the limit is hit",
            c.dt,
            0.5 * h
        ));
    }
    let hy = 1.0 / c.ny as f64;
    let min_delta = match c.mode {
        RunMode::Sweep | RunMode::Audit if !c.deltas.is_empty() => c.deltas.iter().cloned().fold(f64::INFINITY, f64::min),
        RunMode::NoSlip => f64::INFINITY,
        _ => c.delta,
    };
    if hy > min_delta / 4.0 {
        out.push(format!(
            "resolution: hy = {hy:.4e} exceeds min(delta)/4 = {:.4e} (h <= delta/4 rule); the slip layer is under-resolved",
            min_delta / 4.0
        ));
    }
    if c.mode == RunMode::Sweep && c.flux == FluxSpec::Zero {
        out.push("sweep with zero flux: every error sits at the discretization floor, slopes are not applicable".into());
    }
    out
}
