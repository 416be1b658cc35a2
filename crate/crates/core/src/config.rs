//! Run configuration: a strict, sectioned key-value text format.
//!
//! Unknown sections or keys are rejected (silent typos have burned enough
//! hours), values carry simulation units unless the key name says
//! otherwise, and the canonical serialization defines the configuration
//! hash stamped into every artifact.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geom::{Dim, Vec3};
use crate::levelset::LevelSetField;
use crate::materials::{preset, AtomModel, DrudeParameters};
use crate::optim::OptimizerSettings;
use crate::pipeline::Pipeline;
use crate::sim::SimulationConfig;
use crate::units::ev_to_angular;

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind {
    Cylinder,
    Ball,
    /// Load the initial level set from a field snapshot.
    File(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // [simulation]
    pub dim: Dim,
    pub domain: f64,
    pub resolution: usize,
    pub pml_depth: f64,
    pub courant: f64,
    /// Total simulated time in L0/c; the step count is derived.
    pub time: f64,
    // [units]
    pub l0_nm: f64,
    // [atom]
    pub atom_position: Vec3,
    pub resonance_ev: f64,
    pub linewidth_ev: f64,
    pub alpha0: f64,
    // [material]
    pub material_preset: String,
    pub eps_inf: Option<f64>,
    pub omega_p: Option<f64>,
    pub gamma_p: Option<f64>,
    // [source]
    pub source_gamma: f64,
    pub source_j0: f64,
    // [kernel]
    pub n_omega: usize,
    pub omega_max: f64,
    // [shape]
    pub shape: ShapeKind,
    pub shape_radius: f64,
    pub shape_height: f64,
    /// Atom-to-shape-center separation along +x.
    pub separation: f64,
    // [optimizer]
    pub max_iterations: usize,
    pub plateau_tol: f64,
    pub band_width: f64,
    pub stride: usize,
    pub backtracks: usize,
    pub trust_cells: f64,
    pub lean: bool,
    // [output]
    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dim: Dim::Three,
            domain: 8.0,
            resolution: 8,
            pml_depth: 1.0,
            courant: 0.5,
            time: 60.0,
            l0_nm: 100.0,
            atom_position: Vec3::new(-1.6, 0.0, 0.0),
            resonance_ev: 1.6,
            linewidth_ev: 2.5e-8,
            alpha0: 1.0,
            material_preset: "gold".into(),
            eps_inf: None,
            omega_p: None,
            gamma_p: None,
            source_gamma: 2.5,
            source_j0: 1.0,
            n_omega: 8192,
            omega_max: 25.0,
            shape: ShapeKind::Cylinder,
            shape_radius: 1.5,
            shape_height: 0.4,
            separation: 1.1,
            max_iterations: 20,
            plateau_tol: 0.02,
            band_width: 3.0,
            stride: 2,
            backtracks: 3,
            trust_cells: 1.0,
            lean: false,
            output_dir: "runs/out".into(),
        }
    }
}

fn known_keys() -> BTreeMap<&'static str, &'static [&'static str]> {
    let mut m: BTreeMap<&'static str, &'static [&'static str]> = BTreeMap::new();
    m.insert(
        "simulation",
        &["dim", "domain", "resolution", "pml_depth", "courant", "time"] as &[_],
    );
    m.insert("units", &["l0_nm"] as &[_]);
    m.insert("atom", &["position", "resonance_ev", "linewidth_ev", "alpha0"] as &[_]);
    m.insert("material", &["preset", "eps_inf", "omega_p", "gamma_p"] as &[_]);
    m.insert("source", &["gamma", "j0"] as &[_]);
    m.insert("kernel", &["n_omega", "omega_max"] as &[_]);
    m.insert("shape", &["kind", "radius", "height", "separation", "file"] as &[_]);
    m.insert(
        "optimizer",
        &[
            "max_iterations",
            "plateau_tol",
            "band_width",
            "stride",
            "backtracks",
            "trust_cells",
            "lean",
        ] as &[_],
    );
    m.insert("output", &["directory"] as &[_]);
    m
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let known = known_keys();
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        let mut shape_kind: Option<String> = None;
        let mut shape_file: Option<String> = None;
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |m: &str| Error::InvalidConfig(format!("line {}: {m}", lineno + 1));
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| at("malformed section header"))?
                    .trim()
                    .to_string();
                if !known.contains_key(name.as_str()) {
                    return Err(at(&format!("unknown section '{name}'")));
                }
                section = name;
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at("expected 'key = value'"))?;
            let key = key.trim();
            let value = value.trim();
            if section.is_empty() {
                return Err(at("key before any section header"));
            }
            let allowed = known[section.as_str()];
            if !allowed.contains(&key) {
                return Err(at(&format!("unknown key '{key}' in section [{section}]")));
            }
            let full = format!("{section}.{key}");
            if let Some(prev) = seen.insert(full.clone(), lineno + 1) {
                return Err(at(&format!("duplicate key '{full}' (first on line {prev})")));
            }

            let f = || -> Result<f64> {
                value.parse::<f64>().map_err(|_| at(&format!("'{value}' is not a number")))
            };
            let u = || -> Result<usize> {
                value.parse::<usize>().map_err(|_| at(&format!("'{value}' is not an integer")))
            };
            let b = || -> Result<bool> {
                match value {
                    "true" => Ok(true),
                    "false" => Ok(false),
                    _ => Err(at(&format!("'{value}' is not true/false"))),
                }
            };
            match full.as_str() {
                "simulation.dim" => {
                    cfg.dim = match value {
                        "2" => Dim::Two,
                        "3" => Dim::Three,
                        _ => return Err(at("dim must be 2 or 3")),
                    }
                }
                "simulation.domain" => cfg.domain = f()?,
                "simulation.resolution" => cfg.resolution = u()?,
                "simulation.pml_depth" => cfg.pml_depth = f()?,
                "simulation.courant" => cfg.courant = f()?,
                "simulation.time" => cfg.time = f()?,
                "units.l0_nm" => cfg.l0_nm = f()?,
                "atom.position" => {
                    let parts: Vec<f64> = value
                        .split_whitespace()
                        .map(|s| s.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| at("position must be three numbers"))?;
                    if parts.len() != 3 {
                        return Err(at("position must be three numbers"));
                    }
                    cfg.atom_position = Vec3::new(parts[0], parts[1], parts[2]);
                }
                "atom.resonance_ev" => cfg.resonance_ev = f()?,
                "atom.linewidth_ev" => cfg.linewidth_ev = f()?,
                "atom.alpha0" => cfg.alpha0 = f()?,
                "material.preset" => cfg.material_preset = value.to_string(),
                "material.eps_inf" => cfg.eps_inf = Some(f()?),
                "material.omega_p" => cfg.omega_p = Some(f()?),
                "material.gamma_p" => cfg.gamma_p = Some(f()?),
                "source.gamma" => cfg.source_gamma = f()?,
                "source.j0" => cfg.source_j0 = f()?,
                "kernel.n_omega" => cfg.n_omega = u()?,
                "kernel.omega_max" => cfg.omega_max = f()?,
                "shape.kind" => shape_kind = Some(value.to_string()),
                "shape.radius" => cfg.shape_radius = f()?,
                "shape.height" => cfg.shape_height = f()?,
                "shape.separation" => cfg.separation = f()?,
                "shape.file" => shape_file = Some(value.to_string()),
                "optimizer.max_iterations" => cfg.max_iterations = u()?,
                "optimizer.plateau_tol" => cfg.plateau_tol = f()?,
                "optimizer.band_width" => cfg.band_width = f()?,
                "optimizer.stride" => cfg.stride = u()?,
                "optimizer.backtracks" => cfg.backtracks = u()?,
                "optimizer.trust_cells" => cfg.trust_cells = f()?,
                "optimizer.lean" => cfg.lean = b()?,
                "output.directory" => cfg.output_dir = value.to_string(),
                _ => unreachable!("key list checked above"),
            }
        }

        cfg.shape = match shape_kind.as_deref() {
            None | Some("cylinder") => ShapeKind::Cylinder,
            Some("ball") | Some("disk") => ShapeKind::Ball,
            Some("file") => ShapeKind::File(
                shape_file.ok_or_else(|| {
                    Error::InvalidConfig("shape.kind = file requires shape.file".into())
                })?,
            ),
            Some(other) => {
                return Err(Error::InvalidConfig(format!("unknown shape kind '{other}'")))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim_config().validate()?;
        for (name, v) in [
            ("simulation.time", self.time),
            ("units.l0_nm", self.l0_nm),
            ("atom.resonance_ev", self.resonance_ev),
            ("atom.linewidth_ev", self.linewidth_ev),
            ("atom.alpha0", self.alpha0),
            ("source.gamma", self.source_gamma),
            ("source.j0", self.source_j0),
            ("kernel.omega_max", self.omega_max),
            ("shape.radius", self.shape_radius),
            ("shape.height", self.shape_height),
            ("shape.separation", self.separation),
            ("optimizer.band_width", self.band_width),
            ("optimizer.trust_cells", self.trust_cells),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("optimizer.max_iterations must be >= 1".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidConfig("optimizer.stride must be >= 1".into()));
        }
        self.drude()?.validate()?;
        Ok(())
    }

    /// Canonical serialization: fixed section and key order. Parsing this
    /// text reproduces the configuration exactly.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        let dim = match self.dim {
            Dim::Two => 2,
            Dim::Three => 3,
        };
        s.push_str("[simulation]\n");
        s.push_str(&format!("dim = {dim}\n"));
        s.push_str(&format!("domain = {}\n", self.domain));
        s.push_str(&format!("resolution = {}\n", self.resolution));
        s.push_str(&format!("pml_depth = {}\n", self.pml_depth));
        s.push_str(&format!("courant = {}\n", self.courant));
        s.push_str(&format!("time = {}\n", self.time));
        s.push_str("\n[units]\n");
        s.push_str(&format!("l0_nm = {}\n", self.l0_nm));
        s.push_str("\n[atom]\n");
        s.push_str(&format!(
            "position = {} {} {}\n",
            self.atom_position.x, self.atom_position.y, self.atom_position.z
        ));
        s.push_str(&format!("resonance_ev = {}\n", self.resonance_ev));
        s.push_str(&format!("linewidth_ev = {}\n", self.linewidth_ev));
        s.push_str(&format!("alpha0 = {}\n", self.alpha0));
        s.push_str("\n[material]\n");
        s.push_str(&format!("preset = {}\n", self.material_preset));
        if let Some(v) = self.eps_inf {
            s.push_str(&format!("eps_inf = {v}\n"));
        }
        if let Some(v) = self.omega_p {
            s.push_str(&format!("omega_p = {v}\n"));
        }
        if let Some(v) = self.gamma_p {
            s.push_str(&format!("gamma_p = {v}\n"));
        }
        s.push_str("\n[source]\n");
        s.push_str(&format!("gamma = {}\n", self.source_gamma));
        s.push_str(&format!("j0 = {}\n", self.source_j0));
        s.push_str("\n[kernel]\n");
        s.push_str(&format!("n_omega = {}\n", self.n_omega));
        s.push_str(&format!("omega_max = {}\n", self.omega_max));
        s.push_str("\n[shape]\n");
        match &self.shape {
            ShapeKind::Cylinder => s.push_str("kind = cylinder\n"),
            ShapeKind::Ball => s.push_str("kind = ball\n"),
            ShapeKind::File(f) => {
                s.push_str("kind = file\n");
                s.push_str(&format!("file = {f}\n"));
            }
        }
        s.push_str(&format!("radius = {}\n", self.shape_radius));
        s.push_str(&format!("height = {}\n", self.shape_height));
        s.push_str(&format!("separation = {}\n", self.separation));
        s.push_str("\n[optimizer]\n");
        s.push_str(&format!("max_iterations = {}\n", self.max_iterations));
        s.push_str(&format!("plateau_tol = {}\n", self.plateau_tol));
        s.push_str(&format!("band_width = {}\n", self.band_width));
        s.push_str(&format!("stride = {}\n", self.stride));
        s.push_str(&format!("backtracks = {}\n", self.backtracks));
        s.push_str(&format!("trust_cells = {}\n", self.trust_cells));
        s.push_str(&format!("lean = {}\n", self.lean));
        s.push_str("\n[output]\n");
        s.push_str(&format!("directory = {}\n", self.output_dir));
        s
    }

    /// FNV-1a over the canonical text.
    pub fn hash(&self) -> u64 {
        fnv1a(self.canonical_text().as_bytes())
    }

    pub fn sim_config(&self) -> SimulationConfig {
        let dt = self.courant / self.resolution as f64;
        SimulationConfig {
            dim: self.dim,
            domain: self.domain,
            resolution: self.resolution,
            pml_depth: self.pml_depth,
            courant: self.courant,
            steps: (self.time / dt).round() as usize,
        }
    }

    pub fn atom_model(&self) -> AtomModel {
        let l0 = self.l0_nm * 1e-9;
        AtomModel {
            alpha0: self.alpha0,
            omega_a: ev_to_angular(self.resonance_ev, l0),
            gamma_a: ev_to_angular(self.linewidth_ev, l0),
            axis: Vec3::new(1.0, 0.0, 0.0),
        }
    }

    /// Structure material: preset values with field-level overrides.
    pub fn drude(&self) -> Result<DrudeParameters> {
        let mut p = preset(&self.material_preset, self.l0_nm * 1e-9)?;
        if let Some(v) = self.eps_inf {
            p.eps_inf = v;
        }
        if let Some(v) = self.omega_p {
            p.omega_p = v;
        }
        if let Some(v) = self.gamma_p {
            p.gamma_p = v;
        }
        Ok(p)
    }

    /// Center of the initial shape: `separation` beyond the atom along +x.
    pub fn shape_center(&self) -> Vec3 {
        self.atom_position.add(Vec3::new(self.separation, 0.0, 0.0))
    }

    pub fn initial_level_set(&self) -> Result<LevelSetField> {
        let cfg = self.sim_config();
        match &self.shape {
            ShapeKind::Cylinder => {
                LevelSetField::cylinder(&cfg, self.shape_radius, self.shape_height, self.shape_center())
            }
            ShapeKind::Ball => LevelSetField::ball(&cfg, self.shape_radius, self.shape_center()),
            ShapeKind::File(path) => {
                let (field, _) = crate::export::read_level_set(std::path::Path::new(path))?;
                if field.dims != cfg.dims() {
                    return Err(Error::InvalidConfig(
                        "level-set file grid does not match the configuration".into(),
                    ));
                }
                Ok(field)
            }
        }
    }

    pub fn pipeline(&self) -> Result<Pipeline> {
        Pipeline::new(
            self.sim_config(),
            self.atom_model(),
            self.source_gamma,
            self.source_j0,
            self.n_omega,
            self.omega_max,
            self.atom_position,
        )
    }

    pub fn optimizer_settings(&self) -> OptimizerSettings {
        OptimizerSettings {
            max_iterations: self.max_iterations,
            plateau_tol: self.plateau_tol,
            backtrack_limit: self.backtracks,
            band_width: self.band_width,
            stride: self.stride,
            trust_cells: self.trust_cells,
            keep_snapshots: !self.lean,
            ..Default::default()
        }
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}
