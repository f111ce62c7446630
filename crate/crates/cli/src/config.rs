//! Run configuration: CLI flags or a `key = value` config file, strict
//! about unknown keys, with a canonical serialization used both for
//! round-tripping and for the reproducibility hash.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use splitfem::problems::ProblemId;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Problem key: cd-example1, cd-example2, ns-example3, ns-example4,
    /// cavity.
    pub problem: String,
    /// Mesh subdivisions per side.
    pub n: usize,
    pub t_final: f64,
    /// Exactly one of `n_steps` / `dt` must be set.
    pub n_steps: Option<usize>,
    pub dt: Option<f64>,
    /// Multistep index.
    pub m: usize,
    /// Reynolds number (flow problems only).
    pub re: Option<f64>,
    /// Diffusion-coefficient override for the transport problems.
    pub eps: Option<f64>,
    /// Emit a VTK snapshot every k steps (with emit_vtk).
    pub vtk_every: Option<usize>,
    /// Row-sum mass lumping in the transport substep.
    pub lumped: bool,
    pub rel_tol: f64,
    pub out_dir: PathBuf,
    pub emit_vtk: bool,
    pub emit_csv: bool,
    pub emit_summary: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: String::new(),
            n: 0,
            t_final: 1.0,
            n_steps: None,
            dt: None,
            m: 1,
            re: None,
            eps: None,
            vtk_every: None,
            lumped: false,
            rel_tol: 1e-10,
            out_dir: PathBuf::from("out"),
            emit_vtk: false,
            emit_csv: true,
            emit_summary: true,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

const PROBLEMS: [&str; 5] = [
    "cd-example1",
    "cd-example2",
    "ns-example3",
    "ns-example4",
    "cavity",
];

impl RunConfig {
    pub fn is_flow_problem(&self) -> bool {
        self.problem.starts_with("ns-") || self.problem == "cavity"
    }

    pub fn problem_id(&self) -> Result<ProblemId, ConfigError> {
        let re = self.re.unwrap_or(5000.0);
        match self.problem.as_str() {
            "cd-example1" => Ok(ProblemId::CdExample1),
            "cd-example2" => Ok(ProblemId::CdExample2),
            "ns-example3" => Ok(ProblemId::NsExample3 { re }),
            "ns-example4" => Ok(ProblemId::NsExample4 { re }),
            "cavity" => Ok(ProblemId::Cavity { re }),
            other => Err(ConfigError(format!(
                "unknown problem '{other}' (expected one of {PROBLEMS:?})"
            ))),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.problem.is_empty() {
            return Err(ConfigError(
                "missing required keys: problem, n, and one of n_steps/dt".into(),
            ));
        }
        if !PROBLEMS.contains(&self.problem.as_str()) {
            return Err(ConfigError(format!(
                "unknown problem '{}' (expected one of {PROBLEMS:?})",
                self.problem
            )));
        }
        if self.n == 0 {
            return Err(ConfigError("n must be at least 1".into()));
        }
        if self.m == 0 {
            return Err(ConfigError("m must be at least 1".into()));
        }
        match (self.n_steps, self.dt) {
            (Some(_), Some(_)) => {
                return Err(ConfigError("give exactly one of n_steps and dt, not both".into()))
            }
            (None, None) => {
                return Err(ConfigError("give exactly one of n_steps and dt".into()))
            }
            (Some(0), None) => return Err(ConfigError("n_steps must be at least 1".into())),
            (None, Some(dt)) if dt <= 0.0 => {
                return Err(ConfigError("dt must be positive".into()))
            }
            _ => {}
        }
        if self.t_final <= 0.0 {
            return Err(ConfigError("t_final must be positive".into()));
        }
        if self.rel_tol <= 0.0 {
            return Err(ConfigError("rel_tol must be positive".into()));
        }
        if self.re.is_some_and(|re| re <= 0.0) {
            return Err(ConfigError("re must be positive".into()));
        }
        if self.eps.is_some_and(|e| e < 0.0) {
            return Err(ConfigError("eps must be non-negative".into()));
        }
        if self.eps.is_some() && self.is_flow_problem() {
            return Err(ConfigError("eps only applies to the transport problems".into()));
        }
        if self.vtk_every == Some(0) {
            return Err(ConfigError("vtk_every must be at least 1".into()));
        }
        if self.is_flow_problem() && self.re.is_none() {
            return Err(ConfigError(format!(
                "problem '{}' needs re",
                self.problem
            )));
        }
        Ok(())
    }

    /// Canonical `key = value` serialization; `parse_file` of the output
    /// reproduces the config exactly.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("problem = {}\n", self.problem));
        s.push_str(&format!("n = {}\n", self.n));
        s.push_str(&format!("t_final = {:e}\n", self.t_final));
        if let Some(ns) = self.n_steps {
            s.push_str(&format!("n_steps = {ns}\n"));
        }
        if let Some(dt) = self.dt {
            s.push_str(&format!("dt = {dt:e}\n"));
        }
        s.push_str(&format!("m = {}\n", self.m));
        if let Some(re) = self.re {
            s.push_str(&format!("re = {re:e}\n"));
        }
        if let Some(eps) = self.eps {
            s.push_str(&format!("eps = {eps:e}\n"));
        }
        if let Some(k) = self.vtk_every {
            s.push_str(&format!("vtk_every = {k}\n"));
        }
        s.push_str(&format!("lumped = {}\n", self.lumped));
        s.push_str(&format!("rel_tol = {:e}\n", self.rel_tol));
        s.push_str(&format!("out_dir = {}\n", self.out_dir.display()));
        s.push_str(&format!("emit_vtk = {}\n", self.emit_vtk));
        s.push_str(&format!("emit_csv = {}\n", self.emit_csv));
        s.push_str(&format!("emit_summary = {}\n", self.emit_summary));
        s
    }

    /// Parse the `key = value` format. Unknown keys are rejected by name.
    pub fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen: BTreeMap<&str, ()> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if seen.insert(key, ()).is_some() {
                return Err(ConfigError(format!("duplicate key '{key}'")));
            }
            let parse_f64 = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| ConfigError(format!("key '{key}': bad number '{v}'")))
            };
            let parse_usize = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| ConfigError(format!("key '{key}': bad integer '{v}'")))
            };
            let parse_bool = |v: &str| match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(ConfigError(format!("key '{key}': bad boolean '{v}'"))),
            };
            match key {
                "problem" => cfg.problem = value.to_string(),
                "n" => cfg.n = parse_usize(value)?,
                "t_final" => cfg.t_final = parse_f64(value)?,
                "n_steps" => cfg.n_steps = Some(parse_usize(value)?),
                "dt" => cfg.dt = Some(parse_f64(value)?),
                "m" => cfg.m = parse_usize(value)?,
                "re" => cfg.re = Some(parse_f64(value)?),
                "eps" => cfg.eps = Some(parse_f64(value)?),
                "vtk_every" => cfg.vtk_every = Some(parse_usize(value)?),
                "lumped" => cfg.lumped = parse_bool(value)?,
                "rel_tol" => cfg.rel_tol = parse_f64(value)?,
                "out_dir" => cfg.out_dir = PathBuf::from(value),
                "emit_vtk" => cfg.emit_vtk = parse_bool(value)?,
                "emit_csv" => cfg.emit_csv = parse_bool(value)?,
                "emit_summary" => cfg.emit_summary = parse_bool(value)?,
                unknown => {
                    return Err(ConfigError(format!("unknown key '{unknown}'")));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    /// FNV-1a hash of the canonical serialization, hex-encoded: a short
    /// reproducibility fingerprint for summaries.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in self.serialize().as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunConfig {
        RunConfig {
            problem: "cd-example1".into(),
            n: 128,
            dt: Some(0.1 / 64.0),
            m: 1,
            ..Default::default()
        }
    }

    #[test]
    fn roundtrip() {
        let cfg = sample();
        let parsed = RunConfig::parse_str(&cfg.serialize()).unwrap();
        assert_eq!(cfg, parsed);
    }

    #[test]
    fn unknown_key_rejected_by_name() {
        let err = RunConfig::parse_str("problem = cd-example1\nn = 4\ndt = 0.1\nbogus_key = 1\n")
            .unwrap_err();
        assert!(err.0.contains("bogus_key"), "{}", err.0);
    }

    #[test]
    fn empty_config_lists_required_keys() {
        let err = RunConfig::parse_str("").unwrap_err();
        assert!(err.0.contains("problem"), "{}", err.0);
    }

    #[test]
    fn n_steps_and_dt_are_exclusive() {
        let both = "problem = cd-example1\nn = 4\ndt = 0.1\nn_steps = 10\n";
        assert!(RunConfig::parse_str(both).is_err());
        let neither = "problem = cd-example1\nn = 4\n";
        assert!(RunConfig::parse_str(neither).is_err());
    }

    #[test]
    fn zero_m_rejected() {
        let text = "problem = cd-example1\nn = 4\ndt = 0.1\nm = 0\n";
        let err = RunConfig::parse_str(text).unwrap_err();
        assert!(err.0.contains('m'), "{}", err.0);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = sample();
        let mut b = sample();
        assert_eq!(a.hash(), b.hash());
        b.m = 2;
        assert_ne!(a.hash(), b.hash());
    }
}
