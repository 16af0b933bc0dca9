//! Run configuration: a flat `key = value` file with command-line overrides.

use std::path::{Path, PathBuf};

use crate::error::{ConfigError, Error};
use crate::nonlinearity::PhiModel;

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemKind {
    Square,
    LShape,
    /// Mesh file in the plain-text format, solved with `f = 1`.
    MeshFile(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefineKind {
    Uniform,
    Adaptive,
}

/// How the Newton iteration is started on each level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitKind {
    /// Minimizer of the linear model `phi = w` on level 0, prolongation of
    /// the previous solution afterwards.
    Linear(f64),
    /// Same as `Linear` with the problem's default weight.
    Prolongate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub model: PhiModel,
    pub refine: RefineKind,
    pub theta: f64,
    pub levels: usize,
    pub max_ndof: Option<usize>,
    pub newton_tol: f64,
    pub newton_maxiter: usize,
    pub init: InitKind,
    /// Restart from the linear model on every level instead of prolongating.
    pub restart: bool,
    pub out: PathBuf,
    pub e_ref: Option<f64>,
    pub c_df: Option<f64>,
    pub kappa: f64,
    pub c_f: Option<f64>,
    /// Largest ndof for which the eigenvalue certificate is computed.
    pub gevp_max_ndof: usize,
    pub export_meshes: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::Square,
            model: PhiModel::ExampleA,
            refine: RefineKind::Uniform,
            theta: 0.3,
            levels: 5,
            max_ndof: None,
            newton_tol: 1e-12,
            newton_maxiter: 20,
            init: InitKind::Prolongate,
            restart: false,
            out: PathBuf::from("out"),
            e_ref: None,
            c_df: None,
            kappa: crate::estimator::KAPPA,
            c_f: None,
            gevp_max_ndof: 40_000,
            export_meshes: false,
        }
    }
}

fn value_err(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value { key: key.to_string(), msg: msg.into() }
}

fn positive(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v.parse().map_err(|_| value_err(key, format!("'{v}' is not a number")))?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(value_err(key, format!("must be positive, got {v}")));
    }
    Ok(x)
}

fn count(key: &str, v: &str) -> Result<usize, ConfigError> {
    let n: usize = v.parse().map_err(|_| value_err(key, format!("'{v}' is not a positive integer")))?;
    if n == 0 {
        return Err(value_err(key, "must be positive"));
    }
    Ok(n)
}

fn boolean(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(value_err(key, format!("'{v}' is not a boolean"))),
    }
}

impl RunConfig {
    /// Sets one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key.trim() {
            "problem" => {
                self.problem = match v {
                    "square" => ProblemKind::Square,
                    "lshape" | "l-shape" => ProblemKind::LShape,
                    "" => return Err(value_err(key, "empty")),
                    path => ProblemKind::MeshFile(PathBuf::from(path)),
                }
            }
            "model" => self.model = v.parse().map_err(|e: crate::error::ModelError| value_err(key, e.to_string()))?,
            "refine" => {
                self.refine = match v {
                    "uniform" => RefineKind::Uniform,
                    "adaptive" => RefineKind::Adaptive,
                    _ => return Err(value_err(key, format!("expected uniform or adaptive, got '{v}'"))),
                }
            }
            "theta" => {
                let t = positive(key, v)?;
                if t >= 1.0 {
                    return Err(value_err(key, "must lie in (0, 1)"));
                }
                self.theta = t;
            }
            "levels" => self.levels = count(key, v)?,
            "max_ndof" => self.max_ndof = Some(count(key, v)?),
            "newton_tol" => self.newton_tol = positive(key, v)?,
            "newton_maxiter" => self.newton_maxiter = count(key, v)?,
            "init" => {
                self.init = if v == "prolongate" {
                    InitKind::Prolongate
                } else {
                    let w = v
                        .strip_prefix("linear:")
                        .ok_or_else(|| value_err(key, format!("expected linear:<w> or prolongate, got '{v}'")))?;
                    InitKind::Linear(positive(key, w)?)
                }
            }
            "restart" => self.restart = boolean(key, v)?,
            "out" => {
                if v.is_empty() {
                    return Err(value_err(key, "empty"));
                }
                self.out = PathBuf::from(v);
            }
            "e_ref" => self.e_ref = Some(v.parse().map_err(|_| value_err(key, format!("'{v}' is not a number")))?),
            "c_df" => self.c_df = Some(positive(key, v)?),
            "kappa" => self.kappa = positive(key, v)?,
            "c_f" => self.c_f = Some(positive(key, v)?),
            "gevp_max_ndof" => {
                self.gevp_max_ndof = v.parse().map_err(|_| value_err(key, format!("'{v}' is not an integer")))?
            }
            "export_meshes" => self.export_meshes = boolean(key, v)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`. Blank
    /// lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, msg: format!("expected key = value, got '{line}'") })?;
            self.set(k, v).map_err(|e| match e {
                ConfigError::Syntax { .. } => e,
                other => ConfigError::Syntax { line: i + 1, msg: other.to_string() },
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Level-0 weight of the linear initialization.
    pub fn init_weight(&self) -> f64 {
        match self.init {
            InitKind::Linear(w) => w,
            InitKind::Prolongate => {
                if self.problem == ProblemKind::Square && self.model == PhiModel::ExampleA {
                    1.0
                } else {
                    2.5
                }
            }
        }
    }

    /// Serializes the configuration in the format read by `apply_text`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let problem = match &self.problem {
            ProblemKind::Square => "square".to_string(),
            ProblemKind::LShape => "lshape".to_string(),
            ProblemKind::MeshFile(p) => p.display().to_string(),
        };
        let refine = match self.refine {
            RefineKind::Uniform => "uniform",
            RefineKind::Adaptive => "adaptive",
        };
        let init = match self.init {
            InitKind::Linear(w) => format!("linear:{w}"),
            InitKind::Prolongate => "prolongate".to_string(),
        };
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("problem", problem);
        kv("model", self.model.to_string());
        kv("refine", refine.to_string());
        kv("theta", self.theta.to_string());
        kv("levels", self.levels.to_string());
        if let Some(n) = self.max_ndof {
            kv("max_ndof", n.to_string());
        }
        kv("newton_tol", self.newton_tol.to_string());
        kv("newton_maxiter", self.newton_maxiter.to_string());
        kv("init", init);
        kv("restart", self.restart.to_string());
        kv("out", self.out.display().to_string());
        if let Some(e) = self.e_ref {
            kv("e_ref", e.to_string());
        }
        if let Some(c) = self.c_df {
            kv("c_df", c.to_string());
        }
        kv("kappa", self.kappa.to_string());
        if let Some(c) = self.c_f {
            kv("c_f", c.to_string());
        }
        kv("gevp_max_ndof", self.gevp_max_ndof.to_string());
        kv("export_meshes", self.export_meshes.to_string());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_with_comments() {
        let mut c = RunConfig::default();
        c.apply_text("# run\nproblem = lshape\nrefine=adaptive # graded\n\ntheta = 0.5\nmodel = linear:2\nmax_ndof = 1000\n")
            .unwrap();
        assert_eq!(c.problem, ProblemKind::LShape);
        assert_eq!(c.refine, RefineKind::Adaptive);
        assert_eq!(c.theta, 0.5);
        assert_eq!(c.model, PhiModel::Linear(2.0));
        assert_eq!(c.max_ndof, Some(1000));
        assert_eq!(c.init_weight(), 2.5);
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = RunConfig::default();
        assert!(matches!(c.set("nope", "1"), Err(ConfigError::UnknownKey(_))));
        assert!(c.set("theta", "1.0").is_err());
        assert!(c.set("theta", "-0.1").is_err());
        assert!(c.set("levels", "0").is_err());
        assert!(c.set("init", "zero").is_err());
        assert!(matches!(c.apply_text("problem square"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(c.apply_text("a = 1\nkappa = x"), Err(ConfigError::Syntax { line: 1, .. })));
    }

    #[test]
    fn default_init_weights() {
        let c = RunConfig::default();
        assert_eq!(c.init_weight(), 1.0);
        let mut d = c.clone();
        d.model = PhiModel::ExampleB;
        assert_eq!(d.init_weight(), 2.5);
        d.set("init", "linear:4").unwrap();
        assert_eq!(d.init_weight(), 4.0);
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.apply_text("problem = lshape\nc_df = 7.5\ne_ref = -0.5\ninit = linear:2.5\nexport_meshes = true").unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }
}
