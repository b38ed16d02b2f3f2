//! Flat `key = value` run configuration.

use std::fmt;
use std::str::FromStr;

use mas_core::estimator::{DEFAULT_CEILING, DEFAULT_FLOOR};
use mas_core::remesh::DEFAULT_CORRECTION_FACTOR;
use mas_core::{Config64, EstimatorParams, Problem64, SchemeKind};
use serde::Serialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Transport,
    Burgers,
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "transport" | "advection" => Ok(Self::Transport),
            "burgers" => Ok(Self::Burgers),
            other => Err(format!("unknown problem '{other}'")),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Transport => "transport",
            Self::Burgers => "burgers",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub problem: ProblemKind,
    #[serde(serialize_with = "scheme_name")]
    pub scheme: SchemeKind,
    pub n: usize,
    pub cfl: f64,
    pub t_final: f64,
    pub adaptive: bool,
    pub epsilon: f64,
    pub pw: f64,
    pub ceiling: f64,
    pub eps_corr: f64,
    pub remesh_reps: usize,
    pub x0: f64,
}

fn scheme_name<S: serde::Serializer>(k: &SchemeKind, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(k.name())
}

impl RunConfig {
    pub fn new(problem: ProblemKind, scheme: SchemeKind) -> Self {
        Self {
            problem,
            scheme,
            n: 200,
            cfl: 0.5,
            t_final: 0.3,
            adaptive: true,
            epsilon: DEFAULT_FLOOR,
            pw: 0.9,
            ceiling: DEFAULT_CEILING,
            eps_corr: DEFAULT_CORRECTION_FACTOR,
            remesh_reps: 1,
            x0: 0.3,
        }
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are skipped;
    /// `problem` and `scheme` are required, every other key has a default.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut problem = None;
        let mut scheme = None;
        let mut seen: Vec<String> = Vec::new();
        let mut rest: Vec<(String, String, usize)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = lineno + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {lineno}: expected key = value")))?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().to_string();
            if seen.contains(&key) {
                return Err(CliError::Config(format!("line {lineno}: duplicate key '{key}'")));
            }
            seen.push(key.clone());
            match key.as_str() {
                "problem" => problem = Some(value.parse::<ProblemKind>().map_err(|e| bad(lineno, e))?),
                "scheme" => {
                    scheme = Some(value.parse::<SchemeKind>().map_err(|e| bad(lineno, e.to_string()))?)
                }
                _ => rest.push((key, value, lineno)),
            }
        }
        let problem = problem.ok_or_else(|| CliError::Config("missing key 'problem'".into()))?;
        let scheme = scheme.ok_or_else(|| CliError::Config("missing key 'scheme'".into()))?;
        let mut cfg = Self::new(problem, scheme);
        for (key, value, lineno) in rest {
            match key.as_str() {
                "n" => cfg.n = number(&value, lineno)?,
                "cfl" => cfg.cfl = number(&value, lineno)?,
                "t_final" => cfg.t_final = number(&value, lineno)?,
                "adaptive" => cfg.adaptive = flag(&value, lineno)?,
                "epsilon" => cfg.epsilon = number(&value, lineno)?,
                "pw" => cfg.pw = number(&value, lineno)?,
                "ceiling" => cfg.ceiling = number(&value, lineno)?,
                "eps_corr" => cfg.eps_corr = number(&value, lineno)?,
                "remesh_reps" => cfg.remesh_reps = number(&value, lineno)?,
                "x0" => cfg.x0 = number(&value, lineno)?,
                other => return Err(CliError::Config(format!("line {lineno}: unknown key '{other}'"))),
            }
        }
        cfg.mas_config()?;
        cfg.problem_setup()?;
        Ok(cfg)
    }

    /// Validated solver configuration.
    pub fn mas_config(&self) -> Result<Config64, CliError> {
        let mut cfg = Config64::new(self.scheme, self.n, self.cfl, self.t_final, self.adaptive);
        cfg.estimator = EstimatorParams::new(self.epsilon, self.pw)
            .and_then(|p| p.with_ceiling(self.ceiling))
            .map_err(|e| CliError::Config(e.to_string()))?;
        cfg.correction_factor = self.eps_corr;
        cfg.remesh_repetitions = self.remesh_reps;
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn problem_setup(&self) -> Result<Problem64, CliError> {
        match self.problem {
            ProblemKind::Transport => Problem64::transport(self.x0, self.t_final),
            ProblemKind::Burgers => Problem64::burgers(self.x0, self.t_final),
        }
        .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Canonical text form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        format!(
            "problem = {}\nscheme = {}\nn = {}\ncfl = {:?}\nt_final = {:?}\nadaptive = {}\nepsilon = {:?}\npw = {:?}\nceiling = {:?}\neps_corr = {:?}\nremesh_reps = {}\nx0 = {:?}\n",
            self.problem,
            self.scheme.name(),
            self.n,
            self.cfl,
            self.t_final,
            if self.adaptive { "on" } else { "off" },
            self.epsilon,
            self.pw,
            self.ceiling,
            self.eps_corr,
            self.remesh_reps,
            self.x0,
        )
    }
}

fn bad(lineno: usize, msg: String) -> CliError {
    CliError::Config(format!("line {lineno}: {msg}"))
}

fn number<V: FromStr>(value: &str, lineno: usize) -> Result<V, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("line {lineno}: cannot parse '{value}'")))
}

fn flag(value: &str, lineno: usize) -> Result<bool, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("line {lineno}: '{value}' is not on/off"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_keys() {
        let cfg = RunConfig::parse("problem = burgers\nscheme = maccormack\n").unwrap();
        assert_eq!(cfg, RunConfig::new(ProblemKind::Burgers, SchemeKind::MacCormack));
    }

    #[test]
    fn comments_and_case() {
        let text = "# run\nProblem = transport  # inline\nscheme=ftcs\n\nadaptive = off\nn = 50\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.scheme, SchemeKind::Ftcs);
        assert!(!cfg.adaptive);
        assert_eq!(cfg.n, 50);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "scheme = ftcs\n",
            "problem = transport\n",
            "problem = transport\nscheme = ftcs\nspeed = 2\n",
            "problem = transport\nscheme = ftcs\nn = many\n",
            "problem = transport\nscheme = ftcs\nn = 5\n",
            "problem = transport\nscheme = ftcs\ncfl = 1.5\n",
            "problem = transport\nscheme = ftcs\nx0 = 2\n",
            "problem = transport\nscheme = ftcs\nepsilon = 0\n",
            "problem = transport\nscheme = ftcs\ncfl = 0.3\ncfl = 0.4\n",
            "problem = transport\nscheme = ftcs\njust words\n",
            "problem = shallow\nscheme = ftcs\n",
        ] {
            assert!(matches!(RunConfig::parse(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn text_form_round_trips() {
        let mut cfg = RunConfig::new(ProblemKind::Transport, SchemeKind::RichtmyerLW);
        cfg.cfl = 0.1 + 0.2;
        cfg.x0 = 1.0 / 3.0;
        cfg.adaptive = false;
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}
