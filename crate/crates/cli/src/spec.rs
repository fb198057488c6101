//! Strategies as written on the command line: `baseline`,
//! `ns`, `vst`, `crest`, `cast`, optionally with a parameter after a colon
//! (`cast:0.5`, `ns:0.3`, `crest:0.2`).

use std::fmt;
use std::str::FromStr;

use cast::strategies::StrategyConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Baseline,
    Ns,
    Vst,
    Crest,
    Cast,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Baseline => "baseline",
            StrategyKind::Ns => "ns",
            StrategyKind::Vst => "vst",
            StrategyKind::Crest => "crest",
            StrategyKind::Cast => "cast",
        }
    }

    pub fn is_self_training(self) -> bool {
        matches!(
            self,
            StrategyKind::Vst | StrategyKind::Crest | StrategyKind::Cast
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    pub param: Option<f64>,
}

/// Default rate when `ns` is requested without one.
pub const DEFAULT_NS_GAMMA: f64 = 0.1;
pub const DEFAULT_CAST_BETA: f64 = 1.0;

/// Values given by `--beta`, `--alpha` and `--gamma`, used when a spec
/// carries no parameter of its own.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParamFlags {
    pub beta: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
}

impl StrategySpec {
    pub fn label(&self) -> String {
        self.to_string()
    }

    /// The self-training strategy, or `None` for baseline and NS.
    pub fn self_training(&self, flags: &ParamFlags) -> Option<StrategyConfig> {
        match self.kind {
            StrategyKind::Baseline | StrategyKind::Ns => None,
            StrategyKind::Vst => Some(StrategyConfig::Vst),
            StrategyKind::Crest => Some(StrategyConfig::Crest {
                alpha: self
                    .param
                    .or(flags.alpha)
                    .unwrap_or(cast::strategies::DEFAULT_CREST_ALPHA),
            }),
            StrategyKind::Cast => Some(StrategyConfig::Cast {
                beta: self.param.or(flags.beta).unwrap_or(DEFAULT_CAST_BETA),
            }),
        }
    }

    /// Negative-sampling rate for the learner, if this spec sets one.
    pub fn gamma(&self, flags: &ParamFlags) -> Option<f64> {
        match self.kind {
            StrategyKind::Ns => Some(self.param.or(flags.gamma).unwrap_or(DEFAULT_NS_GAMMA)),
            _ => flags.gamma,
        }
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.param {
            Some(p) => write!(f, "{}:{p}", self.kind.name()),
            None => f.write_str(self.kind.name()),
        }
    }
}

impl FromStr for StrategySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let kind = match name.trim() {
            "baseline" => StrategyKind::Baseline,
            "ns" => StrategyKind::Ns,
            "vst" => StrategyKind::Vst,
            "crest" => StrategyKind::Crest,
            "cast" => StrategyKind::Cast,
            other => {
                return Err(format!(
                    "unknown strategy `{other}` (expected baseline, ns, vst, crest or cast)"
                ))
            }
        };
        let param = match param {
            None => None,
            Some(p) => {
                if matches!(kind, StrategyKind::Baseline | StrategyKind::Vst) {
                    return Err(format!("strategy `{name}` takes no parameter"));
                }
                let v: f64 = p
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad parameter `{p}` for `{name}`"))?;
                if !v.is_finite() {
                    return Err(format!("parameter for `{name}` must be finite"));
                }
                Some(v)
            }
        };
        Ok(StrategySpec { kind, param })
    }
}
