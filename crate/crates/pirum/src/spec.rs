//! Model specification strings such as
//! `model=pi;family=crra;theta=0.7;lambda=0.003;kappa=0.05`.

use std::fmt;
use std::str::FromStr;

use pirum_core::{ChoiceModelSpec, ModelKind, ModelParams, UtilityFamily};

use crate::error::{Error, Result};

/// A possibly incomplete model specification. A bare model name such as
/// `pi` is accepted as well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpecString {
    pub kind: ModelKind,
    pub family: Option<UtilityFamily>,
    pub theta: Option<f64>,
    pub lambda: Option<f64>,
    pub kappa: Option<f64>,
}

impl FromStr for ModelSpecString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let usage = |msg: String| Error::Usage(format!("model spec `{s}`: {msg}"));
        let mut kind = None;
        let (mut family, mut theta, mut lambda, mut kappa) = (None, None, None, None);
        for item in s.split(';').map(str::trim).filter(|i| !i.is_empty()) {
            let Some((k, v)) = item.split_once('=') else {
                if kind.is_none() {
                    kind = Some(item.parse::<ModelKind>().map_err(|e| usage(e.to_string()))?);
                    continue;
                }
                return Err(usage(format!("expected `key=value`, got `{item}`")));
            };
            let (k, v) = (k.trim(), v.trim());
            let num = || v.parse::<f64>().map_err(|_| usage(format!("`{v}` is not a number")));
            match k {
                "model" => kind = Some(v.parse::<ModelKind>().map_err(|e| usage(e.to_string()))?),
                "family" => family = Some(v.parse::<UtilityFamily>().map_err(|e| usage(e.to_string()))?),
                "theta" | "gamma" | "alpha" => theta = Some(num()?),
                "lambda" => lambda = Some(num()?),
                "kappa" => kappa = Some(num()?),
                other => return Err(usage(format!("unknown key `{other}`"))),
            }
        }
        let kind = kind.ok_or_else(|| usage("missing `model=`".into()))?;
        Ok(ModelSpecString { kind, family, theta, lambda, kappa })
    }
}

impl fmt::Display for ModelSpecString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "model={}", self.kind)?;
        if let Some(v) = self.family {
            write!(f, ";family={v}")?;
        }
        for (name, v) in [("theta", self.theta), ("lambda", self.lambda), ("kappa", self.kappa)] {
            if let Some(v) = v {
                write!(f, ";{name}={v}")?;
            }
        }
        Ok(())
    }
}

impl ModelSpecString {
    /// A complete specification; the family defaults to CRRA.
    pub fn complete(&self) -> Result<ChoiceModelSpec> {
        let missing = |name: &str| Error::Usage(format!("model spec `{self}` needs `{name}=`"));
        let params = ModelParams::new(
            self.theta.ok_or_else(|| missing("theta"))?,
            self.lambda.ok_or_else(|| missing("lambda"))?,
            self.kappa.ok_or_else(|| missing("kappa"))?,
        )
        .map_err(|e| Error::Usage(e.to_string()))?;
        Ok(ChoiceModelSpec { kind: self.kind, family: self.family.unwrap_or(UtilityFamily::Crra), params })
    }
}
