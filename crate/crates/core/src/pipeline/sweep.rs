use std::str::FromStr;

use super::eval::{evaluate, ClassFilter, EvalOptions, EvalReport};
use super::train::{train, TrainConfig};
use crate::error::{Error, Result};
use crate::losses::WeightMode;
use crate::synthdata::{Dataset, Split};

/// Hyperparameters that [`sweep`] can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Tau,
    Kappa,
    Lambda,
    WeightMode,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Tau => "tau",
            SweepParam::Kappa => "kappa",
            SweepParam::Lambda => "lambda",
            SweepParam::WeightMode => "weight_mode",
        }
    }

    /// Copy of `base` with this parameter set to `value`.
    ///
    /// `weight_mode = constant_one` also puts the positive into the
    /// denominator, which makes the contrastive term plain InfoNCE.
    pub fn apply(self, base: &TrainConfig, value: &str) -> Result<TrainConfig> {
        let mut cfg = base.clone();
        let number = || {
            value
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("{}: `{value}` is not a number", self.name())))
        };
        match self {
            SweepParam::Tau => cfg.contrastive.tau = number()?,
            SweepParam::Kappa => cfg.total.kappa = number()?,
            SweepParam::Lambda => cfg.angle.lambda = number()?,
            SweepParam::WeightMode => {
                let mode = WeightMode::from_str(value.trim())?;
                cfg.contrastive.weight_mode = mode;
                cfg.contrastive.include_positive_in_denominator = mode == WeightMode::ConstantOne;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tau" => Ok(SweepParam::Tau),
            "kappa" => Ok(SweepParam::Kappa),
            "lambda" => Ok(SweepParam::Lambda),
            "weight_mode" => Ok(SweepParam::WeightMode),
            other => Err(Error::UnknownParameter(other.to_string())),
        }
    }
}

/// Validation-split reports of one trained configuration.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub all: EvalReport,
    pub seen: Option<EvalReport>,
    pub unseen: Option<EvalReport>,
}

impl SweepRow {
    pub fn scopes(&self) -> Vec<(&'static str, &EvalReport)> {
        let mut out = vec![("all", &self.all)];
        out.extend(self.seen.as_ref().map(|r| ("seen", r)));
        out.extend(self.unseen.as_ref().map(|r| ("unseen", r)));
        out
    }
}

fn optional(result: Result<EvalReport>) -> Result<Option<EvalReport>> {
    match result {
        Ok(r) => Ok(Some(r)),
        Err(Error::EmptySplit(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Trains and evaluates once per value, every run using `base.seed`.
/// All values are parsed and validated before any training starts.
pub fn sweep(
    dataset: &Dataset,
    param: &str,
    values: &[String],
    base: &TrainConfig,
    options: EvalOptions,
) -> Result<Vec<SweepRow>> {
    let param = SweepParam::from_str(param)?;
    if values.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one value".into()));
    }
    let configs = values.iter().map(|v| param.apply(base, v)).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(values.len());
    for (value, cfg) in values.iter().zip(configs) {
        let params = train(dataset, &cfg)?.params;
        rows.push(SweepRow {
            param: param.name().to_string(),
            value: value.trim().to_string(),
            all: evaluate(&params, dataset, Split::Val, &ClassFilter::All, options)?,
            seen: optional(evaluate(&params, dataset, Split::Val, &ClassFilter::Seen, options))?,
            unseen: optional(evaluate(&params, dataset, Split::Val, &ClassFilter::Unseen, options))?,
        });
    }
    Ok(rows)
}
