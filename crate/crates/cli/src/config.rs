//! Experiment config files and how they combine with command-line flags.
//!
//! A config file is a JSON object with optional `seed` and `out` keys and one
//! optional section per subcommand. Unknown keys anywhere are rejected.
//! Flags given on the command line win over the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::commands::{CompressArgs, EvalArgs, LowerboundArgs, SweepArgs, TrainArgs};
use crate::Failure;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub train: Option<TrainArgs>,
    pub compress: Option<CompressArgs>,
    pub sweep: Option<SweepArgs>,
    pub eval: Option<EvalArgs>,
    pub lowerbound: Option<LowerboundArgs>,
}

pub fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("schema error in config {}: {e}", path.display())))
}

/// Fills every flag left unset on the command line from the file section.
pub fn overlay<T>(file: Option<T>, cli: T) -> Result<T, Failure>
where
    T: Serialize + DeserializeOwned,
{
    let Some(file) = file else { return Ok(cli) };
    let to_value = |v: &T| serde_json::to_value(v).expect("arguments serialize");
    let (Value::Object(mut base), Value::Object(top)) = (to_value(&file), to_value(&cli)) else {
        unreachable!("argument structs serialize as objects")
    };
    for (key, value) in top {
        // `false` is how an absent switch looks.
        if !matches!(value, Value::Null | Value::Bool(false)) {
            base.insert(key, value);
        }
    }
    serde_json::from_value(Value::Object(base))
        .map_err(|e| Failure::Usage(format!("schema error: {e}")))
}
