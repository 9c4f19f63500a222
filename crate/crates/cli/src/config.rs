//! Scan configuration: one JSON document plus `--set` overrides.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tunnelkit::dynamics::RegionKind;
use tunnelkit::operators::{DefectKind, MomentumRep};
use tunnelkit::potential::PotentialSpec;
use tunnelkit::wkb::Branch;

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    TurningPoints,
    Trajectory,
    Period,
    WkbProfile,
    TransmissionScan,
    OperatorCheck,
    MassTransform,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::TurningPoints => "turning_points",
            Quantity::Trajectory => "trajectory",
            Quantity::Period => "period",
            Quantity::WkbProfile => "wkb_profile",
            Quantity::TransmissionScan => "transmission_scan",
            Quantity::OperatorCheck => "operator_check",
            Quantity::MassTransform => "mass_transform",
        }
    }

    fn needs_potential(self) -> bool {
        !matches!(self, Quantity::OperatorCheck | Quantity::MassTransform)
    }

    /// Constants that must be present (directly or through the sweep).
    fn required(self) -> &'static [&'static str] {
        match self {
            Quantity::TurningPoints | Quantity::Period | Quantity::WkbProfile | Quantity::TransmissionScan => &["E"],
            Quantity::MassTransform => &["v"],
            Quantity::Trajectory | Quantity::OperatorCheck => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    /// A constants key such as `E`, or `potential.params.<field>`.
    pub parameter: String,
    pub start: f64,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

fn one() -> usize {
    1
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        let stop = self.stop.unwrap_or(self.start);
        if self.count == 1 {
            return vec![self.start];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i == self.count - 1 {
                    return stop;
                }
                let f = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.start + (stop - self.start) * f,
                    Spacing::Log => (self.start.ln() + (stop.ln() - self.start.ln()) * f).exp(),
                }
            })
            .collect()
    }

    /// Column name of the swept parameter.
    pub fn column(&self) -> &str {
        self.parameter.rsplit('.').next().unwrap_or(&self.parameter)
    }

    fn potential_field(&self) -> Option<&str> {
        self.parameter.strip_prefix("potential.params.")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default)]
    pub region: Option<RegionKind>,
    #[serde(default)]
    pub branch: Option<Branch>,
    #[serde(default)]
    pub rep: Option<MomentumRep>,
    #[serde(default)]
    pub check: Option<DefectKind>,
    #[serde(default)]
    pub stop_at_turning_point: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default)]
    pub quantity: Option<Quantity>,
    #[serde(default)]
    pub potential: Option<Value>,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    #[serde(default)]
    pub options: Options,
    #[serde(default)]
    pub output: OutputSpec,
}

/// One evaluation point of a scan.
#[derive(Debug, Clone)]
pub struct Point {
    pub index: usize,
    /// Value of the swept parameter, if any.
    pub swept: Option<f64>,
    pub potential: Option<PotentialSpec>,
    pub constants: BTreeMap<String, f64>,
}

impl Point {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.constants.get(key).copied()
    }

    pub fn get_or(&self, key: &str, default: f64) -> f64 {
        self.get(key).unwrap_or(default)
    }
}

/// Applies `key=value` overrides, where `key` is a dotted path into the
/// configuration and `value` is JSON (bare words are taken as strings).
pub fn apply_overrides(mut doc: Value, overrides: &[String]) -> Result<Value, UsageError> {
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| UsageError(format!("--set expects key=value, got `{item}`")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut node = &mut doc;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            if part.is_empty() {
                return Err(UsageError(format!("empty path segment in `{key}`")));
            }
            if !node.is_object() {
                if node.is_null() {
                    *node = Value::Object(Default::default());
                } else {
                    return Err(UsageError(format!("`{key}` descends into a non-object")));
                }
            }
            let map = node.as_object_mut().expect("object");
            if i == parts.len() - 1 {
                map.insert(part.to_string(), value.clone());
                break;
            }
            node = map.entry(part.to_string()).or_insert(Value::Null);
        }
    }
    Ok(doc)
}

impl ScanConfig {
    pub fn from_value(doc: Value) -> Result<Self, UsageError> {
        serde_json::from_value(doc).map_err(|e| UsageError(format!("config: {e}")))
    }

    /// Validates the configuration for `quantity` and expands the sweep.
    pub fn points(&self, quantity: Quantity) -> Result<Vec<Point>, UsageError> {
        if let Some(q) = self.quantity {
            if q != quantity {
                return Err(UsageError(format!(
                    "config is for `{}` but the subcommand is `{}`",
                    q.name(),
                    quantity.name()
                )));
            }
        }
        let values = match &self.sweep {
            None => vec![None],
            Some(sweep) => {
                if sweep.parameter.is_empty() {
                    return Err(UsageError("sweep.parameter is empty".to_string()));
                }
                if sweep.count == 0 {
                    return Err(UsageError("sweep.count must be at least 1".to_string()));
                }
                if sweep.count > 1 {
                    let stop = sweep
                        .stop
                        .ok_or_else(|| UsageError("sweep.stop is required when count > 1".to_string()))?;
                    if !(sweep.start < stop) {
                        return Err(UsageError(format!(
                            "sweep needs start < stop, got {} and {stop}",
                            sweep.start
                        )));
                    }
                    if sweep.spacing == Spacing::Log && !(sweep.start > 0.0) {
                        return Err(UsageError("log spacing needs a positive start".to_string()));
                    }
                }
                if sweep.potential_field().is_none() {
                    if sweep.parameter.contains('.') {
                        return Err(UsageError(format!(
                            "cannot sweep `{}`: use a constants key or potential.params.<field>",
                            sweep.parameter
                        )));
                    }
                    if self.constants.contains_key(&sweep.parameter) {
                        return Err(UsageError(format!(
                            "`{}` is both swept and fixed in constants",
                            sweep.parameter
                        )));
                    }
                }
                sweep.values().into_iter().map(Some).collect()
            }
        };
        for key in quantity.required() {
            let swept = self.sweep.as_ref().is_some_and(|s| s.parameter == *key);
            if !swept && !self.constants.contains_key(*key) {
                return Err(UsageError(format!("constants.{key} is required for {}", quantity.name())));
            }
        }
        if quantity.needs_potential() && self.potential.is_none() {
            return Err(UsageError(format!("a potential is required for {}", quantity.name())));
        }

        let mut points = Vec::with_capacity(values.len());
        for (index, swept) in values.into_iter().enumerate() {
            let mut constants = self.constants.clone();
            let mut potential_doc = self.potential.clone();
            if let (Some(sweep), Some(v)) = (&self.sweep, swept) {
                match sweep.potential_field() {
                    Some(field) => {
                        let doc = potential_doc
                            .as_mut()
                            .ok_or_else(|| UsageError("sweeping a potential parameter needs a potential".to_string()))?;
                        let params = doc
                            .get_mut("params")
                            .and_then(Value::as_object_mut)
                            .ok_or_else(|| UsageError("potential.params must be an object".to_string()))?;
                        if !params.contains_key(field) {
                            return Err(UsageError(format!("potential.params has no field `{field}`")));
                        }
                        params.insert(field.to_string(), Value::from(v));
                    }
                    None => {
                        constants.insert(sweep.parameter.clone(), v);
                    }
                }
            }
            let potential = match potential_doc {
                Some(doc) => Some(
                    serde_json::from_value::<PotentialSpec>(doc).map_err(|e| UsageError(format!("potential: {e}")))?,
                ),
                None => None,
            };
            points.push(Point {
                index,
                swept,
                potential,
                constants,
            });
        }
        Ok(points)
    }
}
