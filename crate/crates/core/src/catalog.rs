//! Grounding vocabulary: device types, robot types, prices, durations and
//! operation expansion rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CatalogError;

fn one() -> u32 {
    1
}

fn default_duration() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceType {
    pub name: String,
    pub capabilities: BTreeSet<String>,
    pub price: f64,
    /// Maximum number of concurrently active operations.
    #[serde(default = "one")]
    pub capacity: u32,
    /// Per-capability duration in seconds, used when a protocol omits `dur`.
    #[serde(default)]
    pub durations: BTreeMap<String, f64>,
}

impl DeviceType {
    pub fn provides(&self, capability: &str) -> bool {
        self.capabilities.contains(capability)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotType {
    pub name: String,
    pub price: f64,
    /// Complexity coefficient added to the robot's degrees of freedom.
    pub gamma: f64,
    /// Seconds per transfer between two stations.
    #[serde(default)]
    pub transport_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Catalog {
    #[serde(default)]
    pub devices: Vec<DeviceType>,
    #[serde(default)]
    pub robots: Vec<RobotType>,
    /// Operation type to the ordered capability steps that realize it.
    #[serde(default)]
    pub expansions: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub pipeline_unit_price: f64,
    /// Fallback duration when neither the protocol nor the device type has one.
    #[serde(default = "default_duration")]
    pub default_duration_s: f64,
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog {
            devices: Vec::new(),
            robots: Vec::new(),
            expansions: BTreeMap::new(),
            pipeline_unit_price: 0.0,
            default_duration_s: default_duration(),
        }
    }
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> CatalogError {
    CatalogError::Schema { path: path.into(), message: message.into() }
}

fn nonneg(path: String, v: f64) -> Result<(), CatalogError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(schema(path, format!("must be a finite nonnegative number, got {v}")))
    }
}

impl Catalog {
    pub fn from_json_str(text: &str) -> Result<Self, CatalogError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let catalog: Catalog = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            schema(path, e.into_inner().to_string())
        })?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let text = fs::read_to_string(path)
            .map_err(|source| CatalogError::Io { path: path.to_path_buf(), source })?;
        Catalog::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        let mut names = BTreeSet::new();
        for (i, d) in self.devices.iter().enumerate() {
            if d.name.is_empty() {
                return Err(schema(format!("devices[{i}].name"), "must not be empty"));
            }
            if !names.insert(d.name.as_str()) {
                return Err(CatalogError::Duplicate { kind: "device", name: d.name.clone() });
            }
            if d.capacity < 1 {
                return Err(schema(format!("devices[{i}].capacity"), "must be at least 1"));
            }
            nonneg(format!("devices[{i}].price"), d.price)?;
            for (op, secs) in &d.durations {
                if !d.capabilities.contains(op) {
                    return Err(schema(
                        format!("devices[{i}].durations.{op}"),
                        "duration given for a capability the device lacks",
                    ));
                }
                if !(secs.is_finite() && *secs > 0.0) {
                    return Err(schema(format!("devices[{i}].durations.{op}"), "must be positive"));
                }
            }
        }
        let mut names = BTreeSet::new();
        for (i, r) in self.robots.iter().enumerate() {
            if r.name.is_empty() {
                return Err(schema(format!("robots[{i}].name"), "must not be empty"));
            }
            if !names.insert(r.name.as_str()) {
                return Err(CatalogError::Duplicate { kind: "robot", name: r.name.clone() });
            }
            nonneg(format!("robots[{i}].price"), r.price)?;
            nonneg(format!("robots[{i}].gamma"), r.gamma)?;
            nonneg(format!("robots[{i}].transport_s"), r.transport_s)?;
        }
        for (op, steps) in &self.expansions {
            if steps.is_empty() {
                return Err(schema(format!("expansions.{op}"), "expansion must be nonempty"));
            }
        }
        nonneg("pipeline_unit_price".into(), self.pipeline_unit_price)?;
        if !(self.default_duration_s.is_finite() && self.default_duration_s > 0.0) {
            return Err(schema("default_duration_s", "must be positive"));
        }
        Ok(())
    }

    /// Capability steps for an operation type; the identity step when no
    /// rule exists.
    pub fn expand_operation(&self, op_type: &str) -> Vec<String> {
        self.expansions
            .get(op_type)
            .cloned()
            .unwrap_or_else(|| vec![op_type.to_string()])
    }

    pub fn capable_devices(&self, capability: &str) -> Vec<&DeviceType> {
        self.devices.iter().filter(|d| d.provides(capability)).collect()
    }

    /// Cheapest device type providing `capability`, ties by name.
    pub fn cheapest_device(&self, capability: &str) -> Option<&DeviceType> {
        self.capable_devices(capability)
            .into_iter()
            .min_by(|a, b| a.price.total_cmp(&b.price).then_with(|| a.name.cmp(&b.name)))
    }

    pub fn cheapest_robot(&self) -> Option<&RobotType> {
        self.robots
            .iter()
            .min_by(|a, b| a.price.total_cmp(&b.price).then_with(|| a.name.cmp(&b.name)))
    }

    pub fn device_type(&self, name: &str) -> Option<&DeviceType> {
        self.devices.iter().find(|d| d.name == name)
    }

    pub fn robot_type(&self, name: &str) -> Option<&RobotType> {
        self.robots.iter().find(|r| r.name == name)
    }

    /// Duration of `capability` on a device of type `device_type` when the
    /// protocol does not state one.
    pub fn default_duration(&self, device_type: &str, capability: &str) -> f64 {
        self.device_type(device_type)
            .and_then(|d| d.durations.get(capability).copied())
            .unwrap_or(self.default_duration_s)
    }
}
