//! Layout graphs: device and robot instances joined by `grouped` (pipeline)
//! or `associated` (robot-served) connections.
//!
//! Pairs without a connection are `unconnected`; that property is never
//! stored. An associated connection is a two-way link served by one robot,
//! so its endpoints are kept in sorted order. Grouped connections keep their
//! direction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::error::LayoutError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rho {
    Grouped,
    Associated,
    Unconnected,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Connection {
    pub from: String,
    pub to: String,
    pub rho: Rho,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot: Option<String>,
}

impl Connection {
    pub fn grouped(from: impl Into<String>, to: impl Into<String>) -> Self {
        Connection { from: from.into(), to: to.into(), rho: Rho::Grouped, robot: None }
    }

    pub fn associated(a: impl Into<String>, b: impl Into<String>, robot: impl Into<String>) -> Self {
        Connection { from: a.into(), to: b.into(), rho: Rho::Associated, robot: Some(robot.into()) }
            .normalized()
    }

    fn normalized(mut self) -> Self {
        if self.rho == Rho::Associated && self.from > self.to {
            std::mem::swap(&mut self.from, &mut self.to);
        }
        self
    }

    fn key(&self) -> (&str, &str, Rho) {
        (&self.from, &self.to, self.rho)
    }

    pub fn touches(&self, device: &str) -> bool {
        self.from == device || self.to == device
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeviceInstance {
    pub id: String,
    pub device_type: String,
}

impl DeviceInstance {
    pub fn new(id: impl Into<String>, device_type: impl Into<String>) -> Self {
        DeviceInstance { id: id.into(), device_type: device_type.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RobotInstance {
    pub id: String,
    pub robot_type: String,
}

impl RobotInstance {
    pub fn new(id: impl Into<String>, robot_type: impl Into<String>) -> Self {
        RobotInstance { id: id.into(), robot_type: robot_type.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "target")]
pub enum Element {
    Device(DeviceInstance),
    Robot(RobotInstance),
    Connection(Connection),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditKind {
    Insertion,
    Deletion,
    Substitution,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum EditOp {
    Insert { element: Element },
    Delete { element: Element },
    Substitute { old: Element, new: Element },
}

impl EditOp {
    pub fn insert(element: Element) -> Self {
        EditOp::Insert { element }
    }

    pub fn delete(element: Element) -> Self {
        EditOp::Delete { element }
    }

    pub fn kind(&self) -> EditKind {
        match self {
            EditOp::Insert { .. } => EditKind::Insertion,
            EditOp::Delete { .. } => EditKind::Deletion,
            EditOp::Substitute { .. } => EditKind::Substitution,
        }
    }

    pub fn inverse(&self) -> EditOp {
        match self {
            EditOp::Insert { element } => EditOp::Delete { element: element.clone() },
            EditOp::Delete { element } => EditOp::Insert { element: element.clone() },
            EditOp::Substitute { old, new } => EditOp::Substitute { old: new.clone(), new: old.clone() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "LayoutFile", try_from = "LayoutFile")]
pub struct Layout {
    devices: BTreeMap<String, String>,
    robots: BTreeMap<String, String>,
    connections: BTreeSet<Connection>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutFile {
    devices: Vec<DeviceInstance>,
    #[serde(default)]
    robots: Vec<RobotInstance>,
    #[serde(default)]
    connections: Vec<Connection>,
}

impl From<Layout> for LayoutFile {
    fn from(l: Layout) -> Self {
        LayoutFile {
            devices: l.devices().collect(),
            robots: l.robots().collect(),
            connections: l.connections.into_iter().collect(),
        }
    }
}

impl TryFrom<LayoutFile> for Layout {
    type Error = LayoutError;

    fn try_from(file: LayoutFile) -> Result<Self, LayoutError> {
        let mut l = Layout::new();
        for d in file.devices {
            l.insert(&Element::Device(d))?;
        }
        for r in file.robots {
            l.insert(&Element::Robot(r))?;
        }
        for c in file.connections {
            l.insert(&Element::Connection(c))?;
        }
        Ok(l)
    }
}

fn inapplicable(msg: impl Into<String>) -> LayoutError {
    LayoutError::Inapplicable(msg.into())
}

impl Layout {
    pub fn new() -> Self {
        Layout::default()
    }

    pub fn devices(&self) -> impl Iterator<Item = DeviceInstance> + '_ {
        self.devices.iter().map(|(id, ty)| DeviceInstance::new(id, ty))
    }

    pub fn device_ids(&self) -> impl Iterator<Item = &str> {
        self.devices.keys().map(String::as_str)
    }

    pub fn device_type(&self, id: &str) -> Option<&str> {
        self.devices.get(id).map(String::as_str)
    }

    pub fn device_count(&self) -> usize {
        self.devices.len()
    }

    pub fn robots(&self) -> impl Iterator<Item = RobotInstance> + '_ {
        self.robots.iter().map(|(id, ty)| RobotInstance::new(id, ty))
    }

    pub fn robot_ids(&self) -> impl Iterator<Item = &str> {
        self.robots.keys().map(String::as_str)
    }

    pub fn robot_type(&self, id: &str) -> Option<&str> {
        self.robots.get(id).map(String::as_str)
    }

    pub fn connections(&self) -> impl Iterator<Item = &Connection> {
        self.connections.iter()
    }

    pub fn has_connection(&self, c: &Connection) -> bool {
        self.connections.contains(&c.clone().normalized())
    }

    pub fn grouped_count(&self) -> usize {
        self.connections.iter().filter(|c| c.rho == Rho::Grouped).count()
    }

    pub fn associated_of<'a>(&'a self, robot: &'a str) -> impl Iterator<Item = &'a Connection> + 'a {
        self.connections
            .iter()
            .filter(move |c| c.rho == Rho::Associated && c.robot.as_deref() == Some(robot))
    }

    /// First free id of the form `<type>#<n>` across devices and robots.
    pub fn fresh_id(&self, type_name: &str) -> String {
        (1..)
            .map(|n| format!("{type_name}#{n}"))
            .find(|id| !self.devices.contains_key(id) && !self.robots.contains_key(id))
            .expect("unbounded id space")
    }

    pub fn add_device(&mut self, id: impl Into<String>, device_type: impl Into<String>) -> Result<(), LayoutError> {
        self.apply_in_place(&EditOp::insert(Element::Device(DeviceInstance::new(id, device_type))))
    }

    pub fn add_robot(&mut self, id: impl Into<String>, robot_type: impl Into<String>) -> Result<(), LayoutError> {
        self.apply_in_place(&EditOp::insert(Element::Robot(RobotInstance::new(id, robot_type))))
    }

    pub fn connect(&mut self, c: Connection) -> Result<(), LayoutError> {
        self.apply_in_place(&EditOp::insert(Element::Connection(c)))
    }

    /// Returns a new layout differing from `self` by exactly `edit`.
    pub fn apply_edit(&self, edit: &EditOp) -> Result<Layout, LayoutError> {
        let mut next = self.clone();
        next.apply_in_place(edit)?;
        Ok(next)
    }

    pub fn apply_in_place(&mut self, edit: &EditOp) -> Result<(), LayoutError> {
        match edit {
            EditOp::Insert { element } => self.insert(element),
            EditOp::Delete { element } => self.delete(element),
            EditOp::Substitute { old, new } => self.substitute(old, new),
        }
    }

    fn check_connection(&self, c: &Connection) -> Result<(), LayoutError> {
        for end in [&c.from, &c.to] {
            if !self.devices.contains_key(end) {
                return Err(LayoutError::UnknownDevice(end.clone()));
            }
        }
        if c.from == c.to {
            return Err(inapplicable(format!("self-connection on `{}`", c.from)));
        }
        match (c.rho, &c.robot) {
            (Rho::Unconnected, _) => Err(inapplicable("unconnected pairs are not stored")),
            (Rho::Grouped, None) => Ok(()),
            (Rho::Grouped, Some(_)) => Err(inapplicable("grouped connection names a robot")),
            (Rho::Associated, None) => Err(inapplicable("associated connection without robot")),
            (Rho::Associated, Some(r)) if !self.robots.contains_key(r) => {
                Err(LayoutError::UnknownRobot(r.clone()))
            }
            (Rho::Associated, Some(_)) => Ok(()),
        }
    }

    fn insert(&mut self, element: &Element) -> Result<(), LayoutError> {
        match element {
            Element::Device(d) => {
                if self.devices.contains_key(&d.id) || self.robots.contains_key(&d.id) {
                    return Err(inapplicable(format!("id `{}` already in use", d.id)));
                }
                self.devices.insert(d.id.clone(), d.device_type.clone());
            }
            Element::Robot(r) => {
                if self.devices.contains_key(&r.id) || self.robots.contains_key(&r.id) {
                    return Err(inapplicable(format!("id `{}` already in use", r.id)));
                }
                self.robots.insert(r.id.clone(), r.robot_type.clone());
            }
            Element::Connection(c) => {
                let c = c.clone().normalized();
                self.check_connection(&c)?;
                if self.connections.iter().any(|x| x.key() == c.key()) {
                    return Err(inapplicable(format!(
                        "connection {} -> {} ({:?}) already present",
                        c.from, c.to, c.rho
                    )));
                }
                self.connections.insert(c);
            }
        }
        Ok(())
    }

    fn delete(&mut self, element: &Element) -> Result<(), LayoutError> {
        match element {
            Element::Device(d) => {
                match self.devices.get(&d.id) {
                    Some(ty) if *ty == d.device_type => {}
                    Some(_) => return Err(inapplicable(format!("device `{}` has a different type", d.id))),
                    None => return Err(LayoutError::UnknownDevice(d.id.clone())),
                }
                if self.connections.iter().any(|c| c.touches(&d.id)) {
                    return Err(inapplicable(format!(
                        "device `{}` still has connections; delete them first",
                        d.id
                    )));
                }
                self.devices.remove(&d.id);
            }
            Element::Robot(r) => {
                match self.robots.get(&r.id) {
                    Some(ty) if *ty == r.robot_type => {}
                    Some(_) => return Err(inapplicable(format!("robot `{}` has a different type", r.id))),
                    None => return Err(LayoutError::UnknownRobot(r.id.clone())),
                }
                if self.associated_of(&r.id).next().is_some() {
                    return Err(inapplicable(format!(
                        "robot `{}` still serves connections; delete them first",
                        r.id
                    )));
                }
                self.robots.remove(&r.id);
            }
            Element::Connection(c) => {
                if !self.connections.remove(&c.clone().normalized()) {
                    return Err(inapplicable(format!("no connection {} -> {}", c.from, c.to)));
                }
            }
        }
        Ok(())
    }

    fn substitute(&mut self, old: &Element, new: &Element) -> Result<(), LayoutError> {
        match (old, new) {
            (Element::Device(a), Element::Device(b)) => {
                if a.id != b.id {
                    return Err(inapplicable("device substitution must keep the id"));
                }
                match self.devices.get_mut(&a.id) {
                    Some(ty) if *ty == a.device_type => *ty = b.device_type.clone(),
                    Some(_) => return Err(inapplicable(format!("device `{}` has a different type", a.id))),
                    None => return Err(LayoutError::UnknownDevice(a.id.clone())),
                }
            }
            (Element::Robot(a), Element::Robot(b)) => {
                if a.id != b.id {
                    return Err(inapplicable("robot substitution must keep the id"));
                }
                match self.robots.get_mut(&a.id) {
                    Some(ty) if *ty == a.robot_type => *ty = b.robot_type.clone(),
                    Some(_) => return Err(inapplicable(format!("robot `{}` has a different type", a.id))),
                    None => return Err(LayoutError::UnknownRobot(a.id.clone())),
                }
            }
            (Element::Connection(a), Element::Connection(b)) => {
                let a = a.clone().normalized();
                if !self.connections.contains(&a) {
                    return Err(inapplicable(format!("no connection {} -> {}", a.from, a.to)));
                }
                let mut trial = self.clone();
                trial.connections.remove(&a);
                trial.insert(&Element::Connection(b.clone()))?;
                *self = trial;
            }
            _ => return Err(inapplicable("substitution must keep the element kind")),
        }
        Ok(())
    }

    /// `c + n + γ`: associated connections served by the robot, distinct
    /// devices they touch, and the robot type's coefficient.
    pub fn dof(&self, robot: &str, cat: &Catalog) -> Result<f64, LayoutError> {
        let ty = self.robots.get(robot).ok_or_else(|| LayoutError::UnknownRobot(robot.into()))?;
        let gamma = cat.robot_type(ty).ok_or_else(|| LayoutError::UnknownRobotType(ty.clone()))?.gamma;
        let mut touched = BTreeSet::new();
        let mut links = 0usize;
        for c in self.associated_of(robot) {
            links += 1;
            touched.insert(c.from.as_str());
            touched.insert(c.to.as_str());
        }
        Ok(links as f64 + touched.len() as f64 + gamma)
    }

    /// Devices + grouped connections + total robot DoF.
    pub fn system_complexity(&self, cat: &Catalog) -> Result<f64, LayoutError> {
        let mut total = self.devices.len() as f64 + self.grouped_count() as f64;
        for r in self.robots.keys() {
            total += self.dof(r, cat)?;
        }
        Ok(total)
    }

    pub fn cost(&self, cat: &Catalog) -> Result<f64, LayoutError> {
        let mut total = 0.0;
        for ty in self.devices.values() {
            total += cat.device_type(ty).ok_or_else(|| LayoutError::UnknownDeviceType(ty.clone()))?.price;
        }
        for ty in self.robots.values() {
            total += cat.robot_type(ty).ok_or_else(|| LayoutError::UnknownRobotType(ty.clone()))?.price;
        }
        Ok(total + self.grouped_count() as f64 * cat.pipeline_unit_price)
    }

    /// Checks that every instance type exists in the catalog.
    pub fn check_types(&self, cat: &Catalog) -> Result<(), LayoutError> {
        for ty in self.devices.values() {
            cat.device_type(ty).ok_or_else(|| LayoutError::UnknownDeviceType(ty.clone()))?;
        }
        for ty in self.robots.values() {
            cat.robot_type(ty).ok_or_else(|| LayoutError::UnknownRobotType(ty.clone()))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("layout serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Layout, LayoutError> {
        serde_json::from_str(text).map_err(|e| LayoutError::Invalid(e.to_string()))
    }

    /// Graphviz digraph: grouped connections solid, associated connections
    /// dashed, two-headed and labeled with their robot.
    pub fn export_dot(&self) -> String {
        let mut out = String::from("digraph L {\n");
        for (id, ty) in &self.devices {
            let _ = writeln!(out, "  \"{id}\" [label=\"{id}\\n{ty}\"];");
        }
        for c in &self.connections {
            match c.rho {
                Rho::Grouped => {
                    let _ = writeln!(out, "  \"{}\" -> \"{}\";", c.from, c.to);
                }
                Rho::Associated => {
                    let robot = c.robot.as_deref().unwrap_or_default();
                    let _ = writeln!(
                        out,
                        "  \"{}\" -> \"{}\" [style=dashed, dir=both, label=\"{robot}\"];",
                        c.from, c.to
                    );
                }
                Rho::Unconnected => {}
            }
        }
        out.push_str("}\n");
        out
    }
}
