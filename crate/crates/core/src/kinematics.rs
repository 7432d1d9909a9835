//! Robot model, forward kinematics and the ground-truth collision predicates.
//!
//! The robot is a torso chain with two arms mounted on the torso tip. Every
//! body carries collision spheres; voxels are treated as their circumscribing
//! spheres, so every predicate here reduces to sphere-vs-sphere overlap.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use nalgebra::{Isometry3, Matrix3, Point3, Rotation3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::config::{ChainConfig, ChainId, FullConfig};
use crate::error::{Error, Result};
use crate::voxel::{OccupancySet, VoxelGrid, VoxelId};

const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Debug, Clone)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub axis: Unit<Vector3<f64>>,
    /// Transform from the parent joint frame to this joint's frame at q = 0.
    pub origin: Isometry3<f64>,
    pub limits: [f64; 2],
}

impl Joint {
    pub fn new(
        name: impl Into<String>,
        kind: JointKind,
        axis: [f64; 3],
        origin: Isometry3<f64>,
        limits: [f64; 2],
    ) -> Result<Self> {
        let name = name.into();
        let axis = Vector3::from(axis);
        if (axis.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::Model(format!(
                "joint {name}: axis {axis:?} is not unit length"
            )));
        }
        if !(limits[0] <= limits[1]) {
            return Err(Error::Model(format!(
                "joint {name}: lower limit {} above upper limit {}",
                limits[0], limits[1]
            )));
        }
        Ok(Self {
            name,
            kind,
            axis: Unit::new_unchecked(axis),
            origin,
            limits,
        })
    }

    pub fn revolute(name: impl Into<String>, axis: [f64; 3], origin: Isometry3<f64>, limits: [f64; 2]) -> Result<Self> {
        Self::new(name, JointKind::Revolute, axis, origin, limits)
    }

    pub fn within_limits(&self, q: f64) -> bool {
        q >= self.limits[0] && q <= self.limits[1]
    }

    /// Parent-to-child transform at joint value `q`.
    pub fn transform(&self, q: f64) -> Isometry3<f64> {
        let motion = match self.kind {
            JointKind::Revolute => Isometry3::from_parts(
                Translation3::identity(),
                UnitQuaternion::from_axis_angle(&self.axis, q),
            ),
            JointKind::Prismatic => Isometry3::from_parts(
                Translation3::from(self.axis.into_inner() * q),
                UnitQuaternion::identity(),
            ),
        };
        self.origin * motion
    }
}

/// A sphere rigidly attached to one link of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionSphere {
    pub link: usize,
    pub offset: Vector3<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct Arm {
    /// Mount transform from the torso tip frame to the arm base.
    pub mount: Isometry3<f64>,
    pub joints: Vec<Joint>,
    pub spheres: Vec<CollisionSphere>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Body {
    Base,
    Torso,
    Arm1,
    Arm2,
}

impl Body {
    pub fn of_chain(chain: ChainId) -> Self {
        match chain {
            ChainId::Arm1 => Body::Arm1,
            ChainId::Arm2 => Body::Arm2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Body::Base => "base",
            Body::Torso => "torso",
            Body::Arm1 => "arm1",
            Body::Arm2 => "arm2",
        }
    }
}

/// Reference to one collision sphere, written `body:index` in robot files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SphereRef {
    pub body: Body,
    pub index: usize,
}

impl SphereRef {
    pub fn new(body: Body, index: usize) -> Self {
        Self { body, index }
    }

    fn ordered(a: SphereRef, b: SphereRef) -> (SphereRef, SphereRef) {
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

impl fmt::Display for SphereRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.body.name(), self.index)
    }
}

impl std::str::FromStr for SphereRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (body, index) = s
            .split_once(':')
            .ok_or_else(|| Error::Model(format!("sphere reference {s:?} is not body:index")))?;
        let body = match body {
            "base" => Body::Base,
            "torso" => Body::Torso,
            "arm1" => Body::Arm1,
            "arm2" => Body::Arm2,
            other => return Err(Error::Model(format!("unknown body {other:?}"))),
        };
        let index = index
            .parse()
            .map_err(|_| Error::Model(format!("bad sphere index in {s:?}")))?;
        Ok(SphereRef { body, index })
    }
}

/// Which of the five ways a full configuration can collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CollisionCondition {
    InterArm,
    SelfCollision(ChainId),
    Voxel(ChainId),
}

impl CollisionCondition {
    /// 1: inter-arm, 2/3: self-collision of chain 1/2, 4/5: voxel contact of chain 1/2.
    pub fn number(self) -> u8 {
        match self {
            CollisionCondition::InterArm => 1,
            CollisionCondition::SelfCollision(c) => 2 + c.index() as u8,
            CollisionCondition::Voxel(c) => 4 + c.index() as u8,
        }
    }

    /// Chain to blame, if the condition involves only one.
    pub fn chain(self) -> Option<ChainId> {
        match self {
            CollisionCondition::InterArm => None,
            CollisionCondition::SelfCollision(c) | CollisionCondition::Voxel(c) => Some(c),
        }
    }
}

impl fmt::Display for CollisionCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CollisionCondition::InterArm => write!(f, "condition 1 (inter-arm)"),
            CollisionCondition::SelfCollision(c) => {
                write!(f, "condition {} (self-collision, chain {})", self.number(), c.number())
            }
            CollisionCondition::Voxel(c) => {
                write!(f, "condition {} (voxel contact, chain {})", self.number(), c.number())
            }
        }
    }
}

/// World-frame sphere centers grouped by body. Radii live on the model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlacedSpheres {
    pub base: Vec<Point3<f64>>,
    pub torso: Vec<Point3<f64>>,
    pub arm1: Vec<Point3<f64>>,
    pub arm2: Vec<Point3<f64>>,
}

impl PlacedSpheres {
    pub fn body(&self, body: Body) -> &[Point3<f64>] {
        match body {
            Body::Base => &self.base,
            Body::Torso => &self.torso,
            Body::Arm1 => &self.arm1,
            Body::Arm2 => &self.arm2,
        }
    }

    pub fn arm(&self, chain: ChainId) -> &[Point3<f64>] {
        self.body(Body::of_chain(chain))
    }

    pub fn len(&self) -> usize {
        self.base.len() + self.torso.len() + self.arm1.len() + self.arm2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A placed sphere with its body tag, as returned by [`RobotModel::world_spheres`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldSphere {
    pub body: Body,
    pub center: Point3<f64>,
    pub radius: f64,
}

#[inline]
pub(crate) fn spheres_overlap(a: &Point3<f64>, ra: f64, b: &Point3<f64>, rb: f64) -> bool {
    let reach = ra + rb;
    (a - b).norm_squared() < reach * reach
}

#[derive(Debug, Clone, Copy)]
struct CheckedPair {
    a: SphereRef,
    b: SphereRef,
}

/// Predicate deciding whether a chain configuration is admissible as a
/// roadmap node (for example center-of-mass or tool orientation bounds).
pub type ConstraintHook<'a> = &'a (dyn Fn(ChainId, &ChainConfig) -> bool + Sync);

#[derive(Debug, Clone)]
pub struct RobotModel {
    pub name: String,
    base_spheres: Vec<(Point3<f64>, f64)>,
    torso: Vec<Joint>,
    torso_spheres: Vec<CollisionSphere>,
    arms: [Arm; 2],
    exempt: Vec<(SphereRef, SphereRef)>,
    checked: Vec<(SphereRef, SphereRef)>,
    self_pairs: [Vec<CheckedPair>; 2],
    inter_pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Link {
    Base,
    Torso(usize),
    Arm(ChainId, usize),
}

impl RobotModel {
    pub fn new(
        name: impl Into<String>,
        base_spheres: Vec<(Point3<f64>, f64)>,
        torso: Vec<Joint>,
        torso_spheres: Vec<CollisionSphere>,
        arms: [Arm; 2],
        exempt: Vec<(SphereRef, SphereRef)>,
        checked: Vec<(SphereRef, SphereRef)>,
    ) -> Result<Self> {
        let mut model = Self {
            name: name.into(),
            base_spheres,
            torso,
            torso_spheres,
            arms,
            exempt,
            checked,
            self_pairs: [Vec::new(), Vec::new()],
            inter_pairs: Vec::new(),
        };
        model.validate()?;
        model.derive_pairs()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        if self.torso.is_empty() || self.arms.iter().any(|a| a.joints.is_empty()) {
            return Err(Error::Model(
                "torso and both arms need at least one joint".into(),
            ));
        }
        for joint in self.torso.iter().chain(self.arms.iter().flat_map(|a| a.joints.iter())) {
            let rot = joint.origin.rotation.to_rotation_matrix();
            if (rot.matrix().transpose() * rot.matrix() - Matrix3::identity()).amax() > UNIT_TOL {
                return Err(Error::Model(format!(
                    "joint {}: origin rotation is not orthonormal",
                    joint.name
                )));
            }
        }
        let check = |spheres: &[CollisionSphere], links: usize, body: Body| -> Result<()> {
            for (i, s) in spheres.iter().enumerate() {
                if s.link >= links {
                    return Err(Error::Model(format!(
                        "sphere {}:{i} references link {} of {links}",
                        body.name(),
                        s.link
                    )));
                }
                if !(s.radius > 0.0) {
                    return Err(Error::Model(format!(
                        "sphere {}:{i} has non-positive radius {}",
                        body.name(),
                        s.radius
                    )));
                }
            }
            Ok(())
        };
        check(&self.torso_spheres, self.torso.len(), Body::Torso)?;
        check(&self.arms[0].spheres, self.arms[0].joints.len(), Body::Arm1)?;
        check(&self.arms[1].spheres, self.arms[1].joints.len(), Body::Arm2)?;
        for (i, (_, r)) in self.base_spheres.iter().enumerate() {
            if !(*r > 0.0) {
                return Err(Error::Model(format!("sphere base:{i} has non-positive radius {r}")));
            }
        }
        for (a, b) in self.exempt.iter().chain(&self.checked) {
            for s in [a, b] {
                if s.index >= self.sphere_count(s.body) {
                    return Err(Error::Model(format!("collision pair references missing sphere {s}")));
                }
            }
        }
        let exempt: HashSet<_> = self.exempt.iter().map(|(a, b)| SphereRef::ordered(*a, *b)).collect();
        for (a, b) in &self.checked {
            if exempt.contains(&SphereRef::ordered(*a, *b)) {
                return Err(Error::Model(format!(
                    "pair ({a}, {b}) is listed as both exempt and checked"
                )));
            }
        }
        Ok(())
    }

    fn link_of(&self, s: SphereRef) -> Link {
        match s.body {
            Body::Base => Link::Base,
            Body::Torso => Link::Torso(self.torso_spheres[s.index].link),
            Body::Arm1 => Link::Arm(ChainId::Arm1, self.arms[0].spheres[s.index].link),
            Body::Arm2 => Link::Arm(ChainId::Arm2, self.arms[1].spheres[s.index].link),
        }
    }

    fn parent(&self, link: Link) -> Option<Link> {
        match link {
            Link::Base => None,
            Link::Torso(0) => Some(Link::Base),
            Link::Torso(k) => Some(Link::Torso(k - 1)),
            Link::Arm(_, 0) => Some(Link::Torso(self.torso.len() - 1)),
            Link::Arm(c, k) => Some(Link::Arm(c, k - 1)),
        }
    }

    /// Same link or parent/child links; such pairs are exempt unless listed as checked.
    fn default_exempt(&self, a: SphereRef, b: SphereRef) -> bool {
        let (la, lb) = (self.link_of(a), self.link_of(b));
        la == lb || self.parent(la) == Some(lb) || self.parent(lb) == Some(la)
    }

    fn derive_pairs(&mut self) -> Result<()> {
        let exempt: HashSet<_> = self.exempt.iter().map(|(a, b)| SphereRef::ordered(*a, *b)).collect();
        let checked: HashSet<_> = self.checked.iter().map(|(a, b)| SphereRef::ordered(*a, *b)).collect();
        let is_checked = |m: &Self, a: SphereRef, b: SphereRef| {
            let key = SphereRef::ordered(a, b);
            if checked.contains(&key) {
                return true;
            }
            !exempt.contains(&key) && !m.default_exempt(a, b)
        };
        for chain in ChainId::BOTH {
            let mut refs = Vec::new();
            for body in [Body::Base, Body::Torso, Body::of_chain(chain)] {
                refs.extend((0..self.sphere_count(body)).map(|i| SphereRef::new(body, i)));
            }
            let mut pairs = Vec::new();
            for (i, &a) in refs.iter().enumerate() {
                for &b in &refs[i + 1..] {
                    if is_checked(self, a, b) {
                        pairs.push(CheckedPair { a, b });
                    }
                }
            }
            self.self_pairs[chain.index()] = pairs;
        }
        let mut inter = Vec::new();
        for i in 0..self.arms[0].spheres.len() {
            for j in 0..self.arms[1].spheres.len() {
                let key = SphereRef::ordered(SphereRef::new(Body::Arm1, i), SphereRef::new(Body::Arm2, j));
                if !exempt.contains(&key) {
                    inter.push((i, j));
                }
            }
        }
        self.inter_pairs = inter;
        Ok(())
    }

    pub fn torso_joints(&self) -> &[Joint] {
        &self.torso
    }

    pub fn arm(&self, chain: ChainId) -> &Arm {
        &self.arms[chain.index()]
    }

    pub fn arm_joints(&self, chain: ChainId) -> &[Joint] {
        &self.arms[chain.index()].joints
    }

    pub fn torso_dof(&self) -> usize {
        self.torso.len()
    }

    pub fn arm_dof(&self, chain: ChainId) -> usize {
        self.arms[chain.index()].joints.len()
    }

    pub fn chain_joints(&self, chain: ChainId) -> impl Iterator<Item = &Joint> {
        self.torso.iter().chain(self.arm_joints(chain))
    }

    pub fn all_joints(&self) -> impl Iterator<Item = &Joint> {
        self.torso
            .iter()
            .chain(&self.arms[0].joints)
            .chain(&self.arms[1].joints)
    }

    pub fn sphere_count(&self, body: Body) -> usize {
        match body {
            Body::Base => self.base_spheres.len(),
            Body::Torso => self.torso_spheres.len(),
            Body::Arm1 => self.arms[0].spheres.len(),
            Body::Arm2 => self.arms[1].spheres.len(),
        }
    }

    pub fn radius(&self, s: SphereRef) -> f64 {
        match s.body {
            Body::Base => self.base_spheres[s.index].1,
            Body::Torso => self.torso_spheres[s.index].radius,
            Body::Arm1 => self.arms[0].spheres[s.index].radius,
            Body::Arm2 => self.arms[1].spheres[s.index].radius,
        }
    }

    pub fn arm_radii(&self, chain: ChainId) -> impl Iterator<Item = f64> + '_ {
        self.arms[chain.index()].spheres.iter().map(|s| s.radius)
    }

    pub fn zero_config(&self) -> FullConfig {
        FullConfig::zeros(self.torso_dof(), self.arm_dof(ChainId::Arm1), self.arm_dof(ChainId::Arm2))
    }

    pub(crate) fn check_values<'a>(&self, joints: impl Iterator<Item = &'a Joint>, values: &[f64], what: &str) -> Result<()> {
        let joints: Vec<_> = joints.collect();
        if joints.len() != values.len() {
            return Err(Error::Input(format!(
                "{what}: expected {} joint values, got {}",
                joints.len(),
                values.len()
            )));
        }
        for (j, &q) in joints.iter().zip(values) {
            if !j.within_limits(q) {
                return Err(Error::JointLimit {
                    joint: j.name.clone(),
                    value: q,
                    lo: j.limits[0],
                    hi: j.limits[1],
                });
            }
        }
        Ok(())
    }

    pub fn check_full(&self, config: &FullConfig) -> Result<()> {
        self.check_values(self.torso.iter(), &config.torso, "torso")?;
        self.check_values(self.arms[0].joints.iter(), &config.arm1, "arm1")?;
        self.check_values(self.arms[1].joints.iter(), &config.arm2, "arm2")
    }

    pub fn check_chain(&self, chain: ChainId, config: &ChainConfig) -> Result<()> {
        self.check_values(self.torso.iter(), &config.torso, "torso")?;
        self.check_values(self.arm_joints(chain).iter(), &config.arm, chain.name())
    }

    fn place_links(
        base: &Isometry3<f64>,
        joints: &[Joint],
        values: &[f64],
        spheres: &[CollisionSphere],
        out: &mut Vec<Point3<f64>>,
    ) -> Isometry3<f64> {
        let mut frames = Vec::with_capacity(joints.len());
        let mut frame = *base;
        for (joint, &q) in joints.iter().zip(values) {
            frame *= joint.transform(q);
            frames.push(frame);
        }
        out.clear();
        out.extend(
            spheres
                .iter()
                .map(|s| frames[s.link] * Point3::from(s.offset)),
        );
        frame
    }

    fn place_torso(&self, torso: &[f64], out: &mut PlacedSpheres) -> Isometry3<f64> {
        out.base.clear();
        out.base.extend(self.base_spheres.iter().map(|(c, _)| *c));
        Self::place_links(&Isometry3::identity(), &self.torso, torso, &self.torso_spheres, &mut out.torso)
    }

    fn place_arm(&self, chain: ChainId, tip: &Isometry3<f64>, arm: &[f64], out: &mut PlacedSpheres) {
        let a = &self.arms[chain.index()];
        let target = match chain {
            ChainId::Arm1 => &mut out.arm1,
            ChainId::Arm2 => &mut out.arm2,
        };
        Self::place_links(&(tip * a.mount), &a.joints, arm, &a.spheres, target);
    }

    /// Forward kinematics of one chain without limit checks. The other arm is left empty.
    pub(crate) fn place_chain_unchecked(&self, chain: ChainId, torso: &[f64], arm: &[f64]) -> PlacedSpheres {
        let mut out = PlacedSpheres::default();
        let tip = self.place_torso(torso, &mut out);
        self.place_arm(chain, &tip, arm, &mut out);
        out
    }

    pub(crate) fn place_full_unchecked(&self, config: &FullConfig) -> PlacedSpheres {
        let mut out = PlacedSpheres::default();
        let tip = self.place_torso(&config.torso, &mut out);
        self.place_arm(ChainId::Arm1, &tip, &config.arm1, &mut out);
        self.place_arm(ChainId::Arm2, &tip, &config.arm2, &mut out);
        out
    }

    /// World-frame sphere centers for every body at `config`, composing
    /// joint transforms root to tip in declaration order.
    pub fn forward_kinematics(&self, config: &FullConfig) -> Result<PlacedSpheres> {
        self.check_full(config)?;
        Ok(self.place_full_unchecked(config))
    }

    pub fn chain_forward_kinematics(&self, chain: ChainId, config: &ChainConfig) -> Result<PlacedSpheres> {
        self.check_chain(chain, config)?;
        Ok(self.place_chain_unchecked(chain, &config.torso, &config.arm))
    }

    /// Flattened, body-tagged view of [`forward_kinematics`](Self::forward_kinematics).
    pub fn world_spheres(&self, config: &FullConfig) -> Result<Vec<WorldSphere>> {
        let placed = self.forward_kinematics(config)?;
        let mut out = Vec::with_capacity(placed.len());
        for body in [Body::Base, Body::Torso, Body::Arm1, Body::Arm2] {
            for (index, c) in placed.body(body).iter().enumerate() {
                out.push(WorldSphere {
                    body,
                    center: *c,
                    radius: self.radius(SphereRef::new(body, index)),
                });
            }
        }
        Ok(out)
    }

    pub(crate) fn self_collision_in(&self, chain: ChainId, placed: &PlacedSpheres) -> bool {
        self.self_pairs[chain.index()].iter().any(|p| {
            spheres_overlap(
                &placed.body(p.a.body)[p.a.index],
                self.radius(p.a),
                &placed.body(p.b.body)[p.b.index],
                self.radius(p.b),
            )
        })
    }

    /// Arm-vs-arm overlap with every arm sphere inflated by `padding`.
    pub(crate) fn inter_arm_in(&self, arm1: &[Point3<f64>], arm2: &[Point3<f64>], padding: f64) -> bool {
        self.inter_pairs.iter().any(|&(i, j)| {
            spheres_overlap(
                &arm1[i],
                self.arms[0].spheres[i].radius + padding,
                &arm2[j],
                self.arms[1].spheres[j].radius + padding,
            )
        })
    }

    fn chain_refs(&self, chain: ChainId) -> impl Iterator<Item = SphereRef> + '_ {
        [Body::Base, Body::Torso, Body::of_chain(chain)]
            .into_iter()
            .flat_map(move |b| (0..self.sphere_count(b)).map(move |i| SphereRef::new(b, i)))
    }

    pub(crate) fn voxel_hits_in(
        &self,
        chain: ChainId,
        placed: &PlacedSpheres,
        grid: &VoxelGrid,
        padding: f64,
    ) -> Vec<VoxelId> {
        let mut hits = Vec::new();
        for s in self.chain_refs(chain) {
            let center = &placed.body(s.body)[s.index];
            grid.visit_overlapping(center, self.radius(s) + padding, |id| {
                hits.push(id);
                false
            });
        }
        hits.sort_unstable();
        hits.dedup();
        hits
    }

    pub(crate) fn touches_occupied_in(
        &self,
        chain: ChainId,
        placed: &PlacedSpheres,
        occupancy: &OccupancySet,
        padding: f64,
    ) -> bool {
        if occupancy.is_empty() {
            return false;
        }
        let grid = occupancy.grid();
        self.chain_refs(chain).any(|s| {
            let center = &placed.body(s.body)[s.index];
            grid.visit_overlapping(center, self.radius(s) + padding, |id| occupancy.contains(id))
        })
    }

    /// Self-collision within torso, one arm and the static base spheres.
    /// Arm-vs-torso contact counts here, not as inter-arm contact.
    pub fn chain_self_collision(&self, chain: ChainId, config: &ChainConfig) -> Result<bool> {
        let placed = self.chain_forward_kinematics(chain, config)?;
        Ok(self.self_collision_in(chain, &placed))
    }

    pub fn inter_arm_collision(&self, config: &FullConfig, padding: f64) -> Result<bool> {
        let placed = self.forward_kinematics(config)?;
        Ok(self.inter_arm_in(&placed.arm1, &placed.arm2, padding))
    }

    /// Ids of every voxel whose circumscribing sphere meets a chain sphere
    /// inflated by `padding`. Sorted ascending.
    pub fn chain_voxel_collision(
        &self,
        chain: ChainId,
        config: &ChainConfig,
        grid: &VoxelGrid,
        padding: f64,
    ) -> Result<Vec<VoxelId>> {
        let placed = self.chain_forward_kinematics(chain, config)?;
        Ok(self.voxel_hits_in(chain, &placed, grid, padding))
    }

    /// First violated collision condition, checked in order 1 through 5.
    /// Self-collision is evaluated on the bare spheres; voxel and inter-arm
    /// contact use spheres inflated by `padding`.
    pub fn collision_condition(
        &self,
        config: &FullConfig,
        occupancy: &OccupancySet,
        padding: f64,
    ) -> Result<Option<CollisionCondition>> {
        self.check_full(config)?;
        Ok(self.collision_condition_unchecked(config, occupancy, padding))
    }

    pub(crate) fn collision_condition_unchecked(
        &self,
        config: &FullConfig,
        occupancy: &OccupancySet,
        padding: f64,
    ) -> Option<CollisionCondition> {
        let placed = self.place_full_unchecked(config);
        if self.inter_arm_in(&placed.arm1, &placed.arm2, padding) {
            return Some(CollisionCondition::InterArm);
        }
        for chain in ChainId::BOTH {
            if self.self_collision_in(chain, &placed) {
                return Some(CollisionCondition::SelfCollision(chain));
            }
        }
        for chain in ChainId::BOTH {
            if self.touches_occupied_in(chain, &placed, occupancy, padding) {
                return Some(CollisionCondition::Voxel(chain));
            }
        }
        None
    }

    /// The collision oracle every roadmap query must agree with.
    pub fn config_collision(&self, config: &FullConfig, occupancy: &OccupancySet, padding: f64) -> Result<bool> {
        Ok(self.collision_condition(config, occupancy, padding)?.is_some())
    }

    pub fn from_description(desc: RobotDescription) -> Result<Self> {
        desc.into_model()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let desc: RobotDescription =
            serde_json::from_str(s).map_err(|e| Error::json("<robot json>", e))?;
        desc.into_model()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let desc: RobotDescription = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        desc.into_model()
    }
}

// ---------------------------------------------------------------------------
// Robot file schema

pub const ROBOT_FORMAT_VERSION: u32 = 1;

fn default_version() -> u32 {
    ROBOT_FORMAT_VERSION
}

fn identity_rotation() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformDesc {
    #[serde(default)]
    pub translation: [f64; 3],
    /// Row-major rotation matrix.
    #[serde(default = "identity_rotation")]
    pub rotation: [[f64; 3]; 3],
}

impl Default for TransformDesc {
    fn default() -> Self {
        Self {
            translation: [0.0; 3],
            rotation: identity_rotation(),
        }
    }
}

impl TransformDesc {
    fn to_isometry(&self, what: &str) -> Result<Isometry3<f64>> {
        let r = &self.rotation;
        let m = Matrix3::new(
            r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
        );
        if (m.transpose() * m - Matrix3::identity()).amax() > UNIT_TOL || (m.determinant() - 1.0).abs() > UNIT_TOL {
            return Err(Error::Model(format!("{what}: rotation is not orthonormal")));
        }
        Ok(Isometry3::from_parts(
            Translation3::from(Vector3::from(self.translation)),
            UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m)),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDesc {
    pub name: String,
    #[serde(default = "revolute")]
    pub kind: JointKind,
    pub axis: [f64; 3],
    #[serde(default)]
    pub origin: TransformDesc,
    pub limits: [f64; 2],
}

fn revolute() -> JointKind {
    JointKind::Revolute
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereDesc {
    pub link: usize,
    #[serde(default)]
    pub offset: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseSphereDesc {
    pub center: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorsoDesc {
    pub joints: Vec<JointDesc>,
    #[serde(default)]
    pub spheres: Vec<SphereDesc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmDesc {
    #[serde(default)]
    pub mount: TransformDesc,
    pub joints: Vec<JointDesc>,
    #[serde(default)]
    pub spheres: Vec<SphereDesc>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelfCollisionDesc {
    /// Pairs never checked, on top of the same-link and adjacent-link default.
    #[serde(default)]
    pub exempt: Vec<[String; 2]>,
    /// Pairs always checked, even on adjacent links.
    #[serde(default)]
    pub checked: Vec<[String; 2]>,
}

/// On-disk robot description (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotDescription {
    #[serde(default = "default_version")]
    pub format_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub base_spheres: Vec<BaseSphereDesc>,
    pub torso: TorsoDesc,
    pub arm1: ArmDesc,
    pub arm2: ArmDesc,
    #[serde(default)]
    pub self_collision: SelfCollisionDesc,
}

impl RobotDescription {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn into_model(self) -> Result<RobotModel> {
        if self.format_version != ROBOT_FORMAT_VERSION {
            return Err(Error::Model(format!(
                "robot format_version {} is not supported (expected {ROBOT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let joints = |descs: &[JointDesc]| -> Result<Vec<Joint>> {
            descs
                .iter()
                .map(|d| {
                    let origin = d.origin.to_isometry(&d.name)?;
                    Joint::new(d.name.clone(), d.kind, d.axis, origin, d.limits)
                })
                .collect()
        };
        let spheres = |descs: &[SphereDesc]| -> Vec<CollisionSphere> {
            descs
                .iter()
                .map(|s| CollisionSphere {
                    link: s.link,
                    offset: Vector3::from(s.offset),
                    radius: s.radius,
                })
                .collect()
        };
        let arm = |d: &ArmDesc, what: &str| -> Result<Arm> {
            Ok(Arm {
                mount: d.mount.to_isometry(what)?,
                joints: joints(&d.joints)?,
                spheres: spheres(&d.spheres),
            })
        };
        let pairs = |list: &[[String; 2]]| -> Result<Vec<(SphereRef, SphereRef)>> {
            list.iter()
                .map(|[a, b]| Ok((a.parse()?, b.parse()?)))
                .collect()
        };
        RobotModel::new(
            self.name.clone(),
            self.base_spheres
                .iter()
                .map(|s| (Point3::from(Vector3::from(s.center)), s.radius))
                .collect(),
            joints(&self.torso.joints)?,
            spheres(&self.torso.spheres),
            [arm(&self.arm1, "arm1 mount")?, arm(&self.arm2, "arm2 mount")?],
            pairs(&self.self_collision.exempt)?,
            pairs(&self.self_collision.checked)?,
        )
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;

    fn tr(x: f64, y: f64, z: f64) -> Isometry3<f64> {
        Isometry3::translation(x, y, z)
    }

    fn z_joint(name: &str, origin: Isometry3<f64>) -> Joint {
        Joint::revolute(name, [0.0, 0.0, 1.0], origin, [-PI, PI]).unwrap()
    }

    fn tip_sphere(link: usize, r: f64) -> CollisionSphere {
        CollisionSphere {
            link,
            offset: Vector3::new(1.0, 0.0, 0.0),
            radius: r,
        }
    }

    /// Two 1 m planar links: the torso joint is link 0, arm 1 is link 1.
    /// Arm 2 is parked far away so it never interferes.
    fn planar_two_link() -> RobotModel {
        RobotModel::new(
            "planar",
            vec![],
            vec![z_joint("j0", Isometry3::identity())],
            vec![tip_sphere(0, 0.1)],
            [
                Arm {
                    mount: tr(1.0, 0.0, 0.0),
                    joints: vec![z_joint("j1", Isometry3::identity())],
                    spheres: vec![tip_sphere(0, 0.1)],
                },
                Arm {
                    mount: tr(0.0, 0.0, 50.0),
                    joints: vec![z_joint("k1", Isometry3::identity())],
                    spheres: vec![],
                },
            ],
            vec![],
            vec![],
        )
        .unwrap()
    }

    fn centers(m: &RobotModel, q0: f64, q1: f64) -> (Point3<f64>, Point3<f64>) {
        let placed = m
            .forward_kinematics(&FullConfig::new(vec![q0], vec![q1], vec![0.0]))
            .unwrap();
        (placed.torso[0], placed.arm1[0])
    }

    fn close(a: Point3<f64>, b: [f64; 3]) -> bool {
        (a - Point3::from(Vector3::from(b))).norm() < 1e-12
    }

    #[test]
    fn fk_zero_config() {
        let (a, b) = centers(&planar_two_link(), 0.0, 0.0);
        assert!(close(a, [1.0, 0.0, 0.0]) && close(b, [2.0, 0.0, 0.0]));
    }

    #[test]
    fn fk_shoulder_quarter_turn() {
        let (a, b) = centers(&planar_two_link(), FRAC_PI_2, 0.0);
        assert!(close(a, [0.0, 1.0, 0.0]), "{a}");
        assert!(close(b, [0.0, 2.0, 0.0]), "{b}");
    }

    #[test]
    fn fk_elbow_back() {
        let (a, b) = centers(&planar_two_link(), FRAC_PI_2, -FRAC_PI_2);
        assert!(close(a, [0.0, 1.0, 0.0]), "{a}");
        assert!(close(b, [1.0, 1.0, 0.0]), "{b}");
    }

    #[test]
    fn fk_rejects_out_of_limit() {
        let m = planar_two_link();
        let err = m
            .forward_kinematics(&FullConfig::new(vec![4.0], vec![0.0], vec![0.0]))
            .unwrap_err();
        assert!(matches!(err, Error::JointLimit { .. }));
        assert!(m
            .forward_kinematics(&FullConfig::new(vec![0.0, 0.0], vec![0.0], vec![0.0]))
            .is_err());
    }

    #[test]
    fn prismatic_joint_translates_along_axis() {
        let j = Joint::new("p", JointKind::Prismatic, [0.0, 1.0, 0.0], tr(0.0, 0.0, 1.0), [0.0, 1.0]).unwrap();
        let t = j.transform(0.5);
        assert!((t.translation.vector - Vector3::new(0.0, 0.5, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn joint_validation() {
        assert!(Joint::revolute("a", [0.0, 0.0, 2.0], Isometry3::identity(), [0.0, 1.0]).is_err());
        assert!(Joint::revolute("a", [0.0, 0.0, 1.0], Isometry3::identity(), [1.0, 0.0]).is_err());
    }

    /// Torso sphere near the origin, a 2-link arm whose elbow folds back.
    fn folding_model(checked_adjacent: bool) -> RobotModel {
        let exempt = vec![];
        let checked = if checked_adjacent {
            vec![(SphereRef::new(Body::Arm1, 0), SphereRef::new(Body::Arm1, 1))]
        } else {
            vec![]
        };
        RobotModel::new(
            "fold",
            vec![],
            vec![z_joint("t", Isometry3::identity())],
            vec![CollisionSphere {
                link: 0,
                offset: Vector3::zeros(),
                radius: 0.2,
            }],
            [
                Arm {
                    mount: tr(0.5, 0.0, 0.0),
                    joints: vec![z_joint("s", Isometry3::identity()), z_joint("e", tr(0.5, 0.0, 0.0))],
                    spheres: vec![
                        CollisionSphere {
                            link: 0,
                            offset: Vector3::new(0.25, 0.0, 0.0),
                            radius: 0.15,
                        },
                        CollisionSphere {
                            link: 1,
                            offset: Vector3::new(0.45, 0.0, 0.0),
                            radius: 0.1,
                        },
                    ],
                },
                Arm {
                    mount: tr(-0.5, 0.0, 0.0),
                    joints: vec![z_joint("s2", Isometry3::identity())],
                    spheres: vec![],
                },
            ],
            exempt,
            checked,
        )
        .unwrap()
    }

    #[test]
    fn self_collision_straight_arm_is_free() {
        let m = folding_model(false);
        let q = ChainConfig::new(vec![0.0], vec![0.0, 0.0]);
        assert!(!m.chain_self_collision(ChainId::Arm1, &q).unwrap());
    }

    #[test]
    fn self_collision_folded_onto_torso() {
        let m = folding_model(false);
        // Shoulder at pi puts the upper-arm sphere at (0.25, 0, 0), inside the
        // torso sphere, but the upper arm is the torso's child link: exempt.
        let q = ChainConfig::new(vec![0.0], vec![PI, 0.0]);
        let placed = m.chain_forward_kinematics(ChainId::Arm1, &q).unwrap();
        assert!(close(placed.arm1[0], [0.25, 0.0, 0.0]));
        assert!(!m.chain_self_collision(ChainId::Arm1, &q).unwrap());
        // Elbow at (0.5, 0.5) pointing back at the origin: forearm sphere
        // 0.707 - 0.45 = 0.257 from the torso centre, radii sum 0.3.
        let q = ChainConfig::new(vec![0.0], vec![PI / 2.0, 0.75 * PI]);
        let placed = m.chain_forward_kinematics(ChainId::Arm1, &q).unwrap();
        let c = 0.5 - 0.45 * std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(placed.arm1[1], [c, c, 0.0]), "{}", placed.arm1[1]);
        assert!(m.chain_self_collision(ChainId::Arm1, &q).unwrap());
    }

    #[test]
    fn adjacent_link_pairs_exempt_by_default() {
        // Elbow folded flat: forearm sphere at (0.55, 0, 0), upper-arm sphere
        // at (0.75, 0, 0); 0.2 apart with radii summing to 0.25.
        let q = ChainConfig::new(vec![0.0], vec![0.0, PI]);
        let placed = folding_model(false)
            .chain_forward_kinematics(ChainId::Arm1, &q)
            .unwrap();
        assert!(close(placed.arm1[1], [0.55, 0.0, 0.0]), "{}", placed.arm1[1]);
        assert!(!folding_model(false).chain_self_collision(ChainId::Arm1, &q).unwrap());
        assert!(folding_model(true).chain_self_collision(ChainId::Arm1, &q).unwrap());
    }

    #[test]
    fn conflicting_pair_lists_rejected() {
        let mut desc = crate::demo::tiny_description();
        desc.self_collision.exempt.push(["arm1:0".into(), "arm2:0".into()]);
        desc.self_collision.checked.push(["arm2:0".into(), "arm1:0".into()]);
        assert!(desc.into_model().is_err());
    }

    #[test]
    fn sphere_ref_parse() {
        let s: SphereRef = "arm2:3".parse().unwrap();
        assert_eq!(s, SphereRef::new(Body::Arm2, 3));
        assert_eq!(s.to_string(), "arm2:3");
        assert!("leg:1".parse::<SphereRef>().is_err());
        assert!("arm1".parse::<SphereRef>().is_err());
    }

    #[test]
    fn condition_numbers() {
        assert_eq!(CollisionCondition::InterArm.number(), 1);
        assert_eq!(CollisionCondition::SelfCollision(ChainId::Arm2).number(), 3);
        assert_eq!(CollisionCondition::Voxel(ChainId::Arm1).number(), 4);
        assert_eq!(CollisionCondition::Voxel(ChainId::Arm2).number(), 5);
    }
}
