//! Built-in robot descriptions used by the shipped assets, tests and benchmarks.
//!
//! * `tiny`: one torso joint and one joint per arm (each chain has 2 DoF).
//! * `mini`: torso yaw + pitch, two planar joints per arm.
//! * `desk`: torso yaw + pitch, three joints per arm (shoulder pitch, shoulder
//!   yaw, elbow). At pi/6 steps each chain has about 50k candidate nodes.

use std::f64::consts::PI;

use crate::voxel::VoxelGrid;
use crate::kinematics::{
    ArmDesc, BaseSphereDesc, JointDesc, JointKind, RobotDescription, SelfCollisionDesc, SphereDesc,
    TorsoDesc, TransformDesc,
};

const STEP: f64 = PI / 6.0;

fn joint(name: &str, axis: [f64; 3], translation: [f64; 3], limits: [f64; 2]) -> JointDesc {
    JointDesc {
        name: name.into(),
        kind: JointKind::Revolute,
        axis,
        origin: TransformDesc {
            translation,
            ..TransformDesc::default()
        },
        limits,
    }
}

fn sphere(link: usize, offset: [f64; 3], radius: f64) -> SphereDesc {
    SphereDesc { link, offset, radius }
}

fn mount(y: f64, z: f64) -> TransformDesc {
    TransformDesc {
        translation: [0.0, y, z],
        ..TransformDesc::default()
    }
}

const Z: [f64; 3] = [0.0, 0.0, 1.0];
const Y: [f64; 3] = [0.0, 1.0, 0.0];

/// Each chain is 2-DoF: a torso yaw joint and one shoulder yaw joint per arm.
pub fn tiny_description() -> RobotDescription {
    let arm = |side: f64, name: &str| ArmDesc {
        mount: mount(0.2 * side, 0.1),
        joints: vec![joint(&format!("{name}_shoulder"), Z, [0.0; 3], [-2.0 * STEP, 2.0 * STEP])],
        spheres: vec![sphere(0, [0.15, 0.0, 0.0], 0.05), sphere(0, [0.3, 0.0, 0.0], 0.05)],
    };
    RobotDescription {
        format_version: 1,
        name: "tiny".into(),
        base_spheres: vec![],
        torso: TorsoDesc {
            joints: vec![joint("torso_yaw", Z, [0.0, 0.0, 0.5], [-STEP, STEP])],
            spheres: vec![sphere(0, [0.0, 0.0, 0.0], 0.1)],
        },
        arm1: arm(1.0, "arm1"),
        arm2: arm(-1.0, "arm2"),
        self_collision: SelfCollisionDesc::default(),
    }
}

/// Torso yaw + pitch and two planar yaw joints per arm; arms share the
/// shoulder height so they can reach into each other.
pub fn mini_description() -> RobotDescription {
    let arm = |side: f64, name: &str| ArmDesc {
        mount: mount(0.18 * side, 0.3),
        joints: vec![
            joint(&format!("{name}_shoulder"), Z, [0.0; 3], [-PI / 2.0, PI / 2.0]),
            joint(&format!("{name}_elbow"), Z, [0.25, 0.0, 0.0], [-PI / 2.0, PI / 2.0]),
        ],
        spheres: vec![
            sphere(0, [0.12, 0.0, 0.0], 0.05),
            sphere(1, [0.1, 0.0, 0.0], 0.05),
            sphere(1, [0.22, 0.0, 0.0], 0.05),
        ],
    };
    RobotDescription {
        format_version: 1,
        name: "mini".into(),
        base_spheres: vec![BaseSphereDesc {
            center: [0.0, 0.0, 0.2],
            radius: 0.15,
        }],
        torso: TorsoDesc {
            joints: vec![
                joint("torso_yaw", Z, [0.0, 0.0, 0.5], [-STEP, STEP]),
                joint("torso_pitch", Y, [0.0, 0.0, 0.05], [0.0, 2.0 * STEP]),
            ],
            spheres: vec![sphere(1, [0.0, 0.0, 0.15], 0.1)],
        },
        arm1: arm(1.0, "arm1"),
        arm2: arm(-1.0, "arm2"),
        self_collision: SelfCollisionDesc::default(),
    }
}

/// Desk-scale humanoid upper body: torso yaw + pitch, three joints per arm.
pub fn desk_description() -> RobotDescription {
    let arm = |side: f64, name: &str| ArmDesc {
        mount: mount(0.22 * side, 0.4),
        joints: vec![
            joint(&format!("{name}_shoulder_pitch"), Y, [0.0; 3], [-5.0 * STEP, 5.0 * STEP]),
            joint(&format!("{name}_shoulder_yaw"), Z, [0.0; 3], [-5.0 * STEP, 5.0 * STEP]),
            joint(&format!("{name}_elbow"), Y, [0.3, 0.0, 0.0], [-5.0 * STEP, 6.0 * STEP]),
        ],
        spheres: vec![
            sphere(1, [0.1, 0.0, 0.0], 0.06),
            sphere(1, [0.2, 0.0, 0.0], 0.06),
            sphere(2, [0.1, 0.0, 0.0], 0.05),
            sphere(2, [0.2, 0.0, 0.0], 0.05),
            sphere(2, [0.3, 0.0, 0.0], 0.06),
        ],
    };
    RobotDescription {
        format_version: 1,
        name: "desk".into(),
        base_spheres: vec![BaseSphereDesc {
            center: [0.0, 0.0, 0.3],
            radius: 0.2,
        }],
        torso: TorsoDesc {
            joints: vec![
                joint("torso_yaw", Z, [0.0, 0.0, 0.6], [-3.0 * STEP, 3.0 * STEP]),
                joint("torso_pitch", Y, [0.0, 0.0, 0.1], [-2.0 * STEP, 2.0 * STEP]),
            ],
            spheres: vec![sphere(1, [0.0, 0.0, 0.1], 0.12), sphere(1, [0.0, 0.0, 0.3], 0.12)],
        },
        arm1: arm(1.0, "arm1"),
        arm2: arm(-1.0, "arm2"),
        self_collision: SelfCollisionDesc::default(),
    }
}

/// 2.1 x 2.1 x 1.92 m workspace at 0.06 m voxels around the desk robot.
pub fn desk_voxel_grid() -> VoxelGrid {
    VoxelGrid::new([-1.05, -1.05, 0.0], 0.06, [35, 35, 32]).expect("valid desk grid")
}
