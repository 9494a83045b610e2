//! Domain types shared by the solvers, the generator and the evaluator.

mod association;
mod global;
mod joint;
mod pairs;
pub(crate) mod scene;

pub use association::{
    clamp_probability, log_odds_cost, validate_association_solution, AssociationInstance, AssociationSolution,
    AssociationViolation, Detection, InstanceFile, EPSILON, INSTANCE_FORMAT, OBJECTIVE_TOLERANCE,
};
pub use global::{
    clusters_from_links, validate_global_solution, GlobalInstance, GlobalInstanceFile, GlobalSolution, GlobalViolation,
    GLOBAL_INSTANCE_FORMAT,
};
pub use joint::{Channel, JointGroup, JointType, NUM_CHANNELS, NUM_JOINTS};
pub use pairs::{pair_count, PairTable};
pub use scene::{
    GroundTruthPerson, GtJoint, Keypoint, PersonPose, Point, Region, RegionMaps, RenderParams, Scene, ScoreMap,
    SCENE_FORMAT,
};
