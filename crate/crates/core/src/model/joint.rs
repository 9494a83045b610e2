use std::fmt;

use serde::{Deserialize, Serialize};

/// Number of body joint types.
pub const NUM_JOINTS: usize = 14;

/// Number of score-map channels: one per joint plus background.
pub const NUM_CHANNELS: usize = NUM_JOINTS + 1;

/// Body joint types, in canonical index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointType {
    Head,
    Neck,
    RShoulder,
    LShoulder,
    RElbow,
    LElbow,
    RWrist,
    LWrist,
    RHip,
    LHip,
    RKnee,
    LKnee,
    RAnkle,
    LAnkle,
}

/// The seven reporting columns; left and right joints share a column and
/// head and neck are reported together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointGroup {
    Head,
    Shoulder,
    Elbow,
    Wrist,
    Hip,
    Knee,
    Ankle,
}

impl JointType {
    pub const ALL: [JointType; NUM_JOINTS] = [
        JointType::Head,
        JointType::Neck,
        JointType::RShoulder,
        JointType::LShoulder,
        JointType::RElbow,
        JointType::LElbow,
        JointType::RWrist,
        JointType::LWrist,
        JointType::RHip,
        JointType::LHip,
        JointType::RKnee,
        JointType::LKnee,
        JointType::RAnkle,
        JointType::LAnkle,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            JointType::Head => "head",
            JointType::Neck => "neck",
            JointType::RShoulder => "r_shoulder",
            JointType::LShoulder => "l_shoulder",
            JointType::RElbow => "r_elbow",
            JointType::LElbow => "l_elbow",
            JointType::RWrist => "r_wrist",
            JointType::LWrist => "l_wrist",
            JointType::RHip => "r_hip",
            JointType::LHip => "l_hip",
            JointType::RKnee => "r_knee",
            JointType::LKnee => "l_knee",
            JointType::RAnkle => "r_ankle",
            JointType::LAnkle => "l_ankle",
        }
    }

    pub fn group(self) -> JointGroup {
        match self {
            JointType::Head | JointType::Neck => JointGroup::Head,
            JointType::RShoulder | JointType::LShoulder => JointGroup::Shoulder,
            JointType::RElbow | JointType::LElbow => JointGroup::Elbow,
            JointType::RWrist | JointType::LWrist => JointGroup::Wrist,
            JointType::RHip | JointType::LHip => JointGroup::Hip,
            JointType::RKnee | JointType::LKnee => JointGroup::Knee,
            JointType::RAnkle | JointType::LAnkle => JointGroup::Ankle,
        }
    }
}

impl fmt::Display for JointType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl JointGroup {
    pub const ALL: [JointGroup; 7] = [
        JointGroup::Head,
        JointGroup::Shoulder,
        JointGroup::Elbow,
        JointGroup::Wrist,
        JointGroup::Hip,
        JointGroup::Knee,
        JointGroup::Ankle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            JointGroup::Head => "head",
            JointGroup::Shoulder => "shoulder",
            JointGroup::Elbow => "elbow",
            JointGroup::Wrist => "wrist",
            JointGroup::Hip => "hip",
            JointGroup::Knee => "knee",
            JointGroup::Ankle => "ankle",
        }
    }

    /// Column title as printed in report tables.
    pub fn title(self) -> &'static str {
        match self {
            JointGroup::Head => "Head",
            JointGroup::Shoulder => "Shoulder",
            JointGroup::Elbow => "Elbow",
            JointGroup::Wrist => "Wrist",
            JointGroup::Hip => "Hip",
            JointGroup::Knee => "Knee",
            JointGroup::Ankle => "Ankle",
        }
    }

    pub fn members(self) -> impl Iterator<Item = JointType> {
        JointType::ALL.into_iter().filter(move |j| j.group() == self)
    }
}

/// A score-map channel: one of the joints or the background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Joint(JointType),
    Background,
}

impl Channel {
    pub fn index(self) -> usize {
        match self {
            Channel::Joint(j) => j.index(),
            Channel::Background => NUM_JOINTS,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        if index == NUM_JOINTS {
            Some(Channel::Background)
        } else {
            JointType::from_index(index).map(Channel::Joint)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn index_is_a_bijection() {
        let mut seen = HashSet::new();
        for (i, j) in JointType::ALL.iter().enumerate() {
            assert_eq!(j.index(), i);
            assert_eq!(JointType::from_index(i), Some(*j));
            assert!(seen.insert(j.name()));
        }
        assert_eq!(seen.len(), 14);
        assert_eq!(JointType::from_index(14), None);
    }

    #[test]
    fn groups_pool_pairs() {
        let sizes: Vec<usize> = JointGroup::ALL.iter().map(|g| g.members().count()).collect();
        assert_eq!(sizes, vec![2; 7]);
    }

    #[test]
    fn channel_indices() {
        for i in 0..NUM_CHANNELS {
            assert_eq!(Channel::from_index(i).unwrap().index(), i);
        }
        assert_eq!(Channel::from_index(NUM_CHANNELS), None);
    }

    #[test]
    fn serde_names() {
        let s = serde_json::to_string(&JointType::LShoulder).unwrap();
        assert_eq!(s, "\"l_shoulder\"");
    }
}
