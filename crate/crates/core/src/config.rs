//! Joint-space configurations and the weighted Euclidean metric.

use serde::{Deserialize, Serialize};

/// Which of the two overlapping kinematic chains (torso + one arm).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainId {
    Arm1,
    Arm2,
}

impl std::fmt::Display for ChainId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "arm{}", self.number())
    }
}

impl ChainId {
    pub const BOTH: [ChainId; 2] = [ChainId::Arm1, ChainId::Arm2];

    pub fn index(self) -> usize {
        match self {
            ChainId::Arm1 => 0,
            ChainId::Arm2 => 1,
        }
    }

    /// Chain from its 1-based number.
    pub fn from_number(n: u32) -> Option<Self> {
        match n {
            1 => Some(ChainId::Arm1),
            2 => Some(ChainId::Arm2),
            _ => None,
        }
    }

    pub fn number(self) -> u32 {
        self.index() as u32 + 1
    }

    pub fn other(self) -> Self {
        match self {
            ChainId::Arm1 => ChainId::Arm2,
            ChainId::Arm2 => ChainId::Arm1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChainId::Arm1 => "arm1",
            ChainId::Arm2 => "arm2",
        }
    }
}

/// Configuration of one kinematic chain: shared torso joints followed by one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub torso: Vec<f64>,
    pub arm: Vec<f64>,
}

impl ChainConfig {
    pub fn new(torso: Vec<f64>, arm: Vec<f64>) -> Self {
        Self { torso, arm }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.torso.iter().chain(self.arm.iter()).copied()
    }
}

/// Full-body configuration: torso, arm 1, arm 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullConfig {
    pub torso: Vec<f64>,
    pub arm1: Vec<f64>,
    pub arm2: Vec<f64>,
}

impl FullConfig {
    pub fn new(torso: Vec<f64>, arm1: Vec<f64>, arm2: Vec<f64>) -> Self {
        Self { torso, arm1, arm2 }
    }

    pub fn zeros(torso: usize, arm1: usize, arm2: usize) -> Self {
        Self::new(vec![0.0; torso], vec![0.0; arm1], vec![0.0; arm2])
    }

    pub fn arm(&self, chain: ChainId) -> &[f64] {
        match chain {
            ChainId::Arm1 => &self.arm1,
            ChainId::Arm2 => &self.arm2,
        }
    }

    pub fn chain(&self, chain: ChainId) -> ChainConfig {
        ChainConfig::new(self.torso.clone(), self.arm(chain).to_vec())
    }

    pub fn dof(&self) -> usize {
        self.torso.len() + self.arm1.len() + self.arm2.len()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.torso
            .iter()
            .chain(self.arm1.iter())
            .chain(self.arm2.iter())
            .copied()
    }

    pub fn same_shape(&self, other: &FullConfig) -> bool {
        self.torso.len() == other.torso.len()
            && self.arm1.len() == other.arm1.len()
            && self.arm2.len() == other.arm2.len()
    }

    /// Point at parameter `s` on the straight segment from `self` to `other`.
    pub fn lerp(&self, other: &FullConfig, s: f64) -> FullConfig {
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + (y - x) * s).collect()
        };
        FullConfig::new(
            mix(&self.torso, &other.torso),
            mix(&self.arm1, &other.arm1),
            mix(&self.arm2, &other.arm2),
        )
    }

    /// Largest absolute per-joint difference.
    pub fn max_abs_diff(&self, other: &FullConfig) -> f64 {
        self.values()
            .zip(other.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Per-joint weights of the weighted Euclidean joint-space metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricWeights {
    pub torso: Vec<f64>,
    pub arm1: Vec<f64>,
    pub arm2: Vec<f64>,
}

impl MetricWeights {
    pub fn uniform(torso: usize, arm1: usize, arm2: usize) -> Self {
        Self {
            torso: vec![1.0; torso],
            arm1: vec![1.0; arm1],
            arm2: vec![1.0; arm2],
        }
    }

    pub fn arm(&self, chain: ChainId) -> &[f64] {
        match chain {
            ChainId::Arm1 => &self.arm1,
            ChainId::Arm2 => &self.arm2,
        }
    }

    /// Weights of one chain, torso first.
    pub fn chain(&self, chain: ChainId) -> Vec<f64> {
        self.torso.iter().chain(self.arm(chain)).copied().collect()
    }

    pub fn full_distance(&self, a: &FullConfig, b: &FullConfig) -> f64 {
        self.torso
            .iter()
            .chain(&self.arm1)
            .chain(&self.arm2)
            .zip(a.values().zip(b.values()))
            .map(|(w, (x, y))| w * (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

/// Weighted Euclidean distance over flat joint vectors.
#[inline]
pub fn weighted_distance(weights: &[f64], a: &[f64], b: &[f64]) -> f64 {
    weights
        .iter()
        .zip(a.iter().zip(b))
        .map(|(w, (x, y))| w * (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Sum of full-space segment lengths along a waypoint list.
pub fn path_length(weights: &MetricWeights, waypoints: &[FullConfig]) -> f64 {
    waypoints
        .windows(2)
        .map(|w| weights.full_distance(&w[0], &w[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lerp_endpoints_exact() {
        let a = FullConfig::new(vec![0.1], vec![0.2, 0.3], vec![-0.4]);
        let b = FullConfig::new(vec![1.1], vec![-0.2, 0.9], vec![0.4]);
        assert_eq!(a.lerp(&b, 0.0), a);
        assert_eq!(a.lerp(&b, 1.0).torso, b.torso);
        assert!((a.max_abs_diff(&b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_metric() {
        let w = MetricWeights {
            torso: vec![4.0],
            arm1: vec![1.0],
            arm2: vec![0.0],
        };
        let a = FullConfig::zeros(1, 1, 1);
        let b = FullConfig::new(vec![1.0], vec![1.0], vec![100.0]);
        assert!((w.full_distance(&a, &b) - 5f64.sqrt()).abs() < 1e-12);
        assert_eq!(w.chain(ChainId::Arm1), vec![4.0, 1.0]);
        assert_eq!(weighted_distance(&[1.0, 1.0], &[0.0, 0.0], &[3.0, 4.0]), 5.0);
    }

    #[test]
    fn chain_ids() {
        assert_eq!(ChainId::from_number(2), Some(ChainId::Arm2));
        assert_eq!(ChainId::from_number(3), None);
        assert_eq!(ChainId::Arm1.other(), ChainId::Arm2);
        assert_eq!(ChainId::Arm2.number(), 2);
    }
}
