use serde::{Deserialize, Serialize};

use super::joint::JointType;
use super::pairs::PairTable;
use super::scene::Point;
use crate::error::{check_version, Error, Result};

pub const INSTANCE_FORMAT: &str = "jpa-instance";
pub const INSTANCE_MAJOR: u32 = 1;

/// Probabilities are clamped to `[EPSILON, 1 - EPSILON]` before log-odds.
pub const EPSILON: f64 = 1e-6;

/// Relative tolerance for stored-versus-recomputed objectives.
pub const OBJECTIVE_TOLERANCE: f64 = 1e-9;

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(EPSILON, 1.0 - EPSILON)
}

/// `log((1 - p) / p)` after clamping; negative when `p > 0.5`.
pub fn log_odds_cost(p: f64) -> f64 {
    let p = clamp_probability(p);
    ((1.0 - p) / p).ln()
}

pub(crate) fn objectives_agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= OBJECTIVE_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// A joint candidate of known type. Ids are dense within an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub id: usize,
    pub joint: JointType,
    pub location: Point,
    pub confidence: f64,
}

/// One person's local association problem: unary costs per detection and
/// symmetric pairwise costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationInstance {
    pub detections: Vec<Detection>,
    pub alpha: Vec<f64>,
    pub beta: PairTable<f64>,
}

impl AssociationInstance {
    pub fn new(detections: Vec<Detection>, alpha: Vec<f64>, beta: PairTable<f64>) -> Result<Self> {
        let inst = Self {
            detections,
            alpha,
            beta,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn empty() -> Self {
        Self {
            detections: Vec::new(),
            alpha: Vec::new(),
            beta: PairTable::filled(0, 0.0),
        }
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    /// Number of ILP decision variables: one per detection plus one per pair.
    pub fn num_variables(&self) -> usize {
        self.len() + self.beta.num_pairs()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.detections.len();
        if self.alpha.len() != n || self.beta.len() != n {
            return Err(Error::Structure(format!(
                "{n} detections but {} unaries and a pair table over {}",
                self.alpha.len(),
                self.beta.len()
            )));
        }
        for (i, d) in self.detections.iter().enumerate() {
            if d.id != i {
                return Err(Error::Structure(format!("detection at position {i} has id {}", d.id)));
            }
            if !d.location.is_finite() || !(0.0..=1.0).contains(&d.confidence) {
                return Err(Error::Structure(format!(
                    "detection {i} has invalid location or confidence"
                )));
            }
        }
        if self.alpha.iter().chain(self.beta.values()).any(|c| !c.is_finite()) {
            return Err(Error::Structure("costs must be finite".into()));
        }
        Ok(())
    }

    /// `<alpha, x> + <beta, y>`.
    pub fn objective(&self, selected: &[bool], pair: &PairTable<bool>) -> f64 {
        let unary: f64 = self
            .alpha
            .iter()
            .zip(selected)
            .filter(|(_, &x)| x)
            .map(|(a, _)| a)
            .sum();
        let pairwise: f64 = self
            .beta
            .values()
            .iter()
            .zip(pair.values())
            .filter(|(_, &y)| y)
            .map(|(b, _)| b)
            .sum();
        unary + pairwise
    }

    /// Objective of a selection with pairs implied as `x_d AND x_d'`.
    pub fn selection_objective(&self, selected: &[bool]) -> f64 {
        let mut total = 0.0;
        for (i, &xi) in selected.iter().enumerate() {
            if !xi {
                continue;
            }
            total += self.alpha[i];
            for (j, &xj) in selected.iter().enumerate().skip(i + 1) {
                if xj {
                    total += self.beta.get(i, j);
                }
            }
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationSolution {
    pub selected: Vec<bool>,
    pub pair: PairTable<bool>,
    pub objective: f64,
}

impl AssociationSolution {
    /// Builds the solution for a selection, with `y` reconstructed as `x AND x`.
    pub fn from_selection(inst: &AssociationInstance, selected: Vec<bool>) -> Self {
        let pair = PairTable::from_fn(selected.len(), |i, j| selected[i] && selected[j]);
        let objective = inst.objective(&selected, &pair);
        Self {
            selected,
            pair,
            objective,
        }
    }

    pub fn selected_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.selected.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| i)
    }
}

/// A violated constraint of the local association problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AssociationViolation {
    /// A pair is linked although one of its detections is suppressed.
    LinkWithoutSelection {
        pair: (usize, usize),
    },
    /// `y_ab + y_bc - 1 <= y_ac` fails.
    Transitivity {
        triple: (usize, usize, usize),
    },
    /// Two selected detections are not linked to the same person.
    SelectedNotLinked {
        pair: (usize, usize),
    },
    ObjectiveMismatch {
        stored: f64,
        recomputed: f64,
    },
}

/// Checks a solution against the local problem's constraints.
///
/// Returns the list of violations; an empty list means the solution is
/// feasible and its stored objective is consistent.
pub fn validate_association_solution(
    inst: &AssociationInstance,
    sol: &AssociationSolution,
) -> Result<Vec<AssociationViolation>> {
    let n = inst.len();
    if sol.selected.len() != n || sol.pair.len() != n {
        return Err(Error::Structure(format!(
            "solution over {} detections / {} pair indices for an instance of {n}",
            sol.selected.len(),
            sol.pair.len()
        )));
    }
    let x = &sol.selected;
    let y = &sol.pair;
    let mut out = Vec::new();
    for (a, b, &link) in y.iter() {
        if link && !(x[a] && x[b]) {
            out.push(AssociationViolation::LinkWithoutSelection { pair: (a, b) });
        }
        if x[a] && x[b] && !link {
            out.push(AssociationViolation::SelectedNotLinked { pair: (a, b) });
        }
    }
    out.extend(transitivity_violations(y).map(|triple| AssociationViolation::Transitivity { triple }));
    let recomputed = inst.objective(x, y);
    if !objectives_agree(recomputed, sol.objective) {
        out.push(AssociationViolation::ObjectiveMismatch {
            stored: sol.objective,
            recomputed,
        });
    }
    Ok(out)
}

/// Triples `(a, b, c)` (pivot `b`) where `y_ab = y_bc = 1` but `y_ac = 0`.
///
/// Every rotation of each unordered triple is checked, so an empty result
/// means the linked relation is an equivalence on its support.
pub(crate) fn transitivity_violations(y: &PairTable<bool>) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
    let n = y.len();
    (0..n).flat_map(move |a| {
        (a + 1..n).flat_map(move |b| {
            (b + 1..n).flat_map(move |c| {
                let (ab, bc, ac) = (*y.get(a, b), *y.get(b, c), *y.get(a, c));
                let mut v = Vec::new();
                if ab && bc && !ac {
                    v.push((a, b, c));
                }
                if ab && ac && !bc {
                    v.push((b, a, c));
                }
                if ac && bc && !ab {
                    v.push((a, c, b));
                }
                v
            })
        })
    })
}

/// Replayable instance file, optionally carrying a solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub version: String,
    pub instance: AssociationInstance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<AssociationSolution>,
}

impl InstanceFile {
    pub fn new(instance: AssociationInstance, solution: Option<AssociationSolution>) -> Self {
        Self {
            version: format!("{INSTANCE_FORMAT}/{INSTANCE_MAJOR}"),
            instance,
            solution,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: super::scene::VersionProbe = serde_json::from_str(text)?;
        check_version(&probe.version, INSTANCE_FORMAT, INSTANCE_MAJOR)?;
        let file: InstanceFile = serde_json::from_str(text)?;
        file.instance.validate()?;
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(id: usize) -> Detection {
        Detection {
            id,
            joint: JointType::Head,
            location: Point::new(id as f64, 0.0),
            confidence: 0.5,
        }
    }

    fn inst(n: usize) -> AssociationInstance {
        AssociationInstance::new(
            (0..n).map(det).collect(),
            vec![0.3; n],
            PairTable::from_fn(n, |i, j| (i + j) as f64 * 0.1),
        )
        .unwrap()
    }

    fn sol(inst: &AssociationInstance, x: Vec<bool>, y: PairTable<bool>) -> AssociationSolution {
        let objective = inst.objective(&x, &y);
        AssociationSolution {
            selected: x,
            pair: y,
            objective,
        }
    }

    #[test]
    fn empty_selection_is_feasible() {
        let i = inst(3);
        let s = sol(&i, vec![false; 3], PairTable::filled(3, false));
        assert!(validate_association_solution(&i, &s).unwrap().is_empty());
    }

    #[test]
    fn selected_pair_must_be_linked() {
        let i = inst(2);
        let s = sol(&i, vec![true, true], PairTable::filled(2, false));
        let v = validate_association_solution(&i, &s).unwrap();
        assert_eq!(v, vec![AssociationViolation::SelectedNotLinked { pair: (0, 1) }]);
    }

    #[test]
    fn link_requires_both_selected() {
        let i = inst(2);
        let s = sol(&i, vec![true, false], PairTable::filled(2, true));
        let v = validate_association_solution(&i, &s).unwrap();
        assert_eq!(v, vec![AssociationViolation::LinkWithoutSelection { pair: (0, 1) }]);
    }

    #[test]
    fn transitivity_is_reported() {
        let i = inst(3);
        let mut y = PairTable::filled(3, false);
        y.set(0, 1, true);
        y.set(1, 2, true);
        let s = sol(&i, vec![true; 3], y);
        let v = validate_association_solution(&i, &s).unwrap();
        assert!(v.contains(&AssociationViolation::Transitivity { triple: (0, 1, 2) }));
    }

    #[test]
    fn stale_objective_is_reported() {
        let i = inst(2);
        let mut s = AssociationSolution::from_selection(&i, vec![true, true]);
        s.objective += 1.0;
        let v = validate_association_solution(&i, &s).unwrap();
        assert!(matches!(v[0], AssociationViolation::ObjectiveMismatch { .. }));
    }

    #[test]
    fn size_mismatch_is_structural() {
        let i = inst(3);
        let s = AssociationSolution::from_selection(&inst(2), vec![false, false]);
        assert!(matches!(
            validate_association_solution(&i, &s),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn ids_must_be_dense() {
        let mut d = vec![det(0), det(1)];
        d[1].id = 5;
        assert!(AssociationInstance::new(d, vec![0.0; 2], PairTable::filled(2, 0.0)).is_err());
    }

    #[test]
    fn variable_count() {
        assert_eq!(inst(6).num_variables(), 6 + 15);
    }

    #[test]
    fn instance_file_roundtrip_and_version_gate() {
        let i = inst(3);
        let s = AssociationSolution::from_selection(&i, vec![true, false, true]);
        let text = InstanceFile::new(i.clone(), Some(s.clone())).to_json().unwrap();
        let back = InstanceFile::from_json(&text).unwrap();
        assert_eq!(back.instance, i);
        assert_eq!(back.solution.unwrap(), s);
        let bumped = text.replace("jpa-instance/1", "jpa-instance/2");
        assert!(matches!(InstanceFile::from_json(&bumped), Err(Error::Format { .. })));
    }

    #[test]
    fn clamp_keeps_costs_finite() {
        assert!(log_odds_cost(0.0).is_finite());
        assert!(log_odds_cost(1.0).is_finite());
        assert_eq!(log_odds_cost(0.5), 0.0);
    }
}
