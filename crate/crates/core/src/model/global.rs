use serde::{Deserialize, Serialize};

use super::association::{objectives_agree, transitivity_violations};
use super::pairs::PairTable;
use super::scene::{Point, VersionProbe};
use crate::error::{check_version, Error, Result};

pub const GLOBAL_INSTANCE_FORMAT: &str = "jpa-global-instance";
pub const GLOBAL_INSTANCE_MAJOR: u32 = 1;

/// The global labelling-and-partitioning problem over untyped proposals.
///
/// `p_pair` and `beta` store, for each proposal pair `d < d'`, a `J x J`
/// row-major block indexed by `(label of d, label of d')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalInstance {
    pub proposals: Vec<Point>,
    pub num_labels: usize,
    pub p_label: Vec<Vec<f64>>,
    pub p_pair: PairTable<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: PairTable<Vec<f64>>,
    /// Forces every pair of kept proposals into the same person.
    pub single_person: bool,
}

impl GlobalInstance {
    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    /// Pairwise cost of `d` labelled `jd` and `e` labelled `je`, either order.
    #[inline]
    pub fn pair_cost(&self, d: usize, jd: usize, e: usize, je: usize) -> f64 {
        let block = self.beta.get(d, e);
        if d < e {
            block[jd * self.num_labels + je]
        } else {
            block[je * self.num_labels + jd]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, k) = (self.len(), self.num_labels);
        let square = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == k);
        let blocks = |t: &PairTable<Vec<f64>>| t.len() == n && t.values().iter().all(|b| b.len() == k * k);
        if k == 0 || !square(&self.p_label) || !square(&self.alpha) || !blocks(&self.p_pair) || !blocks(&self.beta) {
            return Err(Error::Structure(format!(
                "global instance arrays do not match {n} proposals x {k} labels"
            )));
        }
        let inside = |p: &f64| *p > 0.0 && *p < 1.0;
        if !self.p_label.iter().flatten().all(inside) || !self.p_pair.values().iter().flatten().all(inside) {
            return Err(Error::Structure("probabilities must lie strictly inside (0, 1)".into()));
        }
        Ok(())
    }

    /// `<alpha, x> + <beta, z>`.
    pub fn objective(&self, labels: &[Vec<bool>], z: &PairTable<Vec<bool>>) -> f64 {
        let mut total = 0.0;
        for (row, costs) in labels.iter().zip(&self.alpha) {
            for (&x, c) in row.iter().zip(costs) {
                if x {
                    total += c;
                }
            }
        }
        for ((_, _, zs), (_, _, bs)) in z.iter().zip(self.beta.iter()) {
            for (&zz, b) in zs.iter().zip(bs) {
                if zz {
                    total += b;
                }
            }
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalSolution {
    /// `D x J` binary label matrix.
    pub labels: Vec<Vec<bool>>,
    pub y: PairTable<bool>,
    /// Per pair, a `J x J` block of `x_dj * x_d'j' * y_dd'`.
    pub z: PairTable<Vec<bool>>,
    pub objective: f64,
    /// Persons as sorted proposal lists, ordered by smallest member.
    pub clusters: Vec<Vec<usize>>,
}

impl GlobalSolution {
    /// Assembles a solution from a per-proposal label (or suppression) and a
    /// per-proposal cluster id.
    pub fn from_assignment(inst: &GlobalInstance, label: &[Option<usize>], cluster: &[Option<usize>]) -> Self {
        let (n, k) = (inst.len(), inst.num_labels);
        let labels: Vec<Vec<bool>> = label.iter().map(|l| (0..k).map(|j| *l == Some(j)).collect()).collect();
        let y = PairTable::from_fn(n, |a, b| cluster[a].is_some() && cluster[a] == cluster[b]);
        let z = PairTable::from_fn(n, |a, b| {
            let mut block = vec![false; k * k];
            if let (Some(ja), Some(jb), true) = (label[a], label[b], *y.get(a, b)) {
                block[ja * k + jb] = true;
            }
            block
        });
        let objective = inst.objective(&labels, &z);
        let clusters = clusters_from_links(&labels, &y);
        Self {
            labels,
            y,
            z,
            objective,
            clusters,
        }
    }

    /// Label of each proposal, or `None` when suppressed or ambiguous.
    pub fn label_of(&self, d: usize) -> Option<usize> {
        let mut it = self.labels[d].iter().enumerate().filter(|(_, &x)| x);
        match (it.next(), it.next()) {
            (Some((j, _)), None) => Some(j),
            _ => None,
        }
    }
}

/// Connected components of the link relation over kept proposals.
pub fn clusters_from_links(labels: &[Vec<bool>], y: &PairTable<bool>) -> Vec<Vec<usize>> {
    let n = labels.len();
    let kept: Vec<bool> = labels.iter().map(|r| r.iter().any(|&x| x)).collect();
    let mut comp: Vec<Option<usize>> = vec![None; n];
    let mut clusters = Vec::new();
    for start in 0..n {
        if !kept[start] || comp[start].is_some() {
            continue;
        }
        let id = clusters.len();
        let mut members = vec![start];
        comp[start] = Some(id);
        let mut stack = vec![start];
        while let Some(a) = stack.pop() {
            for b in 0..n {
                if b != a && kept[b] && comp[b].is_none() && *y.get(a, b) {
                    comp[b] = Some(id);
                    members.push(b);
                    stack.push(b);
                }
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    clusters
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GlobalViolation {
    /// A proposal carries two labels.
    MultipleLabels {
        proposal: usize,
        labels: (usize, usize),
    },
    /// A pair is linked although a member is suppressed.
    LinkWithoutLabel {
        pair: (usize, usize),
    },
    Transitivity {
        triple: (usize, usize, usize),
    },
    /// `z` is 0 although both labels and the link are active.
    LinkedLabelsMissing {
        pair: (usize, usize),
        labels: (usize, usize),
    },
    /// `z` is 1 although a label or the link is inactive.
    LinkedLabelsSpurious {
        pair: (usize, usize),
        labels: (usize, usize),
    },
    /// Single-person mode: two kept proposals are not linked.
    KeptNotLinked {
        pair: (usize, usize),
    },
    ClustersMismatch,
    ObjectiveMismatch {
        stored: f64,
        recomputed: f64,
    },
}

pub fn validate_global_solution(inst: &GlobalInstance, sol: &GlobalSolution) -> Result<Vec<GlobalViolation>> {
    let (n, k) = (inst.len(), inst.num_labels);
    let dims_ok = sol.labels.len() == n
        && sol.labels.iter().all(|r| r.len() == k)
        && sol.y.len() == n
        && sol.z.len() == n
        && sol.z.values().iter().all(|b| b.len() == k * k);
    if !dims_ok {
        return Err(Error::Structure(format!(
            "solution dimensions do not match {n} proposals x {k} labels"
        )));
    }
    let x = &sol.labels;
    let kept: Vec<bool> = x.iter().map(|r| r.iter().any(|&v| v)).collect();
    let mut out = Vec::new();
    for (d, row) in x.iter().enumerate() {
        for a in 0..k {
            for b in a + 1..k {
                if row[a] && row[b] {
                    out.push(GlobalViolation::MultipleLabels {
                        proposal: d,
                        labels: (a, b),
                    });
                }
            }
        }
    }
    for (d, e, &link) in sol.y.iter() {
        if link && !(kept[d] && kept[e]) {
            out.push(GlobalViolation::LinkWithoutLabel { pair: (d, e) });
        }
        if inst.single_person && kept[d] && kept[e] && !link {
            out.push(GlobalViolation::KeptNotLinked { pair: (d, e) });
        }
        let block = sol.z.get(d, e);
        for a in 0..k {
            for b in 0..k {
                let z = block[a * k + b];
                let all = x[d][a] && x[e][b] && link;
                if all && !z {
                    out.push(GlobalViolation::LinkedLabelsMissing {
                        pair: (d, e),
                        labels: (a, b),
                    });
                }
                if z && !all {
                    out.push(GlobalViolation::LinkedLabelsSpurious {
                        pair: (d, e),
                        labels: (a, b),
                    });
                }
            }
        }
    }
    out.extend(transitivity_violations(&sol.y).map(|triple| GlobalViolation::Transitivity { triple }));
    if clusters_from_links(x, &sol.y) != sol.clusters {
        out.push(GlobalViolation::ClustersMismatch);
    }
    let recomputed = inst.objective(x, &sol.z);
    if !objectives_agree(recomputed, sol.objective) {
        out.push(GlobalViolation::ObjectiveMismatch {
            stored: sol.objective,
            recomputed,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlobalInstanceFile {
    pub version: String,
    pub instance: GlobalInstance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<GlobalSolution>,
}

impl GlobalInstanceFile {
    pub fn new(instance: GlobalInstance, solution: Option<GlobalSolution>) -> Self {
        Self {
            version: format!("{GLOBAL_INSTANCE_FORMAT}/{GLOBAL_INSTANCE_MAJOR}"),
            instance,
            solution,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        check_version(&probe.version, GLOBAL_INSTANCE_FORMAT, GLOBAL_INSTANCE_MAJOR)?;
        let file: GlobalInstanceFile = serde_json::from_str(text)?;
        file.instance.validate()?;
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance(n: usize, k: usize, single_person: bool) -> GlobalInstance {
        GlobalInstance {
            proposals: (0..n).map(|i| Point::new(i as f64, 0.0)).collect(),
            num_labels: k,
            p_label: vec![vec![0.5; k]; n],
            p_pair: PairTable::filled(n, vec![0.5; k * k]),
            alpha: vec![vec![-1.0; k]; n],
            beta: PairTable::from_fn(n, |a, b| (0..k * k).map(|t| (a + b + t) as f64).collect()),
            single_person,
        }
    }

    #[test]
    fn all_zero_is_feasible() {
        let inst = instance(3, 2, true);
        let sol = GlobalSolution::from_assignment(&inst, &[None; 3], &[None; 3]);
        assert!(validate_global_solution(&inst, &sol).unwrap().is_empty());
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn double_label_is_reported() {
        let inst = instance(2, 2, false);
        let mut sol = GlobalSolution::from_assignment(&inst, &[Some(0), None], &[Some(0), None]);
        sol.labels[0][1] = true;
        sol.objective = inst.objective(&sol.labels, &sol.z);
        let v = validate_global_solution(&inst, &sol).unwrap();
        assert_eq!(
            v,
            vec![GlobalViolation::MultipleLabels {
                proposal: 0,
                labels: (0, 1)
            }]
        );
    }

    #[test]
    fn z_without_link_is_reported() {
        let inst = instance(2, 1, false);
        let mut sol = GlobalSolution::from_assignment(&inst, &[Some(0), Some(0)], &[Some(0), Some(1)]);
        sol.z.get_mut(0, 1)[0] = true;
        sol.objective = inst.objective(&sol.labels, &sol.z);
        let v = validate_global_solution(&inst, &sol).unwrap();
        assert!(v.contains(&GlobalViolation::LinkedLabelsSpurious {
            pair: (0, 1),
            labels: (0, 0)
        }));
    }

    #[test]
    fn single_person_requires_links() {
        let inst = instance(2, 1, true);
        let sol = GlobalSolution::from_assignment(&inst, &[Some(0), Some(0)], &[Some(0), Some(1)]);
        let v = validate_global_solution(&inst, &sol).unwrap();
        assert_eq!(v, vec![GlobalViolation::KeptNotLinked { pair: (0, 1) }]);
        let multi = instance(2, 1, false);
        let sol = GlobalSolution::from_assignment(&multi, &[Some(0), Some(0)], &[Some(0), Some(1)]);
        assert!(validate_global_solution(&multi, &sol).unwrap().is_empty());
    }

    #[test]
    fn clusters_follow_links() {
        let inst = instance(4, 1, false);
        let sol = GlobalSolution::from_assignment(
            &inst,
            &[Some(0), Some(0), None, Some(0)],
            &[Some(1), Some(0), None, Some(1)],
        );
        assert_eq!(sol.clusters, vec![vec![0, 3], vec![1]]);
        assert!(validate_global_solution(&inst, &sol).unwrap().is_empty());
    }

    #[test]
    fn dimension_mismatch() {
        let inst = instance(3, 2, false);
        let sol = GlobalSolution::from_assignment(&instance(2, 2, false), &[None; 2], &[None; 2]);
        assert!(validate_global_solution(&inst, &sol).is_err());
    }

    #[test]
    fn pair_cost_orientation() {
        let inst = instance(3, 2, false);
        assert_eq!(inst.pair_cost(0, 1, 2, 0), inst.beta.get(0, 2)[2]);
        assert_eq!(inst.pair_cost(2, 0, 0, 1), inst.beta.get(0, 2)[2]);
    }
}
