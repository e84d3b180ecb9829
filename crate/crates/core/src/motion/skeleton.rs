use crate::error::{Error, Result};

/// Joint tree. `parents[j]` is `None` only for the single root.
#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    parents: Vec<Option<usize>>,
    joint_names: Option<Vec<String>>,
    /// Joints ordered so that every parent precedes its children.
    order: Vec<usize>,
}

impl Skeleton {
    /// Validates a parent list in file form (root encoded as -1).
    pub fn from_parent_indices(parents: &[i64], joint_names: Option<Vec<String>>) -> Result<Self> {
        let v = parents.len();
        if v == 0 {
            return Err(Error::Schema("skeleton has no joints".into()));
        }
        if let Some(names) = &joint_names {
            if names.len() != v {
                return Err(Error::Schema(format!(
                    "joint_names has {} entries for {v} joints",
                    names.len()
                )));
            }
        }
        let mut resolved = Vec::with_capacity(v);
        for (j, &p) in parents.iter().enumerate() {
            resolved.push(match p {
                -1 => None,
                p if p >= 0 && (p as usize) < v && p as usize != j => Some(p as usize),
                p => {
                    return Err(Error::Schema(format!(
                        "parent {p} of joint {j} out of range for {v} joints"
                    )))
                }
            });
        }
        let roots = resolved.iter().filter(|p| p.is_none()).count();
        if roots != 1 {
            return Err(Error::Schema(format!("expected exactly one root, found {roots}")));
        }
        let mut children = vec![Vec::new(); v];
        let mut root = 0;
        for (j, p) in resolved.iter().enumerate() {
            match p {
                Some(p) => children[*p].push(j),
                None => root = j,
            }
        }
        let mut order = Vec::with_capacity(v);
        let mut stack = vec![root];
        while let Some(j) = stack.pop() {
            order.push(j);
            stack.extend(children[j].iter().rev());
        }
        if order.len() != v {
            return Err(Error::Schema(
                "parent links contain a cycle (not every joint reaches the root)".into(),
            ));
        }
        Ok(Self {
            parents: resolved,
            joint_names,
            order,
        })
    }

    fn named(parents: &[i64], names: &[&str]) -> Self {
        Self::from_parent_indices(parents, Some(names.iter().map(|s| s.to_string()).collect()))
            .expect("built-in skeleton is valid")
    }

    /// 17-joint body in the common mocap ordering.
    pub fn body17() -> Self {
        Self::named(
            &[-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15],
            &[
                "pelvis", "r_hip", "r_knee", "r_ankle", "l_hip", "l_knee", "l_ankle", "spine",
                "thorax", "neck", "head", "l_shoulder", "l_elbow", "l_wrist", "r_shoulder",
                "r_elbow", "r_wrist",
            ],
        )
    }

    /// Five-joint stick figure used for quick runs and gradient checks.
    pub fn tiny5() -> Self {
        Self::named(&[-1, 0, 0, 0, 3], &["pelvis", "l_foot", "r_foot", "neck", "r_hand"])
    }

    /// Root plus one child.
    pub fn pair() -> Self {
        Self::named(&[-1, 0], &["pelvis", "neck"])
    }

    pub fn joint_count(&self) -> usize {
        self.parents.len()
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parents[joint]
    }

    pub fn root(&self) -> usize {
        self.order[0]
    }

    /// Parents in file form, root as -1.
    pub fn parent_indices(&self) -> Vec<i64> {
        self.parents
            .iter()
            .map(|p| p.map_or(-1, |p| p as i64))
            .collect()
    }

    pub fn joint_names(&self) -> Option<&[String]> {
        self.joint_names.as_deref()
    }

    pub fn joint_name(&self, joint: usize) -> Option<&str> {
        self.joint_names.as_ref().map(|n| n[joint].as_str())
    }

    /// Topological order, root first.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `(child, parent)` pairs in child index order.
    pub fn bones(&self) -> Vec<(usize, usize)> {
        self.parents
            .iter()
            .enumerate()
            .filter_map(|(j, p)| p.map(|p| (j, p)))
            .collect()
    }

    /// Symmetric 0/1 adjacency along bones, plus the identity.
    pub fn adjacency_with_self(&self) -> Vec<Vec<bool>> {
        let v = self.joint_count();
        let mut adj = vec![vec![false; v]; v];
        for (j, row) in adj.iter_mut().enumerate() {
            row[j] = true;
        }
        for (c, p) in self.bones() {
            adj[c][p] = true;
            adj[p][c] = true;
        }
        adj
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_trees() {
        for s in [Skeleton::body17(), Skeleton::tiny5(), Skeleton::pair()] {
            assert_eq!(s.order().len(), s.joint_count());
            assert_eq!(s.bones().len(), s.joint_count() - 1);
        }
    }

    #[test]
    fn out_of_range_parent() {
        let err = Skeleton::from_parent_indices(&[-1, 0, 0, 5], None).unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");
    }

    #[test]
    fn cycle_rejected() {
        assert!(Skeleton::from_parent_indices(&[-1, 2, 1], None).is_err());
    }

    #[test]
    fn two_roots_rejected() {
        assert!(Skeleton::from_parent_indices(&[-1, -1], None).is_err());
    }

    #[test]
    fn self_parent_rejected() {
        assert!(Skeleton::from_parent_indices(&[-1, 1], None).is_err());
    }
}
