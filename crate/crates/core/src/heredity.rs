//! Parent sets over effects and the strong/weak heredity predicates.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeredityPolicy {
    Strong,
    Weak,
    None,
}

/// `parents[j]` is the set of effects that must accompany effect `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeredityGraph {
    parents: Vec<Vec<usize>>,
    policy: HeredityPolicy,
}

impl HeredityGraph {
    pub fn new(parents: Vec<Vec<usize>>, policy: HeredityPolicy) -> Self {
        Self { parents, policy }
    }

    pub fn with_policy(mut self, policy: HeredityPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn policy(&self) -> HeredityPolicy {
        self.policy
    }

    pub fn num_effects(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self, effect: usize) -> &[usize] {
        &self.parents[effect]
    }

    pub fn parent_sets(&self) -> &[Vec<usize>] {
        &self.parents
    }

    /// Problems that make the graph unusable: dangling parent references and
    /// cycles. Empty means valid.
    pub fn diagnostics(&self) -> Vec<String> {
        let n = self.parents.len();
        let mut problems = Vec::new();
        for (j, ps) in self.parents.iter().enumerate() {
            for &r in ps {
                if r >= n {
                    problems.push(format!("effect {j} lists unknown parent {r}"));
                }
            }
        }
        if !problems.is_empty() {
            return problems;
        }
        if self.topological_order().is_none() {
            problems.push("parent relation contains a cycle".to_string());
        }
        problems
    }

    pub fn is_valid(&self) -> bool {
        self.diagnostics().is_empty()
    }

    /// Parents before children; `None` when the relation is cyclic.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.parents.len();
        let mut pending: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut children = vec![Vec::new(); n];
        for (j, ps) in self.parents.iter().enumerate() {
            for &r in ps {
                children[r].push(j);
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|&j| pending[j] == 0).rev().collect();
        let mut order = Vec::with_capacity(n);
        while let Some(j) = ready.pop() {
            order.push(j);
            for &c in &children[j] {
                pending[c] -= 1;
                if pending[c] == 0 {
                    ready.push(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Whether a 0/1 selection obeys `policy`. Strong: every parent of an
    /// active effect is active. Weak: at least one is. Effects with no
    /// parents are unconstrained.
    pub fn selection_complies(&self, active: &[bool], policy: HeredityPolicy) -> bool {
        self.parents.iter().enumerate().all(|(j, ps)| {
            if !active[j] || ps.is_empty() {
                return true;
            }
            match policy {
                HeredityPolicy::Strong => ps.iter().all(|&r| active[r]),
                HeredityPolicy::Weak => ps.iter().any(|&r| active[r]),
                HeredityPolicy::None => true,
            }
        })
    }

    /// Effects whose scaling parameters break the linear heredity
    /// constraints by more than `tol`: `θ_j ≤ θ_r` for each parent (strong)
    /// or `θ_j ≤ Σ_r θ_r` (weak).
    pub fn theta_violations(&self, theta: &[f64], policy: HeredityPolicy, tol: f64) -> Vec<usize> {
        self.parents
            .iter()
            .enumerate()
            .filter(|(j, ps)| {
                let t = theta[*j];
                if ps.is_empty() {
                    return false;
                }
                match policy {
                    HeredityPolicy::Strong => {
                        t > tol && ps.iter().any(|&r| theta[r] < t - tol)
                    }
                    HeredityPolicy::Weak => t > ps.iter().map(|&r| theta[r]).sum::<f64>() + tol,
                    HeredityPolicy::None => false,
                }
            })
            .map(|(j, _)| j)
            .collect()
    }
}
