use serde::{Deserialize, Serialize};

use crate::map_model::InvarianceClass;

/// Point orderings under which a label counts as the same feature.
///
/// `perms[a][k]` is the prediction point index placed at label position `k`.
/// The identity is always first, so ties resolve to it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationSet {
    pub invariance: InvarianceClass,
    pub perms: Vec<Vec<usize>>,
}

impl PermutationSet {
    pub fn len(&self) -> usize {
        self.perms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }
}

/// Directed → identity; undirected → identity and reversal; polygon → every
/// cyclic shift in both winding directions.
pub fn valid_permutations(invariance: InvarianceClass, n_points: usize) -> PermutationSet {
    let n = n_points;
    let identity: Vec<usize> = (0..n).collect();
    let perms = match invariance {
        InvarianceClass::DirectedPolyline => vec![identity],
        InvarianceClass::UndirectedPolyline => {
            let reversed: Vec<usize> = (0..n).rev().collect();
            if n < 2 {
                vec![identity]
            } else {
                vec![identity, reversed]
            }
        }
        InvarianceClass::Polygon => {
            let mut perms: Vec<Vec<usize>> = Vec::with_capacity(2 * n);
            for shift in 0..n {
                perms.push((0..n).map(|k| (k + shift) % n).collect());
            }
            for shift in 0..n {
                perms.push((0..n).map(|k| (shift + n - k) % n).collect());
            }
            let mut seen = std::collections::HashSet::new();
            perms.retain(|p| seen.insert(p.clone()));
            perms
        }
    };
    PermutationSet { invariance, perms }
}
