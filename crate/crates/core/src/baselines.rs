//! Comparison schemes built on pre-computed path sets: the joint model
//! restricted to the k shortest loopless paths ranked by total distance.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::network::Topology;

/// Ranked candidate paths for one (source, destination) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub source: usize,
    pub dest: usize,
    /// Simple node paths, distance-ranked, ties broken lexicographically by
    /// node sequence.
    pub paths: Vec<Vec<usize>>,
    /// True when fewer than the requested k paths exist.
    pub exhausted: bool,
}

impl PathSet {
    pub fn distances(&self, topology: &Topology) -> Vec<f64> {
        self.paths
            .iter()
            .map(|p| topology.path_distance(p).unwrap())
            .collect()
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    path: Vec<usize>,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap; invert for smallest-first ordering.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.path.cmp(&self.path))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra restricted to a subgraph: `banned_nodes` are unusable, as are
/// arcs in `banned_arcs` (by (from, to) pair). Ties between equal-distance
/// paths resolve to the lexicographically smaller node sequence.
fn shortest_path(
    topology: &Topology,
    source: usize,
    dest: usize,
    banned_nodes: &[bool],
    banned_arcs: &[(usize, usize)],
) -> Option<(f64, Vec<usize>)> {
    let mut heap = BinaryHeap::new();
    let mut settled = vec![false; topology.num_nodes()];
    heap.push(HeapEntry {
        dist: 0.0,
        path: vec![source],
    });
    while let Some(HeapEntry { dist, path }) = heap.pop() {
        let node = *path.last().unwrap();
        if node == dest {
            return Some((dist, path));
        }
        if settled[node] {
            continue;
        }
        settled[node] = true;
        for arc in topology.out_arcs(node) {
            let fiber = topology.arc(*arc);
            if settled[fiber.to] || banned_nodes[fiber.to] || path.contains(&fiber.to) {
                continue;
            }
            if banned_arcs.contains(&(fiber.from, fiber.to)) {
                continue;
            }
            let mut next = path.clone();
            next.push(fiber.to);
            heap.push(HeapEntry {
                dist: dist + fiber.distance_km,
                path: next,
            });
        }
    }
    None
}

/// Deviation-based k shortest loopless paths, ranked by total distance with
/// lexicographic tie-breaking. Returns all existing paths (flagged) when
/// fewer than `k` exist.
pub fn k_shortest_paths(
    topology: &Topology,
    source: usize,
    dest: usize,
    k: usize,
) -> Result<PathSet> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if source == dest {
        return Err(Error::invalid("source and destination must differ"));
    }
    let no_nodes = vec![false; topology.num_nodes()];
    let mut accepted: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut candidates: Vec<(f64, Vec<usize>)> = Vec::new();

    let Some(first) = shortest_path(topology, source, dest, &no_nodes, &[]) else {
        return Ok(PathSet {
            source,
            dest,
            paths: Vec::new(),
            exhausted: true,
        });
    };
    accepted.push(first);

    while accepted.len() < k {
        let prev = accepted.last().unwrap().1.clone();
        for spur_idx in 0..prev.len() - 1 {
            let spur_node = prev[spur_idx];
            let root = &prev[..=spur_idx];

            // arcs leaving the spur node along any accepted path sharing the root
            let mut banned_arcs = Vec::new();
            for (_, p) in &accepted {
                if p.len() > spur_idx && p[..=spur_idx] == *root {
                    banned_arcs.push((p[spur_idx], p[spur_idx + 1]));
                }
            }
            let mut banned_nodes = vec![false; topology.num_nodes()];
            for &n in &root[..spur_idx] {
                banned_nodes[n] = true;
            }

            if let Some((spur_dist, spur_path)) =
                shortest_path(topology, spur_node, dest, &banned_nodes, &banned_arcs)
            {
                let mut total: Vec<usize> = root[..spur_idx].to_vec();
                total.extend(spur_path);
                let dist: f64 = topology.path_distance(&total)?;
                let _ = spur_dist;
                if !accepted.iter().any(|(_, p)| *p == total)
                    && !candidates.iter().any(|(_, p)| *p == total)
                {
                    candidates.push((dist, total));
                }
            }
        }
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        accepted.push(candidates.remove(0));
    }

    let exhausted = accepted.len() < k;
    Ok(PathSet {
        source,
        dest,
        paths: accepted.into_iter().map(|(_, p)| p).collect(),
        exhausted,
    })
}

/// Every simple path between two nodes, in depth-first order with ascending
/// neighbor indices. `cap` guards combinatorial blowup.
pub fn all_simple_paths(
    topology: &Topology,
    source: usize,
    dest: usize,
    cap: usize,
) -> Result<Vec<Vec<usize>>> {
    let mut paths = Vec::new();
    let mut stack = vec![source];
    let mut visited = vec![false; topology.num_nodes()];
    visited[source] = true;
    dfs(topology, dest, cap, &mut stack, &mut visited, &mut paths)?;
    Ok(paths)
}

fn dfs(
    topology: &Topology,
    dest: usize,
    cap: usize,
    stack: &mut Vec<usize>,
    visited: &mut Vec<bool>,
    paths: &mut Vec<Vec<usize>>,
) -> Result<()> {
    let node = *stack.last().unwrap();
    if node == dest {
        if paths.len() >= cap {
            return Err(Error::TooLarge(format!("more than {cap} simple paths")));
        }
        paths.push(stack.clone());
        return Ok(());
    }
    for arc in topology.out_arcs(node) {
        let next = topology.arc(*arc).to;
        if visited[next] {
            continue;
        }
        visited[next] = true;
        stack.push(next);
        dfs(topology, dest, cap, stack, visited, paths)?;
        stack.pop();
        visited[next] = false;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_graph_yields_one_path() {
        let t = Topology::from_edges(&[(1, 2, 10.0)], &[]).unwrap();
        let set = k_shortest_paths(&t, 0, 1, 3).unwrap();
        assert_eq!(set.paths, vec![vec![0, 1]]);
        assert!(set.exhausted);
    }

    #[test]
    fn distances_non_decreasing_and_paths_simple() {
        let t = Topology::six_node();
        for (s, d) in [(0, 5), (3, 5), (1, 3)] {
            let set = k_shortest_paths(&t, s, d, 6).unwrap();
            let dists = set.distances(&t);
            for w in dists.windows(2) {
                assert!(w[0] <= w[1] + 1e-9);
            }
            for p in &set.paths {
                let mut sorted = p.clone();
                sorted.sort_unstable();
                sorted.dedup();
                assert_eq!(sorted.len(), p.len(), "path {p:?} revisits a node");
            }
        }
    }

    #[test]
    fn six_node_4_to_6_matches_documented_three_path_set() {
        let t = Topology::six_node();
        let s = t.index_of(4).unwrap();
        let d = t.index_of(6).unwrap();
        let set = k_shortest_paths(&t, s, d, 3).unwrap();
        let rendered: Vec<String> = set.paths.iter().map(|p| t.format_path(p)).collect();
        assert_eq!(rendered, vec!["4-1-2-6", "4-3-1-2-6", "4-3-2-6"]);
        // the two 2-hop paths exist but rank below the distance-selected set
        let all = all_simple_paths(&t, s, d, 10_000).unwrap();
        assert!(all.iter().any(|p| t.format_path(p) == "4-5-6"));
        assert!(all.iter().any(|p| t.format_path(p) == "4-3-6"));
    }

    #[test]
    fn ksp_matches_exhaustive_enumeration() {
        // brute-force oracle: enumerate all simple paths, rank by
        // (distance, node sequence), take the prefix
        let graphs = [
            Topology::six_node(),
            Topology::from_edges(
                &[
                    (1, 2, 1.0),
                    (2, 3, 1.0),
                    (3, 4, 1.0),
                    (1, 3, 2.0),
                    (2, 4, 2.0),
                    (1, 4, 5.0),
                    (2, 5, 1.0),
                    (5, 4, 1.0),
                    (5, 3, 1.0),
                ],
                &[],
            )
            .unwrap(),
            // eight nodes with deliberate distance ties
            Topology::from_edges(
                &[
                    (1, 2, 1.0),
                    (2, 3, 1.0),
                    (3, 8, 1.0),
                    (1, 4, 1.0),
                    (4, 5, 1.0),
                    (5, 8, 1.0),
                    (1, 6, 2.0),
                    (6, 7, 0.5),
                    (7, 8, 0.5),
                    (2, 5, 1.5),
                    (4, 3, 1.5),
                    (6, 2, 1.0),
                ],
                &[],
            )
            .unwrap(),
        ];
        for t in &graphs {
            for s in 0..t.num_nodes() {
                for d in 0..t.num_nodes() {
                    if s == d {
                        continue;
                    }
                    let mut oracle: Vec<(f64, Vec<usize>)> = all_simple_paths(t, s, d, 100_000)
                        .unwrap()
                        .into_iter()
                        .map(|p| (t.path_distance(&p).unwrap(), p))
                        .collect();
                    oracle.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
                    for k in [1, 2, 3, 5] {
                        let set = k_shortest_paths(t, s, d, k).unwrap();
                        let want: Vec<Vec<usize>> =
                            oracle.iter().take(k).map(|(_, p)| p.clone()).collect();
                        assert_eq!(set.paths, want, "s={s} d={d} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn path_cap_guard() {
        let t = Topology::six_node();
        let err = all_simple_paths(&t, 0, 5, 2).unwrap_err();
        assert!(matches!(err, Error::TooLarge(_)));
    }
}
