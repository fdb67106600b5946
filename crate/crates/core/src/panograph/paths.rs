//! Breadth-first shortest paths toward a goal.

use std::collections::VecDeque;

use super::{GraphError, NodeIdx, StreetGraph};

/// Hop distances from every node to one goal, plus the next hop along a
/// shortest path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShortestPaths {
    goal: NodeIdx,
    dist: Vec<Option<u32>>,
    next: Vec<Option<NodeIdx>>,
}

/// BFS from `goal_id` over the undirected graph.
///
/// For every reachable node other than the goal, the next hop is the
/// neighbor one hop closer to the goal with the smallest pano id.
pub fn shortest_paths_to(graph: &StreetGraph, goal_id: &str) -> Result<ShortestPaths, GraphError> {
    let goal = graph.require(goal_id)?;
    Ok(ShortestPaths::from_goal(graph, goal))
}

impl ShortestPaths {
    pub fn from_goal(graph: &StreetGraph, goal: NodeIdx) -> Self {
        let n = graph.len();
        let mut dist: Vec<Option<u32>> = vec![None; n];
        let mut queue = VecDeque::with_capacity(n);
        dist[goal] = Some(0);
        queue.push_back(goal);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &v in graph.neighbors(u) {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }

        // Neighbor lists are sorted by index and indices follow id order,
        // so the first neighbor one hop closer has the smallest id.
        let next = (0..n)
            .map(|u| match dist[u] {
                Some(d) if d > 0 => graph.neighbors(u).iter().copied().find(|&v| dist[v] == Some(d - 1)),
                _ => None,
            })
            .collect();

        Self { goal, dist, next }
    }

    pub fn goal(&self) -> NodeIdx {
        self.goal
    }

    /// Hop count to the goal, `None` when unreachable.
    pub fn distance(&self, node: NodeIdx) -> Option<u32> {
        self.dist[node]
    }

    pub fn distance_of(&self, graph: &StreetGraph, id: &str) -> Result<Option<u32>, GraphError> {
        Ok(self.dist[graph.require(id)?])
    }

    /// Neighbor one hop closer to the goal; `None` at the goal or when
    /// unreachable.
    pub fn next_hop(&self, node: NodeIdx) -> Option<NodeIdx> {
        self.next[node]
    }

    /// Node sequence from `start` to the goal inclusive, `None` when
    /// unreachable.
    pub fn path_from(&self, start: NodeIdx) -> Option<Vec<NodeIdx>> {
        self.dist[start]?;
        let mut path = vec![start];
        let mut cur = start;
        while let Some(n) = self.next[cur] {
            path.push(n);
            cur = n;
        }
        Some(path)
    }

    pub fn distances(&self) -> &[Option<u32>] {
        &self.dist
    }
}
