//! Bundled topology fixtures, embedded so library users, the CLI and the
//! Python bindings all see identical networks.

/// Six-node example network (see `fixtures/six_node.topo`).
pub const SIX_NODE: &str = include_str!("../fixtures/six_node.topo");

/// 14-node NSFNET (see `fixtures/nsfnet14.topo`).
pub const NSFNET14: &str = include_str!("../fixtures/nsfnet14.topo");
