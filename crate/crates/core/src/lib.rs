//! In-network metadata lookup: identifiers, topologies, the controller's
//! logical B-tree, the packet data plane, and baseline lookup services.

pub mod baselines;
pub mod dataplane;
pub mod id;
pub mod overlay;
pub mod topology;

pub use id::{hash_path, CidrBlock, IdRange, MetaDataId};
pub use overlay::{map_topology, OverlayConfig, OverlayError, OverlayTree};
pub use topology::{build_fat_tree, build_tier_tree, Topology, TopologyKind};
