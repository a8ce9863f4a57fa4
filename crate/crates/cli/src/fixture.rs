//! Hand-written overlay fixtures for `dump-tables`.

use metaflow_core::id::CidrBlock;
use metaflow_core::overlay::{map_topology, render_table, OverlayConfig, OverlayTree};
use metaflow_core::topology::{Layer, TopologySpec};
use metaflow_core::MetaDataId;
use serde::Deserialize;

use crate::CliError;

/// A topology, an optional explicit partition assignment, and objects to
/// insert afterwards. Without `[[assign]]` the tree is bootstrapped.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableFixture {
    pub topology: TopologySpec,
    #[serde(default)]
    pub overlay: OverlayConfig,
    #[serde(default)]
    pub assign: Vec<Assign>,
    #[serde(default)]
    pub insert: Vec<InsertRun>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assign {
    pub server: String,
    pub blocks: Vec<String>,
}

/// `count` identifiers starting at `first`, `stride` apart.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsertRun {
    pub first: String,
    pub count: u32,
    #[serde(default = "one")]
    pub stride: u32,
}

fn one() -> u32 {
    1
}

impl TableFixture {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    /// The tree before any insert.
    pub fn initial(&self) -> Result<OverlayTree, CliError> {
        let topo = self.topology.build()?;
        if self.assign.is_empty() {
            let mut tree = map_topology(&topo, self.overlay.clone())?;
            tree.bootstrap()?;
            return Ok(tree);
        }
        let mut assign = Vec::new();
        for a in &self.assign {
            let blocks = a
                .blocks
                .iter()
                .map(|b| b.parse::<CidrBlock>().map_err(|e| CliError::Config(format!("{}: {e}", a.server))))
                .collect::<Result<Vec<_>, _>>()?;
            assign.push((a.server.clone(), blocks));
        }
        Ok(OverlayTree::from_assignments(&topo, self.overlay.clone(), &assign)?)
    }

    pub fn apply_inserts(&self, tree: &mut OverlayTree) -> Result<(), CliError> {
        for run in &self.insert {
            let first: MetaDataId = run.first.parse().map_err(|e| CliError::Config(format!("insert: {e}")))?;
            for i in 0..run.count {
                let id = first.0.checked_add(i.wrapping_mul(run.stride)).ok_or_else(|| {
                    CliError::Config(format!("insert run from {first} leaves the identifier space"))
                })?;
                tree.insert_object(MetaDataId(id))?;
            }
        }
        Ok(())
    }
}

/// `(switch name, rendered table)` for every application and storage switch.
pub fn switch_tables(tree: &OverlayTree) -> Result<Vec<(String, String)>, CliError> {
    let topo = tree.topology();
    let mut out = Vec::new();
    for layer in [Layer::Application, Layer::Core, Layer::Aggregation, Layer::Edge] {
        for n in topo.switches_in(layer) {
            let table = tree.flow_table_for(n.id)?;
            out.push((n.name.clone(), render_table(&table, topo)));
        }
    }
    Ok(out)
}
