use metaflow_core::overlay::OverlayTree;
use metaflow_core::topology::Layer;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerCensus {
    pub layer: Layer,
    pub switches: usize,
    pub mean: f64,
    pub max: usize,
}

/// Flow-table sizes of the edge, aggregation and core switches.
pub fn flow_table_census(tree: &OverlayTree) -> Vec<LayerCensus> {
    [Layer::Edge, Layer::Aggregation, Layer::Core]
        .into_iter()
        .filter_map(|layer| {
            let sizes: Vec<usize> =
                tree.topology().switches_in(layer).map(|n| tree.table_size(n.id)).collect();
            if sizes.is_empty() {
                return None;
            }
            let mean = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
            Some(LayerCensus { layer, switches: sizes.len(), mean, max: sizes.into_iter().max().unwrap_or(0) })
        })
        .collect()
}
