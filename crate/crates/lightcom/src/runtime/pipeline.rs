//! Pipeline parsing and execution (GenCpt orchestration).

use crate::runtime::TxId;

/// One named protocol step over stored transaction ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineStep {
    pub op: String,
    pub outputs: Vec<TxId>,
    pub inputs: Vec<TxId>,
    pub params: Vec<(String, String)>,
}

/// An ordered list of steps; every step's inputs are prior outputs or
/// uploaded ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Pipeline {
    pub steps: Vec<PipelineStep>,
}
