//! Node kinds usable from pipeline files. Each has a `from_params`
//! constructor used by the registry, plus a typed constructor for code.

mod network;
mod sinks;
mod sources;
mod transform;

pub use network::{NetReceiveNode, NetSendNode, RdaReceiveNode};
pub use sinks::{BinLogNode, Collected, Collector, CsvSinkNode};
pub use sources::{GeneratorNode, ReaderNode, StimulatorNode};
pub use transform::{
    ApplyFunctionNode, ButterFilterNode, ChannelSelectorNode, ClassifyNode, CommonAverageNode, DownSampleNode,
    EpochingNode, FeatureAggregatorNode, FftNode, HilbertNode, MarkerEpochingNode, NotchFilterNode, PsdWelchNode,
    ReferenceChannelNode, SpatialFilterNode, StimEpochingNode, UnivariateStatNode, WindowingNode,
};
