//! Network ingress and egress: the RDA client and the NxFrame protocol.

pub mod frame;
pub mod queue;
pub mod rda;
pub mod transport;

pub use frame::{frame_decode, frame_encode, Frame, SignalBlock, StreamId, WireItem};
pub use queue::{DropOldestQueue, DEFAULT_QUEUE_CAPACITY};
pub use rda::{rda_decode, RdaClient, RdaClientConfig, RdaEvent, RdaMessage, RdaSession, RdaStart};
pub use transport::{FrameReceiver, FrameSender, GapTracker, Transport};
