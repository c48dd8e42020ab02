//! Named-data networking layer: packets, forwarding tables, the forwarder
//! state machine, node runtime, faces and application endpoints.

pub mod clock;
pub mod endpoint;
pub mod face;
pub mod forwarder;
pub mod node;
pub mod packet;
pub mod segment;
pub mod tables;
pub mod tcp;

pub use clock::{Clock, ManualClock, SystemClock};
pub use endpoint::{segmented_handler, DataSigner, DataValidator, Endpoint, GetError, GetOptions, Handler, InterestSigner};
pub use face::{Inlet, Lossy, Shaped, Transport};
pub use forwarder::{Counters, Forwarder, ForwarderConfig, Outgoing};
pub use node::{AppFace, LinkConfig, Node};
pub use packet::{put_name, Data, Interest, Packet, PacketError, Reader, SegmentInfo, SigScheme, Signature};
pub use segment::{parse_segment, reassemble, segment, segment_name, SegmentError, DEFAULT_MAX_PAYLOAD};
pub use tables::{ContentStore, FaceId, Fib, Pit};
