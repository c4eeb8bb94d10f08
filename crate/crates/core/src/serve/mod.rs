//! Streaming prediction service.

mod protocol;
mod server;

pub use protocol::{handle_message, parse_request, ErrorCode, FrameRequest, Response};
pub use server::{run_server, ServeError, Server, MAX_MESSAGE_BYTES};
