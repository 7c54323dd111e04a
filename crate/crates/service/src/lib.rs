//! Session service for handover studies.
//!
//! Sessions are created over HTTP and driven over a WebSocket stream that
//! pushes one message per controller tick. See [`protocol`] for the `v1`
//! wire schema and [`session`] for the transport-free state machine.

pub mod error;
pub mod protocol;
mod server;
pub mod session;
pub mod store;

pub use error::{ServiceError, ServiceResult};
pub use server::{router, AppState, ServiceConfig};
pub use session::{Session, SessionState, StudySetup};
pub use store::SessionStore;
