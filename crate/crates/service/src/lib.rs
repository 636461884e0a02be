//! HTTP challenge-response service for cued-recognition authentication.
//!
//! | method | path              | purpose                                       |
//! |--------|-------------------|-----------------------------------------------|
//! | POST   | `/register/start` | open a registration (enrollment bearer token) |
//! | GET    | `/register/study` | assigned keyword and cues for the current step|
//! | POST   | `/register/key`   | confirm the current step                      |
//! | POST   | `/login/start`    | open a login session                          |
//! | POST   | `/login/key`      | record one key, get the next portfolio        |
//! | POST   | `/login/finalize` | check the full sequence                       |
//! | GET    | `/assets/{ref}`   | content-addressed cue images                  |
//! | GET    | `/healthz`        | liveness and pack summary                     |
//! | POST   | `/admin/pack`     | validate and activate a pack (admin token)    |
//!
//! Sessions are identified by the `x-cuedr-session` request header.

pub mod clock;
pub mod config;
pub mod error;
pub mod http;
pub mod limiter;
pub mod service;
pub mod views;

pub use clock::{Clock, ManualClock, SystemClock};
pub use config::ServiceConfig;
pub use error::ServiceError;
pub use service::{AuthService, ServiceSettings, StartupError};
pub use views::{ChallengeView, StepView, MEDIA_TYPE, SESSION_HEADER};
