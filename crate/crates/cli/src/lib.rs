//! Command-line and HTTP front end for `instructbias-core`.

pub mod http;
pub mod remote;

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, ValueEnum};
use thiserror::Error;

use instructbias_core::evalharness::{ClientLimits, ConstantClient, EchoClient, ModelClient, ReplayClient};

pub use remote::{RemoteClient, TOKEN_ENV};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClientKind {
    Echo,
    Constant,
    Replay,
    Remote,
}

/// Model-client selection shared by `report`, `eval` and `serve`.
#[derive(Debug, Clone, Args)]
pub struct ClientArgs {
    #[arg(long, value_enum)]
    pub client: Option<ClientKind>,
    /// Text returned by the constant client.
    #[arg(long, default_value = "")]
    pub constant_text: String,
    /// Recorded generations (JSON lines) for the replay client.
    #[arg(long)]
    pub replay_file: Option<PathBuf>,
    /// Completion endpoint for the remote client; the bearer token is read
    /// from INSTRUCTBIAS_API_TOKEN.
    #[arg(long, env = "INSTRUCTBIAS_REMOTE_URL")]
    pub remote_url: Option<String>,
    #[arg(long, default_value_t = 8)]
    pub max_concurrent: usize,
    #[arg(long)]
    pub requests_per_minute: Option<u32>,
}

#[derive(Debug, Error)]
pub enum ClientSetupError {
    #[error("--replay-file is required for the replay client")]
    MissingReplayFile,
    #[error("--remote-url is required for the remote client")]
    MissingRemoteUrl,
    #[error("cannot load replay file: {0}")]
    Replay(String),
}

impl ClientArgs {
    pub fn build(&self, kind: ClientKind) -> Result<Arc<dyn ModelClient>, ClientSetupError> {
        Ok(match kind {
            ClientKind::Echo => Arc::new(EchoClient),
            ClientKind::Constant => Arc::new(ConstantClient::new(self.constant_text.clone())),
            ClientKind::Replay => {
                let path = self.replay_file.as_ref().ok_or(ClientSetupError::MissingReplayFile)?;
                Arc::new(ReplayClient::load(path).map_err(|e| ClientSetupError::Replay(e.to_string()))?)
            }
            ClientKind::Remote => {
                let url = self.remote_url.clone().ok_or(ClientSetupError::MissingRemoteUrl)?;
                let limits = ClientLimits {
                    max_concurrent: self.max_concurrent.max(1),
                    requests_per_minute: self.requests_per_minute,
                };
                Arc::new(RemoteClient::from_env(url, limits))
            }
        })
    }

    /// The selected client, if any.
    pub fn selected(&self) -> Result<Option<Arc<dyn ModelClient>>, ClientSetupError> {
        self.client.map(|k| self.build(k)).transpose()
    }
}
