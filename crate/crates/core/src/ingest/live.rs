use futures::StreamExt;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

use super::{Frame, FrameStream, IngestError, RawFrame, StreamItem, Transport};

/// `com.atproto.sync.subscribeRepos` over a websocket.
#[derive(Debug, Clone)]
pub struct LiveTransport {
    endpoint: String,
}

impl LiveTransport {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self { endpoint: endpoint.into() }
    }

    pub fn url_for(&self, resume: Option<u64>) -> String {
        match resume {
            None => self.endpoint.clone(),
            Some(cursor) => {
                let sep = if self.endpoint.contains('?') { '&' } else { '?' };
                format!("{}{sep}cursor={cursor}", self.endpoint)
            }
        }
    }
}

pub struct LiveStream {
    socket: WebSocketStream<MaybeTlsStream<TcpStream>>,
}

impl Transport for LiveTransport {
    type Stream = LiveStream;

    async fn open(&mut self, resume: Option<u64>) -> Result<LiveStream, IngestError> {
        let url = self.url_for(resume);
        let (socket, _) = tokio_tungstenite::connect_async(url.as_str())
            .await
            .map_err(|e| IngestError::ConnectFailed(format!("{url}: {e}")))?;
        tracing::info!(%url, "connected to relay");
        Ok(LiveStream { socket })
    }

    fn retry_connect(&self) -> bool {
        true
    }
}

impl FrameStream for LiveStream {
    async fn next_frame(&mut self) -> StreamItem {
        loop {
            match self.socket.next().await {
                Some(Ok(Message::Binary(bytes))) => {
                    return StreamItem::Frame(Frame { position: None, raw: RawFrame::Binary(bytes.to_vec()) })
                }
                Some(Ok(Message::Close(reason))) => {
                    return StreamItem::Disconnected(format!("closed by relay: {reason:?}"))
                }
                Some(Ok(_)) => continue,
                Some(Err(e)) => return StreamItem::Disconnected(e.to_string()),
                None => return StreamItem::Disconnected("socket closed".into()),
            }
        }
    }
}
