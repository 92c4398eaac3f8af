use std::path::PathBuf;
use tokio::fs::File;
use tokio::io::{AsyncBufReadExt, BufReader, Lines};

use super::decode::peek_replay_cursor;
use super::{Frame, FrameStream, IngestError, RawFrame, StreamItem, Transport};

/// Reads a JSONL replay file. Deterministic: the same file and resume
/// cursor always produce the same frame sequence.
#[derive(Debug, Clone)]
pub struct ReplayTransport {
    path: PathBuf,
}

impl ReplayTransport {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }
}

pub struct ReplayStream {
    lines: Lines<BufReader<File>>,
    line_no: u64,
    resume: Option<u64>,
}

impl Transport for ReplayTransport {
    type Stream = ReplayStream;

    async fn open(&mut self, resume: Option<u64>) -> Result<ReplayStream, IngestError> {
        let file = File::open(&self.path)
            .await
            .map_err(|e| IngestError::ConnectFailed(format!("{}: {e}", self.path.display())))?;
        Ok(ReplayStream { lines: BufReader::new(file).lines(), line_no: 0, resume })
    }

    fn retry_connect(&self) -> bool {
        false
    }
}

impl FrameStream for ReplayStream {
    async fn next_frame(&mut self) -> StreamItem {
        loop {
            let line = match self.lines.next_line().await {
                Ok(Some(line)) => line,
                Ok(None) => return StreamItem::End,
                Err(e) => return StreamItem::Disconnected(e.to_string()),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            // cheap fast-forward; the reader dedups whatever gets through
            if let (Some(resume), Some(cursor)) = (self.resume, peek_replay_cursor(&line)) {
                if cursor <= resume {
                    continue;
                }
            }
            return StreamItem::Frame(Frame { position: Some(self.line_no), raw: RawFrame::Line(line) });
        }
    }
}
