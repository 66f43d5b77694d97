//! Frame format: a 4-byte big-endian payload length followed by that many bytes of UTF-8
//! JSON.

use serde::{Deserialize, Serialize};
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

use crate::pdl::{Diagnostic, RegistryKey};

/// Largest accepted payload. Longer length prefixes are a protocol violation.
pub const MAX_FRAME: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Method,
    Logic,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CompileRequest {
    pub id: u64,
    pub kind: UnitKind,
    pub source: String,
    pub deps: Vec<RegistryKey>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileResponse {
    pub id: u64,
    pub status: Status,
    pub key: Option<RegistryKey>,
    pub diagnostics: Vec<Diagnostic>,
}

impl CompileResponse {
    pub fn fail(id: u64, diagnostics: Vec<Diagnostic>) -> Self {
        CompileResponse {
            id,
            status: Status::Fail,
            key: None,
            diagnostics,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    /// Canonical bytes of this response, used for mode-equivalence comparisons.
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("response serializes")
    }
}

/// A registered method as the worker needs it: its source and the keys it depends on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodUnit {
    pub key: RegistryKey,
    pub source: String,
    pub deps: Vec<RegistryKey>,
}

/// Frames the engine sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClientFrame {
    Method {
        id: u64,
        source: String,
        deps: Vec<RegistryKey>,
    },
    Logic {
        id: u64,
        source: String,
        deps: Vec<RegistryKey>,
    },
    /// Answer to a fetch: the sources the worker asked for.
    Provide { id: u64, sources: Vec<MethodUnit> },
}

impl ClientFrame {
    pub fn request(req: &CompileRequest) -> Self {
        let (id, source, deps) = (req.id, req.source.clone(), req.deps.clone());
        match req.kind {
            UnitKind::Method => ClientFrame::Method { id, source, deps },
            UnitKind::Logic => ClientFrame::Logic { id, source, deps },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchFrame {
    pub id: u64,
    /// Always `"fetch"`.
    pub kind: String,
    pub keys: Vec<RegistryKey>,
}

/// Frames the worker sends.
#[derive(Debug, Clone, PartialEq)]
pub enum WorkerFrame {
    Response(CompileResponse),
    Fetch { id: u64, keys: Vec<RegistryKey> },
}

impl WorkerFrame {
    pub fn to_json(&self) -> Vec<u8> {
        match self {
            WorkerFrame::Response(r) => r.to_bytes(),
            WorkerFrame::Fetch { id, keys } => serde_json::to_vec(&FetchFrame {
                id: *id,
                kind: "fetch".into(),
                keys: keys.clone(),
            })
            .expect("fetch serializes"),
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        let value: serde_json::Value = serde_json::from_slice(bytes)?;
        if value.get("kind").and_then(|k| k.as_str()) == Some("fetch") {
            let f: FetchFrame = serde_json::from_value(value)?;
            Ok(WorkerFrame::Fetch { id: f.id, keys: f.keys })
        } else {
            Ok(WorkerFrame::Response(serde_json::from_value(value)?))
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("connection closed")]
    Closed,
    #[error("frame truncated after {got} of {expected} bytes")]
    Truncated { expected: usize, got: usize },
    #[error("frame of {0} bytes exceeds the limit")]
    TooLarge(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Encodes one frame.
pub fn encode(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + 4);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    out
}

pub async fn write_frame<W: AsyncWrite + Unpin>(w: &mut W, payload: &[u8]) -> Result<(), FrameError> {
    w.write_all(&encode(payload)).await?;
    w.flush().await?;
    Ok(())
}

/// Reads one frame. A clean end of stream before any length byte is `Closed`.
pub async fn read_frame<R: AsyncRead + Unpin>(r: &mut R) -> Result<Vec<u8>, FrameError> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        let n = r.read(&mut len[got..]).await?;
        if n == 0 {
            return Err(if got == 0 {
                FrameError::Closed
            } else {
                FrameError::Truncated { expected: 4, got }
            });
        }
        got += n;
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(FrameError::TooLarge(len));
    }
    let mut buf = vec![0u8; len];
    let mut got = 0;
    while got < len {
        let n = r.read(&mut buf[got..]).await?;
        if n == 0 {
            return Err(FrameError::Truncated { expected: len, got });
        }
        got += n;
    }
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_layout_is_big_endian_length_then_json() {
        let req = ClientFrame::request(&CompileRequest {
            id: 1,
            kind: UnitKind::Logic,
            source: "logic {}".into(),
            deps: vec![],
        });
        let payload = serde_json::to_vec(&req).unwrap();
        assert_eq!(
            String::from_utf8(payload.clone()).unwrap(),
            r#"{"kind":"logic","id":1,"source":"logic {}","deps":[]}"#
        );
        let frame = encode(&payload);
        assert_eq!(&frame[..4], &[0, 0, 0, 53]);
        assert_eq!(&frame[4..], payload.as_slice());
    }

    #[test]
    fn worker_frames_round_trip() {
        let fetch = WorkerFrame::Fetch {
            id: 9,
            keys: vec![RegistryKey("ab".into())],
        };
        assert_eq!(
            String::from_utf8(fetch.to_json()).unwrap(),
            r#"{"id":9,"kind":"fetch","keys":["ab"]}"#
        );
        assert_eq!(WorkerFrame::from_json(&fetch.to_json()).unwrap(), fetch);
        let resp = WorkerFrame::Response(CompileResponse::fail(0, vec![]));
        assert_eq!(
            String::from_utf8(resp.to_json()).unwrap(),
            r#"{"id":0,"status":"fail","key":null,"diagnostics":[]}"#
        );
        assert_eq!(WorkerFrame::from_json(&resp.to_json()).unwrap(), resp);
    }

    #[tokio::test]
    async fn truncated_and_oversized_frames() {
        let mut short: &[u8] = &[0, 0, 0, 10, b'{'];
        assert!(matches!(
            read_frame(&mut short).await,
            Err(FrameError::Truncated { expected: 10, got: 1 })
        ));
        let mut huge: &[u8] = &[0xff, 0xff, 0xff, 0xff];
        assert!(matches!(read_frame(&mut huge).await, Err(FrameError::TooLarge(_))));
        let mut empty: &[u8] = &[];
        assert!(matches!(read_frame(&mut empty).await, Err(FrameError::Closed)));
    }
}
