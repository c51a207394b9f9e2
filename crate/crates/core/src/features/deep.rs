use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Mutex;
use std::time::Duration;

use ndarray::Array3;

use super::wire::{self, FeatureRequest, Reply};
use super::{FeatureExtractor, FeatureMap};
use crate::error::{Error, Result};
use crate::imaging::Patch;

/// Client for one layer of a remote feature service.
///
/// Holds a single connection, opened lazily and reused across requests.
/// Requests from concurrent callers are serialized by the connection lock.
/// Any transport or protocol failure drops the connection so the next call
/// reconnects.
pub struct DeepClient {
    addr: String,
    layer: usize,
    timeout: Duration,
    conn: Mutex<Option<TcpStream>>,
}

impl DeepClient {
    pub fn new(addr: &str, layer: usize, timeout: Duration) -> Self {
        DeepClient {
            addr: addr.to_string(),
            layer,
            timeout,
            conn: Mutex::new(None),
        }
    }

    pub fn addr(&self) -> &str {
        &self.addr
    }

    fn connect(&self) -> Result<TcpStream> {
        let addrs: Vec<_> = self
            .addr
            .to_socket_addrs()
            .map_err(|e| Error::feature_source(format!("cannot resolve {}", self.addr), Some(e)))?
            .collect();
        let mut last = None;
        for a in addrs {
            match TcpStream::connect_timeout(&a, self.timeout) {
                Ok(s) => {
                    let setup = s
                        .set_read_timeout(Some(self.timeout))
                        .and_then(|_| s.set_write_timeout(Some(self.timeout)))
                        .and_then(|_| s.set_nodelay(true));
                    if let Err(e) = setup {
                        last = Some(e);
                        continue;
                    }
                    return Ok(s);
                }
                Err(e) => last = Some(e),
            }
        }
        Err(Error::feature_source(
            format!("cannot connect to feature service at {}", self.addr),
            last,
        ))
    }

    fn round_trip(&self, stream: &TcpStream, req: &FeatureRequest) -> Result<wire::FeatureResponse> {
        let io_err = |what: &str, e| Error::feature_source(format!("{what} {}", self.addr), Some(e));
        let mut s = stream;
        req.write_to(&mut s)
            .map_err(|e| io_err("sending request to", e))?;
        match wire::read_reply(&mut s).map_err(|e| io_err("reading reply from", e))? {
            Reply::Features(resp) => Ok(resp),
            Reply::Error(code) => Err(Error::feature_source(
                format!("feature service {} answered with error code {code}", self.addr),
                None,
            )),
        }
    }
}

impl FeatureExtractor for DeepClient {
    fn extract(&self, patch: &Patch) -> Result<FeatureMap> {
        let req = FeatureRequest {
            width: patch.width as u32,
            height: patch.height as u32,
            channels: 3,
            pixels: patch.pixels.clone(),
        };
        let mut guard = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(self.connect()?);
        }
        let result = self.round_trip(guard.as_ref().expect("connection present"), &req);
        let resp = match result {
            Ok(r) => r,
            Err(e) => {
                *guard = None;
                return Err(e);
            }
        };
        drop(guard);

        let layer = resp.layers.get(self.layer).ok_or_else(|| {
            Error::feature_source(
                format!(
                    "requested layer {} but service returned {} layers",
                    self.layer,
                    resp.layers.len()
                ),
                None,
            )
        })?;
        if layer.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::feature_source("service returned non-finite features", None));
        }
        let (v, h, d) = (layer.v as usize, layer.h as usize, layer.d as usize);
        if v == 0 || h == 0 || d == 0 {
            return Err(Error::feature_source(format!("service returned empty layer {v}x{h}x{d}"), None));
        }
        let data = Array3::from_shape_vec((v, h, d), layer.values.iter().map(|&x| x as f64).collect())
            .map_err(|e| Error::feature_source(format!("layer shape mismatch: {e}"), None))?;
        FeatureMap::new(data, (patch.width as f64 / h as f64).max(1.0))
    }
}
