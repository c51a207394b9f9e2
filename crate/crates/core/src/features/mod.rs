//! Feature extraction: one [`FeatureMap`] per configured level.
//!
//! Three extractor kinds exist. `gray-cells` and `grad-hist` are computed
//! locally and need nothing else; `deep-client` asks a feature service over
//! TCP for one layer of a convolutional network (see [`wire`]).

mod classic;
mod deep;
pub mod wire;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::imaging::Patch;

pub use classic::{GradHist, GrayCells};
pub use deep::DeepClient;

/// Default cell size in pixels for the classic extractors.
pub const DEFAULT_CELL: usize = 4;
/// Default orientation bin count for `grad-hist`.
pub const DEFAULT_BINS: usize = 9;
/// Per-cell normalization epsilon for `grad-hist`.
pub const GRAD_HIST_EPS: f64 = 1e-5;

/// `v x h x d` real feature tensor, channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub data: Array3<f64>,
    /// Patch pixels per feature cell along the horizontal axis.
    pub cell_size: f64,
}

impl FeatureMap {
    pub fn new(data: Array3<f64>, cell_size: f64) -> Result<Self> {
        if !(cell_size >= 1.0) {
            return Err(Error::invalid(format!("cell size must be >= 1, got {cell_size}")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature map contains non-finite values"));
        }
        let data = if data.is_standard_layout() {
            data
        } else {
            data.as_standard_layout().into_owned()
        };
        Ok(FeatureMap { data, cell_size })
    }

    pub fn dim(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    pub fn channel(&self, c: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(Axis(2), c)
    }
}

/// Multiply every channel by `window`.
pub fn apply_window(fm: &FeatureMap, window: &Array2<f64>) -> Result<FeatureMap> {
    let (v, h, _) = fm.dim();
    if window.dim() != (v, h) {
        return Err(Error::invalid(format!(
            "window is {:?} but feature map is {v}x{h}",
            window.dim()
        )));
    }
    let mut data = fm.data.clone();
    for mut ch in data.axis_iter_mut(Axis(2)) {
        ch *= window;
    }
    Ok(FeatureMap {
        data,
        cell_size: fm.cell_size,
    })
}

/// Anything that turns a patch into a feature map.
pub trait FeatureExtractor: Send + Sync {
    fn extract(&self, patch: &Patch) -> Result<FeatureMap>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExtractorKind {
    GrayCells,
    GradHist,
    DeepClient,
}

impl ExtractorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtractorKind::GrayCells => "gray-cells",
            ExtractorKind::GradHist => "grad-hist",
            ExtractorKind::DeepClient => "deep-client",
        }
    }

    fn allowed_params(self) -> &'static [&'static str] {
        match self {
            ExtractorKind::GrayCells => &["cell"],
            ExtractorKind::GradHist => &["cell", "bins"],
            ExtractorKind::DeepClient => &["addr", "layer", "timeout_ms"],
        }
    }
}

impl FromStr for ExtractorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gray-cells" => Ok(ExtractorKind::GrayCells),
            "grad-hist" => Ok(ExtractorKind::GradHist),
            "deep-client" => Ok(ExtractorKind::DeepClient),
            other => Err(Error::invalid(format!("unknown extractor kind '{other}'"))),
        }
    }
}

/// An extractor kind plus its named parameters.
///
/// Text form: `kind` or `kind:name=value,name=value`, e.g.
/// `grad-hist:cell=4,bins=9` or `deep-client:addr=127.0.0.1:7070,layer=0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractorSpec {
    pub kind: ExtractorKind,
    pub params: BTreeMap<String, String>,
}

impl ExtractorSpec {
    pub fn new(kind: ExtractorKind, params: BTreeMap<String, String>) -> Result<Self> {
        let spec = ExtractorSpec { kind, params };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gray_cells(cell: usize) -> Self {
        ExtractorSpec {
            kind: ExtractorKind::GrayCells,
            params: [("cell".to_string(), cell.to_string())].into(),
        }
    }

    pub fn grad_hist(cell: usize, bins: usize) -> Self {
        ExtractorSpec {
            kind: ExtractorKind::GradHist,
            params: [
                ("cell".to_string(), cell.to_string()),
                ("bins".to_string(), bins.to_string()),
            ]
            .into(),
        }
    }

    pub fn deep_client(addr: &str, layer: usize) -> Self {
        ExtractorSpec {
            kind: ExtractorKind::DeepClient,
            params: [
                ("addr".to_string(), addr.to_string()),
                ("layer".to_string(), layer.to_string()),
            ]
            .into(),
        }
    }

    fn usize_param(&self, name: &str, default: Option<usize>) -> Result<usize> {
        match (self.params.get(name), default) {
            (Some(v), _) => v.parse().map_err(|_| {
                Error::invalid(format!("{}: parameter {name}='{v}' is not a count", self.kind.as_str()))
            }),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(Error::invalid(format!(
                "{}: missing parameter {name}",
                self.kind.as_str()
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let allowed = self.kind.allowed_params();
        if let Some(bad) = self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::invalid(format!(
                "{}: unknown parameter '{bad}'",
                self.kind.as_str()
            )));
        }
        match self.kind {
            ExtractorKind::GrayCells | ExtractorKind::GradHist => {
                if self.usize_param("cell", Some(DEFAULT_CELL))? == 0 {
                    return Err(Error::invalid("cell size must be >= 1"));
                }
                if self.kind == ExtractorKind::GradHist
                    && self.usize_param("bins", Some(DEFAULT_BINS))? < 2
                {
                    return Err(Error::invalid("grad-hist needs at least 2 bins"));
                }
            }
            ExtractorKind::DeepClient => {
                if !self.params.contains_key("addr") {
                    return Err(Error::invalid("deep-client: missing parameter addr"));
                }
                self.usize_param("layer", None)?;
                self.usize_param("timeout_ms", Some(10_000))?;
            }
        }
        Ok(())
    }

    /// Construct the extractor this spec describes.
    pub fn build(&self) -> Result<Box<dyn FeatureExtractor>> {
        self.validate()?;
        Ok(match self.kind {
            ExtractorKind::GrayCells => Box::new(GrayCells::new(self.usize_param("cell", Some(DEFAULT_CELL))?)),
            ExtractorKind::GradHist => Box::new(GradHist::new(
                self.usize_param("cell", Some(DEFAULT_CELL))?,
                self.usize_param("bins", Some(DEFAULT_BINS))?,
            )),
            ExtractorKind::DeepClient => Box::new(DeepClient::new(
                &self.params["addr"],
                self.usize_param("layer", None)?,
                std::time::Duration::from_millis(self.usize_param("timeout_ms", Some(10_000))? as u64),
            )),
        })
    }
}

impl fmt::Display for ExtractorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.as_str())?;
        for (i, (k, v)) in self.params.iter().enumerate() {
            write!(f, "{}{k}={v}", if i == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

impl FromStr for ExtractorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k.trim(), Some(r)),
            None => (s, None),
        };
        let kind: ExtractorKind = kind.parse()?;
        let mut params = BTreeMap::new();
        for item in rest.into_iter().flat_map(|r| r.split(',')) {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("extractor parameter '{item}' is not name=value")))?;
            if params.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::invalid(format!("duplicate extractor parameter '{}'", k.trim())));
            }
        }
        ExtractorSpec::new(kind, params)
    }
}

/// Build the extractor for `spec` and run it once.
pub fn extract(spec: &ExtractorSpec, patch: &Patch) -> Result<FeatureMap> {
    spec.build()?.extract(patch)
}
