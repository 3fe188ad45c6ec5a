//! Run configuration files.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use tvflow::datum::Datum;
use tvflow::flow::FlowConfig;
use tvflow::grid::io::{read_field, read_mask};
use tvflow::{Boundary, Field, GridDomain, Manifold};

use crate::color::{Colorspace, RgbImage};

/// Lattice of a run. Without `h` the longest side has unit length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub dims: Vec<usize>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    /// Mask file as written by `approx-domain`.
    #[serde(default)]
    pub mask: Option<PathBuf>,
}

fn default_boundary() -> Boundary {
    Boundary::NeumannReflect
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageDatum {
    pub path: PathBuf,
    pub colorspace: Colorspace,
}

/// Where the initial field comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumSpec {
    /// A field file written by a previous run.
    File(PathBuf),
    Builtin(Datum),
    /// The constrained part of an RGB image under a colour map.
    Image(ImageDatum),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifold: String,
    /// Required for builtin data; file and image data carry their own grid.
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    pub datum: DatumSpec,
    pub flow: FlowConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn must_exist(key: &str, path: &Path) -> Result<()> {
    if !path.exists() {
        bail!("`{key}`: {} does not exist", path.display());
    }
    Ok(())
}

impl RunConfig {
    /// Reads a JSON config. Relative paths inside it are resolved against
    /// the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without touching the filesystem. Errors name the offending key.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                anyhow!("{inner}")
            } else {
                anyhow!("`{path}`: {inner}")
            }
        })
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(m) = self.domain.as_mut().and_then(|d| d.mask.as_mut()) {
            fix(m);
        }
        match &mut self.datum {
            DatumSpec::File(p) => fix(p),
            DatumSpec::Image(img) => fix(&mut img.path),
            DatumSpec::Builtin(_) => {}
        }
        if let Some(o) = self.out.as_mut() {
            fix(o);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let manifold = self.target()?;
        if let Some(m) = self.domain.as_ref().and_then(|d| d.mask.as_ref()) {
            must_exist("domain.mask", m)?;
        }
        match &self.datum {
            DatumSpec::File(p) => must_exist("datum.file", p)?,
            DatumSpec::Image(img) => {
                must_exist("datum.image.path", &img.path)?;
                if img.colorspace.manifold() != manifold {
                    bail!(
                        "`manifold`: colorspace {} needs {}, config says {manifold}",
                        img.colorspace.name(),
                        img.colorspace.manifold()
                    );
                }
            }
            DatumSpec::Builtin(d) => {
                d.validate()?;
                if self.domain.is_none() {
                    bail!("`domain`: required for builtin data");
                }
            }
        }
        self.flow.validate().map_err(|e| anyhow!("`flow`: {e}"))
    }

    pub fn target(&self) -> Result<Manifold> {
        self.manifold.parse().map_err(|e| anyhow!("`manifold`: {e}"))
    }

    fn grid(&self, image_dims: Option<&[usize]>) -> Result<Arc<GridDomain>> {
        let spec = match (&self.domain, image_dims) {
            (Some(d), _) => d.clone(),
            (None, Some(dims)) => DomainSpec {
                dims: dims.to_vec(),
                h: None,
                boundary: Boundary::NeumannReflect,
                mask: None,
            },
            (None, None) => bail!("`domain`: missing"),
        };
        if let Some(dims) = image_dims {
            if spec.dims != dims {
                bail!("`domain.dims`: {:?} does not match the image size {dims:?}", spec.dims);
            }
        }
        let longest = spec.dims.iter().copied().max().unwrap_or(1);
        let h = spec.h.unwrap_or(1.0 / longest as f64);
        let domain = match &spec.mask {
            None => GridDomain::new(&spec.dims, h, spec.boundary),
            Some(path) => {
                let (dims, _, mask) = read_mask(path)?;
                if dims != spec.dims {
                    bail!("`domain.mask`: mask has dims {dims:?}, domain has {:?}", spec.dims);
                }
                GridDomain::with_mask(&spec.dims, h, spec.boundary, mask)
            }
        };
        Ok(Arc::new(domain.map_err(|e| anyhow!("`domain`: {e}"))?))
    }

    /// Builds the initial field and the reference point of the run.
    pub fn initial_field(&self) -> Result<(Field, Vec<f64>)> {
        let manifold = Arc::new(self.target()?);
        match &self.datum {
            DatumSpec::Builtin(d) => {
                let u = d.generate(self.grid(None)?, manifold.clone(), self.seed)?;
                Ok((u, d.center(&manifold)?))
            }
            DatumSpec::File(path) => {
                let u = read_field(path)?;
                if **u.manifold() != *manifold {
                    bail!("`manifold`: {} holds a field on {}", path.display(), u.manifold());
                }
                let p0 = u.value(u.domain().inside_cells()[0] as usize).to_vec();
                Ok((u, p0))
            }
            DatumSpec::Image(img) => {
                let rgb = RgbImage::read(&img.path)?;
                let domain = self.grid(Some(&rgb.dims()))?;
                let (u, _) = img.colorspace.encode(&rgb, domain)?;
                Ok((u, manifold.base_point()))
            }
        }
    }
}
