//! On-disk dataset layout: `manifest.json` plus one `MSL1` lattice file and
//! one JSON truth file per sample.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container;
use crate::error::{Error, Result};
use crate::synth::{Dataset, ImageLattice, PointSet, Sample, SynthConfig};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFiles {
    pub lattice: String,
    pub truth: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub width: usize,
    pub height: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub config: SynthConfig,
    pub samples: Vec<SampleFiles>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::json(path))?;
    text.push('\n');
    fs::write(path, text).map_err(Error::io(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(Error::json(path))
}

pub fn save_dataset(dir: &Path, ds: &Dataset, cfg: &SynthConfig) -> Result<DatasetManifest> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let mut files = Vec::with_capacity(ds.len());
    for (i, s) in ds.samples.iter().enumerate() {
        let entry = SampleFiles {
            lattice: format!("sample_{i:05}.bin"),
            truth: format!("sample_{i:05}.json"),
        };
        let lat = &s.lattice;
        container::write(
            &dir.join(&entry.lattice),
            lat.width() as u32,
            lat.height() as u32,
            lat.values(),
        )?;
        write_json(&dir.join(&entry.truth), &s.truth)?;
        files.push(entry);
    }
    let manifest = DatasetManifest {
        width: cfg.width,
        height: cfg.height,
        n: ds.len(),
        seed: cfg.seed,
        config: cfg.clone(),
        samples: files,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn load_dataset(dir: &Path) -> Result<(Dataset, DatasetManifest)> {
    let manifest: DatasetManifest = read_json(&dir.join(MANIFEST))?;
    if manifest.samples.len() != manifest.n {
        return Err(Error::config(format!(
            "manifest lists {} samples but N = {}",
            manifest.samples.len(),
            manifest.n
        )));
    }
    let mut samples = Vec::with_capacity(manifest.n);
    for entry in &manifest.samples {
        let path = dir.join(&entry.lattice);
        let (w, h, values) = container::read(&path)?;
        if (w as usize, h as usize) != (manifest.width, manifest.height) {
            return Err(Error::Container {
                path,
                reason: format!("{w}x{h} does not match manifest"),
            });
        }
        let lattice = ImageLattice::new(w as usize, h as usize, values)?;
        let truth: PointSet = read_json(&dir.join(&entry.truth))?;
        samples.push(Sample::new(lattice, truth)?);
    }
    Ok((Dataset::new(samples), manifest))
}
