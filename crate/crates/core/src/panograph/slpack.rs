//! The `slpack` graph container: a directory holding `manifest.json`,
//! `nodes.jsonl` (one [`PanoRecord`] per line) and `images/<id>.png`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::{GraphError, LatLng, PanoRecord, StreetGraph};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const NODES_FILE: &str = "nodes.jsonl";
pub const IMAGES_DIR: &str = "images";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_lat: f64,
    pub min_lng: f64,
    pub max_lat: f64,
    pub max_lng: f64,
}

impl Bounds {
    pub fn of(points: impl IntoIterator<Item = LatLng>) -> Self {
        let mut b = Bounds {
            min_lat: f64::INFINITY,
            min_lng: f64::INFINITY,
            max_lat: f64::NEG_INFINITY,
            max_lng: f64::NEG_INFINITY,
        };
        for p in points {
            b.min_lat = b.min_lat.min(p.lat);
            b.min_lng = b.min_lng.min(p.lng);
            b.max_lat = b.max_lat.max(p.lat);
            b.max_lng = b.max_lng.max(p.lng);
        }
        if !b.min_lat.is_finite() {
            return Bounds {
                min_lat: 0.0,
                min_lng: 0.0,
                max_lat: 0.0,
                max_lng: 0.0,
            };
        }
        b
    }

    pub fn center(&self) -> LatLng {
        LatLng::new((self.min_lat + self.max_lat) / 2.0, (self.min_lng + self.max_lng) / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub city: String,
    pub node_count: usize,
    pub bounds: Bounds,
    /// Parameters of the procedural generator, when the container was
    /// produced by one. Lets readers re-render panoramas on demand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GraphError + '_ {
    move |source| GraphError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn malformed(what: impl Into<String>, detail: impl ToString) -> GraphError {
    GraphError::Malformed {
        what: what.into(),
        detail: detail.to_string(),
    }
}

pub fn load_manifest(dir: &Path) -> Result<Manifest, GraphError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| malformed(MANIFEST_FILE, e))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(malformed(
            MANIFEST_FILE,
            format!("unsupported format_version {}", manifest.format_version),
        ));
    }
    Ok(manifest)
}

/// Loads and validates a graph container directory.
pub fn load_graph(dir: &Path) -> Result<StreetGraph, GraphError> {
    let manifest = load_manifest(dir)?;
    let path = dir.join(NODES_FILE);
    let file = fs::File::open(&path).map_err(io_err(&path))?;
    let mut records = Vec::with_capacity(manifest.node_count);
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PanoRecord =
            serde_json::from_str(&line).map_err(|e| malformed(format!("{NODES_FILE} line {}", lineno + 1), e))?;
        records.push(rec);
    }
    if records.len() != manifest.node_count {
        return Err(malformed(
            MANIFEST_FILE,
            format!("node_count {} but {} records in {NODES_FILE}", manifest.node_count, records.len()),
        ));
    }
    StreetGraph::from_records(records)
}

/// Writes `manifest.json` and `nodes.jsonl`. Images are written separately
/// with [`write_image`].
pub fn save_graph(
    dir: &Path,
    graph: &StreetGraph,
    city: &str,
    generator: Option<serde_json::Value>,
) -> Result<Manifest, GraphError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        city: city.to_string(),
        node_count: graph.len(),
        bounds: graph.bounds(),
        generator,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| malformed(MANIFEST_FILE, e))?;
    fs::write(&path, text + "\n").map_err(io_err(&path))?;

    let path = dir.join(NODES_FILE);
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    let mut out = BufWriter::new(file);
    for rec in graph.nodes() {
        let line = serde_json::to_string(rec).map_err(|e| malformed(NODES_FILE, e))?;
        writeln!(out, "{line}").map_err(io_err(&path))?;
    }
    out.flush().map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn image_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(IMAGES_DIR).join(format!("{id}.png"))
}

pub fn write_image(dir: &Path, id: &str, img: &RgbImage) -> Result<(), GraphError> {
    let path = image_path(dir, id);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    img.save_with_format(&path, image::ImageFormat::Png)
        .map_err(|e| malformed(path.display().to_string(), e))
}

/// Reads an equirectangular panorama, enforcing width = 2 × height.
pub fn read_image(dir: &Path, id: &str) -> Result<RgbImage, GraphError> {
    let path = image_path(dir, id);
    let bytes = fs::read(&path).map_err(io_err(&path))?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| malformed(path.display().to_string(), e))?
        .into_rgb8();
    if img.width() != 2 * img.height() || img.height() == 0 {
        return Err(malformed(
            path.display().to_string(),
            format!("panorama must be 2:1, got {}x{}", img.width(), img.height()),
        ));
    }
    Ok(img)
}
