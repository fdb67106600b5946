//! Command-line interface.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use panonav_core::engine::open_pano_source;
use panonav_core::games::{COURIER_GAME, GAME_NAMES};
use panonav_core::panograph::{
    self, carve_region, compute_stats, GraphStats, LatLng, RegionSpec, StreetGraph,
};
use panonav_core::synthcity::{write_city, CityParams};
use panonav_core::EnvConfig;

use crate::bench::{run_bench, BenchAgent, BenchConfig};
use crate::server::PlayServer;
use crate::session::World;

/// Environment variable naming the default data directory.
pub const DATA_DIR_ENV: &str = "PANONAV_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "panonav", version, about = "Panorama street-graph navigation environment")]
pub struct Cli {
    /// Relative graph paths are resolved against this directory.
    #[arg(long, global = true, env = DATA_DIR_ENV)]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic city and write it as a graph container.
    Generate(GenerateArgs),
    /// Cut a region out of a graph container into a new container.
    Carve(CarveArgs),
    /// Print graph statistics.
    Stats(StatsArgs),
    /// Run an agent on courier episodes and report rewards, misses and speed.
    OracleBench(BenchArgs),
    /// Serve environments to remote clients, one per connection.
    PlayServer(ServeArgs),
}

/// `WxH` block counts, both at least 1.
fn parse_blocks(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let parse = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("{v:?}: {e}"));
    let (w, h) = (parse(w)?, parse(h)?);
    if w == 0 || h == 0 {
        return Err(format!("blocks must be at least 1x1, got {w}x{h}"));
    }
    Ok((w, h))
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output container directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Grid size in blocks, e.g. `4x4`.
    #[arg(long, default_value = "4x4", value_parser = parse_blocks)]
    pub blocks: (u32, u32),
    /// Intersection jitter in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    pub irregularity: f64,
    #[arg(long, default_value_t = 80.0)]
    pub block_len: f64,
    /// Target spacing between panoramas along a street, meters.
    #[arg(long, default_value_t = 10.0)]
    pub spacing: f64,
    /// Panorama height in pixels; width is twice this.
    #[arg(long, default_value_t = 512)]
    pub pano_height: u32,
    /// Write PNG panoramas; otherwise they are rendered on demand.
    #[arg(long)]
    pub images: bool,
    #[arg(long, default_value = "synthetic")]
    pub city: String,
}

#[derive(Debug, Args)]
pub struct CarveArgs {
    /// Source container.
    #[arg(long)]
    pub graph: PathBuf,
    /// Output container directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Keep nodes within `--depth` hops of this pano id.
    #[arg(long, requires = "depth", conflicts_with_all = ["bbox", "polygon"])]
    pub bfs_center: Option<String>,
    #[arg(long)]
    pub depth: Option<u32>,
    /// `min_lat,min_lng,max_lat,max_lng`.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "polygon")]
    pub bbox: Option<String>,
    /// Vertices as `lat,lng;lat,lng;...`.
    #[arg(long, allow_hyphen_values = true)]
    pub polygon: Option<String>,
}

impl CarveArgs {
    fn region(&self) -> Result<RegionSpec> {
        let spec = match (&self.bfs_center, &self.bbox, &self.polygon) {
            (Some(center), None, None) => RegionSpec::Bfs {
                center_id: center.clone(),
                depth: self.depth.context("--bfs-center needs --depth")?,
            },
            (None, Some(b), None) => {
                let v = b
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .with_context(|| format!("bad --bbox {b:?}"))?;
                let [min_lat, min_lng, max_lat, max_lng] = v[..] else {
                    bail!("--bbox needs 4 numbers, got {}", v.len());
                };
                RegionSpec::BBox {
                    min_lat,
                    min_lng,
                    max_lat,
                    max_lng,
                }
            }
            (None, None, Some(p)) => RegionSpec::Polygon {
                vertices: parse_polygon(p)?,
            },
            _ => bail!("give exactly one of --bfs-center, --bbox or --polygon"),
        };
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_polygon(s: &str) -> Result<Vec<LatLng>> {
    s.split(';')
        .filter(|v| !v.trim().is_empty())
        .map(|v| {
            let (lat, lng) = v.split_once(',').with_context(|| format!("vertex {v:?} is not lat,lng"))?;
            Ok(LatLng::new(lat.trim().parse()?, lng.trim().parse()?))
        })
        .collect()
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub graph: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, value_enum, default_value = "oracle")]
    pub agent: BenchAgent,
    #[arg(long, default_value = COURIER_GAME, value_parser = clap::builder::PossibleValuesParser::new(GAME_NAMES))]
    pub game: String,
    #[arg(long, default_value_t = 20)]
    pub episodes: u32,
    #[arg(long, default_value_t = 1000)]
    pub episode_length: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 84)]
    pub frame_size: u32,
    /// Episodes replayed with a warm cache for the throughput figure.
    #[arg(long, default_value_t = 2)]
    pub warm_episodes: u32,
    /// Steps per timed window of the warm replay.
    #[arg(long, default_value_t = 64)]
    pub warm_window: usize,
    /// Panorama cache budget in MiB.
    #[arg(long, default_value_t = 256)]
    pub cache_mb: usize,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value = "127.0.0.1:7788")]
    pub bind: String,
    /// Default game of new sessions.
    #[arg(long, default_value = COURIER_GAME, value_parser = clap::builder::PossibleValuesParser::new(GAME_NAMES))]
    pub game: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 84)]
    pub frame_size: u32,
    /// Per-session panorama cache budget in MiB.
    #[arg(long, default_value_t = 64)]
    pub cache_mb: usize,
}

fn resolve(data_dir: Option<&Path>, path: &Path) -> PathBuf {
    match data_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

/// Loads a container and its panorama source.
pub fn open_world(dir: &Path, base: EnvConfig) -> Result<World> {
    let manifest = panograph::load_manifest(dir).with_context(|| format!("reading {}", dir.display()))?;
    let graph = Arc::new(panograph::load_graph(dir).with_context(|| format!("reading {}", dir.display()))?);
    let source = open_pano_source(dir, &manifest, Arc::clone(&graph))?;
    Ok(World { graph, source, base })
}

fn print_stats(out: &mut impl Write, graph: &StreetGraph) -> Result<GraphStats> {
    let stats = compute_stats(graph)?;
    writeln!(out, "{}", GraphStats::HEADER)?;
    writeln!(out, "{}", stats.table_row())?;
    Ok(stats)
}

pub fn run(cli: Cli, out: &mut impl Write) -> Result<()> {
    let data_dir = cli.data_dir.as_deref();
    match cli.command {
        Command::Generate(a) => {
            let params = CityParams {
                seed: a.seed,
                blocks_x: a.blocks.0,
                blocks_y: a.blocks.1,
                block_len_m: a.block_len,
                node_spacing_m: a.spacing,
                irregularity: a.irregularity,
                pano_height: a.pano_height,
                ..CityParams::default()
            };
            let dir = resolve(data_dir, &a.out);
            let graph = write_city(&dir, &params, &a.city, a.images)?;
            print_stats(out, &graph)?;
        }
        Command::Carve(a) => {
            let spec = a.region()?;
            let src = resolve(data_dir, &a.graph);
            let manifest = panograph::load_manifest(&src)?;
            let graph = panograph::load_graph(&src)?;
            let region = carve_region(&graph, &spec)?;
            let dst = resolve(data_dir, &a.out);
            panograph::save_graph(&dst, &region.graph, &manifest.city, manifest.generator.clone())?;
            if src.join("images").is_dir() {
                fs::create_dir_all(dst.join("images"))?;
                for rec in region.graph.nodes() {
                    let from = panograph::image_path(&src, &rec.id);
                    let to = panograph::image_path(&dst, &rec.id);
                    fs::copy(&from, &to).with_context(|| format!("copying {}", from.display()))?;
                }
            }
            print_stats(out, &region.graph)?;
            writeln!(out, "components\t{}", region.components)?;
        }
        Command::Stats(a) => {
            let graph = panograph::load_graph(&resolve(data_dir, &a.graph))?;
            print_stats(out, &graph)?;
        }
        Command::OracleBench(a) => {
            let base = EnvConfig {
                cache_budget_bytes: a.cache_mb << 20,
                ..EnvConfig::default()
            };
            let world = open_world(&resolve(data_dir, &a.graph), base)?;
            let cfg = BenchConfig {
                agent: a.agent,
                game: a.game,
                episodes: a.episodes,
                episode_length: a.episode_length,
                seed: a.seed,
                frame_size: a.frame_size,
                keep_infos: false,
                warm_episodes: a.warm_episodes,
                warm_window: a.warm_window,
            };
            let report = run_bench(world.graph, world.source, &world.base, &cfg)?;
            if a.json {
                writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
            } else {
                write!(out, "{}", report.render())?;
            }
        }
        Command::PlayServer(a) => {
            let base = EnvConfig {
                game: a.game,
                seed: a.seed,
                frame_size: a.frame_size,
                cache_budget_bytes: a.cache_mb << 20,
                ..EnvConfig::default()
            };
            base.validate()?;
            let world = open_world(&resolve(data_dir, &a.graph), base)?;
            let server = PlayServer::bind(&a.bind, world)?;
            writeln!(out, "listening on {}", server.local_addr()?)?;
            out.flush()?;
            server.run()?;
        }
    }
    Ok(())
}
