//! Video catalogue, tile/layer encoding model and viewport geometry.
//!
//! A library holds `V` videos, each split into `G` GOPs. Every GOP is encoded
//! into `M` spatial tiles and two quality layers (base + one enhancement).
//! Users watch a `k`-tile rectangular viewport; the cache may instead hold a
//! *virtual* viewport: any `k` tiles, popular but not necessarily adjacent.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Quality layer of a tile. The artifact is fixed to base + one enhancement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layer {
    Base,
    Enhancement,
}

/// Address of one encoded tile: (video, gop, layer, tile).
///
/// `video`, `gop` and `tile` are zero-based indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TileKey {
    pub video: u32,
    pub gop: u32,
    pub layer: Layer,
    pub tile: u16,
}

/// Static description of the video library and its encoding.
///
/// Defaults follow the common simulation setup: 500 videos of 30 one-second
/// GOPs, a 4x3 tile grid, 4-tile viewports, 2/12 Mbps layer bitrates and
/// 30/10 dB per-tile distortion gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryConfig {
    pub num_videos: u32,
    pub num_gops: u32,
    pub num_tiles: u16,
    pub grid_cols: u16,
    pub grid_rows: u16,
    pub viewport_tiles: u16,
    pub base_bitrate_mbps: f64,
    pub enh_bitrate_mbps: f64,
    pub gop_duration_s: f64,
    pub base_gain_db: f64,
    pub enh_gain_db: f64,
}

impl Default for LibraryConfig {
    fn default() -> Self {
        Self {
            num_videos: 500,
            num_gops: 30,
            num_tiles: 12,
            grid_cols: 4,
            grid_rows: 3,
            viewport_tiles: 4,
            base_bitrate_mbps: 2.0,
            enh_bitrate_mbps: 12.0,
            gop_duration_s: 1.0,
            base_gain_db: 30.0,
            enh_gain_db: 10.0,
        }
    }
}

impl LibraryConfig {
    /// Checks the structural invariants of the configuration.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_videos < 1 {
            return Err(ConfigError::invalid("videos must be >= 1"));
        }
        if self.num_gops < 1 {
            return Err(ConfigError::invalid("gops must be >= 1"));
        }
        if self.grid_cols as u32 * self.grid_rows as u32 != self.num_tiles as u32 {
            return Err(ConfigError::invalid(
                "grid_cols * grid_rows must equal tiles",
            ));
        }
        if self.num_tiles > 64 {
            return Err(ConfigError::invalid("at most 64 tiles are supported"));
        }
        if self.viewport_tiles < 1 || self.viewport_tiles > self.num_tiles {
            return Err(ConfigError::invalid(
                "viewport_tiles must be in 1..=tiles",
            ));
        }
        for (name, v) in [
            ("base_bitrate_mbps", self.base_bitrate_mbps),
            ("enh_bitrate_mbps", self.enh_bitrate_mbps),
            ("gop_duration_s", self.gop_duration_s),
        ] {
            if !(v > 0.0) {
                return Err(ConfigError::invalid(format!("{name} must be > 0")));
            }
        }
        if !(self.base_gain_db >= 0.0 && self.enh_gain_db >= 0.0) {
            return Err(ConfigError::invalid("gains must be >= 0"));
        }
        self.viewport_shape()?;
        Ok(())
    }

    /// Checks that `key` addresses a tile that exists under this config.
    pub fn check_key(&self, key: TileKey) -> Result<(), ConfigError> {
        if key.video >= self.num_videos || key.gop >= self.num_gops || key.tile >= self.num_tiles {
            return Err(ConfigError::invalid(format!(
                "tile key out of range: video {} gop {} tile {}",
                key.video, key.gop, key.tile
            )));
        }
        Ok(())
    }

    /// Size of one encoded tile in Mbit.
    ///
    /// The per-layer bitrate is split uniformly over the `M` tiles of a GOP,
    /// so all tiles of a layer have identical size `bitrate * t_disp / M`.
    pub fn tile_size_mbit(&self, key: TileKey) -> Result<f64, ConfigError> {
        self.check_key(key)?;
        let rate = match key.layer {
            Layer::Base => self.base_bitrate_mbps,
            Layer::Enhancement => self.enh_bitrate_mbps,
        };
        Ok(rate * self.gop_duration_s / self.num_tiles as f64)
    }

    /// Distortion reduction obtained by delivering a tile of `layer`, in dB.
    pub fn distortion_gain_db(&self, layer: Layer) -> f64 {
        match layer {
            Layer::Base => self.base_gain_db,
            Layer::Enhancement => self.enh_gain_db,
        }
    }

    /// Viewport rectangle shape `(rows, cols)` with `rows * cols = k`.
    ///
    /// Picks the most square factorisation that fits on the grid, preferring
    /// the wider one on ties (viewports span more horizontally than
    /// vertically).
    fn viewport_shape(&self) -> Result<(u16, u16), ConfigError> {
        let k = self.viewport_tiles;
        let mut best: Option<(u16, u16)> = None;
        for rows in 1..=k {
            if k % rows != 0 {
                continue;
            }
            let cols = k / rows;
            if rows > self.grid_rows || cols > self.grid_cols {
                continue;
            }
            let better = match best {
                None => true,
                Some((br, bc)) => {
                    let d = rows.abs_diff(cols);
                    let bd = br.abs_diff(bc);
                    d < bd || (d == bd && cols > bc)
                }
            };
            if better {
                best = Some((rows, cols));
            }
        }
        best.ok_or_else(|| {
            ConfigError::invalid(format!(
                "viewport_tiles {k} is not expressible as a rectangle on a {}x{} grid",
                self.grid_rows, self.grid_cols
            ))
        })
    }

    /// Enumerates the fixed set of requestable viewports.
    ///
    /// Placements slide vertically without wraparound and horizontally with
    /// wraparound; ids are assigned row-major starting from 1 and are stable
    /// across calls. Placements with identical tile sets are emitted once.
    pub fn enumerate_viewports(&self) -> Result<Vec<Viewport>, ConfigError> {
        let (vp_rows, vp_cols) = self.viewport_shape()?;
        let col_offsets: u16 = if vp_cols == self.grid_cols {
            1
        } else {
            self.grid_cols
        };
        let row_offsets = self.grid_rows - vp_rows + 1;
        let mut out = Vec::with_capacity((row_offsets * col_offsets) as usize);
        for ro in 0..row_offsets {
            for co in 0..col_offsets {
                let mut tiles = Vec::with_capacity(self.viewport_tiles as usize);
                for r in ro..ro + vp_rows {
                    for c in co..co + vp_cols {
                        let col = c % self.grid_cols;
                        tiles.push(r * self.grid_cols + col);
                    }
                }
                tiles.sort_unstable();
                out.push(Viewport {
                    id: ViewportId(out.len() as u32 + 1),
                    tiles,
                });
            }
        }
        Ok(out)
    }
}

/// Identifier of a requestable viewport. Ids are 1-based, matching the usual
/// "viewport 1..8" numbering of the 4x3 grid.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct ViewportId(pub u32);

/// A requestable viewport: `k` tiles forming a contiguous rectangle on the
/// tile grid (horizontal wraparound allowed). Tiles are stored sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Viewport {
    pub id: ViewportId,
    pub tiles: Vec<u16>,
}

/// A virtual viewport: exactly `k` distinct tiles with no adjacency
/// constraint. This is the unit the cache stores in high quality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualViewport {
    tiles: Vec<u16>,
}

impl VirtualViewport {
    /// Builds a virtual viewport from `k` distinct tile indices.
    pub fn new(mut tiles: Vec<u16>, cfg: &LibraryConfig) -> Result<Self, ConfigError> {
        tiles.sort_unstable();
        if tiles.len() != cfg.viewport_tiles as usize {
            return Err(ConfigError::invalid(format!(
                "virtual viewport must contain exactly {} tiles",
                cfg.viewport_tiles
            )));
        }
        if tiles.windows(2).any(|w| w[0] == w[1]) {
            return Err(ConfigError::invalid("virtual viewport tiles must be distinct"));
        }
        if tiles.iter().any(|&t| t >= cfg.num_tiles) {
            return Err(ConfigError::invalid("virtual viewport tile out of range"));
        }
        Ok(Self { tiles })
    }

    /// The tile at position `j` of the virtual viewport.
    pub fn tile_at(&self, j: usize) -> u16 {
        self.tiles[j]
    }

    /// Replaces the tile at position `j`, keeping the stored order canonical
    /// for membership queries but remembering nothing about insertion order.
    pub(crate) fn replace_at(&mut self, j: usize, tile: u16) {
        self.tiles[j] = tile;
    }

    pub fn contains(&self, tile: u16) -> bool {
        self.tiles.contains(&tile)
    }

    pub fn tiles(&self) -> &[u16] {
        &self.tiles
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }
}

impl From<&Viewport> for VirtualViewport {
    fn from(vp: &Viewport) -> Self {
        Self {
            tiles: vp.tiles.clone(),
        }
    }
}

/// Number of tiles two viewports have in common.
pub fn viewport_overlap(a: &[u16], b: &[u16]) -> usize {
    a.iter().filter(|t| b.contains(t)).count()
}
