//! Feature tensors, channel tiling, and 8-bit mosaic quantization.
//!
//! A [`FeatureTensor`] is a stack of equally sized activation channels. For
//! transport the channels are tiled row-major into the smallest square grid of
//! tiles that holds them all ([`tile`]), producing a single [`Mosaic`] whose
//! trailing tile slots stay zero. The mosaic is quantized to bytes with one
//! global `[lo, hi]` range per tensor ([`quantize`]); rounding is
//! half-away-from-zero so independent implementations agree byte for byte.

use ndarray::{s, Array2, Array3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("tensor dimensions must all be nonzero, got {channels}x{height}x{width}")]
    EmptyTensor {
        channels: usize,
        height: usize,
        width: usize,
    },
    #[error("non-finite value at (channel {channel}, row {row}, col {col})")]
    NonFinite {
        channel: usize,
        row: usize,
        col: usize,
    },
    #[error("grid is {grid_rows}x{grid_cols} but the tile layout implies {want_rows}x{want_cols}")]
    LayoutMismatch {
        grid_rows: usize,
        grid_cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("layout provides {slots} tile slots for {channels} channels")]
    TooFewSlots { slots: usize, channels: usize },
    #[error("grid value at ({row}, {col}) is not finite")]
    NonFiniteGrid { row: usize, col: usize },
}

/// A stack of equally sized activation channels, the unit shipped per frame.
/// Stored as `f32` to match the on-disk format; every value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    data: Array3<f32>,
}

impl FeatureTensor {
    /// Wraps a `(channel, row, col)` array, rejecting empty dimensions and
    /// non-finite values.
    pub fn new(data: Array3<f32>) -> Result<Self, TensorError> {
        let (channels, height, width) = data.dim();
        if channels == 0 || height == 0 || width == 0 {
            return Err(TensorError::EmptyTensor {
                channels,
                height,
                width,
            });
        }
        for ((c, r, col), &v) in data.indexed_iter() {
            if !v.is_finite() {
                return Err(TensorError::NonFinite {
                    channel: c,
                    row: r,
                    col,
                });
            }
        }
        Ok(FeatureTensor { data })
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self, TensorError> {
        Self::new(Array3::from_shape_fn((channels, height, width), |(c, r, w)| {
            f(c, r, w)
        }))
    }

    pub fn channels(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }

    pub fn data(&self) -> &Array3<f32> {
        &self.data
    }
}

/// Placement of channels inside a mosaic: `tile_rows x tile_cols` slots of
/// `channel_height x channel_width` pixels, filled row-major with `channels`
/// real channels; any remaining slots hold zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileLayout {
    pub tile_rows: usize,
    pub tile_cols: usize,
    pub channel_height: usize,
    pub channel_width: usize,
    pub channels: usize,
}

impl TileLayout {
    /// Smallest square layout holding `channels` tiles.
    pub fn for_channels(channels: usize, channel_height: usize, channel_width: usize) -> Self {
        let side = (channels as f64).sqrt().ceil() as usize;
        let side = side.max(1);
        // Float sqrt can land one short for perfect squares near 2^52; walk
        // up until the square really fits.
        let mut side = side;
        while side * side < channels {
            side += 1;
        }
        TileLayout {
            tile_rows: side,
            tile_cols: side,
            channel_height,
            channel_width,
            channels,
        }
    }

    pub fn grid_rows(&self) -> usize {
        self.tile_rows * self.channel_height
    }

    pub fn grid_cols(&self) -> usize {
        self.tile_cols * self.channel_width
    }

    pub fn slots(&self) -> usize {
        self.tile_rows * self.tile_cols
    }

    /// Top-left grid corner of tile slot `k`.
    pub fn tile_origin(&self, k: usize) -> (usize, usize) {
        (
            (k / self.tile_cols) * self.channel_height,
            (k % self.tile_cols) * self.channel_width,
        )
    }
}

/// One real-valued grid of tiled channels plus the layout that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Mosaic {
    grid: Array2<f64>,
    layout: TileLayout,
}

impl Mosaic {
    pub fn new(grid: Array2<f64>, layout: TileLayout) -> Result<Self, TensorError> {
        let (rows, cols) = grid.dim();
        if rows != layout.grid_rows() || cols != layout.grid_cols() {
            return Err(TensorError::LayoutMismatch {
                grid_rows: rows,
                grid_cols: cols,
                want_rows: layout.grid_rows(),
                want_cols: layout.grid_cols(),
            });
        }
        if layout.slots() < layout.channels {
            return Err(TensorError::TooFewSlots {
                slots: layout.slots(),
                channels: layout.channels,
            });
        }
        if let Some(((row, col), _)) = grid.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(TensorError::NonFiniteGrid { row, col });
        }
        Ok(Mosaic { grid, layout })
    }

    pub fn grid(&self) -> &Array2<f64> {
        &self.grid
    }

    pub fn layout(&self) -> TileLayout {
        self.layout
    }

    pub fn into_grid(self) -> Array2<f64> {
        self.grid
    }
}

/// Global quantization bounds, stored as `f32` exactly as they travel in
/// packet headers. `lo` is rounded down and `hi` up when built from `f64`
/// data, so the interval always encloses every grid value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantParams {
    pub lo: f32,
    pub hi: f32,
}

impl QuantParams {
    /// Number of quantization levels (8-bit).
    pub const LEVELS: u32 = 256;
}

/// Byte mosaic together with everything needed to invert it.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedMosaic {
    pub bytes: Array2<u8>,
    pub params: QuantParams,
    pub layout: TileLayout,
}

/// Tiles the channels row-major into the smallest square mosaic; slots past
/// the last channel stay zero.
pub fn tile(tensor: &FeatureTensor) -> Mosaic {
    let layout = TileLayout::for_channels(tensor.channels(), tensor.height(), tensor.width());
    let mut grid = Array2::<f64>::zeros((layout.grid_rows(), layout.grid_cols()));
    for c in 0..tensor.channels() {
        let (r0, c0) = layout.tile_origin(c);
        let channel = tensor.data().slice(s![c, .., ..]);
        let mut slot = grid.slice_mut(s![
            r0..r0 + layout.channel_height,
            c0..c0 + layout.channel_width
        ]);
        slot.zip_mut_with(&channel, |dst, &src| *dst = src as f64);
    }
    Mosaic { grid, layout }
}

/// Extracts the original channels back out of a mosaic. Exact inverse of
/// [`tile`] for grids whose values round-trip through `f32` (tiled tensors
/// always do).
pub fn untile(mosaic: &Mosaic) -> Result<FeatureTensor, TensorError> {
    let layout = mosaic.layout();
    let mut data = Array3::<f32>::zeros((
        layout.channels,
        layout.channel_height,
        layout.channel_width,
    ));
    for c in 0..layout.channels {
        let (r0, c0) = layout.tile_origin(c);
        let slot = mosaic.grid().slice(s![
            r0..r0 + layout.channel_height,
            c0..c0 + layout.channel_width
        ]);
        let mut channel = data.slice_mut(s![c, .., ..]);
        channel.zip_mut_with(&slot, |dst, &src| *dst = src as f32);
    }
    FeatureTensor::new(data)
}

/// Largest f32 that is ≤ x.
fn f32_at_or_below(x: f64) -> f32 {
    let y = x as f32;
    if (y as f64) <= x {
        y
    } else {
        next_f32_down(y)
    }
}

/// Smallest f32 that is ≥ x.
fn f32_at_or_above(x: f64) -> f32 {
    let y = x as f32;
    if (y as f64) >= x {
        y
    } else {
        next_f32_up(y)
    }
}

fn next_f32_down(x: f32) -> f32 {
    if x == 0.0 {
        return -f32::from_bits(1);
    }
    let bits = x.to_bits();
    let next = if bits >> 31 == 0 { bits - 1 } else { bits + 1 };
    f32::from_bits(next)
}

fn next_f32_up(x: f32) -> f32 {
    if x == 0.0 {
        return f32::from_bits(1);
    }
    let bits = x.to_bits();
    let next = if bits >> 31 == 0 { bits + 1 } else { bits - 1 };
    f32::from_bits(next)
}

/// Quantizes a mosaic to bytes over its global value range.
///
/// `q = round(255·(x − lo)/(hi − lo))`, half away from zero, clamped to
/// [0, 255]. A constant grid (degenerate `lo == hi`) maps everything to 0.
/// The round-trip error through [`dequantize`] is at most
/// `(hi − lo)/510 + 1e−9` at every pixel.
pub fn quantize(mosaic: &Mosaic) -> QuantizedMosaic {
    let grid = mosaic.grid();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in grid.iter() {
        min = min.min(v);
        max = max.max(v);
    }
    let params = QuantParams {
        lo: f32_at_or_below(min),
        hi: f32_at_or_above(max),
    };
    let lo = params.lo as f64;
    let hi = params.hi as f64;
    let bytes = if lo == hi {
        Array2::zeros(grid.dim())
    } else {
        let scale = 255.0 / (hi - lo);
        grid.mapv(|x| ((x - lo) * scale).round().clamp(0.0, 255.0) as u8)
    };
    QuantizedMosaic {
        bytes,
        params,
        layout: mosaic.layout(),
    }
}

/// Inverts [`quantize`]: `x = lo + q·(hi − lo)/255`. The degenerate range
/// comes back as `lo` everywhere.
pub fn dequantize(quantized: &QuantizedMosaic) -> Mosaic {
    Mosaic {
        grid: dequantize_bytes(&quantized.bytes, quantized.params),
        layout: quantized.layout,
    }
}

/// Byte grid to real values under the given bounds.
pub fn dequantize_bytes(bytes: &Array2<u8>, params: QuantParams) -> Array2<f64> {
    let lo = params.lo as f64;
    let step = (params.hi as f64 - lo) / 255.0;
    bytes.mapv(|q| lo + q as f64 * step)
}

/// Affine map from real values to the continuous 0..255 gray scale of the
/// quantized domain (no rounding). Degenerate bounds map everything to 0,
/// mirroring [`quantize`].
pub fn gray_levels(grid: &Array2<f64>, params: QuantParams) -> Array2<f64> {
    let lo = params.lo as f64;
    let hi = params.hi as f64;
    if lo == hi {
        return Array2::zeros(grid.dim());
    }
    let scale = 255.0 / (hi - lo);
    grid.mapv(|x| (x - lo) * scale)
}

/// Inverse of the gray-scale map for a single value. Uses the same
/// `lo + gray·step` form as [`dequantize_bytes`], so an untouched byte
/// maps back to the identical f64.
pub fn gray_to_value(gray: f64, params: QuantParams) -> f64 {
    let lo = params.lo as f64;
    lo + gray * ((params.hi as f64 - lo) / 255.0)
}
