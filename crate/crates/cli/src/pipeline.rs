//! Shared machinery for the corrupt / recover / score cycle. Recovery
//! runs in the 8-bit gray domain the channel actually transmits; scoring
//! compares against the quantize-dequantize ground truth so the numbers
//! isolate concealment error from quantization error.

use latentpatch_core::inpaint::{
    inpaint_ns, inpaint_rows_nearest, inpaint_telea, MaskedImage, NavierStokesParams, TeleaParams,
};
use latentpatch_core::lowrank::{silrtc, ObservationSet, SiLRTCParams};
use latentpatch_core::metrics::masked_psnr;
use latentpatch_core::packet::{self, ChannelConfig, Reassembly};
use latentpatch_core::tensor::{QuantParams, QuantizedMosaic, TileLayout};
use ndarray::{Array2, Array3};

use crate::CliError;

/// Recovery method roster. `None` is the transmit-zeros baseline every
/// other method is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    None,
    NearestRows,
    Telea,
    NavierStokes,
    Silrtc50,
    Silrtc250,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::None,
        Method::NearestRows,
        Method::Telea,
        Method::NavierStokes,
        Method::Silrtc50,
        Method::Silrtc250,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::NearestRows => "nearest_rows",
            Method::Telea => "telea",
            Method::NavierStokes => "navier_stokes",
            Method::Silrtc50 => "silrtc_50",
            Method::Silrtc250 => "silrtc_250",
        }
    }

    pub fn parse(raw: &str) -> Result<Method, CliError> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == raw)
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown method {raw:?}; expected one of {}",
                    Method::ALL.map(Method::name).join(", ")
                ))
            })
    }
}

/// Pushes a quantized mosaic through the synthetic lossy channel.
pub fn corrupt(
    quantized: &QuantizedMosaic,
    p: f64,
    seed: u64,
) -> Result<Reassembly, CliError> {
    let packets = packet::packetize(&quantized.bytes, quantized.params, 0)?;
    let survivors = packet::drop(&packets, ChannelConfig::new(p, seed)?);
    let (height, width) = quantized.bytes.dim();
    Ok(packet::reassemble(
        &survivors,
        packets.len() as u16,
        height,
        width,
    )?)
}

/// Gray level of real-world value 0: what the baseline writes into holes.
fn zero_gray(params: QuantParams) -> f64 {
    let lo = params.lo as f64;
    let hi = params.hi as f64;
    if lo == hi {
        0.0
    } else {
        (0.0 - lo) * 255.0 / (hi - lo)
    }
}

/// Fills the masked pixels of a received byte mosaic with the chosen
/// method, in gray levels. Delivered pixels come back bit-identical.
pub fn recover_gray(
    bytes: &Array2<u8>,
    mask: &Array2<bool>,
    layout: TileLayout,
    params: QuantParams,
    method: Method,
) -> Result<Array2<f64>, CliError> {
    let gray = bytes.mapv(|b| b as f64);
    match method {
        Method::None => {
            let fill = zero_gray(params);
            let mut out = gray;
            out.zip_mut_with(mask, |v, &missing| {
                if missing {
                    *v = fill;
                }
            });
            Ok(out)
        }
        Method::NearestRows => {
            let image = MaskedImage::new(gray, mask.clone())?;
            Ok(inpaint_rows_nearest(&image)?)
        }
        Method::Telea => {
            let image = MaskedImage::new(gray, mask.clone())?;
            Ok(inpaint_telea(&image, TeleaParams::default())?)
        }
        Method::NavierStokes => {
            let image = MaskedImage::new(gray, mask.clone())?;
            Ok(inpaint_ns(&image, NavierStokesParams::default())?)
        }
        Method::Silrtc50 => complete_tensor(gray, mask, layout, SiLRTCParams::preset_50()),
        Method::Silrtc250 => complete_tensor(gray, mask, layout, SiLRTCParams::preset_250()),
    }
}

/// Low-rank completion works on the 3-way channel stack, not the flat
/// mosaic: the tensor is rebuilt from the tile layout, completed, and
/// written back. Padding slots (no channel behind them) pass through.
fn complete_tensor(
    gray: Array2<f64>,
    mask: &Array2<bool>,
    layout: TileLayout,
    params: SiLRTCParams,
) -> Result<Array2<f64>, CliError> {
    let (channels, ch_h, ch_w) = (layout.channels, layout.channel_height, layout.channel_width);
    let mut stack = Array3::<f64>::zeros((channels, ch_h, ch_w));
    let mut observed = Array3::<bool>::from_elem((channels, ch_h, ch_w), false);
    for ch in 0..channels {
        let (r0, c0) = layout.tile_origin(ch);
        for r in 0..ch_h {
            for c in 0..ch_w {
                stack[[ch, r, c]] = gray[[r0 + r, c0 + c]];
                observed[[ch, r, c]] = !mask[[r0 + r, c0 + c]];
            }
        }
    }
    let (completed, _log) = silrtc(&stack, &ObservationSet::new(observed), &params)?;
    let mut out = gray;
    for ch in 0..channels {
        let (r0, c0) = layout.tile_origin(ch);
        for r in 0..ch_h {
            for c in 0..ch_w {
                out[[r0 + r, c0 + c]] = completed[[ch, r, c]];
            }
        }
    }
    Ok(out)
}

/// True where a mosaic pixel backs a real channel; padding slots are
/// excluded from every score.
pub fn valid_pixels(layout: TileLayout) -> Array2<bool> {
    let mut valid = Array2::from_elem((layout.grid_rows(), layout.grid_cols()), false);
    for ch in 0..layout.channels {
        let (r0, c0) = layout.tile_origin(ch);
        for r in 0..layout.channel_height {
            for c in 0..layout.channel_width {
                valid[[r0 + r, c0 + c]] = true;
            }
        }
    }
    valid
}

/// Masked and full-frame PSNR in gray levels (peak 255), both restricted
/// to real channel pixels. A lossless frame has no masked region to score
/// and reports the cap.
pub fn score(
    truth_gray: &Array2<f64>,
    recovered_gray: &Array2<f64>,
    mask: &Array2<bool>,
    valid: &Array2<bool>,
) -> Result<(f64, f64), CliError> {
    let mut masked_and_valid = mask.clone();
    masked_and_valid.zip_mut_with(valid, |m, &v| *m = *m && v);
    let masked_db = if masked_and_valid.iter().any(|&m| m) {
        masked_psnr(truth_gray, recovered_gray, &masked_and_valid, 255.0)?
    } else {
        latentpatch_core::metrics::PSNR_CAP_DB
    };
    let full_db = masked_psnr(truth_gray, recovered_gray, valid, 255.0)?;
    Ok((masked_db, full_db))
}
