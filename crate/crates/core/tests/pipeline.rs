//! Cross-module checks: a feature tensor pushed through tiling,
//! quantization, the lossy packet channel, and concealment, compared
//! against what each seam promises on its own.

use latentpatch_core::inpaint::{inpaint_telea, MaskedImage, TeleaParams};
use latentpatch_core::metrics::masked_psnr;
use latentpatch_core::packet::{self, ChannelConfig, SLAB_ROWS};
use latentpatch_core::rng::SplitMix64;
use latentpatch_core::tensor::{
    dequantize, gray_to_value, quantize, tile, untile, FeatureTensor, Mosaic, QuantParams,
};
use ndarray::Array2;

/// Sixteen 32x32 channels of smooth, channel-correlated, nonnegative
/// content (a rectified feature map's shape: activations sit well above
/// zero). Tiles to a 128x128 mosaic with no padding slots.
fn smooth_tensor(seed: u64) -> FeatureTensor {
    let mut rng = SplitMix64::new(seed);
    let amps: Vec<f32> = (0..16).map(|_| rng.next_in(0.5, 2.0) as f32).collect();
    let phases: Vec<f32> = (0..16)
        .map(|_| rng.next_in(0.0, std::f64::consts::TAU) as f32)
        .collect();
    FeatureTensor::from_fn(16, 32, 32, |ch, r, c| {
        let y = r as f32 / 32.0;
        let x = c as f32 / 32.0;
        let base = (std::f32::consts::TAU * (x + y) + phases[ch]).sin();
        2.5 + amps[ch] * base + 0.25 * (std::f32::consts::TAU * 2.0 * x).cos()
    })
    .unwrap()
}

fn quant_bound(params: QuantParams) -> f64 {
    (params.hi as f64 - params.lo as f64) / 510.0 + 1e-9
}

/// Concealment in the pipeline's own working domain: gray levels in, gray
/// levels out, mapped back to values afterwards.
fn conceal_gray(bytes: &Array2<u8>, mask: &Array2<bool>, params: QuantParams) -> Array2<f64> {
    let gray = bytes.mapv(|b| b as f64);
    let image = MaskedImage::new(gray, mask.clone()).unwrap();
    let filled = inpaint_telea(&image, TeleaParams::default()).unwrap();
    filled.mapv(|g| gray_to_value(g, params))
}

#[test]
fn lossless_channel_returns_the_tensor_to_quantization_accuracy() {
    let tensor = smooth_tensor(11);
    let mosaic = tile(&tensor);
    let quantized = quantize(&mosaic);
    let packets = packet::packetize(&quantized.bytes, quantized.params, 7).unwrap();

    let survivors = packet::drop(&packets, ChannelConfig::new(0.0, 99).unwrap());
    assert_eq!(survivors.len(), packets.len());

    let (height, width) = quantized.bytes.dim();
    let rebuilt =
        packet::reassemble(&survivors, packets.len() as u16, height, width).unwrap();
    assert_eq!(&rebuilt.bytes, &quantized.bytes);
    assert_eq!(rebuilt.params, quantized.params);
    assert_eq!(rebuilt.mask.missing_pixels(), 0);
    assert!(rebuilt.duplicate_seqs.is_empty());

    let grid = latentpatch_core::tensor::dequantize_bytes(&rebuilt.bytes, rebuilt.params);
    let recovered = untile(&Mosaic::new(grid, mosaic.layout()).unwrap()).unwrap();
    let bound = quant_bound(quantized.params);
    for (a, b) in tensor.data().iter().zip(recovered.data().iter()) {
        assert!(
            (a - b).abs() as f64 <= bound,
            "round trip moved {a} to {b}, past the half-step bound {bound}"
        );
    }
}

#[test]
fn concealed_slabs_beat_zeroed_slabs_on_smooth_content() {
    let tensor = smooth_tensor(29);
    let mosaic = tile(&tensor);
    let quantized = quantize(&mosaic);
    // Ground truth for scoring is the lossless channel's output, so the
    // comparison isolates what the lossy channel destroyed.
    let truth = dequantize(&quantized).into_grid();
    let peak = (quantized.params.hi - quantized.params.lo).abs() as f64;

    let packets = packet::packetize(&quantized.bytes, quantized.params, 1).unwrap();
    let survivors = packet::drop(&packets, ChannelConfig::new(0.25, 4242).unwrap());
    assert!(survivors.len() < packets.len(), "seed 4242 must drop something");

    let (height, width) = quantized.bytes.dim();
    let rebuilt =
        packet::reassemble(&survivors, packets.len() as u16, height, width).unwrap();
    assert!(rebuilt.mask.is_band_aligned());
    assert_eq!(rebuilt.mask.missing_pixels() % (SLAB_ROWS * width), 0);

    let mask = rebuilt.mask.grid().clone();
    let concealed = conceal_gray(&rebuilt.bytes, &mask, rebuilt.params);
    let zeroed = {
        let mut grid = truth.clone();
        grid.zip_mut_with(&mask, |v, &m| {
            if m {
                *v = 0.0;
            }
        });
        grid
    };

    let concealed_db = masked_psnr(&truth, &concealed, &mask, peak).unwrap();
    let zeroed_db = masked_psnr(&truth, &zeroed, &mask, peak).unwrap();
    assert!(
        concealed_db > zeroed_db + 3.0,
        "concealment {concealed_db:.2} dB, zero fill {zeroed_db:.2} dB"
    );

    // Delivered pixels pass through concealment untouched.
    for ((r, c), &m) in mask.indexed_iter() {
        if !m {
            let got = concealed[[r, c]];
            let want = truth[[r, c]];
            assert_eq!(got, want, "delivered pixel ({r},{c}) changed");
        }
    }
}

#[test]
fn loopback_socket_agrees_with_the_in_memory_channel() {
    let tensor = smooth_tensor(5);
    let quantized = quantize(&tile(&tensor));
    let packets = packet::packetize(&quantized.bytes, quantized.params, 3).unwrap();
    let config = ChannelConfig::new(0.3, 31337).unwrap();

    let in_memory = packet::drop(&packets, config);
    let over_socket = packet::transport_loopback(&packets, config).unwrap();

    let mem_seqs: Vec<u16> = in_memory.iter().map(|p| p.seq).collect();
    let mut socket_seqs: Vec<u16> = over_socket.iter().map(|p| p.seq).collect();
    socket_seqs.sort_unstable();
    assert_eq!(socket_seqs, mem_seqs);

    let (height, width) = quantized.bytes.dim();
    let a = packet::reassemble(&in_memory, packets.len() as u16, height, width).unwrap();
    let b = packet::reassemble(&over_socket, packets.len() as u16, height, width).unwrap();
    assert_eq!(a.bytes, b.bytes);
    assert_eq!(a.mask.grid(), b.mask.grid());
    assert_eq!(a.params, b.params);
}

#[test]
fn narrow_holes_conceal_more_accurately_than_wide_ones() {
    let tensor = smooth_tensor(17);
    let quantized = quantize(&tile(&tensor));
    let truth = dequantize(&quantized).into_grid();
    let peak = (quantized.params.hi - quantized.params.lo).abs() as f64;
    let (height, width) = quantized.bytes.dim();

    let banded = |lost: &[usize]| {
        let mut mask = Array2::from_elem((height, width), false);
        for &seq in lost {
            for r in seq * SLAB_ROWS..(seq + 1) * SLAB_ROWS {
                for c in 0..width {
                    mask[[r, c]] = true;
                }
            }
        }
        let concealed = conceal_gray(&quantized.bytes, &mask, quantized.params);
        masked_psnr(&truth, &concealed, &mask, peak).unwrap()
    };

    let narrow_db = banded(&[6]);
    let wide_db = banded(&[5, 6, 7]);
    assert!(
        narrow_db > wide_db,
        "8-row hole {narrow_db:.2} dB should beat 24-row hole {wide_db:.2} dB"
    );
}
