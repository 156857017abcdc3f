//! Slab packetization, seeded loss simulation, and mosaic reassembly.
//!
//! A quantized mosaic travels as one packet per 8 rows, so each lost packet
//! opens an aligned 8-row gap. Every packet carries the quantization bounds;
//! a single survivor is enough to dequantize the frame. The wire encoding is
//! big-endian with a 24-byte header.

use std::io;
use std::net::UdpSocket;
use std::time::Duration;

use ndarray::{s, Array2};
use thiserror::Error;

use crate::rng::SplitMix64;
use crate::tensor::QuantParams;

/// Rows carried by one packet.
pub const SLAB_ROWS: usize = 8;

/// Fixed wire header size: magic(2) + version(1) + frame_id(4) + seq(2) +
/// total(2) + row_offset(2) + rows(1) + width(2) + lo(4) + hi(4).
pub const HEADER_LEN: usize = 24;

const WIRE_MAGIC: u16 = 0x4C50;
const WIRE_VERSION: u8 = 1;

/// Largest UDP payload deliverable over loopback without fragmentation
/// games (65535 minus IP and UDP headers).
const MAX_DATAGRAM: usize = 65507;

#[derive(Debug, Error)]
pub enum PacketError {
    #[error("mosaic height {0} is not a multiple of {SLAB_ROWS}")]
    UnalignedHeight(usize),
    #[error("mosaic needs {0} packets, more than a u16 sequence number can address")]
    TooManyPackets(usize),
    #[error("mosaic width {0} does not fit the u16 width field")]
    WidthTooLarge(usize),
    #[error("loss probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("packet header disagrees with the stream: {0}")]
    ConflictingHeader(String),
    #[error("wire frame too short: {got} bytes, header alone needs {HEADER_LEN}")]
    ShortFrame { got: usize },
    #[error("wire frame magic {found:#06x}, expected {WIRE_MAGIC:#06x}")]
    BadMagic { found: u16 },
    #[error("unsupported wire version {0}")]
    BadVersion(u8),
    #[error("wire frame is {got} bytes but the header implies {want}")]
    LengthMismatch { want: usize, got: usize },
    #[error("packet would not fit one datagram ({0} bytes)")]
    OversizedDatagram(usize),
    #[error("transport i/o failure: {0}")]
    Io(#[from] io::Error),
}

/// One 8-row slab of a quantized mosaic.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub frame_id: u32,
    pub seq: u16,
    pub total: u16,
    pub row_offset: u16,
    pub rows: u8,
    pub width: u16,
    pub params: QuantParams,
    pub payload: Vec<u8>,
}

/// Loss simulation knobs: per-packet drop probability and the generator
/// seed that makes a run reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    loss_probability: f64,
    rng_seed: u64,
}

impl ChannelConfig {
    pub fn new(loss_probability: f64, rng_seed: u64) -> Result<Self, PacketError> {
        if !(0.0..=1.0).contains(&loss_probability) {
            return Err(PacketError::InvalidProbability(loss_probability));
        }
        Ok(ChannelConfig {
            loss_probability,
            rng_seed,
        })
    }

    pub fn loss_probability(&self) -> f64 {
        self.loss_probability
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }
}

/// Which mosaic pixels were lost (true = missing). Produced by reassembly,
/// where it is always a union of 8-row bands aligned to multiples of 8.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMask {
    grid: Array2<bool>,
}

impl LossMask {
    fn from_missing_bands(missing: &[bool], height: usize, width: usize) -> Self {
        let mut grid = Array2::from_elem((height, width), false);
        for (band, &gone) in missing.iter().enumerate() {
            if gone {
                grid.slice_mut(s![band * SLAB_ROWS..(band + 1) * SLAB_ROWS, ..])
                    .fill(true);
            }
        }
        LossMask { grid }
    }

    pub fn grid(&self) -> &Array2<bool> {
        &self.grid
    }

    pub fn into_grid(self) -> Array2<bool> {
        self.grid
    }

    pub fn missing_pixels(&self) -> usize {
        self.grid.iter().filter(|&&m| m).count()
    }

    /// True when every missing region is a full-width band of 8 rows
    /// starting at a multiple of 8.
    pub fn is_band_aligned(&self) -> bool {
        let (height, width) = self.grid.dim();
        if height % SLAB_ROWS != 0 {
            return false;
        }
        (0..height / SLAB_ROWS).all(|band| {
            let first = self.grid[[band * SLAB_ROWS, 0]];
            self.grid
                .slice(s![band * SLAB_ROWS..(band + 1) * SLAB_ROWS, ..])
                .iter()
                .all(|&m| m == first)
                && width > 0
        })
    }
}

/// Reassembled frame: byte grid with zeros where data never arrived, the
/// loss mask, the carried quantization bounds, and any duplicate sequence
/// numbers that were discarded (first arrival wins).
#[derive(Debug, Clone, PartialEq)]
pub struct Reassembly {
    pub bytes: Array2<u8>,
    pub mask: LossMask,
    pub params: QuantParams,
    pub duplicate_seqs: Vec<u16>,
}

/// Splits a byte mosaic into 8-row packets in ascending sequence order.
pub fn packetize(
    bytes: &Array2<u8>,
    params: QuantParams,
    frame_id: u32,
) -> Result<Vec<Packet>, PacketError> {
    let (height, width) = bytes.dim();
    if height % SLAB_ROWS != 0 {
        return Err(PacketError::UnalignedHeight(height));
    }
    let total = height / SLAB_ROWS;
    if total > u16::MAX as usize {
        return Err(PacketError::TooManyPackets(total));
    }
    if width > u16::MAX as usize {
        return Err(PacketError::WidthTooLarge(width));
    }
    let packets = (0..total)
        .map(|seq| {
            let r0 = seq * SLAB_ROWS;
            let payload = bytes
                .slice(s![r0..r0 + SLAB_ROWS, ..])
                .iter()
                .copied()
                .collect();
            Packet {
                frame_id,
                seq: seq as u16,
                total: total as u16,
                row_offset: r0 as u16,
                rows: SLAB_ROWS as u8,
                width: width as u16,
                params,
                payload,
            }
        })
        .collect();
    Ok(packets)
}

/// Removes each packet independently with probability `p`. One generator
/// draw is consumed per packet in ascending `seq` order, so the drop
/// pattern depends only on (seed, p, packet count), never on frame
/// contents or id.
pub fn drop(packets: &[Packet], config: ChannelConfig) -> Vec<Packet> {
    let mut order: Vec<usize> = (0..packets.len()).collect();
    order.sort_by_key(|&i| packets[i].seq);
    let mut rng = SplitMix64::new(config.rng_seed);
    let mut doomed = vec![false; packets.len()];
    for &i in &order {
        doomed[i] = rng.next_f64() < config.loss_probability;
    }
    packets
        .iter()
        .zip(doomed)
        .filter(|(_, gone)| !gone)
        .map(|(p, _)| p.clone())
        .collect()
}

/// Rebuilds a byte mosaic from whatever packets arrived, in any order.
/// Missing slabs come back as zero bytes with the mask set. With zero
/// survivors the bounds default to `QuantParams { lo: 0, hi: 0 }`.
pub fn reassemble(
    packets: &[Packet],
    expected_total: u16,
    height: usize,
    width: usize,
) -> Result<Reassembly, PacketError> {
    if height % SLAB_ROWS != 0 {
        return Err(PacketError::UnalignedHeight(height));
    }
    if expected_total as usize * SLAB_ROWS != height {
        return Err(PacketError::ConflictingHeader(format!(
            "{expected_total} packets cover {} rows, mosaic has {height}",
            expected_total as usize * SLAB_ROWS
        )));
    }
    let mut bytes = Array2::<u8>::zeros((height, width));
    let mut seen = vec![false; expected_total as usize];
    let mut duplicate_seqs = Vec::new();
    let mut params: Option<QuantParams> = None;
    let mut frame_id: Option<u32> = None;

    for p in packets {
        validate_header(p, expected_total, width)?;
        match frame_id {
            None => frame_id = Some(p.frame_id),
            Some(id) if id != p.frame_id => {
                return Err(PacketError::ConflictingHeader(format!(
                    "frame_id {} arrived in a stream for frame {}",
                    p.frame_id, id
                )))
            }
            Some(_) => {}
        }
        match params {
            None => params = Some(p.params),
            Some(q) if q != p.params => {
                return Err(PacketError::ConflictingHeader(
                    "quantization bounds differ between packets".into(),
                ))
            }
            Some(_) => {}
        }
        let slot = p.seq as usize;
        if seen[slot] {
            duplicate_seqs.push(p.seq);
            continue;
        }
        seen[slot] = true;
        let r0 = p.row_offset as usize;
        let mut dst = bytes.slice_mut(s![r0..r0 + SLAB_ROWS, ..]);
        for (d, &srcb) in dst.iter_mut().zip(p.payload.iter()) {
            *d = srcb;
        }
    }

    let missing: Vec<bool> = seen.iter().map(|&s| !s).collect();
    Ok(Reassembly {
        bytes,
        mask: LossMask::from_missing_bands(&missing, height, width),
        params: params.unwrap_or(QuantParams { lo: 0.0, hi: 0.0 }),
        duplicate_seqs,
    })
}

fn validate_header(p: &Packet, expected_total: u16, width: usize) -> Result<(), PacketError> {
    if p.total != expected_total {
        return Err(PacketError::ConflictingHeader(format!(
            "total {} differs from expected {expected_total}",
            p.total
        )));
    }
    if p.seq >= p.total {
        return Err(PacketError::ConflictingHeader(format!(
            "seq {} out of range for total {}",
            p.seq, p.total
        )));
    }
    if p.row_offset as usize != p.seq as usize * SLAB_ROWS {
        return Err(PacketError::ConflictingHeader(format!(
            "row_offset {} does not match seq {}",
            p.row_offset, p.seq
        )));
    }
    if p.rows as usize != SLAB_ROWS {
        return Err(PacketError::ConflictingHeader(format!(
            "rows {} unsupported, slabs are {SLAB_ROWS} rows",
            p.rows
        )));
    }
    if p.width as usize != width {
        return Err(PacketError::ConflictingHeader(format!(
            "width {} differs from mosaic width {width}",
            p.width
        )));
    }
    if p.payload.len() != SLAB_ROWS * width {
        return Err(PacketError::ConflictingHeader(format!(
            "payload carries {} bytes for a {SLAB_ROWS}x{width} slab",
            p.payload.len()
        )));
    }
    Ok(())
}

/// Serializes one packet into its big-endian wire frame.
pub fn encode_packet(p: &Packet) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + p.payload.len());
    out.extend_from_slice(&WIRE_MAGIC.to_be_bytes());
    out.push(WIRE_VERSION);
    out.extend_from_slice(&p.frame_id.to_be_bytes());
    out.extend_from_slice(&p.seq.to_be_bytes());
    out.extend_from_slice(&p.total.to_be_bytes());
    out.extend_from_slice(&p.row_offset.to_be_bytes());
    out.push(p.rows);
    out.extend_from_slice(&p.width.to_be_bytes());
    out.extend_from_slice(&p.params.lo.to_be_bytes());
    out.extend_from_slice(&p.params.hi.to_be_bytes());
    out.extend_from_slice(&p.payload);
    out
}

/// Parses a wire frame back into a packet, validating magic, version, and
/// that the frame length matches the header's geometry.
pub fn decode_packet(frame: &[u8]) -> Result<Packet, PacketError> {
    if frame.len() < HEADER_LEN {
        return Err(PacketError::ShortFrame { got: frame.len() });
    }
    let magic = u16::from_be_bytes([frame[0], frame[1]]);
    if magic != WIRE_MAGIC {
        return Err(PacketError::BadMagic { found: magic });
    }
    if frame[2] != WIRE_VERSION {
        return Err(PacketError::BadVersion(frame[2]));
    }
    let frame_id = u32::from_be_bytes([frame[3], frame[4], frame[5], frame[6]]);
    let seq = u16::from_be_bytes([frame[7], frame[8]]);
    let total = u16::from_be_bytes([frame[9], frame[10]]);
    let row_offset = u16::from_be_bytes([frame[11], frame[12]]);
    let rows = frame[13];
    let width = u16::from_be_bytes([frame[14], frame[15]]);
    let lo = f32::from_be_bytes([frame[16], frame[17], frame[18], frame[19]]);
    let hi = f32::from_be_bytes([frame[20], frame[21], frame[22], frame[23]]);
    let want = HEADER_LEN + rows as usize * width as usize;
    if frame.len() != want {
        return Err(PacketError::LengthMismatch {
            want,
            got: frame.len(),
        });
    }
    Ok(Packet {
        frame_id,
        seq,
        total,
        row_offset,
        rows,
        width,
        params: QuantParams { lo, hi },
        payload: frame[HEADER_LEN..].to_vec(),
    })
}

/// Pushes the packets through a real loopback datagram socket with the
/// same synthetic drops as [`drop`], returning whatever the receiver
/// collected. An empty datagram marks end of stream. Socket failures come
/// back as [`PacketError::Io`]; simulated loss is not an error.
pub fn transport_loopback(
    packets: &[Packet],
    config: ChannelConfig,
) -> Result<Vec<Packet>, PacketError> {
    for p in packets {
        let len = HEADER_LEN + p.payload.len();
        if len > MAX_DATAGRAM {
            return Err(PacketError::OversizedDatagram(len));
        }
    }
    let receiver = UdpSocket::bind(("127.0.0.1", 0))?;
    receiver.set_read_timeout(Some(Duration::from_millis(500)))?;
    let addr = receiver.local_addr()?;

    let collector = std::thread::spawn(move || -> Result<Vec<Packet>, PacketError> {
        let mut buf = vec![0u8; MAX_DATAGRAM];
        let mut received = Vec::new();
        loop {
            let (n, _) = receiver.recv_from(&mut buf)?;
            if n == 0 {
                return Ok(received);
            }
            received.push(decode_packet(&buf[..n])?);
        }
    });

    let sender = UdpSocket::bind(("127.0.0.1", 0))?;
    let survivors = drop(packets, config);
    for (i, p) in survivors.iter().enumerate() {
        sender.send_to(&encode_packet(p), addr)?;
        // Loopback has no flow control; a short pause every few slabs keeps
        // a large burst from overrunning the receive buffer.
        if i % 32 == 31 {
            std::thread::sleep(Duration::from_millis(1));
        }
    }
    sender.send_to(&[], addr)?;

    collector
        .join()
        .map_err(|_| io::Error::other("receiver thread panicked"))?
}
