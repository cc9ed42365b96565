//! Binary PGM/PPM input, disparity/flow output and the energy CSV log.
//!
//! Byte layouts:
//!
//! ```text
//! P5 2x2 gray      50 35 0a 32 20 32 0a 32 35 35 0a | 00 40 80 ff
//! PFM 1x1 (17.0)   50 66 0a 31 20 31 0a 2d 31 2e 30 0a | 00 00 88 41
//! .flo 1x1 (-13,-7) 50 49 45 48 | 01 00 00 00 | 01 00 00 00 | 00 00 50 c1 00 00 e0 c0
//! ```
//!
//! PFM rows are stored bottom to top, `.flo` rows top to bottom; both are
//! little-endian.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::edp::EnergyTrace;
use crate::error::{Error, Result};
use crate::grid_model::{DisparityField, LabelSpace, PixelGrid};

/// The `.flo` magic number, which reads as `PIEH` in ASCII.
pub const FLO_MAGIC: f32 = 202021.25;

pub const ENERGY_LOG_HEADER: &str = "iteration,total,data,smooth,per_pixel,seconds";

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self, what: &str) -> Result<&'a str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| Error::MalformedHeader(format!("non-ASCII {what}")))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token(what)?;
        tok.parse()
            .map_err(|_| Error::MalformedHeader(format!("{what} {tok:?} is not a number")))
    }

    /// Consumes the single whitespace byte that ends a header.
    fn end(&mut self) -> Result<usize> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => Ok(self.pos + 1),
            _ => Err(Error::MalformedHeader("header not terminated by whitespace".into())),
        }
    }
}

/// Parses a binary PGM (`P5`) or PPM (`P6`) image with maxval 255.
pub fn decode_image(bytes: &[u8]) -> Result<PixelGrid> {
    let mut cur = HeaderCursor { bytes, pos: 0 };
    let channels = match cur.token("magic")? {
        "P5" => 1,
        "P6" => 3,
        other => return Err(Error::MalformedHeader(format!("unsupported magic {other:?}"))),
    };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedMaxval(u32::try_from(maxval).unwrap_or(u32::MAX)));
    }
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!("empty image {width}x{height}")));
    }
    let start = cur.end()?;
    let expected = width * height * channels;
    let payload = &bytes[start..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    PixelGrid::new(width, height, channels, payload[..expected].to_vec())
}

pub fn read_image(path: impl AsRef<Path>) -> Result<PixelGrid> {
    decode_image(&read_bytes(path.as_ref())?)
}

pub fn encode_image(image: &PixelGrid) -> Vec<u8> {
    let magic = if image.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.samples());
    out
}

pub fn write_image(image: &PixelGrid, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_image(image))
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum DisparityFormat {
    /// 8-bit PGM, label index stretched to `[0, 255]`.
    Pgm8,
    /// Single-channel PFM holding the first dimension's offset.
    Pfm,
}

impl std::str::FromStr for DisparityFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pgm8" | "pgm" => Ok(Self::Pgm8),
            "pfm" => Ok(Self::Pfm),
            _ => Err(Error::InvalidConfig(format!("unknown disparity format {s:?}"))),
        }
    }
}

/// `floor(255·idx / (Q−1))`, or 0 when there is a single label.
pub fn pgm8_level(index: u32, labels: usize) -> u8 {
    if labels <= 1 {
        return 0;
    }
    (255 * u64::from(index) / (labels as u64 - 1)).min(255) as u8
}

fn check_field(field: &DisparityField, space: &LabelSpace) -> Result<()> {
    if let Some(bad) = field.labels().iter().find(|&&v| v as usize >= space.count()) {
        return Err(Error::DimensionMismatch(format!(
            "label index {bad} outside a space of {} labels",
            space.count()
        )));
    }
    Ok(())
}

pub fn encode_disparity(field: &DisparityField, space: &LabelSpace, format: DisparityFormat) -> Result<Vec<u8>> {
    check_field(field, space)?;
    let (w, h) = (field.width(), field.height());
    match format {
        DisparityFormat::Pgm8 => {
            let samples = field.labels().iter().map(|&v| pgm8_level(v, space.count())).collect();
            Ok(encode_image(&PixelGrid::new(w, h, 1, samples)?))
        }
        DisparityFormat::Pfm => {
            let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
            for y in (0..h).rev() {
                for x in 0..w {
                    let offset = space.offset(field.label(x, y) as usize, 0);
                    out.extend_from_slice(&(offset as f32).to_le_bytes());
                }
            }
            Ok(out)
        }
    }
}

pub fn write_disparity(
    field: &DisparityField,
    space: &LabelSpace,
    path: impl AsRef<Path>,
    format: DisparityFormat,
) -> Result<()> {
    write_bytes(path.as_ref(), &encode_disparity(field, space, format)?)
}

/// A single-channel float image in top-to-bottom row order.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

/// Parses a grayscale PFM (`Pf`) of either endianness.
pub fn decode_pfm(bytes: &[u8]) -> Result<FloatImage> {
    let mut cur = HeaderCursor { bytes, pos: 0 };
    let magic = cur.token("magic")?;
    if magic != "Pf" {
        return Err(Error::MalformedHeader(format!("expected grayscale PFM, got {magic:?}")));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let scale_tok = cur.token("scale")?;
    let scale: f32 = scale_tok
        .parse()
        .map_err(|_| Error::MalformedHeader(format!("scale {scale_tok:?} is not a number")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::MalformedHeader(format!("invalid scale {scale_tok}")));
    }
    let start = cur.end()?;
    let payload = &bytes[start..];
    let expected = width * height * 4;
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let mut values = vec![0f32; width * height];
    for (i, chunk) in payload[..expected].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if scale < 0.0 { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        let (x, row_from_bottom) = (i % width, i / width);
        values[(height - 1 - row_from_bottom) * width + x] = v;
    }
    Ok(FloatImage { width, height, values })
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<FloatImage> {
    decode_pfm(&read_bytes(path.as_ref())?)
}

/// Per-pixel `(u, v)` vectors in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub vectors: Vec<(f32, f32)>,
}

fn check_flow_space(space: &LabelSpace) -> Result<()> {
    if space.dims() != 2 {
        return Err(Error::InvalidConfig(format!(
            "flow output needs a 2-dimensional label space, got {}",
            space.dims()
        )));
    }
    Ok(())
}

pub fn flow_vectors(field: &DisparityField, space: &LabelSpace) -> Result<FlowField> {
    check_flow_space(space)?;
    check_field(field, space)?;
    let vectors = field
        .labels()
        .iter()
        .map(|&v| (space.offset(v as usize, 0) as f32, space.offset(v as usize, 1) as f32))
        .collect();
    Ok(FlowField {
        width: field.width(),
        height: field.height(),
        vectors,
    })
}

pub fn encode_flow(field: &DisparityField, space: &LabelSpace) -> Result<Vec<u8>> {
    let flow = flow_vectors(field, space)?;
    let mut out = Vec::with_capacity(12 + 8 * flow.vectors.len());
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width as u32).to_le_bytes());
    out.extend_from_slice(&(flow.height as u32).to_le_bytes());
    for (u, v) in flow.vectors {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn write_flow(field: &DisparityField, space: &LabelSpace, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_flow(field, space)?)
}

pub fn decode_flow(bytes: &[u8]) -> Result<FlowField> {
    let word = |i: usize| -> Option<[u8; 4]> { bytes.get(4 * i..4 * i + 4).map(|b| [b[0], b[1], b[2], b[3]]) };
    let (Some(magic), Some(w), Some(h)) = (word(0), word(1), word(2)) else {
        return Err(Error::MalformedHeader("flow header shorter than 12 bytes".into()));
    };
    if f32::from_le_bytes(magic) != FLO_MAGIC {
        return Err(Error::MalformedHeader("bad .flo magic".into()));
    }
    let (width, height) = (u32::from_le_bytes(w) as usize, u32::from_le_bytes(h) as usize);
    let expected = 8 * width * height;
    let found = bytes.len() - 12;
    if found < expected {
        return Err(Error::TruncatedPayload { expected, found });
    }
    let vectors = (0..width * height)
        .map(|i| {
            let u = f32::from_le_bytes(word(3 + 2 * i).expect("length checked"));
            let v = f32::from_le_bytes(word(4 + 2 * i).expect("length checked"));
            (u, v)
        })
        .collect();
    Ok(FlowField { width, height, vectors })
}

pub fn read_flow(path: impl AsRef<Path>) -> Result<FlowField> {
    decode_flow(&read_bytes(path.as_ref())?)
}

fn hsv_to_rgb(hue_deg: f64, sat: f64, val: f64) -> [u8; 3] {
    let c = val * sat;
    let h = hue_deg / 60.0;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = val - c;
    [r, g, b].map(|ch| ((ch + m) * 255.0).round().clamp(0.0, 255.0) as u8)
}

/// Color-wheel rendering: hue from direction, saturation from magnitude
/// relative to the largest vector, full value.
pub fn render_flow(field: &DisparityField, space: &LabelSpace) -> Result<PixelGrid> {
    let flow = flow_vectors(field, space)?;
    let magnitude = |(u, v): (f32, f32)| f64::from(u).hypot(f64::from(v));
    let max = flow.vectors.iter().copied().map(magnitude).fold(0.0, f64::max);
    let mut samples = Vec::with_capacity(3 * flow.vectors.len());
    for &(u, v) in &flow.vectors {
        let hue = f64::from(v).atan2(f64::from(u)).to_degrees().rem_euclid(360.0);
        let sat = if max > 0.0 { magnitude((u, v)) / max } else { 0.0 };
        samples.extend_from_slice(&hsv_to_rgb(hue, sat, 1.0));
    }
    PixelGrid::new(flow.width, flow.height, 3, samples)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyLogRow {
    pub iteration: usize,
    pub total: i64,
    pub data: i64,
    pub smooth: i64,
    /// `Ē` exactly as printed, two decimals.
    pub per_pixel: String,
    pub seconds: f64,
}

impl EnergyLogRow {
    fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6}",
            self.iteration, self.total, self.data, self.smooth, self.per_pixel, self.seconds
        )
    }
}

pub fn energy_log_rows(trace: &EnergyTrace) -> Vec<EnergyLogRow> {
    trace
        .entries
        .iter()
        .map(|e| EnergyLogRow {
            iteration: e.iteration,
            total: e.energy.total(),
            data: e.energy.data,
            smooth: e.energy.smoothness,
            per_pixel: e.energy.per_pixel_fixed2(),
            seconds: e.seconds,
        })
        .collect()
}

pub fn encode_energy_rows(rows: &[EnergyLogRow]) -> String {
    let mut out = String::from(ENERGY_LOG_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.to_line());
    }
    out
}

pub fn encode_energy_log(trace: &EnergyTrace) -> String {
    encode_energy_rows(&energy_log_rows(trace))
}

pub fn write_energy_log(trace: &EnergyTrace, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), encode_energy_log(trace).as_bytes())
}

pub fn parse_energy_log(text: &str) -> Result<Vec<EnergyLogRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(ENERGY_LOG_HEADER) {
        return Err(Error::MalformedHeader("energy log header missing".into()));
    }
    let bad = |line: &str| Error::MalformedHeader(format!("bad energy log row {line:?}"));
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(bad(line));
            }
            Ok(EnergyLogRow {
                iteration: cols[0].parse().map_err(|_| bad(line))?,
                total: cols[1].parse().map_err(|_| bad(line))?,
                data: cols[2].parse().map_err(|_| bad(line))?,
                smooth: cols[3].parse().map_err(|_| bad(line))?,
                per_pixel: cols[4].to_string(),
                seconds: cols[5].parse().map_err(|_| bad(line))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edp::TraceEntry;
    use crate::grid_model::EnergyBreakdown;

    #[test]
    fn p5_with_comment_decodes() {
        let bytes = b"P5\n# note\n2 2\n255\n\x00\x40\x80\xff";
        let img = decode_image(bytes).unwrap();
        assert_eq!((img.width(), img.height(), img.channels()), (2, 2, 1));
        assert_eq!(img.samples(), &[0, 64, 128, 255]);
    }

    #[test]
    fn image_errors_are_distinct() {
        assert!(matches!(decode_image(b"P5\n2 2\n65535\n"), Err(Error::UnsupportedMaxval(65535))));
        assert!(matches!(decode_image(b"P3\n2 2\n255\n"), Err(Error::MalformedHeader(_))));
        assert!(matches!(decode_image(b"P5\n2 x\n255\n"), Err(Error::MalformedHeader(_))));
        assert!(matches!(
            decode_image(b"P5\n2 2\n255\n\x00\x01"),
            Err(Error::TruncatedPayload { expected: 4, found: 2 })
        ));
        let msg = decode_image(b"P6 1 1 65535\n").unwrap_err().to_string();
        assert!(msg.contains("unsupported maxval"));
    }

    #[test]
    fn pgm8_levels() {
        assert_eq!(pgm8_level(59, 60), 255);
        assert_eq!(pgm8_level(0, 60), 0);
        assert_eq!(pgm8_level(30, 60), 129);
        assert_eq!(pgm8_level(0, 1), 0);
    }

    #[test]
    fn pfm_layout_matches_doc_example() {
        let space = LabelSpace::stereo(59).unwrap();
        let field = DisparityField::constant(1, 1, 17);
        let bytes = encode_disparity(&field, &space, DisparityFormat::Pfm).unwrap();
        assert_eq!(bytes, b"Pf\n1 1\n-1.0\n\x00\x00\x88\x41");
        assert_eq!(decode_pfm(&bytes).unwrap().values, vec![17.0]);
    }

    #[test]
    fn flo_layout_matches_doc_example() {
        let space = LabelSpace::motion(13, 7).unwrap();
        let label = space.index(&[-13, -7]).unwrap() as u32;
        let bytes = encode_flow(&DisparityField::constant(1, 1, label), &space).unwrap();
        assert_eq!(
            bytes,
            [0x50, 0x49, 0x45, 0x48, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0x50, 0xc1, 0, 0, 0xe0, 0xc0]
        );
        assert_eq!(&bytes[..4], b"PIEH");
    }

    #[test]
    fn flow_rejects_one_dimensional_space() {
        let space = LabelSpace::stereo(3).unwrap();
        assert!(encode_flow(&DisparityField::constant(1, 1, 0), &space).is_err());
    }

    #[test]
    fn flow_render_colors() {
        let space = LabelSpace::motion(1, 1).unwrap();
        let right = space.index(&[1, 0]).unwrap() as u32;
        let zero = space.index(&[0, 0]).unwrap() as u32;
        let field = DisparityField::new(2, 1, vec![right, zero]).unwrap();
        let img = render_flow(&field, &space).unwrap();
        assert_eq!(img.samples(), &[255, 0, 0, 255, 255, 255]);
    }

    #[test]
    fn energy_log_rows_format() {
        let empty = EnergyTrace::default();
        assert_eq!(encode_energy_log(&empty), format!("{ENERGY_LOG_HEADER}\n"));
        let trace = EnergyTrace {
            entries: vec![TraceEntry {
                iteration: 1,
                energy: EnergyBreakdown {
                    data: 30,
                    smoothness: 10,
                    pixels: 4,
                },
                seconds: 0.25,
            }],
        };
        let text = encode_energy_log(&trace);
        assert_eq!(text.lines().nth(1), Some("1,40,30,10,10.00,0.250000"));
        assert_eq!(parse_energy_log(&text).unwrap(), energy_log_rows(&trace));
    }
}
