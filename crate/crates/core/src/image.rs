//! Grayscale/RGB image containers, PNM (P2/P3/P5/P6) codecs, grayscale
//! conversion and bilinear resizing.
//!
//! Intensities are stored as reals in [0, 255] throughout; rounding to the
//! 8-bit grid happens only when a PNM file is written.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Single-channel image, row-major, intensities in [0, 255].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    data: Array2<f64>,
}

/// Interleaved R,G,B image, intensities in [0, 255].
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

/// Decoded PNM payload: P2/P5 yield grayscale, P3/P6 color.
#[derive(Debug, Clone, PartialEq)]
pub enum PnmImage {
    Gray(GrayImage),
    Rgb(RgbImage),
}

fn check_intensity(v: f64, what: &str) -> Result<()> {
    if !(0.0..=255.0).contains(&v) {
        return Err(Error::Range(format!("{what} intensity {v} outside [0, 255]")));
    }
    Ok(())
}

impl GrayImage {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        for &v in data.iter() {
            check_intensity(v, "gray")?;
        }
        Ok(Self { data })
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Argument(format!(
                "data length {} does not match {height}x{width}",
                data.len()
            )));
        }
        let arr = Array2::from_shape_vec((height, width), data)
            .map_err(|e| Error::Argument(e.to_string()))?;
        Self::new(arr)
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self> {
        check_intensity(value, "gray")?;
        Ok(Self {
            data: Array2::from_elem((height, width), value),
        })
    }

    pub fn height(&self) -> usize {
        self.data.nrows()
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn pixels(&self) -> &Array2<f64> {
        &self.data
    }

    /// Top-left crop; the working region of a patch grid.
    pub fn crop(&self, crop_h: usize, crop_w: usize) -> Result<GrayImage> {
        if crop_h > self.height() || crop_w > self.width() || crop_h == 0 || crop_w == 0 {
            return Err(Error::Argument(format!(
                "crop {crop_h}x{crop_w} invalid for {}x{} image",
                self.height(),
                self.width()
            )));
        }
        Ok(GrayImage {
            data: self.data.slice(ndarray::s![..crop_h, ..crop_w]).to_owned(),
        })
    }

    /// Quantize to the 8-bit tonal grid (nearest integer).
    pub fn round_to_integers(&self) -> GrayImage {
        GrayImage {
            data: self.data.mapv(|v| v.round().clamp(0.0, 255.0)),
        }
    }

    pub fn encode_pnm(&self, ascii: bool) -> Result<Vec<u8>> {
        encode_gray(self, ascii)
    }
}

impl RgbImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 3 * height * width {
            return Err(Error::Argument(format!(
                "data length {} does not match 3x{height}x{width}",
                data.len()
            )));
        }
        for &v in &data {
            check_intensity(v, "rgb")?;
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Interleaved R,G,B samples, row-major.
    pub fn samples(&self) -> &[f64] {
        &self.data
    }

    pub fn encode_pnm(&self, ascii: bool) -> Result<Vec<u8>> {
        encode_rgb(self, ascii)
    }
}

// ---------------------------------------------------------------------------
// PNM decoding
// ---------------------------------------------------------------------------

struct TokenReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> TokenReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    /// Skip whitespace and `#` comments running to end of line.
    fn skip_filler(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn next_uint(&mut self, what: &str) -> Result<u32> {
        self.skip_filler();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::Format(format!("expected unsigned integer for {what}")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::Format(format!("non-ASCII token for {what}")))?;
        text.parse::<u32>()
            .map_err(|_| Error::Format(format!("{what} value `{text}` does not fit u32")))
    }

    /// Consume exactly one whitespace byte (the separator before a binary payload).
    fn skip_single_whitespace(&mut self) -> Result<()> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(Error::Format(
                "missing whitespace separator before binary payload".into(),
            )),
        }
    }

    fn rest(&self) -> &'a [u8] {
        &self.bytes[self.pos..]
    }
}

/// Decode a P2/P3/P5/P6 portable anymap with maxval <= 255.
pub fn read_pnm(bytes: &[u8]) -> Result<PnmImage> {
    if bytes.len() < 2 {
        return Err(Error::Format("input shorter than a PNM magic".into()));
    }
    let magic = &bytes[..2];
    let (color, binary) = match magic {
        b"P2" => (false, false),
        b"P3" => (true, false),
        b"P5" => (false, true),
        b"P6" => (true, true),
        _ => {
            return Err(Error::Format(format!(
                "unrecognized PNM magic {:?}",
                String::from_utf8_lossy(magic)
            )))
        }
    };

    let mut reader = TokenReader::new(&bytes[2..]);
    let width = reader.next_uint("width")? as usize;
    let height = reader.next_uint("height")? as usize;
    let maxval = reader.next_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Format("zero image dimension in header".into()));
    }
    if maxval == 0 {
        return Err(Error::Format("maxval 0 in header".into()));
    }
    if maxval > 255 {
        return Err(Error::Unsupported(format!("maxval {maxval} > 255")));
    }

    let channels = if color { 3 } else { 1 };
    let count = width * height * channels;
    let mut samples = Vec::with_capacity(count);

    if binary {
        reader.skip_single_whitespace()?;
        let payload = reader.rest();
        if payload.len() < count {
            return Err(Error::Truncated {
                expected: count,
                actual: payload.len(),
            });
        }
        samples.extend(payload[..count].iter().map(|&b| f64::from(b)));
    } else {
        for i in 0..count {
            reader.skip_filler();
            if reader.rest().is_empty() {
                return Err(Error::Truncated {
                    expected: count,
                    actual: i,
                });
            }
            samples.push(f64::from(reader.next_uint("sample")?));
        }
    }

    if let Some(&bad) = samples.iter().find(|&&v| v > f64::from(maxval)) {
        return Err(Error::Format(format!("sample {bad} exceeds maxval {maxval}")));
    }

    if color {
        Ok(PnmImage::Rgb(RgbImage::new(height, width, samples)?))
    } else {
        Ok(PnmImage::Gray(GrayImage::from_vec(height, width, samples)?))
    }
}

// ---------------------------------------------------------------------------
// PNM encoding
// ---------------------------------------------------------------------------

fn rounded_byte(v: f64, what: &str) -> Result<u8> {
    if !(0.0..=255.0).contains(&v) {
        return Err(Error::Range(format!("{what} intensity {v} outside [0, 255]")));
    }
    Ok(v.round() as u8)
}

fn encode_samples(
    out: &mut Vec<u8>,
    values: impl Iterator<Item = f64>,
    per_line: usize,
    ascii: bool,
    what: &str,
) -> Result<()> {
    if ascii {
        let mut col = 0usize;
        for v in values {
            let b = rounded_byte(v, what)?;
            if col > 0 {
                out.push(if col % per_line == 0 { b'\n' } else { b' ' });
            }
            out.extend_from_slice(b.to_string().as_bytes());
            col += 1;
        }
        out.push(b'\n');
    } else {
        for v in values {
            out.push(rounded_byte(v, what)?);
        }
    }
    Ok(())
}

fn encode_gray(img: &GrayImage, ascii: bool) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let magic = if ascii { "P2" } else { "P5" };
    out.extend_from_slice(format!("{magic}\n{} {}\n255\n", img.width(), img.height()).as_bytes());
    encode_samples(&mut out, img.pixels().iter().copied(), img.width(), ascii, "gray")?;
    Ok(out)
}

fn encode_rgb(img: &RgbImage, ascii: bool) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let magic = if ascii { "P3" } else { "P6" };
    out.extend_from_slice(format!("{magic}\n{} {}\n255\n", img.width(), img.height()).as_bytes());
    encode_samples(&mut out, img.samples().iter().copied(), 3 * img.width(), ascii, "rgb")?;
    Ok(out)
}

/// Encode either image kind; binary output is byte-for-byte deterministic.
pub fn write_pnm(img: &PnmImage, ascii: bool) -> Result<Vec<u8>> {
    match img {
        PnmImage::Gray(g) => encode_gray(g, ascii),
        PnmImage::Rgb(c) => encode_rgb(c, ascii),
    }
}

// ---------------------------------------------------------------------------
// Color conversion and resizing
// ---------------------------------------------------------------------------

/// Rec. 601 luma conversion.
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let mut data = Vec::with_capacity(img.height() * img.width());
    for px in img.samples().chunks_exact(3) {
        let y = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
        data.push(y.clamp(0.0, 255.0));
    }
    GrayImage {
        data: Array2::from_shape_vec((img.height(), img.width()), data)
            .expect("luma buffer matches image dimensions"),
    }
}

/// Bilinear resampling with half-pixel-centered sample coordinates.
pub fn resize_bilinear(img: &GrayImage, new_h: usize, new_w: usize) -> Result<GrayImage> {
    if new_h == 0 || new_w == 0 {
        return Err(Error::Argument("target dimensions must be >= 1".into()));
    }
    let (h, w) = (img.height(), img.width());
    let src = img.pixels();
    let scale_y = h as f64 / new_h as f64;
    let scale_x = w as f64 / new_w as f64;

    let mut out = Array2::zeros((new_h, new_w));
    for oy in 0..new_h {
        let sy = ((oy as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let fy = sy - y0 as f64;
        for ox in 0..new_w {
            let sx = ((ox as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let fx = sx - x0 as f64;
            let top = src[[y0, x0]] * (1.0 - fx) + src[[y0, x1]] * fx;
            let bot = src[[y1, x0]] * (1.0 - fx) + src[[y1, x1]] * fx;
            out[[oy, ox]] = (top * (1.0 - fy) + bot * fy).clamp(0.0, 255.0);
        }
    }
    Ok(GrayImage { data: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(h: usize, w: usize, vals: &[f64]) -> GrayImage {
        GrayImage::from_vec(h, w, vals.to_vec()).unwrap()
    }

    #[test]
    fn read_p5_binary() {
        let mut bytes = b"P5 2 2 255\n".to_vec();
        bytes.extend_from_slice(&[0, 128, 255, 64]);
        match read_pnm(&bytes).unwrap() {
            PnmImage::Gray(img) => {
                assert_eq!((img.height(), img.width()), (2, 2));
                let got: Vec<f64> = img.pixels().iter().copied().collect();
                assert_eq!(got, vec![0.0, 128.0, 255.0, 64.0]);
            }
            _ => panic!("expected grayscale"),
        }
    }

    #[test]
    fn read_p2_ascii() {
        match read_pnm(b"P2 1 1 255 7").unwrap() {
            PnmImage::Gray(img) => {
                assert_eq!((img.height(), img.width()), (1, 1));
                assert_eq!(img.pixels()[[0, 0]], 7.0);
            }
            _ => panic!("expected grayscale"),
        }
    }

    #[test]
    fn read_p6_color() {
        let mut bytes = b"P6\n1 2\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0, 0, 255, 0]);
        match read_pnm(&bytes).unwrap() {
            PnmImage::Rgb(img) => {
                assert_eq!((img.height(), img.width()), (2, 1));
                assert_eq!(img.samples(), &[255.0, 0.0, 0.0, 0.0, 255.0, 0.0]);
            }
            _ => panic!("expected color"),
        }
    }

    #[test]
    fn truncated_payload_is_length_error() {
        let mut bytes = b"P5 2 2 255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        match read_pnm(&bytes) {
            Err(Error::Truncated { expected: 4, actual: 3 }) => {}
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_ascii_is_length_error() {
        assert!(matches!(
            read_pnm(b"P2 2 2 255 1 2 3"),
            Err(Error::Truncated { expected: 4, actual: 3 })
        ));
    }

    #[test]
    fn maxval_over_255_unsupported() {
        assert!(matches!(read_pnm(b"P2 1 1 65535 7"), Err(Error::Unsupported(_))));
    }

    #[test]
    fn bad_magic_is_format_error() {
        assert!(matches!(read_pnm(b"P9 1 1 255 0"), Err(Error::Format(_))));
    }

    #[test]
    fn comments_in_header_are_skipped() {
        let bytes = b"P2 # a comment\n1 1 # another\n255\n9";
        match read_pnm(bytes).unwrap() {
            PnmImage::Gray(img) => assert_eq!(img.pixels()[[0, 0]], 9.0),
            _ => panic!("expected grayscale"),
        }
    }

    #[test]
    fn write_binary_exact_bytes() {
        let img = gray(1, 1, &[7.0]);
        let bytes = img.encode_pnm(false).unwrap();
        assert_eq!(bytes, b"P5\n1 1\n255\n\x07");
    }

    #[test]
    fn write_out_of_range_is_range_error() {
        // bypass constructor validation to exercise the encoder check
        let img = GrayImage {
            data: Array2::from_elem((1, 1), 256.0),
        };
        assert!(matches!(img.encode_pnm(false), Err(Error::Range(_))));
        assert!(matches!(img.encode_pnm(true), Err(Error::Range(_))));
    }

    #[test]
    fn roundtrip_binary_and_ascii() {
        let img = gray(2, 3, &[0.0, 1.0, 2.0, 253.0, 254.0, 255.0]);
        for ascii in [false, true] {
            let bytes = img.encode_pnm(ascii).unwrap();
            match read_pnm(&bytes).unwrap() {
                PnmImage::Gray(back) => assert_eq!(back, img),
                _ => panic!("expected grayscale"),
            }
        }
    }

    #[test]
    fn roundtrip_rounds_to_nearest_integer() {
        let img = gray(1, 2, &[6.6, 7.4]);
        let bytes = img.encode_pnm(false).unwrap();
        match read_pnm(&bytes).unwrap() {
            PnmImage::Gray(back) => {
                assert_eq!(back.pixels()[[0, 0]], 7.0);
                assert_eq!(back.pixels()[[0, 1]], 7.0);
            }
            _ => panic!("expected grayscale"),
        }
    }

    #[test]
    fn rgb_roundtrip_binary() {
        let img = RgbImage::new(1, 2, vec![1.0, 2.0, 3.0, 250.0, 251.0, 252.0]).unwrap();
        let bytes = write_pnm(&PnmImage::Rgb(img.clone()), false).unwrap();
        match read_pnm(&bytes).unwrap() {
            PnmImage::Rgb(back) => assert_eq!(back, img),
            _ => panic!("expected color"),
        }
    }

    #[test]
    fn grayscale_white_and_red() {
        let img = RgbImage::new(1, 2, vec![255.0, 255.0, 255.0, 255.0, 0.0, 0.0]).unwrap();
        let g = to_grayscale(&img);
        assert!((g.pixels()[[0, 0]] - 255.0).abs() < 1e-9);
        // luma weight on red alone: 0.299 * 255
        assert!((g.pixels()[[0, 1]] - 76.245).abs() < 1e-9);
    }

    #[test]
    fn grayscale_equal_channels_identity() {
        for v in [0.0, 17.0, 128.5, 255.0] {
            let img = RgbImage::new(1, 1, vec![v, v, v]).unwrap();
            assert!((to_grayscale(&img).pixels()[[0, 0]] - v).abs() < 1e-12);
        }
    }

    #[test]
    fn resize_constant_stays_constant() {
        let img = GrayImage::constant(244, 244, 100.0).unwrap();
        let small = resize_bilinear(&img, 112, 112).unwrap();
        assert_eq!((small.height(), small.width()), (112, 112));
        for &v in small.pixels().iter() {
            assert!((v - 100.0).abs() < 1e-12);
        }
    }

    #[test]
    fn resize_same_size_is_identity() {
        let img = gray(2, 2, &[0.0, 255.0, 0.0, 255.0]);
        let out = resize_bilinear(&img, 2, 2).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn resize_zero_target_is_argument_error() {
        let img = GrayImage::constant(4, 4, 1.0).unwrap();
        assert!(matches!(resize_bilinear(&img, 0, 4), Err(Error::Argument(_))));
        assert!(matches!(resize_bilinear(&img, 4, 0), Err(Error::Argument(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn decode_encode_identity_on_integer_images(
                h in 1usize..6,
                w in 1usize..6,
                seed in any::<u64>(),
                ascii in any::<bool>(),
            ) {
                let mut s = seed;
                let mut next = || {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((s >> 33) % 256) as f64
                };
                let img = GrayImage::from_vec(h, w, (0..h * w).map(|_| next()).collect()).unwrap();
                let bytes = img.encode_pnm(ascii).unwrap();
                match read_pnm(&bytes).unwrap() {
                    PnmImage::Gray(back) => prop_assert_eq!(back, img),
                    _ => prop_assert!(false, "expected grayscale"),
                }
            }

            #[test]
            fn grayscale_is_convex_combination(
                r in 0.0f64..255.0,
                g in 0.0f64..255.0,
                b in 0.0f64..255.0,
            ) {
                let img = RgbImage::new(1, 1, vec![r, g, b]).unwrap();
                let y = to_grayscale(&img).pixels()[[0, 0]];
                let lo = r.min(g).min(b);
                let hi = r.max(g).max(b);
                prop_assert!(y >= lo - 1e-9 && y <= hi + 1e-9);
            }

            #[test]
            fn resize_preserves_bounds(
                h in 1usize..8,
                w in 1usize..8,
                nh in 1usize..12,
                nw in 1usize..12,
                seed in any::<u64>(),
            ) {
                let mut s = seed;
                let mut next = || {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((s >> 33) % 256) as f64
                };
                let img = GrayImage::from_vec(h, w, (0..h * w).map(|_| next()).collect()).unwrap();
                let out = resize_bilinear(&img, nh, nw).unwrap();
                for &v in out.pixels().iter() {
                    prop_assert!((0.0..=255.0).contains(&v));
                }
            }
        }
    }
}
