//! Raster containers and PNG / GeoTIFF input-output.
//!
//! Every image is held as row-major, band-interleaved `f32` intensities in
//! `[0, 1]`: 8-bit inputs are divided by 255 and 16-bit inputs by 65535 at
//! load time. Change masks are binary and are written as 8-bit single-channel
//! files with `0` for unchanged and `255` for changed pixels.

use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Read, Seek, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb, Rgba};
use serde::{Deserialize, Serialize};
use tiff::decoder::{Decoder, DecodingResult};
use tiff::encoder::{colortype, TiffEncoder};
use tiff::tags::Tag;

use crate::error::{Error, Result};

/// Affine georeference carried through from a GeoTIFF input.
///
/// `transform` follows the GDAL ordering: `[x0, dx, row_rot, y0, col_rot, dy]`.
/// `geo_keys` is the raw GeoKeyDirectory, kept verbatim so that masks written
/// back to GeoTIFF carry the same CRS description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoRef {
    pub transform: [f64; 6],
    pub geo_keys: Option<Vec<u16>>,
}

impl GeoRef {
    /// EPSG code from the ProjectedCSType or GeographicType key, if present.
    pub fn epsg(&self) -> Option<u16> {
        let keys = self.geo_keys.as_ref()?;
        keys.get(4..)?
            .chunks_exact(4)
            .find(|k| (k[0] == 3072 || k[0] == 2048) && k[1] == 0)
            .map(|k| k[3])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    bands: usize,
    pixels: Vec<f32>,
    geo: Option<GeoRef>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, bands: usize, pixels: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || bands == 0 {
            return Err(Error::InvalidRaster(format!(
                "empty raster {width}x{height}x{bands}"
            )));
        }
        if pixels.len() != width * height * bands {
            return Err(Error::InvalidRaster(format!(
                "expected {} values for {width}x{height}x{bands}, got {}",
                width * height * bands,
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidRaster(format!(
                "intensity {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            bands,
            pixels,
            geo: None,
        })
    }

    /// Builds a raster by evaluating `f(x, y, band)`; values are clamped to `[0, 1]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        bands: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height * bands);
        for y in 0..height {
            for x in 0..width {
                for b in 0..bands {
                    let v = f(x, y, b);
                    pixels.push(if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
                }
            }
        }
        Self::new(width, height, bands, pixels)
    }

    pub fn filled(width: usize, height: usize, bands: usize, value: f32) -> Result<Self> {
        Self::new(width, height, bands, vec![value; width * height * bands])
    }

    pub fn with_geo(mut self, geo: Option<GeoRef>) -> Self {
        self.geo = geo;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn geo(&self) -> Option<&GeoRef> {
        self.geo.as_ref()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, band: usize) -> f32 {
        self.pixels[(y * self.width + x) * self.bands + band]
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.bands;
        &self.pixels[i..i + self.bands]
    }

    /// Overwrites one pixel. Values are clamped to `[0, 1]`.
    pub fn set_pixel(&mut self, x: usize, y: usize, values: &[f32]) {
        let i = (y * self.width + x) * self.bands;
        for (dst, &v) in self.pixels[i..i + self.bands].iter_mut().zip(values) {
            *dst = v.clamp(0.0, 1.0);
        }
    }

    /// Mean over bands, row-major.
    pub fn gray(&self) -> Vec<f32> {
        self.pixels
            .chunks_exact(self.bands)
            .map(|p| p.iter().sum::<f32>() / self.bands as f32)
            .collect()
    }

    /// One band as a row-major plane.
    pub fn band(&self, band: usize) -> Vec<f32> {
        self.pixels
            .iter()
            .skip(band)
            .step_by(self.bands)
            .copied()
            .collect()
    }

    pub fn same_shape(&self, other: &RasterImage) -> bool {
        self.width == other.width && self.height == other.height && self.bands == other.bands
    }

    /// Bilinear resampling to `width` x `height` (pixel-centre aligned).
    pub fn resize_bilinear(&self, width: usize, height: usize) -> RasterImage {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut pixels = Vec::with_capacity(width * height * self.bands);
        for y in 0..height {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let wy = (fy - y0 as f64) as f32;
            for x in 0..width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let wx = (fx - x0 as f64) as f32;
                for b in 0..self.bands {
                    let top = self.get(x0, y0, b) * (1.0 - wx) + self.get(x1, y0, b) * wx;
                    let bottom = self.get(x0, y1, b) * (1.0 - wx) + self.get(x1, y1, b) * wx;
                    pixels.push((top * (1.0 - wy) + bottom * wy).clamp(0.0, 1.0));
                }
            }
        }
        RasterImage {
            width,
            height,
            bands: self.bands,
            pixels,
            geo: self.geo.clone(),
        }
    }
}

/// Co-registered pre-event / post-event pair with identical geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePair {
    pre: RasterImage,
    post: RasterImage,
}

impl ImagePair {
    pub fn new(pre: RasterImage, post: RasterImage) -> Result<Self> {
        if !pre.same_shape(&post) {
            return Err(Error::DimensionMismatch(format!(
                "pre is {}x{}x{}, post is {}x{}x{}",
                pre.width, pre.height, pre.bands, post.width, post.height, post.bands
            )));
        }
        Ok(Self { pre, post })
    }

    pub fn pre(&self) -> &RasterImage {
        &self.pre
    }

    pub fn post(&self) -> &RasterImage {
        &self.post
    }

    pub fn width(&self) -> usize {
        self.pre.width
    }

    pub fn height(&self) -> usize {
        self.pre.height
    }

    pub fn bands(&self) -> usize {
        self.pre.bands
    }

    pub fn into_parts(self) -> (RasterImage, RasterImage) {
        (self.pre, self.post)
    }
}

/// Binary per-pixel change decision, `1` = changed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeMask {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl ChangeMask {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidRaster(format!(
                "mask {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if values.iter().any(|&v| v > 1) {
            return Err(Error::InvalidRaster("mask values must be 0 or 1".into()));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y) as u8);
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.values[y * self.width + x] != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, changed: bool) {
        self.values[y * self.width + x] = changed as u8;
    }

    pub fn count_changed(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }

    pub fn same_dims(&self, other: &ChangeMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn union(&self, other: &ChangeMask) -> Result<ChangeMask> {
        if !self.same_dims(other) {
            return Err(Error::DimensionMismatch(format!(
                "mask {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(ChangeMask {
            width: self.width,
            height: self.height,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a | b)
                .collect(),
        })
    }

    /// Nearest-neighbour resampling.
    pub fn resize_nearest(&self, width: usize, height: usize) -> ChangeMask {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let xs = nearest_index_map(self.width, width);
        let ys = nearest_index_map(self.height, height);
        ChangeMask::from_fn(width, height, |x, y| self.get(xs[x], ys[y]))
    }

    /// Encodes as an 8-bit single-channel PNG (0 / 255).
    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let data = self.values.iter().map(|&v| v * 255).collect();
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, data)
                .expect("buffer length matches dimensions");
        let mut out = Cursor::new(Vec::new());
        DynamicImage::ImageLuma8(buf)
            .write_to(&mut out, ImageFormat::Png)
            .map_err(|e| Error::UnsupportedFormat(e.to_string()))?;
        Ok(out.into_inner())
    }

    /// Writes the mask as PNG, or as GeoTIFF when the extension is `.tif` / `.tiff`.
    pub fn save(&self, path: impl AsRef<Path>, geo: Option<&GeoRef>) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        if is_tiff_path(path) {
            let data: Vec<u8> = self.values.iter().map(|&v| v * 255).collect();
            let file = BufWriter::new(File::create(path)?);
            write_tiff::<colortype::Gray8, _>(file, self.width, self.height, &data, geo)
        } else {
            std::fs::write(path, self.to_png_bytes()?)?;
            Ok(())
        }
    }

    /// Loads a mask file; any nonzero intensity counts as changed.
    pub fn load(path: impl AsRef<Path>) -> Result<ChangeMask> {
        let img = load_image(path)?;
        Ok(ChangeMask::from_fn(img.width, img.height, |x, y| {
            img.pixel(x, y).iter().any(|&v| v > 0.0)
        }))
    }
}

pub(crate) fn nearest_index_map(src: usize, dst: usize) -> Vec<usize> {
    (0..dst)
        .map(|i| (((i as f64 + 0.5) * src as f64 / dst as f64) as usize).min(src - 1))
        .collect()
}

fn is_tiff_path(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("tif" | "tiff")
    )
}

fn corrupt(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::CorruptData {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Loads an 8/16-bit PNG or GeoTIFF, normalizing intensities to `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut magic = [0u8; 8];
    let n = File::open(path)?.read(&mut magic)?;
    let magic = &magic[..n];
    if magic.starts_with(b"\x89PNG") {
        load_png(path)
    } else if magic.starts_with(b"II*\0")
        || magic.starts_with(b"MM\0*")
        || magic.starts_with(b"II+\0")
        || magic.starts_with(b"MM\0+")
    {
        load_tiff(path)
    } else {
        Err(Error::UnsupportedFormat(format!(
            "{} is neither PNG nor TIFF",
            path.display()
        )))
    }
}

fn load_png(path: &Path) -> Result<RasterImage> {
    let img = image::ImageReader::open(path)?
        .with_guessed_format()?
        .decode()
        .map_err(|e| corrupt(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (bands, pixels): (usize, Vec<f32>) = match img {
        DynamicImage::ImageLuma8(b) => (1, scale_u8(b.as_raw())),
        DynamicImage::ImageLumaA8(b) => (2, scale_u8(b.as_raw())),
        DynamicImage::ImageRgb8(b) => (3, scale_u8(b.as_raw())),
        DynamicImage::ImageRgba8(b) => (4, scale_u8(b.as_raw())),
        DynamicImage::ImageLuma16(b) => (1, scale_u16(b.as_raw())),
        DynamicImage::ImageLumaA16(b) => (2, scale_u16(b.as_raw())),
        DynamicImage::ImageRgb16(b) => (3, scale_u16(b.as_raw())),
        DynamicImage::ImageRgba16(b) => (4, scale_u16(b.as_raw())),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: pixel type {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    RasterImage::new(w, h, bands, pixels)
}

fn scale_u8(raw: &[u8]) -> Vec<f32> {
    raw.iter().map(|&v| v as f32 / 255.0).collect()
}

fn scale_u16(raw: &[u16]) -> Vec<f32> {
    raw.iter().map(|&v| v as f32 / 65535.0).collect()
}

fn load_tiff(path: &Path) -> Result<RasterImage> {
    let mut dec = Decoder::new(BufReader::new(File::open(path)?)).map_err(|e| corrupt(path, e))?;
    let (w, h) = dec.dimensions().map_err(|e| corrupt(path, e))?;
    let ct = dec.colortype().map_err(|e| corrupt(path, e))?;
    let bands = ct.num_samples() as usize;
    if !matches!(ct.bit_depth(), 8 | 16) {
        return Err(Error::UnsupportedFormat(format!(
            "{}: {}-bit samples",
            path.display(),
            ct.bit_depth()
        )));
    }
    let geo = read_geo(&mut dec);
    let pixels = match dec.read_image().map_err(|e| corrupt(path, e))? {
        DecodingResult::U8(v) => scale_u8(&v),
        DecodingResult::U16(v) => scale_u16(&v),
        _ => {
            return Err(Error::UnsupportedFormat(format!(
                "{}: only unsigned 8/16-bit TIFF is supported",
                path.display()
            )))
        }
    };
    if pixels.len() != w as usize * h as usize * bands {
        return Err(corrupt(path, "sample count does not match dimensions"));
    }
    Ok(RasterImage::new(w as usize, h as usize, bands, pixels)?.with_geo(geo))
}

fn read_geo<R: Read + Seek>(dec: &mut Decoder<R>) -> Option<GeoRef> {
    let transform = if let Ok(Some(m)) = dec
        .find_tag(Tag::ModelTransformationTag)
        .map(|v| v.and_then(|v| v.into_f64_vec().ok()))
    {
        if m.len() < 8 {
            return None;
        }
        [m[3], m[0], m[1], m[7], m[4], m[5]]
    } else {
        let scale = dec.get_tag_f64_vec(Tag::ModelPixelScaleTag).ok()?;
        let tie = dec.get_tag_f64_vec(Tag::ModelTiepointTag).ok()?;
        if scale.len() < 2 || tie.len() < 6 {
            return None;
        }
        let (dx, dy) = (scale[0], scale[1]);
        [tie[3] - tie[0] * dx, dx, 0.0, tie[4] + tie[1] * dy, 0.0, -dy]
    };
    let geo_keys = dec.get_tag_u16_vec(Tag::GeoKeyDirectoryTag).ok();
    Some(GeoRef {
        transform,
        geo_keys,
    })
}

fn write_tiff<C, W>(
    writer: W,
    width: usize,
    height: usize,
    data: &[C::Inner],
    geo: Option<&GeoRef>,
) -> Result<()>
where
    C: colortype::ColorType,
    [C::Inner]: tiff::encoder::TiffValue,
    W: Write + Seek,
{
    let map = |e: tiff::TiffError| Error::UnsupportedFormat(e.to_string());
    let mut enc = TiffEncoder::new(writer).map_err(map)?;
    let mut img = enc
        .new_image::<C>(width as u32, height as u32)
        .map_err(map)?;
    if let Some(g) = geo {
        let t = g.transform;
        let dir = img.encoder();
        if t[2] == 0.0 && t[4] == 0.0 {
            dir.write_tag(Tag::ModelPixelScaleTag, &[t[1], -t[5], 0.0][..])
                .map_err(map)?;
            dir.write_tag(Tag::ModelTiepointTag, &[0.0, 0.0, 0.0, t[0], t[3], 0.0][..])
                .map_err(map)?;
        } else {
            let m = [
                t[1], t[2], 0.0, t[0], t[4], t[5], 0.0, t[3], 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                1.0,
            ];
            dir.write_tag(Tag::ModelTransformationTag, &m[..])
                .map_err(map)?;
        }
        if let Some(keys) = &g.geo_keys {
            dir.write_tag(Tag::GeoKeyDirectoryTag, &keys[..])
                .map_err(map)?;
        }
    }
    img.write_data(data).map_err(map)?;
    Ok(())
}

/// Sample depth for [`save_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

/// Writes a 1-4 band raster as PNG, or 1/3/4 band as GeoTIFF for `.tif` paths.
pub fn save_image(img: &RasterImage, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let (w, h) = (img.width as u32, img.height as u32);
    let q8: Vec<u8> = img
        .pixels
        .iter()
        .map(|&v| (v * 255.0).round() as u8)
        .collect();
    let q16: Vec<u16> = img
        .pixels
        .iter()
        .map(|&v| (v * 65535.0).round() as u16)
        .collect();
    let unsupported = || {
        Error::UnsupportedFormat(format!(
            "cannot write {} bands to {}",
            img.bands,
            path.display()
        ))
    };
    if is_tiff_path(path) {
        let file = BufWriter::new(File::create(path)?);
        let geo = img.geo.as_ref();
        return match (img.bands, depth) {
            (1, BitDepth::Eight) => write_tiff::<colortype::Gray8, _>(file, img.width, img.height, &q8, geo),
            (1, BitDepth::Sixteen) => write_tiff::<colortype::Gray16, _>(file, img.width, img.height, &q16, geo),
            (3, BitDepth::Eight) => write_tiff::<colortype::RGB8, _>(file, img.width, img.height, &q8, geo),
            (3, BitDepth::Sixteen) => write_tiff::<colortype::RGB16, _>(file, img.width, img.height, &q16, geo),
            (4, BitDepth::Eight) => write_tiff::<colortype::RGBA8, _>(file, img.width, img.height, &q8, geo),
            (4, BitDepth::Sixteen) => write_tiff::<colortype::RGBA16, _>(file, img.width, img.height, &q16, geo),
            _ => Err(unsupported()),
        };
    }
    let dynimg = match (img.bands, depth) {
        (1, BitDepth::Eight) => ImageBuffer::<Luma<u8>, _>::from_raw(w, h, q8).map(DynamicImage::ImageLuma8),
        (1, BitDepth::Sixteen) => ImageBuffer::<Luma<u16>, _>::from_raw(w, h, q16).map(DynamicImage::ImageLuma16),
        (2, BitDepth::Eight) => ImageBuffer::from_raw(w, h, q8).map(DynamicImage::ImageLumaA8),
        (2, BitDepth::Sixteen) => ImageBuffer::from_raw(w, h, q16).map(DynamicImage::ImageLumaA16),
        (3, BitDepth::Eight) => ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, q8).map(DynamicImage::ImageRgb8),
        (3, BitDepth::Sixteen) => ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, q16).map(DynamicImage::ImageRgb16),
        (4, BitDepth::Eight) => ImageBuffer::<Rgba<u8>, _>::from_raw(w, h, q8).map(DynamicImage::ImageRgba8),
        (4, BitDepth::Sixteen) => ImageBuffer::<Rgba<u16>, _>::from_raw(w, h, q16).map(DynamicImage::ImageRgba16),
        _ => None,
    }
    .ok_or_else(unsupported)?;
    let mut out = Cursor::new(Vec::new());
    dynimg
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::UnsupportedFormat(e.to_string()))?;
    std::fs::write(path, out.into_inner())?;
    Ok(())
}

/// Loads both epochs and checks that their geometry agrees.
pub fn load_pair(pre: impl AsRef<Path>, post: impl AsRef<Path>) -> Result<ImagePair> {
    ImagePair::new(load_image(pre)?, load_image(post)?)
}

/// Nearest positive multiple of `patch` for one side, never below `patch`.
pub fn patch_multiple(len: usize, patch: usize) -> usize {
    let patch = patch.max(1);
    let n = ((len as f64 / patch as f64).round() as usize).max(1);
    n * patch
}

/// Resamples (bilinear) so both sides become the nearest multiples of `patch`.
pub fn resize_to_patch_multiple(img: &RasterImage, patch: usize) -> RasterImage {
    img.resize_bilinear(
        patch_multiple(img.width, patch),
        patch_multiple(img.height, patch),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patch_multiple_rounds_to_nearest() {
        assert_eq!(patch_multiple(1024, 14), 1022);
        assert_eq!(patch_multiple(14, 14), 14);
        assert_eq!(patch_multiple(13, 14), 14);
        assert_eq!(patch_multiple(1, 14), 14);
        assert_eq!(patch_multiple(21, 14), 28);
    }

    #[test]
    fn resize_examples() {
        let img = RasterImage::filled(1024, 1024, 3, 0.5).unwrap();
        let r = resize_to_patch_multiple(&img, 14);
        assert_eq!((r.width(), r.height(), r.bands()), (1022, 1022, 3));

        let img = RasterImage::from_fn(14, 14, 1, |x, y, _| (x * y) as f32 / 200.0).unwrap();
        assert_eq!(resize_to_patch_multiple(&img, 14), img);

        let img = RasterImage::filled(13, 13, 1, 0.25).unwrap();
        let r = resize_to_patch_multiple(&img, 14);
        assert_eq!((r.width(), r.height()), (14, 14));
        assert!(r.pixels().iter().all(|&v| (v - 0.25).abs() < 1e-6));
    }

    #[test]
    fn rejects_out_of_range_intensity() {
        assert!(RasterImage::new(1, 1, 1, vec![1.5]).is_err());
        assert!(RasterImage::new(2, 1, 1, vec![0.5]).is_err());
    }

    #[test]
    fn pair_requires_equal_geometry() {
        let a = RasterImage::filled(256, 256, 3, 0.1).unwrap();
        let b = RasterImage::filled(128, 128, 3, 0.1).unwrap();
        assert!(matches!(
            ImagePair::new(a.clone(), b),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(ImagePair::new(a.clone(), a).is_ok());
    }

    #[test]
    fn nearest_resize_of_mask_keeps_blocks() {
        let m = ChangeMask::from_fn(4, 4, |x, y| x < 2 && y < 2);
        let r = m.resize_nearest(8, 8);
        assert_eq!(r.count_changed(), 16);
        assert!(r.get(3, 3) && !r.get(4, 3));
    }

    #[test]
    fn epsg_from_geo_keys() {
        let g = GeoRef {
            transform: [0.0, 1.0, 0.0, 0.0, 0.0, -1.0],
            geo_keys: Some(vec![1, 1, 0, 2, 1024, 0, 1, 1, 3072, 0, 1, 32633]),
        };
        assert_eq!(g.epsg(), Some(32633));
    }
}
