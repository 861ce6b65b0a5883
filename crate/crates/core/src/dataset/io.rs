use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, ImageFormat, Luma, Rgb};

use crate::dataset::sample::{format_id, parse_id, Sample};
use crate::dataset::split::SplitManifest;
use crate::dataset::ClassIndexMask;
use crate::error::{data_err, Error, Result};
use crate::nn::{FeatureMap, Shape};

pub const IMAGES_DIR: &str = "images";
pub const ELEMENT_MASKS_DIR: &str = "masks_element";
pub const DEFECT_MASKS_DIR: &str = "masks_defect";
pub const MANIFEST_FILE: &str = "manifest.txt";

/// Decodes an 8-bit RGB PNG into a `1 x 3 x H x W` map scaled to `[0, 1]`.
pub fn decode_image_png(bytes: &[u8]) -> Result<FeatureMap<f32>> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| data_err!("image decode: {e}"))?;
    let rgb = match img {
        image::DynamicImage::ImageRgb8(rgb) => rgb,
        other => {
            return Err(data_err!(
                "image must be 8-bit RGB, found {:?}",
                other.color()
            ))
        }
    };
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut out = FeatureMap::zeros(Shape::new(1, 3, h, w));
    for (x, y, px) in rgb.enumerate_pixels() {
        for c in 0..3 {
            out.set(0, c, y as usize, x as usize, px[c] as f32 / 255.0);
        }
    }
    Ok(out)
}

/// Decodes an 8-bit single-channel PNG whose pixel values are class indices.
pub fn decode_mask_png(bytes: &[u8]) -> Result<ClassIndexMask> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| data_err!("mask decode: {e}"))?;
    let luma = match img {
        image::DynamicImage::ImageLuma8(l) => l,
        other => {
            return Err(data_err!(
                "mask must be 8-bit single-channel, found {:?}",
                other.color()
            ))
        }
    };
    let (w, h) = (luma.width() as usize, luma.height() as usize);
    ClassIndexMask::new(h, w, luma.into_raw())
}

pub fn encode_image_png(image: &FeatureMap<f32>) -> Result<Vec<u8>> {
    let s = image.shape();
    if s.batch != 1 || s.channels != 3 {
        return Err(data_err!("can only encode 1x3xHxW images, got {s}"));
    }
    let buf = ImageBuffer::from_fn(s.width as u32, s.height as u32, |x, y| {
        Rgb(std::array::from_fn(|c| {
            quantize(image.get(0, c, y as usize, x as usize))
        }))
    });
    encode_png(buf)
}

pub fn encode_mask_png(mask: &ClassIndexMask) -> Result<Vec<u8>> {
    encode_gray_png(mask.height(), mask.width(), mask.data())
}

pub fn encode_gray_png(height: usize, width: usize, gray: &[u8]) -> Result<Vec<u8>> {
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(width as u32, height as u32, gray.to_vec())
            .ok_or_else(|| data_err!("gray buffer does not match {height}x{width}"))?;
    encode_png(buf)
}

pub fn encode_rgb_png(height: usize, width: usize, rgb: &[u8]) -> Result<Vec<u8>> {
    let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(width as u32, height as u32, rgb.to_vec())
            .ok_or_else(|| data_err!("RGB buffer does not match {height}x{width}"))?;
    encode_png(buf)
}

fn encode_png<P>(buf: ImageBuffer<P, Vec<u8>>) -> Result<Vec<u8>>
where
    P: image::Pixel<Subpixel = u8> + image::PixelWithColorType,
{
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| data_err!("png encode: {e}"))?;
    Ok(out.into_inner())
}

/// Maps `[0, 1]` to `0..=255` with rounding; out-of-range values clamp.
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn sample_path(root: &Path, dir: &str, id: u32) -> PathBuf {
    root.join(dir).join(format!("{}.png", format_id(id)))
}

/// Ids of all `images/<id>.png` files, sorted.
pub fn list_ids(root: &Path) -> Result<Vec<u32>> {
    let dir = root.join(IMAGES_DIR);
    let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("png") {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        ids.push(parse_id(stem)?);
    }
    ids.sort_unstable();
    Ok(ids)
}

pub fn load_sample(root: &Path, id: u32) -> Result<Sample> {
    let name = format_id(id);
    let load_mask = |dir: &str, what: &str| -> Result<ClassIndexMask> {
        let path = sample_path(root, dir, id);
        if !path.exists() {
            return Err(data_err!("sample {name}: missing {what} mask {}", path.display()));
        }
        decode_mask_png(&read_file(&path)?).map_err(|e| data_err!("sample {name} {what} mask: {e}"))
    };
    let image = decode_image_png(&read_file(&sample_path(root, IMAGES_DIR, id))?)
        .map_err(|e| data_err!("sample {name} image: {e}"))?;
    let element = load_mask(ELEMENT_MASKS_DIR, "element")?;
    let defect = load_mask(DEFECT_MASKS_DIR, "defect")?;
    Sample::new(id, image, element, defect)
}

/// Loads every sample under `root`, in id order.
pub fn load_dataset(root: &Path) -> Result<Vec<Sample>> {
    list_ids(root)?
        .into_iter()
        .map(|id| load_sample(root, id))
        .collect()
}

pub fn load_samples(root: &Path, ids: &[u32]) -> Result<Vec<Sample>> {
    ids.iter().map(|&id| load_sample(root, id)).collect()
}

pub fn read_manifest(root: &Path) -> Result<SplitManifest> {
    let path = root.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    SplitManifest::parse(&text).map_err(|e| data_err!("{}: {e}", path.display()))
}

pub fn write_manifest(root: &Path, manifest: &SplitManifest) -> Result<()> {
    write_file(&root.join(MANIFEST_FILE), manifest.render().as_bytes())
}

pub fn write_sample(root: &Path, sample: &Sample) -> Result<()> {
    for dir in [IMAGES_DIR, ELEMENT_MASKS_DIR, DEFECT_MASKS_DIR] {
        let d = root.join(dir);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    write_file(&sample_path(root, IMAGES_DIR, sample.id), &encode_image_png(&sample.image)?)?;
    write_file(
        &sample_path(root, ELEMENT_MASKS_DIR, sample.id),
        &encode_mask_png(&sample.element_mask)?,
    )?;
    write_file(
        &sample_path(root, DEFECT_MASKS_DIR, sample.id),
        &encode_mask_png(&sample.defect_mask)?,
    )
}

/// Writes all samples plus the manifest. Images are quantized to 8 bits.
pub fn write_dataset(root: &Path, samples: &[Sample], manifest: &SplitManifest) -> Result<()> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    for s in samples {
        write_sample(root, s)?;
    }
    write_manifest(root, manifest)
}
