//! Observation rendering: the top-down heightmap, the in-hand crop, and
//! 16-bit PNG export.

use crate::geometry::polygon::{self, Vec2};
use crate::geometry::GridSpec;
use crate::sim::WorldState;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: png encoding failed: {source}")]
    Encode { path: PathBuf, source: png::EncodingError },
    #[error("{path}: png decoding failed: {source}")]
    Decode { path: PathBuf, source: png::DecodingError },
    #[error("{path}: expected a square 16-bit grayscale image, got {detail}")]
    Format { path: PathBuf, detail: String },
}

/// Square grid of heights in meters, row-major, row 0 at the low-y edge.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    size: usize,
    data: Vec<f32>,
}

/// Top-down view of the whole workspace.
pub type Heightmap = DepthImage;
/// Crop of the previous heightmap around the last pick.
pub type InHandImage = DepthImage;

impl DepthImage {
    pub fn zeros(size: usize) -> Self {
        DepthImage { size, data: vec![0.0; size * size] }
    }

    /// Wrap row-major data; `None` if the length is not `size²`.
    pub fn from_vec(size: usize, data: Vec<f32>) -> Option<Self> {
        (data.len() == size * size).then_some(DepthImage { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.size + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f32) {
        self.data[row * self.size + col] = v;
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(0.0, f32::max)
    }

    /// Continuous-coordinate sample with pixel centers at integer
    /// coordinates. Coordinates past the outermost centers clamp to the edge.
    pub fn bilinear(&self, row: f64, col: f64) -> f64 {
        let last = (self.size - 1) as f64;
        let (r, c) = (row.clamp(0.0, last), col.clamp(0.0, last));
        let (r0, c0) = (r.floor() as usize, c.floor() as usize);
        let (r1, c1) = ((r0 + 1).min(self.size - 1), (c0 + 1).min(self.size - 1));
        let (fr, fc) = (r - r0 as f64, c - c0 as f64);
        let v = |rr: usize, cc: usize| self.get(rr, cc) as f64;
        let top = v(r0, c0) * (1.0 - fc) + v(r0, c1) * fc;
        let bottom = v(r1, c0) * (1.0 - fc) + v(r1, c1) * fc;
        top * (1.0 - fr) + bottom * fr
    }
}

/// Rasterize every object in the world (the held one is not in the world)
/// by sampling its top surface at each pixel center.
pub fn render_heightmap(world: &WorldState, grid: &GridSpec) -> Heightmap {
    let mut map = DepthImage::zeros(grid.size);
    let pitch = grid.pitch();
    let n = grid.size as isize;
    let to_index = |v: f64, lo: f64| ((v - lo) / pitch - 0.5).ceil() as isize;
    for obj in &world.objects {
        let (lo, hi) = polygon::aabb(&obj.footprint());
        let c0 = to_index(lo.x, grid.x_min).clamp(0, n);
        let c1 = (to_index(hi.x, grid.x_min) + 1).clamp(0, n);
        let r0 = to_index(lo.y, grid.y_min).clamp(0, n);
        let r1 = (to_index(hi.y, grid.y_min) + 1).clamp(0, n);
        for row in r0 as usize..r1 as usize {
            for col in c0 as usize..c1 as usize {
                if let Some(h) = obj.height_at(grid.pixel_to_world(row, col)) {
                    let h = h as f32;
                    if h > map.get(row, col) {
                        map.set(row, col, h);
                    }
                }
            }
        }
    }
    map
}

/// Crop of `prev` centered at the pick point and rotated by `-theta`, so
/// the grasp axis is always along the crop's column direction. Sampling is
/// bilinear; samples outside the workspace read 0.
pub fn render_in_hand(prev: &Heightmap, grid: &GridSpec, pick: (f64, f64, f64), size: usize) -> InHandImage {
    let (x, y, theta) = pick;
    let pitch = grid.pitch();
    let center = Vec2::new(x, y);
    let half = size as f64 / 2.0;
    let mut out = DepthImage::zeros(size);
    for row in 0..size {
        for col in 0..size {
            let local = Vec2::new((col as f64 + 0.5 - half) * pitch, (row as f64 + 0.5 - half) * pitch);
            let p = center + local.rotate(theta);
            if p.x < grid.x_min || p.x > grid.x_max || p.y < grid.y_min || p.y > grid.y_max {
                continue;
            }
            let v = prev.bilinear((p.y - grid.y_min) / pitch - 0.5, (p.x - grid.x_min) / pitch - 0.5);
            out.set(row, col, v as f32);
        }
    }
    out
}

/// Write a 16-bit grayscale PNG with pixel value `round(h / z_max * 65535)`.
pub fn export_png(map: &DepthImage, z_max: f64, path: &Path) -> Result<(), RenderError> {
    let io_err = |source| RenderError::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), map.size as u32, map.size as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Sixteen);
    let enc_err = |source| RenderError::Encode { path: path.to_path_buf(), source };
    let mut writer = encoder.write_header().map_err(enc_err)?;
    let bytes: Vec<u8> = map.data.iter().flat_map(|&h| quantize(h, z_max).to_be_bytes()).collect();
    writer.write_image_data(&bytes).map_err(enc_err)?;
    writer.finish().map_err(enc_err)
}

/// Inverse of [`export_png`], exact up to `z_max / 65535`.
pub fn import_png(path: &Path, z_max: f64) -> Result<DepthImage, RenderError> {
    let file = File::open(path).map_err(|source| RenderError::Io { path: path.to_path_buf(), source })?;
    let dec_err = |source| RenderError::Decode { path: path.to_path_buf(), source };
    let mut reader = png::Decoder::new(BufReader::new(file)).read_info().map_err(dec_err)?;
    let info = reader.info();
    let (w, h, color, depth) = (info.width, info.height, info.color_type, info.bit_depth);
    if w != h || color != png::ColorType::Grayscale || depth != png::BitDepth::Sixteen {
        return Err(RenderError::Format { path: path.to_path_buf(), detail: format!("{w}x{h} {color:?} {depth:?}") });
    }
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let frame = reader.next_frame(&mut buf).map_err(dec_err)?;
    let data = buf[..frame.buffer_size()]
        .chunks_exact(2)
        .map(|b| (u16::from_be_bytes([b[0], b[1]]) as f64 / 65535.0 * z_max) as f32)
        .collect();
    Ok(DepthImage { size: w as usize, data })
}

/// PNG pixel value for height `h`.
pub fn quantize(h: f32, z_max: f64) -> u16 {
    (h as f64 / z_max * 65535.0).round().clamp(0.0, 65535.0) as u16
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Pose, Shape};
    use crate::sim::{Bounds, Category};

    fn grid() -> GridSpec {
        GridSpec::new(0.25, 0.65, -0.2, 0.2, 128).unwrap()
    }

    fn cube_world() -> WorldState {
        let mut w = WorldState::new(0, Bounds::default(), 0.08, true);
        w.spawn(Shape::cube(0.03), Pose::new(0.45, 0.0, 0.015, 0.0), Category::Block, true);
        w
    }

    #[test]
    fn empty_world_is_zero() {
        let w = WorldState::new(0, Bounds::default(), 0.08, true);
        assert!(render_heightmap(&w, &grid()).is_zero());
    }

    #[test]
    fn centered_cube_square() {
        let map = render_heightmap(&cube_world(), &grid());
        let lit: Vec<(usize, usize)> =
            (0..128).flat_map(|r| (0..128).map(move |c| (r, c))).filter(|&(r, c)| map.get(r, c) > 0.0).collect();
        let rows: std::collections::BTreeSet<_> = lit.iter().map(|p| p.0).collect();
        let cols: std::collections::BTreeSet<_> = lit.iter().map(|p| p.1).collect();
        assert!((9..=10).contains(&rows.len()) && rows.len() == cols.len());
        assert_eq!(lit.len(), rows.len() * cols.len());
        assert!(rows.contains(&63) && rows.contains(&64));
        assert!(lit.iter().all(|&(r, c)| map.get(r, c) == 0.03));
    }

    #[test]
    fn in_hand_crop_of_cube() {
        let w = cube_world();
        let map = render_heightmap(&w, &grid());
        let crop = render_in_hand(&map, &grid(), (0.45, 0.0, 0.0), 24);
        let lit = crop.as_slice().iter().filter(|&&v| v > 0.0).count();
        assert!((81..=100).contains(&lit), "{lit}");
        assert_eq!(crop.get(12, 12), 0.03);
        assert_eq!(crop.get(0, 0), 0.0);
        let empty = WorldState::new(0, Bounds::default(), 0.08, true);
        assert!(render_in_hand(&render_heightmap(&empty, &grid()), &grid(), (0.45, 0.0, 0.3), 24).is_zero());
    }

    #[test]
    fn quarter_turn_crop_is_transpose_like() {
        let mut w = WorldState::new(0, Bounds::default(), 0.08, true);
        w.spawn(Shape::cuboid(0.06, 0.03, 0.03), Pose::new(0.45, 0.0, 0.015, 0.0), Category::Brick, true);
        let map = render_heightmap(&w, &grid());
        let a = render_in_hand(&map, &grid(), (0.45, 0.0, 0.0), 24);
        let b = render_in_hand(&map, &grid(), (0.45, 0.0, std::f64::consts::FRAC_PI_2), 24);
        let count = |m: &DepthImage, horizontal: bool| {
            (0..24).filter(|&i| if horizontal { m.get(12, i) > 0.0 } else { m.get(i, 12) > 0.0 }).count()
        };
        assert!(count(&a, true) > count(&a, false));
        assert!(count(&b, false) > count(&b, true));
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.png");
        let map = render_heightmap(&cube_world(), &grid());
        export_png(&map, 1.0, &path).unwrap();
        let back = import_png(&path, 1.0).unwrap();
        assert_eq!(back.size(), 128);
        let err = map.as_slice().iter().zip(back.as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f32::max);
        assert!(err as f64 <= 1.0 / 65535.0);
        assert_eq!(quantize(0.03, 1.0), 1966);
        assert_eq!(quantize(0.0, 1.0), 0);
    }

    #[test]
    fn missing_directory_names_path() {
        let err = export_png(&DepthImage::zeros(4), 1.0, Path::new("/nonexistent/dir/x.png")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/x.png"));
    }
}
