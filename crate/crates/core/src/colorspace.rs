//! 8-bit RGB images and the decorrelated lαβ (log-LMS opponent) space.
//!
//! The forward transform is the classic three step chain: RGB is mapped
//! to LMS cone space, each cone response is taken to base-10 log (after a
//! small floor so black stays finite), and the log responses are rotated
//! into one achromatic and two opponent channels. All arithmetic is `f64`.

use std::sync::LazyLock;

use crate::error::{Error, Result};

/// Floor applied to LMS responses before the logarithm.
pub const LOG_FLOOR: f64 = 1e-6;

/// RGB to LMS cone response matrix (Ruderman / Reinhard constants).
pub const RGB_TO_LMS_RAW: [[f64; 3]; 3] = [
    [0.3811, 0.5783, 0.0402],
    [0.1967, 0.7244, 0.0782],
    [0.0241, 0.1288, 0.8444],
];

/// [`RGB_TO_LMS_RAW`] with each row scaled to sum to one, so that the
/// achromatic axis R = G = B maps onto equal cone responses.
pub static RGB_TO_LMS: LazyLock<[[f64; 3]; 3]> = LazyLock::new(|| {
    let mut m = RGB_TO_LMS_RAW;
    for row in &mut m {
        let sum: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    m
});

static LMS_TO_RGB: LazyLock<[[f64; 3]; 3]> = LazyLock::new(|| invert3(&RGB_TO_LMS));

const INV_SQRT3: f64 = 0.577_350_269_189_625_8;
const INV_SQRT6: f64 = 0.408_248_290_463_863;
const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Channel index into a [`LabImage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    L = 0,
    Alpha = 1,
    Beta = 2,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::L, Channel::Alpha, Channel::Beta];
}

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "zero-sized image {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Image filled with a single color.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        self.pixels[y * self.width + x] = rgb;
    }

    pub fn into_pixels(self) -> Vec<[u8; 3]> {
        self.pixels
    }
}

/// Planar lαβ image; plane `c` holds channel `c` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    width: usize,
    height: usize,
    planes: [Vec<f64>; 3],
}

impl LabImage {
    pub fn new(width: usize, height: usize, planes: [Vec<f64>; 3]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "zero-sized image {width}x{height}"
            )));
        }
        let n = width * height;
        if planes.iter().any(|p| p.len() != n) {
            return Err(Error::InvalidImage(format!(
                "plane lengths {:?} do not match {width}x{height}",
                planes.iter().map(Vec::len).collect::<Vec<_>>()
            )));
        }
        if planes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidImage("non-finite lαβ value".into()));
        }
        Ok(Self {
            width,
            height,
            planes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn plane(&self, channel: Channel) -> &[f64] {
        &self.planes[channel as usize]
    }

    pub fn planes(&self) -> &[Vec<f64>; 3] {
        &self.planes
    }

    pub fn into_planes(self) -> [Vec<f64>; 3] {
        self.planes
    }

    /// The three channel values of pixel `index`.
    pub fn color(&self, index: usize) -> [f64; 3] {
        [
            self.planes[0][index],
            self.planes[1][index],
            self.planes[2][index],
        ]
    }
}

/// Forward transform of a single 8-bit pixel.
pub fn rgb_pixel_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let c = rgb.map(|v| f64::from(v) / 255.0);
    let m = &*RGB_TO_LMS;
    let lms = mul3(m, c);
    let log = lms.map(|v| v.max(LOG_FLOOR).log10());
    [
        INV_SQRT3 * (log[0] + log[1] + log[2]),
        INV_SQRT6 * (log[0] + log[1] - 2.0 * log[2]),
        INV_SQRT2 * (log[0] - log[1]),
    ]
}

/// Inverse transform of a single lαβ value, clamped to the 8-bit gamut.
pub fn lab_pixel_to_rgb(lab: [f64; 3]) -> [u8; 3] {
    let a = lab[0] * INV_SQRT3;
    let b = lab[1] * INV_SQRT6;
    let c = lab[2] * INV_SQRT2;
    let log = [a + b + c, a + b - c, a - 2.0 * b];
    let lms = log.map(|v| 10f64.powf(v));
    let rgb = mul3(&LMS_TO_RGB, lms);
    rgb.map(|v| {
        let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        (v * 255.0).round() as u8
    })
}

pub fn rgb_to_lab(img: &RgbImage) -> LabImage {
    let n = img.len();
    let mut planes = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (i, &px) in img.pixels().iter().enumerate() {
        let lab = rgb_pixel_to_lab(px);
        for c in 0..3 {
            planes[c][i] = lab[c];
        }
    }
    LabImage {
        width: img.width,
        height: img.height,
        planes,
    }
}

pub fn lab_to_rgb(img: &LabImage) -> RgbImage {
    let pixels = (0..img.len()).map(|i| lab_pixel_to_rgb(img.color(i))).collect();
    RgbImage {
        width: img.width,
        height: img.height,
        pixels,
    }
}

fn mul3(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    let det = m[0][0] * adj[0][0] + m[0][1] * adj[1][0] + m[0][2] * adj[2][0];
    adj.map(|row| row.map(|v| v / det))
}
