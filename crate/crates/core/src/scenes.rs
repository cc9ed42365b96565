//! Small synthetic scenes with known ground truth.
//!
//! Each scene is a random-dot texture with a background layer and one
//! nearer rectangular layer, rendered into the target image(s) far to near
//! so the near layer occludes. Uncovered target pixels get fresh texture.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsi::MatchDirection;
use crate::error::Result;
use crate::grid_model::{DisparityField, LabelSpace, PixelGrid};

#[derive(Clone, Debug)]
pub struct Scene {
    pub name: &'static str,
    pub reference: PixelGrid,
    pub target: PixelGrid,
    /// Second target for triplet (composite) matching, displaced the other way.
    pub mirror: Option<PixelGrid>,
    pub space: LabelSpace,
    pub direction: MatchDirection,
    pub truth: DisparityField,
}

struct Layer {
    rect: Option<(usize, usize, usize, usize)>,
    offset: (i32, i32),
}

impl Layer {
    fn covers(&self, x: usize, y: usize) -> bool {
        match self.rect {
            None => true,
            Some((x0, y0, x1, y1)) => (x0..x1).contains(&x) && (y0..y1).contains(&y),
        }
    }
}

fn texture(rng: &mut ChaCha8Rng, width: usize, height: usize, channels: usize) -> Vec<u8> {
    (0..width * height * channels).map(|_| rng.random()).collect()
}

/// Copies every reference pixel of each layer to `(x, y) + sign·offset`.
fn render(reference: &[u8], width: usize, height: usize, channels: usize, layers: &[Layer], sign: i32, fill: Vec<u8>) -> Vec<u8> {
    let mut out = fill;
    for layer in layers {
        for y in 0..height {
            for x in 0..width {
                if !layer.covers(x, y) {
                    continue;
                }
                let tx = x as i32 + sign * layer.offset.0;
                let ty = y as i32 + sign * layer.offset.1;
                if tx < 0 || ty < 0 || tx >= width as i32 || ty >= height as i32 {
                    continue;
                }
                let (src, dst) = ((y * width + x) * channels, (ty as usize * width + tx as usize) * channels);
                out[dst..dst + channels].copy_from_slice(&reference[src..src + channels]);
            }
        }
    }
    out
}

fn truth(space: &LabelSpace, width: usize, height: usize, layers: &[Layer]) -> Result<DisparityField> {
    let mut labels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let top = layers.iter().rev().find(|l| l.covers(x, y)).expect("background covers all");
            let offsets = match space.dims() {
                1 => vec![top.offset.0],
                _ => vec![top.offset.0, top.offset.1],
            };
            labels.push(space.index(&offsets)? as u32);
        }
    }
    DisparityField::new(width, height, labels)
}

#[allow(clippy::too_many_arguments)]
fn build(
    name: &'static str,
    seed: u64,
    (width, height, channels): (usize, usize, usize),
    space: LabelSpace,
    direction: MatchDirection,
    layers: &[Layer],
    with_mirror: bool,
) -> Result<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reference = texture(&mut rng, width, height, channels);
    let sign = match direction {
        MatchDirection::Forward => 1,
        MatchDirection::Backward => -1,
    };
    let fill = texture(&mut rng, width, height, channels);
    let target = render(&reference, width, height, channels, layers, sign, fill);
    let mirror = if with_mirror {
        let fill = texture(&mut rng, width, height, channels);
        let samples = render(&reference, width, height, channels, layers, -sign, fill);
        Some(PixelGrid::new(width, height, channels, samples)?)
    } else {
        None
    };
    Ok(Scene {
        name,
        truth: truth(&space, width, height, layers)?,
        reference: PixelGrid::new(width, height, channels, reference)?,
        target: PixelGrid::new(width, height, channels, target)?,
        mirror,
        space,
        direction,
    })
}

/// Grayscale rectified pair, disparities 2 (background) and 6 (box).
pub fn stereo_gray() -> Result<Scene> {
    build(
        "stereo-gray",
        11,
        (40, 24, 1),
        LabelSpace::stereo(9)?,
        MatchDirection::Backward,
        &[
            Layer { rect: None, offset: (2, 0) },
            Layer { rect: Some((14, 6, 30, 18)), offset: (6, 0) },
        ],
        false,
    )
}

/// RGB rectified pair, disparities 1 and 5.
pub fn stereo_color() -> Result<Scene> {
    build(
        "stereo-color",
        12,
        (36, 20, 3),
        LabelSpace::stereo(7)?,
        MatchDirection::Backward,
        &[
            Layer { rect: None, offset: (1, 0) },
            Layer { rect: Some((8, 4, 22, 15)), offset: (5, 0) },
        ],
        false,
    )
}

/// Triplet: middle view with right and left neighbours.
pub fn stereo_triplet() -> Result<Scene> {
    build(
        "stereo-triplet",
        13,
        (32, 20, 1),
        LabelSpace::stereo(7)?,
        MatchDirection::Backward,
        &[
            Layer { rect: None, offset: (1, 0) },
            Layer { rect: Some((10, 5, 22, 15)), offset: (4, 0) },
        ],
        true,
    )
}

/// Two frames: background drifts by (0, 1), a box moves by (2, −1).
pub fn motion_pair() -> Result<Scene> {
    build(
        "motion-pair",
        14,
        (28, 20, 1),
        LabelSpace::motion(3, 2)?,
        MatchDirection::Forward,
        &[
            Layer { rect: None, offset: (0, 1) },
            Layer { rect: Some((8, 6, 18, 14)), offset: (2, -1) },
        ],
        false,
    )
}

pub fn bundled() -> Result<Vec<Scene>> {
    Ok(vec![stereo_gray()?, stereo_color()?, stereo_triplet()?, motion_pair()?])
}
