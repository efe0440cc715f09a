use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::FrameTensor;

use super::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundStyle {
    Flat,
    VerticalGradient,
    HorizontalGradient,
    Stripes,
    Speckle,
    /// Random flat tiles with hard edges.
    Blocks,
    Checker,
}

impl BackgroundStyle {
    pub const ALL: [BackgroundStyle; 7] = [
        BackgroundStyle::Flat,
        BackgroundStyle::VerticalGradient,
        BackgroundStyle::HorizontalGradient,
        BackgroundStyle::Stripes,
        BackgroundStyle::Speckle,
        BackgroundStyle::Blocks,
        BackgroundStyle::Checker,
    ];
}

/// A static drip-chamber scene. `seed` fixes the background texture and
/// tint; per-frame sensor noise is keyed separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Frames are `size × size`.
    pub size: usize,
    pub style: BackgroundStyle,
    /// Mean background albedo in `[0, 1]`.
    pub base_luminance: f64,
    /// Global light gain in `[0.2, 1.5]`.
    pub illumination: f64,
    /// Drop centre when the scene is used for a stream.
    pub dripper: (f64, f64),
    /// Nominal drop radius in pixels.
    pub drop_radius: f64,
    /// Std-dev of additive Gaussian sensor noise, `[0, 0.1]`.
    pub noise_sigma: f64,
    pub seed: u64,
}

const DROP_ALBEDO: f64 = 0.9;
const DROP_RIM_DARKENING: f64 = 0.3;
const HIGHLIGHT_ALBEDO: f64 = 1.25;
const NOZZLE_ALBEDO: f64 = 0.5;

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Param(m));
        if self.size == 0 {
            return fail("scene size must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.base_luminance) {
            return fail(format!("base luminance {} outside [0, 1]", self.base_luminance));
        }
        if !(0.2..=1.5).contains(&self.illumination) {
            return fail(format!("illumination gain {} outside [0.2, 1.5]", self.illumination));
        }
        if !(0.0..=0.1).contains(&self.noise_sigma) {
            return fail(format!("noise sigma {} outside [0, 0.1]", self.noise_sigma));
        }
        if !(self.drop_radius > 0.0) {
            return fail("drop radius must be positive".into());
        }
        let (x, y) = self.dripper;
        let r = self.drop_radius;
        let w = self.size as f64;
        if x < r || y < r || x > w - r || y > w - r {
            return fail(format!(
                "dripper ({x}, {y}) is not inside the {w}px frame with a {r}px margin"
            ));
        }
        Ok(())
    }
}

/// Drop outline for a state and growth phase: an axis-aligned ellipse
/// centred on the drop position. State 0 is a flat bulge, state 1 a tall
/// rounded drop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropShape {
    pub rx: f64,
    pub ry: f64,
}

impl DropShape {
    pub fn new(radius: f64, state: u8, phase: f64) -> Self {
        let phase = phase.clamp(0.0, 1.0);
        if state == 0 {
            let rx = radius * (0.45 + 0.2 * phase);
            Self { rx, ry: 0.55 * rx }
        } else {
            let rx = radius * (0.85 + 0.15 * phase);
            Self { rx, ry: 1.3 * rx }
        }
    }
}

struct Texture {
    tint: [f64; 3],
    period: f64,
    angle_phase: f64,
    speckle: Vec<f64>,
    speckle_cell: usize,
}

impl Texture {
    fn new(scene: &SceneSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(scene.seed, 0x7e47));
        let tint = [
            rng.random_range(0.85..1.15),
            rng.random_range(0.85..1.15),
            rng.random_range(0.85..1.15),
        ];
        let period = scene.size as f64 * rng.random_range(0.06..0.2);
        let angle_phase = rng.random_range(0.0..std::f64::consts::TAU);
        let speckle_cell = (scene.size / 16).max(2);
        let cells = scene.size / speckle_cell + 2;
        let speckle = (0..cells * cells).map(|_| rng.random_range(0.6..1.4)).collect();
        Self {
            tint,
            period,
            angle_phase,
            speckle,
            speckle_cell,
        }
    }

    fn albedo(&self, scene: &SceneSpec, px: f64, py: f64) -> f64 {
        let w = scene.size as f64;
        let l = scene.base_luminance;
        match scene.style {
            BackgroundStyle::Flat => l,
            BackgroundStyle::VerticalGradient => l * (0.6 + 0.8 * py / w),
            BackgroundStyle::HorizontalGradient => l * (1.4 - 0.8 * px / w),
            BackgroundStyle::Stripes => {
                l * (1.0 + 0.3 * (std::f64::consts::TAU * px / self.period + self.angle_phase).sin())
            }
            BackgroundStyle::Speckle => {
                // bilinear value noise
                let c = self.speckle_cell as f64;
                let cells = (self.speckle.len() as f64).sqrt() as usize;
                let (gx, gy) = (px / c, py / c);
                let (x0, y0) = (gx.floor() as usize, gy.floor() as usize);
                let (fx, fy) = (gx - x0 as f64, gy - y0 as f64);
                let at = |x: usize, y: usize| self.speckle[y.min(cells - 1) * cells + x.min(cells - 1)];
                let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
                let bot = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
                l * (top * (1.0 - fy) + bot * fy)
            }
            BackgroundStyle::Blocks => {
                let p = (self.period * 0.8).max(2.0);
                let (bx, by) = ((px / p).floor() as i64 as u64, (py / p).floor() as i64 as u64);
                let h = mix_seed(scene.seed, bx.wrapping_mul(0x1_0000_0001) ^ by ^ 0xb10c);
                l * (0.6 + 0.8 * (h >> 11) as f64 / (1u64 << 53) as f64)
            }
            BackgroundStyle::Checker => {
                let p = (self.period * 0.7).max(2.0);
                let parity = ((px / p).floor() as i64 + (py / p).floor() as i64).rem_euclid(2);
                l * if parity == 0 { 0.75 } else { 1.25 }
            }
        }
    }
}

fn check_position(scene: &SceneSpec, x: f64, y: f64) -> Result<()> {
    let w = scene.size as f64;
    if !(0.0..w).contains(&x) || !(0.0..w).contains(&y) {
        return Err(Error::Param(format!("drop position ({x}, {y}) outside the {w}px frame")));
    }
    Ok(())
}

/// Linear radiance (albedo × illumination + noise) before clamping.
/// Noise is drawn from `noise_key`, so a stream can vary it per frame while
/// the background stays fixed.
pub fn render_radiance(scene: &SceneSpec, x: f64, y: f64, state: u8, phase: f64, noise_key: u64) -> Result<Vec<f32>> {
    check_position(scene, x, y)?;
    if state > 1 {
        return Err(Error::Param(format!("drop state must be 0 or 1, got {state}")));
    }
    let size = scene.size;
    let tex = Texture::new(scene);
    let shape = DropShape::new(scene.drop_radius, state, phase);
    let tip_y = y - shape.ry;
    let nozzle_half = 0.45 * scene.drop_radius;
    let (hx, hy) = (x - 0.35 * shape.rx, y - 0.35 * shape.ry);
    let hr = 0.28 * shape.rx;

    let gain = scene.illumination;
    let mut out = vec![0f32; size * size * 3];
    for py in 0..size {
        for px in 0..size {
            let (fx, fy) = (px as f64 + 0.5, py as f64 + 0.5);
            let (dx, dy) = ((fx - x) / shape.rx, (fy - y) / shape.ry);
            let rho2 = dx * dx + dy * dy;
            let (albedo, tinted) = if rho2 <= 1.0 {
                let highlight = (fx - hx).powi(2) + (fy - hy).powi(2) <= hr * hr;
                let a = if highlight {
                    HIGHLIGHT_ALBEDO
                } else {
                    DROP_ALBEDO - DROP_RIM_DARKENING * rho2
                };
                (a, false)
            } else if fy <= tip_y && (fx - x).abs() <= nozzle_half {
                (NOZZLE_ALBEDO, false)
            } else {
                (tex.albedo(scene, fx, fy), true)
            };
            let o = (py * size + px) * 3;
            for ch in 0..3 {
                let a = if tinted { albedo * tex.tint[ch] } else { albedo };
                out[o + ch] = (gain * a) as f32;
            }
        }
    }
    if scene.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(scene.seed, noise_key ^ 0x5eed_0f_4015e));
        let normal = Normal::new(0.0, scene.noise_sigma).expect("valid sigma");
        for v in out.iter_mut() {
            *v += normal.sample(&mut rng) as f32;
        }
    }
    Ok(out)
}

/// Renders a frame with the drop centred at `(x, y)` in state `state`;
/// `phase ∈ [0, 1]` grows the drop within that state.
pub fn render_frame(scene: &SceneSpec, x: f64, y: f64, state: u8, phase: f64) -> Result<FrameTensor> {
    render_frame_keyed(scene, x, y, state, phase, 0)
}

pub fn render_frame_keyed(
    scene: &SceneSpec,
    x: f64,
    y: f64,
    state: u8,
    phase: f64,
    noise_key: u64,
) -> Result<FrameTensor> {
    let data = render_radiance(scene, x, y, state, phase, noise_key)?
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    FrameTensor::new(scene.size, scene.size, data)
}
