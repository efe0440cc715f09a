use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::frame::{FrameTensor, RgbFrame};

use super::augment::{augment, ZOOM_RANGE};
use super::scene::{render_frame, BackgroundStyle, SceneSpec};
use super::{mix_seed, LabeledSample};

/// Ranges that scene parameters are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneVariety {
    pub styles: Vec<BackgroundStyle>,
    pub luminance: (f64, f64),
    pub illumination: (f64, f64),
    pub noise_sigma: (f64, f64),
    /// Drop radius as a fraction of the frame size.
    pub radius_fraction: (f64, f64),
}

impl Default for SceneVariety {
    fn default() -> Self {
        Self {
            styles: vec![
                BackgroundStyle::Flat,
                BackgroundStyle::VerticalGradient,
                BackgroundStyle::HorizontalGradient,
                BackgroundStyle::Stripes,
                BackgroundStyle::Speckle,
                BackgroundStyle::Blocks,
            ],
            luminance: (0.1, 0.5),
            illumination: (0.4, 1.3),
            noise_sigma: (0.0, 0.05),
            radius_fraction: (0.04, 0.06),
        }
    }
}

impl SceneVariety {
    /// Backgrounds never used by the default training variety.
    pub fn held_out() -> Self {
        Self {
            styles: vec![BackgroundStyle::Checker],
            ..Self::default()
        }
    }

    /// Draws a scene with the dripper at `dripper`.
    pub fn draw<R: Rng + ?Sized>(&self, size: usize, dripper: (f64, f64), rng: &mut R) -> SceneSpec {
        let pick = |rng: &mut R, (lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };
        let style = self.styles[rng.random_range(0..self.styles.len())];
        SceneSpec {
            size,
            style,
            base_luminance: pick(rng, self.luminance),
            illumination: pick(rng, self.illumination),
            dripper,
            drop_radius: pick(rng, self.radius_fraction) * size as f64,
            noise_sigma: pick(rng, self.noise_sigma),
            seed: rng.random(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub count: usize,
    /// Frame size W.
    pub size: usize,
    /// Grid size S.
    pub grid: usize,
    pub variety: SceneVariety,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(count: usize, size: usize, grid: usize, seed: u64) -> Self {
        Self {
            count,
            size,
            grid,
            variety: SceneVariety::default(),
            seed,
        }
    }
}

/// One `manifest.jsonl` line. `seed` regenerates the frame exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub file: String,
    pub x: f64,
    pub y: f64,
    pub s: u8,
    #[serde(rename = "W")]
    pub w: usize,
    #[serde(rename = "S")]
    pub grid: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub spec: DatasetSpec,
    pub records: Vec<SampleRecord>,
}

/// Plans a dataset: balanced states (counts differ by at most one) and drop
/// positions stratified over the grid cells, so every cell receives the
/// same number of samples up to one per full pass.
pub fn build_dataset(spec: &DatasetSpec) -> Result<Manifest> {
    if spec.count < 2 {
        return Err(Error::Param("a dataset needs at least 2 samples".into()));
    }
    if spec.grid == 0 || spec.size % spec.grid != 0 {
        return Err(Error::Param(format!(
            "frame size {} is not a multiple of grid {}",
            spec.size, spec.grid
        )));
    }
    if spec.variety.styles.is_empty() {
        return Err(Error::Param("scene variety lists no background styles".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut states: Vec<u8> = (0..spec.count).map(|n| (n % 2) as u8).collect();
    states.shuffle(&mut rng);

    let cells = spec.grid * spec.grid;
    let cell_px = (spec.size / spec.grid) as f64;
    let mut order: Vec<usize> = Vec::new();
    let mut records = Vec::with_capacity(spec.count);
    for (n, s) in states.into_iter().enumerate() {
        if n % cells == 0 {
            order = (0..cells).collect();
            order.shuffle(&mut rng);
        }
        let cell = order[n % cells];
        let (ci, cj) = (cell % spec.grid, cell / spec.grid);
        let x = (ci as f64 + rng.random::<f64>()) * cell_px;
        let y = (cj as f64 + rng.random::<f64>()) * cell_px;
        records.push(SampleRecord {
            file: format!("{n:06}.ppm"),
            x: x.min(spec.size as f64 - 1e-6),
            y: y.min(spec.size as f64 - 1e-6),
            s,
            w: spec.size,
            grid: spec.grid,
            seed: mix_seed(spec.seed, n as u64 + 1),
        });
    }
    Ok(Manifest {
        spec: spec.clone(),
        records,
    })
}

/// Renders one record: a scene drawn from its seed, a base frame with the
/// drop placed so that a random zoom in `[0.9, 1.1]` and crop bring it to
/// the record's `(x, y)`.
pub fn materialize(record: &SampleRecord, variety: &SceneVariety) -> Result<LabeledSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(record.seed);
    let w = record.w as f64;
    let zoom = rng.random_range(ZOOM_RANGE.0..=ZOOM_RANGE.1);
    // Offsets that keep the crop on the zoomed image (or centred on it when
    // zoomed out), further limited so the un-zoomed drop stays in frame.
    let offset = |rng: &mut ChaCha8Rng, target: f64| {
        let span = (zoom - 1.0) * w;
        let (lo, hi) = (span.min(0.0), span.max(0.0));
        let lo = lo.max(-target);
        let hi = hi.min(zoom * w - target - 1e-6);
        if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        }
    };
    let ox = offset(&mut rng, record.x);
    let oy = offset(&mut rng, record.y);
    let base_x = ((record.x + ox) / zoom).clamp(0.0, w - 1e-6);
    let base_y = ((record.y + oy) / zoom).clamp(0.0, w - 1e-6);
    let phase = rng.random::<f64>();
    let mut scene = variety.draw(record.w, (w / 2.0, w / 2.0), &mut rng);
    scene.seed = mix_seed(record.seed, 0xd409);
    let frame = render_frame(&scene, base_x, base_y, record.s, phase)?;
    let base = LabeledSample {
        frame,
        x: base_x,
        y: base_y,
        s: record.s,
    };
    let mut out = augment(&base, zoom, (ox, oy))?;
    // the manifest position is authoritative; the two differ by rounding
    out.x = record.x;
    out.y = record.y;
    Ok(out)
}

/// Random access to labeled training samples.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;
    fn record(&self, idx: usize) -> &SampleRecord;
    fn sample(&self, idx: usize) -> Result<LabeledSample>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Samples regenerated from a manifest on demand.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub manifest: Manifest,
}

impl SynthDataset {
    pub fn new(spec: &DatasetSpec) -> Result<Self> {
        Ok(Self {
            manifest: build_dataset(spec)?,
        })
    }

    pub fn from_records(spec: DatasetSpec, records: Vec<SampleRecord>) -> Self {
        Self {
            manifest: Manifest { spec, records },
        }
    }
}

impl SampleSource for SynthDataset {
    fn len(&self) -> usize {
        self.manifest.records.len()
    }
    fn record(&self, idx: usize) -> &SampleRecord {
        &self.manifest.records[idx]
    }
    fn sample(&self, idx: usize) -> Result<LabeledSample> {
        materialize(&self.manifest.records[idx], &self.manifest.spec.variety)
    }
}

/// Samples read from a dataset directory written by [`write_dataset`].
#[derive(Debug, Clone)]
pub struct DiskDataset {
    pub dir: PathBuf,
    pub records: Vec<SampleRecord>,
}

impl DiskDataset {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let records = read_manifest(dir.join(MANIFEST_FILE))?;
        Ok(Self { dir, records })
    }
}

impl SampleSource for DiskDataset {
    fn len(&self) -> usize {
        self.records.len()
    }
    fn record(&self, idx: usize) -> &SampleRecord {
        &self.records[idx]
    }
    fn sample(&self, idx: usize) -> Result<LabeledSample> {
        let r = &self.records[idx];
        let rgb = RgbFrame::read_ppm(self.dir.join(&r.file))?;
        let data = rgb.data.iter().map(|&b| b as f32 / 255.0).collect();
        Ok(LabeledSample {
            frame: FrameTensor::new(rgb.width, rgb.height, data)?,
            x: r.x,
            y: r.y,
            s: r.s,
        })
    }
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";

pub fn write_manifest(path: impl AsRef<Path>, records: &[SampleRecord]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<SampleRecord>> {
    let file = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for line in file.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Writes every frame as PPM plus `manifest.jsonl` into `dir`.
pub fn write_dataset(dir: impl AsRef<Path>, manifest: &Manifest, exec: Exec) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let results = exec.map_range(manifest.records.len(), |n| -> Result<()> {
        let r = &manifest.records[n];
        let sample = materialize(r, &manifest.spec.variety)?;
        sample.frame.to_rgb().write_ppm(dir.join(&r.file))
    });
    results.into_iter().collect::<Result<()>>()?;
    write_manifest(dir.join(MANIFEST_FILE), &manifest.records)
}
