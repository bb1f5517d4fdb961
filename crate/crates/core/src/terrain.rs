//! Grayscale map ingestion, 1-D k-means binarization and world-frame
//! validity queries.
//!
//! The world frame has its origin at the corner of cell (row 0, col 0);
//! `x` runs along columns and `y` along rows. Depth plays no part in
//! validity.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TerrainError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("invalid cell value {token:?} at position {index}")]
    InvalidValue { index: usize, token: String },
    #[error("cell count mismatch: header declares {expected} cells, found {found}")]
    CellCountMismatch { expected: usize, found: usize },
    #[error("intensity {value} at cell {index} exceeds max value {max}")]
    IntensityOutOfRange { index: usize, value: u32, max: u32 },
    #[error("cannot form {k} clusters from {distinct} distinct intensities")]
    DegenerateClusters { k: usize, distinct: usize },
    #[error("invalid clustering parameter: {0}")]
    InvalidParameter(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Raw grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayGrid {
    width: usize,
    height: usize,
    max_value: u32,
    cells: Vec<u32>,
}

impl GrayGrid {
    pub fn new(width: usize, height: usize, max_value: u32, cells: Vec<u32>) -> Result<Self, TerrainError> {
        let expected = width * height;
        if cells.len() != expected {
            return Err(TerrainError::CellCountMismatch { expected, found: cells.len() });
        }
        if let Some((index, &value)) = cells.iter().enumerate().find(|(_, &v)| v > max_value) {
            return Err(TerrainError::IntensityOutOfRange { index, value, max: max_value });
        }
        Ok(Self { width, height, max_value, cells })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn max_value(&self) -> u32 {
        self.max_value
    }

    pub fn cells(&self) -> &[u32] {
        &self.cells
    }

    /// Parses the `GG <width> <height> <max_value>` text format.
    pub fn parse(text: &str) -> Result<Self, TerrainError> {
        let mut lines = text.lines();
        let header = lines
            .by_ref()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| TerrainError::MalformedHeader("empty input".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "GG" {
            return Err(TerrainError::MalformedHeader(header.to_string()));
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| TerrainError::MalformedHeader(header.to_string()))
        };
        let width = parse_dim(fields[1])?;
        let height = parse_dim(fields[2])?;
        let max_value: u32 = fields[3]
            .parse()
            .map_err(|_| TerrainError::MalformedHeader(header.to_string()))?;

        let mut cells = Vec::with_capacity(width * height);
        for (index, token) in lines.flat_map(str::split_whitespace).enumerate() {
            let value = token
                .parse::<u32>()
                .map_err(|_| TerrainError::InvalidValue { index, token: token.to_string() })?;
            cells.push(value);
        }
        Self::new(width, height, max_value, cells)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TerrainError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| TerrainError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("GG {} {} {}\n", self.width, self.height, self.max_value);
        write_rows(&mut out, self.width, self.cells.iter().copied());
        out
    }

    /// Synthetic coastline raster: land (dark) on the east side with a
    /// wavy shoreline, a few islands, and water (bright) elsewhere. Both
    /// classes carry mild intensity noise.
    pub fn synthetic_coastline(width: usize, height: usize, seed: u64) -> Self {

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let islands: Vec<(f64, f64, f64)> = (0..4)
            .map(|_| {
                (
                    rng.random_range(0.1..0.6),
                    rng.random_range(0.1..0.9),
                    rng.random_range(0.03..0.07),
                )
            })
            .collect();
        let mut cells = Vec::with_capacity(width * height);
        for row in 0..height {
            let v = row as f64 / height.max(1) as f64;
            let shore = 0.82 + 0.07 * (v * 9.0).sin() + 0.04 * (v * 23.0).cos();
            for col in 0..width {
                let u = col as f64 / width.max(1) as f64;
                let on_island = islands.iter().any(|&(cx, cy, r)| {
                    let dx = u - cx;
                    let dy = (v - cy) * 0.5;
                    dx * dx + dy * dy < r * r
                });
                let land = u > shore || on_island;
                let value = if land {
                    rng.random_range(15..60)
                } else {
                    rng.random_range(200..250)
                };
                cells.push(value);
            }
        }
        Self { width, height, max_value: 255, cells }
    }
}

fn write_rows(out: &mut String, width: usize, values: impl Iterator<Item = u32>) {
    for (i, v) in values.enumerate() {
        if i > 0 {
            out.push(if i % width.max(1) == 0 { '\n' } else { ' ' });
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Occupancy {
    Valid,
    Forbidden,
}

/// Binarized occupancy map in world units.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainGrid {
    width: usize,
    height: usize,
    cell_size_m: f64,
    occupancy: Vec<Occupancy>,
}

impl TerrainGrid {
    pub fn new(width: usize, height: usize, cell_size_m: f64, occupancy: Vec<Occupancy>) -> Result<Self, TerrainError> {
        if !(cell_size_m > 0.0 && cell_size_m.is_finite()) {
            return Err(TerrainError::InvalidParameter(format!("cell size {cell_size_m} must be positive")));
        }
        let expected = width * height;
        if occupancy.len() != expected {
            return Err(TerrainError::CellCountMismatch { expected, found: occupancy.len() });
        }
        Ok(Self { width, height, cell_size_m, occupancy })
    }

    /// Terrain where every cell is water.
    pub fn all_valid(width: usize, height: usize, cell_size_m: f64) -> Self {
        Self::new(width, height, cell_size_m, vec![Occupancy::Valid; width * height])
            .expect("all-valid terrain with positive cell size")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    pub fn occupancy(&self) -> &[Occupancy] {
        &self.occupancy
    }

    pub fn cell(&self, row: usize, col: usize) -> Occupancy {
        self.occupancy[row * self.width + col]
    }

    /// World extent `(x_max, y_max)` in meters.
    pub fn extent(&self) -> (f64, f64) {
        (self.width as f64 * self.cell_size_m, self.height as f64 * self.cell_size_m)
    }

    pub fn valid_count(&self) -> usize {
        self.occupancy.iter().filter(|&&c| c == Occupancy::Valid).count()
    }

    pub fn is_valid_position(&self, x: f64, y: f64) -> bool {
        if !(x >= 0.0 && y >= 0.0) {
            return false;
        }
        let col = (x / self.cell_size_m).floor();
        let row = (y / self.cell_size_m).floor();
        if col >= self.width as f64 || row >= self.height as f64 {
            return false;
        }
        self.cell(row as usize, col as usize) == Occupancy::Valid
    }

    /// `OCC <width> <height> <cell_size_m>` followed by 0/1 cells.
    pub fn to_text(&self) -> String {
        let mut out = format!("OCC {} {} {}\n", self.width, self.height, self.cell_size_m);
        write_rows(
            &mut out,
            self.width,
            self.occupancy.iter().map(|c| u32::from(*c == Occupancy::Valid)),
        );
        out
    }

    pub fn parse(text: &str) -> Result<Self, TerrainError> {
        let mut lines = text.lines();
        let header = lines
            .by_ref()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| TerrainError::MalformedHeader("empty input".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let bad = || TerrainError::MalformedHeader(header.to_string());
        if fields.len() != 4 || fields[0] != "OCC" {
            return Err(bad());
        }
        let width: usize = fields[1].parse().map_err(|_| bad())?;
        let height: usize = fields[2].parse().map_err(|_| bad())?;
        let cell_size_m: f64 = fields[3].parse().map_err(|_| bad())?;
        let mut occupancy = Vec::with_capacity(width * height);
        for (index, token) in lines.flat_map(str::split_whitespace).enumerate() {
            occupancy.push(match token {
                "0" => Occupancy::Forbidden,
                "1" => Occupancy::Valid,
                _ => return Err(TerrainError::InvalidValue { index, token: token.to_string() }),
            });
        }
        Self::new(width, height, cell_size_m, occupancy)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TerrainError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| TerrainError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }
}

/// Outcome of Lloyd's iteration on scalar intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans1d {
    /// Final centroids, in initialization order.
    pub centroids: Vec<f64>,
    /// Cluster label per input value.
    pub labels: Vec<usize>,
    /// Sum of squared distances after each assignment step.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
}

/// Lloyd's algorithm on 1-D data.
///
/// Centroids start at `k` distinct values drawn uniformly from the set of
/// distinct values. Ties in assignment go to the lower centroid index. An
/// emptied cluster is re-seeded at the value farthest from its assigned
/// centroid.
/// k-means++ seeding over the histogram: each further centroid is a distinct
/// intensity drawn with probability proportional to count times squared
/// distance to the nearest chosen centroid. Returned sorted ascending.
fn plus_plus_init(distinct: &[u32], weights: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let mut pick = rng.random::<f64>() * total;
    let mut first = distinct.len() - 1;
    for (i, &w) in weights.iter().enumerate() {
        if pick < w {
            first = i;
            break;
        }
        pick -= w;
    }
    let mut chosen = vec![first];
    let mut d2: Vec<f64> = distinct.iter().map(|&v| (f64::from(v) - f64::from(distinct[first])).powi(2)).collect();
    while chosen.len() < k {
        let mass: f64 = d2.iter().zip(weights).map(|(d, w)| d * w).sum();
        let mut pick = rng.random::<f64>() * mass;
        // Fallback: the farthest unchosen value (mass only vanishes when all
        // remaining values coincide with a centroid, which distinctness rules out).
        let mut next = None;
        for (i, (d, w)) in d2.iter().zip(weights).enumerate() {
            if *d <= 0.0 {
                continue;
            }
            next = Some(i);
            if pick < d * w {
                break;
            }
            pick -= d * w;
        }
        let next = next.expect("distinct values outnumber k");
        chosen.push(next);
        let c = f64::from(distinct[next]);
        for (d, &v) in d2.iter_mut().zip(distinct) {
            *d = d.min((f64::from(v) - c).powi(2));
        }
    }
    chosen.sort_unstable();
    chosen.iter().map(|&i| f64::from(distinct[i])).collect()
}

pub fn lloyd_1d(values: &[u32], k: usize, max_iters: usize, seed: u64) -> Result<KMeans1d, TerrainError> {
    if k == 0 {
        return Err(TerrainError::InvalidParameter("k must be at least 1".into()));
    }
    if max_iters == 0 {
        return Err(TerrainError::InvalidParameter("max_iters must be at least 1".into()));
    }
    // Histogram keeps each pass linear in the number of distinct intensities.
    let mut histogram: BTreeMap<u32, usize> = BTreeMap::new();
    for &v in values {
        *histogram.entry(v).or_default() += 1;
    }
    let distinct: Vec<u32> = histogram.keys().copied().collect();
    let weights: Vec<f64> = histogram.values().map(|&c| c as f64).collect();
    if k > distinct.len() {
        return Err(TerrainError::DegenerateClusters { k, distinct: distinct.len() });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(&distinct, &weights, k, &mut rng);

    let nearest = |centroids: &[f64], v: f64| -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, &c) in centroids.iter().enumerate() {
            let d = (v - c).abs();
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        best
    };

    let mut assignment: Vec<usize> = vec![usize::MAX; distinct.len()];
    let mut objective_history = Vec::new();
    let mut iterations = 0;
    for _ in 0..max_iters {
        iterations += 1;
        let next: Vec<usize> = distinct.iter().map(|&v| nearest(&centroids, f64::from(v))).collect();
        let changed = next != assignment;
        assignment = next;
        objective_history.push(objective(&distinct, &weights, &assignment, &centroids));
        if !changed {
            break;
        }

        let mut sums = vec![0.0; k];
        let mut counts = vec![0.0; k];
        for ((&v, &w), &a) in distinct.iter().zip(&weights).zip(&assignment) {
            sums[a] += w * f64::from(v);
            counts[a] += w;
        }
        for j in 0..k {
            if counts[j] > 0.0 {
                centroids[j] = sums[j] / counts[j];
            }
        }
        for j in 0..k {
            if counts[j] == 0.0 {
                let far = distinct
                    .iter()
                    .zip(&assignment)
                    .map(|(&v, &a)| (f64::from(v), (f64::from(v) - centroids[a]).abs()))
                    .fold((centroids[j], -1.0), |acc, (v, d)| if d > acc.1 { (v, d) } else { acc });
                centroids[j] = far.0;
            }
        }
    }

    let index_of: BTreeMap<u32, usize> = distinct.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let labels = values.iter().map(|v| assignment[index_of[v]]).collect();
    Ok(KMeans1d { centroids, labels, objective_history, iterations })
}

fn objective(distinct: &[u32], weights: &[f64], assignment: &[usize], centroids: &[f64]) -> f64 {
    distinct
        .iter()
        .zip(weights)
        .zip(assignment)
        .map(|((&v, &w), &a)| {
            let d = f64::from(v) - centroids[a];
            w * d * d
        })
        .sum()
}

/// Clusters a grayscale map into water (brightest cluster, Valid) and
/// land (every other cluster, Forbidden).
pub fn kmeans_cluster(
    grid: &GrayGrid,
    k: usize,
    max_iters: usize,
    seed: u64,
    cell_size_m: f64,
) -> Result<TerrainGrid, TerrainError> {
    let result = lloyd_1d(grid.cells(), k, max_iters, seed)?;
    let brightest = result
        .centroids
        .iter()
        .enumerate()
        .fold(0, |best, (j, &c)| if c > result.centroids[best] { j } else { best });
    let occupancy = result
        .labels
        .iter()
        .map(|&l| if l == brightest { Occupancy::Valid } else { Occupancy::Forbidden })
        .collect();
    TerrainGrid::new(grid.width(), grid.height(), cell_size_m, occupancy)
}
