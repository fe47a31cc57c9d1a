use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::spatialdata::euclidean;

/// Where simulation coordinates come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoordsSource {
    /// Halton points (bases 2 and 3) on `[0, width] × [0, height]`, with a
    /// Voronoi partition into `regions` cells around seeded sites.
    Synthetic {
        #[serde(default = "default_extent")]
        extent: [f64; 2],
        /// Number of leading Halton indices to skip (index 0 is always skipped).
        #[serde(default)]
        skip: usize,
        #[serde(default = "default_regions")]
        regions: usize,
        #[serde(default = "default_region_seed")]
        region_seed: u64,
    },
    /// Centroid CSV with a header row; `region` names an optional label column.
    FromFile {
        path: PathBuf,
        #[serde(default = "default_x")]
        x: String,
        #[serde(default = "default_y")]
        y: String,
        #[serde(default)]
        region: Option<String>,
    },
}

fn default_extent() -> [f64; 2] {
    [1.8, 1.2]
}
fn default_regions() -> usize {
    5
}
fn default_region_seed() -> u64 {
    6
}
fn default_x() -> String {
    "x".into()
}
fn default_y() -> String {
    "y".into()
}

impl Default for CoordsSource {
    fn default() -> Self {
        Self::Synthetic {
            extent: default_extent(),
            skip: 0,
            regions: default_regions(),
            region_seed: default_region_seed(),
        }
    }
}

/// Coordinates plus region labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub coords: Vec<[f64; 2]>,
    pub region: Option<Vec<String>>,
}

/// Radical inverse of `i` in `base`.
pub fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

pub fn halton_points(n: usize, extent: [f64; 2], skip: usize) -> Vec<[f64; 2]> {
    (1 + skip..=n + skip)
        .map(|i| [extent[0] * halton(i, 2), extent[1] * halton(i, 3)])
        .collect()
}

/// Labels each point `R1..Rk` by its nearest of `k` uniform sites drawn
/// from the box; ties go to the lower site.
pub fn voronoi_labels(coords: &[[f64; 2]], extent: [f64; 2], k: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let sites: Vec<[f64; 2]> = (0..k)
        .map(|_| [extent[0] * rng.random::<f64>(), extent[1] * rng.random::<f64>()])
        .collect();
    coords
        .iter()
        .map(|&c| {
            let mut best = 0;
            for (s, &site) in sites.iter().enumerate().skip(1) {
                if euclidean(c, site) < euclidean(c, sites[best]) {
                    best = s;
                }
            }
            format!("R{}", best + 1)
        })
        .collect()
}

impl CoordsSource {
    pub fn resolve(&self, n: usize) -> Result<Layout, SimError> {
        match self {
            Self::Synthetic {
                extent,
                skip,
                regions,
                region_seed,
            } => {
                if !(extent[0] > 0.0 && extent[1] > 0.0) {
                    return Err(SimError::InvalidScenario("layout extent must be positive".into()));
                }
                let coords = halton_points(n, *extent, *skip);
                let region = (*regions > 0).then(|| voronoi_labels(&coords, *extent, *regions, *region_seed));
                Ok(Layout { coords, region })
            }
            Self::FromFile { path, x, y, region } => {
                let layout = load_layout(path, x, y, region.as_deref())?;
                if layout.coords.len() != n {
                    return Err(SimError::InvalidScenario(format!(
                        "layout file has {} rows but the scenario asks for n = {n}",
                        layout.coords.len()
                    )));
                }
                Ok(layout)
            }
        }
    }
}

/// Reads centroid coordinates (and optionally region labels) from a CSV.
pub fn load_layout(path: &Path, x: &str, y: &str, region: Option<&str>) -> Result<Layout, SimError> {
    let file = std::fs::File::open(path).map_err(|e| SimError::Layout(format!("{}: {e}", path.display())))?;
    load_layout_reader(file, x, y, region)
}

pub fn load_layout_reader<R: std::io::Read>(
    reader: R,
    x: &str,
    y: &str,
    region: Option<&str>,
) -> Result<Layout, SimError> {
    let bad = |m: String| SimError::Layout(m);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column {name}")))
    };
    let (ix, iy) = (find(x)?, find(y)?);
    let ir = region.map(find).transpose()?;
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64, SimError> {
            rec[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("line {line}: bad coordinate {:?}", &rec[i])))
        };
        coords.push([num(ix)?, num(iy)?]);
        if let Some(i) = ir {
            if rec[i].is_empty() {
                return Err(bad(format!("line {line}: empty region label")));
            }
            labels.push(rec[i].to_string());
        }
    }
    Ok(Layout {
        coords,
        region: ir.map(|_| labels),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_first_values() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert_eq!(halton(3, 2), 0.75);
        assert!((halton(1, 3) - 1.0 / 3.0).abs() < 1e-15);
        assert!((halton(4, 3) - 4.0 / 9.0).abs() < 1e-15);
        let p = halton_points(2, [1.2, 0.9], 0);
        assert_eq!(p[0], [0.6, 0.3]);
    }

    #[test]
    fn voronoi_uses_all_cells_on_a_dense_layout() {
        let c = halton_points(503, default_extent(), 0);
        let l = voronoi_labels(&c, default_extent(), 5, default_region_seed());
        let mut levels = l.clone();
        levels.sort();
        levels.dedup();
        assert_eq!(levels.len(), 5);
        assert_eq!(l, voronoi_labels(&c, default_extent(), 5, default_region_seed()));
    }

    #[test]
    fn layout_from_csv() {
        let text = "# centroids\nfips,lon,lat,state\n1,0.1,0.2,TX\n2,0.3,0.4,OK\n";
        let l = load_layout_reader(text.as_bytes(), "lon", "lat", Some("state")).unwrap();
        assert_eq!(l.coords, vec![[0.1, 0.2], [0.3, 0.4]]);
        assert_eq!(l.region.unwrap(), vec!["TX", "OK"]);
        assert!(load_layout_reader(text.as_bytes(), "x", "lat", None).is_err());
    }
}
