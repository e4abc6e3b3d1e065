//! Antenna layouts and Earth-rotation synthesis.
//!
//! Positions are East-North-Up metres in a local frame. For each batch the
//! array is projected onto the (u, v) plane perpendicular to the phase centre
//! at the batch mid hour angle; the w coordinate is dropped (small field of
//! view).

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Published power-law exponent of the VLA arm stations.
pub const VLA_ARM_EXPONENT: f64 = 1.716;
/// Geodetic latitude of the VLA, radians.
pub const VLA_LATITUDE: f64 = 34.078_749 * PI / 180.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Antenna {
    pub name: String,
    /// East, North, Up in metres.
    pub enu: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayLayout {
    pub antennas: Vec<Antenna>,
    /// Observing wavelength, metres.
    pub wavelength: f64,
    /// Array latitude, radians.
    pub latitude: f64,
    /// Phase centre declination, radians.
    pub declination: f64,
    /// Hour-angle range (start, end), radians.
    pub hour_angle_span: (f64, f64),
    pub num_batches: usize,
}

/// Projected antenna positions and ordered baselines of one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchGeometry {
    /// Zero-based batch index.
    pub index: usize,
    pub hour_angle: f64,
    /// Projected positions in wavelengths, one per antenna.
    pub positions: Vec<[f64; 2]>,
}

impl ArrayLayout {
    /// Layout with the default observation: 5 hours centred on transit.
    pub fn new(antennas: Vec<Antenna>, wavelength: f64, num_batches: usize) -> Result<Self> {
        let half = 2.5 * 2.0 * PI / 24.0;
        let layout = ArrayLayout {
            antennas,
            wavelength,
            latitude: VLA_LATITUDE,
            declination: 45f64.to_radians(),
            hour_angle_span: (-half, half),
            num_batches,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn num_antennas(&self) -> usize {
        self.antennas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.antennas.len();
        if q < 2 {
            return Err(Error::Config(format!("need at least 2 antennas, got {q}")));
        }
        if self.num_batches == 0 {
            return Err(Error::Config("num_batches must be positive".into()));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::Config(format!(
                "wavelength must be positive, got {}",
                self.wavelength
            )));
        }
        if self.antennas.iter().any(|a| a.enu.iter().any(|c| !c.is_finite())) {
            return Err(Error::Config("antenna positions must be finite".into()));
        }
        for (i, a) in self.antennas.iter().enumerate() {
            for b in &self.antennas[i + 1..] {
                if a.enu == b.enu {
                    return Err(Error::Config(format!(
                        "antennas {} and {} share a position",
                        a.name, b.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reads `name,east_m,north_m,up_m` rows; other fields take defaults.
    pub fn read_csv(path: &Path, wavelength: f64, num_batches: usize) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
        let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        let expected = ["name", "east_m", "north_m", "up_m"];
        if headers.iter().map(str::trim).ne(expected.iter().copied()) {
            return Err(Error::format(
                path,
                format!("expected header {}, got {:?}", expected.join(","), headers),
            ));
        }
        let mut antennas = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| csv_error(path, e))?;
            let coord = |i: usize| -> Result<f64> {
                row.get(i)
                    .unwrap_or("")
                    .trim()
                    .parse()
                    .map_err(|e| Error::format(path, format!("line {:?}: {e}", row.position())))
            };
            antennas.push(Antenna {
                name: row.get(0).unwrap_or("").trim().to_string(),
                enu: [coord(1)?, coord(2)?, coord(3)?],
            });
        }
        ArrayLayout::new(antennas, wavelength, num_batches)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        writer
            .write_record(["name", "east_m", "north_m", "up_m"])
            .map_err(|e| csv_error(path, e))?;
        for a in &self.antennas {
            writer
                .write_record([
                    a.name.clone(),
                    format!("{:.17e}", a.enu[0]),
                    format!("{:.17e}", a.enu[1]),
                    format!("{:.17e}", a.enu[2]),
                ])
                .map_err(|e| csv_error(path, e))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))
    }

    /// Hour angle at the middle of each of the `num_batches` equal slices.
    pub fn batch_hour_angles(&self) -> Vec<f64> {
        let (start, end) = self.hour_angle_span;
        let b = self.num_batches as f64;
        (0..self.num_batches)
            .map(|i| start + (end - start) * (i as f64 + 0.5) / b)
            .collect()
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e)
}

/// Y-shaped array: three arms at 120 degrees, station `i` of each arm at
/// radius `r_max * (i / num_per_arm)^1.716`.
pub fn make_vla_like(num_per_arm: usize, r_max: f64) -> Result<Vec<Antenna>> {
    if num_per_arm == 0 {
        return Err(Error::Config("num_per_arm must be at least 1".into()));
    }
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(Error::Config(format!("r_max must be positive, got {r_max}")));
    }
    let mut antennas = Vec::with_capacity(3 * num_per_arm);
    for arm in 0..3 {
        // azimuth from north towards east
        let azimuth = arm as f64 * 2.0 * PI / 3.0;
        let (sin_az, cos_az) = azimuth.sin_cos();
        for i in 1..=num_per_arm {
            let r = r_max * (i as f64 / num_per_arm as f64).powf(VLA_ARM_EXPONENT);
            antennas.push(Antenna {
                name: format!("{}{:02}", ['N', 'E', 'W'][arm], i),
                enu: [r * sin_az, r * cos_az, 0.0],
            });
        }
    }
    Ok(antennas)
}

/// Local ENU baseline to equatorial (X, Y, Z) at the given latitude.
fn enu_to_xyz(enu: [f64; 3], latitude: f64) -> [f64; 3] {
    let (s_lat, c_lat) = latitude.sin_cos();
    let [e, n, u] = enu;
    [-s_lat * n + c_lat * u, e, c_lat * n + s_lat * u]
}

/// (u, v) of an equatorial vector for hour angle `ha` and declination `dec`.
fn xyz_to_uv(xyz: [f64; 3], ha: f64, dec: f64) -> [f64; 2] {
    let (s_ha, c_ha) = ha.sin_cos();
    let (s_dec, c_dec) = dec.sin_cos();
    let [x, y, z] = xyz;
    [
        s_ha * x + c_ha * y,
        -s_dec * c_ha * x + s_dec * s_ha * y + c_dec * z,
    ]
}

pub fn synthesize_batches(layout: &ArrayLayout) -> Vec<BatchGeometry> {
    let xyz: Vec<[f64; 3]> = layout
        .antennas
        .iter()
        .map(|a| enu_to_xyz(a.enu, layout.latitude))
        .collect();
    layout
        .batch_hour_angles()
        .into_iter()
        .enumerate()
        .map(|(index, ha)| BatchGeometry {
            index,
            hour_angle: ha,
            positions: xyz
                .iter()
                .map(|&p| {
                    let [u, v] = xyz_to_uv(p, ha, layout.declination);
                    [u / layout.wavelength, v / layout.wavelength]
                })
                .collect(),
        })
        .collect()
}

impl BatchGeometry {
    pub fn num_antennas(&self) -> usize {
        self.positions.len()
    }

    /// `nu_jk = p_j - p_k` for all ordered pairs `j != k`, row-major in `(j, k)`.
    pub fn baselines(&self) -> Vec<[f64; 2]> {
        let q = self.positions.len();
        let mut out = Vec::with_capacity(q * q.saturating_sub(1));
        for j in 0..q {
            for k in 0..q {
                if j != k {
                    let (pj, pk) = (self.positions[j], self.positions[k]);
                    out.push([pj[0] - pk[0], pj[1] - pk[1]]);
                }
            }
        }
        out
    }
}

/// Number of point pairs closer than `tol` (Euclidean), found by bucketing
/// the plane into `tol`-sized cells.
pub fn count_close_pairs(points: &[[f64; 2]], tol: f64) -> usize {
    use std::collections::HashMap;
    if points.len() < 2 {
        return 0;
    }
    let cell = if tol > 0.0 { tol } else { f64::MIN_POSITIVE };
    let key = |p: &[f64; 2]| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(i);
    }
    let close = |a: &[f64; 2], b: &[f64; 2]| {
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        d < tol || (tol == 0.0 && d == 0.0)
    };
    let mut count = 0;
    for (i, p) in points.iter().enumerate() {
        let (cx, cy) = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = buckets.get(&(cx + dx, cy + dy)) {
                    count += bucket.iter().filter(|&&j| j > i && close(p, &points[j])).count();
                }
            }
        }
    }
    count
}

/// Counts baseline pairs, across all batches, closer than `tolerance`
/// (wavelengths). Zero means all nonzero visibilities are distinct.
pub fn check_distinct_visibilities(batches: &[BatchGeometry], tolerance: f64) -> usize {
    let all: Vec<[f64; 2]> = batches.iter().flat_map(|b| b.baselines()).collect();
    count_close_pairs(&all, tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(antennas: Vec<Antenna>, b: usize) -> ArrayLayout {
        ArrayLayout::new(antennas, 0.21, b).unwrap()
    }

    fn brute_close_pairs(points: &[[f64; 2]], tol: f64) -> usize {
        let mut n = 0;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let d =
                    ((points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2)).sqrt();
                if d < tol {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn vla_like_counts_and_radii() {
        let ants = make_vla_like(9, 1e4).unwrap();
        assert_eq!(ants.len(), 27);

        let ants = make_vla_like(1, 1.0).unwrap();
        assert_eq!(ants.len(), 3);
        for a in &ants {
            let r = (a.enu[0].powi(2) + a.enu[1].powi(2)).sqrt();
            assert!((r - 1.0).abs() < 1e-15);
        }
        // 120 degree spacing: pairwise distances all sqrt(3)
        for i in 0..3 {
            for j in i + 1..3 {
                let d = ((ants[i].enu[0] - ants[j].enu[0]).powi(2)
                    + (ants[i].enu[1] - ants[j].enu[1]).powi(2))
                .sqrt();
                assert!((d - 3f64.sqrt()).abs() < 1e-12);
            }
        }

        let ants = make_vla_like(2, 100.0).unwrap();
        let inner = (ants[0].enu[0].powi(2) + ants[0].enu[1].powi(2)).sqrt();
        assert!((inner - 100.0 * 0.5f64.powf(1.716)).abs() < 1e-12);
        assert!((inner - 30.44).abs() < 0.01);
    }

    #[test]
    fn invalid_generator_parameters() {
        assert!(matches!(make_vla_like(0, 1.0), Err(Error::Config(_))));
        assert!(matches!(make_vla_like(3, 0.0), Err(Error::Config(_))));
        assert!(matches!(make_vla_like(3, f64::NAN), Err(Error::Config(_))));
    }

    #[test]
    fn layout_validation() {
        let ants = make_vla_like(1, 1.0).unwrap();
        assert!(ArrayLayout::new(ants[..1].to_vec(), 1.0, 1).is_err());
        assert!(ArrayLayout::new(ants.clone(), 0.0, 1).is_err());
        assert!(ArrayLayout::new(ants.clone(), 1.0, 0).is_err());
        let mut dup = ants.clone();
        dup[1].enu = dup[0].enu;
        assert!(ArrayLayout::new(dup, 1.0, 1).is_err());
    }

    #[test]
    fn full_scale_visibility_count() {
        let l = layout(make_vla_like(9, 1e4).unwrap(), 100);
        let batches = synthesize_batches(&l);
        assert_eq!(batches.len(), 100);
        let total: usize = batches.iter().map(|b| b.baselines().len()).sum();
        assert_eq!(total, 70200);
    }

    #[test]
    fn east_west_array_at_pole_rotates_rigidly() {
        let ants = vec![
            Antenna {
                name: "a".into(),
                enu: [0.0, 0.0, 0.0],
            },
            Antenna {
                name: "b".into(),
                enu: [10.0, 0.0, 0.0],
            },
            Antenna {
                name: "c".into(),
                enu: [25.0, 0.0, 0.0],
            },
        ];
        let mut l = layout(ants.clone(), 2);
        l.wavelength = 1.0;
        l.declination = PI / 2.0;
        l.hour_angle_span = (-0.4, 0.6);
        let batches = synthesize_batches(&l);
        let has = [-0.15, 0.35];
        for (b, &h) in batches.iter().zip(&has) {
            assert!((b.hour_angle - h).abs() < 1e-15);
            // rotation of (E, 0) by angle h
            for (q, a) in ants.iter().enumerate() {
                let e = a.enu[0];
                let expected = [e * h.cos(), e * h.sin()];
                assert!((b.positions[q][0] - expected[0]).abs() < 1e-12);
                assert!((b.positions[q][1] - expected[1]).abs() < 1e-12);
            }
            let bl = b.baselines();
            // (0,1) pair: p0 - p1 = -10 (cos h, sin h)
            assert!((bl[0][0] + 10.0 * h.cos()).abs() < 1e-12);
            assert!((bl[0][1] + 10.0 * h.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn single_antenna_has_no_baselines() {
        let b = BatchGeometry {
            index: 0,
            hour_angle: 0.0,
            positions: vec![[1.0, 2.0]],
        };
        assert!(b.baselines().is_empty());
    }

    #[test]
    fn baselines_are_antisymmetric_and_exclude_zero() {
        let l = layout(make_vla_like(4, 1e3).unwrap(), 5);
        for b in synthesize_batches(&l) {
            let q = b.num_antennas();
            let bl = b.baselines();
            assert_eq!(bl.len(), q * (q - 1));
            let idx = |j: usize, k: usize| j * (q - 1) + if k > j { k - 1 } else { k };
            for j in 0..q {
                for k in 0..q {
                    if j != k {
                        let (a, c) = (bl[idx(j, k)], bl[idx(k, j)]);
                        assert_eq!(a[0], -c[0]);
                        assert_eq!(a[1], -c[1]);
                        assert!(a != [0.0, 0.0]);
                    }
                }
            }
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let l = layout(make_vla_like(5, 1e3).unwrap(), 7);
        assert_eq!(synthesize_batches(&l), synthesize_batches(&l));
    }

    #[test]
    fn distinct_visibility_check() {
        let l = layout(make_vla_like(9, 1e4).unwrap(), 100);
        let batches = synthesize_batches(&l);
        assert_eq!(check_distinct_visibilities(&batches, 1e-9), 0);

        // duplicated geometry: every baseline collides once
        let mut l2 = layout(make_vla_like(2, 1e3).unwrap(), 2);
        l2.hour_angle_span = (0.0, 0.0);
        let dup = synthesize_batches(&l2);
        assert_eq!(check_distinct_visibilities(&dup, 1e-9), 6 * 5);

        let l3 = layout(make_vla_like(1, 1.0).unwrap()[..2].to_vec(), 1);
        assert_eq!(check_distinct_visibilities(&synthesize_batches(&l3), 1e-9), 0);
    }

    #[test]
    fn bucketed_pair_count_matches_brute_force() {
        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(3);
        for tol in [0.01, 0.05, 0.2] {
            let pts: Vec<[f64; 2]> = (0..400)
                .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
                .collect();
            assert_eq!(count_close_pairs(&pts, tol), brute_close_pairs(&pts, tol));
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("array.csv");
        let l = layout(make_vla_like(3, 1234.5).unwrap(), 4);
        l.write_csv(&path).unwrap();
        let back = ArrayLayout::read_csv(&path, l.wavelength, 4).unwrap();
        assert_eq!(back.antennas, l.antennas);
    }

    #[test]
    fn csv_bad_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "id,x,y,z\na,0,0,0\nb,1,0,0\n").unwrap();
        assert!(matches!(
            ArrayLayout::read_csv(&path, 1.0, 1),
            Err(Error::Format { .. })
        ));
    }
}
