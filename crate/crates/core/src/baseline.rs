//! Classical peak-detection baselines for the four regression tasks.
//!
//! Each estimator is a global argmax on a radar map (no CFAR, no tracking),
//! matching the hand-crafted processing the learned models are compared
//! against. Outlier behaviour from faulty peaks is expected and reproducible.

use crate::config::RadarAxes;
use crate::dsp::{MapKind, RadarMap};
use crate::error::Error;
use crate::Result;

/// Range gate applied to the corner-reflector tasks: 0 m inclusive to
/// 5 m exclusive.
pub const TARGET_GATE_M: (f64, f64) = (0.0, 5.0);

/// Location and value of a map maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakDetection {
    pub range_bin: usize,
    /// Doppler or angle bin depending on the map kind.
    pub secondary_bin: usize,
    pub amplitude: f64,
}

/// Global argmax over the map, optionally restricted to rows whose range
/// falls inside `[gate.0, gate.1)`.
///
/// Ties break toward the smallest range bin, then the smallest secondary
/// bin. The result is invariant under any strictly monotone rescaling of
/// the map, so raw and squashed maps give identical detections.
pub fn find_peak(
    map: &RadarMap,
    range_gate: Option<(f64, f64)>,
    axes: &RadarAxes,
) -> Result<PeakDetection> {
    let rows: Vec<usize> = match range_gate {
        None => (0..map.rows()).collect(),
        Some((lo, hi)) => {
            if !(lo < hi) {
                return Err(Error::validation(format!("empty range gate [{lo}, {hi})")));
            }
            (0..map.rows())
                .filter(|&r| {
                    let range = axes.range_axis[r];
                    range >= lo && range < hi
                })
                .collect()
        }
    };
    if rows.is_empty() {
        return Err(Error::validation("range gate excludes every row"));
    }

    let mut best = PeakDetection {
        range_bin: rows[0],
        secondary_bin: 0,
        amplitude: f64::NEG_INFINITY,
    };
    for &r in &rows {
        for (c, &v) in map.row(r).iter().enumerate() {
            if v > best.amplitude {
                best = PeakDetection {
                    range_bin: r,
                    secondary_bin: c,
                    amplitude: v,
                };
            }
        }
    }
    Ok(best)
}

fn expect_kind(map: &RadarMap, kind: MapKind, task: &str) -> Result<()> {
    if map.kind != kind {
        return Err(Error::validation(format!(
            "{task} expects a {kind:?} map, got {:?}",
            map.kind
        )));
    }
    Ok(())
}

/// Task (i): distance to the wall — ungated peak range on the RA map.
pub fn estimate_wall_distance(ra_map: &RadarMap, axes: &RadarAxes) -> Result<f64> {
    expect_kind(ra_map, MapKind::RangeAzimuth, "wall distance")?;
    let peak = find_peak(ra_map, None, axes)?;
    Ok(axes.range_axis[peak.range_bin])
}

/// Task (ii): forward velocity — peak Doppler bin on the RD map, sign
/// flipped so that approach speed is positive.
pub fn estimate_forward_velocity(rd_map: &RadarMap, axes: &RadarAxes) -> Result<f64> {
    expect_kind(rd_map, MapKind::RangeDoppler, "forward velocity")?;
    let peak = find_peak(rd_map, None, axes)?;
    Ok(-axes.velocity_axis[peak.secondary_bin])
}

/// Task (iii): distance to the corner reflector — gated peak range.
pub fn estimate_target_distance(ra_map: &RadarMap, axes: &RadarAxes) -> Result<f64> {
    expect_kind(ra_map, MapKind::RangeAzimuth, "target distance")?;
    let peak = find_peak(ra_map, Some(TARGET_GATE_M), axes)?;
    Ok(axes.range_axis[peak.range_bin])
}

/// Task (iv): angle to the corner reflector — gated peak angle (rad).
pub fn estimate_target_angle(ra_map: &RadarMap, axes: &RadarAxes) -> Result<f64> {
    expect_kind(ra_map, MapKind::RangeAzimuth, "target angle")?;
    let peak = find_peak(ra_map, Some(TARGET_GATE_M), axes)?;
    Ok(axes.angle_axis[peak.secondary_bin].asin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{derive_axes, RadarConfig};
    use crate::dsp::{
        range_azimuth_map, range_doppler_map, squash, MapScale, RadarMap, SquashStats,
    };
    use crate::simsig::{random_scene, simulate_frame, PointTarget, Scene, SceneBounds};

    fn axes() -> crate::config::RadarAxes {
        derive_axes(&RadarConfig::default()).unwrap()
    }

    fn map_with(values: Vec<f64>, kind: MapKind) -> RadarMap {
        RadarMap::new(kind, MapScale::Raw, values, 128, 128).unwrap()
    }

    fn single(range: f64, vel: f64, az_deg: f64, noise: f64) -> Scene {
        Scene::single(
            PointTarget {
                range,
                radial_velocity: vel,
                azimuth: az_deg.to_radians(),
                amplitude: 1.0,
            },
            noise,
        )
    }

    #[test]
    fn finds_single_nonzero_cell() {
        let mut values = vec![0.0; 128 * 128];
        values[10 * 128 + 40] = 3.0;
        let map = map_with(values, MapKind::RangeDoppler);
        let peak = find_peak(&map, None, &axes()).unwrap();
        assert_eq!((peak.range_bin, peak.secondary_bin), (10, 40));
        assert_eq!(peak.amplitude, 3.0);
    }

    #[test]
    fn uniform_map_ties_break_to_origin() {
        let map = map_with(vec![1.0; 128 * 128], MapKind::RangeDoppler);
        let peak = find_peak(&map, None, &axes()).unwrap();
        assert_eq!((peak.range_bin, peak.secondary_bin), (0, 0));
    }

    #[test]
    fn gate_is_inclusive_lower_exclusive_upper() {
        let ax = axes();
        // bin 68 → 4.969 m, inside [0, 5); bin 69 → 5.042 m, outside
        let frame = simulate_frame(&single(5.0, 0.0, 20.0, 0.0), &RadarConfig::default(), 0).unwrap();
        let map = range_azimuth_map(&frame).unwrap();
        let peak = find_peak(&map, Some((0.0, 5.0)), &ax).unwrap();
        assert_eq!(peak.range_bin, 68);
        assert!((peak.secondary_bin as i64 - 86).abs() <= 1);

        // a gate excluding all rows errors
        assert!(find_peak(&map, Some((100.0, 200.0)), &ax).is_err());
        assert!(find_peak(&map, Some((5.0, 5.0)), &ax).is_err());
    }

    #[test]
    fn wall_distance_from_peak_bin() {
        let ax = axes();
        let mut values = vec![0.0; 128 * 128];
        values[68 * 128 + 12] = 1.0;
        let map = map_with(values, MapKind::RangeAzimuth);
        let d = estimate_wall_distance(&map, &ax).unwrap();
        assert!((d - 4.97).abs() < 0.01);

        let zero = map_with(vec![0.0; 128 * 128], MapKind::RangeAzimuth);
        assert_eq!(estimate_wall_distance(&zero, &ax).unwrap(), 0.0);
    }

    #[test]
    fn wall_distance_sweep_rmse_below_one_bin() {
        let cfg = RadarConfig::default();
        let ax = axes();
        let mut sq_err = 0.0;
        let n = 100;
        for i in 0..n {
            let mut scene = random_scene(500 + i, &SceneBounds::standard(), &cfg).unwrap();
            // wall-like: static, near boresight
            scene.targets[0].radial_velocity = 0.0;
            scene.targets[0].azimuth = 0.0;
            scene.noise_std = 0.05;
            let truth = scene.targets[0].range;
            let frame = simulate_frame(&scene, &cfg, 700 + i).unwrap();
            let map = range_azimuth_map(&frame).unwrap();
            let est = estimate_wall_distance(&map, &ax).unwrap();
            sq_err += (est - truth) * (est - truth);
        }
        let rmse = (sq_err / n as f64).sqrt();
        assert!(rmse <= ax.range_resolution, "rmse {rmse}");
    }

    #[test]
    fn velocity_sign_convention() {
        let ax = axes();
        // peak at Doppler bin 64 → 0 m/s
        let mut values = vec![0.0; 128 * 128];
        values[30 * 128 + 64] = 1.0;
        let map = map_with(values, MapKind::RangeDoppler);
        assert_eq!(estimate_forward_velocity(&map, &ax).unwrap(), 0.0);

        // peak at bin 50 → −(50−64)·Δv ≈ +1.97 m/s
        let mut values = vec![0.0; 128 * 128];
        values[30 * 128 + 50] = 1.0;
        let map = map_with(values, MapKind::RangeDoppler);
        let v = estimate_forward_velocity(&map, &ax).unwrap();
        assert!((v - 1.97).abs() < 0.01);
    }

    #[test]
    fn approaching_wall_velocity_estimate() {
        let ax = axes();
        // drone closing at 2 m/s → target radial velocity −2 m/s
        let frame =
            simulate_frame(&single(5.0, -2.0, 0.0, 0.05), &RadarConfig::default(), 11).unwrap();
        let map = range_doppler_map(&frame).unwrap();
        let v = estimate_forward_velocity(&map, &ax).unwrap();
        assert!((v - 2.0).abs() <= ax.velocity_resolution, "v = {v}");
    }

    #[test]
    fn gated_target_estimates() {
        let cfg = RadarConfig::default();
        let ax = axes();
        let frame = simulate_frame(&single(3.0, 0.0, -15.0, 0.05), &cfg, 3).unwrap();
        let map = range_azimuth_map(&frame).unwrap();
        let d = estimate_target_distance(&map, &ax).unwrap();
        let a = estimate_target_angle(&map, &ax).unwrap();
        assert!((d - 3.0).abs() <= ax.range_resolution);
        let bin_err = (ax.azimuth_to_bin(a) as i64 - ax.azimuth_to_bin(-15f64.to_radians()) as i64)
            .abs();
        assert!(bin_err <= 2, "angle bin error {bin_err}");

        // boresight target → angle within one bin of zero
        let frame = simulate_frame(&single(3.0, 0.0, 0.0, 0.05), &cfg, 4).unwrap();
        let map = range_azimuth_map(&frame).unwrap();
        let a = estimate_target_angle(&map, &ax).unwrap();
        assert!((ax.azimuth_to_bin(a) as i64 - 64).abs() <= 1);
    }

    #[test]
    fn gate_prefers_near_target_over_strong_far_one() {
        let cfg = RadarConfig::default();
        let ax = axes();
        let scene = Scene {
            targets: vec![
                PointTarget {
                    range: 7.0,
                    radial_velocity: 0.0,
                    azimuth: 0.3,
                    amplitude: 5.0,
                },
                PointTarget {
                    range: 2.0,
                    radial_velocity: 0.0,
                    azimuth: -0.2,
                    amplitude: 0.5,
                },
            ],
            noise_std: 0.0,
        };
        let frame = simulate_frame(&scene, &cfg, 0).unwrap();
        let map = range_azimuth_map(&frame).unwrap();
        // ungated peak is the strong 7 m target …
        assert!((estimate_wall_distance(&map, &ax).unwrap() - 7.0).abs() < 0.1);
        // … but the gated estimators lock onto the 2 m target
        assert!((estimate_target_distance(&map, &ax).unwrap() - 2.0).abs() < 0.1);
        let a = estimate_target_angle(&map, &ax).unwrap();
        assert!((a - (-0.2)).abs() < 0.05);
    }

    #[test]
    fn estimates_invariant_under_squash() {
        let cfg = RadarConfig::default();
        let ax = axes();
        // dataset-level squash stats, as used in production
        let corpus: Vec<_> = (0..8)
            .map(|i| {
                let scene = random_scene(40 + i, &SceneBounds::standard(), &cfg).unwrap();
                let frame = simulate_frame(&scene, &cfg, 50 + i).unwrap();
                range_doppler_map(&frame).unwrap()
            })
            .collect();
        let stats = SquashStats::from_maps(corpus.iter()).unwrap();

        let frame = simulate_frame(&single(4.0, 1.0, 25.0, 0.05), &cfg, 9).unwrap();
        for map in [range_azimuth_map(&frame).unwrap(), range_doppler_map(&frame).unwrap()] {
            let squashed = squash(&map, &stats).unwrap();
            let p_raw = find_peak(&map, None, &ax).unwrap();
            let p_sq = find_peak(&squashed, None, &ax).unwrap();
            assert_eq!(
                (p_raw.range_bin, p_raw.secondary_bin),
                (p_sq.range_bin, p_sq.secondary_bin)
            );
        }
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let ax = axes();
        let rd = map_with(vec![0.0; 128 * 128], MapKind::RangeDoppler);
        assert!(estimate_wall_distance(&rd, &ax).is_err());
        assert!(estimate_target_distance(&rd, &ax).is_err());
        assert!(estimate_target_angle(&rd, &ax).is_err());
        let ra = map_with(vec![0.0; 128 * 128], MapKind::RangeAzimuth);
        assert!(estimate_forward_velocity(&ra, &ax).is_err());
    }

    #[test]
    fn estimates_lie_on_physical_axes() {
        let ax = axes();
        let mut values = vec![0.0; 128 * 128];
        values[37 * 128 + 91] = 2.5;
        let ra = map_with(values.clone(), MapKind::RangeAzimuth);
        let d = estimate_wall_distance(&ra, &ax).unwrap();
        assert!(ax.range_axis.contains(&d));
        let rd = map_with(values, MapKind::RangeDoppler);
        let v = estimate_forward_velocity(&rd, &ax).unwrap();
        assert!(ax.velocity_axis.contains(&(-v)));
    }
}
