use std::collections::BTreeMap;

use super::heatmap::{GridSpec, HeatMap};
use crate::error::{Error, Result};
use crate::geometry::{min_box_dims, points_in_box, PointCloudFrame};
use crate::sim::GroundTruthRecord;

/// Point-count and box-coverage heat maps, filled one frame at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMaps {
    pub points: HeatMap,
    pub width: HeatMap,
    pub length: HeatMap,
    pub height: HeatMap,
}

impl CoverageMaps {
    pub fn new(grid: &GridSpec) -> Result<Self> {
        let m = HeatMap::new(grid)?;
        Ok(Self { points: m.clone(), width: m.clone(), length: m.clone(), height: m })
    }

    /// Adds every GT box of one frame, measured against that frame's cloud.
    pub fn add_frame<'a>(&mut self, gt: impl IntoIterator<Item = &'a GroundTruthRecord>, frame: &PointCloudFrame<f64>) {
        for g in gt {
            let inside = points_in_box(frame, &g.bbox);
            let (h, w, l) = min_box_dims(&inside, &g.bbox);
            let (x, y) = (g.bbox.center.x, g.bbox.center.y);
            self.points.add(x, y, inside.len() as f64);
            self.width.add(x, y, w / g.bbox.width);
            self.length.add(x, y, l / g.bbox.length);
            self.height.add(x, y, h / g.bbox.height);
        }
    }

    pub fn merge(&mut self, other: &CoverageMaps) -> Result<()> {
        self.points.merge(&other.points)?;
        self.width.merge(&other.width)?;
        self.length.merge(&other.length)?;
        self.height.merge(&other.height)
    }
}

/// Groups GT records by frame and pairs them with the frame of the same index.
/// Every GT frame must have a cloud.
fn aligned<'a>(
    gt: &'a [GroundTruthRecord],
    frames: &'a [PointCloudFrame<f64>],
) -> Result<Vec<(&'a PointCloudFrame<f64>, Vec<&'a GroundTruthRecord>)>> {
    let by_index: BTreeMap<u64, &PointCloudFrame<f64>> = frames.iter().map(|f| (f.frame_index, f)).collect();
    let mut groups: BTreeMap<u64, Vec<&GroundTruthRecord>> = BTreeMap::new();
    for g in gt {
        groups.entry(g.frame_index).or_default().push(g);
    }
    let missing: Vec<u64> = groups.keys().filter(|k| !by_index.contains_key(k)).copied().collect();
    if !missing.is_empty() {
        let shown: Vec<String> = missing.iter().take(10).map(|m| m.to_string()).collect();
        return Err(Error::validation(format!(
            "{} GT frame(s) have no point cloud: {}{}",
            missing.len(),
            shown.join(", "),
            if missing.len() > 10 { ", ..." } else { "" }
        )));
    }
    Ok(groups.into_iter().map(|(k, v)| (by_index[&k], v)).collect())
}

/// Mean number of points inside each GT box, binned by box center.
pub fn point_count_heatmap(gt: &[GroundTruthRecord], frames: &[PointCloudFrame<f64>], grid: &GridSpec) -> Result<HeatMap> {
    Ok(coverage_maps(gt, frames, grid)?.points)
}

/// Mean width, length and height coverage ratios, binned by box center.
pub fn coverage_heatmap(
    gt: &[GroundTruthRecord],
    frames: &[PointCloudFrame<f64>],
    grid: &GridSpec,
) -> Result<(HeatMap, HeatMap, HeatMap)> {
    let m = coverage_maps(gt, frames, grid)?;
    Ok((m.width, m.length, m.height))
}

pub fn coverage_maps(gt: &[GroundTruthRecord], frames: &[PointCloudFrame<f64>], grid: &GridSpec) -> Result<CoverageMaps> {
    let mut maps = CoverageMaps::new(grid)?;
    for (frame, records) in aligned(gt, frames)? {
        maps.add_frame(records, frame);
    }
    Ok(maps)
}
