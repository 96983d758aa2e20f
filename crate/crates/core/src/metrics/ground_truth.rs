use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MetricsError, PixelSet, Region};
use crate::renderer::io::load_gray;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameGroundTruth {
    pub frame: usize,
    #[serde(default)]
    pub regions: Vec<Region>,
}

/// `{"width": W, "height": H, "frames": [{"frame": k, "regions": [...]}]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthFile {
    pub width: u32,
    pub height: u32,
    pub frames: Vec<FrameGroundTruth>,
}

impl GroundTruthFile {
    /// Rasterizes every frame's regions; mask paths resolve against `base`.
    pub fn rasterize(&self, base: &Path) -> Result<Vec<(usize, Vec<PixelSet>)>, MetricsError> {
        let (w, h) = (self.width, self.height);
        self.frames
            .iter()
            .map(|f| {
                let sets = f
                    .regions
                    .iter()
                    .map(|r| match r {
                        Region::Polygon(v) => Ok(PixelSet::from_polygon(v, w, h)),
                        Region::BBox(b) => PixelSet::from_bbox(*b, w, h),
                        Region::Mask(p) => {
                            let img = load_gray(&base.join(p)).map_err(|e| MetricsError::GroundTruth(format!("{}: {e}", p.display())))?;
                            if img.size() != (h, w) {
                                return Err(MetricsError::GridMismatch);
                            }
                            Ok(PixelSet::from_mask(&img, 0.0))
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((f.frame, sets))
            })
            .collect()
    }
}

pub fn load_ground_truth(path: &Path) -> Result<Vec<(usize, Vec<PixelSet>)>, MetricsError> {
    let text = std::fs::read_to_string(path).map_err(|e| MetricsError::GroundTruth(format!("{}: {e}", path.display())))?;
    let file: GroundTruthFile = serde_json::from_str(&text).map_err(|e| MetricsError::GroundTruth(format!("{}: {e}", path.display())))?;
    file.rasterize(path.parent().unwrap_or(Path::new(".")))
}
