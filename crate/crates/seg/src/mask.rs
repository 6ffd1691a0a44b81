use std::path::Path;

use arbor_core::io::{write_json, write_mask_png8, write_palette_png8};
use arbor_core::Result;
use serde::{Deserialize, Serialize};

/// The cascade stage that removed a pixel, or `Kept`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Stage {
    Kept = 0,
    Far = 1,
    Sky = 2,
    Ground = 3,
    Cluster = 4,
}

/// Palette for provenance images, indexed by `Stage as u8`.
pub const PROVENANCE_PALETTE: [[u8; 3]; 5] = [[40, 160, 40], [60, 60, 60], [110, 170, 230], [150, 100, 50], [220, 60, 60]];

/// Per-pixel keep flags with the removing stage of every dropped pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegMask {
    width: usize,
    height: usize,
    provenance: Vec<Stage>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub kept: usize,
    pub far: usize,
    pub sky: usize,
    pub ground: usize,
    pub cluster: usize,
}

impl StageCounts {
    pub fn total(&self) -> usize {
        self.kept + self.far + self.sky + self.ground + self.cluster
    }
}

impl SegMask {
    pub fn all_kept(width: usize, height: usize) -> Self {
        SegMask {
            width,
            height,
            provenance: vec![Stage::Kept; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize) -> Stage) -> Self {
        SegMask {
            width,
            height,
            provenance: (0..width * height).map(f).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn keep(&self, i: usize) -> bool {
        self.provenance[i] == Stage::Kept
    }

    pub fn provenance(&self) -> &[Stage] {
        &self.provenance
    }

    pub fn bits(&self) -> Vec<bool> {
        self.provenance.iter().map(|&s| s == Stage::Kept).collect()
    }

    pub fn kept_count(&self) -> usize {
        self.provenance.iter().filter(|&&s| s == Stage::Kept).count()
    }

    /// Drops pixel `i` if still kept; earlier removals keep their label.
    pub fn remove(&mut self, i: usize, stage: Stage) {
        if self.provenance[i] == Stage::Kept {
            self.provenance[i] = stage;
        }
    }

    /// Intersection of keep sets; a pixel dropped by both keeps `self`'s label.
    pub fn and(&self, other: &SegMask) -> SegMask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        let mut out = self.clone();
        for (i, &s) in other.provenance.iter().enumerate() {
            out.remove(i, s);
        }
        out
    }

    pub fn counts(&self) -> StageCounts {
        let mut c = StageCounts::default();
        for s in &self.provenance {
            match s {
                Stage::Kept => c.kept += 1,
                Stage::Far => c.far += 1,
                Stage::Sky => c.sky += 1,
                Stage::Ground => c.ground += 1,
                Stage::Cluster => c.cluster += 1,
            }
        }
        c
    }
}

/// Writes `<stem>.mask.png` (255 = keep), `<stem>.provenance.png` (palette)
/// and `<stem>.stages.json` into `dir`.
pub fn write_mask_outputs(dir: impl AsRef<Path>, stem: &str, mask: &SegMask) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_mask_png8(dir.join(format!("{stem}.mask.png")), mask.width, mask.height, &mask.bits())?;
    let idx: Vec<u8> = mask.provenance.iter().map(|&s| s as u8).collect();
    write_palette_png8(
        dir.join(format!("{stem}.provenance.png")),
        mask.width,
        mask.height,
        &idx,
        &PROVENANCE_PALETTE,
    )?;
    write_json(dir.join(format!("{stem}.stages.json")), &mask.counts())
}
