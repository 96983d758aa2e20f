use std::fs;
use std::path::{Path, PathBuf};

use super::{DatasetError, DatasetManifest, SampleMeta, SequenceSample};
use crate::renderer::io::{load_gray, load_rgb, save_png};
use crate::renderer::GtMask;
use crate::segment::WINDOW;

pub const MANIFEST_FILE: &str = "manifest.json";
const META_FILE: &str = "meta.json";
const GT_FILE: &str = "gt.png";

pub fn sample_dir_name(meta: &SampleMeta) -> String {
    format!("seq_{:05}_win_{:03}", meta.sequence_index, meta.window_index)
}

fn frame_file(k: usize) -> String {
    format!("frame_{}.png", k + 1)
}

fn sample_files() -> Vec<String> {
    (0..WINDOW).map(frame_file).chain([GT_FILE.to_string(), META_FILE.to_string()]).collect()
}

/// Writes one directory per sample, then the manifest via write-and-rename.
pub fn write_dataset(samples: &[SequenceSample], manifest: &DatasetManifest, root: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(root).map_err(|e| DatasetError::io(root, e))?;
    for s in samples {
        s.validate()?;
        let dir = root.join(sample_dir_name(&s.meta));
        fs::create_dir_all(&dir).map_err(|e| DatasetError::io(&dir, e))?;
        for (k, f) in s.frames.iter().enumerate() {
            save_png(f, &dir.join(frame_file(k)))?;
        }
        save_png(&s.gt.mask, &dir.join(GT_FILE))?;
        let meta = serde_json::to_string_pretty(&s.meta).map_err(|e| DatasetError::io(&dir, e))?;
        fs::write(dir.join(META_FILE), meta + "\n").map_err(|e| DatasetError::io(dir.join(META_FILE), e))?;
    }
    let tmp = root.join(format!("{MANIFEST_FILE}.tmp"));
    let text = serde_json::to_string_pretty(manifest).map_err(|e| DatasetError::io(&tmp, e))?;
    fs::write(&tmp, text + "\n").map_err(|e| DatasetError::io(&tmp, e))?;
    fs::rename(&tmp, root.join(MANIFEST_FILE)).map_err(|e| DatasetError::io(root.join(MANIFEST_FILE), e))?;
    Ok(())
}

pub fn read_manifest(root: &Path) -> Result<DatasetManifest, DatasetError> {
    let path = root.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| DatasetError::io(&path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| DatasetError::io(&path, e))?;
    let computed = manifest.config.hash();
    if computed != manifest.config_hash {
        return Err(DatasetError::CorruptManifest { stored: manifest.config_hash, computed });
    }
    Ok(manifest)
}

/// Sample metadata in manifest order, without decoding any image.
pub fn read_metas(root: &Path) -> Result<(Vec<SampleMeta>, DatasetManifest), DatasetError> {
    let manifest = read_manifest(root)?;
    let metas = manifest
        .samples
        .iter()
        .map(|name| {
            let path = root.join(name).join(META_FILE);
            let text = fs::read_to_string(&path).map_err(|e| DatasetError::io(&path, e))?;
            serde_json::from_str(&text).map_err(|e| DatasetError::io(&path, e))
        })
        .collect::<Result<Vec<SampleMeta>, _>>()?;
    Ok((metas, manifest))
}

pub fn sample_frame_path(root: &Path, meta: &SampleMeta, k: usize) -> PathBuf {
    root.join(sample_dir_name(meta)).join(frame_file(k))
}

pub fn sample_gt_path(root: &Path, meta: &SampleMeta) -> PathBuf {
    root.join(sample_dir_name(meta)).join(GT_FILE)
}

/// Loads and validates every sample listed in the manifest.
pub fn read_dataset(root: &Path) -> Result<(Vec<SequenceSample>, DatasetManifest), DatasetError> {
    let manifest = read_manifest(root)?;
    let missing: Vec<PathBuf> = manifest
        .samples
        .iter()
        .flat_map(|name| sample_files().into_iter().map(move |f| root.join(name).join(f)))
        .filter(|p| !p.is_file())
        .collect();
    if !missing.is_empty() {
        return Err(DatasetError::MissingFiles(missing));
    }
    let samples = manifest
        .samples
        .iter()
        .map(|name| {
            let dir = root.join(name);
            let meta_path = dir.join(META_FILE);
            let text = fs::read_to_string(&meta_path).map_err(|e| DatasetError::io(&meta_path, e))?;
            let meta: SampleMeta = serde_json::from_str(&text).map_err(|e| DatasetError::io(&meta_path, e))?;
            let frames = (0..WINDOW).map(|k| load_rgb(&dir.join(frame_file(k)))).collect::<Result<Vec<_>, _>>()?;
            let gt = load_gray(&dir.join(GT_FILE))?.map(|v| f64::from(u8::from(v > 0.5)));
            let sample = SequenceSample { frames, gt: GtMask { mask: gt, frame_index: meta.middle_frame() }, meta };
            sample.validate()?;
            if sample_dir_name(&sample.meta) != *name {
                return Err(DatasetError::InvalidSample { name: name.clone(), reason: "meta does not match directory".into() });
            }
            Ok(sample)
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    Ok((samples, manifest))
}

#[cfg(test)]
mod tests {
    use super::super::{generate_dataset, DatasetConfig};
    use super::*;

    fn small() -> (DatasetConfig, Vec<SequenceSample>) {
        let cfg = DatasetConfig { n_sequences: 2, width: 80, height: 64, clip_frames: 13, ..DatasetConfig::default() };
        let samples = generate_dataset(&cfg, 77, 2).unwrap();
        (cfg, samples)
    }

    #[test]
    fn round_trip() {
        let (cfg, samples) = small();
        assert_eq!(samples.len(), 10);
        let manifest = DatasetManifest::new(77, &cfg, &samples);
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&samples, &manifest, dir.path()).unwrap();
        assert!(!dir.path().join("manifest.json.tmp").exists());
        let (back, m2) = read_dataset(dir.path()).unwrap();
        assert_eq!(m2, manifest);
        assert_eq!(back.len(), samples.len());
        for (a, b) in samples.iter().zip(&back) {
            assert_eq!(a.meta, b.meta);
            assert_eq!(a.gt, b.gt);
            for (fa, fb) in a.frames.iter().zip(&b.frames) {
                let err = fa.data().iter().zip(fb.data()).map(|(x, y)| (x - y).abs()).fold(0.0f32, f32::max);
                assert!(err <= 1.0 / 255.0, "{err}");
            }
        }
    }

    #[test]
    fn empty_dataset() {
        let cfg = DatasetConfig { n_sequences: 0, ..DatasetConfig::default() };
        let manifest = DatasetManifest::new(1, &cfg, &[]);
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&[], &manifest, dir.path()).unwrap();
        let entries: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(entries.len(), 1);
        let (samples, m) = read_dataset(dir.path()).unwrap();
        assert!(samples.is_empty());
        assert_eq!(m.n_samples, 0);
    }

    #[test]
    fn tampered_config_and_missing_files() {
        let (cfg, samples) = small();
        let manifest = DatasetManifest::new(77, &cfg, &samples);
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&samples, &manifest, dir.path()).unwrap();

        fs::remove_file(dir.path().join(&manifest.samples[1]).join("gt.png")).unwrap();
        fs::remove_file(dir.path().join(&manifest.samples[3]).join("frame_2.png")).unwrap();
        match read_dataset(dir.path()) {
            Err(DatasetError::MissingFiles(m)) => assert_eq!(m.len(), 2),
            other => panic!("{other:?}"),
        }

        let path = dir.path().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).unwrap().replace("\"n_sequences\": 2,\n    \"width\"", "\"n_sequences\": 3,\n    \"width\"");
        fs::write(&path, text).unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(DatasetError::CorruptManifest { .. })));
    }
}
