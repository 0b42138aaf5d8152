//! On-disk scene layout: `cameras.toml`, one `view_XX.pgm` per camera, and
//! optionally `gt.xyz`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use projmatch::geometry::View;
use projmatch::io::{read_cloud, write_cloud, CameraFile};
use projmatch::pgm::{load_silhouette, save_silhouette, PgmEncoding};
use projmatch::{Camera, PointCloud, SceneSpec, Silhouette};

pub const CAMERAS_FILE: &str = "cameras.toml";
pub const GT_FILE: &str = "gt.xyz";

pub fn view_file(i: usize) -> String {
    format!("view_{i:02}.pgm")
}

/// A scene loaded from a directory.
#[derive(Clone, Debug)]
pub struct SceneDir {
    pub path: PathBuf,
    pub views: Vec<View<f64>>,
    pub silhouettes: Vec<Silhouette>,
    pub splat_radius: Option<f64>,
    pub gt: Option<PointCloud>,
}

impl SceneDir {
    pub fn load(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            bail!("scene directory {} does not exist", dir.display());
        }
        let cameras = CameraFile::read(&dir.join(CAMERAS_FILE))?;
        let views = cameras.to_views::<f64>()?;
        let mut silhouettes = Vec::with_capacity(views.len());
        for (i, (rec, view)) in cameras.views.iter().zip(&views).enumerate() {
            let name = rec.image.clone().unwrap_or_else(|| view_file(i));
            let path = dir.join(&name);
            let sil: Silhouette = load_silhouette(&path)?;
            if sil.width() != view.width || sil.height() != view.height {
                bail!(
                    "{}: image is {}x{} but the camera file says {}x{}",
                    path.display(),
                    sil.width(),
                    sil.height(),
                    view.width,
                    view.height
                );
            }
            silhouettes.push(sil);
        }
        let gt_path = dir.join(GT_FILE);
        let gt = if gt_path.exists() { Some(read_cloud(&gt_path)?) } else { None };
        Ok(Self { path: dir.to_path_buf(), views, silhouettes, splat_radius: cameras.splat_radius, gt })
    }

    /// Camera / silhouette pairs in view order.
    pub fn pairs(&self) -> Vec<(Camera, Silhouette)> {
        self.views.iter().map(|v| v.camera.clone()).zip(self.silhouettes.iter().cloned()).collect()
    }

    pub fn gt_path(&self) -> PathBuf {
        self.path.join(GT_FILE)
    }

    /// Rebuilds the synthetic scene (needs `gt.xyz` and a recorded splat radius).
    pub fn spec(&self) -> Result<SceneSpec> {
        let gt = self
            .gt
            .clone()
            .with_context(|| format!("{} has no {GT_FILE}", self.path.display()))?;
        let radius = self
            .splat_radius
            .with_context(|| format!("{} does not record a splat radius", self.path.join(CAMERAS_FILE).display()))?;
        Ok(SceneSpec::new(gt, self.views.clone(), radius)?)
    }
}

/// Writes cameras, silhouettes and ground truth for `scene` into `dir`.
pub fn write_scene(dir: &Path, scene: &SceneSpec) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let silhouettes = scene.silhouettes()?;
    let mut cameras = CameraFile { splat_radius: Some(scene.splat_radius), views: Vec::new() };
    for (i, (view, sil)) in scene.views.iter().zip(&silhouettes).enumerate() {
        cameras.views.push(view.to_record(Some(view_file(i))));
        save_silhouette(&dir.join(view_file(i)), sil, PgmEncoding::Binary)?;
    }
    cameras.write(&dir.join(CAMERAS_FILE))?;
    write_cloud(&dir.join(GT_FILE), &scene.gt_cloud)?;
    Ok(())
}
