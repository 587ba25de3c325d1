use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::blur::BlurSpec;
use super::camera::Camera;
use super::image::Image;
use crate::error::{Error, Result};
use crate::rbk::ScrewAxis;

const MAGIC: &str = "sharpfield-dataset 1";

#[derive(Clone, Debug, PartialEq)]
pub struct View {
    pub camera: Camera,
    pub blurred: Image,
    pub sharp: Option<Image>,
}

/// What a loader may read. Training code opens datasets [`Access::Blind`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Access {
    Blind,
    Audit,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub views: Vec<View>,
    access: Access,
    blur: Vec<BlurSpec>,
}

fn view_file(dir: &Path, kind: &str, i: usize) -> PathBuf {
    dir.join(format!("{kind}_{i:04}.f32"))
}

/// Writes the manifest, float images (plus PPM previews) and the audit-only
/// blur record.
pub fn export_dataset(dir: &Path, views: &[View], blur: &[BlurSpec]) -> Result<()> {
    let first = views
        .first()
        .ok_or_else(|| Error::Config("dataset needs at least one view".into()))?;
    if blur.len() != views.len() {
        return Err(Error::Config(format!(
            "{} views but {} blur records",
            views.len(),
            blur.len()
        )));
    }
    let c0 = first.camera;
    for v in views {
        let c = v.camera;
        if (c.width, c.height, c.focal, c.t_near, c.t_far)
            != (c0.width, c0.height, c0.focal, c0.t_near, c0.t_far)
        {
            return Err(Error::Config("all views must share intrinsics".into()));
        }
        v.blurred
            .same_shape(&Image::filled(c.width, c.height, [0.0; 3]))?;
        if let Some(s) = &v.sharp {
            s.same_shape(&v.blurred)?;
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let cams: Vec<Camera> = views.iter().map(|v| v.camera).collect();
    write_cameras(&dir.join("manifest.txt"), &cams)?;

    for (i, v) in views.iter().enumerate() {
        v.blurred.save_f32(&view_file(dir, "view", i))?;
        v.blurred.save_ppm(&dir.join(format!("view_{i:04}.ppm")))?;
        if let Some(s) = &v.sharp {
            s.save_f32(&view_file(dir, "sharp", i))?;
            s.save_ppm(&dir.join(format!("sharp_{i:04}.ppm")))?;
        }
    }

    let mut b = String::from("# audit only; never read during training\n");
    for (i, spec) in blur.iter().enumerate() {
        match spec {
            BlurSpec::Motion { jitters } => {
                for j in jitters {
                    let vals: Vec<String> = j.r.iter().chain(&j.v).map(f64::to_string).collect();
                    writeln!(b, "motion {i} {}", vals.join(" ")).unwrap();
                }
            }
            BlurSpec::Defocus {
                aperture,
                focus_distance,
                samples,
            } => writeln!(b, "defocus {i} {aperture} {focus_distance} {samples}").unwrap(),
        }
    }
    let path = dir.join("blurspec.txt");
    fs::write(&path, b).map_err(|e| Error::io(&path, e))
}

/// Writes the manifest: magic line, shared intrinsics, then one row-major
/// `[R | t]` pose per camera.
pub fn write_cameras(path: &Path, cams: &[Camera]) -> Result<()> {
    let c0 = cams
        .first()
        .ok_or_else(|| Error::Config("manifest needs at least one camera".into()))?;
    let mut m = String::new();
    writeln!(m, "{MAGIC}").unwrap();
    writeln!(m, "views {}", cams.len()).unwrap();
    writeln!(m, "width {}", c0.width).unwrap();
    writeln!(m, "height {}", c0.height).unwrap();
    writeln!(m, "focal {}", c0.focal).unwrap();
    writeln!(m, "t_near {}", c0.t_near).unwrap();
    writeln!(m, "t_far {}", c0.t_far).unwrap();
    for (i, c) in cams.iter().enumerate() {
        let pose: Vec<String> = c.pose_row_major().iter().map(f64::to_string).collect();
        writeln!(m, "pose {i} {}", pose.join(" ")).unwrap();
    }
    fs::write(path, m).map_err(|e| Error::io(path, e))
}

/// Cameras of a manifest written by [`write_cameras`].
pub fn read_cameras(path: &Path) -> Result<Vec<Camera>> {
    let text = read_text(path)?;
    let mut lines = Lines {
        path,
        iter: text.lines().enumerate(),
    };
    match lines.iter.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err(Error::parse(path, 1, format!("expected `{MAGIC}` header"))),
    }
    let n: usize = lines.value("views")?;
    let width: usize = lines.value("width")?;
    let height: usize = lines.value("height")?;
    let focal: f64 = lines.value("focal")?;
    let t_near: f64 = lines.value("t_near")?;
    let t_far: f64 = lines.value("t_far")?;
    let mut cams = Vec::with_capacity(n);
    for i in 0..n {
        let (ln, f) = lines.keyed("pose")?;
        if f.len() != 13 || num::<usize>(path, ln, f[0])? != i {
            return Err(Error::parse(
                path,
                ln,
                format!("expected `pose {i}` followed by 12 numbers"),
            ));
        }
        let mut pose = [0.0; 12];
        for (p, s) in pose.iter_mut().zip(&f[1..]) {
            *p = num(path, ln, s)?;
        }
        cams.push(
            Camera::from_row_major(&pose, focal, width, height, t_near, t_far)
                .map_err(|e| Error::parse(path, ln, e.to_string()))?,
        );
    }
    if let Some((ln, f)) = lines.next_fields() {
        return Err(Error::parse(path, ln, format!("unexpected `{}`", f[0])));
    }
    Ok(cams)
}

struct Lines<'a> {
    path: &'a Path,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_fields(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, line) in self.iter.by_ref() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Some((i + 1, line.split_whitespace().collect()));
        }
        None
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, f) = self
            .next_fields()
            .ok_or_else(|| Error::parse(self.path, 0, format!("missing `{key}`")))?;
        if f[0] != key {
            return Err(Error::parse(
                self.path,
                n,
                format!("expected `{key}`, found `{}`", f[0]),
            ));
        }
        Ok((n, f[1..].to_vec()))
    }

    fn value<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let (n, f) = self.keyed(key)?;
        if f.len() != 1 {
            return Err(Error::parse(
                self.path,
                n,
                format!("`{key}` takes one value"),
            ));
        }
        num(self.path, n, f[0])
    }
}

fn num<T: FromStr>(path: &Path, line: usize, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::parse(path, line, format!("bad number `{s}`")))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_blur(path: &Path, text: &str, n_views: usize) -> Result<Vec<BlurSpec>> {
    let mut out: Vec<Option<BlurSpec>> = vec![None; n_views];
    let mut lines = Lines {
        path,
        iter: text.lines().enumerate(),
    };
    while let Some((n, f)) = lines.next_fields() {
        let view: usize = num(path, n, f.get(1).copied().unwrap_or(""))?;
        if view >= n_views {
            return Err(Error::parse(path, n, format!("view {view} out of range")));
        }
        match (f[0], f.len()) {
            ("motion", 8) => {
                let v: Vec<f64> = f[2..]
                    .iter()
                    .map(|s| num(path, n, s))
                    .collect::<Result<_>>()?;
                let j = ScrewAxis::from_slice(&v);
                match &mut out[view] {
                    Some(BlurSpec::Motion { jitters }) => jitters.push(j),
                    None => out[view] = Some(BlurSpec::Motion { jitters: vec![j] }),
                    Some(_) => return Err(Error::parse(path, n, "mixed blur kinds for one view")),
                }
            }
            ("defocus", 5) => {
                if out[view].is_some() {
                    return Err(Error::parse(path, n, "duplicate defocus record"));
                }
                out[view] = Some(BlurSpec::Defocus {
                    aperture: num(path, n, f[2])?,
                    focus_distance: num(path, n, f[3])?,
                    samples: num(path, n, f[4])?,
                });
            }
            _ => {
                return Err(Error::parse(
                    path,
                    n,
                    format!("unrecognized record `{}`", f[0]),
                ))
            }
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(i, s)| {
            s.ok_or_else(|| Error::parse(path, 0, format!("no blur record for view {i}")))
        })
        .collect()
}

impl Dataset {
    pub fn open(dir: &Path, access: Access) -> Result<Dataset> {
        let cams = read_cameras(&dir.join("manifest.txt"))?;
        let mut views = Vec::with_capacity(cams.len());
        for (i, camera) in cams.into_iter().enumerate() {
            let (w, h) = (camera.width, camera.height);
            let blurred = Image::load_f32(&view_file(dir, "view", i), w, h)?;
            let sp = view_file(dir, "sharp", i);
            let sharp = if sp.exists() {
                Some(Image::load_f32(&sp, w, h)?)
            } else {
                None
            };
            views.push(View {
                camera,
                blurred,
                sharp,
            });
        }
        let n = views.len();
        let blur = match access {
            Access::Blind => Vec::new(),
            Access::Audit => {
                let p = dir.join("blurspec.txt");
                parse_blur(&p, &read_text(&p)?, n)?
            }
        };
        Ok(Dataset {
            views,
            access,
            blur,
        })
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    /// The generating blur parameters; blind loaders get [`Error::BlindAccess`].
    pub fn blur_specs(&self) -> Result<&[BlurSpec]> {
        match self.access {
            Access::Blind => Err(Error::BlindAccess),
            Access::Audit => Ok(&self.blur),
        }
    }

    pub fn has_ground_truth(&self) -> bool {
        self.views.iter().all(|v| v.sharp.is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (Vec<View>, Vec<BlurSpec>) {
        let cams = [
            Camera::look_at(
                [0.1, 0.2, 3.0],
                [0.0; 3],
                [0.0, 1.0, 0.0],
                17.3,
                4,
                3,
                0.5,
                4.5,
            )
            .unwrap(),
            Camera::look_at(
                [2.0, 0.7, 1.0],
                [0.0; 3],
                [0.0, 1.0, 0.0],
                17.3,
                4,
                3,
                0.5,
                4.5,
            )
            .unwrap(),
        ];
        let views = cams
            .iter()
            .enumerate()
            .map(|(i, &camera)| View {
                camera,
                blurred: Image::new(
                    4,
                    3,
                    (0..36)
                        .map(|k| (k as f32 * 0.37 + i as f32).sin().abs())
                        .collect(),
                )
                .unwrap(),
                sharp: Some(Image::filled(4, 3, [0.1 * i as f32, 0.3, 1.0 / 3.0])),
            })
            .collect();
        let blur = vec![
            BlurSpec::Motion {
                jitters: vec![
                    ScrewAxis::new([0.1, 1.0 / 3.0, 0.0], [0.0, 0.2, -0.05]),
                    ScrewAxis::new([0.0; 3], [0.0; 3]),
                ],
            },
            BlurSpec::Defocus {
                aperture: 0.05,
                focus_distance: 2.123456789,
                samples: 16,
            },
        ];
        (views, blur)
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (views, blur) = sample();
        export_dataset(dir.path(), &views, &blur).unwrap();
        let ds = Dataset::open(dir.path(), Access::Audit).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.views, views);
        assert_eq!(ds.blur_specs().unwrap(), &blur[..]);
        assert!(ds.has_ground_truth());
    }

    #[test]
    fn blind_loader_cannot_read_blur() {
        let dir = tempfile::tempdir().unwrap();
        let (views, blur) = sample();
        export_dataset(dir.path(), &views, &blur).unwrap();
        let ds = Dataset::open(dir.path(), Access::Blind).unwrap();
        assert!(matches!(ds.blur_specs(), Err(Error::BlindAccess)));
        // Blind opening works even without the audit file.
        fs::remove_file(dir.path().join("blurspec.txt")).unwrap();
        assert_eq!(Dataset::open(dir.path(), Access::Blind).unwrap().len(), 2);
    }

    #[test]
    fn malformed_manifest_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let (views, blur) = sample();
        export_dataset(dir.path(), &views, &blur).unwrap();
        let p = dir.path().join("manifest.txt");
        let text = fs::read_to_string(&p)
            .unwrap()
            .replace("focal 17.3", "focal abc");
        fs::write(&p, text).unwrap();
        match Dataset::open(dir.path(), Access::Blind) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_ground_truth_is_visible() {
        let dir = tempfile::tempdir().unwrap();
        let (mut views, blur) = sample();
        views[1].sharp = None;
        export_dataset(dir.path(), &views, &blur).unwrap();
        assert!(!Dataset::open(dir.path(), Access::Blind)
            .unwrap()
            .has_ground_truth());
    }
}
