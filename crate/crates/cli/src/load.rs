//! Loading inputs from disk and writing outputs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use meshpref::mesh::{load_obj, read_points, Mesh, ObjError};
use meshpref::metrics::{sample_surface, ReferenceCloud, SampledSurface};
use meshpref::preference::{Candidate, CandidateSet, SetFailure};

use crate::exit::{input, CliResult};

/// File name of the reference cloud inside a candidate-set directory.
pub const POINTCLOUD_FILE: &str = "pointcloud.obj";

pub fn mesh(path: &Path) -> CliResult<Mesh> {
    Ok(load_obj(path)?)
}

/// Loads a reference cloud from an OBJ. A file with faces is sampled by
/// area; a file of bare `v` records is used as is.
pub fn point_cloud(path: &Path, samples: usize, seed: u64) -> CliResult<ReferenceCloud> {
    let text = fs::read_to_string(path).map_err(|source| ObjError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw = read_points(&text).map_err(|e| input(anyhow::Error::new(e).context(path.display().to_string())))?;
    let surface = if raw.polygons.is_empty() {
        if raw.vertices.is_empty() {
            return Err(input(anyhow::anyhow!("{}: no points", path.display())));
        }
        SampledSurface::from_points(raw.vertices)
    } else {
        let mesh = meshpref::mesh::parse_obj(&text)?;
        sample_surface(&mesh, samples, seed)?
    };
    Ok(ReferenceCloud::new(surface)?)
}

/// `*.obj` files in `dir`, sorted by name, excluding `skip`.
pub fn obj_files(dir: &Path, skip: Option<&str>) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    let entries = fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))
        .map_err(input)?;
    for entry in entries {
        let path = entry.map_err(input)?.path();
        let is_obj = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj"));
        let skipped = skip.is_some_and(|s| path.file_name().is_some_and(|n| n == s));
        if path.is_file() && is_obj && !skipped {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn subdirectories(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))
        .map_err(input)?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(input)?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Candidates from `files` against `cloud`.
pub fn candidate_set(id: &str, cloud_label: String, cloud: ReferenceCloud, files: &[PathBuf]) -> CliResult<CandidateSet> {
    let candidates = files
        .iter()
        .map(|f| {
            Ok(Candidate {
                id: stem(f),
                mesh: mesh(f)?,
                report: None,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(CandidateSet {
        id: id.to_string(),
        point_cloud: cloud_label,
        reference: cloud,
        candidates,
    })
}

/// One set directory: `pointcloud.obj` plus candidate meshes.
pub fn set_directory(dir: &Path, samples: usize, seed: u64) -> Result<CandidateSet, SetFailure> {
    let id = stem(dir);
    let fail = |e: crate::exit::CliError| SetFailure {
        set: id.clone(),
        message: e.to_string(),
    };
    let cloud_path = dir.join(POINTCLOUD_FILE);
    let cloud = point_cloud(&cloud_path, samples, seed).map_err(fail)?;
    let files = obj_files(dir, Some(POINTCLOUD_FILE)).map_err(fail)?;
    candidate_set(&id, format!("{id}/{POINTCLOUD_FILE}"), cloud, &files).map_err(fail)
}

/// Writes `bytes` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, bytes)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(input),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(input)
        }
    }
}

pub fn json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("output serializes");
    bytes.push(b'\n');
    bytes
}
