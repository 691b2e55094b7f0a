use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// A run directory: read-only `input/` plus one fresh directory per execution.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
    input_dir: PathBuf,
}

impl Workspace {
    /// Creates the run directory and copies the task data into `input/`,
    /// marking it read-only.
    pub fn prepare(root: &Path, data_root: &Path) -> Result<Self> {
        let input_dir = root.join("input");
        std::fs::create_dir_all(root).map_err(Error::io(format!("creating {}", root.display())))?;
        if !input_dir.exists() {
            copy_tree(data_root, &input_dir)?;
            make_read_only(&input_dir)?;
        }
        Ok(Self {
            root: root.to_path_buf(),
            input_dir,
        })
    }

    /// Opens an existing run directory.
    pub fn open(root: &Path) -> Result<Self> {
        let input_dir = root.join("input");
        if !input_dir.is_dir() {
            return Err(Error::InvalidInput(format!(
                "{} has no input directory",
                root.display()
            )));
        }
        Ok(Self {
            root: root.to_path_buf(),
            input_dir,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn input_dir(&self) -> &Path {
        &self.input_dir
    }

    /// A fresh execution directory with `input` linked to the shared data.
    /// Any leftover directory of the same name (from an interrupted process)
    /// is cleared first.
    pub fn fresh_exec_dir(&self, name: &str) -> Result<PathBuf> {
        let dir = self.root.join(name);
        if dir.exists() {
            std::fs::remove_dir_all(&dir)
                .map_err(Error::io(format!("clearing {}", dir.display())))?;
        }
        std::fs::create_dir_all(&dir).map_err(Error::io(format!("creating {}", dir.display())))?;
        let input = std::fs::canonicalize(&self.input_dir)
            .map_err(Error::io(format!("resolving {}", self.input_dir.display())))?;
        link_dir(&input, &dir.join("input"))?;
        Ok(dir)
    }
}

#[cfg(unix)]
fn link_dir(target: &Path, link: &Path) -> Result<()> {
    std::os::unix::fs::symlink(target, link)
        .map_err(Error::io(format!("linking {}", link.display())))
}

#[cfg(not(unix))]
fn link_dir(target: &Path, link: &Path) -> Result<()> {
    copy_tree(target, link)
}

fn copy_tree(from: &Path, to: &Path) -> Result<()> {
    std::fs::create_dir_all(to).map_err(Error::io(format!("creating {}", to.display())))?;
    let entries =
        std::fs::read_dir(from).map_err(Error::io(format!("reading {}", from.display())))?;
    for entry in entries {
        let entry = entry.map_err(Error::io(format!("reading {}", from.display())))?;
        let src = entry.path();
        let dst = to.join(entry.file_name());
        if src.is_dir() {
            copy_tree(&src, &dst)?;
        } else {
            std::fs::copy(&src, &dst).map_err(Error::io(format!("copying {}", src.display())))?;
        }
    }
    Ok(())
}

fn make_read_only(path: &Path) -> Result<()> {
    let meta = std::fs::metadata(path).map_err(Error::io(format!("stat {}", path.display())))?;
    if meta.is_dir() {
        let entries =
            std::fs::read_dir(path).map_err(Error::io(format!("reading {}", path.display())))?;
        for entry in entries {
            let entry = entry.map_err(Error::io(format!("reading {}", path.display())))?;
            make_read_only(&entry.path())?;
        }
    }
    let mut perms = meta.permissions();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        perms.set_mode(if meta.is_dir() { 0o555 } else { 0o444 });
    }
    #[cfg(not(unix))]
    perms.set_readonly(true);
    std::fs::set_permissions(path, perms).map_err(Error::io(format!("chmod {}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prepares_read_only_copy() {
        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data");
        std::fs::create_dir_all(data.join("nested")).unwrap();
        std::fs::write(data.join("train.csv"), "a\n1\n").unwrap();
        std::fs::write(data.join("nested/x.txt"), "x").unwrap();
        let ws = Workspace::prepare(&tmp.path().join("run"), &data).unwrap();
        assert_eq!(
            std::fs::read_to_string(ws.input_dir().join("nested/x.txt")).unwrap(),
            "x"
        );
        assert!(std::fs::metadata(ws.input_dir().join("train.csv"))
            .unwrap()
            .permissions()
            .readonly());

        let dir = ws.fresh_exec_dir("exec-main-0000").unwrap();
        assert_eq!(
            std::fs::read_to_string(dir.join("input/train.csv")).unwrap(),
            "a\n1\n"
        );
        std::fs::write(dir.join("junk"), "1").unwrap();
        let again = ws.fresh_exec_dir("exec-main-0000").unwrap();
        assert!(!again.join("junk").exists());
        Workspace::open(ws.root()).unwrap();
    }
}
