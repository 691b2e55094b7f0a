//! Task ingestion: `task.meta`, `description.md` and the `data/` directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::score::Direction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDescription {
    pub text: String,
    pub metric_name: String,
    pub direction: Direction,
    pub data_root: PathBuf,
    pub runtime_hint: Option<String>,
    /// File the final script must write into its working directory.
    pub submission_name: String,
    /// Extension given to script files, e.g. `py`.
    pub script_ext: String,
}

/// Contents of `task.meta`. Every field is explicit; nothing is inferred
/// from the prose description.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskMeta {
    metric_name: String,
    direction: Direction,
    submission_name: String,
    interpreter_ext: String,
    runtime_hint: Option<String>,
}

impl TaskDescription {
    pub fn load(task_dir: &Path) -> Result<Self> {
        let meta_path = task_dir.join("task.meta");
        let meta_text = std::fs::read_to_string(&meta_path)
            .map_err(Error::io(format!("reading {}", meta_path.display())))?;
        let meta: TaskMeta = toml::from_str(&meta_text)
            .map_err(|e| Error::Config(format!("{}: {e}", meta_path.display())))?;
        let desc_path = task_dir.join("description.md");
        let text = std::fs::read_to_string(&desc_path)
            .map_err(Error::io(format!("reading {}", desc_path.display())))?;
        let task = Self {
            text,
            metric_name: meta.metric_name,
            direction: meta.direction,
            data_root: task_dir.join("data"),
            runtime_hint: meta.runtime_hint,
            submission_name: meta.submission_name,
            script_ext: meta.interpreter_ext.trim_start_matches('.').to_string(),
        };
        task.validate()?;
        Ok(task)
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(Error::InvalidInput("task description is empty".into()));
        }
        if self.metric_name.trim().is_empty() {
            return Err(Error::InvalidInput("metric_name is empty".into()));
        }
        if self.submission_name.contains(['/', '\\']) || self.submission_name.is_empty() {
            return Err(Error::InvalidInput(format!(
                "submission_name `{}` must be a plain file name",
                self.submission_name
            )));
        }
        std::fs::read_dir(&self.data_root).map_err(Error::io(format!(
            "reading data root {}",
            self.data_root.display()
        )))?;
        Ok(())
    }

    /// Text given to agents as the task statement.
    pub fn prompt_text(&self) -> String {
        let mut out = self.text.trim_end().to_string();
        out.push_str(&format!(
            "\n\nEvaluation metric: {} ({} is better).",
            self.metric_name,
            match self.direction {
                Direction::Maximize => "higher",
                Direction::Minimize => "lower",
            }
        ));
        if let Some(hint) = &self.runtime_hint {
            out.push_str(&format!("\n{}", hint.trim_end()));
        }
        out
    }

    /// Relative paths of every file under the data root, sorted.
    pub fn data_files(&self) -> Result<Vec<String>> {
        let mut files = Vec::new();
        collect_files(&self.data_root, &self.data_root, &mut files)?;
        files.sort();
        Ok(files)
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    let entries =
        std::fs::read_dir(dir).map_err(Error::io(format!("listing {}", dir.display())))?;
    for entry in entries {
        let entry = entry.map_err(Error::io(format!("listing {}", dir.display())))?;
        let path = entry.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if let Ok(rel) = path.strip_prefix(root) {
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_task(dir: &Path, meta: &str) {
        std::fs::create_dir_all(dir.join("data/sub")).unwrap();
        std::fs::write(dir.join("data/train.csv"), "a,b\n1,2\n").unwrap();
        std::fs::write(dir.join("data/sub/extra.csv"), "c\n3\n").unwrap();
        std::fs::write(dir.join("description.md"), "Predict b from a.\n").unwrap();
        std::fs::write(dir.join("task.meta"), meta).unwrap();
    }

    #[test]
    fn loads_task_directory() {
        let tmp = tempfile::tempdir().unwrap();
        write_task(
            tmp.path(),
            "metric_name = \"rmse\"\ndirection = \"minimize\"\nsubmission_name = \"submission.csv\"\ninterpreter_ext = \".py\"\n",
        );
        let task = TaskDescription::load(tmp.path()).unwrap();
        assert_eq!(task.direction, Direction::Minimize);
        assert_eq!(task.script_ext, "py");
        assert_eq!(
            task.data_files().unwrap(),
            vec!["sub/extra.csv", "train.csv"]
        );
        assert!(task.prompt_text().contains("rmse (lower is better)"));
    }

    #[test]
    fn direction_is_required() {
        let tmp = tempfile::tempdir().unwrap();
        write_task(
            tmp.path(),
            "metric_name = \"rmse\"\nsubmission_name = \"submission.csv\"\ninterpreter_ext = \"py\"\n",
        );
        assert!(matches!(
            TaskDescription::load(tmp.path()),
            Err(Error::Config(_))
        ));
    }
}
