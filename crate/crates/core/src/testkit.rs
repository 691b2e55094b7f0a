//! Deterministic harness for exercising pipeline stages: mock provider,
//! scripted runner, virtual clock and a throwaway task and run directory.

use std::path::Path;
use std::sync::Arc;

use tempfile::TempDir;

use crate::config::Config;
use crate::exec::{Budget, ExecPool, ScriptRunner, ScriptedRunner, VirtualClock, Workspace};
use crate::journal::JournalStream;
use crate::llm::{Gateway, MockProvider, TemplateSet};
use crate::scenario::Scenario;
use crate::score::Direction;
use crate::session::{Engine, Session};
use crate::task::TaskDescription;

/// Builder for [`Harness`].
pub struct HarnessBuilder {
    scenario: Scenario,
    config: Config,
    direction: Direction,
    data: Vec<(String, String)>,
    templates: TemplateSet,
}

impl HarnessBuilder {
    pub fn config(mut self, config: Config) -> Self {
        self.config = config;
        self
    }

    pub fn direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    /// Replaces the default data files (`train.csv`, `test.csv`).
    pub fn data(mut self, files: &[(&str, &str)]) -> Self {
        self.data = files
            .iter()
            .map(|(n, c)| (n.to_string(), c.to_string()))
            .collect();
        self
    }

    pub fn templates(mut self, templates: TemplateSet) -> Self {
        self.templates = templates;
        self
    }

    pub fn build(self) -> Harness {
        let dir = tempfile::tempdir().expect("temporary directory");
        let task_dir = dir.path().join("task");
        let data_dir = task_dir.join("data");
        std::fs::create_dir_all(&data_dir).expect("task directory");
        for (name, contents) in &self.data {
            std::fs::write(data_dir.join(name), contents).expect("data file");
        }
        std::fs::write(
            task_dir.join("description.md"),
            "Predict the label column from the features.\n",
        )
        .expect("description");
        std::fs::write(
            task_dir.join("task.meta"),
            format!(
                "metric_name = \"score\"\ndirection = \"{}\"\nsubmission_name = \"submission.csv\"\ninterpreter_ext = \"py\"\n",
                self.direction
            ),
        )
        .expect("task.meta");
        let task = TaskDescription::load(&task_dir).expect("valid harness task");

        let scenario = Arc::new(self.scenario);
        let provider = Arc::new(MockProvider::new(scenario.clone()));
        let runner = Arc::new(ScriptedRunner::new(scenario.clone()));
        let clock: Arc<VirtualClock> = runner.clock();
        let mut config = self.config;
        config.retry.backoff_ms = 0;
        let workspace =
            Workspace::prepare(&dir.path().join("run"), &task.data_root).expect("workspace");
        let engine = Engine {
            gateway: Gateway::new(provider.clone(), self.templates, config.retry),
            runner: runner.clone() as Arc<dyn ScriptRunner>,
            workspace,
            pool: ExecPool::new(4),
            budget: Budget::new(clock.clone(), config.run.total_budget()),
            task,
            config,
            halt_after: None,
        };
        Harness {
            engine,
            provider,
            clock,
            _dir: dir,
        }
    }
}

/// An engine wired to a scenario, plus handles to inspect what happened.
pub struct Harness {
    engine: Engine,
    provider: Arc<MockProvider>,
    clock: Arc<VirtualClock>,
    _dir: TempDir,
}

impl Harness {
    pub fn builder(scenario: Scenario) -> HarnessBuilder {
        HarnessBuilder {
            scenario,
            config: Config::default(),
            direction: Direction::Maximize,
            data: vec![
                ("train.csv".into(), "x,label\n1,0\n2,1\n".into()),
                ("test.csv".into(), "x\n3\n".into()),
            ],
            templates: TemplateSet::bundled(),
        }
    }

    pub fn new(scenario: Scenario) -> Self {
        Self::builder(scenario).build()
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn engine_mut(&mut self) -> &mut Engine {
        &mut self.engine
    }

    /// A session on an in-memory journal stream.
    pub fn session(&self, channel: &str) -> Session<'_> {
        self.session_with_seed(channel, 0)
    }

    pub fn session_with_seed(&self, channel: &str, seed: u64) -> Session<'_> {
        Session::new(&self.engine, JournalStream::in_memory(channel), seed)
    }

    pub fn provider(&self) -> &MockProvider {
        &self.provider
    }

    pub fn clock(&self) -> &VirtualClock {
        &self.clock
    }

    pub fn run_dir(&self) -> &Path {
        self.engine.workspace.root()
    }
}
