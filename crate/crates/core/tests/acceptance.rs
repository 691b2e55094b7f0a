//! Acceptance suite: one PASS/FAIL line per criterion. Runs offline against
//! the mock provider; only criterion 9 (and 10, which reuses its fixture)
//! runs real scripts.

use std::cell::Cell;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{
    Config as PropConfig, RngAlgorithm, TestCaseError, TestRng, TestRunner,
};

use blocksmith_core::config::{AblationOverride, Config};
use blocksmith_core::ensemble::ensemble;
use blocksmith_core::exec::{parse_score, ScriptedOutcome};
use blocksmith_core::finalize::remove_subsampling;
use blocksmith_core::init::generate_initial_solution;
use blocksmith_core::journal::{decision_trace, read_events, Event, Phase, Purpose, Verdict};
use blocksmith_core::llm::AgentRole;
use blocksmith_core::orchestrator::{self, journal_path, RunOptions, RunReport};
use blocksmith_core::refine::refine;
use blocksmith_core::robustness::{check_leakage, evaluate_with_repair, Repair};
use blocksmith_core::scenario::Scenario;
use blocksmith_core::score::{first_argmax, improves, improves_or_ties, Direction, ScoreRecord};
use blocksmith_core::solution::{Origin, Solution, SolutionId};
use blocksmith_core::testkit::Harness;
use blocksmith_core::Error;

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

const CLEAN: &str = r#"{"code_block": "", "leakage": false}"#;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn trace(events: &[Event]) -> Vec<String> {
    decision_trace(events)
}

fn scored(id: &str, value: f64, direction: Direction) -> Solution {
    Solution::new(
        SolutionId::new(id),
        format!("{}()", id.replace(['/', '-'], "_")),
        Origin::Refined,
    )
    .unwrap()
    .with_score(ScoreRecord::new(value, direction).unwrap())
}

// 1 -------------------------------------------------------------------------

fn merge_scenario(name: &str) -> Check {
    let dir = fixture(name);
    let config = ok(Config::load(&dir.join("config.toml")))?;
    let m = config.run.num_candidates as usize;
    let direction = match std::fs::read_to_string(dir.join("direction.txt")) {
        Ok(text) if text.trim() == "minimize" => Direction::Minimize,
        _ => Direction::Maximize,
    };
    let scenario = ok(Scenario::load(&dir))?;
    let expected = scenario.expected_trace("lane-1").map(<[String]>::to_vec);
    let h = Harness::builder(scenario)
        .config(config)
        .direction(direction)
        .build();
    let mut sess = h.session("lane-1");
    ok(generate_initial_solution(&mut sess))?;
    let got = trace(sess.journal().events());
    ensure!(
        Some(&got) == expected.as_ref(),
        "{name}: trace {got:?}, expected {expected:?}"
    );

    let merges = h.provider().prompts(AgentRole::Merger).len();
    let merge_lines: Vec<&String> = got.iter().filter(|l| l.starts_with("merge")).collect();
    let decided = merge_lines
        .iter()
        .filter(|l| l.starts_with("merge accept") || l.starts_with("merge reject"))
        .count();
    ensure!(
        merges <= m.saturating_sub(1),
        "{name}: {merges} merger calls for M={m}"
    );
    ensure!(
        merges == decided,
        "{name}: {merges} merger calls but {decided} merge decisions"
    );
    if let Some(i) = merge_lines
        .iter()
        .position(|l| l.starts_with("merge reject"))
    {
        ensure!(
            merge_lines.len() == i + 2 && merge_lines[i + 1] == "merge stop",
            "{name}: merging did not stop at the first rejection"
        );
    }
    Ok(())
}

fn criterion_1() -> Check {
    for name in [
        "merge_worked",
        "merge_tie",
        "merge_all_accept",
        "merge_minimize",
        "merge_failures",
    ] {
        merge_scenario(name)?;
    }
    Ok(())
}

// 2 -------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Landscape {
    steps: u32,
    inner: u32,
    direction: Direction,
    start: i32,
    /// Scripted run outcomes in order; `None` is a crash.
    outcomes: Vec<Option<i32>>,
}

fn landscape() -> impl Strategy<Value = Landscape> {
    let outcome = prop_oneof![4 => (0..10i32).prop_map(Some), 1 => Just(None)];
    (
        1..=5u32,
        1..=5u32,
        any::<bool>(),
        0..10i32,
        proptest::collection::vec(outcome, 60),
    )
        .prop_map(|(steps, inner, maximize, start, outcomes)| Landscape {
            steps,
            inner,
            direction: if maximize {
                Direction::Maximize
            } else {
                Direction::Minimize
            },
            start,
            outcomes,
        })
}

fn tenths(v: i32) -> f64 {
    f64::from(v) / 10.0
}

fn refine_landscape(l: &Landscape) -> Result<(), TestCaseError> {
    let mut config = Config::default();
    config.run.outer_steps = l.steps;
    config.run.inner_steps = l.inner;
    config.run.max_debug_rounds = 1;
    config.guidance.ablation = (1..=l.steps)
        .map(|step| AblationOverride {
            step,
            summary: "the model line matters most".into(),
        })
        .collect();

    let mut sc = Scenario::new();
    sc.fallback(
        AgentRole::Extractor,
        r#"{"code_block": "model = A()", "plan": "plan 0"}"#,
    )
    .fallback(AgentRole::LeakageExtractor, CLEAN)
    .fallback(
        AgentRole::Debugger,
        "```python\nimport a\nmodel = A()\nfit(model)\n```",
    )
    .fallback_run(ScriptedOutcome::score(0.5));
    for n in 0..l.steps * l.inner {
        sc.respond(
            AgentRole::Coder,
            format!("```python\nmodel = A()\ntrial_{n} = 1\n```"),
        )
        .respond(AgentRole::Planner, format!("plan {}", n + 1));
    }
    for o in &l.outcomes {
        sc.run(match o {
            Some(v) => ScriptedOutcome::score(tenths(*v)),
            None => ScriptedOutcome::crash("RuntimeError: diverged"),
        });
    }
    let h = Harness::builder(sc)
        .config(config)
        .direction(l.direction)
        .build();
    let mut sess = h.session("lane-1");
    let s0 = Solution::new(
        SolutionId::new("lane-1/0"),
        "import a\nmodel = A()\nfit(model)\n",
        Origin::Merged,
    )
    .unwrap()
    .with_score(ScoreRecord::new(tenths(l.start), l.direction).unwrap());
    let start = s0.score.unwrap();
    let best = refine(&mut sess, s0).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let events = sess.journal().events();
    let record = |v: f64| ScoreRecord::new(v, l.direction).unwrap();

    // The returned solution carries the best score ever evaluated.
    let mut top = start;
    for e in events {
        if let Event::Score { value, .. } = e {
            if improves(&record(*value), &top).unwrap() {
                top = record(*value);
            }
        }
    }
    prop_assert_eq!(best.score.map(|s| s.value()), Some(top.value()));

    // Best-score trajectory never gets worse.
    let mut previous = start;
    for e in events {
        if let Event::Checkpoint { best_score, .. } = e {
            let now = record(best_score.expect("checkpoint without a score"));
            prop_assert!(
                improves_or_ties(&now, &previous).unwrap(),
                "trajectory regressed"
            );
            previous = now;
        }
    }

    // Each step advances to the first best candidate if it ties or beats the base.
    let mut base = start;
    let mut step: Vec<(Option<SolutionId>, ScoreRecord)> = Vec::new();
    for e in events {
        let Event::Decision {
            phase,
            verdict,
            solution,
            score,
            ..
        } = e
        else {
            continue;
        };
        match (phase, verdict, score) {
            (Phase::Refine, Verdict::Accept | Verdict::Reject, Some(v)) => {
                step.push((solution.clone(), record(*v)))
            }
            (Phase::Step, Verdict::Advance, _) => {
                let scores: Vec<_> = step.iter().map(|(_, s)| *s).collect();
                let i = first_argmax(&scores)
                    .unwrap()
                    .expect("advance without candidates");
                prop_assert_eq!(solution, &step[i].0);
                prop_assert!(improves_or_ties(&scores[i], &base).unwrap());
                base = scores[i];
                step.clear();
            }
            (Phase::Step, Verdict::Hold, _) => {
                prop_assert!(step.iter().all(|(_, s)| improves(&base, s).unwrap()));
                step.clear();
            }
            _ => {}
        }
    }
    Ok(())
}

fn criterion_2() -> Check {
    let cases = 128;
    let config = PropConfig {
        cases,
        failure_persistence: None,
        ..PropConfig::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let seen = Cell::new(0u32);
    let directions = Cell::new((0u32, 0u32));
    ok(runner.run(&landscape(), |l| {
        seen.set(seen.get() + 1);
        let (max, min) = directions.get();
        directions.set(match l.direction {
            Direction::Maximize => (max + 1, min),
            Direction::Minimize => (max, min + 1),
        });
        refine_landscape(&l)
    }))?;
    let (max, min) = directions.get();
    ensure!(seen.get() >= 100, "only {} scenarios ran", seen.get());
    ensure!(
        max > 0 && min > 0,
        "directions not both covered ({max} / {min})"
    );
    Ok(())
}

// 3 -------------------------------------------------------------------------

/// Name, rounds, outcomes, inputs, direction and the winning round score
/// (`None`: every round discarded).
type EnsembleCase<'a> = (
    &'a str,
    u32,
    &'a [&'a str],
    &'a [Solution],
    Direction,
    Option<f64>,
);

/// Runs `rounds` ensemble rounds over the given outcomes; returns the pick,
/// the journal and the planner call count.
fn ensemble_case(
    rounds: u32,
    outcomes: &[&str],
    inputs: &[Solution],
    direction: Direction,
) -> Result<(Solution, Vec<Event>, usize), String> {
    let mut sc = Scenario::new();
    sc.fallback(AgentRole::LeakageExtractor, CLEAN)
        .fallback(AgentRole::Ensembler, "```python\nblend()\n```");
    for i in 0..rounds {
        sc.respond(AgentRole::EnsPlanner, format!("plan {i}"));
    }
    for o in outcomes {
        sc.run(ok(o.parse())?);
    }
    let mut config = Config::default();
    config.run.ensemble_rounds = rounds;
    config.run.max_debug_rounds = 0;
    let h = Harness::builder(sc)
        .config(config)
        .direction(direction)
        .build();
    let mut sess = h.session("main");
    let pick = ok(ensemble(&mut sess, inputs))?;
    Ok((
        pick,
        sess.journal().events().to_vec(),
        h.provider().prompts(AgentRole::EnsPlanner).len(),
    ))
}

/// Solution id of the first `ensemble score` decision with the given value.
fn first_round_scoring(events: &[Event], value: f64) -> Option<SolutionId> {
    events.iter().find_map(|e| match e {
        Event::Decision {
            phase: Phase::Ensemble,
            verdict: Verdict::Score,
            solution,
            score: Some(s),
            ..
        } if *s == value => solution.clone(),
        _ => None,
    })
}

fn criterion_3() -> Check {
    let max_inputs = [
        scored("lane-1/9", 0.9, Direction::Maximize),
        scored("lane-2/9", 0.89, Direction::Maximize),
    ];
    let min_inputs = [
        scored("lane-1/9", 0.3, Direction::Minimize),
        scored("lane-2/9", 0.2, Direction::Minimize),
        scored("lane-3/9", 0.2, Direction::Minimize),
    ];
    let cases: [EnsembleCase; 4] = [
        (
            "tied rounds",
            3,
            &["score 0.91", "score 0.93", "score 0.93"],
            &max_inputs,
            Direction::Maximize,
            Some(0.93),
        ),
        (
            "discarded round",
            3,
            &["crash boom", "score 0.9", "score 0.9"],
            &max_inputs,
            Direction::Maximize,
            Some(0.9),
        ),
        (
            "minimize",
            4,
            &["score 0.4", "score 0.2", "score 0.2", "score 0.3"],
            &min_inputs,
            Direction::Minimize,
            Some(0.2),
        ),
        (
            "all discarded",
            2,
            &["crash boom", "silent"],
            &min_inputs,
            Direction::Minimize,
            None,
        ),
    ];
    for (name, rounds, outcomes, inputs, direction, winner) in cases {
        let (pick, events, planner_calls) = ensemble_case(rounds, outcomes, inputs, direction)?;
        ensure!(
            planner_calls == rounds as usize,
            "{name}: {planner_calls} planner calls for R={rounds}"
        );
        match winner {
            Some(value) => {
                let first = first_round_scoring(&events, value);
                ensure!(
                    Some(&pick.id) == first.as_ref(),
                    "{name}: picked {} not {first:?}",
                    pick.id
                );
                ensure!(
                    trace(&events).last().map(String::as_str)
                        == Some(&*format!("ensemble select {value}")),
                    "{name}: no select"
                );
            }
            None => {
                ensure!(
                    pick.id.as_str() == "lane-2/9",
                    "{name}: fell back to {}",
                    pick.id
                );
                ensure!(
                    trace(&events).last().map(String::as_str) == Some("ensemble fallback 0.2"),
                    "{name}: no fallback"
                );
            }
        }
    }
    Ok(())
}

// 4 -------------------------------------------------------------------------

fn criterion_4() -> Check {
    // Merging.
    merge_scenario("merge_tie")?;

    // Refinement: a candidate equal to the incumbent replaces it.
    let mut sc = Scenario::new();
    sc.respond(
        AgentRole::Extractor,
        r#"{"code_block": "model = A()", "plan": "use B"}"#,
    )
    .respond(AgentRole::Coder, "```python\nmodel = B()\n```")
    .fallback(AgentRole::LeakageExtractor, CLEAN)
    .run(ScriptedOutcome::score(0.8));
    let mut config = Config::default();
    config.run.outer_steps = 1;
    config.run.inner_steps = 1;
    config.guidance.ablation = vec![AblationOverride {
        step: 1,
        summary: "model".into(),
    }];
    let h = Harness::builder(sc).config(config).build();
    let mut sess = h.session("lane-1");
    let s0 = Solution::new(
        SolutionId::new("lane-1/0"),
        "model = A()\nfit(model)\n",
        Origin::Merged,
    )
    .unwrap()
    .with_score(ScoreRecord::new(0.8, Direction::Maximize).unwrap());
    let best = ok(refine(&mut sess, s0))?;
    let got = trace(sess.journal().events());
    ensure!(
        got == ["refine accept 0.8", "step advance 0.8"],
        "refine tie trace {got:?}"
    );
    ensure!(
        best.script == "model = B()\nfit(model)\n",
        "refine tie kept the incumbent"
    );

    // Ensembling: tied rounds resolve to the first.
    let inputs = [
        scored("lane-1/9", 0.9, Direction::Maximize),
        scored("lane-2/9", 0.9, Direction::Maximize),
    ];
    let (pick, events, _) =
        ensemble_case(2, &["score 0.9", "score 0.9"], &inputs, Direction::Maximize)?;
    ensure!(
        Some(&pick.id) == first_round_scoring(&events, 0.9).as_ref(),
        "ensemble tie picked {}",
        pick.id
    );
    Ok(())
}

// 5 -------------------------------------------------------------------------

fn debug_case(outcomes: &[&str]) -> Result<(Repair, usize, usize), String> {
    let mut sc = Scenario::new();
    sc.fallback(AgentRole::Debugger, "```python\nfixed()\n```");
    for o in outcomes {
        sc.run(ok(o.parse())?);
    }
    let mut config = Config::default();
    config.run.max_debug_rounds = 3;
    let h = Harness::builder(sc).config(config).build();
    let mut sess = h.session("lane-1");
    let repair = ok(evaluate_with_repair(
        &mut sess,
        "broken()",
        Purpose::Solution,
    ))?;
    let debugger_calls = h.provider().prompts(AgentRole::Debugger).len();
    Ok((repair, sess.journal().count_executions(), debugger_calls))
}

fn criterion_5() -> Check {
    let (repair, execs, calls) = debug_case(&["crash boom"; 4])?;
    ensure!(
        matches!(repair, Repair::DebugFailed(_)),
        "always-failing script was repaired"
    );
    ensure!(
        execs == 4 && calls == 3,
        "always failing: {execs} executions, {calls} debugger calls"
    );

    let (repair, execs, calls) = debug_case(&["crash boom", "crash boom", "score 0.7"])?;
    ensure!(
        matches!(repair, Repair::Fixed { .. }),
        "repair at round 2 not adopted"
    );
    ensure!(
        execs == 3 && calls == 2,
        "repair at round 2: {execs} executions, {calls} debugger calls"
    );
    Ok(())
}

// 6 -------------------------------------------------------------------------

/// `output` equals `input` outside the span of `block`, which now holds
/// `replacement`.
fn local_edit(input: &str, block: &str, replacement: &str, output: &str) -> Check {
    let start = input.find(block).ok_or("block not in input")?;
    let end = start + block.len();
    let (before, after) = (&input.as_bytes()[..start], &input.as_bytes()[end..]);
    let out = output.as_bytes();
    ensure!(
        out.len() == before.len() + replacement.len() + after.len(),
        "length mismatch"
    );
    ensure!(out.starts_with(before), "bytes before the block changed");
    ensure!(out.ends_with(after), "bytes after the block changed");
    ensure!(
        &out[before.len()..out.len() - after.len()] == replacement.as_bytes(),
        "replacement differs"
    );
    Ok(())
}

fn criterion_6() -> Check {
    let script = "import pandas as pd\r\n\tdf = pd.read_csv('train.csv')  # données\r\nscaler.fit(pd.concat([train, test]))\r\nX = scaler.transform(train)\r\n\r\n";
    let block = "scaler.fit(pd.concat([train, test]))";
    let mut sc = Scenario::new();
    sc.respond(
        AgentRole::LeakageExtractor,
        format!(r#"{{"code_block": "{}", "leakage": true}}"#, block),
    )
    .respond(
        AgentRole::LeakageCorrector,
        "```python\nscaler.fit(train)\n```",
    );
    let h = Harness::new(sc);
    let mut sess = h.session("lane-1");
    let fixed = ok(check_leakage(&mut sess, script))?;
    local_edit(script, block, "scaler.fit(train)", &fixed).map_err(|e| format!("leakage: {e}"))?;

    let script = "import a\n\n  df = load()\ndf = df.sample(n=1000, random_state=0)  \nfit(df)\t\n";
    let block = "df = df.sample(n=1000, random_state=0)";
    let mut sc = Scenario::new();
    sc.respond(
        AgentRole::SubsampleExtractor,
        format!(r#"{{"code_block": "{block}"}}"#),
    )
    .respond(AgentRole::SubsampleRemover, "```python\ndf = df\n```")
    .fallback(AgentRole::LeakageExtractor, CLEAN)
    .run(ScriptedOutcome::score(0.9));
    let h = Harness::new(sc);
    let mut sess = h.session("main");
    let input = Solution::new(SolutionId::new("main/1"), script, Origin::Ensembled)
        .unwrap()
        .with_score(ScoreRecord::new(0.9, Direction::Maximize).unwrap());
    let full = ok(remove_subsampling(&mut sess, input))?;
    local_edit(script, block, "df = df", &full.script).map_err(|e| format!("subsampling: {e}"))
}

// 7 -------------------------------------------------------------------------

fn criterion_7() -> Check {
    let one = ok(parse_score(
        "Final Validation Performance: 0.8188",
        Direction::Maximize,
    ))?;
    ensure!(one.value() == 0.8188, "parsed {}", one.value());
    let last = ok(parse_score(
        "epoch 1\nFinal Validation Performance: 0.75\nepoch 2\nFinal Validation Performance: 0.8188\ndone\n",
        Direction::Maximize,
    ))?;
    ensure!(
        last.value() == 0.8188,
        "last marker not used: {}",
        last.value()
    );
    for bad in ["nan", "NaN", "inf", "-inf"] {
        let r = parse_score(
            &format!("Final Validation Performance: {bad}"),
            Direction::Maximize,
        );
        ensure!(
            matches!(r, Err(Error::NonFiniteScore(_))),
            "`{bad}` gave {r:?}"
        );
    }
    Ok(())
}

// 8 -------------------------------------------------------------------------

fn criterion_8() -> Check {
    let tmp = ok(tempfile::tempdir())?;
    let options = RunOptions {
        mock: Some(fixture("defaults_scenario")),
        ..Default::default()
    };
    let report = ok(orchestrator::run(
        &fixture("toy_task"),
        &tmp.path().join("run"),
        options,
    ))?;
    let main = ok(read_events(&journal_path(&report.run_dir, "main")))?;
    let Some(Event::RunStarted { config, .. }) = main.first() else {
        return Err("no run_started event".into());
    };
    let r = &config.run;
    let shape = (
        r.num_candidates,
        r.outer_steps,
        r.inner_steps,
        r.parallel_solutions,
        r.ensemble_rounds,
    );
    ensure!(shape == (4, 4, 4, 2, 5), "defaults were {shape:?}");
    ensure!(
        r.total_budget_secs == 86_400,
        "budget was {}s",
        r.total_budget_secs
    );

    // Every run takes 50 virtual minutes, far more than the budget allows.
    let mut truncated = false;
    let mut spent = Duration::ZERO;
    for stream in ["main", "lane-1", "lane-2"] {
        let events = ok(read_events(&journal_path(&report.run_dir, stream)))?;
        truncated |= trace(&events)
            .iter()
            .any(|l| l.starts_with("budget truncate"));
        for e in &events {
            if let Event::Execution {
                purpose,
                duration_ms,
                ..
            } = e
            {
                if *purpose != Purpose::Submission {
                    spent += Duration::from_millis(*duration_ms);
                }
            }
        }
    }
    ensure!(truncated, "the budget never cut the search short");
    // Concurrent lanes may each start one run just before the budget ends.
    let limit = r.total_budget() + r.per_exec_timeout() * (r.parallel_solutions - 1);
    ensure!(
        spent <= limit,
        "{spent:?} of runs exceed the {limit:?} limit"
    );
    ensure!(report.submission.is_file(), "no submission");
    Ok(())
}

// 9, 10 ---------------------------------------------------------------------

fn toy_run(run_dir: &Path, halt_after: Option<&str>) -> blocksmith_core::Result<RunReport> {
    let scenario = fixture("toy_scenario");
    let options = RunOptions {
        config: Config::load(&scenario.join("config.toml"))?,
        mock: Some(scenario),
        halt_after: halt_after.map(str::to_string),
    };
    orchestrator::run(&fixture("toy_task"), run_dir, options)
}

fn candidate_best(run_dir: &Path) -> Result<f64, String> {
    let mut best = f64::NEG_INFINITY;
    for lane in ["lane-1", "lane-2"] {
        for e in ok(read_events(&journal_path(run_dir, lane)))? {
            if let Event::Decision {
                phase: Phase::Candidate,
                score: Some(s),
                ..
            } = e
            {
                best = best.max(s);
            }
        }
    }
    Ok(best)
}

fn criterion_9() -> Check {
    let tmp = ok(tempfile::tempdir())?;
    let started = Instant::now();
    let report = ok(toy_run(&tmp.path().join("run"), None))?;
    let took = started.elapsed();
    let initial = candidate_best(&report.run_dir)?;
    ensure!(report.score == Some(0.9), "final score {:?}", report.score);
    ensure!(initial < 0.9, "final 0.9 does not beat initial {initial}");
    let submission = ok(std::fs::read_to_string(&report.submission))?;
    ensure!(
        submission.lines().count() == 11,
        "submission has {} lines",
        submission.lines().count()
    );
    ensure!(took < Duration::from_secs(60), "took {took:?}");
    Ok(())
}

fn counts(run_dir: &Path) -> Result<(usize, usize), String> {
    let mut calls = 0;
    let mut execs = 0;
    for stream in ["main", "lane-1", "lane-2"] {
        for e in ok(read_events(&journal_path(run_dir, stream)))? {
            match e {
                Event::AgentCall { .. } => calls += 1,
                Event::Execution { .. } => execs += 1,
                _ => {}
            }
        }
    }
    Ok((calls, execs))
}

fn criterion_10() -> Check {
    let tmp = ok(tempfile::tempdir())?;
    let reference = tmp.path().join("reference");
    let expected = ok(toy_run(&reference, None))?;
    let split = tmp.path().join("split");
    let halted = toy_run(&split, Some("lane-1:step-1"));
    ensure!(
        matches!(halted, Err(Error::Halted(_))),
        "run was not halted: {halted:?}"
    );
    let resumed = ok(orchestrator::resume(&split))?;
    ensure!(
        resumed.score == expected.score,
        "scores {:?} vs {:?}",
        resumed.score,
        expected.score
    );
    let (a, b) = (counts(&split)?, counts(&reference)?);
    ensure!(
        a == b,
        "(calls, executions) {a:?} after resume vs {b:?} uninterrupted"
    );
    Ok(())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("merge trace equivalence", criterion_1),
        ("refinement monotonicity and optimality", criterion_2),
        ("ensemble selection", criterion_3),
        ("tie acceptance", criterion_4),
        ("debug-loop bound", criterion_5),
        ("replacement locality", criterion_6),
        ("score parsing", criterion_7),
        ("default configuration", criterion_8),
        ("end-to-end toy run", criterion_9),
        ("resume equivalence", criterion_10),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(()) => println!("criterion {:>2}: PASS  {name}", n + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {name}: {why}", n + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
