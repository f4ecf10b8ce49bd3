//! The subject-runner entry point: executed in a child process, it loads a
//! mini project, runs exactly one test, and reports the outcome plus any
//! requested trace/observation data through files. The analyzer never shares
//! memory with subject code.

use std::cell::RefCell;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use stubscope_lang::interp::{Engine, Observer, Session, TestOutcome, Tracer};
use stubscope_lang::Project;

/// One line of the observation log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsLogRecord {
    pub run_index: u32,
    pub test_id: String,
    pub point_id: String,
    pub invocation_index: u64,
    pub path: String,
    pub value: String,
    pub value_kind: String,
}

/// One line of the trace (coverage/dynamics) log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub test_id: String,
    pub method_id: String,
    pub hits: u64,
    pub min_depth: u32,
    pub chain: Vec<String>,
    pub returned_kinds: Vec<String>,
}

/// Outcome record written by the runner before it exits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunnerOutcome {
    pub test_id: String,
    pub outcome: String,
    pub message: Option<String>,
}

pub const OUTCOME_PASS: &str = "pass";
pub const OUTCOME_FAIL: &str = "fail";
pub const OUTCOME_ERROR: &str = "error";

struct RunnerArgs {
    project: PathBuf,
    test: String,
    outcome_out: PathBuf,
    trace_out: Option<PathBuf>,
    obs_out: Option<PathBuf>,
    run_index: u32,
}

fn parse_args(args: &[String]) -> Result<RunnerArgs, String> {
    let mut project = None;
    let mut test = None;
    let mut outcome_out = None;
    let mut trace_out = None;
    let mut obs_out = None;
    let mut run_index = 0u32;
    let mut it = args.iter();
    while let Some(flag) = it.next() {
        let mut value = || it.next().ok_or_else(|| format!("missing value for {flag}"));
        match flag.as_str() {
            "--project" => project = Some(PathBuf::from(value()?)),
            "--test" => test = Some(value()?.clone()),
            "--outcome-out" => outcome_out = Some(PathBuf::from(value()?)),
            "--trace-out" => trace_out = Some(PathBuf::from(value()?)),
            "--obs-out" => obs_out = Some(PathBuf::from(value()?)),
            "--run-index" => {
                run_index = value()?
                    .parse()
                    .map_err(|e| format!("bad --run-index: {e}"))?
            }
            other => return Err(format!("unknown runner flag `{other}`")),
        }
    }
    Ok(RunnerArgs {
        project: project.ok_or("missing --project")?,
        test: test.ok_or("missing --test")?,
        outcome_out: outcome_out.ok_or("missing --outcome-out")?,
        trace_out,
        obs_out,
        run_index,
    })
}

/// Run one subject test; the process exit code is zero whenever the run
/// itself completed, regardless of the test verdict.
pub fn subject_main(args: Vec<String>) -> i32 {
    let parsed = match parse_args(&args) {
        Ok(parsed) => parsed,
        Err(message) => {
            eprintln!("runner: {message}");
            return 64;
        }
    };
    match execute(&parsed) {
        Ok(()) => 0,
        Err(message) => {
            eprintln!("runner: {message}");
            1
        }
    }
}

fn execute(args: &RunnerArgs) -> Result<(), String> {
    let project = Project::load(&args.project)
        .map_err(|e| format!("cannot load project {}: {e}", args.project.display()))?;

    let Some(test) = project.tests.get(&args.test).cloned() else {
        write_outcome(
            &args.outcome_out,
            &RunnerOutcome {
                test_id: args.test.clone(),
                outcome: OUTCOME_ERROR.to_string(),
                message: Some(format!("unknown test id `{}`", args.test)),
            },
        )?;
        return Ok(());
    };

    let obs_writer: Option<Rc<RefCell<BufWriter<std::fs::File>>>> = match &args.obs_out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
            Some(Rc::new(RefCell::new(BufWriter::new(file))))
        }
        None => None,
    };

    let mut session = Session::default();
    if args.trace_out.is_some() {
        session.tracer = Some(Tracer::default());
    }
    if let Some(writer) = &obs_writer {
        let writer = writer.clone();
        let run = args.run_index;
        let test_id = args.test.clone();
        session.observer = Some(Observer::new(Box::new(move |record| {
            let line = ObsLogRecord {
                run_index: run,
                test_id: test_id.clone(),
                point_id: record.point.clone(),
                invocation_index: record.invocation,
                path: record.path.clone(),
                value: record.value.clone(),
                value_kind: record.kind.clone(),
            };
            let mut writer = writer.borrow_mut();
            serde_json::to_writer(&mut *writer, &line).expect("serialize observation");
            writer.write_all(b"\n").expect("write observation");
        })));
    }

    let mut engine = Engine::with_session(&project, session);
    let verdict = engine.run_test(&test);
    let session = engine.session;

    if let (Some(path), Some(tracer)) = (&args.trace_out, &session.tracer) {
        let mut text = String::new();
        for (method_id, trace) in &tracer.methods {
            let record = TraceRecord {
                test_id: args.test.clone(),
                method_id: method_id.clone(),
                hits: trace.hits,
                min_depth: trace.min_depth,
                chain: trace.chain.clone(),
                returned_kinds: trace.returned_kinds.clone(),
            };
            text.push_str(&serde_json::to_string(&record).map_err(|e| e.to_string())?);
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }

    drop(session.observer);
    if let Some(writer) = obs_writer {
        let writer = Rc::try_unwrap(writer).map_err(|_| "observer still borrowed".to_string())?;
        writer
            .into_inner()
            .flush()
            .map_err(|e| format!("flushing observations: {e}"))?;
    }

    let (outcome, message) = match verdict {
        TestOutcome::Pass => (OUTCOME_PASS, None),
        TestOutcome::Fail(m) => (OUTCOME_FAIL, Some(m)),
        TestOutcome::Error(m) => (OUTCOME_ERROR, Some(m)),
    };
    write_outcome(
        &args.outcome_out,
        &RunnerOutcome {
            test_id: args.test.clone(),
            outcome: outcome.to_string(),
            message,
        },
    )
}

fn write_outcome(path: &Path, outcome: &RunnerOutcome) -> Result<(), String> {
    let text = serde_json::to_string(outcome).map_err(|e| e.to_string())?;
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn project_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("src")).unwrap();
        std::fs::create_dir_all(dir.path().join("tests")).unwrap();
        std::fs::write(
            dir.path().join("src/m.mini"),
            "fn double(x): int { return x * 2; }",
        )
        .unwrap();
        std::fs::write(
            dir.path().join("tests/m_test.mini"),
            "test ok() { assertEquals(4, double(2)); }\ntest bad() { assertEquals(5, double(2)); }",
        )
        .unwrap();
        dir
    }

    fn run(dir: &Path, test: &str, extra: &[(&str, &Path)]) -> (i32, RunnerOutcome) {
        let out = dir.join("outcome.json");
        let mut args = vec![
            "--project".to_string(),
            dir.display().to_string(),
            "--test".to_string(),
            test.to_string(),
            "--outcome-out".to_string(),
            out.display().to_string(),
        ];
        for (flag, path) in extra {
            args.push(flag.to_string());
            args.push(path.display().to_string());
        }
        let code = subject_main(args);
        let outcome = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        (code, outcome)
    }

    #[test]
    fn reports_pass_fail_and_unknown() {
        let dir = project_dir();
        let (code, outcome) = run(dir.path(), "tests/m_test.mini::ok", &[]);
        assert_eq!((code, outcome.outcome.as_str()), (0, OUTCOME_PASS));

        let (_, outcome) = run(dir.path(), "tests/m_test.mini::bad", &[]);
        assert_eq!(outcome.outcome, OUTCOME_FAIL);

        let (_, outcome) = run(dir.path(), "tests/m_test.mini::nope", &[]);
        assert_eq!(outcome.outcome, OUTCOME_ERROR);
        assert!(outcome.message.unwrap().contains("unknown test id"));
    }

    #[test]
    fn trace_out_records_dynamics() {
        let dir = project_dir();
        let trace = dir.path().join("trace.jsonl");
        run(
            dir.path(),
            "tests/m_test.mini::ok",
            &[("--trace-out", &trace)],
        );
        let records: Vec<TraceRecord> = crate::persist::read_jsonl(&trace).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].method_id, "src/m.mini::double/1");
        assert_eq!(records[0].min_depth, 1);
        assert_eq!(records[0].returned_kinds, vec!["int"]);
    }
}
