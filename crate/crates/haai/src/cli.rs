//! Command-line entry point: `run`, `repl`, `check`, and `graph`.
//!
//! Exit codes are machine-usable: 0 success/Strong, 1 parse or usage error,
//! 2 poisoned deployments during a run, 3 Eventual, 4 Weak.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::analysis::{self, ReactivityTier};
use crate::engine::Engine;
use crate::io::{poll_window, run_script, spawn_adapters, EventQueue, SinkSet};
use crate::syntax::{parse_program, read_data, Definition, Program};
use crate::value::{SignalId, Value};

#[derive(Parser)]
#[command(name = "haai", about = "Interpreter for the Haai reactive language")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a program and react to external events until input drains.
    Run {
        program: PathBuf,
        /// Replay script (JSONL: {"batch": n, "source": name, "value": v}).
        #[arg(long)]
        script: Option<PathBuf>,
        /// Write the JSONL trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = crate::engine::DEFAULT_DEPTH_BUDGET)]
        max_depth: u64,
        /// Live batching window in milliseconds (overrides HAAI_POLL_MS).
        #[arg(long)]
        poll_ms: Option<u64>,
        /// Replace the built-in prelude with this file.
        #[arg(long)]
        prelude: Option<PathBuf>,
    },
    /// Interactive read-eval-print loop.
    Repl {
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = crate::engine::DEFAULT_DEPTH_BUDGET)]
        max_depth: u64,
        #[arg(long)]
        prelude: Option<PathBuf>,
    },
    /// Classify a program's reactivity tier.
    Check {
        program: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Export a reactor's graph as DOT.
    Graph {
        /// Program file defining the reactor (prelude is always available).
        program: Option<PathBuf>,
        #[arg(long)]
        reactor: String,
        /// Write DOT here instead of stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        prelude: Option<PathBuf>,
    },
}

pub fn run() -> i32 {
    match Cli::parse().command {
        Command::Run {
            program,
            script,
            trace,
            max_depth,
            poll_ms,
            prelude,
        } => cmd_run(&program, script, trace, max_depth, poll_ms, prelude),
        Command::Repl {
            trace,
            max_depth,
            prelude,
        } => cmd_repl(trace, max_depth, prelude),
        Command::Check { program, json } => cmd_check(&program, json),
        Command::Graph {
            program,
            reactor,
            trace,
            prelude,
        } => cmd_graph(program, &reactor, trace, prelude),
    }
}

fn load_file(path: &std::path::Path) -> Result<Program, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let name = path.display().to_string();
    let data = read_data(&name, &text).map_err(|e| e.to_string())?;
    parse_program(&data).map_err(|e| e.to_string())
}

fn prelude_program(path: &Option<PathBuf>) -> Result<Program, String> {
    match path {
        Some(p) => load_file(p),
        None => {
            let data = read_data("<prelude>", crate::stdlib::PRELUDE).expect("prelude reads");
            Ok(parse_program(&data).expect("prelude parses"))
        }
    }
}

fn build_engine(
    prelude: &Option<PathBuf>,
    max_depth: u64,
    trace: &Option<PathBuf>,
) -> Result<Engine, String> {
    let mut engine = Engine::new();
    for spec in crate::stdlib::primitive_specs() {
        engine.register_primitive(spec);
    }
    for spec in crate::stdlib::io_specs() {
        engine.register_io(spec);
    }
    engine.set_depth_budget(max_depth);
    if let Some(path) = trace {
        let file = std::fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        engine.set_trace_writer(Box::new(std::io::BufWriter::new(file)));
    }
    engine.load_program(&prelude_program(prelude)?);
    Ok(engine)
}

/// Global def targets in definition order; used to echo sink values.
fn global_names(program: &Program) -> Vec<String> {
    let mut names = Vec::new();
    for def in &program.definitions {
        if let Definition::Signal(d) = def {
            for t in &d.targets {
                names.push(t.clone());
            }
        }
    }
    names
}

fn echo_turn(engine: &Engine, names: &[String], range: (usize, usize), out: &mut impl Write) {
    // Read values out of the turn's trace slice rather than the node's
    // current value: when echoing after the fact, later turns may already
    // have overwritten it.
    let events = &engine.trace_events()[range.0..range.1];
    for name in names {
        if let Some(sig) = engine.global_signal(name) {
            for e in events {
                if e.kind == crate::engine::TraceKind::Emit && e.id == sig.0 {
                    match Value::from_json(&e.value) {
                        Some(v) => {
                            let _ = writeln!(out, "{name} = {v}");
                        }
                        None => {
                            let _ = writeln!(out, "{name} = {}", e.value);
                        }
                    }
                }
            }
        }
    }
}

fn cmd_run(
    program_path: &std::path::Path,
    script: Option<PathBuf>,
    trace: Option<PathBuf>,
    max_depth: u64,
    poll_ms: Option<u64>,
    prelude: Option<PathBuf>,
) -> i32 {
    let program = match load_file(program_path) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let mut engine = match build_engine(&prelude, max_depth, &trace) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let mut poisoned = false;
    for report in engine.load_program(&program) {
        for e in &report.errors {
            eprintln!("error: {e}");
            poisoned = true;
        }
    }
    let names = global_names(&program);
    let stdout = std::io::stdout();

    if let Some(script_path) = script {
        let text = match std::fs::read_to_string(&script_path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {}: {e}", script_path.display());
                return 1;
            }
        };
        let batches = match crate::io::read_script(&text) {
            Ok(b) => b,
            Err(e) => {
                eprintln!("error: {e}");
                return 1;
            }
        };
        match run_script(&mut engine, &batches) {
            Ok(reports) => {
                for report in reports {
                    for e in &report.errors {
                        eprintln!("error: {e}");
                        poisoned = true;
                    }
                    echo_turn(&engine, &names, report.trace_range, &mut stdout.lock());
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                return 1;
            }
        }
        engine.flush_trace();
        return if poisoned { 2 } else { 0 };
    }

    // Live mode: adapters feed the queue until every source closes or the
    // process is interrupted.
    let queue = EventQueue::new();
    let pending = engine.drain_pending_sources();
    let has_live = pending.iter().any(|p| {
        !matches!(p.kind, crate::engine::PendingSourceKind::Manual { .. })
    });
    let adapters = spawn_adapters(pending, queue.clone());
    let mut sinks = SinkSet::new();
    for s in engine.drain_pending_sinks() {
        sinks.ws_out(s.signal, &s.address);
    }
    if !has_live {
        queue.close();
    }
    let window = poll_ms
        .map(std::time::Duration::from_millis)
        .unwrap_or_else(poll_window);
    while let Ok(batch) = queue.pop_batch(window) {
        let seed: Vec<(SignalId, Value)> = batch
            .into_iter()
            .filter_map(|e| Value::from_json(&e.value).map(|v| (e.signal, v)))
            .collect();
        let report = engine.run_turn(&seed);
        for e in &report.errors {
            eprintln!("error: {e}");
            poisoned = true;
        }
        echo_turn(&engine, &names, report.trace_range, &mut stdout.lock());
        sinks.after_turn(&engine, &report);
    }
    adapters.shutdown();
    engine.flush_trace();
    if poisoned {
        2
    } else {
        0
    }
}

fn cmd_check(program_path: &std::path::Path, json: bool) -> i32 {
    let program = match load_file(program_path) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let result = analysis::classify(&program);
    if json {
        println!("{}", serde_json::to_string_pretty(&result).unwrap());
    } else {
        println!("tier: {}", result.tier);
        for line in &result.justification {
            println!("  {line}");
        }
        let f = &result.features;
        println!("features:");
        println!("  trampolines: {}", f.uses_trampolines);
        println!("  conditionals: {}", f.uses_conditionals);
        println!("  dynamic operators: {}", f.uses_dynamic_operators);
        println!("  rho expressions: {}", f.rho_count);
        if !f.recursion_cycles.is_empty() {
            println!("  recursion cycles:");
            for c in &f.recursion_cycles {
                println!("    {}", c.join(" -> "));
            }
        }
    }
    match result.tier {
        ReactivityTier::Strong => 0,
        ReactivityTier::Eventual => 3,
        ReactivityTier::Weak => 4,
    }
}

fn cmd_graph(
    program_path: Option<PathBuf>,
    reactor: &str,
    out_path: Option<PathBuf>,
    prelude: Option<PathBuf>,
) -> i32 {
    let mut combined = match prelude_program(&prelude) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if let Some(path) = program_path {
        match load_file(&path) {
            Ok(p) => combined.definitions.extend(p.definitions),
            Err(e) => {
                eprintln!("error: {e}");
                return 1;
            }
        }
    }
    let ir = match analysis::export_graph(&combined, reactor) {
        Ok(ir) => ir,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let dot = ir.to_dot(reactor);
    match out_path {
        Some(path) => {
            if let Err(e) = std::fs::write(&path, dot) {
                eprintln!("error: {}: {e}", path.display());
                return 1;
            }
        }
        None => print!("{dot}"),
    }
    0
}

// ----- repl ----------------------------------------------------------------

fn balanced(text: &str) -> bool {
    let mut depth: i64 = 0;
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        match c {
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '"' => {
                while let Some(c) = chars.next() {
                    match c {
                        '\\' => {
                            chars.next();
                        }
                        '"' => break,
                        _ => {}
                    }
                }
            }
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
    }
    depth <= 0
}

fn parse_value(text: &str) -> Option<Value> {
    if let Ok(j) = serde_json::from_str::<serde_json::Value>(text) {
        if let Some(v) = Value::from_json(&j) {
            return Some(v);
        }
    }
    let data = read_data("<inject>", text).ok()?;
    match &data.first()?.kind {
        crate::syntax::DatumKind::Int(i) => Some(Value::Int(*i)),
        crate::syntax::DatumKind::Float(f) => Some(Value::Float(*f)),
        crate::syntax::DatumKind::Bool(b) => Some(Value::Bool(*b)),
        crate::syntax::DatumKind::Str(s) => Some(Value::string(s)),
        _ => None,
    }
}

fn cmd_repl(trace: Option<PathBuf>, max_depth: u64, prelude: Option<PathBuf>) -> i32 {
    let mut engine = match build_engine(&prelude, max_depth, &trace) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let mut session = Program {
        definitions: Vec::new(),
    };
    let mut names: Vec<String> = Vec::new();
    let mut trace_on = false;
    let stdin = std::io::stdin();
    let mut buffer = String::new();
    print!("haai> ");
    let _ = std::io::stdout().flush();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if buffer.is_empty() {
            let trimmed = line.trim();
            if let Some(rest) = trimmed.strip_prefix(':') {
                match repl_command(rest, &mut engine, &session, &names, &mut trace_on) {
                    ReplFlow::Continue => {
                        print!("haai> ");
                        let _ = std::io::stdout().flush();
                        continue;
                    }
                    ReplFlow::Quit => return 0,
                }
            }
            if trimmed.is_empty() {
                print!("haai> ");
                let _ = std::io::stdout().flush();
                continue;
            }
        }
        buffer.push_str(&line);
        buffer.push('\n');
        if !balanced(&buffer) {
            continue;
        }
        let text = std::mem::take(&mut buffer);
        repl_eval(&text, &mut engine, &mut session, &mut names, trace_on);
        print!("haai> ");
        let _ = std::io::stdout().flush();
    }
    0
}

enum ReplFlow {
    Continue,
    Quit,
}

fn repl_command(
    rest: &str,
    engine: &mut Engine,
    session: &Program,
    names: &[String],
    trace_on: &mut bool,
) -> ReplFlow {
    let mut parts = rest.splitn(3, char::is_whitespace);
    match parts.next().unwrap_or("") {
        "quit" | "q" => return ReplFlow::Quit,
        "trace" => match parts.next() {
            Some("on") => *trace_on = true,
            Some("off") => *trace_on = false,
            _ => eprintln!("usage: :trace on|off"),
        },
        "inject" => {
            let (Some(source), Some(value_text)) = (parts.next(), parts.next()) else {
                eprintln!("usage: :inject <source> <value>");
                return ReplFlow::Continue;
            };
            let Some(value) = parse_value(value_text) else {
                eprintln!("error: cannot parse value `{value_text}`");
                return ReplFlow::Continue;
            };
            match engine.run_turn_named(&[(source, value)]) {
                Ok(report) => {
                    for e in &report.errors {
                        eprintln!("error: {e}");
                    }
                    let mut out = std::io::stdout().lock();
                    echo_turn(engine, names, report.trace_range, &mut out);
                    if *trace_on {
                        print_trace_range(engine, report.trace_range);
                    }
                }
                Err(e) => eprintln!("error: {e}"),
            }
        }
        "check" => {
            let result = analysis::classify(session);
            println!("tier: {}", result.tier);
            for line in &result.justification {
                println!("  {line}");
            }
        }
        "graph" => match parts.next() {
            Some(name) => {
                let mut combined = prelude_program(&None).unwrap();
                combined.definitions.extend(session.definitions.clone());
                match analysis::export_graph(&combined, name) {
                    Ok(ir) => print!("{}", ir.to_dot(name)),
                    Err(e) => eprintln!("error: {e}"),
                }
            }
            None => eprintln!("usage: :graph <reactor>"),
        },
        other => eprintln!("unknown command `:{other}`"),
    }
    ReplFlow::Continue
}

fn print_trace_range(engine: &Engine, range: (usize, usize)) {
    for event in &engine.trace_events()[range.0..range.1] {
        println!("{}", serde_json::to_string(event).unwrap());
    }
}

fn repl_eval(
    text: &str,
    engine: &mut Engine,
    session: &mut Program,
    names: &mut Vec<String>,
    trace_on: bool,
) {
    let data = match read_data("<repl>", text) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: {e}");
            return;
        }
    };
    let program = match parse_program(&data) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return;
        }
    };
    for def in program.definitions {
        match def {
            Definition::Reactor(r) => {
                let replaced = engine.define_reactor(r.clone());
                println!(
                    "reactor {}{}",
                    r.name,
                    if replaced { " (redefined)" } else { "" }
                );
                session.definitions.push(Definition::Reactor(r));
            }
            Definition::Signal(d) => {
                let report = engine.deploy_global(&d);
                for e in &report.errors {
                    eprintln!("error: {e}");
                }
                for t in &d.targets {
                    if !names.contains(t) {
                        names.push(t.clone());
                    }
                }
                let mut out = std::io::stdout().lock();
                echo_turn(engine, names, report.trace_range, &mut out);
                drop(out);
                if trace_on {
                    print_trace_range(engine, report.trace_range);
                }
                session.definitions.push(Definition::Signal(d));
            }
        }
    }
}
