//! Execution traces, their line-oriented dump format, and replay.
//!
//! ```text
//! trace anon
//! graph
//! 3 2
//! 0 1
//! 1 2
//! end
//! terminated 1
//! init
//! s 000
//! x 1 2 1
//! step 0
//! moves 0:CANDIDACY 1:CANDIDACY 2:CANDIDACY
//! draws
//! byz
//! s 111
//! x 1 2 1
//! ```
//!
//! `draws` lists `u=0|1`; `byz` lists activated Byzantine nodes as `u=-`
//! (unchanged) or `u=<s>/<x>`.

use std::fmt::{self, Write as _};

use thiserror::Error;

use super::{
    apply_with_draws, enabled_moves, Algorithm, ByzantineUpdate, Configuration, LocalState, ModelError, Move,
    MoveSet, Rule, TransitionRecord,
};
use crate::graph::{parse_graph, Graph, NodeId};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("step {step}: source does not match the previous configuration")]
    ChainBreak { step: usize },
    #[error("step {step}: replayed target differs from the recorded one")]
    Mismatch { step: usize },
    #[error("step {step}: {source}")]
    Model { step: usize, source: ModelError },
    #[error("trace is marked terminated but its last configuration has enabled moves")]
    NotTerminal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub algorithm: Algorithm,
    pub graph: Graph,
    pub initial: Configuration,
    pub steps: Vec<TransitionRecord>,
    /// Last configuration is stable.
    pub terminated: bool,
}

impl ExecutionTrace {
    pub fn new(algorithm: Algorithm, graph: Graph, initial: Configuration) -> Self {
        ExecutionTrace {
            algorithm,
            graph,
            initial,
            steps: Vec::new(),
            terminated: false,
        }
    }

    pub fn last_configuration(&self) -> &Configuration {
        self.steps.last().map_or(&self.initial, |r| &r.target)
    }

    pub fn configurations(&self) -> impl Iterator<Item = &Configuration> {
        std::iter::once(&self.initial).chain(self.steps.iter().map(|r| &r.target))
    }

    pub fn check_chain(&self) -> Result<(), TraceError> {
        let mut prev = &self.initial;
        for (i, rec) in self.steps.iter().enumerate() {
            if &rec.source != prev {
                return Err(TraceError::ChainBreak { step: i });
            }
            prev = &rec.target;
        }
        Ok(())
    }

    pub fn total_moves(&self) -> usize {
        self.steps.iter().map(|r| r.moves.len()).sum()
    }
}

/// Re-executes every step with its recorded coins and checks each target.
pub fn replay(trace: &ExecutionTrace) -> Result<ExecutionTrace, TraceError> {
    let mut out = ExecutionTrace::new(trace.algorithm, trace.graph.clone(), trace.initial.clone());
    let mut current = trace.initial.clone();
    for (step, rec) in trace.steps.iter().enumerate() {
        if rec.source != current {
            return Err(TraceError::ChainBreak { step });
        }
        let target = apply_with_draws(
            trace.algorithm,
            &trace.graph,
            &current,
            &rec.moves,
            &rec.draws,
            &rec.byzantine,
        )
        .map_err(|source| TraceError::Model { step, source })?;
        if target != rec.target {
            return Err(TraceError::Mismatch { step });
        }
        out.steps.push(TransitionRecord {
            source: current,
            moves: rec.moves.clone(),
            draws: rec.draws.clone(),
            byzantine: rec.byzantine.clone(),
            target: target.clone(),
        });
        current = target;
    }
    if trace.terminated && !enabled_moves(trace.algorithm, &trace.graph, &current).is_empty() {
        return Err(TraceError::NotTerminal);
    }
    out.terminated = trace.terminated;
    Ok(out)
}

fn write_config(out: &mut String, cfg: &Configuration) {
    let _ = writeln!(out, "s {}", cfg.flag_string());
    let xs: Vec<String> = cfg.states().iter().map(|s| s.x.to_string()).collect();
    let _ = writeln!(out, "x {}", xs.join(" "));
}

impl fmt::Display for ExecutionTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let _ = writeln!(out, "trace {}", self.algorithm);
        let _ = writeln!(out, "graph");
        let _ = write!(out, "{}", self.graph);
        let _ = writeln!(out, "end");
        let _ = writeln!(out, "terminated {}", u8::from(self.terminated));
        let _ = writeln!(out, "init");
        write_config(&mut out, &self.initial);
        for (i, rec) in self.steps.iter().enumerate() {
            let _ = writeln!(out, "step {i}");
            let moves: Vec<String> = rec
                .moves
                .moves()
                .iter()
                .map(|m| format!("{}:{}", m.node, m.rule))
                .collect();
            let _ = writeln!(out, "moves {}", moves.join(" "));
            let draws: Vec<String> = rec
                .draws
                .iter()
                .map(|&(u, d)| format!("{u}={}", u8::from(d)))
                .collect();
            let _ = writeln!(out, "draws {}", draws.join(" "));
            let byz: Vec<String> = rec
                .byzantine
                .iter()
                .map(|b| match b.new_state {
                    None => format!("{}=-", b.node),
                    Some(s) => format!("{}={}/{}", b.node, u8::from(s.candidate), s.x),
                })
                .collect();
            let _ = writeln!(out, "byz {}", byz.join(" "));
            write_config(&mut out, &rec.target);
        }
        // Trailing spaces from empty lists are not part of the format.
        let cleaned: String = out.lines().map(str::trim_end).collect::<Vec<_>>().join("\n");
        writeln!(f, "{cleaned}")
    }
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let l = l.trim();
            if !l.is_empty() {
                return Some((i + 1, l));
            }
        }
        None
    }

    fn expect(&mut self, keyword: &str) -> Result<(usize, &'a str), TraceError> {
        let (ln, l) = self.next().ok_or_else(|| TraceError::Parse {
            line: self.last + 1,
            reason: format!("expected `{keyword}`, found end of input"),
        })?;
        let rest = if l == keyword {
            ""
        } else if let Some(rest) = l.strip_prefix(keyword).and_then(|r| r.strip_prefix(' ')) {
            rest.trim()
        } else {
            return Err(perr(ln, format!("expected `{keyword}`")));
        };
        Ok((ln, rest))
    }
}

fn perr(line: usize, reason: impl Into<String>) -> TraceError {
    TraceError::Parse {
        line,
        reason: reason.into(),
    }
}

fn num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T, TraceError> {
    tok.parse().map_err(|_| perr(line, format!("bad number `{tok}`")))
}

fn bit(tok: &str, line: usize) -> Result<bool, TraceError> {
    match tok {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(perr(line, format!("expected 0 or 1, got `{tok}`"))),
    }
}

fn read_config(lines: &mut Lines<'_>, n: usize) -> Result<Configuration, TraceError> {
    let (ls, s) = lines.expect("s")?;
    let (lx, x) = lines.expect("x")?;
    if s.len() != n {
        return Err(perr(ls, format!("expected {n} flags")));
    }
    let xs: Vec<u32> = x
        .split_whitespace()
        .map(|t| num(t, lx))
        .collect::<Result<_, _>>()?;
    if xs.len() != n {
        return Err(perr(lx, format!("expected {n} x values")));
    }
    let states = s
        .chars()
        .zip(xs)
        .map(|(c, x)| match c {
            '0' => Ok(LocalState::new(false, x)),
            '1' => Ok(LocalState::new(true, x)),
            _ => Err(perr(ls, format!("bad flag `{c}`"))),
        })
        .collect::<Result<_, _>>()?;
    Ok(Configuration::new(states))
}

/// Parses the dump format. Sources are reconstructed from the chain, so the
/// result is always well-chained; use [`replay`] to check the targets.
pub fn parse_trace(text: &str) -> Result<ExecutionTrace, TraceError> {
    let mut lines = Lines {
        inner: text.lines().enumerate().peekable(),
        last: 0,
    };
    let (la, algo) = lines.expect("trace")?;
    let algorithm: Algorithm = algo.parse().map_err(|e: String| perr(la, e))?;

    let (lg, _) = lines.expect("graph")?;
    let mut graph_text = String::new();
    loop {
        let (_, l) = lines.next().ok_or_else(|| perr(lg, "unterminated graph block"))?;
        if l == "end" {
            break;
        }
        graph_text.push_str(l);
        graph_text.push('\n');
    }
    let graph = parse_graph(&graph_text).map_err(|e| perr(lg, e.to_string()))?;
    let n = graph.node_count();

    let (lt, t) = lines.expect("terminated")?;
    let terminated = bit(t, lt)?;
    lines.expect("init")?;
    let initial = read_config(&mut lines, n)?;

    let mut trace = ExecutionTrace::new(algorithm, graph, initial);
    trace.terminated = terminated;
    let mut current = trace.initial.clone();
    while let Some((ls, l)) = lines.next() {
        let idx = l
            .strip_prefix("step ")
            .ok_or_else(|| perr(ls, "expected `step`"))?;
        if num::<usize>(idx, ls)? != trace.steps.len() {
            return Err(perr(ls, "step indices must be consecutive from 0"));
        }
        let (lm, m) = lines.expect("moves")?;
        let moves = m
            .split_whitespace()
            .map(|tok| {
                let (u, r) = tok
                    .split_once(':')
                    .ok_or_else(|| perr(lm, format!("bad move `{tok}`")))?;
                let rule =
                    Rule::parse(algorithm, r).ok_or_else(|| perr(lm, format!("unknown rule `{r}`")))?;
                Ok(Move::new(num(u, lm)?, rule))
            })
            .collect::<Result<Vec<_>, TraceError>>()?;
        let (ld, d) = lines.expect("draws")?;
        let mut draws = d
            .split_whitespace()
            .map(|tok| {
                let (u, b) = tok
                    .split_once('=')
                    .ok_or_else(|| perr(ld, format!("bad draw `{tok}`")))?;
                Ok((num::<NodeId>(u, ld)?, bit(b, ld)?))
            })
            .collect::<Result<Vec<_>, TraceError>>()?;
        draws.sort_unstable();
        let (lb, b) = lines.expect("byz")?;
        let byzantine = b
            .split_whitespace()
            .map(|tok| {
                let (u, rest) = tok
                    .split_once('=')
                    .ok_or_else(|| perr(lb, format!("bad Byzantine entry `{tok}`")))?;
                let node = num(u, lb)?;
                let new_state = if rest == "-" {
                    None
                } else {
                    let (s, x) = rest
                        .split_once('/')
                        .ok_or_else(|| perr(lb, format!("bad Byzantine state `{rest}`")))?;
                    Some(LocalState::new(bit(s, lb)?, num(x, lb)?))
                };
                Ok(ByzantineUpdate { node, new_state })
            })
            .collect::<Result<Vec<_>, TraceError>>()?;
        let target = read_config(&mut lines, n)?;
        trace.steps.push(TransitionRecord {
            source: current,
            moves: MoveSet::new(moves),
            draws,
            byzantine,
            target: target.clone(),
        });
        current = target;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anonymous::AnonRule;
    use crate::graph::{generate, GraphKind};
    use crate::model::{apply_transition, RandomStream};

    /// Synchronous anonymous run on P3 from all-⊤.
    fn sample_trace() -> ExecutionTrace {
        let g = generate(GraphKind::Path, 3, 0.0, 0).unwrap();
        let init = Configuration::from_flags(&g, &[true, true, true]);
        let mut trace = ExecutionTrace::new(Algorithm::Anonymous, g.clone(), init);
        let rng = RandomStream::new(5);
        for step in 0..100u64 {
            let cur = trace.last_configuration().clone();
            let moves = enabled_moves(Algorithm::Anonymous, &g, &cur);
            if moves.is_empty() {
                trace.terminated = true;
                break;
            }
            let rec = apply_transition(
                Algorithm::Anonymous,
                &g,
                &cur,
                &MoveSet::new(moves),
                &[],
                &rng,
                step,
            )
            .unwrap();
            trace.steps.push(rec);
        }
        assert!(trace.terminated);
        trace
    }

    #[test]
    fn replay_reproduces() {
        let t = sample_trace();
        assert_eq!(replay(&t).unwrap(), t);
    }

    #[test]
    fn dump_round_trips() {
        let t = sample_trace();
        let text = t.to_string();
        assert!(text.starts_with("trace anon\ngraph\n3 2\n"));
        assert_eq!(parse_trace(&text).unwrap(), t);
    }

    #[test]
    fn empty_trace_replays_unchanged() {
        let g = generate(GraphKind::Complete, 2, 0.0, 0).unwrap();
        let t = ExecutionTrace::new(
            Algorithm::Anonymous,
            g.clone(),
            Configuration::degree_stabilized(&g),
        );
        assert_eq!(replay(&t).unwrap(), t);
        assert_eq!(parse_trace(&t.to_string()).unwrap(), t);
    }

    #[test]
    fn tampered_target_names_step() {
        let mut t = sample_trace();
        assert!(t.steps.len() >= 2);
        let k = 1;
        let mut bad = t.steps[k].target.clone();
        let u = 0;
        bad.set(u, LocalState::new(!bad.candidate(u), bad.x(u)));
        t.steps[k].target = bad;
        match replay(&t) {
            Err(TraceError::Mismatch { step }) | Err(TraceError::ChainBreak { step }) => {
                assert_eq!(step, k)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn broken_chain_detected() {
        let mut t = sample_trace();
        t.steps[0].target = Configuration::from_flags(&t.graph, &[false, false, false]);
        assert!(t.check_chain().is_err());
    }

    #[test]
    fn parse_errors_carry_lines() {
        let text = "trace anon\ngraph\n1 0\nend\nterminated 0\ninit\ns 0\nx 0\nstep 0\nmoves 0:FOO\ndraws\nbyz\ns 1\nx 0\n";
        match parse_trace(text) {
            Err(TraceError::Parse { line, .. }) => assert_eq!(line, 10),
            other => panic!("unexpected {other:?}"),
        }
        let rule = Rule::parse(Algorithm::Anonymous, "CANDIDACY");
        assert_eq!(rule, Some(Rule::Anon(AnonRule::Candidacy)));
    }
}
