use std::fmt;

use num_traits::One;

use super::chain::{absorption, build_chain, ChainDaemon};
use super::lemmas::{
    all_subsets, check_candidacy_success_fixed, check_two_round_growth, conditional_vanish_payoff,
    degree_stabilized_configurations, fact_power_exact, fact_power_float, LemmaCheck,
};
use super::rational::{q, Q};
use super::OracleError;
use crate::analysis::is_stable;
use crate::graph::{generate, Graph, GraphKind, NodeId};
use crate::model::{Algorithm, Configuration, LocalState, X_MAX};

/// Named small graphs the suite runs on.
pub fn catalog() -> Vec<(&'static str, Graph)> {
    let g = |kind, n| generate(kind, n, 0.0, 0).expect("catalog graph");
    vec![
        ("K2", g(GraphKind::Complete, 2)),
        ("K3", g(GraphKind::Complete, 3)),
        ("P3", g(GraphKind::Path, 3)),
        ("P4", g(GraphKind::Path, 4)),
        ("star4", g(GraphKind::Star, 4)),
        ("C4", g(GraphKind::Cycle, 4)),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub instance: String,
    pub check: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub results: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.results.iter().filter(|r| !r.passed)
    }

    fn push(&mut self, instance: &str, check: &'static str, outcome: Result<(bool, String), OracleError>) {
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, e.to_string()));
        self.results.push(CheckResult {
            instance: instance.to_string(),
            check,
            passed,
            detail,
        });
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            let tag = if r.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {:<12} {:<20} {}", r.instance, r.check, r.detail)?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {} failed", self.results.len(), failed)
    }
}

fn lemma_detail(c: &LemmaCheck) -> (bool, String) {
    let worst = c
        .worst
        .as_ref()
        .map(|w| format!("{:.6}", ratio_f64(w)))
        .unwrap_or_else(|| "-".into());
    (
        c.holds,
        format!("{} cases, min value·(Δ+1) = {worst} (need ≥ 1/e)", c.cases),
    )
}

pub(crate) fn ratio_f64(x: &Q) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

/// Start configurations for chain checks: every `s`, honest `x ∈ {deg, deg+1}`,
/// Byzantine `x ∈ {deg, X_MAX}`.
fn chain_starts(g: &Graph) -> Vec<Configuration> {
    let mut out = Vec::new();
    for cfg in degree_stabilized_configurations(g, |deg| vec![deg, X_MAX]) {
        for bumped in all_subsets(g.node_count()) {
            if bumped.iter().any(|&u| g.is_byzantine(u)) {
                continue;
            }
            let mut c = cfg.clone();
            for &u in &bumped {
                let s = c.state(u);
                c.set(u, LocalState::new(s.candidate, s.x + 1));
            }
            out.push(c);
        }
    }
    out
}

fn check_distributions(algo: Algorithm, g: &Graph) -> Result<(bool, String), OracleError> {
    let starts = if algo == Algorithm::Byzantine {
        chain_starts(g)
    } else {
        degree_stabilized_configurations(g, |deg| vec![deg])
    };
    let chain = build_chain(algo, g, ChainDaemon::All, &starts, |c| is_stable(algo, g, c))?;
    let ok = chain.distributions_sum_to_one();
    Ok((ok, format!("{} states", chain.len())))
}

fn check_convergence(algo: Algorithm, g: &Graph, daemon: ChainDaemon) -> Result<(bool, String), OracleError> {
    let starts = degree_stabilized_configurations(g, |deg| vec![deg]);
    let chain = build_chain(algo, g, daemon, &starts, |c| is_stable(algo, g, c))?;
    let mut worst: Option<Q> = None;
    for start in &starts {
        let s = chain.state_index(start).expect("start interned");
        let a = absorption(&chain, s)?;
        if !a.hit_probability.is_one() {
            return Ok((
                false,
                format!("start {} hits with {}", start.flag_string(), a.hit_probability),
            ));
        }
        let steps = a.expected_steps.expect("almost-sure absorption");
        if worst.as_ref().is_none_or(|w| steps > *w) {
            worst = Some(steps);
        }
    }
    let worst = worst.map(|w| format!("{:.4}", ratio_f64(&w))).unwrap_or_default();
    Ok((true, format!("{} states, max E[steps] = {worst}", chain.len())))
}

fn check_vanish(g: &Graph) -> Result<(bool, String), OracleError> {
    let mut cases = 0;
    let mut worst: Option<Q> = None;
    for c in all_subsets(g.node_count()).filter(|c| c.len() >= 2) {
        match conditional_vanish_payoff(g, &c) {
            Ok(v) => {
                cases += 1;
                if worst.as_ref().is_none_or(|w| v < *w) {
                    worst = Some(v);
                }
            }
            Err(OracleError::NotAlive) => continue,
            Err(e) => return Err(e),
        }
    }
    let passed = worst.as_ref().is_none_or(|w| *w >= q(2, 3));
    let worst = worst.map(|w| w.to_string()).unwrap_or_else(|| "-".into());
    Ok((passed, format!("{cases} components, min = {worst} (need ≥ 2/3)")))
}

fn instance_name(name: &str, byz: &[NodeId]) -> String {
    match byz {
        [] => name.to_string(),
        b => format!("{name} B={b:?}"),
    }
}

/// Exact checks over [`catalog`] with no Byzantine node and with each single
/// Byzantine node.
pub fn verify_catalog() -> VerifyReport {
    let mut report = VerifyReport::default();
    for (name, base) in catalog() {
        let placements = std::iter::once(Vec::new()).chain(base.nodes().map(|u| vec![u]));
        for byz in placements {
            let g = base.with_byzantine(&byz).expect("catalog placement");
            let inst = instance_name(name, &byz);
            report.push(
                &inst,
                "byz-distributions",
                check_distributions(Algorithm::Byzantine, &g),
            );
            let mut c = LemmaCheck::new();
            check_candidacy_success_fixed(&g, &mut c);
            report.push(&inst, "candidacy-success", Ok(lemma_detail(&c)));
            let r = check_two_round_growth(&g).map(|c| lemma_detail(&c));
            report.push(&inst, "two-round-growth", r);
            if byz.is_empty() {
                report.push(
                    &inst,
                    "anon-distributions",
                    check_distributions(Algorithm::Anonymous, &g),
                );
                for (label, daemon) in [
                    ("sync", ChainDaemon::Synchronous),
                    ("single", ChainDaemon::SingleRandom),
                    ("conflict", ChainDaemon::ConflictPreserver),
                ] {
                    for algo in [Algorithm::Byzantine, Algorithm::Anonymous] {
                        let check = match (algo, label) {
                            (Algorithm::Byzantine, "sync") => "byz-converges-sync",
                            (Algorithm::Byzantine, "single") => "byz-converges-single",
                            (Algorithm::Byzantine, _) => "byz-converges-conflict",
                            (_, "sync") => "anon-converges-sync",
                            (_, "single") => "anon-converges-single",
                            _ => "anon-converges-conflict",
                        };
                        report.push(&inst, check, check_convergence(algo, &g, daemon.clone()));
                    }
                }
                report.push(&inst, "vanish-payoff", check_vanish(&g));
            }
        }
    }
    let ok = fact_power_exact(256) && fact_power_float(1_000_000);
    report.push(
        "-",
        "power-fact",
        Ok((ok, "(k/(k+1))^k ≥ 1/e for k ≤ 10^6".into())),
    );
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_six_graphs() {
        let names: Vec<&str> = catalog().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["K2", "K3", "P3", "P4", "star4", "C4"]);
    }

    #[test]
    fn convergence_on_pair() {
        let k2 = generate(GraphKind::Complete, 2, 0.0, 0).unwrap();
        let (ok, _) = check_convergence(Algorithm::Anonymous, &k2, ChainDaemon::Synchronous).unwrap();
        assert!(ok);
    }

    #[test]
    fn starts_cover_bumped_degrees() {
        let g = Graph::new(2, &[(0, 1)], &[1]).unwrap();
        // Node 0: 2 flags × 2 x-values; node 1: 2 flags × 2 x-values.
        assert_eq!(chain_starts(&g).len(), 16);
    }
}
