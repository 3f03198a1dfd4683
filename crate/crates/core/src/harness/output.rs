use std::io::Write;

use serde::Serialize;

use super::run::TrialResult;

/// One CSV line per trial, in this column order.
#[derive(Debug, Serialize)]
struct Row<'a> {
    seed: u64,
    algo: String,
    daemon: &'a str,
    n: usize,
    m: usize,
    delta: usize,
    byz_count: usize,
    rounds_to_legit: Option<u64>,
    total_moves: u64,
    moves_refresh: u64,
    moves_candidacy: u64,
    moves_withdrawal: u64,
    successful_withdrawals: u64,
    vanish_events: u64,
    #[serde(rename = "final_I_size")]
    final_i_size: usize,
    final_beta_size: usize,
}

/// Trials in index order. A timed-out trial leaves `rounds_to_legit` empty.
pub fn write_csv(results: &[TrialResult], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(Row {
            seed: r.seed,
            algo: r.algo.to_string(),
            daemon: &r.daemon,
            n: r.n,
            m: r.m,
            delta: r.delta,
            byz_count: r.byz_count,
            rounds_to_legit: r.rounds_to_legit,
            total_moves: r.total_moves(),
            moves_refresh: r.metrics.moves_refresh,
            moves_candidacy: r.metrics.moves_candidacy,
            moves_withdrawal: r.metrics.moves_withdrawal,
            successful_withdrawals: r.metrics.successful_withdrawals,
            vanish_events: r.metrics.vanish_events,
            final_i_size: r.final_i_size,
            final_beta_size: r.final_beta_size,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(results: &[TrialResult]) -> String {
    let mut buf = Vec::new();
    write_csv(results, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_experiment, ExperimentSpec};

    #[test]
    fn header_and_rows() {
        let e = ExperimentSpec::from_json(
            r#"{"algo":"anon","graph":{"kind":"path","n":4},"daemon":"sync","trials":3,"seed":1,"p_bound":0.1}"#,
        )
        .unwrap()
        .validate()
        .unwrap();
        let text = csv_string(&run_experiment(&e).unwrap());
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "seed,algo,daemon,n,m,delta,byz_count,rounds_to_legit,total_moves,moves_refresh,\
             moves_candidacy,moves_withdrawal,successful_withdrawals,vanish_events,final_I_size,final_beta_size"
        );
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(&first[..7], ["1", "anon", "sync", "4", "3", "2", "0"]);
        assert_eq!(text.lines().count(), 4);
    }
}
