//! CSV encodings of round traces and confidence-interval dumps.
//!
//! Trace columns: `t, chosen, reward, p_0..p_{k-1}, ctx_0..ctx_{k-1}`, then
//! optionally `pred_0.., dk_0..` for runs driven by KWIK learners (`pred_j`
//! is empty when learner `j` abstained, `dk_j` is 1 in that case). Arms are
//! 0-based. Numbers use the shortest representation that parses back exactly.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fair_bandits::FairBandits;
use crate::kwik::Prediction;
use crate::model::{ArmDistribution, Context, RoundTrace, Trace};

pub fn trace_header(k: usize, with_predictions: bool) -> Vec<String> {
    let mut h: Vec<String> = vec!["t".into(), "chosen".into(), "reward".into()];
    h.extend((0..k).map(|j| format!("p_{j}")));
    h.extend((0..k).map(|j| format!("ctx_{j}")));
    if with_predictions {
        h.extend((0..k).map(|j| format!("pred_{j}")));
        h.extend((0..k).map(|j| format!("dk_{j}")));
    }
    h
}

/// Writes `trace`, plus per-round learner predictions when given.
pub fn write_trace_csv<W: Write>(
    writer: W,
    trace: &[RoundTrace],
    predictions: Option<&[Vec<Prediction>]>,
) -> Result<()> {
    let k = trace.first().map_or(0, |r| r.distribution.k());
    if let Some(p) = predictions {
        if p.len() != trace.len() {
            return Err(Error::ArityMismatch(format!(
                "{} prediction rows for {} rounds",
                p.len(),
                trace.len()
            )));
        }
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(trace_header(k, predictions.is_some()))?;
    for (i, row) in trace.iter().enumerate() {
        if row.distribution.k() != k || row.contexts.len() != k {
            return Err(Error::ArityMismatch(format!(
                "round {} has a different arm count",
                row.t
            )));
        }
        let mut rec: Vec<String> = vec![
            row.t.to_string(),
            row.chosen.to_string(),
            row.reward.to_string(),
        ];
        rec.extend(row.distribution.probs().iter().map(|p| p.to_string()));
        rec.extend(row.contexts.iter().map(Context::encode));
        if let Some(p) = predictions {
            let preds = &p[i];
            if preds.len() != k {
                return Err(Error::ArityMismatch(format!(
                    "round {} has {} predictions",
                    row.t,
                    preds.len()
                )));
            }
            rec.extend(
                preds
                    .iter()
                    .map(|p| p.as_value().map_or(String::new(), |v| v.to_string())),
            );
            rec.extend(
                preds
                    .iter()
                    .map(|p| if p.is_dont_know() { "1" } else { "0" }.to_string()),
            );
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace_csv`], ignoring any prediction columns.
pub fn read_trace_csv<R: Read>(reader: R) -> Result<Trace> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MalformedTrace(format!("missing column {name}")))
    };
    let (t_col, chosen_col, reward_col) = (col("t")?, col("chosen")?, col("reward")?);
    let k = headers.iter().filter(|h| h.starts_with("p_")).count();
    let p_cols = (0..k)
        .map(|j| col(&format!("p_{j}")))
        .collect::<Result<Vec<_>>>()?;
    let ctx_cols = (0..k)
        .map(|j| col(&format!("ctx_{j}")))
        .collect::<Result<Vec<_>>>()?;

    let mut trace = Trace::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|_| Error::MalformedTrace(format!("bad number {:?}", field(i))))
        };
        let int = |i: usize| {
            field(i)
                .parse::<usize>()
                .map_err(|_| Error::MalformedTrace(format!("bad integer {:?}", field(i))))
        };
        let probs = p_cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?;
        let contexts = ctx_cols
            .iter()
            .map(|&c| Context::decode(field(c)))
            .collect::<Result<Vec<_>>>()?;
        trace.append_round(RoundTrace {
            t: int(t_col)?,
            chosen: int(chosen_col)?,
            reward: num(reward_col)?,
            distribution: ArmDistribution::new(probs)?,
            contexts,
        })?;
    }
    Ok(trace)
}

/// One arm's confidence interval after a round of the chaining algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub t: usize,
    pub arm: usize,
    pub lower: f64,
    pub upper: f64,
    pub active: u8,
}

/// Snapshot of every arm's interval and membership in the active set.
pub fn interval_rows(t: usize, state: &FairBandits) -> Vec<IntervalRow> {
    state
        .arms()
        .iter()
        .enumerate()
        .map(|(arm, est)| IntervalRow {
            t,
            arm,
            lower: est.interval.lower,
            upper: est.interval.upper,
            active: state.is_active(arm) as u8,
        })
        .collect()
}

pub fn write_intervals_csv<W: Write>(writer: W, rows: &[IntervalRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(["t", "arm", "lower", "upper", "active"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_intervals_csv<R: Read>(reader: R) -> Result<Vec<IntervalRow>> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize()
        .collect::<std::result::Result<Vec<IntervalRow>, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;

    fn sample_trace() -> (Vec<RoundTrace>, Vec<Vec<Prediction>>) {
        let mut rng = SimRng::new(6);
        let mut rows = Vec::new();
        let mut preds = Vec::new();
        for t in 1..=5 {
            let distribution = ArmDistribution::new(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
            let chosen = distribution.sample(&mut rng);
            rows.push(RoundTrace {
                t,
                contexts: vec![
                    Context::Real(vec![rng.uniform() * 0.5, -0.1]),
                    Context::Bool(vec![true, false, true]),
                ],
                distribution,
                chosen,
                reward: rng.uniform(),
            });
            preds.push(vec![
                Prediction::Value(0.1 * t as f64),
                Prediction::DontKnow,
            ]);
        }
        (rows, preds)
    }

    #[test]
    fn trace_round_trips_exactly() {
        let (rows, preds) = sample_trace();
        for with_preds in [false, true] {
            let mut buf = Vec::new();
            let p = with_preds.then_some(preds.as_slice());
            write_trace_csv(&mut buf, &rows, p).unwrap();
            let back = read_trace_csv(buf.as_slice()).unwrap();
            assert_eq!(back.rows(), rows.as_slice());
        }
    }

    #[test]
    fn header_layout() {
        let (rows, preds) = sample_trace();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &rows, Some(&preds)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,chosen,reward,p_0,p_1,ctx_0,ctx_1,pred_0,pred_1,dk_0,dk_1"
        );
        assert!(lines.next().unwrap().ends_with(",0.1,,0,1"));
    }

    #[test]
    fn malformed_traces_are_rejected() {
        let bad_t = "t,chosen,reward,p_0,ctx_0\n2,0,1,1,-\n";
        assert!(read_trace_csv(bad_t.as_bytes()).is_err());
        let bad_num = "t,chosen,reward,p_0,ctx_0\n1,0,x,1,-\n";
        assert!(read_trace_csv(bad_num.as_bytes()).is_err());
        let missing = "t,chosen,p_0,ctx_0\n1,0,1,-\n";
        assert!(read_trace_csv(missing.as_bytes()).is_err());
    }

    #[test]
    fn intervals_round_trip() {
        let mut fb = FairBandits::new(3, 0.1).unwrap();
        let mut rng = SimRng::new(1);
        let mut rows = Vec::new();
        for t in 1..=20 {
            let (_, arm) = fb.step(&mut rng);
            fb.update(arm, rng.uniform()).unwrap();
            rows.extend(interval_rows(t, &fb));
        }
        let mut buf = Vec::new();
        write_intervals_csv(&mut buf, &rows).unwrap();
        assert!(String::from_utf8(buf.clone())
            .unwrap()
            .starts_with("t,arm,lower,upper,active\n"));
        assert_eq!(read_intervals_csv(buf.as_slice()).unwrap(), rows);
    }
}
